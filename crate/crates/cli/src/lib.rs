//! Experiment harness for the smoothrace testbed.
//!
//! The library half of the `smoothrace` binary: named presets in
//! [`presets`], the command implementations in [`commands`], result tables
//! in [`report`], and plot emission in [`svg`]. The binary itself only
//! parses arguments and maps errors to exit codes.

pub mod commands;
pub mod presets;
pub mod report;
pub mod svg;

/// An operator mistake: bad flags, a bad config, an impossible request.
/// Distinguished from runtime failures so the binary can exit 2 instead
/// of 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// True when the error chain bottoms out in an operator mistake rather than
/// a runtime failure.
pub fn is_usage_error(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        cause.downcast_ref::<UsageError>().is_some()
            || matches!(
                cause.downcast_ref::<smoothrace_core::error::CoreError>(),
                Some(smoothrace_core::error::CoreError::Config(_))
            )
    })
}
