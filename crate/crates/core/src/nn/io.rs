//! Parameter file serialization.
//!
//! Layout: the ASCII magic `SRPM`, a little-endian `u32` format version, a
//! little-endian `u32` header length, a JSON header describing the
//! architecture and the tensor manifest, then every tensor's values as
//! little-endian `f32` in manifest order. Loading refuses files whose
//! architecture or manifest does not match the receiving network.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::nn::ParamNet;

const MAGIC: &[u8; 4] = b"SRPM";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize, PartialEq)]
struct Header {
    arch: serde_json::Value,
    tensors: Vec<TensorSpec>,
}

#[derive(Serialize, Deserialize, PartialEq)]
struct TensorSpec {
    name: String,
    shape: Vec<usize>,
}

fn header_for(net: &impl ParamNet) -> Header {
    Header {
        arch: net.arch(),
        tensors: net
            .param_specs()
            .into_iter()
            .map(|(name, shape)| TensorSpec { name, shape })
            .collect(),
    }
}

pub fn save_params(path: &Path, net: &impl ParamNet) -> Result<()> {
    let header = serde_json::to_vec(&header_for(net))?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&VERSION.to_le_bytes())?;
    file.write_all(&(header.len() as u32).to_le_bytes())?;
    file.write_all(&header)?;
    let mut buf = Vec::new();
    for p in net.params() {
        for &v in p {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    file.write_all(&buf)?;
    Ok(())
}

pub fn load_params(path: &Path, net: &mut impl ParamNet) -> Result<()> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let fail = |reason: String| CoreError::ParamFile(format!("{}: {reason}", path.display()));

    if bytes.len() < 12 || &bytes[0..4] != MAGIC {
        return Err(fail("not a parameter file (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(fail(format!("unsupported format version {version} (expected {VERSION})")));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() < 12 + header_len {
        return Err(fail("truncated header".into()));
    }
    let header: Header = serde_json::from_slice(&bytes[12..12 + header_len])
        .map_err(|e| fail(format!("malformed header: {e}")))?;

    let expected = header_for(&*net);
    if header.arch != expected.arch {
        return Err(fail(format!(
            "architecture mismatch: file has {}, this network is {}",
            header.arch, expected.arch
        )));
    }
    if header.tensors != expected.tensors {
        return Err(fail("tensor manifest does not match the network".into()));
    }

    let total: usize = header.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
    let data = &bytes[12 + header_len..];
    if data.len() != total * 4 {
        return Err(fail(format!(
            "data length {} does not match the manifest ({} values)",
            data.len(),
            total
        )));
    }
    let mut off = 0;
    for p in net.params_mut() {
        for v in p.iter_mut() {
            *v = f32::from_le_bytes(data[off..off + 4].try_into().unwrap()) as f64;
            off += 4;
        }
    }
    Ok(())
}
