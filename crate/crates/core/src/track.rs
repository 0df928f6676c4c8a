//! Track geometry.
//!
//! A track is a closed loop of straight and arc segments with a fixed
//! corridor width. Everything else is derived: wall polylines offset half a
//! width to each side, the start pose, the lap line, and an arc-length
//! parameterization used for progress measurement. Loading validates the
//! geometry (closure, positive wall radii, non-self-intersecting walls) so
//! the simulation can trust it blindly.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Spacing of wall polyline samples along arcs, in meters.
const WALL_STEP_M: f64 = 0.02;
/// Geometric tolerance for loop closure.
const CLOSURE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnDir {
    Left,
    Right,
}

/// One centerline segment, placed in world coordinates.
#[derive(Clone, Debug)]
pub struct Segment {
    pub start: [f64; 2],
    pub heading: f64,
    /// Arc length from the loop origin to this segment's start.
    pub s0: f64,
    pub length: f64,
    pub form: SegForm,
}

#[derive(Clone, Debug)]
pub enum SegForm {
    Straight,
    Arc { radius: f64, sweep: f64, dir: TurnDir, center: [f64; 2], ang0: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub position: [f64; 2],
    pub heading: f64,
}

/// Counts of recognizable layout features, for describing a track.
///
/// An arc counts as a hairpin from 135 degrees of sweep, as a square corner
/// between 75 and 105 degrees. Two directly adjacent arcs turning opposite
/// ways, each under 75 degrees, form one s-curve. Straights count once they
/// are long enough to act as acceleration zones (4 m and up); shorter ones
/// are treated as connectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureCounts {
    pub straights: usize,
    pub square_corners: usize,
    pub hairpins: usize,
    pub s_curves: usize,
}

#[derive(Clone, Debug)]
pub struct Track {
    pub width: f64,
    pub segments: Vec<Segment>,
    pub total_len: f64,
    pub inner_wall: Vec<[f64; 2]>,
    pub outer_wall: Vec<[f64; 2]>,
    pub start_offset: f64,
    pub lap_count: u32,
    pub start_pose: Pose,
    /// Line across the corridor at `start_offset`; crossing it forward
    /// completes a lap.
    pub lap_line: [[f64; 2]; 2],
    /// Unit tangent of the centerline at the lap line.
    pub lap_line_tangent: [f64; 2],
    /// Enclosing circle per segment, for spatial prefiltering.
    bounds: Vec<([f64; 2], f64)>,
}

fn vec2_sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn vec2_dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn vec2_cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn vec2_norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

impl Segment {
    /// Point and heading at local arc length `t` in `[0, length]`.
    pub fn at(&self, t: f64) -> Pose {
        match self.form {
            SegForm::Straight => Pose {
                position: [
                    self.start[0] + t * self.heading.cos(),
                    self.start[1] + t * self.heading.sin(),
                ],
                heading: self.heading,
            },
            SegForm::Arc { radius, dir, center, ang0, .. } => {
                let dphi = t / radius;
                let (ang, heading) = match dir {
                    TurnDir::Left => (ang0 + dphi, self.heading + dphi),
                    TurnDir::Right => (ang0 - dphi, self.heading - dphi),
                };
                Pose {
                    position: [center[0] + radius * ang.cos(), center[1] + radius * ang.sin()],
                    heading,
                }
            }
        }
    }

    fn end(&self) -> Pose {
        self.at(self.length)
    }

    /// Closest point on this segment: local arc length and distance.
    fn project(&self, p: [f64; 2]) -> (f64, f64) {
        match self.form {
            SegForm::Straight => {
                let dir = [self.heading.cos(), self.heading.sin()];
                let t = vec2_dot(vec2_sub(p, self.start), dir).clamp(0.0, self.length);
                let foot = [self.start[0] + t * dir[0], self.start[1] + t * dir[1]];
                (t, vec2_norm(vec2_sub(p, foot)))
            }
            SegForm::Arc { radius, sweep, dir, center, ang0 } => {
                let v = vec2_sub(p, center);
                let ang = v[1].atan2(v[0]);
                let along = match dir {
                    TurnDir::Left => (ang - ang0).rem_euclid(std::f64::consts::TAU),
                    TurnDir::Right => (ang0 - ang).rem_euclid(std::f64::consts::TAU),
                };
                if along <= sweep {
                    let t = along * radius;
                    (t, (vec2_norm(v) - radius).abs())
                } else {
                    let d0 = vec2_norm(vec2_sub(p, self.at(0.0).position));
                    let d1 = vec2_norm(vec2_sub(p, self.end().position));
                    if d0 <= d1 {
                        (0.0, d0)
                    } else {
                        (self.length, d1)
                    }
                }
            }
        }
    }

    /// Offset point `side` half-widths to the left (+1) or right (-1).
    fn offset_at(&self, t: f64, side: f64, half_width: f64) -> [f64; 2] {
        let pose = self.at(t);
        let n = [-pose.heading.sin(), pose.heading.cos()];
        [pose.position[0] + side * half_width * n[0], pose.position[1] + side * half_width * n[1]]
    }
}

/// Strict interior crossing of segments `a0-a1` and `b0-b1`.
fn segments_cross(a0: [f64; 2], a1: [f64; 2], b0: [f64; 2], b1: [f64; 2]) -> bool {
    let d1 = vec2_cross(vec2_sub(a1, a0), vec2_sub(b0, a0));
    let d2 = vec2_cross(vec2_sub(a1, a0), vec2_sub(b1, a0));
    let d3 = vec2_cross(vec2_sub(b1, b0), vec2_sub(a0, b0));
    let d4 = vec2_cross(vec2_sub(b1, b0), vec2_sub(a1, b0));
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Crossing including endpoint touches, for collision checks.
fn segments_touch(a0: [f64; 2], a1: [f64; 2], b0: [f64; 2], b1: [f64; 2]) -> bool {
    let orient = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| vec2_cross(vec2_sub(q, p), vec2_sub(r, p));
    let on_segment = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| {
        q[0] >= p[0].min(r[0]) && q[0] <= p[0].max(r[0]) && q[1] >= p[1].min(r[1]) && q[1] <= p[1].max(r[1])
    };
    let d1 = orient(b0, b1, a0);
    let d2 = orient(b0, b1, a1);
    let d3 = orient(a0, a1, b0);
    let d4 = orient(a0, a1, b1);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(b0, a0, b1))
        || (d2 == 0.0 && on_segment(b0, a1, b1))
        || (d3 == 0.0 && on_segment(a0, b0, a1))
        || (d4 == 0.0 && on_segment(a0, b1, a1))
}

fn parse_f64(v: &serde_json::Value, what: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| CoreError::TrackParse(format!("{what} must be a number")))
}

impl Track {
    /// Load from the JSON track format. The special spec `bundled:default`
    /// resolves to the circuit compiled into this crate.
    pub fn load_spec(spec: &str) -> Result<Track> {
        if spec == "bundled:default" {
            return Track::from_json_str(include_str!("../assets/default_track.json"));
        }
        let text = std::fs::read_to_string(spec)
            .map_err(|e| CoreError::TrackParse(format!("cannot read `{spec}`: {e}")))?;
        Track::from_json_str(&text)
    }

    pub fn bundled_default() -> Track {
        Track::load_spec("bundled:default").expect("bundled track is valid")
    }

    pub fn from_json_str(text: &str) -> Result<Track> {
        let root: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CoreError::TrackParse(e.to_string()))?;
        let obj = root
            .as_object()
            .ok_or_else(|| CoreError::TrackParse("top level must be an object".into()))?;
        for key in obj.keys() {
            if !["track_width", "segments", "start_offset", "lap_count"].contains(&key.as_str()) {
                return Err(CoreError::TrackParse(format!("unknown field `{key}`")));
            }
        }
        let width = parse_f64(
            obj.get("track_width").ok_or_else(|| CoreError::TrackParse("missing field `track_width`".into()))?,
            "track_width",
        )?;
        let start_offset = match obj.get("start_offset") {
            Some(v) => parse_f64(v, "start_offset")?,
            None => 0.0,
        };
        let lap_count = match obj.get("lap_count") {
            Some(v) => v
                .as_u64()
                .filter(|&n| n >= 1 && n <= u32::MAX as u64)
                .ok_or_else(|| CoreError::TrackParse("lap_count must be a positive integer".into()))?
                as u32,
            None => 1,
        };
        let seg_values = obj
            .get("segments")
            .and_then(|v| v.as_array())
            .ok_or_else(|| CoreError::TrackParse("missing field `segments` (array)".into()))?;

        let mut specs = Vec::with_capacity(seg_values.len());
        for (i, sv) in seg_values.iter().enumerate() {
            specs.push(parse_segment(i, sv)?);
        }
        Track::build(width, &specs, start_offset, lap_count)
    }

    fn build(width: f64, specs: &[ParsedSegment], start_offset: f64, lap_count: u32) -> Result<Track> {
        if !(width > 0.0) {
            return Err(CoreError::TrackParse("track_width must be positive".into()));
        }
        if specs.is_empty() {
            return Err(CoreError::TrackParse("segments must not be empty".into()));
        }

        // Walk the loop, placing each segment where the previous one ended.
        let mut segments = Vec::with_capacity(specs.len());
        let mut cursor = Pose { position: [0.0, 0.0], heading: 0.0 };
        let mut s0 = 0.0;
        let mut net_turn = 0.0;
        for (i, spec) in specs.iter().enumerate() {
            let seg = match *spec {
                ParsedSegment::Straight { length } => {
                    if !(length > 0.0) {
                        return Err(CoreError::TrackValidation { segment: i, reason: "straight length must be positive".into() });
                    }
                    Segment { start: cursor.position, heading: cursor.heading, s0, length, form: SegForm::Straight }
                }
                ParsedSegment::Arc { radius, sweep_deg, dir } => {
                    if !(radius > 0.0) {
                        return Err(CoreError::TrackValidation { segment: i, reason: "arc radius must be positive".into() });
                    }
                    if !(sweep_deg > 0.0) {
                        return Err(CoreError::TrackValidation { segment: i, reason: "arc sweep must be positive".into() });
                    }
                    if radius - width / 2.0 <= 0.0 {
                        return Err(CoreError::TrackValidation {
                            segment: i,
                            reason: format!("arc radius {radius} leaves no room for the inside wall at width {width}"),
                        });
                    }
                    let sweep = sweep_deg.to_radians();
                    let n = [-cursor.heading.sin(), cursor.heading.cos()];
                    let center = match dir {
                        TurnDir::Left => [cursor.position[0] + radius * n[0], cursor.position[1] + radius * n[1]],
                        TurnDir::Right => [cursor.position[0] - radius * n[0], cursor.position[1] - radius * n[1]],
                    };
                    let v = vec2_sub(cursor.position, center);
                    let ang0 = v[1].atan2(v[0]);
                    net_turn += match dir {
                        TurnDir::Left => sweep,
                        TurnDir::Right => -sweep,
                    };
                    Segment {
                        start: cursor.position,
                        heading: cursor.heading,
                        s0,
                        length: radius * sweep,
                        form: SegForm::Arc { radius, sweep, dir, center, ang0 },
                    }
                }
            };
            cursor = seg.end();
            s0 += seg.length;
            segments.push(seg);
        }
        let total_len = s0;
        let last = segments.len() - 1;

        let gap = vec2_norm(vec2_sub(cursor.position, [0.0, 0.0]));
        if gap > CLOSURE_TOL {
            return Err(CoreError::TrackValidation {
                segment: last,
                reason: format!("loop not closed: endpoint misses start by {gap:.3e} m"),
            });
        }
        let heading_gap = (cursor.heading.rem_euclid(std::f64::consts::TAU)).min(
            (std::f64::consts::TAU - cursor.heading.rem_euclid(std::f64::consts::TAU)).abs(),
        );
        if heading_gap > CLOSURE_TOL {
            return Err(CoreError::TrackValidation {
                segment: last,
                reason: format!("loop not closed: final heading off by {heading_gap:.3e} rad"),
            });
        }
        let turns = net_turn / std::f64::consts::TAU;
        if (turns - turns.round()).abs() > 1e-9 || turns.round() == 0.0 {
            return Err(CoreError::TrackValidation {
                segment: last,
                reason: format!("loop not closed: net turn is {net_turn:.6} rad"),
            });
        }
        // Counterclockwise loops have the inside on the left.
        let inner_side = if turns > 0.0 { 1.0 } else { -1.0 };

        let half = width / 2.0;
        // Wall points come tagged with the centerline segment they were
        // sampled from, so validation failures can name a segment.
        let (inner_wall, inner_src) = sample_wall(&segments, inner_side, half);
        let (outer_wall, outer_src) = sample_wall(&segments, -inner_side, half);
        check_simple(&inner_wall, &inner_src, "inside wall")?;
        check_simple(&outer_wall, &outer_src, "outside wall")?;
        check_disjoint(&inner_wall, &inner_src, &outer_wall)?;

        let start_offset = start_offset.rem_euclid(total_len);
        let bounds = segments.iter().map(enclosing_circle).collect();
        let mut track = Track {
            width,
            segments,
            total_len,
            inner_wall,
            outer_wall,
            start_offset,
            lap_count,
            start_pose: Pose { position: [0.0, 0.0], heading: 0.0 },
            lap_line: [[0.0, 0.0]; 2],
            lap_line_tangent: [1.0, 0.0],
            bounds,
        };
        let start = track.point_at(start_offset);
        track.start_pose = start;
        let (seg_idx, t) = track.locate(start_offset);
        let seg = &track.segments[seg_idx];
        track.lap_line = [seg.offset_at(t, 1.0, half), seg.offset_at(t, -1.0, half)];
        track.lap_line_tangent = [start.heading.cos(), start.heading.sin()];

        let d = track.distance_to_centerline(track.start_pose.position);
        if d >= half {
            return Err(CoreError::TrackValidation {
                segment: seg_idx,
                reason: "start pose does not lie strictly between the walls".into(),
            });
        }
        Ok(track)
    }

    /// Segment index and local arc length for a global arc length.
    fn locate(&self, s: f64) -> (usize, f64) {
        let s = s.rem_euclid(self.total_len);
        // Linear walk; tracks have tens of segments at most.
        for (i, seg) in self.segments.iter().enumerate() {
            if s < seg.s0 + seg.length {
                return (i, s - seg.s0);
            }
        }
        (self.segments.len() - 1, self.segments.last().unwrap().length)
    }

    /// Centerline pose at a global arc length (wraps around the loop).
    pub fn point_at(&self, s: f64) -> Pose {
        let (i, t) = self.locate(s);
        self.segments[i].at(t)
    }

    /// Closest centerline point: global arc length and distance.
    pub fn project(&self, p: [f64; 2]) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY);
        for seg in &self.segments {
            let (t, d) = seg.project(p);
            if d < best.1 {
                best = ((seg.s0 + t) % self.total_len, d);
            }
        }
        best
    }

    pub fn distance_to_centerline(&self, p: [f64; 2]) -> f64 {
        self.project(p).1
    }

    /// Segments whose enclosing circle intersects the query circle.
    pub fn candidate_segments(&self, center: [f64; 2], radius: f64) -> Vec<usize> {
        self.bounds
            .iter()
            .enumerate()
            .filter(|(_, (c, r))| vec2_norm(vec2_sub(*c, center)) <= r + radius)
            .map(|(i, _)| i)
            .collect()
    }

    /// Distance to the centerline considering only the given segments.
    /// Infinite when the candidate list is empty.
    pub fn distance_to_centerline_in(&self, p: [f64; 2], candidates: &[usize]) -> f64 {
        let mut best = f64::INFINITY;
        for &i in candidates {
            let (_, d) = self.segments[i].project(p);
            if d < best {
                best = d;
            }
        }
        best
    }

    /// Does the motion segment `a -> b` touch either wall?
    pub fn motion_hits_wall(&self, a: [f64; 2], b: [f64; 2]) -> bool {
        wall_hit(&self.inner_wall, a, b) || wall_hit(&self.outer_wall, a, b)
    }

    /// If the motion segment crosses the lap line, the sign of its component
    /// along the track direction (+1 forward, -1 backward).
    pub fn lap_line_crossing(&self, a: [f64; 2], b: [f64; 2]) -> Option<f64> {
        if a == b || !segments_touch(a, b, self.lap_line[0], self.lap_line[1]) {
            return None;
        }
        let motion = vec2_sub(b, a);
        Some(vec2_dot(motion, self.lap_line_tangent).signum())
    }

    /// True when the point is inside the drivable corridor.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.distance_to_centerline(p) < self.width / 2.0
    }

    pub fn feature_inventory(&self) -> FeatureCounts {
        let n = self.segments.len();
        let mut counts = FeatureCounts { straights: 0, square_corners: 0, hairpins: 0, s_curves: 0 };
        let mut in_s_curve = vec![false; n];
        let arc_info = |i: usize| -> Option<(f64, TurnDir)> {
            match self.segments[i].form {
                SegForm::Arc { sweep, dir, .. } => Some((sweep.to_degrees(), dir)),
                SegForm::Straight => None,
            }
        };
        for i in 0..n {
            let j = (i + 1) % n;
            if let (Some((sa, da)), Some((sb, db))) = (arc_info(i), arc_info(j)) {
                if da != db && sa < 75.0 && sb < 75.0 && !in_s_curve[i] && !in_s_curve[j] {
                    counts.s_curves += 1;
                    in_s_curve[i] = true;
                    in_s_curve[j] = true;
                }
            }
        }
        for i in 0..n {
            match self.segments[i].form {
                SegForm::Straight => {
                    if self.segments[i].length >= 4.0 {
                        counts.straights += 1;
                    }
                }
                SegForm::Arc { sweep, .. } => {
                    if in_s_curve[i] {
                        continue;
                    }
                    let deg = sweep.to_degrees();
                    if deg >= 135.0 {
                        counts.hairpins += 1;
                    } else if (75.0..=105.0).contains(&deg) {
                        counts.square_corners += 1;
                    }
                }
            }
        }
        counts
    }
}

fn wall_hit(wall: &[[f64; 2]], a: [f64; 2], b: [f64; 2]) -> bool {
    if a == b {
        return false;
    }
    let (lo_x, hi_x) = (a[0].min(b[0]), a[0].max(b[0]));
    let (lo_y, hi_y) = (a[1].min(b[1]), a[1].max(b[1]));
    let n = wall.len();
    for i in 0..n {
        let p = wall[i];
        let q = wall[(i + 1) % n];
        if p[0].min(q[0]) > hi_x || p[0].max(q[0]) < lo_x || p[1].min(q[1]) > hi_y || p[1].max(q[1]) < lo_y {
            continue;
        }
        if segments_touch(a, b, p, q) {
            return true;
        }
    }
    false
}

fn sample_wall(segments: &[Segment], side: f64, half: f64) -> (Vec<[f64; 2]>, Vec<usize>) {
    let mut points = Vec::new();
    let mut src = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        let steps = match seg.form {
            SegForm::Straight => 1,
            SegForm::Arc { .. } => ((seg.length / WALL_STEP_M).ceil() as usize).max(8),
        };
        // The segment's endpoint is the next segment's start point.
        for k in 0..steps {
            let t = seg.length * k as f64 / steps as f64;
            points.push(seg.offset_at(t, side, half));
            src.push(i);
        }
    }
    (points, src)
}

fn check_simple(wall: &[[f64; 2]], src: &[usize], name: &str) -> Result<()> {
    let n = wall.len();
    for i in 0..n {
        let a0 = wall[i];
        let a1 = wall[(i + 1) % n];
        for j in i + 1..n {
            // Edges sharing an endpoint (ring-adjacent) always touch.
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let b0 = wall[j];
            let b1 = wall[(j + 1) % n];
            if a0[0].min(a1[0]) > b0[0].max(b1[0])
                || a0[0].max(a1[0]) < b0[0].min(b1[0])
                || a0[1].min(a1[1]) > b0[1].max(b1[1])
                || a0[1].max(a1[1]) < b0[1].min(b1[1])
            {
                continue;
            }
            if segments_cross(a0, a1, b0, b1) {
                return Err(CoreError::TrackValidation {
                    segment: src[i],
                    reason: format!("{name} self-intersects (near segments {} and {})", src[i], src[j]),
                });
            }
        }
    }
    Ok(())
}

fn check_disjoint(inner: &[[f64; 2]], inner_src: &[usize], outer: &[[f64; 2]]) -> Result<()> {
    let n = inner.len();
    let m = outer.len();
    for i in 0..n {
        let a0 = inner[i];
        let a1 = inner[(i + 1) % n];
        for j in 0..m {
            let b0 = outer[j];
            let b1 = outer[(j + 1) % m];
            if a0[0].min(a1[0]) > b0[0].max(b1[0])
                || a0[0].max(a1[0]) < b0[0].min(b1[0])
                || a0[1].min(a1[1]) > b0[1].max(b1[1])
                || a0[1].max(a1[1]) < b0[1].min(b1[1])
            {
                continue;
            }
            if segments_cross(a0, a1, b0, b1) {
                return Err(CoreError::TrackValidation {
                    segment: inner_src[i],
                    reason: "inside and outside walls cross".into(),
                });
            }
        }
    }
    Ok(())
}

fn enclosing_circle(seg: &Segment) -> ([f64; 2], f64) {
    match seg.form {
        SegForm::Straight => {
            let mid = seg.at(seg.length / 2.0).position;
            (mid, seg.length / 2.0)
        }
        SegForm::Arc { radius, center, .. } => (center, radius),
    }
}

enum ParsedSegment {
    Straight { length: f64 },
    Arc { radius: f64, sweep_deg: f64, dir: TurnDir },
}

fn parse_segment(i: usize, v: &serde_json::Value) -> Result<ParsedSegment> {
    let fail = |reason: String| CoreError::TrackParse(format!("segment {i}: {reason}"));
    let obj = v.as_object().ok_or_else(|| fail("must be an object".into()))?;
    let kind = obj
        .get("kind")
        .and_then(|k| k.as_str())
        .ok_or_else(|| fail("missing field `kind`".into()))?;
    match kind {
        "straight" => {
            for key in obj.keys() {
                if !["kind", "length"].contains(&key.as_str()) {
                    return Err(fail(format!("unknown field `{key}`")));
                }
            }
            let length = parse_f64(
                obj.get("length").ok_or_else(|| fail("missing field `length`".into()))?,
                "length",
            )
            .map_err(|e| fail(e.to_string()))?;
            Ok(ParsedSegment::Straight { length })
        }
        "arc" => {
            for key in obj.keys() {
                if !["kind", "radius", "sweep_deg", "direction"].contains(&key.as_str()) {
                    return Err(fail(format!("unknown field `{key}`")));
                }
            }
            let radius = parse_f64(
                obj.get("radius").ok_or_else(|| fail("missing field `radius`".into()))?,
                "radius",
            )
            .map_err(|e| fail(e.to_string()))?;
            let sweep_deg = parse_f64(
                obj.get("sweep_deg").ok_or_else(|| fail("missing field `sweep_deg`".into()))?,
                "sweep_deg",
            )
            .map_err(|e| fail(e.to_string()))?;
            let dir = match obj.get("direction").and_then(|d| d.as_str()) {
                Some("left") => TurnDir::Left,
                Some("right") => TurnDir::Right,
                _ => return Err(fail("field `direction` must be \"left\" or \"right\"".into())),
            };
            Ok(ParsedSegment::Arc { radius, sweep_deg, dir })
        }
        other => Err(fail(format!("unknown kind `{other}`"))),
    }
}
