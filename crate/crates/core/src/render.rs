//! First-person camera rendering.
//!
//! The observation is a low-resolution RGB view from a pinhole camera
//! mounted on the car, pitched down at the road. The world is flat: every
//! view ray either escapes above the horizon (background) or hits the
//! ground plane, where the hit point is classified by its distance to the
//! track centerline as road surface, wall band, or off-track background.
//! Rendering is pure arithmetic over `f64`, so identical states produce
//! identical images.

use crate::config::{CameraConfig, ObservationConfig};
use crate::obs::Image;
use crate::track::{Pose, Track};

pub const SURFACE_COLOR: [u8; 3] = [70, 70, 70];
pub const WALL_COLOR: [u8; 3] = [235, 235, 235];
pub const BACKGROUND_COLOR: [u8; 3] = [0, 120, 40];

/// Painted width of the wall band on the ground, in meters.
const WALL_BAND_M: f64 = 0.08;

pub struct Renderer {
    height: usize,
    width: usize,
    /// Focal length in pixel units.
    focal: f64,
    cam_height: f64,
    pitch: f64,
    far_clip: f64,
}

impl Renderer {
    pub fn new(obs: &ObservationConfig, cam: &CameraConfig) -> Renderer {
        Renderer {
            height: obs.height,
            width: obs.width,
            focal: (obs.width as f64 / 2.0) / (cam.hfov_deg.to_radians() / 2.0).tan(),
            cam_height: cam.height_m,
            pitch: cam.pitch_deg.to_radians(),
            far_clip: cam.far_clip_m,
        }
    }

    pub fn render(&self, track: &Track, pose: &Pose) -> Image {
        let candidates =
            track.candidate_segments(pose.position, self.far_clip + track.width / 2.0 + WALL_BAND_M);
        let mut img = Image::new(self.height, self.width);
        let (sp, cp) = self.pitch.sin_cos();
        let (sh, ch) = pose.heading.sin_cos();
        /*
         * World-frame camera basis, split into horizontal parts and z
         * components. The right axis is horizontal, so its z part is zero.
         */
        let fwd_h = [ch * cp, sh * cp];
        let fwd_z = -sp;
        let right_h = [sh, -ch];
        let up_h = [ch * sp, sh * sp];
        let up_z = cp;

        for row in 0..self.height {
            let py = row as f64 + 0.5 - self.height as f64 / 2.0;
            let dz = self.focal * fwd_z - py * up_z;
            if dz >= -1e-12 {
                for col in 0..self.width {
                    img.set_pixel(row, col, BACKGROUND_COLOR);
                }
                continue;
            }
            let t = -self.cam_height / dz;
            for col in 0..self.width {
                let px = col as f64 + 0.5 - self.width as f64 / 2.0;
                let dx = self.focal * fwd_h[0] + px * right_h[0] - py * up_h[0];
                let dy = self.focal * fwd_h[1] + px * right_h[1] - py * up_h[1];
                let gx = t * dx;
                let gy = t * dy;
                let range = gx.hypot(gy);
                let color = if range > self.far_clip {
                    BACKGROUND_COLOR
                } else {
                    let ground = [pose.position[0] + gx, pose.position[1] + gy];
                    classify(track.distance_to_centerline_in(ground, &candidates), track.width)
                };
                img.set_pixel(row, col, color);
            }
        }
        img
    }
}

fn classify(dist: f64, width: f64) -> [u8; 3] {
    let half = width / 2.0;
    if dist <= half - WALL_BAND_M / 2.0 {
        SURFACE_COLOR
    } else if dist <= half + WALL_BAND_M / 2.0 {
        WALL_COLOR
    } else {
        BACKGROUND_COLOR
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CameraConfig, ObservationConfig};
    use crate::track::Track;

    fn stadium() -> Track {
        let text = r#"{"track_width": 1.0, "segments": [
            {"kind": "straight", "length": 20.0},
            {"kind": "arc", "radius": 3.0, "sweep_deg": 180.0, "direction": "left"},
            {"kind": "straight", "length": 20.0},
            {"kind": "arc", "radius": 3.0, "sweep_deg": 180.0, "direction": "left"}
        ]}"#;
        Track::from_json_str(text).unwrap()
    }

    fn default_renderer() -> Renderer {
        Renderer::new(&ObservationConfig::default(), &CameraConfig::default())
    }

    #[test]
    fn view_down_a_straight_is_mirror_symmetric() {
        let track = stadium();
        let renderer = default_renderer();
        let img = renderer.render(&track, &track.point_at(10.0));
        for row in 0..img.h {
            for col in 0..img.w {
                assert_eq!(
                    img.pixel(row, col),
                    img.pixel(row, img.w - 1 - col),
                    "asymmetry at ({row}, {col})"
                );
            }
        }
    }

    #[test]
    fn rendering_is_deterministic() {
        let track = Track::bundled_default();
        let renderer = default_renderer();
        let pose = track.point_at(3.3);
        let a = renderer.render(&track, &pose);
        let b = renderer.render(&track, &pose);
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn sky_rows_are_background_and_the_road_is_underfoot() {
        let track = Track::bundled_default();
        let renderer = default_renderer();
        let img = renderer.render(&track, &track.start_pose);
        for col in 0..img.w {
            assert_eq!(img.pixel(0, col), BACKGROUND_COLOR);
        }
        assert_eq!(img.pixel(img.h - 1, img.w / 2), SURFACE_COLOR);
    }

    #[test]
    fn wall_bands_flank_the_road_ahead() {
        let track = stadium();
        let renderer = default_renderer();
        let img = renderer.render(&track, &track.point_at(10.0));
        // A row this far above the bottom looks a good meter ahead, where
        // the horizontal field of view is wider than the corridor.
        let row = 2 * img.h / 5;
        let colors: Vec<[u8; 3]> = (0..img.w).map(|c| img.pixel(row, c)).collect();
        assert!(colors.contains(&WALL_COLOR));
        assert!(colors.contains(&SURFACE_COLOR));
        let first_wall = colors.iter().position(|&c| c == WALL_COLOR).unwrap();
        let last_wall = colors.iter().rposition(|&c| c == WALL_COLOR).unwrap();
        let road_mid = colors[img.w / 2];
        assert_eq!(road_mid, SURFACE_COLOR);
        assert!(first_wall < img.w / 2 && last_wall > img.w / 2);
    }

    #[test]
    fn segment_prefilter_matches_the_exhaustive_render() {
        let track = Track::bundled_default();
        let renderer = default_renderer();
        for s in [0.7, 6.5, 14.0, 21.0, 30.0] {
            let pose = track.point_at(s);
            let fast = renderer.render(&track, &pose);
            let slow = render_exhaustive(&renderer, &track, &pose);
            assert_eq!(fast.data, slow.data, "mismatch at s={s}");
        }
    }

    /*
     * Reference renderer that classifies against every segment, for
     * checking the prefiltered production path.
     */
    fn render_exhaustive(r: &Renderer, track: &Track, pose: &crate::track::Pose) -> Image {
        let mut img = Image::new(r.height, r.width);
        let (sp, cp) = r.pitch.sin_cos();
        let (sh, ch) = pose.heading.sin_cos();
        let fwd_h = [ch * cp, sh * cp];
        let right_h = [sh, -ch];
        let up_h = [ch * sp, sh * sp];
        for row in 0..r.height {
            let py = row as f64 + 0.5 - r.height as f64 / 2.0;
            let dz = r.focal * -sp - py * cp;
            for col in 0..r.width {
                let color = if dz >= -1e-12 {
                    BACKGROUND_COLOR
                } else {
                    let t = -r.cam_height / dz;
                    let px = col as f64 + 0.5 - r.width as f64 / 2.0;
                    let gx = t * (r.focal * fwd_h[0] + px * right_h[0] - py * up_h[0]);
                    let gy = t * (r.focal * fwd_h[1] + px * right_h[1] - py * up_h[1]);
                    if gx.hypot(gy) > r.far_clip {
                        BACKGROUND_COLOR
                    } else {
                        let ground = [pose.position[0] + gx, pose.position[1] + gy];
                        classify(track.distance_to_centerline(ground), track.width)
                    }
                };
                img.set_pixel(row, col, color);
            }
        }
        img
    }
}
