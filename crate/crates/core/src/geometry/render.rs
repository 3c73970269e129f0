//! Orthographic depth rasterization of meshes into 128x128 views.

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::mesh::TriangleMesh;

pub const RESOLUTION: usize = 128;

/// Half-width of the square view window in object units.
const WINDOW: f64 = 0.9;
/// Distance of the image plane from the origin along the view axis.
const CAMERA_DISTANCE: f64 = 2.0;
/// Closest depth any point of a unit-box object can have.
const NEAR_DEPTH: f64 = CAMERA_DISTANCE - 0.866_025_403_784_438_6;
const LEVELS: f64 = 65535.0;

/// A rendered 128x128 single-channel image with its viewpoint.
///
/// Pixels are row-major with row 0 at the top. Values lie in `[0, 1]`,
/// with 0 for background and normalized inverse depth elsewhere, quantized
/// to 16-bit levels so the image survives a PGM round trip unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    pixels: Vec<f32>,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl RenderedView {
    pub fn new(pixels: Vec<f32>, azimuth_deg: f64, elevation_deg: f64) -> Result<Self> {
        if pixels.len() != RESOLUTION * RESOLUTION {
            return Err(Error::shape("rendered view", &[pixels.len()], &[RESOLUTION * RESOLUTION]));
        }
        if pixels.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid("pixel values must lie in [0, 1]"));
        }
        Ok(Self {
            pixels,
            azimuth_deg,
            elevation_deg,
        })
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * RESOLUTION + col]
    }

    pub fn foreground_count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p > 0.0).count()
    }
}

/// Unit vector from the origin towards the camera. Azimuth 0 looks at the
/// front (camera on -y), azimuth 180 at the back.
pub fn camera_direction(azimuth_deg: f64, elevation_deg: f64) -> [f64; 3] {
    let (a, e) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
    [a.sin() * e.cos(), -a.cos() * e.cos(), e.sin()]
}

pub fn render_view<R: Real>(mesh: &TriangleMesh<R>, azimuth_deg: f64, elevation_deg: f64) -> Result<RenderedView> {
    if !(0.0..360.0).contains(&azimuth_deg) {
        return Err(Error::invalid(format!("azimuth {azimuth_deg} outside [0, 360)")));
    }
    if !(-90.0..=90.0).contains(&elevation_deg) {
        return Err(Error::invalid(format!("elevation {elevation_deg} outside [-90, 90]")));
    }
    let c = camera_direction(azimuth_deg, elevation_deg);
    let a = azimuth_deg.to_radians();
    let right = [a.cos(), a.sin(), 0.0];
    let fwd = c.map(|v| -v);
    let up = [
        right[1] * fwd[2] - right[2] * fwd[1],
        right[2] * fwd[0] - right[0] * fwd[2],
        right[0] * fwd[1] - right[1] * fwd[0],
    ];
    let dot = |p: [f64; 3], q: [f64; 3]| p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
    let scale = RESOLUTION as f64 / (2.0 * WINDOW);
    // (column, row, depth) in pixel units
    let projected: Vec<[f64; 3]> = mesh
        .vertices()
        .iter()
        .map(|v| {
            let p = v.map(|x| x.as_f64());
            [
                (dot(p, right) + WINDOW) * scale,
                (WINDOW - dot(p, up)) * scale,
                CAMERA_DISTANCE - dot(p, c),
            ]
        })
        .collect();

    let mut depth = vec![f64::INFINITY; RESOLUTION * RESOLUTION];
    for f in mesh.faces() {
        let [p0, p1, p2] = f.map(|i| projected[i]);
        let area = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
        if area.abs() < 1e-12 {
            continue;
        }
        let min_x = p0[0].min(p1[0]).min(p2[0]).floor().max(0.0) as usize;
        let max_x = (p0[0].max(p1[0]).max(p2[0]).ceil() as isize).clamp(0, RESOLUTION as isize) as usize;
        let min_y = p0[1].min(p1[1]).min(p2[1]).floor().max(0.0) as usize;
        let max_y = (p0[1].max(p1[1]).max(p2[1]).ceil() as isize).clamp(0, RESOLUTION as isize) as usize;
        for row in min_y..max_y {
            let py = row as f64 + 0.5;
            for col in min_x..max_x {
                let px = col as f64 + 0.5;
                let w0 = ((p2[0] - p1[0]) * (py - p1[1]) - (p2[1] - p1[1]) * (px - p1[0])) / area;
                let w1 = ((p0[0] - p2[0]) * (py - p2[1]) - (p0[1] - p2[1]) * (px - p2[0])) / area;
                let w2 = 1.0 - w0 - w1;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let z = w0 * p0[2] + w1 * p1[2] + w2 * p2[2];
                let slot = &mut depth[row * RESOLUTION + col];
                if z < *slot {
                    *slot = z;
                }
            }
        }
    }
    let pixels = depth
        .into_iter()
        .map(|z| {
            if z.is_finite() {
                let v = (NEAR_DEPTH / z.max(NEAR_DEPTH)).min(1.0);
                ((v * LEVELS).round() / LEVELS) as f32
            } else {
                0.0
            }
        })
        .collect();
    RenderedView::new(pixels, azimuth_deg, elevation_deg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives::{generate_primitive, PrimitiveSpec};

    #[test]
    fn camera_convention() {
        let front = camera_direction(0.0, 0.0);
        assert!((front[1] + 1.0).abs() < 1e-12);
        let back = camera_direction(180.0, 0.0);
        assert!((back[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn box_is_visible_and_framed() {
        let m: TriangleMesh<f64> = generate_primitive(&PrimitiveSpec::Box { size: [1.0; 3] }).unwrap();
        let v = render_view(&m, 30.0, 20.0).unwrap();
        assert!(v.foreground_count() > 2000);
        // corners of the frame stay empty
        assert_eq!(v.get(0, 0), 0.0);
        assert_eq!(v.get(127, 127), 0.0);
        assert!(v.pixels().iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn rejects_bad_angles() {
        let m: TriangleMesh<f64> = generate_primitive(&PrimitiveSpec::Box { size: [1.0; 3] }).unwrap();
        assert!(render_view(&m, 360.0, 0.0).is_err());
        assert!(render_view(&m, 0.0, 91.0).is_err());
    }
}
