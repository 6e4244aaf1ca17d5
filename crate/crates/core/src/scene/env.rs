//! Lat-long environment maps: `phi = 0` at +x increasing towards +y across
//! columns, `theta = 0` (+z) at the top row.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use nalgebra::Vector3;

use super::frame::Frame;
use super::image::HdrImage;
use crate::error::{Error, Result};
use crate::sh::{fibonacci_hemisphere, fibonacci_sphere, fit_dense, Direction, DirectionalSamples, ShExpansion};

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentMap {
    image: HdrImage,
}

impl EnvironmentMap {
    /// Validates the 2:1 aspect and that radiance is finite and
    /// non-negative.
    pub fn new(image: HdrImage) -> Result<Self> {
        if image.width != 2 * image.height {
            return Err(Error::invalid(format!(
                "lat-long map must be 2:1, got {}x{}",
                image.width, image.height
            )));
        }
        if let Some(v) = image.data.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(format!("environment radiance {v} is not finite and >= 0")));
        }
        Ok(EnvironmentMap { image })
    }

    pub fn constant(height: usize, rgb: [f32; 3]) -> Self {
        EnvironmentMap {
            image: HdrImage::filled(2 * height, height, rgb),
        }
    }

    /// Fills every pixel from a function of its center direction.
    pub fn from_fn(height: usize, f: impl Fn(&Vector3<f64>) -> [f64; 3]) -> Result<Self> {
        let w = 2 * height;
        let mut image = HdrImage::filled(w, height, [0.0; 3]);
        for y in 0..height {
            for x in 0..w {
                let d = Self::pixel_direction(w, height, x, y).to_vector();
                image.set_pixel(x, y, f(&d).map(|v| v as f32));
            }
        }
        Self::new(image)
    }

    pub fn image(&self) -> &HdrImage {
        &self.image
    }

    pub fn width(&self) -> usize {
        self.image.width
    }

    pub fn height(&self) -> usize {
        self.image.height
    }

    pub fn pixel_direction(width: usize, height: usize, x: usize, y: usize) -> Direction {
        Direction::new(
            PI * (y as f64 + 0.5) / height as f64,
            TAU * (x as f64 + 0.5) / width as f64,
        )
    }

    /// Bilinear lookup, wrapping in longitude and clamping at the poles.
    pub fn lookup(&self, dir: &Vector3<f64>) -> [f64; 3] {
        let d = Direction::from_vector(dir);
        self.lookup_angles(d.theta, d.phi)
    }

    pub fn lookup_angles(&self, theta: f64, phi: f64) -> [f64; 3] {
        let (w, h) = (self.image.width, self.image.height);
        let u = phi / TAU * w as f64 - 0.5;
        let v = (theta / PI * h as f64 - 0.5).clamp(0.0, (h - 1) as f64);
        let x0 = u.floor();
        let fx = u - x0;
        let y0 = v.floor().min((h - 1) as f64);
        let fy = v - y0;
        let xa = (x0 as i64).rem_euclid(w as i64) as usize;
        let xb = (xa + 1) % w;
        let ya = y0 as usize;
        let yb = (ya + 1).min(h - 1);
        let p = |x, y| self.image.pixel(x, y);
        let (a, b, c, d) = (p(xa, ya), p(xb, ya), p(xa, yb), p(xb, yb));
        std::array::from_fn(|k| {
            let top = a[k] as f64 * (1.0 - fx) + b[k] as f64 * fx;
            let bot = c[k] as f64 * (1.0 - fx) + d[k] as f64 * fx;
            top * (1.0 - fy) + bot * fy
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.image.write(path)
    }

    /// Dense SH transform of the whole map.
    pub fn to_sh(&self, max_degree: usize) -> Result<ShExpansion> {
        let n = (4 * (max_degree + 1) * (max_degree + 1)).max(1024);
        let dirs = fibonacci_sphere(n);
        let values = dirs.iter().flat_map(|d| self.lookup(&d.to_vector())).collect();
        fit_dense(&DirectionalSamples::unweighted(dirs, 3, values)?, max_degree)
    }

    /// The map rotated about +z by `angle` (used to build environments with
    /// different light directions from one preset).
    pub fn rotated_z(&self, angle: f64) -> Self {
        let w = self.image.width;
        let shift = ((angle / TAU) * w as f64).round() as i64;
        let mut image = self.image.clone();
        for y in 0..self.image.height {
            for x in 0..w {
                let src = (x as i64 - shift).rem_euclid(w as i64) as usize;
                image.set_pixel(x, y, self.image.pixel(src, y));
            }
        }
        EnvironmentMap { image }
    }
}

/// Reads an EXR lat-long map. Negative pixels are clamped to zero with a
/// warning; non-finite pixels and LDR formats are rejected.
pub fn load_environment(path: &Path) -> Result<EnvironmentMap> {
    let mut image = HdrImage::read(path)?;
    let clamped = image.sanitize()?;
    if clamped > 0 {
        log::warn!("{}: clamped {clamped} negative values to 0", path.display());
    }
    EnvironmentMap::new(image)
}

/// Radiance from a light source, either a raw map or a bandlimited
/// expansion of one.
pub trait LightSource: Sync {
    fn radiance(&self, world_dir: &Vector3<f64>) -> [f64; 3];
}

impl LightSource for EnvironmentMap {
    fn radiance(&self, world_dir: &Vector3<f64>) -> [f64; 3] {
        self.lookup(world_dir)
    }
}

/// An environment reduced to an SH expansion and low-pass filtered.
#[derive(Debug, Clone)]
pub struct PrefilteredEnvironment {
    pub expansion: ShExpansion,
}

impl LightSource for PrefilteredEnvironment {
    fn radiance(&self, world_dir: &Vector3<f64>) -> [f64; 3] {
        let v = self.expansion.evaluate(&Direction::from_vector(world_dir));
        [v[0].max(0.0), v[1].max(0.0), v[2].max(0.0)]
    }
}

/// Fibonacci directions on the frame's upper hemisphere with the light
/// looked up in world space. Weights are 1.
pub fn sample_incoming(light: &dyn LightSource, frame: &Frame, n: usize) -> DirectionalSamples {
    sample_incoming_at(light, frame, &fibonacci_hemisphere(n))
}

/// Same as [`sample_incoming`] for a precomputed set of local directions.
pub fn sample_incoming_at(light: &dyn LightSource, frame: &Frame, local: &[Direction]) -> DirectionalSamples {
    let values = local
        .iter()
        .flat_map(|d| light.radiance(&frame.dir_to_world(d)))
        .collect();
    DirectionalSamples::unweighted(local.to_vec(), 3, values)
        .expect("light sources return finite non-negative radiance")
}
