//! Pinhole cameras (OpenCV convention: +x right, +y down, +z forward) and
//! the camera JSON file.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use super::bvh::Ray;
use super::image::HdrImage;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    /// Square-pixel intrinsics for a vertical field of view.
    pub fn from_fov(fov_y: f64, width: usize, height: usize) -> Self {
        let f = 0.5 * height as f64 / (0.5 * fov_y).tan();
        Intrinsics {
            fx: f,
            fy: f,
            cx: 0.5 * width as f64,
            cy: 0.5 * height as f64,
            width,
            height,
        }
    }
}

/// One calibrated view; `image` is absent until loaded or rendered.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub intrinsics: Intrinsics,
    rotation: Matrix3<f64>,
    position: Vector3<f64>,
    pub image: Option<HdrImage>,
}

impl CameraView {
    /// `world_from_camera` is a rigid 4x4 transform.
    pub fn new(intrinsics: Intrinsics, world_from_camera: &Matrix4<f64>) -> Result<Self> {
        let r: Matrix3<f64> = world_from_camera.fixed_view::<3, 3>(0, 0).into_owned();
        let err = (r.transpose() * r - Matrix3::identity()).abs().max();
        if err > 1e-6 || (r.determinant() - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("camera rotation is not orthonormal (error {err:e})")));
        }
        let bottom = world_from_camera.fixed_view::<1, 4>(3, 0);
        if (bottom[0].abs() + bottom[1].abs() + bottom[2].abs() + (bottom[3] - 1.0).abs()) > 1e-9 {
            return Err(Error::invalid("camera extrinsics must be affine"));
        }
        if !(intrinsics.fx > 0.0 && intrinsics.fy > 0.0) || intrinsics.width == 0 || intrinsics.height == 0 {
            return Err(Error::invalid("camera intrinsics must be positive"));
        }
        Ok(CameraView {
            intrinsics,
            rotation: r,
            position: world_from_camera.fixed_view::<3, 1>(0, 3).into_owned(),
            image: None,
        })
    }

    /// Camera at `eye` looking at `target` with +z world as the rough up.
    pub fn look_at(intrinsics: Intrinsics, eye: Vector3<f64>, target: Vector3<f64>) -> Self {
        let fwd = (target - eye).normalize();
        let up_hint = if fwd.z.abs() > 0.999 { Vector3::y() } else { Vector3::z() };
        let right = fwd.cross(&up_hint).normalize();
        let down = fwd.cross(&right);
        let rotation = Matrix3::from_columns(&[right, down, fwd]);
        CameraView {
            intrinsics,
            rotation,
            position: eye,
            image: None,
        }
    }

    pub fn with_image(mut self, image: HdrImage) -> Result<Self> {
        if image.width != self.intrinsics.width || image.height != self.intrinsics.height {
            return Err(Error::Inconsistent(format!(
                "image is {}x{}, intrinsics say {}x{}",
                image.width, image.height, self.intrinsics.width, self.intrinsics.height
            )));
        }
        self.image = Some(image);
        Ok(self)
    }

    pub fn position(&self) -> Vector3<f64> {
        self.position
    }

    pub fn world_from_camera(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.position);
        m
    }

    /// Continuous pixel coordinates and depth of a world point in front of
    /// the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        let c = self.rotation.transpose() * (p - self.position);
        if c.z <= 1e-9 {
            return None;
        }
        let k = &self.intrinsics;
        Some((k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy, c.z))
    }

    /// Pixel containing a world point, if it is inside the image.
    pub fn pixel_of(&self, p: &Vector3<f64>) -> Option<(usize, usize)> {
        let (u, v, _) = self.project(p)?;
        let (w, h) = (self.intrinsics.width as f64, self.intrinsics.height as f64);
        (u >= 0.0 && v >= 0.0 && u < w && v < h).then(|| (u as usize, v as usize))
    }

    /// Ray through the center of pixel `(x, y)`.
    pub fn pixel_ray(&self, x: usize, y: usize) -> Ray {
        let k = &self.intrinsics;
        let d = Vector3::new(
            (x as f64 + 0.5 - k.cx) / k.fx,
            (y as f64 + 0.5 - k.cy) / k.fy,
            1.0,
        );
        Ray {
            origin: self.position,
            dir: (self.rotation * d).normalize(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CameraRecord {
    image: PathBuf,
    intrinsics: Intrinsics,
    extrinsics: [[f64; 4]; 4],
}

/// Reads the camera list. Image paths are resolved against `image_dir`
/// (or the JSON file's directory) and loaded when `load_images` is set.
pub fn load_cameras(path: &Path, image_dir: Option<&Path>, load_images: bool) -> Result<Vec<CameraView>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let records: Vec<CameraRecord> = serde_json::from_str(&text)?;
    if records.is_empty() {
        return Err(Error::invalid(format!("{}: no cameras", path.display())));
    }
    let base = image_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| path.parent().unwrap_or(Path::new(".")).to_path_buf());
    records
        .into_iter()
        .map(|r| {
            let m = Matrix4::from_fn(|i, j| r.extrinsics[i][j]);
            let view = CameraView::new(r.intrinsics, &m)?;
            if load_images {
                let mut img = HdrImage::read(&base.join(&r.image))?;
                img.sanitize()?;
                view.with_image(img)
            } else {
                Ok(view)
            }
        })
        .collect()
}

/// Writes the camera list; `names[i]` is stored as view `i`'s image path.
pub fn save_cameras(path: &Path, views: &[CameraView], names: &[String]) -> Result<()> {
    let records: Vec<CameraRecord> = views
        .iter()
        .zip(names)
        .map(|(v, n)| {
            let m = v.world_from_camera();
            CameraRecord {
                image: PathBuf::from(n),
                intrinsics: v.intrinsics,
                extrinsics: std::array::from_fn(|i| std::array::from_fn(|j| m[(i, j)])),
            }
        })
        .collect();
    let text = serde_json::to_string_pretty(&records)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// `n` cameras on a sphere of radius `distance` around the origin, spread
/// by a Fibonacci spiral, all looking at the origin.
pub fn orbit_cameras(n: usize, distance: f64, intrinsics: Intrinsics) -> Vec<CameraView> {
    crate::sh::fibonacci_sphere(n)
        .iter()
        .map(|d| CameraView::look_at(intrinsics, d.to_vector() * distance, Vector3::zeros()))
        .collect()
}
