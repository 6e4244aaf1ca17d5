//! Gathering per-texel outgoing radiance from calibrated views.

use rayon::prelude::*;

use super::bvh::Ray;
use super::camera::CameraView;
use super::SurfaceGeometry;
use crate::optimizer::sample_weight;
use crate::sh::{Direction, DirectionalSamples};

/// Offset applied along the normal before casting visibility rays.
pub const RAY_EPS: f64 = 1e-6;

/// Whether a surface point with normal `n` is front-facing towards and
/// unoccluded from `eye`.
pub fn visible_from(
    geom: &SurfaceGeometry,
    p: &nalgebra::Vector3<f64>,
    n: &nalgebra::Vector3<f64>,
    eye: &nalgebra::Vector3<f64>,
) -> bool {
    let to_eye = eye - p;
    let dist = to_eye.norm();
    let dir = to_eye / dist;
    if n.dot(&dir) <= 0.0 {
        return false;
    }
    let origin = p + n * RAY_EPS * (1.0 + p.norm());
    !geom.bvh.occluded(&Ray { origin, dir }, RAY_EPS, dist - RAY_EPS)
}

/// Per-texel samples of the outgoing radiance in each texel's local frame.
/// Views without an image contribute no values and are skipped.
pub fn project_observations(views: &[CameraView], geom: &SurfaceGeometry, weighting: (f64, f64)) -> Vec<DirectionalSamples> {
    let (a, b) = weighting;
    geom.texels
        .texels
        .par_iter()
        .map(|slot| {
            let mut out = DirectionalSamples::empty(3);
            let Some(t) = slot else { return out };
            for v in views {
                let Some(img) = &v.image else { continue };
                let Some((x, y)) = v.pixel_of(&t.position) else { continue };
                if !visible_from(geom, &t.position, &t.frame.n, &v.position()) {
                    continue;
                }
                let dir: Direction = t.frame.dir_to_local(&(v.position() - t.position));
                let w = sample_weight(dir.theta, a, b);
                let px = img.pixel(x, y).map(|c| c as f64);
                out.push(dir, &px, w);
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::camera::{orbit_cameras, Intrinsics};
    use crate::scene::image::HdrImage;
    use crate::scene::mesh::Mesh;
    use nalgebra::Vector3;

    #[test]
    fn flat_quad_single_view() {
        let geom = SurfaceGeometry::new(Mesh::quad(1.0), 8);
        let k = Intrinsics::from_fov(1.2, 64, 64);
        let eye = Vector3::new(0.5, 0.0, 3.0);
        let view = CameraView::look_at(k, eye, Vector3::zeros())
            .with_image(HdrImage::filled(64, 64, [0.25; 3]))
            .unwrap();
        let obs = project_observations(&[view], &geom, (1.0, 1.0));
        for (i, s) in obs.iter().enumerate() {
            assert_eq!(s.len(), 1);
            let p = geom.texels.texels[i].unwrap().position;
            let want = ((eye - p).normalize().z).acos();
            assert!((s.directions()[0].theta - want).abs() < 1e-9);
            assert_eq!(s.value(0), &[0.25; 3]);
        }
        let back = CameraView::look_at(k, -eye, Vector3::zeros())
            .with_image(HdrImage::filled(64, 64, [1.0; 3]))
            .unwrap();
        assert!(project_observations(&[back], &geom, (1.0, 1.0)).iter().all(|s| s.is_empty()));
    }

    #[test]
    fn sphere_views_see_about_half() {
        let geom = SurfaceGeometry::new(Mesh::uv_sphere(1.0, 16, 32), 16);
        let k = Intrinsics::from_fov(0.8, 64, 64);
        let views: Vec<_> = orbit_cameras(20, 4.0, k)
            .into_iter()
            .map(|v| v.with_image(HdrImage::filled(64, 64, [1.0; 3])).unwrap())
            .collect();
        let obs = project_observations(&views, &geom, (1.0, 1.0));
        let mean = obs.iter().map(|s| s.len()).sum::<usize>() as f64 / obs.len() as f64;
        assert!(mean > 6.0 && mean < 10.0, "mean {mean}");
    }
}
