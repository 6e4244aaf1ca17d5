//! Triangle meshes with UVs and the per-texel surface table.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use nalgebra::{Vector2, Vector3};

use super::frame::Frame;
use crate::error::{Error, Result};

/// Indexed triangle mesh; positions, normals and UVs share one index.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub positions: Vec<Vector3<f64>>,
    pub normals: Vec<Vector3<f64>>,
    pub uvs: Vec<Vector2<f64>>,
    pub triangles: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn new(
        positions: Vec<Vector3<f64>>,
        normals: Vec<Vector3<f64>>,
        uvs: Vec<Vector2<f64>>,
        triangles: Vec<[u32; 3]>,
    ) -> Result<Self> {
        let n = positions.len();
        if normals.len() != n || uvs.len() != n {
            return Err(Error::invalid(format!(
                "{n} positions, {} normals, {} uvs",
                normals.len(),
                uvs.len()
            )));
        }
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|i| *i as usize >= n)) {
            return Err(Error::invalid(format!("triangle {t:?} indexes past {n} vertices")));
        }
        if uvs.iter().any(|uv| !(0.0..=1.0).contains(&uv.x) || !(0.0..=1.0).contains(&uv.y)) {
            return Err(Error::invalid("uvs must lie in [0, 1]^2"));
        }
        let mut normals = normals;
        for nrm in &mut normals {
            let len = nrm.norm();
            if !(len > 0.0) || !len.is_finite() {
                return Err(Error::invalid("zero or non-finite vertex normal"));
            }
            *nrm /= len;
        }
        Ok(Mesh {
            positions,
            normals,
            uvs,
            triangles,
        })
    }

    /// UV sphere of radius `radius` at the origin. `u` follows longitude and
    /// `v = 1` is the north pole (+z).
    pub fn uv_sphere(radius: f64, n_lat: usize, n_lon: usize) -> Self {
        let mut positions = Vec::new();
        let mut normals = Vec::new();
        let mut uvs = Vec::new();
        for i in 0..=n_lat {
            let theta = PI * i as f64 / n_lat as f64;
            for j in 0..=n_lon {
                let phi = TAU * j as f64 / n_lon as f64;
                let n = Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
                positions.push(n * radius);
                normals.push(n);
                uvs.push(Vector2::new(j as f64 / n_lon as f64, 1.0 - i as f64 / n_lat as f64));
            }
        }
        let idx = |i: usize, j: usize| (i * (n_lon + 1) + j) as u32;
        let mut triangles = Vec::new();
        for i in 0..n_lat {
            for j in 0..n_lon {
                triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
        Mesh {
            positions,
            normals,
            uvs,
            triangles,
        }
    }

    /// Unit quad in the z = 0 plane facing +z, spanning `[-s, s]^2`.
    pub fn quad(s: f64) -> Self {
        let positions = vec![
            Vector3::new(-s, -s, 0.0),
            Vector3::new(s, -s, 0.0),
            Vector3::new(s, s, 0.0),
            Vector3::new(-s, s, 0.0),
        ];
        let uvs = vec![
            Vector2::new(0.0, 0.0),
            Vector2::new(1.0, 0.0),
            Vector2::new(1.0, 1.0),
            Vector2::new(0.0, 1.0),
        ];
        Mesh {
            positions,
            normals: vec![Vector3::z(); 4],
            uvs,
            triangles: vec![[0, 1, 2], [0, 2, 3]],
        }
    }

    pub fn triangle(&self, t: usize) -> [Vector3<f64>; 3] {
        self.triangles[t].map(|i| self.positions[i as usize])
    }

    /// Barycentric interpolation of the UVs of triangle `t`.
    pub fn uv_at(&self, t: usize, b: &[f64; 3]) -> Vector2<f64> {
        let [a, c, d] = self.triangles[t].map(|i| self.uvs[i as usize]);
        a * b[0] + c * b[1] + d * b[2]
    }

    /// Reads a Wavefront OBJ with positions, normals and UVs. All models in
    /// the file are merged.
    pub fn load_obj(path: &Path) -> Result<Self> {
        let opts = tobj::LoadOptions {
            single_index: true,
            triangulate: true,
            ..Default::default()
        };
        let (models, _) = tobj::load_obj(path, &opts).map_err(|e| match e {
            tobj::LoadError::OpenFileFailed => Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "cannot open mesh"),
            ),
            other => Error::UnsupportedFormat(format!("{}: {other}", path.display())),
        })?;
        let mut positions = Vec::new();
        let mut normals = Vec::new();
        let mut uvs = Vec::new();
        let mut triangles = Vec::new();
        for m in models {
            let mesh = m.mesh;
            let base = positions.len() as u32;
            let nv = mesh.positions.len() / 3;
            if mesh.normals.len() != nv * 3 || mesh.texcoords.len() != nv * 2 {
                return Err(Error::invalid(format!(
                    "{}: model '{}' needs per-vertex normals and UVs",
                    path.display(),
                    m.name
                )));
            }
            let v3 = |s: &[f64], i: usize| Vector3::new(s[3 * i], s[3 * i + 1], s[3 * i + 2]);
            for i in 0..nv {
                positions.push(v3(&mesh.positions, i));
                normals.push(v3(&mesh.normals, i));
                uvs.push(Vector2::new(mesh.texcoords[2 * i], mesh.texcoords[2 * i + 1]));
            }
            for t in mesh.indices.chunks_exact(3) {
                triangles.push([base + t[0], base + t[1], base + t[2]]);
            }
        }
        Mesh::new(positions, normals, uvs, triangles)
    }

    pub fn write_obj(&self, path: &Path) -> Result<()> {
        use std::fmt::Write as _;
        let mut s = String::new();
        for p in &self.positions {
            writeln!(s, "v {} {} {}", p.x, p.y, p.z).unwrap();
        }
        for n in &self.normals {
            writeln!(s, "vn {} {} {}", n.x, n.y, n.z).unwrap();
        }
        for uv in &self.uvs {
            writeln!(s, "vt {} {}", uv.x, uv.y).unwrap();
        }
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| i + 1);
            writeln!(s, "f {a}/{a}/{a} {b}/{b}/{b} {c}/{c}/{c}").unwrap();
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }
}

/// Surface point behind one texel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TexelGeom {
    pub position: Vector3<f64>,
    pub frame: Frame,
    pub triangle: usize,
}

/// Maps each texel center of a square texture to the surface. Row 0 is the
/// top of the texture (`v` near 1).
#[derive(Debug, Clone)]
pub struct TexelTable {
    pub resolution: usize,
    pub texels: Vec<Option<TexelGeom>>,
}

impl TexelTable {
    pub fn build(mesh: &Mesh, resolution: usize) -> Self {
        let r = resolution as f64;
        let mut texels = vec![None; resolution * resolution];
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let uv = tri.map(|i| mesh.uvs[i as usize]);
            let p = tri.map(|i| mesh.positions[i as usize]);
            let n = tri.map(|i| mesh.normals[i as usize]);
            // texel (x, y) has center u = (x + 0.5) / r, v = 1 - (y + 0.5) / r
            let (umin, umax) = minmax(uv.iter().map(|q| q.x));
            let (vmin, vmax) = minmax(uv.iter().map(|q| q.y));
            let x0 = ((umin * r - 0.5).floor().max(0.0)) as usize;
            let x1 = ((umax * r - 0.5).ceil().min(r - 1.0)) as usize;
            let y0 = (((1.0 - vmax) * r - 0.5).floor().max(0.0)) as usize;
            let y1 = (((1.0 - vmin) * r - 0.5).ceil().min(r - 1.0)) as usize;
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let c = Vector2::new((x as f64 + 0.5) / r, 1.0 - (y as f64 + 0.5) / r);
                    let Some(b) = barycentric_2d(&uv, &c) else { continue };
                    let slot = &mut texels[y * resolution + x];
                    if slot.is_some() {
                        continue;
                    }
                    let nrm = n[0] * b[0] + n[1] * b[1] + n[2] * b[2];
                    if nrm.norm() < 1e-12 {
                        continue;
                    }
                    *slot = Some(TexelGeom {
                        position: p[0] * b[0] + p[1] * b[1] + p[2] * b[2],
                        frame: Frame::from_normal(&nrm),
                        triangle: t,
                    });
                }
            }
        }
        TexelTable { resolution, texels }
    }

    pub fn len(&self) -> usize {
        self.texels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.texels.is_empty()
    }

    /// Texel index covering a UV coordinate.
    pub fn index_of_uv(&self, uv: &Vector2<f64>) -> usize {
        let r = self.resolution as f64;
        let x = ((uv.x * r).floor() as i64).clamp(0, self.resolution as i64 - 1) as usize;
        let y = (((1.0 - uv.y) * r).floor() as i64).clamp(0, self.resolution as i64 - 1) as usize;
        y * self.resolution + x
    }

    pub fn uv_of(&self, index: usize) -> Vector2<f64> {
        let r = self.resolution as f64;
        let (x, y) = (index % self.resolution, index / self.resolution);
        Vector2::new((x as f64 + 0.5) / r, 1.0 - (y as f64 + 0.5) / r)
    }
}

fn minmax(it: impl Iterator<Item = f64>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
}

fn barycentric_2d(t: &[Vector2<f64>; 3], p: &Vector2<f64>) -> Option<[f64; 3]> {
    let e0 = t[1] - t[0];
    let e1 = t[2] - t[0];
    let d = e0.x * e1.y - e0.y * e1.x;
    if d.abs() < 1e-300 {
        return None;
    }
    let q = p - t[0];
    let b1 = (q.x * e1.y - q.y * e1.x) / d;
    let b2 = (e0.x * q.y - e0.y * q.x) / d;
    let b0 = 1.0 - b1 - b2;
    let eps = -1e-12;
    (b0 >= eps && b1 >= eps && b2 >= eps).then_some([b0, b1, b2])
}
