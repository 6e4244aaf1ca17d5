//! Parameter texture export and import.
//!
//! Float maps are written as EXR so a write/read cycle is exact; base
//! color additionally gets an sRGB PNG preview.

use std::collections::VecDeque;
use std::path::Path;

use super::image::{linear_to_srgb8, read_exr_channels, read_gray, write_exr_channels, write_gray};
use super::synth::ParamTexture;
use crate::brdf::PrincipledParams;
use crate::error::{Error, Result};
use crate::optimizer::TexelRecord;
use crate::spectrum::merge_by_entropy;

pub const BASE_COLOR_FILE: &str = "base_color.exr";
pub const ROUGHNESS_FILE: &str = "roughness.exr";
pub const METALLIC_FILE: &str = "metallic.exr";
pub const ENTROPY_FILE: &str = "entropy.exr";
pub const VALID_FILE: &str = "valid.exr";
pub const PREVIEW_FILE: &str = "base_color.png";

/// Square parameter maps, row-major with row 0 at the top (`v = 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct TextureSet {
    pub resolution: usize,
    pub base_color: Vec<[f32; 3]>,
    pub roughness: Vec<f32>,
    pub metallic: Vec<f32>,
    pub entropy: Vec<f32>,
    pub valid: Vec<bool>,
}

impl TextureSet {
    pub fn from_records(records: &[TexelRecord], resolution: usize) -> Result<Self> {
        if records.len() != resolution * resolution {
            return Err(Error::LayoutMismatch(format!(
                "{} records for a {resolution}x{resolution} texture",
                records.len()
            )));
        }
        Ok(TextureSet {
            resolution,
            base_color: records.iter().map(|r| r.params.base_color.map(|c| c as f32)).collect(),
            roughness: records.iter().map(|r| r.params.roughness as f32).collect(),
            metallic: records.iter().map(|r| r.params.metallic as f32).collect(),
            entropy: records.iter().map(|r| if r.valid { r.entropy as f32 } else { 1.0 }).collect(),
            valid: records.iter().map(|r| r.valid).collect(),
        })
    }

    /// Ground-truth maps; unmapped texels are invalid and hold the prior.
    pub fn from_params(params: &ParamTexture, resolution: usize) -> Result<Self> {
        if params.len() != resolution * resolution {
            return Err(Error::LayoutMismatch(format!(
                "{} texels for a {resolution}x{resolution} texture",
                params.len()
            )));
        }
        let p = |i: usize| params[i].unwrap_or(PrincipledParams::PRIOR);
        let n = params.len();
        Ok(TextureSet {
            resolution,
            base_color: (0..n).map(|i| p(i).base_color.map(|c| c as f32)).collect(),
            roughness: (0..n).map(|i| p(i).roughness as f32).collect(),
            metallic: (0..n).map(|i| p(i).metallic as f32).collect(),
            entropy: (0..n).map(|i| if params[i].is_some() { 0.0 } else { 1.0 }).collect(),
            valid: params.iter().map(Option::is_some).collect(),
        })
    }

    pub fn params(&self, i: usize) -> PrincipledParams {
        PrincipledParams {
            base_color: self.base_color[i].map(f64::from),
            metallic: self.metallic[i] as f64,
            roughness: self.roughness[i] as f64,
        }
    }

    pub fn to_params(&self) -> ParamTexture {
        (0..self.valid.len()).map(|i| self.valid[i].then(|| self.params(i))).collect()
    }

    /// Copies each invalid texel's parameters from its nearest valid
    /// texel (4-connected breadth-first distance). Entropy and the mask
    /// are left untouched.
    pub fn fill_holes(&mut self) {
        let res = self.resolution;
        let mut source: Vec<Option<usize>> = (0..res * res).map(|i| self.valid[i].then_some(i)).collect();
        let mut queue: VecDeque<usize> = (0..res * res).filter(|&i| self.valid[i]).collect();
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % res, i / res);
            let mut visit = |j: usize| {
                if source[j].is_none() {
                    source[j] = source[i];
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < res {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - res);
            }
            if y + 1 < res {
                visit(i + res);
            }
        }
        for (i, s) in source.into_iter().enumerate() {
            if let Some(s) = s.filter(|&s| s != i) {
                self.base_color[i] = self.base_color[s];
                self.roughness[i] = self.roughness[s];
                self.metallic[i] = self.metallic[s];
            }
        }
    }

    /// Nearest-neighbour resampling to another resolution.
    pub fn resampled(&self, resolution: usize) -> Self {
        if resolution == self.resolution {
            return self.clone();
        }
        let src = |i: usize| {
            let (x, y) = (i % resolution, i / resolution);
            let sx = x * self.resolution / resolution;
            let sy = y * self.resolution / resolution;
            sy * self.resolution + sx
        };
        let n = resolution * resolution;
        TextureSet {
            resolution,
            base_color: (0..n).map(|i| self.base_color[src(i)]).collect(),
            roughness: (0..n).map(|i| self.roughness[src(i)]).collect(),
            metallic: (0..n).map(|i| self.metallic[src(i)]).collect(),
            entropy: (0..n).map(|i| self.entropy[src(i)]).collect(),
            valid: (0..n).map(|i| self.valid[src(i)]).collect(),
        }
    }

    /// Writes all maps into `dir`, which must exist.
    pub fn write(&self, dir: &Path, png_preview: bool) -> Result<()> {
        let r = self.resolution;
        let plane = |c: usize| self.base_color.iter().map(|p| p[c]).collect::<Vec<f32>>();
        write_exr_channels(
            &dir.join(BASE_COLOR_FILE),
            r,
            r,
            vec![("R", plane(0)), ("G", plane(1)), ("B", plane(2))],
        )?;
        write_gray(&dir.join(ROUGHNESS_FILE), r, r, self.roughness.clone())?;
        write_gray(&dir.join(METALLIC_FILE), r, r, self.metallic.clone())?;
        write_gray(&dir.join(ENTROPY_FILE), r, r, self.entropy.clone())?;
        let mask = self.valid.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
        write_gray(&dir.join(VALID_FILE), r, r, mask)?;
        if png_preview {
            let bytes: Vec<u8> = self
                .base_color
                .iter()
                .flat_map(|p| p.map(|c| linear_to_srgb8(c as f64)))
                .collect();
            let path = dir.join(PREVIEW_FILE);
            image::save_buffer(&path, &bytes, r as u32, r as u32, image::ExtendedColorType::Rgb8)
                .map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
        }
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let (w, h, color) = read_exr_channels(&dir.join(BASE_COLOR_FILE))?;
        if w != h {
            return Err(Error::LayoutMismatch(format!("texture is {w}x{h}, expected square")));
        }
        let get = |name: &str| {
            color
                .get(name)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("{BASE_COLOR_FILE} lacks channel {name}")))
        };
        let (cr, cg, cb) = (get("R")?, get("G")?, get("B")?);
        let gray = |file: &str| -> Result<Vec<f32>> {
            let (gw, gh, d) = read_gray(&dir.join(file))?;
            if (gw, gh) != (w, h) {
                return Err(Error::LayoutMismatch(format!("{file} is {gw}x{gh}, expected {w}x{h}")));
            }
            Ok(d)
        };
        Ok(TextureSet {
            resolution: w,
            base_color: (0..w * h).map(|i| [cr[i], cg[i], cb[i]]).collect(),
            roughness: gray(ROUGHNESS_FILE)?,
            metallic: gray(METALLIC_FILE)?,
            entropy: gray(ENTROPY_FILE)?,
            valid: gray(VALID_FILE)?.into_iter().map(|v| v > 0.5).collect(),
        })
    }
}

/// Per-texel selection of the run with the lowest entropy among runs
/// where the texel is valid. Texels valid in no run stay invalid.
pub fn merge_texture_sets(runs: &[TextureSet]) -> Result<TextureSet> {
    let first = runs.first().ok_or_else(|| Error::invalid("nothing to merge"))?;
    if let Some(r) = runs.iter().find(|r| r.resolution != first.resolution) {
        return Err(Error::LayoutMismatch(format!(
            "resolutions {} and {} differ",
            first.resolution, r.resolution
        )));
    }
    let mut out = first.clone();
    for i in 0..first.valid.len() {
        let candidates: Vec<(usize, f64)> = runs
            .iter()
            .enumerate()
            .filter(|(_, r)| r.valid[i])
            .map(|(k, r)| (k, r.entropy[i] as f64))
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let k = merge_by_entropy(&candidates);
        let src = &runs[k];
        out.base_color[i] = src.base_color[i];
        out.roughness[i] = src.roughness[i];
        out.metallic[i] = src.metallic[i];
        out.entropy[i] = src.entropy[i];
        out.valid[i] = true;
    }
    Ok(out)
}

/// Mean over texels valid in both sets of the squared parameter error,
/// averaged over the five principled parameters.
pub fn parameter_mse(estimate: &ParamTexture, truth: &ParamTexture) -> Option<f64> {
    let errs: Vec<f64> = estimate
        .iter()
        .zip(truth)
        .filter_map(|(e, t)| Some(squared_error(e.as_ref()?, t.as_ref()?)))
        .collect();
    (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Squared error of one texel averaged over its five parameters.
pub fn squared_error(a: &PrincipledParams, b: &PrincipledParams) -> f64 {
    let (a, b) = (a.to_array(), b.to_array());
    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / 5.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(res: usize) -> TextureSet {
        let n = res * res;
        TextureSet {
            resolution: res,
            base_color: (0..n).map(|i| [i as f32 / n as f32, 0.5, 0.25]).collect(),
            roughness: (0..n).map(|i| (i % 7) as f32 / 7.0).collect(),
            metallic: vec![0.3; n],
            entropy: vec![0.6; n],
            valid: (0..n).map(|i| i % 3 != 0).collect(),
        }
    }

    #[test]
    fn write_read_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let s = set(8);
        s.write(dir.path(), true).unwrap();
        assert!(dir.path().join(PREVIEW_FILE).exists());
        assert_eq!(TextureSet::read(dir.path()).unwrap(), s);
    }

    #[test]
    fn holes_take_nearest_valid_values() {
        let mut s = set(4);
        s.valid = vec![false; 16];
        s.valid[0] = true;
        s.valid[15] = true;
        s.fill_holes();
        assert_eq!(s.base_color[1], s.base_color[0]);
        assert_eq!(s.base_color[14], s.base_color[15]);
        assert_eq!(s.roughness[11], s.roughness[15]);
        assert!(!s.valid[1]);
    }

    #[test]
    fn merge_unions_coverage_and_prefers_low_entropy() {
        let mut a = set(4);
        let mut b = set(4);
        a.valid = (0..16).map(|i| i < 8).collect();
        b.valid = (0..16).map(|i| i >= 4).collect();
        b.entropy = vec![0.1; 16];
        b.roughness = vec![0.9; 16];
        let m = merge_texture_sets(&[a.clone(), b]).unwrap();
        assert!(m.valid.iter().all(|v| *v));
        assert_eq!(m.roughness[0], a.roughness[0]);
        assert_eq!(m.roughness[5], 0.9);
        assert_eq!(merge_texture_sets(&[a.clone(), a.clone()]).unwrap(), a);
        assert!(matches!(merge_texture_sets(&[a, set(8)]), Err(Error::LayoutMismatch(_))));
    }

    #[test]
    fn resampling_keeps_constant_maps_constant() {
        let mut s = set(4);
        s.roughness = vec![0.4; 16];
        let r = s.resampled(10);
        assert_eq!(r.roughness, vec![0.4; 100]);
        assert_eq!(r.resampled(4).resolution, 4);
    }
}
