//! Linear HDR images and OpenEXR input/output.

use std::collections::BTreeMap;
use std::path::Path;

use exr::prelude::{AnyChannel, AnyChannels, FlatSamples, Image, SmallVec, WritableImage};

use crate::error::{Error, Result};

/// Row-major linear RGB image, row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct HdrImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl HdrImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height * 3 {
            return Err(Error::invalid(format!(
                "{width}x{height} RGB image needs {} floats, got {}",
                width * height * 3,
                data.len()
            )));
        }
        Ok(HdrImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        HdrImage { width, height, data }
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = 3 * (y * self.width + x);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// Fails on non-finite pixels and clamps negative ones to zero,
    /// returning how many were clamped.
    pub fn sanitize(&mut self) -> Result<usize> {
        let mut clamped = 0;
        for (i, v) in self.data.iter_mut().enumerate() {
            if !v.is_finite() {
                let p = i / 3;
                return Err(Error::invalid(format!(
                    "non-finite value at pixel ({}, {})",
                    p % self.width,
                    p / self.width
                )));
            }
            if *v < 0.0 {
                *v = 0.0;
                clamped += 1;
            }
        }
        Ok(clamped)
    }

    pub fn read(path: &Path) -> Result<Self> {
        check_hdr_extension(path)?;
        let (w, h, mut ch) = read_exr_channels(path)?;
        let mut take = |name: &str| {
            ch.remove(name)
                .ok_or_else(|| Error::UnsupportedFormat(format!("{}: no {name} channel", path.display())))
        };
        let (r, g, b) = (take("R")?, take("G")?, take("B")?);
        let data = (0..w * h).flat_map(|i| [r[i], g[i], b[i]]).collect();
        HdrImage::new(w, h, data)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let plane = |c: usize| -> Vec<f32> { self.data.iter().skip(c).step_by(3).copied().collect() };
        write_exr_channels(
            path,
            self.width,
            self.height,
            vec![("R", plane(0)), ("G", plane(1)), ("B", plane(2))],
        )
    }
}

const LDR_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp", "tga", "gif", "webp", "tif", "tiff"];

/// Accepts `.exr`, rejects common 8-bit formats as LDR and anything else as
/// unsupported.
pub fn check_hdr_extension(path: &Path) -> Result<()> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    if ext == "exr" {
        Ok(())
    } else if LDR_EXTENSIONS.contains(&ext.as_str()) {
        Err(Error::NonHdrInput(path.display().to_string()))
    } else {
        Err(Error::UnsupportedFormat(path.display().to_string()))
    }
}

/// Reads every channel of the first layer as `f32` planes.
pub fn read_exr_channels(path: &Path) -> Result<(usize, usize, BTreeMap<String, Vec<f32>>)> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ));
    }
    let image = exr::prelude::read_first_flat_layer_from_file(path)?;
    let size = image.layer_data.size;
    let channels = image
        .layer_data
        .channel_data
        .list
        .iter()
        .map(|c| (c.name.to_string(), c.sample_data.values_as_f32().collect()))
        .collect();
    Ok((size.width(), size.height(), channels))
}

/// Writes named `f32` planes as one uncompressed-scanline EXR layer.
pub fn write_exr_channels(path: &Path, width: usize, height: usize, planes: Vec<(&str, Vec<f32>)>) -> Result<()> {
    let list: SmallVec<[AnyChannel<FlatSamples>; 4]> = planes
        .into_iter()
        .map(|(name, data)| {
            assert_eq!(data.len(), width * height);
            AnyChannel::new(name, FlatSamples::F32(data))
        })
        .collect();
    let image = Image::from_channels((width, height), AnyChannels::sort(list));
    image.write().to_file(path)?;
    Ok(())
}

/// Reads a single-channel float map written by [`write_gray`].
pub fn read_gray(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let (w, h, mut ch) = read_exr_channels(path)?;
    let y = ch
        .remove("Y")
        .ok_or_else(|| Error::UnsupportedFormat(format!("{}: no Y channel", path.display())))?;
    Ok((w, h, y))
}

pub fn write_gray(path: &Path, width: usize, height: usize, data: Vec<f32>) -> Result<()> {
    write_exr_channels(path, width, height, vec![("Y", data)])
}

/// sRGB transfer of a linear value in `[0, 1]`, quantized to 8 bits.
pub fn linear_to_srgb8(v: f64) -> u8 {
    let v = v.clamp(0.0, 1.0);
    let s = if v <= 0.003_130_8 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    };
    (s * 255.0).round() as u8
}
