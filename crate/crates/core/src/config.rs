//! Flat `key = value` run configuration.
//!
//! Every key is optional and falls back to the library default:
//!
//! ```toml
//! max_degree = 8
//! lambda = 1e-4
//! sigma = 1e-2
//! grid_ks = 10
//! grid_alpha = 10
//! iterations = 100
//! step = 1e-2
//! m = 10
//! tv_weight = 1e-3
//! weighting_a = 1.0
//! weighting_b = 1.0
//! shadowing = true
//! masking = true
//! fresnel = true
//! prefilter = true
//! self_occlusion = false
//! resolution = 512
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::brdf::FresnelMode;
use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;

pub const DEFAULT_RESOLUTION: usize = 512;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub max_degree: Option<usize>,
    pub lambda: Option<f64>,
    pub sigma: Option<f64>,
    pub grid_ks: Option<usize>,
    pub grid_alpha: Option<usize>,
    pub iterations: Option<usize>,
    pub step: Option<f64>,
    pub m: Option<usize>,
    pub tv_weight: Option<f64>,
    pub weighting_a: Option<f64>,
    pub weighting_b: Option<f64>,
    pub shadowing: Option<bool>,
    pub masking: Option<bool>,
    pub fresnel: Option<bool>,
    pub prefilter: Option<bool>,
    pub self_occlusion: Option<bool>,
    pub resolution: Option<usize>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::invalid(format!("config: {}", e.message())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Keys set in `other` win.
    pub fn overridden_by(mut self, other: &ConfigFile) -> Self {
        macro_rules! take {
            ($($k:ident),*) => {$(if other.$k.is_some() { self.$k = other.$k; })*};
        }
        take!(
            max_degree, lambda, sigma, grid_ks, grid_alpha, iterations, step, m, tv_weight, weighting_a,
            weighting_b, shadowing, masking, fresnel, prefilter, self_occlusion, resolution
        );
        self
    }

    /// The resolved pipeline config and texture resolution.
    pub fn resolve(&self) -> Result<(PipelineConfig, usize)> {
        let mut c = PipelineConfig::default();
        let o = &mut c.optimizer;
        c.max_degree = self.max_degree.unwrap_or(c.max_degree);
        c.lambda = self.lambda.unwrap_or(c.lambda);
        c.grid.sigma = self.sigma.unwrap_or(c.grid.sigma);
        c.grid.n_ks = self.grid_ks.unwrap_or(c.grid.n_ks);
        c.grid.n_alpha = self.grid_alpha.unwrap_or(c.grid.n_alpha);
        o.iterations = self.iterations.unwrap_or(o.iterations);
        o.step = self.step.unwrap_or(o.step);
        o.shadow_refresh = self.m.unwrap_or(o.shadow_refresh);
        o.tv_weight = self.tv_weight.unwrap_or(o.tv_weight);
        o.weighting.0 = self.weighting_a.unwrap_or(o.weighting.0);
        o.weighting.1 = self.weighting_b.unwrap_or(o.weighting.1);
        o.geometry.shadowing = self.shadowing.unwrap_or(o.geometry.shadowing);
        o.geometry.masking = self.masking.unwrap_or(o.geometry.masking);
        if let Some(f) = self.fresnel {
            o.fresnel = if f { FresnelMode::Schlick } else { FresnelMode::Disabled };
        }
        c.prefilter = self.prefilter.unwrap_or(c.prefilter);
        c.self_occlusion = self.self_occlusion.unwrap_or(c.self_occlusion);
        let res = self.resolution.unwrap_or(DEFAULT_RESOLUTION);
        if res == 0 {
            return Err(Error::invalid("resolution must be >= 1"));
        }
        c.validate()?;
        Ok((c, res))
    }

    /// Every key filled in from a resolved config.
    pub fn from_resolved(c: &PipelineConfig, resolution: usize) -> Self {
        let o = &c.optimizer;
        ConfigFile {
            max_degree: Some(c.max_degree),
            lambda: Some(c.lambda),
            sigma: Some(c.grid.sigma),
            grid_ks: Some(c.grid.n_ks),
            grid_alpha: Some(c.grid.n_alpha),
            iterations: Some(o.iterations),
            step: Some(o.step),
            m: Some(o.shadow_refresh),
            tv_weight: Some(o.tv_weight),
            weighting_a: Some(o.weighting.0),
            weighting_b: Some(o.weighting.1),
            shadowing: Some(o.geometry.shadowing),
            masking: Some(o.geometry.masking),
            fresnel: Some(o.fresnel == FresnelMode::Schlick),
            prefilter: Some(c.prefilter),
            self_occlusion: Some(c.self_occlusion),
            resolution: Some(resolution),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let (c, r) = ConfigFile::parse("").unwrap().resolve().unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!(r, DEFAULT_RESOLUTION);
    }

    #[test]
    fn keys_and_overrides() {
        let f = ConfigFile::parse("lambda = 0.5\nm = 3\nfresnel = false\n").unwrap();
        let flags = ConfigFile {
            m: Some(7),
            ..Default::default()
        };
        let (c, _) = f.overridden_by(&flags).resolve().unwrap();
        assert_eq!(c.lambda, 0.5);
        assert_eq!(c.optimizer.shadow_refresh, 7);
        assert_eq!(c.optimizer.fresnel, FresnelMode::Disabled);
        assert!(ConfigFile::parse("bogus = 1").is_err());
        assert!(ConfigFile::parse("m = 0").unwrap().resolve().is_err());
    }

    #[test]
    fn resolved_round_trip() {
        let (c, r) = ConfigFile::parse("tv_weight = 0.25\nresolution = 64").unwrap().resolve().unwrap();
        let text = toml::to_string(&ConfigFile::from_resolved(&c, r)).unwrap();
        assert_eq!(ConfigFile::parse(&text).unwrap().resolve().unwrap(), (c, r));
    }
}
