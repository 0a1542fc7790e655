use anyhow::{bail, Context, Result};
use gaugebeam::geometry::Metric;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

const FLAT_IDENTITY: &str = include_str!("../configs/flat-identity.toml");
const GAUGE_PAIR: &str = include_str!("../configs/gauge-pair.toml");

/// Names accepted by `--config` besides file paths.
pub const BUNDLED: [&str; 2] = ["flat-identity", "gauge-pair"];

/// Generator of a connection form or potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    /// Gaussian bumps with random centres, widths and generators.
    Random {
        count: usize,
        strength: f64,
        spread: f64,
        #[serde(rename = "time-dependent")]
        time_dependent: bool,
    },
}

/// Generator of the gauge relating the two field pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GaugeSpec {
    Identity,
    /// Product of exponentials of skew-Hermitian generators, equal to the identity on the boundary.
    Random {
        count: usize,
        #[serde(rename = "time-dependent")]
        time_dependent: bool,
    },
}

/// Field generators. With a gauge the second pair is its image of the first;
/// without one the second pair has its own generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FieldsConfig {
    pub a1: FieldSpec,
    pub v1: FieldSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v2: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RaysConfig {
    /// Boundary points of the inflow sampling.
    pub points: usize,
    /// Inward directions per boundary point.
    pub directions: usize,
    pub step: f64,
    /// Times at which transports and scattering data are evaluated.
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BeamSection {
    /// Phase order `N`.
    pub phase_order: usize,
    /// Taylor order of the leading amplitude in `y`.
    pub y_order: usize,
    /// Number `N_s` of `s⁻¹` amplitude corrections.
    pub corrections: usize,
    pub s_list: Vec<f64>,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ArtSection {
    /// Pixel grid size of the reconstruction.
    pub grid: usize,
    /// Parallel-beam directions.
    pub angles: usize,
    /// Rays per direction.
    pub offsets: usize,
    pub lambda_rel: f64,
    /// Interior points of the gauge reconstruction.
    pub gauge_points: usize,
    pub gauge_directions: usize,
    /// Time at which the attenuation and the gauge are frozen.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SchrodSection {
    /// Cells per side of the square grids, coarse to fine.
    pub grids: Vec<usize>,
    pub horizon: f64,
    /// Time step over grid spacing.
    pub dt_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Tolerances {
    pub speed: f64,
    pub unitarity: f64,
    pub scattering_gap: f64,
    pub identity_gap: f64,
    pub riccati_determinant: f64,
    /// Required decay rate: the fitted residual slope in `s` must be at most its negative.
    pub residual_decay: f64,
    pub norm_spread: f64,
    pub spc_error: f64,
    pub art_error: f64,
    pub gauge_direction: f64,
    pub gauge_spread: f64,
    pub gauge_error: f64,
    pub norm_drift: f64,
    pub dtn_gap: f64,
    pub dtn_reduction: f64,
    pub energy_variation: f64,
}

impl Tolerances {
    fn named(&self) -> [(&'static str, f64); 16] {
        [
            ("speed", self.speed),
            ("unitarity", self.unitarity),
            ("scattering-gap", self.scattering_gap),
            ("identity-gap", self.identity_gap),
            ("riccati-determinant", self.riccati_determinant),
            ("residual-decay", self.residual_decay),
            ("norm-spread", self.norm_spread),
            ("spc-error", self.spc_error),
            ("art-error", self.art_error),
            ("gauge-direction", self.gauge_direction),
            ("gauge-spread", self.gauge_spread),
            ("gauge-error", self.gauge_error),
            ("norm-drift", self.norm_drift),
            ("dtn-gap", self.dtn_gap),
            ("dtn-reduction", self.dtn_reduction),
            ("energy-variation", self.energy_variation),
        ]
    }
}

/// One experiment: geometry, fields, sampling, discretisation and acceptance bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    /// Registry name, e.g. `flat` or `radial-bump(0.3,0.5)`.
    pub metric: String,
    pub rank: usize,
    pub out: PathBuf,
    pub fields: FieldsConfig,
    pub rays: RaysConfig,
    pub beam: BeamSection,
    pub art: ArtSection,
    pub schrod: SchrodSection,
    pub tolerances: Tolerances,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("malformed configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// A bundled configuration by name, or a TOML file.
    pub fn load(spec: &str) -> Result<Self> {
        match spec {
            "flat-identity" => Self::from_toml(FLAT_IDENTITY),
            "gauge-pair" => Self::from_toml(GAUGE_PAIR),
            path => {
                let text = std::fs::read_to_string(Path::new(path))
                    .with_context(|| format!("cannot read config {path:?} (bundled: {})", BUNDLED.join(", ")))?;
                Self::from_toml(&text).with_context(|| format!("in {path:?}"))
            }
        }
    }

    pub fn metric(&self) -> Result<Metric> {
        Ok(Metric::from_name(&self.metric)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.metric()?.is_flat() && (self.beam.y_order > 0 || self.beam.corrections > 0) {
            bail!("higher amplitude orders require the flat metric");
        }
        if self.rank == 0 {
            bail!("rank must be at least 1");
        }
        for spec in [Some(&self.fields.a1), Some(&self.fields.v1), self.fields.a2.as_ref(), self.fields.v2.as_ref()].into_iter().flatten() {
            if let FieldSpec::Random { strength, spread, .. } = spec {
                if !(strength.is_finite() && *spread > 0.0) {
                    bail!("random field needs a finite strength and a positive spread");
                }
            }
        }
        if self.fields.gauge.is_some() && (self.fields.a2.is_some() || self.fields.v2.is_some()) {
            bail!("give either a gauge or explicit a2/v2 generators, not both");
        }
        if self.fields.gauge.is_none() && (self.fields.a2.is_none() != self.fields.v2.is_none()) {
            bail!("a2 and v2 must be given together");
        }
        if self.rays.points == 0 || self.rays.directions == 0 || !(self.rays.step > 0.0) || self.rays.times.is_empty() {
            bail!("ray sampling needs positive counts, a positive step and at least one time");
        }
        if !(2..=5).contains(&self.beam.phase_order) || self.beam.corrections > 1 {
            bail!("beam phase order must be in 2..=5 and at most one correction is supported");
        }
        if self.beam.s_list.len() < 2 || self.beam.s_list.iter().any(|&s| !(s > 0.0)) || !(self.beam.horizon > 0.0) {
            bail!("beam s-list needs at least two positive values and the horizon must be positive");
        }
        if self.art.grid < 4 || self.art.angles == 0 || self.art.offsets == 0 || !(self.art.lambda_rel > 0.0) {
            bail!("ray-transform grid must be at least 4 with positive sampling and regularisation");
        }
        if self.art.gauge_points == 0 || self.art.gauge_directions == 0 {
            bail!("gauge reconstruction needs points and directions");
        }
        if self.schrod.grids.len() < 2 || self.schrod.grids.iter().any(|&n| n < 4) || self.schrod.grids.windows(2).any(|w| w[1] != 2 * w[0]) {
            bail!("Schrödinger grids must double from at least 4 cells, with two or more levels");
        }
        if !(self.schrod.horizon > 0.0 && self.schrod.dt_ratio > 0.0) {
            bail!("Schrödinger horizon and time-step ratio must be positive");
        }
        for (name, value) in self.tolerances.named() {
            if !(value > 0.0 && value.is_finite()) {
                bail!("tolerance {name} must be positive");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_configs_round_trip() {
        for name in BUNDLED {
            let cfg = ExperimentConfig::load(name).unwrap();
            let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
            assert_eq!(cfg, back);
        }
    }

    #[test]
    fn unknown_generator_is_rejected() {
        let text = FLAT_IDENTITY.replacen("kind = \"zero\"", "kind = \"wavelet\"", 1);
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn non_positive_tolerance_is_rejected() {
        let mut cfg = ExperimentConfig::load("flat-identity").unwrap();
        cfg.tolerances.unitarity = 0.0;
        assert!(cfg.validate().is_err());
        cfg.tolerances.unitarity = 1e-9;
        cfg.metric = "saddle".into();
        assert!(cfg.validate().is_err());
    }
}
