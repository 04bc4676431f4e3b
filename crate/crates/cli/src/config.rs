//! Experiment configuration: TOML schema, flag overrides, content hash and
//! conversion into library types.

use std::path::{Path, PathBuf};

use perptail::models::{
    calibrate_coeff, make_tilted, solve_alpha, CalibrationFamily, CoefficientLaw, Kind, Magnitude, Noise,
    PerpetuityModel, StepLaw,
};
use perptail::regvar::{HeavyTailLaw, LeftTail, SlowlyVarying};
use perptail::renewal::{GridSpec, Method};
use perptail::simulate::Truncation;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_alpha: Option<f64>,
    pub samples: u64,
    pub seed: u64,
    /// 0 uses every available core.
    pub workers: usize,
    pub out: PathBuf,
    pub checks: Vec<String>,
    pub coeff: CoeffConfig,
    pub noise: NoiseConfig,
    pub grid: GridConfig,
    pub trunc: Truncation,
    pub renewal: RenewalConfig,
    pub holder: HolderConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: "extremal".into(),
            target_alpha: None,
            samples: 1_000_000,
            seed: 1,
            workers: 0,
            out: PathBuf::from("perptail-run"),
            checks: vec!["first-order".into(), "plateau".into()],
            coeff: CoeffConfig::default(),
            noise: NoiseConfig {
                alpha: Some(1.0),
                ..NoiseConfig::default()
            },
            grid: GridConfig::default(),
            trunc: Truncation::default(),
            renewal: RenewalConfig::default(),
            holder: HolderConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoeffConfig {
    /// `lognormal`, `two-point` or `degenerate`.
    pub family: String,
    /// lognormal: `[mu, sigma]`, or `[sigma]` with `target_alpha`;
    /// two-point: `[a1, a2, p]`, or `[a1, a2]` with `target_alpha`;
    /// degenerate: `[value]`.
    pub params: Vec<f64>,
    pub sign_flip: f64,
}

impl Default for CoeffConfig {
    fn default() -> Self {
        CoeffConfig {
            family: "lognormal".into(),
            params: vec![-0.5, 1.0],
            sign_flip: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// `pareto`, a slowly varying tag (`constant`, `log`, `recip-log`,
    /// `iterlog`, `osc-haan`), `uniform` or `degenerate`.
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_b: Option<f64>,
    pub params: Vec<f64>,
    pub p_right: f64,
    pub left_eta: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            family: "pareto".into(),
            alpha: None,
            x_b: None,
            params: Vec::new(),
            p_right: 1.0,
            left_eta: 0.0,
        }
    }
}

/// Log-spaced levels from `x_min` to `x_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub count: usize,
    /// Levels entering the first-order and slope checks; `[0, inf]` takes all.
    pub window: [f64; 2],
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            x_min: 1.0,
            x_max: 10f64.exp(),
            count: 21,
            window: [6f64.exp(), 9f64.exp()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenewalConfig {
    /// `monte-carlo`, `convolution` or `ladder`.
    pub method: String,
    pub paths: u64,
    pub h: f64,
    pub x_min: f64,
    pub x_max: f64,
    /// `tilted` (from the coefficient law), `exponential`, `normal`,
    /// `degenerate` or `discrete`.
    pub step: String,
    /// exponential: `[rate]`; normal: `[mean, sd]`; degenerate: `[value]`;
    /// discrete: flattened `[value, weight, ...]`.
    pub step_params: Vec<f64>,
    /// Blackwell probe point.
    pub probe: f64,
    pub tolerance: f64,
}

impl Default for RenewalConfig {
    fn default() -> Self {
        let grid = GridSpec::default();
        RenewalConfig {
            method: "monte-carlo".into(),
            paths: 1_000_000,
            h: grid.h,
            x_min: grid.x_min,
            x_max: grid.x_max,
            step: "tilted".into(),
            step_params: Vec::new(),
            probe: 30.0,
            tolerance: 0.02,
        }
    }
}

/// Sandwich `g2 <= 1{r > xi} <= g1` differing on `[xi - eta, xi + eta]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HolderConfig {
    pub xi: f64,
    pub eta: f64,
}

impl Default for HolderConfig {
    fn default() -> Self {
        HolderConfig { xi: 2.0, eta: 0.5 }
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub checks: Option<Vec<String>>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.samples {
            self.samples = v;
        }
        if let Some(v) = o.workers {
            self.workers = v;
        }
        if let Some(v) = &o.out {
            self.out = v.clone();
        }
        if let Some(v) = &o.checks {
            self.checks = v.clone();
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML with the run-local fields `workers` and
    /// `out` cleared: they never change an emitted number.
    pub fn content_hash(&self) -> String {
        let mut canon = self.clone();
        canon.workers = 0;
        canon.out = PathBuf::new();
        Sha256::digest(canon.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn kind(&self) -> Result<Kind, CliError> {
        match self.kind.as_str() {
            "affine" => Ok(Kind::Affine),
            "extremal" => Ok(Kind::Extremal),
            other => Err(CliError::Config(format!("kind must be affine or extremal, got {other:?}"))),
        }
    }

    pub fn coefficient(&self) -> Result<CoefficientLaw, CliError> {
        let c = &self.coeff;
        let p = &c.params;
        let need = |n: usize| {
            if p.len() == n {
                Ok(())
            } else {
                Err(CliError::Config(format!(
                    "coeff.params for {} needs {n} values, got {}",
                    c.family,
                    p.len()
                )))
            }
        };
        let law = match (c.family.as_str(), self.target_alpha) {
            ("lognormal", Some(alpha)) => {
                need(1)?;
                calibrate_coeff(CalibrationFamily::LogNormal { sigma: p[0] }, alpha, c.sign_flip)?
            }
            ("lognormal", None) => {
                need(2)?;
                CoefficientLaw::new(Magnitude::LogNormal { mu: p[0], sigma: p[1] }, c.sign_flip)?
            }
            ("two-point", Some(alpha)) => {
                need(2)?;
                calibrate_coeff(CalibrationFamily::TwoPoint { a1: p[0], a2: p[1] }, alpha, c.sign_flip)?
            }
            ("two-point", None) => {
                need(3)?;
                CoefficientLaw::new(Magnitude::TwoPoint { a1: p[0], a2: p[1], p: p[2] }, c.sign_flip)?
            }
            ("degenerate", _) => {
                need(1)?;
                CoefficientLaw::new(Magnitude::Degenerate { value: p[0] }, c.sign_flip)?
            }
            (other, _) => return Err(CliError::Config(format!("unknown coefficient family {other:?}"))),
        };
        Ok(law)
    }

    pub fn noise(&self) -> Result<Noise, CliError> {
        let n = &self.noise;
        let pair = |what: &str| {
            if n.params.len() == 2 {
                Ok((n.params[0], n.params[1]))
            } else {
                Err(CliError::Config(format!("noise.params for {what} needs 2 values")))
            }
        };
        match n.family.as_str() {
            "uniform" => {
                let (lo, hi) = pair("uniform")?;
                Ok(Noise::Uniform { lo, hi })
            }
            "degenerate" => match n.params.as_slice() {
                [value] => Ok(Noise::Degenerate { value: *value }),
                _ => Err(CliError::Config("noise.params for degenerate needs 1 value".into())),
            },
            family => {
                let alpha = n
                    .alpha
                    .or(self.target_alpha)
                    .ok_or_else(|| CliError::Config("noise.alpha is required for a heavy-tailed noise".into()))?;
                let law = if family == "pareto" {
                    HeavyTailLaw::pareto(alpha)?
                } else {
                    let sv = SlowlyVarying::from_tag(family, &n.params)?;
                    let x_b = match n.x_b {
                        Some(x) => x,
                        None => first_valid_threshold(&sv, alpha)?,
                    };
                    HeavyTailLaw::new(alpha, sv, x_b, 1.0, LeftTail::None)?
                };
                let law = if n.p_right < 1.0 || n.left_eta != 0.0 {
                    law.signed(n.p_right, n.left_eta)?
                } else {
                    law
                };
                Ok(Noise::RegularlyVarying(law))
            }
        }
    }

    pub fn model(&self) -> Result<PerpetuityModel, CliError> {
        Ok(PerpetuityModel::new(self.coefficient()?, self.noise()?, self.kind()?)?)
    }

    pub fn x_grid(&self) -> Result<Vec<f64>, CliError> {
        let g = &self.grid;
        if !(g.x_min > 0.0 && g.x_max >= g.x_min && g.count >= 1) {
            return Err(CliError::Config(format!("bad grid {g:?}")));
        }
        if g.count == 1 {
            return Ok(vec![g.x_min]);
        }
        let (a, b) = (g.x_min.ln(), g.x_max.ln());
        let step = (b - a) / (g.count - 1) as f64;
        Ok((0..g.count).map(|i| (a + i as f64 * step).exp()).collect())
    }

    pub fn window(&self) -> (f64, f64) {
        (self.grid.window[0], self.grid.window[1])
    }

    pub fn renewal_spec(&self) -> GridSpec {
        GridSpec {
            h: self.renewal.h,
            x_min: self.renewal.x_min,
            x_max: self.renewal.x_max,
        }
    }

    pub fn renewal_method(&self) -> Result<Method, CliError> {
        let paths = self.renewal.paths;
        match self.renewal.method.as_str() {
            "monte-carlo" => Ok(Method::MonteCarlo { paths }),
            "convolution" => Ok(Method::Convolution),
            "ladder" => Ok(Method::LadderFactorized { paths }),
            other => Err(CliError::Config(format!("unknown renewal method {other:?}"))),
        }
    }

    /// Step law for the renewal pipeline, with the coefficient law and index
    /// when it is the tilted one.
    pub fn step_law(&self) -> Result<(StepLaw, Option<(CoefficientLaw, f64)>), CliError> {
        let p = &self.renewal.step_params;
        let bad = |what: &str| CliError::Config(format!("renewal.step_params for {what} has the wrong length"));
        match self.renewal.step.as_str() {
            "tilted" => {
                let coeff = self.coefficient()?;
                let alpha = match self.target_alpha {
                    Some(a) => a,
                    None => solve_alpha(&coeff)?,
                };
                let tilted = make_tilted(&coeff, alpha)?;
                Ok((tilted.step, Some((coeff, alpha))))
            }
            "exponential" => match p.as_slice() {
                [rate] => Ok((StepLaw::Exponential { rate: *rate }, None)),
                _ => Err(bad("exponential")),
            },
            "normal" => match p.as_slice() {
                [mean, sd] => Ok((StepLaw::Normal { mean: *mean, sd: *sd }, None)),
                _ => Err(bad("normal")),
            },
            "degenerate" => match p.as_slice() {
                [value] => Ok((StepLaw::Degenerate { value: *value }, None)),
                _ => Err(bad("degenerate")),
            },
            "discrete" if !p.is_empty() && p.len().is_multiple_of(2) => {
                let atoms = p.chunks(2).map(|c| (c[0], c[1])).collect();
                Ok((StepLaw::Discrete { atoms }, None))
            }
            "discrete" => Err(bad("discrete")),
            other => Err(CliError::Config(format!("unknown renewal step {other:?}"))),
        }
    }
}

/// Smallest `x_b = x0 e^k` at which `x^-a L(x)` is a valid tail.
fn first_valid_threshold(sv: &SlowlyVarying, alpha: f64) -> Result<f64, CliError> {
    let mut x_b = sv.threshold().max(1.0);
    for _ in 0..200 {
        if sv.log_derivative_bound(x_b) <= alpha && x_b.powf(-alpha) * sv.eval(x_b)? <= 1.0 {
            return Ok(x_b);
        }
        x_b *= std::f64::consts::E;
    }
    Err(CliError::Config(format!(
        "no threshold up to e^200 makes {} a tail of index {alpha}",
        sv.family().tag()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_toml() {
        let mut cfg = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&cfg.to_toml()).unwrap(), cfg);
        cfg.target_alpha = Some(1.5);
        cfg.coeff = CoeffConfig {
            family: "two-point".into(),
            params: vec![2.5, 0.1 + 0.2],
            sign_flip: 0.25,
        };
        cfg.noise.x_b = Some(std::f64::consts::E);
        cfg.noise.family = "log".into();
        cfg.grid.window = [0.0, f64::INFINITY];
        cfg.noise.alpha = None;
        cfg.checks.clear();
        let back = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.content_hash(), cfg.content_hash());
    }

    #[test]
    fn grid_is_log_spaced_with_exact_endpoints() {
        let cfg = ExperimentConfig::default();
        let g = cfg.x_grid().unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[0], 1.0);
        assert!((g[20] / cfg.grid.x_max - 1.0).abs() < 1e-12);
        assert!((g[1] - 0.5f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn calibrated_coefficient_from_config() {
        let cfg = ExperimentConfig {
            target_alpha: Some(2.0),
            coeff: CoeffConfig {
                family: "lognormal".into(),
                params: vec![1.0],
                sign_flip: 0.0,
            },
            ..Default::default()
        };
        let law = cfg.coefficient().unwrap();
        assert!((law.abs_moment(2.0) - 1.0).abs() < 1e-12);
        let bad = ExperimentConfig {
            coeff: CoeffConfig {
                family: "lognormal".into(),
                params: vec![1.0],
                sign_flip: 0.0,
            },
            ..Default::default()
        };
        assert!(matches!(bad.coefficient(), Err(CliError::Config(_))));
    }
}
