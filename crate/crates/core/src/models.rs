//! Coefficient laws for `A`, calibration of the critical index, the tilted
//! step law `Z` and moment audits of perpetuity models.

use serde::{Deserialize, Serialize};

use crate::error::{Assumption, Error, Result};
use crate::regvar::HeavyTailLaw;
use crate::rng::Stream;

/// Tolerance on `|E|A|^a - 1|` accepted as calibrated.
pub const CALIBRATION_TOL: f64 = 1e-9;

/// Law of `|A|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Magnitude {
    /// `a1` with probability `p`, `a2` otherwise.
    TwoPoint { a1: f64, a2: f64, p: f64 },
    /// `log |A| ~ Normal(mu, sigma^2)`.
    LogNormal { mu: f64, sigma: f64 },
    /// `|A| = value`; only for exercising the samplers.
    Degenerate { value: f64 },
}

/// `A = sign * |A|` with an independent sign, negative with probability
/// `sign_flip`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientLaw {
    magnitude: Magnitude,
    sign_flip: f64,
}

impl CoefficientLaw {
    pub fn new(magnitude: Magnitude, sign_flip: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&sign_flip) {
            return Err(Error::invalid(format!("sign flip must lie in [0, 1], got {sign_flip}")));
        }
        match magnitude {
            Magnitude::TwoPoint { a1, a2, p } => {
                if !(a1 > 0.0 && a2 > 0.0 && a1.is_finite() && a2.is_finite()) {
                    return Err(Error::invalid(format!("two-point atoms must be positive, got {a1}, {a2}")));
                }
                if !(p > 0.0 && p < 1.0) {
                    return Err(Error::invalid(format!("two-point weight must lie in (0, 1), got {p}")));
                }
            }
            Magnitude::LogNormal { mu, sigma } => {
                if !(sigma > 0.0 && sigma.is_finite() && mu.is_finite()) {
                    return Err(Error::invalid(format!("lognormal needs finite mu and sigma > 0, got {mu}, {sigma}")));
                }
            }
            Magnitude::Degenerate { value } => {
                if !(value >= 0.0 && value.is_finite()) {
                    return Err(Error::invalid(format!("degenerate magnitude must be >= 0, got {value}")));
                }
            }
        }
        let law = CoefficientLaw { magnitude, sign_flip };
        let m = law.mean_log_abs();
        if !(m < 0.0) {
            return Err(Error::hypothesis(
                Assumption::Contraction,
                format!("E log|A| = {m} is not negative"),
            ));
        }
        Ok(law)
    }

    pub fn two_point(a1: f64, a2: f64, p: f64) -> Result<Self> {
        Self::new(Magnitude::TwoPoint { a1, a2, p }, 0.0)
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(Magnitude::LogNormal { mu, sigma }, 0.0)
    }

    pub fn degenerate(value: f64) -> Result<Self> {
        Self::new(Magnitude::Degenerate { value }, 0.0)
    }

    /// Same magnitude law with an independent sign flip.
    pub fn with_sign_flip(self, sign_flip: f64) -> Result<Self> {
        Self::new(self.magnitude, sign_flip)
    }

    pub fn magnitude(&self) -> Magnitude {
        self.magnitude
    }

    pub fn sign_flip(&self) -> f64 {
        self.sign_flip
    }

    pub fn is_signed(&self) -> bool {
        self.sign_flip > 0.0
    }

    pub fn family_tag(&self) -> &'static str {
        match self.magnitude {
            Magnitude::TwoPoint { .. } => "two-point",
            Magnitude::LogNormal { .. } => "lognormal",
            Magnitude::Degenerate { .. } => "degenerate",
        }
    }

    /// `E |A|^beta`.
    pub fn abs_moment(&self, beta: f64) -> f64 {
        match self.magnitude {
            Magnitude::TwoPoint { a1, a2, p } => p * a1.powf(beta) + (1.0 - p) * a2.powf(beta),
            Magnitude::LogNormal { mu, sigma } => (beta * mu + 0.5 * beta * beta * sigma * sigma).exp(),
            Magnitude::Degenerate { value } => value.powf(beta),
        }
    }

    /// `E |A|^beta log |A|`.
    pub fn abs_log_moment(&self, beta: f64) -> f64 {
        let term = |a: f64| if a == 0.0 { 0.0 } else { a.powf(beta) * a.ln() };
        match self.magnitude {
            Magnitude::TwoPoint { a1, a2, p } => p * term(a1) + (1.0 - p) * term(a2),
            Magnitude::LogNormal { mu, sigma } => (mu + beta * sigma * sigma) * self.abs_moment(beta),
            Magnitude::Degenerate { value } => term(value),
        }
    }

    /// `E |A|^beta (log |A|)^2`.
    pub fn abs_log2_moment(&self, beta: f64) -> f64 {
        let term = |a: f64| if a == 0.0 { 0.0 } else { a.powf(beta) * a.ln().powi(2) };
        match self.magnitude {
            Magnitude::TwoPoint { a1, a2, p } => p * term(a1) + (1.0 - p) * term(a2),
            Magnitude::LogNormal { mu, sigma } => {
                let m = mu + beta * sigma * sigma;
                (sigma * sigma + m * m) * self.abs_moment(beta)
            }
            Magnitude::Degenerate { value } => term(value),
        }
    }

    /// `E log |A|`.
    pub fn mean_log_abs(&self) -> f64 {
        match self.magnitude {
            Magnitude::TwoPoint { a1, a2, p } => p * a1.ln() + (1.0 - p) * a2.ln(),
            Magnitude::LogNormal { mu, .. } => mu,
            Magnitude::Degenerate { value } => value.ln(),
        }
    }

    /// `E A^beta 1{A > 0}`.
    pub fn positive_part_moment(&self, beta: f64) -> f64 {
        let positive_atom = matches!(self.magnitude, Magnitude::Degenerate { value } if value == 0.0);
        if positive_atom {
            return 0.0;
        }
        (1.0 - self.sign_flip) * self.abs_moment(beta)
    }

    /// `log |A|` has an absolutely continuous law.
    pub fn has_density(&self) -> bool {
        matches!(self.magnitude, Magnitude::LogNormal { .. })
    }

    /// `log |A|` given `A != 0` is supported on a lattice `c Z`.
    pub fn is_arithmetic(&self) -> bool {
        match self.magnitude {
            Magnitude::TwoPoint { a1, a2, .. } => commensurable(a1.ln(), a2.ln()),
            Magnitude::LogNormal { .. } => false,
            Magnitude::Degenerate { .. } => true,
        }
    }

    /// Supremum of the density of `log |A|`, if it has one.
    pub fn log_density_bound(&self) -> Option<f64> {
        match self.magnitude {
            Magnitude::LogNormal { sigma, .. } => {
                Some(1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt()))
            }
            _ => None,
        }
    }

    pub fn sample_abs(&self, stream: &mut Stream) -> f64 {
        match self.magnitude {
            Magnitude::TwoPoint { a1, a2, p } => {
                if stream.uniform() < p {
                    a1
                } else {
                    a2
                }
            }
            Magnitude::LogNormal { mu, sigma } => (mu + sigma * stream.standard_normal()).exp(),
            Magnitude::Degenerate { value } => value,
        }
    }

    pub fn sample(&self, stream: &mut Stream) -> f64 {
        let m = self.sample_abs(stream);
        if self.sign_flip > 0.0 && stream.uniform() < self.sign_flip {
            -m
        } else {
            m
        }
    }
}

/// Whether `x / y` is a rational number with small denominator.
fn commensurable(x: f64, y: f64) -> bool {
    if x == 0.0 || y == 0.0 {
        return true;
    }
    let ratio = (x / y).abs();
    // Continued fraction expansion; stop once a convergent matches.
    let (mut h0, mut h1, mut k0, mut k1) = (0.0, 1.0, 1.0, 0.0);
    let mut r = ratio;
    for _ in 0..20 {
        let a = r.floor();
        let (h2, k2) = (a * h1 + h0, a * k1 + k0);
        if k2 > 1000.0 {
            return false;
        }
        if (h2 / k2 - ratio).abs() <= 1e-10 * ratio.max(1.0) {
            return true;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac < 1e-12 {
            return true;
        }
        r = 1.0 / frac;
    }
    false
}

/// Root `a > 0` of `E|A|^a = 1` by bisection.
pub fn solve_alpha(coeff: &CoefficientLaw) -> Result<f64> {
    let f = |b: f64| coeff.abs_moment(b) - 1.0;
    let mut lo = 1e-6;
    if f(lo) >= 0.0 {
        return Err(Error::hypothesis(
            Assumption::CriticalMoment,
            "E|A|^b >= 1 already at b = 1e-6".to_string(),
        ));
    }
    let mut hi = 64.0;
    while f(hi) <= 0.0 {
        if hi >= 4096.0 {
            return Err(Error::hypothesis(
                Assumption::CriticalMoment,
                format!(
                    "E|A|^b stays below 1 for b in [1e-6, {hi}] ({} law with |A| <= 1)",
                    coeff.family_tag()
                ),
            ));
        }
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-13 * mid.max(1.0) || mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn require_calibrated(coeff: &CoefficientLaw, alpha: f64) -> Result<()> {
    let m = coeff.abs_moment(alpha);
    if (m - 1.0).abs() > CALIBRATION_TOL {
        return Err(Error::hypothesis(
            Assumption::CriticalMoment,
            format!("E|A|^{alpha} = {m}, not 1"),
        ));
    }
    Ok(())
}

/// `rho = E |A|^a log |A|`.
pub fn rho(coeff: &CoefficientLaw, alpha: f64) -> Result<f64> {
    require_calibrated(coeff, alpha)?;
    Ok(coeff.abs_log_moment(alpha))
}

/// Family parameters for [`calibrate_coeff`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CalibrationFamily {
    /// Solves for the weight of `a1`.
    TwoPoint { a1: f64, a2: f64 },
    /// Solves for `mu`.
    LogNormal { sigma: f64 },
}

/// Builds a law with `E|A|^alpha = 1`.
pub fn calibrate_coeff(family: CalibrationFamily, alpha: f64, sign_flip: f64) -> Result<CoefficientLaw> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("target index must be positive, got {alpha}")));
    }
    match family {
        CalibrationFamily::LogNormal { sigma } => {
            CoefficientLaw::new(Magnitude::LogNormal { mu: -0.5 * alpha * sigma * sigma, sigma }, sign_flip)
        }
        CalibrationFamily::TwoPoint { a1, a2 } => {
            let (m1, m2) = (a1.powf(alpha), a2.powf(alpha));
            if !(a1 > 0.0 && a2 > 0.0) || m1 == m2 {
                return Err(Error::invalid(format!(
                    "two-point atoms {a1}, {a2} cannot satisfy E|A|^a = 1 and E log|A| < 0"
                )));
            }
            let p = (1.0 - m2) / (m1 - m2);
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::invalid(format!(
                    "two-point calibration gives weight {p} outside (0, 1)"
                )));
            }
            CoefficientLaw::new(Magnitude::TwoPoint { a1, a2, p }, sign_flip)
        }
    }
}

/// Law of a random-walk step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum StepLaw {
    Degenerate { value: f64 },
    Exponential { rate: f64 },
    Normal { mean: f64, sd: f64 },
    /// Atoms `(value, weight)` with weights summing to 1.
    Discrete { atoms: Vec<(f64, f64)> },
}

impl StepLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            StepLaw::Degenerate { value } => value.is_finite(),
            StepLaw::Exponential { rate } => *rate > 0.0 && rate.is_finite(),
            StepLaw::Normal { mean, sd } => mean.is_finite() && *sd > 0.0 && sd.is_finite(),
            StepLaw::Discrete { atoms } => {
                !atoms.is_empty()
                    && atoms.iter().all(|(v, w)| v.is_finite() && *w >= 0.0)
                    && (atoms.iter().map(|a| a.1).sum::<f64>() - 1.0).abs() < 1e-9
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("malformed step law {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            StepLaw::Degenerate { value } => *value,
            StepLaw::Exponential { rate } => 1.0 / rate,
            StepLaw::Normal { mean, .. } => *mean,
            StepLaw::Discrete { atoms } => atoms.iter().map(|(v, w)| v * w).sum(),
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            StepLaw::Degenerate { value } => value * value,
            StepLaw::Exponential { rate } => 2.0 / (rate * rate),
            StepLaw::Normal { mean, sd } => mean * mean + sd * sd,
            StepLaw::Discrete { atoms } => atoms.iter().map(|(v, w)| v * v * w).sum(),
        }
    }

    /// `P(Z <= z)`.
    pub fn cdf(&self, z: f64) -> f64 {
        match self {
            StepLaw::Degenerate { value } => f64::from(u8::from(z >= *value)),
            StepLaw::Exponential { rate } => {
                if z <= 0.0 {
                    0.0
                } else {
                    -(-rate * z).exp_m1()
                }
            }
            StepLaw::Normal { mean, sd } => normal_cdf((z - mean) / sd),
            StepLaw::Discrete { atoms } => atoms.iter().filter(|a| a.0 <= z).map(|a| a.1).sum(),
        }
    }

    pub fn pdf(&self, z: f64) -> Option<f64> {
        match self {
            StepLaw::Exponential { rate } => Some(if z < 0.0 { 0.0 } else { rate * (-rate * z).exp() }),
            StepLaw::Normal { mean, sd } => {
                let t = (z - mean) / sd;
                Some((-0.5 * t * t).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt()))
            }
            _ => None,
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        match self {
            StepLaw::Degenerate { value } => *value >= 0.0,
            StepLaw::Exponential { .. } => true,
            StepLaw::Normal { .. } => false,
            StepLaw::Discrete { atoms } => atoms.iter().all(|a| a.0 >= 0.0 || a.1 == 0.0),
        }
    }

    /// Cramer's condition; holds for laws with a density.
    pub fn strongly_non_lattice(&self) -> bool {
        matches!(self, StepLaw::Exponential { .. } | StepLaw::Normal { .. })
    }

    pub fn is_arithmetic(&self) -> bool {
        match self {
            StepLaw::Degenerate { .. } => true,
            StepLaw::Discrete { atoms } => {
                let support: Vec<f64> = atoms.iter().filter(|a| a.1 > 0.0).map(|a| a.0).collect();
                support.windows(2).all(|w| commensurable(w[0], w[1]))
            }
            _ => false,
        }
    }

    /// `E e^{t Z}`, infinite outside the domain.
    pub fn mgf(&self, t: f64) -> f64 {
        match self {
            StepLaw::Degenerate { value } => (t * value).exp(),
            StepLaw::Exponential { rate } => {
                if t < *rate {
                    rate / (rate - t)
                } else {
                    f64::INFINITY
                }
            }
            StepLaw::Normal { mean, sd } => (t * mean + 0.5 * t * t * sd * sd).exp(),
            StepLaw::Discrete { atoms } => atoms.iter().map(|(v, w)| w * (t * v).exp()).sum(),
        }
    }

    /// Positive root `theta` of `E e^{-theta Z} = 1`: the exponential decay
    /// rate of the renewal function on the negative half-line.
    pub fn left_decay_rate(&self) -> Option<f64> {
        if self.is_nonnegative() || self.mean() <= 0.0 {
            return None;
        }
        if let StepLaw::Normal { mean, sd } = self {
            return Some(2.0 * mean / (sd * sd));
        }
        let f = |t: f64| self.mgf(-t) - 1.0;
        let mut hi = 1.0;
        while f(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e6 {
                return None;
            }
        }
        let mut lo = 1e-9;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }

    pub fn sample(&self, stream: &mut Stream) -> f64 {
        match self {
            StepLaw::Degenerate { value } => *value,
            StepLaw::Exponential { rate } => stream.standard_exponential() / rate,
            StepLaw::Normal { mean, sd } => mean + sd * stream.standard_normal(),
            StepLaw::Discrete { atoms } => {
                let u = stream.uniform();
                let mut acc = 0.0;
                for &(v, w) in atoms {
                    acc += w;
                    if u < acc {
                        return v;
                    }
                }
                atoms.last().map(|a| a.0).unwrap_or(0.0)
            }
        }
    }
}

fn normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

/// Step law of `log |A|` under the change of measure `|A|^a dP`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TiltedStepLaw {
    pub base: CoefficientLaw,
    pub alpha: f64,
    pub step: StepLaw,
}

impl TiltedStepLaw {
    /// `E Z = rho`.
    pub fn mean(&self) -> f64 {
        self.step.mean()
    }

    pub fn second_moment(&self) -> f64 {
        self.step.second_moment()
    }

    /// `E e^{eps Z} = E|A|^(a + eps)`.
    pub fn exp_moment(&self, eps: f64) -> f64 {
        self.base.abs_moment(self.alpha + eps)
    }

    /// Largest `eps` with `E e^{eps Z}` finite; infinite for the catalog.
    pub fn exp_moment_radius(&self) -> f64 {
        f64::INFINITY
    }
}

pub fn make_tilted(coeff: &CoefficientLaw, alpha: f64) -> Result<TiltedStepLaw> {
    require_calibrated(coeff, alpha)?;
    let step = match coeff.magnitude() {
        Magnitude::LogNormal { mu, sigma } => StepLaw::Normal {
            mean: mu + alpha * sigma * sigma,
            sd: sigma,
        },
        Magnitude::TwoPoint { a1, a2, p } => {
            let (w1, w2) = (p * a1.powf(alpha), (1.0 - p) * a2.powf(alpha));
            let total = w1 + w2;
            StepLaw::Discrete {
                atoms: vec![(a1.ln(), w1 / total), (a2.ln(), w2 / total)],
            }
        }
        Magnitude::Degenerate { value } => StepLaw::Degenerate { value: value.ln() },
    };
    Ok(TiltedStepLaw {
        base: *coeff,
        alpha,
        step,
    })
}

/// Law of the noise `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Noise {
    RegularlyVarying(HeavyTailLaw),
    Degenerate { value: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Noise {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Noise::Uniform { lo, hi } if !(lo < hi && lo.is_finite() && hi.is_finite()) => {
                Err(Error::invalid(format!("uniform noise needs lo < hi, got [{lo}, {hi}]")))
            }
            Noise::Degenerate { value } if !value.is_finite() => {
                Err(Error::invalid(format!("degenerate noise value {value}")))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn sample(&self, stream: &mut Stream) -> f64 {
        match self {
            Noise::RegularlyVarying(law) => law.sample(stream),
            Noise::Degenerate { value } => *value,
            Noise::Uniform { lo, hi } => lo + (hi - lo) * stream.uniform(),
        }
    }

    /// `P(B > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        match self {
            Noise::RegularlyVarying(law) => law.survival(x),
            Noise::Degenerate { value } => f64::from(u8::from(x < *value)),
            Noise::Uniform { lo, hi } => ((hi - x) / (hi - lo)).clamp(0.0, 1.0),
        }
    }

    /// `P(|B| > t)`.
    pub fn abs_survival(&self, t: f64) -> f64 {
        match self {
            Noise::RegularlyVarying(law) => law.abs_survival(t),
            _ => self.survival(t) + (1.0 - self.survival(-t)).max(0.0),
        }
    }

    /// `E B_+^beta`.
    pub fn positive_moment(&self, beta: f64) -> Result<f64> {
        match *self {
            Noise::RegularlyVarying(law) => law.positive_moment(beta),
            Noise::Degenerate { value } => Ok(value.max(0.0).powf(beta)),
            Noise::Uniform { lo, hi } => {
                let (a, b) = (lo.max(0.0), hi.max(0.0));
                Ok((b.powf(beta + 1.0) - a.powf(beta + 1.0)) / ((beta + 1.0) * (hi - lo)))
            }
        }
    }

    pub fn heavy(&self) -> Option<&HeavyTailLaw> {
        match self {
            Noise::RegularlyVarying(law) => Some(law),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Noise::Degenerate { value } if *value == 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Affine,
    Extremal,
}

/// Which tail behaviour the model falls into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "kebab-case")]
pub enum Regime {
    /// `E|A|^a = 1` and `B` regularly varying with index `a`, `E B_+^a = inf`.
    CriticalHeavy { alpha: f64, rho: f64 },
    /// `E|A|^a < 1` at the noise index: tail inherited from `B`.
    Subcritical { alpha: f64, moment: f64 },
    /// `E|A|^a = 1` with a lighter noise: pure power tail.
    CriticalLight { alpha: f64, rho: f64 },
    /// No critical index and light noise.
    Light,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerpetuityModel {
    pub coeff: CoefficientLaw,
    pub noise: Noise,
    pub kind: Kind,
    pub regime: Regime,
}

impl PerpetuityModel {
    pub fn new(coeff: CoefficientLaw, noise: Noise, kind: Kind) -> Result<Self> {
        noise.validate()?;
        if kind == Kind::Extremal && coeff.is_signed() {
            return Err(Error::hypothesis(
                Assumption::NonNegativeCoefficient,
                format!("extremal recursion with P(A < 0) = {}", coeff.sign_flip()),
            ));
        }
        let regime = match noise.heavy() {
            Some(law) => {
                let a = law.alpha();
                let m = coeff.abs_moment(a);
                if (m - 1.0).abs() <= CALIBRATION_TOL {
                    Regime::CriticalHeavy {
                        alpha: a,
                        rho: coeff.abs_log_moment(a),
                    }
                } else if m < 1.0 {
                    Regime::Subcritical { alpha: a, moment: m }
                } else {
                    let alpha = solve_alpha(&coeff)?;
                    Regime::CriticalLight {
                        alpha,
                        rho: coeff.abs_log_moment(alpha),
                    }
                }
            }
            None => match solve_alpha(&coeff) {
                Ok(alpha) => Regime::CriticalLight {
                    alpha,
                    rho: coeff.abs_log_moment(alpha),
                },
                Err(_) => Regime::Light,
            },
        };
        Ok(PerpetuityModel {
            coeff,
            noise,
            kind,
            regime,
        })
    }

    /// `(alpha, rho)` of the critical-heavy regime.
    pub fn critical_heavy(&self) -> Result<(f64, f64)> {
        match self.regime {
            Regime::CriticalHeavy { alpha, rho } => Ok((alpha, rho)),
            _ => Err(Error::hypothesis(
                Assumption::CriticalMoment,
                format!("model is in the {:?} regime, not critical with heavy noise", self.regime),
            )),
        }
    }

    pub fn id(&self) -> String {
        let kind = match self.kind {
            Kind::Affine => "affine",
            Kind::Extremal => "extremal",
        };
        let noise = match &self.noise {
            Noise::RegularlyVarying(law) => format!(
                "rv-{}-a{}",
                law.slowly_varying().family().tag(),
                law.alpha()
            ),
            Noise::Degenerate { value } => format!("const-{value}"),
            Noise::Uniform { lo, hi } => format!("uniform-{lo}-{hi}"),
        };
        format!("{kind}/{}-s{}/{noise}", self.coeff.family_tag(), self.coeff.sign_flip())
    }

    pub fn audit(&self) -> AuditReport {
        assumption_audit(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditEntry {
    pub assumption: Assumption,
    pub label: String,
    pub value: f64,
    pub passed: bool,
    /// Failing a required entry invalidates the model's main asymptotics.
    pub required: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub entries: Vec<AuditEntry>,
}

impl AuditReport {
    pub fn passed(&self, assumption: Assumption) -> bool {
        self.entries
            .iter()
            .filter(|e| e.assumption == assumption)
            .all(|e| e.passed)
    }

    /// First required entry that failed.
    pub fn first_required_failure(&self) -> Option<&AuditEntry> {
        self.entries.iter().find(|e| e.required && !e.passed)
    }

    pub fn into_error(self) -> Result<()> {
        match self.first_required_failure() {
            Some(e) => Err(Error::hypothesis(e.assumption, format!("{}: {}", e.label, e.detail))),
            None => Ok(()),
        }
    }
}

/// Numerical audit of the moment and regularity hypotheses of a model.
pub fn assumption_audit(model: &PerpetuityModel) -> AuditReport {
    let coeff = &model.coeff;
    let mut entries = Vec::new();
    let critical_heavy = matches!(model.regime, Regime::CriticalHeavy { .. });
    let mut push = |assumption, label: String, value: f64, passed: bool, required: bool, detail: String| {
        entries.push(AuditEntry {
            assumption,
            label,
            value,
            passed,
            required,
            detail,
        })
    };

    let m = coeff.mean_log_abs();
    push(Assumption::Contraction, "E log|A|".into(), m, m < 0.0, true, format!("{m:.6}"));

    let alpha = match model.regime {
        Regime::CriticalHeavy { alpha, .. }
        | Regime::Subcritical { alpha, .. }
        | Regime::CriticalLight { alpha, .. } => alpha,
        Regime::Light => f64::NAN,
    };
    let crit = coeff.abs_moment(alpha);
    let critical_required = matches!(
        model.regime,
        Regime::CriticalHeavy { .. } | Regime::CriticalLight { .. }
    );
    push(
        Assumption::CriticalMoment,
        "E|A|^a".into(),
        crit,
        (crit - 1.0).abs() <= CALIBRATION_TOL,
        critical_required,
        format!("a = {alpha}, E|A|^a = {crit}"),
    );

    for eps in [0.1, 0.5] {
        let v = coeff.abs_moment(alpha + eps);
        push(
            Assumption::HigherMoment,
            format!("E|A|^(a+{eps})"),
            v,
            v.is_finite(),
            critical_required,
            "closed form".into(),
        );
    }

    if let Some(law) = model.noise.heavy() {
        let mut any_finite = false;
        for frac in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let eta = frac * law.alpha();
            let v = coeff.abs_moment(eta) * law.positive_moment(law.alpha() - eta).unwrap_or(f64::INFINITY);
            any_finite |= v.is_finite();
            push(
                Assumption::MixedMoment,
                format!("E|A|^{eta} E B_+^(a-{eta})"),
                v,
                v.is_finite(),
                false,
                "factorised by independence".into(),
            );
        }
        if !any_finite && critical_heavy {
            push(
                Assumption::MixedMoment,
                "mixed moment on eta grid".into(),
                f64::INFINITY,
                false,
                true,
                "no eta on the grid gives a finite mixed moment".into(),
            );
        }
        let x = 1e12;
        let growth = law.abs_de_haan(x).unwrap_or(f64::NAN) / law.abs_de_haan(1e6).unwrap_or(f64::NAN);
        push(
            Assumption::InfiniteNoiseMoment,
            "L~(1e12) / L~(1e6)".into(),
            growth,
            growth > 1.0,
            critical_heavy,
            "de Haan function keeps growing".into(),
        );
    }

    match coeff.log_density_bound() {
        Some(bound) => push(
            Assumption::HolderIncrements,
            "sup density of log A".into(),
            bound,
            true,
            false,
            "density family: increments bounded with exponent 1".into(),
        ),
        None => push(
            Assumption::HolderIncrements,
            "atomic law of log A".into(),
            f64::NAN,
            false,
            false,
            "atomic: increments over shrinking windows do not vanish".into(),
        ),
    }
    let snl = coeff.has_density();
    push(
        Assumption::StronglyNonLattice,
        "tilted step law".into(),
        f64::from(u8::from(snl)),
        snl,
        false,
        if snl {
            "absolutely continuous log A".into()
        } else {
            "atomic: strongly non-lattice FAILS".into()
        },
    );
    let arithmetic = coeff.is_arithmetic();
    push(
        Assumption::NonArithmetic,
        "log|A| given A != 0".into(),
        f64::from(u8::from(!arithmetic)),
        !arithmetic,
        critical_heavy,
        if arithmetic {
            "supported on a lattice".into()
        } else {
            "non-arithmetic".into()
        },
    );

    if coeff.is_signed() {
        let mu_plus = coeff.positive_part_moment(alpha);
        push(
            Assumption::SubcriticalPositivePart,
            "E A^a 1{A > 0}".into(),
            mu_plus,
            mu_plus < 1.0,
            critical_heavy,
            format!("{mu_plus}"),
        );
    }

    AuditReport { entries }
}
