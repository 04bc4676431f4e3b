//! Slowly varying functions, de Haan transforms and regularly varying laws.
//!
//! A [`SlowlyVarying`] function is drawn from a fixed catalog and evaluated
//! with a constant continuation below its threshold `x0`. The de Haan
//! transform `L~(x) = int_0^x L(t)/t dt` instead tapers the function linearly
//! to zero on `(0, x0)`, so that the integral converges at the origin; with
//! this convention the Pareto law has `L~(x) = 1 + log x`.
//!
//! [`HeavyTailLaw`] describes a noise variable `B` with
//! `P(B > x) = p x^-a L(x)` for `x >= x_b`. Its own slowly varying part is the
//! global function `t^a P(B > t)`, which makes the truncated moment identity
//! `E B_+^a 1{B <= x} = a L~(x) - L(x)` exact.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Assumption, Error, Result};
use crate::quad::{self, Tolerance};
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SvFamily {
    /// `L(t) = c`.
    Constant { c: f64 },
    /// `L(t) = log t`.
    Log,
    /// `L(t) = 1 / log t`.
    ReciprocalLog,
    /// `L(t) = log log t`.
    IterLog,
    /// `L(t) = exp((log t)^(1/3) cos((log t)^(1/3)))`.
    OscillatingHaan,
}

impl SvFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            SvFamily::Constant { .. } => "constant",
            SvFamily::Log => "log",
            SvFamily::ReciprocalLog => "recip-log",
            SvFamily::IterLog => "iterlog",
            SvFamily::OscillatingHaan => "osc-haan",
        }
    }

    /// Smallest threshold at which the family formula is positive and valid.
    pub fn natural_threshold(&self) -> f64 {
        match self {
            SvFamily::Constant { .. } | SvFamily::OscillatingHaan => 1.0,
            SvFamily::Log | SvFamily::ReciprocalLog => E,
            SvFamily::IterLog => E.powf(E),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlowlyVarying {
    family: SvFamily,
    x0: f64,
}

impl SlowlyVarying {
    pub fn new(family: SvFamily) -> Result<Self> {
        Self::with_threshold(family, family.natural_threshold())
    }

    /// Uses a threshold `x0` at or above the family's natural one.
    pub fn with_threshold(family: SvFamily, x0: f64) -> Result<Self> {
        if let SvFamily::Constant { c } = family {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::invalid(format!("constant family needs c > 0, got {c}")));
            }
        }
        let natural = family.natural_threshold();
        if !(x0.is_finite() && x0 >= natural * (1.0 - 1e-15)) {
            return Err(Error::invalid(format!(
                "threshold {x0} below the natural threshold {natural} of the {} family",
                family.tag()
            )));
        }
        Ok(SlowlyVarying { family, x0 })
    }

    /// Looks up a catalog family by its config tag.
    pub fn from_tag(tag: &str, params: &[f64]) -> Result<Self> {
        let family = match tag {
            "constant" => SvFamily::Constant {
                c: params.first().copied().unwrap_or(1.0),
            },
            "log" => SvFamily::Log,
            "recip-log" => SvFamily::ReciprocalLog,
            "iterlog" => SvFamily::IterLog,
            "osc-haan" => SvFamily::OscillatingHaan,
            other => return Err(Error::invalid(format!("unknown slowly varying family {other:?}"))),
        };
        Self::new(family)
    }

    pub fn family(&self) -> SvFamily {
        self.family
    }

    pub fn threshold(&self) -> f64 {
        self.x0
    }

    fn u0(&self) -> f64 {
        self.x0.ln()
    }

    /// Family formula in the log variable `u = log t`, valid for `u >= log x0`.
    fn formula(&self, u: f64) -> f64 {
        match self.family {
            SvFamily::Constant { c } => c,
            SvFamily::Log => u,
            SvFamily::ReciprocalLog => 1.0 / u,
            SvFamily::IterLog => u.ln(),
            SvFamily::OscillatingHaan => {
                let v = u.cbrt();
                (v * v.cos()).exp()
            }
        }
    }

    /// `L(e^u)` with the constant continuation below the threshold.
    pub fn at_log(&self, u: f64) -> f64 {
        self.formula(u.max(self.u0()))
    }

    /// `L(x)` for `x > 0`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::invalid(format!("slowly varying function evaluated at {x}")));
        }
        Ok(self.at(x))
    }

    pub(crate) fn at(&self, x: f64) -> f64 {
        self.at_log(x.ln())
    }

    /// `int_{u0}^{u} L(e^s) ds` for `u >= u0`.
    fn formula_integral(&self, u: f64) -> Result<f64> {
        let u0 = self.u0();
        if u <= u0 {
            return Ok(0.0);
        }
        Ok(match self.family {
            SvFamily::Constant { c } => c * (u - u0),
            SvFamily::Log => 0.5 * (u - u0) * (u + u0),
            SvFamily::ReciprocalLog => (u / u0).ln(),
            SvFamily::IterLog => u * u.ln() - u - (u0 * u0.ln() - u0),
            SvFamily::OscillatingHaan => {
                // s = w^3 removes the cube root from the integrand.
                let f = |w: f64| 3.0 * w * w * (w * w.cos()).exp();
                quad::integrate(f, u0.cbrt(), u.cbrt(), Tolerance::default())?.value
            }
        })
    }

    /// `int_a^b L(t)/t dt` using the constant continuation.
    pub fn log_integral(&self, a: f64, b: f64) -> Result<f64> {
        if !(a > 0.0 && b >= a) {
            return Err(Error::invalid(format!("log integral over [{a}, {b}]")));
        }
        let (ua, ub, u0) = (a.ln(), b.ln(), self.u0());
        let flat = (ub.min(u0) - ua.min(u0)).max(0.0) * self.formula(u0);
        Ok(flat + self.formula_integral(ub.max(u0))? - self.formula_integral(ua.max(u0))?)
    }

    /// Value used inside the de Haan integral: `L(x0) t / x0` below `x0`.
    pub fn tapered(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else if t < self.x0 {
            self.formula(self.u0()) * t / self.x0
        } else {
            self.at(t)
        }
    }

    /// De Haan function `L~(x) = int_0^x L(t)/t dt` of the tapered function.
    pub fn de_haan(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::invalid(format!("de Haan function evaluated at {x}")));
        }
        let below = self.formula(self.u0()) * x.min(self.x0) / self.x0;
        Ok(below + self.formula_integral(x.ln().max(self.u0()))?)
    }

    /// `(L~(lambda x) - L~(x)) / L(x)`, which tends to `log lambda`.
    pub fn increment(&self, x: f64, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Err(Error::invalid(format!("increment factor {lambda}")));
        }
        Ok((self.de_haan(lambda * x)? - self.de_haan(x)?) / self.eval(x)?)
    }

    /// `d log L(e^u) / du` on the formula branch.
    fn log_derivative(&self, u: f64) -> f64 {
        match self.family {
            SvFamily::Constant { .. } => 0.0,
            SvFamily::Log => 1.0 / u,
            SvFamily::ReciprocalLog => -1.0 / u,
            SvFamily::IterLog => 1.0 / (u * u.ln()),
            SvFamily::OscillatingHaan => {
                let v = u.cbrt();
                if v <= 0.0 {
                    f64::INFINITY
                } else {
                    (v.cos() - v * v.sin()) / (3.0 * v * v)
                }
            }
        }
    }

    /// Upper bound of `d log L(t) / d log t` over `t >= x`.
    pub fn log_derivative_bound(&self, x: f64) -> f64 {
        let u = x.ln().max(self.u0());
        match self.family {
            SvFamily::Constant { .. } | SvFamily::ReciprocalLog => 0.0,
            SvFamily::Log | SvFamily::IterLog => self.log_derivative(u).max(0.0),
            SvFamily::OscillatingHaan => {
                let v0 = u.cbrt();
                if v0 <= 0.0 {
                    return f64::INFINITY;
                }
                // The bound decays like 1/v, so a long finite sweep suffices.
                let mut best = f64::NEG_INFINITY;
                let mut v = v0;
                while v < v0 + 60.0 {
                    best = best.max((v.cos() - v * v.sin()) / (3.0 * v * v));
                    v += 1e-3;
                }
                best.max(0.0)
            }
        }
    }

    /// Smallest `A` with `L(y)/L(x) <= A max((y/x)^d, (y/x)^-d)` over a
    /// log-spaced grid of `x, y` in `[x0, e^u_max]`.
    pub fn potter_constant(&self, delta: f64, u_max: f64) -> f64 {
        let u0 = self.u0();
        let points = 800usize;
        let grid: Vec<(f64, f64)> = (0..=points)
            .map(|i| {
                let u = u0 + (u_max - u0) * i as f64 / points as f64;
                (u, self.at_log(u).ln())
            })
            .collect();
        let mut best: f64 = 0.0;
        for &(ux, lx) in &grid {
            for &(uy, ly) in &grid {
                best = best.max(ly - lx - delta * (uy - ux).abs());
            }
        }
        best.exp()
    }

    /// Numerical self-check of Potter bounds, the de Haan increment and the
    /// divergence `L~/L -> infinity`.
    pub fn selfcheck(&self) -> SvReport {
        let potter = [0.1, 0.5]
            .iter()
            .map(|&delta| {
                let constant = self.potter_constant(delta, 40.0);
                PotterEntry {
                    delta,
                    constant,
                    finite: constant.is_finite(),
                }
            })
            .collect();
        let x = 20f64.exp();
        let increments = [0.5, 2.0, 10.0]
            .iter()
            .map(|&lambda| {
                let value = self.increment(x, lambda).unwrap_or(f64::NAN);
                IncrementEntry {
                    x,
                    lambda,
                    value,
                    error: (value - lambda.ln()).abs(),
                }
            })
            .collect();
        let divergence: Vec<(f64, f64)> = [5.0, 10.0, 20.0, 40.0, 80.0]
            .iter()
            .map(|&u: &f64| {
                let x = u.exp();
                let ratio = self.de_haan(x).unwrap_or(f64::NAN) / self.at(x);
                (x, ratio)
            })
            .collect();
        // Oscillating families do not grow monotonically, so compare the
        // later ratios against the first one.
        let first = divergence[0].1;
        let diverges = divergence[1..].iter().all(|d| d.1 > first)
            && divergence.last().map(|d| d.1 > 10.0).unwrap_or(false);
        SvReport {
            family: self.family.tag(),
            potter,
            increments,
            divergence,
            diverges,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PotterEntry {
    pub delta: f64,
    pub constant: f64,
    pub finite: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncrementEntry {
    pub x: f64,
    pub lambda: f64,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SvReport {
    pub family: &'static str,
    pub potter: Vec<PotterEntry>,
    pub increments: Vec<IncrementEntry>,
    /// `(x, L~(x) / L(x))` on a growing grid.
    pub divergence: Vec<(f64, f64)>,
    pub diverges: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LeftTail {
    None,
    /// Left magnitude survival equal to the right one raised to `1 + eta`.
    Mirrored { eta: f64 },
}

/// Law of the noise `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeavyTailLaw {
    alpha: f64,
    sv: SlowlyVarying,
    x_b: f64,
    p_right: f64,
    left: LeftTail,
    /// Lower end of the right magnitude, where the survival reaches 1.
    x_lo: f64,
}

impl HeavyTailLaw {
    pub fn new(alpha: f64, sv: SlowlyVarying, x_b: f64, p_right: f64, left: LeftTail) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("tail index must be positive, got {alpha}")));
        }
        if !(x_b > 0.0 && x_b.is_finite()) {
            return Err(Error::invalid(format!("x_b must be positive, got {x_b}")));
        }
        match left {
            LeftTail::None if p_right != 1.0 => {
                return Err(Error::invalid(format!(
                    "p_right = {p_right} requires a left tail"
                )))
            }
            LeftTail::Mirrored { eta } if !(eta >= 0.0 && eta.is_finite()) => {
                return Err(Error::invalid(format!("left tail eta must be >= 0, got {eta}")))
            }
            _ => {}
        }
        if !(0.0..=1.0).contains(&p_right) {
            return Err(Error::invalid(format!("p_right must lie in [0, 1], got {p_right}")));
        }
        let l_b = sv.at(x_b);
        let s_b = x_b.powf(-alpha) * l_b;
        if s_b > 1.0 + 1e-12 {
            return Err(Error::hypothesis(
                Assumption::RegularVariation,
                format!("x_b^-a L(x_b) = {s_b} exceeds 1; raise x_b"),
            ));
        }
        let slope = sv.log_derivative_bound(x_b);
        if slope > alpha + 1e-12 {
            return Err(Error::hypothesis(
                Assumption::RegularVariation,
                format!(
                    "survival t^-a L(t) increases above x_b = {x_b} (log-slope of L up to {slope} > a = {alpha})"
                ),
            ));
        }
        Ok(HeavyTailLaw {
            alpha,
            sv,
            x_b,
            p_right,
            left,
            x_lo: l_b.powf(1.0 / alpha).min(x_b),
        })
    }

    /// Pareto law `P(B > x) = x^-a` on `x >= 1`.
    pub fn pareto(alpha: f64) -> Result<Self> {
        Self::new(
            alpha,
            SlowlyVarying::new(SvFamily::Constant { c: 1.0 })?,
            1.0,
            1.0,
            LeftTail::None,
        )
    }

    /// One nonnegative law per catalog family, activated at a threshold where
    /// the survival formula is a valid tail.
    pub fn catalog(alpha: f64) -> Result<Vec<Self>> {
        let families = [
            SvFamily::Constant { c: 1.0 },
            SvFamily::Log,
            SvFamily::ReciprocalLog,
            SvFamily::IterLog,
            SvFamily::OscillatingHaan,
        ];
        families
            .iter()
            .map(|&family| {
                let sv = SlowlyVarying::new(family)?;
                let mut x_b = sv.threshold().max(1.0);
                while sv.log_derivative_bound(x_b) > alpha || x_b.powf(-alpha) * sv.at(x_b) > 1.0 {
                    x_b *= E;
                }
                Self::new(alpha, sv, x_b, 1.0, LeftTail::None)
            })
            .collect()
    }

    /// Same law with a left tail and right-tail weight `p_right`.
    pub fn signed(self, p_right: f64, eta: f64) -> Result<Self> {
        Self::new(
            self.alpha,
            self.sv,
            self.x_b,
            p_right,
            LeftTail::Mirrored { eta },
        )
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn slowly_varying(&self) -> &SlowlyVarying {
        &self.sv
    }

    pub fn x_b(&self) -> f64 {
        self.x_b
    }

    pub fn p_right(&self) -> f64 {
        self.p_right
    }

    pub fn q_left(&self) -> f64 {
        1.0 - self.p_right
    }

    pub fn left(&self) -> LeftTail {
        self.left
    }

    pub fn is_signed(&self) -> bool {
        !matches!(self.left, LeftTail::None)
    }

    /// Essential infimum of the right magnitude.
    pub fn lower_bound(&self) -> f64 {
        self.x_lo
    }

    fn left_power(&self) -> f64 {
        match self.left {
            LeftTail::None => 1.0,
            LeftTail::Mirrored { eta } => 1.0 + eta,
        }
    }

    /// Survival of the right magnitude.
    pub fn right_survival(&self, x: f64) -> f64 {
        if x < self.x_lo {
            1.0
        } else {
            (x.powf(-self.alpha) * self.sv.at(x.max(self.x_b))).min(1.0)
        }
    }

    /// Survival of the left magnitude.
    pub fn left_survival(&self, x: f64) -> f64 {
        self.right_survival(x).powf(self.left_power())
    }

    /// `P(B > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        if x >= 0.0 {
            self.p_right * self.right_survival(x)
        } else {
            1.0 - self.q_left() * self.left_survival(-x)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        1.0 - self.survival(x)
    }

    /// `P(|B| > t)` for `t >= 0`.
    pub fn abs_survival(&self, t: f64) -> f64 {
        let right = self.p_right * self.right_survival(t);
        match self.left {
            LeftTail::None => right,
            LeftTail::Mirrored { .. } => right + self.q_left() * self.left_survival(t),
        }
    }

    /// Global slowly varying part `L(t) = t^a P(B > t)`.
    pub fn l(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            t.powf(self.alpha) * self.survival(t)
        }
    }

    /// `t^a P(|B| > t)`.
    pub fn abs_l(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            t.powf(self.alpha) * self.abs_survival(t)
        }
    }

    /// `int_0^x t^(beta-1) P(|B'| > t) dt` for the right magnitude `B'`.
    fn right_power_integral(&self, beta: f64, x: f64) -> Result<f64> {
        let a = self.alpha;
        let lo = self.x_lo;
        let m = x.min(lo);
        let mut total = m.powf(beta) / beta;
        if x > lo {
            let b = x.min(self.x_b);
            let d = beta - a;
            let log_ratio = (b / lo).ln();
            let middle = if d == 0.0 {
                log_ratio
            } else {
                lo.powf(d) * (d * log_ratio).exp_m1() / d
            };
            total += self.sv.at(self.x_b) * middle;
        }
        if x > self.x_b {
            let d = beta - self.alpha;
            total += if d == 0.0 {
                self.sv.log_integral(self.x_b, x)?
            } else {
                let f = |u: f64| (d * u).exp() * self.sv.at_log(u);
                quad::integrate_with_breaks(
                    f,
                    self.x_b.ln(),
                    x.ln(),
                    &[self.sv.threshold().ln()],
                    Tolerance::default(),
                )?
                .value
            };
        }
        Ok(total)
    }

    /// `int_0^inf t^(beta-1) P(left magnitude > t) dt` for `beta < a (1 + eta)`.
    fn left_power_integral(&self, beta: f64, x: Option<f64>) -> Result<f64> {
        let lo = self.x_lo;
        let upper = x.unwrap_or(f64::INFINITY);
        let m = upper.min(lo);
        let mut total = m.powf(beta) / beta;
        if upper > lo {
            let f = |u: f64| (beta * u).exp() * self.left_survival(u.exp());
            let breaks = [self.x_b.ln(), self.sv.threshold().ln()];
            total += match x {
                Some(x) => {
                    quad::integrate_with_breaks(f, lo.ln(), x.ln(), &breaks, Tolerance::default())?
                        .value
                }
                None => {
                    let head_end = self.x_b.ln().max(self.sv.threshold().ln()).max(lo.ln());
                    quad::integrate_with_breaks(f, lo.ln(), head_end, &breaks, Tolerance::default())?
                        .value
                        + quad::integrate_to_infinity(f, head_end, Tolerance::default())?.value
                }
            };
        }
        Ok(total)
    }

    /// De Haan function of the global `L`: `int_0^x t^(a-1) P(B > t) dt`.
    pub fn de_haan(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::invalid(format!("de Haan function evaluated at {x}")));
        }
        Ok(self.p_right * self.right_power_integral(self.alpha, x)?)
    }

    /// De Haan function of `t^a P(|B| > t)`.
    pub fn abs_de_haan(&self, x: f64) -> Result<f64> {
        let right = self.de_haan(x)?;
        Ok(match self.left {
            LeftTail::None => right,
            LeftTail::Mirrored { eta: 0.0 } => {
                right + self.q_left() * self.right_power_integral(self.alpha, x)?
            }
            LeftTail::Mirrored { .. } => {
                right + self.q_left() * self.left_power_integral(self.alpha, Some(x))?
            }
        })
    }

    /// `E B_+^beta 1{B <= x}` by tail integration.
    pub fn truncated_moment(&self, beta: f64, x: f64) -> Result<f64> {
        if !(beta > 0.0) {
            return Err(Error::invalid(format!("moment order must be positive, got {beta}")));
        }
        if x <= 0.0 {
            return Ok(0.0);
        }
        let integral = self.p_right * self.right_power_integral(beta, x)?;
        Ok((beta * integral - x.powf(beta) * self.survival(x)).max(0.0))
    }

    /// `E B_+^beta 1{B <= x} / (x^r L(x))` at `beta = a + r`; tends to `a / r`.
    pub fn upper_moment_ratio(&self, r: f64, x: f64) -> Result<f64> {
        Ok(self.truncated_moment(self.alpha + r, x)? / (x.powf(r) * self.l(x)))
    }

    /// `E B_+^beta`, finite for `beta < a`.
    pub fn positive_moment(&self, beta: f64) -> Result<f64> {
        if beta <= 0.0 {
            return Ok(if beta == 0.0 { self.p_right } else { f64::NAN });
        }
        if beta >= self.alpha {
            return Ok(f64::INFINITY);
        }
        let head_end = self.x_b.max(self.sv.threshold());
        let mut total = self.right_power_integral(beta, head_end)?;
        let d = beta - self.alpha;
        let f = |u: f64| (d * u).exp() * self.sv.at_log(u);
        total += quad::integrate_to_infinity(f, head_end.ln(), Tolerance::default())?.value;
        Ok(self.p_right * beta * total)
    }

    /// `E B_-^beta`.
    pub fn negative_moment(&self, beta: f64) -> Result<f64> {
        match self.left {
            LeftTail::None => Ok(0.0),
            LeftTail::Mirrored { eta } => {
                if beta >= self.alpha * (1.0 + eta) {
                    return Ok(f64::INFINITY);
                }
                Ok(self.q_left() * beta * self.left_power_integral(beta, None)?)
            }
        }
    }

    /// `E |B|^beta`.
    pub fn abs_moment(&self, beta: f64) -> Result<f64> {
        Ok(self.positive_moment(beta)? + self.negative_moment(beta)?)
    }

    /// Right magnitude at survival level `s` in `(0, 1]`.
    fn right_magnitude(&self, s: f64) -> f64 {
        if s >= 1.0 {
            return self.x_lo;
        }
        let l_b = self.sv.at(self.x_b);
        let s_b = self.x_b.powf(-self.alpha) * l_b;
        if s >= s_b || matches!(self.sv.family(), SvFamily::Constant { .. }) {
            return (l_b / s).powf(1.0 / self.alpha);
        }
        // Solve -a u + log L(e^u) = log s on u >= log x_b; the left side is
        // nonincreasing by construction.
        let target = s.ln();
        let h = |u: f64| -self.alpha * u + self.sv.at_log(u).ln() - target;
        let lo0 = self.x_b.ln();
        let mut lo = lo0;
        let mut hi = lo0 + (-target / self.alpha).max(1.0);
        while h(hi) > 0.0 {
            lo = hi;
            hi = lo0 + 2.0 * (hi - lo0);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if h(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi.exp()
    }

    fn left_magnitude(&self, s: f64) -> f64 {
        self.right_magnitude(s.powf(1.0 / self.left_power()))
    }

    /// Generalised inverse of the distribution function.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::invalid(format!("quantile level must lie in (0, 1), got {u}")));
        }
        let q = self.q_left();
        Ok(if u <= q {
            -self.left_magnitude(u / q)
        } else {
            self.right_magnitude((1.0 - u) / self.p_right)
        })
    }

    /// Sample from a sign uniform and a magnitude uniform in `(0, 1]`.
    pub fn sample_from_uniforms(&self, u_sign: f64, u_mag: f64) -> f64 {
        if u_sign < self.p_right {
            self.right_magnitude(u_mag)
        } else {
            -self.left_magnitude(u_mag)
        }
    }

    pub fn sample(&self, stream: &mut Stream) -> f64 {
        match self.left {
            LeftTail::None => self.right_magnitude(stream.uniform_pos()),
            LeftTail::Mirrored { .. } => {
                let u_sign = stream.uniform();
                self.sample_from_uniforms(u_sign, stream.uniform_pos())
            }
        }
    }
}
