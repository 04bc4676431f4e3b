//! Tail estimates with binomial intervals and their comparison against the
//! first- and second-order asymptotics of the critical-heavy regime.

use serde::Serialize;

use crate::error::{Assumption, Error, Result};
use crate::functional::{sandwich, TestFunction};
use crate::models::{Kind, Noise, PerpetuityModel, Regime};
use crate::regvar::HeavyTailLaw;
use crate::simulate::SampleBatch;
use crate::stats::{slope_with_covariance, wilson_interval};

/// Levels with fewer exceedances are low-confidence and left out of bands
/// and regressions.
pub const MIN_EXCEEDANCES: u64 = 20;

/// First-order tolerance band for `ratio`.
pub const FIRST_ORDER_BAND: (f64, f64) = (0.75, 1.25);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub x: f64,
    pub n: u64,
    pub k: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub low_confidence: bool,
}

impl TailEstimate {
    pub fn new(x: f64, k: u64, n: u64) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(k, n);
        TailEstimate {
            x,
            n,
            k,
            p_hat: if n == 0 { 0.0 } else { k as f64 / n as f64 },
            ci_lo,
            ci_hi,
            low_confidence: k < MIN_EXCEEDANCES,
        }
    }

    /// Binomial standard error of `p_hat`.
    pub fn se(&self) -> f64 {
        if self.n == 0 {
            return f64::INFINITY;
        }
        (self.p_hat * (1.0 - self.p_hat) / self.n as f64).sqrt()
    }
}

/// Estimates of `P(R > x)` from exceedance counts.
pub fn tail_from_counts(x_grid: &[f64], counts: &[u64], n: u64) -> Vec<TailEstimate> {
    x_grid
        .iter()
        .zip(counts)
        .map(|(&x, &k)| TailEstimate::new(x, k, n))
        .collect()
}

/// Estimates of `P(R > x)` straight from raw samples.
pub fn tail_from_samples(samples: &[f64], x_grid: &[f64]) -> Vec<TailEstimate> {
    let counts: Vec<u64> = x_grid
        .iter()
        .map(|&x| samples.iter().filter(|&&v| v > x).count() as u64)
        .collect();
    tail_from_counts(x_grid, &counts, samples.len() as u64)
}

/// Per-level estimates of `P(R > x)`; refuses batches with too many
/// truncated paths.
pub fn empirical_tail(batch: &SampleBatch) -> Result<Vec<TailEstimate>> {
    if batch.is_biased() {
        return Err(Error::Refused(format!(
            "batch {} has {} of {} paths stopped at the depth limit",
            batch.model_id, batch.flagged, batch.n
        )));
    }
    Ok(tail_from_counts(&batch.x_grid, &batch.exceed, batch.n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    /// Extremal recursion, `A >= 0`.
    Extremal,
    /// Affine recursion, `A >= 0`.
    Affine,
    /// Affine recursion with `P(A < 0) > 0`.
    SignedAffine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticRow {
    pub x: f64,
    pub n: u64,
    pub k: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub de_haan: f64,
    pub l: f64,
    /// `norm x^a p_hat / L~(x)` with `norm` equal to `rho` or `2 rho`.
    pub ratio: f64,
    /// `x^a p_hat - L~(x) / norm`.
    pub residual: f64,
    pub residual_se: f64,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantEstimate {
    pub value: f64,
    pub se: f64,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub theorem: Theorem,
    pub alpha: f64,
    pub rho: f64,
    pub normalization: f64,
    pub rows: Vec<AsymptoticRow>,
    pub window: (f64, f64),
    pub band: (f64, f64),
    /// Slope of the residual against `log x` and its combined SE.
    pub slope: Option<(f64, f64)>,
    /// Second-order constant estimated from coupled draws.
    pub constant: Option<ConstantEstimate>,
    pub passed: bool,
    pub caveat: String,
}

impl AsymptoticReport {
    /// Rows inside the window with enough exceedances.
    pub fn checked_rows(&self) -> impl Iterator<Item = &AsymptoticRow> {
        let (lo, hi) = self.window;
        self.rows
            .iter()
            .filter(move |r| r.x >= lo && r.x <= hi && !r.low_confidence)
    }

    /// Columnar text with the fixed order `x,n,k,p_hat,ci_lo,ci_hi,ratio,residual`.
    pub fn to_columnar(&self) -> String {
        let mut out = String::from("x,n,k,p_hat,ci_lo,ci_hi,ratio,residual\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.x, r.n, r.k, r.p_hat, r.ci_lo, r.ci_hi, r.ratio, r.residual
            ));
        }
        out
    }
}

fn heavy_noise(model: &PerpetuityModel) -> Result<&HeavyTailLaw> {
    model.noise.heavy().ok_or_else(|| {
        Error::hypothesis(
            Assumption::RegularVariation,
            format!("noise of {} is not regularly varying", model.id()),
        )
    })
}

fn theorem_of(model: &PerpetuityModel) -> Theorem {
    match model.kind {
        Kind::Extremal => Theorem::Extremal,
        Kind::Affine if model.coeff.is_signed() => Theorem::SignedAffine,
        Kind::Affine => Theorem::Affine,
    }
}

fn build_report(
    model: &PerpetuityModel,
    estimates: &[TailEstimate],
    window: (f64, f64),
) -> Result<AsymptoticReport> {
    let (alpha, rho) = model.critical_heavy()?;
    let law = heavy_noise(model)?;
    let theorem = theorem_of(model);
    let normalization = if theorem == Theorem::SignedAffine { 2.0 * rho } else { rho };
    let rows = estimates
        .iter()
        .map(|e| {
            let (de_haan, l) = if theorem == Theorem::SignedAffine {
                (law.abs_de_haan(e.x)?, law.abs_l(e.x))
            } else {
                (law.de_haan(e.x)?, law.l(e.x))
            };
            let scale = e.x.powf(alpha);
            Ok(AsymptoticRow {
                x: e.x,
                n: e.n,
                k: e.k,
                p_hat: e.p_hat,
                ci_lo: e.ci_lo,
                ci_hi: e.ci_hi,
                de_haan,
                l,
                ratio: normalization * scale * e.p_hat / de_haan,
                residual: scale * e.p_hat - de_haan / normalization,
                residual_se: scale * e.se(),
                low_confidence: e.low_confidence,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AsymptoticReport {
        theorem,
        alpha,
        rho,
        normalization,
        rows,
        window,
        band: FIRST_ORDER_BAND,
        slope: None,
        constant: None,
        passed: false,
        caveat: "relative error of order L(x)/L~(x); the band is sized for L~(x) near 7-10 with L = 1".into(),
    })
}

/// Ratio of `x^a p_hat` to `L~(x)/rho` (or `L~(x)/(2 rho)` for signed `A`)
/// on the levels of `window`; passes when every checked level lies in the
/// band and at least one level is checked.
pub fn first_order_ratio(
    model: &PerpetuityModel,
    estimates: &[TailEstimate],
    window: (f64, f64),
) -> Result<AsymptoticReport> {
    let mut report = build_report(model, estimates, window)?;
    let (lo, hi) = report.band;
    let mut checked = 0;
    let mut inside = true;
    for r in report.checked_rows() {
        checked += 1;
        inside &= r.ratio >= lo && r.ratio <= hi;
    }
    report.passed = checked > 0 && inside;
    Ok(report)
}

/// Residual `d(x) = x^a p_hat - L~(x)/rho`, its regression slope against
/// `log x`, and the second-order constant from the coupled accumulator.
pub fn second_order_residual(
    model: &PerpetuityModel,
    batch: &SampleBatch,
    window: (f64, f64),
) -> Result<AsymptoticReport> {
    if !model.coeff.has_density() {
        return Err(Error::hypothesis(
            Assumption::StronglyNonLattice,
            format!("coefficient {} has no density", model.coeff.family_tag()),
        ));
    }
    if model.coeff.is_signed() {
        return Err(Error::Refused("second-order residual is defined for A >= 0".into()));
    }
    let estimates = empirical_tail(batch)?;
    let mut report = build_report(model, &estimates, window)?;
    let (alpha, rho) = (report.alpha, report.rho);
    if let Some(acc) = batch.coupled {
        let (mean, se) = acc.mean_se();
        let sign = if model.kind == Kind::Extremal { -1.0 } else { 1.0 };
        report.constant = Some(ConstantEstimate {
            value: sign * mean / (alpha * rho),
            se: se / (alpha * rho),
            n: acc.n,
        });
    }
    let rows: Vec<&AsymptoticRow> = report.checked_rows().collect();
    if rows.len() >= 3 {
        let xs: Vec<f64> = rows.iter().map(|r| r.x.ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.residual).collect();
        // Exceedance indicators at nested levels: for x_i <= x_j,
        // Cov(p_i, p_j) = (p_j - p_i p_j) / n.
        let cov: Vec<Vec<f64>> = rows
            .iter()
            .map(|a| {
                rows.iter()
                    .map(|b| {
                        let p_far = if a.x >= b.x { a.p_hat } else { b.p_hat };
                        let scale = a.x.powf(alpha) * b.x.powf(alpha);
                        scale * (p_far - a.p_hat * b.p_hat) / a.n as f64
                    })
                    .collect()
            })
            .collect();
        let (slope, se) = slope_with_covariance(&xs, &ys, &cov);
        report.slope = Some((slope, se));
        report.passed = slope.abs() <= 2.0 * se;
    }
    Ok(report)
}

/// Accumulators for the smooth sandwich around `1{r > xi}` at each level.
pub fn holder_functionals(xi: f64, eta: f64, levels: &[f64]) -> Result<Vec<(TestFunction, f64)>> {
    let (g1, g2) = sandwich(xi, eta)?;
    let ind = TestFunction::Indicator { threshold: xi };
    Ok(levels.iter().flat_map(|&x| [(g1, x), (g2, x), (ind, x)]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderRow {
    pub x: f64,
    /// `x^a E g(R/x) / L~(x)` for the upper, lower and indicator functions.
    pub upper: f64,
    pub lower: f64,
    pub indicator: f64,
    pub ordered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderReport {
    pub xi: f64,
    pub eta: f64,
    /// `(a / norm) int g r^{-a-1} dr` for the upper and lower functions.
    pub target_upper: f64,
    pub target_lower: f64,
    /// `xi^{-a} / norm`.
    pub target_indicator: f64,
    /// `2 a eta / norm`.
    pub gap: f64,
    pub rows: Vec<HolderRow>,
    pub passed: bool,
}

/// Functional limits of the sandwich pair from a batch run with
/// [`holder_functionals`] accumulators.
pub fn holder_functional_estimate(
    model: &PerpetuityModel,
    xi: f64,
    eta: f64,
    batch: &SampleBatch,
) -> Result<HolderReport> {
    let (g1, g2) = sandwich(xi, eta)?;
    let (alpha, rho) = model.critical_heavy()?;
    let law = heavy_noise(model)?;
    if batch.is_biased() {
        return Err(Error::Refused(format!("batch {} is biased by truncation", batch.model_id)));
    }
    let signed = theorem_of(model) == Theorem::SignedAffine;
    let norm = if signed { 2.0 * rho } else { rho };
    let ind = TestFunction::Indicator { threshold: xi };
    let find = |g: TestFunction, x: f64| {
        batch
            .functional_specs
            .iter()
            .position(|&(h, y)| h == g && y == x)
            .map(|i| batch.functionals[i].mean_se().0)
    };
    let mut levels: Vec<f64> = batch
        .functional_specs
        .iter()
        .filter(|(g, _)| *g == ind)
        .map(|&(_, x)| x)
        .collect();
    levels.dedup();
    let mut rows = Vec::new();
    for x in levels {
        let (Some(u), Some(l), Some(i)) = (find(g1, x), find(g2, x), find(ind, x)) else {
            continue;
        };
        let de_haan = if signed { law.abs_de_haan(x)? } else { law.de_haan(x)? };
        let scale = x.powf(alpha) / de_haan;
        rows.push(HolderRow {
            x,
            upper: scale * u,
            lower: scale * l,
            indicator: scale * i,
            ordered: l <= i && i <= u,
        });
    }
    if rows.is_empty() {
        return Err(Error::invalid(format!(
            "batch holds no sandwich accumulators for xi = {xi}, eta = {eta}"
        )));
    }
    let target_upper = g1.weighted_integral(alpha)? / norm;
    let target_lower = g2.weighted_integral(alpha)? / norm;
    let target_indicator = xi.powf(-alpha) / norm;
    let gap = 2.0 * alpha * eta / norm;
    let within_gap = (target_upper - target_indicator).abs() <= gap
        && (target_lower - target_indicator).abs() <= gap
        && target_lower <= target_indicator
        && target_indicator <= target_upper;
    let passed = within_gap && rows.iter().all(|r| r.ordered);
    Ok(HolderReport {
        xi,
        eta,
        target_upper,
        target_lower,
        target_indicator,
        gap,
        rows,
        passed,
    })
}

/// Maximum relative variation over the top decade for a plateau.
pub const PLATEAU_VARIATION: f64 = 0.25;

/// Exceedances required for a level to enter the plateau decade.
pub const PLATEAU_MIN_COUNT: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlateauReport {
    pub model_id: String,
    pub regime: Regime,
    /// What is expected to stabilize.
    pub statistic: String,
    /// `(x, k, statistic)`.
    pub rows: Vec<(f64, u64, f64)>,
    pub decade: (f64, f64),
    /// `(max - min) / mean` over the decade.
    pub variation: f64,
    pub passed: bool,
}

/// Plateau diagnostic for the regime of `model`:
/// `P(R > x)/P(B > x)` (subcritical), `x^a P(R > x)` (critical, light noise)
/// or `x^a P(R > x)/L~(x)` (critical, heavy noise).
pub fn regime_plateau(model: &PerpetuityModel, batch: &SampleBatch) -> Result<PlateauReport> {
    let estimates = empirical_tail(batch)?;
    type Statistic = Box<dyn Fn(f64, f64) -> Result<f64>>;
    let (name, stat): (&str, Statistic) = match model.regime {
        Regime::Subcritical { .. } => {
            let noise = model.noise;
            (
                "P(R > x) / P(B > x)",
                Box::new(move |x, p| Ok(p / noise.survival(x))),
            )
        }
        Regime::CriticalLight { alpha, .. } => ("x^a P(R > x)", Box::new(move |x, p| Ok(x.powf(alpha) * p))),
        Regime::CriticalHeavy { alpha, .. } => {
            let law = *heavy_noise(model)?;
            (
                "x^a P(R > x) / L~(x)",
                Box::new(move |x, p| Ok(x.powf(alpha) * p / law.de_haan(x)?)),
            )
        }
        Regime::Light => {
            return Err(Error::Refused(format!("model {} has no power-law regime", model.id())));
        }
    };
    let rows = estimates
        .iter()
        .filter(|e| e.k > 0)
        .map(|e| Ok((e.x, e.k, stat(e.x, e.p_hat)?)))
        .collect::<Result<Vec<_>>>()?;
    let top = rows
        .iter()
        .filter(|r| r.1 >= PLATEAU_MIN_COUNT)
        .map(|r| r.0)
        .fold(f64::NAN, f64::max);
    let decade = (top / 10.0, top);
    let vals: Vec<f64> = rows
        .iter()
        .filter(|r| r.1 >= PLATEAU_MIN_COUNT && r.0 >= decade.0 && r.0 <= decade.1)
        .map(|r| r.2)
        .collect();
    let (variation, passed) = if vals.len() >= 2 {
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let v = (max - min) / mean;
        (v, v < PLATEAU_VARIATION)
    } else {
        (f64::NAN, false)
    };
    Ok(PlateauReport {
        model_id: batch.model_id.clone(),
        regime: model.regime,
        statistic: name.into(),
        rows,
        decade,
        variation,
        passed,
    })
}

/// Plateau diagnostics for several models side by side.
pub fn regime_compare(runs: &[(&PerpetuityModel, &SampleBatch)]) -> Result<Vec<PlateauReport>> {
    runs.iter().map(|(m, b)| regime_plateau(m, b)).collect()
}

/// Survival `P(|B| > t)` used to normalize ladder and positive-part tails.
pub fn noise_abs_survival(noise: &Noise, t: f64) -> f64 {
    noise.abs_survival(t)
}
