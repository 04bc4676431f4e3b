//! Renewal functions `H(x) = sum_n P(S_n <= x)` of positive-drift walks on a
//! uniform grid, and the renewal-theoretic checks built on them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::TestFunction;
use crate::models::{CoefficientLaw, StepLaw};
use crate::regvar::{HeavyTailLaw, SlowlyVarying};
use crate::rng::{Domain, Stream};
use crate::simulate::map_chunks;

/// Walks are followed this many decay lengths past the grid end, so that
/// returns below `x_max` have probability about `e^-40`.
const RETURN_MARGIN: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub h: f64,
    pub x_min: f64,
    pub x_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            h: 1.0 / 256.0,
            x_min: -20.0,
            x_max: 60.0,
        }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.x_min <= 0.0 && self.x_max > 0.0 && self.x_max > self.x_min) {
            return Err(Error::invalid(format!("bad renewal grid {self:?}")));
        }
        Ok(())
    }

    /// Index of the last node.
    pub fn last(&self) -> usize {
        ((self.x_max - self.x_min) / self.h).round() as usize
    }

    pub fn node(&self, k: usize) -> f64 {
        self.x_min + k as f64 * self.h
    }

    /// Node index of zero (the nearest node when zero is off-grid).
    pub fn zero_index(&self) -> usize {
        (-self.x_min / self.h).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MonteCarlo { paths: u64 },
    Convolution,
    LadderFactorized { paths: u64 },
}

/// Ladder decomposition estimated from simulated walks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderSummary {
    pub segments: u64,
    /// Total mass of the pre-ladder occupation measure `V`.
    pub v_mass: f64,
    /// Mean strict ascending ladder epoch.
    pub mean_epoch: f64,
    pub mean_height: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenewalGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub method: Method,
    pub step: StepLaw,
    pub mean: f64,
    pub second_moment: f64,
    pub ladder: Option<LadderSummary>,
}

impl RenewalGrid {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn x(&self, k: usize) -> f64 {
        self.spec.node(k)
    }

    /// `H(x)` by linear interpolation; 0 left of the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let t = (x - self.spec.x_min) / self.spec.h;
        if t < 0.0 {
            return 0.0;
        }
        let k = t.floor() as usize;
        if k + 1 >= self.values.len() {
            return *self.values.last().unwrap_or(&0.0);
        }
        let w = t - k as f64;
        if w == 0.0 {
            return self.values[k];
        }
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    /// Midpoint Stieltjes sum of `f` against `dH` over `(lo, hi]`, both
    /// rounded to grid nodes.
    pub fn stieltjes<F: Fn(f64) -> f64>(&self, f: F, lo: f64, hi: f64) -> f64 {
        let spec = &self.spec;
        let k_lo = (((lo - spec.x_min) / spec.h).round().max(0.0)) as usize;
        let k_hi = (((hi - spec.x_min) / spec.h).round() as usize).min(self.values.len() - 1);
        let mut total = 0.0;
        for k in k_lo..k_hi {
            let dh = self.values[k + 1] - self.values[k];
            if dh != 0.0 {
                total += f(spec.x_min + (k as f64 + 0.5) * spec.h) * dh;
            }
        }
        total
    }

    /// Stieltjes sum over the whole grid, including the mass `H(x_min)`.
    pub fn stieltjes_all<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        f(self.spec.x_min) * self.values[0] + self.stieltjes(f, self.spec.x_min, self.spec.x_max)
    }

    /// `sup_x H(x + 1) - H(x)` over the grid.
    pub fn max_unit_increment(&self) -> f64 {
        let step = (1.0 / self.spec.h).round() as usize;
        (0..self.values.len().saturating_sub(step))
            .map(|k| self.values[k + step] - self.values[k])
            .fold(0.0, f64::max)
    }

    /// Columnar text `x,H`.
    pub fn to_columnar(&self) -> String {
        let mut out = String::from("x,H\n");
        for (k, v) in self.values.iter().enumerate() {
            out.push_str(&format!("{},{v}\n", self.x(k)));
        }
        out
    }
}

/// Builds `H` on the grid. `seed` and `workers` only matter for the
/// simulation methods.
pub fn build_renewal(step: &StepLaw, spec: GridSpec, method: Method, seed: u64, workers: usize) -> Result<RenewalGrid> {
    step.validate()?;
    spec.validate()?;
    let mean = step.mean();
    if !(mean > 0.0) {
        return Err(Error::invalid(format!("renewal function needs E Z > 0, got {mean}")));
    }
    let (values, ladder) = match method {
        Method::Convolution => (convolution(step, &spec)?, None),
        Method::MonteCarlo { paths } => (simulate_walks(step, &spec, paths, seed, workers)?.direct, None),
        Method::LadderFactorized { paths } => {
            let sim = simulate_walks(step, &spec, paths, seed, workers)?;
            let (values, summary) = sim.factorized(&spec);
            (values, Some(summary))
        }
    };
    Ok(RenewalGrid {
        spec,
        values,
        method,
        step: step.clone(),
        mean,
        second_moment: step.second_moment(),
        ladder,
    })
}

/// Direct and ladder-factorized grids from one set of simulated walks.
pub fn build_renewal_pair(
    step: &StepLaw,
    spec: GridSpec,
    paths: u64,
    seed: u64,
    workers: usize,
) -> Result<(RenewalGrid, RenewalGrid)> {
    step.validate()?;
    spec.validate()?;
    let mean = step.mean();
    if !(mean > 0.0) {
        return Err(Error::invalid(format!("renewal function needs E Z > 0, got {mean}")));
    }
    let sim = simulate_walks(step, &spec, paths, seed, workers)?;
    let (factorized, summary) = sim.factorized(&spec);
    let mk = |values, method, ladder| RenewalGrid {
        spec,
        values,
        method,
        step: step.clone(),
        mean,
        second_moment: step.second_moment(),
        ladder,
    };
    Ok((
        mk(sim.direct.clone(), Method::MonteCarlo { paths }, None),
        mk(factorized, Method::LadderFactorized { paths }, Some(summary)),
    ))
}

fn convolution(step: &StepLaw, spec: &GridSpec) -> Result<Vec<f64>> {
    if !step.is_nonnegative() {
        return Err(Error::Refused(
            "convolution method needs P(Z < 0) = 0; use a simulation method".into(),
        ));
    }
    let last = spec.last();
    let k0 = spec.zero_index();
    let mut values = vec![0.0; last + 1];
    let pos = last - k0;
    let h = spec.h;
    match step {
        StepLaw::Degenerate { value } => {
            for (k, v) in values.iter_mut().enumerate().skip(k0) {
                *v = (spec.node(k) / value).floor() + 1.0;
            }
            return Ok(values);
        }
        StepLaw::Discrete { atoms } => {
            let mut g = Vec::new();
            for &(z, w) in atoms {
                let j = z / h;
                if (j - j.round()).abs() > 1e-9 {
                    return Err(Error::Refused(format!(
                        "atom {z} is not a multiple of the grid step {h}"
                    )));
                }
                let j = j.round() as usize;
                if g.len() <= j {
                    g.resize(j + 1, 0.0);
                }
                g[j] += w;
            }
            let u = lattice_renewal(&g, pos + 1);
            values[k0..].copy_from_slice(&u);
            return Ok(values);
        }
        _ => {}
    }
    // Trapezoidal Volterra scheme for U = F + f * U (then H = 1 + U) on steps
    // h and h/2, combined by Richardson extrapolation.
    let coarse = trapezoid_renewal(step, h, pos)?;
    let fine = trapezoid_renewal(step, 0.5 * h, 2 * pos)?;
    for k in 0..=pos {
        values[k0 + k] = 1.0 + (4.0 * fine[2 * k] - coarse[k]) / 3.0;
    }
    Ok(values)
}

fn trapezoid_renewal(step: &StepLaw, h: f64, last: usize) -> Result<Vec<f64>> {
    let f: Vec<f64> = (0..=last)
        .map(|j| step.pdf(j as f64 * h).unwrap_or(0.0))
        .collect();
    if f.iter().all(|&v| v == 0.0) {
        return Err(Error::Refused("convolution method needs a density or lattice law".into()));
    }
    let mut u = vec![0.0; last + 1];
    let diag = 1.0 - 0.5 * h * f[0];
    for k in 1..=last {
        let conv: f64 = (1..k).map(|j| f[j] * u[k - j]).sum();
        u[k] = (step.cdf(k as f64 * h) + h * conv) / diag;
    }
    Ok(u)
}

/// Renewal function at lattice points for step masses `g[j]` on `j h`.
fn lattice_renewal(g: &[f64], len: usize) -> Vec<f64> {
    let g0 = g.first().copied().unwrap_or(0.0);
    let mut out = vec![0.0; len];
    for k in 0..len {
        let mut acc = 1.0;
        for (j, &w) in g.iter().enumerate().skip(1).take(k) {
            acc += w * out[k - j];
        }
        out[k] = acc / (1.0 - g0);
    }
    out
}

struct WalkTally {
    paths: u64,
    /// Visits per cell: index `j` holds `S` with `ceil((S - x_min)/h) = j`.
    visits: Vec<u64>,
    /// Pre-ladder positions: index `m` holds `y` in `(-(m+1)h, -m h]`, `y < 0`.
    v_hist: Vec<u64>,
    /// Ladder-height masses split linearly onto lattice nodes.
    heights: Vec<f64>,
    segments: u64,
    height_sum: f64,
    epoch_sum: u64,
}

impl WalkTally {
    fn new(nodes: usize) -> Self {
        WalkTally {
            paths: 0,
            visits: vec![0; nodes],
            v_hist: Vec::new(),
            heights: Vec::new(),
            segments: 0,
            height_sum: 0.0,
            epoch_sum: 0,
        }
    }

    fn merge(&mut self, other: &WalkTally) {
        self.paths += other.paths;
        for (a, b) in self.visits.iter_mut().zip(&other.visits) {
            *a += b;
        }
        if self.v_hist.len() < other.v_hist.len() {
            self.v_hist.resize(other.v_hist.len(), 0);
        }
        for (a, b) in self.v_hist.iter_mut().zip(&other.v_hist) {
            *a += b;
        }
        if self.heights.len() < other.heights.len() {
            self.heights.resize(other.heights.len(), 0.0);
        }
        for (a, b) in self.heights.iter_mut().zip(&other.heights) {
            *a += b;
        }
        self.segments += other.segments;
        self.height_sum += other.height_sum;
        self.epoch_sum += other.epoch_sum;
    }
}

struct WalkEstimate {
    direct: Vec<f64>,
    tally: WalkTally,
}

fn simulate_walks(step: &StepLaw, spec: &GridSpec, paths: u64, seed: u64, workers: usize) -> Result<WalkEstimate> {
    if paths == 0 {
        return Err(Error::invalid("simulation method needs at least one path"));
    }
    let nodes = spec.last() + 1;
    let margin = step.left_decay_rate().map_or(0.0, |theta| RETURN_MARGIN / theta);
    let stop = spec.x_max + margin;
    let (x_min, h, x_max) = (spec.x_min, spec.h, spec.x_max);
    let chunks = map_chunks(paths, workers, |index, len| {
        let mut stream = Stream::new(seed, Domain::Renewal, index);
        let mut t = WalkTally::new(nodes);
        for _ in 0..len {
            t.paths += 1;
            let mut s = 0.0;
            let mut top = 0.0;
            let mut epoch = 0u64;
            t.visits[(((0.0 - x_min) / h).ceil().max(0.0)) as usize] += 1;
            loop {
                s += step.sample(&mut stream);
                epoch += 1;
                if s > top {
                    let height = s - top;
                    let r = height / h;
                    let j = r.floor() as usize;
                    let w = r - j as f64;
                    if t.heights.len() < j + 2 {
                        t.heights.resize(j + 2, 0.0);
                    }
                    t.heights[j] += 1.0 - w;
                    t.heights[j + 1] += w;
                    t.segments += 1;
                    t.height_sum += height;
                    t.epoch_sum += epoch;
                    epoch = 0;
                    top = s;
                } else {
                    let m = ((top - s) / h).floor() as usize;
                    if t.v_hist.len() <= m {
                        t.v_hist.resize(m + 1, 0);
                    }
                    t.v_hist[m] += 1;
                }
                if s > stop {
                    break;
                }
                if s <= x_max {
                    let j = ((s - x_min) / h).ceil().max(0.0) as usize;
                    t.visits[j.min(nodes - 1)] += 1;
                }
            }
        }
        t
    })?;
    let mut tally = WalkTally::new(nodes);
    for c in &chunks {
        tally.merge(c);
    }
    let mut direct = Vec::with_capacity(nodes);
    let mut acc = 0u64;
    for &v in &tally.visits {
        acc += v;
        direct.push(acc as f64 / tally.paths as f64);
    }
    Ok(WalkEstimate { direct, tally })
}

impl WalkEstimate {
    /// `H = V * H^>` with `H^>` from the lattice recursion on the simulated
    /// ladder-height law.
    fn factorized(&self, spec: &GridSpec) -> (Vec<f64>, LadderSummary) {
        let t = &self.tally;
        let segs = t.segments as f64;
        let g: Vec<f64> = t.heights.iter().map(|&m| m / segs).collect();
        let depth = t.v_hist.len();
        let nodes = spec.last() + 1;
        // H^> is needed on [0, x_max - x_min + depth h + h].
        let span = nodes + depth + 2;
        let h_up = lattice_renewal(&g, span);
        let h_up_at = |z: f64| -> f64 {
            if z < 0.0 {
                return 0.0;
            }
            let r = z / spec.h;
            let k = r.floor() as usize;
            if k + 1 >= h_up.len() {
                return h_up[h_up.len() - 1];
            }
            let w = r - k as f64;
            h_up[k] * (1.0 - w) + h_up[k + 1] * w
        };
        let v: Vec<f64> = t.v_hist.iter().map(|&c| c as f64 / segs).collect();
        let values = (0..nodes)
            .map(|k| {
                let x = spec.node(k);
                let mut acc = h_up_at(x);
                for (m, &w) in v.iter().enumerate() {
                    if w != 0.0 {
                        acc += w * h_up_at(x + (m as f64 + 0.5) * spec.h);
                    }
                }
                acc
            })
            .collect();
        let v_mass = 1.0 + v.iter().sum::<f64>();
        let summary = LadderSummary {
            segments: t.segments,
            v_mass,
            mean_epoch: t.epoch_sum as f64 / segs,
            mean_height: t.height_sum / segs,
        };
        (values, summary)
    }
}

/// Measured value against a target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub target: f64,
    pub measured: f64,
    pub deviation: f64,
}

impl Comparison {
    pub fn new(target: f64, measured: f64) -> Self {
        Comparison {
            target,
            measured,
            deviation: measured - target,
        }
    }

    pub fn relative(&self) -> f64 {
        self.deviation / self.target
    }
}

/// `H(x + t) - H(x)` against `t / E Z`.
pub fn blackwell_check(grid: &RenewalGrid, t: f64, x: f64) -> Result<Comparison> {
    if !(t > 0.0) || x + t > grid.spec.x_max || x < grid.spec.x_min {
        return Err(Error::invalid(format!(
            "probe [{x}, {}] outside the grid [{}, {}]",
            x + t,
            grid.spec.x_min,
            grid.spec.x_max
        )));
    }
    Ok(Comparison::new(t / grid.mean, grid.value_at(x + t) - grid.value_at(x)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoneReport {
    pub window: (f64, f64),
    /// `E Z^2 / (2 (E Z)^2)`.
    pub target: f64,
    /// Mean of `H(x) - x / E Z` over the window.
    pub constant: f64,
    pub min: f64,
    pub max: f64,
    pub relative_error: f64,
    /// Mean residual on the first half of the window minus the second half.
    pub decay: f64,
}

/// Fits the constant in `H(x) = x / E Z + c + o(1)`; default window is the
/// upper third of `[0, x_max]`.
pub fn stone_check(grid: &RenewalGrid, window: Option<(f64, f64)>) -> Result<StoneReport> {
    if grid.step.is_arithmetic() || !grid.step.strongly_non_lattice() {
        return Err(Error::Refused(
            "Stone expansion needs a strongly non-lattice step law".into(),
        ));
    }
    let (a, b) = window.unwrap_or((2.0 * grid.spec.x_max / 3.0, grid.spec.x_max));
    let residuals: Vec<f64> = (0..grid.len())
        .filter(|&k| grid.x(k) >= a && grid.x(k) <= b)
        .map(|k| grid.values[k] - grid.x(k) / grid.mean)
        .collect();
    if residuals.is_empty() {
        return Err(Error::invalid(format!("window [{a}, {b}] holds no grid nodes")));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let constant = mean(&residuals);
    let half = residuals.len() / 2;
    let target = grid.second_moment / (2.0 * grid.mean * grid.mean);
    Ok(StoneReport {
        window: (a, b),
        target,
        constant,
        min: residuals.iter().copied().fold(f64::INFINITY, f64::min),
        max: residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        relative_error: (constant - target) / target,
        decay: if half > 0 {
            mean(&residuals[..half]) - mean(&residuals[half..])
        } else {
            0.0
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryReport {
    /// `1 / (-a E log A)`.
    pub left_target: f64,
    /// `(x, e^{a x} H(-x))`.
    pub left: Vec<(f64, f64)>,
    pub holder_exponent: f64,
    /// `(h, sup (H(x + h) - H(x)) / max(h^b, h))`, skipping increments that
    /// touch the cell left of 0, over which interpolation spreads the unit atom.
    pub holder: Vec<(f64, f64)>,
}

/// Left-tail decay of `H` and its local increment bound.
pub fn boundary_checks(grid: &RenewalGrid, alpha: f64, coeff: &CoefficientLaw, holder_exponent: f64) -> BoundaryReport {
    let left_target = 1.0 / (-alpha * coeff.mean_log_abs());
    let left = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 12.0]
        .iter()
        .filter(|&&x| -x >= grid.spec.x_min)
        .map(|&x| (x, (alpha * x).exp() * grid.value_at(-x)))
        .collect();
    let holder = [1e-3, 1e-2, 1e-1]
        .iter()
        .map(|&dh: &f64| {
            let norm = dh.powf(holder_exponent).max(dh);
            let sup = (0..grid.len())
                .map(|k| grid.x(k))
                .filter(|&x| x + dh <= grid.spec.x_max && (x >= 0.0 || x + dh <= -grid.spec.h))
                .map(|x| grid.value_at(x + dh) - grid.value_at(x))
                .fold(0.0, f64::max);
            (dh, sup / norm)
        })
        .collect();
    BoundaryReport {
        left_target,
        left,
        holder_exponent,
        holder,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LthRow {
    pub x: f64,
    /// `int_(0,x] L(e^{x-z}) dH(z)`.
    pub integral: f64,
    /// Same integrand over the whole line.
    pub full_integral: f64,
    pub de_haan: f64,
    pub l: f64,
    /// `integral E Z / L~(e^x)`.
    pub ratio: f64,
    /// `(full_integral - L~(e^x) / E Z) / L(e^x)`.
    pub residual_over_l: f64,
}

/// Stieltjes integrals of `z -> L(e^{x-z})` against `dH` at each probe,
/// with `L` tapered to zero below its threshold.
pub fn lth_integral_check(grid: &RenewalGrid, sv: &SlowlyVarying, probes: &[f64]) -> Result<Vec<LthRow>> {
    probes
        .iter()
        .map(|&x| {
            if x > grid.spec.x_max || x <= 0.0 {
                return Err(Error::invalid(format!("probe {x} outside (0, {}]", grid.spec.x_max)));
            }
            let f = |z: f64| sv.tapered((x - z).exp());
            let integral = grid.stieltjes(f, 0.0, x);
            let full_integral = grid.stieltjes_all(f);
            let de_haan = sv.de_haan(x.exp())?;
            let l = sv.eval(x.exp())?;
            Ok(LthRow {
                x,
                integral,
                full_integral,
                de_haan,
                l,
                ratio: integral * grid.mean / de_haan,
                residual_over_l: (full_integral - de_haan / grid.mean) / l,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalRow {
    pub x: f64,
    /// `int e^{a(x-z)} E g(e^{z-x} B) dH(z)`.
    pub integral: f64,
    /// `a int g(r) r^{-a-1} dr`.
    pub constant: f64,
    pub de_haan: f64,
    /// `integral / (constant L~(e^x))`.
    pub ratio: f64,
}

pub fn lth_functional_check(
    grid: &RenewalGrid,
    g: &TestFunction,
    noise: &HeavyTailLaw,
    probes: &[f64],
) -> Result<Vec<FunctionalRow>> {
    g.validate()?;
    let alpha = noise.alpha();
    let constant = g.weighted_integral(alpha)?;
    probes
        .iter()
        .map(|&x| {
            if x > grid.spec.x_max || x <= 0.0 {
                return Err(Error::invalid(format!("probe {x} outside (0, {}]", grid.spec.x_max)));
            }
            let failure = std::cell::RefCell::new(None);
            let integrand = |z: f64| {
                let y = (z - x).exp();
                match g.expect_scaled(y, |t| noise.survival(t)) {
                    Ok(v) => (alpha * (x - z)).exp() * v,
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e.to_string());
                        0.0
                    }
                }
            };
            let integral = grid.stieltjes_all(integrand);
            if let Some(msg) = failure.into_inner() {
                return Err(Error::invalid(msg));
            }
            let de_haan = noise.de_haan(x.exp())?;
            Ok(FunctionalRow {
                x,
                integral,
                constant,
                de_haan,
                ratio: if constant == 0.0 { 0.0 } else { integral / (constant * de_haan) },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_unit_steps() {
        let grid = build_renewal(&StepLaw::Degenerate { value: 1.0 }, GridSpec::default(), Method::Convolution, 0, 1)
            .unwrap();
        for k in 0..grid.len() {
            let x = grid.x(k);
            let expect = if x < 0.0 { 0.0 } else { x.floor() + 1.0 };
            assert_eq!(grid.values[k], expect, "x = {x}");
        }
        let b = blackwell_check(&grid, 1.0, 17.0).unwrap();
        assert_eq!(b.measured, 1.0);
        assert_eq!(b.deviation, 0.0);
        assert!(matches!(stone_check(&grid, None), Err(Error::Refused(_))));
    }

    #[test]
    fn lattice_recursion_matches_closed_form() {
        let step = StepLaw::Discrete { atoms: vec![(1.0, 1.0)] };
        let grid = build_renewal(&step, GridSpec { h: 0.25, x_min: -1.0, x_max: 10.0 }, Method::Convolution, 0, 1)
            .unwrap();
        for k in 0..grid.len() {
            let x = grid.x(k);
            let expect = if x < 0.0 { 0.0 } else { x.floor() + 1.0 };
            assert!((grid.values[k] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_steps_are_linear() {
        let grid = build_renewal(&StepLaw::Exponential { rate: 1.0 }, GridSpec::default(), Method::Convolution, 0, 1)
            .unwrap();
        let err = (0..grid.len())
            .filter(|&k| grid.x(k) >= 0.0 && grid.x(k) <= 40.0)
            .map(|k| (grid.values[k] - 1.0 - grid.x(k)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
        let s = stone_check(&grid, Some((25.0, 40.0))).unwrap();
        assert!((s.constant - 1.0).abs() < 1e-3);
    }

    #[test]
    fn convolution_refuses_signed_steps() {
        let err = build_renewal(
            &StepLaw::Normal { mean: 0.5, sd: 1.0 },
            GridSpec::default(),
            Method::Convolution,
            0,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Refused(_)));
    }

    #[test]
    fn negative_drift_rejected() {
        let err = build_renewal(
            &StepLaw::Normal { mean: -0.5, sd: 1.0 },
            GridSpec::default(),
            Method::MonteCarlo { paths: 10 },
            0,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }
}
