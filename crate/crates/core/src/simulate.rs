//! Samplers for the stationary solutions and deterministic parallel batches.
//!
//! Replica `j` of a batch lives in chunk `j / CHUNK` and every chunk owns the
//! stream `Stream::new(seed, domain, chunk)`. Chunks are reduced in index
//! order, so accumulators are bit-identical for any number of workers.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Assumption, Error, Result};
use crate::functional::TestFunction;
use crate::models::{CoefficientLaw, Kind, Noise, PerpetuityModel};
use crate::rng::{Domain, Stream};

/// Replicas per stream.
pub const CHUNK: u64 = 16_384;

/// Fraction of flagged samples above which a batch counts as biased.
pub const BIAS_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct Truncation {
    /// Series stop once `|Pi_n|` drops below `eps` times the running scale.
    pub eps: f64,
    pub max_depth: usize,
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation {
            eps: 1e-12,
            max_depth: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub value: f64,
    pub depth: usize,
    /// The depth limit was hit before the truncation criterion.
    pub flagged: bool,
}

/// Backward series `sum_k Pi_{k-1} B_k`.
pub fn affine_series(coeff: &CoefficientLaw, noise: &Noise, stream: &mut Stream, trunc: Truncation) -> PathSample {
    let mut pi = 1.0;
    let mut sum = 0.0;
    let mut scale = 0.0;
    for depth in 1..=trunc.max_depth {
        let term = pi * noise.sample(stream);
        sum += term;
        scale += term.abs();
        pi *= coeff.sample(stream);
        if pi.abs() < trunc.eps * scale.max(1.0) {
            return PathSample {
                value: sum,
                depth,
                flagged: false,
            };
        }
    }
    PathSample {
        value: sum,
        depth: trunc.max_depth,
        flagged: true,
    }
}

/// `sup_n Pi_{n-1} B_n` for nonnegative coefficients.
pub fn extremal_series(coeff: &CoefficientLaw, noise: &Noise, stream: &mut Stream, trunc: Truncation) -> PathSample {
    let mut pi = 1.0;
    let mut best = f64::NEG_INFINITY;
    for depth in 1..=trunc.max_depth {
        best = best.max(pi * noise.sample(stream));
        pi *= coeff.sample(stream);
        if pi < trunc.eps * best.abs().max(1.0) {
            return PathSample {
                value: best,
                depth,
                flagged: false,
            };
        }
    }
    PathSample {
        value: best,
        depth: trunc.max_depth,
        flagged: true,
    }
}

/// Affine and extremal functionals of one shared path `(A_n, B_n)`.
pub fn coupled_series(
    coeff: &CoefficientLaw,
    noise: &Noise,
    stream: &mut Stream,
    trunc: Truncation,
) -> (PathSample, PathSample) {
    let mut pi = 1.0;
    let mut sum = 0.0;
    let mut best = f64::NEG_INFINITY;
    let mut depth = 0;
    let mut flagged = true;
    while depth < trunc.max_depth {
        depth += 1;
        let term = pi * noise.sample(stream);
        sum += term;
        best = best.max(term);
        pi *= coeff.sample(stream);
        if pi.abs() < trunc.eps * best.abs().max(1.0) {
            flagged = false;
            break;
        }
    }
    let mk = |value| PathSample { value, depth, flagged };
    (mk(sum), mk(best))
}

pub fn sample_affine(model: &PerpetuityModel, stream: &mut Stream, trunc: Truncation) -> PathSample {
    affine_series(&model.coeff, &model.noise, stream, trunc)
}

pub fn sample_extremal(model: &PerpetuityModel, stream: &mut Stream, trunc: Truncation) -> PathSample {
    extremal_series(&model.coeff, &model.noise, stream, trunc)
}

/// Perpetuity `S = sum_k (A_1)_+ ... (A_{k-1})_+ B_k`; the series ends
/// exactly at the first nonpositive coefficient.
pub fn sample_positive_part(
    coeff: &CoefficientLaw,
    noise: &Noise,
    stream: &mut Stream,
    trunc: Truncation,
) -> PathSample {
    let mut pi = 1.0;
    let mut sum = 0.0;
    let mut scale = 0.0;
    for depth in 1..=trunc.max_depth {
        let term = pi * noise.sample(stream);
        sum += term;
        scale += term.abs();
        let a = coeff.sample(stream);
        if a <= 0.0 {
            return PathSample {
                value: sum,
                depth,
                flagged: false,
            };
        }
        pi *= a;
        if pi < trunc.eps * scale.max(1.0) {
            return PathSample {
                value: sum,
                depth,
                flagged: false,
            };
        }
    }
    PathSample {
        value: sum,
        depth: trunc.max_depth,
        flagged: true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderSample {
    /// `N = inf{n : Pi_n >= 0}`.
    pub n: u64,
    pub pi_n: f64,
    /// `R_N* = B_1 + A_1 B_2 + ... + A_1 ... A_{N-1} B_N`.
    pub r_n_star: f64,
    pub flagged: bool,
}

fn require_signed(coeff: &CoefficientLaw) -> Result<()> {
    if !coeff.is_signed() {
        return Err(Error::hypothesis(
            Assumption::SignedCoefficient,
            "ladder reduction needs P(A < 0) > 0".to_string(),
        ));
    }
    Ok(())
}

/// One draw of `(N, Pi_N, R_N*)`, with `R_N* = B_1 - (A_1)_- S` and `S` the
/// positive-part series driven by `A_2, A_3, ...`.
pub fn sample_signed_ladder(
    coeff: &CoefficientLaw,
    noise: &Noise,
    stream: &mut Stream,
    trunc: Truncation,
) -> Result<LadderSample> {
    require_signed(coeff)?;
    Ok(ladder_draw(coeff, noise, stream, trunc))
}

fn ladder_draw(coeff: &CoefficientLaw, noise: &Noise, stream: &mut Stream, trunc: Truncation) -> LadderSample {
    let b1 = noise.sample(stream);
    let a1 = coeff.sample(stream);
    if a1 >= 0.0 {
        return LadderSample {
            n: 1,
            pi_n: a1,
            r_n_star: b1,
            flagged: false,
        };
    }
    let mut s = 0.0;
    let mut prod = 1.0;
    for k in 2..=trunc.max_depth.max(2) {
        s += prod * noise.sample(stream);
        let a = coeff.sample(stream);
        if a <= 0.0 {
            return LadderSample {
                n: k as u64,
                pi_n: -a1 * prod * -a,
                r_n_star: b1 + a1 * s,
                flagged: false,
            };
        }
        prod *= a;
    }
    LadderSample {
        n: trunc.max_depth as u64,
        pi_n: 0.0,
        r_n_star: b1 + a1 * s,
        flagged: true,
    }
}

/// Which random variable a batch samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Affine,
    Extremal,
    PositivePart,
}

impl Target {
    fn domain(self) -> Domain {
        match self {
            Target::Affine | Target::Extremal => Domain::Stationary,
            Target::PositivePart => Domain::PositivePart,
        }
    }
}

/// What a batch accumulates besides exceedance counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSpec {
    /// Increasing levels `x`; counts `#{R > x}` and `#{R < -x}`.
    pub x_grid: Vec<f64>,
    /// Orders `beta` of `sum |R|^beta`.
    pub moment_orders: Vec<f64>,
    /// Pairs `(g, x)` of `sum g(R / x)`.
    pub functionals: Vec<(TestFunction, f64)>,
    /// Accumulate the second-order constant with fresh `(A, B)`.
    pub coupled_constant: bool,
    pub keep_samples: bool,
    pub trunc: Truncation,
}

impl BatchSpec {
    pub fn with_grid(x_grid: Vec<f64>) -> Self {
        BatchSpec {
            x_grid,
            moment_orders: Vec::new(),
            functionals: Vec::new(),
            coupled_constant: false,
            keep_samples: false,
            trunc: Truncation::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.x_grid.windows(2).any(|w| !(w[0] < w[1])) || self.x_grid.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("x grid must be finite and strictly increasing"));
        }
        if !(self.trunc.eps > 0.0 && self.trunc.max_depth > 0) {
            return Err(Error::invalid(format!("bad truncation {:?}", self.trunc)));
        }
        for (g, x) in &self.functionals {
            g.validate()?;
            if !(*x > 0.0) {
                return Err(Error::invalid(format!("functional scale must be positive, got {x}")));
            }
        }
        Ok(())
    }
}

/// Running sums of a scalar.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct RunningSum {
    pub n: u64,
    pub sum: f64,
    pub sum_sq: f64,
}

impl RunningSum {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    pub fn merge(&mut self, other: &RunningSum) {
        self.n += other.n;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    /// Mean and its standard error.
    pub fn mean_se(&self) -> (f64, f64) {
        crate::stats::mean_and_se(self.sum, self.sum_sq, self.n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleBatch {
    pub model_id: String,
    pub target: Target,
    pub n: u64,
    pub seed: u64,
    pub chunk_size: u64,
    pub x_grid: Vec<f64>,
    pub exceed: Vec<u64>,
    pub below: Vec<u64>,
    pub moment_orders: Vec<f64>,
    pub moments: Vec<RunningSum>,
    pub functional_specs: Vec<(TestFunction, f64)>,
    pub functionals: Vec<RunningSum>,
    pub coupled: Option<RunningSum>,
    pub max_depth: usize,
    pub depth_sum: u64,
    pub flagged: u64,
    #[serde(skip)]
    pub samples: Option<Vec<f64>>,
}

impl SampleBatch {
    fn empty(model_id: String, target: Target, seed: u64, spec: &BatchSpec, coupled: bool) -> Self {
        SampleBatch {
            model_id,
            target,
            n: 0,
            seed,
            chunk_size: CHUNK,
            x_grid: spec.x_grid.clone(),
            exceed: vec![0; spec.x_grid.len()],
            below: vec![0; spec.x_grid.len()],
            moment_orders: spec.moment_orders.clone(),
            moments: vec![RunningSum::default(); spec.moment_orders.len()],
            functional_specs: spec.functionals.clone(),
            functionals: vec![RunningSum::default(); spec.functionals.len()],
            coupled: coupled.then(RunningSum::default),
            max_depth: 0,
            depth_sum: 0,
            flagged: 0,
            samples: spec.keep_samples.then(Vec::new),
        }
    }

    pub fn flagged_fraction(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.flagged as f64 / self.n as f64
        }
    }

    pub fn is_biased(&self) -> bool {
        self.flagged_fraction() >= BIAS_THRESHOLD
    }

    /// Pools two batches over the same grid and accumulators.
    pub fn merge(&mut self, other: &SampleBatch) -> Result<()> {
        if self.x_grid != other.x_grid
            || self.moment_orders != other.moment_orders
            || self.functional_specs != other.functional_specs
            || self.coupled.is_some() != other.coupled.is_some()
        {
            return Err(Error::invalid("cannot merge batches with different accumulators"));
        }
        self.n += other.n;
        for (a, b) in self.exceed.iter_mut().zip(&other.exceed) {
            *a += b;
        }
        for (a, b) in self.below.iter_mut().zip(&other.below) {
            *a += b;
        }
        for (a, b) in self.moments.iter_mut().zip(&other.moments) {
            a.merge(b);
        }
        for (a, b) in self.functionals.iter_mut().zip(&other.functionals) {
            a.merge(b);
        }
        if let (Some(a), Some(b)) = (self.coupled.as_mut(), other.coupled.as_ref()) {
            a.merge(b);
        }
        self.max_depth = self.max_depth.max(other.max_depth);
        self.depth_sum += other.depth_sum;
        self.flagged += other.flagged;
        match (self.samples.as_mut(), other.samples.as_ref()) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            _ => self.samples = None,
        }
        Ok(())
    }

    /// Columnar text `x,n,exceed_count`, one row per grid level.
    pub fn to_columnar(&self) -> String {
        let mut out = String::from("x,n,exceed_count\n");
        for (x, k) in self.x_grid.iter().zip(&self.exceed) {
            out.push_str(&format!("{x},{},{k}\n", self.n));
        }
        out
    }
}

/// Per-chunk tallies before cumulation over the grid.
struct ChunkTally {
    batch: SampleBatch,
    exceed_hist: Vec<u64>,
    below_hist: Vec<u64>,
}

impl ChunkTally {
    fn record(&mut self, value: f64, grid: &[f64]) {
        let j = grid.partition_point(|&x| x < value);
        self.exceed_hist[j] += 1;
        let j = grid.partition_point(|&x| x < -value);
        self.below_hist[j] += 1;
    }

    fn finish(mut self) -> SampleBatch {
        let g = self.batch.x_grid.len();
        let mut acc = 0;
        for i in (0..g).rev() {
            acc += self.exceed_hist[i + 1];
            self.batch.exceed[i] = acc;
        }
        acc = 0;
        for i in (0..g).rev() {
            acc += self.below_hist[i + 1];
            self.batch.below[i] = acc;
        }
        self.batch
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    let threads = if workers == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        workers
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start {threads} workers: {e}")))
}

/// Runs `chunk(i, len)` for every chunk on `workers` threads and returns the
/// results in chunk order.
pub(crate) fn map_chunks<T, F>(n: u64, workers: usize, chunk: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let pool = thread_pool(workers)?;
    Ok(pool.install(|| {
        (0..chunks)
            .into_par_iter()
            .map(|i| chunk(i, CHUNK.min(n - i * CHUNK)))
            .collect()
    }))
}

fn sampler_for(target: Target) -> fn(&CoefficientLaw, &Noise, &mut Stream, Truncation) -> PathSample {
    match target {
        Target::Affine => affine_series,
        Target::Extremal => extremal_series,
        Target::PositivePart => sample_positive_part,
    }
}

fn run_target(
    coeff: &CoefficientLaw,
    noise: &Noise,
    target: Target,
    model_id: String,
    coupled_alpha: Option<f64>,
    n: u64,
    spec: &BatchSpec,
    seed: u64,
    workers: usize,
) -> Result<SampleBatch> {
    spec.validate()?;
    let sampler = sampler_for(target);
    let grid = &spec.x_grid;
    let template = SampleBatch::empty(model_id, target, seed, spec, coupled_alpha.is_some());
    let chunks = map_chunks(n, workers, |index, len| {
        let mut stream = Stream::new(seed, target.domain(), index);
        let mut fresh = Stream::new(seed, Domain::Coupled, index);
        let mut tally = ChunkTally {
            batch: template.clone(),
            exceed_hist: vec![0; grid.len() + 1],
            below_hist: vec![0; grid.len() + 1],
        };
        if let Some(s) = tally.batch.samples.as_mut() {
            s.reserve(len as usize);
        }
        for _ in 0..len {
            let path = sampler(coeff, noise, &mut stream, spec.trunc);
            let r = path.value;
            let b = &mut tally.batch;
            b.n += 1;
            b.max_depth = b.max_depth.max(path.depth);
            b.depth_sum += path.depth as u64;
            b.flagged += u64::from(path.flagged);
            for (acc, &beta) in b.moments.iter_mut().zip(&spec.moment_orders) {
                acc.push(r.abs().powf(beta));
            }
            for (acc, (g, x)) in b.functionals.iter_mut().zip(&spec.functionals) {
                acc.push(g.eval(r / x));
            }
            if let (Some(acc), Some(alpha)) = (b.coupled.as_mut(), coupled_alpha) {
                let a = coeff.sample(&mut fresh);
                let bn = noise.sample(&mut fresh);
                acc.push(second_order_term(target, alpha, a * r, bn));
            }
            if let Some(s) = b.samples.as_mut() {
                s.push(r);
            }
            tally.record(r, grid);
        }
        tally.finish()
    })?;
    let mut out = template;
    for c in &chunks {
        out.merge(c)?;
    }
    Ok(out)
}

/// Summand of the second-order constant for `AR = ar` and a fresh `B = b`.
fn second_order_term(target: Target, alpha: f64, ar: f64, b: f64) -> f64 {
    let pos = |v: f64| v.max(0.0).powf(alpha);
    match target {
        Target::Extremal => pos(ar.min(b)),
        _ => pos(ar + b) - pos(ar) - pos(b),
    }
}

/// Batch of the stationary solution of `model`.
pub fn run_batch(model: &PerpetuityModel, n: u64, spec: &BatchSpec, seed: u64, workers: usize) -> Result<SampleBatch> {
    let target = match model.kind {
        Kind::Affine => Target::Affine,
        Kind::Extremal => Target::Extremal,
    };
    let coupled_alpha = if spec.coupled_constant {
        Some(model.critical_heavy()?.0)
    } else {
        None
    };
    run_target(
        &model.coeff,
        &model.noise,
        target,
        model.id(),
        coupled_alpha,
        n,
        spec,
        seed,
        workers,
    )
}

/// Batch of the positive-part perpetuity `S = A_+ S + B`.
pub fn run_positive_part_batch(
    coeff: &CoefficientLaw,
    noise: &Noise,
    alpha: f64,
    n: u64,
    spec: &BatchSpec,
    seed: u64,
    workers: usize,
) -> Result<SampleBatch> {
    let mu_plus = coeff.positive_part_moment(alpha);
    if !(mu_plus < 1.0) {
        return Err(Error::hypothesis(
            Assumption::SubcriticalPositivePart,
            format!("E A^a 1{{A > 0}} = {mu_plus}"),
        ));
    }
    let mut spec = spec.clone();
    spec.coupled_constant = false;
    run_target(
        coeff,
        noise,
        Target::PositivePart,
        format!("positive-part/{}-s{}", coeff.family_tag(), coeff.sign_flip()),
        None,
        n,
        &spec,
        seed,
        workers,
    )
}

/// Accumulated ladder draws.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderBatch {
    pub n: u64,
    pub seed: u64,
    pub alpha: f64,
    /// `Pi_N^a`.
    pub pi_alpha: RunningSum,
    /// `Pi_N^a log Pi_N`.
    pub pi_alpha_log: RunningSum,
    pub ladder_epoch: RunningSum,
    pub max_epoch: u64,
    pub x_grid: Vec<f64>,
    /// `#{R_N* > x}`.
    pub exceed: Vec<u64>,
    /// `#{R_N* < -x}`.
    pub below: Vec<u64>,
    pub flagged: u64,
}

impl LadderBatch {
    fn empty(seed: u64, alpha: f64, grid: &[f64]) -> Self {
        LadderBatch {
            n: 0,
            seed,
            alpha,
            pi_alpha: RunningSum::default(),
            pi_alpha_log: RunningSum::default(),
            ladder_epoch: RunningSum::default(),
            max_epoch: 0,
            x_grid: grid.to_vec(),
            exceed: vec![0; grid.len()],
            below: vec![0; grid.len()],
            flagged: 0,
        }
    }

    fn merge(&mut self, other: &LadderBatch) {
        self.n += other.n;
        self.pi_alpha.merge(&other.pi_alpha);
        self.pi_alpha_log.merge(&other.pi_alpha_log);
        self.ladder_epoch.merge(&other.ladder_epoch);
        self.max_epoch = self.max_epoch.max(other.max_epoch);
        for (a, b) in self.exceed.iter_mut().zip(&other.exceed) {
            *a += b;
        }
        for (a, b) in self.below.iter_mut().zip(&other.below) {
            *a += b;
        }
        self.flagged += other.flagged;
    }
}

pub fn run_ladder_batch(
    coeff: &CoefficientLaw,
    noise: &Noise,
    alpha: f64,
    n: u64,
    x_grid: &[f64],
    seed: u64,
    workers: usize,
    trunc: Truncation,
) -> Result<LadderBatch> {
    require_signed(coeff)?;
    BatchSpec::with_grid(x_grid.to_vec()).validate()?;
    let chunks = map_chunks(n, workers, |index, len| {
        let mut stream = Stream::new(seed, Domain::Ladder, index);
        let mut out = LadderBatch::empty(seed, alpha, x_grid);
        for _ in 0..len {
            let s = ladder_draw(coeff, noise, &mut stream, trunc);
            out.n += 1;
            out.flagged += u64::from(s.flagged);
            out.ladder_epoch.push(s.n as f64);
            out.max_epoch = out.max_epoch.max(s.n);
            let pa = s.pi_n.powf(alpha);
            out.pi_alpha.push(pa);
            out.pi_alpha_log.push(if s.pi_n > 0.0 { pa * s.pi_n.ln() } else { 0.0 });
            for (i, &x) in x_grid.iter().enumerate() {
                out.exceed[i] += u64::from(s.r_n_star > x);
                out.below[i] += u64::from(s.r_n_star < -x);
            }
        }
        out
    })?;
    let mut out = LadderBatch::empty(seed, alpha, x_grid);
    for c in &chunks {
        out.merge(c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regvar::HeavyTailLaw;

    fn pareto() -> Noise {
        Noise::RegularlyVarying(HeavyTailLaw::pareto(1.0).unwrap())
    }

    #[test]
    fn zero_coefficient_returns_first_noise() {
        let coeff = CoefficientLaw::degenerate(0.0).unwrap();
        let noise = pareto();
        let mut s1 = Stream::new(3, Domain::Auxiliary, 0);
        let mut s2 = s1.clone();
        let r = affine_series(&coeff, &noise, &mut s1, Truncation::default());
        assert_eq!(r.value, noise.sample(&mut s2));
        assert_eq!(r.depth, 1);
        let mut s1 = Stream::new(3, Domain::Auxiliary, 1);
        let mut s2 = s1.clone();
        let r = extremal_series(&coeff, &noise, &mut s1, Truncation::default());
        assert_eq!(r.value, noise.sample(&mut s2));
    }

    #[test]
    fn zero_noise_gives_zero() {
        let coeff = CoefficientLaw::lognormal(-0.5, 1.0).unwrap();
        let mut s = Stream::new(1, Domain::Auxiliary, 0);
        let r = affine_series(&coeff, &Noise::Degenerate { value: 0.0 }, &mut s, Truncation::default());
        assert_eq!(r.value, 0.0);
        assert!(!r.flagged);
    }

    #[test]
    fn halving_coefficient_extremal_is_one() {
        let coeff = CoefficientLaw::degenerate(0.5).unwrap();
        let mut s = Stream::new(1, Domain::Auxiliary, 0);
        let r = extremal_series(&coeff, &Noise::Degenerate { value: 1.0 }, &mut s, Truncation::default());
        assert_eq!(r.value, 1.0);
        let r = affine_series(&coeff, &Noise::Degenerate { value: 1.0 }, &mut s, Truncation::default());
        assert!((r.value - 2.0).abs() < 1e-11);
    }

    #[test]
    fn depth_limit_flags() {
        let coeff = CoefficientLaw::degenerate(0.999).unwrap();
        let mut s = Stream::new(1, Domain::Auxiliary, 0);
        let trunc = Truncation { eps: 1e-12, max_depth: 10 };
        let r = affine_series(&coeff, &Noise::Degenerate { value: 1.0 }, &mut s, trunc);
        assert!(r.flagged);
        assert_eq!(r.depth, 10);
    }

    #[test]
    fn nonpositive_coefficients_give_epoch_two() {
        let coeff = CoefficientLaw::lognormal(-0.5, 1.0).unwrap().with_sign_flip(1.0).unwrap();
        let mut s = Stream::new(5, Domain::Auxiliary, 0);
        for _ in 0..100 {
            let mut replay = s.clone();
            let l = sample_signed_ladder(&coeff, &pareto(), &mut s, Truncation::default()).unwrap();
            assert_eq!(l.n, 2);
            let noise = pareto();
            let b1 = noise.sample(&mut replay);
            let a1 = coeff.sample(&mut replay);
            let b2 = noise.sample(&mut replay);
            let a2 = coeff.sample(&mut replay);
            assert_eq!(l.pi_n, a1 * a2);
            assert_eq!(l.r_n_star, b1 + a1 * b2);
        }
    }

    #[test]
    fn unsigned_coefficient_rejected_by_ladder() {
        let coeff = CoefficientLaw::lognormal(-0.5, 1.0).unwrap();
        let mut s = Stream::new(5, Domain::Auxiliary, 0);
        assert!(sample_signed_ladder(&coeff, &pareto(), &mut s, Truncation::default()).is_err());
    }

    #[test]
    fn all_negative_positive_part_is_noise() {
        let coeff = CoefficientLaw::lognormal(-0.5, 1.0).unwrap().with_sign_flip(1.0).unwrap();
        let mut s1 = Stream::new(9, Domain::Auxiliary, 0);
        let mut s2 = s1.clone();
        let r = sample_positive_part(&coeff, &pareto(), &mut s1, Truncation::default());
        assert_eq!(r.value, pareto().sample(&mut s2));
    }

    #[test]
    fn empty_batch() {
        let coeff = CoefficientLaw::lognormal(-0.5, 1.0).unwrap();
        let model = PerpetuityModel::new(coeff, pareto(), Kind::Affine).unwrap();
        let spec = BatchSpec::with_grid(vec![1.0, 10.0]);
        let b = run_batch(&model, 0, &spec, 1, 1).unwrap();
        assert_eq!(b.n, 0);
        assert_eq!(b.exceed, vec![0, 0]);
        assert!(!b.is_biased());
        assert_eq!(b.to_columnar(), "x,n,exceed_count\n1,0,0\n10,0,0\n");
    }

    #[test]
    fn exceedance_counts_match_samples() {
        let coeff = CoefficientLaw::lognormal(-0.5, 1.0).unwrap().with_sign_flip(0.3).unwrap();
        let noise = Noise::RegularlyVarying(HeavyTailLaw::pareto(1.0).unwrap().signed(0.6, 0.2).unwrap());
        let model = PerpetuityModel::new(coeff, noise, Kind::Affine).unwrap();
        let mut spec = BatchSpec::with_grid(vec![0.5, 1.0, 4.0, 30.0]);
        spec.keep_samples = true;
        let b = run_batch(&model, 40_000, &spec, 11, 2).unwrap();
        let samples = b.samples.as_ref().unwrap();
        for (i, &x) in spec.x_grid.iter().enumerate() {
            assert_eq!(b.exceed[i], samples.iter().filter(|&&v| v > x).count() as u64);
            assert_eq!(b.below[i], samples.iter().filter(|&&v| v < -x).count() as u64);
        }
    }
}
