//! Pipelines behind the subcommands and the files they emit.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use perptail::analysis::{
    empirical_tail, first_order_ratio, holder_functional_estimate, holder_functionals, regime_plateau,
    second_order_residual, TailEstimate,
};
use perptail::models::{AuditReport, Kind, PerpetuityModel, StepLaw};
use perptail::renewal::{blackwell_check, boundary_checks, build_renewal, stone_check, RenewalGrid};
use perptail::simulate::{run_batch, run_ladder_batch, BatchSpec, SampleBatch};
use perptail::{Assumption, Error};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::CliError;

pub const TAIL_HEADER: &str = "x,n,k,p_hat,ci_lo,ci_hi,ratio,residual";

const SAMPLE_CHECKS: [&str; 5] = ["first-order", "second-order", "holder", "plateau", "ladder"];
const RENEWAL_CHECKS: [&str; 3] = ["blackwell", "stone", "boundary"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditLine {
    pub assumption: Assumption,
    pub label: String,
    pub value: Option<f64>,
    pub passed: bool,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub tag: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub samples: u64,
    pub workers: usize,
    pub wall_time_secs: f64,
    pub audit: Vec<AuditLine>,
    pub checks: Vec<CheckResult>,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Key-value summary; sorted keys make the file reproducible.
#[derive(Default)]
struct Summary(BTreeMap<String, String>);

impl Summary {
    fn put(&mut self, key: impl Into<String>, value: impl ToString) {
        self.0.insert(key.into(), value.to_string());
    }

    fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    command: &'a str,
    started: Instant,
    audit: Vec<AuditLine>,
    checks: Vec<CheckResult>,
    files: Vec<(String, String)>,
    summary: Summary,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a ExperimentConfig, command: &'a str) -> Self {
        let mut summary = Summary::default();
        summary.put("config_hash", cfg.content_hash());
        summary.put("seed", cfg.seed);
        Run {
            cfg,
            command,
            started: Instant::now(),
            audit: Vec::new(),
            checks: Vec::new(),
            files: Vec::new(),
            summary,
        }
    }

    fn record_audit(&mut self, report: &AuditReport) {
        self.audit = report
            .entries
            .iter()
            .map(|e| AuditLine {
                assumption: e.assumption,
                label: e.label.clone(),
                value: e.value.is_finite().then_some(e.value),
                passed: e.passed,
                required: e.required,
            })
            .collect();
    }

    fn check(&mut self, tag: &str, passed: bool, detail: String) {
        self.summary.put(format!("check.{tag}"), if passed { "pass" } else { "fail" });
        self.checks.push(CheckResult {
            tag: tag.into(),
            passed,
            detail,
        });
    }

    /// A library refusal fails the check instead of aborting the run.
    fn check_result(&mut self, tag: &str, r: Result<(bool, String), Error>) -> Result<(), CliError> {
        match r {
            Ok((passed, detail)) => self.check(tag, passed, detail),
            Err(e @ Error::Refused(_)) => self.check(tag, false, e.to_string()),
            Err(e) => return Err(e.into()),
        }
        Ok(())
    }

    fn finish(mut self) -> Result<Manifest, CliError> {
        let out = &self.cfg.out;
        fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        self.files.push(("summary.txt".into(), self.summary.render()));
        for (name, text) in &self.files {
            let path = out.join(name);
            fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        }
        let mut files: Vec<String> = self.files.iter().map(|f| f.0.clone()).collect();
        files.push("config.toml".into());
        files.push("manifest.json".into());
        let path = out.join("config.toml");
        fs::write(&path, self.cfg.to_toml()).map_err(|e| CliError::io(&path, e))?;
        let manifest = Manifest {
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.into(),
            config_hash: self.cfg.content_hash(),
            seed: self.cfg.seed,
            samples: self.cfg.samples,
            workers: self.cfg.workers,
            wall_time_secs: self.started.elapsed().as_secs_f64(),
            audit: self.audit,
            checks: self.checks,
            files,
        };
        let path = out.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

fn validate_tags(cfg: &ExperimentConfig, allowed: &[&str]) -> Result<(), CliError> {
    for tag in &cfg.checks {
        if !allowed.contains(&tag.as_str()) {
            return Err(CliError::Config(format!(
                "check {tag:?} is not available here; choose from {}",
                allowed.join(", ")
            )));
        }
    }
    Ok(())
}

fn wants(cfg: &ExperimentConfig, tag: &str) -> bool {
    cfg.checks.iter().any(|t| t == tag)
}

fn require(report: &AuditReport, assumption: Assumption, check: &str) -> Result<(), CliError> {
    if let Some(e) = report.entries.iter().find(|e| e.assumption == assumption && !e.passed) {
        return Err(Error::hypothesis(assumption, format!("needed by check {check}: {}", e.detail)).into());
    }
    Ok(())
}

/// Audits the model and every hypothesis cited by the requested checks.
/// Runs before any simulation.
fn audit_model(cfg: &ExperimentConfig, model: &PerpetuityModel) -> Result<AuditReport, CliError> {
    let report = model.audit();
    report.clone().into_error()?;
    let needs_heavy = ["first-order", "second-order", "holder", "ladder"];
    if needs_heavy.iter().any(|t| wants(cfg, t)) {
        model.critical_heavy()?;
    }
    if wants(cfg, "second-order") {
        if model.kind != Kind::Extremal {
            return Err(CliError::Config(
                "check second-order tests the extremal recursion; set kind = \"extremal\"".into(),
            ));
        }
        if model.coeff.is_signed() {
            return Err(Error::hypothesis(Assumption::NonNegativeCoefficient, "needed by check second-order").into());
        }
        require(&report, Assumption::StronglyNonLattice, "second-order")?;
    }
    if wants(cfg, "holder") {
        require(&report, Assumption::HolderIncrements, "holder")?;
    }
    if wants(cfg, "ladder") && !model.coeff.is_signed() {
        return Err(Error::hypothesis(Assumption::SignedCoefficient, "needed by check ladder").into());
    }
    Ok(report)
}

pub fn calibrate(cfg: &ExperimentConfig) -> Result<Manifest, CliError> {
    let mut run = Run::new(cfg, "calibrate");
    let model = cfg.model()?;
    let report = model.audit();
    run.record_audit(&report);
    describe_model(&mut run.summary, &model);
    report.into_error()?;
    run.finish()
}

pub fn simulate(cfg: &ExperimentConfig, with_checks: bool) -> Result<Manifest, CliError> {
    let command = if with_checks { "check" } else { "simulate" };
    if with_checks {
        let all: Vec<&str> = SAMPLE_CHECKS.iter().chain(&RENEWAL_CHECKS).copied().collect();
        validate_tags(cfg, &all)?;
    }
    let mut run = Run::new(cfg, command);
    let model = cfg.model()?;
    let grid = cfg.x_grid()?;
    let renewal_step = if with_checks && RENEWAL_CHECKS.iter().any(|t| wants(cfg, t)) {
        Some(cfg.step_law()?)
    } else {
        None
    };
    let report = if with_checks { audit_model(cfg, &model)? } else { model.audit() };
    run.record_audit(&report);
    report.into_error()?;
    if let Some((step, _)) = &renewal_step {
        audit_step(cfg, step)?;
    }
    describe_model(&mut run.summary, &model);

    let mut spec = BatchSpec::with_grid(grid.clone());
    spec.trunc = cfg.trunc;
    let holder = with_checks && wants(cfg, "holder");
    if holder {
        spec.functionals = holder_functionals(cfg.holder.xi, cfg.holder.eta, &grid)?;
    }
    spec.coupled_constant = with_checks && wants(cfg, "second-order");
    let batch = run_batch(&model, cfg.samples, &spec, cfg.seed, cfg.workers)?;
    run.summary.put("samples", batch.n);
    run.summary.put("flagged", batch.flagged);
    run.summary.put("max_depth", batch.max_depth);
    run.files.push(("batch.csv".into(), batch.to_columnar()));

    let estimates = if batch.is_biased() { None } else { Some(empirical_tail(&batch)?) };
    let tail = match &estimates {
        Some(est) => tail_columnar(&model, est, cfg.window())?,
        None => format!("{TAIL_HEADER}\n"),
    };
    run.files.push(("tail.csv".into(), tail));

    if with_checks {
        sample_checks(&mut run, &model, &batch, estimates.as_deref())?;
        if let Some((step, coeff)) = renewal_step {
            renewal_checks(&mut run, &step, coeff)?;
        }
    }
    run.finish()
}

pub fn renewal(cfg: &ExperimentConfig) -> Result<Manifest, CliError> {
    validate_tags(cfg, &RENEWAL_CHECKS)?;
    let mut run = Run::new(cfg, "renewal");
    let (step, coeff) = cfg.step_law()?;
    if coeff.is_some() {
        let model = cfg.model()?;
        let report = model.audit();
        run.record_audit(&report);
        report.into_error()?;
    }
    audit_step(cfg, &step)?;
    renewal_checks(&mut run, &step, coeff)?;
    run.finish()
}

fn audit_step(cfg: &ExperimentConfig, step: &StepLaw) -> Result<(), CliError> {
    if wants(cfg, "stone") && (step.is_arithmetic() || !step.strongly_non_lattice()) {
        return Err(Error::hypothesis(Assumption::StronglyNonLattice, "needed by check stone").into());
    }
    if wants(cfg, "boundary") && cfg.renewal.step != "tilted" {
        return Err(CliError::Config("check boundary needs renewal.step = \"tilted\"".into()));
    }
    Ok(())
}

fn describe_model(summary: &mut Summary, model: &PerpetuityModel) {
    summary.put("model", model.id());
    summary.put("regime", format!("{:?}", model.regime));
    if let Ok((alpha, rho)) = model.critical_heavy() {
        summary.put("alpha", alpha);
        summary.put("rho", rho);
    }
    summary.put("mean_log_abs_a", model.coeff.mean_log_abs());
}

/// Tail estimates in the fixed column order; `ratio` and `residual` stay
/// empty outside the critical heavy-tailed regime. A run with no samples
/// gives the header alone.
pub fn tail_columnar(model: &PerpetuityModel, est: &[TailEstimate], window: (f64, f64)) -> Result<String, CliError> {
    if est.first().is_none_or(|e| e.n == 0) {
        return Ok(format!("{TAIL_HEADER}\n"));
    }
    if model.critical_heavy().is_ok() {
        return Ok(first_order_ratio(model, est, window)?.to_columnar());
    }
    let mut out = format!("{TAIL_HEADER}\n");
    for e in est {
        out.push_str(&format!("{},{},{},{},{},{},,\n", e.x, e.n, e.k, e.p_hat, e.ci_lo, e.ci_hi));
    }
    Ok(out)
}

fn sample_checks(
    run: &mut Run,
    model: &PerpetuityModel,
    batch: &SampleBatch,
    estimates: Option<&[TailEstimate]>,
) -> Result<(), CliError> {
    let cfg = run.cfg;
    let window = cfg.window();
    let Some(est) = estimates else {
        for tag in cfg.checks.iter().filter(|t| SAMPLE_CHECKS.contains(&t.as_str())) {
            run.check(tag, false, format!("batch biased: {} of {} paths truncated", batch.flagged, batch.n));
        }
        return Ok(());
    };
    if wants(cfg, "first-order") {
        let r = first_order_ratio(model, est, window)?;
        let ratios: Vec<f64> = r.checked_rows().map(|row| row.ratio).collect();
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        run.summary.put("first_order.levels", ratios.len());
        run.summary.put("first_order.ratio_min", lo);
        run.summary.put("first_order.ratio_max", hi);
        let detail = format!(
            "{} levels, ratio in [{lo:.4}, {hi:.4}] vs band [{}, {}]",
            ratios.len(),
            r.band.0,
            r.band.1
        );
        run.check("first-order", r.passed, detail);
    }
    if wants(cfg, "second-order") {
        let r = second_order_residual(model, batch, window).map(|r| {
            let (slope, se) = r.slope.unwrap_or((f64::NAN, f64::NAN));
            let c = r.constant.map_or(f64::NAN, |c| c.value);
            (r.passed, slope, se, c)
        });
        if let Ok((_, slope, se, c)) = &r {
            run.summary.put("second_order.slope", slope);
            run.summary.put("second_order.slope_se", se);
            run.summary.put("second_order.constant", c);
        }
        run.check_result(
            "second-order",
            r.map(|(p, slope, se, c)| (p, format!("residual slope {slope:.4} +- {se:.4}, constant {c:.4}"))),
        )?;
    }
    if wants(cfg, "holder") {
        let (xi, eta) = (cfg.holder.xi, cfg.holder.eta);
        let r = holder_functional_estimate(model, xi, eta, batch).map(|h| {
            (
                h.passed,
                format!(
                    "targets {:.4} <= {:.4} <= {:.4}, gap {:.4}, {} levels ordered",
                    h.target_lower,
                    h.target_indicator,
                    h.target_upper,
                    h.gap,
                    h.rows.iter().filter(|r| r.ordered).count()
                ),
            )
        });
        run.check_result("holder", r)?;
    }
    if wants(cfg, "plateau") {
        let r = regime_plateau(model, batch).map(|p| {
            (
                p.passed,
                format!("{} over [{:.4e}, {:.4e}] varies by {:.4}", p.statistic, p.decade.0, p.decade.1, p.variation),
            )
        });
        run.check_result("plateau", r)?;
    }
    if wants(cfg, "ladder") {
        let (alpha, rho) = model.critical_heavy()?;
        let lb = run_ladder_batch(
            &model.coeff,
            &model.noise,
            alpha,
            cfg.samples,
            &batch.x_grid,
            cfg.seed,
            cfg.workers,
            cfg.trunc,
        )?;
        let (m, se) = lb.pi_alpha.mean_se();
        let (ml, sel) = lb.pi_alpha_log.mean_se();
        let passed = lb.n > 0 && (m - 1.0).abs() <= 4.0 * se && (ml - 2.0 * rho).abs() <= 4.0 * sel;
        run.summary.put("ladder.pi_alpha", m);
        run.summary.put("ladder.pi_alpha_log", ml);
        run.summary.put("ladder.mean_epoch", lb.ladder_epoch.mean_se().0);
        run.check(
            "ladder",
            passed,
            format!("E Pi_N^a = {m:.4} +- {se:.4} vs 1; E Pi_N^a log Pi_N = {ml:.4} +- {sel:.4} vs {:.4}", 2.0 * rho),
        );
    }
    Ok(())
}

fn renewal_checks(
    run: &mut Run,
    step: &StepLaw,
    coeff: Option<(perptail::models::CoefficientLaw, f64)>,
) -> Result<(), CliError> {
    let cfg = run.cfg;
    let grid: RenewalGrid = build_renewal(step, cfg.renewal_spec(), cfg.renewal_method()?, cfg.seed, cfg.workers)?;
    run.summary.put("renewal.mean_step", grid.mean);
    run.files.push(("renewal.csv".into(), grid.to_columnar()));
    let tol = cfg.renewal.tolerance;
    if wants(cfg, "blackwell") {
        let b = blackwell_check(&grid, 1.0, cfg.renewal.probe)?;
        run.summary.put("blackwell.measured", b.measured);
        run.check(
            "blackwell",
            b.deviation.abs() <= tol * b.target,
            format!("H(x+1) - H(x) at {} = {:.5} vs {:.5}", cfg.renewal.probe, b.measured, b.target),
        );
    }
    if wants(cfg, "stone") {
        let r = stone_check(&grid, None).map(|s| {
            (
                s.relative_error.abs() <= tol,
                format!("constant {:.5} vs {:.5} on [{}, {}]", s.constant, s.target, s.window.0, s.window.1),
            )
        });
        run.check_result("stone", r)?;
    }
    if wants(cfg, "boundary") {
        let (coeff, alpha) = coeff.ok_or_else(|| CliError::Config("check boundary needs a tilted step".into()))?;
        let b = boundary_checks(&grid, alpha, &coeff, 1.0);
        let probes: Vec<(f64, f64)> = b.left.iter().copied().filter(|(x, _)| (2.0..=3.0).contains(x)).collect();
        let worst = probes
            .iter()
            .map(|(_, v)| ((v - b.left_target) / b.left_target).abs())
            .fold(0.0, f64::max);
        run.summary.put("boundary.target", b.left_target);
        run.check(
            "boundary",
            !probes.is_empty() && worst <= 2.5 * tol,
            format!("e^(a x) H(-x) on x in [2, 3] within {worst:.4} of {:.4}", b.left_target),
        );
    }
    Ok(())
}

/// Reads a finished run back.
pub fn load_manifest(dir: &Path) -> Result<(Manifest, String), CliError> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let manifest = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let path = dir.join("summary.txt");
    let summary = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    Ok((manifest, summary))
}
