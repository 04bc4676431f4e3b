use perptail::models::{
    assumption_audit, calibrate_coeff, make_tilted, rho, solve_alpha, CalibrationFamily, CoefficientLaw, Kind,
    Noise, PerpetuityModel, Regime, StepLaw,
};
use perptail::regvar::HeavyTailLaw;
use perptail::rng::{Domain, Stream};
use perptail::stats::{ks_test, mean_and_se};
use perptail::{Assumption, Error};

fn sample_mean<F: Fn(f64) -> f64>(coeff: &CoefficientLaw, n: usize, seed: u64, f: F) -> (f64, f64) {
    let mut s = Stream::new(seed, Domain::Auxiliary, 0);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        let v = f(coeff.sample(&mut s));
        sum += v;
        sum_sq += v * v;
    }
    mean_and_se(sum, sum_sq, n as u64)
}

#[test]
fn calibrated_moments_by_sampling() {
    let laws = [
        calibrate_coeff(CalibrationFamily::LogNormal { sigma: 0.7 }, 1.5, 0.0).unwrap(),
        calibrate_coeff(CalibrationFamily::TwoPoint { a1: 2.5, a2: 0.4 }, 0.8, 0.0).unwrap(),
        calibrate_coeff(CalibrationFamily::LogNormal { sigma: 0.5 }, 1.0, 0.3).unwrap(),
    ];
    let alphas = [1.5, 0.8, 1.0];
    for (law, alpha) in laws.iter().zip(alphas) {
        let (m, se) = sample_mean(law, 1_000_000, 1, |a| a.abs().powf(alpha));
        assert!((m - 1.0).abs() < 5.0 * se, "{law:?}: {m} +- {se}");
        let r = rho(law, alpha).unwrap();
        let (m, se) = sample_mean(law, 1_000_000, 2, |a| a.abs().powf(alpha) * a.abs().ln());
        assert!((m - r).abs() < 5.0 * se, "{law:?}: {m} +- {se} vs {r}");
        assert!((solve_alpha(law).unwrap() - alpha).abs() < 1e-10);
    }
}

#[test]
fn two_point_calibration_closed_form() {
    for alpha in [0.5, 1.0, 2.0, 3.7] {
        let law = calibrate_coeff(CalibrationFamily::TwoPoint { a1: 1.7, a2: 0.3 }, alpha, 0.0).unwrap();
        let p = (1.0 - 0.3f64.powf(alpha)) / (1.7f64.powf(alpha) - 0.3f64.powf(alpha));
        let direct = p * 1.7f64.powf(alpha) + (1.0 - p) * 0.3f64.powf(alpha);
        assert!((direct - 1.0).abs() < 1e-14);
        assert!((law.abs_moment(alpha) - 1.0).abs() < 1e-13);
        let r = p * 1.7f64.powf(alpha) * 1.7f64.ln() + (1.0 - p) * 0.3f64.powf(alpha) * 0.3f64.ln();
        assert!((rho(&law, alpha).unwrap() - r).abs() < 1e-13);
    }
}

#[test]
fn tilted_moments_agree_with_importance_weights() {
    let law = calibrate_coeff(CalibrationFamily::LogNormal { sigma: 0.8 }, 1.3, 0.0).unwrap();
    let tilted = make_tilted(&law, 1.3).unwrap();
    let (m2, se2) = sample_mean(&law, 1_000_000, 3, |a| a.powf(1.3) * a.ln().powi(2));
    assert!((m2 - tilted.second_moment()).abs() < 5.0 * se2);
    assert!((tilted.mean() - rho(&law, 1.3).unwrap()).abs() < 1e-14);
    // Sampling the tilted normal directly.
    let mut s = Stream::new(4, Domain::StepLaw, 0);
    let z: Vec<f64> = (0..200_000).map(|_| tilted.step.sample(&mut s)).collect();
    let (d, p) = ks_test(&z, |v| tilted.step.cdf(v));
    assert!(p > 1e-3, "D = {d}");
    for eps in [0.1, 0.5, 1.0] {
        let (m, se) = sample_mean(&law, 1_000_000, 5, |a| a.powf(1.3 + eps));
        assert!((m - tilted.exp_moment(eps)).abs() < 5.0 * se);
    }
}

#[test]
fn left_decay_rate_solves_the_laplace_equation() {
    let steps = [
        StepLaw::Normal { mean: 0.5, sd: 1.0 },
        StepLaw::Discrete {
            atoms: vec![(2f64.ln(), 2.0 / 3.0), ((1.0f64 / 3.0).ln(), 1.0 / 3.0)],
        },
    ];
    for step in steps {
        let theta = step.left_decay_rate().unwrap();
        assert!((step.mgf(-theta) - 1.0).abs() < 1e-9, "{step:?}: theta = {theta}");
    }
    assert_eq!(StepLaw::Exponential { rate: 1.0 }.left_decay_rate(), None);
}

#[test]
fn sign_flip_frequency() {
    let law = CoefficientLaw::lognormal(-0.5, 1.0).unwrap().with_sign_flip(0.3).unwrap();
    let (m, se) = sample_mean(&law, 400_000, 6, |a| f64::from(u8::from(a < 0.0)));
    assert!((m - 0.3).abs() < 5.0 * se);
    // The magnitude law is untouched by the sign.
    let (m, se) = sample_mean(&law, 400_000, 7, |a| a.abs());
    assert!((m - 1.0).abs() < 5.0 * se);
    assert!((law.positive_part_moment(1.0) - 0.7).abs() < 1e-14);
}

#[test]
fn audits_name_the_failing_hypothesis() {
    let pareto = Noise::RegularlyVarying(HeavyTailLaw::pareto(1.0).unwrap());
    let good = PerpetuityModel::new(CoefficientLaw::lognormal(-0.5, 1.0).unwrap(), pareto, Kind::Extremal).unwrap();
    let audit = assumption_audit(&good);
    assert!(audit.first_required_failure().is_none(), "{audit:?}");
    assert!(audit.passed(Assumption::StronglyNonLattice));

    // log 2 and log(1/2) share a lattice.
    let lattice = PerpetuityModel::new(CoefficientLaw::two_point(2.0, 0.5, 1.0 / 3.0).unwrap(), pareto, Kind::Affine)
        .unwrap();
    let err = lattice.audit().into_error().unwrap_err();
    assert!(matches!(err, Error::Hypothesis { assumption: Assumption::NonArithmetic, .. }));
    assert!(err.to_string().contains("not satisfiable"), "{err}");

    // log 2 and log(1/3) are incommensurable: arithmetic condition holds,
    // the density-type conditions do not.
    let two = calibrate_coeff(CalibrationFamily::TwoPoint { a1: 2.0, a2: 1.0 / 3.0 }, 1.0, 0.0).unwrap();
    let model = PerpetuityModel::new(two, pareto, Kind::Extremal).unwrap();
    let audit = model.audit();
    assert!(audit.first_required_failure().is_none());
    assert!(audit.passed(Assumption::NonArithmetic));
    assert!(!audit.passed(Assumption::StronglyNonLattice));
    assert!(!audit.passed(Assumption::HolderIncrements));

    // Any sign flip leaves a subcritical positive part: (1 - s) E|A|^a < 1.
    let signed = CoefficientLaw::lognormal(-0.5, 1.0).unwrap().with_sign_flip(1e-3).unwrap();
    let m = PerpetuityModel::new(signed, pareto, Kind::Affine).unwrap();
    assert!(m.audit().passed(Assumption::SubcriticalPositivePart));
}

#[test]
fn regimes_follow_the_moment_condition() {
    let pareto = Noise::RegularlyVarying(HeavyTailLaw::pareto(1.0).unwrap());
    let sub = PerpetuityModel::new(CoefficientLaw::lognormal(0.8f64.ln() - 0.5, 1.0).unwrap(), pareto, Kind::Affine)
        .unwrap();
    match sub.regime {
        Regime::Subcritical { moment, .. } => assert!((moment - 0.8).abs() < 1e-12),
        other => panic!("{other:?}"),
    }
    let light = PerpetuityModel::new(
        CoefficientLaw::lognormal(-0.5, 1.0).unwrap(),
        Noise::Uniform { lo: 0.0, hi: 1.0 },
        Kind::Affine,
    )
    .unwrap();
    assert!(matches!(light.regime, Regime::CriticalLight { .. }));
    assert!(light.critical_heavy().is_err());
}

#[test]
fn contraction_is_enforced() {
    let err = CoefficientLaw::lognormal(0.1, 1.0).unwrap_err();
    assert!(matches!(err, Error::Hypothesis { assumption: Assumption::Contraction, .. }));
    let err = solve_alpha(&CoefficientLaw::two_point(0.9, 0.5, 0.5).unwrap()).unwrap_err();
    assert!(err.to_string().contains("E|A|^a = 1"), "{err}");
}
