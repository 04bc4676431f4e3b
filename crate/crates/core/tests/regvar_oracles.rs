use perptail::quad::{self, Tolerance};
use perptail::regvar::{HeavyTailLaw, LeftTail, SlowlyVarying, SvFamily};
use perptail::rng::{Domain, Stream};
use perptail::stats::ks_test;

const FAMILIES: [SvFamily; 5] = [
    SvFamily::Constant { c: 2.0 },
    SvFamily::Log,
    SvFamily::ReciprocalLog,
    SvFamily::IterLog,
    SvFamily::OscillatingHaan,
];

/// `int t^beta dF(t)` over `(lower, x]` with a central-difference density.
fn density_moment(law: &HeavyTailLaw, beta: f64, x: f64) -> f64 {
    let density = |t: f64| {
        let d = 1e-5 * t;
        (law.survival(t - d) - law.survival(t + d)) / (2.0 * d)
    };
    let lo = law.lower_bound();
    let mut breaks = vec![law.x_b(), law.slowly_varying().threshold()];
    breaks.retain(|&b| b > lo && b < x);
    quad::integrate_with_breaks(|t| t.powf(beta) * density(t), lo, x, &breaks, Tolerance { abs: 0.0, rel: 1e-10 })
        .unwrap()
        .value
}

#[test]
fn truncated_moments_match_density_quadrature() {
    for alpha in [0.5, 1.0, 2.0] {
        for law in HeavyTailLaw::catalog(alpha).unwrap() {
            for x in [3f64.exp(), 6f64.exp()] {
                for beta in [alpha, alpha + 0.5] {
                    let lib = law.truncated_moment(beta, x).unwrap();
                    let oracle = density_moment(&law, beta, x);
                    let err = ((lib - oracle) / oracle).abs();
                    assert!(
                        err < 1e-8,
                        "{} a={alpha} beta={beta} x={x}: {lib} vs {oracle}",
                        law.slowly_varying().family().tag()
                    );
                }
            }
        }
    }
}

#[test]
fn de_haan_matches_log_variable_quadrature() {
    for family in FAMILIES {
        let sv = SlowlyVarying::new(family).unwrap();
        let u0 = sv.threshold().ln();
        for u in [3.0f64, 10.0, 25.0] {
            // Below the threshold the tapered function contributes L(x0)
            // times the fraction e^{u - u0} of the mass on (0, x0].
            let below = sv.eval(sv.threshold()).unwrap() * (u.min(u0) - u0).exp();
            let above = if u > u0 {
                quad::integrate(|s| sv.eval(s.exp()).unwrap(), u0, u, Tolerance::default())
                    .unwrap()
                    .value
            } else {
                0.0
            };
            let lib = sv.de_haan(u.exp()).unwrap();
            assert!(
                ((lib - below - above) / lib).abs() < 1e-9,
                "{}: u={u} {lib} vs {}",
                family.tag(),
                below + above
            );
        }
    }
}

#[test]
fn slow_variation_at_large_arguments() {
    for family in FAMILIES {
        let sv = SlowlyVarying::new(family).unwrap();
        let x = 40f64.exp();
        for lambda in [0.5, 2.0, 10.0] {
            let r = sv.eval(lambda * x).unwrap() / sv.eval(x).unwrap();
            assert!((r - 1.0).abs() < 0.1, "{}: L({lambda}x)/L(x) = {r}", family.tag());
        }
        let report = sv.selfcheck();
        assert!(report.diverges, "{}: {:?}", family.tag(), report.divergence);
        assert!(report.potter.iter().all(|p| p.finite && p.constant >= 1.0));
    }
}

#[test]
fn upper_moment_ratio_tends_to_alpha_over_r() {
    // Pareto(1), r = 1: E B^2 1{B <= x} / x = 1 - 1/x.
    let law = HeavyTailLaw::pareto(1.0).unwrap();
    let x = 1e6;
    assert!((law.upper_moment_ratio(1.0, x).unwrap() - (1.0 - 1.0 / x)).abs() < 1e-9);
    // The approach is O(1 / (r log x)); the oscillating family has local
    // index of order (log x)^(-1/3) and is far slower.
    for law in HeavyTailLaw::catalog(1.5).unwrap() {
        if law.slowly_varying().family() == SvFamily::OscillatingHaan {
            continue;
        }
        let v = law.upper_moment_ratio(1.0, 100f64.exp()).unwrap();
        assert!((v - 1.5).abs() / 1.5 < 0.05, "{}: {v}", law.slowly_varying().family().tag());
    }
}

#[test]
fn samplers_pass_kolmogorov_smirnov() {
    for law in HeavyTailLaw::catalog(1.0).unwrap() {
        let mut stream = Stream::new(17, Domain::Auxiliary, 0);
        let samples: Vec<f64> = (0..1_000_000).map(|_| law.sample(&mut stream)).collect();
        let (d, p) = ks_test(&samples, |x| law.cdf(x));
        assert!(p > 1e-3, "{}: D = {d}, p = {p}", law.slowly_varying().family().tag());
    }
}

#[test]
fn signed_law_tails() {
    let law = HeavyTailLaw::catalog(1.0).unwrap()[1].signed(0.7, 0.5).unwrap();
    assert_eq!(law.left(), LeftTail::Mirrored { eta: 0.5 });
    let mut stream = Stream::new(3, Domain::Auxiliary, 0);
    let n = 400_000;
    let samples: Vec<f64> = (0..n).map(|_| law.sample(&mut stream)).collect();
    let (d, p) = ks_test(&samples, |x| law.cdf(x));
    assert!(p > 1e-3, "D = {d}, p = {p}");
    let neg = samples.iter().filter(|&&v| v < 0.0).count() as f64 / n as f64;
    assert!((neg - 0.3).abs() < 4.0 * (0.21f64 / n as f64).sqrt());
    // Left survival is the right one raised to 1 + eta.
    let t = 50.0;
    assert!((law.left_survival(t) - law.right_survival(t).powf(1.5)).abs() < 1e-15);
    assert!((law.abs_survival(t) - 0.7 * law.right_survival(t) - 0.3 * law.left_survival(t)).abs() < 1e-15);
    // With eta = 0 the modulus has the unsigned tail.
    let sym = HeavyTailLaw::pareto(1.0).unwrap().signed(0.5, 0.0).unwrap();
    let x = 1e4;
    assert!((sym.abs_de_haan(x).unwrap() - HeavyTailLaw::pareto(1.0).unwrap().de_haan(x).unwrap()).abs() < 1e-9);
}

#[test]
fn quantile_inverts_survival() {
    for law in HeavyTailLaw::catalog(0.8).unwrap() {
        for u in [0.01, 0.3, 0.9, 0.999, 1.0 - 1e-9] {
            let q = law.quantile(u).unwrap();
            let s = law.survival(q);
            assert!(((1.0 - u) - s).abs() <= 1e-9 * (1.0 - u), "{}: u={u}", law.slowly_varying().family().tag());
        }
    }
}

#[test]
fn positive_moments_below_the_index() {
    // Pareto(2): E B = 2 and E B^(1/2) = 4/3.
    let law = HeavyTailLaw::pareto(2.0).unwrap();
    assert!((law.positive_moment(1.0).unwrap() - 2.0).abs() < 1e-9);
    assert!((law.positive_moment(0.5).unwrap() - 4.0 / 3.0).abs() < 1e-9);
    assert!(law.positive_moment(2.0).unwrap().is_infinite());
    // Log law at a = 1 (x_b = e, lower end 1): E B^(1/2) = 2 + 2 e^(-1/2).
    let log_law = &HeavyTailLaw::catalog(1.0).unwrap()[1];
    assert!((log_law.positive_moment(0.5).unwrap() - 2.0 - 2.0 * (-0.5f64).exp()).abs() < 1e-12);
    for law in HeavyTailLaw::catalog(1.0).unwrap() {
        let lib = law.positive_moment(0.5).unwrap();
        let tol = Tolerance { abs: 1e-13, rel: 1e-11 };
        let x_b = law.x_b();
        let head = quad::integrate_with_breaks(
            |t| t.powf(-0.5) * law.survival(t),
            0.0,
            x_b,
            &[law.lower_bound()],
            tol,
        )
        .unwrap()
        .value;
        let tail = quad::integrate_to_infinity(
            |u| if u > 600.0 { 0.0 } else { (-0.5 * u).exp() * law.l(u.exp()) },
            x_b.ln(),
            tol,
        )
            .unwrap()
            .value;
        let oracle = 0.5 * (head + tail);
        assert!(((lib - oracle) / oracle).abs() < 1e-9, "{}: {lib} vs {oracle}", law.slowly_varying().family().tag());
    }
}
