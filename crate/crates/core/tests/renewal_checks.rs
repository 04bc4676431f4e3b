use perptail::functional::TestFunction;
use perptail::models::{make_tilted, CoefficientLaw, StepLaw};
use perptail::regvar::HeavyTailLaw;
use perptail::renewal::{
    blackwell_check, boundary_checks, build_renewal, build_renewal_pair, lth_functional_check, stone_check, GridSpec,
    Method,
};
use perptail::Error;

fn small_grid() -> GridSpec {
    GridSpec { h: 1.0 / 64.0, x_min: -12.0, x_max: 30.0 }
}

#[test]
fn monte_carlo_agrees_with_convolution_for_exponential_steps() {
    let step = StepLaw::Exponential { rate: 2.0 };
    let conv = build_renewal(&step, small_grid(), Method::Convolution, 0, 1).unwrap();
    let mc = build_renewal(&step, small_grid(), Method::MonteCarlo { paths: 100_000 }, 3, 1).unwrap();
    // H(x) = 1 + 2x exactly; the MC error of the sum of visits is O(sqrt(x) / sqrt(n)).
    for k in (0..conv.len()).filter(|&k| conv.x(k) >= 0.0) {
        let x = conv.x(k);
        assert!((conv.values[k] - 1.0 - 2.0 * x).abs() < 1e-3, "x = {x}");
        assert!((mc.values[k] - conv.values[k]).abs() < 0.05, "x = {x}: {} vs {}", mc.values[k], conv.values[k]);
    }
    let b = blackwell_check(&conv, 1.0, 20.0).unwrap();
    assert!(b.deviation.abs() < 1e-3);
    let s = stone_check(&conv, None).unwrap();
    // E Z^2 / (2 (E Z)^2) = 1 for every exponential law.
    assert!((s.target - 1.0).abs() < 1e-12);
    assert!(s.relative_error.abs() < 1e-3, "{s:?}");
}

#[test]
fn ladder_summary_obeys_wald_identity() {
    let coeff = CoefficientLaw::lognormal(-0.5, 1.0).unwrap();
    let tilted = make_tilted(&coeff, 1.0).unwrap();
    let (mc, lf) = build_renewal_pair(&tilted.step, small_grid(), 200_000, 5, 1).unwrap();
    assert!(mc.ladder.is_none());
    let ladder = lf.ladder.clone().unwrap();
    // Total pre-ladder occupation mass equals the mean ladder epoch.
    assert!((ladder.v_mass - ladder.mean_epoch).abs() < 1e-9 * ladder.mean_epoch, "{ladder:?}");
    // Wald: E(ladder height) = E N E Z.
    let wald = ladder.mean_epoch * tilted.mean();
    assert!((ladder.mean_height - wald).abs() < 0.02 * wald, "{} vs {wald}", ladder.mean_height);
    // Both estimators describe the same function.
    for x in [-5.0, -1.0, 0.0, 3.0, 10.0, 25.0] {
        let (a, b) = (mc.value_at(x), lf.value_at(x));
        assert!((a - b).abs() < 0.02 * a.max(1.0), "x = {x}: {a} vs {b}");
    }
}

#[test]
fn nonnegative_steps_have_trivial_ladders() {
    let step = StepLaw::Exponential { rate: 1.0 };
    let (_, lf) = build_renewal_pair(&step, small_grid(), 20_000, 6, 1).unwrap();
    let ladder = lf.ladder.unwrap();
    assert_eq!(ladder.mean_epoch, 1.0);
    assert_eq!(ladder.v_mass, 1.0);
    assert!((ladder.mean_height - 1.0).abs() < 0.03);
}

#[test]
fn renewal_functions_are_monotone() {
    let coeff = CoefficientLaw::lognormal(-0.5, 1.0).unwrap();
    let tilted = make_tilted(&coeff, 1.0).unwrap();
    let grids = [
        build_renewal(&tilted.step, small_grid(), Method::MonteCarlo { paths: 20_000 }, 1, 1).unwrap(),
        build_renewal(&StepLaw::Exponential { rate: 0.7 }, small_grid(), Method::Convolution, 0, 1).unwrap(),
        build_renewal(
            &StepLaw::Discrete { atoms: vec![(0.5, 0.3), (1.25, 0.7)] },
            small_grid(),
            Method::Convolution,
            0,
            1,
        )
        .unwrap(),
    ];
    for g in &grids {
        assert!(g.values.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{:?}", g.method);
        assert!(g.values.iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn discrete_atoms_must_sit_on_the_grid() {
    let step = StepLaw::Discrete { atoms: vec![(1.0, 0.5), (std::f64::consts::SQRT_2, 0.5)] };
    let err = build_renewal(&step, small_grid(), Method::Convolution, 0, 1).unwrap_err();
    assert!(matches!(err, Error::Refused(_)), "{err}");
    let signed = StepLaw::Normal { mean: 0.5, sd: 1.0 };
    let err = build_renewal(&signed, small_grid(), Method::Convolution, 0, 1).unwrap_err();
    assert!(matches!(err, Error::Refused(_)), "{err}");
}

#[test]
fn lattice_steps_refuse_the_stone_constant() {
    // Steps 1 and 2 with equal weight: H(n) solves h_n = 1 + (h_{n-1} + h_{n-2}) / 2.
    let step = StepLaw::Discrete { atoms: vec![(1.0, 0.5), (2.0, 0.5)] };
    let grid = build_renewal(&step, GridSpec { h: 0.5, x_min: -2.0, x_max: 20.0 }, Method::Convolution, 0, 1).unwrap();
    let mut u = vec![1.0, 0.5];
    for n in 2..=20 {
        u.push(0.5 * (u[n - 1] + u[n - 2]));
    }
    let mut cum = 0.0;
    for (n, un) in u.iter().enumerate() {
        cum += un;
        assert!((grid.value_at(n as f64) - cum).abs() < 1e-12, "n = {n}");
    }
    assert!(matches!(stone_check(&grid, None), Err(Error::Refused(_))));
}

#[test]
fn key_renewal_on_unit_intervals() {
    let grid = build_renewal(&StepLaw::Exponential { rate: 0.5 }, small_grid(), Method::Convolution, 0, 1).unwrap();
    // int 1_[x, x+1)(z) dH(z) -> 1 / E Z = 0.5.
    let v = grid.stieltjes(|_| 1.0, 20.0, 21.0);
    assert!((v - 0.5).abs() < 1e-3, "{v}");
    // The sup is attained across the atom of H at 0: 1 + 1 / E Z, less
    // half a cell on the grid.
    assert!((grid.max_unit_increment() - 1.5).abs() < grid.spec.h, "{}", grid.max_unit_increment());
}

#[test]
fn left_boundary_decay() {
    let coeff = CoefficientLaw::lognormal(-0.5, 1.0).unwrap();
    let tilted = make_tilted(&coeff, 1.0).unwrap();
    let grid =
        build_renewal(&tilted.step, small_grid(), Method::MonteCarlo { paths: 200_000 }, 8, 1).unwrap();
    let report = boundary_checks(&grid, 1.0, &coeff, 0.5);
    assert!((report.left_target - 2.0).abs() < 1e-12);
    // Oracle: Gaussian steps give H(-x) = sum_n Phi((-x - n/2) / sqrt n).
    // Deeper probes rest on a few thousand clustered paths and are noisy.
    for &(x, v) in report.left.iter().filter(|(x, _)| *x <= 3.0) {
        let exact = (1..20_000)
            .map(|n| {
                let n = f64::from(n);
                0.5 * libm::erfc((x + 0.5 * n) / (n.sqrt() * std::f64::consts::SQRT_2))
            })
            .sum::<f64>()
            * x.exp();
        assert!((v - exact).abs() < 0.05 * exact, "x = {x}: {v} vs {exact}");
        if x >= 2.0 {
            assert!((exact - 2.0).abs() < 5e-3);
        }
    }
    assert!(report.holder.iter().all(|&(_, r)| r.is_finite() && r < 5.0), "{:?}", report.holder);
}

#[test]
fn functional_renewal_limit() {
    let grid = build_renewal(&StepLaw::Exponential { rate: 1.0 }, GridSpec::default(), Method::Convolution, 0, 1)
        .unwrap();
    let noise = HeavyTailLaw::pareto(1.0).unwrap();
    let g = TestFunction::Ramp { lo: 1.0, hi: 2.0 };
    let rows = lth_functional_check(&grid, &g, &noise, &[10.0, 20.0, 40.0]).unwrap();
    for r in &rows {
        assert!((r.constant - 2f64.ln()).abs() < 1e-10);
    }
    // The ratio tends to 1 with a correction of exact order 1 / L~.
    let scaled: Vec<f64> = rows.iter().map(|r| (r.ratio - 1.0) * r.de_haan).collect();
    assert!(rows.last().unwrap().ratio - 1.0 < 0.04, "{rows:?}");
    assert!(scaled.iter().all(|c| (c / scaled[2] - 1.0).abs() < 0.05), "{scaled:?}");
    let zero = lth_functional_check(&grid, &TestFunction::Zero, &noise, &[10.0]).unwrap();
    assert_eq!(zero[0].integral, 0.0);
}
