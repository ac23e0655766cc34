use pielm::sampling::{bs_boundary_values, heston_values_with_mode, McEstimate};
use pielm::{HestonParams, McBoundarySpec, McModel, NoiseMode, PdeProblem, Points};

fn bs_spec(mu: f64, volatilities: Vec<f64>, n_samples: usize, seed: u64) -> McBoundarySpec {
    McBoundarySpec {
        n_samples,
        model: McModel::BlackScholes { mu, volatilities },
        seed,
    }
}

fn call(strike: f64) -> impl Fn(&[f64]) -> f64 + Sync {
    move |y: &[f64]| (y[0] - strike).max(0.0)
}

/// `E[max(x exp((μ − ε²/2) t + ε √t Z) − K, 0)]` by composite Simpson on `[−12, 12]`.
fn call_by_quadrature(x: f64, t: f64, mu: f64, eps: f64, strike: f64) -> f64 {
    let n = 40_000;
    let (a, b) = (-12.0, 12.0);
    let h = (b - a) / n as f64;
    let f = |z: f64| {
        let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        density * (x * ((mu - 0.5 * eps * eps) * t + eps * t.sqrt() * z).exp() - strike).max(0.0)
    };
    let mut sum = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + k as f64 * h);
    }
    sum * h / 3.0
}

#[test]
fn linear_payoff_matches_drifted_mean() {
    let mu = -0.05;
    let vols = vec![0.105, 0.11, 0.115];
    let points =
        Points::from_rows(4, &[[90.0, 100.0, 110.0, 0.3], [95.0, 105.0, 92.0, 1.0]]).unwrap();
    let spec = bs_spec(mu, vols, 1_000_000, 17);
    let linear = |y: &[f64]| y.iter().sum::<f64>();
    let est = bs_boundary_values(&points, &spec, &linear).unwrap();
    for k in 0..points.len() {
        let p = points.point(k);
        let exact: f64 = p[..3].iter().map(|x| x * (mu * p[3]).exp()).sum();
        let gap = (est.values[k] - exact).abs();
        assert!(
            gap <= 5.0 * est.std_errors[k],
            "point {k}: gap {gap:e}, se {:e}",
            est.std_errors[k]
        );
    }
}

#[test]
fn standard_error_halves_when_samples_quadruple() {
    let points = Points::from_rows(2, &[[100.0, 0.5], [105.0, 1.0], [95.0, 0.8]]).unwrap();
    let payoff = call(100.0);
    let se = |n: usize| -> Vec<f64> {
        bs_boundary_values(&points, &bs_spec(-0.05, vec![0.105], n, 5), &payoff)
            .unwrap()
            .std_errors
    };
    let (small, large) = (se(20_000), se(80_000));
    for (a, b) in small.iter().zip(&large) {
        let ratio = b / a;
        assert!((0.35..=0.65).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn one_dimensional_call_matches_quadrature() {
    let (mu, eps) = (-0.05, 0.105);
    let cases = [[100.0, 0.5], [105.0, 1.0], [110.0, 0.25], [98.0, 0.9]];
    let points = Points::from_rows(2, &cases).unwrap();
    let est =
        bs_boundary_values(&points, &bs_spec(mu, vec![eps], 200_000, 9), &call(100.0)).unwrap();
    for (k, c) in cases.iter().enumerate() {
        let oracle = call_by_quadrature(c[0], c[1], mu, eps, 100.0);
        let rel = (est.values[k] - oracle).abs() / oracle;
        assert!(
            rel <= 0.01,
            "case {c:?}: mc {} vs quadrature {oracle}",
            est.values[k]
        );
    }
}

#[test]
fn black_scholes_problem_boundary_is_the_estimator() {
    let problem = PdeProblem::black_scholes(1, -0.05, vec![0.105])
        .unwrap()
        .with_boundary_mc(50_000, 3);
    let points = Points::from_rows(2, &[[90.0, 0.5], [110.0, 0.7]]).unwrap();
    let values = problem.boundary_values(&points).unwrap();
    for (k, c) in [[90.0, 0.5], [110.0, 0.7]].iter().enumerate() {
        let oracle = call_by_quadrature(c[0], c[1], -0.05, 0.105, 100.0);
        assert!(
            (values[k] - oracle).abs() <= 0.02 * oracle.max(1.0),
            "{} vs {oracle}",
            values[k]
        );
    }
}

fn heston(points: &Points, n: usize, seed: u64, mode: NoiseMode) -> McEstimate {
    let spec = McBoundarySpec {
        n_samples: n,
        model: McModel::Heston(HestonParams::default()),
        seed,
    };
    let put = |y: &[f64]| (110.0 - y[0]).max(0.0);
    heston_values_with_mode(points, &spec, &put, mode).unwrap()
}

#[test]
fn heston_estimates_agree_across_seeds_and_modes() {
    let points = Points::from_rows(
        3,
        &[[100.0, 0.04, 0.5], [95.0, 0.1, 1.0], [108.0, 0.02, 0.2]],
    )
    .unwrap();
    let a = heston(&points, 100_000, 1, NoiseMode::PerPoint);
    let b = heston(&points, 100_000, 2, NoiseMode::PerPoint);
    let c = heston(&points, 100_000, 3, NoiseMode::Shared);
    for k in 0..points.len() {
        for other in [&b, &c] {
            let se = (a.std_errors[k].powi(2) + other.std_errors[k].powi(2)).sqrt();
            assert!(
                (a.values[k] - other.values[k]).abs() <= 5.0 * se,
                "point {k}"
            );
        }
    }
}

#[test]
fn heston_put_respects_intrinsic_bounds() {
    // Under the pricing drift the put value stays between zero and the strike.
    let points = Points::from_rows(3, &[[90.0, 0.2, 1.0], [110.0, 0.02, 1.0]]).unwrap();
    let est = heston(&points, 50_000, 4, NoiseMode::PerPoint);
    for v in &est.values {
        assert!(*v >= 0.0 && *v <= 110.0);
    }
    assert!(est.values[0] > est.values[1]);
}
