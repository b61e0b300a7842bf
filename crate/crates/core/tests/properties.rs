use num_complex::Complex64;
use proptest::prelude::*;

use transduction::analytic::{dispersive_coefficients, resonant_coefficients};
use transduction::cli::output::format_number;
use transduction::cli::{Command, RunConfig};
use transduction::hilbert::{embed, partial_trace, tensor, thermal_state, DensityMatrix, HilbertLayout, Matrix, Subsystem};
use transduction::metrics::{fidelity, target_state, TargetFrame};
use transduction::BlochAngle;

fn matrix(n: usize) -> impl Strategy<Value = Matrix<f64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
        .prop_map(move |v| Matrix::from_shape_fn((n, n), |(i, j)| Complex64::new(v[i * n + j].0, v[i * n + j].1)))
}

fn density(n: usize) -> impl Strategy<Value = Matrix<f64>> {
    matrix(n).prop_map(|a| {
        let rho = a.dot(&a.t().mapv(|z| z.conj()));
        let tr: Complex64 = rho.diag().sum();
        rho.mapv(|z| z / tr.re)
    })
}

fn bloch() -> impl Strategy<Value = BlochAngle<f64>> {
    (0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU).prop_map(|(t, p)| BlochAngle::new(t, p))
}

fn close(a: &Matrix<f64>, b: &Matrix<f64>, eps: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).norm() <= eps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tensor_mixed_product(a in matrix(2), b in matrix(3), c in matrix(2), d in matrix(3)) {
        let lhs = tensor(&a, &b).unwrap().dot(&tensor(&c, &d).unwrap());
        let rhs = tensor(&a.dot(&c), &b.dot(&d)).unwrap();
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn tensor_is_associative(a in matrix(2), b in matrix(2), c in matrix(3)) {
        let left = tensor(&tensor(&a, &b).unwrap(), &c).unwrap();
        let right = tensor(&a, &tensor(&b, &c).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-13));
    }

    #[test]
    fn reduced_state_reproduces_local_expectations(rho in density(16), op in matrix(4)) {
        let layout = HilbertLayout::new(2).unwrap();
        let full = DensityMatrix::on_layout(layout, rho).unwrap();
        let big = embed(&op, Subsystem::Atom, layout).unwrap();
        let reduced = partial_trace(&full, Subsystem::Atom).unwrap();
        let diff = full.expectation(big.entries()) - reduced.expectation(&op);
        prop_assert!(diff.norm() < 1e-12);
    }

    #[test]
    fn squared_fidelity_is_linear(r1 in density(4), r2 in density(4), w in 0.0f64..1.0, b in bloch()) {
        let target = target_state(b, TargetFrame::Standard);
        let f2 = |m: Matrix<f64>| fidelity(&DensityMatrix::new(m).unwrap(), &target).unwrap().powi(2);
        let mix = r1.mapv(|z| z * w) + r2.mapv(|z| z * (1.0 - w));
        let expected = w * f2(r1.clone()) + (1.0 - w) * f2(r2.clone());
        prop_assert!((f2(mix) - expected).abs() < 1e-12);
    }

    #[test]
    fn fidelity_ignores_global_phase(r in density(4), b in bloch(), alpha in -10.0f64..10.0) {
        let rho = DensityMatrix::new(r).unwrap();
        let target = target_state(b, TargetFrame::Standard);
        let shifted = target.with_global_phase(alpha);
        let (a, c) = (fidelity(&rho, &target).unwrap(), fidelity(&rho, &shifted).unwrap());
        prop_assert!((a - c).abs() < 1e-12);
    }

    #[test]
    fn thermal_diagonal_strictly_decreases(nbar in 0.01f64..5.0, n in 2usize..25) {
        let rho = thermal_state(nbar, n).unwrap();
        let d: Vec<f64> = rho.entries().diag().iter().map(|z| z.re).collect();
        prop_assert!(d.windows(2).all(|w| w[1] < w[0]));
        prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resonant_coefficients_stay_normalized(
        li in 0.1f64..100.0,
        lsq in 0.1f64..100.0,
        b in bloch(),
        t in 0.0f64..5.0,
    ) {
        let c = resonant_coefficients(li, lsq, b, t).unwrap();
        prop_assert!((c.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dispersive_coefficients_stay_normalized(
        chi in -50.0f64..50.0,
        b in bloch(),
        t in 0.0f64..5.0,
        raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..6),
    ) {
        let amps: Vec<Complex64> = raw.iter().map(|&(x, y)| Complex64::new(x, y)).collect();
        let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-3);
        let amps: Vec<Complex64> = amps.iter().map(|z| z / norm).collect();
        let c = dispersive_coefficients(chi, b, &amps, t).unwrap();
        prop_assert!((c.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn numbers_parse_back(x in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
        let back: f64 = format_number(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-11 * x.abs());
    }

    #[test]
    fn config_echo_round_trips(
        lambda in 0.1f64..50.0,
        ratio in 0.1f64..10.0,
        theta in 0.0..std::f64::consts::PI,
        kappa in 0.0f64..5.0,
        fock in 2usize..20,
        dispersive in any::<bool>(),
    ) {
        let text = format!(
            "kind = \"{}\"\nlambda_mhz = {lambda}\nomega_mhz = {}\ntheta_rad = {theta}\nkappa_mhz = {kappa}\nfock_dim = {fock}\n",
            if dispersive { "dispersive" } else { "resonant" },
            ratio * lambda,
        );
        let cfg = RunConfig::parse(Command::Dynamics, &text, &[]).unwrap();
        let again = RunConfig::parse(Command::Dynamics, &cfg.to_toml(), &[]).unwrap();
        prop_assert_eq!(cfg, again);
    }
}
