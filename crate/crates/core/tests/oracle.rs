//! Closed-form stage-1 amplitudes against numerical Schrödinger evolution.

use transduction::analytic::{resonant_coefficients, resonant_transfer_time};
use transduction::evolve::{evolve_state, IntegratorConfig};
use transduction::experiments::{dispersive_oracle_error, resonant_oracle_error, sample_points};
use transduction::hilbert::{product_ket, unit_amplitudes, AtomLevel};
use transduction::model::{angular, h_resonant, Modulation, ModelParams, ProtocolHamiltonian};
use transduction::{BlochAngle, Params};

const ORACLE_TOL: f64 = 1e-8;

#[test]
fn resonant_closed_form_matches_numerics() {
    let lambda = angular(8.0);
    for fock_dim in [2, 4] {
        let p = Params::new(lambda, 3.0 * lambda).with_fock_dim(fock_dim);
        let err = resonant_oracle_error(&p, &sample_points(100)).unwrap();
        assert!(err <= ORACLE_TOL, "N = {fock_dim}: {err:e}");
    }
}

#[test]
fn dispersive_closed_form_matches_effective_numerics() {
    let lambda = angular(8.0);
    for ratio in [6.0, 12.0, -12.0] {
        let p = Params::new(lambda, lambda).with_detuning(ratio * lambda).with_fock_dim(5);
        let err = dispersive_oracle_error(&p, &sample_points(100)).unwrap();
        assert!(err <= ORACLE_TOL, "delta = {ratio} lambda: {err:e}");
    }
}

#[test]
fn single_precision_core_tracks_the_oracle() {
    let lambda = angular(8.0f32);
    let p = ModelParams::<f32>::new(lambda, lambda).with_fock_dim(2);
    let layout = p.layout().unwrap();
    let mut h = ProtocolHamiltonian::new(layout);
    h.push(h_resonant(&p).unwrap(), Modulation::Static, None).unwrap();
    let tau = resonant_transfer_time(lambda, lambda).unwrap();
    let bloch = BlochAngle::new(1.1f32, 0.4);
    let psi0 = product_ket(
        &unit_amplitudes(4, AtomLevel::R.index()),
        &unit_amplitudes(2, 0),
        &bloch.qubit_amplitudes(),
        layout,
    )
    .unwrap();
    let cfg = IntegratorConfig::<f32>::default().with_tolerances(1e-5, 1e-6);
    let psi = evolve_state(&h, &psi0, 0.0, tau, &cfg).unwrap();
    let exact = resonant_coefficients(lambda, lambda, bloch, tau).unwrap().state_ket(layout);
    let err = psi.iter().zip(&exact).fold(0.0f32, |m, (a, b)| m.max((a - b).norm()));
    assert!(err < 1e-4, "{err:e}");
}
