mod common;

use common::{small_device, small_grid, small_options};
use qdsim::excitonics::evaluate_configuration;
use qdsim::poisson::GateVoltages;
use qdsim::sweep::{sweep_quadrupole, ExecMode, QuadrupoleParam};

#[test]
fn quadrupole_param_matches_explicit_gates() {
    let gates = QuadrupoleParam::pure(-0.5).gate_voltages();
    let explicit = GateVoltages {
        v_top: 0.5,
        v_bottom: 0.5,
        v_left: -0.5,
        v_right: -0.5,
    };
    assert_eq!(gates, explicit);

    let spec = small_device();
    let grid = small_grid();
    let opts = small_options();
    let a = evaluate_configuration(&spec, &grid, &gates, &opts).unwrap();
    let b = evaluate_configuration(&spec, &grid, &explicit, &opts).unwrap();
    // Same inputs, same floating-point path: reports must agree bitwise.
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn left_right_gate_mirror_preserves_observables() {
    let spec = small_device();
    let grid = small_grid();
    let opts = small_options();
    let left = GateVoltages {
        v_left: 0.3,
        ..GateVoltages::zero()
    };
    let right = GateVoltages {
        v_right: 0.3,
        ..GateVoltages::zero()
    };
    let a = evaluate_configuration(&spec, &grid, &left, &opts).unwrap();
    let b = evaluate_configuration(&spec, &grid, &right, &opts).unwrap();
    // The device and grid are mirror-symmetric in x, so scalar observables
    // must match up to iteration-order roundoff.
    assert!((a.fss_uev - b.fss_uev).abs() < 1e-4, "{} vs {}", a.fss_uev, b.fss_uev);
    assert!((a.beta - b.beta).abs() < 1e-6);
    assert!((a.xi - b.xi).abs() < 1e-6);
    assert!((a.energy_e_ev - b.energy_e_ev).abs() < 1e-7);
}

#[test]
fn self_consistent_mode_runs_and_stays_sane() {
    let spec = small_device();
    let grid = small_grid();
    let mut opts = small_options();
    opts.self_consistent = true;
    let gates = QuadrupoleParam::pure(0.2).gate_voltages();
    let sc = evaluate_configuration(&spec, &grid, &gates, &opts).unwrap();
    assert!(sc.fss_uev.is_finite() && sc.fss_uev >= 0.0);
    assert!(sc.beta > 0.0 && sc.beta <= 1.0);

    // The mutual attraction binds both carriers: each single-particle
    // energy must drop relative to the linear solve. (The in-plane Coulomb
    // kernel is logarithmic, so the shift is large, not perturbative.)
    opts.self_consistent = false;
    let lin = evaluate_configuration(&spec, &grid, &gates, &opts).unwrap();
    assert!(sc.energy_e_ev < lin.energy_e_ev);
    assert!(sc.energy_h_ev < lin.energy_h_ev);
}

#[test]
fn sweep_records_follow_requested_axis() {
    let spec = small_device();
    let grid = small_grid();
    let opts = small_options();
    let records = sweep_quadrupole(
        &spec,
        &grid,
        (-0.1, 0.1),
        3,
        &opts,
        ExecMode::Sequential,
    )
    .unwrap();
    assert_eq!(records.len(), 3);
    let vs: Vec<f64> = records.iter().map(|r| r.v).collect();
    assert_eq!(vs, vec![-0.1, 0.0, 0.1]);
    for r in &records {
        assert_eq!(r.status(), "ok");
        assert_eq!(r.gates, QuadrupoleParam::pure(r.v).gate_voltages());
    }
}
