use qew::bounds::{b_werner, DEFAULT_GRID_POINTS};
use qew::localdeco::{schedule, MeasurementSchedule};
use qew::postproc::{entanglement_report, CorrelationTable};
use qew::qstate::{expectation, isotropic_state, random_density_matrix, swap_operator, werner_state, DensityMatrix};
use qew::railsim::{depolarize, run_experiment, RailEnsemble, RailState};

#[test]
fn simulated_and_dense_tables_agree() {
    for seed in 0..12u64 {
        let d = 2 + (seed % 4) as usize;
        let rho = random_density_matrix(d, 1 + (seed as usize % (d * d)), seed).unwrap();
        let dense = CorrelationTable::exact(&rho).unwrap();
        let sim = run_experiment(
            &RailEnsemble::from_density_matrix(&rho).unwrap(),
            &schedule(d).unwrap(),
            0,
            0,
        )
        .unwrap();
        for (k, v) in &dense.x {
            assert!((sim.x[k] - v).abs() < 1e-10);
        }
        for (k, v) in &dense.y {
            assert!((sim.y[k] - v).abs() < 1e-10);
        }
        for (k, v) in &dense.p {
            assert!((sim.p[k] - v).abs() < 1e-10);
        }
    }
}

#[test]
fn werner_family_report_tracks_closed_form() {
    for d in [2, 3, 5] {
        for f in [-1.0, -0.75, -0.2, 0.0, 0.6] {
            let t = CorrelationTable::exact(&werner_state(d, f).unwrap()).unwrap();
            let r = entanglement_report(&t).unwrap();
            assert!((r.f - f).abs() < 1e-10);
            assert!((r.bound_wer - b_werner(f).unwrap()).abs() < 1e-9);
        }
    }
}

#[test]
fn isotropic_family_bounds_are_monotone_in_g() {
    let d = 3;
    let mut last = 0.0;
    for k in 0..=30 {
        let g = 3.0 * k as f64 / 30.0;
        let r = entanglement_report(&CorrelationTable::exact(&isotropic_state(d, g).unwrap()).unwrap()).unwrap();
        assert!(r.bound_iso >= last - 1e-12, "g = {g}");
        last = r.bound_iso;
        let expected = qew::bounds::b_iso(g, d, DEFAULT_GRID_POINTS).unwrap();
        assert!((r.bound_iso - expected).abs() < 1e-9);
    }
    assert!((last - 3f64.log2()).abs() < 1e-9);
}

#[test]
fn artifacts_round_trip_through_json() {
    let sched = schedule(5).unwrap();
    assert_eq!(MeasurementSchedule::from_json(&sched.to_json().unwrap()).unwrap(), sched);

    let rho = random_density_matrix(3, 5, 4).unwrap();
    let back = DensityMatrix::from_json(&rho.to_json().unwrap()).unwrap();
    assert_eq!(back, rho);

    let t = run_experiment(&RailState::bell(3).unwrap(), &sched_for(3), 5_000, 9).unwrap();
    assert_eq!(CorrelationTable::from_json(&t.to_json().unwrap()).unwrap(), t);
}

fn sched_for(d: usize) -> MeasurementSchedule {
    schedule(d).unwrap()
}

#[test]
fn depolarized_bell_matches_isotropic_state() {
    // (1 − p)|Φ⁺⟩⟨Φ⁺| + p𝟙/d² is isotropic with g = (1 − p)d + p/d.
    let d = 3;
    let p = 0.4;
    let e = depolarize(&RailState::bell(d).unwrap(), p).unwrap();
    let g = (1.0 - p) * d as f64 + p / d as f64;
    let iso = isotropic_state(d, g).unwrap();
    let diff = (e.density_matrix().unwrap().matrix() - iso.matrix())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    assert!(diff < 1e-12);
    let f = expectation(&swap_operator(d).unwrap(), &iso).unwrap();
    let r = entanglement_report(&run_experiment(&e, &sched_for(d), 0, 0).unwrap()).unwrap();
    assert!((r.f - f).abs() < 1e-10);
    assert!((r.g - g).abs() < 1e-10);
}
