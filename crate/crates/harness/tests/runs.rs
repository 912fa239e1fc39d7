use std::f64::consts::FRAC_PI_4;
use std::fs;

use genctrl::config::{load_config, AdaptiveConfig, GrapeSection, Grid, Method, SweepAxis, SweepConfig, TSweepConfig};
use genctrl::output::num;
use genctrl::runs::{self, Artifacts, RunContext};
use genctrl_core::dynamics::{PulseSequence, Scenario};
use genctrl_core::fisher;
use proptest::prelude::*;

const CTX: RunContext = RunContext { seed: 5, deterministic: true };

fn no_artifacts() -> Artifacts<'static> {
    Artifacts { actor: None, reference: None }
}

#[test]
fn config_files_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, body: &str| {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    };
    let cfg = load_config(&write("min.json", r#"{"scenario": {"kind": "example1"}, "pulse": "p.json"}"#)).unwrap();
    let s = cfg.scenario().unwrap();
    assert_eq!((s.noise[0].rate, s.horizon.total, s.horizon.dt, s.u_max), (0.2, 5.0, 0.1, 3.0));
    assert_eq!(cfg.pulse.unwrap(), dir.path().join("p.json"));

    let err = load_config(&write("bad.json", "{\"scenario\": {\"kind\": \"example1\"},\n \"sweeep\": {}}")).unwrap_err();
    let msg = format!("{err:#}");
    assert!(msg.contains("sweeep") && msg.contains("line 2"), "{msg}");

    let err = load_config(&write("n.json", r#"{"scenario": {"kind": "example1", "T": 5, "dt": 0.3}}"#)).unwrap_err();
    assert!(format!("{err:#}").contains("validating"));
}

#[test]
fn two_point_no_control_sweep() {
    let s = Scenario::example1_default();
    let spec = SweepConfig {
        axis: SweepAxis::B,
        grid: Some(Grid::Values(vec![0.8, 1.2])),
        phi_grid: None,
        methods: vec![Method::NoControl],
    };
    let rows = runs::run_sweep(&s, &spec, &GrapeSection::default(), &no_artifacts(), &CTX).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.cr_bound.is_finite() && r.feasible && r.seed == 5));
    assert_eq!(rows[0].axis_value, "0.8");
    assert_eq!(rows[1].params, [1.2, FRAC_PI_4, FRAC_PI_4]);
}

#[test]
fn direction_grid_is_a_product() {
    let s = Scenario::example1_default();
    let spec = SweepConfig {
        axis: SweepAxis::Direction,
        grid: Some(Grid::Values(vec![0.0, 1.0])),
        phi_grid: Some(Grid::Range { min: 0.0, max: 1.0, count: 3 }),
        methods: vec![Method::NoControl],
    };
    let pts = runs::sweep_points(&spec, &s);
    assert_eq!(pts.len(), 6);
    assert_eq!(pts[4].label(), "1:0.5");
    let default = SweepConfig { grid: None, phi_grid: None, ..spec };
    assert_eq!(runs::sweep_points(&default, &s).len(), 33 * 65);
}

#[test]
fn default_grids_are_centred() {
    let s = Scenario::example2_default();
    for (k, axis) in [SweepAxis::Omega1, SweepAxis::Omega2, SweepAxis::G].into_iter().enumerate() {
        let g = runs::default_grid(axis, &s);
        assert_eq!(g.len(), 41);
        assert_eq!(g[20], s.params[k]);
    }
}

#[test]
fn time_and_noise_axes() {
    let s = Scenario::example1_default();
    for (axis, grid) in [(SweepAxis::T, vec![1.0, 2.0]), (SweepAxis::Gamma, vec![0.0, 0.3])] {
        let spec = SweepConfig { axis, grid: Some(Grid::Values(grid)), phi_grid: None, methods: vec![Method::NoControl] };
        let rows = runs::run_sweep(&s, &spec, &GrapeSection::default(), &no_artifacts(), &CTX).unwrap();
        assert_eq!(rows.len(), 2);
        assert_ne!(rows[0].cr_bound, rows[1].cr_bound);
    }
}

#[test]
fn time_resolved_series() {
    let s = Scenario::example1_default();
    let zero = PulseSequence::zeros(6, 50, 3.0);
    let (e, rows) = runs::run_time_resolved(&s, &zero).unwrap();
    assert_eq!(rows.len(), 51);
    assert!(rows[0].1.is_infinite());
    assert!(rows[1..].iter().all(|r| r.1.is_finite()));
    assert_eq!(rows[50], (5.0, fisher::evaluate_scenario(&s, &zero).unwrap().cr_bound));
    assert_eq!(rows[50].1, e.cr_bound);
    let (_, again) = runs::run_time_resolved(&s, &zero.clone()).unwrap();
    assert_eq!(rows, again);
}

#[test]
fn t_sweep_rows() {
    let s = Scenario::example1_default();
    let one = TSweepConfig { grid: Some(Grid::Values(vec![3.0])), method: Method::NoControl };
    let rows = runs::run_t_sweep(&s, &one, &GrapeSection::default(), &CTX).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].reference, 4.0);
    assert!((rows[0].normalized * 3.0 * rows[0].cr_bound - 1.0).abs() < 1e-15);
}

#[test]
fn adaptive_rounds() {
    let s = Scenario::example1_default().with_horizon(1.0).unwrap();
    let grape = GrapeSection { iterations: Some(3), ..GrapeSection::default() };
    let spec = |method, rounds| AdaptiveConfig { true_params: [1.1, 0.8, 0.7], initial_guess: None, method, rounds };

    let single = runs::run_adaptive(&s, &spec(Method::NoControl, 1), &grape, &CTX).unwrap();
    assert_eq!(single.len(), 1);
    assert_eq!(single[0].estimate, s.params.0);

    let shift = runs::run_adaptive(&s, &spec(Method::AnalyticShift, 4), &grape, &CTX).unwrap();
    let full = runs::run_adaptive(&s, &spec(Method::Grape, 4), &grape, &CTX).unwrap();
    assert_eq!(shift.iter().filter(|r| r.reoptimized).count(), 1);
    assert!(full.iter().all(|r| r.reoptimized));
    assert_eq!(shift, runs::run_adaptive(&s, &spec(Method::AnalyticShift, 4), &grape, &CTX).unwrap());
    // the estimator stub moves the guess off the starting point
    assert_ne!(shift[1].estimate, shift[0].estimate);
}

#[test]
fn analytic_shift_requires_reference() {
    let s = Scenario::example1_default();
    let spec = SweepConfig {
        axis: SweepAxis::B,
        grid: Some(Grid::Values(vec![1.2])),
        phi_grid: None,
        methods: vec![Method::AnalyticShift],
    };
    assert!(runs::run_sweep(&s, &spec, &GrapeSection::default(), &no_artifacts(), &CTX).is_err());
}

proptest! {
    #[test]
    fn csv_numbers_round_trip(v in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        prop_assert_eq!(num(v).parse::<f64>().unwrap(), v);
    }
}
