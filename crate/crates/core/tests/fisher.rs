mod common;

use common::*;
use genctrl_core::dynamics::{OpenSystem, PulseSequence, Scenario};
use genctrl_core::fisher::{self, Cfim, SensitivityMode};
use genctrl_core::linalg::{self, C64};
use proptest::prelude::*;

#[test]
fn sensitivities_match_finite_differences() {
    for (k, s) in [Scenario::example1_default(), Scenario::example2_default()].iter().enumerate() {
        for seed in 0..3 {
            let pulse = random_pulse(s, 100 * k as u64 + seed);
            let rec = fisher::propagate_with_sensitivity(&s.system().unwrap(), &pulse).unwrap();
            let exact = rec.final_sensitivity();
            let fd = fd_state_derivs(s, &pulse, 1e-5);
            for a in 0..3 {
                let e = rel_err(&exact.derivs[a], &fd[a]);
                assert!(e < 1e-6, "example {k} seed {seed} param {a}: {e:e}");
            }
        }
    }
}

#[test]
fn coupling_derivative_without_control() {
    let s = Scenario::example2_default();
    let pulse = PulseSequence::zeros(6, 50, 5.0);
    let exact = fisher::propagate_with_sensitivity(&s.system().unwrap(), &pulse)
        .unwrap()
        .final_sensitivity();
    let fd = fd_state_derivs(&s, &pulse, 1e-5);
    assert!(rel_err(&exact.derivs[2], &fd[2]) < 1e-6);
}

#[test]
fn absent_parameter_has_zero_derivative() {
    let s = Scenario::example1_default();
    let sys = s.system().unwrap();
    let mut derivs = sys.h0_derivs.clone();
    derivs[2] = linalg::zeros(4);
    let sys = OpenSystem::new(sys.h0.clone(), derivs, sys.controls.clone(), sys.jumps.clone(), sys.probe.clone(), sys.povm.clone(), sys.horizon, sys.u_max).unwrap();
    let rec = fisher::propagate_with_sensitivity(&sys, &random_pulse(&s, 1)).unwrap();
    assert_eq!(linalg::max_abs(&rec.final_sensitivity().derivs[2]), 0.0);
}

#[test]
fn derivatives_are_hermitian_and_traceless() {
    let s = Scenario::example1_default();
    let rec = fisher::propagate_with_sensitivity(&s.system().unwrap(), &random_pulse(&s, 5)).unwrap();
    for j in 0..=rec.slices() {
        let at = rec.at(j);
        for d in &at.derivs {
            assert!(linalg::hermiticity_defect(d) < 1e-12);
            assert!(linalg::trace(d).norm() < 1e-12);
        }
    }
}

#[test]
fn reparametrization_follows_chain_rule() {
    // y = 2x, so ∂ρ/∂y = ½ ∂ρ/∂x
    let s = Scenario::example2_default();
    let sys = s.system().unwrap();
    let pulse = random_pulse(&s, 9);
    let half = sys.h0_derivs.clone().map(|d| d * C64::new(0.5, 0.0));
    let sys_y = OpenSystem::new(sys.h0.clone(), half, sys.controls.clone(), sys.jumps.clone(), sys.probe.clone(), sys.povm.clone(), sys.horizon, sys.u_max).unwrap();
    let dx = fisher::propagate_with_sensitivity(&sys, &pulse).unwrap().final_sensitivity();
    let dy = fisher::propagate_with_sensitivity(&sys_y, &pulse).unwrap().final_sensitivity();
    for a in 0..3 {
        let expect = &dx.derivs[a] * C64::new(0.5, 0.0);
        assert!(linalg::max_abs_diff(&dy.derivs[a], &expect) < 1e-10);
    }
}

#[test]
fn bound_is_basis_independent() {
    let mut r = rng(77);
    for s in [Scenario::example1_default(), Scenario::example2_default()] {
        let sys = s.system().unwrap();
        let pulse = random_pulse(&s, 3);
        let u = random_unitary(4, &mut r);
        let a = fisher::evaluate(&sys, &pulse).unwrap();
        let b = fisher::evaluate(&sys.conjugated(&u).unwrap(), &pulse).unwrap();
        assert!((a.cr_bound - b.cr_bound).abs() < 1e-9 * a.cr_bound.max(1.0));
    }
}

#[test]
fn zero_pulse_example1_matches_finite_difference_pipeline() {
    let s = Scenario::example1_default();
    let pulse = PulseSequence::zeros(6, 50, 3.0);
    let e = fisher::evaluate_scenario(&s, &pulse).unwrap();
    assert_eq!(e.series.len(), 51);
    assert!(e.series[1..].iter().all(|v| v.is_finite()));
    assert_eq!(*e.series.last().unwrap(), e.cr_bound);
    let fd = fisher::cr_bound(&fd_cfim(&s, &pulse, 1e-5));
    assert!((e.cr_bound - fd).abs() / fd < 1e-6, "{} vs {}", e.cr_bound, fd);
}

#[test]
fn first_order_mode_converges_to_exact() {
    let s = Scenario::example1_default();
    let sys = s.system().unwrap();
    let pulse = random_pulse(&s, 4);
    let exact = fisher::propagate_with_sensitivity(&sys, &pulse).unwrap().final_sensitivity();
    let approx = fisher::propagate_with_sensitivity_mode(&sys, &pulse, SensitivityMode::FirstOrder)
        .unwrap()
        .final_sensitivity();
    let e = rel_err(&approx.derivs[0], &exact.derivs[0]);
    assert!(e > 0.0 && e < 0.5, "{e}");
}

fn psd_strategy() -> impl Strategy<Value = Cfim> {
    (prop::array::uniform9(-2.0f64..2.0), 1e-3f64..1.0).prop_map(|(a, eps)| {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = (0..3).map(|k| a[3 * i + k] * a[3 * j + k]).sum::<f64>();
            }
            m[i][i] += eps;
        }
        Cfim::from_entries(m)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn f0_reciprocal_lower_bounds_trace(f in psd_strategy()) {
        let cr = fisher::cr_bound(&f);
        prop_assume!(cr.is_finite());
        prop_assert!(1.0 / fisher::f0_objective(&f) <= cr * (1.0 + 1e-12));
    }

    #[test]
    fn cfim_is_psd(probs in prop::array::uniform4(0.01f64..1.0), d in prop::array::uniform12(-1.0f64..1.0)) {
        let total: f64 = probs.iter().sum();
        let p: Vec<f64> = probs.iter().map(|v| v / total).collect();
        let rows = [0, 1, 2].map(|a| {
            let mean = d[4 * a..4 * a + 4].iter().sum::<f64>() / 4.0;
            d[4 * a..4 * a + 4].iter().map(|v| v - mean).collect::<Vec<_>>()
        });
        let f = fisher::cfim(&p, &rows);
        prop_assert!(f.asymmetry() == 0.0);
        prop_assert!(f.eigenvalues()[0] >= -1e-10);
    }
}
