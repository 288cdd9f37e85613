use proptest::prelude::*;

use dyadic::model::{
    energy_balance, nonlinear_energy_flux, nonlinear_energy_flux_with_scale, shell_rhs,
    ForcingSample, ShellVector, Trajectory,
};
use dyadic::{DyadicError, Params};

fn params_and_state() -> impl Strategy<Value = (Params, ShellVector)> {
    (1.1f64..4.0, 0.3f64..3.5, 1usize..=16).prop_flat_map(|(lambda, beta, n)| {
        prop::collection::vec(-2.0f64..2.0, n).prop_map(move |u| {
            (Params::new(lambda, beta, n).unwrap(), ShellVector(u))
        })
    })
}

proptest! {
    #[test]
    fn flux_telescopes((p, u) in params_and_state()) {
        let (flux, scale) = nonlinear_energy_flux_with_scale(&u, &p).unwrap();
        prop_assert!(flux.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn rhs_is_quadratic((p, u) in params_and_state()) {
        let zero = ForcingSample::zeros(p.n_shells);
        let r1 = shell_rhs(&u, &zero, &p).unwrap();
        let u2 = ShellVector(u.0.iter().map(|x| 2.0 * x).collect());
        let r2 = shell_rhs(&u2, &zero, &p).unwrap();
        // F(u) = L u + Q(u): L u = 2 F(u) - F(2u) / 2, Q(u) = F(2u) / 2 - F(u)
        for n in 1..=p.n_shells {
            let lin = 2.0 * r1.shell(n) - 0.5 * r2.shell(n);
            let quad = 0.5 * r2.shell(n) - r1.shell(n);
            let expect_lin = -p.dissipation(n) * u.shell(n);
            let expect_quad = p.coupling(n) * u.shell(n - 1).powi(2)
                - p.coupling(n + 1) * u.shell(n) * u.shell(n + 1);
            let scale = expect_lin.abs() + p.coupling(n + 1) * 8.0 + 1.0;
            prop_assert!((lin - expect_lin).abs() <= 1e-12 * scale);
            prop_assert!((quad - expect_quad).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn energy_derivative_is_minus_dissipation((p, u) in params_and_state()) {
        let zero = ForcingSample::zeros(p.n_shells);
        let r = shell_rhs(&u, &zero, &p).unwrap();
        let mut dot = 0.0;
        let mut scale = 0.0;
        let mut diss = 0.0;
        for n in 1..=p.n_shells {
            dot += 2.0 * u.shell(n) * r.shell(n);
            scale += (2.0 * u.shell(n) * r.shell(n)).abs();
            diss += 2.0 * p.dissipation(n) * u.shell(n).powi(2);
        }
        prop_assert!((dot + diss).abs() <= 1e-12 * (scale + diss).max(f64::MIN_POSITIVE));
    }
}

#[test]
fn rhs_examples() {
    let p = Params::new(2.0, 2.5, 1).unwrap();
    let r = shell_rhs(&ShellVector(vec![1.0]), &ForcingSample(vec![0.0]), &p).unwrap();
    assert_eq!(r.0, vec![-4.0]);

    let p = Params::new(2.0, 2.5, 3).unwrap();
    let zero = shell_rhs(&ShellVector::zeros(3), &ForcingSample::zeros(3), &p).unwrap();
    assert_eq!(zero.0, vec![0.0; 3]);

    // direct substitution: lambda^(beta n) = 2^(2.5 n)
    let r = shell_rhs(&ShellVector(vec![1.0; 3]), &ForcingSample::zeros(3), &p).unwrap();
    let c = |n: i32| 2f64.powf(2.5 * n as f64);
    let expect = [
        -4.0 - c(2),
        -16.0 + c(2) - c(3),
        -64.0 + c(3),
    ];
    for (a, b) in r.0.iter().zip(expect) {
        assert!((a - b).abs() <= 1e-13 * b.abs());
    }
    // frozen from a 30-digit evaluation
    let frozen = [-36.0, -165.01933598375617, 117.01933598375617];
    for (a, b) in r.0.iter().zip(frozen) {
        assert!((a - b).abs() <= 1e-13 * b.abs());
    }
}

#[test]
fn flux_of_ones_and_zero() {
    for n in 1..=5 {
        let p = Params::new(2.0, 2.5, n).unwrap();
        assert_eq!(nonlinear_energy_flux(&ShellVector::zeros(n), &p).unwrap(), 0.0);
        let (f, s) = nonlinear_energy_flux_with_scale(&ShellVector(vec![1.0; n]), &p).unwrap();
        assert!(f.abs() <= 1e-12 * s.max(1.0));
    }
}

#[test]
fn rhs_rejects_bad_input() {
    let p = Params::new(2.0, 2.5, 3).unwrap();
    let e = shell_rhs(&ShellVector(vec![1.0; 2]), &ForcingSample::zeros(3), &p).unwrap_err();
    assert!(matches!(e, DyadicError::Contract(_)));
    let e = shell_rhs(&ShellVector(vec![1.0, f64::NAN, 0.0]), &ForcingSample::zeros(3), &p)
        .unwrap_err();
    assert!(matches!(e, DyadicError::Input(_)));
}

#[test]
fn params_invariants() {
    assert!(matches!(Params::new(1.0, 2.5, 3), Err(DyadicError::Domain(_))));
    assert!(matches!(Params::new(2.0, 0.0, 3), Err(DyadicError::Domain(_))));
    assert!(matches!(Params::new(2.0, 2.5, 0), Err(DyadicError::Domain(_))));
    let p = Params::new(2.0, 2.5, 3).unwrap();
    assert_eq!(p.horizon, 1.0 / 3.0);
    assert_eq!(p.rho_threshold, 2f64.powf(2.5));
    p.validate_for_construction().unwrap();
    assert!(p.with_horizon(1.0).unwrap().validate_for_construction().is_err());
    assert!(p.with_rho_threshold(1.0).unwrap().validate_for_construction().is_err());
}

#[test]
fn energy_balance_zero_and_closed_form() {
    let p = Params::new(2.0, 2.5, 1).unwrap();
    let grid: Vec<f64> = (0..=4000).map(|i| i as f64 / 4000.0).collect();
    let zero = Trajectory::new(
        grid.clone(),
        vec![ShellVector::zeros(1); grid.len()],
        Some(vec![ForcingSample::zeros(1); grid.len()]),
    )
    .unwrap();
    let b = energy_balance(&zero, 1.0, &p, &ShellVector::zeros(1)).unwrap();
    assert_eq!((b.lhs, b.rhs), (0.0, 0.0));

    // u = (1 - e^-4t)/4 with f = 1
    let states = grid
        .iter()
        .map(|t| ShellVector(vec![0.25 * (1.0 - (-4.0 * t).exp())]))
        .collect();
    let traj = Trajectory::new(grid.clone(), states, Some(vec![ForcingSample(vec![1.0]); grid.len()]))
        .unwrap();
    for t in [0.1, 0.5, 1.0] {
        let b = energy_balance(&traj, t, &p, &ShellVector::zeros(1)).unwrap();
        assert!((b.lhs - b.rhs).abs() <= 1e-6 * b.rhs, "{b:?}");
    }
    assert!(matches!(
        energy_balance(&traj, 2.0, &p, &ShellVector::zeros(1)),
        Err(DyadicError::Range(_))
    ));
}

#[test]
fn trajectory_invariants() {
    let s = vec![ShellVector::zeros(1); 2];
    assert!(Trajectory::new(vec![0.1, 0.2], s.clone(), None).is_err());
    assert!(Trajectory::new(vec![0.0, 0.0], s.clone(), None).is_err());
    assert!(Trajectory::new(vec![0.0], s, None).is_err());
}
