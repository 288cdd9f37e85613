use proptest::prelude::*;

use dyadic::profiles::{make_profile, smooth_step, SmoothProfile};
use dyadic::quad::adaptive_simpson;

fn profile() -> impl Strategy<Value = SmoothProfile> {
    (-50.0f64..50.0, 0.001f64..0.25).prop_map(|(c, eps)| make_profile(c, eps).unwrap())
}

proptest! {
    #[test]
    fn symmetric(p in profile(), tau in 0.0f64..1.0) {
        prop_assert!((p.eval(tau) - p.eval(1.0 - tau)).abs() <= 1e-12 * p.plateau.abs().max(1.0));
    }

    // Central differences err by h^2 |f'''| / 6 <= 18.5 (h / eps)^2 |c| / eps, below
    // 1e-6 |c| / eps once eps >= 0.05 at h = 1e-5.
    #[test]
    fn derivative_matches_differences(c in -50.0f64..50.0, eps in 0.05f64..0.25, s in 0.0f64..1.0) {
        let p = make_profile(c, eps).unwrap();
        let h = 1e-5;
        for tau in [s * p.eps, 1.0 - s * p.eps] {
            let fd = (p.eval(tau + h) - p.eval(tau - h)) / (2.0 * h);
            let d = p.deriv(tau);
            let slack = 1e-6 * p.plateau.abs() / p.eps;
            prop_assert!((fd - d).abs() <= slack, "tau {tau}: fd {fd} vs {d}");
        }
    }

    #[test]
    fn ramps_are_monotone(p in profile()) {
        let n = 200;
        let c = p.plateau;
        let mut prev = 0.0;
        for i in 0..=n {
            let x = c.signum() * p.eval(p.eps * i as f64 / n as f64);
            prop_assert!(x >= prev - 1e-15 * c.abs());
            prev = x;
        }
        for i in 0..=n {
            let x = c.signum() * p.eval(1.0 - p.eps + p.eps * i as f64 / n as f64);
            prop_assert!(x <= prev + 1e-15 * c.abs());
            prev = x;
        }
    }

    #[test]
    fn l1_distance_is_c_eps(p in profile()) {
        let d = p.l1_distance();
        prop_assert!(d <= 2.0 * p.eps * p.plateau.abs());
        let oracle = adaptive_simpson(|t| (p.plateau - p.eval(t)).abs(), 0.0, 1.0, 1e-12).unwrap();
        prop_assert!((oracle - d).abs() <= 1e-8 * p.plateau.abs().max(1e-3));
    }
}

#[test]
fn step_endpoints() {
    assert_eq!(smooth_step(0.0), 0.0);
    assert_eq!(smooth_step(1.0), 1.0);
    assert_eq!(smooth_step(-0.5), 0.0);
    assert_eq!(smooth_step(2.0), 1.0);
    assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
}
