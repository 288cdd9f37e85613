use dyadic::profiles::*;
use dyadic::spectral::find_q;
use dyadic::Params;

fn setup() -> (Params, dyadic::spectral::SpectralReport) {
    let p = Params::new(2.0, 2.5, 10).unwrap();
    let rep = find_q(&p, p.rho_threshold).unwrap();
    (p, rep)
}

#[test]
fn calibration_keeps_rho_above_threshold() {
    let (p, rep) = setup();
    let cal = calibrate_profiles(&rep, &p, 0.1).unwrap();
    assert!(cal.eps > 0.0);
    assert!(cal.rho.abs() > p.rho_threshold);
    assert!(cal.btilde_residual < 1e-10);
    assert!(cal.measured_difference <= cal.apriori_bound);
}
