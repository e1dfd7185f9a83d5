mod common;

use common::oracles::phasor_oracle;
use proptest::prelude::*;
use stvs_core::powerflow::initial_flux;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn closed_form_matches_phasor_construction(
        p in 0.0..1.0f64,
        q in -0.3..0.8f64,
        v in 0.9..1.1f64,
        x_q in 0.4..2.2f64,
        x_dp in 0.15..0.45f64,
    ) {
        let a = initial_flux(p, q, v, x_q, x_dp).unwrap();
        let b = phasor_oracle(p, q, v, x_q, x_dp);
        prop_assert!(((a - b) / b).abs() <= 1e-10, "{} vs {}", a, b);
        if q > 0.0 {
            let h = 1e-6;
            let up = initial_flux(p, q + h, v, x_q, x_dp).unwrap();
            let dn = initial_flux(p, q - h, v, x_q, x_dp).unwrap();
            prop_assert!(up - dn > 0.0);
        }
    }
}

#[test]
fn condenser_at_zero_output_has_unit_flux() {
    assert_eq!(initial_flux(0.0, 0.0, 1.0, 1.0, 0.2).unwrap(), 1.0);
    assert!((initial_flux(0.0, 0.0, 1.05, 1.0, 0.2).unwrap() - 1.05).abs() < 1e-15);
}
