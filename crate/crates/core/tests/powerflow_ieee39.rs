use serde::Deserialize;
use stvs_core::case::ieee39;
use stvs_core::powerflow::{init_dynamics, solve_power_flow};

#[derive(Deserialize)]
struct Reference {
    bus_ids: Vec<u32>,
    vm: Vec<f64>,
    va_rad: Vec<f64>,
}

fn reference() -> Reference {
    serde_json::from_str(include_str!("fixtures/ieee39_pf_reference.json")).unwrap()
}

#[test]
fn base_case_matches_independent_solution() {
    let case = ieee39();
    let pf = solve_power_flow(&case).unwrap();
    assert!(pf.iterations <= 10, "{} iterations", pf.iterations);
    assert!(pf.mismatch <= 1e-8);
    let r = reference();
    assert_eq!(r.bus_ids, pf.bus_ids);
    for k in 0..r.vm.len() {
        let got = pf.voltage(k);
        let want = num_complex::Complex64::from_polar(r.vm[k], r.va_rad[k]);
        assert!((got - want).norm() < 1e-3, "bus {}: {got} vs {want}", r.bus_ids[k]);
    }
}

#[test]
fn q_never_exceeds_limit_at_solution() {
    let case = ieee39();
    let pf = solve_power_flow(&case).unwrap();
    for g in &pf.generators {
        let p = &case.generators[case.generator_index(&g.id).unwrap()];
        if case.buses[case.bus_index(g.bus).unwrap()].kind != stvs_core::case::BusKind::Slack {
            assert!(g.q <= p.q_max + 1e-9, "{} {} > {}", g.id, g.q, p.q_max);
        }
    }
}

#[test]
fn initialization_is_a_fixed_point() {
    let case = ieee39();
    let pf = solve_power_flow(&case).unwrap();
    let init = init_dynamics(&case, &pf).unwrap();
    assert_eq!(init.generators.len(), 10);
    for (g, m) in init.generators.iter().zip(&init.models) {
        let st = init.generator_state(init.generators.iter().position(|x| x.id == g.id).unwrap());
        let d = stvs_core::models::generator_derivatives(&st, g.v_d, g.v_q, m);
        assert!(d.psi.abs() < 1e-10 && d.e_fd.abs() < 1e-10, "{}: {:?}", g.id, d);
        let out = stvs_core::models::stator_algebra(g.psi_d0_prime, g.v_d, g.v_q, &m.params);
        assert!((out.q - g.q).abs() < 1e-10);
        assert!((out.p - g.p).abs() < 1e-10);
    }
    for m in &init.motors {
        assert!(m.s0 > 0.0 && m.s0 < 1.0);
    }
}
