#![allow(dead_code)]

pub mod oracles;

use std::path::PathBuf;

use stvs_core::case::{load_case, load_scenarios, FaultScenario, SystemCase};

/// Path under the core crate, from any crate of the workspace.
pub fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core").join(rel)
}

pub fn three_bus() -> SystemCase {
    load_case(data("tests/fixtures/three_bus.json")).unwrap()
}

/// Bolted fault at bus 2, line 2-3 tripped at clearing.
pub fn three_bus_fault() -> FaultScenario {
    FaultScenario {
        id: "flt_2".into(),
        fault_bus: 2,
        trip_branch: Some("2-3".into()),
        t_fault: 0.1,
        t_clr: 0.2,
        fault_admittance: 1e4,
        v_th1: 0.75,
        v_th2: 0.85,
        delta_t: 0.4,
        checkpoint: 0.4,
        monitor_bus: None,
    }
}

pub fn flt_1727() -> FaultScenario {
    load_scenarios(data("data/scenarios/flt_1727.json")).unwrap().remove(0)
}

pub fn fault_set() -> Vec<FaultScenario> {
    load_scenarios(data("data/scenarios/ieee39_faults.json")).unwrap()
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Classical fourth-order Runge-Kutta on a fixed grid.
pub fn rk4<const N: usize>(f: impl Fn(&[f64; N]) -> [f64; N], x0: [f64; N], h: f64, steps: usize) -> [f64; N] {
    let mut x = x0;
    let axpy = |x: &[f64; N], k: &[f64; N], a: f64| std::array::from_fn(|i| x[i] + a * k[i]);
    for _ in 0..steps {
        let k1 = f(&x);
        let k2 = f(&axpy(&x, &k1, h / 2.0));
        let k3 = f(&axpy(&x, &k2, h / 2.0));
        let k4 = f(&axpy(&x, &k3, h));
        x = std::array::from_fn(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    x
}

/// Relative superposition error `|V_i - sum_j R_ij psi_j| / |V_i|` per bus
/// (faulted bus excluded): `(bus, at fault inception, mean over the fault
/// and the first 0.4 s after clearing)`.
pub fn superposition_errors(case: SystemCase, sc: &FaultScenario) -> Vec<(u32, f64, f64)> {
    use stvs_core::network::StageTag;
    use stvs_core::simulate::SimOptions;
    let st = stvs_core::study::Study::new(case).unwrap();
    let rf = st.r_matrix(Some(sc), StageTag::Flt).unwrap();
    let rc = st.r_matrix(Some(sc), StageTag::Clr).unwrap();
    let opts = SimOptions { t_end: sc.t_clr + 0.4, ..Default::default() };
    let tr = st.simulate(Some(sc), &opts).unwrap();
    let during: Vec<_> = tr.samples.iter().filter(|s| s.stage != StageTag::Pre).collect();
    tr.bus_ids
        .iter()
        .enumerate()
        .filter(|(_, &id)| id != sc.fault_bus)
        .map(|(b, &id)| {
            let errs: Vec<f64> = during
                .iter()
                .map(|s| {
                    let r = if s.stage == StageTag::Flt { &rf } else { &rc };
                    let v = s.v[b].norm();
                    (v - r.superpose(b, &s.fluxes())).abs() / v
                })
                .collect();
            (id, errs[0], errs.iter().sum::<f64>() / errs.len() as f64)
        })
        .collect()
}
