//! Closed-form flux and reactive power under a stepped terminal voltage.
//!
//! Within a stage the terminal voltage of every generator is held at a
//! constant value, so the flux and exciter equations become a linear pair
//! with the solution `psi(t) = A1 e^{-t/T'_d} + A2 e^{-t/T_e} + A3`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::case::{FaultScenario, GeneratorParams};
use crate::error::{Error, Result};
use crate::models::generator::{stator_algebra, to_dq, GeneratorModel};
use crate::network::RMatrix;
use crate::powerflow::DynamicInit;
use crate::simulate::Trajectory;

/// Terminal voltage held through one stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageVoltage {
    pub v: f64,
    pub v_d: f64,
    pub v_q: f64,
}

impl StageVoltage {
    /// Magnitude `v` with dq split taken from the direction of `phasor`.
    pub fn from_phasor(v: f64, phasor: Complex64, delta: f64) -> Self {
        let (d, q) = to_dq(phasor, delta);
        let m = d.hypot(q);
        let (v_d, v_q) = if m > 0.0 { (d * v / m, q * v / m) } else { (0.0, v) };
        Self { v, v_d, v_q }
    }
}

/// State at the start of a stage.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageStart {
    pub psi: f64,
    pub e_fd: f64,
    pub delta_psi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxCoefficients {
    pub a1: f64,
    /// Coefficient of `e^{-t/T_e}`, or of `t e^{-t/T'_d}` when resonant.
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
    pub a7: f64,
    pub a8: f64,
    pub t_d_prime: f64,
    pub t_e: f64,
    /// `T_e = T'_d`: repeated root, limiting form in use.
    pub resonant: bool,
    pub start: StageStart,
    pub e_fd0: f64,
    /// Exciter target for this stage.
    pub e_fd_ss: f64,
    pub stage: StageVoltage,
    pub x_d_prime: f64,
    pub x_q: f64,
}

impl FluxCoefficients {
    /// Coefficients of the excitation-driven flux change
    /// (`A'_1..A'_3`) and the spontaneous flux (`A'_4, A'_5`).
    pub fn primed(&self) -> [f64; 5] {
        [self.a4, self.a5, self.a6, self.a7, self.a8]
    }
}

fn is_resonant(t_d: f64, t_e: f64) -> bool {
    let (a, b) = (1.0 / t_d, 1.0 / t_e);
    (a - b).abs() <= 1e-9 * a.max(b)
}

/// Stage coefficients. `v0` is the exciter reference (pre-fault terminal
/// voltage) and `e_fd0` the pre-fault excitation.
pub fn flux_coefficients(
    params: &GeneratorParams,
    e_fd0: f64,
    v0: f64,
    stage: StageVoltage,
    start: StageStart,
) -> FluxCoefficients {
    let (xd, xdp, td0) = (params.x_d, params.x_d_prime, params.t_d0_prime);
    let t_d = params.t_d_prime();
    let t_e = params.t_e;
    let e_ss = e_fd0 + params.k_a * (v0 - stage.v);
    let a3 = (stage.v_q * (xd - xdp) + e_ss * xdp) / xd;
    let a6 = (e_ss - e_fd0) * xdp / xd;
    let a8 = (stage.v_q * (xd - xdp) + e_fd0 * xdp) / xd;
    let resonant = is_resonant(t_d, t_e);
    let a2 = if resonant {
        (start.e_fd - e_ss) / td0
    } else {
        (start.e_fd - e_ss) * t_e * xdp / (t_e * xd - td0 * xdp)
    };
    let (a1, a4) = if resonant {
        (start.psi - a3, start.delta_psi - a6)
    } else {
        (start.psi - a2 - a3, start.delta_psi - a2 - a6)
    };
    FluxCoefficients {
        a1,
        a2,
        a3,
        a4,
        a5: a2,
        a6,
        a7: start.psi - start.delta_psi - a8,
        a8,
        t_d_prime: t_d,
        t_e,
        resonant,
        start,
        e_fd0,
        e_fd_ss: e_ss,
        stage,
        x_d_prime: xdp,
        x_q: params.x_q,
    }
}

/// `(e^{-t/T'_d}, second mode)` where the second mode is `e^{-t/T_e}`, or
/// `t e^{-t/T'_d}` when resonant.
fn modes(c: &FluxCoefficients, t: f64) -> (f64, f64) {
    let e1 = (-t / c.t_d_prime).exp();
    let e2 = if c.resonant { t * e1 } else { (-t / c.t_e).exp() };
    (e1, e2)
}

// The forms below anchor on the stage start value, so that at t = 0 they
// return it exactly (no cancellation between A1, A2 and A3).

pub fn analytic_flux(c: &FluxCoefficients, t: f64) -> f64 {
    let (e1, e2) = modes(c, t);
    let shift = if c.resonant { e2 } else { e2 - e1 };
    c.start.psi * e1 + c.a2 * shift - c.a3 * (-t / c.t_d_prime).exp_m1()
}

pub fn analytic_e_fd(c: &FluxCoefficients, t: f64) -> f64 {
    c.e_fd_ss + (c.start.e_fd - c.e_fd_ss) * (-t / c.t_e).exp()
}

/// Excitation-driven flux change.
pub fn analytic_delta_psi(c: &FluxCoefficients, t: f64) -> f64 {
    let (e1, e2) = modes(c, t);
    let shift = if c.resonant { e2 } else { e2 - e1 };
    c.start.delta_psi * e1 + c.a5 * shift - c.a6 * (-t / c.t_d_prime).exp_m1()
}

/// Spontaneous flux (exciter frozen at its pre-fault output).
pub fn analytic_psi_spn(c: &FluxCoefficients, t: f64) -> f64 {
    (c.start.psi - c.start.delta_psi) * (-t / c.t_d_prime).exp() - c.a8 * (-t / c.t_d_prime).exp_m1()
}

/// `(Q_spon, Q_exc, Q_g)` at time `t` into the stage.
pub fn analytic_q(c: &FluxCoefficients, params: &GeneratorParams, t: f64) -> (f64, f64, f64) {
    let (vd, vq) = (c.stage.v_d, c.stage.v_q);
    let x = c.x_d_prime;
    let spn = analytic_psi_spn(c, t);
    let dpsi = analytic_delta_psi(c, t);
    let q_spon = (vq * spn - vq * vq) / x - vd * vd / c.x_q;
    let q_exc = vq * dpsi / x;
    let q_g = stator_algebra(spn + dpsi, vd, vq, params).q;
    (q_spon, q_exc, q_g)
}

/// `int_0^t psi`.
pub fn flux_integral(c: &FluxCoefficients, t: f64) -> f64 {
    let decay = |tau: f64| -tau * (-t / tau).exp_m1();
    let second = if c.resonant {
        let tau = c.t_d_prime;
        let x = t / tau;
        c.a2 * tau * tau * (1.0 - (-x).exp() * (1.0 + x))
    } else {
        c.a2 * decay(c.t_e)
    };
    c.a1 * decay(c.t_d_prime) + second + c.a3 * t
}

/// Windowed mean support `(R / dT) int_0^dT psi`.
pub fn analytic_vrc_term(c: &FluxCoefficients, r: f64, delta_t: f64) -> f64 {
    r / delta_t * flux_integral(c, delta_t)
}

/// Motor internal EMF magnitude under a stepped voltage: first-order decay
/// toward `|C(s0)| V` with time constant `T'_0 X' / X`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotorStage {
    pub start: f64,
    pub target: f64,
    pub tau: f64,
}

impl MotorStage {
    pub fn flux(&self, t: f64) -> f64 {
        self.target + (self.start - self.target) * (-t / self.tau).exp()
    }

    pub fn integral(&self, t: f64) -> f64 {
        self.target * t - (self.start - self.target) * self.tau * (-t / self.tau).exp_m1()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorProfile {
    pub id: String,
    #[serde(rename = "V_0")]
    pub v0: f64,
    pub flt: StageVoltage,
    pub clr: StageVoltage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteppedProfile {
    pub t_fault: f64,
    pub t_clr: f64,
    pub generators: Vec<GeneratorProfile>,
}

/// Two-stage closed-form solution for every device of a scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticSolution {
    pub profile: SteppedProfile,
    /// `[fault stage, post-clearing stage]` per generator.
    pub generators: Vec<[FluxCoefficients; 2]>,
    pub motors: Vec<[MotorStage; 2]>,
    pub psi0: Vec<f64>,
}

impl AnalyticSolution {
    pub fn n_generators(&self) -> usize {
        self.generators.len()
    }

    /// Device flux at absolute time `t` (generators first, then motors).
    pub fn flux(&self, device: usize, t: f64) -> f64 {
        let (tf, tc) = (self.profile.t_fault, self.profile.t_clr);
        if t < tf {
            return self.psi0[device];
        }
        let ng = self.generators.len();
        let (stage, tau) = if t < tc { (0, t - tf) } else { (1, t - tc) };
        if device < ng {
            analytic_flux(&self.generators[device][stage], tau)
        } else {
            self.motors[device - ng][stage].flux(tau)
        }
    }

    /// `int_{t0}^{t1}` of a device flux, `t_fault <= t0 <= t1`.
    pub fn flux_integral(&self, device: usize, t0: f64, t1: f64) -> f64 {
        let (tf, tc) = (self.profile.t_fault, self.profile.t_clr);
        let ng = self.generators.len();
        let piece = |stage: usize, a: f64, b: f64| -> f64 {
            if device < ng {
                let c = &self.generators[device][stage];
                flux_integral(c, b) - flux_integral(c, a)
            } else {
                let m = &self.motors[device - ng][stage];
                m.integral(b) - m.integral(a)
            }
        };
        let mut total = 0.0;
        if t0 < tc {
            total += piece(0, t0 - tf, t1.min(tc) - tf);
        }
        if t1 > tc {
            total += piece(1, t0.max(tc) - tc, t1 - tc);
        }
        total
    }
}

fn stage_voltages(
    init: &DynamicInit,
    r: &RMatrix,
    fluxes: &[f64],
) -> (Vec<StageVoltage>, Vec<f64>) {
    let gens = init
        .generators
        .iter()
        .map(|g| {
            let v = r.superpose(g.bus_index, fluxes);
            let phasor = r.superpose_complex(g.bus_index, fluxes);
            StageVoltage::from_phasor(v, phasor, g.delta)
        })
        .collect();
    let motors = init
        .motors
        .iter()
        .map(|m| r.superpose(m.bus_index, fluxes))
        .collect();
    (gens, motors)
}

fn motor_stage(init: &DynamicInit, k: usize, start: f64, v: f64) -> MotorStage {
    let m = &init.motors[k];
    MotorStage {
        start,
        target: m.model.c(m.s0).norm() * v.max(0.0),
        tau: m.model.t0 * m.model.x_prime / m.model.x,
    }
}

/// Builds the stepped profile and both stages' coefficients.
pub fn solve_analytic(
    init: &DynamicInit,
    scenario: &FaultScenario,
    r_flt: &RMatrix,
    r_clr: &RMatrix,
) -> Result<AnalyticSolution> {
    let n = init.n_devices();
    if r_flt.device_ids.len() != n || r_clr.device_ids.len() != n {
        return Err(Error::validation("R", "device count does not match the initialization"));
    }
    let psi0 = init.initial_fluxes();
    let ng = init.generators.len();
    let dt = scenario.t_clr - scenario.t_fault;

    let (v_flt, vm_flt) = stage_voltages(init, r_flt, &psi0);
    let mut stage1 = Vec::with_capacity(ng);
    for (k, m) in init.models.iter().enumerate() {
        let start = StageStart {
            psi: psi0[k],
            e_fd: m.e_fd0,
            delta_psi: 0.0,
        };
        stage1.push(flux_coefficients(&m.params, m.e_fd0, m.v_ref, v_flt[k], start));
    }
    let motors1: Vec<MotorStage> = (0..init.motors.len())
        .map(|k| motor_stage(init, k, psi0[ng + k], vm_flt[k]))
        .collect();

    let mut psi_clr: Vec<f64> = stage1.iter().map(|c| analytic_flux(c, dt)).collect();
    psi_clr.extend(motors1.iter().map(|m| m.flux(dt)));
    let (v_clr, vm_clr) = stage_voltages(init, r_clr, &psi_clr);

    let mut generators = Vec::with_capacity(ng);
    let mut profiles = Vec::with_capacity(ng);
    for (k, (m, c1)) in init.models.iter().zip(stage1).enumerate() {
        let start = StageStart {
            psi: psi_clr[k],
            e_fd: analytic_e_fd(&c1, dt),
            delta_psi: analytic_delta_psi(&c1, dt),
        };
        let c2 = flux_coefficients(&m.params, m.e_fd0, m.v_ref, v_clr[k], start);
        profiles.push(GeneratorProfile {
            id: init.generators[k].id.clone(),
            v0: m.v_ref,
            flt: v_flt[k],
            clr: v_clr[k],
        });
        generators.push([c1, c2]);
    }
    let motors = motors1
        .into_iter()
        .enumerate()
        .map(|(k, m1)| [m1, motor_stage(init, k, psi_clr[ng + k], vm_clr[k])])
        .collect();
    Ok(AnalyticSolution {
        profile: SteppedProfile {
            t_fault: scenario.t_fault,
            t_clr: scenario.t_clr,
            generators: profiles,
        },
        generators,
        motors,
        psi0,
    })
}

/// Error statistics of one generator's analytic flux against a simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageError {
    pub max_abs: f64,
    pub max_rel: f64,
    pub mean_rel: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorComparison {
    pub id: String,
    pub fault: StageError,
    pub post_clearing: StageError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub scenario_id: String,
    /// Length of the post-clearing window compared (s).
    pub window: f64,
    pub generators: Vec<GeneratorComparison>,
    pub max_rel_fault: f64,
    pub max_rel_post_clearing: f64,
}

/// Compares analytic and simulated generator flux over the fault stage and
/// the first `window` seconds after clearing.
pub fn compare(
    solution: &AnalyticSolution,
    traj: &Trajectory,
    scenario: &FaultScenario,
    window: f64,
) -> ComparisonReport {
    let tf = traj
        .events
        .iter()
        .find(|e| e.event == "fault_on")
        .map_or(scenario.t_fault, |e| e.t);
    let tc = traj
        .events
        .iter()
        .find(|e| e.event == "fault_cleared")
        .map_or(scenario.t_clr, |e| e.t);
    let stats = |k: usize, stage: crate::network::StageTag, t0: f64, t1: f64| -> StageError {
        let mut errs = Vec::new();
        let mut max_abs: f64 = 0.0;
        for s in traj.samples.iter().filter(|s| s.stage == stage && s.t >= t0 - 1e-12 && s.t <= t1 + 1e-12) {
            let local = if stage == crate::network::StageTag::Flt { s.t - tf } else { s.t - tc };
            let c = &solution.generators[k][if stage == crate::network::StageTag::Flt { 0 } else { 1 }];
            let a = analytic_flux(c, local);
            let e = (a - s.gens[k].psi).abs();
            max_abs = max_abs.max(e);
            errs.push(e / s.gens[k].psi.abs());
        }
        let n = errs.len().max(1) as f64;
        StageError {
            max_abs,
            max_rel: errs.iter().cloned().fold(0.0, f64::max),
            mean_rel: errs.iter().sum::<f64>() / n,
        }
    };
    let generators: Vec<GeneratorComparison> = traj
        .gen_ids
        .iter()
        .enumerate()
        .map(|(k, id)| GeneratorComparison {
            id: id.clone(),
            fault: stats(k, crate::network::StageTag::Flt, tf, tc),
            post_clearing: stats(k, crate::network::StageTag::Clr, tc, tc + window),
        })
        .collect();
    ComparisonReport {
        scenario_id: scenario.id.clone(),
        window,
        max_rel_fault: generators.iter().map(|g| g.fault.max_rel).fold(0.0, f64::max),
        max_rel_post_clearing: generators.iter().map(|g| g.post_clearing.max_rel).fold(0.0, f64::max),
        generators,
    }
}

/// Generator model lookup helper for callers holding only ids.
pub fn model_of<'a>(init: &'a DynamicInit, id: &str) -> Option<&'a GeneratorModel> {
    init.generators.iter().position(|g| g.id == id).map(|k| &init.models[k])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> GeneratorParams {
        GeneratorParams {
            id: "G".into(),
            bus: 1,
            p_g0: 0.8,
            q_g0: None,
            x_d: 2.0,
            x_d_prime: 0.3,
            x_q: 1.7,
            x_ad: 1.85,
            x_f: None,
            t_d0_prime: 6.0,
            k_a: 50.0,
            t_e: 0.5,
            q_max: 5.0,
            is_condenser: false,
            in_service: true,
            h: 5.0,
            d: 0.0,
            e_fd_max: None,
            vrc_from_fault: false,
        }
    }

    fn stage(v: f64) -> StageVoltage {
        StageVoltage { v, v_d: 0.6 * v, v_q: 0.8 * v }
    }

    #[test]
    fn no_disturbance_keeps_flux() {
        let p = params();
        let v = stage(1.0);
        // Equilibrium flux for E_fd0 at this V_q.
        let e = 1.2;
        let psi = (e * p.x_d_prime + (p.x_d - p.x_d_prime) * v.v_q) / p.x_d;
        let c = flux_coefficients(&p, e, 1.0, v, StageStart { psi, e_fd: e, delta_psi: 0.0 });
        assert!(c.a1.abs() < 1e-15 && c.a2.abs() < 1e-15);
        assert!((c.a3 - psi).abs() < 1e-15);
    }

    #[test]
    fn conservation_and_asymptote() {
        let p = params();
        let start = StageStart { psi: 1.05, e_fd: 1.2, delta_psi: 0.0 };
        let c = flux_coefficients(&p, 1.2, 1.0, stage(0.5), start);
        assert!((c.a1 + c.a2 + c.a3 - 1.05).abs() < 1e-12);
        assert_eq!(analytic_flux(&c, 0.0), 1.05);
        let big = 40.0 * c.t_d_prime.max(c.t_e);
        assert!((analytic_flux(&c, big) - c.a3).abs() < 1e-4);
        assert!(c.a1 < 0.0 && c.a2 > 0.0);
    }

    #[test]
    fn flux_partition_holds() {
        let p = params();
        let c = flux_coefficients(&p, 1.2, 1.0, stage(0.5), StageStart { psi: 1.05, e_fd: 1.5, delta_psi: 0.02 });
        for &t in &[0.0, 0.05, 0.3, 2.0] {
            let s = analytic_psi_spn(&c, t) + analytic_delta_psi(&c, t);
            assert!((s - analytic_flux(&c, t)).abs() < 1e-12);
        }
    }

    #[test]
    fn q_decomposition_is_exact_and_starts_spontaneous() {
        let p = params();
        let c = flux_coefficients(&p, 1.2, 1.0, stage(0.5), StageStart { psi: 1.05, e_fd: 1.2, delta_psi: 0.0 });
        let (_, q_exc0, _) = analytic_q(&c, &p, 0.0);
        assert_eq!(q_exc0, 0.0);
        for &t in &[0.0, 0.1, 0.5, 3.0] {
            let (a, b, q) = analytic_q(&c, &p, t);
            assert!((a + b - q).abs() < 1e-12);
        }
        let p0 = GeneratorParams { k_a: 0.0, ..params() };
        let c0 = flux_coefficients(&p0, 1.2, 1.0, stage(0.5), StageStart { psi: 1.05, e_fd: 1.2, delta_psi: 0.0 });
        for &t in &[0.0, 0.1, 0.5, 3.0] {
            assert!(analytic_q(&c0, &p0, t).1.abs() < 1e-15);
        }
    }

    #[test]
    fn resonant_case_is_continuous() {
        let base = params();
        let t_d = base.t_d_prime();
        let exact = GeneratorParams { t_e: t_d, ..base.clone() };
        let near = GeneratorParams { t_e: t_d * (1.0 + 1e-6), ..base };
        let start = StageStart { psi: 1.05, e_fd: 1.2, delta_psi: 0.0 };
        let c = flux_coefficients(&exact, 1.2, 1.0, stage(0.5), start);
        let d = flux_coefficients(&near, 1.2, 1.0, stage(0.5), start);
        assert!(c.resonant && !d.resonant);
        for &t in &[0.0, 0.2, 1.0] {
            assert!((analytic_flux(&c, t) - analytic_flux(&d, t)).abs() < 1e-5);
            assert!((flux_integral(&c, t) - flux_integral(&d, t)).abs() < 1e-5);
        }
        assert!((c.a1 + c.a3 - 1.05).abs() < 1e-12);
    }

    #[test]
    fn vrc_term_limits() {
        let p = params();
        let c = flux_coefficients(&p, 1.2, 1.0, stage(0.5), StageStart { psi: 1.05, e_fd: 1.2, delta_psi: 0.0 });
        let small = analytic_vrc_term(&c, 0.7, 1e-9);
        assert!((small - 0.7 * 1.05).abs() < 1e-8);
        let mut flat = c;
        flat.a1 = 0.0;
        flat.a2 = 0.0;
        assert!((analytic_vrc_term(&flat, 0.7, 0.4) - 0.7 * flat.a3).abs() < 1e-15);
    }

    #[test]
    fn motor_stage_integral() {
        let m = MotorStage { start: 0.9, target: 0.3, tau: 0.03 };
        let n = 20000;
        let h = 0.4 / n as f64;
        let quad: f64 = (0..n).map(|k| 0.5 * h * (m.flux(k as f64 * h) + m.flux((k + 1) as f64 * h))).sum();
        assert!((quad - m.integral(0.4)).abs() < 1e-8);
    }
}
