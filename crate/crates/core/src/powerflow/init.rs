use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::case::SystemCase;
use crate::error::{Error, Result};
use crate::models::generator::{from_dq, generator_xy_admittance, to_dq, GeneratorModel, GeneratorState};
use crate::models::motor::{MotorModel, MotorState};
use crate::network::{DeviceKind, NetworkDevice};

use super::PowerFlowSolution;

/// Initial d-axis transient flux from the terminal operating point.
pub fn initial_flux(p: f64, q: f64, v: f64, x_q: f64, x_d_prime: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::validation("V_g0", format!("must be positive, got {v}")));
    }
    let a = v * v + q * x_q;
    let num = v * a + (p * p * x_q + v * v * q + q * q * x_q) * x_d_prime / v;
    Ok(num / (p * x_q).hypot(a))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInit {
    pub id: String,
    pub bus: u32,
    pub bus_index: usize,
    pub delta: f64,
    pub omega: f64,
    #[serde(rename = "E_q0")]
    pub e_q0: f64,
    #[serde(rename = "E_fd0")]
    pub e_fd0: f64,
    pub psi_d0_prime: f64,
    #[serde(rename = "V_ref")]
    pub v_ref: f64,
    pub p: f64,
    pub q: f64,
    pub v_d: f64,
    pub v_q: f64,
    pub i_d: f64,
    pub i_q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotorInit {
    pub id: String,
    pub bus: u32,
    pub bus_index: usize,
    pub s0: f64,
    #[serde(rename = "E_prime0")]
    pub e_prime0: Complex64,
    #[serde(rename = "P_m")]
    pub p_m: f64,
    pub q0: f64,
    pub model: MotorModel,
}

/// Everything the dynamic stages need from the steady state.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicInit {
    pub pf: PowerFlowSolution,
    pub generators: Vec<GeneratorInit>,
    pub models: Vec<GeneratorModel>,
    pub motors: Vec<MotorInit>,
    /// Constant-admittance static load per bus.
    pub loads: Vec<Complex64>,
}

impl DynamicInit {
    pub fn generator_state(&self, k: usize) -> GeneratorState {
        let g = &self.generators[k];
        GeneratorState {
            psi: g.psi_d0_prime,
            e_fd: g.e_fd0,
            delta_psi: 0.0,
            delta: g.delta,
            omega: 1.0,
        }
    }

    pub fn motor_state(&self, k: usize) -> MotorState {
        MotorState {
            e: self.motors[k].e_prime0,
            s: self.motors[k].s0,
        }
    }

    pub fn n_devices(&self) -> usize {
        self.generators.len() + self.motors.len()
    }

    /// Device list for the extended network at the given generator angles
    /// (generators first, then motors at their pre-fault EMF angle).
    pub fn network_devices_at(&self, deltas: &[f64]) -> Vec<NetworkDevice> {
        let mut out: Vec<NetworkDevice> = self
            .generators
            .iter()
            .zip(&self.models)
            .zip(deltas)
            .map(|((g, m), &d)| {
                let a = generator_xy_admittance(m.params.x_q, m.params.x_d_prime, d);
                NetworkDevice {
                    id: g.id.clone(),
                    kind: DeviceKind::Generator,
                    bus: g.bus_index,
                    block: a.block(),
                    c: [a.c_x, a.c_y],
                }
            })
            .collect();
        out.extend(self.motors.iter().map(|m| {
            NetworkDevice::behind_reactance(
                m.id.clone(),
                DeviceKind::Motor,
                m.bus_index,
                m.model.x_prime,
                m.e_prime0.arg(),
            )
        }));
        out
    }

    pub fn network_devices(&self) -> Vec<NetworkDevice> {
        let d: Vec<f64> = self.generators.iter().map(|g| g.delta).collect();
        self.network_devices_at(&d)
    }

    /// Pre-fault internal flux of every device, in device order.
    pub fn initial_fluxes(&self) -> Vec<f64> {
        self.generators
            .iter()
            .map(|g| g.psi_d0_prime)
            .chain(self.motors.iter().map(|m| m.e_prime0.norm()))
            .collect()
    }

    pub fn device_ids(&self) -> Vec<String> {
        self.generators
            .iter()
            .map(|g| g.id.clone())
            .chain(self.motors.iter().map(|m| m.id.clone()))
            .collect()
    }
}

pub fn init_dynamics(case: &SystemCase, pf: &PowerFlowSolution) -> Result<DynamicInit> {
    let omega_s = 2.0 * std::f64::consts::PI * case.f0;
    let mut generators = Vec::new();
    let mut models = Vec::new();
    for p in case.in_service_generators() {
        let k = case.bus_index(p.bus).expect("validated");
        let d = pf.generator(&p.id).ok_or_else(|| Error::UnknownDevice {
            kind: "generator",
            id: p.id.clone(),
        })?;
        if d.q > p.q_max + 1e-6 {
            return Err(Error::ReactiveLimit {
                id: p.id.clone(),
                q: d.q,
                q_max: p.q_max,
            });
        }
        let v = pf.voltage(k);
        let i = Complex64::new(d.p, -d.q) / v.conj();
        let e_q_axis = v + Complex64::new(0.0, p.x_q) * i;
        let delta = e_q_axis.arg();
        let (v_d, v_q) = to_dq(v, delta);
        let (i_d, i_q) = to_dq(i, delta);
        let psi = v_q + p.x_d_prime * i_d;
        let check = initial_flux(d.p, d.q, v.norm(), p.x_q, p.x_d_prime)?;
        if (psi - check).abs() > 1e-10 * psi.abs().max(1.0) {
            return Err(Error::Inconsistent(format!(
                "generator {}: flux {psi} from dq projection vs {check} from terminal quantities",
                p.id
            )));
        }
        debug_assert!((from_dq(v_d, v_q, delta) - v).norm() < 1e-12);
        let e_q0 = psi + (p.x_d - p.x_d_prime) * i_d;
        generators.push(GeneratorInit {
            id: p.id.clone(),
            bus: p.bus,
            bus_index: k,
            delta,
            omega: 1.0,
            e_q0,
            e_fd0: e_q0,
            psi_d0_prime: psi,
            v_ref: v.norm(),
            p: d.p,
            q: d.q,
            v_d,
            v_q,
            i_d,
            i_q,
        });
        models.push(GeneratorModel {
            params: p.clone(),
            e_fd0: e_q0,
            v_ref: v.norm(),
            p_m: v_d * i_d + v_q * i_q,
            omega_s,
        });
    }

    let mut motors = Vec::new();
    let mut loads = Vec::with_capacity(case.buses.len());
    let mut motor_draw = vec![Complex64::new(0.0, 0.0); case.buses.len()];
    for mp in case.effective_motors() {
        let k = case.bus_index(mp.bus).expect("validated");
        let b = &case.buses[k];
        let p_m = b.motor_share * b.p_load;
        let v = pf.voltage(k);
        let mut model = MotorModel::new(&mp, case.f0, p_m)?;
        let st = model.steady_state(v, p_m)?;
        let s = model.power(&st, v);
        motor_draw[k] += s;
        motors.push(MotorInit {
            id: model.id.clone(),
            bus: mp.bus,
            bus_index: k,
            s0: st.s,
            e_prime0: st.e,
            p_m,
            q0: s.im,
            model,
        });
    }
    for (k, b) in case.buses.iter().enumerate() {
        let s = Complex64::new(b.p_load, b.q_load) - motor_draw[k];
        loads.push(s.conj() / (pf.vm[k] * pf.vm[k]));
    }
    Ok(DynamicInit {
        pf: pf.clone(),
        generators,
        models,
        motors,
        loads,
    })
}
