//! First-order induction motor: transient EMF `E'` behind `X'`, rotor
//! slip `s`.
//!
//! Sign convention: `I = (V - E') / (jX')` is the current drawn by the
//! motor, and the network frame rotates at synchronous speed, so
//!
//! ```text
//! T'_0 dE'/dt = -(E' - j(X - X') I) - j w_s s T'_0 E'
//! 2H ds/dt    = T_m(s) - Re(E' conj(I))
//! ```
//!
//! which puts the steady state at `E' = C V` with
//! `C = a / (1 + a + j w_s s T'_0)`, `a = (X - X') / X'`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::case::MotorParams;
use crate::error::{Error, Result};

/// Lower bound on the initial slip.
pub const SLIP_FLOOR: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotorCoefficients {
    pub x: f64,
    pub x_prime: f64,
    pub x_mu: f64,
    pub c_r: f64,
    pub c_i: f64,
    pub k_z: Option<f64>,
}

fn reactances(params: &MotorParams, f0: f64) -> Result<(f64, f64, f64)> {
    let x_mu = params.x_mu(f0);
    if !(x_mu > 0.0) {
        return Err(Error::validation(
            "motor.T_0_prime",
            format!("implied magnetizing reactance {x_mu} is not positive"),
        ));
    }
    let x = params.x1 + x_mu;
    let x_prime = if params.x2.is_infinite() {
        x
    } else {
        params.x1 + params.x2 * x_mu / (params.x2 + x_mu)
    };
    Ok((x, x_prime, x_mu))
}

/// Reactances and steady-state ratio `C = E'/V` at slip `s0`, in the base
/// of `params`. `K_Z` is evaluated when `p_m` is given (same base).
pub fn motor_coefficients(
    params: &MotorParams,
    f0: f64,
    s0: f64,
    v_ld0: f64,
    p_m: Option<f64>,
) -> Result<MotorCoefficients> {
    let (x, x_prime, x_mu) = reactances(params, f0)?;
    let a = (x - x_prime) / x_prime;
    let c = -a / Complex64::new(-1.0 - a, -2.0 * PI * f0 * s0 * params.t0_prime);
    let k_z = match p_m {
        None => None,
        Some(0.0) => {
            return Err(Error::validation("motor.P_m", "K_Z needs a nonzero motor power"))
        }
        Some(p) => Some(-c.im * v_ld0 * v_ld0 / (p * x_prime)),
    };
    Ok(MotorCoefficients {
        x,
        x_prime,
        x_mu,
        c_r: c.re,
        c_i: c.im,
        k_z,
    })
}

/// A motor converted to the system base, with its torque law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotorModel {
    pub id: String,
    pub bus: u32,
    pub x: f64,
    pub x_prime: f64,
    pub t0: f64,
    /// Inertia on the system base.
    pub h: f64,
    pub k: f64,
    pub omega_s: f64,
    /// Rating in system per unit.
    pub rating: f64,
    /// `T_m = t_m_coef * (1 - s)^k`.
    pub t_m_coef: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MotorState {
    pub e: Complex64,
    pub s: f64,
}

impl MotorModel {
    /// Builds the model for a motor drawing `p_m` (system pu). The torque
    /// coefficient is set later by [`MotorModel::steady_state`].
    pub fn new(params: &MotorParams, f0: f64, p_m: f64) -> Result<Self> {
        let (x, x_prime, _) = reactances(params, f0)?;
        if !(params.load_factor > 0.0) {
            return Err(Error::validation("motor.load_factor", "must be positive"));
        }
        // Unloaded motors still need a rating to set the base.
        let rating = (p_m / params.load_factor).max(1e-6);
        Ok(Self {
            id: params.ident(),
            bus: params.bus,
            x: x / rating,
            x_prime: x_prime / rating,
            t0: params.t0_prime,
            h: params.h_m * rating,
            k: params.load_torque_exponent,
            omega_s: 2.0 * PI * f0,
            rating,
            t_m_coef: 0.0,
        })
    }

    pub fn a(&self) -> f64 {
        (self.x - self.x_prime) / self.x_prime
    }

    /// Steady-state `E'/V` at slip `s`.
    pub fn c(&self, s: f64) -> Complex64 {
        let a = self.a();
        a / Complex64::new(1.0 + a, self.omega_s * s * self.t0)
    }

    /// Electrical power drawn at steady slip `s` and voltage magnitude `v`.
    pub fn steady_power(&self, s: f64, v: f64) -> f64 {
        -self.c(s).im * v * v / self.x_prime
    }

    /// Slip of maximum electrical power.
    pub fn peak_slip(&self) -> f64 {
        (1.0 + self.a()) / (self.omega_s * self.t0)
    }

    pub fn current(&self, state: &MotorState, v: Complex64) -> Complex64 {
        (v - state.e) / Complex64::new(0.0, self.x_prime)
    }

    pub fn mechanical_torque(&self, s: f64) -> f64 {
        self.t_m_coef * (1.0 - s).max(0.0).powf(self.k)
    }

    /// Solves the stable steady slip for power `p` at voltage `v` by
    /// bisection on `(SLIP_FLOOR, peak)`, then sets the torque coefficient.
    pub fn steady_state(&mut self, v: Complex64, p: f64) -> Result<MotorState> {
        let vm = v.norm();
        let hi = self.peak_slip().min(1.0 - 1e-9);
        let f = |s: f64| self.steady_power(s, vm) - p;
        let s = if f(SLIP_FLOOR) >= 0.0 {
            SLIP_FLOOR
        } else if f(hi) < 0.0 {
            return Err(Error::MotorStall {
                id: self.id.clone(),
                reason: format!(
                    "demand {p:.4} pu exceeds the {:.4} pu available at V = {vm:.4}",
                    f(hi) + p
                ),
            });
        } else {
            let (mut lo, mut up) = (SLIP_FLOOR, hi);
            for _ in 0..200 {
                let mid = 0.5 * (lo + up);
                if f(mid) < 0.0 {
                    lo = mid;
                } else {
                    up = mid;
                }
                if up - lo <= 1e-16 * up {
                    break;
                }
            }
            0.5 * (lo + up)
        };
        let state = MotorState { e: self.c(s) * v, s };
        let t_e = self.electrical_torque(&state, v);
        self.t_m_coef = t_e / (1.0 - s).powf(self.k);
        Ok(state)
    }

    pub fn electrical_torque(&self, state: &MotorState, v: Complex64) -> f64 {
        (state.e * self.current(state, v).conj()).re
    }

    /// Complex power drawn from the bus.
    pub fn power(&self, state: &MotorState, v: Complex64) -> Complex64 {
        v * self.current(state, v).conj()
    }
}

pub fn motor_derivatives(state: &MotorState, v: Complex64, model: &MotorModel) -> (Complex64, f64) {
    let i = model.current(state, v);
    let j = Complex64::new(0.0, 1.0);
    let de = -(state.e - j * (model.x - model.x_prime) * i) / model.t0
        - j * model.omega_s * state.s * state.e;
    let ds = (model.mechanical_torque(state.s) - model.electrical_torque(state, v)) / (2.0 * model.h);
    (de, ds)
}
