//! Third-order synchronous machine (transient flux `psi` behind `x'_d`,
//! saliency through `x_q`) with a proportional first-order exciter.
//!
//! dq convention: `V_d + j V_q = V e^{j(pi/2 - delta)}` in the network frame,
//! so `V_q` is the component along the q-axis at angle `delta`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::case::GeneratorParams;

/// Exciter ceiling used when a generator does not set its own.
pub const DEFAULT_EFD_MAX: f64 = 5.0;

/// A generator together with its initialization constants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorModel {
    pub params: GeneratorParams,
    pub e_fd0: f64,
    pub v_ref: f64,
    /// Mechanical power, equal to the initial electrical power.
    pub p_m: f64,
    /// Synchronous speed in rad/s.
    pub omega_s: f64,
}

impl GeneratorModel {
    pub fn e_fd_max(&self) -> f64 {
        self.params.e_fd_max.unwrap_or(DEFAULT_EFD_MAX)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratorState {
    pub psi: f64,
    pub e_fd: f64,
    /// Excitation-driven part of `psi` (shadow state).
    pub delta_psi: f64,
    pub delta: f64,
    pub omega: f64,
}

impl GeneratorState {
    pub fn psi_spn(&self) -> f64 {
        self.psi - self.delta_psi
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GeneratorDerivatives {
    pub psi: f64,
    pub e_fd: f64,
    pub delta_psi: f64,
    pub delta: f64,
    pub omega: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatorOutputs {
    pub i_d: f64,
    pub i_q: f64,
    pub p: f64,
    pub q: f64,
    pub e_q: f64,
}

/// Projects a network-frame phasor onto the machine's dq axes.
pub fn to_dq(v: Complex64, delta: f64) -> (f64, f64) {
    let r = v * Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_2 - delta);
    (r.re, r.im)
}

/// Inverse of [`to_dq`].
pub fn from_dq(d: f64, q: f64, delta: f64) -> Complex64 {
    Complex64::new(d, q) * Complex64::from_polar(1.0, delta - std::f64::consts::FRAC_PI_2)
}

pub fn stator_algebra(psi: f64, v_d: f64, v_q: f64, params: &GeneratorParams) -> StatorOutputs {
    let i_d = (psi - v_q) / params.x_d_prime;
    let i_q = v_d / params.x_q;
    StatorOutputs {
        i_d,
        i_q,
        p: v_d * i_d + v_q * i_q,
        q: v_q * i_d - v_d * i_q,
        e_q: psi + (params.x_d - params.x_d_prime) * i_d,
    }
}

/// Splits the reactive output into the part carried by the spontaneous flux
/// and the part carried by the excitation-driven flux change.
pub fn decompose_q(state: &GeneratorState, v_d: f64, v_q: f64, params: &GeneratorParams) -> (f64, f64) {
    let x = params.x_d_prime;
    let q_spon = (v_q * state.psi_spn() - v_q * v_q) / x - v_d * v_d / params.x_q;
    let q_exc = v_q * state.delta_psi / x;
    (q_spon, q_exc)
}

/// Flux, exciter and shadow-flux derivatives. Rotor terms are left at zero;
/// see [`swing_derivatives`].
pub fn generator_derivatives(
    state: &GeneratorState,
    v_d: f64,
    v_q: f64,
    model: &GeneratorModel,
) -> GeneratorDerivatives {
    let p = &model.params;
    let out = stator_algebra(state.psi, v_d, v_q, p);
    let v = v_d.hypot(v_q);
    let mut d_efd = (model.e_fd0 + p.k_a * (model.v_ref - v) - state.e_fd) / p.t_e;
    if (state.e_fd >= model.e_fd_max() && d_efd > 0.0) || (state.e_fd <= 0.0 && d_efd < 0.0) {
        d_efd = 0.0;
    }
    GeneratorDerivatives {
        psi: (state.e_fd - out.e_q) / p.t_d0_prime,
        e_fd: d_efd,
        delta_psi: ((state.e_fd - model.e_fd0) - p.x_d / p.x_d_prime * state.delta_psi)
            / p.t_d0_prime,
        delta: 0.0,
        omega: 0.0,
    }
}

/// Classical swing equation.
pub fn swing_derivatives(state: &GeneratorState, p_e: f64, model: &GeneratorModel) -> (f64, f64) {
    let p = &model.params;
    let dw = state.omega - 1.0;
    (
        model.omega_s * dw,
        (model.p_m - p_e - p.d * dw) / (2.0 * p.h),
    )
}

/// Internal admittance of a salient machine in network xy coordinates.
///
/// Injected current is `[I_x, I_y] = [C_x, C_y] psi - [[G_x, B_x], [B_y, G_y]] [V_x, V_y]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XyAdmittance {
    pub g_x: f64,
    pub g_y: f64,
    pub b_x: f64,
    pub b_y: f64,
    pub c_x: f64,
    pub c_y: f64,
}

impl XyAdmittance {
    pub fn block(&self) -> [[f64; 2]; 2] {
        [[self.g_x, self.b_x], [self.b_y, self.g_y]]
    }
}

pub fn generator_xy_admittance(x_q: f64, x_d_prime: f64, delta: f64) -> XyAdmittance {
    let (s, c) = delta.sin_cos();
    let den = x_q * x_d_prime;
    let sal = x_q - x_d_prime;
    let g_x = sal * s * c / den;
    XyAdmittance {
        g_x,
        g_y: -g_x,
        b_x: (x_d_prime + sal * s * s) / den,
        b_y: -(x_d_prime + sal * c * c) / den,
        c_x: s / x_d_prime,
        c_y: -c / x_d_prime,
    }
}
