//! Independent reference computations shared by the test suites.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stvs_core::analytic::{analytic_delta_psi, analytic_e_fd, analytic_flux, flux_coefficients, StageStart, StageVoltage};
use stvs_core::case::GeneratorParams;

/// Phasor construction: current from the terminal power, rotor angle from
/// `V + j x_q I`, flux as `V_q + x'_d I_d`.
pub fn phasor_oracle(p: f64, q: f64, v: f64, x_q: f64, x_dp: f64) -> f64 {
    let vv = Complex64::new(v, 0.0);
    let i = Complex64::new(p, -q) / vv.conj();
    let e = vv + Complex64::new(0.0, x_q) * i;
    let rot = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_2 - e.arg());
    let (vdq, idq) = (vv * rot, i * rot);
    vdq.im + x_dp * idq.re
}

pub fn machine(x_d: f64, x_dp: f64, t_d0: f64, k_a: f64, t_e: f64) -> GeneratorParams {
    serde_json::from_value(serde_json::json!({
        "id": "G", "bus": 1, "x_d": x_d, "x_d_prime": x_dp, "x_q": 0.9 * x_d, "x_ad": x_d - 0.15,
        "T_d0_prime": t_d0, "K_A": k_a, "T_e": t_e, "Q_max": 5.0
    }))
    .unwrap()
}

pub fn stage(v: f64, angle: f64) -> StageVoltage {
    StageVoltage { v, v_d: v * angle.sin(), v_q: v * angle.cos() }
}

/// Flux and exciter equations integrated directly, with the stage voltage
/// held fixed. State: `[psi, E_fd]`.
pub fn ode(p: &GeneratorParams, e_fd0: f64, v0: f64, s: StageVoltage) -> impl Fn(&[f64; 2]) -> [f64; 2] + '_ {
    move |x| {
        let i_d = (x[0] - s.v_q) / p.x_d_prime;
        let e_q = x[0] + (p.x_d - p.x_d_prime) * i_d;
        [
            (x[1] - e_q) / p.t_d0_prime,
            (e_fd0 + p.k_a * (v0 - s.v) - x[1]) / p.t_e,
        ]
    }
}

pub struct Draw {
    pub p: GeneratorParams,
    pub e_fd0: f64,
    pub v0: f64,
    pub psi0: f64,
    pub flt: StageVoltage,
    pub clr: StageVoltage,
    pub t_flt: f64,
}

pub fn draw(rng: &mut ChaCha8Rng) -> Draw {
    let x_d = rng.gen_range(1.0..2.4);
    let p = machine(
        x_d,
        rng.gen_range(0.15..0.45),
        rng.gen_range(2.0..10.0),
        rng.gen_range(0.0..80.0),
        rng.gen_range(0.02..1.5),
    );
    let v0 = rng.gen_range(0.95..1.08);
    let angle = rng.gen_range(0.0..1.2);
    let v_flt = rng.gen_range(0.0..v0);
    Draw {
        e_fd0: rng.gen_range(1.0..3.5),
        psi0: rng.gen_range(0.8..1.3),
        flt: stage(v_flt, angle),
        clr: stage(rng.gen_range(v_flt..v0 + 0.02), angle + rng.gen_range(-0.2..0.2)),
        t_flt: rng.gen_range(0.05..0.3),
        v0,
        p,
    }
}

/// Maximum flux error of the two-stage closed form against the ODE oracle,
/// sampled every 5 ms over the fault and the first second after clearing.
pub fn max_two_stage_error(d: &Draw) -> f64 {
    let h = 1e-4;
    let start = StageStart { psi: d.psi0, e_fd: d.e_fd0, delta_psi: 0.0 };
    let c1 = flux_coefficients(&d.p, d.e_fd0, d.v0, d.flt, start);
    let f1 = ode(&d.p, d.e_fd0, d.v0, d.flt);
    let mut x = [d.psi0, d.e_fd0];
    let mut worst: f64 = 0.0;
    let n1 = (d.t_flt / h).round() as usize;
    let mut k = 0;
    while k < n1 {
        let step = 50.min(n1 - k);
        x = super::rk4(&f1, x, h, step);
        k += step;
        worst = worst.max((analytic_flux(&c1, k as f64 * h) - x[0]).abs());
    }
    let t1 = n1 as f64 * h;
    let start2 = StageStart {
        psi: analytic_flux(&c1, t1),
        e_fd: analytic_e_fd(&c1, t1),
        delta_psi: analytic_delta_psi(&c1, t1),
    };
    let c2 = flux_coefficients(&d.p, d.e_fd0, d.v0, d.clr, start2);
    let f2 = ode(&d.p, d.e_fd0, d.v0, d.clr);
    for k in 1..=200 {
        x = super::rk4(&f2, x, h, 50);
        worst = worst.max((analytic_flux(&c2, k as f64 * 50.0 * h) - x[0]).abs());
    }
    worst
}
