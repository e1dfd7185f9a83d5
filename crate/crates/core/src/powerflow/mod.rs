//! Newton-Raphson AC power flow in polar coordinates, plus initialization
//! of the dynamic devices from its solution.

mod init;

pub use init::{initial_flux, init_dynamics, DynamicInit, GeneratorInit, MotorInit};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::case::{BusKind, SystemCase};
use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::network::{build_ybus, Ybus};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowOptions {
    pub tolerance: f64,
    pub max_iter: usize,
    pub enforce_q_max: bool,
}

impl Default for PowerFlowOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iter: 20,
            enforce_q_max: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorDispatch {
    pub id: String,
    pub bus: u32,
    #[serde(rename = "P_g0")]
    pub p: f64,
    #[serde(rename = "Q_g0")]
    pub q: f64,
    /// Held at `Q_max` after PV to PQ conversion.
    pub at_q_max: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowSolution {
    pub bus_ids: Vec<u32>,
    pub vm: Vec<f64>,
    pub va: Vec<f64>,
    pub generators: Vec<GeneratorDispatch>,
    pub mismatch: f64,
    pub iterations: usize,
}

impl PowerFlowSolution {
    pub fn voltage(&self, k: usize) -> Complex64 {
        Complex64::from_polar(self.vm[k], self.va[k])
    }

    pub fn voltages(&self) -> Vec<Complex64> {
        (0..self.vm.len()).map(|k| self.voltage(k)).collect()
    }

    pub fn generator(&self, id: &str) -> Option<&GeneratorDispatch> {
        self.generators.iter().find(|g| g.id == id)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Role {
    Slack,
    Pv,
    Pq,
}

pub fn solve_power_flow(case: &SystemCase) -> Result<PowerFlowSolution> {
    solve_power_flow_with(case, &PowerFlowOptions::default())
}

pub fn solve_power_flow_with(case: &SystemCase, opts: &PowerFlowOptions) -> Result<PowerFlowSolution> {
    case.validate()?;
    let n = case.buses.len();
    let y = build_ybus(case, None);
    let gens: Vec<_> = case.in_service_generators().collect();

    let mut role: Vec<Role> = case
        .buses
        .iter()
        .map(|b| match b.kind {
            BusKind::Slack => Role::Slack,
            _ => Role::Pq,
        })
        .collect();
    // Generator-owned PV control; bus kind PV without an in-service
    // voltage-controlling generator degrades to PQ.
    let mut p_spec: Vec<f64> = case.buses.iter().map(|b| -b.p_load).collect();
    let mut q_spec: Vec<f64> = case.buses.iter().map(|b| -b.q_load).collect();
    for g in &gens {
        let k = case.bus_index(g.bus).expect("validated");
        p_spec[k] += if g.is_condenser { 0.0 } else { g.p_g0 };
        match g.q_g0 {
            Some(q) => q_spec[k] += q,
            None if role[k] != Role::Slack => role[k] = Role::Pv,
            None => {}
        }
    }
    let mut vm: Vec<f64> = case
        .buses
        .iter()
        .zip(&role)
        .map(|(b, r)| if *r == Role::Pq { 1.0 } else { b.v_set.unwrap_or(1.0) })
        .collect();
    let mut va = vec![0.0; n];
    let mut at_max = vec![false; n];
    let mut total_iter = 0;

    loop {
        let (iters, mismatch) = newton(&y, &role, &p_spec, &q_spec, &mut vm, &mut va, opts, total_iter)?;
        total_iter += iters;
        if !opts.enforce_q_max {
            return Ok(finish(case, &y, &vm, &va, &at_max, mismatch, total_iter));
        }
        let v = polar(&vm, &va);
        let s = injections(&y, &v);
        let mut switched = false;
        for k in 0..n {
            if role[k] != Role::Pv {
                continue;
            }
            let q_gen = s[k].im + case.buses[k].q_load;
            let (q_max, fixed) = bus_q_capacity(case, case.buses[k].id);
            if q_gen > q_max + fixed + 1e-9 {
                role[k] = Role::Pq;
                q_spec[k] += q_max;
                at_max[k] = true;
                switched = true;
            }
        }
        if !switched {
            return Ok(finish(case, &y, &vm, &va, &at_max, mismatch, total_iter));
        }
    }
}

/// `(sum of Q_max of voltage-controlling units, sum of fixed Q)` at a bus.
fn bus_q_capacity(case: &SystemCase, bus: u32) -> (f64, f64) {
    case.in_service_generators()
        .filter(|g| g.bus == bus)
        .fold((0.0, 0.0), |(m, f), g| match g.q_g0 {
            Some(q) => (m, f + q),
            None => (m + g.q_max, f),
        })
}

fn polar(vm: &[f64], va: &[f64]) -> Vec<Complex64> {
    vm.iter().zip(va).map(|(m, a)| Complex64::from_polar(*m, *a)).collect()
}

fn injections(y: &Ybus, v: &[Complex64]) -> Vec<Complex64> {
    let i = y.mul_vec(v);
    v.iter().zip(&i).map(|(v, i)| v * i.conj()).collect()
}

#[allow(clippy::too_many_arguments)]
fn newton(
    y: &Ybus,
    role: &[Role],
    p_spec: &[f64],
    q_spec: &[f64],
    vm: &mut [f64],
    va: &mut [f64],
    opts: &PowerFlowOptions,
    used: usize,
) -> Result<(usize, f64)> {
    let n = y.len();
    let pvpq: Vec<usize> = (0..n).filter(|&k| role[k] != Role::Slack).collect();
    let pq: Vec<usize> = (0..n).filter(|&k| role[k] == Role::Pq).collect();
    let mut col_a = vec![usize::MAX; n];
    let mut col_m = vec![usize::MAX; n];
    for (c, &k) in pvpq.iter().enumerate() {
        col_a[k] = c;
    }
    for (c, &k) in pq.iter().enumerate() {
        col_m[k] = pvpq.len() + c;
    }
    let dim = pvpq.len() + pq.len();

    let mismatch = |vm: &[f64], va: &[f64]| -> (Vec<f64>, f64) {
        let s = injections(y, &polar(vm, va));
        let mut f = Vec::with_capacity(dim);
        f.extend(pvpq.iter().map(|&k| s[k].re - p_spec[k]));
        f.extend(pq.iter().map(|&k| s[k].im - q_spec[k]));
        let norm = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        (f, norm)
    };

    let (mut f, mut norm) = mismatch(vm, va);
    let mut it = 0;
    while norm > opts.tolerance {
        if used + it >= opts.max_iter {
            return Err(Error::NonConvergence {
                iterations: used + it,
                mismatch: norm,
            });
        }
        let v = polar(vm, va);
        let ibus = y.mul_vec(&v);
        let mut jac = Matrix::zeros(dim, dim);
        // dS_i/dVa_j and dS_i/dVm_j, standard polar derivatives.
        for i in 0..n {
            if role[i] == Role::Slack {
                continue;
            }
            for j in 0..n {
                let yij = y.get(i, j);
                let unit_j = v[j] / vm[j];
                let mut ds_da = -Complex64::i() * v[i] * (yij * v[j]).conj();
                let mut ds_dm = v[i] * (yij * unit_j).conj();
                if i == j {
                    ds_da += Complex64::i() * v[i] * ibus[i].conj();
                    ds_dm += ibus[i].conj() * unit_j;
                }
                if ds_da == Complex64::new(0.0, 0.0) && ds_dm == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let rp = col_a[i];
                let rq = col_m[i];
                if col_a[j] != usize::MAX {
                    jac[(rp, col_a[j])] = ds_da.re;
                    if rq != usize::MAX {
                        jac[(rq, col_a[j])] = ds_da.im;
                    }
                }
                if col_m[j] != usize::MAX {
                    jac[(rp, col_m[j])] = ds_dm.re;
                    if rq != usize::MAX {
                        jac[(rq, col_m[j])] = ds_dm.im;
                    }
                }
            }
        }
        let lu = Lu::factor(&jac).map_err(|p| {
            let bus = if p.index < pvpq.len() {
                pvpq[p.index]
            } else {
                pq[p.index - pvpq.len()]
            };
            Error::Singular {
                context: "power-flow Jacobian".into(),
                location: format!("bus {}", y.bus_ids[bus]),
            }
        })?;
        let dx = lu.solve(&f);
        for &k in &pvpq {
            va[k] -= dx[col_a[k]];
        }
        for &k in &pq {
            vm[k] -= dx[col_m[k]];
        }
        it += 1;
        (f, norm) = mismatch(vm, va);
        if !norm.is_finite() {
            return Err(Error::NonConvergence {
                iterations: used + it,
                mismatch: norm,
            });
        }
    }
    Ok((it, norm))
}

fn finish(
    case: &SystemCase,
    y: &Ybus,
    vm: &[f64],
    va: &[f64],
    at_max: &[bool],
    mismatch: f64,
    iterations: usize,
) -> PowerFlowSolution {
    let s = injections(y, &polar(vm, va));
    let mut generators = Vec::new();
    for (k, b) in case.buses.iter().enumerate() {
        let units: Vec<_> = case.in_service_generators().filter(|g| g.bus == b.id).collect();
        if units.is_empty() {
            continue;
        }
        let p_total = s[k].re + b.p_load;
        let q_total = s[k].im + b.q_load;
        let p_sched: f64 = units.iter().map(|g| if g.is_condenser { 0.0 } else { g.p_g0 }).sum();
        let fixed: f64 = units.iter().filter_map(|g| g.q_g0).sum();
        let q_cap: f64 = units.iter().filter(|g| g.q_g0.is_none()).map(|g| g.q_max).sum();
        let n_ctrl = units.iter().filter(|g| g.q_g0.is_none()).count();
        let slack = b.kind == BusKind::Slack;
        for g in &units {
            let p_own = if g.is_condenser { 0.0 } else { g.p_g0 };
            // The slack residual goes to the non-condenser units in
            // proportion to their schedule (equally if all zero).
            let p = if slack {
                let share = if p_sched.abs() > 0.0 {
                    p_own / p_sched
                } else if g.is_condenser {
                    0.0
                } else {
                    1.0 / units.iter().filter(|u| !u.is_condenser).count().max(1) as f64
                };
                p_total * share
            } else {
                p_own
            };
            let q = match g.q_g0 {
                Some(q) => q,
                None if q_cap > 0.0 => (q_total - fixed) * g.q_max / q_cap,
                None => (q_total - fixed) / n_ctrl as f64,
            };
            generators.push(GeneratorDispatch {
                id: g.id.clone(),
                bus: g.bus,
                p,
                q,
                at_q_max: at_max[k] && g.q_g0.is_none(),
            });
        }
    }
    PowerFlowSolution {
        bus_ids: case.buses.iter().map(|b| b.id).collect(),
        vm: vm.to_vec(),
        va: va.to_vec(),
        generators,
        mismatch,
        iterations,
    }
}
