//! Reference time-domain simulator.
//!
//! Each derivative evaluation solves the extended network for the bus
//! voltages given the device internal sources, then evaluates the device
//! models. Topology switches happen on grid points; device states are
//! carried across unchanged.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::case::{FaultScenario, SystemCase};
use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::models::generator::{
    decompose_q, generator_derivatives, generator_xy_admittance, stator_algebra, swing_derivatives, to_dq,
    GeneratorState,
};
use crate::models::motor::{motor_derivatives, MotorState};
use crate::network::{build_stage, ExtendedNetwork, StageTag, TopologyStage};
use crate::powerflow::DynamicInit;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Rk4,
    Trapezoidal,
}

impl std::str::FromStr for Integrator {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rk4" => Ok(Integrator::Rk4),
            "trapezoidal" | "trap" => Ok(Integrator::Trapezoidal),
            other => Err(format!("unknown integrator `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    pub swing_enabled: bool,
    pub record_stride: usize,
    /// Abort when any `|psi|` exceeds this (pu).
    pub divergence_limit: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 3.0,
            integrator: Integrator::Rk4,
            swing_enabled: true,
            record_stride: 1,
            divergence_limit: 10.0,
        }
    }
}

impl SimOptions {
    pub fn validate(&self, scenario: Option<&FaultScenario>) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::validation("options.dt", "must be positive"));
        }
        if self.record_stride == 0 {
            return Err(Error::validation("options.record_stride", "must be at least 1"));
        }
        if let Some(s) = scenario {
            if !(self.t_end > s.t_clr) {
                return Err(Error::validation("options.t_end", "must exceed the clearing time"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenSample {
    pub psi: f64,
    pub e_fd: f64,
    pub e_q: f64,
    pub v_d: f64,
    pub v_q: f64,
    pub i_d: f64,
    pub i_q: f64,
    pub p: f64,
    pub q: f64,
    pub q_spon: f64,
    pub q_exc: f64,
    pub delta_psi: f64,
    pub delta: f64,
    pub omega: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MotorSample {
    pub e: Complex64,
    pub slip: f64,
    pub p: f64,
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub stage: StageTag,
    pub v: Vec<Complex64>,
    pub gens: Vec<GenSample>,
    pub motors: Vec<MotorSample>,
}

impl Sample {
    /// Internal flux of every device: generator `psi`, motor `|E'|`.
    pub fn fluxes(&self) -> Vec<f64> {
        self.gens
            .iter()
            .map(|g| g.psi)
            .chain(self.motors.iter().map(|m| m.e.norm()))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub event: String,
    pub t: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub bus_ids: Vec<u32>,
    pub gen_ids: Vec<String>,
    pub motor_ids: Vec<String>,
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.bus_ids.iter().position(|&b| b == id)
    }

    pub fn gen_index(&self, id: &str) -> Option<usize> {
        self.gen_ids.iter().position(|g| g == id)
    }

    pub fn vmag(&self, bus: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.v[bus].norm()).collect()
    }

    /// Event log as JSON lines.
    pub fn event_log(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("plain struct") + "\n")
            .collect()
    }
}

/// Extended network of one stage, reusable across generator angles.
///
/// Without rotor swing the factorization is exact and reused. With swing,
/// the factorization at a reference angle set acts as a preconditioner for
/// iterative refinement against the true matrix, and is refreshed when the
/// angles drift.
struct StageSolver {
    base: Matrix,
    lu: Lu,
    ref_deltas: Vec<f64>,
    tag: StageTag,
}

const REFACTOR_DRIFT: f64 = 0.02;

impl StageSolver {
    fn new(stage: &TopologyStage, init: &DynamicInit, deltas: &[f64]) -> Result<Self> {
        let mut base = stage.y.to_xy();
        for m in &init.motors {
            let k = m.bus_index;
            let b = 1.0 / m.model.x_prime;
            base.add_at(2 * k, 2 * k + 1, b);
            base.add_at(2 * k + 1, 2 * k, -b);
        }
        let lu = Self::factor(&base, init, deltas, stage)?;
        Ok(Self {
            base,
            lu,
            ref_deltas: deltas.to_vec(),
            tag: stage.tag,
        })
    }

    fn full(base: &Matrix, init: &DynamicInit, deltas: &[f64]) -> Matrix {
        let mut a = base.clone();
        for (g, (m, d)) in init.generators.iter().zip(init.models.iter().zip(deltas)) {
            let blk = generator_xy_admittance(m.params.x_q, m.params.x_d_prime, *d).block();
            let k = g.bus_index;
            for r in 0..2 {
                for c in 0..2 {
                    a.add_at(2 * k + r, 2 * k + c, blk[r][c]);
                }
            }
        }
        a
    }

    fn factor(base: &Matrix, init: &DynamicInit, deltas: &[f64], stage: &TopologyStage) -> Result<Lu> {
        Lu::factor(&Self::full(base, init, deltas)).map_err(|p| Error::Singular {
            context: format!("network solve ({} stage)", stage.tag.as_str()),
            location: format!("bus {}", stage.y.bus_ids[p.index / 2]),
        })
    }

    fn apply(&self, init: &DynamicInit, deltas: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = self.base.mul_vec(x);
        for (g, (m, d)) in init.generators.iter().zip(init.models.iter().zip(deltas)) {
            let blk = generator_xy_admittance(m.params.x_q, m.params.x_d_prime, *d).block();
            let k = g.bus_index;
            for r in 0..2 {
                y[2 * k + r] += blk[r][0] * x[2 * k] + blk[r][1] * x[2 * k + 1];
            }
        }
        y
    }

    fn solve(&mut self, init: &DynamicInit, deltas: &[f64], rhs: &[f64], swing: bool) -> Result<Vec<Complex64>> {
        if !swing {
            return Ok(to_complex(&self.lu.solve(rhs)));
        }
        let drift = deltas
            .iter()
            .zip(&self.ref_deltas)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if drift > 0.0 {
            if drift > REFACTOR_DRIFT {
                self.refactor(init, deltas)?;
            } else {
                let scale = rhs.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
                let mut x = self.lu.solve(rhs);
                for _ in 0..50 {
                    let ax = self.apply(init, deltas, &x);
                    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
                    let res = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                    if res <= 1e-13 * scale {
                        return Ok(to_complex(&x));
                    }
                    self.lu.solve_in_place(&mut r);
                    x.iter_mut().zip(&r).for_each(|(x, d)| *x += d);
                }
                self.refactor(init, deltas)?;
            }
        }
        Ok(to_complex(&self.lu.solve(rhs)))
    }

    fn refactor(&mut self, init: &DynamicInit, deltas: &[f64]) -> Result<()> {
        self.lu = Lu::factor(&Self::full(&self.base, init, deltas)).map_err(|p| Error::Singular {
            context: format!("network solve ({} stage)", self.tag.as_str()),
            location: format!("unknown {}", p.index),
        })?;
        self.ref_deltas = deltas.to_vec();
        Ok(())
    }
}

fn to_complex(x: &[f64]) -> Vec<Complex64> {
    x.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

const GEN_STATES: usize = 5;
const MOTOR_STATES: usize = 3;

struct Engine<'a> {
    init: &'a DynamicInit,
    n_bus: usize,
    swing: bool,
}

impl Engine<'_> {
    fn unpack_gen(&self, x: &[f64], k: usize) -> GeneratorState {
        let o = k * GEN_STATES;
        GeneratorState {
            psi: x[o],
            e_fd: x[o + 1],
            delta_psi: x[o + 2],
            delta: x[o + 3],
            omega: x[o + 4],
        }
    }

    fn unpack_motor(&self, x: &[f64], k: usize) -> MotorState {
        let o = self.init.generators.len() * GEN_STATES + k * MOTOR_STATES;
        MotorState {
            e: Complex64::new(x[o], x[o + 1]),
            s: x[o + 2],
        }
    }

    fn initial_state(&self) -> Vec<f64> {
        let mut x = Vec::new();
        for k in 0..self.init.generators.len() {
            let s = self.init.generator_state(k);
            x.extend([s.psi, s.e_fd, s.delta_psi, s.delta, s.omega]);
        }
        for k in 0..self.init.motors.len() {
            let s = self.init.motor_state(k);
            x.extend([s.e.re, s.e.im, s.s]);
        }
        x
    }

    fn deltas(&self, x: &[f64]) -> Vec<f64> {
        (0..self.init.generators.len()).map(|k| x[k * GEN_STATES + 3]).collect()
    }

    fn voltages(&self, solver: &mut StageSolver, x: &[f64]) -> Result<Vec<Complex64>> {
        let mut rhs = vec![0.0; 2 * self.n_bus];
        for (k, (g, m)) in self.init.generators.iter().zip(&self.init.models).enumerate() {
            let s = self.unpack_gen(x, k);
            let a = generator_xy_admittance(m.params.x_q, m.params.x_d_prime, s.delta);
            rhs[2 * g.bus_index] += a.c_x * s.psi;
            rhs[2 * g.bus_index + 1] += a.c_y * s.psi;
        }
        for (k, m) in self.init.motors.iter().enumerate() {
            let s = self.unpack_motor(x, k);
            rhs[2 * m.bus_index] += s.e.im / m.model.x_prime;
            rhs[2 * m.bus_index + 1] -= s.e.re / m.model.x_prime;
        }
        solver.solve(self.init, &self.deltas(x), &rhs, self.swing)
    }

    fn derivatives(&self, solver: &mut StageSolver, x: &[f64]) -> Result<Vec<f64>> {
        let v = self.voltages(solver, x)?;
        let mut dx = vec![0.0; x.len()];
        for (k, (g, m)) in self.init.generators.iter().zip(&self.init.models).enumerate() {
            let s = self.unpack_gen(x, k);
            let (vd, vq) = to_dq(v[g.bus_index], s.delta);
            let d = generator_derivatives(&s, vd, vq, m);
            let o = k * GEN_STATES;
            dx[o] = d.psi;
            dx[o + 1] = d.e_fd;
            // The excitation-driven part is measured from fault inception.
            if solver.tag != StageTag::Pre {
                dx[o + 2] = d.delta_psi;
            }
            if self.swing {
                let p_e = stator_algebra(s.psi, vd, vq, &m.params).p;
                let (dd, dw) = swing_derivatives(&s, p_e, m);
                dx[o + 3] = dd;
                dx[o + 4] = dw;
            }
        }
        let o0 = self.init.generators.len() * GEN_STATES;
        for (k, m) in self.init.motors.iter().enumerate() {
            let s = self.unpack_motor(x, k);
            let (de, mut ds) = motor_derivatives(&s, v[m.bus_index], &m.model);
            if s.s >= 1.0 && ds > 0.0 {
                ds = 0.0;
            }
            let o = o0 + k * MOTOR_STATES;
            dx[o] = de.re;
            dx[o + 1] = de.im;
            dx[o + 2] = ds;
        }
        Ok(dx)
    }

    fn limit(&self, x: &mut [f64]) {
        for (k, m) in self.init.models.iter().enumerate() {
            let o = k * GEN_STATES + 1;
            x[o] = x[o].clamp(0.0, m.e_fd_max());
        }
        let o0 = self.init.generators.len() * GEN_STATES;
        for k in 0..self.init.motors.len() {
            let o = o0 + k * MOTOR_STATES + 2;
            x[o] = x[o].min(1.0);
        }
    }

    fn sample(&self, solver: &mut StageSolver, x: &[f64], t: f64) -> Result<Sample> {
        let v = self.voltages(solver, x)?;
        let gens = self
            .init
            .generators
            .iter()
            .zip(&self.init.models)
            .enumerate()
            .map(|(k, (g, m))| {
                let s = self.unpack_gen(x, k);
                let (vd, vq) = to_dq(v[g.bus_index], s.delta);
                let out = stator_algebra(s.psi, vd, vq, &m.params);
                let (q_spon, q_exc) = decompose_q(&s, vd, vq, &m.params);
                GenSample {
                    psi: s.psi,
                    e_fd: s.e_fd,
                    e_q: out.e_q,
                    v_d: vd,
                    v_q: vq,
                    i_d: out.i_d,
                    i_q: out.i_q,
                    p: out.p,
                    q: out.q,
                    q_spon,
                    q_exc,
                    delta_psi: s.delta_psi,
                    delta: s.delta,
                    omega: s.omega,
                }
            })
            .collect();
        let motors = self
            .init
            .motors
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let s = self.unpack_motor(x, k);
                let pw = m.model.power(&s, v[m.bus_index]);
                MotorSample {
                    e: s.e,
                    slip: s.s,
                    p: pw.re,
                    q: pw.im,
                }
            })
            .collect();
        Ok(Sample {
            t,
            stage: solver.tag,
            v,
            gens,
            motors,
        })
    }

    fn rk4(&self, solver: &mut StageSolver, x: &[f64], h: f64) -> Result<Vec<f64>> {
        let axpy = |a: &[f64], k: &[f64], c: f64| -> Vec<f64> { a.iter().zip(k).map(|(a, k)| a + c * k).collect() };
        let k1 = self.derivatives(solver, x)?;
        let k2 = self.derivatives(solver, &axpy(x, &k1, h / 2.0))?;
        let k3 = self.derivatives(solver, &axpy(x, &k2, h / 2.0))?;
        let k4 = self.derivatives(solver, &axpy(x, &k3, h))?;
        Ok((0..x.len())
            .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect())
    }

    fn jacobian(&self, solver: &mut StageSolver, x: &[f64], f0: &[f64]) -> Result<Matrix> {
        let n = x.len();
        let mut jac = Matrix::zeros(n, n);
        let mut xp = x.to_vec();
        for j in 0..n {
            let eps = 1e-7 * x[j].abs().max(1.0);
            xp[j] = x[j] + eps;
            let fp = self.derivatives(solver, &xp)?;
            xp[j] = x[j];
            for i in 0..n {
                jac[(i, j)] = (fp[i] - f0[i]) / eps;
            }
        }
        Ok(jac)
    }

    fn trapezoidal(
        &self,
        solver: &mut StageSolver,
        x: &[f64],
        h: f64,
        iteration: &mut Option<Lu>,
        t: f64,
    ) -> Result<Vec<f64>> {
        let n = x.len();
        let f0 = self.derivatives(solver, x)?;
        for attempt in 0..2 {
            if iteration.is_none() || attempt == 1 {
                let jac = self.jacobian(solver, x, &f0)?;
                let mut m = Matrix::identity(n);
                for i in 0..n {
                    for j in 0..n {
                        m[(i, j)] -= 0.5 * h * jac[(i, j)];
                    }
                }
                *iteration = Some(Lu::factor(&m).map_err(|_| Error::Divergence {
                    t,
                    detail: "singular trapezoidal iteration matrix".into(),
                })?);
            }
            let lu = iteration.as_ref().expect("set above");
            let mut x1: Vec<f64> = x.iter().zip(&f0).map(|(a, d)| a + h * d).collect();
            for _ in 0..12 {
                let f1 = self.derivatives(solver, &x1)?;
                let mut g: Vec<f64> = (0..n).map(|i| x1[i] - x[i] - 0.5 * h * (f0[i] + f1[i])).collect();
                lu.solve_in_place(&mut g);
                let step = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                x1.iter_mut().zip(&g).for_each(|(a, d)| *a -= d);
                if step < 1e-13 {
                    return Ok(x1);
                }
            }
        }
        Err(Error::Divergence {
            t,
            detail: "trapezoidal corrector did not converge".into(),
        })
    }
}

/// Bus voltages for frozen device states on one stage.
pub fn network_solve(
    stage: &TopologyStage,
    init: &DynamicInit,
    gens: &[GeneratorState],
    motors: &[MotorState],
) -> Result<Vec<Complex64>> {
    let deltas: Vec<f64> = gens.iter().map(|g| g.delta).collect();
    let net = ExtendedNetwork::new(stage, &init.network_devices_at(&deltas))?;
    let mut rhs = vec![0.0; 2 * stage.y.len()];
    for (g, s) in init.generators.iter().zip(gens) {
        let a = &init.models[init.generators.iter().position(|x| x.id == g.id).expect("own id")];
        let adm = generator_xy_admittance(a.params.x_q, a.params.x_d_prime, s.delta);
        rhs[2 * g.bus_index] += adm.c_x * s.psi;
        rhs[2 * g.bus_index + 1] += adm.c_y * s.psi;
    }
    for (m, s) in init.motors.iter().zip(motors) {
        rhs[2 * m.bus_index] += s.e.im / m.model.x_prime;
        rhs[2 * m.bus_index + 1] -= s.e.re / m.model.x_prime;
    }
    Ok(net.solve(&rhs))
}

/// Simulates `scenario` (or an undisturbed run when `None`).
pub fn run(
    case: &SystemCase,
    init: &DynamicInit,
    scenario: Option<&FaultScenario>,
    options: &SimOptions,
) -> Result<Trajectory> {
    options.validate(scenario)?;
    if let Some(s) = scenario {
        s.validate(case)?;
    }
    let deltas: Vec<f64> = init.generators.iter().map(|g| g.delta).collect();
    let mut solvers = vec![StageSolver::new(
        &build_stage(case, scenario, StageTag::Pre, &init.loads)?,
        init,
        &deltas,
    )?];
    let (k_fault, k_clr) = match scenario {
        Some(s) => {
            solvers.push(StageSolver::new(
                &build_stage(case, Some(s), StageTag::Flt, &init.loads)?,
                init,
                &deltas,
            )?);
            solvers.push(StageSolver::new(
                &build_stage(case, Some(s), StageTag::Clr, &init.loads)?,
                init,
                &deltas,
            )?);
            let kf = (s.t_fault / options.dt).round() as usize;
            let kc = ((s.t_clr / options.dt).round() as usize).max(kf + 1);
            (Some(kf), Some(kc))
        }
        None => (None, None),
    };
    let engine = Engine {
        init,
        n_bus: case.buses.len(),
        swing: options.swing_enabled,
    };
    let n_steps = (options.t_end / options.dt).round() as usize;
    let mut traj = Trajectory {
        bus_ids: case.buses.iter().map(|b| b.id).collect(),
        gen_ids: init.generators.iter().map(|g| g.id.clone()).collect(),
        motor_ids: init.motors.iter().map(|m| m.id.clone()).collect(),
        samples: Vec::new(),
        events: Vec::new(),
    };
    let mut x = engine.initial_state();
    let mut stage = 0usize;
    let mut trap_lu: Option<Lu> = None;
    let mut beyond_breakdown = vec![false; init.motors.len()];
    for k in 0..=n_steps {
        let t = k as f64 * options.dt;
        let switch_to = if Some(k) == k_fault {
            Some(1)
        } else if Some(k) == k_clr {
            Some(2)
        } else {
            None
        };
        if let Some(next) = switch_to {
            let last_recorded = traj.samples.last().map(|s| s.t);
            if last_recorded != Some(t) {
                traj.samples.push(engine.sample(&mut solvers[stage], &x, t)?);
            }
            stage = next;
            trap_lu = None;
            let s = scenario.expect("events only with a scenario");
            let (event, detail) = if next == 1 {
                ("fault_on", format!("bus {} shunt -j{}", s.fault_bus, s.fault_admittance))
            } else {
                (
                    "fault_cleared",
                    match &s.trip_branch {
                        Some(b) => format!("bus {} cleared, branch {} tripped", s.fault_bus, b),
                        None => format!("bus {} cleared", s.fault_bus),
                    },
                )
            };
            traj.events.push(Event {
                event: event.into(),
                t,
                detail,
            });
            traj.samples.push(engine.sample(&mut solvers[stage], &x, t)?);
        } else if k % options.record_stride == 0 || k == n_steps {
            traj.samples.push(engine.sample(&mut solvers[stage], &x, t)?);
        }
        if k == n_steps {
            break;
        }
        x = match options.integrator {
            Integrator::Rk4 => engine.rk4(&mut solvers[stage], &x, options.dt)?,
            Integrator::Trapezoidal => engine.trapezoidal(&mut solvers[stage], &x, options.dt, &mut trap_lu, t)?,
        };
        engine.limit(&mut x);
        let t_next = t + options.dt;
        for g in 0..init.generators.len() {
            let psi = x[g * GEN_STATES];
            if !psi.is_finite() || psi.abs() > options.divergence_limit {
                return Err(Error::Divergence {
                    t: t_next,
                    detail: format!("generator {} flux {psi}", init.generators[g].id),
                });
            }
        }
        for (m, flag) in beyond_breakdown.iter_mut().enumerate() {
            let s = engine.unpack_motor(&x, m).s;
            if !*flag && s > init.motors[m].model.peak_slip() {
                *flag = true;
                traj.events.push(Event {
                    event: "motor_stall".into(),
                    t: t_next,
                    detail: format!("motor {} slip {s:.4} beyond breakdown", init.motors[m].id),
                });
            }
        }
    }
    Ok(traj)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusMetrics {
    pub bus: u32,
    pub nadir: f64,
    pub t_nadir: f64,
    pub v_checkpoint: f64,
    /// First time after clearing from which the voltage stays above
    /// `V_th2`; `None` when it never recovers.
    pub recovery_time: Option<f64>,
}

/// Nadir, checkpoint voltage and recovery time for every bus.
pub fn extract_metrics(traj: &Trajectory, scenario: &FaultScenario) -> Result<Vec<BusMetrics>> {
    let t_check = scenario.t_clr + scenario.checkpoint;
    let last = traj.samples.last().map_or(f64::NEG_INFINITY, |s| s.t);
    if t_check > last + 1e-9 {
        return Err(Error::validation(
            "scenario.checkpoint",
            format!("checkpoint t = {t_check} beyond trajectory end {last}"),
        ));
    }
    let during: Vec<&Sample> = traj.samples.iter().filter(|s| s.stage != StageTag::Pre).collect();
    let after: Vec<&Sample> = traj.samples.iter().filter(|s| s.stage == StageTag::Clr).collect();
    if during.is_empty() || after.is_empty() {
        return Err(Error::validation("trajectory", "no fault or post-clearing samples"));
    }
    let mut out = Vec::with_capacity(traj.bus_ids.len());
    for (b, &id) in traj.bus_ids.iter().enumerate() {
        let (nadir, t_nadir) = during
            .iter()
            .map(|s| (s.v[b].norm(), s.t))
            .fold((f64::INFINITY, 0.0), |m, c| if c.0 < m.0 { c } else { m });
        let v_checkpoint = interpolate(&after, b, t_check);
        let mut recovery_time = None;
        for s in after.iter().rev() {
            if s.v[b].norm() >= scenario.v_th2 {
                recovery_time = Some(s.t);
            } else {
                break;
            }
        }
        out.push(BusMetrics {
            bus: id,
            nadir,
            t_nadir,
            v_checkpoint,
            recovery_time,
        });
    }
    Ok(out)
}

fn interpolate(samples: &[&Sample], bus: usize, t: f64) -> f64 {
    let k = samples.partition_point(|s| s.t < t);
    if k == 0 {
        return samples[0].v[bus].norm();
    }
    if k >= samples.len() {
        return samples[samples.len() - 1].v[bus].norm();
    }
    let (a, b) = (samples[k - 1], samples[k]);
    let w = (t - a.t) / (b.t - a.t);
    a.v[bus].norm() * (1.0 - w) + b.v[bus].norm() * w
}
