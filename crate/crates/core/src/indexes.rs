//! Voltage inertia (VIC) and voltage recovery (VRC) support indexes,
//! per-fault requirements and security checks built on them.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::AnalyticSolution;
use crate::case::{apply_operating_point, BusKind, FaultScenario, GeneratorParams, GeneratorSetpoint, OperatingPoint, SystemCase};
use crate::error::{Error, Result};
use crate::network::{build_stage, electrical_distance, DeviceKind, ExtendedNetwork, RMatrix, StageTag};
use crate::simulate::{extract_metrics, SimOptions, Trajectory};
use crate::study::Study;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexMethod {
    #[default]
    Analytic,
    Simulated,
}

impl std::str::FromStr for IndexMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Self::Analytic),
            "simulated" => Ok(Self::Simulated),
            _ => Err(Error::validation("method", format!("unknown index method `{s}`"))),
        }
    }
}

/// Per-device contributions at one bus and their sum.
#[derive(Clone, Debug, PartialEq)]
pub struct BusIndex {
    pub per_device: Vec<f64>,
    pub total: f64,
}

impl BusIndex {
    fn from_parts(per_device: Vec<f64>) -> Self {
        let total = per_device.iter().sum();
        Self { per_device, total }
    }
}

/// Columns of R that belong to synchronous machines. Motors take part in
/// the superposition but carry no index.
pub fn machine_columns(r: &RMatrix) -> Vec<usize> {
    (0..r.kinds.len()).filter(|&j| r.kinds[j] == DeviceKind::Generator).collect()
}

/// `VIC_ij = R_flt,ij psi_j(0)` over the synchronous machines.
pub fn compute_vic(r_flt: &RMatrix, psi0: &[f64], bus: usize) -> BusIndex {
    BusIndex::from_parts(machine_columns(r_flt).into_iter().map(|j| r_flt.get(bus, j) * psi0[j]).collect())
}

/// Trapezoidal integral of a sampled signal over `[a, b]`, linear
/// interpolation at the ends. Repeated time stamps (event samples) carry
/// zero width.
pub fn window_integral(t: &[f64], y: &[f64], a: f64, b: f64) -> Result<f64> {
    let eps = 1e-9;
    if t.is_empty() || a < t[0] - eps || b > t[t.len() - 1] + eps {
        return Err(Error::validation(
            "delta_T",
            format!(
                "window [{a}, {b}] exceeds trajectory [{}, {}]",
                t.first().copied().unwrap_or(f64::NAN),
                t.last().copied().unwrap_or(f64::NAN)
            ),
        ));
    }
    let mut total = 0.0;
    for k in 1..t.len() {
        let (t0, t1) = (t[k - 1], t[k]);
        let (lo, hi) = (t0.max(a), t1.min(b));
        if hi <= lo || t1 <= t0 {
            continue;
        }
        let at = |s: f64| y[k - 1] + (y[k] - y[k - 1]) * (s - t0) / (t1 - t0);
        total += 0.5 * (at(lo) + at(hi)) * (hi - lo);
    }
    Ok(total)
}

fn window_start(scenario: &FaultScenario, from_fault: bool) -> f64 {
    if from_fault {
        scenario.t_fault
    } else {
        scenario.t_clr
    }
}

/// Event times actually used by a simulation (grid-snapped).
fn event_times(traj: &Trajectory, scenario: &FaultScenario) -> FaultScenario {
    let mut s = scenario.clone();
    for e in &traj.events {
        match e.event.as_str() {
            "fault_on" => s.t_fault = e.t,
            "fault_cleared" => s.t_clr = e.t,
            _ => {}
        }
    }
    s
}

/// `VRC_ij = (R_clr,ij / dT) int psi_j` from recorded fluxes.
pub fn compute_vrc_simulated(
    traj: &Trajectory,
    r_clr: &RMatrix,
    scenario: &FaultScenario,
    from_fault: &[bool],
    bus: usize,
) -> Result<BusIndex> {
    let s = event_times(traj, scenario);
    let t = traj.times();
    let cols = machine_columns(r_clr);
    let mut out = Vec::with_capacity(cols.len());
    for j in cols {
        let y: Vec<f64> = traj.samples.iter().map(|p| p.gens[j].psi).collect();
        let a = window_start(&s, from_fault.get(j).copied().unwrap_or(false));
        let integral = window_integral(&t, &y, a, a + s.delta_t)?;
        out.push(r_clr.get(bus, j) * integral / s.delta_t);
    }
    Ok(BusIndex::from_parts(out))
}

/// Closed-form VRC from the stepped-voltage solution.
pub fn compute_vrc_analytic(
    sol: &AnalyticSolution,
    r_clr: &RMatrix,
    scenario: &FaultScenario,
    from_fault: &[bool],
    bus: usize,
) -> BusIndex {
    BusIndex::from_parts(
        machine_columns(r_clr)
            .into_iter()
            .map(|j| {
                let a = window_start(scenario, from_fault.get(j).copied().unwrap_or(false));
                r_clr.get(bus, j) * sol.flux_integral(j, a, a + scenario.delta_t) / scenario.delta_t
            })
            .collect(),
    )
}

/// VRC of one generator from the charge through the field and d-axis
/// windings: `(R / dT)(x_ad Q_f - (x_ad^2 / x_f) Q_d)`.
pub fn charge_vrc(
    traj: &Trajectory,
    params: &GeneratorParams,
    gen: usize,
    r: f64,
    t0: f64,
    delta_t: f64,
) -> Result<f64> {
    if traj.samples.first().is_none_or(|s| gen >= s.gens.len()) {
        return Err(Error::validation("trajectory", format!("no current channels for generator {gen}")));
    }
    let t = traj.times();
    let i_f: Vec<f64> = traj.samples.iter().map(|s| s.gens[gen].e_q / params.x_ad).collect();
    let i_d: Vec<f64> = traj.samples.iter().map(|s| s.gens[gen].i_d).collect();
    let q_f = window_integral(&t, &i_f, t0, t0 + delta_t)?;
    let q_d = window_integral(&t, &i_d, t0, t0 + delta_t)?;
    let x_ad = params.x_ad;
    Ok(r / delta_t * (x_ad * q_f - x_ad * x_ad / params.field_reactance() * q_d))
}

/// Per-machine flags for windows starting at fault inception.
pub fn vrc_from_fault_flags(study: &Study) -> Vec<bool> {
    study.init.models.iter().map(|m| m.params.vrc_from_fault).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub scenario_id: String,
    #[serde(rename = "delta_T")]
    pub delta_t: f64,
    pub method: IndexMethod,
    pub vic: BTreeMap<u32, BTreeMap<String, f64>>,
    pub vrc: BTreeMap<u32, BTreeMap<String, f64>>,
    pub vic_total: BTreeMap<u32, f64>,
    pub vrc_total: BTreeMap<u32, f64>,
}

/// VIC and VRC for the requested buses (all buses when `buses` is empty).
/// The simulated method needs a trajectory of the same scenario.
pub fn index_report(
    study: &Study,
    scenario: &FaultScenario,
    method: IndexMethod,
    traj: Option<&Trajectory>,
    buses: &[u32],
) -> Result<IndexReport> {
    let r_flt = study.r_matrix(Some(scenario), StageTag::Flt)?;
    let r_clr = study.r_matrix(Some(scenario), StageTag::Clr)?;
    let psi0 = study.init.initial_fluxes();
    let flags = vrc_from_fault_flags(study);
    let ids: Vec<String> = study.init.generators.iter().map(|g| g.id.clone()).collect();
    let solution = match method {
        IndexMethod::Analytic => Some(crate::analytic::solve_analytic(&study.init, scenario, &r_flt, &r_clr)?),
        IndexMethod::Simulated => None,
    };
    if method == IndexMethod::Simulated && traj.is_none() {
        return Err(Error::validation("method", "simulated indexes need a trajectory"));
    }
    let bus_list: Vec<u32> = if buses.is_empty() { r_flt.bus_ids.clone() } else { buses.to_vec() };
    let mut report = IndexReport {
        scenario_id: scenario.id.clone(),
        delta_t: scenario.delta_t,
        method,
        vic: BTreeMap::new(),
        vrc: BTreeMap::new(),
        vic_total: BTreeMap::new(),
        vrc_total: BTreeMap::new(),
    };
    for id in bus_list {
        let b = r_flt.bus_index(id).ok_or_else(|| Error::UnknownDevice {
            kind: "bus",
            id: id.to_string(),
        })?;
        let vic = compute_vic(&r_flt, &psi0, b);
        let vrc = match (&solution, traj) {
            (Some(sol), _) => compute_vrc_analytic(sol, &r_clr, scenario, &flags, b),
            (None, Some(tr)) => compute_vrc_simulated(tr, &r_clr, scenario, &flags, b)?,
            (None, None) => unreachable!(),
        };
        let named = |v: &[f64]| ids.iter().cloned().zip(v.iter().copied()).collect::<BTreeMap<_, _>>();
        report.vic.insert(id, named(&vic.per_device));
        report.vrc.insert(id, named(&vrc.per_device));
        report.vic_total.insert(id, vic.total);
        report.vrc_total.insert(id, vrc.total);
    }
    Ok(report)
}

/// VIC and closed-form VRC at the monitored bus of a scenario.
pub fn monitored_indexes(study: &Study, scenario: &FaultScenario) -> Result<(f64, f64)> {
    let r_flt = study.r_matrix(Some(scenario), StageTag::Flt)?;
    let r_clr = study.r_matrix(Some(scenario), StageTag::Clr)?;
    let sol = crate::analytic::solve_analytic(&study.init, scenario, &r_flt, &r_clr)?;
    let b = r_flt.bus_index(scenario.monitor()).ok_or_else(|| Error::UnknownDevice {
        kind: "bus",
        id: scenario.monitor().to_string(),
    })?;
    let vic = compute_vic(&r_flt, &study.init.initial_fluxes(), b).total;
    let vrc = compute_vrc_analytic(&sol, &r_clr, scenario, &vrc_from_fault_flags(study), b).total;
    Ok((vic, vrc))
}

/// Indexes and simulated voltage metrics of one operating point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub vic: f64,
    pub vrc: f64,
    pub v_nadir: f64,
    pub v_checkpoint: f64,
}

/// Maps an operating point to its indexes and voltage metrics.
pub trait Evaluator: Sync {
    fn evaluate(&self, point: &OperatingPoint) -> Result<SampleOutcome>;
}

/// Full pipeline: power flow, initialization, indexes, time simulation.
#[derive(Clone, Debug)]
pub struct SimulationEvaluator {
    pub case: SystemCase,
    pub scenario: FaultScenario,
    pub opts: SimOptions,
}

impl SimulationEvaluator {
    /// Simulates just past the later of the checkpoint and the VRC window.
    pub fn new(case: SystemCase, scenario: FaultScenario) -> Self {
        let t_end = scenario.t_clr + scenario.checkpoint.max(scenario.delta_t) + 0.1;
        Self {
            case,
            scenario,
            opts: SimOptions {
                t_end,
                ..SimOptions::default()
            },
        }
    }
}

impl Evaluator for SimulationEvaluator {
    fn evaluate(&self, point: &OperatingPoint) -> Result<SampleOutcome> {
        let study = Study::new(apply_operating_point(&self.case, point)?)?;
        let (vic, vrc) = monitored_indexes(&study, &self.scenario)?;
        let traj = study.simulate(Some(&self.scenario), &self.opts)?;
        let metrics = extract_metrics(&traj, &self.scenario)?;
        let m = metrics
            .iter()
            .find(|m| m.bus == self.scenario.monitor())
            .expect("monitor bus validated");
        Ok(SampleOutcome {
            vic,
            vrc,
            v_nadir: m.nadir,
            v_checkpoint: m.v_checkpoint,
        })
    }
}

/// Var devices electrically close to a fault.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub buses: Vec<u32>,
    pub generators: Vec<String>,
    pub shunts: Vec<String>,
}

/// Buses within Thevenin distance `radius` of the fault bus, on the
/// pre-fault network with devices behind their reactances. Generators at
/// the slack bus are left out.
pub fn fault_zone(study: &Study, scenario: &FaultScenario, radius: f64) -> Result<Zone> {
    let case = &study.case;
    let stage = build_stage(case, None, StageTag::Pre, &study.init.loads)?;
    let net = ExtendedNetwork::new(&stage, &study.init.network_devices())?;
    let from = case.bus_index(scenario.fault_bus).ok_or_else(|| Error::UnknownDevice {
        kind: "bus",
        id: scenario.fault_bus.to_string(),
    })?;
    let d = electrical_distance(&net, from);
    let buses: Vec<u32> = case
        .buses
        .iter()
        .zip(&d)
        .filter(|(_, &x)| x <= radius)
        .map(|(b, _)| b.id)
        .collect();
    let inside = |bus: u32| buses.contains(&bus);
    // The slack unit keeps its setpoint as the angle and power reference.
    let slack: Vec<u32> = case.buses.iter().filter(|b| b.kind == BusKind::Slack).map(|b| b.id).collect();
    Ok(Zone {
        generators: case
            .generators
            .iter()
            .filter(|g| g.in_service && !g.is_condenser && inside(g.bus) && !slack.contains(&g.bus))
            .map(|g| g.id.clone())
            .collect(),
        shunts: case.shunts.iter().filter(|s| inside(s.bus)).map(|s| s.id.clone()).collect(),
        buses,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub v_min: f64,
    pub v_max: f64,
    pub shunt_toggle: f64,
    /// Zone radius as a Thevenin distance (pu).
    pub zone_radius: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            v_min: 0.95,
            v_max: 1.08,
            shunt_toggle: 0.2,
            zone_radius: 0.03,
        }
    }
}

/// Seeded random operating points: uniform voltage setpoints for zone
/// generators, zone shunts flipped with the configured probability. Sample
/// `i` draws from its own stream, so points do not depend on `n`.
pub fn sample_points(case: &SystemCase, zone: &Zone, cfg: &SamplerConfig, first: u64, n: usize) -> Vec<OperatingPoint> {
    (0..n as u64)
        .map(|k| {
            let i = first + k;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i);
            let mut op = OperatingPoint {
                id: Some(format!("s{i:05}")),
                ..OperatingPoint::default()
            };
            for g in &zone.generators {
                let v = rng.gen_range(cfg.v_min..=cfg.v_max);
                op.generators.insert(
                    g.clone(),
                    GeneratorSetpoint {
                        v_g0: Some(v),
                        ..GeneratorSetpoint::default()
                    },
                );
            }
            for s in &zone.shunts {
                let base = case.shunts.iter().find(|x| &x.id == s).is_some_and(|x| x.status);
                let flip = rng.gen_bool(cfg.shunt_toggle);
                op.shunts.insert(s.clone(), base ^ flip);
            }
            op
        })
        .collect()
}

/// Result of locating a threshold crossing on a fitted curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// Crossing found inside the sampled range.
    Exact,
    /// Every sample meets the threshold: requirement is at most `value`.
    AtMost,
    /// No sample meets it: requirement is at least `value`.
    AtLeast,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    Isotonic,
    Linear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub value: f64,
    pub bound: Bound,
    pub extrapolated: bool,
    pub fit: FitKind,
    /// Fitted curve as `(index, voltage)` knots in increasing index order.
    pub knots: Vec<(f64, f64)>,
}

/// Pool-adjacent-violators fit of a non-decreasing step sequence.
pub fn isotonic(y: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.pop();
            let n = na + nb;
            *blocks.last_mut().expect("len > 1") = ((a * na as f64 + b * nb as f64) / n as f64, n);
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}

fn linear_fit(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| {
        let a = sxy / sxx;
        (a, my - a * mx)
    })
}

/// Smallest index value at which the fitted voltage reaches `threshold`.
pub fn fit_crossing(samples: &[(f64, f64)], threshold: f64) -> Result<Crossing> {
    if samples.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "{} valid samples, at least 10 needed",
            samples.len()
        )));
    }
    let mut pts = samples.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    // Merge equal abscissae so the interpolant is a function.
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<(f64, usize)> = Vec::new();
    for (x, y) in pts.iter().copied() {
        if xs.last() == Some(&x) {
            let last = ys.last_mut().expect("paired");
            last.0 += y;
            last.1 += 1;
        } else {
            xs.push(x);
            ys.push((y, 1));
        }
    }
    let weights: Vec<usize> = ys.iter().map(|p| p.1).collect();
    let expanded: Vec<f64> = ys.iter().map(|p| p.0 / p.1 as f64).collect();
    let fitted = weighted_isotonic(&expanded, &weights);
    let knots: Vec<(f64, f64)> = xs.iter().copied().zip(fitted.iter().copied()).collect();
    let (lo, hi) = (knots[0], knots[knots.len() - 1]);

    if lo.1 >= threshold {
        return Ok(Crossing {
            value: lo.0,
            bound: Bound::AtMost,
            extrapolated: true,
            fit: FitKind::Isotonic,
            knots,
        });
    }
    if hi.1 < threshold {
        let value = match linear_fit(&pts) {
            Some((a, b)) if a > 0.0 => ((threshold - b) / a).max(hi.0),
            _ => hi.0,
        };
        return Ok(Crossing {
            value,
            bound: Bound::AtLeast,
            extrapolated: true,
            fit: FitKind::Linear,
            knots,
        });
    }
    let k = knots.iter().position(|p| p.1 >= threshold).expect("hi meets threshold");
    let (a, b) = (knots[k - 1], knots[k]);
    let value = a.0 + (threshold - a.1) * (b.0 - a.0) / (b.1 - a.1);
    Ok(Crossing {
        value,
        bound: Bound::Exact,
        extrapolated: false,
        fit: FitKind::Isotonic,
        knots,
    })
}

fn weighted_isotonic(y: &[f64], w: &[usize]) -> Vec<f64> {
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(y.len());
    for (&v, &n) in y.iter().zip(w) {
        blocks.push((v, n as f64, 1));
        while blocks.len() > 1 {
            let (b, wb, cb) = blocks[blocks.len() - 1];
            let (a, wa, ca) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.pop();
            *blocks.last_mut().expect("len > 1") = ((a * wa + b * wb) / (wa + wb), wa + wb, ca + cb);
        }
    }
    blocks.into_iter().flat_map(|(v, _, c)| std::iter::repeat_n(v, c)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub point: String,
    #[serde(flatten)]
    pub outcome: SampleOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequirementCurve {
    pub fault_id: String,
    pub monitor_bus: u32,
    #[serde(rename = "V_th1")]
    pub v_th1: f64,
    #[serde(rename = "V_th2")]
    pub v_th2: f64,
    pub samples: Vec<CurveSample>,
    pub discarded: usize,
    pub vir: Crossing,
    pub vrr: Crossing,
}

impl RequirementCurve {
    pub fn requirement(&self) -> Requirement {
        Requirement {
            vir: self.vir.value,
            vrr: self.vrr.value,
            n_samples: self.samples.len(),
            extrapolated: self.vir.extrapolated || self.vrr.extrapolated,
        }
    }
}

/// Evaluates every point in parallel and fits both requirement curves.
/// Points whose power flow or initialization fails are discarded.
pub fn assess_requirements(
    evaluator: &dyn Evaluator,
    scenario: &FaultScenario,
    points: &[OperatingPoint],
) -> Result<RequirementCurve> {
    let results: Vec<(String, Result<SampleOutcome>)> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| (p.id.clone().unwrap_or_else(|| format!("s{i:05}")), evaluator.evaluate(p)))
        .collect();
    let mut samples = Vec::new();
    let mut discarded = 0;
    for (point, r) in results {
        match r {
            Ok(outcome) => samples.push(CurveSample { point, outcome }),
            Err(e) if e.is_infeasible() => discarded += 1,
            Err(e) => return Err(e),
        }
    }
    let nadir: Vec<(f64, f64)> = samples.iter().map(|s| (s.outcome.vic, s.outcome.v_nadir)).collect();
    let check: Vec<(f64, f64)> = samples.iter().map(|s| (s.outcome.vrc, s.outcome.v_checkpoint)).collect();
    Ok(RequirementCurve {
        fault_id: scenario.id.clone(),
        monitor_bus: scenario.monitor(),
        v_th1: scenario.v_th1,
        v_th2: scenario.v_th2,
        vir: fit_crossing(&nadir, scenario.v_th1)?,
        vrr: fit_crossing(&check, scenario.v_th2)?,
        samples,
        discarded,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Requirement {
    pub vir: f64,
    pub vrr: f64,
    pub n_samples: usize,
    pub extrapolated: bool,
}

pub type RequirementTable = BTreeMap<String, Requirement>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub fault_id: String,
    pub vic: f64,
    pub vrc: f64,
    pub vir: f64,
    pub vrr: f64,
    pub margin_vic: f64,
    pub margin_vrc: f64,
    pub secure: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub point: Option<String>,
    pub verdicts: Vec<Verdict>,
    pub secure: bool,
}

/// Compares an operating point's indexes with precomputed requirements,
/// without time simulation. Meeting a requirement exactly passes.
pub fn check_security(
    case: &SystemCase,
    point: &OperatingPoint,
    faults: &[FaultScenario],
    requirements: &RequirementTable,
) -> Result<SecurityReport> {
    for f in faults {
        if !requirements.contains_key(&f.id) {
            return Err(Error::validation(
                format!("requirements.{}", f.id),
                "no requirement entry for this fault",
            ));
        }
    }
    let study = Study::new(apply_operating_point(case, point)?)?;
    let verdicts = faults
        .iter()
        .map(|f| {
            let req = requirements[&f.id];
            let (vic, vrc) = monitored_indexes(&study, f)?;
            Ok(Verdict {
                fault_id: f.id.clone(),
                vic,
                vrc,
                vir: req.vir,
                vrr: req.vrr,
                margin_vic: vic - req.vir,
                margin_vrc: vrc - req.vrr,
                secure: vic >= req.vir && vrc >= req.vrr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SecurityReport {
        point: point.id.clone(),
        secure: verdicts.iter().all(|v| v.secure),
        verdicts,
    })
}

/// Security decided by simulation: nadir and checkpoint voltage of the
/// monitored bus against the scenario thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectVerdict {
    pub v_nadir: f64,
    pub v_checkpoint: f64,
    pub secure: bool,
}

pub fn direct_verdict(outcome: &SampleOutcome, scenario: &FaultScenario) -> DirectVerdict {
    DirectVerdict {
        v_nadir: outcome.v_nadir,
        v_checkpoint: outcome.v_checkpoint,
        secure: outcome.v_nadir >= scenario.v_th1 && outcome.v_checkpoint >= scenario.v_th2,
    }
}

/// One row of a condenser-siting batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SitingRow {
    /// `None` for the base case without an added condenser.
    pub condenser: Option<String>,
    pub bus: Option<u32>,
    pub distance: Option<f64>,
    pub vic: f64,
}

/// Monitored-bus VIC with each candidate condenser switched in alone.
pub fn condenser_siting(case: &SystemCase, scenario: &FaultScenario, candidates: &[String]) -> Result<Vec<SitingRow>> {
    let base = Study::new(case.clone())?;
    let stage = build_stage(case, None, StageTag::Pre, &base.init.loads)?;
    let net = ExtendedNetwork::new(&stage, &base.init.network_devices())?;
    let monitor = case.bus_index(scenario.monitor()).ok_or_else(|| Error::UnknownDevice {
        kind: "bus",
        id: scenario.monitor().to_string(),
    })?;
    let dist = electrical_distance(&net, monitor);
    let (vic0, _) = monitored_indexes(&base, scenario)?;
    let mut rows = vec![SitingRow {
        condenser: None,
        bus: None,
        distance: None,
        vic: vic0,
    }];
    let evaluated: Vec<Result<SitingRow>> = candidates
        .par_iter()
        .map(|id| {
            let k = case.generator_index(id).ok_or_else(|| Error::UnknownDevice {
                kind: "generator",
                id: id.clone(),
            })?;
            let bus = case.generators[k].bus;
            let mut op = OperatingPoint::default();
            op.generators.insert(
                id.clone(),
                GeneratorSetpoint {
                    in_service: Some(true),
                    ..GeneratorSetpoint::default()
                },
            );
            let study = Study::new(apply_operating_point(case, &op)?)?;
            let (vic, _) = monitored_indexes(&study, scenario)?;
            Ok(SitingRow {
                condenser: Some(id.clone()),
                bus: Some(bus),
                distance: case.bus_index(bus).map(|b| dist[b]),
                vic,
            })
        })
        .collect();
    for r in evaluated {
        rows.push(r?);
    }
    Ok(rows)
}
