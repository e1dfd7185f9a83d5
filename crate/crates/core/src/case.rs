//! System cases, operating points and fault scenarios.
//!
//! Everything is stored in per-unit on the system base. Field names in the
//! JSON schema follow the conventional power-systems symbols (`V_set`,
//! `x_d_prime`, `K_A`, ...), hence the serde renames.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BusKind {
    #[serde(rename = "slack")]
    Slack,
    #[serde(rename = "PV")]
    Pv,
    #[serde(rename = "PQ")]
    Pq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: u32,
    pub kind: BusKind,
    /// Voltage setpoint, used when the bus hosts an in-service generator.
    #[serde(rename = "V_set", default, skip_serializing_if = "Option::is_none")]
    pub v_set: Option<f64>,
    #[serde(rename = "P_load", default)]
    pub p_load: f64,
    #[serde(rename = "Q_load", default)]
    pub q_load: f64,
    /// Fraction of the active load served by an induction motor.
    #[serde(default)]
    pub motor_share: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub from: u32,
    pub to: u32,
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b: f64,
    /// Off-nominal turns ratio on the `from` side (1.0 for lines).
    #[serde(default = "one")]
    pub ratio: f64,
    #[serde(default = "yes")]
    pub status: bool,
}

impl Branch {
    /// Lookup key: the explicit id, or `"from-to"`.
    pub fn key(&self) -> String {
        self.id
            .clone()
            .unwrap_or_else(|| format!("{}-{}", self.from, self.to))
    }

    fn matches(&self, key: &str) -> bool {
        if self.id.as_deref() == Some(key) {
            return true;
        }
        key == format!("{}-{}", self.from, self.to) || key == format!("{}-{}", self.to, self.from)
    }
}

/// Third-order synchronous machine with a first-order exciter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub id: String,
    pub bus: u32,
    /// Active power dispatch (pu). Forced to zero for condensers.
    #[serde(rename = "P_g0", default)]
    pub p_g0: f64,
    /// Fixed reactive dispatch. When set, the bus is solved as PQ.
    #[serde(rename = "Q_g0", default, skip_serializing_if = "Option::is_none")]
    pub q_g0: Option<f64>,
    pub x_d: f64,
    pub x_d_prime: f64,
    pub x_q: f64,
    pub x_ad: f64,
    /// Field reactance; derived as `x_ad^2 / (x_d - x_d_prime)` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_f: Option<f64>,
    #[serde(rename = "T_d0_prime")]
    pub t_d0_prime: f64,
    #[serde(rename = "K_A")]
    pub k_a: f64,
    #[serde(rename = "T_e")]
    pub t_e: f64,
    #[serde(rename = "Q_max")]
    pub q_max: f64,
    #[serde(default)]
    pub is_condenser: bool,
    #[serde(default = "yes")]
    pub in_service: bool,
    /// Inertia constant (s), only used when rotor swing is simulated.
    #[serde(rename = "H", default = "default_h")]
    pub h: f64,
    #[serde(rename = "D", default)]
    pub d: f64,
    #[serde(rename = "E_fd_max", default, skip_serializing_if = "Option::is_none")]
    pub e_fd_max: Option<f64>,
    /// Start the VRC window at fault inception instead of clearing.
    #[serde(default)]
    pub vrc_from_fault: bool,
}

impl GeneratorParams {
    /// Short-circuit transient time constant `T'_d = T'_d0 x'_d / x_d`.
    pub fn t_d_prime(&self) -> f64 {
        self.t_d0_prime * self.x_d_prime / self.x_d
    }

    /// Field reactance consistent with `x_d - x'_d = x_ad^2 / x_f`.
    /// Infinite when the machine has no transient saliency in d.
    pub fn field_reactance(&self) -> f64 {
        self.x_f.unwrap_or_else(|| {
            let dx = self.x_d - self.x_d_prime;
            if dx > 0.0 {
                self.x_ad * self.x_ad / dx
            } else {
                f64::INFINITY
            }
        })
    }
}

/// Induction motor parameters on the motor's own MVA base.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotorParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub bus: u32,
    #[serde(rename = "X_1")]
    pub x1: f64,
    #[serde(rename = "X_2")]
    pub x2: f64,
    #[serde(rename = "R_2")]
    pub r2: f64,
    #[serde(rename = "T_0_prime")]
    pub t0_prime: f64,
    #[serde(rename = "H_m")]
    pub h_m: f64,
    pub load_torque_exponent: f64,
    /// Motor loading: electrical power over motor rating. Sets the MVA base.
    #[serde(default = "default_load_factor")]
    pub load_factor: f64,
}

impl MotorParams {
    pub fn ident(&self) -> String {
        self.id.clone().unwrap_or_else(|| format!("M{}", self.bus))
    }

    /// Magnetizing reactance implied by the rotor time constant.
    pub fn x_mu(&self, f0: f64) -> f64 {
        2.0 * std::f64::consts::PI * f0 * self.t0_prime * self.r2 - self.x2
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shunt {
    pub id: String,
    pub bus: u32,
    /// Susceptance (pu); positive is capacitive.
    pub b: f64,
    #[serde(default = "yes")]
    pub status: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemCase {
    pub base_mva: f64,
    pub f0: f64,
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub branches: Vec<Branch>,
    #[serde(default)]
    pub generators: Vec<GeneratorParams>,
    #[serde(default)]
    pub motors: Vec<MotorParams>,
    #[serde(default)]
    pub shunts: Vec<Shunt>,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_h() -> f64 {
    5.0
}
fn default_load_factor() -> f64 {
    0.5
}

const BUNDLED_IEEE39: &str = include_str!("../data/ieee39.json");
const BUNDLED_MOTOR: &str = include_str!("../data/composite_motor.json");

/// The bundled 39-bus New England case with dynamic data.
pub fn ieee39() -> SystemCase {
    parse_case(BUNDLED_IEEE39).expect("bundled ieee39 case is valid")
}

/// The "composite industrial motor" used for buses with a motor share but
/// no explicit motor record. The `bus` field is a placeholder.
pub fn default_motor() -> MotorParams {
    serde_json::from_str(BUNDLED_MOTOR).expect("bundled motor data parses")
}

pub fn load_case(path: impl AsRef<Path>) -> Result<SystemCase> {
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    parse_case(&text)
}

pub fn parse_case(text: &str) -> Result<SystemCase> {
    let case: SystemCase = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    case.validate()?;
    Ok(case)
}

pub fn save_case(case: &SystemCase, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(case).expect("case serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

fn positive(path: String, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(path, format!("must be positive and finite, got {v}")))
    }
}

impl SystemCase {
    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn branch_index(&self, key: &str) -> Option<usize> {
        self.branches.iter().position(|b| b.matches(key))
    }

    pub fn generator_index(&self, id: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.id == id)
    }

    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated case has a slack bus")
    }

    /// Checks every structural and parameter invariant. The first violation
    /// is reported with the path of the offending field.
    pub fn validate(&self) -> Result<()> {
        positive("base_mva".into(), self.base_mva)?;
        positive("f0".into(), self.f0)?;
        if self.buses.is_empty() {
            return Err(Error::validation("buses", "case has no buses"));
        }
        let mut seen = BTreeSet::new();
        for (k, b) in self.buses.iter().enumerate() {
            if !seen.insert(b.id) {
                return Err(Error::validation(
                    format!("buses[{k}].id"),
                    format!("duplicate bus id {}", b.id),
                ));
            }
            if !(0.0..=1.0).contains(&b.motor_share) {
                return Err(Error::validation(
                    format!("buses[{k}].motor_share"),
                    format!("must lie in [0, 1], got {}", b.motor_share),
                ));
            }
            if let Some(v) = b.v_set {
                if !(v > 0.8 && v < 1.2) {
                    return Err(Error::validation(
                        format!("buses[{k}].V_set"),
                        format!("must lie in (0.8, 1.2), got {v}"),
                    ));
                }
            } else if b.kind != BusKind::Pq {
                return Err(Error::validation(
                    format!("buses[{k}].V_set"),
                    "required for slack and PV buses",
                ));
            }
            if !b.p_load.is_finite() || !b.q_load.is_finite() {
                return Err(Error::validation(format!("buses[{k}]"), "non-finite load"));
            }
        }
        let slack = self.buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if slack != 1 {
            return Err(Error::validation(
                "buses",
                format!("exactly one slack bus required, found {slack}"),
            ));
        }

        let known = |path: String, bus: u32| -> Result<()> {
            if seen.contains(&bus) {
                Ok(())
            } else {
                Err(Error::validation(path, format!("unknown bus {bus}")))
            }
        };

        for (k, br) in self.branches.iter().enumerate() {
            known(format!("branches[{k}].from"), br.from)?;
            known(format!("branches[{k}].to"), br.to)?;
            if br.from == br.to {
                return Err(Error::validation(format!("branches[{k}]"), "self loop"));
            }
            if br.x == 0.0 || !br.x.is_finite() {
                return Err(Error::validation(format!("branches[{k}].x"), "must be non-zero"));
            }
            positive(format!("branches[{k}].ratio"), br.ratio)?;
            if !br.r.is_finite() || !br.b.is_finite() {
                return Err(Error::validation(format!("branches[{k}]"), "non-finite r or b"));
            }
        }

        let mut gen_ids = BTreeSet::new();
        let mut gen_buses = BTreeSet::new();
        for (k, g) in self.generators.iter().enumerate() {
            let p = |f: &str| format!("generators[{k}].{f}");
            if !gen_ids.insert(g.id.as_str()) {
                return Err(Error::validation(p("id"), format!("duplicate generator id {}", g.id)));
            }
            known(p("bus"), g.bus)?;
            if !gen_buses.insert(g.bus) {
                return Err(Error::validation(
                    p("bus"),
                    format!("bus {} already hosts a generator", g.bus),
                ));
            }
            positive(p("x_d_prime"), g.x_d_prime)?;
            positive(p("x_q"), g.x_q)?;
            positive(p("x_ad"), g.x_ad)?;
            positive(p("T_d0_prime"), g.t_d0_prime)?;
            positive(p("T_e"), g.t_e)?;
            positive(p("H"), g.h)?;
            if !(g.x_d >= g.x_d_prime) {
                return Err(Error::validation(p("x_d"), "must satisfy x_d >= x_d_prime"));
            }
            if !(g.k_a >= 0.0 && g.k_a.is_finite()) {
                return Err(Error::validation(p("K_A"), "must be non-negative"));
            }
            if !g.q_max.is_finite() {
                return Err(Error::validation(p("Q_max"), "must be finite"));
            }
            if let Some(xf) = g.x_f {
                positive(p("x_f"), xf)?;
                let dx = g.x_d - g.x_d_prime;
                if (g.x_ad * g.x_ad / xf - dx).abs() > 1e-6 * dx.max(1e-12) {
                    return Err(Error::validation(
                        p("x_f"),
                        "inconsistent with x_d - x_d_prime = x_ad^2 / x_f",
                    ));
                }
            }
            if g.is_condenser && g.p_g0 != 0.0 {
                return Err(Error::validation(p("P_g0"), "condensers carry no active power"));
            }
            if let Some(q) = g.q_g0 {
                if q > g.q_max {
                    return Err(Error::validation(p("Q_g0"), "exceeds Q_max"));
                }
            }
            if let Some(e) = g.e_fd_max {
                positive(p("E_fd_max"), e)?;
            }
            let bus = &self.buses[self.bus_index(g.bus).unwrap()];
            if g.in_service && bus.v_set.is_none() && g.q_g0.is_none() {
                return Err(Error::validation(
                    p("bus"),
                    format!("bus {} has no V_set for its in-service generator", g.bus),
                ));
            }
        }

        let mut motor_buses = BTreeSet::new();
        for (k, m) in self.motors.iter().enumerate() {
            let p = |f: &str| format!("motors[{k}].{f}");
            known(p("bus"), m.bus)?;
            if !motor_buses.insert(m.bus) {
                return Err(Error::validation(p("bus"), "one motor per bus"));
            }
            positive(p("X_1"), m.x1)?;
            positive(p("X_2"), m.x2)?;
            positive(p("R_2"), m.r2)?;
            positive(p("T_0_prime"), m.t0_prime)?;
            positive(p("H_m"), m.h_m)?;
            if !(m.load_factor > 0.0 && m.load_factor <= 1.0) {
                return Err(Error::validation(p("load_factor"), "must lie in (0, 1]"));
            }
            if !(m.x_mu(self.f0) > 0.0) {
                return Err(Error::validation(
                    p("T_0_prime"),
                    "implied magnetizing reactance 2*pi*f0*T_0_prime*R_2 - X_2 must be positive",
                ));
            }
        }

        let mut shunt_ids = BTreeSet::new();
        for (k, s) in self.shunts.iter().enumerate() {
            if !shunt_ids.insert(s.id.as_str()) {
                return Err(Error::validation(format!("shunts[{k}].id"), "duplicate shunt id"));
            }
            known(format!("shunts[{k}].bus"), s.bus)?;
            if !s.b.is_finite() {
                return Err(Error::validation(format!("shunts[{k}].b"), "must be finite"));
            }
        }
        Ok(())
    }

    /// Motors actually present: one per bus with a positive motor share,
    /// taken from `motors` or from the default composite set.
    pub fn effective_motors(&self) -> Vec<MotorParams> {
        self.buses
            .iter()
            .filter(|b| b.motor_share > 0.0 && b.p_load > 0.0)
            .map(|b| {
                self.motors
                    .iter()
                    .find(|m| m.bus == b.id)
                    .cloned()
                    .unwrap_or_else(|| MotorParams {
                        bus: b.id,
                        ..default_motor()
                    })
            })
            .collect()
    }

    pub fn in_service_generators(&self) -> impl Iterator<Item = &GeneratorParams> {
        self.generators.iter().filter(|g| g.in_service)
    }
}

/// Setpoint overrides for one generator.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSetpoint {
    #[serde(rename = "P_g0", default, skip_serializing_if = "Option::is_none")]
    pub p_g0: Option<f64>,
    #[serde(rename = "Q_g0", default, skip_serializing_if = "Option::is_none")]
    pub q_g0: Option<f64>,
    #[serde(rename = "V_g0", default, skip_serializing_if = "Option::is_none")]
    pub v_g0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_service: Option<bool>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BusOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motor_share: Option<f64>,
}

/// A set of overrides applied on top of a case. Empty means "the case as is".
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub generators: BTreeMap<String, GeneratorSetpoint>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub shunts: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub buses: BTreeMap<u32, BusOverride>,
}

pub fn load_operating_point(path: impl AsRef<Path>) -> Result<OperatingPoint> {
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
}

/// Returns a copy of `case` with the operating point substituted.
pub fn apply_operating_point(case: &SystemCase, op: &OperatingPoint) -> Result<SystemCase> {
    let mut out = case.clone();
    for (id, sp) in &op.generators {
        let k = out.generator_index(id).ok_or_else(|| Error::UnknownDevice {
            kind: "generator",
            id: id.clone(),
        })?;
        let path = |f: &str| format!("operating_point.generators.{id}.{f}");
        if sp.q_g0.is_some() && sp.v_g0.is_some() {
            return Err(Error::validation(path("Q_g0"), "give either Q_g0 or V_g0, not both"));
        }
        let g = &mut out.generators[k];
        if let Some(p) = sp.p_g0 {
            if !(p >= 0.0 && p.is_finite()) || (g.is_condenser && p != 0.0) {
                return Err(Error::validation(path("P_g0"), format!("invalid active power {p}")));
            }
            g.p_g0 = p;
        }
        if let Some(q) = sp.q_g0 {
            if !(q <= g.q_max) {
                return Err(Error::validation(path("Q_g0"), format!("{q} exceeds Q_max {}", g.q_max)));
            }
            g.q_g0 = Some(q);
        }
        if let Some(on) = sp.in_service {
            g.in_service = on;
        }
        let bus = g.bus;
        if let Some(v) = sp.v_g0 {
            if !(v > 0.8 && v < 1.2) {
                return Err(Error::validation(path("V_g0"), format!("{v} outside (0.8, 1.2)")));
            }
            g.q_g0 = None;
            let b = out.bus_index(bus).expect("validated");
            out.buses[b].v_set = Some(v);
        }
    }
    for (id, &on) in &op.shunts {
        let s = out
            .shunts
            .iter_mut()
            .find(|s| &s.id == id)
            .ok_or_else(|| Error::UnknownDevice {
                kind: "shunt",
                id: id.clone(),
            })?;
        s.status = on;
    }
    for (&bus, ov) in &op.buses {
        let k = out.bus_index(bus).ok_or_else(|| Error::UnknownDevice {
            kind: "bus",
            id: bus.to_string(),
        })?;
        let b = &mut out.buses[k];
        if let Some(s) = ov.load_scale {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::validation(
                    format!("operating_point.buses.{bus}.load_scale"),
                    "must be non-negative",
                ));
            }
            b.p_load *= s;
            b.q_load *= s;
        }
        if let Some(m) = ov.motor_share {
            b.motor_share = m;
        }
    }
    out.validate()?;
    Ok(out)
}

/// A short-circuit at a line terminal, cleared by tripping the line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultScenario {
    pub id: String,
    pub fault_bus: u32,
    /// Branch opened at clearing (`"from-to"` or explicit id).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trip_branch: Option<String>,
    #[serde(default = "default_t_fault")]
    pub t_fault: f64,
    #[serde(rename = "T_clr")]
    pub t_clr: f64,
    /// Magnitude of the inductive fault shunt `-j y` (pu).
    #[serde(default = "default_fault_admittance")]
    pub fault_admittance: f64,
    #[serde(rename = "V_th1", default = "default_vth1")]
    pub v_th1: f64,
    #[serde(rename = "V_th2", default = "default_vth2")]
    pub v_th2: f64,
    #[serde(rename = "delta_T", default = "default_window")]
    pub delta_t: f64,
    #[serde(default = "default_window")]
    pub checkpoint: f64,
    /// Bus whose voltage is assessed; defaults to the faulted bus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monitor_bus: Option<u32>,
}

fn default_t_fault() -> f64 {
    0.1
}
fn default_fault_admittance() -> f64 {
    1e4
}
fn default_vth1() -> f64 {
    0.75
}
fn default_vth2() -> f64 {
    0.85
}
fn default_window() -> f64 {
    0.4
}

impl FaultScenario {
    pub fn monitor(&self) -> u32 {
        self.monitor_bus.unwrap_or(self.fault_bus)
    }

    pub fn validate(&self, case: &SystemCase) -> Result<()> {
        let p = |f: &str| format!("scenario[{}].{f}", self.id);
        if case.bus_index(self.fault_bus).is_none() {
            return Err(Error::validation(p("fault_bus"), format!("unknown bus {}", self.fault_bus)));
        }
        if let Some(m) = self.monitor_bus {
            if case.bus_index(m).is_none() {
                return Err(Error::validation(p("monitor_bus"), format!("unknown bus {m}")));
            }
        }
        if let Some(key) = &self.trip_branch {
            if case.branch_index(key).is_none() {
                return Err(Error::UnknownDevice {
                    kind: "branch",
                    id: key.clone(),
                });
            }
        }
        if !(self.t_fault >= 0.0) {
            return Err(Error::validation(p("t_fault"), "must be non-negative"));
        }
        if !(self.t_clr > self.t_fault) {
            return Err(Error::validation(p("T_clr"), "must be later than t_fault"));
        }
        if !(self.delta_t > 0.0) {
            return Err(Error::validation(p("delta_T"), "must be positive"));
        }
        if !(self.checkpoint >= 0.0) {
            return Err(Error::validation(p("checkpoint"), "must be non-negative"));
        }
        if !(self.fault_admittance >= 0.0 && self.fault_admittance.is_finite()) {
            return Err(Error::validation(p("fault_admittance"), "must be non-negative"));
        }
        Ok(())
    }
}

/// Reads a scenario file holding one scenario object or an array of them.
pub fn load_scenarios(path: impl AsRef<Path>) -> Result<Vec<FaultScenario>> {
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    parse_scenarios(&text)
}

pub fn parse_scenarios(text: &str) -> Result<Vec<FaultScenario>> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(FaultScenario),
        Many(Vec<FaultScenario>),
    }
    match serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))? {
        OneOrMany::One(s) => Ok(vec![s]),
        OneOrMany::Many(v) => Ok(v),
    }
}
