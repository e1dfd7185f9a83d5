//! Bus admittance matrices per topology stage, their extension with device
//! internal admittances, and the flux-to-voltage coefficient matrix R.
//!
//! Real two-axis ("xy") form is used throughout: bus `i` owns unknowns
//! `2i` (x, real part) and `2i + 1` (y, imaginary part). A complex
//! admittance `G + jB` between two unknown pairs becomes `[[G, -B], [B, G]]`.
//! Salient generators are not complex-linear, which is why the complex form
//! is not enough.

use std::collections::{BTreeMap, VecDeque};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::case::{FaultScenario, SystemCase};
use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};

/// Dense complex bus admittance matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Ybus {
    pub bus_ids: Vec<u32>,
    n: usize,
    y: Vec<Complex64>,
}

impl Ybus {
    pub fn zeros(bus_ids: Vec<u32>) -> Self {
        let n = bus_ids.len();
        Self {
            bus_ids,
            n,
            y: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.y[i * self.n + j]
    }

    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        self.y[i * self.n + j] += v;
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// Real xy expansion `[[G, -B], [B, G]]` per entry, interleaved.
    pub fn to_xy(&self) -> Matrix {
        let mut m = Matrix::zeros(2 * self.n, 2 * self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let y = self.get(i, j);
                if y == Complex64::new(0.0, 0.0) {
                    continue;
                }
                m[(2 * i, 2 * j)] = y.re;
                m[(2 * i, 2 * j + 1)] = -y.im;
                m[(2 * i + 1, 2 * j)] = y.im;
                m[(2 * i + 1, 2 * j + 1)] = y.re;
            }
        }
        m
    }
}

fn bus_positions(case: &SystemCase) -> BTreeMap<u32, usize> {
    case.buses.iter().enumerate().map(|(k, b)| (b.id, k)).collect()
}

/// Network admittance from in-service branches and switched-in shunts.
/// Loads are not included. `skip` removes one branch by index.
pub fn build_ybus(case: &SystemCase, skip: Option<usize>) -> Ybus {
    let pos = bus_positions(case);
    let mut y = Ybus::zeros(case.buses.iter().map(|b| b.id).collect());
    for (k, br) in case.branches.iter().enumerate() {
        if !br.status || Some(k) == skip {
            continue;
        }
        let f = pos[&br.from];
        let t = pos[&br.to];
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let ysh = Complex64::new(0.0, br.b / 2.0);
        let tap = br.ratio;
        y.add(f, f, (ys + ysh) / (tap * tap));
        y.add(t, t, ys + ysh);
        y.add(f, t, -ys / tap);
        y.add(t, f, -ys / tap);
    }
    for s in case.shunts.iter().filter(|s| s.status) {
        let k = pos[&s.bus];
        y.add(k, k, Complex64::new(0.0, s.b));
    }
    y
}

/// Bus indices reachable from bus 0 through in-service branches.
pub fn connected(case: &SystemCase, skip: Option<usize>) -> Vec<bool> {
    let pos = bus_positions(case);
    let n = case.buses.len();
    let mut adj = vec![Vec::new(); n];
    for (k, br) in case.branches.iter().enumerate() {
        if br.status && Some(k) != skip {
            adj[pos[&br.from]].push(pos[&br.to]);
            adj[pos[&br.to]].push(pos[&br.from]);
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageTag {
    Pre,
    Flt,
    Clr,
}

impl StageTag {
    pub fn as_str(self) -> &'static str {
        match self {
            StageTag::Pre => "pre",
            StageTag::Flt => "flt",
            StageTag::Clr => "clr",
        }
    }
}

/// Admittance matrix of one stage of the fault process, static loads
/// included as constant admittances.
#[derive(Clone, Debug, PartialEq)]
pub struct TopologyStage {
    pub tag: StageTag,
    pub y: Ybus,
}

/// Builds the stage matrix. `loads` holds the constant-admittance static
/// load at every bus (same order as `case.buses`).
pub fn build_stage(
    case: &SystemCase,
    scenario: Option<&FaultScenario>,
    tag: StageTag,
    loads: &[Complex64],
) -> Result<TopologyStage> {
    assert_eq!(loads.len(), case.buses.len());
    let skip = match (tag, scenario) {
        (StageTag::Clr, Some(s)) => match &s.trip_branch {
            Some(key) => Some(case.branch_index(key).ok_or_else(|| Error::UnknownDevice {
                kind: "branch",
                id: key.clone(),
            })?),
            None => None,
        },
        _ => None,
    };
    let reach = connected(case, skip);
    if let Some(k) = reach.iter().position(|r| !r) {
        let what = match skip {
            Some(b) => format!(
                "bus {} separated after tripping branch {}",
                case.buses[k].id,
                case.branches[b].key()
            ),
            None => format!("bus {} is not connected", case.buses[k].id),
        };
        return Err(Error::Islanding(what));
    }
    let mut y = build_ybus(case, skip);
    for (k, l) in loads.iter().enumerate() {
        y.add(k, k, *l);
    }
    if let (StageTag::Flt, Some(s)) = (tag, scenario) {
        let f = case.bus_index(s.fault_bus).ok_or_else(|| {
            Error::validation("scenario.fault_bus", format!("unknown bus {}", s.fault_bus))
        })?;
        y.add(f, f, fault_shunt(s));
    }
    Ok(TopologyStage { tag, y })
}

/// Inductive fault shunt `-j |y|`.
pub fn fault_shunt(s: &FaultScenario) -> Complex64 {
    Complex64::new(0.0, -s.fault_admittance)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceKind {
    Generator,
    Motor,
}

/// A dynamic device as seen by the network: a 2x2 internal admittance block
/// at its bus and the current injected per unit internal flux.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkDevice {
    pub id: String,
    pub kind: DeviceKind,
    pub bus: usize,
    /// `[[G_x, B_x], [B_y, G_y]]`; injected current is `c * flux - block * V`.
    pub block: [[f64; 2]; 2],
    pub c: [f64; 2],
}

impl NetworkDevice {
    /// Round-rotor source behind reactance `x`, internal angle `angle`.
    pub fn behind_reactance(id: String, kind: DeviceKind, bus: usize, x: f64, angle: f64) -> Self {
        Self {
            id,
            kind,
            bus,
            block: [[0.0, 1.0 / x], [-1.0 / x, 0.0]],
            c: [angle.sin() / x, -angle.cos() / x],
        }
    }
}

/// Stage matrix extended with device blocks, factorized.
#[derive(Clone, Debug)]
pub struct ExtendedNetwork {
    n: usize,
    lu: Lu,
}

impl ExtendedNetwork {
    pub fn new(stage: &TopologyStage, devices: &[NetworkDevice]) -> Result<Self> {
        let mut a = stage.y.to_xy();
        for d in devices {
            for r in 0..2 {
                for c in 0..2 {
                    a.add_at(2 * d.bus + r, 2 * d.bus + c, d.block[r][c]);
                }
            }
        }
        let lu = Lu::factor(&a).map_err(|p| Error::Singular {
            context: format!("extended network ({} stage)", stage.tag.as_str()),
            location: format!(
                "bus {} {}-axis",
                stage.y.bus_ids[p.index / 2],
                if p.index % 2 == 0 { "x" } else { "y" }
            ),
        })?;
        Ok(Self { n: stage.y.len(), lu })
    }

    pub fn buses(&self) -> usize {
        self.n
    }

    /// Solves for bus voltages given the interleaved xy injection vector.
    pub fn solve(&self, injection: &[f64]) -> Vec<Complex64> {
        let x = self.lu.solve(injection);
        x.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()
    }

    pub fn solve_raw(&self, rhs: &[f64]) -> Vec<f64> {
        self.lu.solve(rhs)
    }
}

/// How a device's complex voltage contribution is reduced to a scalar.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// Component along the pre-fault voltage phasor of the bus.
    #[default]
    PreFaultPhasor,
    /// Raw network x-axis component.
    StrictX,
}

/// Flux-to-voltage coefficients for one stage.
#[derive(Clone, Debug, PartialEq)]
pub struct RMatrix {
    pub tag: StageTag,
    pub bus_ids: Vec<u32>,
    pub device_ids: Vec<String>,
    pub kinds: Vec<DeviceKind>,
    /// `R[i][j]`, bus-major.
    pub r: Matrix,
    pub z_xx: Matrix,
    pub z_xy: Matrix,
    pub z_yx: Matrix,
    pub z_yy: Matrix,
    pub c: Vec<[f64; 2]>,
    pub w: Vec<f64>,
    pub projection: Projection,
    directions: Vec<Complex64>,
}

impl RMatrix {
    pub fn get(&self, bus: usize, device: usize) -> f64 {
        self.r[(bus, device)]
    }

    /// Complex bus voltage produced by one unit of device flux.
    pub fn response(&self, bus: usize, device: usize) -> Complex64 {
        let [cx, cy] = self.c[device];
        let w = self.w[device];
        Complex64::new(
            self.z_xx[(bus, device)] * cx + self.z_xy[(bus, device)] * cy,
            self.z_yx[(bus, device)] * cx + self.z_yy[(bus, device)] * cy,
        ) * w
    }

    /// Scalar superposition `sum_j R_ij psi_j`.
    pub fn superpose(&self, bus: usize, flux: &[f64]) -> f64 {
        self.r.row(bus).iter().zip(flux).map(|(r, p)| r * p).sum()
    }

    /// Complex superposition with the same fluxes (exact for frozen angles).
    pub fn superpose_complex(&self, bus: usize, flux: &[f64]) -> Complex64 {
        flux.iter()
            .enumerate()
            .map(|(j, p)| self.response(bus, j) * *p)
            .sum()
    }

    /// Unit phasor used for the projection at a bus.
    pub fn direction(&self, bus: usize) -> Complex64 {
        self.directions[bus]
    }

    pub fn device_index(&self, id: &str) -> Option<usize> {
        self.device_ids.iter().position(|d| d == id)
    }

    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.bus_ids.iter().position(|&b| b == id)
    }
}

/// Computes R for a stage: expand Y to xy form, add device blocks, invert
/// on the device columns, and project each contribution.
///
/// `pre_fault` holds the pre-fault bus voltages used for the projection
/// direction; `w` the per-device speeds.
pub fn compute_r(
    stage: &TopologyStage,
    devices: &[NetworkDevice],
    w: &[f64],
    pre_fault: &[Complex64],
    projection: Projection,
) -> Result<RMatrix> {
    assert_eq!(w.len(), devices.len());
    let net = ExtendedNetwork::new(stage, devices)?;
    let n = stage.y.len();
    let m = devices.len();
    let mut z = [
        Matrix::zeros(n, m),
        Matrix::zeros(n, m),
        Matrix::zeros(n, m),
        Matrix::zeros(n, m),
    ];
    let mut rhs = vec![0.0; 2 * n];
    for (j, d) in devices.iter().enumerate() {
        for axis in 0..2 {
            rhs.iter_mut().for_each(|v| *v = 0.0);
            rhs[2 * d.bus + axis] = 1.0;
            let col = net.solve_raw(&rhs);
            for i in 0..n {
                // axis 0 -> Z_xx / Z_yx, axis 1 -> Z_xy / Z_yy
                z[axis][(i, j)] = col[2 * i];
                z[2 + axis][(i, j)] = col[2 * i + 1];
            }
        }
    }
    let [z_xx, z_xy, z_yx, z_yy] = z;
    let directions: Vec<Complex64> = pre_fault
        .iter()
        .map(|v| {
            let mag = v.norm();
            if mag > 0.0 {
                v / mag
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect();
    let mut out = RMatrix {
        tag: stage.tag,
        bus_ids: stage.y.bus_ids.clone(),
        device_ids: devices.iter().map(|d| d.id.clone()).collect(),
        kinds: devices.iter().map(|d| d.kind).collect(),
        r: Matrix::zeros(n, m),
        z_xx,
        z_xy,
        z_yx,
        z_yy,
        c: devices.iter().map(|d| d.c).collect(),
        w: w.to_vec(),
        projection,
        directions,
    };
    for i in 0..n {
        for j in 0..m {
            let v = out.response(i, j);
            out.r[(i, j)] = match projection {
                Projection::PreFaultPhasor => (v * out.directions[i].conj()).re,
                Projection::StrictX => v.re,
            };
        }
    }
    if !out.r.is_finite() {
        return Err(Error::Singular {
            context: format!("R matrix ({} stage)", stage.tag.as_str()),
            location: "non-finite coefficient".into(),
        });
    }
    Ok(out)
}

/// Thevenin distance `|Z_aa + Z_bb - 2 Z_ab|` from `from` to every bus, on
/// the given extended network.
pub fn electrical_distance(net: &ExtendedNetwork, from: usize) -> Vec<f64> {
    let n = net.buses();
    let column = |k: usize| -> Vec<Complex64> {
        let mut rhs = vec![0.0; 2 * n];
        rhs[2 * k] = 1.0;
        net.solve(&rhs)
    };
    // Z is symmetric for reciprocal networks; column `from` gives Z_ab.
    let zf = column(from);
    (0..n)
        .map(|b| {
            let zb = column(b);
            (zf[from] + zb[b] - zf[b] - zb[from]).norm()
        })
        .collect()
}

/// Writes a labeled matrix as CSV (debug dump of Y or R).
pub fn matrix_csv(rows: &[String], cols: &[String], value: impl Fn(usize, usize) -> String) -> String {
    let mut s = String::from("row");
    for c in cols {
        s.push(',');
        s.push_str(c);
    }
    s.push('\n');
    for (i, r) in rows.iter().enumerate() {
        s.push_str(r);
        for j in 0..cols.len() {
            s.push(',');
            s.push_str(&value(i, j));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::parse_case;

    fn two_bus() -> SystemCase {
        parse_case(
            r#"{"base_mva":100,"f0":60,"buses":[
                {"id":1,"kind":"slack","V_set":1.0},{"id":2,"kind":"PQ","P_load":0.5,"Q_load":0.2}],
                "branches":[{"from":1,"to":2,"r":0.0,"x":0.1}]}"#,
        )
        .unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_bus_hand_assembly() {
        let case = two_bus();
        let loads = vec![c(0.0, 0.0), c(0.5, -0.2)];
        let st = build_stage(&case, None, StageTag::Pre, &loads).unwrap();
        let close = |a: Complex64, b: Complex64| (a - b).norm() < 1e-12;
        assert!(close(st.y.get(0, 0), c(0.0, -10.0)));
        assert!(close(st.y.get(0, 1), c(0.0, 10.0)));
        assert!(close(st.y.get(1, 0), c(0.0, 10.0)));
        assert!(close(st.y.get(1, 1), c(0.5, -10.2)));
    }

    #[test]
    fn fault_stage_differs_by_the_shunt_only() {
        let case = two_bus();
        let loads = vec![c(0.0, 0.0); 2];
        let s = crate::case::FaultScenario {
            id: "f".into(),
            fault_bus: 2,
            trip_branch: None,
            t_fault: 0.1,
            t_clr: 0.2,
            fault_admittance: 1e4,
            v_th1: 0.75,
            v_th2: 0.85,
            delta_t: 0.4,
            checkpoint: 0.4,
            monitor_bus: None,
        };
        let pre = build_stage(&case, Some(&s), StageTag::Pre, &loads).unwrap();
        let flt = build_stage(&case, Some(&s), StageTag::Flt, &loads).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let d = flt.y.get(i, j) - pre.y.get(i, j);
                if (i, j) == (1, 1) {
                    assert_eq!(d, c(0.0, -1e4));
                } else {
                    assert_eq!(d, c(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn tripping_a_radial_line_islands() {
        let case = two_bus();
        let s = crate::case::FaultScenario {
            id: "f".into(),
            fault_bus: 2,
            trip_branch: Some("1-2".into()),
            t_fault: 0.1,
            t_clr: 0.2,
            fault_admittance: 1e4,
            v_th1: 0.75,
            v_th2: 0.85,
            delta_t: 0.4,
            checkpoint: 0.4,
            monitor_bus: None,
        };
        let loads = vec![c(0.0, 0.0); 2];
        assert!(matches!(
            build_stage(&case, Some(&s), StageTag::Clr, &loads),
            Err(Error::Islanding(_))
        ));
    }

    #[test]
    fn single_open_circuit_machine_has_unit_r() {
        let case = parse_case(
            r#"{"base_mva":100,"f0":60,"buses":[{"id":1,"kind":"slack","V_set":1.0}]}"#,
        )
        .unwrap();
        let st = build_stage(&case, None, StageTag::Pre, &[c(0.0, 0.0)]).unwrap();
        for &(xq, xdp, delta) in &[(1.7, 0.25, 0.0), (0.25, 0.25, 0.3), (1.0, 0.3, -0.2)] {
            let a = crate::models::generator::generator_xy_admittance(xq, xdp, delta);
            let dev = NetworkDevice {
                id: "G".into(),
                kind: DeviceKind::Generator,
                bus: 0,
                block: a.block(),
                c: [a.c_x, a.c_y],
            };
            let dir = [Complex64::from_polar(1.0, delta)];
            let r = compute_r(&st, &[dev], &[1.0], &dir, Projection::PreFaultPhasor).unwrap();
            assert!((r.get(0, 0) - 1.0).abs() < 1e-9, "{}", r.get(0, 0));
            let v = r.response(0, 0);
            assert!((v - Complex64::from_polar(1.0, delta)).norm() < 1e-12);
        }
    }

    #[test]
    fn xy_expansion_matches_complex_product() {
        let case = two_bus();
        let y = build_ybus(&case, None);
        let v = vec![c(1.0, 0.1), c(0.9, -0.2)];
        let i = y.mul_vec(&v);
        let flat: Vec<f64> = v.iter().flat_map(|z| [z.re, z.im]).collect();
        let ixy = y.to_xy().mul_vec(&flat);
        for k in 0..2 {
            assert!((ixy[2 * k] - i[k].re).abs() < 1e-12);
            assert!((ixy[2 * k + 1] - i[k].im).abs() < 1e-12);
        }
    }
}
