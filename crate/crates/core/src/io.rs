//! Trajectory CSV and JSON report files.

use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::simulate::Trajectory;

/// Column names of the trajectory CSV, in order.
pub fn trajectory_header(traj: &Trajectory) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(traj.bus_ids.iter().map(|b| format!("bus_{b}_Vmag")));
    for g in &traj.gen_ids {
        for f in ["psi", "Efd", "Q", "Qspon", "Qexc"] {
            h.push(format!("gen_{g}_{f}"));
        }
    }
    h.extend(traj.motor_ids.iter().map(|m| format!("motor_{m}_slip")));
    h
}

fn push_num(s: &mut String, v: f64) {
    s.push(',');
    write!(s, "{v:.14e}").expect("write to String");
}

/// Renders the trajectory as CSV text, 15 significant digits per value.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut s = trajectory_header(traj).join(",");
    s.push('\n');
    for p in &traj.samples {
        write!(s, "{:.14e}", p.t).expect("write to String");
        for v in &p.v {
            push_num(&mut s, v.norm());
        }
        for g in &p.gens {
            for v in [g.psi, g.e_fd, g.q, g.q_spon, g.q_exc] {
                push_num(&mut s, v);
            }
        }
        for m in &p.motors {
            push_num(&mut s, m.slip);
        }
        s.push('\n');
    }
    s
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_trajectory(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &trajectory_csv(traj))
}

/// A trajectory CSV read back as named columns.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl TrajectoryTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn parse_trajectory(text: &str) -> Result<TrajectoryTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let columns: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {e}", i + 1))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(TrajectoryTable { columns, rows })
}

pub fn read_trajectory(path: impl AsRef<Path>) -> Result<TrajectoryTable> {
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    parse_trajectory(&text)
}

/// Pretty JSON with a trailing newline. Map keys come out in `BTreeMap`
/// order, so equal values give identical bytes.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

pub fn write_report<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &to_json(value))
}

pub fn read_report<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
}

/// Writes any text artifact, creating parent directories.
pub fn write_file(path: impl AsRef<Path>, text: &str) -> Result<()> {
    write_text(path.as_ref(), text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::StageTag;
    use crate::simulate::{GenSample, MotorSample, Sample};
    use num_complex::Complex64;

    fn two_step() -> Trajectory {
        let sample = |t: f64| Sample {
            t,
            stage: StageTag::Pre,
            v: vec![Complex64::new(1.0, 0.1 * t), Complex64::new(0.99, -0.02)],
            gens: vec![GenSample {
                psi: 1.0 + t / 3.0,
                e_fd: 2.0,
                q: 0.3,
                q_spon: 0.25,
                q_exc: 0.05,
                ..GenSample::default()
            }],
            motors: vec![MotorSample {
                slip: 0.0123456789012345,
                ..MotorSample::default()
            }],
        };
        Trajectory {
            bus_ids: vec![1, 2],
            gen_ids: vec!["G1".into()],
            motor_ids: vec!["M2".into()],
            samples: vec![sample(0.0), sample(0.001)],
            events: vec![],
        }
    }

    #[test]
    fn empty_trajectory_is_header_only() {
        let t = Trajectory {
            bus_ids: vec![1],
            ..Trajectory::default()
        };
        assert_eq!(trajectory_csv(&t), "t,bus_1_Vmag\n");
    }

    #[test]
    fn two_rows_and_full_precision() {
        let t = two_step();
        let text = trajectory_csv(&t);
        let table = parse_trajectory(&text).unwrap();
        assert_eq!(table.rows.len(), 2);
        assert_eq!(
            table.columns,
            "t,bus_1_Vmag,bus_2_Vmag,gen_G1_psi,gen_G1_Efd,gen_G1_Q,gen_G1_Qspon,gen_G1_Qexc,motor_M2_slip"
                .split(',')
                .collect::<Vec<_>>()
        );
        let psi = table.column("gen_G1_psi").unwrap();
        let exact = 1.0 + 0.001 / 3.0;
        assert!(((psi[1] - exact) / exact).abs() < 1e-14);
        assert_eq!(trajectory_csv(&t), text);
    }
}
