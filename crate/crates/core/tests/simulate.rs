mod common;

use num_complex::Complex64;
use stvs_core::case::{ieee39, SystemCase};
use stvs_core::io::{parse_trajectory, trajectory_csv};
use stvs_core::models::generator::from_dq;
use stvs_core::network::{build_stage, StageTag};
use stvs_core::simulate::{extract_metrics, network_solve, Event, Sample, SimOptions, Trajectory};
use stvs_core::study::Study;

fn sample_states(s: &Sample) -> Vec<f64> {
    let mut v = Vec::new();
    for g in &s.gens {
        v.extend([g.psi, g.e_fd, g.delta_psi, g.delta, g.omega]);
    }
    for m in &s.motors {
        v.extend([m.e.re, m.e.im, m.slip]);
    }
    v
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn assert_flat(case: SystemCase) {
    let study = Study::new(case).unwrap();
    let traj = study.simulate(None, &SimOptions { t_end: 5.0, ..Default::default() }).unwrap();
    let x0 = sample_states(&traj.samples[0]);
    let worst = traj.samples.iter().map(|s| max_diff(&sample_states(s), &x0)).fold(0.0, f64::max);
    assert!(worst < 1e-6, "drift {worst:e}");
    assert!(traj.events.is_empty());
}

#[test]
fn ieee39_without_fault_stays_flat() {
    assert_flat(ieee39());
}

#[test]
fn three_bus_without_fault_stays_flat() {
    assert_flat(common::three_bus());
}

fn ieee39_run(opts: &SimOptions) -> Trajectory {
    let study = Study::new(ieee39()).unwrap();
    study.simulate(Some(&common::flt_1727()), opts).unwrap()
}

#[test]
fn halving_the_step_barely_moves_the_states() {
    let a = ieee39_run(&SimOptions { t_end: 0.8, ..Default::default() });
    let b = ieee39_run(&SimOptions { t_end: 0.8, dt: 5e-4, ..Default::default() });
    let mut worst: f64 = 0.0;
    for s in &a.samples {
        let r = b
            .samples
            .iter()
            .find(|x| (x.t - s.t).abs() < 1e-12 && x.stage == s.stage)
            .unwrap();
        worst = worst.max(max_diff(&sample_states(s), &sample_states(r)));
    }
    assert!(worst < 1e-6, "{worst:e}");
}

fn event_pair(traj: &Trajectory, e: &Event) -> (Sample, Sample) {
    let k = traj.samples.iter().position(|s| s.t == e.t).unwrap();
    (traj.samples[k].clone(), traj.samples[k + 1].clone())
}

#[test]
fn states_continuous_and_voltages_jump_at_events() {
    let sc = common::flt_1727();
    let traj = ieee39_run(&SimOptions { t_end: 0.5, ..Default::default() });
    let names: Vec<&str> = traj.events.iter().map(|e| e.event.as_str()).collect();
    assert_eq!(names, ["fault_on", "fault_cleared"]);
    let mon = traj.bus_index(sc.monitor()).unwrap();
    let f = traj.bus_index(sc.fault_bus).unwrap();
    for e in &traj.events {
        let (before, after) = event_pair(&traj, e);
        assert_eq!(before.t, after.t);
        assert_ne!(before.stage, after.stage);
        assert!(max_diff(&sample_states(&before), &sample_states(&after)) <= 1e-12);
        for b in [mon, f] {
            assert!((after.v[b].norm() - before.v[b].norm()).abs() > 0.0);
        }
    }
    // sag at inception, partial recovery at clearing
    let (b0, a0) = event_pair(&traj, &traj.events[0]);
    let (b1, a1) = event_pair(&traj, &traj.events[1]);
    assert!(a0.v[mon].norm() < 0.7 * b0.v[mon].norm());
    assert!(a1.v[mon].norm() > b1.v[mon].norm() + 0.2);
    assert!(a0.v[f].norm() < 0.01);
}

#[test]
fn shadow_flux_partitions_q_at_every_step() {
    let traj = ieee39_run(&SimOptions { t_end: 1.0, ..Default::default() });
    let tf = traj.events[0].t;
    for s in &traj.samples {
        for g in &s.gens {
            assert!((g.q_spon + g.q_exc - g.q).abs() <= 1e-9);
            if s.t <= tf {
                assert_eq!(g.q_exc, 0.0);
            }
        }
    }
    // spontaneous response carries the fault; the exciter share grows after
    let k = traj.gen_index("G32").unwrap();
    let at = |t: f64| traj.samples.iter().find(|s| (s.t - t).abs() < 1e-9 && s.stage != StageTag::Pre).unwrap().gens[k];
    let pre = traj.samples[0].gens[k];
    assert!(at(0.15).q_spon > 2.0 * pre.q);
    assert!(at(0.15).q_spon > 10.0 * at(0.15).q_exc.abs());
    assert!(at(0.3).q_exc < at(0.6).q_exc && at(0.6).q_exc < at(1.0).q_exc);
}

#[test]
fn runs_are_bit_identical() {
    let opts = SimOptions { t_end: 0.6, ..Default::default() };
    let a = ieee39_run(&opts);
    let b = ieee39_run(&opts);
    assert_eq!(a, b);
    assert_eq!(trajectory_csv(&a), trajectory_csv(&b));
}

#[test]
fn more_motor_load_slows_recovery() {
    let sc = common::flt_1727();
    let opts = SimOptions { t_end: sc.t_clr + sc.checkpoint + 0.05, ..Default::default() };
    let mut prev = f64::INFINITY;
    for share in [0.0, 0.3, 0.6, 0.9] {
        let mut case = ieee39();
        let k = case.bus_index(15).unwrap();
        case.buses[k].motor_share = share;
        let traj = Study::new(case).unwrap().simulate(Some(&sc), &opts).unwrap();
        let m = extract_metrics(&traj, &sc).unwrap();
        let v = m.iter().find(|m| m.bus == 15).unwrap().v_checkpoint;
        assert!(v <= prev, "share {share}: {v} > {prev}");
        prev = v;
    }
}

/// Re-reads the CSV and recomputes nadir and checkpoint voltage without the
/// crate's metric code.
#[test]
fn metrics_agree_with_csv_reanalysis() {
    let sc = common::flt_1727();
    let traj = ieee39_run(&SimOptions { t_end: 0.7, ..Default::default() });
    let table = parse_trajectory(&trajectory_csv(&traj)).unwrap();
    let t = table.column("t").unwrap();
    let metrics = extract_metrics(&traj, &sc).unwrap();
    for bus in [15u32, 16, 17, 27] {
        let v = table.column(&format!("bus_{bus}_Vmag")).unwrap();
        // rows after the first fault sample
        let first = t.iter().position(|&x| x >= sc.t_fault).unwrap() + 1;
        let nadir = v[first..].iter().cloned().fold(f64::INFINITY, f64::min);
        let tc = sc.t_clr + sc.checkpoint;
        let k = t.iter().rposition(|&x| x <= tc).unwrap();
        let check = if t[k] == tc { v[k] } else { v[k] + (v[k + 1] - v[k]) * (tc - t[k]) / (t[k + 1] - t[k]) };
        let m = metrics.iter().find(|m| m.bus == bus).unwrap();
        assert!((m.nadir - nadir).abs() <= 1e-13 * nadir, "{bus}: {} {nadir}", m.nadir);
        assert!((m.v_checkpoint - check).abs() <= 1e-12, "{bus}: {} {check}", m.v_checkpoint);
    }
}

fn synthetic(v: impl Fn(f64) -> f64) -> Trajectory {
    let mut samples = Vec::new();
    for k in 0..=100 {
        let t = k as f64 * 0.01;
        let stage = if t < 0.1 {
            StageTag::Pre
        } else if t < 0.2 {
            StageTag::Flt
        } else {
            StageTag::Clr
        };
        samples.push(Sample { t, stage, v: vec![Complex64::new(v(t), 0.0)], gens: vec![], motors: vec![] });
    }
    Trajectory { bus_ids: vec![1], samples, ..Trajectory::default() }
}

#[test]
fn synthetic_metrics() {
    let mut sc = common::three_bus_fault();
    sc.fault_bus = 1;
    let rising = synthetic(|t| if t < 0.1 { 1.0 } else { 0.3 + 0.5 * (t - 0.1) });
    let m = &extract_metrics(&rising, &sc).unwrap()[0];
    assert_eq!(m.t_nadir, 0.1);
    assert!((m.nadir - 0.3).abs() < 1e-15);
    assert!(m.recovery_time.is_none());
    let recovers = synthetic(|t| if t < 0.1 { 1.0 } else if t < 0.2 { 0.3 } else { 0.95 });
    let m = &extract_metrics(&recovers, &sc).unwrap()[0];
    assert_eq!(m.recovery_time, Some(0.2));
    sc.checkpoint = 5.0;
    assert!(extract_metrics(&recovers, &sc).is_err());
}

/// Round-rotor machines make every device a plain Norton source, so the
/// three-bus network can be solved by Cramer's rule on the complex 3x3.
#[test]
fn network_solve_matches_hand_solution() {
    let mut case = common::three_bus();
    for g in &mut case.generators {
        g.x_q = g.x_d_prime;
    }
    let study = Study::new(case.clone()).unwrap();
    let pf = study.power_flow();
    let j = Complex64::i();
    let mut y = [[Complex64::new(0.0, 0.0); 3]; 3];
    for br in &case.branches {
        let (a, b) = (case.bus_index(br.from).unwrap(), case.bus_index(br.to).unwrap());
        let ys = 1.0 / Complex64::new(br.r, br.x);
        let half = j * (br.b / 2.0);
        y[a][a] += ys + half;
        y[b][b] += ys + half;
        y[a][b] -= ys;
        y[b][a] -= ys;
    }
    for s in case.shunts.iter().filter(|s| s.status) {
        let k = case.bus_index(s.bus).unwrap();
        y[k][k] += j * s.b;
    }
    for (k, bus) in case.buses.iter().enumerate() {
        y[k][k] += Complex64::new(bus.p_load, -bus.q_load) / pf.voltage(k).norm_sqr();
    }
    let mut inj = [Complex64::new(0.0, 0.0); 3];
    let gens: Vec<_> = (0..study.init.generators.len()).map(|k| study.init.generator_state(k)).collect();
    for (g, (init, st)) in case.generators.iter().zip(study.init.generators.iter().zip(&gens)) {
        let e = from_dq(0.0, st.psi * 0.97, st.delta);
        y[init.bus_index][init.bus_index] += 1.0 / (j * g.x_d_prime);
        inj[init.bus_index] += e / (j * g.x_d_prime);
    }
    let det = |m: &[[Complex64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&y);
    let hand: Vec<Complex64> = (0..3)
        .map(|c| {
            let mut m = y;
            for r in 0..3 {
                m[r][c] = inj[r];
            }
            det(&m) / d
        })
        .collect();
    let scaled: Vec<_> = gens.iter().map(|g| stvs_core::models::GeneratorState { psi: g.psi * 0.97, ..*g }).collect();
    let stage = build_stage(&case, None, StageTag::Pre, &study.init.loads).unwrap();
    let v = network_solve(&stage, &study.init, &scaled, &[]).unwrap();
    for k in 0..3 {
        assert!((v[k] - hand[k]).norm() <= 1e-12, "bus {k}: {} vs {}", v[k], hand[k]);
    }
}

#[test]
fn open_circuit_machine_voltage_is_its_flux() {
    let case: SystemCase = stvs_core::case::parse_case(
        r#"{"base_mva":100,"f0":60,
            "buses":[{"id":1,"kind":"slack","V_set":1.03}],
            "generators":[{"id":"G","bus":1,"x_d":1.8,"x_d_prime":0.3,"x_q":1.7,"x_ad":1.6,
              "T_d0_prime":6,"K_A":5,"T_e":0.3,"Q_max":2}]}"#,
    )
    .unwrap();
    let study = Study::new(case.clone()).unwrap();
    let mut st = study.init.generator_state(0);
    st.psi = 0.9;
    let stage = build_stage(&case, None, StageTag::Pre, &study.init.loads).unwrap();
    let v = network_solve(&stage, &study.init, &[st], &[]).unwrap();
    let want = from_dq(0.0, 0.9, st.delta);
    assert!((v[0] - want).norm() < 1e-12);
}
