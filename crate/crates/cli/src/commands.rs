use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use stvs_core::analytic::{analytic_q, compare};
use stvs_core::case::{load_case, load_operating_point, load_scenarios, FaultScenario, SystemCase};
use stvs_core::indexes::{
    assess_requirements, check_security, condenser_siting, direct_verdict, fault_zone, index_report, sample_points,
    Evaluator, IndexMethod, RequirementTable, SamplerConfig, SimulationEvaluator,
};
use stvs_core::io::{read_report, trajectory_csv};
use stvs_core::network::StageTag;
use stvs_core::simulate::{extract_metrics, BusMetrics, Event, SimOptions, Trajectory};
use stvs_core::study::Study;
use stvs_core::{apply_operating_point, solve_power_flow, Error, Result};

use crate::args::*;
use crate::output::{shown, Header, Sink};

pub fn run(cli: &Cli) -> Result<()> {
    let sink = Sink {
        root: cli.global.out.clone(),
        format: cli.global.format,
    };
    let g = &cli.global;
    match &cli.command {
        Command::Case(CaseCmd::Validate { case }) => case_validate(case),
        Command::Pf(PfCmd::Run { input }) => {
            let mut h = header("pf run", g);
            let case = load_input(input, &mut h)?;
            h.print();
            pf_run(&case, &sink)
        }
        Command::Sim(SimCmd::Run { input, sim, superposition }) => {
            let mut h = header("sim run", g);
            let (case, scenarios) = load_scenario_input(input, &mut h)?;
            let opts = sim_options(sim, SimOptions::default(), &mut h);
            h.print();
            per_scenario(&scenarios, |sc| sim_run(&case, sc, &opts, *superposition, &sink))
        }
        Command::Analytic(AnalyticCmd::Compare { input, sim, window }) => {
            let mut h = header("analytic compare", g);
            let (case, scenarios) = load_scenario_input(input, &mut h)?;
            h.set("window", window, "flag");
            let base = SimOptions::default();
            let opts = sim_options(sim, base, &mut h);
            h.print();
            per_scenario(&scenarios, |sc| analytic_compare(&case, sc, &opts, *window, &sink))
        }
        Command::Index(IndexCmd::Report { input, sim, method, bus, siting }) => {
            let mut h = header("index report", g);
            let (case, scenarios) = load_scenario_input(input, &mut h)?;
            h.set("method", format!("{method:?}").to_lowercase(), "flag");
            let opts = sim_options(sim, SimOptions::default(), &mut h);
            h.print();
            per_scenario(&scenarios, |sc| index_run(&case, sc, *method, &opts, bus, siting, &sink))
        }
        Command::Assess(AssessCmd::Requirements { input, sampler, samples }) => {
            let mut h = header("assess requirements", g);
            let (case, scenarios) = load_scenario_input(input, &mut h)?;
            let cfg = sampler_config(sampler, g.seed, &mut h);
            h.set("samples", samples, "flag");
            h.print();
            assess(&case, &scenarios, &cfg, *samples, &sink)
        }
        Command::Security(SecurityCmd::Check { input, requirements, verify }) => {
            let mut h = header("security check", g);
            // The checker applies the point itself.
            let (case, scenarios) = load_scenarios_with(input, &mut h, false)?;
            if let Some(p) = &input.case.point {
                h.set("point", shown(p), "flag");
            }
            h.set("requirements", shown(requirements), "flag");
            h.print();
            let point = match &input.case.point {
                Some(p) => load_operating_point(p)?,
                None => Default::default(),
            };
            let table: RequirementTable = read_report(requirements)?;
            security(&case, &point, &scenarios, &table, *verify, &sink)
        }
        Command::Sweep(SweepCmd::Points { input, sampler, sim, samples, first }) => {
            let mut h = header("sweep points", g);
            let (case, scenarios) = load_scenario_input(input, &mut h)?;
            let cfg = sampler_config(sampler, g.seed, &mut h);
            h.set("samples", samples, "flag");
            h.set("first", first, "flag");
            let opts = sim_options(sim, SimOptions::default(), &mut h);
            h.print();
            for sc in &scenarios {
                sweep(&case, sc, &cfg, &opts, *first, *samples, &sink)?;
            }
            Ok(())
        }
    }
}

fn header(cmd: &str, g: &Global) -> Header {
    let mut h = Header::new(cmd);
    h.set("seed", g.seed, "flag");
    match g.jobs {
        Some(n) => h.set("jobs", n, "flag"),
        None => h.set("jobs", rayon::current_num_threads(), "available cores"),
    }
    h.set("format", format!("{:?}", g.format).to_lowercase(), "flag");
    h.set("out", shown(&g.out), "flag");
    h
}

fn load_input(input: &CaseInput, h: &mut Header) -> Result<SystemCase> {
    load_case_with(input, h, true)
}

fn load_case_with(input: &CaseInput, h: &mut Header, apply_point: bool) -> Result<SystemCase> {
    let case = load_case(&input.case)?;
    h.set("case", shown(&input.case), "flag");
    match input.point.as_ref().filter(|_| apply_point) {
        Some(p) => {
            h.set("point", shown(p), "flag");
            apply_operating_point(&case, &load_operating_point(p)?)
        }
        None => Ok(case),
    }
}

fn load_scenario_input(input: &ScenarioInput, h: &mut Header) -> Result<(SystemCase, Vec<FaultScenario>)> {
    load_scenarios_with(input, h, true)
}

fn load_scenarios_with(input: &ScenarioInput, h: &mut Header, apply_point: bool) -> Result<(SystemCase, Vec<FaultScenario>)> {
    let case = load_case_with(&input.case, h, apply_point)?;
    let mut scenarios = load_scenarios(&input.scenario)?;
    h.set("scenario", shown(&input.scenario), "flag");
    let pick = |flag: Option<f64>, from_file: f64| match flag {
        Some(v) => (v, "flag"),
        None => (from_file, "scenario file"),
    };
    for sc in &mut scenarios {
        let (v, s) = pick(input.delta_t, sc.delta_t);
        sc.delta_t = v;
        h.set(&format!("{}.delta_T", sc.id), v, s);
        let (v, s) = pick(input.checkpoint, sc.checkpoint);
        sc.checkpoint = v;
        h.set(&format!("{}.checkpoint", sc.id), v, s);
        let (v, s) = pick(input.v_th1, sc.v_th1);
        sc.v_th1 = v;
        h.set(&format!("{}.V_th1", sc.id), v, s);
        let (v, s) = pick(input.v_th2, sc.v_th2);
        sc.v_th2 = v;
        h.set(&format!("{}.V_th2", sc.id), v, s);
        sc.validate(&case)?;
    }
    Ok((case, scenarios))
}

fn sim_options(f: &SimFlags, base: SimOptions, h: &mut Header) -> SimOptions {
    let mut o = base;
    let src = |set: bool| if set { "flag" } else { "default" };
    if let Some(v) = f.dt {
        o.dt = v;
    }
    h.set("dt", o.dt, src(f.dt.is_some()));
    if let Some(v) = f.t_end {
        o.t_end = v;
    }
    h.set("t_end", o.t_end, src(f.t_end.is_some()));
    o.swing_enabled = !f.no_swing;
    h.set("swing", o.swing_enabled, src(f.no_swing));
    if let Some(v) = f.record_stride {
        o.record_stride = v;
    }
    h.set("record_stride", o.record_stride, src(f.record_stride.is_some()));
    o
}

fn sampler_config(f: &SamplerFlags, seed: u64, h: &mut Header) -> SamplerConfig {
    let cfg = SamplerConfig {
        seed,
        v_min: f.v_min,
        v_max: f.v_max,
        shunt_toggle: f.shunt_toggle,
        zone_radius: f.radius,
    };
    h.set("zone_radius", cfg.zone_radius, "flag");
    h.set("V_g0 range", format!("[{}, {}]", cfg.v_min, cfg.v_max), "flag");
    h.set("shunt_toggle", cfg.shunt_toggle, "flag");
    cfg
}

/// Runs scenarios in parallel; each writes only under its own id.
fn per_scenario(scenarios: &[FaultScenario], f: impl Fn(&FaultScenario) -> Result<String> + Sync) -> Result<()> {
    let lines: Vec<Result<String>> = scenarios.par_iter().map(&f).collect();
    for l in lines {
        print!("{}", l?);
    }
    Ok(())
}

fn case_validate(path: &std::path::Path) -> Result<()> {
    let case = load_case(path)?;
    case.validate()?;
    let condensers = case.generators.iter().filter(|g| g.is_condenser).count();
    let summary = serde_json::json!({
        "case": shown(path),
        "valid": true,
        "buses": case.buses.len(),
        "branches": case.branches.len(),
        "generators": case.generators.len() - condensers,
        "condensers": condensers,
        "motors": case.effective_motors().len(),
        "shunts": case.shunts.len(),
    });
    println!("{}", serde_json::to_string_pretty(&summary).expect("json value"));
    Ok(())
}

#[derive(Serialize)]
struct PfRow {
    bus: u32,
    vm: f64,
    va: f64,
}

fn pf_run(case: &SystemCase, sink: &Sink) -> Result<()> {
    let pf = solve_power_flow(case)?;
    let path = match sink.format {
        Format::Json => sink.json(None, "power_flow", &pf)?,
        Format::Csv => {
            let rows: Vec<PfRow> = (0..pf.bus_ids.len())
                .map(|k| PfRow {
                    bus: pf.bus_ids[k],
                    vm: pf.vm[k],
                    va: pf.va[k],
                })
                .collect();
            sink.table(None, "power_flow", &rows)?
        }
    };
    println!(
        "power flow converged in {} iterations, mismatch {:.3e} pu -> {}",
        pf.iterations,
        pf.mismatch,
        shown(&path)
    );
    Ok(())
}

#[derive(Serialize)]
struct MetricsReport<'a> {
    scenario_id: &'a str,
    monitor_bus: u32,
    events: &'a [Event],
    buses: &'a [BusMetrics],
}

fn simulate(case: &SystemCase, sc: &FaultScenario, opts: &SimOptions) -> Result<(Study, Trajectory)> {
    let study = Study::new(case.clone())?;
    let traj = study.simulate(Some(sc), opts)?;
    Ok((study, traj))
}

fn sim_run(case: &SystemCase, sc: &FaultScenario, opts: &SimOptions, superposition: bool, sink: &Sink) -> Result<String> {
    let (study, traj) = simulate(case, sc, opts)?;
    let id = Some(sc.id.as_str());
    sink.text(id, "trajectory.csv", &trajectory_csv(&traj))?;
    let metrics = extract_metrics(&traj, sc)?;
    match sink.format {
        Format::Json => sink.json(
            id,
            "metrics",
            &MetricsReport {
                scenario_id: &sc.id,
                monitor_bus: sc.monitor(),
                events: &traj.events,
                buses: &metrics,
            },
        )?,
        Format::Csv => sink.table(id, "metrics", &metrics)?,
    };
    if superposition {
        sink.text(id, "superposition.csv", &superposition_csv(&study, sc, &traj)?)?;
    }
    let m = metrics.iter().find(|m| m.bus == sc.monitor()).expect("monitor validated");
    Ok(format!(
        "{}: bus {} nadir {:.4} pu, V(T_clr+{}) {:.4} pu -> {}\n",
        sc.id,
        m.bus,
        m.nadir,
        sc.checkpoint,
        m.v_checkpoint,
        shown(&sink.path(id, ""))
    ))
}

/// `|V_i|` next to `sum_j R_ij psi_j` with the R of each sample's stage.
fn superposition_csv(study: &Study, sc: &FaultScenario, traj: &Trajectory) -> Result<String> {
    let r = [StageTag::Pre, StageTag::Flt, StageTag::Clr]
        .into_iter()
        .map(|t| study.r_matrix(Some(sc), t))
        .collect::<Result<Vec<_>>>()?;
    let mut s = String::from("t");
    for b in &traj.bus_ids {
        write!(s, ",bus_{b}_V,bus_{b}_Rpsi").expect("string");
    }
    s.push('\n');
    for p in &traj.samples {
        let rm = &r[match p.stage {
            StageTag::Pre => 0,
            StageTag::Flt => 1,
            StageTag::Clr => 2,
        }];
        let flux = p.fluxes();
        write!(s, "{:.14e}", p.t).expect("string");
        for b in 0..traj.bus_ids.len() {
            write!(s, ",{:.14e},{:.14e}", p.v[b].norm(), rm.superpose(b, &flux)).expect("string");
        }
        s.push('\n');
    }
    Ok(s)
}

fn analytic_compare(case: &SystemCase, sc: &FaultScenario, opts: &SimOptions, window: f64, sink: &Sink) -> Result<String> {
    let opts = SimOptions {
        t_end: opts.t_end.max(sc.t_clr + window),
        ..opts.clone()
    };
    let (study, traj) = simulate(case, sc, &opts)?;
    let sol = study.analytic(sc)?;
    let report = compare(&sol, &traj, sc, window);
    let id = Some(sc.id.as_str());
    sink.json(id, "analytic_compare", &report)?;

    let mut s = String::from("t");
    for g in &traj.gen_ids {
        write!(s, ",gen_{g}_psi_sim,gen_{g}_psi_analytic,gen_{g}_Qspon_analytic,gen_{g}_Qexc_analytic").expect("string");
    }
    s.push('\n');
    let (tf, tc) = (sol.profile.t_fault, sol.profile.t_clr);
    for p in traj.samples.iter().filter(|p| p.stage != StageTag::Pre && p.t <= tc + window + 1e-12) {
        let (stage, local) = if p.stage == StageTag::Flt { (0, p.t - tf) } else { (1, p.t - tc) };
        write!(s, "{:.14e}", p.t).expect("string");
        for (k, g) in p.gens.iter().enumerate() {
            let c = &sol.generators[k][stage];
            let (q_spon, q_exc, _) = analytic_q(c, &study.init.models[k].params, local);
            write!(s, ",{:.14e},{:.14e},{:.14e},{:.14e}", g.psi, sol.flux(k, p.t), q_spon, q_exc).expect("string");
        }
        s.push('\n');
    }
    sink.text(id, "analytic_flux.csv", &s)?;
    Ok(format!(
        "{}: max flux error {:.3}% during the fault, {:.3}% over {} s after clearing\n",
        sc.id,
        100.0 * report.max_rel_fault,
        100.0 * report.max_rel_post_clearing,
        window
    ))
}

#[derive(Serialize)]
struct IndexRow<'a> {
    bus: u32,
    device: &'a str,
    vic: f64,
    vrc: f64,
}

fn index_run(
    case: &SystemCase,
    sc: &FaultScenario,
    method: Method,
    opts: &SimOptions,
    buses: &[u32],
    siting: &[String],
    sink: &Sink,
) -> Result<String> {
    let study = Study::new(case.clone())?;
    let (method, traj) = match method {
        Method::Analytic => (IndexMethod::Analytic, None),
        Method::Simulated => {
            let opts = SimOptions {
                t_end: opts.t_end.max(sc.t_clr + sc.delta_t),
                ..opts.clone()
            };
            (IndexMethod::Simulated, Some(study.simulate(Some(sc), &opts)?))
        }
    };
    let rep = index_report(&study, sc, method, traj.as_ref(), buses)?;
    let id = Some(sc.id.as_str());
    match sink.format {
        Format::Json => sink.json(id, "indexes", &rep)?,
        Format::Csv => {
            let mut rows = Vec::new();
            for (bus, per) in &rep.vic {
                for (dev, vic) in per {
                    rows.push(IndexRow {
                        bus: *bus,
                        device: dev,
                        vic: *vic,
                        vrc: rep.vrc[bus][dev],
                    });
                }
                rows.push(IndexRow {
                    bus: *bus,
                    device: "total",
                    vic: rep.vic_total[bus],
                    vrc: rep.vrc_total[bus],
                });
            }
            sink.table(id, "indexes", &rows)?
        }
    };
    let mut line = String::new();
    let m = sc.monitor();
    if let (Some(vic), Some(vrc)) = (rep.vic_total.get(&m), rep.vrc_total.get(&m)) {
        writeln!(line, "{}: bus {m} VIC {vic:.4}, VRC {vrc:.4}", sc.id).expect("string");
    }
    if !siting.is_empty() {
        let rows = condenser_siting(case, sc, siting)?;
        sink.table(id, "siting", &rows)?;
        for r in &rows {
            writeln!(
                line,
                "  {:<8} VIC_{m} {:.4}",
                r.condenser.as_deref().unwrap_or("none"),
                r.vic
            )
            .expect("string");
        }
    }
    Ok(line)
}

#[derive(Serialize)]
struct SampleRow<'a> {
    point: &'a str,
    vic: f64,
    vrc: f64,
    v_nadir: f64,
    v_checkpoint: f64,
}

fn assess(case: &SystemCase, scenarios: &[FaultScenario], cfg: &SamplerConfig, n: usize, sink: &Sink) -> Result<()> {
    let study = Study::new(case.clone())?;
    let mut table = RequirementTable::new();
    for sc in scenarios {
        let zone = fault_zone(&study, sc, cfg.zone_radius)?;
        let points = sample_points(case, &zone, cfg, 0, n);
        let ev = SimulationEvaluator::new(case.clone(), sc.clone());
        let curve = assess_requirements(&ev, sc, &points)?;
        let id = Some(sc.id.as_str());
        match sink.format {
            Format::Json => sink.json(id, "requirement_curve", &curve)?,
            Format::Csv => {
                let rows: Vec<SampleRow> = curve
                    .samples
                    .iter()
                    .map(|s| SampleRow {
                        point: &s.point,
                        vic: s.outcome.vic,
                        vrc: s.outcome.vrc,
                        v_nadir: s.outcome.v_nadir,
                        v_checkpoint: s.outcome.v_checkpoint,
                    })
                    .collect();
                sink.table(id, "requirement_curve", &rows)?
            }
        };
        let req = curve.requirement();
        println!(
            "{}: VIR {:.4} ({:?}), VRR {:.4} ({:?}), {} samples, {} discarded",
            sc.id,
            req.vir,
            curve.vir.bound,
            req.vrr,
            curve.vrr.bound,
            req.n_samples,
            curve.discarded
        );
        table.insert(sc.id.clone(), req);
    }
    let path = sink.json(None, "requirements", &table)?;
    println!("requirements -> {}", shown(&path));
    Ok(())
}

#[derive(Serialize)]
struct VerdictRow {
    fault_id: String,
    vic: f64,
    vir: f64,
    margin_vic: f64,
    vrc: f64,
    vrr: f64,
    margin_vrc: f64,
    secure: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    v_nadir: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    v_checkpoint: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    direct_secure: Option<bool>,
}

#[derive(Serialize)]
struct SecurityOut<'a> {
    point: Option<&'a str>,
    secure: bool,
    verdicts: &'a [VerdictRow],
}

fn security(
    case: &SystemCase,
    point: &stvs_core::OperatingPoint,
    scenarios: &[FaultScenario],
    table: &RequirementTable,
    verify: bool,
    sink: &Sink,
) -> Result<()> {
    let rep = check_security(case, point, scenarios, table)?;
    let direct: Vec<Option<(f64, f64, bool)>> = if verify {
        scenarios
            .par_iter()
            .map(|sc| {
                let o = SimulationEvaluator::new(case.clone(), sc.clone()).evaluate(point)?;
                let d = direct_verdict(&o, sc);
                Ok(Some((d.v_nadir, d.v_checkpoint, d.secure)))
            })
            .collect::<Result<_>>()?
    } else {
        vec![None; scenarios.len()]
    };
    let rows: Vec<VerdictRow> = rep
        .verdicts
        .iter()
        .zip(direct)
        .map(|(v, d)| VerdictRow {
            fault_id: v.fault_id.clone(),
            vic: v.vic,
            vir: v.vir,
            margin_vic: v.margin_vic,
            vrc: v.vrc,
            vrr: v.vrr,
            margin_vrc: v.margin_vrc,
            secure: v.secure,
            v_nadir: d.map(|d| d.0),
            v_checkpoint: d.map(|d| d.1),
            direct_secure: d.map(|d| d.2),
        })
        .collect();
    let name = format!("security_{}", point.id.as_deref().unwrap_or("base"));
    let path = match sink.format {
        Format::Json => sink.json(
            None,
            &name,
            &SecurityOut {
                point: point.id.as_deref(),
                secure: rep.secure,
                verdicts: &rows,
            },
        )?,
        Format::Csv => sink.table(None, &name, &rows)?,
    };
    println!("{:<10} {:>8} {:>8} {:>9} {:>8} {:>8} {:>9}  verdict", "fault", "VIC", "VIR", "margin", "VRC", "VRR", "margin");
    for r in &rows {
        let mut verdict = if r.secure { "secure" } else { "insecure" }.to_string();
        if let Some(d) = r.direct_secure {
            write!(verdict, " (simulated: {})", if d { "secure" } else { "insecure" }).expect("string");
        }
        println!(
            "{:<10} {:>8.4} {:>8.4} {:>+9.4} {:>8.4} {:>8.4} {:>+9.4}  {verdict}",
            r.fault_id, r.vic, r.vir, r.margin_vic, r.vrc, r.vrr, r.margin_vrc
        );
    }
    println!("overall: {} -> {}", if rep.secure { "secure" } else { "insecure" }, shown(&path));
    Ok(())
}

fn sweep(
    case: &SystemCase,
    sc: &FaultScenario,
    cfg: &SamplerConfig,
    opts: &SimOptions,
    first: u64,
    n: usize,
    sink: &Sink,
) -> Result<()> {
    let study = Study::new(case.clone())?;
    let zone = fault_zone(&study, sc, cfg.zone_radius)?;
    let points = sample_points(case, &zone, cfg, first, n);
    let mut ev = SimulationEvaluator::new(case.clone(), sc.clone());
    ev.opts = SimOptions {
        t_end: opts.t_end.max(ev.opts.t_end),
        ..opts.clone()
    };
    let outcomes: Vec<Result<_>> = points.par_iter().map(|p| ev.evaluate(p)).collect();
    let mut rows = Vec::new();
    let mut discarded = 0;
    for (p, o) in points.iter().zip(outcomes) {
        match o {
            Ok(o) => rows.push((p.id.clone().unwrap_or_default(), o)),
            Err(e) if e.is_infeasible() => discarded += 1,
            Err(e) => return Err(e),
        }
    }
    let table: Vec<SampleRow> = rows
        .iter()
        .map(|(id, o)| SampleRow {
            point: id,
            vic: o.vic,
            vrc: o.vrc,
            v_nadir: o.v_nadir,
            v_checkpoint: o.v_checkpoint,
        })
        .collect();
    let path = sink.table(Some(&sc.id), "sweep", &table)?;
    let x: Vec<f64> = rows.iter().map(|r| r.1.vic).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.1.v_nadir).collect();
    let zone_info: BTreeMap<&str, usize> = [("generators", zone.generators.len()), ("shunts", zone.shunts.len())].into();
    println!(
        "{}: {} points ({} discarded), zone {:?}, r(VIC, V_nadir) = {:.4} -> {}",
        sc.id,
        rows.len(),
        discarded,
        zone_info,
        pearson(&x, &y).unwrap_or(f64::NAN),
        shown(&path)
    );
    if rows.is_empty() {
        return Err(Error::InsufficientData(format!("{}: no feasible sample", sc.id)));
    }
    Ok(())
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    Some(sxy / (sxx * syy).sqrt())
}
