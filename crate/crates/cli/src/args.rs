use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "stvs", version, about = "Short-term voltage stability studies with flux-linkage indexes")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct Global {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Format of tabular outputs.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Case file checks.
    #[command(subcommand)]
    Case(CaseCmd),
    /// Power flow.
    #[command(subcommand)]
    Pf(PfCmd),
    /// Time-domain fault simulation.
    #[command(subcommand)]
    Sim(SimCmd),
    /// Closed-form flux against simulation.
    #[command(subcommand)]
    Analytic(AnalyticCmd),
    /// VIC / VRC indexes.
    #[command(subcommand)]
    Index(IndexCmd),
    /// Requirement assessment by sampling.
    #[command(subcommand)]
    Assess(AssessCmd),
    /// Security check of an operating point against requirements.
    #[command(subcommand)]
    Security(SecurityCmd),
    /// Random operating-point sweeps.
    #[command(subcommand)]
    Sweep(SweepCmd),
}

#[derive(Subcommand, Debug)]
pub enum CaseCmd {
    Validate {
        case: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum PfCmd {
    Run {
        #[command(flatten)]
        input: CaseInput,
    },
}

#[derive(Subcommand, Debug)]
pub enum SimCmd {
    Run {
        #[command(flatten)]
        input: ScenarioInput,
        #[command(flatten)]
        sim: SimFlags,
        /// Also write bus voltages next to their flux superposition.
        #[arg(long)]
        superposition: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum AnalyticCmd {
    Compare {
        #[command(flatten)]
        input: ScenarioInput,
        #[command(flatten)]
        sim: SimFlags,
        /// Post-clearing window compared (s).
        #[arg(long, default_value_t = 0.4)]
        window: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Analytic,
    Simulated,
}

#[derive(Subcommand, Debug)]
pub enum IndexCmd {
    Report {
        #[command(flatten)]
        input: ScenarioInput,
        #[command(flatten)]
        sim: SimFlags,
        #[arg(long, value_enum, default_value_t = Method::Analytic)]
        method: Method,
        /// Buses to report (default: all).
        #[arg(long, value_delimiter = ',')]
        bus: Vec<u32>,
        /// Candidate condensers for a siting batch at the monitored bus.
        #[arg(long, value_delimiter = ',')]
        siting: Vec<String>,
    },
}

#[derive(Subcommand, Debug)]
pub enum AssessCmd {
    Requirements {
        #[command(flatten)]
        input: ScenarioInput,
        #[command(flatten)]
        sampler: SamplerFlags,
        #[arg(long, default_value_t = 40)]
        samples: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum SecurityCmd {
    Check {
        #[command(flatten)]
        input: ScenarioInput,
        /// Requirement table `{fault_id: {vir, vrr, ...}}`.
        #[arg(long)]
        requirements: PathBuf,
        /// Also simulate every fault and report the direct verdict.
        #[arg(long)]
        verify: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum SweepCmd {
    Points {
        #[command(flatten)]
        input: ScenarioInput,
        #[command(flatten)]
        sampler: SamplerFlags,
        #[command(flatten)]
        sim: SimFlags,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Index of the first sample stream.
        #[arg(long, default_value_t = 0)]
        first: u64,
    },
}

#[derive(Args, Debug)]
pub struct CaseInput {
    #[arg(long)]
    pub case: PathBuf,
    /// Operating-point overrides applied to the case.
    #[arg(long)]
    pub point: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ScenarioInput {
    #[command(flatten)]
    pub case: CaseInput,
    /// One scenario object or an array of them.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long = "delta-t")]
    pub delta_t: Option<f64>,
    #[arg(long)]
    pub checkpoint: Option<f64>,
    #[arg(long = "v-th1")]
    pub v_th1: Option<f64>,
    #[arg(long = "v-th2")]
    pub v_th2: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SimFlags {
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    /// Hold rotor angles fixed.
    #[arg(long = "no-swing")]
    pub no_swing: bool,
    #[arg(long = "record-stride")]
    pub record_stride: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SamplerFlags {
    /// Zone radius as a Thevenin distance (pu).
    #[arg(long, default_value_t = 0.03)]
    pub radius: f64,
    #[arg(long = "v-min", default_value_t = 0.95)]
    pub v_min: f64,
    #[arg(long = "v-max", default_value_t = 1.08)]
    pub v_max: f64,
    #[arg(long = "shunt-toggle", default_value_t = 0.2)]
    pub shunt_toggle: f64,
}
