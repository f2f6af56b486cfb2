use clap::{Args, Parser, Subcommand, ValueEnum};
use postsel_core::pbt::Arrival;

#[derive(Debug, Parser)]
#[command(name = "postsel", version, about = "Teleportation of pre- and post-selected quantum states")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one protocol and print its run record.
    Simulate(SimulateArgs),
    /// Tabulate port-based channel figures of merit over a range of port counts.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Protocol {
    TeleportPre,
    TeleportPost,
    TeleportPrepost,
    Pbt,
    PbtProbabilistic,
    PbtPost,
    PbtPrepost,
    Nonlocal,
    ExtractEntanglement,
    DenseCoding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ArrivalArg {
    Early,
    Late,
}

impl From<ArrivalArg> for Arrival {
    fn from(a: ArrivalArg) -> Self {
        match a {
            ArrivalArg::Early => Arrival::Early,
            ArrivalArg::Late => Arrival::Late,
        }
    }
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, value_enum)]
    pub protocol: Protocol,
    /// Dimension of each teleported system.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    /// Trials in sampled mode.
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub output: Format,
    /// Worker threads for independent sweep points.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Largest operator or state, in complex entries (overrides SIM_MEMORY_CAP).
    #[arg(long)]
    pub memory_cap: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Ports on Alice's side.
    #[arg(long, default_value_t = 2)]
    pub ports: usize,
    /// Inner ports per received port; defaults to `--ports`.
    #[arg(long)]
    pub ports_b: Option<usize>,
    /// Script preset: none, z-measure, x-measure, z-then-x, bell-measure, swap.
    #[arg(long)]
    pub script: Option<String>,
    /// Pre-selected state: preset or amplitude file.
    #[arg(long)]
    pub pre: Option<String>,
    /// Post-selected state: preset or amplitude file.
    #[arg(long)]
    pub post: Option<String>,
    /// Message for dense coding.
    #[arg(long)]
    pub message: Option<usize>,
    #[arg(long, value_enum, default_value_t = ArrivalArg::Early)]
    pub arrival: ArrivalArg,
    #[arg(long)]
    pub return_to_alice: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Port counts, `a..b` inclusive or a single value.
    #[arg(long)]
    pub ports: String,
}
