use rayon::prelude::*;
use serde::Serialize;

use postsel_core::appendix::{dense_coding_via_postteleport, extract_entanglement};
use postsel_core::limits::set_memory_cap;
use postsel_core::nonlocal::{instantaneous_nonlocal, BipartiteTsv, NonlocalOptions};
use postsel_core::pbt::{
    build_pgm, channel_report, pbt_post_selected, pbt_prepost, pbt_probabilistic, pbt_teleport, PbtChannel,
};
use postsel_core::record::{ledger_report, RunRecord};
use postsel_core::stats::RunMode;
use postsel_core::teleport::{teleport_post, teleport_pre, teleport_prepost};
use postsel_core::Result as SimResult;

use crate::args::{Command, Common, Format, ModeArg, Protocol, SimulateArgs, SweepArgs};
use crate::error::CliError;
use crate::presets;

pub fn execute(command: Command) -> Result<String, CliError> {
    match command {
        Command::Simulate(args) => {
            configure(&args.common)?;
            let record = simulate(&args)?;
            render_record(&record, args.common.output)
        }
        Command::Sweep(args) => {
            configure(&args.common)?;
            let name = match args.common.protocol {
                Protocol::PbtProbabilistic => "pbt-probabilistic",
                _ => "pbt",
            };
            render_sweep(name, &sweep(&args)?, args.common.output)
        }
    }
}

fn configure(c: &Common) -> Result<(), CliError> {
    if c.dim < 2 {
        return Err(CliError::Usage(format!("--dim must be at least 2, got {}", c.dim)));
    }
    if let Some(cap) = c.memory_cap {
        if cap == 0 {
            return Err(CliError::Usage("--memory-cap must be positive".into()));
        }
        set_memory_cap(cap);
    }
    if c.mode == ModeArg::Sampled && c.trials == 0 {
        return Err(CliError::Usage("--trials must be positive in sampled mode".into()));
    }
    Ok(())
}

fn mode(c: &Common) -> RunMode {
    match c.mode {
        ModeArg::Exact => RunMode::Exact,
        ModeArg::Sampled => RunMode::Sampled { trials: c.trials, seed: c.seed },
    }
}

fn positive(name: &str, v: usize) -> Result<usize, CliError> {
    if v == 0 {
        return Err(CliError::Usage(format!("--{name} must be positive")));
    }
    Ok(v)
}

fn channel(protocol: Protocol, n: usize, d: usize) -> SimResult<PbtChannel> {
    if protocol == Protocol::PbtProbabilistic {
        pbt_probabilistic(n, d)
    } else {
        build_pgm(n, d)
    }
}

fn simulate(a: &SimulateArgs) -> Result<RunRecord, CliError> {
    let c = &a.common;
    let (d, m) = (c.dim, mode(c));
    let nonlocal = c.protocol == Protocol::Nonlocal;
    let default_state = if nonlocal { "phi+" } else { "0" };
    let pre = || presets::state(a.pre.as_deref().unwrap_or(default_state), d);
    let post = || presets::state(a.post.as_deref().unwrap_or(default_state), d);
    let script_name = a.script.as_deref().unwrap_or(if nonlocal { "bell-measure" } else { "z-measure" });
    let script_for = |dims: &[usize]| presets::script(script_name, dims);
    let ports = || positive("ports", a.ports);

    let record = match c.protocol {
        Protocol::TeleportPre => {
            let psi = pre()?;
            teleport_pre(&psi, d, &script_for(psi.layout().dims())?, m)?
        }
        Protocol::TeleportPost => {
            let phi = post()?;
            teleport_post(&phi, d, &script_for(phi.layout().dims())?, m)?
        }
        Protocol::TeleportPrepost => {
            let (psi, phi) = (pre()?, post()?);
            teleport_prepost(&psi, &phi, d, &script_for(psi.layout().dims())?, m)?
        }
        Protocol::Pbt | Protocol::PbtProbabilistic => {
            pbt_teleport(&channel(c.protocol, ports()?, d)?, &pre()?, m)?.record
        }
        Protocol::PbtPost => pbt_post_selected(&post()?, ports()?, d, &script_for(&[d])?, m)?,
        Protocol::PbtPrepost => {
            let n_b = positive("ports-b", a.ports_b.unwrap_or(a.ports))?;
            pbt_prepost(&pre()?, &post()?, ports()?, n_b, d, &script_for(&[d])?, m)?
        }
        Protocol::Nonlocal => {
            let bi = BipartiteTsv::Joint { pre: pre()?, post: post()? };
            let op = presets::joint_op(script_name, d)?;
            let options = NonlocalOptions { arrival: a.arrival.into(), return_to_alice: a.return_to_alice };
            let mut record = instantaneous_nonlocal(&bi, &op, ports()?, m, options)?;
            let qubits = (d as f64).log2().ceil() as u32;
            let ports_used = record.ledger.ports;
            record.ledger = ledger_report(&record, qubits);
            record.ledger.ports = ports_used;
            record
        }
        Protocol::ExtractEntanglement => extract_entanglement(d, m)?,
        Protocol::DenseCoding => {
            let i = a
                .message
                .ok_or_else(|| CliError::Usage("--message is required for dense-coding".into()))?;
            dense_coding_via_postteleport(d, i, m)?.record
        }
    };
    Ok(record)
}

/// One row of a port sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub d: usize,
    /// Success-conditioned entanglement (Choi-state) fidelity.
    pub fidelity: f64,
    pub average_fidelity: f64,
    pub p_success: f64,
    pub ebits: u64,
}

#[derive(Debug, Serialize)]
struct SweepDocument<'a> {
    protocol: &'a str,
    rows: &'a [SweepRow],
}

pub fn parse_range(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("invalid range `{s}`; expected a..b or n"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (
            a.trim().parse::<usize>().map_err(|_| bad())?,
            b.trim().trim_start_matches('=').parse::<usize>().map_err(|_| bad())?,
        ),
        None => {
            let n = s.trim().parse::<usize>().map_err(|_| bad())?;
            (n, n)
        }
    };
    if lo == 0 || lo > hi {
        return Err(CliError::Usage(format!("empty or invalid range `{s}`")));
    }
    Ok((lo..=hi).collect())
}

fn sweep(a: &SweepArgs) -> Result<Vec<SweepRow>, CliError> {
    let c = &a.common;
    if !matches!(c.protocol, Protocol::Pbt | Protocol::PbtProbabilistic) {
        return Err(CliError::Usage("sweep supports --protocol pbt or pbt-probabilistic".into()));
    }
    let ns = parse_range(&a.ports)?;
    let row = |n: usize| -> SimResult<SweepRow> {
        let r = channel_report(&channel(c.protocol, n, c.dim)?)?;
        Ok(SweepRow {
            n,
            d: c.dim,
            fidelity: r.entanglement_fidelity,
            average_fidelity: r.average_fidelity,
            p_success: r.p_success,
            ebits: r.ebits,
        })
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = c.jobs {
        builder = builder.num_threads(positive("jobs", j)?);
    }
    let pool = builder.build().map_err(|e| CliError::Usage(e.to_string()))?;
    // Indexed collection keeps row order independent of the schedule.
    let rows: SimResult<Vec<SweepRow>> = pool.install(|| ns.par_iter().map(|&n| row(n)).collect());
    Ok(rows?)
}

fn csv_text<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Serialize)]
struct CsvOutcome<'a> {
    table: &'a str,
    label: &'a str,
    probability: f64,
    count: Option<u64>,
}

fn render_record(record: &RunRecord, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(record).expect("run records serialize") + "\n"),
        Format::Csv => {
            let rows = record
                .outcomes
                .iter()
                .map(|r| ("outcomes", r))
                .chain(record.conditional_statistics.iter().map(|r| ("conditional_statistics", r)))
                .map(|(table, r)| CsvOutcome { table, label: &r.label, probability: r.probability, count: r.count });
            csv_text(rows)
        }
    }
}

fn render_sweep(protocol: &str, rows: &[SweepRow], format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => {
            let doc = SweepDocument { protocol, rows };
            Ok(serde_json::to_string_pretty(&doc).expect("sweep rows serialize") + "\n")
        }
        Format::Csv => csv_text(rows),
    }
}
