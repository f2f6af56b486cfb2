//! Named states and scripts, and the amplitude-file format: one amplitude
//! per line as `re im` (or `re`), in engine index order; blank lines and
//! lines starting with `#` are skipped.

use std::path::Path;

use num_complex::Complex64 as C64;
use postsel_core::engine::{bell_povm, maximally_entangled, PovmSet, StateVector, SubsystemLayout, UnitaryOp};
use postsel_core::nonlocal::JointOp;
use postsel_core::oracle::ExperimentScript;

use crate::error::CliError;

const STATE_PRESETS: &str = "0..d-1, +, -, phi+, comma-separated products like 0,1, or an amplitude file";
const SCRIPT_PRESETS: &str = "none, z-measure, x-measure, z-then-x, bell-measure, swap";

fn labels(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("S{i}")).collect()
}

fn single(name: &str, d: usize) -> Option<Vec<C64>> {
    let r = 1.0 / 2f64.sqrt();
    match name {
        "+" => Some(vec![C64::new(1.0 / (d as f64).sqrt(), 0.0); d]),
        "-" => {
            let mut v = vec![C64::new(0.0, 0.0); d];
            v[0] = C64::new(r, 0.0);
            v[1] = C64::new(-r, 0.0);
            Some(v)
        }
        _ => {
            let k: usize = name.parse().ok()?;
            (k < d).then(|| {
                let mut v = vec![C64::new(0.0, 0.0); d];
                v[k] = C64::new(1.0, 0.0);
                v
            })
        }
    }
}

/// Parses a state preset or amplitude file; systems are labelled `S1, S2, …`.
pub fn state(spec: &str, d: usize) -> Result<StateVector, CliError> {
    let spec = spec.trim();
    if spec == "phi+" {
        return Ok(maximally_entangled(d, ["S1", "S2"])?);
    }
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    if let Some(factors) = parts.iter().map(|p| single(p, d)).collect::<Option<Vec<_>>>() {
        let mut out = StateVector::ket("S1", factors[0].clone())?;
        for (k, f) in factors.iter().enumerate().skip(1) {
            out = out.tensor(&StateVector::ket(&format!("S{}", k + 1), f.clone())?)?;
        }
        return Ok(out);
    }
    if Path::new(spec).is_file() {
        return from_file(spec, d);
    }
    Err(CliError::Usage(format!("unknown state `{spec}`; expected {STATE_PRESETS}")))
}

fn from_file(path: &str, d: usize) -> Result<StateVector, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {path}: {e}")))?;
    let mut amps = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Usage(format!("{path}:{}: {e}", n + 1)))?;
        match nums.as_slice() {
            [re] => amps.push(C64::new(*re, 0.0)),
            [re, im] => amps.push(C64::new(*re, *im)),
            _ => return Err(CliError::Usage(format!("{path}:{}: expected `re im`", n + 1))),
        }
    }
    let mut k = 0;
    let mut size = 1;
    while size < amps.len() {
        size *= d;
        k += 1;
    }
    if k == 0 || size != amps.len() {
        return Err(CliError::Usage(format!("{path}: {} amplitudes is not a power of {d}", amps.len())));
    }
    let layout = SubsystemLayout::new(labels(k).into_iter().map(|l| (l, d)))?;
    Ok(StateVector::new(layout, amps)?)
}

/// Script acting on slots of dimensions `dims`; single-system steps act on slot 0.
pub fn script(name: &str, dims: &[usize]) -> Result<ExperimentScript, CliError> {
    let base = ExperimentScript::new(name, dims.to_vec())?;
    let d = dims[0];
    let pair = || -> Result<(), CliError> {
        if dims.len() < 2 || dims[1] != d {
            return Err(CliError::Usage(format!("script `{name}` needs two systems of dimension {d}")));
        }
        Ok(())
    };
    Ok(match name {
        "none" => base,
        "z-measure" => base.push_measure(PovmSet::computational(d)?, vec![0])?,
        "x-measure" => base.push_measure(PovmSet::fourier(d)?, vec![0])?,
        "z-then-x" => base
            .push_measure(PovmSet::computational(d)?, vec![0])?
            .push_measure(PovmSet::fourier(d)?, vec![0])?,
        "bell-measure" => {
            pair()?;
            base.push_measure(bell_povm(d)?, vec![0, 1])?
        }
        "swap" => {
            pair()?;
            base.push_unitary(UnitaryOp::swap(d), vec![0, 1])?
        }
        _ => return Err(CliError::Usage(format!("unknown script `{name}`; expected {SCRIPT_PRESETS}"))),
    })
}

/// Operation on a pair of `d`-level systems.
pub fn joint_op(name: &str, d: usize) -> Result<JointOp, CliError> {
    Ok(match name {
        "none" => JointOp::Unitary(UnitaryOp::identity(d * d)),
        "swap" => JointOp::Unitary(UnitaryOp::swap(d)),
        "bell-measure" => JointOp::Measure(bell_povm(d)?),
        "z-measure" => JointOp::Measure(PovmSet::computational(d * d)?),
        _ => return Err(CliError::Usage(format!("unknown joint operation `{name}`; expected none, swap, bell-measure, z-measure"))),
    })
}
