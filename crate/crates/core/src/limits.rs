//! Operator-size cap shared by every exact computation.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Result, SimError};

/// Default cap: 2³⁰ complex entries per operator or state.
pub const DEFAULT_MEMORY_CAP: u128 = 1 << 30;

/// Environment variable overriding the default cap.
pub const MEMORY_CAP_ENV: &str = "SIM_MEMORY_CAP";

static OVERRIDE: AtomicU64 = AtomicU64::new(0);

/// Sets the cap for this process; zero restores the environment/default value.
pub fn set_memory_cap(entries: u64) {
    OVERRIDE.store(entries, Ordering::Relaxed);
}

/// Effective cap: explicit override, then `SIM_MEMORY_CAP`, then the default.
pub fn memory_cap() -> u128 {
    match OVERRIDE.load(Ordering::Relaxed) {
        0 => std::env::var(MEMORY_CAP_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<u128>().ok())
            .filter(|&v| v > 0)
            .unwrap_or(DEFAULT_MEMORY_CAP),
        v => v as u128,
    }
}

/// `base^exp`, saturating instead of overflowing.
pub fn saturating_pow(base: usize, exp: usize) -> u128 {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.saturating_mul(base as u128);
    }
    acc
}

pub fn ensure_within(needed: u128) -> Result<()> {
    let cap = memory_cap();
    if needed > cap {
        return Err(SimError::ResourceLimit { needed, cap });
    }
    Ok(())
}
