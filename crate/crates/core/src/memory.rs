//! Memory budget shared by every allocation of phase-space tensors.

use crate::error::{Error, Result};

pub const DEFAULT_CAP_MB: u64 = 1024;
/// Largest grid for which n^4 tensors are built.
pub const MAX_KERNEL_N: usize = 64;
/// Largest Gabor tensor (entries).
pub const MAX_GABOR_ENTRIES: usize = 1 << 26;

/// Cap in MB, overridable through `TFK_MEM_CAP_MB`.
pub fn cap_mb() -> u64 {
    std::env::var("TFK_MEM_CAP_MB")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_CAP_MB)
}

/// Fails fast with a size estimate when `bytes` would not fit the budget.
pub fn check_bytes(bytes: f64) -> Result<()> {
    let cap = cap_mb();
    let needed_mb = bytes / (1024.0 * 1024.0);
    if needed_mb > cap as f64 {
        return Err(Error::MemoryCap { needed_mb, cap_mb: cap });
    }
    Ok(())
}

/// Budget check for an n^4 complex tensor plus `extra` same-size buffers.
pub fn check_kernel(n: usize, extra: usize) -> Result<()> {
    if n > MAX_KERNEL_N {
        return Err(Error::MemoryCap {
            needed_mb: (n as f64).powi(4) * 16.0 / 1048576.0,
            cap_mb: cap_mb(),
        });
    }
    check_bytes((n as f64).powi(4) * 16.0 * (1 + extra) as f64)
}
