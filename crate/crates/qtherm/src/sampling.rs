//! Multi-threaded driver for the core window sampler.
//!
//! Blocks are scanned in contiguous batches; after each batch the run stops
//! if enough states were accepted. Because the merge keeps the first `M`
//! candidates by global draw index and every scanned prefix is contiguous,
//! neither the batch size nor the thread count changes the result.

use rayon::prelude::*;

use qtherm_core::ensemble::{BlockScan, SampleRun, WindowSampler, TRIALS_PER_BLOCK};

use crate::error::Result;

/// Blocks handed to the thread pool at once.
pub const BATCH_BLOCKS: u64 = 64;

/// Trials between progress lines on standard error.
pub const PROGRESS_INTERVAL: u64 = 10_000_000;

pub fn sample_parallel(sampler: &WindowSampler<'_>, label: &str, progress: bool) -> Result<SampleRun> {
    let blocks = sampler.block_count();
    let mut scans: Vec<BlockScan> = Vec::new();
    let mut accepted = 0usize;
    let mut scanned = 0u64;
    let mut next_report = PROGRESS_INTERVAL;
    let mut start = 0;
    while start < blocks && accepted < sampler.requested() {
        let end = (start + BATCH_BLOCKS).min(blocks);
        let batch: Vec<BlockScan> = (start..end)
            .into_par_iter()
            .map(|b| sampler.scan_block(b))
            .collect();
        for scan in &batch {
            scanned += scan.trials;
            accepted += scan
                .candidates
                .iter()
                .filter(|c| c.draw < sampler.budget())
                .count();
        }
        scans.extend(batch);
        if progress && scanned >= next_report {
            eprintln!(
                "[{}] {} trials, {} accepted, acceptance ~ {:.3e}",
                label,
                scanned,
                accepted,
                accepted as f64 / scanned as f64
            );
            while next_report <= scanned {
                next_report += PROGRESS_INTERVAL;
            }
        }
        start = end;
    }
    Ok(sampler.finish(scans)?)
}

/// Default cap on uniform trials: enough for acceptance rates near `1e-7` at
/// `M = 100`.
pub const DEFAULT_BUDGET: u64 = 2_000 * BATCH_BLOCKS * TRIALS_PER_BLOCK;
