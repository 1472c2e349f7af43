//! Seeds run on worker threads. Each seed owns its RNG stream and results are
//! reassembled in seed order, so output matches the sequential driver bit for
//! bit.

use std::num::NonZeroUsize;
use std::thread;

use amsal_core::amsal::{assemble_result, prepare, run_seed, SeedRun};
use amsal_core::{AmsalConfig, AmsalResult, Assignment, GuardedRecords, Matrix};

use crate::error::{Error, Result};

pub const THREADS_ENV: &str = "AMSAL_THREADS";

/// Worker count from `AMSAL_THREADS`; unset, empty or `0` means one per
/// available core.
pub fn thread_count() -> Result<usize> {
    resolve_threads(std::env::var(THREADS_ENV).ok().as_deref())
}

pub fn resolve_threads(value: Option<&str>) -> Result<usize> {
    let requested = match value.map(str::trim) {
        None | Some("") => 0,
        Some(v) => v.parse::<usize>().map_err(|_| Error::invalid(format!("{THREADS_ENV}=`{v}` is not a thread count")))?,
    };
    Ok(match requested {
        0 => thread::available_parallelism().map_or(1, NonZeroUsize::get),
        n => n,
    })
}

/// [`amsal_core::run_amsal_traced`] with seeds spread over `threads` workers.
pub fn run_amsal_threaded(
    x: &Matrix,
    records: &GuardedRecords,
    cfg: &AmsalConfig,
    truth: Option<&Assignment>,
    threads: usize,
) -> Result<AmsalResult> {
    let (xc, means) = prepare(x, records, cfg, truth)?;
    let workers = threads.clamp(1, cfg.num_seeds);
    let runs: Vec<SeedRun> = if workers == 1 {
        (0..cfg.num_seeds).map(|s| run_seed(&xc, records, cfg, s, truth)).collect::<amsal_core::Result<_>>()?
    } else {
        let mut slots: Vec<Option<amsal_core::Result<SeedRun>>> = (0..cfg.num_seeds).map(|_| None).collect();
        thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let xc = &xc;
                    scope.spawn(move || {
                        (w..cfg.num_seeds)
                            .step_by(workers)
                            .map(|s| (s, run_seed(xc, records, cfg, s, truth)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (s, run) in h.join().expect("seed worker panicked") {
                    slots[s] = Some(run);
                }
            }
        });
        slots.into_iter().map(|r| r.expect("every seed ran")).collect::<amsal_core::Result<_>>()?
    };
    Ok(assemble_result(&xc, means, records, cfg, runs)?)
}
