//! Configuration, artifacts, benchmark catalog and the offline/online pipelines.

pub mod catalog;
pub mod config;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod sweep;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

pub use catalog::{catalog, entry, preset, CatalogEntry, Setup};
pub use config::{Model, OfflineSpec, OnlineSpec, Reduction, RunConfig, SweepSpec};
pub use pipeline::{draw_parameters, load_trained, offline, offline_build, persist_trained, run, OfflineReport, Trained};
pub use report::{Draw, Failure, HostInfo, RunReport, StudyRow, SweepCell};
pub use sweep::{compare, study, sweep, sweep_map, SweepRecord};

/// Applies `f` to every item on a small worker pool, keeping input order.
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], workers: Option<usize>, f: impl Fn(usize, &T) -> R + Sync) -> Vec<R> {
    let n = workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .clamp(1, items.len().max(1));
    if n == 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..n {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(i, &items[i]);
                slots.lock().unwrap()[i] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every slot filled")).collect()
}
