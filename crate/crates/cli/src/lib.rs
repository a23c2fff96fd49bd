//! Experiment orchestration for the hierarchical reference game: run
//! management, ablations, qualitative dumps, and figure emission. The
//! `hierref` binary is a thin argument-parsing layer over this library.

pub mod ablate;
pub mod config_file;
pub mod experiment;
pub mod figures;
pub mod qualitative;

/// Job-parallelism cap: explicit setting, then the `HIERREF_THREADS`
/// environment variable, then the machine's available parallelism.
pub fn max_threads(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| {
            std::env::var("HIERREF_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .max(1)
}
