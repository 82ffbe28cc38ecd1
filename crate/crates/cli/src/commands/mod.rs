pub mod analyze;
pub mod bath;
pub mod fit;
pub mod simulate;
pub mod spectrum;

use std::path::{Path, PathBuf};

use crate::output::Sink;

/// Shared state for one subcommand run.
pub struct Context<'a> {
    pub seed: u64,
    /// Directory that relative input paths are resolved against.
    pub base: PathBuf,
    pub sink: &'a mut Sink,
}

impl Context<'_> {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() { p.to_path_buf() } else { self.base.join(p) }
    }
}

/// `points` values from `start` to `stop` inclusive.
pub fn grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        n => (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect(),
    }
}
