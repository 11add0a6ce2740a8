//! Experiment orchestration: config in, result table and assertions out.

mod brw;
pub mod config;
pub mod output;
mod walk;

pub use brw::{run_brw_check, run_martingale_check};
pub use config::{ExperimentConfig, ExperimentKind, OffspringConfig, Thresholds, OUT_DIR_ENV};
pub use output::{write_outputs, write_report_csv, Assertion, Report, ResultRow};
pub use walk::{run_coeff_fit, run_identities, run_llt_check};

use crate::error::Error;

pub fn run(cfg: &ExperimentConfig) -> Result<Report, Error> {
    cfg.check()?;
    match cfg.experiment {
        ExperimentKind::LltCheck => run_llt_check(cfg),
        ExperimentKind::CoeffFit => run_coeff_fit(cfg),
        ExperimentKind::Identities => run_identities(cfg),
        ExperimentKind::MartingaleCheck => run_martingale_check(cfg),
        ExperimentKind::BrwCheck => run_brw_check(cfg),
    }
}

/// `‖z‖ ≤ C·n^κ` with the same slack as [`crate::llt::admissible_points`].
pub(crate) fn is_admissible(z: &[i64], n: u64, kappa: f64, c: f64) -> bool {
    let bound = c * (n as f64).powf(kappa) * (1.0 + 1e-9);
    let norm2: i64 = z.iter().map(|v| v * v).sum();
    (norm2 as f64).sqrt() <= bound
}

/// Configured points admissible at `n` (or all admissible points when none
/// are configured), plus rows recording the excluded ones.
pub(crate) fn select_points(cfg: &ExperimentConfig, n: u64) -> (Vec<Vec<i64>>, Vec<ResultRow>) {
    if cfg.z.is_empty() {
        return (
            crate::llt::admissible_points(cfg.step_law.d, n, cfg.kappa, cfg.c_bound),
            Vec::new(),
        );
    }
    let bound = cfg.c_bound * (n as f64).powf(cfg.kappa);
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for z in &cfg.z {
        if is_admissible(z, n, cfg.kappa, cfg.c_bound) {
            kept.push(z.clone());
        } else {
            let norm = (z.iter().map(|v| (v * v) as f64).sum::<f64>()).sqrt();
            excluded.push(
                ResultRow::new("excluded_point", norm)
                    .n(n)
                    .z(z)
                    .predicted(bound)
                    .note("outside C*n^kappa"),
            );
        }
    }
    (kept, excluded)
}

pub(crate) mod stats {
    /// Linear-interpolation quantile of unsorted data; NaN when empty.
    pub fn quantile(data: &[f64], q: f64) -> f64 {
        if data.is_empty() {
            return f64::NAN;
        }
        let mut v = data.to_vec();
        v.sort_by(f64::total_cmp);
        let pos = q * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    }

    pub fn median(data: &[f64]) -> f64 {
        quantile(data, 0.5)
    }

    pub fn mean(data: &[f64]) -> f64 {
        data.iter().sum::<f64>() / data.len() as f64
    }

    /// Unbiased sample variance.
    pub fn variance(data: &[f64]) -> f64 {
        let mu = mean(data);
        data.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (data.len() as f64 - 1.0)
    }

    /// Largest ratio of consecutive values; below 1 iff strictly decreasing
    /// (for positive sequences).
    pub fn max_step_ratio(seq: &[f64]) -> f64 {
        seq.windows(2).map(|w| w[1] / w[0]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn strictly_decreasing(seq: &[f64]) -> bool {
        seq.windows(2).all(|w| w[1] < w[0])
    }

}
