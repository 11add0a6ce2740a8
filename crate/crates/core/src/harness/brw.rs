//! Branching experiments: martingale checks and the BRW expansion check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::output::{Assertion, Report, ResultRow};
use super::stats;
use super::{select_points, ExperimentConfig, ExperimentKind};
use crate::branching::seed::mix64;
use crate::branching::{evolve_generation, simulate, simulate_with, GenerationState, ReplicateSeed};
use crate::error::Error;
use crate::llt::ExpansionConstants;
use crate::martingales::{
    brw_residual, f1_eval, f2_eval, harmonicity_defect, leading_deviation, readout, theorem_prediction, Functional,
    LimitEstimates, MartingaleReadout,
};

fn z_label(z: &[i64]) -> String {
    z.iter().map(i64::to_string).collect::<Vec<_>>().join(";")
}

/// The point used by `N2z`: the first configured point, else all ones.
fn designated_z(cfg: &ExperimentConfig) -> Vec<i64> {
    cfg.z.first().cloned().unwrap_or_else(|| vec![1; cfg.step_law.d])
}

pub fn run_martingale_check(cfg: &ExperimentConfig) -> Result<Report, Error> {
    let law = cfg.law()?;
    let off = cfg.offspring_law()?.expect("checked by config");
    let mom = law.moments();
    let d = law.dim();
    let m = off.mean();
    let z = designated_z(cfg);
    let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
    let mut report = Report::new(ExperimentKind::MartingaleCheck);

    // (a) exact one-step harmonicity on a random grid
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(cfg.base_seed ^ 0x4841_524d));
    let grid: Vec<(Vec<f64>, u64)> = (0..cfg.harmonic_samples)
        .map(|_| {
            let x = (0..d).map(|_| rng.random_range(-30i64..=30) as f64).collect();
            (x, rng.random_range(0u64..=200))
        })
        .collect();
    for f in Functional::ALL {
        let worst = grid
            .iter()
            .map(|(x, n)| {
                let value = f.eval(&mom, x, *n as f64, &zf);
                harmonicity_defect(f, &law, &mom, x, *n, &zf)
                    .iter()
                    .zip(&value)
                    .map(|(def, v)| def.abs() / (1.0 + v.abs()))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        report.rows.push(
            ResultRow::new("harmonicity_defect", worst)
                .z(&z)
                .predicted(0.0)
                .note(f.name()),
        );
        report.assertions.push(Assertion::at_most(
            format!("harmonic[{}]", f.name()),
            worst,
            cfg.thresholds.harmonicity,
        ));
    }

    // (b) one-step annealed martingale check from a fixed parent
    let parent = simulate(
        &off,
        &law,
        cfg.mc_parent_generation,
        ReplicateSeed::new(cfg.base_seed, 0),
        &[cfg.mc_parent_generation],
        cfg.count_width,
    )?
    .pop()
    .expect("parent generation is kept");
    let parent_vals = readout(&parent, m, &mom, &z).components();
    let children: Vec<Vec<f64>> = (0..cfg.mc_replicates)
        .into_par_iter()
        .map(|r| {
            let child = evolve_generation(
                &parent,
                &off,
                &law,
                ReplicateSeed::new(cfg.base_seed, r + 1),
                cfg.count_width,
            )?;
            Ok(readout(&child, m, &mom, &z).components())
        })
        .collect::<Result<_, Error>>()?;
    let names = MartingaleReadout::component_names(d);
    let mut worst_score: f64 = 0.0;
    for (k, name) in names.iter().enumerate() {
        let sample: Vec<f64> = children.iter().map(|c| c[k]).collect();
        let mean = stats::mean(&sample);
        let se = (stats::variance(&sample) / sample.len() as f64).sqrt();
        let gap = mean - parent_vals[k];
        let score = if se > 0.0 {
            gap / se
        } else if gap.abs() <= 1e-12 * (1.0 + parent_vals[k].abs()) {
            0.0
        } else {
            f64::INFINITY
        };
        worst_score = worst_score.max(score.abs());
        report.rows.push(
            ResultRow::new("one_step_mean", mean)
                .n(cfg.mc_parent_generation + 1)
                .predicted(parent_vals[k])
                .residual(score)
                .note(name.as_str()),
        );
    }
    report.assertions.push(Assertion::at_most(
        "one_step_max_se",
        worst_score,
        cfg.thresholds.mc_sigmas,
    ));

    // (c) trajectory of readouts along one replicate
    let mut traj = Vec::new();
    simulate_with(
        &off,
        &law,
        cfg.trajectory_n_max,
        ReplicateSeed::new(cfg.base_seed, 0),
        cfg.count_width,
        |s| {
            traj.push(readout(s, m, &mom, &z));
            false
        },
    )?;
    if traj.len() >= 9 {
        let n4: Vec<f64> = traj[1..].iter().map(|r| r.n4).collect();
        let q = n4.len() / 4;
        let first = stats::variance(&n4[..q]);
        let last = stats::variance(&n4[n4.len() - q..]);
        report.rows.push(ResultRow::new("n4_variance_first_quarter", first));
        report.rows.push(ResultRow::new("n4_variance_last_quarter", last));
        if cfg.thresholds.trends {
            report
                .assertions
                .push(Assertion::holds("n4_variance_shrinks", last, first, last < first));
        }
    }
    report.trajectory = Some(traj);
    Ok(report)
}

/// Everything one replicate contributes.
struct ReplicateOutcome {
    /// `(n, W_n)` per probe
    w: Vec<(u64, f64)>,
    /// per z: per probe `(observed, predicted, residual, D_n, F1/n)`
    probes: Vec<Vec<[f64; 5]>>,
    /// per z: `(F1, F2, n_est·D_{n_est})`
    at_est: Vec<[f64; 3]>,
    /// per z: per probe `F1` from estimates frozen at that probe
    f1_by_probe: Vec<Vec<f64>>,
}

pub fn run_brw_check(cfg: &ExperimentConfig) -> Result<Report, Error> {
    let law = cfg.law()?;
    let off = cfg.offspring_law()?.expect("checked by config");
    let mom = law.moments();
    let c = ExpansionConstants::new(&mom, law.class());
    let m = off.mean();
    let probes = cfg.schedule();
    let n_est = cfg.n_est.unwrap_or(*probes.last().unwrap());
    let n_max = n_est.max(*probes.last().unwrap());
    let mut keep = probes.clone();
    keep.push(n_est);
    let mut report = Report::new(ExperimentKind::BrwCheck);
    let (points, excluded) = select_points(cfg, probes[0]);
    report.rows.extend(excluded);

    let outcomes: Vec<ReplicateOutcome> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| -> Result<ReplicateOutcome, Error> {
            let snaps = simulate(
                &off,
                &law,
                n_max,
                ReplicateSeed::new(cfg.base_seed, r),
                &keep,
                cfg.count_width,
            )?;
            let find = |n: u64| -> &GenerationState { snaps.iter().find(|s| s.generation == n).unwrap() };
            let est_state = find(n_est);
            let mut out = ReplicateOutcome {
                w: probes.iter().map(|&n| (n, find(n).normalized_total(m))).collect(),
                probes: Vec::new(),
                at_est: Vec::new(),
                f1_by_probe: Vec::new(),
            };
            for z in &points {
                let est = LimitEstimates::from_readout(&readout(est_state, m, &mom, z));
                let per_probe = probes
                    .iter()
                    .map(|&n| {
                        let s = find(n);
                        let observed = s.count(z) as f64 * m.powi(-(n as i32));
                        [
                            observed,
                            theorem_prediction(&est, &c, &mom, n, z),
                            brw_residual(s, m, &est, &c, &mom, z),
                            leading_deviation(s, m, &c, &mom, z),
                            f1_eval(&est, &c, &mom, z) / n as f64,
                        ]
                    })
                    .collect();
                out.probes.push(per_probe);
                out.at_est.push([
                    f1_eval(&est, &c, &mom, z),
                    f2_eval(&est, &c, &mom, z),
                    n_est as f64 * leading_deviation(est_state, m, &c, &mom, z),
                ]);
                out.f1_by_probe.push(
                    probes
                        .iter()
                        .map(|&n| {
                            let e = LimitEstimates::from_readout(&readout(find(n), m, &mom, z));
                            f1_eval(&e, &c, &mom, z)
                        })
                        .collect(),
                );
            }
            Ok(out)
        })
        .collect::<Result<_, Error>>()?;

    // per-replicate rows
    for (r, o) in outcomes.iter().enumerate() {
        let r = r as u64;
        for &(n, w) in &o.w {
            report.rows.push(ResultRow::new("w", w).replicate(r).n(n));
        }
        for (zi, z) in points.iter().enumerate() {
            for (pi, &n) in probes.iter().enumerate() {
                let [obs, pred, resid, dev, f1n] = o.probes[zi][pi];
                report.rows.push(
                    ResultRow::new("residual", obs)
                        .replicate(r)
                        .n(n)
                        .z(z)
                        .predicted(pred)
                        .residual(resid),
                );
                report.rows.push(
                    ResultRow::new("leading_deviation", dev)
                        .replicate(r)
                        .n(n)
                        .z(z)
                        .predicted(f1n)
                        .residual(n as f64 * dev),
                );
            }
            let [f1, f2, scaled] = o.at_est[zi];
            report.rows.push(
                ResultRow::new("f1", f1)
                    .replicate(r)
                    .n(n_est)
                    .z(z)
                    .predicted(scaled)
                    .residual(scaled - f1),
            );
            report.rows.push(ResultRow::new("f2", f2).replicate(r).n(n_est).z(z));
        }
    }

    // aggregates and assertions
    if off.is_deterministic() {
        let worst = outcomes
            .iter()
            .flat_map(|o| o.w.iter().map(|&(_, w)| (w - 1.0).abs()))
            .fold(0.0, f64::max);
        report
            .assertions
            .push(Assertion::holds("w_exactly_one", worst, 0.0, worst == 0.0));
    }
    for (zi, z) in points.iter().enumerate() {
        let label = z_label(z);
        let mut resid_medians = Vec::new();
        let mut dev_medians = Vec::new();
        for (pi, &n) in probes.iter().enumerate() {
            if !law.class().parity_allows(n, z) {
                continue;
            }
            let col = |k: usize| -> Vec<f64> { outcomes.iter().map(|o| o.probes[zi][pi][k].abs()).collect() };
            for (name, data, medians) in [
                ("abs_residual", col(2), &mut resid_medians),
                ("abs_leading_deviation", col(3), &mut dev_medians),
            ] {
                let med = stats::median(&data);
                medians.push(med);
                report.rows.push(
                    ResultRow::new(format!("{name}_median"), med)
                        .n(n)
                        .z(z)
                        .predicted(stats::quantile(&data, 0.25))
                        .residual(stats::quantile(&data, 0.75))
                        .note("predicted=q1 residual=q3"),
                );
            }
            let drift: Vec<f64> = outcomes
                .iter()
                .map(|o| (o.f1_by_probe[zi][pi] - o.at_est[zi][0]).abs())
                .collect();
            report.rows.push(
                ResultRow::new("f1_sensitivity_median", stats::median(&drift))
                    .n(n)
                    .z(z)
                    .note(format!("|F1(est at n) - F1(est at {n_est})|")),
            );
        }
        let f1s: Vec<f64> = outcomes.iter().map(|o| o.at_est[zi][0]).collect();
        let scaled: Vec<f64> = outcomes.iter().map(|o| o.at_est[zi][2]).collect();
        let (q1, q3) = (stats::quantile(&f1s, 0.25), stats::quantile(&f1s, 0.75));
        let scaled_med = stats::median(&scaled);
        report.rows.push(
            ResultRow::new("f1_band", stats::median(&f1s))
                .n(n_est)
                .z(z)
                .predicted(q1)
                .residual(q3)
                .note("predicted=q1 residual=q3"),
        );
        report
            .rows
            .push(ResultRow::new("scaled_deviation_median", scaled_med).n(n_est).z(z));
        if !cfg.thresholds.trends || !law.class().parity_allows(n_est, z) {
            continue;
        }
        if resid_medians.len() >= 2 {
            report.assertions.push(Assertion::holds(
                format!("residual_decay[{label}]"),
                stats::max_step_ratio(&resid_medians),
                1.0,
                stats::strictly_decreasing(&resid_medians),
            ));
            report.assertions.push(Assertion::holds(
                format!("deviation_decay[{label}]"),
                stats::max_step_ratio(&dev_medians),
                1.0,
                stats::strictly_decreasing(&dev_medians),
            ));
        }
        report.assertions.push(Assertion::holds(
            format!("f1_band[{label}]"),
            scaled_med,
            stats::median(&f1s),
            q1 <= scaled_med && scaled_med <= q3,
        ));
    }
    Ok(report)
}
