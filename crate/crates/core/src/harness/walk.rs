//! Single-walk experiments: residuals, coefficient fits, identities.

use super::output::{Assertion, Report, ResultRow};
use super::stats;
use super::{select_points, ExperimentConfig, ExperimentKind};
use crate::error::Error;
use crate::exact_dist::{cf_invert, LatticeDist};
use crate::llt::identities::{closed_form, gaussian_identity_check, quadrature, IDENTITY_COUNT};
use crate::llt::{arbitrate_sign, fit_correction_coefficients, rw_expansion, scaled_residual, ExpansionConstants};

fn z_label(z: &[i64]) -> String {
    z.iter().map(i64::to_string).collect::<Vec<_>>().join(";")
}

/// Relative deviation, or absolute when the target is zero.
fn rel_dev(got: f64, target: f64) -> f64 {
    if target == 0.0 {
        got.abs()
    } else {
        ((got - target) / target).abs()
    }
}

pub fn run_llt_check(cfg: &ExperimentConfig) -> Result<Report, Error> {
    let law = cfg.law()?;
    let m = law.moments();
    let c = ExpansionConstants::new(&m, law.class());
    let mut report = Report::new(ExperimentKind::LltCheck);
    let mut dist = LatticeDist::delta(&law);
    let mut max_gap: f64 = 0.0;
    let mut sups = Vec::new();
    for n in cfg.schedule() {
        while dist.steps() < n {
            dist = dist.convolve_step(&law, cfg.element_budget)?;
        }
        let (points, excluded) = select_points(cfg, n);
        report.rows.extend(excluded);
        let mut sup: f64 = 0.0;
        for z in &points {
            let exact = dist.at(z);
            let via_cf = cf_invert(&law, n, z, None)?;
            let predicted = rw_expansion(&c, &m, n, z);
            let gamma = scaled_residual(&dist, &c, &m, z);
            report.rows.push(
                ResultRow::new("probability", exact)
                    .n(n)
                    .z(z)
                    .predicted(predicted)
                    .residual(gamma),
            );
            report.rows.push(
                ResultRow::new("cf_invert", via_cf)
                    .n(n)
                    .z(z)
                    .predicted(exact)
                    .residual(via_cf - exact),
            );
            max_gap = max_gap.max((via_cf - exact).abs());
            sup = sup.max(gamma.abs());
        }
        report.rows.push(
            ResultRow::new("sup_abs_gamma", sup)
                .n(n)
                .note(format!("{} points", points.len())),
        );
        sups.push(sup);
    }
    report.assertions.push(Assertion::at_most(
        "dual_oracle_gap",
        max_gap,
        cfg.thresholds.dual_oracle,
    ));
    if cfg.thresholds.trends && sups.len() >= 2 {
        report.assertions.push(Assertion::holds(
            "sup_gamma_decreasing",
            stats::max_step_ratio(&sups),
            1.0,
            stats::strictly_decreasing(&sups),
        ));
    }
    Ok(report)
}

pub fn run_coeff_fit(cfg: &ExperimentConfig) -> Result<Report, Error> {
    let law = cfg.law()?;
    let m = law.moments();
    let class = law.class();
    let c = ExpansionConstants::new(&m, class);
    let schedule = cfg.schedule();
    let mut report = Report::new(ExperimentKind::CoeffFit);
    let (points, excluded) = if cfg.z.is_empty() {
        (vec![vec![0; law.dim()]], Vec::new())
    } else {
        select_points(cfg, schedule[0])
    };
    report.rows.extend(excluded);
    for z in &points {
        if let Some(&bad) = schedule.iter().find(|&&n| !class.parity_allows(n, z)) {
            report.rows.push(
                ResultRow::new("excluded_point", bad as f64)
                    .z(z)
                    .note("parity mismatch"),
            );
            continue;
        }
        let fit = fit_correction_coefficients(&law, z, &schedule, cfg.element_budget)?;
        for p in &fit.sequence {
            report.rows.push(
                ResultRow::new("probability", p.exact)
                    .n(p.n)
                    .z(z)
                    .predicted(rw_expansion(&c, &m, p.n, z))
                    .residual(p.rho),
            );
            report.rows.push(
                ResultRow::new("c1", p.c1)
                    .n(p.n)
                    .z(z)
                    .predicted(fit.c1_target)
                    .residual(p.c1 - fit.c1_target),
            );
            report.rows.push(
                ResultRow::new("c2", p.c2)
                    .n(p.n)
                    .z(z)
                    .predicted(fit.c2_target)
                    .residual(p.c2 - fit.c2_target),
            );
        }
        let arb = arbitrate_sign(&fit, &c, &m);
        let last_n = *schedule.last().unwrap();
        report.rows.push(
            ResultRow::new("c2_candidate_theorem", arb.theorem_candidate)
                .n(last_n)
                .z(z)
                .predicted(arb.empirical)
                .residual(arb.empirical - arb.theorem_candidate)
                .note("-<Lambda z,z>"),
        );
        report.rows.push(
            ResultRow::new("c2_candidate_corollary", arb.corollary_candidate)
                .n(last_n)
                .z(z)
                .predicted(arb.empirical)
                .residual(arb.empirical - arb.corollary_candidate)
                .note("+<Lambda z,z>"),
        );
        report.rows.push(
            ResultRow::new("sign_verdict", arb.empirical)
                .n(last_n)
                .z(z)
                .note(format!("{:?}", arb.verdict)),
        );
        let label = z_label(z);
        report.assertions.push(Assertion::at_most(
            format!("c1_rel[{label}]"),
            rel_dev(fit.c1_hat, fit.c1_target),
            cfg.thresholds.c1_rel,
        ));
        report.assertions.push(Assertion::at_most(
            format!("c2_rel[{label}]"),
            rel_dev(fit.c2_hat, fit.c2_target),
            cfg.thresholds.c2_rel,
        ));
    }
    Ok(report)
}

pub fn run_identities(cfg: &ExperimentConfig) -> Result<Report, Error> {
    let law = cfg.law()?;
    let m = law.moments();
    let mut report = Report::new(ExperimentKind::Identities);
    let points: Vec<Vec<f64>> = if cfg.z.is_empty() {
        vec![vec![1.0; law.dim()]]
    } else {
        cfg.z.iter().map(|z| z.iter().map(|&v| v as f64).collect()).collect()
    };
    let mut worst: f64 = 0.0;
    for zf in &points {
        let zi: Vec<i64> = zf.iter().map(|&v| v as i64).collect();
        for index in 1..=IDENTITY_COUNT {
            let err = gaussian_identity_check(&m, index, zf, cfg.quadrature_panels)?;
            let rhs = closed_form(&m, index, zf);
            let lhs = quadrature(&m, index, zf, cfg.quadrature_panels);
            report.rows.push(
                ResultRow::new(format!("identity_{index}"), lhs)
                    .z(&zi)
                    .predicted(rhs)
                    .residual(err),
            );
            worst = worst.max(err);
        }
    }
    report.assertions.push(Assertion::at_most(
        "identity_max_rel_err",
        worst,
        cfg.thresholds.identity_rel,
    ));
    Ok(report)
}
