//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use brw_llt::exact_dist::{cf_invert, cf_invert_box, LatticeDist, DEFAULT_ELEMENT_BUDGET};
use brw_llt::harness::{self, ExperimentConfig};
use brw_llt::llt::identities::{gaussian_identity_check, DEFAULT_PANELS, IDENTITY_COUNT};
use brw_llt::llt::{
    admissible_points, arbitrate_sign, fit_correction_coefficients, rw_expansion, scaled_residual, SignVerdict,
};
use brw_llt::martingales::{
    corollary_eval, corollary_mu, f1_eval, f2_eval, harmonicity_defect, Functional, LimitEstimates,
};
use brw_llt::{ExpansionConstants, Moments, RawStepLaw, StepLaw};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn law(raw: RawStepLaw) -> StepLaw {
    StepLaw::validate(&raw).unwrap()
}

fn random_law(rng: &mut ChaCha8Rng, d: usize) -> StepLaw {
    let zeta0 = if rng.random_bool(0.3) {
        0.0
    } else {
        rng.random_range(0.0..0.5)
    };
    let mut axes: Vec<Vec<f64>> = (0..d)
        .map(|_| {
            let t = rng.random_range(1..=3);
            (0..t).map(|_| rng.random_range(0.05..1.0)).collect()
        })
        .collect();
    let total: f64 = axes.iter().flatten().sum();
    for w in axes.iter_mut().flatten() {
        *w *= (1.0 - zeta0) / total;
    }
    let sum = zeta0 + axes.iter().flatten().sum::<f64>();
    axes[0][0] += 1.0 - sum;
    law(RawStepLaw { d, zeta0, axes })
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let laws = [
        law(RawStepLaw::simple(1)),
        law(RawStepLaw::lazy_simple(1.0 / 3.0, 1)),
        law(RawStepLaw::simple(2)),
        law(RawStepLaw::lazy_simple(1.0 / 3.0, 2)),
    ];
    let mut worst: f64 = 0.0;
    for l in &laws {
        let mut dist = LatticeDist::delta(l);
        for n in 0..=50u64 {
            if n > 0 {
                dist = dist.convolve_step(l, DEFAULT_ELEMENT_BUDGET).unwrap();
            }
            let boxed = cf_invert_box(l, n);
            for (a, b) in dist.masses().iter().zip(boxed.masses()) {
                worst = worst.max((a - b).abs());
            }
            // pointwise inversion at the origin and at a far corner
            let corner: Vec<i64> = dist.radius().iter().map(|&r| r as i64).collect();
            for z in [vec![0; l.dim()], corner] {
                worst = worst.max((cf_invert(l, n, &z, None).unwrap() - dist.at(&z)).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-9 && secs < 60.0,
        format!("max |convolution - cf_invert| = {worst:.3e} over 4 laws, n <= 50 ({secs:.1} s)"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0002);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let d = 1 + i % 3;
        let l = random_law(&mut rng, d);
        let mom = l.moments();
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-40i64..=40) as f64).collect();
        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-6i64..=6) as f64).collect();
        let n = rng.random_range(0u64..=500);
        for f in Functional::ALL {
            let value = f.eval(&mom, &x, n as f64, &z);
            for (def, v) in harmonicity_defect(f, &l, &mom, &x, n, &z).iter().zip(&value) {
                worst = worst.max(def.abs() / (1.0 + v.abs()));
            }
        }
    }
    outcome(
        worst <= 1e-9,
        format!("max |defect|/(1+|f|) = {worst:.3e} over 1000 random (x, n, law), 6 functionals"),
    )
}

/// `(c1_hat, c2_hat)` at n = 4096, z = 0.
fn origin_coefficients(l: &StepLaw) -> (f64, f64) {
    let fit = fit_correction_coefficients(l, &[0], &[1024, 2048, 4096], DEFAULT_ELEMENT_BUDGET).unwrap();
    (fit.c1_hat, fit.c2_hat)
}

fn criterion_3_4() -> (Outcome, Outcome) {
    let start = Instant::now();
    // (law, τ_d, χ_d); the lazy values come from Γ₂ = Γ₄ = Γ₆ = 1/2
    let cases = [
        ("simple", law(RawStepLaw::simple(1)), -0.25, 1.0 / 32.0),
        ("lazy 1/2", law(RawStepLaw::lazy_simple(0.5, 1)), -0.125, 1.0 / 128.0),
    ];
    let mut ok1 = true;
    let mut ok2 = true;
    let mut d1 = Vec::new();
    let mut d2 = Vec::new();
    for (name, l, tau, chi) in &cases {
        let (c1, c2) = origin_coefficients(l);
        let e1 = ((c1 - tau) / tau).abs();
        let e2 = ((c2 - chi) / chi).abs();
        ok1 &= e1 <= 0.01;
        ok2 &= e2 <= 0.05;
        d1.push(format!("{name}: n*rho = {c1:.6} vs {tau} (rel {e1:.1e})"));
        d2.push(format!("{name}: c2 = {c2:.6} vs {chi:.6} (rel {e2:.1e})"));
    }
    let secs = start.elapsed().as_secs_f64();
    (
        outcome(ok1 && secs < 60.0, format!("{}; {secs:.1} s", d1.join("; "))),
        outcome(ok2, d2.join("; ")),
    )
}

/// `(sup |γ_n(z)|, argmax z)` over admissible parity-matched points, or
/// over `fixed` when given.
fn sup_gamma(l: &StepLaw, n: u64, fixed: Option<&[Vec<i64>]>) -> (f64, Vec<i64>) {
    let dist = LatticeDist::after_steps(l, n, DEFAULT_ELEMENT_BUDGET).unwrap();
    let m = l.moments();
    let c = ExpansionConstants::new(&m, l.class());
    let points = fixed.map_or_else(|| admissible_points(l.dim(), n, 0.1, 1.0), <[_]>::to_vec);
    points
        .iter()
        .filter(|z| l.class().parity_allows(n, z))
        .map(|z| (scaled_residual(&dist, &c, &m, z).abs(), z.clone()))
        .fold((0.0, Vec::new()), |a, b| if b.0 > a.0 { b } else { a })
}

fn criterion_5() -> (Outcome, String) {
    let cases = [
        ("d=1 lazy 1/2", law(RawStepLaw::lazy_simple(0.5, 1)), 128, 1024),
        ("d=1 simple (bipartite)", law(RawStepLaw::simple(1)), 128, 1024),
        ("d=2 lazy 1/3", law(RawStepLaw::lazy_simple(1.0 / 3.0, 2)), 128, 512),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    let mut fixed_parts = Vec::new();
    for (name, l, small, large) in &cases {
        let (a, za) = sup_gamma(l, *small, None);
        let (b, zb) = sup_gamma(l, *large, None);
        ok &= b < a;
        parts.push(format!(
            "{name}: {a:.4e} at z={za:?} (n={small}) -> {b:.4e} at z={zb:?} (n={large})"
        ));
        let early = admissible_points(l.dim(), *small, 0.1, 1.0);
        let (bf, _) = sup_gamma(l, *large, Some(&early));
        fixed_parts.push(format!("{name}: {a:.4e} -> {bf:.4e}"));
    }
    (
        outcome(ok, parts.join("; ")),
        format!(
            "sup over the points admissible at the smaller n (1024^0.1 = 2 adds z = +-2 at n = 1024 only): {}",
            fixed_parts.join("; ")
        ),
    )
}

fn criterion_6() -> Outcome {
    let l = law(RawStepLaw::simple(1));
    let m = l.moments();
    let c = ExpansionConstants::new(&m, l.class());
    let n = 1024;
    let dist = LatticeDist::after_steps(&l, n, DEFAULT_ELEMENT_BUDGET).unwrap();
    let mut worst: f64 = 0.0;
    let mut halved: f64 = f64::INFINITY;
    for z in admissible_points(1, n, 0.1, 1.0)
        .iter()
        .filter(|z| l.class().parity_allows(n, z))
    {
        let exact = dist.at(z);
        let twice = rw_expansion(&c, &m, n, z);
        worst = worst.max(((exact - twice) / twice).abs());
        halved = halved.min(((exact - twice / 2.0) / (twice / 2.0)).abs());
    }
    outcome(
        worst <= 0.01,
        format!(
            "max rel. gap to 2x bracket = {worst:.3e} at n=1024; without the factor 2 the gap would be {halved:.3}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0007);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for d in 1..=3usize {
        for _ in 0..25 {
            let g2: Vec<f64> = (0..d).map(|_| rng.random_range(0.2..4.0)).collect();
            let g4: Vec<f64> = (0..d).map(|_| rng.random_range(0.2..10.0)).collect();
            let g6: Vec<f64> = (0..d).map(|_| rng.random_range(0.2..30.0)).collect();
            let m = Moments::from_diagonals(g2, g4, g6);
            let z: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            for index in 1..=IDENTITY_COUNT {
                worst = worst.max(gaussian_identity_check(&m, index, &z, DEFAULT_PANELS).unwrap());
                count += 1;
            }
        }
    }
    outcome(
        worst <= 1e-8,
        format!("max relative error {worst:.3e} over {count} checks (d = 1..3, random moments)"),
    )
}

fn criterion_8() -> (Outcome, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE_0008);
    let mut first: f64 = 0.0;
    let mut other_terms: f64 = 0.0;
    let mut sigma0_gap: f64 = 0.0;
    let mut literal_worst_ratio: f64 = 1.0;
    for i in 0..1000 {
        let d = 1 + i % 3;
        let sigma = if i % 4 == 0 { 0.0 } else { rng.random_range(0.0..0.9) };
        let l = law(RawStepLaw::lazy_simple(sigma, d));
        let mom = l.moments();
        let c = ExpansionConstants::for_law(&l);
        let z: Vec<i64> = (0..d).map(|_| rng.random_range(-4i64..=4)).collect();
        let mut vec = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.random_range(-2.0..2.0)).collect() };
        let est = LimitEstimates {
            v1: vec(d),
            v2: vec(d),
            v2z: vec(1)[0],
            v3: vec(d),
            v4: vec(1)[0],
            w_inf: rng.random_range(0.2..3.0),
            source_generation: 0,
        };
        let (h1, h2) = corollary_eval(sigma, d, &est, &z);
        let f1 = f1_eval(&est, &c, &mom, &z);
        let f2 = f2_eval(&est, &c, &mom, &z);
        first = first.max((f1 - h1).abs() / (1.0 + h1.abs()));
        let z2: f64 = z.iter().map(|&v| (v * v) as f64).sum();
        let pref = (d as f64 / (1.0 - sigma)).powi(2);
        let lambda_term = 2.0 * pref * corollary_mu(sigma, d) * z2 * est.w_inf;
        other_terms = other_terms.max((h2 - f2 - lambda_term).abs() / (1.0 + h2.abs() + f2.abs()));
        if sigma == 0.0 && z2 > 0.0 {
            let df = d as f64;
            let derived = 2.0 * (df * (df + 4.0) / 8.0) * z2 * est.w_inf;
            sigma0_gap = sigma0_gap.max(((h2 - f2).abs() - derived).abs() / derived);
            let literal = derived * df * df;
            literal_worst_ratio = literal_worst_ratio.max(literal / (h2 - f2).abs());
        }
    }

    // the arbiter on exact probabilities
    let mut verdicts = Vec::new();
    let mut arb_ok = true;
    for (name, l) in [
        ("simple", law(RawStepLaw::simple(1))),
        ("lazy 1/2", law(RawStepLaw::lazy_simple(0.5, 1))),
    ] {
        let fit = fit_correction_coefficients(&l, &[2], &[1024, 2048, 4096], DEFAULT_ELEMENT_BUDGET).unwrap();
        let c = ExpansionConstants::for_law(&l);
        let arb = arbitrate_sign(&fit, &c, &l.moments());
        let chosen = match arb.verdict {
            SignVerdict::Theorem => arb.theorem_candidate,
            SignVerdict::Corollary => arb.corollary_candidate,
            SignVerdict::Indistinguishable => f64::NAN,
        };
        arb_ok &= arb.verdict != SignVerdict::Indistinguishable && ((arb.empirical - chosen) / chosen).abs() <= 0.05;
        verdicts.push(format!(
            "{name} z=2: c2 = {:.5}, theorem {:.5}, corollary {:.5} -> {:?}",
            arb.empirical, arb.theorem_candidate, arb.corollary_candidate, arb.verdict
        ));
    }
    // and the harness emits the verdict row
    let cfg = ExperimentConfig::from_json_str(
        r#"{"experiment": "coeff-fit", "step_law": {"d": 1, "zeta0": 0.0, "axes": [[1.0]]},
            "n_values": [1024, 2048, 4096], "z": [[2]]}"#,
        &[],
    )
    .unwrap();
    let report = harness::run(&cfg).unwrap();
    let row = report.rows.iter().find(|r| r.quantity == "sign_verdict");
    arb_ok &= row.is_some_and(|r| r.note == "Theorem");

    let ok = first <= 1e-12 && other_terms <= 1e-10 && sigma0_gap <= 1e-12 && arb_ok;
    let info = format!(
        "with the extra d^2 factor the sigma=0 discrepancy is overstated by up to {literal_worst_ratio:.0}x (exact for d=1 only)"
    );
    (
        outcome(
            ok,
            format!(
                "first order {first:.1e}; other second-order terms {other_terms:.1e}; sigma=0 gap vs 2(d(d+4)/8)|z|^2 W {sigma0_gap:.1e}; {}",
                verdicts.join("; ")
            ),
        ),
        info,
    )
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig::from_json_str(
        r#"{"experiment": "brw-check",
            "step_law": {"d": 1, "zeta0": 0.0, "axes": [[1.0]]},
            "offspring": {"probs": [0.0, 0.0, 1.0]},
            "n_values": [16, 32, 48], "n_est": 48,
            "z": [[0], [2], [-2]], "c_bound": 2.0,
            "replicates": 64, "base_seed": 20261019}"#,
        &[],
    )
    .unwrap();
    let report = harness::run(&cfg).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for z in ["0", "2", "-2"] {
        let medians: Vec<f64> = report
            .rows
            .iter()
            .filter(|r| {
                r.quantity == "abs_leading_deviation_median" && r.z.as_ref().is_some_and(|v| v[0].to_string() == z)
            })
            .map(|r| r.observed)
            .collect();
        let decay = report.assertion(&format!("deviation_decay[{z}]")).unwrap();
        let band = report.assertion(&format!("f1_band[{z}]")).unwrap();
        ok &= decay.passed && band.passed && medians.len() == 3;
        parts.push(format!(
            "z={z}: median|D| {} ; n*D(48) median {:.3} vs F1 median {:.3} {}",
            medians
                .iter()
                .map(|m| format!("{m:.4}"))
                .collect::<Vec<_>>()
                .join(" > "),
            band.observed,
            band.reference,
            if band.passed { "in IQR" } else { "outside IQR" }
        ));
    }
    ok &= report.assertion("w_exactly_one").is_some_and(|a| a.passed);
    let secs = start.elapsed().as_secs_f64();
    outcome(ok, format!("{}; {secs:.1} s", parts.join("; ")))
}

fn run_binary(config: &Path, out: &Path, threads: usize) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_brwllt"))
        .arg("run")
        .arg(config)
        .arg("--override")
        .arg(format!(
            "output={}",
            serde_json::to_string(out.to_str().unwrap()).unwrap()
        ))
        .env("RAYON_NUM_THREADS", threads.to_string())
        .output()
        .unwrap();
    assert!(status.status.code().is_some(), "binary terminated by signal");
    let mut bytes = fs::read(out).unwrap();
    let traj = out.with_file_name(format!("{}-trajectory.csv", out.file_stem().unwrap().to_str().unwrap()));
    if let Ok(extra) = fs::read(traj) {
        bytes.extend(extra);
    }
    bytes
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let configs = [
        (
            "llt",
            r#"{"experiment": "llt-check", "step_law": {"d": 2, "zeta0": 0.2, "axes": [[0.3, 0.1], [0.4]]},
                "n_values": [20, 40]}"#,
        ),
        (
            "brw",
            r#"{"experiment": "brw-check", "step_law": {"d": 2, "zeta0": 0.2, "axes": [[0.4], [0.4]]},
                "offspring": {"probs": [0.0, 0.3, 0.4, 0.3]}, "n_values": [8, 16, 24],
                "replicates": 16, "base_seed": 99}"#,
        ),
        (
            "mart",
            r#"{"experiment": "martingale-check", "step_law": {"d": 1, "zeta0": 0.0, "axes": [[0.7, 0.3]]},
                "offspring": {"probs": [0.0, 0.5, 0.0, 0.5]}, "mc_replicates": 2000,
                "trajectory_n_max": 60, "count_width": 128, "base_seed": 5}"#,
        ),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, body) in configs {
        let cfg = dir.path().join(format!("{name}.json"));
        fs::write(&cfg, body).unwrap();
        let runs: Vec<Vec<u8>> = [(1, "a"), (8, "b"), (8, "c"), (1, "d")]
            .iter()
            .map(|(t, tag)| run_binary(&cfg, &dir.path().join(format!("{name}-{tag}.csv")), *t))
            .collect();
        let same = runs.windows(2).all(|w| w[0] == w[1]) && !runs[0].is_empty();
        ok &= same;
        parts.push(format!(
            "{name}: {} bytes {}",
            runs[0].len(),
            if same { "identical" } else { "DIFFER" }
        ));
    }
    outcome(ok, format!("{} (threads 1, 8, 8, 1)", parts.join("; ")))
}

fn main() -> ExitCode {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut info = Vec::new();
    results.push((1, "dual-oracle equivalence", criterion_1()));
    results.push((2, "exact harmonicity", criterion_2()));
    let (c3, c4) = criterion_3_4();
    results.push((3, "first-order coefficient", c3));
    results.push((4, "second-order coefficient", c4));
    let (c5, note5) = criterion_5();
    results.push((5, "residual decay", c5));
    info.push((5, note5));
    results.push((6, "bipartite factor 2", criterion_6()));
    results.push((7, "gaussian identities", criterion_7()));
    let (c8, note8) = criterion_8();
    results.push((8, "corollary/theorem consistency", c8));
    info.push((8, note8));
    results.push((9, "brw trend", criterion_9()));
    results.push((10, "determinism", criterion_10()));

    let mut all = true;
    for (id, name, o) in &results {
        all &= o.passed;
        println!(
            "ACCEPTANCE {id:>2} {} {name}: {}",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    for (id, note) in info {
        println!("ACCEPTANCE {id:>2} INFO {note}");
    }
    println!(
        "acceptance: {}/{} criteria passed",
        results.iter().filter(|r| r.2.passed).count(),
        results.len()
    );
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
