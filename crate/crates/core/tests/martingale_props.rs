//! Harmonicity, tree-level martingale property, corollary consistency and
//! simulation determinism.

use brw_llt::branching::{evolve_generation, simulate, CountWidth, GenerationState, OffspringLaw, ReplicateSeed};
use brw_llt::martingales::{
    corollary_eval, corollary_mu, f1_eval, f2_eval, harmonicity_defect, readout, Functional, LimitEstimates,
};
use brw_llt::{ExpansionConstants, RawStepLaw, StepLaw};
use proptest::prelude::*;

fn arb_law() -> impl Strategy<Value = RawStepLaw> {
    (
        1usize..=3,
        0.0f64..0.6,
        prop::collection::vec(prop::collection::vec(0.05f64..1.0, 1..=3), 3),
    )
        .prop_map(|(d, zeta0, mut axes)| {
            axes.truncate(d);
            let total: f64 = axes.iter().flatten().sum();
            for row in axes.iter_mut() {
                for w in row.iter_mut() {
                    *w *= (1.0 - zeta0) / total;
                }
            }
            let sum: f64 = zeta0 + axes.iter().flatten().sum::<f64>();
            axes[0][0] += 1.0 - sum;
            RawStepLaw { d, zeta0, axes }
        })
}

fn arb_estimates(d: usize) -> impl Strategy<Value = LimitEstimates> {
    (
        prop::collection::vec(-2.0f64..2.0, d),
        prop::collection::vec(-2.0f64..2.0, d),
        -2.0f64..2.0,
        prop::collection::vec(-2.0f64..2.0, d),
        -2.0f64..2.0,
        0.2f64..3.0,
    )
        .prop_map(|(v1, v2, v2z, v3, v4, w_inf)| LimitEstimates {
            v1,
            v2,
            v2z,
            v3,
            v4,
            w_inf,
            source_generation: 0,
        })
}

fn lazy_case() -> impl Strategy<Value = (f64, usize, Vec<i64>, LimitEstimates)> {
    (0.0f64..0.9, 1usize..=3).prop_flat_map(|(sigma, d)| {
        (
            Just(sigma),
            Just(d),
            prop::collection::vec(-4i64..=4, d),
            arb_estimates(d),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn every_functional_is_harmonic(
        raw in arb_law(),
        xs in prop::collection::vec(-25i64..=25, 3),
        zs in prop::collection::vec(-5i64..=5, 3),
        n in 0u64..300,
    ) {
        let law = StepLaw::validate(&raw).unwrap();
        let mom = law.moments();
        let d = law.dim();
        let x: Vec<f64> = xs[..d].iter().map(|&v| v as f64).collect();
        let z: Vec<f64> = zs[..d].iter().map(|&v| v as f64).collect();
        for f in Functional::ALL {
            let value = f.eval(&mom, &x, n as f64, &z);
            for (def, v) in harmonicity_defect(f, &law, &mom, &x, n, &z).iter().zip(&value) {
                prop_assert!(def.abs() <= 1e-9 * (1.0 + v.abs()), "{:?}: {} at {:?}", f, def, x);
            }
        }
    }

    #[test]
    fn first_order_matches_corollary((sigma, d, z, est) in lazy_case()) {
        let law = StepLaw::validate(&RawStepLaw::lazy_simple(sigma, d)).unwrap();
        let mom = law.moments();
        let c = ExpansionConstants::for_law(&law);
        let f1 = f1_eval(&est, &c, &mom, &z);
        let (h1, _) = corollary_eval(sigma, d, &est, &z);
        prop_assert!((f1 - h1).abs() <= 1e-12 * (1.0 + h1.abs()), "{} vs {}", f1, h1);
    }

    #[test]
    fn second_order_differs_only_in_the_lambda_term((sigma, d, z, est) in lazy_case()) {
        let law = StepLaw::validate(&RawStepLaw::lazy_simple(sigma, d)).unwrap();
        let mom = law.moments();
        let c = ExpansionConstants::for_law(&law);
        let f2 = f2_eval(&est, &c, &mom, &z);
        let (_, h2) = corollary_eval(sigma, d, &est, &z);
        let z2: f64 = z.iter().map(|&v| (v * v) as f64).sum();
        let pref = (d as f64 / (1.0 - sigma)).powi(2);
        let gap = 2.0 * pref * corollary_mu(sigma, d) * z2 * est.w_inf;
        prop_assert!((h2 - f2 - gap).abs() <= 1e-10 * (1.0 + h2.abs() + f2.abs()), "{} vs {}", h2 - f2, gap);
    }
}

#[test]
fn one_step_mean_matches_parent() {
    let law = StepLaw::validate(&RawStepLaw {
        d: 2,
        zeta0: 0.2,
        axes: vec![vec![0.3, 0.1], vec![0.4]],
    })
    .unwrap();
    let off = OffspringLaw::validate(&[0.0, 0.5, 0.0, 0.5]).unwrap();
    let mom = law.moments();
    let z = [1, -1];
    let parent = simulate(&off, &law, 4, ReplicateSeed::new(9, 0), &[4], CountWidth::W64)
        .unwrap()
        .pop()
        .unwrap();
    let base = readout(&parent, off.mean(), &mom, &z).components();
    let reps = 10_000u64;
    let samples: Vec<Vec<f64>> = (0..reps)
        .map(|r| {
            let child = evolve_generation(&parent, &off, &law, ReplicateSeed::new(9, r + 1), CountWidth::W64).unwrap();
            readout(&child, off.mean(), &mom, &z).components()
        })
        .collect();
    for k in 0..base.len() {
        let col: Vec<f64> = samples.iter().map(|s| s[k]).collect();
        let mean = col.iter().sum::<f64>() / reps as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps as f64 - 1.0);
        let se = (var / reps as f64).sqrt();
        assert!(
            (mean - base[k]).abs() <= 4.0 * se + 1e-12,
            "component {k}: {mean} vs {}",
            base[k]
        );
    }
}

#[test]
fn simulation_is_independent_of_thread_count() {
    let law = StepLaw::validate(&RawStepLaw::lazy_simple(0.25, 2)).unwrap();
    let off = OffspringLaw::validate(&[0.0, 0.3, 0.4, 0.3]).unwrap();
    let run = |threads: usize| -> Vec<GenerationState> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                simulate(
                    &off,
                    &law,
                    30,
                    ReplicateSeed::new(42, 3),
                    &[10, 20, 30],
                    CountWidth::W64,
                )
                .unwrap()
            })
    };
    let serial = run(1);
    assert_eq!(serial, run(8));
    assert_eq!(serial, run(3));
    assert_ne!(
        serial,
        simulate(
            &off,
            &law,
            30,
            ReplicateSeed::new(42, 4),
            &[10, 20, 30],
            CountWidth::W64
        )
        .unwrap()
    );
}

#[test]
fn deterministic_binary_branching_keeps_w_at_one() {
    let law = StepLaw::validate(&RawStepLaw::simple(1)).unwrap();
    let off = OffspringLaw::validate(&[0.0, 0.0, 1.0]).unwrap();
    let probes = [16, 32, 48];
    let snaps = simulate(&off, &law, 48, ReplicateSeed::new(1, 0), &probes, CountWidth::W64).unwrap();
    for s in &snaps {
        assert_eq!(s.normalized_total(2.0), 1.0);
        assert_eq!(readout(s, 2.0, &law.moments(), &[0]).w, 1.0);
        // parity: a bipartite walk at even n occupies only even sites
        assert!(s.sites().all(|(z, _)| z[0] % 2 == 0));
    }
}
