//! Count-based branching random walk.
//!
//! A generation is a map from occupied site to an exact particle count.
//! Each site's particles reproduce by a multinomial split over offspring
//! values, and the resulting children are spread over the step law's
//! atoms by a second multinomial split.

pub mod sampling;
pub mod seed;

use std::collections::BTreeMap;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OffspringError, SimError};
use crate::step_law::StepLaw;

pub use sampling::{binomial_exact, multinomial_exact};
pub use seed::ReplicateSeed;

/// Offspring distribution `p_k`, indexed from `k = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct OffspringLaw {
    probs: Vec<f64>,
    mean: f64,
}

impl OffspringLaw {
    pub fn validate(probs: &[f64]) -> Result<Self, OffspringError> {
        if probs.is_empty() {
            return Err(OffspringError::Shape("empty table".into()));
        }
        if let Some(&bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(OffspringError::Shape(format!("invalid probability {bad}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(OffspringError::NonNormalized(sum));
        }
        if probs[0] > 0.0 {
            return Err(OffspringError::HasExtinction(probs[0]));
        }
        let probs: Vec<f64> = probs.iter().map(|p| p / sum).collect();
        let mean = probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        if mean <= 1.0 {
            return Err(OffspringError::SubcriticalOrCritical(mean));
        }
        Ok(OffspringLaw { probs, mean })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Whether every particle has exactly one possible offspring count.
    pub fn is_deterministic(&self) -> bool {
        self.probs.iter().filter(|&&p| p > 0.0).count() == 1
    }
}

/// Counter width; written as `64` or `128` (number or string) in configs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WidthRepr", into = "u32")]
pub enum CountWidth {
    #[default]
    W64,
    W128,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WidthRepr {
    Number(u32),
    Text(String),
}

impl TryFrom<WidthRepr> for CountWidth {
    type Error = String;

    fn try_from(r: WidthRepr) -> Result<Self, String> {
        let bits = match r {
            WidthRepr::Number(b) => b,
            WidthRepr::Text(t) => t.trim().parse().map_err(|_| format!("bad count width `{t}`"))?,
        };
        match bits {
            64 => Ok(CountWidth::W64),
            128 => Ok(CountWidth::W128),
            other => Err(format!("count width must be 64 or 128, got {other}")),
        }
    }
}

impl From<CountWidth> for u32 {
    fn from(w: CountWidth) -> u32 {
        w.bits()
    }
}

impl CountWidth {
    pub fn bits(self) -> u32 {
        match self {
            CountWidth::W64 => 64,
            CountWidth::W128 => 128,
        }
    }

    pub fn max(self) -> u128 {
        match self {
            CountWidth::W64 => u64::MAX as u128,
            CountWidth::W128 => u128::MAX,
        }
    }
}

/// Particle counts of one generation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenerationState {
    pub generation: u64,
    counts: BTreeMap<Vec<i64>, u128>,
    total: u128,
}

impl GenerationState {
    /// A single particle at the origin of `Z^d`.
    pub fn ancestor(d: usize) -> Self {
        Self::from_counts(0, [(vec![0; d], 1)])
    }

    /// Builds a state; zero counts are dropped. Panics on an empty state.
    pub fn from_counts(generation: u64, counts: impl IntoIterator<Item = (Vec<i64>, u128)>) -> Self {
        let counts: BTreeMap<_, _> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        let total = counts.values().sum();
        assert!(total >= 1, "a generation needs at least one particle");
        GenerationState {
            generation,
            counts,
            total,
        }
    }

    pub fn total(&self) -> u128 {
        self.total
    }

    pub fn count(&self, z: &[i64]) -> u128 {
        self.counts.get(z).copied().unwrap_or(0)
    }

    /// Occupied sites in lexicographic order.
    pub fn sites(&self) -> impl Iterator<Item = (&[i64], u128)> {
        self.counts.iter().map(|(z, &c)| (z.as_slice(), c))
    }

    pub fn occupied(&self) -> usize {
        self.counts.len()
    }

    pub fn dim(&self) -> usize {
        self.counts.keys().next().map_or(0, Vec::len)
    }

    /// `total / m^n`
    pub fn normalized_total(&self, mean: f64) -> f64 {
        self.total as f64 / mean.powi(self.generation as i32)
    }
}

fn overflow(generation: u64, width: CountWidth) -> SimError {
    SimError::CountOverflow {
        generation,
        width: width.bits(),
    }
}

/// One generation of branching and displacement.
pub fn evolve_generation(
    state: &GenerationState,
    off: &OffspringLaw,
    law: &StepLaw,
    seed: ReplicateSeed,
    width: CountWidth,
) -> Result<GenerationState, SimError> {
    let next_gen = state.generation + 1;
    let atoms = law.atoms();
    let atom_probs: Vec<f64> = atoms.iter().map(|a| a.prob).collect();
    let offspring_values: Vec<(u128, f64)> = off
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(k, &p)| (k as u128, p))
        .collect();
    let offspring_probs: Vec<f64> = offspring_values.iter().map(|v| v.1).collect();

    let sites: Vec<(&Vec<i64>, u128)> = state.counts.iter().map(|(z, &c)| (z, c)).collect();
    let per_site: Vec<Result<SiteOffspring, SimError>> = sites
        .par_iter()
        .enumerate()
        .map(|(ordinal, &(z, c))| {
            let mut rng = seed.stream(state.generation, ordinal as u64);
            let split = if offspring_values.len() == 1 {
                vec![c]
            } else {
                multinomial_exact(c, &offspring_probs, &mut rng)
            };
            let mut children: u128 = 0;
            for ((k, _), ck) in offspring_values.iter().zip(split) {
                let add = k.checked_mul(ck).ok_or_else(|| overflow(next_gen, width))?;
                children = children
                    .checked_add(add)
                    .filter(|&t| t <= width.max())
                    .ok_or_else(|| overflow(next_gen, width))?;
            }
            let placed = multinomial_exact(children, &atom_probs, &mut rng);
            let moves = atoms
                .iter()
                .zip(placed)
                .filter(|(_, cnt)| *cnt > 0)
                .map(|(atom, cnt)| {
                    let mut target = z.clone();
                    target[atom.axis] += atom.step;
                    (target, cnt)
                })
                .collect();
            Ok((children, moves))
        })
        .collect();

    let mut counts: BTreeMap<Vec<i64>, u128> = BTreeMap::new();
    let mut total: u128 = 0;
    for site in per_site {
        let (children, moves) = site?;
        total = total
            .checked_add(children)
            .filter(|&t| t <= width.max())
            .ok_or_else(|| overflow(next_gen, width))?;
        for (target, cnt) in moves {
            *counts.entry(target).or_default() += cnt;
        }
    }
    debug_assert_eq!(counts.values().sum::<u128>(), total);
    Ok(GenerationState {
        generation: next_gen,
        counts,
        total,
    })
}

/// Offspring total of one site and the counts it sends to each target.
type SiteOffspring = (u128, Vec<(Vec<i64>, u128)>);

/// Runs from a single ancestor to `n_max` and returns the states at the
/// scheduled generations, in increasing order.
pub fn simulate(
    off: &OffspringLaw,
    law: &StepLaw,
    n_max: u64,
    seed: ReplicateSeed,
    probes: &[u64],
    width: CountWidth,
) -> Result<Vec<GenerationState>, SimError> {
    simulate_with(off, law, n_max, seed, width, |s| probes.contains(&s.generation))
}

/// As [`simulate`], keeping every state for which `keep` returns true.
pub fn simulate_with(
    off: &OffspringLaw,
    law: &StepLaw,
    n_max: u64,
    seed: ReplicateSeed,
    width: CountWidth,
    mut keep: impl FnMut(&GenerationState) -> bool,
) -> Result<Vec<GenerationState>, SimError> {
    let mut state = GenerationState::ancestor(law.dim());
    let mut out = Vec::new();
    if keep(&state) {
        out.push(state.clone());
    }
    while state.generation < n_max {
        state = evolve_generation(&state, off, law, seed, width)?;
        if keep(&state) {
            out.push(state.clone());
        }
    }
    Ok(out)
}

/// CSV rows `generation,z1,…,zd,count` with exact integer counts.
pub fn write_snapshots_csv<W: Write>(states: &[GenerationState], mut out: W) -> io::Result<()> {
    let d = states.first().map_or(0, GenerationState::dim);
    let coords: Vec<String> = (1..=d).map(|s| format!("z{s}")).collect();
    writeln!(out, "generation,{},count", coords.join(","))?;
    for st in states {
        for (z, c) in st.sites() {
            let zs: Vec<String> = z.iter().map(i64::to_string).collect();
            writeln!(out, "{},{},{}", st.generation, zs.join(","), c)?;
        }
    }
    Ok(())
}
