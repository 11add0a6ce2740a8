//! Symmetric finite-range step laws on the integer lattice.
//!
//! A law puts mass `zeta0` on the origin and mass `ζ_{s,r}/2` on each of
//! `±r·e_s`. Weights are given per axis as `[ζ_{s,1}, …, ζ_{s,t_s}]`.

use serde::{Deserialize, Serialize};

use crate::error::LawError;

/// Weights strictly below this are treated as exact zeros.
pub const ZERO_WEIGHT_CUTOFF: f64 = 1e-15;

/// Tolerance on the total weight before renormalization.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Unvalidated law as it appears in experiment configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawStepLaw {
    pub d: usize,
    pub zeta0: f64,
    pub axes: Vec<Vec<f64>>,
}

impl RawStepLaw {
    /// Lazy simple walk: `zeta0 = σ`, `ζ_{s,1} = (1−σ)/d` on every axis.
    pub fn lazy_simple(sigma: f64, d: usize) -> Self {
        RawStepLaw {
            d,
            zeta0: sigma,
            axes: vec![vec![(1.0 - sigma) / d as f64]; d],
        }
    }

    pub fn simple(d: usize) -> Self {
        Self::lazy_simple(0.0, d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WalkClass {
    Aperiodic,
    Bipartite,
}

impl WalkClass {
    /// Prefactor of the leading Gaussian term: 1 or 2.
    pub fn factor(self) -> f64 {
        match self {
            WalkClass::Aperiodic => 1.0,
            WalkClass::Bipartite => 2.0,
        }
    }

    /// Whether `z` is reachable in exactly `n` steps as far as parity goes.
    pub fn parity_allows(self, n: u64, z: &[i64]) -> bool {
        match self {
            WalkClass::Aperiodic => true,
            WalkClass::Bipartite => {
                let sum: i64 = z.iter().sum();
                (sum - n as i64).rem_euclid(2) == 0
            }
        }
    }
}

/// One displacement of the law. `step == 0` is the lazy atom.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub axis: usize,
    pub step: i64,
    pub prob: f64,
}

/// A validated, exactly normalized step law.
#[derive(Clone, Debug, PartialEq)]
pub struct StepLaw {
    zeta0: f64,
    axes: Vec<Vec<f64>>,
    warnings: Vec<String>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl StepLaw {
    pub fn validate(raw: &RawStepLaw) -> Result<StepLaw, LawError> {
        if raw.d == 0 {
            return Err(LawError::Shape("dimension must be positive".into()));
        }
        if raw.axes.len() != raw.d {
            return Err(LawError::Shape(format!(
                "expected {} axes, found {}",
                raw.d,
                raw.axes.len()
            )));
        }
        if let Some(s) = raw.axes.iter().position(|a| a.is_empty()) {
            return Err(LawError::Shape(format!("axis {} has no weights", s + 1)));
        }
        let all = std::iter::once(raw.zeta0).chain(raw.axes.iter().flatten().copied());
        for w in all {
            if !w.is_finite() {
                return Err(LawError::Shape(format!("non-finite weight {w}")));
            }
            if w < 0.0 {
                return Err(LawError::NegativeWeight(w));
            }
        }

        let mut warnings = Vec::new();
        let mut cut = |w: f64, what: String| -> f64 {
            if w > 0.0 && w < ZERO_WEIGHT_CUTOFF {
                warnings.push(format!("{what} = {w:e} treated as zero"));
                0.0
            } else {
                w
            }
        };
        let zeta0 = cut(raw.zeta0, "zeta0".into());
        let axes: Vec<Vec<f64>> = raw
            .axes
            .iter()
            .enumerate()
            .map(|(s, ax)| {
                ax.iter()
                    .enumerate()
                    .map(|(i, &w)| cut(w, format!("zeta[{},{}]", s + 1, i + 1)))
                    .collect()
            })
            .collect();

        let sum = zeta0 + axes.iter().flatten().sum::<f64>();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(LawError::NonNormalized(sum));
        }
        if zeta0 / sum >= 1.0 {
            return Err(LawError::DegenerateLazy);
        }
        for (s, ax) in axes.iter().enumerate() {
            if *ax.last().unwrap() == 0.0 {
                return Err(LawError::ZeroTopWeight { axis: s + 1 });
            }
            let g = ax
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0)
                .fold(0, |g, (i, _)| gcd(g, i + 1));
            if g != 1 {
                return Err(LawError::Reducible { axis: s + 1, gcd: g });
            }
        }

        Ok(StepLaw {
            zeta0: zeta0 / sum,
            axes: axes
                .into_iter()
                .map(|ax| ax.into_iter().map(|w| w / sum).collect())
                .collect(),
            warnings,
        })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn zeta0(&self) -> f64 {
        self.zeta0
    }

    /// `[ζ_{s,1}, …, ζ_{s,t_s}]` for the zero-based axis `s`.
    pub fn axis_weights(&self, s: usize) -> &[f64] {
        &self.axes[s]
    }

    /// Maximal range `t_s` on the zero-based axis `s`.
    pub fn range(&self, s: usize) -> usize {
        self.axes[s].len()
    }

    pub fn ranges(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn max_range(&self) -> usize {
        self.axes.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn to_raw(&self) -> RawStepLaw {
        RawStepLaw {
            d: self.dim(),
            zeta0: self.zeta0,
            axes: self.axes.clone(),
        }
    }

    pub fn class(&self) -> WalkClass {
        let odd_only = self
            .axes
            .iter()
            .all(|ax| ax.iter().enumerate().all(|(i, &w)| w == 0.0 || (i + 1) % 2 == 1));
        if self.zeta0 == 0.0 && odd_only {
            WalkClass::Bipartite
        } else {
            WalkClass::Aperiodic
        }
    }

    /// Support atoms in the canonical order: axis-major, increasing `r`,
    /// minus before plus, lazy atom last (only if `zeta0 > 0`).
    pub fn atoms(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        for (s, ax) in self.axes.iter().enumerate() {
            for (i, &w) in ax.iter().enumerate() {
                if w > 0.0 {
                    let r = (i + 1) as i64;
                    out.push(Atom {
                        axis: s,
                        step: -r,
                        prob: w / 2.0,
                    });
                    out.push(Atom {
                        axis: s,
                        step: r,
                        prob: w / 2.0,
                    });
                }
            }
        }
        if self.zeta0 > 0.0 {
            out.push(Atom {
                axis: 0,
                step: 0,
                prob: self.zeta0,
            });
        }
        out
    }

    /// Characteristic function `ψ(φ) = zeta0 + Σ ζ_{s,r} cos(r φ_s)`.
    pub fn char_fn(&self, phi: &[f64]) -> f64 {
        let mut acc = self.zeta0;
        for (s, ax) in self.axes.iter().enumerate() {
            for (i, &w) in ax.iter().enumerate() {
                acc += w * ((i + 1) as f64 * phi[s]).cos();
            }
        }
        acc
    }

    pub fn moments(&self) -> Moments {
        let power_sum =
            |ax: &[f64], k: i32| -> f64 { ax.iter().enumerate().map(|(i, &w)| w * ((i + 1) as f64).powi(k)).sum() };
        let g = |k| self.axes.iter().map(|ax| power_sum(ax, k)).collect::<Vec<_>>();
        Moments::from_diagonals(g(2), g(4), g(6))
    }
}

/// Diagonal moment matrices `Γ₂, Γ₄, Γ₆` and the traces the expansion needs.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub gamma2: Vec<f64>,
    pub gamma4: Vec<f64>,
    pub gamma6: Vec<f64>,
    pub det_gamma2: f64,
    /// `tr(Γ₄Γ₂⁻²)`
    pub tr_g4g2m2: f64,
    /// `tr(Γ₆Γ₂⁻³)`
    pub tr_g6g2m3: f64,
    /// `tr(Γ₄²Γ₂⁻⁴)`
    pub tr_g4sq_g2m4: f64,
}

impl Moments {
    /// Builds from per-axis `ζ_s(2), ζ_s(4), ζ_s(6)`. Panics on mismatched
    /// lengths or a non-positive second moment.
    pub fn from_diagonals(gamma2: Vec<f64>, gamma4: Vec<f64>, gamma6: Vec<f64>) -> Self {
        assert!(
            gamma2.len() == gamma4.len() && gamma2.len() == gamma6.len(),
            "moment vectors must share a dimension"
        );
        assert!(gamma2.iter().all(|&g| g > 0.0), "second moments must be positive");
        let det_gamma2 = gamma2.iter().product();
        let tr = |f: &dyn Fn(usize) -> f64| (0..gamma2.len()).map(f).sum::<f64>();
        let tr_g4g2m2 = tr(&|s| gamma4[s] / (gamma2[s] * gamma2[s]));
        let tr_g6g2m3 = tr(&|s| gamma6[s] / gamma2[s].powi(3));
        let tr_g4sq_g2m4 = tr(&|s| (gamma4[s] / (gamma2[s] * gamma2[s])).powi(2));
        Moments {
            gamma2,
            gamma4,
            gamma6,
            det_gamma2,
            tr_g4g2m2,
            tr_g6g2m3,
            tr_g4sq_g2m4,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma2.len()
    }

    /// `⟨x, Γ₂⁻¹ y⟩`
    pub fn inv_inner(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).zip(&self.gamma2).map(|((a, b), g)| a * b / g).sum()
    }

    /// `⟨z, Γ₂⁻¹ z⟩` for a lattice point.
    pub fn quad_form(&self, z: &[i64]) -> f64 {
        z.iter().zip(&self.gamma2).map(|(&v, g)| (v * v) as f64 / g).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(d: usize, zeta0: f64, axes: Vec<Vec<f64>>) -> RawStepLaw {
        RawStepLaw { d, zeta0, axes }
    }

    #[test]
    fn simple_walk_is_valid_and_bipartite() {
        let law = StepLaw::validate(&RawStepLaw::simple(1)).unwrap();
        assert_eq!(law.class(), WalkClass::Bipartite);
        assert!(law.warnings().is_empty());
    }

    #[test]
    fn even_only_support_is_reducible() {
        let err = StepLaw::validate(&raw(1, 0.0, vec![vec![0.0, 1.0]])).unwrap_err();
        assert_eq!(err, LawError::Reducible { axis: 1, gcd: 2 });
    }

    #[test]
    fn lazy_two_dim_example_is_valid() {
        let law = StepLaw::validate(&raw(2, 0.2, vec![vec![0.4], vec![0.4]])).unwrap();
        assert_eq!(law.class(), WalkClass::Aperiodic);
    }

    #[test]
    fn rejection_reasons() {
        assert!(matches!(
            StepLaw::validate(&raw(1, 0.1, vec![vec![0.5]])),
            Err(LawError::NonNormalized(_))
        ));
        assert!(matches!(
            StepLaw::validate(&raw(1, 0.5, vec![vec![-0.1, 0.6]])),
            Err(LawError::NegativeWeight(_))
        ));
        assert_eq!(
            StepLaw::validate(&raw(1, 0.5, vec![vec![0.5, 0.0]])),
            Err(LawError::ZeroTopWeight { axis: 1 })
        );
        assert_eq!(
            StepLaw::validate(&raw(1, 1.0, vec![vec![0.0]])),
            Err(LawError::DegenerateLazy)
        );
        assert!(matches!(
            StepLaw::validate(&raw(2, 0.0, vec![vec![1.0]])),
            Err(LawError::Shape(_))
        ));
    }

    #[test]
    fn classification_cases() {
        let c = |r: RawStepLaw| StepLaw::validate(&r).unwrap().class();
        assert_eq!(c(raw(1, 0.0, vec![vec![1.0]])), WalkClass::Bipartite);
        assert_eq!(c(raw(1, 1.0 / 3.0, vec![vec![2.0 / 3.0]])), WalkClass::Aperiodic);
        assert_eq!(c(raw(1, 0.0, vec![vec![0.5, 0.5]])), WalkClass::Aperiodic);
        assert_eq!(
            c(raw(2, 0.0, vec![vec![0.25, 0.0, 0.25], vec![0.5]])),
            WalkClass::Bipartite
        );
    }

    #[test]
    fn tiny_weights_are_cut_with_a_warning() {
        let law = StepLaw::validate(&raw(1, 1e-17, vec![vec![1.0 - 1e-17]])).unwrap();
        assert_eq!(law.zeta0(), 0.0);
        assert_eq!(law.class(), WalkClass::Bipartite);
        assert_eq!(law.warnings().len(), 1);
    }

    #[test]
    fn moments_examples() {
        let m = StepLaw::validate(&RawStepLaw::simple(1)).unwrap().moments();
        assert_eq!((m.gamma2[0], m.gamma4[0], m.gamma6[0]), (1.0, 1.0, 1.0));

        let m = StepLaw::validate(&raw(1, 0.0, vec![vec![0.5, 0.0, 0.5]]))
            .unwrap()
            .moments();
        assert_eq!((m.gamma2[0], m.gamma4[0], m.gamma6[0]), (5.0, 41.0, 365.0));

        let m = StepLaw::validate(&raw(1, 0.5, vec![vec![0.5]])).unwrap().moments();
        assert_eq!(m.gamma2, vec![0.5]);
    }

    #[test]
    fn atoms_follow_canonical_order() {
        let law = StepLaw::validate(&raw(2, 0.2, vec![vec![0.2, 0.2], vec![0.4]])).unwrap();
        let steps: Vec<(usize, i64)> = law.atoms().iter().map(|a| (a.axis, a.step)).collect();
        assert_eq!(steps, vec![(0, -1), (0, 1), (0, -2), (0, 2), (1, -1), (1, 1), (0, 0)]);
        let total: f64 = law.atoms().iter().map(|a| a.prob).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }
}
