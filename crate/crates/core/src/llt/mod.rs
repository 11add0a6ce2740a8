//! Second-order local limit expansion for a single walk: constants,
//! predicted probabilities, scaled residuals and the empirical
//! coefficient fit that arbitrates the `‖z‖²` sign.

pub mod identities;

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{DistError, Error};
use crate::exact_dist::{LatticeDist, DEFAULT_ELEMENT_BUDGET};
use crate::step_law::{Moments, StepLaw, WalkClass};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionConstants {
    pub tau_d: f64,
    /// Diagonal of `Λ_d`.
    pub lambda_d: Vec<f64>,
    pub chi_d: f64,
    /// `(det Γ₂)^{−1/2}`
    pub norm: f64,
    pub class: WalkClass,
}

/// The five summands of `χ_d`, in display order.
pub fn chi_terms(m: &Moments) -> [f64; 5] {
    let d = m.dim() as f64;
    let t = m.tr_g4g2m2;
    [
        -(d + 2.0) * (d + 4.0) * t / 64.0,
        m.tr_g4sq_g2m4 / 12.0,
        t * t / 128.0,
        -m.tr_g6g2m3 / 48.0,
        d * (d + 2.0) * (d + 4.0) * (3.0 * d + 2.0) / 384.0,
    ]
}

impl ExpansionConstants {
    pub fn new(m: &Moments, class: WalkClass) -> Self {
        let d = m.dim() as f64;
        let t = m.tr_g4g2m2;
        let tau_d = t / 8.0 - d * (d + 2.0) / 8.0;
        let shared = (t - (d + 2.0) * (d + 4.0)) / 16.0;
        let lambda_d = m
            .gamma2
            .iter()
            .zip(&m.gamma4)
            .map(|(g2, g4)| shared / g2 + g4 / (4.0 * g2 * g2 * g2))
            .collect();
        let chi_d = chi_terms(m).iter().sum();
        ExpansionConstants {
            tau_d,
            lambda_d,
            chi_d,
            norm: m.det_gamma2.sqrt().recip(),
            class,
        }
    }

    pub fn for_law(law: &StepLaw) -> Self {
        Self::new(&law.moments(), law.class())
    }

    /// `⟨Λ_d z, z⟩`
    pub fn lambda_form(&self, z: &[i64]) -> f64 {
        self.lambda_d.iter().zip(z).map(|(l, &v)| l * (v * v) as f64).sum()
    }

    /// `factor·(2πn)^{−d/2}(det Γ₂)^{−1/2}`, ignoring parity.
    pub fn leading(&self, n: u64) -> f64 {
        let d = self.lambda_d.len() as f64;
        self.class.factor() * (2.0 * PI * n as f64).powf(-d / 2.0) * self.norm
    }

    /// First-order bracket `τ_d − ½⟨z,Γ₂⁻¹z⟩`.
    pub fn first_order(&self, m: &Moments, z: &[i64]) -> f64 {
        self.tau_d - 0.5 * m.quad_form(z)
    }

    /// Second-order bracket `⅛⟨z,Γ₂⁻¹z⟩² − ⟨Λ_d z,z⟩ + χ_d`.
    pub fn second_order(&self, m: &Moments, z: &[i64]) -> f64 {
        let q = m.quad_form(z);
        q * q / 8.0 - self.lambda_form(z) + self.chi_d
    }
}

/// Predicted `P(S_n = z)` from the expansion, exactly zero on a bipartite
/// parity mismatch.
pub fn rw_expansion(c: &ExpansionConstants, m: &Moments, n: u64, z: &[i64]) -> f64 {
    assert!(n >= 1, "expansion needs n >= 1");
    if !c.class.parity_allows(n, z) {
        return 0.0;
    }
    let nf = n as f64;
    c.leading(n) * (1.0 + c.first_order(m, z) / nf + c.second_order(m, z) / (nf * nf))
}

/// `n^{d/2+2}·(P(S_n=z) − prediction)` from an already computed distribution.
pub fn scaled_residual(dist: &LatticeDist, c: &ExpansionConstants, m: &Moments, z: &[i64]) -> f64 {
    let n = dist.steps();
    let d = dist.dim() as f64;
    let exact = dist.at(z);
    let predicted = rw_expansion(c, m, n, z);
    if exact == 0.0 && predicted == 0.0 {
        return 0.0;
    }
    (n as f64).powf(d / 2.0 + 2.0) * (exact - predicted)
}

/// `γ_n(z)`, computing the exact distribution by convolution.
pub fn gamma_residual(law: &StepLaw, n: u64, z: &[i64]) -> Result<f64, DistError> {
    let dist = LatticeDist::after_steps(law, n, DEFAULT_ELEMENT_BUDGET)?;
    Ok(scaled_residual(
        &dist,
        &ExpansionConstants::for_law(law),
        &law.moments(),
        z,
    ))
}

/// Lattice points with `‖z‖ ≤ C·n^κ`. The bound gets a 1e-9 relative
/// allowance so that exact integer radii (e.g. `1024^{0.1} = 2`) are kept.
pub fn admissible_points(d: usize, n: u64, kappa: f64, c: f64) -> Vec<Vec<i64>> {
    let bound = c * (n as f64).powf(kappa) * (1.0 + 1e-9);
    let r = bound.floor() as i64;
    let width = (2 * r + 1) as usize;
    let mut out = Vec::new();
    for idx in 0..width.pow(d as u32) {
        let mut rem = idx;
        let mut z = vec![0i64; d];
        for s in (0..d).rev() {
            z[s] = (rem % width) as i64 - r;
            rem /= width;
        }
        let norm2: i64 = z.iter().map(|v| v * v).sum();
        if (norm2 as f64).sqrt() <= bound {
            out.push(z);
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientPoint {
    pub n: u64,
    pub exact: f64,
    /// `ρ_n = P/leading − 1`
    pub rho: f64,
    /// `n·ρ_n`
    pub c1: f64,
    /// `n²(ρ_n − c1_exact/n)`
    pub c2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoefficientFit {
    pub z: Vec<i64>,
    pub sequence: Vec<CoefficientPoint>,
    pub c1_hat: f64,
    pub c2_hat: f64,
    /// `τ_d − ½⟨z,Γ₂⁻¹z⟩`
    pub c1_target: f64,
    /// `⅛⟨z,Γ₂⁻¹z⟩² − ⟨Λ_d z,z⟩ + χ_d`
    pub c2_target: f64,
}

/// Point estimates of the `1/n` and `1/n²` coefficients at the largest `n`.
pub fn fit_correction_coefficients(
    law: &StepLaw,
    z: &[i64],
    n_list: &[u64],
    budget: usize,
) -> Result<CoefficientFit, Error> {
    if n_list.len() < 3 {
        return Err(Error::Config("coefficient fit needs at least three step counts".into()));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) || n_list[0] == 0 {
        return Err(Error::Config("step counts must be positive and increasing".into()));
    }
    let class = law.class();
    if let Some(&bad) = n_list.iter().find(|&&n| !class.parity_allows(n, z)) {
        return Err(Error::Config(format!(
            "n = {bad} has the wrong parity for z = {z:?} on a bipartite walk"
        )));
    }
    let m = law.moments();
    let c = ExpansionConstants::new(&m, class);
    let c1_target = c.first_order(&m, z);
    let c2_target = c.second_order(&m, z);

    let mut dist = LatticeDist::delta(law);
    let mut sequence = Vec::with_capacity(n_list.len());
    for &n in n_list {
        while dist.steps() < n {
            dist = dist.convolve_step(law, budget)?;
        }
        let exact = dist.at(z);
        let nf = n as f64;
        let rho = exact / c.leading(n) - 1.0;
        sequence.push(CoefficientPoint {
            n,
            exact,
            rho,
            c1: nf * rho,
            c2: nf * nf * (rho - c1_target / nf),
        });
    }
    let last = sequence.last().unwrap();
    Ok(CoefficientFit {
        z: z.to_vec(),
        c1_hat: last.c1,
        c2_hat: last.c2,
        sequence,
        c1_target,
        c2_target,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SignVerdict {
    /// `−⟨Λ_d z,z⟩`, as in the general expansion.
    Theorem,
    /// `+⟨Λ_d z,z⟩`, as the lazy-simple-walk specialization prints it.
    Corollary,
    /// `⟨Λ_d z,z⟩ = 0`; the data cannot tell the two apart.
    Indistinguishable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SignArbitration {
    pub empirical: f64,
    pub theorem_candidate: f64,
    pub corollary_candidate: f64,
    pub verdict: SignVerdict,
}

/// Compares the empirical second-order coefficient with both printed signs
/// of the `⟨Λ_d z,z⟩` term.
pub fn arbitrate_sign(fit: &CoefficientFit, c: &ExpansionConstants, m: &Moments) -> SignArbitration {
    let q = m.quad_form(&fit.z);
    let lz = c.lambda_form(&fit.z);
    let theorem = q * q / 8.0 - lz + c.chi_d;
    let corollary = q * q / 8.0 + lz + c.chi_d;
    let verdict = if lz == 0.0 {
        SignVerdict::Indistinguishable
    } else if (fit.c2_hat - theorem).abs() < (fit.c2_hat - corollary).abs() {
        SignVerdict::Theorem
    } else {
        SignVerdict::Corollary
    };
    SignArbitration {
        empirical: fit.c2_hat,
        theorem_candidate: theorem,
        corollary_candidate: corollary,
        verdict,
    }
}
