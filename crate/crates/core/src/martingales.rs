//! Correction martingales of the branching random walk and the random
//! first- and second-order terms built from their limits.
//!
//! Each martingale is `m^{−n} Σ_u f(S_u, n)` for a per-particle polynomial
//! `f` that is harmonic for the walk: `E f(x + L, n + 1) = f(x, n)`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::branching::GenerationState;
use crate::llt::ExpansionConstants;
use crate::step_law::{Moments, StepLaw};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Functional {
    W,
    N1,
    N2,
    N2z,
    N3,
    N4,
}

impl Functional {
    pub const ALL: [Functional; 6] = [
        Functional::W,
        Functional::N1,
        Functional::N2,
        Functional::N2z,
        Functional::N3,
        Functional::N4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Functional::W => "W",
            Functional::N1 => "N1",
            Functional::N2 => "N2",
            Functional::N2z => "N2z",
            Functional::N3 => "N3",
            Functional::N4 => "N4",
        }
    }

    /// Per-particle value `f(x, n)`; `z` is only used by `N2z`.
    pub fn eval(self, mom: &Moments, x: &[f64], n: f64, z: &[f64]) -> Vec<f64> {
        let d = mom.dim() as f64;
        match self {
            Functional::W => vec![1.0],
            Functional::N1 => x.to_vec(),
            Functional::N2 => x.iter().zip(&mom.gamma2).map(|(v, g)| v * v - n * g).collect(),
            Functional::N2z => {
                let xz = mom.inv_inner(x, z);
                vec![xz * xz - n * mom.inv_inner(z, z)]
            }
            Functional::N3 => {
                let q = mom.inv_inner(x, x);
                x.iter().map(|v| q * v - (d + 2.0) * n * v).collect()
            }
            Functional::N4 => {
                let q = mom.inv_inner(x, x);
                vec![q * q - (4.0 + 2.0 * d) * n * q + d * (d + 2.0) * (n * n + n) - mom.tr_g4g2m2 * n]
            }
        }
    }
}

/// `E f(x + L, n + 1) − f(x, n)`, summed exactly over the law's atoms.
pub fn harmonicity_defect(
    functional: Functional,
    law: &StepLaw,
    mom: &Moments,
    x: &[f64],
    n: u64,
    z: &[f64],
) -> Vec<f64> {
    let nf = n as f64;
    let here = functional.eval(mom, x, nf, z);
    let mut expect = vec![0.0; here.len()];
    let mut y = x.to_vec();
    for atom in law.atoms() {
        y[atom.axis] = x[atom.axis] + atom.step as f64;
        for (e, v) in expect.iter_mut().zip(functional.eval(mom, &y, nf + 1.0, z)) {
            *e += atom.prob * v;
        }
        y[atom.axis] = x[atom.axis];
    }
    expect.iter().zip(&here).map(|(e, h)| e - h).collect()
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MartingaleReadout {
    pub generation: u64,
    pub w: f64,
    pub n1: Vec<f64>,
    pub n2: Vec<f64>,
    pub n2z: f64,
    pub n3: Vec<f64>,
    pub n4: f64,
}

impl MartingaleReadout {
    /// Flat view `[W, N1…, N2…, N2z, N3…, N4]`.
    pub fn components(&self) -> Vec<f64> {
        let mut v = vec![self.w];
        v.extend(&self.n1);
        v.extend(&self.n2);
        v.push(self.n2z);
        v.extend(&self.n3);
        v.push(self.n4);
        v
    }

    /// Labels matching [`components`](Self::components).
    pub fn component_names(d: usize) -> Vec<String> {
        let mut v = vec!["W".to_string()];
        v.extend((1..=d).map(|s| format!("N1_{s}")));
        v.extend((1..=d).map(|s| format!("N2_{s}")));
        v.push("N2z".into());
        v.extend((1..=d).map(|s| format!("N3_{s}")));
        v.push("N4".into());
        v
    }
}

/// Evaluates every martingale on a generation, scaling by `m^{−n}` last.
pub fn readout(state: &GenerationState, m: f64, mom: &Moments, z: &[i64]) -> MartingaleReadout {
    let d = mom.dim();
    let n = state.generation as f64;
    let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
    let vector_funcs = [Functional::N1, Functional::N2, Functional::N3];
    let mut acc_vec = vec![vec![Compensated::default(); d]; 3];
    let mut acc_n2z = Compensated::default();
    let mut acc_n4 = Compensated::default();
    for (site, count) in state.sites() {
        let x: Vec<f64> = site.iter().map(|&v| v as f64).collect();
        let c = count as f64;
        for (acc, f) in acc_vec.iter_mut().zip(vector_funcs) {
            for (a, v) in acc.iter_mut().zip(f.eval(mom, &x, n, &zf)) {
                a.add(c * v);
            }
        }
        acc_n2z.add(c * Functional::N2z.eval(mom, &x, n, &zf)[0]);
        acc_n4.add(c * Functional::N4.eval(mom, &x, n, &zf)[0]);
    }
    let scale = m.powi(-(state.generation as i32));
    let finish = |acc: &[Compensated]| acc.iter().map(|a| a.value() * scale).collect::<Vec<_>>();
    MartingaleReadout {
        generation: state.generation,
        w: state.total() as f64 * scale,
        n1: finish(&acc_vec[0]),
        n2: finish(&acc_vec[1]),
        n2z: acc_n2z.value() * scale,
        n3: finish(&acc_vec[2]),
        n4: acc_n4.value() * scale,
    }
}

/// Martingale values frozen at some generation and used as limit stand-ins.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitEstimates {
    pub v1: Vec<f64>,
    pub v2: Vec<f64>,
    pub v2z: f64,
    pub v3: Vec<f64>,
    pub v4: f64,
    pub w_inf: f64,
    pub source_generation: u64,
}

impl LimitEstimates {
    pub fn from_readout(r: &MartingaleReadout) -> Self {
        LimitEstimates {
            v1: r.n1.clone(),
            v2: r.n2.clone(),
            v2z: r.n2z,
            v3: r.n3.clone(),
            v4: r.n4,
            w_inf: r.w,
            source_generation: r.generation,
        }
    }

    /// `W = 1` and every correction limit zero.
    pub fn trivial(d: usize) -> Self {
        LimitEstimates {
            v1: vec![0.0; d],
            v2: vec![0.0; d],
            v2z: 0.0,
            v3: vec![0.0; d],
            v4: 0.0,
            w_inf: 1.0,
            source_generation: 0,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn as_f64(z: &[i64]) -> Vec<f64> {
    z.iter().map(|&v| v as f64).collect()
}

/// `F₁(z)`
pub fn f1_eval(est: &LimitEstimates, c: &ExpansionConstants, mom: &Moments, z: &[i64]) -> f64 {
    let zf = as_f64(z);
    let ginv_z: Vec<f64> = zf.iter().zip(&mom.gamma2).map(|(v, g)| v / g).collect();
    let ginv_1: Vec<f64> = mom.gamma2.iter().map(|g| 1.0 / g).collect();
    c.first_order(mom, z) * est.w_inf + dot(&est.v1, &ginv_z) - 0.5 * dot(&est.v2, &ginv_1)
}

/// `F₂(z)`, with `Λ_d` entering as `−⟨Λ_d z,z⟩` in the `W` coefficient.
pub fn f2_eval(est: &LimitEstimates, c: &ExpansionConstants, mom: &Moments, z: &[i64]) -> f64 {
    let zf = as_f64(z);
    let q = mom.quad_form(z);
    let w_term = c.second_order(mom, z) * est.w_inf;
    let v1_dir: Vec<f64> = (0..zf.len())
        .map(|s| (2.0 * c.lambda_d[s] - 0.5 * q / mom.gamma2[s]) * zf[s])
        .collect();
    let v2_dir: Vec<f64> = (0..zf.len())
        .map(|s| 0.25 * q / mom.gamma2[s] - c.lambda_d[s])
        .collect();
    let ginv_z: Vec<f64> = zf.iter().zip(&mom.gamma2).map(|(v, g)| v / g).collect();
    w_term + dot(&est.v1, &v1_dir) + dot(&est.v2, &v2_dir) + 0.5 * est.v2z - 0.5 * dot(&est.v3, &ginv_z) + est.v4 / 8.0
}

/// Predicted `m^{−n} Z_n(z)`.
pub fn theorem_prediction(est: &LimitEstimates, c: &ExpansionConstants, mom: &Moments, n: u64, z: &[i64]) -> f64 {
    assert!(n >= 1, "prediction needs n >= 1");
    if !c.class.parity_allows(n, z) {
        return 0.0;
    }
    let nf = n as f64;
    c.leading(n) * (est.w_inf + f1_eval(est, c, mom, z) / nf + f2_eval(est, c, mom, z) / (nf * nf))
}

/// `n^{d/2+2}(m^{−n} Z_n(z) − prediction)`.
pub fn brw_residual(
    snapshot: &GenerationState,
    m: f64,
    est: &LimitEstimates,
    c: &ExpansionConstants,
    mom: &Moments,
    z: &[i64],
) -> f64 {
    let n = snapshot.generation;
    let observed = snapshot.count(z) as f64 * m.powi(-(n as i32));
    let predicted = theorem_prediction(est, c, mom, n, z);
    if observed == 0.0 && predicted == 0.0 {
        return 0.0;
    }
    (n as f64).powf(mom.dim() as f64 / 2.0 + 2.0) * (observed - predicted)
}

/// `(2πn)^{d/2}√det Γ₂/factor · m^{−n}Z_n(z) − W_n`, the signed local
/// deviation from the leading term.
pub fn leading_deviation(snapshot: &GenerationState, m: f64, c: &ExpansionConstants, mom: &Moments, z: &[i64]) -> f64 {
    let n = snapshot.generation;
    let d = mom.dim() as f64;
    let scale = m.powi(-(n as i32));
    let unnormalize = (2.0 * PI * n as f64).powf(d / 2.0) * mom.det_gamma2.sqrt() / c.class.factor();
    unnormalize * snapshot.count(z) as f64 * scale - snapshot.total() as f64 * scale
}

/// `μ_{σ,d}` as printed for the lazy simple walk.
pub fn corollary_mu(sigma: f64, d: usize) -> f64 {
    let d = d as f64;
    -(1.0 + 4.0 / d) / 8.0 + sigma * (d / 16.0 + 3.0 / 8.0 + 1.0 / (2.0 * d))
}

/// `χ_{σ,d}` as printed for the lazy simple walk.
pub fn corollary_chi(sigma: f64, d: usize) -> f64 {
    let d = d as f64;
    d / 48.0 - 1.0 / 32.0
        + 1.0 / (24.0 * d)
        + sigma * (d + 2.0) * (d + 4.0) / 64.0 * (sigma / 2.0 + (sigma - 2.0) / (3.0 * d))
}

/// Limits in the lazy-simple-walk normalization: `(Ṽ₂^z, Ṽ₃, Ṽ₄)`.
///
/// With `a = (1−σ)/d` the tilde sums are `a²·N₂^z`, `a·N₃` and `a²·N₄`.
pub fn tilde_limits(sigma: f64, d: usize, est: &LimitEstimates) -> (f64, Vec<f64>, f64) {
    let a = (1.0 - sigma) / d as f64;
    (a * a * est.v2z, est.v3.iter().map(|v| a * v).collect(), a * a * est.v4)
}

/// `(ℋ_{σ,1}(z), ℋ_{σ,2}(z))` for the law `zeta0 = σ`, `ζ_{s,1} = (1−σ)/d`,
/// using `μ_{σ,d}` and `χ_{σ,d}` exactly as printed (including the `+μ‖z‖²`
/// sign in the `W` coefficient).
pub fn corollary_eval(sigma: f64, d: usize, est: &LimitEstimates, z: &[i64]) -> (f64, f64) {
    let df = d as f64;
    let zf = as_f64(z);
    let z2: f64 = zf.iter().map(|v| v * v).sum();
    let v2_sum: f64 = est.v2.iter().sum();
    let z_v1 = dot(&zf, &est.v1);
    let pre = df / (1.0 - sigma);
    let h1 = pre * ((sigma * (df + 2.0) / 8.0 - 0.25 - 0.5 * z2) * est.w_inf + z_v1 - 0.5 * v2_sum);
    let mu = corollary_mu(sigma, d);
    let chi = corollary_chi(sigma, d);
    let (t2z, t3, t4) = tilde_limits(sigma, d, est);
    let h2 = pre
        * pre
        * ((z2 * z2 / 8.0 + mu * z2 + chi) * est.w_inf
            + (2.0 * mu - 0.5 * z2) * z_v1
            + (z2 / 4.0 - mu) * v2_sum
            + 0.5 * t2z
            - 0.5 * dot(&zf, &t3)
            + t4 / 8.0);
    (h1, h2)
}
