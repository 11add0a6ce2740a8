//! The thirteen Gaussian moment identities behind the second-order
//! constants, checked by product trapezoid quadrature.
//!
//! Every integrand is a polynomial in `θ` times the separable weight
//! `exp(−½Σ ζ_s(2) θ_s²)`. The tensor-product rule applied to a monomial
//! factors into one-dimensional sums, so the integral is assembled from
//! per-axis quadrature moments `M_s[k] ≈ ∫ θ^k e^{−ζ_s(2)θ²/2} dθ`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::Error;
use crate::step_law::Moments;

pub const IDENTITY_COUNT: usize = 13;
pub const DEFAULT_PANELS: usize = 4096;
/// Per-axis truncation `|θ_s| ≤ TRUNCATION / √ζ_s(2)`.
pub const TRUNCATION: f64 = 12.0;
const MAX_DEGREE: usize = 8;

/// Sparse polynomial: exponent vector → coefficient.
#[derive(Clone, Debug, Default)]
struct Poly(BTreeMap<Vec<u8>, f64>);

impl Poly {
    fn constant(d: usize, c: f64) -> Self {
        let mut p = Poly::default();
        p.0.insert(vec![0; d], c);
        p
    }

    /// `Σ_s coef[s]·θ_s^k`
    fn axis_sum(coef: &[f64], k: u8) -> Self {
        let d = coef.len();
        let mut p = Poly::default();
        for (s, &c) in coef.iter().enumerate() {
            if c != 0.0 {
                let mut e = vec![0; d];
                e[s] = k;
                *p.0.entry(e).or_default() += c;
            }
        }
        p
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (ea, ca) in &self.0 {
            for (eb, cb) in &other.0 {
                let e: Vec<u8> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                *out.0.entry(e).or_default() += ca * cb;
            }
        }
        out
    }

    fn pow(&self, k: u32) -> Poly {
        let d = self.0.keys().next().map_or(0, Vec::len);
        (0..k).fold(Poly::constant(d, 1.0), |acc, _| acc.mul(self))
    }
}

/// Trapezoid moments `M[k]`, `k = 0..=MAX_DEGREE`, of `e^{−g θ²/2}`.
fn axis_moments(g2: f64, panels: usize) -> [f64; MAX_DEGREE + 1] {
    let half = TRUNCATION / g2.sqrt();
    let h = 2.0 * half / panels as f64;
    let mut m = [0.0; MAX_DEGREE + 1];
    for j in 0..=panels {
        let theta = -half + j as f64 * h;
        let w = if j == 0 || j == panels { 0.5 } else { 1.0 };
        let base = w * h * (-0.5 * g2 * theta * theta).exp();
        let mut pow = 1.0;
        for slot in m.iter_mut() {
            *slot += base * pow;
            pow *= theta;
        }
    }
    m
}

fn integrand(m: &Moments, index: usize, z: &[f64]) -> Poly {
    let d = m.dim();
    let lin = Poly::axis_sum(z, 1);
    let q2 = Poly::axis_sum(&m.gamma2, 2);
    let q4 = Poly::axis_sum(&m.gamma4, 4);
    let q6 = Poly::axis_sum(&m.gamma6, 6);
    match index {
        1 => lin.pow(2),
        2 => lin.pow(4),
        3 => q2.pow(2).mul(&lin.pow(2)),
        4 => q4.mul(&lin.pow(2)),
        5 => Poly::constant(d, 1.0),
        6 => q4,
        7 => q2.pow(2),
        8 => q2.mul(&q4),
        9 => q6,
        10 => q2.pow(3),
        11 => q2.pow(4),
        12 => q4.pow(2),
        13 => q4.mul(&q2.pow(2)),
        _ => unreachable!("identity index checked by caller"),
    }
}

/// Right-hand side of identity `index` (1-based).
pub fn closed_form(m: &Moments, index: usize, z: &[f64]) -> f64 {
    let d = m.dim() as f64;
    let k = (2.0 * PI).powf(d / 2.0) / m.det_gamma2.sqrt();
    let q = m.inv_inner(z, z);
    let tr = m.tr_g4g2m2;
    let z_g4g2m3_z: f64 = (0..m.dim())
        .map(|s| z[s] * z[s] * m.gamma4[s] / m.gamma2[s].powi(3))
        .sum();
    k * match index {
        1 => q,
        2 => 3.0 * q * q,
        3 => (d + 2.0) * (d + 4.0) * q,
        4 => 3.0 * (4.0 * z_g4g2m3_z + tr * q),
        5 => 1.0,
        6 => 3.0 * tr,
        7 => d * (d + 2.0),
        8 => 3.0 * (d + 4.0) * tr,
        9 => 15.0 * m.tr_g6g2m3,
        10 => d * (d + 2.0) * (d + 4.0),
        11 => d * (d + 2.0) * (d + 4.0) * (d + 6.0),
        12 => 96.0 * m.tr_g4sq_g2m4 + 9.0 * tr * tr,
        13 => 3.0 * (d + 4.0) * (d + 6.0) * tr,
        _ => unreachable!("identity index checked by caller"),
    }
}

/// Left-hand side of identity `index` by product quadrature.
pub fn quadrature(m: &Moments, index: usize, z: &[f64], panels: usize) -> f64 {
    let per_axis: Vec<_> = m.gamma2.iter().map(|&g| axis_moments(g, panels)).collect();
    integrand(m, index, z)
        .0
        .iter()
        .map(|(e, c)| {
            c * e
                .iter()
                .enumerate()
                .map(|(s, &k)| per_axis[s][k as usize])
                .product::<f64>()
        })
        .sum()
}

/// Relative error between quadrature and closed form; when the closed form
/// is exactly zero (identities 1–4 at `z = 0`) the absolute value is
/// returned instead.
pub fn gaussian_identity_check(m: &Moments, index: usize, z: &[f64], panels: usize) -> Result<f64, Error> {
    if !(1..=IDENTITY_COUNT).contains(&index) {
        return Err(Error::Config(format!("identity index {index} outside 1..=13")));
    }
    if m.dim() > 3 {
        return Err(Error::Config("identity checks are limited to d <= 3".into()));
    }
    if z.len() != m.dim() {
        return Err(Error::Config("z has the wrong dimension".into()));
    }
    let lhs = quadrature(m, index, z, panels);
    let rhs = closed_form(m, index, z);
    Ok(if rhs == 0.0 {
        lhs.abs()
    } else {
        ((lhs - rhs) / rhs).abs()
    })
}
