//! Exact n-step distributions by dense lattice convolution, and the
//! characteristic-function inversion used to cross-check them.

use std::f64::consts::PI;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::DistError;
use crate::step_law::{StepLaw, WalkClass};

/// Default element budget for a dense distribution (2^28 entries).
pub const DEFAULT_ELEMENT_BUDGET: usize = 1 << 28;

/// Probability mass of `S_n` on the box `Π_s [−n·t_s, n·t_s]`.
///
/// Row-major storage with the last axis contiguous; the box is centred, so
/// the flat index of `−z` is `len − 1 − index(z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeDist {
    n: u64,
    radius: Vec<usize>,
    mass: Vec<f64>,
}

fn checked_box_len(radius: &[usize]) -> Option<usize> {
    radius.iter().try_fold(1usize, |acc, r| acc.checked_mul(2 * r + 1))
}

impl LatticeDist {
    /// Unit mass at the origin (n = 0).
    pub fn delta(law: &StepLaw) -> Self {
        LatticeDist {
            n: 0,
            radius: vec![0; law.dim()],
            mass: vec![1.0],
        }
    }

    pub fn steps(&self) -> u64 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.radius.len()
    }

    pub fn radius(&self) -> &[usize] {
        &self.radius
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    fn index_of(&self, z: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for (&zs, &rs) in z.iter().zip(&self.radius) {
            let c = zs + rs as i64;
            if c < 0 || c > 2 * rs as i64 {
                return None;
            }
            idx = idx * (2 * rs + 1) + c as usize;
        }
        Some(idx)
    }

    /// Lattice point stored at a flat index.
    pub fn point_at(&self, mut idx: usize) -> Vec<i64> {
        let mut z = vec![0i64; self.dim()];
        for s in (0..self.dim()).rev() {
            let w = 2 * self.radius[s] + 1;
            z[s] = (idx % w) as i64 - self.radius[s] as i64;
            idx /= w;
        }
        z
    }

    /// `P(S_n = z)`; exactly zero outside the stored box.
    pub fn at(&self, z: &[i64]) -> f64 {
        assert_eq!(z.len(), self.dim(), "point dimension mismatch");
        self.index_of(z).map_or(0.0, |i| self.mass[i])
    }

    /// One more step of the walk.
    pub fn convolve_step(&self, law: &StepLaw, budget: usize) -> Result<LatticeDist, DistError> {
        assert_eq!(law.dim(), self.dim(), "law dimension mismatch");
        let d = self.dim();
        let radius: Vec<usize> = self.radius.iter().zip(law.ranges()).map(|(r, t)| r + t).collect();
        let needed = checked_box_len(&radius).unwrap_or(usize::MAX);
        if needed > budget {
            return Err(DistError::CapacityExceeded { needed, budget });
        }

        let old_r = &self.radius;
        let old_w: Vec<usize> = old_r.iter().map(|r| 2 * r + 1).collect();
        let mut old_stride = vec![1usize; d];
        for s in (0..d.saturating_sub(1)).rev() {
            old_stride[s] = old_stride[s + 1] * old_w[s + 1];
        }
        let zeta0 = law.zeta0();
        let half: Vec<Vec<f64>> = (0..d)
            .map(|s| law.axis_weights(s).iter().map(|w| w / 2.0).collect())
            .collect();
        let line = 2 * radius[d - 1] + 1;
        let new_w: Vec<usize> = radius.iter().map(|r| 2 * r + 1).collect();
        let old = &self.mass;

        let mut mass = vec![0.0; needed];
        mass.par_chunks_mut(line).enumerate().for_each(|(line_idx, out)| {
            // coordinates (relative to the old box) of the line prefix
            let mut c = vec![0i64; d];
            let mut rem = line_idx;
            for s in (0..d - 1).rev() {
                c[s] = (rem % new_w[s]) as i64 - (radius[s] - old_r[s]) as i64;
                rem /= new_w[s];
            }
            let get = |c: &[i64]| -> f64 {
                let mut idx = 0usize;
                for s in 0..d {
                    if c[s] < 0 || c[s] >= old_w[s] as i64 {
                        return 0.0;
                    }
                    idx += c[s] as usize * old_stride[s];
                }
                old[idx]
            };
            let shift_last = (radius[d - 1] - old_r[d - 1]) as i64;
            for (j, slot) in out.iter_mut().enumerate() {
                c[d - 1] = j as i64 - shift_last;
                let mut acc = zeta0 * get(&c);
                for s in 0..d {
                    let base = c[s];
                    for (i, &w) in half[s].iter().enumerate() {
                        if w == 0.0 {
                            continue;
                        }
                        let r = (i + 1) as i64;
                        c[s] = base - r;
                        let lo = get(&c);
                        c[s] = base + r;
                        let hi = get(&c);
                        acc += w * (lo + hi);
                    }
                    c[s] = base;
                }
                *slot = acc;
            }
        });

        let len = mass.len();
        for i in 0..len / 2 {
            let j = len - 1 - i;
            let v = (mass[i] + mass[j]) / 2.0;
            mass[i] = v;
            mass[j] = v;
        }
        Ok(LatticeDist {
            n: self.n + 1,
            radius,
            mass,
        })
    }

    /// Convolves `law` onto the delta `n` times.
    pub fn after_steps(law: &StepLaw, n: u64, budget: usize) -> Result<LatticeDist, DistError> {
        let final_radius: Vec<usize> = law.ranges().iter().map(|t| t * n as usize).collect();
        let needed = checked_box_len(&final_radius).unwrap_or(usize::MAX);
        if needed > budget {
            return Err(DistError::CapacityExceeded { needed, budget });
        }
        let mut dist = LatticeDist::delta(law);
        for _ in 0..n {
            dist = dist.convolve_step(law, budget)?;
        }
        Ok(dist)
    }

    /// CSV rows `z1,…,zd,probability` with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header: Vec<String> = (1..=self.dim()).map(|s| format!("z{s}")).collect();
        writeln!(out, "{},probability", header.join(","))?;
        for (i, p) in self.mass.iter().enumerate() {
            let z = self.point_at(i);
            let coords: Vec<String> = z.iter().map(i64::to_string).collect();
            writeln!(out, "{},{:.16e}", coords.join(","), p)?;
        }
        Ok(())
    }
}

/// Smallest panel count per axis for which the periodic rule is exact.
pub fn min_panels(law: &StepLaw, n: u64, z: &[i64]) -> usize {
    (0..law.dim())
        .map(|s| n as usize * law.range(s) + z[s].unsigned_abs() as usize)
        .max()
        .unwrap_or(0)
        + 1
}

/// Default panels per axis: `2(n·max t_s + ‖z‖_∞) + 1`.
pub fn default_panels(law: &StepLaw, n: u64, z: &[i64]) -> usize {
    let zmax = z.iter().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0);
    2 * (n as usize * law.max_range() + zmax) + 1
}

/// `P(S_n = z)` by the inversion formula
/// `(2π)^{−d} ∫ cos⟨φ,z⟩ ψ(φ)^n dφ`, evaluated with the periodic
/// trapezoid rule on `panels` points per axis. For bipartite laws a
/// parity mismatch returns exactly zero and a match integrates over half
/// the torus on the first axis, doubled.
pub fn cf_invert(law: &StepLaw, n: u64, z: &[i64], panels: Option<usize>) -> Result<f64, DistError> {
    assert_eq!(z.len(), law.dim(), "point dimension mismatch");
    let minimum = min_panels(law, n, z);
    let mut p = panels.unwrap_or_else(|| default_panels(law, n, z));
    if p < minimum {
        return Err(DistError::ResolutionTooLow { panels: p, minimum });
    }
    let d = law.dim();
    let class = law.class();
    if !class.parity_allows(n, z) {
        return Ok(0.0);
    }
    let half = class == WalkClass::Bipartite;
    if half && p % 2 == 1 {
        p += 1;
    }
    let step = 2.0 * PI / p as f64;
    let first_count = if half { p / 2 } else { p };
    let rest = p.pow(d as u32 - 1);

    let partial: Vec<f64> = (0..first_count)
        .into_par_iter()
        .map(|j0| {
            let mut phi = vec![0.0; d];
            phi[0] = j0 as f64 * step;
            let mut acc = 0.0;
            for k in 0..rest {
                let mut rem = k;
                for s in (1..d).rev() {
                    phi[s] = (rem % p) as f64 * step;
                    rem /= p;
                }
                let arg: f64 = phi.iter().zip(z).map(|(f, &zz)| f * zz as f64).sum();
                acc += arg.cos() * law.char_fn(&phi).powi(n as i32);
            }
            acc
        })
        .collect();
    let sum: f64 = partial.iter().sum();
    let scale = if half { 2.0 } else { 1.0 };
    Ok(scale * sum / (p as f64).powi(d as i32))
}

/// The inversion formula for every point of the box `Π_s [−n·t_s, n·t_s]`
/// at once, as a separable cosine transform of `ψ^n` sampled on the torus.
pub fn cf_invert_box(law: &StepLaw, n: u64) -> LatticeDist {
    let d = law.dim();
    let radius: Vec<usize> = law.ranges().iter().map(|t| t * n as usize).collect();
    let panels: Vec<usize> = radius.iter().map(|r| 4 * r + 1).collect();

    // ψ^n on the grid, row-major over `panels`
    let total: usize = panels.iter().product();
    let mut dims = panels.clone();
    let mut data: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut phi = vec![0.0; d];
            for s in (0..d).rev() {
                phi[s] = 2.0 * PI * (idx % panels[s]) as f64 / panels[s] as f64;
                idx /= panels[s];
            }
            law.char_fn(&phi).powi(n as i32)
        })
        .collect();

    for axis in 0..d {
        let p = panels[axis];
        let width = 2 * radius[axis] + 1;
        let table: Vec<f64> = (0..width)
            .flat_map(|zi| {
                let zv = zi as f64 - radius[axis] as f64;
                (0..p).map(move |j| (2.0 * PI * ((j as f64 * zv) % p as f64) / p as f64).cos())
            })
            .collect();
        let outer: usize = dims[..axis].iter().product();
        let inner: usize = dims[axis + 1..].iter().product();
        let mut next = vec![0.0; outer * width * inner];
        next.par_chunks_mut(width * inner).enumerate().for_each(|(o, out)| {
            let src = &data[o * p * inner..(o + 1) * p * inner];
            for zi in 0..width {
                let row = &table[zi * p..(zi + 1) * p];
                for k in 0..inner {
                    let mut acc = 0.0;
                    for (j, c) in row.iter().enumerate() {
                        acc += c * src[j * inner + k];
                    }
                    out[zi * inner + k] = acc / p as f64;
                }
            }
        });
        data = next;
        dims[axis] = width;
    }

    let mut dist = LatticeDist { n, radius, mass: data };
    if law.class() == WalkClass::Bipartite {
        for i in 0..dist.mass.len() {
            if !WalkClass::Bipartite.parity_allows(n, &dist.point_at(i)) {
                dist.mass[i] = 0.0;
            }
        }
    }
    dist
}
