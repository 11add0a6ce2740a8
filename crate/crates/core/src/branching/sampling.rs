//! Exact binomial and multinomial sampling for very large trial counts.
//!
//! Small means use sequential inversion. Everything else uses transformed
//! rejection with squeeze (Hörmann's BTRS). The acceptance test needs
//! `ln f(k) − ln f(mode)` accurately even when `n` is near `2^127`, so the
//! log-pmf is written in terms of the deviation `δ = k − np` (Loader's
//! saddle-point form) with `np` carried in double-double precision and
//! every lattice position kept as an exact integer.

use rand::Rng;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const INVERSION_MEAN: f64 = 10.0;

/// `n·p` as an unevaluated sum `hi + lo`.
#[derive(Clone, Copy, Debug)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    fn add_f64(self, x: f64) -> Self {
        let (s, e) = two_sum(self.hi, x);
        let (hi, lo) = two_sum(s, e + self.lo);
        DoubleDouble { hi, lo }
    }

    fn add(self, o: DoubleDouble) -> Self {
        self.add_f64(o.hi).add_f64(o.lo)
    }

    /// Exact integer `n` times `p`, to ~106 bits.
    fn product(n: u128, p: f64) -> Self {
        // n = a·2^106 + b·2^53 + c with each part exactly representable
        let mask = (1u128 << 53) - 1;
        let parts = [
            ((n >> 106) as f64) * 2f64.powi(106),
            (((n >> 53) & mask) as f64) * 2f64.powi(53),
            ((n & mask) as f64),
        ];
        let mut acc = DoubleDouble { hi: 0.0, lo: 0.0 };
        for part in parts {
            let (hi, lo) = two_prod(part, p);
            acc = acc.add(DoubleDouble { hi, lo });
        }
        acc
    }

    /// Splits into an exact integer floor and the fractional remainder.
    fn floor_split(self) -> (i128, f64) {
        let int_hi = self.hi.floor();
        let rest = (self.hi - int_hi) + self.lo;
        let int_rest = rest.floor();
        (int_hi as i128 + int_rest as i128, rest - int_rest)
    }
}

/// `ln(x!) − [(x+½)ln x − x + ½ln 2π]`, the Stirling remainder.
fn stirlerr(x: f64) -> f64 {
    if x < 16.0 {
        let k = x as u32;
        let ln_fact: f64 = (2..=k).map(|j| (j as f64).ln()).sum();
        return ln_fact - (x + 0.5) * x.ln() + x - LN_SQRT_2PI;
    }
    let x2 = x * x;
    (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0 - 1.0 / (1188.0 * x2)) / x2) / x2) / x2) / x
}

/// `(1+t)ln(1+t) − t`, accurate for small `|t|`.
fn phi(t: f64) -> f64 {
    if t.abs() < 0.1 {
        // Σ_{k≥2} (−1)^k t^k / (k(k−1))
        let mut term = t * t;
        let mut sum = 0.0;
        let mut k = 2.0;
        loop {
            let add = term / (k * (k - 1.0));
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() {
                break;
            }
            term *= -t;
            k += 1.0;
        }
        sum
    } else {
        (1.0 + t) * t.ln_1p() - t
    }
}

/// Binomial(n, p) with `0 < p ≤ ½` and `np ≥ 10`.
struct Btrs {
    n: u128,
    p: f64,
    /// `⌊np⌋` and `np − ⌊np⌋`
    base: i128,
    frac: f64,
    np: f64,
    nq: f64,
    ln_f_mode: f64,
    a: f64,
    b: f64,
    alpha: f64,
    v_r: f64,
}

impl Btrs {
    fn new(n: u128, p: f64) -> Self {
        let npdd = DoubleDouble::product(n, p);
        let (base, frac) = npdd.floor_split();
        let np = npdd.hi;
        let nq = n as f64 * (1.0 - p);
        let spq = (np * (1.0 - p)).sqrt();
        let b = 1.15 + 2.53 * spq;
        let a = -0.0873 + 0.0248 * b + 0.01 * p;
        let alpha = (2.83 + 5.1 / b) * spq;
        let v_r = 0.92 - 4.2 / b;
        // mode = ⌊(n+1)p⌋ = ⌊np + p⌋
        let mode = base + (frac + p).floor() as i128;
        let mut s = Btrs {
            n,
            p,
            base,
            frac,
            np,
            nq,
            ln_f_mode: 0.0,
            a,
            b,
            alpha,
            v_r,
        };
        s.ln_f_mode = s.ln_pmf(mode);
        s
    }

    /// `k − np` for an exact integer `k`.
    fn deviation(&self, k: i128) -> f64 {
        (k - self.base) as f64 - self.frac
    }

    /// `ln P(X = k)` up to the additive `stirlerr(n)` shared by all `k`.
    fn ln_pmf(&self, k: i128) -> f64 {
        let n = self.n as i128;
        if k == 0 {
            return self.n as f64 * (-self.p).ln_1p() - stirlerr(self.n as f64);
        }
        if k == n {
            return self.n as f64 * self.p.ln() - stirlerr(self.n as f64);
        }
        let delta = self.deviation(k);
        let kf = k as f64;
        let rest = (n - k) as f64;
        -stirlerr(kf)
            - stirlerr(rest)
            - self.np * phi(delta / self.np)
            - self.nq * phi(-delta / self.nq)
            - 0.5 * (kf.ln() + rest.ln() - (self.n as f64).ln())
            - LN_SQRT_2PI
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u128 {
        let n = self.n as i128;
        loop {
            let u = rng.random::<f64>() - 0.5;
            let v: f64 = rng.random();
            let us = 0.5 - u.abs();
            let offset = ((2.0 * self.a / us + self.b) * u + self.frac + 0.5).floor();
            let k = self.base + offset as i128;
            if k < 0 || k > n {
                continue;
            }
            if us >= 0.07 && v <= self.v_r {
                return k as u128;
            }
            let lhs = (v * self.alpha / (self.a / (us * us) + self.b)).ln();
            if lhs <= self.ln_pmf(k) - self.ln_f_mode {
                return k as u128;
            }
        }
    }
}

/// Sequential inversion from zero; used when `np < 10`.
fn inversion<R: Rng + ?Sized>(n: u128, p: f64, rng: &mut R) -> u128 {
    let q = 1.0 - p;
    let ratio = p / q;
    let nf = n as f64;
    let f0 = (nf * (-p).ln_1p()).exp();
    'outer: loop {
        let mut u: f64 = rng.random();
        let mut f = f0;
        let mut k: u128 = 0;
        loop {
            if u < f {
                return k;
            }
            u -= f;
            if k == n {
                continue 'outer;
            }
            f *= (nf - k as f64) / (k as f64 + 1.0) * ratio;
            k += 1;
            if k > 110 + (20.0 * nf * p) as u128 {
                // rounding left u above the residual mass; redraw
                continue 'outer;
            }
        }
    }
}

/// One draw from Binomial(`trials`, `p`).
pub fn binomial_exact<R: Rng + ?Sized>(trials: u128, p: f64, rng: &mut R) -> u128 {
    assert!((0.0..=1.0).contains(&p), "probability {p} outside [0, 1]");
    if trials == 0 || p == 0.0 {
        return 0;
    }
    if p == 1.0 {
        return trials;
    }
    let (p_eff, flipped) = if p > 0.5 { (1.0 - p, true) } else { (p, false) };
    let k = if trials as f64 * p_eff < INVERSION_MEAN {
        inversion(trials, p_eff, rng)
    } else {
        Btrs::new(trials, p_eff).sample(rng)
    };
    if flipped {
        trials - k
    } else {
        k
    }
}

/// Splits `trials` over `probs` by sequential binomial draws in the given
/// order; `probs` must sum to one.
pub fn multinomial_exact<R: Rng + ?Sized>(trials: u128, probs: &[f64], rng: &mut R) -> Vec<u128> {
    let mut suffix = vec![0.0; probs.len() + 1];
    for i in (0..probs.len()).rev() {
        suffix[i] = suffix[i + 1] + probs[i];
    }
    let mut out = vec![0u128; probs.len()];
    let mut remaining = trials;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i + 1 == probs.len() || suffix[i + 1] <= 0.0 {
            out[i] = remaining;
            break;
        }
        let cond = (p / suffix[i]).clamp(0.0, 1.0);
        let x = binomial_exact(remaining, cond, rng);
        out[i] = x;
        remaining -= x;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn degenerate_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(binomial_exact(1_000_000, 0.0, &mut rng), 0);
        assert_eq!(binomial_exact(1_000_000, 1.0, &mut rng), 1_000_000);
        assert_eq!(binomial_exact(0, 0.4, &mut rng), 0);
    }

    #[test]
    fn double_double_product_is_tight() {
        let n: u128 = (1 << 100) + 12345;
        let dd = DoubleDouble::product(n, 0.5);
        let (base, frac) = dd.floor_split();
        assert_eq!(base, (n / 2) as i128);
        assert_eq!(frac, 0.5);
        let dd = DoubleDouble::product(7, 0.1);
        let (base, frac) = dd.floor_split();
        assert_eq!(base, 0);
        assert!((frac - 0.7).abs() < 1e-15);
    }

    #[test]
    fn stirling_remainder_is_continuous_at_switch() {
        let below = stirlerr(15.0);
        let exact_16 = (2..=16).map(|j| (j as f64).ln()).sum::<f64>() - 16.5 * 16f64.ln() + 16.0 - LN_SQRT_2PI;
        assert!((stirlerr(16.0) - exact_16).abs() < 1e-14);
        assert!(below > stirlerr(16.0));
    }

    #[test]
    fn log_pmf_matches_direct_sum_for_moderate_n() {
        let s = Btrs::new(200, 0.3);
        let ln_choose = |n: u32, k: u32| -> f64 {
            (1..=n).map(|j| (j as f64).ln()).sum::<f64>()
                - (1..=k).map(|j| (j as f64).ln()).sum::<f64>()
                - (1..=n - k).map(|j| (j as f64).ln()).sum::<f64>()
        };
        let direct = |k: u32| ln_choose(200, k) + k as f64 * 0.3f64.ln() + (200 - k) as f64 * 0.7f64.ln();
        for k in [0u32, 1, 30, 60, 61, 90, 199, 200] {
            let ours = s.ln_pmf(k as i128) - s.ln_f_mode;
            let theirs = direct(k) - direct(60);
            assert!((ours - theirs).abs() < 1e-9, "k={k}: {ours} vs {theirs}");
        }
    }

    #[test]
    fn multinomial_conserves_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let probs = [0.25, 0.25, 0.1, 0.4];
        for trials in [0u128, 1, 17, 1 << 40, 1 << 100] {
            let split = multinomial_exact(trials, &probs, &mut rng);
            assert_eq!(split.iter().sum::<u128>(), trials);
        }
    }
}
