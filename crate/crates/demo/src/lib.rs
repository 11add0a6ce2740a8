//! Browser bindings for a handful of one-dimensional brw-llt computations.
//!
//! Every export returns a flat `Float64Array` with a fixed stride so the page
//! can plot it without any JSON handling.

use brw_llt::branching::{simulate, CountWidth, OffspringLaw, ReplicateSeed};
use brw_llt::exact_dist::{LatticeDist, DEFAULT_ELEMENT_BUDGET};
use brw_llt::llt::{arbitrate_sign, fit_correction_coefficients};
use brw_llt::martingales::{readout, theorem_prediction, LimitEstimates};
use brw_llt::{rw_expansion, ExpansionConstants, RawStepLaw, StepLaw};
use wasm_bindgen::prelude::wasm_bindgen;

pub const PROFILE_STRIDE: usize = 4;
pub const COEFF_STRIDE: usize = 4;
pub const BRW_STRIDE: usize = 4;

const MAX_STEPS: u32 = 2000;
const MAX_GENERATIONS: u32 = 100;

fn lazy_law(sigma: f64) -> Result<StepLaw, String> {
    StepLaw::validate(&RawStepLaw::lazy_simple(sigma, 1)).map_err(|e| e.to_string())
}

fn window(n: u64) -> i64 {
    ((4.0 * (n as f64).sqrt()).ceil() as i64).min(n as i64)
}

#[wasm_bindgen]
pub fn version() -> String {
    brw_llt::VERSION.to_string()
}

/// Rows `z, exact, expansion, gaussian` for the lazy walk after `n` steps.
#[wasm_bindgen]
pub fn llt_profile(sigma: f64, n: u32) -> Result<Vec<f64>, String> {
    if n == 0 || n > MAX_STEPS {
        return Err(format!("n must be in 1..={MAX_STEPS}"));
    }
    let law = lazy_law(sigma)?;
    let m = law.moments();
    let c = ExpansionConstants::for_law(&law);
    let n = n as u64;
    let dist = LatticeDist::after_steps(&law, n, DEFAULT_ELEMENT_BUDGET).map_err(|e| e.to_string())?;
    let r = window(n);
    let mut out = Vec::with_capacity(PROFILE_STRIDE * (2 * r as usize + 1));
    for z in -r..=r {
        let gaussian = if c.class.parity_allows(n, &[z]) {
            c.leading(n) * (-0.5 * m.quad_form(&[z]) / n as f64).exp()
        } else {
            0.0
        };
        out.extend([z as f64, dist.at(&[z]), rw_expansion(&c, &m, n, &[z]), gaussian]);
    }
    Ok(out)
}

/// Rows `n, c2, theorem candidate, corollary candidate` for step counts
/// doubling from 8 up to `n_max`, shifted onto the parity of `z`.
#[wasm_bindgen]
pub fn coefficient_sequence(sigma: f64, z: i32, n_max: u32) -> Result<Vec<f64>, String> {
    if n_max > MAX_STEPS {
        return Err(format!("n_max must be at most {MAX_STEPS}"));
    }
    let law = lazy_law(sigma)?;
    let z = [z as i64];
    let class = law.class();
    let mut ns = Vec::new();
    let mut n = 8u64;
    while n <= n_max as u64 {
        let k = if class.parity_allows(n, &z) { n } else { n + 1 };
        if k <= n_max as u64 {
            ns.push(k);
        }
        n *= 2;
    }
    let fit = fit_correction_coefficients(&law, &z, &ns, DEFAULT_ELEMENT_BUDGET).map_err(|e| e.to_string())?;
    let arb = arbitrate_sign(&fit, &ExpansionConstants::for_law(&law), &law.moments());
    Ok(fit
        .sequence
        .iter()
        .flat_map(|p| [p.n as f64, p.c2, arb.theorem_candidate, arb.corollary_candidate])
        .collect())
}

/// Rows `z, m^{-n}Z_n(z), W_n·gaussian, second-order prediction` for one
/// branching walk run to `generations`, with limits read off that generation.
#[wasm_bindgen]
pub fn brw_profile(sigma: f64, offspring: Vec<f64>, generations: u32, seed: u32) -> Result<Vec<f64>, String> {
    if generations == 0 || generations > MAX_GENERATIONS {
        return Err(format!("generations must be in 1..={MAX_GENERATIONS}"));
    }
    let law = lazy_law(sigma)?;
    let off = OffspringLaw::validate(&offspring).map_err(|e| e.to_string())?;
    let n = generations as u64;
    let snap = simulate(
        &off,
        &law,
        n,
        ReplicateSeed::new(seed as u64, 0),
        &[n],
        CountWidth::W128,
    )
    .map_err(|e| e.to_string())?
    .pop()
    .ok_or("no snapshot")?;
    let mom = law.moments();
    let c = ExpansionConstants::for_law(&law);
    let mean = off.mean();
    let est = LimitEstimates::from_readout(&readout(&snap, mean, &mom, &[0]));
    let scale = mean.powi(-(n as i32));
    let r = window(n);
    let mut out = Vec::with_capacity(BRW_STRIDE * (2 * r as usize + 1));
    for z in -r..=r {
        let gaussian = if c.class.parity_allows(n, &[z]) {
            est.w_inf * c.leading(n) * (-0.5 * mom.quad_form(&[z]) / n as f64).exp()
        } else {
            0.0
        };
        out.extend([
            z as f64,
            snap.count(&[z]) as f64 * scale,
            gaussian,
            theorem_prediction(&est, &c, &mom, n, &[z]),
        ]);
    }
    Ok(out)
}
