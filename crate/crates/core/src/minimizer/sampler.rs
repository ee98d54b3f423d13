//! Rejection sampler for feasible tuples on a fixed support pattern.
//!
//! Vectors are drawn one at a time as sorted normalized exponentials with the
//! pattern's zero prefix: first `λ^{ABC}`, then `λ^{AB}` until the AB
//! relation holds, then `λ^{BC}`, then `λ^B` until both B relations hold. A
//! stage that exhausts its local budget discards everything and restarts.

use rand::Rng;

use super::{FeasibleRegionSpec, SupportPattern};
use crate::conditions::SpectraTuple;
use crate::error::{Error, Result};
use crate::spectra::{block_sums, Spectrum, SpectrumLabel};
use crate::stategen::{open_unit, rng_from_seed};

/// Total vector draws allowed per sample.
pub const DEFAULT_DRAW_BUDGET: usize = 100_000;
const STAGE_BUDGET: usize = 2_000;

/// Ascending prefix sums of `x` dominate those of `y` (no tolerance).
fn dominated_prefixes(x: &[f64], y: &[f64]) -> bool {
    let mut sx = 0.0;
    let mut sy = 0.0;
    for (a, b) in x.iter().zip(y).take(x.len() - 1) {
        sx += a;
        sy += b;
        if sx < sy {
            return false;
        }
    }
    true
}

fn draw_ascending<R: Rng>(len: usize, zeros: usize, floor: f64, label: SpectrumLabel, rng: &mut R) -> Option<Spectrum> {
    let mut support: Vec<f64> = (zeros..len).map(|_| -open_unit(rng).ln()).collect();
    let total: f64 = support.iter().sum();
    support.iter_mut().for_each(|x| *x /= total);
    support.sort_by(f64::total_cmp);
    if support[0] < floor {
        return None;
    }
    let mut values = vec![0.0; zeros];
    values.extend(support);
    Spectrum::new(values, label).ok()
}

pub(crate) struct Sample {
    pub tuple: SpectraTuple,
    pub draws: usize,
}

/// Why a pattern can never be filled with positive support entries, if so.
pub fn structural_obstruction(spec: &FeasibleRegionSpec) -> Option<String> {
    let d = spec.dims;
    let SupportPattern { abc, ab, bc, b } = spec.pattern;
    let needs = [
        (abc >= d.n() * ab, format!("{ab} zeros in lambda_AB need at least N*{ab} = {} zeros in lambda_ABC, pattern has {abc}", d.n() * ab)),
        (abc >= d.l() * bc, format!("{bc} zeros in lambda_BC need at least L*{bc} = {} zeros in lambda_ABC, pattern has {abc}", d.l() * bc)),
        (ab >= d.l() * b, format!("{b} zeros in lambda_B need at least L*{b} = {} zeros in lambda_AB, pattern has {ab}", d.l() * b)),
        (bc >= d.n() * b, format!("{b} zeros in lambda_B need at least N*{b} = {} zeros in lambda_BC, pattern has {bc}", d.n() * b)),
    ];
    needs.into_iter().find(|(ok, _)| !ok).map(|(_, why)| why)
}

pub(crate) fn sample_with_budget(spec: &FeasibleRegionSpec, seed: u64, budget: usize) -> Result<Sample> {
    let fail = |draws: usize, reason: String| Error::SamplerFailure {
        pattern: spec.pattern,
        draws,
        reason,
    };
    if let Some(reason) = structural_obstruction(spec) {
        return Err(fail(0, reason));
    }
    let d = spec.dims;
    let (l, m, n) = (d.l(), d.m(), d.n());
    let p = spec.pattern;
    let floor = spec.support_floor;
    let mut rng = rng_from_seed(seed);
    let mut draws = 0usize;

    'outer: while draws < budget {
        draws += 1;
        let Some(abc) = draw_ascending(l * m * n, p.abc, floor, SpectrumLabel::ABC, &mut rng) else {
            continue;
        };
        let abc_by_n = block_sums(abc.values(), n)?;
        let abc_by_l = block_sums(abc.values(), l)?;

        let mut stage = |len: usize, zeros: usize, label: SpectrumLabel, draws: &mut usize, accept: &dyn Fn(&[f64]) -> bool| {
            for _ in 0..STAGE_BUDGET {
                if *draws >= budget {
                    return None;
                }
                *draws += 1;
                if let Some(s) = draw_ascending(len, zeros, floor, label, &mut rng) {
                    if accept(s.values()) {
                        return Some(s);
                    }
                }
            }
            None
        };

        let Some(ab) = stage(l * m, p.ab, SpectrumLabel::AB, &mut draws, &|x| dominated_prefixes(x, &abc_by_n)) else {
            continue 'outer;
        };
        let Some(bc) = stage(m * n, p.bc, SpectrumLabel::BC, &mut draws, &|x| dominated_prefixes(x, &abc_by_l)) else {
            continue 'outer;
        };
        let ab_by_l = block_sums(ab.values(), l)?;
        let bc_by_n = block_sums(bc.values(), n)?;
        let Some(b) = stage(m, p.b, SpectrumLabel::B, &mut draws, &|x| {
            dominated_prefixes(x, &ab_by_l) && dominated_prefixes(x, &bc_by_n)
        }) else {
            continue 'outer;
        };
        return Ok(Sample {
            tuple: SpectraTuple::new(d, abc, ab, bc, b)?,
            draws,
        });
    }
    Err(fail(draws, "draw budget exhausted".into()))
}

/// A tuple meeting all four conditions with nonnegative margins; deterministic per seed.
pub fn sample_feasible(spec: &FeasibleRegionSpec, seed: u64) -> Result<SpectraTuple> {
    sample_with_budget(spec, seed, DEFAULT_DRAW_BUDGET).map(|s| s.tuple)
}
