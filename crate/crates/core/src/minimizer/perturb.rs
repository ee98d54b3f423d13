//! First-order change of F under a mass transfer between two equal-valued
//! sections, checked against exact recomputation.
//!
//! A transfer of mass Δ moves Δ out of section `from` and into section `to`
//! of each of `λ^{ABC}`, `λ^{AB}` and `λ^{BC}`, spread evenly over the
//! entries of each section. `λ^B` is left alone. With section values
//! `x_from, x_to` the predicted change is
//! `Δ · ln(x_to^{ABC} · x_from^{AB} · x_from^{BC} / (x_from^{ABC} · x_to^{AB} · x_to^{BC}))`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::conditions::SpectraTuple;
use crate::error::{Error, Result};
use crate::spectra::{entropy_of, Spectrum, SpectrumLabel};
use crate::stategen::{open_unit, rng_from_seed};
use crate::tensor::TripartiteDims;

/// Δ values, each half the previous.
pub const DEFAULT_LADDER: [f64; 4] = [1e-4, 5e-5, 2.5e-5, 1.25e-5];
/// Accepted range for `error(Δ) / error(Δ/2)`.
pub const DECAY_RATIO_RANGE: (f64, f64) = (3.5, 4.5);

/// Relative spread allowed inside a section.
const SECTION_TOL: f64 = 1e-12;

/// Contiguous run of entries `start..start + len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub start: usize,
    pub len: usize,
}

impl Section {
    fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MassTransfer {
    pub abc: [Section; 2],
    pub ab: [Section; 2],
    pub bc: [Section; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationOutcome {
    pub delta: f64,
    pub predicted: f64,
    pub direct: f64,
}

impl PerturbationOutcome {
    pub fn error(&self) -> f64 {
        (self.predicted - self.direct).abs()
    }
}

fn section_value(v: &[f64], s: Section, name: &str) -> Result<f64> {
    if s.len == 0 || s.start + s.len > v.len() {
        return Err(Error::InvalidArgument(format!(
            "section {}..{} out of range for lambda_{name} of length {}",
            s.start,
            s.start + s.len,
            v.len()
        )));
    }
    let part = &v[s.range()];
    let value = part[0];
    if part.iter().any(|&x| (x - value).abs() > SECTION_TOL * value.abs().max(f64::MIN_POSITIVE)) {
        return Err(Error::InvalidArgument(format!("section of lambda_{name} is not equal-valued")));
    }
    if value <= 0.0 {
        return Err(Error::InvalidArgument(format!("section of lambda_{name} is not positive")));
    }
    Ok(value)
}

fn transfer(v: &[f64], [from, to]: [Section; 2], delta: f64, name: &str) -> Result<Vec<f64>> {
    if from.range().any(|i| to.range().contains(&i)) {
        return Err(Error::InvalidArgument(format!("overlapping sections in lambda_{name}")));
    }
    let mut out = v.to_vec();
    for i in from.range() {
        out[i] -= delta / from.len as f64;
    }
    for i in to.range() {
        out[i] += delta / to.len as f64;
    }
    if out.iter().any(|&x| x <= 0.0) || out.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument(format!(
            "transfer of {delta} breaks positivity or ordering of lambda_{name}"
        )));
    }
    Ok(out)
}

/// Predicted and exactly recomputed change of F for a transfer of `delta`.
pub fn perturbation_delta(t: &SpectraTuple, tr: &MassTransfer, delta: f64) -> Result<PerturbationOutcome> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("transfer mass must be finite and >= 0, got {delta}")));
    }
    let parts = [
        (t.lambda_abc.values(), tr.abc, "ABC"),
        (t.lambda_ab.values(), tr.ab, "AB"),
        (t.lambda_bc.values(), tr.bc, "BC"),
    ];
    let mut vals = [[0.0; 2]; 3];
    for (k, (v, secs, name)) in parts.iter().enumerate() {
        vals[k] = [section_value(v, secs[0], name)?, section_value(v, secs[1], name)?];
    }
    let [[abc_from, abc_to], [ab_from, ab_to], [bc_from, bc_to]] = vals;
    let predicted = delta * ((abc_to * ab_from * bc_from) / (abc_from * ab_to * bc_to)).ln();

    let new_abc = transfer(parts[0].0, tr.abc, delta, "ABC")?;
    let new_ab = transfer(parts[1].0, tr.ab, delta, "AB")?;
    let new_bc = transfer(parts[2].0, tr.bc, delta, "BC")?;
    // lambda_B is unchanged, so its entropy cancels
    let direct = (entropy_of(&new_ab) - entropy_of(parts[1].0)) + (entropy_of(&new_bc) - entropy_of(parts[2].0))
        - (entropy_of(&new_abc) - entropy_of(parts[0].0));
    Ok(PerturbationOutcome {
        delta,
        predicted,
        direct,
    })
}

/// Δ² coefficient of the error, `−½ Σ ±(1/(len·x))` over the six sections.
fn second_order_coefficient(t: &SpectraTuple, tr: &MassTransfer) -> f64 {
    let q = |v: &[f64], secs: [Section; 2]| {
        secs.iter().map(|s| 1.0 / (s.len as f64 * v[s.start])).sum::<f64>()
    };
    -0.5 * (q(t.lambda_ab.values(), tr.ab) + q(t.lambda_bc.values(), tr.bc) - q(t.lambda_abc.values(), tr.abc))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub outcome: PerturbationOutcome,
    /// `error` of the previous rung over this one; absent on the first rung.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub rows: Vec<LadderRow>,
    pub holds: bool,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Evaluates the transfer at every Δ in `ladder` and checks the error decay ratios.
pub fn richardson_ladder(t: &SpectraTuple, tr: &MassTransfer, ladder: &[f64]) -> Result<LadderReport> {
    if ladder.len() < 2 {
        return Err(Error::InvalidArgument("ladder needs at least two values".into()));
    }
    let mut rows: Vec<LadderRow> = Vec::with_capacity(ladder.len());
    for &delta in ladder {
        let outcome = perturbation_delta(t, tr, delta)?;
        let ratio = rows.last().map(|prev| prev.outcome.error() / outcome.error());
        rows.push(LadderRow { outcome, ratio });
    }
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = DECAY_RATIO_RANGE;
    Ok(LadderReport {
        holds: ratios.iter().all(|r| (lo..=hi).contains(r)),
        rows,
        min_ratio,
        max_ratio,
    })
}

/// Ascending vector made of 2 to 4 equal-valued groups with well separated
/// levels; returns the vector and the group sections.
fn grouped_vector<R: Rng>(len: usize, rng: &mut R) -> (Vec<f64>, Vec<Section>) {
    let groups = rng.gen_range(2..=len.min(4));
    // random composition of len into `groups` positive parts
    let mut cuts: Vec<usize> = rand::seq::index::sample(rng, len - 1, groups - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    let mut sections = Vec::with_capacity(groups);
    let mut start = 0;
    for end in cuts.into_iter().chain(std::iter::once(len)) {
        sections.push(Section { start, len: end - start });
        start = end;
    }
    let mut level = 1.0 + open_unit(rng);
    let mut values = Vec::with_capacity(len);
    for s in &sections {
        values.extend(std::iter::repeat(level).take(s.len));
        level *= 1.5 + open_unit(rng);
    }
    let total: f64 = values.iter().sum();
    values.iter_mut().for_each(|v| *v /= total);
    (values, sections)
}

fn pick_pair<R: Rng>(sections: &[Section], rng: &mut R) -> [Section; 2] {
    let picked = rand::seq::index::sample(rng, sections.len(), 2);
    [sections[picked.index(0)], sections[picked.index(1)]]
}

/// A positive ordered tuple with equal-valued sections and a transfer between
/// two sections of each vector, deterministic per seed. Draws whose Δ²
/// error coefficient nearly cancels are redrawn so the decay ratio is well
/// defined.
pub fn random_admissible_transfer(dims: TripartiteDims, seed: u64) -> Result<(SpectraTuple, MassTransfer)> {
    let (l, m, n) = (dims.l(), dims.m(), dims.n());
    if l * m < 2 || m * n < 2 {
        return Err(Error::InvalidArgument(format!(
            "dims {dims} leave lambda_AB or lambda_BC with a single entry"
        )));
    }
    let mut rng = rng_from_seed(seed);
    loop {
        let (abc, abc_secs) = grouped_vector(l * m * n, &mut rng);
        let (ab, ab_secs) = grouped_vector(l * m, &mut rng);
        let (bc, bc_secs) = grouped_vector(m * n, &mut rng);
        let tr = MassTransfer {
            abc: pick_pair(&abc_secs, &mut rng),
            ab: pick_pair(&ab_secs, &mut rng),
            bc: pick_pair(&bc_secs, &mut rng),
        };
        let t = SpectraTuple::new(
            dims,
            Spectrum::new(abc, SpectrumLabel::ABC)?,
            Spectrum::new(ab, SpectrumLabel::AB)?,
            Spectrum::new(bc, SpectrumLabel::BC)?,
            Spectrum::uniform(m, SpectrumLabel::B),
        )?;
        let c = second_order_coefficient(&t, &tr).abs();
        let scale = {
            let q = |v: &[f64], secs: [Section; 2]| {
                secs.iter().map(|s| 1.0 / (s.len as f64 * v[s.start])).sum::<f64>()
            };
            0.5 * (q(t.lambda_ab.values(), tr.ab) + q(t.lambda_bc.values(), tr.bc) + q(t.lambda_abc.values(), tr.abc))
        };
        if c >= 0.1 * scale {
            return Ok((t, tr));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn d222() -> TripartiteDims {
        TripartiteDims::new(2, 2, 2).unwrap()
    }

    fn sec(start: usize, len: usize) -> Section {
        Section { start, len }
    }

    #[test]
    fn zero_mass_gives_zero_change() {
        let (t, tr) = random_admissible_transfer(d222(), 1).unwrap();
        let o = perturbation_delta(&t, &tr, 0.0).unwrap();
        assert_eq!(o.predicted, 0.0);
        assert_abs_diff_eq!(o.direct, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn equal_sections_predict_no_change() {
        let t = SpectraTuple::uniform(d222());
        let tr = MassTransfer {
            abc: [sec(0, 2), sec(4, 2)],
            ab: [sec(0, 1), sec(2, 1)],
            bc: [sec(1, 1), sec(3, 1)],
        };
        // a transfer out of a uniform block breaks ordering
        assert!(perturbation_delta(&t, &tr, 1e-6).is_err());
        let tr_up = MassTransfer {
            abc: [sec(0, 1), sec(7, 1)],
            ab: [sec(0, 1), sec(3, 1)],
            bc: [sec(0, 1), sec(3, 1)],
        };
        let o = perturbation_delta(&t, &tr_up, 1e-6).unwrap();
        assert_abs_diff_eq!(o.predicted, 0.0, epsilon = 1e-18);
    }

    #[test]
    fn rejects_unequal_or_bad_sections() {
        let (t, mut tr) = random_admissible_transfer(d222(), 2).unwrap();
        tr.abc[0] = sec(0, 8);
        assert!(perturbation_delta(&t, &tr, 1e-6).is_err());
        let (t, mut tr) = random_admissible_transfer(d222(), 2).unwrap();
        tr.ab[1] = sec(3, 2);
        assert!(perturbation_delta(&t, &tr, 1e-6).is_err());
        let (t, tr) = random_admissible_transfer(d222(), 2).unwrap();
        assert!(perturbation_delta(&t, &tr, 0.5).is_err());
        assert!(perturbation_delta(&t, &tr, -1e-6).is_err());
    }

    #[test]
    fn first_order_agreement_and_quadratic_decay() {
        for seed in 0..20 {
            let (t, tr) = random_admissible_transfer(d222(), seed).unwrap();
            let o = perturbation_delta(&t, &tr, 1e-6).unwrap();
            assert!(o.error() <= 1e-9, "seed {seed}: {o:?}");
            let ladder = richardson_ladder(&t, &tr, &DEFAULT_LADDER).unwrap();
            assert!(ladder.holds, "seed {seed}: {ladder:?}");
        }
    }

    #[test]
    fn generated_configs_are_deterministic() {
        let dims = TripartiteDims::new(2, 3, 2).unwrap();
        assert_eq!(
            random_admissible_transfer(dims, 9).unwrap(),
            random_admissible_transfer(dims, 9).unwrap()
        );
    }
}
