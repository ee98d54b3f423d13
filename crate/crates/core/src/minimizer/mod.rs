//! Multi-start projected descent on the entropy functional
//! `F = S(λ^{AB}) + S(λ^{BC}) − S(λ^B) − S(λ^{ABC})` over abstract spectra
//! tuples, one support pattern at a time, plus a random-search oracle.

mod perturb;
mod polytope;
mod sampler;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{tuple_gap, zero_pattern_check, SpectraTuple, ZeroCounts};
use crate::error::{Error, Result};
use crate::spectra::{Spectrum, SpectrumLabel};
use crate::stategen::derive_seed;
use crate::tensor::TripartiteDims;

pub use perturb::{
    perturbation_delta, random_admissible_transfer, richardson_ladder, LadderReport, LadderRow,
    MassTransfer, PerturbationOutcome, Section, DEFAULT_LADDER, DECAY_RATIO_RANGE,
};
pub use polytope::{ConstraintResiduals, Family};
pub use sampler::{sample_feasible, structural_obstruction, DEFAULT_DRAW_BUDGET};

pub const DEFAULT_RESTARTS: usize = 32;
pub const DEFAULT_ORACLE_SAMPLES: usize = 100_000;
/// Smallest value a support entry may take.
pub const DEFAULT_SUPPORT_FLOOR: f64 = 1e-8;
/// Residual above which a result does not count as feasible.
pub const FEASIBILITY_TOL: f64 = 1e-6;

/// Number of exact zeros at the front of each vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SupportPattern {
    pub abc: usize,
    pub ab: usize,
    pub bc: usize,
    pub b: usize,
}

impl SupportPattern {
    pub const FULL: SupportPattern = SupportPattern {
        abc: 0,
        ab: 0,
        bc: 0,
        b: 0,
    };

    pub fn zero_counts(&self) -> ZeroCounts {
        ZeroCounts {
            abc: self.abc,
            ab: self.ab,
            bc: self.bc,
            b: self.b,
        }
    }

    pub fn is_full(&self) -> bool {
        *self == Self::FULL
    }
}

impl fmt::Display for SupportPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "abc={},ab={},bc={},b={}", self.abc, self.ab, self.bc, self.b)
    }
}

/// Parses `full` or `abc=4,ab=2,bc=2,b=1` (omitted keys are zero).
impl FromStr for SupportPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("full") {
            return Ok(Self::FULL);
        }
        let mut p = Self::FULL;
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("expected key=value in pattern, got '{part}'")))?;
            let value: usize = value
                .trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad zero count '{value}'")))?;
            match key.trim().to_ascii_lowercase().as_str() {
                "abc" => p.abc = value,
                "ab" => p.ab = value,
                "bc" => p.bc = value,
                "b" => p.b = value,
                other => return Err(Error::InvalidArgument(format!("unknown vector '{other}' in pattern"))),
            }
        }
        Ok(p)
    }
}

/// Domain of one minimization: dims, a support pattern obeying the
/// zero-count constraint, the majorization tolerance, and the support floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibleRegionSpec {
    pub dims: TripartiteDims,
    pub pattern: SupportPattern,
    pub tolerance: f64,
    pub support_floor: f64,
}

impl FeasibleRegionSpec {
    pub fn new(dims: TripartiteDims, pattern: SupportPattern) -> Result<Self> {
        Self::with_options(dims, pattern, crate::spectra::MAJORIZATION_TOL, DEFAULT_SUPPORT_FLOOR)
    }

    pub fn with_options(dims: TripartiteDims, pattern: SupportPattern, tolerance: f64, support_floor: f64) -> Result<Self> {
        let spec = FeasibleRegionSpec {
            dims,
            pattern,
            tolerance,
            support_floor,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims;
        let p = self.pattern;
        let lens = [
            ("abc", p.abc, d.total()),
            ("ab", p.ab, d.l() * d.m()),
            ("bc", p.bc, d.m() * d.n()),
            ("b", p.b, d.m()),
        ];
        for (name, zeros, len) in lens {
            if zeros >= len {
                return Err(Error::InvalidArgument(format!(
                    "{zeros} zeros leave lambda_{name} (length {len}) without support"
                )));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        let max_support = lens.iter().map(|&(_, z, len)| len - z).max().unwrap_or(1);
        if !(self.support_floor > crate::spectra::DEFAULT_RANK_THRESHOLD)
            || self.support_floor * max_support as f64 >= 1.0
        {
            return Err(Error::InvalidArgument(format!(
                "support floor {} must exceed the rank threshold and fit the support",
                self.support_floor
            )));
        }
        let c4 = zero_pattern_check(d, p.zero_counts());
        if !c4.holds {
            let clause = if c4.clause_ab.holds { &c4.clause_bc } else { &c4.clause_ab };
            return Err(Error::InvalidArgument(format!(
                "pattern {p} breaks the zero-count constraint: lambda_B needs at least {} zeros",
                clause.required
            )));
        }
        Ok(())
    }

    /// The all-uniform-on-support tuple; feasible only for some patterns.
    pub fn uniform_tuple(&self) -> Result<SpectraTuple> {
        let d = self.dims;
        let p = self.pattern;
        SpectraTuple::new(
            d,
            Spectrum::uniform_on_support(d.total(), p.abc, SpectrumLabel::ABC)?,
            Spectrum::uniform_on_support(d.l() * d.m(), p.ab, SpectrumLabel::AB)?,
            Spectrum::uniform_on_support(d.m() * d.n(), p.bc, SpectrumLabel::BC)?,
            Spectrum::uniform_on_support(d.m(), p.b, SpectrumLabel::B)?,
        )
    }
}

/// Every pattern on `dims` that passes validation and has no structural obstruction.
pub fn enumerate_patterns(dims: TripartiteDims) -> Vec<SupportPattern> {
    let mut out = Vec::new();
    for abc in 0..dims.total() {
        for ab in 0..dims.l() * dims.m() {
            for bc in 0..dims.m() * dims.n() {
                for b in 0..dims.m() {
                    let pattern = SupportPattern { abc, ab, bc, b };
                    if let Ok(spec) = FeasibleRegionSpec::new(dims, pattern) {
                        if structural_obstruction(&spec).is_none() {
                            out.push(pattern);
                        }
                    }
                }
            }
        }
    }
    out
}

/// `S(λ^{AB}) + S(λ^{BC}) − S(λ^B) − S(λ^{ABC})`.
pub fn objective_f(t: &SpectraTuple) -> f64 {
    tuple_gap(t)
}

fn objective_flat(x: &[f64], layout: &polytope::Layout) -> f64 {
    use crate::spectra::entropy_of;
    let part = |(lo, hi): (usize, usize)| entropy_of(&x[lo..hi]);
    part(layout.ab) + part(layout.bc) - part(layout.b) - part(layout.abc)
}

/// Gradient on support entries; frozen zeros get 0.
fn gradient_flat(x: &[f64], poly: &polytope::Polytope, out: &mut [f64]) {
    out.iter_mut().for_each(|g| *g = 0.0);
    // dS/dx = -ln x - 1; F adds S(AB), S(BC) and subtracts S(ABC), S(B)
    let signs = [-1.0, 1.0, 1.0, -1.0];
    for (sup, sign) in poly.support.iter().zip(signs) {
        for &i in sup {
            out[i] = sign * (-x[i].ln() - 1.0);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// An accepted step improving F by less than this ends the run as converged.
    pub improvement_tol: f64,
    pub projection_tol: f64,
    pub max_projection_sweeps: usize,
    pub initial_step: f64,
    /// Step size below which backtracking gives up and the run counts as converged.
    pub min_step: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            max_iterations: 10_000,
            improvement_tol: 1e-12,
            projection_tol: 1e-10,
            max_projection_sweeps: 20_000,
            initial_step: 1e-2,
            min_step: 1e-14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub index: usize,
    pub seed: u64,
    pub sampler_draws: usize,
    pub start_objective: f64,
    pub final_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub feasibility_residual: f64,
    pub uniformity_deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizationResult {
    pub spec: FeasibleRegionSpec,
    pub minimizer: SpectraTuple,
    pub objective: f64,
    pub feasibility_residual: f64,
    pub residuals: ConstraintResiduals,
    pub restarts: usize,
    pub converged_restarts: usize,
    /// Max over the four vectors of `(max − min) / mean` across support entries.
    pub uniformity_deviation: f64,
    pub best_restart: usize,
    pub seed: u64,
    pub restart_seeds: Vec<u64>,
    pub runs: Vec<RestartSummary>,
    pub options: MinimizeOptions,
}

struct RunOutcome {
    summary: RestartSummary,
    x: Vec<f64>,
}

fn flatten(t: &SpectraTuple) -> Vec<f64> {
    [&t.lambda_abc, &t.lambda_ab, &t.lambda_bc, &t.lambda_b]
        .iter()
        .flat_map(|s| s.values().iter().copied())
        .collect()
}

fn unflatten(x: &[f64], spec: &FeasibleRegionSpec, layout: &polytope::Layout) -> Result<SpectraTuple> {
    let mut clean = x.to_vec();
    let zeros = [spec.pattern.abc, spec.pattern.ab, spec.pattern.bc, spec.pattern.b];
    for ((lo, hi), z) in layout.vectors().into_iter().zip(zeros) {
        // projection can leave ordering violations of order 1e-10
        let v = &mut clean[lo..hi];
        for i in 1..v.len() {
            if v[i] < v[i - 1] && i > z {
                v[i] = v[i - 1];
            }
        }
        let total: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= total);
    }
    let vec_of = |(lo, hi): (usize, usize)| clean[lo..hi].to_vec();
    SpectraTuple::from_vectors(
        spec.dims,
        vec_of(layout.abc),
        vec_of(layout.ab),
        vec_of(layout.bc),
        vec_of(layout.b),
    )
}

fn descend(poly: &polytope::Polytope, start: Vec<f64>, opts: &MinimizeOptions) -> (Vec<f64>, usize, bool) {
    let layout = &poly.layout;
    let mut x = start;
    let mut fx = objective_flat(&x, layout);
    let mut grad = vec![0.0; x.len()];
    let mut trial = vec![0.0; x.len()];
    let mut step = opts.initial_step;

    for iter in 0..opts.max_iterations {
        gradient_flat(&x, poly, &mut grad);
        let mut accepted = None;
        while step >= opts.min_step {
            for i in 0..x.len() {
                trial[i] = x[i] - step * grad[i];
            }
            let projected = poly
                .project(&mut trial, opts.projection_tol, opts.max_projection_sweeps)
                .is_some();
            if projected && poly.support.iter().flatten().all(|&i| trial[i] > 0.0) {
                let ft = objective_flat(&trial, layout);
                let directional: f64 = grad.iter().zip(trial.iter().zip(&x)).map(|(g, (t, v))| g * (t - v)).sum();
                if ft < fx && ft <= fx + 1e-4 * directional.min(0.0) {
                    accepted = Some(ft);
                    break;
                }
            }
            step *= 0.5;
        }
        let Some(ft) = accepted else {
            return (x, iter, true);
        };
        let improvement = fx - ft;
        std::mem::swap(&mut x, &mut trial);
        fx = ft;
        step = (step * 2.0).min(1.0);
        if improvement < opts.improvement_tol {
            return (x, iter + 1, true);
        }
    }
    (x, opts.max_iterations, false)
}

/// Max over the four vectors of `(max − min) / mean` on the support entries.
fn uniformity_flat(x: &[f64], poly: &polytope::Polytope) -> f64 {
    poly.support
        .iter()
        .map(|sup| {
            let vals = sup.iter().map(|&i| x[i]);
            let max = vals.clone().fold(f64::NEG_INFINITY, f64::max);
            let min = vals.clone().fold(f64::INFINITY, f64::min);
            let mean = vals.sum::<f64>() / sup.len() as f64;
            (max - min) / mean
        })
        .fold(0.0, f64::max)
}

pub fn minimize_f(spec: &FeasibleRegionSpec, restarts: usize, seed: u64) -> Result<MinimizationResult> {
    minimize_f_with(spec, restarts, seed, &MinimizeOptions::default())
}

/// Runs `restarts` independent descents from sampled feasible starts and keeps
/// the best converged one. Restart `i` uses seed `derive_seed(seed, i)`.
pub fn minimize_f_with(
    spec: &FeasibleRegionSpec,
    restarts: usize,
    seed: u64,
    opts: &MinimizeOptions,
) -> Result<MinimizationResult> {
    spec.validate()?;
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be >= 1".into()));
    }
    let poly = polytope::Polytope::new(spec);
    let restart_seeds: Vec<u64> = (0..restarts as u64).map(|i| derive_seed(seed, i)).collect();

    let outcomes: Vec<Result<RunOutcome>> = restart_seeds
        .par_iter()
        .enumerate()
        .map(|(index, &rs)| {
            let sample = sampler::sample_with_budget(spec, rs, DEFAULT_DRAW_BUDGET)?;
            let start = flatten(&sample.tuple);
            let start_objective = objective_f(&sample.tuple);
            let (x, iterations, converged) = descend(&poly, start, opts);
            let feasibility_residual = poly.max_violation(&x);
            Ok(RunOutcome {
                summary: RestartSummary {
                    index,
                    seed: rs,
                    sampler_draws: sample.draws,
                    start_objective,
                    final_objective: objective_flat(&x, &poly.layout),
                    uniformity_deviation: uniformity_flat(&x, &poly),
                    iterations,
                    converged,
                    feasibility_residual,
                },
                x,
            })
        })
        .collect();
    let outcomes: Vec<RunOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    let feasible = outcomes
        .iter()
        .filter(|o| o.summary.feasibility_residual <= FEASIBILITY_TOL)
        .count();
    let best = outcomes
        .iter()
        .filter(|o| o.summary.converged && o.summary.feasibility_residual <= FEASIBILITY_TOL)
        .min_by(|a, b| {
            a.summary
                .final_objective
                .total_cmp(&b.summary.final_objective)
                .then(a.summary.index.cmp(&b.summary.index))
        })
        .ok_or(Error::NoConvergence { restarts, feasible })?;

    let minimizer = unflatten(&best.x, spec, &poly.layout)?;
    let x = flatten(&minimizer);
    let residuals = poly.residuals(&x);
    let converged_restarts = outcomes.iter().filter(|o| o.summary.converged).count();
    Ok(MinimizationResult {
        spec: *spec,
        objective: objective_f(&minimizer),
        feasibility_residual: residuals.max(),
        residuals,
        restarts,
        converged_restarts,
        uniformity_deviation: uniformity_flat(&x, &poly),
        best_restart: best.summary.index,
        minimizer,
        seed,
        restart_seeds,
        runs: outcomes.into_iter().map(|o| o.summary).collect(),
        options: *opts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub spec: FeasibleRegionSpec,
    pub samples: usize,
    pub min_objective: f64,
    pub argmin_index: usize,
    pub argmin: SpectraTuple,
    pub seed: u64,
}

/// Minimum of F over `samples` independent feasible samples (sample `i`
/// drawn with `derive_seed(seed, i)`).
pub fn oracle_scan(spec: &FeasibleRegionSpec, samples: usize, seed: u64) -> Result<OracleResult> {
    oracle_scan_with_injected(spec, Vec::new(), samples, seed)
}

/// As [`oracle_scan`], with `injected` tuples evaluated first as samples `0..injected.len()`.
pub fn oracle_scan_with_injected(
    spec: &FeasibleRegionSpec,
    injected: Vec<SpectraTuple>,
    samples: usize,
    seed: u64,
) -> Result<OracleResult> {
    spec.validate()?;
    if samples == 0 {
        return Err(Error::InvalidArgument("oracle needs at least one sample".into()));
    }
    let offset = injected.len();
    let injected_best = injected
        .into_iter()
        .enumerate()
        .map(|(i, t)| (objective_f(&t), i, t))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let drawn_best = (0..samples)
        .into_par_iter()
        .map(|i| {
            let t = sample_feasible(spec, derive_seed(seed, i as u64))?;
            Ok::<_, Error>((objective_f(&t), offset + i, t))
        })
        .try_reduce_with(|a, b| Ok(if (b.0, b.1) < (a.0, a.1) { b } else { a }))
        .expect("samples >= 1")?;

    let (min_objective, argmin_index, argmin) = match injected_best {
        Some(inj) if inj.0 <= drawn_best.0 => inj,
        _ => drawn_best,
    };
    Ok(OracleResult {
        spec: *spec,
        samples: samples + offset,
        min_objective,
        argmin_index,
        argmin,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditions::check_theorem_conditions;
    use approx::assert_abs_diff_eq;

    fn d222() -> TripartiteDims {
        TripartiteDims::new(2, 2, 2).unwrap()
    }

    #[test]
    fn pattern_parsing() {
        assert_eq!("full".parse::<SupportPattern>().unwrap(), SupportPattern::FULL);
        let p: SupportPattern = "abc=4, ab=2,bc=2,b=1".parse().unwrap();
        assert_eq!(p, SupportPattern { abc: 4, ab: 2, bc: 2, b: 1 });
        assert_eq!(p.to_string().parse::<SupportPattern>().unwrap(), p);
        assert!("abc=x".parse::<SupportPattern>().is_err());
        assert!("ad=1".parse::<SupportPattern>().is_err());
    }

    #[test]
    fn spec_rejects_missing_b_zero() {
        // r = L with abc = L·s: lambda_B needs one zero
        let p = SupportPattern { abc: 2, ab: 2, bc: 1, b: 0 };
        assert!(FeasibleRegionSpec::new(d222(), p).is_err());
        let too_many = SupportPattern { abc: 8, ..SupportPattern::FULL };
        assert!(FeasibleRegionSpec::new(d222(), too_many).is_err());
    }

    #[test]
    fn objective_examples() {
        for (l, m, n) in [(2, 2, 2), (2, 3, 2), (3, 2, 2), (2, 2, 3)] {
            let t = SpectraTuple::uniform(TripartiteDims::new(l, m, n).unwrap());
            assert_abs_diff_eq!(objective_f(&t), 0.0, epsilon = 1e-12);
        }
        let d = TripartiteDims::new(2, 3, 2).unwrap();
        let mut pure_abc = vec![0.0; 12];
        pure_abc[11] = 1.0;
        let t = SpectraTuple::from_vectors(d, pure_abc, vec![1.0 / 6.0; 6], vec![1.0 / 6.0; 6], vec![0.0, 0.0, 1.0])
            .unwrap();
        assert_abs_diff_eq!(objective_f(&t), 2.0 * 6f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn sampler_full_support_and_determinism() {
        let spec = FeasibleRegionSpec::new(d222(), SupportPattern::FULL).unwrap();
        let a = sample_feasible(&spec, 17).unwrap();
        let b = sample_feasible(&spec, 17).unwrap();
        assert_eq!(a, b);
        let c = check_theorem_conditions(&a, 1e-10).unwrap();
        assert!(c.all_hold());
        assert!(c.majorization_margin() >= 0.0);
    }

    #[test]
    fn sampler_reports_structural_infeasibility() {
        let p = SupportPattern { abc: 2, ab: 2, bc: 1, b: 1 };
        let spec = FeasibleRegionSpec::new(d222(), p).unwrap();
        match sample_feasible(&spec, 0) {
            Err(Error::SamplerFailure { pattern, draws, .. }) => {
                assert_eq!(pattern, p);
                assert_eq!(draws, 0);
            }
            other => panic!("expected sampler failure, got {other:?}"),
        }
    }

    #[test]
    fn enumerated_patterns_are_valid() {
        let pats = enumerate_patterns(d222());
        assert!(pats.contains(&SupportPattern::FULL));
        assert!(pats.contains(&SupportPattern { abc: 4, ab: 2, bc: 2, b: 1 }));
        assert!(!pats.contains(&SupportPattern { abc: 2, ab: 2, bc: 1, b: 1 }));
        for p in pats {
            let spec = FeasibleRegionSpec::new(d222(), p).unwrap();
            assert!(structural_obstruction(&spec).is_none());
        }
    }

    #[test]
    fn oracle_single_sample_and_injection() {
        let spec = FeasibleRegionSpec::new(d222(), SupportPattern::FULL).unwrap();
        let one = oracle_scan(&spec, 1, 5).unwrap();
        let t = sample_feasible(&spec, derive_seed(5, 0)).unwrap();
        assert_eq!(one.min_objective, objective_f(&t));
        assert_eq!(one.argmin, t);

        let inj = oracle_scan_with_injected(&spec, vec![SpectraTuple::uniform(d222())], 50, 5).unwrap();
        assert!(inj.min_objective <= 1e-12);
        assert_eq!(inj.samples, 51);
    }

    #[test]
    fn minimizer_result_is_consistent() {
        let spec = FeasibleRegionSpec::new(d222(), SupportPattern::FULL).unwrap();
        let r = minimize_f(&spec, 4, 3).unwrap();
        assert_abs_diff_eq!(r.objective, objective_f(&r.minimizer), epsilon = 1e-10);
        assert!(r.feasibility_residual <= FEASIBILITY_TOL);
        for run in &r.runs {
            assert!(run.final_objective <= run.start_objective);
        }
        assert_eq!(r.restart_seeds.len(), 4);
    }
}
