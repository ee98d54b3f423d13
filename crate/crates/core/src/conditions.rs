//! Spectral relations between a tripartite state and its marginals, the
//! zero-count constraints, and the entropy gaps they are meant to imply.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{
    block_sums, entropy, majorized_by, rank_of, Majorization, Spectrum, SpectrumLabel,
    DEFAULT_RANK_THRESHOLD,
};
use crate::tensor::{partial_trace, spectrum_of, DensityMatrix, PartySet, TripartiteDims};

/// The four ascending vectors `λ^{ABC}`, `λ^{AB}`, `λ^{BC}`, `λ^B` on fixed dims.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectraTuple {
    pub dims: TripartiteDims,
    pub lambda_abc: Spectrum,
    pub lambda_ab: Spectrum,
    pub lambda_bc: Spectrum,
    pub lambda_b: Spectrum,
}

impl SpectraTuple {
    pub fn new(
        dims: TripartiteDims,
        lambda_abc: Spectrum,
        lambda_ab: Spectrum,
        lambda_bc: Spectrum,
        lambda_b: Spectrum,
    ) -> Result<Self> {
        let (l, m, n) = (dims.l(), dims.m(), dims.n());
        let checks = [
            ("lambda_abc", lambda_abc.len(), l * m * n),
            ("lambda_ab", lambda_ab.len(), l * m),
            ("lambda_bc", lambda_bc.len(), m * n),
            ("lambda_b", lambda_b.len(), m),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::DimensionMismatch(format!(
                    "{name} has length {got}, dims {dims} require {want}"
                )));
            }
        }
        Ok(SpectraTuple {
            dims,
            lambda_abc: lambda_abc.with_label(SpectrumLabel::ABC),
            lambda_ab: lambda_ab.with_label(SpectrumLabel::AB),
            lambda_bc: lambda_bc.with_label(SpectrumLabel::BC),
            lambda_b: lambda_b.with_label(SpectrumLabel::B),
        })
    }

    pub fn from_vectors(
        dims: TripartiteDims,
        abc: Vec<f64>,
        ab: Vec<f64>,
        bc: Vec<f64>,
        b: Vec<f64>,
    ) -> Result<Self> {
        Self::new(
            dims,
            Spectrum::new(abc, SpectrumLabel::ABC)?,
            Spectrum::new(ab, SpectrumLabel::AB)?,
            Spectrum::new(bc, SpectrumLabel::BC)?,
            Spectrum::new(b, SpectrumLabel::B)?,
        )
    }

    /// Every vector uniform on its full length.
    pub fn uniform(dims: TripartiteDims) -> Self {
        let (l, m, n) = (dims.l(), dims.m(), dims.n());
        SpectraTuple {
            dims,
            lambda_abc: Spectrum::uniform(l * m * n, SpectrumLabel::ABC),
            lambda_ab: Spectrum::uniform(l * m, SpectrumLabel::AB),
            lambda_bc: Spectrum::uniform(m * n, SpectrumLabel::BC),
            lambda_b: Spectrum::uniform(m, SpectrumLabel::B),
        }
    }

    /// Spectra of `ρ_ABC` and its AB, BC, and B marginals.
    pub fn from_state(rho: &DensityMatrix) -> Result<Self> {
        let dims = rho.require_tripartite()?;
        Ok(SpectraTuple {
            dims,
            lambda_abc: spectrum_of(rho)?,
            lambda_ab: spectrum_of(&partial_trace(rho, PartySet::AB)?)?,
            lambda_bc: spectrum_of(&partial_trace(rho, PartySet::BC)?)?,
            lambda_b: spectrum_of(&partial_trace(rho, PartySet::B)?)?,
        })
    }
}

#[derive(Deserialize)]
struct RawTuple {
    dims: TripartiteDims,
    lambda_abc: Spectrum,
    lambda_ab: Spectrum,
    lambda_bc: Spectrum,
    lambda_b: Spectrum,
}

impl<'de> Deserialize<'de> for SpectraTuple {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawTuple::deserialize(d)?;
        SpectraTuple::new(raw.dims, raw.lambda_abc, raw.lambda_ab, raw.lambda_bc, raw.lambda_b)
            .map_err(serde::de::Error::custom)
    }
}

/// A majorization check as it appears in reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub holds: bool,
    pub margin: f64,
    pub margins: Vec<f64>,
}

impl From<Majorization> for Check {
    fn from(m: Majorization) -> Self {
        Check {
            holds: m.holds,
            margin: m.margin,
            margins: m.margins,
        }
    }
}

/// Each marginal spectrum against the block sums of a larger one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Report {
    /// `λ_AB` majorized by N-blocks of `λ_ABC`.
    pub ab_by_abc_blocks: Check,
    /// `λ_BC` majorized by L-blocks of `λ_ABC`.
    pub bc_by_abc_blocks: Check,
    /// `λ_B` majorized by N-blocks of `λ_BC`.
    pub b_by_bc_blocks: Check,
    /// `λ_B` majorized by L-blocks of `λ_AB`.
    pub b_by_ab_blocks: Check,
}

impl Lemma1Report {
    pub fn all_hold(&self) -> bool {
        self.checks().iter().all(|c| c.holds)
    }

    pub fn min_margin(&self) -> f64 {
        self.checks().iter().map(|c| c.margin).fold(f64::INFINITY, f64::min)
    }

    pub fn checks(&self) -> [&Check; 4] {
        [
            &self.ab_by_abc_blocks,
            &self.bc_by_abc_blocks,
            &self.b_by_bc_blocks,
            &self.b_by_ab_blocks,
        ]
    }
}

fn majorization_relations(t: &SpectraTuple) -> Result<Lemma1Report> {
    let (l, n) = (t.dims.l(), t.dims.n());
    let abc = t.lambda_abc.values();
    Ok(Lemma1Report {
        ab_by_abc_blocks: majorized_by(t.lambda_ab.values(), &block_sums(abc, n)?)?.into(),
        bc_by_abc_blocks: majorized_by(t.lambda_bc.values(), &block_sums(abc, l)?)?.into(),
        b_by_bc_blocks: majorized_by(t.lambda_b.values(), &block_sums(t.lambda_bc.values(), n)?)?
            .into(),
        b_by_ab_blocks: majorized_by(t.lambda_b.values(), &block_sums(t.lambda_ab.values(), l)?)?
            .into(),
    })
}

pub fn check_lemma1(rho: &DensityMatrix) -> Result<Lemma1Report> {
    majorization_relations(&SpectraTuple::from_state(rho)?)
}

/// Lower bound `floor((r-1)/L) + 1` on zeros of `λ^B`, which is `⌈r/L⌉`; zero when `r = 0`.
pub fn required_b_zeros(r: i64, l: usize) -> Result<usize> {
    if r < 0 {
        return Err(Error::InvalidArgument(format!("zero count must be >= 0, got {r}")));
    }
    if l == 0 {
        return Err(Error::InvalidArgument("block dimension must be >= 1".into()));
    }
    if r == 0 {
        return Ok(0);
    }
    Ok(((r - 1) / l as i64 + 1) as usize)
}

/// The same bound with `[x]` read as the largest integer strictly below `x`.
pub fn required_b_zeros_strict(r: usize, l: usize) -> usize {
    // largest integer < (r-1)/L is ceil((r-1)/L) - 1, so the bound is ceil((r-1)/L)
    if r == 0 {
        0
    } else {
        (r - 1).div_ceil(l)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Report {
    pub applicable: bool,
    pub conclusion_holds: bool,
    /// `!applicable || conclusion_holds`.
    pub holds: bool,
    /// `bound - t` when applicable.
    pub margin: Option<f64>,
    /// Zero count of `λ_AB`.
    pub r: usize,
    /// Zero count of `λ_BC`.
    pub s: usize,
    /// Zero count of `λ_B`.
    pub t: usize,
    /// Zero count of `λ_ABC`.
    pub abc_zero_count: usize,
    pub bound: usize,
    pub bound_strict: usize,
    pub conclusion_holds_strict: bool,
    pub threshold: f64,
}

pub fn check_lemma2(rho: &DensityMatrix, threshold: f64) -> Result<Lemma2Report> {
    lemma2_from_tuple(&SpectraTuple::from_state(rho)?, threshold)
}

fn lemma2_from_tuple(t: &SpectraTuple, threshold: f64) -> Result<Lemma2Report> {
    let (l, n) = (t.dims.l(), t.dims.n());
    let zeros = ZeroCounts::of(t, threshold);
    let applicable = zeros.abc == l * zeros.bc && n * zeros.ab <= l * zeros.bc;
    let bound = required_b_zeros(zeros.ab as i64, l)?;
    let bound_strict = required_b_zeros_strict(zeros.ab, l);
    let conclusion_holds = applicable && zeros.b <= bound;
    Ok(Lemma2Report {
        applicable,
        conclusion_holds,
        holds: !applicable || conclusion_holds,
        margin: applicable.then(|| bound as f64 - zeros.b as f64),
        r: zeros.ab,
        s: zeros.bc,
        t: zeros.b,
        abc_zero_count: zeros.abc,
        bound,
        bound_strict,
        conclusion_holds_strict: applicable && zeros.b <= bound_strict,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZeroCounts {
    pub abc: usize,
    pub ab: usize,
    pub bc: usize,
    pub b: usize,
}

impl ZeroCounts {
    pub fn of(t: &SpectraTuple, threshold: f64) -> Self {
        ZeroCounts {
            abc: rank_of(t.lambda_abc.values(), threshold).zero_count,
            ab: rank_of(t.lambda_ab.values(), threshold).zero_count,
            bc: rank_of(t.lambda_bc.values(), threshold).zero_count,
            b: rank_of(t.lambda_b.values(), threshold).zero_count,
        }
    }
}

/// One orientation of the zero-count constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroClause {
    /// Whether `λ^{ABC}` has exactly (outer dim)·(partner zero count) zeros.
    pub applicable: bool,
    pub required: usize,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroPatternCheck {
    pub holds: bool,
    pub applicable: bool,
    /// Min over applicable clauses of `zeros(λ^B) - required`.
    pub margin: Option<f64>,
    pub zeros: ZeroCounts,
    /// `λ^{ABC}` has `L·s` zeros ⇒ `λ^B` has at least `required_b_zeros(r, L)`.
    pub clause_ab: ZeroClause,
    /// Same with AB↔BC and L↔N exchanged.
    pub clause_bc: ZeroClause,
}

pub fn zero_pattern_check(dims: TripartiteDims, zeros: ZeroCounts) -> ZeroPatternCheck {
    let clause = |app: bool, partner_zeros: usize, outer: usize| {
        let required = required_b_zeros(partner_zeros as i64, outer).expect("nonnegative input");
        ZeroClause {
            applicable: app,
            required,
            holds: !app || zeros.b >= required,
        }
    };
    let clause_ab = clause(zeros.abc == dims.l() * zeros.bc, zeros.ab, dims.l());
    let clause_bc = clause(zeros.abc == dims.n() * zeros.ab, zeros.bc, dims.n());
    let margin = [&clause_ab, &clause_bc]
        .iter()
        .filter(|c| c.applicable)
        .map(|c| zeros.b as f64 - c.required as f64)
        .reduce(f64::min);
    ZeroPatternCheck {
        holds: clause_ab.holds && clause_bc.holds,
        applicable: clause_ab.applicable || clause_bc.applicable,
        margin,
        zeros,
        clause_ab,
        clause_bc,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub holds: bool,
    pub margin: f64,
    pub via_bc: Check,
    pub via_ab: Check,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremConditions {
    pub condition1: Check,
    pub condition2: Check,
    pub condition3: PairCheck,
    pub condition4: ZeroPatternCheck,
}

impl TheoremConditions {
    pub fn all_hold(&self) -> bool {
        self.condition1.holds && self.condition2.holds && self.condition3.holds && self.condition4.holds
    }

    /// Smallest margin over the three majorization conditions.
    pub fn majorization_margin(&self) -> f64 {
        self.condition1
            .margin
            .min(self.condition2.margin)
            .min(self.condition3.margin)
    }
}

pub fn check_theorem_conditions(t: &SpectraTuple, threshold: f64) -> Result<TheoremConditions> {
    let rel = majorization_relations(t)?;
    let condition3 = PairCheck {
        holds: rel.b_by_bc_blocks.holds && rel.b_by_ab_blocks.holds,
        margin: rel.b_by_bc_blocks.margin.min(rel.b_by_ab_blocks.margin),
        via_bc: rel.b_by_bc_blocks,
        via_ab: rel.b_by_ab_blocks,
    };
    Ok(TheoremConditions {
        condition1: rel.ab_by_abc_blocks,
        condition2: rel.bc_by_abc_blocks,
        condition3,
        condition4: zero_pattern_check(t.dims, ZeroCounts::of(t, threshold)),
    })
}

/// `S(AB) + S(BC) − S(B) − S(ABC)` over spectra.
pub fn tuple_gap(t: &SpectraTuple) -> f64 {
    entropy(&t.lambda_ab) + entropy(&t.lambda_bc) - entropy(&t.lambda_b) - entropy(&t.lambda_abc)
}

/// `S(ρ_AB) + S(ρ_BC) − S(ρ_ABC) − S(ρ_B)`, signed and unclamped.
pub fn ssa_gap(rho: &DensityMatrix) -> Result<f64> {
    Ok(tuple_gap(&SpectraTuple::from_state(rho)?))
}

/// `S(ρ_1) + S(ρ_2) − S(ρ_12)` for a state on exactly two parties.
pub fn subadditivity_gap(rho: &DensityMatrix) -> Result<f64> {
    let factors = rho.factors();
    if factors.len() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "subadditivity needs a bipartite state, got one on {}",
            rho.parties()
        )));
    }
    let first: PartySet = std::iter::once(factors[0].0).collect();
    let second: PartySet = std::iter::once(factors[1].0).collect();
    let whole = entropy(&spectrum_of(rho)?);
    let s1 = entropy(&spectrum_of(&partial_trace(rho, first)?)?);
    let s2 = entropy(&spectrum_of(&partial_trace(rho, second)?)?);
    Ok(s1 + s2 - whole)
}

/// Everything checked for a single tripartite state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub lemma1: Lemma1Report,
    pub lemma2: Lemma2Report,
    pub theorem_conditions: TheoremConditions,
    pub ssa_gap: f64,
    /// Subadditivity gap of the AB marginal.
    pub subadd_gap: f64,
}

impl ConditionReport {
    /// True when no majorization margin or entropy gap falls below `-tol`
    /// and the zero-count relations hold.
    pub fn passes(&self, tol: f64) -> bool {
        self.lemma1.min_margin() >= -tol
            && self.lemma2.holds
            && self.ssa_gap >= -tol
            && self.subadd_gap >= -tol
    }
}

pub fn check_state(rho: &DensityMatrix, threshold: f64) -> Result<ConditionReport> {
    let tuple = SpectraTuple::from_state(rho)?;
    let lemma1 = majorization_relations(&tuple)?;
    let lemma2 = lemma2_from_tuple(&tuple, threshold)?;
    let theorem_conditions = check_theorem_conditions(&tuple, threshold)?;
    let subadd_gap = subadditivity_gap(&partial_trace(rho, PartySet::AB)?)?;
    Ok(ConditionReport {
        lemma1,
        lemma2,
        theorem_conditions,
        ssa_gap: tuple_gap(&tuple),
        subadd_gap,
    })
}

/// [`check_state`] at the default rank threshold.
pub fn check_state_default(rho: &DensityMatrix) -> Result<ConditionReport> {
    check_state(rho, DEFAULT_RANK_THRESHOLD)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::ComplexMatrix;
    use approx::assert_abs_diff_eq;

    fn dims(l: usize, m: usize, n: usize) -> TripartiteDims {
        TripartiteDims::new(l, m, n).unwrap()
    }

    #[test]
    fn required_zeros_examples() {
        assert_eq!(required_b_zeros(0, 2).unwrap(), 0);
        for l in 1..6usize {
            assert_eq!(required_b_zeros(l as i64, l).unwrap(), 1);
            assert_eq!(required_b_zeros(l as i64 + 1, l).unwrap(), 2);
        }
        assert!(required_b_zeros(-1, 2).is_err());
    }

    #[test]
    fn required_zeros_is_ceiling_exhaustively() {
        for l in 1..=8usize {
            for r in 1..=10 * l {
                let ceiling = (r as f64 / l as f64).ceil() as usize;
                assert_eq!(required_b_zeros(r as i64, l).unwrap(), ceiling, "r={r} L={l}");
            }
        }
    }

    #[test]
    fn strict_reading_differs_only_at_block_boundaries() {
        // r = kL + 1 makes (r-1)/L an integer
        assert_eq!(required_b_zeros(3, 2).unwrap(), 2);
        assert_eq!(required_b_zeros_strict(3, 2), 1);
        assert_eq!(required_b_zeros_strict(4, 2), 2);
        assert_eq!(required_b_zeros_strict(0, 2), 0);
    }

    #[test]
    fn uniform_tuple_meets_all_conditions() {
        let t = SpectraTuple::uniform(dims(2, 3, 2));
        let c = check_theorem_conditions(&t, 1e-10).unwrap();
        assert!(c.all_hold());
        assert!(c.condition4.applicable);
        assert_abs_diff_eq!(tuple_gap(&t), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn concentrated_ab_violates_condition1() {
        let d = dims(2, 2, 2);
        let t = SpectraTuple::from_vectors(
            d,
            vec![0.125; 8],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.25; 4],
            vec![0.5; 2],
        )
        .unwrap();
        let c = check_theorem_conditions(&t, 1e-10).unwrap();
        assert!(!c.condition1.holds);
        assert_abs_diff_eq!(c.condition1.margins[0], -0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(c.condition1.margin, -0.75, epsilon = 1e-15);
        assert!(c.condition2.holds);
    }

    #[test]
    fn zero_clause_gating() {
        let d = dims(2, 2, 2);
        // λ^ABC zeros = L·s with s=1, r=2 needs one zero of λ^B
        let missing = zero_pattern_check(d, ZeroCounts { abc: 2, ab: 2, bc: 1, b: 0 });
        assert!(missing.applicable && !missing.holds);
        assert_eq!(missing.clause_ab.required, 1);
        assert_eq!(missing.margin, Some(-1.0));
        // hypothesis unmet in both orientations: not applicable, not failed
        let vacuous = zero_pattern_check(d, ZeroCounts { abc: 1, ab: 0, bc: 0, b: 0 });
        assert!(!vacuous.applicable && vacuous.holds);
        assert_eq!(vacuous.margin, None);
        // exchanged roles: abc = N·r
        let swapped = zero_pattern_check(d, ZeroCounts { abc: 2, ab: 1, bc: 2, b: 0 });
        assert!(swapped.clause_bc.applicable && !swapped.clause_bc.holds);
    }

    #[test]
    fn tuple_length_mismatch_rejected() {
        let d = dims(2, 2, 2);
        let r = SpectraTuple::from_vectors(d, vec![0.25; 4], vec![0.25; 4], vec![0.25; 4], vec![0.5; 2]);
        assert!(matches!(r, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn maximally_mixed_lemma1_margins_zero() {
        let rho = DensityMatrix::tripartite(ComplexMatrix::identity(8).scale(0.125), dims(2, 2, 2)).unwrap();
        let r = check_lemma1(&rho).unwrap();
        assert!(r.all_hold());
        for c in r.checks() {
            assert_abs_diff_eq!(c.margin, 0.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(ssa_gap(&rho).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn subadditivity_needs_two_parties() {
        let rho = DensityMatrix::tripartite(ComplexMatrix::identity(8).scale(0.125), dims(2, 2, 2)).unwrap();
        assert!(subadditivity_gap(&rho).is_err());
    }

    #[test]
    fn tuple_roundtrips_through_json() {
        let t = SpectraTuple::uniform(dims(2, 2, 3));
        let json = serde_json::to_string(&t).unwrap();
        let back: SpectraTuple = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.lambda_bc.label(), SpectrumLabel::BC);
    }
}
