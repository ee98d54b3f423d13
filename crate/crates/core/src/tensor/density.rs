use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::eigen::{hermitian_eigenvalues, CLAMP_TOL};
use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};
use crate::spectra::{Spectrum, SpectrumLabel};

/// Tolerance on `|tr ρ - 1|` for a valid density matrix.
pub const TRACE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    A,
    B,
    C,
}

impl Party {
    fn bit(self) -> u8 {
        match self {
            Party::A => 1,
            Party::B => 2,
            Party::C => 4,
        }
    }
}

/// A subset of `{A, B, C}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PartySet(u8);

impl PartySet {
    pub const EMPTY: PartySet = PartySet(0);
    pub const A: PartySet = PartySet(1);
    pub const B: PartySet = PartySet(2);
    pub const C: PartySet = PartySet(4);
    pub const AB: PartySet = PartySet(3);
    pub const AC: PartySet = PartySet(5);
    pub const BC: PartySet = PartySet(6);
    pub const ABC: PartySet = PartySet(7);

    pub fn from_bits(bits: u8) -> Option<PartySet> {
        (bits <= 7).then_some(PartySet(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn contains(self, p: Party) -> bool {
        self.0 & p.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: PartySet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn label(self) -> SpectrumLabel {
        match self {
            PartySet::A => SpectrumLabel::A,
            PartySet::B => SpectrumLabel::B,
            PartySet::C => SpectrumLabel::C,
            PartySet::AB => SpectrumLabel::AB,
            PartySet::AC => SpectrumLabel::AC,
            PartySet::BC => SpectrumLabel::BC,
            PartySet::ABC => SpectrumLabel::ABC,
            _ => SpectrumLabel::Abstract,
        }
    }
}

impl FromIterator<Party> for PartySet {
    fn from_iter<I: IntoIterator<Item = Party>>(iter: I) -> Self {
        PartySet(iter.into_iter().fold(0, |acc, p| acc | p.bit()))
    }
}

impl fmt::Display for PartySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("{}");
        }
        for p in [Party::A, Party::B, Party::C] {
            if self.contains(p) {
                write!(f, "{p:?}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for PartySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PartySet({self})")
    }
}

impl FromStr for PartySet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|ch| match ch.to_ascii_uppercase() {
                'A' => Ok(Party::A),
                'B' => Ok(Party::B),
                'C' => Ok(Party::C),
                other => Err(Error::InvalidArgument(format!("unknown subsystem '{other}'"))),
            })
            .collect()
    }
}

/// Subsystem dimensions `(L, M, N)` of parties A, B, C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[usize; 3]", into = "[usize; 3]")]
pub struct TripartiteDims {
    l: usize,
    m: usize,
    n: usize,
}

impl TripartiteDims {
    pub fn new(l: usize, m: usize, n: usize) -> Result<Self> {
        if l == 0 || m == 0 || n == 0 {
            return Err(Error::InvalidArgument(format!(
                "subsystem dimensions must be >= 1, got ({l}, {m}, {n})"
            )));
        }
        Ok(TripartiteDims { l, m, n })
    }

    pub fn l(&self) -> usize {
        self.l
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn total(&self) -> usize {
        self.l * self.m * self.n
    }

    pub fn factors(&self) -> Vec<(Party, usize)> {
        vec![(Party::A, self.l), (Party::B, self.m), (Party::C, self.n)]
    }

    /// Composite basis index `(a·M + b)·N + c`.
    pub fn index(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.m + b) * self.n + c
    }
}

impl TryFrom<[usize; 3]> for TripartiteDims {
    type Error = Error;

    fn try_from(d: [usize; 3]) -> Result<Self> {
        TripartiteDims::new(d[0], d[1], d[2])
    }
}

impl From<TripartiteDims> for [usize; 3] {
    fn from(d: TripartiteDims) -> Self {
        [d.l, d.m, d.n]
    }
}

impl fmt::Display for TripartiteDims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.l, self.m, self.n)
    }
}

impl FromStr for TripartiteDims {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::InvalidArgument(format!(
                "expected three dimensions L,M,N, got '{s}'"
            )));
        }
        let mut d = [0usize; 3];
        for (slot, p) in d.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad dimension '{p}' in '{s}'")))?;
        }
        TripartiteDims::try_from(d)
    }
}

/// Trace-one positive semidefinite Hermitian matrix on a tensor product of
/// parties, ordered slowest (A) to fastest (C).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
    factors: Vec<(Party, usize)>,
}

impl DensityMatrix {
    /// Validates Hermiticity, trace, and positivity.
    pub fn new(matrix: ComplexMatrix, factors: Vec<(Party, usize)>) -> Result<Self> {
        let rho = Self::new_unchecked(matrix, factors)?;
        rho.validate()?;
        Ok(rho)
    }

    pub fn tripartite(matrix: ComplexMatrix, dims: TripartiteDims) -> Result<Self> {
        Self::new(matrix, dims.factors())
    }

    pub fn bipartite(matrix: ComplexMatrix, l: usize, m: usize) -> Result<Self> {
        Self::new(matrix, vec![(Party::A, l), (Party::B, m)])
    }

    /// Checks only structural consistency; used for states that are valid by construction.
    pub(crate) fn new_unchecked(matrix: ComplexMatrix, factors: Vec<(Party, usize)>) -> Result<Self> {
        let mut seen = PartySet::EMPTY;
        for &(p, d) in &factors {
            if seen.contains(p) {
                return Err(Error::InvalidArgument(format!("party {p:?} listed twice")));
            }
            if d == 0 {
                return Err(Error::InvalidArgument(format!("party {p:?} has dimension 0")));
            }
            seen = PartySet(seen.0 | p.bit());
        }
        if factors.is_empty() {
            return Err(Error::InvalidArgument("density matrix needs at least one party".into()));
        }
        let total: usize = factors.iter().map(|&(_, d)| d).product();
        if total != matrix.dim() {
            return Err(Error::DimensionMismatch(format!(
                "subsystem dimensions multiply to {total}, matrix is {0}x{0}",
                matrix.dim()
            )));
        }
        Ok(DensityMatrix { matrix, factors })
    }

    fn validate(&self) -> Result<()> {
        self.matrix.check_hermitian()?;
        let tr = self.matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "trace is {:.3e}{:+.3e}i, expected 1",
                tr.re, tr.im
            )));
        }
        let ev = hermitian_eigenvalues(&self.matrix)?;
        if ev[0] < -CLAMP_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {:e}",
                ev[0]
            )));
        }
        Ok(())
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn factors(&self) -> &[(Party, usize)] {
        &self.factors
    }

    pub fn parties(&self) -> PartySet {
        self.factors.iter().map(|&(p, _)| p).collect()
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn dim_of(&self, party: Party) -> Option<usize> {
        self.factors.iter().find(|&&(p, _)| p == party).map(|&(_, d)| d)
    }

    /// `Some` when the state lives on exactly A, B, C in that order.
    pub fn tripartite_dims(&self) -> Option<TripartiteDims> {
        match self.factors.as_slice() {
            [(Party::A, l), (Party::B, m), (Party::C, n)] => TripartiteDims::new(*l, *m, *n).ok(),
            _ => None,
        }
    }

    pub fn require_tripartite(&self) -> Result<TripartiteDims> {
        self.tripartite_dims().ok_or_else(|| {
            Error::DimensionMismatch(format!(
                "expected a state on A,B,C, got one on {}",
                self.parties()
            ))
        })
    }

    /// Tensor product with `self` on the slower factors.
    pub fn tensor(&self, other: &DensityMatrix) -> Result<DensityMatrix> {
        if self.parties().0 & other.parties().0 != 0 {
            return Err(Error::InvalidArgument("tensor factors share a party".into()));
        }
        let mut factors = self.factors.clone();
        factors.extend_from_slice(&other.factors);
        DensityMatrix::new_unchecked(self.matrix.kron(&other.matrix), factors)
    }
}

/// Reduced state on `keep`, tracing out every other party.
pub fn partial_trace(rho: &DensityMatrix, keep: PartySet) -> Result<DensityMatrix> {
    if keep.is_empty() {
        return Err(Error::InvalidArgument("cannot trace out every subsystem".into()));
    }
    let present = rho.parties();
    if !keep.is_subset_of(present) {
        return Err(Error::InvalidArgument(format!(
            "cannot keep {keep}: state lives on {present}"
        )));
    }
    if keep == present {
        return Ok(rho.clone());
    }

    let dim = rho.dim();
    let mut kept_factors = Vec::new();
    // For every composite index: (index within the kept space, index within the traced space).
    let mut kept_idx = vec![0usize; dim];
    let mut traced_idx = vec![0usize; dim];
    for (i, (k_slot, t_slot)) in kept_idx.iter_mut().zip(traced_idx.iter_mut()).enumerate() {
        let mut rem = i;
        let mut k = 0usize;
        let mut t = 0usize;
        let mut k_stride = 1usize;
        let mut t_stride = 1usize;
        for &(p, d) in rho.factors.iter().rev() {
            let digit = rem % d;
            rem /= d;
            if keep.contains(p) {
                k += digit * k_stride;
                k_stride *= d;
            } else {
                t += digit * t_stride;
                t_stride *= d;
            }
        }
        *k_slot = k;
        *t_slot = t;
    }
    for &(p, d) in &rho.factors {
        if keep.contains(p) {
            kept_factors.push((p, d));
        }
    }
    let out_dim: usize = kept_factors.iter().map(|&(_, d)| d).product();
    let mut out = ComplexMatrix::zeros(out_dim);
    for i in 0..dim {
        for j in 0..dim {
            if traced_idx[i] == traced_idx[j] {
                out[(kept_idx[i], kept_idx[j])] += rho.matrix[(i, j)];
            }
        }
    }
    DensityMatrix::new_unchecked(out, kept_factors)
}

/// Ascending eigenvalue spectrum, clamped and renormalized.
pub fn spectrum_of(rho: &DensityMatrix) -> Result<Spectrum> {
    let values = hermitian_eigenvalues(rho.matrix())?;
    if values[0] < -CLAMP_TOL {
        return Err(Error::InvalidState(format!(
            "negative eigenvalue {:e}",
            values[0]
        )));
    }
    Spectrum::from_eigenvalues(values, rho.parties().label())
}
