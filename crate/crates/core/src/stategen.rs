//! Seeded density-matrix generators.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with a 64-bit value
//! through `SeedableRng::seed_from_u64`. Uniform doubles are the 53-bit
//! `rand` standard draw, and Gaussians use the Box–Muller transform on pairs
//! of uniforms. Child seeds for indexed sub-streams come from SplitMix64.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ComplexMatrix, DensityMatrix, TripartiteDims};

/// SplitMix64 finalizer applied to `seed + (index + 1)·γ`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform on `(0, 1]`.
pub(crate) fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    1.0 - rng.gen::<f64>()
}

/// Pair of independent standard normals via Box–Muller.
pub(crate) fn gaussian_pair<R: Rng>(rng: &mut R) -> (f64, f64) {
    let u1 = open_unit(rng);
    let u2: f64 = rng.gen();
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = std::f64::consts::TAU * u2;
    (radius * angle.cos(), radius * angle.sin())
}

/// Standard complex Gaussian (real and imaginary parts each N(0, 1/2)).
pub(crate) fn complex_gaussian<R: Rng>(rng: &mut R) -> Complex64 {
    let (x, y) = gaussian_pair(rng);
    Complex64::new(x, y) * std::f64::consts::FRAC_1_SQRT_2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorKind {
    MaximallyMixed,
    Ginibre,
    Pure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GeneratorKind {
    GinibreFull,
    GinibreRank { rank: usize },
    PureRandom,
    Ghz,
    W,
    /// Independent states on A, B, C.
    Product { factors: [FactorKind; 3] },
    /// `ρ_A ⊗ ρ_BC` with full-rank diagonal `ρ_A` and `s` zeros on the diagonal of `ρ_BC`.
    Lemma2Construct { s: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub dims: TripartiteDims,
    pub kind: GeneratorKind,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn new(dims: TripartiteDims, kind: GeneratorKind, seed: u64) -> Self {
        GeneratorSpec { dims, kind, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let total = self.dims.total();
        let qubits = [2usize, 2, 2];
        match &self.kind {
            GeneratorKind::GinibreRank { rank } if *rank == 0 || *rank > total => {
                Err(Error::InvalidArgument(format!("rank {rank} outside [1, {total}]")))
            }
            GeneratorKind::Ghz | GeneratorKind::W if <[usize; 3]>::from(self.dims) != qubits => {
                Err(Error::InvalidArgument(format!(
                    "{:?} is defined on dims (2,2,2), got ({})",
                    self.kind, self.dims
                )))
            }
            GeneratorKind::Lemma2Construct { s } if *s >= self.dims.m() * self.dims.n() => {
                Err(Error::InvalidArgument(format!(
                    "s = {s} would leave rho_BC without support (MN = {})",
                    self.dims.m() * self.dims.n()
                )))
            }
            _ => Ok(()),
        }
    }
}

pub fn generate(spec: &GeneratorSpec) -> Result<DensityMatrix> {
    spec.validate()?;
    let dims = spec.dims;
    let total = dims.total();
    let mut rng = rng_from_seed(spec.seed);
    let matrix = match &spec.kind {
        GeneratorKind::GinibreFull => ginibre(total, total, &mut rng),
        GeneratorKind::GinibreRank { rank } => ginibre(total, *rank, &mut rng),
        GeneratorKind::PureRandom => random_pure(total, &mut rng),
        GeneratorKind::Ghz => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            basis_superposition(total, &[(dims.index(0, 0, 0), s), (dims.index(1, 1, 1), s)])
        }
        GeneratorKind::W => {
            let s = 1.0 / 3f64.sqrt();
            basis_superposition(
                total,
                &[
                    (dims.index(0, 0, 1), s),
                    (dims.index(0, 1, 0), s),
                    (dims.index(1, 0, 0), s),
                ],
            )
        }
        GeneratorKind::Product { factors } => {
            let mut m = factor(factors[0], dims.l(), derive_seed(spec.seed, 0));
            for (i, (&kind, dim)) in factors[1..].iter().zip([dims.m(), dims.n()]).enumerate() {
                m = m.kron(&factor(kind, dim, derive_seed(spec.seed, i as u64 + 1)));
            }
            m
        }
        GeneratorKind::Lemma2Construct { s } => {
            let rho_a = positive_diagonal(dims.l(), 0, &mut rng);
            let rho_bc = positive_diagonal(dims.m() * dims.n(), *s, &mut rng);
            ComplexMatrix::from_diagonal(&rho_a).kron(&ComplexMatrix::from_diagonal(&rho_bc))
        }
    };
    DensityMatrix::new(matrix, dims.factors())
}

/// Normalized `G G†` with `G` a `dim × cols` matrix of complex Gaussians.
fn ginibre<R: Rng>(dim: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    let g: Vec<Complex64> = (0..dim * cols).map(|_| complex_gaussian(rng)).collect();
    let mut m = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        for j in i..dim {
            let z: Complex64 = (0..cols).map(|k| g[i * cols + k] * g[j * cols + k].conj()).sum();
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
        m[(i, i)].im = 0.0;
    }
    let tr = m.trace().re;
    m.scale(1.0 / tr)
}

fn random_pure<R: Rng>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let v: Vec<Complex64> = (0..dim).map(|_| complex_gaussian(rng)).collect();
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let v: Vec<Complex64> = v.into_iter().map(|z| z / norm).collect();
    projector(&v)
}

fn projector(v: &[Complex64]) -> ComplexMatrix {
    let mut m = ComplexMatrix::outer(v);
    for i in 0..v.len() {
        m[(i, i)].im = 0.0;
    }
    m
}

fn basis_superposition(dim: usize, terms: &[(usize, f64)]) -> ComplexMatrix {
    let mut v = vec![Complex64::new(0.0, 0.0); dim];
    for &(i, amp) in terms {
        v[i] = Complex64::new(amp, 0.0);
    }
    projector(&v)
}

fn factor(kind: FactorKind, dim: usize, seed: u64) -> ComplexMatrix {
    let mut rng = rng_from_seed(seed);
    match kind {
        FactorKind::MaximallyMixed => ComplexMatrix::identity(dim).scale(1.0 / dim as f64),
        FactorKind::Ginibre => ginibre(dim, dim, &mut rng),
        FactorKind::Pure => random_pure(dim, &mut rng),
    }
}

/// `zeros` exact zeros followed by entries drawn from `[0.5, 1.5)`, normalized.
fn positive_diagonal<R: Rng>(len: usize, zeros: usize, rng: &mut R) -> Vec<f64> {
    let mut d: Vec<f64> = (0..len)
        .map(|i| if i < zeros { 0.0 } else { rng.gen_range(0.5..1.5) })
        .collect();
    let total: f64 = d.iter().sum();
    d.iter_mut().for_each(|x| *x /= total);
    d
}
