use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

use ssalab::conditions::{check_lemma1, ssa_gap, SpectraTuple};
use ssalab::minimizer::{minimize_f, objective_f, oracle_scan, FeasibleRegionSpec, SupportPattern};
use ssalab::spectra::{majorized_by, numerical_rank, DEFAULT_RANK_THRESHOLD};
use ssalab::stategen::{derive_seed, generate, rng_from_seed, GeneratorKind, GeneratorSpec};
use ssalab::tensor::{
    hermitian_eigenvalues, partial_trace, spectrum_of, ComplexMatrix, DensityMatrix, PartySet, TripartiteDims,
};

fn dims(l: usize, m: usize, n: usize) -> TripartiteDims {
    TripartiteDims::new(l, m, n).unwrap()
}

fn ginibre(d: TripartiteDims, seed: u64) -> DensityMatrix {
    generate(&GeneratorSpec::new(d, GeneratorKind::GinibreFull, seed)).unwrap()
}

fn to_nalgebra(m: &ComplexMatrix) -> DMatrix<Complex64> {
    let d = m.dim();
    DMatrix::from_fn(d, d, |i, j| m[(i, j)])
}

fn from_nalgebra(m: &DMatrix<Complex64>) -> ComplexMatrix {
    let rows: Vec<Vec<Complex64>> = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect();
    ComplexMatrix::from_rows(&rows).unwrap()
}

fn random_hermitian(dim: usize, seed: u64) -> ComplexMatrix {
    let mut rng = rng_from_seed(seed);
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            m[(i, j)] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    from_nalgebra(&((&m + m.adjoint()) * Complex64::new(0.5, 0.0)))
}

/// Haar-ish unitary from the QR factor of a complex Gaussian-like matrix.
fn random_unitary(dim: usize, seed: u64) -> DMatrix<Complex64> {
    let mut rng = rng_from_seed(seed);
    let m = DMatrix::<Complex64>::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    m.qr().q()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenvalues_match_independent_solver(dim in 1usize..10, seed in any::<u64>()) {
        let m = random_hermitian(dim, seed);
        let ours = ssalab::tensor::hermitian_eigenvalues(&m);
        // random Hermitian matrices are indefinite, so compare before clamping
        let mut theirs: Vec<f64> = to_nalgebra(&m).symmetric_eigenvalues().iter().copied().collect();
        theirs.sort_by(f64::total_cmp);
        match ours {
            Ok(v) => prop_assert!(max_diff(&v, &theirs) <= 1e-9 * (1.0 + m.frobenius_norm())),
            Err(_) => prop_assert!(theirs[0] < -1e-10),
        }
    }

    #[test]
    fn eigen_power_sums_match_traces(seed in any::<u64>()) {
        let rho = ginibre(dims(2, 3, 2), seed);
        let m = rho.matrix();
        let vals = hermitian_eigenvalues(m).unwrap();
        let sum: f64 = vals.iter().sum();
        let sum_sq: f64 = vals.iter().map(|v| v * v).sum();
        prop_assert!((sum - m.trace().re).abs() <= 1e-12);
        prop_assert!((sum_sq - m.frobenius_norm().powi(2)).abs() <= 1e-12);
    }

    #[test]
    fn partial_traces_commute(seed in any::<u64>(), l in 1usize..4, m in 1usize..4, n in 1usize..4) {
        let rho = ginibre(dims(l, m, n), seed);
        let via_ab = partial_trace(&partial_trace(&rho, PartySet::AB).unwrap(), PartySet::B).unwrap();
        let via_bc = partial_trace(&partial_trace(&rho, PartySet::BC).unwrap(), PartySet::B).unwrap();
        let direct = partial_trace(&rho, PartySet::B).unwrap();
        for other in [&via_ab, &via_bc] {
            let diff = other.matrix().entries().iter().zip(direct.matrix().entries())
                .map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prop_assert!(diff <= 1e-14);
        }
    }

    #[test]
    fn partial_trace_preserves_trace(seed in any::<u64>(), mask in 1u8..8) {
        let rho = ginibre(dims(2, 3, 2), seed);
        let keep = PartySet::from_bits(mask).unwrap();
        let reduced = partial_trace(&rho, keep).unwrap();
        prop_assert!((reduced.matrix().trace().re - 1.0).abs() <= 1e-12);
        prop_assert!(reduced.matrix().trace().im.abs() <= 1e-12);
    }

    #[test]
    fn local_unitaries_leave_spectra_and_gap_unchanged(seed in any::<u64>()) {
        let d = dims(2, 2, 3);
        let rho = ginibre(d, seed);
        let u_a = random_unitary(2, derive_seed(seed, 1));
        let u_c = random_unitary(3, derive_seed(seed, 2));
        let id_b = DMatrix::<Complex64>::identity(2, 2);
        let u = u_a.kronecker(&id_b).kronecker(&u_c);
        let rotated = &u * to_nalgebra(rho.matrix()) * u.adjoint();
        let rotated = DensityMatrix::tripartite(from_nalgebra(&rotated), d).unwrap();

        for keep in [PartySet::ABC, PartySet::AB, PartySet::BC, PartySet::B] {
            let a = spectrum_of(&partial_trace(&rho, keep).unwrap()).unwrap();
            let b = spectrum_of(&partial_trace(&rotated, keep).unwrap()).unwrap();
            prop_assert!(max_diff(a.values(), b.values()) <= 1e-10);
        }
        prop_assert!((ssa_gap(&rho).unwrap() - ssa_gap(&rotated).unwrap()).abs() <= 1e-10);
    }

    #[test]
    fn objective_on_state_spectra_equals_gap(seed in any::<u64>()) {
        let rho = ginibre(dims(2, 2, 2), seed);
        let t = SpectraTuple::from_state(&rho).unwrap();
        prop_assert!((objective_f(&t) - ssa_gap(&rho).unwrap()).abs() <= 1e-12);
    }

    #[test]
    fn lemma1_holds_on_random_low_rank_states(seed in any::<u64>(), rank in 1usize..8) {
        let rho = generate(&GeneratorSpec::new(dims(2, 2, 2), GeneratorKind::GinibreRank { rank }, seed)).unwrap();
        prop_assert!(check_lemma1(&rho).unwrap().min_margin() >= -1e-9);
    }
}

#[test]
fn ginibre_rank_is_exact_over_many_draws() {
    let d = dims(2, 2, 2);
    for i in 0..1000u64 {
        let rank = 1 + (i as usize % 8);
        let rho = generate(&GeneratorSpec::new(d, GeneratorKind::GinibreRank { rank }, derive_seed(99, i))).unwrap();
        let spectrum = spectrum_of(&rho).unwrap();
        assert_eq!(numerical_rank(&spectrum, DEFAULT_RANK_THRESHOLD).rank, rank, "draw {i}");
    }
}

/// Moves `t` of the gap between entries `i < j` toward their mean.
fn t_transform(v: &[f64], i: usize, j: usize, t: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    let shift = t * (v[j] - v[i]) / 2.0;
    out[i] += shift;
    out[j] -= shift;
    out.sort_by(f64::total_cmp);
    out
}

#[test]
fn majorization_chains_are_transitive() {
    let mut rng = rng_from_seed(5);
    for _ in 0..1000 {
        let len = rng.gen_range(2..9);
        let mut z: Vec<f64> = (0..len).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = z.iter().sum();
        z.iter_mut().for_each(|v| *v /= total);
        z.sort_by(f64::total_cmp);
        let step = |v: &[f64], rng: &mut rand_chacha::ChaCha8Rng| {
            let i = rng.gen_range(0..len - 1);
            let j = rng.gen_range(i + 1..len);
            t_transform(v, i, j, rng.gen::<f64>())
        };
        let y = step(&z, &mut rng);
        let x = step(&y, &mut rng);
        assert!(majorized_by(&y, &z).unwrap().holds);
        assert!(majorized_by(&x, &y).unwrap().holds);
        assert!(majorized_by(&x, &z).unwrap().holds);
    }
}

#[test]
fn minimizer_is_no_worse_than_the_oracle() {
    let d = dims(2, 2, 2);
    for pattern in [SupportPattern::FULL, "abc=4,ab=2,bc=2,b=1".parse().unwrap()] {
        let spec = FeasibleRegionSpec::new(d, pattern).unwrap();
        let best = minimize_f(&spec, 8, 11).unwrap();
        let oracle = oracle_scan(&spec, 2000, 11).unwrap();
        assert!(best.objective <= oracle.min_objective + 1e-7, "{pattern}");
        assert!(best.feasibility_residual <= 1e-6);
        for run in &best.runs {
            assert!(run.final_objective <= run.start_objective);
        }
    }
}
