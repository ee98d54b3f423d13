//! Linear constraint system for one support pattern, and Euclidean
//! projection onto it.
//!
//! The four vectors are stored back to back as `abc | ab | bc | b`. Entries
//! inside a vector's zero prefix are frozen at zero and never appear in a row.

use serde::{Deserialize, Serialize};

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, ZeroConeT,
};

use super::FeasibleRegionSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Normalization,
    Ordering,
    Floor,
    AbByAbcBlocks,
    BcByAbcBlocks,
    BByBcBlocks,
    BByAbBlocks,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Normalization,
        Family::Ordering,
        Family::Floor,
        Family::AbByAbcBlocks,
        Family::BcByAbcBlocks,
        Family::BByBcBlocks,
        Family::BByAbBlocks,
    ];
}

#[derive(Debug, Clone)]
struct Row {
    /// Indices with coefficient +1.
    plus: Vec<usize>,
    /// Indices with coefficient -1.
    minus: Vec<usize>,
    rhs: f64,
    equality: bool,
    family: Family,
    norm_sq: f64,
}

impl Row {
    fn new(plus: Vec<usize>, minus: Vec<usize>, rhs: f64, equality: bool, family: Family) -> Option<Row> {
        let norm_sq = (plus.len() + minus.len()) as f64;
        (norm_sq > 0.0).then_some(Row {
            plus,
            minus,
            rhs,
            equality,
            family,
            norm_sq,
        })
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.plus.iter().map(|&i| x[i]).sum::<f64>() - self.minus.iter().map(|&i| x[i]).sum::<f64>()
    }

    /// Positive when violated.
    fn violation(&self, x: &[f64]) -> f64 {
        let gap = self.rhs - self.value(x);
        if self.equality {
            gap.abs()
        } else {
            gap.max(0.0)
        }
    }

    fn project(&self, x: &mut [f64]) {
        let gap = self.rhs - self.value(x);
        if !self.equality && gap <= 0.0 {
            return;
        }
        let step = gap / self.norm_sq;
        for &i in &self.plus {
            x[i] += step;
        }
        for &i in &self.minus {
            x[i] -= step;
        }
    }
}

/// Offsets of the four vectors inside the flat variable array.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Layout {
    pub abc: (usize, usize),
    pub ab: (usize, usize),
    pub bc: (usize, usize),
    pub b: (usize, usize),
}

impl Layout {
    pub fn new(spec: &FeasibleRegionSpec) -> Layout {
        let d = spec.dims;
        let (l, m, n) = (d.l(), d.m(), d.n());
        let abc = (0, l * m * n);
        let ab = (abc.1, abc.1 + l * m);
        let bc = (ab.1, ab.1 + m * n);
        let b = (bc.1, bc.1 + m);
        Layout { abc, ab, bc, b }
    }

    pub fn vectors(&self) -> [(usize, usize); 4] {
        [self.abc, self.ab, self.bc, self.b]
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Polytope {
    rows: Vec<Row>,
    pub layout: Layout,
    /// Free (support) indices of each vector, in layout order.
    pub support: [Vec<usize>; 4],
}

/// Largest violation per constraint family.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResiduals {
    pub normalization: f64,
    pub ordering: f64,
    pub floor: f64,
    pub ab_by_abc_blocks: f64,
    pub bc_by_abc_blocks: f64,
    pub b_by_bc_blocks: f64,
    pub b_by_ab_blocks: f64,
}

impl ConstraintResiduals {
    pub fn max(&self) -> f64 {
        [
            self.normalization,
            self.ordering,
            self.floor,
            self.ab_by_abc_blocks,
            self.bc_by_abc_blocks,
            self.b_by_bc_blocks,
            self.b_by_ab_blocks,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    fn slot(&mut self, f: Family) -> &mut f64 {
        match f {
            Family::Normalization => &mut self.normalization,
            Family::Ordering => &mut self.ordering,
            Family::Floor => &mut self.floor,
            Family::AbByAbcBlocks => &mut self.ab_by_abc_blocks,
            Family::BcByAbcBlocks => &mut self.bc_by_abc_blocks,
            Family::BByBcBlocks => &mut self.b_by_bc_blocks,
            Family::BByAbBlocks => &mut self.b_by_ab_blocks,
        }
    }
}

impl Polytope {
    pub fn new(spec: &FeasibleRegionSpec) -> Polytope {
        let layout = Layout::new(spec);
        let p = spec.pattern;
        let zeros = [p.abc, p.ab, p.bc, p.b];
        let support: [Vec<usize>; 4] = std::array::from_fn(|k| {
            let (lo, hi) = layout.vectors()[k];
            (lo + zeros[k]..hi).collect()
        });
        let free = |start: usize, count: usize, zero: usize| -> Vec<usize> {
            // first `count` entries of a vector starting at `start`, skipping its zero prefix
            (start + zero.min(count)..start + count).collect()
        };

        let mut rows = Vec::new();
        for (k, sup) in support.iter().enumerate() {
            rows.extend(Row::new(sup.clone(), vec![], 1.0, true, Family::Normalization));
            for w in sup.windows(2) {
                rows.extend(Row::new(vec![w[1]], vec![w[0]], 0.0, false, Family::Ordering));
            }
            rows.extend(Row::new(vec![sup[0]], vec![], spec.support_floor, false, Family::Floor));
            debug_assert_eq!(sup.len() + zeros[k], layout.vectors()[k].1 - layout.vectors()[k].0);
        }

        let d = spec.dims;
        let (l, m, n) = (d.l(), d.m(), d.n());
        // prefix(small, i) >= prefix(large, block·i) for i < len(small)
        let mut prefix_rows = |small: usize, small_zero: usize, small_len: usize, large: usize, large_zero: usize, block: usize, family: Family| {
            for i in 1..small_len {
                rows.extend(Row::new(
                    free(small, i, small_zero),
                    free(large, block * i, large_zero),
                    0.0,
                    false,
                    family,
                ));
            }
        };
        prefix_rows(layout.ab.0, p.ab, l * m, layout.abc.0, p.abc, n, Family::AbByAbcBlocks);
        prefix_rows(layout.bc.0, p.bc, m * n, layout.abc.0, p.abc, l, Family::BcByAbcBlocks);
        prefix_rows(layout.b.0, p.b, m, layout.bc.0, p.bc, n, Family::BByBcBlocks);
        prefix_rows(layout.b.0, p.b, m, layout.ab.0, p.ab, l, Family::BByAbBlocks);

        Polytope {
            rows,
            layout,
            support,
        }
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.rows.iter().map(|r| r.violation(x)).fold(0.0, f64::max)
    }

    pub fn residuals(&self, x: &[f64]) -> ConstraintResiduals {
        let mut out = ConstraintResiduals::default();
        for r in &self.rows {
            let slot = out.slot(r.family);
            *slot = slot.max(r.violation(x));
        }
        out
    }

    /// Euclidean projection of `x` onto the polytope: the quadratic program
    /// `min ½‖z − x‖²` over the rows is solved by an interior-point method,
    /// then cyclic row projections run until the largest violation is at
    /// most `tol`. If the solver fails the cyclic projections start from `x`
    /// itself and the result is feasible but not necessarily nearest.
    /// Returns the number of cyclic sweeps, or `None` if `max_sweeps` ran out.
    pub fn project(&self, x: &mut [f64], tol: f64, max_sweeps: usize) -> Option<usize> {
        if let Some(z) = self.solve_projection(x) {
            x.copy_from_slice(&z);
        }
        for sweep in 0..max_sweeps {
            if self.max_violation(x) <= tol {
                return Some(sweep);
            }
            for r in &self.rows {
                r.project(x);
            }
        }
        (self.max_violation(x) <= tol).then_some(max_sweeps)
    }

    fn solve_projection(&self, x: &[f64]) -> Option<Vec<f64>> {
        let n = x.len();
        // solver form: A z + s = b with s in {0} for equalities and s >= 0 otherwise,
        // so a row `a·z >= rhs` enters as `-a·z + s = -rhs`
        let ordered: Vec<&Row> = self
            .rows
            .iter()
            .filter(|r| r.equality)
            .chain(self.rows.iter().filter(|r| !r.equality))
            .collect();
        let equalities = self.rows.iter().filter(|r| r.equality).count();
        let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (k, r) in ordered.iter().enumerate() {
            for &j in &r.plus {
                columns[j].push((k, -1.0));
            }
            for &j in &r.minus {
                columns[j].push((k, 1.0));
            }
        }
        let mut colptr = vec![0];
        let mut rowval = Vec::new();
        let mut nzval = Vec::new();
        for col in &columns {
            for &(k, v) in col {
                rowval.push(k);
                nzval.push(v);
            }
            colptr.push(rowval.len());
        }
        let a = CscMatrix::new(ordered.len(), n, colptr, rowval, nzval);
        let b: Vec<f64> = ordered.iter().map(|r| -r.rhs).collect();
        let p = CscMatrix::identity(n);
        let q: Vec<f64> = x.iter().map(|v| -v).collect();
        let cones = [ZeroConeT(equalities), NonnegativeConeT(ordered.len() - equalities)];
        let mut solver = DefaultSolver::new(&p, &q, &a, &b, &cones, projection_settings()).ok()?;
        solver.solve();
        matches!(solver.solution.status, SolverStatus::Solved | SolverStatus::AlmostSolved)
            .then(|| solver.solution.x.clone())
    }

    #[cfg(test)]
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }
}

fn projection_settings() -> DefaultSettings<f64> {
    DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(1e-12)
        .tol_gap_rel(1e-12)
        .tol_feas(1e-12)
        .build()
        .expect("valid solver settings")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minimizer::{FeasibleRegionSpec, SupportPattern};
    use crate::tensor::TripartiteDims;

    fn spec(pattern: SupportPattern) -> FeasibleRegionSpec {
        FeasibleRegionSpec::new(TripartiteDims::new(2, 2, 2).unwrap(), pattern).unwrap()
    }

    #[test]
    fn row_counts_full_support() {
        let p = Polytope::new(&spec(SupportPattern::FULL));
        // 4 normalization + (7+3+3+1) ordering + 4 floor + 3 + 3 + 1 + 1 prefix rows
        assert_eq!(p.row_count(), 4 + 14 + 4 + 8);
    }

    #[test]
    fn uniform_point_is_feasible() {
        let p = Polytope::new(&spec(SupportPattern::FULL));
        let mut x = vec![0.125; 8];
        x.extend([0.25; 4]);
        x.extend([0.25; 4]);
        x.extend([0.5; 2]);
        assert_eq!(p.max_violation(&x), 0.0);
    }

    #[test]
    fn projection_reaches_tolerance_from_perturbed_point() {
        let p = Polytope::new(&spec(SupportPattern::FULL));
        let mut x = vec![0.1, 0.3, 0.05, 0.1, 0.1, 0.1, 0.2, 0.1];
        x.extend([0.4, 0.3, 0.2, 0.2]);
        x.extend([0.1, 0.2, 0.3, 0.3]);
        x.extend([0.7, 0.4]);
        assert!(p.max_violation(&x) > 0.1);
        p.project(&mut x, 1e-10, 100_000).expect("projection converges");
        assert!(p.max_violation(&x) <= 1e-10);
        let r = p.residuals(&x);
        assert!(r.max() <= 1e-10);
    }

    #[test]
    fn zero_prefix_variables_untouched() {
        let pattern = SupportPattern { abc: 4, ab: 2, bc: 2, b: 1 };
        let p = Polytope::new(&spec(pattern));
        let mut x = vec![0.0; 18];
        for &i in p.support.iter().flatten() {
            x[i] = 0.3;
        }
        p.project(&mut x, 1e-10, 100_000).unwrap();
        assert_eq!(&x[0..4], &[0.0; 4]);
        assert_eq!(&x[8..10], &[0.0; 2]);
        assert_eq!(&x[12..14], &[0.0; 2]);
        assert_eq!(x[16], 0.0);
        assert!((x[17] - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn projection_is_nearest_point() {
        // (x - p)·(y - p) <= 0 for every feasible y characterizes the projection p
        let spec = spec(SupportPattern::FULL);
        let poly = Polytope::new(&spec);
        let flat = |t: &crate::conditions::SpectraTuple| -> Vec<f64> {
            [&t.lambda_abc, &t.lambda_ab, &t.lambda_bc, &t.lambda_b]
                .iter()
                .flat_map(|s| s.values().to_vec())
                .collect()
        };
        let mut x = vec![0.3, 0.0, 0.1, 0.05, 0.2, 0.1, 0.1, 0.2, 0.5, 0.1, 0.2, 0.3, 0.1, 0.1, 0.6, 0.2, 0.7, 0.2];
        let origin = x.clone();
        poly.project(&mut x, 1e-10, 10_000).unwrap();
        for seed in 0..50 {
            let y = flat(&crate::minimizer::sample_feasible(&spec, seed).unwrap());
            let inner: f64 = (0..x.len()).map(|i| (origin[i] - x[i]) * (y[i] - x[i])).sum();
            assert!(inner <= 1e-9, "seed {seed}: {inner}");
        }
    }
}
