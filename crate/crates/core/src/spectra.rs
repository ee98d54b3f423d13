//! Ascending spectra, entropy, block-sum aggregation, majorization, and
//! numerical rank.
//!
//! Every vector here is sorted in *increasing* order. Under that convention
//! `y ≻ x` ("x is majorized by y") means each ascending prefix sum of `x`
//! is at least the matching prefix sum of `y`, with equal totals.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Absolute tolerance on prefix sums in [`majorized_by`].
pub const MAJORIZATION_TOL: f64 = 1e-9;
/// Entries above this count toward [`numerical_rank`].
pub const DEFAULT_RANK_THRESHOLD: f64 = 1e-10;
/// Largest total-mass drift that [`Spectrum::new`] silently renormalizes.
pub const NORMALIZATION_DRIFT_TOL: f64 = 1e-10;
/// Negative entries down to `-NEGATIVE_CLAMP_TOL` are clamped to zero.
pub const NEGATIVE_CLAMP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpectrumLabel {
    ABC,
    AB,
    BC,
    AC,
    A,
    B,
    C,
    Abstract,
}

/// Nonnegative ascending vector summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
    label: SpectrumLabel,
}

impl Spectrum {
    /// Clamps entries in `[-1e-10, 0)` to zero and rescales when the total
    /// drifts past rounding level but by at most `1e-10`; anything worse is
    /// rejected.
    pub fn new(values: Vec<f64>, label: SpectrumLabel) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSpectrum("empty vector".into()));
        }
        let mut values = values;
        for x in values.iter_mut() {
            if !x.is_finite() {
                return Err(Error::InvalidSpectrum(format!("non-finite entry {x}")));
            }
            if *x < 0.0 {
                if *x < -NEGATIVE_CLAMP_TOL {
                    return Err(Error::InvalidSpectrum(format!("negative entry {x:e}")));
                }
                *x = 0.0;
            }
        }
        if let Some(w) = values.windows(2).find(|w| w[0] > w[1]) {
            return Err(Error::InvalidSpectrum(format!(
                "not ascending: {} > {}",
                w[0], w[1]
            )));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_DRIFT_TOL {
            return Err(Error::InvalidSpectrum(format!("sums to {total}, expected 1")));
        }
        // drift at rounding level is left alone so construction is idempotent
        if (total - 1.0).abs() > values.len() as f64 * f64::EPSILON {
            for x in values.iter_mut() {
                *x /= total;
            }
        }
        Ok(Spectrum { values, label })
    }

    /// Sorts first; for raw eigenvalue output.
    pub fn from_eigenvalues(mut values: Vec<f64>, label: SpectrumLabel) -> Result<Self> {
        values.sort_by(f64::total_cmp);
        Self::new(values, label)
    }

    pub fn uniform(len: usize, label: SpectrumLabel) -> Self {
        assert!(len > 0, "uniform spectrum needs a positive length");
        Spectrum {
            values: vec![1.0 / len as f64; len],
            label,
        }
    }

    /// `zeros` exact zeros followed by a uniform block on the remaining entries.
    pub fn uniform_on_support(len: usize, zeros: usize, label: SpectrumLabel) -> Result<Self> {
        if zeros >= len {
            return Err(Error::InvalidArgument(format!(
                "{zeros} zeros leave no support in a vector of length {len}"
            )));
        }
        let mut values = vec![0.0; zeros];
        values.extend(std::iter::repeat(1.0 / (len - zeros) as f64).take(len - zeros));
        Ok(Spectrum { values, label })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn label(&self) -> SpectrumLabel {
        self.label
    }

    pub fn with_label(mut self, label: SpectrumLabel) -> Self {
        self.label = label;
        self
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl fmt::Display for Spectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}(", self.label)?;
        for (i, x) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{x:.6}")?;
        }
        f.write_str(")")
    }
}

impl Serialize for Spectrum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.values.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Spectrum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<f64>::deserialize(d)?;
        Spectrum::new(values, SpectrumLabel::Abstract).map_err(serde::de::Error::custom)
    }
}

/// Consecutive block sums of an ascending spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregatedSpectrum {
    pub values: Vec<f64>,
    pub source: SpectrumLabel,
    pub block: usize,
}

/// Von Neumann / Shannon entropy in nats with `0 ln 0 = 0`.
pub fn entropy(s: &Spectrum) -> f64 {
    entropy_of(s.values())
}

pub(crate) fn entropy_of(values: &[f64]) -> f64 {
    values
        .iter()
        .map(|&x| if x > 0.0 { -x * x.ln() } else { 0.0 })
        .sum()
}

pub fn aggregate(s: &Spectrum, block: usize) -> Result<AggregatedSpectrum> {
    let values = block_sums(s.values(), block)?;
    debug_assert!(values.windows(2).all(|w| w[0] <= w[1]));
    Ok(AggregatedSpectrum {
        values,
        source: s.label(),
        block,
    })
}

pub(crate) fn block_sums(values: &[f64], block: usize) -> Result<Vec<f64>> {
    if block == 0 || values.len() % block != 0 {
        return Err(Error::InvalidArgument(format!(
            "block size {block} does not divide length {}",
            values.len()
        )));
    }
    Ok(values.chunks(block).map(|c| c.iter().sum()).collect())
}

/// Outcome of a majorization test, with `margins[k-1] = Σ_{i≤k} x_i − Σ_{i≤k} y_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Majorization {
    pub holds: bool,
    pub margin: f64,
    pub margins: Vec<f64>,
}

/// Is `x` majorized by `y` (`y ≻ x`)? Inputs are sorted ascending if needed.
pub fn majorized_by(x: &[f64], y: &[f64]) -> Result<Majorization> {
    majorized_by_with_tol(x, y, MAJORIZATION_TOL)
}

pub fn majorized_by_with_tol(x: &[f64], y: &[f64], tol: f64) -> Result<Majorization> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "majorization needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::InvalidArgument("majorization of empty vectors".into()));
    }
    let x = ascending(x);
    let y = ascending(y);
    let mut sx = 0.0;
    let mut sy = 0.0;
    let margins: Vec<f64> = x
        .iter()
        .zip(y.iter())
        .map(|(a, b)| {
            sx += a;
            sy += b;
            sx - sy
        })
        .collect();
    let last = margins[margins.len() - 1];
    let holds = margins.iter().all(|&m| m >= -tol) && last.abs() <= tol;
    let margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Majorization {
        holds,
        margin,
        margins,
    })
}

fn ascending(v: &[f64]) -> std::borrow::Cow<'_, [f64]> {
    if v.windows(2).all(|w| w[0] <= w[1]) {
        std::borrow::Cow::Borrowed(v)
    } else {
        let mut owned = v.to_vec();
        owned.sort_by(f64::total_cmp);
        std::borrow::Cow::Owned(owned)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankInfo {
    pub rank: usize,
    pub zero_count: usize,
}

pub fn numerical_rank(s: &Spectrum, threshold: f64) -> RankInfo {
    rank_of(s.values(), threshold)
}

pub(crate) fn rank_of(values: &[f64], threshold: f64) -> RankInfo {
    let rank = values.iter().filter(|&&x| x > threshold).count();
    RankInfo {
        rank,
        zero_count: values.len() - rank,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spec(v: &[f64]) -> Spectrum {
        Spectrum::new(v.to_vec(), SpectrumLabel::Abstract).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(entropy(&Spectrum::uniform(4, SpectrumLabel::Abstract)), 4f64.ln(), epsilon = 1e-15);
        assert_eq!(entropy(&spec(&[0.0, 0.0, 0.0, 1.0])), 0.0);
        // -0.25 ln 0.25 - 0.75 ln 0.75
        assert_abs_diff_eq!(entropy(&spec(&[0.25, 0.75])), 0.562_335_144_618_808_6, epsilon = 1e-15);
    }

    #[test]
    fn aggregate_examples() {
        let a = aggregate(&spec(&[0.1, 0.2, 0.3, 0.4]), 2).unwrap();
        assert_abs_diff_eq!(a.values[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(a.values[1], 0.7, epsilon = 1e-15);
        let u = aggregate(&Spectrum::uniform(8, SpectrumLabel::ABC), 2).unwrap();
        assert_eq!(u.values, vec![0.25; 4]);
        assert_eq!(u.source, SpectrumLabel::ABC);
        assert_eq!(aggregate(&spec(&[0.0, 0.0, 0.0, 1.0]), 2).unwrap().values, vec![0.0, 1.0]);
        assert!(aggregate(&spec(&[0.1, 0.2, 0.7]), 2).is_err());
        assert!(aggregate(&spec(&[0.1, 0.2, 0.7]), 0).is_err());
    }

    #[test]
    fn majorization_examples() {
        let u = [0.25; 4];
        let p = [0.0, 0.0, 0.0, 1.0];
        assert!(majorized_by(&u, &p).unwrap().holds);
        let rev = majorized_by(&p, &u).unwrap();
        assert!(!rev.holds);
        assert_abs_diff_eq!(rev.margin, -0.75, epsilon = 1e-15);
        let x = [0.1, 0.2, 0.3, 0.4];
        let refl = majorized_by(&x, &x).unwrap();
        assert!(refl.holds);
        assert_eq!(refl.margin, 0.0);
        assert!(majorized_by(&u, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn majorization_sorts_unsorted_input() {
        let m = majorized_by(&[0.25; 4], &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(m.holds);
    }

    #[test]
    fn majorization_requires_equal_totals() {
        let m = majorized_by(&[0.5, 0.5], &[0.2, 0.3]).unwrap();
        assert!(!m.holds);
    }

    #[test]
    fn rank_examples() {
        let r = numerical_rank(&spec(&[0.0, 1e-14, 0.5, 0.5]), DEFAULT_RANK_THRESHOLD);
        assert_eq!((r.rank, r.zero_count), (2, 2));
        assert_eq!(numerical_rank(&Spectrum::uniform(8, SpectrumLabel::ABC), 1e-10).rank, 8);
        assert_eq!(numerical_rank(&spec(&[0.0, 0.0, 0.0, 1.0]), 1e-10).rank, 1);
    }

    #[test]
    fn spectrum_validation() {
        assert!(Spectrum::new(vec![0.6, 0.4], SpectrumLabel::B).is_err());
        assert!(Spectrum::new(vec![0.2, 0.7], SpectrumLabel::B).is_err());
        assert!(Spectrum::new(vec![-0.1, 1.1], SpectrumLabel::B).is_err());
        let s = Spectrum::new(vec![-1e-12, 0.5, 0.5 + 1e-12], SpectrumLabel::B).unwrap();
        assert_eq!(s.values()[0], 0.0);
        assert_abs_diff_eq!(s.values().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.starts_with('['));
    }

    fn ascending_simplex(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, len).prop_filter_map("degenerate", |mut v| {
            let total: f64 = v.iter().sum();
            if total <= 1e-6 {
                return None;
            }
            v.iter_mut().for_each(|x| *x /= total);
            v.sort_by(f64::total_cmp);
            Some(v)
        })
    }

    proptest! {
        #[test]
        fn aggregate_preserves_mass_and_order(v in ascending_simplex(12), block in prop::sample::select(vec![1usize, 2, 3, 4, 6, 12])) {
            let s = Spectrum::new(v, SpectrumLabel::Abstract).unwrap();
            let a = aggregate(&s, block).unwrap();
            prop_assert_eq!(a.values.len(), 12 / block);
            prop_assert!((a.values.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            prop_assert!(a.values.windows(2).all(|w| w[0] <= w[1]));
            let uniform = vec![1.0 / a.values.len() as f64; a.values.len()];
            prop_assert!(majorized_by(&uniform, &a.values).unwrap().holds);
        }

        #[test]
        fn majorization_reflexive_and_transitive(
            x in ascending_simplex(6), y in ascending_simplex(6), z in ascending_simplex(6)
        ) {
            prop_assert!(majorized_by(&x, &x).unwrap().holds);
            let xy = majorized_by(&x, &y).unwrap();
            let yz = majorized_by(&y, &z).unwrap();
            if xy.holds && yz.holds {
                let xz = majorized_by(&x, &z).unwrap();
                // prefix-sum margins add along the chain
                for k in 0..6 {
                    prop_assert!((xz.margins[k] - (xy.margins[k] + yz.margins[k])).abs() <= 1e-12);
                }
                prop_assert!(xz.margin >= -2.0 * MAJORIZATION_TOL);
            }
        }

        #[test]
        fn entropy_schur_concave_under_averaging(
            y in ascending_simplex(8), i in 0usize..8, j in 0usize..8, t in 0.0f64..1.0
        ) {
            // A T-transform of y yields x with y ≻ x.
            let mut x = y.clone();
            let (a, b) = (y[i], y[j]);
            x[i] = t * a + (1.0 - t) * b;
            x[j] = (1.0 - t) * a + t * b;
            x.sort_by(f64::total_cmp);
            let m = majorized_by(&x, &y).unwrap();
            prop_assert!(m.holds);
            prop_assert!(entropy_of(&x) >= entropy_of(&y) - 1e-9);
        }

        #[test]
        fn entropy_bounded_by_log_length(v in ascending_simplex(7)) {
            let s = Spectrum::new(v, SpectrumLabel::Abstract).unwrap();
            let h = entropy(&s);
            prop_assert!(h >= 0.0 && h <= 7f64.ln() + 1e-12);
        }
    }
}
