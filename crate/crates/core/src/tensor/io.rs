//! JSON density-matrix documents:
//! `{"dims": [L, M, N], "entries": [[re, im], ...]}` with `(LMN)^2` row-major entries.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::density::{DensityMatrix, TripartiteDims};
use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityDocument {
    dims: [usize; 3],
    entries: Vec<[f64; 2]>,
}

pub fn density_from_json(text: &str) -> Result<DensityMatrix> {
    let doc: DensityDocument = serde_json::from_str(text)?;
    let dims = TripartiteDims::try_from(doc.dims)?;
    let expected = dims.total() * dims.total();
    if doc.entries.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "dims {dims} need {expected} entries, found {}",
            doc.entries.len()
        )));
    }
    if doc.entries.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Parse("non-finite matrix entry".into()));
    }
    let entries = doc
        .entries
        .into_iter()
        .map(|[re, im]| Complex64::new(re, im))
        .collect();
    DensityMatrix::tripartite(ComplexMatrix::from_row_major(entries)?, dims)
}

pub fn density_to_json(rho: &DensityMatrix) -> Result<String> {
    let dims = rho.require_tripartite()?;
    let doc = DensityDocument {
        dims: dims.into(),
        entries: rho.matrix().entries().iter().map(|z| [z.re, z.im]).collect(),
    };
    Ok(serde_json::to_string(&doc)?)
}

pub fn read_density(path: &Path) -> Result<DensityMatrix> {
    density_from_json(&std::fs::read_to_string(path)?)
}

pub fn write_density(path: &Path, rho: &DensityMatrix) -> Result<()> {
    std::fs::write(path, density_to_json(rho)?)?;
    Ok(())
}
