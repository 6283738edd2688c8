//! Readers for the `recover` file mode.
//!
//! Both files are headerless CSV. Lines starting with `#` are skipped.
//! The points file holds one point per line in ambient coordinates. The
//! sigma file holds one `d x d` block per line, row-major, in point order.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use kernrank_core::{DMatrix, ManifoldPoint, ManifoldSpec, SampleSet};

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: malformed line {}", path.display(), line + 1))?;
        let row = record
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("{}: non-numeric entry on line {}", path.display(), line + 1))?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{} has no data lines", path.display());
    }
    Ok(rows)
}

pub fn read_points(path: &Path, manifold: ManifoldSpec, seed: u64) -> Result<SampleSet> {
    let points = read_rows(path)?
        .into_iter()
        .enumerate()
        .map(|(i, row)| manifold.point(row).map_err(|e| anyhow!("{}: point {i}: {e}", path.display())))
        .collect::<Result<Vec<ManifoldPoint>>>()?;
    SampleSet::from_points(manifold, points, seed).map_err(|e| anyhow!("{e}"))
}

pub fn read_sigmas(path: &Path, d: usize) -> Result<Vec<DMatrix<f64>>> {
    read_rows(path)?
        .into_iter()
        .enumerate()
        .map(|(j, row)| {
            if row.len() != d * d {
                bail!("{}: block {j} has {} entries, expected {}", path.display(), row.len(), d * d);
            }
            if row.iter().any(|x| !x.is_finite()) {
                bail!("{}: block {j} has a non-finite entry", path.display());
            }
            Ok(DMatrix::from_row_slice(d, d, &row))
        })
        .collect()
}
