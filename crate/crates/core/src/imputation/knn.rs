//! k-nearest-neighbour imputation over rows with missing cells.

use super::Imputed;
use crate::par::{self, Execution};
use crate::{stats, Error, Result, SparseMatrix};

/// Masked distance: mean squared difference over features observed in both
/// rows. `None` when the rows share no observed feature.
pub(crate) fn masked_distance(data: &SparseMatrix, a: usize, b: usize) -> Option<f64> {
    let (va, ma) = (data.row_values(a), data.row_mask(a));
    let (vb, mb) = (data.row_values(b), data.row_mask(b));
    let mut sum = 0.0;
    let mut count = 0usize;
    for c in 0..data.n_cols() {
        if ma[c] && mb[c] {
            let d = va[c] - vb[c];
            sum += d * d;
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

struct RowFill {
    row: usize,
    cells: Vec<(usize, f64)>,
    fallbacks: Vec<usize>,
}

pub(super) fn impute_knn(data: &SparseMatrix, k: usize, exec: Execution) -> Result<Imputed> {
    if k == 0 {
        return Err(Error::Parameter("knn needs k >= 1".into()));
    }
    let n_cols = data.n_cols();
    let mut column_means = Vec::with_capacity(n_cols);
    for j in 0..n_cols {
        column_means.push(stats::mean(&data.observed_column(j)));
    }
    let targets: Vec<usize> = (0..data.n_rows())
        .filter(|&r| data.row_mask(r).iter().any(|&o| !o))
        .collect();
    if targets.is_empty() {
        return Ok(Imputed {
            data: data.clone(),
            knn_fallbacks: Vec::new(),
        });
    }
    if let Some(j) = (0..n_cols).find(|&j| column_means[j].is_none() && data.missing_in_column(j) > 0) {
        return Err(Error::Imputation(format!("feature {j} has no observed values")));
    }

    let fills = par::map(exec, &targets, |&r| {
        // distance to every other row; ordering (distance, row) is total
        let neighbours: Vec<(f64, usize)> = (0..data.n_rows())
            .filter(|&s| s != r)
            .filter_map(|s| masked_distance(data, r, s).map(|d| (d, s)))
            .collect();
        let mut fill = RowFill {
            row: r,
            cells: Vec::new(),
            fallbacks: Vec::new(),
        };
        for j in 0..n_cols {
            if data.is_observed(r, j) {
                continue;
            }
            let mut candidates: Vec<(f64, usize)> = neighbours
                .iter()
                .copied()
                .filter(|&(_, s)| data.is_observed(s, j))
                .collect();
            if candidates.is_empty() {
                fill.cells.push((j, column_means[j].expect("checked above")));
                fill.fallbacks.push(j);
                continue;
            }
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            let take = k.min(candidates.len());
            if take < candidates.len() {
                candidates.select_nth_unstable_by(take - 1, cmp);
                candidates.truncate(take);
            }
            candidates.sort_by(cmp);
            let sum: f64 = candidates
                .iter()
                .map(|&(_, s)| data.get(s, j).expect("candidate observed"))
                .sum();
            fill.cells.push((j, sum / take as f64));
        }
        fill
    });

    let mut out = data.clone();
    let mut knn_fallbacks = Vec::new();
    for f in fills {
        for (j, v) in f.cells {
            out.set(f.row, j, v);
        }
        knn_fallbacks.extend(f.fallbacks.into_iter().map(|j| (f.row, j)));
    }
    Ok(Imputed {
        data: out,
        knn_fallbacks,
    })
}
