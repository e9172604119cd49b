//! Maximum-weight bipartite matching via the Hungarian method with potentials.

use crate::tensor::Matrix;

/// A matching of rows to columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    /// `row_to_col[r]` is the column matched to row `r`, if any.
    pub row_to_col: Vec<Option<usize>>,
    pub total: f64,
}

/// Maximum-weight matching of a rectangular weight matrix in which every row
/// and every column is used at most once.
///
/// The matrix is padded to a square with zero-weight dummy entries and solved
/// as a minimum-cost assignment on negated weights, so negative weights are
/// never selected over leaving a row unmatched. Runs in `O(n³)` with
/// `n = max(rows, cols)`.
pub fn max_weight_matching(weights: &Matrix) -> Matching {
    let (rows, cols) = (weights.rows(), weights.cols());
    let n = rows.max(cols);
    if n == 0 {
        return Matching { row_to_col: Vec::new(), total: 0.0 };
    }
    let cost = |r: usize, c: usize| -> f64 {
        if r < rows && c < cols {
            -weights.at(r, c).max(0.0)
        } else {
            0.0
        }
    };

    // 1-based potentials formulation; column 0 is a sentinel.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        col_owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![None; rows];
    let mut total = 0.0;
    for j in 1..=n {
        let i = col_owner[j];
        if i >= 1 && i - 1 < rows && j - 1 < cols {
            row_to_col[i - 1] = Some(j - 1);
            total += weights.at(i - 1, j - 1).max(0.0);
        }
    }
    Matching { row_to_col, total }
}
