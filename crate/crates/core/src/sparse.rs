//! Row-compressed complex matrices used for trace powers of large, sparse truncations.

use num_complex::Complex64;

#[derive(Debug, Clone)]
pub(crate) struct SparseRows {
    n: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseRows {
    /// Builds from `(row, col, value)` triplets sorted by `(row, col)` without duplicates.
    pub(crate) fn from_sorted_triplets(n: usize, triplets: &[(usize, usize, Complex64)]) -> Self {
        let mut rows = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if v != Complex64::new(0.0, 0.0) {
                rows[i].push((j, v));
            }
        }
        Self { n, rows }
    }

    pub(crate) fn trace(&self) -> Complex64 {
        let mut sum = Complex64::new(0.0, 0.0);
        for (i, row) in self.rows.iter().enumerate() {
            if let Ok(pos) = row.binary_search_by_key(&i, |&(j, _)| j) {
                sum += row[pos].1;
            }
        }
        sum
    }

    /// `self · rhs`. Entry `(i, j)` accumulates `self[i,k]·rhs[k,j]` for ascending `k`,
    /// the same order as the dense product. Exact zeros are dropped.
    pub(crate) fn mul(&self, rhs: &SparseRows) -> SparseRows {
        let zero = Complex64::new(0.0, 0.0);
        let mut acc = vec![zero; rhs.n];
        let mut touched = vec![false; rhs.n];
        let mut cols: Vec<usize> = Vec::new();
        let mut rows = Vec::with_capacity(self.n);
        for row in &self.rows {
            if row.is_empty() {
                rows.push(Vec::new());
                continue;
            }
            for &(k, a) in row {
                for &(j, b) in &rhs.rows[k] {
                    if !touched[j] {
                        touched[j] = true;
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            cols.sort_unstable();
            let mut out = Vec::with_capacity(cols.len());
            for &j in &cols {
                if acc[j] != zero {
                    out.push((j, acc[j]));
                }
                acc[j] = zero;
                touched[j] = false;
            }
            cols.clear();
            rows.push(out);
        }
        SparseRows { n: self.n, rows }
    }
}
