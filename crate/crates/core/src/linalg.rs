//! Dense complex matrices: products, traces of powers and LU determinants.
//!
//! Every reduction runs in index-ascending order so repeated runs on the same
//! build produce bit-identical results.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Immutable dense complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !z.is_finite()) {
            return Err(Error::Evaluation { index: format!("({}, {})", pos / cols.max(1), pos % cols.max(1)) });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![Complex64::new(1.0, 0.0); n])
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Self {
        let n = diag.len();
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for (i, d) in diag.iter().enumerate() {
            data[i * n + i] = *d;
        }
        Self { rows: n, cols: n, data }
    }

    /// Builds a matrix from row vectors; all rows must share one length.
    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(r, c, rows.into_iter().flatten().collect())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Sum of diagonal entries of a square matrix.
    pub fn trace(&self) -> Result<Complex64> {
        self.require_square("trace")?;
        Ok((0..self.rows).fold(Complex64::new(0.0, 0.0), |acc, i| acc + self.get(i, i)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape(format!(
                "cannot add {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn conj_transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j).conj());
            }
        }
        Self { rows: self.cols, cols: self.rows, data }
    }

    /// `I + s·self`.
    pub fn identity_plus_scaled(&self, s: Complex64) -> Result<Self> {
        self.require_square("identity_plus_scaled")?;
        let mut out = self.scale(s);
        for i in 0..self.rows {
            out.data[i * self.cols + i] += 1.0;
        }
        Ok(out)
    }

    /// Block-diagonal matrix assembled from square blocks in order.
    pub fn block_diagonal(blocks: &[CMatrix]) -> Result<Self> {
        let n: usize = blocks.iter().map(|b| b.rows).sum();
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        let mut offset = 0;
        for b in blocks {
            b.require_square("block_diagonal")?;
            for i in 0..b.rows {
                for j in 0..b.cols {
                    data[(offset + i) * n + offset + j] = b.get(i, j);
                }
            }
            offset += b.rows;
        }
        Ok(Self { rows: n, cols: n, data })
    }

    fn require_square(&self, op: &str) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::Shape(format!("{op} needs a square matrix, got {}x{}", self.rows, self.cols)))
        }
    }
}

/// Matrix product `a·b`. Each entry accumulates `a[i,k]·b[k,j]` for ascending `k`.
pub fn mat_mul(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.cols != b.rows {
        return Err(Error::Shape(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut data = vec![Complex64::new(0.0, 0.0); a.rows * b.cols];
    for i in 0..a.rows {
        let out = &mut data[i * b.cols..(i + 1) * b.cols];
        for k in 0..a.cols {
            let aik = a.get(i, k);
            for (o, bkj) in out.iter_mut().zip(b.row(k)) {
                *o += aik * bkj;
            }
        }
    }
    Ok(CMatrix { rows: a.rows, cols: b.cols, data })
}

/// Determinant by LU factorization with partial pivoting on the complex modulus.
///
/// Ties between candidate pivots go to the lowest row index. The empty matrix
/// has determinant 1; exactly singular matrices return 0.
pub fn lu_determinant(m: &CMatrix) -> Result<Complex64> {
    m.require_square("lu_determinant")?;
    let n = m.rows;
    let mut a = m.data.clone();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let mut pivot = col;
        let mut best = a[col * n + col].norm();
        for row in col + 1..n {
            let v = a[row * n + col].norm();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            det = -det;
        }
        let p = a[col * n + col];
        det *= p;
        for row in col + 1..n {
            let factor = a[row * n + col] / p;
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in col + 1..n {
                let u = a[col * n + j];
                a[row * n + j] -= factor * u;
            }
        }
    }
    Ok(det)
}

/// `Tr(mᵖ)` by repeated multiplication.
pub fn mat_power_trace(m: &CMatrix, p: usize) -> Result<Complex64> {
    m.require_square("mat_power_trace")?;
    if p == 0 {
        return Err(Error::Parameter("power must be at least 1; Tr(m^0) is the dimension".into()));
    }
    let mut power = m.clone();
    for _ in 1..p {
        power = mat_mul(&power, m)?;
    }
    power.trace()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| {
            // uniform in the unit disc
            loop {
                let z = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                if z.norm() <= 1.0 {
                    return z;
                }
            }
        })
        .unwrap()
    }

    fn cofactor_det(m: &CMatrix) -> Complex64 {
        let n = m.rows();
        if n == 0 {
            return c(1.0, 0.0);
        }
        if n == 1 {
            return m.get(0, 0);
        }
        let mut total = c(0.0, 0.0);
        for j in 0..n {
            let minor = CMatrix::from_fn(n - 1, n - 1, |r, s| m.get(r + 1, if s < j { s } else { s + 1 })).unwrap();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            total += m.get(0, j) * cofactor_det(&minor) * sign;
        }
        total
    }

    fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
        (a - b).norm() <= rel * a.norm().max(b.norm()).max(1e-300)
    }

    #[test]
    fn rejects_wrong_entry_count_and_non_finite() {
        assert!(matches!(CMatrix::new(2, 2, vec![c(1.0, 0.0); 3]), Err(Error::Shape(_))));
        let err = CMatrix::new(1, 2, vec![c(1.0, 0.0), c(f64::NAN, 0.0)]).unwrap_err();
        assert_eq!(err, Error::Evaluation { index: "(0, 1)".into() });
    }

    #[test]
    fn identity_times_matrix() {
        let m = CMatrix::from_rows(vec![vec![c(1.0, 2.0), c(3.0, 0.0)], vec![c(0.0, -1.0), c(5.0, 5.0)]]).unwrap();
        assert_eq!(mat_mul(&CMatrix::identity(2), &m).unwrap(), m);
    }

    #[test]
    fn swap_matrix_swaps_rows() {
        let swap = CMatrix::from_rows(vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]]).unwrap();
        let m = CMatrix::from_rows(vec![vec![c(1.0, 0.0), c(2.0, 0.0)], vec![c(3.0, 0.0), c(4.0, 0.0)]]).unwrap();
        let expected = CMatrix::from_rows(vec![vec![c(3.0, 0.0), c(4.0, 0.0)], vec![c(1.0, 0.0), c(2.0, 0.0)]]).unwrap();
        assert_eq!(mat_mul(&swap, &m).unwrap(), expected);
    }

    #[test]
    fn mat_mul_matches_triple_loop_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 4);
        let b = random_matrix(&mut rng, 4);
        let prod = mat_mul(&a, &b).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let mut sum = c(0.0, 0.0);
                for k in 0..4 {
                    sum += a.get(i, k) * b.get(k, j);
                }
                assert_eq!(prod.get(i, j), sum);
            }
        }
    }

    #[test]
    fn mat_mul_shape_error() {
        let err = mat_mul(&CMatrix::zeros(2, 3), &CMatrix::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn determinant_small_cases() {
        assert_eq!(lu_determinant(&CMatrix::zeros(0, 0)).unwrap(), c(1.0, 0.0));
        let d = CMatrix::from_diagonal(&[c(1.0, 1.0), c(2.0, 0.0)]);
        assert_eq!(lu_determinant(&d).unwrap(), c(2.0, 2.0));
        let singular = CMatrix::from_rows(vec![vec![c(1.0, 0.0), c(2.0, 0.0)], vec![c(2.0, 0.0), c(4.0, 0.0)]]).unwrap();
        assert!(lu_determinant(&singular).unwrap().norm() < 1e-15);
        assert!(lu_determinant(&CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn determinant_matches_cofactor_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=6 {
            let m = random_matrix(&mut rng, n);
            let lu = lu_determinant(&m).unwrap();
            let cof = cofactor_det(&m);
            assert!(close(lu, cof, 1e-12), "n={n}: {lu} vs {cof}");
        }
    }

    #[test]
    fn power_trace_cases() {
        let (a, b) = (c(0.5, 0.2), c(-1.0, 0.3));
        let d = CMatrix::from_diagonal(&[a, b]);
        assert!(close(mat_power_trace(&d, 3).unwrap(), a * a * a + b * b * b, 1e-15));
        assert!(matches!(mat_power_trace(&d, 0), Err(Error::Parameter(_))));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matrix(&mut rng, 3);
        assert_eq!(mat_power_trace(&m, 1).unwrap(), m.get(0, 0) + m.get(1, 1) + m.get(2, 2));
        let mut nested = c(0.0, 0.0);
        for i0 in 0..3 {
            for i1 in 0..3 {
                for i2 in 0..3 {
                    for i3 in 0..3 {
                        nested += m.get(i0, i1) * m.get(i1, i2) * m.get(i2, i3) * m.get(i3, i0);
                    }
                }
            }
        }
        assert!(close(mat_power_trace(&m, 4).unwrap(), nested, 1e-12));
    }

    fn matrix_strategy(n: usize) -> impl Strategy<Value = CMatrix> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
            .prop_map(move |v| CMatrix::new(n, n, v.into_iter().map(|(re, im)| c(re, im)).collect()).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn trace_is_cyclic(a in matrix_strategy(6), b in matrix_strategy(6)) {
            let ab = mat_mul(&a, &b).unwrap().trace().unwrap();
            let ba = mat_mul(&b, &a).unwrap().trace().unwrap();
            prop_assert!((ab - ba).norm() <= 1e-12 * ab.norm().max(1.0));
        }

        #[test]
        fn determinant_is_multiplicative(a in matrix_strategy(5), b in matrix_strategy(5)) {
            let lhs = lu_determinant(&mat_mul(&a, &b).unwrap()).unwrap();
            let rhs = lu_determinant(&a).unwrap() * lu_determinant(&b).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(rhs.norm()).max(1e-3));
        }

        #[test]
        fn rank_one_update_determinant(
            u in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 5),
            v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 5),
        ) {
            let u: Vec<_> = u.into_iter().map(|(r, i)| c(r, i)).collect();
            let v: Vec<_> = v.into_iter().map(|(r, i)| c(r, i)).collect();
            let outer = CMatrix::from_fn(5, 5, |i, j| u[i] * v[j]).unwrap();
            let det = lu_determinant(&outer.identity_plus_scaled(c(1.0, 0.0)).unwrap()).unwrap();
            let expected = c(1.0, 0.0) + v.iter().zip(&u).map(|(a, b)| a * b).sum::<Complex64>();
            prop_assert!((det - expected).norm() <= 1e-10 * expected.norm().max(1.0));
        }
    }
}
