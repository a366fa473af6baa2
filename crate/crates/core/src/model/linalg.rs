//! Dense least squares by Householder QR.
//!
//! Columns whose residual norm after the preceding reflections falls below
//! `rel_tol` times their original norm are treated as linearly dependent:
//! they consume no row of `R` and receive a zero coefficient.

#![allow(clippy::needless_range_loop)]

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Matrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    #[cfg(test)]
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Matrix::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                m.set(i, j, v);
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    // scaled to avoid overflow on large responses
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * v.iter().map(|x| (x / scale) * (x / scale)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone)]
pub(crate) struct Qr {
    /// Reduced matrix: `R` in the rows consumed by independent columns.
    a: Matrix,
    /// Householder vectors with their starting row.
    reflectors: Vec<(usize, Vec<f64>)>,
    /// Row of `R` holding the diagonal of each column, `None` when dependent.
    pivot_row: Vec<Option<usize>>,
}

impl Qr {
    pub fn factor(mut a: Matrix, rel_tol: f64) -> Self {
        let mut reflectors = Vec::new();
        let mut pivot_row = vec![None; a.cols];
        let mut r = 0usize;
        for k in 0..a.cols {
            if r >= a.rows {
                break;
            }
            let original = norm(a.col(k));
            let x = &a.col(k)[r..];
            let remaining = norm(x);
            if original == 0.0 || remaining <= rel_tol * original {
                continue;
            }
            let alpha = if x[0] >= 0.0 { -remaining } else { remaining };
            let mut v = x.to_vec();
            v[0] -= alpha;
            let vv: f64 = v.iter().map(|t| t * t).sum();
            for j in k..a.cols {
                let col = &mut a.col_mut(j)[r..];
                let s: f64 = v.iter().zip(col.iter()).map(|(p, q)| p * q).sum();
                let f = 2.0 * s / vv;
                for (c, vi) in col.iter_mut().zip(&v) {
                    *c -= f * vi;
                }
            }
            a.set(r, k, alpha);
            for i in r + 1..a.rows {
                a.set(i, k, 0.0);
            }
            reflectors.push((r, v));
            pivot_row[k] = Some(r);
            r += 1;
        }
        Qr { a, reflectors, pivot_row }
    }

    pub fn dependent_columns(&self) -> Vec<usize> {
        (0..self.pivot_row.len()).filter(|&k| self.pivot_row[k].is_none()).collect()
    }

    #[cfg(test)]
    pub fn rank(&self) -> usize {
        self.reflectors.len()
    }

    /// `|R_kk|` for each independent column, in column order.
    pub fn diagonal(&self) -> Vec<f64> {
        self.pivot_row.iter().enumerate().filter_map(|(k, r)| r.map(|r| self.a.get(r, k).abs())).collect()
    }

    fn apply_qt(&self, y: &mut [f64]) {
        for (start, v) in &self.reflectors {
            let seg = &mut y[*start..];
            let vv: f64 = v.iter().map(|t| t * t).sum();
            let s: f64 = v.iter().zip(seg.iter()).map(|(p, q)| p * q).sum();
            let f = 2.0 * s / vv;
            for (c, vi) in seg.iter_mut().zip(v) {
                *c -= f * vi;
            }
        }
    }

    /// Least-squares solution; dependent columns get a zero coefficient.
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let mut qty = y.to_vec();
        self.apply_qt(&mut qty);
        self.back_substitute(&qty)
    }

    fn back_substitute(&self, rhs: &[f64]) -> Vec<f64> {
        let cols = self.a.cols;
        let mut beta = vec![0.0; cols];
        for k in (0..cols).rev() {
            let Some(r) = self.pivot_row[k] else { continue };
            let mut acc = rhs[r];
            for j in k + 1..cols {
                if self.pivot_row[j].is_some() {
                    acc -= self.a.get(r, j) * beta[j];
                }
            }
            beta[k] = acc / self.a.get(r, k);
        }
        beta
    }

    /// Diagonal of `(RᵀR)⁻¹`, i.e. squared row norms of `R⁻¹`, over the
    /// independent columns (zero for dependent ones).
    pub fn inverse_gram_diagonal(&self) -> Vec<f64> {
        let cols = self.a.cols;
        let mut diag = vec![0.0; cols];
        // Column e of R⁻¹ solves R z = e_r for each pivot row r.
        for &r in self.pivot_row.iter().flatten() {
            let mut rhs = vec![0.0; self.a.rows];
            rhs[r] = 1.0;
            let z = self.back_substitute(&rhs);
            for (d, zi) in diag.iter_mut().zip(&z) {
                *d += zi * zi;
            }
        }
        diag
    }
}

/// Ridge-regularised least squares on `x` with an unpenalised intercept
/// prepended, via QR of the augmented system.
pub(crate) fn ridge_with_intercept(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let n = x.len();
    let p = x.first().map_or(0, Vec::len);
    let mut a = Matrix::zeros(n + p, p + 1);
    let mut rhs = vec![0.0; n + p];
    for (i, row) in x.iter().enumerate() {
        a.set(i, 0, 1.0);
        for (j, &v) in row.iter().enumerate() {
            a.set(i, j + 1, v);
        }
        rhs[i] = y[i];
    }
    let s = lambda.sqrt();
    for j in 0..p {
        a.set(n + j, j + 1, s);
    }
    Qr::factor(a, 1e-12).solve(&rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_square_system_exactly() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let beta = Qr::factor(a, 1e-12).solve(&[5.0, 10.0]);
        assert!((beta[0] - 1.0).abs() < 1e-14 && (beta[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn least_squares_line_matches_closed_form() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [1.1, 2.9, 5.2, 7.1, 8.8];
        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x]).collect();
        let beta = Qr::factor(Matrix::from_rows(&rows), 1e-12).solve(&ys);
        let n = 5.0;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let icpt = (sy - slope * sx) / n;
        assert!((beta[1] - slope).abs() < 1e-12);
        assert!((beta[0] - icpt).abs() < 1e-12);
    }

    #[test]
    fn flags_dependent_columns() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, 4.0, f64::from(i), 2.0 * f64::from(i) + 1.0]).collect();
        let qr = Qr::factor(Matrix::from_rows(&rows), 1e-9);
        assert_eq!(qr.dependent_columns(), vec![1, 3]);
        assert_eq!(qr.rank(), 2);
    }

    #[test]
    fn inverse_gram_matches_two_by_two_inverse() {
        let rows = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]];
        let qr = Qr::factor(Matrix::from_rows(&rows), 1e-12);
        // XᵀX = [[3,3],[3,5]], inverse diag = [5/6, 3/6]
        let d = qr.inverse_gram_diagonal();
        assert!((d[0] - 5.0 / 6.0).abs() < 1e-14);
        assert!((d[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn ridge_handles_more_features_than_rows() {
        let x = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let beta = ridge_with_intercept(&x, &[3.0, 1.0], 1e-6);
        assert_eq!(beta.len(), 4);
        assert!(beta.iter().all(|b| b.is_finite()));
        assert!(beta[1] > beta[2]);
    }
}
