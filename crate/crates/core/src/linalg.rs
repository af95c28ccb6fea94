//! Minimal dense complex matrix and a Hermitian eigenvalue solver.

use num_complex::Complex64;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn add_at(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] += v;
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn scale(&mut self, s: Complex64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Accumulates `self^H · self` into `acc` (cols × cols).
    pub fn accumulate_gram(&self, acc: &mut CMatrix) {
        debug_assert_eq!((acc.rows, acc.cols), (self.cols, self.cols));
        for k in 0..self.rows {
            let row = self.row(k);
            for u in 0..self.cols {
                let cu = row[u].conj();
                for v in 0..self.cols {
                    acc.data[u * self.cols + v] += cu * row[v];
                }
            }
        }
    }
}

/// Eigenvalues of a Hermitian matrix in descending order.
///
/// The n×n Hermitian matrix A = X + jY is embedded as the real symmetric
/// 2n×2n matrix [[X, −Y], [Y, X]], whose spectrum is that of A with every
/// eigenvalue doubled; cyclic Jacobi sweeps diagonalize the embedding.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Vec<f64> {
    assert_eq!(a.rows, a.cols, "eigenvalues need a square matrix");
    let n = a.rows;
    let m = 2 * n;
    let mut s = vec![0.0f64; m * m];
    for i in 0..n {
        for j in 0..n {
            // symmetrize against round-off in the input
            let v = 0.5 * (a.get(i, j) + a.get(j, i).conj());
            s[i * m + j] = v.re;
            s[(i + n) * m + (j + n)] = v.re;
            s[i * m + (j + n)] = -v.im;
            s[(i + n) * m + j] = v.im;
        }
    }
    jacobi_symmetric(&mut s, m);
    let mut eig: Vec<f64> = (0..m).map(|i| s[i * m + i]).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    eig.into_iter().step_by(2).collect()
}

fn jacobi_symmetric(a: &mut [f64], n: usize) {
    let scale: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if scale == 0.0 {
        return;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_matrix() {
        let mut m = CMatrix::zeros(3, 3);
        m.set(0, 0, c(2.0, 0.0));
        m.set(1, 1, c(5.0, 0.0));
        m.set(2, 2, c(-1.0, 0.0));
        let e = hermitian_eigenvalues(&m);
        assert!((e[0] - 5.0).abs() < 1e-14);
        assert!((e[1] - 2.0).abs() < 1e-14);
        assert!((e[2] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_by_two_closed_form() {
        // [[a, b], [b*, d]]: (a+d)/2 ± sqrt(((a-d)/2)^2 + |b|^2)
        let (a, d, b) = (3.0, 1.0, c(0.5, -1.5));
        let m = CMatrix::from_fn(2, 2, |r, cc| match (r, cc) {
            (0, 0) => c(a, 0.0),
            (1, 1) => c(d, 0.0),
            (0, 1) => b,
            _ => b.conj(),
        });
        let e = hermitian_eigenvalues(&m);
        let mid = (a + d) / 2.0;
        let rad = (((a - d) / 2.0).powi(2) + b.norm_sqr()).sqrt();
        assert!((e[0] - (mid + rad)).abs() < 1e-13);
        assert!((e[1] - (mid - rad)).abs() < 1e-13);
    }

    #[test]
    fn gram_is_hermitian_psd() {
        let h = CMatrix::from_fn(3, 2, |r, cc| {
            c(r as f64 - 0.5 * cc as f64, 0.3 * (r + cc) as f64)
        });
        let mut g = CMatrix::zeros(2, 2);
        h.accumulate_gram(&mut g);
        assert!((g.get(0, 1) - g.get(1, 0).conj()).norm() < 1e-14);
        let e = hermitian_eigenvalues(&g);
        assert!(e.iter().all(|&v| v > -1e-12));
        assert!((e.iter().sum::<f64>() - h.frobenius_sq()).abs() < 1e-12);
    }
}
