//! Direct solvers for the implicit heat steps.

/// Solve a tridiagonal system with the Thomas algorithm.
///
/// `lower[0]` and `upper[n-1]` are ignored. Assumes a non-singular, diagonally
/// dominant matrix (no pivoting).
pub fn thomas_solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    assert!(lower.len() == n && diag.len() == n && upper.len() == n);
    if n == 0 {
        return Vec::new();
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / den;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / den;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Cholesky factor `L` of a symmetric positive definite band matrix with
/// half-bandwidth `p`. Row `i` stores `L[i][i-p..=i]` as `p + 1` entries, the
/// diagonal last.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    n: usize,
    p: usize,
    rows: Vec<f64>,
}

impl BandCholesky {
    /// Factor the matrix whose lower band is produced by `entry(i, j)` for
    /// `i - p <= j <= i`. Returns `None` if the matrix is not positive definite.
    pub fn factor(n: usize, p: usize, entry: impl Fn(usize, usize) -> f64) -> Option<Self> {
        let w = p + 1;
        let mut rows = vec![0.0; n * w];
        // rows[i*w + (j + p - i)] = L[i][j]
        for i in 0..n {
            let j0 = i.saturating_sub(p);
            for j in j0..=i {
                let k0 = j.saturating_sub(p).max(j0);
                let mut s = entry(i, j);
                for k in k0..j {
                    s -= rows[i * w + (k + p - i)] * rows[j * w + (k + p - j)];
                }
                if j == i {
                    if s <= 0.0 || !s.is_finite() {
                        return None;
                    }
                    rows[i * w + p] = s.sqrt();
                } else {
                    rows[i * w + (j + p - i)] = s / rows[j * w + p];
                }
            }
        }
        Some(Self { n, p, rows })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[allow(clippy::needless_range_loop)]
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, p, w) = (self.n, self.p, self.p + 1);
        assert_eq!(rhs.len(), n);
        let mut y = rhs.to_vec();
        for i in 0..n {
            let j0 = i.saturating_sub(p);
            let mut s = y[i];
            for j in j0..i {
                s -= self.rows[i * w + (j + p - i)] * y[j];
            }
            y[i] = s / self.rows[i * w + p];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..(i + p + 1).min(n) {
                s -= self.rows[k * w + (i + p - k)] * y[k];
            }
            y[i] = s / self.rows[i * w + p];
        }
        y
    }
}
