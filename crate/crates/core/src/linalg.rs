//! Small dense symmetric positive-definite solves.

use crate::error::{QpeError, Result};

const JITTER_START: f64 = 1e-14;
const JITTER_STOP: f64 = 1e-8;
/// `1/eps` with `eps = 1e-12`.
const MAX_CONDITION: f64 = 1e12;
/// A jittered factor is kept only if its smallest pivot dwarfs the jitter.
const JITTER_MARGIN: f64 = 100.0;

/// Cholesky factor of `D A D + jitter I` where `D` scales `A` to unit diagonal.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
    scale: Vec<f64>,
    /// Diagonal shift applied to the equilibrated matrix (0 if none).
    pub jitter: f64,
    /// `(max L_ii / min L_ii)^2`, a cheap condition estimate.
    pub condition: f64,
}

fn factor(a: &[f64], n: usize, shift: f64) -> Option<(Vec<f64>, f64, f64)> {
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j] + shift;
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / djj;
        }
    }
    let diag = (0..n).map(|i| l[i * n + i]);
    let (lo, hi) = diag.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Some((l, (hi / lo).powi(2), lo * lo))
}

impl Cholesky {
    /// Factors a symmetric row-major `n x n` matrix, escalating a diagonal
    /// jitter from `1e-14` to `1e-8` (relative to the mean diagonal) when the
    /// plain factorization fails or is too ill-conditioned. A jittered
    /// factor is accepted only when the shift is negligible next to every
    /// pivot, so exactly singular input still reports `SingularFim`.
    pub fn new(a: &[f64], n: usize) -> Result<Self> {
        if a.len() != n * n || n == 0 {
            return Err(QpeError::InvalidArgument(format!(
                "expected a non-empty {n}x{n} matrix"
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(QpeError::SingularFim {
                condition: f64::INFINITY,
            });
        }
        let scale: Vec<f64> = (0..n)
            .map(|i| {
                let d = a[i * n + i];
                if d > 0.0 {
                    1.0 / d.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let mut b = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                b[i * n + j] = 0.5 * (a[i * n + j] + a[j * n + i]) * scale[i] * scale[j];
            }
        }
        let mean_diag = (0..n).map(|i| b[i * n + i]).sum::<f64>() / n as f64;

        let mut worst = f64::INFINITY;
        let mut shift = 0.0;
        loop {
            let jitter = shift * mean_diag;
            if let Some((lower, condition, min_pivot)) = factor(&b, n, jitter) {
                if condition <= MAX_CONDITION && min_pivot >= JITTER_MARGIN * jitter {
                    return Ok(Self {
                        n,
                        lower,
                        scale,
                        jitter,
                        condition,
                    });
                }
                worst = condition.max(1.0 / jitter.max(f64::MIN_POSITIVE));
            }
            shift = if shift == 0.0 { JITTER_START } else { shift * 10.0 };
            if shift > JITTER_STOP * 1.000_001 {
                return Err(QpeError::SingularFim { condition: worst });
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = b.iter().zip(&self.scale).map(|(v, s)| v * s).collect();
        for i in 0..n {
            let mut v = x[i];
            for k in 0..i {
                v -= self.lower[i * n + k] * x[k];
            }
            x[i] = v / self.lower[i * n + i];
        }
        for i in (0..n).rev() {
            let mut v = x[i];
            for k in i + 1..n {
                v -= self.lower[k * n + i] * x[k];
            }
            x[i] = v / self.lower[i * n + i];
        }
        x.iter_mut().zip(&self.scale).for_each(|(v, s)| *v *= s);
        x
    }

    /// Row-major inverse.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        // symmetrize rounding noise
        for i in 0..n {
            for j in i + 1..n {
                let v = 0.5 * (inv[i * n + j] + inv[j * n + i]);
                inv[i * n + j] = v;
                inv[j * n + i] = v;
            }
        }
        inv
    }
}

/// Householder reflector `H = I - 2 v v^T / |v|^2` mapping `u` onto a
/// multiple of the last basis vector. Returned row-major.
pub fn householder_to_last(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut v = u.to_vec();
    // reflect onto -sign(u_last) |u| e_last to avoid cancellation
    let sign = if u[n - 1] >= 0.0 { 1.0 } else { -1.0 };
    v[n - 1] += sign * norm;
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            h[i * n + j] = id - 2.0 * v[i] * v[j] / vv;
        }
    }
    h
}

/// `A B` for square row-major matrices.
pub fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solves_badly_scaled_spd() {
        let a = [1e8, 1e3, 0.0, 1e3, 1.0, 1e-4, 0.0, 1e-4, 1e-6];
        let c = Cholesky::new(&a, 3).unwrap();
        assert_eq!(c.jitter, 0.0);
        let inv = c.inverse();
        let prod = matmul(&a, &inv, 3);
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((prod[i * 3 + j] - id).abs() < 1e-9, "{prod:?}");
            }
        }
    }

    #[test]
    fn singular_is_reported() {
        let a = [1.0, 1.0, 1.0, 1.0];
        assert!(matches!(Cholesky::new(&a, 2), Err(QpeError::SingularFim { .. })));
        let z = [0.0; 4];
        assert!(Cholesky::new(&z, 2).is_err());
    }

    #[test]
    fn householder_maps_to_last_axis() {
        let u = [0.0, 0.0, 1.0, 1.0, 1.0];
        let h = householder_to_last(&u);
        let hu: Vec<f64> = (0..5).map(|i| (0..5).map(|j| h[i * 5 + j] * u[j]).sum()).collect();
        for v in &hu[..4] {
            assert!(v.abs() < 1e-15);
        }
        assert_relative_eq!(hu[4].abs(), 3f64.sqrt(), max_relative = 1e-15);
        let hh = matmul(&h, &h, 5);
        for i in 0..5 {
            assert_relative_eq!(hh[i * 5 + i], 1.0, max_relative = 1e-15);
        }
    }
}
