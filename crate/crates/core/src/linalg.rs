//! Thin singular value decomposition by one-sided Jacobi rotations.
//!
//! The Golub–Kahan routine in nalgebra reconstructs some small matrices
//! with errors near 1e-12, which the projector identities of the solver
//! amplify by the condition number. One-sided Jacobi keeps every singular
//! triplet to high relative accuracy, and the matrices here have at most
//! ten columns, so its cost is negligible.

use nalgebra::{DMatrix, DVector};

const MAX_SWEEPS: usize = 60;

/// `A = U diag(σ) Vᵀ` with `σ` sorted descending, `U` m×k and `V` n×k,
/// `k = min(m, n)`.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl Svd {
    pub fn new(a: &DMatrix<f64>) -> Self {
        if a.nrows() >= a.ncols() {
            tall(a.clone())
        } else {
            let t = tall(a.transpose());
            Svd {
                u: t.v,
                singular_values: t.singular_values,
                v: t.u,
            }
        }
    }

    pub fn max(&self) -> f64 {
        self.singular_values.iter().copied().fold(0.0, f64::max)
    }

    pub fn recompose(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.singular_values) * self.v.transpose()
    }
}

fn tall(mut b: DMatrix<f64>) -> Svd {
    let (m, n) = b.shape();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = b.column(p).norm_squared();
                let beta = b.column(q).norm_squared();
                let gamma = b.column(p).dot(&b.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut b, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let sigma: Vec<f64> = (0..n).map(|i| b.column(i).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));

    let mut u = DMatrix::zeros(m, n);
    let mut vs = DMatrix::zeros(n, n);
    let mut sv = DVector::zeros(n);
    for (k, &i) in order.iter().enumerate() {
        sv[k] = sigma[i];
        vs.set_column(k, &v.column(i));
        if sigma[i] > 0.0 {
            u.set_column(k, &(b.column(i) / sigma[i]));
        }
    }
    Svd {
        u,
        singular_values: sv,
        v: vs,
    }
}

fn rotate(a: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for r in 0..a.nrows() {
        let x = a[(r, p)];
        let y = a[(r, q)];
        a[(r, p)] = c * x - s * y;
        a[(r, q)] = s * x + c * y;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn reconstructs_with_orthonormal_factors(
            r in 1usize..9,
            c in 1usize..11,
            seed in proptest::collection::vec(-1.0f64..1.0, 99),
        ) {
            let a = DMatrix::from_fn(r, c, |i, j| seed[(i * 11 + j) % 99]);
            let svd = Svd::new(&a);
            prop_assert!((svd.recompose() - &a).amax() < 1e-14);
            let k = r.min(c);
            let vtv = svd.v.transpose() * &svd.v;
            prop_assert!((vtv - DMatrix::<f64>::identity(k, k)).amax() < 1e-14);
            for w in svd.singular_values.as_slice().windows(2) {
                prop_assert!(w[0] >= w[1]);
            }
        }
    }

    #[test]
    fn diagonal_values() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, -3.0, 0.0]);
        let svd = Svd::new(&a);
        assert_eq!(svd.singular_values.as_slice(), &[3.0, 1.0]);
    }

    #[test]
    fn zero_matrix() {
        let svd = Svd::new(&DMatrix::zeros(3, 4));
        assert_eq!(svd.max(), 0.0);
    }
}
