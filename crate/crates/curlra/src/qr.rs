//! Householder QR (plain and column-pivoted), LU solves, and small helpers
//! shared by the volume-maximization machinery.

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::scalar::Scalar;

/// Householder reflector stored as (v, beta) acting on rows `offset..m`.
struct Reflector<T: Scalar> {
    v: Vec<T>,
    beta: f64,
    offset: usize,
}

fn make_reflector<T: Scalar>(x: &[T]) -> (Vec<T>, f64, T) {
    // Returns (v, beta, alpha) with (I - beta v v^H) x = alpha e_1.
    let norm = x.iter().map(|a| a.modulus_sq()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return (vec![T::ZERO; x.len()], 0.0, T::ZERO);
    }
    let x0 = x[0];
    let phase = if x0.modulus() > 0.0 {
        x0.scale(1.0 / x0.modulus())
    } else {
        T::ONE
    };
    let alpha = -phase.scale(norm);
    let mut v = x.to_vec();
    v[0] -= alpha;
    let vsq = v.iter().map(|a| a.modulus_sq()).sum::<f64>();
    if vsq == 0.0 {
        return (vec![T::ZERO; x.len()], 0.0, alpha);
    }
    (v, 2.0 / vsq, alpha)
}

fn apply_reflector_left<T: Scalar>(a: &mut Mat<T>, v: &[T], beta: f64, row0: usize, col0: usize) {
    if beta == 0.0 {
        return;
    }
    let m = a.nrows();
    let n = a.ncols();
    for j in col0..n {
        let mut dot = T::ZERO;
        for i in row0..m {
            dot += v[i - row0].conj() * a[(i, j)];
        }
        let dot = dot.scale(beta);
        for i in row0..m {
            let sub = v[i - row0] * dot;
            a[(i, j)] -= sub;
        }
    }
}

/// Thin QR: A = Q R with Q (m x k), R (k x n), k = min(m, n).
pub fn qr<T: Scalar>(a: &Mat<T>) -> (Mat<T>, Mat<T>) {
    let (q, r, _) = householder_qr(a, false);
    (q, r)
}

/// Column-pivoted (rank-revealing) QR: A[:, perm] = Q R, with the diagonal of
/// R nonincreasing in magnitude. `perm[j]` is the original index of the
/// column placed at position j.
pub struct Qrp<T: Scalar> {
    pub q: Mat<T>,
    pub r: Mat<T>,
    pub perm: Vec<usize>,
}

pub fn qr_column_pivoted<T: Scalar>(a: &Mat<T>) -> Qrp<T> {
    let (q, r, perm) = householder_qr(a, true);
    Qrp { q, r, perm }
}

fn householder_qr<T: Scalar>(a: &Mat<T>, pivot: bool) -> (Mat<T>, Mat<T>, Vec<usize>) {
    let m = a.nrows();
    let n = a.ncols();
    let k = m.min(n);
    let mut r = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut reflectors: Vec<Reflector<T>> = Vec::with_capacity(k);

    for step in 0..k {
        if pivot {
            // Exact trailing column norms; smallest index wins ties.
            let mut best = step;
            let mut best_norm = -1.0f64;
            for j in step..n {
                let norm_sq: f64 = (step..m).map(|i| r[(i, j)].modulus_sq()).sum();
                if norm_sq > best_norm * (1.0 + 1e-12) {
                    best = j;
                    best_norm = norm_sq;
                }
            }
            if best != step {
                for i in 0..m {
                    let tmp = r[(i, step)];
                    r[(i, step)] = r[(i, best)];
                    r[(i, best)] = tmp;
                }
                perm.swap(step, best);
            }
        }
        let x: Vec<T> = (step..m).map(|i| r[(i, step)]).collect();
        let (v, beta, alpha) = make_reflector(&x);
        apply_reflector_left(&mut r, &v, beta, step, step);
        // The reflector maps the pivot column onto alpha e_1 exactly.
        r[(step, step)] = alpha;
        for i in (step + 1)..m {
            r[(i, step)] = T::ZERO;
        }
        reflectors.push(Reflector {
            v,
            beta,
            offset: step,
        });
    }

    // Assemble thin Q by applying the reflectors in reverse to I(m, k).
    let mut q: Mat<T> = Mat::zeros(m, k);
    for j in 0..k {
        q[(j, j)] = T::ONE;
    }
    for refl in reflectors.iter().rev() {
        apply_reflector_left(&mut q, &refl.v, refl.beta, refl.offset, 0);
    }

    let r_trim = Mat::from_fn(k, n, |i, j| r[(i, j)]);
    (q, r_trim, perm)
}

/// |det| via LU with partial pivoting; test oracle for volumes of small
/// square blocks.
pub fn abs_det_lu<T: Scalar>(a: &Mat<T>) -> f64 {
    assert_eq!(a.nrows(), a.ncols());
    let n = a.nrows();
    let mut lu = a.clone();
    let mut det = 1.0f64;
    for k in 0..n {
        let mut piv = k;
        let mut max = lu[(k, k)].modulus();
        for i in (k + 1)..n {
            let v = lu[(i, k)].modulus();
            if v > max {
                max = v;
                piv = i;
            }
        }
        if max == 0.0 {
            return 0.0;
        }
        if piv != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(piv, j)];
                lu[(piv, j)] = tmp;
            }
        }
        det *= lu[(k, k)].modulus();
        let pivot = lu[(k, k)];
        for i in (k + 1)..n {
            let factor = lu[(i, k)] / pivot;
            for j in (k + 1)..n {
                let sub = factor * lu[(k, j)];
                lu[(i, j)] -= sub;
            }
        }
    }
    det
}

/// Solve B X = RHS for square B via LU with partial pivoting.
pub fn solve_square<T: Scalar>(b: &Mat<T>, rhs: &Mat<T>) -> Result<Mat<T>> {
    let n = b.nrows();
    if b.ncols() != n || rhs.nrows() != n {
        return Err(Error::invalid(
            "solve_square expects square B and matching RHS",
        ));
    }
    let mut lu = b.clone();
    let mut x = rhs.clone();
    let scale = b.chebyshev_norm();
    for k in 0..n {
        let mut piv = k;
        let mut max = lu[(k, k)].modulus();
        for i in (k + 1)..n {
            let v = lu[(i, k)].modulus();
            if v > max {
                max = v;
                piv = i;
            }
        }
        if max <= scale * f64::MIN_POSITIVE || max == 0.0 {
            return Err(Error::invalid("singular matrix in solve_square"));
        }
        if piv != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(piv, j)];
                lu[(piv, j)] = tmp;
            }
            for j in 0..x.ncols() {
                let tmp = x[(k, j)];
                x[(k, j)] = x[(piv, j)];
                x[(piv, j)] = tmp;
            }
        }
        let pivot = lu[(k, k)];
        for i in (k + 1)..n {
            let factor = lu[(i, k)] / pivot;
            lu[(i, k)] = factor;
            for j in (k + 1)..n {
                let sub = factor * lu[(k, j)];
                lu[(i, j)] -= sub;
            }
            for j in 0..x.ncols() {
                let sub = factor * x[(k, j)];
                x[(i, j)] -= sub;
            }
        }
    }
    // Back substitution.
    for j in 0..x.ncols() {
        for i in (0..n).rev() {
            let mut acc = x[(i, j)];
            for k in (i + 1)..n {
                let sub = lu[(i, k)] * x[(k, j)];
                acc -= sub;
            }
            x[(i, j)] = acc / lu[(i, i)];
        }
    }
    Ok(x)
}

/// Cholesky factor L (lower) of a Hermitian positive-definite G = L L^H.
pub fn cholesky<T: Scalar>(g: &Mat<T>) -> Result<Mat<T>> {
    let n = g.nrows();
    if g.ncols() != n {
        return Err(Error::invalid("cholesky expects a square matrix"));
    }
    let mut l: Mat<T> = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = g[(i, j)];
            for k in 0..j {
                let sub = l[(i, k)] * l[(j, k)].conj();
                sum -= sub;
            }
            if i == j {
                let d = sum.re();
                if d <= 0.0 || !d.is_finite() {
                    return Err(Error::NumericalFailure(
                        "cholesky pivot not positive".into(),
                    ));
                }
                l[(i, i)] = T::from_re(d.sqrt());
            } else {
                l[(i, j)] = sum / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solve L x = b with L lower triangular.
pub fn forward_substitute<T: Scalar>(l: &Mat<T>, b: &[T]) -> Vec<T> {
    let n = l.nrows();
    let mut x = b.to_vec();
    for i in 0..n {
        let mut acc = x[i];
        for k in 0..i {
            let sub = l[(i, k)] * x[k];
            acc -= sub;
        }
        x[i] = acc / l[(i, i)];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn qr_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Mat<f64> = Mat::random_normal(6, 4, &mut rng);
        let (q, r) = qr(&a);
        assert!(q.matmul(&r).sub(&a).frobenius_norm() < 1e-12 * a.frobenius_norm());
        assert!(crate::svd::gram_defect(&q) < 1e-12);
    }

    #[test]
    fn qrp_reconstructs_and_orders_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Mat<f64> = Mat::random_normal(5, 8, &mut rng);
        let f = qr_column_pivoted(&a);
        let permuted = a.select_cols(&f.perm);
        assert!(f.q.matmul(&f.r).sub(&permuted).frobenius_norm() < 1e-12 * a.frobenius_norm());
        for i in 1..f.r.nrows() {
            assert!(f.r[(i, i)].abs() <= f.r[(i - 1, i - 1)].abs() + 1e-12);
        }
    }

    #[test]
    fn qr_complex_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a: Mat<Complex64> = Mat::random_normal(5, 3, &mut rng);
        let (q, r) = qr(&a);
        assert!(q.matmul(&r).sub(&a).frobenius_norm() < 1e-12 * a.frobenius_norm());
        assert!(crate::svd::gram_defect(&q) < 1e-12);
    }

    #[test]
    fn det_and_solve() {
        let a: Mat<f64> = Mat::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert!((abs_det_lu(&a) - 2.0).abs() < 1e-12);
        let rhs: Mat<f64> = Mat::identity(2);
        let inv = solve_square(&a, &rhs).unwrap();
        assert!(a.matmul(&inv).sub(&rhs).frobenius_norm() < 1e-12);
        let sing: Mat<f64> = Mat::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(solve_square(&sing, &rhs).is_err());
    }

    #[test]
    fn cholesky_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Mat<f64> = Mat::random_normal(4, 6, &mut rng);
        let g = a.matmul(&a.conj_transpose());
        let l = cholesky(&g).unwrap();
        assert!(
            l.matmul(&l.conj_transpose()).sub(&g).frobenius_norm() < 1e-10 * g.frobenius_norm()
        );
        let b = vec![1.0, 2.0, 3.0, 4.0];
        let x = forward_substitute(&l, &b);
        let back = l.matvec(&x);
        for i in 0..4 {
            assert!((back[i] - b[i]).abs() < 1e-10);
        }
    }
}
