//! Singular value decomposition and everything built directly on it:
//! truncation, pseudo-inverse, numerical rank, matrix volumes, spectral norm.
//!
//! Real matrices go through Golub–Kahan bidiagonalization followed by
//! implicit-shift QR on the bidiagonal; complex matrices use one-sided Jacobi
//! (the complex field only ever sees small sketches here, where Jacobi is
//! simple and robust).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mat::{Mat, NormKind};
use crate::scalar::Scalar;

/// Compact top SVD: `W ~= S * diag(sigma) * T^H` with orthonormal columns in
/// `S` (m x r) and `T` (n x r) and a nonincreasing `sigma`.
#[derive(Debug, Clone)]
pub struct TopSvd<T: Scalar> {
    pub s: Mat<T>,
    pub sigma: Vec<f64>,
    pub t: Mat<T>,
}

impl<T: Scalar> TopSvd<T> {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> Mat<T> {
        let r = self.rank();
        let mut scaled = self.s.clone();
        for i in 0..scaled.nrows() {
            for j in 0..r {
                scaled[(i, j)] = scaled[(i, j)].scale(self.sigma[j]);
            }
        }
        scaled.matmul(&self.t.conj_transpose())
    }

    /// Leading-`r` truncation: the Eckart–Young optimal rank-r approximant.
    pub fn truncate(&self, r: usize) -> Result<TopSvd<T>> {
        if r == 0 || r > self.rank() {
            return Err(Error::invalid(format!(
                "truncation rank {r} outside 1..={}",
                self.rank()
            )));
        }
        Ok(TopSvd {
            s: self.s.leading_cols(r),
            sigma: self.sigma[..r].to_vec(),
            t: self.t.leading_cols(r),
        })
    }

    /// ||S^H S - I||_F, a cheap orthonormality defect check.
    pub fn left_defect(&self) -> f64 {
        gram_defect(&self.s)
    }

    pub fn right_defect(&self) -> f64 {
        gram_defect(&self.t)
    }
}

pub(crate) fn gram_defect<T: Scalar>(m: &Mat<T>) -> f64 {
    let gram = m.conj_transpose().matmul(m);
    let eye: Mat<T> = Mat::identity(gram.nrows());
    gram.sub(&eye).frobenius_norm()
}

/// Fields that know how to factor themselves.
pub trait SvdScalar: Scalar {
    fn svd_full(m: &Mat<Self>) -> Result<TopSvd<Self>>;
    fn singular_values(m: &Mat<Self>) -> Result<Vec<f64>>;
}

impl SvdScalar for f64 {
    fn svd_full(m: &Mat<Self>) -> Result<TopSvd<Self>> {
        match golub_reinsch_dispatch(m, true) {
            Ok(svd) => Ok(svd),
            // Rare stagnation of the QR sweep; one-sided Jacobi is slower but
            // keeps going.
            Err(Error::NumericalFailure(_)) => jacobi_dispatch(m),
            Err(e) => Err(e),
        }
    }

    fn singular_values(m: &Mat<Self>) -> Result<Vec<f64>> {
        let (_, w, _) = golub_reinsch(&to_tall(m).0, false)?;
        let mut w = w;
        w.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(w)
    }
}

impl SvdScalar for Complex64 {
    fn svd_full(m: &Mat<Self>) -> Result<TopSvd<Self>> {
        jacobi_dispatch(m)
    }

    fn singular_values(m: &Mat<Self>) -> Result<Vec<f64>> {
        Ok(jacobi_dispatch(m)?.sigma)
    }
}

/// Compact SVD with `r = min(m, n)`.
pub fn svd<T: SvdScalar>(w: &Mat<T>) -> Result<TopSvd<T>> {
    T::svd_full(w)
}

/// Singular values only (no accumulation of the orthogonal factors).
pub fn singular_values<T: SvdScalar>(w: &Mat<T>) -> Result<Vec<f64>> {
    T::singular_values(w)
}

/// Moore–Penrose pseudo-inverse with a relative cutoff: singular values
/// `sigma_j <= rel_tol * sigma_1` are treated as zero.
pub fn pinv<T: SvdScalar>(w: &Mat<T>, rel_tol: f64) -> Result<Mat<T>> {
    let f = svd(w)?;
    let cutoff = rel_tol * f.sigma.first().copied().unwrap_or(0.0);
    let r = f.rank();
    // W^+ = T * Sigma^+ * S^H
    let mut t_scaled = f.t.clone();
    for j in 0..r {
        let inv = if f.sigma[j] > cutoff && f.sigma[j] > 0.0 {
            1.0 / f.sigma[j]
        } else {
            0.0
        };
        for i in 0..t_scaled.nrows() {
            t_scaled[(i, j)] = t_scaled[(i, j)].scale(inv);
        }
    }
    Ok(t_scaled.matmul(&f.s.conj_transpose()))
}

pub const PINV_REL_TOL: f64 = 1e-12;

pub fn pinv_default<T: SvdScalar>(w: &Mat<T>) -> Result<Mat<T>> {
    pinv(w, PINV_REL_TOL)
}

/// Count of singular values strictly above the absolute threshold `tol`
/// (the experimental convention `rank(-, 1e-6)`).
pub fn numerical_rank<T: SvdScalar>(w: &Mat<T>, tol: f64) -> Result<usize> {
    Ok(singular_values(w)?.iter().filter(|&&s| s > tol).count())
}

pub const NUMERICAL_RANK_TOL: f64 = 1e-6;

/// Count of singular values above `rel * sigma_1`.
pub fn numerical_rank_rel<T: SvdScalar>(w: &Mat<T>, rel: f64) -> Result<usize> {
    let sv = singular_values(w)?;
    let cutoff = rel * sv.first().copied().unwrap_or(0.0);
    Ok(sv.iter().filter(|&&s| s > cutoff).count())
}

/// Spectral norm = sigma_1.
pub fn spectral_norm<T: SvdScalar>(w: &Mat<T>) -> Result<f64> {
    Ok(singular_values(w)?.first().copied().unwrap_or(0.0))
}

pub fn norm<T: SvdScalar>(w: &Mat<T>, kind: NormKind) -> Result<f64> {
    match kind {
        NormKind::Spectral => spectral_norm(w),
        NormKind::Frobenius => Ok(w.frobenius_norm()),
        NormKind::Chebyshev => Ok(w.chebyshev_norm()),
    }
}

/// Power-iteration estimate of the spectral norm, for matrices too large to
/// factor per-trial. Deterministic for a fixed seed.
pub fn spectral_norm_est<T: Scalar>(w: &Mat<T>, rel_tol: f64, max_iter: usize, seed: u64) -> f64 {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0fe5);
    let n = w.ncols();
    let mut v: Vec<T> = (0..n).map(|_| T::sample_normal(&mut rng)).collect();
    normalize(&mut v);
    let mut sigma = 0.0f64;
    for _ in 0..max_iter {
        let u = w.matvec(&v);
        let s = vec_norm(&u);
        if s == 0.0 {
            return 0.0;
        }
        let mut vt = w.conj_transpose_matvec(&u);
        let t = vec_norm(&vt);
        if t == 0.0 {
            return s;
        }
        for x in vt.iter_mut() {
            *x = x.scale(1.0 / t);
        }
        let new_sigma = t / s; // ||W^H W v|| / ||W v|| -> sigma_1
        v = vt;
        if (new_sigma - sigma).abs() <= rel_tol * new_sigma {
            return new_sigma;
        }
        sigma = new_sigma;
    }
    sigma
}

fn vec_norm<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.modulus_sq()).sum::<f64>().sqrt()
}

fn normalize<T: Scalar>(v: &mut [T]) {
    let n = vec_norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x = x.scale(1.0 / n);
        }
    }
}

/// Volume v_2(W): product of all min(m, n) singular values.
pub fn volume<T: SvdScalar>(w: &Mat<T>) -> Result<f64> {
    Ok(singular_values(w)?.iter().product())
}

/// r-projective volume v_{2,r}(W): product of the leading r singular values.
pub fn projective_volume<T: SvdScalar>(w: &Mat<T>, r: usize) -> Result<f64> {
    if r == 0 || r > w.min_dim() {
        return Err(Error::invalid(format!(
            "projective volume rank {r} outside 1..={}",
            w.min_dim()
        )));
    }
    Ok(singular_values(w)?[..r].iter().product())
}

/// Sum of ln(sigma_j); -inf when the matrix is singular. Used where plain
/// products of singular values would under- or overflow.
pub fn log_volume<T: SvdScalar>(w: &Mat<T>) -> Result<f64> {
    Ok(singular_values(w)?.iter().map(|&s| s.ln()).sum())
}

/// Checks `||(G Sigma H)^+|| <= ||G^+|| ||Sigma^+|| ||H^+||` on full-rank
/// inputs. Property-test support; must hold on every valid input.
pub fn pinv_product_bound_check<T: SvdScalar>(
    g: &Mat<T>,
    sigma: &Mat<T>,
    h: &Mat<T>,
) -> Result<bool> {
    let r = sigma.nrows();
    if sigma.ncols() != r || g.ncols() != r || h.nrows() != r || g.nrows() < r || h.ncols() < r {
        return Err(Error::invalid(
            "expected G k x r, Sigma r x r, H r x l with k, l >= r",
        ));
    }
    for (name, m) in [("G", g), ("Sigma", sigma), ("H", h)] {
        if numerical_rank_rel(m, 1e-13)? < r {
            return Err(Error::invalid(format!("{name} is rank-deficient")));
        }
    }
    let product = g.matmul(sigma).matmul(h);
    let lhs = spectral_norm(&pinv_default(&product)?)?;
    let rhs = spectral_norm(&pinv_default(g)?)?
        * spectral_norm(&pinv_default(sigma)?)?
        * spectral_norm(&pinv_default(h)?)?;
    Ok(lhs <= rhs * (1.0 + 1e-10) + f64::EPSILON)
}

// ---------------------------------------------------------------------------
// Golub-Reinsch: bidiagonalize, then implicit-shift QR on the bidiagonal.
// ---------------------------------------------------------------------------

const MAX_QR_SWEEPS: usize = 64;

fn to_tall(m: &Mat<f64>) -> (Mat<f64>, bool) {
    if m.nrows() >= m.ncols() {
        (m.clone(), false)
    } else {
        (m.transpose(), true)
    }
}

fn golub_reinsch_dispatch(m: &Mat<f64>, want_uv: bool) -> Result<TopSvd<f64>> {
    let (tall, transposed) = to_tall(m);
    let (u, w, v) = golub_reinsch(&tall, want_uv)?;
    let (u, v) = (u.unwrap(), v.unwrap());
    let (u, w, v) = sort_svd(u, w, v);
    if transposed {
        Ok(TopSvd {
            s: v,
            sigma: w,
            t: u,
        })
    } else {
        Ok(TopSvd {
            s: u,
            sigma: w,
            t: v,
        })
    }
}

fn sort_svd<T: Scalar>(u: Mat<T>, w: Vec<f64>, v: Mat<T>) -> (Mat<T>, Vec<f64>, Mat<T>) {
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_by(|&a, &b| w[b].partial_cmp(&w[a]).unwrap());
    if order.iter().enumerate().all(|(i, &o)| i == o) {
        return (u, w, v);
    }
    let su = Mat::from_fn(u.nrows(), w.len(), |i, j| u[(i, order[j])]);
    let sv = Mat::from_fn(v.nrows(), w.len(), |i, j| v[(i, order[j])]);
    let sw = order.iter().map(|&o| w[o]).collect();
    (su, sw, sv)
}

#[inline]
fn same_sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

type FactoredParts<T> = (Option<Mat<T>>, Vec<f64>, Option<Mat<T>>);

/// Core Golub-Reinsch on a tall matrix (m >= n). Returns thin U (m x n),
/// singular values (n, unsorted), and V (n x n). When `want_uv` is false the
/// orthogonal factors are not accumulated and only the values are valid.
#[allow(clippy::needless_range_loop)]
fn golub_reinsch(a_in: &Mat<f64>, want_uv: bool) -> Result<FactoredParts<f64>> {
    let m = a_in.nrows();
    let n = a_in.ncols();
    debug_assert!(m >= n);
    let mut a = a_in.clone();
    let mut v: Mat<f64> = Mat::identity(n);
    let mut w = vec![0.0f64; n];
    let mut rv1 = vec![0.0f64; n];

    // Householder bidiagonalization.
    let mut g = 0.0f64;
    let mut scale = 0.0f64;
    let mut anorm = 0.0f64;
    let mut l = 0usize;
    for i in 0..n {
        l = i + 1;
        rv1[i] = scale * g;
        g = 0.0;
        scale = 0.0;
        if i < m {
            for k in i..m {
                scale += a[(k, i)].abs();
            }
            if scale != 0.0 {
                let mut s = 0.0;
                for k in i..m {
                    a[(k, i)] /= scale;
                    s += a[(k, i)] * a[(k, i)];
                }
                let f = a[(i, i)];
                g = -same_sign(s.sqrt(), f);
                let h = f * g - s;
                a[(i, i)] = f - g;
                for j in l..n {
                    let mut s = 0.0;
                    for k in i..m {
                        s += a[(k, i)] * a[(k, j)];
                    }
                    let f = s / h;
                    for k in i..m {
                        let add = f * a[(k, i)];
                        a[(k, j)] += add;
                    }
                }
                for k in i..m {
                    a[(k, i)] *= scale;
                }
            }
        }
        w[i] = scale * g;
        g = 0.0;
        scale = 0.0;
        if i < m && i != n - 1 {
            for k in l..n {
                scale += a[(i, k)].abs();
            }
            if scale != 0.0 {
                let mut s = 0.0;
                for k in l..n {
                    a[(i, k)] /= scale;
                    s += a[(i, k)] * a[(i, k)];
                }
                let f = a[(i, l)];
                g = -same_sign(s.sqrt(), f);
                let h = f * g - s;
                a[(i, l)] = f - g;
                for k in l..n {
                    rv1[k] = a[(i, k)] / h;
                }
                for j in l..m {
                    let mut s = 0.0;
                    for k in l..n {
                        s += a[(j, k)] * a[(i, k)];
                    }
                    for k in l..n {
                        let add = s * rv1[k];
                        a[(j, k)] += add;
                    }
                }
                for k in l..n {
                    a[(i, k)] *= scale;
                }
            }
        }
        anorm = anorm.max(w[i].abs() + rv1[i].abs());
    }

    if want_uv {
        // Accumulate right-hand transforms.
        for i in (0..n).rev() {
            if i < n - 1 {
                if g != 0.0 {
                    for j in l..n {
                        v[(j, i)] = (a[(i, j)] / a[(i, l)]) / g;
                    }
                    for j in l..n {
                        let mut s = 0.0;
                        for k in l..n {
                            s += a[(i, k)] * v[(k, j)];
                        }
                        for k in l..n {
                            let add = s * v[(k, i)];
                            v[(k, j)] += add;
                        }
                    }
                }
                for j in l..n {
                    v[(i, j)] = 0.0;
                    v[(j, i)] = 0.0;
                }
            }
            v[(i, i)] = 1.0;
            g = rv1[i];
            l = i;
        }

        // Accumulate left-hand transforms.
        for i in (0..n.min(m)).rev() {
            let l = i + 1;
            let g = w[i];
            for j in l..n {
                a[(i, j)] = 0.0;
            }
            if g != 0.0 {
                let ginv = 1.0 / g;
                for j in l..n {
                    let mut s = 0.0;
                    for k in l..m {
                        s += a[(k, i)] * a[(k, j)];
                    }
                    let f = (s / a[(i, i)]) * ginv;
                    for k in i..m {
                        let add = f * a[(k, i)];
                        a[(k, j)] += add;
                    }
                }
                for j in i..m {
                    a[(j, i)] *= ginv;
                }
            } else {
                for j in i..m {
                    a[(j, i)] = 0.0;
                }
            }
            a[(i, i)] += 1.0;
        }
    }

    // Implicit-shift QR on the bidiagonal.
    let eps = f64::EPSILON;
    for k in (0..n).rev() {
        let mut its = 0usize;
        loop {
            its += 1;
            // Find the split point.
            let mut l = k;
            let mut flag = true;
            loop {
                if l == 0 || rv1[l].abs() <= eps * anorm {
                    flag = false;
                    break;
                }
                if w[l - 1].abs() <= eps * anorm {
                    break;
                }
                l -= 1;
            }
            if flag {
                // w[l-1] negligible: cancel rv1[l] by rotations from the left.
                let nm = l - 1;
                let mut c = 0.0;
                let mut s = 1.0;
                for i in l..=k {
                    let f = s * rv1[i];
                    rv1[i] *= c;
                    if f.abs() <= eps * anorm {
                        break;
                    }
                    let g = w[i];
                    let h = f.hypot(g);
                    w[i] = h;
                    let hinv = 1.0 / h;
                    c = g * hinv;
                    s = -f * hinv;
                    if want_uv {
                        for j in 0..m {
                            let y = a[(j, nm)];
                            let z = a[(j, i)];
                            a[(j, nm)] = y * c + z * s;
                            a[(j, i)] = z * c - y * s;
                        }
                    }
                }
            }
            let z = w[k];
            if l == k {
                // Converged; enforce nonnegative singular value.
                if z < 0.0 {
                    w[k] = -z;
                    if want_uv {
                        for j in 0..n {
                            v[(j, k)] = -v[(j, k)];
                        }
                    }
                }
                break;
            }
            if its > MAX_QR_SWEEPS {
                return Err(Error::NumericalFailure(format!(
                    "SVD QR sweep did not converge in {MAX_QR_SWEEPS} iterations"
                )));
            }
            // Wilkinson-style shift from the trailing 2x2.
            let mut x = w[l];
            let nm = k - 1;
            let mut y = w[nm];
            let mut g = rv1[nm];
            let mut h = rv1[k];
            let mut f = ((y - z) * (y + z) + (g - h) * (g + h)) / (2.0 * h * y);
            g = f.hypot(1.0);
            f = ((x - z) * (x + z) + h * ((y / (f + same_sign(g, f))) - h)) / x;
            let mut c = 1.0;
            let mut s = 1.0;
            for j in l..=nm {
                let i = j + 1;
                g = rv1[i];
                y = w[i];
                h = s * g;
                g *= c;
                let mut zz = f.hypot(h);
                rv1[j] = zz;
                c = f / zz;
                s = h / zz;
                f = x * c + g * s;
                g = g * c - x * s;
                h = y * s;
                y *= c;
                if want_uv {
                    for jj in 0..n {
                        let xx = v[(jj, j)];
                        let zz2 = v[(jj, i)];
                        v[(jj, j)] = xx * c + zz2 * s;
                        v[(jj, i)] = zz2 * c - xx * s;
                    }
                }
                zz = f.hypot(h);
                w[j] = zz;
                if zz != 0.0 {
                    let zinv = 1.0 / zz;
                    c = f * zinv;
                    s = h * zinv;
                }
                f = c * g + s * y;
                x = c * y - s * g;
                if want_uv {
                    for jj in 0..m {
                        let yy = a[(jj, j)];
                        let zz2 = a[(jj, i)];
                        a[(jj, j)] = yy * c + zz2 * s;
                        a[(jj, i)] = zz2 * c - yy * s;
                    }
                }
            }
            rv1[l] = 0.0;
            rv1[k] = f;
            w[k] = x;
        }
    }

    if want_uv {
        Ok((Some(a), w, Some(v)))
    } else {
        Ok((None, w, None))
    }
}

// ---------------------------------------------------------------------------
// One-sided Jacobi (generic over the field).
// ---------------------------------------------------------------------------

const MAX_JACOBI_SWEEPS: usize = 100;

fn jacobi_dispatch<T: Scalar>(m: &Mat<T>) -> Result<TopSvd<T>> {
    if m.nrows() >= m.ncols() {
        let (u, w, v) = jacobi_svd(m)?;
        let (u, w, v) = sort_svd(u, w, v);
        Ok(TopSvd {
            s: u,
            sigma: w,
            t: v,
        })
    } else {
        let (u, w, v) = jacobi_svd(&m.conj_transpose())?;
        let (u, w, v) = sort_svd(u, w, v);
        Ok(TopSvd {
            s: v,
            sigma: w,
            t: u,
        })
    }
}

/// One-sided Jacobi on a tall matrix (m >= n): orthogonalize column pairs by
/// right rotations until all pairs are numerically orthogonal.
fn jacobi_svd<T: Scalar>(a_in: &Mat<T>) -> Result<(Mat<T>, Vec<f64>, Mat<T>)> {
    let m = a_in.nrows();
    let n = a_in.ncols();
    debug_assert!(m >= n);
    let mut a = a_in.clone();
    let mut v: Mat<T> = Mat::identity(n);
    let tol = 1e-15;

    let mut converged = false;
    for _ in 0..MAX_JACOBI_SWEEPS {
        converged = true;
        for p in 0..n {
            for q in (p + 1)..n {
                let mut app = 0.0f64;
                let mut aqq = 0.0f64;
                let mut apq = T::ZERO;
                for i in 0..m {
                    let x = a[(i, p)];
                    let y = a[(i, q)];
                    app += x.modulus_sq();
                    aqq += y.modulus_sq();
                    apq += x.conj() * y;
                }
                let off = apq.modulus();
                if off <= tol * (app * aqq).sqrt() || off == 0.0 {
                    continue;
                }
                converged = false;
                // Make the inner product real by a phase on column q.
                let phase = apq.scale(1.0 / off); // e^{i arg(apq)}
                if T::IS_COMPLEX {
                    let ph = phase.conj();
                    for i in 0..m {
                        a[(i, q)] *= ph;
                    }
                    for i in 0..n {
                        v[(i, q)] *= ph;
                    }
                } else if phase.re() < 0.0 {
                    for i in 0..m {
                        a[(i, q)] = -a[(i, q)];
                    }
                    for i in 0..n {
                        v[(i, q)] = -v[(i, q)];
                    }
                }
                // Now the 2x2 Gram block is [[app, off], [off, aqq]].
                let zeta = (aqq - app) / (2.0 * off);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let x = a[(i, p)];
                    let y = a[(i, q)];
                    a[(i, p)] = x.scale(c) - y.scale(s);
                    a[(i, q)] = x.scale(s) + y.scale(c);
                }
                for i in 0..n {
                    let x = v[(i, p)];
                    let y = v[(i, q)];
                    v[(i, p)] = x.scale(c) - y.scale(s);
                    v[(i, q)] = x.scale(s) + y.scale(c);
                }
            }
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::NumericalFailure(format!(
            "one-sided Jacobi did not converge in {MAX_JACOBI_SWEEPS} sweeps"
        )));
    }

    let mut w = vec![0.0f64; n];
    let mut max_sigma = 0.0f64;
    for j in 0..n {
        let norm = (0..m).map(|i| a[(i, j)].modulus_sq()).sum::<f64>().sqrt();
        w[j] = norm;
        max_sigma = max_sigma.max(norm);
    }
    let tiny = max_sigma * (f64::EPSILON * f64::EPSILON);
    for j in 0..n {
        if w[j] > tiny && w[j] > 0.0 {
            let inv = 1.0 / w[j];
            for i in 0..m {
                a[(i, j)] = a[(i, j)].scale(inv);
            }
        } else {
            w[j] = 0.0;
        }
    }
    complete_zero_columns(&mut a, &w);
    Ok((a, w, v))
}

/// Replace columns with zero singular value by an orthonormal completion so
/// the left factor always has orthonormal columns.
fn complete_zero_columns<T: Scalar>(u: &mut Mat<T>, w: &[f64]) {
    let m = u.nrows();
    let n = u.ncols();
    let zero_cols: Vec<usize> = (0..n).filter(|&j| w[j] == 0.0).collect();
    if zero_cols.is_empty() {
        return;
    }
    let mut next_seed = 0usize;
    for &j in &zero_cols {
        'seed: while next_seed < m {
            let mut cand = vec![T::ZERO; m];
            cand[next_seed] = T::ONE;
            next_seed += 1;
            // Modified Gram-Schmidt against nonzero and already-filled columns.
            for _ in 0..2 {
                for k in 0..n {
                    if k == j || (w[k] == 0.0 && k > j) {
                        continue;
                    }
                    let dot: T = (0..m).map(|i| u[(i, k)].conj() * cand[i]).sum();
                    for i in 0..m {
                        let sub = u[(i, k)] * dot;
                        cand[i] -= sub;
                    }
                }
            }
            let norm = cand.iter().map(|x| x.modulus_sq()).sum::<f64>().sqrt();
            if norm > 1e-8 {
                for i in 0..m {
                    u[(i, j)] = cand[i].scale(1.0 / norm);
                }
                break 'seed;
            }
        }
    }
}
