//! CUR factorization: representation, canonical nucleus, reconstruction, and
//! a priori / a posteriori error estimation.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mat::{IndexSet, Mat, NormKind};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::stats;
use crate::svd::{svd, SvdScalar, PINV_REL_TOL};

/// A CUR low-rank approximation of an m x n matrix: row set I (|I| = k),
/// column set J (|J| = l), an l x k nucleus U, and the target rank r, with
/// 0 < r <= k <= m and r <= l <= n. The approximation of W is
/// `W[:, J] * U * W[I, :]`; only the index sets and the small nucleus are
/// stored.
#[derive(Debug, Clone)]
pub struct CurLra<T: Scalar> {
    row_set: IndexSet,
    col_set: IndexSet,
    nucleus: Mat<T>,
    target_rank: usize,
}

impl<T: Scalar> CurLra<T> {
    pub fn new(
        row_set: IndexSet,
        col_set: IndexSet,
        nucleus: Mat<T>,
        target_rank: usize,
    ) -> Result<Self> {
        let (k, l) = (row_set.len(), col_set.len());
        if target_rank == 0 || target_rank > k || target_rank > l {
            return Err(Error::invalid(format!(
                "target rank {target_rank} outside 1..=min(k = {k}, l = {l})"
            )));
        }
        if nucleus.shape() != (l, k) {
            return Err(Error::invalid(format!(
                "nucleus must be l x k = {l} x {k}, found {} x {}",
                nucleus.nrows(),
                nucleus.ncols()
            )));
        }
        Ok(CurLra {
            row_set,
            col_set,
            nucleus,
            target_rank,
        })
    }

    pub fn rows(&self) -> &IndexSet {
        &self.row_set
    }
    pub fn cols(&self) -> &IndexSet {
        &self.col_set
    }
    pub fn nucleus(&self) -> &Mat<T> {
        &self.nucleus
    }
    pub fn target_rank(&self) -> usize {
        self.target_rank
    }
    pub fn k(&self) -> usize {
        self.row_set.len()
    }
    pub fn l(&self) -> usize {
        self.col_set.len()
    }
    /// Source dimensions (m, n).
    pub fn source_shape(&self) -> (usize, usize) {
        (self.row_set.bound(), self.col_set.bound())
    }

    /// Materialize `C U R`. Dense-audit path: costs O(m l k + m k n) and
    /// touches every output entry, so it is reserved for testing and
    /// reporting, not for the sublinear pipelines.
    pub fn reconstruct(&self, w: &Mat<T>) -> Mat<T> {
        let c = w.select_cols(self.col_set.indices());
        let r = w.select_rows(self.row_set.indices());
        c.matmul(&self.nucleus).matmul(&r)
    }

    /// Apply the approximation to a vector without materializing it:
    /// y = C (U (R x)). Touches (m + n) l + k n source entries at most.
    pub fn apply_to_vec(&self, w: &Mat<T>, x: &[T]) -> Vec<T> {
        let r = w.select_rows(self.row_set.indices());
        let rx = r.matvec(x);
        let urx = self.nucleus.matvec(&rx);
        let mut y = vec![T::ZERO; w.nrows()];
        for (i, slot) in y.iter_mut().enumerate() {
            let mut acc = T::ZERO;
            for (jj, &j) in self.col_set.indices().iter().enumerate() {
                acc += w[(i, j)] * urx[jj];
            }
            *slot = acc;
        }
        y
    }
}

impl<T: SvdScalar> CurLra<T> {
    /// Build a CUR approximation from a generator submatrix with the
    /// canonical nucleus.
    pub fn from_generator(w: &Mat<T>, rows: IndexSet, cols: IndexSet, r: usize) -> Result<Self> {
        let generator = w.submatrix(rows.indices(), cols.indices());
        let nucleus = canonical_nucleus(&generator, r)?;
        CurLra::new(rows, cols, nucleus, r)
    }
}

/// Canonical nucleus: the Moore–Penrose pseudo-inverse of the rank-r
/// truncation of the k x l generator. When r = min(k, l) the truncation is
/// the generator itself, and for k = l = r a nonsingular generator yields its
/// exact inverse. In that exact-inverse regime a singular generator is an
/// error (the caller decides the retry policy) rather than a silent
/// pseudo-inverse fallback.
pub fn canonical_nucleus<T: SvdScalar>(w_kl: &Mat<T>, r: usize) -> Result<Mat<T>> {
    let (k, l) = w_kl.shape();
    if r == 0 || r > k.min(l) {
        return Err(Error::invalid(format!(
            "rank {r} outside 1..=min({k}, {l})"
        )));
    }
    let f = svd(w_kl)?;
    let sigma1 = f.sigma[0];
    let cutoff = PINV_REL_TOL * sigma1;
    if k == l && l == r && (sigma1 == 0.0 || f.sigma[r - 1] <= cutoff) {
        return Err(Error::SingularGenerator { k, l, r });
    }
    // U = T_r Sigma_r^+ S_r^H (an l x k matrix).
    let mut t_scaled = f.t.leading_cols(r.min(f.rank()));
    for j in 0..t_scaled.ncols() {
        let inv = if f.sigma[j] > cutoff && f.sigma[j] > 0.0 {
            1.0 / f.sigma[j]
        } else {
            0.0
        };
        for i in 0..t_scaled.nrows() {
            t_scaled[(i, j)] = t_scaled[(i, j)].scale(inv);
        }
    }
    Ok(t_scaled.matmul(&f.s.leading_cols(r.min(f.rank())).conj_transpose()))
}

/// The non-canonical nucleus `U = C^+ W R^+`. Its computation reads the whole
/// matrix, so it is not sublinear; it exists for accuracy comparisons.
pub fn nucleus_two_sided_pinv<T: SvdScalar>(w: &Mat<T>, c: &Mat<T>, r: &Mat<T>) -> Result<Mat<T>> {
    if c.nrows() != w.nrows() || r.ncols() != w.ncols() {
        return Err(Error::invalid(
            "C must be m x l and R k x n for an m x n input",
        ));
    }
    let c_pinv = crate::svd::pinv_default(c)?;
    let r_pinv = crate::svd::pinv_default(r)?;
    Ok(c_pinv.matmul(w).matmul(&r_pinv))
}

/// Error report for a CUR approximation in a chosen norm.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub norm: NormKind,
    pub absolute: f64,
    pub relative: f64,
    /// Optimal rank-r error when available (Eckart–Young reference).
    pub sigma_tail: Option<f64>,
}

/// Dense-audit error evaluation: materializes W - CUR.
pub fn error_report<T: SvdScalar>(
    w: &Mat<T>,
    cur: &CurLra<T>,
    kind: NormKind,
    sigma_tail: Option<f64>,
) -> Result<ErrorReport> {
    let err = w.sub(&cur.reconstruct(w));
    let absolute = crate::svd::norm(&err, kind)?;
    let denom = crate::svd::norm(w, kind)?;
    Ok(ErrorReport {
        norm: kind,
        absolute,
        relative: if denom > 0.0 {
            absolute / denom
        } else {
            absolute
        },
        sigma_tail,
    })
}

/// Inputs for the a priori error bound of a canonical CUR approximation.
#[derive(Debug, Clone)]
pub struct AprioriParams {
    /// Spectral or Frobenius (the Chebyshev norm is not covered).
    pub norm: NormKind,
    pub c_norm: f64,
    pub r_norm: f64,
    pub u_norm: f64,
    /// Optimal rank-r approximation error of the source matrix in `norm`.
    pub sigma_tail: f64,
    pub k: usize,
    pub l: usize,
    pub r: usize,
}

/// Upper bound on |W - CUR| for the canonical nucleus:
///
/// ```text
/// |W - CUR| <= sigma_tail * ((|R| + |C| + sigma_tail
///               + mu * eta * |C| |R| |U|) * xi * |U| + 1)
/// ```
///
/// with eta = 1 if r = min(k, l) and 2 otherwise; mu = 1 for the Frobenius
/// norm, (1 + sqrt 5)/2 for the spectral norm when r < min(k, l) and sqrt 2
/// when r = min(k, l); and xi = 1/(1 - theta) (spectral) or
/// sqrt(k l)/(1 - theta) (Frobenius) for theta = |U| * eta * sigma_tail.
/// The bound is undefined when theta >= 1, which is reported as a distinct
/// error.
pub fn apriori_error_bound(p: &AprioriParams) -> Result<f64> {
    if p.r == 0 || p.r > p.k.min(p.l) {
        return Err(Error::invalid("rank outside generator dimensions"));
    }
    if p.c_norm < 0.0 || p.r_norm < 0.0 || p.u_norm < 0.0 || p.sigma_tail < 0.0 {
        return Err(Error::invalid("norms must be nonnegative"));
    }
    let tight = p.r == p.k.min(p.l);
    let eta = if tight { 1.0 } else { 2.0 };
    let mu = match p.norm {
        NormKind::Frobenius => 1.0,
        NormKind::Spectral => {
            if tight {
                std::f64::consts::SQRT_2
            } else {
                (1.0 + 5.0f64.sqrt()) / 2.0
            }
        }
        NormKind::Chebyshev => {
            return Err(Error::invalid(
                "a priori bound is stated for spectral/Frobenius norms",
            ))
        }
    };
    let delta = eta * p.sigma_tail;
    let theta = p.u_norm * delta;
    if theta >= 1.0 {
        return Err(Error::BoundUnavailable { theta });
    }
    let xi = match p.norm {
        NormKind::Spectral => 1.0 / (1.0 - theta),
        NormKind::Frobenius => ((p.k * p.l) as f64).sqrt() / (1.0 - theta),
        NormKind::Chebyshev => unreachable!(),
    };
    Ok(p.sigma_tail
        * ((p.r_norm + p.c_norm + p.sigma_tail + mu * eta * p.c_norm * p.r_norm * p.u_norm)
            * xi
            * p.u_norm
            + 1.0))
}

/// Sampled a posteriori error estimate on a random q x s index grid.
#[derive(Debug, Clone)]
pub struct SampledError {
    /// Modulus of the sample mean of the error entries.
    pub mean: f64,
    /// Sample variance of the error entries around their mean.
    pub variance: f64,
    /// sqrt(m n / (q s)) * ||E_sample||_F, the unbiased-in-mean-square
    /// Frobenius extrapolation.
    pub frobenius_estimate: f64,
    pub sample_rows: usize,
    pub sample_cols: usize,
    /// Source entries read (sample grid plus the C and R strips involved).
    pub entries_read: u64,
}

impl SampledError {
    /// Two-sided chi-square test of H0: entry variance = `sigma0_sq`,
    /// at significance `alpha`.
    pub fn variance_consistent_with(&self, sigma0_sq: f64, alpha: f64) -> bool {
        let k = (self.sample_rows * self.sample_cols) as f64;
        if sigma0_sq <= 0.0 {
            return self.variance == 0.0;
        }
        let statistic = k * self.variance / sigma0_sq;
        let dof = (self.sample_rows * self.sample_cols - 1).max(1);
        let lo = stats::chi_square_quantile(alpha / 2.0, dof);
        let hi = stats::chi_square_quantile(1.0 - alpha / 2.0, dof);
        statistic >= lo && statistic <= hi
    }
}

/// Evaluate W - CUR on a uniformly random q x s grid only (sublinear in the
/// matrix size), with the sample statistics of the observed error entries
/// supporting variance hypothesis testing.
pub fn posterior_error_sampled<T: Scalar>(
    w: &Mat<T>,
    cur: &CurLra<T>,
    q: usize,
    s: usize,
    rng: &mut Rng,
) -> Result<SampledError> {
    let (m, n) = w.shape();
    if q * s < 100 {
        return Err(Error::invalid(format!(
            "sample grid {q} x {s} below 100 entries"
        )));
    }
    if q > m || s > n {
        return Err(Error::invalid("sample grid exceeds matrix dimensions"));
    }
    let rows = IndexSet::sample_uniform(m, q, rng);
    let cols = IndexSet::sample_uniform(n, s, rng);
    // (C U R) restricted to the grid: W[rows, J] * U * W[I, cols].
    let c_strip = w.submatrix(rows.indices(), cur.cols().indices());
    let r_strip = w.submatrix(cur.rows().indices(), cols.indices());
    let approx = c_strip.matmul(cur.nucleus()).matmul(&r_strip);
    let exact = w.submatrix(rows.indices(), cols.indices());
    let err = exact.sub(&approx);

    let count = (q * s) as f64;
    let mut mean = T::ZERO;
    for &e in err.data() {
        mean += e;
    }
    mean = mean.scale(1.0 / count);
    let variance = err
        .data()
        .iter()
        .map(|&e| (e - mean).modulus_sq())
        .sum::<f64>()
        / count;
    let fro = err.frobenius_norm();
    Ok(SampledError {
        mean: mean.modulus(),
        variance,
        frobenius_estimate: ((m * n) as f64 / count).sqrt() * fro,
        sample_rows: q,
        sample_cols: s,
        entries_read: (q * s + q * cur.l() + cur.k() * s) as u64,
    })
}

// ---------------------------------------------------------------------------
// Archival text format
// ---------------------------------------------------------------------------

/// Write the factorization in a plain text format: a header naming the
/// dimensions, then the index sets, then the nucleus row-major with full
/// f64 precision.
pub fn write_curlra<T: Scalar>(path: impl AsRef<Path>, cur: &CurLra<T>) -> Result<()> {
    let path = path.as_ref();
    let mut w =
        BufWriter::new(File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?);
    let io_err = |e: std::io::Error| Error::io(path.display().to_string(), e);
    let (m, n) = cur.source_shape();
    writeln!(w, "%%CurLra 1 {}", T::field_name()).map_err(io_err)?;
    writeln!(
        w,
        "{} {} {} {} {}",
        m,
        n,
        cur.k(),
        cur.l(),
        cur.target_rank()
    )
    .map_err(io_err)?;
    let fmt_list = |ix: &IndexSet| {
        ix.indices()
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    writeln!(w, "{}", fmt_list(cur.rows())).map_err(io_err)?;
    writeln!(w, "{}", fmt_list(cur.cols())).map_err(io_err)?;
    for i in 0..cur.l() {
        let row: Vec<String> = (0..cur.k())
            .map(|j| {
                let v = cur.nucleus()[(i, j)];
                if T::IS_COMPLEX {
                    format!("{:.17e} {:.17e}", v.re(), v.im())
                } else {
                    format!("{:.17e}", v.re())
                }
            })
            .collect();
        writeln!(w, "{}", row.join(" ")).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_curlra<T: Scalar>(path: impl AsRef<Path>) -> Result<CurLra<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = BufReader::new(file).lines().enumerate().map(|(i, l)| {
        l.map(|v| (i + 1, v))
            .map_err(|e| Error::parse(format!("line {}", i + 1), e.to_string()))
    });
    let mut next_line = || {
        lines
            .next()
            .unwrap_or_else(|| Err(Error::parse("end of file", "truncated CurLra file")))
    };
    let (_, header) = next_line()?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 3 || tokens[0] != "%%CurLra" || tokens[1] != "1" {
        return Err(Error::parse(
            "line 1",
            "expected header '%%CurLra 1 <field>'",
        ));
    }
    if tokens[2] != T::field_name() {
        return Err(Error::invalid(format!(
            "file stores a {} factorization, requested {}",
            tokens[2],
            T::field_name()
        )));
    }
    let (lineno, dims) = next_line()?;
    let vals: Vec<usize> = dims
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| Error::parse(format!("line {lineno}"), format!("bad integer '{t}'")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != 5 {
        return Err(Error::parse(
            format!("line {lineno}"),
            "expected 'm n k l r'",
        ));
    }
    let (m, n, k, l, r) = (vals[0], vals[1], vals[2], vals[3], vals[4]);
    let parse_set = |line: (usize, String), bound: usize, count: usize| -> Result<IndexSet> {
        let (lineno, text) = line;
        let ix: Vec<usize> = text
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::parse(format!("line {lineno}"), format!("bad index '{t}'")))
            })
            .collect::<Result<_>>()?;
        if ix.len() != count {
            return Err(Error::parse(
                format!("line {lineno}"),
                format!("expected {count} indices, found {}", ix.len()),
            ));
        }
        IndexSet::new(ix, bound)
    };
    let rows = parse_set(next_line()?, m, k)?;
    let cols = parse_set(next_line()?, n, l)?;
    let mut nucleus: Mat<T> = Mat::zeros(l, k);
    for i in 0..l {
        let (lineno, text) = next_line()?;
        let nums: Vec<f64> = text
            .split_whitespace()
            .map(|t| {
                t.parse().map_err(|_| {
                    Error::parse(format!("line {lineno}"), format!("bad number '{t}'"))
                })
            })
            .collect::<Result<_>>()?;
        let per = if T::IS_COMPLEX { 2 } else { 1 };
        if nums.len() != k * per {
            return Err(Error::parse(
                format!("line {lineno}"),
                format!("expected {} values, found {}", k * per, nums.len()),
            ));
        }
        for j in 0..k {
            nucleus[(i, j)] = if T::IS_COMPLEX {
                let re = nums[2 * j];
                let im = nums[2 * j + 1];
                // Assemble via re + im * i in the generic field.
                let mut v = T::from_re(re);
                let imag_unit = imaginary_unit::<T>();
                v += imag_unit.scale(im);
                v
            } else {
                T::from_re(nums[j])
            };
        }
    }
    CurLra::new(rows, cols, nucleus, r)
}

fn imaginary_unit<T: Scalar>() -> T {
    // For the real field this returns 0, and imaginary parts are rejected by
    // the field tag check above.
    if T::IS_COMPLEX {
        let c = num_complex::Complex64::new(0.0, 1.0);
        // Safe: the only complex Scalar is Complex64.
        let any: &dyn std::any::Any = &c;
        *any.downcast_ref::<T>().expect("complex field is Complex64")
    } else {
        T::ZERO
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{gen_factor_gaussian, gen_plus_minus_delta, FactorKind};
    use crate::rng;
    use crate::svd::{numerical_rank, singular_values, spectral_norm};

    #[test]
    fn canonical_nucleus_small_cases() {
        let w: Mat<f64> = Mat::from_rows(vec![vec![5.0]]);
        let u = canonical_nucleus(&w, 1).unwrap();
        assert!((u[(0, 0)] - 0.2).abs() < 1e-14);

        let ones: Mat<f64> = Mat::from_fn(2, 2, |_, _| 1.0);
        let u = canonical_nucleus(&ones, 1).unwrap();
        assert!(u.sub(&ones.scale(0.25)).frobenius_norm() < 1e-12);

        // Truncation kills the tiny singular value.
        let d: Mat<f64> = Mat::diag(&[3.0, 1e-9]);
        let u = canonical_nucleus(&d, 1).unwrap();
        assert!((u[(0, 0)] - 1.0 / 3.0).abs() < 1e-12);
        assert!(u[(1, 1)].abs() < 1e-14);
    }

    #[test]
    fn exact_inverse_mode_flags_singular_generator() {
        let z: Mat<f64> = Mat::zeros(1, 1);
        match canonical_nucleus(&z, 1) {
            Err(Error::SingularGenerator { k: 1, l: 1, r: 1 }) => {}
            other => panic!("expected SingularGenerator, got {other:?}"),
        }
        // Same shape but r < min(k, l): a zero generator is fine (zero nucleus).
        let z: Mat<f64> = Mat::zeros(2, 2);
        let u = canonical_nucleus(&z, 1).unwrap();
        assert_eq!(u.frobenius_norm(), 0.0);
        assert!(canonical_nucleus(&z, 3).is_err());
    }

    #[test]
    fn exact_on_rank_r_inputs() {
        let mut rng = rng::seeded(101);
        for trial in 0..20 {
            let (m, n, r) = (24 + trial % 8, 20 + trial % 5, 2 + trial % 3);
            let fg = gen_factor_gaussian(m, n, r, FactorKind::Scaled { sigma: 1.0 }, 0.0, &mut rng)
                .unwrap();
            let rows = IndexSet::sample_uniform(m, r + 2, &mut rng);
            let cols = IndexSet::sample_uniform(n, r + 2, &mut rng);
            let cur = CurLra::from_generator(&fg.w, rows, cols, r).unwrap();
            let rep = error_report(&fg.w, &cur, NormKind::Frobenius, None).unwrap();
            assert!(rep.relative <= 1e-9, "trial {trial}: rel {}", rep.relative);
        }
    }

    #[test]
    fn identity_leading_block() {
        let n = 6;
        let r = 2;
        let w: Mat<f64> = Mat::identity(n);
        let rows = IndexSet::new((0..r).collect(), n).unwrap();
        let cols = IndexSet::new((0..r).collect(), n).unwrap();
        let cur = CurLra::from_generator(&w, rows, cols, r).unwrap();
        let approx = cur.reconstruct(&w);
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j && i < r { 1.0 } else { 0.0 };
                assert!((approx[(i, j)] - expect).abs() < 1e-12);
            }
        }
        let err = w.sub(&approx);
        assert_eq!(numerical_rank(&err, 1e-9).unwrap(), n - r);
    }

    #[test]
    fn delta_matrix_outside_generator_is_missed() {
        // The +-1 entry lies outside the selected rows and columns: the CUR
        // approximation is zero and the Chebyshev error is 1.
        let w = gen_plus_minus_delta(6, 6, 5, 5, false).unwrap();
        let rows = IndexSet::new(vec![0, 1], 6).unwrap();
        let cols = IndexSet::new(vec![0, 1], 6).unwrap();
        let cur = CurLra::from_generator(&w, rows, cols, 1).unwrap();
        let rep = error_report(&w, &cur, NormKind::Chebyshev, None).unwrap();
        assert!((rep.absolute - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rank_agreement_on_perturbed_factor_gaussian() {
        let mut rng = rng::seeded(77);
        let fg = gen_factor_gaussian(
            32,
            32,
            4,
            FactorKind::Scaled { sigma: 1.0 },
            1e-10,
            &mut rng,
        )
        .unwrap();
        let rows = IndexSet::sample_uniform(32, 8, &mut rng);
        let cols = IndexSet::sample_uniform(32, 8, &mut rng);
        let c = fg.w.select_cols(cols.indices());
        let r = fg.w.select_rows(rows.indices());
        let gen = fg.w.submatrix(rows.indices(), cols.indices());
        let tol = crate::svd::NUMERICAL_RANK_TOL;
        let nr_w = numerical_rank(&fg.w, tol).unwrap();
        assert_eq!(nr_w, 4);
        assert_eq!(numerical_rank(&c, tol).unwrap(), nr_w);
        assert_eq!(numerical_rank(&r, tol).unwrap(), nr_w);
        assert_eq!(numerical_rank(&gen, tol).unwrap(), nr_w);
    }

    #[test]
    fn error_never_beats_eckart_young() {
        let mut rng = rng::seeded(5);
        let w = crate::gen::gen_gaussian(12, 10, &mut rng);
        let sv = singular_values(&w).unwrap();
        let r = 3;
        let rows = IndexSet::sample_uniform(12, 5, &mut rng);
        let cols = IndexSet::sample_uniform(10, 5, &mut rng);
        let cur = CurLra::from_generator(&w, rows, cols, r).unwrap();
        let rep = error_report(&w, &cur, NormKind::Spectral, Some(sv[r])).unwrap();
        assert!(rep.absolute + 1e-12 >= sv[r]);
        assert!(rep.relative >= 0.0);
    }

    #[test]
    fn apriori_bound_dominates_measured_error() {
        let mut rng = rng::seeded(31);
        for trial in 0..20 {
            let fg =
                gen_factor_gaussian(6, 6, 2, FactorKind::Scaled { sigma: 1.0 }, 1e-8, &mut rng)
                    .unwrap();
            let k = 3;
            let rows = IndexSet::sample_uniform(6, k, &mut rng);
            let cols = IndexSet::sample_uniform(6, k, &mut rng);
            let cur = match CurLra::from_generator(&fg.w, rows, cols, 2) {
                Ok(c) => c,
                Err(_) => continue,
            };
            let sv = singular_values(&fg.w).unwrap();
            let sigma_tail = sv[2];
            let params = AprioriParams {
                norm: NormKind::Spectral,
                c_norm: spectral_norm(&fg.w.select_cols(cur.cols().indices())).unwrap(),
                r_norm: spectral_norm(&fg.w.select_rows(cur.rows().indices())).unwrap(),
                u_norm: spectral_norm(cur.nucleus()).unwrap(),
                sigma_tail,
                k,
                l: k,
                r: 2,
            };
            match apriori_error_bound(&params) {
                Ok(bound) => {
                    let rep =
                        error_report(&fg.w, &cur, NormKind::Spectral, Some(sigma_tail)).unwrap();
                    assert!(
                        rep.absolute <= bound * (1.0 + 1e-9),
                        "trial {trial}: err {} > bound {bound}",
                        rep.absolute
                    );
                }
                Err(Error::BoundUnavailable { .. }) => {} // ill-conditioned draw
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn apriori_bound_zero_tail_and_theta_guard() {
        let p = AprioriParams {
            norm: NormKind::Frobenius,
            c_norm: 2.0,
            r_norm: 3.0,
            u_norm: 1.0,
            sigma_tail: 0.0,
            k: 4,
            l: 4,
            r: 2,
        };
        assert_eq!(apriori_error_bound(&p).unwrap(), 0.0);

        let p = AprioriParams {
            u_norm: 10.0,
            sigma_tail: 0.2,
            ..p
        };
        match apriori_error_bound(&p) {
            Err(Error::BoundUnavailable { theta }) => assert!(theta >= 1.0),
            other => panic!("expected BoundUnavailable, got {other:?}"),
        }
    }

    #[test]
    fn sampled_error_on_exact_decomposition_is_zero() {
        let mut rng = rng::seeded(3);
        let fg = gen_factor_gaussian(40, 30, 3, FactorKind::Scaled { sigma: 1.0 }, 0.0, &mut rng)
            .unwrap();
        let rows = IndexSet::sample_uniform(40, 5, &mut rng);
        let cols = IndexSet::sample_uniform(30, 5, &mut rng);
        let cur = CurLra::from_generator(&fg.w, rows, cols, 3).unwrap();
        let se = posterior_error_sampled(&fg.w, &cur, 10, 10, &mut rng).unwrap();
        assert!(se.mean < 1e-10 && se.variance < 1e-20 && se.frobenius_estimate < 1e-8);
        assert!(posterior_error_sampled(&fg.w, &cur, 5, 5, &mut rng).is_err());
    }

    #[test]
    fn sampled_error_variance_matches_noise_level() {
        // W = CUR + 1e-6 * noise, with the noise vanishing on the selected
        // strips so the error matrix is exactly the injected noise.
        let mut rng = rng::seeded(13);
        let fg = gen_factor_gaussian(64, 64, 4, FactorKind::Scaled { sigma: 1.0 }, 0.0, &mut rng)
            .unwrap();
        let rows = IndexSet::sample_uniform(64, 4, &mut rng);
        let cols = IndexSet::sample_uniform(64, 4, &mut rng);
        let cur = CurLra::from_generator(&fg.w, rows.clone(), cols.clone(), 4).unwrap();
        let mut noise = crate::gen::gen_gaussian(64, 64, &mut rng).scale(1e-6);
        for &i in rows.indices() {
            for j in 0..64 {
                noise[(i, j)] = 0.0;
            }
        }
        for &j in cols.indices() {
            for i in 0..64 {
                noise[(i, j)] = 0.0;
            }
        }
        let noisy = fg.w.add(&noise);
        let se = posterior_error_sampled(&noisy, &cur, 20, 20, &mut rng).unwrap();
        assert!(
            se.variance > 0.5e-12 && se.variance < 2.0e-12,
            "variance {}",
            se.variance
        );
    }

    #[test]
    fn variance_hypothesis_test_accepts_and_rejects() {
        use rand_distr::Distribution;
        let mut rng = rng::seeded(14);
        let sample: Vec<f64> = (0..400)
            .map(|_| {
                let g: f64 = rand_distr::StandardNormal.sample(&mut rng);
                1e-6 * g
            })
            .collect();
        let (_, variance) = crate::stats::mean_variance(&sample);
        let se = SampledError {
            mean: 0.0,
            variance,
            frobenius_estimate: 0.0,
            sample_rows: 20,
            sample_cols: 20,
            entries_read: 400,
        };
        assert!(se.variance_consistent_with(1e-12, 0.01));
        assert!(!se.variance_consistent_with(1e-10, 0.01));
        assert!(!se.variance_consistent_with(1e-14, 0.01));
    }

    #[test]
    fn frobenius_extrapolation_within_factor_two() {
        let mut rng = rng::seeded(41);
        let mut ok = 0;
        for _ in 0..50 {
            let fg =
                gen_factor_gaussian(48, 40, 3, FactorKind::Scaled { sigma: 1.0 }, 0.0, &mut rng)
                    .unwrap();
            let noise = crate::gen::gen_gaussian(48, 40, &mut rng).scale(1e-5);
            let noisy = fg.w.add(&noise);
            let rows = IndexSet::sample_uniform(48, 5, &mut rng);
            let cols = IndexSet::sample_uniform(40, 5, &mut rng);
            let cur = match CurLra::from_generator(&noisy, rows, cols, 3) {
                Ok(c) => c,
                Err(_) => continue,
            };
            let truth = noisy.sub(&cur.reconstruct(&noisy)).frobenius_norm();
            let se = posterior_error_sampled(&noisy, &cur, 20, 20, &mut rng).unwrap();
            if se.frobenius_estimate >= truth / 2.0 && se.frobenius_estimate <= truth * 2.0 {
                ok += 1;
            }
        }
        assert_eq!(ok, 50, "extrapolation left the factor-2 corridor");
    }

    #[test]
    fn two_sided_pinv_nucleus_exact_and_comparable() {
        let eye: Mat<f64> = Mat::identity(4);
        let u = nucleus_two_sided_pinv(&eye, &eye, &eye).unwrap();
        assert!(u.sub(&eye).frobenius_norm() < 1e-12);

        let mut rng = rng::seeded(19);
        let fg = gen_factor_gaussian(24, 20, 3, FactorKind::Scaled { sigma: 1.0 }, 0.0, &mut rng)
            .unwrap();
        let rows = IndexSet::sample_uniform(24, 5, &mut rng);
        let cols = IndexSet::sample_uniform(20, 5, &mut rng);
        let c = fg.w.select_cols(cols.indices());
        let r = fg.w.select_rows(rows.indices());
        let u = nucleus_two_sided_pinv(&fg.w, &c, &r).unwrap();
        let approx = c.matmul(&u).matmul(&r);
        let rel = fg.w.sub(&approx).frobenius_norm() / fg.w.frobenius_norm();
        assert!(rel < 1e-9, "rel {rel}");

        // Paired comparison on a perturbed input: the two nuclei stay within
        // a factor-10 corridor of one another.
        let noisy =
            fg.w.add(&crate::gen::gen_gaussian(24, 20, &mut rng).scale(1e-7));
        let cur = CurLra::from_generator(&noisy, rows.clone(), cols.clone(), 3).unwrap();
        let canon_err = noisy.sub(&cur.reconstruct(&noisy)).frobenius_norm();
        let c2 = noisy.select_cols(cols.indices());
        let r2 = noisy.select_rows(rows.indices());
        let u2 = nucleus_two_sided_pinv(&noisy, &c2, &r2).unwrap();
        let two_sided_err = noisy.sub(&c2.matmul(&u2).matmul(&r2)).frobenius_norm();
        assert!(two_sided_err <= canon_err * 10.0 && canon_err <= two_sided_err * 10.0);
    }

    #[test]
    fn curlra_roundtrip_on_disk() {
        let mut rng = rng::seeded(53);
        let fg = gen_factor_gaussian(12, 10, 2, FactorKind::Scaled { sigma: 1.0 }, 0.0, &mut rng)
            .unwrap();
        let rows = IndexSet::sample_uniform(12, 3, &mut rng);
        let cols = IndexSet::sample_uniform(10, 4, &mut rng);
        let cur = CurLra::from_generator(&fg.w, rows, cols, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("factorization.cur");
        write_curlra(&path, &cur).unwrap();
        let back: CurLra<f64> = read_curlra(&path).unwrap();
        assert_eq!(back.rows().indices(), cur.rows().indices());
        assert_eq!(back.cols().indices(), cur.cols().indices());
        assert_eq!(back.target_rank(), 2);
        assert!(back.nucleus().sub(cur.nucleus()).frobenius_norm() == 0.0);
        assert!(read_curlra::<num_complex::Complex64>(&path).is_err());
    }

    #[test]
    fn apply_to_vec_matches_reconstruction() {
        let mut rng = rng::seeded(61);
        let fg = gen_factor_gaussian(15, 12, 2, FactorKind::Scaled { sigma: 1.0 }, 1e-9, &mut rng)
            .unwrap();
        let rows = IndexSet::sample_uniform(15, 4, &mut rng);
        let cols = IndexSet::sample_uniform(12, 4, &mut rng);
        let cur = CurLra::from_generator(&fg.w, rows, cols, 2).unwrap();
        let x: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let dense = cur.reconstruct(&fg.w).matvec(&x);
        let lazy = cur.apply_to_vec(&fg.w, &x);
        for i in 0..15 {
            assert!((dense[i] - lazy[i]).abs() < 1e-10);
        }
    }
}
