//! Randomized multiplicative pre-processors: dense Gaussian, subsampled
//! randomized Hadamard/Fourier transforms, their depth-abridged sparse
//! variants, and quasi-Gaussian products of random bidiagonal factors — plus
//! the CUR pipelines that consume them.
//!
//! An operator represents an n x u multiplier H applied on the right of the
//! input (`W -> W H`). The fast primitive is therefore the transposed apply
//! `H^T x`, which maps one row of W to one row of the sketch.

use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::mat::{IndexSet, Mat};
use crate::pipelines::{
    cur_via_leverage_with_scores, CountedMat, LeverageScores, PipelineOpts, PipelineOutput,
    Sampler, ScoresMode,
};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::skeleton::{canonical_nucleus, CurLra};
use crate::svd::SvdScalar;

/// Declarative multiplier description, as it appears in configuration files.
#[derive(Debug, Clone, PartialEq)]
pub enum MultiplierSpec {
    Gaussian {
        n: usize,
        u: usize,
    },
    Srht {
        n: usize,
        l: usize,
    },
    Srft {
        n: usize,
        l: usize,
    },
    Arht {
        n: usize,
        d: usize,
        l: Option<usize>,
    },
    Arft {
        n: usize,
        d: usize,
        l: Option<usize>,
    },
    QuasiGaussian {
        n: usize,
        t: usize,
    },
}

impl MultiplierSpec {
    pub fn input_dim(&self) -> usize {
        match *self {
            MultiplierSpec::Gaussian { n, .. }
            | MultiplierSpec::Srht { n, .. }
            | MultiplierSpec::Srft { n, .. }
            | MultiplierSpec::Arht { n, .. }
            | MultiplierSpec::Arft { n, .. }
            | MultiplierSpec::QuasiGaussian { n, .. } => n,
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(
            self,
            MultiplierSpec::Srft { .. } | MultiplierSpec::Arft { .. }
        )
    }
}

// ---------------------------------------------------------------------------
// Structured operators
// ---------------------------------------------------------------------------

enum OpBody<T: Scalar> {
    Dense(Mat<T>),
    /// Depth-d abridged Hadamard butterfly H_2^{(x) d} (x) I_s.
    Hadamard {
        depth: usize,
    },
    /// Depth-d abridged decimation-in-frequency Fourier network.
    Fourier {
        depth: usize,
    },
    /// Product of unit-diagonal cyclic bidiagonal factors times random
    /// permutations; `signs[0]` is the wrap entry at (0, n-1).
    Bidiagonal {
        factors: Vec<(Vec<f64>, Vec<usize>)>,
    },
}

/// An opaque n x u multiplier with a fast apply path. The operator is
/// `scale * D * Core * P * S`: a random diagonal D, the structured core, a
/// random permutation P, and an optional distinct-column sampling S.
///
/// Transform kinds that need a power-of-two size zero-pad the input up to
/// the next power of two and drop the padding rows on the way back; the
/// logical (unpadded) input dimension is what [`dims`](Self::dims) reports
/// and [`is_padded`](Self::is_padded) flags the expansion.
pub struct StructuredOp<T: Scalar> {
    /// Internal (possibly padded) transform dimension.
    n: usize,
    /// Logical input dimension, n minus the zero padding.
    logical_n: usize,
    u: usize,
    body: OpBody<T>,
    diag: Option<Vec<T>>,
    perm: Option<Vec<usize>>,
    col_sample: Option<Vec<usize>>,
    scale: f64,
    flops_per_apply: u64,
}

impl<T: Scalar> StructuredOp<T> {
    /// (logical input dimension n, output dimension u).
    pub fn dims(&self) -> (usize, usize) {
        (self.logical_n, self.u)
    }

    /// Whether the transform operates on a zero-padded copy of the input.
    pub fn is_padded(&self) -> bool {
        self.logical_n != self.n
    }

    /// Estimated flops of one fast apply.
    pub fn flop_estimate(&self) -> u64 {
        self.flops_per_apply
    }

    /// Audit accessor: the random diagonal D, when the operator has one.
    pub fn diagonal(&self) -> Option<&[T]> {
        self.diag.as_deref()
    }

    /// Audit accessor: the random permutation P, when the operator has one
    /// (`(P y)_i = y[perm[i]]`).
    pub fn permutation(&self) -> Option<&[usize]> {
        self.perm.as_deref()
    }

    /// Rescale factor that makes the core orthonormal (1 for operators that
    /// already carry their normalization, e.g. SRHT/SRFT).
    pub fn unitary_scale(&self) -> f64 {
        match &self.body {
            OpBody::Hadamard { depth } | OpBody::Fourier { depth } if self.scale == 1.0 => {
                0.5f64.powf(*depth as f64 / 2.0)
            }
            _ => 1.0,
        }
    }

    /// y = H x.
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        self.apply_with_count(x).0
    }

    pub fn apply_with_count(&self, x: &[T]) -> (Vec<T>, u64) {
        assert_eq!(x.len(), self.u, "apply expects a u-vector");
        let mut count = 0u64;
        // S: scatter the u sampled coordinates into n slots.
        let mut y = match &self.col_sample {
            Some(sample) => {
                let mut full = vec![T::ZERO; self.n];
                for (j, &pos) in sample.iter().enumerate() {
                    full[pos] = x[j];
                }
                full
            }
            None => x.to_vec(),
        };
        // P: (P y)_i = y[perm[i]].
        if let Some(perm) = &self.perm {
            let mut permuted = vec![T::ZERO; self.n];
            for i in 0..self.n {
                permuted[i] = y[perm[i]];
            }
            y = permuted;
        }
        y = self.core_apply(y, &mut count);
        if let Some(diag) = &self.diag {
            for (v, d) in y.iter_mut().zip(diag) {
                *v *= *d;
            }
        }
        if self.scale != 1.0 {
            for v in y.iter_mut() {
                *v = v.scale(self.scale);
            }
        }
        // Drop the padding rows on the way back.
        y.truncate(self.logical_n);
        (y, count)
    }

    /// y = H^T x — the right-multiplication primitive: row i of W H equals
    /// `apply_transpose(row i of W)`.
    pub fn apply_transpose(&self, x: &[T]) -> Vec<T> {
        self.apply_transpose_with_count(x).0
    }

    pub fn apply_transpose_with_count(&self, x: &[T]) -> (Vec<T>, u64) {
        assert_eq!(
            x.len(),
            self.logical_n,
            "apply_transpose expects an n-vector"
        );
        let mut count = 0u64;
        let mut y = x.to_vec();
        // Zero-pad to the internal transform size.
        y.resize(self.n, T::ZERO);
        if let Some(diag) = &self.diag {
            // D^T = D for a diagonal.
            for (v, d) in y.iter_mut().zip(diag) {
                *v *= *d;
            }
        }
        y = self.core_apply_transpose(y, &mut count);
        if let Some(perm) = &self.perm {
            // P^T: out[perm[i]] = y[i].
            let mut permuted = vec![T::ZERO; self.n];
            for i in 0..self.n {
                permuted[perm[i]] = y[i];
            }
            y = permuted;
        }
        let mut out = match &self.col_sample {
            Some(sample) => sample.iter().map(|&pos| y[pos]).collect(),
            None => y,
        };
        if self.scale != 1.0 {
            for v in out.iter_mut() {
                *v = v.scale(self.scale);
            }
        }
        (out, count)
    }

    /// y = H^H x via conjugation of the transpose path.
    pub fn apply_hermitian(&self, x: &[T]) -> Vec<T> {
        let conj_x: Vec<T> = x.iter().map(|v| v.conj()).collect();
        self.apply(&conj_x).into_iter().map(|v| v.conj()).collect()
    }

    /// Sketch W -> W H, one fast transposed apply per row.
    pub fn sketch(&self, w: &Mat<T>) -> Mat<T> {
        assert_eq!(w.ncols(), self.logical_n);
        let mut out: Mat<T> = Mat::zeros(w.nrows(), self.u);
        for i in 0..w.nrows() {
            let row = self.apply_transpose(w.row(i));
            out.set_row(i, &row);
        }
        out
    }

    /// Materialize H (audit path; the columns are `apply` on basis vectors
    /// of the *output* side via rows of H^T).
    pub fn densify(&self) -> Mat<T> {
        let mut h: Mat<T> = Mat::zeros(self.logical_n, self.u);
        let mut e = vec![T::ZERO; self.logical_n];
        for i in 0..self.logical_n {
            e[i] = T::ONE;
            let row = self.apply_transpose(&e);
            h.set_row(i, &row);
            e[i] = T::ZERO;
        }
        h
    }

    /// Pseudo-inverse applied from the right: `M -> M H^+`. Orthogonal cores
    /// use H^+ = H^H / gamma (the fast path); dense and bidiagonal cores fall
    /// back to an explicit pseudo-inverse.
    pub fn right_pinv_apply(&self, m: &Mat<T>) -> Result<Mat<T>>
    where
        T: SvdScalar,
    {
        assert_eq!(m.ncols(), self.u);
        match &self.body {
            OpBody::Hadamard { .. } | OpBody::Fourier { .. } if self.col_sample.is_none() => {
                // H^H H = gamma I with gamma = 2^d scale^2.
                let gamma =
                    1.0 / (self.unitary_scale() * self.unitary_scale()) * self.scale * self.scale;
                let mut out: Mat<T> = Mat::zeros(m.nrows(), self.logical_n);
                for i in 0..m.nrows() {
                    let row = self.apply_hermitian_transpose_row(m.row(i));
                    out.set_row(i, &row);
                }
                Ok(out.scale(1.0 / gamma))
            }
            _ => {
                let h = self.densify();
                let h_pinv = crate::svd::pinv_default(&h)?;
                Ok(m.matmul(&h_pinv))
            }
        }
    }

    /// (M H^H) row: row_i(M) * H^H = conj(H * conj(row_i)).
    fn apply_hermitian_transpose_row(&self, row: &[T]) -> Vec<T> {
        let conj_row: Vec<T> = row.iter().map(|v| v.conj()).collect();
        self.apply(&conj_row)
            .into_iter()
            .map(|v| v.conj())
            .collect()
    }

    fn core_apply(&self, mut y: Vec<T>, count: &mut u64) -> Vec<T> {
        match &self.body {
            OpBody::Dense(g) => {
                *count += (g.nrows() * g.ncols()) as u64 * 2;
                g.matvec(&y)
            }
            OpBody::Hadamard { depth } => {
                hadamard_apply(&mut y, *depth, count);
                y
            }
            OpBody::Fourier { depth } => fourier_apply(y, *depth, count),
            OpBody::Bidiagonal { factors } => {
                // G = F_1 ... F_T: the rightmost factor applies first.
                for (signs, perm) in factors.iter().rev() {
                    y = bidiag_factor_apply(&y, signs, perm);
                    *count += y.len() as u64 * 2;
                }
                y
            }
        }
    }

    fn core_apply_transpose(&self, mut y: Vec<T>, count: &mut u64) -> Vec<T> {
        match &self.body {
            OpBody::Dense(g) => {
                *count += (g.nrows() * g.ncols()) as u64 * 2;
                let gt = g.transpose();
                gt.matvec(&y)
            }
            OpBody::Hadamard { depth } => {
                // H_2^{(x) d} (x) I_s is symmetric.
                hadamard_apply(&mut y, *depth, count);
                y
            }
            OpBody::Fourier { depth } => fourier_apply_transpose(y, *depth, count),
            OpBody::Bidiagonal { factors } => {
                for (signs, perm) in factors.iter() {
                    y = bidiag_factor_apply_transpose(&y, signs, perm);
                    *count += y.len() as u64 * 2;
                }
                y
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Fast cores
// ---------------------------------------------------------------------------

fn is_power_of_two(n: usize) -> bool {
    n >= 2 && n & (n - 1) == 0
}

/// Internal transform size for a logical dimension n: n itself when it is a
/// power of two, otherwise the next power of two (zero-padding policy).
fn padded_size(n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::invalid("transform size must be at least 2"));
    }
    Ok(if is_power_of_two(n) {
        n
    } else {
        n.next_power_of_two()
    })
}

/// In-place depth-d abridged Walsh-Hadamard butterfly: H = H_2^{(x) d} (x) I_s
/// for s = n / 2^d. Exactly d*n additions/subtractions.
fn hadamard_apply<T: Scalar>(x: &mut [T], depth: usize, count: &mut u64) {
    let n = x.len();
    let s = n >> depth;
    for level in 0..depth {
        let stride = s << level;
        let block = stride * 2;
        let mut base = 0;
        while base < n {
            for off in 0..stride {
                let a = x[base + off];
                let b = x[base + off + stride];
                x[base + off] = a + b;
                x[base + off + stride] = a - b;
            }
            *count += 2 * stride as u64;
            base += block;
        }
    }
}

fn root_of_unity<T: Scalar>(n: usize, k: usize) -> T {
    // The complex core never runs for real T; the generic signature keeps
    // the recursion uniform.
    let angle = std::f64::consts::TAU * k as f64 / n as f64;
    if T::IS_COMPLEX {
        let c = Complex64::new(angle.cos(), angle.sin());
        let any: &dyn std::any::Any = &c;
        *any.downcast_ref::<T>()
            .expect("complex scalar is Complex64")
    } else {
        T::from_re(if k == 0 { 1.0 } else { angle.cos() })
    }
}

/// Depth-d decimation-in-frequency radix-2 Fourier network with the bottom
/// recursion replaced by the identity: exact DFT (omega = exp(2 pi i / n))
/// at full depth. 1.5 n complex operations per level.
fn fourier_apply<T: Scalar>(x: Vec<T>, depth: usize, count: &mut u64) -> Vec<T> {
    let n = x.len();
    if depth == 0 || n == 1 {
        return x;
    }
    let half = n / 2;
    let mut top = Vec::with_capacity(half);
    let mut bottom = Vec::with_capacity(half);
    for i in 0..half {
        let a = x[i];
        let b = x[i + half];
        top.push(a + b);
        bottom.push((a - b) * root_of_unity::<T>(n, i));
    }
    *count += 3 * half as u64; // n additions + n/2 twiddle products
    let top = fourier_apply(top, depth - 1, count);
    let bottom = fourier_apply(bottom, depth - 1, count);
    let mut out = vec![T::ZERO; n];
    for k in 0..half {
        out[2 * k] = top[k];
        out[2 * k + 1] = bottom[k];
    }
    out
}

/// Transpose of the network above.
fn fourier_apply_transpose<T: Scalar>(x: Vec<T>, depth: usize, count: &mut u64) -> Vec<T> {
    let n = x.len();
    if depth == 0 || n == 1 {
        return x;
    }
    let half = n / 2;
    let mut top = Vec::with_capacity(half);
    let mut bottom = Vec::with_capacity(half);
    for k in 0..half {
        top.push(x[2 * k]);
        bottom.push(x[2 * k + 1]);
    }
    let top = fourier_apply_transpose(top, depth - 1, count);
    let bottom = fourier_apply_transpose(bottom, depth - 1, count);
    let mut out = vec![T::ZERO; n];
    for i in 0..half {
        let t = bottom[i] * root_of_unity::<T>(n, i);
        out[i] = top[i] + t;
        out[i + half] = top[i] - t;
    }
    *count += 3 * half as u64;
    out
}

/// z = B y for the unit-diagonal cyclic bidiagonal B (signs[0] at the
/// top-right wrap position).
fn bidiag_factor_apply<T: Scalar>(y: &[T], signs: &[f64], perm: &[usize]) -> Vec<T> {
    let n = y.len();
    let permuted: Vec<T> = (0..n).map(|i| y[perm[i]]).collect();
    let mut z = vec![T::ZERO; n];
    z[0] = permuted[0] + permuted[n - 1].scale(signs[0]);
    for i in 1..n {
        z[i] = permuted[i] + permuted[i - 1].scale(signs[i]);
    }
    z
}

fn bidiag_factor_apply_transpose<T: Scalar>(y: &[T], signs: &[f64], perm: &[usize]) -> Vec<T> {
    let n = y.len();
    let mut z = vec![T::ZERO; n];
    for i in 0..n - 1 {
        z[i] = y[i] + y[i + 1].scale(signs[i + 1]);
    }
    z[n - 1] = y[n - 1] + y[0].scale(signs[0]);
    let mut out = vec![T::ZERO; n];
    for i in 0..n {
        out[perm[i]] = z[i];
    }
    out
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

fn random_perm(n: usize, rng: &mut Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        p.swap(i, j);
    }
    p
}

fn random_signs(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// Dense Gaussian multiplier (n x u).
pub fn build_gaussian(n: usize, u: usize, rng: &mut Rng) -> StructuredOp<f64> {
    let g: Mat<f64> = Mat::from_vec(
        n,
        u,
        (0..n * u).map(|_| StandardNormal.sample(rng)).collect(),
    );
    StructuredOp {
        n,
        logical_n: n,
        u,
        flops_per_apply: 2 * (n * u) as u64,
        body: OpBody::Dense(g),
        diag: None,
        perm: None,
        col_sample: None,
        scale: 1.0,
    }
}

/// Depth-d abridged randomized Hadamard transform D H_{n,d} P, with 2^d
/// nonzeros per row/column and a d n add/subtract apply cost; the diagonal
/// carries Rademacher signs so the real pipeline stays real.
pub fn build_arht(n: usize, d: usize, rng: &mut Rng) -> Result<StructuredOp<f64>> {
    let np = padded_size(n)?;
    let k = np.trailing_zeros() as usize;
    if d == 0 || d > k {
        return Err(Error::invalid(format!(
            "depth {d} outside 1..={k} for n = {n}"
        )));
    }
    let diag: Vec<f64> = random_signs(np, rng);
    Ok(StructuredOp {
        n: np,
        logical_n: n,
        u: np,
        flops_per_apply: (d * np) as u64,
        body: OpBody::Hadamard { depth: d },
        diag: Some(diag),
        perm: Some(random_perm(np, rng)),
        col_sample: None,
        scale: 1.0,
    })
}

/// Depth-d abridged randomized Fourier transform D Omega_{n,d} P with a
/// unit-circle random diagonal; 1.5 d n flops per apply.
pub fn build_arft(n: usize, d: usize, rng: &mut Rng) -> Result<StructuredOp<Complex64>> {
    let np = padded_size(n)?;
    let k = np.trailing_zeros() as usize;
    if d == 0 || d > k {
        return Err(Error::invalid(format!(
            "depth {d} outside 1..={k} for n = {n}"
        )));
    }
    let diag: Vec<Complex64> = (0..np)
        .map(|_| {
            let angle: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            Complex64::new(angle.cos(), angle.sin())
        })
        .collect();
    Ok(StructuredOp {
        n: np,
        logical_n: n,
        u: np,
        flops_per_apply: (3 * d * np / 2) as u64,
        body: OpBody::Fourier { depth: d },
        diag: Some(diag),
        perm: Some(random_perm(np, rng)),
        col_sample: None,
        scale: 1.0,
    })
}

/// Subsampled randomized Hadamard transform: l distinct columns of the
/// full-depth unitary-normalized transform, scaled by sqrt(n / l).
pub fn build_srht(n: usize, l: usize, rng: &mut Rng) -> Result<StructuredOp<f64>> {
    let np = padded_size(n)?;
    let k = np.trailing_zeros() as usize;
    if l == 0 || l > np {
        return Err(Error::invalid(format!("sample count {l} outside 1..={np}")));
    }
    let mut op = build_arht(n, k, rng)?;
    let mut sample = rand::seq::index::sample(rng, np, l).into_vec();
    sample.sort_unstable();
    op.u = l;
    op.col_sample = Some(sample);
    // sqrt(n/l) on top of the 2^{-k/2} unitary normalization.
    op.scale = (np as f64 / l as f64).sqrt() / (np as f64).sqrt();
    Ok(op)
}

/// Subsampled randomized Fourier transform, as above.
pub fn build_srft(n: usize, l: usize, rng: &mut Rng) -> Result<StructuredOp<Complex64>> {
    let np = padded_size(n)?;
    let k = np.trailing_zeros() as usize;
    if l == 0 || l > np {
        return Err(Error::invalid(format!("sample count {l} outside 1..={np}")));
    }
    let mut op = build_arft(n, k, rng)?;
    let mut sample = rand::seq::index::sample(rng, np, l).into_vec();
    sample.sort_unstable();
    op.u = l;
    op.col_sample = Some(sample);
    op.scale = (np as f64 / l as f64).sqrt() / (np as f64).sqrt();
    Ok(op)
}

/// Column-sampled abridged transforms (depth d plus sampling), used by the
/// progressive-depth policy.
pub fn build_arht_sampled(
    n: usize,
    d: usize,
    l: usize,
    rng: &mut Rng,
) -> Result<StructuredOp<f64>> {
    let mut op = build_arht(n, d, rng)?;
    let np = op.n;
    if l == 0 || l > np {
        return Err(Error::invalid(format!("sample count {l} outside 1..={np}")));
    }
    let mut sample = rand::seq::index::sample(rng, np, l).into_vec();
    sample.sort_unstable();
    op.u = l;
    op.col_sample = Some(sample);
    op.scale = (np as f64 / l as f64).sqrt() * 0.5f64.powf(d as f64 / 2.0);
    Ok(op)
}

pub fn build_arft_sampled(
    n: usize,
    d: usize,
    l: usize,
    rng: &mut Rng,
) -> Result<StructuredOp<Complex64>> {
    let mut op = build_arft(n, d, rng)?;
    let np = op.n;
    if l == 0 || l > np {
        return Err(Error::invalid(format!("sample count {l} outside 1..={np}")));
    }
    let mut sample = rand::seq::index::sample(rng, np, l).into_vec();
    sample.sort_unstable();
    op.u = l;
    op.col_sample = Some(sample);
    op.scale = (np as f64 / l as f64).sqrt() * 0.5f64.powf(d as f64 / 2.0);
    Ok(op)
}

/// Product of `t` random unit-diagonal cyclic bidiagonal factors, each
/// followed by a random permutation; the factors are retained for exact
/// replay and O(t n) application.
pub fn build_quasi_gaussian(n: usize, t: usize, rng: &mut Rng) -> Result<StructuredOp<f64>> {
    if t == 0 {
        return Err(Error::invalid("at least one bidiagonal factor is required"));
    }
    if n < 2 {
        return Err(Error::invalid("dimension must be at least 2"));
    }
    let factors: Vec<(Vec<f64>, Vec<usize>)> = (0..t)
        .map(|_| (random_signs(n, rng), random_perm(n, rng)))
        .collect();
    Ok(StructuredOp {
        n,
        logical_n: n,
        u: n,
        flops_per_apply: (2 * t * n) as u64,
        body: OpBody::Bidiagonal { factors },
        diag: None,
        perm: None,
        col_sample: None,
        scale: 1.0,
    })
}

/// Build the real operator named by a spec (Fourier kinds are rejected here;
/// use [`build_complex_multiplier`]).
pub fn build_real_multiplier(spec: &MultiplierSpec, rng: &mut Rng) -> Result<StructuredOp<f64>> {
    match *spec {
        MultiplierSpec::Gaussian { n, u } => Ok(build_gaussian(n, u, rng)),
        MultiplierSpec::Srht { n, l } => build_srht(n, l, rng),
        MultiplierSpec::Arht { n, d, l: None } => build_arht(n, d, rng),
        MultiplierSpec::Arht { n, d, l: Some(l) } => build_arht_sampled(n, d, l, rng),
        MultiplierSpec::QuasiGaussian { n, t } => build_quasi_gaussian(n, t, rng),
        MultiplierSpec::Srft { .. } | MultiplierSpec::Arft { .. } => Err(Error::invalid(
            "Fourier multipliers produce complex sketches",
        )),
    }
}

pub fn build_complex_multiplier(
    spec: &MultiplierSpec,
    rng: &mut Rng,
) -> Result<StructuredOp<Complex64>> {
    match *spec {
        MultiplierSpec::Srft { n, l } => build_srft(n, l, rng),
        MultiplierSpec::Arft { n, d, l: None } => build_arft(n, d, rng),
        MultiplierSpec::Arft { n, d, l: Some(l) } => build_arft_sampled(n, d, l, rng),
        _ => Err(Error::invalid("not a complex multiplier kind")),
    }
}

// ---------------------------------------------------------------------------
// CUR with multiplicative pre-processing
// ---------------------------------------------------------------------------

/// Output of the pseudo-inverse pre-processing pipeline. The column factor
/// comes from the sketch W H rather than from W itself, so the result is
/// kept as explicit factors `C * U * R ~= W` (with R back-mapped through
/// H^+) instead of a plain index-set CUR.
pub struct MultipliedCur<T: Scalar> {
    /// Rows of W selected by the sampling stage.
    pub row_set: IndexSet,
    /// Columns of the sketch W H backing the C factor.
    pub sketch_col_set: IndexSet,
    pub c: Mat<T>,
    pub nucleus: Mat<T>,
    pub r_factor: Mat<T>,
    /// Relative spectral error of the sketch-level CUR (against W H).
    pub sketch_rel_error: f64,
}

impl<T: Scalar> MultipliedCur<T> {
    pub fn reconstruct(&self) -> Mat<T> {
        self.c.matmul(&self.nucleus).matmul(&self.r_factor)
    }

    /// Sublinear a posteriori probe: evaluate W - C U R on a random
    /// q x s grid only and return the relative Frobenius estimate
    /// ||E_sample||_F / ||W_sample||_F.
    pub fn sampled_relative_error(
        &self,
        w: &Mat<T>,
        q: usize,
        s: usize,
        rng: &mut Rng,
    ) -> Result<f64> {
        let (m, n) = w.shape();
        if q * s < 100 || q > m || s > n {
            return Err(Error::invalid(
                "probe grid must have at least 100 entries and fit",
            ));
        }
        let rows = IndexSet::sample_uniform(m, q, rng);
        let cols = IndexSet::sample_uniform(n, s, rng);
        let cu = self.c.select_rows(rows.indices()).matmul(&self.nucleus);
        let r_cols = self.r_factor.select_cols(cols.indices());
        let approx = cu.matmul(&r_cols);
        let exact = w.submatrix(rows.indices(), cols.indices());
        let err = exact.sub(&approx).frobenius_norm();
        let denom = exact.frobenius_norm();
        Ok(if denom > 0.0 { err / denom } else { err })
    }
}

/// CUR approximation of W through a large multiplier and its pseudo-inverse:
/// sketch A = W H for an n x u multiplier with u >= n, run the uniform-score
/// sampling pipeline on A, and back-map the row factor R = R_H H^+ (the fast
/// Hermitian path when the multiplier is orthogonal up to scaling). Requires
/// m <= n; apply it to the transpose otherwise.
pub fn cur_with_multiplier_and_pinv<T: SvdScalar>(
    w: &Mat<T>,
    r: usize,
    k: usize,
    l: usize,
    op: &StructuredOp<T>,
    rng: &mut Rng,
    opts: &PipelineOpts,
) -> Result<MultipliedCur<T>> {
    let (m, n) = w.shape();
    if m > n {
        return Err(Error::invalid(
            "pre-processing with a right multiplier assumes m <= n; transpose the input",
        ));
    }
    let (hn, u) = op.dims();
    if hn != n {
        return Err(Error::invalid("multiplier input dimension must equal n"));
    }
    if u < n {
        return Err(Error::invalid("the pseudo-inverse route needs u >= n"));
    }
    // Stage 1: the sketch (labeled dense stage for a dense multiplier).
    let sketch = op.sketch(w);
    // Stages 2-3: uniform leverage scores on the sketch columns, then the
    // sampling pipeline on the sketch.
    let counted = CountedMat::new(&sketch);
    let scores = LeverageScores::uniform(u);
    let out = cur_via_leverage_with_scores(
        &counted,
        &scores,
        r,
        k,
        l,
        Sampler::ExactlyL,
        ScoresMode::Uniform,
        rng,
        opts,
    )?;
    let cur_h = out.cur;
    // Stage 4: back-map the row factor.
    let c = sketch.select_cols(cur_h.cols().indices());
    let r_h = sketch.select_rows(cur_h.rows().indices());
    let r_factor = op.right_pinv_apply(&r_h)?;
    let approx_sketch = c.matmul(cur_h.nucleus()).matmul(&r_h);
    let denom = crate::svd::spectral_norm_est(&sketch, 1e-8, 300, 11);
    let sketch_err = crate::svd::spectral_norm_est(&sketch.sub(&approx_sketch), 1e-8, 300, 13);
    Ok(MultipliedCur {
        row_set: cur_h.rows().clone(),
        sketch_col_set: cur_h.cols().clone(),
        c,
        nucleus: cur_h.nucleus().clone(),
        r_factor,
        sketch_rel_error: if denom > 0.0 {
            sketch_err / denom
        } else {
            sketch_err
        },
    })
}

/// Outcome of the progressive-depth policy.
pub struct ProgressiveDepthOutcome<T: Scalar> {
    pub result: MultipliedCur<T>,
    pub depth: usize,
    pub probe_relative_error: f64,
    /// Whether the a posteriori probe passed the threshold before the depth
    /// reached log2(n).
    pub passed: bool,
}

/// Progressive-depth pre-processing: run the pseudo-inverse pipeline with
/// abridged Hadamard multipliers of depth d = 1, 2, ... until the sampled
/// a posteriori error falls below `threshold` or the depth reaches log2(n)
/// (at which point the multiplier is a full randomized Hadamard transform).
/// The deepest attempt is returned either way, with the probe verdict.
#[allow(clippy::too_many_arguments)]
pub fn progressive_depth_cur(
    w: &Mat<f64>,
    r: usize,
    k: usize,
    l: usize,
    threshold: f64,
    probe: (usize, usize),
    rng: &mut Rng,
    opts: &PipelineOpts,
) -> Result<ProgressiveDepthOutcome<f64>> {
    let n = w.ncols();
    let max_depth = padded_size(n)?.trailing_zeros() as usize;
    let mut last: Option<ProgressiveDepthOutcome<f64>> = None;
    for d in 1..=max_depth {
        let op = build_arht(n, d, rng)?;
        let result = match cur_with_multiplier_and_pinv(w, r, k, l, &op, rng, opts) {
            Ok(res) => res,
            Err(Error::UnluckySampling { .. }) | Err(Error::SingularGenerator { .. }) => continue,
            Err(e) => return Err(e),
        };
        let rel = result.sampled_relative_error(w, probe.0, probe.1, rng)?;
        let passed = rel <= threshold;
        let outcome = ProgressiveDepthOutcome {
            result,
            depth: d,
            probe_relative_error: rel,
            passed,
        };
        if passed {
            return Ok(outcome);
        }
        last = Some(outcome);
    }
    last.ok_or(Error::UnluckySampling {
        attempts: max_depth,
        target_rank: r,
    })
}

/// CUR with Gaussian (or structured) sampling: sketch W H-bar for an
/// n x l_bar multiplier, select k rows on the sketch, then l columns on the
/// selected row strip of W, then the canonical nucleus. Stages 2 and 3 are
/// sublinear; stage 1 reads the whole matrix and is reported in
/// `dense_entries`.
pub fn cur_with_gaussian_sampling<T: SvdScalar>(
    src: &CountedMat<T>,
    r: usize,
    k: usize,
    l: usize,
    op: &StructuredOp<T>,
    _rng: &mut Rng,
    opts: &PipelineOpts,
) -> Result<PipelineOutput<T>> {
    let (m, n) = src.shape();
    let (hn, l_bar) = op.dims();
    if hn != n || l_bar < l || l_bar > n {
        return Err(Error::invalid(
            "need an n x l_bar multiplier with l <= l_bar <= n",
        ));
    }
    if r == 0 || r > k || k > m || r > l || l > n {
        return Err(Error::invalid("rank/shape chain violated"));
    }
    let _ = opts;
    // Stage 1 (dense, labeled): the sketch.
    let sketch = op.sketch(src.dense());
    let dense_entries = (m * n) as u64;
    let start = src.accesses();
    // Stage 2: row selection on the sketch (m * l_bar derived reads, charged
    // below alongside the source reads of stage 3).
    let rows =
        crate::maxvol::select_rows(&sketch, r, k, crate::maxvol::VolumeSubAlg::StrongRrqr)?.set;
    // Stage 3: column selection on the selected rows of W itself.
    let strip = src.select_rows(rows.indices());
    let cols =
        crate::maxvol::select_cols(&strip, r, l, crate::maxvol::VolumeSubAlg::StrongRrqr)?.set;
    let generator = strip.select_cols(cols.indices());
    let nucleus = canonical_nucleus(&generator, r)?;
    let cur = CurLra::new(rows, cols, nucleus, r)?;
    Ok(PipelineOutput {
        cur,
        entries_touched: (src.accesses() - start) + (m * l_bar) as u64,
        dense_entries,
        retries: 0,
        reseeds: 0,
        loops_executed: 0,
        nucleus_bound: None,
    })
}
