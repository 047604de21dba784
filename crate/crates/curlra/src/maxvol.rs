//! Volume maximization machinery: dominant-submatrix search, LUP-seeded
//! iterative refinement, QRP-based greedy expansion/contraction, projective
//! volume maximization, and strong rank-revealing selection. These are the
//! sub-algorithms the cynical and cross-approximation pipelines lean on.

use crate::error::{Error, Result};
use crate::mat::{IndexSet, Mat};
use crate::qr::{self, qr_column_pivoted};
use crate::scalar::Scalar;
use crate::svd::{log_volume, SvdScalar};

/// Dominance test slack on |entries of B^-1 A| <= 1, avoiding cycling on
/// floating-point ties.
pub const SWAP_TOL: f64 = 1e-12;

/// Default h for the strong rank-revealing swap loops.
pub const RRQR_H: f64 = 1.1;

/// t_{p,r,h}^2 = (p - r) r h^2 + 1, the strong rank-revealing certificate
/// factor.
pub fn t_factor(p: usize, r: usize, h: f64) -> f64 {
    (((p - r) * r) as f64 * h * h + 1.0).sqrt()
}

/// Outcome of a volume-maximization search.
#[derive(Debug, Clone)]
pub struct MaxvolResult {
    pub set: IndexSet,
    pub iterations: usize,
    /// ln v_2 of the selected block.
    pub log_volume: f64,
    /// Largest |entry| of B^-1 A (dominant search) or the largest swap
    /// criterion rho (strong RRQR) at termination.
    pub certificate: f64,
    /// The iteration cap was reached; `set` is the best block found so far.
    pub hit_cap: bool,
    /// ln of each accepted swap's volume gain, for the monotonicity audit.
    pub swap_gains: Vec<f64>,
}

/// Choice of volume-maximization backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VolumeSubAlg {
    /// LU-seeded dominant-submatrix iteration (the default).
    #[default]
    LupPivot,
    /// Column-pivoted QR followed by the h-bounded strong-RRQR swap loop.
    StrongRrqr,
}

impl std::str::FromStr for VolumeSubAlg {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lup" => Ok(VolumeSubAlg::LupPivot),
            "qr" => Ok(VolumeSubAlg::StrongRrqr),
            other => Err(Error::invalid(format!("unknown sub-algorithm '{other}'"))),
        }
    }
}

/// Default iteration cap for the dominant-submatrix loop.
pub fn default_max_iter(n: usize, r: usize) -> usize {
    10 * n * r
}

// ---------------------------------------------------------------------------
// Dominant submatrix search
// ---------------------------------------------------------------------------

/// Find a column set J of size r such that every entry of B^-1 A for
/// B = A[:, J] has modulus at most 1 + `swap_tol`. Each swap strictly
/// increases the block volume, so the search cannot cycle. `start` must
/// index a nonsingular r x r block.
pub fn dominant_submatrix<T: SvdScalar>(
    a: &Mat<T>,
    start: &IndexSet,
    swap_tol: f64,
    max_iter: usize,
) -> Result<MaxvolResult> {
    let r = a.nrows();
    let n = a.ncols();
    if start.len() != r || start.bound() != n {
        return Err(Error::invalid(
            "start must select r columns of the r x n input",
        ));
    }
    let mut cur: Vec<usize> = start.indices().to_vec();
    let mut iterations = 0usize;
    let mut swap_gains = Vec::new();
    let mut hit_cap = false;

    loop {
        let b = a.select_cols(&cur);
        let c = qr::solve_square(&b, a).map_err(|_| {
            if iterations == 0 {
                Error::invalid("singular start block")
            } else {
                Error::NumericalFailure("basis became numerically singular".into())
            }
        })?;
        // Largest |entry|; row-major scan keeps the smallest (i, j) on ties.
        let mut best = (0usize, 0usize);
        let mut best_val = 0.0f64;
        for i in 0..r {
            for j in 0..n {
                let v = c[(i, j)].modulus();
                if v > best_val * (1.0 + 1e-12) {
                    best_val = v;
                    best = (i, j);
                }
            }
        }
        if best_val <= 1.0 + swap_tol {
            let log_vol = log_volume(&b)?;
            return Ok(MaxvolResult {
                set: IndexSet::new(cur, n)?,
                iterations,
                log_volume: log_vol,
                certificate: best_val,
                hit_cap,
                swap_gains,
            });
        }
        if iterations >= max_iter {
            hit_cap = true;
            let log_vol = log_volume(&b)?;
            return Ok(MaxvolResult {
                set: IndexSet::new(cur, n)?,
                iterations,
                log_volume: log_vol,
                certificate: best_val,
                hit_cap,
                swap_gains,
            });
        }
        // Swapping basis column i for column j multiplies the volume by
        // |c_ij| > 1.
        cur[best.0] = best.1;
        swap_gains.push(best_val.ln());
        iterations += 1;
    }
}

/// Dominant-submatrix search seeded by LU with complete pivoting on the
/// r x n input (which must have full numerical rank r).
pub fn lup_ca<T: SvdScalar>(a: &Mat<T>, max_iter: usize) -> Result<MaxvolResult> {
    let r = a.nrows();
    let n = a.ncols();
    if r > n {
        return Err(Error::invalid(
            "lup_ca expects a flat r x n input with r <= n",
        ));
    }
    let start = lu_pivot_columns(a, r)?;
    dominant_submatrix(a, &IndexSet::new(start, n)?, SWAP_TOL, max_iter)
}

/// Pivot column set from Gaussian elimination with complete pivoting.
/// Errors when the numerical rank falls below `r` (relative 1e-10).
fn lu_pivot_columns<T: Scalar>(a: &Mat<T>, r: usize) -> Result<Vec<usize>> {
    let m = a.nrows();
    let n = a.ncols();
    let mut work = a.clone();
    let mut used = vec![false; n];
    let mut rows_used = vec![false; m];
    let mut pivots = Vec::with_capacity(r);
    let mut first_pivot = 0.0f64;
    for step in 0..r {
        let mut best = (0usize, 0usize);
        let mut best_val = -1.0f64;
        for i in 0..m {
            if rows_used[i] {
                continue;
            }
            for j in 0..n {
                if used[j] {
                    continue;
                }
                let v = work[(i, j)].modulus();
                if v > best_val * (1.0 + 1e-12) {
                    best_val = v;
                    best = (i, j);
                }
            }
        }
        if step == 0 {
            first_pivot = best_val;
        }
        if best_val <= 0.0 || best_val <= 1e-10 * first_pivot {
            return Err(Error::RankMismatch {
                expected: r,
                found: step,
            });
        }
        let (pi, pj) = best;
        pivots.push(pj);
        used[pj] = true;
        rows_used[pi] = true;
        let pivot = work[(pi, pj)];
        for i in 0..m {
            if rows_used[i] {
                continue;
            }
            let factor = work[(i, pj)] / pivot;
            if factor == T::ZERO {
                continue;
            }
            for j in 0..n {
                if used[j] {
                    continue;
                }
                let sub = factor * work[(pi, j)];
                work[(i, j)] -= sub;
            }
        }
    }
    pivots.sort_unstable();
    Ok(pivots)
}

// ---------------------------------------------------------------------------
// Greedy expansion and contraction
// ---------------------------------------------------------------------------

/// Greedy growth of a column set of size q <= r in an r x n matrix:
/// each step appends the column with the largest residual norm against the
/// span of the current selection, which maximizes the volume gain. Uses
/// Householder updates, staying within O(q r n) flops.
pub fn greedy_grow_tall<T: Scalar>(w: &Mat<T>, q: usize) -> Result<(IndexSet, bool)> {
    let r = w.nrows();
    let n = w.ncols();
    if q == 0 || q > r || q > n {
        return Err(Error::invalid(format!(
            "q = {q} outside 1..=min(r = {r}, n = {n})"
        )));
    }
    let mut m = w.clone();
    let mut used = vec![false; n];
    let mut selected = Vec::with_capacity(q);
    let mut degenerate = false;
    let scale = w.frobenius_norm();
    let tiny = (scale * f64::EPSILON).powi(2);
    for g in 0..q {
        let mut best = usize::MAX;
        let mut best_score = -1.0f64;
        for j in 0..n {
            if used[j] {
                continue;
            }
            let score: f64 = (g..r).map(|i| m[(i, j)].modulus_sq()).sum();
            if score > best_score * (1.0 + 1e-12) {
                best_score = score;
                best = j;
            }
        }
        if best_score <= tiny {
            // Zero residual everywhere: deterministic fallback, flagged.
            degenerate = true;
            best = (0..n).find(|&j| !used[j]).unwrap();
        }
        selected.push(best);
        used[best] = true;
        // Reflect the chosen column onto e_g within rows g..r.
        let x: Vec<T> = (g..r).map(|i| m[(i, best)]).collect();
        let (v, beta) = reflector(&x);
        apply_reflector(&mut m, &v, beta, g);
    }
    Ok((IndexSet::new(selected, n)?, degenerate))
}

fn reflector<T: Scalar>(x: &[T]) -> (Vec<T>, f64) {
    let norm = x.iter().map(|a| a.modulus_sq()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return (vec![T::ZERO; x.len()], 0.0);
    }
    let phase = if x[0].modulus() > 0.0 {
        x[0].scale(1.0 / x[0].modulus())
    } else {
        T::ONE
    };
    let alpha = -phase.scale(norm);
    let mut v = x.to_vec();
    v[0] -= alpha;
    let vsq: f64 = v.iter().map(|a| a.modulus_sq()).sum();
    if vsq == 0.0 {
        return (vec![T::ZERO; x.len()], 0.0);
    }
    (v, 2.0 / vsq)
}

fn apply_reflector<T: Scalar>(m: &mut Mat<T>, v: &[T], beta: f64, row0: usize) {
    if beta == 0.0 {
        return;
    }
    let rows = m.nrows();
    let cols = m.ncols();
    for j in 0..cols {
        let mut dot = T::ZERO;
        for i in row0..rows {
            dot += v[i - row0].conj() * m[(i, j)];
        }
        let dot = dot.scale(beta);
        for i in row0..rows {
            let sub = v[i - row0] * dot;
            m[(i, j)] -= sub;
        }
    }
}

/// Greedy growth from a full-row-rank wide start (at least r columns of an
/// r x n matrix) up to q columns. Appending column b to the current wide
/// selection A multiplies the squared volume by 1 + ||A^+ b||^2, so each
/// step appends the column maximizing that score.
pub fn greedy_grow_wide<T: Scalar>(
    w: &Mat<T>,
    start: &IndexSet,
    q: usize,
) -> Result<(IndexSet, bool)> {
    let r = w.nrows();
    let n = w.ncols();
    if start.len() < r || start.bound() != n {
        return Err(Error::invalid("start must select at least r columns"));
    }
    if q < start.len() || q > n {
        return Err(Error::invalid(format!(
            "q = {q} outside {}..={n}",
            start.len()
        )));
    }
    let mut selected: Vec<usize> = start.indices().to_vec();
    let mut used = vec![false; n];
    for &j in &selected {
        used[j] = true;
    }
    let mut degenerate = false;
    while selected.len() < q {
        let a = w.select_cols(&selected);
        let gram = a.matmul(&a.conj_transpose());
        let l = qr::cholesky(&gram)
            .map_err(|_| Error::invalid("singular start block in greedy expansion"))?;
        let mut best = usize::MAX;
        let mut best_score = -1.0f64;
        for (j, _) in used.iter().enumerate().filter(|(_, &u)| !u) {
            // ||A^+ b||^2 = b^H (A A^H)^-1 b = ||L^-1 b||^2.
            let col = w.col(j);
            let y = qr::forward_substitute(&l, &col);
            let score: f64 = y.iter().map(|x| x.modulus_sq()).sum();
            if score > best_score * (1.0 + 1e-12) {
                best_score = score;
                best = j;
            }
        }
        let scale = w.frobenius_norm().powi(2);
        if best_score <= scale * f64::EPSILON * f64::EPSILON {
            degenerate = true;
            best = (0..n).find(|&j| !used[j]).unwrap();
        }
        selected.push(best);
        used[best] = true;
    }
    Ok((IndexSet::new(selected, n)?, degenerate))
}

/// Greedy contraction of a wide selection (|selected| > r columns of an
/// r x n matrix) down to `target` >= r columns. Removing column b from B
/// multiplies the squared volume by 1 - ||B^+ b||^2, so each step drops the
/// column with the smallest score.
pub fn greedy_contract_wide<T: SvdScalar>(
    w: &Mat<T>,
    selected: &IndexSet,
    target: usize,
) -> Result<IndexSet> {
    let r = w.nrows();
    if target < r || target > selected.len() {
        return Err(Error::invalid(format!(
            "target {target} outside {r}..={}",
            selected.len()
        )));
    }
    let mut cur: Vec<usize> = selected.indices().to_vec();
    while cur.len() > target {
        let b = w.select_cols(&cur);
        let b_pinv = crate::svd::pinv_default(&b)?;
        let mut best = 0usize;
        let mut best_loss = f64::INFINITY;
        for (pos, &j) in cur.iter().enumerate() {
            let col = w.col(j);
            let y = b_pinv.matvec(&col);
            let loss: f64 = y.iter().map(|x| x.modulus_sq()).sum();
            if loss < best_loss * (1.0 - 1e-12) {
                best_loss = loss;
                best = pos;
            }
        }
        cur.remove(best);
    }
    IndexSet::new(cur, selected.bound())
}

// ---------------------------------------------------------------------------
// Projective volume maximization (rank-revealing QRP + volume search)
// ---------------------------------------------------------------------------

/// Maximize the r-projective volume of an l-column subset of a k x n matrix
/// of numerical rank r: rank-revealing QRP reduces the input to its r x n
/// triangular factor, on which the volume ratios of column subsets equal the
/// r-projective volume ratios in the input; a volume search then picks the
/// columns. Errors with a rank mismatch when the revealed rank differs
/// from r.
pub fn projective_maxvol<T: SvdScalar>(
    w: &Mat<T>,
    r: usize,
    l: usize,
    subalg: VolumeSubAlg,
) -> Result<MaxvolResult> {
    select_cols_impl(w, r, l, subalg, true)
}

/// Row selection by transposition.
pub fn projective_maxvol_rows<T: SvdScalar>(
    w: &Mat<T>,
    r: usize,
    k: usize,
    subalg: VolumeSubAlg,
) -> Result<MaxvolResult> {
    projective_maxvol(&w.conj_transpose(), r, k, subalg)
}

/// Column selection for the pipelines: tolerates numerical rank above r
/// (noisy inputs) and only rejects rank collapse below r.
pub fn select_cols<T: SvdScalar>(
    w: &Mat<T>,
    r: usize,
    l: usize,
    subalg: VolumeSubAlg,
) -> Result<MaxvolResult> {
    select_cols_impl(w, r, l, subalg, false)
}

pub fn select_rows<T: SvdScalar>(
    w: &Mat<T>,
    r: usize,
    k: usize,
    subalg: VolumeSubAlg,
) -> Result<MaxvolResult> {
    select_cols_impl(&w.conj_transpose(), r, k, subalg, false)
}

fn select_cols_impl<T: SvdScalar>(
    w: &Mat<T>,
    r: usize,
    l: usize,
    subalg: VolumeSubAlg,
    enforce_exact_rank: bool,
) -> Result<MaxvolResult> {
    let (k, n) = w.shape();
    if r == 0 || r > k || l < r || l > n {
        return Err(Error::invalid(format!(
            "need 0 < r <= k and r <= l <= n, got r = {r}, l = {l} for a {k} x {n} input"
        )));
    }
    // Stage 1: rank-revealing QRP; the r leading rows of R (columns restored
    // to the original order) carry all volume ratios.
    let f = qr_column_pivoted(w);
    let diag0 = f.r[(0, 0)].modulus();
    let revealed = (0..f.r.nrows())
        .take_while(|&i| f.r[(i, i)].modulus() > 1e-10 * diag0 && f.r[(i, i)].modulus() > 0.0)
        .count();
    if revealed < r {
        return Err(Error::RankMismatch {
            expected: r,
            found: revealed,
        });
    }
    if enforce_exact_rank && revealed > r {
        return Err(Error::RankMismatch {
            expected: r,
            found: revealed,
        });
    }
    let mut r_flat: Mat<T> = Mat::zeros(r, n);
    for j in 0..n {
        let orig = f.perm[j];
        for i in 0..r {
            r_flat[(i, orig)] = f.r[(i, j)];
        }
    }

    // Stage 2: volume maximization on the flat factor.
    let base = match subalg {
        VolumeSubAlg::LupPivot => lup_ca(&r_flat, default_max_iter(n, r))?,
        VolumeSubAlg::StrongRrqr => strong_rrqr_cols(&r_flat, r, RRQR_H)?,
    };
    if l == r {
        return Ok(base);
    }
    // Stage 3: grow to l columns, each step maximizing the volume gain.
    let (grown, degenerate) = greedy_grow_wide(&r_flat, &base.set, l)?;
    let chosen = w.select_cols(grown.indices());
    let sv = crate::svd::singular_values(&chosen)?;
    let log_vol = sv.iter().take(r).map(|s| s.ln()).sum();
    Ok(MaxvolResult {
        set: grown,
        iterations: base.iterations,
        log_volume: log_vol,
        certificate: if degenerate {
            f64::INFINITY
        } else {
            base.certificate
        },
        hit_cap: base.hit_cap,
        swap_gains: base.swap_gains,
    })
}

// ---------------------------------------------------------------------------
// Strong rank-revealing QR selection
// ---------------------------------------------------------------------------

/// Select r columns by column-pivoted QR followed by the h-bounded swap
/// loop: while some criterion value rho_{ij} (combining (R11^-1 R12)_{ij}
/// with the residual-to-pivot norm ratio) exceeds h, swap the offending
/// columns; every swap multiplies det(R11) by rho > h >= 1, so the loop
/// terminates. The selected block satisfies
/// sigma_r(W[:, J]) >= sigma_r(W) / t_{n,r,h}.
pub fn strong_rrqr_cols<T: SvdScalar>(w: &Mat<T>, r: usize, h: f64) -> Result<MaxvolResult> {
    let (k, n) = w.shape();
    if r == 0 || r > k.min(n) {
        return Err(Error::invalid(format!(
            "rank {r} outside 1..=min({k}, {n})"
        )));
    }
    if h < 1.0 {
        return Err(Error::invalid("h must be at least 1"));
    }
    let base = qr_column_pivoted(w);
    let mut perm = base.perm;
    let mut rmat = base.r;
    if r == n {
        let block = w.select_cols(&perm[..r]);
        return Ok(MaxvolResult {
            set: IndexSet::new(perm[..r].to_vec(), n)?,
            iterations: 0,
            log_volume: log_volume(&block)?,
            certificate: 1.0,
            hit_cap: false,
            swap_gains: Vec::new(),
        });
    }
    let cap = default_max_iter(n, r);
    let mut iterations = 0usize;
    let mut swap_gains = Vec::new();
    loop {
        let r11 = Mat::from_fn(r, r, |i, j| rmat[(i, j)]);
        let r12 = Mat::from_fn(r, n - r, |i, j| rmat[(i, j + r)]);
        let diag_ok = (0..r).all(|i| rmat[(i, i)].modulus() > 0.0);
        if !diag_ok {
            return Err(Error::RankMismatch {
                expected: r,
                found: (0..r).take_while(|&i| rmat[(i, i)].modulus() > 0.0).count(),
            });
        }
        let a = qr::solve_square(&r11, &r12)
            .map_err(|_| Error::NumericalFailure("singular R11 in strong RRQR".into()))?;
        let r11_inv = qr::solve_square(&r11, &Mat::identity(r))
            .map_err(|_| Error::NumericalFailure("singular R11 in strong RRQR".into()))?;
        // gamma_j: trailing column norms; omega_i: row norms of R11^-1.
        let rows_below = rmat.nrows();
        let gamma: Vec<f64> = (0..n - r)
            .map(|j| {
                (r..rows_below)
                    .map(|i| rmat[(i, j + r)].modulus_sq())
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let omega: Vec<f64> = (0..r)
            .map(|i| {
                (0..r)
                    .map(|j| r11_inv[(i, j)].modulus_sq())
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let mut best = (0usize, 0usize);
        let mut best_rho = 0.0f64;
        for i in 0..r {
            for j in 0..n - r {
                let rho = (a[(i, j)].modulus_sq() + (gamma[j] * omega[i]).powi(2)).sqrt();
                if rho > best_rho * (1.0 + 1e-12) {
                    best_rho = rho;
                    best = (i, j);
                }
            }
        }
        if best_rho <= h || iterations >= cap {
            let hit_cap = best_rho > h;
            let block = w.select_cols(&perm[..r]);
            return Ok(MaxvolResult {
                set: IndexSet::new(perm[..r].to_vec(), n)?,
                iterations,
                log_volume: log_volume(&block)?,
                certificate: best_rho,
                hit_cap,
                swap_gains,
            });
        }
        perm.swap(best.0, r + best.1);
        swap_gains.push(best_rho.ln());
        iterations += 1;
        let (q2, r2) = qr::qr(&w.select_cols(&perm));
        let _ = q2;
        rmat = r2;
    }
}

/// Row selection satisfying sigma_r(W[I, :]) >= sigma_r(W) / t_{m,r,h}.
pub fn rrqr_select_rows<T: SvdScalar>(w: &Mat<T>, r: usize, h: f64) -> Result<MaxvolResult> {
    strong_rrqr_cols(&w.conj_transpose(), r, h)
}
