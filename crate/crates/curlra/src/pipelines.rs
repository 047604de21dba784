//! End-to-end CUR pipelines: primitive, cynical, and cross-approximation
//! index selection, leverage-score sampling, LRA/SVD/CUR conversions, and
//! refinement.
//!
//! Every pipeline reads its input through [`CountedMat`], which counts the
//! entries touched; the sublinear algorithms are audited against their entry
//! budgets in the test suites. Stages that inherently read the whole matrix
//! (SVD-based leverage scores, the dense top-SVD front end) report their
//! reads separately as `dense_entries`.

use std::cell::Cell;

use crate::error::{Error, Result};
use crate::mat::{IndexSet, Mat};
use crate::maxvol::{self, VolumeSubAlg};
use crate::qr;
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::skeleton::{canonical_nucleus, CurLra};
use crate::svd::{self, svd, SvdScalar, TopSvd};

// ---------------------------------------------------------------------------
// Instrumented matrix access
// ---------------------------------------------------------------------------

/// Read-only view of a matrix that counts every entry handed out.
pub struct CountedMat<'a, T: Scalar> {
    inner: &'a Mat<T>,
    count: Cell<u64>,
}

impl<'a, T: Scalar> CountedMat<'a, T> {
    pub fn new(inner: &'a Mat<T>) -> Self {
        CountedMat {
            count: Cell::new(0),
            inner,
        }
    }

    pub fn nrows(&self) -> usize {
        self.inner.nrows()
    }
    pub fn ncols(&self) -> usize {
        self.inner.ncols()
    }
    pub fn shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    /// Entries handed out so far (cumulative across pipeline runs).
    pub fn accesses(&self) -> u64 {
        self.count.get()
    }

    fn charge(&self, n: u64) {
        self.count.set(self.count.get() + n);
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.charge(1);
        self.inner[(i, j)]
    }

    pub fn select_rows(&self, rows: &[usize]) -> Mat<T> {
        self.charge((rows.len() * self.ncols()) as u64);
        self.inner.select_rows(rows)
    }

    pub fn select_cols(&self, cols: &[usize]) -> Mat<T> {
        self.charge((cols.len() * self.nrows()) as u64);
        self.inner.select_cols(cols)
    }

    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Mat<T> {
        self.charge((rows.len() * cols.len()) as u64);
        self.inner.submatrix(rows, cols)
    }

    /// Full access for the explicitly labeled dense stages; the caller
    /// accounts for it in `dense_entries`, not in the sublinear counter.
    pub fn dense(&self) -> &Mat<T> {
        self.inner
    }
}

// ---------------------------------------------------------------------------
// Options and outputs
// ---------------------------------------------------------------------------

/// Sub-algorithm choice for the selection steps inside sketches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubAlg {
    /// LU-seeded dominant-submatrix selection (default).
    #[default]
    Lup,
    /// Strong rank-revealing QR selection.
    Qr,
    /// Leverage-score sampling inside cross-approximation loops.
    LeverageSample,
}

impl std::str::FromStr for SubAlg {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lup" => Ok(SubAlg::Lup),
            "qr" => Ok(SubAlg::Qr),
            "leverage" => Ok(SubAlg::LeverageSample),
            other => Err(Error::invalid(format!("unknown sub-algorithm '{other}'"))),
        }
    }
}

fn volume_subalg(subalg: SubAlg) -> Result<VolumeSubAlg> {
    match subalg {
        SubAlg::Lup => Ok(VolumeSubAlg::LupPivot),
        SubAlg::Qr => Ok(VolumeSubAlg::StrongRrqr),
        SubAlg::LeverageSample => Err(Error::invalid(
            "the leverage sub-algorithm applies only inside cross-approximation loops",
        )),
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOpts {
    /// Fresh random draws before giving up on degenerate selections.
    pub attempts: usize,
    pub subalg: SubAlg,
    /// Use the simpler nucleus (S^T W S)^+ instead of D M^+ D-bar in the
    /// leverage pipeline.
    pub alt_nucleus: bool,
}

impl Default for PipelineOpts {
    fn default() -> Self {
        PipelineOpts {
            attempts: 10,
            subalg: SubAlg::Lup,
            alt_nucleus: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput<T: Scalar> {
    pub cur: CurLra<T>,
    /// Source entries read on the sublinear path during this run.
    pub entries_touched: u64,
    /// Source entries read by explicitly dense (labeled) stages.
    pub dense_entries: u64,
    pub retries: u32,
    pub reseeds: u32,
    pub loops_executed: u32,
    /// Nucleus norm certificate, when the route provides one.
    pub nucleus_bound: Option<f64>,
}

/// Relative threshold below which a generator counts as rank-deficient.
const GENERATOR_RANK_TOL: f64 = 1e-10;

fn generator_has_rank<T: SvdScalar>(generator: &Mat<T>, r: usize) -> Result<bool> {
    if generator.min_dim() < r {
        return Ok(false);
    }
    let sv = svd::singular_values(generator)?;
    Ok(sv[0] > 0.0 && sv[r - 1] > GENERATOR_RANK_TOL * sv[0])
}

// ---------------------------------------------------------------------------
// Primitive and cynical pipelines
// ---------------------------------------------------------------------------

/// Primitive CUR: uniformly random row and column sets and the canonical
/// nucleus of their intersection. Reads k n + m l + k l entries per attempt.
pub fn primitive_cur<T: SvdScalar>(
    src: &CountedMat<T>,
    r: usize,
    k: usize,
    l: usize,
    rng: &mut Rng,
    opts: &PipelineOpts,
) -> Result<PipelineOutput<T>> {
    let (m, n) = src.shape();
    validate_bounds(r, k, l, m, n)?;
    let start = src.accesses();
    let mut retries = 0u32;
    for _ in 0..opts.attempts.max(1) {
        let rows = IndexSet::sample_uniform(m, k, rng);
        let cols = IndexSet::sample_uniform(n, l, rng);
        let generator = src.submatrix(rows.indices(), cols.indices());
        if !generator_has_rank(&generator, r)? {
            retries += 1;
            continue;
        }
        match canonical_nucleus(&generator, r) {
            Ok(nucleus) => {
                let cur = CurLra::new(rows, cols, nucleus, r)?;
                return Ok(PipelineOutput {
                    cur,
                    entries_touched: src.accesses() - start,
                    dense_entries: 0,
                    retries,
                    reseeds: 0,
                    loops_executed: 0,
                    nucleus_bound: None,
                });
            }
            Err(Error::SingularGenerator { .. }) => {
                retries += 1;
                continue;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::UnluckySampling {
        attempts: opts.attempts.max(1),
        target_rank: r,
    })
}

/// Cynical CUR: a random q x s sketch, then volume-based selection of k rows
/// and l columns inside the sketch, then the canonical nucleus.
#[allow(clippy::too_many_arguments)]
pub fn cynical_cur<T: SvdScalar>(
    src: &CountedMat<T>,
    r: usize,
    q: usize,
    s: usize,
    k: usize,
    l: usize,
    rng: &mut Rng,
    opts: &PipelineOpts,
) -> Result<PipelineOutput<T>> {
    let (m, n) = src.shape();
    validate_bounds(r, k, l, m, n)?;
    if q < k || q > m || s < l || s > n {
        return Err(Error::invalid(format!(
            "need k <= q <= m and l <= s <= n, got q = {q}, s = {s}"
        )));
    }
    let vol = volume_subalg(opts.subalg)?;
    let start = src.accesses();
    let mut retries = 0u32;
    for _ in 0..opts.attempts.max(1) {
        let sketch_rows = IndexSet::sample_uniform(m, q, rng);
        let sketch_cols = IndexSet::sample_uniform(n, s, rng);
        let sketch = src.submatrix(sketch_rows.indices(), sketch_cols.indices());
        let picked = match contract_in_sketch(&sketch, r, k, l, vol) {
            Ok(p) => p,
            Err(Error::RankMismatch { .. }) | Err(Error::SingularGenerator { .. }) => {
                retries += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let (local_rows, local_cols, nucleus) = picked;
        let rows = IndexSet::new(
            local_rows
                .iter()
                .map(|&i| sketch_rows.indices()[i])
                .collect(),
            m,
        )?;
        let cols = IndexSet::new(
            local_cols
                .iter()
                .map(|&j| sketch_cols.indices()[j])
                .collect(),
            n,
        )?;
        let cur = CurLra::new(rows, cols, nucleus, r)?;
        return Ok(PipelineOutput {
            cur,
            entries_touched: src.accesses() - start,
            dense_entries: 0,
            retries,
            reseeds: 0,
            loops_executed: 0,
            nucleus_bound: None,
        });
    }
    Err(Error::UnluckySampling {
        attempts: opts.attempts.max(1),
        target_rank: r,
    })
}

/// Select k rows then l columns of a materialized sketch and build the
/// canonical nucleus; returns sketch-local indices.
fn contract_in_sketch<T: SvdScalar>(
    sketch: &Mat<T>,
    r: usize,
    k: usize,
    l: usize,
    vol: VolumeSubAlg,
) -> Result<(Vec<usize>, Vec<usize>, Mat<T>)> {
    let row_sel = maxvol::select_rows(sketch, r, k, vol)?;
    let strip = sketch.select_rows(row_sel.set.indices());
    let col_sel = maxvol::select_cols(&strip, r, l, vol)?;
    let generator = strip.select_cols(col_sel.set.indices());
    if !generator_has_rank(&generator, r)? {
        return Err(Error::RankMismatch {
            expected: r,
            found: 0,
        });
    }
    let nucleus = canonical_nucleus(&generator, r)?;
    Ok((
        row_sel.set.indices().to_vec(),
        col_sel.set.indices().to_vec(),
        nucleus,
    ))
}

fn validate_bounds(r: usize, k: usize, l: usize, m: usize, n: usize) -> Result<()> {
    if r == 0 || r > k || k > m || r > l || l > n {
        return Err(Error::invalid(format!(
            "need 0 < r <= k <= m and r <= l <= n, got r = {r}, k = {k}, l = {l} for {m} x {n}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Cross-approximation
// ---------------------------------------------------------------------------

/// Alternating row/column refinement: from the current column set build the
/// m x l vertical sketch and reselect rows, then from the rows build the
/// k x n horizontal sketch and reselect columns. Stops early at a fixed
/// point. Touches at most loops * (m l + k n) entries plus the generator.
pub fn cross_approximation<T: SvdScalar>(
    src: &CountedMat<T>,
    r: usize,
    k: usize,
    l: usize,
    loops: usize,
    rng: &mut Rng,
    opts: &PipelineOpts,
) -> Result<PipelineOutput<T>> {
    let (m, n) = src.shape();
    validate_bounds(r, k, l, m, n)?;
    if loops == 0 {
        return Err(Error::invalid("loops must be at least 1"));
    }
    let start = src.accesses();
    let mut reseeds = 0u32;
    let mut retries = 0u32;

    'restart: for _ in 0..opts.attempts.max(1) {
        let mut cols = IndexSet::sample_uniform(n, l, rng);
        let mut rows_opt: Option<IndexSet> = None;
        let mut horiz: Option<Mat<T>> = None;
        let mut loops_executed = 0u32;

        for _ in 0..loops {
            let vert = src.select_cols(cols.indices());
            let rows = match select_strip_rows(&vert, r, k, opts, rng) {
                Ok(set) => set,
                Err(Error::RankMismatch { .. }) => {
                    // Rank collapse of the vertical sketch: reseed columns.
                    reseeds += 1;
                    if reseeds as usize > opts.attempts {
                        return Err(Error::UnluckySampling {
                            attempts: opts.attempts,
                            target_rank: r,
                        });
                    }
                    cols = IndexSet::sample_uniform(n, l, rng);
                    continue;
                }
                Err(e) => return Err(e),
            };
            let h = src.select_rows(rows.indices());
            let new_cols = match select_strip_cols(&h, r, l, opts, rng) {
                Ok(set) => set,
                Err(Error::RankMismatch { .. }) => {
                    reseeds += 1;
                    if reseeds as usize > opts.attempts {
                        return Err(Error::UnluckySampling {
                            attempts: opts.attempts,
                            target_rank: r,
                        });
                    }
                    cols = IndexSet::sample_uniform(n, l, rng);
                    continue;
                }
                Err(e) => return Err(e),
            };
            loops_executed += 1;
            let fixed_point = rows_opt
                .as_ref()
                .map(|prev| prev.indices() == rows.indices())
                .unwrap_or(false)
                && new_cols.indices() == cols.indices();
            rows_opt = Some(rows);
            horiz = Some(h);
            cols = new_cols;
            if fixed_point {
                break;
            }
        }

        let (rows, horiz) = match (rows_opt, horiz) {
            (Some(rv), Some(h)) => (rv, h),
            _ => {
                retries += 1;
                continue 'restart;
            }
        };
        // The generator sits inside the last horizontal sketch: no new reads.
        let generator = horiz.select_cols(cols.indices());
        if !generator_has_rank(&generator, r)? {
            retries += 1;
            continue 'restart;
        }
        match canonical_nucleus(&generator, r) {
            Ok(nucleus) => {
                let cur = CurLra::new(rows, cols, nucleus, r)?;
                return Ok(PipelineOutput {
                    cur,
                    entries_touched: src.accesses() - start,
                    dense_entries: 0,
                    retries,
                    reseeds,
                    loops_executed,
                    nucleus_bound: None,
                });
            }
            Err(Error::SingularGenerator { .. }) => {
                retries += 1;
                continue 'restart;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::UnluckySampling {
        attempts: opts.attempts.max(1),
        target_rank: r,
    })
}

fn select_strip_rows<T: SvdScalar>(
    vert: &Mat<T>,
    r: usize,
    k: usize,
    opts: &PipelineOpts,
    rng: &mut Rng,
) -> Result<IndexSet> {
    match opts.subalg {
        SubAlg::LeverageSample => leverage_select_rows(vert, r, k, rng),
        other => Ok(maxvol::select_rows(vert, r, k, volume_subalg(other)?)?.set),
    }
}

fn select_strip_cols<T: SvdScalar>(
    horiz: &Mat<T>,
    r: usize,
    l: usize,
    opts: &PipelineOpts,
    rng: &mut Rng,
) -> Result<IndexSet> {
    match opts.subalg {
        SubAlg::LeverageSample => leverage_select_rows(&horiz.conj_transpose(), r, l, rng),
        other => Ok(maxvol::select_cols(horiz, r, l, volume_subalg(other)?)?.set),
    }
}

/// Leverage-score row sampling of a thin sketch (the sampling-based
/// sub-algorithm inside the alternating loops): scores from the top-r left
/// singular basis of the sketch, then draws until k distinct rows accumulate.
fn leverage_select_rows<T: SvdScalar>(
    vert: &Mat<T>,
    r: usize,
    k: usize,
    rng: &mut Rng,
) -> Result<IndexSet> {
    let m = vert.nrows();
    let f = svd(vert)?;
    let revealed = f
        .sigma
        .iter()
        .filter(|&&s| s > GENERATOR_RANK_TOL * f.sigma[0])
        .count();
    if revealed < r {
        return Err(Error::RankMismatch {
            expected: r,
            found: revealed,
        });
    }
    let basis = f.s.leading_cols(r);
    let scores = leverage_scores_from_basis(&basis, 1.0)?;
    let mut distinct: Vec<usize> = Vec::new();
    for _ in 0..50 * k.max(1) {
        let pair = sample_exactly_l(&scores, k, rng)?;
        for idx in pair.indices {
            if !distinct.contains(&idx) {
                distinct.push(idx);
                if distinct.len() == k {
                    return IndexSet::new(distinct, m);
                }
            }
        }
    }
    Err(Error::UnluckySampling {
        attempts: 50 * k,
        target_rank: r,
    })
}

/// Tests-4-style combination: `loops` widening cross-approximation passes at
/// sketch width (q, s), then contraction to a k x l generator inside the
/// final q x s sketch.
#[allow(clippy::too_many_arguments)]
pub fn ca_then_contract<T: SvdScalar>(
    src: &CountedMat<T>,
    r: usize,
    q: usize,
    s: usize,
    k: usize,
    l: usize,
    loops: usize,
    rng: &mut Rng,
    opts: &PipelineOpts,
) -> Result<PipelineOutput<T>> {
    let (m, n) = src.shape();
    validate_bounds(r, k, l, m, n)?;
    if q < k || q > m || s < l || s > n || loops == 0 {
        return Err(Error::invalid("need k <= q <= m, l <= s <= n, loops >= 1"));
    }
    let vol = volume_subalg(opts.subalg)?;
    let start = src.accesses();
    let mut retries = 0u32;
    'restart: for _ in 0..opts.attempts.max(1) {
        let mut wide_cols = IndexSet::sample_uniform(n, s, rng);
        let mut wide_rows: Option<IndexSet> = None;
        let mut horiz: Option<Mat<T>> = None;
        for _ in 0..loops {
            let vert = src.select_cols(wide_cols.indices());
            let rows = match maxvol::select_rows(&vert, r, q, vol) {
                Ok(sel) => sel.set,
                Err(Error::RankMismatch { .. }) => {
                    retries += 1;
                    continue 'restart;
                }
                Err(e) => return Err(e),
            };
            let h = src.select_rows(rows.indices());
            wide_cols = match maxvol::select_cols(&h, r, s, vol) {
                Ok(sel) => sel.set,
                Err(Error::RankMismatch { .. }) => {
                    retries += 1;
                    continue 'restart;
                }
                Err(e) => return Err(e),
            };
            wide_rows = Some(rows);
            horiz = Some(h);
        }
        let (wide_rows, horiz) = (wide_rows.unwrap(), horiz.unwrap());
        let sketch = horiz.select_cols(wide_cols.indices());
        let (local_rows, local_cols, nucleus) = match contract_in_sketch(&sketch, r, k, l, vol) {
            Ok(p) => p,
            Err(Error::RankMismatch { .. }) | Err(Error::SingularGenerator { .. }) => {
                retries += 1;
                continue 'restart;
            }
            Err(e) => return Err(e),
        };
        let rows = IndexSet::new(
            local_rows.iter().map(|&i| wide_rows.indices()[i]).collect(),
            m,
        )?;
        let cols = IndexSet::new(
            local_cols.iter().map(|&j| wide_cols.indices()[j]).collect(),
            n,
        )?;
        let cur = CurLra::new(rows, cols, nucleus, r)?;
        return Ok(PipelineOutput {
            cur,
            entries_touched: src.accesses() - start,
            dense_entries: 0,
            retries,
            reseeds: 0,
            loops_executed: loops as u32,
            nucleus_bound: None,
        });
    }
    Err(Error::UnluckySampling {
        attempts: opts.attempts.max(1),
        target_rank: r,
    })
}

// ---------------------------------------------------------------------------
// Leverage scores and sampling
// ---------------------------------------------------------------------------

/// Probability vector over columns (or rows) with its mixing parameter beta.
#[derive(Debug, Clone)]
pub struct LeverageScores {
    p: Vec<f64>,
    beta: f64,
}

impl LeverageScores {
    pub fn new(p: Vec<f64>, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) || beta == 0.0 {
            return Err(Error::invalid("beta must lie in (0, 1]"));
        }
        if p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(Error::invalid("scores must be nonnegative"));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("scores sum to {sum}, expected 1")));
        }
        Ok(LeverageScores { p, beta })
    }

    pub fn uniform(n: usize) -> Self {
        LeverageScores {
            p: vec![1.0 / n as f64; n],
            beta: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }
    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// SVD-based scores from an orthonormal basis V (n x r): for beta = 1,
/// p_j = ||row_j(V)||^2 / r; smaller beta mixes toward uniform, which keeps
/// p_j >= (beta / r) ||row_j||^2 while summing to 1.
pub fn leverage_scores_from_basis<T: Scalar>(v: &Mat<T>, beta: f64) -> Result<LeverageScores> {
    let defect = crate::svd::gram_defect(v);
    if defect > 1e-8 {
        return Err(Error::invalid(format!(
            "basis columns are not orthonormal (defect {defect:.2e})"
        )));
    }
    let n = v.nrows();
    let r = v.ncols() as f64;
    let p: Vec<f64> = (0..n)
        .map(|i| {
            let row_sq: f64 = v.row(i).iter().map(|x| x.modulus_sq()).sum();
            beta * row_sq / r + (1.0 - beta) / n as f64
        })
        .collect();
    // Normalize away rounding in the row norms.
    let sum: f64 = p.iter().sum();
    LeverageScores::new(p.iter().map(|x| x / sum).collect(), beta)
}

/// Sampled indices (with multiplicity, in draw order) and their rescaling
/// factors.
#[derive(Debug, Clone)]
pub struct SamplingPair {
    pub indices: Vec<usize>,
    pub rescale: Vec<f64>,
}

/// Exactly(l): l i.i.d. categorical draws, rescaled by 1/sqrt(l p_i).
pub fn sample_exactly_l(scores: &LeverageScores, l: usize, rng: &mut Rng) -> Result<SamplingPair> {
    if l == 0 {
        return Err(Error::invalid("l must be positive"));
    }
    let cumulative: Vec<f64> = scores
        .p
        .iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().unwrap();
    let mut indices = Vec::with_capacity(l);
    let mut rescale = Vec::with_capacity(l);
    for _ in 0..l {
        let u: f64 = rand::Rng::random::<f64>(rng) * total;
        let mut idx = cumulative.partition_point(|&c| c <= u);
        if idx >= scores.p.len() {
            idx = scores.p.len() - 1;
        }
        // Never land on zero-mass indices.
        while scores.p[idx] == 0.0 && idx > 0 {
            idx -= 1;
        }
        indices.push(idx);
        rescale.push(1.0 / (l as f64 * scores.p[idx]).sqrt());
    }
    Ok(SamplingPair { indices, rescale })
}

/// Expected(l): index j enters with probability min(1, l p_j), rescaled by
/// 1/min(1, sqrt(l p_j)); the expected count is at most l.
pub fn sample_expected_l(scores: &LeverageScores, l: usize, rng: &mut Rng) -> Result<SamplingPair> {
    if l == 0 {
        return Err(Error::invalid("l must be positive"));
    }
    let mut indices = Vec::new();
    let mut rescale = Vec::new();
    for (j, &p) in scores.p.iter().enumerate() {
        let keep = (l as f64 * p).min(1.0);
        if keep > 0.0 && rand::Rng::random::<f64>(rng) < keep {
            indices.push(j);
            rescale.push(1.0 / (l as f64 * p).sqrt().min(1.0));
        }
    }
    Ok(SamplingPair { indices, rescale })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    ExactlyL,
    ExpectedL,
}

impl std::str::FromStr for Sampler {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exactly" => Ok(Sampler::ExactlyL),
            "expected" => Ok(Sampler::ExpectedL),
            other => Err(Error::invalid(format!("unknown sampler '{other}'"))),
        }
    }
}

fn run_sampler(
    sampler: Sampler,
    scores: &LeverageScores,
    l: usize,
    rng: &mut Rng,
) -> Result<SamplingPair> {
    match sampler {
        Sampler::ExactlyL => sample_exactly_l(scores, l, rng),
        Sampler::ExpectedL => sample_expected_l(scores, l, rng),
    }
}

/// How the column scores of the leverage pipeline are produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoresMode {
    /// Top-r right singular basis of the full matrix (labeled dense stage).
    SvdBased { beta: f64, beta_bar: f64 },
    /// p = 1/n exactly; fully sublinear.
    Uniform,
}

// ---------------------------------------------------------------------------
// Leverage-score CUR
// ---------------------------------------------------------------------------

/// CUR via subspace sampling: sample columns by the column scores, then rows
/// by scores recomputed from the rescaled sampled columns, and assemble the
/// nucleus U = D M^+ D-bar for M = D-bar S-bar^T W S D. Duplicate draws are
/// folded into the nucleus through 0/1 multiplicity maps so the stored index
/// sets stay distinct.
#[allow(clippy::too_many_arguments)]
pub fn cur_via_leverage<T: SvdScalar>(
    src: &CountedMat<T>,
    r: usize,
    k: usize,
    l: usize,
    sampler: Sampler,
    mode: ScoresMode,
    rng: &mut Rng,
    opts: &PipelineOpts,
) -> Result<PipelineOutput<T>> {
    let (m, n) = src.shape();
    validate_bounds(r, k, l, m, n)?;
    let (col_scores, dense_entries) = match mode {
        ScoresMode::Uniform => (LeverageScores::uniform(n), 0u64),
        ScoresMode::SvdBased { beta, .. } => {
            let basis = top_right_basis(src.dense(), r, rng)?;
            (leverage_scores_from_basis(&basis, beta)?, (m * n) as u64)
        }
    };
    cur_via_leverage_with_scores(src, &col_scores, r, k, l, sampler, mode, rng, opts).map(
        |mut out| {
            out.dense_entries += dense_entries;
            out
        },
    )
}

/// Leverage CUR with externally supplied column scores (used directly by the
/// refinement path, where the scores come from a crude approximation).
#[allow(clippy::too_many_arguments)]
pub fn cur_via_leverage_with_scores<T: SvdScalar>(
    src: &CountedMat<T>,
    col_scores: &LeverageScores,
    r: usize,
    k: usize,
    l: usize,
    sampler: Sampler,
    mode: ScoresMode,
    rng: &mut Rng,
    opts: &PipelineOpts,
) -> Result<PipelineOutput<T>> {
    let (m, n) = src.shape();
    validate_bounds(r, k, l, m, n)?;
    if col_scores.len() != n {
        return Err(Error::invalid("column scores must have length n"));
    }
    let beta_bar = match mode {
        ScoresMode::SvdBased { beta_bar, .. } => Some(beta_bar),
        ScoresMode::Uniform => None,
    };
    let start = src.accesses();
    let mut retries = 0u32;
    for _ in 0..opts.attempts.max(1) {
        // Stage 2: sample and rescale columns; C := W S.
        let col_pair = run_sampler(sampler, col_scores, l, rng)?;
        if col_pair.indices.is_empty() {
            retries += 1;
            continue;
        }
        let (col_distinct, col_pos) = distinct_positions(&col_pair.indices);
        let c_distinct = src.select_cols(&col_distinct);
        // CD: sampled columns with multiplicity, rescaled.
        let l_dup = col_pair.indices.len();
        let mut cd: Mat<T> = Mat::zeros(m, l_dup);
        for (t, &pos) in col_pos.iter().enumerate() {
            for i in 0..m {
                cd[(i, t)] = c_distinct[(i, pos)].scale(col_pair.rescale[t]);
            }
        }
        // Stage 3: row scores from (C D)^T.
        let row_scores = match beta_bar {
            None => LeverageScores::uniform(m),
            Some(bb) => {
                let f = svd(&cd)?;
                let rr = r.min(f.rank());
                leverage_scores_from_basis(&f.s.leading_cols(rr), bb)?
            }
        };
        // Stage 4-5: sample rows; R := S-bar^T W.
        let row_pair = run_sampler(sampler, &row_scores, k, rng)?;
        if row_pair.indices.is_empty() {
            retries += 1;
            continue;
        }
        let (row_distinct, row_pos) = distinct_positions(&row_pair.indices);
        let k_dup = row_pair.indices.len();

        // Generator with multiplicity: W[rows_dup, cols_dup], reusing the
        // already-read column strip.
        let mut w_dup: Mat<T> = Mat::zeros(k_dup, l_dup);
        for (t, &rp) in row_pos.iter().enumerate() {
            let i = row_distinct[rp];
            for (u, &cp) in col_pos.iter().enumerate() {
                w_dup[(t, u)] = c_distinct[(i, cp)];
            }
        }
        if !generator_has_rank(&w_dup, r)? {
            retries += 1;
            continue;
        }
        // Stage 6: the nucleus.
        let u_dup = if opts.alt_nucleus {
            // Simpler nucleus (S-bar^T W S)^+, already l_dup x k_dup.
            svd::pinv_default(&w_dup)?
        } else {
            // U = D M^+ D-bar with M = D-bar (S-bar^T W S) D.
            let mut m_mat = w_dup.clone();
            for t in 0..k_dup {
                for u in 0..l_dup {
                    m_mat[(t, u)] = m_mat[(t, u)].scale(row_pair.rescale[t] * col_pair.rescale[u]);
                }
            }
            let m_pinv = svd::pinv_default(&m_mat)?;
            let mut u_mat = m_pinv;
            for i in 0..l_dup {
                for j in 0..k_dup {
                    u_mat[(i, j)] = u_mat[(i, j)].scale(col_pair.rescale[i] * row_pair.rescale[j]);
                }
            }
            u_mat
        };
        // Fold multiplicities: U_eff = E U E-bar with 0/1 maps.
        let mut u_eff: Mat<T> = Mat::zeros(col_distinct.len(), row_distinct.len());
        for (t, &cp) in col_pos.iter().enumerate() {
            for (s_, &rp) in row_pos.iter().enumerate() {
                let add = u_dup[(t, s_)];
                u_eff[(cp, rp)] += add;
            }
        }
        let rows = IndexSet::new(row_distinct.clone(), m)?;
        let cols = IndexSet::new(col_distinct.clone(), n)?;
        if rows.len() < r || cols.len() < r {
            retries += 1;
            continue;
        }
        let cur = CurLra::new(rows, cols, u_eff, r)?;
        return Ok(PipelineOutput {
            cur,
            entries_touched: src.accesses() - start,
            dense_entries: 0,
            retries,
            reseeds: 0,
            loops_executed: 0,
            nucleus_bound: None,
        });
    }
    Err(Error::UnluckySampling {
        attempts: opts.attempts.max(1),
        target_rank: r,
    })
}

/// Distinct sorted values plus, for each original entry, its position in the
/// distinct list.
fn distinct_positions(indices: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut distinct: Vec<usize> = indices.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let pos = indices
        .iter()
        .map(|i| distinct.binary_search(i).unwrap())
        .collect();
    (distinct, pos)
}

/// l2 Lewis weights of the rows of V: x_i = v_i^H (V^H V)^{-1} v_i. For a
/// matrix with orthonormal columns these are the squared row norms, i.e.
/// r times the leverage scores. Only the l2 case is implemented; the
/// l_p extension through homotopy iteration is out of scope here and the
/// l2 weights are the standing substitute.
pub fn lewis_weights_l2<T: SvdScalar>(v: &Mat<T>) -> Result<Vec<f64>> {
    let (n, r) = v.shape();
    if r > n {
        return Err(Error::invalid("expected a tall basis matrix"));
    }
    let gram = v.conj_transpose().matmul(v);
    let inv = qr::solve_square(&gram, &Mat::identity(r))
        .map_err(|_| Error::invalid("basis is rank-deficient"))?;
    Ok((0..n)
        .map(|i| {
            // x_i = v_i^H (V^H V)^{-1} v_i for the i-th row v_i.
            let row = v.row(i).to_vec();
            let tmp = inv.matvec(&row);
            row.iter()
                .zip(&tmp)
                .map(|(&a, &b)| (a.conj() * b).re())
                .sum::<f64>()
        })
        .collect())
}

/// Top-r right singular basis. Small matrices are factored exactly; larger
/// ones go through randomized subspace iteration with a few power steps,
/// the O(m n r) route.
pub fn top_right_basis<T: SvdScalar>(w: &Mat<T>, r: usize, rng: &mut Rng) -> Result<Mat<T>> {
    let (m, n) = w.shape();
    if r > m.min(n) {
        return Err(Error::invalid("rank exceeds matrix dimensions"));
    }
    if m.min(n) <= 192 {
        let f = svd(w)?;
        return Ok(f.t.leading_cols(r));
    }
    let block = (r + 8).min(n);
    let mut q: Mat<T> = Mat::random_normal(n, block, rng);
    for _ in 0..4 {
        let y = w.matmul(&q); // m x b
        let z = w.conj_transpose().matmul(&y); // n x b
        let (qq, _) = qr::qr(&z);
        q = qq;
    }
    let b = w.matmul(&q); // m x b
    let f = svd(&b)?;
    // Right basis of W ~= Q * (right basis of B).
    Ok(q.matmul(&f.t).leading_cols(r))
}

// ---------------------------------------------------------------------------
// LRA <-> top SVD <-> CUR conversions
// ---------------------------------------------------------------------------

/// From a general three-factor LRA `A V B ~= W` to an approximate top SVD of
/// rank r: thin QRP factorizations of A and B reduce the problem to an
/// l x k core, whose exact SVD is truncated. Costs O(m l^2 + n k^2).
pub fn lra_to_top_svd<T: SvdScalar>(
    a: &Mat<T>,
    v: &Mat<T>,
    b: &Mat<T>,
    r: usize,
) -> Result<TopSvd<T>> {
    let (m, l) = a.shape();
    let (l2, k) = v.shape();
    let (k2, n) = b.shape();
    if l != l2 || k != k2 {
        return Err(Error::invalid(format!(
            "factor shapes do not chain: ({m} x {l}) ({l2} x {k}) ({k2} x {n})"
        )));
    }
    if r == 0 || r > k.min(l) {
        return Err(Error::RankMismatch {
            expected: r,
            found: k.min(l),
        });
    }
    let fa = qr::qr_column_pivoted(a);
    let ra = permute_back(&fa.r, &fa.perm); // (min(m,l)) x l
    let fb = qr::qr_column_pivoted(&b.conj_transpose());
    let rb = permute_back(&fb.r, &fb.perm); // (min(n,k)) x k
    let core = ra.matmul(v).matmul(&rb.conj_transpose());
    let f = svd(&core)?;
    let revealed = f
        .sigma
        .iter()
        .filter(|&&s| s > 1e-13 * f.sigma[0] && s > 0.0)
        .count();
    if revealed < r {
        return Err(Error::RankMismatch {
            expected: r,
            found: revealed,
        });
    }
    let s = fa.q.matmul(&f.s.leading_cols(r));
    let t = fb.q.matmul(&f.t.leading_cols(r));
    Ok(TopSvd {
        s,
        sigma: f.sigma[..r].to_vec(),
        t,
    })
}

fn permute_back<T: Scalar>(r: &Mat<T>, perm: &[usize]) -> Mat<T> {
    let mut out: Mat<T> = Mat::zeros(r.nrows(), r.ncols());
    for j in 0..r.ncols() {
        let orig = perm[j];
        for i in 0..r.nrows() {
            out[(i, orig)] = r[(i, j)];
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SvdToCurMode {
    /// Strong rank-revealing selection on the singular-vector factors.
    Deterministic,
    /// Row-norm leverage sampling of the factors.
    Sampled,
}

/// From a top SVD of W to a CUR approximation: select k rows from the left
/// factor and l columns from the right factor (deterministically via strong
/// rank-revealing selection, or by sampling on the factor row norms), then
/// build the canonical nucleus from the actual W entries. Reports the
/// nucleus norm certificate t_{m,l,h} t_{n,k,h} / sigma_r(W).
pub fn top_svd_to_cur<T: SvdScalar>(
    src: &CountedMat<T>,
    top: &TopSvd<T>,
    k: usize,
    l: usize,
    mode: SvdToCurMode,
    rng: &mut Rng,
    opts: &PipelineOpts,
) -> Result<PipelineOutput<T>> {
    let (m, n) = src.shape();
    let r = top.rank();
    validate_bounds(r, k, l, m, n)?;
    if top.s.nrows() != m || top.t.nrows() != n {
        return Err(Error::invalid("top SVD dimensions do not match the source"));
    }
    let start = src.accesses();
    let vol = volume_subalg(match opts.subalg {
        SubAlg::LeverageSample => SubAlg::Qr,
        other => other,
    })?;
    let (rows, cols) = match mode {
        SvdToCurMode::Deterministic => {
            let rows = maxvol::select_rows(&top.s, r, k, vol)?.set;
            let cols = maxvol::select_rows(&top.t, r, l, vol)?.set;
            (rows, cols)
        }
        SvdToCurMode::Sampled => {
            let rows = sample_distinct_by_row_norms(&top.s, k, rng)?;
            let cols = sample_distinct_by_row_norms(&top.t, l, rng)?;
            (rows, cols)
        }
    };
    let generator = src.submatrix(rows.indices(), cols.indices());
    if !generator_has_rank(&generator, r)? {
        return Err(Error::RankMismatch {
            expected: r,
            found: 0,
        });
    }
    let nucleus = canonical_nucleus(&generator, r)?;
    let sigma_r = top.sigma[r - 1];
    let h = maxvol::RRQR_H;
    let bound = if sigma_r > 0.0 {
        Some(maxvol::t_factor(m, l.min(m), h) * maxvol::t_factor(n, k.min(n), h) / sigma_r)
    } else {
        None
    };
    let cur = CurLra::new(rows, cols, nucleus, r)?;
    Ok(PipelineOutput {
        cur,
        entries_touched: src.accesses() - start,
        dense_entries: 0,
        retries: 0,
        reseeds: 0,
        loops_executed: 0,
        nucleus_bound: bound,
    })
}

fn sample_distinct_by_row_norms<T: Scalar>(
    basis: &Mat<T>,
    count: usize,
    rng: &mut Rng,
) -> Result<IndexSet> {
    let scores = leverage_scores_from_basis(basis, 1.0)?;
    let mut distinct = Vec::new();
    for _ in 0..50 * count.max(1) {
        let pair = sample_exactly_l(&scores, count, rng)?;
        for idx in pair.indices {
            if !distinct.contains(&idx) {
                distinct.push(idx);
                if distinct.len() == count {
                    return IndexSet::new(distinct, basis.nrows());
                }
            }
        }
    }
    Err(Error::UnluckySampling {
        attempts: 50 * count,
        target_rank: count,
    })
}

/// Refine a crude LRA `A B ~= W`: recover its top SVD superfast, read off
/// leverage scores, and rerun the sampling pipeline on W itself.
#[allow(clippy::too_many_arguments)]
pub fn refine_lra<T: SvdScalar>(
    src: &CountedMat<T>,
    a: &Mat<T>,
    b: &Mat<T>,
    r: usize,
    k: usize,
    l: usize,
    sampler: Sampler,
    rng: &mut Rng,
    opts: &PipelineOpts,
) -> Result<PipelineOutput<T>> {
    let inner = a.ncols();
    if inner != b.nrows() {
        return Err(Error::invalid("crude factors do not chain"));
    }
    if r > inner {
        return Err(Error::RankMismatch {
            expected: r,
            found: inner,
        });
    }
    let eye: Mat<T> = Mat::identity(inner);
    let top = lra_to_top_svd(a, &eye, b, r)?;
    let col_scores = leverage_scores_from_basis(&top.t, 1.0)?;
    cur_via_leverage_with_scores(
        src,
        &col_scores,
        r,
        k,
        l,
        sampler,
        ScoresMode::SvdBased {
            beta: 1.0,
            beta_bar: 1.0,
        },
        rng,
        opts,
    )
}

// ---------------------------------------------------------------------------
// Declarative pipeline dispatch
// ---------------------------------------------------------------------------

/// Configuration-level description of a pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub enum PipelineSpec {
    Primitive {
        r: usize,
        k: usize,
        l: usize,
    },
    Cynical {
        r: usize,
        q: usize,
        s: usize,
        k: usize,
        l: usize,
        subalg: SubAlg,
    },
    CrossApprox {
        r: usize,
        k: usize,
        l: usize,
        loops: usize,
        subalg: SubAlg,
    },
    /// One widening C-A loop at sketch width (q, s) followed by contraction.
    CaCynical {
        r: usize,
        q: usize,
        s: usize,
        k: usize,
        l: usize,
        loops: usize,
        subalg: SubAlg,
    },
    Leverage {
        r: usize,
        k: usize,
        l: usize,
        sampler: Sampler,
        uniform_scores: bool,
        beta: f64,
    },
    SvdToCur {
        r: usize,
        k: usize,
        l: usize,
        sampled: bool,
    },
}

pub fn run_pipeline<T: SvdScalar>(
    src: &CountedMat<T>,
    spec: &PipelineSpec,
    rng: &mut Rng,
    opts: &PipelineOpts,
) -> Result<PipelineOutput<T>> {
    match *spec {
        PipelineSpec::Primitive { r, k, l } => primitive_cur(src, r, k, l, rng, opts),
        PipelineSpec::Cynical {
            r,
            q,
            s,
            k,
            l,
            subalg,
        } => {
            let opts = PipelineOpts {
                subalg,
                ..opts.clone()
            };
            cynical_cur(src, r, q, s, k, l, rng, &opts)
        }
        PipelineSpec::CrossApprox {
            r,
            k,
            l,
            loops,
            subalg,
        } => {
            let opts = PipelineOpts {
                subalg,
                ..opts.clone()
            };
            cross_approximation(src, r, k, l, loops, rng, &opts)
        }
        PipelineSpec::CaCynical {
            r,
            q,
            s,
            k,
            l,
            loops,
            subalg,
        } => {
            let opts = PipelineOpts {
                subalg,
                ..opts.clone()
            };
            ca_then_contract(src, r, q, s, k, l, loops, rng, &opts)
        }
        PipelineSpec::Leverage {
            r,
            k,
            l,
            sampler,
            uniform_scores,
            beta,
        } => {
            let mode = if uniform_scores {
                ScoresMode::Uniform
            } else {
                ScoresMode::SvdBased {
                    beta,
                    beta_bar: beta,
                }
            };
            cur_via_leverage(src, r, k, l, sampler, mode, rng, opts)
        }
        PipelineSpec::SvdToCur { r, k, l, sampled } => {
            let full = svd(src.dense())?;
            let top = full.truncate(r)?;
            let mode = if sampled {
                SvdToCurMode::Sampled
            } else {
                SvdToCurMode::Deterministic
            };
            let mut out = top_svd_to_cur(src, &top, k, l, mode, rng, opts)?;
            out.dense_entries += (src.nrows() * src.ncols()) as u64;
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{gen_factor_gaussian, gen_plus_minus_delta, FactorKind};
    use crate::mat::NormKind;
    use crate::rng;
    use crate::skeleton::error_report;

    fn rank_r_matrix(m: usize, n: usize, r: usize, seed: u64) -> Mat<f64> {
        gen_factor_gaussian(
            m,
            n,
            r,
            FactorKind::Scaled { sigma: 1.0 },
            0.0,
            &mut rng::seeded(seed),
        )
        .unwrap()
        .w
    }

    #[test]
    fn primitive_exact_on_rank_one() {
        // W = outer(u, v): any nonzero pivot gives an exact reconstruction.
        let u = [1.0, -2.0, 0.5];
        let v = [3.0, 1.0, 2.0, -1.0];
        let w = Mat::from_fn(3, 4, |i, j| u[i] * v[j]);
        let src = CountedMat::new(&w);
        let out =
            primitive_cur(&src, 1, 1, 1, &mut rng::seeded(2), &PipelineOpts::default()).unwrap();
        let rep = error_report(&w, &out.cur, NormKind::Frobenius, None).unwrap();
        assert!(rep.relative < 1e-12);
        // Reads one row, one column, one pivot per attempt.
        assert!(out.entries_touched <= ((3 + 4 + 1) * (out.retries as usize + 1)) as u64);
    }

    #[test]
    fn primitive_failure_rate_on_delta_matrix() {
        // k = l = 1 on a 4 x 4 single-entry matrix: per-draw success needs
        // both the row and the column of the entry, so failure ~ 1 - 1/16.
        let w = gen_plus_minus_delta(4, 4, 2, 1, false).unwrap();
        let src = CountedMat::new(&w);
        let opts = PipelineOpts {
            attempts: 1,
            ..Default::default()
        };
        let trials = 1000;
        let mut failures = 0;
        for t in 0..trials {
            let mut rng = rng::stream(900, t as u64);
            match primitive_cur(&src, 1, 1, 1, &mut rng, &opts) {
                Ok(out) => {
                    let rep = error_report(&w, &out.cur, NormKind::Chebyshev, None).unwrap();
                    assert!(rep.absolute < 1e-12);
                }
                Err(Error::UnluckySampling { .. }) => failures += 1,
                Err(e) => panic!("{e}"),
            }
        }
        let expected = 1.0 - 1.0 / 16.0;
        let rate = failures as f64 / trials as f64;
        assert!((rate - expected).abs() <= 0.05, "rate {rate} vs {expected}");
    }

    #[test]
    fn cynical_collapses_to_primitive_and_is_exact_on_rank_r() {
        let w = rank_r_matrix(40, 32, 3, 5);
        let src = CountedMat::new(&w);
        let opts = PipelineOpts::default();
        // q = k, s = l: degenerate cynical, still exact on rank-r inputs.
        let out = cynical_cur(&src, 3, 5, 5, 5, 5, &mut rng::seeded(7), &opts).unwrap();
        let rep = error_report(&w, &out.cur, NormKind::Frobenius, None).unwrap();
        assert!(rep.relative < 1e-9, "{}", rep.relative);

        let out = cynical_cur(&src, 3, 12, 12, 3, 3, &mut rng::seeded(8), &opts).unwrap();
        let rep = error_report(&w, &out.cur, NormKind::Frobenius, None).unwrap();
        assert!(rep.relative < 1e-9, "{}", rep.relative);
    }

    #[test]
    fn cross_approximation_exact_and_within_budget() {
        let w = rank_r_matrix(48, 40, 4, 11);
        let src = CountedMat::new(&w);
        let out = cross_approximation(
            &src,
            4,
            4,
            4,
            5,
            &mut rng::seeded(13),
            &PipelineOpts::default(),
        )
        .unwrap();
        let rep = error_report(&w, &out.cur, NormKind::Frobenius, None).unwrap();
        assert!(rep.relative < 1e-9, "{}", rep.relative);
        let budget = 4 * 5 * (48 * 4 + 4 * 40) as u64;
        assert!(
            out.entries_touched <= budget,
            "{} > {budget}",
            out.entries_touched
        );
    }

    #[test]
    fn maxvol_block_is_ca_fixed_point() {
        // Start the alternating pass at an h-maximal block: it reproduces
        // itself after one loop.
        let w = rank_r_matrix(12, 12, 2, 17);
        let cols0 = maxvol::projective_maxvol(&w, 2, 2, VolumeSubAlg::LupPivot)
            .unwrap()
            .set;
        let vert = w.select_cols(cols0.indices());
        let rows1 = maxvol::select_rows(&vert, 2, 2, VolumeSubAlg::LupPivot)
            .unwrap()
            .set;
        let horiz = w.select_rows(rows1.indices());
        let cols1 = maxvol::select_cols(&horiz, 2, 2, VolumeSubAlg::LupPivot)
            .unwrap()
            .set;
        let vert2 = w.select_cols(cols1.indices());
        let rows2 = maxvol::select_rows(&vert2, 2, 2, VolumeSubAlg::LupPivot)
            .unwrap()
            .set;
        assert_eq!(rows1.indices(), rows2.indices());
    }

    #[test]
    fn cross_approximation_with_leverage_subalg() {
        let w = rank_r_matrix(36, 30, 3, 19);
        let src = CountedMat::new(&w);
        let opts = PipelineOpts {
            subalg: SubAlg::LeverageSample,
            ..Default::default()
        };
        let out = cross_approximation(&src, 3, 6, 6, 3, &mut rng::seeded(23), &opts).unwrap();
        let rep = error_report(&w, &out.cur, NormKind::Frobenius, None).unwrap();
        assert!(rep.relative < 1e-8, "{}", rep.relative);
    }

    #[test]
    fn ca_then_contract_matches_protocol() {
        let w = rank_r_matrix(64, 64, 4, 29);
        let src = CountedMat::new(&w);
        let out = ca_then_contract(
            &src,
            4,
            16,
            16,
            4,
            4,
            1,
            &mut rng::seeded(31),
            &PipelineOpts::default(),
        )
        .unwrap();
        let rep = error_report(&w, &out.cur, NormKind::Frobenius, None).unwrap();
        assert!(rep.relative < 1e-9, "{}", rep.relative);
        assert_eq!(out.cur.k(), 4);
        assert_eq!(out.cur.l(), 4);
    }

    #[test]
    fn leverage_scores_examples() {
        // First two columns of I_3: scores [0.5, 0.5, 0].
        let mut v: Mat<f64> = Mat::zeros(3, 2);
        v[(0, 0)] = 1.0;
        v[(1, 1)] = 1.0;
        let s = leverage_scores_from_basis(&v, 1.0).unwrap();
        assert!((s.probabilities()[0] - 0.5).abs() < 1e-12);
        assert!((s.probabilities()[1] - 0.5).abs() < 1e-12);
        assert!(s.probabilities()[2].abs() < 1e-12);
        assert!((s.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);

        // Orthonormal basis from a Gaussian: sums to one, nonnegative.
        let g = crate::gen::gen_gaussian(64, 4, &mut rng::seeded(3));
        let (q, _) = qr::qr(&g);
        let s = leverage_scores_from_basis(&q, 1.0).unwrap();
        assert!((s.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(s.probabilities().iter().all(|&p| p >= 0.0));

        // Non-orthonormal input is rejected.
        let bad = g.clone();
        assert!(leverage_scores_from_basis(&bad, 1.0).is_err());
    }

    #[test]
    fn exactly_l_sampling_properties() {
        let mut rng = rng::seeded(5);
        // Uniform scores: every rescale factor is sqrt(n / l).
        let s = LeverageScores::uniform(10);
        let pair = sample_exactly_l(&s, 5, &mut rng).unwrap();
        assert_eq!(pair.indices.len(), 5);
        for d in &pair.rescale {
            assert!((d - (10.0f64 / 5.0).sqrt()).abs() < 1e-12);
        }
        // Point mass: always index 0, rescale 1/sqrt(l).
        let s = LeverageScores::new(vec![1.0, 0.0, 0.0], 1.0).unwrap();
        let pair = sample_exactly_l(&s, 4, &mut rng).unwrap();
        assert!(pair.indices.iter().all(|&i| i == 0));
        for d in &pair.rescale {
            assert!((d - 0.5).abs() < 1e-12);
        }
        // Frequencies concentrate on the score vector.
        let s = LeverageScores::new(vec![0.5, 0.3, 0.2], 1.0).unwrap();
        let mut counts = [0usize; 3];
        let draws = 10_000;
        let pair = sample_exactly_l(&s, draws, &mut rng).unwrap();
        for &i in &pair.indices {
            counts[i] += 1;
        }
        for (i, &target) in [0.5, 0.3, 0.2].iter().enumerate() {
            let freq = counts[i] as f64 / draws as f64;
            assert!((freq - target).abs() <= 0.02, "index {i}: {freq}");
        }
    }

    #[test]
    fn expected_l_sampling_properties() {
        let mut rng = rng::seeded(7);
        // l p_j >= 1 for all j: everything kept, rescale 1.
        let s = LeverageScores::uniform(6);
        let pair = sample_expected_l(&s, 6, &mut rng).unwrap();
        assert_eq!(pair.indices, vec![0, 1, 2, 3, 4, 5]);
        assert!(pair.rescale.iter().all(|&d| (d - 1.0).abs() < 1e-12));

        // Mean sample count tracks sum(min(1, l p_j)).
        let s = LeverageScores::new(vec![0.4, 0.3, 0.15, 0.1, 0.05], 1.0).unwrap();
        let l = 2;
        let expected: f64 = s
            .probabilities()
            .iter()
            .map(|&p| (l as f64 * p).min(1.0))
            .sum();
        let mut total = 0usize;
        let trials = 1000;
        for _ in 0..trials {
            total += sample_expected_l(&s, l, &mut rng).unwrap().indices.len();
        }
        let mean = total as f64 / trials as f64;
        assert!(
            (mean - expected).abs() <= 0.1 * expected,
            "{mean} vs {expected}"
        );
    }

    #[test]
    fn lewis_weights_l2_match_leverage_on_orthonormal_bases() {
        let g = crate::gen::gen_gaussian(20, 4, &mut rng::seeded(77));
        let (q, _) = qr::qr(&g);
        let weights = lewis_weights_l2(&q).unwrap();
        let scores = leverage_scores_from_basis(&q, 1.0).unwrap();
        for (w, p) in weights.iter().zip(scores.probabilities()) {
            // x_i = r p_i for orthonormal columns.
            assert!((w - 4.0 * p).abs() < 1e-10);
        }
        // Basis-invariance: the weights depend only on the column space.
        let mixer = crate::gen::gen_gaussian(4, 4, &mut rng::seeded(78));
        let span = g.matmul(&mixer);
        let w1 = lewis_weights_l2(&g).unwrap();
        let w2 = lewis_weights_l2(&span).unwrap();
        for i in 0..20 {
            assert!((w1[i] - w2[i]).abs() < 1e-8 * (1.0 + w1[i]));
        }
    }

    #[test]
    fn leverage_cur_exact_hit_and_uniform_mode() {
        let w = rank_r_matrix(40, 36, 3, 37);
        let src = CountedMat::new(&w);
        let opts = PipelineOpts::default();
        let out = cur_via_leverage(
            &src,
            3,
            12,
            12,
            Sampler::ExactlyL,
            ScoresMode::SvdBased {
                beta: 1.0,
                beta_bar: 1.0,
            },
            &mut rng::seeded(41),
            &opts,
        )
        .unwrap();
        let rep = error_report(&w, &out.cur, NormKind::Frobenius, None).unwrap();
        assert!(rep.relative < 1e-8, "{}", rep.relative);
        assert!(out.dense_entries > 0);

        let out = cur_via_leverage(
            &src,
            3,
            12,
            12,
            Sampler::ExactlyL,
            ScoresMode::Uniform,
            &mut rng::seeded(43),
            &opts,
        )
        .unwrap();
        assert_eq!(out.dense_entries, 0);
        let rep = error_report(&w, &out.cur, NormKind::Frobenius, None).unwrap();
        assert!(rep.relative < 1e-8, "{}", rep.relative);
    }

    #[test]
    fn leverage_cur_uniform_corridor_on_perturbed_input() {
        // Uniform scores on a perturbed factor-Gaussian at n = 256, r = 8,
        // k = l = 4r: mean relative error stays small over 100 seeds.
        let mut errs = Vec::new();
        for t in 0..100 {
            let w = gen_factor_gaussian(
                256,
                256,
                8,
                FactorKind::Scaled { sigma: 1.0 },
                1e-10,
                &mut rng::stream(50, t),
            )
            .unwrap()
            .w;
            let src = CountedMat::new(&w);
            let out = cur_via_leverage(
                &src,
                8,
                32,
                32,
                Sampler::ExactlyL,
                ScoresMode::Uniform,
                &mut rng::stream(51, t),
                &PipelineOpts::default(),
            )
            .unwrap();
            let approx = out.cur.reconstruct(&w);
            let err = crate::svd::spectral_norm_est(&w.sub(&approx), 1e-8, 300, t)
                / crate::svd::spectral_norm_est(&w, 1e-8, 300, t);
            errs.push(err);
        }
        let mean = errs.iter().sum::<f64>() / errs.len() as f64;
        assert!(mean <= 1e-3, "mean relative error {mean}");
    }

    #[test]
    fn lra_to_top_svd_round_trip() {
        let w = rank_r_matrix(30, 25, 3, 47);
        let f = svd(&w).unwrap();
        let top = f.truncate(3).unwrap();
        // A = S Sigma, B = T^H, V = I.
        let mut a = top.s.clone();
        for j in 0..3 {
            for i in 0..30 {
                a[(i, j)] *= top.sigma[j];
            }
        }
        let b = top.t.conj_transpose();
        let eye: Mat<f64> = Mat::identity(3);
        let back = lra_to_top_svd(&a, &eye, &b, 3).unwrap();
        for j in 0..3 {
            assert!((back.sigma[j] - top.sigma[j]).abs() <= 1e-10 * top.sigma[0]);
        }
        assert!(back.left_defect() < 1e-10);
        assert!(back.right_defect() < 1e-10);
        // Triangle-inequality audit.
        let w_est = back.reconstruct();
        let direct = a.matmul(&b);
        let lhs = w.sub(&w_est).frobenius_norm();
        let rhs = w.sub(&direct).frobenius_norm() + 1e-9 * w.frobenius_norm();
        assert!(lhs <= rhs, "{lhs} > {rhs}");

        // Rank-1 outer product sanity.
        let u: Mat<f64> = Mat::from_rows(vec![vec![3.0], vec![4.0]]);
        let vt: Mat<f64> = Mat::from_rows(vec![vec![1.0, 2.0, 2.0]]);
        let eye1: Mat<f64> = Mat::identity(1);
        let top = lra_to_top_svd(&u, &eye1, &vt, 1).unwrap();
        assert!((top.sigma[0] - 5.0 * 3.0).abs() < 1e-10);
        assert!(lra_to_top_svd(&u, &eye1, &vt, 2).is_err());
    }

    #[test]
    fn top_svd_to_cur_exact_and_certified() {
        let w = rank_r_matrix(32, 28, 3, 53);
        let src = CountedMat::new(&w);
        let top = svd(&w).unwrap().truncate(3).unwrap();
        let out = top_svd_to_cur(
            &src,
            &top,
            3,
            3,
            SvdToCurMode::Deterministic,
            &mut rng::seeded(59),
            &PipelineOpts::default(),
        )
        .unwrap();
        let rep = error_report(&w, &out.cur, NormKind::Frobenius, None).unwrap();
        assert!(rep.relative < 1e-9);
        let u_norm = crate::svd::spectral_norm(out.cur.nucleus()).unwrap();
        assert!(u_norm <= out.nucleus_bound.unwrap() * (1.0 + 1e-9));

        let out = top_svd_to_cur(
            &src,
            &top,
            6,
            6,
            SvdToCurMode::Sampled,
            &mut rng::seeded(61),
            &PipelineOpts::default(),
        )
        .unwrap();
        let rep = error_report(&w, &out.cur, NormKind::Frobenius, None).unwrap();
        assert!(rep.relative < 1e-8);
    }

    #[test]
    fn top_svd_to_cur_full_selection_inverts() {
        // k = l = r = m = n: the selection is the identity and the nucleus
        // is the exact inverse.
        let mut rng = rng::seeded(97);
        let w = crate::gen::gen_gaussian(5, 5, &mut rng);
        let src = CountedMat::new(&w);
        let top = svd(&w).unwrap();
        let out = top_svd_to_cur(
            &src,
            &top,
            5,
            5,
            SvdToCurMode::Deterministic,
            &mut rng,
            &PipelineOpts::default(),
        )
        .unwrap();
        assert_eq!(out.cur.rows().indices(), &[0, 1, 2, 3, 4]);
        assert_eq!(out.cur.cols().indices(), &[0, 1, 2, 3, 4]);
        let should_be_eye = w.matmul(out.cur.nucleus());
        let eye: Mat<f64> = Mat::identity(5);
        assert!(should_be_eye.sub(&eye).frobenius_norm() < 1e-8);
    }

    #[test]
    fn top_svd_to_cur_selects_support_blocks() {
        // Block diagonal with orthogonal blocks: selection lands on the
        // supporting rows/columns of the dominant block.
        let mut w: Mat<f64> = Mat::zeros(6, 6);
        w[(0, 0)] = 5.0;
        w[(1, 1)] = 4.0;
        w[(4, 4)] = 0.001;
        w[(5, 5)] = 0.0005;
        let src = CountedMat::new(&w);
        let top = svd(&w).unwrap().truncate(2).unwrap();
        let out = top_svd_to_cur(
            &src,
            &top,
            2,
            2,
            SvdToCurMode::Deterministic,
            &mut rng::seeded(67),
            &PipelineOpts::default(),
        )
        .unwrap();
        assert_eq!(out.cur.rows().indices(), &[0, 1]);
        assert_eq!(out.cur.cols().indices(), &[0, 1]);
    }

    #[test]
    fn refine_improves_a_perturbed_crude_lra() {
        let mut improved = 0;
        let trials = 40;
        for t in 0..trials {
            let fg = gen_factor_gaussian(
                96,
                80,
                4,
                FactorKind::Scaled { sigma: 1.0 },
                1e-9,
                &mut rng::stream(70, t),
            )
            .unwrap();
            let w = &fg.w;
            // Crude LRA: the true factors plus a 1% relative perturbation.
            let mut rng_t = rng::stream(71, t);
            let scale_a = fg.left.frobenius_norm() * 0.01 / (96.0 * 4.0f64).sqrt();
            let a = fg
                .left
                .add(&Mat::random_normal(96, 4, &mut rng_t).scale(scale_a));
            let scale_b = fg.right.frobenius_norm() * 0.01 / (80.0 * 4.0f64).sqrt();
            let b = fg
                .right
                .add(&Mat::random_normal(4, 80, &mut rng_t).scale(scale_b));
            let crude_err = w.sub(&a.matmul(&b)).frobenius_norm();

            let src = CountedMat::new(w);
            let out = match refine_lra(
                &src,
                &a,
                &b,
                4,
                16,
                16,
                Sampler::ExactlyL,
                &mut rng::stream(72, t),
                &PipelineOpts::default(),
            ) {
                Ok(o) => o,
                Err(_) => continue,
            };
            let refined_err = w.sub(&out.cur.reconstruct(w)).frobenius_norm();
            if refined_err <= crude_err {
                improved += 1;
            }
        }
        assert!(
            improved * 10 >= trials * 8,
            "improved only {improved}/{trials}"
        );
    }

    #[test]
    fn refine_rejects_low_rank_crude() {
        let w = rank_r_matrix(20, 20, 3, 73);
        let src = CountedMat::new(&w);
        let a: Mat<f64> = Mat::zeros(20, 2);
        let b: Mat<f64> = Mat::zeros(2, 20);
        match refine_lra(
            &src,
            &a,
            &b,
            3,
            6,
            6,
            Sampler::ExactlyL,
            &mut rng::seeded(79),
            &PipelineOpts::default(),
        ) {
            Err(Error::RankMismatch {
                expected: 3,
                found: 2,
            }) => {}
            other => panic!("expected rank mismatch, got {other:?}"),
        }
    }

    #[test]
    fn pipelines_are_deterministic_per_seed() {
        let w = rank_r_matrix(32, 28, 3, 83);
        let spec = PipelineSpec::CrossApprox {
            r: 3,
            k: 3,
            l: 3,
            loops: 4,
            subalg: SubAlg::Lup,
        };
        let src1 = CountedMat::new(&w);
        let out1 = run_pipeline(
            &src1,
            &spec,
            &mut rng::stream(89, 5),
            &PipelineOpts::default(),
        )
        .unwrap();
        let src2 = CountedMat::new(&w);
        let out2 = run_pipeline(
            &src2,
            &spec,
            &mut rng::stream(89, 5),
            &PipelineOpts::default(),
        )
        .unwrap();
        assert_eq!(out1.cur.rows().indices(), out2.cur.rows().indices());
        assert_eq!(out1.cur.cols().indices(), out2.cur.cols().indices());
        assert_eq!(out1.cur.nucleus(), out2.cur.nucleus());
        assert_eq!(out1.entries_touched, out2.entries_touched);
    }

    #[test]
    fn sampling_corridor_theorem_c1() {
        // sigma_i^2(V^T S D) within 1 +- gamma for most trials.
        let r = 4;
        let n = 256;
        let delta = 0.1f64;
        let l = (4.0 * r as f64 * (2.0 * r as f64 / delta).ln()).ceil() as usize;
        let gamma = (4.0 * r as f64 * (2.0 * r as f64 / delta).ln() / l as f64).sqrt();
        let g = crate::gen::gen_gaussian(n, r, &mut rng::seeded(91));
        let (v, _) = qr::qr(&g);
        let scores = leverage_scores_from_basis(&v, 1.0).unwrap();
        let mut hits = 0;
        let trials = 100;
        for t in 0..trials {
            let mut rng = rng::stream(93, t);
            let pair = sample_expected_l(&scores, l, &mut rng).unwrap();
            if pair.indices.is_empty() {
                continue;
            }
            // V^T S D: the sampled rescaled rows of V, transposed.
            let mut vsd: Mat<f64> = Mat::zeros(r, pair.indices.len());
            for (t_, (&i, &d)) in pair.indices.iter().zip(&pair.rescale).enumerate() {
                for row in 0..r {
                    vsd[(row, t_)] = v[(i, row)] * d;
                }
            }
            let sv = crate::svd::singular_values(&vsd).unwrap();
            let ok = sv.iter().take(r).all(|&s| {
                let sq = s * s;
                sq >= 1.0 - gamma - 1e-9 && sq <= 1.0 + gamma + 1e-9
            });
            if ok {
                hits += 1;
            }
        }
        assert!(hits >= 90, "corridor held in only {hits}/{trials} trials");
    }
}
