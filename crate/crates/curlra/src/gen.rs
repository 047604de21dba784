//! Input generators: Gaussian and sparse-Gaussian random matrices,
//! factor-Gaussian products of prescribed expected rank, the adversarial
//! single-entry family, the discretized single-layer Laplacian, and file
//! ingestion for external benchmark matrices.

use rand_distr::{Distribution, StandardNormal};
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::qr;
use crate::rng::Rng;

/// Declarative description of a generated input matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    Gaussian {
        m: usize,
        n: usize,
    },
    NzGaussian {
        m: usize,
        n: usize,
        nz: usize,
    },
    FactorGaussian {
        m: usize,
        n: usize,
        r: usize,
        kind: FactorKind,
        eps: f64,
    },
    PlusMinusDelta {
        m: usize,
        n: usize,
        i: usize,
        j: usize,
        negative: bool,
    },
    Laplacian {
        n: usize,
    },
    FromFile {
        path: PathBuf,
    },
}

/// Shape of the middle factor in a factor-Gaussian product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FactorKind {
    /// W = sigma * G * H with both factors Gaussian.
    Scaled { sigma: f64 },
    /// W = G * diag(sigma1 * rho^i) * H, geometric spectrum.
    DiagonallyScaled { sigma1: f64, rho: f64 },
    /// W = G * H with G Gaussian and H a fixed well-conditioned factor.
    Left,
    /// W = G * H with H Gaussian and G a fixed well-conditioned factor.
    Right,
}

/// Keep the spectrum ratio sigma_1/sigma_r of a diagonally scaled factor
/// bounded; larger ratios defeat the expected-rank model.
const MAX_SPECTRUM_RATIO: f64 = 1e6;

pub fn generate(spec: &GeneratorSpec, rng: &mut Rng) -> Result<Mat<f64>> {
    match spec {
        GeneratorSpec::Gaussian { m, n } => Ok(gen_gaussian(*m, *n, rng)),
        GeneratorSpec::NzGaussian { m, n, nz } => gen_nz_gaussian(*m, *n, *nz, rng),
        GeneratorSpec::FactorGaussian { m, n, r, kind, eps } => {
            Ok(gen_factor_gaussian(*m, *n, *r, *kind, *eps, rng)?.w)
        }
        GeneratorSpec::PlusMinusDelta {
            m,
            n,
            i,
            j,
            negative,
        } => gen_plus_minus_delta(*m, *n, *i, *j, *negative),
        GeneratorSpec::Laplacian { n } => gen_laplacian(*n),
        GeneratorSpec::FromFile { path } => crate::io::read_matrix(path)?.expect_real(),
    }
}

/// i.i.d. standard normal entries.
pub fn gen_gaussian(m: usize, n: usize, rng: &mut Rng) -> Mat<f64> {
    Mat::from_vec(
        m,
        n,
        (0..m * n).map(|_| StandardNormal.sample(rng)).collect(),
    )
}

/// Exactly `nz` Gaussian entries at uniform positions without replacement,
/// rejecting (and redrawing) placements that leave a zero row or column.
/// After 1000 rejections entries are deterministically moved out of
/// multiply-covered rows/columns into empty ones.
pub fn gen_nz_gaussian(m: usize, n: usize, nz: usize, rng: &mut Rng) -> Result<Mat<f64>> {
    if nz < m.max(n) {
        return Err(Error::invalid(format!(
            "nz = {nz} cannot cover every row and column of a {m} x {n} matrix"
        )));
    }
    if nz > m * n {
        return Err(Error::invalid(format!(
            "nz = {nz} exceeds {m} x {n} entries"
        )));
    }
    let mut positions: Vec<usize> = Vec::new();
    let mut ok = false;
    for _ in 0..1000 {
        positions = rand::seq::index::sample(rng, m * n, nz).into_vec();
        if covers_all(&positions, m, n) {
            ok = true;
            break;
        }
    }
    if !ok {
        repair_coverage(&mut positions, m, n);
    }
    let mut w = Mat::zeros(m, n);
    positions.sort_unstable();
    for &p in &positions {
        w[(p / n, p % n)] = StandardNormal.sample(rng);
    }
    Ok(w)
}

fn covers_all(positions: &[usize], m: usize, n: usize) -> bool {
    let mut rows = vec![false; m];
    let mut cols = vec![false; n];
    for &p in positions {
        rows[p / n] = true;
        cols[p % n] = true;
    }
    rows.iter().all(|&b| b) && cols.iter().all(|&b| b)
}

fn repair_coverage(positions: &mut [usize], m: usize, n: usize) {
    let mut row_count = vec![0usize; m];
    let mut col_count = vec![0usize; n];
    for &p in positions.iter() {
        row_count[p / n] += 1;
        col_count[p % n] += 1;
    }
    // Move donors (from rows with >= 2 entries) into empty rows, then the
    // symmetric pass for columns. Counts stay exact.
    for r in 0..m {
        if row_count[r] > 0 {
            continue;
        }
        let donor = positions
            .iter()
            .position(|&p| row_count[p / n] >= 2)
            .expect("nz >= m guarantees a donor row");
        let old = positions[donor];
        row_count[old / n] -= 1;
        positions[donor] = r * n + old % n;
        row_count[r] += 1;
    }
    for c in 0..n {
        if col_count[c] > 0 {
            continue;
        }
        let donor = positions
            .iter()
            .position(|&p| col_count[p % n] >= 2)
            .expect("nz >= n guarantees a donor column");
        // The donor stays in its row, so row coverage is untouched.
        let old = positions[donor];
        col_count[old % n] -= 1;
        positions[donor] = (old / n) * n + c;
        col_count[c] += 1;
    }
}

/// A factor-Gaussian product together with its factors, which serve as
/// oracles in tests (e.g. exact-rank and volume identities).
#[derive(Debug, Clone)]
pub struct FactorGaussian {
    pub w: Mat<f64>,
    pub left: Mat<f64>,
    pub sigma: Vec<f64>,
    pub right: Mat<f64>,
}

pub fn gen_factor_gaussian(
    m: usize,
    n: usize,
    r: usize,
    kind: FactorKind,
    eps: f64,
    rng: &mut Rng,
) -> Result<FactorGaussian> {
    if r == 0 || r > m.min(n) {
        return Err(Error::invalid(format!(
            "rank {r} outside 1..=min({m}, {n})"
        )));
    }
    if eps < 0.0 {
        return Err(Error::invalid("perturbation must be nonnegative"));
    }
    let (left, sigma, right) = match kind {
        FactorKind::Scaled { sigma } => {
            if sigma <= 0.0 {
                return Err(Error::invalid("scale must be positive"));
            }
            (
                gen_gaussian(m, r, rng),
                vec![sigma; r],
                gen_gaussian(r, n, rng),
            )
        }
        FactorKind::DiagonallyScaled { sigma1, rho } => {
            if sigma1 <= 0.0 || rho <= 0.0 || rho > 1.0 {
                return Err(Error::invalid("need sigma1 > 0 and rho in (0, 1]"));
            }
            let floor = sigma1 / MAX_SPECTRUM_RATIO;
            let sigma: Vec<f64> = (0..r)
                .map(|i| (sigma1 * rho.powi(i as i32)).max(floor))
                .collect();
            (gen_gaussian(m, r, rng), sigma, gen_gaussian(r, n, rng))
        }
        FactorKind::Left => {
            let g = gen_gaussian(m, r, rng);
            (g, vec![1.0; r], well_conditioned(r, n, rng))
        }
        FactorKind::Right => {
            let g = well_conditioned(m, r, rng);
            let h = gen_gaussian(r, n, rng);
            (g, vec![1.0; r], h)
        }
    };
    let mut scaled_left = left.clone();
    for i in 0..m {
        for j in 0..r {
            scaled_left[(i, j)] *= sigma[j];
        }
    }
    let mut w = scaled_left.matmul(&right);
    if eps > 0.0 {
        let noise = gen_gaussian(m, n, rng);
        w = w.add(&noise.scale(eps));
    }
    Ok(FactorGaussian {
        w,
        left,
        sigma,
        right,
    })
}

/// Orthonormal-row (or -column) factor: full rank and condition number 1.
fn well_conditioned(rows: usize, cols: usize, rng: &mut Rng) -> Mat<f64> {
    if rows <= cols {
        let g = gen_gaussian(cols, rows, rng);
        let (q, _) = qr::qr(&g);
        q.transpose()
    } else {
        let g = gen_gaussian(rows, cols, rng);
        let (q, _) = qr::qr(&g);
        q
    }
}

/// Rank-1 matrix that is zero except for a single +-1 entry; the hard family
/// for every sublinear-cost algorithm.
pub fn gen_plus_minus_delta(
    m: usize,
    n: usize,
    i: usize,
    j: usize,
    negative: bool,
) -> Result<Mat<f64>> {
    if i >= m || j >= n {
        return Err(Error::invalid(format!(
            "entry ({i}, {j}) outside {m} x {n}"
        )));
    }
    let mut w = Mat::zeros(m, n);
    w[(i, j)] = if negative { -1.0 } else { 1.0 };
    Ok(w)
}

// ---------------------------------------------------------------------------
// Discretized single-layer Laplacian on two concentric circles.
// ---------------------------------------------------------------------------

/// Entry (i, j) integrates log |2 w^i - y| over the j-th arc of the unit
/// circle, where w = exp(2 pi sqrt(-1) / n); the result is circulant and is
/// scaled so its spectral norm equals 1.
pub fn gen_laplacian(n: usize) -> Result<Mat<f64>> {
    if n < 4 {
        return Err(Error::invalid("laplacian needs n >= 4"));
    }
    let two_pi = std::f64::consts::TAU;
    // One row suffices: the kernel depends on (j - i) mod n.
    let mut arc = vec![0.0f64; n];
    for (d, slot) in arc.iter_mut().enumerate() {
        let a = two_pi * d as f64 / n as f64;
        let b = two_pi * (d + 1) as f64 / n as f64;
        // |2 - e^{i phi}|^2 = 5 - 4 cos phi; arc length element is d phi.
        let f = |phi: f64| 0.5 * (5.0 - 4.0 * phi.cos()).ln();
        *slot = adaptive_gauss_legendre(f, a, b, 1e-12, 30)?;
    }
    // Spectral norm of the circulant = max_k |DFT(arc)_k|.
    let mut max_mod = 0.0f64;
    for k in 0..n {
        let (mut re, mut im) = (0.0f64, 0.0f64);
        for (d, &c) in arc.iter().enumerate() {
            let ang = two_pi * ((d * k) % n) as f64 / n as f64;
            re += c * ang.cos();
            im += c * ang.sin();
        }
        max_mod = max_mod.max(re.hypot(im));
    }
    if max_mod == 0.0 {
        return Err(Error::NumericalFailure("laplacian kernel vanished".into()));
    }
    let psi = 1.0 / max_mod;
    Ok(Mat::from_fn(n, n, |i, j| psi * arc[(n + j - i) % n]))
}

// 15-point Gauss-Legendre nodes (nonnegative half) and weights on [-1, 1].
const GL_NODES: [f64; 8] = [
    0.0,
    0.2011940939974345,
    0.3941513470775634,
    0.5709721726085388,
    0.7244177313601701,
    0.8482065834104272,
    0.937_273_392_400_706,
    0.9879925180204854,
];
const GL_WEIGHTS: [f64; 8] = [
    0.2025782419255613,
    0.1984314853271116,
    0.1861610000155622,
    0.1662692058169939,
    0.1395706779261543,
    0.1071592204671719,
    0.0703660474881081,
    0.0307532419961173,
];

fn gl15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = GL_WEIGHTS[0] * f(mid);
    for i in 1..8 {
        let dx = half * GL_NODES[i];
        sum += GL_WEIGHTS[i] * (f(mid + dx) + f(mid - dx));
    }
    sum * half
}

/// Recursive bisection until two 15-point panels agree to `tol` absolutely.
pub fn adaptive_gauss_legendre(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: usize,
) -> Result<f64> {
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64> {
        let mid = 0.5 * (a + b);
        let left = gl15(f, a, mid);
        let right = gl15(f, mid, b);
        let split = left + right;
        if (split - whole).abs() <= tol {
            return Ok(split);
        }
        if depth == 0 {
            return Err(Error::NumericalFailure(
                "adaptive quadrature failed to converge".into(),
            ));
        }
        let half_tol = 0.5 * tol;
        Ok(recurse(f, a, mid, left, half_tol, depth - 1)?
            + recurse(f, mid, b, right, half_tol, depth - 1)?)
    }
    let whole = gl15(&f, a, b);
    recurse(&f, a, b, whole, tol, max_depth)
}
