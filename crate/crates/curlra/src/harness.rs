//! Experiment harness: configured trial loops over generator/pipeline pairs
//! with per-trial RNG streams, statistical summaries, CSV/table reports, the
//! bidiagonal-convergence (KS) suite, and the random-norm-corridor suite.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gen::{self, FactorKind, GeneratorSpec};
use crate::mat::Mat;
use crate::pipelines::{run_pipeline, CountedMat, PipelineOpts, PipelineSpec, Sampler, SubAlg};
use crate::preprocess::{self, MultiplierSpec};
use crate::rng;
use crate::scalar::Scalar;
use crate::stats;
use crate::svd::SvdScalar;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub generator: GeneratorSpec,
    pub pipeline: PipelineSpec,
    /// Optional multiplicative pre-processing of each input before the
    /// pipeline runs; the report then carries a second, back-mapped row.
    pub multiplier: Option<MultiplierSpec>,
    pub trials: usize,
    pub seed: u64,
}

/// Desk-scale Table-1-style presets: the four standard algorithms on a
/// perturbed factor-Gaussian input.
pub fn table1_experiments(n: usize, r: usize, trials: usize, seed: u64) -> Vec<ExperimentConfig> {
    let generator = GeneratorSpec::FactorGaussian {
        m: n,
        n,
        r,
        kind: FactorKind::Scaled { sigma: 1.0 },
        eps: 1e-10,
    };
    let mk = |name: &str, pipeline| ExperimentConfig {
        name: name.to_string(),
        generator: generator.clone(),
        pipeline,
        multiplier: None,
        trials,
        seed,
    };
    vec![
        mk("tests1", PipelineSpec::Primitive { r, k: r, l: r }),
        mk(
            "tests2",
            PipelineSpec::CrossApprox {
                r,
                k: r,
                l: r,
                loops: 5,
                subalg: SubAlg::Lup,
            },
        ),
        mk(
            "tests3",
            PipelineSpec::Cynical {
                r,
                q: 4 * r,
                s: 4 * r,
                k: r,
                l: r,
                subalg: SubAlg::Lup,
            },
        ),
        mk(
            "tests4",
            PipelineSpec::CaCynical {
                r,
                q: 4 * r,
                s: 4 * r,
                k: r,
                l: r,
                loops: 1,
                subalg: SubAlg::Lup,
            },
        ),
    ]
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub name: String,
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub k: usize,
    pub l: usize,
    pub trials: usize,
    /// Per-successful-trial relative spectral errors, trial order.
    pub errors: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub failures: usize,
    /// Sublinear-path entries touched, per successful trial.
    pub entries: Vec<u64>,
    pub seconds: f64,
}

impl ExperimentReport {
    pub fn max_entries(&self) -> u64 {
        self.entries.iter().copied().max().unwrap_or(0)
    }

    fn from_errors(
        name: String,
        dims: (usize, usize, usize, usize, usize),
        trials: usize,
        errors: Vec<f64>,
        entries: Vec<u64>,
        failures: usize,
        seconds: f64,
    ) -> Self {
        let (mean, var) = if errors.is_empty() {
            (0.0, 0.0)
        } else {
            stats::mean_variance(&errors)
        };
        ExperimentReport {
            name,
            m: dims.0,
            n: dims.1,
            r: dims.2,
            k: dims.3,
            l: dims.4,
            trials,
            errors,
            mean,
            std: var.sqrt(),
            failures,
            entries,
            seconds,
        }
    }
}

fn pipeline_dims(p: &PipelineSpec) -> (usize, usize, usize) {
    match *p {
        PipelineSpec::Primitive { r, k, l }
        | PipelineSpec::Cynical { r, k, l, .. }
        | PipelineSpec::CrossApprox { r, k, l, .. }
        | PipelineSpec::CaCynical { r, k, l, .. }
        | PipelineSpec::Leverage { r, k, l, .. }
        | PipelineSpec::SvdToCur { r, k, l, .. } => (r, k, l),
    }
}

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

struct TrialOutcome {
    /// (error vs pipeline input, optional error vs original after back-map)
    result: Option<(f64, Option<f64>, u64)>,
    failed: bool,
}

/// Run the configured trials on independent RNG streams (generation on
/// stream 2t, pipeline on stream 2t + 1) and summarize. Failed trials
/// (unlucky sampling, singular generators, rank collapse) are counted
/// separately, never folded into the error statistics. With a multiplier
/// configured, a second report row `<name>_backmapped` carries the error
/// against the original matrix after the pseudo-inverse back-map.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    if config.trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let started = Instant::now();
    // Deterministic generators are built once and shared across trials.
    let shared_input = match &config.generator {
        GeneratorSpec::Laplacian { .. }
        | GeneratorSpec::FromFile { .. }
        | GeneratorSpec::PlusMinusDelta { .. } => Some(gen::generate(
            &config.generator,
            &mut rng::stream(config.seed, u64::MAX),
        )?),
        _ => None,
    };

    let outcomes: Vec<TrialOutcome> = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(config, t as u64, shared_input.as_ref()))
        .collect::<Result<Vec<_>>>()?;

    let mut errors = Vec::new();
    let mut back_errors = Vec::new();
    let mut entries = Vec::new();
    let mut failures = 0usize;
    for o in &outcomes {
        match &o.result {
            Some((err, back, touched)) => {
                errors.push(*err);
                entries.push(*touched);
                if let Some(b) = back {
                    back_errors.push(*b);
                }
            }
            None => {
                debug_assert!(o.failed);
                failures += 1;
            }
        }
    }
    let seconds = started.elapsed().as_secs_f64();
    let (m, n) = generator_dims(&config.generator, shared_input.as_ref());
    let (r, k, l) = pipeline_dims(&config.pipeline);
    let mut reports = vec![ExperimentReport::from_errors(
        config.name.clone(),
        (m, n, r, k, l),
        config.trials,
        errors,
        entries.clone(),
        failures,
        seconds,
    )];
    if config.multiplier.is_some() {
        reports.push(ExperimentReport::from_errors(
            format!("{}_backmapped", config.name),
            (m, n, r, k, l),
            config.trials,
            back_errors,
            entries,
            failures,
            seconds,
        ));
    }
    Ok(reports)
}

fn generator_dims(spec: &GeneratorSpec, shared: Option<&Mat<f64>>) -> (usize, usize) {
    match *spec {
        GeneratorSpec::Gaussian { m, n }
        | GeneratorSpec::NzGaussian { m, n, .. }
        | GeneratorSpec::FactorGaussian { m, n, .. }
        | GeneratorSpec::PlusMinusDelta { m, n, .. } => (m, n),
        GeneratorSpec::Laplacian { n } => (n, n),
        GeneratorSpec::FromFile { .. } => shared.map(|w| w.shape()).unwrap_or((0, 0)),
    }
}

fn run_trial(
    config: &ExperimentConfig,
    t: u64,
    shared_input: Option<&Mat<f64>>,
) -> Result<TrialOutcome> {
    let w_owned;
    let w: &Mat<f64> = match shared_input {
        Some(w) => w,
        None => {
            w_owned = gen::generate(&config.generator, &mut rng::stream(config.seed, 2 * t))?;
            &w_owned
        }
    };
    let mut pipe_rng = rng::stream(config.seed, 2 * t + 1);
    let opts = PipelineOpts::default();

    match &config.multiplier {
        None => match run_pipeline(&CountedMat::new(w), &config.pipeline, &mut pipe_rng, &opts) {
            Ok(out) => {
                let approx = out.cur.reconstruct(w);
                let err = relative_spectral_error(w, &approx, t);
                Ok(TrialOutcome {
                    result: Some((err, None, out.entries_touched)),
                    failed: false,
                })
            }
            Err(
                Error::UnluckySampling { .. }
                | Error::SingularGenerator { .. }
                | Error::RankMismatch { .. },
            ) => Ok(TrialOutcome {
                result: None,
                failed: true,
            }),
            Err(e) => Err(e),
        },
        Some(spec) if spec.is_complex() => {
            let op = preprocess::build_complex_multiplier(spec, &mut pipe_rng)?;
            let wc = w.to_complex();
            let sketch = op.sketch(&wc);
            run_preprocessed_trial(w, &wc, &sketch, &op, config, &mut pipe_rng, &opts, t)
        }
        Some(spec) => {
            let op = preprocess::build_real_multiplier(spec, &mut pipe_rng)?;
            let sketch = op.sketch(w);
            run_preprocessed_trial(w, w, &sketch, &op, config, &mut pipe_rng, &opts, t)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_preprocessed_trial<T: SvdScalar>(
    w_orig: &Mat<f64>,
    w_typed: &Mat<T>,
    sketch: &Mat<T>,
    op: &preprocess::StructuredOp<T>,
    config: &ExperimentConfig,
    pipe_rng: &mut rng::Rng,
    opts: &PipelineOpts,
    t: u64,
) -> Result<TrialOutcome> {
    let counted = CountedMat::new(sketch);
    match run_pipeline(&counted, &config.pipeline, pipe_rng, opts) {
        Ok(out) => {
            // Error against the pre-processed matrix.
            let approx_sketch = out.cur.reconstruct(sketch);
            let err_sketch = relative_spectral_error(sketch, &approx_sketch, t);
            // Back-mapped error against the original: R = R_H H^+.
            let c = sketch.select_cols(out.cur.cols().indices());
            let r_h = sketch.select_rows(out.cur.rows().indices());
            let back = match op.right_pinv_apply(&r_h) {
                Ok(r_factor) => {
                    let approx = c.matmul(out.cur.nucleus()).matmul(&r_factor);
                    let diff = w_typed.sub(&approx);
                    let denom = crate::svd::spectral_norm_est(w_typed, 1e-8, 400, t ^ 0xb0);
                    let num = crate::svd::spectral_norm_est(&diff, 1e-8, 400, t ^ 0xb1);
                    Some(if denom > 0.0 { num / denom } else { num })
                }
                Err(_) => None,
            };
            let _ = w_orig;
            Ok(TrialOutcome {
                result: Some((err_sketch, back, out.entries_touched)),
                failed: false,
            })
        }
        Err(
            Error::UnluckySampling { .. }
            | Error::SingularGenerator { .. }
            | Error::RankMismatch { .. },
        ) => Ok(TrialOutcome {
            result: None,
            failed: true,
        }),
        Err(e) => Err(e),
    }
}

fn relative_spectral_error<T: Scalar>(w: &Mat<T>, approx: &Mat<T>, t: u64) -> f64 {
    let diff = w.sub(approx);
    let denom = crate::svd::spectral_norm_est(w, 1e-8, 400, t ^ 0xa0);
    let num = crate::svd::spectral_norm_est(&diff, 1e-8, 400, t ^ 0xa1);
    if denom > 0.0 {
        num / denom
    } else {
        num
    }
}

// ---------------------------------------------------------------------------
// KS suite (quasi-Gaussian convergence)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct KsRow {
    pub t: usize,
    pub mean_statistic: f64,
    pub pass_rate: f64,
}

#[derive(Debug, Clone)]
pub struct KsReport {
    pub n: usize,
    pub trials: usize,
    pub alpha: f64,
    pub rows: Vec<KsRow>,
}

/// Sample size cap for the KS statistic; larger matrices are subsampled.
pub const KS_SAMPLE_CAP: usize = 100_000;

/// For each factor count T, densify the quasi-Gaussian product, standardize
/// it column-wise, and run the one-sample KS test of the pooled entries
/// against N(0, 1) at level `alpha`.
pub fn run_ks_suite(
    n: usize,
    t_list: &[usize],
    trials: usize,
    alpha: f64,
    seed: u64,
) -> Result<KsReport> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    let mut rows = Vec::new();
    for (ti, &t_factors) in t_list.iter().enumerate() {
        let outcomes: Vec<(f64, bool)> = (0..trials)
            .into_par_iter()
            .map(|trial| -> Result<(f64, bool)> {
                let mut op_rng = rng::stream(seed, (ti * trials + trial) as u64);
                let op = preprocess::build_quasi_gaussian(n, t_factors, &mut op_rng)?;
                let dense = op.densify();
                let mut sample = standardized_entries(&dense);
                if sample.len() > KS_SAMPLE_CAP {
                    subsample_in_place(&mut sample, KS_SAMPLE_CAP, &mut op_rng);
                }
                let d = stats::ks_statistic(&mut sample, stats::normal_cdf);
                let p = stats::ks_p_value(d, sample.len());
                Ok((d, p >= alpha))
            })
            .collect::<Result<Vec<_>>>()?;
        let mean_statistic = outcomes.iter().map(|(d, _)| d).sum::<f64>() / trials as f64;
        let passes = outcomes.iter().filter(|(_, ok)| *ok).count();
        rows.push(KsRow {
            t: t_factors,
            mean_statistic,
            pass_rate: passes as f64 / trials as f64,
        });
    }
    Ok(KsReport {
        n,
        trials,
        alpha,
        rows,
    })
}

/// Column-wise standardization (empirical mean and standard deviation per
/// column), pooled into one sample.
fn standardized_entries(dense: &Mat<f64>) -> Vec<f64> {
    let (m, n) = dense.shape();
    let mut out = Vec::with_capacity(m * n);
    for j in 0..n {
        let col = dense.col(j);
        let (mean, var) = stats::mean_variance(&col);
        let std = var.sqrt();
        if std == 0.0 {
            out.extend(col.iter().map(|_| 0.0));
        } else {
            out.extend(col.iter().map(|x| (x - mean) / std));
        }
    }
    out
}

fn subsample_in_place(sample: &mut Vec<f64>, cap: usize, rng: &mut rng::Rng) {
    let picked = rand::seq::index::sample(rng, sample.len(), cap);
    let mut out = Vec::with_capacity(cap);
    for i in picked {
        out.push(sample[i]);
    }
    *sample = out;
}

// ---------------------------------------------------------------------------
// Norm-corridor suite
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct NormReport {
    pub p: usize,
    pub q: usize,
    pub trials: usize,
    pub mean_norm: f64,
    pub norm_bound: f64,
    pub mean_pinv_norm: f64,
    pub pinv_norm_bound: f64,
    /// (x, empirical frequency of ||W^+|| >= 1/x, analytic bound) for the
    /// sparse-Gaussian tail check.
    pub nz_tail: Vec<(f64, f64, f64)>,
    pub nz_dims: (usize, usize, usize),
}

/// Empirical means of ||G|| and ||G^+|| for p x q Gaussian matrices against
/// their analytic bounds, plus tail frequencies of the pseudo-inverse norm
/// of sparse Gaussian matrices.
pub fn run_norm_suite(
    p: usize,
    q: usize,
    nz_dims: (usize, usize, usize),
    trials: usize,
    seed: u64,
) -> Result<NormReport> {
    if trials == 0 || p == q {
        return Err(Error::invalid("need trials >= 1 and p != q"));
    }
    let samples: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(f64, f64)> {
            let mut r = rng::stream(seed, t as u64);
            let g = gen::gen_gaussian(p, q, &mut r);
            let sv = crate::svd::singular_values(&g)?;
            let norm = sv[0];
            let min_sv = sv[p.min(q) - 1];
            Ok((
                norm,
                if min_sv > 0.0 {
                    1.0 / min_sv
                } else {
                    f64::INFINITY
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_norm = samples.iter().map(|s| s.0).sum::<f64>() / trials as f64;
    let mean_pinv = samples.iter().map(|s| s.1).sum::<f64>() / trials as f64;

    let (zp, zq, nz) = nz_dims;
    let xs = [0.1, 0.01];
    let mut tail_counts = [0usize; 2];
    for t in 0..trials {
        let mut r = rng::stream(seed ^ 0x5a5a, t as u64);
        let w = gen::gen_nz_gaussian(zp, zq, nz, &mut r)?;
        let sv = crate::svd::singular_values(&w)?;
        let min_sv = sv[zp.min(zq) - 1];
        let pinv_norm = if min_sv > 0.0 {
            1.0 / min_sv
        } else {
            f64::INFINITY
        };
        for (i, &x) in xs.iter().enumerate() {
            if pinv_norm >= 1.0 / x {
                tail_counts[i] += 1;
            }
        }
    }
    let nz_tail = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let freq = tail_counts[i] as f64 / trials as f64;
            let bound = (2.0 * zp.min(zq) as f64 / std::f64::consts::PI).sqrt() * x;
            (x, freq, bound)
        })
        .collect();
    Ok(NormReport {
        p,
        q,
        trials,
        mean_norm,
        norm_bound: (p as f64).sqrt() + (q as f64).sqrt(),
        mean_pinv_norm: mean_pinv,
        pinv_norm_bound: std::f64::consts::E * (p.max(q) as f64).sqrt() / (p.abs_diff(q)) as f64,
        nz_tail,
        nz_dims,
    })
}

// ---------------------------------------------------------------------------
// Report output
// ---------------------------------------------------------------------------

pub const CSV_HEADER: &str =
    "experiment,m,n,r,k,l,trials,mean,std,failures,entries_touched,seconds";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Table,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "table" => Ok(ReportFormat::Table),
            other => Err(Error::invalid(format!("unknown format '{other}'"))),
        }
    }
}

pub fn render_reports(reports: &[ExperimentReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for r in reports {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{:.17e},{:.17e},{},{},{:.3}",
                    r.name,
                    r.m,
                    r.n,
                    r.r,
                    r.k,
                    r.l,
                    r.trials,
                    r.mean,
                    r.std,
                    r.failures,
                    r.max_entries(),
                    r.seconds
                );
            }
            out
        }
        ReportFormat::Table => {
            let mut out = format!(
                "{:<14} {:>6} {:>6} {:>4} {:>4} {:>4} {:>7} {:>12} {:>12} {:>9} {:>15} {:>9}\n",
                "experiment",
                "m",
                "n",
                "r",
                "k",
                "l",
                "trials",
                "mean",
                "std",
                "failures",
                "entries",
                "seconds"
            );
            for r in reports {
                let _ = writeln!(
                    out,
                    "{:<14} {:>6} {:>6} {:>4} {:>4} {:>4} {:>7} {:>12.4e} {:>12.4e} {:>9} {:>15} {:>9.3}",
                    r.name,
                    r.m,
                    r.n,
                    r.r,
                    r.k,
                    r.l,
                    r.trials,
                    r.mean,
                    r.std,
                    r.failures,
                    r.max_entries(),
                    r.seconds
                );
            }
            out
        }
    }
}

pub fn report_write(
    reports: &[ExperimentReport],
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_reports(reports, format))
        .map_err(|e| Error::io(path.display().to_string(), e))
}

/// CSV text with the wall-time column blanked, the determinism reference.
pub fn strip_seconds_column(csv: &str) -> String {
    csv.lines()
        .map(|line| match line.rsplit_once(',') {
            Some((head, _)) if !line.starts_with("experiment") => format!("{head},_"),
            _ => line.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n")
}

// ---------------------------------------------------------------------------
// Flat key-value configuration files
// ---------------------------------------------------------------------------

/// Parse the flat `key = value` configuration format. Lines starting with
/// `#` (or blank) are skipped. Unknown keys are errors carrying the key
/// name; so are missing required fields.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut map = std::collections::BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(format!("line {}", idx + 1), "expected 'key = value'"))?;
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    config_from_map(map)
}

struct ConfigMap {
    map: std::collections::BTreeMap<String, String>,
    used: std::collections::BTreeSet<String>,
}

impl ConfigMap {
    fn get(&mut self, key: &str) -> Option<String> {
        let v = self.map.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    fn require(&mut self, key: &str) -> Result<String> {
        self.get(key)
            .ok_or_else(|| Error::parse(format!("config.{key}"), "missing required field"))
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|_| {
                Error::parse(format!("config.{key}"), format!("cannot parse value '{v}'"))
            }),
        }
    }

    fn parse_or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.parse(key)?.unwrap_or(default))
    }

    fn parse_required<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.require(key)?;
        v.parse::<T>()
            .map_err(|_| Error::parse(format!("config.{key}"), format!("cannot parse value '{v}'")))
    }
}

fn config_from_map(map: std::collections::BTreeMap<String, String>) -> Result<ExperimentConfig> {
    let mut cfg = ConfigMap {
        map,
        used: Default::default(),
    };

    let trials: usize = cfg.parse_or("trials", 100)?;
    let seed: u64 = cfg.parse_or("seed", 0)?;

    // Named presets only need n and r.
    if let Some(exp) = cfg.get("experiment") {
        let n: usize = cfg.parse_or("n", 256)?;
        let r: usize = cfg.parse_or("r", 8)?;
        let all = table1_experiments(n, r, trials, seed);
        let found = all.into_iter().find(|c| c.name == exp);
        let mut config = found.ok_or_else(|| {
            Error::parse("config.experiment", format!("unknown experiment '{exp}'"))
        })?;
        config.trials = trials;
        config.seed = seed;
        check_unused(&cfg)?;
        return Ok(config);
    }

    let name = cfg.get("name").unwrap_or_else(|| "experiment".to_string());
    let generator = {
        let kind = cfg.require("generator")?;
        match kind.as_str() {
            "gaussian" => GeneratorSpec::Gaussian {
                m: cfg.parse_required("m")?,
                n: cfg.parse_required("n")?,
            },
            "nz_gaussian" => GeneratorSpec::NzGaussian {
                m: cfg.parse_required("m")?,
                n: cfg.parse_required("n")?,
                nz: cfg.parse_required("nz")?,
            },
            "factor_gaussian" => {
                let factor_kind = match cfg.get("kind").as_deref().unwrap_or("scaled") {
                    "scaled" => FactorKind::Scaled {
                        sigma: cfg.parse_or("sigma", 1.0)?,
                    },
                    "diagonally_scaled" => FactorKind::DiagonallyScaled {
                        sigma1: cfg.parse_or("sigma1", 1.0)?,
                        rho: cfg.parse_or("rho", 0.5)?,
                    },
                    "left" => FactorKind::Left,
                    "right" => FactorKind::Right,
                    other => {
                        return Err(Error::parse(
                            "config.kind",
                            format!("unknown factor kind '{other}'"),
                        ))
                    }
                };
                GeneratorSpec::FactorGaussian {
                    m: cfg.parse_required("m")?,
                    n: cfg.parse_required("n")?,
                    r: cfg.parse_required("r")?,
                    kind: factor_kind,
                    eps: cfg.parse_or("eps", 0.0)?,
                }
            }
            "plus_minus_delta" => GeneratorSpec::PlusMinusDelta {
                m: cfg.parse_required("m")?,
                n: cfg.parse_required("n")?,
                i: cfg.parse_required("i")?,
                j: cfg.parse_required("j")?,
                negative: cfg.get("sign").as_deref() == Some("-"),
            },
            "laplacian" => GeneratorSpec::Laplacian {
                n: cfg.parse_required("n")?,
            },
            "from_file" => GeneratorSpec::FromFile {
                path: cfg.require("path")?.into(),
            },
            other => {
                return Err(Error::parse(
                    "config.generator",
                    format!("unknown generator '{other}'"),
                ))
            }
        }
    };

    let r: usize = cfg.parse_required("r")?;
    let k: usize = cfg.parse_or("k", r)?;
    let l: usize = cfg.parse_or("l", r)?;
    let subalg: SubAlg = cfg.parse_or("subalg", SubAlg::Lup)?;
    let pipeline = match cfg.require("pipeline")?.as_str() {
        "primitive" => PipelineSpec::Primitive { r, k, l },
        "cynical" => PipelineSpec::Cynical {
            r,
            q: cfg.parse_or("q", 4 * r)?,
            s: cfg.parse_or("s", 4 * r)?,
            k,
            l,
            subalg,
        },
        "cross_approx" => PipelineSpec::CrossApprox {
            r,
            k,
            l,
            loops: cfg.parse_or("loops", 5)?,
            subalg,
        },
        "ca_cynical" => PipelineSpec::CaCynical {
            r,
            q: cfg.parse_or("q", 4 * r)?,
            s: cfg.parse_or("s", 4 * r)?,
            k,
            l,
            loops: cfg.parse_or("loops", 1)?,
            subalg,
        },
        "leverage" => PipelineSpec::Leverage {
            r,
            k,
            l,
            sampler: cfg.parse_or("sampler", Sampler::ExactlyL)?,
            uniform_scores: cfg.get("scores").as_deref().unwrap_or("uniform") == "uniform",
            beta: cfg.parse_or("beta", 1.0)?,
        },
        "svd_to_cur" => PipelineSpec::SvdToCur {
            r,
            k,
            l,
            sampled: cfg.parse_or("sampled", false)?,
        },
        other => {
            return Err(Error::parse(
                "config.pipeline",
                format!("unknown pipeline '{other}'"),
            ))
        }
    };

    let multiplier = match cfg.get("multiplier").as_deref() {
        None => None,
        Some(kind) => {
            let n_dim: usize = cfg.parse_required("n")?;
            Some(match kind {
                "gaussian" => MultiplierSpec::Gaussian {
                    n: n_dim,
                    u: cfg.parse_or("u", n_dim)?,
                },
                "srht" => MultiplierSpec::Srht {
                    n: n_dim,
                    l: cfg.parse_required("mult_l")?,
                },
                "srft" => MultiplierSpec::Srft {
                    n: n_dim,
                    l: cfg.parse_required("mult_l")?,
                },
                "arht" => MultiplierSpec::Arht {
                    n: n_dim,
                    d: cfg.parse_required("d")?,
                    l: cfg.parse("mult_l")?,
                },
                "arft" => MultiplierSpec::Arft {
                    n: n_dim,
                    d: cfg.parse_required("d")?,
                    l: cfg.parse("mult_l")?,
                },
                "quasi_gaussian" => MultiplierSpec::QuasiGaussian {
                    n: n_dim,
                    t: cfg.parse_or("t", 20)?,
                },
                other => {
                    return Err(Error::parse(
                        "config.multiplier",
                        format!("unknown multiplier '{other}'"),
                    ))
                }
            })
        }
    };

    check_unused(&cfg)?;
    Ok(ExperimentConfig {
        name,
        generator,
        pipeline,
        multiplier,
        trials,
        seed,
    })
}

fn check_unused(cfg: &ConfigMap) -> Result<()> {
    for key in cfg.map.keys() {
        if !cfg.used.contains(key) {
            return Err(Error::parse(
                format!("config.{key}"),
                "unknown or unused field",
            ));
        }
    }
    Ok(())
}
