//! `curlra` — experiment harness and utility CLI for the CUR low-rank
//! approximation toolkit.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use curlra::gen::{self, FactorKind, GeneratorSpec};
use curlra::harness::{
    self, parse_config, render_reports, report_write, ExperimentConfig, ReportFormat,
};
use curlra::mat::{AnyMat, NormKind};
use curlra::pipelines::{CountedMat, PipelineOpts, PipelineSpec, Sampler, SubAlg};
use curlra::skeleton;
use curlra::{io, rng};

#[derive(Parser)]
#[command(
    name = "curlra",
    about = "Superfast CUR / pseudo-skeleton low-rank approximation toolkit",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a matrix and write it to a file.
    Gen(GenArgs),
    /// Run one CUR pipeline on a matrix and print its error report.
    Cur(CurArgs),
    /// Run an experiment (from a config file or a named suite) and emit a report.
    Bench(BenchArgs),
    /// Kolmogorov-Smirnov normality suite for quasi-Gaussian products.
    Ks(KsArgs),
    /// Empirical norm corridors for Gaussian and sparse Gaussian matrices.
    Norms(NormArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Gaussian,
    NzGaussian,
    FactorGaussian,
    PlusMinusDelta,
    Laplacian,
}

#[derive(Clone, Copy, ValueEnum)]
enum FileFormat {
    /// Matrix Market array format.
    Mm,
    /// Matrix Market coordinate format.
    MmCoord,
    /// Raw little-endian binary.
    Bin,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    #[arg(long, default_value_t = 256)]
    m: usize,
    #[arg(long, default_value_t = 256)]
    n: usize,
    /// Expected rank for factor-Gaussian inputs.
    #[arg(long, default_value_t = 8)]
    r: usize,
    /// Nonzero count for nz-gaussian.
    #[arg(long)]
    nz: Option<usize>,
    /// Perturbation level for factor-Gaussian inputs.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Entry row for plus-minus-delta.
    #[arg(long, default_value_t = 0)]
    i: usize,
    /// Entry column for plus-minus-delta.
    #[arg(long, default_value_t = 0)]
    j: usize,
    /// Use -1 instead of +1 for plus-minus-delta.
    #[arg(long)]
    negative: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FileFormat::Mm)]
    file_format: FileFormat,
}

#[derive(Clone, Copy, ValueEnum)]
enum PipelineKind {
    Primitive,
    Cynical,
    CrossApprox,
    CaCynical,
    Leverage,
    SvdToCur,
}

#[derive(Args)]
struct CurArgs {
    /// Input matrix file (Matrix Market or raw binary). When omitted, a
    /// perturbed factor-Gaussian input of the given dimensions is generated.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 256)]
    m: usize,
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, value_enum, default_value_t = PipelineKind::CrossApprox)]
    pipeline: PipelineKind,
    #[arg(long, default_value_t = 8)]
    r: usize,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long, default_value_t = 5)]
    loops: usize,
    #[arg(long, default_value = "lup")]
    subalg: String,
    #[arg(long, default_value = "exactly")]
    sampler: String,
    /// Use uniform leverage scores (sublinear) instead of SVD-based ones.
    #[arg(long, default_value_t = true)]
    uniform_scores: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sampled a posteriori error grid side (0 disables the estimate).
    #[arg(long, default_value_t = 20)]
    probe: usize,
    /// Write the factorization (index sets plus nucleus) to this path.
    #[arg(long)]
    save_cur: Option<PathBuf>,
    /// Also compute dense-audit error reports (reads the whole matrix).
    #[arg(long, default_value_t = true)]
    audit: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Flat key-value config file describing the experiment.
    #[arg(long, conflicts_with = "suite")]
    config: Option<PathBuf>,
    /// Named suite: table1 (runs tests1..tests4).
    #[arg(long)]
    suite: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    r: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "table")]
    format: String,
    /// Restore the long-running publication-scale defaults
    /// (1000 trials, n = 1024).
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Args)]
struct KsArgs {
    #[arg(long, default_value_t = 256)]
    n: usize,
    /// Comma-separated factor counts.
    #[arg(long, default_value = "2,5,10,20")]
    t_list: String,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Args)]
struct NormArgs {
    #[arg(long, default_value_t = 32)]
    p: usize,
    #[arg(long, default_value_t = 8)]
    q: usize,
    #[arg(long, default_value_t = 16)]
    nz_m: usize,
    #[arg(long, default_value_t = 8)]
    nz_n: usize,
    #[arg(long, default_value_t = 48)]
    nz: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Cur(args) => cmd_cur(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Ks(args) => cmd_ks(args),
        Command::Norms(args) => cmd_norms(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn cmd_gen(args: GenArgs) -> curlra::Result<()> {
    let spec = match args.kind {
        GenKind::Gaussian => GeneratorSpec::Gaussian {
            m: args.m,
            n: args.n,
        },
        GenKind::NzGaussian => GeneratorSpec::NzGaussian {
            m: args.m,
            n: args.n,
            nz: args.nz.unwrap_or(args.m.max(args.n) * 2),
        },
        GenKind::FactorGaussian => GeneratorSpec::FactorGaussian {
            m: args.m,
            n: args.n,
            r: args.r,
            kind: FactorKind::Scaled { sigma: 1.0 },
            eps: args.eps,
        },
        GenKind::PlusMinusDelta => GeneratorSpec::PlusMinusDelta {
            m: args.m,
            n: args.n,
            i: args.i,
            j: args.j,
            negative: args.negative,
        },
        GenKind::Laplacian => GeneratorSpec::Laplacian { n: args.n },
    };
    let w = gen::generate(&spec, &mut rng::stream(args.seed, 0))?;
    let any = AnyMat::Real(w);
    match args.file_format {
        FileFormat::Mm => io::write_matrix_market_array(&args.out, &any)?,
        FileFormat::MmCoord => io::write_matrix_market_coordinate(&args.out, &any)?,
        FileFormat::Bin => io::write_binary(&args.out, &any)?,
    }
    let (m, n) = any.shape();
    println!("wrote {} x {} matrix to {}", m, n, args.out.display());
    Ok(())
}

fn cmd_cur(args: CurArgs) -> curlra::Result<()> {
    let w = match &args.input {
        Some(path) => io::read_matrix(path)?.expect_real()?,
        None => gen::generate(
            &GeneratorSpec::FactorGaussian {
                m: args.m,
                n: args.n,
                r: args.r,
                kind: FactorKind::Scaled { sigma: 1.0 },
                eps: 1e-10,
            },
            &mut rng::stream(args.seed, 0),
        )?,
    };
    let r = args.r;
    let k = args.k.unwrap_or(r);
    let l = args.l.unwrap_or(r);
    let subalg: SubAlg = args.subalg.parse()?;
    let sampler: Sampler = args.sampler.parse()?;
    let spec = match args.pipeline {
        PipelineKind::Primitive => PipelineSpec::Primitive { r, k, l },
        PipelineKind::Cynical => PipelineSpec::Cynical {
            r,
            q: args.q.unwrap_or(4 * r),
            s: args.s.unwrap_or(4 * r),
            k,
            l,
            subalg,
        },
        PipelineKind::CrossApprox => PipelineSpec::CrossApprox {
            r,
            k,
            l,
            loops: args.loops,
            subalg,
        },
        PipelineKind::CaCynical => PipelineSpec::CaCynical {
            r,
            q: args.q.unwrap_or(4 * r),
            s: args.s.unwrap_or(4 * r),
            k,
            l,
            loops: args.loops.clamp(1, 3),
            subalg,
        },
        PipelineKind::Leverage => PipelineSpec::Leverage {
            r,
            k,
            l,
            sampler,
            uniform_scores: args.uniform_scores,
            beta: 1.0,
        },
        PipelineKind::SvdToCur => PipelineSpec::SvdToCur {
            r,
            k,
            l,
            sampled: false,
        },
    };
    let src = CountedMat::new(&w);
    let mut pipe_rng = rng::stream(args.seed, 1);
    let out =
        curlra::pipelines::run_pipeline(&src, &spec, &mut pipe_rng, &PipelineOpts::default())?;

    let (m, n) = w.shape();
    println!("pipeline: {:?}", spec);
    println!("input: {m} x {n}, target rank {r}");
    println!(
        "selected {} rows {:?}",
        out.cur.k(),
        out.cur.rows().indices()
    );
    println!(
        "selected {} cols {:?}",
        out.cur.l(),
        out.cur.cols().indices()
    );
    println!(
        "entries touched: {} (sublinear path) + {} (dense stages) of {}",
        out.entries_touched,
        out.dense_entries,
        (m as u64) * (n as u64)
    );
    if out.retries > 0 || out.reseeds > 0 {
        println!("retries: {}, reseeds: {}", out.retries, out.reseeds);
    }

    if args.probe > 0 {
        let q = args.probe.min(m);
        let s_dim = args.probe.min(n).max(100_usize.div_ceil(q));
        let probe = skeleton::posterior_error_sampled(
            &w,
            &out.cur,
            q,
            s_dim.min(n),
            &mut rng::stream(args.seed, 2),
        )?;
        println!(
            "sampled probe ({} x {}): mean |e| = {:.3e}, variance = {:.3e}, ||E||_F estimate = {:.3e}",
            probe.sample_rows,
            probe.sample_cols,
            probe.mean,
            probe.variance,
            probe.frobenius_estimate
        );
    }
    if args.audit {
        for kind in [NormKind::Spectral, NormKind::Frobenius, NormKind::Chebyshev] {
            let rep = skeleton::error_report(&w, &out.cur, kind, None)?;
            println!(
                "dense audit {:>9}: absolute = {:.6e}, relative = {:.6e}",
                kind.to_string(),
                rep.absolute,
                rep.relative
            );
        }
    }
    if let Some(path) = &args.save_cur {
        skeleton::write_curlra(path, &out.cur)?;
        println!("factorization written to {}", path.display());
    }
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> curlra::Result<()> {
    let format: ReportFormat = args.format.parse()?;
    let mut configs: Vec<ExperimentConfig> = if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| curlra::Error::io(path.display().to_string(), e))?;
        vec![parse_config(&text)?]
    } else {
        let suite = args.suite.as_deref().unwrap_or("table1");
        match suite {
            "table1" => {
                let n = args.n.unwrap_or(if args.paper_scale { 1024 } else { 256 });
                let r = args.r.unwrap_or(8);
                let trials = args
                    .trials
                    .unwrap_or(if args.paper_scale { 1000 } else { 100 });
                harness::table1_experiments(n, r, trials, args.seed.unwrap_or(0))
            }
            other => {
                return Err(curlra::Error::invalid(format!(
                    "unknown suite '{other}' (available: table1)"
                )))
            }
        }
    };
    for cfg in configs.iter_mut() {
        if let Some(t) = args.trials {
            cfg.trials = t;
        }
        if args.paper_scale {
            cfg.trials = cfg.trials.max(1000);
        }
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
    }
    let mut reports = Vec::new();
    for cfg in &configs {
        eprintln!("running {} ({} trials)...", cfg.name, cfg.trials);
        reports.extend(harness::run_experiment(cfg)?);
    }
    let rendered = render_reports(&reports, format);
    print!("{rendered}");
    if let Some(path) = &args.out {
        report_write(&reports, path, format)?;
        eprintln!("report written to {}", path.display());
    }
    Ok(())
}

fn cmd_ks(args: KsArgs) -> curlra::Result<()> {
    let t_list: Vec<usize> = args
        .t_list
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| curlra::Error::invalid(format!("bad factor count '{s}'")))
        })
        .collect::<curlra::Result<_>>()?;
    let trials = args
        .trials
        .unwrap_or(if args.paper_scale { 1000 } else { 100 });
    let report = harness::run_ks_suite(args.n, &t_list, trials, args.alpha, args.seed)?;
    let mut text = format!(
        "n = {}, trials = {}, alpha = {}\nT,mean_ks_statistic,pass_rate\n",
        report.n, report.trials, report.alpha
    );
    for row in &report.rows {
        text.push_str(&format!(
            "{},{:.6e},{:.4}\n",
            row.t, row.mean_statistic, row.pass_rate
        ));
    }
    print!("{text}");
    if let Some(path) = &args.out {
        std::fs::write(path, &text)
            .map_err(|e| curlra::Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}

fn cmd_norms(args: NormArgs) -> curlra::Result<()> {
    let report = harness::run_norm_suite(
        args.p,
        args.q,
        (args.nz_m, args.nz_n, args.nz),
        args.trials,
        args.seed,
    )?;
    let mut text = format!(
        "gaussian {} x {}, {} trials\nmean ||G||   = {:.6} (bound sqrt(p) + sqrt(q) = {:.6})\nmean ||G^+|| = {:.6} (bound e sqrt(max) / |p - q| = {:.6})\n",
        report.p, report.q, report.trials, report.mean_norm, report.norm_bound,
        report.mean_pinv_norm, report.pinv_norm_bound
    );
    let (zm, zn, nz) = report.nz_dims;
    text.push_str(&format!("sparse gaussian {zm} x {zn} with nz = {nz}:\n"));
    for (x, freq, bound) in &report.nz_tail {
        text.push_str(&format!(
            "  P(||W^+|| >= {:.0}) = {:.4} (bound sqrt(2q/pi) x = {:.4})\n",
            1.0 / x,
            freq,
            bound
        ));
    }
    print!("{text}");
    if let Some(path) = &args.out {
        std::fs::write(path, &text)
            .map_err(|e| curlra::Error::io(path.display().to_string(), e))?;
    }
    Ok(())
}
