use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use corrqcd::simgen::{
    random_diagonal, run_campaign, sample_wishart_block_cov, stream_rng, ChangeModel, ChangePoint, CovarianceSpec,
    MeanPolicy, Scenario, CSV_HEADER,
};
use corrqcd::stream::{
    open_stream, read_values, write_binary_block, write_binary_header, write_text_block, write_text_header,
    StreamFormat,
};
use corrqcd::{
    calibrate_threshold, log_pdf_v, mle_j, sample_v, summary_statistic, GlrConfig, GlrDetector, ModelParams,
    ShapeParam, Sidedness, Window,
};

const EXIT_INPUT: u8 = 2;
const EXIT_NO_STOP: u8 = 3;

#[derive(Parser)]
#[command(
    name = "corrqcd",
    version,
    about = "Quickest detection of dispersion changes in matrix streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the limiting density of V on a uniform grid as CSV.
    Density(DensityArgs),
    /// Run the GLR detector over a matrix stream.
    Detect(DetectArgs),
    /// Run a Monte Carlo campaign described by a scenario file.
    Simulate(SimulateArgs),
    /// Estimate J from a matrix stream or a list of summary values.
    EstimateJ(EstimateArgs),
    /// Write a Gaussian matrix stream, optionally with a covariance change.
    Generate(GenerateArgs),
    /// Draw summary values directly from the limiting density.
    SampleV(SampleArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Binary,
}

impl From<FormatArg> for StreamFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => StreamFormat::Text,
            FormatArg::Binary => StreamFormat::Binary,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SidednessArg {
    Increase,
    TwoSided,
}

#[derive(Args)]
struct DensityArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 1)]
    delta: usize,
    /// Comma-separated J values, one column each.
    #[arg(long, value_delimiter = ',', required = true)]
    j: Vec<f64>,
    /// Grid points ρ = i/grid for i = 1..=grid.
    #[arg(long, default_value_t = 10_000)]
    grid: usize,
}

#[derive(Args)]
struct InputArgs {
    /// Stream file; standard input when absent or `-`.
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// Expected block rows; mismatch with the stream header is an error.
    #[arg(long)]
    n: Option<usize>,
    /// Expected block columns; mismatch with the stream header is an error.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, default_value_t = 1)]
    delta: usize,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Target mean time to false alarm; sets the threshold to log β.
    #[arg(long, conflicts_with = "threshold", required_unless_present = "threshold")]
    beta: Option<f64>,
    /// Log-likelihood threshold A.
    #[arg(long, allow_negative_numbers = true)]
    threshold: Option<f64>,
    /// Minimum detectable shift ε of J away from 1.
    #[arg(long, default_value_t = corrqcd::qcd::DEFAULT_EPSILON)]
    epsilon: f64,
    /// `auto`, `unbounded`, or a positive window length.
    #[arg(long, default_value = "auto")]
    window: String,
    #[arg(long, value_enum, default_value = "increase")]
    sidedness: SidednessArg,
}

#[derive(Args)]
struct SimulateArgs {
    scenario: PathBuf,
    /// Draw V from the limiting density instead of generating matrices.
    #[arg(long)]
    fast_path: bool,
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Read one summary value per line instead of matrices (needs --n and --p).
    #[arg(long)]
    values: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PostArg {
    Identity,
    Wishart,
    Equicorrelated,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    blocks: u64,
    #[arg(long)]
    seed: u64,
    /// First post-change block (1-based); no change when absent.
    #[arg(long)]
    change_at: Option<u64>,
    #[arg(long, value_enum, default_value = "identity")]
    post: PostArg,
    /// Size of the correlated leading block.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Wishart degrees of freedom (default k + 2).
    #[arg(long)]
    dof: Option<usize>,
    /// Off-diagonal correlation of the equicorrelated block.
    #[arg(long, default_value_t = 0.9)]
    block_corr: f64,
    /// Pre-change marginal variances drawn uniformly from this range.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [1.0, 1.0])]
    sigma_range: Vec<f64>,
    #[arg(long, value_enum, default_value = "text")]
    format: FormatArg,
    /// Output file; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 1)]
    delta: usize,
    #[arg(long)]
    j: f64,
    #[arg(long)]
    count: u64,
    #[arg(long)]
    seed: u64,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self {
            code: 1,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Density(a) => cmd_density(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::EstimateJ(a) => cmd_estimate_j(a),
        Command::Generate(a) => cmd_generate(a),
        Command::SampleV(a) => cmd_sample_v(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            // A closed downstream pipe is not an error worth reporting.
            if f.code == 1 && f.message.contains("Broken pipe") {
                return ExitCode::SUCCESS;
            }
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn open_input(path: &Option<PathBuf>) -> Result<Box<dyn BufRead>, Failure> {
    match path {
        None => Ok(Box::new(BufReader::new(io::stdin()))),
        Some(p) if p.as_os_str() == "-" => Ok(Box::new(BufReader::new(io::stdin()))),
        Some(p) => {
            let f = File::open(p).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufReader::new(f)))
        }
    }
}

fn stdout() -> BufWriter<io::StdoutLock<'static>> {
    BufWriter::new(io::stdout().lock())
}

fn cmd_density(a: DensityArgs) -> CmdResult {
    if a.grid == 0 {
        return Err(Failure::input("--grid must be positive"));
    }
    let params = ModelParams::new(a.n, a.p, a.delta).map_err(Failure::input)?;
    let js =
        a.j.iter()
            .map(|&j| ShapeParam::new(j))
            .collect::<Result<Vec<_>, _>>()
            .map_err(Failure::input)?;
    let mut out = stdout();
    let cols: Vec<String> = a.j.iter().map(|j| format!("J={j}")).collect();
    writeln!(out, "rho,{}", cols.join(","))?;
    for i in 1..=a.grid {
        let rho = i as f64 / a.grid as f64;
        write!(out, "{rho}")?;
        for &j in &js {
            let f = log_pdf_v(rho, &params, j).map_err(Failure::input)?.exp();
            write!(out, ",{f:e}")?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(0)
}

fn parse_window(raw: &str) -> Result<Option<Window>, Failure> {
    match raw {
        "auto" => Ok(None),
        "unbounded" => Ok(Some(Window::Unbounded)),
        s => match s.parse::<usize>() {
            Ok(w) if w > 0 => Ok(Some(Window::Bounded(w))),
            _ => Err(Failure::input(format!(
                "--window must be auto, unbounded, or a positive integer, got `{s}`"
            ))),
        },
    }
}

fn cmd_detect(a: DetectArgs) -> CmdResult {
    let threshold = match (a.beta, a.threshold) {
        (Some(beta), None) => calibrate_threshold(beta).map_err(Failure::input)?,
        (None, Some(t)) => t,
        _ => return Err(Failure::input("exactly one of --beta and --threshold is required")),
    };
    let mut config = GlrConfig::new(a.epsilon, threshold).map_err(Failure::input)?;
    if let Some(w) = parse_window(&a.window)? {
        config = config.with_window(w).map_err(Failure::input)?;
    }
    config = config.with_sidedness(match a.sidedness {
        SidednessArg::Increase => Sidedness::IncreaseOnly,
        SidednessArg::TwoSided => Sidedness::TwoSided,
    });

    let reader = open_input(&a.input.input)?;
    let (header, blocks) = open_stream(reader, a.input.format.into()).map_err(Failure::input)?;
    header.check(a.input.n, a.input.p).map_err(Failure::input)?;
    let params = ModelParams::new(header.n, header.p, a.input.delta).map_err(Failure::input)?;
    let mut detector = GlrDetector::new(config, params);

    let mut out = stdout();
    writeln!(out, "m V W stat")?;
    let mut seen = 0u64;
    for block in blocks {
        let block = block.map_err(Failure::input)?;
        let v = summary_statistic(&block, params.delta())
            .map_err(|e| Failure::input(format!("block {}: {e}", seen + 1)))?;
        let report = detector.push(v.v).map_err(Failure::input)?;
        seen = report.m;
        writeln!(
            out,
            "{} {:.12} {:.12e} {:.12}",
            report.m, report.v, report.w, report.stat
        )?;
        if report.stopped {
            let verdict = detector.state().verdict().expect("stopped detector has a verdict");
            writeln!(
                out,
                "stopped stopping_time={} change_point_estimate={} j_estimate={}",
                verdict.stopping_time, verdict.change_point_estimate, verdict.j_estimate
            )?;
            out.flush()?;
            return Ok(0);
        }
    }
    writeln!(out, "no change detected in {seen} blocks")?;
    out.flush()?;
    Ok(EXIT_NO_STOP)
}

fn cmd_simulate(a: SimulateArgs) -> CmdResult {
    let text =
        std::fs::read_to_string(&a.scenario).map_err(|e| Failure::input(format!("{}: {e}", a.scenario.display())))?;
    let mut sc = Scenario::parse(&text).map_err(Failure::input)?;
    if let Some(seed) = a.seed {
        sc.seed = seed;
    }
    let run = || run_campaign(&sc, a.fast_path);
    let campaign = match a.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(Failure::input)?
            .install(run),
        None => run(),
    }
    .map_err(Failure::input)?;
    let mut err = io::stderr().lock();
    writeln!(err, "# scenario {}", sc.id)?;
    for (k, v) in &campaign.metadata {
        writeln!(err, "# {k} = {v}")?;
    }
    let mut out = stdout();
    debug_assert!(campaign.to_csv().starts_with(CSV_HEADER));
    out.write_all(campaign.to_csv().as_bytes())?;
    out.flush()?;
    Ok(0)
}

fn cmd_estimate_j(a: EstimateArgs) -> CmdResult {
    let reader = open_input(&a.input.input)?;
    let (values, params) = if a.values {
        let (n, p) = match (a.input.n, a.input.p) {
            (Some(n), Some(p)) => (n, p),
            _ => return Err(Failure::input("--values needs --n and --p")),
        };
        let params = ModelParams::new(n, p, a.input.delta).map_err(Failure::input)?;
        (read_values(reader).map_err(Failure::input)?, params)
    } else {
        let (header, blocks) = open_stream(reader, a.input.format.into()).map_err(Failure::input)?;
        header.check(a.input.n, a.input.p).map_err(Failure::input)?;
        let params = ModelParams::new(header.n, header.p, a.input.delta).map_err(Failure::input)?;
        let mut values = Vec::new();
        for block in blocks {
            let block = block.map_err(Failure::input)?;
            let v = summary_statistic(&block, params.delta())
                .map_err(|e| Failure::input(format!("block {}: {e}", values.len() + 1)))?;
            values.push(v.v);
        }
        (values, params)
    };
    if values.is_empty() {
        return Err(Failure::input("empty stream: no blocks to estimate from"));
    }
    let j = mle_j(&values, &params).map_err(Failure::input)?;
    let mut out = stdout();
    writeln!(out, "j_hat {}", j.value())?;
    writeln!(out, "count {}", values.len())?;
    out.flush()?;
    Ok(0)
}

fn equicorrelated(p: usize, k: usize, r: f64) -> CovarianceSpec {
    let mut matrix = vec![0.0; p * p];
    for i in 0..p {
        matrix[i * p + i] = 1.0;
    }
    for i in 0..k {
        for j in 0..k {
            if i != j {
                matrix[i * p + j] = r;
            }
        }
    }
    CovarianceSpec::Explicit { p, matrix }
}

fn cmd_generate(a: GenerateArgs) -> CmdResult {
    if a.k > a.p {
        return Err(Failure::input("--k must not exceed --p"));
    }
    let (lo, hi) = (a.sigma_range[0], a.sigma_range[1]);
    let pre = if lo == 1.0 && hi == 1.0 {
        CovarianceSpec::identity(a.p)
    } else {
        random_diagonal(a.p, lo, hi, a.seed).map_err(Failure::input)?
    };
    let post = match a.post {
        PostArg::Identity => pre.clone(),
        PostArg::Wishart => {
            let mut rng = stream_rng(a.seed, u64::MAX, 0);
            sample_wishart_block_cov(a.p, a.k, a.dof.unwrap_or(a.k + 2), &mut rng).map_err(Failure::input)?
        }
        PostArg::Equicorrelated => equicorrelated(a.p, a.k, a.block_corr),
    };
    let gamma = a.change_at.map_or(ChangePoint::Never, ChangePoint::At);
    let model = ChangeModel::new(a.n, a.p, gamma, pre, post, MeanPolicy::Zero, a.seed).map_err(Failure::input)?;

    let mut out: Box<dyn Write> = match &a.output {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(stdout()),
    };
    match a.format {
        FormatArg::Text => write_text_header(&mut out, a.n, a.p)?,
        FormatArg::Binary => write_binary_header(&mut out, a.n, a.p)?,
    }
    for m in 1..=a.blocks {
        let block = model.block_at(0, m);
        match a.format {
            FormatArg::Text => write_text_block(&mut out, &block)?,
            FormatArg::Binary => write_binary_block(&mut out, &block)?,
        }
    }
    out.flush()?;
    Ok(0)
}

fn cmd_sample_v(a: SampleArgs) -> CmdResult {
    let params = ModelParams::new(a.n, a.p, a.delta).map_err(Failure::input)?;
    let j = ShapeParam::new(a.j).map_err(Failure::input)?;
    let mut out = stdout();
    for m in 1..=a.count {
        let mut rng = stream_rng(a.seed, 0, m);
        writeln!(out, "{}", sample_v(&params, j, &mut rng))?;
    }
    out.flush()?;
    Ok(0)
}
