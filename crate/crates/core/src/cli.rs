//! Command-line front end. [`run`] returns the exit code and the complete
//! output so the binary can write it in one call.

use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::chain::{ChainSpec, Distribution};
use crate::error::{Error, Result};
use crate::graph::Path;
use crate::io::{self, chain_hash, csv_table, parse_chain, parse_initial, reals, ParsedChain, Real};
use crate::master::{default_ode_steps, expm_solution, solve_ode};
use crate::measure::{
    density, propagator, series_solve, SeriesOptions, SeriesResult, Trajectory, DEFAULT_EPSILON,
    DEFAULT_GRID_PER_UNIT,
};
use crate::regular::RegularChain;
use crate::rng::GENERATOR_NAME;
use crate::sampler::{empirical_distribution, log_density_check, sample_batch};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "PATHMEASURE_THREADS";

pub const DEFAULT_SAMPLES: usize = 100_000;

/// Certificate assumed for the scaling-and-squaring exponential.
const EXPM_ERROR: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "pathmeasure", version, about = "Trajectory measures for Markov chains on graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse a chain document and report its bounds.
    Validate(ChainArg),
    /// Distribution at time t.
    Solve(SolveArgs),
    /// Table of fundamental solutions K(i, j, t).
    Propagator(CommonArgs),
    /// Density of a single trajectory.
    Density(DensityArgs),
    /// Monte Carlo trajectories with histograms.
    Sample(CommonArgs),
    /// Heat kernel of the unit-rate walk on a regular undirected graph.
    Heatkernel(CommonArgs),
    /// Every applicable solver side by side.
    Compare(CommonArgs),
}

#[derive(Debug, Args)]
struct ChainArg {
    /// Chain document, or `-` for standard input.
    chain: String,
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[command(flatten)]
    input: ChainArg,
    #[arg(long = "t", default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Quadrature intervals per unit time.
    #[arg(long, default_value_t = DEFAULT_GRID_PER_UNIT)]
    grid: usize,
    /// `delta:<vertex>`, `uniform`, `<vertex>=<p>,...` or a list in vertex order.
    #[arg(long, default_value = "uniform")]
    q: String,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    output: OutputFormat,
    /// Include wall-clock time in the result.
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value_t = Method::Series)]
    method: Method,
}

#[derive(Debug, Args)]
struct DensityArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated edge ids.
    #[arg(long, default_value = "")]
    path: String,
    /// Comma-separated jump times, one per edge.
    #[arg(long, default_value = "")]
    times: String,
    /// Start vertex; required only for the empty path.
    #[arg(long)]
    start: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Method {
    Series,
    Ode,
    Expm,
}

/// Runs one command. Returns the exit code and everything to print.
pub fn run<I, S>(args: I) -> (i32, String)
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => (0, e.to_string()),
                _ => error_output(&Error::InvalidArgument(e.to_string().trim().to_string())),
            };
        }
    };
    let outcome = match thread_count() {
        Ok(Some(n)) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))
            .and_then(|pool| pool.install(|| dispatch(cli.command))),
        Ok(None) => dispatch(cli.command),
        Err(e) => Err(e),
    };
    match outcome {
        Ok(out) => out,
        Err(e) => error_output(&e),
    }
}

fn thread_count() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Error::InvalidArgument(format!("{THREADS_ENV}={v} is not a positive integer"))),
        Err(_) => Ok(None),
    }
}

#[derive(Serialize)]
struct ErrorDocument<'a> {
    version: u32,
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
    exit_code: i32,
}

fn error_output(e: &Error) -> (i32, String) {
    let doc = ErrorDocument {
        version: io::FORMAT_VERSION,
        error: ErrorBody {
            kind: e.kind(),
            message: e.to_string(),
            exit_code: e.exit_code(),
        },
    };
    (e.exit_code(), to_json(&doc))
}

fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("result documents serialize");
    s.push('\n');
    s
}

fn dispatch(command: Command) -> Result<(i32, String)> {
    match command {
        Command::Validate(a) => validate(&a),
        Command::Solve(a) => solve(&a.common, a.method),
        Command::Propagator(a) => propagator_cmd(&a),
        Command::Density(a) => density_cmd(&a),
        Command::Sample(a) => sample(&a),
        Command::Heatkernel(a) => heatkernel(&a),
        Command::Compare(a) => compare(&a),
    }
}

fn read_input(path: &str) -> Result<String> {
    let read = if path == "-" {
        std::io::read_to_string(std::io::stdin())
    } else {
        std::fs::read_to_string(path)
    };
    read.map_err(|e| Error::InvalidArgument(format!("cannot read `{path}`: {e}")))
}

/// Loads the chain; a document without a horizon gets `t` (or 1 at `t = 0`).
fn load(path: &str, t: f64) -> Result<ParsedChain> {
    let fallback = if t > 0.0 { t } else { 1.0 };
    parse_chain(&read_input(path)?, Some(fallback))
}

fn check_common(a: &CommonArgs) -> Result<()> {
    if !(a.t.is_finite() && a.t >= 0.0) {
        return Err(Error::InvalidArgument(format!("--t {} must be finite and nonnegative", a.t)));
    }
    if !(a.epsilon > 0.0 && a.epsilon.is_finite()) {
        return Err(Error::InvalidArgument(format!("--epsilon {} must be positive", a.epsilon)));
    }
    if a.grid == 0 {
        return Err(Error::InvalidArgument("--grid must be at least 1".into()));
    }
    Ok(())
}

fn series_options(a: &CommonArgs) -> SeriesOptions {
    SeriesOptions {
        epsilon: a.epsilon,
        grid: a.grid,
        ..SeriesOptions::default()
    }
}

#[derive(Serialize)]
struct Inputs {
    chain_hash: String,
    t: Real,
    epsilon: Real,
    grid: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    q: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
}

impl Inputs {
    fn new(chain: &ChainSpec, a: &CommonArgs) -> Self {
        Inputs {
            chain_hash: chain_hash(chain),
            t: Real(a.t),
            epsilon: Real(a.epsilon),
            grid: a.grid,
            q: None,
            seed: None,
            samples: None,
        }
    }

    fn with_q(mut self, a: &CommonArgs) -> Self {
        self.q = Some(a.q.clone());
        self
    }
}

#[derive(Serialize)]
struct Timing {
    seconds: Real,
}

fn timing(a: &CommonArgs, start: Instant) -> Option<Timing> {
    a.timing.then(|| Timing {
        seconds: Real(start.elapsed().as_secs_f64()),
    })
}

#[derive(Serialize)]
struct Certificate {
    truncation_order: usize,
    tail_bound: Real,
    tail_sum: Real,
    scale: Real,
    rate_bound: Real,
    degree_bound: usize,
    grid_intervals: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    quadrature_error: Option<Real>,
}

impl Certificate {
    fn from_series(r: &SeriesResult) -> Self {
        Certificate {
            truncation_order: r.truncation.order,
            tail_bound: Real(r.truncation.tail_bound),
            tail_sum: Real(r.truncation.tail_sum),
            scale: Real(r.truncation.scale),
            rate_bound: Real(r.rate_bound),
            degree_bound: r.degree_bound,
            grid_intervals: r.grid_intervals,
            quadrature_error: r.quadrature_error.map(Real),
        }
    }
}

#[derive(Serialize)]
struct Entry<'a> {
    vertex: &'a str,
    probability: Real,
}

fn entries<'a>(chain: &'a ChainSpec, p: &Distribution) -> Vec<Entry<'a>> {
    chain
        .graph()
        .vertex_ids()
        .iter()
        .zip(p.clamped())
        .map(|(v, x)| Entry {
            vertex: v,
            probability: Real(x),
        })
        .collect()
}

#[derive(Serialize)]
struct ValidateDocument<'a> {
    version: u32,
    command: &'static str,
    chain_hash: String,
    directed: bool,
    vertices: &'a [String],
    edge_count: usize,
    horizon: Real,
    rate_bound: Real,
    degree_bound: usize,
    max_in_degree: usize,
    max_out_degree: usize,
    homogeneous: bool,
}

fn validate(a: &ChainArg) -> Result<(i32, String)> {
    let parsed = parse_chain(&read_input(&a.chain)?, None)?;
    let chain = &parsed.chain;
    let stats = chain.graph().degree_stats();
    let doc = ValidateDocument {
        version: io::FORMAT_VERSION,
        command: "validate",
        chain_hash: chain_hash(chain),
        directed: parsed.undirected.is_none(),
        vertices: chain.graph().vertex_ids(),
        edge_count: chain.graph().edge_count(),
        horizon: Real(chain.horizon()),
        rate_bound: Real(chain.rate_bound()),
        degree_bound: stats.bound,
        max_in_degree: stats.in_degree.iter().copied().max().unwrap_or(0),
        max_out_degree: stats.out_degree.iter().copied().max().unwrap_or(0),
        homogeneous: chain.is_homogeneous(),
    };
    Ok((0, to_json(&doc)))
}

#[derive(Serialize)]
struct SolveDocument<'a> {
    version: u32,
    command: &'static str,
    method: Method,
    inputs: Inputs,
    distribution: Vec<Entry<'a>>,
    mass: Real,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<Certificate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ode_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing: Option<Timing>,
}

fn solve(a: &CommonArgs, method: Method) -> Result<(i32, String)> {
    check_common(a)?;
    let start = Instant::now();
    let chain = load(&a.input.chain, a.t)?.chain;
    let q = parse_initial(&a.q, &chain)?;
    let (p, certificate, ode_steps) = match method {
        Method::Series => {
            let r = series_solve(&chain, &q, a.t, &series_options(a))?;
            (r.distribution.clone(), Some(Certificate::from_series(&r)), None)
        }
        Method::Ode => {
            let steps = default_ode_steps(a.t);
            (solve_ode(&chain, &q, a.t, steps)?, None, Some(steps))
        }
        Method::Expm => (expm_solution(&chain, &q, a.t)?, None, None),
    };
    if a.output == OutputFormat::Csv {
        let label = a.q.strip_prefix("delta:").unwrap_or("q");
        let clamped = p.clamped();
        let rows = chain
            .graph()
            .vertex_ids()
            .iter()
            .zip(&clamped)
            .map(|(v, &x)| (label, v.as_str(), x));
        return Ok((0, csv_table(a.t, rows)));
    }
    let doc = SolveDocument {
        version: io::FORMAT_VERSION,
        command: "solve",
        method,
        inputs: Inputs::new(&chain, a).with_q(a),
        distribution: entries(&chain, &p),
        mass: Real(p.mass()),
        certificate,
        ode_steps,
        timing: timing(a, start),
    };
    Ok((0, to_json(&doc)))
}

fn table_rows(m: &DMatrix<f64>) -> Vec<Vec<Real>> {
    m.row_iter()
        .map(|r| r.iter().map(|x| Real(x.clamp(0.0, 1.0))).collect())
        .collect()
}

fn table_csv(chain: &ChainSpec, t: f64, m: &DMatrix<f64>) -> String {
    let ids = chain.graph().vertex_ids();
    let rows = (0..ids.len()).flat_map(|i| {
        (0..ids.len()).map(move |j| (ids[i].as_str(), ids[j].as_str(), m[(i, j)].clamp(0.0, 1.0)))
    });
    csv_table(t, rows)
}

#[derive(Serialize)]
struct PropagatorDocument<'a> {
    version: u32,
    command: &'static str,
    inputs: Inputs,
    /// Row and column labels; row = start vertex.
    vertices: &'a [String],
    table: Vec<Vec<Real>>,
    max_row_defect: Real,
    truncation_order: usize,
    tail_bound: Real,
    #[serde(skip_serializing_if = "Option::is_none")]
    quadrature_error: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing: Option<Timing>,
}

fn propagator_cmd(a: &CommonArgs) -> Result<(i32, String)> {
    check_common(a)?;
    let start = Instant::now();
    let chain = load(&a.input.chain, a.t)?.chain;
    let table = propagator(&chain, a.t, &series_options(a))?;
    if a.output == OutputFormat::Csv {
        return Ok((0, table_csv(&chain, a.t, &table.values)));
    }
    let doc = PropagatorDocument {
        version: io::FORMAT_VERSION,
        command: "propagator",
        inputs: Inputs::new(&chain, a),
        vertices: chain.graph().vertex_ids(),
        table: table_rows(&table.values),
        max_row_defect: Real(table.max_row_defect()),
        truncation_order: table.truncation.order,
        tail_bound: Real(table.truncation.tail_bound),
        quadrature_error: table.quadrature_error.map(Real),
        timing: timing(a, start),
    };
    Ok((0, to_json(&doc)))
}

fn json_only(a: &CommonArgs, command: &str) -> Result<()> {
    if a.output == OutputFormat::Csv {
        return Err(Error::InvalidArgument(format!(
            "`{command}` has no CSV form; CSV covers distributions and propagator tables"
        )));
    }
    Ok(())
}

fn split_list(s: &str) -> Vec<&str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).collect()
}

#[derive(Serialize)]
struct DensityDocument<'a> {
    version: u32,
    command: &'static str,
    inputs: Inputs,
    path: Vec<&'a str>,
    vertices: Vec<&'a str>,
    jump_times: Vec<Real>,
    density: Real,
}

fn density_cmd(a: &DensityArgs) -> Result<(i32, String)> {
    let c = &a.common;
    check_common(c)?;
    json_only(c, "density")?;
    let chain = load(&c.input.chain, c.t)?.chain;
    let q = parse_initial(&c.q, &chain)?;
    let edge_ids = split_list(&a.path);
    let times = split_list(&a.times)
        .into_iter()
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("cannot parse jump time `{s}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let start = match (&a.start, edge_ids.is_empty()) {
        (Some(v), _) => v.clone(),
        (None, false) => String::new(),
        (None, true) => return Err(Error::InvalidArgument("the empty path needs --start".into())),
    };
    let path = Path::from_edge_ids(chain.graph(), &start, &edge_ids)?;
    if a.start.is_some() && path.source() != chain.graph().vertex_index(&start)? {
        return Err(Error::InvalidArgument(format!(
            "--start {start} is not the source of the first edge"
        )));
    }
    let traj = Trajectory::new(path, times, c.t)?;
    let f = density(&chain, &q, &traj)?;
    let g = chain.graph();
    let doc = DensityDocument {
        version: io::FORMAT_VERSION,
        command: "density",
        inputs: Inputs::new(&chain, c).with_q(c),
        path: traj.path().edges().iter().map(|&e| g.edge(e).id.as_str()).collect(),
        vertices: traj.path().vertices().iter().map(|&v| g.vertex_id(v)).collect(),
        jump_times: reals(traj.jump_times()),
        density: Real(f),
    };
    Ok((0, to_json(&doc)))
}

#[derive(Serialize)]
struct SampleDocument<'a> {
    version: u32,
    command: &'static str,
    generator: &'static str,
    inputs: Inputs,
    vertices: &'a [String],
    terminal_histogram: &'a [usize],
    jump_histogram: &'a [usize],
    empirical: Vec<Real>,
    series: Vec<Real>,
    total_variation: Real,
    mean_jumps: Real,
    expected_jumps: Real,
    min_density: Real,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing: Option<Timing>,
}

fn sample(a: &CommonArgs) -> Result<(i32, String)> {
    check_common(a)?;
    json_only(a, "sample")?;
    let start = Instant::now();
    let chain = load(&a.input.chain, a.t)?.chain;
    let q = parse_initial(&a.q, &chain)?;
    let batch = sample_batch(&chain, &q, a.t, a.samples, a.seed)?;
    let empirical = empirical_distribution(&batch)?;
    let report = log_density_check(&chain, &q, &batch)?;
    let series = series_solve(&chain, &q, a.t, &series_options(a))?.distribution;
    let mut inputs = Inputs::new(&chain, a).with_q(a);
    inputs.seed = Some(a.seed);
    inputs.samples = Some(a.samples);
    let doc = SampleDocument {
        version: io::FORMAT_VERSION,
        command: "sample",
        generator: GENERATOR_NAME,
        inputs,
        vertices: chain.graph().vertex_ids(),
        terminal_histogram: &batch.terminal_histogram,
        jump_histogram: &batch.jump_histogram,
        empirical: reals(empirical.values()),
        series: reals(&series.clamped()),
        total_variation: Real(empirical.total_variation(&series)),
        mean_jumps: Real(report.mean_jumps),
        expected_jumps: Real(report.expected_jumps),
        min_density: Real(report.min_density),
        timing: timing(a, start),
    };
    Ok((0, to_json(&doc)))
}

#[derive(Serialize)]
struct HeatKernelDocument<'a> {
    version: u32,
    command: &'static str,
    inputs: Inputs,
    regularity: usize,
    vertices: &'a [String],
    table: Vec<Vec<Real>>,
    /// Largest `|K - propagator|` against the general series solver.
    propagator_deviation: Real,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing: Option<Timing>,
}

fn heatkernel(a: &CommonArgs) -> Result<(i32, String)> {
    check_common(a)?;
    let start = Instant::now();
    let parsed = load(&a.input.chain, a.t)?;
    let graph = parsed
        .undirected
        .ok_or_else(|| Error::InvalidArgument("heatkernel needs an undirected document".into()))?;
    if let Some(k) = parsed.chain.rates().iter().position(|r| r.constant_value() != Some(1.0)) {
        return Err(Error::InvalidArgument(format!(
            "heatkernel needs unit rates; edge `{}` differs",
            parsed.chain.graph().edge(k).id
        )));
    }
    let reg = RegularChain::new(graph, parsed.chain.horizon())?;
    let table = reg.heat_kernel_table(a.t, a.epsilon)?;
    if a.output == OutputFormat::Csv {
        return Ok((0, table_csv(reg.chain(), a.t, &table)));
    }
    let general = propagator(reg.chain(), a.t, &series_options(a))?;
    let deviation = (&table - &general.values).amax();
    let doc = HeatKernelDocument {
        version: io::FORMAT_VERSION,
        command: "heatkernel",
        inputs: Inputs::new(reg.chain(), a),
        regularity: reg.regularity(),
        vertices: reg.chain().graph().vertex_ids(),
        table: table_rows(&table),
        propagator_deviation: Real(deviation),
        timing: timing(a, start),
    };
    Ok((0, to_json(&doc)))
}

#[derive(Serialize)]
struct MethodResult {
    method: Method,
    distribution: Vec<Real>,
    /// Error estimate used to set pairwise tolerances.
    certificate: Real,
}

#[derive(Serialize)]
struct Deviation {
    methods: [Method; 2],
    max_abs: Real,
    tolerance: Real,
    agree: bool,
}

#[derive(Serialize)]
struct CompareDocument<'a> {
    version: u32,
    command: &'static str,
    inputs: Inputs,
    vertices: &'a [String],
    results: Vec<MethodResult>,
    deviations: Vec<Deviation>,
    max_deviation: Real,
    agree: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    timing: Option<Timing>,
}

fn compare(a: &CommonArgs) -> Result<(i32, String)> {
    check_common(a)?;
    json_only(a, "compare")?;
    let start = Instant::now();
    let chain = load(&a.input.chain, a.t)?.chain;
    let q = parse_initial(&a.q, &chain)?;

    let series = series_solve(&chain, &q, a.t, &series_options(a))?;
    let series_cert = series.truncation.tail_bound + series.quadrature_error.unwrap_or(0.0);
    let steps = default_ode_steps(a.t);
    let ode = solve_ode(&chain, &q, a.t, steps)?;
    // Step-doubling estimate for a fourth-order method.
    let ode_half = solve_ode(&chain, &q, a.t, steps.div_ceil(2))?;
    let ode_cert = ode.max_abs_diff(&ode_half) / 15.0;
    let mut results = vec![
        (Method::Series, series.distribution, series_cert),
        (Method::Ode, ode, ode_cert),
    ];
    if chain.is_homogeneous() {
        results.push((Method::Expm, expm_solution(&chain, &q, a.t)?, EXPM_ERROR));
    }

    let mut deviations = Vec::new();
    for i in 0..results.len() {
        for j in i + 1..results.len() {
            let (ma, pa, ca) = &results[i];
            let (mb, pb, cb) = &results[j];
            let max_abs = pa.max_abs_diff(pb);
            let tolerance = 2.0 * (ca + cb) + 1e-9;
            deviations.push(Deviation {
                methods: [*ma, *mb],
                max_abs: Real(max_abs),
                tolerance: Real(tolerance),
                agree: max_abs <= tolerance,
            });
        }
    }
    let max_deviation = deviations.iter().map(|d| d.max_abs.0).fold(0.0, f64::max);
    let agree = deviations.iter().all(|d| d.agree);
    let doc = CompareDocument {
        version: io::FORMAT_VERSION,
        command: "compare",
        inputs: Inputs::new(&chain, a).with_q(a),
        vertices: chain.graph().vertex_ids(),
        results: results
            .into_iter()
            .map(|(method, p, c)| MethodResult {
                method,
                distribution: reals(&p.clamped()),
                certificate: Real(c),
            })
            .collect(),
        deviations,
        max_deviation: Real(max_deviation),
        agree,
        timing: timing(a, start),
    };
    Ok((if agree { 0 } else { 3 }, to_json(&doc)))
}
