//! Command-line front end for `lsspca`.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use itertools::Itertools;

use lsspca::metrics::{compare, summarize, SummaryTable};
use lsspca::search::{branch_and_bound, exhaustive_search_within, Criterion, SearchConfig};
use lsspca::solver::{first_component, full_pca, submatrix_pc};
use lsspca::trim::{backward_eliminate, ComponentRule, StopReason, TrimConfig, TrimNorm, TrimTrace};
use lsspca::{
    covariance_from_data, datasets, ComponentSet, CovarianceMatrix, Error, IndexSet, MatrixKind,
    Mode, SolveContext, SparseComponent,
};

#[derive(Debug, Parser)]
#[command(name = "lsspca", version, about = "Least-squares sparse principal components")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Full principal components.
    Pca(PcaArgs),
    /// Sequential components with branch-and-bound supports.
    Bb(SearchArgs),
    /// Sequential components with enumerated supports.
    Exhaustive(ExhaustiveArgs),
    /// Backward elimination of small loadings.
    Be(BeArgs),
    /// Variance explained by the least-squares component and the submatrix
    /// PC on every support in a cardinality range.
    Sweep(SweepArgs),
    /// Side-by-side summary of several methods.
    Compare(CompareArgs),
    /// Time repeated runs of another subcommand.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputKind {
    Covariance,
    Correlation,
    /// Observations in rows, variables in columns.
    Data,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Fixture key (zou, zou-analytic, pitprops, synthetic:<p>[:<seed>]) or CSV path.
    #[arg(long)]
    pub input: String,
    /// How to read a CSV file.
    #[arg(long, value_enum, default_value = "covariance")]
    pub kind: InputKind,
    /// Use correlations instead of covariances (data input only).
    #[arg(long)]
    pub standardize: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    /// Write the summary table as CSV.
    #[arg(long, value_name = "PATH")]
    pub summary_csv: Option<PathBuf>,
    /// Write the loadings (components as columns) as CSV.
    #[arg(long, value_name = "PATH")]
    pub loadings_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Uncorrelated,
    Correlated,
    Orthogonal,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Uncorrelated => Mode::Uncorrelated,
            ModeArg::Correlated => Mode::Correlated,
            ModeArg::Orthogonal => Mode::Orthogonal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    /// Incremental variance explained.
    Vexp,
    /// Deflated objective a'S_jS_ja / a'Sa.
    Objective,
}

impl From<CriterionArg> for Criterion {
    fn from(c: CriterionArg) -> Criterion {
        match c {
            CriterionArg::Vexp => Criterion::Vexp,
            CriterionArg::Objective => Criterion::Objective,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    L1,
    L2,
}

#[derive(Debug, Clone, Args)]
pub struct PcaArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Number of components (default: all).
    #[arg(long)]
    pub d: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "correlated")]
    pub mode: ModeArg,
    /// What correlated and orthogonal searches maximise.
    #[arg(long, value_enum, default_value = "vexp")]
    pub criterion: CriterionArg,
    /// Cardinality of each component, e.g. 5,2,2.
    #[arg(long, value_delimiter = ',', required = true)]
    pub cards: Vec<usize>,
    /// Candidate variables for successive components, 1-based (e.g. 1,4,7),
    /// or `all`. Repeat once per component.
    #[arg(long = "start-set", value_name = "SET")]
    pub start_sets: Vec<String>,
    /// Branch-and-bound worker threads.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Keep the input variable order instead of presorting.
    #[arg(long)]
    pub no_order: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ExhaustiveArgs {
    #[command(flatten)]
    pub search: SearchArgs,
    /// Largest number of supports enumerated per component.
    #[arg(long, default_value_t = lsspca::search::DEFAULT_BUDGET)]
    pub budget: u128,
}

#[derive(Debug, Clone, Args)]
pub struct BeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "correlated")]
    pub mode: ModeArg,
    /// Maximum number of components (default: longest per-component list).
    #[arg(long)]
    pub d: Option<usize>,
    /// Trimming threshold per component, in [0,1]; the last value repeats.
    #[arg(long, value_delimiter = ',')]
    pub tau: Vec<f64>,
    /// Minimum cardinality per component; the last value repeats.
    #[arg(long = "min-card", value_delimiter = ',')]
    pub min_card: Vec<usize>,
    /// Largest relative loss of variance explained per component, in [0,1].
    #[arg(long = "max-loss", value_delimiter = ',')]
    pub max_loss: Vec<f64>,
    /// Stop once the cumulative variance explained reaches this fraction of the total.
    #[arg(long = "min-total-vexp")]
    pub min_total_vexp: Option<f64>,
    /// Loadings removed per iteration.
    #[arg(long, default_value_t = 1)]
    pub batch: usize,
    /// Loading normalisation for the threshold.
    #[arg(long, value_enum, default_value = "l1")]
    pub norm: NormArg,
    /// Starting variables for successive components, 1-based, or `all`.
    #[arg(long = "start-set", value_name = "SET")]
    pub start_sets: Vec<String>,
    /// Write every elimination step as CSV.
    #[arg(long, value_name = "PATH")]
    pub trace_csv: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Cardinality range, e.g. 4..7 or 4.
    #[arg(long, default_value = "4..7")]
    pub cards: String,
    /// Write the CSV here and print a summary instead.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum)]
pub enum Method {
    Pca,
    Bb,
    Be,
    Exhaustive,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "correlated")]
    pub mode: ModeArg,
    /// Cardinality of each component.
    #[arg(long, value_delimiter = ',', required = true)]
    pub cards: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "pca,bb,be")]
    pub methods: Vec<Method>,
    /// Write the comparison as CSV.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Number of timed repetitions.
    #[arg(long, default_value_t = 3)]
    pub reps: usize,
    /// Write the timings as CSV.
    #[arg(long, value_name = "PATH")]
    pub csv: Option<PathBuf>,
    /// The subcommand to time, with its flags.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, required = true)]
    pub command: Vec<String>,
}

/// A failed run: message plus process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e.root() {
            Error::BudgetExceeded(_) => EXIT_BUDGET,
            Error::SingularSupport(_)
            | Error::InfeasibleConstraints
            | Error::DegenerateComponent
            | Error::NoFeasibleSupport => EXIT_NUMERICAL,
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// A loaded input matrix with variable labels.
#[derive(Debug, Clone)]
pub struct Input {
    pub matrix: CovarianceMatrix,
    pub names: Vec<String>,
}

fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("v{i}")).collect()
}

pub fn load_input(args: &InputArgs) -> CliResult<Input> {
    let key = args.input.as_str();
    if datasets::FIXTURE_KEYS.contains(&key) || key.starts_with("synthetic:") {
        let f = datasets::fixture(key)?;
        return Ok(Input {
            matrix: f.matrix,
            names: f.variable_names,
        });
    }
    let text = fs::read_to_string(key).map_err(|e| CliError::input(format!("{key}: {e}")))?;
    let (matrix, names) = match args.kind {
        InputKind::Data => {
            let data = datasets::parse_data_csv(&text)?;
            let names = data.column_names.clone();
            (covariance_from_data(&data, args.standardize)?, names)
        }
        InputKind::Covariance => datasets::parse_matrix_csv(&text, MatrixKind::Covariance)?,
        InputKind::Correlation => datasets::parse_matrix_csv(&text, MatrixKind::Correlation)?,
    };
    if args.standardize && args.kind != InputKind::Data {
        return Err(CliError::input("--standardize applies to --kind data only"));
    }
    let p = matrix.dim();
    Ok(Input {
        matrix,
        names: names.unwrap_or_else(|| default_names(p)),
    })
}

/// Parses a 1-based comma-separated variable list, or `all`.
pub fn parse_start_set(s: &str, p: usize) -> CliResult<Option<IndexSet>> {
    if s.trim() == "all" {
        return Ok(None);
    }
    let mut out = Vec::new();
    for part in s.split(',') {
        let i: usize = part
            .trim()
            .parse()
            .map_err(|_| CliError::input(format!("bad variable `{part}` in start set")))?;
        if i == 0 || i > p {
            return Err(CliError::input(format!("variable {i} outside 1..={p}")));
        }
        out.push(i - 1);
    }
    Ok(Some(IndexSet::new(out)?))
}

fn start_sets(raw: &[String], p: usize) -> CliResult<Vec<Option<IndexSet>>> {
    raw.iter().map(|s| parse_start_set(s, p)).collect()
}

/// Parses `a..b`, `a..=b` or a single cardinality.
pub fn parse_card_range(s: &str) -> CliResult<(usize, usize)> {
    let bad = || CliError::input(format!("bad cardinality range `{s}`"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
        None => {
            let c = num(s)?;
            (c, c)
        }
    };
    if lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn search_config(args: &SearchArgs, p: usize) -> CliResult<SearchConfig> {
    let cfg = SearchConfig {
        criterion: args.criterion.into(),
        start_sets: start_sets(&args.start_sets, p)?,
        order_variables: !args.no_order,
        threads: args.threads,
        ..SearchConfig::new(args.cards.clone(), args.mode.into())
    };
    cfg.validate(p)?;
    Ok(cfg)
}

/// Builds the elimination config from the flags.
pub fn trim_config(args: &BeArgs, p: usize) -> CliResult<TrimConfig> {
    let sets = start_sets(&args.start_sets, p)?;
    let n = [args.tau.len(), args.min_card.len(), args.max_loss.len(), sets.len(), 1]
        .into_iter()
        .max()
        .unwrap_or(1);
    fn pick<T: Clone>(v: &[T], j: usize) -> Option<T> {
        v.get(j).or(v.last()).cloned()
    }
    let rules = (0..n)
        .map(|j| ComponentRule {
            start_set: sets.get(j).cloned().flatten(),
            tau: pick(&args.tau, j).unwrap_or(1.0),
            min_cardinality: pick(&args.min_card, j).unwrap_or(1),
            max_loss: pick(&args.max_loss, j),
        })
        .collect();
    let cfg = TrimConfig {
        d: args.d.unwrap_or(n),
        mv: args.min_total_vexp,
        mode: args.mode.into(),
        norm: match args.norm {
            NormArg::L1 => TrimNorm::L1,
            NormArg::L2 => TrimNorm::L2,
        },
        batch: args.batch,
        rules,
    };
    cfg.validate(p)?;
    Ok(cfg)
}

/// Fits components one at a time, keeping those found before a failure.
fn chain(
    cov: &CovarianceMatrix,
    cards: &[usize],
    mode: Mode,
    mut next: impl FnMut(&SolveContext<'_>, usize) -> lsspca::Result<SparseComponent>,
) -> (ComponentSet, Option<Error>) {
    let mut components: Vec<SparseComponent> = Vec::new();
    for (k, &c) in cards.iter().enumerate() {
        let ctx = SolveContext::new(cov, &components, mode);
        match next(&ctx, c) {
            Ok(comp) => components.push(comp),
            Err(e) => {
                let err = Error::Component {
                    index: k + 1,
                    source: Box::new(e),
                };
                return (ComponentSet::new(cov.clone(), components), Some(err));
            }
        }
    }
    (ComponentSet::new(cov.clone(), components), None)
}

pub fn bb_components(cov: &CovarianceMatrix, cfg: &SearchConfig) -> (ComponentSet, Option<Error>) {
    chain(cov, &cfg.cardinalities, cfg.mode, |ctx, c| {
        branch_and_bound(ctx, c, cfg).map(|r| r.component)
    })
}

pub fn exhaustive_components(
    cov: &CovarianceMatrix,
    cfg: &SearchConfig,
    budget: u128,
) -> (ComponentSet, Option<Error>) {
    let p = cov.dim();
    chain(cov, &cfg.cardinalities, cfg.mode, |ctx, c| {
        let candidates = cfg
            .start_set(ctx.order())
            .cloned()
            .unwrap_or_else(|| IndexSet::full(p));
        exhaustive_search_within(ctx, &candidates, c, cfg.criterion, budget).map(|r| r.component)
    })
}

/// Loadings with components as columns; entries below 0.001 in size are blank.
pub fn loadings_text(set: &ComponentSet, names: &[String]) -> String {
    let width = names.iter().map(String::len).max().unwrap_or(0).max(8);
    let mut out = format!("{:<width$}", "variable");
    for k in 1..=set.len() {
        let _ = write!(out, " {:>7}", format!("C{k}"));
    }
    out.push('\n');
    for (i, name) in names.iter().enumerate() {
        let _ = write!(out, "{name:<width$}");
        for c in &set.components {
            let a = c.loadings[i];
            if a.abs() < 0.001 {
                out.push_str("        ");
            } else {
                let _ = write!(out, " {a:>7.3}");
            }
        }
        out.push('\n');
    }
    out
}

pub fn loadings_csv(set: &ComponentSet, names: &[String]) -> String {
    let mut out = String::from("variable");
    for k in 1..=set.len() {
        let _ = write!(out, ",C{k}");
    }
    out.push('\n');
    for (i, name) in names.iter().enumerate() {
        out.push_str(name);
        for c in &set.components {
            let _ = write!(out, ",{}", c.loadings[i]);
        }
        out.push('\n');
    }
    out
}

fn one_based(set: &IndexSet) -> String {
    set.one_based().iter().join(" ")
}

fn stop_name(s: StopReason) -> &'static str {
    match s {
        StopReason::ThresholdMet => "threshold",
        StopReason::MinCardinality => "min-card",
        StopReason::VarianceLoss => "max-loss",
        StopReason::TotalVariance => "min-total-vexp",
        StopReason::Exhausted => "exhausted",
    }
}

pub fn trace_csv(traces: &[TrimTrace]) -> String {
    let mut out = String::from("component,step,removed,magnitudes,support,vexp,rolled_back\n");
    for t in traces {
        for (s, step) in t.steps.iter().enumerate() {
            let removed = step.removed.iter().map(|i| i + 1).join(" ");
            let mags = step.magnitudes.iter().join(" ");
            let vexp = step.vexp.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{removed},{mags},{},{vexp},{}",
                t.order,
                s + 1,
                one_based(&step.support),
                step.rolled_back
            );
        }
    }
    out
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn report(
    out: &mut dyn Write,
    set: &ComponentSet,
    names: &[String],
    output: &OutputArgs,
) -> CliResult<SummaryTable> {
    let table = summarize(set);
    write!(out, "{}\n{}", table.to_text(), loadings_text(set, names))?;
    if let Some(path) = &output.summary_csv {
        write_file(path, &table.to_csv())?;
    }
    if let Some(path) = &output.loadings_csv {
        write_file(path, &loadings_csv(set, names))?;
    }
    Ok(table)
}

fn finish(
    out: &mut dyn Write,
    set: &ComponentSet,
    err: Option<Error>,
    names: &[String],
    output: &OutputArgs,
) -> CliResult<()> {
    if !set.is_empty() {
        report(out, set, names, output)?;
    }
    match err {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

/// One row of the sweep: a support with both components' variance explained.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub support: IndexSet,
    pub ls_vexp: Option<f64>,
    pub pc_vexp: Option<f64>,
}

pub fn sweep(cov: &CovarianceMatrix, lo: usize, hi: usize) -> CliResult<Vec<SweepRow>> {
    let p = cov.dim();
    if hi > p {
        return Err(CliError::input(format!("cardinality {hi} exceeds {p} variables")));
    }
    let mut rows = Vec::new();
    for c in lo..=hi {
        for ind in (0..p).combinations(c) {
            let support = IndexSet::new(ind)?;
            rows.push(SweepRow {
                ls_vexp: first_component(cov, &support).ok().map(|a| a.vexp),
                pc_vexp: submatrix_pc(cov, &support).ok().map(|a| a.vexp),
                support,
            });
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("card,support,ls_vexp,pc_vexp\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.support.len(),
            one_based(&r.support),
            opt(r.ls_vexp),
            opt(r.pc_vexp)
        );
    }
    out
}

fn sweep_summary(rows: &[SweepRow], trace: f64) -> String {
    let mut out = format!(
        "{:>4} {:>7} {:>8} {:>8} {:>9}\n",
        "card", "subsets", "maxLS%", "maxPC%", "LS>=PC"
    );
    for (card, group) in &rows.iter().chunk_by(|r| r.support.len()) {
        let group: Vec<&SweepRow> = group.collect();
        let max = |f: fn(&SweepRow) -> Option<f64>| {
            group.iter().filter_map(|r| f(r)).fold(f64::NEG_INFINITY, f64::max)
        };
        let dominated = group
            .iter()
            .filter(|r| match (r.ls_vexp, r.pc_vexp) {
                (Some(l), Some(c)) => l >= c - 1e-10,
                _ => false,
            })
            .count();
        let _ = writeln!(
            out,
            "{card:>4} {:>7} {:>8.2} {:>8.2} {:>9}",
            group.len(),
            100.0 * max(|r| r.ls_vexp) / trace,
            100.0 * max(|r| r.pc_vexp) / trace,
            dominated
        );
    }
    out
}

/// Timing of repeated runs.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub seconds: Vec<f64>,
    pub dim: usize,
}

impl BenchReport {
    pub fn mean(&self) -> f64 {
        self.seconds.iter().sum::<f64>() / self.seconds.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rep,seconds,seconds_per_variable\n");
        let p = self.dim as f64;
        for (k, s) in self.seconds.iter().enumerate() {
            let _ = writeln!(out, "{},{s},{}", k + 1, s / p);
        }
        let m = self.mean();
        let _ = writeln!(out, "mean,{m},{}", m / p);
        out
    }
}

/// Runs `command` `reps` times with its output discarded.
pub fn bench(command: &Command, reps: usize) -> CliResult<BenchReport> {
    if matches!(command, Command::Bench(_)) {
        return Err(CliError::input("bench cannot time itself"));
    }
    if reps == 0 {
        return Err(CliError::input("--reps must be at least 1"));
    }
    let mut seconds = Vec::with_capacity(reps);
    let mut dim = 0;
    for _ in 0..reps {
        let start = Instant::now();
        dim = execute(command, &mut std::io::sink())?;
        seconds.push(start.elapsed().as_secs_f64());
    }
    Ok(BenchReport { seconds, dim })
}

/// Runs one subcommand, writing its text output to `out`. Returns the
/// number of variables.
pub fn execute(command: &Command, out: &mut dyn Write) -> CliResult<usize> {
    match command {
        Command::Pca(a) => {
            let input = load_input(&a.input)?;
            let p = input.matrix.dim();
            let d = a.d.unwrap_or(p);
            if d == 0 || d > p {
                return Err(CliError::input(format!("--d must be in 1..={p}")));
            }
            let set = full_pca(&input.matrix, d)?;
            report(out, &set, &input.names, &a.output)?;
            Ok(p)
        }
        Command::Bb(a) => {
            let input = load_input(&a.input)?;
            let cfg = search_config(a, input.matrix.dim())?;
            let (set, err) = bb_components(&input.matrix, &cfg);
            finish(out, &set, err, &input.names, &a.output)?;
            Ok(input.matrix.dim())
        }
        Command::Exhaustive(a) => {
            let input = load_input(&a.search.input)?;
            let cfg = search_config(&a.search, input.matrix.dim())?;
            let (set, err) = exhaustive_components(&input.matrix, &cfg, a.budget);
            finish(out, &set, err, &input.names, &a.search.output)?;
            Ok(input.matrix.dim())
        }
        Command::Be(a) => {
            let input = load_input(&a.input)?;
            let cfg = trim_config(a, input.matrix.dim())?;
            let (set, traces) = backward_eliminate(&input.matrix, &cfg)?;
            report(out, &set, &input.names, &a.output)?;
            for t in &traces {
                write!(out, "C{}: {} steps, stopped by {}", t.order, t.steps.len(), stop_name(t.stop))?;
                if let Some(s) = t.chain_stop {
                    write!(out, "; chain stopped by {}", stop_name(s))?;
                }
                writeln!(out)?;
            }
            if let Some(path) = &a.trace_csv {
                write_file(path, &trace_csv(&traces))?;
            }
            Ok(input.matrix.dim())
        }
        Command::Sweep(a) => {
            let input = load_input(&a.input)?;
            let (lo, hi) = parse_card_range(&a.cards)?;
            let rows = sweep(&input.matrix, lo, hi)?;
            match &a.out {
                Some(path) => {
                    write_file(path, &sweep_csv(&rows))?;
                    out.write_all(sweep_summary(&rows, input.matrix.trace()).as_bytes())?;
                }
                None => out.write_all(sweep_csv(&rows).as_bytes())?,
            }
            Ok(input.matrix.dim())
        }
        Command::Compare(a) => {
            let input = load_input(&a.input)?;
            let p = input.matrix.dim();
            let mode: Mode = a.mode.into();
            let cfg = SearchConfig::new(a.cards.clone(), mode);
            cfg.validate(p)?;
            let mut tables = Vec::new();
            let mut labels = Vec::new();
            for m in a.methods.iter().copied().unique() {
                let set = match m {
                    Method::Pca => full_pca(&input.matrix, a.cards.len().min(p))?,
                    Method::Bb => bb_components(&input.matrix, &cfg).0,
                    Method::Exhaustive => {
                        exhaustive_components(&input.matrix, &cfg, lsspca::search::DEFAULT_BUDGET).0
                    }
                    Method::Be => {
                        let trim = TrimConfig {
                            mode,
                            ..TrimConfig::with_cardinalities(&a.cards)
                        };
                        backward_eliminate(&input.matrix, &trim)?.0
                    }
                };
                tables.push(summarize(&set));
                labels.push(format!("{m:?}").to_lowercase());
            }
            let labels: Vec<&str> = labels.iter().map(String::as_str).collect();
            let report = compare(&tables, &labels)?;
            out.write_all(report.to_text().as_bytes())?;
            if let Some(path) = &a.csv {
                write_file(path, &report.to_csv())?;
            }
            Ok(p)
        }
        Command::Bench(a) => {
            let mut argv = vec!["lsspca".to_string()];
            argv.extend(a.command.iter().cloned());
            let inner = Cli::try_parse_from(argv).map_err(|e| CliError::input(e.to_string()))?;
            let rep = bench(&inner.command, a.reps)?;
            out.write_all(rep.to_csv().as_bytes())?;
            if let Some(path) = &a.csv {
                write_file(path, &rep.to_csv())?;
            }
            Ok(rep.dim)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Command {
        let mut argv = vec!["lsspca"];
        argv.extend_from_slice(args);
        Cli::try_parse_from(argv).unwrap().command
    }

    #[test]
    fn card_ranges() {
        assert_eq!(parse_card_range("4..7").unwrap(), (4, 7));
        assert_eq!(parse_card_range("4..=7").unwrap(), (4, 7));
        assert_eq!(parse_card_range("5").unwrap(), (5, 5));
        assert!(parse_card_range("7..4").is_err());
        assert!(parse_card_range("0..2").is_err());
        assert!(parse_card_range("x").is_err());
    }

    #[test]
    fn start_sets_are_one_based() {
        let s = parse_start_set("3,1,2", 5).unwrap().unwrap();
        assert_eq!(s.as_slice(), &[0, 1, 2]);
        assert!(parse_start_set("all", 5).unwrap().is_none());
        assert_eq!(parse_start_set("0", 5).unwrap_err().code, EXIT_INPUT);
        assert_eq!(parse_start_set("6", 5).unwrap_err().code, EXIT_INPUT);
    }

    #[test]
    fn trim_rules_repeat_last_value() {
        let Command::Be(a) = parse(&["be", "--input", "zou", "--tau", "0.2,0.1", "--min-card", "3", "--d", "4"])
        else {
            unreachable!()
        };
        let cfg = trim_config(&a, 10).unwrap();
        assert_eq!(cfg.d, 4);
        assert_eq!(cfg.rule(1).tau, 0.2);
        assert_eq!(cfg.rule(3).tau, 0.1);
        assert_eq!(cfg.rule(4).min_cardinality, 3);
        assert_eq!(cfg.rule(2).max_loss, None);
    }

    #[test]
    fn error_codes() {
        assert_eq!(CliError::from(Error::BudgetExceeded(10)).code, EXIT_BUDGET);
        assert_eq!(CliError::from(Error::NoFeasibleSupport).code, EXIT_NUMERICAL);
        let wrapped = Error::Component {
            index: 2,
            source: Box::new(Error::DegenerateComponent),
        };
        assert_eq!(CliError::from(wrapped).code, EXIT_NUMERICAL);
        assert_eq!(CliError::from(Error::UnknownFixture("x".into())).code, EXIT_INPUT);
        assert_eq!(
            CliError::from(Error::CardinalityTooSmall { cardinality: 2, order: 3 }).code,
            EXIT_INPUT
        );
    }

    #[test]
    fn small_loadings_are_blank() {
        let zou = datasets::zou_table1();
        let set = full_pca(&zou.matrix, 1).unwrap();
        let mut sparse = set.clone();
        sparse.components[0].loadings[3] = 0.0004;
        let text = loadings_text(&sparse, &zou.variable_names);
        let line = text.lines().nth(4).unwrap();
        assert_eq!(line.trim(), "x4");
        assert!(text.lines().nth(1).unwrap().contains('.'));
    }

    #[test]
    fn bench_refuses_nesting() {
        let cmd = parse(&["bench", "--", "pca", "--input", "zou"]);
        assert_eq!(bench(&cmd, 1).unwrap_err().code, EXIT_INPUT);
        let inner = parse(&["pca", "--input", "zou"]);
        let rep = bench(&inner, 2).unwrap();
        assert_eq!(rep.seconds.len(), 2);
        assert_eq!(rep.dim, 10);
        assert_eq!(rep.to_csv().lines().count(), 4);
    }
}
