//! Command-line front end.
//!
//! Exit codes: 0 success, 2 input error, 3 statistical preconditions unmet.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use periodic_stats::cluster::{cluster_correct, AdjacencyGraph, ClusterOptions, ClusterTest};
use periodic_stats::ingest::{components_to_csv, load_dataset, parse_components};
use periodic_stats::report::{analyze, render_text, AnalysisOptions, PostHocScheme};
use periodic_stats::simulation::{
    ci_density_panel, ci_thresholds, figures, simulate_amplitude_skew, simulate_grid, Generator,
    RateTable, SimulationSpec, TestKind,
};
use periodic_stats::{ComplexObservation, Design, StatsError};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Stats(#[from] StatsError),
    #[error("{context}: {source}")]
    Json {
        context: String,
        source: serde_json::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Stats(e) if e.is_precondition() => 3,
            _ => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "periodic-stats", version, about = "Multivariate tests for complex Fourier components of periodic data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum PostHocArg {
    Baseline,
    AllPairs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClusterTestArg {
    T2,
    T2circ,
}

#[derive(Subcommand)]
enum Command {
    /// Screen outliers, run the decision flowchart and report.
    Analyze {
        input: PathBuf,
        #[arg(long, default_value = "one_sample")]
        design: String,
        /// Comparison point as "re,im".
        #[arg(long, default_value = "0,0", allow_hyphen_values = true)]
        mu: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        no_outlier_screen: bool,
        #[arg(long, default_value_t = 3.0)]
        threshold: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        #[arg(long, value_enum, default_value = "baseline")]
        post_hoc: PostHocArg,
        /// Coverage of the amplitude error bars.
        #[arg(long, default_value_t = 0.68)]
        level: f64,
        #[arg(long, default_value_t = 10_000)]
        n_boot: usize,
    },
    /// Reproduce a simulation preset (fig2, fig3, fig4a, fig4b, fig5a,
    /// fig5b, fig6, fig7) or run a JSON spec file.
    Simulate {
        target: String,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: TableFormat,
    },
    /// Permutation cluster correction over per-node component files.
    Cluster {
        /// One components CSV per node, in node order.
        #[arg(required = true)]
        nodes: Vec<PathBuf>,
        /// Edge list, one "i j" pair per line (0-based).
        #[arg(long)]
        edges: PathBuf,
        #[arg(long, default_value = "one_sample")]
        design: String,
        #[arg(long, value_enum, default_value = "t2circ")]
        test: ClusterTestArg,
        #[arg(long, default_value_t = 1000)]
        perms: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.05)]
        alpha_forming: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a time-series file into a components file.
    Extract {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rejection rates over a grid of effect sizes and sample sizes.
    Power {
        /// Comma-separated effect sizes.
        #[arg(long, default_value = "0,0.25,0.5,1,2")]
        d: String,
        /// Comma-separated per-group sample sizes.
        #[arg(long, default_value = "4,8,16,32,64")]
        n: String,
        #[arg(long, default_value = "t2,t2circ")]
        tests: String,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        r: f64,
        #[arg(long, default_value_t = 1.0)]
        variance_ratio: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: TableFormat,
    },
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_text(path: &Path) -> CliResult<String> {
    String::from_utf8(read(path)?)
        .map_err(|_| CliError::Usage(format!("{}: not valid UTF-8", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|source| CliError::Io {
                    path: "<stdout>".into(),
                    source,
                })
        }
    }
}

fn to_json<T: Serialize>(value: &T, context: &str) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        context: context.into(),
        source,
    })?;
    s.push('\n');
    Ok(s)
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("bad {what} value '{}'", x.trim())))
        })
        .collect()
}

fn parse_mu(s: &str) -> CliResult<ComplexObservation> {
    let v: Vec<f64> = parse_list(s, "mu")?;
    match v.as_slice() {
        [re, im] if re.is_finite() && im.is_finite() => Ok(ComplexObservation::new(*re, *im)),
        _ => Err(CliError::Usage(format!("--mu must be \"re,im\", got '{s}'"))),
    }
}

fn table_text(table: &RateTable, format: TableFormat) -> CliResult<String> {
    match format {
        TableFormat::Csv => Ok(table.to_csv()),
        TableFormat::Json => to_json(table, "rate table"),
    }
}

fn rows_csv<T: Serialize>(rows: &[T]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| CliError::Usage(format!("CSV output: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Usage(format!("CSV output: {e}")))?;
    Ok(String::from_utf8(bytes).expect("utf-8"))
}

fn rows_text<T: Serialize>(rows: &[T], format: TableFormat) -> CliResult<String> {
    match format {
        TableFormat::Csv => rows_csv(rows),
        TableFormat::Json => to_json(&rows, "table"),
    }
}

#[derive(Serialize)]
struct SkewRow {
    d: f64,
    n_reps: usize,
    skewness: f64,
    mean_amplitude: f64,
}

const FIG2_EFFECTS: [f64; 6] = [0.0, 0.5, 1.0, 2.0, 3.0, 4.0];
const FIG5_SIZES: [usize; 10] = [3, 4, 5, 6, 8, 10, 16, 24, 32, 64];

fn simulate(target: &str, reps: usize, seed: u64, format: TableFormat) -> CliResult<String> {
    let grid = |specs: Vec<SimulationSpec>| -> CliResult<String> {
        table_text(&simulate_grid(&specs)?, format)
    };
    match target {
        "fig2" => {
            let rows = FIG2_EFFECTS
                .iter()
                .map(|&d| {
                    let s = simulate_amplitude_skew(d, reps, seed)?;
                    Ok(SkewRow {
                        d,
                        n_reps: reps,
                        skewness: s.skewness,
                        mean_amplitude: s.amplitudes.iter().sum::<f64>() / reps as f64,
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            rows_text(&rows, format)
        }
        "fig3" => grid(figures::power_one_sample(reps, seed)),
        "fig4a" => grid(figures::type1_correlation(reps, seed)),
        "fig4b" => grid(figures::type1_variance_ratio(reps, seed)),
        "fig5a" => rows_text(&ci_density_panel(4, reps, seed, 60, 16.0)?, format),
        "fig5b" => rows_text(&ci_thresholds(&FIG5_SIZES, 0.95, reps, seed)?, format),
        "fig6" => grid(figures::outlier_sensitivity(reps, seed)),
        "fig7" => grid(figures::power_three_groups(reps, seed)),
        path => {
            let text = read_text(Path::new(path)).map_err(|e| match e {
                CliError::Io { .. } => CliError::Usage(format!(
                    "'{path}' is neither a known preset nor a readable spec file"
                )),
                other => other,
            })?;
            // a single spec or a list of specs; --reps and --seed do not
            // override what the file says
            let specs: Vec<SimulationSpec> = match serde_json::from_str::<Vec<SimulationSpec>>(&text) {
                Ok(v) => v,
                Err(_) => vec![serde_json::from_str(&text).map_err(|source| CliError::Json {
                    context: format!("spec file {path}"),
                    source,
                })?],
            };
            grid(specs)
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Analyze {
            input,
            design,
            mu,
            alpha,
            no_outlier_screen,
            threshold,
            seed,
            format,
            post_hoc,
            level,
            n_boot,
        } => {
            let bytes = read(&input)?;
            let hash = format!("{:x}", Sha256::digest(&bytes));
            let text = String::from_utf8(bytes)
                .map_err(|_| CliError::Usage(format!("{}: not valid UTF-8", input.display())))?;
            let design: Design = design.parse()?;
            let dataset = load_dataset(&text, design, parse_mu(&mu)?)?;
            let opts = AnalysisOptions {
                alpha,
                screen_outliers: !no_outlier_screen,
                threshold,
                seed,
                post_hoc: match post_hoc {
                    PostHocArg::Baseline => PostHocScheme::Baseline,
                    PostHocArg::AllPairs => PostHocScheme::AllPairs,
                },
                amplitude_level: level,
                n_boot,
            };
            let report = analyze(&dataset, &opts, hash)?;
            let out = match format {
                Format::Json => to_json(&report, "report")?,
                Format::Text => render_text(&report),
            };
            emit(None, &out)
        }
        Command::Simulate {
            target,
            reps,
            seed,
            out,
            format,
        } => emit(out.as_deref(), &simulate(&target, reps, seed, format)?),
        Command::Cluster {
            nodes,
            edges,
            design,
            test,
            perms,
            seed,
            alpha_forming,
            out,
        } => {
            let design: Design = design.parse()?;
            let data = nodes
                .iter()
                .map(|p| {
                    load_dataset(&read_text(p)?, design, ComplexObservation::ZERO).map_err(|e| {
                        match e {
                            StatsError::Parse { line, message } => CliError::Usage(format!(
                                "{}: line {line}: {message}",
                                p.display()
                            )),
                            other => CliError::Stats(other),
                        }
                    })
                })
                .collect::<CliResult<Vec<_>>>()?;
            let graph = AdjacencyGraph::parse_edge_list(&read_text(&edges)?, data.len())?;
            let opts = ClusterOptions {
                test: match test {
                    ClusterTestArg::T2 => ClusterTest::T2,
                    ClusterTestArg::T2circ => ClusterTest::T2circ,
                },
                alpha_forming,
                n_perm: perms,
                seed,
            };
            let result = cluster_correct(&data, &graph, &opts)?;
            emit(out.as_deref(), &to_json(&result, "cluster result")?)
        }
        Command::Extract { input, out } => {
            let rows = parse_components(&read_text(&input)?)?;
            emit(out.as_deref(), &components_to_csv(&rows))
        }
        Command::Power {
            d,
            n,
            tests,
            k,
            r,
            variance_ratio,
            alpha,
            reps,
            seed,
            out,
            format,
        } => {
            let ds: Vec<f64> = parse_list(&d, "d")?;
            let ns: Vec<usize> = parse_list(&n, "n")?;
            let tests: Vec<TestKind> = tests
                .split(',')
                .map(|t| t.trim().parse())
                .collect::<Result<_, StatsError>>()?;
            let mut specs = Vec::new();
            for &n in &ns {
                for &d in &ds {
                    for &test in &tests {
                        let generator = Generator {
                            r,
                            variance_ratio,
                            ..Generator::spherical(d, n, k)
                        };
                        specs.push(SimulationSpec {
                            alpha,
                            ..SimulationSpec::new(generator, test, reps, seed)
                        });
                    }
                }
            }
            emit(out.as_deref(), &table_text(&simulate_grid(&specs)?, format)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
