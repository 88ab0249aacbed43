use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use netadapt::linalg::Matrix;
use netadapt::network::SensorNetwork;
use netadapt::scenario::bench::{self, BenchSpec};
use netadapt::scenario::report::{emit_report, render_text};
use netadapt::scenario::{parse_config, run_scenario, analyze_scenario, Mode, RunOptions, ScenarioConfig};

/// Overrides the output directory when `--out` is absent.
const OUT_DIR_ENV: &str = "NETADAPT_OUT_DIR";

#[derive(Parser)]
#[command(name = "netadapt", version, about = "Distributed adaptive estimation over directed sensor networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stability checks and certificates only.
    Analyze(ScenarioArgs),
    /// Full pipeline: analysis, simulation, evaluation and emission.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Simulate even when the coupling operator is unstable.
        #[arg(long)]
        force_unstable: bool,
    },
    /// Time the reference simulation over topologies and sizes.
    Bench {
        #[arg(long, default_value = "discrete")]
        mode: String,
        #[arg(long, value_delimiter = ',', default_value = "100,150,200,300")]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "star,cyclic,path")]
        topologies: Vec<String>,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Directory for bench.csv and bench.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the weight matrices of the built-in topologies.
    Topologies {
        #[arg(long, default_value_t = 4)]
        m: usize,
    },
}

#[derive(clap::Args)]
struct ScenarioArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; takes precedence over NETADAPT_OUT_DIR and run.out_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

fn load(args: &ScenarioArgs) -> Result<ScenarioConfig, String> {
    let text = fs::read_to_string(&args.config).map_err(|e| format!("config stage failed: {}: {e}", args.config.display()))?;
    let mut cfg = parse_config(&text).map_err(|e| format!("config stage failed: {e}"))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(args: &ScenarioArgs, cfg: &ScenarioConfig) -> Option<PathBuf> {
    args.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| cfg.out_dir.clone())
}

fn print_matrix(label: &str, a: &Matrix) {
    println!("{label}");
    for r in 0..a.rows() {
        let row: Vec<String> = a.row(r).iter().map(|v| format!("{v:6.3}")).collect();
        println!("  {}", row.join(" "));
    }
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<(), String> {
    let path = dir.join(name);
    fs::create_dir_all(dir)
        .and_then(|_| fs::write(&path, contents))
        .map_err(|e| format!("emit stage failed: {}: {e}", path.display()))
}

fn execute(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Analyze(args) => {
            let cfg = load(&args)?;
            let report = analyze_scenario(&cfg).map_err(|e| e.to_string())?;
            print!("{}", render_text(&report));
            if let Some(dir) = out_dir(&args, &cfg) {
                fs::create_dir_all(&dir).map_err(|e| format!("emit stage failed: {}: {e}", dir.display()))?;
                emit_report(&report, &dir).map_err(|e| format!("emit stage failed: {e}"))?;
            }
        }
        Command::Run { scenario, force_unstable } => {
            let cfg = load(&scenario)?;
            let opts = RunOptions {
                force_unstable,
                out_dir: out_dir(&scenario, &cfg),
            };
            let outcome = run_scenario(&cfg, &opts).map_err(|e| e.to_string())?;
            print!("{}", render_text(&outcome.report));
        }
        Command::Bench {
            mode,
            sizes,
            topologies,
            repeats,
            threads,
            seed,
            out,
        } => {
            let mode: Mode = mode
                .parse()
                .map_err(|_| format!("config stage failed: unknown mode '{mode}'"))?;
            let spec = BenchSpec {
                mode,
                topologies,
                sizes,
                repeats,
                threads,
                seed,
            };
            let rows = bench::timing_benchmark(&spec).map_err(|e| e.to_string())?;
            let table = bench::render_bench_table(mode, &rows);
            print!("{table}");
            for (t, ratio) in bench::scaling_ratios(&rows) {
                println!("{t}: t(max m)/t(min m) = {ratio:.3}");
            }
            if let Some(dir) = out.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from)) {
                let mut csv = Vec::new();
                bench::write_bench_csv(&rows, &mut csv).expect("in-memory write");
                write_out(&dir, "bench.csv", &String::from_utf8(csv).expect("ascii csv"))?;
                write_out(&dir, "bench.txt", &table)?;
            }
        }
        Command::Topologies { m } => {
            if m == 0 {
                return Err("network stage failed: m must be at least 1".into());
            }
            for (name, net) in [
                ("star", SensorNetwork::star(m)),
                ("cyclic", SensorNetwork::cyclic(m)),
                ("path", SensorNetwork::path(m)),
            ] {
                println!("{name} (m={m})");
                print_matrix("sensing weights A_m:", net.sensing_weights());
                print_matrix("source weights A_0:", &Matrix::column(net.source_weights()));
                println!();
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
