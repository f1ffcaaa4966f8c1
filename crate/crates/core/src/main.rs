use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ptmoments::estimators::Strategy;
use ptmoments::runner::{
    read_json, run_experiment, verify, write_csv, write_json, write_outputs, ExperimentConfig,
    ExperimentOutput, StateSpec,
};
use ptmoments::states::{exact_esp, exact_pt_moment, first_violated_order, werner_pt_spectrum};

#[derive(Parser)]
#[command(
    name = "ptmoments",
    version,
    about = "Streaming PT-moment estimation and entanglement certification"
)]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a JSON config, with flag overrides.
    Run(Box<RunArgs>),
    /// Print exact PT moments, ESPs and the first violated order of a Werner state.
    Oracle(OracleArgs),
    /// Run the built-in consistency battery.
    Verify,
    /// Re-emit the traces of a results.json file.
    Export(ExportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shots: Option<usize>,
    /// Comma-separated moment orders, e.g. 2,3,4.
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<usize>>,
    /// Comma-separated strategies: ustat, plugin, batched, online-norecon, online-recon.
    #[arg(long, value_delimiter = ',')]
    strategy: Option<Vec<Strategy>>,
    /// Output directory for traces.csv and results.json.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    /// Werner state qubit count (with --t).
    #[arg(long, requires = "t", conflicts_with = "matrix")]
    n_qubits: Option<usize>,
    #[arg(long, requires = "n_qubits")]
    t: Option<f64>,
    /// Density matrix JSON file.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Comma-separated qubits of subsystem B.
    #[arg(long, value_delimiter = ',')]
    bipartition: Option<Vec<usize>>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    target_order: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    batches: Option<usize>,
    #[arg(long)]
    stop_early: bool,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    n_qubits: usize,
    #[arg(long)]
    t: f64,
    #[arg(long, default_value_t = 6)]
    max_order: u32,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

#[derive(Args)]
struct ExportArgs {
    /// A results.json written by `run`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

fn build_config(a: RunArgs) -> ptmoments::Result<ExperimentConfig> {
    let mut c = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let (Some(n_qubits), Some(t)) = (a.n_qubits, a.t) {
        c.state = StateSpec::Werner { n_qubits, t };
    }
    if let Some(path) = a.matrix {
        c.state = StateSpec::MatrixFile { path };
    }
    macro_rules! set {
        ($($field:expr => $value:expr),* $(,)?) => {
            $(if let Some(v) = $value { $field = v; })*
        };
    }
    set!(
        c.seed => a.seed,
        c.shots => a.shots,
        c.orders => a.orders,
        c.strategies => a.strategy,
        c.runs => a.runs,
        c.stopping.tolerance => a.tolerance,
        c.stopping.window => a.window,
        c.batches => a.batches,
    );
    if a.bipartition.is_some() {
        c.bipartition = a.bipartition;
    }
    if a.target_order.is_some() {
        c.stopping.target_order = a.target_order;
    }
    if a.stride.is_some() {
        c.stride = a.stride;
    }
    if a.out.is_some() {
        c.out = a.out;
    }
    c.stopping.stop_early |= a.stop_early;
    Ok(c)
}

fn print_summary(out: &ExperimentOutput) {
    println!(
        "run strategy        stop_shot  evaluated_at  detected  first_negative_k  descartes_bound"
    );
    for s in &out.summaries {
        println!(
            "{:<3} {:<15} {:>9}  {:>12}  {:>8}  {:>16}  {:>15}",
            s.run_id,
            s.strategy.name(),
            s.stopping_shot.map_or("-".into(), |v| v.to_string()),
            s.evaluated_at,
            if s.detected { "yes" } else { "no" },
            s.verdict
                .first_negative_k
                .map_or("-".into(), |k| k.to_string()),
            s.verdict.descartes_upper_bound,
        );
    }
    if let Some(k) = out.summaries.first().and_then(|s| s.exact_first_negative_k) {
        println!("exact first negative e_k: k = {k}");
    }
}

fn oracle(a: &OracleArgs) -> ptmoments::Result<()> {
    let spec = werner_pt_spectrum(a.n_qubits, a.t)?;
    let moments: Vec<f64> = (1..=a.max_order)
        .map(|k| exact_pt_moment(&spec, k))
        .collect::<ptmoments::Result<_>>()?;
    let esps: Vec<f64> = (1..=a.max_order)
        .map(|k| exact_esp(&spec, k))
        .collect::<ptmoments::Result<_>>()?;
    let first = first_violated_order(a.n_qubits, a.t)?;
    if a.json {
        let doc = serde_json::json!({
            "n_qubits": a.n_qubits,
            "t": a.t,
            "spectrum": spec,
            "moments": moments,
            "esp": esps,
            "first_violated_order": first,
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
        return Ok(());
    }
    println!("Werner state, N = {}, t = {}", a.n_qubits, a.t);
    println!(
        "PT spectrum: {} (x1), {} (x{})",
        spec.lambda_minus,
        spec.lambda_plus,
        spec.multiplicity_plus()
    );
    println!("k  p_k                     e_k");
    for k in 0..a.max_order as usize {
        println!("{:<2} {:<23} {}", k + 1, moments[k], esps[k]);
    }
    match first {
        Some(k) => println!("first violated order: {k}"),
        None => println!("first violated order: none (PPT)"),
    }
    Ok(())
}

fn run(cli: Cli) -> ptmoments::Result<bool> {
    match cli.command {
        Command::Run(args) => {
            let config = build_config(*args)?;
            let out = run_experiment(&config)?;
            print_summary(&out);
            if let Some(dir) = &config.out {
                let (c, j) = write_outputs(&out, dir)?;
                println!("wrote {} and {}", c.display(), j.display());
            }
            Ok(true)
        }
        Command::Oracle(args) => oracle(&args).map(|_| true),
        Command::Verify => {
            let checks = verify::run_battery();
            for c in &checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("{tag}  {}: {}", c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
        Command::Export(args) => {
            let out = read_json(&args.input)?;
            std::fs::create_dir_all(&args.out)?;
            if matches!(args.format, Format::Csv | Format::Both) {
                write_csv(&out, args.out.join("traces.csv"))?;
            }
            if matches!(args.format, Format::Json | Format::Both) {
                write_json(&out, args.out.join("results.json"))?;
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
