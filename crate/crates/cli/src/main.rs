use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use higgs_core::pipeline::{run_scenario, Fault, RunOptions, RunOutput};
use higgs_core::report;
use higgs_core::scenario::{self, Scenario};
use higgs_core::LabError;

const EXIT_INVARIANT: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "higgs-lab", version, about = "Higgs bundles on flat tori: HYM metrics, Petersson-Weil geometry and the hyperkähler checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario's tasks and write report.json plus CSV tables.
    Run(RunArgs),
    /// Run every task and print the verification table.
    Verify(RunArgs),
    /// List the bundled scenarios.
    ListScenarios,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario TOML file, or the name of a bundled scenario.
    #[arg(long)]
    scenario: String,
    /// Output directory (required for `run`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the stencil solves.
    #[arg(long)]
    threads: Option<usize>,
    /// Override a solver setting, e.g. `tol_hym=1e-9`. Repeatable.
    #[arg(long = "tol-override", value_name = "KEY=VAL")]
    tol_override: Vec<String>,
    /// Debugging aid: deliberately break one operator.
    #[arg(long = "inject-fault", value_name = "NAME", hide = true)]
    inject_fault: Option<Fault>,
}

enum Failure {
    Config(String),
    Invariant(String),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Scenario(_) | LabError::Geometry(_) | LabError::Output(_) | LabError::Io(_) => Failure::Config(e.to_string()),
            other => Failure::Invariant(other.to_string()),
        }
    }
}

fn load(spec: &str) -> Result<Scenario, Failure> {
    let path = Path::new(spec);
    if path.exists() {
        return Ok(Scenario::load(path)?);
    }
    scenario::bundled(spec).ok_or_else(|| {
        let names: Vec<&str> = scenario::BUNDLED.iter().map(|(n, _)| *n).collect();
        Failure::Config(format!("no scenario file {spec:?} and no bundled scenario of that name (bundled: {})", names.join(", ")))
    })
}

fn prepare(args: &RunArgs) -> Result<Scenario, Failure> {
    let mut sc = load(&args.scenario)?;
    for kv in &args.tol_override {
        sc.apply_override(kv)?;
    }
    if let Some(k) = args.threads {
        if k == 0 {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    Ok(sc)
}

fn execute(args: &RunArgs, all_tasks: bool) -> Result<RunOutput, Failure> {
    let sc = prepare(args)?;
    let opts = RunOptions { seed: args.seed, fault: args.inject_fault, all_tasks };
    let out = run_scenario(&sc, &opts)?;
    if let Some(dir) = &args.out {
        let files = report::write_outputs(&out, dir)?;
        eprintln!("wrote {} files to {}", files.len(), dir.display());
    }
    Ok(out)
}

fn print_table(out: &RunOutput) {
    println!("{:<6} {:<22} {:<56} {:>12} {:>12}  note", "status", "tag", "check", "residual", "tolerance");
    for r in &out.rows {
        let status = match (r.pass, r.applicable) {
            (false, _) => "FAIL",
            (true, true) => "ok",
            (true, false) => "n/a",
        };
        println!("{:<6} {:<22} {:<56} {:>12.3e} {:>12.3e}  {}", status, r.tag, r.check, r.residual, r.tolerance, r.note);
    }
}

fn summary(out: &RunOutput) -> String {
    let failed = out.rows.iter().filter(|r| !r.pass).count();
    format!(
        "{}: {} checks, {} failed, λ = {:.6e}, flow {} steps to {:.3e}",
        out.scenario.name,
        out.rows.len(),
        failed,
        out.lambda,
        out.flow.iterations,
        out.flow.residual_sup
    )
}

fn finish(out: &RunOutput) -> ExitCode {
    if out.all_pass() {
        ExitCode::SUCCESS
    } else {
        for r in out.rows.iter().filter(|r| !r.pass) {
            eprintln!("FAIL {} {}: {:.3e} > {:.3e}", r.tag, r.check, r.residual, r.tolerance);
        }
        ExitCode::from(EXIT_INVARIANT)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::ListScenarios => {
            for (name, text) in scenario::BUNDLED {
                let desc = Scenario::from_toml(text).map(|s| s.description).unwrap_or_default();
                println!("{name:<24} {desc}");
            }
            return ExitCode::SUCCESS;
        }
        Command::Run(args) => {
            if args.out.is_none() {
                eprintln!("error: run needs --out DIR");
                return ExitCode::from(EXIT_CONFIG);
            }
            execute(args, false).inspect(|out| println!("{}", summary(out)))
        }
        Command::Verify(args) => execute(args, true).inspect(|out| {
            print_table(out);
            println!("{}", summary(out));
        }),
    };
    match result {
        Ok(out) => finish(&out),
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Invariant(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVARIANT)
        }
    }
}
