use clap::{Args, Parser, Subcommand};
use homlab_cli::config::{builtin_configs, find_config, Monitor, RunConfig, SCHEMA};
use homlab_cli::registry::Registry;
use homlab_cli::runner::{exit_code_for, run};
use homlab_core::cell::clear_cache;
use homlab_core::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "homlab", version, about = "Periodic homogenization laboratory")]
struct Cli {
    /// Output root for reports and the corrector cache.
    #[arg(long, global = true, env = "HOMLAB_OUT")]
    out: Option<PathBuf>,
    /// Directory of user scenario files; defaults to <out>/scenarios.
    #[arg(long, global = true)]
    scenarios: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the monitors of a configuration.
    Run(RunArgs),
    /// List builtin and user scenarios, and the builtin configurations.
    ListScenarios,
    /// Print the JSON schema of run configurations.
    ShowConfigSchema,
    /// Delete cached correctors.
    ClearCache,
}

#[derive(Args)]
struct RunArgs {
    /// Builtin configuration name or path to a JSON file.
    #[arg(long)]
    config: Option<String>,
    /// Scenario id; required without --config.
    #[arg(long)]
    scenario: Option<String>,
    /// Comma-separated ε values.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Mesh points per ε (h = ε / kappa).
    #[arg(long)]
    kappa: Option<f64>,
    /// Comma-separated monitor names.
    #[arg(long, value_delimiter = ',')]
    monitors: Option<Vec<String>>,
    /// Operator order.
    #[arg(long)]
    m: Option<u32>,
    /// Hölder exponent for the excess and Hölder envelope.
    #[arg(long)]
    lambda: Option<f64>,
    /// Integrability exponent of the source and ratio monitors.
    #[arg(long)]
    p: Option<f64>,
    /// Exponent of the Lipschitz-envelope data bracket.
    #[arg(long)]
    q: Option<f64>,
    /// Hölder exponent of the boundary data, at most θ.
    #[arg(long)]
    sigma: Option<f64>,
    /// Comma-separated envelope radii.
    #[arg(long, value_delimiter = ',')]
    r_grid: Option<Vec<f64>>,
    /// Admit scales below ε (Hölder coefficients only).
    #[arg(long)]
    full_scale: bool,
    /// Seed for the smoothing-ratio inputs.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Do not read or write the corrector cache.
    #[arg(long)]
    no_cache: bool,
}

fn load_config(args: &RunArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(name) => match find_config(name) {
            Some(cfg) => cfg,
            None => RunConfig::load(Path::new(name))?,
        },
        None => {
            let scenario = args.scenario.clone().ok_or_else(|| Error::ConfigInvalid("give --config or --scenario".into()))?;
            RunConfig::new(&scenario, vec![], vec![])
        }
    };
    if let Some(s) = &args.scenario {
        cfg.scenario = s.clone();
    }
    if let Some(e) = &args.eps {
        cfg.eps = e.clone();
    }
    if let Some(list) = &args.monitors {
        cfg.monitors = list.iter().map(|s| Monitor::parse(s)).collect::<Result<_, _>>()?;
    }
    if let Some(g) = &args.r_grid {
        cfg.r_grid = Some(g.clone());
    }
    cfg.kappa = args.kappa.unwrap_or(cfg.kappa);
    cfg.m = args.m.or(cfg.m);
    cfg.lambda = args.lambda.unwrap_or(cfg.lambda);
    cfg.p = args.p.unwrap_or(cfg.p);
    cfg.q = args.q.unwrap_or(cfg.q);
    cfg.sigma = args.sigma.unwrap_or(cfg.sigma);
    cfg.seed = args.seed.unwrap_or(cfg.seed);
    cfg.workers = args.workers.or(cfg.workers);
    cfg.full_scale |= args.full_scale;
    cfg.cache &= !args.no_cache;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let root = cli.out.clone().unwrap_or_else(|| PathBuf::from("homlab-out"));
    let user_dir = cli.scenarios.clone().unwrap_or_else(|| root.join("scenarios"));
    let code = match cli.command {
        Command::ListScenarios => {
            print!("{}", Registry::load(Some(&user_dir)).listing());
            println!();
            println!("configs:");
            for (name, cfg) in builtin_configs() {
                let monitors: Vec<&str> = cfg.monitors.iter().map(|m| m.name()).collect();
                println!("  {name:<28} {} [{}]", cfg.scenario, monitors.join(", "));
            }
            0
        }
        Command::ShowConfigSchema => {
            print!("{SCHEMA}");
            0
        }
        Command::ClearCache => match clear_cache(&root.join("cache")) {
            Ok(n) => {
                println!("removed {n} cached corrector files");
                0
            }
            Err(e) => {
                eprintln!("error: {e}");
                3
            }
        },
        Command::Run(args) => {
            let registry = Registry::load(Some(&user_dir));
            let result = load_config(&args).and_then(|cfg| {
                // An explicit --out or HOMLAB_OUT wins over the file's own setting.
                let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or(root.clone());
                run(&cfg, &registry, &out)
            });
            match result {
                Ok(summary) => summary.exit_code(),
                Err(e) => {
                    eprintln!("error: {e}");
                    exit_code_for(&e)
                }
            }
        }
    };
    ExitCode::from(code as u8)
}
