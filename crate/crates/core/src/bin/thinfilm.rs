use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use thinfilm::scenarios::config::{parse_override, Scenario, ScenarioConfig};
use thinfilm::scenarios::runners::{self, MeshMethod};
use thinfilm::Error;

/// Moving-mesh thin film flow experiments.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// `key = value` configuration file applied before the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory for CSV and VTK files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    params: Params,
    #[command(subcommand)]
    command: Command,
}

/// Scenario parameters. Unset flags keep the scenario's defaults.
#[derive(Args, Debug, Default)]
struct Params {
    /// Initial mesh size.
    #[arg(long, global = true)]
    h: Option<f64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Final time.
    #[arg(long = "T", global = true)]
    t_end: Option<f64>,
    /// arclength or curvature.
    #[arg(long, global = true)]
    monitor: Option<String>,
    /// Adaptivity parameter κ in [0, 1).
    #[arg(long, global = true)]
    kappa: Option<f64>,
    #[arg(long, global = true)]
    sigma_xi: Option<f64>,
    #[arg(long, global = true)]
    sigma_eta: Option<f64>,
    #[arg(long, global = true)]
    beta: Option<f64>,
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    u_minus: Option<f64>,
    #[arg(long, global = true)]
    u_plus: Option<f64>,
    /// Finger perturbation amplitude A₀.
    #[arg(long, global = true)]
    amplitude: Option<f64>,
    /// Finger perturbation wavelength λ₀.
    #[arg(long, global = true)]
    wavelength: Option<f64>,
    /// Frame speed (default: Rankine–Hugoniot speed of u₋, u₊).
    #[arg(long, global = true)]
    speed: Option<f64>,
    /// direct or sweeps:K for the preconditioner's inner solves.
    #[arg(long, global = true)]
    inner: Option<String>,
    /// Steps between snapshots (0 disables).
    #[arg(long, global = true)]
    snapshot_every: Option<usize>,
    /// Run on the fixed initial mesh.
    #[arg(long, global = true, conflicts_with = "moving")]
    fixed: bool,
    /// Move the mesh.
    #[arg(long, global = true)]
    moving: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spatial convergence study of the linear test problem.
    Converge {
        /// Include the finest level (h/8).
        #[arg(long)]
        finest: bool,
        /// Comma-separated subset of fixed, arclength, curvature.
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
    },
    /// Traveling-wave cases 1 to 3.
    Tw {
        #[arg(long, default_value_t = 1)]
        case: u32,
    },
    /// Fingering instability of a perturbed front.
    Finger,
    /// Static mesh adaptation to a sharp test function.
    Meshdemo,
}

impl Params {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        let mut v = Vec::new();
        let mut put = |k: &'static str, x: Option<String>| {
            if let Some(x) = x {
                v.push((k, x));
            }
        };
        put("h", self.h.map(|x| x.to_string()));
        put("dt", self.dt.map(|x| x.to_string()));
        put("T", self.t_end.map(|x| x.to_string()));
        put("monitor", self.monitor.clone());
        put("kappa", self.kappa.map(|x| x.to_string()));
        put("sigma_xi", self.sigma_xi.map(|x| x.to_string()));
        put("sigma_eta", self.sigma_eta.map(|x| x.to_string()));
        put("beta", self.beta.map(|x| x.to_string()));
        put("gamma", self.gamma.map(|x| x.to_string()));
        put("u_minus", self.u_minus.map(|x| x.to_string()));
        put("u_plus", self.u_plus.map(|x| x.to_string()));
        put("amplitude", self.amplitude.map(|x| x.to_string()));
        put("wavelength", self.wavelength.map(|x| x.to_string()));
        put("speed", self.speed.map(|x| x.to_string()));
        put("inner", self.inner.clone());
        put("snapshot_every", self.snapshot_every.map(|x| x.to_string()));
        put("moving", self.fixed.then(|| "false".to_string()));
        put("moving", self.moving.then(|| "true".to_string()));
        v
    }
}

fn build_config(cli: &Cli, scenario: Scenario) -> Result<ScenarioConfig, Error> {
    let mut cfg = match &cli.config {
        Some(p) => ScenarioConfig::load(p, Some(scenario))?,
        None => ScenarioConfig::defaults(scenario),
    };
    if cfg.scenario != scenario {
        return Err(Error::Config(format!(
            "config file is for '{}' but the command runs '{scenario}'",
            cfg.scenario
        )));
    }
    for (k, v) in cli.params.pairs() {
        cfg.set(k, &v)?;
    }
    for o in &cli.overrides {
        let (k, v) = parse_override(o)?;
        cfg.set(&k, &v)?;
    }
    if cfg.out_dir.is_none() {
        cfg.out_dir = Some(cli.out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn method_from(name: &str) -> Result<MeshMethod, Error> {
    MeshMethod::ALL
        .into_iter()
        .find(|m| m.name() == name)
        .ok_or_else(|| Error::Config(format!("unknown method '{name}'")))
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Converge { finest, methods } => {
            let mut cfg = build_config(cli, Scenario::Converge)?;
            cfg.finest |= *finest;
            let methods = if methods.is_empty() {
                MeshMethod::ALL.to_vec()
            } else {
                methods.iter().map(|m| method_from(m)).collect::<Result<_, _>>()?
            };
            println!("method,h,nodes,l2_error,order");
            for r in runners::run_convergence(&cfg, &methods)? {
                let order = r.order.map_or(String::new(), |o| format!("{o:.4}"));
                println!("{},{},{},{:.4e},{order}", r.method.name(), r.h, r.nodes, r.l2_error);
            }
        }
        Command::Tw { case } => {
            let cfg = build_config(cli, Scenario::tw_case(*case)?)?;
            let run = runners::run_tw(&cfg)?;
            println!("speed {:.6}", run.speed);
            println!("nodes {}", run.nodes);
            if let Some(last) = run.history.last() {
                println!("front {:.6} at t = {}", last.front, last.t);
            }
            println!("front drift over second half {:.4e}", run.front_drift(0.5 * cfg.t_end));
            if let Some(p) = run.final_plateau() {
                let (sc, suc) = runners::plateau_speeds(&cfg, p)?;
                println!("plateau {p:.4} (wave speeds {sc:.4}, {suc:.4})");
            }
            if cfg.scenario == Scenario::Tw1 {
                let oracle = runners::tw_oracle(&cfg)?;
                let (d, shift) = runners::tw_distance(&run, &oracle);
                println!("distance to traveling wave {d:.4e} (shift {shift:.4})");
            }
        }
        Command::Finger => {
            let cfg = build_config(cli, Scenario::Finger)?;
            let run = runners::run_finger(&cfg)?;
            println!("speed {:.6}", run.speed);
            println!("t,tip,root,gap,min_u,oscillation");
            for s in &run.samples {
                println!("{},{:.4},{:.4},{:.4},{:.4},{:.4e}", s.t, s.tip, s.root, s.gap, s.min_u, s.oscillation);
            }
        }
        Command::Meshdemo => {
            let cfg = build_config(cli, Scenario::Meshdemo)?;
            let r = runners::run_meshdemo(&cfg)?;
            println!("converged {} (delta_xi {:.3e})", r.converged, r.delta_xi);
            println!("x ratios [{:.4}, {:.4}]", r.x_ratios.min(), r.x_ratios.max());
            println!("z ratios [{:.4}, {:.4}]", r.z_ratios.min(), r.z_ratios.max());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
