use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cranest::channel::{draw_realization, write_channel_dump, BemCoefficients};
use cranest::estimator::{analytic_mse_g, crb};
use cranest::harness::{
    aggregate, emit_csv, parse_snr_points, run_sweep_records, verify, HarnessError, Method,
    Restorer, SweepConfig, TrialContext, VerifyOptions,
};
use cranest::numerics::{Purpose, RngStream};
use cranest::restoration::aesnr_theoretical;
use cranest::{ConfigError, SystemParams, C64};

#[derive(Parser)]
#[command(
    version,
    about = "Joint access/backhaul channel estimation simulator for uplink C-RAN"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set q_order=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo SNR sweep; writes mse.csv and aesnr.csv.
    Sweep {
        /// Comma list or start:step:stop in dB.
        #[arg(long, default_value = "0:5:30")]
        snr: String,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (defaults to the number of CPUs).
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_delimiter = ',', default_value = "map,ml")]
        methods: Vec<Method>,
        #[arg(long, value_delimiter = ',', default_value = "owa,baseline")]
        restorers: Vec<Restorer>,
        /// Also write the channel realizations of the first SNR point.
        #[arg(long, value_name = "FILE")]
        dump_channels: Option<PathBuf>,
        /// Number of trials included in the channel dump.
        #[arg(long, default_value_t = 10)]
        dump_limit: usize,
    },
    /// Run the property checks and print measured values.
    Verify {
        /// Operating point in dB; defaults to the configured P_s/σ².
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
    },
    /// Print CRBs, analytic g-MSEs and weight summaries per SNR.
    Crb {
        #[arg(long, default_value = "0:5:30")]
        snr: String,
    },
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(c) => c.into(),
            HarnessError::InvalidSweep(m) => Failure::Config(m),
            other => Failure::Run(other.to_string()),
        }
    }
}

fn load_params(common: &Common) -> Result<SystemParams, Failure> {
    let mut params = SystemParams::default();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
        params.apply_config_text(&text)?;
    }
    for kv in &common.overrides {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("override `{kv}` is not KEY=VALUE")))?;
        params.set(key.trim(), value.trim())?;
    }
    if let Some(seed) = common.seed {
        params.seed = seed;
    }
    params.validate()?;
    Ok(params)
}

fn snr_list(text: &str) -> Result<Vec<f64>, Failure> {
    parse_snr_points(text).map_err(Failure::Config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = load_params(&cli.common).and_then(|p| run(cli.command, p));
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command, params: SystemParams) -> Result<bool, Failure> {
    match command {
        Command::Sweep {
            snr,
            trials,
            out,
            workers,
            methods,
            restorers,
            dump_channels,
            dump_limit,
        } => {
            let sweep = SweepConfig {
                snr_points_db: snr_list(&snr)?,
                trials_per_point: trials,
                methods,
                restorers,
                output_path: out.display().to_string(),
                workers: workers.unwrap_or(SweepConfig::default().workers),
            };
            let points = run_sweep_records(&sweep, &params)?;
            let result = aggregate(&points, &sweep)?;
            emit_csv(&result, Path::new(&sweep.output_path))?;
            if let Some(path) = dump_channels {
                dump(&params, &sweep, &path, dump_limit)?;
            }
            for row in &result.mse {
                println!(
                    "{:>6.1} dB  {:<3}  BL {:.4e}  AL coeff {:.4e}  AL time {:.4e}  singular {}",
                    row.snr_db,
                    row.method,
                    row.mse_bl,
                    row.mse_al_coeff,
                    row.mse_al_time,
                    row.ml_singular_count
                );
            }
            for row in &result.aesnr {
                println!(
                    "{:>6.1} dB  {:<8}  AESNR emp {:.4e}  theory {:.4e}",
                    row.snr_db, row.restorer, row.aesnr_emp, row.aesnr_theory
                );
            }
            println!("wrote {}", sweep.output_path);
            Ok(true)
        }
        Command::Verify { snr, trials } => {
            let p = match snr {
                Some(s) => params.at_snr_db(s),
                None => params,
            }
            .validate()?;
            let opts = VerifyOptions {
                trials,
                ..VerifyOptions::default()
            };
            let report = verify(&p, opts)?;
            print!("{report}");
            Ok(report.all_passed())
        }
        Command::Crb { snr } => {
            println!("snr_db,alpha,v_n,crb_lambda,crb_g,mse_g_map,mse_g_ml,max_eta_dev,aesnr_owa,aesnr_baseline");
            for s in snr_list(&snr)? {
                let ctx = TrialContext::at_snr(&params, s)?;
                let m = &ctx.model;
                // mean-channel operating point: |g|² = υ_g, ‖λ‖² = υ_h
                let mut lam = vec![C64::new(0.0, 0.0); m.n_coeffs()];
                lam[m.q_order] = C64::new(m.v_h.sqrt(), 0.0);
                let lam = BemCoefficients::new(
                    cranest::CVec::new(lam).map_err(|e| Failure::Run(e.to_string()))?,
                )
                .map_err(|e| Failure::Run(e.to_string()))?;
                let bounds = crb(m, C64::new(m.v_g.sqrt(), 0.0), &lam)
                    .map_err(|e| Failure::Run(e.to_string()))?;
                let g_mse = analytic_mse_g(m, &lam);
                let dev = ctx
                    .eta_star
                    .iter()
                    .map(|e| (e - 1.0).abs())
                    .fold(0.0, f64::max);
                let ones = vec![1.0; ctx.eta_star.len()];
                let th =
                    |eta: &[f64]| aesnr_theoretical(eta, &ctx.weights).map_err(HarnessError::from);
                println!(
                    "{s},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}",
                    m.alpha,
                    m.v_n,
                    bounds.crb_lambda[0],
                    bounds.crb_g,
                    g_mse.map,
                    g_mse.ml,
                    dev,
                    th(&ctx.eta_star)?,
                    th(&ones)?
                );
            }
            Ok(true)
        }
    }
}

fn dump(
    params: &SystemParams,
    sweep: &SweepConfig,
    path: &Path,
    limit: usize,
) -> Result<(), Failure> {
    let ctx = TrialContext::at_snr(params, sweep.snr_points_db[0])?;
    let seed = ctx.params.seed();
    let reals: Vec<_> = (0..limit.min(sweep.trials_per_point))
        .map(|t| {
            let mut rng = RngStream::new(seed, t as u64, Purpose::Channel);
            draw_realization(&ctx.params, &ctx.basis, &mut rng)
        })
        .collect();
    let indexed: Vec<_> = reals.iter().enumerate().collect();
    let file = File::create(path).map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
    write_channel_dump(file, &indexed).map_err(|e| Failure::Run(e.to_string()))
}
