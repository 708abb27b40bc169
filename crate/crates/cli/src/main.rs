use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};

use lgs_core::hydrostatics::{cuboid_b0m, cuboid_gm, FloatingCuboid};
use lgs_core::lattice::StabilityLevel;
use lgs_core::output::OutputWriter;
use lgs_core::scenario::{self, check_config};
use lgs_core::{parse_config, Error, ScenarioConfig, ScenarioKind};

#[derive(Parser)]
#[command(name = "lgs", version, about = "Free-surface lattice Boltzmann runner with floating rigid bodies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a config file.
    Run {
        config: PathBuf,
        /// Overrides `[run] output_dir`.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Overrides `[run] steps`.
        #[arg(long)]
        steps: Option<u64>,
        /// Step on one thread.
        #[arg(long)]
        serial: bool,
    },
    /// Analytic hydrostatics curves as CSV on stdout.
    #[command(subcommand)]
    Oracle(Oracle),
    /// Parse and validate a config and run the stability checks only.
    Check { config: PathBuf },
}

#[derive(Subcommand)]
enum Oracle {
    /// Scribanti righting-moment curve of a floating cuboid.
    Cuboid(CuboidArgs),
}

#[derive(Args)]
struct CuboidArgs {
    #[arg(long)]
    b: f64,
    #[arg(long)]
    h: f64,
    #[arg(long)]
    l: f64,
    #[arg(long = "rho-s")]
    rho_s: f64,
    #[arg(long)]
    g: f64,
    #[arg(long = "alpha-max", default_value_t = 30.0)]
    alpha_max: f64,
    #[arg(long, default_value_t = 1.0)]
    step: f64,
}

fn load(path: &Path) -> Result<ScenarioConfig, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    parse_config(&text)
}

fn report_checks(cfg: &ScenarioConfig) -> StabilityLevel {
    let r = check_config(cfg);
    for m in &r.messages {
        warn!("{m}");
    }
    r.level
}

fn run(path: &Path, output: Option<PathBuf>, steps: Option<u64>, serial: bool) -> Result<(), Error> {
    let mut cfg = load(path)?;
    if let Some(o) = output {
        cfg.run.output_dir = o;
    }
    if let Some(n) = steps {
        cfg.run.steps = n;
    }
    if serial {
        cfg.run.parallel = false;
    }
    if report_checks(&cfg) == StabilityLevel::Severe {
        return Err(Error::Setup("stability check failed, see warnings".into()));
    }
    let mut w = OutputWriter::create(&cfg.run.output_dir, &cfg.to_text(), cfg.run.snapshot_every)?;
    info!("writing to {}", w.dir.display());
    match cfg.run.scenario {
        ScenarioKind::Plain => {
            let out = scenario::run_plain(&cfg, Some(&mut w))?;
            w.finish(&out.rows)?;
            out.into_result()?;
        }
        ScenarioKind::FreeAdvection => {
            let r = scenario::run_free_advection(&cfg, Some(&mut w))?;
            w.finish(&r.outcome.rows)?;
            let v = r.terminal_velocity;
            w.write_text("terminal_velocity.txt", &format!("{:.16e} {:.16e} {:.16e}\n", v[0], v[1], v[2]))?;
            println!("terminal velocity {:.6e} {:.6e} {:.6e}", v[0], v[1], v[2]);
            r.outcome.into_result()?;
        }
        ScenarioKind::Equilibrium => {
            let r = scenario::run_equilibrium_box(&cfg, Some(&mut w))?;
            w.finish(&r.outcome.rows)?;
            let mut s = String::from("body,heel_deg,draft,x,y,z,converged\n");
            for (i, b) in r.bodies.iter().enumerate() {
                s.push_str(&format!(
                    "{i},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
                    b.heel_deg, b.draft, b.position[0], b.position[1], b.position[2], r.converged
                ));
                println!("body {i}: heel {:.3} deg, draft {:.3}", b.heel_deg, b.draft);
            }
            w.write_text("equilibrium.csv", &s)?;
            if !r.converged {
                warn!("bodies still moving at the step limit");
            }
            r.outcome.into_result()?;
        }
        ScenarioKind::StabilitySweep => {
            let r = scenario::run_stability_sweep(&cfg, Some(&mut w))?;
            w.finish(&[])?;
            w.write_text("stability.csv", &r.to_csv())?;
            print!("{}", r.to_csv());
            println!("rms relative error {:.4}", r.rms_rel_error());
        }
    }
    Ok(())
}

fn oracle_cuboid(a: &CuboidArgs) -> Result<(), Error> {
    if !(a.step > 0.0 && a.alpha_max >= 0.0) {
        return Err(Error::InvalidArgument("need step > 0 and alpha-max >= 0".into()));
    }
    let c = FloatingCuboid::new(a.b, a.h, a.l, a.rho_s, a.g)?;
    println!("alpha_deg,b0m,gm,moment");
    let n = (a.alpha_max / a.step + 1e-9).floor() as usize;
    for k in 0..=n {
        let alpha = k as f64 * a.step;
        match (cuboid_b0m(&c, alpha), cuboid_gm(&c, alpha)) {
            (Ok(b0m), Ok(gm)) => {
                let m = c.rho * c.g * c.displaced_volume() * gm * alpha.to_radians().sin();
                println!("{alpha},{b0m:.16e},{gm:.16e},{m:.16e}");
            }
            (Err(e), _) | (_, Err(e)) => {
                warn!("curve stops: {e}");
                break;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run { config, output, steps, serial } => run(&config, output, steps, serial),
        Command::Oracle(Oracle::Cuboid(a)) => oracle_cuboid(&a),
        Command::Check { config } => load(&config).map(|cfg| {
            let level = report_checks(&cfg);
            println!("config ok, stability {level:?}");
            print!("{}", cfg.to_text());
        }),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
