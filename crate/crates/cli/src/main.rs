use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use diffnav_core::benchmark::{format_csv, format_table, parse_pairs, run_benchmark, DEFAULT_TIMEOUT, DEFAULT_PAIRS};
use diffnav_core::bridge::MapPayload;
use diffnav_core::client::{cmd_map_saver, cmd_navigate, StackClient};
use diffnav_core::geometry::Pose2D;
use diffnav_core::stack::Mode;
use diffnav_core::teleop::KEYMAP_TABLE;
use diffnav_cli::client::BridgeClient;
use diffnav_cli::run::{build_stack, load_config, parse_command_log, run_headless, StackOptions};
use diffnav_cli::server::{serve, SimHandle};

const DEFAULT_URL: &str = "ws://127.0.0.1:9090/ws";

#[derive(Parser)]
#[command(name = "diffnav", version, about = "Differential-drive robot simulator and navigation stack")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Mapping,
    Navigation,
}

#[derive(clap::Args, Clone)]
struct WorldArgs {
    /// `demo`, or the basename of a map (.pgm + .yaml) used as ground truth
    #[arg(long, default_value = "demo")]
    world: String,
    /// Static map to localize and plan on (defaults to the world)
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "navigation")]
    mode: ModeArg,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Start pose as `x,y,theta`
    #[arg(long, value_parser = parse_pose)]
    start: Option<Pose2D>,
    /// Configuration file (TOML); see `diffnav config`
    #[arg(long)]
    config: Option<PathBuf>,
}

impl WorldArgs {
    fn options(&self) -> StackOptions {
        StackOptions {
            world: self.world.clone(),
            map: self.map.clone(),
            mode: match self.mode {
                ModeArg::Mapping => Mode::Mapping,
                ModeArg::Navigation => Mode::Navigation,
            },
            seed: self.seed,
            start: self.start,
            config: self.config.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the stack headless and write a CSV trace
    Sim {
        #[command(flatten)]
        world: WorldArgs,
        /// Speed relative to real time; 0 runs as fast as possible
        #[arg(long, default_value_t = 0.0)]
        rate: f64,
        /// Simulated seconds to run
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        /// Command log: one `<sim_time> <json command>` per line
        #[arg(long)]
        commands: Option<PathBuf>,
        /// Trace output (stdout when omitted)
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the stack behind the WebSocket bridge
    Serve {
        #[command(flatten)]
        world: WorldArgs,
        #[arg(long, default_value_t = 9090)]
        port: u16,
        /// Speed relative to real time; 0 runs as fast as possible
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        #[arg(long, default_value_t = 10.0)]
        snapshot_hz: f64,
    },
    /// Drive a served robot from the keyboard
    Teleop {
        #[arg(long, default_value = DEFAULT_URL)]
        url: String,
    },
    /// Save the live map of a served mapping session
    MapSaver {
        /// Output basename; writes <name>.pgm and <name>.yaml
        #[arg(short = 'f')]
        file: Option<String>,
        #[arg(long, default_value = DEFAULT_URL)]
        url: String,
    },
    /// Send a goal `x` metres ahead with orientation quaternion `w`
    Navigate {
        #[arg(allow_hyphen_values = true)]
        x: String,
        #[arg(allow_hyphen_values = true)]
        w: String,
        /// Bridge to send the goal to; runs a local stack when omitted
        #[arg(long)]
        url: Option<String>,
        #[command(flatten)]
        world: WorldArgs,
    },
    /// Time-to-goal for (min_vel_x, max_vel_x) pairs on a fixed course
    Benchmark {
        /// Pairs as `min:max,min:max,...`
        #[arg(long)]
        pairs: Option<String>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "doorway")]
        course: String,
        /// Simulated seconds before a run counts as timed out
        #[arg(long, default_value_t = DEFAULT_TIMEOUT)]
        timeout: f64,
        /// Print CSV rows instead of the table
        #[arg(long)]
        csv: bool,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the effective configuration
    Config {
        /// Configuration file to validate and print
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Print the teleop key map
    Keymap,
}

fn parse_pose(s: &str) -> Result<Pose2D, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    match v[..] {
        [x, y, theta] if v.iter().all(|c| c.is_finite()) => Ok(Pose2D::new(x, y, theta)),
        _ => Err("expected `x,y,theta`".into()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Cmd::Sim {
            world,
            rate,
            duration,
            commands,
            trace,
        } => {
            if !(duration.is_finite() && duration >= 0.0) {
                bail!("--duration must be >= 0");
            }
            let mut stack = build_stack(&world.options())?;
            let log = match commands {
                Some(p) => parse_command_log(&std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?)?,
                None => Vec::new(),
            };
            let mut out: Box<dyn Write> = match trace {
                Some(p) => Box::new(std::io::BufWriter::new(
                    std::fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?,
                )),
                None => Box::new(std::io::stdout().lock()),
            };
            if !(rate.is_finite() && rate >= 0.0) {
                bail!("--rate must be >= 0");
            }
            for r in run_headless(&mut stack, &log, duration, rate, &mut out)? {
                log::warn!("command rejected: {r}");
            }
            out.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Serve {
            world,
            port,
            rate,
            snapshot_hz,
        } => {
            let stack = build_stack(&world.options())?;
            let sim = SimHandle::spawn(stack, rate, snapshot_hz);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
                eprintln!("serving on ws://{}/ws", listener.local_addr()?);
                serve(listener, &sim).await
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Teleop { url } => {
            diffnav_cli::teleop::run_interactive(&url, Default::default())?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::MapSaver { file, url } => {
            let args: Vec<String> = file.into_iter().flat_map(|f| ["-f".to_string(), f]).collect();
            // argument errors come before connecting
            diffnav_core::client::parse_map_saver_args(&args)?;
            let mut client = BridgeClient::connect(&url)?;
            let snap = client.next_snapshot()?;
            let grid = match (snap.mode.as_str(), client.map()) {
                ("mapping", Some(m)) => Some(MapPayload::to_grid(m)?),
                _ => None,
            };
            client.close();
            let base = cmd_map_saver(&args, grid.as_ref())?;
            eprintln!("saved {0}.pgm and {0}.yaml", base.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Navigate { x, w, url, world } => {
            let args = [x, w];
            diffnav_core::client::parse_navigate_args(&args)?;
            let mut out = std::io::stdout().lock();
            let code = match url {
                Some(url) => {
                    let mut client = BridgeClient::connect(&url)?;
                    let code = cmd_navigate(&args, &mut client, &mut out)?;
                    client.close();
                    code
                }
                None => {
                    let mut stack = build_stack(&world.options())?;
                    cmd_navigate(&args, &mut StackClient::new(&mut stack), &mut out)?
                }
            };
            Ok(ExitCode::from(code as u8))
        }
        Cmd::Benchmark {
            pairs,
            seed,
            course,
            timeout,
            csv,
            config,
        } => {
            let cfg = load_config(config.as_deref())?;
            let pairs = match pairs {
                Some(p) => parse_pairs(&p)?,
                None => DEFAULT_PAIRS.to_vec(),
            };
            let rows = run_benchmark(&cfg, &pairs, &course, seed, timeout)?;
            print!("{}", if csv { format_csv(&rows) } else { format_table(&rows) });
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Config { file } => {
            print!("{}", load_config(file.as_deref())?.to_toml());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Keymap => {
            print!("{KEYMAP_TABLE}");
            Ok(ExitCode::SUCCESS)
        }
    }
}
