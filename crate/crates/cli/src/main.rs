//! `settle`: solve, simulate and replicate settlement scenarios from the
//! command line, or serve them over HTTP.
//!
//! Exit codes: 0 success, 1 input or I/O error, 2 regime tie.

mod render;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use settle_api::{router, AppState, SessionStore};
use settle_core::engine::{compare_alternate, evaluate_point, simulate};
use settle_core::io::{
    export_trace, parse_alternate_offer, parse_scenario, ExportFormat, ScenarioDocument,
    SimulationOverrides,
};
use settle_core::optimizer::optimize_at;
use settle_core::presets::{load_preset, Preset};
use settle_core::replicate::{replicate, Figure};

#[derive(Debug, Parser)]
#[command(
    name = "settle",
    version,
    about = "Settlement engine for defaulting-supplier disputes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal allocation at one mediation time.
    Solve {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Mediation time.
        #[arg(long, short)]
        time: f64,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run the mediation over time and report the settlement.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        t_max: Option<f64>,
        /// Number of grid points, both ends included.
        #[arg(long)]
        steps: Option<usize>,
        /// Write the trace here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Trace format; defaults to the extension of --out, else csv.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Check the bundled figure presets against their published values.
    Replicate {
        #[arg(value_parser = parse_figure)]
        figure: Figure,
    },
    /// Weigh the settlement against an alternate supplier.
    Compare {
        #[command(flatten)]
        scenario: ScenarioArg,
        /// Offer file; defaults to the scenario's own [alternate_offer].
        #[arg(long)]
        alternate: Option<String>,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Persist saved scenarios as files in this directory.
        #[arg(long)]
        store: Option<PathBuf>,
        /// Only allow cross-origin requests from this origin.
        #[arg(long)]
        cors_origin: Option<String>,
    },
}

/// A scenario file path or a preset name, given positionally or with
/// `--scenario`.
#[derive(Debug, Args)]
struct ScenarioArg {
    #[arg(value_name = "SCENARIO", required_unless_present = "scenario")]
    positional: Option<String>,
    #[arg(
        long = "scenario",
        value_name = "SCENARIO",
        conflicts_with = "positional"
    )]
    scenario: Option<String>,
}

impl ScenarioArg {
    fn load(&self) -> Result<ScenarioDocument> {
        let name = self
            .scenario
            .as_deref()
            .or(self.positional.as_deref())
            .expect("clap enforces a scenario");
        load_scenario(name)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ExportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ExportFormat::Csv,
            Format::Json => ExportFormat::Json,
        }
    }
}

fn parse_figure(s: &str) -> Result<Figure, String> {
    s.parse()
        .map_err(|_| format!("unknown figure `{s}` (expected fig2, fig3, fig4 or fig5)"))
}

/// Files win over presets so a local `fig2_red` file is never shadowed.
fn load_scenario(name: &str) -> Result<ScenarioDocument> {
    let path = Path::new(name);
    if path.is_file() {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        return parse_scenario(&text).with_context(|| format!("{}", path.display()));
    }
    if Preset::from_name(name).is_some() {
        return Ok(load_preset(name)?);
    }
    bail!("no such scenario file or preset: {name}")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // keep exit code 2 reserved for regime ties
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let tie = e.chain().any(|c| {
                matches!(
                    c.downcast_ref::<settle_core::Error>(),
                    Some(settle_core::Error::RegimeTie { .. })
                )
            });
            ExitCode::from(if tie { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve {
            scenario,
            time,
            json,
        } => {
            let doc = scenario.load()?;
            let report = optimize_at(&doc.scenario, time)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print!("{}", render::solve(&doc.scenario, &report));
            }
        }
        Command::Simulate {
            scenario,
            t_max,
            steps,
            out,
            format,
        } => {
            let doc = scenario.load()?;
            let cfg = SimulationOverrides { t_max, steps }.apply(doc.simulation_config());
            let trace = simulate(&doc.scenario, &cfg)?;
            if let Some(out) = out {
                let format = match format {
                    Some(f) => f.into(),
                    None if out.extension().is_some_and(|e| e == "json") => ExportFormat::Json,
                    None => ExportFormat::Csv,
                };
                std::fs::write(&out, export_trace(&doc.scenario, &trace, format))
                    .with_context(|| format!("cannot write {}", out.display()))?;
            } else if format.is_some() {
                bail!("--format needs --out");
            }
            print!("{}", render::simulate(&trace, cfg.t_max));
        }
        Command::Replicate { figure } => {
            let rep = replicate(figure)?;
            print!("{}", render::replication(&rep));
            if !rep.passed() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Compare {
            scenario,
            alternate,
            t_max,
            steps,
        } => {
            let doc = scenario.load()?;
            let offer = match alternate {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("cannot read {path}"))?;
                    parse_alternate_offer(&text).with_context(|| path.clone())?
                }
                None => doc.alternate_offer.ok_or_else(|| {
                    anyhow!("scenario has no [alternate_offer]; pass --alternate")
                })?,
            };
            let cfg = SimulationOverrides { t_max, steps }.apply(doc.simulation_config());
            let trace = simulate(&doc.scenario, &cfg)?;
            let at = match &trace.settlement {
                Some(ev) => evaluate_point(&doc.scenario, ev.t_star)?,
                None => trace
                    .points
                    .last()
                    .cloned()
                    .expect("traces have two or more points"),
            };
            let cmp = compare_alternate(&doc.scenario, &trace, &at, &offer)?;
            print!("{}", render::compare(&cmp, trace.settlement.is_some()));
        }
        Command::Serve {
            port,
            host,
            store,
            cors_origin,
        } => serve(&host, port, store, cors_origin)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn serve(host: &str, port: u16, store: Option<PathBuf>, cors_origin: Option<String>) -> Result<()> {
    let store = match store {
        Some(dir) => SessionStore::file_backed(&dir)
            .with_context(|| format!("cannot open scenario store {}", dir.display()))?,
        None => SessionStore::in_memory(),
    };
    let origin = cors_origin
        .map(|o| o.parse().with_context(|| format!("invalid origin {o}")))
        .transpose()?;
    let app = router(AppState::new(store), origin);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .with_context(|| format!("cannot bind {host}:{port}"))?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        settle_api::serve(listener, app).await?;
        Ok(())
    })
}
