use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wallach_flow::cli_io::{
    self, exit, CertifySection, Command, CriticalPointsSection, FlowKnobs, G2Section, GammaSection,
    PortraitSection, RecoverSection, RunConfig, ShootSection, SweepSection, ZoneKnobs,
};
use wallach_flow::flow::Reprojection;
use wallach_flow::{CaseId, FlowError};

#[derive(Parser)]
#[command(name = "wallach-lab", version, about = "Ricci-flat cohomogeneity-one metrics on Wallach-space orbits")]
struct Cli {
    /// Write the run report here instead of stdout.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    /// Print the equivalent TOML config and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Critical points with eigenvalues.
    CriticalPoints {
        #[arg(long)]
        case: CaseId,
    },
    /// Sample the boundary faces of a region and check the flux sign.
    Certify {
        #[arg(long)]
        case: CaseId,
        #[arg(long)]
        region: String,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[command(flatten)]
        zone: ZoneArgs,
    },
    /// Integrate one family member.
    Shoot {
        #[arg(long)]
        case: CaseId,
        #[arg(long, default_value_t = 1.0)]
        s0: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        s1: f64,
        #[arg(long)]
        max_eta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flow: FlowArgs,
        #[command(flatten)]
        zone: ZoneArgs,
    },
    /// Integrate a grid of family members.
    Sweep {
        #[arg(long)]
        case: CaseId,
        #[arg(long, default_value_t = 1.0)]
        s0: f64,
        #[arg(long, default_value_t = 9)]
        grid: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        s1: Option<Vec<f64>>,
        #[arg(long)]
        max_eta: Option<f64>,
        #[command(flatten)]
        flow: FlowArgs,
        #[command(flatten)]
        zone: ZoneArgs,
    },
    /// Rebuild the metric from a trajectory CSV.
    Recover {
        #[arg(long)]
        case: CaseId,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A curve of the invariant plane family (case I).
    G2 {
        #[arg(long, allow_hyphen_values = true)]
        xi: f64,
        #[arg(long)]
        branch: Option<String>,
        #[arg(long)]
        span: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flow: FlowArgs,
    },
    /// The symmetric curve from the isotropic source.
    Gamma {
        #[arg(long)]
        case: CaseId,
        #[arg(long)]
        span: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        flow: FlowArgs,
    },
    /// Layered CSV of Z-projections.
    Portrait {
        #[arg(long)]
        case: CaseId,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        xi: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        s1: Vec<f64>,
        #[arg(long)]
        no_gamma: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct FlowArgs {
    #[arg(long, default_value_t = 1e-8)]
    launch_offset: f64,
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol_converge: f64,
    #[arg(long, default_value_t = 1e-7)]
    tol_drift: f64,
    #[arg(long, default_value_t = 10)]
    record_every: usize,
    /// off, constraint or triangle.
    #[arg(long)]
    reprojection: Option<Reprojection>,
}

impl FlowArgs {
    fn knobs(&self) -> FlowKnobs {
        FlowKnobs {
            step: self.step,
            tol_converge: self.tol_converge,
            tol_drift: self.tol_drift,
            record_every: self.record_every,
            reprojection: self.reprojection,
        }
    }
}

#[derive(Args)]
struct ZoneArgs {
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    p: Option<u32>,
    #[arg(long)]
    k: Option<f64>,
}

impl ZoneArgs {
    fn knobs(&self) -> ZoneKnobs {
        ZoneKnobs { delta: self.delta, p: self.p, k: self.k }
    }
}

fn build(cmd: Cmd, seed: u64) -> Result<RunConfig, FlowError> {
    let command = match cmd {
        Cmd::Run { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|source| FlowError::Io { path: config.display().to_string(), source })?;
            return cli_io::parse_config(&text);
        }
        Cmd::CriticalPoints { case } => Command::CriticalPoints(CriticalPointsSection { case }),
        Cmd::Certify { case, region, samples, zone } => {
            Command::Certify(CertifySection { case, region, samples, zone: zone.knobs() })
        }
        Cmd::Shoot { case, s0, s1, max_eta, out, flow, zone } => Command::Shoot(ShootSection {
            case,
            s0,
            s1,
            launch_offset: flow.launch_offset,
            max_eta,
            enforce_bound: true,
            flow: flow.knobs(),
            zone: zone.knobs(),
            out,
        }),
        Cmd::Sweep { case, s0, grid, s1, max_eta, flow, zone } => Command::Sweep(SweepSection {
            case,
            s0,
            grid,
            s1,
            launch_offset: flow.launch_offset,
            max_eta,
            flow: flow.knobs(),
            zone: zone.knobs(),
        }),
        Cmd::Recover { case, input, out } => Command::Recover(RecoverSection { case, input, out }),
        Cmd::G2 { xi, branch, span, out, flow } => Command::G2(G2Section {
            xi,
            branch,
            launch_offset: flow.launch_offset,
            span,
            flow: flow.knobs(),
            out,
        }),
        Cmd::Gamma { case, span, out, flow } => Command::Gamma(GammaSection {
            case,
            launch_offset: flow.launch_offset,
            span,
            flow: flow.knobs(),
            out,
        }),
        Cmd::Portrait { case, xi, s1, no_gamma, out } => {
            Command::Portrait(PortraitSection { case, xi, s1, gamma: !no_gamma, out })
        }
    };
    let mut cfg = RunConfig::new(command);
    cfg.seed = seed;
    cli_io::validate(&cfg)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<i32, FlowError> {
    let cfg = build(cli.command, cli.seed)?;
    if cli.dump_config {
        print!("{}", cli_io::to_toml(&cfg)?);
        return Ok(exit::SUCCESS);
    }
    let report = cli_io::execute(&cfg)?;
    match &cli.report {
        Some(path) => cli_io::write_json(&report, path)?,
        None => println!("{}", serde_json::to_string_pretty(&report).map_err(|e| FlowError::Parse(e.to_string()))?),
    }
    for check in report.checks.iter().filter(|c| !c.pass) {
        eprintln!("check failed: {} ({})", check.name, check.detail);
    }
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let code = match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            match &err {
                FlowError::Validation(list) => {
                    eprintln!("invalid configuration:");
                    for item in list {
                        eprintln!("  - {item}");
                    }
                }
                other => eprintln!("error: {other}"),
            }
            cli_io::exit_code(&err)
        }
    };
    ExitCode::from(code as u8)
}
