//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 file-system failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use crate::daps::daps_grid;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_cloud, read_reference_map, DeviationFormula};
use crate::model::io::{
    attach_mpcs, load_point_cloud, read_mpcs, read_scenario, save_point_cloud, write_mpcs, write_truth, LoadOptions,
    TruthRow,
};
use crate::model::SPEED_OF_LIGHT;
use crate::pipeline::{
    reconstruct_scenario, ClusterParams, FreeSpace, ReconstructParams, SkipReason, SolverKind, DEFAULT_DEDUPE_EPS_M,
};
use crate::plot::render_svg;
use crate::simulator::{simulate_bistatic, SimOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "erm",
    version,
    about = "Bistatic environment reconstruction from multipath parameters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Image-source simulation of every scenario UE.
    Simulate(SimulateArgs),
    /// Solve reflection points for every UE and merge them.
    Reconstruct(ReconstructArgs),
    /// Score a point cloud against reference faces.
    Evaluate(EvaluateArgs),
    /// Delay-angle power grid for one UE.
    Daps(DapsArgs),
    /// SVG scatter of walls, UEs and reconstructed points.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Maximum reflection order, 1 or 2.
    #[arg(long, default_value_t = 1)]
    order: u8,
    /// Round delays and angles to the resolution given below.
    #[arg(long)]
    quantize: bool,
    #[arg(long, default_value_t = 1.0 / 1.2e9)]
    delay_quantum: f64,
    #[arg(long, default_value_t = 1.0)]
    angle_quantum_deg: f64,
    /// Leave out the direct path.
    #[arg(long)]
    no_los: bool,
    #[arg(long, default_value_t = SPEED_OF_LIGHT)]
    c: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReconstructArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    mpcs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Speed of light; `3e8` reproduces rounded published arithmetic.
    #[arg(long, default_value_t = SPEED_OF_LIGHT)]
    c: f64,
    /// Treat MPC powers as already free of antenna gains.
    #[arg(long)]
    no_gain_comp: bool,
    #[arg(long, default_value_t = 5.0)]
    delay_gap_ns: f64,
    #[arg(long, default_value_t = 10.0)]
    angle_gap_deg: f64,
    #[arg(long, default_value_t = f64::NEG_INFINITY, allow_negative_numbers = true)]
    power_floor_db: f64,
    /// Delay resolution used to recognise the direct path, seconds.
    #[arg(long, default_value_t = 1.0 / 1.2e9)]
    delay_quantum: f64,
    #[arg(long, default_value_t = DEFAULT_DEDUPE_EPS_M)]
    dedupe_eps: f64,
    /// Use the iterative solver instead of the closed form.
    #[arg(long)]
    root_find: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Use the literal `|y + a x - b| / (1 + a²)` variant.
    #[arg(long)]
    paper_eq6: bool,
}

#[derive(Debug, Args)]
struct DapsArgs {
    #[arg(long)]
    mpcs: PathBuf,
    #[arg(long)]
    ue: String,
    #[arg(long, default_value_t = 64)]
    delay_bins: usize,
    #[arg(long, default_value_t = 36)]
    angle_bins: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let scenario = read_scenario(&a.scenario)?;
    let opts = SimOptions {
        max_order: a.order,
        delay_quantum_s: if a.quantize { a.delay_quantum } else { 0.0 },
        angle_quantum_rad: if a.quantize {
            a.angle_quantum_deg.to_radians()
        } else {
            0.0
        },
        include_los: !a.no_los,
        c: a.c,
    };
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    for ue in &scenario.ues {
        let (obs, paths) = simulate_bistatic(&scenario.env, scenario.bs, &ue.id, ue.pos, &opts)?;
        info!("UE {}: {} paths", ue.id, paths.len());
        rows.extend(obs.mpcs.into_iter().map(|m| (ue.id.clone(), m)));
        truth.extend(paths.into_iter().map(|p| (ue.id.clone(), p)));
    }
    write_mpcs(
        &a.out,
        rows.iter().map(|(id, m)| (id.as_str(), m)),
        scenario.config.total_gain_db(),
    )?;
    if let Some(path) = &a.truth {
        write_truth(
            path,
            truth.iter().map(|(id, p)| TruthRow {
                ue_id: id,
                order: p.order,
                rp: p.last_rp(),
                total_len_m: p.total_len_m,
                aoa_rad: p.aoa_rad,
                power_db: p.power_db,
            }),
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SkipEntry<'a> {
    ue_id: &'a str,
    cluster_id: usize,
    mpc_index: usize,
    reason: String,
}

#[derive(Serialize)]
struct CloudMeta<'a> {
    points: usize,
    /// `[index, index of earlier point]` pairs.
    duplicates: Vec<[usize; 2]>,
    skipped: Vec<SkipEntry<'a>>,
    c: f64,
    gain_compensated: bool,
}

fn reconstruct(a: &ReconstructArgs) -> Result<()> {
    let scenario = read_scenario(&a.scenario)?;
    let load = LoadOptions {
        compensate_gains: !a.no_gain_comp,
        c: a.c,
        delay_slack_s: a.delay_quantum,
    };
    let gain = if load.compensate_gains {
        scenario.config.total_gain_db()
    } else {
        0.0
    };
    let mut mpcs = read_mpcs(&a.mpcs, gain)?;
    let obs = attach_mpcs(&scenario, &mut mpcs, &load)?;
    let params = ReconstructParams {
        cluster: ClusterParams {
            delay_gap_s: a.delay_gap_ns * 1e-9,
            angle_gap_rad: a.angle_gap_deg.to_radians(),
            power_floor_db: a.power_floor_db,
        },
        path_loss: FreeSpace::with_c(a.c),
        delay_quantum_s: a.delay_quantum,
        solver_kind: if a.root_find {
            SolverKind::RootFind
        } else {
            SolverKind::ClosedForm
        },
        ..Default::default()
    };
    let (cloud, recs) = reconstruct_scenario(&scenario, &obs, &params, a.dedupe_eps)?;
    info!("{} points, {} flagged duplicate", cloud.len(), cloud.duplicate_count());
    save_point_cloud(cloud.estimates(), &a.out)?;

    let meta = CloudMeta {
        points: cloud.len(),
        duplicates: cloud
            .points
            .iter()
            .enumerate()
            .filter_map(|(i, p)| p.duplicate_of.map(|j| [i, j]))
            .collect(),
        skipped: recs
            .iter()
            .flat_map(|r| {
                r.skipped.iter().map(move |s| SkipEntry {
                    ue_id: &r.ue_id,
                    cluster_id: s.cluster_id,
                    mpc_index: s.mpc_index,
                    reason: match &s.reason {
                        SkipReason::DirectPath => "direct path".to_string(),
                        SkipReason::BelowThreshold { power_db, threshold_db } => {
                            format!("power {power_db:.3} dB not above threshold {threshold_db:.3} dB")
                        }
                        SkipReason::Unsolvable(e) => e.to_string(),
                    },
                })
            })
            .collect(),
        c: a.c,
        gain_compensated: load.compensate_gains,
    };
    let mut meta_path = a.out.clone().into_os_string();
    meta_path.push(".meta.json");
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n";
    write_file(Path::new(&meta_path), &text)
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let cloud = load_point_cloud(&a.cloud)?;
    let refs = read_reference_map(&a.reference)?;
    let formula = if a.paper_eq6 {
        DeviationFormula::Printed
    } else {
        DeviationFormula::Perpendicular
    };
    let report = evaluate_cloud(&cloud, &refs, formula)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    write_file(&a.out, &text)
}

fn daps(a: &DapsArgs) -> Result<()> {
    let mpcs = read_mpcs(&a.mpcs, 0.0)?;
    let rows = mpcs
        .get(&a.ue)
        .ok_or_else(|| Error::invalid(format!("UE {}", a.ue), "no MPC records for this UE"))?;
    daps_grid(rows, a.delay_bins, a.angle_bins)?.write_csv(&a.out)
}

fn plot(a: &PlotArgs) -> Result<()> {
    let scenario = read_scenario(&a.scenario)?;
    let cloud = load_point_cloud(&a.cloud)?;
    write_file(&a.out, &render_svg(&scenario, &cloud))
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("ERM_LOG", "off");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Daps(a) => daps(a),
        Command::Plot(a) => plot(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                EXIT_IO
            } else {
                EXIT_INVALID
            }
        }
    }
}
