//! Scenario JSON, MPC CSV and point-cloud CSV readers and writers.
//!
//! All text output is UTF-8 with `.` decimals and LF line endings. Floats are
//! written in shortest round-trip form so reloading reproduces them exactly.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    Environment, LinkCondition, MpcRecord, Point2, RpEstimate, Scenario, ScenarioConfig, UeObservation, UeSpec, Wall,
};
use crate::error::{Error, Result};

pub const MPC_HEADER: [&str; 4] = ["ue_id", "power_db", "delay_s", "aoa_deg"];
pub const CLOUD_HEADER: [&str; 7] = ["ue_id", "cluster_id", "x", "y", "r_m", "theta_deg", "power_db"];
pub const TRUTH_HEADER: [&str; 7] = ["ue_id", "order", "rp_x", "rp_y", "total_len_m", "aoa_deg", "power_db"];

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    carrier_freq_hz: f64,
    #[serde(default)]
    tx_gain_db: f64,
    #[serde(default)]
    rx_gain_db: f64,
    #[serde(default)]
    bs: Point2,
    walls: Vec<Wall>,
    #[serde(default)]
    ues: Vec<UeEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UeEntry {
    id: UeId,
    pos: Point2,
    #[serde(default = "default_los")]
    los: bool,
}

fn default_los() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum UeId {
    Text(String),
    Number(i64),
}

impl From<UeId> for String {
    fn from(id: UeId) -> String {
        match id {
            UeId::Text(s) => s,
            UeId::Number(n) => n.to_string(),
        }
    }
}

/// Options applied when MPC tables are read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadOptions {
    /// Subtract TX and RX antenna gains from raw powers.
    pub compensate_gains: bool,
    /// Speed of light used for the path-length sanity check.
    pub c: f64,
    /// Path-length slack allowed below the BS-UE baseline, seconds of delay.
    pub delay_slack_s: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            compensate_gains: true,
            c: super::SPEED_OF_LIGHT,
            delay_slack_s: 1.0 / 1.2e9,
        }
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .and_then(|f| BufReader::new(f).read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    File::create(path)
        .and_then(|mut f| f.write_all(bytes))
        .map_err(|e| Error::io(path, e))
}

/// Parses a scenario document. `origin` is only used in error messages.
pub fn parse_scenario(text: &str, origin: &Path) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    let env = Environment::new(file.walls, file.carrier_freq_hz)?;
    let config = ScenarioConfig {
        carrier_freq_hz: file.carrier_freq_hz,
        tx_gain_db: file.tx_gain_db,
        rx_gain_db: file.rx_gain_db,
    };
    if !(config.tx_gain_db.is_finite() && config.rx_gain_db.is_finite()) {
        return Err(Error::invalid("scenario", "antenna gains must be finite"));
    }
    let bs = Point2::checked(file.bs.x, file.bs.y, "bs")?;
    let mut ues = Vec::with_capacity(file.ues.len());
    for u in file.ues {
        let id: String = u.id.into();
        let record = format!("UE {id}");
        let pos = Point2::checked(u.pos.x, u.pos.y, &record)?;
        if pos == bs {
            return Err(Error::invalid(record, "UE coincides with the BS"));
        }
        if ues.iter().any(|e: &UeSpec| e.id == id) {
            return Err(Error::invalid(record, "duplicate UE id"));
        }
        ues.push(UeSpec {
            id,
            pos,
            link: LinkCondition::from_los(u.los),
        });
    }
    Ok(Scenario { config, bs, env, ues })
}

pub fn read_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    parse_scenario(&read_to_string(path)?, path)
}

pub fn scenario_to_json(s: &Scenario) -> String {
    let file = ScenarioFile {
        carrier_freq_hz: s.config.carrier_freq_hz,
        tx_gain_db: s.config.tx_gain_db,
        rx_gain_db: s.config.rx_gain_db,
        bs: s.bs,
        walls: s.env.walls.clone(),
        ues: s
            .ues
            .iter()
            .map(|u| UeEntry {
                id: UeId::Text(u.id.clone()),
                pos: u.pos,
                los: u.link.is_los(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("scenario serializes");
    out.push('\n');
    out
}

pub fn write_scenario(path: impl AsRef<Path>, s: &Scenario) -> Result<()> {
    write_bytes(path.as_ref(), scenario_to_json(s).as_bytes())
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            msg: format!("{other:?}"),
        },
    }
}

fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let found = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let expected: Vec<&str> = header.to_vec();
    if found.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("expected header `{}`", header.join(",")),
        });
    }
    Ok(rdr)
}

fn field<'a>(path: &Path, rec: &'a csv::StringRecord, idx: usize, name: &str) -> Result<&'a str> {
    rec.get(idx).ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: rec.position().map(|p| p.line() as usize).unwrap_or(0),
        msg: format!("missing field `{name}`"),
    })
}

fn float_field(path: &Path, rec: &csv::StringRecord, idx: usize, name: &str) -> Result<f64> {
    let raw = field(path, rec, idx, name)?;
    raw.parse::<f64>().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line: rec.position().map(|p| p.line() as usize).unwrap_or(0),
        msg: format!("field `{name}`: `{raw}` is not a number"),
    })
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

/// Reads an MPC table, grouping records by UE id in file order.
/// `gain_db` is subtracted from every raw power.
pub fn read_mpcs(path: impl AsRef<Path>, gain_db: f64) -> Result<BTreeMap<String, Vec<MpcRecord>>> {
    let path = path.as_ref();
    let mut rdr = open_csv(path, &MPC_HEADER)?;
    let mut out: BTreeMap<String, Vec<MpcRecord>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let ue = field(path, &rec, 0, "ue_id")?.to_string();
        let power = float_field(path, &rec, 1, "power_db")?;
        let delay = float_field(path, &rec, 2, "delay_s")?;
        let aoa_deg = float_field(path, &rec, 3, "aoa_deg")?;
        let record = format!("{}:{} (UE {ue})", path.display(), line_of(&rec));
        let mpc = MpcRecord::checked(power - gain_db, delay, aoa_deg.to_radians(), &record)?;
        out.entry(ue).or_default().push(mpc);
    }
    Ok(out)
}

fn finish_csv(path: &Path, wtr: csv::Writer<Vec<u8>>) -> Result<()> {
    let bytes = wtr.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_bytes(path, &bytes)
}

fn new_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

/// Writes an MPC table, adding `gain_db` back onto every power.
pub fn write_mpcs<'a, I>(path: impl AsRef<Path>, rows: I, gain_db: f64) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a MpcRecord)>,
{
    let path = path.as_ref();
    let mut wtr = new_writer();
    let io = |e: csv::Error| csv_err(path, e);
    wtr.write_record(MPC_HEADER).map_err(io)?;
    for (ue, m) in rows {
        wtr.write_record([
            ue.to_string(),
            (m.power_db + gain_db).to_string(),
            m.delay_s.to_string(),
            m.aoa_rad.to_degrees().to_string(),
        ])
        .map_err(io)?;
    }
    finish_csv(path, wtr)
}

/// Loads a scenario and its MPC table into BS-centred observations.
///
/// UE positions are shifted by `-bs`, so the returned observations always
/// have the BS at the origin. UEs without records get an empty MPC list.
pub fn load_scenario(
    scenario_path: impl AsRef<Path>,
    mpcs_path: impl AsRef<Path>,
    opts: &LoadOptions,
) -> Result<(Environment, Vec<UeObservation>, ScenarioConfig)> {
    let scenario = read_scenario(scenario_path)?;
    let gain = if opts.compensate_gains {
        scenario.config.total_gain_db()
    } else {
        0.0
    };
    let mut mpcs = read_mpcs(mpcs_path, gain)?;
    let obs = attach_mpcs(&scenario, &mut mpcs, opts)?;
    Ok((scenario.env, obs, scenario.config))
}

/// Pairs each scenario UE with its records. Records for unknown UEs are an error.
pub fn attach_mpcs(
    scenario: &Scenario,
    mpcs: &mut BTreeMap<String, Vec<MpcRecord>>,
    opts: &LoadOptions,
) -> Result<Vec<UeObservation>> {
    if let Some(unknown) = mpcs.keys().find(|k| scenario.ue(k).is_none()) {
        return Err(Error::invalid(
            format!("UE {unknown}"),
            "MPC records reference a UE not declared in the scenario",
        ));
    }
    let mut out = Vec::with_capacity(scenario.ues.len());
    for ue in &scenario.ues {
        let records = mpcs.remove(&ue.id).unwrap_or_default();
        let obs = UeObservation::new(ue.id.clone(), ue.pos - scenario.bs, ue.link, records)?;
        obs.check_physical(opts.c, opts.delay_slack_s * opts.c)?;
        out.push(obs);
    }
    Ok(out)
}

pub fn save_point_cloud<'a, I>(estimates: I, path: impl AsRef<Path>) -> Result<()>
where
    I: IntoIterator<Item = &'a RpEstimate>,
{
    let path = path.as_ref();
    let mut wtr = new_writer();
    let io = |e: csv::Error| csv_err(path, e);
    wtr.write_record(CLOUD_HEADER).map_err(io)?;
    for e in estimates {
        let vals = [e.o.x, e.o.y, e.r_m, e.theta_rad.to_degrees(), e.source_power_db];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                format!("estimate UE {} cluster {}", e.ue_id, e.cluster_id),
                "non-finite value",
            ));
        }
        wtr.write_record([
            e.ue_id.clone(),
            e.cluster_id.to_string(),
            vals[0].to_string(),
            vals[1].to_string(),
            vals[2].to_string(),
            vals[3].to_string(),
            vals[4].to_string(),
        ])
        .map_err(io)?;
    }
    finish_csv(path, wtr)
}

pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<Vec<RpEstimate>> {
    let path = path.as_ref();
    let mut rdr = open_csv(path, &CLOUD_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let cluster_raw = field(path, &rec, 1, "cluster_id")?;
        let cluster_id = cluster_raw.parse::<usize>().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: line_of(&rec) as usize,
            msg: format!("field `cluster_id`: `{cluster_raw}` is not an index"),
        })?;
        let record = format!("{}:{}", path.display(), line_of(&rec));
        out.push(RpEstimate {
            ue_id: field(path, &rec, 0, "ue_id")?.to_string(),
            cluster_id,
            o: Point2::checked(
                float_field(path, &rec, 2, "x")?,
                float_field(path, &rec, 3, "y")?,
                &record,
            )?,
            r_m: float_field(path, &rec, 4, "r_m")?,
            theta_rad: float_field(path, &rec, 5, "theta_deg")?.to_radians(),
            source_power_db: float_field(path, &rec, 6, "power_db")?,
            mpc_index: None,
        });
    }
    Ok(out)
}

/// One ground-truth row: `rp` is the final bounce point (the one seen from
/// the UE), absent for the direct path.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthRow<'a> {
    pub ue_id: &'a str,
    pub order: usize,
    pub rp: Option<Point2>,
    pub total_len_m: f64,
    pub aoa_rad: f64,
    pub power_db: f64,
}

pub fn write_truth<'a, I>(path: impl AsRef<Path>, rows: I) -> Result<()>
where
    I: IntoIterator<Item = TruthRow<'a>>,
{
    let path = path.as_ref();
    let mut wtr = new_writer();
    let io = |e: csv::Error| csv_err(path, e);
    wtr.write_record(TRUTH_HEADER).map_err(io)?;
    for r in rows {
        let (x, y) = r.rp.map(|p| (p.x.to_string(), p.y.to_string())).unwrap_or_default();
        wtr.write_record([
            r.ue_id.to_string(),
            r.order.to_string(),
            x,
            y,
            r.total_len_m.to_string(),
            r.aoa_rad.to_degrees().to_string(),
            r.power_db.to_string(),
        ])
        .map_err(io)?;
    }
    finish_csv(path, wtr)
}
