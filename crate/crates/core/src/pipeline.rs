//! Per-UE reconstruction and multi-UE merging.
//!
//! For one UE: group MPCs into clusters, keep each cluster's strongest
//! component, compute its reflection loss against free space, drop peaks
//! whose loss exceeds twice the reference loss (the a-th smallest loss, see
//! [`LinkCondition::reference_rank`]), delete the direct path in LoS, and
//! solve every surviving peak for its reflection point.

use std::cmp::Ordering;

use log::{debug, info};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{wrap_angle, LinkCondition, MpcRecord, RpEstimate, Scenario, UeObservation, SPEED_OF_LIGHT};
use crate::solver::{solve_rp_closed_form_with, solve_rp_root_find, SolveError, SolveInput, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    pub delay_gap_s: f64,
    pub angle_gap_rad: f64,
    /// Records with power below this floor are ignored.
    pub power_floor_db: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            delay_gap_s: 5e-9,
            angle_gap_rad: 10f64.to_radians(),
            power_floor_db: f64::NEG_INFINITY,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delay_gap_s > 0.0 && self.angle_gap_rad > 0.0) {
            return Err(Error::invalid("cluster parameters", "gaps must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    /// Indices into the UE's MPC list, ascending.
    pub members: Vec<usize>,
    pub peak_index: usize,
}

/// Strongest-first ordering; ties go to the shorter delay, then lower index.
fn peak_order(mpcs: &[MpcRecord], a: usize, b: usize) -> Ordering {
    let (ma, mb) = (&mpcs[a], &mpcs[b]);
    mb.power_db
        .total_cmp(&ma.power_db)
        .then(ma.delay_s.total_cmp(&mb.delay_s))
        .then(a.cmp(&b))
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Single-linkage clustering: two MPCs link when both their delay gap and
/// wrapped angle gap are within the gates. Clusters are returned by the
/// delay of their peak, ascending.
pub fn cluster_mpcs(obs: &UeObservation, params: &ClusterParams) -> Vec<Cluster> {
    let mpcs = &obs.mpcs;
    let live: Vec<usize> = (0..mpcs.len())
        .filter(|&i| mpcs[i].power_db >= params.power_floor_db)
        .collect();
    let mut parent: Vec<usize> = (0..mpcs.len()).collect();
    for (k, &i) in live.iter().enumerate() {
        for &j in &live[k + 1..] {
            let close_delay = (mpcs[i].delay_s - mpcs[j].delay_s).abs() <= params.delay_gap_s;
            let close_angle = wrap_angle(mpcs[i].aoa_rad - mpcs[j].aoa_rad).abs() <= params.angle_gap_rad;
            if close_delay && close_angle {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot: Vec<Option<usize>> = vec![None; mpcs.len()];
    for &i in &live {
        let root = find(&mut parent, i);
        match slot[root] {
            Some(g) => groups[g].push(i),
            None => {
                slot[root] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }
    let mut clusters: Vec<Cluster> = groups
        .into_iter()
        .map(|members| {
            let peak_index = *members
                .iter()
                .min_by(|&&a, &&b| peak_order(mpcs, a, b))
                .expect("clusters are nonempty");
            Cluster { members, peak_index }
        })
        .collect();
    clusters.sort_by(|a, b| {
        let (pa, pb) = (&mpcs[a.peak_index], &mpcs[b.peak_index]);
        pa.delay_s
            .total_cmp(&pb.delay_s)
            .then(pa.aoa_rad.total_cmp(&pb.aoa_rad))
            .then(pb.power_db.total_cmp(&pa.power_db))
            .then(a.peak_index.cmp(&b.peak_index))
    });
    clusters
}

/// Free-space path loss model: Friis plus an optional constant offset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeSpace {
    pub c: f64,
    pub offset_db: f64,
}

impl Default for FreeSpace {
    fn default() -> Self {
        FreeSpace {
            c: SPEED_OF_LIGHT,
            offset_db: 0.0,
        }
    }
}

impl FreeSpace {
    pub fn with_c(c: f64) -> Self {
        FreeSpace { c, offset_db: 0.0 }
    }

    pub fn loss_db(&self, distance_m: f64, freq_hz: f64) -> Result<f64> {
        if !(distance_m > 0.0 && distance_m.is_finite()) {
            return Err(Error::Domain(format!("FSPL distance {distance_m} m must be positive")));
        }
        if !(freq_hz > 0.0 && freq_hz.is_finite()) {
            return Err(Error::Domain(format!("FSPL frequency {freq_hz} Hz must be positive")));
        }
        let arg = 4.0 * std::f64::consts::PI * distance_m * freq_hz / self.c;
        Ok(20.0 * arg.log10() + self.offset_db)
    }
}

/// Friis free-space path loss with the exact speed of light.
pub fn fspl_db(distance_m: f64, freq_hz: f64) -> Result<f64> {
    FreeSpace::default().loss_db(distance_m, freq_hz)
}

/// Excess loss of a peak over free space at its own path length:
/// `-FSPL(delay c) - P`, with `P` the gain-free received power.
pub fn reflection_loss(peak: &MpcRecord, freq_hz: f64, model: &FreeSpace) -> Result<f64> {
    Ok(-model.loss_db(peak.path_len_m(model.c), freq_hz)? - peak.power_db)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Threshold {
    /// The a-th smallest reflection loss among the peaks.
    pub rl_ref_db: f64,
    /// Per-peak power threshold, same order as the input.
    pub thresholds_db: Vec<f64>,
}

impl Threshold {
    pub fn passes(&self, i: usize, power_db: f64) -> bool {
        power_db > self.thresholds_db[i]
    }
}

/// Power threshold per peak: `-FSPL(delay_i c) - 2 RL_ref`, so a peak
/// passes exactly when its own reflection loss is below `2 RL_ref`.
///
/// `peaks` pairs each cluster peak with its reflection loss.
pub fn power_threshold(
    peaks: &[(MpcRecord, f64)],
    link: LinkCondition,
    freq_hz: f64,
    model: &FreeSpace,
) -> Result<Threshold> {
    let rank = link.reference_rank();
    if peaks.len() < rank {
        return Err(Error::TooFewClusters {
            need: rank,
            found: peaks.len(),
        });
    }
    let mut losses: Vec<f64> = peaks.iter().map(|(_, rl)| *rl).collect();
    losses.sort_by(f64::total_cmp);
    let rl_ref_db = losses[rank - 1];
    let thresholds_db = peaks
        .iter()
        .map(|(m, _)| Ok(-model.loss_db(m.path_len_m(model.c), freq_hz)? - 2.0 * rl_ref_db))
        .collect::<Result<Vec<_>>>()?;
    Ok(Threshold {
        rl_ref_db,
        thresholds_db,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverKind {
    ClosedForm,
    RootFind,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructParams {
    pub cluster: ClusterParams,
    pub path_loss: FreeSpace,
    /// Delay resolution; a LoS-case peak within one quantum of the baseline
    /// is taken as the direct path.
    pub delay_quantum_s: f64,
    /// Floor on the direct-path match tolerance when the quantum is zero.
    pub los_tolerance_m: f64,
    pub solver: SolverConfig,
    pub solver_kind: SolverKind,
}

impl Default for ReconstructParams {
    fn default() -> Self {
        ReconstructParams {
            cluster: ClusterParams::default(),
            path_loss: FreeSpace::default(),
            delay_quantum_s: 1.0 / 1.2e9,
            los_tolerance_m: 1e-6,
            solver: SolverConfig::default(),
            solver_kind: SolverKind::ClosedForm,
        }
    }
}

impl ReconstructParams {
    pub fn c(&self) -> f64 {
        self.path_loss.c
    }

    fn los_tolerance(&self) -> f64 {
        (self.delay_quantum_s * self.c()).max(self.los_tolerance_m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SkipReason {
    DirectPath,
    BelowThreshold { power_db: f64, threshold_db: f64 },
    Unsolvable(SolveError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skipped {
    pub cluster_id: usize,
    pub mpc_index: usize,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeReconstruction {
    pub ue_id: String,
    pub estimates: Vec<RpEstimate>,
    pub skipped: Vec<Skipped>,
    pub clusters: Vec<Cluster>,
    /// `None` when no reflected peak was left to threshold.
    pub rl_ref_db: Option<f64>,
}

/// Runs the full single-UE reconstruction.
///
/// Solver failures on individual peaks are recorded in `skipped`. If the
/// direct path is the only peak, the result is empty rather than an error.
pub fn reconstruct_ue(obs: &UeObservation, freq_hz: f64, params: &ReconstructParams) -> Result<UeReconstruction> {
    params.cluster.validate()?;
    let c = params.c();
    let clusters = cluster_mpcs(obs, &params.cluster);
    let mut out = UeReconstruction {
        ue_id: obs.ue_id.clone(),
        estimates: Vec::new(),
        skipped: Vec::new(),
        clusters: Vec::new(),
        rl_ref_db: None,
    };

    let baseline = obs.baseline_m();
    let los_tol = params.los_tolerance();
    let is_direct = |m: &MpcRecord| obs.link.is_los() && (m.path_len_m(c) - baseline).abs() <= los_tol;

    if clusters.iter().all(|cl| is_direct(&obs.mpcs[cl.peak_index])) {
        for (cluster_id, cl) in clusters.iter().enumerate() {
            out.skipped.push(Skipped {
                cluster_id,
                mpc_index: cl.peak_index,
                reason: SkipReason::DirectPath,
            });
        }
        out.clusters = clusters;
        return Ok(out);
    }

    let peaks = clusters
        .iter()
        .map(|cl| {
            let m = obs.mpcs[cl.peak_index];
            Ok((m, reflection_loss(&m, freq_hz, &params.path_loss)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let threshold = power_threshold(&peaks, obs.link, freq_hz, &params.path_loss)?;
    out.rl_ref_db = Some(threshold.rl_ref_db);
    debug!(
        "UE {}: {} clusters, RL_ref {:.3} dB",
        obs.ue_id,
        clusters.len(),
        threshold.rl_ref_db
    );

    for (cluster_id, cl) in clusters.iter().enumerate() {
        let m = &obs.mpcs[cl.peak_index];
        let skip = |reason| Skipped {
            cluster_id,
            mpc_index: cl.peak_index,
            reason,
        };
        if is_direct(m) {
            out.skipped.push(skip(SkipReason::DirectPath));
            continue;
        }
        if !threshold.passes(cluster_id, m.power_db) {
            out.skipped.push(skip(SkipReason::BelowThreshold {
                power_db: m.power_db,
                threshold_db: threshold.thresholds_db[cluster_id],
            }));
            continue;
        }
        let input = SolveInput::from_mpc(obs.ue_pos, m, c);
        let solved = match params.solver_kind {
            SolverKind::ClosedForm => solve_rp_closed_form_with(&input, &params.solver),
            SolverKind::RootFind => solve_rp_root_find(&input, &params.solver),
        };
        match solved {
            Ok(s) => out.estimates.push(RpEstimate {
                o: s.o,
                r_m: s.r_m,
                theta_rad: s.theta_rad,
                ue_id: obs.ue_id.clone(),
                cluster_id,
                source_power_db: m.power_db,
                mpc_index: Some(cl.peak_index),
            }),
            Err(e) => {
                info!("UE {} cluster {cluster_id}: skipped, {e}", obs.ue_id);
                out.skipped.push(skip(SkipReason::Unsolvable(e)));
            }
        }
    }
    out.clusters = clusters;
    Ok(out)
}

/// Reconstructs every UE independently; results come back sorted by UE id.
pub fn reconstruct_all(
    observations: &[UeObservation],
    freq_hz: f64,
    params: &ReconstructParams,
) -> Result<Vec<UeReconstruction>> {
    let mut all = observations
        .par_iter()
        .filter(|o| !o.mpcs.is_empty())
        .map(|o| reconstruct_ue(o, freq_hz, params))
        .collect::<Result<Vec<_>>>()?;
    all.sort_by(|a, b| a.ue_id.cmp(&b.ue_id));
    Ok(all)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudPoint {
    pub estimate: RpEstimate,
    /// Index of an earlier point within the dedupe radius, if any.
    pub duplicate_of: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<CloudPoint>,
}

impl PointCloud {
    pub fn estimates(&self) -> impl Iterator<Item = &RpEstimate> {
        self.points.iter().map(|p| &p.estimate)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn duplicate_count(&self) -> usize {
        self.points.iter().filter(|p| p.duplicate_of.is_some()).count()
    }
}

pub const DEFAULT_DEDUPE_EPS_M: f64 = 0.1;

/// Concatenates per-UE estimates ordered by (UE id, cluster id). A point
/// within `dedupe_eps_m` of an earlier point is kept and marked.
pub fn merge_rps<I>(per_ue: I, dedupe_eps_m: f64) -> PointCloud
where
    I: IntoIterator<Item = Vec<RpEstimate>>,
{
    let mut all: Vec<RpEstimate> = per_ue.into_iter().flatten().collect();
    all.sort_by(|a, b| a.ue_id.cmp(&b.ue_id).then(a.cluster_id.cmp(&b.cluster_id)));
    let mut points: Vec<CloudPoint> = Vec::with_capacity(all.len());
    for estimate in all {
        let duplicate_of = points
            .iter()
            .position(|p| p.estimate.o.distance(estimate.o) <= dedupe_eps_m);
        points.push(CloudPoint { estimate, duplicate_of });
    }
    PointCloud { points }
}

/// Reconstructs every observation of `scenario` and merges the estimates
/// into one cloud in the scenario frame (observations are BS-relative).
pub fn reconstruct_scenario(
    scenario: &Scenario,
    observations: &[UeObservation],
    params: &ReconstructParams,
    dedupe_eps_m: f64,
) -> Result<(PointCloud, Vec<UeReconstruction>)> {
    let recs = reconstruct_all(observations, scenario.config.carrier_freq_hz, params)?;
    let cloud = merge_rps(
        recs.iter().map(|r| {
            r.estimates
                .iter()
                .cloned()
                .map(|mut e| {
                    e.o = e.o + scenario.bs;
                    e
                })
                .collect()
        }),
        dedupe_eps_m,
    );
    Ok((cloud, recs))
}
