//! Two-dimensional image-source channel simulator.
//!
//! Specular paths up to second order are found by mirroring the BS across
//! walls and intersecting image-to-UE lines with the wall segments. Every
//! leg is checked for obstruction against every wall. Received power is
//! free-space loss plus the constant loss of each wall touched.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::model::{
    aoa_from_direction, normalize_angle, Environment, LinkCondition, MpcRecord, Point2, UeObservation, Wall,
    SPEED_OF_LIGHT,
};
use crate::pipeline::FreeSpace;
use crate::solver::mirror_point;

/// Parametric slack used for segment containment and leg obstruction.
const PARAM_EPS: f64 = 1e-9;
/// Distance below which a terminal counts as lying on a wall.
const ON_WALL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// 1 or 2.
    pub max_order: u8,
    /// 0 disables delay rounding.
    pub delay_quantum_s: f64,
    /// 0 disables angle rounding.
    pub angle_quantum_rad: f64,
    pub include_los: bool,
    pub c: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            max_order: 1,
            delay_quantum_s: 1.0 / 1.2e9,
            angle_quantum_rad: 0.0,
            include_los: true,
            c: SPEED_OF_LIGHT,
        }
    }
}

impl SimOptions {
    /// Exact geometry, no rounding.
    pub fn exact(max_order: u8) -> Self {
        SimOptions {
            max_order,
            delay_quantum_s: 0.0,
            angle_quantum_rad: 0.0,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.max_order) {
            return Err(Error::invalid(
                "simulation options",
                format!("max_order {} not in 1..=2", self.max_order),
            ));
        }
        if !(self.delay_quantum_s >= 0.0 && self.angle_quantum_rad >= 0.0) {
            return Err(Error::invalid("simulation options", "quanta must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthPath {
    /// 0 for the direct path.
    pub order: usize,
    /// Bounce points from the BS side to the UE side.
    pub rp_points: Vec<Point2>,
    /// Index of the wall hit at each bounce.
    pub walls: Vec<usize>,
    pub total_len_m: f64,
    pub aoa_rad: f64,
    pub power_db: f64,
}

impl GroundTruthPath {
    /// Bounce nearest the UE; this is what a single-UE solve recovers.
    pub fn last_rp(&self) -> Option<Point2> {
        self.rp_points.last().copied()
    }

    pub fn polyline_len(&self, bs: Point2, ue: Point2) -> f64 {
        let mut pts = vec![bs];
        pts.extend(&self.rp_points);
        pts.push(ue);
        pts.windows(2).map(|w| w[0].distance(w[1])).sum()
    }
}

/// Intersection parameter of segment `a→b` with segment `w1→w2`, as
/// `(t along a→b, s along w1→w2)`. `None` when (nearly) parallel.
fn segment_params(a: Point2, b: Point2, w1: Point2, w2: Point2) -> Option<(f64, f64)> {
    let d = b - a;
    let e = w2 - w1;
    let denom = d.cross(e);
    if denom.abs() <= 1e-15 * d.norm() * e.norm() {
        return None;
    }
    let f = w1 - a;
    Some((f.cross(e) / denom, f.cross(d) / denom))
}

/// True when the open leg `a→b` crosses any wall.
fn leg_blocked(a: Point2, b: Point2, walls: &[Wall]) -> bool {
    walls.iter().any(|w| match segment_params(a, b, w.p1, w.p2) {
        Some((t, s)) => t > PARAM_EPS && t < 1.0 - PARAM_EPS && (-PARAM_EPS..=1.0 + PARAM_EPS).contains(&s),
        None => false,
    })
}

/// Point where `from→to` meets wall `w`, if it lies strictly between the
/// two points and within the segment.
fn hit_point(from: Point2, to: Point2, w: &Wall) -> Option<Point2> {
    let (t, s) = segment_params(from, to, w.p1, w.p2)?;
    (t > PARAM_EPS && t < 1.0 - PARAM_EPS && (0.0..=1.0).contains(&s)).then(|| from + (to - from) * t)
}

fn mirror_across(p: Point2, w: &Wall) -> Point2 {
    mirror_point(p, w.p1, (w.p2 - w.p1).arg())
}

fn path_power(model: &FreeSpace, len: f64, freq: f64, walls: &[&Wall]) -> Result<f64> {
    let rl: f64 = walls.iter().map(|w| w.reflection_loss_db).sum();
    Ok(-model.loss_db(len, freq)? - rl)
}

/// Enumerates the specular paths between `bs` and `ue`.
pub fn trace_paths(env: &Environment, bs: Point2, ue: Point2, opts: &SimOptions) -> Result<Vec<GroundTruthPath>> {
    opts.validate()?;
    for (label, p) in [("BS", bs), ("UE", ue)] {
        if let Some(w) = env.walls.iter().find(|w| w.distance_to(p) < ON_WALL_EPS) {
            return Err(Error::Geometry(format!("{label} at {p} lies on wall '{}'", w.name)));
        }
    }
    if bs.distance(ue) < ON_WALL_EPS {
        return Err(Error::Geometry("UE coincides with the BS".into()));
    }
    let model = FreeSpace::with_c(opts.c);
    let freq = env.carrier_freq_hz;
    let walls = &env.walls;
    let mut out = Vec::new();

    if opts.include_los && !leg_blocked(bs, ue, walls) {
        let len = bs.distance(ue);
        out.push(GroundTruthPath {
            order: 0,
            rp_points: vec![],
            walls: vec![],
            total_len_m: len,
            aoa_rad: aoa_from_direction(bs - ue),
            power_db: path_power(&model, len, freq, &[])?,
        });
    }

    for (i, wi) in walls.iter().enumerate() {
        let image = mirror_across(bs, wi);
        let Some(rp) = hit_point(image, ue, wi) else { continue };
        if leg_blocked(bs, rp, walls) || leg_blocked(rp, ue, walls) {
            continue;
        }
        let len = image.distance(ue);
        out.push(GroundTruthPath {
            order: 1,
            rp_points: vec![rp],
            walls: vec![i],
            total_len_m: len,
            aoa_rad: aoa_from_direction(rp - ue),
            power_db: path_power(&model, len, freq, &[wi])?,
        });
    }

    if opts.max_order >= 2 {
        for (i, wi) in walls.iter().enumerate() {
            let image1 = mirror_across(bs, wi);
            for (j, wj) in walls.iter().enumerate() {
                if i == j {
                    continue;
                }
                let image2 = mirror_across(image1, wj);
                let Some(rp2) = hit_point(image2, ue, wj) else { continue };
                let Some(rp1) = hit_point(image1, rp2, wi) else {
                    continue;
                };
                if leg_blocked(bs, rp1, walls) || leg_blocked(rp1, rp2, walls) || leg_blocked(rp2, ue, walls) {
                    continue;
                }
                let len = image2.distance(ue);
                out.push(GroundTruthPath {
                    order: 2,
                    rp_points: vec![rp1, rp2],
                    walls: vec![i, j],
                    total_len_m: len,
                    aoa_rad: aoa_from_direction(rp2 - ue),
                    power_db: path_power(&model, len, freq, &[wi, wj])?,
                });
            }
        }
    }
    Ok(out)
}

/// Simulates one UE with the BS at the origin. MPC `k` of the returned
/// observation corresponds to ground-truth path `k`.
pub fn simulate_observation(
    env: &Environment,
    ue_id: &str,
    ue_pos: Point2,
    opts: &SimOptions,
) -> Result<(UeObservation, Vec<GroundTruthPath>)> {
    simulate_bistatic(env, Point2::ORIGIN, ue_id, ue_pos, opts)
}

/// Simulates one UE against a BS at `bs`. The returned observation is
/// expressed relative to the BS (its `ue_pos` is `ue_pos - bs`); ground-truth
/// points stay in the scenario frame.
pub fn simulate_bistatic(
    env: &Environment,
    bs: Point2,
    ue_id: &str,
    ue_pos: Point2,
    opts: &SimOptions,
) -> Result<(UeObservation, Vec<GroundTruthPath>)> {
    let paths = trace_paths(env, bs, ue_pos, opts)?;
    let mpcs = paths
        .iter()
        .map(|p| MpcRecord::new(p.power_db, p.total_len_m / opts.c, p.aoa_rad))
        .collect::<Result<Vec<_>>>()?;
    let link = LinkCondition::from_los(paths.iter().any(|p| p.order == 0));
    let obs = UeObservation::new(ue_id, ue_pos - bs, link, mpcs)?;
    Ok((quantize(&obs, opts), paths))
}

fn round_to(x: f64, q: f64) -> f64 {
    if q > 0.0 {
        (x / q).round() * q
    } else {
        x
    }
}

fn quantize_angle(a: f64, q: f64) -> f64 {
    if q <= 0.0 {
        return a;
    }
    let r = round_to(normalize_angle(a), q);
    // the grid may not close at 2π; wrap the top cell onto 0, which is on the grid
    if r >= TAU - 1e-12 {
        0.0
    } else {
        r
    }
}

/// Rounds delays and angles to the nearest multiple of their quanta.
pub fn quantize(obs: &UeObservation, opts: &SimOptions) -> UeObservation {
    let mut out = obs.clone();
    for m in &mut out.mpcs {
        let d = round_to(m.delay_s, opts.delay_quantum_s);
        // never round a delay down to zero
        if d > 0.0 {
            m.delay_s = d;
        }
        m.aoa_rad = quantize_angle(m.aoa_rad, opts.angle_quantum_rad);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::wall_tangent_from_bisector;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64, rl: f64) -> Environment {
        let c = [
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ];
        let walls = (0..4)
            .map(|i| Wall::new(c[i], c[(i + 1) % 4], rl, format!("w{i}")).unwrap())
            .collect();
        Environment::new(walls, 300e9).unwrap()
    }

    #[test]
    fn floor_bounce_hand_example() {
        let env = rect(-2.0, 0.0, 8.0, 6.0, 5.0);
        let bs = Point2::new(1.0, 1.0);
        let ue = Point2::new(5.0, 1.0);
        let paths = trace_paths(&env, bs, ue, &SimOptions::exact(1)).unwrap();
        let floor = paths.iter().find(|p| p.walls == vec![0]).unwrap();
        let rp = floor.rp_points[0];
        assert_abs_diff_eq!(rp.x, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rp.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(floor.total_len_m, 4.472_14, epsilon = 1e-5);
        assert_abs_diff_eq!(floor.aoa_rad.to_degrees(), 153.435, epsilon = 1e-3);
        let expected = -crate::pipeline::fspl_db(20f64.sqrt(), 300e9).unwrap() - 5.0;
        assert_abs_diff_eq!(floor.power_db, expected, epsilon = 1e-12);
    }

    #[test]
    fn los_flag_contract() {
        let env = rect(-5.0, -5.0, 5.0, 5.0, 5.0);
        let ue = Point2::new(2.0, 1.0);
        let with = trace_paths(&env, Point2::ORIGIN, ue, &SimOptions::exact(1)).unwrap();
        assert_eq!(with.iter().filter(|p| p.order == 0).count(), 1);
        assert_eq!(with.len(), 5);
        let opts = SimOptions {
            include_los: false,
            ..SimOptions::exact(1)
        };
        let without = trace_paths(&env, Point2::ORIGIN, ue, &opts).unwrap();
        assert!(without.iter().all(|p| p.order > 0));
        let (obs, _) = simulate_observation(&env, "u", ue, &opts).unwrap();
        assert_eq!(obs.link, LinkCondition::Nlos);
    }

    #[test]
    fn terminal_on_wall_rejected() {
        let env = rect(-5.0, -5.0, 5.0, 5.0, 5.0);
        let err = trace_paths(&env, Point2::ORIGIN, Point2::new(5.0, 0.0), &SimOptions::exact(1)).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
    }

    #[test]
    fn blocked_direct_path() {
        let mut env = rect(-5.0, -5.0, 5.0, 5.0, 5.0);
        env.walls
            .push(Wall::new(Point2::new(1.0, -2.0), Point2::new(1.0, 2.0), 5.0, "screen").unwrap());
        let paths = trace_paths(&env, Point2::ORIGIN, Point2::new(3.0, 0.0), &SimOptions::exact(2)).unwrap();
        assert!(paths.iter().all(|p| p.order > 0));
        for p in &paths {
            let mut pts = vec![Point2::ORIGIN];
            pts.extend(&p.rp_points);
            pts.push(Point2::new(3.0, 0.0));
            for leg in pts.windows(2) {
                assert!(!leg_blocked(leg[0], leg[1], &env.walls));
            }
        }
    }

    #[test]
    fn quantize_examples() {
        let opts = SimOptions {
            delay_quantum_s: 1.0 / 1.2e9,
            ..SimOptions::exact(1)
        };
        let obs = UeObservation::new(
            "u",
            Point2::new(1.0, 0.0),
            LinkCondition::Nlos,
            vec![MpcRecord::new(-80.0, 10.1e-9, 0.3).unwrap()],
        )
        .unwrap();
        let q = quantize(&obs, &opts);
        assert_abs_diff_eq!(q.mpcs[0].delay_s, 10.0e-9, epsilon = 1e-18);
        assert_eq!(q.mpcs[0].aoa_rad, 0.3);
        assert_eq!(quantize(&obs, &SimOptions::exact(1)), obs);
    }

    #[test]
    fn top_angle_cell_wraps_to_zero() {
        assert_eq!(quantize_angle(359.9f64.to_radians(), 1f64.to_radians()), 0.0);
        let q = 7f64.to_radians();
        let a = quantize_angle(358f64.to_radians(), q);
        assert_eq!(quantize_angle(a, q), a);
    }

    proptest! {
        #[test]
        fn quantize_idempotent(delay in 1e-9f64..1e-6, aoa in 0f64..std::f64::consts::TAU, dq in 1e-11f64..2e-9, aq in 1e-3f64..0.5) {
            let opts = SimOptions { delay_quantum_s: dq, angle_quantum_rad: aq, ..SimOptions::exact(1) };
            let obs = UeObservation::new("u", Point2::new(1.0, 0.0), LinkCondition::Nlos,
                vec![MpcRecord::new(-80.0, delay, aoa).unwrap()]).unwrap();
            let once = quantize(&obs, &opts);
            prop_assert_eq!(quantize(&once, &opts), once);
        }

        #[test]
        fn first_order_paths_are_specular(
            w in 4f64..30.0, h in 4f64..30.0, fx in 0.05f64..0.95, fy in 0.05f64..0.95,
            gx in 0.05f64..0.95, gy in 0.05f64..0.95,
        ) {
            let env = rect(-fx * w, -fy * h, (1.0 - fx) * w, (1.0 - fy) * h, 6.0);
            let ue = Point2::new((gx - fx) * w, (gy - fy) * h);
            prop_assume!(ue.norm() > 0.1);
            let paths = trace_paths(&env, Point2::ORIGIN, ue, &SimOptions::exact(2)).unwrap();
            for p in &paths {
                prop_assert!((p.polyline_len(Point2::ORIGIN, ue) - p.total_len_m).abs() < 1e-12 * p.total_len_m.max(1.0) * 10.0);
                if p.order == 1 {
                    let wall = &env.walls[p.walls[0]];
                    let t = wall_tangent_from_bisector(p.rp_points[0], ue).unwrap();
                    prop_assert!(crate::model::wrap_angle(2.0 * (t - wall.tangent_angle())).abs() < 2e-9);
                    let image = mirror_across(Point2::ORIGIN, wall);
                    prop_assert!((image.distance(ue) - p.total_len_m).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn reciprocity(w in 4f64..30.0, h in 4f64..30.0, fx in 0.05f64..0.95, fy in 0.05f64..0.95,
                       gx in 0.05f64..0.95, gy in 0.05f64..0.95) {
            let env = rect(-fx * w, -fy * h, (1.0 - fx) * w, (1.0 - fy) * h, 6.0);
            let ue = Point2::new((gx - fx) * w, (gy - fy) * h);
            prop_assume!(ue.norm() > 0.1);
            let mut fwd: Vec<f64> = trace_paths(&env, Point2::ORIGIN, ue, &SimOptions::exact(2)).unwrap()
                .iter().map(|p| p.total_len_m).collect();
            let mut rev: Vec<f64> = trace_paths(&env, ue, Point2::ORIGIN, &SimOptions::exact(2)).unwrap()
                .iter().map(|p| p.total_len_m).collect();
            fwd.sort_by(f64::total_cmp);
            rev.sort_by(f64::total_cmp);
            prop_assert_eq!(fwd.len(), rev.len());
            for (a, b) in fwd.iter().zip(&rev) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
