//! Domain types shared by the solver, pipeline, simulator and metrics.
//!
//! Coordinates live in the azimuth plane with the base station (BS) at the
//! origin. A UE at `(a, b)` receives a multipath component (MPC) with azimuth
//! angle of arrival `A`; the unit vector pointing from the UE back along the
//! arriving ray is `(cos A, -sin A)`, so a reflection point at distance `r`
//! from the UE sits at `(a + r cos A, b - r sin A)`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod io;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    /// Builds a point, rejecting NaN and infinite coordinates.
    pub fn checked(x: f64, y: f64, record: &str) -> Result<Self> {
        if x.is_finite() && y.is_finite() {
            Ok(Point2 { x, y })
        } else {
            Err(Error::invalid(record, format!("non-finite coordinate ({x}, {y})")))
        }
    }

    /// Unit vector at angle `phi` (counter-clockwise from +x).
    pub fn from_angle(phi: f64) -> Self {
        Point2::new(phi.cos(), phi.sin())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    /// Two-argument arctangent of `(y, x)`, in `(-π, π]`.
    pub fn arg(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn normalized(self) -> Option<Point2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Reduces an angle to `[0, 2π)`.
pub fn normalize_angle(rad: f64) -> f64 {
    let r = rad.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Reduces an angle to `(-π, π]`.
pub fn wrap_angle(rad: f64) -> f64 {
    let r = normalize_angle(rad);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Direction from the UE back toward the source of an MPC arriving at `aoa_rad`.
pub fn arrival_direction(aoa_rad: f64) -> Point2 {
    Point2::new(aoa_rad.cos(), -aoa_rad.sin())
}

/// The azimuth angle of arrival whose arrival direction is `dir`.
pub fn aoa_from_direction(dir: Point2) -> f64 {
    normalize_angle((-dir.y).atan2(dir.x))
}

/// One detected multipath component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpcRecord {
    /// Received power with antenna gains removed, dB.
    pub power_db: f64,
    /// Propagation delay, seconds.
    pub delay_s: f64,
    /// Azimuth angle of arrival in `[0, 2π)`.
    pub aoa_rad: f64,
}

impl MpcRecord {
    pub fn new(power_db: f64, delay_s: f64, aoa_rad: f64) -> Result<Self> {
        Self::checked(power_db, delay_s, aoa_rad, "MPC")
    }

    pub(crate) fn checked(power_db: f64, delay_s: f64, aoa_rad: f64, record: &str) -> Result<Self> {
        if !power_db.is_finite() {
            return Err(Error::invalid(record, format!("non-finite power {power_db}")));
        }
        if !(delay_s.is_finite() && delay_s > 0.0) {
            return Err(Error::invalid(record, format!("nonphysical delay {delay_s} s")));
        }
        if !aoa_rad.is_finite() {
            return Err(Error::invalid(record, format!("non-finite angle {aoa_rad}")));
        }
        Ok(MpcRecord {
            power_db,
            delay_s,
            aoa_rad: normalize_angle(aoa_rad),
        })
    }

    pub fn path_len_m(&self, c: f64) -> f64 {
        self.delay_s * c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkCondition {
    Los,
    Nlos,
}

impl LinkCondition {
    pub fn from_los(los: bool) -> Self {
        if los {
            LinkCondition::Los
        } else {
            LinkCondition::Nlos
        }
    }

    pub fn is_los(self) -> bool {
        self == LinkCondition::Los
    }

    /// Rank of the reference reflection loss among cluster peaks: the LoS
    /// peak itself always takes the smallest slot, so LoS uses the second.
    pub fn reference_rank(self) -> usize {
        match self {
            LinkCondition::Los => 2,
            LinkCondition::Nlos => 1,
        }
    }
}

/// One receiver position together with everything it measured.
#[derive(Debug, Clone, PartialEq)]
pub struct UeObservation {
    pub ue_id: String,
    /// Position relative to the BS, which sits at the origin.
    pub ue_pos: Point2,
    pub link: LinkCondition,
    pub mpcs: Vec<MpcRecord>,
}

impl UeObservation {
    pub fn new(ue_id: impl Into<String>, ue_pos: Point2, link: LinkCondition, mpcs: Vec<MpcRecord>) -> Result<Self> {
        let ue_id = ue_id.into();
        if !ue_pos.is_finite() {
            return Err(Error::invalid(format!("UE {ue_id}"), "non-finite position"));
        }
        if ue_pos == Point2::ORIGIN {
            return Err(Error::invalid(format!("UE {ue_id}"), "UE coincides with the BS"));
        }
        Ok(UeObservation {
            ue_id,
            ue_pos,
            link,
            mpcs,
        })
    }

    /// Straight-line BS-UE distance.
    pub fn baseline_m(&self) -> f64 {
        self.ue_pos.norm()
    }

    /// Rejects MPCs whose path is shorter than the BS-UE baseline by more
    /// than `slack_m`.
    pub fn check_physical(&self, c: f64, slack_m: f64) -> Result<()> {
        let d = self.baseline_m();
        for (i, m) in self.mpcs.iter().enumerate() {
            let len = m.path_len_m(c);
            if len < d - slack_m {
                return Err(Error::invalid(
                    format!("UE {} MPC #{i}", self.ue_id),
                    format!("nonphysical delay: path {len:.6} m shorter than baseline {d:.6} m"),
                ));
            }
        }
        Ok(())
    }
}

/// A planar reflector segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub p1: Point2,
    pub p2: Point2,
    /// Constant loss applied per bounce, dB.
    #[serde(rename = "rl_db")]
    pub reflection_loss_db: f64,
    #[serde(default)]
    pub name: String,
}

impl Wall {
    pub fn new(p1: Point2, p2: Point2, reflection_loss_db: f64, name: impl Into<String>) -> Result<Self> {
        let w = Wall {
            p1,
            p2,
            reflection_loss_db,
            name: name.into(),
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let record = || format!("wall '{}'", self.name);
        if !(self.p1.is_finite() && self.p2.is_finite()) {
            return Err(Error::invalid(record(), "non-finite endpoint"));
        }
        if self.length() <= 0.0 {
            return Err(Error::invalid(record(), "zero-length segment"));
        }
        if !(self.reflection_loss_db.is_finite() && self.reflection_loss_db >= 0.0) {
            return Err(Error::invalid(
                record(),
                format!("reflection loss {} dB must be finite and >= 0", self.reflection_loss_db),
            ));
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.p1.distance(self.p2)
    }

    /// Orientation of the segment in `(-π/2, π/2]`.
    pub fn tangent_angle(&self) -> f64 {
        reduce_half_turn((self.p2 - self.p1).arg())
    }

    /// Euclidean distance from `p` to the closed segment.
    pub fn distance_to(&self, p: Point2) -> f64 {
        let d = self.p2 - self.p1;
        let t = ((p - self.p1).dot(d) / d.norm_sq()).clamp(0.0, 1.0);
        p.distance(self.p1 + d * t)
    }
}

/// Reduces an angle modulo π to `(-π/2, π/2]`.
pub fn reduce_half_turn(rad: f64) -> f64 {
    let r = (rad + std::f64::consts::FRAC_PI_2).rem_euclid(PI);
    // r in [0, π); map 0 to the upper end so the interval is half-open below
    if r == 0.0 {
        std::f64::consts::FRAC_PI_2
    } else {
        r - std::f64::consts::FRAC_PI_2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub walls: Vec<Wall>,
    pub carrier_freq_hz: f64,
}

impl Environment {
    pub fn new(walls: Vec<Wall>, carrier_freq_hz: f64) -> Result<Self> {
        if !(carrier_freq_hz.is_finite() && carrier_freq_hz > 0.0) {
            return Err(Error::invalid(
                "environment",
                format!("carrier frequency {carrier_freq_hz} Hz must be positive"),
            ));
        }
        for w in &walls {
            w.validate()?;
        }
        Ok(Environment { walls, carrier_freq_hz })
    }
}

/// A solved reflection point with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct RpEstimate {
    pub o: Point2,
    /// Distance from the UE to the reflection point.
    pub r_m: f64,
    /// Inclination of the reflecting face.
    pub theta_rad: f64,
    pub ue_id: String,
    pub cluster_id: usize,
    pub source_power_db: f64,
    /// Index of the peak MPC in the UE's record list; not persisted.
    pub mpc_index: Option<usize>,
}

/// Measurement-level settings carried by a scenario file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub carrier_freq_hz: f64,
    pub tx_gain_db: f64,
    pub rx_gain_db: f64,
}

impl ScenarioConfig {
    pub fn total_gain_db(&self) -> f64 {
        self.tx_gain_db + self.rx_gain_db
    }
}

/// A receiver declared in a scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct UeSpec {
    pub id: String,
    /// Position in the scenario frame.
    pub pos: Point2,
    pub link: LinkCondition,
}

/// Everything in a scenario file. Positions are kept in the file's frame;
/// `bs` is usually the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub bs: Point2,
    pub env: Environment,
    pub ues: Vec<UeSpec>,
}

impl Scenario {
    pub fn ue(&self, id: &str) -> Option<&UeSpec> {
        self.ues.iter().find(|u| u.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn normalizes_370_degrees() {
        assert_abs_diff_eq!(
            normalize_angle(370f64.to_radians()),
            10f64.to_radians(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(normalize_angle(10f64.to_radians()), 0.174_532_925, epsilon = 1e-9);
        assert_eq!(normalize_angle(-1e-300), 0.0);
    }

    #[test]
    fn rejects_negative_delay() {
        let err = MpcRecord::new(-80.0, -1e-9, 0.0).unwrap_err();
        assert!(err.to_string().contains("nonphysical delay"), "{err}");
    }

    #[test]
    fn ue_at_bs_rejected() {
        assert!(UeObservation::new("u", Point2::ORIGIN, LinkCondition::Los, vec![]).is_err());
    }

    #[test]
    fn wall_invariants() {
        let p = Point2::new(1.0, 1.0);
        assert!(Wall::new(p, p, 3.0, "dot").is_err());
        assert!(Wall::new(p, Point2::ORIGIN, f64::NAN, "nan").is_err());
        assert!(Wall::new(p, Point2::ORIGIN, -1.0, "neg").is_err());
        let w = Wall::new(Point2::new(0.0, 5.0), Point2::new(0.0, -5.0), 0.0, "v").unwrap();
        assert_abs_diff_eq!(w.tangent_angle(), std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn half_turn_reduction_bounds() {
        use std::f64::consts::FRAC_PI_2;
        assert_eq!(reduce_half_turn(FRAC_PI_2), FRAC_PI_2);
        assert_abs_diff_eq!(reduce_half_turn(-FRAC_PI_2), FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(reduce_half_turn(PI), 0.0, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn angle_normalization_idempotent(a in -100.0f64..100.0) {
            let n = normalize_angle(a);
            prop_assert!((0.0..TAU).contains(&n));
            prop_assert_eq!(normalize_angle(n), n);
            let w = wrap_angle(a);
            prop_assert!(w > -PI && w <= PI);
        }

        #[test]
        fn aoa_direction_round_trip(a in 0.0f64..TAU) {
            let back = aoa_from_direction(arrival_direction(a));
            prop_assert!(wrap_angle(back - a).abs() < 1e-12);
        }
    }
}
