//! Reflection-point and face-inclination solving for one MPC.
//!
//! With the BS at the origin, the UE at `p`, arrival direction `u` and total
//! path length `L`, the reflection point `O = p + r u` must satisfy
//! `|O| + r = L`.  Two unknowns describe the bounce: the UE-side leg length
//! `r` and the inclination `θ` of the reflecting face, tied together by
//!
//! * the law of cosines in the BS-UE-O triangle,
//!   `(L - r)² + r² - 2 (L - r) r cos(2A - 2θ) = |p|²`, and
//! * the direction constraint `arg O = A - 2θ`.
//!
//! [`solve_rp_closed_form`] eliminates `θ` analytically;
//! [`solve_rp_root_find`] runs a damped Newton iteration on the pair and is
//! kept as an independent cross-check.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use crate::model::{arrival_direction, reduce_half_turn, wrap_angle, MpcRecord, Point2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("path length {path_len_m} m does not exceed baseline {baseline_m} m")]
    EllipseDegenerate { path_len_m: f64, baseline_m: f64 },
    #[error("reflection point behind the UE (r = {r_m} m)")]
    BehindBaseline { r_m: f64 },
    #[error("root finder did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("only the spurious law-of-cosines branch was found (r = {r_m} m)")]
    AmbiguousRoot { r_m: f64 },
    #[error("BS, reflection point and UE are collinear")]
    DegenerateBisector,
    #[error("non-finite solver input")]
    NonFinite,
}

/// One MPC expressed geometrically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveInput {
    pub ue_pos: Point2,
    pub aoa_rad: f64,
    /// BS-O-UE path length, delay times c.
    pub path_len_m: f64,
}

impl SolveInput {
    pub fn new(ue_pos: Point2, aoa_rad: f64, path_len_m: f64) -> Self {
        SolveInput {
            ue_pos,
            aoa_rad,
            path_len_m,
        }
    }

    pub fn from_mpc(ue_pos: Point2, mpc: &MpcRecord, c: f64) -> Self {
        SolveInput::new(ue_pos, mpc.aoa_rad, mpc.path_len_m(c))
    }

    fn check(&self, ellipse_eps_m: f64) -> Result<(), SolveError> {
        if !(self.ue_pos.is_finite() && self.aoa_rad.is_finite() && self.path_len_m.is_finite()) {
            return Err(SolveError::NonFinite);
        }
        let d = self.ue_pos.norm();
        if self.path_len_m <= d + ellipse_eps_m {
            return Err(SolveError::EllipseDegenerate {
                path_len_m: self.path_len_m,
                baseline_m: d,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpSolution {
    pub o: Point2,
    pub r_m: f64,
    /// Face inclination in `(-π/2, π/2]`.
    pub theta_rad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Minimum excess of path length over the baseline.
    pub ellipse_eps_m: f64,
    /// Residual tolerance for the root finder (scaled units).
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            ellipse_eps_m: 1e-9,
            tol: 1e-12,
            max_iter: 100,
        }
    }
}

/// Inclination implied by a reflection point: `(A - arg O) / 2` mod π.
fn inclination(aoa_rad: f64, o: Point2) -> f64 {
    reduce_half_turn(wrap_angle(aoa_rad - o.arg()) / 2.0)
}

/// Face inclination from the orientation of the face itself.
pub fn inclination_from_tangent(tangent_rad: f64) -> f64 {
    reduce_half_turn(FRAC_PI_2 - tangent_rad)
}

/// Face orientation (in `(-π/2, π/2]`) implied by an inclination.
pub fn tangent_from_inclination(theta_rad: f64) -> f64 {
    reduce_half_turn(FRAC_PI_2 - theta_rad)
}

pub fn solve_rp_closed_form(input: &SolveInput) -> Result<RpSolution, SolveError> {
    solve_rp_closed_form_with(input, &SolverConfig::default())
}

pub fn solve_rp_closed_form_with(input: &SolveInput, cfg: &SolverConfig) -> Result<RpSolution, SolveError> {
    input.check(cfg.ellipse_eps_m)?;
    let p = input.ue_pos;
    let u = arrival_direction(input.aoa_rad);
    let len = input.path_len_m;
    let r = (len * len - p.norm_sq()) / (2.0 * (len + p.dot(u)));
    if !(r > 0.0 && r.is_finite()) {
        return Err(SolveError::BehindBaseline { r_m: r });
    }
    // Return formula of the reconstruction step: [a + r cos A, b - r sin A].
    let o = p + u * r;
    Ok(RpSolution {
        o,
        r_m: r,
        theta_rad: inclination(input.aoa_rad, o),
    })
}

/// Relative residual of the law-of-cosines equation, with the BS-O leg taken
/// as `L - r` and the apex angle as `2A - 2θ`.
pub fn cosine_law_residual(input: &SolveInput, r_m: f64, theta_rad: f64) -> f64 {
    let d2 = input.ue_pos.norm_sq();
    let bs_o = input.path_len_m - r_m;
    let apex = 2.0 * input.aoa_rad - 2.0 * theta_rad;
    (bs_o * bs_o + r_m * r_m - 2.0 * bs_o * r_m * apex.cos() - d2).abs() / d2
}

/// Wrapped residual of `arg O = A - 2θ`, radians.
pub fn direction_residual(input: &SolveInput, o: Point2, theta_rad: f64) -> f64 {
    wrap_angle(o.arg() - (input.aoa_rad - 2.0 * theta_rad)).abs()
}

struct Residual {
    f: [f64; 2],
    jac: [[f64; 2]; 2],
}

fn residual(input: &SolveInput, u: Point2, r: f64, theta: f64) -> Residual {
    let len = input.path_len_m;
    let d2 = input.ue_pos.norm_sq();
    let apex = 2.0 * input.aoa_rad - 2.0 * theta;
    let (sin_a, cos_a) = apex.sin_cos();
    let bs_o = len - r;
    let o = input.ue_pos + u * r;
    let f1 = (bs_o * bs_o + r * r - 2.0 * bs_o * r * cos_a - d2) / d2;
    let f2 = wrap_angle(o.arg() - input.aoa_rad + 2.0 * theta);
    let df1_dr = (-2.0 * bs_o + 2.0 * r - 2.0 * (len - 2.0 * r) * cos_a) / d2;
    let df1_dt = -4.0 * bs_o * r * sin_a / d2;
    let df2_dr = o.cross(u) / o.norm_sq();
    Residual {
        f: [f1, f2],
        jac: [[df1_dr, df1_dt], [df2_dr, 2.0]],
    }
}

fn merit(f: &[f64; 2]) -> f64 {
    0.5 * (f[0] * f[0] + f[1] * f[1])
}

/// Damped Newton from one starting leg length. Returns `(r, θ)` on convergence.
fn newton(input: &SolveInput, r0: f64, cfg: &SolverConfig) -> Option<(f64, f64)> {
    let u = arrival_direction(input.aoa_rad);
    let len = input.path_len_m;
    let mut r = r0;
    // start on the direction constraint so only the cosine law is violated
    let mut theta = inclination(input.aoa_rad, input.ue_pos + u * r);
    let mut res = residual(input, u, r, theta);
    for _ in 0..cfg.max_iter {
        if res.f[0].abs() < cfg.tol && res.f[1].abs() < cfg.tol {
            return Some((r, theta));
        }
        let [[a, b], [c, d]] = res.jac;
        let det = a * d - b * c;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dr = -(d * res.f[0] - b * res.f[1]) / det;
        let dt = -(-c * res.f[0] + a * res.f[1]) / det;
        let m0 = merit(&res.f);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let nr = r + step * dr;
            if nr > 0.0 && nr < len {
                let nt = theta + step * dt;
                let nres = residual(input, u, nr, nt);
                if merit(&nres.f) < m0 || merit(&nres.f) == 0.0 {
                    r = nr;
                    theta = nt;
                    res = nres;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (res.f[0].abs() < cfg.tol && res.f[1].abs() < cfg.tol).then_some((r, theta))
}

/// Solves the cosine-law and direction equations jointly by damped Newton
/// iteration, started from several leg lengths spread over the feasible
/// interval `[(L - d)/2, (L + d)/2]`.
///
/// The cosine law admits a second branch (`L - r + |O| = 2 r cos∠`) which
/// also satisfies the direction constraint. Roots on that branch are
/// discarded by requiring `|O| = L - r`; ties go to the smaller `r`.
pub fn solve_rp_root_find(input: &SolveInput, cfg: &SolverConfig) -> Result<RpSolution, SolveError> {
    input.check(cfg.ellipse_eps_m)?;
    let len = input.path_len_m;
    let d = input.ue_pos.norm();
    let u = arrival_direction(input.aoa_rad);
    let lo = 0.5 * (len - d);
    let starts = [0.5, 0.25, 0.75, 0.05, 0.95, 0.5 / d.max(1.0), 0.999];
    let mut best: Option<(f64, f64)> = None;
    let mut spurious: Option<f64> = None;
    let mut converged = false;
    for frac in starts {
        let r0 = lo + frac * d;
        let Some((r, theta)) = newton(input, r0, cfg) else {
            continue;
        };
        converged = true;
        let o = input.ue_pos + u * r;
        let consistent = (o.norm() - (len - r)).abs() <= 1e-9 * len.max(1.0);
        if !consistent {
            spurious.get_or_insert(r);
            continue;
        }
        match best {
            Some((br, _)) if br <= r => {}
            _ => best = Some((r, theta)),
        }
    }
    match best {
        Some((r, theta)) => Ok(RpSolution {
            o: input.ue_pos + u * r,
            r_m: r,
            theta_rad: reduce_half_turn(theta),
        }),
        None if converged => Err(SolveError::AmbiguousRoot {
            r_m: spurious.unwrap_or(f64::NAN),
        }),
        None => Err(SolveError::NoConvergence {
            iterations: cfg.max_iter,
        }),
    }
}

/// Reflects `p` across the line through `through` with direction angle `tangent_rad`.
pub fn mirror_point(p: Point2, through: Point2, tangent_rad: f64) -> Point2 {
    let t = Point2::from_angle(tangent_rad);
    let v = p - through;
    through + t * (2.0 * v.dot(t)) - v
}

/// Orientation of the face that would reflect BS→`o`→UE specularly, from
/// the bisector of the two legs, in `(-π/2, π/2]`.
pub fn wall_tangent_from_bisector(o: Point2, ue_pos: Point2) -> Result<f64, SolveError> {
    let to_bs = (Point2::ORIGIN - o)
        .normalized()
        .ok_or(SolveError::DegenerateBisector)?;
    let to_ue = (ue_pos - o).normalized().ok_or(SolveError::DegenerateBisector)?;
    let sum = to_bs + to_ue;
    if sum.norm() < 1e-12 {
        return Err(SolveError::DegenerateBisector);
    }
    Ok(reduce_half_turn(sum.arg() - FRAC_PI_2))
}
