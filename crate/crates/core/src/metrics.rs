//! Deviation of reconstructed points from a known environment outline.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Point2, RpEstimate};

/// Which coordinate the line equation solves for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LineAxis {
    /// `y = a x + b`
    YOfX,
    /// `x = a y + b`, used for vertical faces.
    XOfY,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceLine {
    pub a_l: f64,
    pub b_l: f64,
    pub name: String,
    pub axis: LineAxis,
}

impl ReferenceLine {
    pub fn new(a_l: f64, b_l: f64, name: impl Into<String>) -> Self {
        ReferenceLine {
            a_l,
            b_l,
            name: name.into(),
            axis: LineAxis::YOfX,
        }
    }

    pub fn horizontal(y: f64, name: impl Into<String>) -> Self {
        ReferenceLine::new(0.0, y, name)
    }

    pub fn vertical(x: f64, name: impl Into<String>) -> Self {
        ReferenceLine {
            a_l: 0.0,
            b_l: x,
            name: name.into(),
            axis: LineAxis::XOfY,
        }
    }

    /// Line through two points, falling back to `x = a y + b` when vertical.
    pub fn through(p1: Point2, p2: Point2, name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        match fit_line(p1, p2) {
            Ok(l) => Ok(ReferenceLine { name, ..l }),
            Err(Error::VerticalLine { .. }) if p1.y != p2.y => {
                let a = (p2.x - p1.x) / (p2.y - p1.y);
                Ok(ReferenceLine {
                    a_l: a,
                    b_l: p1.x - a * p1.y,
                    name,
                    axis: LineAxis::XOfY,
                })
            }
            Err(_) => Err(Error::invalid(format!("reference '{name}'"), "endpoints coincide")),
        }
    }

    /// Coefficients rounded to `decimals` places, as they would be printed.
    pub fn rounded(&self, decimals: i32) -> Self {
        let k = 10f64.powi(decimals);
        ReferenceLine {
            a_l: (self.a_l * k).round() / k,
            b_l: (self.b_l * k).round() / k,
            ..self.clone()
        }
    }

    /// `(dependent, independent)` coordinates of `p` for this line.
    fn coords(&self, p: Point2) -> (f64, f64) {
        match self.axis {
            LineAxis::YOfX => (p.y, p.x),
            LineAxis::XOfY => (p.x, p.y),
        }
    }
}

/// Slope and intercept of the line through two points.
pub fn fit_line(p1: Point2, p2: Point2) -> Result<ReferenceLine> {
    if p1.x == p2.x {
        return Err(Error::VerticalLine { x: p1.x });
    }
    let a_l = (p2.y - p1.y) / (p2.x - p1.x);
    Ok(ReferenceLine::new(a_l, p1.y - a_l * p1.x, ""))
}

/// Perpendicular distance `|y - a x - b| / sqrt(1 + a²)`.
pub fn point_line_deviation(rp: Point2, line: &ReferenceLine) -> f64 {
    let (dep, ind) = line.coords(rp);
    (dep - line.a_l * ind - line.b_l).abs() / line.a_l.hypot(1.0)
}

/// Literal variant `|y + a x - b| / (1 + a²)`. Not a distance; kept for
/// comparison against the perpendicular form.
pub fn printed_formula_deviation(rp: Point2, line: &ReferenceLine) -> f64 {
    let (dep, ind) = line.coords(rp);
    (dep + line.a_l * ind - line.b_l).abs() / (1.0 + line.a_l * line.a_l)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeviationFormula {
    #[default]
    Perpendicular,
    Printed,
}

/// A reference face: an unbounded line or a finite segment.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    Line(ReferenceLine),
    Segment { p1: Point2, p2: Point2, name: String },
}

impl Reference {
    pub fn name(&self) -> &str {
        match self {
            Reference::Line(l) => &l.name,
            Reference::Segment { name, .. } => name,
        }
    }

    pub fn deviation(&self, rp: Point2, formula: DeviationFormula) -> Result<f64> {
        match (self, formula) {
            (Reference::Line(l), DeviationFormula::Perpendicular) => Ok(point_line_deviation(rp, l)),
            (Reference::Line(l), DeviationFormula::Printed) => Ok(printed_formula_deviation(rp, l)),
            (Reference::Segment { p1, p2, name }, DeviationFormula::Perpendicular) => {
                let d = *p2 - *p1;
                let len2 = d.norm_sq();
                if len2 == 0.0 {
                    return Err(Error::invalid(format!("reference '{name}'"), "zero-length segment"));
                }
                let t = ((rp - *p1).dot(d) / len2).clamp(0.0, 1.0);
                Ok(rp.distance(*p1 + d * t))
            }
            (Reference::Segment { p1, p2, name }, DeviationFormula::Printed) => {
                let l = ReferenceLine::through(*p1, *p2, name.clone())?;
                Ok(printed_formula_deviation(rp, &l))
            }
        }
    }
}

/// Nearest reference face to `rp` and the deviation to it. Ties go to the
/// earlier face.
pub fn assign_nearest_reference(rp: Point2, refs: &[Reference]) -> Result<(usize, f64)> {
    assign_nearest_with(rp, refs, DeviationFormula::Perpendicular)
}

pub fn assign_nearest_with(rp: Point2, refs: &[Reference], formula: DeviationFormula) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in refs.iter().enumerate() {
        let d = r.deviation(rp, formula)?;
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.ok_or(Error::EmptyInput)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation of the deviations, the figure that
    /// published error tables label RMSE.
    pub paper_rmse: f64,
    /// Root of the mean squared deviation.
    pub true_rmse: f64,
    /// Empirical CDF as `(deviation, P[X <= deviation])`, ascending.
    pub cdf: Vec<(f64, f64)>,
}

pub fn error_stats(devs: &[f64]) -> Result<DeviationReport> {
    if devs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = devs.len() as f64;
    let mean = devs.iter().sum::<f64>() / n;
    let var = devs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    let mean_sq = devs.iter().map(|d| d * d).sum::<f64>() / n;
    let mut sorted = devs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let cdf = sorted
        .iter()
        .enumerate()
        .map(|(i, &d)| (d, (i + 1) as f64 / n))
        .collect();
    Ok(DeviationReport {
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        mean,
        paper_rmse: var.sqrt(),
        true_rmse: mean_sq.sqrt(),
        cdf,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDeviation {
    pub wall: String,
    pub deviation_m: f64,
}

/// Evaluation output; serialized as the report JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub per_point: Vec<PointDeviation>,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub paper_rmse: f64,
    pub true_rmse: f64,
    pub cdf: Vec<[f64; 2]>,
}

pub fn evaluate_points<'a, I>(points: I, refs: &[Reference], formula: DeviationFormula) -> Result<EvaluationReport>
where
    I: IntoIterator<Item = &'a Point2>,
{
    let mut per_point = Vec::new();
    let mut devs = Vec::new();
    for p in points {
        let (i, d) = assign_nearest_with(*p, refs, formula)?;
        per_point.push(PointDeviation {
            wall: refs[i].name().to_string(),
            deviation_m: d,
        });
        devs.push(d);
    }
    let s = error_stats(&devs)?;
    Ok(EvaluationReport {
        per_point,
        min: s.min,
        max: s.max,
        mean: s.mean,
        paper_rmse: s.paper_rmse,
        true_rmse: s.true_rmse,
        cdf: s.cdf.into_iter().map(|(x, p)| [x, p]).collect(),
    })
}

pub fn evaluate_cloud(cloud: &[RpEstimate], refs: &[Reference], formula: DeviationFormula) -> Result<EvaluationReport> {
    let pts: Vec<Point2> = cloud.iter().map(|e| e.o).collect();
    evaluate_points(&pts, refs, formula)
}

/// One entry of a reference-map file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ReferenceEntry {
    Points {
        name: String,
        p1: Point2,
        p2: Point2,
        #[serde(default)]
        bounded: bool,
    },
    SlopeIntercept {
        name: String,
        slope: f64,
        intercept: f64,
    },
    Horizontal {
        name: String,
        y: f64,
    },
    Vertical {
        name: String,
        x: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ReferenceFile {
    lines: Vec<ReferenceEntry>,
}

/// Parses a reference map:
/// `{"lines": [{"name", "p1", "p2", "bounded"?} | {"name", "slope", "intercept"} | {"name", "y"} | {"name", "x"}]}`.
pub fn parse_reference_map(text: &str, origin: &Path) -> Result<Vec<Reference>> {
    let file: ReferenceFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    if file.lines.is_empty() {
        return Err(Error::invalid("reference map", "no reference lines"));
    }
    file.lines
        .into_iter()
        .map(|e| {
            let r = match e {
                ReferenceEntry::Points { name, p1, p2, bounded } => {
                    if bounded {
                        if p1 == p2 {
                            return Err(Error::invalid(format!("reference '{name}'"), "endpoints coincide"));
                        }
                        Reference::Segment { p1, p2, name }
                    } else {
                        Reference::Line(ReferenceLine::through(p1, p2, name)?)
                    }
                }
                ReferenceEntry::SlopeIntercept { name, slope, intercept } => {
                    Reference::Line(ReferenceLine::new(slope, intercept, name))
                }
                ReferenceEntry::Horizontal { name, y } => Reference::Line(ReferenceLine::horizontal(y, name)),
                ReferenceEntry::Vertical { name, x } => Reference::Line(ReferenceLine::vertical(x, name)),
            };
            Ok(r)
        })
        .collect()
}

pub fn read_reference_map(path: impl AsRef<Path>) -> Result<Vec<Reference>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_reference_map(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn eb_line() -> ReferenceLine {
        fit_line(Point2::new(46.78, 46.57), Point2::new(41.1, 106.57)).unwrap()
    }

    #[test]
    fn east_building_line() {
        let l = eb_line();
        assert_abs_diff_eq!(l.a_l, -10.56, epsilon = 0.005);
        assert_abs_diff_eq!(l.b_l, 540.72, epsilon = 0.01);
        let r = l.rounded(2);
        assert_eq!((r.a_l, r.b_l), (-10.56, 540.72));
    }

    #[test]
    fn trivial_lines() {
        let l = fit_line(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)).unwrap();
        assert_eq!((l.a_l, l.b_l), (1.0, 0.0));
        let l = fit_line(Point2::new(0.0, 5.0), Point2::new(10.0, 5.0)).unwrap();
        assert_eq!((l.a_l, l.b_l), (0.0, 5.0));
        assert!(matches!(
            fit_line(Point2::new(2.0, 0.0), Point2::new(2.0, 1.0)),
            Err(Error::VerticalLine { .. })
        ));
    }

    #[test]
    fn east_building_extremes() {
        // against the published coefficients the extremes land on the tabulated values
        let l = eb_line().rounded(2);
        assert_abs_diff_eq!(
            point_line_deviation(Point2::new(50.53, 47.11), &l),
            3.77,
            epsilon = 0.005
        );
        assert_abs_diff_eq!(
            point_line_deviation(Point2::new(42.66, 89.26), &l),
            0.09,
            epsilon = 0.005
        );
        // and within rounding of them for the exact fit
        let exact = eb_line();
        assert_abs_diff_eq!(
            point_line_deviation(Point2::new(50.53, 47.11), &exact),
            3.76,
            epsilon = 0.03
        );
        assert_abs_diff_eq!(
            point_line_deviation(Point2::new(42.66, 89.26), &exact),
            0.09,
            epsilon = 0.02
        );
        assert_abs_diff_eq!(point_line_deviation(Point2::new(0.0, 540.72), &l), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn vertical_line_distance() {
        let l = ReferenceLine::through(Point2::new(3.0, 0.0), Point2::new(3.0, 9.0), "v").unwrap();
        assert_eq!(l.axis, LineAxis::XOfY);
        assert_abs_diff_eq!(point_line_deviation(Point2::new(5.0, 100.0), &l), 2.0);
    }

    fn corridor() -> Vec<Reference> {
        vec![
            Reference::Line(ReferenceLine::horizontal(53.38, "north sidewalk")),
            Reference::Line(ReferenceLine::horizontal(50.38, "north building")),
            Reference::Line(ReferenceLine::horizontal(65.30, "south")),
        ]
    }

    #[test]
    fn nearest_reference_examples() {
        let (i, d) = assign_nearest_reference(Point2::new(0.0, 53.94), &corridor()).unwrap();
        assert_eq!(i, 0);
        assert_abs_diff_eq!(d, 0.56, epsilon = 1e-9);
        let (i, d) = assign_nearest_reference(Point2::new(0.0, 65.31), &corridor()).unwrap();
        assert_eq!(i, 2);
        assert_abs_diff_eq!(d, 0.01, epsilon = 1e-9);
        let two = vec![
            Reference::Line(ReferenceLine::horizontal(0.0, "a")),
            Reference::Line(ReferenceLine::horizontal(2.0, "b")),
        ];
        assert_eq!(assign_nearest_reference(Point2::new(0.0, 1.0), &two).unwrap().0, 0);
        assert!(matches!(
            assign_nearest_reference(Point2::ORIGIN, &[]),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn segment_distance_clamps() {
        let s = Reference::Segment {
            p1: Point2::new(0.0, 0.0),
            p2: Point2::new(1.0, 0.0),
            name: "s".into(),
        };
        assert_abs_diff_eq!(
            s.deviation(Point2::new(4.0, 4.0), DeviationFormula::Perpendicular)
                .unwrap(),
            5.0
        );
        assert_abs_diff_eq!(
            s.deviation(Point2::new(0.5, -2.0), DeviationFormula::Perpendicular)
                .unwrap(),
            2.0
        );
    }

    #[test]
    fn stats_zero_variance() {
        let s = error_stats(&[2.0, 2.0]).unwrap();
        assert_eq!((s.min, s.max, s.mean), (2.0, 2.0, 2.0));
        assert_eq!(s.paper_rmse, 0.0);
        assert_eq!(s.true_rmse, 2.0);
        assert_eq!(s.cdf, vec![(2.0, 0.5), (2.0, 1.0)]);
        assert!(matches!(error_stats(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn reference_map_formats() {
        let text = r#"{"lines": [
            {"name": "EB", "p1": [46.78, 46.57], "p2": [41.1, 106.57]},
            {"name": "seg", "p1": [0, 0], "p2": [1, 0], "bounded": true},
            {"name": "si", "slope": -10.56, "intercept": 540.72},
            {"name": "h", "y": 53.38},
            {"name": "v", "x": 3}
        ]}"#;
        let refs = parse_reference_map(text, Path::new("r.json")).unwrap();
        assert_eq!(refs.len(), 5);
        assert!(matches!(refs[1], Reference::Segment { .. }));
        assert_eq!(refs[4].name(), "v");
        assert!(parse_reference_map(r#"{"lines": []}"#, Path::new("r.json")).is_err());
    }

    proptest! {
        #[test]
        fn deviation_translation_and_swap_invariant(
            x1 in -100f64..100.0, y1 in -100f64..100.0, x2 in -100f64..100.0, y2 in -100f64..100.0,
            px in -100f64..100.0, py in -100f64..100.0, tx in -50f64..50.0, ty in -50f64..50.0,
        ) {
            let (p1, p2) = (Point2::new(x1, y1), Point2::new(x2, y2));
            prop_assume!(p1.distance(p2) > 1.0);
            let p = Point2::new(px, py);
            let t = Point2::new(tx, ty);
            let l = ReferenceLine::through(p1, p2, "").unwrap();
            let d = point_line_deviation(p, &l);
            let swapped = ReferenceLine::through(p2, p1, "").unwrap();
            let moved = ReferenceLine::through(p1 + t, p2 + t, "").unwrap();
            let tol = 1e-9 * (1.0 + d);
            prop_assert!((point_line_deviation(p, &swapped) - d).abs() < tol);
            prop_assert!((point_line_deviation(p + t, &moved) - d).abs() < 1e-7 * (1.0 + d));
            prop_assert!(d >= 0.0);
        }

        #[test]
        fn rmse_decomposition(devs in proptest::collection::vec(0f64..10.0, 1..50)) {
            let s = error_stats(&devs).unwrap();
            prop_assert!(s.true_rmse + 1e-12 >= s.paper_rmse);
            prop_assert!(s.true_rmse + 1e-12 >= s.mean.abs());
            prop_assert!((s.true_rmse.powi(2) - (s.mean.powi(2) + s.paper_rmse.powi(2))).abs() < 1e-12 * (1.0 + s.true_rmse.powi(2)));
        }

        #[test]
        fn nearest_is_minimal(ys in proptest::collection::vec(-50f64..50.0, 1..8), py in -60f64..60.0) {
            let refs: Vec<Reference> = ys.iter().map(|&y| Reference::Line(ReferenceLine::horizontal(y, ""))).collect();
            let p = Point2::new(0.0, py);
            let (_, d) = assign_nearest_reference(p, &refs).unwrap();
            for r in &refs {
                prop_assert!(d <= r.deviation(p, DeviationFormula::Perpendicular).unwrap());
            }
        }
    }
}
