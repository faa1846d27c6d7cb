//! Static SVG scatter of walls, terminals and reconstructed points.

use std::fmt::Write as _;

use crate::model::{Point2, RpEstimate, Scenario};

const WIDTH: f64 = 800.0;
const MARGIN: f64 = 40.0;

struct Frame {
    min: Point2,
    scale: f64,
    height: f64,
}

impl Frame {
    fn fit(points: &[Point2]) -> Frame {
        let (mut lo, mut hi) = (
            Point2::new(f64::INFINITY, f64::INFINITY),
            Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        for p in points {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        if !lo.is_finite() {
            lo = Point2::new(-1.0, -1.0);
            hi = Point2::new(1.0, 1.0);
        }
        let span_x = (hi.x - lo.x).max(1e-6);
        let span_y = (hi.y - lo.y).max(1e-6);
        let scale = (WIDTH - 2.0 * MARGIN) / span_x.max(span_y);
        Frame {
            min: lo,
            scale,
            height: span_y * scale + 2.0 * MARGIN,
        }
    }

    /// Scenario +y is drawn downward, matching the east/south axis convention.
    fn map(&self, p: Point2) -> (f64, f64) {
        (
            MARGIN + (p.x - self.min.x) * self.scale,
            MARGIN + (p.y - self.min.y) * self.scale,
        )
    }
}

/// Renders the scenario and a point cloud given in the scenario frame.
pub fn render_svg(scenario: &Scenario, cloud: &[RpEstimate]) -> String {
    let mut pts: Vec<Point2> = vec![scenario.bs];
    pts.extend(scenario.env.walls.iter().flat_map(|w| [w.p1, w.p2]));
    pts.extend(scenario.ues.iter().map(|u| u.pos));
    pts.extend(cloud.iter().map(|e| e.o));
    let f = Frame::fit(&pts);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"#,
        WIDTH, f.height, WIDTH, f.height
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<g id="walls" stroke="black" stroke-width="2">"#);
    for w in &scenario.env.walls {
        let (x1, y1) = f.map(w.p1);
        let (x2, y2) = f.map(w.p2);
        let _ = writeln!(
            s,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}"><title>{}</title></line>"#,
            escape(&w.name)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<g id="points" fill="none" stroke="goldenrod" stroke-width="1.5">"#
    );
    for e in cloud {
        let (x, y) = f.map(e.o);
        let _ = writeln!(
            s,
            r#"<path d="M{:.2} {:.2}L{:.2} {:.2}M{:.2} {:.2}L{:.2} {:.2}"/>"#,
            x - 4.0,
            y - 4.0,
            x + 4.0,
            y + 4.0,
            x - 4.0,
            y + 4.0,
            x + 4.0,
            y - 4.0
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="ues" fill="white" stroke="black">"#);
    for u in &scenario.ues {
        let (x, y) = f.map(u.pos);
        let _ = writeln!(
            s,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="5"><title>{}</title></circle>"#,
            escape(&u.id)
        );
    }
    let _ = writeln!(s, "</g>");
    let (bx, by) = f.map(scenario.bs);
    let _ = writeln!(s, r#"<circle id="bs" cx="{bx:.2}" cy="{by:.2}" r="7" fill="red"/>"#);
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
