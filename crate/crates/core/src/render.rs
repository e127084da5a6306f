//! Deterministic SVG drawings of planar frameworks, spiders and face diagrams.

use std::fmt::Write;

use thiserror::Error;

use crate::framework::{Framework, Member};
use crate::lift::{self, LiftError, LiftedFace, SpiderTensegrity};
use crate::triangulate::P2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    Xy,
    Xz,
    Yz,
}

impl Projection {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "xy" => Some(Self::Xy),
            "xz" => Some(Self::Xz),
            "yz" => Some(Self::Yz),
            _ => None,
        }
    }

    fn axes(self) -> (usize, usize) {
        match self {
            Self::Xy => (0, 1),
            Self::Xz => (0, 2),
            Self::Yz => (1, 2),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("{0}-dimensional input needs a projection (xy, xz or yz)")]
    NeedsProjection(usize),
    #[error("cannot project {0}-dimensional input")]
    BadProjection(usize),
    #[error("stress has {got} entries but the framework has {want} edges")]
    StressLength { got: usize, want: usize },
    #[error(transparent)]
    Lift(#[from] LiftError),
}

const SIZE: f64 = 400.0;
const MARGIN: f64 = 24.0;

const STYLE: &str = ".edge{stroke-width:2;stroke-linecap:round}\
.pos{stroke:#1f6fd1}.neg{stroke:#d1361f}.zero{stroke:#9a9a9a;stroke-dasharray:4 3}\
.bar{stroke:#333}.cable{stroke:#1f6fd1;stroke-dasharray:6 3}.strut{stroke:#d1361f;stroke-width:3}\
.vertex{fill:#111}.pin{fill:none;stroke:#111;stroke-width:1.5}\
.face{fill:#f3f0e6;stroke:#444;stroke-width:1}.hole{fill:#f2d35b;stroke:#8a6d00;stroke-width:1}";

/// Edge class for stress `w` relative to the largest magnitude.
fn sign_class(w: f64, scale: f64) -> &'static str {
    if w.abs() <= 1e-12 * scale {
        "zero"
    } else if w > 0.0 {
        "pos"
    } else {
        "neg"
    }
}

struct Canvas {
    lo: P2,
    scale: f64,
    body: String,
}

impl Canvas {
    fn new(points: &[P2]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        if points.is_empty() {
            lo = [0.0, 0.0];
            hi = [1.0, 1.0];
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        Self { lo, scale: (SIZE - 2.0 * MARGIN) / span, body: String::new() }
    }

    fn map(&self, p: P2) -> (f64, f64) {
        (MARGIN + (p[0] - self.lo[0]) * self.scale, SIZE - MARGIN - (p[1] - self.lo[1]) * self.scale)
    }

    fn polygon(&mut self, class: &str, poly: &[P2]) {
        let pts: Vec<String> = poly
            .iter()
            .map(|&p| {
                let (x, y) = self.map(p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(self.body, "<polygon class=\"{class}\" points=\"{}\"/>", pts.join(" "));
    }

    fn line(&mut self, class: &str, a: P2, b: P2, w: Option<f64>) {
        let (x1, y1) = self.map(a);
        let (x2, y2) = self.map(b);
        let data = w.map(|w| format!(" data-stress=\"{w:.6e}\"")).unwrap_or_default();
        let _ = writeln!(
            self.body,
            "<line class=\"edge {class}\" x1=\"{x1:.3}\" y1=\"{y1:.3}\" x2=\"{x2:.3}\" y2=\"{y2:.3}\"{data}/>"
        );
    }

    fn vertex(&mut self, p: P2, pinned: bool) {
        let (x, y) = self.map(p);
        let _ = writeln!(self.body, "<circle class=\"vertex\" cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"3\"/>");
        if pinned {
            let _ = writeln!(
                self.body,
                "<rect class=\"pin\" x=\"{:.3}\" y=\"{:.3}\" width=\"12\" height=\"12\"/>",
                x - 6.0,
                y - 6.0
            );
        }
    }

    fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n<style>{STYLE}</style>\n{}</svg>\n",
            self.body
        )
    }
}

fn planar_points(f: &Framework, project: Option<Projection>) -> Result<Vec<P2>, RenderError> {
    let d = f.dimension();
    let p = f.points();
    let (a, b) = match (d, project) {
        (1, None) => return Ok((0..f.vertex_count()).map(|i| [p[(i, 0)], 0.0]).collect()),
        (2, None) => (0, 1),
        (_, None) => return Err(RenderError::NeedsProjection(d)),
        (2, Some(Projection::Xy)) => (0, 1),
        (3, Some(pr)) => pr.axes(),
        (_, Some(_)) => return Err(RenderError::BadProjection(d)),
    };
    Ok((0..f.vertex_count()).map(|i| [p[(i, a)], p[(i, b)]]).collect())
}

/// Draws a framework; with a stress, edges are classed by sign, otherwise by member type.
pub fn render_framework(f: &Framework, stress: Option<&[f64]>, project: Option<Projection>) -> Result<String, RenderError> {
    if let Some(w) = stress {
        if w.len() != f.edge_count() {
            return Err(RenderError::StressLength { got: w.len(), want: f.edge_count() });
        }
    }
    let pts = planar_points(f, project)?;
    let mut c = Canvas::new(&pts);
    let scale = stress.map_or(0.0, |w| w.iter().fold(0.0_f64, |a, x| a.max(x.abs())));
    for (k, &(i, j)) in f.edges().iter().enumerate() {
        let class = match stress {
            Some(w) => sign_class(w[k], scale),
            None => match f.members()[k] {
                Member::Bar => "bar",
                Member::Cable => "cable",
                Member::Strut => "strut",
            },
        };
        c.line(class, pts[i], pts[j], stress.map(|w| w[k]));
    }
    for (i, &p) in pts.iter().enumerate() {
        c.vertex(p, f.pins().contains(&i));
    }
    Ok(c.finish())
}

/// Draws a spider tensegrity with its face and holes; boundary-set vertices are marked as pins.
pub fn render_spider(s: &SpiderTensegrity, face: &[P2], holes: &[Vec<P2>]) -> String {
    let f = &s.framework;
    let pts: Vec<P2> = (0..f.vertex_count()).map(|i| s.point(i)).collect();
    let mut all = pts.clone();
    all.extend_from_slice(face);
    let mut c = Canvas::new(&all);
    if !face.is_empty() {
        c.polygon("face", face);
    }
    for h in holes {
        c.polygon("hole", h);
    }
    let scale = s.stress.amax();
    for (k, &(i, j)) in f.edges().iter().enumerate() {
        c.line(sign_class(s.stress[k], scale), pts[i], pts[j], Some(s.stress[k]));
    }
    for (i, &p) in pts.iter().enumerate() {
        c.vertex(p, s.in_boundary(i));
    }
    c.finish()
}

/// Face diagram of a lift: the projected spider over the face, holes shaded.
pub fn render_lifted_face(lf: &LiftedFace) -> Result<String, RenderError> {
    let s = lift::mc_project(lf)?;
    Ok(render_spider(&s, &lf.base, &lf.hole_polygons()))
}

/// Stress of `s` transferred onto `f` when both have the same vertices and edges.
pub fn stress_from_spider(f: &Framework, s: &SpiderTensegrity) -> Option<Vec<f64>> {
    if f.dimension() != 2 || f.vertex_count() != s.framework.vertex_count() {
        return None;
    }
    let map: Option<Vec<usize>> = (0..f.vertex_count())
        .map(|i| {
            let p = [f.points()[(i, 0)], f.points()[(i, 1)]];
            s.find_vertex(p, 1e-9)
        })
        .collect();
    let map = map?;
    f.edges()
        .iter()
        .map(|&(i, j)| s.framework.graph().edge_index(map[i], map[j]).map(|k| s.stress[k]))
        .collect()
}

/// Number of `<line>` elements per edge class, for tests and summaries.
pub fn edge_class_counts(svg: &str) -> std::collections::BTreeMap<String, usize> {
    let mut out = std::collections::BTreeMap::new();
    for part in svg.split("<line class=\"edge ").skip(1) {
        let class: String = part.chars().take_while(|&ch| ch != '"').collect();
        *out.entry(class).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::make_example;

    #[test]
    fn twisted_triangle_counts() {
        let f = make_example("twisted_triangle", &[]).unwrap();
        let svg = render_framework(&f, None, None).unwrap();
        assert_eq!(svg.matches("<circle class=\"vertex\"").count(), 6);
        assert_eq!(svg.matches("<line ").count(), 12);
        assert_eq!(svg.matches("<rect class=\"pin\"").count(), 3);
    }

    #[test]
    fn frustum_spider_has_positive_interior_edges() {
        let f = make_example("frustum_spider", &[]).unwrap();
        let s = lift::mc_project(&lift::frustum_lift()).unwrap();
        let w = stress_from_spider(&f, &s).unwrap();
        let svg = render_framework(&f, Some(&w), None).unwrap();
        let counts = edge_class_counts(&svg);
        assert_eq!(counts.get("pos"), Some(&8));
        assert_eq!(counts.values().sum::<usize>(), 12);
    }

    #[test]
    fn three_dimensional_input_needs_projection() {
        let f = make_example("cube", &[]).unwrap();
        assert_eq!(render_framework(&f, None, None), Err(RenderError::NeedsProjection(3)));
        let svg = render_framework(&f, None, Some(Projection::Xz)).unwrap();
        assert_eq!(svg.matches("<line ").count(), 18);
    }

    #[test]
    fn rendering_is_deterministic() {
        let lf = lift::frustum_lift().with_holes(vec![5]);
        let a = render_lifted_face(&lf).unwrap();
        assert_eq!(a, render_lifted_face(&lf).unwrap());
        assert_eq!(a.matches("class=\"hole\"").count(), 1);
    }
}
