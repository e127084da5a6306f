//! Convex lifts of planar faces and the spider tensegrities they project to.
//!
//! A lift is a convex polytope sitting on its base polygon `F × {0}`. Its upper
//! faces are graphs of affine height functions `z = a·x + b`; across a projected
//! edge from `p_i` to `p_j` the stress is the scalar `ω` with
//! `a¹ − a² = ω · J(p_i − p_j)`, where `J` is the counterclockwise quarter turn
//! and face 1 lies to the left of the direction `p_i → p_j`. Ridges get `ω > 0`.
//! The region outside `F` acts as a face with height zero.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::framework::{Framework, FrameworkError};
use crate::linear::{self, LinearError};
use crate::triangulate::{cross, point_in_polygon, segment_distance, signed_area, PlanarTriangulation, P2};

pub type P3 = [f64; 3];

/// Relative equilibrium residual accepted for projected spiders.
pub const SPIDER_RESIDUAL_TOL: f64 = 1e-10;
/// Relative floor below which a stress does not count as positive.
pub const POSITIVITY_FLOOR: f64 = 1e-12;
/// Smallest triangle angle accepted by [`cotangent_weights`].
pub const MIN_ANGLE: f64 = 1e-6;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LiftError {
    #[error("invalid lift: {0}")]
    Invalid(String),
    #[error("base polygon is not convex")]
    NonConvexBase,
    #[error("face {0} is not planar")]
    NonPlanar(usize),
    #[error("face {0} is vertical")]
    VerticalFace(usize),
    #[error("lift is not convex: vertex {vertex} is above face {face} by {excess:e}")]
    NonConvex { face: usize, vertex: usize, excess: f64 },
    #[error("projected edge {0}-{1} has zero length")]
    ZeroLengthEdge(usize, usize),
    #[error("point lies in hole face {0}")]
    InHole(usize),
    #[error("point lies on the boundary of the face; no spider is needed")]
    OnBoundary,
    #[error("point lies outside the face")]
    OutsideFace,
    #[error("convexity margin {0:e} is too small to raise the point")]
    CannotLift(f64),
    #[error("projected stress is not in equilibrium (relative residual {0:e})")]
    Equilibrium(f64),
    #[error("near-degenerate crossing on spider edge {0}")]
    DegenerateCrossing(usize),
    #[error("triangle {0} has an angle of {1:e} rad")]
    DegenerateTriangle(usize, f64),
    #[error(transparent)]
    Framework(#[from] FrameworkError),
    #[error(transparent)]
    Linear(#[from] LinearError),
}

/// Base polygon with a convex lift given face by face. The bottom face is the
/// one whose vertices all have height zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftedFace {
    pub base: Vec<P2>,
    pub lift_vertices: Vec<P3>,
    pub lift_faces: Vec<Vec<usize>>,
    #[serde(default)]
    pub hole_faces: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlacementIssue {
    /// A hole vertex in the relative interior of a natural edge.
    VertexOnNaturalEdge { hole: usize, vertex: usize },
    /// A hole edge running along the boundary; leaves no flange on that side.
    EdgeAlongNaturalEdge { hole: usize, edge: (usize, usize) },
    OutsideFace { hole: usize, vertex: usize },
}

impl PlacementIssue {
    /// Flange warnings do not by themselves invalidate a placement.
    pub fn is_warning(&self) -> bool {
        matches!(self, PlacementIssue::EdgeAlongNaturalEdge { .. })
    }
}

#[derive(Clone, Debug)]
struct Prepared {
    /// Faces oriented counterclockwise in top view (bottom face clockwise).
    faces: Vec<Vec<usize>>,
    /// Height gradient per face; zero for the bottom face.
    grad: Vec<[f64; 2]>,
    offset: Vec<f64>,
    bottom: usize,
    base: Vec<P2>,
    tol: f64,
}

impl Prepared {
    fn height(&self, f: usize, x: P2) -> f64 {
        self.grad[f][0] * x[0] + self.grad[f][1] * x[1] + self.offset[f]
    }

    fn upper(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.faces.len()).filter(move |&f| f != self.bottom)
    }
}

fn ccw(poly: &[P2]) -> Vec<P2> {
    let mut p = poly.to_vec();
    if signed_area(&p) < 0.0 {
        p.reverse();
    }
    p
}

fn check_convex_polygon(poly: &[P2]) -> Result<(), LiftError> {
    if poly.len() < 3 || signed_area(poly).abs() <= 1e-14 {
        return Err(LiftError::Invalid("base polygon needs three vertices and nonzero area".into()));
    }
    let p = ccw(poly);
    let n = p.len();
    let scale = diameter2(&p);
    for i in 0..n {
        if cross(p[i], p[(i + 1) % n], p[(i + 2) % n]) < -1e-12 * scale * scale {
            return Err(LiftError::NonConvexBase);
        }
    }
    Ok(())
}

fn diameter2(p: &[P2]) -> f64 {
    let mut d: f64 = 0.0;
    for a in p {
        for b in p {
            d = d.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
        }
    }
    d
}

/// Indices of strictly convex corners of a convex polygon.
pub fn natural_vertices(base: &[P2]) -> Vec<usize> {
    let n = base.len();
    let scale = diameter2(base).max(f64::MIN_POSITIVE);
    let sign = signed_area(base).signum();
    (0..n)
        .filter(|&i| sign * cross(base[(i + n - 1) % n], base[i], base[(i + 1) % n]) > 1e-12 * scale * scale)
        .collect()
}

fn on_polygon_boundary(p: P2, poly: &[P2], tol: f64) -> bool {
    (0..poly.len()).any(|i| segment_distance(p, poly[i], poly[(i + 1) % poly.len()]) <= tol)
}

fn xy(p: &P3) -> P2 {
    [p[0], p[1]]
}

impl LiftedFace {
    pub fn new(base: Vec<P2>, lift_vertices: Vec<P3>, lift_faces: Vec<Vec<usize>>, hole_faces: Vec<usize>) -> Self {
        Self { base, lift_vertices, lift_faces, hole_faces }
    }

    /// The flat lift: just the bottom face.
    pub fn identity(base: Vec<P2>) -> Self {
        let lift_vertices = base.iter().map(|p| [p[0], p[1], 0.0]).collect();
        let lift_faces = vec![(0..base.len()).collect()];
        Self { base, lift_vertices, lift_faces, hole_faces: Vec::new() }
    }

    /// Lift under the concave envelope of one plane through each base edge
    /// (rising inward with the given slope) and the given cap planes `z = a·x + b`.
    pub fn from_envelope(base: Vec<P2>, edge_slopes: &[f64], caps: &[[f64; 3]]) -> Result<Self, LiftError> {
        check_convex_polygon(&base)?;
        let poly = ccw(&base);
        let n = poly.len();
        if edge_slopes.len() != n || edge_slopes.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
            return Err(LiftError::Invalid("need one positive slope per base edge".into()));
        }
        let mut planes: Vec<[f64; 3]> = Vec::new();
        for i in 0..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            // Inward normal of a counterclockwise edge.
            let nrm = [-(b[1] - a[1]) / len, (b[0] - a[0]) / len];
            let s = edge_slopes[i];
            planes.push([s * nrm[0], s * nrm[1], -s * (nrm[0] * a[0] + nrm[1] * a[1])]);
        }
        for c in caps {
            if poly.iter().any(|p| c[0] * p[0] + c[1] * p[1] + c[2] <= 0.0) {
                return Err(LiftError::Invalid("cap planes must be positive on the base".into()));
            }
            planes.push(*c);
        }
        let scale = diameter2(&poly);
        let merge = 1e-9 * scale;
        let mut verts: Vec<P3> = poly.iter().map(|p| [p[0], p[1], 0.0]).collect();
        let mut faces = vec![(0..n).rev().collect::<Vec<_>>()];
        for k in 0..planes.len() {
            let mut cell = poly.clone();
            for j in 0..planes.len() {
                if j != k {
                    let h = [planes[k][0] - planes[j][0], planes[k][1] - planes[j][1], planes[k][2] - planes[j][2]];
                    cell = clip(&cell, h);
                }
            }
            if cell.len() < 3 || signed_area(&cell) <= 1e-12 * scale * scale {
                continue;
            }
            let mut ids: Vec<usize> = Vec::new();
            for p in cell {
                let z = (planes[k][0] * p[0] + planes[k][1] * p[1] + planes[k][2]).max(0.0);
                let id = match verts.iter().position(|v| (v[0] - p[0]).abs() <= merge && (v[1] - p[1]).abs() <= merge) {
                    Some(id) => id,
                    None => {
                        verts.push([p[0], p[1], z]);
                        verts.len() - 1
                    }
                };
                if ids.last() != Some(&id) && ids.first() != Some(&id) {
                    ids.push(id);
                }
            }
            if ids.len() >= 3 {
                faces.push(ids);
            }
        }
        let lf = Self { base: poly, lift_vertices: verts, lift_faces: faces, hole_faces: Vec::new() };
        lf.prepare()?;
        Ok(lf)
    }

    pub fn with_holes(mut self, holes: Vec<usize>) -> Self {
        self.hole_faces = holes;
        self
    }

    pub fn is_identity(&self) -> bool {
        self.lift_faces.len() == 1
    }

    pub fn validate(&self) -> Result<(), LiftError> {
        self.prepare().map(|_| ())
    }

    fn prepare(&self) -> Result<Prepared, LiftError> {
        check_convex_polygon(&self.base)?;
        let base = ccw(&self.base);
        let v = &self.lift_vertices;
        if v.iter().flatten().any(|c| !c.is_finite()) || self.base.iter().flatten().any(|c| !c.is_finite()) {
            return Err(LiftError::Invalid("non-finite coordinate".into()));
        }
        let scale = v.iter().map(|p| p[0].abs().max(p[1].abs()).max(p[2].abs())).fold(diameter2(&base), f64::max);
        let tol = 1e-9 * scale.max(f64::MIN_POSITIVE);
        if self.lift_faces.is_empty() {
            return Err(LiftError::Invalid("no faces".into()));
        }
        for (f, face) in self.lift_faces.iter().enumerate() {
            if face.len() < 3 || face.iter().any(|&i| i >= v.len()) {
                return Err(LiftError::Invalid(format!("face {f} has a bad vertex list")));
            }
        }
        for p in v {
            if p[2] < -tol {
                return Err(LiftError::Invalid("vertex below the base plane".into()));
            }
            if !point_in_polygon(xy(p), &base) && !on_polygon_boundary(xy(p), &base, tol) {
                return Err(LiftError::Invalid("vertex projects outside the base".into()));
            }
        }
        let bottoms: Vec<usize> = (0..self.lift_faces.len())
            .filter(|&f| self.lift_faces[f].iter().all(|&i| v[i][2].abs() <= tol))
            .collect();
        if bottoms.len() != 1 {
            return Err(LiftError::Invalid(format!("expected one bottom face, found {}", bottoms.len())));
        }
        let bottom = bottoms[0];
        let bottom_xy: Vec<P2> = self.lift_faces[bottom].iter().map(|&i| xy(&v[i])).collect();
        for p in &base {
            if !bottom_xy.iter().any(|q| (q[0] - p[0]).abs() <= tol && (q[1] - p[1]).abs() <= tol) {
                return Err(LiftError::Invalid("bottom face does not cover the base polygon".into()));
            }
        }
        for q in &bottom_xy {
            if !on_polygon_boundary(*q, &base, tol) {
                return Err(LiftError::Invalid("bottom face leaves the base boundary".into()));
            }
        }
        for &h in &self.hole_faces {
            if h >= self.lift_faces.len() || h == bottom {
                return Err(LiftError::Invalid(format!("hole face {h} is not an upper face")));
            }
        }

        let mut faces = Vec::with_capacity(self.lift_faces.len());
        let mut grad = Vec::with_capacity(self.lift_faces.len());
        let mut offset = Vec::with_capacity(self.lift_faces.len());
        for (f, face) in self.lift_faces.iter().enumerate() {
            let proj: Vec<P2> = face.iter().map(|&i| xy(&v[i])).collect();
            let area = signed_area(&proj);
            let mut face = face.clone();
            if f == bottom {
                if area > 0.0 {
                    face.reverse();
                }
                faces.push(face);
                grad.push([0.0, 0.0]);
                offset.push(0.0);
                continue;
            }
            if area.abs() <= 1e-9 * scale * scale {
                return Err(LiftError::VerticalFace(f));
            }
            if area < 0.0 {
                face.reverse();
            }
            // Least-squares plane z = a·x + b through the face vertices.
            let m = face.len();
            let mut a = nalgebra::DMatrix::zeros(m, 3);
            let mut z = DVector::zeros(m);
            for (r, &i) in face.iter().enumerate() {
                a[(r, 0)] = v[i][0];
                a[(r, 1)] = v[i][1];
                a[(r, 2)] = 1.0;
                z[r] = v[i][2];
            }
            let sol = a.clone().svd(true, true).solve(&z, 1e-14).map_err(|e| LiftError::Invalid(e.to_string()))?;
            let g = [sol[0], sol[1]];
            let b = sol[2];
            let norm = (1.0 + g[0] * g[0] + g[1] * g[1]).sqrt();
            for &i in &face {
                if (g[0] * v[i][0] + g[1] * v[i][1] + b - v[i][2]).abs() / norm > tol {
                    return Err(LiftError::NonPlanar(f));
                }
            }
            faces.push(face);
            grad.push(g);
            offset.push(b);
        }
        let prep = Prepared { faces, grad, offset, bottom, base, tol };
        for a in 0..v.len() {
            for b in a + 1..v.len() {
                if (v[a][0] - v[b][0]).abs() <= tol && (v[a][1] - v[b][1]).abs() <= tol {
                    return Err(LiftError::ZeroLengthEdge(a, b));
                }
            }
        }

        for f in prep.upper() {
            let norm = (1.0 + prep.grad[f][0].powi(2) + prep.grad[f][1].powi(2)).sqrt();
            for (i, p) in v.iter().enumerate() {
                let excess = (p[2] - prep.height(f, xy(p))) / norm;
                if excess > tol {
                    return Err(LiftError::NonConvex { face: f, vertex: i, excess });
                }
            }
        }

        if !self.is_identity() {
            let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
            for (f, face) in prep.faces.iter().enumerate() {
                for k in 0..face.len() {
                    let e = (face[k], face[(k + 1) % face.len()]);
                    if directed.insert(e, f).is_some() {
                        return Err(LiftError::Invalid(format!("edge {}-{} is used twice in one direction", e.0, e.1)));
                    }
                }
            }
            for &(a, b) in directed.keys() {
                if !directed.contains_key(&(b, a)) {
                    return Err(LiftError::Invalid(format!("edge {a}-{b} borders only one face")));
                }
            }
        }
        Ok(prep)
    }

    fn projected(&self) -> Vec<P2> {
        self.lift_vertices.iter().map(xy).collect()
    }

    pub fn hole_polygons(&self) -> Vec<Vec<P2>> {
        self.hole_faces
            .iter()
            .map(|&h| ccw(&self.lift_faces[h].iter().map(|&i| xy(&self.lift_vertices[i])).collect::<Vec<_>>()))
            .collect()
    }

    /// Checks how the hole projections meet the base boundary.
    pub fn placement_issues(&self) -> Vec<PlacementIssue> {
        let base = ccw(&self.base);
        let natural = natural_vertices(&base);
        let scale = diameter2(&base);
        let tol = 1e-9 * scale;
        let mut out = Vec::new();
        for (hole, &h) in self.hole_faces.iter().enumerate() {
            let face = &self.lift_faces[h];
            for &i in face {
                let p = xy(&self.lift_vertices[i]);
                if on_polygon_boundary(p, &base, tol) {
                    let at_natural = natural
                        .iter()
                        .any(|&k| (base[k][0] - p[0]).abs() <= tol && (base[k][1] - p[1]).abs() <= tol);
                    if !at_natural {
                        out.push(PlacementIssue::VertexOnNaturalEdge { hole, vertex: i });
                    }
                } else if !point_in_polygon(p, &base) {
                    out.push(PlacementIssue::OutsideFace { hole, vertex: i });
                }
            }
            for k in 0..face.len() {
                let (a, b) = (face[k], face[(k + 1) % face.len()]);
                let pa = xy(&self.lift_vertices[a]);
                let pb = xy(&self.lift_vertices[b]);
                let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
                if on_polygon_boundary(pa, &base, tol)
                    && on_polygon_boundary(pb, &base, tol)
                    && on_polygon_boundary(mid, &base, tol)
                {
                    out.push(PlacementIssue::EdgeAlongNaturalEdge { hole, edge: (a.min(b), a.max(b)) });
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("lift serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LiftError> {
        let lf: Self = serde_json::from_str(text).map_err(|e| LiftError::Invalid(e.to_string()))?;
        lf.validate()?;
        Ok(lf)
    }
}

/// Clip a counterclockwise convex polygon to `h[0] x + h[1] y + h[2] <= 0`.
fn clip(poly: &[P2], h: [f64; 3]) -> Vec<P2> {
    let val = |p: P2| h[0] * p[0] + h[1] * p[1] + h[2];
    let mut out = Vec::new();
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let (va, vb) = (val(a), val(b));
        if va <= 0.0 {
            out.push(a);
        }
        if (va < 0.0 && vb > 0.0) || (va > 0.0 && vb < 0.0) {
            let t = va / (va - vb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Planar tensegrity whose stress is positive on every edge touching a vertex
/// outside `boundary_set`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpiderTensegrity {
    pub framework: Framework,
    /// Sorted vertex indices lying in the boundary set.
    pub boundary_set: Vec<usize>,
    pub stress: DVector<f64>,
}

impl SpiderTensegrity {
    pub fn point(&self, i: usize) -> P2 {
        let p = self.framework.points();
        [p[(i, 0)], p[(i, 1)]]
    }

    pub fn in_boundary(&self, i: usize) -> bool {
        self.boundary_set.binary_search(&i).is_ok()
    }

    pub fn find_vertex(&self, x: P2, tol: f64) -> Option<usize> {
        (0..self.framework.vertex_count()).find(|&i| {
            let p = self.point(i);
            (p[0] - x[0]).abs() <= tol && (p[1] - x[1]).abs() <= tol
        })
    }

    fn from_edges(points: Vec<P2>, stresses: BTreeMap<(usize, usize), f64>, boundary: Vec<usize>) -> Result<Self, LiftError> {
        let rows: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
        let edges: Vec<(usize, usize)> = stresses.keys().copied().collect();
        let framework = Framework::from_parts(2, &rows, &edges)?;
        let stress = DVector::from_iterator(edges.len(), framework.edges().iter().map(|e| stresses[e]));
        let mut boundary_set = boundary;
        boundary_set.sort_unstable();
        boundary_set.dedup();
        Ok(Self { framework, boundary_set, stress })
    }
}

fn quarter_turn(v: P2) -> P2 {
    [-v[1], v[0]]
}

/// Orthogonal projection of the lift's one-skeleton with its Maxwell–Cremona stress.
pub fn mc_project(lift: &LiftedFace) -> Result<SpiderTensegrity, LiftError> {
    let prep = lift.prepare()?;
    project_prepared(lift, &prep)
}

fn project_prepared(lift: &LiftedFace, prep: &Prepared) -> Result<SpiderTensegrity, LiftError> {
    let pts = lift.projected();
    let mut left: HashMap<(usize, usize), usize> = HashMap::new();
    for (f, face) in prep.faces.iter().enumerate() {
        for k in 0..face.len() {
            left.insert((face[k], face[(k + 1) % face.len()]), f);
        }
    }
    let zero = [0.0, 0.0];
    let mut stresses = BTreeMap::new();
    for &(i, j) in left.keys() {
        let key = (i.min(j), i.max(j));
        if stresses.contains_key(&key) {
            continue;
        }
        let (i, j) = key;
        let g1 = left.get(&(i, j)).map_or(zero, |&f| prep.grad[f]);
        let g2 = left.get(&(j, i)).map_or(zero, |&f| prep.grad[f]);
        let d = [pts[i][0] - pts[j][0], pts[i][1] - pts[j][1]];
        let l2 = d[0] * d[0] + d[1] * d[1];
        if l2.sqrt() <= prep.tol {
            return Err(LiftError::ZeroLengthEdge(i, j));
        }
        let jd = quarter_turn(d);
        stresses.insert(key, ((g1[0] - g2[0]) * jd[0] + (g1[1] - g2[1]) * jd[1]) / l2);
    }
    let boundary = (0..pts.len()).filter(|&i| on_polygon_boundary(pts[i], &prep.base, prep.tol)).collect();
    let s = SpiderTensegrity::from_edges(pts, stresses, boundary)?;
    let res = linear::relative_equilibrium_residual(&s.framework, &s.stress)?;
    if res > 1e3 * SPIDER_RESIDUAL_TOL {
        return Err(LiftError::Equilibrium(res));
    }
    Ok(s)
}

/// A spider tensegrity for the lift that has `x` as a vertex.
pub fn spider_for_point(lift: &LiftedFace, x: P2) -> Result<SpiderTensegrity, LiftError> {
    let prep = lift.prepare()?;
    let tol = prep.tol;
    if on_polygon_boundary(x, &prep.base, tol) {
        return Err(LiftError::OnBoundary);
    }
    if !point_in_polygon(x, &prep.base) {
        return Err(LiftError::OutsideFace);
    }
    for (k, hole) in lift.hole_polygons().iter().enumerate() {
        if point_in_polygon(x, hole) && !on_polygon_boundary(x, hole, tol) {
            return Err(LiftError::InHole(lift.hole_faces[k]));
        }
    }
    let base_spider = project_prepared(lift, &prep)?;
    if base_spider.find_vertex(x, tol).is_some() {
        return Ok(base_spider);
    }
    for (k, &(i, j)) in base_spider.framework.edges().iter().enumerate() {
        let (pi, pj) = (base_spider.point(i), base_spider.point(j));
        if segment_distance(x, pi, pj) <= tol {
            return subdivide_edge(&base_spider, k, x);
        }
    }
    let raised = raise_point(lift, &prep, x)?;
    mc_project(&raised)
}

fn subdivide_edge(s: &SpiderTensegrity, k: usize, x: P2) -> Result<SpiderTensegrity, LiftError> {
    let n = s.framework.vertex_count();
    let mut pts: Vec<P2> = (0..n).map(|i| s.point(i)).collect();
    pts.push(x);
    let (i, j) = s.framework.edges()[k];
    let len = |a: P2, b: P2| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let full = len(pts[i], pts[j]);
    let mut stresses: BTreeMap<(usize, usize), f64> =
        s.framework.edges().iter().copied().zip(s.stress.iter().copied()).collect();
    let w = stresses.remove(&(i, j)).unwrap();
    stresses.insert((i, n), w * full / len(pts[i], x));
    stresses.insert((j, n), w * full / len(pts[j], x));
    SpiderTensegrity::from_edges(pts, stresses, s.boundary_set.clone())
}

/// Lift with the point above `x` raised into a new apex over its face.
fn raise_point(lift: &LiftedFace, prep: &Prepared, x: P2) -> Result<LiftedFace, LiftError> {
    let v = &lift.lift_vertices;
    let upper: Vec<usize> = prep.upper().collect();
    let mut out = lift.clone();
    if upper.is_empty() {
        let apex = v.len();
        out.lift_vertices.push([x[0], x[1], 1.0]);
        let base = &prep.faces[prep.bottom];
        out.lift_faces = vec![base.clone()];
        // Bottom face is clockwise in top view; walk it backwards for counterclockwise sides.
        let m = base.len();
        for k in 0..m {
            out.lift_faces.push(vec![base[(k + 1) % m], base[k], apex]);
        }
        return Ok(out);
    }
    let face = upper
        .iter()
        .copied()
        .find(|&f| {
            let poly: Vec<P2> = prep.faces[f].iter().map(|&i| xy(&v[i])).collect();
            point_in_polygon(x, &poly)
        })
        .ok_or(LiftError::OutsideFace)?;
    if lift.hole_faces.contains(&face) {
        return Err(LiftError::InHole(face));
    }
    let h = prep.height(face, x);
    let slack = upper.iter().filter(|&&g| g != face).map(|&g| prep.height(g, x) - h).fold(f64::INFINITY, f64::min);
    let eps = if slack.is_finite() { 0.5 * slack } else { 1.0 };
    if eps < prep.tol {
        return Err(LiftError::CannotLift(slack));
    }
    let apex = v.len();
    out.lift_vertices.push([x[0], x[1], h + eps]);
    let cycle = prep.faces[face].clone();
    let m = cycle.len();
    let mut fan = (0..m).map(|k| vec![cycle[k], cycle[(k + 1) % m], apex]);
    out.lift_faces[face] = fan.next().unwrap();
    out.lift_faces.extend(fan);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpiderReport {
    pub passed: bool,
    /// Largest vertex force imbalance relative to `|ω|_∞ ·` edge scale.
    pub residual: f64,
    /// Smallest stress over edges touching a vertex outside the boundary set,
    /// relative to `|ω|_∞`; `None` if there are no such edges.
    pub margin: Option<f64>,
    pub nonpositive_edges: Vec<usize>,
    /// Vertices outside the boundary set whose positive edges all point into an open half-plane.
    pub unsupported_vertices: Vec<usize>,
}

/// Independent recheck of the spider conditions.
pub fn verify_spider(s: &SpiderTensegrity) -> SpiderReport {
    let f = &s.framework;
    let n = f.vertex_count();
    let wmax = s.stress.amax();
    let mut force = vec![[0.0f64; 2]; n];
    for (k, &(i, j)) in f.edges().iter().enumerate() {
        let (pi, pj) = (s.point(i), s.point(j));
        for a in 0..2 {
            let d = s.stress[k] * (pi[a] - pj[a]);
            force[i][a] += d;
            force[j][a] -= d;
        }
    }
    let worst = force.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
    let residual = if wmax == 0.0 { 0.0 } else { worst / (wmax * f.edge_scale()) };

    let mut margin: Option<f64> = None;
    let mut nonpositive_edges = Vec::new();
    for (k, &(i, j)) in f.edges().iter().enumerate() {
        if s.in_boundary(i) && s.in_boundary(j) {
            continue;
        }
        let rel = if wmax == 0.0 { 0.0 } else { s.stress[k] / wmax };
        margin = Some(margin.map_or(rel, |m: f64| m.min(rel)));
        if rel <= POSITIVITY_FLOOR {
            nonpositive_edges.push(k);
        }
    }

    let mut unsupported_vertices = Vec::new();
    for v in 0..n {
        if s.in_boundary(v) {
            continue;
        }
        let p = s.point(v);
        let mut angles = Vec::new();
        for (k, &(i, j)) in f.edges().iter().enumerate() {
            if (i == v || j == v) && s.stress[k] > POSITIVITY_FLOOR * wmax {
                let q = s.point(if i == v { j } else { i });
                angles.push((q[1] - p[1]).atan2(q[0] - p[0]));
            }
        }
        angles.sort_by(f64::total_cmp);
        let gap = if angles.is_empty() {
            std::f64::consts::TAU
        } else {
            let mut g = angles[0] + std::f64::consts::TAU - angles[angles.len() - 1];
            for w in angles.windows(2) {
                g = g.max(w[1] - w[0]);
            }
            g
        };
        if gap > std::f64::consts::PI + 1e-9 {
            unsupported_vertices.push(v);
        }
    }
    let passed = residual <= SPIDER_RESIDUAL_TOL && nonpositive_edges.is_empty() && unsupported_vertices.is_empty();
    SpiderReport { passed, residual, margin, nonpositive_edges, unsupported_vertices }
}

/// Splits every spider edge where it meets a vertex or edge of `t`. Sub-edges carry
/// `ω · L / L_sub`, which keeps each vertex force and the affine stress energy.
pub fn overlay_subdivide(s: &SpiderTensegrity, t: &PlanarTriangulation) -> Result<SpiderTensegrity, LiftError> {
    let n = s.framework.vertex_count();
    let mut pts: Vec<P2> = (0..n).map(|i| s.point(i)).collect();
    let scale = diameter2(&t.points).max(s.framework.edge_scale());
    let tol = 1e-12 * scale;
    let tri_edges = t.edges();
    let lookup = |pts: &mut Vec<P2>, p: P2| -> usize {
        match pts.iter().position(|q| (q[0] - p[0]).abs() <= tol && (q[1] - p[1]).abs() <= tol) {
            Some(k) => k,
            None => {
                pts.push(p);
                pts.len() - 1
            }
        }
    };
    let mut stresses: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (k, &(a, b)) in s.framework.edges().iter().enumerate() {
        let (pa, pb) = (pts[a], pts[b]);
        let d = [pb[0] - pa[0], pb[1] - pa[1]];
        let len = d[0].hypot(d[1]);
        let mut cuts: Vec<(f64, P2)> = Vec::new();
        for &w in &t.points {
            if segment_distance(w, pa, pb) <= tol {
                let tt = ((w[0] - pa[0]) * d[0] + (w[1] - pa[1]) * d[1]) / (len * len);
                cuts.push((tt, w));
            }
        }
        for &(u, v) in &tri_edges {
            let (pu, pv) = (t.points[u], t.points[v]);
            let e = [pv[0] - pu[0], pv[1] - pu[1]];
            let den = d[0] * e[1] - d[1] * e[0];
            if den.abs() <= 1e-12 * len * e[0].hypot(e[1]) {
                continue;
            }
            let r = [pu[0] - pa[0], pu[1] - pa[1]];
            let tt = (r[0] * e[1] - r[1] * e[0]) / den;
            let ss = (r[0] * d[1] - r[1] * d[0]) / den;
            if tt > 0.0 && tt < 1.0 && ss > 0.0 && ss < 1.0 {
                cuts.push((tt, [pa[0] + tt * d[0], pa[1] + tt * d[1]]));
            }
        }
        cuts.retain(|c| c.0 * len > tol && (1.0 - c.0) * len > tol);
        cuts.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut chain = vec![a];
        for (_, p) in cuts {
            let id = lookup(&mut pts, p);
            if *chain.last().unwrap() != id && id != b {
                chain.push(id);
            }
        }
        chain.push(b);
        for w in chain.windows(2) {
            let (p, q) = (pts[w[0]], pts[w[1]]);
            let sub = (q[0] - p[0]).hypot(q[1] - p[1]);
            if sub <= tol || w[0] == w[1] {
                return Err(LiftError::DegenerateCrossing(k));
            }
            *stresses.entry((w[0].min(w[1]), w[0].max(w[1]))).or_insert(0.0) += s.stress[k] * len / sub;
        }
    }
    let mut boundary = s.boundary_set.clone();
    for (i, p) in pts.iter().enumerate().skip(n) {
        if on_polygon_boundary(*p, &t.region.outer, tol) {
            boundary.push(i);
        }
    }
    SpiderTensegrity::from_edges(pts, stresses, boundary)
}

/// `cot α + cot β` over the angles opposite each edge of `t`, in `t.edges()` order.
pub fn cotangent_weights(t: &PlanarTriangulation) -> Result<DVector<f64>, LiftError> {
    let edges = t.edges();
    let mut w = DVector::zeros(edges.len());
    for (k, tri) in t.triangles.iter().enumerate() {
        for c in 0..3 {
            let (o, a, b) = (t.points[tri[c]], t.points[tri[(c + 1) % 3]], t.points[tri[(c + 2) % 3]]);
            let u = [a[0] - o[0], a[1] - o[1]];
            let v = [b[0] - o[0], b[1] - o[1]];
            let dot = u[0] * v[0] + u[1] * v[1];
            let crs = u[0] * v[1] - u[1] * v[0];
            let angle = crs.abs().atan2(dot);
            if angle < MIN_ANGLE {
                return Err(LiftError::DegenerateTriangle(k, angle));
            }
            let (i, j) = (tri[(c + 1) % 3], tri[(c + 2) % 3]);
            let e = edges.binary_search(&(i.min(j), i.max(j))).unwrap();
            w[e] += dot / crs.abs();
        }
    }
    Ok(w)
}

/// Vertices of `t` not on its boundary.
pub fn interior_vertices(t: &PlanarTriangulation) -> Vec<usize> {
    let boundary = t.boundary_vertices();
    let used: std::collections::BTreeSet<usize> = t.triangles.iter().flatten().copied().collect();
    used.into_iter().filter(|v| boundary.binary_search(v).is_err()).collect()
}

/// Largest force imbalance of `w` over the given vertices.
pub fn planar_residual(t: &PlanarTriangulation, w: &DVector<f64>, vertices: &[usize]) -> f64 {
    let mut force = vec![[0.0f64; 2]; t.points.len()];
    for (k, &(i, j)) in t.edges().iter().enumerate() {
        for a in 0..2 {
            let d = w[k] * (t.points[i][a] - t.points[j][a]);
            force[i][a] += d;
            force[j][a] -= d;
        }
    }
    vertices.iter().map(|&v| force[v][0].hypot(force[v][1])).fold(0.0, f64::max)
}

/// Frustum over the unit square with top `[0.3, 0.7]²` at height 1.
pub fn frustum_lift() -> LiftedFace {
    let base = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    LiftedFace::from_envelope(base, &[1.0 / 0.3; 4], &[[0.0, 0.0, 1.0]]).expect("frustum is a valid lift")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triangulate::{triangulate_region, Region, TriangulateOptions};

    fn square() -> Vec<P2> {
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
    }

    pub(crate) fn frustum() -> LiftedFace {
        frustum_lift()
    }

    #[test]
    fn frustum_projects_to_eight_vertex_spider() {
        let lf = frustum();
        assert_eq!(lf.lift_vertices.len(), 8);
        assert_eq!(lf.lift_faces.len(), 6);
        let s = mc_project(&lf).unwrap();
        assert_eq!(s.framework.vertex_count(), 8);
        assert_eq!(s.framework.edge_count(), 12);
        assert_eq!(s.boundary_set, vec![0, 1, 2, 3]);
        let r = verify_spider(&s);
        assert!(r.passed, "{r:?}");
        assert!(r.residual <= 1e-10);
        for (k, &(i, j)) in s.framework.edges().iter().enumerate() {
            if i >= 4 || j >= 4 {
                assert!(s.stress[k] > 0.0);
            }
        }
    }

    #[test]
    fn pyramid_wheel_signs() {
        let base = vec![[0.0, 0.0], [3.0, 0.0], [0.0, 3.0]];
        let lf = LiftedFace::new(
            base,
            vec![[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [1.0, 1.0, 1.0]],
            vec![vec![0, 2, 1], vec![0, 1, 3], vec![1, 2, 3], vec![2, 0, 3]],
            vec![],
        );
        let s = mc_project(&lf).unwrap();
        for (k, &(i, j)) in s.framework.edges().iter().enumerate() {
            if j == 3 {
                assert!(s.stress[k] > 0.0);
            } else {
                assert!(s.stress[k] < 0.0, "rim {i}-{j}");
            }
        }
        // Spoke from the origin corner: left face z = x, right face z = y,
        // so ω = ((1,0) - (0,1))·J(-1,-1) / 2 = 1.
        let k = s.framework.graph().edge_index(0, 3).unwrap();
        assert!((s.stress[k] - 1.0).abs() < 1e-12);
        assert!(verify_spider(&s).residual < 1e-12);
    }

    #[test]
    fn vertical_faces_are_rejected() {
        let mut v: Vec<P3> = square().iter().map(|p| [p[0], p[1], 0.0]).collect();
        v.extend(square().iter().map(|p| [p[0], p[1], 1.0]));
        let lf = LiftedFace::new(
            square(),
            v,
            vec![vec![0, 3, 2, 1], vec![4, 5, 6, 7], vec![0, 1, 5, 4], vec![1, 2, 6, 5], vec![2, 3, 7, 6], vec![3, 0, 4, 7]],
            vec![],
        );
        assert!(matches!(mc_project(&lf), Err(LiftError::VerticalFace(_))));
    }

    #[test]
    fn nonconvex_lift_is_rejected() {
        let base = vec![[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]];
        let mut v: Vec<P3> = base.iter().map(|p| [p[0], p[1], 0.0]).collect();
        v.push([1.0, 1.0, 1.0]);
        let pyramid = LiftedFace::new(
            base.clone(),
            v.clone(),
            vec![vec![0, 3, 2, 1], vec![0, 1, 4], vec![1, 2, 4], vec![2, 3, 4], vec![3, 0, 4]],
            vec![],
        );
        assert!(mc_project(&pyramid).is_ok());
        v.push([1.0, 0.2, 0.05]);
        let dented = LiftedFace::new(
            base,
            v,
            vec![vec![0, 3, 2, 1], vec![0, 1, 5], vec![0, 5, 4], vec![5, 1, 4], vec![1, 2, 4], vec![2, 3, 4], vec![3, 0, 4]],
            vec![],
        );
        assert!(matches!(mc_project(&dented), Err(LiftError::NonConvex { .. })));
    }

    #[test]
    fn spider_at_existing_vertex_is_the_projection() {
        let lf = frustum();
        let s = spider_for_point(&lf, [0.3, 0.3]).unwrap();
        assert_eq!(s, mc_project(&lf).unwrap());
    }

    #[test]
    fn spider_by_raising_a_face_point() {
        let lf = frustum();
        let s = spider_for_point(&lf, [0.5, 0.15]).unwrap();
        assert_eq!(s.framework.vertex_count(), 9);
        assert!(s.find_vertex([0.5, 0.15], 1e-12).is_some());
        let r = verify_spider(&s);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn spider_on_a_spoke_subdivides() {
        let lf = frustum();
        let parent = mc_project(&lf).unwrap();
        let x = [0.15, 0.15];
        let s = spider_for_point(&lf, x).unwrap();
        assert_eq!(s.framework.vertex_count(), 9);
        assert_eq!(s.framework.edge_count(), 13);
        let r = verify_spider(&s);
        assert!(r.passed, "{r:?}");
        let inner = parent.find_vertex([0.3, 0.3], 1e-12).unwrap();
        let w = parent.stress[parent.framework.graph().edge_index(0, inner).unwrap()];
        let a = s.stress[s.framework.graph().edge_index(0, 8).unwrap()];
        let b = s.stress[s.framework.graph().edge_index(inner, 8).unwrap()];
        // Both halves have half the length, so each carries twice the stress.
        assert!((a - 2.0 * w).abs() < 1e-12 && (b - 2.0 * w).abs() < 1e-12);
    }

    #[test]
    fn spider_rejects_holes_and_boundary() {
        let lf = frustum();
        let top = lf.lift_faces.iter().position(|f| f.len() == 4 && f.iter().all(|&i| i >= 4)).unwrap();
        let lf = lf.with_holes(vec![top]);
        assert!(matches!(spider_for_point(&lf, [0.5, 0.5]), Err(LiftError::InHole(_))));
        assert!(matches!(spider_for_point(&lf, [0.5, 0.0]), Err(LiftError::OnBoundary)));
        assert!(matches!(spider_for_point(&lf, [1.5, 0.5]), Err(LiftError::OutsideFace)));
        assert!(spider_for_point(&lf, [0.5, 0.3]).is_ok());
    }

    #[test]
    fn identity_lift_raises_to_a_pyramid() {
        let lf = LiftedFace::identity(square());
        let s = mc_project(&lf).unwrap();
        assert!(s.stress.iter().all(|&w| w == 0.0));
        let p = spider_for_point(&lf, [0.4, 0.6]).unwrap();
        assert_eq!(p.framework.edge_count(), 8);
        assert!(verify_spider(&p).passed);
    }

    #[test]
    fn flipped_stress_fails_positivity() {
        let mut s = mc_project(&frustum()).unwrap();
        let (a, b) = (s.find_vertex([0.3, 0.3], 1e-12).unwrap(), s.find_vertex([0.7, 0.3], 1e-12).unwrap());
        let k = s.framework.graph().edge_index(a, b).unwrap();
        s.stress[k] = -s.stress[k];
        let r = verify_spider(&s);
        assert!(!r.passed);
        assert_eq!(r.nonpositive_edges, vec![k]);
    }

    #[test]
    fn leaf_vertex_is_unsupported() {
        let f = Framework::from_parts(2, &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 0.5]], &[(0, 1), (0, 2)]).unwrap();
        let s = SpiderTensegrity { framework: f, boundary_set: vec![0, 1], stress: DVector::from_vec(vec![1.0, 1.0]) };
        let r = verify_spider(&s);
        assert!(!r.passed);
        assert_eq!(r.unsupported_vertices, vec![2]);
        assert!(r.residual > 0.1);
    }

    #[test]
    fn placement_issues_are_classified() {
        let lf = frustum();
        let top = lf.lift_faces.iter().position(|f| f.len() == 4 && f.iter().all(|&i| i >= 4)).unwrap();
        assert!(lf.clone().with_holes(vec![top]).placement_issues().is_empty());
        let side = (1..lf.lift_faces.len()).find(|&f| lf.lift_faces[f].contains(&0) && lf.lift_faces[f].contains(&1)).unwrap();
        let issues = lf.with_holes(vec![side]).placement_issues();
        assert_eq!(issues.len(), 1);
        assert!(issues[0].is_warning());
    }

    #[test]
    fn json_round_trip() {
        let lf = frustum().with_holes(vec![5]);
        let text = lf.to_json();
        assert!(text.contains("\"lift_vertices\""));
        assert_eq!(LiftedFace::from_json(&text).unwrap(), lf);
    }

    #[test]
    fn hexagon_spokes_have_cotangent_weight() {
        let hex: Vec<P2> = (0..6)
            .map(|k| {
                let a = std::f64::consts::PI / 3.0 * k as f64;
                [a.cos(), a.sin()]
            })
            .collect();
        let t = triangulate_region(
            &Region::new(hex, vec![]),
            &TriangulateOptions { steiner: vec![[0.0, 0.0]], ..Default::default() },
        )
        .unwrap();
        let w = cotangent_weights(&t).unwrap();
        let c = t.points.iter().position(|p| p[0].abs() < 1e-15 && p[1].abs() < 1e-15).unwrap();
        for (k, &(i, j)) in t.edges().iter().enumerate() {
            if i == c || j == c {
                assert!((w[k] - 2.0 / 3f64.sqrt()).abs() < 1e-12);
            }
        }
        assert!(planar_residual(&t, &w, &[c]) < 1e-12);
    }

    #[test]
    fn obtuse_triangulation_has_negative_weight() {
        let region = Region::new(vec![[0.0, 0.0], [4.0, 0.0], [4.0, 1.0], [0.0, 1.0]], vec![]);
        let t = triangulate_region(
            &region,
            &TriangulateOptions { steiner: vec![[2.0, 0.05], [2.0, 0.95]], ..Default::default() },
        )
        .unwrap();
        let w = cotangent_weights(&t).unwrap();
        assert!(w.iter().any(|&x| x < 0.0));
        let inner = interior_vertices(&t);
        assert!(planar_residual(&t, &w, &inner) < 1e-9);
    }

    #[test]
    fn degenerate_triangle_is_rejected() {
        let t = PlanarTriangulation {
            points: vec![[0.0, 0.0], [1.0, 0.0], [0.5, 1e-9]],
            triangles: vec![[0, 1, 2]],
            constrained_edges: vec![],
            region: Region::new(vec![[0.0, 0.0], [1.0, 0.0], [0.5, 1e-9]], vec![]),
        };
        assert!(matches!(cotangent_weights(&t), Err(LiftError::DegenerateTriangle(0, _))));
    }

    #[test]
    fn overlay_inside_one_triangle_is_unchanged() {
        let tri = Region::new(vec![[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]], vec![]);
        let t = triangulate_region(&tri, &TriangulateOptions::default()).unwrap();
        let f = Framework::from_parts(
            2,
            &[vec![0.5, 0.5], vec![1.5, 0.5], vec![0.5, 1.5], vec![0.8, 0.8]],
            &[(0, 3), (1, 3), (2, 3)],
        )
        .unwrap();
        let s = SpiderTensegrity { framework: f, boundary_set: vec![0, 1, 2], stress: DVector::from_vec(vec![1.0, 1.0, 1.0]) };
        assert_eq!(overlay_subdivide(&s, &t).unwrap(), s);
    }

    #[test]
    fn overlay_along_a_triangulation_edge() {
        let region = Region::new(square(), vec![]);
        let t = triangulate_region(
            &region,
            &TriangulateOptions { steiner: vec![[0.5, 0.5]], ..Default::default() },
        )
        .unwrap();
        // Pyramid apex at (0.25, 0.25); its spoke to (1, 1) runs along a triangulation diagonal through the center.
        let s = spider_for_point(&LiftedFace::identity(square()), [0.25, 0.25]).unwrap();
        let o = overlay_subdivide(&s, &t).unwrap();
        let r = verify_spider(&o);
        assert!(r.passed, "{r:?}");
        let parent = s.stress[s.framework.graph().edge_index(2, 4).unwrap()];
        let c = o.find_vertex([0.5, 0.5], 1e-12).unwrap();
        let a = o.find_vertex([0.25, 0.25], 1e-12).unwrap();
        let k = o.framework.graph().edge_index(a, c).unwrap();
        let full = (0.75f64 * 0.75 * 2.0).sqrt();
        let sub = (0.25f64 * 0.25 * 2.0).sqrt();
        assert!((o.stress[k] - parent * full / sub).abs() < 1e-12);
    }
}
