//! Convex polytopes with holes cut into their faces, their triangulated
//! surfaces, and the per-face route to a prestress certificate in 3-space.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixtures;
use crate::framework::{Configuration, Framework, FrameworkError};
use crate::lift::{self, LiftError, LiftedFace, PlacementIssue, P3};
use crate::linalg;
use crate::linear::{self, FlexBasis, LinearError, SpaceTag};
use crate::synthesis::{self, PdCertificate, SolverOptions, SynthesisError, SynthesisOutcome};
use crate::tolerances::Tolerances;
use crate::triangulate::{
    self, boundary_distance, point_in_polygon, segment_distance, PlanarTriangulation, Region, TriangulationError, P2,
};

/// Singular-value bound for a face flex to count as trivial on the skeleton.
pub const SKELETON_FLEX_TOL: f64 = 1e-7;
/// Bound on the nontrivial part of a 3-D flex restricted to the skeleton.
pub const SKELETON_RIGID_TOL: f64 = 1e-7;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum HoleyError {
    #[error("invalid polytope: {0}")]
    Polytope(String),
    #[error("face {0} is not planar")]
    NonPlanarFace(usize),
    #[error("face {0} is not a convex polygon")]
    NonConvexFace(usize),
    #[error("polytope is not convex: vertex {vertex} lies outside face {face}")]
    NotConvex { face: usize, vertex: usize },
    #[error("Euler characteristic is {0}, expected 2")]
    Euler(i64),
    #[error("inconsistent input: {0}")]
    Mismatch(String),
    #[error("face {face}: {source}")]
    Lift { face: usize, source: LiftError },
    #[error("face {face}: {source}")]
    Triangulation { face: usize, source: TriangulationError },
    #[error("face {face}: no positive definite stress ({reason})")]
    FaceSynthesis { face: usize, reason: String },
    #[error("assembled stress is not in equilibrium (relative residual {0:e})")]
    Equilibrium(f64),
    #[error(transparent)]
    Framework(#[from] FrameworkError),
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
}

fn sub(a: P3, b: P3) -> P3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: P3, b: P3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn crossp(a: P3, b: P3) -> P3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn scale3(a: P3, s: f64) -> P3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn norm3(a: P3) -> f64 {
    dot(a, a).sqrt()
}

fn lerp(a: P3, b: P3, t: f64) -> P3 {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]
}

/// Orthonormal frame of a face plane; `u × v` is the outward normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceFrame {
    pub origin: P3,
    pub u: P3,
    pub v: P3,
    pub normal: P3,
}

impl FaceFrame {
    pub fn to_plane(&self, p: P3) -> P2 {
        let d = sub(p, self.origin);
        [dot(d, self.u), dot(d, self.v)]
    }

    pub fn to_space(&self, q: P2) -> P3 {
        let a = scale3(self.u, q[0]);
        let b = scale3(self.v, q[1]);
        [self.origin[0] + a[0] + b[0], self.origin[1] + a[1] + b[1], self.origin[2] + a[2] + b[2]]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Polytope3 {
    pub vertices: Vec<P3>,
    /// Cyclic vertex lists, counterclockwise seen from outside.
    pub faces: Vec<Vec<usize>>,
}

impl Polytope3 {
    /// Validates planarity, convexity and the Euler relation; reorients faces outward.
    pub fn new(vertices: Vec<P3>, faces: Vec<Vec<usize>>) -> Result<Self, HoleyError> {
        let n = vertices.len();
        if n < 4 || faces.len() < 4 {
            return Err(HoleyError::Polytope("need at least four vertices and faces".into()));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(HoleyError::Polytope("non-finite coordinate".into()));
        }
        let centroid = vertices.iter().fold([0.0; 3], |a, p| [a[0] + p[0], a[1] + p[1], a[2] + p[2]]);
        let centroid = scale3(centroid, 1.0 / n as f64);
        let diam = vertices.iter().map(|p| norm3(sub(*p, centroid))).fold(0.0, f64::max);
        let tol = 1e-9 * diam;
        let mut oriented = Vec::with_capacity(faces.len());
        for (f, face) in faces.iter().enumerate() {
            if face.len() < 3 || face.iter().any(|&i| i >= n) {
                return Err(HoleyError::Polytope(format!("face {f} has a bad vertex list")));
            }
            let mut normal = [0.0; 3];
            for k in 0..face.len() {
                let (a, b) = (vertices[face[k]], vertices[face[(k + 1) % face.len()]]);
                normal = [
                    normal[0] + (a[1] - b[1]) * (a[2] + b[2]),
                    normal[1] + (a[2] - b[2]) * (a[0] + b[0]),
                    normal[2] + (a[0] - b[0]) * (a[1] + b[1]),
                ];
            }
            let len = norm3(normal);
            if len <= tol * diam {
                return Err(HoleyError::NonPlanarFace(f));
            }
            let unit = scale3(normal, 1.0 / len);
            let q = vertices[face[0]];
            if face.iter().any(|&i| dot(sub(vertices[i], q), unit).abs() > tol) {
                return Err(HoleyError::NonPlanarFace(f));
            }
            let mut face = face.clone();
            if dot(sub(q, centroid), unit) < 0.0 {
                face.reverse();
            }
            oriented.push(face);
        }
        let poly = Self { vertices, faces: oriented };
        for f in 0..poly.faces.len() {
            let frame = poly.frame(f);
            for (i, p) in poly.vertices.iter().enumerate() {
                if dot(sub(*p, frame.origin), frame.normal) > tol {
                    return Err(HoleyError::NotConvex { face: f, vertex: i });
                }
            }
            let pts = poly.face_polygon(f);
            let m = pts.len();
            for k in 0..m {
                if triangulate::cross(pts[k], pts[(k + 1) % m], pts[(k + 2) % m]) < -tol * diam {
                    return Err(HoleyError::NonConvexFace(f));
                }
            }
        }
        let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for face in &poly.faces {
            for k in 0..face.len() {
                let (a, b) = (face[k], face[(k + 1) % face.len()]);
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        if count.values().any(|&c| c != 2) {
            return Err(HoleyError::Polytope("every edge must border exactly two faces".into()));
        }
        let euler = n as i64 - count.len() as i64 + poly.faces.len() as i64;
        if euler != 2 {
            return Err(HoleyError::Euler(euler));
        }
        Ok(poly)
    }

    pub fn cube() -> Self {
        let v: Vec<P3> = fixtures::cube_corners().iter().map(|p| [p[0], p[1], p[2]]).collect();
        Self::new(v, fixtures::CUBE_FACES.iter().map(|f| f.to_vec()).collect()).expect("cube is valid")
    }

    pub fn octahedron() -> Self {
        let v = vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -1.0]];
        let mut faces = Vec::new();
        for x in [0, 1] {
            for y in [2, 3] {
                for z in [4, 5] {
                    faces.push(vec![x, y, z]);
                }
            }
        }
        Self::new(v, faces).expect("octahedron is valid")
    }

    pub fn tetrahedron(v: [P3; 4]) -> Result<Self, HoleyError> {
        Self::new(v.to_vec(), vec![vec![0, 1, 2], vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]])
    }

    /// Sorted natural edges.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .faces
            .iter()
            .flat_map(|f| (0..f.len()).map(move |k| (f[k].min(f[(k + 1) % f.len()]), f[k].max(f[(k + 1) % f.len()]))))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    pub fn frame(&self, f: usize) -> FaceFrame {
        let face = &self.faces[f];
        let origin = self.vertices[face[0]];
        let e = sub(self.vertices[face[1]], origin);
        let u = scale3(e, 1.0 / norm3(e));
        let mut normal = [0.0; 3];
        for k in 0..face.len() {
            let a = sub(self.vertices[face[k]], origin);
            let b = sub(self.vertices[face[(k + 1) % face.len()]], origin);
            let c = crossp(a, b);
            normal = [normal[0] + c[0], normal[1] + c[1], normal[2] + c[2]];
        }
        let normal = scale3(normal, 1.0 / norm3(normal));
        let v = crossp(normal, u);
        FaceFrame { origin, u, v, normal }
    }

    /// Face vertices in face-plane coordinates, counterclockwise.
    pub fn face_polygon(&self, f: usize) -> Vec<P2> {
        let frame = self.frame(f);
        self.faces[f].iter().map(|&i| frame.to_plane(self.vertices[i])).collect()
    }
}

/// A convex polytope whose face `f` carries the lift `per_face[f]`, given in
/// that face's plane coordinates with the base listed in face order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Holeyhedron {
    pub polytope: Polytope3,
    pub per_face: Vec<LiftedFace>,
}

impl Holeyhedron {
    pub fn new(polytope: Polytope3, per_face: Vec<LiftedFace>) -> Result<Self, HoleyError> {
        let h = Self { polytope, per_face };
        h.check_bases()?;
        Ok(h)
    }

    /// Every face keeps its flat lift.
    pub fn plain(polytope: Polytope3) -> Self {
        let per_face = (0..polytope.faces.len()).map(|f| LiftedFace::identity(polytope.face_polygon(f))).collect();
        Self { polytope, per_face }
    }

    pub fn with_face_lift(mut self, f: usize, lift: LiftedFace) -> Result<Self, HoleyError> {
        if f >= self.per_face.len() {
            return Err(HoleyError::Mismatch(format!("no face {f}")));
        }
        self.per_face[f] = lift;
        self.check_bases()?;
        Ok(self)
    }

    fn check_bases(&self) -> Result<(), HoleyError> {
        if self.per_face.len() != self.polytope.faces.len() {
            return Err(HoleyError::Mismatch("one lift per face is required".into()));
        }
        for (f, lf) in self.per_face.iter().enumerate() {
            let poly = self.polytope.face_polygon(f);
            let scale = poly.iter().map(|p| p[0].abs().max(p[1].abs())).fold(1.0, f64::max);
            let ok = lf.base.len() == poly.len()
                && lf
                    .base
                    .iter()
                    .zip(&poly)
                    .all(|(a, b)| (a[0] - b[0]).abs() <= 1e-9 * scale && (a[1] - b[1]).abs() <= 1e-9 * scale);
            if !ok {
                return Err(HoleyError::Mismatch(format!("lift base of face {f} differs from the face polygon")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("holeyhedron serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HoleyError> {
        let h: Self = serde_json::from_str(text).map_err(|e| HoleyError::Mismatch(e.to_string()))?;
        let polytope = Polytope3::new(h.polytope.vertices.clone(), h.polytope.faces.clone())?;
        if polytope.faces != h.polytope.faces {
            return Err(HoleyError::Mismatch("faces must be listed counterclockwise from outside".into()));
        }
        Self::new(polytope, h.per_face)
    }
}

/// Triangulation of one face, in that face's plane coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct FacePatch {
    pub face: usize,
    /// Global vertex id of each local vertex.
    pub vertices: Vec<usize>,
    pub triangulation: PlanarTriangulation,
    /// Local edges: triangle edges plus the skeleton segments on the face boundary.
    pub edges: Vec<(usize, usize)>,
    /// Local vertices on the one-skeleton.
    pub skeleton: Vec<usize>,
}

impl FacePatch {
    pub fn framework(&self) -> Result<Framework, FrameworkError> {
        let rows: Vec<Vec<f64>> = self.triangulation.points.iter().map(|p| p.to_vec()).collect();
        Framework::from_parts(2, &rows, &self.edges)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceTriangulation {
    pub framework: Framework,
    pub triangles: Vec<[usize; 3]>,
    pub face_assignment: Vec<usize>,
    /// Global vertices lying on the one-skeleton, sorted.
    pub skeleton_vertices: Vec<usize>,
    pub patches: Vec<FacePatch>,
}

impl SurfaceTriangulation {
    pub fn to_json(&self) -> String {
        let tris: Vec<String> = self.triangles.iter().map(|t| format!("[{},{},{}]", t[0], t[1], t[2])).collect();
        let assign: Vec<String> = self.face_assignment.iter().map(|f| f.to_string()).collect();
        let skel: Vec<String> = self.skeleton_vertices.iter().map(|f| f.to_string()).collect();
        format!(
            "{{\"framework\":{},\"triangles\":[{}],\"face_assignment\":[{}],\"skeleton_vertices\":[{}]}}",
            self.framework.to_json(),
            tris.join(","),
            assign.join(","),
            skel.join(",")
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct SurfaceOptions {
    /// Subdivision parameters in `(0, 1)` along natural edge `(a, b)`, `a < b`, measured from `a`.
    pub edge_points: BTreeMap<(usize, usize), Vec<f64>>,
    /// Add the vertex average of each face as a Steiner point when it lies outside the holes.
    pub face_centers: bool,
    pub face_steiner: BTreeMap<usize, Vec<P2>>,
    pub random_steiner: usize,
    pub random_edge_points: usize,
    pub seed: u64,
}

impl SurfaceOptions {
    pub fn centered() -> Self {
        Self { face_centers: true, ..Self::default() }
    }

    pub fn random(seed: u64, steiner: usize, edge_points: usize) -> Self {
        Self { random_steiner: steiner, random_edge_points: edge_points, seed, ..Self::default() }
    }
}

fn mix(seed: u64, k: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k.wrapping_mul(0xBF58_476D_1CE4_E5B9))
}

pub fn triangulate_surface(h: &Holeyhedron, opts: &SurfaceOptions) -> Result<SurfaceTriangulation, HoleyError> {
    let poly = &h.polytope;
    let natural = poly.edges();
    let mut params: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for (k, &e) in natural.iter().enumerate() {
        let mut ts = opts.edge_points.get(&e).cloned().unwrap_or_default();
        if opts.random_edge_points > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(opts.seed, 1_000 + k as u64));
            for _ in 0..opts.random_edge_points {
                ts.push(rng.random_range(0.2..0.8));
            }
        }
        params.insert(e, ts);
    }
    for (&e, _) in opts.edge_points.iter() {
        if !params.contains_key(&e) {
            return Err(HoleyError::Mismatch(format!("{e:?} is not a natural edge")));
        }
    }
    // Hole vertices on a natural edge become subdivision points of that edge.
    for (f, lf) in h.per_face.iter().enumerate() {
        let face = &poly.faces[f];
        let fp = poly.face_polygon(f);
        let scale = fp.iter().map(|p| p[0].abs().max(p[1].abs())).fold(1.0, f64::max);
        for hole in lf.hole_polygons() {
            for q in hole {
                for k in 0..face.len() {
                    let (a, b) = (face[k], face[(k + 1) % face.len()]);
                    let (pa, pb) = (fp[k], fp[(k + 1) % face.len()]);
                    let d = [pb[0] - pa[0], pb[1] - pa[1]];
                    let len2 = d[0] * d[0] + d[1] * d[1];
                    let t = ((q[0] - pa[0]) * d[0] + (q[1] - pa[1]) * d[1]) / len2;
                    if segment_distance(q, pa, pb) <= 1e-9 * scale && t * len2.sqrt() > 1e-9 * scale && (1.0 - t) * len2.sqrt() > 1e-9 * scale {
                        let (key, t) = if a < b { ((a, b), t) } else { ((b, a), 1.0 - t) };
                        params.get_mut(&key).unwrap().push(t);
                    }
                }
            }
        }
    }
    let mut points: Vec<P3> = poly.vertices.clone();
    let mut chains: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (&(a, b), ts) in params.iter_mut() {
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|x, y| (*x - *y).abs() <= 1e-9);
        if ts.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(HoleyError::Mismatch(format!("subdivision parameter outside (0, 1) on edge {a}-{b}")));
        }
        let mut chain = vec![a];
        for &t in ts.iter() {
            points.push(lerp(poly.vertices[a], poly.vertices[b], t));
            chain.push(points.len() - 1);
        }
        chain.push(b);
        chains.insert((a, b), chain);
    }
    let skeleton_vertices: Vec<usize> = (0..points.len()).collect();

    let mut patches = Vec::with_capacity(poly.faces.len());
    let mut triangles = Vec::new();
    let mut face_assignment = Vec::new();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (f, face) in poly.faces.iter().enumerate() {
        let frame = poly.frame(f);
        let lf = &h.per_face[f];
        let mut global: Vec<usize> = Vec::new();
        for k in 0..face.len() {
            let (a, b) = (face[k], face[(k + 1) % face.len()]);
            let chain = if a < b {
                chains[&(a, b)].clone()
            } else {
                chains[&(b, a)].iter().rev().copied().collect()
            };
            global.extend(&chain[..chain.len() - 1]);
        }
        let outer: Vec<P2> = global.iter().map(|&g| frame.to_plane(points[g])).collect();
        let nb = outer.len();
        let scale = outer.iter().map(|p| p[0].abs().max(p[1].abs())).fold(1.0, f64::max);
        let tol = 1e-9 * scale;
        let mut local: Vec<P2> = outer.clone();
        let find = |local: &Vec<P2>, p: P2| local.iter().position(|q| (q[0] - p[0]).abs() <= tol && (q[1] - p[1]).abs() <= tol);
        let holes = lf.hole_polygons();
        let mut constraints: Vec<(usize, usize)> = (0..nb).map(|k| (k, (k + 1) % nb)).collect();
        let mut hole_polys = Vec::new();
        for hole in &holes {
            let mut ids = Vec::new();
            let mut snapped = Vec::new();
            for &q in hole {
                let id = match find(&local, q) {
                    Some(id) => id,
                    None => {
                        local.push(q);
                        local.len() - 1
                    }
                };
                ids.push(id);
                snapped.push(local[id]);
            }
            for k in 0..ids.len() {
                constraints.push((ids[k], ids[(k + 1) % ids.len()]));
            }
            hole_polys.push(snapped);
        }
        let region = Region::new(outer.clone(), hole_polys.clone());
        let in_area = |p: P2| point_in_polygon(p, &outer) && !hole_polys.iter().any(|hp| point_in_polygon(p, hp));
        let mut steiner: Vec<P2> = opts.face_steiner.get(&f).cloned().unwrap_or_default();
        if opts.face_centers {
            let c = outer[..nb].iter().fold([0.0, 0.0], |a, p| [a[0] + p[0], a[1] + p[1]]);
            let c = [c[0] / nb as f64, c[1] / nb as f64];
            if in_area(c) && hole_polys.iter().all(|hp| boundary_distance(c, hp) > tol) {
                steiner.push(c);
            }
        }
        for &s in &steiner {
            if !in_area(s) || boundary_distance(s, &outer) <= tol {
                return Err(HoleyError::Triangulation {
                    face: f,
                    source: TriangulationError::Backend(format!("Steiner point {s:?} is not inside the face area")),
                });
            }
            if find(&local, s).is_none() {
                local.push(s);
            }
        }
        let extra = triangulate::sample_interior_points(&region, &local, opts.random_steiner, mix(opts.seed, f as u64));
        local.extend(extra);
        let tris = triangulate::constrained_triangulation(&local, &constraints, in_area)
            .map_err(|source| HoleyError::Triangulation { face: f, source })?;
        // Constraints with the removed area on both sides (a slit) border no triangle.
        let constraints: Vec<(usize, usize)> = constraints
            .into_iter()
            .filter(|&(a, b)| {
                let (pa, pb) = (local[a], local[b]);
                let m = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
                let d = [pb[0] - pa[0], pb[1] - pa[1]];
                let s = 1e-6 / (d[0] * d[0] + d[1] * d[1]).sqrt().max(f64::MIN_POSITIVE) * scale;
                in_area([m[0] - s * d[1], m[1] + s * d[0]]) || in_area([m[0] + s * d[1], m[1] - s * d[0]])
            })
            .collect();
        let t = PlanarTriangulation {
            points: local.clone(),
            triangles: tris,
            constrained_edges: constraints,
            region,
        };
        let problems = t.check();
        if !problems.is_empty() {
            return Err(HoleyError::Triangulation { face: f, source: TriangulationError::Backend(problems.join("; ")) });
        }
        for p in &local[nb..] {
            points.push(frame.to_space(*p));
            global.push(points.len() - 1);
        }
        let mut local_edges = t.edges();
        local_edges.extend((0..nb).map(|k| (k.min((k + 1) % nb), k.max((k + 1) % nb))));
        local_edges.sort_unstable();
        local_edges.dedup();
        for &(a, b) in &local_edges {
            edges.push((global[a].min(global[b]), global[a].max(global[b])));
        }
        for tri in &t.triangles {
            triangles.push([global[tri[0]], global[tri[1]], global[tri[2]]]);
            face_assignment.push(f);
        }
        patches.push(FacePatch { face: f, vertices: global, triangulation: t, edges: local_edges, skeleton: (0..nb).collect() });
    }
    edges.sort_unstable();
    edges.dedup();
    let rows: Vec<Vec<f64>> = points.iter().map(|p| p.to_vec()).collect();
    let framework = Framework::from_parts(3, &rows, &edges)?;
    Ok(SurfaceTriangulation { framework, triangles, face_assignment, skeleton_vertices, patches })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FaceCheck {
    pub face: usize,
    pub placement: Vec<PlacementIssue>,
    /// Largest singular value of the skeleton restriction of the face flexes
    /// after removing its best rigid-motion fit.
    pub flex_margin: f64,
    pub b_pass: bool,
    pub spider_points: usize,
    pub spider_failures: usize,
    /// Smallest relative positivity margin over the spiders that were built.
    pub spider_margin: Option<f64>,
    pub c_pass: bool,
    pub messages: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BatteryFailure {
    pub seed: u64,
    pub face: usize,
    pub flex_margin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HoleyhedronReport {
    pub a_pass: bool,
    pub b_pass: bool,
    pub c_pass: bool,
    pub passed: bool,
    pub faces: Vec<FaceCheck>,
    pub battery_seeds: u64,
    pub battery_failures: Vec<BatteryFailure>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ValidateOptions {
    /// Number of random re-triangulations checked for the skeleton-rigidity condition.
    pub battery_seeds: u64,
    /// Grid resolution of the spider sample net per face.
    pub net: usize,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self { battery_seeds: 20, net: 6 }
    }
}

/// Largest singular value of the face flexes restricted to the skeleton, modulo rigid motions.
fn skeleton_flex_margin(patch: &FacePatch) -> Result<f64, HoleyError> {
    let f = patch.framework()?;
    let flexes = linear::flex_space(&f, SpaceTag::AllFlexes);
    if flexes.is_empty() {
        return Ok(0.0);
    }
    let s = &patch.skeleton;
    let mut q = DMatrix::zeros(2 * s.len(), flexes.len());
    for (r, &v) in s.iter().enumerate() {
        for a in 0..2 {
            q.set_row(2 * r + a, &flexes.vectors.row(2 * v + a));
        }
    }
    let pts = DMatrix::from_fn(s.len(), 2, |r, c| patch.triangulation.points[s[r]][c]);
    let trivial = linear::trivial_flex_basis(&Configuration::from_matrix(pts)?).vectors;
    let residual = &q - &trivial * (trivial.transpose() * &q);
    Ok(linalg::singular_values(&residual).first().copied().unwrap_or(0.0))
}

fn sample_net(patch: &FacePatch, net: usize) -> Vec<P2> {
    let region = &patch.triangulation.region;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &region.outer {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let scale = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let mut out = Vec::new();
    for i in 0..net {
        for j in 0..net {
            let p = [
                lo[0] + (hi[0] - lo[0]) * (i as f64 + 0.5) / net as f64,
                lo[1] + (hi[1] - lo[1]) * (j as f64 + 0.5) / net as f64,
            ];
            let in_hole = region.holes.iter().any(|h| point_in_polygon(p, h) && boundary_distance(p, h) > 1e-9 * scale);
            if point_in_polygon(p, &region.outer) && boundary_distance(p, &region.outer) > 1e-9 * scale && !in_hole {
                out.push(p);
            }
        }
    }
    out
}

fn spider_check(lf: &LiftedFace, patch: &FacePatch, net: usize, check: &mut FaceCheck) {
    if let Err(e) = lf.validate() {
        check.messages.push(format!("lift is invalid: {e}"));
        check.c_pass = false;
        return;
    }
    let mut pts: Vec<P2> = (0..patch.triangulation.points.len())
        .filter(|v| !patch.skeleton.contains(v))
        .map(|v| patch.triangulation.points[v])
        .collect();
    pts.extend(sample_net(patch, net));
    let mut reported = 0;
    for x in pts {
        check.spider_points += 1;
        let failure = match lift::spider_for_point(lf, x) {
            Ok(s) => {
                let r = lift::verify_spider(&s);
                if let Some(m) = r.margin {
                    check.spider_margin = Some(check.spider_margin.map_or(m, |c: f64| c.min(m)));
                }
                (!r.passed).then(|| {
                    format!(
                        "spider at {x:?} fails: residual {:.1e}, {} nonpositive edges, {} unsupported vertices",
                        r.residual,
                        r.nonpositive_edges.len(),
                        r.unsupported_vertices.len()
                    )
                })
            }
            Err(e) => Some(format!("no spider at {x:?}: {e}")),
        };
        if let Some(msg) = failure {
            check.spider_failures += 1;
            check.c_pass = false;
            if reported < 5 {
                check.messages.push(msg);
                reported += 1;
            }
        }
    }
}

/// Checks containment of the one-skeleton, skeleton rigidity of every face
/// triangulation (given and randomized), and spider witnesses per face.
pub fn validate_holeyhedron(
    h: &Holeyhedron,
    t: &SurfaceTriangulation,
    opts: &ValidateOptions,
) -> Result<HoleyhedronReport, HoleyError> {
    let poly = &h.polytope;
    if t.patches.len() != poly.faces.len() || t.framework.vertex_count() < poly.vertices.len() {
        return Err(HoleyError::Mismatch("triangulation does not match the polytope".into()));
    }
    let pts = t.framework.points();
    for (i, v) in poly.vertices.iter().enumerate() {
        if (0..3).any(|a| (pts[(i, a)] - v[a]).abs() > 1e-9 * (1.0 + v[a].abs())) {
            return Err(HoleyError::Mismatch(format!("vertex {i} moved")));
        }
    }
    let mut warnings = Vec::new();
    // (a): every natural edge is covered by skeleton segments of the triangulation.
    let mut a_pass = true;
    for (a, b) in poly.edges() {
        let (pa, pb) = (poly.vertices[a], poly.vertices[b]);
        let d = sub(pb, pa);
        let len = norm3(d);
        let mut on: Vec<(f64, usize)> = t
            .skeleton_vertices
            .iter()
            .filter_map(|&v| {
                let p = [pts[(v, 0)], pts[(v, 1)], pts[(v, 2)]];
                let s = dot(sub(p, pa), d) / (len * len);
                let off = norm3(sub(p, lerp(pa, pb, s)));
                (off <= 1e-9 * len && (-1e-12..=1.0 + 1e-12).contains(&s)).then_some((s, v))
            })
            .collect();
        on.sort_by(|x, y| x.0.total_cmp(&y.0));
        if on.windows(2).any(|w| !t.framework.graph().has_edge(w[0].1, w[1].1)) {
            a_pass = false;
            warnings.push(format!("natural edge {a}-{b} is not covered by the triangulation"));
        }
    }

    let mut faces = Vec::new();
    for (f, patch) in t.patches.iter().enumerate() {
        let lf = &h.per_face[f];
        let placement = lf.placement_issues();
        let mut check = FaceCheck {
            face: f,
            placement: placement.clone(),
            flex_margin: skeleton_flex_margin(patch)?,
            b_pass: true,
            spider_points: 0,
            spider_failures: 0,
            spider_margin: None,
            c_pass: true,
            messages: Vec::new(),
        };
        check.b_pass = check.flex_margin <= SKELETON_FLEX_TOL;
        if !check.b_pass {
            check.messages.push(format!("face flex moves the skeleton nontrivially (margin {:.3e})", check.flex_margin));
        }
        for issue in &placement {
            match issue {
                PlacementIssue::EdgeAlongNaturalEdge { hole, edge } => {
                    warnings.push(format!("face {f}: hole {hole} edge {edge:?} runs along a natural edge (no flange)"))
                }
                PlacementIssue::VertexOnNaturalEdge { hole, vertex } => {
                    check.c_pass = false;
                    check.messages.push(format!(
                        "hole {hole} vertex {vertex} lies inside a natural edge; nearby hole-boundary points admit no spider"
                    ));
                }
                PlacementIssue::OutsideFace { hole, vertex } => {
                    check.c_pass = false;
                    check.messages.push(format!("hole {hole} vertex {vertex} lies outside the face"));
                }
            }
        }
        spider_check(lf, patch, opts.net, &mut check);
        faces.push(check);
    }

    let mut battery_failures = Vec::new();
    for seed in 0..opts.battery_seeds {
        let so = SurfaceOptions::random(seed, 1 + (seed % 3) as usize, 1);
        let rt = match triangulate_surface(h, &so) {
            Ok(rt) => rt,
            Err(e) => {
                warnings.push(format!("re-triangulation {seed} failed: {e}"));
                continue;
            }
        };
        for patch in &rt.patches {
            let m = skeleton_flex_margin(patch)?;
            if m > SKELETON_FLEX_TOL {
                battery_failures.push(BatteryFailure { seed, face: patch.face, flex_margin: m });
            }
        }
    }
    let b_pass = faces.iter().all(|c| c.b_pass) && battery_failures.is_empty();
    let c_pass = faces.iter().all(|c| c.c_pass);
    Ok(HoleyhedronReport {
        a_pass,
        b_pass,
        c_pass,
        passed: a_pass && b_pass && c_pass,
        faces,
        battery_seeds: opts.battery_seeds,
        battery_failures,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FaceStress {
    pub face: usize,
    pub target_dim: usize,
    pub lambda_min: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct Assembly {
    /// Sum of the per-face stresses, in the global canonical edge order.
    pub omega: DVector<f64>,
    pub faces: Vec<FaceStress>,
    pub equilibrium_residual: f64,
}

/// Per face, a stress positive definite on velocities vanishing on the skeleton;
/// the face stresses are summed into one stress of the surface framework.
pub fn assemble_face_stresses(
    _h: &Holeyhedron,
    t: &SurfaceTriangulation,
    opts: &SolverOptions,
) -> Result<Assembly, HoleyError> {
    let mut omega = DVector::zeros(t.framework.edge_count());
    let mut faces = Vec::new();
    for patch in &t.patches {
        let f2 = patch.framework()?.with_pins(patch.skeleton.iter().copied())?;
        let target = linear::normal_pinned_basis(f2.vertex_count(), &patch.skeleton);
        let outcome = synthesis::synthesize_pd_stress(&f2, &target, opts)?;
        let cert = match outcome {
            SynthesisOutcome::Certificate(c) => c,
            other => {
                return Err(HoleyError::FaceSynthesis { face: patch.face, reason: other.kind().to_string() });
            }
        };
        for (k, &(a, b)) in f2.edges().iter().enumerate() {
            let g = t
                .framework
                .graph()
                .edge_index(patch.vertices[a], patch.vertices[b])
                .ok_or_else(|| HoleyError::Mismatch("face edge missing from the surface".into()))?;
            omega[g] += cert.stress[k];
        }
        faces.push(FaceStress { face: patch.face, target_dim: target.len(), lambda_min: cert.lambda_min });
    }
    let equilibrium_residual = linear::relative_equilibrium_residual(&t.framework, &omega)?;
    if equilibrium_residual > 1e-8 {
        return Err(HoleyError::Equilibrium(equilibrium_residual));
    }
    Ok(Assembly { omega, faces, equilibrium_residual })
}

#[derive(Clone, Debug)]
pub enum Certify3dOutcome {
    Certificate(PdCertificate),
    /// A flex whose skeleton restriction is not a rigid motion.
    SkeletonNotRigid { residual: f64, flex: DVector<f64> },
    NotPositive { lambda_min: f64, flex: DVector<f64> },
}

impl Certify3dOutcome {
    pub fn kind(&self) -> &'static str {
        match self {
            Certify3dOutcome::Certificate(_) => "pd_stress",
            Certify3dOutcome::SkeletonNotRigid { .. } => "skeleton_not_rigid",
            Certify3dOutcome::NotPositive { .. } => "not_positive",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Prestress3d {
    pub quotient_dim: usize,
    /// Largest nontrivial part of a unit quotient flex on the skeleton.
    pub skeleton_residual: f64,
    pub outcome: Certify3dOutcome,
}

/// Checks that every nontrivial flex is rigid on the skeleton and that the
/// assembled stress has positive energy on the nontrivial flex quotient.
pub fn certify_prestress_3d(
    _h: &Holeyhedron,
    t: &SurfaceTriangulation,
    assembly: &Assembly,
    tol: &Tolerances,
) -> Result<Prestress3d, HoleyError> {
    let f = &t.framework;
    let quotient = linear::flex_space_tol(f, SpaceTag::NontrivialQuotient, tol.rank);
    let s = &t.skeleton_vertices;
    let pts = DMatrix::from_fn(s.len(), 3, |r, c| f.points()[(s[r], c)]);
    let trivial = linear::trivial_flex_basis(&Configuration::from_matrix(pts)?).vectors;
    let mut skeleton_residual = 0.0;
    if !quotient.is_empty() {
        let mut q = DMatrix::zeros(3 * s.len(), quotient.len());
        for (r, &v) in s.iter().enumerate() {
            for a in 0..3 {
                q.set_row(3 * r + a, &quotient.vectors.row(3 * v + a));
            }
        }
        let residual = &q - &trivial * (trivial.transpose() * &q);
        let svd = residual.clone().svd(false, true);
        let (k, &top) = svd
            .singular_values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("quotient is nonempty");
        skeleton_residual = top;
        if top > SKELETON_RIGID_TOL {
            let coeffs = svd.v_t.as_ref().unwrap().row(k).transpose();
            let flex = &quotient.vectors * coeffs;
            return Ok(Prestress3d {
                quotient_dim: quotient.len(),
                skeleton_residual,
                outcome: Certify3dOutcome::SkeletonNotRigid { residual: top, flex },
            });
        }
    }
    let norm = assembly.omega.norm();
    let stress = if norm > 0.0 { &assembly.omega / norm } else { assembly.omega.clone() };
    let omega = linear::stress_matrix(f, &stress)?;
    let omega_norm = linalg::sym_norm(&omega);
    let equilibrium_residual = linear::relative_equilibrium_residual(f, &stress)?;
    let target = FlexBasis { tag: SpaceTag::NontrivialQuotient, ..quotient.clone() };
    if quotient.is_empty() {
        return Ok(Prestress3d {
            quotient_dim: 0,
            skeleton_residual,
            outcome: Certify3dOutcome::Certificate(PdCertificate {
                stress,
                target,
                lambda_min: None,
                reduced_eigenvalues: Vec::new(),
                omega_norm,
                equilibrium_residual,
                upper_bound: None,
            }),
        });
    }
    let energy = linear::energy_form(&omega, 3);
    let reduced = quotient.vectors.transpose() * energy * &quotient.vectors;
    let (vals, vecs) = linalg::sym_eigen(&(0.5 * (&reduced + reduced.transpose())));
    let lambda_min = vals[0];
    let outcome = if lambda_min > tol.pd * omega_norm && omega_norm > 0.0 {
        Certify3dOutcome::Certificate(PdCertificate {
            stress,
            target,
            lambda_min: Some(lambda_min),
            reduced_eigenvalues: vals,
            omega_norm,
            equilibrium_residual,
            upper_bound: None,
        })
    } else {
        Certify3dOutcome::NotPositive { lambda_min, flex: &quotient.vectors * vecs.column(0) }
    };
    Ok(Prestress3d { quotient_dim: quotient.len(), skeleton_residual, outcome })
}

/// Full pipeline on one triangulation.
pub fn certify_surface(
    h: &Holeyhedron,
    t: &SurfaceTriangulation,
    opts: &SolverOptions,
) -> Result<Prestress3d, HoleyError> {
    let assembly = assemble_face_stresses(h, t, opts)?;
    certify_prestress_3d(h, t, &assembly, &opts.tol)
}

/// The cube with a frustum lift on face 0 whose top is a hole.
pub fn cube_with_frustum_hole() -> Holeyhedron {
    let poly = Polytope3::cube();
    let base = poly.face_polygon(0);
    let n = base.len();
    let lift = LiftedFace::from_envelope(base, &vec![1.0 / 0.6; n], &[[0.0, 0.0, 1.0]]).expect("frustum lift");
    let top = (0..lift.lift_faces.len())
        .find(|&f| lift.lift_faces[f].iter().all(|&i| lift.lift_vertices[i][2] > 0.5))
        .expect("frustum has a top");
    let lift = lift.with_holes(vec![top]);
    Holeyhedron::plain(poly).with_face_lift(0, lift).expect("bases agree")
}

/// Tetrahedron ABCD with a triangular hole ABX on face ABC; AB is the hole's
/// edge along the natural edge. Returns the holeyhedron and the options that
/// subdivide AB at its midpoint M.
pub fn tetra_slit() -> (Holeyhedron, SurfaceOptions) {
    let p = fixtures::tetra_slit_points();
    let v = |i: usize| [p[i][0], p[i][1], p[i][2]];
    let poly = Polytope3::tetrahedron([v(0), v(1), v(2), v(3)]).expect("tetrahedron");
    let f = poly.faces.iter().position(|f| !f.contains(&3)).unwrap();
    let frame = poly.frame(f);
    let base = poly.face_polygon(f);
    let mut verts: Vec<P3> = base.iter().map(|q| [q[0], q[1], 0.0]).collect();
    let x = frame.to_plane(v(5));
    verts.push([x[0], x[1], 0.5]);
    let face = &poly.faces[f];
    let la = face.iter().position(|&i| i == 0).unwrap();
    let lb = face.iter().position(|&i| i == 1).unwrap();
    let lc = face.iter().position(|&i| i == 2).unwrap();
    let faces = vec![vec![0, 1, 2], vec![la, lb, 3], vec![lb, lc, 3], vec![lc, la, 3]];
    let lift = LiftedFace::new(base, verts, faces, vec![1]);
    let h = Holeyhedron::plain(poly).with_face_lift(f, lift).expect("bases agree");
    let mut opts = SurfaceOptions::default();
    opts.edge_points.insert((0, 1), vec![0.5]);
    (h, opts)
}

/// Cube whose face 0 carries a hole with a vertex `x` in the middle of a
/// natural edge; the hole edge from `x` into the face has a point `z` on it.
/// The lift is only weakly convex: the faces around `x` are coplanar.
pub fn cube_hole_vertex_on_edge() -> Holeyhedron {
    let poly = Polytope3::cube();
    let base = poly.face_polygon(0);
    // Face 0 is a 2 x 2 square; work in its corner-aligned coordinates.
    let o = base[0];
    let e1 = [(base[1][0] - o[0]) / 2.0, (base[1][1] - o[1]) / 2.0];
    let e2 = [(base[3][0] - o[0]) / 2.0, (base[3][1] - o[1]) / 2.0];
    let at = |s: f64, t: f64, z: f64| [o[0] + s * e1[0] + t * e2[0], o[1] + s * e1[1] + t * e2[1], z];
    let mut verts: Vec<P3> = base.iter().map(|q| [q[0], q[1], 0.0]).collect();
    verts.push(at(1.0, 0.0, 0.0));
    verts.push(at(0.6, 0.8, 1.0));
    verts.push(at(1.4, 0.8, 1.0));
    verts.push(at(0.8, 0.4, 0.5));
    let (x, y, w, z) = (4, 5, 6, 7);
    let faces = vec![
        vec![0, x, 1, 2, 3],
        vec![0, x, z, y],
        vec![x, w, y, z],
        vec![x, 1, w],
        vec![1, 2, w],
        vec![2, 3, y, w],
        vec![3, 0, y],
    ];
    let lift = LiftedFace::new(base, verts, faces, vec![2]);
    Holeyhedron::plain(poly).with_face_lift(0, lift).expect("bases agree")
}

/// Named surface fixtures with their default triangulation options.
pub fn surface_fixture(name: &str) -> Option<(Holeyhedron, SurfaceOptions)> {
    match name {
        "cube_surface" => Some((Holeyhedron::plain(Polytope3::cube()), SurfaceOptions::centered())),
        "cube_frustum_hole" => Some((cube_with_frustum_hole(), SurfaceOptions::centered())),
        "tetra_slit_surface" => Some(tetra_slit()),
        "cube_hole_on_edge" => Some((cube_hole_vertex_on_edge(), SurfaceOptions::centered())),
        "octahedron_surface" => Some((Holeyhedron::plain(Polytope3::octahedron()), SurfaceOptions::default())),
        _ => None,
    }
}

pub const SURFACE_CATALOG: [&str; 5] =
    ["cube_surface", "cube_frustum_hole", "tetra_slit_surface", "cube_hole_on_edge", "octahedron_surface"];

#[cfg(test)]
mod tests {
    use super::*;

    fn fast() -> ValidateOptions {
        ValidateOptions { battery_seeds: 4, net: 4 }
    }

    #[test]
    fn polytope_validation() {
        let c = Polytope3::cube();
        assert_eq!(c.edges().len(), 12);
        for f in 0..6 {
            let fr = c.frame(f);
            assert!((norm3(crossp(fr.u, fr.v)) - 1.0).abs() < 1e-12);
            assert!(signed(&c.face_polygon(f)) > 0.0);
            let p = c.vertices[c.faces[f][2]];
            let back = fr.to_space(fr.to_plane(p));
            assert!(norm3(sub(back, p)) < 1e-12);
        }
        let mut v = c.vertices.clone();
        v[7] = [0.5, 0.5, 0.5];
        assert!(Polytope3::new(v, c.faces.clone()).is_err());
        let mut faces = c.faces.clone();
        faces.pop();
        assert!(Polytope3::new(c.vertices.clone(), faces).is_err());
    }

    fn signed(p: &[P2]) -> f64 {
        triangulate::signed_area(p)
    }

    #[test]
    fn plain_cube_has_twelve_triangles() {
        let h = Holeyhedron::plain(Polytope3::cube());
        let t = triangulate_surface(&h, &SurfaceOptions::default()).unwrap();
        assert_eq!(t.triangles.len(), 12);
        assert_eq!(t.framework.vertex_count(), 8);
        assert_eq!(t.framework.edge_count(), 18);
        assert_eq!(t.skeleton_vertices, (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn centered_cube_matches_fixture_counts() {
        let h = Holeyhedron::plain(Polytope3::cube());
        let t = triangulate_surface(&h, &SurfaceOptions::centered()).unwrap();
        assert_eq!(t.framework.vertex_count(), 14);
        assert_eq!(t.framework.edge_count(), 36);
        let r = validate_holeyhedron(&h, &t, &fast()).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn frustum_hole_gives_annulus_face() {
        let h = cube_with_frustum_hole();
        let t = triangulate_surface(&h, &SurfaceOptions::centered()).unwrap();
        let p = &t.patches[0];
        assert_eq!(p.triangulation.region.holes.len(), 1);
        assert!((p.triangulation.area() - (4.0 - 0.8 * 0.8)).abs() < 1e-9);
        assert!(p.triangulation.check().is_empty());
        let r = validate_holeyhedron(&h, &t, &fast()).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn shared_edge_points_are_stitched() {
        let h = Holeyhedron::plain(Polytope3::tetrahedron([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.3, 1.7, 0.0], [0.6, 0.5, 1.4]]).unwrap());
        let t = triangulate_surface(&h, &SurfaceOptions::random(3, 2, 2)).unwrap();
        // 4 corners and 2 points on each of the 6 edges make the skeleton.
        assert_eq!(t.skeleton_vertices.len(), 16);
        let n = t.framework.vertex_count();
        assert_eq!(n, 16 + 8);
        for p in &t.patches {
            assert!(p.triangulation.check().is_empty());
        }
        // Closed triangulated sphere: E = 3V - 6.
        assert_eq!(t.framework.edge_count(), 3 * n - 6);
    }

    #[test]
    fn slit_fixture_matches_and_fails_skeleton_rigidity() {
        let (h, opts) = tetra_slit();
        let t = triangulate_surface(&h, &opts).unwrap();
        let fx = fixtures::make_example("tetra_slit", &[]).unwrap();
        assert_eq!(t.framework.vertex_count(), fx.vertex_count());
        assert_eq!(t.framework.edge_count(), fx.edge_count());
        let r = validate_holeyhedron(&h, &t, &fast()).unwrap();
        assert!(r.a_pass);
        assert!(!r.b_pass);
        assert!(r.warnings.iter().any(|w| w.contains("flange")));
    }

    #[test]
    fn hole_vertex_on_edge_fails_spider_check() {
        let h = cube_hole_vertex_on_edge();
        assert!(h.per_face[0].validate().is_ok());
        let t = triangulate_surface(&h, &SurfaceOptions::centered()).unwrap();
        let r = validate_holeyhedron(&h, &t, &fast()).unwrap();
        assert!(!r.c_pass);
        assert!(r.faces[0].spider_failures > 0);
        assert!(r.faces[1..].iter().all(|c| c.c_pass));
    }

    #[test]
    fn octahedron_targets_are_empty() {
        let h = Holeyhedron::plain(Polytope3::octahedron());
        let t = triangulate_surface(&h, &SurfaceOptions::default()).unwrap();
        let a = assemble_face_stresses(&h, &t, &SolverOptions::default()).unwrap();
        assert!(a.omega.iter().all(|&w| w == 0.0));
        assert!(a.faces.iter().all(|f| f.target_dim == 0));
        let c = certify_prestress_3d(&h, &t, &a, &Tolerances::default()).unwrap();
        assert_eq!(c.quotient_dim, 0);
        assert!(matches!(c.outcome, Certify3dOutcome::Certificate(_)));
    }

    #[test]
    fn centered_cube_is_flexible_but_prestress_stable() {
        let h = Holeyhedron::plain(Polytope3::cube());
        let t = triangulate_surface(&h, &SurfaceOptions::centered()).unwrap();
        let a = assemble_face_stresses(&h, &t, &SolverOptions::default()).unwrap();
        assert!(a.equilibrium_residual <= 1e-8);
        let c = certify_prestress_3d(&h, &t, &a, &Tolerances::default()).unwrap();
        assert_eq!(c.quotient_dim, 6);
        match c.outcome {
            Certify3dOutcome::Certificate(cert) => assert!(cert.lambda_min.unwrap() > 0.0),
            other => panic!("expected a certificate, got {}", other.kind()),
        }
    }

    #[test]
    fn slit_tetrahedron_fails_at_skeleton_stage() {
        let (h, opts) = tetra_slit();
        let t = triangulate_surface(&h, &opts).unwrap();
        let c = certify_surface(&h, &t, &SolverOptions::default()).unwrap();
        assert!(matches!(c.outcome, Certify3dOutcome::SkeletonNotRigid { .. }), "{}", c.outcome.kind());
    }

    #[test]
    fn json_round_trip() {
        let h = cube_with_frustum_hole();
        let back = Holeyhedron::from_json(&h.to_json()).unwrap();
        assert_eq!(back, h);
        let t = triangulate_surface(&h, &SurfaceOptions::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v["face_assignment"].as_array().unwrap().len(), t.triangles.len());
    }
}
