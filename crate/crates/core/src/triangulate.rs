//! Constrained triangulation of polygons with holes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};
use thiserror::Error;

use crate::framework::{Framework, FrameworkError};

pub type P2 = [f64; 2];

#[derive(Clone, Debug, Error, PartialEq)]
pub enum TriangulationError {
    #[error("polygon is self-intersecting: {0}")]
    SelfIntersecting(String),
    #[error("hole {0} is not strictly inside the region")]
    HoleOutside(usize),
    #[error("holes {0} and {1} overlap")]
    HolesOverlap(usize, usize),
    #[error("polygon needs at least three vertices with nonzero area")]
    Degenerate,
    #[error("triangulation failed: {0}")]
    Backend(String),
    #[error(transparent)]
    Framework(#[from] FrameworkError),
}

/// Simple polygon with simple polygonal holes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub outer: Vec<P2>,
    #[serde(default)]
    pub holes: Vec<Vec<P2>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarTriangulation {
    pub points: Vec<P2>,
    /// Counterclockwise index triples.
    pub triangles: Vec<[usize; 3]>,
    pub constrained_edges: Vec<(usize, usize)>,
    pub region: Region,
}

pub(crate) fn cross(o: P2, a: P2, b: P2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

pub fn signed_area(poly: &[P2]) -> f64 {
    let n = poly.len();
    (0..n).map(|i| {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        a[0] * b[1] - a[1] * b[0]
    }).sum::<f64>() * 0.5
}

fn same(a: P2, b: P2) -> bool {
    (a[0] - b[0]).abs() <= 1e-12 && (a[1] - b[1]).abs() <= 1e-12
}

/// Whether closed segments `ab` and `cd` meet other than at shared endpoints.
fn segments_conflict(a: P2, b: P2, c: P2, d: P2) -> bool {
    let shared = [same(a, c), same(a, d), same(b, c), same(b, d)];
    let eps = 1e-12 * (1.0 + a[0].abs() + a[1].abs() + b[0].abs() + b[1].abs());
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    let n_shared = shared.iter().filter(|&&s| s).count();
    if n_shared >= 2 {
        return true;
    }
    if n_shared == 1 {
        // Adjacent segments conflict only if they overlap collinearly.
        let (s, x, y) = match shared.iter().position(|&s| s).unwrap() {
            0 => (a, b, d),
            1 => (a, b, c),
            2 => (b, a, d),
            _ => (b, a, c),
        };
        let u = [x[0] - s[0], x[1] - s[1]];
        let v = [y[0] - s[0], y[1] - s[1]];
        return cross(s, x, y).abs() <= eps && u[0] * v[0] + u[1] * v[1] > 0.0;
    }
    if ((d1 > eps && d2 < -eps) || (d1 < -eps && d2 > eps)) && ((d3 > eps && d4 < -eps) || (d3 < -eps && d4 > eps)) {
        return true;
    }
    let on = |p: P2, q: P2, r: P2, dd: f64| {
        dd.abs() <= eps
            && r[0] >= p[0].min(q[0]) - eps
            && r[0] <= p[0].max(q[0]) + eps
            && r[1] >= p[1].min(q[1]) - eps
            && r[1] <= p[1].max(q[1]) + eps
    };
    on(c, d, a, d1) || on(c, d, b, d2) || on(a, b, c, d3) || on(a, b, d, d4)
}

fn edges_of(poly: &[P2]) -> impl Iterator<Item = (P2, P2)> + '_ {
    (0..poly.len()).map(move |i| (poly[i], poly[(i + 1) % poly.len()]))
}

fn check_simple(poly: &[P2], what: &str) -> Result<(), TriangulationError> {
    if poly.len() < 3 || signed_area(poly).abs() <= 1e-14 {
        return Err(TriangulationError::Degenerate);
    }
    let n = poly.len();
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if same(a, b) || same(c, d) {
                return Err(TriangulationError::SelfIntersecting(format!("{what} has a repeated vertex")));
            }
            if segments_conflict(a, b, c, d) {
                return Err(TriangulationError::SelfIntersecting(format!("{what} edges {i} and {j} cross")));
            }
        }
    }
    Ok(())
}

/// Strict point-in-polygon by ray casting; points on the boundary may go either way.
pub fn point_in_polygon(p: P2, poly: &[P2]) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Distance from `p` to the polygon boundary.
pub fn boundary_distance(p: P2, poly: &[P2]) -> f64 {
    edges_of(poly).map(|(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min)
}

pub fn segment_distance(p: P2, a: P2, b: P2) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let l2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if l2 == 0.0 { 0.0 } else { ((ap[0] * ab[0] + ap[1] * ab[1]) / l2).clamp(0.0, 1.0) };
    let q = [a[0] + t * ab[0] - p[0], a[1] + t * ab[1] - p[1]];
    (q[0] * q[0] + q[1] * q[1]).sqrt()
}

impl Region {
    pub fn new(outer: Vec<P2>, holes: Vec<Vec<P2>>) -> Self {
        Self { outer, holes }
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.outer).abs() - self.holes.iter().map(|h| signed_area(h).abs()).sum::<f64>()
    }

    pub fn validate(&self) -> Result<(), TriangulationError> {
        check_simple(&self.outer, "outer boundary")?;
        for (h, hole) in self.holes.iter().enumerate() {
            check_simple(hole, &format!("hole {h}"))?;
            for &v in hole {
                let on_vertex = self.outer.iter().any(|&o| same(o, v));
                if !on_vertex && (!point_in_polygon(v, &self.outer) || boundary_distance(v, &self.outer) <= 1e-12) {
                    return Err(TriangulationError::HoleOutside(h));
                }
            }
            for (a, b) in edges_of(hole) {
                if edges_of(&self.outer).any(|(c, d)| segments_conflict(a, b, c, d)) {
                    return Err(TriangulationError::HoleOutside(h));
                }
            }
            for (g, other) in self.holes.iter().enumerate().take(h) {
                let overlap = edges_of(hole).any(|(a, b)| edges_of(other).any(|(c, d)| segments_conflict(a, b, c, d)))
                    || hole.iter().any(|&v| point_in_polygon(v, other))
                    || other.iter().any(|&v| point_in_polygon(v, hole));
                if overlap {
                    return Err(TriangulationError::HolesOverlap(g, h));
                }
            }
        }
        Ok(())
    }

    /// Strictly inside the outer boundary and outside every hole's closure.
    pub fn contains(&self, p: P2) -> bool {
        point_in_polygon(p, &self.outer)
            && !self.holes.iter().any(|h| point_in_polygon(p, h) || boundary_distance(p, h) <= 1e-12)
    }
}

#[derive(Clone, Debug, Default)]
pub struct TriangulateOptions {
    pub steiner: Vec<P2>,
    /// Extra interior points drawn uniformly from the region with the seed.
    pub random_steiner: usize,
    pub seed: u64,
}

pub fn triangulate_region(region: &Region, opts: &TriangulateOptions) -> Result<PlanarTriangulation, TriangulationError> {
    region.validate()?;
    let mut points: Vec<P2> = Vec::new();
    let mut constrained = Vec::new();
    for poly in std::iter::once(&region.outer).chain(region.holes.iter()) {
        let ids: Vec<usize> = poly.iter().map(|&p| index_of(&mut points, p)).collect();
        for i in 0..ids.len() {
            constrained.push((ids[i], ids[(i + 1) % ids.len()]));
        }
    }
    for &s in &opts.steiner {
        if !region.contains(s) || boundary_distance(s, &region.outer) <= 1e-12 {
            return Err(TriangulationError::Backend(format!("Steiner point {s:?} is not interior to the region")));
        }
        index_of(&mut points, s);
    }
    let extra = sample_interior_points(region, &points, opts.random_steiner, opts.seed);
    points.extend(extra);
    let triangles = constrained_triangulation(&points, &constrained, |c| region.contains(c))?;
    Ok(PlanarTriangulation { points, triangles, constrained_edges: constrained, region: region.clone() })
}

pub(crate) fn index_of(points: &mut Vec<P2>, p: P2) -> usize {
    if let Some(k) = points.iter().position(|&q| same(p, q)) {
        k
    } else {
        points.push(p);
        points.len() - 1
    }
}

/// Up to `count` seeded points inside `region`, kept clear of its boundaries and of `existing`.
pub fn sample_interior_points(region: &Region, existing: &[P2], count: usize, seed: u64) -> Vec<P2> {
    let mut out: Vec<P2> = Vec::new();
    if count == 0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = bbox(&region.outer);
    let scale = ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt();
    let margin = 0.05 * scale;
    let mut tries = 0;
    while out.len() < count && tries < 100_000 {
        tries += 1;
        let p = [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])];
        let far = |q: &P2| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt() > margin;
        let clear = region.contains(p)
            && boundary_distance(p, &region.outer) > margin
            && region.holes.iter().all(|h| boundary_distance(p, h) > margin)
            && existing.iter().all(far)
            && out.iter().all(far);
        if clear {
            out.push(p);
        }
    }
    out
}

/// Constrained Delaunay triangulation of `points` keeping triangles whose centroid
/// passes `keep`. Constraints are split at any input point lying on them.
/// Returns counterclockwise triangles, sorted.
pub(crate) fn constrained_triangulation(
    points: &[P2],
    constraints: &[(usize, usize)],
    keep: impl Fn(P2) -> bool,
) -> Result<Vec<[usize; 3]>, TriangulationError> {
    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::new();
    let mut handles = Vec::with_capacity(points.len());
    for p in points {
        let h = cdt
            .insert(Point2::new(p[0], p[1]))
            .map_err(|e| TriangulationError::Backend(format!("{e:?}")))?;
        handles.push(h);
    }
    if cdt.num_vertices() != points.len() {
        return Err(TriangulationError::Backend("coincident input points".into()));
    }
    for &(a, b) in constraints {
        let (pa, pb) = (points[a], points[b]);
        let dir = [pb[0] - pa[0], pb[1] - pa[1]];
        let len2 = dir[0] * dir[0] + dir[1] * dir[1];
        let mut chain: Vec<(f64, usize)> = (0..points.len())
            .filter(|&v| v != a && v != b && segment_distance(points[v], pa, pb) <= 1e-12 * len2.sqrt())
            .map(|v| (((points[v][0] - pa[0]) * dir[0] + (points[v][1] - pa[1]) * dir[1]) / len2, v))
            .collect();
        chain.sort_by(|x, y| x.0.total_cmp(&y.0));
        let ids: Vec<usize> = std::iter::once(a).chain(chain.into_iter().map(|c| c.1)).chain(std::iter::once(b)).collect();
        for w in ids.windows(2) {
            if cdt.exists_constraint(handles[w[0]], handles[w[1]]) {
                continue;
            }
            if !cdt.can_add_constraint(handles[w[0]], handles[w[1]]) {
                return Err(TriangulationError::SelfIntersecting(format!("constraint {}-{} crosses another", w[0], w[1])));
            }
            cdt.add_constraint(handles[w[0]], handles[w[1]]);
        }
    }
    let back: std::collections::HashMap<usize, usize> =
        handles.iter().enumerate().map(|(k, h)| (h.index(), k)).collect();
    let mut triangles = Vec::new();
    for face in cdt.inner_faces() {
        let vs = face.vertices();
        let ids = [back[&vs[0].fix().index()], back[&vs[1].fix().index()], back[&vs[2].fix().index()]];
        let c = [
            (points[ids[0]][0] + points[ids[1]][0] + points[ids[2]][0]) / 3.0,
            (points[ids[0]][1] + points[ids[1]][1] + points[ids[2]][1]) / 3.0,
        ];
        let longest = (0..3)
            .map(|i| {
                let (p, q) = (points[ids[i]], points[ids[(i + 1) % 3]]);
                (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
            })
            .fold(0.0, f64::max);
        if !keep(c) || cross(points[ids[0]], points[ids[1]], points[ids[2]]).abs() <= 1e-12 * longest {
            continue;
        }
        let t = if cross(points[ids[0]], points[ids[1]], points[ids[2]]) > 0.0 {
            ids
        } else {
            [ids[0], ids[2], ids[1]]
        };
        triangles.push(t);
    }
    triangles.sort_unstable();
    Ok(triangles)
}

fn bbox(poly: &[P2]) -> (P2, P2) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in poly {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (lo, hi)
}

impl PlanarTriangulation {
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[0], t[2])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Bar framework on the used vertices (unused points are kept as isolated vertices).
    pub fn framework(&self) -> Result<Framework, FrameworkError> {
        let rows: Vec<Vec<f64>> = self.points.iter().map(|p| p.to_vec()).collect();
        Framework::from_parts(2, &rows, &self.edges())
    }

    pub fn area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| 0.5 * cross(self.points[t[0]], self.points[t[1]], self.points[t[2]]))
            .sum()
    }

    /// Vertices on an edge used by exactly one triangle.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut count = std::collections::BTreeMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *count.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        let mut v: Vec<usize> = count.iter().filter(|(_, &c)| c == 1).flat_map(|(&(a, b), _)| [a, b]).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Checks orientation, area coverage, no overlaps (on centroid samples) and
    /// constrained-edge recovery. Returns a list of problems (empty when valid).
    pub fn check(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (k, t) in self.triangles.iter().enumerate() {
            if cross(self.points[t[0]], self.points[t[1]], self.points[t[2]]) <= 0.0 {
                problems.push(format!("triangle {k} is not positively oriented"));
            }
        }
        let want = self.region.area();
        if (self.area() - want).abs() > 1e-9 * want.abs().max(1.0) {
            problems.push(format!("area {} differs from region area {}", self.area(), want));
        }
        let inside = |p: P2, t: &[usize; 3]| {
            (0..3).all(|i| cross(self.points[t[i]], self.points[t[(i + 1) % 3]], p) > 1e-12)
        };
        for (k, t) in self.triangles.iter().enumerate() {
            let c = [
                (self.points[t[0]][0] + self.points[t[1]][0] + self.points[t[2]][0]) / 3.0,
                (self.points[t[0]][1] + self.points[t[1]][1] + self.points[t[2]][1]) / 3.0,
            ];
            for (j, u) in self.triangles.iter().enumerate() {
                if j != k && inside(c, u) {
                    problems.push(format!("triangles {k} and {j} overlap"));
                }
            }
        }
        let edges = self.edges();
        for &(a, b) in &self.constrained_edges {
            // A constraint may be split at vertices lying on it.
            let pa = self.points[a];
            let pb = self.points[b];
            let on: Vec<usize> = (0..self.points.len())
                .filter(|&v| segment_distance(self.points[v], pa, pb) <= 1e-12)
                .collect();
            let mut chain: Vec<usize> = on.clone();
            let dir = [pb[0] - pa[0], pb[1] - pa[1]];
            chain.sort_by(|&x, &y| {
                let tx = (self.points[x][0] - pa[0]) * dir[0] + (self.points[x][1] - pa[1]) * dir[1];
                let ty = (self.points[y][0] - pa[0]) * dir[0] + (self.points[y][1] - pa[1]) * dir[1];
                tx.total_cmp(&ty)
            });
            for w in chain.windows(2) {
                if edges.binary_search(&(w[0].min(w[1]), w[0].max(w[1]))).is_err() {
                    problems.push(format!("constraint {a}-{b} is not recovered"));
                    break;
                }
            }
        }
        problems
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<P2> {
        vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
    }

    #[test]
    fn fan_with_center() {
        let r = Region::new(square(), vec![]);
        let t = triangulate_region(&r, &TriangulateOptions { steiner: vec![[0.5, 0.5]], ..Default::default() }).unwrap();
        assert_eq!(t.triangles.len(), 4);
        assert!(t.check().is_empty(), "{:?}", t.check());
    }

    #[test]
    fn annulus_has_eight_triangles() {
        let hole = vec![[0.3, 0.3], [0.7, 0.3], [0.7, 0.7], [0.3, 0.7]];
        let r = Region::new(square(), vec![hole]);
        let t = triangulate_region(&r, &TriangulateOptions::default()).unwrap();
        assert_eq!(t.triangles.len(), 8);
        assert!(t.check().is_empty(), "{:?}", t.check());
        assert!((t.area() - 0.84).abs() < 1e-12);
    }

    #[test]
    fn hole_across_boundary_is_rejected() {
        let hole = vec![[0.5, -0.2], [0.8, 0.2], [0.5, 0.5]];
        let r = Region::new(square(), vec![hole]);
        assert!(matches!(triangulate_region(&r, &TriangulateOptions::default()), Err(TriangulationError::HoleOutside(0))));
    }

    #[test]
    fn bowtie_is_rejected() {
        let r = Region::new(vec![[0.0, 0.0], [2.0, 2.0], [2.0, 0.0], [0.0, 1.0]], vec![]);
        assert!(matches!(r.validate(), Err(TriangulationError::SelfIntersecting(_))));
    }

    #[test]
    fn hole_touching_a_corner_is_allowed() {
        let hole = vec![[0.0, 0.0], [0.5, 0.2], [0.2, 0.5]];
        let r = Region::new(square(), vec![hole]);
        let t = triangulate_region(&r, &TriangulateOptions::default()).unwrap();
        assert!(t.check().is_empty(), "{:?}", t.check());
    }

    #[test]
    fn random_steiner_is_seeded() {
        let r = Region::new(square(), vec![]);
        let o = TriangulateOptions { random_steiner: 6, seed: 11, ..Default::default() };
        let a = triangulate_region(&r, &o).unwrap();
        let b = triangulate_region(&r, &o).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.points.len(), 10);
        assert!(a.points[4..].iter().all(|&p| r.contains(p)));
        assert!(a.check().is_empty());
    }
}
