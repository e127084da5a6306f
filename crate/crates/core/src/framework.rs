//! Graphs, configurations, frameworks and trivial flexes.
//!
//! A [`Framework`] is immutable once validated: edges are canonically ordered
//! (`i < j`, lexicographic), the configuration's affine-span dimension is
//! cached, and zero-length edges are rejected.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, Tol};

/// Relative singular-value cutoff used for the affine-span rank.
pub const SPAN_RANK_TOL: f64 = 1e-9;

/// A velocity (or acceleration) assignment: one row per vertex.
pub type Assignment = DMatrix<f64>;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum FrameworkError {
    #[error("malformed framework document: {0}")]
    Schema(String),
    #[error("edge [{0}, {0}] is a self-loop")]
    SelfLoop(usize),
    #[error("edge [{0}, {1}] appears more than once")]
    DuplicateEdge(usize, usize),
    #[error("vertex index {index} is out of range for {n} vertices")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("edge [{0}, {1}] has zero length")]
    ZeroLengthEdge(usize, usize),
    #[error("point {index} has {found} coordinates, expected {expected}")]
    PointDimension { index: usize, found: usize, expected: usize },
    #[error("point {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("a framework needs at least one vertex")]
    Empty,
    #[error("member [{0}, {1}] is not an edge of the graph")]
    UnknownMember(usize, usize),
    #[error("member [{0}, {1}] is tagged both cable and strut")]
    ConflictingMember(usize, usize),
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),
    #[error("invalid fixture parameter: {0}")]
    InvalidParameter(String),
}

/// Undirected simple graph with canonically ordered edges.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, FrameworkError> {
        if n == 0 {
            return Err(FrameworkError::Empty);
        }
        let mut out = Vec::new();
        for (a, b) in edges {
            for idx in [a, b] {
                if idx >= n {
                    return Err(FrameworkError::IndexOutOfRange { index: idx, n });
                }
            }
            if a == b {
                return Err(FrameworkError::SelfLoop(a));
            }
            out.push((a.min(b), a.max(b)));
        }
        out.sort_unstable();
        if let Some(w) = out.windows(2).find(|w| w[0] == w[1]) {
            return Err(FrameworkError::DuplicateEdge(w[0].0, w[0].1));
        }
        Ok(Self { n, edges: out })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Position of `{i, j}` in canonical edge order.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        self.edges.binary_search(&(i.min(j), i.max(j))).ok()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edge_index(i, j).is_some()
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect()
    }

    /// All vertex pairs that are not edges, in lexicographic order.
    pub fn non_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if !self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Points in `R^d`, stored as an `n × d` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Configuration {
    points: DMatrix<f64>,
    span_dim: usize,
}

impl Configuration {
    pub fn from_matrix(points: DMatrix<f64>) -> Result<Self, FrameworkError> {
        if points.nrows() == 0 {
            return Err(FrameworkError::Empty);
        }
        for i in 0..points.nrows() {
            if points.row(i).iter().any(|x| !x.is_finite()) {
                return Err(FrameworkError::NonFinite(i));
            }
        }
        let span_dim = affine_span_dim(&points);
        Ok(Self { points, span_dim })
    }

    pub fn from_rows(dimension: usize, rows: &[Vec<f64>]) -> Result<Self, FrameworkError> {
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dimension {
                return Err(FrameworkError::PointDimension {
                    index: i,
                    found: r.len(),
                    expected: dimension,
                });
            }
        }
        let n = rows.len();
        Self::from_matrix(DMatrix::from_fn(n, dimension, |i, a| rows[i][a]))
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dimension(&self) -> usize {
        self.points.ncols()
    }

    pub fn span_dim(&self) -> usize {
        self.span_dim
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn point(&self, i: usize) -> DVector<f64> {
        self.points.row(i).transpose()
    }

    pub fn centroid(&self) -> DVector<f64> {
        let n = self.len() as f64;
        DVector::from_fn(self.dimension(), |a, _| self.points.column(a).sum() / n)
    }

    /// Same points padded with zero coordinates up to `dim`.
    pub fn embedded(&self, dim: usize) -> Configuration {
        assert!(dim >= self.dimension(), "cannot embed into a smaller dimension");
        let mut p = DMatrix::zeros(self.len(), dim);
        p.view_mut((0, 0), self.points.shape()).copy_from(&self.points);
        Configuration { points: p, span_dim: self.span_dim }
    }

    /// Centroid and an orthonormal `d × k` basis of the affine span directions.
    pub fn span_basis(&self) -> (DVector<f64>, DMatrix<f64>) {
        let c = self.centroid();
        let centered = self.centered();
        let basis = linalg::column_space(&centered.transpose(), Tol::Rel(SPAN_RANK_TOL));
        // Guard against a degenerate rank flip relative to the cached value.
        let k = basis.ncols().min(self.span_dim);
        (c, basis.columns(0, k).into_owned())
    }

    fn centered(&self) -> DMatrix<f64> {
        let c = self.centroid();
        let mut m = self.points.clone();
        for i in 0..m.nrows() {
            for a in 0..m.ncols() {
                m[(i, a)] -= c[a];
            }
        }
        m
    }

    /// Largest distance between any two points.
    pub fn diameter(&self) -> f64 {
        let mut best = 0.0_f64;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.max((self.points.row(i) - self.points.row(j)).norm());
            }
        }
        best
    }
}

fn affine_span_dim(points: &DMatrix<f64>) -> usize {
    let n = points.nrows();
    if n <= 1 {
        return 0;
    }
    let d = points.ncols();
    let mut centered = points.clone();
    for a in 0..d {
        let mean = points.column(a).sum() / n as f64;
        for i in 0..n {
            centered[(i, a)] -= mean;
        }
    }
    linalg::rank(&centered, Tol::Rel(SPAN_RANK_TOL))
}

/// Sign constraint attached to an edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Member {
    Bar,
    Cable,
    Strut,
}

/// Graph + configuration + first-order pins + member tags.
#[derive(Clone, Debug, PartialEq)]
pub struct Framework {
    graph: Graph,
    config: Configuration,
    pins: Vec<usize>,
    members: Vec<Member>,
}

impl Framework {
    pub fn new(graph: Graph, config: Configuration) -> Result<Self, FrameworkError> {
        if graph.vertex_count() != config.len() {
            return Err(FrameworkError::Shape(format!(
                "graph has {} vertices but configuration has {} points",
                graph.vertex_count(),
                config.len()
            )));
        }
        for &(i, j) in graph.edges() {
            if (config.points.row(i) - config.points.row(j)).norm() == 0.0 {
                return Err(FrameworkError::ZeroLengthEdge(i, j));
            }
        }
        let members = vec![Member::Bar; graph.edge_count()];
        Ok(Self { graph, config, pins: Vec::new(), members })
    }

    /// Convenience constructor from raw rows and edge pairs.
    pub fn from_parts(
        dimension: usize,
        points: &[Vec<f64>],
        edges: &[(usize, usize)],
    ) -> Result<Self, FrameworkError> {
        let config = Configuration::from_rows(dimension, points)?;
        let graph = Graph::new(points.len(), edges.iter().copied())?;
        Self::new(graph, config)
    }

    pub fn with_pins(mut self, pins: impl IntoIterator<Item = usize>) -> Result<Self, FrameworkError> {
        let n = self.vertex_count();
        let mut p: Vec<usize> = pins.into_iter().collect();
        if let Some(&bad) = p.iter().find(|&&v| v >= n) {
            return Err(FrameworkError::IndexOutOfRange { index: bad, n });
        }
        p.sort_unstable();
        p.dedup();
        self.pins = p;
        Ok(self)
    }

    pub fn with_members(
        mut self,
        cables: &[(usize, usize)],
        struts: &[(usize, usize)],
    ) -> Result<Self, FrameworkError> {
        let mut members = vec![Member::Bar; self.graph.edge_count()];
        for (&(i, j), tag) in cables
            .iter()
            .map(|e| (e, Member::Cable))
            .chain(struts.iter().map(|e| (e, Member::Strut)))
            .map(|(e, t)| (e, t))
        {
            let k = self.graph.edge_index(i, j).ok_or(FrameworkError::UnknownMember(i, j))?;
            if members[k] != Member::Bar && members[k] != tag {
                return Err(FrameworkError::ConflictingMember(i.min(j), i.max(j)));
            }
            members[k] = tag;
        }
        self.members = members;
        Ok(self)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn configuration(&self) -> &Configuration {
        &self.config
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.config.points
    }

    pub fn pins(&self) -> &[usize] {
        &self.pins
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn has_members(&self) -> bool {
        self.members.iter().any(|m| *m != Member::Bar)
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn dimension(&self) -> usize {
        self.config.dimension()
    }

    pub fn span_dim(&self) -> usize {
        self.config.span_dim()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        self.graph.edges()
    }

    /// `p_i - p_j` for the `k`-th edge `{i, j}`.
    pub fn edge_vector(&self, k: usize) -> DVector<f64> {
        let (i, j) = self.graph.edges[k];
        (self.config.points.row(i) - self.config.points.row(j)).transpose()
    }

    /// The same framework realized in `R^dim` (zero-padded coordinates).
    pub fn embedded(&self, dim: usize) -> Framework {
        Framework {
            graph: self.graph.clone(),
            config: self.config.embedded(dim),
            pins: self.pins.clone(),
            members: self.members.clone(),
        }
    }

    /// A copy with an extra list of edges appended (members default to bars).
    pub fn with_extra_edges(&self, extra: &[(usize, usize)]) -> Result<Framework, FrameworkError> {
        let mut edges: Vec<(usize, usize)> = self.graph.edges.clone();
        edges.extend_from_slice(extra);
        let graph = Graph::new(self.vertex_count(), edges)?;
        let mut out = Framework::new(graph, self.config.clone())?.with_pins(self.pins.clone())?;
        let (cables, struts) = self.member_lists();
        out = out.with_members(&cables, &struts)?;
        Ok(out)
    }

    pub(crate) fn member_lists(&self) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
        let mut cables = Vec::new();
        let mut struts = Vec::new();
        for (k, m) in self.members.iter().enumerate() {
            match m {
                Member::Cable => cables.push(self.graph.edges[k]),
                Member::Strut => struts.push(self.graph.edges[k]),
                Member::Bar => {}
            }
        }
        (cables, struts)
    }

    /// Largest edge length.
    pub fn edge_scale(&self) -> f64 {
        (0..self.edge_count()).map(|k| self.edge_vector(k).norm()).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        let mut s = String::from("{\n");
        let _ = writeln!(s, "  \"dimension\": {},", self.dimension());
        s.push_str("  \"points\": [");
        for i in 0..self.vertex_count() {
            if i > 0 {
                s.push_str(", ");
            }
            s.push('[');
            for a in 0..self.dimension() {
                if a > 0 {
                    s.push_str(", ");
                }
                s.push_str(&fmt_f64(self.config.points[(i, a)]));
            }
            s.push(']');
        }
        s.push_str("],\n");
        s.push_str("  \"edges\": ");
        s.push_str(&fmt_pairs(&self.graph.edges));
        let (cables, struts) = self.member_lists();
        if !self.pins.is_empty() {
            s.push_str(",\n  \"pins\": [");
            let pins: Vec<String> = self.pins.iter().map(|p| p.to_string()).collect();
            s.push_str(&pins.join(", "));
            s.push(']');
        }
        if !cables.is_empty() {
            s.push_str(",\n  \"cables\": ");
            s.push_str(&fmt_pairs(&cables));
        }
        if !struts.is_empty() {
            s.push_str(",\n  \"struts\": ");
            s.push_str(&fmt_pairs(&struts));
        }
        s.push_str("\n}\n");
        s
    }

    pub fn from_json(text: &str) -> Result<Self, FrameworkError> {
        let doc: FrameworkDoc =
            serde_json::from_str(text).map_err(|e| FrameworkError::Schema(e.to_string()))?;
        doc.into_framework()
    }

    pub fn to_doc(&self) -> FrameworkDoc {
        let (cables, struts) = self.member_lists();
        FrameworkDoc {
            dimension: self.dimension(),
            points: (0..self.vertex_count())
                .map(|i| self.config.points.row(i).iter().copied().collect())
                .collect(),
            edges: self.graph.edges.iter().map(|&(a, b)| [a, b]).collect(),
            pins: self.pins.clone(),
            cables: cables.iter().map(|&(a, b)| [a, b]).collect(),
            struts: struts.iter().map(|&(a, b)| [a, b]).collect(),
        }
    }
}

/// On-disk framework document.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FrameworkDoc {
    pub dimension: usize,
    pub points: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pins: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cables: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub struts: Vec<[usize; 2]>,
}

impl FrameworkDoc {
    pub fn into_framework(self) -> Result<Framework, FrameworkError> {
        let config = Configuration::from_rows(self.dimension, &self.points)?;
        let graph = Graph::new(self.points.len(), self.edges.iter().map(|e| (e[0], e[1])))?;
        let cables: Vec<(usize, usize)> = self.cables.iter().map(|e| (e[0], e[1])).collect();
        let struts: Vec<(usize, usize)> = self.struts.iter().map(|e| (e[0], e[1])).collect();
        Framework::new(graph, config)?.with_pins(self.pins)?.with_members(&cables, &struts)
    }
}

/// Shortest round-trip decimal form, always with a decimal point or exponent.
pub(crate) fn fmt_f64(x: f64) -> String {
    serde_json::to_string(&x).unwrap_or_else(|_| "null".into())
}

fn fmt_pairs(pairs: &[(usize, usize)]) -> String {
    let items: Vec<String> = pairs.iter().map(|(a, b)| format!("[{a}, {b}]")).collect();
    format!("[{}]", items.join(", "))
}

pub fn load_framework(bytes: &[u8]) -> Result<Framework, FrameworkError> {
    let text = std::str::from_utf8(bytes).map_err(|e| FrameworkError::Schema(e.to_string()))?;
    Framework::from_json(text)
}

/// Velocity field of a rigid motion, `p'_i = A p_i + b` with `A` skew.
#[derive(Clone, Debug, PartialEq)]
pub struct TrivialFlex {
    dim: usize,
    upper: Vec<f64>,
    translation: DVector<f64>,
}

impl TrivialFlex {
    /// `upper` lists the strictly-upper entries of `A` row by row.
    pub fn new(dim: usize, upper: Vec<f64>, translation: DVector<f64>) -> Result<Self, FrameworkError> {
        if upper.len() != dim * dim.saturating_sub(1) / 2 || translation.len() != dim {
            return Err(FrameworkError::Shape(format!(
                "trivial flex in R^{dim} needs {} skew entries and a {dim}-vector",
                dim * dim.saturating_sub(1) / 2
            )));
        }
        Ok(Self { dim, upper, translation })
    }

    pub fn from_skew(skew: &DMatrix<f64>, translation: DVector<f64>) -> Result<Self, FrameworkError> {
        let d = skew.nrows();
        if skew.ncols() != d || skew != &(-skew.transpose()) {
            return Err(FrameworkError::Shape("matrix is not exactly skew-symmetric".into()));
        }
        let mut upper = Vec::new();
        for r in 0..d {
            for c in r + 1..d {
                upper.push(skew[(r, c)]);
            }
        }
        Self::new(d, upper, translation)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn skew(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.dim, self.dim);
        let mut k = 0;
        for r in 0..self.dim {
            for c in r + 1..self.dim {
                a[(r, c)] = self.upper[k];
                a[(c, r)] = -self.upper[k];
                k += 1;
            }
        }
        a
    }

    pub fn translation(&self) -> &DVector<f64> {
        &self.translation
    }

    pub fn evaluate(&self, config: &Configuration) -> Result<Assignment, FrameworkError> {
        evaluate_trivial_flex(self, config)
    }
}

pub fn evaluate_trivial_flex(t: &TrivialFlex, c: &Configuration) -> Result<Assignment, FrameworkError> {
    if t.dim != c.dimension() {
        return Err(FrameworkError::Shape(format!(
            "trivial flex is in R^{} but configuration is in R^{}",
            t.dim,
            c.dimension()
        )));
    }
    let a = t.skew();
    let mut out = DMatrix::zeros(c.len(), t.dim);
    for i in 0..c.len() {
        let v = &a * c.point(i) + &t.translation;
        out.set_row(i, &v.transpose());
    }
    Ok(out)
}
