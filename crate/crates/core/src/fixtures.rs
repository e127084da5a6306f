//! Deterministic fixture catalog.
//!
//! Coordinates are fixed construction parameters, documented per fixture in
//! [`CATALOG`]. Only `twisted_triangle` and `cable_web` accept a parameter (the
//! twist angle in radians, default 0.3).

use std::f64::consts::PI;

use crate::framework::{Framework, FrameworkError};

/// Fixture names with a one-line description of the geometry.
pub const CATALOG: &[(&str, &str)] = &[
    ("segment", "two points 0 and 1 on the line"),
    ("triangle", "(0,0), (1,0), (0,1)"),
    ("four_cycle", "axis-aligned unit square, four sides"),
    ("square_with_diagonals", "unit square with both diagonals"),
    ("octahedron", "the six points ±e_i, twelve edges"),
    ("cube", "[-1,1]^3 with one diagonal per face, 18 edges"),
    ("cube_face_centers", "[-1,1]^3 with a center vertex on every face joined to its corners"),
    ("cube_one_center", "cube with one face-center vertex, diagonals on the other faces"),
    ("y_pinned", "pinned tips at 90, 210, 330 degrees on the unit circle, center at the origin"),
    ("y_braced", "y_pinned plus bars joining the pinned tips"),
    ("y_subdivided", "y_braced with each tip-to-tip bar halved at a pinned midpoint"),
    ("twisted_triangle", "pinned outer triangle, inner triangle at radius 0.4 twisted by theta"),
    ("cable_web", "spiderweb twist: bar boundary triangle, cable interior"),
    ("holey_square", "unit square minus [0.3,0.7]^2 triangulated by 8 triangles, corners pinned"),
    ("frustum_spider", "projected frustum over the unit square, top [0.3,0.7]^2, corners pinned"),
    ("spider_fig8b", "frustum_spider with the boundary diagonal 0-2 added"),
    ("tetra_slit", "tetrahedron with a slit hole on face ABC, AB subdivided at its midpoint"),
];

pub fn make_example(name: &str, params: &[f64]) -> Result<Framework, FrameworkError> {
    let takes_theta = matches!(name, "twisted_triangle" | "cable_web");
    if !takes_theta && !params.is_empty() {
        return Err(FrameworkError::InvalidParameter(format!("`{name}` takes no parameters")));
    }
    if params.len() > 1 {
        return Err(FrameworkError::InvalidParameter(format!("`{name}` takes at most one parameter")));
    }
    let theta = params.first().copied().unwrap_or(0.3);
    if takes_theta && !(theta.is_finite() && theta.abs() < PI / 3.0 && theta != 0.0) {
        return Err(FrameworkError::InvalidParameter(format!(
            "twist angle must be finite, nonzero and below pi/3 in magnitude, got {theta}"
        )));
    }
    match name {
        "segment" => Framework::from_parts(1, &[vec![0.0], vec![1.0]], &[(0, 1)]),
        "triangle" => Framework::from_parts(
            2,
            &[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
            &[(0, 1), (1, 2), (0, 2)],
        ),
        "four_cycle" => Framework::from_parts(2, &unit_square(), &[(0, 1), (1, 2), (2, 3), (0, 3)]),
        "square_with_diagonals" => Framework::from_parts(
            2,
            &unit_square(),
            &[(0, 1), (1, 2), (2, 3), (0, 3), (0, 2), (1, 3)],
        ),
        "octahedron" => octahedron(),
        "cube" => cube(&[]),
        "cube_face_centers" => cube(&[0, 1, 2, 3, 4, 5]),
        "cube_one_center" => cube(&[5]),
        "y_pinned" => y_frame(false, false),
        "y_braced" => y_frame(true, false),
        "y_subdivided" => y_frame(true, true),
        "twisted_triangle" => twisted(theta, false),
        "cable_web" => twisted(theta.abs(), true),
        "holey_square" => holey_square(),
        "frustum_spider" => frustum_spider(false),
        "spider_fig8b" => frustum_spider(true),
        "tetra_slit" => tetra_slit(),
        other => Err(FrameworkError::UnknownFixture(other.to_string())),
    }
}

fn unit_square() -> Vec<Vec<f64>> {
    vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]]
}

fn octahedron() -> Result<Framework, FrameworkError> {
    let mut pts = Vec::new();
    for a in 0..3 {
        for s in [1.0, -1.0] {
            let mut p = vec![0.0; 3];
            p[a] = s;
            pts.push(p);
        }
    }
    // Vertices 2a and 2a+1 are antipodal; every other pair is an edge.
    let mut edges = Vec::new();
    for i in 0..6 {
        for j in i + 1..6 {
            if i / 2 != j / 2 {
                edges.push((i, j));
            }
        }
    }
    Framework::from_parts(3, &pts, &edges)
}

/// Faces of `[-1,1]^3` as cycles over the corner indices `x + 2y + 4z`.
pub(crate) const CUBE_FACES: [[usize; 4]; 6] = [
    [0, 2, 6, 4],
    [1, 5, 7, 3],
    [0, 4, 5, 1],
    [2, 3, 7, 6],
    [0, 1, 3, 2],
    [4, 6, 7, 5],
];

pub(crate) fn cube_corners() -> Vec<Vec<f64>> {
    (0..8)
        .map(|b| (0..3).map(|a| if b >> a & 1 == 1 { 1.0 } else { -1.0 }).collect())
        .collect()
}

fn cube(centered_faces: &[usize]) -> Result<Framework, FrameworkError> {
    let mut pts = cube_corners();
    let mut edges = Vec::new();
    for i in 0..8usize {
        for j in i + 1..8usize {
            if (i ^ j).count_ones() == 1 {
                edges.push((i, j));
            }
        }
    }
    for (f, face) in CUBE_FACES.iter().enumerate() {
        if centered_faces.contains(&f) {
            let c: Vec<f64> = (0..3).map(|a| face.iter().map(|&v| pts[v][a]).sum::<f64>() / 4.0).collect();
            let id = pts.len();
            pts.push(c);
            edges.extend(face.iter().map(|&v| (v, id)));
        } else {
            edges.push((face[0], face[2]));
        }
    }
    Framework::from_parts(3, &pts, &edges)
}

fn polar(r: f64, deg: f64) -> Vec<f64> {
    let t = deg.to_radians();
    vec![r * t.cos(), r * t.sin()]
}

fn y_frame(braced: bool, subdivided: bool) -> Result<Framework, FrameworkError> {
    let mut pts: Vec<Vec<f64>> = [90.0, 210.0, 330.0].iter().map(|&a| polar(1.0, a)).collect();
    pts.push(vec![0.0, 0.0]);
    let mut edges = vec![(0, 3), (1, 3), (2, 3)];
    let mut pins = vec![0, 1, 2];
    if braced {
        for (a, b) in [(0, 1), (1, 2), (0, 2)] {
            if subdivided {
                let m = pts.len();
                pts.push((0..2).map(|k| 0.5 * (pts[a][k] + pts[b][k])).collect());
                edges.push((a, m));
                edges.push((m, b));
                pins.push(m);
            } else {
                edges.push((a, b));
            }
        }
    }
    Framework::from_parts(2, &pts, &edges)?.with_pins(pins)
}

fn twisted(theta: f64, web: bool) -> Result<Framework, FrameworkError> {
    let mut pts: Vec<Vec<f64>> = (0..3).map(|k| polar(1.0, 90.0 + 120.0 * k as f64)).collect();
    for k in 0..3 {
        pts.push(polar(0.4, 90.0 + 120.0 * k as f64 + theta.to_degrees()));
    }
    let mut edges = vec![(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)];
    for k in 0..3 {
        let other = if web { (k + 1) % 3 } else { (k + 2) % 3 };
        edges.push((k, 3 + k));
        edges.push((other, 3 + k));
    }
    let f = Framework::from_parts(2, &pts, &edges)?;
    if web {
        let cables: Vec<(usize, usize)> = edges.iter().copied().filter(|&(_, b)| b >= 3).collect();
        f.with_members(&cables, &[])
    } else {
        f.with_pins([0, 1, 2])
    }
}

fn annulus_points() -> Vec<Vec<f64>> {
    let mut pts = unit_square();
    pts.extend([vec![0.3, 0.3], vec![0.7, 0.3], vec![0.7, 0.7], vec![0.3, 0.7]]);
    pts
}

fn holey_square() -> Result<Framework, FrameworkError> {
    let mut edges = Vec::new();
    for k in 0..4 {
        let n = (k + 1) % 4;
        edges.extend([(k, n), (4 + k, 4 + n), (k, 4 + k), (k, 4 + n)]);
    }
    Framework::from_parts(2, &annulus_points(), &edges)?.with_pins([0, 1, 2, 3])
}

fn frustum_spider(diagonal: bool) -> Result<Framework, FrameworkError> {
    let mut edges = Vec::new();
    for k in 0..4 {
        let n = (k + 1) % 4;
        edges.extend([(k, n), (4 + k, 4 + n), (k, 4 + k)]);
    }
    if diagonal {
        edges.push((0, 2));
    }
    Framework::from_parts(2, &annulus_points(), &edges)?.with_pins([0, 1, 2, 3])
}

/// Vertex order: A, B, C, D, M (midpoint of AB), X (hole vertex inside ABC).
pub(crate) fn tetra_slit_points() -> Vec<Vec<f64>> {
    vec![
        vec![0.0, 0.0, 0.0],
        vec![2.0, 0.0, 0.0],
        vec![1.0, 2.0, 0.0],
        vec![1.0, 0.7, 1.5],
        vec![1.0, 0.0, 0.0],
        vec![1.0, 0.6, 0.0],
    ]
}

fn tetra_slit() -> Result<Framework, FrameworkError> {
    let (a, b, c, d, m, x) = (0, 1, 2, 3, 4, 5);
    let edges = [
        (a, c),
        (a, d),
        (b, c),
        (b, d),
        (c, d),
        (a, m),
        (m, b),
        (m, d),
        (a, x),
        (x, b),
        (x, c),
    ];
    Framework::from_parts(3, &tetra_slit_points(), &edges)
}
