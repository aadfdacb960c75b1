//! Simplicial 2D meshes: topology, affine reference maps and point location.
//!
//! Triangles are stored with positive orientation and rotated so that the
//! first local vertex carries the smallest global index. Local edge `j` runs
//! from local vertex `j` to local vertex `(j + 1) % 3`, so it is the face
//! opposite local vertex `(j + 2) % 3`. Global edges are oriented from the
//! lower to the higher vertex index.

use std::collections::HashMap;

use nalgebra::{Matrix2, Point2, Vector2};

use crate::error::{Error, Result};

/// Barycentric tolerance used for closed-triangle membership.
pub const BARY_TOL: f64 = 1e-12;

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect { x0, y0, x1, y1 }
    }

    /// The square `[-half, half]²`.
    pub fn centered_square(half: f64) -> Self {
        Rect::new(-half, -half, half, half)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

/// Affine map from the reference triangle `{x, y >= 0, x + y <= 1}` onto an element.
#[derive(Clone, Copy, Debug)]
pub struct ReferenceMap {
    pub origin: Point2<f64>,
    pub jacobian: Matrix2<f64>,
    pub inverse: Matrix2<f64>,
    pub det: f64,
}

impl ReferenceMap {
    fn new(a: Point2<f64>, b: Point2<f64>, c: Point2<f64>) -> Self {
        let jacobian = Matrix2::from_columns(&[b - a, c - a]);
        let det = jacobian.determinant();
        let inverse = Matrix2::new(
            jacobian[(1, 1)],
            -jacobian[(0, 1)],
            -jacobian[(1, 0)],
            jacobian[(0, 0)],
        ) / det;
        ReferenceMap {
            origin: a,
            jacobian,
            inverse,
            det,
        }
    }

    pub fn to_physical(&self, r: &Point2<f64>) -> Point2<f64> {
        self.origin + self.jacobian * r.coords
    }

    pub fn to_reference(&self, x: &Point2<f64>) -> Point2<f64> {
        Point2::from(self.inverse * (x - self.origin))
    }

    pub fn barycentric(&self, x: &Point2<f64>) -> [f64; 3] {
        bary_from_reference(&self.to_reference(x))
    }

    /// Physical gradients of the three barycentric coordinates.
    pub fn bary_gradients(&self) -> [Vector2<f64>; 3] {
        let g1 = Vector2::new(self.inverse[(0, 0)], self.inverse[(0, 1)]);
        let g2 = Vector2::new(self.inverse[(1, 0)], self.inverse[(1, 1)]);
        [-g1 - g2, g1, g2]
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det
    }
}

pub fn bary_from_reference(r: &Point2<f64>) -> [f64; 3] {
    [1.0 - r.x - r.y, r.x, r.y]
}

/// Result of a point location query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    Inside(usize),
    Outside,
}

impl Location {
    pub fn element(self) -> Option<usize> {
        match self {
            Location::Inside(k) => Some(k),
            Location::Outside => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point2<f64>>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    tri_edges: Vec<[usize; 3]>,
    tri_edge_signs: Vec<[f64; 3]>,
    edge_tris: Vec<[Option<usize>; 2]>,
    vertex_tris: Vec<Vec<usize>>,
    maps: Vec<ReferenceMap>,
    boundary_edges: Vec<usize>,
    h: f64,
    h_min: f64,
}

impl Mesh {
    /// Builds topology from raw vertex and triangle lists. Clockwise triangles
    /// are flipped.
    pub fn from_raw(vertices: Vec<Point2<f64>>, triangles: Vec<[usize; 3]>) -> Result<Mesh> {
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::Topology(format!(
                    "triangle {t} references a vertex index out of range"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Topology(format!("triangle {t} repeats a vertex")));
            }
        }

        let signed_area = |t: &[usize; 3]| {
            let (a, b, c) = (vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            0.5 * ((b - a).perp(&(c - a)))
        };

        let mut tris = Vec::with_capacity(triangles.len());
        for mut t in triangles {
            if signed_area(&t) < 0.0 {
                t.swap(1, 2);
            }
            let m = (0..3).min_by_key(|&i| t[i]).unwrap();
            t.rotate_left(m);
            tris.push(t);
        }

        let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_tris: Vec<Vec<usize>> = Vec::new();
        let mut tri_edges = Vec::with_capacity(tris.len());
        let mut tri_edge_signs = Vec::with_capacity(tris.len());
        for (t, tri) in tris.iter().enumerate() {
            let mut te = [0usize; 3];
            let mut ts = [0.0f64; 3];
            for j in 0..3 {
                let (a, b) = (tri[j], tri[(j + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let id = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_tris.push(Vec::new());
                    edges.len() - 1
                });
                edge_tris[id].push(t);
                te[j] = id;
                ts[j] = if a < b { 1.0 } else { -1.0 };
            }
            tri_edges.push(te);
            tri_edge_signs.push(ts);
        }

        let mut adjacency = Vec::with_capacity(edges.len());
        for (e, owners) in edge_tris.iter().enumerate() {
            match owners.as_slice() {
                [a] => adjacency.push([Some(*a), None]),
                [a, b] => adjacency.push([Some(*a), Some(*b)]),
                _ => {
                    return Err(Error::Topology(format!(
                        "edge {e} ({}, {}) is shared by {} triangles",
                        edges[e][0],
                        edges[e][1],
                        owners.len()
                    )))
                }
            }
        }

        let lengths: Vec<f64> = edges
            .iter()
            .map(|e| (vertices[e[1]] - vertices[e[0]]).norm())
            .collect();
        let h = lengths.iter().cloned().fold(0.0, f64::max);
        let h_min = lengths.iter().cloned().fold(f64::INFINITY, f64::min);

        let mut maps = Vec::with_capacity(tris.len());
        for (t, tri) in tris.iter().enumerate() {
            let area = signed_area(tri);
            if area <= 1e-14 * h * h {
                return Err(Error::DegenerateTriangle { tri: t, area });
            }
            maps.push(ReferenceMap::new(
                vertices[tri[0]],
                vertices[tri[1]],
                vertices[tri[2]],
            ));
        }

        let mut vertex_tris = vec![Vec::new(); nv];
        for (t, tri) in tris.iter().enumerate() {
            for &v in tri {
                vertex_tris[v].push(t);
            }
        }

        let boundary_edges = adjacency
            .iter()
            .enumerate()
            .filter(|(_, a)| a[1].is_none())
            .map(|(e, _)| e)
            .collect();

        Ok(Mesh {
            vertices,
            triangles: tris,
            edges,
            tri_edges,
            tri_edge_signs,
            edge_tris: adjacency,
            vertex_tris,
            maps,
            boundary_edges,
            h,
            h_min,
        })
    }

    /// Criss-cross triangulation of `rect` with `nx × ny` cells, each split
    /// along its lower-left to upper-right diagonal.
    pub fn structured(nx: usize, ny: usize, rect: Rect) -> Mesh {
        assert!(nx >= 1 && ny >= 1, "structured mesh needs at least one cell");
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            let y = rect.y0 + (rect.y1 - rect.y0) * j as f64 / ny as f64;
            for i in 0..=nx {
                let x = rect.x0 + (rect.x1 - rect.x0) * i as f64 / nx as f64;
                vertices.push(Point2::new(x, y));
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        Mesh::from_raw(vertices, triangles).expect("structured mesh is valid")
    }

    /// Disk of the given radius: a hexagon split into `6 rings²` triangles with
    /// ring `i` pushed onto the circle of radius `radius * i / rings`.
    pub fn disk(rings: usize, radius: f64) -> Mesh {
        assert!(rings >= 1);
        let base = |i: usize| if i == 0 { 0 } else { 1 + 3 * i * (i - 1) };
        let index = |i: usize, s: usize, j: usize| {
            if i == 0 {
                0
            } else {
                base(i) + (s * i + j) % (6 * i)
            }
        };
        let mut vertices = vec![Point2::origin()];
        for i in 1..=rings {
            let r = radius * i as f64 / rings as f64;
            for k in 0..6 * i {
                let theta = std::f64::consts::PI / 3.0 * k as f64 / i as f64;
                vertices.push(Point2::new(r * theta.cos(), r * theta.sin()));
            }
        }
        let mut triangles = Vec::with_capacity(6 * rings * rings);
        for s in 0..6 {
            for i in 0..rings {
                for j in 0..=i {
                    triangles.push([index(i, s, j), index(i + 1, s, j), index(i + 1, s, j + 1)]);
                    if j < i {
                        triangles.push([index(i, s, j), index(i + 1, s, j + 1), index(i, s, j + 1)]);
                    }
                }
            }
        }
        Mesh::from_raw(vertices, triangles).expect("disk mesh is valid")
    }

    /// Parses the ASCII mesh format: `nv nt`, then `nv` lines `x y`, then `nt`
    /// lines `i j k` (0-based). `#` starts a comment.
    pub fn parse(text: &str) -> Result<Mesh> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(n, l)| (n + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let parse_err = |line: usize, msg: &str| Error::Parse {
            line,
            msg: msg.to_string(),
        };

        let (ln, header) = lines.next().ok_or_else(|| parse_err(0, "empty mesh file"))?;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(ln, "expected `nv nt`"))?;
        let [nv, nt] = counts[..] else {
            return Err(parse_err(ln, "expected `nv nt`"));
        };

        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| parse_err(0, "unexpected end of file in vertex block"))?;
            let xy: Vec<f64> = l
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(ln, "expected `x y`"))?;
            let [x, y] = xy[..] else {
                return Err(parse_err(ln, "expected `x y`"));
            };
            if !x.is_finite() || !y.is_finite() {
                return Err(parse_err(ln, "non-finite coordinate"));
            }
            vertices.push(Point2::new(x, y));
        }

        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| parse_err(0, "unexpected end of file in triangle block"))?;
            let ijk: Vec<usize> = l
                .split_whitespace()
                .map(|s| s.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| parse_err(ln, "expected `i j k`"))?;
            let [i, j, k] = ijk[..] else {
                return Err(parse_err(ln, "expected `i j k`"));
            };
            if i >= nv || j >= nv || k >= nv {
                return Err(parse_err(ln, "vertex index out of range"));
            }
            triangles.push([i, j, k]);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(parse_err(ln, "trailing content after triangle block"));
        }
        Mesh::from_raw(vertices, triangles)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Mesh> {
        let text = std::fs::read_to_string(path)?;
        Mesh::parse(&text)
    }

    /// Serializes in the format accepted by [`Mesh::parse`].
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.vertices.len(), self.triangles.len());
        for v in &self.vertices {
            s.push_str(&format!("{:.17e} {:.17e}\n", v.x, v.y));
        }
        for t in &self.triangles {
            s.push_str(&format!("{} {} {}\n", t[0], t[1], t[2]));
        }
        s
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[Point2<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point2<f64> {
        self.vertices[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    /// Global edge ids of the local edges of triangle `t`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    /// `+1` where local edge direction agrees with the global orientation.
    pub fn triangle_edge_signs(&self, t: usize) -> [f64; 3] {
        self.tri_edge_signs[t]
    }

    pub fn edge_triangles(&self, e: usize) -> [Option<usize>; 2] {
        self.edge_tris[e]
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_tris[v]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_tris[e][1].is_none()
    }

    pub fn boundary_edges(&self) -> &[usize] {
        &self.boundary_edges
    }

    pub fn map(&self, t: usize) -> &ReferenceMap {
        &self.maps[t]
    }

    pub fn area(&self, t: usize) -> f64 {
        self.maps[t].area()
    }

    pub fn total_area(&self) -> f64 {
        self.maps.iter().map(|m| m.area()).sum()
    }

    /// Longest edge length.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Shortest edge length.
    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn edge_midpoint(&self, e: usize) -> Point2<f64> {
        let [a, b] = self.edges[e];
        nalgebra::center(&self.vertices[a], &self.vertices[b])
    }

    pub fn centroid(&self, t: usize) -> Point2<f64> {
        let [a, b, c] = self.triangles[t];
        Point2::from((self.vertices[a].coords + self.vertices[b].coords + self.vertices[c].coords) / 3.0)
    }

    /// Neighbor across local edge `j` of triangle `t`.
    pub fn neighbor(&self, t: usize, j: usize) -> Option<usize> {
        let [a, b] = self.edge_tris[self.tri_edges[t][j]];
        if a == Some(t) {
            b
        } else {
            a
        }
    }

    pub fn contains(&self, t: usize, x: &Point2<f64>) -> bool {
        self.maps[t].barycentric(x).iter().all(|&l| l >= -BARY_TOL)
    }

    /// Finds an element whose closed triangle contains `x` by an orientation
    /// walk from `hint`, falling back to a linear scan. Points on shared
    /// edges or vertices resolve to the lowest incident element id.
    pub fn locate(&self, x: &Point2<f64>, hint: usize) -> Location {
        let found = self.walk(x, hint).or_else(|| {
            (0..self.triangles.len()).find(|&t| self.contains(t, x))
        });
        match found {
            Some(t) => Location::Inside(self.lowest_containing(t, x)),
            None => Location::Outside,
        }
    }

    fn walk(&self, x: &Point2<f64>, start: usize) -> Option<usize> {
        let mut t = start;
        let cap = 4 * self.triangles.len() + 8;
        for _ in 0..cap {
            let lam = self.maps[t].barycentric(x);
            let (imin, lmin) = lam
                .iter()
                .cloned()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, l)| if l < acc.1 { (i, l) } else { acc });
            if lmin >= -BARY_TOL {
                return Some(t);
            }
            // face opposite local vertex i is local edge (i + 1) % 3
            t = self.neighbor(t, (imin + 1) % 3)?;
        }
        None
    }

    fn lowest_containing(&self, t: usize, x: &Point2<f64>) -> usize {
        let lam = self.maps[t].barycentric(x);
        if lam.iter().all(|&l| l > BARY_TOL) {
            return t;
        }
        let mut best = t;
        for &v in &self.triangles[t] {
            for &k in &self.vertex_tris[v] {
                if k < best && self.contains(k, x) {
                    best = k;
                }
            }
        }
        best
    }

    /// Closest point of the polygonal boundary to `x`.
    pub fn nearest_boundary_point(&self, x: &Point2<f64>) -> Point2<f64> {
        let mut best = *x;
        let mut best_d = f64::INFINITY;
        for &e in &self.boundary_edges {
            let [a, b] = self.edges[e];
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            let d = pb - pa;
            let s = ((x - pa).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            let q = pa + d * s;
            let dist = (q - x).norm();
            if dist < best_d {
                best_d = dist;
                best = q;
            }
        }
        best
    }
}
