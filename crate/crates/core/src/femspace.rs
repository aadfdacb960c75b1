//! Discrete 0- and 1-form spaces on a triangle mesh.
//!
//! First order: one Whitney function per edge and P1 nodal 0-forms.
//! Second order: the two small-edge functions `λ_v w^e` attached to each
//! mesh edge, two interior small-edge functions per triangle, and P2 nodal
//! 0-forms with edge-midpoint nodes.
//!
//! The three interior functions of a triangle sum to zero, so only two are
//! kept: those anchored at local vertices 1 and 2 (local vertex 0 always has
//! the smallest global index). A coefficient `c` on the dropped function is
//! equivalent to `-c` on each of the two kept ones.

use std::sync::Arc;

use nalgebra::{Point2, Vector2};

use crate::mesh::{bary_from_reference, Mesh, ReferenceMap};
use crate::quadrature::{LineRule, TriangleRule};
use crate::sparse::{SparseMatrix, Triplets};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Order {
    First,
    Second,
}

impl Order {
    pub fn degree(self) -> usize {
        match self {
            Order::First => 1,
            Order::Second => 2,
        }
    }

    pub fn from_degree(p: usize) -> Option<Order> {
        match p {
            1 => Some(Order::First),
            2 => Some(Order::Second),
            _ => None,
        }
    }
}

pub fn cross(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

/// `λ_anchor (λ_from ∇λ_to − λ_to ∇λ_from)` in local vertex numbering; without
/// an anchor this is the Whitney function of the edge `from → to`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LocalFn {
    pub anchor: Option<usize>,
    pub from: usize,
    pub to: usize,
}

impl LocalFn {
    pub const fn whitney(from: usize, to: usize) -> Self {
        LocalFn {
            anchor: None,
            from,
            to,
        }
    }

    pub const fn small(anchor: usize, from: usize, to: usize) -> Self {
        LocalFn {
            anchor: Some(anchor),
            from,
            to,
        }
    }

    pub fn value(&self, lam: &[f64; 3], grad: &[Vector2<f64>; 3]) -> Vector2<f64> {
        let w = grad[self.to] * lam[self.from] - grad[self.from] * lam[self.to];
        match self.anchor {
            Some(a) => w * lam[a],
            None => w,
        }
    }

    pub fn curl(&self, lam: &[f64; 3], grad: &[Vector2<f64>; 3]) -> f64 {
        let cw = 2.0 * cross(&grad[self.from], &grad[self.to]);
        match self.anchor {
            Some(a) => {
                let w = grad[self.to] * lam[self.from] - grad[self.from] * lam[self.to];
                lam[a] * cw + cross(&grad[a], &w)
            }
            None => cw,
        }
    }
}

/// Local basis of one element together with its global DOF indices.
#[derive(Clone, Copy, Debug)]
pub struct ElementDofs {
    pub len: usize,
    pub funcs: [LocalFn; 8],
    pub dofs: [usize; 8],
}

impl ElementDofs {
    pub fn iter(&self) -> impl Iterator<Item = (&LocalFn, usize)> {
        self.funcs[..self.len].iter().zip(self.dofs[..self.len].iter().cloned())
    }
}

/// Coefficients of a discrete 1-form.
#[derive(Clone, Debug, PartialEq)]
pub struct OneForm {
    pub order: Order,
    pub coeffs: Vec<f64>,
}

impl OneForm {
    pub fn zeros(space: &FeSpace) -> Self {
        OneForm {
            order: space.order(),
            coeffs: vec![0.0; space.n_dof()],
        }
    }

    pub fn from_coeffs(space: &FeSpace, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), space.n_dof());
        OneForm {
            order: space.order(),
            coeffs,
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &OneForm, b: f64) -> OneForm {
        assert_eq!(self.order, other.order);
        OneForm {
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// Nodal coefficients of a continuous P1/P2 0-form.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroForm {
    pub order: Order,
    pub coeffs: Vec<f64>,
}

pub type VectorField<'a> = dyn Fn(&Point2<f64>) -> Vector2<f64> + Sync + 'a;
pub type ScalarField<'a> = dyn Fn(&Point2<f64>) -> f64 + Sync + 'a;

/// Finite element spaces of a given order on a shared mesh.
#[derive(Clone, Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    order: Order,
    n_dof: usize,
    n_p: usize,
    elements: Vec<ElementDofs>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, order: Order) -> Self {
        let ne = mesh.n_edges();
        let mut elements = Vec::with_capacity(mesh.n_triangles());
        for t in 0..mesh.n_triangles() {
            let edges = mesh.triangle_edges(t);
            let signs = mesh.triangle_edge_signs(t);
            let mut funcs = [LocalFn::whitney(0, 1); 8];
            let mut dofs = [0usize; 8];
            let len = match order {
                Order::First => {
                    for j in 0..3 {
                        let (a, b) = oriented(j, signs[j]);
                        funcs[j] = LocalFn::whitney(a, b);
                        dofs[j] = edges[j];
                    }
                    3
                }
                Order::Second => {
                    for j in 0..3 {
                        let (a, b) = oriented(j, signs[j]);
                        funcs[2 * j] = LocalFn::small(a, a, b);
                        funcs[2 * j + 1] = LocalFn::small(b, a, b);
                        dofs[2 * j] = 2 * edges[j];
                        dofs[2 * j + 1] = 2 * edges[j] + 1;
                    }
                    funcs[6] = LocalFn::small(1, 2, 0);
                    funcs[7] = LocalFn::small(2, 0, 1);
                    dofs[6] = 2 * ne + 2 * t;
                    dofs[7] = 2 * ne + 2 * t + 1;
                    8
                }
            };
            elements.push(ElementDofs { len, funcs, dofs });
        }
        let (n_dof, n_p) = match order {
            Order::First => (ne, mesh.n_vertices()),
            Order::Second => (2 * ne + 2 * mesh.n_triangles(), mesh.n_vertices() + ne),
        };
        FeSpace {
            mesh,
            order,
            n_dof,
            n_p,
            elements,
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn order(&self) -> Order {
        self.order
    }

    /// Number of 1-form degrees of freedom.
    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    /// Number of 0-form (nodal) degrees of freedom.
    pub fn n_p(&self) -> usize {
        self.n_p
    }

    pub fn element(&self, t: usize) -> &ElementDofs {
        &self.elements[t]
    }

    fn frame(&self, t: usize, r: &Point2<f64>) -> ([f64; 3], [Vector2<f64>; 3]) {
        (bary_from_reference(r), self.mesh.map(t).bary_gradients())
    }

    /// Whitney function of local edge `j` of element `t` at reference point
    /// `r`, signed by the global edge orientation.
    pub fn whitney_eval(&self, t: usize, j: usize, r: &Point2<f64>) -> Vector2<f64> {
        let (lam, grad) = self.frame(t, r);
        let (a, b) = oriented(j, self.mesh.triangle_edge_signs(t)[j]);
        LocalFn::whitney(a, b).value(&lam, &grad)
    }

    /// `λ_{v_i} w^{e_j}` for local vertex `i` and local edge `j`.
    pub fn small_edge_eval(&self, t: usize, i: usize, j: usize, r: &Point2<f64>) -> Vector2<f64> {
        bary_from_reference(r)[i] * self.whitney_eval(t, j, r)
    }

    pub fn eval(&self, form: &OneForm, t: usize, r: &Point2<f64>) -> Vector2<f64> {
        let (lam, grad) = self.frame(t, r);
        self.elements[t]
            .iter()
            .map(|(f, d)| f.value(&lam, &grad) * form.coeffs[d])
            .sum()
    }

    /// Scalar curl `∂₁u₂ − ∂₂u₁` of the vector proxy.
    pub fn curl(&self, form: &OneForm, t: usize, r: &Point2<f64>) -> f64 {
        let (lam, grad) = self.frame(t, r);
        self.elements[t]
            .iter()
            .map(|(f, d)| f.curl(&lam, &grad) * form.coeffs[d])
            .sum()
    }

    /// Evaluates at a physical point by locating its element.
    pub fn eval_at(&self, form: &OneForm, x: &Point2<f64>, hint: usize) -> Option<Vector2<f64>> {
        let t = self.mesh.locate(x, hint).element()?;
        let r = self.mesh.map(t).to_reference(x);
        Some(self.eval(form, t, &r))
    }

    /// Global node indices of the 0-form basis on element `t`:
    /// vertices, then (second order) midpoints of local edges 0, 1, 2.
    pub fn zero_form_nodes(&self, t: usize) -> ([usize; 6], usize) {
        let tri = self.mesh.triangle(t);
        let mut nodes = [tri[0], tri[1], tri[2], 0, 0, 0];
        match self.order {
            Order::First => (nodes, 3),
            Order::Second => {
                let nv = self.mesh.n_vertices();
                let e = self.mesh.triangle_edges(t);
                for j in 0..3 {
                    nodes[3 + j] = nv + e[j];
                }
                (nodes, 6)
            }
        }
    }

    /// Values and physical gradients of the local 0-form basis.
    pub fn zero_form_basis(&self, t: usize, r: &Point2<f64>) -> ([f64; 6], [Vector2<f64>; 6]) {
        zero_basis(self.order, &bary_from_reference(r), &self.mesh.map(t).bary_gradients())
    }

    pub fn eval_zero_form(&self, form: &ZeroForm, t: usize, r: &Point2<f64>) -> f64 {
        let (nodes, n) = self.zero_form_nodes(t);
        let (vals, _) = self.zero_form_basis(t, r);
        (0..n).map(|i| vals[i] * form.coeffs[nodes[i]]).sum()
    }

    /// Physical location of every 0-form node.
    pub fn zero_form_node_points(&self) -> Vec<Point2<f64>> {
        let m = &self.mesh;
        let mut pts: Vec<Point2<f64>> = m.vertices().to_vec();
        if self.order == Order::Second {
            pts.extend((0..m.n_edges()).map(|e| m.edge_midpoint(e)));
        }
        pts
    }

    /// Nodal interpolant of a scalar function.
    pub fn interpolate_zero_form(&self, f: &ScalarField) -> ZeroForm {
        ZeroForm {
            order: self.order,
            coeffs: self.zero_form_node_points().iter().map(f).collect(),
        }
    }

    fn assemble_one_form_pair<F>(&self, kernel: F) -> SparseMatrix
    where
        F: Fn(&LocalFn, &LocalFn, &[f64; 3], &[Vector2<f64>; 3]) -> f64,
    {
        let rule = TriangleRule::degree4();
        let mut trip = Triplets::new(self.n_dof, self.n_dof);
        for t in 0..self.mesh.n_triangles() {
            let map = self.mesh.map(t);
            let grad = map.bary_gradients();
            let el = &self.elements[t];
            let mut local = [[0.0f64; 8]; 8];
            for (r, w) in rule.iter() {
                let lam = bary_from_reference(r);
                for a in 0..el.len {
                    for b in 0..el.len {
                        local[a][b] += w * map.det * kernel(&el.funcs[a], &el.funcs[b], &lam, &grad);
                    }
                }
            }
            for a in 0..el.len {
                for b in 0..el.len {
                    trip.push(el.dofs[a], el.dofs[b], local[a][b]);
                }
            }
        }
        trip.to_csr()
    }

    /// `M[a, b] = ∫ φ_a · φ_b`.
    pub fn assemble_mass(&self) -> SparseMatrix {
        self.assemble_one_form_pair(|fa, fb, lam, grad| fa.value(lam, grad).dot(&fb.value(lam, grad)))
    }

    /// `K[a, b] = ∫ curl φ_a curl φ_b`.
    pub fn assemble_curl_stiffness(&self) -> SparseMatrix {
        self.assemble_one_form_pair(|fa, fb, lam, grad| fa.curl(lam, grad) * fb.curl(lam, grad))
    }

    /// `B[a, c] = ∫ φ_a · ∇ψ_c` (1-form rows, 0-form columns).
    pub fn assemble_grad_coupling(&self) -> SparseMatrix {
        let rule = TriangleRule::degree4();
        let mut trip = Triplets::new(self.n_dof, self.n_p);
        for t in 0..self.mesh.n_triangles() {
            let map = self.mesh.map(t);
            let grad = map.bary_gradients();
            let el = &self.elements[t];
            let (nodes, nn) = self.zero_form_nodes(t);
            let mut local = [[0.0f64; 6]; 8];
            for (r, w) in rule.iter() {
                let lam = bary_from_reference(r);
                let (_, zg) = zero_basis(self.order, &lam, &grad);
                for a in 0..el.len {
                    let v = el.funcs[a].value(&lam, &grad);
                    for c in 0..nn {
                        local[a][c] += w * map.det * v.dot(&zg[c]);
                    }
                }
            }
            for a in 0..el.len {
                for c in 0..nn {
                    trip.push(el.dofs[a], nodes[c], local[a][c]);
                }
            }
        }
        trip.to_csr()
    }

    /// `L[c, d] = ∫ ∇ψ_c · ∇ψ_d` on the 0-form space.
    pub fn assemble_zero_form_stiffness(&self) -> SparseMatrix {
        let rule = TriangleRule::degree4();
        let mut trip = Triplets::new(self.n_p, self.n_p);
        for t in 0..self.mesh.n_triangles() {
            let map = self.mesh.map(t);
            let (nodes, nn) = self.zero_form_nodes(t);
            let mut local = [[0.0f64; 6]; 6];
            for (r, w) in rule.iter() {
                let (_, g) = self.zero_form_basis(t, r);
                for a in 0..nn {
                    for b in 0..nn {
                        local[a][b] += w * map.det * g[a].dot(&g[b]);
                    }
                }
            }
            for a in 0..nn {
                for b in 0..nn {
                    trip.push(nodes[a], nodes[b], local[a][b]);
                }
            }
        }
        trip.to_csr()
    }

    /// `F[a] = ∫ f · φ_a` with the degree-4 assembly rule.
    pub fn assemble_load(&self, f: &VectorField) -> Vec<f64> {
        let rule = TriangleRule::degree4();
        let mut out = vec![0.0; self.n_dof];
        for t in 0..self.mesh.n_triangles() {
            let map = self.mesh.map(t);
            let grad = map.bary_gradients();
            let el = &self.elements[t];
            for (r, w) in rule.iter() {
                let lam = bary_from_reference(r);
                let fx = f(&map.to_physical(r));
                for (func, d) in el.iter() {
                    out[d] += w * map.det * fx.dot(&func.value(&lam, &grad));
                }
            }
        }
        out
    }

    /// `∫ ψ_c` for every 0-form basis function.
    pub fn zero_form_integrals(&self) -> Vec<f64> {
        let rule = TriangleRule::degree4();
        let mut out = vec![0.0; self.n_p];
        for t in 0..self.mesh.n_triangles() {
            let map = self.mesh.map(t);
            let (nodes, nn) = self.zero_form_nodes(t);
            for (r, w) in rule.iter() {
                let (vals, _) = self.zero_form_basis(t, r);
                for c in 0..nn {
                    out[nodes[c]] += w * map.det * vals[c];
                }
            }
        }
        out
    }

    /// Boundary edges with their owning element, local edge index and the
    /// counter-clockwise unit tangent (domain on the left).
    fn boundary_faces(&self) -> impl Iterator<Item = (usize, usize, Vector2<f64>, f64)> + '_ {
        let m = &self.mesh;
        m.boundary_edges().iter().map(move |&e| {
            let t = m.edge_triangles(e)[0].unwrap();
            let j = m.triangle_edges(t).iter().position(|&x| x == e).unwrap();
            let tri = m.triangle(t);
            let d = m.vertex(tri[(j + 1) % 3]) - m.vertex(tri[j]);
            let len = d.norm();
            (t, j, d / len, len)
        })
    }

    /// `∫_∂Ω g ψ_c ds` for every 0-form basis function.
    pub fn assemble_boundary_flux(&self, g: &ScalarField) -> Vec<f64> {
        let line = LineRule::gauss(4);
        let mut out = vec![0.0; self.n_p];
        for (t, j, _, len) in self.boundary_faces() {
            let map = self.mesh.map(t);
            let (nodes, nn) = self.zero_form_nodes(t);
            for (s, w) in line.iter() {
                let r = local_edge_point(j, s);
                let x = map.to_physical(&r);
                let gx = g(&x);
                let (vals, _) = self.zero_form_basis(t, &r);
                for c in 0..nn {
                    out[nodes[c]] += w * len * gx * vals[c];
                }
            }
        }
        out
    }

    /// `∫_∂Ω c (φ_a · t) ds` for every 1-form basis function.
    pub fn assemble_boundary_tangential(&self, c: &ScalarField) -> Vec<f64> {
        let line = LineRule::gauss(4);
        let mut out = vec![0.0; self.n_dof];
        for (t, j, tangent, len) in self.boundary_faces() {
            let map = self.mesh.map(t);
            let grad = map.bary_gradients();
            for (s, w) in line.iter() {
                let r = local_edge_point(j, s);
                let cx = c(&map.to_physical(&r));
                let lam = bary_from_reference(&r);
                for (f, d) in self.elements[t].iter() {
                    out[d] += w * len * cx * f.value(&lam, &grad).dot(&tangent);
                }
            }
        }
        out
    }

    /// `√(Σ_K ∫_K |u_h − u|²)` with a rule exact for `quad_degree`.
    pub fn l2_error(&self, form: &OneForm, exact: &VectorField, quad_degree: usize) -> f64 {
        let rule = TriangleRule::with_degree(quad_degree.max(6));
        let mut sum = 0.0;
        for t in 0..self.mesh.n_triangles() {
            let map = self.mesh.map(t);
            for (r, w) in rule.iter() {
                let d = self.eval(form, t, r) - exact(&map.to_physical(r));
                sum += w * map.det * d.norm_squared();
            }
        }
        sum.sqrt()
    }

    pub fn l2_norm(&self, form: &OneForm) -> f64 {
        self.l2_error(form, &|_| Vector2::zeros(), 6)
    }
}

/// Local vertex pair of local edge `j` in global orientation.
pub fn oriented(j: usize, sign: f64) -> (usize, usize) {
    let (a, b) = (j, (j + 1) % 3);
    if sign > 0.0 {
        (a, b)
    } else {
        (b, a)
    }
}

/// Reference coordinates of the point at parameter `s` along local edge `j`.
pub fn local_edge_point(j: usize, s: f64) -> Point2<f64> {
    const CORNERS: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    let a = CORNERS[j];
    let b = CORNERS[(j + 1) % 3];
    Point2::new(a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]))
}

fn zero_basis(order: Order, lam: &[f64; 3], grad: &[Vector2<f64>; 3]) -> ([f64; 6], [Vector2<f64>; 6]) {
    let mut v = [0.0; 6];
    let mut g = [Vector2::zeros(); 6];
    match order {
        Order::First => {
            v[..3].copy_from_slice(lam);
            g[..3].copy_from_slice(grad);
        }
        Order::Second => {
            for i in 0..3 {
                v[i] = lam[i] * (2.0 * lam[i] - 1.0);
                g[i] = grad[i] * (4.0 * lam[i] - 1.0);
                let k = (i + 1) % 3;
                v[3 + i] = 4.0 * lam[i] * lam[k];
                g[3 + i] = (grad[k] * lam[i] + grad[i] * lam[k]) * 4.0;
            }
        }
    }
    (v, g)
}

/// The reference map of the reference triangle itself.
pub fn reference_triangle_mesh() -> Mesh {
    Mesh::from_raw(
        vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)],
        vec![[0, 1, 2]],
    )
    .expect("reference triangle")
}

/// The nine second-order shape functions of the reference triangle, in the
/// classical small-edge numbering 1..=9 and with its local orientations:
/// edges run `(0,0)→(1,0)→(0,1)→(0,0)` counter-clockwise.
pub const REFERENCE_SMALL_EDGE_FUNCTIONS: [LocalFn; 9] = [
    LocalFn::small(0, 2, 0),
    LocalFn::small(2, 2, 0),
    LocalFn::small(2, 1, 2),
    LocalFn::small(1, 1, 2),
    LocalFn::small(1, 0, 1),
    LocalFn::small(0, 0, 1),
    LocalFn::small(1, 2, 0),
    LocalFn::small(2, 0, 1),
    LocalFn::small(0, 1, 2),
];

/// Shape function `number` (1..=9) of the reference table at `r`.
pub fn reference_shape_function(number: usize, r: &Point2<f64>) -> Vector2<f64> {
    let map = ReferenceMap::reference();
    REFERENCE_SMALL_EDGE_FUNCTIONS[number - 1].value(&bary_from_reference(r), &map.bary_gradients())
}

impl ReferenceMap {
    pub fn reference() -> ReferenceMap {
        *reference_triangle_mesh().map(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;
    use rand::{Rng, SeedableRng};

    fn unit_square(n: usize, order: Order) -> FeSpace {
        FeSpace::new(Arc::new(Mesh::structured(n, n, Rect::new(0.0, 0.0, 1.0, 1.0))), order)
    }

    fn random_ref(rng: &mut impl Rng) -> Point2<f64> {
        let (x, y) = (rng.random::<f64>(), rng.random::<f64>());
        if x + y > 1.0 {
            Point2::new(1.0 - x, 1.0 - y)
        } else {
            Point2::new(x, y)
        }
    }

    #[test]
    fn dof_counts() {
        let m = Arc::new(Mesh::structured(3, 2, Rect::new(0.0, 0.0, 1.0, 1.0)));
        let s1 = FeSpace::new(m.clone(), Order::First);
        assert_eq!(s1.n_dof(), m.n_edges());
        assert_eq!(s1.n_p(), m.n_vertices());
        let s2 = FeSpace::new(m.clone(), Order::Second);
        assert_eq!(s2.n_dof(), 2 * m.n_edges() + 2 * m.n_triangles());
        assert_eq!(s2.n_p(), m.n_vertices() + m.n_edges());
    }

    #[test]
    fn whitney_on_reference_triangle() {
        let s = FeSpace::new(Arc::new(reference_triangle_mesh()), Order::First);
        // local edge 0 is (0,0)→(1,0): w = (1 − y, x)
        let w = s.whitney_eval(0, 0, &Point2::new(0.0, 0.0));
        assert!((w - Vector2::new(1.0, 0.0)).norm() < 1e-15);
        let w = s.whitney_eval(0, 0, &Point2::new(0.0, 1.0));
        assert!(w.norm() < 1e-15);
    }

    #[test]
    fn whitney_circulation_is_one_on_own_edge() {
        let m = Arc::new(Mesh::disk(2, 1.0));
        let s = FeSpace::new(m.clone(), Order::First);
        let g = LineRule::gauss(2);
        for t in 0..m.n_triangles() {
            let tri = m.triangle(t);
            for j in 0..3 {
                let (a, b) = oriented(j, m.triangle_edge_signs(t)[j]);
                let d = m.vertex(tri[b]) - m.vertex(tri[a]);
                let ra = local_edge_point(a, 0.0);
                let rb = local_edge_point(b, 0.0);
                let total: f64 = g
                    .iter()
                    .map(|(u, w)| {
                        let r = Point2::from(ra.coords * (1.0 - u) + rb.coords * u);
                        w * s.whitney_eval(t, j, &r).dot(&d)
                    })
                    .sum();
                assert!((total - 1.0).abs() < 1e-13);
                for k in 0..3 {
                    if k != j {
                        let (c, e) = oriented(k, m.triangle_edge_signs(t)[k]);
                        let dk = m.vertex(tri[e]) - m.vertex(tri[c]);
                        let rc = local_edge_point(c, 0.0);
                        let re = local_edge_point(e, 0.0);
                        let other: f64 = g
                            .iter()
                            .map(|(u, w)| {
                                let r = Point2::from(rc.coords * (1.0 - u) + re.coords * u);
                                w * s.whitney_eval(t, j, &r).dot(&dk)
                            })
                            .sum();
                        assert!(other.abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn small_edge_table_examples() {
        let v = reference_shape_function(2, &Point2::new(0.0, 1.0));
        assert!((v - Vector2::new(-1.0, -1.0)).norm() < 1e-15);
        let v = reference_shape_function(5, &Point2::new(1.0, 0.0));
        assert!((v - Vector2::new(1.0, 1.0)).norm() < 1e-15);
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let r = random_ref(&mut rng);
            let sum = reference_shape_function(7, &r) + reference_shape_function(8, &r) + reference_shape_function(9, &r);
            assert!(sum.norm() < 1e-15);
        }
    }

    #[test]
    fn small_edge_eval_is_anchor_times_whitney() {
        let s = FeSpace::new(Arc::new(reference_triangle_mesh()), Order::Second);
        let r = Point2::new(0.2, 0.3);
        // λ_1 w^{e_0} on the reference triangle: x (1 − y, x), table entry 5
        let v = s.small_edge_eval(0, 1, 0, &r);
        assert!((v - reference_shape_function(5, &r)).norm() < 1e-15);
    }

    #[test]
    fn curl_of_whitney_is_two_on_reference() {
        let s = FeSpace::new(Arc::new(reference_triangle_mesh()), Order::First);
        let mut form = OneForm::zeros(&s);
        let e = s.mesh().triangle_edges(0)[0];
        form.coeffs[e] = 1.0;
        for r in [Point2::new(0.1, 0.1), Point2::new(0.5, 0.2)] {
            assert!((s.curl(&form, 0, &r) - 2.0).abs() < 1e-14);
        }
        assert_eq!(s.curl(&OneForm::zeros(&s), 0, &Point2::new(0.3, 0.3)), 0.0);
    }

    #[test]
    fn curl_matches_finite_differences() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        for order in [Order::First, Order::Second] {
            let s = FeSpace::new(Arc::new(Mesh::disk(2, 1.0)), order);
            let form = OneForm::from_coeffs(&s, (0..s.n_dof()).map(|_| rng.random::<f64>() - 0.5).collect());
            for t in 0..s.mesh().n_triangles() {
                let map = s.mesh().map(t);
                let r = Point2::new(0.3, 0.3);
                let x = map.to_physical(&r);
                let h = 1e-6;
                let at = |dx: f64, dy: f64| {
                    let rr = map.to_reference(&Point2::new(x.x + dx, x.y + dy));
                    s.eval(&form, t, &rr)
                };
                let fd = (at(h, 0.0).y - at(-h, 0.0).y) / (2.0 * h) - (at(0.0, h).x - at(0.0, -h).x) / (2.0 * h);
                assert!((fd - s.curl(&form, t, &r)).abs() < 1e-6);
            }
        }
    }

    /// Element-wise mass entries against a high-order collapsed Gauss rule.
    #[test]
    fn mass_matches_quadrature_oracle() {
        for order in [Order::First, Order::Second] {
            let s = unit_square(1, order);
            let mass = s.assemble_mass();
            let oracle = TriangleRule::collapsed(5);
            let mut dense = vec![vec![0.0; s.n_dof()]; s.n_dof()];
            for t in 0..2 {
                let map = s.mesh().map(t);
                let grad = map.bary_gradients();
                for (r, w) in oracle.iter() {
                    let lam = bary_from_reference(r);
                    for (fa, a) in s.element(t).iter() {
                        for (fb, b) in s.element(t).iter() {
                            dense[a][b] += w * map.det * fa.value(&lam, &grad).dot(&fb.value(&lam, &grad));
                        }
                    }
                }
            }
            for a in 0..s.n_dof() {
                for b in 0..s.n_dof() {
                    assert!((mass.get(a, b) - dense[a][b]).abs() < 1e-14);
                }
            }
            assert!(mass.asymmetry() < 1e-15);
        }
    }

    #[test]
    fn stiffness_diagonal_on_reference_triangle() {
        let s = FeSpace::new(Arc::new(reference_triangle_mesh()), Order::First);
        let k = s.assemble_curl_stiffness();
        for e in 0..3 {
            // curl w = ±1/area, so the entry is 1/area = 2 = 4 × area here
            assert!((k.get(e, e) - 2.0).abs() < 1e-14);
        }
        let m = Arc::new(Mesh::disk(2, 1.0));
        let s = FeSpace::new(m.clone(), Order::First);
        let k = s.assemble_curl_stiffness();
        let t = 0;
        let e = m.triangle_edges(t)[0];
        let expected: f64 = m
            .edge_triangles(e)
            .iter()
            .flatten()
            .map(|&k| 1.0 / m.area(k))
            .sum();
        assert!((k.get(e, e) - expected).abs() < 1e-12);
    }

    #[test]
    fn grad_coupling_annihilates_constants() {
        for order in [Order::First, Order::Second] {
            let s = unit_square(3, order);
            let b = s.assemble_grad_coupling();
            assert_eq!((b.nrows(), b.ncols()), (s.n_dof(), s.n_p()));
            let col = b.mul_vec(&vec![1.0; s.n_p()]);
            assert!(col.iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn zero_form_integrals_sum_to_area() {
        for order in [Order::First, Order::Second] {
            let s = unit_square(3, order);
            let total: f64 = s.zero_form_integrals().iter().sum();
            assert!((total - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn boundary_functionals_on_unit_square() {
        let s = unit_square(2, Order::Second);
        // ∫_∂Ω 1 ds = 4 when all basis functions are summed
        let flux: f64 = s.assemble_boundary_flux(&|_| 1.0).iter().sum();
        assert!((flux - 4.0).abs() < 1e-13);
    }

    #[test]
    fn l2_error_of_zero_form() {
        let s = unit_square(2, Order::First);
        let e = s.l2_error(&OneForm::zeros(&s), &|_| Vector2::new(1.0, 0.0), 6);
        assert!((e - 1.0).abs() < 1e-13);
    }
}
