//! Projection of edge integrals onto the discrete 1-form spaces.
//!
//! Integral slots (one per big edge for first order; for second order two per
//! big edge, anchored at its low and high vertex, followed by three interior
//! slots per triangle in the order anchored at local vertex 1, 2, 0).

use std::sync::Arc;

use nalgebra::{Matrix2, Point2, Vector2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::femspace::{FeSpace, LocalFn, OneForm, Order, VectorField, ZeroForm};
use crate::mesh::Mesh;
use crate::quadrature::LineRule;

/// An oriented segment whose endpoints are mesh vertices or edge midpoints.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub from: Point2<f64>,
    pub to: Point2<f64>,
}

impl Segment {
    pub fn length(&self) -> f64 {
        (self.to - self.from).norm()
    }
}

/// Interior small edges `{anchor, from → to}` in storage order.
const INTERIOR: [LocalFn; 3] = [LocalFn::small(1, 2, 0), LocalFn::small(2, 0, 1), LocalFn::small(0, 1, 2)];

/// Small edge `{v, e}` as the segment from `v + ½(P − v)` to `v + ½(Q − v)`.
fn small_segment(v: Point2<f64>, p: Point2<f64>, q: Point2<f64>) -> Segment {
    Segment {
        from: v + (p - v) * 0.5,
        to: v + (q - v) * 0.5,
    }
}

/// The small edges of element `t` (three big edges for first order), in the
/// classical numbering 1..=9 of the reference triangle for second order.
/// Edge-attached small edges follow the global orientation of their big edge.
pub fn small_edges(mesh: &Mesh, t: usize, order: Order) -> Vec<Segment> {
    let tri = mesh.triangle(t);
    let x = |i: usize| mesh.vertex(tri[i]);
    let signs = mesh.triangle_edge_signs(t);
    let dir = |j: usize| {
        let (a, b) = crate::femspace::oriented(j, signs[j]);
        (x(a), x(b))
    };
    match order {
        Order::First => (0..3)
            .map(|j| {
                let (a, b) = dir(j);
                Segment { from: a, to: b }
            })
            .collect(),
        Order::Second => {
            // (anchor, local edge) for entries 1..=6, then the interior ones
            let attached = [(0, 2), (2, 2), (2, 1), (1, 1), (1, 0), (0, 0)];
            let mut out: Vec<Segment> = attached
                .iter()
                .map(|&(v, j)| {
                    let (a, b) = dir(j);
                    small_segment(x(v), a, b)
                })
                .collect();
            for f in INTERIOR {
                out.push(small_segment(x(f.anchor.unwrap()), x(f.from), x(f.to)));
            }
            out
        }
    }
}

/// Global enumeration of integral slots as pairs of point indices.
///
/// Point `v < #V` is vertex `v`; point `#V + e` is the midpoint of edge `e`.
/// This matches the node numbering of the 0-form spaces.
#[derive(Clone, Debug)]
pub struct SlotLayout {
    pub order: Order,
    pub points: Vec<Point2<f64>>,
    pub slots: Vec<[usize; 2]>,
    /// An element whose closure contains the slot's segment.
    pub owner: Vec<usize>,
}

impl SlotLayout {
    pub fn new(mesh: &Mesh, order: Order) -> Self {
        let nv = mesh.n_vertices();
        let mut points = mesh.vertices().to_vec();
        let mut slots = Vec::new();
        let mut owner = Vec::new();
        match order {
            Order::First => {
                for e in 0..mesh.n_edges() {
                    slots.push(mesh.edge(e));
                    owner.push(first_triangle(mesh, e));
                }
            }
            Order::Second => {
                points.extend((0..mesh.n_edges()).map(|e| mesh.edge_midpoint(e)));
                for e in 0..mesh.n_edges() {
                    let [p, q] = mesh.edge(e);
                    let k = first_triangle(mesh, e);
                    slots.push([p, nv + e]);
                    slots.push([nv + e, q]);
                    owner.extend([k, k]);
                }
                for t in 0..mesh.n_triangles() {
                    let tri = mesh.triangle(t);
                    let edges = mesh.triangle_edges(t);
                    let mid = |a: usize, b: usize| {
                        // local edge j joins local vertices j and j + 1
                        let j = if (a + 1) % 3 == b { a } else { b };
                        nv + edges[j]
                    };
                    for f in INTERIOR {
                        let v = f.anchor.unwrap();
                        slots.push([mid(v, f.from), mid(v, f.to)]);
                        owner.push(t);
                    }
                    let _ = tri;
                }
            }
        }
        SlotLayout {
            order,
            points,
            slots,
            owner,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn segment(&self, i: usize) -> Segment {
        let [a, b] = self.slots[i];
        Segment {
            from: self.points[a],
            to: self.points[b],
        }
    }
}

fn first_triangle(mesh: &Mesh, e: usize) -> usize {
    let [a, b] = mesh.edge_triangles(e);
    match (a, b) {
        (Some(a), Some(b)) => a.min(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => unreachable!("edge without triangles"),
    }
}

/// `∫_s φ` over a segment lying in the closure of element `t`.
fn segment_integral(space: &FeSpace, t: usize, f: &LocalFn, seg: &Segment, rule: &LineRule) -> f64 {
    let map = space.mesh().map(t);
    let grad = map.bary_gradients();
    let d = seg.to - seg.from;
    rule.iter()
        .map(|(s, w)| {
            let lam = map.barycentric(&(seg.from + d * s));
            w * f.value(&lam, &grad).dot(&d)
        })
        .sum()
}

#[derive(Clone, Copy, Debug)]
struct InteriorSolve {
    /// Interior small-edge integrals of the six edge-attached functions.
    gray: [[f64; 6]; 3],
    /// `(HᵀH)⁻¹Hᵀ` for the kept interior pair.
    pinv: [[f64; 3]; 2],
}

/// The operator `I_{h,p}` from slot integrals to 1-form coefficients.
#[derive(Clone, Debug)]
pub struct Projector {
    space: Arc<FeSpace>,
    layout: SlotLayout,
    edge_inverse: Vec<Matrix2<f64>>,
    interior: Vec<InteriorSolve>,
}

/// Largest condition number tolerated for an edge block.
pub const MAX_EDGE_BLOCK_COND: f64 = 1e6;

impl Projector {
    pub fn new(space: Arc<FeSpace>) -> Result<Self> {
        let mesh = space.mesh();
        let layout = SlotLayout::new(mesh, space.order());
        if space.order() == Order::First {
            return Ok(Projector {
                space,
                layout,
                edge_inverse: Vec::new(),
                interior: Vec::new(),
            });
        }
        let rule = LineRule::gauss(2);
        let mut edge_inverse = Vec::with_capacity(mesh.n_edges());
        for e in 0..mesh.n_edges() {
            let t = layout.owner[2 * e];
            let j = mesh.triangle_edges(t).iter().position(|&x| x == e).unwrap();
            let el = space.element(t);
            let mut m = Matrix2::<f64>::zeros();
            for r in 0..2 {
                let seg = layout.segment(2 * e + r);
                for c in 0..2 {
                    m[(r, c)] = segment_integral(&space, t, &el.funcs[2 * j + c], &seg, &rule);
                }
            }
            let sv = m.singular_values();
            let cond = sv[0].max(sv[1]) / sv[0].min(sv[1]);
            if !(cond < MAX_EDGE_BLOCK_COND) {
                return Err(Error::DegenerateElement { tri: t, cond });
            }
            edge_inverse.push(m.try_inverse().ok_or(Error::DegenerateElement { tri: t, cond })?);
        }
        let ne = mesh.n_edges();
        let interior = (0..mesh.n_triangles())
            .map(|t| {
                let el = space.element(t);
                let segs: Vec<Segment> = (0..3).map(|i| layout.segment(2 * ne + 3 * t + i)).collect();
                let mut gray = [[0.0; 6]; 3];
                for (i, seg) in segs.iter().enumerate() {
                    for (c, f) in el.funcs[..6].iter().enumerate() {
                        gray[i][c] = segment_integral(&space, t, f, seg, &rule);
                    }
                }
                let pinv = interior_pinv(&space, t, &segs, [el.funcs[6], el.funcs[7]]);
                InteriorSolve { gray, pinv }
            })
            .collect();
        Ok(Projector {
            space,
            layout,
            edge_inverse,
            interior,
        })
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn layout(&self) -> &SlotLayout {
        &self.layout
    }

    /// Number of integral slots: `#E` or `2#E + 3#T`.
    pub fn n_slots(&self) -> usize {
        self.layout.len()
    }

    /// Edge blocks are solved exactly once per big edge; interior
    /// coefficients by least squares after removing the edge contribution.
    pub fn project(&self, integrals: &[f64]) -> OneForm {
        assert_eq!(integrals.len(), self.n_slots());
        let space = &self.space;
        if space.order() == Order::First {
            return OneForm::from_coeffs(space, integrals.to_vec());
        }
        let mesh = space.mesh();
        let ne = mesh.n_edges();
        let mut coeffs = vec![0.0; space.n_dof()];
        for e in 0..ne {
            let c = self.edge_inverse[e] * Vector2::new(integrals[2 * e], integrals[2 * e + 1]);
            coeffs[2 * e] = c.x;
            coeffs[2 * e + 1] = c.y;
        }
        let interior: Vec<[f64; 2]> = (0..mesh.n_triangles())
            .into_par_iter()
            .map(|t| {
                let el = space.element(t);
                let solve = &self.interior[t];
                let mut rhs = [0.0; 3];
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r = integrals[2 * ne + 3 * t + i]
                        - (0..6).map(|c| solve.gray[i][c] * coeffs[el.dofs[c]]).sum::<f64>();
                }
                let mut out = [0.0; 2];
                for (k, o) in out.iter_mut().enumerate() {
                    *o = (0..3).map(|i| solve.pinv[k][i] * rhs[i]).sum();
                }
                out
            })
            .collect();
        for (t, c) in interior.into_iter().enumerate() {
            coeffs[2 * ne + 2 * t] = c[0];
            coeffs[2 * ne + 2 * t + 1] = c[1];
        }
        OneForm::from_coeffs(space, coeffs)
    }

    /// Slot integrals of a continuous field by `n`-point Gauss quadrature.
    pub fn integrals_of_field(&self, field: &VectorField, n: usize) -> Vec<f64> {
        let rule = LineRule::gauss(n);
        (0..self.n_slots())
            .into_par_iter()
            .map(|i| {
                let seg = self.layout.segment(i);
                let d = seg.to - seg.from;
                rule.iter().map(|(s, w)| w * field(&(seg.from + d * s)).dot(&d)).sum()
            })
            .collect()
    }

    /// Exact slot integrals of a discrete 1-form, evaluated in the owner element.
    pub fn integrals_of_form(&self, form: &OneForm) -> Vec<f64> {
        let rule = LineRule::gauss(2);
        let space = &self.space;
        (0..self.n_slots())
            .into_par_iter()
            .map(|i| {
                let t = self.layout.owner[i];
                let seg = self.layout.segment(i);
                space
                    .element(t)
                    .iter()
                    .map(|(f, d)| form.coeffs[d] * segment_integral(space, t, f, &seg, &rule))
                    .sum()
            })
            .collect()
    }

    /// Slot integrals of `dψ`: nodal differences between slot endpoints.
    pub fn integrals_of_gradient(&self, psi: &ZeroForm) -> Vec<f64> {
        self.layout
            .slots
            .iter()
            .map(|&[a, b]| psi.coeffs[b] - psi.coeffs[a])
            .collect()
    }

    /// `I_{h,p}` applied to a smooth field.
    pub fn interpolate(&self, field: &VectorField) -> OneForm {
        self.project(&self.integrals_of_field(field, 5))
    }

    /// The discrete gradient `dψ` as a 1-form.
    pub fn gradient(&self, psi: &ZeroForm) -> OneForm {
        self.project(&self.integrals_of_gradient(psi))
    }

    /// Interior coefficients of element `t` for an arbitrary kept pair of
    /// interior functions, returned as the resulting vector field evaluator.
    /// Used to check that the projected function does not depend on which
    /// dependent interior function is dropped.
    pub fn local_values_with_pair(
        &self,
        form: &OneForm,
        integrals: &[f64],
        t: usize,
        pair: [usize; 2],
        points: &[Point2<f64>],
    ) -> Vec<Vector2<f64>> {
        let space = &self.space;
        let mesh = space.mesh();
        let ne = mesh.n_edges();
        let el = space.element(t);
        let rule = LineRule::gauss(2);
        let segs: Vec<Segment> = (0..3).map(|i| self.layout.segment(2 * ne + 3 * t + i)).collect();
        let kept = [INTERIOR[pair[0]], INTERIOR[pair[1]]];
        let pinv = interior_pinv(space, t, &segs, kept);
        let mut rhs = [0.0; 3];
        for (i, seg) in segs.iter().enumerate() {
            rhs[i] = integrals[2 * ne + 3 * t + i]
                - (0..6)
                    .map(|c| form.coeffs[el.dofs[c]] * segment_integral(space, t, &el.funcs[c], seg, &rule))
                    .sum::<f64>();
        }
        let c: Vec<f64> = (0..2).map(|k| (0..3).map(|i| pinv[k][i] * rhs[i]).sum()).collect();
        let map = mesh.map(t);
        let grad = map.bary_gradients();
        points
            .iter()
            .map(|r| {
                let lam = crate::mesh::bary_from_reference(r);
                let mut v: Vector2<f64> = (0..6).map(|a| el.funcs[a].value(&lam, &grad) * form.coeffs[el.dofs[a]]).sum();
                v += kept[0].value(&lam, &grad) * c[0] + kept[1].value(&lam, &grad) * c[1];
                v
            })
            .collect()
    }
}

fn interior_pinv(space: &FeSpace, t: usize, segs: &[Segment], kept: [LocalFn; 2]) -> [[f64; 3]; 2] {
    let rule = LineRule::gauss(2);
    let mut h = [[0.0; 2]; 3];
    for (i, seg) in segs.iter().enumerate() {
        for (k, f) in kept.iter().enumerate() {
            h[i][k] = segment_integral(space, t, f, seg, &rule);
        }
    }
    let mut hth = Matrix2::<f64>::zeros();
    for row in &h {
        for a in 0..2 {
            for b in 0..2 {
                hth[(a, b)] += row[a] * row[b];
            }
        }
    }
    let inv = hth.try_inverse().expect("interior normal equations are regular");
    let mut pinv = [[0.0; 3]; 2];
    for k in 0..2 {
        for (i, row) in h.iter().enumerate() {
            pinv[k][i] = inv[(k, 0)] * row[0] + inv[(k, 1)] * row[1];
        }
    }
    pinv
}
