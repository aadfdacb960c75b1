//! Splitting a straight segment over mesh elements and integrating discrete
//! 1-forms along the pieces.

use nalgebra::Point2;

use crate::error::{Error, Result};
use crate::femspace::{FeSpace, OneForm};
use crate::mesh::{Mesh, BARY_TOL};
use crate::quadrature::LineRule;

/// Parameters closer than this count as no progress along the segment.
const PROGRESS_TOL: f64 = 1e-13;
/// Relative length below which a piece is dropped.
const MIN_PIECE: f64 = 1e-14;
/// Unresolved remainders shorter than this fraction are rounding residue.
const END_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TracePiece {
    pub element: usize,
    pub from: Point2<f64>,
    pub to: Point2<f64>,
    pub ref_from: Point2<f64>,
    pub ref_to: Point2<f64>,
}

impl TracePiece {
    pub fn length(&self) -> f64 {
        (self.to - self.from).norm()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolylineTrace {
    pub pieces: Vec<TracePiece>,
    pub outside_length: f64,
    pub total_length: f64,
}

impl PolylineTrace {
    pub fn elements(&self) -> impl Iterator<Item = usize> + '_ {
        self.pieces.iter().map(|p| p.element)
    }

    pub fn inside_length(&self) -> f64 {
        self.pieces.iter().map(TracePiece::length).sum()
    }

    /// The same trace traversed from the other end.
    pub fn reversed(mut self) -> Self {
        self.pieces.reverse();
        for p in &mut self.pieces {
            std::mem::swap(&mut p.from, &mut p.to);
            std::mem::swap(&mut p.ref_from, &mut p.ref_to);
        }
        self
    }

    fn fully_outside(total_length: f64) -> Self {
        PolylineTrace {
            pieces: Vec::new(),
            outside_length: total_length,
            total_length,
        }
    }
}

/// Barycentric coordinates along the segment: `λ(s) = a + s b`.
struct Line {
    a: [f64; 3],
    b: [f64; 3],
}

impl Line {
    fn new(mesh: &Mesh, k: usize, x0: &Point2<f64>, x1: &Point2<f64>) -> Self {
        let map = mesh.map(k);
        let a = map.barycentric(x0);
        let e = map.barycentric(x1);
        Line {
            a,
            b: [e[0] - a[0], e[1] - a[1], e[2] - a[2]],
        }
    }

    fn contains(&self, s: f64) -> bool {
        (0..3).all(|i| self.a[i] + s * self.b[i] >= -BARY_TOL)
    }

    /// Largest parameter reachable inside the element and the face indices
    /// (opposite local vertex) that attain it.
    fn exit(&self) -> (f64, Vec<usize>) {
        let mut s_out = 1.0;
        let mut params = [f64::INFINITY; 3];
        for i in 0..3 {
            if self.b[i] < -1e-14 {
                params[i] = -self.a[i] / self.b[i];
                s_out = f64::min(s_out, params[i]);
            }
        }
        let faces = (0..3)
            .filter(|&i| params[i].is_finite() && params[i] <= s_out + 1e-10)
            .collect();
        (s_out.min(1.0), faces)
    }
}

/// Walks from `x0` in element `k0` towards `x1`. Once the walk leaves the
/// domain through a boundary face the remainder counts as outside.
pub fn trace_segment(mesh: &Mesh, x0: &Point2<f64>, k0: usize, x1: &Point2<f64>) -> Result<PolylineTrace> {
    if !mesh.contains(k0, x0) {
        return Err(Error::InvalidStart(k0));
    }
    let d = x1 - x0;
    let total = d.norm();
    let mut trace = PolylineTrace {
        pieces: Vec::new(),
        outside_length: 0.0,
        total_length: total,
    };
    if total == 0.0 {
        return Ok(trace);
    }
    let point = |s: f64| x0 + d * s;
    let cap = 4 * mesh.n_triangles() + 8;
    let mut k = k0;
    let mut s = 0.0;
    for _ in 0..cap {
        let line = Line::new(mesh, k, x0, x1);
        let (s_out, faces) = line.exit();
        if s_out > s && (s_out - s) * total > MIN_PIECE * total {
            let map = mesh.map(k);
            let (from, to) = (point(s), point(s_out));
            trace.pieces.push(TracePiece {
                element: k,
                from,
                to,
                ref_from: map.to_reference(&from),
                ref_to: map.to_reference(&to),
            });
        }
        let s_next = s_out.max(s);
        if s_next >= 1.0 - END_TOL {
            return Ok(trace);
        }
        s = s_next;

        let face_step = match faces[..] {
            [i] => mesh
                .neighbor(k, (i + 1) % 3)
                .filter(|&n| advances(mesh, n, x0, x1, s)),
            _ => None,
        };
        match face_step.or_else(|| star_search(mesh, k, x0, x1, s)) {
            Some(n) => k = n,
            None => {
                trace.outside_length = (1.0 - s) * total;
                return Ok(trace);
            }
        }
    }
    Err(Error::TraceOverflow(cap))
}

fn advances(mesh: &Mesh, k: usize, x0: &Point2<f64>, x1: &Point2<f64>, s: f64) -> bool {
    let line = Line::new(mesh, k, x0, x1);
    line.contains(s) && line.exit().0 > s + PROGRESS_TOL
}

/// Among elements sharing a vertex with `k` that contain the current point,
/// the one reaching furthest along the segment (lowest id on ties).
fn star_search(mesh: &Mesh, k: usize, x0: &Point2<f64>, x1: &Point2<f64>, s: f64) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for &v in &mesh.triangle(k) {
        for &c in mesh.vertex_triangles(v) {
            let line = Line::new(mesh, c, x0, x1);
            if !line.contains(s) {
                continue;
            }
            let out = line.exit().0;
            if out <= s + PROGRESS_TOL {
                continue;
            }
            let better = match best {
                None => true,
                Some((bo, bc)) => out > bo || (out == bo && c < bc),
            };
            if better {
                best = Some((out, c));
            }
        }
    }
    best.map(|(_, c)| c)
}

/// Traces `x0 → x1` without a known start element. If `x0` lies outside the
/// domain the segment is traced backwards from `x1`; if both endpoints lie
/// outside, the whole segment counts as outside.
pub fn trace_between(mesh: &Mesh, x0: &Point2<f64>, x1: &Point2<f64>, hint: usize) -> Result<PolylineTrace> {
    if let Some(k) = mesh.locate(x0, hint).element() {
        return trace_segment(mesh, x0, k, x1);
    }
    if let Some(k) = mesh.locate(x1, hint).element() {
        return Ok(trace_segment(mesh, x1, k, x0)?.reversed());
    }
    Ok(PolylineTrace::fully_outside((x1 - x0).norm()))
}

/// `∫ ω` over the inside pieces, exact for second-order forms.
pub fn integrate_along(space: &FeSpace, form: &OneForm, trace: &PolylineTrace) -> f64 {
    let rule = LineRule::gauss(2);
    trace
        .pieces
        .iter()
        .map(|p| {
            let d = p.to - p.from;
            let dr = p.ref_to - p.ref_from;
            rule.iter()
                .map(|(s, w)| w * space.eval(form, p.element, &(p.ref_from + dr * s)).dot(&d))
                .sum::<f64>()
        })
        .sum()
}

/// Inside integral plus the outside fraction of the untransported integral.
pub fn integrate_with_outflow(space: &FeSpace, form: &OneForm, trace: &PolylineTrace, original: f64) -> f64 {
    if trace.total_length < 1e-14 * space.mesh().h() {
        return original;
    }
    integrate_along(space, form, trace) + trace.outside_length / trace.total_length * original
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::femspace::Order;
    use crate::mesh::Rect;
    use crate::projection::Projector;
    use nalgebra::Vector2;
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn square(n: usize) -> Mesh {
        Mesh::structured(n, n, Rect::new(0.0, 0.0, 1.0, 1.0))
    }

    fn p(x: f64, y: f64) -> Point2<f64> {
        Point2::new(x, y)
    }

    #[test]
    fn crossing_the_diagonal() {
        let m = square(1);
        let x0 = p(0.75, 0.25);
        let k0 = m.locate(&x0, 0).element().unwrap();
        let tr = trace_segment(&m, &x0, k0, &p(0.25, 0.75)).unwrap();
        assert_eq!(tr.pieces.len(), 2);
        assert!((tr.pieces[0].to - p(0.5, 0.5)).norm() < 1e-12);
        assert_eq!(tr.outside_length, 0.0);
    }

    #[test]
    fn single_element_segment() {
        let m = square(1);
        let tr = trace_segment(&m, &p(0.6, 0.1), 0, &p(0.8, 0.15)).unwrap();
        assert_eq!(tr.pieces.len(), 1);
        assert_eq!(tr.outside_length, 0.0);
    }

    #[test]
    fn leaving_the_domain() {
        let m = square(1);
        let x0 = p(0.5, 0.5);
        let k0 = m.locate(&x0, 0).element().unwrap();
        let tr = trace_segment(&m, &x0, k0, &p(1.5, 0.5)).unwrap();
        assert!((tr.inside_length() - 0.5).abs() < 1e-12);
        assert!((tr.outside_length - 0.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_start() {
        let m = square(1);
        assert!(matches!(
            trace_segment(&m, &p(0.1, 0.9), 0, &p(0.2, 0.9)),
            Err(Error::InvalidStart(0))
        ));
    }

    fn space(m: Mesh, order: Order) -> (Arc<FeSpace>, Projector) {
        let s = Arc::new(FeSpace::new(Arc::new(m), order));
        let pr = Projector::new(s.clone()).unwrap();
        (s, pr)
    }

    #[test]
    fn constant_field_line_integral() {
        for order in [Order::First, Order::Second] {
            let (s, pr) = space(Mesh::disk(3, 1.0), order);
            let f = pr.interpolate(&|_| Vector2::new(1.0, 0.0));
            let tr = trace_between(s.mesh(), &p(-0.5, 0.3), &p(0.5, 0.3), 0).unwrap();
            assert!((integrate_along(&s, &f, &tr) - 1.0).abs() < 1e-12);
            assert_eq!(integrate_along(&s, &OneForm::zeros(&s), &tr), 0.0);
        }
    }

    #[test]
    fn gradient_loop_integral_vanishes() {
        let (s, pr) = space(square(5), Order::Second);
        let psi = s.interpolate_zero_form(&|x| x.x * x.x - 3.0 * x.x * x.y + x.y);
        let g = pr.gradient(&psi);
        let loop_pts = [p(0.13, 0.21), p(0.87, 0.3), p(0.6, 0.91), p(0.13, 0.21)];
        let total: f64 = loop_pts
            .windows(2)
            .map(|w| integrate_along(&s, &g, &trace_between(s.mesh(), &w[0], &w[1], 0).unwrap()))
            .sum();
        assert!(total.abs() < 1e-11);
    }

    #[test]
    fn outflow_rule() {
        let (s, pr) = space(square(2), Order::First);
        let f = pr.interpolate(&|_| Vector2::new(0.4, 0.0));
        let tr = trace_between(s.mesh(), &p(0.5, 0.5), &p(1.5, 0.5), 0).unwrap();
        assert!((integrate_along(&s, &f, &tr) - 0.2).abs() < 1e-12);
        assert!((integrate_with_outflow(&s, &f, &tr, 0.6) - 0.5).abs() < 1e-12);
        let inside = trace_between(s.mesh(), &p(0.1, 0.5), &p(0.6, 0.5), 0).unwrap();
        assert_eq!(
            integrate_with_outflow(&s, &f, &inside, 7.0),
            integrate_along(&s, &f, &inside)
        );
        let outside = trace_between(s.mesh(), &p(1.1, 0.5), &p(1.6, 0.5), 0).unwrap();
        assert_eq!(integrate_with_outflow(&s, &f, &outside, 0.6), 0.6);
        let degenerate = trace_between(s.mesh(), &p(0.3, 0.3), &p(0.3, 0.3), 0).unwrap();
        assert_eq!(integrate_with_outflow(&s, &f, &degenerate, 0.25), 0.25);
    }

    #[test]
    fn start_outside_is_traced_backwards() {
        let (s, pr) = space(square(2), Order::First);
        let f = pr.interpolate(&|_| Vector2::new(1.0, 0.0));
        let tr = trace_between(s.mesh(), &p(-0.5, 0.5), &p(0.5, 0.5), 0).unwrap();
        assert!((tr.outside_length - 0.5).abs() < 1e-12);
        assert!((integrate_along(&s, &f, &tr) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn lengths_add_up_through_vertices() {
        let m = square(32);
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let grid = |rng: &mut rand::rngs::StdRng| {
            p(rng.random_range(0..=32) as f64 / 32.0, rng.random_range(0..=32) as f64 / 32.0)
        };
        for i in 0..10_000 {
            let (x0, x1) = if i % 2 == 0 {
                (grid(&mut rng), grid(&mut rng))
            } else {
                (
                    p(rng.random::<f64>(), rng.random::<f64>()),
                    p(rng.random::<f64>() * 1.4 - 0.2, rng.random::<f64>() * 1.4 - 0.2),
                )
            };
            let k = m.locate(&x0, 0).element().unwrap();
            let tr = trace_segment(&m, &x0, k, &x1).unwrap();
            let sum = tr.inside_length() + tr.outside_length;
            assert!((sum - tr.total_length).abs() <= 1e-10 * tr.total_length.max(1e-300));
            for w in tr.pieces.windows(2) {
                assert!((w[0].to - w[1].from).norm() < 1e-14);
            }
            let inside = x1.x >= 0.0 && x1.x <= 1.0 && x1.y >= 0.0 && x1.y <= 1.0;
            if inside {
                assert!(tr.outside_length < 1e-12, "{x0} -> {x1}");
            }
        }
    }

    #[test]
    fn reversal_and_additivity() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(12);
        let (s, _) = space(square(8), Order::Second);
        let f = OneForm::from_coeffs(&s, (0..s.n_dof()).map(|_| rng.random::<f64>() - 0.5).collect());
        for _ in 0..200 {
            let x0 = p(rng.random(), rng.random());
            let x1 = p(rng.random(), rng.random());
            let fw = trace_between(s.mesh(), &x0, &x1, 0).unwrap();
            let bw = trace_between(s.mesh(), &x1, &x0, 0).unwrap();
            let mut a: Vec<usize> = fw.elements().collect();
            let mut b: Vec<usize> = bw.elements().collect();
            a.sort();
            b.sort();
            assert_eq!(a, b);
            let i_fw = integrate_along(&s, &f, &fw);
            assert!((i_fw + integrate_along(&s, &f, &bw)).abs() < 1e-12);
            let mid = x0 + (x1 - x0) * rng.random::<f64>();
            let split = integrate_along(&s, &f, &trace_between(s.mesh(), &x0, &mid, 0).unwrap())
                + integrate_along(&s, &f, &trace_between(s.mesh(), &mid, &x1, 0).unwrap());
            assert!((split - i_fw).abs() < 1e-12);
        }
    }

    #[test]
    fn two_point_rule_is_exact() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(13);
        let (s, _) = space(square(4), Order::Second);
        let fine = LineRule::gauss(20);
        for _ in 0..100 {
            let f = OneForm::from_coeffs(&s, (0..s.n_dof()).map(|_| rng.random::<f64>() - 0.5).collect());
            let k = rng.random_range(0..s.mesh().n_triangles());
            let map = s.mesh().map(k);
            let r0 = p(rng.random::<f64>() * 0.5, rng.random::<f64>() * 0.5);
            let r1 = p(rng.random::<f64>() * 0.5, rng.random::<f64>() * 0.5);
            let (x0, x1) = (map.to_physical(&r0), map.to_physical(&r1));
            let tr = trace_segment(s.mesh(), &x0, k, &x1).unwrap();
            let reference: f64 = fine
                .iter()
                .map(|(t, w)| w * s.eval(&f, k, &(r0 + (r1 - r0) * t)).dot(&(x1 - x0)))
                .sum();
            assert!((integrate_along(&s, &f, &tr) - reference).abs() < 1e-13);
        }
    }
}
