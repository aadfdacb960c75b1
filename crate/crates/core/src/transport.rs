//! Smoothed velocities, approximate backward flow maps and the projected
//! semi-Lagrangian pullback of discrete 1-forms.

use std::sync::Arc;

use nalgebra::{Point2, Vector2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::femspace::{FeSpace, OneForm};
use crate::mesh::Mesh;
use crate::projection::Projector;
use crate::quadrature::LineRule;
use crate::tracer::{integrate_along, integrate_with_outflow, trace_between, trace_segment};

/// A velocity that can be evaluated pointwise on the closed mesh domain.
pub trait Velocity: Send + Sync {
    fn eval(&self, x: &Point2<f64>, hint: usize) -> Result<Vector2<f64>>;
}

/// Axis-wise segment average of a discrete velocity over length `h_min`.
#[derive(Clone)]
pub struct SmoothedVelocity {
    space: Arc<FeSpace>,
    form: OneForm,
    radius: f64,
    wall_flux: Option<WallFlux>,
}

/// Prescribed normal velocity `u·n` on the boundary.
pub type WallFlux = Arc<dyn Fn(&Point2<f64>) -> f64 + Send + Sync>;

impl std::fmt::Debug for SmoothedVelocity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothedVelocity")
            .field("radius", &self.radius)
            .field("wall_flux", &self.wall_flux.is_some())
            .finish()
    }
}

impl SmoothedVelocity {
    pub fn new(space: Arc<FeSpace>, form: OneForm) -> Self {
        let radius = space.mesh().h_min();
        SmoothedVelocity {
            space,
            form,
            radius,
            wall_flux: None,
        }
    }

    /// Reflects the normal component about the given boundary normal
    /// velocity instead of about zero.
    pub fn with_wall_flux(mut self, g: WallFlux) -> Self {
        self.wall_flux = Some(g);
        self
    }

    pub fn form(&self) -> &OneForm {
        &self.form
    }

    /// Averaging length.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Where the averaging window crosses the boundary, the discrete field is
    /// continued by reflection across the crossed boundary edge: tangential
    /// components even, normal component odd about the wall value `g` (zero
    /// unless wall flux data is set). On a straight wall the normal average
    /// is then `g`, so with `g = 0` wall points stay on the wall. Whatever the
    /// reflected window still misses is dropped and the average is taken over
    /// the covered length.
    pub fn smooth_eval(&self, x: &Point2<f64>, hint: usize) -> Result<Vector2<f64>> {
        let mesh = self.space.mesh();
        let k = mesh.locate(x, hint).element().ok_or(Error::OutsideDomain(x.x, x.y))?;
        let half = 0.5 * self.radius;
        let mut out = Vector2::zeros();
        for axis in 0..2 {
            let mut d = Vector2::zeros();
            d[axis] = half;
            let (fwd, cf) = self.window(x, k, &d)?;
            let (bwd, cb) = self.window(x, k, &-d)?;
            let covered = cf + cb;
            out[axis] = if covered > 0.0 {
                (fwd - bwd) / covered
            } else {
                self.space.eval(&self.form, k, &mesh.map(k).to_reference(x))[axis]
            };
        }
        Ok(out)
    }

    /// Line integral of the (reflected) field along `x → x + d` and the length
    /// it covers.
    fn window(&self, x: &Point2<f64>, k: usize, d: &Vector2<f64>) -> Result<(f64, f64)> {
        let mesh = self.space.mesh();
        let end = x + d;
        let trace = trace_segment(mesh, x, k, &end)?;
        let mut value = integrate_along(&self.space, &self.form, &trace);
        let mut covered = trace.inside_length();
        if trace.outside_length <= 1e-14 * trace.total_length {
            return Ok((value, covered));
        }
        let (exit, ke) = trace.pieces.last().map_or((*x, k), |p| (p.to, p.element));
        if let Some((q, n)) = crossed_wall(mesh, ke, &exit, d) {
            let mirrored = end - 2.0 * (end - q).dot(&n) * n;
            let start = mesh.locate(&exit, ke).element();
            if let Some(ks) = start {
                let back = trace_segment(mesh, &exit, ks, &mirrored)?;
                value += integrate_along(&self.space, &self.form, &back);
                let len = back.inside_length();
                covered += len;
                if let Some(g) = &self.wall_flux {
                    let dir = d.normalize();
                    let along = dir - n * n.dot(&dir);
                    let rule = LineRule::gauss(3);
                    let avg: f64 = rule.iter().map(|(s, w)| w * g(&(exit + along * (s * len)))).sum();
                    value += 2.0 * n.dot(&dir) * avg * len;
                }
            }
        }
        Ok((value, covered))
    }
}

/// Boundary edge through which a walk in direction `d` leaves the mesh at
/// `p`, as a point on it and its outward unit normal. Candidates are the
/// boundary edges around element `k`; among those passing through `p` the
/// one facing `d` most directly wins.
fn crossed_wall(mesh: &Mesh, k: usize, p: &Point2<f64>, d: &Vector2<f64>) -> Option<(Point2<f64>, Vector2<f64>)> {
    let tol = 1e-9 * mesh.h();
    let mut best: Option<(f64, f64, Point2<f64>, Vector2<f64>)> = None;
    for &v in &mesh.triangle(k) {
        for &t in mesh.vertex_triangles(v) {
            let tri = mesh.triangle(t);
            for (j, &e) in mesh.triangle_edges(t).iter().enumerate() {
                if !mesh.is_boundary_edge(e) {
                    continue;
                }
                let a = mesh.vertex(tri[j]);
                let b = mesh.vertex(tri[(j + 1) % 3]);
                let opposite = mesh.vertex(tri[(j + 2) % 3]);
                let ab = b - a;
                let len2 = ab.norm_squared();
                let s = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
                let dist = (p - (a + ab * s)).norm();
                let mut n = Vector2::new(ab.y, -ab.x).normalize();
                if n.dot(&(opposite - a)) > 0.0 {
                    n = -n;
                }
                let facing = n.dot(d);
                let better = match &best {
                    None => true,
                    Some((bd, bf, ..)) => {
                        if (dist - bd).abs() <= tol {
                            facing > *bf
                        } else {
                            dist < *bd
                        }
                    }
                };
                if better {
                    best = Some((dist, facing, a, n));
                }
            }
        }
    }
    best.filter(|(dist, facing, ..)| *dist <= tol && *facing > 0.0).map(|(_, _, a, n)| (a, n))
}

impl Velocity for SmoothedVelocity {
    fn eval(&self, x: &Point2<f64>, hint: usize) -> Result<Vector2<f64>> {
        self.smooth_eval(x, hint)
    }
}

/// A closed-form velocity, used for prescribed transport and in tests.
pub struct AnalyticVelocity<F>(pub F);

impl<F> Velocity for AnalyticVelocity<F>
where
    F: Fn(&Point2<f64>) -> Vector2<f64> + Send + Sync,
{
    fn eval(&self, x: &Point2<f64>, _hint: usize) -> Result<Vector2<f64>> {
        Ok((self.0)(x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Horizon {
    /// `t_n → t_n − τ`
    One,
    /// `t_n → t_n − 2τ`
    Two,
}

#[derive(Clone)]
enum Scheme {
    Euler {
        prev: Arc<dyn Velocity>,
    },
    Heun {
        star: Arc<dyn Velocity>,
        prev: Arc<dyn Velocity>,
        prev2: Arc<dyn Velocity>,
    },
}

/// Backward flow maps built from velocities frozen at earlier time levels.
#[derive(Clone)]
pub struct FlowEvaluator {
    mesh: Arc<Mesh>,
    tau: f64,
    scheme: Scheme,
}

impl FlowEvaluator {
    /// `x − τ ū^{n−1}(x)`.
    pub fn euler(mesh: Arc<Mesh>, tau: f64, prev: Arc<dyn Velocity>) -> Self {
        FlowEvaluator {
            mesh,
            tau,
            scheme: Scheme::Euler { prev },
        }
    }

    /// Heun's method with the extrapolated field `ū* = 2ū^{n−1} − ū^{n−2}`.
    pub fn heun(mesh: Arc<Mesh>, tau: f64, star: Arc<dyn Velocity>, prev: Arc<dyn Velocity>, prev2: Arc<dyn Velocity>) -> Self {
        FlowEvaluator {
            mesh,
            tau,
            scheme: Scheme::Heun { star, prev, prev2 },
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn map_back(&self, x: &Point2<f64>, hint: usize, horizon: Horizon) -> Result<Point2<f64>> {
        let tau = self.tau;
        match &self.scheme {
            Scheme::Euler { prev } => {
                let steps = if horizon == Horizon::One { 1.0 } else { 2.0 };
                Ok(x - prev.eval(x, hint)? * (steps * tau))
            }
            Scheme::Heun { star, prev, prev2 } => {
                let us = star.eval(x, hint)?;
                let (field, reach, weight) = match horizon {
                    Horizon::One => (prev, tau, 0.5 * tau),
                    Horizon::Two => (prev2, 2.0 * tau, tau),
                };
                let mut y = x - us * reach;
                let hint_y = match self.mesh.locate(&y, hint).element() {
                    Some(k) => k,
                    None => {
                        y = self.mesh.nearest_boundary_point(&y);
                        self.mesh.locate(&y, hint).element().unwrap_or(hint)
                    }
                };
                Ok(x - (us + field.eval(&y, hint_y)?) * weight)
            }
        }
    }
}

/// Result of a pullback: the projected form and how many transported
/// segments left the domain.
#[derive(Clone, Debug)]
pub struct Pullback {
    pub form: OneForm,
    pub outside_segments: usize,
}

/// An element incident to every point of the slot layout.
fn point_hints(projector: &Projector) -> Vec<usize> {
    let mesh = projector.space().mesh();
    let nv = mesh.n_vertices();
    (0..projector.layout().points.len())
        .map(|i| {
            if i < nv {
                mesh.vertex_triangles(i)[0]
            } else {
                mesh.edge_triangles(i - nv)[0].unwrap()
            }
        })
        .collect()
}

/// Transports every slot endpoint through the backward flow.
pub fn transported_points(projector: &Projector, flow: &FlowEvaluator, horizon: Horizon) -> Result<Vec<Point2<f64>>> {
    let hints = point_hints(projector);
    projector
        .layout()
        .points
        .par_iter()
        .zip(hints.par_iter())
        .map(|(x, &k)| flow.map_back(x, k, horizon))
        .collect()
}

/// `I_{h,p} X̄* ω`: integrates `form_prev` over the straight segments joining
/// transported endpoints and projects the result.
pub fn sl_pullback(projector: &Projector, form_prev: &OneForm, flow: &FlowEvaluator, horizon: Horizon) -> Result<Pullback> {
    let moved = transported_points(projector, flow, horizon)?;
    pullback_with_points(projector, form_prev, &moved)
}

/// Pullback with precomputed transported slot endpoints.
pub fn pullback_with_points(projector: &Projector, form_prev: &OneForm, moved: &[Point2<f64>]) -> Result<Pullback> {
    let space = projector.space();
    let layout = projector.layout();
    let original = projector.integrals_of_form(form_prev);
    let results: Vec<(f64, bool)> = (0..layout.len())
        .into_par_iter()
        .map(|i| {
            let [a, b] = layout.slots[i];
            let tr = trace_between(space.mesh(), &moved[a], &moved[b], layout.owner[i])
                .map_err(|e| Error::EdgeTrace { edge: i, source: Box::new(e) })?;
            let outside = tr.outside_length > 0.0;
            Ok((integrate_with_outflow(space, form_prev, &tr, original[i]), outside))
        })
        .collect::<Result<_>>()?;
    let outside_segments = results.iter().filter(|r| r.1).count();
    let integrals: Vec<f64> = results.into_iter().map(|r| r.0).collect();
    Ok(Pullback {
        form: projector.project(&integrals),
        outside_segments,
    })
}
