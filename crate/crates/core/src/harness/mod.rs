//! Experiment runner: builds meshes and solver configurations for the
//! numerical experiments, runs them, and writes CSV reports.

pub mod config;
pub mod fields;
pub mod output;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::{Point2, Vector2};

use crate::error::{Error, Result};
use crate::femspace::{FeSpace, OneForm};
use crate::mesh::{Mesh, Rect};
use crate::solver::{BoundaryData, EnergyTrace, Operators, SimConfig, Simulation};

pub use config::{Experiment, ExperimentSpec, MeshSource, TauRule};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub tau: f64,
    pub l2_error: f64,
    pub eoc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    /// Rows are sorted by decreasing `h`; the EOC of a row compares it with
    /// the preceding, coarser one.
    pub fn from_errors(mut entries: Vec<(f64, f64, f64)>) -> Self {
        entries.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(entries.len());
        for (h, tau, e) in entries {
            let eoc = rows.last().map(|p| (p.l2_error / e).ln() / (p.h / h).ln());
            rows.push(ConvergenceRow { h, tau, l2_error: e, eoc });
        }
        ConvergenceReport { rows }
    }

    pub fn final_eoc(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.eoc)
    }
}

pub struct RunOutcome {
    pub spec: ExperimentSpec,
    pub h: f64,
    pub tau: f64,
    pub space: Arc<FeSpace>,
    pub omega: OneForm,
    pub trace: EnergyTrace,
    /// Error against the exact solution at the final time, when one is known.
    pub l2_error: Option<f64>,
    /// Relative divergence residual of the initial field.
    pub initial_divergence: f64,
}

impl RunOutcome {
    pub fn max_divergence_residual(&self) -> f64 {
        self.trace.iter().map(|r| r.divergence_residual).fold(0.0, f64::max)
    }

    pub fn max_energy_identity_residual(&self) -> f64 {
        self.trace.iter().map(|r| r.energy_identity_residual).fold(0.0, f64::max)
    }

    pub fn max_inner_iterations(&self) -> usize {
        self.trace.iter().map(|r| r.inner_iterations).max().unwrap_or(0)
    }

    pub fn relative_energy_drift(&self) -> f64 {
        let e0 = self.trace.first().map_or(0.0, |r| r.energy);
        self.trace.iter().map(|r| (r.energy - e0).abs()).fold(0.0, f64::max) / e0.max(f64::MIN_POSITIVE)
    }
}

fn check_domain(mesh: &Mesh, rect: &Rect) -> Result<()> {
    let tol = 1e-9 * (rect.x1 - rect.x0).max(rect.y1 - rect.y0);
    let inside = mesh
        .vertices()
        .iter()
        .all(|v| v.x >= rect.x0 - tol && v.x <= rect.x1 + tol && v.y >= rect.y0 - tol && v.y <= rect.y1 + tol);
    if !inside || (mesh.total_area() - rect.area()).abs() > 1e-9 * rect.area() {
        return Err(Error::Config(format!(
            "mesh does not cover the domain [{}, {}] x [{}, {}]",
            rect.x0, rect.x1, rect.y0, rect.y1
        )));
    }
    Ok(())
}

pub fn build_mesh(spec: &ExperimentSpec) -> Result<Arc<Mesh>> {
    let domain = spec.experiment.domain();
    let mesh = match (&spec.mesh, domain) {
        (MeshSource::Structured(n), Some(rect)) => Mesh::structured(*n, *n, rect),
        (MeshSource::Disk(rings), None) => Mesh::disk(*rings, 1.0),
        (MeshSource::File(path), _) => Mesh::load(path)?,
        (source, _) => {
            return Err(Error::Config(format!(
                "mesh {source:?} does not fit {}",
                spec.experiment.name()
            )))
        }
    };
    if let Some(rect) = domain {
        check_domain(&mesh, &rect)?;
    }
    Ok(Arc::new(mesh))
}

pub fn sim_config(spec: &ExperimentSpec, tau: f64) -> SimConfig {
    let mut c = SimConfig::new(spec.scheme, tau, spec.t_final);
    c.eps = spec.eps;
    c.conservative = spec.conservative;
    match spec.experiment {
        Experiment::Exp2 => {
            let eps = spec.eps;
            c.forcing = Some(Arc::new(move |_, x: &Point2<f64>| fields::taylor_green_forcing(eps, x)));
            c.boundary = Some(BoundaryData {
                normal_velocity: Arc::new(|_, x: &Point2<f64>| {
                    fields::taylor_green(0.0, 0.0, x).dot(&fields::square_normal(x))
                }),
                vorticity: Arc::new(|_, x: &Point2<f64>| fields::taylor_green_curl(x)),
            });
        }
        Experiment::Exp5 => {
            c.forcing = Some(Arc::new(|_, x: &Point2<f64>| fields::lid_forcing(x)));
        }
        _ => {}
    }
    c
}

/// Initial field, made discretely divergence-free (or flux-compatible for
/// exp2) by a Leray correction of its projection.
pub fn initial_form(spec: &ExperimentSpec, ops: &Operators, config: &SimConfig) -> Result<OneForm> {
    let tol = config.solve_tol;
    let raw = match spec.experiment {
        Experiment::Exp1 => ops.projector.interpolate(&|x| fields::taylor_green(spec.eps, 0.0, x)),
        Experiment::Exp2 => ops.projector.interpolate(&|x| fields::taylor_green(0.0, 0.0, x)),
        Experiment::Exp3 => ops.projector.interpolate(&fields::rotating_hump),
        Experiment::Exp5 => return Ok(OneForm::zeros(ops.space())),
        Experiment::Exp6 => ops.projector.interpolate(&fields::swirl),
    };
    let flux = config
        .boundary
        .as_ref()
        .map(|bd| ops.space().assemble_boundary_flux(&|x| (bd.normal_velocity)(0.0, x)));
    ops.leray_project(&raw, flux.as_deref(), tol)
}

fn exact_solution(spec: &ExperimentSpec) -> Option<Box<dyn Fn(&Point2<f64>) -> Vector2<f64> + Sync>> {
    let (eps, t) = (spec.eps, spec.t_final);
    match spec.experiment {
        Experiment::Exp1 => Some(Box::new(move |x| fields::taylor_green(eps, t, x))),
        Experiment::Exp2 => Some(Box::new(|x| fields::taylor_green(0.0, 0.0, x))),
        _ => None,
    }
}

pub fn run_on_mesh(spec: &ExperimentSpec, mesh: Arc<Mesh>) -> Result<RunOutcome> {
    spec.validate()?;
    let h = mesh.h();
    let tau = spec.tau.tau(h);
    let config = sim_config(spec, tau);
    let ops = Operators::new(mesh, spec.scheme.space_order())?;
    let omega0 = initial_form(spec, &ops, &config)?;
    let space = ops.space().clone();
    let mut sim = Simulation::from_operators(ops, config, omega0)?;
    let initial_divergence = sim.trace()[0].divergence_residual;
    let n = sim.config().n_steps();
    log::info!("{}: h = {h:.5}, tau = {tau:.5}, {n} steps, {} dofs", spec.experiment.name(), space.n_dof());
    while sim.state().step < n {
        let rec = sim.step()?;
        log::debug!("step {} t = {:.4} E = {:.12e} mu = {:.3e}", rec.step, rec.t, rec.energy, rec.mu);
    }
    let omega = sim.omega().clone();
    let l2_error = exact_solution(spec).map(|u| space.l2_error(&omega, &*u, 6));
    Ok(RunOutcome {
        spec: spec.clone(),
        h,
        tau,
        space,
        omega,
        trace: sim.trace().clone(),
        l2_error,
        initial_divergence,
    })
}

pub fn run(spec: &ExperimentSpec) -> Result<RunOutcome> {
    spec.validate()?;
    run_on_mesh(spec, build_mesh(spec)?)
}

/// `‖u_coarse − u_fine‖_{L²}` integrated on the fine mesh.
pub fn l2_difference(coarse: &FeSpace, coarse_form: &OneForm, fine: &FeSpace, fine_form: &OneForm) -> f64 {
    let hint = AtomicUsize::new(0);
    fine.l2_error(
        fine_form,
        &|x| {
            let t = coarse.mesh().locate(x, hint.load(Ordering::Relaxed)).element();
            match t {
                Some(t) => {
                    hint.store(t, Ordering::Relaxed);
                    coarse.eval(coarse_form, t, &coarse.mesh().map(t).to_reference(x))
                }
                None => Vector2::zeros(),
            }
        },
        6,
    )
}

/// Runs the experiment on `levels` structured meshes with halved `h`.
/// Exp1 and exp2 are measured against their exact solutions; exp3 against
/// the finest run, which then contributes no row.
pub fn convergence(spec: &ExperimentSpec, levels: usize) -> Result<(ConvergenceReport, Vec<RunOutcome>)> {
    spec.validate()?;
    let n0 = match spec.mesh {
        MeshSource::Structured(n) => n,
        _ => return Err(Error::Config("convergence studies need a structured mesh".into())),
    };
    let self_ref = match spec.experiment {
        Experiment::Exp1 | Experiment::Exp2 => false,
        Experiment::Exp3 => true,
        e => return Err(Error::Config(format!("{} has no convergence study", e.name()))),
    };
    let needed = if self_ref { 3 } else { 2 };
    if levels < needed {
        return Err(Error::Config(format!("{} needs at least {needed} levels", spec.experiment.name())));
    }
    let mut runs = Vec::with_capacity(levels);
    for k in 0..levels {
        let mut s = spec.clone();
        s.mesh = MeshSource::Structured(n0 << k);
        runs.push(run(&s)?);
    }
    let entries = if self_ref {
        let (fine, coarse) = runs.split_last().unwrap();
        coarse
            .iter()
            .map(|r| (r.h, r.tau, l2_difference(&r.space, &r.omega, &fine.space, &fine.omega)))
            .collect()
    } else {
        runs.iter().map(|r| (r.h, r.tau, r.l2_error.unwrap())).collect()
    };
    Ok((ConvergenceReport::from_errors(entries), runs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Scheme;

    #[test]
    fn eoc_definition() {
        let r = ConvergenceReport::from_errors(vec![(0.05, 0.1, 0.5), (0.1, 0.2, 1.0), (0.025, 0.05, 0.125)]);
        assert_eq!(r.rows[0].h, 0.1);
        assert_eq!(r.rows[0].eoc, None);
        assert!((r.rows[1].eoc.unwrap() - 1.0).abs() < 1e-14);
        assert!((r.final_eoc().unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn structured_mesh_sizes() {
        let spec = ExperimentSpec::defaults(Experiment::Exp2);
        let mesh = build_mesh(&spec).unwrap();
        assert!((mesh.h() - 0.0943).abs() < 1e-3);
        let mut spec = ExperimentSpec::defaults(Experiment::Exp1);
        spec.mesh = MeshSource::Disk(3);
        assert!(build_mesh(&spec).is_err());
    }

    #[test]
    fn mesh_file_must_cover_domain() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        std::fs::write(&path, Mesh::structured(2, 2, Rect::centered_square(1.0)).to_text()).unwrap();
        let mut spec = ExperimentSpec::defaults(Experiment::Exp1);
        spec.mesh = MeshSource::File(path.clone());
        assert!(matches!(build_mesh(&spec), Err(Error::Config(_))));
        spec.experiment = Experiment::Exp2;
        assert!(build_mesh(&spec).is_ok());
    }

    #[test]
    fn initial_fields_are_divergence_free() {
        for e in [Experiment::Exp1, Experiment::Exp2, Experiment::Exp3, Experiment::Exp6] {
            let mut spec = ExperimentSpec::defaults(e);
            spec.mesh = match e {
                Experiment::Exp6 => MeshSource::Disk(4),
                _ => MeshSource::Structured(6),
            };
            let mesh = build_mesh(&spec).unwrap();
            let config = sim_config(&spec, 0.01);
            let ops = Operators::new(mesh, Scheme::Order2.space_order()).unwrap();
            let w = initial_form(&spec, &ops, &config).unwrap();
            let flux = config
                .boundary
                .as_ref()
                .map(|bd| ops.space().assemble_boundary_flux(&|x| (bd.normal_velocity)(0.0, x)));
            assert!(ops.divergence_residual(&w, flux.as_deref()) <= 1e-9 * ops.m_norm(&w), "{}", e.name());
        }
    }

    #[test]
    fn exp5_short_run() {
        let mut spec = ExperimentSpec::defaults(Experiment::Exp5);
        spec.mesh = MeshSource::Structured(4);
        spec.t_final = 0.1;
        let out = run(&spec).unwrap();
        assert_eq!(out.trace.len(), 11);
        assert!(out.max_divergence_residual() <= 1e-10);
        assert!(out.trace.last().unwrap().energy > 0.0);
    }

    #[test]
    fn self_difference_vanishes() {
        let spec = ExperimentSpec::defaults(Experiment::Exp1);
        let coarse = Mesh::structured(3, 3, Rect::centered_square(0.5));
        let fine = Mesh::structured(6, 6, Rect::centered_square(0.5));
        let cs = FeSpace::new(Arc::new(coarse), spec.scheme.space_order());
        let fs = FeSpace::new(Arc::new(fine), spec.scheme.space_order());
        let cp = crate::projection::Projector::new(Arc::new(cs)).unwrap();
        let fp = crate::projection::Projector::new(Arc::new(fs)).unwrap();
        // a field in both spaces is represented exactly by each
        let u = |_: &Point2<f64>| Vector2::new(0.3, -1.2);
        let d = l2_difference(cp.space(), &cp.interpolate(&u), fp.space(), &fp.interpolate(&u));
        assert!(d < 1e-12, "{d}");
    }
}
