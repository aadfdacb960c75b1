//! CSV writers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::Point2;

use crate::error::Result;
use crate::femspace::{FeSpace, OneForm};
use crate::solver::EnergyRecord;

use super::{ConvergenceReport, RunOutcome};

pub fn errors_csv(report: &ConvergenceReport) -> String {
    let mut s = String::from("h,tau,l2_error,eoc\n");
    for r in &report.rows {
        let eoc = r.eoc.map(|e| e.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{}", r.h, r.tau, r.l2_error, eoc);
    }
    s
}

pub fn energy_csv(trace: &[EnergyRecord]) -> String {
    let mut s = String::from("step,t,energy,dissipation,work,mu\n");
    for r in trace {
        let _ = writeln!(s, "{},{},{},{},{},{}", r.step, r.t, r.energy, r.dissipation, r.work, r.mu);
    }
    s
}

/// Samples the velocity on a `grid × grid` lattice spanning the bounding box
/// of the mesh; lattice points outside the domain are skipped.
pub fn field_csv(space: &FeSpace, form: &OneForm, grid: usize) -> String {
    let mesh = space.mesh();
    let (mut lo, mut hi) = (Point2::new(f64::INFINITY, f64::INFINITY), Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for v in mesh.vertices() {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    let mut s = String::from("x,y,ux,uy,|u|\n");
    let mut hint = 0;
    for j in 0..grid {
        let y = lo.y + (hi.y - lo.y) * j as f64 / (grid - 1) as f64;
        for i in 0..grid {
            let x = lo.x + (hi.x - lo.x) * i as f64 / (grid - 1) as f64;
            let p = Point2::new(x, y);
            if let Some(t) = mesh.locate(&p, hint).element() {
                hint = t;
                let u = space.eval(form, t, &mesh.map(t).to_reference(&p));
                let _ = writeln!(s, "{},{},{},{},{}", x, y, u.x, u.y, u.norm());
            }
        }
    }
    s
}

pub fn field_file_name(t: f64) -> String {
    format!("field_{t:.4}.csv")
}

/// Writes `energy.csv` and the final field snapshot; returns the written paths.
pub fn write_run(dir: &Path, outcome: &RunOutcome) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let energy = dir.join("energy.csv");
    std::fs::write(&energy, energy_csv(&outcome.trace))?;
    let t = outcome.trace.last().map_or(0.0, |r| r.t);
    let field = dir.join(field_file_name(t));
    std::fs::write(&field, field_csv(&outcome.space, &outcome.omega, outcome.spec.grid))?;
    let mut written = vec![energy, field];
    if let Some(e) = outcome.l2_error {
        let report = ConvergenceReport::from_errors(vec![(outcome.h, outcome.tau, e)]);
        let errors = dir.join("errors.csv");
        std::fs::write(&errors, errors_csv(&report))?;
        written.push(errors);
    }
    Ok(written)
}

pub fn write_convergence(dir: &Path, report: &ConvergenceReport, finest: &RunOutcome) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let errors = dir.join("errors.csv");
    std::fs::write(&errors, errors_csv(report))?;
    let energy = dir.join("energy.csv");
    std::fs::write(&energy, energy_csv(&finest.trace))?;
    Ok(vec![errors, energy])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::ConvergenceRow;
    use crate::mesh::{Mesh, Rect};
    use crate::projection::Projector;
    use nalgebra::Vector2;
    use std::sync::Arc;

    #[test]
    fn errors_table() {
        let report = ConvergenceReport {
            rows: vec![
                ConvergenceRow { h: 0.2, tau: 0.1, l2_error: 0.4, eoc: None },
                ConvergenceRow { h: 0.1, tau: 0.05, l2_error: 0.1, eoc: Some(2.0) },
            ],
        };
        assert_eq!(errors_csv(&report), "h,tau,l2_error,eoc\n0.2,0.1,0.4,\n0.1,0.05,0.1,2\n");
    }

    #[test]
    fn field_sampling() {
        let space = Arc::new(FeSpace::new(Arc::new(Mesh::structured(3, 3, Rect::centered_square(0.5))), crate::Order::First));
        let p = Projector::new(space.clone()).unwrap();
        let form = p.interpolate(&|_| Vector2::new(3.0, 4.0));
        let csv = field_csv(&space, &form, 5);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 26);
        assert_eq!(lines[0], "x,y,ux,uy,|u|");
        let last: Vec<f64> = lines[25].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(&last[..2], &[0.5, 0.5]);
        assert!((last[4] - 5.0).abs() < 1e-12);
        assert_eq!(field_file_name(1.0), "field_1.0000.csv");
    }
}
