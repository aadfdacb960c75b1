//! Flat `key = value` experiment configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::Rect;
use crate::solver::Scheme;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    Exp1,
    Exp2,
    Exp3,
    Exp5,
    Exp6,
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "exp1" => Ok(Experiment::Exp1),
            "exp2" => Ok(Experiment::Exp2),
            "exp3" => Ok(Experiment::Exp3),
            "exp5" => Ok(Experiment::Exp5),
            "exp6" => Ok(Experiment::Exp6),
            other => Err(Error::Config(format!("unknown experiment '{other}'"))),
        }
    }
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Exp1 => "exp1",
            Experiment::Exp2 => "exp2",
            Experiment::Exp3 => "exp3",
            Experiment::Exp5 => "exp5",
            Experiment::Exp6 => "exp6",
        }
    }

    /// Rectangular domain the experiment is posed on; `None` for the
    /// free-form domain of exp6.
    pub fn domain(self) -> Option<Rect> {
        match self {
            Experiment::Exp2 => Some(Rect::centered_square(1.0)),
            Experiment::Exp6 => None,
            _ => Some(Rect::centered_square(0.5)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeshSource {
    /// `n × n` cells of the experiment's square, two triangles each.
    Structured(usize),
    /// Hexagonal disk of unit radius with the given number of rings.
    Disk(usize),
    File(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TauRule {
    Fixed(f64),
    PerH(f64),
}

impl TauRule {
    pub fn tau(self, h: f64) -> f64 {
        match self {
            TauRule::Fixed(t) => t,
            TauRule::PerH(c) => c * h,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub mesh: MeshSource,
    pub scheme: Scheme,
    pub conservative: bool,
    pub eps: f64,
    pub tau: TauRule,
    pub t_final: f64,
    pub out: Option<PathBuf>,
    /// Side length of the uniform sampling grid for field snapshots.
    pub grid: usize,
}

impl ExperimentSpec {
    pub fn defaults(experiment: Experiment) -> Self {
        let (mesh, tau, t_final) = match experiment {
            Experiment::Exp1 => (MeshSource::Structured(16), TauRule::PerH(0.065804), 1.0),
            Experiment::Exp2 => (MeshSource::Structured(30), TauRule::PerH(0.032902), 1.0),
            Experiment::Exp3 => (MeshSource::Structured(16), TauRule::PerH(0.06580), 1.0),
            Experiment::Exp5 => (MeshSource::Structured(8), TauRule::Fixed(0.01), 7.93),
            Experiment::Exp6 => (MeshSource::Disk(8), TauRule::Fixed(0.01), 1.0),
        };
        ExperimentSpec {
            experiment,
            mesh,
            scheme: Scheme::Order2,
            conservative: false,
            eps: 0.0,
            tau,
            t_final,
            out: None,
            grid: 128,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        let tau_ok = match self.tau {
            TauRule::Fixed(t) => positive(t),
            TauRule::PerH(c) => positive(c),
        };
        if !tau_ok {
            return Err(Error::Config(format!("timestep rule must be positive: {:?}", self.tau)));
        }
        if !positive(self.t_final) {
            return Err(Error::Config(format!("final time must be positive, got {}", self.t_final)));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("viscosity must be non-negative, got {}", self.eps)));
        }
        if self.grid < 2 {
            return Err(Error::Config("sampling grid needs at least 2 points per side".into()));
        }
        match (&self.mesh, self.experiment) {
            (MeshSource::Structured(0), _) | (MeshSource::Disk(0), _) => {
                Err(Error::Config("mesh resolution must be positive".into()))
            }
            (MeshSource::Disk(_), e) if e != Experiment::Exp6 => {
                Err(Error::Config(format!("{} is posed on a square, not a disk", e.name())))
            }
            (MeshSource::Structured(_), Experiment::Exp6) => {
                Err(Error::Config("exp6 needs a disk or a mesh file".into()))
            }
            _ => match self.experiment {
                Experiment::Exp3 | Experiment::Exp5 | Experiment::Exp6 if self.eps != 0.0 => {
                    Err(Error::Config(format!("{} is inviscid", self.experiment.name())))
                }
                _ => Ok(()),
            },
        }
    }

    /// Applies `key = value` pairs; unknown keys are rejected.
    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<()> {
        for (k, v) in pairs {
            let bad = |what: &str| Error::Config(format!("invalid {what} '{v}' for key '{k}'"));
            let float = || v.parse::<f64>().map_err(|_| bad("number"));
            let uint = || v.parse::<usize>().map_err(|_| bad("integer"));
            match k.as_str() {
                "exp" => self.experiment = v.parse()?,
                "n" => self.mesh = MeshSource::Structured(uint()?),
                "rings" => self.mesh = MeshSource::Disk(uint()?),
                "mesh" => self.mesh = MeshSource::File(PathBuf::from(v)),
                "order" => self.scheme = Scheme::from_degree(uint()?).ok_or_else(|| bad("order"))?,
                "conservative" => self.conservative = parse_bool(v).ok_or_else(|| bad("boolean"))?,
                "eps" => self.eps = float()?,
                "tau" => self.tau = TauRule::Fixed(float()?),
                "tau_per_h" => self.tau = TauRule::PerH(float()?),
                "t_final" | "T" => self.t_final = float()?,
                "out" => self.out = Some(PathBuf::from(v)),
                "grid" => self.grid = uint()?,
                _ => return Err(Error::Config(format!("unknown key '{k}'"))),
            }
        }
        Ok(())
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Some(true),
        "false" | "0" | "no" | "off" => Some(false),
        _ => None,
    }
}

/// Parses `key = value` lines. `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

pub fn load_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_pairs(&text)
}

/// Builds a spec from config pairs: `exp` selects the defaults, the remaining
/// keys override them.
pub fn spec_from_pairs(default_exp: Option<Experiment>, pairs: &[(String, String)]) -> Result<ExperimentSpec> {
    let exp = match pairs.iter().rev().find(|(k, _)| k == "exp") {
        Some((_, v)) => v.parse()?,
        None => default_exp.ok_or_else(|| Error::Config("no experiment selected".into()))?,
    };
    let mut spec = ExperimentSpec::defaults(exp);
    spec.apply(pairs)?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_apply() {
        let text = "# sweep\nexp = exp1\norder=1\n\nconservative = yes # trailing\ntau_per_h = 0.1\nn = 8\n";
        let pairs = parse_pairs(text).unwrap();
        assert_eq!(pairs.len(), 5);
        let spec = spec_from_pairs(None, &pairs).unwrap();
        assert_eq!(spec.experiment, Experiment::Exp1);
        assert_eq!(spec.scheme, Scheme::Order1);
        assert!(spec.conservative);
        assert_eq!(spec.tau, TauRule::PerH(0.1));
        assert_eq!(spec.mesh, MeshSource::Structured(8));
        spec.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_pairs("no equals sign").is_err());
        assert!(parse_pairs("= 3").is_err());
        let mut spec = ExperimentSpec::defaults(Experiment::Exp1);
        assert!(spec.apply(&[("colour".into(), "blue".into())]).is_err());
        assert!(spec.apply(&[("order".into(), "3".into())]).is_err());
        assert!(spec.apply(&[("eps".into(), "x".into())]).is_err());
        spec.tau = TauRule::PerH(-1.0);
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::defaults(Experiment::Exp3);
        spec.eps = 0.1;
        assert!(spec.validate().is_err());
        let mut spec = ExperimentSpec::defaults(Experiment::Exp6);
        spec.mesh = MeshSource::Structured(4);
        assert!(spec.validate().is_err());
        assert!("exp4".parse::<Experiment>().is_err());
    }

    #[test]
    fn domains() {
        assert_eq!(Experiment::Exp2.domain(), Some(Rect::centered_square(1.0)));
        assert_eq!(Experiment::Exp5.domain(), Some(Rect::centered_square(0.5)));
        assert_eq!(Experiment::Exp6.domain(), None);
        assert_eq!(TauRule::PerH(0.5).tau(0.2), 0.1);
    }
}
