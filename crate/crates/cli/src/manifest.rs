//! Experiment manifests: TOML files with top-level settings, a `[manifold]`
//! table and a `[params]` table.

use ratpoints::manifold::{Manifold, ManifoldSpec};
use ratpoints::pbox::AnalyticFn;
use ratpoints::rats::PsiRule;
use ratpoints::{Error, Result};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Count,
    Coverage,
    Cells,
    PboxDecay,
    DualCheck,
    Dim,
    Ubiquity,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Count => "count",
            Kind::Coverage => "coverage",
            Kind::Cells => "cells",
            Kind::PboxDecay => "pbox-decay",
            Kind::DualCheck => "dual-check",
            Kind::Dim => "dim",
            Kind::Ubiquity => "ubiquity",
        }
    }

    pub const ALL: [Kind; 7] = [
        Kind::Count,
        Kind::Coverage,
        Kind::Cells,
        Kind::PboxDecay,
        Kind::DualCheck,
        Kind::Dim,
        Kind::Ubiquity,
    ];
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// `Q` grid.
    pub q: Option<Vec<i64>>,
    /// `ε` rule evaluated at `Q`.
    pub eps: Option<String>,
    /// `ψ` rule: a constant or `c*q^-a`.
    pub psi: Option<String>,
    pub delta: Option<f64>,
    /// Constant coverage radius; otherwise `ρ_0 (ψ^m Q^{d+1})^{-1/d}`.
    pub rho: Option<f64>,
    pub rho0: Option<f64>,
    pub delta0: Option<f64>,
    /// Query box: `[lo, hi]` per axis, or `[lo_1, hi_1, …]`.
    #[serde(rename = "box")]
    pub bbox: Option<Vec<f64>>,
    pub grid_h: Option<f64>,
    /// `Q_*` grid for the cells experiment.
    pub q_star: Option<Vec<f64>>,
    /// `ψ_*` rule evaluated at `Q_*`.
    pub psi_star: Option<String>,
    pub kappa: Option<f64>,
    pub c0: Option<f64>,
    /// `[center…, radius]` of the sup-norm ball `B`.
    pub ball: Option<Vec<f64>>,
    /// `ball` or `uniform`.
    pub size: Option<String>,
    pub per_axis: Option<usize>,
    /// Randomized Minkowski searches with `κ = κ_0`.
    pub trials: Option<usize>,
    /// Functions of the Wronski family, e.g. `poly:0,0,1`, `exp:2`, `sin:1`.
    pub functions: Option<Vec<String>>,
    pub theta: Option<Vec<f64>>,
    pub halvings: Option<usize>,
    /// Random membership comparisons against the box scan.
    pub checks: Option<usize>,
    pub samples: Option<usize>,
    pub tau: Option<f64>,
    pub t: Option<Vec<u32>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub kind: Kind,
    pub manifold: Option<ManifoldSpec>,
    #[serde(default)]
    pub params: Params,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    /// Fill the `seconds` column; off by default so that output is reproducible.
    #[serde(default)]
    pub timing: bool,
}

fn missing(kind: Kind, what: &str) -> Error {
    Error::Manifest(format!("kind '{}' needs params.{what}", kind.name()))
}

fn nonempty<T: Clone>(v: &Option<Vec<T>>, kind: Kind, what: &str) -> Result<Vec<T>> {
    match v {
        None => Err(missing(kind, what)),
        Some(v) if v.is_empty() => Err(Error::Manifest(format!("params.{what} must not be empty"))),
        Some(v) => Ok(v.clone()),
    }
}

fn increasing<T: PartialOrd>(v: &[T], what: &str) -> Result<()> {
    if v.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Manifest(format!("params.{what} must be strictly increasing")));
    }
    Ok(())
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let m: Manifest = toml::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn build_manifold(&self) -> Result<Manifold> {
        self.manifold
            .as_ref()
            .ok_or_else(|| Error::Manifest(format!("kind '{}' needs a [manifold] table", self.kind.name())))?
            .build()
    }

    /// Query box, defaulting to the manifold domain.
    pub fn query_box(&self, m: &Manifold) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = m.d();
        match &self.params.bbox {
            None => Ok((m.lo().to_vec(), m.hi().to_vec())),
            Some(b) if b.len() == 2 => Ok((vec![b[0]; d], vec![b[1]; d])),
            Some(b) if b.len() == 2 * d => Ok((b.iter().step_by(2).copied().collect(), b.iter().skip(1).step_by(2).copied().collect())),
            Some(_) => Err(Error::Manifest(format!("params.box needs 2 or {} numbers", 2 * d))),
        }
    }

    pub fn psi_rule(&self) -> Result<PsiRule> {
        PsiRule::parse(self.params.psi.as_deref().ok_or_else(|| missing(self.kind, "psi"))?)
    }

    /// Checks that every name resolves and every grid the kind uses is non-empty.
    pub fn validate(&self) -> Result<()> {
        let k = self.kind;
        let p = &self.params;
        if self.threads == Some(0) {
            return Err(Error::Manifest("threads must be at least 1".into()));
        }
        if k != Kind::PboxDecay {
            let m = self.build_manifold()?;
            self.query_box(&m)?;
        }
        match k {
            Kind::Count => {
                let q = nonempty(&p.q, k, "q")?;
                increasing(&q, "q")?;
                PsiRule::parse(p.eps.as_deref().ok_or_else(|| missing(k, "eps"))?)?;
            }
            Kind::Coverage => {
                let q = nonempty(&p.q, k, "q")?;
                increasing(&q, "q")?;
                self.psi_rule()?;
            }
            Kind::Cells => {
                let q = nonempty(&p.q_star, k, "q_star")?;
                increasing(&q, "q_star")?;
                PsiRule::parse(p.psi_star.as_deref().ok_or_else(|| missing(k, "psi_star"))?)?;
                p.kappa.ok_or_else(|| missing(k, "kappa"))?;
                if let Some(s) = &p.size {
                    if s != "ball" && s != "uniform" {
                        return Err(Error::Manifest(format!("params.size must be 'ball' or 'uniform', got '{s}'")));
                    }
                }
            }
            Kind::PboxDecay => {
                for f in nonempty(&p.functions, k, "functions")? {
                    AnalyticFn::parse(&f)?;
                }
                let theta = nonempty(&p.theta, k, "theta")?;
                if theta.len() != p.functions.as_ref().map_or(0, Vec::len) {
                    return Err(Error::Manifest("params.theta needs one entry per function".into()));
                }
                if p.bbox.as_ref().is_some_and(|b| b.len() != 2) {
                    return Err(Error::Manifest("params.box needs [lo, hi]".into()));
                }
            }
            Kind::DualCheck => {
                if p.samples == Some(0) {
                    return Err(Error::Manifest("params.samples must be positive".into()));
                }
            }
            Kind::Dim => {
                let q = nonempty(&p.q, k, "q")?;
                increasing(&q, "q")?;
                if q.len() < 4 {
                    return Err(Error::Manifest("params.q needs at least 4 values for a dimension fit".into()));
                }
                p.tau.ok_or_else(|| missing(k, "tau"))?;
            }
            Kind::Ubiquity => {
                let t = nonempty(&p.t, k, "t")?;
                increasing(&t, "t")?;
                self.psi_rule()?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_count_manifest() {
        let m = Manifest::parse(
            r#"
kind = "count"
seed = 3
[manifold]
name = "circle"
r = 3
[params]
q = [50, 100]
eps = "q^-2.2"
"#,
        )
        .unwrap();
        assert_eq!(m.kind, Kind::Count);
        assert_eq!(m.seed, Some(3));
        assert!(!m.timing);
    }

    #[test]
    fn empty_grid_rejected() {
        let err = Manifest::parse(
            "kind = \"count\"\n[manifold]\nname = \"parabola\"\n[params]\nq = []\neps = \"0.1\"\n",
        );
        assert!(matches!(err, Err(Error::Manifest(_))));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(Manifest::parse("kind = \"dim\"\nbogus = 1\n").is_err());
        assert!(Manifest::parse("kind = \"teleport\"\n").is_err());
        let bad_fn = "kind = \"pbox-decay\"\n[params]\nfunctions = [\"tan:1\"]\ntheta = [1.0]\n";
        assert!(Manifest::parse(bad_fn).is_err());
    }
}
