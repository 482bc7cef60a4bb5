//! Scenario files: TOML documents with a `schema_version`, describing a
//! torus, a bundle, a holomorphic family of Higgs pairs and solver
//! tolerances.

use serde::Deserialize;

use crate::error::{LabError, Result};
use crate::family::{FamilyGenerator, FamilyOptions, FieldKind, GeneratorTerm};
use crate::form::Bundle;
use crate::geometry::{TorusGeometry, Twist, C64};
use crate::hodge::HodgeOptions;
use crate::hym::HymOptions;
use std::sync::Arc;

pub const SCHEMA_VERSION: u32 = 1;

pub const TASKS: [&str; 7] = ["hym", "pw-metric", "pw-curvature", "sigma", "fiber-integral", "hyperkahler", "verify"];

/// Keys accepted by `--tol-override`.
pub const OVERRIDE_KEYS: [&str; 8] = ["tol_hym", "tol_harm", "tol_fd", "cg_tol", "max_steps", "eps", "holomorphy_tol", "sectional_directions"];

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    pub tasks: Vec<String>,
    pub geometry: GeometrySpec,
    pub bundle: BundleSpec,
    pub family: FamilySpec,
    #[serde(default)]
    pub solver: SolverSpec,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub n: Option<usize>,
    /// `(L_α, M_α)` per complex direction.
    pub periods: Vec<[f64; 2]>,
    /// Row-major `g_{αβ̄}` as `[re, im]` pairs.
    pub metric: Vec<[f64; 2]>,
    #[serde(rename = "N")]
    pub grid: usize,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleSpec {
    pub rank: usize,
    /// Phases in turns, one row per fiber index and one column per real direction.
    pub twist: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub base_dim: usize,
    pub center: Vec<[f64; 2]>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_true")]
    pub richardson: bool,
    #[serde(default)]
    pub terms: Vec<TermSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    /// `"higgs"` (a `dz^α` component) or `"connection"` (a `dz̄^α` component).
    pub form: String,
    pub direction: usize,
    pub monomial: Vec<u32>,
    /// Row-major `r × r` matrix as `[re, im]` pairs.
    pub matrix: Vec<[f64; 2]>,
    pub mode: Option<Vec<i64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub tol_hym: f64,
    pub tol_harm: f64,
    /// Tolerance for finite-difference-limited identities at `ε = 1e−2`;
    /// scaled by `(ε/1e−2)²`.
    pub tol_fd: f64,
    pub max_steps: usize,
    pub cg_tol: f64,
    pub holomorphy_tol: f64,
    pub sectional_directions: usize,
    /// Size of the seeded metric perturbation the reported flow starts from.
    pub initial_perturbation: f64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec {
            tol_hym: 1e-10,
            tol_harm: 1e-7,
            tol_fd: 1e-5,
            max_steps: 2000,
            cg_tol: 1e-10,
            holomorphy_tol: 1e-9,
            sectional_directions: 20,
            initial_perturbation: 0.05,
        }
    }
}

fn default_eps() -> f64 {
    1e-2
}

fn default_true() -> bool {
    true
}

fn c(v: &[f64; 2]) -> C64 {
    C64::new(v[0], v[1])
}

fn bad(msg: impl Into<String>) -> LabError {
    LabError::Scenario(msg.into())
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad(format!("schema_version {} is not supported (expected {SCHEMA_VERSION})", self.schema_version)));
        }
        if self.tasks.is_empty() {
            return Err(bad("task list is empty"));
        }
        for t in &self.tasks {
            if !TASKS.contains(&t.as_str()) {
                return Err(bad(format!("unknown task {t:?}")));
            }
        }
        let n = self.geometry.periods.len();
        if let Some(m) = self.geometry.n {
            if m != n {
                return Err(bad(format!("geometry.n = {m} but {n} period pairs given")));
            }
        }
        if self.geometry.metric.len() != n * n {
            return Err(bad("geometry.metric must have n² entries"));
        }
        if !self.geometry.grid.is_power_of_two() || self.geometry.grid < 4 {
            return Err(bad(format!("N = {} must be a power of two ≥ 4", self.geometry.grid)));
        }
        let r = self.bundle.rank;
        if r == 0 || r > 3 {
            return Err(bad("bundle rank must be 1, 2 or 3"));
        }
        let f = &self.family;
        if f.center.len() != f.base_dim {
            return Err(bad("family.center must have base_dim entries"));
        }
        if !(f.eps > 0.0 && f.eps.is_finite()) {
            return Err(bad("family.eps must be positive"));
        }
        for (k, t) in f.terms.iter().enumerate() {
            if t.form != "higgs" && t.form != "connection" {
                return Err(bad(format!("term {k}: form must be \"higgs\" or \"connection\"")));
            }
            if t.direction >= n {
                return Err(bad(format!("term {k}: direction out of range")));
            }
            if t.monomial.len() != f.base_dim {
                return Err(bad(format!("term {k}: monomial must have base_dim exponents")));
            }
            if t.matrix.len() != r * r {
                return Err(bad(format!("term {k}: matrix must have rank² entries")));
            }
            if let Some(m) = &t.mode {
                if m.len() != 2 * n {
                    return Err(bad(format!("term {k}: mode must list one integer per real direction")));
                }
            }
        }
        let s = &self.solver;
        for (k, v) in [("tol_hym", s.tol_hym), ("tol_harm", s.tol_harm), ("tol_fd", s.tol_fd), ("cg_tol", s.cg_tol), ("holomorphy_tol", s.holomorphy_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(format!("solver.{k} must be positive, got {v}")));
            }
        }
        if !(s.initial_perturbation >= 0.0 && s.initial_perturbation.is_finite()) {
            return Err(bad("solver.initial_perturbation must be non-negative"));
        }
        if s.max_steps == 0 {
            return Err(bad("solver.max_steps must be positive"));
        }
        Ok(())
    }

    /// Apply a `KEY=VAL` override and re-validate.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("override {kv:?} is not KEY=VAL")))?;
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad(format!("override {k}: {v:?} is not a number")));
        let int = |v: &str| v.trim().parse::<usize>().map_err(|_| bad(format!("override {k}: {v:?} is not an integer")));
        let s = &mut self.solver;
        match k.trim() {
            "tol_hym" => s.tol_hym = num(v)?,
            "tol_harm" => s.tol_harm = num(v)?,
            "tol_fd" => s.tol_fd = num(v)?,
            "cg_tol" => s.cg_tol = num(v)?,
            "holomorphy_tol" => s.holomorphy_tol = num(v)?,
            "max_steps" => s.max_steps = int(v)?,
            "sectional_directions" => s.sectional_directions = int(v)?,
            "eps" => self.family.eps = num(v)?,
            other => return Err(bad(format!("unknown override key {other:?}; expected one of {OVERRIDE_KEYS:?}"))),
        }
        self.validate()
    }

    pub fn has_task(&self, t: &str) -> bool {
        self.tasks.iter().any(|x| x == t)
    }

    pub fn geometry(&self) -> Result<TorusGeometry> {
        let periods: Vec<(f64, f64)> = self.geometry.periods.iter().map(|p| (p[0], p[1])).collect();
        let metric: Vec<C64> = self.geometry.metric.iter().map(c).collect();
        TorusGeometry::new(&periods, &metric, self.geometry.grid).map_err(|e| bad(e.to_string()))
    }

    pub fn bundle(&self) -> Result<Arc<Bundle>> {
        let geom = self.geometry()?;
        let dims = geom.real_dims();
        let twist = match &self.bundle.twist {
            None => Twist::trivial(self.bundle.rank, dims),
            Some(t) => {
                if t.len() != self.bundle.rank {
                    return Err(bad("bundle.twist must have one row per fiber index"));
                }
                Twist::new(t.clone())?
            }
        };
        Bundle::new(geom, twist).map_err(|e| bad(e.to_string()))
    }

    pub fn generator(&self) -> Result<FamilyGenerator> {
        let bundle = self.bundle()?;
        let terms = self
            .family
            .terms
            .iter()
            .map(|t| GeneratorTerm {
                field: if t.form == "higgs" { FieldKind::Higgs } else { FieldKind::Connection },
                direction: t.direction,
                monomial: t.monomial.clone(),
                coefficient: t.matrix.iter().map(c).collect(),
                mode: t.mode.clone(),
            })
            .collect();
        FamilyGenerator::new(&bundle, self.family.base_dim, terms).map_err(|e| bad(e.to_string()))
    }

    pub fn center(&self) -> Vec<C64> {
        self.family.center.iter().map(c).collect()
    }

    pub fn family_options(&self) -> FamilyOptions {
        FamilyOptions {
            eps: self.family.eps,
            richardson: self.family.richardson,
            hym: HymOptions { tol: self.solver.tol_hym.min(1e-12), max_steps: self.solver.max_steps, ..HymOptions::default() },
            holomorphy_tol: self.solver.holomorphy_tol,
        }
    }

    pub fn hodge_options(&self, seed: u64) -> HodgeOptions {
        HodgeOptions { cg_tol: self.solver.cg_tol, seed, ..HodgeOptions::default() }
    }

    /// Tolerance for an `O(ε²)`-limited identity.
    pub fn tol_fd(&self) -> f64 {
        self.solver.tol_fd * (self.family.eps / 1e-2).powi(2)
    }
}

/// Scenarios shipped with the crate, by name.
pub const BUNDLED: [(&str, &str); 4] = [
    ("rank1-tstar-jacobian", include_str!("../scenarios/rank1-tstar-jacobian.toml")),
    ("rank1-pure-higgs", include_str!("../scenarios/rank1-pure-higgs.toml")),
    ("rank2-normal-n1", include_str!("../scenarios/rank2-normal-n1.toml")),
    ("rank1-surface-n2", include_str!("../scenarios/rank1-surface-n2.toml")),
];

pub fn bundled(name: &str) -> Option<Scenario> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| Scenario::from_toml(t).expect("bundled scenarios are valid"))
}
