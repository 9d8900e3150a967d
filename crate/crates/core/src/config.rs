//! Run configuration, its canonical serialization and content hash.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{default_window, make_grid, LatticeGrid};
use crate::model::{catalog_model, DomainKind, GameModel};
use crate::vi_solver::SolverSettings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelBlock {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainKind>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_hi: Option<f64>,
    pub nx: usize,
    pub nt: usize,
}

impl Default for GridBlock {
    fn default() -> Self {
        GridBlock { x_lo: None, x_hi: None, nx: 400, nt: 400 }
    }
}

/// Approach-sequence experiment for the optimal stopping times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceBlock {
    pub n_paths: usize,
    pub target_t: f64,
    /// Interior target state; defaults to the model's `x_ref`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interior_y: Option<f64>,
    pub eps0: f64,
    pub dt0: f64,
    pub levels: usize,
}

impl Default for ConvergenceBlock {
    fn default() -> Self {
        ConvergenceBlock { n_paths: 10_000, target_t: 0.25, interior_y: None, eps0: 0.02, dt0: 0.02, levels: 13 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentsBlock {
    pub n_paths: usize,
    /// Number of equally spaced start points across the window.
    pub points: usize,
}

impl Default for MomentsBlock {
    fn default() -> Self {
        MomentsBlock { n_paths: 20_000, points: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimBlock {
    pub n_paths: usize,
    /// Defaults to `T / 2000`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_sim: Option<f64>,
    pub master_seed: u64,
    pub t0: f64,
    /// Defaults to the model's `x_ref`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    /// Deviation size in units of `dx`.
    pub delta_nodes: f64,
    pub convergence: ConvergenceBlock,
    pub moments: MomentsBlock,
}

impl Default for SimBlock {
    fn default() -> Self {
        SimBlock {
            n_paths: 100_000,
            dt_sim: None,
            master_seed: 20_240_917,
            t0: 0.0,
            x0: None,
            delta_nodes: 4.0,
            convergence: ConvergenceBlock::default(),
            moments: MomentsBlock::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsBlock {
    /// Coarsest level of the refinement study.
    pub base_nx: usize,
    pub base_nt: usize,
    /// Number of levels, each halving both spacings.
    pub levels: usize,
    /// Solver tolerances used by every solve of the run.
    pub tolerances: SolverSettings,
}

impl Default for DiagnosticsBlock {
    fn default() -> Self {
        DiagnosticsBlock { base_nx: 320, base_nt: 320, levels: 3, tolerances: SolverSettings::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputBlock {
    pub dir: String,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelBlock,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub sim: SimBlock,
    #[serde(default)]
    pub diagnostics: DiagnosticsBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

impl RunConfig {
    /// Catalog model with every other block at its default.
    pub fn catalog(name: &str) -> Self {
        RunConfig {
            model: ModelBlock { name: name.into(), domain: None, params: BTreeMap::new() },
            grid: GridBlock::default(),
            sim: SimBlock::default(),
            diagnostics: DiagnosticsBlock::default(),
            output: OutputBlock::default(),
        }
    }

    /// Parses JSON; errors name the offending field by its dotted path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." { "config".to_string() } else { path };
            Error::invalid(field, e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::invalid("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Sorted keys, no whitespace, shortest round-trip floats.
    pub fn canonical_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = value.as_object_mut() {
            obj.remove("output");
        }
        serde_json::to_string(&value).expect("value serializes")
    }

    /// Hex SHA-256 of the canonical serialization. Output paths are excluded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn model(&self) -> Result<GameModel> {
        catalog_model(&self.model.name, self.model.domain, &self.model.params)
    }

    pub fn window(&self, model: &GameModel) -> (f64, f64) {
        let (lo, hi) = default_window(model);
        (self.grid.x_lo.unwrap_or(lo), self.grid.x_hi.unwrap_or(hi))
    }

    pub fn lattice(&self, model: &GameModel) -> Result<LatticeGrid> {
        make_grid(model, self.window(model), self.grid.nx, self.grid.nt)
    }

    pub fn settings(&self) -> SolverSettings {
        self.diagnostics.tolerances
    }

    pub fn dt_sim(&self, model: &GameModel) -> f64 {
        self.sim.dt_sim.unwrap_or(model.horizon / 2000.0)
    }

    pub fn x0(&self, model: &GameModel) -> f64 {
        self.sim.x0.unwrap_or(model.x_ref)
    }

    /// Checks the blocks that the model and grid constructors do not see.
    pub fn validate(&self) -> Result<()> {
        let s = &self.sim;
        if s.n_paths == 0 {
            return Err(Error::invalid("sim.n_paths", "must be positive"));
        }
        if let Some(dt) = s.dt_sim {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::invalid("sim.dt_sim", "must be positive"));
            }
        }
        if !(s.delta_nodes >= 0.0 && s.delta_nodes.is_finite()) {
            return Err(Error::invalid("sim.delta_nodes", "must be non-negative"));
        }
        if s.convergence.n_paths == 0 || s.convergence.levels == 0 {
            return Err(Error::invalid("sim.convergence", "needs paths and at least one level"));
        }
        if !(s.convergence.eps0 > 0.0 && s.convergence.dt0 > 0.0) {
            return Err(Error::invalid("sim.convergence.eps0", "approach steps must be positive"));
        }
        if s.moments.points < 2 || s.moments.n_paths == 0 {
            return Err(Error::invalid("sim.moments.points", "need at least two start points"));
        }
        let d = &self.diagnostics;
        if d.levels == 0 {
            return Err(Error::invalid("diagnostics.levels", "must be positive"));
        }
        let t = &d.tolerances;
        if !(t.tol_solve > 0.0 && t.tol_contact >= 0.0 && t.tol_grad_rel >= 0.0 && t.max_iters > 0) {
            return Err(Error::invalid("diagnostics.tolerances", "tolerances must be positive"));
        }
        if !(t.omega > 0.0 && t.omega < 2.0) {
            return Err(Error::invalid("diagnostics.tolerances.omega", "must lie in (0, 2)"));
        }
        Ok(())
    }
}
