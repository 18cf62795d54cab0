//! JSON model and experiment files.

use std::path::{Path, PathBuf};

use contactlab_core::model::{
    build_space, Boundary, DeathRates, Kernel, LatticeWindow, MarkSet, RateModel, SpaceSpec, StateSpace, Stencil,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("invalid model: {0}")]
    Model(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Finite,
    Lattice,
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryConfig {
    Periodic,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    #[serde(rename = "type")]
    pub kind: SpaceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marks: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<Vec<f64>>,
    /// Finite spaces: one weight per point. Lattices: a single site weight.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub names: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StencilConfig {
    #[serde(default)]
    pub nearest_neighbor: bool,
    #[serde(default)]
    pub offsets: Vec<Vec<i64>>,
    #[serde(default)]
    pub values: Vec<f64>,
    /// Multiplies every value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum KernelConfig {
    /// Row-major `n × n` values.
    Dense { values: Vec<f64> },
    Stencil(StencilConfig),
    Factorized { alpha: StencilConfig, q: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeathConfig {
    Constant(f64),
    PerPoint { per_point: Vec<f64> },
    PerMark { per_mark: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub space: SpaceConfig,
    pub birth: KernelConfig,
    pub death: DeathConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump: Option<KernelConfig>,
}

impl SpaceConfig {
    fn window(&self) -> Result<LatticeWindow, ConfigError> {
        let d = self.d.ok_or_else(|| ConfigError::Model("lattice needs `d`".into()))?;
        let r = self.radius.ok_or_else(|| ConfigError::Model("lattice needs `R`".into()))?;
        if d == 0 || r < 0 {
            return Err(ConfigError::Model("`d` must be positive and `R` non-negative".into()));
        }
        let boundary = match self.boundary.unwrap_or(BoundaryConfig::Periodic) {
            BoundaryConfig::Periodic => Boundary::Periodic,
            BoundaryConfig::Unbounded => Boundary::Unbounded,
        };
        let w = LatticeWindow::new(d, r, boundary);
        Ok(match self.weights.as_deref() {
            None => w,
            Some([s]) => w.with_site_weight(*s),
            Some(_) => return Err(ConfigError::Model("lattice `weights` takes one site weight".into())),
        })
    }

    pub fn to_spec(&self) -> Result<SpaceSpec, ConfigError> {
        Ok(match self.kind {
            SpaceKind::Finite => {
                let weights = self
                    .weights
                    .clone()
                    .ok_or_else(|| ConfigError::Model("finite space needs `weights`".into()))?;
                match &self.names {
                    Some(names) => SpaceSpec::Finite {
                        names: names.clone(),
                        weights,
                    },
                    None => SpaceSpec::finite(weights),
                }
            }
            SpaceKind::Lattice => SpaceSpec::Lattice(self.window()?),
            SpaceKind::Product => {
                let nu = self.nu.clone().ok_or_else(|| ConfigError::Model("product space needs `nu`".into()))?;
                let names = self
                    .marks
                    .clone()
                    .unwrap_or_else(|| (0..nu.len()).map(|i| i.to_string()).collect());
                SpaceSpec::Product(self.window()?, MarkSet::new(names, nu))
            }
        })
    }
}

fn stencil(c: &StencilConfig, dim: usize) -> Result<Stencil, ConfigError> {
    let s = if c.nearest_neighbor {
        if !c.offsets.is_empty() || !c.values.is_empty() {
            return Err(ConfigError::Model("`nearest_neighbor` excludes offsets/values".into()));
        }
        Stencil::nearest_neighbor(dim)
    } else {
        Stencil::new(dim, c.offsets.clone(), c.values.clone()).map_err(|e| ConfigError::Model(e.to_string()))?
    };
    Ok(match c.scale {
        Some(k) => s.scaled(k),
        None => s,
    })
}

fn kernel(c: &KernelConfig, space: &StateSpace) -> Result<Kernel, ConfigError> {
    let dim = space.window().map(|w| w.dim);
    let need_dim = || dim.ok_or_else(|| ConfigError::Model("stencil kernels need a lattice space".into()));
    let k = match c {
        KernelConfig::Dense { values } => {
            let n = space.len();
            if values.len() != n * n {
                return Err(ConfigError::Model(format!(
                    "dense kernel has {} values, expected {}",
                    values.len(),
                    n * n
                )));
            }
            Kernel::Dense(DMatrix::from_row_slice(n, n, values))
        }
        KernelConfig::Stencil(s) => Kernel::Stencil(stencil(s, need_dim()?)?),
        KernelConfig::Factorized { alpha, q } => {
            let k = q.len();
            if q.iter().any(|row| row.len() != k) {
                return Err(ConfigError::Model("`q` must be square".into()));
            }
            let flat: Vec<f64> = q.iter().flatten().copied().collect();
            Kernel::Factorized {
                alpha: stencil(alpha, need_dim()?)?,
                marks: DMatrix::from_row_slice(k, k, &flat),
            }
        }
    };
    k.check(space).map_err(|e| ConfigError::Model(e.to_string()))?;
    Ok(k)
}

impl ModelConfig {
    pub fn build(&self) -> Result<(StateSpace, RateModel), ConfigError> {
        let space = build_space(self.space.to_spec()?).map_err(|e| ConfigError::Model(e.to_string()))?;
        let death = match &self.death {
            DeathConfig::Constant(v) => DeathRates::Constant(*v),
            DeathConfig::PerPoint { per_point } => DeathRates::PerPoint(per_point.clone()),
            DeathConfig::PerMark { per_mark } => DeathRates::PerMark(per_mark.clone()),
        };
        let mut model = RateModel::new(kernel(&self.birth, &space)?, death);
        if let Some(j) = &self.jump {
            model = model.with_jump(kernel(j, &space)?);
        }
        model.check(&space).map_err(|e| ConfigError::Model(e.to_string()))?;
        Ok((space, model))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Path(PathBuf),
    Inline(Box<ModelConfig>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Dense,
    Montecarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VariantConfig {
    #[default]
    Full,
    Sufficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrateSection {
    pub tol: f64,
    pub max_iters: usize,
    /// Criticality residual accepted after rescaling.
    pub residual_tol: f64,
}

impl Default for CalibrateSection {
    fn default() -> Self {
        Self {
            tol: 1e-14,
            max_iters: 100_000,
            residual_tol: 1e-10,
        }
    }
}

/// One start pair `(ξ_X − ξ_Y, s_X, s_Y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartConfig {
    pub displacement: Vec<i64>,
    #[serde(default)]
    pub marks: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransienceSection {
    pub horizon: f64,
    pub replicas: u64,
    pub per_decade: usize,
    pub decades: usize,
    pub variant: VariantConfig,
    pub regular_terms: usize,
    /// Start pairs; every mark pair of the support of `α` when absent.
    pub grid: Option<Vec<StartConfig>>,
}

impl Default for TransienceSection {
    fn default() -> Self {
        Self {
            horizon: 1000.0,
            replicas: 100_000,
            per_decade: 8,
            decades: 4,
            variant: VariantConfig::Full,
            regular_terms: 16,
            grid: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveSection {
    pub order: usize,
    pub times: Vec<f64>,
    pub max_step: f64,
    pub nodes: usize,
    pub tol: f64,
}

impl Default for EvolveSection {
    fn default() -> Self {
        Self {
            order: 2,
            times: vec![0.5, 1.0, 2.0],
            max_step: 0.25,
            nodes: 8,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSection {
    /// Last time of the Poisson-started trajectory.
    pub final_time: f64,
    pub replicas: u64,
    /// Dense backend only; Monte Carlo runs are judged against three
    /// standard errors.
    pub tol: f64,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        Self {
            final_time: 1000.0,
            replicas: 100_000,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StationarySection {
    pub order: usize,
    pub backend: Backend,
    pub tol: f64,
    pub residual_tol: f64,
    pub t_max: f64,
    pub horizon: f64,
    pub replicas: u64,
    pub per_decade: usize,
    pub decades: usize,
    /// Monte Carlo start pairs; the origin and the support of `α` when absent.
    pub grid: Option<Vec<StartConfig>>,
    pub convergence: Option<ConvergenceSection>,
}

impl Default for StationarySection {
    fn default() -> Self {
        Self {
            order: 2,
            backend: Backend::Dense,
            tol: 1e-10,
            residual_tol: 1e-8,
            t_max: 1e8,
            horizon: 1000.0,
            replicas: 100_000,
            per_decade: 8,
            decades: 4,
            grid: None,
            convergence: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub order: usize,
    pub times: Vec<f64>,
    pub replicas: u64,
    pub population_cap: u64,
    pub event_cap: u64,
    /// Replicas whose event logs are written out.
    pub logs: u64,
    /// Compare with the dense hierarchy when the model is finite.
    pub compare: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            order: 2,
            times: vec![0.5, 1.0, 2.0],
            replicas: 10_000,
            population_cap: 1_000_000,
            event_cap: 1_000_000,
            logs: 0,
            compare: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmasSection {
    pub n_max: usize,
    pub heat_times: Vec<f64>,
    pub heat_replicas: u64,
    pub regular_terms: usize,
    pub target: Option<StartConfig>,
    pub poisson_times: Vec<f64>,
    pub poisson_k: Vec<u64>,
    pub poisson_replicas: u64,
    pub lambda0: Option<f64>,
    pub tail_times: Vec<f64>,
    pub m_scale: f64,
}

impl Default for LemmasSection {
    fn default() -> Self {
        Self {
            n_max: 64,
            heat_times: vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0],
            heat_replicas: 20_000,
            regular_terms: 16,
            target: None,
            poisson_times: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0],
            poisson_k: (0..8).collect(),
            poisson_replicas: 20_000,
            lambda0: None,
            tail_times: vec![2.0, 5.0, 10.0, 20.0, 50.0],
            m_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSection {
    /// Use this `H` instead of estimating it.
    pub h: Option<f64>,
    pub order: usize,
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self { h: None, order: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ReportSection {
    /// Output directories of earlier runs.
    pub runs: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub calibrate: CalibrateSection,
    #[serde(default)]
    pub transience: TransienceSection,
    #[serde(default)]
    pub evolve: EvolveSection,
    #[serde(default)]
    pub stationary: StationarySection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub lemmas: LemmasSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub report: ReportSection,
}

fn default_rho() -> f64 {
    0.5
}

/// Parsed config with its digest and location.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub sha256: String,
    pub dir: PathBuf,
}

fn read(path: &Path) -> Result<Vec<u8>, ConfigError> {
    std::fs::read(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let bytes = read(path)?;
        let config: ExperimentConfig = serde_json::from_slice(&bytes).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        config.validate()?;
        Ok(Self {
            config,
            sha256: sha256_hex(&bytes),
            dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        })
    }

    pub fn model(&self) -> Result<ModelConfig, ConfigError> {
        match &self.config.model {
            None => Err(ConfigError::Invalid("missing `model`".into())),
            Some(ModelSource::Inline(m)) => Ok((**m).clone()),
            Some(ModelSource::Path(p)) => {
                let path = self.dir.join(p);
                serde_json::from_slice(&read(&path)?).map_err(|source| ConfigError::Parse { path, source })
            }
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Invalid(format!("`{name}` must be positive")))
            }
        };
        positive("rho", self.rho)?;
        positive("calibrate.tol", self.calibrate.tol)?;
        positive("calibrate.residual_tol", self.calibrate.residual_tol)?;
        positive("transience.horizon", self.transience.horizon)?;
        positive("evolve.tol", self.evolve.tol)?;
        positive("evolve.max_step", self.evolve.max_step)?;
        positive("stationary.tol", self.stationary.tol)?;
        positive("stationary.horizon", self.stationary.horizon)?;
        positive("lemmas.m_scale", self.lemmas.m_scale)?;
        if self.evolve.order == 0 || self.stationary.order == 0 || self.simulate.order == 0 {
            return Err(ConfigError::Invalid("orders must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_factorized_product_model() {
        let json = r#"{
            "space": {"type": "product", "d": 3, "R": 1, "boundary": "unbounded", "marks": ["A", "B"], "nu": [0.5, 0.5]},
            "birth": {"form": "factorized", "alpha": {"nearest_neighbor": true}, "q": [[2, 1], [1, 2]]},
            "death": {"per_mark": [1, 3]}
        }"#;
        let m: ModelConfig = serde_json::from_str(json).unwrap();
        let (space, model) = m.build().unwrap();
        assert_eq!(space.len(), 54);
        assert!(model.is_homogeneous(&space));
    }

    #[test]
    fn dense_size_checked() {
        let json = r#"{
            "space": {"type": "finite", "weights": [1, 1]},
            "birth": {"form": "dense", "values": [1, 2, 3]},
            "death": 1
        }"#;
        let m: ModelConfig = serde_json::from_str(json).unwrap();
        assert!(matches!(m.build(), Err(ConfigError::Model(_))));
    }

    #[test]
    fn unknown_keys_rejected() {
        let json = r#"{"model": null, "sed": 3}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(json).is_err());
    }
}
