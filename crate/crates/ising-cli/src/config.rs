//! Run configuration: flat TOML with one level of sections.

use crate::CliError;
use ising_core::perimeter::TestSet;
use ising_core::lattice::parse_ratio;
use ising_core::{ContinuumKernel, CouplingSpec, Direction, FieldSpec, Quadrature, SlabSpec};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    PowerLike,
    Truncated,
    NearestNeighbor,
    PeriodicTable,
    BlockDefect,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Fractional,
    PeriodicCosine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "two")]
    pub dimension: usize,
    pub coupling: CouplingKind,
    #[serde(default = "one")]
    pub lambda: f64,
    /// Upper constant Λ; defaults to `lambda`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_upper: Option<f64>,
    #[serde(default = "half")]
    pub s: f64,
    /// ℓ¹ range for `truncated` and `periodic_table`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<i64>,
    /// Defect strength for `block_defect`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_lambda: Option<f64>,
    /// Row-major `τ^{2d}` table for `periodic_table`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<f64>>,
    #[serde(default = "fractional")]
    pub kernel: KernelKind,
    #[serde(default = "three")]
    pub quadrature_levels: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    /// Values on one period `{0..τ−1}^d`, row-major; empty means `h ≡ 0`.
    #[serde(default)]
    pub table: Vec<f64>,
    /// Declared `sup|h|`; defaults to the largest table entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_omega")]
    pub omega: Vec<i64>,
    #[serde(default = "one_i")]
    pub tau: i64,
    /// `(A, B]` as rationals, e.g. `["0", "7/2"]`.
    #[serde(default = "default_slab")]
    pub slab: Vec<String>,
    #[serde(default = "default_m_list")]
    pub m_list: Vec<i64>,
    /// Explicit `M` schedule; empty selects `τ, 2τ, 4τ, 8τ`.
    #[serde(default)]
    pub m_schedule: Vec<i64>,
    #[serde(default)]
    pub ell_list: Vec<i64>,
    #[serde(default)]
    pub tau_list: Vec<i64>,
    #[serde(default = "default_eps")]
    pub eps_schedule: Vec<f64>,
    /// ℓ∞ truncation radius of infinite sums; unset selects `max(8τ, 32)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<i64>,
    /// Test sets: `half_space`, `ball:<r>`, `cube:<h>`, all centred at 0.
    #[serde(default = "default_sets")]
    pub sets: Vec<String>,
    /// `Ω = [−box_half, box_half]^d` for the perimeter experiment.
    #[serde(default = "one")]
    pub box_half: f64,
    /// Random instances per invariant in `verify`.
    #[serde(default = "default_instances")]
    pub instances: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        toml::from_str("").expect("all run fields have defaults")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_dir() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputConfig,
}

fn two() -> usize {
    2
}
fn three() -> u32 {
    3
}
fn one() -> f64 {
    1.0
}
fn one_i() -> i64 {
    1
}
fn half() -> f64 {
    0.5
}
fn fractional() -> KernelKind {
    KernelKind::Fractional
}
fn default_omega() -> Vec<i64> {
    vec![0, 1]
}
fn default_slab() -> Vec<String> {
    vec!["0".into(), "4".into()]
}
fn default_m_list() -> Vec<i64> {
    vec![1]
}
fn default_eps() -> Vec<f64> {
    vec![1.0, 0.5, 0.25, 0.125, 0.0625]
}
fn default_sets() -> Vec<String> {
    vec!["half_space".into(), "ball:0.4".into()]
}
fn default_instances() -> usize {
    200
}
fn default_dir() -> String {
    "out".into()
}

fn bad<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical text form; `parse(to_toml())` returns an equal config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config values are representable in TOML")
    }

    pub fn coupling(&self) -> Result<CouplingSpec<f64>, CliError> {
        let m = &self.model;
        let upper = m.lambda_upper.unwrap_or(m.lambda);
        let need_range = || m.range.ok_or_else(|| CliError::Config(format!("coupling {:?} needs model.range", m.coupling)));
        let spec = match m.coupling {
            CouplingKind::PowerLike => CouplingSpec::power_like(m.lambda, upper, m.s),
            CouplingKind::Truncated => CouplingSpec::power_like(m.lambda, upper, m.s).truncated(need_range()?),
            CouplingKind::NearestNeighbor => CouplingSpec::nearest_neighbor(m.lambda),
            CouplingKind::PeriodicTable => CouplingSpec::PeriodicTable {
                tau: self.run.tau,
                dim: m.dimension,
                s: m.s,
                range: need_range()?,
                table: m.table.clone().ok_or_else(|| CliError::Config("periodic_table needs model.table".into()))?,
            },
            CouplingKind::BlockDefect => {
                if m.dimension != 2 {
                    return bad("block_defect is two-dimensional");
                }
                CouplingSpec::appendix_b(self.run.tau, m.block_lambda.unwrap_or(100.0), m.s)
            }
        };
        spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }

    pub fn field(&self) -> Result<FieldSpec<f64>, CliError> {
        let d = self.model.dimension;
        if self.field.table.is_empty() {
            return Ok(FieldSpec::zero(d));
        }
        let mu = self.field.mu.unwrap_or_else(|| self.field.table.iter().fold(0.0f64, |a, v| a.max(v.abs())));
        FieldSpec::new(self.run.tau, d, self.field.table.clone(), mu).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn direction(&self) -> Result<Direction, CliError> {
        if self.run.omega.len() != self.model.dimension {
            return bad(format!("omega has {} entries, dimension is {}", self.run.omega.len(), self.model.dimension));
        }
        Direction::new(&self.run.omega).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn slab(&self) -> Result<SlabSpec, CliError> {
        if self.run.slab.len() != 2 {
            return bad("run.slab needs exactly two entries [A, B]");
        }
        let a = parse_ratio(&self.run.slab[0]).map_err(|e| CliError::Config(e.to_string()))?;
        let b = parse_ratio(&self.run.slab[1]).map_err(|e| CliError::Config(e.to_string()))?;
        SlabSpec::new(a, b).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn schedule(&self, tau: i64) -> Vec<i64> {
        if self.run.m_schedule.is_empty() {
            ising_core::planelike::default_schedule(tau, 4)
        } else {
            self.run.m_schedule.clone()
        }
    }

    pub fn taus(&self) -> Vec<i64> {
        if self.run.tau_list.is_empty() {
            vec![self.run.tau]
        } else {
            self.run.tau_list.clone()
        }
    }

    pub fn quadrature(&self) -> Quadrature {
        Quadrature { levels: self.model.quadrature_levels }
    }

    pub fn kernel(&self) -> Result<ContinuumKernel, CliError> {
        let m = &self.model;
        if !(m.s > 0.0 && m.s < 1.0) || m.lambda <= 0.0 {
            return bad(format!("kernel needs 0 < s < 1 and lambda > 0, got s = {}, lambda = {}", m.s, m.lambda));
        }
        Ok(match m.kernel {
            KernelKind::Fractional => ContinuumKernel::fractional(m.dimension, m.s, m.lambda),
            KernelKind::PeriodicCosine => {
                ContinuumKernel::periodic_cosine(m.dimension, m.s, m.lambda, m.lambda_upper.unwrap_or(2.0 * m.lambda))
            }
        })
    }

    pub fn test_sets(&self) -> Result<Vec<TestSet>, CliError> {
        let d = self.model.dimension;
        self.run.sets.iter().map(|s| parse_set(s, d)).collect()
    }
}

fn parse_set(text: &str, d: usize) -> Result<TestSet, CliError> {
    let (kind, arg) = match text.split_once(':') {
        Some((k, a)) => (k.trim(), Some(a.trim())),
        None => (text.trim(), None),
    };
    let num = |a: Option<&str>| -> Result<f64, CliError> {
        let a = a.ok_or_else(|| CliError::Config(format!("test set {text:?} needs a size, e.g. {kind}:0.4")))?;
        a.parse::<f64>().ok().filter(|v| *v > 0.0).ok_or_else(|| CliError::Config(format!("bad size in test set {text:?}")))
    };
    let mut normal = vec![0.0; d];
    normal[d - 1] = 1.0;
    match kind {
        "half_space" => Ok(TestSet::HalfSpace { normal, offset: 0.0 }),
        "ball" => Ok(TestSet::Ball { center: vec![0.0; d], radius: num(arg)? }),
        "cube" => Ok(TestSet::Cube { center: vec![0.0; d], half_side: num(arg)? }),
        _ => bad(format!("unknown test set {text:?} (half_space, ball:<r>, cube:<h>)")),
    }
}

/// Rejects configurations that would fail later, before any solve starts.
pub fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    // TOML integers are signed; larger seeds could not be written back.
    if i64::try_from(cfg.seed).is_err() {
        return bad(format!("seed {} exceeds {}", cfg.seed, i64::MAX));
    }
    if !(2..=4).contains(&cfg.model.dimension) {
        return bad(format!("dimension {} unsupported (need 2 <= d <= 4)", cfg.model.dimension));
    }
    if cfg.run.tau < 1 || cfg.run.tau_list.iter().any(|t| *t < 1) {
        return bad("tau must be at least 1");
    }
    if cfg.run.m_list.is_empty() || cfg.run.m_list.iter().any(|m| *m < 1) {
        return bad("m_list must be nonempty with entries >= 1");
    }
    if cfg.run.ell_list.iter().any(|l| *l < 0) {
        return bad("ell_list entries must be nonnegative");
    }
    if cfg.run.eps_schedule.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
        return bad("eps_schedule entries must lie in (0, 1]");
    }
    if cfg.run.radius.is_some_and(|r| r < 1) {
        return bad("radius must be at least 1");
    }
    if cfg.model.quadrature_levels < 1 {
        return bad("quadrature_levels must be at least 1");
    }
    cfg.direction()?;
    cfg.slab()?;
    cfg.field()?;
    cfg.test_sets()?;
    Ok(())
}
