//! Versioned TOML experiment configuration.

use serde::{Deserialize, Serialize};

use crate::bias::BiasDistribution;
use crate::error::{Error, Result};
use crate::families;
use crate::walk::NestedMode;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Analyze,
    Simulate,
    SweepR,
    TrapCensus,
    Simplicity,
    OracleTest,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Analyze => "analyze",
            Kind::Simulate => "simulate",
            Kind::SweepR => "sweep-r",
            Kind::TrapCensus => "trap-census",
            Kind::Simplicity => "simplicity",
            Kind::OracleTest => "oracle-test",
        }
    }
}

/// Named bias sequences; `Explicit` takes `weights`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Explicit,
    /// Base `(2/5, 1/5, 1/5, 1/5)`, child `r/(r+3)` on `+e1` and `1/(r+3)` elsewhere.
    Figure2,
    /// Canonical `(d, k0, γ0)` base with a `(d, ki, γi)` child.
    Canonical,
    /// Diagonal base with the wrong-way child.
    WrongWay,
    /// Diagonal base with the rotated wrong-way child.
    WrongWayRotated,
    /// Vanishing bias with `ε_i = 2^{−(i+2)}` over a base of drift `e1/2`.
    VanishingBias,
    /// Growing drift into traps with `ε_i = 2^{−i}` over a base of drift `e1/2`.
    TrapDrift,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasSpec {
    pub family: Family,
    /// Rows of `2d` weights in the order `+e1, −e1, +e2, −e2, …`; decimals or `a/b`.
    #[serde(default)]
    pub weights: Vec<Vec<String>>,
    #[serde(default = "default_r")]
    pub r: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "one")]
    pub k0: usize,
    #[serde(default = "one")]
    pub ki: usize,
    #[serde(default = "default_gamma")]
    pub gamma0: f64,
    #[serde(default = "default_gamma")]
    pub gammai: f64,
    /// Length of generated sequences, base excluded.
    #[serde(default = "default_terms")]
    pub terms: usize,
}

impl Default for BiasSpec {
    fn default() -> Self {
        BiasSpec {
            family: Family::Figure2,
            weights: Vec::new(),
            r: default_r(),
            epsilon: default_epsilon(),
            d: default_d(),
            k0: 1,
            ki: 1,
            gamma0: default_gamma(),
            gammai: default_gamma(),
            terms: default_terms(),
        }
    }
}

impl BiasSpec {
    /// Base distribution followed by the children.
    pub fn resolve(&self) -> Result<Vec<BiasDistribution>> {
        let cfg = |e: Error| Error::Config(format!("bias: {e}"));
        let seq = match self.family {
            Family::Explicit => {
                if self.weights.len() < 2 {
                    return Err(Error::Config("bias.weights needs a base row and at least one child".into()));
                }
                self.weights
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        if row.len() % 2 != 0 {
                            return Err(Error::Config(format!("bias.weights[{i}] has odd length {}", row.len())));
                        }
                        BiasDistribution::from_strs(row.len() / 2, row).map_err(|e| Error::Config(format!("bias.weights[{i}]: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            Family::Figure2 => vec![families::figure2_base(), families::figure2_child(self.r).map_err(cfg)?],
            Family::Canonical => vec![
                families::canonical(self.d, self.k0, self.gamma0).map_err(cfg)?,
                families::canonical(self.d, self.ki, self.gammai).map_err(cfg)?,
            ],
            Family::WrongWay => vec![families::diagonal_base(self.epsilon).map_err(cfg)?, families::wrong_way_child()],
            Family::WrongWayRotated => vec![
                families::diagonal_base(self.epsilon).map_err(cfg)?,
                families::wrong_way_child_rotated(),
            ],
            Family::VanishingBias => {
                let mut v = vec![families::half_e1_base()];
                v.extend(families::vanishing_bias_sequence(self.terms));
                v
            }
            Family::TrapDrift => {
                let mut v = vec![families::half_e1_base()];
                v.extend(families::trap_drift_sequence(self.terms));
                v
            }
        };
        let dim = seq[0].dim();
        if seq.iter().any(|p| p.dim() != dim) {
            return Err(Error::Config("bias rows differ in dimension".into()));
        }
        Ok(seq)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    /// `none`, `canonical-grid` or `figure2-grid`.
    #[serde(default = "default_grid")]
    pub grid: String,
    #[serde(default = "default_r_grid")]
    pub r_values: Vec<f64>,
    #[serde(default = "default_critical_tol")]
    pub critical_tol: f64,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        AnalyzeSection {
            grid: default_grid(),
            r_values: default_r_grid(),
            critical_tol: default_critical_tol(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// One per level; the last is run in full, the others cap extension.
    #[serde(default = "default_budgets")]
    pub budgets: Vec<u64>,
    #[serde(default = "default_mode")]
    pub mode: NestedMode,
    /// Lookahead margin; `40 / t0` when absent.
    #[serde(default)]
    pub h_la: Option<f64>,
    #[serde(default = "default_eps_trunc")]
    pub eps_trunc: f64,
    #[serde(default = "default_eps_total")]
    pub eps_total: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    #[serde(default)]
    pub checkpoints: Vec<u64>,
    #[serde(default)]
    pub dump_traces: bool,
    #[serde(default)]
    pub audit_kernel: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            budgets: default_budgets(),
            mode: default_mode(),
            h_la: None,
            eps_trunc: default_eps_trunc(),
            eps_total: default_eps_total(),
            burn_in: default_burn_in(),
            checkpoints: Vec::new(),
            dump_traces: false,
            audit_kernel: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_sweep_r")]
    pub r_values: Vec<f64>,
    #[serde(default = "default_child_steps")]
    pub child_steps: u64,
    #[serde(default = "default_parent_cap")]
    pub parent_cap: u64,
    /// Prefix lengths at which the child velocity is reported.
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<u64>,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            r_values: default_sweep_r(),
            child_steps: default_child_steps(),
            parent_cap: default_parent_cap(),
            checkpoints: default_checkpoints(),
            burn_in: default_burn_in(),
            batches: default_batches(),
            confidence: default_confidence(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapSection {
    /// Base-walk steps per replica.
    #[serde(default = "default_trap_steps")]
    pub steps: u64,
    #[serde(default = "default_heights")]
    pub heights: Vec<i64>,
    /// Blocks used for the `N_{n,ε}` scaling statistic.
    #[serde(default = "default_trap_n")]
    pub n: usize,
    #[serde(default = "default_trap_eps")]
    pub epsilon: f64,
    #[serde(default)]
    pub h_la: Option<f64>,
}

impl Default for TrapSection {
    fn default() -> Self {
        TrapSection {
            steps: default_trap_steps(),
            heights: default_heights(),
            n: default_trap_n(),
            epsilon: default_trap_eps(),
            h_la: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimplicitySection {
    #[serde(default = "default_c_values")]
    pub c_values: Vec<f64>,
    /// Directions other than `+e1`, written `+e2`, `-e1`, ….
    #[serde(default = "default_directions")]
    pub directions: Vec<String>,
    /// Declares that some distribution recurs infinitely often.
    #[serde(default)]
    pub repeated: bool,
}

impl Default for SimplicitySection {
    fn default() -> Self {
        SimplicitySection {
            c_values: default_c_values(),
            directions: default_directions(),
            repeated: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    #[serde(default = "default_fixtures")]
    pub fixtures: usize,
    #[serde(default = "default_fixture_vertices")]
    pub fixture_vertices: usize,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: u64,
    #[serde(default = "default_deletions")]
    pub deletions: usize,
    #[serde(default = "default_kernel_steps")]
    pub kernel_steps: u64,
    /// Compares exact values from a perturbed network against the unperturbed walk.
    #[serde(default)]
    pub perturb: bool,
}

impl Default for OracleSection {
    fn default() -> Self {
        OracleSection {
            fixtures: default_fixtures(),
            fixture_vertices: default_fixture_vertices(),
            mc_samples: default_mc_samples(),
            deletions: default_deletions(),
            kernel_steps: default_kernel_steps(),
            perturb: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Must match the subcommand when present.
    #[serde(default)]
    pub kind: Option<Kind>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    #[serde(default)]
    pub bias: BiasSpec,
    #[serde(default)]
    pub analyze: AnalyzeSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub trap: TrapSection,
    #[serde(default)]
    pub simplicity: SimplicitySection,
    #[serde(default)]
    pub oracle: OracleSection,
}

impl ExperimentConfig {
    pub fn defaults(kind: Kind) -> Self {
        let mut cfg = ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            kind: Some(kind),
            seed: default_seed(),
            replicas: default_replicas(),
            bias: BiasSpec::default(),
            analyze: AnalyzeSection::default(),
            simulate: SimulateSection::default(),
            sweep: SweepSection::default(),
            trap: TrapSection::default(),
            simplicity: SimplicitySection::default(),
            oracle: OracleSection::default(),
        };
        if kind == Kind::Simplicity {
            cfg.bias.family = Family::VanishingBias;
        }
        cfg
    }

    /// Parses TOML; errors carry the line and field.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.replicas == 0 || self.replicas > crate::rng::MAX_REPLICA {
            return Err(Error::Config(format!("replicas = {} out of range", self.replicas)));
        }
        let unit = |name: &str, v: f64| {
            if (0.0..1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} outside [0, 1)")))
            }
        };
        unit("simulate.burn_in", self.simulate.burn_in)?;
        unit("sweep.burn_in", self.sweep.burn_in)?;
        if !(self.sweep.confidence > 0.0 && self.sweep.confidence < 1.0) {
            return Err(Error::Config(format!(
                "sweep.confidence = {} outside (0, 1)",
                self.sweep.confidence
            )));
        }
        if self.sweep.batches < 2 {
            return Err(Error::Config("sweep.batches must be at least 2".into()));
        }
        if self.sweep.checkpoints.iter().any(|&n| n == 0 || n > self.sweep.child_steps) {
            return Err(Error::Config("sweep.checkpoints must lie in 1..=child_steps".into()));
        }
        if self.sweep.r_values.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::Config("sweep.r_values must be positive".into()));
        }
        if !(self.trap.epsilon > 0.0 && self.trap.epsilon < 1.0) {
            return Err(Error::Config(format!("trap.epsilon = {} outside (0, 1)", self.trap.epsilon)));
        }
        if self.trap.heights.iter().any(|&h| h < 1) {
            return Err(Error::Config("trap.heights must be >= 1".into()));
        }
        if self.simplicity.c_values.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::Config("simplicity.c_values must be positive".into()));
        }
        for d in &self.simplicity.directions {
            parse_direction(d)?;
        }
        if !["none", "canonical-grid", "figure2-grid"].contains(&self.analyze.grid.as_str()) {
            return Err(Error::Config(format!(
                "analyze.grid = {:?}; expected none, canonical-grid or figure2-grid",
                self.analyze.grid
            )));
        }
        if self.oracle.fixture_vertices < 3 || self.oracle.mc_samples == 0 {
            return Err(Error::Config(
                "oracle.fixture_vertices >= 3 and oracle.mc_samples >= 1 required".into(),
            ));
        }
        Ok(())
    }
}

/// Parses `+e2`, `-e1`, `e3` (1-based axes).
pub fn parse_direction(s: &str) -> Result<crate::lattice::Direction> {
    let s = s.trim();
    let (neg, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let axis: usize = rest
        .strip_prefix('e')
        .and_then(|n| n.parse().ok())
        .filter(|&n| n >= 1 && n <= crate::lattice::MAX_DIM)
        .ok_or_else(|| Error::Config(format!("bad direction {s:?}")))?;
    Ok(if neg {
        crate::lattice::Direction::negative(axis - 1)
    } else {
        crate::lattice::Direction::positive(axis - 1)
    })
}

fn default_seed() -> u64 {
    2024
}
fn default_replicas() -> u64 {
    10
}
fn default_r() -> f64 {
    1.5
}
fn default_epsilon() -> f64 {
    0.2
}
fn default_d() -> usize {
    2
}
fn one() -> usize {
    1
}
fn default_gamma() -> f64 {
    2.0
}
fn default_terms() -> usize {
    40
}
fn default_grid() -> String {
    "none".into()
}
fn default_r_grid() -> Vec<f64> {
    (0..=6).map(|k| 1.0 + 0.25 * k as f64).collect()
}
fn default_critical_tol() -> f64 {
    crate::phase::CRITICAL_TOL
}
fn default_budgets() -> Vec<u64> {
    vec![50_000_000, 1_000_000]
}
fn default_mode() -> NestedMode {
    NestedMode::Lazy
}
fn default_eps_trunc() -> f64 {
    1e-12
}
fn default_eps_total() -> f64 {
    1e-6
}
fn default_burn_in() -> f64 {
    0.2
}
fn default_sweep_r() -> Vec<f64> {
    vec![1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.4, 2.5]
}
fn default_child_steps() -> u64 {
    1_000_000
}
fn default_parent_cap() -> u64 {
    50_000_000
}
fn default_checkpoints() -> Vec<u64> {
    vec![10_000, 100_000, 1_000_000]
}
fn default_batches() -> usize {
    20
}
fn default_confidence() -> f64 {
    0.95
}
fn default_trap_steps() -> u64 {
    1_000_000
}
fn default_heights() -> Vec<i64> {
    (1..=6).collect()
}
fn default_trap_n() -> usize {
    1000
}
fn default_trap_eps() -> f64 {
    0.5
}
fn default_c_values() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 5.0]
}
fn default_directions() -> Vec<String> {
    vec!["+e2".into()]
}
fn default_fixtures() -> usize {
    20
}
fn default_fixture_vertices() -> usize {
    50
}
fn default_mc_samples() -> u64 {
    20_000
}
fn default_deletions() -> usize {
    100
}
fn default_kernel_steps() -> u64 {
    1_000_000
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_toml("schema_version = 1\n").unwrap();
        assert_eq!(cfg.seed, 2024);
        assert_eq!(cfg.bias.resolve().unwrap().len(), 2);
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn errors_name_the_field() {
        let err = ExperimentConfig::from_toml("schema_version = 1\n[sweep]\nchild_step = 5\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("child_step") && msg.contains("line 3"), "{msg}");
        let err = ExperimentConfig::from_toml("schema_version = 2\n").unwrap_err();
        assert!(err.to_string().contains("schema_version"));
        let err = ExperimentConfig::from_toml("schema_version = 1\n[simplicity]\ndirections = [\"+x\"]\n").unwrap_err();
        assert!(err.to_string().contains("+x"));
    }

    #[test]
    fn explicit_weights() {
        let text = "schema_version = 1\n[bias]\nfamily = \"explicit\"\nweights = [[\"2/5\",\"1/5\",\"1/5\",\"1/5\"],[\"0.5\",\"0.5\",\"0\",\"0\"]]\n";
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        let seq = cfg.bias.resolve().unwrap();
        assert_eq!(seq[1].weights(), &[0.5, 0.5, 0.0, 0.0]);
        let bad = text.replace("\"0.5\",\"0.5\"", "\"0.5\",\"0.6\"");
        let cfg = ExperimentConfig::from_toml(&bad).unwrap();
        assert!(cfg.bias.resolve().unwrap_err().to_string().contains("weights[1]"));
    }

    #[test]
    fn directions() {
        assert_eq!(parse_direction("-e1").unwrap(), crate::lattice::Direction::negative(0));
        assert_eq!(parse_direction("e2").unwrap(), crate::lattice::Direction::positive(1));
        assert!(parse_direction("+e0").is_err());
    }
}
