//! Experiment configuration: a single JSON file with nested sections.
//! Unknown keys are rejected so typos fail loudly instead of silently
//! skipping a check.

use serde::Deserialize;
use splitkit::problems::{HistoryShape, KernelShape, MatrixKind};
use splitkit::splitting::SplitScheme;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub schemes: Vec<SchemeConfig>,
    pub n_values: Vec<u32>,
    pub t_final: f64,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub checks: Checks,
    /// Emit one history snapshot CSV per trajectory step of delay studies.
    #[serde(default)]
    pub dump_history: bool,
}

impl ExperimentConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.schemes.is_empty() {
            anyhow::bail!("config needs at least one scheme");
        }
        if self.n_values.is_empty() {
            anyhow::bail!("config needs at least one n value");
        }
        if self.n_values.windows(2).any(|w| w[1] <= w[0]) {
            anyhow::bail!("n_values must be strictly increasing");
        }
        if self.t_final <= 0.0 || !self.t_final.is_finite() {
            anyhow::bail!("t_final must be positive, got {}", self.t_final);
        }
        for s in &self.schemes {
            s.to_scheme()?;
        }
        self.problem.validate()?;
        Ok(())
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    Matrix {
        matrix_kind: String,
        dim: usize,
        #[serde(default)]
        seed: Option<u64>,
        /// Replace the second generator by zero; every scheme then
        /// reproduces the first sub-flow exactly.
        #[serde(default)]
        zero_b: bool,
    },
    AdvectionDiffusion {
        nu: f64,
        speed: f64,
        m_values: Vec<usize>,
    },
    DelayScalar {
        c: f64,
        kernel: KernelConfig,
        history: HistoryConfig,
        q_state: usize,
        q_oracle: usize,
    },
    DelayDiffusion {
        d: usize,
        q: usize,
        nu: f64,
        kernel: KernelConfig,
        q_oracle: usize,
    },
}

impl ProblemConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        match self {
            ProblemConfig::Matrix { matrix_kind, dim, .. } => {
                matrix_kind.parse::<MatrixKind>()?;
                if *dim < 2 {
                    anyhow::bail!("matrix problems need dim >= 2");
                }
            }
            ProblemConfig::AdvectionDiffusion { m_values, .. } => {
                if m_values.is_empty() {
                    anyhow::bail!("advection-diffusion needs m_values");
                }
                if m_values.windows(2).any(|w| w[1] <= w[0]) {
                    anyhow::bail!("m_values must be strictly increasing");
                }
            }
            ProblemConfig::DelayScalar { q_state, q_oracle, .. } => {
                if *q_state < 2 || *q_oracle < 2 {
                    anyhow::bail!("delay grids need q >= 2");
                }
            }
            ProblemConfig::DelayDiffusion { d, q, q_oracle, .. } => {
                if *d == 0 || *q < 2 || *q_oracle < 2 {
                    anyhow::bail!("delay diffusion needs d >= 1 and q >= 2");
                }
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            ProblemConfig::Matrix { matrix_kind, dim, .. } => {
                format!("matrix:{matrix_kind}:d{dim}")
            }
            ProblemConfig::AdvectionDiffusion { nu, speed, .. } => {
                format!("advection-diffusion:nu{nu}:a{speed}")
            }
            ProblemConfig::DelayScalar { c, .. } => format!("delay-scalar:c{c}"),
            ProblemConfig::DelayDiffusion { d, q, .. } => format!("delay-diffusion:d{d}:q{q}"),
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelConfig {
    Constant { value: f64 },
    Exponential { scale: f64, rate: f64 },
}

impl KernelConfig {
    pub fn to_shape(self) -> KernelShape {
        match self {
            KernelConfig::Constant { value } => KernelShape::Constant(value),
            KernelConfig::Exponential { scale, rate } => KernelShape::Exponential { scale, rate },
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HistoryConfig {
    Constant,
    Exponential { rate: f64 },
}

impl HistoryConfig {
    pub fn to_shape(self) -> HistoryShape {
        match self {
            HistoryConfig::Constant => HistoryShape::Constant,
            HistoryConfig::Exponential { rate } => HistoryShape::Exponential { rate },
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SchemeConfig {
    Sequential,
    Strang,
    Weighted { theta: f64 },
}

impl SchemeConfig {
    pub fn to_scheme(self) -> anyhow::Result<SplitScheme> {
        Ok(match self {
            SchemeConfig::Sequential => SplitScheme::Sequential,
            SchemeConfig::Strang => SplitScheme::Strang,
            SchemeConfig::Weighted { theta } => SplitScheme::weighted(theta)?,
        })
    }
}

/// Pass/fail thresholds evaluated into summary.txt. Absent sections are
/// skipped; present ones decide the process exit code.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    /// Expected empirical order per scheme label.
    #[serde(default)]
    pub orders: Vec<OrderCheck>,
    /// Diagonal of the two-index table must decrease monotonically.
    #[serde(default)]
    pub diagonal_decreasing: bool,
    /// First diagonal error divided by the last must reach this factor.
    #[serde(default)]
    pub diagonal_ratio_min: Option<f64>,
    /// Stability envelopes must stay under `m_hat = 1`, `omega_hat <= tol`.
    #[serde(default)]
    pub contraction_envelope: Option<ContractionCheck>,
    /// Error at the smallest n divided by error at the largest n.
    #[serde(default)]
    pub error_ratio_min: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderCheck {
    /// Scheme label as printed in errors.csv, e.g. "sequential".
    pub scheme: String,
    pub expected: f64,
    pub tol: f64,
    /// Restrict the fit to n values within this inclusive range.
    #[serde(default)]
    pub n_min: Option<u32>,
    #[serde(default)]
    pub n_max: Option<u32>,
    /// Accept an exact (error at noise floor) verdict as a pass.
    #[serde(default)]
    pub allow_exact: bool,
    /// Demand the exact verdict; a fitted order fails the check.
    #[serde(default)]
    pub require_exact: bool,
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractionCheck {
    pub omega_tol: f64,
}

pub fn parse_config(text: &str) -> anyhow::Result<ExperimentConfig> {
    let config: ExperimentConfig = serde_json::from_str(text)?;
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_matrix_config() {
        let text = r#"{
            "problem": {"kind": "matrix", "matrix_kind": "nilpotent-pair", "dim": 2},
            "schemes": [{"kind": "sequential"}, {"kind": "weighted", "theta": 0.5}],
            "n_values": [4, 8, 16],
            "t_final": 1.0
        }"#;
        let config = parse_config(text).unwrap();
        assert_eq!(config.n_values, vec![4, 8, 16]);
        assert!(matches!(config.problem, ProblemConfig::Matrix { .. }));
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = r#"{
            "problem": {"kind": "matrix", "matrix_kind": "nilpotent-pair", "dim": 2},
            "schemes": [{"kind": "sequential"}],
            "n_values": [4, 8, 16],
            "t_final": 1.0,
            "surprise": true
        }"#;
        assert!(parse_config(text).is_err());
    }

    #[test]
    fn rejects_bad_theta_and_bad_order() {
        let bad_theta = r#"{
            "problem": {"kind": "matrix", "matrix_kind": "commuting", "dim": 3},
            "schemes": [{"kind": "weighted", "theta": 1.5}],
            "n_values": [4, 8, 16],
            "t_final": 1.0
        }"#;
        assert!(parse_config(bad_theta).is_err());
        let bad_n = r#"{
            "problem": {"kind": "matrix", "matrix_kind": "commuting", "dim": 3},
            "schemes": [{"kind": "sequential"}],
            "n_values": [16, 8],
            "t_final": 1.0
        }"#;
        assert!(parse_config(bad_n).is_err());
    }
}
