//! Generators and the semigroups they produce.
//!
//! A [`GeneratorRep`] is a finite-dimensional stand-in for an evolution
//! operator, either a dense matrix or a named structured form. A
//! [`SemigroupEvaluator`] turns one into the action of `exp(t G)` on
//! vectors, by dense matrix exponential or by a closed-form rule.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Result, SplitkitError};
use crate::linalg;

/// Finite-dimensional linear operator, dense or structured.
#[derive(Clone, Debug)]
pub enum GeneratorRep {
    Dense(Array2<f64>),
    Diagonal(Array1<f64>),
    Zero(usize),
}

impl GeneratorRep {
    pub fn dense(a: Array2<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(SplitkitError::DimensionMismatch {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(SplitkitError::NonFiniteInput);
        }
        Ok(GeneratorRep::Dense(a))
    }

    pub fn dim(&self) -> usize {
        match self {
            GeneratorRep::Dense(a) => a.nrows(),
            GeneratorRep::Diagonal(d) => d.len(),
            GeneratorRep::Zero(n) => *n,
        }
    }

    /// Applies the operator to a vector.
    pub fn apply(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_dim(x)?;
        Ok(match self {
            GeneratorRep::Dense(a) => a.dot(&x),
            GeneratorRep::Diagonal(d) => &x.to_owned() * d,
            GeneratorRep::Zero(_) => Array1::zeros(x.len()),
        })
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            GeneratorRep::Dense(a) => a.clone(),
            GeneratorRep::Diagonal(d) => Array2::from_diag(d),
            GeneratorRep::Zero(n) => Array2::zeros((*n, *n)),
        }
    }

    /// Sum of two generators on the same space, materialized densely.
    pub fn sum(&self, other: &GeneratorRep) -> Result<GeneratorRep> {
        if self.dim() != other.dim() {
            return Err(SplitkitError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(match (self, other) {
            (GeneratorRep::Zero(_), g) => g.clone(),
            (g, GeneratorRep::Zero(_)) => g.clone(),
            (GeneratorRep::Diagonal(a), GeneratorRep::Diagonal(b)) => {
                GeneratorRep::Diagonal(a + b)
            }
            (a, b) => GeneratorRep::Dense(a.to_dense() + b.to_dense()),
        })
    }

    fn check_dim(&self, x: ArrayView1<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(SplitkitError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SplitkitError::NonFiniteInput);
        }
        Ok(())
    }
}

/// Known exponential growth bound `norm(exp(t G)) <= m exp(omega t)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthBound {
    pub m: f64,
    pub omega: f64,
}

type CustomRule = Arc<dyn Fn(f64, ArrayView1<f64>) -> Array1<f64> + Send + Sync>;

/// How the action of `exp(t G)` is produced.
#[derive(Clone)]
pub enum EvalRule {
    /// Scaling-and-squaring matrix exponential of a dense generator.
    DenseExp(Array2<f64>),
    /// Entrywise `exp(t d_i)` for a diagonal generator.
    Diagonal(Array1<f64>),
    /// Identity flow of the zero generator.
    Identity,
    /// Arbitrary closed-form action, e.g. a spectral evolution rule.
    Custom(CustomRule),
}

impl fmt::Debug for EvalRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalRule::DenseExp(a) => write!(f, "DenseExp({}x{})", a.nrows(), a.ncols()),
            EvalRule::Diagonal(d) => write!(f, "Diagonal({})", d.len()),
            EvalRule::Identity => write!(f, "Identity"),
            EvalRule::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// Produces the action of `exp(t G)` on vectors.
#[derive(Clone, Debug)]
pub struct SemigroupEvaluator {
    dim: usize,
    rule: EvalRule,
    growth_bound: Option<GrowthBound>,
}

impl SemigroupEvaluator {
    /// Dense-exponential mode for any generator.
    pub fn dense(generator: &GeneratorRep) -> Self {
        SemigroupEvaluator {
            dim: generator.dim(),
            rule: EvalRule::DenseExp(generator.to_dense()),
            growth_bound: None,
        }
    }

    /// Closed-form mode; requires a structured generator.
    pub fn closed_form(generator: &GeneratorRep) -> Result<Self> {
        let rule = match generator {
            GeneratorRep::Diagonal(d) => EvalRule::Diagonal(d.clone()),
            GeneratorRep::Zero(_) => EvalRule::Identity,
            GeneratorRep::Dense(_) => return Err(SplitkitError::ClosedFormUnavailable),
        };
        Ok(SemigroupEvaluator {
            dim: generator.dim(),
            rule,
            growth_bound: None,
        })
    }

    /// Picks closed form when the generator is structured, dense otherwise.
    pub fn from_generator(generator: &GeneratorRep) -> Self {
        match generator {
            GeneratorRep::Dense(_) => Self::dense(generator),
            _ => Self::closed_form(generator).expect("structured generator"),
        }
    }

    /// Wraps a closed-form action such as an analytic solution operator.
    pub fn custom(
        dim: usize,
        rule: impl Fn(f64, ArrayView1<f64>) -> Array1<f64> + Send + Sync + 'static,
    ) -> Self {
        SemigroupEvaluator {
            dim,
            rule: EvalRule::Custom(Arc::new(rule)),
            growth_bound: None,
        }
    }

    pub fn with_growth_bound(mut self, m: f64, omega: f64) -> Self {
        self.growth_bound = Some(GrowthBound { m, omega });
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn growth_bound(&self) -> Option<GrowthBound> {
        self.growth_bound
    }

    /// Applies `exp(t G)` to `x`. `t = 0` returns `x` unchanged.
    pub fn evaluate(&self, t: f64, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if t < 0.0 || !t.is_finite() {
            return Err(SplitkitError::NegativeTime(t));
        }
        if x.len() != self.dim {
            return Err(SplitkitError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SplitkitError::NonFiniteInput);
        }
        if t == 0.0 {
            return Ok(x.to_owned());
        }
        Ok(match &self.rule {
            EvalRule::DenseExp(a) => linalg::expm(&a.mapv(|v| t * v))?.dot(&x),
            EvalRule::Diagonal(d) => {
                let factors = d.mapv(|v| (t * v).exp());
                &x.to_owned() * &factors
            }
            EvalRule::Identity => x.to_owned(),
            EvalRule::Custom(f) => f(t, x),
        })
    }

    /// Materializes the action of `exp(t G)` as a reusable one-step operator.
    pub fn step_operator(&self, t: f64) -> Result<StepOperator> {
        if t < 0.0 || !t.is_finite() {
            return Err(SplitkitError::NegativeTime(t));
        }
        Ok(match &self.rule {
            EvalRule::DenseExp(a) => {
                if t == 0.0 {
                    StepOperator::Identity(self.dim)
                } else {
                    StepOperator::Matrix(linalg::expm(&a.mapv(|v| t * v))?)
                }
            }
            EvalRule::Diagonal(d) => StepOperator::Diagonal(d.mapv(|v| (t * v).exp())),
            EvalRule::Identity => StepOperator::Identity(self.dim),
            EvalRule::Custom(_) => {
                // realized columnwise; intended for moderate dimensions
                let n = self.dim;
                let mut m = Array2::zeros((n, n));
                for j in 0..n {
                    let mut e = Array1::zeros(n);
                    e[j] = 1.0;
                    let col = self.evaluate(t, e.view())?;
                    m.column_mut(j).assign(&col);
                }
                StepOperator::Matrix(m)
            }
        })
    }
}

/// Precomputed action of a semigroup at a fixed time.
#[derive(Clone, Debug)]
pub enum StepOperator {
    Matrix(Array2<f64>),
    Diagonal(Array1<f64>),
    Identity(usize),
}

impl StepOperator {
    pub fn dim(&self) -> usize {
        match self {
            StepOperator::Matrix(a) => a.nrows(),
            StepOperator::Diagonal(d) => d.len(),
            StepOperator::Identity(n) => *n,
        }
    }

    pub fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        match self {
            StepOperator::Matrix(a) => a.dot(&x),
            StepOperator::Diagonal(d) => &x.to_owned() * d,
            StepOperator::Identity(_) => x.to_owned(),
        }
    }

    pub fn to_matrix(&self) -> Array2<f64> {
        match self {
            StepOperator::Matrix(a) => a.clone(),
            StepOperator::Diagonal(d) => Array2::from_diag(d),
            StepOperator::Identity(n) => Array2::eye(*n),
        }
    }
}

/// A fixed final time split into `n` equal steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveSpec {
    t_final: f64,
    n: u32,
}

impl EvolveSpec {
    pub fn new(t_final: f64, n: u32) -> Result<Self> {
        if t_final < 0.0 || !t_final.is_finite() {
            return Err(SplitkitError::NegativeTime(t_final));
        }
        if n == 0 {
            return Err(SplitkitError::NonPositiveStep(0.0));
        }
        Ok(EvolveSpec { t_final, n })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn step(&self) -> f64 {
        self.t_final / self.n as f64
    }
}
