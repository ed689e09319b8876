//! Projection pairs between the reference space and coarse levels,
//! approximate-generator consistency probes, and two-index error tables.
//!
//! A projection pair `(P, J)` discretizes (`P`, fine to coarse) and
//! interpolates back (`J`, coarse to fine) subject to `P J = I`,
//! level-independent norm bounds, and strong convergence of `J P` to the
//! identity along the level ladder.

use std::io::Write;

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Result, SplitkitError};
use crate::gfmt::g17;
use crate::linalg::VecNorm;
use crate::parallel;
use crate::semigroup::{EvolveSpec, GeneratorRep, SemigroupEvaluator};
use crate::splitting::{self, SplitScheme};

/// Discretization and interpolation maps between the reference space and
/// one approximation level, with declared norm bounds.
#[derive(Clone, Debug)]
pub struct ProjectionPair {
    p: Array2<f64>,
    j: Array2<f64>,
    bound_p: f64,
    bound_j: f64,
    full_norm: VecNorm,
    approx_norm: VecNorm,
}

impl ProjectionPair {
    pub fn new(
        p: Array2<f64>,
        j: Array2<f64>,
        bounds: (f64, f64),
        full_norm: VecNorm,
        approx_norm: VecNorm,
    ) -> Result<Self> {
        if p.ncols() != j.nrows() || p.nrows() != j.ncols() {
            return Err(SplitkitError::DimensionMismatch {
                expected: p.ncols(),
                got: j.nrows(),
            });
        }
        Ok(ProjectionPair {
            p,
            j,
            bound_p: bounds.0,
            bound_j: bounds.1,
            full_norm,
            approx_norm,
        })
    }

    /// Coordinate restriction to the first `m` entries with zero-padding back.
    pub fn coordinate(full_dim: usize, m: usize) -> Result<Self> {
        if m == 0 || m > full_dim {
            return Err(SplitkitError::BadProblemParameter(format!(
                "coordinate pair needs 0 < m <= {full_dim}, got {m}"
            )));
        }
        let p = Array2::from_shape_fn((m, full_dim), |(i, j)| if i == j { 1.0 } else { 0.0 });
        let j = Array2::from_shape_fn((full_dim, m), |(i, j)| if i == j { 1.0 } else { 0.0 });
        ProjectionPair::new(p, j, (1.0, 1.0), VecNorm::L2, VecNorm::L2)
    }

    /// Sampling and piecewise-linear interpolation on a periodic unit grid.
    ///
    /// The fine grid has `n_ref` points `i / n_ref`; the coarse level keeps
    /// every `n_ref / m`-th one, so `m` must divide `n_ref`.
    pub fn periodic_sampling_linear(n_ref: usize, m: usize) -> Result<Self> {
        if m == 0 || !n_ref.is_multiple_of(m) {
            return Err(SplitkitError::BadProblemParameter(format!(
                "m = {m} must divide the reference grid size {n_ref}"
            )));
        }
        let stride = n_ref / m;
        let p = Array2::from_shape_fn((m, n_ref), |(i, j)| {
            if j == i * stride {
                1.0
            } else {
                0.0
            }
        });
        let mut j_mat = Array2::zeros((n_ref, m));
        for i in 0..n_ref {
            let cell = i / stride;
            let frac = (i % stride) as f64 / stride as f64;
            j_mat[[i, cell]] += 1.0 - frac;
            j_mat[[i, (cell + 1) % m]] += frac;
        }
        let full_norm = VecNorm::GridL2 {
            h: 1.0 / n_ref as f64,
        };
        let approx_norm = VecNorm::GridL2 { h: 1.0 / m as f64 };
        // sampling concentrates mass by at most sqrt(n_ref / m); interpolation
        // has unit-bounded weights
        let bound_p = (n_ref as f64 / m as f64).sqrt() * (1.0 + 1e-12);
        ProjectionPair::new(p, j_mat, (bound_p, 1.0 + 1e-12), full_norm, approx_norm)
    }

    /// Sampling and piecewise-linear interpolation on `[0, 1]` with endpoints.
    ///
    /// Grids have `n_ref` and `m` nodes including both ends; `m - 1` must
    /// divide `n_ref - 1`.
    pub fn interval_sampling_linear(n_ref: usize, m: usize) -> Result<Self> {
        if m < 2 || n_ref < 2 || !(n_ref - 1).is_multiple_of(m - 1) {
            return Err(SplitkitError::BadProblemParameter(format!(
                "m - 1 = {} must divide n_ref - 1 = {}",
                m.saturating_sub(1),
                n_ref - 1
            )));
        }
        let stride = (n_ref - 1) / (m - 1);
        let p = Array2::from_shape_fn((m, n_ref), |(i, j)| {
            if j == i * stride {
                1.0
            } else {
                0.0
            }
        });
        let mut j_mat = Array2::zeros((n_ref, m));
        for i in 0..n_ref {
            let cell = (i / stride).min(m - 2);
            let frac = (i - cell * stride) as f64 / stride as f64;
            j_mat[[i, cell]] += 1.0 - frac;
            j_mat[[i, cell + 1]] += frac;
        }
        let full_norm = VecNorm::GridL2 {
            h: 1.0 / (n_ref - 1) as f64,
        };
        let approx_norm = VecNorm::GridL2 {
            h: 1.0 / (m - 1) as f64,
        };
        let bound_p = ((n_ref - 1) as f64 / (m - 1) as f64).sqrt() * (1.0 + 1e-12);
        ProjectionPair::new(p, j_mat, (bound_p, 1.0 + 1e-12), full_norm, approx_norm)
    }

    pub fn full_dim(&self) -> usize {
        self.p.ncols()
    }

    pub fn approx_dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn full_norm(&self) -> VecNorm {
        self.full_norm
    }

    pub fn approx_norm(&self) -> VecNorm {
        self.approx_norm
    }

    pub fn declared_bounds(&self) -> (f64, f64) {
        (self.bound_p, self.bound_j)
    }

    pub fn project(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.full_dim() {
            return Err(SplitkitError::DimensionMismatch {
                expected: self.full_dim(),
                got: x.len(),
            });
        }
        Ok(self.p.dot(&x))
    }

    pub fn lift(&self, y: ArrayView1<f64>) -> Result<Array1<f64>> {
        if y.len() != self.approx_dim() {
            return Err(SplitkitError::DimensionMismatch {
                expected: self.approx_dim(),
                got: y.len(),
            });
        }
        Ok(self.j.dot(&y))
    }

    /// Largest absolute entry of `P J - I`.
    pub fn pj_identity_defect(&self) -> f64 {
        let m = self.approx_dim();
        let pj = self.p.dot(&self.j);
        let mut worst = 0.0_f64;
        for i in 0..m {
            for j in 0..m {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((pj[[i, j]] - want).abs());
            }
        }
        worst
    }

    /// Round-trip defect `norm(J P x - x)` in the full-space norm.
    pub fn jp_defect(&self, x: ArrayView1<f64>) -> Result<f64> {
        let back = self.lift(self.project(x)?.view())?;
        Ok(self.full_norm.eval((&back - &x).view()))
    }

    pub fn measured_norm_p(&self) -> Result<f64> {
        self.approx_norm
            .operator_norm(self.p.view(), self.full_norm)
    }

    pub fn measured_norm_j(&self) -> Result<f64> {
        self.full_norm.operator_norm(self.j.view(), self.approx_norm)
    }
}

/// Outcome of checking the three projection-pair axioms on samples.
#[derive(Clone, Debug)]
pub struct ProjectionReport {
    /// Largest entrywise defect of `P J = I`.
    pub pj_defect: f64,
    pub pj_pass: bool,
    /// Measured operator norms against the declared bounds.
    pub norm_p: f64,
    pub norm_j: f64,
    pub bounds_pass: bool,
    /// Round-trip defect per sample; the decay along the level ladder is a
    /// family-level assertion, so single pairs only report the values.
    pub jp_defects: Vec<f64>,
}

impl ProjectionReport {
    pub fn all_pass(&self) -> bool {
        self.pj_pass && self.bounds_pass
    }
}

/// Checks the projection-pair axioms on the given samples.
pub fn verify_projection_pair(
    pair: &ProjectionPair,
    samples: &[Array1<f64>],
) -> Result<ProjectionReport> {
    if samples.is_empty() {
        return Err(SplitkitError::EmptyGrid);
    }
    let pj_defect = pair.pj_identity_defect();
    let norm_p = pair.measured_norm_p()?;
    let norm_j = pair.measured_norm_j()?;
    let mut jp_defects = Vec::with_capacity(samples.len());
    for s in samples {
        jp_defects.push(pair.jp_defect(s.view())?);
    }
    let (bound_p, bound_j) = pair.declared_bounds();
    Ok(ProjectionReport {
        pj_defect,
        pj_pass: pj_defect <= 1e-14,
        norm_p,
        norm_j,
        bounds_pass: norm_p <= bound_p && norm_j <= bound_j,
        jp_defects,
    })
}

/// One approximation level: the pair plus the two approximate generators.
#[derive(Clone, Debug)]
pub struct FamilyLevel {
    pub m: usize,
    pub pair: ProjectionPair,
    pub a_m: GeneratorRep,
    pub b_m: GeneratorRep,
}

impl FamilyLevel {
    pub fn new(m: usize, pair: ProjectionPair, a_m: GeneratorRep, b_m: GeneratorRep) -> Result<Self> {
        if a_m.dim() != pair.approx_dim() || b_m.dim() != pair.approx_dim() {
            return Err(SplitkitError::DimensionMismatch {
                expected: pair.approx_dim(),
                got: a_m.dim(),
            });
        }
        Ok(FamilyLevel { m, pair, a_m, b_m })
    }

    pub fn t_flow(&self) -> SemigroupEvaluator {
        SemigroupEvaluator::from_generator(&self.a_m)
    }

    pub fn s_flow(&self) -> SemigroupEvaluator {
        SemigroupEvaluator::from_generator(&self.b_m)
    }
}

/// Ladder of approximation levels with strictly increasing `m`.
#[derive(Clone, Debug)]
pub struct ApproximateFamily {
    levels: Vec<FamilyLevel>,
}

impl ApproximateFamily {
    pub fn new(levels: Vec<FamilyLevel>) -> Result<Self> {
        for w in levels.windows(2) {
            if w[1].m <= w[0].m {
                return Err(SplitkitError::NonIncreasingLevels(w[1].m));
            }
        }
        Ok(ApproximateFamily { levels })
    }

    pub fn levels(&self) -> &[FamilyLevel] {
        &self.levels
    }

    pub fn level(&self, m: usize) -> Result<&FamilyLevel> {
        self.levels
            .iter()
            .find(|l| l.m == m)
            .ok_or(SplitkitError::LevelNotFound(m))
    }

    pub fn ms(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.m).collect()
    }
}

/// Which sub-generator a consistency probe targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubFlow {
    T,
    S,
}

/// Worst defect `norm(J A_m P x - A x)` over the samples, where the exact
/// action `A x` is supplied by the caller (a stencil, an analytic
/// derivative, or a quadrature).
pub fn generator_consistency_defect(
    family: &ApproximateFamily,
    m: usize,
    target: impl Fn(ArrayView1<f64>) -> Array1<f64>,
    which: SubFlow,
    samples: &[Array1<f64>],
) -> Result<f64> {
    if samples.is_empty() {
        return Err(SplitkitError::EmptyGrid);
    }
    let level = family.level(m)?;
    let generator = match which {
        SubFlow::T => &level.a_m,
        SubFlow::S => &level.b_m,
    };
    let mut worst = 0.0_f64;
    for x in samples {
        let projected = level.pair.project(x.view())?;
        let moved = generator.apply(projected.view())?;
        let lifted = level.pair.lift(moved.view())?;
        let exact = target(x.view());
        worst = worst.max(level.pair.full_norm().eval((&lifted - &exact).view()));
    }
    Ok(worst)
}

/// Worst defect `norm(J T_m(h) P x - T(h) x)` over the step grid and samples.
///
/// A decreasing value along the level ladder certifies semigroup
/// convergence numerically.
pub fn trotter_kato_defect(
    family: &ApproximateFamily,
    m: usize,
    exact: &SemigroupEvaluator,
    which: SubFlow,
    h_grid: &[f64],
    samples: &[Array1<f64>],
) -> Result<f64> {
    if h_grid.is_empty() || samples.is_empty() {
        return Err(SplitkitError::EmptyGrid);
    }
    let level = family.level(m)?;
    let flow = match which {
        SubFlow::T => level.t_flow(),
        SubFlow::S => level.s_flow(),
    };
    let mut worst = 0.0_f64;
    for &h in h_grid {
        let step = flow.step_operator(h)?;
        for x in samples {
            let approx = level
                .pair
                .lift(step.apply(level.pair.project(x.view())?.view()).view())?;
            let reference = exact.evaluate(h, x.view())?;
            worst = worst.max(level.pair.full_norm().eval((&approx - &reference).view()));
        }
    }
    Ok(worst)
}

/// Approximate split solution `J [F_m(t/n)]^n P x` lifted back to the
/// reference space.
pub fn split_evolve_approx(
    scheme: SplitScheme,
    family: &ApproximateFamily,
    m: usize,
    spec: EvolveSpec,
    x: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    let level = family.level(m)?;
    let projected = level.pair.project(x)?;
    let evolved = splitting::split_evolve(
        scheme,
        &level.t_flow(),
        &level.s_flow(),
        spec,
        projected.view(),
    )?;
    level.pair.lift(evolved.view())
}

/// Worst defect of the product-formula consistency hypothesis,
/// `norm((J F_m(h) P x - J P x) / h - (A + B) x)`, over the samples.
pub fn chernoff_consistency_defect(
    scheme: SplitScheme,
    family: &ApproximateFamily,
    m: usize,
    sum_action: impl Fn(ArrayView1<f64>) -> Array1<f64>,
    h: f64,
    samples: &[Array1<f64>],
) -> Result<f64> {
    if h <= 0.0 || !h.is_finite() {
        return Err(SplitkitError::NonPositiveStep(h));
    }
    if samples.is_empty() {
        return Err(SplitkitError::EmptyGrid);
    }
    let level = family.level(m)?;
    let t_flow = level.t_flow();
    let s_flow = level.s_flow();
    let mut worst = 0.0_f64;
    for x in samples {
        let projected = level.pair.project(x.view())?;
        let stepped = splitting::split_step(scheme, &t_flow, &s_flow, h, projected.view())?;
        let moved = level.pair.lift(stepped.view())?;
        let base = level.pair.lift(projected.view())?;
        let quotient = (&moved - &base) / h;
        let exact = sum_action(x.view());
        worst = worst.max(level.pair.full_norm().eval((&quotient - &exact).view()));
    }
    Ok(worst)
}

/// Errors `E(n, m)` of the approximate split solution against a reference,
/// on the full (steps x level) grid.
#[derive(Clone, Debug)]
pub struct ErrorTable {
    pub n_values: Vec<u32>,
    pub m_values: Vec<usize>,
    pub errors: Array2<f64>,
    pub reference_tag: String,
}

impl ErrorTable {
    pub fn new(
        n_values: Vec<u32>,
        m_values: Vec<usize>,
        errors: Array2<f64>,
        reference_tag: String,
    ) -> Result<Self> {
        if errors.nrows() != n_values.len() || errors.ncols() != m_values.len() {
            return Err(SplitkitError::DimensionMismatch {
                expected: n_values.len() * m_values.len(),
                got: errors.len(),
            });
        }
        if n_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SplitkitError::NonIncreasingSteps);
        }
        if m_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SplitkitError::NonIncreasingSteps);
        }
        if errors.iter().any(|e| !e.is_finite() || *e < 0.0) {
            return Err(SplitkitError::InvalidErrorSample);
        }
        Ok(ErrorTable {
            n_values,
            m_values,
            errors,
            reference_tag,
        })
    }

    /// Cells on the diagonal `n_i = m_i` pairing, in ladder order.
    pub fn diagonal(&self) -> Vec<f64> {
        let len = self.n_values.len().min(self.m_values.len());
        (0..len).map(|i| self.errors[[i, i]]).collect()
    }

    /// Writes the table as CSV with header `n\m,<m1>,<m2>,...`.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        let header: Vec<String> = self.m_values.iter().map(|m| m.to_string()).collect();
        writeln!(out, "n\\m,{}", header.join(","))?;
        for (i, n) in self.n_values.iter().enumerate() {
            let row: Vec<String> = (0..self.m_values.len())
                .map(|j| g17(self.errors[[i, j]]))
                .collect();
            writeln!(out, "{n},{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii csv")
    }
}

/// Fills the (n, m) error grid for one scheme against a reference solution
/// at the final time. Cells are independent and evaluated in parallel.
#[allow(clippy::too_many_arguments)]
pub fn two_index_error_table(
    scheme: SplitScheme,
    family: &ApproximateFamily,
    reference: &Array1<f64>,
    reference_tag: &str,
    n_values: &[u32],
    m_values: &[usize],
    t_final: f64,
    x: &Array1<f64>,
    norm: VecNorm,
) -> Result<ErrorTable> {
    if n_values.is_empty() || m_values.is_empty() {
        return Err(SplitkitError::EmptyGrid);
    }
    let cells = n_values.len() * m_values.len();
    let results: Vec<Result<f64>> = parallel::map_indexed(cells, |idx| {
        let i = idx / m_values.len();
        let j = idx % m_values.len();
        let spec = EvolveSpec::new(t_final, n_values[i])?;
        let approx = split_evolve_approx(scheme, family, m_values[j], spec, x.view())?;
        Ok(norm.eval((&approx - reference).view()))
    });
    let mut errors = Array2::zeros((n_values.len(), m_values.len()));
    for (idx, r) in results.into_iter().enumerate() {
        errors[[idx / m_values.len(), idx % m_values.len()]] = r?;
    }
    ErrorTable::new(
        n_values.to_vec(),
        m_values.to_vec(),
        errors,
        reference_tag.to_string(),
    )
}
