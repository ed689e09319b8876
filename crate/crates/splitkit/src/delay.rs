//! Delay equations `u'(t) = C u(t) + Phi u_t` on the product state
//! (head value, sampled history segment).
//!
//! The history segment lives on a uniform grid of `q + 1` points over the
//! delay interval `[-1, 0]`, column `j` holding the value at
//! `sigma_j = -j / q`. The shift part `T` flows the head with the semigroup
//! of `C`, translates the history, and refills the vacated columns from the
//! flowed head; the delay part `S(t) = I + t B` bumps the head by the
//! quadrature of the kernel against the history. Splitting steps must be
//! aligned to the history grid so that translation stays exact.

use std::io::Write;

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Result, SplitkitError};
use crate::gfmt::g17;
use crate::linalg;
use crate::semigroup::{EvolveSpec, GeneratorRep, SemigroupEvaluator, StepOperator};
use crate::spatial::ProjectionPair;
use crate::splitting::SplitScheme;

/// Head value plus history samples on the uniform sigma grid.
#[derive(Clone, Debug)]
pub struct DelayState {
    head: Array1<f64>,
    history: Vec<Array1<f64>>,
}

impl DelayState {
    /// Number of history panels; the grid spacing is `1 / q`.
    pub fn q(&self) -> usize {
        self.history.len() - 1
    }

    pub fn delta(&self) -> f64 {
        1.0 / self.q() as f64
    }

    pub fn dim(&self) -> usize {
        self.head.len()
    }

    pub fn head(&self) -> ArrayView1<'_, f64> {
        self.head.view()
    }

    /// History column `j`, the sample at `sigma = -j / q`.
    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.history[j].view()
    }

    pub fn columns(&self) -> &[Array1<f64>] {
        &self.history
    }

    /// Gap between column 0 and the head.
    pub fn compatibility_defect(&self) -> f64 {
        linalg::vec_norm((&self.history[0] - &self.head).view())
    }

    /// Surrogate for the product-space norm: the maximum of the head norm
    /// and the Riemann sum `delta * sum_j norm(col_j)` over the history.
    pub fn phase_norm(&self) -> f64 {
        let head_norm = linalg::vec_norm(self.head.view());
        let hist: f64 = self
            .history
            .iter()
            .map(|c| linalg::vec_norm(c.view()))
            .sum::<f64>()
            * self.delta();
        head_norm.max(hist)
    }

    /// Convex-style combination `theta a + (1 - theta) b` of two states.
    pub fn affine_combination(theta: f64, a: &DelayState, b: &DelayState) -> Result<DelayState> {
        if a.dim() != b.dim() || a.q() != b.q() {
            return Err(SplitkitError::DimensionMismatch {
                expected: a.dim(),
                got: b.dim(),
            });
        }
        let head = &a.head * theta + &b.head * (1.0 - theta);
        let history = a
            .history
            .iter()
            .zip(&b.history)
            .map(|(ca, cb)| ca * theta + cb * (1.0 - theta))
            .collect();
        Ok(DelayState { head, history })
    }

    /// Packs the state as `(head, col_1, ..., col_q)`, identifying column 0
    /// with the head the way the monolithic generator does.
    pub fn to_stacked(&self) -> Array1<f64> {
        let d = self.dim();
        let q = self.q();
        let mut out = Array1::zeros(d * (q + 1));
        out.slice_mut(ndarray::s![0..d]).assign(&self.head);
        for j in 1..=q {
            out.slice_mut(ndarray::s![j * d..(j + 1) * d])
                .assign(&self.history[j]);
        }
        out
    }

    /// Inverse of [`to_stacked`](Self::to_stacked); column 0 is set to the head.
    pub fn from_stacked(d: usize, q: usize, v: ArrayView1<f64>) -> Result<DelayState> {
        if v.len() != d * (q + 1) {
            return Err(SplitkitError::DimensionMismatch {
                expected: d * (q + 1),
                got: v.len(),
            });
        }
        let head: Array1<f64> = v.slice(ndarray::s![0..d]).to_owned();
        let mut history = Vec::with_capacity(q + 1);
        history.push(head.clone());
        for j in 1..=q {
            history.push(v.slice(ndarray::s![j * d..(j + 1) * d]).to_owned());
        }
        Ok(DelayState { head, history })
    }
}

/// Builds a state from a head vector and sampled history.
///
/// Classical solutions require the history to match the head at
/// `sigma = 0`; `allow_incompatible` admits plain integrable data, under
/// which head-compatibility diagnostics are not meaningful.
pub fn init_state(
    x: Array1<f64>,
    history: Vec<Array1<f64>>,
    allow_incompatible: bool,
) -> Result<DelayState> {
    if history.len() < 3 {
        return Err(SplitkitError::HistoryTooShort(history.len()));
    }
    for col in &history {
        if col.len() != x.len() {
            return Err(SplitkitError::DimensionMismatch {
                expected: x.len(),
                got: col.len(),
            });
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(SplitkitError::NonFiniteInput);
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(SplitkitError::NonFiniteInput);
    }
    let defect = linalg::vec_norm((&history[0] - &x).view());
    if defect > 1e-12 && !allow_incompatible {
        return Err(SplitkitError::IncompatibleHistory { defect });
    }
    Ok(DelayState { head: x, history })
}

/// Kernel samples `k(sigma_j)` of a distributed delay operator.
#[derive(Clone, Debug)]
pub enum DelayKernel {
    /// Scalar multiples of the identity, one factor per grid point.
    Scalar(Vec<f64>),
    /// General matrix-valued samples.
    Matrix(Vec<Array2<f64>>),
}

impl DelayKernel {
    fn len(&self) -> usize {
        match self {
            DelayKernel::Scalar(v) => v.len(),
            DelayKernel::Matrix(v) => v.len(),
        }
    }

    fn apply(&self, j: usize, x: ArrayView1<f64>) -> Array1<f64> {
        match self {
            DelayKernel::Scalar(v) => x.mapv(|e| v[j] * e),
            DelayKernel::Matrix(v) => v[j].dot(&x),
        }
    }

    fn sample_norm(&self, j: usize) -> Result<f64> {
        Ok(match self {
            DelayKernel::Scalar(v) => v[j].abs(),
            DelayKernel::Matrix(v) => linalg::spectral_norm(v[j].view())?,
        })
    }
}

/// A discretized delay problem: the head generator, the sampled kernel,
/// and the declared bound on the delay operator.
#[derive(Clone, Debug)]
pub struct DelayProblem {
    c: GeneratorRep,
    v_flow: SemigroupEvaluator,
    kernel: DelayKernel,
    phi_norm_bound: f64,
    q: usize,
}

impl DelayProblem {
    /// Validates the head semigroup contraction certificate and the kernel
    /// bound at construction.
    pub fn new(c: GeneratorRep, kernel: DelayKernel, phi_norm_bound: f64) -> Result<Self> {
        if kernel.len() < 3 {
            return Err(SplitkitError::HistoryTooShort(kernel.len()));
        }
        let q = kernel.len() - 1;
        let v_flow = SemigroupEvaluator::from_generator(&c);
        // contraction certificate on a coarse time grid
        for i in 1..=8 {
            let t = i as f64 / 8.0;
            let step = v_flow.step_operator(t)?;
            let norm = linalg::spectral_norm(step.to_matrix().view())?;
            if norm > 1.0 + 1e-10 {
                return Err(SplitkitError::ContractionCertificate(norm));
            }
        }
        let mut sup = 0.0_f64;
        let mut weighted = 0.0_f64;
        let delta = 1.0 / q as f64;
        for j in 0..=q {
            let w = if j == 0 || j == q { delta / 2.0 } else { delta };
            let s = kernel.sample_norm(j)?;
            sup = sup.max(s);
            weighted += w * s;
        }
        let measured = sup.max(weighted);
        if phi_norm_bound < measured * (1.0 - 1e-12) {
            return Err(SplitkitError::PhiBoundViolated {
                declared: phi_norm_bound,
                measured,
            });
        }
        Ok(DelayProblem {
            c,
            v_flow,
            kernel,
            phi_norm_bound,
            q,
        })
    }

    pub fn dim(&self) -> usize {
        self.c.dim()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn delta(&self) -> f64 {
        1.0 / self.q as f64
    }

    pub fn head_generator(&self) -> &GeneratorRep {
        &self.c
    }

    pub fn phi_norm_bound(&self) -> f64 {
        self.phi_norm_bound
    }

    /// Trapezoid weight of grid point `j`.
    pub fn weight(&self, j: usize) -> f64 {
        let delta = self.delta();
        if j == 0 || j == self.q {
            delta / 2.0
        } else {
            delta
        }
    }

    fn check_state(&self, state: &DelayState) -> Result<()> {
        if state.dim() != self.dim() {
            return Err(SplitkitError::DimensionMismatch {
                expected: self.dim(),
                got: state.dim(),
            });
        }
        if state.q() != self.q {
            return Err(SplitkitError::DimensionMismatch {
                expected: self.q,
                got: state.q(),
            });
        }
        Ok(())
    }
}

/// Composite-trapezoid quadrature of the kernel against the history,
/// `sum_j w_j k(sigma_j) f(sigma_j)` with end weights halved.
pub fn apply_phi(problem: &DelayProblem, state: &DelayState) -> Result<Array1<f64>> {
    problem.check_state(state)?;
    let mut acc = Array1::zeros(problem.dim());
    for j in 0..=problem.q {
        let term = problem.kernel.apply(j, state.column(j));
        acc = acc + term * problem.weight(j);
    }
    Ok(acc)
}

fn aligned_shift(t: f64, delta: f64) -> Option<usize> {
    if t < 0.0 || !t.is_finite() {
        return None;
    }
    let ratio = t / delta;
    let r = ratio.round();
    if (ratio - r).abs() <= 1e-9 * ratio.max(1.0) {
        Some(r as usize)
    } else {
        None
    }
}

/// Shift semigroup table: `v_steps[i]` realizes the head flow over `i` grid
/// panels.
fn head_flow_table(problem: &DelayProblem, r: usize) -> Result<Vec<StepOperator>> {
    let delta = problem.delta();
    (0..=r)
        .map(|i| problem.v_flow.step_operator(i as f64 * delta))
        .collect()
}

fn shift_once(state: DelayState, r: usize, v_steps: &[StepOperator]) -> DelayState {
    if r == 0 {
        return state;
    }
    let q = state.q();
    let DelayState { head, mut history } = state;
    if r <= q {
        history.rotate_right(r);
        for (j, slot) in history.iter_mut().enumerate().take(r) {
            *slot = v_steps[r - j].apply(head.view());
        }
    } else {
        for (j, slot) in history.iter_mut().enumerate() {
            *slot = v_steps[r - j].apply(head.view());
        }
    }
    let new_head = history[0].clone();
    DelayState {
        head: new_head,
        history,
    }
}

/// Shift-part flow over a grid-aligned time `t = r delta`.
///
/// The head advances under the semigroup of `C`; history column `j` takes
/// the old column `j - r` when available and the flowed head otherwise, so
/// column 0 always ends equal to the new head.
pub fn apply_delay_t(problem: &DelayProblem, t: f64, state: &DelayState) -> Result<DelayState> {
    problem.check_state(state)?;
    let delta = problem.delta();
    let r = aligned_shift(t, delta).ok_or(SplitkitError::GridAlignment {
        step: t,
        delta,
        suggested_q: problem.q,
    })?;
    if r == 0 {
        return Ok(state.clone());
    }
    let v_steps = head_flow_table(problem, r)?;
    Ok(shift_once(state.clone(), r, &v_steps))
}

/// Delay-part flow `S(t) = I + t B`: the head gains `t` times the kernel
/// quadrature of the history, the history itself is untouched. The
/// generator is nilpotent of order two, so the exponential is affine in `t`
/// and exactly one quadrature evaluation is needed.
pub fn apply_delay_s(problem: &DelayProblem, t: f64, state: &DelayState) -> Result<DelayState> {
    problem.check_state(state)?;
    if t < 0.0 || !t.is_finite() {
        return Err(SplitkitError::NegativeTime(t));
    }
    let bump = apply_phi(problem, state)?;
    Ok(DelayState {
        head: &state.head + &(bump * t),
        history: state.history.clone(),
    })
}

fn smallest_compatible_q(t_final: f64, n: u32, need_half: bool) -> usize {
    let h = t_final / n as f64;
    for q in 1..=1_000_000usize {
        let delta = 1.0 / q as f64;
        let full = aligned_shift(h, delta);
        match full {
            Some(r) if r >= 1
                && (!need_half || r % 2 == 0) => {
                    return q;
                }
            _ => {}
        }
    }
    n as usize
}

/// Split solution of the delay problem: `n` composite steps of length
/// `t / n`, each built from the shift flow and the delay flow in the
/// scheme's order. After every composite step column 0 is re-synced to the
/// head, so evolved states always satisfy the head compatibility condition.
pub fn delay_split_evolve(
    scheme: SplitScheme,
    problem: &DelayProblem,
    spec: EvolveSpec,
    state0: &DelayState,
) -> Result<DelayState> {
    scheme.validate()?;
    problem.check_state(state0)?;
    let h = spec.step();
    if h == 0.0 {
        return Ok(state0.clone());
    }
    let delta = problem.delta();
    let strang = matches!(scheme, SplitScheme::Strang);
    let r = match aligned_shift(h, delta) {
        Some(r) if r >= 1 && (!strang || r % 2 == 0) => r,
        _ => {
            return Err(SplitkitError::GridAlignment {
                step: h,
                delta,
                suggested_q: smallest_compatible_q(spec.t_final(), spec.n(), strang),
            })
        }
    };
    let v_steps = head_flow_table(problem, r)?;
    let mut state = state0.clone();
    for _ in 0..spec.n() {
        state = match scheme {
            SplitScheme::Sequential => {
                let moved = shift_once(state, r, &v_steps);
                apply_delay_s(problem, h, &moved)?
            }
            SplitScheme::Strang => {
                let half = shift_once(state, r / 2, &v_steps);
                let bumped = apply_delay_s(problem, h, &half)?;
                shift_once(bumped, r / 2, &v_steps)
            }
            SplitScheme::Weighted { theta } => {
                let st = apply_delay_s(problem, h, &shift_once(state.clone(), r, &v_steps))?;
                let ts = shift_once(apply_delay_s(problem, h, &state)?, r, &v_steps);
                DelayState::affine_combination(theta, &st, &ts)?
            }
        };
        state.history[0] = state.head.clone();
    }
    Ok(state)
}

/// Dense generator of the monolithic reference problem on the stacked
/// state `(head, col_1, ..., col_q)`.
///
/// The head row couples `C` with the kernel quadrature (column 0 being the
/// head itself), and the history rows approximate the transport derivative
/// by one-sided differences toward `sigma = 0`, row 1 coupling to the head.
/// The matrix exponential of this operator serves as the reference
/// trajectory, with a first-order transport bias in `1 / q` that callers
/// estimate by grid refinement before trusting it.
pub fn assemble_monolithic_generator(problem: &DelayProblem) -> Result<GeneratorRep> {
    let d = problem.dim();
    let q = problem.q();
    if q < 2 {
        return Err(SplitkitError::HistoryTooShort(q + 1));
    }
    let delta = problem.delta();
    let dim = d * (q + 1);
    let mut g = Array2::zeros((dim, dim));
    // head block: C plus quadrature terms
    let c_dense = problem.head_generator().to_dense();
    for a in 0..d {
        for b in 0..d {
            g[[a, b]] += c_dense[[a, b]];
        }
    }
    for j in 0..=q {
        let w = problem.weight(j);
        let col_offset = if j == 0 { 0 } else { j * d };
        match &problem.kernel {
            DelayKernel::Scalar(v) => {
                for a in 0..d {
                    g[[a, col_offset + a]] += w * v[j];
                }
            }
            DelayKernel::Matrix(v) => {
                for a in 0..d {
                    for b in 0..d {
                        g[[a, col_offset + b]] += w * v[j][[a, b]];
                    }
                }
            }
        }
    }
    // transport rows: (col_{j-1} - col_j) / delta
    for j in 1..=q {
        let row = j * d;
        let prev = (j - 1) * d;
        for a in 0..d {
            g[[row + a, prev + a]] += 1.0 / delta;
            g[[row + a, row + a]] -= 1.0 / delta;
        }
    }
    GeneratorRep::dense(g)
}

/// Evolves the stacked state with the monolithic generator's exponential.
pub fn monolithic_reference(
    problem: &DelayProblem,
    t: f64,
    state: &DelayState,
) -> Result<DelayState> {
    problem.check_state(state)?;
    let generator = assemble_monolithic_generator(problem)?;
    let flow = SemigroupEvaluator::dense(&generator);
    let evolved = flow.evaluate(t, state.to_stacked().view())?;
    DelayState::from_stacked(problem.dim(), problem.q(), evolved.view())
}

/// Block projection acting on the head and columnwise on the history.
#[derive(Clone, Debug)]
pub struct DelayProjection {
    pub pair: ProjectionPair,
}

/// Direction of a block projection application.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectionDirection {
    Project,
    Lift,
}

/// Applies the underlying pair to the head and each history column.
pub fn delay_projection_apply(
    dproj: &DelayProjection,
    direction: ProjectionDirection,
    state: &DelayState,
) -> Result<DelayState> {
    let map = |x: ArrayView1<f64>| match direction {
        ProjectionDirection::Project => dproj.pair.project(x),
        ProjectionDirection::Lift => dproj.pair.lift(x),
    };
    let head = map(state.head())?;
    let mut history = Vec::with_capacity(state.q() + 1);
    for j in 0..=state.q() {
        history.push(map(state.column(j))?);
    }
    Ok(DelayState { head, history })
}

/// One recorded point of a head trajectory.
#[derive(Clone, Debug)]
pub struct TrajectoryPoint {
    pub step: u32,
    pub time: f64,
    pub head: Array1<f64>,
}

/// Writes a head trajectory as CSV with columns `step,time,head_0..head_{d-1}`.
pub fn write_trajectory_csv(
    out: &mut impl Write,
    points: &[TrajectoryPoint],
) -> std::io::Result<()> {
    let d = points.first().map(|p| p.head.len()).unwrap_or(0);
    let heads: Vec<String> = (0..d).map(|i| format!("head_{i}")).collect();
    writeln!(out, "step,time,{}", heads.join(","))?;
    for p in points {
        let vals: Vec<String> = p.head.iter().map(|&v| g17(v)).collect();
        writeln!(out, "{},{},{}", p.step, g17(p.time), vals.join(","))?;
    }
    Ok(())
}

/// Writes one history snapshot as CSV with columns `sigma,comp_0..comp_{d-1}`,
/// sigma ascending from -1 to 0.
pub fn write_history_csv(out: &mut impl Write, state: &DelayState) -> std::io::Result<()> {
    let d = state.dim();
    let comps: Vec<String> = (0..d).map(|i| format!("comp_{i}")).collect();
    writeln!(out, "sigma,{}", comps.join(","))?;
    let q = state.q();
    for j in (0..=q).rev() {
        let sigma = if j == 0 { 0.0 } else { -(j as f64) * state.delta() };
        let vals: Vec<String> = state.column(j).iter().map(|&v| g17(v)).collect();
        writeln!(out, "{},{}", g17(sigma), vals.join(","))?;
    }
    Ok(())
}
