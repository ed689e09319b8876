//! Splitting steppers and the numerical probes around them: one-step and
//! composed split evolution, consistency defects, stability envelope scans,
//! and empirical convergence-order fits.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Result, SplitkitError};
use crate::linalg;
use crate::parallel;
use crate::semigroup::{EvolveSpec, SemigroupEvaluator, StepOperator};

/// Choice of splitting procedure.
///
/// One step of length `h` applies, with `T` and `S` the sub-flows,
///
/// * `Sequential`: `S(h) T(h)`
/// * `Strang`: `T(h/2) S(h) T(h/2)`
/// * `Weighted(theta)`: `theta S(h) T(h) + (1 - theta) T(h) S(h)`
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SplitScheme {
    Sequential,
    Strang,
    Weighted { theta: f64 },
}

impl SplitScheme {
    /// Weighted scheme with the weight validated to lie strictly in (0, 1).
    pub fn weighted(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(SplitkitError::InvalidTheta(theta));
        }
        Ok(SplitScheme::Weighted { theta })
    }

    pub fn validate(&self) -> Result<()> {
        if let SplitScheme::Weighted { theta } = self {
            if !(*theta > 0.0 && *theta < 1.0) {
                return Err(SplitkitError::InvalidTheta(*theta));
            }
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        match self {
            SplitScheme::Sequential => "sequential".to_string(),
            SplitScheme::Strang => "strang".to_string(),
            SplitScheme::Weighted { theta } => format!("weighted({theta})"),
        }
    }
}

fn check_pair(t_flow: &SemigroupEvaluator, s_flow: &SemigroupEvaluator) -> Result<usize> {
    if t_flow.dim() != s_flow.dim() {
        return Err(SplitkitError::DimensionMismatch {
            expected: t_flow.dim(),
            got: s_flow.dim(),
        });
    }
    Ok(t_flow.dim())
}

/// One composite splitting step of length `h` applied to `x`.
pub fn split_step(
    scheme: SplitScheme,
    t_flow: &SemigroupEvaluator,
    s_flow: &SemigroupEvaluator,
    h: f64,
    x: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    scheme.validate()?;
    if h <= 0.0 || !h.is_finite() {
        return Err(SplitkitError::NonPositiveStep(h));
    }
    check_pair(t_flow, s_flow)?;
    match scheme {
        SplitScheme::Sequential => {
            let y = t_flow.evaluate(h, x)?;
            s_flow.evaluate(h, y.view())
        }
        SplitScheme::Strang => {
            let y = t_flow.evaluate(h / 2.0, x)?;
            let z = s_flow.evaluate(h, y.view())?;
            t_flow.evaluate(h / 2.0, z.view())
        }
        SplitScheme::Weighted { theta } => {
            let st = s_flow.evaluate(h, t_flow.evaluate(h, x)?.view())?;
            let ts = t_flow.evaluate(h, s_flow.evaluate(h, x)?.view())?;
            Ok(&st * theta + &ts * (1.0 - theta))
        }
    }
}

/// Applies the one-step operators of the scheme, precomputed at step `h`.
struct SchemeStepper {
    scheme: SplitScheme,
    t_h: StepOperator,
    s_h: StepOperator,
    t_half: Option<StepOperator>,
}

impl SchemeStepper {
    fn new(
        scheme: SplitScheme,
        t_flow: &SemigroupEvaluator,
        s_flow: &SemigroupEvaluator,
        h: f64,
    ) -> Result<Self> {
        let t_half = match scheme {
            SplitScheme::Strang => Some(t_flow.step_operator(h / 2.0)?),
            _ => None,
        };
        Ok(SchemeStepper {
            scheme,
            t_h: t_flow.step_operator(h)?,
            s_h: s_flow.step_operator(h)?,
            t_half,
        })
    }

    fn step(&self, x: ArrayView1<f64>) -> Array1<f64> {
        match self.scheme {
            SplitScheme::Sequential => self.s_h.apply(self.t_h.apply(x).view()),
            SplitScheme::Strang => {
                let t2 = self.t_half.as_ref().expect("half step present");
                t2.apply(self.s_h.apply(t2.apply(x).view()).view())
            }
            SplitScheme::Weighted { theta } => {
                let st = self.s_h.apply(self.t_h.apply(x).view());
                let ts = self.t_h.apply(self.s_h.apply(x).view());
                &st * theta + &ts * (1.0 - theta)
            }
        }
    }
}

/// Split solution at the fixed time level: `n` steps of length `t/n`.
pub fn split_evolve(
    scheme: SplitScheme,
    t_flow: &SemigroupEvaluator,
    s_flow: &SemigroupEvaluator,
    spec: EvolveSpec,
    x: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    scheme.validate()?;
    check_pair(t_flow, s_flow)?;
    let h = spec.step();
    if h == 0.0 {
        return Ok(x.to_owned());
    }
    let stepper = SchemeStepper::new(scheme, t_flow, s_flow, h)?;
    let mut state = x.to_owned();
    for _ in 0..spec.n() {
        state = stepper.step(state.view());
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err(SplitkitError::NonFiniteInput);
    }
    Ok(state)
}

/// Local consistency defect of the scheme against a reference flow.
///
/// Returns `max over t in t_grid of norm((F(h) u(t) - u(t + h)) / h)` where
/// `u(t)` is produced by `reference`. A consistent scheme drives this to
/// zero as `h` shrinks.
pub fn consistency_defect(
    scheme: SplitScheme,
    t_flow: &SemigroupEvaluator,
    s_flow: &SemigroupEvaluator,
    reference: &SemigroupEvaluator,
    h: f64,
    t_grid: &[f64],
    x: ArrayView1<f64>,
) -> Result<f64> {
    if t_grid.is_empty() {
        return Err(SplitkitError::EmptyGrid);
    }
    let mut worst = 0.0_f64;
    for &t in t_grid {
        let u_t = reference.evaluate(t, x)?;
        let stepped = split_step(scheme, t_flow, s_flow, h, u_t.view())?;
        let u_next = reference.evaluate(t + h, x)?;
        let defect = linalg::vec_norm((&stepped - &u_next).view()) / h;
        worst = worst.max(defect);
    }
    Ok(worst)
}

/// Which one-step product a stability scan measures.
///
/// `Forward` is the scheme as written, `Reversed` swaps the roles of the
/// two sub-flows, and `StrangSym` is the symmetrized product
/// `S(h/2) T(h) S(h/2)`. Weighted schemes always merge both orderings of
/// the weighted average into one scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanVariant {
    Forward,
    Reversed,
    StrangSym,
}

impl ScanVariant {
    pub fn label(&self) -> &'static str {
        match self {
            ScanVariant::Forward => "forward",
            ScanVariant::Reversed => "reversed",
            ScanVariant::StrangSym => "strang-sym",
        }
    }
}

/// One observed power norm in a stability scan.
#[derive(Clone, Copy, Debug)]
pub struct StabilityObservation {
    pub k: u32,
    pub n: u32,
    /// Elapsed time `k t / n` covered by the `k`-fold product.
    pub tau: f64,
    pub norm: f64,
}

/// Fitted exponential envelope dominating all observed power norms.
#[derive(Clone, Debug)]
pub struct StabilityEstimate {
    pub m_hat: f64,
    pub omega_hat: f64,
    pub max_norm_observed: f64,
    pub observations: Vec<StabilityObservation>,
}

impl StabilityEstimate {
    /// Checks that every observation sits under the fitted envelope.
    pub fn dominates_observations(&self) -> bool {
        self.observations
            .iter()
            .all(|o| o.norm <= self.m_hat * (self.omega_hat * o.tau).exp() * (1.0 + 1e-12))
    }
}

fn step_matrices(
    scheme: SplitScheme,
    variant: ScanVariant,
    t_flow: &SemigroupEvaluator,
    s_flow: &SemigroupEvaluator,
    h: f64,
) -> Result<Vec<Array2<f64>>> {
    let t_h = t_flow.step_operator(h)?.to_matrix();
    let s_h = s_flow.step_operator(h)?.to_matrix();
    Ok(match scheme {
        SplitScheme::Weighted { theta } => {
            let st = s_h.dot(&t_h);
            let ts = t_h.dot(&s_h);
            let fwd = &st * theta + &ts * (1.0 - theta);
            let rev = &ts * theta + &st * (1.0 - theta);
            vec![fwd, rev]
        }
        SplitScheme::Strang => match variant {
            ScanVariant::Forward => {
                let t_2 = t_flow.step_operator(h / 2.0)?.to_matrix();
                vec![t_2.dot(&s_h).dot(&t_2)]
            }
            ScanVariant::Reversed | ScanVariant::StrangSym => {
                let s_2 = s_flow.step_operator(h / 2.0)?.to_matrix();
                vec![s_2.dot(&t_h).dot(&s_2)]
            }
        },
        SplitScheme::Sequential => match variant {
            ScanVariant::Forward => vec![s_h.dot(&t_h)],
            ScanVariant::Reversed => vec![t_h.dot(&s_h)],
            ScanVariant::StrangSym => {
                let s_2 = s_flow.step_operator(h / 2.0)?.to_matrix();
                vec![s_2.dot(&t_h).dot(&s_2)]
            }
        },
    })
}

/// Scans power norms `norm(F(t/n)^k)` for `1 <= k <= n <= n_max` and fits
/// the tightest exponential envelope `m_hat exp(omega_hat tau)` over them.
///
/// The canonical fit keeps `m_hat` minimal first: `omega_hat` is the
/// smallest rate that dominates every observation with `m_hat = 1`, and
/// `m_hat` then absorbs rounding slack. Products are materialized densely,
/// which is intended for moderate dimensions.
pub fn stability_scan(
    scheme: SplitScheme,
    t_flow: &SemigroupEvaluator,
    s_flow: &SemigroupEvaluator,
    t_final: f64,
    n_max: u32,
    variant: ScanVariant,
) -> Result<StabilityEstimate> {
    scheme.validate()?;
    check_pair(t_flow, s_flow)?;
    if n_max == 0 {
        return Err(SplitkitError::NonPositiveStep(0.0));
    }
    if t_final <= 0.0 || !t_final.is_finite() {
        return Err(SplitkitError::NegativeTime(t_final));
    }
    let per_n: Vec<Result<Vec<StabilityObservation>>> =
        parallel::map_indexed(n_max as usize, |idx| {
            let n = idx as u32 + 1;
            let h = t_final / n as f64;
            let mats = step_matrices(scheme, variant, t_flow, s_flow, h)?;
            let mut obs = Vec::with_capacity(mats.len() * n as usize);
            for f in &mats {
                let mut power = f.clone();
                for k in 1..=n {
                    let norm = linalg::spectral_norm(power.view())?;
                    if !norm.is_finite() {
                        return Err(SplitkitError::NormEstimation(format!(
                            "non-finite power norm at k = {k}, n = {n}"
                        )));
                    }
                    obs.push(StabilityObservation {
                        k,
                        n,
                        tau: k as f64 * h,
                        norm,
                    });
                    if k < n {
                        power = power.dot(f);
                    }
                }
            }
            Ok(obs)
        });
    let mut observations = Vec::new();
    for group in per_n {
        observations.extend(group?);
    }
    let mut omega = f64::NEG_INFINITY;
    let mut max_norm = 0.0_f64;
    for o in &observations {
        max_norm = max_norm.max(o.norm);
        if o.norm > 0.0 {
            omega = omega.max(o.norm.ln() / o.tau);
        }
    }
    if !omega.is_finite() {
        omega = 0.0;
    }
    let mut m_hat = 1.0_f64;
    for o in &observations {
        m_hat = m_hat.max(o.norm / (omega * o.tau).exp());
    }
    Ok(StabilityEstimate {
        m_hat,
        omega_hat: omega,
        max_norm_observed: max_norm,
        observations,
    })
}

/// Result of an empirical convergence-order fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OrderEstimate {
    /// Least-squares slope of `log e` against `log(1/n)` plus the largest
    /// absolute residual of the fit in log space.
    Order { p: f64, residual: f64 },
    /// Errors at or below the exactness floor; fitting would model noise.
    Exact,
}

impl OrderEstimate {
    pub fn order(&self) -> Option<f64> {
        match self {
            OrderEstimate::Order { p, .. } => Some(*p),
            OrderEstimate::Exact => None,
        }
    }
}

/// Fits the empirical convergence order from `(n, error)` samples.
///
/// `exact_floor` is the noise level below which errors are treated as
/// exact; `100 * f64::EPSILON * norm(reference)` is the conventional choice.
pub fn order_estimate(points: &[(u32, f64)], exact_floor: f64) -> Result<OrderEstimate> {
    if points.len() < 3 {
        return Err(SplitkitError::TooFewPoints(points.len()));
    }
    for w in points.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(SplitkitError::NonIncreasingSteps);
        }
    }
    if points.iter().any(|&(_, e)| !e.is_finite() || e < 0.0) {
        return Err(SplitkitError::InvalidErrorSample);
    }
    if points.iter().any(|&(_, e)| e <= exact_floor.max(0.0)) {
        return Ok(OrderEstimate::Exact);
    }
    let xs: Vec<f64> = points.iter().map(|&(n, _)| -(n as f64).ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, e)| e.ln()).collect();
    let count = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / count;
    let mean_y = ys.iter().sum::<f64>() / count;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    let p = sxy / sxx;
    let intercept = mean_y - p * mean_x;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + p * x)).abs())
        .fold(0.0_f64, f64::max);
    Ok(OrderEstimate::Order { p, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::GeneratorRep;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn nilpotent_pair() -> (SemigroupEvaluator, SemigroupEvaluator) {
        let a = GeneratorRep::dense(array![[0.0, 1.0], [0.0, 0.0]]).unwrap();
        let b = GeneratorRep::dense(array![[0.0, 0.0], [1.0, 0.0]]).unwrap();
        (
            SemigroupEvaluator::dense(&a),
            SemigroupEvaluator::dense(&b),
        )
    }

    fn nilpotent_sum_flow() -> SemigroupEvaluator {
        let g = GeneratorRep::dense(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        SemigroupEvaluator::dense(&g)
    }

    #[test]
    fn zero_b_collapses_every_scheme() {
        let a = GeneratorRep::dense(array![[0.0, 1.0], [0.0, 0.0]]).unwrap();
        let t_flow = SemigroupEvaluator::dense(&a);
        let s_flow = SemigroupEvaluator::from_generator(&GeneratorRep::Zero(2));
        let x = array![0.3, -1.2];
        let schemes = [
            SplitScheme::Sequential,
            SplitScheme::Strang,
            SplitScheme::weighted(0.25).unwrap(),
        ];
        for scheme in schemes {
            let got = split_step(scheme, &t_flow, &s_flow, 0.7, x.view()).unwrap();
            let want = t_flow.evaluate(0.7, x.view()).unwrap();
            let gap = linalg::vec_norm((&got - &want).view());
            assert!(gap < 1e-14, "{} gap {gap}", scheme.label());
        }
    }

    #[test]
    fn commuting_diagonal_pair_is_exact() {
        let a = GeneratorRep::Diagonal(array![-1.0, 0.5, -0.2]);
        let b = GeneratorRep::Diagonal(array![0.3, -0.7, 1.1]);
        let t_flow = SemigroupEvaluator::from_generator(&a);
        let s_flow = SemigroupEvaluator::from_generator(&b);
        let x = array![1.0, 2.0, -3.0];
        let h = 0.83;
        let got = split_step(SplitScheme::Sequential, &t_flow, &s_flow, h, x.view()).unwrap();
        let want = array![
            (h * (-1.0 + 0.3)).exp() * 1.0,
            (h * (0.5 - 0.7)).exp() * 2.0,
            (h * (-0.2 + 1.1)).exp() * -3.0
        ];
        for i in 0..3 {
            assert_abs_diff_eq!(got[i], want[i], epsilon = 1e-14 * want[i].abs());
        }
    }

    #[test]
    fn nilpotent_one_step_values_match_hand_computation() {
        // x = (1, 0); (I + B)(I + A) x = (1, 1); exp(A + B) x = (cosh 1, sinh 1)
        let (t_flow, s_flow) = nilpotent_pair();
        let x = array![1.0, 0.0];
        let split = split_step(SplitScheme::Sequential, &t_flow, &s_flow, 1.0, x.view()).unwrap();
        assert_abs_diff_eq!(split[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(split[1], 1.0, epsilon = 1e-14);
        let exact = nilpotent_sum_flow().evaluate(1.0, x.view()).unwrap();
        assert_abs_diff_eq!(exact[0], 1.5430806348152437, epsilon = 1e-13);
        assert_abs_diff_eq!(exact[1], 1.1752011936438014, epsilon = 1e-13);
        let gap = linalg::vec_norm((&split - &exact).view());
        assert_abs_diff_eq!(gap, 0.5706417739401322, epsilon = 1e-12);
    }

    #[test]
    fn sequential_error_halves_as_n_doubles() {
        let (t_flow, s_flow) = nilpotent_pair();
        let exact_flow = nilpotent_sum_flow();
        let x = array![1.0, 0.0];
        let exact = exact_flow.evaluate(1.0, x.view()).unwrap();
        let mut points = Vec::new();
        for &n in &[4u32, 8, 16, 32] {
            let spec = EvolveSpec::new(1.0, n).unwrap();
            let got = split_evolve(SplitScheme::Sequential, &t_flow, &s_flow, spec, x.view())
                .unwrap();
            points.push((n, linalg::vec_norm((&got - &exact).view())));
        }
        for w in points.windows(2) {
            let ratio = w[0].1 / w[1].1;
            assert!((ratio - 2.0).abs() < 0.35, "halving ratio {ratio}");
        }
        match order_estimate(&points, 0.0).unwrap() {
            OrderEstimate::Order { p, .. } => assert!((p - 1.0).abs() < 0.1, "slope {p}"),
            OrderEstimate::Exact => panic!("unexpected exact fit"),
        }
    }

    #[test]
    fn strang_collapse_with_zero_b_over_many_steps() {
        let a = GeneratorRep::dense(array![[0.1, 1.0], [-0.4, -0.2]]).unwrap();
        let t_flow = SemigroupEvaluator::dense(&a);
        let s_flow = SemigroupEvaluator::from_generator(&GeneratorRep::Zero(2));
        let x = array![1.0, 1.0];
        let spec = EvolveSpec::new(2.0, 13).unwrap();
        let got = split_evolve(SplitScheme::Strang, &t_flow, &s_flow, spec, x.view()).unwrap();
        let want = t_flow.evaluate(2.0, x.view()).unwrap();
        assert!(linalg::vec_norm((&got - &want).view()) < 1e-12);
    }

    #[test]
    fn consistency_defect_trivial_cases() {
        let a = GeneratorRep::dense(array![[0.0, 1.0], [0.0, 0.0]]).unwrap();
        let t_flow = SemigroupEvaluator::dense(&a);
        let s_flow = SemigroupEvaluator::from_generator(&GeneratorRep::Zero(2));
        let grid = [0.0, 0.25, 0.5];
        let x = array![1.0, -0.5];
        let d = consistency_defect(
            SplitScheme::Sequential,
            &t_flow,
            &s_flow,
            &t_flow,
            0.1,
            &grid,
            x.view(),
        )
        .unwrap();
        assert!(d < 1e-12, "defect {d}");
        // commuting diagonal pair under Strang is exact as well
        let da = GeneratorRep::Diagonal(array![-1.0, 0.4]);
        let db = GeneratorRep::Diagonal(array![0.2, -0.3]);
        let flow_a = SemigroupEvaluator::from_generator(&da);
        let flow_b = SemigroupEvaluator::from_generator(&db);
        let sum = GeneratorRep::Diagonal(array![-0.8, 0.1]);
        let flow_sum = SemigroupEvaluator::from_generator(&sum);
        let d2 = consistency_defect(
            SplitScheme::Strang,
            &flow_a,
            &flow_b,
            &flow_sum,
            0.1,
            &grid,
            x.view(),
        )
        .unwrap();
        assert!(d2 < 1e-13, "defect {d2}");
    }

    #[test]
    fn consistency_defect_shrinks_linearly_on_nilpotent_pair() {
        let (t_flow, s_flow) = nilpotent_pair();
        let reference = nilpotent_sum_flow();
        let grid = [0.0, 0.2, 0.4];
        let x = array![1.0, 0.0];
        let mut defects = Vec::new();
        for &h in &[0.1, 0.05, 0.025] {
            defects.push(
                consistency_defect(
                    SplitScheme::Sequential,
                    &t_flow,
                    &s_flow,
                    &reference,
                    h,
                    &grid,
                    x.view(),
                )
                .unwrap(),
            );
        }
        assert!(defects[0] > defects[1] && defects[1] > defects[2]);
        let r1 = defects[1] / defects[0];
        let r2 = defects[2] / defects[1];
        assert!((r1 - 0.5).abs() < 0.1, "ratio {r1}");
        assert!((r2 - 0.5).abs() < 0.1, "ratio {r2}");
    }

    #[test]
    fn consistency_defect_requires_grid() {
        let (t_flow, s_flow) = nilpotent_pair();
        let reference = nilpotent_sum_flow();
        let err = consistency_defect(
            SplitScheme::Sequential,
            &t_flow,
            &s_flow,
            &reference,
            0.1,
            &[],
            array![1.0, 0.0].view(),
        );
        assert!(matches!(err, Err(SplitkitError::EmptyGrid)));
    }

    #[test]
    fn contraction_pair_scan_has_unit_envelope() {
        let a = GeneratorRep::Diagonal(array![-1.0, -0.5, -2.0]);
        let b = GeneratorRep::Diagonal(array![-0.25, -1.5, -0.1]);
        let t_flow = SemigroupEvaluator::from_generator(&a);
        let s_flow = SemigroupEvaluator::from_generator(&b);
        for variant in [
            ScanVariant::Forward,
            ScanVariant::Reversed,
            ScanVariant::StrangSym,
        ] {
            let est = stability_scan(SplitScheme::Sequential, &t_flow, &s_flow, 1.0, 8, variant)
                .unwrap();
            assert!(est.m_hat <= 1.0 + 1e-10, "m_hat {}", est.m_hat);
            assert!(est.omega_hat <= 1e-8, "omega {}", est.omega_hat);
            assert!(est.dominates_observations());
        }
        let weighted = stability_scan(
            SplitScheme::weighted(0.5).unwrap(),
            &t_flow,
            &s_flow,
            1.0,
            8,
            ScanVariant::Forward,
        )
        .unwrap();
        assert!(weighted.m_hat <= 1.0 + 1e-10);
    }

    #[test]
    fn nilpotent_scan_is_finite_and_dominating() {
        let (t_flow, s_flow) = nilpotent_pair();
        let est = stability_scan(
            SplitScheme::Sequential,
            &t_flow,
            &s_flow,
            1.0,
            16,
            ScanVariant::Forward,
        )
        .unwrap();
        assert!(est.m_hat.is_finite() && est.omega_hat.is_finite());
        assert!(est.omega_hat > 0.0);
        assert!(est.dominates_observations());
        assert!(est.max_norm_observed <= est.m_hat * (est.omega_hat * 1.0).exp() * (1.0 + 1e-12));
    }

    #[test]
    fn order_fit_recovers_synthetic_slopes() {
        let first: Vec<(u32, f64)> = [4u32, 8, 16, 32, 64]
            .iter()
            .map(|&n| (n, 3.0 / n as f64))
            .collect();
        match order_estimate(&first, 0.0).unwrap() {
            OrderEstimate::Order { p, .. } => assert_abs_diff_eq!(p, 1.0, epsilon = 1e-6),
            _ => panic!("expected fit"),
        }
        let second: Vec<(u32, f64)> = [4u32, 8, 16, 32, 64]
            .iter()
            .map(|&n| (n, 7.0 / (n as f64 * n as f64)))
            .collect();
        match order_estimate(&second, 0.0).unwrap() {
            OrderEstimate::Order { p, .. } => assert_abs_diff_eq!(p, 2.0, epsilon = 1e-6),
            _ => panic!("expected fit"),
        }
    }

    #[test]
    fn order_fit_rejects_bad_input_and_flags_exact() {
        assert!(matches!(
            order_estimate(&[(2, 0.1), (4, 0.05)], 0.0),
            Err(SplitkitError::TooFewPoints(2))
        ));
        assert!(matches!(
            order_estimate(&[(2, 0.1), (2, 0.05), (4, 0.01)], 0.0),
            Err(SplitkitError::NonIncreasingSteps)
        ));
        let exact = order_estimate(&[(2, 1e-17), (4, 1e-17), (8, 1e-17)], 1e-14).unwrap();
        assert_eq!(exact, OrderEstimate::Exact);
        let zero = order_estimate(&[(2, 0.1), (4, 0.0), (8, 0.01)], 0.0).unwrap();
        assert_eq!(zero, OrderEstimate::Exact);
    }

    #[test]
    fn weighted_theta_is_validated() {
        assert!(SplitScheme::weighted(0.0).is_err());
        assert!(SplitScheme::weighted(1.0).is_err());
        assert!(SplitScheme::weighted(0.5).is_ok());
        let (t_flow, s_flow) = nilpotent_pair();
        let bad = SplitScheme::Weighted { theta: 1.5 };
        assert!(split_step(bad, &t_flow, &s_flow, 0.1, array![1.0, 0.0].view()).is_err());
    }

    #[test]
    fn split_step_rejects_nonpositive_h() {
        let (t_flow, s_flow) = nilpotent_pair();
        assert!(
            split_step(
                SplitScheme::Sequential,
                &t_flow,
                &s_flow,
                0.0,
                array![1.0, 0.0].view()
            )
            .is_err()
        );
    }
}
