//! Bundled, self-validating test problems feeding the other modules.
//!
//! Every builder is deterministic given its parameters and seed, re-verifies
//! the properties it claims (commutation, contraction, nilpotency), and
//! ships a reference solution: dense matrix exponentials for matrix pairs, a
//! spectral evolution on the periodic reference grid for advection plus
//! diffusion, and eigenmode-decoupled transport oracles for delay diffusion.

use std::f64::consts::PI;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::delay::{self, DelayKernel, DelayProblem, DelayState};
use crate::error::{Result, SplitkitError};
use crate::linalg::{self, VecNorm};
use crate::parallel;
use crate::semigroup::{GeneratorRep, SemigroupEvaluator};
use crate::spatial::{ApproximateFamily, FamilyLevel, ProjectionPair};

/// Properties a builder promises and re-verifies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertifiedProperty {
    Commuting,
    Contraction,
    Nilpotent,
}

/// Flavor of a bundled matrix pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixKind {
    Commuting,
    NilpotentPair,
    RandomStable,
}

impl MatrixKind {
    pub fn label(&self) -> &'static str {
        match self {
            MatrixKind::Commuting => "commuting",
            MatrixKind::NilpotentPair => "nilpotent-pair",
            MatrixKind::RandomStable => "random-stable",
        }
    }
}

impl FromStr for MatrixKind {
    type Err = SplitkitError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "commuting" => Ok(MatrixKind::Commuting),
            "nilpotent-pair" => Ok(MatrixKind::NilpotentPair),
            "random-stable" => Ok(MatrixKind::RandomStable),
            other => Err(SplitkitError::BadProblemParameter(format!(
                "unknown matrix kind {other:?}"
            ))),
        }
    }
}

/// A pair of generators with certified properties and an exponential
/// reference for the sum.
#[derive(Clone, Debug)]
pub struct MatrixProblem {
    pub name: String,
    pub kind: MatrixKind,
    pub a: GeneratorRep,
    pub b: GeneratorRep,
    pub certified: Vec<CertifiedProperty>,
}

impl MatrixProblem {
    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn t_flow(&self) -> SemigroupEvaluator {
        self.flow_of(&self.a)
    }

    pub fn s_flow(&self) -> SemigroupEvaluator {
        self.flow_of(&self.b)
    }

    fn flow_of(&self, generator: &GeneratorRep) -> SemigroupEvaluator {
        let flow = SemigroupEvaluator::from_generator(generator);
        if self.certified.contains(&CertifiedProperty::Contraction) {
            flow.with_growth_bound(1.0, 0.0)
        } else {
            flow
        }
    }

    /// Reference flow of `A + B` evaluated by dense matrix exponential.
    pub fn reference_flow(&self) -> Result<SemigroupEvaluator> {
        Ok(SemigroupEvaluator::dense(&self.a.sum(&self.b)?))
    }

    /// Deterministic generic-position initial vector of unit norm.
    pub fn sample_initial(&self) -> Array1<f64> {
        let n = self.dim();
        let mut x = Array1::from_shape_fn(n, |i| 1.0 + 0.5 * ((i + 1) as f64).sin());
        let norm = linalg::vec_norm(x.view());
        x.mapv_inplace(|v| v / norm);
        x
    }

    /// Re-checks every certified property instead of trusting the builder.
    pub fn verify_certificates(&self) -> Result<()> {
        for prop in &self.certified {
            match prop {
                CertifiedProperty::Commuting => {
                    let norm =
                        linalg::commutator_norm(&self.a.to_dense(), &self.b.to_dense());
                    if norm > 1e-12 {
                        return Err(SplitkitError::BadProblemParameter(format!(
                            "commutator norm {norm:.3e} exceeds 1e-12"
                        )));
                    }
                }
                CertifiedProperty::Contraction => {
                    for gen in [&self.a, &self.b] {
                        let flow = SemigroupEvaluator::from_generator(gen);
                        for &t in &[0.25, 0.5, 1.0, 2.0] {
                            let norm = linalg::spectral_norm(
                                flow.step_operator(t)?.to_matrix().view(),
                            )?;
                            if norm > 1.0 + 1e-10 {
                                return Err(SplitkitError::ContractionCertificate(norm));
                            }
                        }
                    }
                }
                CertifiedProperty::Nilpotent => {
                    for gen in [&self.a, &self.b] {
                        let dense = gen.to_dense();
                        let mut power = dense.clone();
                        for _ in 1..self.dim() {
                            power = power.dot(&dense);
                        }
                        if linalg::frobenius_norm(&power) > 1e-12 {
                            return Err(SplitkitError::BadProblemParameter(
                                "generator is not nilpotent".into(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Builds one of the bundled matrix pairs, bit-reproducible in
/// `(kind, dim, seed)`.
pub fn build_matrix_problem(kind: MatrixKind, dim: usize, seed: u64) -> Result<MatrixProblem> {
    if dim < 2 {
        return Err(SplitkitError::BadProblemParameter(format!(
            "matrix problems need dim >= 2, got {dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b, certified) = match kind {
        MatrixKind::Commuting => {
            let da = Array1::from_shape_fn(dim, |_| -rng.random_range(0.2..2.0));
            let db = Array1::from_shape_fn(dim, |_| -rng.random_range(0.2..2.0));
            (
                GeneratorRep::Diagonal(da),
                GeneratorRep::Diagonal(db),
                vec![CertifiedProperty::Commuting, CertifiedProperty::Contraction],
            )
        }
        MatrixKind::NilpotentPair => {
            let mut a = Array2::zeros((dim, dim));
            let mut b = Array2::zeros((dim, dim));
            for i in 0..dim - 1 {
                a[[i, i + 1]] = 1.0;
                b[[i + 1, i]] = 1.0;
            }
            (
                GeneratorRep::dense(a)?,
                GeneratorRep::dense(b)?,
                vec![CertifiedProperty::Nilpotent],
            )
        }
        MatrixKind::RandomStable => {
            let raw_a = Array2::from_shape_fn((dim, dim), |_| rng.random_range(-1.0..1.0));
            let raw_b = Array2::from_shape_fn((dim, dim), |_| rng.random_range(-1.0..1.0));
            let shift = |raw: Array2<f64>| -> Result<Array2<f64>> {
                let mu = linalg::sym_eig_max(&linalg::symmetric_part(&raw))?;
                Ok(raw - Array2::<f64>::eye(dim) * (mu + 1e-10))
            };
            (
                GeneratorRep::dense(shift(raw_a)?)?,
                GeneratorRep::dense(shift(raw_b)?)?,
                vec![CertifiedProperty::Contraction],
            )
        }
    };
    let problem = MatrixProblem {
        name: format!("{}-d{dim}-s{seed}", kind.label()),
        kind,
        a,
        b,
        certified,
    };
    problem.verify_certificates()?;
    Ok(problem)
}

/// Exact evolution of `u_t = nu u_xx - speed u_x` on a periodic unit grid,
/// realized mode by mode with the discrete Fourier transform.
#[derive(Clone, Copy, Debug)]
pub struct PeriodicSpectralFlow {
    pub n: usize,
    pub nu: f64,
    pub speed: f64,
}

impl PeriodicSpectralFlow {
    fn transform(&self, x: ArrayView1<f64>) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut cos_t = vec![0.0; n];
        let mut sin_t = vec![0.0; n];
        for (m, (c, s)) in cos_t.iter_mut().zip(sin_t.iter_mut()).enumerate() {
            let ang = 2.0 * PI * m as f64 / n as f64;
            *c = ang.cos();
            *s = ang.sin();
        }
        let mut re = vec![0.0; n];
        let mut im = vec![0.0; n];
        for k in 0..n {
            let mut sr = 0.0;
            let mut si = 0.0;
            for (j, &v) in x.iter().enumerate() {
                let idx = (j * k) % n;
                sr += v * cos_t[idx];
                si -= v * sin_t[idx];
            }
            re[k] = sr;
            im[k] = si;
        }
        (re, im)
    }

    fn inverse(&self, re: &[f64], im: &[f64]) -> Array1<f64> {
        let n = self.n;
        let mut cos_t = vec![0.0; n];
        let mut sin_t = vec![0.0; n];
        for (m, (c, s)) in cos_t.iter_mut().zip(sin_t.iter_mut()).enumerate() {
            let ang = 2.0 * PI * m as f64 / n as f64;
            *c = ang.cos();
            *s = ang.sin();
        }
        Array1::from_shape_fn(n, |i| {
            let mut acc = 0.0;
            for k in 0..n {
                let idx = (i * k) % n;
                acc += re[k] * cos_t[idx] - im[k] * sin_t[idx];
            }
            acc / n as f64
        })
    }

    fn signed_frequency(&self, k: usize) -> f64 {
        if k <= self.n / 2 {
            k as f64
        } else {
            k as f64 - self.n as f64
        }
    }

    /// Applies the solution operator over time `t`.
    pub fn evaluate(&self, t: f64, x: ArrayView1<f64>) -> Array1<f64> {
        let (mut re, mut im) = self.transform(x);
        for k in 0..self.n {
            let f = self.signed_frequency(k);
            let decay = (-4.0 * PI * PI * f * f * self.nu * t).exp();
            let phase = -2.0 * PI * f * self.speed * t;
            let (c, s) = (phase.cos() * decay, phase.sin() * decay);
            let (r0, i0) = (re[k], im[k]);
            re[k] = r0 * c - i0 * s;
            im[k] = r0 * s + i0 * c;
        }
        self.inverse(&re, &im)
    }

    /// Applies the generator `nu d^2/dx^2 - speed d/dx` spectrally.
    pub fn generator_action(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let (mut re, mut im) = self.transform(x);
        for k in 0..self.n {
            let f = self.signed_frequency(k);
            let real = -4.0 * PI * PI * f * f * self.nu;
            let imag = -2.0 * PI * f * self.speed;
            let (r0, i0) = (re[k], im[k]);
            re[k] = r0 * real - i0 * imag;
            im[k] = r0 * imag + i0 * real;
        }
        self.inverse(&re, &im)
    }
}

/// Periodic advection-diffusion with a spatial approximation ladder.
#[derive(Clone, Debug)]
pub struct AdvectionDiffusion {
    pub name: String,
    pub nu: f64,
    pub speed: f64,
    pub n_ref: usize,
    pub family: ApproximateFamily,
    pub initial: Array1<f64>,
}

/// Centered stencils for one level of the advection-diffusion ladder.
pub fn advection_diffusion_level(m: usize, nu: f64, speed: f64, n_ref: usize) -> Result<FamilyLevel> {
    if m < 8 {
        return Err(SplitkitError::BadProblemParameter(format!(
            "advection-diffusion needs m >= 8, got {m}"
        )));
    }
    let pair = ProjectionPair::periodic_sampling_linear(n_ref, m)?;
    let dx = 1.0 / m as f64;
    let mut a = Array2::zeros((m, m));
    let mut b = Array2::zeros((m, m));
    for i in 0..m {
        let left = (i + m - 1) % m;
        let right = (i + 1) % m;
        a[[i, left]] += nu / (dx * dx);
        a[[i, i]] += -2.0 * nu / (dx * dx);
        a[[i, right]] += nu / (dx * dx);
        b[[i, right]] += -speed / (2.0 * dx);
        b[[i, left]] += speed / (2.0 * dx);
    }
    FamilyLevel::new(m, pair, GeneratorRep::dense(a)?, GeneratorRep::dense(b)?)
}

/// Bundled advection-diffusion problem over a level ladder. The initial
/// data is the first sine mode on the reference grid and the reference
/// solution is its exact spectral evolution, self-checked at build time by
/// differentiating the evolution in `t` against the generator action.
pub fn build_advection_diffusion(
    m_values: &[usize],
    nu: f64,
    speed: f64,
) -> Result<AdvectionDiffusion> {
    if nu < 0.0 {
        return Err(SplitkitError::BadProblemParameter(format!(
            "diffusion coefficient must be non-negative, got {nu}"
        )));
    }
    let n_ref = 512;
    let mut levels = Vec::with_capacity(m_values.len());
    for &m in m_values {
        if n_ref % m != 0 {
            return Err(SplitkitError::BadProblemParameter(format!(
                "level m = {m} must divide the reference grid {n_ref}"
            )));
        }
        levels.push(advection_diffusion_level(m, nu, speed, n_ref)?);
    }
    let family = ApproximateFamily::new(levels)?;
    let initial = Array1::from_shape_fn(n_ref, |i| {
        (2.0 * PI * i as f64 / n_ref as f64).sin()
    });
    let problem = AdvectionDiffusion {
        name: format!("advection-diffusion-nu{nu}-a{speed}"),
        nu,
        speed,
        n_ref,
        family,
        initial,
    };
    let residual = problem.residual_self_check()?;
    if residual > 1e-10 {
        return Err(SplitkitError::BadProblemParameter(format!(
            "reference residual {residual:.3e} exceeds 1e-10"
        )));
    }
    Ok(problem)
}

impl AdvectionDiffusion {
    fn flow(&self, nu: f64, speed: f64) -> PeriodicSpectralFlow {
        PeriodicSpectralFlow {
            n: self.n_ref,
            nu,
            speed,
        }
    }

    /// Reference solution on the fine grid at time `t`.
    pub fn reference(&self, t: f64) -> Array1<f64> {
        self.flow(self.nu, self.speed).evaluate(t, self.initial.view())
    }

    /// Exact diffusion semigroup on the reference grid.
    pub fn exact_t_flow(&self) -> SemigroupEvaluator {
        let flow = self.flow(self.nu, 0.0);
        SemigroupEvaluator::custom(self.n_ref, move |t, x| flow.evaluate(t, x))
    }

    /// Exact advection semigroup on the reference grid.
    pub fn exact_s_flow(&self) -> SemigroupEvaluator {
        let flow = self.flow(0.0, self.speed);
        SemigroupEvaluator::custom(self.n_ref, move |t, x| flow.evaluate(t, x))
    }

    /// Exact combined semigroup on the reference grid.
    pub fn exact_full_flow(&self) -> SemigroupEvaluator {
        let flow = self.flow(self.nu, self.speed);
        SemigroupEvaluator::custom(self.n_ref, move |t, x| flow.evaluate(t, x))
    }

    /// Action of the combined generator, used by consistency probes.
    pub fn sum_action(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.flow(self.nu, self.speed).generator_action(x)
    }

    pub fn full_norm(&self) -> VecNorm {
        VecNorm::GridL2 {
            h: 1.0 / self.n_ref as f64,
        }
    }

    /// Smooth trigonometric samples standing in for the dense domain subset.
    pub fn smooth_samples(&self) -> Vec<Array1<f64>> {
        let n = self.n_ref;
        let grid = |f: &dyn Fn(f64) -> f64| Array1::from_shape_fn(n, |i| f(i as f64 / n as f64));
        vec![
            grid(&|x| (2.0 * PI * x).sin()),
            grid(&|x| (2.0 * PI * x).cos()),
            grid(&|x| (4.0 * PI * x).sin()),
            grid(&|x| (4.0 * PI * x).sin() + 0.5 * (6.0 * PI * x).cos()),
        ]
    }

    /// Residual of the reference evolution against the generator action,
    /// differentiated in time with a fourth-order stencil.
    pub fn residual_self_check(&self) -> Result<f64> {
        let flow = self.flow(self.nu, self.speed);
        let eps = 2e-4;
        let mut worst = 0.0_f64;
        for &t in &[0.1, 0.3] {
            let stencil = [
                (t + 2.0 * eps, -1.0),
                (t + eps, 8.0),
                (t - eps, -8.0),
                (t - 2.0 * eps, 1.0),
            ];
            let mut dudt = Array1::<f64>::zeros(self.n_ref);
            for (ts, w) in stencil {
                dudt = dudt + flow.evaluate(ts, self.initial.view()) * (w / (12.0 * eps));
            }
            let gu = flow.generator_action(flow.evaluate(t, self.initial.view()).view());
            let gap = (&dudt - &gu).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            worst = worst.max(gap);
        }
        Ok(worst)
    }
}

/// Eigenvalues and orthonormal eigenvectors of the Dirichlet Laplacian
/// stencil on `d` interior points of the unit interval, scaled by `nu`.
pub fn dirichlet_laplacian_modes(d: usize, nu: f64) -> (Array1<f64>, Array2<f64>) {
    let dx = 1.0 / (d as f64 + 1.0);
    let lambda = Array1::from_shape_fn(d, |k| {
        let angle = (k as f64 + 1.0) * PI / (d as f64 + 1.0);
        nu * (2.0 * angle.cos() - 2.0) / (dx * dx)
    });
    let scale = (2.0 / (d as f64 + 1.0)).sqrt();
    let q = Array2::from_shape_fn((d, d), |(i, k)| {
        scale * ((i as f64 + 1.0) * (k as f64 + 1.0) * PI / (d as f64 + 1.0)).sin()
    });
    (lambda, q)
}

/// Dirichlet Laplacian stencil matrix on `d` interior points, scaled by `nu`.
pub fn dirichlet_laplacian(d: usize, nu: f64) -> Array2<f64> {
    let dx = 1.0 / (d as f64 + 1.0);
    let c = nu / (dx * dx);
    Array2::from_shape_fn((d, d), |(i, j)| {
        if i == j {
            -2.0 * c
        } else if i.abs_diff(j) == 1 {
            c
        } else {
            0.0
        }
    })
}

/// Closed-form scalar kernel families, resampled exactly on any history grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelShape {
    /// `kappa(sigma) = value`
    Constant(f64),
    /// `kappa(sigma) = scale exp(rate sigma)`
    Exponential { scale: f64, rate: f64 },
}

impl KernelShape {
    pub fn eval(&self, sigma: f64) -> f64 {
        match self {
            KernelShape::Constant(v) => *v,
            KernelShape::Exponential { scale, rate } => scale * (rate * sigma).exp(),
        }
    }
}

/// Closed-form history profiles `g` with `g(0) = 1`; the initial history is
/// the separable extension `g(sigma) head`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HistoryShape {
    Constant,
    /// `g(sigma) = exp(rate sigma)`
    Exponential { rate: f64 },
}

impl HistoryShape {
    pub fn eval(&self, sigma: f64) -> f64 {
        match self {
            HistoryShape::Constant => 1.0,
            HistoryShape::Exponential { rate } => (rate * sigma).exp(),
        }
    }
}

/// Delay diffusion: a Dirichlet heat stencil head with a scalar distributed
/// delay kernel, plus analytic initial data and a mode-decoupled reference.
#[derive(Clone, Debug)]
pub struct DelayDiffusion {
    pub name: String,
    pub d: usize,
    pub q: usize,
    pub nu: f64,
    pub kappa: KernelShape,
    pub history_profile: HistoryShape,
    pub problem: DelayProblem,
    pub initial: DelayState,
}

fn sample_kernel(kappa: KernelShape, q: usize) -> (Vec<f64>, f64) {
    let delta = 1.0 / q as f64;
    let samples: Vec<f64> = (0..=q).map(|j| kappa.eval(-(j as f64) * delta)).collect();
    let bound = samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    (samples, bound)
}

/// Builds the bundled delay-diffusion problem.
///
/// The head profile is the parabola `4 s (1 - s)` on the interior grid and
/// the history is the separable extension `g(sigma) head` with
/// `g(sigma) = exp(sigma / 2)`, so it is compatible at `sigma = 0` and
/// resamples exactly on any history grid.
pub fn build_delay_diffusion(
    d: usize,
    q: usize,
    nu: f64,
    kappa: KernelShape,
) -> Result<DelayDiffusion> {
    if d == 0 || q < 2 {
        return Err(SplitkitError::BadProblemParameter(format!(
            "delay diffusion needs d >= 1 and q >= 2, got d = {d}, q = {q}"
        )));
    }
    if nu <= 0.0 {
        return Err(SplitkitError::BadProblemParameter(format!(
            "diffusion coefficient must be positive, got {nu}"
        )));
    }
    let (samples, bound) = sample_kernel(kappa, q);
    let c = GeneratorRep::dense(dirichlet_laplacian(d, nu))?;
    let problem = DelayProblem::new(c, DelayKernel::Scalar(samples), bound)?;
    let history_profile = HistoryShape::Exponential { rate: 0.5 };
    let head = Array1::from_shape_fn(d, |i| {
        let s = (i as f64 + 1.0) / (d as f64 + 1.0);
        4.0 * s * (1.0 - s)
    });
    let delta = 1.0 / q as f64;
    let history: Vec<Array1<f64>> = (0..=q)
        .map(|j| &head * history_profile.eval(-(j as f64) * delta))
        .collect();
    let initial = delay::init_state(head, history, false)?;
    Ok(DelayDiffusion {
        name: format!("delay-diffusion-d{d}-q{q}-nu{nu}"),
        d,
        q,
        nu,
        kappa,
        history_profile,
        problem,
        initial,
    })
}

/// Scalar distributed-delay problem `u' = c u + integral of kappa u_t`.
pub fn scalar_delay_ode(q: usize, c: f64, kappa: KernelShape) -> Result<DelayProblem> {
    if c > 0.0 {
        return Err(SplitkitError::BadProblemParameter(format!(
            "scalar head coefficient must be non-positive for a contraction, got {c}"
        )));
    }
    let (samples, bound) = sample_kernel(kappa, q);
    DelayProblem::new(
        GeneratorRep::Diagonal(Array1::from_elem(1, c)),
        DelayKernel::Scalar(samples),
        bound,
    )
}

/// Head value of the scalar delay problem at time `t` from the transport
/// oracle assembled on a `q_oracle` history grid.
pub fn scalar_delay_oracle_head(
    c: f64,
    kappa: KernelShape,
    history_profile: HistoryShape,
    x0: f64,
    t: f64,
    q_oracle: usize,
) -> Result<f64> {
    let problem = scalar_delay_ode(q_oracle, c, kappa)?;
    let delta = 1.0 / q_oracle as f64;
    let head = Array1::from_elem(1, x0);
    let history: Vec<Array1<f64>> = (0..=q_oracle)
        .map(|j| &head * history_profile.eval(-(j as f64) * delta))
        .collect();
    let state = delay::init_state(head, history, false)?;
    let evolved = delay::monolithic_reference(&problem, t, &state)?;
    Ok(evolved.head()[0])
}

/// Richardson-extrapolated scalar oracle head plus a conservative estimate
/// of the remaining transport bias (the leading-order correction itself).
pub fn scalar_delay_oracle_richardson(
    c: f64,
    kappa: KernelShape,
    history_profile: HistoryShape,
    x0: f64,
    t: f64,
    q_oracle: usize,
) -> Result<(f64, f64)> {
    let coarse = scalar_delay_oracle_head(c, kappa, history_profile, x0, t, q_oracle)?;
    let fine = scalar_delay_oracle_head(c, kappa, history_profile, x0, t, 2 * q_oracle)?;
    Ok((2.0 * fine - coarse, (fine - coarse).abs()))
}

/// Deterministic probe states spanning head-only, history-only, and mixed
/// regimes. Incompatible combinations are allowed on purpose: these sample
/// the whole product space for operator-norm measurements.
pub fn delay_probe_states(d: usize, q: usize) -> Vec<DelayState> {
    let delta = 1.0 / q as f64;
    let ones = Array1::from_elem(d, 1.0);
    let wave = Array1::from_shape_fn(d, |i| ((i as f64 + 1.0) * 1.3).sin());
    let zeros = Array1::zeros(d);
    let mut states = Vec::new();
    let mut push = |head: Array1<f64>, history: Vec<Array1<f64>>| {
        states.push(delay::init_state(head, history, true).expect("probe state"));
    };
    push(ones.clone(), vec![ones.clone(); q + 1]);
    push(ones.clone(), vec![zeros.clone(); q + 1]);
    push(
        zeros.clone(),
        (0..=q)
            .map(|j| &wave * (PI * j as f64 * delta).cos())
            .collect(),
    );
    push(
        wave.clone(),
        (0..=q).map(|j| &wave * (-(j as f64) * delta).exp()).collect(),
    );
    push(
        Array1::from_shape_fn(d, |i| if i % 2 == 0 { 1.0 } else { -1.0 }),
        (0..=q)
            .map(|j| &ones * if j % 2 == 0 { 1.0 } else { -1.0 })
            .collect(),
    );
    push(
        wave.clone(),
        (0..=q)
            .map(|j| &wave * (1.0 - j as f64 * delta))
            .collect(),
    );
    states
}

impl DelayDiffusion {
    /// Reference head at time `t` by decoupling the Dirichlet stencil into
    /// eigenmodes and running the scalar transport oracle per mode on a
    /// `q_oracle` grid, Richardson-extrapolated over a grid doubling.
    ///
    /// Returns the head on the interior grid and a conservative bias
    /// estimate (the Euclidean size of the Richardson correction).
    pub fn reference_head(&self, t: f64, q_oracle: usize) -> Result<(Array1<f64>, f64)> {
        let (lambda, q_mat) = dirichlet_laplacian_modes(self.d, self.nu);
        let coeffs = q_mat.t().dot(&self.initial.head());
        let kappa = self.kappa;
        let profile = self.history_profile;
        let per_mode: Vec<Result<(f64, f64)>> = parallel::map_indexed(self.d, |k| {
            if coeffs[k].abs() < 1e-300 {
                return Ok((0.0, 0.0));
            }
            let coarse =
                scalar_delay_oracle_head(lambda[k], kappa, profile, coeffs[k], t, q_oracle)?;
            let fine =
                scalar_delay_oracle_head(lambda[k], kappa, profile, coeffs[k], t, 2 * q_oracle)?;
            Ok((2.0 * fine - coarse, fine - coarse))
        });
        let mut heads = Array1::zeros(self.d);
        let mut corrections = Array1::zeros(self.d);
        for (k, r) in per_mode.into_iter().enumerate() {
            let (h, corr) = r?;
            heads[k] = h;
            corrections[k] = corr;
        }
        let head = q_mat.dot(&heads);
        let bias = linalg::vec_norm(corrections.view());
        Ok((head, bias))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delay::monolithic_reference;
    use approx::assert_abs_diff_eq;

    #[test]
    fn commuting_problem_is_diagonal_and_verified() {
        let p = build_matrix_problem(MatrixKind::Commuting, 3, 1).unwrap();
        assert!(matches!(p.a, GeneratorRep::Diagonal(_)));
        p.verify_certificates().unwrap();
    }

    #[test]
    fn nilpotent_pair_has_known_commutator() {
        let p = build_matrix_problem(MatrixKind::NilpotentPair, 2, 0).unwrap();
        let a = p.a.to_dense();
        let b = p.b.to_dense();
        let comm = a.dot(&b) - b.dot(&a);
        assert_eq!(comm[[0, 0]], 1.0);
        assert_eq!(comm[[1, 1]], -1.0);
        assert_eq!(comm[[0, 1]], 0.0);
    }

    #[test]
    fn random_stable_is_reproducible_and_contractive() {
        let p1 = build_matrix_problem(MatrixKind::RandomStable, 8, 42).unwrap();
        let p2 = build_matrix_problem(MatrixKind::RandomStable, 8, 42).unwrap();
        assert_eq!(p1.a.to_dense(), p2.a.to_dense());
        assert_eq!(p1.b.to_dense(), p2.b.to_dense());
        p1.verify_certificates().unwrap();
        let p3 = build_matrix_problem(MatrixKind::RandomStable, 8, 43).unwrap();
        assert_ne!(p1.a.to_dense(), p3.a.to_dense());
        // contraction certificates carry over into the evaluator metadata
        let bound = p1.t_flow().growth_bound().unwrap();
        assert_eq!((bound.m, bound.omega), (1.0, 0.0));
    }

    #[test]
    fn spectral_flow_decays_pure_mode() {
        let flow = PeriodicSpectralFlow {
            n: 64,
            nu: 0.01,
            speed: 0.0,
        };
        let x = Array1::from_shape_fn(64, |i| (2.0 * PI * i as f64 / 64.0).sin());
        let t = 0.5;
        let got = flow.evaluate(t, x.view());
        let factor = (-4.0 * PI * PI * 0.01 * t).exp();
        for i in 0..64 {
            assert_abs_diff_eq!(got[i], factor * x[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn spectral_flow_advects_exactly() {
        let n = 64;
        let flow = PeriodicSpectralFlow {
            n,
            nu: 0.0,
            speed: 1.0,
        };
        let x = Array1::from_shape_fn(n, |i| (2.0 * PI * i as f64 / n as f64).sin());
        // shift by a quarter period
        let got = flow.evaluate(0.25, x.view());
        for i in 0..n {
            let want = (2.0 * PI * (i as f64 / n as f64 - 0.25)).sin();
            assert_abs_diff_eq!(got[i], want, epsilon = 1e-12);
        }
    }

    #[test]
    fn advection_diffusion_builds_and_self_checks() {
        let p = build_advection_diffusion(&[16, 32], 0.01, 1.0).unwrap();
        assert_eq!(p.family.ms(), vec![16, 32]);
        let residual = p.residual_self_check().unwrap();
        assert!(residual <= 1e-10, "residual {residual}");
    }

    #[test]
    fn advection_diffusion_rejects_small_levels() {
        assert!(build_advection_diffusion(&[4], 0.01, 1.0).is_err());
    }

    #[test]
    fn identity_flow_with_zero_coefficients() {
        let p = build_advection_diffusion(&[16], 0.0, 0.0).unwrap();
        let u = p.reference(0.7);
        let gap = (&u - &p.initial).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(gap < 1e-12);
    }

    #[test]
    fn pure_decay_matches_closed_form() {
        let p = build_advection_diffusion(&[16], 0.02, 0.0).unwrap();
        let t = 0.4;
        let u = p.reference(t);
        let factor = (-4.0 * PI * PI * 0.02 * t).exp();
        for i in 0..p.n_ref {
            assert_abs_diff_eq!(u[i], factor * p.initial[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn dirichlet_modes_diagonalize_the_stencil() {
        let d = 7;
        let nu = 0.3;
        let l = dirichlet_laplacian(d, nu);
        let (lambda, q) = dirichlet_laplacian_modes(d, nu);
        // L Q = Q diag(lambda) and Q' Q = I
        let lq = l.dot(&q);
        for k in 0..d {
            for i in 0..d {
                assert_abs_diff_eq!(lq[[i, k]], lambda[k] * q[[i, k]], epsilon = 1e-10);
            }
        }
        let qtq = q.t().dot(&q);
        for i in 0..d {
            for j in 0..d {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(qtq[[i, j]], want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn delay_diffusion_certificates_hold() {
        let p = build_delay_diffusion(8, 16, 0.1, KernelShape::Constant(0.3)).unwrap();
        assert_eq!(p.problem.dim(), 8);
        assert_eq!(p.problem.q(), 16);
        // declared bound dominates the weighted kernel sum
        let weighted: f64 = (0..=16).map(|j| p.problem.weight(j) * 0.3).sum();
        assert!(weighted <= p.problem.phi_norm_bound() + 1e-15);
        assert!(p.initial.compatibility_defect() <= 1e-12);
    }

    #[test]
    fn mode_oracle_matches_full_monolithic_reference() {
        // On the same history grid the eigenmode decomposition is exact, so
        // the per-mode oracles must reproduce the full stacked exponential.
        let d = 3;
        let q = 8;
        let p = build_delay_diffusion(
            d,
            q,
            0.2,
            KernelShape::Exponential {
                scale: 0.3,
                rate: 1.0 / 3.0,
            },
        ).unwrap();
        let t = 0.5;
        let full = monolithic_reference(&p.problem, t, &p.initial).unwrap();
        let (lambda, q_mat) = dirichlet_laplacian_modes(d, 0.2);
        let coeffs = q_mat.t().dot(&p.initial.head());
        let mut mode_heads = Array1::zeros(d);
        for k in 0..d {
            mode_heads[k] = scalar_delay_oracle_head(
                lambda[k],
                p.kappa,
                p.history_profile,
                coeffs[k],
                t,
                q,
            )
            .unwrap();
        }
        let recomposed = q_mat.dot(&mode_heads);
        let gap = linalg::vec_norm((&recomposed - &full.head()).view());
        assert!(gap < 1e-11, "gap {gap}");
    }

    #[test]
    fn scalar_oracle_richardson_shrinks_bias() {
        let (_, bias_coarse) =
            scalar_delay_oracle_richardson(
                -1.0,
                KernelShape::Constant(0.3),
                HistoryShape::Constant,
                1.0,
                1.0,
                32,
            ).unwrap();
        let (_, bias_fine) =
            scalar_delay_oracle_richardson(
                -1.0,
                KernelShape::Constant(0.3),
                HistoryShape::Constant,
                1.0,
                1.0,
                64,
            ).unwrap();
        assert!(bias_fine < bias_coarse);
        let ratio = bias_coarse / bias_fine;
        assert!((ratio - 2.0).abs() < 0.5, "bias ratio {ratio}");
    }
}
