//! Property tests for the algebraic invariants of the steppers, the
//! delay flows, and the CSV float format.

use ndarray::{Array1, Array2};
use proptest::prelude::*;
use splitkit::delay::{self, DelayKernel, DelayProblem};
use splitkit::gfmt::g17;
use splitkit::linalg;
use splitkit::problems::{self, KernelShape};
use splitkit::semigroup::{EvolveSpec, GeneratorRep, SemigroupEvaluator};
use splitkit::splitting::{self, SplitScheme};

fn bounded_matrix(dim: usize) -> impl Strategy<Value = Array2<f64>> {
    proptest::collection::vec(-1.0..1.0f64, dim * dim)
        .prop_map(move |v| Array2::from_shape_vec((dim, dim), v).unwrap())
}

fn bounded_vector(dim: usize) -> impl Strategy<Value = Array1<f64>> {
    proptest::collection::vec(-2.0..2.0f64, dim).prop_map(Array1::from_vec)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generator_action_is_linear(
        m in bounded_matrix(4),
        x in bounded_vector(4),
        y in bounded_vector(4),
        alpha in -2.0..2.0f64,
        beta in -2.0..2.0f64,
    ) {
        let g = GeneratorRep::dense(m).unwrap();
        let lhs = g.apply((&x * alpha + &y * beta).view()).unwrap();
        let rhs = g.apply(x.view()).unwrap() * alpha + g.apply(y.view()).unwrap() * beta;
        let gap = linalg::vec_norm((&lhs - &rhs).view());
        prop_assert!(gap <= 1e-12 * (1.0 + linalg::vec_norm(lhs.view())));
    }

    #[test]
    fn semigroup_law_holds_on_samples(
        m in bounded_matrix(5),
        x in bounded_vector(5),
        s in 0.05..1.0f64,
        t in 0.05..1.0f64,
    ) {
        let g = GeneratorRep::dense(m).unwrap();
        let flow = SemigroupEvaluator::dense(&g);
        let chained = flow.evaluate(s, flow.evaluate(t, x.view()).unwrap().view()).unwrap();
        let direct = flow.evaluate(s + t, x.view()).unwrap();
        let gap = linalg::vec_norm((&chained - &direct).view());
        prop_assert!(gap <= 1e-11 * (1.0 + linalg::vec_norm(direct.view())));
    }

    #[test]
    fn weighted_step_is_the_stated_combination(
        a in bounded_matrix(4),
        b in bounded_matrix(4),
        x in bounded_vector(4),
        theta in 0.01..0.99f64,
        h in 0.01..0.8f64,
    ) {
        let t_flow = SemigroupEvaluator::dense(&GeneratorRep::dense(a).unwrap());
        let s_flow = SemigroupEvaluator::dense(&GeneratorRep::dense(b).unwrap());
        let weighted = splitting::split_step(
            SplitScheme::weighted(theta).unwrap(), &t_flow, &s_flow, h, x.view()).unwrap();
        let st = s_flow.evaluate(h, t_flow.evaluate(h, x.view()).unwrap().view()).unwrap();
        let ts = t_flow.evaluate(h, s_flow.evaluate(h, x.view()).unwrap().view()).unwrap();
        let manual = &st * theta + &ts * (1.0 - theta);
        let gap = linalg::vec_norm((&weighted - &manual).view());
        prop_assert!(gap <= 1e-12 * (1.0 + linalg::vec_norm(manual.view())));
    }

    #[test]
    fn identity_collapse_under_zero_generators(
        a in bounded_matrix(3),
        x in bounded_vector(3),
        h in 0.01..1.0f64,
    ) {
        let t_flow = SemigroupEvaluator::dense(&GeneratorRep::dense(a).unwrap());
        let zero = SemigroupEvaluator::from_generator(&GeneratorRep::Zero(3));
        let want = t_flow.evaluate(h, x.view()).unwrap();
        for scheme in [SplitScheme::Sequential, SplitScheme::Strang, SplitScheme::weighted(0.37).unwrap()] {
            // zero second flow collapses to the first flow
            let got = splitting::split_step(scheme, &t_flow, &zero, h, x.view()).unwrap();
            prop_assert!(linalg::vec_norm((&got - &want).view()) <= 1e-12 * (1.0 + linalg::vec_norm(want.view())));
            // zero first flow collapses to the second flow
            let got = splitting::split_step(scheme, &zero, &t_flow, h, x.view()).unwrap();
            prop_assert!(linalg::vec_norm((&got - &want).view()) <= 1e-12 * (1.0 + linalg::vec_norm(want.view())));
        }
    }

    #[test]
    fn commuting_diagonals_evolve_exactly(
        da in proptest::collection::vec(-2.0..0.5f64, 4),
        db in proptest::collection::vec(-2.0..0.5f64, 4),
        x in bounded_vector(4),
        n in 1u32..24,
    ) {
        let a = Array1::from_vec(da);
        let b = Array1::from_vec(db);
        let t_flow = SemigroupEvaluator::from_generator(&GeneratorRep::Diagonal(a.clone()));
        let s_flow = SemigroupEvaluator::from_generator(&GeneratorRep::Diagonal(b.clone()));
        let reference = SemigroupEvaluator::from_generator(&GeneratorRep::Diagonal(&a + &b));
        let spec = EvolveSpec::new(1.0, n).unwrap();
        let exact = reference.evaluate(1.0, x.view()).unwrap();
        for scheme in [SplitScheme::Sequential, SplitScheme::Strang, SplitScheme::weighted(0.5).unwrap()] {
            let got = splitting::split_evolve(scheme, &t_flow, &s_flow, spec, x.view()).unwrap();
            let rel = linalg::vec_norm((&got - &exact).view()) / (1.0 + linalg::vec_norm(exact.view()));
            prop_assert!(rel <= 1e-10, "{} rel {rel}", scheme.label());
        }
    }

    #[test]
    fn delay_kernel_flow_is_affine_in_time(
        kappa in -0.8..0.8f64,
        s in 0.0..0.7f64,
        t in 0.0..0.7f64,
        head in -2.0..2.0f64,
    ) {
        let q = 8;
        let problem = DelayProblem::new(
            GeneratorRep::Zero(1),
            DelayKernel::Scalar(vec![kappa; q + 1]),
            kappa.abs(),
        ).unwrap();
        let state = delay::init_state(
            Array1::from_elem(1, head),
            vec![Array1::from_elem(1, head); q + 1],
            false,
        ).unwrap();
        let chained = delay::apply_delay_s(&problem, s,
            &delay::apply_delay_s(&problem, t, &state).unwrap()).unwrap();
        let direct = delay::apply_delay_s(&problem, s + t, &state).unwrap();
        prop_assert!((chained.head()[0] - direct.head()[0]).abs() <= 1e-13);
    }

    #[test]
    fn delay_shift_semigroup_law_on_grid(
        c in -2.0..0.0f64,
        r in 1usize..5,
        s in 1usize..5,
    ) {
        let q = 12;
        let problem = problems::scalar_delay_ode(q, c, KernelShape::Constant(0.2)).unwrap();
        let delta = 1.0 / q as f64;
        let head = Array1::from_elem(1, 1.0);
        let history: Vec<Array1<f64>> = (0..=q)
            .map(|j| Array1::from_elem(1, (0.3 * (-(j as f64) * delta)).exp()))
            .collect();
        let state = delay::init_state(head, history, false).unwrap();
        let first = delay::apply_delay_t(&problem, r as f64 * delta, &state).unwrap();
        let chained = delay::apply_delay_t(&problem, s as f64 * delta, &first).unwrap();
        let direct = delay::apply_delay_t(&problem, (r + s) as f64 * delta, &state).unwrap();
        prop_assert!((chained.head()[0] - direct.head()[0]).abs() <= 1e-12);
        for j in 0..=q {
            let gap = (chained.column(j)[0] - direct.column(j)[0]).abs();
            prop_assert!(gap <= 1e-12, "column {j} gap {gap}");
        }
    }

    #[test]
    fn g17_round_trips(value in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
        let text = g17(value);
        let back: f64 = text.parse().unwrap();
        prop_assert_eq!(back.to_bits(), value.to_bits(), "via {}", text);
    }

    #[test]
    fn projection_round_trip_shrinks_for_smooth_data(
        c1 in -1.0..1.0f64,
        c2 in -1.0..1.0f64,
    ) {
        let n_ref = 512;
        let sample = Array1::from_shape_fn(n_ref, |i| {
            let x = i as f64 / n_ref as f64;
            c1 * (2.0 * std::f64::consts::PI * x).sin() + c2 * (4.0 * std::f64::consts::PI * x).cos()
        });
        let mut prev = f64::INFINITY;
        for m in [16usize, 32, 64, 128] {
            let pair = splitkit::spatial::ProjectionPair::periodic_sampling_linear(n_ref, m).unwrap();
            prop_assert!(pair.pj_identity_defect() <= 1e-14);
            let defect = pair.jp_defect(sample.view()).unwrap();
            prop_assert!(defect <= prev * (1.0 + 1e-9), "defect grew: {defect} > {prev}");
            prev = defect;
        }
    }
}
