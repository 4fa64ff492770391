use pairwise_rkhs::kernels::{gram_matrix, KernelSpec, RkhsFunction};
use pairwise_rkhs::losses::PairwiseLoss;
use pairwise_rkhs::risk::{empirical_risk, empirical_shifted_risk, Dataset};
use pairwise_rkhs::robustness::{gateaux_derivative, hessian_operator, total_variation, DiscreteMeasure, OPERATOR_TOL};
use pairwise_rkhs::solver::{fit, SolverOptions};
use proptest::prelude::*;

fn points(n: std::ops::Range<usize>, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, d), n)
}

fn smooth_loss() -> impl Strategy<Value = PairwiseLoss> {
    prop_oneof![
        (0.2..2.0f64).prop_map(|h| PairwiseLoss::Mee { h }),
        (0.05..2.0f64).prop_map(|a| PairwiseLoss::LogisticPairwise { a }),
        Just(PairwiseLoss::Squared),
        Just(PairwiseLoss::LsRanking),
        (0.05..2.0f64).prop_map(|a| PairwiseLoss::LogisticRanking { a }),
    ]
}

fn dataset(n: std::ops::Range<usize>) -> impl Strategy<Value = Dataset> {
    points(n, 2).prop_flat_map(|xs| {
        let len = xs.len();
        (Just(xs), prop::collection::vec(-2.0..2.0f64, len))
    })
    .prop_map(|(xs, ys)| Dataset::new(xs, ys).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernels_are_symmetric_and_bounded(x in points(2..3, 3), gamma in 0.1..5.0f64) {
        for k in [KernelSpec::gaussian(gamma).unwrap(), KernelSpec::abel(gamma).unwrap()] {
            let a = k.eval(&x[0], &x[1]).unwrap();
            prop_assert_eq!(a, k.eval(&x[1], &x[0]).unwrap());
            prop_assert!(a > 0.0 && a <= 1.0);
            prop_assert!(k.eval(&x[0], &x[0]).unwrap() <= k.sup_norm().powi(2));
        }
    }

    #[test]
    fn gram_is_psd(xs in points(1..30, 2), gamma in 0.1..5.0f64) {
        let g = gram_matrix(&KernelSpec::gaussian(gamma).unwrap(), &xs).unwrap();
        prop_assert!(g.min_eigenvalue() >= -1e-8 * g.max_abs());
    }

    #[test]
    fn evaluations_respect_the_sup_norm_bound(
        anchors in points(1..10, 2),
        coef in prop::collection::vec(-5.0..5.0f64, 10),
        probes in points(50..51, 2),
    ) {
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let f = RkhsFunction::new(coef[..anchors.len()].to_vec(), anchors, kernel.clone()).unwrap();
        let bound = kernel.sup_norm() * f.norm_sq().unwrap().sqrt() + 1e-10;
        for v in f.evaluate(&probes).unwrap() {
            prop_assert!(v.abs() <= bound);
        }
    }

    #[test]
    fn gradients_match_central_differences(
        loss in smooth_loss(),
        y in -3.0..3.0f64, yt in -3.0..3.0f64, t in -3.0..3.0f64, tt in -3.0..3.0f64,
    ) {
        let h = 1e-6;
        let (d5, d6) = loss.grad(y, yt, t, tt);
        let n5 = (loss.value(y, yt, t + h, tt) - loss.value(y, yt, t - h, tt)) / (2.0 * h);
        let n6 = (loss.value(y, yt, t, tt + h) - loss.value(y, yt, t, tt - h)) / (2.0 * h);
        prop_assert!((d5 - n5).abs() <= 1e-5 * d5.abs().max(1.0));
        prop_assert!((d6 - n6).abs() <= 1e-5 * d6.abs().max(1.0));
    }

    #[test]
    fn convex_hessians_are_psd(
        loss in smooth_loss(),
        y in -3.0..3.0f64, yt in -3.0..3.0f64, t in -3.0..3.0f64, tt in -3.0..3.0f64,
    ) {
        let m = loss.hessian(y, yt, t, tt).unwrap();
        prop_assert_eq!(m[0][1], m[1][0]);
        if loss.constants().convex {
            let tr = m[0][0] + m[1][1];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let min_eig = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());
            prop_assert!(min_eig >= -1e-12);
        }
    }

    #[test]
    fn shifted_risk_differs_by_the_risk_at_zero(data in dataset(1..12), loss in smooth_loss()) {
        let f: Vec<f64> = data.ys().iter().map(|y| 0.5 * y.sin()).collect();
        let zero = vec![0.0; data.len()];
        let lhs = empirical_shifted_risk(&loss, &data, &f).unwrap();
        let rhs = empirical_risk(&loss, &data, &f).unwrap() - empirical_risk(&loss, &data, &zero).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn squared_risk_is_twice_the_variance(data in dataset(1..40)) {
        let f: Vec<f64> = data.xs().iter().map(|x| x[0] - x[1]).collect();
        let r: Vec<f64> = data.ys().iter().zip(&f).map(|(y, v)| y - v).collect();
        let n = r.len() as f64;
        let mean = r.iter().sum::<f64>() / n;
        let var = r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let risk = empirical_risk(&PairwiseLoss::Squared, &data, &f).unwrap();
        prop_assert!((risk - 2.0 * var).abs() <= 1e-12 * (2.0 * var).max(1e-300) + 1e-15);
    }

    #[test]
    fn total_variation_is_a_metric(
        w in prop::collection::vec(prop::collection::vec(0.01..1.0f64, 4), 3),
    ) {
        let atoms: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let ys = vec![0.0, 1.0, 0.0, 1.0];
        let m: Vec<DiscreteMeasure> = w.iter().map(|raw| {
            let s: f64 = raw.iter().sum();
            let mut p: Vec<f64> = raw.iter().map(|v| v / s).collect();
            p[3] = 1.0 - p[..3].iter().sum::<f64>();
            DiscreteMeasure::new(atoms.clone(), ys.clone(), p).unwrap()
        }).collect();
        prop_assert_eq!(total_variation(&m[0], &m[0]), 0.0);
        prop_assert_eq!(total_variation(&m[0], &m[1]), total_variation(&m[1], &m[0]));
        prop_assert!(total_variation(&m[0], &m[2]) <= total_variation(&m[0], &m[1]) + total_variation(&m[1], &m[2]) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn influence_invariants(
        data in dataset(3..15),
        a in 0.1..1.0f64,
        lambda in 0.05..1.0f64,
        x0 in prop::collection::vec(-6.0..6.0f64, 2),
        y0 in -20.0..20.0f64,
        h in prop::collection::vec(-1.0..1.0f64, 16),
    ) {
        let kernel = KernelSpec::gaussian(1.0).unwrap();
        let opts = SolverOptions { tol: 1e-11, ..SolverOptions::default() };
        let model = fit(&PairwiseLoss::LogisticPairwise { a }, &data, &kernel, lambda, &opts).unwrap();
        prop_assume!(model.diagnostics.converged);

        let at_p = gateaux_derivative(&model, &data, &DiscreteMeasure::empirical(&data)).unwrap();
        prop_assert!(at_p.h_norm <= 1e-10);

        let q = DiscreteMeasure::point_mass(x0, y0).unwrap();
        let r = gateaux_derivative(&model, &data, &q).unwrap();
        prop_assert!(r.operator_residual <= OPERATOR_TOL * r.t_norm.max(1.0));
        prop_assert!(r.bound_2lambda_check);

        let op = hessian_operator(&model, &data, &q).unwrap();
        let h = &h[..op.dim()];
        let mh = op.apply(h);
        prop_assert!(op.inner(&mh, h) >= 2.0 * lambda * op.inner(h, h) - 1e-8);
    }
}
