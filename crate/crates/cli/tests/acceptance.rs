//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use pairwise_rkhs::kernels::{linear_combination, KernelSpec};
use pairwise_rkhs::losses::PairwiseLoss;
use pairwise_rkhs::risk::{empirical_risk, Dataset};
use pairwise_rkhs::robustness::{
    gateaux_derivative, hessian_operator, influence_function, maxbias_probe, risk_gap, sensitivity_curve,
    stability_bound_check, total_variation, DiscreteMeasure, ScTarget, OPERATOR_TOL,
};
use pairwise_rkhs::solver::{
    bound_checks, fit_weighted, objective, stationarity_residual, FittedModel, SolverOptions,
};
use pairwise_rkhs::{fit, fit_ls_closed_form};
use pairwise_rkhs_cli::commands::load_model;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn random_data(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let ys = xs
        .iter()
        .map(|x| x.iter().enumerate().map(|(k, v)| (k as f64 + 1.0).recip() * v).sum::<f64>() + 0.3 * rng.gen_range(-1.0..1.0))
        .collect();
    Dataset::new(xs, ys).unwrap()
}

fn gaussian() -> KernelSpec {
    KernelSpec::gaussian(1.0).unwrap()
}

/// Minimizer of the squared pairwise objective from normal equations
/// assembled by explicit double sums over ordered pairs.
fn squared_normal_equations(data: &Dataset, kernel: &KernelSpec, lambda: f64) -> Vec<f64> {
    let n = data.len();
    let nf = n as f64;
    let k = DMatrix::from_fn(n, n, |i, j| kernel.eval(&data.xs()[i], &data.xs()[j]).unwrap());
    let mut q = k.clone() * lambda;
    let mut b = DVector::zeros(n);
    let ys = data.ys();
    for i in 0..n {
        for j in 0..n {
            let diff = k.column(i) - k.column(j);
            q += &diff * diff.transpose() / (nf * nf);
            b += &diff * ((ys[i] - ys[j]) / (nf * nf));
        }
    }
    q.lu().solve(&b).unwrap().iter().copied().collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut pre = 0.0f64;
    for n in 2..=6 {
        for &lambda in &[0.01, 0.1, 1.0] {
            let data = random_data(&mut rng, n, 2);
            let closed = fit_ls_closed_form(&data, &gaussian(), lambda).unwrap();
            let oracle = squared_normal_equations(&data, &gaussian(), lambda);
            pre = pre.max(max_abs_diff(closed.alpha(), &oracle) / oracle.iter().fold(1.0f64, |m, v| m.max(v.abs())));
        }
    }
    let (mut dalpha, mut dobj) = (0.0f64, 0.0f64);
    let opts = SolverOptions { tol: 1e-10, ..SolverOptions::default() };
    for _ in 0..20 {
        let data = random_data(&mut rng, 30, 2);
        for &lambda in &[0.01, 0.1, 1.0] {
            let iterative = fit(&PairwiseLoss::Squared, &data, &gaussian(), lambda, &opts).unwrap();
            let closed = fit_ls_closed_form(&data, &gaussian(), lambda).unwrap();
            dalpha = dalpha.max(max_abs_diff(iterative.alpha(), closed.alpha()));
            let (a, b) = (objective(&iterative, &data, None, false).unwrap(), objective(&closed, &data, None, false).unwrap());
            dobj = dobj.max((a - b).abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        pre <= 1e-10 && dalpha <= 1e-6 && dobj <= 1e-9 && secs < 10.0,
        format!("closed form vs double-sum normal equations {pre:.1e}; max |Δα| {dalpha:.1e}; max |Δobjective| {dobj:.1e}; {secs:.2}s"),
    )
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    let mut fits = 0;
    let mut unconverged = 0;
    for &a in &[0.01, 0.1, 1.0] {
        for _ in 0..10 {
            let data = random_data(&mut rng, 30, 2);
            let model = fit(&PairwiseLoss::LogisticPairwise { a }, &data, &gaussian(), 0.1, &SolverOptions::default()).unwrap();
            fits += 1;
            if !model.diagnostics.converged {
                unconverged += 1;
                continue;
            }
            worst = worst.max(stationarity_residual(&model, &data).unwrap());
        }
    }
    (
        unconverged == 0 && worst <= 1e-8,
        format!("{fits} fits, {unconverged} unconverged, max residual {worst:.1e}"),
    )
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn criterion_3() -> Outcome {
    let families = [
        PairwiseLoss::Mee { h: 0.8 },
        PairwiseLoss::LogisticPairwise { a: 0.3 },
        PairwiseLoss::Squared,
        PairwiseLoss::LsRanking,
        PairwiseLoss::LogisticRanking { a: 0.3 },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut grad_err, mut hess_err, mut closed_err) = (0.0f64, 0.0f64, 0.0f64);
    let mut min_eig = f64::INFINITY;
    let rel = |an: f64, num: f64| (an - num).abs() / an.abs().max(num.abs()).max(1.0);
    for loss in families {
        for _ in 0..1000 {
            let (y, yt, t, tt): (f64, f64, f64, f64) =
                (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let h = 1e-6;
            let (d5, d6) = loss.grad(y, yt, t, tt);
            let n5 = (loss.value(y, yt, t + h, tt) - loss.value(y, yt, t - h, tt)) / (2.0 * h);
            let n6 = (loss.value(y, yt, t, tt + h) - loss.value(y, yt, t, tt - h)) / (2.0 * h);
            grad_err = grad_err.max(rel(d5, n5)).max(rel(d6, n6));

            let m = loss.hessian(y, yt, t, tt).unwrap();
            let h2 = 1e-5;
            let (p5, p6) = loss.grad(y, yt, t + h2, tt);
            let (q5, q6) = loss.grad(y, yt, t - h2, tt);
            let (r5, r6) = loss.grad(y, yt, t, tt + h2);
            let (s5, s6) = loss.grad(y, yt, t, tt - h2);
            let num = [[(p5 - q5) / (2.0 * h2), (r5 - s5) / (2.0 * h2)], [(p6 - q6) / (2.0 * h2), (r6 - s6) / (2.0 * h2)]];
            for i in 0..2 {
                for j in 0..2 {
                    hess_err = hess_err.max(rel(m[i][j], num[i][j]));
                }
            }

            if let PairwiseLoss::LogisticPairwise { a } = loss {
                let u = (y - t) - (yt - tt);
                let l = sigmoid(u / a);
                let r2 = 2.0 / a * l * (1.0 - l);
                let expected = [[r2, -r2], [-r2, r2]];
                for i in 0..2 {
                    for j in 0..2 {
                        closed_err = closed_err.max((m[i][j] - expected[i][j]).abs() / expected[i][j].abs().max(1.0));
                    }
                }
            }
            if loss.constants().convex {
                let tr = m[0][0] + m[1][1];
                let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
                min_eig = min_eig.min(0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt()));
            }
        }
    }
    (
        grad_err <= 1e-5 && hess_err <= 1e-4 && closed_err <= 1e-12 && min_eig >= -1e-12,
        format!(
            "gradient rel err {grad_err:.1e}; Hessian rel err {hess_err:.1e}; logistic Hessian vs closed form {closed_err:.1e}; min eigenvalue {min_eig:.1e}"
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    let losses = [
        PairwiseLoss::LogisticPairwise { a: 0.2 },
        PairwiseLoss::Squared,
        PairwiseLoss::Mee { h: 1.0 },
        PairwiseLoss::LogisticRanking { a: 0.5 },
    ];
    for loss in losses {
        for _ in 0..5 {
            let data = random_data(&mut rng, 25, 2);
            let plain = SolverOptions { warn_nonconvex: false, ..SolverOptions::default() };
            let shifted = SolverOptions { shifted: true, ..plain.clone() };
            let a = fit(&loss, &data, &gaussian(), 0.1, &plain).unwrap();
            let b = fit(&loss, &data, &gaussian(), 0.1, &shifted).unwrap();
            worst = worst.max(max_abs_diff(a.alpha(), b.alpha()));
        }
    }
    (worst <= 1e-12, format!("max |Δα| between L and shifted-L fits {worst:.1e} over 20 fits"))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut failures = 0;
    let (mut h_margin, mut sup_margin) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..100 {
        let n = rng.gen_range(5..40);
        let data = random_data(&mut rng, n, 2);
        let a = rng.gen_range(0.05..2.0);
        let lambda = rng.gen_range(0.01..1.0);
        let model = fit(&PairwiseLoss::LogisticPairwise { a }, &data, &gaussian(), lambda, &SolverOptions::default()).unwrap();
        let b = bound_checks(&model, &data).unwrap();
        let probes: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)]).collect();
        let sup = model.predict(&probes).unwrap().iter().fold(b.sup_train, |m, v| m.max(v.abs()));
        let sup_bound = b.sup_bound.unwrap();
        if b.h_norm > b.h_norm_bound + 1e-8 || sup > sup_bound + 1e-8 {
            failures += 1;
        }
        h_margin = h_margin.min(b.h_norm_bound - b.h_norm);
        sup_margin = sup_margin.min(sup_bound - sup);
    }
    (
        failures == 0,
        format!("{failures}/100 violations; smallest slack: norm bound {h_margin:.2e}, sup bound {sup_margin:.2e}"),
    )
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let data = random_data(&mut rng, 40, 2);
    let loss = PairwiseLoss::LogisticPairwise { a: 0.5 };
    let lambda = 0.1;
    let tight = SolverOptions { tol: 1e-12, ..SolverOptions::default() };
    let model = fit(&loss, &data, &gaussian(), lambda, &tight).unwrap();

    let at_p = gateaux_derivative(&model, &data, &DiscreteMeasure::empirical(&data)).unwrap();
    let a_ok = at_p.h_norm <= 1e-10;

    let mut b_ok = true;
    let mut worst_res = 0.0f64;
    let points = [(vec![0.3, -0.2], 0.5), (vec![3.0, 3.0], 10.0), (data.xs()[7].clone(), -4.0)];
    for (x0, y0) in &points {
        let r = influence_function(&model, &data, x0, *y0).unwrap();
        b_ok &= r.operator_residual <= OPERATOR_TOL * r.t_norm.max(1.0);
        worst_res = worst_res.max(r.operator_residual / r.t_norm.max(1.0));
    }

    let (x0, y0) = (vec![0.6, -0.4], 2.0);
    let ifn = influence_function(&model, &data, &x0, y0).unwrap();
    let augmented = data.with_point(x0.clone(), y0).unwrap();
    let errors: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&eps| {
            let mut w = vec![(1.0 - eps) / 40.0; 40];
            w.push(eps);
            let fe = fit_weighted(&loss, &augmented, Some(&w), &gaussian(), lambda, &tight, None).unwrap();
            let quotient = linear_combination(&[(1.0 / eps, &fe.function), (-1.0 / eps, &model.function)]).unwrap();
            linear_combination(&[(1.0, &quotient), (-1.0, &ifn.direction)]).unwrap().norm_sq().unwrap().sqrt()
        })
        .collect();
    let ratios = [errors[0] / errors[1], errors[1] / errors[2]];
    let c_ok = ratios.iter().all(|r| (5.0..=20.0).contains(r));

    let op = hessian_operator(&model, &data, &DiscreteMeasure::point_mass(x0, y0).unwrap()).unwrap();
    let mut d_ok = true;
    let mut d_margin = f64::INFINITY;
    for _ in 0..20 {
        let h: Vec<f64> = (0..op.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let margin = op.inner(&op.apply(&h), &h) - 2.0 * lambda * op.inner(&h, &h);
        d_ok &= margin >= -1e-8;
        d_margin = d_margin.min(margin);
    }
    let secs = start.elapsed().as_secs_f64();
    (
        a_ok && b_ok && c_ok && d_ok && secs < 30.0,
        format!(
            "(a) ‖IF at P‖ {:.1e}; (b) max residual/max(1,‖T‖) {worst_res:.1e}; (c) errors {:.2e} {:.2e} {:.2e}, ratios {:.2} {:.2}; (d) min ⟨Mh,h⟩−2λ‖h‖² {d_margin:.2e}; {secs:.2}s",
            at_p.h_norm, errors[0], errors[1], errors[2], ratios[0], ratios[1]
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let loss = PairwiseLoss::Mee { h: 1.0 };
    let opts = SolverOptions { warn_nonconvex: false, ..SolverOptions::default() };
    let mut reports = 0;
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    for _ in 0..10 {
        let data = random_data(&mut rng, 50, 2);
        for &eps in &[0.05, 0.1, 0.2] {
            let r = maxbias_probe(&loss, &data, &gaussian(), 0.1, eps, None, &opts).unwrap();
            reports += 1;
            if r.worst_delta > 2.0 * eps * (1.0 + eps) + 1e-8 {
                violations += 1;
            }
            worst_ratio = worst_ratio.max(r.worst_delta / r.bound);
        }
    }
    let mut gap_violations = 0;
    let mut tv_range = (f64::INFINITY, 0.0f64);
    for _ in 0..20 {
        let support: Vec<(f64, f64)> = (0..6).map(|_| (rng.gen_range(-2.0..2.0), rng.gen_range(-3.0..3.0))).collect();
        let mut draw = |k: usize| {
            let idx: Vec<usize> = (0..k).map(|_| rng.gen_range(0..support.len())).collect();
            let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            let mut w: Vec<f64> = raw.iter().map(|v| v / s).collect();
            w[k - 1] = 1.0 - w[..k - 1].iter().sum::<f64>();
            DiscreteMeasure::new(idx.iter().map(|&i| vec![support[i].0]).collect(), idx.iter().map(|&i| support[i].1).collect(), w)
                .unwrap()
        };
        let (p, q) = (draw(4), draw(5));
        let tv = total_variation(&p, &q);
        let r = risk_gap(&loss, &p, &q, &KernelSpec::gaussian(1.0).unwrap(), 0.1, &opts).unwrap();
        if r.delta > 2.0 * tv + 1e-8 {
            gap_violations += 1;
        }
        tv_range = (tv_range.0.min(tv), tv_range.1.max(tv));
    }
    (
        violations == 0 && gap_violations == 0,
        format!(
            "{violations}/{reports} maxbias reports above 2ε(1+ε), largest worst_delta/bound {worst_ratio:.3}; \
             risk gap above 2·d_TV in {gap_violations}/20 measure pairs (d_TV in [{:.2}, {:.2}])",
            tv_range.0, tv_range.1
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let loss = PairwiseLoss::Mee { h: 1.0 };
    let opts = SolverOptions { warn_nonconvex: false, ..SolverOptions::default() };
    let data = random_data(&mut rng, 29, 2);
    let (ymin, ymax) = data.ys().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(*y), b.max(*y)));
    let yrange = ymax - ymin;
    let bound = 2.0 * (1.0 + 1.0 / 30.0);
    let mut violations = 0;
    let mut largest = 0.0f64;
    for i in 0..100 {
        let scale = if i < 50 { 1.0 } else { 10.0 };
        let x0: Vec<f64> = (0..2).map(|_| scale * rng.gen_range(-1.0..1.0)).collect();
        let y0 = 0.5 * (ymin + ymax) + scale * yrange * rng.gen_range(-0.5..0.5);
        let r = sensitivity_curve(&data, &x0, y0, &loss, &gaussian(), 0.1, ScTarget::Risk, &opts).unwrap();
        if r.value.abs() > bound + 1e-8 {
            violations += 1;
        }
        largest = largest.max(r.value.abs());
    }
    (
        violations == 0,
        format!("{violations}/100 above 2c(1+1/n) = {bound:.4}; largest |SC| {largest:.4}"),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let loss = PairwiseLoss::LogisticPairwise { a: 0.5 };
    let mut violations = 0;
    let (mut largest, mut rhs) = (0.0f64, 0.0);
    for i in 0..100 {
        let lambda = [0.05, 0.2, 1.0][i % 3];
        let p = random_data(&mut rng, 40, 2);
        let mut q = random_data(&mut rng, 40, 2);
        if i % 2 == 1 {
            // heavy contamination on the second sample
            let ys: Vec<f64> = q.ys().iter().enumerate().map(|(k, y)| if k % 4 == 0 { y + 20.0 } else { *y }).collect();
            q = Dataset::new(q.xs().to_vec(), ys).unwrap();
        }
        let fp = fit(&loss, &p, &gaussian(), lambda, &SolverOptions::default()).unwrap();
        let fq = fit(&loss, &q, &gaussian(), lambda, &SolverOptions::default()).unwrap();
        let c = stability_bound_check(&fp, &fq).unwrap();
        if c.lhs > c.rhs + 1e-8 {
            violations += 1;
        }
        if c.lhs / c.rhs > largest {
            largest = c.lhs / c.rhs;
            rhs = c.rhs;
        }
    }
    (violations == 0, format!("{violations}/100 violations; largest ‖f_P − f_Q‖/bound {largest:.3} (bound {rhs})"))
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(1..60);
        let data = random_data(&mut rng, n, 3);
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let r: Vec<f64> = data.ys().iter().zip(&f).map(|(y, v)| y - v).collect();
        let mean = r.iter().sum::<f64>() / n as f64;
        let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let risk = empirical_risk(&PairwiseLoss::Squared, &data, &f).unwrap();
        let err = if var == 0.0 { risk.abs() } else { (risk - 2.0 * var).abs() / (2.0 * var) };
        worst = worst.max(err);
    }
    (worst <= 1e-12, format!("max relative error {worst:.1e} over 200 random instances"))
}

fn rpl(args: &[&str]) -> (Option<i32>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_rpl")).args(args).output().unwrap();
    (out.status.code(), out.stdout)
}

fn run_pipeline(dir: &Path, cfg: &Path, mee: &Path, data: &Path) -> Vec<(String, Vec<u8>)> {
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let out = dir.join("out");
    let model = out.join("model.json");
    let runs: Vec<Vec<String>> = vec![
        vec!["fit".into(), "--config".into(), s(cfg), "--data".into(), s(data), "--out".into(), s(&out)],
        vec!["predict".into(), "--model".into(), s(&model), "--data".into(), s(data), "--out".into(), s(&out)],
        vec!["influence".into(), "--model".into(), s(&model), "--data".into(), s(data), "--point".into(), "0.2,-0.1;1.5".into(), "--out".into(), s(&out)],
        vec!["bootstrap".into(), "--config".into(), s(cfg), "--data".into(), s(data), "-B".into(), "8".into(), "--seed".into(), "42".into(), "--out".into(), s(&out)],
        vec!["maxbias".into(), "--config".into(), s(mee), "--data".into(), s(data), "--eps".into(), "0.1".into(), "--out".into(), s(&out)],
        vec!["sc".into(), "--config".into(), s(mee), "--data".into(), s(data), "--point".into(), "3,3;9".into(), "--out".into(), s(&out)],
        vec!["check".into(), "--config".into(), s(cfg), "--data".into(), s(data), "--seed".into(), "42".into(), "--out".into(), s(&out)],
    ];
    let mut files = Vec::new();
    for args in &runs {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let (code, stdout) = rpl(&args);
        assert_eq!(code, Some(0), "{args:?}");
        files.push((format!("{} stdout", args[0]), stdout));
    }
    let mut names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for name in names {
        files.push((name.to_string_lossy().into_owned(), fs::read(out.join(&name)).unwrap()));
    }
    files
}

fn criterion_11() -> Outcome {
    let ws = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let data = random_data(&mut rng, 20, 2);
    let mut csv = String::from("x1,x2,y\n");
    for (x, y) in data.xs().iter().zip(data.ys()) {
        csv.push_str(&format!("{:e},{:e},{:e}\n", x[0], x[1], y));
    }
    let data_path = ws.path().join("data.csv");
    fs::write(&data_path, csv).unwrap();
    let cfg = ws.path().join("cfg.json");
    fs::write(&cfg, r#"{"kernel": {"family": "gaussian_rbf", "gamma": 1.0}, "loss": {"family": "logistic_pairwise", "a": 0.1}, "lambda": 0.05, "seed": 7}"#).unwrap();
    let mee = ws.path().join("mee.json");
    fs::write(&mee, r#"{"kernel": {"family": "gaussian_rbf", "gamma": 1.0}, "loss": {"family": "mee", "h": 1.0}, "lambda": 0.1, "solver": {"warn_nonconvex": false}}"#).unwrap();

    let (a, b) = (ws.path().join("a"), ws.path().join("b"));
    fs::create_dir_all(&a).unwrap();
    fs::create_dir_all(&b).unwrap();
    let first = run_pipeline(&a, &cfg, &mee, &data_path);
    let second = run_pipeline(&b, &cfg, &mee, &data_path);
    let differing: Vec<&str> =
        first.iter().zip(&second).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    let identical = first.len() == second.len() && differing.is_empty();

    // in-process fit against the persisted model and predictions
    let loaded = load_model(&a.join("out").join("model.json")).unwrap();
    let model: FittedModel =
        fit(&PairwiseLoss::LogisticPairwise { a: 0.1 }, &data, &gaussian(), 0.05, &SolverOptions::default()).unwrap();
    let alpha_exact = loaded.alpha().len() == model.alpha().len()
        && loaded.alpha().iter().zip(model.alpha()).all(|(x, y)| x.to_bits() == y.to_bits());
    let csv = fs::read_to_string(a.join("out").join("predictions.csv")).unwrap();
    let persisted: Vec<f64> = csv.lines().skip(1).map(|l| l.parse().unwrap()).collect();
    let direct = model.predict(data.xs()).unwrap();
    let predictions_exact = persisted.len() == direct.len()
        && persisted.iter().zip(&direct).all(|(x, y)| x.to_bits() == y.to_bits());
    (
        identical && alpha_exact && predictions_exact,
        format!(
            "{} outputs compared across two runs, differing: {:?}; α round-trip bit-exact: {alpha_exact}; predictions bit-exact: {predictions_exact}",
            first.len(),
            differing
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("squared-loss closed-form oracle equivalence", criterion_1),
        ("representer residual for logistic fits", criterion_2),
        ("loss derivative suite", criterion_3),
        ("shifted-loss equivalence", criterion_4),
        ("a-priori norm bounds", criterion_5),
        ("influence function", criterion_6),
        ("maxbias bound (MEE)", criterion_7),
        ("risk sensitivity-curve bound", criterion_8),
        ("stability bound", criterion_9),
        ("V-statistic identity", criterion_10),
        ("determinism and persistence", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(outcome) => outcome,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !ok {
            failed += 1;
        }
        println!("{} [{:>2}] {name}: {detail}", if ok { "PASS" } else { "FAIL" }, i + 1);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
