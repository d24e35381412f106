//! The log-linear model and its optimizer against from-scratch evaluations.

mod common;

use app_core::model::{self, energies, fisher_matrix, kl_divergence, model_distribution};
use app_core::optimizer::{self, FitConfig};
use app_core::{Distribution, Method, ParamDomain, ParamVector, SampleSpace};
use common::{fisher_entry, kl, kl_of_theta, log_probs, random_distribution, rng};
use rand::Rng;

fn random_theta(len: usize, seed: u64, scale: f64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..len).map(|_| scale * (2.0 * r.random::<f64>() - 1.0)).collect()
}

#[test]
fn distribution_matches_downset_sums() {
    for (d, m, k) in [(2, 3, 2), (2, 3, 1), (3, 2, 2), (3, 3, 3), (1, 6, 1)] {
        let sp = SampleSpace::new(d, m, 1.0).unwrap();
        let dom = ParamDomain::new(&sp, k).unwrap();
        for seed in 0..5 {
            let theta = random_theta(dom.len(), seed, 2.0);
            let pv = ParamVector::new(theta.clone(), &sp, &dom).unwrap();
            let want = log_probs(&sp, dom.members(), &theta);
            for (g, w) in pv.log_probs().iter().zip(&want) {
                assert!((g - w).abs() < 1e-12, "D={d} M={m} k={k}: {g} vs {w}");
            }
            // θ(⊥) = −ψ is the log-probability of the bottom state
            assert!((pv.theta_bottom() - want[0]).abs() < 1e-12);
            let p = model_distribution(&pv, &sp, &dom).unwrap();
            assert!((p.mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn energies_are_downset_sums() {
    let sp = SampleSpace::new(3, 4, 1.0).unwrap();
    let dom = ParamDomain::new(&sp, 2).unwrap();
    let theta = random_theta(dom.len(), 3, 1.0);
    let e = energies(&theta, &sp, &dom);
    for (w, ew) in sp.states().iter().zip(&e) {
        let want: f64 = dom
            .members()
            .iter()
            .zip(&theta)
            .filter(|(s, _)| app_core::poset::leq(s, w))
            .map(|(_, t)| t)
            .sum();
        assert!((ew - want).abs() < 1e-12);
    }
}

#[test]
fn eta_matches_upset_sums() {
    let sp = SampleSpace::new(3, 3, 1.0).unwrap();
    let dom = ParamDomain::new(&sp, 3).unwrap();
    let p = Distribution::from_weights(random_distribution(sp.len(), &mut rng(8))).unwrap();
    let eta = model::expectation_params(&p, &dom, &sp);
    for (s, e) in dom.members().iter().zip(&eta) {
        assert!((e - common::eta(&sp, p.mass(), s)).abs() < 1e-14);
    }
    let all = model::eta_all(&p, &sp);
    assert!((all[0] - 1.0).abs() < 1e-12);
}

#[test]
fn kl_matches_direct_formula() {
    // |Ω| = 10 for D = 2, M = 3
    let sp = SampleSpace::new(2, 3, 1.0).unwrap();
    assert_eq!(sp.len(), 10);
    let mut r = rng(21);
    for _ in 0..5 {
        let a = random_distribution(10, &mut r);
        let b = random_distribution(10, &mut r);
        let got = kl_divergence(&Distribution::from_weights(a.clone()).unwrap(), &Distribution::from_weights(b.clone()).unwrap()).unwrap();
        let logb: Vec<f64> = b.iter().map(|v| v.ln()).collect();
        assert!((got - kl(&a, &logb)).abs() < 1e-14);
        assert!(got >= 0.0);
    }
}

#[test]
fn fisher_matches_double_loop() {
    for (d, m, k) in [(2, 2, 2), (2, 3, 1), (3, 2, 2)] {
        let sp = SampleSpace::new(d, m, 1.0).unwrap();
        let dom = ParamDomain::new(&sp, k).unwrap();
        let p = Distribution::from_weights(random_distribution(sp.len(), &mut rng(d as u64 * 10 + m as u64))).unwrap();
        let g = fisher_matrix(&p, &dom, &sp, 0.0).unwrap();
        for (i, a) in dom.members().iter().enumerate() {
            for (j, b) in dom.members().iter().enumerate() {
                let want = fisher_entry(&sp, p.mass(), a, b);
                assert!((g.get(i, j) - want).abs() < 1e-14, "({i},{j})");
            }
        }
        let jit = fisher_matrix(&p, &dom, &sp, 1e-3).unwrap();
        assert!((jit.get(0, 0) - g.get(0, 0) - 1e-3).abs() < 1e-15);
        assert_eq!(jit.get(0, 1), g.get(0, 1));
    }
}

/// Fits with both methods and compares the final KL with a BFGS minimizer
/// of the brute-force objective.
#[test]
fn optimum_matches_generic_minimizer() {
    let sp = SampleSpace::new(2, 3, 1.0).unwrap();
    let dom = ParamDomain::new(&sp, 1).unwrap();
    let target = random_distribution(sp.len(), &mut rng(5));
    let phat = Distribution::from_weights(target.clone()).unwrap();
    let reference = common::bfgs(|t| kl_of_theta(&sp, dom.members(), &target, t), vec![0.0; dom.len()], 500);
    let best = kl_of_theta(&sp, dom.members(), &target, &reference);
    for method in [Method::NaturalGradient, Method::GradientDescent] {
        let mut cfg = FitConfig::for_method(method);
        cfg.max_iters = 20_000;
        cfg.tol = 1e-10;
        let rep = optimizer::fit(&phat, &dom, &sp, &cfg).unwrap();
        assert!(rep.converged, "{method:?}");
        let got = kl_of_theta(&sp, rep.domain.members(), &target, rep.final_theta.theta());
        assert!((got - best).abs() < 1e-9, "{method:?}: {got} vs {best}");
        assert!((rep.final_kl - got).abs() < 1e-12);
    }
}

#[test]
fn natural_gradient_needs_fewer_iterations() {
    let sp = SampleSpace::new(2, 4, 1.0).unwrap();
    let dom = ParamDomain::new(&sp, 2).unwrap();
    let phat = Distribution::from_weights(random_distribution(sp.len(), &mut rng(9))).unwrap();
    let mut nat = FitConfig::natural();
    nat.tol = 1e-8;
    let mut gd = FitConfig::gradient();
    gd.tol = 1e-8;
    gd.max_iters = 100_000;
    let a = optimizer::fit(&phat, &dom, &sp, &nat).unwrap();
    let b = optimizer::fit(&phat, &dom, &sp, &gd).unwrap();
    assert!(a.converged && b.converged);
    assert!(a.iterations < b.iterations, "{} vs {}", a.iterations, b.iterations);
}
