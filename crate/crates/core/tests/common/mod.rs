//! Brute-force reference implementations used as test oracles. Everything here
//! works from explicit index lists and direct double loops, independent of the
//! library's bitmask transforms.

#![allow(dead_code)]

use app_core::{PosetState, SampleSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `(indices, bin)`; the bottom element is `(vec![], 0)`.
pub type Plain = (Vec<usize>, usize);

pub fn plain(s: &PosetState) -> Plain {
    if s.is_bottom() {
        (vec![], 0)
    } else {
        (s.subset().indices(), s.bin())
    }
}

pub fn plain_leq(a: &Plain, b: &Plain) -> bool {
    if a.0.is_empty() {
        return true;
    }
    if b.0.is_empty() {
        return false;
    }
    a.0.iter().all(|j| b.0.contains(j)) && a.1 <= b.1
}

/// All states of the space enumerated independently, in (|J|, lex J, τ) order.
pub fn enumerate_states(d: usize, m: usize) -> Vec<Plain> {
    let mut subsets: Vec<Vec<usize>> = (1u32..(1 << d))
        .map(|mask| (1..=d).filter(|j| mask & (1 << (j - 1)) != 0).collect())
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    let mut out = vec![(vec![], 0)];
    for s in subsets {
        for tau in 1..=m {
            out.push((s.clone(), tau));
        }
    }
    out
}

/// Log-probabilities of the log-linear model by summing `θ` over each down-set.
pub fn log_probs(space: &SampleSpace, members: &[PosetState], theta: &[f64]) -> Vec<f64> {
    let mem: Vec<Plain> = members.iter().map(plain).collect();
    let energies: Vec<f64> = space
        .states()
        .iter()
        .map(|w| {
            let w = plain(w);
            mem.iter()
                .zip(theta)
                .filter(|(s, _)| plain_leq(s, &w))
                .map(|(_, t)| *t)
                .sum()
        })
        .collect();
    let mx = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = mx + energies.iter().map(|e| (e - mx).exp()).sum::<f64>().ln();
    energies.iter().map(|e| e - lse).collect()
}

pub fn probs(space: &SampleSpace, members: &[PosetState], theta: &[f64]) -> Vec<f64> {
    log_probs(space, members, theta).iter().map(|l| l.exp()).collect()
}

pub fn kl(phat: &[f64], logp: &[f64]) -> f64 {
    phat.iter()
        .zip(logp)
        .filter(|(q, _)| **q > 0.0)
        .map(|(q, l)| q * (q.ln() - l))
        .sum()
}

/// `D_KL(p̂, p_θ)` from scratch.
pub fn kl_of_theta(space: &SampleSpace, members: &[PosetState], phat: &[f64], theta: &[f64]) -> f64 {
    kl(phat, &log_probs(space, members, theta))
}

pub fn eta(space: &SampleSpace, p: &[f64], s: &PosetState) -> f64 {
    let s = plain(s);
    space
        .states()
        .iter()
        .zip(p)
        .filter(|(w, _)| plain_leq(&s, &plain(w)))
        .map(|(_, v)| *v)
        .sum()
}

/// `Σ_{ω ≥ s_i, ω ≥ s_j} p(ω) − η_i η_j` by a direct loop over the space.
pub fn fisher_entry(space: &SampleSpace, p: &[f64], a: &PosetState, b: &PosetState) -> f64 {
    let (pa, pb) = (plain(a), plain(b));
    let both: f64 = space
        .states()
        .iter()
        .zip(p)
        .filter(|(w, _)| {
            let w = plain(w);
            plain_leq(&pa, &w) && plain_leq(&pb, &w)
        })
        .map(|(_, v)| *v)
        .sum();
    both - eta(space, p, a) * eta(space, p, b)
}

/// A strictly positive random distribution.
pub fn random_distribution(len: usize, r: &mut ChaCha8Rng) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| 0.05 + r.random::<f64>()).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

/// Minimizes a smooth function with BFGS and an Armijo line search, using
/// central-difference gradients. Returns the minimizer.
pub fn bfgs<F: Fn(&[f64]) -> f64>(f: F, x0: Vec<f64>, iters: usize) -> Vec<f64> {
    let n = x0.len();
    let grad = |x: &[f64]| -> Vec<f64> {
        let h = 1e-6;
        (0..n)
            .map(|i| {
                let mut a = x.to_vec();
                let mut b = x.to_vec();
                a[i] += h;
                b[i] -= h;
                (f(&a) - f(&b)) / (2.0 * h)
            })
            .collect()
    };
    let mut x = x0;
    let mut fx = f(&x);
    let mut g = grad(&x);
    let mut hinv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..iters {
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gn < 1e-10 {
            break;
        }
        let mut dir: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| hinv[i][j] * g[j]).sum::<f64>()).collect();
        let mut slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            dir = g.iter().map(|v| -v).collect();
            slope = -gn * gn;
            for (i, row) in hinv.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
        let mut a = 1.0;
        let (xn, fxn) = loop {
            let xn: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + a * di).collect();
            let fxn = f(&xn);
            if fxn <= fx + 1e-4 * a * slope || a < 1e-12 {
                break (xn, fxn);
            }
            a *= 0.5;
        };
        let gnew = grad(&xn);
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gnew.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-16 {
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| hinv[i][j] * y[j]).sum()).collect();
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    hinv[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        let done = (fx - fxn).abs() < 1e-16;
        x = xn;
        fx = fxn;
        g = gnew;
        if done {
            break;
        }
    }
    x
}
