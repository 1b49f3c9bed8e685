//! Dense reference implementations: every auxiliary expert of a finite
//! horizon carries an explicit weight, plus one tail entry for the
//! experts born after it. Plain arithmetic, no shared code with the crate.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vovk(forecasts: &[f64], weights: &[f64], b: f64, eta: f64) -> f64 {
    let g = |y: f64| -> f64 {
        let s: f64 = forecasts.iter().zip(weights).map(|(c, w)| w * (-eta * (y - c) * (y - c)).exp()).sum();
        -s.ln() / eta
    };
    ((g(-b) - g(b)) / (4.0 * b)).clamp(-b, b)
}

#[derive(Clone, Debug)]
pub struct Issue {
    pub forecasts: Vec<f64>,
    pub confidences: Vec<f64>,
}

impl Issue {
    fn at(&self, offset: usize) -> (f64, Option<f64>) {
        if offset == 0 || offset > self.forecasts.len() {
            (0.0, None)
        } else {
            (self.confidences[offset - 1], Some(self.forecasts[offset - 1]))
        }
    }
}

pub struct DenseLongterm {
    pub n: usize,
    pub d: usize,
    pub b: f64,
    pub eta: f64,
    pub horizon_t: usize,
    pub issues: Vec<Option<Issue>>,
    /// `chains[k][i]`, `i = (τ-1)·n + expert`, last entry is the tail.
    pub chains: Vec<Vec<f64>>,
    pub issued: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    pub clock: usize,
}

impl DenseLongterm {
    pub fn new(n: usize, d: usize, b: f64, eta: f64, horizon_t: usize) -> Self {
        let mut prior = Vec::with_capacity(n * horizon_t + 1);
        for tau in 1..=horizon_t {
            for _ in 0..n {
                prior.push(1.0 / (tau as f64 * (tau as f64 + 1.0)) / n as f64);
            }
        }
        prior.push(1.0 / (horizon_t as f64 + 1.0));
        Self {
            n,
            d,
            b,
            eta,
            horizon_t,
            issues: vec![None; n * horizon_t],
            chains: vec![prior; d],
            issued: Vec::new(),
            ys: Vec::new(),
            clock: 0,
        }
    }

    pub fn birth_of(&self, i: usize) -> usize {
        i / self.n + 1
    }

    /// Returns the mixloss of the update (0 for `t ≤ d`) and `γ_t`.
    pub fn step(&mut self, y: f64, issues: Vec<Issue>) -> (f64, Vec<f64>) {
        let (n, d) = (self.n, self.d);
        self.ys.push(y);
        let t = self.clock + 1;
        self.clock = t;
        let k = t % d;
        let mut mixloss = 0.0;
        if t > d {
            let origin = t - d;
            let gamma = &self.issued[origin - 1];
            let window = &self.ys[t - d..t];
            let hs: Vec<f64> = window.iter().zip(gamma).map(|(y, g)| (y - g) * (y - g)).collect();
            let h = hs.iter().sum::<f64>() / d as f64;
            let chain = &mut self.chains[k];
            let mut z = 0.0;
            for (i, w) in chain.iter_mut().enumerate() {
                let loss = if i < n * self.horizon_t && i / n < origin {
                    let tau = i / n + 1;
                    let issue = self.issues[i].as_ref().expect("born");
                    let mut total = 0.0;
                    for s in 1..=d {
                        let (p, c) = issue.at(origin - tau + s);
                        total += match c {
                            Some(c) if p > 0.0 => p * (window[s - 1] - c) * (window[s - 1] - c) + (1.0 - p) * hs[s - 1],
                            _ => hs[s - 1],
                        };
                    }
                    total / d as f64
                } else {
                    h
                };
                *w *= (-self.eta * loss).exp();
                z += *w;
            }
            for w in chain.iter_mut() {
                *w /= z;
            }
            mixloss = -z.ln() / self.eta;
        }
        for (j, issue) in issues.into_iter().enumerate() {
            self.issues[(t - 1) * n + j] = Some(issue);
        }
        let chain = &self.chains[k];
        let mut gamma = Vec::with_capacity(d);
        for s in 1..=d {
            let mut cs = Vec::new();
            let mut ms = Vec::new();
            for i in 0..n * t {
                let tau = i / n + 1;
                let (p, c) = self.issues[i].as_ref().unwrap().at(t - tau + s);
                if let Some(c) = c {
                    if p * chain[i] > 0.0 {
                        cs.push(c);
                        ms.push(p * chain[i]);
                    }
                }
            }
            let total: f64 = ms.iter().sum();
            if total > 0.0 {
                let ws: Vec<f64> = ms.iter().map(|m| m / total).collect();
                gamma.push(vovk(&cs, &ws, self.b, self.eta));
            } else {
                let target = t + s;
                let prev = (t.saturating_sub(d - 1).max(1)..t)
                    .rev()
                    .find(|&u| target - u <= d)
                    .map(|u| self.issued[u - 1][target - u - 1]);
                gamma.push(prev.unwrap_or(0.0));
            }
        }
        self.issued.push(gamma.clone());
        (mixloss, gamma)
    }
}

/// Random forecast issues for `n` experts over `steps` steps, with
/// confidence profiles that include zeros, fractions and early cut-offs.
pub fn random_issues(n: usize, d: usize, steps: usize, seed: u64) -> Vec<Vec<Issue>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..steps)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let len = rng.random_range(1..=2 * d + 3);
                    let forecasts = (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect();
                    let confidences = (0..len)
                        .map(|_| match rng.random_range(0..4) {
                            0 => 0.0,
                            1 => rng.random_range(0.0..1.0),
                            _ => 1.0,
                        })
                        .collect();
                    Issue { forecasts, confidences }
                })
                .collect()
        })
        .collect()
}

pub fn random_outcomes(steps: usize, seed: u64, adversarial: bool) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(17));
    (1..=steps)
        .map(|t| if adversarial { if t % 2 == 0 { 1.0 } else { -1.0 } } else { rng.random_range(-1.0..=1.0) })
        .collect()
}

/// Solves `(σI + XᵀX) w = Xᵀy` by Gaussian elimination with partial pivoting.
pub fn ridge_gauss(xs: &[Vec<f64>], ys: &[f64], sigma: f64) -> Vec<f64> {
    let k = xs[0].len();
    let mut a = vec![vec![0.0; k + 1]; k];
    for (x, y) in xs.iter().zip(ys) {
        for i in 0..k {
            for j in 0..k {
                a[i][j] += x[i] * x[j];
            }
            a[i][k] += x[i] * y;
        }
    }
    for (i, row) in a.iter_mut().enumerate() {
        row[i] += sigma;
    }
    for col in 0..k {
        let pivot = (col..k).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs())).unwrap();
        a.swap(col, pivot);
        for r in col + 1..k {
            let f = a[r][col] / a[col][col];
            for c in col..=k {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut w = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| a[i][j] * w[j]).sum();
        w[i] = (a[i][k] - s) / a[i][i];
    }
    w
}

pub struct DenseRegression {
    pub window: usize,
    pub sigma: f64,
    pub b: f64,
    pub eta: f64,
    /// `weights[τ-1]`, last entry is the tail.
    pub weights: Vec<f64>,
    /// `None` for unborn or warm-up experts.
    pub experts: Vec<Option<Vec<f64>>>,
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    pub clock: usize,
}

impl DenseRegression {
    pub fn new(window: usize, sigma: f64, b: f64, eta: f64, horizon_t: usize) -> Self {
        let mut weights: Vec<f64> = (1..=horizon_t).map(|t| 1.0 / (t as f64 * (t as f64 + 1.0))).collect();
        weights.push(1.0 / (horizon_t as f64 + 1.0));
        Self { window, sigma, b, eta, weights, experts: vec![None; horizon_t], xs: Vec::new(), ys: Vec::new(), clock: 0 }
    }

    fn expert_prediction(&self, w: &[f64], x: &[f64]) -> f64 {
        w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().clamp(-self.b, self.b)
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut cs = Vec::new();
        let mut ms = Vec::new();
        for (tau, e) in self.experts.iter().enumerate().take(self.clock) {
            if let Some(w) = e {
                cs.push(self.expert_prediction(w, x));
                ms.push(self.weights[tau]);
            }
        }
        let total: f64 = ms.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        let ws: Vec<f64> = ms.iter().map(|m| m / total).collect();
        vovk(&cs, &ws, self.b, self.eta)
    }

    /// Returns `(prediction, loss, mixloss)`.
    pub fn step(&mut self, x: &[f64], y: f64) -> (f64, f64, f64) {
        let gamma = self.predict(x);
        let h = (y - gamma) * (y - gamma);
        let mut z = 0.0;
        for i in 0..self.weights.len() {
            let loss = match self.experts.get(i).and_then(|e| e.as_ref()) {
                Some(w) if i < self.clock => {
                    let c = self.expert_prediction(w, x);
                    (y - c) * (y - c)
                }
                _ => h,
            };
            self.weights[i] *= (-self.eta * loss).exp();
            z += self.weights[i];
        }
        for w in &mut self.weights {
            *w /= z;
        }
        self.clock += 1;
        self.xs.push(x.to_vec());
        self.ys.push(y);
        let t = self.clock;
        if t > self.window {
            let lo = t - self.window;
            self.experts[t - 1] = Some(ridge_gauss(&self.xs[lo..], &self.ys[lo..], self.sigma));
        }
        (gamma, h, -z.ln() / self.eta)
    }
}
