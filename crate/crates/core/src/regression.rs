//! Online smoothing regression: one frozen sliding-window ridge regressor
//! is spawned per step and all of them are aggregated.
//!
//! The expert labelled `τ` is fitted at the end of step `τ` on data up to
//! `y_τ` and predicts from step `τ+1` on. Until then it is part of the
//! reservoir and is charged the aggregator's own loss.

use nalgebra::{DMatrix, DVector};

use crate::aggregation::{
    square_loss, subst_mean, subst_vovk_unchecked, verify_substitution, LossSpec, SubstitutionCheck,
    SubstitutionRule,
};
use crate::error::{check_len, Error, Result};
use crate::pool::LazyWeights;

/// Solves `(σI + XᵀX) w = Xᵀy` by Cholesky factorization.
pub fn ridge_fit(xs: &[Vec<f64>], ys: &[f64], sigma: f64) -> Result<Vec<f64>> {
    check_len(xs.len(), ys.len())?;
    let Some(first) = xs.first() else {
        return Err(Error::Domain("empty regression window".into()));
    };
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain(format!("ridge parameter must be positive, got {sigma}")));
    }
    let k = first.len();
    for x in xs {
        check_len(k, x.len())?;
    }
    let x = DMatrix::from_fn(xs.len(), k, |i, j| xs[i][j]);
    let y = DVector::from_column_slice(ys);
    let mut gram = x.tr_mul(&x);
    for i in 0..k {
        gram[(i, i)] += sigma;
    }
    let rhs = x.tr_mul(&y);
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::Domain("ridge system is not positive definite".into()))?;
    Ok(chol.solve(&rhs).as_slice().to_vec())
}

/// A frozen linear predictor `x ↦ ⟨w, x⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionExpert {
    birth_time: u64,
    weights: Vec<f64>,
}

impl RegressionExpert {
    pub fn new(birth_time: u64, weights: Vec<f64>) -> Self {
        Self { birth_time, weights }
    }

    pub fn birth_time(&self) -> u64 {
        self.birth_time
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn raw(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, x)| w * x).sum()
    }

    pub fn predict(&self, x: &[f64], spec: &LossSpec) -> f64 {
        spec.clamp(self.raw(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressorConfig {
    pub window: usize,
    pub sigma: f64,
    /// Experts whose weight drops below this are folded into a dead mass
    /// that is charged the aggregator's loss. Folding is approximate, so it
    /// is off by default.
    pub prune_below: Option<f64>,
    /// Whether the zero-function experts spawned before the window fills
    /// take part. When false they are charged the aggregator's loss and
    /// never predict, as if never born.
    pub warmup_experts: bool,
}

impl Default for RegressorConfig {
    fn default() -> Self {
        Self { window: 40, sigma: 1.0, prune_below: None, warmup_experts: false }
    }
}

/// Losses from one call to [`SmoothingRegressor::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionStep {
    pub t: u64,
    pub prediction: f64,
    pub loss: f64,
    pub mixloss: f64,
    /// `(τ, l^τ_t)` for every expert that predicted at `t`.
    pub expert_losses: Vec<(u64, f64)>,
}

#[derive(Debug, Clone)]
pub struct SmoothingRegressor {
    spec: LossSpec,
    rule: SubstitutionRule,
    config: RegressorConfig,
    dim: usize,
    clock: u64,
    experts: Vec<RegressionExpert>,
    weights: LazyWeights,
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
}

impl SmoothingRegressor {
    pub fn new(dim: usize, spec: LossSpec, rule: SubstitutionRule, config: RegressorConfig) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("signal dimension must be positive".into()));
        }
        if config.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if !(config.sigma > 0.0 && config.sigma.is_finite()) {
            return Err(Error::Config(format!("ridge parameter must be positive, got {}", config.sigma)));
        }
        spec.check_rule(rule)?;
        Ok(Self {
            spec,
            rule,
            config,
            dim,
            clock: 0,
            experts: Vec::new(),
            weights: LazyWeights::new(1),
            xs: Vec::with_capacity(config.window),
            ys: Vec::with_capacity(config.window),
        })
    }

    pub fn spec(&self) -> &LossSpec {
        &self.spec
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn experts(&self) -> &[RegressionExpert] {
        &self.experts
    }

    pub fn pool(&self) -> &LazyWeights {
        &self.weights
    }

    fn normalized_weights(&self) -> Option<Vec<f64>> {
        let total: f64 = self.weights.alive().iter().sum();
        (total > 0.0).then(|| self.weights.alive().iter().map(|w| w / total).collect())
    }

    fn expert_predictions(&self, x: &[f64]) -> Vec<f64> {
        self.experts.iter().map(|e| e.predict(x, &self.spec)).collect()
    }

    /// `F_t(x)` for the upcoming step. Before any expert exists, and if
    /// every expert weight has underflowed, the forecast is 0.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_len(self.dim, x.len())?;
        let Some(weights) = self.normalized_weights() else {
            return Ok(0.0);
        };
        let forecasts = self.expert_predictions(x);
        Ok(match self.rule {
            SubstitutionRule::Vovk => subst_vovk_unchecked(&forecasts, &weights, &self.spec),
            SubstitutionRule::Mean => self.spec.clamp(subst_mean(&forecasts, &weights)?),
        })
    }

    /// Substitution inequality for `F_t(x)` on a grid of outcomes.
    pub fn mixability_check(&self, x: &[f64], grid_points: usize) -> Result<Option<SubstitutionCheck>> {
        let gamma = self.predict(x)?;
        let Some(weights) = self.normalized_weights() else {
            return Ok(None);
        };
        let forecasts = self.expert_predictions(x);
        Ok(Some(verify_substitution(gamma, &forecasts, &weights, &self.spec, grid_points)))
    }

    /// Observes `(x_t, y_t)`, updates the weights and spawns expert `t`.
    pub fn step(&mut self, x: &[f64], y: f64) -> Result<RegressionStep> {
        self.spec.check_in_range(y)?;
        let prediction = self.predict(x)?;
        let t = self.clock + 1;
        let loss = square_loss(y, prediction);
        let expert_losses: Vec<(u64, f64)> =
            self.experts.iter().map(|e| (e.birth_time, square_loss(y, e.predict(x, &self.spec)))).collect();
        let losses: Vec<f64> = expert_losses.iter().map(|(_, l)| *l).collect();
        let mixloss = self.weights.update(&losses, loss, self.spec.eta());

        self.clock = t;
        if self.xs.len() == self.config.window {
            self.xs.remove(0);
            self.ys.remove(0);
        }
        self.xs.push(x.to_vec());
        self.ys.push(y);
        self.spawn()?;
        if let Some(threshold) = self.config.prune_below {
            self.prune(threshold);
        }
        Ok(RegressionStep { t, prediction, loss, mixloss, expert_losses })
    }

    fn spawn(&mut self) -> Result<()> {
        let t = self.clock;
        let warmup = (t as usize) <= self.config.window;
        let weights = if warmup { vec![0.0; self.dim] } else { ridge_fit(&self.xs, &self.ys, self.config.sigma)? };
        self.weights.birth(t);
        self.experts.push(RegressionExpert::new(t, weights));
        if warmup && !self.config.warmup_experts {
            let mut keep = vec![true; self.experts.len()];
            keep[self.experts.len() - 1] = false;
            self.weights.retain(&keep);
            self.experts.pop();
        }
        Ok(())
    }

    fn prune(&mut self, threshold: f64) {
        let keep: Vec<bool> = self.weights.alive().iter().map(|w| *w >= threshold).collect();
        if keep.iter().all(|k| *k) {
            return;
        }
        self.weights.retain(&keep);
        let mut it = keep.iter();
        self.experts.retain(|_| *it.next().unwrap());
    }
}
