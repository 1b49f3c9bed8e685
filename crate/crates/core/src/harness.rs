//! Synthetic data, end-to-end experiment drivers and CSV output.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{square_loss, LossSpec, SubstitutionRule};
use crate::error::{Error, Result};
use crate::longterm::{ConfidencePolicy, ExpertForecastStream, LongTermAggregator, MIXABILITY_GRID};
use crate::regression::{RegressorConfig, SmoothingRegressor};
use crate::regret::{
    excess_loss_bound, regret_bound, verify_comparator_bound_units, BoundCheck, RegretLedger, BOUND_SLACK,
};

/// Resolves the learning rate, defaulting to the largest one the rule
/// admits, and rejects values outside the rule's range.
pub fn resolve_spec(bound: f64, eta: Option<f64>, rule: SubstitutionRule) -> Result<LossSpec> {
    let spec = match eta {
        Some(eta) => LossSpec::new(bound, eta)?,
        None => LossSpec::for_rule(bound, rule)?,
    };
    spec.check_rule(rule)?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwitchingDatasetConfig {
    pub steps: usize,
    pub dim: usize,
    pub segments: usize,
    pub n_models: usize,
    pub bound: f64,
    /// Norm of the latent vectors; `bound / 6` when unset.
    pub radius: Option<f64>,
    /// Standard deviation of the additive noise; `0.05 · radius` when unset.
    pub noise_std: Option<f64>,
    pub seed: u64,
}

impl Default for SwitchingDatasetConfig {
    fn default() -> Self {
        Self { steps: 3000, dim: 20, segments: 7, n_models: 3, bound: 1.0, radius: None, noise_std: None, seed: 0 }
    }
}

impl SwitchingDatasetConfig {
    pub fn radius(&self) -> f64 {
        self.radius.unwrap_or(self.bound / 6.0)
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std.unwrap_or(0.05 * self.radius())
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.n_models == 0 || self.segments == 0 {
            return Err(Error::Config("dim, n_models and segments must be positive".into()));
        }
        if self.segments > 1 && self.segments - 1 > self.steps.saturating_sub(2) {
            return Err(Error::Config(format!("cannot cut {} steps into {} segments", self.steps, self.segments)));
        }
        if !(self.bound > 0.0 && self.bound.is_finite()) {
            return Err(Error::Config(format!("bound must be positive, got {}", self.bound)));
        }
        if !(self.radius() >= 0.0 && self.noise_std() >= 0.0) {
            return Err(Error::Config("radius and noise_std must be non-negative".into()));
        }
        Ok(())
    }
}

/// Steps `start..=end` (1-based) generated by latent vector `model`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub model: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchingDataset {
    pub xs: Vec<Vec<f64>>,
    pub ys: Vec<f64>,
    pub segments: Vec<Segment>,
    pub models: Vec<Vec<f64>>,
    pub bound: f64,
}

impl SwitchingDataset {
    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.xs.first().map_or(0, Vec::len)
    }
}

fn normal_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Piecewise-linear data: `y_t = ⟨w_{segment(t)}, x_t⟩ + ε`, clamped.
pub fn generate_switching_dataset(config: &SwitchingDatasetConfig) -> Result<SwitchingDataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let radius = config.radius();
    let models: Vec<Vec<f64>> = (0..config.n_models)
        .map(|_| loop {
            let v = normal_vector(&mut rng, config.dim);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                break v.iter().map(|x| x * radius / norm).collect();
            }
        })
        .collect();

    let mut starts = vec![1];
    if config.segments > 1 {
        let mut cuts: Vec<usize> =
            sample(&mut rng, config.steps - 2, config.segments - 1).into_iter().map(|i| i + 2).collect();
        cuts.sort_unstable();
        starts.extend(cuts);
    }
    let mut segments = Vec::with_capacity(starts.len());
    for (i, &start) in starts.iter().enumerate() {
        let end = starts.get(i + 1).map_or(config.steps, |next| next - 1);
        let model = match segments.last() {
            Some(Segment { model: prev, .. }) if config.n_models > 1 => {
                let m = rng.random_range(0..config.n_models - 1);
                if m >= *prev { m + 1 } else { m }
            }
            _ => rng.random_range(0..config.n_models),
        };
        segments.push(Segment { start, end, model });
    }

    let noise = config.noise_std();
    let mut xs = Vec::with_capacity(config.steps);
    let mut ys = Vec::with_capacity(config.steps);
    for seg in &segments {
        let w = &models[seg.model];
        for _ in seg.start..=seg.end {
            let x = normal_vector(&mut rng, config.dim);
            let eps: f64 = rng.sample::<f64, _>(StandardNormal) * noise;
            let y = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + eps;
            xs.push(x);
            ys.push(y.clamp(-config.bound, config.bound));
        }
    }
    Ok(SwitchingDataset { xs, ys, segments, models, bound: config.bound })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionRunConfig {
    pub bound: f64,
    pub eta: Option<f64>,
    pub rule: SubstitutionRule,
    pub window: usize,
    pub sigma: f64,
    pub prune_below: Option<f64>,
    /// Let the zero-function experts spawned before the window fills
    /// take part in the mixture.
    pub warmup_experts: bool,
    /// Ridge parameter of the hindsight least-squares baseline.
    pub baseline_sigma: f64,
    /// Run the grid substitution check at every step.
    pub check_mixability: bool,
}

impl Default for RegressionRunConfig {
    fn default() -> Self {
        Self {
            bound: 1.0,
            eta: None,
            rule: SubstitutionRule::Vovk,
            window: 40,
            sigma: 1.0,
            prune_below: None,
            warmup_experts: false,
            baseline_sigma: 1e-8,
            check_mixability: false,
        }
    }
}

impl RegressionRunConfig {
    pub fn spec(&self) -> Result<LossSpec> {
        resolve_spec(self.bound, self.eta, self.rule)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionRun {
    pub eta: f64,
    pub predictions: Vec<f64>,
    pub losses: Vec<f64>,
    pub mixlosses: Vec<f64>,
    /// Largest `H_t - L^τ_t` over `τ < t`, 0 at `t = 1`.
    pub peak_regret: Vec<f64>,
    /// `H_t - L^τ_t` for each requested `τ`, `None` for `t ≤ τ`.
    pub traces: Vec<Vec<Option<f64>>>,
    pub regret_check: BoundCheck,
    /// Largest `h_t - m_t`.
    pub mixloss_excess: f64,
    /// Largest grid violation of the substitution inequality, when checked.
    pub substitution_violation: Option<f64>,
}

impl RegressionRun {
    pub fn algorithm_loss(&self) -> f64 {
        self.losses.iter().sum()
    }
}

/// Runs the smoothing regressor over `data`, tracking the regret against
/// every spawned expert.
pub fn run_regression(config: &RegressionRunConfig, data: &SwitchingDataset, taus: &[u64]) -> Result<RegressionRun> {
    let spec = config.spec()?;
    if data.is_empty() {
        return Err(Error::Config("empty dataset".into()));
    }
    let regressor_config = RegressorConfig {
        window: config.window,
        sigma: config.sigma,
        prune_below: config.prune_below,
        warmup_experts: config.warmup_experts,
    };
    let mut regressor = SmoothingRegressor::new(data.dim(), spec, config.rule, regressor_config)?;
    let steps = data.len();
    let mut cumulative = vec![0.0; steps + 1];
    let mut run = RegressionRun {
        eta: spec.eta(),
        predictions: Vec::with_capacity(steps),
        losses: Vec::with_capacity(steps),
        mixlosses: Vec::with_capacity(steps),
        peak_regret: Vec::with_capacity(steps),
        traces: vec![Vec::with_capacity(steps); taus.len()],
        regret_check: BoundCheck { t: 0, expert: None, lhs: 0.0, rhs: 0.0, slack: f64::INFINITY, passed: true },
        mixloss_excess: f64::NEG_INFINITY,
        substitution_violation: None,
    };
    for (x, &y) in data.xs.iter().zip(&data.ys) {
        if config.check_mixability {
            if let Some(check) = regressor.mixability_check(x, MIXABILITY_GRID)? {
                let worst = run.substitution_violation.get_or_insert(f64::NEG_INFINITY);
                *worst = worst.max(check.worst_violation);
            }
        }
        let step = regressor.step(x, y)?;
        let t = step.t;
        let mut peak = 0.0f64;
        let mut peak_tau = None;
        for &(tau, l) in &step.expert_losses {
            let r = &mut cumulative[tau as usize];
            *r += step.loss - l;
            if peak_tau.is_none() || *r > peak {
                peak = *r;
                peak_tau = Some(tau);
            }
        }
        let rhs = regret_bound(t, spec.eta());
        if peak_tau.is_some() && rhs - peak < run.regret_check.slack {
            run.regret_check = BoundCheck {
                t,
                expert: peak_tau.map(|tau| crate::longterm::AuxExpert { expert: 0, issued_at: tau }),
                lhs: peak,
                rhs,
                slack: rhs - peak,
                passed: rhs - peak >= -BOUND_SLACK,
            };
        }
        for (trace, &tau) in run.traces.iter_mut().zip(taus) {
            trace.push((t > tau).then(|| cumulative[tau as usize]));
        }
        run.mixloss_excess = run.mixloss_excess.max(step.loss - step.mixloss);
        run.predictions.push(step.prediction);
        run.losses.push(step.loss);
        run.mixlosses.push(step.mixloss);
        run.peak_regret.push(peak);
    }
    Ok(run)
}

/// One least-squares fit on the whole dataset, evaluated in hindsight.
pub fn hindsight_baseline_losses(data: &SwitchingDataset, sigma: f64) -> Result<Vec<f64>> {
    let k = data.dim();
    let x = DMatrix::from_fn(data.len(), k, |i, j| data.xs[i][j]);
    let y = DVector::from_column_slice(&data.ys);
    let mut gram = x.tr_mul(&x);
    for i in 0..k {
        gram[(i, i)] += sigma;
    }
    let w = gram
        .cholesky()
        .ok_or_else(|| Error::Domain("baseline system is not positive definite".into()))?
        .solve(&x.tr_mul(&y));
    Ok(data
        .xs
        .iter()
        .zip(&data.ys)
        .map(|(x, y)| {
            let p: f64 = x.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
            square_loss(*y, p.clamp(-data.bound, data.bound))
        })
        .collect())
}

/// Five birth times at the midpoints of equal fifths of `[h+1, T-1]`.
pub fn default_taus(steps: usize, window: usize) -> Vec<u64> {
    let lo = (window + 1) as f64;
    let hi = steps.saturating_sub(1) as f64;
    if hi < lo {
        return vec![steps.saturating_sub(1).max(1) as u64];
    }
    let mut taus: Vec<u64> = (0..5).map(|i| (lo + (i as f64 + 0.5) / 5.0 * (hi - lo)).floor() as u64).collect();
    taus.dedup();
    taus
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Figure1Config {
    pub dataset: SwitchingDatasetConfig,
    pub run: RegressionRunConfig,
    pub taus: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure1Row {
    pub t: u64,
    /// Cumulative algorithm loss `H_t`.
    pub loss_alg: f64,
    pub bound: f64,
    pub baseline_regret: f64,
    pub regrets: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Figure1Result {
    pub taus: Vec<u64>,
    pub rows: Vec<Figure1Row>,
    pub regret_check: BoundCheck,
    pub algorithm_loss: f64,
    pub baseline_loss: f64,
}

impl Figure1Result {
    /// Whether every recorded trace stays below the bound curve.
    pub fn traces_below_bound(&self) -> bool {
        self.rows.iter().all(|r| r.regrets.iter().flatten().all(|v| *v <= r.bound + BOUND_SLACK))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string(), "loss_alg".into(), "bound".into(), "baseline_regret".into()];
        header.extend(self.taus.iter().map(|tau| format!("regret_tau_{tau}")));
        out.write_record(&header)?;
        for row in &self.rows {
            let mut record = vec![row.t.to_string(), row.loss_alg.to_string(), row.bound.to_string(), row.baseline_regret.to_string()];
            record.extend(row.regrets.iter().map(|v| v.map(|v| v.to_string()).unwrap_or_default()));
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn run_figure1(config: &Figure1Config) -> Result<Figure1Result> {
    let data = generate_switching_dataset(&config.dataset)?;
    let steps = data.len() as u64;
    let taus = config.taus.clone().unwrap_or_else(|| default_taus(data.len(), config.run.window));
    if let Some(tau) = taus.iter().find(|tau| **tau == 0 || **tau >= steps) {
        return Err(Error::Config(format!("trace birth time {tau} outside 1..{steps}")));
    }
    let run = run_regression(&config.run, &data, &taus)?;
    let baseline = hindsight_baseline_losses(&data, config.run.baseline_sigma)?;
    let mut h = 0.0;
    let mut base = 0.0;
    let rows = (0..data.len())
        .map(|i| {
            h += run.losses[i];
            base += baseline[i];
            let t = i as u64 + 1;
            Figure1Row {
                t,
                loss_alg: h,
                bound: regret_bound(t, run.eta),
                baseline_regret: h - base,
                regrets: run.traces.iter().map(|trace| trace[i]).collect(),
            }
        })
        .collect();
    Ok(Figure1Result { taus, rows, regret_check: run.regret_check, algorithm_loss: h, baseline_loss: base })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    /// Seasonal signal with random level shifts and noise.
    #[default]
    Synthetic,
    /// `y_t = B·(-1)^t`.
    Adversarial,
}

impl std::fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SeriesKind::Synthetic => "synthetic",
            SeriesKind::Adversarial => "adversarial",
        })
    }
}

pub fn longterm_series(kind: SeriesKind, steps: usize, bound: f64, seed: u64) -> Vec<f64> {
    match kind {
        SeriesKind::Adversarial => (1..=steps).map(|t| if t % 2 == 0 { bound } else { -bound }).collect(),
        SeriesKind::Synthetic => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut level = 0.0;
            (1..=steps)
                .map(|t| {
                    if rng.random::<f64>() < 0.02 {
                        level = rng.random_range(-0.3..0.3);
                    }
                    let season = 0.6 * (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin();
                    let noise: f64 = rng.sample::<f64, _>(StandardNormal) * 0.1;
                    (bound * (season + level + noise)).clamp(-bound, bound)
                })
                .collect()
        }
    }
}

/// Forecasts for `len` steps ahead from `history`, by expert kind
/// `n mod 5`: persistence, seasonal naive, moving average, damped trend,
/// noisy persistence.
pub fn simple_expert_forecast(n: usize, history: &[f64], len: usize, bound: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    const PERIOD: usize = 12;
    let last = history.last().copied().unwrap_or(0.0);
    let clamp = |v: f64| v.clamp(-bound, bound);
    match n % 5 {
        0 => vec![last; len],
        1 => (1..=len)
            .map(|s| {
                let back = PERIOD - (s - 1) % PERIOD;
                history.len().checked_sub(back).map_or(last, |i| history[i])
            })
            .collect(),
        2 => {
            let tail = &history[history.len().saturating_sub(24)..];
            let mean = if tail.is_empty() { 0.0 } else { tail.iter().sum::<f64>() / tail.len() as f64 };
            vec![mean; len]
        }
        3 => {
            let tail = &history[history.len().saturating_sub(6)..];
            let slope = if tail.len() >= 2 { (tail[tail.len() - 1] - tail[0]) / (tail.len() - 1) as f64 } else { 0.0 };
            let mut acc = last;
            (1..=len)
                .map(|s| {
                    acc += slope * 0.8f64.powi(s as i32);
                    clamp(acc)
                })
                .collect()
        }
        _ => (0..len).map(|_| clamp(last + rng.random_range(-0.3..0.3) * bound)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LongtermRunConfig {
    pub n_experts: usize,
    pub horizon: usize,
    pub steps: usize,
    pub bound: f64,
    pub eta: Option<f64>,
    pub rule: SubstitutionRule,
    /// Full confidence for `4d` offsets when unset.
    pub policy: Option<ConfidencePolicy>,
    pub series: SeriesKind,
    pub seed: u64,
    pub check_mixability: bool,
    /// Keep per-expert losses for the dense replay checks.
    pub keep_losses: bool,
}

impl Default for LongtermRunConfig {
    fn default() -> Self {
        Self {
            n_experts: 3,
            horizon: 5,
            steps: 200,
            bound: 1.0,
            eta: None,
            rule: SubstitutionRule::Vovk,
            policy: None,
            series: SeriesKind::Synthetic,
            seed: 0,
            check_mixability: true,
            keep_losses: true,
        }
    }
}

impl LongtermRunConfig {
    pub fn spec(&self) -> Result<LossSpec> {
        resolve_spec(self.bound, self.eta, self.rule)
    }

    pub fn policy(&self) -> ConfidencePolicy {
        self.policy.unwrap_or_else(|| ConfidencePolicy::default_for_horizon(self.horizon))
    }
}

/// Worst value of each per-step check over a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCheckSummary {
    pub substitution_violation: f64,
    pub per_coordinate_slack: f64,
    pub holder_slack: f64,
    /// `(Σ w e^{-η l̂}, e^{-η h})` at the step with the smallest chained slack.
    pub chained: (f64, f64),
    /// `(h_t, m_t)` at the step with the largest `h_t - m_t`.
    pub mixloss: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct LongtermRun {
    pub config: LongtermRunConfig,
    pub eta: f64,
    pub outcomes: Vec<f64>,
    pub forecasts: Vec<Vec<f64>>,
    pub ledger: RegretLedger,
    pub checks: StepCheckSummary,
}

impl LongtermRun {
    pub fn excess_check(&self) -> BoundCheck {
        let c = &self.config;
        self.ledger.check_against(|t| excess_loss_bound(c.n_experts, t, c.horizon, self.eta).ok())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["t", "y", "forecast_next", "loss_alg", "mixloss", "peak_excess", "bound"])?;
        for (i, step) in self.ledger.steps().iter().enumerate() {
            let bound = excess_loss_bound(self.config.n_experts, step.t, self.config.horizon, self.eta)
                .map(|b| b.to_string())
                .unwrap_or_default();
            out.write_record([
                step.t.to_string(),
                self.outcomes[i].to_string(),
                self.forecasts[i][0].to_string(),
                step.algorithm_loss.to_string(),
                step.mixloss.to_string(),
                step.peak_excess.to_string(),
                bound,
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn run_longterm(config: &LongtermRunConfig) -> Result<LongtermRun> {
    let spec = config.spec()?;
    let policy = config.policy();
    let mut agg = LongTermAggregator::new(config.n_experts, config.horizon, spec, config.rule)?;
    let outcomes = longterm_series(config.series, config.steps, config.bound, config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut ledger = RegretLedger::new(config.keep_losses);
    let mut forecasts = Vec::with_capacity(config.steps);
    let mut checks = StepCheckSummary {
        substitution_violation: f64::NEG_INFINITY,
        per_coordinate_slack: f64::INFINITY,
        holder_slack: f64::INFINITY,
        chained: (0.0, 1.0),
        mixloss: (0.0, 0.0),
    };
    let mut worst_chained = f64::INFINITY;
    let mut worst_mix = f64::NEG_INFINITY;
    let len = policy.max_offset();
    for t in 1..=config.steps {
        let history = &outcomes[..t];
        let streams = (0..config.n_experts)
            .map(|n| {
                let values = simple_expert_forecast(n, history, len, config.bound, &mut rng);
                ExpertForecastStream::with_policy(n, t as u64, values, policy)
            })
            .collect::<Result<Vec<_>>>()?;
        let report = agg.step(outcomes[t - 1], streams)?;
        if let Some(holder) = report.update.holder {
            checks.per_coordinate_slack = checks.per_coordinate_slack.min(holder.per_coordinate_slack);
            checks.holder_slack = checks.holder_slack.min(holder.holder_slack);
            if holder.chained_slack < worst_chained {
                worst_chained = holder.chained_slack;
                checks.chained = (holder.averaged_mixture, holder.algorithm_term);
            }
        }
        if report.update.t > config.horizon as u64 {
            let gap = report.update.algorithm_loss - report.update.mixloss;
            if gap > worst_mix {
                worst_mix = gap;
                checks.mixloss = (report.update.algorithm_loss, report.update.mixloss);
            }
        }
        if config.check_mixability {
            let mix = agg.per_step_mixability_check()?;
            if mix.checked_coordinates > 0 {
                checks.substitution_violation = checks.substitution_violation.max(mix.worst_violation);
            }
        }
        ledger.record(&report.update);
        forecasts.push(report.forecast);
    }
    Ok(LongtermRun { config: config.clone(), eta: spec.eta(), outcomes, forecasts, ledger, checks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionSweepConfig {
    pub steps: usize,
    pub dim: usize,
    pub segments: usize,
    pub window: usize,
    pub sigma: f64,
}

impl Default for RegressionSweepConfig {
    fn default() -> Self {
        Self { steps: 300, dim: 5, segments: 3, window: 20, sigma: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundSweepConfig {
    pub n_experts: Vec<usize>,
    pub horizons: Vec<usize>,
    pub steps: Vec<usize>,
    pub series: Vec<SeriesKind>,
    pub seeds: u64,
    pub base_seed: u64,
    pub bound: f64,
    pub eta: Option<f64>,
    pub rule: SubstitutionRule,
    pub policy: Option<ConfidencePolicy>,
    pub check_mixability: bool,
    pub regression: Option<RegressionSweepConfig>,
}

impl Default for BoundSweepConfig {
    fn default() -> Self {
        Self {
            n_experts: vec![1, 3, 5],
            horizons: vec![1, 5, 10],
            steps: vec![200, 500],
            series: vec![SeriesKind::Synthetic, SeriesKind::Adversarial],
            seeds: 2,
            base_seed: 0,
            bound: 1.0,
            eta: None,
            rule: SubstitutionRule::Vovk,
            policy: None,
            check_mixability: true,
            regression: Some(RegressionSweepConfig::default()),
        }
    }
}

impl BoundSweepConfig {
    pub fn longterm_runs(&self) -> Vec<LongtermRunConfig> {
        let mut runs = Vec::new();
        for &n in &self.n_experts {
            for &d in &self.horizons {
                for &steps in &self.steps {
                    for &series in &self.series {
                        for i in 0..self.seeds {
                            runs.push(LongtermRunConfig {
                                n_experts: n,
                                horizon: d,
                                steps,
                                bound: self.bound,
                                eta: self.eta,
                                rule: self.rule,
                                policy: self.policy,
                                series,
                                seed: self.base_seed + i,
                                check_mixability: self.check_mixability,
                                keep_losses: true,
                            });
                        }
                    }
                }
            }
        }
        runs
    }

    fn validate(&self) -> Result<()> {
        if self.n_experts.is_empty() || self.horizons.is_empty() || self.steps.is_empty() || self.series.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.seeds == 0 {
            return Err(Error::Config("at least one seed is required".into()));
        }
        resolve_spec(self.bound, self.eta, self.rule)?;
        for &d in &self.horizons {
            if self.steps.iter().any(|&t| t <= d) {
                return Err(Error::Config(format!("every T must exceed d = {d}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub config_id: String,
    pub seed: u64,
    pub check_name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

impl SweepRow {
    fn new(config_id: &str, seed: u64, check_name: &str, lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        Self {
            config_id: config_id.to_string(),
            seed,
            check_name: check_name.to_string(),
            lhs,
            rhs,
            slack,
            pass: slack >= -BOUND_SLACK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub runs: usize,
}

impl SweepReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(|r| !r.pass)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["config_id", "seed", "check_name", "lhs", "rhs", "slack", "pass"])?;
        for r in &self.rows {
            out.write_record([
                r.config_id.clone(),
                r.seed.to_string(),
                r.check_name.clone(),
                r.lhs.to_string(),
                r.rhs.to_string(),
                r.slack.to_string(),
                r.pass.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn longterm_id(c: &LongtermRunConfig) -> String {
    format!("longterm/N{}/d{}/T{}/{}", c.n_experts, c.horizon, c.steps, c.series)
}

/// All per-run checks of one long-term run as report rows.
pub fn longterm_check_rows(run: &LongtermRun) -> Result<Vec<SweepRow>> {
    let c = &run.config;
    let id = longterm_id(c);
    let seed = c.seed;
    let mut rows = Vec::new();
    let thm = run.excess_check();
    rows.push(SweepRow::new(&id, seed, "excess_loss_bound", thm.lhs, thm.rhs));
    if c.check_mixability && run.checks.substitution_violation.is_finite() {
        rows.push(SweepRow::new(&id, seed, "substitution_inequality", run.checks.substitution_violation, 0.0));
    }
    if c.steps > c.horizon {
        rows.push(SweepRow::new(&id, seed, "per_coordinate_mixability", -run.checks.per_coordinate_slack, 0.0));
        rows.push(SweepRow::new(&id, seed, "holder_inequality", -run.checks.holder_slack, 0.0));
        rows.push(SweepRow::new(&id, seed, "holder_chained", run.checks.chained.0, run.checks.chained.1));
        rows.push(SweepRow::new(&id, seed, "mixloss_dominance", run.checks.mixloss.0, run.checks.mixloss.1));
    }
    if c.keep_losses {
        let trace = run.ledger.to_delayed_trace(c.n_experts, c.horizon, run.eta)?;
        let dense = trace.mixlosses()?;
        let gap = dense
            .iter()
            .zip(run.ledger.steps())
            .map(|(m, s)| (m - s.mixloss).abs())
            .fold(0.0, f64::max);
        rows.push(SweepRow::new(&id, seed, "lazy_dense_mixloss", gap, 1e-9));
        let units = verify_comparator_bound_units(&trace)?;
        let worst = units
            .iter()
            .min_by(|a, b| (a.rhs - a.lhs).total_cmp(&(b.rhs - b.lhs)))
            .expect("trace has experts");
        rows.push(SweepRow::new(&id, seed, "comparator_bound", worst.lhs, worst.rhs));
        let residual = units.iter().map(|u| u.identity_residual).fold(0.0, f64::max);
        rows.push(SweepRow::new(&id, seed, "mixloss_identity", residual, 1e-10));
        let telescoping = units.iter().map(|u| u.telescoping_residual).fold(0.0, f64::max);
        rows.push(SweepRow::new(&id, seed, "divergence_telescoping", telescoping, 1e-9));
    }
    Ok(rows)
}

fn regression_rows(sweep: &BoundSweepConfig, reg: &RegressionSweepConfig, seed: u64) -> Result<Vec<SweepRow>> {
    let id = format!("regression/k{}/h{}/T{}", reg.dim, reg.window, reg.steps);
    let data = generate_switching_dataset(&SwitchingDatasetConfig {
        steps: reg.steps,
        dim: reg.dim,
        segments: reg.segments,
        bound: sweep.bound,
        seed,
        ..SwitchingDatasetConfig::default()
    })?;
    let run_config = RegressionRunConfig {
        bound: sweep.bound,
        eta: sweep.eta,
        rule: sweep.rule,
        window: reg.window,
        sigma: reg.sigma,
        check_mixability: sweep.check_mixability,
        ..RegressionRunConfig::default()
    };
    let run = run_regression(&run_config, &data, &[])?;
    let mut rows = vec![
        SweepRow::new(&id, seed, "regret_bound", run.regret_check.lhs, run.regret_check.rhs),
        SweepRow::new(&id, seed, "mixloss_dominance", run.mixloss_excess, 0.0),
    ];
    if let Some(v) = run.substitution_violation {
        rows.push(SweepRow::new(&id, seed, "substitution_inequality", v, 0.0));
    }
    Ok(rows)
}

/// Runs every configuration of the grid in parallel; rows come out in grid
/// order regardless of scheduling.
pub fn run_bound_sweep(config: &BoundSweepConfig) -> Result<SweepReport> {
    config.validate()?;
    let runs = config.longterm_runs();
    let mut chunks: Vec<Vec<SweepRow>> = runs
        .par_iter()
        .map(|c| run_longterm(c).and_then(|run| longterm_check_rows(&run)))
        .collect::<Result<_>>()?;
    let mut count = runs.len();
    if let Some(reg) = &config.regression {
        let seeds: Vec<u64> = (0..config.seeds).map(|i| config.base_seed + i).collect();
        let reg_rows: Vec<Vec<SweepRow>> =
            seeds.par_iter().map(|&s| regression_rows(config, reg, s)).collect::<Result<_>>()?;
        count += reg_rows.len();
        chunks.extend(reg_rows);
    }
    Ok(SweepReport { rows: chunks.into_iter().flatten().collect(), runs: count })
}
