//! Delayed-feedback aggregation of long-term forecasts.
//!
//! Every real expert `n` issues, at each time `τ`, a sequence of forecasts
//! for `τ+1, τ+2, …` with confidence levels in `[0, 1]`. Each issue becomes
//! an auxiliary expert `(n, τ)`. At time `t` the aggregator combines the
//! segments `t+1..=t+d` of all auxiliary experts into one vector forecast.
//!
//! Feedback arrives with delay `d`: the forecast issued at `t` is scored at
//! `t+d`, so weights follow `w_{t+d} = wᵘ_t` and there are `d` interleaved
//! weight chains, chain `k` serving the steps `t ≡ k (mod d)`.
//!
//! An auxiliary expert's outdated segment enters through a virtual forecast
//! equal to its own value with probability `p` and the aggregator's forecast
//! otherwise. Its expected loss on coordinate `s` is
//! `l̂ = p·λ(y, c) + (1 - p)·λ(y, γ)`; this is the loss the weights are
//! charged with, and the reason unborn, not-yet-relevant and retired
//! experts all share the aggregator's loss.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::aggregation::{
    square_loss, subst_vovk_unchecked, verify_substitution, LossSpec, SubstitutionRule,
};
use crate::error::{check_len, Error, Result};
use crate::pool::LazyWeights;
use crate::regret::{verify_holder_step, HolderCheck};

/// Grid used by the per-step mixability check.
pub const MIXABILITY_GRID: usize = 201;

/// Auxiliary expert `(n, τ)`: real expert `expert` (0-based) as issued at
/// time `issued_at` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AuxExpert {
    pub expert: usize,
    pub issued_at: u64,
}

impl fmt::Display for AuxExpert {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.expert, self.issued_at)
    }
}

/// Forecasts issued by one expert at one time. `forecasts[i]` targets time
/// `issued_at + i + 1`; offsets past the end have confidence zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertForecastStream {
    expert: usize,
    issued_at: u64,
    forecasts: Vec<f64>,
    confidences: Vec<f64>,
    last_active: usize,
}

impl ExpertForecastStream {
    pub fn new(expert: usize, issued_at: u64, forecasts: Vec<f64>, confidences: Vec<f64>) -> Result<Self> {
        check_len(forecasts.len(), confidences.len())?;
        if issued_at == 0 {
            return Err(Error::Domain("issue times start at 1".into()));
        }
        if let Some(p) = confidences.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Domain(format!("confidence {p} outside [0, 1]")));
        }
        if let Some(c) = forecasts.iter().find(|c| !c.is_finite()) {
            return Err(Error::Domain(format!("forecast {c} is not finite")));
        }
        let last_active = confidences.iter().rposition(|p| *p > 0.0).map_or(0, |i| i + 1);
        Ok(Self { expert, issued_at, forecasts, confidences, last_active })
    }

    /// Stream whose confidences come from `policy`.
    pub fn with_policy(expert: usize, issued_at: u64, forecasts: Vec<f64>, policy: ConfidencePolicy) -> Result<Self> {
        let confidences = (1..=forecasts.len()).map(|o| policy.confidence(o)).collect();
        Self::new(expert, issued_at, forecasts, confidences)
    }

    pub fn key(&self) -> AuxExpert {
        AuxExpert { expert: self.expert, issued_at: self.issued_at }
    }

    pub fn expert(&self) -> usize {
        self.expert
    }

    pub fn issued_at(&self) -> u64 {
        self.issued_at
    }

    /// Forecast for time `issued_at + offset`, `offset ≥ 1`.
    pub fn forecast(&self, offset: u64) -> Option<f64> {
        let i = usize::try_from(offset).ok()?.checked_sub(1)?;
        self.forecasts.get(i).copied()
    }

    pub fn confidence(&self, offset: u64) -> f64 {
        usize::try_from(offset)
            .ok()
            .and_then(|o| o.checked_sub(1))
            .and_then(|i| self.confidences.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    /// Largest offset with positive confidence, 0 if none.
    pub fn last_active_offset(&self) -> usize {
        self.last_active
    }

    fn check_range(&self, spec: &LossSpec) -> Result<()> {
        self.forecasts.iter().try_for_each(|c| spec.check_in_range(*c))
    }
}

/// Confidence assigned to a forecast by its offset from the issue time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConfidencePolicy {
    /// `p = 1` up to `max_offset`, 0 beyond.
    Full { max_offset: usize },
    /// `p` decays linearly from 1 at offset 1 to `1/max_offset` at
    /// `max_offset`, 0 beyond.
    LinearDecay { max_offset: usize },
}

impl ConfidencePolicy {
    /// Full confidence for the first `4d` offsets.
    pub fn default_for_horizon(horizon: usize) -> Self {
        ConfidencePolicy::Full { max_offset: 4 * horizon }
    }

    pub fn max_offset(&self) -> usize {
        match *self {
            ConfidencePolicy::Full { max_offset } | ConfidencePolicy::LinearDecay { max_offset } => max_offset,
        }
    }

    pub fn confidence(&self, offset: usize) -> f64 {
        match *self {
            ConfidencePolicy::Full { max_offset } => {
                if (1..=max_offset).contains(&offset) {
                    1.0
                } else {
                    0.0
                }
            }
            ConfidencePolicy::LinearDecay { max_offset } => {
                if (1..=max_offset).contains(&offset) {
                    (max_offset + 1 - offset) as f64 / max_offset as f64
                } else {
                    0.0
                }
            }
        }
    }
}

/// Normalized confidence-weighted weights `w* ∝ p·w` for one coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveWeights {
    pub experts: Vec<AuxExpert>,
    pub forecasts: Vec<f64>,
    pub weights: Vec<f64>,
    /// Set when `Σ p·w = 0`; `experts` is then empty.
    pub degenerate: bool,
}

/// A vector forecast `γ_t` for `t+1..=t+d`.
#[derive(Debug, Clone, PartialEq)]
pub struct IssuedForecast {
    pub issued_at: u64,
    pub values: Vec<f64>,
    pub degenerate: Vec<bool>,
}

/// Per-expert result of one weight update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcessLoss {
    pub expert: AuxExpert,
    /// Expected (confidence-discounted) average loss `l̂`.
    pub discounted_loss: f64,
    /// `r = h - l̂`.
    pub excess: f64,
}

/// What `observe_and_update` computed at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateReport {
    pub t: u64,
    /// Average loss `h_t` of the forecast issued at `t - d` (0 for `t ≤ d`).
    pub algorithm_loss: f64,
    pub coordinate_losses: Vec<f64>,
    /// Mixloss of the whole family under the pre-update weights.
    pub mixloss: f64,
    /// Experts with `τ ≤ t - d`; every other expert has zero excess.
    pub excess: Vec<ExcessLoss>,
    /// `None` for `t ≤ d`.
    pub holder: Option<HolderCheck>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixabilityReport {
    pub passed: bool,
    /// Largest `λ(y, γ_s) - g_s(y)` over grid points and coordinates.
    pub worst_violation: f64,
    pub checked_coordinates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub update: UpdateReport,
    pub forecast: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LongTermAggregator {
    n_experts: usize,
    horizon: usize,
    spec: LossSpec,
    rule: SubstitutionRule,
    clock: u64,
    experts: Vec<ExpertForecastStream>,
    chains: Vec<LazyWeights>,
    issued: VecDeque<IssuedForecast>,
    outcomes: VecDeque<f64>,
    retire_inactive: bool,
}

impl LongTermAggregator {
    pub fn new(n_experts: usize, horizon: usize, spec: LossSpec, rule: SubstitutionRule) -> Result<Self> {
        if n_experts == 0 {
            return Err(Error::Config("at least one expert is required".into()));
        }
        if horizon == 0 {
            return Err(Error::Config("forecast horizon must be at least 1".into()));
        }
        spec.check_rule(rule)?;
        Ok(Self {
            n_experts,
            horizon,
            spec,
            rule,
            clock: 0,
            experts: Vec::new(),
            chains: vec![LazyWeights::new(n_experts); horizon],
            issued: VecDeque::with_capacity(horizon + 1),
            outcomes: VecDeque::with_capacity(horizon + 1),
            retire_inactive: true,
        })
    }

    /// Whether experts that can no longer influence any forecast are folded
    /// into a single retired mass. Folding is exact; turning it off keeps
    /// every born expert's weight explicit.
    pub fn with_retirement(mut self, enabled: bool) -> Self {
        self.retire_inactive = enabled;
        self
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_experts(&self) -> usize {
        self.n_experts
    }

    pub fn spec(&self) -> &LossSpec {
        &self.spec
    }

    pub fn rule(&self) -> SubstitutionRule {
        self.rule
    }

    fn chain_index(&self, t: u64) -> usize {
        (t % self.horizon as u64) as usize
    }

    /// Weight chain holding `w_{t+d}` for the current clock `t`, the one
    /// the current forecast uses.
    pub fn forecast_chain(&self) -> &LazyWeights {
        &self.chains[self.chain_index(self.clock)]
    }

    pub fn chain(&self, k: usize) -> &LazyWeights {
        &self.chains[k]
    }

    pub fn alive_experts(&self) -> impl Iterator<Item = AuxExpert> + '_ {
        self.experts.iter().map(ExpertForecastStream::key)
    }

    pub fn last_forecast(&self) -> Option<&IssuedForecast> {
        self.issued.back().filter(|f| f.issued_at == self.clock)
    }

    /// Advances the clock to `t` and scores the forecast issued at `t - d`
    /// against `window = y_{t-d+1..=t}`. For `t ≤ d` nothing is scored and
    /// the weights are left unchanged.
    pub fn observe_and_update(&mut self, window: &[f64]) -> Result<UpdateReport> {
        check_len(self.horizon, window.len())?;
        for &y in window {
            self.spec.check_in_range(y)?;
        }
        let t = self.clock + 1;
        let d = self.horizon;
        if t > 1 && self.forecast_chain().born_through() < self.clock {
            return Err(Error::State(format!("no experts were born at time {}", self.clock)));
        }
        if t > 1 && self.last_forecast().is_none() {
            return Err(Error::State(format!("no forecast was issued at time {}", self.clock)));
        }
        self.clock = t;

        if t <= d as u64 {
            return Ok(UpdateReport {
                t,
                algorithm_loss: 0.0,
                coordinate_losses: vec![0.0; d],
                mixloss: 0.0,
                excess: Vec::new(),
                holder: None,
            });
        }

        let origin = t - d as u64;
        let scored = self
            .issued
            .pop_front()
            .filter(|f| f.issued_at == origin)
            .ok_or_else(|| Error::State(format!("forecast issued at {origin} is missing")))?;
        let coordinate_losses: Vec<f64> =
            window.iter().zip(&scored.values).map(|(y, g)| square_loss(*y, *g)).collect();
        let h = coordinate_losses.iter().sum::<f64>() / d as f64;

        // Per expert, per coordinate: l̂_s = p·λ(y, c) + (1 - p)·h_s.
        let mut coordinate_table = Vec::with_capacity((self.experts.len() + 1) * d);
        let mut discounted = Vec::with_capacity(self.experts.len());
        let mut excess = Vec::new();
        for stream in &self.experts {
            let mut total = 0.0;
            for s in 0..d {
                let h_s = coordinate_losses[s];
                let l_hat = if stream.issued_at <= origin {
                    let offset = origin - stream.issued_at + s as u64 + 1;
                    let p = stream.confidence(offset);
                    match stream.forecast(offset) {
                        Some(c) if p > 0.0 => p * square_loss(window[s], c) + (1.0 - p) * h_s,
                        _ => h_s,
                    }
                } else {
                    h_s
                };
                coordinate_table.push(l_hat);
                total += l_hat;
            }
            let l_hat = total / d as f64;
            discounted.push(l_hat);
            if stream.issued_at <= origin {
                excess.push(ExcessLoss { expert: stream.key(), discounted_loss: l_hat, excess: h - l_hat });
            }
        }

        let k = self.chain_index(t);
        let chain = &mut self.chains[k];
        let mut holder_weights = chain.alive().to_vec();
        holder_weights.push(chain.reservoir() + chain.retired());
        coordinate_table.extend_from_slice(&coordinate_losses);
        let holder = verify_holder_step(&holder_weights, &coordinate_table, &coordinate_losses, self.spec.eta())?;

        let mixloss = chain.update(&discounted, h, self.spec.eta());

        if self.retire_inactive {
            self.retire(t);
        }

        Ok(UpdateReport { t, algorithm_loss: h, coordinate_losses, mixloss, excess, holder: Some(holder) })
    }

    // An expert whose positive-confidence offsets all lie before every
    // forecast still awaiting its score is charged the shared loss from
    // now on, exactly like the retired mass.
    fn retire(&mut self, t: u64) {
        let d = self.horizon as u64;
        let keep: Vec<bool> = self
            .experts
            .iter()
            .map(|e| t + 1 < d + e.issued_at + e.last_active_offset() as u64)
            .collect();
        if keep.iter().all(|k| *k) {
            return;
        }
        for chain in &mut self.chains {
            chain.retain(&keep);
        }
        let mut it = keep.iter();
        self.experts.retain(|_| *it.next().unwrap());
    }

    /// Realizes the auxiliary experts `(n, t)` for the current clock `t`,
    /// one stream per real expert.
    pub fn birth_experts(&mut self, streams: Vec<ExpertForecastStream>) -> Result<()> {
        let t = self.clock;
        if t == 0 {
            return Err(Error::State("births start at time 1".into()));
        }
        if self.chains[0].born_through() >= t {
            return Err(Error::State(format!("experts issued at {t} were already born")));
        }
        check_len(self.n_experts, streams.len())?;
        let mut seen = HashSet::new();
        for stream in &streams {
            if stream.issued_at != t {
                return Err(Error::State(format!(
                    "stream issued at {} offered at time {t}",
                    stream.issued_at
                )));
            }
            if stream.expert >= self.n_experts {
                return Err(Error::Domain(format!("expert index {} out of range", stream.expert)));
            }
            if !seen.insert(stream.expert) {
                return Err(Error::State(format!("duplicate birth for expert {} at {t}", stream.expert)));
            }
            stream.check_range(&self.spec)?;
        }
        let mut streams = streams;
        streams.sort_by_key(|s| s.expert);
        for chain in &mut self.chains {
            chain.birth(t);
        }
        self.experts.extend(streams);
        Ok(())
    }

    /// Effective weights for coordinate `s ∈ 1..=d` at the current clock.
    pub fn effective_weights(&self, s: usize) -> Result<EffectiveWeights> {
        if !(1..=self.horizon).contains(&s) {
            return Err(Error::Domain(format!("coordinate {s} outside 1..={}", self.horizon)));
        }
        let t = self.clock;
        let weights = self.forecast_chain().alive();
        let mut out = EffectiveWeights { experts: Vec::new(), forecasts: Vec::new(), weights: Vec::new(), degenerate: false };
        let mut total = 0.0;
        for (stream, w) in self.experts.iter().zip(weights) {
            let offset = t - stream.issued_at + s as u64;
            let p = stream.confidence(offset);
            let mass = p * w;
            if mass > 0.0 {
                if let Some(c) = stream.forecast(offset) {
                    out.experts.push(stream.key());
                    out.forecasts.push(c);
                    out.weights.push(mass);
                    total += mass;
                }
            }
        }
        if total > 0.0 && total.is_finite() {
            for w in &mut out.weights {
                *w /= total;
            }
        } else {
            out.experts.clear();
            out.forecasts.clear();
            out.weights.clear();
            out.degenerate = true;
        }
        Ok(out)
    }

    /// Issues `γ_t` for the current clock.
    pub fn forecast_horizon(&mut self) -> Result<&[f64]> {
        let t = self.clock;
        if t == 0 || self.forecast_chain().born_through() < t {
            return Err(Error::State(format!("experts issued at {t} have not been born")));
        }
        if self.last_forecast().is_some() {
            return Err(Error::State(format!("a forecast was already issued at {t}")));
        }
        let d = self.horizon;
        let mut values = Vec::with_capacity(d);
        let mut degenerate = Vec::with_capacity(d);
        for s in 1..=d {
            let eff = self.effective_weights(s)?;
            if eff.degenerate {
                values.push(self.previous_forecast_for(t + s as u64).unwrap_or(0.0));
                degenerate.push(true);
            } else {
                let gamma = match self.rule {
                    SubstitutionRule::Vovk => subst_vovk_unchecked(&eff.forecasts, &eff.weights, &self.spec),
                    SubstitutionRule::Mean => {
                        let mean: f64 = eff.forecasts.iter().zip(&eff.weights).map(|(c, w)| c * w).sum();
                        self.spec.clamp(mean)
                    }
                };
                values.push(gamma);
                degenerate.push(false);
            }
        }
        self.issued.push_back(IssuedForecast { issued_at: t, values, degenerate });
        Ok(&self.issued.back().expect("just pushed").values)
    }

    fn previous_forecast_for(&self, time: u64) -> Option<f64> {
        self.issued.iter().rev().find_map(|f| {
            let s = time.checked_sub(f.issued_at)?;
            (1..=self.horizon as u64).contains(&s).then(|| f.values[s as usize - 1])
        })
    }

    /// Checks the substitution inequality for every non-degenerate
    /// coordinate of the forecast issued at the current clock.
    pub fn per_step_mixability_check(&self) -> Result<MixabilityReport> {
        let issued = self
            .last_forecast()
            .ok_or_else(|| Error::State(format!("no forecast issued at {}", self.clock)))?;
        self.check_forecast(&issued.values)
    }

    /// Same check for an arbitrary candidate vector against the current
    /// effective weights.
    pub fn check_forecast(&self, gamma: &[f64]) -> Result<MixabilityReport> {
        check_len(self.horizon, gamma.len())?;
        let mut report = MixabilityReport { passed: true, worst_violation: f64::NEG_INFINITY, checked_coordinates: 0 };
        for s in 1..=self.horizon {
            let eff = self.effective_weights(s)?;
            if eff.degenerate {
                continue;
            }
            let check = verify_substitution(gamma[s - 1], &eff.forecasts, &eff.weights, &self.spec, MIXABILITY_GRID);
            report.passed &= check.passed;
            report.worst_violation = report.worst_violation.max(check.worst_violation);
            report.checked_coordinates += 1;
        }
        Ok(report)
    }

    /// One full round: reveal `y_t`, score the forecast from `t - d`, birth
    /// the experts issued at `t` and forecast `t+1..=t+d`.
    pub fn step(&mut self, outcome: f64, streams: Vec<ExpertForecastStream>) -> Result<StepReport> {
        self.spec.check_in_range(outcome)?;
        self.outcomes.push_back(outcome);
        while self.outcomes.len() > self.horizon {
            self.outcomes.pop_front();
        }
        let mut window = vec![0.0; self.horizon - self.outcomes.len()];
        window.extend(self.outcomes.iter().copied());
        let update = self.observe_and_update(&window)?;
        self.birth_experts(streams)?;
        let forecast = self.forecast_horizon()?.to_vec();
        Ok(StepReport { update, forecast })
    }
}
