//! Square-loss aggregation kernel: superprediction, the two substitution
//! rules, the exponential weight update and relative entropy.
//!
//! All exponential sums go through a max-shifted log-sum-exp. Weight
//! vectors are renormalized after every update.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Absolute tolerance on `Σ w = 1` for weight vectors.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Slack allowed by [`verify_substitution`] on `λ(y, γ) ≤ g(y)`.
pub const SUBSTITUTION_SLACK: f64 = 1e-9;

// Relative slack when comparing η against the admissible maximum, so that
// `1.0 / (2.0 * b * b)` computed elsewhere is never rejected by rounding.
const ETA_RANGE_RTOL: f64 = 1e-12;

/// Square loss with outcome bound `B` and learning rate `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    bound: f64,
    eta: f64,
}

impl LossSpec {
    pub fn new(bound: f64, eta: f64) -> Result<Self> {
        if !(bound.is_finite() && bound > 0.0) {
            return Err(Error::Config(format!("outcome bound must be positive, got {bound}")));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {eta}")));
        }
        Ok(Self { bound, eta })
    }

    /// The largest learning rate admitted by `rule` for this bound.
    pub fn for_rule(bound: f64, rule: SubstitutionRule) -> Result<Self> {
        Self::new(bound, rule.max_eta(bound))
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Largest possible loss on `[-B, B]`, i.e. `4B²`.
    pub fn loss_range(&self) -> f64 {
        4.0 * self.bound * self.bound
    }

    /// Fails unless `η` lies in the range where `rule` satisfies the
    /// mixability inequality.
    pub fn check_rule(&self, rule: SubstitutionRule) -> Result<()> {
        let max = rule.max_eta(self.bound);
        if self.eta <= max * (1.0 + ETA_RANGE_RTOL) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "eta = {} exceeds {} for the {rule} substitution with B = {}",
                self.eta, max, self.bound
            )))
        }
    }

    pub fn check_in_range(&self, value: f64) -> Result<()> {
        if value.is_finite() && value.abs() <= self.bound {
            Ok(())
        } else {
            Err(Error::OutOfRange { value, bound: self.bound })
        }
    }

    pub fn clamp(&self, value: f64) -> f64 {
        value.clamp(-self.bound, self.bound)
    }
}

/// Rule mapping (forecasts, weights) to a single forecast.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SubstitutionRule {
    /// `γ = (g(-B) - g(B)) / 4B`, valid for `η ≤ 1/(2B²)`.
    #[default]
    Vovk,
    /// Weighted mean, valid for `η ≤ 1/(8B²)`.
    Mean,
}

impl SubstitutionRule {
    pub fn max_eta(self, bound: f64) -> f64 {
        match self {
            SubstitutionRule::Vovk => 1.0 / (2.0 * bound * bound),
            SubstitutionRule::Mean => 1.0 / (8.0 * bound * bound),
        }
    }

    pub fn apply(self, forecasts: &[f64], weights: &[f64], spec: &LossSpec) -> Result<f64> {
        match self {
            SubstitutionRule::Vovk => subst_vovk(forecasts, weights, spec),
            SubstitutionRule::Mean => subst_mean(forecasts, weights),
        }
    }
}

impl fmt::Display for SubstitutionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubstitutionRule::Vovk => f.write_str("vovk"),
            SubstitutionRule::Mean => f.write_str("mean"),
        }
    }
}

impl FromStr for SubstitutionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vovk" => Ok(SubstitutionRule::Vovk),
            "mean" => Ok(SubstitutionRule::Mean),
            other => Err(Error::Config(format!("unknown substitution rule `{other}`"))),
        }
    }
}

/// A probability vector: non-negative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        check_weights(&entries)?;
        Ok(Self(entries))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidWeights("empty weight vector".into()));
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    /// Unit mass on `index`.
    pub fn unit(n: usize, index: usize) -> Result<Self> {
        if index >= n {
            return Err(Error::Dimension { expected: n, actual: index + 1 });
        }
        let mut entries = vec![0.0; n];
        entries[index] = 1.0;
        Ok(Self(entries))
    }

    /// Normalizes arbitrary non-negative masses.
    pub fn from_masses(masses: Vec<f64>) -> Result<Self> {
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidWeights("masses must be finite and non-negative".into()));
        }
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidWeights("total mass is zero".into()));
        }
        Ok(Self(masses.into_iter().map(|m| m / total).collect()))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for WeightVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Expert forecasts, each inside `[-B, B]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastVector(Vec<f64>);

impl ForecastVector {
    /// Out-of-range entries are rejected rather than clipped.
    pub fn new(entries: Vec<f64>, spec: &LossSpec) -> Result<Self> {
        for &c in &entries {
            spec.check_in_range(c)?;
        }
        Ok(Self(entries))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for ForecastVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidWeights("empty weight vector".into()));
    }
    let mut total = 0.0;
    for &w in weights {
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::InvalidWeights(format!("entry {w} is not a non-negative number")));
        }
        total += w;
    }
    let tol = WEIGHT_SUM_TOL + weights.len() as f64 * f64::EPSILON;
    if (total - 1.0).abs() > tol {
        return Err(Error::InvalidWeights(format!("entries sum to {total}, not 1")));
    }
    Ok(())
}

#[inline]
pub fn square_loss(y: f64, gamma: f64) -> f64 {
    let diff = y - gamma;
    diff * diff
}

/// `ln Σ exp(xᵢ)`, or `-∞` for an empty or all-`-∞` input.
pub fn log_sum_exp<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let iter = values.into_iter();
    let max = iter.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = iter.map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `ln Σ wᵢ exp(aᵢ)` over the entries with `wᵢ > 0`.
pub fn log_mixture(weights: &[f64], exponents: &[f64]) -> f64 {
    debug_assert_eq!(weights.len(), exponents.len());
    log_sum_exp(
        weights
            .iter()
            .zip(exponents)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, a)| w.ln() + a),
    )
}

/// Superprediction `g(y) = -(1/η) ln Σ pᵢ exp(-η λ(y, cᵢ))`.
pub fn superprediction(y: f64, forecasts: &[f64], weights: &[f64], spec: &LossSpec) -> Result<f64> {
    check_len(forecasts.len(), weights.len())?;
    check_weights(weights)?;
    Ok(superprediction_unchecked(y, forecasts, weights, spec.eta()))
}

fn superprediction_unchecked(y: f64, forecasts: &[f64], weights: &[f64], eta: f64) -> f64 {
    let lse = log_sum_exp(
        weights
            .iter()
            .zip(forecasts)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, c)| w.ln() - eta * square_loss(y, *c)),
    );
    -lse / eta
}

/// Vovk's substitution for the square loss, clamped to `[-B, B]`.
pub fn subst_vovk(forecasts: &[f64], weights: &[f64], spec: &LossSpec) -> Result<f64> {
    spec.check_rule(SubstitutionRule::Vovk)?;
    check_len(forecasts.len(), weights.len())?;
    check_weights(weights)?;
    for &c in forecasts {
        spec.check_in_range(c)?;
    }
    Ok(subst_vovk_unchecked(forecasts, weights, spec))
}

pub(crate) fn subst_vovk_unchecked(forecasts: &[f64], weights: &[f64], spec: &LossSpec) -> f64 {
    let (b, eta) = (spec.bound(), spec.eta());
    let toward_upper = log_sum_exp(
        weights
            .iter()
            .zip(forecasts)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, c)| w.ln() - eta * square_loss(b, *c)),
    );
    let toward_lower = log_sum_exp(
        weights
            .iter()
            .zip(forecasts)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, c)| w.ln() - eta * square_loss(-b, *c)),
    );
    spec.clamp((toward_upper - toward_lower) / (4.0 * eta * b))
}

/// Weighted mean of the forecasts.
pub fn subst_mean(forecasts: &[f64], weights: &[f64]) -> Result<f64> {
    check_len(forecasts.len(), weights.len())?;
    check_weights(weights)?;
    Ok(forecasts.iter().zip(weights).map(|(c, w)| c * w).sum())
}

/// Exponential weighting `wᵢ e^{-η lᵢ} / Σ wⱼ e^{-η lⱼ}`, evaluated in the
/// log domain so that no positive weight can underflow the whole vector.
pub fn exp_weight_update(weights: &[f64], losses: &[f64], spec: &LossSpec) -> Result<WeightVector> {
    check_len(weights.len(), losses.len())?;
    check_weights(weights)?;
    if let Some(l) = losses.iter().find(|l| !l.is_finite()) {
        return Err(Error::Domain(format!("loss {l} is not finite")));
    }
    let eta = spec.eta();
    let logs: Vec<f64> = weights
        .iter()
        .zip(losses)
        .map(|(w, l)| if *w > 0.0 { w.ln() - eta * l } else { f64::NEG_INFINITY })
        .collect();
    Ok(WeightVector(normalize_log_weights(&logs)))
}

/// Turns log-masses into a normalized probability vector.
pub(crate) fn normalize_log_weights(logs: &[f64]) -> Vec<f64> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for w in &mut out {
        *w /= total;
    }
    out
}

/// Relative entropy `D(q‖p) = Σ qᵢ ln(qᵢ/pᵢ)` with `0 ln 0 = 0`.
pub fn relative_entropy(q: &[f64], p: &[f64]) -> Result<f64> {
    check_len(q.len(), p.len())?;
    let mut total = 0.0;
    for (index, (&qi, &pi)) in q.iter().zip(p).enumerate() {
        if qi <= 0.0 {
            continue;
        }
        if pi <= 0.0 {
            return Err(Error::InfiniteDivergence { index });
        }
        total += qi * (qi / pi).ln();
    }
    // Rounding can push an exact zero slightly negative.
    Ok(total.max(0.0))
}

/// Outcome of checking `λ(y, γ) ≤ g(y)` on a grid over `[-B, B]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubstitutionCheck {
    pub passed: bool,
    /// `max_y λ(y, γ) - g(y)`; negative when every grid point has slack.
    pub worst_violation: f64,
    pub worst_outcome: f64,
}

pub fn verify_substitution(
    gamma: f64,
    forecasts: &[f64],
    weights: &[f64],
    spec: &LossSpec,
    grid_points: usize,
) -> SubstitutionCheck {
    let grid_points = grid_points.max(3);
    let b = spec.bound();
    let eta = spec.eta();
    let terms: Vec<(f64, f64)> =
        weights.iter().zip(forecasts).filter(|(w, _)| **w > 0.0).map(|(w, c)| (w.ln(), *c)).collect();
    let mut scratch = vec![0.0; terms.len()];
    let mut worst_violation = f64::NEG_INFINITY;
    let mut worst_outcome = -b;
    for i in 0..grid_points {
        let y = -b + 2.0 * b * i as f64 / (grid_points - 1) as f64;
        let mut max = f64::NEG_INFINITY;
        for (slot, (lw, c)) in scratch.iter_mut().zip(&terms) {
            *slot = lw - eta * square_loss(y, *c);
            max = max.max(*slot);
        }
        let g = -(max + scratch.iter().map(|x| (x - max).exp()).sum::<f64>().ln()) / eta;
        let violation = square_loss(y, gamma) - g;
        if violation > worst_violation {
            worst_violation = violation;
            worst_outcome = y;
        }
    }
    SubstitutionCheck {
        passed: worst_violation <= SUBSTITUTION_SLACK,
        worst_violation,
        worst_outcome,
    }
}

/// The plain aggregating algorithm over a fixed pool of experts with
/// one-step-ahead forecasts.
#[derive(Debug, Clone)]
pub struct ClassicAggregator {
    spec: LossSpec,
    rule: SubstitutionRule,
    weights: Vec<f64>,
    pending: Option<(Vec<f64>, f64)>,
    algorithm_loss: f64,
    expert_losses: Vec<f64>,
}

impl ClassicAggregator {
    pub fn new(n_experts: usize, spec: LossSpec, rule: SubstitutionRule) -> Result<Self> {
        spec.check_rule(rule)?;
        let weights = WeightVector::uniform(n_experts)?.into_inner();
        Ok(Self {
            spec,
            rule,
            weights,
            pending: None,
            algorithm_loss: 0.0,
            expert_losses: vec![0.0; n_experts],
        })
    }

    pub fn forecast(&mut self, predictions: &[f64]) -> Result<f64> {
        check_len(self.weights.len(), predictions.len())?;
        for &c in predictions {
            self.spec.check_in_range(c)?;
        }
        let gamma = self.rule.apply(predictions, &self.weights, &self.spec)?;
        self.pending = Some((predictions.to_vec(), gamma));
        Ok(gamma)
    }

    /// Charges the pending forecast and returns the algorithm's loss.
    pub fn observe(&mut self, outcome: f64) -> Result<f64> {
        self.spec.check_in_range(outcome)?;
        let (predictions, gamma) = self
            .pending
            .take()
            .ok_or_else(|| Error::State("observe called before forecast".into()))?;
        let losses: Vec<f64> = predictions.iter().map(|c| square_loss(outcome, *c)).collect();
        for (total, l) in self.expert_losses.iter_mut().zip(&losses) {
            *total += l;
        }
        let h = square_loss(outcome, gamma);
        self.algorithm_loss += h;
        self.weights = exp_weight_update(&self.weights, &losses, &self.spec)?.into_inner();
        Ok(h)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn algorithm_loss(&self) -> f64 {
        self.algorithm_loss
    }

    pub fn expert_losses(&self) -> &[f64] {
        &self.expert_losses
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spec(b: f64, eta: f64) -> LossSpec {
        LossSpec::new(b, eta).unwrap()
    }

    #[test]
    fn square_loss_examples() {
        assert_eq!(square_loss(1.0, 1.0), 0.0);
        assert_eq!(square_loss(1.0, -1.0), 4.0);
        assert_abs_diff_eq!(square_loss(0.3, -0.2), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn loss_spec_rejects_non_positive() {
        assert!(LossSpec::new(0.0, 0.5).is_err());
        assert!(LossSpec::new(1.0, -1.0).is_err());
        assert!(LossSpec::new(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn eta_ranges() {
        let s = spec(1.0, 0.5);
        assert!(s.check_rule(SubstitutionRule::Vovk).is_ok());
        assert!(s.check_rule(SubstitutionRule::Mean).is_err());
        assert!(spec(1.0, 1.0).check_rule(SubstitutionRule::Vovk).is_err());
        assert!(spec(2.0, 1.0 / 32.0).check_rule(SubstitutionRule::Mean).is_ok());
    }

    #[test]
    fn superprediction_examples() {
        let s = spec(1.0, 0.5);
        assert_abs_diff_eq!(superprediction(0.3, &[0.9], &[1.0], &s).unwrap(), 0.36, epsilon = 1e-14);
        // equal losses collapse the mixture
        assert_abs_diff_eq!(
            superprediction(0.0, &[1.0, -1.0], &[0.5, 0.5], &s).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        // mpmath, 50 digits
        assert_abs_diff_eq!(
            superprediction(1.0, &[1.0, 0.0], &[0.5, 0.5], &s).unwrap(),
            0.438_140_392_759_677_26,
            epsilon = 1e-14
        );
        assert!(matches!(
            superprediction(0.0, &[1.0], &[0.5, 0.5], &s),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn vovk_examples() {
        let s = spec(1.0, 0.5);
        assert_abs_diff_eq!(subst_vovk(&[0.37], &[1.0], &s).unwrap(), 0.37, epsilon = 1e-14);
        assert_abs_diff_eq!(subst_vovk(&[0.6, -0.6], &[0.5, 0.5], &s).unwrap(), 0.0, epsilon = 1e-15);

        let (c, p) = ([0.8, -0.4], [0.7, 0.3]);
        let gamma = subst_vovk(&c, &p, &s).unwrap();
        // mpmath, 50 digits; the same oracle finds worst grid violation -0.03932
        assert_abs_diff_eq!(gamma, 0.359_581_749_797_992_03, epsilon = 1e-14);
        let check = verify_substitution(gamma, &c, &p, &s, 1001);
        assert!(check.passed);
        assert_abs_diff_eq!(check.worst_violation, -0.039_323_078_302_875_95, epsilon = 1e-12);
    }

    #[test]
    fn vovk_rejects_out_of_range_eta_and_forecasts() {
        assert!(matches!(subst_vovk(&[0.0], &[1.0], &spec(1.0, 0.6)), Err(Error::Config(_))));
        assert!(matches!(
            subst_vovk(&[1.5], &[1.0], &spec(1.0, 0.5)),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn mean_examples() {
        assert_abs_diff_eq!(subst_mean(&[0.0, 4.0], &[0.25, 0.75]).unwrap(), 3.0, epsilon = 1e-15);
        assert_eq!(subst_mean(&[0.3], &[1.0]).unwrap(), 0.3);
        let third = 1.0 / 3.0;
        assert_abs_diff_eq!(
            subst_mean(&[-1.0, 0.0, 1.0], &[third, third, 1.0 - 2.0 * third]).unwrap(),
            0.0,
            epsilon = 1e-15
        );
        assert!(subst_mean(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn weight_update_examples() {
        let s = spec(1.0, 0.5);
        let same = exp_weight_update(&[0.2, 0.3, 0.5], &[0.7, 0.7, 0.7], &s).unwrap();
        for (a, b) in same.iter().zip([0.2, 0.3, 0.5]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        let w = exp_weight_update(&[0.5, 0.5], &[0.0, 2.0_f64.ln() / 0.5], &s).unwrap();
        assert_abs_diff_eq!(w[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 1.0 / 3.0, epsilon = 1e-15);
        let w = exp_weight_update(&[1.0, 0.0], &[3.0, 0.0], &s).unwrap();
        assert_eq!(&*w, &[1.0, 0.0]);
        // the only supported expert keeps its mass whatever its loss
        let w = exp_weight_update(&[1.0, 0.0], &[1e6, 0.0], &s).unwrap();
        assert_eq!(&*w, &[1.0, 0.0]);
        assert!(exp_weight_update(&[0.5, 0.5], &[0.0, f64::NAN], &s).is_err());
    }

    #[test]
    fn relative_entropy_examples() {
        assert_eq!(relative_entropy(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            relative_entropy(&[1.0, 0.0], &[0.5, 0.5]).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
        assert!(matches!(
            relative_entropy(&[0.5, 0.5], &[1.0, 0.0]),
            Err(Error::InfiniteDivergence { index: 1 })
        ));
    }

    #[test]
    fn verify_substitution_detects_bad_forecast() {
        let s = spec(1.0, 0.5);
        let check = verify_substitution(1.0, &[-1.0], &[1.0], &s, 201);
        assert!(!check.passed);
        assert_abs_diff_eq!(check.worst_violation, 4.0, epsilon = 1e-12);
        assert_eq!(check.worst_outcome, -1.0);
    }

    #[test]
    fn mean_rule_passes_in_exp_concave_range() {
        let s = LossSpec::for_rule(1.0, SubstitutionRule::Mean).unwrap();
        let (c, p) = ([0.9, -0.8, 0.1], [0.2, 0.5, 0.3]);
        let gamma = subst_mean(&c, &p).unwrap();
        assert!(verify_substitution(gamma, &c, &p, &s, 1001).passed);
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![0.5, 0.5]).is_ok());
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![1.5, -0.5]).is_err());
        assert!(WeightVector::new(vec![]).is_err());
        let spec = spec(1.0, 0.5);
        assert!(ForecastVector::new(vec![0.2, 1.2], &spec).is_err());
    }

    #[test]
    fn classic_aggregator_tracks_losses() {
        let s = spec(1.0, 0.5);
        let mut aa = ClassicAggregator::new(2, s, SubstitutionRule::Vovk).unwrap();
        assert!(aa.observe(0.0).is_err());
        let gamma = aa.forecast(&[0.5, -0.5]).unwrap();
        assert_abs_diff_eq!(gamma, 0.0, epsilon = 1e-15);
        aa.observe(0.5).unwrap();
        assert!(aa.weights()[0] > aa.weights()[1]);
        assert_abs_diff_eq!(aa.expert_losses()[1], 1.0, epsilon = 1e-15);
    }

    fn weights_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0..1.0f64, n).prop_filter_map("zero mass", |m| {
            WeightVector::from_masses(m).ok().map(WeightVector::into_inner)
        })
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..8).prop_flat_map(|n| (prop::collection::vec(-1.0..=1.0f64, n), weights_strategy(n)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn vovk_substitution_is_admissible((c, p) in instance()) {
            let s = LossSpec::for_rule(1.0, SubstitutionRule::Vovk).unwrap();
            let gamma = subst_vovk(&c, &p, &s).unwrap();
            prop_assert!(gamma.abs() <= 1.0);
            prop_assert!(verify_substitution(gamma, &c, &p, &s, 201).passed);
        }

        #[test]
        fn mean_substitution_is_admissible((c, p) in instance()) {
            let s = LossSpec::for_rule(1.0, SubstitutionRule::Mean).unwrap();
            let gamma = subst_mean(&c, &p).unwrap();
            prop_assert!(gamma.abs() <= 1.0 + 1e-15);
            prop_assert!(verify_substitution(gamma, &c, &p, &s, 201).passed);
        }
    }

    proptest! {
        #[test]
        fn weight_update_stays_a_distribution(
            (w, l) in (1usize..10).prop_flat_map(|n| (weights_strategy(n), prop::collection::vec(0.0..1e4f64, n)))
        ) {
            let s = spec(1.0, 0.5);
            let out = exp_weight_update(&w, &l, &s).unwrap();
            prop_assert!(check_weights(&out).is_ok());
        }

        #[test]
        fn relative_entropy_is_nonnegative(
            (q, p) in (1usize..10).prop_flat_map(|n| (weights_strategy(n), weights_strategy(n)))
        ) {
            let p: Vec<f64> = p.iter().map(|x| x.max(1e-300)).collect();
            let d = relative_entropy(&q, &p).unwrap();
            prop_assert!(d >= 0.0);
            prop_assert!(relative_entropy(&q, &q).unwrap() < 1e-14);
        }
    }
}
