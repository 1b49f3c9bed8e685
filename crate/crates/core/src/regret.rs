//! Regret bookkeeping, the closed-form regret bounds, and numerical checks
//! of the identities the bounds rest on.

use std::collections::{BTreeMap, VecDeque};

use crate::aggregation::{
    check_weights, exp_weight_update, log_mixture, log_sum_exp, relative_entropy, LossSpec,
};
use crate::error::{check_len, Error, Result};
use crate::longterm::{AuxExpert, UpdateReport};
use crate::pool::{prior_mass, tail_mass};

/// Absolute slack for every bound comparison.
pub const BOUND_SLACK: f64 = 1e-9;

/// `(1/d) Σ_s p_s (h_s - l_s)`.
pub fn discounted_excess(h: &[f64], l: &[f64], p: &[f64]) -> Result<f64> {
    check_len(h.len(), l.len())?;
    check_len(h.len(), p.len())?;
    if h.is_empty() {
        return Err(Error::Domain("empty horizon".into()));
    }
    if let Some(x) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Domain(format!("confidence {x} outside [0, 1]")));
    }
    let total: f64 = h.iter().zip(l).zip(p).map(|((h, l), p)| p * (h - l)).sum();
    Ok(total / h.len() as f64)
}

/// Bound on the cumulative discounted excess loss of the long-term
/// aggregator against any auxiliary expert: `(d/η)(ln N + 2 ln(T-d+1))`.
pub fn excess_loss_bound(n_experts: usize, steps: u64, horizon: usize, eta: f64) -> Result<f64> {
    if n_experts == 0 {
        return Err(Error::Domain("at least one expert is required".into()));
    }
    if steps <= horizon as u64 {
        return Err(Error::Domain(format!("T = {steps} must exceed d = {horizon}")));
    }
    let d = horizon as f64;
    let span = (steps - horizon as u64 + 1) as f64;
    Ok(d / eta * ((n_experts as f64).ln() + 2.0 * span.ln()))
}

/// Bound on the regret of the smoothing regressor: `(2/η) ln T`.
pub fn regret_bound(steps: u64, eta: f64) -> f64 {
    2.0 / eta * (steps as f64).ln()
}

/// `-(1/η) ln Σ wᵢ e^{-η lᵢ}`.
pub fn mixloss(weights: &[f64], losses: &[f64], eta: f64) -> Result<f64> {
    check_len(weights.len(), losses.len())?;
    check_weights(weights)?;
    let exps: Vec<f64> = losses.iter().map(|l| -eta * l).collect();
    Ok(-log_mixture(weights, &exps) / eta)
}

/// Residual of `m = q·l + (1/η)(D(q‖w) - D(q‖wᵘ))`, where `wᵘ` is the
/// exponential update of `w` under `losses`.
pub fn verify_mixloss_identity(q: &[f64], w: &[f64], losses: &[f64], eta: f64) -> Result<f64> {
    check_len(w.len(), q.len())?;
    check_weights(q)?;
    let spec = LossSpec::new(1.0, eta)?;
    let m = mixloss(w, losses, eta)?;
    let updated = exp_weight_update(w, losses, &spec)?;
    let expected: f64 = q.iter().zip(losses).map(|(q, l)| q * l).sum();
    let divergence_drop = relative_entropy(q, w)? - relative_entropy(q, &updated)?;
    Ok((m - expected - divergence_drop / eta).abs())
}

/// Result of the Hölder aggregation check for one scored forecast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderCheck {
    /// `min_s e^{-η h_s} - Σ w e^{-η l̂_s}`.
    pub per_coordinate_slack: f64,
    /// Geometric mean over `s` of the per-coordinate mixtures minus the
    /// mixture of averaged losses (Hölder's inequality itself).
    pub holder_slack: f64,
    /// `e^{-η h} - Σ w e^{-η l̂}` with averaged losses.
    pub chained_slack: f64,
    /// `Σ w e^{-η l̂}` with averaged losses.
    pub averaged_mixture: f64,
    /// `e^{-η h}` with the averaged algorithm loss.
    pub algorithm_term: f64,
    pub passed: bool,
}

/// Checks the per-coordinate inequalities and their Hölder combination.
///
/// `expert_losses` is row-major: expert `i` owns
/// `expert_losses[i*d..(i+1)*d]`, with `d = algorithm_losses.len()`.
pub fn verify_holder_step(
    weights: &[f64],
    expert_losses: &[f64],
    algorithm_losses: &[f64],
    eta: f64,
) -> Result<HolderCheck> {
    let d = algorithm_losses.len();
    if d == 0 {
        return Err(Error::Domain("empty horizon".into()));
    }
    check_len(weights.len() * d, expert_losses.len())?;

    let mut per_coordinate = vec![0.0; d];
    let mut averaged = 0.0;
    for (w, row) in weights.iter().zip(expert_losses.chunks_exact(d)) {
        if *w <= 0.0 {
            continue;
        }
        for (acc, l) in per_coordinate.iter_mut().zip(row) {
            *acc += w * (-eta * l).exp();
        }
        averaged += w * (-eta * row.iter().sum::<f64>() / d as f64).exp();
    }
    let per_coordinate_slack = algorithm_losses
        .iter()
        .zip(&per_coordinate)
        .map(|(h, m)| (-eta * h).exp() - m)
        .fold(f64::INFINITY, f64::min);
    let geometric = (per_coordinate.iter().map(|m| m.ln()).sum::<f64>() / d as f64).exp();
    let h = algorithm_losses.iter().sum::<f64>() / d as f64;
    let holder_slack = geometric - averaged;
    let chained_slack = (-eta * h).exp() - averaged;
    Ok(HolderCheck {
        per_coordinate_slack,
        holder_slack,
        chained_slack,
        averaged_mixture: averaged,
        algorithm_term: (-eta * h).exp(),
        passed: per_coordinate_slack >= -BOUND_SLACK && holder_slack >= -BOUND_SLACK && chained_slack >= -BOUND_SLACK,
    })
}

/// One step as recorded in a [`RegretLedger`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerStep {
    pub t: u64,
    pub algorithm_loss: f64,
    pub mixloss: f64,
    /// Largest cumulative excess over all experts after this step.
    pub peak_excess: f64,
    pub peak_expert: Option<AuxExpert>,
}

/// Worst point of a cumulative-regret-versus-bound comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub t: u64,
    pub expert: Option<AuxExpert>,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub passed: bool,
}

/// Per-step losses and cumulative excess losses of an aggregator run.
#[derive(Debug, Clone, Default)]
pub struct RegretLedger {
    steps: Vec<LedgerStep>,
    cumulative: BTreeMap<AuxExpert, f64>,
    discounted: Option<Vec<Vec<(AuxExpert, f64)>>>,
}

impl RegretLedger {
    /// With `keep_losses`, every expert's per-step loss is retained so the
    /// run can be replayed densely by [`RegretLedger::to_delayed_trace`].
    pub fn new(keep_losses: bool) -> Self {
        Self { steps: Vec::new(), cumulative: BTreeMap::new(), discounted: keep_losses.then(Vec::new) }
    }

    pub fn record(&mut self, report: &UpdateReport) {
        self.record_step(
            report.t,
            report.algorithm_loss,
            report.mixloss,
            report.excess.iter().map(|e| (e.expert, e.discounted_loss, e.excess)),
        );
    }

    /// Records step `t`; `entries` yields `(expert, loss, excess)` for every
    /// expert whose loss differs from the algorithm's.
    pub fn record_step<I>(&mut self, t: u64, algorithm_loss: f64, mixloss: f64, entries: I)
    where
        I: IntoIterator<Item = (AuxExpert, f64, f64)>,
    {
        let mut kept = Vec::new();
        for (expert, loss, excess) in entries {
            *self.cumulative.entry(expert).or_insert(0.0) += excess;
            if self.discounted.is_some() {
                kept.push((expert, loss));
            }
        }
        if let Some(store) = &mut self.discounted {
            store.push(kept);
        }
        let (peak_expert, peak_excess) = self
            .cumulative
            .iter()
            .fold((None, f64::NEG_INFINITY), |(e, best), (k, v)| if *v > best { (Some(*k), *v) } else { (e, best) });
        self.steps.push(LedgerStep {
            t,
            algorithm_loss,
            mixloss,
            peak_excess: if peak_expert.is_some() { peak_excess } else { 0.0 },
            peak_expert,
        });
    }

    pub fn steps(&self) -> &[LedgerStep] {
        &self.steps
    }

    pub fn cumulative_excess(&self, expert: &AuxExpert) -> f64 {
        self.cumulative.get(expert).copied().unwrap_or(0.0)
    }

    pub fn cumulative(&self) -> &BTreeMap<AuxExpert, f64> {
        &self.cumulative
    }

    pub fn algorithm_loss(&self) -> f64 {
        self.steps.iter().map(|s| s.algorithm_loss).sum()
    }

    /// Compares the running peak excess with `bound(t)` at every step where
    /// the bound is defined, returning the smallest slack.
    pub fn check_against<F>(&self, bound: F) -> BoundCheck
    where
        F: Fn(u64) -> Option<f64>,
    {
        let mut worst = BoundCheck { t: 0, expert: None, lhs: 0.0, rhs: 0.0, slack: f64::INFINITY, passed: true };
        for step in &self.steps {
            let Some(rhs) = bound(step.t) else { continue };
            let slack = rhs - step.peak_excess;
            if slack < worst.slack {
                worst = BoundCheck {
                    t: step.t,
                    expert: step.peak_expert,
                    lhs: step.peak_excess,
                    rhs,
                    slack,
                    passed: slack >= -BOUND_SLACK,
                };
            }
        }
        worst
    }

    /// Dense replay over the finite family `{(n, τ): τ ≤ T}` plus one tail
    /// expert holding the prior mass of every later birth.
    pub fn to_delayed_trace(&self, n_experts: usize, horizon: usize, eta: f64) -> Result<DelayedTrace> {
        let store = self
            .discounted
            .as_ref()
            .ok_or_else(|| Error::State("ledger was created without per-expert losses".into()))?;
        let steps = self.steps.len() as u64;
        let index = |e: &AuxExpert| (e.issued_at as usize - 1) * n_experts + e.expert;
        let mut labels: Vec<Option<AuxExpert>> = (1..=steps)
            .flat_map(|tau| (0..n_experts).map(move |n| Some(AuxExpert { expert: n, issued_at: tau })))
            .collect();
        labels.push(None);
        let mut prior: Vec<f64> = (1..=steps)
            .flat_map(|tau| std::iter::repeat_n(prior_mass(tau) / n_experts as f64, n_experts))
            .collect();
        prior.push(tail_mass(steps));

        let mut losses = Vec::with_capacity(self.steps.len());
        for (step, recorded) in self.steps.iter().zip(store) {
            let mut row = vec![step.algorithm_loss; labels.len()];
            for (expert, loss) in recorded {
                if expert.issued_at > steps || expert.expert >= n_experts {
                    return Err(Error::State(format!("expert {expert} outside the replay family")));
                }
                row[index(expert)] = *loss;
            }
            losses.push(row);
        }
        Ok(DelayedTrace {
            horizon,
            eta,
            labels,
            prior,
            algorithm_losses: self.steps.iter().map(|s| s.algorithm_loss).collect(),
            losses,
        })
    }
}

/// A finite-expert run under the `d`-delayed schedule `w_{t+d} = wᵘ_t`,
/// with losses zero for `t ≤ d`.
#[derive(Debug, Clone)]
pub struct DelayedTrace {
    pub horizon: usize,
    pub eta: f64,
    /// `None` marks a pseudo-expert standing for a tail of the family.
    pub labels: Vec<Option<AuxExpert>>,
    pub prior: Vec<f64>,
    pub algorithm_losses: Vec<f64>,
    /// `losses[t-1][i]`.
    pub losses: Vec<Vec<f64>>,
}

impl DelayedTrace {
    /// A trace with unlabeled experts.
    pub fn new(horizon: usize, eta: f64, prior: Vec<f64>, algorithm_losses: Vec<f64>, losses: Vec<Vec<f64>>) -> Result<Self> {
        check_weights(&prior)?;
        check_len(algorithm_losses.len(), losses.len())?;
        for row in &losses {
            check_len(prior.len(), row.len())?;
        }
        Ok(Self { horizon, eta, labels: vec![None; prior.len()], prior, algorithm_losses, losses })
    }

    pub fn n_experts(&self) -> usize {
        self.prior.len()
    }

    pub fn steps(&self) -> usize {
        self.losses.len()
    }

    /// Replays the weights and calls `visit(t, log w_t, log wᵘ_t, m_t)`.
    fn replay<F>(&self, mut visit: F) -> Result<()>
    where
        F: FnMut(usize, &[f64], &[f64], f64),
    {
        let d = self.horizon;
        let eta = self.eta;
        let prior_log: Vec<f64> = self.prior.iter().map(|w| if *w > 0.0 { w.ln() } else { f64::NEG_INFINITY }).collect();
        let mut pending: VecDeque<Vec<f64>> = VecDeque::with_capacity(d + 1);
        for (i, row) in self.losses.iter().enumerate() {
            let t = i + 1;
            let current = if t <= d { prior_log.clone() } else { pending.pop_front().expect("d-delayed weights") };
            if t <= d && row.iter().any(|l| *l != 0.0) {
                return Err(Error::Domain(format!("losses at t = {t} ≤ d must be zero")));
            }
            let shifted: Vec<f64> = current.iter().zip(row).map(|(w, l)| w - eta * l).collect();
            let log_z = log_sum_exp(shifted.iter().copied());
            let updated: Vec<f64> = shifted.iter().map(|x| x - log_z).collect();
            visit(t, &current, &updated, -log_z / eta);
            pending.push_back(updated);
        }
        Ok(())
    }

    /// Mixloss `m_t` at every step.
    pub fn mixlosses(&self) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.steps());
        self.replay(|_, _, _, m| out.push(m))?;
        Ok(out)
    }
}

/// Outcome of the cumulative mixloss bound for one comparison vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparatorReport {
    /// `Σ m_t - Σ q·l_t`.
    pub lhs: f64,
    /// `(d/η) max_{i ∈ supp q, t ≤ d} ln(1/wᵘ_{i,t})`.
    pub rhs: f64,
    /// `Σ h_t - Σ q·l_t`, the algorithm's own regret.
    pub algorithm_regret: f64,
    /// Worst `|m_t - q·l_t - (D(q‖w_t) - D(q‖wᵘ_t))/η|`.
    pub identity_residual: f64,
    /// Mismatch between the summed divergence drops and their telescoped
    /// form (head minus tail).
    pub telescoping_residual: f64,
    pub passed: bool,
}

fn divergence_log(q: &[f64], log_p: &[f64]) -> f64 {
    q.iter()
        .zip(log_p)
        .filter(|(q, _)| **q > 0.0)
        .map(|(q, lp)| q * (q.ln() - lp))
        .sum()
}

/// Cumulative mixloss bound for one comparison distribution `q`.
pub fn verify_comparator_bound(trace: &DelayedTrace, q: &[f64]) -> Result<ComparatorReport> {
    check_len(trace.n_experts(), q.len())?;
    check_weights(q)?;
    if let Some(i) = q.iter().zip(&trace.prior).position(|(q, p)| *q > 0.0 && *p <= 0.0) {
        return Err(Error::InfiniteDivergence { index: i });
    }
    let d = trace.horizon;
    let steps = trace.steps();
    let eta = trace.eta;
    let mut sum_m = 0.0;
    let mut sum_q = 0.0;
    let mut sum_h = 0.0;
    let mut identity_residual: f64 = 0.0;
    let mut drops = 0.0;
    let mut head = 0.0;
    let mut tail = 0.0;
    let mut worst_log = f64::NEG_INFINITY;
    trace.replay(|t, current, updated, m| {
        let row = &trace.losses[t - 1];
        let ql: f64 = q.iter().zip(row).map(|(q, l)| q * l).sum();
        sum_m += m;
        sum_q += ql;
        sum_h += trace.algorithm_losses[t - 1];
        let d_updated = divergence_log(q, updated);
        if t <= d {
            head += d_updated;
            for (qi, lw) in q.iter().zip(updated) {
                if *qi > 0.0 {
                    worst_log = worst_log.max(-lw);
                }
            }
        } else {
            let drop = divergence_log(q, current) - d_updated;
            drops += drop;
            identity_residual = identity_residual.max((m - ql - drop / eta).abs());
        }
        if t + d > steps {
            tail += d_updated;
        }
    })?;
    let lhs = sum_m - sum_q;
    let rhs = d as f64 / eta * worst_log;
    let telescoping_residual = (drops - (head - tail)).abs();
    Ok(ComparatorReport {
        lhs,
        rhs,
        algorithm_regret: sum_h - sum_q,
        identity_residual,
        telescoping_residual,
        passed: lhs <= rhs + BOUND_SLACK && telescoping_residual <= BOUND_SLACK && identity_residual <= 1e-10,
    })
}

/// [`verify_comparator_bound`] for every unit comparison vector in one replay.
pub fn verify_comparator_bound_units(trace: &DelayedTrace) -> Result<Vec<ComparatorReport>> {
    let m_experts = trace.n_experts();
    let d = trace.horizon;
    let steps = trace.steps();
    let eta = trace.eta;
    let mut sum_m = 0.0;
    let mut sum_h = 0.0;
    let mut sum_l = vec![0.0; m_experts];
    let mut residual = vec![0.0f64; m_experts];
    let mut drops = vec![0.0; m_experts];
    let mut head = vec![0.0; m_experts];
    let mut tail = vec![0.0; m_experts];
    let mut worst_log = vec![f64::NEG_INFINITY; m_experts];
    trace.replay(|t, current, updated, m| {
        let row = &trace.losses[t - 1];
        sum_m += m;
        sum_h += trace.algorithm_losses[t - 1];
        for i in 0..m_experts {
            sum_l[i] += row[i];
            // D(e_i‖w) = -ln w_i
            let d_updated = -updated[i];
            if t <= d {
                head[i] += d_updated;
                worst_log[i] = worst_log[i].max(d_updated);
            } else {
                let drop = -current[i] - d_updated;
                drops[i] += drop;
                residual[i] = residual[i].max((m - row[i] - drop / eta).abs());
            }
            if t + d > steps {
                tail[i] += d_updated;
            }
        }
    })?;
    Ok((0..m_experts)
        .map(|i| {
            let lhs = sum_m - sum_l[i];
            let rhs = d as f64 / eta * worst_log[i];
            let telescoping_residual = (drops[i] - (head[i] - tail[i])).abs();
            // Divergences of order ln(1/w) with tiny weights make the
            // telescoped sums large; compare relative to their scale.
            let scale = 1.0 + head[i].abs().max(tail[i].abs());
            ComparatorReport {
                lhs,
                rhs,
                algorithm_regret: sum_h - sum_l[i],
                identity_residual: residual[i],
                telescoping_residual,
                passed: lhs <= rhs + BOUND_SLACK
                    && telescoping_residual <= BOUND_SLACK * scale
                    && residual[i] <= 1e-10 * scale,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn discounted_excess_examples() {
        assert_eq!(discounted_excess(&[1.0, 2.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(discounted_excess(&[0.3, 0.4], &[0.3, 0.4], &[1.0, 1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            discounted_excess(&[1.0, 1.0], &[0.0, 0.0], &[1.0, 0.5]).unwrap(),
            0.75,
            epsilon = 1e-15
        );
        assert!(discounted_excess(&[1.0], &[0.0, 0.0], &[1.0]).is_err());
        assert!(discounted_excess(&[1.0], &[0.0], &[1.5]).is_err());
    }

    #[test]
    fn excess_loss_bound_examples() {
        for d in 1..5usize {
            assert_abs_diff_eq!(
                excess_loss_bound(1, d as u64 + 1, d, 0.5).unwrap(),
                d as f64 / 0.5 * 2.0 * 2f64.ln(),
                epsilon = 1e-12
            );
        }
        // mpmath: 102.27308671603782
        assert_abs_diff_eq!(excess_loss_bound(3, 100, 5, 0.5).unwrap(), 102.273_086_716_037_82, epsilon = 1e-10);
        // mpmath: 32.025470270600987
        assert_abs_diff_eq!(excess_loss_bound(1, 3000, 1, 0.5).unwrap(), 32.025_470_270_600_99, epsilon = 1e-10);
        assert!(excess_loss_bound(1, 5, 5, 0.5).is_err());
    }

    #[test]
    fn regret_bound_examples() {
        assert_abs_diff_eq!(regret_bound(3000, 0.5), 32.025_470_270_600_99, epsilon = 1e-10);
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(2.0 / 2.0 * e.ln(), 1.0, epsilon = 1e-15);
        let mut prev = regret_bound(2, 0.5);
        for t in 3..200 {
            let b = regret_bound(t, 0.5);
            assert!(b > prev);
            assert!(regret_bound(t, 0.25) > b);
            prev = b;
        }
    }

    #[test]
    fn bounds_are_monotone() {
        for t in 12..100u64 {
            assert!(excess_loss_bound(3, t + 1, 5, 0.5).unwrap() > excess_loss_bound(3, t, 5, 0.5).unwrap());
            assert!(excess_loss_bound(3, t, 5, 0.25).unwrap() > excess_loss_bound(3, t, 5, 0.5).unwrap());
        }
    }

    #[test]
    fn mixloss_examples() {
        assert_abs_diff_eq!(mixloss(&[0.2, 0.8], &[0.7, 0.7], 0.5).unwrap(), 0.7, epsilon = 1e-15);
        // mpmath: 0.57536414490356185
        assert_abs_diff_eq!(
            mixloss(&[0.5, 0.5], &[0.0, 2f64.ln() / 0.5], 0.5).unwrap(),
            0.575_364_144_903_561_9,
            epsilon = 1e-15
        );
        let m = mixloss(&[0.3, 0.3, 0.4], &[0.1, 2.0, 3.0], 0.5).unwrap();
        assert!(m >= 0.1);
    }

    #[test]
    fn mixloss_identity_examples() {
        let w = [0.2, 0.5, 0.3];
        let l = [0.4, 1.7, 0.0];
        let spec = LossSpec::new(1.0, 0.5).unwrap();
        let wu = exp_weight_update(&w, &l, &spec).unwrap();
        assert!(verify_mixloss_identity(&wu, &w, &l, 0.5).unwrap() < 1e-10);
        for i in 0..3 {
            let mut q = [0.0; 3];
            q[i] = 1.0;
            assert!(verify_mixloss_identity(&q, &w, &l, 0.5).unwrap() < 1e-10);
        }
        assert!(matches!(
            verify_mixloss_identity(&[0.5, 0.5, 0.0], &[1.0, 0.0, 0.0], &l, 0.5),
            Err(Error::InfiniteDivergence { .. })
        ));
    }

    #[test]
    fn holder_step_reduces_to_single_coordinate() {
        let check = verify_holder_step(&[0.5, 0.5], &[0.2, 0.6], &[0.3], 0.5).unwrap();
        assert_abs_diff_eq!(check.per_coordinate_slack, check.chained_slack, epsilon = 1e-15);
        assert_abs_diff_eq!(check.holder_slack, 0.0, epsilon = 1e-15);
        // identical experts: equality in Hölder
        let check = verify_holder_step(&[0.4, 0.6], &[0.1, 0.9, 0.1, 0.9], &[0.5, 0.5], 0.5).unwrap();
        assert!(check.holder_slack >= 0.0);
        let check = verify_holder_step(&[1.0], &[0.1, 0.9], &[0.1, 0.9], 0.5).unwrap();
        assert_abs_diff_eq!(check.holder_slack, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(check.chained_slack, 0.0, epsilon = 1e-15);
        assert!(check.passed);
    }

    #[test]
    fn comparator_classic_case() {
        // d = 1, uniform prior over 4 experts: the bound is (1/η) ln 4.
        let eta = 0.5;
        let losses: Vec<Vec<f64>> = (0..30)
            .map(|t| {
                if t == 0 {
                    vec![0.0; 4]
                } else {
                    (0..4).map(|i| ((t * 7 + i * 3) % 5) as f64 * 0.8).collect()
                }
            })
            .collect();
        let algo = vec![0.0; 30];
        let trace = DelayedTrace::new(1, eta, vec![0.25; 4], algo, losses).unwrap();
        for i in 0..4 {
            let q = WeightUnit::of(4, i);
            let r = verify_comparator_bound(&trace, &q).unwrap();
            assert_abs_diff_eq!(r.rhs, 4f64.ln() / eta, epsilon = 1e-12);
            assert!(r.passed, "{r:?}");
        }
        let units = verify_comparator_bound_units(&trace).unwrap();
        for (i, u) in units.iter().enumerate() {
            let single = verify_comparator_bound(&trace, &WeightUnit::of(4, i)).unwrap();
            assert_abs_diff_eq!(u.lhs, single.lhs, epsilon = 1e-10);
            assert!(u.passed);
        }
    }

    #[test]
    fn comparator_zero_losses() {
        let trace = DelayedTrace::new(2, 0.5, vec![0.5, 0.5], vec![0.0; 5], vec![vec![0.0, 0.0]; 5]).unwrap();
        let r = verify_comparator_bound(&trace, &[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(r.lhs, 0.0, epsilon = 1e-15);
        assert!(r.passed);
    }

    #[test]
    fn nonzero_early_losses_are_rejected() {
        let trace = DelayedTrace::new(2, 0.5, vec![0.5, 0.5], vec![0.0; 3], vec![vec![1.0, 0.0]; 3]).unwrap();
        assert!(verify_comparator_bound(&trace, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn ledger_peaks_and_bound_check() {
        let mut ledger = RegretLedger::new(true);
        let a = AuxExpert { expert: 0, issued_at: 1 };
        let b = AuxExpert { expert: 1, issued_at: 1 };
        ledger.record_step(1, 0.0, 0.0, []);
        ledger.record_step(2, 1.0, 0.9, [(a, 0.5, 0.5), (b, 1.5, -0.5)]);
        ledger.record_step(3, 1.0, 0.9, [(a, 0.2, 0.8), (b, 0.0, 1.0)]);
        assert_eq!(ledger.cumulative_excess(&a), 1.3);
        assert_eq!(ledger.steps()[2].peak_expert, Some(a));
        let check = ledger.check_against(|t| (t >= 2).then_some(1.0));
        assert!(!check.passed);
        assert_eq!(check.t, 3);
        let trace = ledger.to_delayed_trace(2, 1, 0.5).unwrap();
        assert_eq!(trace.n_experts(), 7);
        assert_eq!(trace.losses[1][1], 1.5);
        assert_eq!(trace.losses[1][2], 1.0);
    }

    struct WeightUnit;
    impl WeightUnit {
        fn of(n: usize, i: usize) -> Vec<f64> {
            let mut q = vec![0.0; n];
            q[i] = 1.0;
            q
        }
    }
}
