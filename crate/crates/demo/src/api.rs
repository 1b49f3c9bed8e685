use longcast::aggregation::{superprediction, verify_substitution, square_loss};
use longcast::harness::{run_figure1, run_longterm, Figure1Config, LongtermRunConfig, SeriesKind};
use longcast::regret::{excess_loss_bound, regret_bound};
use longcast::{LossSpec, Result, SubstitutionRule};
use serde_json::{json, Value};

const GRID: usize = 201;
/// Upper bound on plotted points per series.
const MAX_POINTS: usize = 600;

fn stride(len: usize) -> usize {
    len.div_ceil(MAX_POINTS).max(1)
}

/// Samples `g(y)` and `λ(y, γ)` on a grid over `[-1, 1]`.
pub fn substitution_curve(forecasts: &[f64], weights: &[f64], eta: f64, rule: &str) -> Result<Value> {
    let rule: SubstitutionRule = rule.parse()?;
    let spec = LossSpec::new(1.0, eta)?;
    let total: f64 = weights.iter().sum();
    let weights: Vec<f64> = if total > 0.0 { weights.iter().map(|w| w / total).collect() } else { weights.to_vec() };
    let gamma = rule.apply(forecasts, &weights, &spec)?;
    let mut ys = Vec::with_capacity(GRID);
    let mut g = Vec::with_capacity(GRID);
    let mut loss = Vec::with_capacity(GRID);
    for i in 0..GRID {
        let y = -1.0 + 2.0 * i as f64 / (GRID - 1) as f64;
        ys.push(y);
        g.push(superprediction(y, forecasts, &weights, &spec)?);
        loss.push(square_loss(y, gamma));
    }
    let check = verify_substitution(gamma, forecasts, &weights, &spec, GRID);
    Ok(json!({
        "gamma": gamma,
        "admissible_eta": rule.max_eta(1.0),
        "ys": ys,
        "g": g,
        "loss": loss,
        "worst_violation": check.worst_violation,
        "passed": check.passed,
    }))
}

pub fn regression_traces(seed: u64, steps: usize, window: usize, segments: usize) -> Result<Value> {
    let mut config = Figure1Config::default();
    config.dataset.seed = seed;
    config.dataset.steps = steps;
    config.dataset.segments = segments;
    config.run.window = window;
    let result = run_figure1(&config)?;
    let step = stride(result.rows.len());
    let rows: Vec<_> = result.rows.iter().step_by(step).collect();
    let traces: Vec<Vec<Option<f64>>> =
        (0..result.taus.len()).map(|i| rows.iter().map(|r| r.regrets[i]).collect()).collect();
    Ok(json!({
        "taus": result.taus,
        "t": rows.iter().map(|r| r.t).collect::<Vec<_>>(),
        "bound": rows.iter().map(|r| r.bound).collect::<Vec<_>>(),
        "baseline": rows.iter().map(|r| r.baseline_regret).collect::<Vec<_>>(),
        "traces": traces,
        "loss": result.algorithm_loss,
        "baseline_loss": result.baseline_loss,
        "below_bound": result.regret_check.passed && result.traces_below_bound(),
        "final_bound": regret_bound(steps as u64, config.run.eta.unwrap_or(0.5)),
    }))
}

pub fn longterm_run(n_experts: usize, horizon: usize, steps: usize, seed: u64, adversarial: bool) -> Result<Value> {
    let config = LongtermRunConfig {
        n_experts,
        horizon,
        steps,
        seed,
        series: if adversarial { SeriesKind::Adversarial } else { SeriesKind::Synthetic },
        check_mixability: false,
        keep_losses: false,
        ..LongtermRunConfig::default()
    };
    let run = run_longterm(&config)?;
    let step = stride(steps);
    let ledger = run.ledger.steps();
    let mut t = Vec::new();
    let mut excess = Vec::new();
    let mut bound = Vec::new();
    let mut outcome = Vec::new();
    let mut forecast = Vec::new();
    for s in ledger.iter().step_by(step) {
        let i = s.t as usize - 1;
        t.push(s.t);
        excess.push(s.peak_excess);
        bound.push(excess_loss_bound(n_experts, s.t, horizon, run.eta).ok());
        outcome.push(run.outcomes[i]);
        // Forecast made `d` steps earlier for this time.
        forecast.push(i.checked_sub(horizon).map(|j| run.forecasts[j][horizon - 1]));
    }
    let check = run.excess_check();
    Ok(json!({
        "t": t,
        "excess": excess,
        "bound": bound,
        "outcome": outcome,
        "forecast": forecast,
        "loss": run.ledger.algorithm_loss(),
        "eta": run.eta,
        "passed": check.passed,
    }))
}
