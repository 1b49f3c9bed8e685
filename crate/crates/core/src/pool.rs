//! Lazy weights for an infinite family of experts indexed by birth time.
//!
//! Experts born at time τ share the prior mass `ν(τ) = 1/(τ(τ+1))`, split
//! evenly across `per_birth` copies. Only born experts carry an explicit
//! weight. Everything not yet born lives in a single reservoir scalar: all
//! of its members are always charged the same loss, so their relative
//! proportions stay those of the prior and a newborn's share is known in
//! closed form. Retired experts (no future influence on forecasts, charged
//! the same shared loss forever) are folded into a second scalar.

use crate::aggregation::normalize_log_weights;

/// `ν(τ) = 1/(τ(τ+1))`.
pub fn prior_mass(tau: u64) -> f64 {
    assert!(tau >= 1, "birth times start at 1");
    let t = tau as f64;
    1.0 / (t * (t + 1.0))
}

/// `Σ_{τ>t} ν(τ) = 1/(t+1)`.
pub fn tail_mass(t: u64) -> f64 {
    1.0 / (t as f64 + 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LazyWeights {
    per_birth: usize,
    alive: Vec<f64>,
    reservoir: f64,
    retired: f64,
    born_through: u64,
}

impl LazyWeights {
    pub fn new(per_birth: usize) -> Self {
        assert!(per_birth >= 1);
        Self { per_birth, alive: Vec::new(), reservoir: 1.0, retired: 0.0, born_through: 0 }
    }

    /// Realizes the `per_birth` experts born at `tau`, appending their
    /// weights. Returns the weight granted to each.
    pub fn birth(&mut self, tau: u64) -> f64 {
        assert_eq!(tau, self.born_through + 1, "births must be consecutive");
        // The reservoir holds every τ' ≥ tau, whose prior mass totals 1/tau.
        let share = prior_mass(tau) / self.per_birth as f64 / tail_mass(tau - 1);
        let grant = self.reservoir * share;
        self.alive.extend(std::iter::repeat_n(grant, self.per_birth));
        self.reservoir -= grant * self.per_birth as f64;
        if self.reservoir < 0.0 {
            self.reservoir = 0.0;
        }
        self.born_through = tau;
        grant
    }

    /// Exponential update: alive expert `i` suffers `losses[i]`, the
    /// reservoir and retired mass suffer `shared_loss`. Returns the mixloss
    /// `-(1/η) ln Σ w e^{-η l}` over the whole family.
    pub fn update(&mut self, losses: &[f64], shared_loss: f64, eta: f64) -> f64 {
        assert_eq!(losses.len(), self.alive.len());
        let lump = |m: f64| if m > 0.0 { m.ln() - eta * shared_loss } else { f64::NEG_INFINITY };
        let mut logs: Vec<f64> = self
            .alive
            .iter()
            .zip(losses)
            .map(|(w, l)| if *w > 0.0 { w.ln() - eta * l } else { f64::NEG_INFINITY })
            .collect();
        logs.push(lump(self.reservoir));
        logs.push(lump(self.retired));

        let mixture = crate::aggregation::log_sum_exp(logs.iter().copied());
        let mut normalized = normalize_log_weights(&logs);
        self.retired = normalized.pop().unwrap_or(0.0);
        self.reservoir = normalized.pop().unwrap_or(0.0);
        self.alive = normalized;
        -mixture / eta
    }

    /// Keeps alive experts where `keep` is true; the rest move to the
    /// retired mass.
    pub fn retain(&mut self, keep: &[bool]) {
        assert_eq!(keep.len(), self.alive.len());
        let mut it = keep.iter();
        let mut dropped = 0.0;
        self.alive.retain(|w| {
            let k = *it.next().unwrap();
            if !k {
                dropped += w;
            }
            k
        });
        self.retired += dropped;
    }

    #[cfg(test)]
    pub(crate) fn from_parts(per_birth: usize, alive: Vec<f64>, reservoir: f64, retired: f64, born_through: u64) -> Self {
        Self { per_birth, alive, reservoir, retired, born_through }
    }

    pub fn alive(&self) -> &[f64] {
        &self.alive
    }

    pub fn reservoir(&self) -> f64 {
        self.reservoir
    }

    pub fn retired(&self) -> f64 {
        self.retired
    }

    pub fn born_through(&self) -> u64 {
        self.born_through
    }

    pub fn total(&self) -> f64 {
        self.alive.iter().sum::<f64>() + self.reservoir + self.retired
    }
}
