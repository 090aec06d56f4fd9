use serde::{Deserialize, Serialize};

use super::SimError;

/// Logistic weights over the four opt-in factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub reward: f64,
    pub goodwill: f64,
    pub obligation: f64,
    /// Weight of the perceived risk of losing the deposit.
    pub deposit: f64,
}

impl Weights {
    /// Survey-fitted coefficients: goodwill 0.88, reward 0.35, obligation -0.1174,
    /// deposit (penalty) -0.3463.
    pub const SURVEY: Weights =
        Weights { reward: 0.35, goodwill: 0.88, obligation: -0.1174, deposit: -0.3463 };
}

impl Default for Weights {
    fn default() -> Self {
        Weights::SURVEY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OptInModel {
    pub weights: Weights,
    pub intercept: f64,
}

/// Factor scores in `[0, 1]` plus the chance of releasing `sk` on time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoterProfile {
    pub reward: f64,
    pub goodwill: f64,
    pub obligation: f64,
    pub deposit: f64,
    pub release_reliability: f64,
}

impl VoterProfile {
    pub fn new(reward: f64, goodwill: f64, obligation: f64, deposit: f64) -> Self {
        VoterProfile { reward, goodwill, obligation, deposit, release_reliability: 1.0 }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fields = [
            ("reward", self.reward),
            ("goodwill", self.goodwill),
            ("obligation", self.obligation),
            ("deposit", self.deposit),
            ("release_reliability", self.release_reliability),
        ];
        for (name, v) in fields {
            if !(0.0..=1.0).contains(&v) {
                return Err(SimError::Config(format!("profile {name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl OptInModel {
    pub fn new(weights: Weights, intercept: f64) -> Self {
        OptInModel { weights, intercept }
    }

    pub fn utility(&self, p: &VoterProfile) -> f64 {
        let w = &self.weights;
        self.intercept
            + w.reward * p.reward
            + w.goodwill * p.goodwill
            + w.obligation * p.obligation
            + w.deposit * p.deposit
    }

    /// `sigmoid(intercept + sum_f w_f * score_f)`.
    pub fn probability(&self, p: &VoterProfile) -> f64 {
        sigmoid(self.utility(p))
    }
}

/// Validated opt-in probability.
pub fn opt_in_probability(model: &OptInModel, profile: &VoterProfile) -> Result<f64, SimError> {
    profile.validate()?;
    Ok(model.probability(profile))
}
