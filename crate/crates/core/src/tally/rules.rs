use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::format::{BallotChoice, BallotFormat, BallotKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Plurality,
    Approval,
    Borda,
    NumericMean,
    NumericSum,
}

impl Rule {
    pub fn default_for(kind: BallotKind) -> Rule {
        match kind {
            BallotKind::SingleChoice => Rule::Plurality,
            BallotKind::Approval => Rule::Approval,
            BallotKind::Ranked => Rule::Borda,
            BallotKind::Numeric => Rule::NumericMean,
        }
    }

    pub fn accepts(&self, kind: BallotKind) -> bool {
        matches!(
            (self, kind),
            (Rule::Plurality, BallotKind::SingleChoice)
                | (Rule::Approval, BallotKind::Approval)
                | (Rule::Borda, BallotKind::Ranked)
                | (Rule::NumericMean | Rule::NumericSum, BallotKind::Numeric)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("rule {rule:?} cannot tally {kind:?} ballots")]
    FormatMismatch { rule: Rule, kind: BallotKind },
    #[error("ballot does not conform to the session format: {0}")]
    BadBallot(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionScore {
    pub option: String,
    pub score: i64,
}

/// Exact numeric aggregate; the mean is kept as `sum / count`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NumericAggregate {
    pub count: u64,
    pub sum: i128,
    /// Mean rounded half away from zero to two decimals, absent for no ballots.
    pub mean: Option<String>,
}

impl NumericAggregate {
    fn new(values: impl Iterator<Item = i64>) -> Self {
        let (count, sum) = values.fold((0u64, 0i128), |(c, s), v| (c + 1, s + i128::from(v)));
        NumericAggregate { count, sum, mean: (count > 0).then(|| render_mean(sum, count)) }
    }

    pub fn mean_value(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum as f64 / self.count as f64)
    }
}

fn render_mean(sum: i128, count: u64) -> String {
    let count = i128::from(count);
    let scaled = sum * 100;
    let mut hundredths = scaled.abs() / count;
    if (scaled.abs() % count) * 2 >= count {
        hundredths += 1;
    }
    let sign = if sum < 0 && hundredths != 0 { "-" } else { "" };
    format!("{sign}{}.{:02}", hundredths / 100, hundredths % 100)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleOutcome {
    pub rule: Rule,
    /// Per-option totals for option-based rules, in option order.
    pub scores: Vec<OptionScore>,
    pub numeric: Option<NumericAggregate>,
    /// Every option sharing the top score; ties are never broken.
    pub winners: Vec<String>,
}

/// Applies `rule` to valid decoded ballots of `format`.
pub fn apply_rule(
    rule: Rule,
    format: &BallotFormat,
    ballots: &[BallotChoice],
) -> Result<RuleOutcome, RuleError> {
    if !rule.accepts(format.kind) {
        return Err(RuleError::FormatMismatch { rule, kind: format.kind });
    }
    for ballot in ballots {
        format.check(ballot).map_err(|e| RuleError::BadBallot(e.to_string()))?;
    }

    if matches!(rule, Rule::NumericMean | Rule::NumericSum) {
        let numeric = NumericAggregate::new(ballots.iter().map(|b| match b {
            BallotChoice::Numeric(v) => *v,
            _ => unreachable!("checked against a numeric format"),
        }));
        let numeric = match rule {
            Rule::NumericSum => NumericAggregate { mean: None, ..numeric },
            _ => numeric,
        };
        return Ok(RuleOutcome { rule, scores: Vec::new(), numeric: Some(numeric), winners: Vec::new() });
    }

    let m = format.options.len();
    let mut totals = vec![0i64; m];
    for ballot in ballots {
        match ballot {
            BallotChoice::SingleChoice(idx) => totals[*idx as usize] += 1,
            BallotChoice::Approval(indices) => {
                for idx in indices {
                    totals[*idx as usize] += 1;
                }
            }
            BallotChoice::Ranked(order) => {
                for (position, idx) in order.iter().enumerate() {
                    totals[*idx as usize] += (m - 1 - position) as i64;
                }
            }
            BallotChoice::Numeric(_) => unreachable!("checked against an option format"),
        }
    }

    let top = totals.iter().copied().max().unwrap_or(0);
    let winners = if ballots.is_empty() {
        Vec::new()
    } else {
        format
            .options
            .iter()
            .zip(&totals)
            .filter(|(_, &score)| score == top)
            .map(|(label, _)| label.clone())
            .collect()
    };
    let scores = format
        .options
        .iter()
        .zip(totals)
        .map(|(option, score)| OptionScore { option: option.clone(), score })
        .collect();
    Ok(RuleOutcome { rule, scores, numeric: None, winners })
}
