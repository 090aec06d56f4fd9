//! Seeded election scenarios. Every voter consumes the same fixed sequence of
//! uniforms regardless of configuration, so runs sharing a seed are coupled
//! across incentive and threshold settings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::election::Election;
use super::model::{OptInModel, VoterProfile};
use super::SimError;
use crate::format::{BallotChoice, BallotFormat};
use crate::ledger::{LedgerError, SessionConfig, ThresholdPolicy, Window};
use crate::tally::{apply_rule, decrypt_ballots, tally_ledger, Rule, RuleResult, TallyError};

/// Inclusive range a factor score is drawn from uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRange {
    pub lo: f64,
    pub hi: f64,
}

impl ScoreRange {
    pub const UNIT: ScoreRange = ScoreRange { lo: 0.0, hi: 1.0 };

    fn at(&self, u: f64) -> f64 {
        self.lo + u * (self.hi - self.lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileDistribution {
    pub reward: ScoreRange,
    pub goodwill: ScoreRange,
    pub obligation: ScoreRange,
    pub deposit: ScoreRange,
    pub release_reliability: f64,
}

impl Default for ProfileDistribution {
    fn default() -> Self {
        ProfileDistribution {
            reward: ScoreRange::UNIT,
            goodwill: ScoreRange::UNIT,
            obligation: ScoreRange::UNIT,
            deposit: ScoreRange::UNIT,
            release_reliability: 1.0,
        }
    }
}

impl ProfileDistribution {
    fn ranges(&self) -> [(&'static str, ScoreRange); 4] {
        [
            ("reward", self.reward),
            ("goodwill", self.goodwill),
            ("obligation", self.obligation),
            ("deposit", self.deposit),
        ]
    }

    fn validate(&self) -> Result<(), SimError> {
        for (name, r) in self.ranges() {
            if !(0.0 <= r.lo && r.lo <= r.hi && r.hi <= 1.0) {
                return Err(SimError::Config(format!("{name} range must satisfy 0 <= lo <= hi <= 1")));
            }
        }
        if !(0.0..=1.0).contains(&self.release_reliability) {
            return Err(SimError::Config("release_reliability outside [0, 1]".into()));
        }
        Ok(())
    }

    /// Profile for raw uniforms `u` (reward, goodwill, obligation, deposit).
    fn profile(&self, u: [f64; 4]) -> VoterProfile {
        VoterProfile {
            reward: self.reward.at(u[0]),
            goodwill: self.goodwill.at(u[1]),
            obligation: self.obligation.at(u[2]),
            deposit: self.deposit.at(u[3]),
            release_reliability: self.release_reliability,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub population: usize,
    pub model: OptInModel,
    pub profiles: ProfileDistribution,
    pub threshold_policy: ThresholdPolicy,
    /// Tokens each holder escrows.
    pub deposit: u64,
    /// Tokens paid per valid release.
    pub reward: u64,
    /// Token amount at which an incentive reaches half its full effect.
    pub incentive_half_saturation: f64,
    /// Options of the synthetic single-choice ballot.
    pub options: Vec<String>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            population: 40,
            model: OptInModel::default(),
            profiles: ProfileDistribution::default(),
            threshold_policy: ThresholdPolicy::default(),
            deposit: 10,
            reward: 10,
            incentive_half_saturation: 10.0,
            options: vec!["yes".into(), "no".into()],
        }
    }
}

fn saturation(amount: u64, half: f64) -> f64 {
    let x = amount as f64;
    x / (x + half)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.population == 0 {
            return Err(SimError::Config("population must be >= 1".into()));
        }
        self.profiles.validate()?;
        if !(self.incentive_half_saturation > 0.0 && self.incentive_half_saturation.is_finite()) {
            return Err(SimError::Config("incentive_half_saturation must be positive".into()));
        }
        let w = self.model.weights;
        if ![w.reward, w.goodwill, w.obligation, w.deposit, self.model.intercept]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(SimError::Config("model weights must be finite".into()));
        }
        self.session_config(0, 0).validate().map_err(SimError::Ledger)
    }

    /// Scales the reward and deposit scores by how strongly the configured
    /// token amounts are felt; the remaining scores pass through.
    pub fn effective_profile(&self, p: &VoterProfile) -> VoterProfile {
        VoterProfile {
            reward: p.reward * saturation(self.reward, self.incentive_half_saturation),
            deposit: p.deposit * saturation(self.deposit, self.incentive_half_saturation),
            ..*p
        }
    }

    pub fn opt_in_probability(&self, p: &VoterProfile) -> f64 {
        self.model.probability(&self.effective_profile(p))
    }

    /// Population-average opt-in probability, by midpoint quadrature over the
    /// profile distribution.
    pub fn expected_opt_in_rate(&self) -> f64 {
        const GRID: usize = 12;
        let mid = |i: usize| (i as f64 + 0.5) / GRID as f64;
        let mut total = 0.0;
        for a in 0..GRID {
            for b in 0..GRID {
                for c in 0..GRID {
                    for d in 0..GRID {
                        let p = self.profiles.profile([mid(a), mid(b), mid(c), mid(d)]);
                        total += self.opt_in_probability(&p);
                    }
                }
            }
        }
        total / (GRID * GRID * GRID * GRID) as f64
    }

    /// Sets the intercept so the expected opt-in rate equals `target`.
    pub fn calibrate_intercept(&mut self, target: f64) -> Result<f64, SimError> {
        if !(target > 0.0 && target < 1.0) {
            return Err(SimError::Config("calibration target must lie in (0, 1)".into()));
        }
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..80 {
            self.model.intercept = 0.5 * (lo + hi);
            if self.expected_opt_in_rate() < target {
                lo = self.model.intercept;
            } else {
                hi = self.model.intercept;
            }
        }
        self.model.intercept = 0.5 * (lo + hi);
        Ok(self.model.intercept)
    }

    fn ballot_format(&self) -> BallotFormat {
        BallotFormat::single_choice(self.options.iter().cloned())
    }

    fn session_config(&self, seed: u64, run: u64) -> SessionConfig {
        let mut cfg = SessionConfig::new(
            format!("sim-{seed}-{run}"),
            Window::new(0, 10),
            Window::new(10, 20),
            30,
            self.ballot_format(),
        );
        cfg.threshold_policy = self.threshold_policy;
        cfg.deposit = self.deposit;
        cfg.reward = self.reward;
        cfg
    }
}

/// Independent random streams of one run: behavioral decisions and protocol
/// randomness (identifiers, keys, ballot encryption).
fn run_streams(seed: u64, run: u64) -> (ChaCha20Rng, ChaCha20Rng) {
    let mut decisions = ChaCha20Rng::seed_from_u64(seed);
    decisions.set_stream(2 * run);
    let mut protocol = ChaCha20Rng::seed_from_u64(seed);
    protocol.set_stream(2 * run + 1);
    (decisions, protocol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct VoterDraw {
    opted_in: bool,
    releases: bool,
    choice: u32,
}

fn sample_voters(config: &ScenarioConfig, rng: &mut ChaCha20Rng) -> Vec<VoterDraw> {
    let m = config.options.len() as f64;
    (0..config.population)
        .map(|_| {
            let u: [f64; 4] = [rng.gen(), rng.gen(), rng.gen(), rng.gen()];
            let (u_opt, u_release, u_choice): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
            let profile = config.profiles.profile(u);
            VoterDraw {
                opted_in: u_opt < config.opt_in_probability(&profile),
                releases: u_release < profile.release_reliability,
                choice: ((u_choice * m) as u32).min(config.options.len() as u32 - 1),
            }
        })
        .collect()
}

/// Behavioral outcome of one run without executing the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuickOutcome {
    pub opted_in: u32,
    pub t: Option<u32>,
    pub releases: u32,
    pub threshold_met: bool,
}

fn summarize(config: &ScenarioConfig, draws: &[VoterDraw]) -> QuickOutcome {
    let opted_in = draws.iter().filter(|d| d.opted_in).count() as u32;
    let releases = draws.iter().filter(|d| d.opted_in && d.releases).count() as u32;
    let t = config.threshold_policy.resolve(opted_in);
    QuickOutcome { opted_in, t, releases, threshold_met: t.is_some_and(|t| releases >= t) }
}

/// Same draws as [`run_scenario_run`], skipping the cryptography.
pub fn quick_outcome(config: &ScenarioConfig, seed: u64, run: u64) -> QuickOutcome {
    let (mut decisions, _) = run_streams(seed, run);
    summarize(config, &sample_voters(config, &mut decisions))
}

/// Mean number of opted-in holders over `runs` seeded runs.
pub fn mean_opt_in(config: &ScenarioConfig, seed: u64, runs: u64) -> Result<f64, SimError> {
    config.validate()?;
    if runs == 0 {
        return Err(SimError::Config("runs must be >= 1".into()));
    }
    let total: u64 = (0..runs)
        .into_par_iter()
        .map(|run| u64::from(quick_outcome(config, seed, run).opted_in))
        .sum();
    Ok(total as f64 / runs as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub seed: u64,
    pub run: u64,
    pub population: u32,
    pub opted_in: u32,
    pub t: Option<u32>,
    pub releases: u32,
    pub threshold_met: bool,
    pub aborted: Option<String>,
    pub tally: Option<RuleResult>,
    /// Tally outcome equals the rule applied to the cast plaintexts.
    pub oracle_match: Option<bool>,
    pub plaintext_exposed: bool,
    pub log_head: String,
    pub log_events: usize,
}

pub fn run_scenario(config: &ScenarioConfig, seed: u64) -> Result<ScenarioReport, SimError> {
    run_scenario_run(config, seed, 0)
}

/// Runs one election end to end through the ledger and tally engine.
pub fn run_scenario_run(
    config: &ScenarioConfig,
    seed: u64,
    run: u64,
) -> Result<ScenarioReport, SimError> {
    config.validate()?;
    let (mut decisions, mut rng) = run_streams(seed, run);
    let draws = sample_voters(config, &mut decisions);
    let quick = summarize(config, &draws);

    let mut election =
        Election::with_population(config.session_config(seed, run), config.population, &mut rng)?;
    let mut holder_of = vec![None; draws.len()];
    let reg_tick = election.registration_tick();
    for (i, d) in draws.iter().enumerate() {
        if d.opted_in {
            holder_of[i] = Some(election.register(i, reg_tick, &mut rng)?);
        }
    }

    let mut report = ScenarioReport {
        seed,
        run,
        population: config.population as u32,
        opted_in: quick.opted_in,
        t: None,
        releases: 0,
        threshold_met: false,
        aborted: None,
        tally: None,
        oracle_match: None,
        plaintext_exposed: false,
        log_head: String::new(),
        log_events: 0,
    };

    match election.freeze() {
        Ok((_, t)) => report.t = Some(t),
        Err(LedgerError::SessionAborted(reason)) => report.aborted = Some(reason),
        Err(e) => return Err(e.into()),
    }

    if report.aborted.is_none() {
        let vote_tick = election.voting_tick();
        let choices: Vec<BallotChoice> =
            draws.iter().map(|d| BallotChoice::SingleChoice(d.choice)).collect();
        for (i, choice) in choices.iter().enumerate() {
            election.cast(i, choice, vote_tick, &mut rng)?;
        }
        let release_tick = election.release_tick();
        for (i, d) in draws.iter().enumerate() {
            if let (Some(index), true) = (holder_of[i], d.releases) {
                election.release(index, release_tick)?;
                report.releases += 1;
            }
        }

        let state = election.ledger.state()?;
        report.threshold_met = state.threshold_met();
        if report.threshold_met {
            let transcript = tally_ledger(&election.ledger)?;
            let oracle = apply_rule(Rule::Plurality, &config.ballot_format(), &choices)?;
            report.oracle_match = Some(transcript.result.outcome == oracle);
            report.tally = Some(transcript.result);
        } else {
            let log_bytes = election.ledger.log().to_bytes();
            let leaked_in_log = choices.iter().any(|c| contains(&log_bytes, &c.to_payload()));
            let decryptable = !matches!(
                decrypt_ballots(state),
                Err(TallyError::ThresholdNotMet { .. })
            );
            report.plaintext_exposed = leaked_in_log || decryptable;
        }
    }

    election.settle()?;
    report.log_head = election.ledger.head().to_hex();
    report.log_events = election.ledger.log().len();
    Ok(report)
}

fn contains(haystack: &[u8], needle: &[u8]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}
