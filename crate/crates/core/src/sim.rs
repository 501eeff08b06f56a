//! Monte Carlo experiments over exchangeable belief populations.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`). A run with seed `s` uses
//! one substream per trial: the key is `ChaCha8Rng::seed_from_u64(s)` and the
//! stream id is the trial index. Trials only read their own substream, so
//! results depend on `(scenario, seed)` alone, whatever the thread count.

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::arbitrage::{arbitrage_report, ArbitrageError, Coalition, Player};
use crate::mechanisms::{
    coalition_surplus_competitive, coalition_surplus_market, traditional_surplus, MechanismError,
    MechanismKind, MechanismSpec,
};
use crate::simplex::{Forecast, SimplexError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Arbitrage(#[from] ArbitrageError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error("invalid sampler: {0}")]
    InvalidSampler(String),
    #[error("fraction {0} is outside (0, 1] or leaves fewer than 2 coalition members")]
    FractionOutOfRange(f64),
    #[error("population needs at least 2 players, got {0}")]
    PopulationTooSmall(usize),
    #[error("at least one trial is required")]
    NoTrials,
    #[error("{0}")]
    Unsupported(String),
    #[error("invalid ordering: {0}")]
    InvalidOrdering(String),
}

/// Substream `stream` of the run seeded with `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Distribution `F` that beliefs are drawn from, i.i.d.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BeliefSampler {
    /// `(p, 1 - p)` with `p ~ Beta(alpha, beta)`.
    BetaBinary { alpha: f64, beta: f64 },
    Dirichlet { alpha: Vec<f64> },
    /// One of `points`, chosen with probability proportional to `weights`.
    FiniteMixture { points: Vec<Forecast>, weights: Vec<f64> },
}

impl BeliefSampler {
    pub fn beta_binary(alpha: f64, beta: f64) -> Result<Self, SimError> {
        let s = BeliefSampler::BetaBinary { alpha, beta };
        s.validate()?;
        Ok(s)
    }

    pub fn dirichlet(alpha: Vec<f64>) -> Result<Self, SimError> {
        let s = BeliefSampler::Dirichlet { alpha };
        s.validate()?;
        Ok(s)
    }

    pub fn finite_mixture(points: Vec<Forecast>, weights: Vec<f64>) -> Result<Self, SimError> {
        let s = BeliefSampler::FiniteMixture { points, weights };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let positive = |xs: &[f64]| xs.iter().all(|&x| x > 0.0 && x.is_finite());
        match self {
            BeliefSampler::BetaBinary { alpha, beta } => {
                if !positive(&[*alpha, *beta]) {
                    return Err(SimError::InvalidSampler(format!(
                        "beta parameters must be positive, got ({alpha}, {beta})"
                    )));
                }
            }
            BeliefSampler::Dirichlet { alpha } => {
                if alpha.len() < 2 || !positive(alpha) {
                    return Err(SimError::InvalidSampler(
                        "dirichlet needs at least 2 positive concentrations".into(),
                    ));
                }
            }
            BeliefSampler::FiniteMixture { points, weights } => {
                if points.is_empty() || points.len() != weights.len() || !positive(weights) {
                    return Err(SimError::InvalidSampler(
                        "mixture needs one positive weight per point".into(),
                    ));
                }
                let m = points[0].len();
                if points.iter().any(|p| p.len() != m) {
                    return Err(SimError::InvalidSampler(
                        "mixture points have different numbers of states".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Number of states of the drawn forecasts.
    pub fn states(&self) -> usize {
        match self {
            BeliefSampler::BetaBinary { .. } => 2,
            BeliefSampler::Dirichlet { alpha } => alpha.len(),
            BeliefSampler::FiniteMixture { points, .. } => points[0].len(),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Forecast, SimError> {
        let bad = |e: &dyn std::fmt::Display| SimError::InvalidSampler(e.to_string());
        match self {
            BeliefSampler::BetaBinary { alpha, beta } => {
                let dist = Beta::new(*alpha, *beta).map_err(|e| bad(&e))?;
                Ok(Forecast::binary(dist.sample(rng))?)
            }
            BeliefSampler::Dirichlet { alpha } => {
                let draws = alpha
                    .iter()
                    .map(|&a| Ok(Gamma::new(a, 1.0).map_err(|e| bad(&e))?.sample(rng)))
                    .collect::<Result<Vec<f64>, SimError>>()?;
                let total: f64 = draws.iter().sum();
                Ok(Forecast::new(draws.iter().map(|d| d / total).collect())?)
            }
            BeliefSampler::FiniteMixture { points, weights } => {
                let index = WeightedIndex::new(weights).map_err(|e| bad(&e))?;
                Ok(points[index.sample(rng)].clone())
            }
        }
    }
}

fn draw_population<R: Rng + ?Sized>(
    sampler: &BeliefSampler,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Player>, SimError> {
    (0..n)
        .map(|_| Ok(Player::new(sampler.draw(rng)?, 1.0)?))
        .collect()
}

/// `n` players with unit wagers and i.i.d. beliefs; deterministic in `seed`.
pub fn sample_population(sampler: &BeliefSampler, n: usize, seed: u64) -> Result<Vec<Player>, SimError> {
    if n < 2 {
        return Err(SimError::PopulationTooSmall(n));
    }
    sampler.validate()?;
    draw_population(sampler, n, &mut substream(seed, 0))
}

/// Distribution of the realized outcome in a trial.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum TruthDistribution {
    #[default]
    Uniform,
    Fixed(Forecast),
}

impl TruthDistribution {
    fn draw<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<usize, SimError> {
        match self {
            TruthDistribution::Uniform => Ok(rng.random_range(0..m)),
            TruthDistribution::Fixed(p) => {
                if p.len() != m {
                    return Err(SimError::InvalidSampler(format!(
                        "truth distribution has {} states, beliefs have {m}",
                        p.len()
                    )));
                }
                let index = WeightedIndex::new(p.probs())
                    .map_err(|e| SimError::InvalidSampler(e.to_string()))?;
                Ok(index.sample(rng))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n: usize,
    /// Coalition wager shares in `(0, 1]`.
    pub fractions: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub truth: TruthDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub fraction: f64,
    pub members: usize,
    pub mean: f64,
    pub se: f64,
    pub trials: usize,
    /// Mean of total surplus divided by coalition size.
    pub per_member_mean: f64,
}

/// Polynomial fit of mean surplus against fraction, coefficients in
/// ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveFit {
    pub coefficients: Vec<f64>,
    /// Stationary point of a quadratic fit.
    pub vertex: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub mechanism: MechanismKind,
    pub rows: Vec<SweepRow>,
    pub argmax_fraction: f64,
    pub fit: CurveFit,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fraction,mean,se,trials,per_member_mean\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.fraction, r.mean, r.se, r.trials, r.per_member_mean
            ));
        }
        out
    }
}

/// Sum with pairwise splitting, so the result does not depend on how the
/// trials were scheduled.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Least-squares polynomial fit of `ys` on `xs`.
pub fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Option<Vec<f64>> {
    if xs.len() <= degree {
        return None;
    }
    let design = DMatrix::from_fn(xs.len(), degree + 1, |r, c| xs[r].powi(c as i32));
    let target = DVector::from_column_slice(ys);
    let solution = design.svd(true, true).solve(&target, 1e-14).ok()?;
    Some(solution.iter().copied().collect())
}

fn coalition_size(fraction: f64, n: usize) -> Result<usize, SimError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(SimError::FractionOutOfRange(fraction));
    }
    let c = (fraction * n as f64).round() as usize;
    if c < 2 {
        return Err(SimError::FractionOutOfRange(fraction));
    }
    Ok(c.min(n))
}

/// One trial: a fresh population, a uniformly random member order shared by
/// all fractions, and one realized outcome per fraction.
fn run_trial(
    mechanism: &MechanismSpec,
    sampler: &BeliefSampler,
    config: &SweepConfig,
    sizes: &[usize],
    trial: usize,
) -> Result<Vec<f64>, SimError> {
    let mut rng = substream(config.seed, trial as u64);
    let players = draw_population(sampler, config.n, &mut rng)?;
    let mut order: Vec<usize> = (0..config.n).collect();
    order.shuffle(&mut rng);
    let m = sampler.states();
    sizes
        .iter()
        .map(|&c| {
            let mut members = order[..c].to_vec();
            members.sort_unstable();
            let coalition = Coalition::new(members, config.n)?;
            let outcome = config.truth.draw(m, &mut rng)?;
            let arb = arbitrage_report(&mechanism.rule, &players, &coalition)?;
            match mechanism.kind {
                MechanismKind::Traditional => Ok(arb.surplus_by_outcome[outcome]),
                MechanismKind::SelfFinancedCompetitive => {
                    let coordinated = vec![arb.q; c];
                    let s = coalition_surplus_competitive(&mechanism.rule, &players, &coalition, &coordinated)?;
                    Ok(s.by_outcome[outcome])
                }
                MechanismKind::MarketScoring => Err(SimError::Unsupported(
                    "coalition-size sweeps support traditional and competitive mechanisms".into(),
                )),
            }
        })
        .collect()
}

/// Expected coalition surplus as a function of coalition wager share.
pub fn expected_surplus_sweep(
    mechanism: &MechanismSpec,
    sampler: &BeliefSampler,
    config: &SweepConfig,
) -> Result<SweepResult, SimError> {
    if config.n < 2 {
        return Err(SimError::PopulationTooSmall(config.n));
    }
    if config.trials == 0 {
        return Err(SimError::NoTrials);
    }
    if config.fractions.is_empty() {
        return Err(SimError::FractionOutOfRange(f64::NAN));
    }
    if mechanism.kind == MechanismKind::MarketScoring {
        return Err(SimError::Unsupported(
            "coalition-size sweeps support traditional and competitive mechanisms".into(),
        ));
    }
    sampler.validate()?;
    let sizes = config
        .fractions
        .iter()
        .map(|&f| coalition_size(f, config.n))
        .collect::<Result<Vec<_>, _>>()?;

    let per_trial = (0..config.trials)
        .into_par_iter()
        .map(|t| run_trial(mechanism, sampler, config, &sizes, t))
        .collect::<Result<Vec<Vec<f64>>, SimError>>()?;

    let rows: Vec<SweepRow> = config
        .fractions
        .iter()
        .zip(&sizes)
        .enumerate()
        .map(|(k, (&fraction, &members))| {
            let totals: Vec<f64> = per_trial.iter().map(|t| t[k]).collect();
            let (mean, se) = mean_and_se(&totals);
            SweepRow {
                fraction,
                members,
                mean,
                se,
                trials: config.trials,
                per_member_mean: mean / members as f64,
            }
        })
        .collect();

    let argmax_fraction = rows
        .iter()
        .fold((f64::NAN, f64::NEG_INFINITY), |best, r| {
            if r.mean > best.1 {
                (r.fraction, r.mean)
            } else {
                best
            }
        })
        .0;
    let xs: Vec<f64> = rows.iter().map(|r| r.fraction).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.mean).collect();
    let fit = match mechanism.kind {
        MechanismKind::SelfFinancedCompetitive => {
            let coefficients = polyfit(&xs, &ys, 2).unwrap_or_default();
            let vertex = match coefficients.as_slice() {
                [_, b, a] if *a != 0.0 => Some(-b / (2.0 * a)),
                _ => None,
            };
            CurveFit { coefficients, vertex }
        }
        _ => CurveFit {
            coefficients: polyfit(&xs, &ys, 1).unwrap_or_default(),
            vertex: None,
        },
    };
    Ok(SweepResult {
        mechanism: mechanism.kind,
        rows,
        argmax_fraction,
        fit,
    })
}

/// Profit of an intermediary who submits `q` for every client and pays each
/// client what their truthful report would have earned.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntermediaryRun {
    pub scenario_id: String,
    pub q: Forecast,
    pub profit_by_outcome: Vec<f64>,
    pub min_profit: f64,
    /// Clients agreed, so there was nothing to arbitrage.
    pub no_arbitrage: bool,
    /// False when a market ordering puts two clients back-to-back.
    pub guaranteed: bool,
    /// Outcome drawn from the seed (1-based) and the profit realized there.
    pub realized_outcome: usize,
    pub realized_profit: f64,
}

pub fn intermediary_run(
    mechanism: &MechanismSpec,
    players: &[Player],
    coalition: &Coalition,
    scenario_id: impl Into<String>,
    seed: u64,
) -> Result<IntermediaryRun, SimError> {
    let arb = arbitrage_report(&mechanism.rule, players, coalition)?;
    let m = arb.q.len();
    let coordinated = vec![arb.q.clone(); coalition.len()];
    let (profit, guaranteed) = match mechanism.kind {
        MechanismKind::Traditional => (
            traditional_surplus(&mechanism.rule, players, coalition, &coordinated)?,
            true,
        ),
        MechanismKind::SelfFinancedCompetitive => {
            let s = coalition_surplus_competitive(&mechanism.rule, players, coalition, &coordinated)?;
            (s.by_outcome, !s.coalition_is_everyone)
        }
        MechanismKind::MarketScoring => {
            let ordering: Vec<usize> = (0..players.len()).collect();
            let prior = mechanism.prior_or_uniform(m)?;
            let s = coalition_surplus_market(
                &mechanism.rule,
                players,
                &ordering,
                coalition,
                &coordinated,
                Some(&prior),
            )?;
            let ok = s.guaranteed();
            (s.by_outcome, ok)
        }
    };
    let profit: Vec<f64> = if arb.agreement { vec![0.0; m] } else { profit };
    let min_profit = profit.iter().copied().fold(f64::INFINITY, f64::min);
    let realized = substream(seed, 0).random_range(0..m);
    Ok(IntermediaryRun {
        scenario_id: scenario_id.into(),
        q: arb.q,
        realized_profit: profit[realized],
        min_profit,
        profit_by_outcome: profit,
        no_arbitrage: arb.agreement,
        guaranteed: guaranteed && !arb.agreement,
        realized_outcome: realized + 1,
    })
}

/// What coalition members submit in a market session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CoalitionStrategy {
    #[default]
    Equalizing,
    Truthful,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketSession {
    pub beliefs: Vec<Forecast>,
    pub q: Forecast,
    pub surplus_by_outcome: Vec<f64>,
    /// 1-based ids of the first pair of members reporting back-to-back.
    pub ordering_violation: Option<(usize, usize)>,
}

/// Sequential market with sampled beliefs, truthful outsiders, and the
/// coalition playing `strategy`. `ordering` must be a permutation of
/// `0..ordering.len()`.
pub fn market_session(
    mechanism: &MechanismSpec,
    ordering: &[usize],
    coalition: &Coalition,
    sampler: &BeliefSampler,
    seed: u64,
    strategy: CoalitionStrategy,
) -> Result<MarketSession, SimError> {
    if mechanism.kind != MechanismKind::MarketScoring {
        return Err(SimError::Unsupported("market sessions need the market scoring mechanism".into()));
    }
    let n = ordering.len();
    let mut seen = vec![false; n];
    for &i in ordering {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(SimError::InvalidOrdering(format!(
                "ordering must be a permutation of players 1..={n}"
            )));
        }
    }
    let players = sample_population(sampler, n, seed)?;
    let q = arbitrage_report(&mechanism.rule, &players, coalition)?.q;
    let coordinated: Vec<Forecast> = match strategy {
        CoalitionStrategy::Equalizing => vec![q.clone(); coalition.len()],
        CoalitionStrategy::Truthful => coalition
            .members()
            .iter()
            .map(|&i| players[i].belief().clone())
            .collect(),
    };
    let prior = mechanism.prior_or_uniform(sampler.states())?;
    let s = coalition_surplus_market(
        &mechanism.rule,
        &players,
        ordering,
        coalition,
        &coordinated,
        Some(&prior),
    )?;
    Ok(MarketSession {
        beliefs: players.iter().map(|p| p.belief().clone()).collect(),
        q,
        surplus_by_outcome: s.by_outcome,
        ordering_violation: s.ordering_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::ScoringRule;

    fn f(p: &[f64]) -> Forecast {
        Forecast::new(p.to_vec()).unwrap()
    }

    #[test]
    fn population_is_reproducible() {
        let s = BeliefSampler::beta_binary(2.0, 2.0).unwrap();
        let a = sample_population(&s, 4, 42).unwrap();
        let b = sample_population(&s, 4, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
        assert!(a.iter().all(|p| p.wager() == 1.0 && p.belief().len() == 2));
        assert_ne!(a, sample_population(&s, 4, 43).unwrap());
    }

    #[test]
    fn mixture_draws_only_its_points() {
        let pts = vec![f(&[0.2, 0.8]), f(&[0.8, 0.2])];
        let s = BeliefSampler::finite_mixture(pts.clone(), vec![1.0, 1.0]).unwrap();
        let pop = sample_population(&s, 200, 7).unwrap();
        assert!(pop.iter().all(|p| pts.contains(p.belief())));
        assert!(pop.iter().any(|p| p.belief() == &pts[0]));
        assert!(pop.iter().any(|p| p.belief() == &pts[1]));
    }

    #[test]
    fn dirichlet_mean_is_uniform() {
        let s = BeliefSampler::dirichlet(vec![1.0, 1.0, 1.0]).unwrap();
        let pop = sample_population(&s, 1000, 2024).unwrap();
        for j in 0..3 {
            let xs: Vec<f64> = pop.iter().map(|p| p.belief().get(j)).collect();
            let (mean, se) = mean_and_se(&xs);
            assert!((mean - 1.0 / 3.0).abs() < 3.0 * se, "state {j}: {mean} +- {se}");
        }
    }

    #[test]
    fn sampler_validation() {
        assert!(BeliefSampler::beta_binary(0.0, 1.0).is_err());
        assert!(BeliefSampler::dirichlet(vec![1.0]).is_err());
        assert!(BeliefSampler::finite_mixture(vec![f(&[0.5, 0.5])], vec![1.0, 2.0]).is_err());
        let s = BeliefSampler::beta_binary(2.0, 2.0).unwrap();
        assert_eq!(sample_population(&s, 1, 0), Err(SimError::PopulationTooSmall(1)));
    }

    fn config(fractions: Vec<f64>, trials: usize) -> SweepConfig {
        SweepConfig {
            n: 40,
            fractions,
            trials,
            seed: 9,
            truth: TruthDistribution::Uniform,
        }
    }

    #[test]
    fn traditional_sweep_increases() {
        let s = BeliefSampler::beta_binary(2.0, 2.0).unwrap();
        let mech = MechanismSpec::traditional(ScoringRule::quadratic());
        let res = expected_surplus_sweep(&mech, &s, &config(vec![0.25, 0.5, 0.75, 1.0], 200)).unwrap();
        assert!(res.rows.windows(2).all(|w| w[0].mean < w[1].mean));
        assert_eq!(res.argmax_fraction, 1.0);
        assert!(res.fit.coefficients[1] > 0.0);
        assert!(res.rows.iter().all(|r| r.trials == 200 && r.se.is_finite()));
    }

    #[test]
    fn competitive_sweep_shape() {
        let s = BeliefSampler::beta_binary(2.0, 2.0).unwrap();
        let mech = MechanismSpec::competitive(ScoringRule::quadratic());
        let fractions: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
        let res = expected_surplus_sweep(&mech, &s, &config(fractions, 300)).unwrap();
        assert!(res.rows.last().unwrap().mean.abs() < 1e-12);
        let vertex = res.fit.vertex.unwrap();
        assert!((0.4..=0.6).contains(&vertex), "{vertex}");
        assert!(res.fit.coefficients[2] < 0.0);
        // Small coalitions pay a finite-size (c - 1) / c penalty, so only check
        // the decline once that has flattened out.
        let per_member: Vec<f64> = res.rows[2..].iter().map(|r| r.per_member_mean).collect();
        assert!(per_member.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn competitive_is_scaled_traditional() {
        let s = BeliefSampler::dirichlet(vec![2.0, 1.0, 1.0]).unwrap();
        let cfg = config(vec![0.2, 0.5, 0.8], 100);
        let trad = expected_surplus_sweep(&MechanismSpec::traditional(ScoringRule::spherical()), &s, &cfg).unwrap();
        let comp = expected_surplus_sweep(&MechanismSpec::competitive(ScoringRule::spherical()), &s, &cfg).unwrap();
        for (t, c) in trad.rows.iter().zip(&comp.rows) {
            let frac = c.members as f64 / cfg.n as f64;
            let combined = (t.se.powi(2) + c.se.powi(2)).sqrt();
            assert!((c.mean - (1.0 - frac) * t.mean).abs() <= 3.0 * combined + 1e-12);
        }
    }

    #[test]
    fn sweep_rejects_bad_fractions() {
        let s = BeliefSampler::beta_binary(2.0, 2.0).unwrap();
        let mech = MechanismSpec::traditional(ScoringRule::quadratic());
        for bad in [0.0, -0.5, 1.5, 0.01] {
            assert!(matches!(
                expected_surplus_sweep(&mech, &s, &config(vec![bad], 5)),
                Err(SimError::FractionOutOfRange(_))
            ));
        }
        assert_eq!(
            expected_surplus_sweep(&mech, &s, &config(vec![0.5], 0)),
            Err(SimError::NoTrials)
        );
    }

    #[test]
    fn sweep_is_deterministic_across_thread_counts() {
        let s = BeliefSampler::beta_binary(2.0, 3.0).unwrap();
        let mech = MechanismSpec::competitive(ScoringRule::quadratic());
        let cfg = config(vec![0.3, 0.6], 64);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| expected_surplus_sweep(&mech, &s, &cfg)).unwrap();
        let b = four.install(|| expected_surplus_sweep(&mech, &s, &cfg)).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a, b);
    }

    fn clients() -> Vec<Player> {
        vec![
            Player::new(f(&[0.2, 0.8]), 1.0).unwrap(),
            Player::new(f(&[0.8, 0.2]), 1.0).unwrap(),
            Player::new(f(&[0.4, 0.6]), 1.0).unwrap(),
            Player::new(f(&[0.7, 0.3]), 1.0).unwrap(),
        ]
    }

    #[test]
    fn intermediary_examples() {
        let players = clients();
        let pair = Coalition::new(vec![0, 1], 4).unwrap();
        let trad = intermediary_run(&MechanismSpec::traditional(ScoringRule::quadratic()), &players[..2], &Coalition::everyone(2).unwrap(), "t", 1).unwrap();
        for p in &trad.profit_by_outcome {
            assert!((p - 0.36).abs() < 1e-12);
        }
        assert!(trad.min_profit > 0.0 && trad.guaranteed);

        let comp = intermediary_run(&MechanismSpec::competitive(ScoringRule::quadratic()), &players, &pair, "c", 1).unwrap();
        for p in &comp.profit_by_outcome {
            assert!((p - 0.18).abs() < 1e-12);
        }

        let agree = vec![players[2].clone(), players[2].clone()];
        let none = intermediary_run(&MechanismSpec::traditional(ScoringRule::quadratic()), &agree, &Coalition::everyone(2).unwrap(), "a", 1).unwrap();
        assert!(none.no_arbitrage);
        assert_eq!(none.profit_by_outcome, vec![0.0, 0.0]);
    }

    #[test]
    fn market_session_examples() {
        let mech = MechanismSpec::market(ScoringRule::quadratic(), None);
        let sampler = BeliefSampler::beta_binary(2.0, 2.0).unwrap();
        let coalition = Coalition::new(vec![1, 3], 4).unwrap();
        let ok = market_session(&mech, &[0, 1, 2, 3], &coalition, &sampler, 5, CoalitionStrategy::Equalizing).unwrap();
        assert!(ok.ordering_violation.is_none());
        assert!(ok.surplus_by_outcome.iter().all(|&s| s > 0.0));

        let adjacent = market_session(&mech, &[0, 1, 3, 2], &coalition, &sampler, 5, CoalitionStrategy::Equalizing).unwrap();
        assert_eq!(adjacent.ordering_violation, Some((2, 4)));

        let honest = market_session(&mech, &[0, 1, 2, 3], &coalition, &sampler, 5, CoalitionStrategy::Truthful).unwrap();
        assert_eq!(honest.surplus_by_outcome, vec![0.0, 0.0]);

        assert!(market_session(&mech, &[0, 0, 1, 2], &coalition, &sampler, 5, CoalitionStrategy::Equalizing).is_err());
        let trad = MechanismSpec::traditional(ScoringRule::quadratic());
        assert!(market_session(&trad, &[0, 1, 2, 3], &coalition, &sampler, 5, CoalitionStrategy::Equalizing).is_err());
    }

    #[test]
    fn pairwise_sum_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|k| (k as f64).sin()).collect();
        assert!((pairwise_sum(&xs) - xs.iter().sum::<f64>()).abs() < 1e-10);
    }

    #[test]
    fn polyfit_recovers_quadratic() {
        let xs: Vec<f64> = (0..9).map(|k| k as f64 / 8.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 + 2.0 * x - 3.0 * x * x).collect();
        let c = polyfit(&xs, &ys, 2).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-10 && (c[1] - 2.0).abs() < 1e-10 && (c[2] + 3.0).abs() < 1e-10);
    }
}
