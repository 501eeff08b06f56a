//! Identical coalition reports `q` that beat truthful reporting in every
//! outcome state, and the surplus they produce.
//!
//! | rule                       | q                                          |
//! |----------------------------|--------------------------------------------|
//! | quadratic                  | wager-weighted arithmetic mean of beliefs  |
//! | (generalized) logarithmic  | normalized weighted geometric mean         |
//! | spherical                  | projection built from `Y_j` (see below)    |
//! | binary, convex generator G | `G'(q) = sum (w_i / w_C) G'(p_i)`          |
//!
//! Every `q` here equalizes the surplus across outcomes.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::scoring::{score, ConvexGenerator, RuleError, RuleKind, ScoringRule};
use crate::simplex::{simplex_grid, weighted_mean, Forecast, OutcomeIndex, SimplexError};

/// Members agree when every pair of beliefs is within this max-norm distance.
pub const AGREEMENT_TOL: f64 = 1e-12;
/// Strict-positivity threshold for the dominance oracle.
pub const DOMINANCE_TOL: f64 = 1e-12;

const BISECTION_MAX_ITER: usize = 200;
pub const BISECTION_TOL: f64 = 1e-12;
const BRACKET_NUDGE: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArbitrageError {
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error("wager must be positive and finite, got {0}")]
    NonPositiveWager(f64),
    #[error("report has {found} states but belief has {expected}")]
    ReportDimension { expected: usize, found: usize },
    #[error("coalition is empty")]
    EmptyCoalition,
    #[error("coalition needs at least 2 members, got {0}")]
    CoalitionTooSmall(usize),
    #[error("player {0} is listed twice in the coalition")]
    DuplicateMember(usize),
    #[error("player {index} is out of range ({n} players)")]
    MemberOutOfRange { index: usize, n: usize },
    #[error("players disagree on the number of states")]
    MixedDimensions,
    #[error("no identical-report construction for the {0} rule")]
    UnsupportedRule(&'static str),
    #[error("belief of player {player} puts zero mass on E{outcome}; the pure log rule cannot score it")]
    DegenerateBelief { player: usize, outcome: usize },
    #[error("bisection did not converge in {iterations} iterations (residual {residual})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("generator derivative is not increasing across the belief bracket")]
    NonMonotoneGenerator,
}

/// A forecaster: belief `p_i`, wager `w_i > 0`, and optionally a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Player {
    belief: Forecast,
    wager: f64,
    report: Option<Forecast>,
}

impl Player {
    pub fn new(belief: Forecast, wager: f64) -> Result<Self, ArbitrageError> {
        if !(wager > 0.0 && wager.is_finite()) {
            return Err(ArbitrageError::NonPositiveWager(wager));
        }
        Ok(Player {
            belief,
            wager,
            report: None,
        })
    }

    pub fn with_report(mut self, report: Forecast) -> Result<Self, ArbitrageError> {
        if report.len() != self.belief.len() {
            return Err(ArbitrageError::ReportDimension {
                expected: self.belief.len(),
                found: report.len(),
            });
        }
        self.report = Some(report);
        Ok(self)
    }

    pub fn belief(&self) -> &Forecast {
        &self.belief
    }

    pub fn wager(&self) -> f64 {
        self.wager
    }

    pub fn report(&self) -> Option<&Forecast> {
        self.report.as_ref()
    }

    /// The submitted report, or the belief when none was given.
    pub fn report_or_belief(&self) -> &Forecast {
        self.report.as_ref().unwrap_or(&self.belief)
    }
}

/// Distinct, in-range, 0-based player indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Coalition {
    members: Vec<usize>,
}

impl Coalition {
    pub fn new(members: Vec<usize>, n_players: usize) -> Result<Self, ArbitrageError> {
        if members.is_empty() {
            return Err(ArbitrageError::EmptyCoalition);
        }
        let mut seen = vec![false; n_players];
        for &index in &members {
            if index >= n_players {
                return Err(ArbitrageError::MemberOutOfRange {
                    index,
                    n: n_players,
                });
            }
            if std::mem::replace(&mut seen[index], true) {
                return Err(ArbitrageError::DuplicateMember(index));
            }
        }
        Ok(Coalition { members })
    }

    /// Coalition of every player.
    pub fn everyone(n_players: usize) -> Result<Self, ArbitrageError> {
        Self::new((0..n_players).collect(), n_players)
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.contains(&index)
    }

    /// `w_C`.
    pub fn wager(&self, players: &[Player]) -> f64 {
        self.members.iter().map(|&i| players[i].wager).sum()
    }

    fn require_arbitrage_size(&self) -> Result<(), ArbitrageError> {
        if self.members.len() < 2 {
            return Err(ArbitrageError::CoalitionTooSmall(self.members.len()));
        }
        Ok(())
    }

    fn dimension(&self, players: &[Player]) -> Result<usize, ArbitrageError> {
        if let Some(&index) = self.members.iter().find(|&&i| i >= players.len()) {
            return Err(ArbitrageError::MemberOutOfRange {
                index,
                n: players.len(),
            });
        }
        let m = players[self.members[0]].belief.len();
        if self.members.iter().any(|&i| players[i].belief.len() != m) {
            return Err(ArbitrageError::MixedDimensions);
        }
        Ok(m)
    }

    /// Whether all member beliefs coincide (pairwise max-norm <= 1e-12).
    pub fn agrees(&self, players: &[Player]) -> bool {
        self.members.iter().enumerate().all(|(k, &a)| {
            self.members[k + 1..]
                .iter()
                .all(|&b| players[a].belief.max_distance(&players[b].belief) <= AGREEMENT_TOL)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArbitrageResult {
    pub q: Forecast,
    /// `sum_{i in C} w_i [S(q, E_j) - S(p_i, E_j)]` for each `j`.
    pub surplus_by_outcome: Vec<f64>,
    /// Surplus is the same in every outcome (to `1e-9` relative).
    pub equalized: bool,
    /// Members agreed, so `q` is their common belief and the surplus is zero.
    pub agreement: bool,
}

impl ArbitrageResult {
    pub fn min_surplus(&self) -> f64 {
        self.surplus_by_outcome
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Constructs the identical report for `rule` and evaluates its surplus.
pub fn arbitrage_report(
    rule: &ScoringRule,
    players: &[Player],
    coalition: &Coalition,
) -> Result<ArbitrageResult, ArbitrageError> {
    coalition.require_arbitrage_size()?;
    let m = coalition.dimension(players)?;
    rule.check_dimension(m)?;
    if coalition.agrees(players) {
        return Ok(ArbitrageResult {
            q: players[coalition.members[0]].belief.clone(),
            surplus_by_outcome: vec![0.0; m],
            equalized: true,
            agreement: true,
        });
    }
    let q = match rule.kind() {
        RuleKind::Quadratic => coalition_mean(players, coalition)?,
        RuleKind::Logarithmic | RuleKind::GeneralizedLogarithmic => {
            geometric_mean_report(rule, players, coalition)?
        }
        RuleKind::Spherical => {
            spherical_report(&spherical_aux(players, coalition)).unwrap_or_else(|| {
                // Float noise at near-agreement; fall back to the common belief.
                players[coalition.members[0]].belief.clone()
            })
        }
        RuleKind::CustomBinary => {
            let gen = rule
                .generator()
                .ok_or(ArbitrageError::UnsupportedRule("custom_binary"))?;
            let q = binary_equalizer(gen, players, coalition, BISECTION_TOL)?;
            Forecast::binary(q)?
        }
        RuleKind::Linear => return Err(ArbitrageError::UnsupportedRule(RuleKind::Linear.name())),
    };
    let surplus = surplus_by_outcome(rule, players, coalition, &q)?;
    let equalized = is_equalized(&surplus);
    Ok(ArbitrageResult {
        q,
        surplus_by_outcome: surplus,
        equalized,
        agreement: false,
    })
}

fn is_equalized(surplus: &[f64]) -> bool {
    let lo = surplus.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = surplus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = surplus.iter().sum::<f64>() / surplus.len() as f64;
    hi - lo <= 1e-9 * mean.abs().max(1.0)
}

/// Wager-weighted arithmetic mean of member beliefs.
pub fn coalition_mean(players: &[Player], coalition: &Coalition) -> Result<Forecast, ArbitrageError> {
    let (beliefs, weights): (Vec<Forecast>, Vec<f64>) = coalition
        .members
        .iter()
        .map(|&i| (players[i].belief.clone(), players[i].wager))
        .unzip();
    Ok(weighted_mean(&beliefs, &weights)?)
}

/// `ln prod_i (p_ij + l)^(w_i / w_C)` for each `j`, accumulated in log space.
fn log_geometric_terms(
    rule: &ScoringRule,
    players: &[Player],
    coalition: &Coalition,
) -> Result<Vec<f64>, ArbitrageError> {
    let m = coalition.dimension(players)?;
    let l = if rule.is_pure_log() { 0.0 } else { rule.floor() };
    let w_c = coalition.wager(players);
    let mut logs = vec![0.0; m];
    for &i in &coalition.members {
        let share = players[i].wager / w_c;
        for (j, &p) in players[i].belief.probs().iter().enumerate() {
            if l == 0.0 && p == 0.0 {
                return Err(ArbitrageError::DegenerateBelief {
                    player: i + 1,
                    outcome: j + 1,
                });
            }
            logs[j] += share * (p + l).ln();
        }
    }
    Ok(logs)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `q_j = (1 + m l) G_j / sum_k G_k - l` with `G_j = prod_i (p_ij + l)^(w_i/w_C)`.
fn geometric_mean_report(
    rule: &ScoringRule,
    players: &[Player],
    coalition: &Coalition,
) -> Result<Forecast, ArbitrageError> {
    let logs = log_geometric_terms(rule, players, coalition)?;
    let m = logs.len() as f64;
    let l = rule.floor();
    let log_z = log_sum_exp(&logs);
    let q = logs
        .iter()
        .map(|lg| (1.0 + m * l) * (lg - log_z).exp() - l)
        .collect();
    Ok(Forecast::new(q)?)
}

/// Auxiliary quantities for the spherical construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SphericalAux {
    /// `Y_j = sum_i w_i p_ij / (w_C ||p_i||)`.
    pub y: Vec<f64>,
    pub y_bar: f64,
    /// `sum_j (Y_j - Y_bar)^2`.
    pub sum_sq_dev: f64,
    /// `sum_j Y_j^2`; below 1 exactly when members disagree.
    pub sum_sq: f64,
}

pub fn spherical_aux(players: &[Player], coalition: &Coalition) -> SphericalAux {
    let m = players[coalition.members[0]].belief.len();
    let w_c = coalition.wager(players);
    let mut y = vec![0.0; m];
    for &i in &coalition.members {
        let p = &players[i].belief;
        let factor = players[i].wager / (w_c * p.two_norm());
        for (yj, pj) in y.iter_mut().zip(p.probs()) {
            *yj += factor * pj;
        }
    }
    let y_bar = y.iter().sum::<f64>() / m as f64;
    let sum_sq_dev = y.iter().map(|v| (v - y_bar).powi(2)).sum();
    let sum_sq = y.iter().map(|v| v * v).sum();
    SphericalAux {
        y,
        y_bar,
        sum_sq_dev,
        sum_sq,
    }
}

/// `q_j = 1/m + (Y_j - Y_bar) / sqrt(m (1 - sum (Y_k - Y_bar)^2))`, or `None`
/// when the denominator is not positive.
fn spherical_report(aux: &SphericalAux) -> Option<Forecast> {
    let m = aux.y.len() as f64;
    let slack = 1.0 - aux.sum_sq_dev;
    if slack <= 0.0 {
        return None;
    }
    let denom = (m * slack).sqrt();
    let q = aux.y.iter().map(|yj| 1.0 / m + (yj - aux.y_bar) / denom).collect();
    Forecast::new(q).ok()
}

/// Solves `G'(q) = sum (w_i / w_C) G'(p_i)` by bisection on the belief
/// bracket. Returns the common belief when members agree.
pub fn binary_equalizer(
    gen: &ConvexGenerator,
    players: &[Player],
    coalition: &Coalition,
    tol: f64,
) -> Result<f64, ArbitrageError> {
    let m = coalition.dimension(players)?;
    if m != 2 {
        return Err(RuleError::BinaryOnly { m }.into());
    }
    let w_c = coalition.wager(players);
    let mut target = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &i in &coalition.members {
        let p = players[i].belief.get(0);
        if !gen.contains(p) {
            let (a, b) = gen.domain();
            return Err(RuleError::OutOfDomain { r: p, lo: a, hi: b }.into());
        }
        target += players[i].wager / w_c * gen.g_prime(p);
        lo = lo.min(p);
        hi = hi.max(p);
    }
    if hi - lo <= AGREEMENT_TOL {
        return Ok(lo);
    }
    let mut lo = lo + BRACKET_NUDGE;
    let mut hi = hi - BRACKET_NUDGE;
    let residual = |x: f64| gen.g_prime(x) - target;
    let (r_lo, r_hi) = (residual(lo), residual(hi));
    if r_lo.partial_cmp(&r_hi) != Some(std::cmp::Ordering::Less) {
        return Err(ArbitrageError::NonMonotoneGenerator);
    }
    if r_lo > 0.0 || r_hi < 0.0 {
        // Target outside the bracket: G' is not increasing across it.
        return Err(ArbitrageError::NonMonotoneGenerator);
    }
    let mut last = f64::INFINITY;
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            let best = if residual(lo).abs() <= residual(hi).abs() { lo } else { hi };
            return Ok(best);
        }
        let r = residual(mid);
        if r.abs() <= tol {
            return Ok(mid);
        }
        last = r;
        if r < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(ArbitrageError::NoConvergence {
        iterations: BISECTION_MAX_ITER,
        residual: last.abs(),
    })
}

/// `sum_{i in C} w_i [S(q, E_j) - S(p_i, E_j)]` for every outcome.
pub fn surplus_by_outcome(
    rule: &ScoringRule,
    players: &[Player],
    coalition: &Coalition,
    q: &Forecast,
) -> Result<Vec<f64>, ArbitrageError> {
    let m = q.len();
    OutcomeIndex::all(m)
        .map(|j| {
            let coordinated = score(rule, q, j)?;
            coalition.members.iter().try_fold(0.0, |acc, &i| {
                let truthful = score(rule, &players[i].belief, j)?;
                Ok(acc + players[i].wager * (coordinated - truthful))
            })
        })
        .collect()
}

/// Outcome-independent surplus of the rule's own `q`, in closed form.
pub fn closed_form_surplus(
    rule: &ScoringRule,
    players: &[Player],
    coalition: &Coalition,
) -> Result<f64, ArbitrageError> {
    coalition.require_arbitrage_size()?;
    let m = coalition.dimension(players)?;
    let b = rule.scale();
    let w_c = coalition.wager(players);
    match rule.kind() {
        RuleKind::Quadratic => {
            let q = coalition_mean(players, coalition)?;
            let total: f64 = coalition
                .members
                .iter()
                .map(|&i| {
                    let p = &players[i].belief;
                    let dist: f64 = p.probs().iter().zip(q.probs()).map(|(a, c)| (a - c).powi(2)).sum();
                    players[i].wager * dist
                })
                .sum();
            Ok(b * total)
        }
        RuleKind::Logarithmic | RuleKind::GeneralizedLogarithmic => {
            let l = if rule.is_pure_log() { 0.0 } else { rule.floor() };
            let logs = log_geometric_terms(rule, players, coalition)?;
            let scale = 1.0 + m as f64 * l;
            Ok(b * w_c * scale * (scale.ln() - log_sum_exp(&logs)))
        }
        RuleKind::Spherical => {
            let aux = spherical_aux(players, coalition);
            let slack = 1.0 - aux.sum_sq_dev;
            if slack <= 0.0 || coalition.agrees(players) {
                return Ok(0.0);
            }
            Ok(b * w_c * ((slack / m as f64).sqrt() - aux.y_bar))
        }
        kind => Err(ArbitrageError::UnsupportedRule(kind.name())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum DominanceVerdict {
    /// Coordinated play is strictly better in every outcome.
    Dominates { surplus: Vec<f64> },
    /// Surplus is zero (within tolerance) in every outcome.
    Ties { surplus: Vec<f64> },
    /// Coordinated play is not strictly better in `outcome` (1-based).
    Fails { outcome: usize, surplus: Vec<f64> },
    /// Scores could not be compared (e.g. dimension mismatch).
    Invalid { reason: String },
}

impl DominanceVerdict {
    pub fn dominates(&self) -> bool {
        matches!(self, DominanceVerdict::Dominates { .. })
    }
}

/// Recomputes the surplus at `q` from raw score calls only and classifies it.
/// A coordinated score of `-inf` (log of zero) counts as a loss in that state.
pub fn verify_dominance_oracle(
    rule: &ScoringRule,
    players: &[Player],
    coalition: &Coalition,
    q: &Forecast,
) -> DominanceVerdict {
    let mut surplus = Vec::with_capacity(q.len());
    for j in 0..q.len() {
        let outcome = OutcomeIndex::new(j);
        let coordinated = match score(rule, q, outcome) {
            Ok(v) => v,
            Err(RuleError::LogOfZero { .. }) => f64::NEG_INFINITY,
            Err(e) => return DominanceVerdict::Invalid { reason: e.to_string() },
        };
        let mut total = 0.0;
        for &i in &coalition.members {
            let p = &players[i];
            let truthful = match score(rule, &p.belief, outcome) {
                Ok(v) => v,
                Err(RuleError::LogOfZero { .. }) => f64::NEG_INFINITY,
                Err(e) => return DominanceVerdict::Invalid { reason: e.to_string() },
            };
            let diff = coordinated - truthful;
            // -inf - -inf: both sides lose everything, treat as a tie.
            total += p.wager * if diff.is_nan() { 0.0 } else { diff };
        }
        surplus.push(total);
    }
    if surplus.iter().all(|&s| s > DOMINANCE_TOL) {
        return DominanceVerdict::Dominates { surplus };
    }
    if surplus.iter().all(|&s| s.abs() <= DOMINANCE_TOL) {
        return DominanceVerdict::Ties { surplus };
    }
    let (witness, _) = surplus
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (j, &s)| if s < best.1 { (j, s) } else { best });
    DominanceVerdict::Fails {
        outcome: witness + 1,
        surplus,
    }
}

/// Brute-force oracle result: the grid report with the largest worst-case surplus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridOptimum {
    pub q: Forecast,
    pub worst_surplus: f64,
}

/// Maximizes `min_j surplus_j(r)` over identical reports `r` on a simplex
/// grid. Deterministic: ties go to the earliest grid point.
pub fn grid_search_equalizer(
    rule: &ScoringRule,
    players: &[Player],
    coalition: &Coalition,
    resolution: usize,
) -> Result<GridOptimum, ArbitrageError> {
    let m = coalition.dimension(players)?;
    rule.check_dimension(m)?;
    let grid = simplex_grid(m, resolution.max(10));
    let best = grid
        .par_iter()
        .enumerate()
        .filter_map(|(k, r)| {
            let s = surplus_by_outcome(rule, players, coalition, r).ok()?;
            let worst = s.iter().copied().fold(f64::INFINITY, f64::min);
            worst.is_finite().then_some((k, worst))
        })
        .reduce_with(|a, b| {
            if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                b
            } else {
                a
            }
        });
    let (k, worst) = best.ok_or(ArbitrageError::UnsupportedRule(rule.kind().name()))?;
    Ok(GridOptimum {
        q: grid[k].clone(),
        worst_surplus: worst,
    })
}
