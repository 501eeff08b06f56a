//! Payment rules built on a scoring rule `S`:
//!
//! - traditional contract: `w_i S(r_i, E_j)`
//! - self-financed competitive: `w_i S(r_i, E_j) - (w_i / w_N) sum_k w_k S(r_k, E_j)`.
//!   Equal wagers give the Kilgour-Gerchak rule; a `[0, 1]`-ranged `S` gives
//!   the Lambert weighted-score mechanism.
//! - market scoring: `S(r_i, E_j) - S(r_{i-1}, E_j)`, with `r_0` the prior.

use serde::Serialize;
use thiserror::Error;

use crate::arbitrage::{ArbitrageError, Coalition, Player};
use crate::scoring::{normalize_to_unit_interval, score, RuleError, ScoringRule};
use crate::simplex::{Forecast, OutcomeIndex, SimplexError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MechanismError {
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Arbitrage(#[from] ArbitrageError),
    #[error(transparent)]
    Simplex(#[from] SimplexError),
    #[error("player {0} has no report")]
    MissingReport(usize),
    #[error("competitive mechanisms need at least 2 players")]
    SinglePlayer,
    #[error("market scoring needs a prior report")]
    MissingPrior,
    #[error("expected {expected} coordinated reports (one per member), got {found}")]
    ReportCount { expected: usize, found: usize },
    #[error("invalid ordering: {0}")]
    InvalidOrdering(String),
    #[error("Kilgour-Gerchak preset needs equal wagers")]
    UnequalWagers,
    #[error("{0} is not supported for this mechanism")]
    Unsupported(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    Traditional,
    SelfFinancedCompetitive,
    MarketScoring,
}

#[derive(Debug, Clone)]
pub struct MechanismSpec {
    pub kind: MechanismKind,
    pub rule: ScoringRule,
    /// Report the first market participant is scored against. Defaults to
    /// uniform when absent.
    pub market_prior: Option<Forecast>,
}

impl MechanismSpec {
    pub fn traditional(rule: ScoringRule) -> Self {
        MechanismSpec {
            kind: MechanismKind::Traditional,
            rule,
            market_prior: None,
        }
    }

    pub fn competitive(rule: ScoringRule) -> Self {
        MechanismSpec {
            kind: MechanismKind::SelfFinancedCompetitive,
            rule,
            market_prior: None,
        }
    }

    /// Competitive mechanism with `S` rescaled onto `[0, 1]`, so no player
    /// can lose more than their wager.
    pub fn lambert(rule: &ScoringRule, m: usize) -> Result<Self, MechanismError> {
        Ok(Self::competitive(normalize_to_unit_interval(rule, m)?))
    }

    /// Competitive mechanism; the equal-wager requirement is checked
    /// against the players it is used with via [`check_equal_wagers`].
    pub fn kilgour_gerchak(rule: ScoringRule) -> Self {
        Self::competitive(rule)
    }

    pub fn market(rule: ScoringRule, prior: Option<Forecast>) -> Self {
        MechanismSpec {
            kind: MechanismKind::MarketScoring,
            rule,
            market_prior: prior,
        }
    }

    /// The market prior, defaulting to uniform over `m` states.
    pub fn prior_or_uniform(&self, m: usize) -> Result<Forecast, MechanismError> {
        match &self.market_prior {
            Some(p) => Ok(p.clone()),
            None => Ok(Forecast::uniform(m)?),
        }
    }
}

pub fn check_equal_wagers(players: &[Player]) -> Result<(), MechanismError> {
    let first = players.first().map(Player::wager).unwrap_or(1.0);
    if players.iter().any(|p| p.wager() != first) {
        return Err(MechanismError::UnequalWagers);
    }
    Ok(())
}

/// `payments[i][j]` is player `i`'s payment when `E_j` occurs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaymentTable {
    pub payments: Vec<Vec<f64>>,
}

impl PaymentTable {
    fn from_columns(columns: Vec<Vec<f64>>, n: usize) -> Self {
        let payments = (0..n)
            .map(|i| columns.iter().map(|col| col[i]).collect())
            .collect();
        PaymentTable { payments }
    }

    pub fn n_players(&self) -> usize {
        self.payments.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.payments.first().map_or(0, Vec::len)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.payments.iter().map(|row| row[j]).collect()
    }

    pub fn column_sum(&self, j: usize) -> f64 {
        self.payments.iter().map(|row| row[j]).sum()
    }

    /// Total payment to `members` in outcome `j`.
    pub fn members_total(&self, members: &[usize], j: usize) -> f64 {
        members.iter().map(|&i| self.payments[i][j]).sum()
    }
}

fn reports_of(players: &[Player]) -> Result<Vec<&Forecast>, MechanismError> {
    players
        .iter()
        .enumerate()
        .map(|(i, p)| p.report().ok_or(MechanismError::MissingReport(i + 1)))
        .collect()
}

fn traditional_column(
    rule: &ScoringRule,
    wagers: &[f64],
    reports: &[&Forecast],
    outcome: OutcomeIndex,
) -> Result<Vec<f64>, MechanismError> {
    wagers
        .iter()
        .zip(reports)
        .map(|(w, r)| Ok(w * score(rule, r, outcome)?))
        .collect()
}

fn competitive_column(
    rule: &ScoringRule,
    wagers: &[f64],
    reports: &[&Forecast],
    outcome: OutcomeIndex,
) -> Result<Vec<f64>, MechanismError> {
    if wagers.len() < 2 {
        return Err(MechanismError::SinglePlayer);
    }
    let weighted = traditional_column(rule, wagers, reports, outcome)?;
    let w_n: f64 = wagers.iter().sum();
    let pool: f64 = weighted.iter().sum();
    Ok(weighted
        .iter()
        .zip(wagers)
        .map(|(ws, w)| ws - w / w_n * pool)
        .collect())
}

/// `w_i S(r_i, E_outcome)` for every player.
pub fn traditional_payments(
    rule: &ScoringRule,
    players: &[Player],
    outcome: OutcomeIndex,
) -> Result<Vec<f64>, MechanismError> {
    let reports = reports_of(players)?;
    let wagers: Vec<f64> = players.iter().map(Player::wager).collect();
    traditional_column(rule, &wagers, &reports, outcome)
}

/// Self-financed competitive payments; the column sums to zero.
pub fn competitive_payments(
    rule: &ScoringRule,
    players: &[Player],
    outcome: OutcomeIndex,
) -> Result<Vec<f64>, MechanismError> {
    if players.len() < 2 {
        return Err(MechanismError::SinglePlayer);
    }
    let reports = reports_of(players)?;
    let wagers: Vec<f64> = players.iter().map(Player::wager).collect();
    competitive_column(rule, &wagers, &reports, outcome)
}

/// Sequential market payments `S(r_i) - S(r_{i-1})` in report order.
pub fn market_scoring_payments(
    rule: &ScoringRule,
    reports: &[Forecast],
    prior: Option<&Forecast>,
    outcome: OutcomeIndex,
) -> Result<Vec<f64>, MechanismError> {
    let prior = prior.ok_or(MechanismError::MissingPrior)?;
    let mut previous = score(rule, prior, outcome)?;
    reports
        .iter()
        .map(|r| {
            let current = score(rule, r, outcome)?;
            let pay = current - previous;
            previous = current;
            Ok(pay)
        })
        .collect()
}

/// Full `n x m` payment table from explicit wagers and reports. For market
/// scoring the reports are taken in the given order.
pub fn payment_table_for(
    spec: &MechanismSpec,
    wagers: &[f64],
    reports: &[&Forecast],
) -> Result<PaymentTable, MechanismError> {
    let m = reports.first().map(|r| r.len()).ok_or(MechanismError::SinglePlayer)?;
    let columns = OutcomeIndex::all(m)
        .map(|j| match spec.kind {
            MechanismKind::Traditional => traditional_column(&spec.rule, wagers, reports, j),
            MechanismKind::SelfFinancedCompetitive => {
                competitive_column(&spec.rule, wagers, reports, j)
            }
            MechanismKind::MarketScoring => {
                let prior = spec.prior_or_uniform(m)?;
                let owned: Vec<Forecast> = reports.iter().map(|r| (*r).clone()).collect();
                market_scoring_payments(&spec.rule, &owned, Some(&prior), j)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PaymentTable::from_columns(columns, reports.len()))
}

/// Payment table from the players' submitted reports.
pub fn payment_table(spec: &MechanismSpec, players: &[Player]) -> Result<PaymentTable, MechanismError> {
    let reports = reports_of(players)?;
    let wagers: Vec<f64> = players.iter().map(Player::wager).collect();
    payment_table_for(spec, &wagers, &reports)
}

/// Reports for the "truthful" and "coordinated" scenarios. Outsiders submit
/// their report (or belief) in both; members submit beliefs or `coordinated`.
fn scenario_reports<'a>(
    players: &'a [Player],
    coalition: &Coalition,
    coordinated: &'a [Forecast],
) -> Result<(Vec<&'a Forecast>, Vec<&'a Forecast>), MechanismError> {
    if coordinated.len() != coalition.len() {
        return Err(MechanismError::ReportCount {
            expected: coalition.len(),
            found: coordinated.len(),
        });
    }
    let mut truthful = Vec::with_capacity(players.len());
    let mut played = Vec::with_capacity(players.len());
    for (i, p) in players.iter().enumerate() {
        match coalition.members().iter().position(|&k| k == i) {
            Some(slot) => {
                truthful.push(p.belief());
                played.push(&coordinated[slot]);
            }
            None => {
                truthful.push(p.report_or_belief());
                played.push(p.report_or_belief());
            }
        }
    }
    Ok((truthful, played))
}

/// Traditional-contract surplus `sum_{i in C} w_i [S(r_i, E_j) - S(p_i, E_j)]`.
pub fn traditional_surplus(
    rule: &ScoringRule,
    players: &[Player],
    coalition: &Coalition,
    coordinated: &[Forecast],
) -> Result<Vec<f64>, MechanismError> {
    let spec = MechanismSpec::traditional(rule.clone());
    coalition_surplus_with(&spec, players, coalition, coordinated)
}

fn coalition_surplus_with(
    spec: &MechanismSpec,
    players: &[Player],
    coalition: &Coalition,
    coordinated: &[Forecast],
) -> Result<Vec<f64>, MechanismError> {
    let (truthful, played) = scenario_reports(players, coalition, coordinated)?;
    let wagers: Vec<f64> = players.iter().map(Player::wager).collect();
    let before = payment_table_for(spec, &wagers, &truthful)?;
    let after = payment_table_for(spec, &wagers, &played)?;
    Ok((0..before.n_outcomes())
        .map(|j| after.members_total(coalition.members(), j) - before.members_total(coalition.members(), j))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompetitiveSurplus {
    pub by_outcome: Vec<f64>,
    /// `w_C = w_N`: the surplus is identically zero.
    pub coalition_is_everyone: bool,
}

/// Coalition gain from coordinated over truthful play under the
/// self-financed competitive mechanism, outsiders' reports held fixed.
pub fn coalition_surplus_competitive(
    rule: &ScoringRule,
    players: &[Player],
    coalition: &Coalition,
    coordinated: &[Forecast],
) -> Result<CompetitiveSurplus, MechanismError> {
    let spec = MechanismSpec::competitive(rule.clone());
    let by_outcome = coalition_surplus_with(&spec, players, coalition, coordinated)?;
    Ok(CompetitiveSurplus {
        by_outcome,
        coalition_is_everyone: coalition.len() == players.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketSurplus {
    pub by_outcome: Vec<f64>,
    /// First pair of coalition members (1-based player ids) reporting
    /// back-to-back; the dominance guarantee does not apply when set.
    pub ordering_violation: Option<(usize, usize)>,
}

impl MarketSurplus {
    pub fn guaranteed(&self) -> bool {
        self.ordering_violation.is_none()
    }
}

/// First adjacent member pair in `ordering`, if any. The prior precedes
/// position 0 and is never a member.
pub fn find_ordering_violation(ordering: &[usize], coalition: &Coalition) -> Option<(usize, usize)> {
    ordering
        .windows(2)
        .find(|w| coalition.contains(w[0]) && coalition.contains(w[1]))
        .map(|w| (w[0] + 1, w[1] + 1))
}

/// Coalition gain under market scoring with players reporting in `ordering`
/// (0-based player indices; each at most once, every member present).
pub fn coalition_surplus_market(
    rule: &ScoringRule,
    players: &[Player],
    ordering: &[usize],
    coalition: &Coalition,
    coordinated: &[Forecast],
    prior: Option<&Forecast>,
) -> Result<MarketSurplus, MechanismError> {
    let mut seen = vec![false; players.len()];
    for &i in ordering {
        if i >= players.len() {
            return Err(MechanismError::InvalidOrdering(format!("player {} does not exist", i + 1)));
        }
        if std::mem::replace(&mut seen[i], true) {
            return Err(MechanismError::InvalidOrdering(format!("player {} reports twice", i + 1)));
        }
    }
    if let Some(&missing) = coalition.members().iter().find(|&&k| !seen[k]) {
        return Err(MechanismError::InvalidOrdering(format!(
            "coalition member {} never reports",
            missing + 1
        )));
    }
    let (truthful, played) = scenario_reports(players, coalition, coordinated)?;
    let m = players[ordering[0]].belief().len();
    let prior = match prior {
        Some(p) => p.clone(),
        None => Forecast::uniform(m)?,
    };
    let in_order = |reports: &[&Forecast]| -> Vec<Forecast> {
        ordering.iter().map(|&i| reports[i].clone()).collect()
    };
    let (truthful, played) = (in_order(&truthful), in_order(&played));
    let member_slots: Vec<usize> = ordering
        .iter()
        .enumerate()
        .filter(|(_, &i)| coalition.contains(i))
        .map(|(slot, _)| slot)
        .collect();
    let by_outcome = OutcomeIndex::all(m)
        .map(|j| {
            let before = market_scoring_payments(rule, &truthful, Some(&prior), j)?;
            let after = market_scoring_payments(rule, &played, Some(&prior), j)?;
            Ok(member_slots.iter().map(|&s| after[s] - before[s]).sum())
        })
        .collect::<Result<Vec<f64>, MechanismError>>()?;
    Ok(MarketSurplus {
        by_outcome,
        ordering_violation: find_ordering_violation(ordering, coalition),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arbitrage::{arbitrage_report, closed_form_surplus};
    use crate::simplex::simplex_grid;
    use crate::scoring::expected_score;

    fn f(p: &[f64]) -> Forecast {
        Forecast::new(p.to_vec()).unwrap()
    }

    fn reporting(belief: &[f64], report: &[f64], w: f64) -> Player {
        Player::new(f(belief), w).unwrap().with_report(f(report)).unwrap()
    }

    fn e(j: usize) -> OutcomeIndex {
        OutcomeIndex::new(j)
    }

    #[test]
    fn traditional_examples() {
        let quad = ScoringRule::quadratic();
        let p = vec![reporting(&[0.5, 0.5], &[0.5, 0.5], 2.0)];
        assert!((traditional_payments(&quad, &p, e(0)).unwrap()[0] - 1.0).abs() < 1e-15);

        let a = reporting(&[0.3, 0.7], &[0.3, 0.7], 1.0);
        let b1 = reporting(&[0.9, 0.1], &[0.9, 0.1], 1.0);
        let b2 = reporting(&[0.1, 0.9], &[0.1, 0.9], 1.0);
        let x = traditional_payments(&quad, &[a.clone(), b1], e(0)).unwrap();
        let y = traditional_payments(&quad, &[a, b2], e(0)).unwrap();
        assert_eq!(x[0], y[0]);
    }

    #[test]
    fn missing_report_names_player() {
        let p = vec![
            reporting(&[0.5, 0.5], &[0.5, 0.5], 1.0),
            Player::new(f(&[0.5, 0.5]), 1.0).unwrap(),
        ];
        assert_eq!(
            traditional_payments(&ScoringRule::quadratic(), &p, e(0)),
            Err(MechanismError::MissingReport(2))
        );
    }

    #[test]
    fn competitive_examples() {
        let quad = ScoringRule::quadratic();
        let same = vec![
            reporting(&[0.2, 0.8], &[0.4, 0.6], 1.0),
            reporting(&[0.7, 0.3], &[0.4, 0.6], 1.0),
        ];
        assert_eq!(competitive_payments(&quad, &same, e(0)).unwrap(), vec![0.0, 0.0]);

        let two = vec![
            reporting(&[0.5, 0.5], &[0.5, 0.5], 1.0),
            reporting(&[1.0, 0.0], &[1.0, 0.0], 1.0),
        ];
        let pay = competitive_payments(&quad, &two, e(0)).unwrap();
        assert!((pay[0] + 0.25).abs() < 1e-15);
        assert!((pay[1] - 0.25).abs() < 1e-15);

        assert_eq!(
            competitive_payments(&quad, &two[..1], e(0)),
            Err(MechanismError::SinglePlayer)
        );
    }

    #[test]
    fn market_examples() {
        let quad = ScoringRule::quadratic();
        let prior = Forecast::uniform(2).unwrap();
        let flat = vec![prior.clone(), prior.clone(), prior.clone()];
        assert_eq!(
            market_scoring_payments(&quad, &flat, Some(&prior), e(0)).unwrap(),
            vec![0.0; 3]
        );

        let reports = vec![f(&[0.8, 0.2]), f(&[0.8, 0.2])];
        let pay = market_scoring_payments(&quad, &reports, Some(&prior), e(0)).unwrap();
        // S((0.8,0.2),E1) = 1.6 - 0.68 = 0.92, S(uniform,E1) = 0.5
        assert!((pay[0] - 0.42).abs() < 1e-12);
        assert_eq!(pay[1], 0.0);

        assert_eq!(
            market_scoring_payments(&quad, &reports, None, e(0)),
            Err(MechanismError::MissingPrior)
        );
    }

    #[test]
    fn market_payments_telescope() {
        let rule = ScoringRule::spherical();
        let grid = simplex_grid(3, 7);
        let prior = grid[5].clone();
        let reports: Vec<Forecast> = grid.iter().skip(3).step_by(4).cloned().collect();
        for j in 0..3 {
            let pay = market_scoring_payments(&rule, &reports, Some(&prior), e(j)).unwrap();
            let total: f64 = pay.iter().sum();
            let expected = score(&rule, reports.last().unwrap(), e(j)).unwrap() - score(&rule, &prior, e(j)).unwrap();
            assert!((total - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn payment_table_shapes() {
        let players = vec![
            reporting(&[0.2, 0.8], &[0.2, 0.8], 1.0),
            reporting(&[0.8, 0.2], &[0.6, 0.4], 3.0),
            reporting(&[0.5, 0.5], &[0.5, 0.5], 2.0),
        ];
        let table = payment_table(&MechanismSpec::competitive(ScoringRule::quadratic()), &players).unwrap();
        assert_eq!((table.n_players(), table.n_outcomes()), (3, 2));
        for j in 0..2 {
            assert!(table.column_sum(j).abs() < 1e-12);
        }
        let market = payment_table(&MechanismSpec::market(ScoringRule::quadratic(), None), &players).unwrap();
        let total = market.column_sum(0);
        let expected = score(&ScoringRule::quadratic(), &f(&[0.5, 0.5]), e(0)).unwrap() - 0.5;
        assert!((total - expected).abs() < 1e-12);
    }

    #[test]
    fn kilgour_gerchak_and_lambert_presets() {
        let equal = vec![
            reporting(&[0.2, 0.8], &[0.2, 0.8], 2.0),
            reporting(&[0.8, 0.2], &[0.8, 0.2], 2.0),
        ];
        assert!(check_equal_wagers(&equal).is_ok());
        let kg = MechanismSpec::kilgour_gerchak(ScoringRule::quadratic());
        let table = payment_table(&kg, &equal).unwrap();
        // Equal wagers: w (S_i - mean S)
        let s0 = score(&kg.rule, &f(&[0.2, 0.8]), e(0)).unwrap();
        let s1 = score(&kg.rule, &f(&[0.8, 0.2]), e(0)).unwrap();
        assert!((table.payments[0][0] - 2.0 * (s0 - 0.5 * (s0 + s1))).abs() < 1e-15);

        let unequal = vec![equal[0].clone(), reporting(&[0.5, 0.5], &[0.5, 0.5], 1.0)];
        assert_eq!(check_equal_wagers(&unequal), Err(MechanismError::UnequalWagers));

        let lambert = MechanismSpec::lambert(&ScoringRule::quadratic(), 2).unwrap();
        let table = payment_table(&lambert, &unequal).unwrap();
        for (i, row) in table.payments.iter().enumerate() {
            for &pay in row {
                assert!(pay > -unequal[i].wager());
            }
        }
        assert!(MechanismSpec::lambert(&ScoringRule::logarithmic(), 2).is_err());
    }

    fn example_market() -> (Vec<Player>, Coalition) {
        let players = vec![
            Player::new(f(&[0.2, 0.8]), 1.0).unwrap(),
            Player::new(f(&[0.8, 0.2]), 1.0).unwrap(),
            reporting(&[0.6, 0.4], &[0.6, 0.4], 1.0),
        ];
        (players, Coalition::new(vec![0, 1], 3).unwrap())
    }

    #[test]
    fn competitive_surplus_example() {
        let (players, coalition) = example_market();
        let quad = ScoringRule::quadratic();
        let q = Forecast::uniform(2).unwrap();
        let coordinated = vec![q.clone(), q];
        let res = coalition_surplus_competitive(&quad, &players, &coalition, &coordinated).unwrap();
        assert!(!res.coalition_is_everyone);
        for s in &res.by_outcome {
            assert!((s - 0.12).abs() < 1e-12);
        }

        // Outsider report substitution leaves the surplus unchanged.
        let mut swapped = players.clone();
        swapped[2] = reporting(&[0.6, 0.4], &[0.05, 0.95], 1.0);
        let res2 = coalition_surplus_competitive(&quad, &swapped, &coalition, &coordinated).unwrap();
        for (a, b) in res.by_outcome.iter().zip(&res2.by_outcome) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn competitive_surplus_vanishes_for_everyone() {
        let (players, _) = example_market();
        let all = Coalition::everyone(3).unwrap();
        let q = Forecast::uniform(2).unwrap();
        let res = coalition_surplus_competitive(
            &ScoringRule::quadratic(),
            &players,
            &all,
            &[q.clone(), q.clone(), q],
        )
        .unwrap();
        assert!(res.coalition_is_everyone);
        assert!(res.by_outcome.iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn competitive_identity_with_arbitrage_q() {
        let (players, coalition) = example_market();
        for rule in [ScoringRule::quadratic(), ScoringRule::spherical(), ScoringRule::logarithmic()] {
            let res = arbitrage_report(&rule, &players, &coalition).unwrap();
            let q = vec![res.q.clone(); 2];
            let comp = coalition_surplus_competitive(&rule, &players, &coalition, &q).unwrap();
            let trad = traditional_surplus(&rule, &players, &coalition, &q).unwrap();
            for j in 0..2 {
                let expected = (1.0 - 2.0 / 3.0) * trad[j];
                assert!((comp.by_outcome[j] - expected).abs() <= 1e-9 * expected.abs());
                assert!((trad[j] - res.surplus_by_outcome[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn market_surplus_alternating() {
        let players = vec![
            Player::new(f(&[0.5, 0.5]), 1.0).unwrap(),
            Player::new(f(&[0.2, 0.8]), 1.0).unwrap(),
            Player::new(f(&[0.7, 0.3]), 1.0).unwrap(),
            Player::new(f(&[0.8, 0.2]), 1.0).unwrap(),
        ];
        let coalition = Coalition::new(vec![1, 3], 4).unwrap();
        let quad = ScoringRule::quadratic();
        let q = Forecast::uniform(2).unwrap();
        let coordinated = vec![q.clone(), q];
        let res = coalition_surplus_market(&quad, &players, &[0, 1, 2, 3], &coalition, &coordinated, None).unwrap();
        assert!(res.guaranteed());
        for s in &res.by_outcome {
            assert!((s - 0.36).abs() < 1e-12);
        }

        let adjacent = coalition_surplus_market(&quad, &players, &[0, 1, 3, 2], &coalition, &coordinated, None).unwrap();
        assert_eq!(adjacent.ordering_violation, Some((2, 4)));

        let truthful = vec![players[1].belief().clone(), players[3].belief().clone()];
        let zero = coalition_surplus_market(&quad, &players, &[0, 1, 2, 3], &coalition, &truthful, None).unwrap();
        assert_eq!(zero.by_outcome, vec![0.0, 0.0]);
    }

    #[test]
    fn market_ordering_validation() {
        let (players, coalition) = example_market();
        let q = Forecast::uniform(2).unwrap();
        let coordinated = vec![q.clone(), q];
        let quad = ScoringRule::quadratic();
        for bad in [&[0usize, 0, 1][..], &[0, 2][..], &[0, 1, 5][..]] {
            assert!(matches!(
                coalition_surplus_market(&quad, &players, bad, &coalition, &coordinated, None),
                Err(MechanismError::InvalidOrdering(_))
            ));
        }
    }

    #[test]
    fn closed_form_matches_mechanism_surplus() {
        let (players, coalition) = example_market();
        let gl = ScoringRule::generalized_logarithmic(0.05).unwrap();
        let res = arbitrage_report(&gl, &players, &coalition).unwrap();
        let closed = closed_form_surplus(&gl, &players, &coalition).unwrap();
        let trad = traditional_surplus(&gl, &players, &coalition, &[res.q.clone(), res.q]).unwrap();
        for s in trad {
            assert!((s - closed).abs() <= 1e-9 * closed);
        }
    }

    #[test]
    fn lone_player_competitive_properness() {
        let quad = ScoringRule::quadratic();
        let others = [f(&[0.1, 0.6, 0.3]), f(&[0.5, 0.25, 0.25])];
        let belief = f(&[0.3, 0.3, 0.4]);
        let wagers = [2.0, 1.0, 1.5];
        let expected_payment = |r: &Forecast| -> f64 {
            let reports = vec![r, &others[0], &others[1]];
            let table = payment_table_for(&MechanismSpec::competitive(quad.clone()), &wagers, &reports).unwrap();
            (0..3).map(|j| belief.get(j) * table.payments[0][j]).sum()
        };
        let truthful = expected_payment(&belief);
        for r in simplex_grid(3, 40) {
            if r.max_distance(&belief) > 1e-12 {
                assert!(expected_payment(&r) < truthful);
            }
        }
        // Same maximizer as the underlying rule.
        assert!(expected_score(&quad, &belief, &belief).unwrap() > expected_score(&quad, &others[0], &belief).unwrap());
    }
}
