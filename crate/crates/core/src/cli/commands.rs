//! The four subcommands. Each returns a [`Rendered`] result; writing it out
//! and choosing the exit code happens in the caller.

use serde::Serialize;

use super::scenario::{MechanismName, Model, SimulationMode, ValidationError};
use super::{Format, Rendered, EXIT_CHECK_FAILED, EXIT_NO_ARBITRAGE, EXIT_OK};
use crate::arbitrage::{
    arbitrage_report, closed_form_surplus, verify_dominance_oracle, ArbitrageError, ArbitrageResult,
    Coalition, DominanceVerdict,
};
use crate::mechanisms::{
    coalition_surplus_competitive, coalition_surplus_market, find_ordering_violation, payment_table,
    payment_table_for, traditional_surplus, MechanismError, MechanismKind, MechanismSpec, PaymentTable,
};
use crate::scoring::check_strict_properness;
use crate::sim::{
    expected_surplus_sweep, intermediary_run, market_session, IntermediaryRun, MarketSession, SimError,
    SweepResult,
};
use crate::simplex::{Forecast, OutcomeIndex};

/// Relative tolerance for comparing two computations of the same surplus.
pub const CONSISTENCY_TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= CONSISTENCY_TOL * a.abs().max(b.abs()).max(1e-12)
}

fn arbitrage_error(e: ArbitrageError) -> ValidationError {
    match e {
        ArbitrageError::DegenerateBelief { player, .. } => {
            ValidationError::new(format!("players[{}].belief", player - 1), e)
        }
        ArbitrageError::UnsupportedRule(_) | ArbitrageError::Rule(_) => ValidationError::new("rule", e),
        other => ValidationError::new("coalition", other),
    }
}

fn mechanism_error(e: MechanismError) -> ValidationError {
    match e {
        MechanismError::MissingReport(player) => ValidationError::new(
            format!("players[{}].report", player - 1),
            format!("player {player} has no report"),
        ),
        MechanismError::Arbitrage(inner) => arbitrage_error(inner),
        MechanismError::InvalidOrdering(_) => ValidationError::new("market.ordering", e),
        MechanismError::SinglePlayer => ValidationError::new("players", e),
        other => ValidationError::new("mechanism", other),
    }
}

fn sim_error(e: SimError) -> ValidationError {
    match e {
        SimError::Arbitrage(inner) => arbitrage_error(inner),
        SimError::Mechanism(inner) => mechanism_error(inner),
        SimError::InvalidOrdering(_) => ValidationError::new("market.ordering", e),
        SimError::FractionOutOfRange(_) => ValidationError::new("simulation.fractions", e),
        SimError::PopulationTooSmall(_) => ValidationError::new("simulation.n", e),
        SimError::Unsupported(_) => ValidationError::new("mechanism", e),
        other => ValidationError::new("simulation", other),
    }
}

fn require_coalition(model: &Model) -> Result<&Coalition, ValidationError> {
    let coalition = model
        .coalition
        .as_ref()
        .ok_or_else(|| ValidationError::new("coalition", "this command needs a coalition"))?;
    check_members_listed(model, coalition)?;
    Ok(coalition)
}

/// Coalition indices are checked against the simulated population for market
/// sessions; everything else needs the members in the `players` list.
fn check_members_listed(model: &Model, coalition: &Coalition) -> Result<(), ValidationError> {
    let n = model.players.len();
    match coalition.members().iter().position(|&i| i >= n) {
        Some(k) => Err(ValidationError::new(
            format!("coalition.members[{k}]"),
            format!("player {} is not in the players list ({n} players)", coalition.members()[k] + 1),
        )),
        None => Ok(()),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    for line in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        let fields: Vec<String> = line.iter().map(|f| csv_field(f)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].len())
                .chain(std::iter::once(header[c].len()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for line in std::iter::once(header).chain(rows.iter().map(Vec::as_slice)) {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .map(|(cell, &w)| format!("{cell:<w$}"))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

fn grid(format: Format, header: &[String], rows: &[Vec<String>]) -> String {
    match format {
        Format::Table => table(header, rows),
        _ => csv(header, rows),
    }
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn forecast_text(q: &Forecast) -> String {
    let parts: Vec<String> = q.probs().iter().map(|x| num(*x)).collect();
    format!("({})", parts.join(", "))
}

#[derive(Debug, Clone, Serialize)]
pub struct ScorePayload {
    /// 1-based outcome indices, one per column of `payments`.
    pub outcomes: Vec<usize>,
    pub table: PaymentTable,
}

pub fn cmd_score(model: &Model, outcome: Option<usize>, format: Format) -> Result<Rendered, ValidationError> {
    let full = payment_table(&model.mechanism, &model.players).map_err(mechanism_error)?;
    let columns: Vec<usize> = match outcome {
        Some(j) => {
            let idx = OutcomeIndex::from_one_based(j, model.m)
                .map_err(|e| ValidationError::new("--outcome", e))?;
            vec![idx.index()]
        }
        None => (0..model.m).collect(),
    };
    let table = PaymentTable {
        payments: full
            .payments
            .iter()
            .map(|row| columns.iter().map(|&j| row[j]).collect())
            .collect(),
    };
    let payload = ScorePayload {
        outcomes: columns.iter().map(|j| j + 1).collect(),
        table,
    };
    let body = match format {
        Format::Json => None,
        _ => {
            let header: Vec<String> = std::iter::once("player".to_string())
                .chain(columns.iter().map(|&j| model.labels[j].clone()))
                .collect();
            let rows: Vec<Vec<String>> = payload
                .table
                .payments
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    std::iter::once((i + 1).to_string())
                        .chain(row.iter().map(|x| num(*x)))
                        .collect()
                })
                .collect();
            Some(grid(format, &header, &rows))
        }
    };
    Ok(Rendered::new(EXIT_OK, "score", &payload, body, String::new()))
}

#[derive(Debug, Clone, Serialize)]
pub struct ArbitragePayload {
    pub rule: &'static str,
    pub mechanism: MechanismKind,
    /// 1-based player ids.
    pub members: Vec<usize>,
    pub result: ArbitrageResult,
    pub closed_form_surplus: Option<f64>,
    pub verdict: DominanceVerdict,
    /// Coalition surplus under the scenario's mechanism at the same `q`.
    pub mechanism_surplus_by_outcome: Vec<f64>,
    pub ordering_violation: Option<(usize, usize)>,
}

/// Per-outcome surplus and any back-to-back member pair.
type MechanismSurplus = (Vec<f64>, Option<(usize, usize)>);

fn mechanism_surplus(
    model: &Model,
    coalition: &Coalition,
    q: &Forecast,
) -> Result<MechanismSurplus, ValidationError> {
    let rule = model.rule();
    let coordinated = vec![q.clone(); coalition.len()];
    match model.mechanism.kind {
        MechanismKind::Traditional => Ok((
            traditional_surplus(rule, &model.players, coalition, &coordinated).map_err(mechanism_error)?,
            None,
        )),
        MechanismKind::SelfFinancedCompetitive => Ok((
            coalition_surplus_competitive(rule, &model.players, coalition, &coordinated)
                .map_err(mechanism_error)?
                .by_outcome,
            None,
        )),
        MechanismKind::MarketScoring => {
            let ordering = model
                .ordering
                .clone()
                .unwrap_or_else(|| (0..model.players.len()).collect());
            let prior = model.mechanism.prior_or_uniform(model.m).map_err(mechanism_error)?;
            let s = coalition_surplus_market(rule, &model.players, &ordering, coalition, &coordinated, Some(&prior))
                .map_err(mechanism_error)?;
            Ok((s.by_outcome, s.ordering_violation))
        }
    }
}

pub fn cmd_arbitrage(model: &Model, format: Format) -> Result<Rendered, ValidationError> {
    let coalition = require_coalition(model)?;
    let rule = model.rule();
    let result = arbitrage_report(rule, &model.players, coalition).map_err(arbitrage_error)?;
    let closed = if result.agreement {
        Some(0.0)
    } else {
        match closed_form_surplus(rule, &model.players, coalition) {
            Ok(v) => Some(v),
            Err(ArbitrageError::UnsupportedRule(_)) => None,
            Err(e) => return Err(arbitrage_error(e)),
        }
    };
    let verdict = verify_dominance_oracle(rule, &model.players, coalition, &result.q);
    let (mech_surplus, ordering_violation) = if result.agreement {
        (vec![0.0; model.m], None)
    } else {
        mechanism_surplus(model, coalition, &result.q)?
    };
    let payload = ArbitragePayload {
        rule: rule.kind().name(),
        mechanism: model.mechanism.kind,
        members: coalition.members().iter().map(|i| i + 1).collect(),
        result,
        closed_form_surplus: closed,
        verdict,
        mechanism_surplus_by_outcome: mech_surplus,
        ordering_violation,
    };
    let code = if payload.result.agreement { EXIT_NO_ARBITRAGE } else { EXIT_OK };
    let verdict_line = verdict_text(&payload.verdict);
    let mut stderr = String::new();
    if payload.result.agreement {
        stderr.push_str("coalition members agree: no arbitrage\n");
    }
    let body = match format {
        Format::Json => None,
        Format::Csv => {
            stderr.push_str(&format!("verdict: {verdict_line}\n"));
            Some(csv(&arbitrage_header(), &arbitrage_rows(model, &payload)))
        }
        Format::Table => {
            let mut out = format!(
                "rule: {}\nmechanism: {}\ncoalition: {:?}\nq: {}\n",
                payload.rule,
                serde_json::to_value(payload.mechanism).expect("serializes").as_str().unwrap_or(""),
                payload.members,
                forecast_text(&payload.result.q),
            );
            if let Some(c) = payload.closed_form_surplus {
                out.push_str(&format!("closed-form surplus: {}\n", num(c)));
            }
            out.push_str(&format!("verdict: {verdict_line}\n"));
            if let Some((a, b)) = payload.ordering_violation {
                out.push_str(&format!("warning: members {a} and {b} report back-to-back; no guarantee\n"));
            }
            out.push('\n');
            out.push_str(&table(&arbitrage_header(), &arbitrage_rows(model, &payload)));
            Some(out)
        }
    };
    Ok(Rendered::new(code, "arbitrage", &payload, body, stderr))
}

fn arbitrage_header() -> Vec<String> {
    ["outcome", "q", "surplus", "mechanism_surplus"].map(String::from).to_vec()
}

fn arbitrage_rows(model: &Model, p: &ArbitragePayload) -> Vec<Vec<String>> {
    (0..model.m)
        .map(|j| {
            vec![
                model.labels[j].clone(),
                num(p.result.q.probs()[j]),
                num(p.result.surplus_by_outcome[j]),
                num(p.mechanism_surplus_by_outcome[j]),
            ]
        })
        .collect()
}

fn verdict_text(v: &DominanceVerdict) -> String {
    match v {
        DominanceVerdict::Dominates { .. } => "dominates".into(),
        DominanceVerdict::Ties { .. } => "ties".into(),
        DominanceVerdict::Fails { outcome, surplus } => {
            format!("fails at E{outcome} (surplus {})", num(surplus[outcome - 1]))
        }
        DominanceVerdict::Invalid { reason } => format!("invalid ({reason})"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            status: if passed { CheckStatus::Pass } else { CheckStatus::Fail },
            detail: detail.into(),
        }
    }

    fn skip(name: impl Into<String>, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            status: CheckStatus::Skip,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

/// Runs every check that applies to the scenario.
pub fn verify_checks(model: &Model, resolution: usize) -> Vec<Check> {
    let rule = model.rule();
    let players = &model.players;
    let mut checks = Vec::new();

    for (i, p) in players.iter().enumerate() {
        let r = check_strict_properness(rule, p.belief(), resolution);
        let detail = format!(
            "max margin {} over {} grid reports ({} skipped)",
            num(r.max_margin),
            r.evaluated,
            r.skipped
        );
        checks.push(Check::new(format!("properness.player{}", i + 1), r.passed, detail));
    }

    if let Some(coalition) = &model.coalition {
        let constructed = arbitrage_report(rule, players, coalition);
        let agreement = matches!(&constructed, Ok(a) if a.agreement);
        let q = match (&model.q_override, &constructed) {
            (Some(q), _) => Ok(q.clone()),
            (None, Ok(a)) => Ok(a.q.clone()),
            (None, Err(e)) => Err(e.to_string()),
        };
        match q {
            Ok(q) => {
                let verdict = verify_dominance_oracle(rule, players, coalition, &q);
                let source = if model.q_override.is_some() { "override" } else { "constructed" };
                let detail = format!("{source} q {}: {}", forecast_text(&q), verdict_text(&verdict));
                let check = match verdict {
                    DominanceVerdict::Ties { .. } if agreement && model.q_override.is_none() => {
                        Check::skip("dominance", format!("{detail}; members agree"))
                    }
                    v => Check::new("dominance", v.dominates(), detail),
                };
                checks.push(check);
            }
            Err(reason) => checks.push(Check::skip("dominance", reason)),
        }

        match (&constructed, closed_form_surplus(rule, players, coalition)) {
            (Ok(a), Ok(closed)) if !a.agreement => {
                let worst = a
                    .surplus_by_outcome
                    .iter()
                    .copied()
                    .filter(|s| !close(*s, closed))
                    .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |x: f64| x.max(s))));
                let detail = format!("closed form {}", num(closed));
                checks.push(match worst {
                    None => Check::new("closed_form", true, detail),
                    Some(s) => Check::new("closed_form", false, format!("{detail} vs direct {}", num(s))),
                });
            }
            (Ok(_), Ok(_)) => checks.push(Check::skip("closed_form", "members agree")),
            (_, Err(e)) => checks.push(Check::skip("closed_form", e.to_string())),
            (Err(e), _) => checks.push(Check::skip("closed_form", e.to_string())),
        }

        checks.push(match &constructed {
            Ok(a) if coalition.len() < players.len() => competitive_identity_check(model, coalition, &a.q),
            Ok(_) => Check::skip("competitive_identity", "coalition includes every player"),
            Err(e) => Check::skip("competitive_identity", e.to_string()),
        });

        if model.mechanism.kind == MechanismKind::MarketScoring {
            let ordering = model
                .ordering
                .clone()
                .unwrap_or_else(|| (0..players.len()).collect());
            let violation = find_ordering_violation(&ordering, coalition);
            checks.push(match violation {
                None => Check::new("market_ordering", true, "no two members report back-to-back"),
                Some((a, b)) => Check::new(
                    "market_ordering",
                    false,
                    format!("players {a} and {b} report back-to-back"),
                ),
            });
        }
    }

    if players.len() >= 2 {
        let spec = MechanismSpec::competitive(rule.clone());
        checks.push(match payment_table_with(&spec, model) {
            Ok(t) => {
                let worst = (0..model.m).map(|j| t.column_sum(j).abs()).fold(0.0, f64::max);
                let total_wager: f64 = players.iter().map(|p| p.wager()).sum();
                Check::new(
                    "self_financing",
                    worst <= CONSISTENCY_TOL * total_wager.max(1.0),
                    format!("largest column imbalance {}", num(worst)),
                )
            }
            Err(e) => Check::skip("self_financing", e.to_string()),
        });
    }

    if model.mechanism_name == MechanismName::Lambert {
        checks.push(match payment_table_with(&model.mechanism, model) {
            Ok(t) => {
                let mut ok = true;
                for (i, row) in t.payments.iter().enumerate() {
                    let w = players[i].wager();
                    ok &= row.iter().all(|&x| x >= -w - CONSISTENCY_TOL * w);
                }
                Check::new("lambert_floor", ok, "no player loses more than their wager")
            }
            Err(e) => Check::skip("lambert_floor", e.to_string()),
        });
    }

    checks
}

/// Payments when every player submits their report, or their belief if none.
fn payment_table_with(spec: &MechanismSpec, model: &Model) -> Result<PaymentTable, MechanismError> {
    let wagers: Vec<f64> = model.players.iter().map(|p| p.wager()).collect();
    let reports: Vec<&Forecast> = model.players.iter().map(|p| p.report_or_belief()).collect();
    payment_table_for(spec, &wagers, &reports)
}

fn competitive_identity_check(model: &Model, coalition: &Coalition, q: &Forecast) -> Check {
    let rule = model.rule();
    let players = &model.players;
    let coordinated = vec![q.clone(); coalition.len()];
    let trad = traditional_surplus(rule, players, coalition, &coordinated);
    let comp = coalition_surplus_competitive(rule, players, coalition, &coordinated);
    match (trad, comp) {
        (Ok(trad), Ok(comp)) => {
            let w_n: f64 = players.iter().map(|p| p.wager()).sum();
            let factor = 1.0 - coalition.wager(players) / w_n;
            let ok = trad
                .iter()
                .zip(&comp.by_outcome)
                .all(|(t, c)| close(factor * t, *c));
            Check::new(
                "competitive_identity",
                ok,
                format!("factor {} applied to traditional surplus", num(factor)),
            )
        }
        (Err(e), _) | (_, Err(e)) => Check::skip("competitive_identity", e.to_string()),
    }
}

pub fn cmd_verify(model: &Model, resolution: usize, format: Format) -> Result<Rendered, ValidationError> {
    if let Some(c) = &model.coalition {
        check_members_listed(model, c)?;
    }
    let checks = verify_checks(model, resolution);
    let passed = checks.iter().all(|c| c.status != CheckStatus::Fail);
    let report = VerifyReport { passed, checks };
    let body = match format {
        Format::Json => None,
        _ => {
            let header = ["check", "status", "detail"].map(String::from).to_vec();
            let rows: Vec<Vec<String>> = report
                .checks
                .iter()
                .map(|c| {
                    let status = serde_json::to_value(c.status).expect("serializes");
                    vec![c.name.clone(), status.as_str().unwrap_or("").to_string(), c.detail.clone()]
                })
                .collect();
            Some(grid(format, &header, &rows))
        }
    };
    let code = if passed { EXIT_OK } else { EXIT_CHECK_FAILED };
    let stderr = if passed {
        String::new()
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| c.status == CheckStatus::Fail)
            .map(|c| c.name.as_str())
            .collect();
        format!("failed checks: {}\n", failed.join(" "))
    };
    Ok(Rendered::new(code, "verify", &report, body, stderr))
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SimulatePayload {
    Sweep(SweepResult),
    Intermediary(IntermediaryRun),
    MarketSession(MarketSession),
}

impl SimulatePayload {
    pub fn to_csv(&self, labels: &[String]) -> String {
        match self {
            SimulatePayload::Sweep(s) => s.to_csv(),
            SimulatePayload::Intermediary(run) => {
                let rows: Vec<Vec<String>> = run
                    .profit_by_outcome
                    .iter()
                    .enumerate()
                    .map(|(j, p)| vec![labels[j].clone(), num(run.q.probs()[j]), num(*p)])
                    .collect();
                csv(&["outcome", "q", "profit"].map(String::from), &rows)
            }
            SimulatePayload::MarketSession(s) => {
                let rows: Vec<Vec<String>> = s
                    .surplus_by_outcome
                    .iter()
                    .enumerate()
                    .map(|(j, v)| vec![labels[j].clone(), num(s.q.probs()[j]), num(*v)])
                    .collect();
                csv(&["outcome", "q", "surplus"].map(String::from), &rows)
            }
        }
    }
}

/// Runs the scenario's simulation block. `seed` replaces the scenario seed.
pub fn run_simulation(model: &Model, seed: Option<u64>, scenario_id: &str) -> Result<SimulatePayload, ValidationError> {
    let plan = model
        .simulation
        .as_ref()
        .ok_or_else(|| ValidationError::new("simulation", "this command needs a simulation block"))?;
    let mut config = plan.config.clone();
    if let Some(s) = seed {
        config.seed = s;
    }
    match plan.mode {
        SimulationMode::Sweep => {
            let sampler = plan.sampler.as_ref().expect("validated");
            expected_surplus_sweep(&model.mechanism, sampler, &config)
                .map(SimulatePayload::Sweep)
                .map_err(sim_error)
        }
        SimulationMode::Intermediary => {
            let coalition = require_coalition(model)?;
            intermediary_run(&model.mechanism, &model.players, coalition, scenario_id, config.seed)
                .map(SimulatePayload::Intermediary)
                .map_err(sim_error)
        }
        SimulationMode::MarketSession => {
            let coalition = model
                .coalition
                .as_ref()
                .ok_or_else(|| ValidationError::new("coalition", "market sessions need a coalition"))?;
            let sampler = plan.sampler.as_ref().expect("validated");
            let ordering = model.ordering.clone().unwrap_or_else(|| (0..config.n).collect());
            market_session(&model.mechanism, &ordering, coalition, sampler, config.seed, plan.strategy)
                .map(SimulatePayload::MarketSession)
                .map_err(sim_error)
        }
    }
}

pub fn cmd_simulate(
    model: &Model,
    seed: Option<u64>,
    scenario_id: &str,
    format: Format,
) -> Result<Rendered, ValidationError> {
    let payload = run_simulation(model, seed, scenario_id)?;
    let mut stderr = String::new();
    match &payload {
        SimulatePayload::Sweep(s) => {
            stderr.push_str(&format!("argmax fraction: {}\n", num(s.argmax_fraction)));
            if let Some(v) = s.fit.vertex {
                stderr.push_str(&format!("fitted vertex: {}\n", num(v)));
            }
        }
        SimulatePayload::Intermediary(run) => {
            if run.no_arbitrage {
                stderr.push_str("clients agree: no arbitrage\n");
            }
            stderr.push_str(&format!("minimum profit: {}\n", num(run.min_profit)));
        }
        SimulatePayload::MarketSession(s) => {
            if let Some((a, b)) = s.ordering_violation {
                stderr.push_str(&format!("warning: members {a} and {b} report back-to-back\n"));
            }
        }
    }
    let csv_text = payload.to_csv(&model.labels);
    let body = match format {
        Format::Json => None,
        Format::Csv => Some(csv_text.clone()),
        Format::Table => {
            let mut lines = csv_text.lines().map(|l| l.split(',').map(String::from).collect::<Vec<_>>());
            let header = lines.next().unwrap_or_default();
            let rows: Vec<Vec<String>> = lines.collect();
            Some(table(&header, &rows))
        }
    };
    let mut rendered = Rendered::new(EXIT_OK, "simulate", &payload, body, stderr);
    rendered.csv = Some(csv_text);
    Ok(rendered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::scenario::Scenario;

    fn model(text: &str) -> Model {
        Scenario::from_json(text).unwrap().validate().unwrap()
    }

    const EX1: &str = r#"{
        "schema_version": 1,
        "event": {"m": 2},
        "rule": {"kind": "quadratic"},
        "players": [
            {"belief": [0.2, 0.8], "wager": 1.0, "report": [0.2, 0.8]},
            {"belief": [0.8, 0.2], "wager": 1.0, "report": [0.8, 0.2]}
        ],
        "coalition": {"members": [1, 2]}
    }"#;

    #[test]
    fn score_csv_has_one_row_per_player() {
        let out = cmd_score(&model(EX1), Some(1), Format::Csv).unwrap();
        let text = out.body.unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("player,E1\n"));
    }

    #[test]
    fn arbitrage_opposed_pair() {
        let out = cmd_arbitrage(&model(EX1), Format::Csv).unwrap();
        assert_eq!(out.code, EXIT_OK);
        let v = &out.payload;
        assert_eq!(v["verdict"]["verdict"], "dominates");
        let c = v["closed_form_surplus"].as_f64().unwrap();
        assert!((c - 0.36).abs() < 1e-12);
    }

    #[test]
    fn verify_passes_for_example_one() {
        let out = cmd_verify(&model(EX1), 20, Format::Csv).unwrap();
        assert_eq!(out.code, EXIT_OK, "{}", out.body.unwrap());
    }

    #[test]
    fn csv_quotes_fields_with_commas() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}
