//! Scenario files: the JSON schema and its validation into library types.
//!
//! Player, coalition, ordering, and outcome indices are 1-based in files and
//! messages; everything past [`Scenario::validate`] is 0-based.

use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arbitrage::{Coalition, Player};
use crate::mechanisms::{check_equal_wagers, MechanismSpec};
use crate::scoring::{ConvexGenerator, ScoringRule};
use crate::sim::{BeliefSampler, CoalitionStrategy, SweepConfig, TruthDistribution};
use crate::simplex::Forecast;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub event: EventSpec,
    pub rule: RuleSpec,
    #[serde(default)]
    pub mechanism: MechanismName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub market: Option<MarketSpec>,
    #[serde(default)]
    pub players: Vec<PlayerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coalition: Option<CoalitionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKindSpec {
    Quadratic,
    Logarithmic,
    #[serde(alias = "genlog")]
    GeneralizedLogarithmic,
    Spherical,
    CustomBinary,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    pub kind: RuleKindSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Quadratic,
    NegEntropy,
    Power { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismName {
    #[default]
    Traditional,
    Competitive,
    KilgourGerchak,
    Lambert,
    Market,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordering: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerSpec {
    pub belief: Vec<f64>,
    pub wager: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoalitionSpec {
    pub members: Vec<usize>,
    /// Identical report to check instead of the constructed one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_override: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    Sweep,
    Intermediary,
    MarketSession,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategySpec {
    #[default]
    Equalizing,
    Truthful,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    BetaBinary { alpha: f64, beta: f64 },
    Dirichlet { alpha: Vec<f64> },
    FiniteMixture { points: Vec<Vec<f64>>, weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub mode: SimulationMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fractions: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Outcome distribution for realized surplus; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategySpec>,
}

/// A scenario problem, located by JSON path.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        ValidationError {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ValidationError {}

pub const DEFAULT_SWEEP_N: usize = 100;
pub const DEFAULT_SWEEP_TRIALS: usize = 2000;

#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub mode: SimulationMode,
    pub sampler: Option<BeliefSampler>,
    pub config: SweepConfig,
    pub strategy: CoalitionStrategy,
}

/// A scenario after validation, in library types.
#[derive(Debug, Clone)]
pub struct Model {
    pub m: usize,
    pub labels: Vec<String>,
    pub mechanism_name: MechanismName,
    pub mechanism: MechanismSpec,
    pub players: Vec<Player>,
    pub coalition: Option<Coalition>,
    pub q_override: Option<Forecast>,
    /// 0-based reporting order for market scoring.
    pub ordering: Option<Vec<usize>>,
    pub simulation: Option<SimulationPlan>,
}

impl Model {
    pub fn rule(&self) -> &ScoringRule {
        &self.mechanism.rule
    }
}

fn forecast(raw: &[f64], m: usize, path: &str) -> Result<Forecast, ValidationError> {
    if raw.len() != m {
        return Err(ValidationError::new(
            path,
            format!("expected {m} probabilities, got {}", raw.len()),
        ));
    }
    Forecast::new(raw.to_vec()).map_err(|e| ValidationError::new(path, e))
}

fn one_based(index: usize, n: usize, path: &str, what: &str) -> Result<usize, ValidationError> {
    if index == 0 || index > n {
        return Err(ValidationError::new(
            path,
            format!("{what} {index} is out of range 1..={n}"),
        ));
    }
    Ok(index - 1)
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ValidationError> {
        serde_json::from_str(text).map_err(|e| ValidationError::new("$", e))
    }

    /// Canonical JSON: keys sorted, compact.
    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("scenario serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    pub fn validate(&self) -> Result<Model, ValidationError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ValidationError::new(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let m = self.event.m;
        if m < 2 {
            return Err(ValidationError::new("event.m", "need at least 2 states"));
        }
        let labels = match &self.event.labels {
            Some(l) if l.len() != m => {
                return Err(ValidationError::new(
                    "event.labels",
                    format!("expected {m} labels, got {}", l.len()),
                ))
            }
            Some(l) => l.clone(),
            None => (1..=m).map(|j| format!("E{j}")).collect(),
        };

        let rule = self.rule.build(m)?;

        let players = self
            .players
            .iter()
            .enumerate()
            .map(|(i, p)| p.build(m, i))
            .collect::<Result<Vec<_>, _>>()?;

        let prior = match self.market.as_ref().and_then(|mk| mk.prior.as_ref()) {
            Some(raw) => Some(forecast(raw, m, "market.prior")?),
            None => None,
        };
        let mechanism = match self.mechanism {
            MechanismName::Traditional => MechanismSpec::traditional(rule),
            MechanismName::Competitive => MechanismSpec::competitive(rule),
            MechanismName::KilgourGerchak => {
                check_equal_wagers(&players).map_err(|e| ValidationError::new("players", e))?;
                MechanismSpec::kilgour_gerchak(rule)
            }
            MechanismName::Lambert => MechanismSpec::lambert(&rule, m)
                .map_err(|e| ValidationError::new("mechanism", e))?,
            MechanismName::Market => MechanismSpec::market(rule, prior),
        };

        // Market sessions sample their players, so indices refer to the
        // simulated population.
        let population = match &self.simulation {
            Some(sim) if sim.mode == SimulationMode::MarketSession => sim.n.unwrap_or(DEFAULT_SWEEP_N),
            _ => players.len(),
        };
        let (coalition, q_override) = match &self.coalition {
            Some(spec) => {
                let n = population;
                let members = spec
                    .members
                    .iter()
                    .enumerate()
                    .map(|(k, &i)| one_based(i, n, &format!("coalition.members[{k}]"), "player"))
                    .collect::<Result<Vec<_>, _>>()?;
                let coalition =
                    Coalition::new(members, n).map_err(|e| ValidationError::new("coalition.members", e))?;
                let q = match &spec.q_override {
                    Some(raw) => Some(forecast(raw, m, "coalition.q_override")?),
                    None => None,
                };
                (Some(coalition), q)
            }
            None => (None, None),
        };

        let ordering = match self.market.as_ref().and_then(|mk| mk.ordering.as_ref()) {
            Some(order) => {
                let n = population;
                Some(
                    order
                        .iter()
                        .enumerate()
                        .map(|(k, &i)| one_based(i, n, &format!("market.ordering[{k}]"), "player"))
                        .collect::<Result<Vec<_>, _>>()?,
                )
            }
            None => None,
        };

        let simulation = match &self.simulation {
            Some(sim) => Some(sim.build(m)?),
            None => None,
        };

        Ok(Model {
            m,
            labels,
            mechanism_name: self.mechanism,
            mechanism,
            players,
            coalition,
            q_override,
            ordering,
            simulation,
        })
    }
}

/// SHA-256 of the canonical (key-sorted, compact) form of a JSON document,
/// hex encoded. Key order in the source does not matter.
pub fn scenario_digest(text: &str) -> Result<String, ValidationError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| ValidationError::new("$", e))?;
    let canonical = serde_json::to_string(&value).map_err(|e| ValidationError::new("$", e))?;
    Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
}

impl RuleSpec {
    fn build(&self, m: usize) -> Result<ScoringRule, ValidationError> {
        if self.l.is_some() && self.kind != RuleKindSpec::GeneralizedLogarithmic {
            return Err(ValidationError::new(
                "rule.l",
                "floor only applies to the generalized_logarithmic rule",
            ));
        }
        if self.generator.is_some() != (self.kind == RuleKindSpec::CustomBinary) {
            return Err(ValidationError::new(
                "rule.generator",
                "a generator is required for custom_binary and not allowed otherwise",
            ));
        }
        let base = match self.kind {
            RuleKindSpec::Quadratic => ScoringRule::quadratic(),
            RuleKindSpec::Logarithmic => ScoringRule::logarithmic(),
            RuleKindSpec::GeneralizedLogarithmic => {
                ScoringRule::generalized_logarithmic(self.l.unwrap_or(0.0))
                    .map_err(|e| ValidationError::new("rule.l", e))?
            }
            RuleKindSpec::Spherical => ScoringRule::spherical(),
            RuleKindSpec::Linear => ScoringRule::linear(),
            RuleKindSpec::CustomBinary => {
                if m != 2 {
                    return Err(ValidationError::new(
                        "rule.kind",
                        format!("custom_binary needs a binary event, got m = {m}"),
                    ));
                }
                let gen = match self.generator.as_ref().expect("checked above") {
                    GeneratorSpec::Quadratic => ConvexGenerator::quadratic(),
                    GeneratorSpec::NegEntropy => ConvexGenerator::neg_entropy(),
                    GeneratorSpec::Power { alpha } => ConvexGenerator::power(*alpha)
                        .map_err(|e| ValidationError::new("rule.generator.alpha", e))?,
                };
                ScoringRule::custom_binary(gen)
            }
        };
        let rule = base
            .with_scale(self.b.unwrap_or(1.0))
            .map_err(|e| ValidationError::new("rule.b", e))?;
        match &self.a {
            Some(a) if a.len() != m => Err(ValidationError::new(
                "rule.a",
                format!("expected {m} offsets, got {}", a.len()),
            )),
            Some(a) => rule
                .with_offsets(a.clone())
                .map_err(|e| ValidationError::new("rule.a", e)),
            None => Ok(rule),
        }
    }
}

impl PlayerSpec {
    fn build(&self, m: usize, i: usize) -> Result<Player, ValidationError> {
        let belief = forecast(&self.belief, m, &format!("players[{i}].belief"))?;
        let player = Player::new(belief, self.wager)
            .map_err(|e| ValidationError::new(format!("players[{i}].wager"), e))?;
        match &self.report {
            Some(raw) => {
                let report = forecast(raw, m, &format!("players[{i}].report"))?;
                player
                    .with_report(report)
                    .map_err(|e| ValidationError::new(format!("players[{i}].report"), e))
            }
            None => Ok(player),
        }
    }
}

impl SamplerSpec {
    fn build(&self) -> Result<BeliefSampler, ValidationError> {
        let path = "simulation.sampler";
        let err = |e| ValidationError::new(path, e);
        match self {
            SamplerSpec::BetaBinary { alpha, beta } => BeliefSampler::beta_binary(*alpha, *beta).map_err(err),
            SamplerSpec::Dirichlet { alpha } => BeliefSampler::dirichlet(alpha.clone()).map_err(err),
            SamplerSpec::FiniteMixture { points, weights } => {
                let points = points
                    .iter()
                    .enumerate()
                    .map(|(k, p)| {
                        Forecast::new(p.clone())
                            .map_err(|e| ValidationError::new(format!("{path}.points[{k}]"), e))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                BeliefSampler::finite_mixture(points, weights.clone()).map_err(err)
            }
        }
    }
}

impl SimulationSpec {
    fn build(&self, m: usize) -> Result<SimulationPlan, ValidationError> {
        let sampler = match &self.sampler {
            Some(s) => {
                let sampler = s.build()?;
                if sampler.states() != m {
                    return Err(ValidationError::new(
                        "simulation.sampler",
                        format!("sampler draws {} states, event has {m}", sampler.states()),
                    ));
                }
                Some(sampler)
            }
            None => None,
        };
        if matches!(self.mode, SimulationMode::Sweep | SimulationMode::MarketSession) && sampler.is_none() {
            return Err(ValidationError::new("simulation.sampler", "required for this mode"));
        }
        let fractions = self.fractions.clone().unwrap_or_default();
        if self.mode == SimulationMode::Sweep {
            if fractions.is_empty() {
                return Err(ValidationError::new("simulation.fractions", "required for sweeps"));
            }
            if let Some((k, f)) = fractions.iter().enumerate().find(|(_, f)| !(**f > 0.0 && **f <= 1.0)) {
                return Err(ValidationError::new(
                    format!("simulation.fractions[{k}]"),
                    format!("{f} is outside (0, 1]"),
                ));
            }
        }
        let truth = match &self.truth {
            Some(raw) => TruthDistribution::Fixed(forecast(raw, m, "simulation.truth")?),
            None => TruthDistribution::Uniform,
        };
        let trials = self.trials.unwrap_or(DEFAULT_SWEEP_TRIALS);
        if trials == 0 {
            return Err(ValidationError::new("simulation.trials", "must be at least 1"));
        }
        Ok(SimulationPlan {
            mode: self.mode,
            sampler,
            config: SweepConfig {
                n: self.n.unwrap_or(DEFAULT_SWEEP_N),
                fractions,
                trials,
                seed: self.seed,
                truth,
            },
            strategy: match self.strategy.unwrap_or_default() {
                StrategySpec::Equalizing => CoalitionStrategy::Equalizing,
                StrategySpec::Truthful => CoalitionStrategy::Truthful,
            },
        })
    }
}
