//! Scoring rules: quadratic, logarithmic, generalized logarithmic, spherical,
//! and binary rules built from a convex generator `G` via the Savage form
//!
//! ```text
//! S(r, E1) = G(r) + (1 - r) G'(r)
//! S(r, E2) = G(r) - r G'(r)
//! ```

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::simplex::{simplex_grid, Forecast, OutcomeIndex};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleError {
    #[error("log of zero: report assigns probability 0 to observed state E{outcome}")]
    LogOfZero { outcome: usize },
    #[error("dimension mismatch: expected {expected} states, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("report {r} is outside the generator domain ({lo}, {hi})")]
    OutOfDomain { r: f64, lo: f64, hi: f64 },
    #[error("rule is unbounded and cannot be mapped onto [0, 1]")]
    UnboundedRule,
    #[error("generator-based rules support binary events only, got m = {m}")]
    BinaryOnly { m: usize },
    #[error("invalid rule parameter: {0}")]
    InvalidParameter(String),
    #[error("generator derivative is not strictly increasing near {at}")]
    NonMonotoneGenerator { at: f64 },
    #[error("generator derivative disagrees with finite difference at {at}: {analytic} vs {numeric}")]
    DerivativeMismatch { at: f64, analytic: f64, numeric: f64 },
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A strictly convex, continuously differentiable `G` on an open
/// sub-interval of `(0, 1)`, together with its derivative.
#[derive(Clone)]
pub struct ConvexGenerator {
    name: String,
    g: ScalarFn,
    g_prime: ScalarFn,
    domain: (f64, f64),
}

impl fmt::Debug for ConvexGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConvexGenerator")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .finish()
    }
}

impl ConvexGenerator {
    pub fn new<G, D>(
        name: impl Into<String>,
        g: G,
        g_prime: D,
        domain: (f64, f64),
    ) -> Result<Self, RuleError>
    where
        G: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let (lo, hi) = domain;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(RuleError::InvalidParameter(format!(
                "generator domain ({lo}, {hi}) must be a non-empty interval within (0, 1)"
            )));
        }
        Ok(ConvexGenerator {
            name: name.into(),
            g: Arc::new(g),
            g_prime: Arc::new(g_prime),
            domain,
        })
    }

    /// `G(r) = r^2 + (1 - r)^2`; reproduces the quadratic rule.
    pub fn quadratic() -> Self {
        Self::new(
            "quadratic",
            |r| r * r + (1.0 - r) * (1.0 - r),
            |r| 4.0 * r - 2.0,
            (0.0, 1.0),
        )
        .expect("static domain")
    }

    /// Negative entropy `G(r) = r ln r + (1 - r) ln(1 - r)`; `G'` is the logit
    /// and the induced rule is the logarithmic score.
    pub fn neg_entropy() -> Self {
        Self::new(
            "neg_entropy",
            |r| r * r.ln() + (1.0 - r) * (1.0 - r).ln(),
            |r| (r / (1.0 - r)).ln(),
            (0.0, 1.0),
        )
        .expect("static domain")
    }

    /// `G(r) = r^alpha + (1 - r)^alpha`, strictly convex for `alpha > 1`.
    pub fn power(alpha: f64) -> Result<Self, RuleError> {
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(RuleError::InvalidParameter(format!(
                "power generator needs alpha > 1, got {alpha}"
            )));
        }
        Self::new(
            format!("power({alpha})"),
            move |r| r.powf(alpha) + (1.0 - r).powf(alpha),
            move |r| alpha * (r.powf(alpha - 1.0) - (1.0 - r).powf(alpha - 1.0)),
            (0.0, 1.0),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn g(&self, r: f64) -> f64 {
        (self.g)(r)
    }

    pub fn g_prime(&self, r: f64) -> f64 {
        (self.g_prime)(r)
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Whether `r` lies strictly inside the domain.
    pub fn contains(&self, r: f64) -> bool {
        r > self.domain.0 && r < self.domain.1
    }

    /// Spot-checks strict monotonicity of `G'` and agreement with a central
    /// finite difference of `G` (`h = 1e-5`) on `points` interior grid points.
    pub fn check(&self, points: usize) -> Result<(), RuleError> {
        let (lo, hi) = self.domain;
        let h = 1e-5;
        let width = hi - lo;
        let xs: Vec<f64> = (1..=points)
            .map(|k| lo + width * k as f64 / (points + 1) as f64)
            .filter(|&x| x - h > lo && x + h < hi)
            .collect();
        for pair in xs.windows(2) {
            if self.g_prime(pair[1]) <= self.g_prime(pair[0]) {
                return Err(RuleError::NonMonotoneGenerator { at: pair[0] });
            }
        }
        for &x in &xs {
            let analytic = self.g_prime(x);
            let numeric = (self.g(x + h) - self.g(x - h)) / (2.0 * h);
            if (numeric - analytic).abs() > 1e-6 * analytic.abs().max(1.0) {
                return Err(RuleError::DerivativeMismatch {
                    at: x,
                    analytic,
                    numeric,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleKind {
    Quadratic,
    Logarithmic,
    GeneralizedLogarithmic,
    Spherical,
    CustomBinary,
    /// `S = a_j + b r_j`. Improper; exists so verification tooling has a
    /// known-bad rule to run against.
    Linear,
}

impl RuleKind {
    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Quadratic => "quadratic",
            RuleKind::Logarithmic => "logarithmic",
            RuleKind::GeneralizedLogarithmic => "generalized_logarithmic",
            RuleKind::Spherical => "spherical",
            RuleKind::CustomBinary => "custom_binary",
            RuleKind::Linear => "linear",
        }
    }
}

/// A scoring rule family with per-state offsets `a_j`, scale `b > 0`, and
/// (generalized logarithmic only) floor `l >= 0`.
#[derive(Debug, Clone)]
pub struct ScoringRule {
    kind: RuleKind,
    offsets: Vec<f64>,
    scale: f64,
    floor: f64,
    generator: Option<ConvexGenerator>,
}

impl ScoringRule {
    fn plain(kind: RuleKind) -> Self {
        ScoringRule {
            kind,
            offsets: Vec::new(),
            scale: 1.0,
            floor: 0.0,
            generator: None,
        }
    }

    pub fn quadratic() -> Self {
        Self::plain(RuleKind::Quadratic)
    }

    pub fn logarithmic() -> Self {
        Self::plain(RuleKind::Logarithmic)
    }

    pub fn generalized_logarithmic(floor: f64) -> Result<Self, RuleError> {
        if !(floor >= 0.0 && floor.is_finite()) {
            return Err(RuleError::InvalidParameter(format!(
                "floor l must be >= 0, got {floor}"
            )));
        }
        Ok(ScoringRule {
            floor,
            ..Self::plain(RuleKind::GeneralizedLogarithmic)
        })
    }

    pub fn spherical() -> Self {
        Self::plain(RuleKind::Spherical)
    }

    pub fn custom_binary(generator: ConvexGenerator) -> Self {
        ScoringRule {
            generator: Some(generator),
            ..Self::plain(RuleKind::CustomBinary)
        }
    }

    pub fn linear() -> Self {
        Self::plain(RuleKind::Linear)
    }

    pub fn with_scale(mut self, b: f64) -> Result<Self, RuleError> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(RuleError::InvalidParameter(format!(
                "scale b must be > 0, got {b}"
            )));
        }
        self.scale = b;
        Ok(self)
    }

    pub fn with_offsets(mut self, offsets: Vec<f64>) -> Result<Self, RuleError> {
        if offsets.iter().any(|a| !a.is_finite()) {
            return Err(RuleError::InvalidParameter(
                "offsets must be finite".to_string(),
            ));
        }
        self.offsets = offsets;
        Ok(self)
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn generator(&self) -> Option<&ConvexGenerator> {
        self.generator.as_ref()
    }

    /// Offsets as given; empty means all zero.
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn offset(&self, j: usize) -> f64 {
        self.offsets.get(j).copied().unwrap_or(0.0)
    }

    /// Logarithmic, or generalized logarithmic with `l = 0`.
    pub fn is_pure_log(&self) -> bool {
        match self.kind {
            RuleKind::Logarithmic => true,
            RuleKind::GeneralizedLogarithmic => self.floor == 0.0,
            _ => false,
        }
    }

    /// Checks that this rule can be evaluated on an `m`-state event.
    pub fn check_dimension(&self, m: usize) -> Result<(), RuleError> {
        if !self.offsets.is_empty() && self.offsets.len() != m {
            return Err(RuleError::DimensionMismatch {
                expected: self.offsets.len(),
                found: m,
            });
        }
        if self.kind == RuleKind::CustomBinary && m != 2 {
            return Err(RuleError::BinaryOnly { m });
        }
        Ok(())
    }

    /// Unscaled, unshifted score `(S - a_j) / b`.
    fn raw_score(&self, report: &Forecast, j: usize) -> Result<f64, RuleError> {
        let r = report.probs();
        match self.kind {
            RuleKind::Quadratic => Ok(2.0 * r[j] - report.squared_norm()),
            RuleKind::Logarithmic => log_term(r[j], j),
            RuleKind::GeneralizedLogarithmic => {
                let l = self.floor;
                if l == 0.0 {
                    return log_term(r[j], j);
                }
                let total: f64 = r.iter().map(|rk| (rk + l).ln()).sum();
                Ok((r[j] + l).ln() + l * total)
            }
            RuleKind::Spherical => Ok(r[j] / report.two_norm()),
            RuleKind::CustomBinary => {
                let gen = self.generator.as_ref().ok_or_else(|| {
                    RuleError::InvalidParameter("custom binary rule without generator".into())
                })?;
                savage_binary_score(gen, r[0], OutcomeIndex::new(j))
            }
            RuleKind::Linear => Ok(r[j]),
        }
    }
}

fn log_term(p: f64, j: usize) -> Result<f64, RuleError> {
    if p > 0.0 {
        Ok(p.ln())
    } else {
        Err(RuleError::LogOfZero { outcome: j + 1 })
    }
}

/// `S(report, E_outcome)` for the rule.
pub fn score(rule: &ScoringRule, report: &Forecast, outcome: OutcomeIndex) -> Result<f64, RuleError> {
    let m = report.len();
    rule.check_dimension(m)?;
    let j = outcome.index();
    if j >= m {
        return Err(RuleError::DimensionMismatch {
            expected: m,
            found: j + 1,
        });
    }
    Ok(rule.offset(j) + rule.scale * rule.raw_score(report, j)?)
}

/// Savage binary score for reported probability `r` of `E1`.
pub fn savage_binary_score(
    gen: &ConvexGenerator,
    r: f64,
    outcome: OutcomeIndex,
) -> Result<f64, RuleError> {
    if !gen.contains(r) {
        let (lo, hi) = gen.domain();
        return Err(RuleError::OutOfDomain { r, lo, hi });
    }
    let g = gen.g(r);
    let d = gen.g_prime(r);
    match outcome.index() {
        0 => Ok(g + (1.0 - r) * d),
        1 => Ok(g - r * d),
        j => Err(RuleError::DimensionMismatch {
            expected: 2,
            found: j + 1,
        }),
    }
}

/// `sum_j belief_j * S(report, E_j)`. States the belief gives zero weight
/// are skipped, so a log-rule report may put zero mass where the belief does.
pub fn expected_score(rule: &ScoringRule, report: &Forecast, belief: &Forecast) -> Result<f64, RuleError> {
    if report.len() != belief.len() {
        return Err(RuleError::DimensionMismatch {
            expected: belief.len(),
            found: report.len(),
        });
    }
    let mut total = 0.0;
    for (j, &p) in belief.probs().iter().enumerate() {
        if p > 0.0 {
            total += p * score(rule, report, OutcomeIndex::new(j))?;
        }
    }
    Ok(total)
}

/// Outcome of a grid search for reports that beat the truthful report.
#[derive(Debug, Clone, PartialEq)]
pub struct PropernessReport {
    pub passed: bool,
    /// Expected score of the truthful report, if it could be evaluated.
    pub truthful_score: Option<f64>,
    /// `max_r E[S(r)] - E[S(belief)]` over grid reports `r != belief`.
    /// Negative when the rule is strictly proper at this belief.
    pub max_margin: f64,
    /// The grid report achieving `max_margin`.
    pub nearest_competitor: Option<Forecast>,
    pub evaluated: usize,
    /// Grid reports whose score could not be evaluated (e.g. log of zero).
    pub skipped: usize,
}

/// Grid reports closer than this (max-norm) to the belief count as the belief.
const SAME_POINT_TOL: f64 = 1e-12;

/// Compares the truthful expected score with every report on a simplex grid.
pub fn check_strict_properness(rule: &ScoringRule, belief: &Forecast, resolution: usize) -> PropernessReport {
    let resolution = resolution.max(2);
    let truthful = expected_score(rule, belief, belief).ok();
    let mut report = PropernessReport {
        passed: false,
        truthful_score: truthful,
        max_margin: f64::NEG_INFINITY,
        nearest_competitor: None,
        evaluated: 0,
        skipped: 0,
    };
    let Some(truthful) = truthful else {
        report.max_margin = f64::NAN;
        return report;
    };
    for r in simplex_grid(belief.len(), resolution) {
        if r.max_distance(belief) <= SAME_POINT_TOL {
            continue;
        }
        match expected_score(rule, &r, belief) {
            Ok(v) => {
                report.evaluated += 1;
                let margin = v - truthful;
                if margin > report.max_margin {
                    report.max_margin = margin;
                    report.nearest_competitor = Some(r);
                }
            }
            Err(_) => report.skipped += 1,
        }
    }
    report.passed = report.max_margin < 0.0;
    report
}

/// Range of the raw (`a = 0`, `b = 1`) score over the simplex and all states.
fn raw_range(rule: &ScoringRule, m: usize) -> Result<(f64, f64), RuleError> {
    let mf = m as f64;
    match rule.kind {
        // Concave in r: minimum at a vertex e_k (k != j), maximum at e_j.
        RuleKind::Quadratic => Ok((-1.0, 1.0)),
        RuleKind::Spherical | RuleKind::Linear => Ok((0.0, 1.0)),
        RuleKind::Logarithmic => Err(RuleError::UnboundedRule),
        RuleKind::GeneralizedLogarithmic => {
            let l = rule.floor;
            if l == 0.0 {
                return Err(RuleError::UnboundedRule);
            }
            let lo = (1.0 + (mf - 1.0) * l) * l.ln() + l * (1.0 + l).ln();
            let hi = (1.0 + l) * (1.0 + l).ln() + (mf - 1.0) * l * l.ln();
            Ok((lo, hi))
        }
        RuleKind::CustomBinary => grid_range(rule, m, 200),
    }
}

fn grid_range(rule: &ScoringRule, m: usize, resolution: usize) -> Result<(f64, f64), RuleError> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in simplex_grid(m, resolution) {
        for j in 0..m {
            if let Ok(v) = rule.raw_score(&r, j) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if lo.is_finite() && hi.is_finite() {
        Ok((lo, hi))
    } else {
        Err(RuleError::UnboundedRule)
    }
}

/// Positive affine rescaling of `rule` whose range over the `m`-simplex and
/// all states is exactly `[0, 1]`.
pub fn normalize_to_unit_interval(rule: &ScoringRule, m: usize) -> Result<ScoringRule, RuleError> {
    rule.check_dimension(m)?;
    let (raw_lo, raw_hi) = raw_range(rule, m)?;
    let offsets: Vec<f64> = (0..m).map(|j| rule.offset(j)).collect();
    let a_min = offsets.iter().copied().fold(f64::INFINITY, f64::min);
    let a_max = offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = a_min + rule.scale * raw_lo;
    let hi = a_max + rule.scale * raw_hi;
    let width = hi - lo;
    if !(width > 0.0 && width.is_finite()) {
        return Err(RuleError::UnboundedRule);
    }
    let mut out = rule.clone();
    out.offsets = offsets.iter().map(|a| (a - lo) / width).collect();
    out.scale = rule.scale / width;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Gamma};

    fn f(p: &[f64]) -> Forecast {
        Forecast::new(p.to_vec()).unwrap()
    }

    fn e(j: usize) -> OutcomeIndex {
        OutcomeIndex::new(j)
    }

    fn random_belief(rng: &mut ChaCha8Rng, m: usize) -> Forecast {
        let gamma = Gamma::new(1.0, 1.0).unwrap();
        let draws: Vec<f64> = (0..m).map(|_| gamma.sample(rng)).collect();
        let s: f64 = draws.iter().sum();
        Forecast::new(draws.iter().map(|d| d / s).collect()).unwrap()
    }

    #[test]
    fn score_examples() {
        let half = f(&[0.5, 0.5]);
        assert!((score(&ScoringRule::quadratic(), &half, e(0)).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(
            score(&ScoringRule::spherical(), &f(&[1.0, 0.0]), e(0)).unwrap(),
            1.0
        );
        let r = f(&[0.3, 0.7]);
        let gl = ScoringRule::generalized_logarithmic(0.0).unwrap();
        assert_eq!(score(&gl, &r, e(1)).unwrap(), 0.7f64.ln());
        assert_eq!(
            score(&ScoringRule::logarithmic(), &r, e(1)).unwrap(),
            0.7f64.ln()
        );
    }

    #[test]
    fn score_applies_offsets_and_scale() {
        let rule = ScoringRule::quadratic()
            .with_offsets(vec![1.0, -1.0])
            .unwrap()
            .with_scale(3.0)
            .unwrap();
        let r = f(&[0.5, 0.5]);
        assert!((score(&rule, &r, e(0)).unwrap() - 2.5).abs() < 1e-15);
        assert!((score(&rule, &r, e(1)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn score_errors() {
        let v = f(&[1.0, 0.0]);
        assert_eq!(
            score(&ScoringRule::logarithmic(), &v, e(1)),
            Err(RuleError::LogOfZero { outcome: 2 })
        );
        let gl0 = ScoringRule::generalized_logarithmic(0.0).unwrap();
        assert!(matches!(score(&gl0, &v, e(1)), Err(RuleError::LogOfZero { .. })));
        let gl = ScoringRule::generalized_logarithmic(0.1).unwrap();
        assert!(score(&gl, &v, e(1)).unwrap().is_finite());

        let three = ScoringRule::quadratic().with_offsets(vec![0.0; 3]).unwrap();
        assert!(matches!(
            score(&three, &v, e(0)),
            Err(RuleError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            score(&ScoringRule::quadratic(), &v, e(2)),
            Err(RuleError::DimensionMismatch { .. })
        ));
        let custom = ScoringRule::custom_binary(ConvexGenerator::quadratic());
        assert!(matches!(
            score(&custom, &f(&[0.2, 0.3, 0.5]), e(0)),
            Err(RuleError::BinaryOnly { m: 3 })
        ));
    }

    #[test]
    fn parameter_validation() {
        assert!(ScoringRule::quadratic().with_scale(0.0).is_err());
        assert!(ScoringRule::quadratic().with_scale(-1.0).is_err());
        assert!(ScoringRule::generalized_logarithmic(-0.1).is_err());
        assert!(ConvexGenerator::power(1.0).is_err());
        assert!(ConvexGenerator::new("bad", |r| r, |_| 1.0, (0.5, 0.2)).is_err());
    }

    #[test]
    fn savage_examples() {
        let sq = ConvexGenerator::new("sq", |r| r * r, |r| 2.0 * r, (0.0, 1.0)).unwrap();
        assert!((savage_binary_score(&sq, 0.5, e(0)).unwrap() - 0.75).abs() < 1e-15);
        assert!((savage_binary_score(&sq, 0.5, e(1)).unwrap() + 0.25).abs() < 1e-15);
        assert!(matches!(
            savage_binary_score(&sq, 1.0, e(0)),
            Err(RuleError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn savage_expected_score_at_truth_is_g() {
        for gen in [
            ConvexGenerator::quadratic(),
            ConvexGenerator::neg_entropy(),
            ConvexGenerator::power(3.0).unwrap(),
        ] {
            for k in 1..100 {
                let p = k as f64 / 100.0;
                let s1 = savage_binary_score(&gen, p, e(0)).unwrap();
                let s2 = savage_binary_score(&gen, p, e(1)).unwrap();
                assert!((p * s1 + (1.0 - p) * s2 - gen.g(p)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn savage_quadratic_generator_reproduces_quadratic_rule() {
        let custom = ScoringRule::custom_binary(ConvexGenerator::quadratic());
        let quad = ScoringRule::quadratic();
        for k in 1..200 {
            let r = Forecast::binary(k as f64 / 200.0).unwrap();
            for j in 0..2 {
                let a = score(&custom, &r, e(j)).unwrap();
                let b = score(&quad, &r, e(j)).unwrap();
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn neg_entropy_generator_reproduces_log_rule() {
        let custom = ScoringRule::custom_binary(ConvexGenerator::neg_entropy());
        for k in 1..100 {
            let r = Forecast::binary(k as f64 / 100.0).unwrap();
            for j in 0..2 {
                let a = score(&custom, &r, e(j)).unwrap();
                assert!((a - r.get(j).ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn generator_checks() {
        for gen in [
            ConvexGenerator::quadratic(),
            ConvexGenerator::neg_entropy(),
            ConvexGenerator::power(2.5).unwrap(),
        ] {
            gen.check(99).unwrap();
        }
        let concave = ConvexGenerator::new("concave", |r| -r * r, |r| -2.0 * r, (0.0, 1.0)).unwrap();
        assert!(matches!(
            concave.check(50),
            Err(RuleError::NonMonotoneGenerator { .. })
        ));
        let wrong = ConvexGenerator::new("wrong", |r| r * r, |r| 3.0 * r, (0.0, 1.0)).unwrap();
        assert!(matches!(
            wrong.check(50),
            Err(RuleError::DerivativeMismatch { .. })
        ));
    }

    #[test]
    fn expected_score_examples() {
        let quad = ScoringRule::quadratic();
        let half = f(&[0.5, 0.5]);
        assert!((expected_score(&quad, &half, &half).unwrap() - 0.5).abs() < 1e-15);

        let r = f(&[0.3, 0.7]);
        let vertex = Forecast::vertex(2, 1).unwrap();
        for rule in [quad.clone(), ScoringRule::spherical(), ScoringRule::logarithmic()] {
            assert_eq!(
                expected_score(&rule, &r, &vertex).unwrap(),
                score(&rule, &r, e(1)).unwrap()
            );
        }

        let belief = f(&[0.7, 0.3]);
        let truthful = expected_score(&quad, &belief, &belief).unwrap();
        let hedged = expected_score(&quad, &half, &belief).unwrap();
        // 1 - 2*0.21 = 0.58 vs 0.5
        assert!((truthful - 0.58).abs() < 1e-12);
        assert!(truthful > hedged);
    }

    #[test]
    fn properness_examples() {
        let rep = check_strict_properness(&ScoringRule::quadratic(), &f(&[0.3, 0.7]), 100);
        assert!(rep.passed, "{rep:?}");
        let third = 1.0 / 3.0;
        let rep = check_strict_properness(&ScoringRule::spherical(), &f(&[third, third, third]), 30);
        assert!(rep.passed, "{rep:?}");

        let rep = check_strict_properness(&ScoringRule::linear(), &f(&[0.3, 0.7]), 100);
        assert!(!rep.passed);
        assert!(rep.max_margin > 0.0);
        assert_eq!(rep.nearest_competitor.unwrap().probs(), &[0.0, 1.0]);
    }

    #[test]
    fn properness_skips_log_boundary() {
        let rep = check_strict_properness(&ScoringRule::logarithmic(), &f(&[0.3, 0.7]), 10);
        assert!(rep.passed);
        assert_eq!(rep.skipped, 2);
    }

    #[test]
    fn named_rules_are_strictly_proper_on_random_beliefs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rules = [
            ScoringRule::quadratic(),
            ScoringRule::logarithmic(),
            ScoringRule::generalized_logarithmic(0.1).unwrap(),
            ScoringRule::spherical(),
        ];
        for m in [2, 3] {
            for _ in 0..5 {
                let belief = random_belief(&mut rng, m);
                for rule in &rules {
                    let rep = check_strict_properness(rule, &belief, 50);
                    assert!(rep.passed, "{:?} {belief:?} {rep:?}", rule.kind());
                }
            }
        }
    }

    #[test]
    fn genlog_zero_floor_matches_log_on_grid() {
        let gl = ScoringRule::generalized_logarithmic(0.0).unwrap();
        let log = ScoringRule::logarithmic();
        for r in simplex_grid(3, 20) {
            for j in 0..3 {
                match (score(&gl, &r, e(j)), score(&log, &r, e(j))) {
                    (Ok(a), Ok(b)) => assert!((a - b).abs() <= 1e-12),
                    (Err(a), Err(b)) => assert_eq!(a, b),
                    other => panic!("mismatch {other:?}"),
                }
            }
        }
    }

    #[test]
    fn genlog_positive_floor_is_bounded() {
        let gl = ScoringRule::generalized_logarithmic(0.05).unwrap();
        for r in simplex_grid(3, 20) {
            for j in 0..3 {
                assert!(score(&gl, &r, e(j)).unwrap().is_finite());
            }
        }
    }

    #[test]
    fn normalize_examples() {
        let q = normalize_to_unit_interval(&ScoringRule::quadratic(), 2).unwrap();
        assert_eq!(q.offsets(), &[0.5, 0.5]);
        assert_eq!(q.scale(), 0.5);

        let s = normalize_to_unit_interval(&ScoringRule::spherical(), 2).unwrap();
        assert_eq!(s.offsets(), &[0.0, 0.0]);
        assert_eq!(s.scale(), 1.0);

        assert_eq!(
            normalize_to_unit_interval(&ScoringRule::logarithmic(), 2).unwrap_err(),
            RuleError::UnboundedRule
        );
        let gl0 = ScoringRule::generalized_logarithmic(0.0).unwrap();
        assert_eq!(
            normalize_to_unit_interval(&gl0, 3).unwrap_err(),
            RuleError::UnboundedRule
        );
    }

    #[test]
    fn normalized_ranges_match_grid_extremes() {
        let rules = [
            ScoringRule::quadratic(),
            ScoringRule::spherical(),
            ScoringRule::generalized_logarithmic(0.05).unwrap(),
            ScoringRule::generalized_logarithmic(0.5).unwrap(),
            ScoringRule::quadratic()
                .with_offsets(vec![0.3, -1.0, 2.0])
                .unwrap()
                .with_scale(4.0)
                .unwrap(),
        ];
        for rule in rules {
            let m = 3;
            let norm = normalize_to_unit_interval(&rule, m).unwrap();
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for r in simplex_grid(m, 60) {
                for j in 0..m {
                    let v = score(&norm, &r, e(j)).unwrap();
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            // Extremes sit at vertices, which the grid contains.
            assert!(lo.abs() < 1e-12, "{:?} lo {lo}", rule.kind());
            assert!((hi - 1.0).abs() < 1e-12, "{:?} hi {hi}", rule.kind());
        }
    }

    #[test]
    fn normalize_custom_binary_uses_grid() {
        let rule = ScoringRule::custom_binary(ConvexGenerator::quadratic());
        let norm = normalize_to_unit_interval(&rule, 2).unwrap();
        for k in 1..100 {
            let r = Forecast::binary(k as f64 / 100.0).unwrap();
            for j in 0..2 {
                let v = score(&norm, &r, e(j)).unwrap();
                assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            }
        }
    }

    #[test]
    fn normalization_preserves_properness() {
        let norm = normalize_to_unit_interval(&ScoringRule::quadratic(), 3).unwrap();
        let rep = check_strict_properness(&norm, &f(&[0.2, 0.5, 0.3]), 40);
        assert!(rep.passed);
    }
}
