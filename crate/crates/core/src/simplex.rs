//! Probability vectors on the simplex.
//!
//! A [`Forecast`] is validated once at construction and never renormalized
//! afterwards. Outcome indices are 0-based here; files and messages use
//! 1-based indices and convert at the boundary via [`OutcomeIndex`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on `sum(probs) == 1`.
pub const SIMPLEX_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimplexError {
    #[error("forecast is empty")]
    Empty,
    #[error("forecast needs at least 2 states, got {m}")]
    TooFewStates { m: usize },
    #[error("entry {index} is negative ({value})")]
    NegativeEntry { index: usize, value: f64 },
    #[error("entry {index} is not finite")]
    NonFinite { index: usize },
    #[error("entries sum to {sum}, not 1 (tolerance {tol})")]
    SumOutOfTolerance { sum: f64, tol: f64 },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("weight {index} is not positive ({value})")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("forecasts have different numbers of states ({expected} vs {found})")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("outcome {one_based} is out of range for {m} states")]
    OutcomeOutOfRange { one_based: usize, m: usize },
}

/// A probability vector over `m >= 2` mutually exclusive states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Forecast(Vec<f64>);

impl Forecast {
    /// Validates `probs` with the default [`SIMPLEX_TOL`].
    pub fn new(probs: Vec<f64>) -> Result<Self, SimplexError> {
        check(&probs, SIMPLEX_TOL)?;
        Ok(Forecast(probs))
    }

    /// Binary forecast `(p, 1 - p)`.
    pub fn binary(p: f64) -> Result<Self, SimplexError> {
        Self::new(vec![p, 1.0 - p])
    }

    pub fn uniform(m: usize) -> Result<Self, SimplexError> {
        if m < 2 {
            return Err(SimplexError::TooFewStates { m });
        }
        Ok(Forecast(vec![1.0 / m as f64; m]))
    }

    /// The vertex `e_j` (0-based `j`).
    pub fn vertex(m: usize, j: usize) -> Result<Self, SimplexError> {
        if m < 2 {
            return Err(SimplexError::TooFewStates { m });
        }
        if j >= m {
            return Err(SimplexError::OutcomeOutOfRange { one_based: j + 1, m });
        }
        let mut probs = vec![0.0; m];
        probs[j] = 1.0;
        Ok(Forecast(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    /// Number of states `m`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, j: usize) -> f64 {
        self.0[j]
    }

    pub fn two_norm(&self) -> f64 {
        two_norm(self)
    }

    pub fn squared_norm(&self) -> f64 {
        self.0.iter().map(|p| p * p).sum()
    }

    /// Max-norm distance to `other`.
    pub fn max_distance(&self, other: &Forecast) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl TryFrom<Vec<f64>> for Forecast {
    type Error = SimplexError;

    fn try_from(probs: Vec<f64>) -> Result<Self, Self::Error> {
        Forecast::new(probs)
    }
}

impl From<Forecast> for Vec<f64> {
    fn from(f: Forecast) -> Self {
        f.0
    }
}

impl AsRef<[f64]> for Forecast {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// A state `E_j`, stored 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OutcomeIndex(usize);

impl OutcomeIndex {
    pub fn new(j: usize) -> Self {
        OutcomeIndex(j)
    }

    /// Converts a user-facing 1-based index, checking it against `m`.
    pub fn from_one_based(one_based: usize, m: usize) -> Result<Self, SimplexError> {
        if one_based == 0 || one_based > m {
            return Err(SimplexError::OutcomeOutOfRange { one_based, m });
        }
        Ok(OutcomeIndex(one_based - 1))
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn one_based(self) -> usize {
        self.0 + 1
    }

    /// All outcomes of an `m`-state event.
    pub fn all(m: usize) -> impl Iterator<Item = OutcomeIndex> {
        (0..m).map(OutcomeIndex)
    }
}

fn check(raw: &[f64], tol: f64) -> Result<(), SimplexError> {
    if raw.is_empty() {
        return Err(SimplexError::Empty);
    }
    if raw.len() < 2 {
        return Err(SimplexError::TooFewStates { m: raw.len() });
    }
    for (index, &value) in raw.iter().enumerate() {
        if !value.is_finite() {
            return Err(SimplexError::NonFinite { index });
        }
        if value < 0.0 {
            return Err(SimplexError::NegativeEntry { index, value });
        }
    }
    let sum: f64 = raw.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(SimplexError::SumOutOfTolerance { sum, tol });
    }
    Ok(())
}

/// Validates `raw` against an explicit sum tolerance.
pub fn validate_forecast(raw: &[f64], tol: f64) -> Result<Forecast, SimplexError> {
    check(raw, tol)?;
    Ok(Forecast(raw.to_vec()))
}

/// Euclidean norm `(sum f_j^2)^(1/2)`, always within `[1/sqrt(m), 1]`.
pub fn two_norm(f: &Forecast) -> f64 {
    f.squared_norm().sqrt()
}

/// Convex combination `sum (w_i / w) f_i` with `w = sum w_i`.
pub fn weighted_mean(forecasts: &[Forecast], weights: &[f64]) -> Result<Forecast, SimplexError> {
    if forecasts.len() != weights.len() {
        return Err(SimplexError::LengthMismatch {
            left: forecasts.len(),
            right: weights.len(),
        });
    }
    let first = forecasts.first().ok_or(SimplexError::Empty)?;
    let m = first.len();
    for (index, &value) in weights.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(SimplexError::NonPositiveWeight { index, value });
        }
    }
    if let Some(f) = forecasts.iter().find(|f| f.len() != m) {
        return Err(SimplexError::DimensionMismatch {
            expected: m,
            found: f.len(),
        });
    }
    let total: f64 = weights.iter().sum();
    let mut out = vec![0.0; m];
    for (f, &w) in forecasts.iter().zip(weights) {
        let share = w / total;
        for (acc, p) in out.iter_mut().zip(f.probs()) {
            *acc += share * p;
        }
    }
    Forecast::new(out)
}

/// All lattice points `k / resolution` on the `m`-simplex, in lexicographic
/// order of the leading coordinates. There are `C(resolution + m - 1, m - 1)`.
pub fn simplex_grid(m: usize, resolution: usize) -> Vec<Forecast> {
    assert!(m >= 2, "simplex_grid needs m >= 2");
    assert!(resolution >= 1, "simplex_grid needs resolution >= 1");
    let mut out = Vec::new();
    let mut counts = vec![0usize; m];
    fill_grid(&mut counts, 0, resolution, resolution, &mut out);
    out
}

fn fill_grid(
    counts: &mut [usize],
    pos: usize,
    remaining: usize,
    resolution: usize,
    out: &mut Vec<Forecast>,
) {
    if pos == counts.len() - 1 {
        counts[pos] = remaining;
        let step = resolution as f64;
        out.push(Forecast(counts.iter().map(|&k| k as f64 / step).collect()));
        return;
    }
    for k in 0..=remaining {
        counts[pos] = k;
        fill_grid(counts, pos + 1, remaining - k, resolution, out);
    }
}
