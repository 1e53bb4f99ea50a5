use std::collections::{BTreeMap, BTreeSet};

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Dimension, FeedbackSignal};
use crate::decimal;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("two signals share the dimension `{0}`")]
    DuplicateDimension(Dimension),
    #[error("no signal carries a weighted dimension; nothing to aggregate")]
    NoSignals,
    #[error("weight for `{dimension}` must be a finite non-negative number, got {value}")]
    InvalidWeight { dimension: Dimension, value: String },
    #[error("weights sum to zero")]
    ZeroWeights,
}

/// Per-dimension importance. Construction rejects negative weights and an
/// all-zero table; the stored weights are kept as given and normalized on use,
/// so scaling every weight by the same factor changes nothing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<Dimension, f64>", into = "BTreeMap<Dimension, f64>")]
pub struct Weights {
    raw: BTreeMap<Dimension, Decimal>,
}

impl Default for Weights {
    fn default() -> Self {
        Self::equal()
    }
}

impl Weights {
    pub fn new(raw: BTreeMap<Dimension, Decimal>) -> Result<Self, ScoreError> {
        if let Some((d, w)) = raw.iter().find(|(_, w)| w.is_sign_negative() && !w.is_zero()) {
            return Err(ScoreError::InvalidWeight { dimension: *d, value: w.to_string() });
        }
        if raw.values().all(Decimal::is_zero) {
            return Err(ScoreError::ZeroWeights);
        }
        Ok(Self { raw })
    }

    /// Weight 1 on every dimension.
    pub fn equal() -> Self {
        Self { raw: Dimension::ALL.into_iter().map(|d| (d, Decimal::ONE)).collect() }
    }

    /// All weight on one dimension.
    pub fn only(dimension: Dimension) -> Self {
        Self { raw: BTreeMap::from([(dimension, Decimal::ONE)]) }
    }

    pub fn raw(&self) -> &BTreeMap<Dimension, Decimal> {
        &self.raw
    }

    pub fn get(&self, dimension: Dimension) -> Decimal {
        self.raw.get(&dimension).copied().unwrap_or_default()
    }

    /// Weights scaled to sum to 1.
    pub fn normalized(&self) -> BTreeMap<Dimension, Decimal> {
        let total: Decimal = self.raw.values().sum();
        self.raw.iter().map(|(d, w)| (*d, *w / total)).collect()
    }
}

impl TryFrom<BTreeMap<Dimension, f64>> for Weights {
    type Error = ScoreError;

    fn try_from(map: BTreeMap<Dimension, f64>) -> Result<Self, Self::Error> {
        let raw = map
            .into_iter()
            .map(|(d, f)| {
                decimal::from_f64(f)
                    .map(|w| (d, w))
                    .ok_or(ScoreError::InvalidWeight { dimension: d, value: f.to_string() })
            })
            .collect::<Result<_, _>>()?;
        Self::new(raw)
    }
}

impl From<Weights> for BTreeMap<Dimension, f64> {
    fn from(w: Weights) -> Self {
        use rust_decimal::prelude::ToPrimitive;
        w.raw.into_iter().map(|(d, v)| (d, v.to_f64().unwrap_or(0.0))).collect()
    }
}

/// Weighted mean of signal scores.
///
/// Only dimensions that both carry weight and have a signal take part; the
/// weight of absent dimensions is redistributed proportionally over the rest.
/// The result is rounded to six fractional digits and lies in `[0, 10]`.
pub fn aggregate_score(signals: &[FeedbackSignal], weights: &Weights) -> Result<Decimal, ScoreError> {
    let mut seen = BTreeSet::new();
    for s in signals {
        if !seen.insert(s.dimension) {
            return Err(ScoreError::DuplicateDimension(s.dimension));
        }
    }
    let mut weighted = Decimal::ZERO;
    let mut total = Decimal::ZERO;
    for s in signals {
        let w = weights.get(s.dimension);
        weighted += w * s.score.clamp(Decimal::ZERO, Decimal::TEN);
        total += w;
    }
    if total.is_zero() {
        return Err(ScoreError::NoSignals);
    }
    Ok(decimal::canonical((weighted / total).clamp(Decimal::ZERO, Decimal::TEN)))
}

/// Difference `a - b`; report it with [`decimal::format_signed`].
pub fn score_delta(a: Decimal, b: Decimal) -> Decimal {
    a - b
}
