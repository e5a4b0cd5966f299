//! Spearman's rank correlation coefficient.
//!
//! Ties receive the average of the ranks they span, and the coefficient is
//! the Pearson correlation of the two rank vectors. The `6 sum d^2` short
//! form is only valid without ties and is not used.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {predictions} predictions vs {truths} truths")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("need at least 2 pairs, got {0}")]
    TooShort(usize),
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("correlation undefined: {0} values are constant")]
    Constant(&'static str),
}

/// Parallel prediction and ground-truth lists.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedPair<'a> {
    predictions: &'a [f64],
    truths: &'a [f64],
}

impl<'a> RankedPair<'a> {
    pub fn new(predictions: &'a [f64], truths: &'a [f64]) -> Result<Self, MetricError> {
        if predictions.len() != truths.len() {
            return Err(MetricError::LengthMismatch {
                predictions: predictions.len(),
                truths: truths.len(),
            });
        }
        if predictions.len() < 2 {
            return Err(MetricError::TooShort(predictions.len()));
        }
        if let Some(i) = predictions
            .iter()
            .zip(truths)
            .position(|(p, t)| !p.is_finite() || !t.is_finite())
        {
            return Err(MetricError::NonFinite(i));
        }
        Ok(RankedPair { predictions, truths })
    }

    pub fn predictions(&self) -> &[f64] {
        self.predictions
    }

    pub fn truths(&self) -> &[f64] {
        self.truths
    }
}

/// Fractional (1-based, tie-averaged) ranks.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        // -0.0 and 0.0 tie
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end, averaged
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

pub fn srcc(pair: &RankedPair<'_>) -> Result<f64, MetricError> {
    let rp = average_ranks(pair.predictions);
    let rt = average_ranks(pair.truths);
    // Ranks always average to (n + 1) / 2.
    let center = (pair.predictions.len() + 1) as f64 / 2.0;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in rp.iter().zip(&rt) {
        let dx = x - center;
        let dy = y - center;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(MetricError::Constant("prediction"));
    }
    if syy == 0.0 {
        return Err(MetricError::Constant("truth"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Convenience wrapper validating and scoring two slices.
pub fn spearman(predictions: &[f64], truths: &[f64]) -> Result<f64, MetricError> {
    srcc(&RankedPair::new(predictions, truths)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_reversed_orderings() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Ok(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Ok(-1.0));
    }

    #[test]
    fn ties_use_average_ranks() {
        assert_eq!(average_ranks(&[1.0, 2.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(average_ranks(&[3.0, 3.0, 3.0]), vec![2.0, 2.0, 2.0]);
        // Pearson of [1, 2.5, 2.5, 4] vs [1, 3, 2, 4]; both mean 2.5.
        // dx = [-1.5, 0, 0, 1.5], dy = [-1.5, 0.5, -0.5, 1.5]
        // sxy = 4.5, sxx = 4.5, syy = 5  ->  4.5 / sqrt(22.5)
        let expected = 4.5 / 22.5f64.sqrt();
        let got = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((got - expected).abs() < 1e-15, "{got} vs {expected}");
    }

    #[test]
    fn constant_input_is_an_error() {
        assert_eq!(
            spearman(&[0.5, 0.5, 0.5], &[1.0, 2.0, 3.0]),
            Err(MetricError::Constant("prediction"))
        );
        assert_eq!(
            spearman(&[1.0, 2.0], &[7.0, 7.0]),
            Err(MetricError::Constant("truth"))
        );
    }

    #[test]
    fn input_validation() {
        assert_eq!(
            spearman(&[1.0], &[1.0]),
            Err(MetricError::TooShort(1))
        );
        assert!(matches!(
            spearman(&[1.0, 2.0], &[1.0]),
            Err(MetricError::LengthMismatch { .. })
        ));
        assert_eq!(
            spearman(&[1.0, f64::NAN], &[1.0, 2.0]),
            Err(MetricError::NonFinite(1))
        );
    }

    #[test]
    fn signed_zero_ties() {
        assert_eq!(average_ranks(&[0.0, -0.0, 1.0]), vec![1.5, 1.5, 3.0]);
    }
}
