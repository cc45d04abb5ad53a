use serde::{Deserialize, Serialize};

use crate::error::{GraftError, Result};

/// Relative-error denominators below this magnitude are skipped.
pub const DENOMINATOR_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointMetrics {
    pub rmse: f64,
    pub mae: f64,
    /// Percent; NaN when every position was skipped.
    pub mape: f64,
    /// Percent, `200·|ŷ−y|/(|y|+|ŷ|)`; NaN when every position was skipped.
    pub smape: f64,
    pub mape_skipped: usize,
    pub smape_skipped: usize,
}

fn check(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.is_empty() {
        return Err(GraftError::Input("empty series".into()));
    }
    if y.len() != yhat.len() {
        return Err(GraftError::Input(format!("length mismatch: {} vs {}", y.len(), yhat.len())));
    }
    Ok(())
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check(y, yhat)?;
    let sq: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sq / y.len() as f64).sqrt())
}

pub fn point_metrics(y: &[f64], yhat: &[f64]) -> Result<PointMetrics> {
    check(y, yhat)?;
    let n = y.len() as f64;
    let mae = y.iter().zip(yhat).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    let (mut mape, mut mn, mut smape, mut sn) = (0.0, 0usize, 0.0, 0usize);
    for (a, b) in y.iter().zip(yhat) {
        if a.abs() >= DENOMINATOR_FLOOR {
            mape += (a - b).abs() / a.abs();
            mn += 1;
        }
        let den = a.abs() + b.abs();
        if den >= DENOMINATOR_FLOOR {
            smape += 2.0 * (a - b).abs() / den;
            sn += 1;
        }
    }
    let pct = |s: f64, k: usize| if k == 0 { f64::NAN } else { 100.0 * s / k as f64 };
    Ok(PointMetrics {
        rmse: rmse(y, yhat)?,
        mae,
        mape: pct(mape, mn),
        smape: pct(smape, sn),
        mape_skipped: y.len() - mn,
        smape_skipped: y.len() - sn,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures() {
        let m = point_metrics(&[3.0, 4.0], &[3.0, 4.0]).unwrap();
        assert_eq!((m.rmse, m.mae, m.mape, m.smape), (0.0, 0.0, 0.0, 0.0));
        let m = point_metrics(&[1.0, 2.0], &[2.0, 2.0]).unwrap();
        assert_eq!(m.rmse, 0.5f64.sqrt());
        assert_eq!(m.mae, 0.5);
        assert_eq!(m.mape, 50.0);
        assert!((m.smape - 100.0 * (2.0 / 3.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_denominators_are_skipped_and_counted() {
        let m = point_metrics(&[0.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_eq!(m.mape_skipped, 1);
        assert_eq!(m.mape, 50.0);
        assert_eq!(m.smape_skipped, 0);
        let m = point_metrics(&[0.0], &[0.0]).unwrap();
        assert_eq!(m.smape_skipped, 1);
        assert!(m.mape.is_nan());
    }

    #[test]
    fn errors() {
        assert!(point_metrics(&[], &[]).is_err());
        assert!(point_metrics(&[1.0], &[1.0, 2.0]).is_err());
    }
}
