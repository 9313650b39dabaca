//! Fidelity between coefficient vectors and aggregate recovery statistics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default success threshold on fidelity.
pub const SUCCESS_THRESHOLD: f64 = 0.95;

/// Bhattacharyya overlap Σ_i √(p_i q_i) of the two vectors after each is
/// normalized to unit sum. Entries down to −1e−12 are treated as zero.
pub fn fidelity(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch(format!(
            "fidelity of lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    let clean = |v: &[f64]| -> Result<(Vec<f64>, f64)> {
        let mut out = Vec::with_capacity(v.len());
        for (index, &value) in v.iter().enumerate() {
            if value < -1e-12 || value.is_nan() {
                return Err(Error::NegativeEntry { index, value });
            }
            out.push(value.max(0.0));
        }
        let sum = out.iter().sum();
        Ok((out, sum))
    };
    let (p, sp) = clean(p)?;
    let (q, sq) = clean(q)?;
    if sp == 0.0 || sq == 0.0 {
        return Ok(0.0);
    }
    let f: f64 = p.iter().zip(&q).map(|(a, b)| (a * b).sqrt()).sum::<f64>() / (sp * sq).sqrt();
    Ok(f.min(1.0))
}

/// Moves the mass of every group onto its first member, so coefficients that
/// the measurements cannot tell apart are compared as one.
pub fn merge_groups(p: &[f64], groups: &[Vec<usize>]) -> Vec<f64> {
    let mut out = p.to_vec();
    for g in groups {
        let Some((&head, rest)) = g.split_first() else {
            continue;
        };
        for &j in rest {
            out[head] += out[j];
            out[j] = 0.0;
        }
    }
    out
}

/// One Monte Carlo recovery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sparsity: usize,
    /// `None` for noiseless measurements.
    pub snr_db: Option<f64>,
    pub lambda: f64,
    pub seed: u64,
    pub fidelity: f64,
    pub residual: f64,
    pub iterations: usize,
    pub success: bool,
}

impl TrialRecord {
    pub const CSV_HEADER: &'static str =
        "K,snr_db,lambda,seed,fidelity,residual,iterations,success";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.sparsity,
            format_snr(self.snr_db),
            self.lambda,
            self.seed,
            self.fidelity,
            self.residual,
            self.iterations,
            self.success
        )
    }
}

pub(crate) fn format_snr(snr: Option<f64>) -> String {
    snr.map_or_else(|| "inf".to_string(), |s| s.to_string())
}

pub fn write_records_csv<W: Write>(records: &[TrialRecord], mut out: W) -> Result<()> {
    writeln!(out, "{}", TrialRecord::CSV_HEADER)?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    out.flush()?;
    Ok(())
}

/// Fraction of records with fidelity strictly above `threshold`.
pub fn recovery_probability(records: &[TrialRecord], threshold: f64) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InvalidArgument(
            "recovery probability of no trials".into(),
        ));
    }
    let hits = records.iter().filter(|r| r.fidelity > threshold).count();
    Ok(hits as f64 / records.len() as f64)
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(f: f64) -> TrialRecord {
        TrialRecord {
            sparsity: 1,
            snr_db: None,
            lambda: 0.0,
            seed: 0,
            fidelity: f,
            residual: 0.0,
            iterations: 1,
            success: f > SUCCESS_THRESHOLD,
        }
    }

    #[test]
    fn fidelity_cases() {
        assert!((fidelity(&[0.2, 0.8], &[0.2, 0.8]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fidelity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((fidelity(&[0.5, 0.5], &[1.0, 0.0]).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        // Sub-normalized input is rescaled first.
        assert!((fidelity(&[0.1, 0.1], &[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fidelity_errors() {
        assert!(matches!(
            fidelity(&[1.0], &[0.5, 0.5]),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            fidelity(&[1.0, -0.1], &[0.5, 0.5]),
            Err(Error::NegativeEntry { index: 1, .. })
        ));
        assert!(fidelity(&[1.0, -1e-13], &[0.5, 0.5]).is_ok());
    }

    #[test]
    fn probability_cases() {
        assert_eq!(
            recovery_probability(&[record(1.0), record(1.0)], 0.95).unwrap(),
            1.0
        );
        assert_eq!(
            recovery_probability(&[record(0.99), record(0.90)], 0.95).unwrap(),
            0.5
        );
        assert_eq!(
            recovery_probability(&[record(0.3), record(0.01)], 0.0).unwrap(),
            1.0
        );
        // Strict inequality.
        assert_eq!(recovery_probability(&[record(0.95)], 0.95).unwrap(), 0.0);
        assert!(recovery_probability(&[], 0.95).is_err());
    }

    #[test]
    fn merging_groups() {
        let merged = merge_groups(&[0.1, 0.2, 0.3, 0.4], &[vec![1, 3]]);
        assert_eq!(merged, vec![0.1, 0.6000000000000001, 0.3, 0.0]);
    }

    #[test]
    fn record_csv() {
        let r = TrialRecord {
            snr_db: Some(35.0),
            ..record(0.97)
        };
        assert_eq!(r.csv_row(), "1,35,0,0,0.97,0,1,true");
        assert_eq!(record(0.5).csv_row(), "1,inf,0,0,0.5,0,1,false");
    }

    proptest! {
        #[test]
        fn fidelity_bounded_and_symmetric(
            p in prop::collection::vec(0.0f64..1.0, 12),
            q in prop::collection::vec(0.0f64..1.0, 12),
        ) {
            let f = fidelity(&p, &q).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert_eq!(f, fidelity(&q, &p).unwrap());
            if p.iter().sum::<f64>() > 0.0 {
                prop_assert!((fidelity(&p, &p).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }
}
