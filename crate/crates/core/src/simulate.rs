//! Ground-truth states, depolarizing noise and noisy measurement synthesis.
//!
//! Every stochastic routine takes an explicit seed. States draw from stream 0
//! of a ChaCha8 generator seeded with the seed, measurement noise from
//! stream 1, so one seed per trial drives both without correlation.

use std::io::{BufRead, Write};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::BasisDescriptor;
use crate::error::{Error, Result};
use crate::sensing::{CoincidenceIndex, SensingMatrix};

const STATE_STREAM: u64 = 0;
const NOISE_STREAM: u64 = 1;

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Coefficient vector p over the basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    values: Vec<f64>,
}

impl StateVector {
    /// Requires entries in [0, 1] and unit sum within 1e−9.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidArgument(format!(
                    "coefficient {value} at {index} outside [0, 1]"
                )));
            }
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("coefficients sum to {sum}")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Indices of the nonzero coefficients, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_sparse(&self, basis: BasisDescriptor) -> StateFile {
        StateFile {
            basis,
            entries: self
                .values
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(index, &value)| SparseEntry { index, value })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SparseEntry {
    /// 0-based basis element index.
    pub index: usize,
    pub value: f64,
}

/// Sparse on-disk form of a [`StateVector`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub basis: BasisDescriptor,
    pub entries: Vec<SparseEntry>,
}

impl StateFile {
    pub fn to_state(&self, n_basis: usize) -> Result<StateVector> {
        let mut values = vec![0.0; n_basis];
        for e in &self.entries {
            let slot = values.get_mut(e.index).ok_or_else(|| {
                Error::Format(format!(
                    "state index {} beyond basis size {n_basis}",
                    e.index
                ))
            })?;
            *slot += e.value;
        }
        StateVector::new(values)
    }
}

/// K-sparse state: support uniform without replacement, weights uniform on
/// the simplex (flat Dirichlet, sampled as normalized unit exponentials).
pub fn random_sparse_state(n_basis: usize, sparsity: usize, seed: u64) -> Result<StateVector> {
    if sparsity == 0 || sparsity > n_basis {
        return Err(Error::SparsityOutOfRange {
            k: sparsity,
            n: n_basis,
        });
    }
    let mut rng = rng_for(seed, STATE_STREAM);
    let mut support = sample(&mut rng, n_basis, sparsity).into_vec();
    support.sort_unstable();
    let weights: Vec<f64> = (0..sparsity).map(|_| Exp1.sample(&mut rng)).collect();
    let total: f64 = weights.iter().sum();
    let mut values = vec![0.0; n_basis];
    for (&i, w) in support.iter().zip(&weights) {
        values[i] = w / total;
    }
    Ok(StateVector { values })
}

/// p ↦ (1 − λ)p + (λ/N_b)·1.
pub fn depolarize(p: &StateVector, lambda: f64) -> Result<StateVector> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::DepolarizationOutOfRange(lambda));
    }
    let floor = lambda / p.len() as f64;
    Ok(StateVector {
        values: p
            .values
            .iter()
            .map(|v| (1.0 - lambda) * v + floor)
            .collect(),
    })
}

/// Measured coincidence vector with its noise provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementVector {
    pub values: Vec<f64>,
    /// `None` for noiseless data.
    pub snr_db: Option<f64>,
    pub depolarization: f64,
    pub seed: u64,
}

/// Γ = M·p plus i.i.d. Gaussian noise rescaled so that
/// ‖e‖₂ = ‖M·p‖₂·10^(−snr_db/20) exactly. `snr_db = None` (or +∞) is
/// noiseless. Negative entries are kept.
pub fn synthesize_measurements(
    m: &SensingMatrix,
    p: &StateVector,
    snr_db: Option<f64>,
    seed: u64,
) -> Result<MeasurementVector> {
    if p.len() != m.n_basis() {
        return Err(Error::DimensionMismatch(format!(
            "state has {} coefficients, matrix has {} columns",
            p.len(),
            m.n_basis()
        )));
    }
    let snr_db = snr_db.filter(|s| !s.is_infinite() || s.is_sign_negative());
    if let Some(s) = snr_db {
        if s.is_nan() || s.is_infinite() {
            return Err(Error::InvalidArgument(format!("invalid SNR {s} dB")));
        }
    }
    let clean = m.data().dot(&ndarray::ArrayView1::from(p.values()));
    let mut values = clean.to_vec();
    if let Some(snr) = snr_db {
        let clean_norm = clean.dot(&clean).sqrt();
        let mut rng = rng_for(seed, NOISE_STREAM);
        let noise: Vec<f64> = (0..values.len())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let raw_norm = noise.iter().map(|e| e * e).sum::<f64>().sqrt();
        if raw_norm > 0.0 && clean_norm > 0.0 {
            let scale = clean_norm * 10f64.powf(-snr / 20.0) / raw_norm;
            for (v, e) in values.iter_mut().zip(&noise) {
                *v += scale * e;
            }
        }
    }
    Ok(MeasurementVector {
        values,
        snr_db,
        depolarization: 0.0,
        seed,
    })
}

/// Header for a coincidence CSV of order `g`: `q,r,value` for pairs,
/// `q1,…,qG,value` otherwise.
fn csv_header(g: usize) -> String {
    match g {
        2 => "q,r,value".to_string(),
        _ => {
            let mut cols: Vec<String> = (1..=g).map(|i| format!("q{i}")).collect();
            cols.push("value".into());
            cols.join(",")
        }
    }
}

/// Writes one row per coincidence entry, 1-based ascending waveguide indices.
pub fn write_measurements_csv<W: Write>(
    index: &CoincidenceIndex,
    values: &[f64],
    mut out: W,
) -> Result<()> {
    if values.len() != index.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} coincidence entries",
            values.len(),
            index.len()
        )));
    }
    writeln!(out, "{}", csv_header(index.order()))?;
    for (entry, v) in index.entries().iter().zip(values) {
        for q in entry {
            write!(out, "{},", q + 1)?;
        }
        writeln!(out, "{v}")?;
    }
    out.flush()?;
    Ok(())
}

/// Parses a coincidence CSV back into a vector ordered by `index`. Rows may
/// appear in any order but every entry must be present exactly once.
pub fn read_measurements_csv<R: BufRead>(index: &CoincidenceIndex, input: R) -> Result<Vec<f64>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty measurement file".into()))??;
    if header.trim() != csv_header(index.order()) {
        return Err(Error::Format(format!("unexpected header {header:?}")));
    }
    let mut values = vec![f64::NAN; index.len()];
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != index.order() + 1 {
            return Err(Error::Format(format!(
                "line {}: expected {} fields",
                lineno + 2,
                index.order() + 1
            )));
        }
        let parse_err = |what: &str| Error::Format(format!("line {}: bad {what}", lineno + 2));
        let mut key = Vec::with_capacity(index.order());
        for f in &fields[..index.order()] {
            let q: usize = f.trim().parse().map_err(|_| parse_err("index"))?;
            if q == 0 {
                return Err(parse_err("index"));
            }
            key.push(q - 1);
        }
        key.sort_unstable();
        let value: f64 = fields[index.order()]
            .trim()
            .parse()
            .map_err(|_| parse_err("value"))?;
        let i = index.index_of(&key).ok_or_else(|| parse_err("index"))?;
        if !values[i].is_nan() {
            return Err(Error::Format(format!(
                "line {}: duplicate entry",
                lineno + 2
            )));
        }
        values[i] = value;
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Format("measurement file is missing entries".into()));
    }
    Ok(values)
}
