//! Fixed photon-number Fock space over the array's modes: configuration
//! enumeration, matrix permanents and linear-optical transition amplitudes.
//!
//! Creation and annihilation operators are never materialized. A transition
//! amplitude between two occupation patterns is the permanent of the
//! propagator submatrix selected by repeating rows and columns according to
//! the occupations.

use std::collections::HashMap;
use std::fmt;

use ndarray::ArrayView2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::Propagator;

/// Largest matrix order accepted by [`permanent`].
pub const MAX_PERMANENT_ORDER: usize = 12;

/// Occupation numbers per waveguide.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FockConfig(Vec<u32>);

impl FockConfig {
    pub fn new(occupations: Vec<u32>) -> Self {
        Self(occupations)
    }

    /// Builds a configuration from 1-based `(waveguide, count)` pairs.
    pub fn from_occupied(n_waveguides: usize, occupied: &[(usize, u32)]) -> Result<Self> {
        let mut occ = vec![0; n_waveguides];
        for &(wg, count) in occupied {
            if wg == 0 || wg > n_waveguides {
                return Err(Error::IndexOutOfRange {
                    index: wg,
                    max: n_waveguides,
                });
            }
            occ[wg - 1] += count;
        }
        Ok(Self(occ))
    }

    pub fn occupations(&self) -> &[u32] {
        &self.0
    }

    pub fn n_modes(&self) -> usize {
        self.0.len()
    }

    pub fn photon_count(&self) -> u32 {
        self.0.iter().sum()
    }

    /// 0-based mode of every photon, each mode repeated by its occupation.
    pub fn mode_list(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .flat_map(|(k, &n)| std::iter::repeat_n(k, n as usize))
            .collect()
    }

    /// Π_k n_k!
    pub fn factorial_product(&self) -> f64 {
        self.0.iter().map(|&n| factorial(n)).product()
    }
}

impl fmt::Display for FockConfig {
    /// Ket notation listing occupied waveguides, e.g. `|2_3 1_16⟩`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(k, n)| format!("{}_{}", n, k + 1))
            .collect();
        write!(f, "|{}⟩", parts.join(" "))
    }
}

pub(crate) fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Binomial coefficient, `None` on u64 overflow.
pub fn binomial(n: u64, k: u64) -> Option<u64> {
    let k = k.min(n.checked_sub(k)?);
    let mut acc: u64 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        let num = (acc as u128) * ((n - i) as u128);
        acc = u64::try_from(num / ((i + 1) as u128)).ok()?;
    }
    Some(acc)
}

/// Number of multisets of size `k` over `n` symbols, C(n + k − 1, k).
pub fn multiset_count(n: usize, k: usize) -> Result<usize> {
    let top = (n as u64)
        .checked_add(k as u64)
        .and_then(|v| v.checked_sub(1));
    top.and_then(|t| binomial(t, k as u64))
        .and_then(|v| usize::try_from(v).ok())
        .ok_or(Error::Overflow { n, k })
}

/// Bijection between occupation patterns and indices `0..len()`.
///
/// Ordering is descending lexicographic on the occupation vector, so for two
/// modes and three photons the order is (3,0), (2,1), (1,2), (0,3).
#[derive(Debug, Clone)]
pub struct ConfigIndex {
    n_waveguides: usize,
    n_photons: u32,
    configs: Vec<FockConfig>,
    lookup: HashMap<FockConfig, usize>,
}

impl ConfigIndex {
    pub fn n_waveguides(&self) -> usize {
        self.n_waveguides
    }

    pub fn n_photons(&self) -> u32 {
        self.n_photons
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn config_of(&self, index: usize) -> Option<&FockConfig> {
        self.configs.get(index)
    }

    pub fn index_of(&self, config: &FockConfig) -> Option<usize> {
        self.lookup.get(config).copied()
    }

    pub fn configs(&self) -> &[FockConfig] {
        &self.configs
    }
}

pub fn enumerate_configs(n_waveguides: usize, n_photons: u32) -> Result<ConfigIndex> {
    if n_waveguides == 0 || n_photons == 0 {
        return Err(Error::InvalidArgument(format!(
            "need at least one waveguide and one photon, got {n_waveguides} and {n_photons}"
        )));
    }
    let count = multiset_count(n_waveguides, n_photons as usize)?;
    let mut configs = Vec::with_capacity(count);
    let mut current = vec![0u32; n_waveguides];
    fill_configs(&mut current, 0, n_photons, &mut configs);
    debug_assert_eq!(configs.len(), count);
    let lookup = configs
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, c)| (c, i))
        .collect();
    Ok(ConfigIndex {
        n_waveguides,
        n_photons,
        configs,
        lookup,
    })
}

fn fill_configs(current: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<FockConfig>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(FockConfig(current.to_vec()));
        current[pos] = 0;
        return;
    }
    for n in (0..=remaining).rev() {
        current[pos] = n;
        fill_configs(current, pos + 1, remaining - n, out);
    }
    current[pos] = 0;
}

/// Permanent of a square complex matrix of order 1..=12.
///
/// Orders up to 3 are expanded directly, larger ones use Ryser's formula with
/// Gray-code subset enumeration.
pub fn permanent(m: ArrayView2<'_, Complex64>) -> Result<Complex64> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows == 0 {
        return Err(Error::InvalidArgument(
            "permanent of an empty matrix".into(),
        ));
    }
    if rows > MAX_PERMANENT_ORDER {
        return Err(Error::PermanentTooLarge(rows));
    }
    let mut buf = [Complex64::new(0.0, 0.0); MAX_PERMANENT_ORDER * MAX_PERMANENT_ORDER];
    for ((i, j), v) in m.indexed_iter() {
        buf[i * rows + j] = *v;
    }
    Ok(permanent_flat(&buf[..rows * rows], rows))
}

/// Permanent of a row-major `n × n` buffer. `n` must be in 1..=12.
pub(crate) fn permanent_flat(a: &[Complex64], n: usize) -> Complex64 {
    match n {
        1 => a[0],
        2 => a[0] * a[3] + a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] + a[5] * a[7])
                + a[1] * (a[3] * a[8] + a[5] * a[6])
                + a[2] * (a[3] * a[7] + a[4] * a[6])
        }
        _ => ryser(a, n),
    }
}

fn ryser(a: &[Complex64], n: usize) -> Complex64 {
    let mut row_sums = [Complex64::new(0.0, 0.0); MAX_PERMANENT_ORDER];
    let mut total = Complex64::new(0.0, 0.0);
    let mut gray: u32 = 0;
    for step in 1u32..(1u32 << n) {
        let next = step ^ (step >> 1);
        let col = (gray ^ next).trailing_zeros() as usize;
        let added = next & (1 << col) != 0;
        for (i, s) in row_sums[..n].iter_mut().enumerate() {
            if added {
                *s += a[i * n + col];
            } else {
                *s -= a[i * n + col];
            }
        }
        gray = next;
        let prod = row_sums[..n]
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s);
        if gray.count_ones().is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    if n % 2 == 1 {
        -total
    } else {
        total
    }
}

/// ⟨output| U |input⟩ for the network described by `w`.
pub fn transition_amplitude(
    w: &Propagator,
    input: &FockConfig,
    output: &FockConfig,
) -> Result<Complex64> {
    check_modes(w, input)?;
    check_modes(w, output)?;
    let n_in = input.photon_count();
    let n_out = output.photon_count();
    if n_in != n_out {
        return Err(Error::PhotonMismatch {
            expected: n_in,
            found: n_out,
        });
    }
    if n_in as usize > MAX_PERMANENT_ORDER {
        return Err(Error::PermanentTooLarge(n_in as usize));
    }
    let cols = input.mode_list();
    let rows = output.mode_list();
    let norm = (input.factorial_product() * output.factorial_product()).sqrt();
    Ok(submatrix_permanent(w.matrix().view(), &rows, &cols) / norm)
}

pub(crate) fn submatrix_permanent(
    w: ArrayView2<'_, Complex64>,
    rows: &[usize],
    cols: &[usize],
) -> Complex64 {
    let n = rows.len();
    let mut buf = [Complex64::new(0.0, 0.0); MAX_PERMANENT_ORDER * MAX_PERMANENT_ORDER];
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            buf[i * n + j] = w[[r, c]];
        }
    }
    permanent_flat(&buf[..n * n], n)
}

fn check_modes(w: &Propagator, c: &FockConfig) -> Result<()> {
    if c.n_modes() != w.n_modes() {
        return Err(Error::DimensionMismatch(format!(
            "configuration has {} modes, propagator has {}",
            c.n_modes(),
            w.n_modes()
        )));
    }
    Ok(())
}

/// Validates a superposition input and returns its photon number.
pub(crate) fn check_superposition(input: &[(Complex64, FockConfig)]) -> Result<u32> {
    let first = input
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty input superposition".into()))?;
    let n = first.1.photon_count();
    for (_, c) in input {
        if c.photon_count() != n {
            return Err(Error::PhotonMismatch {
                expected: n,
                found: c.photon_count(),
            });
        }
    }
    // Distinct Fock states are orthogonal; repeated configs add coherently.
    let mut merged: HashMap<&FockConfig, Complex64> = HashMap::new();
    for (a, c) in input {
        *merged.entry(c).or_default() += a;
    }
    let norm: f64 = merged.values().map(|a| a.norm_sqr()).sum();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(norm));
    }
    Ok(n)
}

/// Output probability over every configuration of `index` for a (possibly
/// superposed) input state `Σ α_c |c⟩`.
pub fn output_distribution(
    w: &Propagator,
    input: &[(Complex64, FockConfig)],
    index: &ConfigIndex,
) -> Result<Vec<f64>> {
    let n = check_superposition(input)?;
    if n != index.n_photons() || index.n_waveguides() != w.n_modes() {
        return Err(Error::DimensionMismatch(format!(
            "index covers {} photons in {} modes, input has {} photons, propagator {} modes",
            index.n_photons(),
            index.n_waveguides(),
            n,
            w.n_modes()
        )));
    }
    for (_, c) in input {
        check_modes(w, c)?;
    }
    if n as usize > MAX_PERMANENT_ORDER {
        return Err(Error::PermanentTooLarge(n as usize));
    }
    let prepared: Vec<(Complex64, Vec<usize>)> = input
        .iter()
        .map(|(a, c)| (a / c.factorial_product().sqrt(), c.mode_list()))
        .collect();
    let wv = w.matrix().view();
    Ok(index
        .configs()
        .iter()
        .map(|out| {
            let rows = out.mode_list();
            let amp: Complex64 = prepared
                .iter()
                .map(|(a, cols)| a * submatrix_permanent(wv, &rows, cols))
                .sum();
            amp.norm_sqr() / out.factorial_product()
        })
        .collect())
}
