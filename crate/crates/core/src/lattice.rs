//! Coupled waveguide array: tight-binding Hamiltonian, single-particle
//! propagator and single-photon impulse response.
//!
//! Waveguides are numbered from 1 at every public boundary; matrices are
//! stored 0-based.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of an open, uniform waveguide chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub n_waveguides: usize,
    /// Nearest-neighbour coupling constant C.
    pub coupling: f64,
    /// Propagation constant, identical for all waveguides.
    pub beta: f64,
    /// Propagation distance.
    pub z: f64,
}

impl LatticeSpec {
    pub fn new(n_waveguides: usize, coupling: f64, beta: f64, z: f64) -> Result<Self> {
        let spec = Self {
            n_waveguides,
            coupling,
            beta,
            z,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_waveguides < 2 {
            return Err(Error::InvalidSpec(format!(
                "need at least 2 waveguides, got {}",
                self.n_waveguides
            )));
        }
        if !(self.coupling > 0.0) || !self.coupling.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "coupling must be > 0, got {}",
                self.coupling
            )));
        }
        if !(self.z >= 0.0) || !self.z.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "z must be >= 0, got {}",
                self.z
            )));
        }
        if !self.beta.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "beta must be finite, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    /// Dimensionless propagation length C·z.
    pub fn cz(&self) -> f64 {
        self.coupling * self.z
    }

    pub fn with_z(&self, z: f64) -> Self {
        Self { z, ..*self }
    }
}

/// Single-particle Hamiltonian: `beta` on the diagonal, `coupling` on the
/// first off-diagonals, open ends.
pub fn build_hamiltonian(spec: &LatticeSpec) -> Result<Array2<f64>> {
    spec.validate()?;
    let n = spec.n_waveguides;
    let mut h = Array2::zeros((n, n));
    for i in 0..n {
        h[[i, i]] = spec.beta;
        if i + 1 < n {
            h[[i, i + 1]] = spec.coupling;
            h[[i + 1, i]] = spec.coupling;
        }
    }
    Ok(h)
}

/// Eigenvalues of the open chain, in mode order k = 1..=N_w.
pub fn chain_eigenvalues(spec: &LatticeSpec) -> Vec<f64> {
    let n = spec.n_waveguides;
    (1..=n)
        .map(|k| spec.beta + 2.0 * spec.coupling * (k as f64 * PI / (n as f64 + 1.0)).cos())
        .collect()
}

/// Normalized sine mode `k` (1-based) evaluated on waveguide `site` (1-based).
fn chain_mode(n: usize, k: usize, site: usize) -> f64 {
    let scale = (2.0 / (n as f64 + 1.0)).sqrt();
    scale * (site as f64 * k as f64 * PI / (n as f64 + 1.0)).sin()
}

/// Single-particle evolution matrix W = exp(i z H).
///
/// Output creation operators are `a_n^†(z) = Σ_k W[n,k] a_k^†(0)`.
#[derive(Debug, Clone)]
pub struct Propagator {
    matrix: Array2<Complex64>,
    spec: LatticeSpec,
}

impl Propagator {
    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn n_modes(&self) -> usize {
        self.matrix.nrows()
    }

    /// Max-norm of W†W − I.
    pub fn unitarity_error(&self) -> f64 {
        let w = &self.matrix;
        let wh = w.t().mapv(|c| c.conj());
        let prod = wh.dot(w);
        prod.indexed_iter()
            .map(|((i, j), v)| {
                let target = if i == j { 1.0 } else { 0.0 };
                (v - Complex64::new(target, 0.0)).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Wraps an arbitrary matrix, bypassing the lattice. Used by tests that
    /// need hand-built optical networks.
    pub fn from_matrix(matrix: Array2<Complex64>, spec: LatticeSpec) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        Ok(Self { matrix, spec })
    }
}

/// Closed-form propagator from the sine-mode eigendecomposition of the chain.
pub fn propagator(spec: &LatticeSpec) -> Result<Propagator> {
    spec.validate()?;
    let n = spec.n_waveguides;
    if spec.z == 0.0 {
        return Ok(Propagator {
            matrix: Array2::from_diag_elem(n, Complex64::new(1.0, 0.0)),
            spec: *spec,
        });
    }
    let phases: Vec<Complex64> = chain_eigenvalues(spec)
        .into_iter()
        .map(|lambda| Complex64::from_polar(1.0, spec.z * lambda))
        .collect();
    let modes: Vec<Vec<f64>> = (1..=n)
        .map(|k| (1..=n).map(|site| chain_mode(n, k, site)).collect())
        .collect();

    let mut w = Array2::<Complex64>::zeros((n, n));
    for a in 0..n {
        for b in a..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (mode, phase) in modes.iter().zip(&phases) {
                acc += phase * (mode[a] * mode[b]);
            }
            w[[a, b]] = acc;
            w[[b, a]] = acc;
        }
    }
    Ok(Propagator {
        matrix: w,
        spec: *spec,
    })
}

/// Output photon-number expectation per waveguide for a single photon
/// injected into `input_waveguide` (1-based).
pub fn impulse_response(spec: &LatticeSpec, input_waveguide: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    if input_waveguide == 0 || input_waveguide > spec.n_waveguides {
        return Err(Error::IndexOutOfRange {
            index: input_waveguide,
            max: spec.n_waveguides,
        });
    }
    let w = propagator(spec)?;
    Ok(impulse_from(&w, input_waveguide - 1))
}

pub(crate) fn impulse_from(w: &Propagator, input: usize) -> Vec<f64> {
    w.matrix
        .column(input)
        .iter()
        .map(|c| c.norm_sqr())
        .collect()
}

/// J_0(x) ..= J_max(x) by Miller's downward recurrence, normalized with
/// J_0 + 2ΣJ_2k = 1. Stable for any order and argument.
pub fn bessel_j_orders(max_order: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; max_order + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = 2 * ((max_order.max(x.abs() as usize) + 40 + (x.abs().sqrt() * 10.0) as usize) / 2);
    let (mut next, mut cur) = (0.0f64, 1e-300f64);
    let mut norm = 0.0;
    for k in (0..=start).rev() {
        if k <= max_order {
            out[k] = cur;
        }
        if k % 2 == 0 {
            norm += if k == 0 { cur } else { 2.0 * cur };
        }
        if k == 0 {
            break;
        }
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            // Rescale to stay in range.
            next *= 1e-250;
            cur *= 1e-250;
            norm *= 1e-250;
            out.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// Infinite-array impulse response J²_{n−n₀}(2Cz) for the waveguides of
/// `spec`, input 1-based.
pub fn bessel_reference(spec: &LatticeSpec, input_waveguide: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    if input_waveguide == 0 || input_waveguide > spec.n_waveguides {
        return Err(Error::IndexOutOfRange {
            index: input_waveguide,
            max: spec.n_waveguides,
        });
    }
    let j = bessel_j_orders(spec.n_waveguides, 2.0 * spec.cz());
    Ok((1..=spec.n_waveguides)
        .map(|n| j[n.abs_diff(input_waveguide)].powi(2))
        .collect())
}
