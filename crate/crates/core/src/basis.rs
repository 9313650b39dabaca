//! Sparsity bases for the N-photon sector: the Fock basis, and a variant in
//! which the pair |2_a 1_b⟩, |1_a 2_b⟩ is replaced by its symmetric and
//! antisymmetric superpositions.

use std::collections::HashMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{enumerate_configs, ConfigIndex, FockConfig};

const ORTHONORMALITY_TOL: f64 = 1e-12;

/// A normalized superposition of Fock configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisElement {
    terms: Vec<(Complex64, FockConfig)>,
}

impl BasisElement {
    pub fn fock(config: FockConfig) -> Self {
        Self {
            terms: vec![(Complex64::new(1.0, 0.0), config)],
        }
    }

    /// Unchecked; run [`validate`] on the enclosing basis.
    pub fn from_terms(terms: Vec<(Complex64, FockConfig)>) -> Self {
        Self { terms }
    }

    pub fn terms(&self) -> &[(Complex64, FockConfig)] {
        &self.terms
    }

    pub fn is_single(&self) -> bool {
        self.terms.len() == 1
    }
}

impl std::fmt::Display for BasisElement {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, (a, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            if self.terms.len() > 1 {
                // Adding 0.0 turns -0.0 into 0.0.
                write!(f, "({:.4}{:+.4}i)", a.re + 0.0, a.im + 0.0)?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Fock,
    Entangled,
}

/// Compact, serializable description from which a [`Basis`] is rebuilt
/// deterministically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisDescriptor {
    pub kind: BasisKind,
    pub n_waveguides: usize,
    pub n_photons: u32,
    /// 1-based waveguide pair for the entangled variant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entangled_pair: Option<[usize; 2]>,
}

impl BasisDescriptor {
    pub fn fock(n_waveguides: usize, n_photons: u32) -> Self {
        Self {
            kind: BasisKind::Fock,
            n_waveguides,
            n_photons,
            entangled_pair: None,
        }
    }

    pub fn entangled(n_waveguides: usize, n_photons: u32, wg_a: usize, wg_b: usize) -> Self {
        Self {
            kind: BasisKind::Entangled,
            n_waveguides,
            n_photons,
            entangled_pair: Some([wg_a, wg_b]),
        }
    }

    pub fn build(&self) -> Result<Basis> {
        match (self.kind, self.entangled_pair) {
            (BasisKind::Fock, None) => fock_basis(self.n_waveguides, self.n_photons),
            (BasisKind::Entangled, Some([a, b])) => {
                entangled_basis(self.n_waveguides, self.n_photons, a, b)
            }
            _ => Err(Error::InvalidBasis(
                "entangled_pair must be given exactly for entangled bases".into(),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Basis {
    descriptor: BasisDescriptor,
    elements: Vec<BasisElement>,
    configs: ConfigIndex,
}

impl Basis {
    pub fn descriptor(&self) -> &BasisDescriptor {
        &self.descriptor
    }

    pub fn elements(&self) -> &[BasisElement] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> Option<&BasisElement> {
        self.elements.get(i)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn n_waveguides(&self) -> usize {
        self.descriptor.n_waveguides
    }

    pub fn n_photons(&self) -> u32 {
        self.descriptor.n_photons
    }

    /// Configuration index of the underlying Fock space.
    pub fn configs(&self) -> &ConfigIndex {
        &self.configs
    }

    /// Replaces elements wholesale. Only meant for exercising [`validate`].
    pub fn with_elements(&self, elements: Vec<BasisElement>) -> Self {
        Self {
            elements,
            ..self.clone()
        }
    }
}

pub fn fock_basis(n_waveguides: usize, n_photons: u32) -> Result<Basis> {
    let configs = enumerate_configs(n_waveguides, n_photons)?;
    let elements = configs
        .configs()
        .iter()
        .cloned()
        .map(BasisElement::fock)
        .collect();
    Ok(Basis {
        descriptor: BasisDescriptor::fock(n_waveguides, n_photons),
        elements,
        configs,
    })
}

/// Fock basis with |2_a 1_b⟩ and |1_a 2_b⟩ replaced by
/// (|2_a 1_b⟩ ± |1_a 2_b⟩)/√2, the `+` element taking the slot of
/// |2_a 1_b⟩ and the `−` element the slot of |1_a 2_b⟩.
pub fn entangled_basis(
    n_waveguides: usize,
    n_photons: u32,
    wg_a: usize,
    wg_b: usize,
) -> Result<Basis> {
    if n_photons != 3 {
        return Err(Error::InvalidBasis(format!(
            "the entangled pair construction needs 3 photons, got {n_photons}"
        )));
    }
    if wg_a == wg_b {
        return Err(Error::InvalidBasis(format!(
            "pair waveguides must differ, got {wg_a},{wg_b}"
        )));
    }
    for wg in [wg_a, wg_b] {
        if wg == 0 || wg > n_waveguides {
            return Err(Error::IndexOutOfRange {
                index: wg,
                max: n_waveguides,
            });
        }
    }
    let mut basis = fock_basis(n_waveguides, n_photons)?;
    let first = FockConfig::from_occupied(n_waveguides, &[(wg_a, 2), (wg_b, 1)])?;
    let second = FockConfig::from_occupied(n_waveguides, &[(wg_a, 1), (wg_b, 2)])?;
    let i = basis.configs.index_of(&first).expect("config enumerated");
    let j = basis.configs.index_of(&second).expect("config enumerated");
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    basis.elements[i] = BasisElement::from_terms(vec![(h, first.clone()), (h, second.clone())]);
    basis.elements[j] = BasisElement::from_terms(vec![(h, first), (-h, second)]);
    basis.descriptor = BasisDescriptor::entangled(n_waveguides, n_photons, wg_a, wg_b);
    Ok(basis)
}

/// Indices of the two superposition elements of an entangled basis, in
/// (symmetric, antisymmetric) order.
pub fn entangled_slots(basis: &Basis) -> Option<(usize, usize)> {
    let [a, b] = basis.descriptor.entangled_pair?;
    let nw = basis.n_waveguides();
    let first = FockConfig::from_occupied(nw, &[(a, 2), (b, 1)]).ok()?;
    let second = FockConfig::from_occupied(nw, &[(a, 1), (b, 2)]).ok()?;
    Some((
        basis.configs.index_of(&first)?,
        basis.configs.index_of(&second)?,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Count {
        expected: usize,
        found: usize,
    },
    PhotonNumber {
        element: usize,
        expected: u32,
        found: u32,
    },
    ModeCount {
        element: usize,
        expected: usize,
        found: usize,
    },
    Normalization {
        element: usize,
        norm: f64,
    },
    Orthogonality {
        first: usize,
        second: usize,
        overlap: f64,
    },
    Empty {
        element: usize,
    },
}

/// Checks count, photon number, mode count and orthonormality. Returns every
/// violation found.
pub fn validate(basis: &Basis) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    let d = basis.descriptor;
    let expected =
        crate::fock::multiset_count(d.n_waveguides, d.n_photons as usize).unwrap_or(usize::MAX);
    if basis.elements.len() != expected {
        violations.push(Violation::Count {
            expected,
            found: basis.elements.len(),
        });
    }

    // Overlaps only arise between elements sharing a configuration.
    let mut by_config: HashMap<&FockConfig, Vec<(usize, Complex64)>> = HashMap::new();
    for (i, e) in basis.elements.iter().enumerate() {
        if e.terms.is_empty() {
            violations.push(Violation::Empty { element: i });
        }
        for (a, c) in &e.terms {
            if c.n_modes() != d.n_waveguides {
                violations.push(Violation::ModeCount {
                    element: i,
                    expected: d.n_waveguides,
                    found: c.n_modes(),
                });
            }
            if c.photon_count() != d.n_photons {
                violations.push(Violation::PhotonNumber {
                    element: i,
                    expected: d.n_photons,
                    found: c.photon_count(),
                });
            }
            by_config.entry(c).or_default().push((i, *a));
        }
    }
    let mut gram: HashMap<(usize, usize), Complex64> = HashMap::new();
    for entries in by_config.values() {
        for &(i, ai) in entries {
            for &(j, aj) in entries {
                if i <= j {
                    *gram.entry((i, j)).or_default() += ai.conj() * aj;
                }
            }
        }
    }
    let mut pairs: Vec<_> = gram.into_iter().collect();
    pairs.sort_by_key(|(k, _)| *k);
    for ((i, j), v) in pairs {
        if i == j {
            if (v.re - 1.0).abs() > ORTHONORMALITY_TOL || v.im.abs() > ORTHONORMALITY_TOL {
                violations.push(Violation::Normalization {
                    element: i,
                    norm: v.norm(),
                });
            }
        } else if v.norm() > ORTHONORMALITY_TOL {
            violations.push(Violation::Orthogonality {
                first: i,
                second: j,
                overlap: v.norm(),
            });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}
