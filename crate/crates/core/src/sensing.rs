//! Coincidence sensing matrix: maps basis coefficients p to the vector of
//! normally ordered G-fold correlations Γ = M·p at the array output.
//!
//! Every unordered multiset of G output waveguides (repeats included) is
//! one measurement, so N_m = C(N_w + G − 1, G). Same-waveguide entries carry
//! the normally ordered value m_q(m_q − 1)…, which assumes number-resolving
//! detection.

use std::collections::HashMap;
use std::io::{Read, Write};

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, BasisDescriptor, BasisElement};
use crate::error::{Error, Result};
use crate::fock::{
    check_superposition, enumerate_configs, factorial, multiset_count, submatrix_permanent,
    ConfigIndex,
};
use crate::lattice::{propagator, LatticeSpec, Propagator};

/// Ordered enumeration of the measured waveguide multisets.
#[derive(Debug, Clone)]
pub struct CoincidenceIndex {
    n_waveguides: usize,
    order: usize,
    /// 0-based, non-decreasing.
    entries: Vec<Vec<usize>>,
    lookup: HashMap<Vec<usize>, usize>,
}

impl CoincidenceIndex {
    /// Multisets in ascending lexicographic order: (1,1), (1,2), …, (1,N_w), (2,2), …
    pub fn new(n_waveguides: usize, order: usize) -> Result<Self> {
        if n_waveguides == 0 || order == 0 {
            return Err(Error::InvalidArgument(format!(
                "coincidence index needs waveguides and order >= 1, got {n_waveguides}, {order}"
            )));
        }
        let count = multiset_count(n_waveguides, order)?;
        let mut entries = Vec::with_capacity(count);
        let mut current = Vec::with_capacity(order);
        fill_multisets(n_waveguides, order, 0, &mut current, &mut entries);
        let lookup = entries
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, e)| (e, i))
            .collect();
        Ok(Self {
            n_waveguides,
            order,
            entries,
            lookup,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_waveguides(&self) -> usize {
        self.n_waveguides
    }

    /// 0-based sorted waveguide indices of entry `i`.
    pub fn entry(&self, i: usize) -> &[usize] {
        &self.entries[i]
    }

    pub fn entries(&self) -> &[Vec<usize>] {
        &self.entries
    }

    /// Looks up a sorted 0-based multiset.
    pub fn index_of(&self, multiset: &[usize]) -> Option<usize> {
        self.lookup.get(multiset).copied()
    }

    /// Number of ordered index tuples that collapse onto entry `i`,
    /// G! / Π_q g_q!.
    pub fn multiplicity(&self, i: usize) -> f64 {
        let e = &self.entries[i];
        let mut denom = 1.0;
        let mut run = 1u32;
        for w in e.windows(2) {
            if w[0] == w[1] {
                run += 1;
            } else {
                denom *= factorial(run);
                run = 1;
            }
        }
        denom *= factorial(run);
        factorial(self.order as u32) / denom
    }
}

fn fill_multisets(
    n: usize,
    order: usize,
    start: usize,
    current: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if current.len() == order {
        out.push(current.clone());
        return;
    }
    for q in start..n {
        current.push(q);
        fill_multisets(n, order, q, current, out);
        current.pop();
    }
}

/// Precomputed machinery for evaluating coincidence columns of one
/// propagator at one correlation order.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    propagator: Propagator,
    configs: ConfigIndex,
    coincidences: CoincidenceIndex,
    /// Per output config: photon modes and 1/√(Π m_k!).
    outputs: Vec<(Vec<usize>, f64)>,
    /// Per output config: (coincidence entry, normally ordered count) pairs.
    contributions: Vec<Vec<(usize, f64)>>,
}

impl ForwardModel {
    pub fn new(propagator: Propagator, n_photons: u32, order: usize) -> Result<Self> {
        if order == 0 || order > n_photons as usize {
            return Err(Error::OrderOutOfRange {
                order,
                photons: n_photons as usize,
            });
        }
        let configs = enumerate_configs(propagator.n_modes(), n_photons)?;
        let coincidences = CoincidenceIndex::new(propagator.n_modes(), order)?;
        let outputs = configs
            .configs()
            .iter()
            .map(|c| (c.mode_list(), 1.0 / c.factorial_product().sqrt()))
            .collect();
        let contributions = configs
            .configs()
            .iter()
            .map(|c| {
                let mut out = Vec::new();
                let mut picked = Vec::with_capacity(order);
                sub_multisets(
                    c.occupations(),
                    order,
                    0,
                    &mut picked,
                    1.0,
                    &coincidences,
                    &mut out,
                );
                out
            })
            .collect();
        Ok(Self {
            propagator,
            configs,
            coincidences,
            outputs,
            contributions,
        })
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    pub fn configs(&self) -> &ConfigIndex {
        &self.configs
    }

    pub fn coincidences(&self) -> &CoincidenceIndex {
        &self.coincidences
    }

    pub fn order(&self) -> usize {
        self.coincidences.order()
    }

    /// Coincidence vector of one basis element.
    pub fn column(&self, element: &BasisElement) -> Result<Vec<f64>> {
        let n = check_superposition(element.terms())?;
        if n != self.configs.n_photons() {
            return Err(Error::PhotonMismatch {
                expected: self.configs.n_photons(),
                found: n,
            });
        }
        for (_, c) in element.terms() {
            if c.n_modes() != self.propagator.n_modes() {
                return Err(Error::DimensionMismatch(format!(
                    "element has {} modes, propagator has {}",
                    c.n_modes(),
                    self.propagator.n_modes()
                )));
            }
        }
        let inputs: Vec<(Complex64, Vec<usize>)> = element
            .terms()
            .iter()
            .map(|(a, c)| (a / c.factorial_product().sqrt(), c.mode_list()))
            .collect();
        let w = self.propagator.matrix().view();
        let mut column = vec![0.0; self.coincidences.len()];
        for ((rows, scale), contrib) in self.outputs.iter().zip(&self.contributions) {
            if contrib.is_empty() {
                continue;
            }
            let amp: Complex64 = inputs
                .iter()
                .map(|(a, cols)| a * submatrix_permanent(w, rows, cols))
                .sum();
            let prob = (amp * scale).norm_sqr();
            for &(entry, count) in contrib {
                column[entry] += prob * count;
            }
        }
        Ok(column)
    }
}

/// Enumerates the size-`remaining` sub-multisets of an occupation pattern,
/// emitting each with its falling-factorial weight Π_q m_q(m_q−1)…(m_q−g_q+1).
fn sub_multisets(
    occ: &[u32],
    remaining: usize,
    pos: usize,
    picked: &mut Vec<usize>,
    weight: f64,
    index: &CoincidenceIndex,
    out: &mut Vec<(usize, f64)>,
) {
    if remaining == 0 {
        let i = index.index_of(picked).expect("multiset enumerated");
        out.push((i, weight));
        return;
    }
    if pos == occ.len() {
        return;
    }
    let m = occ[pos] as usize;
    let mut w = weight;
    for g in 0..=m.min(remaining) {
        if g > 0 {
            w *= (m - g + 1) as f64;
            picked.push(pos);
        }
        sub_multisets(occ, remaining - g, pos + 1, picked, w, index, out);
    }
    for _ in 0..m.min(remaining) {
        picked.pop();
    }
}

/// Normally ordered G-fold correlation vector of `element` after propagation
/// through `w`.
pub fn coincidence_column(
    w: &Propagator,
    element: &BasisElement,
    order: usize,
) -> Result<Vec<f64>> {
    let n = element
        .terms()
        .first()
        .map(|(_, c)| c.photon_count())
        .ok_or_else(|| Error::InvalidArgument("empty basis element".into()))?;
    ForwardModel::new(w.clone(), n, order)?.column(element)
}

/// Real N_m × N_b sensing matrix with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    data: Array2<f64>,
    spec: LatticeSpec,
    basis: BasisDescriptor,
    order: usize,
}

impl SensingMatrix {
    pub fn from_parts(
        data: Array2<f64>,
        spec: LatticeSpec,
        basis: BasisDescriptor,
        order: usize,
    ) -> Result<Self> {
        let n_m = multiset_count(spec.n_waveguides, order)?;
        let n_b = multiset_count(basis.n_waveguides, basis.n_photons as usize)?;
        if data.dim() != (n_m, n_b) || basis.n_waveguides != spec.n_waveguides {
            return Err(Error::DimensionMismatch(format!(
                "matrix {:?} does not fit N_m={n_m}, N_b={n_b}",
                data.dim()
            )));
        }
        Ok(Self {
            data,
            spec,
            basis,
            order,
        })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn basis(&self) -> &BasisDescriptor {
        &self.basis
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n_measurements(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_basis(&self) -> usize {
        self.data.ncols()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.data.column(j)
    }

    /// Weighted column sums Σ_entries multiplicity × M[entry, j]; each equals
    /// N!/(N−G)! for a physical matrix.
    pub fn weighted_column_sums(&self) -> Vec<f64> {
        let index = CoincidenceIndex::new(self.spec.n_waveguides, self.order)
            .expect("validated at construction");
        let weights: Vec<f64> = (0..index.len()).map(|i| index.multiplicity(i)).collect();
        self.data
            .columns()
            .into_iter()
            .map(|col| col.iter().zip(&weights).map(|(v, w)| v * w).sum())
            .collect()
    }
}

pub fn build_sensing_matrix(
    spec: &LatticeSpec,
    basis: &Basis,
    order: usize,
) -> Result<SensingMatrix> {
    if basis.n_waveguides() != spec.n_waveguides {
        return Err(Error::DimensionMismatch(format!(
            "basis has {} waveguides, lattice has {}",
            basis.n_waveguides(),
            spec.n_waveguides
        )));
    }
    let model = ForwardModel::new(propagator(spec)?, basis.n_photons(), order)?;
    let columns: Vec<Vec<f64>> = basis
        .elements()
        .par_iter()
        .map(|e| model.column(e))
        .collect::<Result<_>>()?;
    let n_m = model.coincidences().len();
    let mut data = Array2::zeros((n_m, columns.len()));
    for (j, col) in columns.iter().enumerate() {
        data.column_mut(j).assign(&ArrayView1::from(col.as_slice()));
    }
    SensingMatrix::from_parts(data, *spec, *basis.descriptor(), order)
}

/// Groups of column indices whose columns agree within `tol` in max-norm.
/// Only groups of two or more are returned; members ascending, groups ordered
/// by their smallest member.
pub fn degenerate_column_groups(m: &SensingMatrix, tol: f64) -> Vec<Vec<usize>> {
    let data = m.data();
    let n_m = data.nrows();
    let n_b = data.ncols();
    let sums: Vec<f64> = data.columns().into_iter().map(|c| c.sum()).collect();
    let mut order: Vec<usize> = (0..n_b).collect();
    order.sort_by(|&a, &b| sums[a].total_cmp(&sums[b]).then(a.cmp(&b)));

    // Columns within tol in max-norm have sums within n_m·tol.
    let window = n_m as f64 * tol;
    let mut parent: Vec<usize> = (0..n_b).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (pos, &a) in order.iter().enumerate() {
        for &b in &order[pos + 1..] {
            if sums[b] - sums[a] > window {
                break;
            }
            let close = data
                .column(a)
                .iter()
                .zip(data.column(b))
                .all(|(x, y)| (x - y).abs() <= tol);
            if close {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for j in 0..n_b {
        let root = find(&mut parent, j);
        groups.entry(root).or_default().push(j);
    }
    groups.into_values().filter(|g| g.len() >= 2).collect()
}

const CACHE_MAGIC: &[u8; 4] = b"QSTM";
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CacheMetadata {
    spec: LatticeSpec,
    basis: BasisDescriptor,
    order: usize,
}

/// Writes the binary matrix cache: magic, version, N_w, N, G (u32), N_m, N_b
/// (u64), row-major f64 data, then a u64 length-prefixed JSON metadata blob.
/// All integers and floats little-endian.
pub fn write_cache<W: Write>(m: &SensingMatrix, mut out: W) -> Result<()> {
    let header_u32 = |v: usize| -> Result<[u8; 4]> {
        u32::try_from(v)
            .map(u32::to_le_bytes)
            .map_err(|_| Error::Format(format!("{v} does not fit the u32 header field")))
    };
    out.write_all(CACHE_MAGIC)?;
    out.write_all(&CACHE_VERSION.to_le_bytes())?;
    out.write_all(&header_u32(m.spec.n_waveguides)?)?;
    out.write_all(&header_u32(m.basis.n_photons as usize)?)?;
    out.write_all(&header_u32(m.order)?)?;
    out.write_all(&(m.n_measurements() as u64).to_le_bytes())?;
    out.write_all(&(m.n_basis() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(m.data.len() * 8);
    for row in m.data.rows() {
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    let meta = serde_json::to_vec(&CacheMetadata {
        spec: m.spec,
        basis: m.basis,
        order: m.order,
    })?;
    out.write_all(&(meta.len() as u64).to_le_bytes())?;
    out.write_all(&meta)?;
    out.flush()?;
    Ok(())
}

pub fn read_cache<R: Read>(mut input: R) -> Result<SensingMatrix> {
    let mut magic = [0u8; 4];
    read_exact(&mut input, &mut magic, "magic")?;
    if &magic != CACHE_MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut input, "version")?;
    if version != CACHE_VERSION {
        return Err(Error::Format(format!(
            "unsupported cache version {version}"
        )));
    }
    let n_w = read_u32(&mut input, "N_w")? as usize;
    let n = read_u32(&mut input, "N")?;
    let g = read_u32(&mut input, "G")? as usize;
    let n_m = read_u64(&mut input, "N_m")?;
    let n_b = read_u64(&mut input, "N_b")?;
    let expected_m = multiset_count(n_w, g)? as u64;
    let expected_b = multiset_count(n_w, n as usize)? as u64;
    if n_m != expected_m || n_b != expected_b {
        return Err(Error::Format(format!(
            "header dimensions {n_m}x{n_b} inconsistent with N_w={n_w}, N={n}, G={g}"
        )));
    }
    let (n_m, n_b) = (n_m as usize, n_b as usize);
    let mut raw = vec![0u8; n_m * n_b * 8];
    read_exact(&mut input, &mut raw, "matrix data")?;
    let values: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let data = Array2::from_shape_vec((n_m, n_b), values).expect("length checked");
    let meta_len = read_u64(&mut input, "metadata length")?;
    let mut meta = vec![
        0u8;
        usize::try_from(meta_len)
            .map_err(|_| Error::Format("metadata too large".into()))?
    ];
    read_exact(&mut input, &mut meta, "metadata")?;
    let meta: CacheMetadata = serde_json::from_slice(&meta)?;
    if meta.spec.n_waveguides != n_w || meta.basis.n_photons != n || meta.order != g {
        return Err(Error::Format("metadata disagrees with header".into()));
    }
    meta.spec.validate()?;
    SensingMatrix::from_parts(data, meta.spec, meta.basis, meta.order)
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    input.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => {
            Error::Format(format!("truncated cache while reading {what}"))
        }
        _ => Error::Io(e),
    })
}

fn read_u32<R: Read>(input: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(input: &mut R, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(input, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}
