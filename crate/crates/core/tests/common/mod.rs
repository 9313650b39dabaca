//! Reference models built without permanents or the chain eigenbasis.
#![allow(dead_code)]

use std::collections::HashMap;

use num_complex::Complex64;

type State = HashMap<Vec<u32>, Complex64>;

/// All occupation tuples with `n` photons over `modes` modes.
pub fn sector(modes: usize, n: u32) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, left: u32, modes: usize, out: &mut Vec<Vec<u32>>) {
        if prefix.len() + 1 == modes {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(prefix, left - k, modes, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), n, modes, &mut out);
    out
}

fn annihilate(state: &State, mode: usize) -> State {
    let mut out = State::new();
    for (occ, &amp) in state {
        if occ[mode] > 0 {
            let mut next = occ.clone();
            next[mode] -= 1;
            *out.entry(next).or_default() += amp * (occ[mode] as f64).sqrt();
        }
    }
    out
}

fn create(state: &State, mode: usize) -> State {
    let mut out = State::new();
    for (occ, &amp) in state {
        let mut next = occ.clone();
        next[mode] += 1;
        let factor = (next[mode] as f64).sqrt();
        *out.entry(next).or_default() += amp * factor;
    }
    out
}

/// Many-body generator Σ H_nm a†_n a_m on the n-photon sector of an open
/// chain, as a dense matrix over `sector(modes, n)`.
fn many_body_hamiltonian(modes: usize, n: u32, coupling: f64, beta: f64) -> Vec<Vec<f64>> {
    let states = sector(modes, n);
    let lookup: HashMap<Vec<u32>, usize> = states
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, s)| (s, i))
        .collect();
    let d = states.len();
    let mut h = vec![vec![0.0; d]; d];
    let mut hop = |target: usize, to: usize, from: usize, w: f64, src: &Vec<u32>| {
        let one: State = [(src.clone(), Complex64::new(1.0, 0.0))].into();
        for (occ, amp) in create(&annihilate(&one, from), to) {
            h[lookup[&occ]][target] += w * amp.re;
        }
    };
    for (col, s) in states.iter().enumerate() {
        for m in 0..modes {
            hop(col, m, m, beta, s);
            if m + 1 < modes {
                hop(col, m, m + 1, coupling, s);
                hop(col, m + 1, m, coupling, s);
            }
        }
    }
    h
}

type CMat = Vec<Vec<Complex64>>;

fn matmul(a: &CMat, b: &CMat) -> CMat {
    let n = a.len();
    let mut c = vec![vec![Complex64::default(); n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            for j in 0..n {
                c[i][j] += aik * b[k][j];
            }
        }
    }
    c
}

/// exp(A) by Taylor series with scaling and squaring.
pub fn expm(a: &CMat) -> CMat {
    let n = a.len();
    let norm = a
        .iter()
        .map(|r| r.iter().map(|v| v.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0;
    while norm / f64::powi(2.0, s) > 0.25 {
        s += 1;
    }
    let scale = f64::powi(2.0, -s);
    let scaled: CMat = a
        .iter()
        .map(|r| r.iter().map(|v| v * scale).collect())
        .collect();
    let mut result: CMat = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0))
                .collect()
        })
        .collect();
    let mut term = result.clone();
    for k in 1..30 {
        term = matmul(&term, &scaled);
        for row in term.iter_mut() {
            for v in row.iter_mut() {
                *v /= k as f64;
            }
        }
        for i in 0..n {
            for j in 0..n {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        result = matmul(&result, &result);
    }
    result
}

/// Normally ordered G-fold correlations of the evolved state, one per
/// multiset in `coincidences` (0-based modes).
pub fn operator_column(
    modes: usize,
    coupling: f64,
    beta: f64,
    z: f64,
    terms: &[(Complex64, Vec<u32>)],
    coincidences: &[Vec<usize>],
) -> Vec<f64> {
    let n: u32 = terms[0].1.iter().sum();
    let states = sector(modes, n);
    let h = many_body_hamiltonian(modes, n, coupling, beta);
    let generator: CMat = h
        .iter()
        .map(|r| r.iter().map(|&v| Complex64::new(0.0, z * v)).collect())
        .collect();
    let v = expm(&generator);
    let lookup: HashMap<&Vec<u32>, usize> =
        states.iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut input = vec![Complex64::default(); states.len()];
    for (c, occ) in terms {
        input[lookup[occ]] += c;
    }
    let mut evolved = State::new();
    for (i, s) in states.iter().enumerate() {
        let amp: Complex64 = (0..states.len()).map(|j| v[i][j] * input[j]).sum();
        evolved.insert(s.clone(), amp);
    }
    coincidences
        .iter()
        .map(|q| {
            let mut st = evolved.clone();
            for &mode in q {
                st = annihilate(&st, mode);
            }
            st.values().map(|a| a.norm_sqr()).sum()
        })
        .collect()
}

/// Bessel function of the first kind, integer order, by power series.
pub fn bessel_j(order: u32, x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = half.powi(order as i32) / (1..=order).map(f64::from).product::<f64>();
    let mut sum = term;
    for k in 1..200 {
        term *= -half * half / (k as f64 * (k + order) as f64);
        sum += term;
        if term.abs() < 1e-300 {
            break;
        }
    }
    sum
}
