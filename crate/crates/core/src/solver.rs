//! Sparse recovery of a nonnegative coefficient vector from Γ ≈ M·p.
//!
//! The coefficients are probabilities, so every feasible point has unit l₁
//! norm and l₁ minimization carries no sparsity pressure. The recovery is
//! instead greedy: Orthogonal Matching Pursuit that only admits atoms
//! positively correlated with the residual and refits the support with
//! nonnegative least squares.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensing::{degenerate_column_groups, SensingMatrix};

/// Least squares min ‖a·x − b‖₂ via Householder QR with column pivoting.
/// Rank-deficient systems get a basic solution (dependent columns set to 0).
pub fn lstsq(a: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
    let (m, n) = a.dim();
    let mut r = a.to_owned();
    let mut qtb = b.to_owned();
    let mut perm: Vec<usize> = (0..n).collect();
    let col_norm = |r: &Array2<f64>, j: usize, from: usize| {
        r.column(j)
            .slice(ndarray::s![from..])
            .dot(&r.column(j).slice(ndarray::s![from..]))
            .sqrt()
    };
    let scale = (0..n).map(|j| col_norm(&r, j, 0)).fold(0.0, f64::max);
    let rank_tol = f64::EPSILON * (m.max(n) as f64) * scale;
    let mut rank = 0;
    for k in 0..m.min(n) {
        let (pivot, pnorm) =
            (k..n)
                .map(|j| (j, col_norm(&r, j, k)))
                .fold(
                    (k, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if pnorm <= rank_tol || pnorm == 0.0 {
            break;
        }
        if pivot != k {
            for i in 0..m {
                r.swap([i, k], [i, pivot]);
            }
            perm.swap(k, pivot);
        }
        // Householder vector v with v[0] = x[0] + sign(x[0])·‖x‖.
        let alpha = if r[[k, k]] >= 0.0 { -pnorm } else { pnorm };
        let mut v: Vec<f64> = (k..m).map(|i| r[[i, k]]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in k..n {
                let dot: f64 = v.iter().enumerate().map(|(i, vi)| vi * r[[k + i, j]]).sum();
                let f = 2.0 * dot / vnorm2;
                for (i, vi) in v.iter().enumerate() {
                    r[[k + i, j]] -= f * vi;
                }
            }
            let dot: f64 = v.iter().enumerate().map(|(i, vi)| vi * qtb[k + i]).sum();
            let f = 2.0 * dot / vnorm2;
            for (i, vi) in v.iter().enumerate() {
                qtb[k + i] -= f * vi;
            }
        }
        rank = k + 1;
    }
    let mut y = vec![0.0; n];
    for k in (0..rank).rev() {
        let mut acc = qtb[k];
        for j in k + 1..rank {
            acc -= r[[k, j]] * y[j];
        }
        y[k] = acc / r[[k, k]];
    }
    let mut x = Array1::zeros(n);
    for (k, &p) in perm.iter().enumerate() {
        x[p] = y[k];
    }
    x
}

/// Nonnegative least squares, min ‖a·x − b‖₂ subject to x ≥ 0
/// (Lawson–Hanson active set).
pub fn nnls(a: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>) -> Array1<f64> {
    nnls_warm(a, b, &[])
}

/// [`nnls`] started from a passive set believed to be near optimal.
pub fn nnls_warm(a: ArrayView2<'_, f64>, b: ArrayView1<'_, f64>, initial: &[usize]) -> Array1<f64> {
    let n = a.ncols();
    let mut x = Array1::<f64>::zeros(n);
    if n == 0 || a.nrows() == 0 {
        return x;
    }
    let atb = a.t().dot(&b);
    let tol = 1e-12
        * atb
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
    let mut passive = vec![false; n];

    let solve_on = |passive: &[bool]| -> Array1<f64> {
        let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = a.select(ndarray::Axis(1), &cols);
        let z = lstsq(sub.view(), b);
        let mut s = Array1::zeros(n);
        for (k, &j) in cols.iter().enumerate() {
            s[j] = z[k];
        }
        s
    };

    // A warm start is only usable when its unconstrained fit is feasible.
    if !initial.is_empty() {
        for &j in initial {
            if j < n {
                passive[j] = true;
            }
        }
        let s = solve_on(&passive);
        if (0..n).all(|j| !passive[j] || s[j] > 0.0) {
            x = s;
        } else {
            passive.iter_mut().for_each(|p| *p = false);
        }
    }
    let mut blocked: Option<usize> = None;
    let max_outer = 3 * n + 10;
    for _ in 0..max_outer {
        let grad = atb.clone() - a.t().dot(&a.dot(&x));
        let candidate = (0..n)
            .filter(|&j| !passive[j] && Some(j) != blocked)
            .map(|j| (j, grad[j]))
            .fold(None, |best: Option<(usize, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        match candidate {
            Some((j, g)) if g > tol => {
                passive[j] = true;
                blocked = Some(j);
            }
            _ => break,
        }

        // Inner loop: step toward the unconstrained solution on the passive
        // set until it is strictly feasible.
        let mut entered_dropped = false;
        for _ in 0..=n {
            let s = solve_on(&passive);
            let infeasible: Vec<usize> = (0..n).filter(|&j| passive[j] && s[j] <= 0.0).collect();
            if infeasible.is_empty() {
                x = s;
                break;
            }
            let step = infeasible
                .iter()
                .map(|&j| x[j] / (x[j] - s[j]))
                .fold(f64::INFINITY, f64::min)
                .clamp(0.0, 1.0);
            for j in 0..n {
                if passive[j] {
                    x[j] += step * (s[j] - x[j]);
                }
            }
            for j in 0..n {
                if passive[j] && x[j] <= 1e-15 * (1.0 + x[j].abs()) {
                    passive[j] = false;
                    x[j] = 0.0;
                    if Some(j) == blocked {
                        entered_dropped = true;
                    }
                }
            }
        }
        if !entered_dropped {
            blocked = None;
        }
    }
    x
}

/// Cholesky factor of a Gram submatrix, grown one column at a time.
struct GrowingCholesky {
    rows: Vec<Vec<f64>>,
}

impl GrowingCholesky {
    fn new() -> Self {
        Self { rows: Vec::new() }
    }

    /// Appends column `j`; refuses (and leaves the factor untouched) when it is
    /// numerically dependent on the current set.
    fn push(&mut self, g: ArrayView2<'_, f64>, set: &[usize], j: usize) -> bool {
        let k = self.rows.len();
        let mut l = vec![0.0; k + 1];
        for i in 0..k {
            let mut s = g[[set[i], j]];
            for t in 0..i {
                s -= self.rows[i][t] * l[t];
            }
            l[i] = s / self.rows[i][i];
        }
        let d2 = g[[j, j]] - l[..k].iter().map(|v| v * v).sum::<f64>();
        if !(d2 > 1e-10 * g[[j, j]]) {
            return false;
        }
        l[k] = d2.sqrt();
        self.rows.push(l);
        true
    }

    fn rebuild(g: ArrayView2<'_, f64>, set: &[usize]) -> (Self, Vec<usize>) {
        let mut f = Self::new();
        let mut kept = Vec::with_capacity(set.len());
        for &j in set {
            if f.push(g, &kept, j) {
                kept.push(j);
            }
        }
        (f, kept)
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.rows.len();
        let mut y = rhs.to_vec();
        for i in 0..n {
            for t in 0..i {
                y[i] -= self.rows[i][t] * y[t];
            }
            y[i] /= self.rows[i][i];
        }
        for i in (0..n).rev() {
            for t in i + 1..n {
                y[i] -= self.rows[t][i] * y[t];
            }
            y[i] /= self.rows[i][i];
        }
        y
    }
}

/// Lawson–Hanson NNLS in normal-equation form: minimizes xᵀGx − 2cᵀx over
/// x ≥ 0 with x_j = 0 wherever `allowed[j]` is false. Starts from the
/// unconstrained fit on `initial` when that fit is strictly positive.
pub fn nnls_gram(
    g: ArrayView2<'_, f64>,
    c: ArrayView1<'_, f64>,
    allowed: &[bool],
    initial: &[usize],
) -> Array1<f64> {
    let n = c.len();
    let mut x = Array1::<f64>::zeros(n);
    let cmax = c.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if cmax == 0.0 {
        return x;
    }
    let tol = 1e-12 * cmax;
    let rhs = |set: &[usize]| set.iter().map(|&j| c[j]).collect::<Vec<_>>();

    let initial: Vec<usize> = initial.iter().copied().filter(|&j| allowed[j]).collect();
    let (mut chol, mut passive) = GrowingCholesky::rebuild(g, &initial);
    if !passive.is_empty() {
        let z = chol.solve(&rhs(&passive));
        if z.iter().all(|&v| v > 0.0) {
            for (&j, &v) in passive.iter().zip(&z) {
                x[j] = v;
            }
        } else {
            chol = GrowingCholesky::new();
            passive.clear();
        }
    }
    let mut in_passive = vec![false; n];
    for &j in &passive {
        in_passive[j] = true;
    }
    let mut blocked = vec![false; n];

    for _ in 0..3 * n.max(1) {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if !allowed[j] || in_passive[j] || blocked[j] {
                continue;
            }
            let mut w = c[j];
            for &p in &passive {
                w -= g[[j, p]] * x[p];
            }
            if w > tol && best.is_none_or(|(_, b)| w > b) {
                best = Some((j, w));
            }
        }
        let Some((j, _)) = best else { break };
        if !chol.push(g, &passive, j) {
            blocked[j] = true;
            continue;
        }
        passive.push(j);
        in_passive[j] = true;

        loop {
            let z = chol.solve(&rhs(&passive));
            if z.iter().all(|&v| v > 0.0) {
                for (&p, &v) in passive.iter().zip(&z) {
                    x[p] = v;
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            let mut hit = passive[0];
            for (&p, &v) in passive.iter().zip(&z) {
                if v <= 0.0 {
                    let a = x[p] / (x[p] - v);
                    if a < alpha {
                        alpha = a;
                        hit = p;
                    }
                }
            }
            for (&p, &v) in passive.iter().zip(&z) {
                x[p] += alpha * (v - x[p]);
            }
            x[hit] = 0.0;
            passive.retain(|&p| {
                let keep = x[p] > 0.0;
                if !keep {
                    x[p] = 0.0;
                    in_passive[p] = false;
                }
                keep
            });
            if hit == j && alpha == 0.0 {
                // Rounding noise on the entering column; keep it out.
                blocked[j] = true;
            } else {
                blocked.iter_mut().for_each(|b| *b = false);
            }
            let (f, kept) = GrowingCholesky::rebuild(g, &passive);
            for &p in &passive {
                if !kept.contains(&p) {
                    x[p] = 0.0;
                    in_passive[p] = false;
                }
            }
            chol = f;
            passive = kept;
            if passive.is_empty() {
                break;
            }
        }
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_support: usize,
    /// Stop once ‖r‖₂ ≤ rel_residual_tol · ‖Γ‖₂.
    pub rel_residual_tol: f64,
    /// Coefficients below this are pruned before the final refit.
    pub min_coefficient: f64,
    /// Renormalize the output to unit sum.
    pub enforce_unit_sum: bool,
    /// Max-norm tolerance for treating two columns as indistinguishable.
    pub degeneracy_tol: f64,
    /// After the greedy stage, re-solve the nonnegative fit over the whole
    /// dictionary starting from the greedy support.
    #[serde(default = "default_refine")]
    pub refine: bool,
}

fn default_refine() -> bool {
    true
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_support: 40,
            rel_residual_tol: 0.02,
            min_coefficient: 1e-6,
            enforce_unit_sum: true,
            degeneracy_tol: 1e-10,
            refine: true,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_support == 0 {
            return Err(Error::InvalidArgument("max_support must be >= 1".into()));
        }
        if !(self.rel_residual_tol > 0.0)
            || !(self.min_coefficient > 0.0)
            || !(self.degeneracy_tol >= 0.0)
        {
            return Err(Error::InvalidArgument(
                "solver tolerances must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    /// Selected basis indices, ascending.
    pub support: Vec<usize>,
    /// Coefficients on `support`, renormalized when requested.
    pub coefficients: Vec<f64>,
    /// Coefficients on `support` straight from the final refit.
    pub raw_coefficients: Vec<f64>,
    pub iterations: usize,
    pub final_rel_residual: f64,
    /// Degenerate column groups that intersect the support. Mass within each
    /// group is not individually identifiable.
    pub degenerate_groups_touched: Vec<Vec<usize>>,
    /// ‖r‖₂ after each greedy iteration.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub residual_history: Vec<f64>,
    /// Set when the measurement vector was identically zero.
    #[serde(default)]
    pub zero_measurement: bool,
}

impl RecoveryResult {
    pub fn dense(&self, n_basis: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_basis];
        for (&i, &v) in self.support.iter().zip(&self.coefficients) {
            out[i] = v;
        }
        out
    }
}

/// A recovery routine for Γ ≈ M·p over a fixed sensing matrix.
pub trait SparseRecovery {
    fn recover(&self, gamma: &[f64]) -> Result<RecoveryResult>;
}

/// Simplex-constrained OMP bound to one sensing matrix. Column norms and the
/// degenerate-column map are computed once and reused across recoveries.
#[derive(Debug, Clone)]
pub struct OmpSolver<'a> {
    matrix: &'a SensingMatrix,
    opts: SolverOptions,
    norms: Vec<f64>,
    groups: Vec<Vec<usize>>,
    /// Lowest index of each column's degenerate group (itself if none).
    representative: Vec<usize>,
    gram: Option<Array2<f64>>,
}

impl<'a> OmpSolver<'a> {
    pub fn new(matrix: &'a SensingMatrix, opts: SolverOptions) -> Result<Self> {
        opts.validate()?;
        let groups = degenerate_column_groups(matrix, opts.degeneracy_tol);
        Ok(Self::with_groups(matrix, opts, groups))
    }

    /// Uses precomputed degenerate groups instead of scanning the matrix.
    pub fn with_groups(
        matrix: &'a SensingMatrix,
        opts: SolverOptions,
        groups: Vec<Vec<usize>>,
    ) -> Self {
        let norms = matrix
            .data()
            .columns()
            .into_iter()
            .map(|c| c.dot(&c).sqrt())
            .collect();
        let mut representative: Vec<usize> = (0..matrix.n_basis()).collect();
        for g in &groups {
            for &j in g {
                representative[j] = g[0];
            }
        }
        let gram = opts.refine.then(|| matrix.data().t().dot(matrix.data()));
        Self {
            matrix,
            opts,
            norms,
            groups,
            representative,
            gram,
        }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    fn fit(
        &self,
        support: &[usize],
        gamma: ArrayView1<'_, f64>,
        warm: &[usize],
    ) -> (Vec<f64>, Array1<f64>) {
        let sub = self.matrix.data().select(ndarray::Axis(1), support);
        let x = nnls_warm(sub.view(), gamma, warm);
        let residual = &gamma - &sub.dot(&x);
        (x.to_vec(), residual)
    }
}

impl SparseRecovery for OmpSolver<'_> {
    fn recover(&self, gamma: &[f64]) -> Result<RecoveryResult> {
        let m = self.matrix.data();
        if gamma.len() != m.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} measurements for a matrix with {} rows",
                gamma.len(),
                m.nrows()
            )));
        }
        let gamma = ArrayView1::from(gamma);
        let gamma_norm = gamma.dot(&gamma).sqrt();
        if gamma_norm == 0.0 {
            return Ok(RecoveryResult {
                support: vec![],
                coefficients: vec![],
                raw_coefficients: vec![],
                iterations: 0,
                final_rel_residual: 0.0,
                degenerate_groups_touched: vec![],
                residual_history: vec![],
                zero_measurement: true,
            });
        }

        let mut support: Vec<usize> = Vec::new();
        let mut in_support = vec![false; m.ncols()];
        let mut coeffs: Vec<f64> = Vec::new();
        let mut residual = gamma.to_owned();
        let mut history = Vec::new();
        let mut iterations = 0;
        let target = self.opts.rel_residual_tol * gamma_norm;

        while residual.dot(&residual).sqrt() > target && support.len() < self.opts.max_support {
            let corr = m.t().dot(&residual);
            let floor = 1e-12 * residual.dot(&residual).sqrt();
            let mut best: Option<(usize, f64)> = None;
            for (j, &c) in corr.iter().enumerate() {
                if in_support[self.representative[j]] || self.norms[j] == 0.0 {
                    continue;
                }
                let score = c / self.norms[j];
                if score > floor && best.is_none_or(|(_, s)| score > s) {
                    best = Some((j, score));
                }
            }
            let Some((j, _)) = best else { break };
            let j = self.representative[j];
            in_support[j] = true;
            let warm: Vec<usize> = (0..support.len()).filter(|&k| coeffs[k] > 0.0).collect();
            support.push(j);
            let (x, r) = self.fit(&support, gamma, &warm);
            coeffs = x;
            residual = r;
            history.push(residual.dot(&residual).sqrt());
            iterations += 1;
        }

        if let Some(g) = &self.gram {
            let allowed: Vec<bool> = (0..m.ncols())
                .map(|j| self.representative[j] == j && self.norms[j] > 0.0)
                .collect();
            let start: Vec<usize> = support
                .iter()
                .zip(&coeffs)
                .filter(|(_, &c)| c > 0.0)
                .map(|(&j, _)| j)
                .collect();
            let c = m.t().dot(&gamma);
            let x = nnls_gram(g.view(), c.view(), &allowed, &start);
            (support, coeffs) = x
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > 0.0)
                .map(|(j, &v)| (j, v))
                .unzip();
        }

        let kept: Vec<usize> = support
            .iter()
            .zip(&coeffs)
            .filter(|(_, &c)| c >= self.opts.min_coefficient)
            .map(|(&j, _)| j)
            .collect();
        let mut kept = kept;
        kept.sort_unstable();
        let (raw, residual) = if kept.is_empty() {
            (vec![], gamma.to_owned())
        } else {
            self.fit(&kept, gamma, &(0..kept.len()).collect::<Vec<_>>())
        };
        // The refit may zero out further entries.
        let (support, raw): (Vec<usize>, Vec<f64>) =
            kept.into_iter().zip(raw).filter(|(_, c)| *c > 0.0).unzip();
        let total: f64 = raw.iter().sum();
        let coefficients = if self.opts.enforce_unit_sum && total > 0.0 {
            raw.iter().map(|c| c / total).collect()
        } else {
            raw.clone()
        };
        let degenerate_groups_touched = self
            .groups
            .iter()
            .filter(|g| g.iter().any(|j| support.binary_search(j).is_ok()))
            .cloned()
            .collect();
        Ok(RecoveryResult {
            support,
            coefficients,
            raw_coefficients: raw,
            iterations,
            final_rel_residual: residual.dot(&residual).sqrt() / gamma_norm,
            degenerate_groups_touched,
            residual_history: history,
            zero_measurement: false,
        })
    }
}

/// One-shot recovery; builds the solver state on every call.
pub fn constrained_omp(
    m: &SensingMatrix,
    gamma: &[f64],
    opts: SolverOptions,
) -> Result<RecoveryResult> {
    OmpSolver::new(m, opts)?.recover(gamma)
}
