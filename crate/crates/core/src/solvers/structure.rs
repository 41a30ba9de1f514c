//! Structured penalty matrices: products, null-space bases of the zero
//! pattern, and subgradient certificates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::criterion::{build_sparse_fused, PenaltyKind};
use crate::error::Result;

#[derive(Debug, Clone)]
pub(crate) enum Penalty {
    Identity(usize),
    /// First differences.
    Fused(usize),
    SparseFused(usize, f64),
    Dense(DMatrix<f64>),
}

impl Penalty {
    pub fn from_kind(kind: &PenaltyKind, n: usize) -> Self {
        match kind {
            PenaltyKind::Identity => Penalty::Identity(n),
            PenaltyKind::Fused => Penalty::Fused(n),
            PenaltyKind::SparseFused { fusion_weight } => Penalty::SparseFused(n, *fusion_weight),
            PenaltyKind::Custom(d) => Penalty::Dense(d.clone()),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Penalty::Identity(n) | Penalty::Fused(n) | Penalty::SparseFused(n, _) => *n,
            Penalty::Dense(d) => d.ncols(),
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            Penalty::Identity(n) => *n,
            Penalty::Fused(n) => n - 1,
            Penalty::SparseFused(n, _) => 2 * n - 1,
            Penalty::Dense(d) => d.nrows(),
        }
    }

    pub fn dense(&self) -> DMatrix<f64> {
        match self {
            Penalty::Identity(n) => DMatrix::identity(*n, *n),
            Penalty::Fused(n) => crate::criterion::build_fused_difference(*n).expect("n >= 2"),
            Penalty::SparseFused(n, a) => build_sparse_fused(*n, *a).expect("validated"),
            Penalty::Dense(d) => d.clone(),
        }
    }

    /// `D x`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Penalty::Identity(_) => x.clone(),
            Penalty::Fused(n) => DVector::from_fn(n - 1, |k, _| x[k + 1] - x[k]),
            Penalty::SparseFused(n, a) => DVector::from_fn(2 * n - 1, |k, _| {
                if k < n - 1 {
                    a * (x[k + 1] - x[k])
                } else {
                    x[k - (n - 1)]
                }
            }),
            Penalty::Dense(d) => d * x,
        }
    }

    /// `D^T y`.
    pub fn apply_t(&self, y: &DVector<f64>) -> DVector<f64> {
        match self {
            Penalty::Identity(_) => y.clone(),
            Penalty::Fused(n) => fused_t(*n, y.as_slice(), 1.0),
            Penalty::SparseFused(n, a) => {
                let mut out = fused_t(*n, &y.as_slice()[..n - 1], *a);
                for i in 0..*n {
                    out[i] += y[n - 1 + i];
                }
                out
            }
            Penalty::Dense(d) => d.tr_mul(y),
        }
    }

    /// `D^T D`.
    pub fn gram(&self) -> DMatrix<f64> {
        match self {
            Penalty::Identity(n) => DMatrix::identity(*n, *n),
            Penalty::Dense(d) => d.tr_mul(d),
            _ => {
                let d = self.dense();
                d.tr_mul(&d)
            }
        }
    }

    /// Basis of `{x : D_Z x = 0}` where `zero[k]` marks the rows in `Z`.
    pub fn null_basis(&self, zero: &[bool]) -> NullBasis {
        match self {
            Penalty::Identity(n) => NullBasis::Columns((0..*n).filter(|&i| !zero[i]).collect()),
            Penalty::Fused(n) => NullBasis::Segments(segments(*n, |k| zero[k], |_| false)),
            Penalty::SparseFused(n, a) => {
                let join = |k: usize| *a != 0.0 && zero[k];
                NullBasis::Segments(segments(*n, join, |i| zero[n - 1 + i]))
            }
            Penalty::Dense(d) => {
                let rows: Vec<usize> = (0..d.nrows()).filter(|&k| zero[k]).collect();
                let n = d.ncols();
                if rows.is_empty() {
                    return NullBasis::Dense(DMatrix::identity(n, n));
                }
                let dz = d.select_rows(&rows);
                let eig = SymmetricEigen::new(dz.tr_mul(&dz));
                let max = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
                let keep: Vec<usize> = (0..n)
                    .filter(|&i| eig.eigenvalues[i] <= max * 1e-12 * n as f64)
                    .collect();
                NullBasis::Dense(eig.eigenvectors.select_columns(&keep))
            }
        }
    }

    /// Smallest infinity norm of a `g` with `D^T g = v`, when one exists.
    pub fn dual_bound(&self, v: &DVector<f64>) -> Result<f64> {
        match self {
            Penalty::Identity(_) => Ok(v.amax()),
            _ => {
                let dt = self.dense().transpose();
                let g = dt
                    .svd(true, true)
                    .solve(v, 1e-12)
                    .map_err(|e| crate::Error::InvalidParameter(e.to_string()))?;
                Ok(g.amax())
            }
        }
    }
}

fn fused_t(n: usize, y: &[f64], scale: f64) -> DVector<f64> {
    // column k of D^T: -y[k] + y[k-1]
    DVector::from_fn(n, |k, _| {
        let prev = if k > 0 { y[k - 1] } else { 0.0 };
        let cur = if k < n - 1 { y[k] } else { 0.0 };
        scale * (prev - cur)
    })
}

/// Groups of consecutive indices joined by `join(k)` (link between `k` and
/// `k+1`); groups containing any index with `pinned(i)` are dropped.
fn segments(n: usize, join: impl Fn(usize) -> bool, pinned: impl Fn(usize) -> bool) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0];
    for k in 0..n - 1 {
        if join(k) {
            current.push(k + 1);
        } else {
            out.push(std::mem::replace(&mut current, vec![k + 1]));
        }
    }
    out.push(current);
    out.retain(|seg| !seg.iter().any(|&i| pinned(i)));
    out
}

/// Parameterization `x = B y` of the free directions.
#[derive(Debug, Clone)]
pub(crate) enum NullBasis {
    /// Unit vectors.
    Columns(Vec<usize>),
    /// Indicator vectors of disjoint index sets.
    Segments(Vec<Vec<usize>>),
    Dense(DMatrix<f64>),
}

impl NullBasis {
    pub fn dim(&self) -> usize {
        match self {
            NullBasis::Columns(c) => c.len(),
            NullBasis::Segments(s) => s.len(),
            NullBasis::Dense(b) => b.ncols(),
        }
    }

    /// `B^T P B`.
    pub fn project_matrix(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            NullBasis::Columns(c) => p.select_rows(c).select_columns(c),
            NullBasis::Segments(s) => {
                // sum columns within each segment, then rows
                let n = p.nrows();
                let mut cols = DMatrix::zeros(n, s.len());
                for (j, seg) in s.iter().enumerate() {
                    for &k in seg {
                        let mut dst = cols.column_mut(j);
                        dst += p.column(k);
                    }
                }
                DMatrix::from_fn(s.len(), s.len(), |i, j| s[i].iter().map(|&k| cols[(k, j)]).sum())
            }
            NullBasis::Dense(b) => b.tr_mul(&(p * b)),
        }
    }

    /// `B^T v`.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            NullBasis::Columns(c) => DVector::from_iterator(c.len(), c.iter().map(|&i| v[i])),
            NullBasis::Segments(s) => {
                DVector::from_iterator(s.len(), s.iter().map(|seg| seg.iter().map(|&i| v[i]).sum()))
            }
            NullBasis::Dense(b) => b.tr_mul(v),
        }
    }

    /// `B y`.
    pub fn expand(&self, y: &DVector<f64>, n: usize) -> DVector<f64> {
        match self {
            NullBasis::Columns(c) => {
                let mut x = DVector::zeros(n);
                for (j, &i) in c.iter().enumerate() {
                    x[i] = y[j];
                }
                x
            }
            NullBasis::Segments(s) => {
                let mut x = DVector::zeros(n);
                for (j, seg) in s.iter().enumerate() {
                    for &i in seg {
                        x[i] = y[j];
                    }
                }
                x
            }
            NullBasis::Dense(b) => b * y,
        }
    }
}

/// Finds a subgradient `g` (`|g| <= 1`, `g = sign(Dx)` off the zero set)
/// making `grad + lambda D^T g` small and returns its infinity norm.
///
/// `dual_guess` is an approximate `g`, e.g. from the ADMM multiplier.
pub(crate) fn kkt_residual(
    pen: &Penalty,
    grad: &DVector<f64>,
    lambda: f64,
    dx: &DVector<f64>,
    zero: &[bool],
    dual_guess: Option<&DVector<f64>>,
    tol: f64,
) -> f64 {
    if lambda == 0.0 {
        return grad.amax();
    }
    let sign = |k: usize| dx[k].signum();
    match pen {
        Penalty::Identity(n) => (0..*n)
            .map(|i| {
                let g = if zero[i] { (-grad[i] / lambda).clamp(-1.0, 1.0) } else { sign(i) };
                (grad[i] + lambda * g).abs()
            })
            .fold(0.0, f64::max),
        Penalty::Fused(n) => {
            let mut g = DVector::zeros(n - 1);
            let mut acc = 0.0;
            for k in 0..n - 1 {
                acc += grad[k];
                g[k] = if zero[k] { (acc / lambda).clamp(-1.0, 1.0) } else { sign(k) };
            }
            (grad + pen.apply_t(&g) * lambda).amax()
        }
        Penalty::SparseFused(n, a) => sparse_fused_residual(*n, *a, grad, lambda, dx, zero),
        Penalty::Dense(_) => {
            let d = pen.dense();
            let free: Vec<usize> = (0..d.nrows()).filter(|&k| zero[k]).collect();
            let mut fixed = DVector::zeros(d.nrows());
            for k in 0..d.nrows() {
                if !zero[k] {
                    fixed[k] = sign(k);
                }
            }
            let r0 = grad + d.tr_mul(&fixed) * lambda;
            if free.is_empty() {
                return r0.amax();
            }
            let dz_t = d.select_rows(&free).transpose();
            let target = -&r0 / lambda;
            let svd = dz_t.clone().svd(true, true);
            let mut g = match dual_guess {
                Some(guess) => DVector::from_iterator(free.len(), free.iter().map(|&k| guess[k])),
                None => DVector::zeros(free.len()),
            };
            let mut best = f64::INFINITY;
            // alternate projections between the affine solution set and the box
            for _ in 0..500 {
                let miss = &target - &dz_t * &g;
                if let Ok(step) = svd.solve(&miss, 1e-12) {
                    g += step;
                }
                g.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
                let res = (&r0 + &dz_t * &g * lambda).amax();
                best = best.min(res);
                if best <= tol {
                    break;
                }
            }
            best
        }
    }
}

/// Smallest `|grad + lambda D^T g|_inf` over admissible subgradients `g` of
/// the sparse-fused penalty.
///
/// With `s_k = a g1_k`, row `k` reads `c_k + s_{k-1} - s_k + g2_k` (scaled by
/// `lambda`), so the reachable `s_k` form an interval that can be propagated
/// along the chain. The residual bound is found by bisection.
fn sparse_fused_residual(n: usize, a: f64, grad: &DVector<f64>, lambda: f64, dx: &DVector<f64>, zero: &[bool]) -> f64 {
    let box_or_sign = |k: usize, scale: f64| {
        if zero[k] {
            (-scale, scale)
        } else {
            let s = scale * dx[k].signum();
            (s, s)
        }
    };
    let feasible = |tau: f64| {
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        for k in 0..n {
            let c = grad[k] / lambda;
            let (g_lo, g_hi) = box_or_sign(n - 1 + k, 1.0);
            lo += c + g_lo - tau;
            hi += c + g_hi + tau;
            let (s_lo, s_hi) = if k + 1 < n { box_or_sign(k, a) } else { (0.0, 0.0) };
            lo = lo.max(s_lo);
            hi = hi.min(s_hi);
            if lo > hi {
                return false;
            }
        }
        true
    };
    // the subgradient with zeros on every free row is admissible
    let mut fixed = DVector::zeros(2 * n - 1);
    for k in 0..2 * n - 1 {
        if !zero[k] {
            fixed[k] = dx[k].signum();
        }
    }
    let mut hi = (grad + Penalty::SparseFused(n, a).apply_t(&fixed) * lambda).amax() / lambda;
    let mut lo = 0.0;
    if feasible(0.0) {
        return 0.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-6 * hi {
            break;
        }
    }
    hi * lambda
}
