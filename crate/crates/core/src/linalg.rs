//! Dense linear-algebra helpers shared by the embedders: symmetric
//! eigensolvers (dense and Lanczos), eigenvector sign canonicalization and
//! exact k-nearest-neighbor search.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Flips `v` so that its entry of largest magnitude (first one on ties) is
/// positive.
pub fn canonicalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues sorted non-increasing,
/// eigenvectors as columns with canonical signs. Returns the top `k`.
pub fn symmetric_top_dense(a: DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let k = k.min(n);
    let values = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, k);
    for (c, &i) in order[..k].iter().enumerate() {
        let mut col: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        canonicalize_sign(&mut col);
        vectors.column_mut(c).copy_from_slice(&col);
    }
    (values, vectors)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Top-`k` (largest algebraic) eigenpairs of the symmetric operator `apply`
/// on R^dim, by Lanczos iteration with full reorthogonalization.
///
/// Iteration stops once every wanted Ritz pair has residual below
/// `rel_tol * max|theta|`, or when the Krylov space spans R^dim. The start
/// vector is fixed, so results are deterministic.
pub fn lanczos_top<F>(dim: usize, k: usize, rel_tol: f64, mut apply: F) -> Result<(Vec<f64>, DMatrix<f64>)>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let k = k.min(dim);
    if k == 0 {
        return Ok((Vec::new(), DMatrix::zeros(dim, 0)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a5c_3e0f);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();

    let fresh = |basis: &[Vec<f64>], rng: &mut ChaCha8Rng| -> Option<Vec<f64>> {
        for _ in 0..8 {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
            for _ in 0..2 {
                for q in basis {
                    let c = dot(q, &v);
                    axpy(-c, q, &mut v);
                }
            }
            let nv = norm(&v);
            if nv > 1e-8 {
                v.iter_mut().for_each(|x| *x /= nv);
                return Some(v);
            }
        }
        None
    };

    let mut current = fresh(&basis, &mut rng).ok_or_else(|| Error::Numeric("lanczos start".into()))?;
    let mut w = vec![0.0; dim];
    let mut scale: f64 = 0.0;
    let check_every = 10usize;
    loop {
        apply(&current, &mut w);
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite value in Lanczos operator".into()));
        }
        let a = dot(&current, &w);
        axpy(-a, &current, &mut w);
        if let (Some(prev), Some(&b)) = (basis.last(), beta.last()) {
            axpy(-b, prev, &mut w);
        }
        basis.push(current);
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let b = norm(&w);
        scale = scale.max(a.abs()).max(b);
        let steps = basis.len();
        let exhausted = steps == dim;
        let breakdown = b <= 1e-13 * scale.max(f64::MIN_POSITIVE);

        if exhausted || (steps >= k && (steps % check_every == 0 || breakdown)) {
            let t = tridiagonal(&alpha, &beta);
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..steps).collect();
            order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
            let theta_max = eig.eigenvalues.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let tol = rel_tol * theta_max.max(f64::MIN_POSITIVE);
            let converged = exhausted
                || order[..k]
                    .iter()
                    .all(|&i| (b * eig.eigenvectors[(steps - 1, i)]).abs() <= tol);
            if converged {
                let values: Vec<f64> = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
                let mut vectors = DMatrix::zeros(dim, k);
                for (c, &i) in order[..k].iter().enumerate() {
                    let mut col = vec![0.0; dim];
                    for (j, q) in basis.iter().enumerate() {
                        axpy(eig.eigenvectors[(j, i)], q, &mut col);
                    }
                    let nc = norm(&col);
                    col.iter_mut().for_each(|x| *x /= nc);
                    canonicalize_sign(&mut col);
                    vectors.column_mut(c).copy_from_slice(&col);
                }
                return Ok((values, vectors));
            }
        }
        if breakdown {
            // Invariant subspace found: restart orthogonally, decoupled in T.
            beta.push(0.0);
            current = fresh(&basis, &mut rng).ok_or_else(|| Error::Numeric("lanczos restart".into()))?;
        } else {
            beta.push(b);
            w.iter_mut().for_each(|x| *x /= b);
            current = std::mem::replace(&mut w, vec![0.0; dim]);
        }
    }
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let n = alpha.len();
    let mut t = DMatrix::zeros(n, n);
    for i in 0..n {
        t[(i, i)] = alpha[i];
        if i + 1 < n {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

/// Euclidean distance between two equally long slices.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Row-major copy of a matrix's rows (column `i` of the transpose is row `i`).
#[derive(Debug, Clone, PartialEq)]
pub struct Rows {
    t: DMatrix<f64>,
    sq_norms: Vec<f64>,
}

impl Rows {
    pub fn new(m: &DMatrix<f64>) -> Self {
        let t = m.transpose();
        let sq_norms = t.column_iter().map(|c| c.norm_squared()).collect();
        Rows { t, sq_norms }
    }

    pub fn len(&self) -> usize {
        self.t.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.t.ncols() == 0
    }

    pub fn width(&self) -> usize {
        self.t.nrows()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.t.nrows();
        &self.t.as_slice()[i * p..(i + 1) * p]
    }

    /// The rows as an ordinary n x p matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        self.t.transpose()
    }
}

const QUERY_BLOCK: usize = 256;

/// Exact `k` nearest reference rows for every query row, sorted by
/// (distance, reference index). With `exclude_self`, queries are the
/// reference rows themselves and a row is never its own neighbor.
///
/// Candidates are screened with the `|x|^2 + |y|^2 - 2 x.y` expansion and
/// then re-measured directly, so returned distances are exact.
pub fn nearest_k(reference: &Rows, queries: &Rows, k: usize, exclude_self: bool) -> Vec<Vec<(usize, f64)>> {
    let m = reference.len();
    let k = k.min(m - usize::from(exclude_self));
    let max_ref = reference.sq_norms.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut out = Vec::with_capacity(queries.len());
    let mut start = 0;
    while start < queries.len() {
        let end = (start + QUERY_BLOCK).min(queries.len());
        let block = queries.t.columns(start, end - start);
        // (end - start) x m inner products
        let gram = block.transpose() * &reference.t;
        let mut approx = vec![0.0; m];
        for (bi, qi) in (start..end).enumerate() {
            let qn = queries.sq_norms[qi];
            for (j, a) in approx.iter_mut().enumerate() {
                *a = qn + reference.sq_norms[j] - 2.0 * gram[(bi, j)];
            }
            if exclude_self {
                approx[qi] = f64::INFINITY;
            }
            let mut scratch = approx.clone();
            let (_, kth, _) = scratch.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
            let slack = 1e-9 * (qn + max_ref) + 1e-300;
            let cutoff = *kth + 2.0 * slack;
            let q = queries.row(qi);
            let mut cands: Vec<(usize, f64)> = approx
                .iter()
                .enumerate()
                .filter(|&(_, &a)| a <= cutoff)
                .map(|(j, _)| (j, euclidean(q, reference.row(j))))
                .collect();
            cands.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            cands.truncate(k);
            out.push(cands);
        }
        start = end;
    }
    out
}

/// Solves the least-squares problem `min |A x - b|` through the normal
/// equations with a tiny ridge; used only by diagnostics and tests.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let mut ata = a.transpose() * a;
    let ridge = 1e-12 * ata.trace().max(1.0);
    for i in 0..ata.nrows() {
        ata[(i, i)] += ridge;
    }
    ata.cholesky().map(|c| c.solve(&(a.transpose() * b)))
}
