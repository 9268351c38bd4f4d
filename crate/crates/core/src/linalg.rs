//! Small dense helpers on top of nalgebra: sorted SVDs, orthonormal bases,
//! complements and null spaces. Every routine here tolerates empty matrices.

use nalgebra::{DMatrix, DVector};

/// Singular value decomposition with singular values in decreasing order.
///
/// The input is zero-padded to a square matrix first, so `u` and `v` are
/// always complete orthonormal bases (`rows x rows` and `cols x cols`
/// respectively once the padding is stripped).
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn sorted_svd(m: &DMatrix<f64>) -> SortedSvd {
    let (r, c) = m.shape();
    let size = r.max(c);
    if size == 0 {
        return SortedSvd { u: DMatrix::zeros(r, r), sigma: Vec::new(), v: DMatrix::zeros(c, c) };
    }
    let mut sq = DMatrix::zeros(size, size);
    sq.view_mut((0, 0), (r, c)).copy_from(m);
    let (u, singular_values, v) = jacobi_svd(sq);
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| singular_values[b].total_cmp(&singular_values[a]));

    let mut us = DMatrix::zeros(size, size);
    let mut vs = DMatrix::zeros(size, size);
    let mut sigma = Vec::with_capacity(size);
    for (dst, &src) in order.iter().enumerate() {
        us.set_column(dst, &u.column(src));
        vs.set_column(dst, &v.column(src));
        sigma.push(singular_values[src]);
    }
    // Padding rows of U (when r < c) and padding rows of V (when c < r) are
    // dropped; the leading blocks remain orthonormal on the real coordinates
    // because padded coordinates only ever carry zero singular values.
    let u = if r < size { complete_basis(&us.view((0, 0), (r, size)).clone_owned(), r) } else { us };
    let v = if c < size { complete_basis(&vs.view((0, 0), (c, size)).clone_owned(), c) } else { vs };
    sigma.truncate(r.min(c));
    SortedSvd { u, sigma, v }
}

/// One-sided Jacobi SVD of a square matrix: `a v = u diag(sigma)`.
///
/// nalgebra's bidiagonal SVD can return wrong factors when singular values
/// cluster (a 4 x 4 Jacobi matrix with a triple singular value reconstructs
/// with error 2e-2), which is exactly the situation at focal points of
/// symmetric families. Jacobi rotations are slower but accurate to high
/// relative precision, and the matrices here are small.
fn jacobi_svd(mut w: DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let n = w.ncols();
    let mut v = DMatrix::identity(n, n);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for m in [&mut w, &mut v] {
                    for i in 0..m.nrows() {
                        let (a, b) = (m[(i, p)], m[(i, q)]);
                        m[(i, p)] = cs * a - sn * b;
                        m[(i, q)] = sn * a + cs * b;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let top = sigma.iter().copied().fold(0.0, f64::max);
    // Columns with (numerically) zero norm carry no direction; complete U
    // from the others.
    let mut u = DMatrix::zeros(n, n);
    let mut live = Vec::new();
    for j in 0..n {
        if sigma[j] > f64::EPSILON * top * n as f64 && sigma[j] > 0.0 {
            u.set_column(j, &(w.column(j) / sigma[j]));
            live.push(j);
        }
    }
    if live.len() < n {
        let kept = DMatrix::from_fn(n, live.len(), |i, k| u[(i, live[k])]);
        let full = complete_basis(&kept, n);
        let mut extra = live.len();
        for j in 0..n {
            if !live.contains(&j) {
                u.set_column(j, &full.column(extra));
                extra += 1;
            }
        }
    }
    (u, sigma, v)
}

/// Re-orthonormalizes the first `dim` meaningful columns of a truncated basis.
fn complete_basis(cols: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(dim, dim);
    let mut filled = 0;
    for j in 0..cols.ncols() {
        if filled == dim {
            break;
        }
        let mut v: DVector<f64> = cols.column(j).clone_owned();
        for k in 0..filled {
            let proj = out.column(k).dot(&v);
            v.axpy(-proj, &out.column(k).clone_owned(), 1.0);
        }
        let nrm = v.norm();
        if nrm > 1e-10 {
            out.set_column(filled, &(v / nrm));
            filled += 1;
        }
    }
    for e in 0..dim {
        if filled == dim {
            break;
        }
        let mut v = DVector::zeros(dim);
        v[e] = 1.0;
        for k in 0..filled {
            let proj = out.column(k).dot(&v);
            v.axpy(-proj, &out.column(k).clone_owned(), 1.0);
        }
        let nrm = v.norm();
        if nrm > 1e-8 {
            out.set_column(filled, &(v / nrm));
            filled += 1;
        }
    }
    out
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    sorted_svd(m).sigma.first().copied().unwrap_or(0.0)
}

/// Largest absolute entry of `m - m^T`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let d = m - m.transpose();
    d.amax()
}

/// Orthonormal basis for the column span, dropping directions whose singular
/// value is at most `rel_tol * scale`.
pub fn orthonormal_basis(m: &DMatrix<f64>, rel_tol: f64, scale: f64) -> DMatrix<f64> {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = sorted_svd(m);
    let cut = rel_tol * scale;
    let rank = svd.sigma.iter().take(rows.min(m.ncols())).filter(|&&s| s > cut).count();
    svd.u.columns(0, rank).clone_owned()
}

/// Orthonormal basis for the orthogonal complement of the span of the
/// orthonormal columns of `basis` inside `R^dim`.
pub fn complement(basis: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let m = basis.ncols();
    if m == 0 {
        return DMatrix::identity(dim, dim);
    }
    let svd = sorted_svd(basis);
    svd.u.columns(m, dim - m).clone_owned()
}

/// Orthonormal basis of `{x : a x = 0}` with singular values at most
/// `rel_tol * scale` treated as zero.
pub fn null_space(a: &DMatrix<f64>, rel_tol: f64, scale: f64) -> DMatrix<f64> {
    let c = a.ncols();
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    if a.nrows() == 0 {
        return DMatrix::identity(c, c);
    }
    let svd = sorted_svd(a);
    let cut = rel_tol * scale;
    let rank = svd.sigma.iter().take(a.nrows().min(c)).filter(|&&s| s > cut).count();
    svd.v.columns(rank, c - rank).clone_owned()
}

/// Moore-Penrose pseudo-inverse with an absolute singular value cutoff.
pub fn pinv(m: &DMatrix<f64>, abs_tol: f64) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = sorted_svd(m);
    let k = r.min(c);
    let mut out = DMatrix::zeros(c, r);
    for i in 0..k {
        let s = svd.sigma[i];
        if s > abs_tol {
            out += svd.v.column(i) * svd.u.column(i).transpose() / s;
        }
    }
    out
}

pub fn projector(basis: &DMatrix<f64>) -> DMatrix<f64> {
    basis * basis.transpose()
}

pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Row-major copy of a matrix, for reports.
pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn serialize_rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&rows(m), s)
}

/// Builds a matrix from rows; `None` when the rows are ragged.
pub fn from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return None;
    }
    Some(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_svd_reconstructs_rectangular_input() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 3.0]);
        let svd = sorted_svd(&m);
        assert_eq!(svd.u.shape(), (2, 2));
        assert_eq!(svd.v.shape(), (3, 3));
        assert!(svd.sigma[0] >= svd.sigma[1]);
        let mut s = DMatrix::zeros(2, 3);
        s[(0, 0)] = svd.sigma[0];
        s[(1, 1)] = svd.sigma[1];
        let back = &svd.u * s * svd.v.transpose();
        assert!((back - m).amax() < 1e-12);
        assert!((svd.v.transpose() * &svd.v - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&a, 1e-12, 1.0);
        assert_eq!(ns.ncols(), 2);
        assert!((&a * &ns).amax() < 1e-12);
    }

    #[test]
    fn complement_is_orthogonal() {
        let b = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let c = complement(&b, 3);
        assert_eq!(c.ncols(), 2);
        assert!((b.transpose() * &c).amax() < 1e-12);
        let empty = complement(&DMatrix::zeros(3, 0), 3);
        assert_eq!(empty.ncols(), 3);
    }

    #[test]
    fn pinv_of_rank_deficient() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let p = pinv(&m, 1e-12);
        assert!((p - m.clone()).amax() < 1e-12);
    }

    #[test]
    #[allow(clippy::excessive_precision)]
    fn clustered_singular_values() {
        // nalgebra's own SVD reconstructs this matrix with error 2e-2.
        let j = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.12552754978123409,
                -0.36647659937718385,
                -0.51666271408394004,
                -0.45439825699596831,
                -0.27775435631943562,
                -0.65744126262951674,
                0.19670339644509666,
                0.17299812441142667,
                -0.39158112640348725,
                0.19670339644509666,
                -0.51965132950233561,
                0.24389464604763375,
                -0.34439059846953451,
                0.17299812441142667,
                0.24389464604763375,
                -0.58246370147874305,
            ],
        );
        let svd = sorted_svd(&j);
        let back = &svd.u * DMatrix::from_diagonal(&DVector::from_vec(svd.sigma.clone())) * svd.v.transpose();
        assert!((back - &j).amax() < 1e-14);
        let t = 0.9222553419920019f64;
        for (s, want) in svd.sigma.iter().zip([t.sin(), t.sin(), t.sin(), t.cos()]) {
            assert!((s - want).abs() < 1e-12, "{:?}", svd.sigma);
        }
    }

    #[test]
    fn factors_of_clustered_random_matrices() {
        let mut seed = 7u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for trial in 0..300 {
            let n = 2 + trial % 6;
            let q1 = DMatrix::from_fn(n, n, |_, _| next()).qr().q();
            let q2 = DMatrix::from_fn(n, n, |_, _| next()).qr().q();
            let mut d = DVector::from_fn(n, |_, _| 1.0 + 0.1 * (trial % 3) as f64 * next());
            if trial % 4 == 0 {
                d[0] = 0.0;
            }
            let m = &q1 * DMatrix::from_diagonal(&d) * q2.transpose();
            let svd = sorted_svd(&m);
            let back = &svd.u * DMatrix::from_diagonal(&DVector::from_vec(svd.sigma.clone())) * svd.v.transpose();
            assert!((back - &m).amax() < 1e-13, "trial {trial}");
            assert!((svd.u.transpose() * &svd.u - DMatrix::identity(n, n)).amax() < 1e-13);
            let sym = &m + m.transpose();
            let eig = sym.clone().symmetric_eigen();
            let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues) * eig.eigenvectors.transpose();
            assert!((rebuilt - &sym).amax() < 1e-12, "symmetric eigen, trial {trial}");
        }
    }
}
