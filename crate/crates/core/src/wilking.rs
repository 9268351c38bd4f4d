//! The vertical/horizontal split of a Lagrangian family along a subfamily and
//! the transverse Jacobi equation `S^' + S^^2 + R^h + 3 A A* = 0`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::jacobi::LagrangianFamily;
use crate::linalg;
use crate::riccati::trace_restricted;

/// Kernel vectors must lie in the subfamily to this accuracy.
pub const FULL_INDEX_TOL: f64 = 1e-8;
pub const SPLIT_A_TOL: f64 = 1e-7;
pub const SPLIT_PARALLEL_TOL: f64 = 1e-6;
pub const TRANSFER_GAP_TOL: f64 = 1e-8;

/// A subfamily `V` of a Lagrangian family, given by coefficient columns.
#[derive(Debug, Clone)]
pub struct TransverseSplit<'a> {
    family: &'a LagrangianFamily,
    v_coeffs: DMatrix<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FullIndexReport {
    pub holds: bool,
    pub kernel_times: Vec<f64>,
    pub failing_times: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransferCheck {
    pub trace_hat: f64,
    pub trace_w: f64,
    pub difference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SplittingReport {
    pub max_a_norm: f64,
    /// Times where a `V`-field vanishes; `A` was taken one-sidedly there.
    pub flagged_times: Vec<f64>,
    pub max_vertical_drift: Option<f64>,
    pub max_horizontal_leak: Option<f64>,
    pub confirmed: bool,
}

impl<'a> TransverseSplit<'a> {
    /// `v_coeffs` is `(n-1) x m` with independent columns; `m = 0` is the
    /// trivial split.
    pub fn new(family: &'a LagrangianFamily, v_coeffs: DMatrix<f64>) -> Result<Self> {
        let dim = family.dim();
        if v_coeffs.nrows() != dim {
            return Err(GeomError::InvalidDimension(format!(
                "subfamily coefficients have {} rows, family has dimension {dim}",
                v_coeffs.nrows()
            )));
        }
        let m = v_coeffs.ncols();
        if m == 0 {
            return Ok(Self { family, v_coeffs: DMatrix::zeros(dim, 0) });
        }
        let scale = v_coeffs.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
        let basis = linalg::orthonormal_basis(&v_coeffs, 1e-10, scale);
        if basis.ncols() != m {
            return Err(GeomError::InvalidArgument(format!(
                "subfamily coefficients have rank {} < {m}",
                basis.ncols()
            )));
        }
        Ok(Self { family, v_coeffs: basis })
    }

    pub fn trivial(family: &'a LagrangianFamily) -> Self {
        Self { family, v_coeffs: DMatrix::zeros(family.dim(), 0) }
    }

    pub fn family(&self) -> &LagrangianFamily {
        self.family
    }

    /// Orthonormal coefficient basis of `V`.
    pub fn v_coeffs(&self) -> &DMatrix<f64> {
        &self.v_coeffs
    }

    pub fn m(&self) -> usize {
        self.v_coeffs.ncols()
    }

    fn tol_at(&self, t: f64) -> Result<f64> {
        Ok(self.family.config().rank_tol * self.family.evaluation_kernel(t)?.scale)
    }

    /// `V(t) = {J(t) : J in V} + {J'(t) : J in V, J(t) = 0}`.
    pub fn vertical_space(&self, t: f64) -> Result<DMatrix<f64>> {
        let dim = self.family.dim();
        if self.m() == 0 {
            return Ok(DMatrix::zeros(dim, 0));
        }
        let (y, yp) = self.family.field(t, &self.v_coeffs)?;
        let tol = self.tol_at(t)?;
        let kernel = linalg::null_space(&y, 1.0, tol);
        let mut gen = DMatrix::zeros(dim, y.ncols() + kernel.ncols());
        gen.view_mut((0, 0), (dim, y.ncols())).copy_from(&y);
        gen.view_mut((0, y.ncols()), (dim, kernel.ncols())).copy_from(&(yp * kernel));
        Ok(linalg::orthonormal_basis(&gen, 1.0, tol))
    }

    /// `H(t)`, the orthogonal complement of `V(t)`.
    pub fn horizontal_space(&self, t: f64) -> Result<DMatrix<f64>> {
        Ok(linalg::complement(&self.vertical_space(t)?, self.family.dim()))
    }

    /// Every field of the family vanishing at `t` lies in `V`.
    pub fn full_index_at(&self, t: f64) -> Result<bool> {
        let k = self.family.evaluation_kernel(t)?;
        Ok(self.kernel_inside(&k.kernel_basis))
    }

    fn kernel_inside(&self, kernel: &DMatrix<f64>) -> bool {
        if kernel.ncols() == 0 {
            return true;
        }
        let resid = kernel - &self.v_coeffs * (self.v_coeffs.transpose() * kernel);
        resid.amax() <= FULL_INDEX_TOL
    }

    pub fn full_index_check(&self, lo: f64, hi: f64) -> Result<FullIndexReport> {
        let events = self.family.focal_events(lo, hi)?;
        let mut report = FullIndexReport { holds: true, kernel_times: Vec::new(), failing_times: Vec::new() };
        for e in events {
            report.kernel_times.push(e.t);
            if !self.kernel_inside(&e.kernel_basis) {
                report.holds = false;
                report.failing_times.push(e.t);
            }
        }
        Ok(report)
    }

    fn require_full_index(&self, t: f64) -> Result<()> {
        if self.full_index_at(t)? {
            Ok(())
        } else {
            Err(GeomError::FullIndexViolation { t })
        }
    }

    /// `S^ = P_H S|_H` in the orthonormal basis returned by
    /// [`Self::horizontal_space`].
    pub fn transverse_riccati(&self, t: f64) -> Result<DMatrix<f64>> {
        Ok(self.transverse_parts(t)?.1)
    }

    /// `(basis of H, S^ in that basis)`.
    pub fn transverse_parts(&self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.require_full_index(t)?;
        let bh = self.horizontal_space(t)?;
        let (j, dj) = self.family.integrate(t)?;
        let coeffs = linalg::pinv(&j, self.tol_at(t)?) * &bh;
        let s_hat = bh.transpose() * dj * coeffs;
        Ok((bh, s_hat))
    }

    /// Coefficients of `H` with `H(t) = H(t)`: the fields through the
    /// horizontal basis vectors at `t`.
    pub fn transfer_subfamily(&self, t: f64) -> Result<DMatrix<f64>> {
        self.require_full_index(t)?;
        let bh = self.horizontal_space(t)?;
        let (j, _) = self.family.integrate(t)?;
        Ok(linalg::pinv(&j, self.tol_at(t)?) * bh)
    }

    /// `A_t : V(t) -> H(t)`, `v -> (J')^h(t)` for the `J in V` with
    /// `J(t) = v`, as an `(n-1-m) x m` matrix in the bases of
    /// [`Self::horizontal_space`] and [`Self::vertical_space`].
    pub fn a_tensor(&self, t: f64) -> Result<DMatrix<f64>> {
        let dim = self.family.dim();
        if self.m() == 0 {
            return Ok(DMatrix::zeros(dim, 0));
        }
        let (y, yp) = self.family.field(t, &self.v_coeffs)?;
        let tol = self.tol_at(t)?;
        let sv = linalg::sorted_svd(&y).sigma;
        if sv.last().copied().unwrap_or(0.0) <= tol {
            return Err(GeomError::VanishingField { t });
        }
        let bv = linalg::orthonormal_basis(&y, 1.0, tol);
        let bh = linalg::complement(&bv, dim);
        Ok(bh.transpose() * yp * linalg::pinv(&y, tol) * bv)
    }

    fn s_hat_ambient(&self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (bh, s) = self.transverse_parts(t)?;
        Ok((&bh * s * bh.transpose(), bh))
    }

    /// Spectral norm of `S^' + S^^2 + R^h + 3 A A*` on `H(t)`.
    ///
    /// `S^` is extended by zero on `V(t)`; the projected derivative
    /// `P_H (d/dt S^) P_H` of that ambient matrix is the covariant derivative
    /// of `S^` in `H`, so no frame transport is needed.
    pub fn transverse_residual(&self, t: f64, fd: f64) -> Result<f64> {
        let (s0, bh) = self.s_hat_ambient(t)?;
        // Fourth-order central stencil: S^ behaves like 1/t near a singular
        // start, where the two-point quotient loses several digits.
        let at = |dt: f64| self.s_hat_ambient(t + dt).map(|(s, _)| s);
        let d = (at(-2.0 * fd)? - at(2.0 * fd)? + (at(fd)? - at(-fd)?) * 8.0) / (12.0 * fd);
        let ph = linalg::projector(&bh);
        let ds = &ph * d * &ph;
        let r = self.family.model().curvature(t)?;
        let a = self.a_tensor(t)?;
        let aa = if self.m() == 0 { DMatrix::zeros(bh.ncols(), bh.ncols()) } else { &a * a.transpose() };
        let lhs = bh.transpose() * (ds + &s0 * &s0 + r) * &bh + aa * 3.0;
        Ok(linalg::spectral_norm(&lhs))
    }

    /// Compares `Trace S^` with `Trace S|_W` for a subfamily `W` whose value
    /// space at `t` must equal `H(t)`.
    pub fn eigenvalue_transfer_check(&self, t: f64, w_coeffs: &DMatrix<f64>) -> Result<TransferCheck> {
        let (bh, s_hat) = self.transverse_parts(t)?;
        let (wt, _) = self.family.field(t, w_coeffs)?;
        let tol = self.tol_at(t)?;
        let bw = linalg::orthonormal_basis(&wt, 1.0, tol);
        let gap = if bw.ncols() != bh.ncols() {
            f64::INFINITY
        } else {
            linalg::spectral_norm(&(linalg::projector(&bw) - linalg::projector(&bh)))
        };
        if gap > TRANSFER_GAP_TOL {
            return Err(GeomError::SubspaceMismatch { t, gap });
        }
        let trace_hat = s_hat.trace();
        let trace_w = trace_restricted(self.family, t, w_coeffs)?;
        Ok(TransferCheck { trace_hat, trace_w, difference: (trace_hat - trace_w).abs() })
    }

    fn a_norm_flagged(&self, t: f64, lo: f64, hi: f64) -> Result<(f64, bool)> {
        match self.a_tensor(t) {
            Ok(a) => Ok((linalg::spectral_norm(&a), false)),
            Err(GeomError::VanishingField { .. }) => {
                let off = 1e-4;
                let probe = if t + off <= hi { t + off } else { (t - off).max(lo) };
                Ok((linalg::spectral_norm(&self.a_tensor(probe)?), true))
            }
            Err(e) => Err(e),
        }
    }

    /// Tests whether the split is parallel on `[lo, hi]`: `A` vanishes, the
    /// projector onto `V(t)` is constant in the parallel frame, and the
    /// fields through `H(lo)` stay horizontal.
    pub fn splitting_detector(&self, lo: f64, hi: f64, samples: usize) -> Result<SplittingReport> {
        if lo > hi {
            return Err(GeomError::InvertedWindow { lo, hi });
        }
        let samples = samples.max(2);
        let times: Vec<f64> = (0..=samples).map(|i| lo + (hi - lo) * i as f64 / samples as f64).collect();
        let mut max_a = 0.0f64;
        let mut flagged = Vec::new();
        for &t in &times {
            let (a, flag) = self.a_norm_flagged(t, lo, hi)?;
            max_a = max_a.max(a);
            if flag {
                flagged.push(t);
            }
        }
        let mut report = SplittingReport {
            max_a_norm: max_a,
            flagged_times: flagged,
            max_vertical_drift: None,
            max_horizontal_leak: None,
            confirmed: false,
        };
        if max_a > SPLIT_A_TOL {
            return Ok(report);
        }

        let fd = 1e-4;
        let mut drift = 0.0f64;
        for &t in &times {
            let a = (t - fd).max(lo);
            let b = (t + fd).min(hi);
            if b <= a {
                continue;
            }
            let pa = linalg::projector(&self.vertical_space(a)?);
            let pb = linalg::projector(&self.vertical_space(b)?);
            drift = drift.max(linalg::spectral_norm(&((pb - pa) / (b - a))));
        }

        let h = self.transfer_subfamily(lo)?;
        let (jh, djh) = self.family.field(lo, &h)?;
        let mut norm = DMatrix::zeros(h.ncols(), h.ncols());
        for c in 0..h.ncols() {
            let n = (jh.column(c).norm_squared() + djh.column(c).norm_squared()).sqrt();
            norm[(c, c)] = if n > 0.0 { 1.0 / n } else { 0.0 };
        }
        let h = h * norm;
        let mut leak = 0.0f64;
        for &t in &times {
            let pv = linalg::projector(&self.vertical_space(t)?);
            let (y, _) = self.family.field(t, &h)?;
            leak = leak.max((pv * y).amax());
        }
        report.max_vertical_drift = Some(drift);
        report.max_horizontal_leak = Some(leak);
        report.confirmed = drift <= SPLIT_PARALLEL_TOL && leak <= SPLIT_PARALLEL_TOL;
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{constant_curvature_model, product_space_form_model, ProductDirection};
    use crate::jacobi::{submanifold_lagrangian, FamilyConfig, SubmanifoldData};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    fn diff_future() -> LagrangianFamily {
        // span{t E1, (t+1) E2} in the flat plane bundle of R^3.
        let m = constant_curvature_model(3, 0.0).unwrap();
        let j0 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0]));
        LagrangianFamily::new(m, 0.0, j0, DMatrix::identity(2, 2), FamilyConfig::default()).unwrap()
    }

    fn hopf() -> LagrangianFamily {
        // span{sin t E1, cos t E2} in the unit 3-sphere.
        let m = constant_curvature_model(3, 1.0).unwrap();
        let j0 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.0, 1.0]));
        let dj0 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.0]));
        LagrangianFamily::new(m, 0.0, j0, dj0, FamilyConfig::default()).unwrap()
    }

    #[test]
    fn full_index_examples() {
        let s3 = constant_curvature_model(3, 1.0).unwrap();
        let cfg = FamilyConfig::default();
        let eq = submanifold_lagrangian(s3.clone(), &SubmanifoldData::totally_geodesic(2), cfg).unwrap();
        let split = TransverseSplit::new(&eq, DMatrix::identity(2, 2)).unwrap();
        assert!(split.full_index_check(0.0, FRAC_PI_2).unwrap().holds);

        let p = submanifold_lagrangian(s3, &SubmanifoldData::point(), cfg).unwrap();
        let r = TransverseSplit::trivial(&p).full_index_check(0.1, 3.2).unwrap();
        assert!(!r.holds);
        assert!((r.failing_times[0] - PI).abs() < 1e-6);

        let h = hopf();
        let split = TransverseSplit::new(&h, col(&[1.0, 0.0])).unwrap();
        assert!(split.full_index_check(0.01, FRAC_PI_2 - 0.01).unwrap().holds);
    }

    #[test]
    fn transverse_riccati_examples() {
        let s3 = constant_curvature_model(3, 1.0).unwrap();
        let p = submanifold_lagrangian(s3, &SubmanifoldData::point(), FamilyConfig::default()).unwrap();
        let s = TransverseSplit::trivial(&p).transverse_riccati(FRAC_PI_4).unwrap();
        assert!((s - DMatrix::<f64>::identity(2, 2)).amax() < 1e-8);

        let df = diff_future();
        let split = TransverseSplit::new(&df, col(&[1.0, 0.0])).unwrap();
        let s = split.transverse_riccati(1.0).unwrap();
        assert!((s[(0, 0)] - 0.5).abs() < 1e-10);
        assert!(split.a_tensor(1.0).unwrap().amax() < 1e-12);
        assert!(split.transverse_residual(1.0, 1e-4).unwrap() < 1e-8);

        let h = hopf();
        let split = TransverseSplit::new(&h, col(&[1.0, 0.0])).unwrap();
        let s = split.transverse_riccati(FRAC_PI_4).unwrap();
        assert!((s[(0, 0)] + 1.0).abs() < 1e-8);
        assert!(split.a_tensor(FRAC_PI_4).unwrap().amax() < 1e-10);
    }

    #[test]
    fn transfer_examples() {
        let df = diff_future();
        let split = TransverseSplit::new(&df, col(&[1.0, 0.0])).unwrap();
        let c = split.eigenvalue_transfer_check(1.0, &col(&[0.0, 1.0])).unwrap();
        assert!((c.trace_w - 0.5).abs() < 1e-10 && c.difference < 1e-8);

        let s3 = constant_curvature_model(3, 1.0).unwrap();
        let eq = submanifold_lagrangian(s3, &SubmanifoldData::totally_geodesic(2), FamilyConfig::default()).unwrap();
        let split = TransverseSplit::new(&eq, col(&[1.0, 0.0])).unwrap();
        let c = split.eigenvalue_transfer_check(FRAC_PI_4, &col(&[0.0, 1.0])).unwrap();
        assert!((c.trace_hat + 1.0).abs() < 1e-8 && c.difference < 1e-8);
        assert!(matches!(
            split.eigenvalue_transfer_check(FRAC_PI_4, &col(&[1.0, 1.0])),
            Err(GeomError::SubspaceMismatch { .. })
        ));
    }

    #[test]
    fn splitting() {
        let m = product_space_form_model(2, 1.0, 2, 1.0, ProductDirection::new(FRAC_PI_4).unwrap()).unwrap();
        let f = submanifold_lagrangian(m, &SubmanifoldData::point(), FamilyConfig::default()).unwrap();
        let split = TransverseSplit::new(&f, col(&[0.0, 1.0, 0.0])).unwrap();
        let r = split.splitting_detector(0.2, 2.0, 40).unwrap();
        assert!(r.confirmed, "{r:?}");

        let mixed = TransverseSplit::new(&f, col(&[1.0, 0.0, 1.0])).unwrap();
        let r = mixed.splitting_detector(0.2, 2.0, 40).unwrap();
        assert!(!r.confirmed, "{r:?}");
        assert!(mixed.transverse_residual(1.1, 1e-4).unwrap() < 1e-5);

        let h = hopf();
        let split = TransverseSplit::new(&h, col(&[1.0, 0.0])).unwrap();
        let r = split.splitting_detector(0.0, FRAC_PI_2 - 0.1, 30).unwrap();
        assert!(r.confirmed, "{r:?}");
    }
}
