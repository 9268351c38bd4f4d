//! Riccati operators of Lagrangian families and the scalar model solutions
//! they are compared against.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::jacobi::LagrangianFamily;
use crate::linalg;

const POLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelCurvature {
    Hyperbolic,
    Flat,
    Spherical,
}

impl ModelCurvature {
    pub fn from_kappa(kappa: f64) -> Result<Self> {
        if kappa == 1.0 {
            Ok(Self::Spherical)
        } else if kappa == 0.0 {
            Ok(Self::Flat)
        } else if kappa == -1.0 {
            Ok(Self::Hyperbolic)
        } else {
            Err(GeomError::UnsupportedCurvature(kappa))
        }
    }

    pub fn kappa(self) -> f64 {
        match self {
            Self::Hyperbolic => -1.0,
            Self::Flat => 0.0,
            Self::Spherical => 1.0,
        }
    }
}

/// `lambda = f'/f` at one time, or a pole where `f` vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RiccatiValue {
    Finite(f64),
    Pole,
}

impl RiccatiValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(v),
            Self::Pole => None,
        }
    }
}

/// A solution `f~` of `f'' + kappa f = 0` and its logarithmic derivative
/// `lambda~ = f~'/f~`, which solves `lambda' + lambda^2 + kappa = 0`.
///
/// `kappa = 1`: `c1 sin t + c2 cos t`; `kappa = 0`: `c1 t + c2`;
/// `kappa = -1`: `c1 sinh t + c2 cosh t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSolution {
    curvature: ModelCurvature,
    c1: f64,
    c2: f64,
}

impl ModelSolution {
    pub fn new(kappa: f64, c1: f64, c2: f64) -> Result<Self> {
        let curvature = ModelCurvature::from_kappa(kappa)?;
        if c1 == 0.0 && c2 == 0.0 {
            return Err(GeomError::InvalidArgument("model solution with c1 = c2 = 0".into()));
        }
        if !(c1.is_finite() && c2.is_finite()) {
            return Err(GeomError::InvalidArgument("non-finite model coefficients".into()));
        }
        Ok(Self { curvature, c1, c2 })
    }

    /// `f = sin(t + alpha)`, so `lambda = cot(t + alpha)`.
    pub fn shifted_cot(alpha: f64) -> Self {
        Self { curvature: ModelCurvature::Spherical, c1: alpha.cos(), c2: alpha.sin() }
    }

    /// The solution vanishing at `t_star` with unit derivative there.
    pub fn vanishing_at(kappa: f64, t_star: f64) -> Result<Self> {
        let (c1, c2) = match ModelCurvature::from_kappa(kappa)? {
            ModelCurvature::Spherical => (t_star.cos(), -t_star.sin()),
            ModelCurvature::Flat => (1.0, -t_star),
            ModelCurvature::Hyperbolic => (t_star.cosh(), -t_star.sinh()),
        };
        Self::new(kappa, c1, c2)
    }

    /// The solution with `f(t0) = 1` and `f'(t0) = lambda0`.
    pub fn with_initial(kappa: f64, t0: f64, lambda0: f64) -> Result<Self> {
        let (c1, c2) = match ModelCurvature::from_kappa(kappa)? {
            ModelCurvature::Spherical => {
                let (s, c) = t0.sin_cos();
                (s + lambda0 * c, c - lambda0 * s)
            }
            ModelCurvature::Flat => (lambda0, 1.0 - lambda0 * t0),
            ModelCurvature::Hyperbolic => {
                let (s, c) = (t0.sinh(), t0.cosh());
                (-s + lambda0 * c, c - lambda0 * s)
            }
        };
        Self::new(kappa, c1, c2)
    }

    pub fn kappa(&self) -> f64 {
        self.curvature.kappa()
    }

    pub fn curvature(&self) -> ModelCurvature {
        self.curvature
    }

    pub fn coefficients(&self) -> (f64, f64) {
        (self.c1, self.c2)
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.curvature {
            ModelCurvature::Spherical => self.c1 * t.sin() + self.c2 * t.cos(),
            ModelCurvature::Flat => self.c1 * t + self.c2,
            ModelCurvature::Hyperbolic => self.c1 * t.sinh() + self.c2 * t.cosh(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self.curvature {
            ModelCurvature::Spherical => self.c1 * t.cos() - self.c2 * t.sin(),
            ModelCurvature::Flat => self.c1,
            ModelCurvature::Hyperbolic => self.c1 * t.cosh() + self.c2 * t.sinh(),
        }
    }

    pub fn riccati(&self, t: f64) -> RiccatiValue {
        let f = self.value(t);
        let df = self.derivative(t);
        if f.abs() <= POLE_TOL * (f.abs() + df.abs()) {
            RiccatiValue::Pole
        } else {
            RiccatiValue::Finite(df / f)
        }
    }

    /// Zeros of `f~` in `[lo, hi]`, increasing.
    pub fn poles_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self.curvature {
            ModelCurvature::Spherical => {
                // c1 sin t + c2 cos t = r sin(t + phi)
                let phi = self.c2.atan2(self.c1);
                let pi = std::f64::consts::PI;
                let mut k = ((lo + phi) / pi).ceil();
                loop {
                    let t = k * pi - phi;
                    if t > hi {
                        break;
                    }
                    if t >= lo {
                        out.push(t);
                    }
                    k += 1.0;
                }
            }
            ModelCurvature::Flat => {
                if self.c1 != 0.0 {
                    let t = -self.c2 / self.c1;
                    if (lo..=hi).contains(&t) {
                        out.push(t);
                    }
                }
            }
            ModelCurvature::Hyperbolic => {
                if self.c1 != 0.0 {
                    let r = -self.c2 / self.c1;
                    if r.abs() < 1.0 {
                        let t = r.atanh();
                        if (lo..=hi).contains(&t) {
                            out.push(t);
                        }
                    }
                }
            }
        }
        out
    }

    /// `|lambda' + lambda^2 + kappa|` with a centred difference; `None` when
    /// the stencil touches a pole.
    pub fn ode_residual(&self, t: f64, h: f64) -> Option<f64> {
        let a = self.riccati(t - h).finite()?;
        let b = self.riccati(t + h).finite()?;
        let l = self.riccati(t).finite()?;
        Some(((b - a) / (2.0 * h) + l * l + self.kappa()).abs())
    }
}

/// `S(t) = J'(t) J(t)^{-1}`.
pub fn riccati_operator(family: &LagrangianFamily, t: f64) -> Result<DMatrix<f64>> {
    let k = family.evaluation_kernel(t)?;
    let dim = family.dim();
    if k.rank < dim {
        return Err(GeomError::SingularEvaluation { t, rank: k.rank, dim });
    }
    let (j, dj) = family.integrate(t)?;
    // S^T solves J^T X = J'^T.
    let st = j.transpose().lu().solve(&dj.transpose()).ok_or(GeomError::SingularEvaluation { t, rank: k.rank, dim })?;
    Ok(st.transpose())
}

/// Spectral norm of `S' + S^2 + R`, with `S'` from the fourth-order centred
/// stencil of step `h`.
pub fn riccati_residual(family: &LagrangianFamily, t: f64, h: f64) -> Result<f64> {
    let s = riccati_operator(family, t)?;
    let at = |dt: f64| riccati_operator(family, t + dt);
    let ds = (at(-2.0 * h)? - at(2.0 * h)? + (at(h)? - at(-h)?) * 8.0) / (12.0 * h);
    let r = family.model().curvature(t)?;
    let lhs = ds + &s * &s + r;
    Ok(linalg::spectral_norm(&lhs))
}

/// `Trace(P_W S|_W)` for `W(t)` spanned by the fields with coefficient columns
/// `w`. Uses `<S J, J> = <J', J>` on evaluated fields, so `J(t)` itself need
/// not be invertible.
pub fn trace_restricted(family: &LagrangianFamily, t: f64, w: &DMatrix<f64>) -> Result<f64> {
    if w.ncols() == 0 {
        return Ok(0.0);
    }
    if w.nrows() != family.dim() {
        return Err(GeomError::InvalidDimension(format!(
            "coefficient matrix has {} rows, family has dimension {}",
            w.nrows(),
            family.dim()
        )));
    }
    let coeff_scale = w.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let wc = linalg::orthonormal_basis(w, 1e-10, coeff_scale);
    let (j, dj) = family.integrate(t)?;
    let y = &j * &wc;
    let yp = &dj * &wc;
    let scale = family.evaluation_kernel(t)?.scale;
    let sv = linalg::sorted_svd(&y).sigma;
    let smin = sv.last().copied().unwrap_or(0.0);
    if smin <= family.config().rank_tol * scale {
        return Err(GeomError::VanishingField { t });
    }
    let g = y.transpose() * &y;
    let m = y.transpose() * yp;
    let x = g.lu().solve(&m).ok_or(GeomError::VanishingField { t })?;
    Ok(x.trace())
}

/// Outcome of a scalar Riccati comparison `s <= lambda~` on samples.
#[derive(Debug, Clone, Serialize)]
pub struct ScalarComparisonReport {
    pub hypothesis_holds: bool,
    pub initial_margin: f64,
    pub violations: Vec<f64>,
    pub max_violation: f64,
    /// Last sampled time with `s = lambda~` (within tolerance), when that
    /// persisted over at least three samples.
    pub equality_time: Option<f64>,
    /// `s = lambda~` on every sample of `[t0, t1]`.
    pub rigidity: Option<bool>,
    pub skipped_poles: Vec<f64>,
}

impl ScalarComparisonReport {
    pub fn passed(&self) -> bool {
        self.hypothesis_holds && self.violations.is_empty() && self.rigidity != Some(false)
    }
}

pub const SCALAR_TOL: f64 = 1e-7;
pub const EQUALITY_PERSISTENCE: usize = 3;

/// Checks `s(t) <= lambda~(t)` on the samples inside `interval`. The first
/// sample is treated as `t0`.
pub fn scalar_comparison_check(
    samples: &[(f64, f64)],
    sol: &ModelSolution,
    interval: (f64, f64),
) -> ScalarComparisonReport {
    let mut pts: Vec<(f64, f64)> =
        samples.iter().copied().filter(|(t, _)| *t >= interval.0 && *t <= interval.1).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut report = ScalarComparisonReport {
        hypothesis_holds: true,
        initial_margin: f64::NAN,
        violations: Vec::new(),
        max_violation: 0.0,
        equality_time: None,
        rigidity: None,
        skipped_poles: Vec::new(),
    };
    let mut margins = Vec::with_capacity(pts.len());
    for &(t, s) in &pts {
        match sol.riccati(t) {
            RiccatiValue::Finite(l) => margins.push((t, l - s, SCALAR_TOL * l.abs().max(1.0))),
            RiccatiValue::Pole => report.skipped_poles.push(t),
        }
    }
    let Some(&(_, m0, tol0)) = margins.first() else {
        return report;
    };
    report.initial_margin = m0;
    if m0 < -tol0 {
        report.hypothesis_holds = false;
        return report;
    }
    let mut eq_count = 0;
    for &(t, m, tol) in &margins[1..] {
        if m < -tol {
            report.violations.push(t);
            report.max_violation = report.max_violation.max(-m);
        }
        if m.abs() <= tol {
            eq_count += 1;
            report.equality_time = Some(t);
        }
    }
    if eq_count < EQUALITY_PERSISTENCE {
        report.equality_time = None;
    }
    if let Some(t1) = report.equality_time {
        report.rigidity = Some(margins.iter().filter(|(t, _, _)| *t <= t1).all(|(_, m, tol)| m.abs() <= *tol));
    }
    report
}

/// Discrete check of `liminf_{t -> t0+} g(t) >= 0` on a shrinking sequence of
/// offsets.
#[derive(Debug, Clone, Serialize)]
pub struct LiminfRecord {
    pub offsets: Vec<f64>,
    pub values: Vec<f64>,
    pub holds: bool,
}

pub const LIMINF_OFFSETS: [f64; 3] = [1e-1, 1e-2, 1e-3];

pub fn liminf_nonnegative<F: Fn(f64) -> Option<f64>>(t0: f64, g: F, rel_tol: f64) -> LiminfRecord {
    let mut offsets = Vec::new();
    let mut values = Vec::new();
    for d in LIMINF_OFFSETS {
        if let Some(v) = g(t0 + d) {
            offsets.push(d);
            values.push(v);
        }
    }
    let holds = values.last().is_some_and(|&v| v >= -rel_tol * v.abs().max(1.0));
    LiminfRecord { offsets, values, holds }
}
