//! Curvature operators along a unit-speed geodesic.
//!
//! The normal space of the geodesic is identified with `R^(n-1)` through a
//! fixed parallel orthonormal frame, so the curvature operator
//! `R(t) = R(., gamma')gamma'` is just a symmetric matrix-valued function of
//! time and covariant derivatives become ordinary derivatives.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::linalg;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

/// Default half-width of a model's time domain.
pub const DEFAULT_HALF_SPAN: f64 = TAU;

const SYMMETRY_TOL: f64 = 1e-12;

/// Split of a unit velocity between the two factors of a product:
/// `cos(angle)` in the first factor and `sin(angle)` in the second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductDirection(f64);

impl ProductDirection {
    pub fn new(angle: f64) -> Result<Self> {
        if !(0.0..=FRAC_PI_2).contains(&angle) {
            return Err(GeomError::InvalidArgument(format!("product direction angle {angle} outside [0, pi/2]")));
        }
        Ok(Self(angle))
    }

    pub fn first_factor() -> Self {
        Self(0.0)
    }

    pub fn second_factor() -> Self {
        Self(FRAC_PI_2)
    }

    pub fn angle(self) -> f64 {
        self.0
    }
}

/// Parameters a model was built from, kept for reports and configuration
/// round trips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    ConstantCurvature { kappa: f64 },
    Product { a: usize, kappa1: f64, b: usize, kappa2: f64, alpha: f64 },
    Diagonal,
    Custom,
}

#[derive(Clone)]
enum CurvatureField {
    Constant(DMatrix<f64>),
    Diagonal(Vec<ScalarFn>),
    Matrix(MatrixFn),
}

/// The curvature operator along one geodesic, in a parallel frame.
#[derive(Clone)]
pub struct GeodesicModel {
    n: usize,
    field: CurvatureField,
    domain: (f64, f64),
    label: String,
    params: ModelParams,
}

impl fmt::Debug for GeodesicModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeodesicModel")
            .field("n", &self.n)
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("params", &self.params)
            .finish()
    }
}

impl GeodesicModel {
    /// Ambient dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension of the normal space, `n - 1`.
    pub fn normal_dim(&self) -> usize {
        self.n - 1
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.domain.0 && t <= self.domain.1
    }

    /// True when `R(t)` does not depend on `t`.
    pub fn is_constant(&self) -> bool {
        matches!(self.field, CurvatureField::Constant(_))
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(GeomError::InvertedWindow { lo, hi });
        }
        self.domain = (lo, hi);
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `R(t)` without a domain check; the integrators call this at stage
    /// times that may sit a fraction of a step past the domain edge.
    pub fn curvature_unchecked(&self, t: f64) -> DMatrix<f64> {
        match &self.field {
            CurvatureField::Constant(m) => m.clone(),
            CurvatureField::Diagonal(fns) => {
                let d: Vec<f64> = fns.iter().map(|f| f(t)).collect();
                DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d))
            }
            CurvatureField::Matrix(f) => f(t),
        }
    }

    pub fn curvature(&self, t: f64) -> Result<DMatrix<f64>> {
        self.check_time(t)?;
        Ok(self.curvature_unchecked(t))
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(GeomError::OutOfDomain { t, lo: self.domain.0, hi: self.domain.1 })
        }
    }

    /// Eigenvalues of `R(t)` in increasing order.
    pub fn eigenvalues(&self, t: f64) -> Result<Vec<f64>> {
        Ok(linalg::symmetric_eigenvalues(&self.curvature(t)?))
    }

    /// The same geometry traversed backwards: `R~(t) = R(-t)` on the mirrored
    /// domain.
    pub fn reversed(&self) -> Self {
        let field = match &self.field {
            CurvatureField::Constant(m) => CurvatureField::Constant(m.clone()),
            CurvatureField::Diagonal(fns) => CurvatureField::Diagonal(
                fns.iter()
                    .map(|f| {
                        let f = Arc::clone(f);
                        Arc::new(move |t: f64| f(-t)) as ScalarFn
                    })
                    .collect(),
            ),
            CurvatureField::Matrix(f) => {
                let f = Arc::clone(f);
                CurvatureField::Matrix(Arc::new(move |t: f64| f(-t)))
            }
        };
        Self {
            n: self.n,
            field,
            domain: (-self.domain.1, -self.domain.0),
            label: format!("{} (reversed)", self.label),
            params: self.params.clone(),
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(GeomError::InvalidDimension(format!("ambient dimension must be at least 2, got {n}")));
    }
    Ok(())
}

fn default_domain() -> (f64, f64) {
    (-DEFAULT_HALF_SPAN, DEFAULT_HALF_SPAN)
}

/// Space form of constant curvature `kappa`: `R = kappa * id`.
pub fn constant_curvature_model(n: usize, kappa: f64) -> Result<GeodesicModel> {
    check_n(n)?;
    Ok(GeodesicModel {
        n,
        field: CurvatureField::Constant(DMatrix::identity(n - 1, n - 1) * kappa),
        domain: default_domain(),
        label: format!("constant curvature {kappa} in dimension {n}"),
        params: ModelParams::ConstantCurvature { kappa },
    })
}

/// Product of an `a`-dimensional space form of curvature `kappa1` with a
/// `b`-dimensional one of curvature `kappa2`, along a geodesic whose velocity
/// splits between the factors according to `dir`.
///
/// Frame order is `[factor-1 normals | factor-2 normals | mixed direction]`;
/// the mixed direction only exists for angles strictly inside `(0, pi/2)`.
pub fn product_space_form_model(
    a: usize,
    kappa1: f64,
    b: usize,
    kappa2: f64,
    dir: ProductDirection,
) -> Result<GeodesicModel> {
    if a < 1 || b < 1 || a + b < 3 {
        return Err(GeomError::InvalidDimension(format!(
            "product factors need a >= 1, b >= 1, a + b >= 3 (got a = {a}, b = {b})"
        )));
    }
    let alpha = dir.angle();
    let n = a + b;
    let mut diag = Vec::with_capacity(n - 1);
    if alpha == 0.0 {
        diag.extend(std::iter::repeat_n(kappa1, a - 1));
        diag.extend(std::iter::repeat_n(0.0, b));
    } else if alpha == FRAC_PI_2 {
        diag.extend(std::iter::repeat_n(0.0, a));
        diag.extend(std::iter::repeat_n(kappa2, b - 1));
    } else {
        let (s, c) = alpha.sin_cos();
        diag.extend(std::iter::repeat_n(kappa1 * c * c, a - 1));
        diag.extend(std::iter::repeat_n(kappa2 * s * s, b - 1));
        diag.push(0.0);
    }
    debug_assert_eq!(diag.len(), n - 1);
    Ok(GeodesicModel {
        n,
        field: CurvatureField::Constant(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))),
        domain: default_domain(),
        label: format!("S^{a}({kappa1}) x S^{b}({kappa2}), angle {alpha}"),
        params: ModelParams::Product { a, kappa1, b, kappa2, alpha },
    })
}

/// Diagonal curvature operator with one eigenvalue function per frame
/// direction.
pub fn custom_diagonal_model(n: usize, eig_fns: Vec<ScalarFn>) -> Result<GeodesicModel> {
    check_n(n)?;
    if eig_fns.len() != n - 1 {
        return Err(GeomError::CountMismatch { expected: n - 1, got: eig_fns.len() });
    }
    Ok(GeodesicModel {
        n,
        field: CurvatureField::Diagonal(eig_fns),
        domain: default_domain(),
        label: format!("diagonal curvature in dimension {n}"),
        params: ModelParams::Diagonal,
    })
}

/// Arbitrary symmetric curvature operator. Symmetry is checked on a coarse
/// sample of the default domain.
pub fn custom_matrix_model(n: usize, field: MatrixFn) -> Result<GeodesicModel> {
    check_n(n)?;
    let (lo, hi) = default_domain();
    for i in 0..=16 {
        let t = lo + (hi - lo) * i as f64 / 16.0;
        let r = field(t);
        if r.shape() != (n - 1, n - 1) {
            return Err(GeomError::InvalidDimension(format!(
                "curvature field returned a {:?} matrix, expected {} x {}",
                r.shape(),
                n - 1,
                n - 1
            )));
        }
        let asym = linalg::asymmetry(&r);
        if asym > SYMMETRY_TOL {
            return Err(GeomError::NotSymmetric { what: "curvature operator", asym });
        }
    }
    Ok(GeodesicModel {
        n,
        field: CurvatureField::Matrix(field),
        domain: default_domain(),
        label: format!("custom curvature in dimension {n}"),
        params: ModelParams::Custom,
    })
}

/// Minimum of `sum sec(gamma', E_i)` over orthonormal `k`-frames normal to the
/// geodesic, i.e. the sum of the `k` smallest eigenvalues of `R(t)`.
pub fn radial_ric_k_min(model: &GeodesicModel, t: f64, k: usize) -> Result<f64> {
    if k < 1 || k > model.normal_dim() {
        return Err(GeomError::InvalidArgument(format!("k = {k} outside 1..={}", model.normal_dim())));
    }
    Ok(model.eigenvalues(t)?.iter().take(k).sum())
}

/// Smallest value of [`radial_ric_k_min`] over `samples + 1` evenly spaced
/// times in `[lo, hi]` (a single evaluation for constant models).
pub fn radial_ric_k_min_over(model: &GeodesicModel, lo: f64, hi: f64, k: usize, samples: usize) -> Result<f64> {
    if model.is_constant() {
        return radial_ric_k_min(model, lo.max(model.domain.0).min(model.domain.1), k);
    }
    let samples = samples.max(1);
    let mut best = f64::INFINITY;
    for i in 0..=samples {
        let t = lo + (hi - lo) * i as f64 / samples as f64;
        best = best.min(radial_ric_k_min(model, t, k)?);
    }
    Ok(best)
}
