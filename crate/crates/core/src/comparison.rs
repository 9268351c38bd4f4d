//! End-to-end trace comparisons against the model solutions, with rigidity
//! detection in the equality case, and the focal point bound for
//! submanifolds under `Ric_k >= k`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::geometry::{radial_ric_k_min_over, GeodesicModel};
use crate::jacobi::{submanifold_lagrangian, FamilyConfig, FocalEvent, LagrangianFamily, SubmanifoldData};
use crate::linalg;
use crate::riccati::{liminf_nonnegative, riccati_operator, LiminfRecord, ModelSolution, RiccatiValue};
use crate::wilking::{FullIndexReport, SplittingReport, TransverseSplit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComparisonConfig {
    /// Number of sampling intervals on the comparison window.
    pub samples: usize,
    /// A margin below `-violation_tol` (relative to `max(1, |k lambda|)`) is a
    /// violation of the trace bound.
    pub violation_tol: f64,
    /// `|margin|` at most this counts as equality.
    pub equality_tol: f64,
    /// Consecutive equality samples needed before rigidity is examined.
    pub persistence: usize,
    /// Offset from a pole of the model solution or a singular seed time.
    pub singular_shift: f64,
    /// Sup-norm tolerance of the `f~ E` fit.
    pub fit_tol: f64,
    /// Samples used by the splitting detector.
    pub split_samples: usize,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            samples: 400,
            violation_tol: 1e-6,
            equality_tol: 1e-7,
            persistence: 3,
            singular_shift: 1e-3,
            fit_tol: 1e-6,
            split_samples: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonStatus {
    Checked,
    /// `Ric_k >= k kappa` fails somewhere on the window.
    ModelHypothesisFailed,
    /// The trace at the start exceeds `k lambda~`.
    InitialHypothesisFailed,
}

/// What the equality branch found.
#[derive(Debug, Clone, Serialize)]
pub struct RigidityFindings {
    pub interval: (f64, f64),
    pub splitting: SplittingReport,
    /// Sup-norm relative residual of each `H`-field against `f~ E`.
    pub fit_residuals: Vec<f64>,
    pub max_fit_residual: f64,
    pub confirmed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub k: usize,
    pub kappa: f64,
    pub t0: f64,
    /// Start of sampling; differs from `t0` when the seed time is singular.
    pub effective_t0: f64,
    pub ric_k_min: f64,
    pub status: ComparisonStatus,
    pub initial_trace: f64,
    pub initial_model: f64,
    pub liminf: Option<LiminfRecord>,
    pub full_index: Option<FullIndexReport>,
    pub times: Vec<f64>,
    pub traces: Vec<f64>,
    pub model_values: Vec<f64>,
    pub margins: Vec<f64>,
    pub det_j: Vec<f64>,
    pub sigma_min: Vec<f64>,
    pub a_norm: Vec<f64>,
    pub violations: Vec<f64>,
    pub max_violation: f64,
    pub equality_time: Option<f64>,
    pub rigidity: Option<RigidityFindings>,
    pub focal_events: Vec<FocalEvent>,
}

impl ComparisonReport {
    fn empty(k: usize, kappa: f64, t0: f64, ric_k_min: f64, status: ComparisonStatus) -> Self {
        Self {
            k,
            kappa,
            t0,
            effective_t0: t0,
            ric_k_min,
            status,
            initial_trace: f64::NAN,
            initial_model: f64::NAN,
            liminf: None,
            full_index: None,
            times: Vec::new(),
            traces: Vec::new(),
            model_values: Vec::new(),
            margins: Vec::new(),
            det_j: Vec::new(),
            sigma_min: Vec::new(),
            a_norm: Vec::new(),
            violations: Vec::new(),
            max_violation: 0.0,
            equality_time: None,
            rigidity: None,
            focal_events: Vec::new(),
        }
    }

    /// The bound was checked, holds everywhere, and any rigidity that fired
    /// was confirmed.
    pub fn passed(&self) -> bool {
        self.status == ComparisonStatus::Checked
            && self.violations.is_empty()
            && self.rigidity.as_ref().is_none_or(|r| r.confirmed)
    }

    /// CSV rows `t, trace, k lambda, margin, det J, sigma_min, |A|`.
    pub fn rows(&self) -> impl Iterator<Item = [f64; 7]> + '_ {
        (0..self.times.len()).map(move |i| {
            [
                self.times[i],
                self.traces[i],
                self.model_values[i],
                self.margins[i],
                self.det_j[i],
                self.sigma_min[i],
                self.a_norm[i],
            ]
        })
    }
}

fn orthonormal_w(w: &DMatrix<f64>, dim: usize) -> Result<DMatrix<f64>> {
    if w.nrows() != dim {
        return Err(GeomError::InvalidDimension(format!("W has {} rows, normal space has dimension {dim}", w.nrows())));
    }
    let scale = w.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    let b = linalg::orthonormal_basis(w, 1e-10, scale);
    if b.ncols() != w.ncols() {
        return Err(GeomError::InvalidArgument("W vectors are not independent".into()));
    }
    Ok(b)
}

/// Coefficients of `{J in Lambda : J(t) is orthogonal to W}`.
pub fn subfamily_orthogonal_to(family: &LagrangianFamily, t: f64, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (j, _) = family.integrate(t)?;
    let a = w.transpose() * j;
    let scale = linalg::spectral_norm(&a).max(f64::MIN_POSITIVE);
    Ok(linalg::null_space(&a, 1e-10, scale))
}

fn model_value(sol: &ModelSolution, t: f64) -> Option<f64> {
    sol.riccati(t).finite()
}

/// Fits each field `J c` (columns of `h`) against `g(t) E` with
/// `g = f~(t)/f~(t0)`; returns sup-norm residuals relative to the field size.
fn fit_model_fields(
    family: &LagrangianFamily,
    h: &DMatrix<f64>,
    sol: &ModelSolution,
    t0: f64,
    times: &[f64],
) -> Result<Vec<f64>> {
    let f0 = sol.value(t0);
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        values.push((sol.value(t) / f0, family.field(t, h)?.0));
    }
    let dim = family.dim();
    let mut out = Vec::with_capacity(h.ncols());
    for c in 0..h.ncols() {
        let mut num = nalgebra::DVector::zeros(dim);
        let mut den = 0.0;
        let mut size = 0.0f64;
        for (g, y) in &values {
            num += y.column(c) * *g;
            den += g * g;
            size = size.max(y.column(c).norm());
        }
        if den == 0.0 || size == 0.0 {
            out.push(f64::INFINITY);
            continue;
        }
        let e = num / den;
        let resid = values.iter().map(|(g, y)| (y.column(c) - &e * *g).norm()).fold(0.0, f64::max);
        out.push(resid / size);
    }
    Ok(out)
}

fn rigidity_on(
    split: &TransverseSplit<'_>,
    sol: &ModelSolution,
    lo: f64,
    hi: f64,
    cfg: &ComparisonConfig,
) -> Result<RigidityFindings> {
    let splitting = split.splitting_detector(lo, hi, cfg.split_samples)?;
    let h = split.transfer_subfamily(lo)?;
    let n = cfg.split_samples.max(2);
    let times: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let fit_residuals = fit_model_fields(split.family(), &h, sol, lo, &times)?;
    let max_fit_residual = fit_residuals.iter().copied().fold(0.0, f64::max);
    let confirmed = splitting.confirmed && max_fit_residual <= cfg.fit_tol;
    Ok(RigidityFindings { interval: (lo, hi), splitting, fit_residuals, max_fit_residual, confirmed })
}

/// End of the usable window: `hi`, or just before the first pole of
/// `lambda~` in `(lo, hi]`.
fn usable_end(sol: &ModelSolution, lo: f64, hi: f64, shift: f64) -> f64 {
    match sol.poles_in(lo + shift * 0.5, hi).first() {
        Some(&p) => p - shift,
        None => hi,
    }
}

/// Checks `Trace S_t|H(t) <= k lambda~(t)` on `interval`, where
/// `V = {J : J(t0) orthogonal to W}`, `H(t)` is the orthogonal complement of
/// `V(t)` and `W` is a `k`-dimensional subspace of the normal space at `t0`
/// given by the columns of `w`.
///
/// A failing `Ric_k` gate or initial inequality is recorded in the report.
/// A full-index violation aborts with the offending time.
pub fn intermediate_ricci_comparison(
    family: &LagrangianFamily,
    w: &DMatrix<f64>,
    k: usize,
    sol: &ModelSolution,
    interval: (f64, f64),
    cfg: &ComparisonConfig,
) -> Result<ComparisonReport> {
    let (lo, hi) = interval;
    if lo >= hi {
        return Err(GeomError::InvertedWindow { lo, hi });
    }
    let dim = family.dim();
    if w.ncols() != k || k == 0 || k > dim {
        return Err(GeomError::InvalidArgument(format!(
            "W must have exactly k = {k} columns with 1 <= k <= {dim}, got {}",
            w.ncols()
        )));
    }
    let w = orthonormal_w(w, dim)?;
    let kappa = sol.kappa();
    let model = family.model();
    let ric = radial_ric_k_min_over(model, lo, hi, k, cfg.samples)?;
    if ric < k as f64 * kappa - 1e-12 {
        return Ok(ComparisonReport::empty(k, kappa, lo, ric, ComparisonStatus::ModelHypothesisFailed));
    }
    let mut report = ComparisonReport::empty(k, kappa, lo, ric, ComparisonStatus::Checked);
    let kf = k as f64;

    // Seed-time regularity: lambda~ finite there and V, H well posed.
    let mut t0 = lo;
    let seed_split_ok = |t: f64| -> Result<bool> {
        let v = subfamily_orthogonal_to(family, t, &w)?;
        if v.ncols() != dim - k {
            return Ok(false);
        }
        let split = TransverseSplit::new(family, v)?;
        Ok(split.full_index_at(t)? && split.horizontal_space(t)?.ncols() == k)
    };
    if model_value(sol, lo).is_none() || !seed_split_ok(lo)? {
        t0 = lo + cfg.singular_shift;
        let v = subfamily_orthogonal_to(family, t0, &w)?;
        let split = TransverseSplit::new(family, v)?;
        report.liminf = Some(liminf_nonnegative(
            lo,
            |t| {
                let l = model_value(sol, t)?;
                let s = split.transverse_riccati(t).ok()?.trace();
                Some(kf * l - s)
            },
            1e-6,
        ));
    }
    report.effective_t0 = t0;

    let v = subfamily_orthogonal_to(family, t0, &w)?;
    let split = TransverseSplit::new(family, v)?;
    let end = usable_end(sol, t0, hi, cfg.singular_shift);
    if end <= t0 {
        return Err(GeomError::InvertedWindow { lo: t0, hi: end });
    }

    let initial_trace = split.transverse_riccati(t0)?.trace();
    let initial_model = model_value(sol, t0).map_or(f64::INFINITY, |l| kf * l);
    report.initial_trace = initial_trace;
    report.initial_model = initial_model;
    let init_ok = match &report.liminf {
        Some(rec) => rec.holds,
        None => initial_trace <= initial_model + cfg.violation_tol * initial_model.abs().max(1.0),
    };
    if !init_ok {
        report.status = ComparisonStatus::InitialHypothesisFailed;
        return Ok(report);
    }

    let fi = split.full_index_check(t0, end)?;
    if let Some(&bad) = fi.failing_times.first() {
        return Err(GeomError::FullIndexViolation { t: bad });
    }
    report.full_index = Some(fi);
    report.focal_events = family.focal_events(t0, end)?;

    let n = cfg.samples.max(2);
    let mut run = 0usize;
    for i in 0..=n {
        let t = t0 + (end - t0) * i as f64 / n as f64;
        let Some(l) = model_value(sol, t) else { continue };
        let trace = split.transverse_riccati(t)?.trace();
        let model_v = kf * l;
        let margin = model_v - trace;
        let (j, _) = family.integrate(t)?;
        let kern = family.evaluation_kernel(t)?;
        let smin = kern.singular_values.last().copied().unwrap_or(0.0);
        let a = split.a_tensor(t).map(|a| linalg::spectral_norm(&a)).unwrap_or(f64::NAN);

        report.times.push(t);
        report.traces.push(trace);
        report.model_values.push(model_v);
        report.margins.push(margin);
        report.det_j.push(j.determinant());
        report.sigma_min.push(if kern.scale > 0.0 { smin / kern.scale } else { 0.0 });
        report.a_norm.push(a);

        let scale = model_v.abs().max(1.0);
        if margin < -cfg.violation_tol * scale {
            report.violations.push(t);
            report.max_violation = report.max_violation.max(-margin);
        }
        if i > 0 && margin.abs() <= cfg.equality_tol * scale {
            run += 1;
            if run >= cfg.persistence {
                report.equality_time = Some(t);
            }
        } else {
            run = 0;
        }
    }

    if let Some(t1) = report.equality_time {
        report.rigidity = Some(rigidity_on(&split, sol, t0, t1, cfg)?);
    }
    Ok(report)
}

/// The field promised by the sectional comparison at `t1`.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    pub t0: f64,
    pub t1: f64,
    pub hypothesis_holds: bool,
    /// `<J0', J0>` and `lambda~ |J0|^2` at `t0` and at `t1`.
    pub j0_at_t0: (f64, f64),
    pub j0_at_t1: (f64, f64),
    /// Coefficients of the witness `J1` (unit norm).
    pub witness: Option<Vec<f64>>,
    /// `<J1', J1>` and `lambda~ |J1|^2` at `t1`.
    pub witness_at_t1: Option<(f64, f64)>,
    pub inequality_holds: bool,
    pub equality: bool,
}

const WITNESS_TOL: f64 = 1e-8;

/// Builds the witness `J1` with `J1(t1)` spanning the one-dimensional `H(t1)`
/// of the split `V = {J : <J(t0), J0(t0)> = 0}` and checks
/// `<S J1, J1> <= lambda~ |J1|^2` at `t1`.
pub fn sectional_comparison_witness(
    family: &LagrangianFamily,
    j0_coeffs: &[f64],
    sol: &ModelSolution,
    t0: f64,
    t1: f64,
) -> Result<WitnessReport> {
    let dim = family.dim();
    if j0_coeffs.len() != dim {
        return Err(GeomError::CountMismatch { expected: dim, got: j0_coeffs.len() });
    }
    if t1 < t0 {
        return Err(GeomError::InvertedWindow { lo: t0, hi: t1 });
    }
    let c0 = DMatrix::from_column_slice(dim, 1, j0_coeffs);
    let pair = |t: f64, c: &DMatrix<f64>| -> Result<(f64, f64)> {
        let (y, yp) = family.field(t, c)?;
        let l = model_value(sol, t).ok_or(GeomError::InvalidArgument(format!("model solution has a pole at {t}")))?;
        Ok((yp.column(0).dot(&y.column(0)), l * y.column(0).norm_squared()))
    };
    let j0_at_t0 = pair(t0, &c0)?;
    let j0_at_t1 = pair(t1, &c0)?;
    let hypothesis_holds = j0_at_t0.0 <= j0_at_t0.1 + WITNESS_TOL * j0_at_t0.1.abs().max(1.0);
    let mut report = WitnessReport {
        t0,
        t1,
        hypothesis_holds,
        j0_at_t0,
        j0_at_t1,
        witness: None,
        witness_at_t1: None,
        inequality_holds: false,
        equality: false,
    };
    if !hypothesis_holds {
        return Ok(report);
    }

    let (y0, _) = family.field(t0, &c0)?;
    if y0.norm() <= family.config().rank_tol * family.evaluation_kernel(t0)?.scale {
        return Err(GeomError::VanishingField { t: t0 });
    }
    let v = subfamily_orthogonal_to(family, t0, &y0)?;
    let split = TransverseSplit::new(family, v)?;
    let fi = split.full_index_check(t0, t1)?;
    if let Some(&bad) = fi.failing_times.first() {
        return Err(GeomError::FullIndexViolation { t: bad });
    }
    let kern = family.evaluation_kernel(t1)?;
    if kern.rank < dim {
        return Err(GeomError::SingularEvaluation { t: t1, rank: kern.rank, dim });
    }
    let mut c1 = split.transfer_subfamily(t1)?;
    if c1.ncols() != 1 {
        return Err(GeomError::InvalidDimension(format!("H(t1) has dimension {}", c1.ncols())));
    }
    let nrm = c1.norm();
    c1 /= nrm;
    if let Some(first) = c1.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            c1 = -c1;
        }
    }
    let (lhs, rhs) = pair(t1, &c1)?;
    let tol = WITNESS_TOL * rhs.abs().max(1.0);
    report.witness = Some(c1.iter().copied().collect());
    report.witness_at_t1 = Some((lhs, rhs));
    report.inequality_holds = lhs <= rhs + tol;
    report.equality = (lhs - rhs).abs() <= tol;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ForcingReport {
    pub alpha: f64,
    pub t0: f64,
    /// `pi - alpha`.
    pub deadline: f64,
    /// Smallest `<J', J>/|J|^2` over fields not vanishing at `t0`.
    pub min_rayleigh: f64,
    /// `cot(t0 + alpha)`, `None` at a pole.
    pub model_at_t0: Option<f64>,
    pub hypothesis_holds: bool,
    pub event: Option<FocalEvent>,
    pub passed: bool,
}

/// With `lambda~ = cot(t + alpha)` and the sectional hypothesis at `t0`, the
/// family must become singular by `pi - alpha`.
pub fn singularity_forcing_check(family: &LagrangianFamily, alpha: f64, t0: f64) -> Result<ForcingReport> {
    let pi = std::f64::consts::PI;
    if !(0.0..pi).contains(&alpha) {
        return Err(GeomError::InvalidArgument(format!("alpha = {alpha} outside [0, pi)")));
    }
    if radial_ric_k_min_over(family.model(), t0, pi - alpha, 1, 200)? < 1.0 - 1e-12 {
        return Err(GeomError::InvalidArgument("sectional curvature along the geodesic drops below 1".into()));
    }
    let deadline = pi - alpha;
    if !(t0 < deadline) {
        return Err(GeomError::InvertedWindow { lo: t0, hi: deadline });
    }
    let sol = ModelSolution::shifted_cot(alpha);
    let (j, dj) = family.integrate(t0)?;
    let kern = family.evaluation_kernel(t0)?;
    let img = linalg::complement(&kern.kernel_basis, family.dim());
    let y = &j * &img;
    let yp = &dj * &img;
    let min_rayleigh = if img.ncols() == 0 {
        f64::INFINITY
    } else {
        let g = y.transpose() * &y;
        let m = y.transpose() * &yp;
        let eig = g.symmetric_eigen();
        let inv_sqrt = &eig.eigenvectors
            * DMatrix::from_diagonal(&eig.eigenvalues.map(|x| 1.0 / x.max(f64::MIN_POSITIVE).sqrt()))
            * eig.eigenvectors.transpose();
        let sym = &inv_sqrt * ((&m + m.transpose()) * 0.5) * &inv_sqrt;
        linalg::symmetric_eigenvalues(&sym)[0]
    };
    let model_at_t0 = match sol.riccati(t0) {
        RiccatiValue::Finite(v) => Some(v),
        RiccatiValue::Pole => None,
    };
    let hypothesis_holds = match model_at_t0 {
        None => true,
        Some(l) => min_rayleigh <= l + 1e-8 * l.abs().max(1.0),
    };
    let ex = family.config().exclusion;
    let lo = if kern.rank < family.dim() { t0 + ex } else { t0 + family.config().time_tol };
    let hi = (deadline + 1e-6).min(family.domain().1);
    let event = family.first_focal_time(Some((lo, hi)))?;
    let passed = !hypothesis_holds || event.is_some();
    Ok(ForcingReport { alpha, t0, deadline, min_rayleigh, model_at_t0, hypothesis_holds, event, passed })
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticReport {
    pub t0: f64,
    pub t_max: f64,
    /// Trace of `S` on `W` at `t0` and `k lambda~(t0)`.
    pub initial_trace: f64,
    pub initial_model: f64,
    pub hypothesis_holds: bool,
    /// Focal events strictly inside the window; the lemma needs none.
    pub interior_focal_events: Vec<FocalEvent>,
    pub max_a_norm: f64,
    pub splitting: Option<SplittingReport>,
    pub fit_residuals: Vec<f64>,
    /// `max |<v, h>|` between `V(t)` and the values of normalized `H`-fields.
    pub orthogonality: f64,
    /// Flat branch: `max ||S^||` and `max ||R^h||` on the window.
    pub flat_s_hat: Option<f64>,
    pub flat_r_h: Option<f64>,
    pub confirmed: bool,
}

/// The splitting conclusions on `[t0, t_max)` when `lambda~ -> -infinity` at
/// `t_max` (or, for `kappa = 0` and `lambda~ = 0`, on a long window standing
/// in for `[t0, infinity)`).
pub fn asymptotic_rigidity_check(
    family: &LagrangianFamily,
    w: &DMatrix<f64>,
    k: usize,
    sol: &ModelSolution,
    t_max: f64,
    cfg: &ComparisonConfig,
) -> Result<AsymptoticReport> {
    let dim = family.dim();
    if w.ncols() != k || k == 0 || k > dim {
        return Err(GeomError::InvalidArgument(format!("W must have k = {k} columns")));
    }
    let w = orthonormal_w(w, dim)?;
    let t0 = family.t0();
    if t_max <= t0 {
        return Err(GeomError::InvertedWindow { lo: t0, hi: t_max });
    }
    let flat = sol.kappa() == 0.0 && sol.coefficients().0 == 0.0;
    let kf = k as f64;
    let end = if flat { t_max } else { t_max - cfg.singular_shift };

    let v = subfamily_orthogonal_to(family, t0, &w)?;
    let split = TransverseSplit::new(family, v)?;
    let s_hat0 = split.transverse_riccati(t0)?;
    let initial_trace = s_hat0.trace();
    let (initial_model, hypothesis_holds) = if flat {
        (0.0, initial_trace <= cfg.violation_tol)
    } else {
        let l = model_value(sol, t0).ok_or(GeomError::InvalidArgument("model solution has a pole at t0".into()))?;
        let towards = model_value(sol, t_max - 1e-6).unwrap_or(f64::NEG_INFINITY);
        let diverges = towards < -1e5;
        (kf * l, diverges && initial_trace <= kf * l + cfg.violation_tol * (kf * l).abs().max(1.0))
    };
    let ex = family.config().exclusion;
    let interior_focal_events = family.focal_events(t0 + ex, end)?;

    let mut report = AsymptoticReport {
        t0,
        t_max,
        initial_trace,
        initial_model,
        hypothesis_holds,
        interior_focal_events,
        max_a_norm: f64::NAN,
        splitting: None,
        fit_residuals: Vec::new(),
        orthogonality: f64::NAN,
        flat_s_hat: None,
        flat_r_h: None,
        confirmed: false,
    };
    if !hypothesis_holds || !report.interior_focal_events.is_empty() {
        return Ok(report);
    }

    let splitting = split.splitting_detector(t0, end, cfg.split_samples)?;
    report.max_a_norm = splitting.max_a_norm;
    let h = split.transfer_subfamily(t0)?;
    let n = cfg.split_samples.max(2);
    let times: Vec<f64> = (0..=n).map(|i| t0 + (end - t0) * i as f64 / n as f64).collect();
    report.fit_residuals = fit_model_fields(family, &h, sol, t0, &times)?;

    let (hy0, hyp0) = family.field(t0, &h)?;
    let mut hn = h.clone();
    for c in 0..h.ncols() {
        let s = (hy0.column(c).norm_squared() + hyp0.column(c).norm_squared()).sqrt();
        hn.column_mut(c).scale_mut(1.0 / s);
    }
    let mut orth = 0.0f64;
    let mut s_max = 0.0f64;
    let mut r_max = 0.0f64;
    for &t in &times {
        let bv = split.vertical_space(t)?;
        let (y, _) = family.field(t, &hn)?;
        if bv.ncols() > 0 {
            orth = orth.max((bv.transpose() * y).amax());
        }
        if flat {
            let (bh, s) = split.transverse_parts(t)?;
            s_max = s_max.max(linalg::spectral_norm(&s));
            let r = family.model().curvature(t)?;
            r_max = r_max.max(linalg::spectral_norm(&(bh.transpose() * r * &bh)));
        }
    }
    report.orthogonality = orth;
    let fit_max = report.fit_residuals.iter().copied().fold(0.0, f64::max);
    let mut confirmed = splitting.max_a_norm <= crate::wilking::SPLIT_A_TOL
        && splitting.confirmed
        && fit_max <= cfg.fit_tol
        && orth <= 1e-8;
    if flat {
        report.flat_s_hat = Some(s_max);
        report.flat_r_h = Some(r_max);
        confirmed &= s_max <= 1e-6 && r_max <= 1e-6;
    }
    report.splitting = Some(splitting);
    report.confirmed = confirmed;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremAReport {
    pub dim_n: usize,
    pub k: usize,
    pub ric_k_min: f64,
    pub hypotheses_hold: bool,
    pub focal_count: usize,
    pub required_count: usize,
    pub first_forward: Option<f64>,
    pub first_backward: Option<f64>,
    pub first_focal: f64,
    /// Trace of the shape operator; the family is flipped when positive.
    pub shape_trace: f64,
    pub flipped: bool,
    /// Rigidity run when the first focal time is exactly `pi/2`.
    pub equality_case: Option<AsymptoticReport>,
    pub totally_geodesic: Option<bool>,
    pub count_ok: bool,
    pub radius_ok: bool,
    pub passed: bool,
}

pub const THEOREM_A_TIME_TOL: f64 = 1e-6;

/// Focal counting on `[-pi/2, pi/2]`, the `pi/2` bound, and the equality
/// case, along one unit normal geodesic of `N`.
pub fn theorem_a_check(
    model: &GeodesicModel,
    sub: &SubmanifoldData,
    k: usize,
    fcfg: FamilyConfig,
    ccfg: &ComparisonConfig,
) -> Result<TheoremAReport> {
    let d = sub.d;
    if k == 0 || k > model.normal_dim() {
        return Err(GeomError::InvalidArgument(format!("k = {k} outside 1..={}", model.normal_dim())));
    }
    let ric = radial_ric_k_min_over(model, -FRAC_PI_2, FRAC_PI_2, k, 400)?;
    let hypotheses_hold = ric >= k as f64 - 1e-9 && d >= k;
    let family = submanifold_lagrangian(model.clone(), sub, fcfg)?;
    let focal_count = family.count_focal_points((-FRAC_PI_2, FRAC_PI_2), true)?;
    let required_count = (d + 1).saturating_sub(k);
    let first_forward = family.first_focal_time(None)?.map(|e| e.t);
    let rev = family.reversed()?;
    let first_backward = rev.first_focal_time(None)?.map(|e| e.t);
    let first_focal = first_forward.into_iter().chain(first_backward).fold(f64::INFINITY, f64::min);
    let shape_trace = if d > 0 { sub.shape_op.trace() } else { 0.0 };
    let flipped = shape_trace > 0.0;

    let count_ok = focal_count >= required_count;
    let radius_ok = first_focal <= FRAC_PI_2 + THEOREM_A_TIME_TOL;
    let mut report = TheoremAReport {
        dim_n: d,
        k,
        ric_k_min: ric,
        hypotheses_hold,
        focal_count,
        required_count,
        first_forward,
        first_backward,
        first_focal,
        shape_trace,
        flipped,
        equality_case: None,
        totally_geodesic: None,
        count_ok,
        radius_ok,
        passed: !hypotheses_hold || (count_ok && radius_ok),
    };

    if hypotheses_hold && d > 0 && (first_focal - FRAC_PI_2).abs() <= THEOREM_A_TIME_TOL {
        let oriented = if flipped { &rev } else { &family };
        let (j0, _) = oriented.integrate(oriented.t0())?;
        let t_basis = linalg::orthonormal_basis(&j0, 1e-10, 1.0);
        let sol = ModelSolution::shifted_cot(FRAC_PI_2);
        let rig = asymptotic_rigidity_check(oriented, &t_basis, d, &sol, oriented.t0() + FRAC_PI_2, ccfg)?;
        let tg = sub.shape_op.amax() <= 1e-8;
        report.passed &= rig.confirmed && tg;
        report.totally_geodesic = Some(tg);
        report.equality_case = Some(rig);
    }
    Ok(report)
}

/// `Trace S` restricted to the first `d` frame vectors at a regular time.
pub fn tangent_trace(family: &LagrangianFamily, t: f64, basis: &DMatrix<f64>) -> Result<f64> {
    let s = riccati_operator(family, t)?;
    Ok((basis.transpose() * s * basis).trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{constant_curvature_model, product_space_form_model, ProductDirection};
    use std::f64::consts::{FRAC_PI_4, PI};

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(v))
    }

    fn diff_future() -> LagrangianFamily {
        let m = constant_curvature_model(3, 0.0).unwrap();
        LagrangianFamily::new(m, 0.0, diag(&[0.0, 1.0]), DMatrix::identity(2, 2), FamilyConfig::default()).unwrap()
    }

    fn hopf() -> LagrangianFamily {
        let m = constant_curvature_model(3, 1.0).unwrap();
        LagrangianFamily::new(m, 0.0, diag(&[0.0, 1.0]), diag(&[1.0, 0.0]), FamilyConfig::default()).unwrap()
    }

    #[test]
    fn equator_comparison_is_rigid() {
        let s3 = constant_curvature_model(4, 1.0).unwrap();
        let fam = submanifold_lagrangian(s3, &SubmanifoldData::totally_geodesic(3), FamilyConfig::default()).unwrap();
        let sol = ModelSolution::shifted_cot(FRAC_PI_2);
        let r = intermediate_ricci_comparison(
            &fam,
            &DMatrix::identity(3, 3),
            3,
            &sol,
            (0.0, FRAC_PI_2),
            &ComparisonConfig::default(),
        )
        .unwrap();
        assert!(r.passed(), "{:?}", r.violations);
        assert!(r.equality_time.is_some());
        let rig = r.rigidity.unwrap();
        assert!(rig.confirmed, "{rig:?}");
    }

    #[test]
    fn diff_future_comparison() {
        let fam = diff_future();
        let sol = ModelSolution::new(0.0, 1.0, 1.0).unwrap();
        let w = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        let r = intermediate_ricci_comparison(&fam, &w, 1, &sol, (0.0, 3.0), &ComparisonConfig::default()).unwrap();
        assert!(r.passed());
        assert!(r.equality_time.is_some());
        assert!(r.rigidity.as_ref().unwrap().confirmed);
        let i = r.times.iter().position(|&t| (t - 1.5).abs() < 1e-12).unwrap();
        assert!((r.traces[i] - 0.4).abs() < 1e-10);
    }

    #[test]
    fn hypothesis_gate() {
        let (k, p) = (6usize, 4usize);
        let m =
            product_space_form_model(k - 1, k as f64 / (k - p) as f64, p, k as f64, ProductDirection::first_factor())
                .unwrap();
        let fam = submanifold_lagrangian(m, &SubmanifoldData::point(), FamilyConfig::default()).unwrap();
        let w = DMatrix::identity(8, 8).columns(0, 2).clone_owned();
        let r = intermediate_ricci_comparison(
            &fam,
            &w,
            2,
            &ModelSolution::shifted_cot(0.0),
            (0.0, 1.0),
            &ComparisonConfig::default(),
        )
        .unwrap();
        assert_eq!(r.status, ComparisonStatus::ModelHypothesisFailed);
    }

    #[test]
    fn point_family_singular_start() {
        let s3 = constant_curvature_model(3, 1.0).unwrap();
        let fam = submanifold_lagrangian(s3, &SubmanifoldData::point(), FamilyConfig::default()).unwrap();
        let w = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let r = intermediate_ricci_comparison(
            &fam,
            &w,
            1,
            &ModelSolution::shifted_cot(0.0),
            (0.0, 3.0),
            &ComparisonConfig::default(),
        )
        .unwrap();
        assert!(r.liminf.as_ref().unwrap().holds);
        assert!(r.passed());
    }

    #[test]
    fn witnesses() {
        let sol = ModelSolution::new(0.0, 1.0, 1.0).unwrap();
        let r = sectional_comparison_witness(&diff_future(), &[1.0, 1.0], &sol, 0.0, 1.0).unwrap();
        assert!((r.j0_at_t1.0 - 3.0).abs() < 1e-10 && (r.j0_at_t1.1 - 2.5).abs() < 1e-10);
        let (l, rr) = r.witness_at_t1.unwrap();
        assert!((l - rr).abs() < 1e-9 && r.equality);
        let wv = r.witness.unwrap();
        assert!(wv[0].abs() < 1e-10 && (wv[1] - 1.0).abs() < 1e-10);

        let sol = ModelSolution::shifted_cot(FRAC_PI_2);
        let r = sectional_comparison_witness(&hopf(), &[1.0, 1.0], &sol, 0.0, FRAC_PI_4).unwrap();
        assert!(r.equality, "{r:?}");
        assert!((r.witness_at_t1.unwrap().0 + 0.5).abs() < 1e-8);

        let r = sectional_comparison_witness(&hopf(), &[1.0, 1.0], &ModelSolution::shifted_cot(PI - 0.1), 0.0, 0.05)
            .unwrap();
        assert!(!r.hypothesis_holds);
    }

    #[test]
    fn forcing() {
        let s3 = constant_curvature_model(3, 1.0).unwrap();
        let cfg = FamilyConfig::default();
        let p = submanifold_lagrangian(s3.clone(), &SubmanifoldData::point(), cfg).unwrap();
        let r = singularity_forcing_check(&p, 0.0, 0.0).unwrap();
        assert!(r.passed && (r.event.unwrap().t - PI).abs() < 1e-6);
        let eq = submanifold_lagrangian(s3.clone(), &SubmanifoldData::totally_geodesic(2), cfg).unwrap();
        let r = singularity_forcing_check(&eq, FRAC_PI_2, 0.0).unwrap();
        assert!(r.hypothesis_holds && (r.event.unwrap().t - FRAC_PI_2).abs() < 1e-6);
        let c = submanifold_lagrangian(s3, &SubmanifoldData::totally_geodesic(1), cfg).unwrap();
        let r = singularity_forcing_check(&c, FRAC_PI_2, 0.0).unwrap();
        assert!(r.hypothesis_holds && (r.event.unwrap().t - FRAC_PI_2).abs() < 1e-6);
    }

    #[test]
    fn asymptotic() {
        let s3 = constant_curvature_model(3, 1.0).unwrap();
        let cfg = FamilyConfig::default();
        let eq = submanifold_lagrangian(s3.clone(), &SubmanifoldData::totally_geodesic(2), cfg).unwrap();
        let sol = ModelSolution::shifted_cot(FRAC_PI_2);
        let r =
            asymptotic_rigidity_check(&eq, &DMatrix::identity(2, 2), 2, &sol, FRAC_PI_2, &ComparisonConfig::default())
                .unwrap();
        assert!(r.confirmed, "{r:?}");

        let c = submanifold_lagrangian(s3, &SubmanifoldData::totally_geodesic(1), cfg).unwrap();
        let w = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let r = asymptotic_rigidity_check(&c, &w, 1, &sol, FRAC_PI_2, &ComparisonConfig::default()).unwrap();
        assert!(r.confirmed, "{r:?}");
    }

    #[test]
    fn theorem_a_equator() {
        let s4 = constant_curvature_model(4, 1.0).unwrap();
        let r = theorem_a_check(
            &s4,
            &SubmanifoldData::totally_geodesic(3),
            1,
            FamilyConfig::default(),
            &ComparisonConfig::default(),
        )
        .unwrap();
        assert_eq!(r.focal_count, 6);
        assert!(r.passed, "{r:?}");
        assert_eq!(r.totally_geodesic, Some(true));
    }
}
