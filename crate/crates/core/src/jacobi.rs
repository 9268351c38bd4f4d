//! Lagrangian families of normal Jacobi fields and focal point detection.
//!
//! A family is carried as a pair of square matrices `(J, J')`; column `i`
//! holds the value and covariant derivative of the `i`-th basis field. The
//! matrix Jacobi equation `J'' + R J = 0` is integrated once over the whole
//! model domain with classic RK4 at a fixed step and queried through cubic
//! Hermite interpolation.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::geometry::GeodesicModel;
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyConfig {
    /// RK4 step.
    pub step: f64,
    /// Relative singular value cutoff for the evaluation kernel.
    pub rank_tol: f64,
    /// A local minimum of `sigma_min / scale` below this is a focal point.
    pub focal_tol: f64,
    /// Seed-side exclusion zone for families that vanish at `t0`.
    pub exclusion: f64,
    /// Target accuracy of refined focal times.
    pub time_tol: f64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self { step: 1e-3, rank_tol: 1e-8, focal_tol: 1e-7, exclusion: 1e-3, time_tol: 1e-9 }
    }
}

impl FamilyConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("step", self.step),
            ("rank_tol", self.rank_tol),
            ("focal_tol", self.focal_tol),
            ("exclusion", self.exclusion),
            ("time_tol", self.time_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(GeomError::InvalidArgument(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// A time at which some nonzero field of the family vanishes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FocalEvent {
    pub t: f64,
    pub multiplicity: usize,
    /// Coefficient vectors (columns) of the vanishing fields.
    #[serde(serialize_with = "linalg::serialize_rows")]
    pub kernel_basis: DMatrix<f64>,
}

/// Rank and kernel of `c -> J(t) c`.
#[derive(Debug, Clone)]
pub struct EvaluationKernel {
    pub rank: usize,
    pub kernel_basis: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// Largest singular value of the stacked `[J; J']`.
    pub scale: f64,
}

/// Dimension and second fundamental form of a submanifold through the
/// geodesic's starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmanifoldData {
    pub d: usize,
    /// Shape operator `S_v` on the tangent block, `d x d`.
    pub shape_op: DMatrix<f64>,
    /// Orthonormal `(n-1) x d` basis of the tangent space in the normal frame;
    /// `None` means the first `d` frame vectors.
    pub tangent_basis: Option<DMatrix<f64>>,
}

impl SubmanifoldData {
    pub fn new(d: usize, shape_op: DMatrix<f64>) -> Self {
        Self { d, shape_op, tangent_basis: None }
    }

    pub fn point() -> Self {
        Self::new(0, DMatrix::zeros(0, 0))
    }

    pub fn totally_geodesic(d: usize) -> Self {
        Self::new(d, DMatrix::zeros(d, d))
    }

    /// Tangent space spanned by the listed frame vectors of `R^(n-1)`.
    pub fn with_tangent_indices(mut self, normal_dim: usize, indices: &[usize]) -> Result<Self> {
        if indices.len() != self.d {
            return Err(GeomError::CountMismatch { expected: self.d, got: indices.len() });
        }
        let mut basis = DMatrix::zeros(normal_dim, self.d);
        for (col, &i) in indices.iter().enumerate() {
            if i >= normal_dim || indices[..col].contains(&i) {
                return Err(GeomError::InvalidArgument(format!(
                    "tangent index {i} is repeated or outside 0..{normal_dim}"
                )));
            }
            basis[(i, col)] = 1.0;
        }
        self.tangent_basis = Some(basis);
        Ok(self)
    }

    pub fn with_tangent_basis(mut self, basis: DMatrix<f64>) -> Self {
        self.tangent_basis = Some(basis);
        self
    }

    fn tangent_frame(&self, normal_dim: usize) -> Result<DMatrix<f64>> {
        match &self.tangent_basis {
            None => Ok(DMatrix::identity(normal_dim, normal_dim).columns(0, self.d).clone_owned()),
            Some(b) => {
                if b.shape() != (normal_dim, self.d) {
                    return Err(GeomError::InvalidDimension(format!(
                        "tangent basis is {:?}, expected {normal_dim} x {}",
                        b.shape(),
                        self.d
                    )));
                }
                let gram_err = (b.transpose() * b - DMatrix::identity(self.d, self.d)).amax();
                if gram_err > 1e-10 {
                    return Err(GeomError::InvalidArgument(format!(
                        "tangent basis is not orthonormal (Gram error {gram_err:e})"
                    )));
                }
                Ok(b.clone())
            }
        }
    }
}

#[derive(Clone)]
struct Node {
    t: f64,
    j: DMatrix<f64>,
    dj: DMatrix<f64>,
    /// `J'' = -R J`, kept for Hermite interpolation of `J'`.
    ddj: DMatrix<f64>,
}

/// A basis of `n-1` normal Jacobi fields along one geodesic, integrated over
/// the full model domain.
#[derive(Clone)]
pub struct LagrangianFamily {
    model: GeodesicModel,
    t0: f64,
    j0: DMatrix<f64>,
    dj0: DMatrix<f64>,
    cfg: FamilyConfig,
    nodes: Vec<Node>,
}

impl std::fmt::Debug for LagrangianFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LagrangianFamily")
            .field("model", &self.model)
            .field("t0", &self.t0)
            .field("j0", &self.j0)
            .field("dj0", &self.dj0)
            .field("nodes", &self.nodes.len())
            .finish()
    }
}

fn rk4_step(
    model: &GeodesicModel,
    t: f64,
    h: f64,
    j: &DMatrix<f64>,
    dj: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let r0 = model.curvature_unchecked(t);
    let rm = model.curvature_unchecked(t + 0.5 * h);
    let r1 = model.curvature_unchecked(t + h);

    let k1j = dj.clone();
    let k1p = -(&r0 * j);
    let k2j = dj + &k1p * (0.5 * h);
    let k2p = -(&rm * (j + &k1j * (0.5 * h)));
    let k3j = dj + &k2p * (0.5 * h);
    let k3p = -(&rm * (j + &k2j * (0.5 * h)));
    let k4j = dj + &k3p * h;
    let k4p = -(&r1 * (j + &k3j * h));

    let jn = j + (k1j + &k2j * 2.0 + &k3j * 2.0 + k4j) * (h / 6.0);
    let djn = dj + (k1p + &k2p * 2.0 + &k3p * 2.0 + k4p) * (h / 6.0);
    (jn, djn)
}

fn integrate_towards(
    model: &GeodesicModel,
    t0: f64,
    end: f64,
    h: f64,
    j0: &DMatrix<f64>,
    dj0: &DMatrix<f64>,
) -> Vec<Node> {
    let span = end - t0;
    let mut out = Vec::new();
    if span == 0.0 {
        return out;
    }
    let dir = span.signum();
    let full = (span.abs() / h).floor() as usize;
    let mut j = j0.clone();
    let mut dj = dj0.clone();
    let mut t = t0;
    for i in 1..=full + 1 {
        let target = if i <= full { t0 + dir * h * i as f64 } else { end };
        let step = target - t;
        if step.abs() < 1e-14 {
            continue;
        }
        let (jn, djn) = rk4_step(model, t, step, &j, &dj);
        j = jn;
        dj = djn;
        t = target;
        let ddj = -(model.curvature_unchecked(t) * &j);
        out.push(Node { t, j: j.clone(), dj: dj.clone(), ddj });
    }
    out
}

fn hermite(
    s: f64,
    dt: f64,
    y0: &DMatrix<f64>,
    m0: &DMatrix<f64>,
    y1: &DMatrix<f64>,
    m1: &DMatrix<f64>,
) -> DMatrix<f64> {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    y0 * h00 + m0 * (h10 * dt) + y1 * h01 + m1 * (h11 * dt)
}

/// Largest singular value of `[J; J']`.
fn stacked_scale(j: &DMatrix<f64>, dj: &DMatrix<f64>) -> f64 {
    let g = j.transpose() * j + dj.transpose() * dj;
    linalg::symmetric_eigenvalues(&g).last().copied().unwrap_or(0.0).max(0.0).sqrt()
}

impl LagrangianFamily {
    /// Integrates the family seeded by `(J(t0), J'(t0)) = (j0, dj0)`.
    ///
    /// The seed must be an independent basis of Jacobi fields; it need not be
    /// Lagrangian (see [`Self::is_lagrangian`]).
    pub fn new(model: GeodesicModel, t0: f64, j0: DMatrix<f64>, dj0: DMatrix<f64>, cfg: FamilyConfig) -> Result<Self> {
        cfg.validate()?;
        model.check_time(t0)?;
        let m = model.normal_dim();
        for (what, mat) in [("J0", &j0), ("dJ0", &dj0)] {
            if mat.shape() != (m, m) {
                return Err(GeomError::InvalidDimension(format!("{what} is {:?}, expected {m} x {m}", mat.shape())));
            }
        }
        let mut stacked = DMatrix::zeros(2 * m, m);
        stacked.view_mut((0, 0), (m, m)).copy_from(&j0);
        stacked.view_mut((m, 0), (m, m)).copy_from(&dj0);
        let sv = linalg::sorted_svd(&stacked).sigma;
        let smax = sv.first().copied().unwrap_or(0.0);
        let smin = sv.last().copied().unwrap_or(0.0);
        if !(smax > 0.0) || smin <= cfg.rank_tol * smax {
            return Err(GeomError::DegenerateBasis);
        }

        let (lo, hi) = model.domain();
        let h = cfg.step;
        let mut back = integrate_towards(&model, t0, lo, h, &j0, &dj0);
        back.reverse();
        let fwd = integrate_towards(&model, t0, hi, h, &j0, &dj0);
        let seed = Node { t: t0, j: j0.clone(), dj: dj0.clone(), ddj: -(model.curvature_unchecked(t0) * &j0) };
        let mut nodes = back;
        nodes.push(seed);
        nodes.extend(fwd);

        Ok(Self { model, t0, j0, dj0, cfg, nodes })
    }

    pub fn model(&self) -> &GeodesicModel {
        &self.model
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn j0(&self) -> &DMatrix<f64> {
        &self.j0
    }

    pub fn dj0(&self) -> &DMatrix<f64> {
        &self.dj0
    }

    pub fn config(&self) -> &FamilyConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.j0.ncols()
    }

    pub fn domain(&self) -> (f64, f64) {
        self.model.domain()
    }

    /// Integration grid times.
    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().map(|n| n.t)
    }

    /// `(J(t), J'(t))`, interpolated between grid nodes.
    pub fn integrate(&self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.model.check_time(t)?;
        Ok(self.state_unchecked(t))
    }

    fn state_unchecked(&self, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let nodes = &self.nodes;
        if nodes.len() == 1 {
            return (nodes[0].j.clone(), nodes[0].dj.clone());
        }
        let idx = nodes.partition_point(|n| n.t <= t).clamp(1, nodes.len() - 1);
        let (a, b) = (&nodes[idx - 1], &nodes[idx]);
        if t == a.t {
            return (a.j.clone(), a.dj.clone());
        }
        if t == b.t {
            return (b.j.clone(), b.dj.clone());
        }
        let dt = b.t - a.t;
        let s = (t - a.t) / dt;
        (hermite(s, dt, &a.j, &a.dj, &b.j, &b.dj), hermite(s, dt, &a.dj, &a.ddj, &b.dj, &b.ddj))
    }

    /// Evaluates the combination of basis fields with coefficients `c`.
    pub fn field(&self, t: f64, coeffs: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (j, dj) = self.integrate(t)?;
        Ok((j * coeffs, dj * coeffs))
    }

    /// `J'^T J - J^T J'`; constant along the geodesic for any basis and zero
    /// exactly when the family is Lagrangian.
    pub fn symplectic_form(&self, t: f64) -> Result<DMatrix<f64>> {
        let (j, dj) = self.integrate(t)?;
        Ok(dj.transpose() * &j - j.transpose() * dj)
    }

    pub fn is_lagrangian(&self) -> bool {
        let scale = stacked_scale(&self.j0, &self.dj0).max(1.0);
        let w = self.dj0.transpose() * &self.j0 - self.j0.transpose() * &self.dj0;
        w.amax() <= 1e-12 * scale * scale
    }

    pub fn evaluation_kernel(&self, t: f64) -> Result<EvaluationKernel> {
        let (j, dj) = self.integrate(t)?;
        Ok(kernel_of(&j, &dj, self.cfg.rank_tol))
    }

    /// `sigma_min(J) / scale` and `det J` at `t`.
    fn probe(&self, t: f64) -> (f64, f64) {
        let (j, dj) = self.state_unchecked(t);
        let scale = stacked_scale(&j, &dj);
        let smin = linalg::sorted_svd(&j).sigma.last().copied().unwrap_or(0.0);
        let det = j.determinant();
        if scale > 0.0 {
            (smin / scale, det)
        } else {
            (0.0, det)
        }
    }

    /// All focal events with `lo <= t <= hi`, in increasing time order.
    pub fn focal_events(&self, lo: f64, hi: f64) -> Result<Vec<FocalEvent>> {
        if lo > hi {
            return Err(GeomError::InvertedWindow { lo, hi });
        }
        self.model.check_time(lo)?;
        self.model.check_time(hi)?;
        let h = self.cfg.step;
        let accept = self.cfg.focal_tol;
        let slack = 1e-7;

        let first = self.nodes.partition_point(|n| n.t < lo - 3.0 * h);
        let last = self.nodes.partition_point(|n| n.t <= hi + 3.0 * h);
        let mut ts: Vec<f64> = self.nodes[first..last].iter().map(|n| n.t).collect();
        // The window edges are scanned too so that roots sitting on them are
        // bracketed even when they fall between nodes.
        for edge in [lo, hi] {
            if !ts.contains(&edge) {
                ts.push(edge);
            }
        }
        ts.sort_by(f64::total_cmp);
        let probes: Vec<(f64, f64)> = ts.iter().map(|&t| self.probe(t)).collect();

        let mut roots: Vec<f64> = Vec::new();
        for i in 0..ts.len() {
            let (m, det) = probes[i];
            if m == 0.0 || det == 0.0 {
                roots.push(ts[i]);
                continue;
            }
            if i + 1 < ts.len() && det.signum() != probes[i + 1].1.signum() && probes[i + 1].1 != 0.0 {
                roots.push(self.bisect_det(ts[i], ts[i + 1], det));
            }
            let left = if i > 0 { probes[i - 1].0 } else { f64::INFINITY };
            let right = if i + 1 < ts.len() { probes[i + 1].0 } else { f64::INFINITY };
            if m < left && m <= right && m < 50.0 * h {
                let a = if i > 0 { ts[i - 1] } else { ts[i] };
                let b = if i + 1 < ts.len() { ts[i + 1] } else { ts[i] };
                let (tm, vm) = self.golden_min(a, b);
                if vm < accept {
                    roots.push(tm);
                }
            }
        }
        roots.sort_by(f64::total_cmp);
        let mut merged: Vec<f64> = Vec::new();
        for r in roots {
            match merged.last_mut() {
                Some(prev) if (r - *prev).abs() < 1e-6 => {
                    if self.probe(r).0 < self.probe(*prev).0 {
                        *prev = r;
                    }
                }
                _ => merged.push(r),
            }
        }

        let mut events = Vec::new();
        for t in merged {
            if t < lo - slack || t > hi + slack {
                continue;
            }
            let (j, dj) = self.state_unchecked(t);
            let k = kernel_of(&j, &dj, accept);
            let kernel_basis = if k.kernel_basis.ncols() > 0 {
                k.kernel_basis
            } else {
                let svd = linalg::sorted_svd(&j);
                svd.v.columns(j.ncols() - 1, 1).clone_owned()
            };
            events.push(FocalEvent { t, multiplicity: kernel_basis.ncols(), kernel_basis });
        }
        Ok(events)
    }

    fn bisect_det(&self, mut a: f64, mut b: f64, det_a: f64) -> f64 {
        let sa = det_a.signum();
        while b - a > 1e-12 {
            let mid = 0.5 * (a + b);
            let d = self.probe(mid).1;
            if d == 0.0 {
                return mid;
            }
            if d.signum() == sa {
                a = mid;
            } else {
                b = mid;
            }
        }
        0.5 * (a + b)
    }

    fn golden_min(&self, mut a: f64, mut b: f64) -> (f64, f64) {
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let mut fc = self.probe(c).0;
        let mut fd = self.probe(d).0;
        while b - a > 1e-11 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = self.probe(c).0;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = self.probe(d).0;
            }
        }
        let t = 0.5 * (a + b);
        (t, self.probe(t).0)
    }

    /// Earliest focal event in `window`; the default window starts just past
    /// the seed time and runs to the end of the domain.
    pub fn first_focal_time(&self, window: Option<(f64, f64)>) -> Result<Option<FocalEvent>> {
        let (lo, hi) = window.unwrap_or((self.t0 + self.cfg.exclusion, self.domain().1));
        if lo > hi {
            return Err(GeomError::InvertedWindow { lo, hi });
        }
        Ok(self.focal_events(lo, hi)?.into_iter().next())
    }

    /// The same fields traversed along `t -> gamma(-t)`: `J~(s) = J(-s)`.
    pub fn reversed(&self) -> Result<Self> {
        Self::new(self.model.reversed(), -self.t0, self.j0.clone(), -&self.dj0, self.cfg)
    }

    /// Focal events of the family in `[a, b]` outside the seed exclusion zone.
    /// Times before `t0` are found on the reversed family.
    pub fn focal_events_in(&self, a: f64, b: f64) -> Result<Vec<FocalEvent>> {
        if a > b {
            return Err(GeomError::InvertedWindow { lo: a, hi: b });
        }
        self.model.check_time(a)?;
        self.model.check_time(b)?;
        let ex = self.cfg.exclusion;
        let mut out = Vec::new();
        if a < self.t0 - ex {
            let rev = self.reversed()?;
            let hi = (-a).min(rev.domain().1);
            let lo = (-b).max(rev.t0() + ex);
            if lo <= hi {
                for mut e in rev.focal_events(lo, hi)? {
                    e.t = -e.t;
                    out.push(e);
                }
            }
        }
        out.reverse();
        if b > self.t0 + ex {
            let lo = a.max(self.t0 + ex);
            out.extend(self.focal_events(lo, b)?);
        }
        Ok(out)
    }

    /// Number of focal points in `[a, b]`, optionally weighted by
    /// multiplicity.
    pub fn count_focal_points(&self, interval: (f64, f64), with_multiplicity: bool) -> Result<usize> {
        let events = self.focal_events_in(interval.0, interval.1)?;
        Ok(if with_multiplicity { events.iter().map(|e| e.multiplicity).sum() } else { events.len() })
    }
}

fn kernel_of(j: &DMatrix<f64>, dj: &DMatrix<f64>, rel_tol: f64) -> EvaluationKernel {
    let scale = stacked_scale(j, dj);
    let svd = linalg::sorted_svd(j);
    let cut = rel_tol * scale;
    let rank = svd.sigma.iter().filter(|&&s| s > cut).count();
    let n = j.ncols();
    EvaluationKernel {
        rank,
        kernel_basis: svd.v.columns(rank, n - rank).clone_owned(),
        singular_values: svd.sigma,
        scale,
    }
}

/// The family `Lambda_N` of `N`-Jacobi fields: tangent fields with
/// `J(0) = e_i`, `J'(0) = S_v e_i`, and normal fields with `J(0) = 0`.
pub fn submanifold_lagrangian(
    model: GeodesicModel,
    sub: &SubmanifoldData,
    cfg: FamilyConfig,
) -> Result<LagrangianFamily> {
    let m = model.normal_dim();
    if sub.d > m {
        return Err(GeomError::InvalidDimension(format!(
            "submanifold dimension {} exceeds normal dimension {m}",
            sub.d
        )));
    }
    if sub.shape_op.shape() != (sub.d, sub.d) {
        return Err(GeomError::InvalidDimension(format!(
            "shape operator is {:?}, expected {} x {}",
            sub.shape_op.shape(),
            sub.d,
            sub.d
        )));
    }
    let asym = if sub.d > 0 { linalg::asymmetry(&sub.shape_op) } else { 0.0 };
    if asym > 1e-12 {
        return Err(GeomError::NotSymmetric { what: "shape operator", asym });
    }
    let t = sub.tangent_frame(m)?;
    let q = linalg::complement(&t, m);
    let mut j0 = DMatrix::zeros(m, m);
    let mut dj0 = DMatrix::zeros(m, m);
    j0.view_mut((0, 0), (m, sub.d)).copy_from(&t);
    dj0.view_mut((0, 0), (m, sub.d)).copy_from(&(&t * &sub.shape_op));
    dj0.view_mut((0, sub.d), (m, m - sub.d)).copy_from(&q);
    LagrangianFamily::new(model, 0.0, j0, dj0, cfg)
}

/// Smallest first focal time over `v` and `-v` for the family of `N` along
/// one geodesic; `INFINITY` when neither side focalizes inside the domain.
pub fn first_focal_both_ways(family: &LagrangianFamily) -> Result<f64> {
    let fwd = family.first_focal_time(None)?.map(|e| e.t - family.t0());
    let rev = family.reversed()?;
    let bwd = rev.first_focal_time(None)?.map(|e| e.t - rev.t0());
    Ok(fwd.into_iter().chain(bwd).fold(f64::INFINITY, f64::min))
}

/// Per-direction first focal times of `N` (both orientations of each sampled
/// normal direction), computed in parallel.
pub fn focal_times<D, F>(factory: F, sub: &SubmanifoldData, directions: &[D], cfg: FamilyConfig) -> Result<Vec<f64>>
where
    D: Sync,
    F: Fn(&D) -> Result<GeodesicModel> + Sync,
{
    if directions.is_empty() {
        return Err(GeomError::InvalidArgument("no normal directions sampled".into()));
    }
    directions
        .par_iter()
        .map(|d| {
            let family = submanifold_lagrangian(factory(d)?, sub, cfg)?;
            first_focal_both_ways(&family)
        })
        .collect()
}

/// Sampled focal radius: the smallest first focal time over the directions.
pub fn focal_radius<D, F>(factory: F, sub: &SubmanifoldData, directions: &[D], cfg: FamilyConfig) -> Result<f64>
where
    D: Sync,
    F: Fn(&D) -> Result<GeodesicModel> + Sync,
{
    Ok(focal_times(factory, sub, directions, cfg)?.into_iter().fold(f64::INFINITY, f64::min))
}
