//! TOML scenario files and the analyses the command line runs from them.
//!
//! ```toml
//! [model]
//! kind = "product"          # "constant" | "product" | "diagonal"
//! a = 3
//! kappa1 = 2.0
//! b = 2
//! kappa2 = 4.0
//! alpha = 1.5707963267948966
//!
//! [submanifold]
//! dim = 3                   # first `dim` frame vectors unless tangent_indices is set
//!
//! [analysis]
//! expected = 1.5707963267948966
//! ```

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::comparison::{intermediate_ricci_comparison, ComparisonConfig};
use crate::error::GeomError;
use crate::geometry::{
    constant_curvature_model, custom_diagonal_model, product_space_form_model, GeodesicModel, ProductDirection,
    ScalarFn,
};
use crate::jacobi::{focal_times, submanifold_lagrangian, FamilyConfig, LagrangianFamily, SubmanifoldData};
use crate::linalg;
use crate::riccati::ModelSolution;
use crate::wilking::TransverseSplit;

pub const CSV_HEADER: &str = "t,trace_s_h,k_lambda,margin,det_j,sigma_min,a_norm";

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub model: ModelSpec,
    pub submanifold: Option<SubmanifoldSpec>,
    pub family: Option<FamilySpec>,
    #[serde(default)]
    pub integration: FamilyConfig,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Constant,
    Product,
    Diagonal,
}

/// The `[model]` table. Which keys are required depends on `kind`:
/// `constant` needs `n`, `kappa`; `product` needs `a`, `kappa1`, `b`,
/// `kappa2` and optionally `alpha`; `diagonal` needs `eigenvalues`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub n: Option<usize>,
    pub kappa: Option<f64>,
    pub a: Option<usize>,
    pub kappa1: Option<f64>,
    pub b: Option<usize>,
    pub kappa2: Option<f64>,
    #[serde(default)]
    pub alpha: f64,
    pub eigenvalues: Option<Vec<EigenvalueSpec>>,
    pub domain: Option<[f64; 2]>,
}

/// `base + amplitude * sin(frequency * t + phase)`.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EigenvalueSpec {
    pub base: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SubmanifoldSpec {
    pub dim: usize,
    pub shape_op: Option<Vec<Vec<f64>>>,
    pub tangent_indices: Option<Vec<usize>>,
}

/// Explicit seed `(J(t0), J'(t0))`, rows of each matrix.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    #[serde(default)]
    pub t0: f64,
    pub j0: Vec<Vec<f64>>,
    pub dj0: Vec<Vec<f64>>,
}

/// Model solution for a comparison: `{ c1, c2 }`, `{ alpha }` for
/// `sin(t + alpha)`, or `{ pole_at }` for the solution vanishing there.
#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Coefficients { c1: f64, c2: f64 },
    Shift { alpha: f64 },
    Pole { pole_at: f64 },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSpec {
    /// Product angles swept by `focal-radius`.
    pub alphas: Option<Vec<f64>>,
    pub expected: Option<f64>,
    pub tolerance: f64,
    pub k: Option<usize>,
    pub kappa: Option<f64>,
    pub lambda: Option<LambdaSpec>,
    /// Rows are the vectors spanning `W` at the start of the interval.
    pub w: Option<Vec<Vec<f64>>>,
    pub interval: Option<[f64; 2]>,
    pub samples: Option<usize>,
    /// Rows are coefficient vectors of the subfamily `V`.
    pub v: Option<Vec<Vec<f64>>>,
    pub times: Option<Vec<f64>>,
    pub random_times: usize,
    pub fd_step: f64,
    pub tol: Option<f64>,
    pub seed: u64,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            alphas: None,
            expected: None,
            tolerance: 1e-6,
            k: None,
            kappa: None,
            lambda: None,
            w: None,
            interval: None,
            samples: None,
            v: None,
            times: None,
            random_times: 50,
            fd_step: 1e-4,
            tol: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: Option<String>,
    pub csv: bool,
}

/// A configuration problem, anchored to a line of the file when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Line (1-based) of `key = ...` inside `[section]`.
pub fn locate(src: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header_line = None;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            if current == section {
                header_line = Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    if key.is_empty() {
        header_line
    } else {
        header_line.or_else(|| locate(src, section, ""))
    }
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

impl Scenario {
    pub fn parse(src: &str) -> Result<Self, ConfigError> {
        let scenario: Scenario = toml::from_str(src).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of(src, s.start)),
            message: e.message().trim().to_string(),
        })?;
        scenario.validate(src)?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| ConfigError { line: None, message: format!("cannot read {}: {e}", path.display()) })?;
        Self::parse(&src)
    }

    fn validate(&self, src: &str) -> Result<(), ConfigError> {
        let err = |section: &str, key: &str, message: String| ConfigError { line: locate(src, section, key), message };
        let model = &self.model;
        let require = |key: &str, present: bool| {
            if present {
                Ok(())
            } else {
                Err(err("model", "kind", format!("kind = \"{}\" requires `{key}`", model.kind_name())))
            }
        };
        match model.kind {
            ModelKind::Constant => {
                require("n", model.n.is_some())?;
                require("kappa", model.kappa.is_some())?;
            }
            ModelKind::Product => {
                for (key, present) in [
                    ("a", model.a.is_some()),
                    ("kappa1", model.kappa1.is_some()),
                    ("b", model.b.is_some()),
                    ("kappa2", model.kappa2.is_some()),
                ] {
                    require(key, present)?;
                }
            }
            ModelKind::Diagonal => require("eigenvalues", model.eigenvalues.is_some())?,
        }
        let n = model.ambient_dim();
        if n < 2 {
            return Err(err("model", "n", format!("ambient dimension {n} is below 2")));
        }
        if model.kind == ModelKind::Product {
            let (a, b) = (model.a.unwrap_or(0), model.b.unwrap_or(0));
            if a < 1 || b < 1 || a + b < 3 {
                return Err(err("model", "a", format!("product factors a = {a}, b = {b} are degenerate")));
            }
            if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&model.alpha) {
                return Err(err("model", "alpha", format!("alpha = {} outside [0, pi/2]", model.alpha)));
            }
        }
        if let Some([lo, hi]) = self.model.domain() {
            if !(lo < hi) {
                return Err(err("model", "domain", format!("domain [{lo}, {hi}] is empty")));
            }
        }
        if let Err(e) = self.integration.validate() {
            return Err(err("integration", "", e.to_string()));
        }
        let normal = n - 1;
        if let Some(sub) = &self.submanifold {
            if sub.dim > normal {
                return Err(err("submanifold", "dim", format!("dim = {} exceeds n - 1 = {normal}", sub.dim)));
            }
            if let Some(s) = &sub.shape_op {
                let ok = s.len() == sub.dim && s.iter().all(|r| r.len() == sub.dim);
                if !ok {
                    return Err(err("submanifold", "shape_op", format!("shape_op must be {0} x {0}", sub.dim)));
                }
            }
            if let Some(ix) = &sub.tangent_indices {
                if ix.len() != sub.dim || ix.iter().any(|&i| i >= normal) {
                    return Err(err(
                        "submanifold",
                        "tangent_indices",
                        format!("tangent_indices must list {} distinct indices below {normal}", sub.dim),
                    ));
                }
            }
        }
        if let Some(f) = &self.family {
            for (key, m) in [("j0", &f.j0), ("dj0", &f.dj0)] {
                if m.len() != normal || m.iter().any(|r| r.len() != normal) {
                    return Err(err("family", key, format!("{key} must be {normal} x {normal}")));
                }
            }
        }
        let a = &self.analysis;
        if !(a.tolerance > 0.0) {
            return Err(err("analysis", "tolerance", "tolerance must be positive".into()));
        }
        if !(a.fd_step > 0.0) {
            return Err(err("analysis", "fd_step", "fd_step must be positive".into()));
        }
        if let Some(t) = a.tol {
            if !(t > 0.0) {
                return Err(err("analysis", "tol", "tol must be positive".into()));
            }
        }
        if let Some(k) = a.k {
            if k == 0 || k > normal {
                return Err(err("analysis", "k", format!("k = {k} outside 1..={normal}")));
            }
            if let Some(sub) = &self.submanifold {
                if self.family.is_none() && a.w.is_none() && k > sub.dim {
                    return Err(err("analysis", "k", format!("k = {k} exceeds the submanifold dimension {}", sub.dim)));
                }
            }
        }
        if let Some(kappa) = a.kappa {
            if ![-1.0, 0.0, 1.0].contains(&kappa) {
                return Err(err("analysis", "kappa", format!("kappa = {kappa}; rescale to -1, 0 or 1")));
            }
        }
        if let Some(w) = &a.w {
            if w.iter().any(|r| r.len() != normal) {
                return Err(err("analysis", "w", format!("every row of w needs {normal} entries")));
            }
            if let Some(k) = a.k {
                if w.len() != k {
                    return Err(err("analysis", "w", format!("w has {} rows, expected k = {k}", w.len())));
                }
            }
        }
        if let Some(v) = &a.v {
            if v.iter().any(|r| r.len() != normal) {
                return Err(err("analysis", "v", format!("every row of v needs {normal} entries")));
            }
        }
        if let Some([lo, hi]) = a.interval {
            if !(lo < hi) {
                return Err(err("analysis", "interval", format!("interval [{lo}, {hi}] is empty")));
            }
        }
        if let Some(al) = &a.alphas {
            if al.is_empty() || al.iter().any(|x| !(0.0..=std::f64::consts::FRAC_PI_2).contains(x)) {
                return Err(err("analysis", "alphas", "alphas must be a nonempty list inside [0, pi/2]".into()));
            }
        }
        Ok(())
    }

    pub fn family_config(&self) -> FamilyConfig {
        self.integration
    }
}

impl ModelSpec {
    fn kind_name(&self) -> &'static str {
        match self.kind {
            ModelKind::Constant => "constant",
            ModelKind::Product => "product",
            ModelKind::Diagonal => "diagonal",
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ModelKind::Constant => self.n.unwrap_or(0),
            ModelKind::Product => self.a.unwrap_or(0) + self.b.unwrap_or(0),
            ModelKind::Diagonal => self.eigenvalues.as_ref().map_or(0, |e| e.len() + 1),
        }
    }

    fn domain(&self) -> Option<[f64; 2]> {
        self.domain
    }

    /// Builds the model; `alpha` overrides the product direction.
    pub fn build(&self, alpha: Option<f64>) -> crate::Result<GeodesicModel> {
        let absent = |key: &str| GeomError::InvalidArgument(format!("model is missing `{key}`"));
        let model = match self.kind {
            ModelKind::Constant => constant_curvature_model(
                self.n.ok_or_else(|| absent("n"))?,
                self.kappa.ok_or_else(|| absent("kappa"))?,
            )?,
            ModelKind::Product => product_space_form_model(
                self.a.ok_or_else(|| absent("a"))?,
                self.kappa1.ok_or_else(|| absent("kappa1"))?,
                self.b.ok_or_else(|| absent("b"))?,
                self.kappa2.ok_or_else(|| absent("kappa2"))?,
                ProductDirection::new(alpha.unwrap_or(self.alpha))?,
            )?,
            ModelKind::Diagonal => {
                let eigenvalues = self.eigenvalues.as_ref().ok_or_else(|| absent("eigenvalues"))?;
                let fns: Vec<ScalarFn> = eigenvalues
                    .iter()
                    .map(|e| {
                        let e = *e;
                        Arc::new(move |t: f64| e.base + e.amplitude * (e.frequency * t + e.phase).sin()) as ScalarFn
                    })
                    .collect();
                custom_diagonal_model(eigenvalues.len() + 1, fns)?
            }
        };
        match self.domain() {
            Some([lo, hi]) => model.with_domain(lo, hi),
            None => Ok(model),
        }
    }
}

/// What a scenario run produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub summary: Vec<String>,
    pub report: serde_json::Value,
    pub csv: Option<String>,
}

/// Failures that are not check failures: bad input or numerical breakdown.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Geometry(GeomError),
    Io(std::io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(e) => write!(f, "{e}"),
            Self::Geometry(e) => write!(f, "{e}"),
            Self::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<GeomError> for RunError {
    fn from(e: GeomError) -> Self {
        Self::Geometry(e)
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

fn missing(what: &str) -> RunError {
    RunError::Config(ConfigError { line: None, message: format!("missing {what}") })
}

fn rows_matrix(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, RunError> {
    linalg::from_rows(rows)
        .ok_or_else(|| RunError::Config(ConfigError { line: None, message: format!("{what} has ragged rows") }))
}

fn submanifold_data(spec: &SubmanifoldSpec, normal: usize) -> Result<SubmanifoldData, RunError> {
    let shape = match &spec.shape_op {
        Some(rows) if spec.dim > 0 => rows_matrix(rows, "shape_op")?,
        _ => DMatrix::zeros(spec.dim, spec.dim),
    };
    let data = SubmanifoldData::new(spec.dim, shape);
    Ok(match &spec.tangent_indices {
        Some(ix) => data.with_tangent_indices(normal, ix)?,
        None => data,
    })
}

/// The Lagrangian family a scenario describes: the explicit `[family]` seed
/// when present, otherwise the family of the submanifold.
pub fn scenario_family(sc: &Scenario) -> Result<LagrangianFamily, RunError> {
    let model = sc.model.build(None)?;
    let cfg = sc.family_config();
    if let Some(f) = &sc.family {
        let j0 = rows_matrix(&f.j0, "j0")?;
        let dj0 = rows_matrix(&f.dj0, "dj0")?;
        return Ok(LagrangianFamily::new(model, f.t0, j0, dj0, cfg)?);
    }
    let sub = sc.submanifold.as_ref().ok_or_else(|| missing("[submanifold] or [family] section"))?;
    let data = submanifold_data(sub, model.normal_dim())?;
    Ok(submanifold_lagrangian(model, &data, cfg)?)
}

fn csv_line(out: &mut String, row: &[f64; 7]) {
    let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
    out.push_str(&cells.join(","));
    out.push('\n');
}

/// First focal times over the sampled normal directions and their minimum.
pub fn run_focal_radius(sc: &Scenario) -> Result<Outcome, RunError> {
    let sub_spec = sc.submanifold.as_ref().ok_or_else(|| missing("[submanifold] section"))?;
    let probe = sc.model.build(None)?;
    let data = submanifold_data(sub_spec, probe.normal_dim())?;
    let cfg = sc.family_config();
    let alphas: Vec<Option<f64>> = match (sc.model.kind, &sc.analysis.alphas) {
        (ModelKind::Product, Some(al)) => al.iter().copied().map(Some).collect(),
        _ => vec![None],
    };
    let times = focal_times(|a: &Option<f64>| sc.model.build(*a), &data, &alphas, cfg)?;
    let radius = times.iter().copied().fold(f64::INFINITY, f64::min);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let passed = match sc.analysis.expected {
        Some(e) => (radius - e).abs() <= sc.analysis.tolerance,
        None => true,
    };
    let mut summary = vec![format!("focal_radius = {radius:.9}")];
    if let Some(e) = sc.analysis.expected {
        summary.push(format!(
            "expected = {e:.9}  |diff| = {:.3e}  tolerance = {:.1e}",
            (radius - e).abs(),
            sc.analysis.tolerance
        ));
    }
    summary.push(format!("exceeds pi/2: {}", radius > half_pi + sc.analysis.tolerance));

    let csv = if sc.output.csv {
        let family = submanifold_lagrangian(sc.model.build(alphas[0])?, &data, cfg)?;
        let end = if radius.is_finite() { (radius + 0.5).min(family.domain().1) } else { family.domain().1 };
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        let n = 400;
        for i in 1..=n {
            let t = end * i as f64 / n as f64;
            let (j, _) = family.integrate(t)?;
            let k = family.evaluation_kernel(t)?;
            let smin = k.singular_values.last().copied().unwrap_or(0.0);
            let rel = if k.scale > 0.0 { smin / k.scale } else { 0.0 };
            csv_line(&mut out, &[t, f64::NAN, f64::NAN, f64::NAN, j.determinant(), rel, f64::NAN]);
        }
        Some(out)
    } else {
        None
    };
    let report = json!({
        "analysis": "focal-radius",
        "model": probe.label(),
        "directions": alphas,
        "first_focal_times": times.iter().map(|t| if t.is_finite() { json!(t) } else { json!(null) }).collect::<Vec<_>>(),
        "focal_radius": if radius.is_finite() { json!(radius) } else { json!(null) },
        "expected": sc.analysis.expected,
        "tolerance": sc.analysis.tolerance,
        "exceeds_half_pi": radius > half_pi + sc.analysis.tolerance,
        "passed": passed,
    });
    Ok(Outcome { passed, summary, report, csv })
}

fn model_solution(a: &AnalysisSpec, t0: f64) -> Result<ModelSolution, RunError> {
    let kappa = a.kappa.ok_or_else(|| missing("analysis.kappa"))?;
    let sol = match a.lambda {
        Some(LambdaSpec::Coefficients { c1, c2 }) => ModelSolution::new(kappa, c1, c2)?,
        Some(LambdaSpec::Shift { alpha }) => {
            if kappa != 1.0 {
                return Err(RunError::Config(ConfigError {
                    line: None,
                    message: "lambda = { alpha } needs kappa = 1".into(),
                }));
            }
            ModelSolution::shifted_cot(alpha)
        }
        Some(LambdaSpec::Pole { pole_at }) => ModelSolution::vanishing_at(kappa, pole_at)?,
        None => ModelSolution::vanishing_at(kappa, t0)?,
    };
    Ok(sol)
}

/// The trace comparison on `analysis.interval`.
pub fn run_compare(sc: &Scenario) -> Result<Outcome, RunError> {
    let family = scenario_family(sc)?;
    let a = &sc.analysis;
    let dim = family.dim();
    let k = a.k.ok_or_else(|| missing("analysis.k"))?;
    let [lo, hi] = a.interval.unwrap_or([family.t0(), family.t0() + std::f64::consts::FRAC_PI_2]);
    let w = match &a.w {
        Some(rows) => rows_matrix(rows, "w")?.transpose(),
        None => DMatrix::identity(dim, dim).columns(0, k).clone_owned(),
    };
    let sol = model_solution(a, lo)?;
    let mut ccfg = ComparisonConfig::default();
    if let Some(s) = a.samples {
        ccfg.samples = s;
    }
    if let Some(t) = a.tol {
        ccfg.violation_tol = t;
    }
    let report = intermediate_ricci_comparison(&family, &w, k, &sol, (lo, hi), &ccfg)?;
    let passed = report.passed();
    let mut summary = vec![
        format!("status = {:?}", report.status),
        format!("samples = {}  violations = {}", report.times.len(), report.violations.len()),
    ];
    if let Some(t1) = report.equality_time {
        summary.push(format!("equality through t = {t1:.9}"));
    }
    if let Some(r) = &report.rigidity {
        summary.push(format!(
            "rigidity: confirmed = {}  max |A| = {:.3e}  max fit residual = {:.3e}",
            r.confirmed, r.splitting.max_a_norm, r.max_fit_residual
        ));
    }
    let csv = if sc.output.csv {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in report.rows() {
            csv_line(&mut out, &row);
        }
        Some(out)
    } else {
        None
    };
    let mut value = serde_json::to_value(&report).map_err(|e| RunError::Io(std::io::Error::other(e)))?;
    value["analysis"] = json!("compare");
    value["passed"] = json!(passed);
    Ok(Outcome { passed, summary, report: value, csv })
}

/// Transverse-equation residuals, `S^` symmetry and the trace transfer
/// identity at fixed or seeded random times.
pub fn run_transverse_check(sc: &Scenario) -> Result<Outcome, RunError> {
    let family = scenario_family(sc)?;
    let a = &sc.analysis;
    let dim = family.dim();
    let v = match &a.v {
        Some(rows) if !rows.is_empty() => rows_matrix(rows, "v")?.transpose(),
        _ => DMatrix::zeros(dim, 0),
    };
    let split = TransverseSplit::new(&family, v)?;
    let tol = a.tol.unwrap_or(1e-5);
    let [lo, hi] = a.interval.unwrap_or([family.t0() + 0.1, family.t0() + 1.4]);
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let times: Vec<f64> = match &a.times {
        Some(t) => t.clone(),
        None => (0..a.random_times).map(|_| rng.random_range(lo..hi)).collect(),
    };

    let mut rows = Vec::new();
    let mut passed = true;
    let mut max_res = 0.0f64;
    let mut max_transfer = 0.0f64;
    let mut max_asym = 0.0f64;
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for &t in &times {
        let res = split.transverse_residual(t, a.fd_step)?;
        let (_, s_hat) = split.transverse_parts(t)?;
        let asym = if s_hat.is_empty() { 0.0 } else { linalg::asymmetry(&s_hat) };
        let w = split.transfer_subfamily(t)?;
        // Any basis of the same subfamily gives the same trace.
        let mix = DMatrix::from_fn(w.ncols(), w.ncols(), |i, j| if i == j { 2.0 } else { 0.25 });
        let transfer = split.eigenvalue_transfer_check(t, &(w * mix))?;
        let an = linalg::spectral_norm(&split.a_tensor(t)?);
        let (j, _) = family.integrate(t)?;
        let k = family.evaluation_kernel(t)?;
        let smin = k.singular_values.last().copied().unwrap_or(0.0);
        csv_line(&mut csv, &[t, transfer.trace_hat, f64::NAN, f64::NAN, j.determinant(), smin / k.scale, an]);
        let ok = res <= tol && transfer.difference <= 1e-8 && asym <= 1e-7;
        passed &= ok;
        max_res = max_res.max(res);
        max_transfer = max_transfer.max(transfer.difference);
        max_asym = max_asym.max(asym);
        rows.push(json!({
            "t": t,
            "residual": res,
            "s_hat_asymmetry": asym,
            "trace_s_hat": transfer.trace_hat,
            "trace_s_w": transfer.trace_w,
            "transfer_difference": transfer.difference,
            "a_norm": an,
            "passed": ok,
        }));
    }
    let summary = vec![
        format!("times = {}  max residual = {max_res:.3e} (tol {tol:.1e})", times.len()),
        format!("max transfer difference = {max_transfer:.3e}  max S^ asymmetry = {max_asym:.3e}"),
    ];
    let report = json!({
        "analysis": "transverse-check",
        "model": family.model().label(),
        "subfamily_dim": split.m(),
        "fd_step": a.fd_step,
        "tolerance": tol,
        "seed": a.seed,
        "samples": rows,
        "passed": passed,
    });
    Ok(Outcome { passed, summary, report, csv: sc.output.csv.then_some(csv) })
}

/// Writes `report.json` and, when present, `series.csv` into `dir`.
pub fn write_outputs(outcome: &Outcome, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(&outcome.report).map_err(std::io::Error::other)?;
    std::fs::write(dir.join("report.json"), text + "\n")?;
    if let Some(csv) = &outcome.csv {
        std::fs::write(dir.join("series.csv"), csv)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const S3_PT: &str = r#"
[model]
kind = "product"
a = 3
kappa1 = 2.0
b = 2
kappa2 = 4.0
alpha = 1.5707963267948966

[submanifold]
dim = 3

[analysis]
expected = 1.5707963267948966
"#;

    #[test]
    fn focal_radius_scenario() {
        let sc = Scenario::parse(S3_PT).unwrap();
        let out = run_focal_radius(&sc).unwrap();
        assert!(out.passed);
        assert!(out.summary[0].starts_with("focal_radius = 1.570796"));
    }

    #[test]
    fn k_above_dim_is_line_anchored() {
        let src = format!("{S3_PT}k = 4\n");
        let e = Scenario::parse(&src).unwrap_err();
        assert_eq!(e.line, Some(src.lines().count()));
        assert!(e.message.contains("k = 4"));
    }

    #[test]
    fn parse_errors_carry_lines() {
        let e = Scenario::parse("[model]\nkind = \"constant\"\nn = \"three\"\nkappa = 1.0\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = Scenario::parse("[model]\nkind = \"constant\"\nn = 3\nkappa = 1.0\nbogus = 1\n").unwrap_err();
        assert!(e.line.is_some());
    }

    #[test]
    fn locate_finds_keys_in_sections() {
        let src = "[a]\nk = 1\n[b]\nk = 2\n";
        assert_eq!(locate(src, "b", "k"), Some(4));
        assert_eq!(locate(src, "a", "k"), Some(2));
        assert_eq!(locate(src, "b", "missing"), Some(3));
    }
}
