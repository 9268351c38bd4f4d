//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use focal_core::geometry::radial_ric_k_min_over;
use focal_core::{
    constant_curvature_model, custom_diagonal_model, product_space_form_model, FamilyConfig, GeodesicModel,
    LagrangianFamily, ProductDirection, ScalarFn, SubmanifoldData,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DMatrix<f64> {
    let m = uniform_matrix(rng, d, d) * scale;
    (&m + m.transpose()) * 0.5
}

/// `n x d` with orthonormal columns.
pub fn random_orthonormal(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
    if d == 0 {
        return DMatrix::zeros(n, 0);
    }
    loop {
        let m = uniform_matrix(rng, n, d);
        let svd = m.clone().svd(false, false);
        if svd.singular_values.min() > 0.1 {
            return m.qr().q().columns(0, d).clone_owned();
        }
    }
}

/// Invertible with condition number below ~4.
pub fn well_conditioned(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    DMatrix::identity(d, d) + uniform_matrix(rng, d, d) * (0.3 / (d as f64).sqrt())
}

pub fn random_submanifold(rng: &mut ChaCha8Rng, normal_dim: usize, d: usize, shape_scale: f64) -> SubmanifoldData {
    SubmanifoldData::new(d, random_symmetric(rng, d, shape_scale))
        .with_tangent_basis(random_orthonormal(rng, normal_dim, d))
}

/// Random Lagrangian seed `(J0 C, J0' C)` built from a submanifold seed.
pub fn random_lagrangian_seed(rng: &mut ChaCha8Rng, normal_dim: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = rng.random_range(0..=normal_dim);
    let t = random_orthonormal(rng, normal_dim, normal_dim);
    let s = random_symmetric(rng, d, 1.0);
    let mut j0 = DMatrix::zeros(normal_dim, normal_dim);
    let mut dj0 = DMatrix::zeros(normal_dim, normal_dim);
    for c in 0..d {
        j0.set_column(c, &t.column(c));
        dj0.set_column(c, &(t.columns(0, d) * s.column(c)));
    }
    for c in d..normal_dim {
        dj0.set_column(c, &t.column(c));
    }
    let c = well_conditioned(rng, normal_dim);
    (j0 * &c, dj0 * c)
}

/// `cos_kappa` and `sin_kappa`: the solutions of `f'' + kappa f = 0` with
/// `(f, f') = (1, 0)` and `(0, 1)` at 0.
pub fn model_pair(kappa: f64, s: f64) -> (f64, f64) {
    if kappa > 0.0 {
        let r = kappa.sqrt();
        ((r * s).cos(), (r * s).sin() / r)
    } else if kappa < 0.0 {
        let r = (-kappa).sqrt();
        ((r * s).cosh(), (r * s).sinh() / r)
    } else {
        (1.0, s)
    }
}

/// `J(t)` for a constant symmetric curvature matrix, by diagonalising it.
pub fn constant_oracle(r: &DMatrix<f64>, t0: f64, j0: &DMatrix<f64>, dj0: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(r.clone());
    let q = &eig.eigenvectors;
    let n = r.nrows();
    let mut c = DVector::zeros(n);
    let mut s = DVector::zeros(n);
    for i in 0..n {
        let (ci, si) = model_pair(eig.eigenvalues[i], t - t0);
        c[i] = ci;
        s[i] = si;
    }
    q * (DMatrix::from_diagonal(&c) * (q.transpose() * j0) + DMatrix::from_diagonal(&s) * (q.transpose() * dj0))
}

#[derive(Debug, Clone)]
pub enum ModelRecipe {
    Constant { n: usize, kappa: f64 },
    Product { a: usize, k1: f64, b: usize, k2: f64, alpha: f64 },
    Diagonal { base: Vec<f64>, amp: Vec<f64>, freq: Vec<f64> },
}

impl ModelRecipe {
    pub fn build(&self) -> GeodesicModel {
        match self {
            Self::Constant { n, kappa } => constant_curvature_model(*n, *kappa).unwrap(),
            Self::Product { a, k1, b, k2, alpha } => {
                product_space_form_model(*a, *k1, *b, *k2, ProductDirection::new(*alpha).unwrap()).unwrap()
            }
            Self::Diagonal { base, amp, freq } => {
                let fns: Vec<ScalarFn> = base
                    .iter()
                    .zip(amp)
                    .zip(freq)
                    .map(|((&b, &a), &f)| Arc::new(move |t: f64| b + a * (f * t).sin()) as ScalarFn)
                    .collect();
                custom_diagonal_model(base.len() + 1, fns).unwrap()
            }
        }
    }

    pub fn normal_dim(&self) -> usize {
        match self {
            Self::Constant { n, .. } => n - 1,
            Self::Product { a, b, .. } => a + b - 1,
            Self::Diagonal { base, .. } => base.len(),
        }
    }

    fn scaled(&self, f: f64) -> Self {
        match self.clone() {
            Self::Constant { n, kappa } => Self::Constant { n, kappa: kappa * f },
            Self::Product { a, k1, b, k2, alpha } => Self::Product { a, k1: k1 * f, b, k2: k2 * f, alpha },
            Self::Diagonal { base, amp, freq } => Self::Diagonal {
                base: base.iter().map(|x| x * f).collect(),
                amp: amp.iter().map(|x| x * f).collect(),
                freq,
            },
        }
    }

    /// Rescaled so that `radial_ric_k_min >= k` on `[-pi/2, pi/2]`; `None`
    /// when the minimum is not positive.
    pub fn normalised_for(&self, k: usize) -> Option<Self> {
        let ric = radial_ric_k_min_over(&self.build(), -FRAC_PI_2, FRAC_PI_2, k, 2000).ok()?;
        if ric <= 1e-9 {
            return None;
        }
        // Small margin over the sampled minimum for the time-dependent case.
        let margin = if matches!(self, Self::Diagonal { .. }) { 1.0 + 1e-3 } else { 1.0 };
        Some(self.scaled(margin * k as f64 / ric))
    }
}

pub fn arb_constant(max_n: usize) -> impl Strategy<Value = ModelRecipe> {
    (2..=max_n, -1.5f64..2.5).prop_map(|(n, kappa)| ModelRecipe::Constant { n, kappa })
}

pub fn arb_product(max_dim: usize) -> impl Strategy<Value = ModelRecipe> {
    (1..max_dim, 1..max_dim, 0.2f64..3.0, 0.2f64..3.0, 0.0f64..=FRAC_PI_2)
        .prop_filter("factors too small", move |(a, b, ..)| a + b >= 3 && a + b <= max_dim + 1)
        .prop_map(|(a, b, k1, k2, alpha)| ModelRecipe::Product { a, k1, b, k2, alpha })
}

pub fn arb_diagonal(max_dim: usize) -> impl Strategy<Value = ModelRecipe> {
    (1..=max_dim)
        .prop_flat_map(|m| {
            (
                proptest::collection::vec(0.5f64..2.5, m),
                proptest::collection::vec(0.0f64..0.4, m),
                proptest::collection::vec(0.5f64..2.0, m),
            )
        })
        .prop_map(|(base, amp, freq)| ModelRecipe::Diagonal { base, amp, freq })
}

pub fn arb_model() -> impl Strategy<Value = ModelRecipe> {
    prop_oneof![arb_constant(6), arb_product(5), arb_diagonal(4)]
}

/// Lagrangian family from a seed, over a short domain to keep tests quick.
pub fn family_from(model: GeodesicModel, seed: u64, t0: f64) -> LagrangianFamily {
    let mut r = rng(seed);
    let (j0, dj0) = random_lagrangian_seed(&mut r, model.normal_dim());
    LagrangianFamily::new(model, t0, j0, dj0, FamilyConfig::default()).unwrap()
}
