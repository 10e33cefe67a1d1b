//! Invariant measures, Doeblin constants, TV decay and the spectral gap.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::KernelError;
use crate::norm::Norm;

use super::{tv_distance, KernelMatrix};

/// Singular values of `Pᵀ − I` below this count as fixed directions.
pub const FIXED_SPACE_TOL: f64 = 1e-8;

const POWER_TOL: f64 = 1e-13;
const POWER_MAX_ITERS: usize = 1_000_000;
/// Allowed L¹ gap between the LU and power-iteration vectors.
const AGREEMENT_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-10;

/// Fixed density `η` of a kernel, `Σ η·w = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantMeasure {
    pub density: Vec<f64>,
    pub cell_volume: f64,
    /// `‖Vη − η‖_∞`.
    pub residual: f64,
    pub power_iterations: usize,
}

impl InvariantMeasure {
    /// `‖η‖_p` with quadrature weight `w`.
    pub fn lp_norm(&self, p: Norm) -> f64 {
        p.weighted(self.density.iter().copied(), self.cell_volume)
    }

    /// `(p, ‖η‖_p)` for `p ∈ {1, 2, ∞}`.
    pub fn lp_norms(&self) -> Vec<(Norm, f64)> {
        [Norm::L1, Norm::L2, Norm::Inf]
            .into_iter()
            .map(|p| (p, self.lp_norm(p)))
            .collect()
    }
}

fn lu_fixed_vector(mass: &DMatrix<f64>) -> Result<DVector<f64>, KernelError> {
    let n = mass.nrows();
    let mut a = mass.transpose();
    for i in 0..n {
        a[(i, i)] -= 1.0;
    }
    // replace the last equation by the normalization Σ v = 1
    a.row_mut(n - 1).fill(1.0);
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    a.lu()
        .solve(&b)
        .ok_or_else(|| KernelError::Solve("singular system (kernel has more than one fixed vector)".into()))
}

fn power_fixed_vector(mass: &DMatrix<f64>) -> Result<(DVector<f64>, usize), KernelError> {
    let n = mass.nrows();
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    for it in 1..=POWER_MAX_ITERS {
        let mut next = mass.tr_mul(&v);
        let s = next.sum();
        next /= s;
        let delta: f64 = (&next - &v).abs().sum();
        v = next;
        if delta < POWER_TOL {
            return Ok((v, it));
        }
    }
    Err(KernelError::NonConvergent(POWER_MAX_ITERS))
}

/// Left fixed vector by dense LU on `(Pᵀ − I)` with the last row replaced
/// by the normalization, cross-checked by power iteration.
pub fn invariant_measure(k: &KernelMatrix) -> Result<InvariantMeasure, KernelError> {
    let mass = k.mass();
    let lu = lu_fixed_vector(mass)?;
    let (power, iterations) = power_fixed_vector(mass)?;
    let gap: f64 = (&lu - &power).abs().sum();
    if !(gap <= AGREEMENT_TOL) {
        return Err(KernelError::Solve(format!(
            "LU and power iteration disagree by {gap:e} in L1"
        )));
    }
    if let Some(min) = lu.iter().copied().reduce(f64::min) {
        if min < -1e-14 {
            return Err(KernelError::Solve(format!("fixed vector has a negative entry {min:e}")));
        }
    }
    let w = k.cell_volume();
    let density: Vec<f64> = lu.iter().map(|v| v.max(0.0) / w).collect();
    let image = k.action(&density);
    let residual = image
        .iter()
        .zip(&density)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if residual > RESIDUAL_TOL {
        return Err(KernelError::Solve(format!("fixed-vector residual {residual:e}")));
    }
    Ok(InvariantMeasure {
        density,
        cell_volume: w,
        residual,
        power_iterations: iterations,
    })
}

/// Smallest kernel density entry `c`, so `K(x, C) >= c·Vol(C)`.
pub fn doeblin_constant(k: &KernelMatrix) -> f64 {
    k.mass().iter().fold(f64::INFINITY, |a, &b| a.min(b)) / k.cell_volume()
}

/// `(1 − c·Vol)^(n−1)` for `n = 1..=n_max`.
pub fn doeblin_envelope(c: f64, volume: f64, n_max: usize) -> Vec<f64> {
    let rho = (1.0 - c * volume).clamp(0.0, 1.0);
    (1..=n_max).map(|n| rho.powi(n as i32 - 1)).collect()
}

/// `max_x TV(Kⁿ(x, ·), η)` for `n = 1..=n_max`. Identical rows are
/// propagated once.
pub fn tv_curve(k: &KernelMatrix, eta: &InvariantMeasure, n_max: usize) -> Vec<f64> {
    let mass = k.mass();
    let n = mass.nrows();
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut unique = Vec::new();
    for x in 0..n {
        let key: Vec<u64> = mass.row(x).iter().map(|v| v.to_bits()).collect();
        seen.entry(key).or_insert_with(|| {
            unique.push(x);
            unique.len() - 1
        });
    }
    let target: Vec<f64> = eta.density.iter().map(|d| d * eta.cell_volume).collect();
    let mut rows = DMatrix::from_fn(unique.len(), n, |r, c| mass[(unique[r], c)]);
    let mut curve = Vec::with_capacity(n_max);
    for step in 1..=n_max {
        if step > 1 {
            rows = &rows * mass;
        }
        let worst = rows
            .row_iter()
            .map(|r| tv_distance(r.transpose().as_slice(), &target, 1.0))
            .fold(0.0, f64::max);
        curve.push(worst);
    }
    curve
}

/// Number of singular values of `Pᵀ − I` below `tol`.
pub fn fixed_space_dimension(k: &KernelMatrix, tol: f64) -> usize {
    let n = k.n_states();
    let a = k.mass().transpose() - DMatrix::<f64>::identity(n, n);
    a.singular_values().iter().filter(|&&s| s < tol).count()
}

/// `min ‖(M − I)z‖₂ / ‖z‖₂` over `z ⊥ u`, where `M = Pᵀ` acts on densities
/// and `u` is the fixed density. A Householder reflection maps `u` to the
/// first basis vector; its remaining columns span the complement.
pub fn spectral_gap_alpha(k: &KernelMatrix, u: &InvariantMeasure) -> Result<f64, KernelError> {
    let n = k.n_states();
    if u.density.len() != n {
        return Err(KernelError::DimensionMismatch);
    }
    if n == 1 {
        return Err(KernelError::InvalidStates(
            "complement of the fixed vector is empty".into(),
        ));
    }
    let mut a = k.mass().transpose();
    for i in 0..n {
        a[(i, i)] -= 1.0;
    }
    let uv = DVector::from_column_slice(&u.density);
    let mut h = &uv / uv.norm();
    let sign = if h[0] >= 0.0 { 1.0 } else { -1.0 };
    h[0] += sign;
    let hh = h.dot(&h);
    // (M − I)(I − 2 h hᵀ / hᵀh)
    let ah = &a * &h;
    let reflected = a - (ah * h.transpose()) * (2.0 / hh);
    let complement = reflected.columns(1, n - 1).into_owned();
    let alpha = complement
        .singular_values()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if alpha < 1e-12 {
        return Err(KernelError::NearDegenerateGap(alpha));
    }
    Ok(alpha)
}
