//! Finite-state discretizations of the Gibbs, Griddy and Metropolized
//! Griddy transition kernels.
//!
//! Each axis is split into equal cells and every kernel is evaluated at the
//! cell centers. A kernel is the systematic-scan composition of one factor
//! per axis; factor `i` is an `m_i × m_i` transition table for every context
//! (the cell indices of the other coordinates). The composed kernel density
//! `K[x][y]` satisfies `Σ_y K[x][y]·w = 1` with `w` the cell volume.

mod measure;
mod report;

#[cfg(test)]
mod tests;

use nalgebra::DMatrix;

use crate::conditional::{build_conditional, ClampSpec, Grid1D, InterpScheme};
use crate::error::KernelError;
use crate::norm::Norm;
use crate::target::{BoxDomain, TargetDensity};

pub use measure::{
    doeblin_constant, doeblin_envelope, fixed_space_dimension, invariant_measure, spectral_gap_alpha, tv_curve,
    InvariantMeasure, FIXED_SPACE_TOL,
};
pub use report::{
    perturbation_report, regularity_check, regularity_check_with, truncation_bound_report, PerturbationAnalysis,
    PerturbationReport, RegularityPart, RegularityReport, TruncationBoundReport,
};

/// Largest state count accepted by [`StateGrid::new`].
pub const MAX_STATES: usize = 20_000;

/// Row sums of composed kernels must be within this of 1 before the final
/// renormalization.
const STOCHASTIC_TOL: f64 = 1e-10;

/// Equal cells on a box; states are indexed row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrid {
    domain: BoxDomain,
    counts: Vec<usize>,
    strides: Vec<usize>,
    centers: Vec<Vec<f64>>,
}

impl StateGrid {
    pub fn new(domain: BoxDomain, counts: Vec<usize>) -> Result<Self, KernelError> {
        if counts.len() != domain.dim() {
            return Err(KernelError::InvalidStates(format!(
                "{} cell counts for a {}-dimensional domain",
                counts.len(),
                domain.dim()
            )));
        }
        if counts.iter().any(|&m| m == 0) {
            return Err(KernelError::InvalidStates("cell counts must be positive".into()));
        }
        let total = counts
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m))
            .unwrap_or(usize::MAX);
        if total > MAX_STATES {
            return Err(KernelError::TooManyStates(total));
        }
        let d = counts.len();
        let mut strides = vec![1usize; d];
        for i in (0..d.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * counts[i + 1];
        }
        let centers = (0..d)
            .map(|i| {
                let h = domain.width(i) / counts[i] as f64;
                (0..counts[i])
                    .map(|j| domain.lower()[i] + (j as f64 + 0.5) * h)
                    .collect()
            })
            .collect();
        Ok(Self {
            domain,
            counts,
            strides,
            centers,
        })
    }

    /// `m` cells on every axis of `domain`.
    pub fn uniform(domain: BoxDomain, m: usize) -> Result<Self, KernelError> {
        let d = domain.dim();
        Self::new(domain, vec![m; d])
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n_states(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        self.domain.width(axis) / self.counts[axis] as f64
    }

    /// Cell volume `w`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.cell_width(i)).product()
    }

    pub fn centers(&self, axis: usize) -> &[f64] {
        &self.centers[axis]
    }

    /// Cell index of `state` along `axis`.
    pub fn coord(&self, state: usize, axis: usize) -> usize {
        (state / self.strides[axis]) % self.counts[axis]
    }

    /// Cell center of `state`.
    pub fn point(&self, state: usize) -> Vec<f64> {
        (0..self.dim()).map(|i| self.centers[i][self.coord(state, i)]).collect()
    }

    /// Context of `state` for `axis`: the flattened indices of the other
    /// coordinates.
    #[cfg(test)]
    fn context(&self, state: usize, axis: usize) -> usize {
        let block = self.strides[axis] * self.counts[axis];
        (state / block) * self.strides[axis] + state % self.strides[axis]
    }

    /// Context formed from `y`'s coordinates before `axis` and `x`'s after.
    fn mixed_context(&self, x: usize, y: usize, axis: usize) -> usize {
        let block = self.strides[axis] * self.counts[axis];
        (y / block) * self.strides[axis] + x % self.strides[axis]
    }

    fn n_contexts(&self, axis: usize) -> usize {
        self.n_states() / self.counts[axis]
    }

    /// A representative state with the given context and `axis` coordinate 0.
    fn context_state(&self, ctx: usize, axis: usize) -> usize {
        let block = self.strides[axis] * self.counts[axis];
        (ctx / self.strides[axis]) * block + ctx % self.strides[axis]
    }
}

/// Per-axis summary of the factor tables.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FactorStats {
    /// Smallest factor entry as a density (mass over cell width).
    pub min_density: f64,
    /// Lower bound implied by the clamp, `min_ctx (ε/Z) / Σ_j q(c_j)·h`.
    pub clamp_floor: Option<f64>,
}

/// Row-stochastic kernel on a [`StateGrid`], stored as the mass matrix
/// `P = K·w` (rows sum to one).
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    states: StateGrid,
    mass: DMatrix<f64>,
    factor_stats: Vec<FactorStats>,
}

fn check_rows(mass: &DMatrix<f64>) -> Result<(), KernelError> {
    for (row, r) in mass.row_iter().enumerate() {
        if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(KernelError::InvalidStates(format!(
                "row {row} has a negative or non-finite entry"
            )));
        }
        let sum = r.sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(KernelError::NotStochastic { row, sum });
        }
    }
    Ok(())
}

fn renormalize_rows(mass: &mut DMatrix<f64>) {
    for mut r in mass.row_iter_mut() {
        let s = r.sum();
        r /= s;
    }
}

impl KernelMatrix {
    /// Kernel from a transition mass matrix whose rows sum to one.
    pub fn from_masses(states: StateGrid, mass: DMatrix<f64>) -> Result<Self, KernelError> {
        let n = states.n_states();
        if mass.nrows() != n || mass.ncols() != n {
            return Err(KernelError::DimensionMismatch);
        }
        check_rows(&mass)?;
        let mut mass = mass;
        renormalize_rows(&mut mass);
        Ok(Self {
            states,
            mass,
            factor_stats: Vec::new(),
        })
    }

    /// Kernel from transition densities, `Σ_y K[x][y]·w = 1`.
    pub fn from_density(states: StateGrid, density: DMatrix<f64>) -> Result<Self, KernelError> {
        let w = states.cell_volume();
        Self::from_masses(states, density * w)
    }

    pub fn states(&self) -> &StateGrid {
        &self.states
    }

    pub fn n_states(&self) -> usize {
        self.mass.nrows()
    }

    pub fn cell_volume(&self) -> f64 {
        self.states.cell_volume()
    }

    /// Row-stochastic mass matrix `P = K·w`.
    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    /// Transition density matrix `K`.
    pub fn density(&self) -> DMatrix<f64> {
        &self.mass / self.cell_volume()
    }

    pub fn density_at(&self, x: usize, y: usize) -> f64 {
        self.mass[(x, y)] / self.cell_volume()
    }

    pub fn factor_stats(&self) -> &[FactorStats] {
        &self.factor_stats
    }

    /// `(Vg)(y) = Σ_x g(x) K(x, y) w`, the action on densities.
    pub fn action(&self, g: &[f64]) -> Vec<f64> {
        assert_eq!(g.len(), self.n_states());
        let v = nalgebra::DVector::from_column_slice(g);
        self.mass.tr_mul(&v).as_slice().to_vec()
    }

    /// `‖K‖_p` on `D×D` with quadrature weight `w²`.
    pub fn lp_norm(&self, p: Norm) -> f64 {
        let w = self.cell_volume();
        p.weighted(self.mass.iter().map(|m| m / w), w * w)
    }

    /// `‖K − L‖_p` on `D×D` with quadrature weight `w²`.
    pub fn lp_distance(&self, other: &KernelMatrix, p: Norm) -> Result<f64, KernelError> {
        if self.states != other.states {
            return Err(KernelError::DimensionMismatch);
        }
        let w = self.cell_volume();
        Ok(p.weighted(self.mass.iter().zip(other.mass.iter()).map(|(a, b)| (a - b) / w), w * w))
    }
}

/// Transition tables of one axis: `tables[ctx][a * m + b]` is the mass of
/// moving the axis coordinate from cell `a` to cell `b`.
struct Factor {
    m: usize,
    tables: Vec<Vec<f64>>,
    clamp_floor: Option<f64>,
}

impl Factor {
    fn stats(&self, width: f64) -> FactorStats {
        let min = self.tables.iter().flatten().fold(f64::INFINITY, |a, &b| a.min(b));
        FactorStats {
            min_density: min / width,
            clamp_floor: self.clamp_floor,
        }
    }
}

/// Composes per-axis factors in scan order into a kernel.
fn compose(states: StateGrid, factors: Vec<Factor>) -> Result<KernelMatrix, KernelError> {
    let n = states.n_states();
    let d = states.dim();
    let mut mass = DMatrix::<f64>::zeros(n, n);
    let coords: Vec<Vec<usize>> = (0..n).map(|s| (0..d).map(|i| states.coord(s, i)).collect()).collect();
    for x in 0..n {
        for y in 0..n {
            let mut v = 1.0;
            for (i, f) in factors.iter().enumerate() {
                let ctx = states.mixed_context(x, y, i);
                v *= f.tables[ctx][coords[x][i] * f.m + coords[y][i]];
                if v == 0.0 {
                    break;
                }
            }
            mass[(x, y)] = v;
        }
    }
    check_rows(&mass)?;
    renormalize_rows(&mut mass);
    let factor_stats = factors
        .iter()
        .enumerate()
        .map(|(i, f)| f.stats(states.cell_width(i)))
        .collect();
    Ok(KernelMatrix {
        states,
        mass,
        factor_stats,
    })
}

/// Dense product `A_1 ⋯ A_d` of the per-axis update matrices; the
/// independent route used to cross-check [`compose`].
#[cfg(test)]
fn compose_dense(states: &StateGrid, factors: &[Factor]) -> DMatrix<f64> {
    let n = states.n_states();
    let d = states.dim();
    let mut acc = DMatrix::<f64>::identity(n, n);
    for (i, f) in factors.iter().enumerate() {
        let a = DMatrix::from_fn(n, n, |x, z| {
            let same_rest = (0..d)
                .filter(|&k| k != i)
                .all(|k| states.coord(x, k) == states.coord(z, k));
            if same_rest {
                f.tables[states.context(x, i)][states.coord(x, i) * f.m + states.coord(z, i)]
            } else {
                0.0
            }
        });
        acc *= a;
    }
    acc
}

/// Target values along `axis` at the cell centers, other coordinates at
/// the context's cell centers.
fn slice_values(
    target: &dyn TargetDensity,
    states: &StateGrid,
    axis: usize,
    ctx: usize,
) -> Result<(Vec<f64>, Vec<f64>), KernelError> {
    let mut x = states.point(states.context_state(ctx, axis));
    let values = states
        .centers(axis)
        .iter()
        .map(|&c| {
            x[axis] = c;
            target.density(&x)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((x, values))
}

fn rank_one(row: &[f64]) -> Vec<f64> {
    let m = row.len();
    let mut t = Vec::with_capacity(m * m);
    for _ in 0..m {
        t.extend_from_slice(row);
    }
    t
}

fn normalized(values: &[f64], ctx: usize) -> Result<Vec<f64>, KernelError> {
    let s: f64 = values.iter().sum();
    if !(s > 0.0) {
        return Err(KernelError::DegenerateSlice(ctx));
    }
    Ok(values.iter().map(|v| v / s).collect())
}

fn check_target(target: &dyn TargetDensity, states: &StateGrid) -> Result<(), KernelError> {
    if target.domain() != states.domain() {
        return Err(KernelError::InvalidStates(
            "state grid domain differs from the target's".into(),
        ));
    }
    Ok(())
}

fn gibbs_factors(target: &dyn TargetDensity, states: &StateGrid) -> Result<Vec<Factor>, KernelError> {
    (0..states.dim())
        .map(|axis| {
            let tables = (0..states.n_contexts(axis))
                .map(|ctx| {
                    let (_, values) = slice_values(target, states, axis, ctx)?;
                    Ok(rank_one(&normalized(&values, ctx)?))
                })
                .collect::<Result<Vec<_>, KernelError>>()?;
            Ok(Factor {
                m: states.counts()[axis],
                tables,
                clamp_floor: None,
            })
        })
        .collect()
}

/// Griddy proposal rows and their clamp floors, one per context.
fn griddy_rows(
    target: &dyn TargetDensity,
    states: &StateGrid,
    axis: usize,
    grid: &Grid1D,
    scheme: InterpScheme,
    clamp: ClampSpec,
) -> Result<(Vec<Vec<f64>>, Option<f64>), KernelError> {
    let h = states.cell_width(axis);
    let mut floor: Option<f64> = None;
    let mut rows = Vec::with_capacity(states.n_contexts(axis));
    for ctx in 0..states.n_contexts(axis) {
        let x = states.point(states.context_state(ctx, axis));
        let q = build_conditional(target, axis, &x, grid, scheme, clamp)?;
        let values = states
            .centers(axis)
            .iter()
            .map(|&c| q.eval_density(c))
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(b) = q.clamp() {
            let s: f64 = values.iter().sum::<f64>() * h;
            let f = b.epsilon() / q.normalizer() / s;
            floor = Some(floor.map_or(f, |g| g.min(f)));
        }
        rows.push(normalized(&values, ctx)?);
    }
    Ok((rows, floor))
}

fn check_grids(states: &StateGrid, grids: &[Grid1D]) -> Result<(), KernelError> {
    if grids.len() != states.dim() {
        return Err(KernelError::InvalidStates(format!(
            "{} knot grids for {} axes",
            grids.len(),
            states.dim()
        )));
    }
    Ok(())
}

/// Discretized Gibbs kernel `P = P_1 ⋯ P_d`: factor `i` is the target slice
/// at the cell centers, normalized over the axis cells.
pub fn discretize_gibbs_kernel(target: &dyn TargetDensity, states: &StateGrid) -> Result<KernelMatrix, KernelError> {
    check_target(target, states)?;
    let factors = gibbs_factors(target, states)?;
    compose(states.clone(), factors)
}

fn griddy_factors(
    target: &dyn TargetDensity,
    states: &StateGrid,
    grids: &[Grid1D],
    scheme: InterpScheme,
    clamp: ClampSpec,
) -> Result<Vec<Factor>, KernelError> {
    check_grids(states, grids)?;
    (0..states.dim())
        .map(|axis| {
            let (rows, clamp_floor) = griddy_rows(target, states, axis, &grids[axis], scheme, clamp)?;
            Ok(Factor {
                m: states.counts()[axis],
                tables: rows.iter().map(|r| rank_one(r)).collect(),
                clamp_floor,
            })
        })
        .collect()
}

fn metropolized_factors(
    target: &dyn TargetDensity,
    states: &StateGrid,
    grids: &[Grid1D],
    scheme: InterpScheme,
    clamp: ClampSpec,
) -> Result<Vec<Factor>, KernelError> {
    check_grids(states, grids)?;
    (0..states.dim())
        .map(|axis| {
            let m = states.counts()[axis];
            let (rows, clamp_floor) = griddy_rows(target, states, axis, &grids[axis], scheme, clamp)?;
            let tables = rows
                .iter()
                .enumerate()
                .map(|(ctx, g)| {
                    let (_, pi) = slice_values(target, states, axis, ctx)?;
                    Ok(metropolis_table(&pi, g))
                })
                .collect::<Result<Vec<_>, KernelError>>()?;
            Ok(Factor { m, tables, clamp_floor })
        })
        .collect()
}

/// MH table proposing from `g` with target `pi`; rejected mass stays on
/// the diagonal.
fn metropolis_table(pi: &[f64], g: &[f64]) -> Vec<f64> {
    let m = pi.len();
    let mut t = vec![0.0; m * m];
    for a in 0..m {
        let mut stay = 1.0;
        for b in (0..m).filter(|&b| b != a) {
            let accept = if pi[a] > 0.0 {
                ((pi[b] * g[a]) / (pi[a] * g[b])).min(1.0)
            } else {
                1.0
            };
            t[a * m + b] = g[b] * accept;
            stay -= t[a * m + b];
        }
        t[a * m + a] = stay.max(0.0);
    }
    t
}

/// Discretized Griddy kernel `Q = Q_1 ⋯ Q_d`: factor `i` is the clamped,
/// normalized approximate conditional (knots `grids[i]`) at the cell
/// centers, renormalized over the axis cells.
pub fn discretize_griddy_kernel(
    target: &dyn TargetDensity,
    states: &StateGrid,
    grids: &[Grid1D],
    scheme: InterpScheme,
    clamp: ClampSpec,
) -> Result<KernelMatrix, KernelError> {
    check_target(target, states)?;
    compose(states.clone(), griddy_factors(target, states, grids, scheme, clamp)?)
}

/// Discretized Metropolized Griddy kernel. Factor `i` proposes from the
/// Griddy row `g` and accepts `a → b` with probability
/// `min(1, π_b g_a / (π_a g_b))`. Each factor is reversible with respect
/// to the target slice at the cell centers, so the discretized target is
/// exactly invariant.
pub fn discretize_metropolized_kernel(
    target: &dyn TargetDensity,
    states: &StateGrid,
    grids: &[Grid1D],
    scheme: InterpScheme,
    clamp: ClampSpec,
) -> Result<KernelMatrix, KernelError> {
    check_target(target, states)?;
    compose(
        states.clone(),
        metropolized_factors(target, states, grids, scheme, clamp)?,
    )
}

/// Target values at the cell centers, normalized to `Σ v·w = 1`.
pub fn discretized_target(target: &dyn TargetDensity, states: &StateGrid) -> Result<Vec<f64>, KernelError> {
    check_target(target, states)?;
    let values = (0..states.n_states())
        .map(|s| target.density(&states.point(s)))
        .collect::<Result<Vec<_>, _>>()?;
    let mass: f64 = values.iter().sum::<f64>() * states.cell_volume();
    if !(mass > 0.0) {
        return Err(KernelError::DegenerateSlice(0));
    }
    Ok(values.iter().map(|v| v / mass).collect())
}

/// Total-variation distance `½ Σ |a − b|·w` between two densities.
pub fn tv_distance(a: &[f64], b: &[f64], w: f64) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * w
}
