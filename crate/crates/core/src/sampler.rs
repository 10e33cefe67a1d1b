//! Gibbs, Griddy Gibbs and Metropolized Griddy Gibbs chains.
//!
//! All three samplers use a systematic scan over the axes `0..d` and record
//! one sample per full sweep. Each coordinate update draws its inverse-CDF
//! uniform from `(sweep, axis, SLOT_DRAW)`, so chains that differ only in
//! how the conditional is built consume identical uniforms.

use serde::{Deserialize, Serialize};

use crate::conditional::{build_conditional, ClampSpec, Conditional1d, Grid1D, InterpScheme};
use crate::error::SamplerError;
use crate::rng::{UniformStream, SLOT_ACCEPT, SLOT_DRAW};
use crate::target::{CountingTarget, TargetDensity};

/// Chain length, burn-in, seed and starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Total number of sweeps, burn-in included.
    pub n_steps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub initial_point: Vec<f64>,
}

impl ChainConfig {
    /// Config with the default burn-in of 10% of `n_steps`.
    pub fn new(n_steps: usize, seed: u64, initial_point: Vec<f64>) -> Self {
        Self {
            n_steps,
            burn_in: default_burn_in(n_steps),
            seed,
            initial_point,
        }
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn validate(&self, target: &dyn TargetDensity) -> Result<(), SamplerError> {
        if self.n_steps == 0 {
            return Err(SamplerError::InvalidConfig("n_steps must be positive".into()));
        }
        if self.burn_in >= self.n_steps {
            return Err(SamplerError::InvalidConfig(format!(
                "burn_in {} must be below n_steps {}",
                self.burn_in, self.n_steps
            )));
        }
        if self.initial_point.len() != target.dim() {
            return Err(SamplerError::InvalidConfig(format!(
                "initial_point has dimension {}, target has {}",
                self.initial_point.len(),
                target.dim()
            )));
        }
        if !target.domain().contains(&self.initial_point) {
            return Err(SamplerError::InvalidConfig(format!(
                "initial_point {:?} lies outside the domain",
                self.initial_point
            )));
        }
        Ok(())
    }
}

pub fn default_burn_in(n_steps: usize) -> usize {
    n_steps / 10
}

/// Post-burn-in samples of a chain, stored row-major (one row per sweep).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    samples: Vec<f64>,
    dim: usize,
    /// Accepted fraction of all coordinate updates, burn-in included.
    pub acceptance_rate: f64,
    pub target_eval_count: u64,
    pub seed: u64,
}

impl ChainOutput {
    pub fn from_rows(samples: Vec<f64>, dim: usize, acceptance_rate: f64, target_eval_count: u64, seed: u64) -> Self {
        assert!(dim > 0 && samples.len() % dim == 0);
        Self {
            samples,
            dim,
            acceptance_rate,
            target_eval_count,
            seed,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.dim)
    }

    pub fn column(&self, axis: usize) -> Vec<f64> {
        self.rows().map(|r| r[axis]).collect()
    }

    /// Flat row-major sample buffer.
    pub fn as_flat(&self) -> &[f64] {
        &self.samples
    }
}

/// Sweep driver shared by the three samplers. `update` sets `x[axis]` and
/// returns whether the move was accepted.
fn run_chain<F>(dim: usize, cfg: &ChainConfig, mut update: F) -> Result<(Vec<f64>, f64), SamplerError>
where
    F: FnMut(&mut UniformStream, u64, usize, &mut [f64]) -> Result<bool, SamplerError>,
{
    let mut stream = UniformStream::new(cfg.seed);
    let mut x = cfg.initial_point.clone();
    let mut samples = Vec::with_capacity((cfg.n_steps - cfg.burn_in) * dim);
    let mut accepted = 0u64;
    for sweep in 0..cfg.n_steps {
        for axis in 0..dim {
            if update(&mut stream, sweep as u64, axis, &mut x)? {
                accepted += 1;
            }
        }
        if sweep >= cfg.burn_in {
            samples.extend_from_slice(&x);
        }
    }
    let rate = accepted as f64 / (cfg.n_steps * dim) as f64;
    Ok((samples, rate))
}

/// Gibbs sampler drawing each coordinate from the exact full conditional.
pub fn gibbs_chain(target: &dyn TargetDensity, cfg: &ChainConfig) -> Result<ChainOutput, SamplerError> {
    if !target.has_exact_conditionals() {
        return Err(SamplerError::Unsupported(target.label().to_string()));
    }
    cfg.validate(target)?;
    let (samples, _) = run_chain(target.dim(), cfg, |stream, sweep, axis, x| {
        let cond = target
            .exact_conditional(axis, x)?
            .ok_or_else(|| SamplerError::Unsupported(target.label().to_string()))?;
        x[axis] = cond.inverse_cdf(stream.uniform(sweep, axis, SLOT_DRAW));
        Ok(true)
    })?;
    Ok(ChainOutput::from_rows(samples, target.dim(), 1.0, 0, cfg.seed))
}

fn check_grids(target: &dyn TargetDensity, grids: &[Grid1D], scheme: InterpScheme) -> Result<(), SamplerError> {
    if grids.len() != target.dim() {
        return Err(SamplerError::InvalidConfig(format!(
            "{} grids for a {}-dimensional target",
            grids.len(),
            target.dim()
        )));
    }
    for g in grids {
        scheme.validate(g.len())?;
    }
    Ok(())
}

/// Griddy Gibbs: each coordinate update rebuilds the approximate conditional
/// from `grids[axis].len()` target evaluations and draws by inverse CDF.
pub fn griddy_chain(
    target: &dyn TargetDensity,
    grids: &[Grid1D],
    scheme: InterpScheme,
    clamp: ClampSpec,
    cfg: &ChainConfig,
) -> Result<ChainOutput, SamplerError> {
    check_grids(target, grids, scheme)?;
    cfg.validate(target)?;
    let counted = CountingTarget::new(target);
    let (samples, _) = run_chain(target.dim(), cfg, |stream, sweep, axis, x| {
        let q = build_conditional(&counted, axis, x, &grids[axis], scheme, clamp)?;
        x[axis] = q.sample_inverse_cdf(stream.uniform(sweep, axis, SLOT_DRAW));
        Ok(true)
    })?;
    Ok(ChainOutput::from_rows(
        samples,
        target.dim(),
        1.0,
        counted.count(),
        cfg.seed,
    ))
}

/// Griddy proposal corrected by a Metropolis–Hastings step, leaving the
/// exact target invariant.
///
/// The density at the current point is cached between updates, so each
/// coordinate update costs `n + 1` evaluations and the chain makes one
/// extra evaluation at the initial point.
pub fn metropolized_griddy_chain(
    target: &dyn TargetDensity,
    grids: &[Grid1D],
    scheme: InterpScheme,
    clamp: ClampSpec,
    cfg: &ChainConfig,
) -> Result<ChainOutput, SamplerError> {
    check_grids(target, grids, scheme)?;
    cfg.validate(target)?;
    let counted = CountingTarget::new(target);
    let mut pi_current = counted.density(&cfg.initial_point)?;
    let mut proposal = Vec::with_capacity(target.dim());
    let (samples, rate) = run_chain(target.dim(), cfg, |stream, sweep, axis, x| {
        let q = build_conditional(&counted, axis, x, &grids[axis], scheme, clamp)?;
        let t_new = q.sample_inverse_cdf(stream.uniform(sweep, axis, SLOT_DRAW));
        let q_current = q.pdf(x[axis]);
        if !(q_current > 0.0) {
            return Err(SamplerError::Invariant(format!(
                "proposal density {q_current} at current point {x:?}"
            )));
        }
        let q_new = q.pdf(t_new);
        proposal.clear();
        proposal.extend_from_slice(x);
        proposal[axis] = t_new;
        let pi_new = counted.density(&proposal)?;
        let ratio = if pi_current > 0.0 {
            (pi_new * q_current) / (pi_current * q_new)
        } else {
            f64::INFINITY
        };
        let u = stream.uniform(sweep, axis, SLOT_ACCEPT);
        if u < ratio.min(1.0) {
            x[axis] = t_new;
            pi_current = pi_new;
            Ok(true)
        } else {
            Ok(false)
        }
    })?;
    Ok(ChainOutput::from_rows(
        samples,
        target.dim(),
        rate,
        counted.count(),
        cfg.seed,
    ))
}

/// Ergodic average `(1/N) Σ φ(X_i)` over the recorded samples.
pub fn estimate_expectation<F>(out: &ChainOutput, phi: F) -> Result<f64, SamplerError>
where
    F: Fn(&[f64]) -> f64,
{
    if out.is_empty() {
        return Err(SamplerError::Empty);
    }
    Ok(out.rows().map(phi).sum::<f64>() / out.n_samples() as f64)
}
