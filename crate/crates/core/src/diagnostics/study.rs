//! ECDF error of Griddy Gibbs chains as a function of the knot count.

use serde::{Deserialize, Serialize};

use crate::conditional::{ClampSpec, Grid1D, InterpScheme};
use crate::error::DiagnosticsError;
use crate::norm::Norm;
use crate::sampler::{gibbs_chain, griddy_chain, ChainConfig, ChainOutput};
use crate::target::TargetDensity;

use super::{cdf_distance, cdf_distance_2d, loglog_slope, Ecdf, Ecdf2d};

/// Errors whose distance from the Gibbs floor counts as "pre-floor".
pub const FLOOR_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GridStudyOptions {
    pub ns: Vec<usize>,
    pub n_steps: usize,
    pub scheme: InterpScheme,
    pub clamp: ClampSpec,
    pub seed: u64,
    /// Axis whose marginal ECDF is scored.
    pub axis: usize,
    /// Independent chains per `n` (seeds `seed, seed+1, ..`); errors are averaged.
    pub replicates: usize,
    pub probe_count: usize,
    pub probes_2d: usize,
}

impl GridStudyOptions {
    pub fn new(ns: Vec<usize>, n_steps: usize, seed: u64) -> Self {
        Self {
            ns,
            n_steps,
            scheme: InterpScheme::PiecewiseLinear,
            clamp: ClampSpec::default(),
            seed,
            axis: 0,
            replicates: 1,
            probe_count: 1000,
            probes_2d: 256,
        }
    }
}

/// ECDF errors of one chain configuration. `n = 0` marks the exact Gibbs floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: usize,
    pub marginal_linf: f64,
    pub marginal_l2: f64,
    pub joint_linf: Option<f64>,
    pub joint_l2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridStudy {
    pub rows: Vec<StudyRow>,
    /// Exact-Gibbs errors at the same chain length, when available.
    pub floor: Option<StudyRow>,
    /// Number of leading rows used for the slope.
    pub pre_floor_len: usize,
    /// Log-log slope of marginal sup error against `n` over the pre-floor rows.
    pub slope: Option<f64>,
    /// Marginal sup error strictly decreases over the pre-floor rows.
    pub decreasing_pre_floor: bool,
}

fn score(
    target: &dyn TargetDensity,
    out: &ChainOutput,
    n: usize,
    opts: &GridStudyOptions,
) -> Result<StudyRow, DiagnosticsError> {
    let domain = target.domain();
    let axis = opts.axis;
    target
        .marginal_cdf(axis, domain.center()[axis])
        .ok_or(DiagnosticsError::NoReference)?;
    let support = (domain.lower()[axis], domain.upper()[axis]);
    let ecdf = Ecdf::new(&out.column(axis))?;
    let reference = |t: f64| target.marginal_cdf(axis, t).unwrap_or(f64::NAN);
    let marginal_linf = cdf_distance(&ecdf, reference, Norm::Inf, opts.probe_count, support)?;
    let marginal_l2 = cdf_distance(&ecdf, reference, Norm::L2, opts.probe_count, support)?;
    let (joint_linf, joint_l2) = if out.dim() == 2 && target.joint_cdf(&domain.center()).is_some() {
        let e2 = Ecdf2d::from_chain(out)?;
        let joint = |a: f64, b: f64| target.joint_cdf(&[a, b]).unwrap_or(f64::NAN);
        let boxes = [
            (domain.lower()[0], domain.upper()[0]),
            (domain.lower()[1], domain.upper()[1]),
        ];
        (
            Some(cdf_distance_2d(&e2, joint, Norm::Inf, opts.probes_2d, boxes)?),
            Some(cdf_distance_2d(&e2, joint, Norm::L2, opts.probes_2d, boxes)?),
        )
    } else {
        (None, None)
    };
    Ok(StudyRow {
        n,
        marginal_linf,
        marginal_l2,
        joint_linf,
        joint_l2,
    })
}

fn average(rows: &[StudyRow]) -> StudyRow {
    let k = rows.len() as f64;
    let mean = |f: &dyn Fn(&StudyRow) -> f64| rows.iter().map(f).sum::<f64>() / k;
    let mean_opt = |f: &dyn Fn(&StudyRow) -> Option<f64>| {
        rows.iter()
            .map(f)
            .collect::<Option<Vec<f64>>>()
            .map(|v| v.iter().sum::<f64>() / k)
    };
    StudyRow {
        n: rows[0].n,
        marginal_linf: mean(&|r| r.marginal_linf),
        marginal_l2: mean(&|r| r.marginal_l2),
        joint_linf: mean_opt(&|r| r.joint_linf),
        joint_l2: mean_opt(&|r| r.joint_l2),
    }
}

/// Leading rows whose error exceeds `FLOOR_FACTOR × floor`, extended to at
/// least two rows so a slope is always defined.
pub fn pre_floor_len(errors: &[f64], floor: Option<f64>) -> usize {
    let len = match floor {
        Some(f) => errors.iter().take_while(|&&e| e > FLOOR_FACTOR * f).count(),
        None => errors.len(),
    };
    len.max(2).min(errors.len())
}

/// Runs a Griddy Gibbs chain per knot count (equally spaced knots spanning
/// each axis) and scores the ECDFs against the closed-form CDFs. When the
/// target has exact conditionals, an exact Gibbs chain of the same length
/// estimates the Monte Carlo floor.
pub fn grid_convergence_study(
    target: &dyn TargetDensity,
    opts: &GridStudyOptions,
) -> Result<GridStudy, DiagnosticsError> {
    if opts.ns.is_empty() || opts.replicates == 0 {
        return Err(DiagnosticsError::InvalidArgument(
            "need at least one n and one replicate".into(),
        ));
    }
    if opts.axis >= target.dim() {
        return Err(DiagnosticsError::InvalidArgument(format!(
            "axis {} out of range",
            opts.axis
        )));
    }
    let domain = target.domain();
    let chain = |r: usize| ChainConfig::new(opts.n_steps, opts.seed.wrapping_add(r as u64), domain.center());

    let mut rows = Vec::with_capacity(opts.ns.len());
    for &n in &opts.ns {
        let grids = (0..target.dim())
            .map(|i| Grid1D::uniform(domain.lower()[i], domain.upper()[i], n))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| DiagnosticsError::Sampler(e.into()))?;
        let reps = (0..opts.replicates)
            .map(|r| {
                let out = griddy_chain(target, &grids, opts.scheme, opts.clamp, &chain(r))?;
                score(target, &out, n, opts)
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(average(&reps));
    }

    let floor = if target.has_exact_conditionals() {
        let reps = (0..opts.replicates)
            .map(|r| score(target, &gibbs_chain(target, &chain(r))?, 0, opts))
            .collect::<Result<Vec<_>, _>>()?;
        Some(average(&reps))
    } else {
        None
    };

    let errors: Vec<f64> = rows.iter().map(|r| r.marginal_linf).collect();
    let len = pre_floor_len(&errors, floor.as_ref().map(|f| f.marginal_linf));
    let (slope, decreasing) = if len >= 2 {
        let ns: Vec<f64> = opts.ns[..len].iter().map(|&n| n as f64).collect();
        (
            Some(loglog_slope(&ns, &errors[..len])),
            errors[..len].windows(2).all(|w| w[1] < w[0]),
        )
    } else {
        (None, true)
    };
    Ok(GridStudy {
        rows,
        floor,
        pre_floor_len: len,
        slope,
        decreasing_pre_floor: decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pre_floor_prefix() {
        assert_eq!(pre_floor_len(&[0.5, 0.2, 0.05, 0.01, 0.01], Some(0.01)), 3);
        assert_eq!(pre_floor_len(&[0.02, 0.01], Some(0.01)), 2);
        assert_eq!(pre_floor_len(&[0.5, 0.2, 0.1], None), 3);
        assert_eq!(pre_floor_len(&[0.5], None), 1);
    }
}
