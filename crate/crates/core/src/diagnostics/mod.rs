//! Empirical CDFs, CDF distances, autocorrelation and the grid study.

mod study;
mod svg;

pub use study::{grid_convergence_study, GridStudy, GridStudyOptions, StudyRow};
pub use svg::{LogLogPlot, Panel, Series};

use crate::error::DiagnosticsError;
use crate::norm::Norm;
use crate::sampler::ChainOutput;

/// Right-continuous empirical CDF of a 1D sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(samples: &[f64]) -> Result<Self, DiagnosticsError> {
        if samples.is_empty() {
            return Err(DiagnosticsError::Empty);
        }
        if samples.iter().any(|s| s.is_nan()) {
            return Err(DiagnosticsError::InvalidArgument("NaN sample".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    pub fn n_samples(&self) -> usize {
        self.sorted.len()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of samples `<= t`.
    pub fn eval(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= t) as f64 / self.sorted.len() as f64
    }

    /// Fraction of samples `< t` (the left limit at `t`).
    pub fn eval_left(&self, t: f64) -> f64 {
        self.sorted.partition_point(|&s| s < t) as f64 / self.sorted.len() as f64
    }
}

/// Empirical joint CDF `F̂(a, b)` of a 2D sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf2d {
    points: Vec<[f64; 2]>,
}

impl Ecdf2d {
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self, DiagnosticsError> {
        if xs.len() != ys.len() {
            return Err(DiagnosticsError::InvalidArgument("column lengths differ".into()));
        }
        if xs.is_empty() {
            return Err(DiagnosticsError::Empty);
        }
        Ok(Self {
            points: xs.iter().zip(ys).map(|(&x, &y)| [x, y]).collect(),
        })
    }

    pub fn from_chain(out: &ChainOutput) -> Result<Self, DiagnosticsError> {
        if out.dim() != 2 {
            return Err(DiagnosticsError::InvalidArgument(format!(
                "joint ECDF needs 2 columns, chain has {}",
                out.dim()
            )));
        }
        Self::new(&out.column(0), &out.column(1))
    }

    pub fn n_samples(&self) -> usize {
        self.points.len()
    }

    /// Fraction of samples with `x <= a` and `y <= b`.
    pub fn eval(&self, a: f64, b: f64) -> f64 {
        let hits = self.points.iter().filter(|p| p[0] <= a && p[1] <= b).count();
        hits as f64 / self.points.len() as f64
    }

    /// `F̂` on the tensor grid `xs × ys` (both sorted ascending), row-major
    /// with `ys` fastest. Costs `O(N log m + m²)`.
    pub fn eval_grid(&self, xs: &[f64], ys: &[f64]) -> Vec<f64> {
        let (mx, my) = (xs.len(), ys.len());
        let mut counts = vec![0u64; mx * my];
        for p in &self.points {
            let i = xs.partition_point(|&a| a < p[0]);
            let j = ys.partition_point(|&b| b < p[1]);
            if i < mx && j < my {
                counts[i * my + j] += 1;
            }
        }
        for i in 0..mx {
            for j in 1..my {
                counts[i * my + j] += counts[i * my + j - 1];
            }
        }
        for i in 1..mx {
            for j in 0..my {
                counts[i * my + j] += counts[(i - 1) * my + j];
            }
        }
        let n = self.points.len() as f64;
        counts.into_iter().map(|c| c as f64 / n).collect()
    }
}

fn check_probes(probe_count: usize, support: (f64, f64)) -> Result<(), DiagnosticsError> {
    if probe_count < 100 {
        return Err(DiagnosticsError::InvalidArgument(format!(
            "probe_count {probe_count} below 100"
        )));
    }
    if !(support.0 < support.1) {
        return Err(DiagnosticsError::InvalidArgument(format!("empty support {support:?}")));
    }
    Ok(())
}

fn probes(support: (f64, f64), count: usize) -> impl Iterator<Item = f64> {
    let h = (support.1 - support.0) / (count - 1) as f64;
    (0..count).map(move |k| {
        if k + 1 == count {
            support.1
        } else {
            support.0 + k as f64 * h
        }
    })
}

fn trapezoid_l2(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    let sum: f64 = values
        .iter()
        .enumerate()
        .map(|(k, v)| if k == 0 || k + 1 == n { 0.5 * v * v } else { v * v })
        .sum();
    (sum * h).sqrt()
}

fn supported_norm(p: Norm) -> Result<(), DiagnosticsError> {
    match p {
        Norm::Inf => Ok(()),
        Norm::P(v) if v == 2.0 => Ok(()),
        other => Err(DiagnosticsError::InvalidArgument(format!(
            "CDF distances support p = 2 or inf, got {other}"
        ))),
    }
}

/// Distance between an ECDF and a reference CDF on `support`.
///
/// The sup norm checks every sample point from both sides plus the probe
/// grid; the left side compares `F̂(s-)` with `F(s.next_down())`. The L²
/// norm is the composite trapezoid rule on `probe_count` equally spaced
/// probes.
pub fn cdf_distance<F>(
    ecdf: &Ecdf,
    reference: F,
    p: Norm,
    probe_count: usize,
    support: (f64, f64),
) -> Result<f64, DiagnosticsError>
where
    F: Fn(f64) -> f64,
{
    supported_norm(p)?;
    check_probes(probe_count, support)?;
    match p {
        Norm::Inf => {
            let mut sup = 0.0f64;
            let n = ecdf.n_samples() as f64;
            for (k, &s) in ecdf.sorted.iter().enumerate() {
                // ties: only the last copy carries the full jump
                if ecdf.sorted.get(k + 1) == Some(&s) {
                    continue;
                }
                let right = (k + 1) as f64 / n;
                sup = sup.max((right - reference(s)).abs());
                sup = sup.max((ecdf.eval_left(s) - reference(s.next_down())).abs());
            }
            for t in probes(support, probe_count) {
                sup = sup.max((ecdf.eval(t) - reference(t)).abs());
            }
            Ok(sup)
        }
        _ => {
            let diffs: Vec<f64> = probes(support, probe_count)
                .map(|t| ecdf.eval(t) - reference(t))
                .collect();
            Ok(trapezoid_l2(&diffs, (support.1 - support.0) / (probe_count - 1) as f64))
        }
    }
}

/// Distance between two ECDFs; the sup norm is exact over the jumps of both.
pub fn ecdf_distance(
    a: &Ecdf,
    b: &Ecdf,
    p: Norm,
    probe_count: usize,
    support: (f64, f64),
) -> Result<f64, DiagnosticsError> {
    supported_norm(p)?;
    check_probes(probe_count, support)?;
    match p {
        Norm::Inf => {
            let sup = a
                .sorted
                .iter()
                .chain(&b.sorted)
                .flat_map(|&s| [(a.eval(s) - b.eval(s)).abs(), (a.eval_left(s) - b.eval_left(s)).abs()])
                .fold(0.0, f64::max);
            Ok(sup)
        }
        _ => cdf_distance(a, |t| b.eval(t), p, probe_count, support),
    }
}

/// Distance between a joint ECDF and a reference joint CDF over the box
/// `support`, evaluated on a `probes_per_axis²` tensor grid.
pub fn cdf_distance_2d<F>(
    ecdf: &Ecdf2d,
    reference: F,
    p: Norm,
    probes_per_axis: usize,
    support: [(f64, f64); 2],
) -> Result<f64, DiagnosticsError>
where
    F: Fn(f64, f64) -> f64,
{
    supported_norm(p)?;
    if probes_per_axis < 2 {
        return Err(DiagnosticsError::InvalidArgument(
            "need at least 2 probes per axis".into(),
        ));
    }
    let xs: Vec<f64> = probes(support[0], probes_per_axis).collect();
    let ys: Vec<f64> = probes(support[1], probes_per_axis).collect();
    let emp = ecdf.eval_grid(&xs, &ys);
    let m = probes_per_axis;
    match p {
        Norm::Inf => {
            let mut sup = 0.0f64;
            for (i, &x) in xs.iter().enumerate() {
                for (j, &y) in ys.iter().enumerate() {
                    sup = sup.max((emp[i * m + j] - reference(x, y)).abs());
                }
            }
            Ok(sup)
        }
        _ => {
            let hx = (support[0].1 - support[0].0) / (m - 1) as f64;
            let hy = (support[1].1 - support[1].0) / (m - 1) as f64;
            let wt = |k: usize| if k == 0 || k + 1 == m { 0.5 } else { 1.0 };
            let mut sum = 0.0;
            for (i, &x) in xs.iter().enumerate() {
                for (j, &y) in ys.iter().enumerate() {
                    let d = emp[i * m + j] - reference(x, y);
                    sum += wt(i) * wt(j) * d * d;
                }
            }
            Ok((sum * hx * hy).sqrt())
        }
    }
}

/// Autocorrelation coefficients and integrated autocorrelation time.
#[derive(Debug, Clone, PartialEq)]
pub struct AcfSeries {
    /// `coefficients[l]` is `ρ(l)` for `l = 0..=max_lag`.
    pub coefficients: Vec<f64>,
    pub iat: f64,
    pub n_samples: usize,
}

impl AcfSeries {
    /// `N / IAT`.
    pub fn effective_sample_size(&self) -> f64 {
        self.n_samples as f64 / self.iat
    }
}

/// Biased-normalized ACF `ρ(l) = γ(l)/γ(0)` with `γ(l) = Σ (x_t-x̄)(x_{t+l}-x̄)/N`.
/// The IAT sums `1 + 2Σρ(l)` up to (excluding) the first negative coefficient.
pub fn autocorrelation_series(series: &[f64], max_lag: usize) -> Result<AcfSeries, DiagnosticsError> {
    let n = series.len();
    if n == 0 {
        return Err(DiagnosticsError::Empty);
    }
    if max_lag * 10 >= n {
        return Err(DiagnosticsError::InvalidArgument(format!(
            "max_lag {max_lag} must be below n/10 = {}",
            n as f64 / 10.0
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let gamma0 = centered.iter().map(|x| x * x).sum::<f64>() / n as f64;
    if !(gamma0 > 0.0) {
        return Err(DiagnosticsError::ZeroVariance);
    }
    let mut coefficients = Vec::with_capacity(max_lag + 1);
    coefficients.push(1.0);
    for lag in 1..=max_lag {
        let g: f64 = centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum();
        coefficients.push((g / n as f64 / gamma0).clamp(-1.0, 1.0));
    }
    let positive: f64 = coefficients[1..].iter().take_while(|&&r| r >= 0.0).sum();
    Ok(AcfSeries {
        coefficients,
        iat: 1.0 + 2.0 * positive,
        n_samples: n,
    })
}

/// ACF of one coordinate of a chain.
pub fn autocorrelation(out: &ChainOutput, coordinate: usize, max_lag: usize) -> Result<AcfSeries, DiagnosticsError> {
    if coordinate >= out.dim() {
        return Err(DiagnosticsError::InvalidArgument(format!(
            "coordinate {coordinate} out of range for dimension {}",
            out.dim()
        )));
    }
    autocorrelation_series(&out.column(coordinate), max_lag)
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "slope needs two points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    least_squares_slope(&lx, &ly)
}
