//! Perturbation, regularity and truncation-bound reports.

use serde::Serialize;

use crate::error::KernelError;
use crate::norm::Norm;
use crate::target::{tail_terms, TailConstants, TruncationSpec};

use super::measure::{
    doeblin_constant, fixed_space_dimension, invariant_measure, spectral_gap_alpha, InvariantMeasure, FIXED_SPACE_TOL,
};
use super::KernelMatrix;

/// Measured quantities of one `(P, Q)` pair in one norm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub p: Norm,
    /// `‖P − Q‖_p`, weight `w²`.
    pub kernel_dist: f64,
    /// `‖π̂ − η̂‖_p`, weight `w`.
    pub measure_dist: f64,
    /// `measure_dist / kernel_dist` (0 when both vanish).
    pub implied_constant: f64,
    /// Gap of `P` on the complement of `π̂`.
    pub gap_alpha: f64,
    /// `⟨π̂, η̂⟩ / (‖π̂‖₂ ‖η̂‖₂)`.
    pub overlap_lambda: f64,
    /// Doeblin constant of `Q`.
    pub doeblin_eps: f64,
    /// Doeblin constant of `P`.
    pub doeblin_eps_p: f64,
    /// `∏_i` of the per-axis clamp floors of `Q`, when clamped.
    pub doeblin_floor: Option<f64>,
    pub fixed_space_dim_p: usize,
    pub fixed_space_dim_q: usize,
    /// `‖η̂‖₂ < 2‖π̂‖₂`.
    pub remark_bound_holds: bool,
    /// `‖V_P‖₂ / ‖K_P‖_{L²(D×D)}`; at most 1.
    pub operator_norm_ratio: f64,
    pub pi_lp_norm: f64,
    pub eta_lp_norm: f64,
}

/// Norm-independent parts of a perturbation report, computed once.
#[derive(Debug, Clone)]
pub struct PerturbationAnalysis {
    kp: KernelMatrix,
    kq: KernelMatrix,
    pub pi_hat: InvariantMeasure,
    pub eta_hat: InvariantMeasure,
    pub gap_alpha: f64,
    pub overlap_lambda: f64,
    pub doeblin_p: f64,
    pub doeblin_q: f64,
    pub fixed_space_dim_p: usize,
    pub fixed_space_dim_q: usize,
    pub operator_norm_ratio: f64,
}

fn operator_norm(k: &KernelMatrix) -> f64 {
    k.mass().singular_values().iter().copied().fold(0.0, f64::max)
}

impl PerturbationAnalysis {
    pub fn new(kp: &KernelMatrix, kq: &KernelMatrix) -> Result<Self, KernelError> {
        if kp.states() != kq.states() {
            return Err(KernelError::DimensionMismatch);
        }
        let pi_hat = invariant_measure(kp)?;
        let eta_hat = invariant_measure(kq)?;
        let gap_alpha = spectral_gap_alpha(kp, &pi_hat)?;
        let dot: f64 = pi_hat
            .density
            .iter()
            .zip(&eta_hat.density)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * pi_hat.cell_volume;
        let overlap_lambda = dot / (pi_hat.lp_norm(Norm::L2) * eta_hat.lp_norm(Norm::L2));
        let operator_norm_ratio = operator_norm(kp) / kp.lp_norm(Norm::L2);
        Ok(Self {
            pi_hat,
            eta_hat,
            gap_alpha,
            overlap_lambda,
            doeblin_p: doeblin_constant(kp),
            doeblin_q: doeblin_constant(kq),
            fixed_space_dim_p: fixed_space_dimension(kp, FIXED_SPACE_TOL),
            fixed_space_dim_q: fixed_space_dimension(kq, FIXED_SPACE_TOL),
            operator_norm_ratio,
            kp: kp.clone(),
            kq: kq.clone(),
        })
    }

    pub fn report(&self, p: Norm) -> PerturbationReport {
        let kernel_dist = self.kp.lp_distance(&self.kq, p).unwrap_or(f64::NAN);
        let w = self.pi_hat.cell_volume;
        let measure_dist = p.weighted(
            self.pi_hat
                .density
                .iter()
                .zip(&self.eta_hat.density)
                .map(|(a, b)| a - b),
            w,
        );
        let implied_constant = if kernel_dist > 0.0 {
            measure_dist / kernel_dist
        } else {
            0.0
        };
        let floor = self
            .kq
            .factor_stats()
            .iter()
            .map(|s| s.clamp_floor)
            .collect::<Option<Vec<f64>>>()
            .filter(|v| !v.is_empty())
            .map(|v| v.iter().product());
        PerturbationReport {
            p,
            kernel_dist,
            measure_dist,
            implied_constant,
            gap_alpha: self.gap_alpha,
            overlap_lambda: self.overlap_lambda,
            doeblin_eps: self.doeblin_q,
            doeblin_eps_p: self.doeblin_p,
            doeblin_floor: floor,
            fixed_space_dim_p: self.fixed_space_dim_p,
            fixed_space_dim_q: self.fixed_space_dim_q,
            remark_bound_holds: self.eta_hat.lp_norm(Norm::L2) < 2.0 * self.pi_hat.lp_norm(Norm::L2),
            operator_norm_ratio: self.operator_norm_ratio,
            pi_lp_norm: self.pi_hat.lp_norm(p),
            eta_lp_norm: self.eta_hat.lp_norm(p),
        }
    }
}

/// One-shot report for a single norm.
pub fn perturbation_report(kp: &KernelMatrix, kq: &KernelMatrix, p: Norm) -> Result<PerturbationReport, KernelError> {
    Ok(PerturbationAnalysis::new(kp, kq)?.report(p))
}

/// `‖Vg‖_p ≤ ‖K‖_p · max{‖g‖₁, ‖g‖₂}` for one `p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityPart {
    pub p: Norm,
    pub lhs: f64,
    pub kernel_norm: f64,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    /// `‖Vg‖_∞`.
    pub image_sup: f64,
    /// `‖K‖_∞ ‖g‖₁`.
    pub sup_bound: f64,
    pub sup_holds: bool,
    pub parts: Vec<RegularityPart>,
}

impl RegularityReport {
    pub fn all_hold(&self) -> bool {
        self.sup_holds && self.parts.iter().all(|p| p.holds)
    }
}

/// Slack allowed in the regularity inequalities.
const REGULARITY_SLACK: f64 = 1e-9;

/// Bounded-image inequalities for the action of `k` on an arbitrary `g`.
pub fn regularity_check_with(k: &KernelMatrix, g: &[f64], ps: &[Norm]) -> RegularityReport {
    let w = k.cell_volume();
    let image = k.action(g);
    let g1 = Norm::L1.weighted(g.iter().copied(), w);
    let g2 = Norm::L2.weighted(g.iter().copied(), w);
    let image_sup = Norm::Inf.weighted(image.iter().copied(), w);
    let sup_bound = k.lp_norm(Norm::Inf) * g1;
    let parts = ps
        .iter()
        .map(|&p| {
            let lhs = p.weighted(image.iter().copied(), w);
            let kernel_norm = k.lp_norm(p);
            let rhs = kernel_norm * g1.max(g2);
            RegularityPart {
                p,
                lhs,
                kernel_norm,
                rhs,
                holds: lhs <= rhs + REGULARITY_SLACK,
            }
        })
        .collect();
    RegularityReport {
        image_sup,
        sup_bound,
        sup_holds: image_sup <= sup_bound + REGULARITY_SLACK,
        parts,
    }
}

/// Regularity of the fixed density: `g = η̂` for `p ∈ {2, 4, ∞}`.
pub fn regularity_check(k: &KernelMatrix, eta: &InvariantMeasure) -> RegularityReport {
    regularity_check_with(k, &eta.density, &[Norm::L2, Norm::P(4.0), Norm::Inf])
}

/// The three-term bound for a target truncated to `[-t, t]^d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationBoundReport {
    pub t: f64,
    pub p: Norm,
    pub c1: f64,
    pub c2: f64,
    /// `implied_constant · ‖P − Q‖_p`.
    pub perturbation_term: f64,
    /// `C₂/(2t) · ‖π̂‖_p`.
    pub mass_term: f64,
    /// `C₁/(t ‖π̂‖_p)`.
    pub lp_term: f64,
    pub total: f64,
}

/// Assembles the truncation bound from a measured report. Requires
/// `t >= C₂/2`.
pub fn truncation_bound_report(
    spec: &TruncationSpec,
    p: Norm,
    lp_norm_pi: f64,
    report: &PerturbationReport,
) -> Result<TruncationBoundReport, KernelError> {
    spec.validate()?;
    let TailConstants { c1, c2 } = spec.tail_constants(p).ok_or(KernelError::TailConstantsUnavailable)?;
    if spec.t < c2 / 2.0 {
        return Err(KernelError::HypothesisViolation { t: spec.t, c2 });
    }
    let perturbation_term = report.implied_constant * report.kernel_dist;
    let tails = tail_terms(spec, p, lp_norm_pi).ok_or(KernelError::TailConstantsUnavailable)?;
    let (mass_term, lp_term) = (tails.mass_term, tails.lp_term);
    Ok(TruncationBoundReport {
        t: spec.t,
        p,
        c1,
        c2,
        perturbation_term,
        mass_term,
        lp_term,
        total: perturbation_term + mass_term + lp_term,
    })
}
