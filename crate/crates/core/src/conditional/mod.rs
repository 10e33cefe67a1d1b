//! One-dimensional approximate conditionals built from grid evaluations.
//!
//! The raw values `π̂(x_1, .., t_j, .., x_d)` at the knots `t_j` are
//! interpolated, the interpolant is clamped pointwise into `[ε, M]`, and the
//! clamped piecewise form is integrated exactly to normalize it. The result
//! is stored as a list of pieces (constant, linear, or polynomial on a
//! sub-interval) with cumulative masses, so the CDF and its inverse are
//! available in closed form for the constant and linear schemes.

mod poly;

use std::fmt;
use std::str::FromStr;

use crate::error::ConditionalError;
use crate::target::TargetDensity;

use poly::{gauss_legendre, Stencil};

/// A univariate density with CDF inversion.
pub trait Conditional1d: Send + Sync {
    fn support(&self) -> (f64, f64);
    /// Normalized density; zero outside the support.
    fn pdf(&self, t: f64) -> f64;
    fn cdf(&self, t: f64) -> f64;
    fn inverse_cdf(&self, u: f64) -> f64;
}

/// Strictly increasing knots `a = t_0 < .. < t_{n-1} = b`, `n >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    points: Vec<f64>,
}

impl Grid1D {
    pub fn new(points: Vec<f64>) -> Result<Self, ConditionalError> {
        if points.len() < 2 {
            return Err(ConditionalError::InvalidGrid(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(ConditionalError::InvalidGrid("non-finite knot".into()));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConditionalError::InvalidGrid(
                "knots must be strictly increasing".into(),
            ));
        }
        Ok(Self { points })
    }

    /// `n` equally spaced knots on `[a, b]`, endpoints exact.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self, ConditionalError> {
        if n < 2 {
            return Err(ConditionalError::InvalidGrid(format!(
                "need at least 2 points, got {n}"
            )));
        }
        let h = (b - a) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|j| a + j as f64 * h).collect();
        points[n - 1] = b;
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn lower(&self) -> f64 {
        self.points[0]
    }

    pub fn upper(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Index `j` of the cell `[t_j, t_{j+1}]` containing `t` (clamped).
    pub fn cell_of(&self, t: f64) -> usize {
        let j = self.points.partition_point(|p| *p <= t);
        j.saturating_sub(1).min(self.points.len() - 2)
    }
}

/// Pointwise clamp `ε <= q(t) <= M` applied to the interpolant.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ClampBounds {
    epsilon: f64,
    m: f64,
}

impl ClampBounds {
    pub fn new(epsilon: f64, m: f64) -> Result<Self, ConditionalError> {
        if epsilon.is_finite() && m.is_finite() && 0.0 < epsilon && epsilon < m {
            Ok(Self { epsilon, m })
        } else {
            Err(ConditionalError::InvalidClamp { epsilon, m })
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    fn apply(&self, v: f64) -> f64 {
        v.clamp(self.epsilon, self.m)
    }
}

/// How clamp bounds are chosen for each conditional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClampSpec {
    Disabled,
    /// `ε = eps_rel · max raw`, `M = m_rel · max raw`, per conditional.
    Relative {
        eps_rel: f64,
        m_rel: f64,
    },
    Absolute(ClampBounds),
}

impl Default for ClampSpec {
    fn default() -> Self {
        ClampSpec::Relative {
            eps_rel: 1e-8,
            m_rel: 10.0,
        }
    }
}

impl ClampSpec {
    pub fn relative(eps_rel: f64, m_rel: f64) -> Result<Self, ConditionalError> {
        ClampBounds::new(eps_rel, m_rel)?;
        Ok(ClampSpec::Relative { eps_rel, m_rel })
    }

    fn resolve(&self, raw: &[f64]) -> Result<Option<ClampBounds>, ConditionalError> {
        match *self {
            ClampSpec::Disabled => Ok(None),
            ClampSpec::Absolute(b) => Ok(Some(b)),
            ClampSpec::Relative { eps_rel, m_rel } => {
                let max = raw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if !(max > 0.0) {
                    return Err(ConditionalError::Degenerate);
                }
                ClampBounds::new(eps_rel * max, m_rel * max).map(Some)
            }
        }
    }
}

/// Interpolation between knots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpScheme {
    /// Nearest-knot value; breaks at knot midpoints.
    PiecewiseConstant,
    PiecewiseLinear,
    /// Local Lagrange interpolation of the given degree on `degree + 1`
    /// consecutive knots around each cell.
    Polynomial(usize),
}

impl InterpScheme {
    pub fn validate(&self, n: usize) -> Result<(), ConditionalError> {
        match *self {
            InterpScheme::Polynomial(k) if k < 2 => Err(ConditionalError::InvalidScheme(format!(
                "polynomial order must be >= 2, got {k}"
            ))),
            InterpScheme::Polynomial(k) if k > n - 1 => Err(ConditionalError::InvalidScheme(format!(
                "polynomial order {k} exceeds n-1 = {} for this grid",
                n - 1
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for InterpScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InterpScheme::PiecewiseConstant => f.write_str("pc"),
            InterpScheme::PiecewiseLinear => f.write_str("pl"),
            InterpScheme::Polynomial(k) => write!(f, "poly:{k}"),
        }
    }
}

impl FromStr for InterpScheme {
    type Err = ConditionalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "pc" => Ok(InterpScheme::PiecewiseConstant),
            "pl" => Ok(InterpScheme::PiecewiseLinear),
            other => other
                .strip_prefix("poly:")
                .and_then(|k| k.parse::<usize>().ok())
                .map(InterpScheme::Polynomial)
                .ok_or_else(|| ConditionalError::InvalidScheme(format!("`{other}` (expected pc, pl or poly:k)"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Const(f64),
    /// Values at the piece's two ends.
    Linear(f64, f64),
    /// Unclamped polynomial of the given stencil.
    Poly(usize),
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    shape: Shape,
}

/// Clamped, normalized interpolant of a conditional density.
#[derive(Debug, Clone)]
pub struct ApproxConditional {
    grid: Grid1D,
    raw_values: Vec<f64>,
    clamp: Option<ClampBounds>,
    scheme: InterpScheme,
    normalizer: f64,
    pieces: Vec<Piece>,
    /// `cdf[k]` is the normalized mass left of piece `k`; `cdf[len] = 1`.
    cdf: Vec<f64>,
    stencils: Vec<Stencil>,
    gauss: (Vec<f64>, Vec<f64>),
}

/// Probes per polynomial cell when locating clamp crossings.
const POLY_PROBES: usize = 32;

/// Evaluates `π̂` at the `n` knots along `axis` (other coordinates from
/// `fixed`) and builds the approximate conditional. Exactly `n` target
/// evaluations are made.
pub fn build_conditional(
    target: &dyn TargetDensity,
    axis: usize,
    fixed: &[f64],
    grid: &Grid1D,
    scheme: InterpScheme,
    clamp: ClampSpec,
) -> Result<ApproxConditional, ConditionalError> {
    let domain = target.domain();
    let (lo, hi) = (domain.lower()[axis], domain.upper()[axis]);
    let tol = 1e-12 * (hi - lo);
    if (grid.lower() - lo).abs() > tol || (grid.upper() - hi).abs() > tol {
        return Err(ConditionalError::GridMismatch {
            grid_lo: grid.lower(),
            grid_hi: grid.upper(),
            lo,
            hi,
        });
    }
    let mut x = fixed.to_vec();
    let mut raw = Vec::with_capacity(grid.len());
    for &t in grid.points() {
        x[axis] = t;
        raw.push(target.density(&x)?);
    }
    ApproxConditional::from_values(grid.clone(), raw, scheme, clamp)
}

impl ApproxConditional {
    /// Builds the conditional from raw knot values.
    pub fn from_values(
        grid: Grid1D,
        raw_values: Vec<f64>,
        scheme: InterpScheme,
        clamp: ClampSpec,
    ) -> Result<Self, ConditionalError> {
        let n = grid.len();
        if raw_values.len() != n {
            return Err(ConditionalError::InvalidGrid(format!(
                "{} raw values for {n} knots",
                raw_values.len()
            )));
        }
        if raw_values.iter().any(|v| !v.is_finite()) {
            return Err(ConditionalError::InvalidGrid("non-finite raw value".into()));
        }
        scheme.validate(n)?;
        let bounds = clamp.resolve(&raw_values)?;
        let t = grid.points();

        let mut pieces = Vec::with_capacity(n + 2);
        let mut stencils = Vec::new();
        match scheme {
            InterpScheme::PiecewiseConstant => {
                for j in 0..n {
                    let lo = if j == 0 { t[0] } else { 0.5 * (t[j - 1] + t[j]) };
                    let hi = if j == n - 1 { t[n - 1] } else { 0.5 * (t[j] + t[j + 1]) };
                    let v = bounds.map_or(raw_values[j], |b| b.apply(raw_values[j]));
                    pieces.push(Piece {
                        lo,
                        hi,
                        shape: Shape::Const(v),
                    });
                }
            }
            InterpScheme::PiecewiseLinear => {
                for j in 0..n - 1 {
                    push_linear(&mut pieces, t[j], t[j + 1], raw_values[j], raw_values[j + 1], bounds);
                }
            }
            InterpScheme::Polynomial(k) => {
                for j in 0..n - 1 {
                    let start = j.saturating_sub((k - 1) / 2).min(n - 1 - k);
                    let s = Stencil::new(&t[start..=start + k], &raw_values[start..=start + k]);
                    stencils.push(s);
                    push_poly(&mut pieces, t[j], t[j + 1], &stencils[j], j, bounds)?;
                }
            }
        }
        if bounds.is_none() {
            let negative = pieces.iter().find_map(|p| match p.shape {
                Shape::Const(v) if v < 0.0 => Some(p.lo),
                Shape::Linear(a, b) if a < 0.0 || b < 0.0 => Some(p.lo),
                _ => None,
            });
            if let Some(at) = negative {
                return Err(ConditionalError::NegativeDensity(at));
            }
        }

        let gauss_nodes = match scheme {
            InterpScheme::Polynomial(k) => k / 2 + 1,
            _ => 1,
        };
        let mut q = Self {
            grid,
            raw_values,
            clamp: bounds,
            scheme,
            normalizer: 0.0,
            pieces,
            cdf: Vec::new(),
            stencils,
            gauss: gauss_legendre(gauss_nodes),
        };
        let masses: Vec<f64> = q.pieces.iter().map(|p| q.partial_mass(p, p.hi)).collect();
        let total: f64 = masses.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(ConditionalError::Degenerate);
        }
        let mut cdf = Vec::with_capacity(masses.len() + 1);
        let mut acc = 0.0;
        cdf.push(0.0);
        for m in &masses {
            acc += m;
            cdf.push((acc / total).min(1.0));
        }
        *cdf.last_mut().expect("nonempty") = 1.0;
        q.normalizer = total;
        q.cdf = cdf;
        Ok(q)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn raw_values(&self) -> &[f64] {
        &self.raw_values
    }

    pub fn clamp(&self) -> Option<ClampBounds> {
        self.clamp
    }

    pub fn scheme(&self) -> InterpScheme {
        self.scheme
    }

    /// Exact integral of the clamped interpolant over `[a, b]`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// `(breakpoint, F(breakpoint))` pairs of the CDF table.
    pub fn cdf_knots(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self.pieces.iter().zip(&self.cdf).map(|(p, c)| (p.lo, *c)).collect();
        out.push((self.grid.upper(), 1.0));
        out
    }

    /// Clamped interpolant before normalization.
    fn unnormalized(&self, piece: &Piece, t: f64) -> f64 {
        match piece.shape {
            Shape::Const(c) => c,
            Shape::Linear(a, b) => {
                let w = piece.hi - piece.lo;
                if w == 0.0 {
                    a
                } else {
                    a + (b - a) * ((t - piece.lo) / w)
                }
            }
            Shape::Poly(s) => {
                let v = self.stencils[s].eval(t);
                self.clamp.map_or(v, |b| b.apply(v))
            }
        }
    }

    /// Unnormalized mass of `piece` on `[piece.lo, t]`.
    fn partial_mass(&self, piece: &Piece, t: f64) -> f64 {
        let s = (t - piece.lo).max(0.0);
        match piece.shape {
            Shape::Const(c) => c * s,
            Shape::Linear(a, b) => {
                let w = piece.hi - piece.lo;
                if w == 0.0 {
                    0.0
                } else {
                    a * s + 0.5 * (b - a) / w * s * s
                }
            }
            Shape::Poly(k) => {
                let (nodes, weights) = &self.gauss;
                let half = 0.5 * s;
                let mid = piece.lo + half;
                let stencil = &self.stencils[k];
                half * nodes
                    .iter()
                    .zip(weights)
                    .map(|(x, w)| w * stencil.eval(mid + half * x))
                    .sum::<f64>()
            }
        }
    }

    fn piece_index(&self, t: f64) -> usize {
        self.pieces.partition_point(|p| p.hi < t).min(self.pieces.len() - 1)
    }

    /// Clamped, normalized density at `t`.
    pub fn eval_density(&self, t: f64) -> Result<f64, ConditionalError> {
        let (lo, hi) = (self.grid.lower(), self.grid.upper());
        if !(lo <= t && t <= hi) {
            return Err(ConditionalError::OutOfDomain { t, lo, hi });
        }
        let p = &self.pieces[self.piece_index(t)];
        Ok(self.unnormalized(p, t) / self.normalizer)
    }

    /// `F(t)` of the clamped, normalized interpolant.
    pub fn cdf_at(&self, t: f64) -> f64 {
        if t <= self.grid.lower() {
            return 0.0;
        }
        if t >= self.grid.upper() {
            return 1.0;
        }
        let k = self.piece_index(t);
        let p = &self.pieces[k];
        (self.cdf[k] + self.partial_mass(p, t.min(p.hi)) / self.normalizer).min(1.0)
    }

    /// `F⁻¹(u)` for `u` in `[0, 1]` (values outside are clamped).
    pub fn sample_inverse_cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if u <= 0.0 {
            return self.grid.lower();
        }
        if u >= 1.0 {
            return self.grid.upper();
        }
        // last piece whose left CDF value is <= u
        let k = (self.cdf.partition_point(|c| *c <= u) - 1).min(self.pieces.len() - 1);
        let p = &self.pieces[k];
        let target = (u - self.cdf[k]) * self.normalizer;
        let width = p.hi - p.lo;
        let s = match p.shape {
            Shape::Const(c) => target / c,
            Shape::Linear(a, b) => {
                if width == 0.0 {
                    0.0
                } else {
                    // a s + (b − a)/(2w) s² = target, stable root
                    let slope = (b - a) / width;
                    let disc = (a * a + 2.0 * slope * target).max(0.0);
                    let den = a + disc.sqrt();
                    if den > 0.0 {
                        2.0 * target / den
                    } else {
                        0.0
                    }
                }
            }
            Shape::Poly(_) => {
                let (mut lo, mut hi) = (p.lo, p.hi);
                while hi - lo > 1e-12 {
                    let mid = 0.5 * (lo + hi);
                    if self.partial_mass(p, mid) < target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi) - p.lo
            }
        };
        (p.lo + s.clamp(0.0, width)).clamp(p.lo, p.hi)
    }
}

impl Conditional1d for ApproxConditional {
    fn support(&self) -> (f64, f64) {
        (self.grid.lower(), self.grid.upper())
    }

    fn pdf(&self, t: f64) -> f64 {
        self.eval_density(t).unwrap_or(0.0)
    }

    fn cdf(&self, t: f64) -> f64 {
        self.cdf_at(t)
    }

    fn inverse_cdf(&self, u: f64) -> f64 {
        self.sample_inverse_cdf(u)
    }
}

/// Splits `[lo, hi]` at the points where the line crosses the clamp levels.
fn push_linear(out: &mut Vec<Piece>, lo: f64, hi: f64, v0: f64, v1: f64, bounds: Option<ClampBounds>) {
    let Some(b) = bounds else {
        out.push(Piece {
            lo,
            hi,
            shape: Shape::Linear(v0, v1),
        });
        return;
    };
    let inside = |v: f64| b.epsilon <= v && v <= b.m;
    if inside(v0) && inside(v1) {
        out.push(Piece {
            lo,
            hi,
            shape: Shape::Linear(v0, v1),
        });
        return;
    }
    let line = |s: f64| v0 + (v1 - v0) * ((s - lo) / (hi - lo));
    let mut cuts = vec![lo, hi];
    for level in [b.epsilon, b.m] {
        if (v0 - level) * (v1 - level) < 0.0 {
            let s = lo + (level - v0) / (v1 - v0) * (hi - lo);
            if s > lo && s < hi {
                cuts.push(s);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    for w in cuts.windows(2) {
        let (l, r) = (w[0], w[1]);
        if r <= l {
            continue;
        }
        let mid = line(0.5 * (l + r));
        let shape = if mid < b.epsilon {
            Shape::Const(b.epsilon)
        } else if mid > b.m {
            Shape::Const(b.m)
        } else {
            Shape::Linear(b.apply(line(l)), b.apply(line(r)))
        };
        out.push(Piece { lo: l, hi: r, shape });
    }
}

fn push_poly(
    out: &mut Vec<Piece>,
    lo: f64,
    hi: f64,
    stencil: &Stencil,
    index: usize,
    bounds: Option<ClampBounds>,
) -> Result<(), ConditionalError> {
    let h = (hi - lo) / POLY_PROBES as f64;
    let probe = |j: usize| if j == POLY_PROBES { hi } else { lo + j as f64 * h };
    let Some(b) = bounds else {
        for j in 0..=POLY_PROBES {
            let s = probe(j);
            if stencil.eval(s) < 0.0 {
                return Err(ConditionalError::NegativeDensity(s));
            }
        }
        out.push(Piece {
            lo,
            hi,
            shape: Shape::Poly(index),
        });
        return Ok(());
    };
    let mut cuts = vec![lo, hi];
    for level in [b.epsilon, b.m] {
        let g = |s: f64| stencil.eval(s) - level;
        let mut prev = g(lo);
        for j in 1..=POLY_PROBES {
            let (a, c) = (probe(j - 1), probe(j));
            let cur = g(c);
            if prev * cur < 0.0 {
                let (mut l, mut r, mut gl) = (a, c, prev);
                for _ in 0..100 {
                    let m = 0.5 * (l + r);
                    let gm = g(m);
                    if (gm < 0.0) == (gl < 0.0) {
                        l = m;
                        gl = gm;
                    } else {
                        r = m;
                    }
                    if r - l <= 1e-15 * (1.0 + m.abs()) {
                        break;
                    }
                }
                cuts.push(0.5 * (l + r));
            } else if cur == 0.0 && j < POLY_PROBES {
                cuts.push(c);
            }
            prev = cur;
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    for w in cuts.windows(2) {
        let (l, r) = (w[0], w[1]);
        if r <= l {
            continue;
        }
        let mid = stencil.eval(0.5 * (l + r));
        let shape = if mid < b.epsilon {
            Shape::Const(b.epsilon)
        } else if mid > b.m {
            Shape::Const(b.m)
        } else {
            Shape::Poly(index)
        };
        out.push(Piece { lo: l, hi: r, shape });
    }
    debug_assert!(stencil.degree() >= 2);
    Ok(())
}
