//! Barycentric Lagrange stencils and Gauss–Legendre rules.

/// Interpolating polynomial through `nodes`, evaluated in barycentric form.
#[derive(Debug, Clone)]
pub(crate) struct Stencil {
    nodes: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl Stencil {
    pub(crate) fn new(nodes: &[f64], values: &[f64]) -> Self {
        let weights = nodes
            .iter()
            .enumerate()
            .map(|(j, xj)| {
                let prod: f64 = nodes
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != j)
                    .map(|(_, xk)| xj - xk)
                    .product();
                1.0 / prod
            })
            .collect();
        Self {
            nodes: nodes.to_vec(),
            values: values.to_vec(),
            weights,
        }
    }

    pub(crate) fn eval(&self, t: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for ((x, y), w) in self.nodes.iter().zip(&self.values).zip(&self.weights) {
            let diff = t - x;
            if diff == 0.0 {
                return *y;
            }
            let c = w / diff;
            num += c * y;
            den += c;
        }
        num / den
    }

    pub(crate) fn degree(&self) -> usize {
        self.nodes.len() - 1
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        dp = if d != 0.0 { d } else { dp };
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

/// `(P_m(x), P_m'(x))` by the three-term recurrence.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
