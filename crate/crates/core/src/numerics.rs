//! Small numerical kernels shared by the solver modules: finite-difference
//! weights on arbitrary stencils, nonuniform trapezoid quadrature, Gauss–Legendre
//! nodes and Hermite interpolation of sampled profiles.

/// Fornberg's algorithm: weights `w[m][j]` such that
/// `f^{(m)}(x0) ≈ Σ_j w[m][j] f(nodes[j])` for `m ≤ max_order`.
pub fn fd_weights(x0: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Indices of a `width`-point stencil around `i` clamped into `0..n`.
fn stencil(i: usize, n: usize, width: usize) -> std::ops::Range<usize> {
    let half = width / 2;
    let start = i.saturating_sub(half).min(n - width);
    start..start + width
}

/// First derivative of sampled data at every node with a five-point
/// (fourth-order) stencil, one-sided near the ends.
pub fn derivative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    assert!(n >= 5, "need at least five samples");
    (0..n)
        .map(|i| {
            let s = stencil(i, n, 5);
            let w = fd_weights(x[i], &x[s.clone()], 1);
            s.zip(&w[1]).map(|(j, wj)| wj * y[j]).sum()
        })
        .collect()
}

/// Composite trapezoid rule on a nonuniform grid.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// Trapezoid rule with cubic-Hermite end corrections per interval,
/// using fourth-order differenced slopes. Fourth order on smooth data.
pub fn corrected_trapezoid(x: &[f64], y: &[f64]) -> f64 {
    if x.len() < 5 {
        return trapezoid(x, y);
    }
    let dy = derivative(x, y);
    (0..x.len() - 1)
        .map(|i| {
            let h = x[i + 1] - x[i];
            0.5 * h * (y[i] + y[i + 1]) + h * h / 12.0 * (dy[i] - dy[i + 1])
        })
        .sum()
}

/// Five-point Gauss–Legendre nodes and weights on `[-1, 1]`.
pub const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_08),
    (0.906_179_845_938_664, 0.236_926_885_056_189_08),
];

/// `∫_a^b f` by five-point Gauss–Legendre on `pieces` equal subintervals.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, pieces: usize) -> f64 {
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let mid = a + (k as f64 + 0.5) * h;
            GL5.iter()
                .map(|&(t, w)| w * f(mid + 0.5 * h * t))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

/// Index `i` with `x[i] ≤ t ≤ x[i+1]`, clamped to the end intervals.
pub fn locate(x: &[f64], t: f64) -> usize {
    let n = x.len();
    match x.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
        Ok(i) => i.min(n - 2),
        Err(0) => 0,
        Err(i) => (i - 1).min(n - 2),
    }
}

/// Piecewise quintic Hermite interpolant through nodal `(y, y', y'')`.
#[derive(Debug, Clone)]
pub struct QuinticHermite {
    x: Vec<f64>,
    y: Vec<f64>,
    dy: Vec<f64>,
    d2y: Vec<f64>,
}

impl QuinticHermite {
    pub fn new(x: Vec<f64>, y: Vec<f64>, dy: Vec<f64>, d2y: Vec<f64>) -> Self {
        assert!(x.len() >= 2 && x.len() == y.len() && y.len() == dy.len() && dy.len() == d2y.len());
        Self { x, y, dy, d2y }
    }

    /// Builds nodal second derivatives by differencing `dy`.
    pub fn from_first_derivative(x: Vec<f64>, y: Vec<f64>, dy: Vec<f64>) -> Self {
        let d2y = derivative(&x, &dy);
        Self::new(x, y, dy, d2y)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    /// Value and first derivative at `t` (extrapolates with the end polynomial).
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let i = locate(&self.x, t);
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let (d0, d1) = (self.dy[i] * h, self.dy[i + 1] * h);
        let (s0, s1) = (self.d2y[i] * h * h, self.d2y[i + 1] * h * h);

        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s3 * s;
        let s5 = s4 * s;
        let h00 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
        let h01 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
        let h10 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
        let h11 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
        let h20 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
        let h21 = 0.5 * (s3 - 2.0 * s4 + s5);
        let value = h00 * y0 + h01 * y1 + h10 * d0 + h11 * d1 + h20 * s0 + h21 * s1;

        let g00 = -30.0 * s2 + 60.0 * s3 - 30.0 * s4;
        let g10 = 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4;
        let g11 = -12.0 * s2 + 28.0 * s3 - 15.0 * s4;
        let g20 = 0.5 * (2.0 * s - 9.0 * s2 + 12.0 * s3 - 5.0 * s4);
        let g21 = 0.5 * (3.0 * s2 - 8.0 * s3 + 5.0 * s4);
        let slope = (g00 * (y0 - y1) + g10 * d0 + g11 * d1 + g20 * s0 + g21 * s1) / h;
        (value, slope)
    }
}

/// `n` points from `a` to `b` (inclusive) in geometric progression.
pub fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                b
            } else {
                (la + (lb - la) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// `n` points from `a` to `b` inclusive, evenly spaced.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                b
            } else {
                a + (b - a) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}
