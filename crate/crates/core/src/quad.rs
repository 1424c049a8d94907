//! Gauss–Legendre rules and a few closed-form radial moments.

use alloc::vec::Vec;
use core::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            // Tricomi initial guess, then Newton on P_n
            let mut x = libm::cos(PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            nodes.push(x);
            weights.push(2.0 / ((1.0 - x * x) * dp * dp));
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Iterates `(x, w)` pairs mapped onto `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        self.nodes.iter().zip(&self.weights).map(move |(x, w)| (mid + half * x, half * w))
    }

    /// `∫_a^b f` by this rule.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.on(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `∫_a^b r^p dr` for `0 ≤ a ≤ b ≤ ∞`; `b = ∞` requires `p < -1`, `a = 0` requires `p > -1`.
pub fn power_integral(a: f64, b: f64, p: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if (p + 1.0).abs() < 1e-14 {
        return libm::log(b / a);
    }
    let q = p + 1.0;
    let fb = if b.is_infinite() {
        debug_assert!(q < 0.0);
        0.0
    } else {
        libm::pow(b, q)
    };
    let fa = if a == 0.0 {
        debug_assert!(q > 0.0);
        0.0
    } else {
        libm::pow(a, q)
    };
    (fb - fa) / q
}

/// Grading map of `[0, 1]` onto itself with `g(v) ~ v^3` at both ends, and
/// its derivative. Endpoint singularities of type `|x|^σ` become
/// `v^{3σ+2}` after the change of variables, which Gauss–Legendre handles well.
pub(crate) fn grade(v: f64) -> (f64, f64) {
    let (a, b) = (v * v * v, (1.0 - v) * (1.0 - v) * (1.0 - v));
    let s = a + b;
    (a / s, 3.0 * v * v * (1.0 - v) * (1.0 - v) / (s * s))
}
