//! Gauss-Legendre rules and composite integration.

use std::f64::consts::PI;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "a quadrature rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence.
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

/// A fixed rule mapped onto arbitrary intervals.
#[derive(Debug, Clone)]
pub struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Rule {
    pub fn new(n: usize) -> Self {
        let (nodes, weights) = gauss_legendre(n);
        Self { nodes, weights }
    }

    /// `\int_a^b f`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        r * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + r * x))
            .sum::<f64>()
    }

    /// Composite rule over `panels` equal pieces.
    pub fn composite(&self, f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let w = (b - a) / panels as f64;
        (0..panels)
            .map(|p| self.integrate(&f, a + p as f64 * w, a + (p + 1) as f64 * w))
            .sum()
    }

    /// `\int_a^b f` for `f` with an integrable power singularity at `a`
    /// (`b < a` is allowed): pieces shrink geometrically towards `a` and the
    /// innermost piece is closed with a local power-law fit.
    pub fn integrate_singular(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let w = b - a;
        // stop refining where offsets from `a` are no longer representable
        let mut levels = 0;
        while levels < 60 && w.abs() * 0.5f64.powi(levels + 1) > 64.0 * f64::EPSILON * a.abs() {
            levels += 1;
        }
        let mut total = 0.0;
        for k in 0..levels {
            let outer = a + w * 0.5f64.powi(k);
            let inner = a + w * 0.5f64.powi(k + 1);
            total += self.integrate(&f, inner, outer);
        }
        let d = w * 0.5f64.powi(levels);
        let (f1, f2) = (f(a + d), f(a + 0.5 * d));
        if f1.is_finite() && f2.is_finite() && f1 != 0.0 && f2 != 0.0 {
            // f ~ C |x - a|^{-q} with q < 1
            let q = (f2 / f1).abs().ln() / std::f64::consts::LN_2;
            if q < 1.0 {
                total += d * f1 / (1.0 - q);
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_is_exact_for_polynomials() {
        for n in [1, 2, 5, 8, 16] {
            let rule = Rule::new(n);
            for deg in 0..(2 * n) {
                let got = rule.integrate(|x| x.powi(deg as i32), 0.0, 1.0);
                assert!((got - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn weights_sum_to_two() {
        let (x, w) = gauss_legendre(33);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn singular_endpoint() {
        let rule = Rule::new(8);
        let got = rule.integrate_singular(|x| x.powf(-0.5), 0.0, 4.0);
        assert!((got - 4.0).abs() < 1e-12, "{got}");
        let got = rule.integrate_singular(|x| (1.0 - x).powf(-0.9), 1.0, 0.0);
        // offsets from 1 carry absolute rounding, so strong singularities there lose digits
        assert!((got + 10.0).abs() < 1e-5, "{got}");
    }
}
