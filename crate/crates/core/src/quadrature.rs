//! Gauss–Legendre quadrature on [-1, 1] with respect to the probability
//! measure dx/2.

use std::sync::OnceLock;

/// Number of nodes used for all integrals against the uniform measure.
pub const DEFAULT_NODES: usize = 64;

#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    /// Weights sum to 1 (measure dx/2).
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on P_n from Chebyshev initial guesses.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d.is_finite() { d } else { dp };
            // weights for dx are 2/((1-x^2) P'^2); halve for dx/2
            let w = 1.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// The shared 64-node rule.
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(DEFAULT_NODES))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// ∫ f dρ on [-1, 1].
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// ∫ f dρ over [a, b] ⊆ [-1, 1], still against dx/2.
    pub fn integrate_on<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        half * self.integrate(|t| f(mid + half * t))
    }

    /// Tensor-product rule over `modes` copies of [-1, 1]. Calls `f` once per
    /// node with the node coordinates and the product weight.
    pub fn for_each_tensor_node<F: FnMut(&[f64], f64)>(&self, modes: usize, mut f: F) {
        let n = self.len();
        let mut idx = vec![0usize; modes];
        let mut point = vec![0.0; modes];
        loop {
            let mut w = 1.0;
            for (m, &i) in idx.iter().enumerate() {
                point[m] = self.nodes[i];
                w *= self.weights[i];
            }
            f(&point, w);
            let mut m = modes;
            loop {
                if m == 0 {
                    return;
                }
                m -= 1;
                idx[m] += 1;
                if idx[m] < n {
                    break;
                }
                idx[m] = 0;
            }
        }
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for n in [1, 2, 5, 17, 64] {
            let q = GaussLegendre::new(n);
            let s: f64 = q.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "n={n}: {s}");
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_127() {
        let q = GaussLegendre::standard();
        for p in [0u32, 1, 2, 10, 50, 126, 127] {
            let got = q.integrate(|x| x.powi(p as i32));
            let exact = if p % 2 == 1 { 0.0 } else { 1.0 / (p as f64 + 1.0) };
            assert!((got - exact).abs() < 1e-14, "degree {p}: {got} vs {exact}");
        }
    }

    #[test]
    fn nodes_sorted_and_symmetric() {
        let q = GaussLegendre::new(9);
        assert!(q.nodes.windows(2).all(|w| w[0] < w[1]));
        for i in 0..9 {
            assert!((q.nodes[i] + q.nodes[8 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn tensor_rule_integrates_products() {
        let q = GaussLegendre::new(8);
        let mut total = 0.0;
        q.for_each_tensor_node(3, |p, w| total += w * p[0] * p[0] * p[1] * p[1] * p[2] * p[2]);
        assert!((total - 1.0 / 27.0).abs() < 1e-14);
    }
}
