//! Composite Gauss-Legendre quadrature with panel doubling.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes and weights on [-1, 1] by Newton iteration on P_order.
    pub fn new(order: usize) -> Self {
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let nf = order as f64;
        for i in 0..order.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(order, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Vector-valued composite rule: `f(x, acc_weight, out)` must add
/// `acc_weight * integrand(x)` into `out`.
pub fn composite_vec<F>(rule: &GaussLegendre, a: f64, b: f64, panels: usize, len: usize, f: &F) -> Vec<f64>
where
    F: Fn(f64, f64, &mut [f64]),
{
    let mut out = vec![0.0; len];
    let h = (b - a) / panels as f64;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            f(mid + 0.5 * h * x, 0.5 * h * w, &mut out);
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct Converged {
    pub values: Vec<f64>,
    pub panels: usize,
    pub last_change: f64,
}

/// Doubles the panel count until successive estimates differ by less than
/// `tol` in every component.
pub fn integrate_vec<F>(a: f64, b: f64, len: usize, tol: f64, max_panels: usize, f: &F) -> Result<Converged>
where
    F: Fn(f64, f64, &mut [f64]),
{
    let rule = GaussLegendre::new(16);
    let mut panels = 4;
    let mut prev = composite_vec(&rule, a, b, panels, len, f);
    loop {
        panels *= 2;
        if panels > max_panels {
            return Err(Error::Quadrature(format!(
                "no convergence on [{a}, {b}] with {} panels (tolerance {tol})",
                panels / 2
            )));
        }
        let cur = composite_vec(&rule, a, b, panels, len, f);
        let change = prev.iter().zip(&cur).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if change < tol {
            return Ok(Converged {
                values: cur,
                panels,
                last_change: change,
            });
        }
        prev = cur;
    }
}

pub fn integrate<F: Fn(f64) -> f64>(a: f64, b: f64, tol: f64, max_panels: usize, f: F) -> Result<f64> {
    let g = |x: f64, w: f64, out: &mut [f64]| out[0] += w * f(x);
    Ok(integrate_vec(a, b, 1, tol, max_panels, &g)?.values[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(16);
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        // degree 31 is the exactness limit
        let v: f64 = rule.nodes.iter().zip(&rule.weights).map(|(x, w)| w * x.powi(30)).sum();
        assert!((v - 2.0 / 31.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_integral() {
        let v = integrate(0.0, 40.0, 1e-13, 1 << 12, |x| (-x * x).exp()).unwrap();
        assert!((v - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-13);
    }

    #[test]
    fn budget_error() {
        let r = integrate(0.0, 1.0, 0.0, 64, |x| x.sin());
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }
}
