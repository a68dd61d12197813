//! Gauss-Legendre quadrature.

use std::ops::{Add, Mul};
use std::sync::OnceLock;

/// Number of nodes of the fixed rule.
pub const GL_NODES: usize = 16;

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`,
/// by Newton iteration on the Legendre polynomial.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            dp = n as f64 * (x * p - p0) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(GL_NODES))
}

/// Composite 16-node rule on `[a, b]` with `panels` equal panels.
pub fn gl_composite<T, E>(a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> Result<T, E>) -> Result<T, E>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    let (x, w) = rule16();
    let h = (b - a) / panels as f64;
    let mut total = T::default();
    for p in 0..panels {
        let lo = a + h * p as f64;
        let mid = lo + 0.5 * h;
        let mut s = T::default();
        for (xi, wi) in x.iter().zip(w) {
            s = s + f(mid + 0.5 * h * xi)? * *wi;
        }
        total = total + s * (0.5 * h);
    }
    Ok(total)
}

/// Doubles the panel count until two successive values agree to `rel_tol`
/// (with an absolute floor of `abs_tol`), up to `max_panels`.
pub fn gl_adaptive<E>(
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_panels: usize,
    mut f: impl FnMut(f64) -> Result<f64, E>,
) -> Result<f64, E> {
    let mut panels = 1;
    let mut prev = gl_composite(a, b, panels, &mut f)?;
    while panels < max_panels {
        panels *= 2;
        let cur = gl_composite(a, b, panels, &mut f)?;
        if (cur - prev).abs() <= rel_tol * cur.abs().max(prev.abs()) || (cur - prev).abs() <= abs_tol {
            return Ok(cur);
        }
        prev = cur;
    }
    Ok(prev)
}
