//! Small numerical kernels shared by the geometry, identity and spectral code:
//! uniform-grid finite differences, trapezoid and Gauss–Legendre quadrature,
//! and symmetric tridiagonal pencils.

use std::f64::consts::PI;

/// Gamma function at half-integers `k / 2`, `k >= 1`.
fn gamma_half(k: usize) -> f64 {
    debug_assert!(k >= 1);
    if k.is_multiple_of(2) {
        // Γ(m) = (m-1)!
        (1..k / 2).map(|i| i as f64).product()
    } else {
        // Γ(m + 1/2) = (2m)! / (4^m m!) √π
        let m = (k - 1) / 2;
        let mut g = PI.sqrt();
        for i in 0..m {
            g *= i as f64 + 0.5;
        }
        g
    }
}

/// Area of the unit sphere `S^{n-1}` in `R^n`.
pub fn unit_sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n)
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    unit_sphere_area(n) / n as f64
}

/// First derivative on a uniform grid: centered in the interior, one-sided
/// second order at the two ends.
pub fn derivative(f: &[f64], ds: f64) -> Vec<f64> {
    let m = f.len();
    assert!(m >= 3);
    let mut d = vec![0.0; m];
    for i in 1..m - 1 {
        d[i] = (f[i + 1] - f[i - 1]) / (2.0 * ds);
    }
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * ds);
    d[m - 1] = (3.0 * f[m - 1] - 4.0 * f[m - 2] + f[m - 3]) / (2.0 * ds);
    d
}

/// Second derivative on a uniform grid, second order everywhere.
pub fn second_derivative(f: &[f64], ds: f64) -> Vec<f64> {
    let m = f.len();
    assert!(m >= 4);
    let h2 = ds * ds;
    let mut d = vec![0.0; m];
    for i in 1..m - 1 {
        d[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2;
    }
    d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
    d[m - 1] = (2.0 * f[m - 1] - 5.0 * f[m - 2] + 4.0 * f[m - 3] - f[m - 4]) / h2;
    d
}

/// Composite trapezoid over samples `i0..=i1`.
pub fn trapezoid_range(f: &[f64], ds: f64, i0: usize, i1: usize) -> f64 {
    if i1 <= i0 {
        return 0.0;
    }
    let inner: f64 = f[i0 + 1..i1].iter().sum();
    ds * (inner + 0.5 * (f[i0] + f[i1]))
}

pub fn trapezoid(f: &[f64], ds: f64) -> f64 {
    trapezoid_range(f, ds, 0, f.len() - 1)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut t = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * t * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if order == 0 { 1.0 } else { p1 };
            dp = nf * (t * p - p0) / (t * t - 1.0);
            let step = p / dp;
            t -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -t;
        nodes[order - 1 - i] = t;
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule on `[a, b]`: returns `(points, weights)`.
pub fn composite_gauss(a: f64, b: f64, panels: usize, order: usize) -> (Vec<f64>, Vec<f64>) {
    let (t, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut pts = Vec::with_capacity(panels * order);
    let mut wts = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (ti, wi) in t.iter().zip(&w) {
            pts.push(mid + 0.5 * h * ti);
            wts.push(0.5 * h * wi);
        }
    }
    (pts, wts)
}

/// Symmetric tridiagonal matrix stored as diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.off[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * v[i + 1];
            }
            out[i] = acc;
        }
        out
    }

    /// `v^T T w`.
    pub fn bilinear(&self, v: &[f64], w: &[f64]) -> f64 {
        self.mul_vec(w).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.diag
            .iter()
            .chain(self.off.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Number of eigenvalues of the pencil `(a, b)` strictly below `shift`,
/// for `b` positive definite (Sylvester inertia of `a - shift * b`).
pub fn count_below(a: &SymTridiagonal, b: &SymTridiagonal, shift: f64) -> usize {
    let n = a.dim();
    let mut count = 0;
    let mut d_prev = 1.0;
    let tiny = f64::MIN_POSITIVE.sqrt();
    for i in 0..n {
        let mut d = a.diag[i] - shift * b.diag[i];
        if i > 0 {
            let e = a.off[i - 1] - shift * b.off[i - 1];
            d -= e * e / d_prev;
        }
        if d == 0.0 {
            d = -tiny;
        }
        if d < 0.0 {
            count += 1;
        }
        d_prev = d;
    }
    count
}

/// Solve `(a - shift * b) y = rhs` by Gaussian elimination with partial
/// pivoting on the tridiagonal band.
pub fn solve_shifted(a: &SymTridiagonal, b: &SymTridiagonal, shift: f64, rhs: &[f64]) -> Vec<f64> {
    let n = a.dim();
    if n == 1 {
        let d = a.diag[0] - shift * b.diag[0];
        return vec![rhs[0] / guard(d)];
    }
    // Rows hold (sub, diag, sup, sup2) in the usual gttrf layout.
    let mut dl: Vec<f64> = (0..n - 1).map(|i| a.off[i] - shift * b.off[i]).collect();
    let mut d: Vec<f64> = (0..n).map(|i| a.diag[i] - shift * b.diag[i]).collect();
    let mut du = dl.clone();
    let mut du2 = vec![0.0; n.saturating_sub(2)];
    let mut swap = vec![false; n - 1];
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            let piv = guard(d[i]);
            let fact = dl[i] / piv;
            dl[i] = fact;
            d[i + 1] -= fact * du[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            dl[i] = fact;
            let temp = du[i];
            du[i] = d[i + 1];
            d[i + 1] = temp - fact * d[i + 1];
            if i + 2 < n {
                du2[i] = du[i + 1];
                du[i + 1] *= -fact;
            }
            swap[i] = true;
        }
    }
    let mut y = rhs.to_vec();
    for i in 0..n - 1 {
        if swap[i] {
            y.swap(i, i + 1);
        }
        y[i + 1] -= dl[i] * y[i];
    }
    y[n - 1] /= guard(d[n - 1]);
    y[n - 2] = (y[n - 2] - du[n - 2] * y[n - 1]) / guard(d[n - 2]);
    for i in (0..n.saturating_sub(2)).rev() {
        y[i] = (y[i] - du[i] * y[i + 1] - du2[i] * y[i + 2]) / guard(d[i]);
    }
    y
}

fn guard(p: f64) -> f64 {
    if p == 0.0 {
        f64::EPSILON * f64::EPSILON
    } else {
        p
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Observed convergence order from residuals on a grid and its refinement
/// with half the spacing.
pub fn observed_order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_areas() {
        assert!((unit_sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((unit_sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        // S^8 area: 32 π^4 / 105
        assert!((unit_sphere_area(9) - 32.0 * PI.powi(4) / 105.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_rules_integrate_polynomials() {
        let (t, w) = gauss_legendre(8);
        for k in 0..16 {
            let exact = if k % 2 == 1 {
                0.0
            } else {
                2.0 / (k as f64 + 1.0)
            };
            let q: f64 = t.iter().zip(&w).map(|(t, w)| w * t.powi(k)).sum();
            assert!((q - exact).abs() < 1e-14, "k={k}");
        }
        let (p, w) = composite_gauss(0.0, PI, 4, 10);
        let q: f64 = p.iter().zip(&w).map(|(p, w)| w * p.sin()).sum();
        assert!((q - 2.0).abs() < 1e-14);
    }

    #[test]
    fn stencils_are_second_order() {
        let errs: Vec<f64> = [101usize, 201]
            .iter()
            .map(|&m| {
                let ds = 1.0 / (m - 1) as f64;
                let f: Vec<f64> = (0..m).map(|i| (i as f64 * ds).exp()).collect();
                let d1 = derivative(&f, ds);
                let d2 = second_derivative(&f, ds);
                f.iter()
                    .zip(d1.iter().zip(&d2))
                    .map(|(f, (a, b))| (a - f).abs().max((b - f).abs()))
                    .fold(0.0, f64::max)
            })
            .collect();
        let order = observed_order(errs[0], errs[1]);
        assert!((order - 2.0).abs() < 0.1, "order {order}");
    }

    #[test]
    fn tridiagonal_solve_and_inertia() {
        let a = SymTridiagonal {
            diag: vec![2.0, 2.0, 2.0, 2.0],
            off: vec![-1.0, -1.0, -1.0],
        };
        let b = SymTridiagonal {
            diag: vec![1.0; 4],
            off: vec![0.0; 3],
        };
        // eigenvalues 2 - 2 cos(kπ/5)
        let eig: Vec<f64> = (1..=4)
            .map(|k| 2.0 - 2.0 * (k as f64 * PI / 5.0).cos())
            .collect();
        assert_eq!(count_below(&a, &b, 0.0), 0);
        assert_eq!(count_below(&a, &b, eig[1] + 1e-9), 2);
        assert_eq!(count_below(&a, &b, 10.0), 4);
        let rhs = vec![1.0, -2.0, 0.5, 3.0];
        for shift in [0.3, eig[0] + 1e-3, 3.1] {
            let y = solve_shifted(&a, &b, shift, &rhs);
            let ay = a.mul_vec(&y);
            let by = b.mul_vec(&y);
            for i in 0..4 {
                assert!((ay[i] - shift * by[i] - rhs[i]).abs() < 1e-10);
            }
        }
    }
}
