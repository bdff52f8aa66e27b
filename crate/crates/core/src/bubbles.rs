use serde::{Deserialize, Serialize};

use crate::constants::{dimension_params, DimensionParams};
use crate::error::{Error, Result};
use crate::vecops::{dist_sq, sub};

/// `U_{δ,ξ}(x) = α_N (δ/(δ² + |x-ξ|²))^{(N-4)/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bubble {
    pub delta: f64,
    pub xi: Vec<f64>,
    #[serde(skip)]
    dims: Option<DimensionParams>,
}

impl Bubble {
    pub fn new(delta: f64, xi: Vec<f64>) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidArgument(format!("bubble scale must be positive, got {delta}")));
        }
        let dims = dimension_params(xi.len())?;
        Ok(Self {
            delta,
            xi,
            dims: Some(dims),
        })
    }

    pub fn dims(&self) -> DimensionParams {
        self.dims.clone().unwrap_or_else(|| dimension_params(self.xi.len()).expect("valid dimension"))
    }

    pub fn n(&self) -> usize {
        self.xi.len()
    }

    fn half_gap(&self) -> f64 {
        (self.n() as f64 - 4.0) / 2.0
    }

    fn alpha(&self) -> f64 {
        match &self.dims {
            Some(d) => d.alpha,
            None => self.dims().alpha,
        }
    }

    /// `α_N δ^{(N-4)/2}`, the prefactor shared by all bubble formulas.
    pub fn amplitude(&self) -> f64 {
        self.alpha() * self.delta.powf(self.half_gap())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let q = self.delta * self.delta + dist_sq(x, &self.xi);
        self.amplitude() * q.powf(-self.half_gap())
    }

    /// `ΔU` from the radial profile.
    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let a = self.half_gap();
        let n = self.n() as f64;
        let r2 = dist_sq(x, &self.xi);
        let q = self.delta * self.delta + r2;
        self.amplitude() * q.powf(-a - 2.0) * (-2.0 * a * n * q + 4.0 * a * (a + 1.0) * r2)
    }

    /// `∇ΔU`.
    pub fn grad_laplacian(&self, x: &[f64]) -> Vec<f64> {
        // ΔU = A[-4a q^{-a-1} - 2a(N-2)δ² q^{-a-2}], q = δ² + r²
        let a = self.half_gap();
        let n = self.n() as f64;
        let d2 = self.delta * self.delta;
        let q = d2 + dist_sq(x, &self.xi);
        let dq = self.amplitude()
            * (4.0 * a * (a + 1.0) * q.powf(-a - 2.0) + 2.0 * a * (n - 2.0) * (a + 2.0) * d2 * q.powf(-a - 3.0));
        sub(x, &self.xi).into_iter().map(|v| 2.0 * v * dq).collect()
    }

    /// `U^{(N+4)/(N-4)}`, the right-hand side of the limit equation.
    pub fn source(&self, x: &[f64]) -> f64 {
        let q = self.delta * self.delta + dist_sq(x, &self.xi);
        let a = self.half_gap();
        let p1 = (self.n() as f64 + 4.0) / (self.n() as f64 - 4.0);
        self.amplitude().powf(p1) * q.powf(-a * p1)
    }

    /// Kernel element `ψ⁰` (`j = 0`, the δ-derivative) or `ψʲ` (the
    /// `ξ_j`-derivative, `j` 1-based).
    pub fn kernel(&self, j: usize, x: &[f64]) -> Result<f64> {
        let n = self.n();
        if j > n {
            return Err(Error::IndexOutOfRange {
                index: j,
                min: 0,
                max: n,
            });
        }
        let a = self.half_gap();
        let d = self.delta;
        let r2 = dist_sq(x, &self.xi);
        let q = d * d + r2;
        let nf = n as f64;
        let alpha = self.alpha();
        Ok(if j == 0 {
            alpha * a * d.powf((nf - 6.0) / 2.0) * (r2 - d * d) * q.powf(-(nf - 2.0) / 2.0)
        } else {
            alpha * (nf - 4.0) * d.powf(a) * (x[j - 1] - self.xi[j - 1]) * q.powf(-(nf - 2.0) / 2.0)
        })
    }
}

/// `U_{δ,ξ}(x)`.
pub fn u_eval(b: &Bubble, x: &[f64]) -> f64 {
    b.eval(x)
}

pub fn u_laplacian(b: &Bubble, x: &[f64]) -> f64 {
    b.laplacian(x)
}

pub fn kernel_eval(b: &Bubble, j: usize, x: &[f64]) -> Result<f64> {
    b.kernel(j, x)
}

/// Central-difference Laplacian of the analytic `ΔU` minus `U^{(N+4)/(N-4)}`.
pub fn limit_equation_residual(b: &Bubble, x: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let l0 = b.laplacian(x);
    let mut y = x.to_vec();
    let mut acc = 0.0;
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let lp = b.laplacian(&y);
        y[i] = x[i] - h;
        let lm = b.laplacian(&y);
        y[i] = x[i];
        acc += lp - 2.0 * l0 + lm;
    }
    Ok(acc / (h * h) - b.source(x))
}

/// Nested central-difference bilaplacian of `U` itself, minus
/// `U^{(N+4)/(N-4)}`.
pub fn fd_bilaplacian_residual(b: &Bubble, x: &[f64], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let lap = |y: &[f64]| {
        let mut z = y.to_vec();
        let mut acc = -2.0 * y.len() as f64 * b.eval(y);
        for i in 0..y.len() {
            z[i] = y[i] + h;
            acc += b.eval(&z);
            z[i] = y[i] - h;
            acc += b.eval(&z);
            z[i] = y[i];
        }
        acc / (h * h)
    };
    let mut y = x.to_vec();
    let mut acc = -2.0 * x.len() as f64 * lap(x);
    for i in 0..x.len() {
        y[i] = x[i] + h;
        acc += lap(&y);
        y[i] = x[i] - h;
        acc += lap(&y);
        y[i] = x[i];
    }
    Ok(acc / (h * h) - b.source(x))
}

/// `f_ℓ(s) = |s|^{8/(N-4) - ℓ} s`.
pub fn f_ell(s: f64, ell: f64, n: usize) -> f64 {
    let e = 8.0 / (n as f64 - 4.0) - ell;
    if s == 0.0 {
        0.0
    } else {
        s.abs().powf(e) * s
    }
}

/// One level of Richardson extrapolation on a central difference with
/// the step `ε_mach^{1/3}·max(1, |t|)`.
pub fn richardson_derivative(f: impl Fn(f64) -> f64, t: f64) -> f64 {
    let h = f64::EPSILON.cbrt() * t.abs().max(1.0);
    let d = |h: f64| (f(t + h) - f(t - h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scaling::{ScalingReport, ScanPoint};
    use crate::vecops::norm;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn origin(n: usize) -> Vec<f64> {
        vec![0.0; n]
    }

    #[test]
    fn examples_n5() {
        let b = Bubble::new(1.0, origin(5)).unwrap();
        assert_relative_eq!(b.eval(&origin(5)), 1.7892, epsilon = 1e-4);
        // -2aN·α with a = 1/2, confirmed by a Richardson second difference
        assert_relative_eq!(b.laplacian(&origin(5)), -5.0 * b.dims().alpha, max_relative = 1e-14);
        // radial symmetry: ΔU(0) = N·∂²U/∂x₁², extrapolated second difference
        let f = |s: f64| b.eval(&[s, 0.0, 0.0, 0.0, 0.0]);
        let d2 = |h: f64| (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
        let fd = 5.0 * (4.0 * d2(5e-4) - d2(1e-3)) / 3.0;
        assert_relative_eq!(b.laplacian(&origin(5)), fd, max_relative = 1e-6);
        assert_relative_eq!(b.kernel(0, &origin(5)).unwrap(), -0.8946, epsilon = 1e-4);
        for j in 1..=5 {
            assert_eq!(b.kernel(j, &origin(5)).unwrap(), 0.0);
        }
        assert!(b.kernel(6, &origin(5)).is_err());
        let small = Bubble::new(0.01, origin(5)).unwrap();
        assert_relative_eq!(small.eval(&origin(5)), 17.892, epsilon = 1e-3);
        assert!(Bubble::new(0.0, origin(5)).is_err());
        assert!(Bubble::new(1.0, origin(4)).is_err());
        let far = vec![1e4, 0.0, 0.0, 0.0, 0.0];
        assert!(b.laplacian(&far).abs() < 1e-10);
    }

    #[test]
    fn f_ell_examples() {
        assert_eq!(f_ell(1.0, 0.0, 5), 1.0);
        assert_eq!(f_ell(-1.0, 0.3, 5), -1.0);
        assert_relative_eq!(f_ell(2.0, 0.0, 5), 512.0, max_relative = 1e-15);
        let b = Bubble::new(0.7, origin(6)).unwrap();
        let x = vec![0.1, 0.2, 0.0, 0.0, 0.3, 0.0];
        assert_relative_eq!(f_ell(b.eval(&x), 0.0, 6), b.source(&x), max_relative = 1e-13);
    }

    #[test]
    fn laplacian_matches_fd_at_second_order() {
        let b = Bubble::new(0.8, vec![0.1, 0.0, -0.2, 0.3, 0.0]).unwrap();
        let x = vec![0.5, 0.3, 0.1, -0.2, 0.4];
        let exact = b.laplacian(&x);
        let pts: Vec<ScanPoint> = [0.04, 0.02, 0.01]
            .iter()
            .map(|&h| {
                let mut acc = 0.0;
                let mut y = x.clone();
                for i in 0..5 {
                    y[i] = x[i] + h;
                    acc += b.eval(&y);
                    y[i] = x[i] - h;
                    acc += b.eval(&y);
                    y[i] = x[i];
                }
                let fd = (acc - 10.0 * b.eval(&x)) / (h * h);
                ScanPoint::new(h, fd - exact, 0.0)
            })
            .collect();
        let r = ScalingReport::fit(pts).unwrap();
        assert!((r.slope - 2.0).abs() < 0.1, "slope {}", r.slope);
    }

    #[test]
    fn grad_laplacian_matches_fd() {
        let b = Bubble::new(0.3, vec![0.1, 0.0, -0.2, 0.3, 0.0, 0.1]).unwrap();
        let x = vec![0.5, 0.3, 0.1, -0.2, 0.4, 0.0];
        let g = b.grad_laplacian(&x);
        for i in 0..6 {
            let fd = richardson_derivative(
                |t| {
                    let mut y = x.clone();
                    y[i] = t;
                    b.laplacian(&y)
                },
                x[i],
            );
            assert_relative_eq!(g[i], fd, max_relative = 1e-7);
        }
    }

    #[test]
    fn residual_converges_at_order_two() {
        let b = Bubble::new(1.0, origin(5)).unwrap();
        let pts: Vec<ScanPoint> = [0.04, 0.02, 0.01]
            .iter()
            .map(|&h| ScanPoint::new(h, limit_equation_residual(&b, &origin(5), h).unwrap(), 0.0))
            .collect();
        let r = ScalingReport::fit(pts).unwrap();
        assert!((r.slope - 2.0).abs() < 0.3);
        assert!(limit_equation_residual(&b, &origin(5), 0.0).is_err());
        let b = Bubble::new(0.5, vec![0.2, -0.1, 0.0, 0.0, 0.3]).unwrap();
        let x = vec![0.4, 0.3, -0.2, 0.1, 0.0];
        let rel = limit_equation_residual(&b, &x, 1e-3).unwrap() / b.source(&x);
        assert!(rel.abs() < 1e-4, "{rel}");
    }

    fn tuple() -> impl Strategy<Value = (f64, Vec<f64>, Vec<f64>)> {
        (5usize..9).prop_flat_map(|n| {
            (
                0.05f64..2.0,
                proptest::collection::vec(-1.0f64..1.0, n),
                proptest::collection::vec(-1.0f64..1.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn scale_covariance((delta, xi, x) in tuple()) {
            let n = xi.len();
            let b = Bubble::new(delta, xi.clone()).unwrap();
            let unit = Bubble::new(1.0, origin(n)).unwrap();
            let z: Vec<f64> = x.iter().zip(&xi).map(|(a, c)| (a - c) / delta).collect();
            let expect = delta.powf(-(n as f64 - 4.0) / 2.0) * unit.eval(&z);
            prop_assert!((b.eval(&x) - expect).abs() <= 1e-12 * expect);
        }

        #[test]
        fn positive_and_radially_decreasing((delta, xi, x) in tuple()) {
            let b = Bubble::new(delta, xi.clone()).unwrap();
            let dir = sub(&x, &xi);
            prop_assume!(norm(&dir) > 1e-6);
            let mut prev = f64::INFINITY;
            for k in 0..20 {
                let p: Vec<f64> = xi.iter().zip(&dir).map(|(c, d)| c + d * k as f64 * 0.25).collect();
                let v = b.eval(&p);
                prop_assert!(v > 0.0 && v < prev);
                prev = v;
            }
        }

        #[test]
        fn kernels_are_derivatives((delta, xi, x) in tuple()) {
            let b = Bubble::new(delta, xi.clone()).unwrap();
            let n = xi.len();
            let u = b.eval(&x);
            let fd0 = richardson_derivative(|d| Bubble::new(d, xi.clone()).unwrap().eval(&x), delta);
            let k0 = b.kernel(0, &x).unwrap();
            prop_assert!((fd0 - k0).abs() <= 1e-6 * k0.abs().max(1e-6 * u / delta));
            for j in 1..=n {
                let fd = richardson_derivative(|t| {
                    let mut c = xi.clone();
                    c[j - 1] = t;
                    Bubble::new(delta, c).unwrap().eval(&x)
                }, xi[j - 1]);
                let k = b.kernel(j, &x).unwrap();
                prop_assert!((fd - k).abs() <= 1e-6 * k.abs().max(1e-6 * u / delta));
            }
        }
    }
}
