//! Reduced energies `F¹` (k bubbles at distinct anchors) and `F²` (a
//! sign-changing pair on one anchor), their critical points, and the
//! Monte Carlo checks that tie them to the full energy `J_ε`.

use nalgebra::{Matrix2, Matrix4, SymmetricEigen, Vector4};
use serde::{Deserialize, Serialize};

use crate::bubbles::{f_ell, Bubble};
use crate::constants::UniversalConstants;
use crate::error::{Error, Result};
use crate::geometry::{BallDomain, WeightField};
use crate::mc::{Component, McEstimate, Mixture, RadialProfile, Stream};
use crate::projection::{dual_exponent, peaked_mixture, Ansatz};
use crate::scaling::{ScalingReport, ScanPoint};
use crate::sigma::{Config, DeltaScaling};
use crate::vecops::{dot, scale};

/// Whether the `log d` term of `F²` carries the factor `a(ζ⁰)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LogVariant {
    /// `-a(ζ⁰)(log d₁ + log d₂)ω₃`; homogeneous of degree one in `a`.
    #[default]
    Weighted,
    /// `-(log d₁ + log d₂)ω₃`.
    Plain,
}

/// `a(ζ⁰)` and `∇a(ζ⁰)·ν(ζ⁰)` at a boundary anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorData {
    pub a0: f64,
    pub s: f64,
}

impl AnchorData {
    pub fn new(a0: f64, s: f64) -> Self {
        Self { a0, s }
    }

    pub fn at(dom: &BallDomain, a: &WeightField, anchor: &[f64]) -> Result<Self> {
        dom.check_on_boundary(anchor)?;
        let nu = scale(&dom.outward_normal(anchor), -1.0);
        Ok(Self {
            a0: a.value(anchor),
            s: dot(&a.gradient(anchor), &nu),
        })
    }

    #[cfg(test)]
    fn scaled(self, lambda: f64) -> Self {
        Self {
            a0: lambda * self.a0,
            s: lambda * self.s,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
    }
}

fn gap(c: &UniversalConstants) -> f64 {
    c.dims.n as f64 - 4.0
}

/// `(d, t)`-independent part of one `F¹` block: `a(ζ⁰)(pγ₃ - γ₁)/p²`.
pub fn f1_constant(c: &UniversalConstants, a0: f64) -> f64 {
    let p = c.dims.p;
    a0 * (p * c.gamma3.value - c.gamma1.value) / (p * p)
}

/// One anchor's `(d, t)`-dependent part of `F¹`.
pub fn f1_block(c: &UniversalConstants, anchor: AnchorData, d: f64, t: f64) -> Result<f64> {
    positive("d", d)?;
    positive("t", t)?;
    let p = c.dims.p;
    let k = gap(c);
    let (g1, g2) = (c.gamma1.value, c.gamma2.value);
    Ok((p - 2.0) / (2.0 * p) * t * anchor.s * g1 + anchor.a0 / 2.0 * (d / (2.0 * t)).powf(k) * g2
        - anchor.a0 * k / (2.0 * p) * d.ln() * g1)
}

/// `(∂_d, ∂_t)` of [`f1_block`].
pub fn f1_block_gradient(c: &UniversalConstants, anchor: AnchorData, d: f64, t: f64) -> Result<[f64; 2]> {
    positive("d", d)?;
    positive("t", t)?;
    let p = c.dims.p;
    let k = gap(c);
    let q = (d / (2.0 * t)).powf(k);
    let big_a = anchor.a0 * c.gamma2.value / 2.0;
    let big_b = anchor.a0 * k * c.gamma1.value / (2.0 * p);
    Ok([
        (big_a * k * q - big_b) / d,
        (p - 2.0) / (2.0 * p) * anchor.s * c.gamma1.value - big_a * k * q / t,
    ])
}

fn f1_block_hessian(c: &UniversalConstants, anchor: AnchorData, d: f64, t: f64) -> Matrix2<f64> {
    let p = c.dims.p;
    let k = gap(c);
    let q = (d / (2.0 * t)).powf(k);
    let big_a = anchor.a0 * c.gamma2.value / 2.0;
    let big_b = anchor.a0 * k * c.gamma1.value / (2.0 * p);
    let dd = (big_a * k * (k - 1.0) * q + big_b) / (d * d);
    let dt = -big_a * k * k * q / (d * t);
    let tt = big_a * k * (k + 1.0) * q / (t * t);
    Matrix2::new(dd, dt, dt, tt)
}

/// `F¹` of a k-anchor configuration, constant blocks included.
pub fn f1_eval(dom: &BallDomain, a: &WeightField, c: &UniversalConstants, anchors: &[Vec<f64>], d: &[f64], t: &[f64]) -> Result<f64> {
    if anchors.len() != d.len() || anchors.len() != t.len() || anchors.is_empty() {
        return Err(Error::InvalidArgument("anchors, d and t must have the same non-zero length".into()));
    }
    let mut total = 0.0;
    for ((z, &di), &ti) in anchors.iter().zip(d).zip(t) {
        let data = AnchorData::at(dom, a, z)?;
        total += f1_constant(c, data.a0) + f1_block(c, data, di, ti)?;
    }
    Ok(total)
}

/// Location and diagnostics of a critical point of `F¹` or `F²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointReport {
    pub theorem: u8,
    pub anchor: AnchorData,
    pub variant: Option<LogVariant>,
    pub d_star: Vec<f64>,
    pub t_star: Vec<f64>,
    /// Gradient norm in logarithmic coordinates.
    pub gradient_norm: f64,
    pub hessian_eigenvalues: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub value: f64,
    pub grid: Option<GridCheck>,
}

impl CriticalPointReport {
    pub fn is_minimum(&self) -> bool {
        self.converged && self.hessian_eigenvalues.iter().all(|&e| e > 0.0)
    }

    /// `δ_i = d_i ε^{(N-3)/(N-4)}` at the critical point.
    pub fn predicted_delta(&self, n: usize, eps: f64) -> Vec<f64> {
        self.d_star.iter().map(|&d| crate::sigma::delta_of(n, d, eps)).collect()
    }
}

/// Best node of a logarithmic grid and whether it lies within one cell of a
/// reported point in every coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCheck {
    pub nodes_per_axis: usize,
    pub lower: f64,
    pub upper: f64,
    pub best: Vec<f64>,
    pub best_value: f64,
    pub contains_reported: bool,
}

fn log_grid(lower: f64, upper: f64, nodes: usize) -> Vec<f64> {
    let (l, u) = (lower.ln(), upper.ln());
    (0..nodes)
        .map(|i| (l + (u - l) * i as f64 / (nodes - 1) as f64).exp())
        .collect()
}

fn within_cell(best: &[f64], reported: &[f64], lower: f64, upper: f64, nodes: usize) -> bool {
    let h = (upper.ln() - lower.ln()) / (nodes - 1) as f64;
    best.iter().zip(reported).all(|(b, r)| (b.ln() - r.ln()).abs() <= h * (1.0 + 1e-9))
}

/// Closed-form minimiser of one `F¹` block with its log-coordinate diagnostics.
/// Requires `∇a·ν > 0`.
pub fn f1_critical(c: &UniversalConstants, anchor: AnchorData) -> Result<CriticalPointReport> {
    positive("a(ζ⁰)", anchor.a0)?;
    if !(anchor.s > 0.0) {
        return Err(Error::NoMinimum(format!(
            "the normal derivative ∇a·ν = {} must be positive for an interior minimum",
            anchor.s
        )));
    }
    let p = c.dims.p;
    let k = gap(c);
    let t = anchor.a0 * k / ((p - 2.0) * anchor.s);
    let d = 2.0 * t * (c.gamma1.value / (p * c.gamma2.value)).powf(1.0 / k);
    let log_grad = |d: f64, t: f64| -> Result<[f64; 2]> {
        let g = f1_block_gradient(c, anchor, d, t)?;
        Ok([d * g[0], t * g[1]])
    };
    let g = log_grad(d, t)?;
    let h = f1_block_hessian(c, anchor, d, t);
    let h_log = Matrix2::new(d * d * h[(0, 0)] + g[0], d * t * h[(0, 1)], d * t * h[(1, 0)], t * t * h[(1, 1)] + g[1]);
    let eig = SymmetricEigen::new(h_log).eigenvalues;
    let mut eigenvalues: Vec<f64> = eig.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);

    let grid_nodes = 200;
    let (lo, hi) = (1e-3, 10.0);
    let axis = log_grid(lo, hi, grid_nodes);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for &dg in &axis {
        for &tg in &axis {
            let v = f1_block(c, anchor, dg, tg)?;
            if v < best.0 {
                best = (v, dg, tg);
            }
        }
    }
    let gnorm = (g[0] * g[0] + g[1] * g[1]).sqrt();
    Ok(CriticalPointReport {
        theorem: 1,
        anchor,
        variant: None,
        d_star: vec![d],
        t_star: vec![t],
        gradient_norm: gnorm,
        converged: gnorm < 1e-10,
        hessian_eigenvalues: eigenvalues,
        iterations: 0,
        value: f1_constant(c, anchor.a0) + f1_block(c, anchor, d, t)?,
        grid: Some(GridCheck {
            nodes_per_axis: grid_nodes,
            lower: lo,
            upper: hi,
            contains_reported: within_cell(&[best.1, best.2], &[d, t], lo, hi, grid_nodes),
            best: vec![best.1, best.2],
            best_value: f1_constant(c, anchor.a0) + best.0,
        }),
    })
}

/// Parameters `(d₁, d₂, t₁, t₂)` of a pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    pub d: [f64; 2],
    pub t: [f64; 2],
}

impl PairParams {
    pub fn new(d: [f64; 2], t: [f64; 2]) -> Result<Self> {
        for v in d.iter().chain(&t) {
            positive("pair parameter", *v)?;
        }
        if t[0] == t[1] {
            return Err(Error::SingularConfiguration("t₁ = t₂".into()));
        }
        Ok(Self { d, t })
    }

    fn to_array(self) -> [f64; 4] {
        [self.d[0], self.d[1], self.t[0], self.t[1]]
    }

    /// `(u₁, u₂, v, w)` with `d_i = e^{u_i}`, `t₁ = e^v`, `t₂ = t₁ + e^w`.
    pub fn to_log(self) -> Result<[f64; 4]> {
        if !(self.t[1] > self.t[0]) {
            return Err(Error::InvalidArgument("log coordinates need t₁ < t₂".into()));
        }
        Ok([self.d[0].ln(), self.d[1].ln(), self.t[0].ln(), (self.t[1] - self.t[0]).ln()])
    }

    pub fn from_log(z: [f64; 4]) -> Self {
        let t1 = z[2].exp();
        Self {
            d: [z[0].exp(), z[1].exp()],
            t: [t1, t1 + z[3].exp()],
        }
    }
}

fn log_coefficient(c: &UniversalConstants, anchor: AnchorData, variant: LogVariant) -> f64 {
    match variant {
        LogVariant::Weighted => anchor.a0 * c.omega3,
        LogVariant::Plain => c.omega3,
    }
}

/// `F²(d, t)`.
pub fn f2_eval(c: &UniversalConstants, anchor: AnchorData, variant: LogVariant, x: &PairParams) -> Result<f64> {
    let x = PairParams::new(x.d, x.t)?;
    let k = gap(c);
    let [d1, d2, t1, t2] = x.to_array();
    let interaction = 2.0 * (d1 * d2).powf(k / 2.0) * ((t1 - t2).abs().powf(-k) - (t1 + t2).powf(-k));
    let selfs = (d1 / (2.0 * t1)).powf(k) + (d2 / (2.0 * t2)).powf(k);
    Ok(anchor.s * (t1 + t2) * c.omega2 - log_coefficient(c, anchor, variant) * (d1.ln() + d2.ln())
        + anchor.a0 * (interaction + selfs) * c.omega4)
}

/// `(∂_{d₁}, ∂_{d₂}, ∂_{t₁}, ∂_{t₂})F²`.
pub fn f2_grad(c: &UniversalConstants, anchor: AnchorData, variant: LogVariant, x: &PairParams) -> Result<[f64; 4]> {
    Ok(f2_derivatives(c, anchor, variant, x)?.0)
}

fn f2_derivatives(c: &UniversalConstants, anchor: AnchorData, variant: LogVariant, x: &PairParams) -> Result<([f64; 4], Matrix4<f64>)> {
    let x = PairParams::new(x.d, x.t)?;
    let k = gap(c);
    let e = k / 2.0;
    let [d1, d2, t1, t2] = x.to_array();
    let big_a = anchor.a0 * c.omega4;
    let cl = log_coefficient(c, anchor, variant);
    let mut g = [0.0; 4];
    let mut h = Matrix4::zeros();

    g[2] += anchor.s * c.omega2;
    g[3] += anchor.s * c.omega2;

    g[0] -= cl / d1;
    g[1] -= cl / d2;
    h[(0, 0)] += cl / (d1 * d1);
    h[(1, 1)] += cl / (d2 * d2);

    // 2A (d₁d₂)^{k/2} φ(t₁,t₂)
    let pp = (d1 * d2).powf(e);
    let sigma = (t2 - t1).signum();
    let dt = (t2 - t1).abs();
    let st = t1 + t2;
    let phi = dt.powf(-k) - st.powf(-k);
    let phi1 = k * sigma * dt.powf(-k - 1.0) + k * st.powf(-k - 1.0);
    let phi2 = -k * sigma * dt.powf(-k - 1.0) + k * st.powf(-k - 1.0);
    let kk = k * (k + 1.0);
    let phi11 = kk * dt.powf(-k - 2.0) - kk * st.powf(-k - 2.0);
    let phi12 = -kk * dt.powf(-k - 2.0) - kk * st.powf(-k - 2.0);
    let pd = [e * pp / d1, e * pp / d2];
    let pdd = [[e * (e - 1.0) * pp / (d1 * d1), e * e * pp / (d1 * d2)], [e * e * pp / (d1 * d2), e * (e - 1.0) * pp / (d2 * d2)]];
    let pt = [phi1, phi2];
    let ptt = [[phi11, phi12], [phi12, phi11]];
    for i in 0..2 {
        g[i] += 2.0 * big_a * pd[i] * phi;
        g[2 + i] += 2.0 * big_a * pp * pt[i];
        for j in 0..2 {
            h[(i, j)] += 2.0 * big_a * pdd[i][j] * phi;
            h[(2 + i, 2 + j)] += 2.0 * big_a * pp * ptt[i][j];
            h[(i, 2 + j)] += 2.0 * big_a * pd[i] * pt[j];
            h[(2 + j, i)] += 2.0 * big_a * pd[i] * pt[j];
        }
    }

    // A (d_i/(2t_i))^k
    for (i, (di, ti)) in [(d1, t1), (d2, t2)].into_iter().enumerate() {
        let q = (di / (2.0 * ti)).powf(k);
        g[i] += big_a * k * q / di;
        g[2 + i] -= big_a * k * q / ti;
        h[(i, i)] += big_a * k * (k - 1.0) * q / (di * di);
        h[(2 + i, 2 + i)] += big_a * k * (k + 1.0) * q / (ti * ti);
        h[(i, 2 + i)] -= big_a * k * k * q / (di * ti);
        h[(2 + i, i)] -= big_a * k * k * q / (di * ti);
    }
    Ok((g, h))
}

/// Gradient and Hessian of `F²` in the coordinates `(u₁, u₂, v, w)`.
fn f2_log_derivatives(c: &UniversalConstants, anchor: AnchorData, variant: LogVariant, z: [f64; 4]) -> Result<(Vector4<f64>, Matrix4<f64>)> {
    let x = PairParams::from_log(z);
    let (g, h) = f2_derivatives(c, anchor, variant, &x)?;
    let (d1, d2, t1, ew) = (x.d[0], x.d[1], x.t[0], z[3].exp());
    let mut jac = Matrix4::zeros();
    jac[(0, 0)] = d1;
    jac[(1, 1)] = d2;
    jac[(2, 2)] = t1;
    jac[(3, 2)] = t1;
    jac[(3, 3)] = ew;
    let gx = Vector4::from(g);
    let gz = jac.transpose() * gx;
    let mut hz = jac.transpose() * h * jac;
    hz[(0, 0)] += g[0] * d1;
    hz[(1, 1)] += g[1] * d2;
    hz[(2, 2)] += (g[2] + g[3]) * t1;
    hz[(3, 3)] += g[3] * ew;
    Ok((gz, hz))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub grid_nodes: usize,
    pub grid_lower: f64,
    pub grid_upper: f64,
    pub start: Option<PairParams>,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tol: 1e-10,
            grid_nodes: 20,
            grid_lower: 1e-3,
            grid_upper: 10.0,
            start: None,
        }
    }
}

fn sorted_eigenvalues(h: Matrix4<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Newton iteration with backtracking for `F²` in `(u₁, u₂, v, w)`. A
/// non-positive Hessian is shifted by a multiple of the identity until it
/// admits a Cholesky factor.
fn f2_newton(c: &UniversalConstants, anchor: AnchorData, variant: LogVariant, start: [f64; 4], opts: &MinimizeOptions) -> Result<(Vec<f64>, usize, bool, f64)> {
    let f = |z: [f64; 4]| f2_eval(c, anchor, variant, &PairParams::from_log(z));
    let mut z = start;
    let mut fz = f(z)?;
    for it in 0..opts.max_iterations {
        let (g, h) = f2_log_derivatives(c, anchor, variant, z)?;
        let gnorm = g.norm();
        if gnorm < opts.gradient_tol {
            return Ok((z.to_vec(), it, true, gnorm));
        }
        let mut shift = 0.0;
        let step = loop {
            let m = h + Matrix4::identity() * shift;
            if let Some(ch) = m.cholesky() {
                break -ch.solve(&g);
            }
            shift = if shift == 0.0 { 1e-6 * (1.0 + h.norm()) } else { shift * 10.0 };
        };
        let slope = g.dot(&step);
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha > 1e-12 {
            let trial: [f64; 4] = std::array::from_fn(|i| z[i] + alpha * step[i]);
            if let Ok(ft) = f(trial) {
                let gt = f2_log_derivatives(c, anchor, variant, trial).map(|d| d.0.norm());
                // near the optimum F² changes fall below rounding, so a
                // smaller gradient is accepted as progress too
                if ft <= fz + 1e-4 * alpha * slope || (alpha == 1.0 && matches!(gt, Ok(n) if n < gnorm && gnorm < 1e-6)) {
                    z = trial;
                    fz = ft;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Ok((z.to_vec(), it, false, gnorm));
        }
        if z.iter().any(|v| v.abs() > 50.0) {
            return Ok((z.to_vec(), it, false, gnorm));
        }
    }
    let (g, _) = f2_log_derivatives(c, anchor, variant, z)?;
    Ok((z.to_vec(), opts.max_iterations, g.norm() < opts.gradient_tol, g.norm()))
}

/// Best node of the logarithmic grid over `(d₁, d₂, t₁, t₂)` with `t₁ < t₂`.
pub fn f2_grid_search(c: &UniversalConstants, anchor: AnchorData, variant: LogVariant, opts: &MinimizeOptions) -> Result<(PairParams, f64)> {
    let axis = log_grid(opts.grid_lower, opts.grid_upper, opts.grid_nodes);
    let mut best: Option<(PairParams, f64)> = None;
    for &d1 in &axis {
        for &d2 in &axis {
            for (i, &t1) in axis.iter().enumerate() {
                for &t2 in &axis[i + 1..] {
                    let x = PairParams { d: [d1, d2], t: [t1, t2] };
                    let v = f2_eval(c, anchor, variant, &x)?;
                    if best.as_ref().is_none_or(|b| v < b.1) {
                        best = Some((x, v));
                    }
                }
            }
        }
    }
    best.ok_or_else(|| Error::InvalidArgument("empty grid".into()))
}

/// Interior minimiser of `F²` (requires `∇a·ν > 0`), started from the `F¹`
/// block minimiser and checked against a logarithmic grid search.
pub fn f2_minimize(c: &UniversalConstants, anchor: AnchorData, variant: LogVariant, opts: &MinimizeOptions) -> Result<CriticalPointReport> {
    positive("a(ζ⁰)", anchor.a0)?;
    if !(anchor.s > 0.0) {
        return Err(Error::NoMinimum(format!(
            "the normal derivative ∇a·ν = {} must be positive for an interior minimum",
            anchor.s
        )));
    }
    let start = match opts.start {
        Some(s) => s,
        None => {
            let block = f1_critical(c, anchor)?;
            let (d, t) = (block.d_star[0], block.t_star[0]);
            PairParams { d: [d, d], t: [t, 2.0 * t] }
        }
    };
    let (z, iterations, converged, gnorm) = f2_newton(c, anchor, variant, start.to_log()?, opts)?;
    let zz = [z[0], z[1], z[2], z[3]];
    let x = PairParams::from_log(zz);
    let (_, h) = f2_log_derivatives(c, anchor, variant, zz)?;
    let (best, best_value) = f2_grid_search(c, anchor, variant, opts)?;
    let reported = x.to_array();
    let best_arr = best.to_array();
    Ok(CriticalPointReport {
        theorem: 2,
        anchor,
        variant: Some(variant),
        d_star: x.d.to_vec(),
        t_star: x.t.to_vec(),
        gradient_norm: gnorm,
        hessian_eigenvalues: sorted_eigenvalues(h),
        iterations,
        converged,
        value: f2_eval(c, anchor, variant, &x)?,
        grid: Some(GridCheck {
            nodes_per_axis: opts.grid_nodes,
            lower: opts.grid_lower,
            upper: opts.grid_upper,
            contains_reported: within_cell(&best_arr, &reported, opts.grid_lower, opts.grid_upper, opts.grid_nodes),
            best: best_arr.to_vec(),
            best_value,
        }),
    })
}

/// Leading-order energy predicted by the reduced expansion:
/// `Σ a_i γ₁((p-2)/(2p) - ε log ε (N-3)/(2p)) + εF¹` for k bubbles, and
/// `a(ζ⁰)ω₁(ε) + εF²` for a pair.
pub fn expansion_prediction(dom: &BallDomain, a: &WeightField, c: &UniversalConstants, cfg: &Config, variant: LogVariant) -> Result<f64> {
    let eps = cfg.eps();
    let nf = c.dims.n as f64;
    let p = c.dims.p;
    match cfg {
        Config::K(k) => {
            let mut total = 0.0;
            for pl in &k.placements {
                let data = AnchorData::at(dom, a, &pl.anchor)?;
                total += data.a0 * c.gamma1.value * ((p - 2.0) / (2.0 * p) - eps * eps.ln() * (nf - 3.0) / (2.0 * p))
                    + eps * (f1_constant(c, data.a0) + f1_block(c, data, pl.d, pl.t)?);
            }
            Ok(total)
        }
        Config::Pair(pair) => {
            let data = AnchorData::at(dom, a, &pair.anchor)?;
            let x = PairParams::new(pair.d, pair.t)?;
            Ok(data.a0 * c.omega1(eps) + eps * f2_eval(c, data, variant, &x)?)
        }
    }
}

/// Monte Carlo value of `J_ε(V) = ½∫a|ΔV|² - (p-ε)^{-1}∫a|V|^{p-ε}`.
///
/// Since `V = ΔV = 0` on the boundary, `∫a|ΔV|² = ∫V Δ(aΔV)`, and
/// `Δ(aΔV) = aΔ²V + 2∇a·∇ΔV + ΔaΔV` with `Δ²V = Σ±U_i^{(N+4)/(N-4)}`.
/// The `aΔ²V` part and the nonlinear term are sampled from the bubble
/// profiles. The weight-derivative part is sampled from polar laws around
/// the centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyEstimate {
    pub epsilon: f64,
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
    pub concentrated: McEstimate,
    pub weight_terms: McEstimate,
}

pub fn energy_numeric(dom: &BallDomain, a: &WeightField, cfg: &Config, samples: usize, seed: u64) -> Result<EnergyEstimate> {
    let v = Ansatz::from_config(dom, cfg)?;
    let eps = cfg.eps();
    let n = dom.dim();
    let nf = n as f64;
    let p = crate::constants::dimension_params(n)?.p;
    let bubbles: Vec<&Bubble> = v.terms.iter().map(|t| &t.1.bubble).collect();
    let stream = Stream::new(seed, "reduced", "energy").child(eps.to_bits());

    let profile_mix = crate::projection::bubble_mixture(&bubbles, nf);
    let concentrated = profile_mix.integrate(stream.child(0), samples, |y| {
        if !dom.contains(y) {
            return 0.0;
        }
        let val = v.eval(y);
        let w = a.value(y);
        0.5 * w * val * v.bilaplacian(y) - w * val.abs().powf(p - eps) / (p - eps)
    });

    let centers: Vec<Vec<f64>> = bubbles.iter().map(|b| b.xi.clone()).collect();
    let mut comps = peaked_mixture(dom, &centers, 0.5);
    let core = RadialProfile::new(n, nf - 1.0);
    for b in &bubbles {
        comps.push((
            1.0,
            Component::Profile {
                profile: core.clone(),
                center: b.xi.clone(),
                scale: b.delta,
            },
        ));
    }
    let weight_mix = Mixture::new(comps);
    let weight_terms = weight_mix.integrate(stream.child(1), samples, |y| {
        if !dom.contains(y) {
            return 0.0;
        }
        let ga = a.gradient(y);
        let la = a.laplacian(y);
        0.5 * v.eval(y) * (2.0 * dot(&ga, &v.grad_laplacian(y)) + la * v.laplacian(y))
    });
    let total = concentrated.plus(weight_terms);
    Ok(EnergyEstimate {
        epsilon: eps,
        value: total.value,
        stderr: total.stderr,
        samples,
        seed,
        concentrated,
        weight_terms,
    })
}

/// One row of the energy comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub epsilon: f64,
    pub j_numeric: f64,
    pub stderr: f64,
    pub j_predicted: f64,
    /// `|J_ε(V) - prediction|/ε`.
    pub diff_over_eps: f64,
    pub diff_over_eps_stderr: f64,
    /// `(J_ε(V) - a(ζ⁰)ω₁(ε))/ε` for a pair, or the analogue for k bubbles;
    /// compares with `F` at the configuration.
    pub reduced_numeric: f64,
    pub reduced_predicted: f64,
}

pub fn energy_rows(
    dom: &BallDomain,
    a: &WeightField,
    c: &UniversalConstants,
    cfg: &Config,
    eps_grid: &[f64],
    variant: LogVariant,
    samples: usize,
    seed: u64,
) -> Result<Vec<EnergyRow>> {
    eps_grid
        .iter()
        .map(|&eps| {
            let cfg = cfg.with_eps(eps);
            let est = energy_numeric(dom, a, &cfg, samples, seed)?;
            let pred = expansion_prediction(dom, a, c, &cfg, variant)?;
            let reduced = reduced_value(dom, a, c, &cfg, variant)?;
            let zeroth = pred - eps * reduced;
            Ok(EnergyRow {
                epsilon: eps,
                j_numeric: est.value,
                stderr: est.stderr,
                j_predicted: pred,
                diff_over_eps: (est.value - pred).abs() / eps,
                diff_over_eps_stderr: est.stderr / eps,
                reduced_numeric: (est.value - zeroth) / eps,
                reduced_predicted: reduced,
            })
        })
        .collect()
}

/// `F¹` or `F²` of a configuration (the `ε`-coefficient of the expansion,
/// with the `ε log ε` part excluded).
pub fn reduced_value(dom: &BallDomain, a: &WeightField, c: &UniversalConstants, cfg: &Config, variant: LogVariant) -> Result<f64> {
    match cfg {
        Config::K(k) => {
            let anchors: Vec<Vec<f64>> = k.placements.iter().map(|p| p.anchor.clone()).collect();
            let d: Vec<f64> = k.placements.iter().map(|p| p.d).collect();
            let t: Vec<f64> = k.placements.iter().map(|p| p.t).collect();
            f1_eval(dom, a, c, &anchors, &d, &t)
        }
        Config::Pair(pair) => {
            let data = AnchorData::at(dom, a, &pair.anchor)?;
            f2_eval(c, data, variant, &PairParams::new(pair.d, pair.t)?)
        }
    }
}

/// `‖Δ(aΔV) - a f_ε(V)‖_{L^{2N/(N+4)}}` with a delta-method error bar.
pub fn error_norm(dom: &BallDomain, a: &WeightField, cfg: &Config, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let v = Ansatz::from_config(dom, cfg)?;
    let eps = cfg.eps();
    let n = dom.dim();
    let nf = n as f64;
    let q = dual_exponent(n);
    let bubbles: Vec<&Bubble> = v.terms.iter().map(|t| &t.1.bubble).collect();
    let centers: Vec<Vec<f64>> = bubbles.iter().map(|b| b.xi.clone()).collect();
    let m = (nf - q * (nf - 1.0)).max(0.25);
    let mut comps = peaked_mixture(dom, &centers, m);
    let profile = RadialProfile::new(n, nf);
    for b in &bubbles {
        comps.push((
            2.0,
            Component::Profile {
                profile: profile.clone(),
                center: b.xi.clone(),
                scale: b.delta,
            },
        ));
    }
    let mix = Mixture::new(comps);
    let stream = Stream::new(seed, "reduced", "error_norm").child(eps.to_bits());
    let est = mix.integrate(stream, samples, |y| {
        if !dom.contains(y) {
            return 0.0;
        }
        let val = v.eval(y);
        let w = a.value(y);
        let e = w * (v.bilaplacian(y) - f_ell(val, eps, n)) + 2.0 * dot(&a.gradient(y), &v.grad_laplacian(y))
            + a.laplacian(y) * v.laplacian(y);
        e.abs().powf(q)
    });
    let norm = est.value.max(0.0).powf(1.0 / q);
    let se = if est.value > 0.0 { norm / (q * est.value) * est.stderr } else { f64::INFINITY };
    Ok((norm, se))
}

/// [`error_norm`] along an `ε` grid, fitted against `ε`.
pub fn error_norm_scan(dom: &BallDomain, a: &WeightField, cfg: &Config, eps_grid: &[f64], samples: usize, seed: u64) -> Result<ScalingReport> {
    if eps_grid.len() < 3 {
        return Err(Error::InvalidArgument("an ε scan needs at least three points".into()));
    }
    let points = eps_grid
        .iter()
        .map(|&eps| {
            let (norm, se) = error_norm(dom, a, &cfg.with_eps(eps), samples, seed)?;
            Ok(ScanPoint::new(eps, norm, se))
        })
        .collect::<Result<Vec<_>>>()?;
    ScalingReport::fit(points)
}

/// The same family with `δ_i = d_i ε` in place of the theorem's scaling.
pub fn misscaled(cfg: &Config) -> Config {
    cfg.with_scaling(DeltaScaling::Linear)
}
