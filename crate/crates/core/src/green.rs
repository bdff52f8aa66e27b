//! Dirichlet Laplace and Navier bi-Laplace Green functions on a ball.
//!
//! Normalisations: `G_Δ(x,y) = |x-y|^{2-N} - H_Δ(x,y)` and
//! `G(x,y) = |x-y|^{4-N} - H(x,y)`, so `-Δ_y G_Δ = c_N δ_x` with
//! `c_N = (N-2)|S^{N-1}|` and `Δ²_y G = γ̂ δ_x` with `γ̂ = 2(N-4)(N-2)|S^{N-1}|`.
//!
//! On the unit ball the Laplace kernels are Kelvin images. The biharmonic
//! regular part `H(x,·)` is the biharmonic function with `H = |x-σ|^{4-N}`
//! and `Δ_y H = -2(N-4)|x-σ|^{2-N}` on the sphere. Writing a biharmonic
//! function as `h + (1-|y|²)χ` with `h, χ` harmonic and solving the Euler
//! equation `(N + 2 r∂_r)χ = ·` by a radial integral turns `H` into one smooth
//! integral over `t ∈ [0,1]`. A Monte Carlo evaluation of the Poisson
//! extension plus Newton potential split is kept as an independent oracle.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constants::{dimension_params, QuadMethod, QuadratureSpec};
use crate::error::{Error, Result};
use crate::geometry::{boundary_frame, BallDomain};
use crate::mc::{self, McEstimate, Polar, Stream};
use crate::quadrature::{gauss5_unit, integrate_unit_with_layer, QuadOptions};
use crate::scaling::{ScalingReport, ScanPoint};
use crate::special::sphere_area;
use crate::vecops::{axpy, dist, dist_sq, dot, norm_sq, scale, sub};

/// Kernels on the unit ball centred at the origin.
pub mod unit {
    use super::*;

    pub(crate) const QUAD: QuadOptions = QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-12,
        max_intervals: 200,
    };

    /// `1 - 2x·y + |x|²|y|²`, equal to `|x|²|y - x*|²` and symmetric in `(x, y)`.
    pub fn kelvin(x: &[f64], y: &[f64]) -> f64 {
        (1.0 - 2.0 * dot(x, y) + norm_sq(x) * norm_sq(y)).max(0.0)
    }

    pub fn h_lap(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        kelvin(x, y).powf((2.0 - n) / 2.0)
    }

    pub fn g_lap(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        dist_sq(x, y).powf((2.0 - n) / 2.0) - h_lap(x, y)
    }

    /// `∫_0^1 t^{N/2-1} f(t) dt`, computed as `∫_0^1 2u^{N-1} f(u²) du` with
    /// breakpoints clustered towards `u = 1` at width `layer`.
    pub fn radial_moment(n: usize, f: impl Fn(f64) -> f64, layer: f64) -> f64 {
        let k = n as i32 - 1;
        integrate_unit_with_layer(|u| 2.0 * u.powi(k) * f(u * u), 0.5 * layer, QUAD).value
    }

    /// Regular part of the Navier Green function of `Δ²`.
    pub fn h_biharm(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let nf = n as f64;
        let nx2 = norm_sq(x);
        let ny2 = norm_sq(y);
        let c = dot(x, y);
        let m = nx2 * ny2;
        let d = |t: f64| (1.0 - 2.0 * t * c + t * t * m).max(f64::MIN_POSITIVE);
        let phi = d(1.0).powf((2.0 - nf) / 2.0);
        let boundary = (1.0 + nx2 - 2.0 * c) * phi;
        if ny2 >= 1.0 {
            return boundary;
        }
        let integral = radial_moment(
            n,
            |t| {
                let dt = d(t);
                dt.powf(-nf / 2.0) * ((nf - 2.0) * nx2 * (t * c - 1.0) + 0.5 * (nf - 4.0) * dt)
            },
            1.0 - m.sqrt(),
        );
        boundary + (1.0 - ny2) * integral
    }

    /// `Δ_y H(x,y) = -2(N-4) H_Δ(x,y)`.
    pub fn lap_y_h_biharm(x: &[f64], y: &[f64]) -> f64 {
        -2.0 * (x.len() as f64 - 4.0) * h_lap(x, y)
    }

    /// Poisson kernel `(1-|y|²)/(|S^{N-1}| |y-σ|^N)`.
    pub fn poisson_kernel(y: &[f64], sigma: &[f64]) -> f64 {
        let n = y.len();
        (1.0 - norm_sq(y)) / (sphere_area(n) * dist_sq(y, sigma).powf(n as f64 / 2.0))
    }
}

fn check_pair(dom: &BallDomain, x: &[f64], y: &[f64]) -> Result<()> {
    dom.check_inside(x)?;
    dom.check_inside(y)?;
    Ok(())
}

fn check_separated(dom: &BallDomain, x: &[f64], y: &[f64]) -> Result<()> {
    let r = dist(x, y);
    if r < 1e-8 * dom.radius {
        return Err(Error::Singularity(r));
    }
    Ok(())
}

/// Dirichlet Green function of `-Δ` with fundamental solution `|x-y|^{2-N}`.
pub fn g_lap(dom: &BallDomain, x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(dom, x, y)?;
    check_separated(dom, x, y)?;
    let n = dom.dim() as f64;
    Ok(dom.radius.powf(2.0 - n) * unit::g_lap(&dom.to_unit(x), &dom.to_unit(y)))
}

pub fn h_lap(dom: &BallDomain, x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(dom, x, y)?;
    let n = dom.dim() as f64;
    Ok(dom.radius.powf(2.0 - n) * unit::h_lap(&dom.to_unit(x), &dom.to_unit(y)))
}

/// Harmonic extension of boundary data to `y` by surface Monte Carlo.
pub fn poisson_extension<F>(dom: &BallDomain, data: F, y: &[f64], samples: usize, stream: Stream) -> Result<McEstimate>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    dom.check_dim(y)?;
    if !(dom.depth(y) > 0.0) {
        return Err(Error::InvalidPoint("Poisson extension needs a strictly interior point".into()));
    }
    let n = dom.dim();
    let yu = dom.to_unit(y);
    let area = sphere_area(n);
    let ray_weight = 0.75;
    Ok(mc::mean(stream, samples, |rng| {
        let u = mc::sphere_point(rng, n);
        let s = if rng.random::<f64>() < ray_weight { ray_exit(&yu, &u) } else { u };
        let q = ray_weight * ray_density(&yu, &s) + (1.0 - ray_weight) / area;
        let sigma = axpy(&dom.center, dom.radius, &s);
        unit::poisson_kernel(&yu, &s) * data(&sigma) / q
    }))
}

/// Point where the ray from `c` (inside the unit ball) along the unit vector
/// `u` leaves the ball.
fn ray_exit(c: &[f64], u: &[f64]) -> Vec<f64> {
    let cu = dot(c, u);
    let t = -cu + (cu * cu + 1.0 - norm_sq(c)).sqrt();
    axpy(c, t, u)
}

/// Surface density of [`ray_exit`] for uniform directions. It is at least half
/// the Poisson kernel at `c`, so it absorbs the kernel's peak.
fn ray_density(c: &[f64], sigma: &[f64]) -> f64 {
    (1.0 - dot(sigma, c)) / (sphere_area(c.len()) * dist_sq(sigma, c).powf(c.len() as f64 / 2.0))
}

/// Evaluator for the Navier Green function `G` and its regular part `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiharmonicGreen {
    pub domain: BallDomain,
    /// Constant with `Δ²_y G(x,·) = γ̂ δ_x`; see [`manufactured_solution_check`].
    pub gamma_hat: f64,
}

impl BiharmonicGreen {
    pub fn new(domain: BallDomain) -> Result<Self> {
        let dims = dimension_params(domain.dim())?;
        Ok(Self {
            gamma_hat: dims.biharmonic_fundamental_constant(),
            domain,
        })
    }

    pub fn with_gamma_hat(mut self, gamma_hat: f64) -> Self {
        self.gamma_hat = gamma_hat;
        self
    }

    fn n(&self) -> usize {
        self.domain.dim()
    }

    fn h_scale(&self) -> f64 {
        self.domain.radius.powf(4.0 - self.n() as f64)
    }

    /// `H(x,y)` by the radial representation.
    pub fn h(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_pair(&self.domain, x, y)?;
        Ok(self.h_scale() * unit::h_biharm(&self.domain.to_unit(x), &self.domain.to_unit(y)))
    }

    /// Unchecked `H` for points already known to lie in the closed ball.
    pub(crate) fn h_fast(&self, x: &[f64], y: &[f64]) -> f64 {
        if self.domain.is_unit() {
            unit::h_biharm(x, y)
        } else {
            self.h_scale() * unit::h_biharm(&self.domain.to_unit(x), &self.domain.to_unit(y))
        }
    }

    pub fn g(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_pair(&self.domain, x, y)?;
        check_separated(&self.domain, x, y)?;
        let n = self.n() as f64;
        Ok(dist_sq(x, y).powf((4.0 - n) / 2.0) - self.h(x, y)?)
    }

    /// Exact `Δ_y H(x,y)`.
    pub fn lap_y_h(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_pair(&self.domain, x, y)?;
        let n = self.n() as f64;
        Ok(self.domain.radius.powf(2.0 - n) * unit::lap_y_h_biharm(&self.domain.to_unit(x), &self.domain.to_unit(y)))
    }

    /// `Δ_y H(x,y)` by a central-difference Laplacian of [`Self::h`].
    pub fn lap_y_h_fd(&self, x: &[f64], y: &[f64], step: f64) -> Result<f64> {
        check_pair(&self.domain, x, y)?;
        let h0 = self.h_fast(x, y);
        let mut z = y.to_vec();
        let mut acc = 0.0;
        for i in 0..y.len() {
            z[i] = y[i] + step;
            acc += self.h_fast(x, &z);
            z[i] = y[i] - step;
            acc += self.h_fast(x, &z);
            z[i] = y[i];
            acc -= 2.0 * h0;
        }
        Ok(acc / (step * step))
    }

    /// `H(x,y)` from the split `Δ_y H = -2(N-4)H_Δ(x,·)`: the Poisson extension
    /// of `|x-σ|^{4-N}` plus `(2(N-4)/c_N) ∫_Ω G_Δ(y,z) H_Δ(x,z) dz`, both by
    /// Monte Carlo with half the samples each.
    pub fn h_split(&self, x: &[f64], y: &[f64], samples: usize, stream: Stream) -> Result<SplitEstimate> {
        check_pair(&self.domain, x, y)?;
        let n = self.n();
        let nf = n as f64;
        let half = (samples / 2).max(1);
        let boundary = poisson_extension(
            &self.domain,
            |s| dist_sq(x, s).powf((4.0 - nf) / 2.0),
            y,
            half,
            stream.child(0),
        )?;
        let c_n = (nf - 2.0) * sphere_area(n);
        let dom = &self.domain;
        let polar = Polar::new(n, 2.0 * dom.radius, 2.0);
        let volume = mc::mean(stream.child(1), half, |rng| {
            let z = polar.sample(rng, y);
            if !dom.contains(&z) {
                return 0.0;
            }
            let rho = dist(&z, y);
            if rho == 0.0 {
                return 0.0;
            }
            let gl = dom.radius.powf(2.0 - nf) * unit::g_lap(&dom.to_unit(y), &dom.to_unit(&z));
            let hl = dom.radius.powf(2.0 - nf) * unit::h_lap(&dom.to_unit(x), &dom.to_unit(&z));
            gl * hl / polar.density(rho)
        })
        .scaled(2.0 * (nf - 4.0) / c_n);
        Ok(SplitEstimate {
            total: boundary.plus(volume),
            boundary,
            volume,
        })
    }

    /// `∫_Ω G(x,y) f(y) dy` with polar sampling around `x`.
    pub fn newton_potential<F>(&self, x: &[f64], f: F, samples: usize, stream: Stream) -> Result<McEstimate>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        self.domain.check_inside(x)?;
        let n = self.n();
        let nf = n as f64;
        let dom = &self.domain;
        let area = sphere_area(n);
        let rel = sub(x, &dom.center);
        let rel2 = norm_sq(&rel);
        let r2 = dom.radius * dom.radius;
        let nodes = gauss5_unit();
        // Polar coordinates about x: a random direction θ (paired with -θ) and a
        // five-point Gauss rule in ρ/ρ_e(θ) along the chord to the boundary,
        // where ρ^{N-1}G is a polynomial plus a smooth term. Each Gauss node
        // counts as one sample of the budget.
        let ray = |theta: &[f64]| -> f64 {
            let b = dot(&rel, theta);
            let exit = -b + (b * b + r2 - rel2).max(0.0).sqrt();
            let mut acc = 0.0;
            for &(v, w) in &nodes {
                let rho = exit * v;
                let y = axpy(x, rho, theta);
                let g = rho.powf(4.0 - nf) - self.h_fast(x, &y);
                acc += w * rho.powf(nf - 1.0) * g * f(&y);
            }
            area * exit * acc
        };
        let directions = (samples / (2 * nodes.len())).max(2);
        let mut est = mc::mean(stream, directions, |rng| {
            let theta = mc::sphere_point(rng, n);
            0.5 * (ray(&theta) + ray(&scale(&theta, -1.0)))
        });
        est.samples = samples;
        Ok(est)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitEstimate {
    pub total: McEstimate,
    pub boundary: McEstimate,
    pub volume: McEstimate,
}

/// `H(x,y)`: radial representation for the deterministic methods, boundary
/// value split for Monte Carlo.
pub fn h_biharm(dom: &BallDomain, x: &[f64], y: &[f64], q: &QuadratureSpec) -> Result<McEstimate> {
    let green = BiharmonicGreen::new(dom.clone())?;
    match q.method {
        QuadMethod::MonteCarlo => {
            q.validate()?;
            let stream = Stream::new(q.seed, "green", "h_biharm");
            Ok(green.h_split(x, y, q.samples, stream)?.total)
        }
        _ => Ok(McEstimate::exact(green.h(x, y)?)),
    }
}

pub fn g_biharm(dom: &BallDomain, x: &[f64], y: &[f64], q: &QuadratureSpec) -> Result<McEstimate> {
    check_separated(dom, x, y)?;
    let h = h_biharm(dom, x, y, q)?;
    let n = dom.dim() as f64;
    Ok(h.scaled(-1.0).shifted(dist_sq(x, y).powf((4.0 - n) / 2.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedPoint {
    pub x: Vec<f64>,
    /// `∫_Ω G(x,y) Δ²w(y) dy`.
    pub integral: McEstimate,
    pub w: f64,
    /// `|integral/γ̂ - w|/|w|`, or the absolute error when `|w|` is tiny.
    pub error: f64,
    pub absolute: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManufacturedReport {
    pub gamma_hat: f64,
    /// `γ̂ / ((N-4)(N-2)|S^{N-1}|)`.
    pub ratio_to_tabulated: f64,
    pub calibration: Vec<ManufacturedPoint>,
    pub fresh: Vec<ManufacturedPoint>,
    pub max_fresh_error: f64,
}

/// `w(y) = (1-|ŷ|²)³` in unit coordinates `ŷ`, which has `w = Δw = 0` on the
/// sphere.
pub fn manufactured_w(dom: &BallDomain, y: &[f64]) -> f64 {
    (1.0 - norm_sq(&dom.to_unit(y))).powi(3)
}

/// `Δ²w = 24(N+2)(N - (N+4)|ŷ|²)/R⁴`.
pub fn manufactured_f(dom: &BallDomain, y: &[f64]) -> f64 {
    let n = dom.dim() as f64;
    24.0 * (n + 2.0) * (n - (n + 4.0) * norm_sq(&dom.to_unit(y))) / dom.radius.powi(4)
}

/// Calibrates `γ̂` on `calibration` points (least squares on relative
/// errors) and reports the reproduction error of `w` at `fresh` points.
pub fn manufactured_solution_check(
    green: &BiharmonicGreen,
    calibration: &[Vec<f64>],
    fresh: &[Vec<f64>],
    samples: usize,
    seed: u64,
) -> Result<ManufacturedReport> {
    if calibration.is_empty() {
        return Err(Error::InvalidArgument("manufactured check needs calibration points".into()));
    }
    let dom = &green.domain;
    let base = Stream::new(seed, "green", "manufactured");
    let mut idx = 0u64;
    let mut measure = |x: &Vec<f64>| -> Result<(McEstimate, f64)> {
        idx += 1;
        let est = green.newton_potential(x, |y| manufactured_f(dom, y), samples, base.child(idx))?;
        Ok((est, manufactured_w(dom, x)))
    };
    let cal: Vec<(Vec<f64>, McEstimate, f64)> = calibration
        .iter()
        .map(|x| measure(x).map(|(e, w)| (x.clone(), e, w)))
        .collect::<Result<_>>()?;
    // minimise Σ (I_k c / w_k - 1)² over c = 1/γ̂
    let (num, den) = cal.iter().fold((0.0, 0.0), |(a, b), (_, e, w)| {
        let r = e.value / w;
        (a + r, b + r * r)
    });
    let gamma_hat = den / num;
    let tabulated = dimension_params(dom.dim())?.gamma_n;
    let point = |x: Vec<f64>, e: McEstimate, w: f64| {
        let v = e.value / gamma_hat;
        let absolute = w.abs() < 1e-3;
        let error = if absolute { (v - w).abs() } else { ((v - w) / w).abs() };
        ManufacturedPoint {
            x,
            integral: e,
            w,
            error,
            absolute,
        }
    };
    let calibration: Vec<_> = cal.into_iter().map(|(x, e, w)| point(x, e, w)).collect();
    let fresh: Vec<ManufacturedPoint> = fresh
        .iter()
        .map(|x| measure(x).map(|(e, w)| point(x.clone(), e, w)))
        .collect::<Result<_>>()?;
    Ok(ManufacturedReport {
        gamma_hat,
        ratio_to_tabulated: gamma_hat / tabulated,
        max_fresh_error: fresh.iter().map(|p| p.error).fold(0.0, f64::max),
        calibration,
        fresh,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LahRow {
    pub depth: f64,
    /// `|H(x,y)|x̃-y|^{N-4} - 1|`.
    pub ratio_h: f64,
    /// `|Δ_y H(x,y) + 2(N-4)|x̃-y|^{2-N}|·|x̃-y|^{N-2}`, with `Δ_y H` by differences.
    pub ratio_lap_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LahReport {
    pub rows: Vec<LahRow>,
    pub h_fit: ScalingReport,
    pub lap_fit: ScalingReport,
}

/// Sweeps probe points `x = p + d·ν` (inward normal at the boundary point `p`)
/// and fits the decay of the reflected-point estimates for `H` and `Δ_y H`.
pub fn lah_sweep(green: &BiharmonicGreen, y: &[f64], boundary_point: &[f64], depths: &[f64]) -> Result<LahReport> {
    let dom = &green.domain;
    dom.check_on_boundary(boundary_point)?;
    dom.check_inside(y)?;
    let n = dom.dim() as f64;
    let inward = scale(&dom.outward_normal(boundary_point), -1.0);
    let step = 5e-3 * dom.radius;
    let mut rows = Vec::with_capacity(depths.len());
    for &d in depths {
        if !(d > 0.0 && d <= dom.collar_fraction * dom.radius) {
            return Err(Error::InvalidPoint(format!("probe depth {d} is outside the collar")));
        }
        let x = axpy(boundary_point, d, &inward);
        let seg = sub(y, boundary_point);
        let along = dot(&seg, &inward).clamp(0.0, d);
        if dist(y, &axpy(boundary_point, along, &inward)) < 2.0 * step {
            return Err(Error::InvalidPoint("evaluation point lies on the probe segment".into()));
        }
        let mirror = boundary_frame(dom, &x)?.mirror;
        let r = dist(&mirror, y);
        let h = green.h(&x, y)?;
        let lap = green.lap_y_h_fd(&x, y, step)?;
        rows.push(LahRow {
            depth: d,
            ratio_h: (h * r.powf(n - 4.0) - 1.0).abs(),
            ratio_lap_h: (lap + 2.0 * (n - 4.0) * r.powf(2.0 - n)).abs() * r.powf(n - 2.0),
        });
    }
    let fit = |f: fn(&LahRow) -> f64| ScalingReport::fit(rows.iter().map(|r| ScanPoint::new(r.depth, f(r), 0.0)).collect());
    Ok(LahReport {
        h_fit: fit(|r| r.ratio_h)?,
        lap_fit: fit(|r| r.ratio_lap_h)?,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryRow {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub h_xy: f64,
    pub h_yx: f64,
    pub split_xy: McEstimate,
    pub split_yx: McEstimate,
    /// `G(x,y)`, absent for coincident points.
    pub g_xy: Option<f64>,
    /// `|split_xy - split_yx|` measured in combined standard errors.
    pub split_sigmas: f64,
    /// Radial-representation value measured in standard errors of the split.
    pub oracle_sigmas: f64,
}

/// Symmetry of `H` and agreement between the two evaluation routes.
pub fn symmetry_check(green: &BiharmonicGreen, pairs: &[(Vec<f64>, Vec<f64>)], samples: usize, seed: u64) -> Result<Vec<SymmetryRow>> {
    let base = Stream::new(seed, "green", "symmetry");
    pairs
        .iter()
        .enumerate()
        .map(|(k, (x, y))| {
            let h_xy = green.h(x, y)?;
            let h_yx = green.h(y, x)?;
            let s_xy = green.h_split(x, y, samples, base.child(2 * k as u64))?.total;
            let s_yx = green.h_split(y, x, samples, base.child(2 * k as u64 + 1))?.total;
            let diff = s_xy.plus(s_yx.scaled(-1.0));
            Ok(SymmetryRow {
                g_xy: green.g(x, y).ok(),
                split_sigmas: diff.value.abs() / diff.stderr,
                oracle_sigmas: (s_xy.value - h_xy).abs() / s_xy.stderr,
                x: x.clone(),
                y: y.clone(),
                h_xy,
                h_yx,
                split_xy: s_xy,
                split_yx: s_yx,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionRow {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `∫_Ω G_Δ(x,z) G_Δ(z,y) dz`.
    pub composed: McEstimate,
    pub composed_swapped: McEstimate,
    pub g: f64,
    pub ratio: McEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionReport {
    pub rows: Vec<CompositionRow>,
    /// Inverse-variance weighted mean of the ratios.
    pub ratio: McEstimate,
    /// `c_N²/γ̂` implied by the normalisations.
    pub predicted_ratio: f64,
    /// Largest deviation of a single ratio from the mean, in its standard errors.
    pub max_sigmas: f64,
    pub max_symmetry_sigmas: f64,
}

fn composed_kernel(dom: &BallDomain, x: &[f64], y: &[f64], samples: usize, stream: Stream) -> McEstimate {
    let n = dom.dim();
    let nf = n as f64;
    let polar = Polar::new(n, 2.0 * dom.radius, 2.0);
    let s = dom.radius.powf(2.0 - nf);
    mc::mean(stream, samples, |rng| {
        let c = if rng.random::<bool>() { x } else { y };
        let z = polar.sample(rng, c);
        if !dom.contains(&z) {
            return 0.0;
        }
        let (rx, ry) = (dist(&z, x), dist(&z, y));
        if rx == 0.0 || ry == 0.0 {
            return 0.0;
        }
        let zu = dom.to_unit(&z);
        let gx = s * unit::g_lap(&dom.to_unit(x), &zu);
        let gy = s * unit::g_lap(&zu, &dom.to_unit(y));
        gx * gy / (0.5 * (polar.density(rx) + polar.density(ry)))
    })
}

/// `∫ G_Δ G_Δ` compared with `G` over several pairs.
pub fn composition_check(green: &BiharmonicGreen, pairs: &[(Vec<f64>, Vec<f64>)], samples: usize, seed: u64) -> Result<CompositionReport> {
    let dom = &green.domain;
    let base = Stream::new(seed, "green", "composition");
    let mut rows = Vec::with_capacity(pairs.len());
    for (k, (x, y)) in pairs.iter().enumerate() {
        check_pair(dom, x, y)?;
        check_separated(dom, x, y)?;
        let composed = composed_kernel(dom, x, y, samples, base.child(2 * k as u64));
        let composed_swapped = composed_kernel(dom, y, x, samples, base.child(2 * k as u64 + 1));
        let g = green.g(x, y)?;
        rows.push(CompositionRow {
            x: x.clone(),
            y: y.clone(),
            ratio: composed.scaled(1.0 / g),
            composed,
            composed_swapped,
            g,
        });
    }
    let (num, den) = rows.iter().fold((0.0, 0.0), |(a, b), r| {
        let w = 1.0 / (r.ratio.stderr * r.ratio.stderr);
        (a + w * r.ratio.value, b + w)
    });
    let mean = num / den;
    let n = dom.dim() as f64;
    let c_n = (n - 2.0) * sphere_area(dom.dim());
    let max_sigmas = rows
        .iter()
        .map(|r| (r.ratio.value - mean).abs() / r.ratio.stderr)
        .fold(0.0, f64::max);
    let max_symmetry_sigmas = rows
        .iter()
        .map(|r| {
            let d = r.composed.plus(r.composed_swapped.scaled(-1.0));
            d.value.abs() / d.stderr
        })
        .fold(0.0, f64::max);
    Ok(CompositionReport {
        rows,
        ratio: McEstimate {
            value: mean,
            stderr: den.powf(-0.5),
            samples: samples * pairs.len(),
        },
        predicted_ratio: c_n * c_n / green.gamma_hat,
        max_sigmas,
        max_symmetry_sigmas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn e1(n: usize, s: f64) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[0] = s;
        v
    }

    #[test]
    fn laplace_examples() {
        let dom = BallDomain::unit(5);
        let y = e1(5, 0.5);
        assert_relative_eq!(g_lap(&dom, &[0.0; 5], &y).unwrap(), 7.0, max_relative = 1e-14);
        assert_relative_eq!(h_lap(&dom, &[0.0; 5], &y).unwrap(), 1.0, max_relative = 1e-15);
        let x = e1(5, 0.3);
        let s = vec![0.0, 0.6, 0.8, 0.0, 0.0];
        assert!(g_lap(&dom, &x, &s).unwrap().abs() < 1e-14);
        assert_relative_eq!(h_lap(&dom, &x, &s).unwrap(), dist(&x, &s).powi(-3), max_relative = 1e-13);
        assert!(matches!(g_lap(&dom, &x, &x), Err(Error::Singularity(_))));
        assert!(g_lap(&dom, &e1(5, 1.2), &x).is_err());
    }

    #[test]
    fn h_at_center_closed_form() {
        let dom = BallDomain::unit(5);
        let green = BiharmonicGreen::new(dom).unwrap();
        for r in [0.0, 0.3, 0.7, 0.99] {
            let y = vec![0.0, r, 0.0, 0.0, 0.0];
            let expect = 1.0 + (1.0 - r * r) / 5.0;
            assert_relative_eq!(green.h(&[0.0; 5], &y).unwrap(), expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn h_boundary_values_and_laplacian() {
        for n in [5usize, 6, 8] {
            let green = BiharmonicGreen::new(BallDomain::unit(n)).unwrap();
            let mut x = vec![0.0; n];
            x[0] = 0.4;
            x[1] = -0.3;
            let mut s = vec![0.0; n];
            s[1] = 0.6;
            s[2] = 0.8;
            let nf = n as f64;
            assert_relative_eq!(green.h(&x, &s).unwrap(), dist(&x, &s).powf(4.0 - nf), max_relative = 1e-12);
            let mut y = vec![0.0; n];
            y[0] = -0.2;
            y[2] = 0.5;
            let fd = green.lap_y_h_fd(&x, &y, 5e-3).unwrap();
            assert_relative_eq!(fd, green.lap_y_h(&x, &y).unwrap(), max_relative = 1e-4);
        }
    }

    #[test]
    fn bilaplacian_of_h_vanishes() {
        let green = BiharmonicGreen::new(BallDomain::unit(5)).unwrap();
        let x = vec![0.5, 0.2, 0.0, -0.1, 0.3];
        let y = vec![-0.1, 0.3, 0.2, 0.0, 0.1];
        // Δ_y of the exact Δ_y H, which is harmonic
        let h = 1e-3;
        let mut acc = -10.0 * green.lap_y_h(&x, &y).unwrap();
        let mut z = y.clone();
        for i in 0..5 {
            for s in [h, -h] {
                z[i] = y[i] + s;
                acc += green.lap_y_h(&x, &z).unwrap();
            }
            z[i] = y[i];
        }
        assert!((acc / (h * h)).abs() < 1e-4);
    }

    #[test]
    fn general_ball_scaling() {
        let dom = BallDomain::new(vec![1.0, -2.0, 0.5, 0.0, 0.0], 2.5, 0.5).unwrap();
        let green = BiharmonicGreen::new(dom.clone()).unwrap();
        let x = vec![1.5, -1.0, 0.5, 0.3, 0.0];
        let s = axpy(&dom.center, 2.5, &[0.0, 0.0, 0.6, 0.0, -0.8]);
        assert_relative_eq!(green.h(&x, &s).unwrap(), dist(&x, &s).powi(-1), max_relative = 1e-12);
        assert!(g_lap(&dom, &x, &s).unwrap().abs() < 1e-13);
    }

    #[test]
    fn poisson_examples() {
        let dom = BallDomain::unit(5);
        let y = e1(5, 0.4);
        let st = Stream::new(1, "test", "poisson");
        let one = poisson_extension(&dom, |_| 1.0, &y, 100_000, st).unwrap();
        assert!(one.within_sigmas(1.0, 3.0), "{one:?}");
        let lin0 = poisson_extension(&dom, |s| s[0], &[0.0; 5], 100_000, st.child(1)).unwrap();
        assert!(lin0.within_sigmas(0.0, 3.0));
        let lin = poisson_extension(&dom, |s| s[0], &y, 100_000, st.child(2)).unwrap();
        assert!(lin.within_sigmas(0.4, 3.0), "{lin:?}");
        assert!(poisson_extension(&dom, |_| 1.0, &e1(5, 1.0), 10, st).is_err());
    }

    #[test]
    fn split_oracle_agrees_with_radial_representation() {
        let green = BiharmonicGreen::new(BallDomain::unit(5)).unwrap();
        let pairs = vec![
            (vec![0.5, 0.1, 0.0, 0.0, 0.2], vec![-0.2, 0.4, 0.1, 0.0, 0.0]),
            (vec![0.0; 5], vec![0.0; 5]),
            (vec![0.0, 0.0, 0.8, 0.0, 0.0], vec![0.1, 0.0, 0.5, 0.3, 0.0]),
        ];
        let rows = symmetry_check(&green, &pairs, 200_000, 9).unwrap();
        for r in rows {
            assert!(r.split_sigmas < 3.5, "{r:?}");
            assert!(r.oracle_sigmas < 3.5, "{r:?}");
            assert_relative_eq!(r.h_xy, r.h_yx, max_relative = 1e-10);
        }
        let s = green.h_split(&[0.0; 5], &[0.0; 5], 100_000, Stream::new(2, "t", "c")).unwrap();
        assert!(s.boundary.within_sigmas(1.0, 3.0) || (s.boundary.value - 1.0).abs() < 1e-12);
        assert!(s.volume.value > 0.0);
        assert!(s.volume.within_sigmas(0.2, 3.5), "{s:?}");
    }

    #[test]
    fn lah_slopes() {
        let green = BiharmonicGreen::new(BallDomain::unit(5)).unwrap();
        let rep = lah_sweep(&green, &[0.0; 5], &e1(5, 1.0), &[0.2, 0.1, 0.05, 0.025]).unwrap();
        assert!((rep.h_fit.slope - 1.0).abs() < 0.3, "{rep:?}");
        assert!((rep.lap_fit.slope - 1.0).abs() < 0.3, "{rep:?}");
        assert!(rep.rows.last().unwrap().ratio_h < rep.rows[0].ratio_h);
        assert!(lah_sweep(&green, &[0.0; 5], &e1(5, 1.0), &[0.7, 0.1, 0.05]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn laplace_green_symmetric_positive(x in proptest::collection::vec(-0.44f64..0.44, 5), y in proptest::collection::vec(-0.44f64..0.44, 5)) {
            prop_assume!(dist(&x, &y) > 1e-3);
            let dom = BallDomain::unit(5);
            let a = g_lap(&dom, &x, &y).unwrap();
            let b = g_lap(&dom, &y, &x).unwrap();
            prop_assert!(a > 0.0);
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        #[test]
        fn biharmonic_green_symmetric_positive(x in proptest::collection::vec(-0.44f64..0.44, 5), y in proptest::collection::vec(-0.44f64..0.44, 5)) {
            prop_assume!(dist(&x, &y) > 1e-3);
            let green = BiharmonicGreen::new(BallDomain::unit(5)).unwrap();
            let hxy = green.h(&x, &y).unwrap();
            let hyx = green.h(&y, &x).unwrap();
            prop_assert!(hxy > 0.0);
            prop_assert!((hxy - hyx).abs() <= 1e-10 * hxy);
            let g = green.g(&x, &y).unwrap();
            prop_assert!(g > 0.0 && g < dist(&x, &y).powi(-1));
        }
    }
}
