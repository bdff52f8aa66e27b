//! Projected bubbles `PU` (the Navier solution of `Δ²PU = U^{(N+4)/(N-4)}`)
//! and the integrals describing their interaction with the boundary.
//!
//! On the sphere `δ² + |σ-ξ|² = λ|σ-ξ'|²` for a point `ξ'` on the ray of `ξ`,
//! so the boundary traces of `U` and `ΔU` are powers of `|σ-ξ'|`. Their
//! harmonic extensions are Kelvin-type closed forms. That gives `ΔPU`
//! exactly and `PU` through one radial integral. [`ProjectedBubble::oracle`]
//! evaluates `PU` independently by Monte Carlo over the Green representation.

use serde::{Deserialize, Serialize};

use crate::bubbles::{f_ell, Bubble};
use crate::constants::{dimension_params, UniversalConstants};
use crate::error::{Error, Result};
use crate::geometry::{BallDomain, WeightField};
use crate::green::{unit, BiharmonicGreen};
use crate::mc::{self, Component, McEstimate, Mixture, Polar, RadialProfile, Stream};
use crate::scaling::{ScalingReport, ScanPoint};
use crate::sigma::{Config, ConfigPair, DeltaScaling, Placement};
use crate::vecops::{axpy, dist, dist_sq, dot, norm, norm_sq, scale, sub};

/// Unit-ball data of one projected bubble.
#[derive(Debug, Clone, PartialEq)]
struct UnitProjection {
    nf: f64,
    a: f64,
    bubble: Bubble,
    xp: Vec<f64>,
    s2: f64,
    s: f64,
    c1: f64,
    c2: f64,
    cf: f64,
}

impl UnitProjection {
    fn new(bubble: Bubble) -> Self {
        let n = bubble.n();
        let nf = n as f64;
        let a = (nf - 4.0) / 2.0;
        let d2 = bubble.delta * bubble.delta;
        let r = norm(&bubble.xi);
        let b = 1.0 + d2 + r * r;
        let p = (1.0 - r).powi(2) + d2;
        let q = (1.0 + r).powi(2) + d2;
        let disc = (p * q).sqrt();
        let lam = 0.5 * (b + disc);
        let s = r / lam;
        let one_minus_s = (p + disc) / (b + disc);
        let one_minus_s2 = one_minus_s * (1.0 + s);
        let amp = bubble.amplitude();
        Self {
            nf,
            a,
            xp: scale(&bubble.xi, 1.0 / lam),
            s2: s * s,
            s,
            c1: -2.0 * (nf - 4.0) * amp * lam.powf(-a - 1.0),
            c2: -(nf - 4.0) * (nf - 2.0) * d2 * amp * lam.powf(-a - 2.0) / one_minus_s2,
            cf: amp * lam.powf(-a),
            bubble,
        }
    }

    fn dprime(&self, z: &[f64]) -> f64 {
        (1.0 - 2.0 * dot(&self.xp, z) + self.s2 * norm_sq(z)).max(f64::MIN_POSITIVE)
    }

    /// Harmonic extension of the boundary trace of `ΔU`.
    fn h_g(&self, z: &[f64]) -> f64 {
        let d = self.dprime(z);
        let nf = self.nf;
        self.c1 * d.powf((2.0 - nf) / 2.0) + self.c2 * (1.0 - self.s2 * norm_sq(z)) * d.powf(-nf / 2.0)
    }

    fn grad_h_g(&self, z: &[f64]) -> Vec<f64> {
        let d = self.dprime(z);
        let nf = self.nf;
        let dm = d.powf(-nf / 2.0);
        let k = 1.0 - self.s2 * norm_sq(z);
        let grad_d: Vec<f64> = z.iter().zip(&self.xp).map(|(zi, xi)| 2.0 * (self.s2 * zi - xi)).collect();
        let coef = self.c1 * (2.0 - nf) / 2.0 * dm - self.c2 * (nf / 2.0) * k * dm / d;
        grad_d
            .iter()
            .zip(z)
            .map(|(gd, zi)| coef * gd - 2.0 * self.c2 * self.s2 * zi * dm)
            .collect()
    }

    fn laplacian(&self, z: &[f64]) -> f64 {
        self.bubble.laplacian(z) - self.h_g(z)
    }

    fn grad_laplacian(&self, z: &[f64]) -> Vec<f64> {
        sub(&self.bubble.grad_laplacian(z), &self.grad_h_g(z))
    }

    /// `U - PU`, the biharmonic function with the traces of `U` and `ΔU`.
    fn correction(&self, z: &[f64]) -> f64 {
        let nf = self.nf;
        let c = dot(&self.xp, z);
        let z2 = norm_sq(z);
        let m = self.s2 * z2;
        let boundary = self.cf * (1.0 + self.s2 - 2.0 * c) * self.dprime(z).powf((2.0 - nf) / 2.0);
        if z2 >= 1.0 {
            return boundary;
        }
        let integral = unit::radial_moment(
            self.bubble.n(),
            |t| {
                let dt = (1.0 - 2.0 * t * c + t * t * m).max(f64::MIN_POSITIVE);
                let dm = dt.powf(-nf / 2.0);
                self.cf * (2.0 - nf) * self.s2 * (t * c - 1.0) * dm
                    + 0.25 * (self.c1 * dt * dm + self.c2 * (1.0 - t * t * m) * dm)
            },
            1.0 - self.s * z2.sqrt(),
        );
        boundary - (1.0 - z2) * integral
    }
}

/// `PU_{δ,ξ}` on a ball.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedBubble {
    pub bubble: Bubble,
    pub domain: BallDomain,
    unit: UnitProjection,
    green: BiharmonicGreen,
}

impl ProjectedBubble {
    pub fn new(bubble: Bubble, domain: BallDomain) -> Result<Self> {
        if bubble.n() != domain.dim() {
            return Err(Error::InvalidPoint("bubble and domain dimensions differ".into()));
        }
        if !domain.contains(&bubble.xi) {
            return Err(Error::InvalidPoint("bubble centre must be interior".into()));
        }
        let r = domain.radius;
        let unit_bubble = Bubble::new(bubble.delta / r, domain.to_unit(&bubble.xi))?;
        Ok(Self {
            unit: UnitProjection::new(unit_bubble),
            green: BiharmonicGreen::new(domain.clone())?,
            bubble,
            domain,
        })
    }

    pub fn with_green(mut self, green: BiharmonicGreen) -> Self {
        self.green = green;
        self
    }

    fn a(&self) -> f64 {
        self.unit.a
    }

    fn r(&self) -> f64 {
        self.domain.radius
    }

    fn z(&self, x: &[f64]) -> Vec<f64> {
        self.domain.to_unit(x)
    }

    pub fn u(&self, x: &[f64]) -> f64 {
        self.bubble.eval(x)
    }

    /// `PU(x)`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.bubble.eval(x) - self.r().powf(-self.a()) * self.unit.correction(&self.z(x))
    }

    /// `U(x) - PU(x)`.
    pub fn correction(&self, x: &[f64]) -> f64 {
        self.r().powf(-self.a()) * self.unit.correction(&self.z(x))
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        self.r().powf(-self.a() - 2.0) * self.unit.laplacian(&self.z(x))
    }

    pub fn grad_laplacian(&self, x: &[f64]) -> Vec<f64> {
        scale(&self.unit.grad_laplacian(&self.z(x)), self.r().powf(-self.a() - 3.0))
    }

    /// `U(x) - α_N δ^{(N-4)/2} H(x, ξ)`.
    pub fn asymptotic(&self, x: &[f64]) -> Result<f64> {
        Ok(self.bubble.eval(x) - self.bubble.amplitude() * self.green.h(x, &self.bubble.xi)?)
    }

    fn sample_source<R: rand::Rng + ?Sized>(&self, profile: &RadialProfile, rng: &mut R) -> Vec<f64> {
        axpy(&self.bubble.xi, self.bubble.delta, &profile.sample_unit(rng))
    }

    /// `R_{δ,ξ}(x) = PU(x) - U(x) + α_N δ^{(N-4)/2} H(x,ξ)` by Monte Carlo over
    /// `(1/γ̂)∫_Ω G(x,y) U^{(N+4)/(N-4)}(y) dy`, sampling `y` from the exactly
    /// normalised profile of `U^{(N+4)/(N-4)}` with antithetic pairs about `ξ`.
    pub fn remainder_oracle(&self, x: &[f64], samples: usize, stream: Stream) -> Result<McEstimate> {
        self.domain.check_inside(x)?;
        let n = self.bubble.n();
        let nf = n as f64;
        let xi = &self.bubble.xi;
        let h_x_xi = self.green.h(x, xi)?;
        let profile = RadialProfile::new(n, (nf + 4.0) / 2.0);
        let term = |y: &[f64]| -> f64 {
            if self.domain.contains(y) {
                self.green.h_fast(x, y) - h_x_xi
            } else {
                dist_sq(x, y).powf((4.0 - nf) / 2.0) - h_x_xi
            }
        };
        let amp = self.bubble.amplitude();
        Ok(mc::mean(stream, samples, |rng| {
            let y = self.sample_source(&profile, rng);
            let y2: Vec<f64> = xi.iter().zip(&y).map(|(c, v)| 2.0 * c - v).collect();
            0.5 * (term(&y) + term(&y2))
        })
        .scaled(-amp))
    }

    /// `PU(x)` by Monte Carlo. Returns `U - α δ^a H(x,ξ) + R` rescaled by the
    /// ratio of the exact `γ̂` to the evaluator's calibrated one.
    pub fn oracle(&self, x: &[f64], samples: usize, stream: Stream) -> Result<McEstimate> {
        let exact_gamma_hat = dimension_params(self.bubble.n())?.biharmonic_fundamental_constant();
        let kappa = exact_gamma_hat / self.green.gamma_hat;
        let r = self.remainder_oracle(x, samples, stream)?;
        Ok(r.shifted(self.asymptotic(x)?).scaled(kappa))
    }

    /// `-ΔPU(x) = (1/c_N) ∫_Ω G_Δ(x,y) U^{(N+4)/(N-4)}(y) dy` by Monte Carlo.
    pub fn laplacian_oracle(&self, x: &[f64], samples: usize, stream: Stream) -> Result<McEstimate> {
        self.domain.check_inside(x)?;
        let n = self.bubble.n();
        let nf = n as f64;
        let c_n = (nf - 2.0) * crate::special::sphere_area(n);
        let profile = RadialProfile::new(n, (nf + 4.0) / 2.0);
        let polar = Polar::new(n, 2.0 * self.r(), 2.0);
        let delta = self.bubble.delta;
        let xi = self.bubble.xi.clone();
        let dom = &self.domain;
        // half the draws from the source profile, half from a polar law at x
        Ok(mc::mean(stream, samples, |rng| {
            use rand::Rng;
            let y = if rng.random::<bool>() {
                self.sample_source(&profile, rng)
            } else {
                polar.sample(rng, x)
            };
            if !dom.contains(&y) || dist(&y, x) == 0.0 {
                return 0.0;
            }
            let q = 0.5 * (profile.density(dist_sq(&y, &xi), delta) + polar.density(dist(&y, x)));
            let g = dom.radius.powf(2.0 - nf) * unit::g_lap(&dom.to_unit(x), &dom.to_unit(&y));
            g * self.bubble.source(&y) / q
        })
        .scaled(-1.0 / c_n))
    }
}

pub fn pu_asymptotic(pb: &ProjectedBubble, x: &[f64]) -> Result<f64> {
    pb.asymptotic(x)
}

pub fn pu_oracle(pb: &ProjectedBubble, x: &[f64], samples: usize, seed: u64) -> Result<McEstimate> {
    pb.oracle(x, samples, Stream::new(seed, "projection", "pu_oracle"))
}

/// Signed sum of projected bubbles.
#[derive(Debug, Clone)]
pub struct Ansatz {
    pub terms: Vec<(f64, ProjectedBubble)>,
    pub domain: BallDomain,
}

impl Ansatz {
    pub fn new(dom: &BallDomain, placements: &[Placement], eps: f64, scaling: DeltaScaling) -> Result<Self> {
        let terms = placements
            .iter()
            .map(|p| Ok((p.sign, ProjectedBubble::new(p.bubble(eps, scaling)?, dom.clone())?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            terms,
            domain: dom.clone(),
        })
    }

    pub fn from_config(dom: &BallDomain, cfg: &Config) -> Result<Self> {
        Self::new(dom, &cfg.placements(), cfg.eps(), cfg.scaling())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(s, pb)| s * pb.eval(x)).sum()
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(s, pb)| s * pb.laplacian(x)).sum()
    }

    pub fn grad_laplacian(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for (s, pb) in &self.terms {
            g = axpy(&g, *s, &pb.grad_laplacian(x));
        }
        g
    }

    /// `Δ²V = Σ ±U_i^{(N+4)/(N-4)}`.
    pub fn bilaplacian(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(s, pb)| s * pb.bubble.source(x)).sum()
    }
}

/// `ansatz_eval`: `V(x) = Σ (-1)^{b_i} PU_i(x)`.
pub fn ansatz_eval(dom: &BallDomain, cfg: &Config, x: &[f64]) -> Result<f64> {
    dom.check_inside(x)?;
    Ok(Ansatz::from_config(dom, cfg)?.eval(x))
}

/// A Monte Carlo integral with the prediction it is compared with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralEstimate {
    pub name: String,
    pub epsilon: f64,
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
    pub eta: f64,
    pub prediction: f64,
    /// First-order quantity compared with `coefficient` (usually
    /// `(value - leading)/ε`).
    pub first_order: f64,
    pub first_order_stderr: f64,
    pub coefficient: f64,
}

impl IntegralEstimate {
    /// `first_order / coefficient`.
    pub fn ratio(&self) -> f64 {
        self.first_order / self.coefficient
    }
}

/// Inputs shared by the boundary-layer integrals.
#[derive(Debug, Clone)]
pub struct AsymptoticSetup<'a> {
    pub domain: &'a BallDomain,
    pub weight: &'a WeightField,
    pub constants: &'a UniversalConstants,
    pub samples: usize,
    pub seed: u64,
}

impl AsymptoticSetup<'_> {
    fn stream(&self, check: &str, eps: f64) -> Stream {
        Stream::new(self.seed, "projection", check).child(eps.to_bits())
    }

    fn anchor_data(&self, p: &Placement) -> (f64, f64) {
        let a0 = self.weight.value(&p.anchor);
        let s = dot(&self.weight.gradient(&p.anchor), &p.inward_normal);
        (a0, s)
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0) {
        return Err(Error::SingularConfiguration(format!("localisation radius η = {eta} must be positive")));
    }
    Ok(())
}

/// `∫_{B_η(ξ)} a U^{2N/(N-4)}` against `a(ξ⁰)γ₁ + ε t (∇a·ν) γ₁`.
pub fn self_energy(setup: &AsymptoticSetup, p: &Placement, eps: f64) -> Result<IntegralEstimate> {
    let eta = p.t * eps;
    check_eta(eta)?;
    let n = setup.domain.dim();
    let b = p.bubble(eps, DeltaScaling::Theorem)?;
    let g1 = setup.constants.gamma1.value;
    let profile = RadialProfile::new(n, n as f64);
    let xi = b.xi.clone();
    let est = mc::mean(setup.stream("self_energy", eps), setup.samples, |rng| {
        let z = profile.sample_unit(rng);
        if norm(&z) * b.delta >= eta {
            return 0.0;
        }
        let y1 = axpy(&xi, b.delta, &z);
        let y2 = axpy(&xi, -b.delta, &z);
        0.5 * (setup.weight.value(&y1) + setup.weight.value(&y2))
    })
    .scaled(g1);
    let (a0, s) = setup.anchor_data(p);
    let first = est.shifted(-a0 * g1).scaled(1.0 / eps);
    Ok(IntegralEstimate {
        name: "self_energy".into(),
        epsilon: eps,
        value: est.value,
        stderr: est.stderr,
        samples: setup.samples,
        seed: setup.seed,
        eta,
        prediction: a0 * g1 + eps * p.t * s * g1,
        first_order: first.value,
        first_order_stderr: first.stderr,
        coefficient: p.t * s * g1,
    })
}

/// Mean of `f(y)` under the normalised law of `U^{(N+4)/(N-4)}`, restricted to
/// `B_η(ξ)`, times `∫ U^{(N+4)/(N-4)} = δ^{(N-4)/2}γ₂/α_N`.
fn source_weighted<F>(setup: &AsymptoticSetup, b: &Bubble, eta: f64, stream: Stream, f: F) -> McEstimate
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = b.n();
    let nf = n as f64;
    let profile = RadialProfile::new(n, (nf + 4.0) / 2.0);
    let alpha = b.dims().alpha;
    let mass = b.delta.powf((nf - 4.0) / 2.0) * setup.constants.gamma2.value / alpha;
    mc::mean(stream, setup.samples, |rng| {
        let z = profile.sample_unit(rng);
        if norm(&z) * b.delta >= eta {
            return 0.0;
        }
        0.5 * (f(&axpy(&b.xi, b.delta, &z)) + f(&axpy(&b.xi, -b.delta, &z)))
    })
    .scaled(mass)
}

/// `∫_{B_η} a U^{(N+4)/(N-4)} (PU - U)` against `-ε (d/(2t))^{N-4} a(ξ⁰) γ₂`.
pub fn correction_integral(setup: &AsymptoticSetup, p: &Placement, eps: f64) -> Result<IntegralEstimate> {
    let eta = p.t * eps;
    check_eta(eta)?;
    let n = setup.domain.dim() as f64;
    let b = p.bubble(eps, DeltaScaling::Theorem)?;
    let pb = ProjectedBubble::new(b.clone(), setup.domain.clone())?;
    let est = source_weighted(setup, &b, eta, setup.stream("correction", eps), |y| {
        -setup.weight.value(y) * pb.correction(y)
    });
    let (a0, _) = setup.anchor_data(p);
    let coefficient = -(p.d / (2.0 * p.t)).powf(n - 4.0) * a0 * setup.constants.gamma2.value;
    Ok(IntegralEstimate {
        name: "correction".into(),
        epsilon: eps,
        value: est.value,
        stderr: est.stderr,
        samples: setup.samples,
        seed: setup.seed,
        eta,
        prediction: eps * coefficient,
        first_order: est.value / eps,
        first_order_stderr: est.stderr / eps,
        coefficient,
    })
}

/// `∫_{B_η(ξ_i)} a U_i^{(N+4)/(N-4)} PU_j`. For a shared anchor the
/// prediction is `ε a(ζ⁰)(d_i d_j)^{(N-4)/2}(|t_i-t_j|^{4-N} - (t_i+t_j)^{4-N})γ₂`.
/// For distinct anchors it is `o(ε)` and the coefficient is reported as zero.
pub fn interaction_integral(setup: &AsymptoticSetup, pi: &Placement, pj: &Placement, eps: f64) -> Result<IntegralEstimate> {
    let same_anchor = dist(&pi.anchor, &pj.anchor) < 1e-12;
    if same_anchor && pi.t == pj.t {
        return Err(Error::SingularConfiguration("t_i = t_j on a shared anchor".into()));
    }
    let (ci, cj) = (pi.center(eps), pj.center(eps));
    let eta = (pi.t * eps).min(pj.t * eps).min(0.5 * dist(&ci, &cj));
    check_eta(eta)?;
    let n = setup.domain.dim() as f64;
    let bi = pi.bubble(eps, DeltaScaling::Theorem)?;
    let pbj = ProjectedBubble::new(pj.bubble(eps, DeltaScaling::Theorem)?, setup.domain.clone())?;
    let est = source_weighted(setup, &bi, eta, setup.stream("interaction", eps), |y| {
        setup.weight.value(y) * pbj.eval(y)
    });
    let (a0, _) = setup.anchor_data(pi);
    let coefficient = if same_anchor {
        a0 * (pi.d * pj.d).powf((n - 4.0) / 2.0)
            * ((pi.t - pj.t).abs().powf(4.0 - n) - (pi.t + pj.t).powf(4.0 - n))
            * setup.constants.gamma2.value
    } else {
        0.0
    };
    Ok(IntegralEstimate {
        name: "interaction".into(),
        epsilon: eps,
        value: est.value,
        stderr: est.stderr,
        samples: setup.samples,
        seed: setup.seed,
        eta,
        prediction: eps * coefficient,
        first_order: est.value / eps,
        first_order_stderr: est.stderr / eps,
        coefficient,
    })
}

/// Equal-weight mixture of `U^{2N/(N-4)}`-shaped profiles at the bubbles.
pub(crate) fn bubble_mixture(bubbles: &[&Bubble], k: f64) -> Mixture {
    let n = bubbles[0].n();
    let profile = RadialProfile::new(n, k);
    Mixture::new(
        bubbles
            .iter()
            .map(|b| {
                (
                    1.0,
                    Component::Profile {
                        profile: profile.clone(),
                        center: b.xi.clone(),
                        scale: b.delta,
                    },
                )
            })
            .collect(),
    )
}

/// `∫_Ω a |PU₁ - PU₂|^p log|PU₁ - PU₂|` for a pair configuration. The
/// prediction is `2a(ζ⁰)γ₃ - (N-4)/2·a(ζ⁰)(log d₁ + log d₂)γ₁ - (N-3)a(ζ⁰) log(ε) γ₁`.
pub fn log_integral(setup: &AsymptoticSetup, cfg: &ConfigPair) -> Result<IntegralEstimate> {
    let eps = cfg.eps;
    check_eta(cfg.eta())?;
    let dom = setup.domain;
    let n = dom.dim();
    let nf = n as f64;
    let p = dimension_params(n)?.p;
    let v = Ansatz::new(dom, &cfg.placements(), eps, DeltaScaling::Theorem)?;
    let mix = bubble_mixture(&[&v.terms[0].1.bubble, &v.terms[1].1.bubble], nf);
    let est = mix.integrate(setup.stream("log_integral", eps), setup.samples, |y| {
        if !dom.contains(y) {
            return 0.0;
        }
        let val = v.eval(y).abs();
        if val == 0.0 {
            return 0.0;
        }
        setup.weight.value(y) * val.powf(p) * val.ln()
    });
    let a0 = setup.weight.value(&cfg.anchor);
    let c = setup.constants;
    let prediction = 2.0 * a0 * c.gamma3.value
        - (nf - 4.0) / 2.0 * a0 * (cfg.d[0].ln() + cfg.d[1].ln()) * c.gamma1.value
        - (nf - 3.0) * a0 * eps.ln() * c.gamma1.value;
    Ok(IntegralEstimate {
        name: "log_integral".into(),
        epsilon: eps,
        value: est.value,
        stderr: est.stderr,
        samples: setup.samples,
        seed: setup.seed,
        eta: cfg.eta(),
        prediction,
        first_order: est.value,
        first_order_stderr: est.stderr,
        coefficient: prediction,
    })
}

/// Slope of [`log_integral`] against `log ε` over an ε grid, with the
/// predicted coefficient `-(N-3)a(ζ⁰)γ₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegression {
    pub rows: Vec<IntegralEstimate>,
    pub slope: f64,
    pub intercept: f64,
    pub predicted_slope: f64,
    pub predicted_intercept: f64,
}

pub fn log_integral_regression(setup: &AsymptoticSetup, cfg: &ConfigPair, eps_grid: &[f64]) -> Result<LogRegression> {
    if eps_grid.len() < 2 {
        return Err(Error::InvalidArgument("regression needs at least two ε values".into()));
    }
    let rows = eps_grid
        .iter()
        .map(|&e| log_integral(setup, &cfg.with_eps(e)))
        .collect::<Result<Vec<_>>>()?;
    let xy: Vec<(f64, f64)> = rows.iter().map(|r| (r.epsilon.ln(), r.value)).collect();
    let (slope, intercept) = crate::scaling::least_squares(&xy);
    let n = setup.domain.dim() as f64;
    let a0 = setup.weight.value(&cfg.anchor);
    let c = setup.constants;
    Ok(LogRegression {
        predicted_slope: -(n - 3.0) * a0 * c.gamma1.value,
        predicted_intercept: 2.0 * a0 * c.gamma3.value
            - (n - 4.0) / 2.0 * a0 * (cfg.d[0].ln() + cfg.d[1].ln()) * c.gamma1.value,
        rows,
        slope,
        intercept,
    })
}

/// Mixture of polar laws (radial density `∝ ρ^{m-1}`) around each centre and
/// the uniform law on the ball, for integrands with power-law peaks.
pub(crate) fn peaked_mixture(domain: &BallDomain, centers: &[Vec<f64>], m: f64) -> Vec<(f64, Component)> {
    let polar = Polar::new(domain.dim(), 2.0 * domain.radius, m);
    let mut comps: Vec<(f64, Component)> = centers
        .iter()
        .map(|c| (1.0, Component::Polar { polar, center: c.clone() }))
        .collect();
    comps.push((
        1.0,
        Component::Uniform {
            center: domain.center.clone(),
            radius: domain.radius,
        },
    ));
    comps
}

/// `‖f‖_{L^q(Ω)}` with its delta-method standard error, from a Monte Carlo
/// estimate of `∫|f|^q`.
fn lq_norm(est: McEstimate, q: f64) -> (f64, f64) {
    let v = est.value.max(0.0);
    let norm = v.powf(1.0 / q);
    let se = if v > 0.0 { norm / (q * v) * est.stderr } else { f64::INFINITY };
    (norm, se)
}

/// Exponent `q = 2N/(N+4)` of the dual Lebesgue space.
pub fn dual_exponent(n: usize) -> f64 {
    2.0 * n as f64 / (n as f64 + 4.0)
}

/// `‖ΔPU‖_{L^{2N/(N+4)}}` over a list of `δ` at a fixed centre.
pub fn lap_pu_norm_scan(dom: &BallDomain, xi: &[f64], deltas: &[f64], samples: usize, seed: u64) -> Result<ScalingReport> {
    let n = dom.dim();
    let nf = n as f64;
    let q = dual_exponent(n);
    let m = (nf - q * (nf - 2.0)).max(0.5);
    let mix = Mixture::new(peaked_mixture(dom, &[xi.to_vec()], m));
    let base = Stream::new(seed, "projection", "lap_pu_norm");
    let points = deltas
        .iter()
        .enumerate()
        .map(|(k, &delta)| {
            let pb = ProjectedBubble::new(Bubble::new(delta, xi.to_vec())?, dom.clone())?;
            let est = mix.integrate(base.child(k as u64), samples, |y| {
                if !dom.contains(y) {
                    return 0.0;
                }
                pb.laplacian(y).abs().powf(q)
            });
            let (v, se) = lq_norm(est, q);
            Ok(ScanPoint::new(delta, v, se))
        })
        .collect::<Result<Vec<_>>>()?;
    ScalingReport::fit(points)
}

/// Probe set for the remainder: the centre, points at half the depth around
/// it, and the domain centre.
fn remainder_probes(dom: &BallDomain, xi: &[f64], nu: &[f64], depth: f64) -> Vec<Vec<f64>> {
    let n = dom.dim();
    let tangent = crate::geometry::tangent_basis(nu)[0].clone();
    let mut probes = vec![
        xi.to_vec(),
        axpy(xi, 0.5 * depth, nu),
        axpy(xi, -0.5 * depth, nu),
        axpy(xi, 0.5 * depth, &tangent),
        axpy(xi, depth, nu),
    ];
    if n > 0 {
        probes.push(dom.center.clone());
    }
    probes.into_iter().filter(|p| dom.contains(p)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderRow {
    pub delta: f64,
    pub sup_remainder: f64,
    pub stderr: f64,
    /// Deterministic value of the same supremum from the semi-analytic `PU`.
    pub semi_analytic: f64,
    pub excluded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderScan {
    pub depth: f64,
    pub rows: Vec<RemainderRow>,
    pub fit: ScalingReport,
}

/// `sup_x |R_{δ,ξ}(x)|` over a probe set for a centre at `depth` below the
/// boundary point `anchor`, fitted against `δ`.
pub fn remainder_scan(
    dom: &BallDomain,
    anchor: &[f64],
    depth: f64,
    deltas: &[f64],
    samples: usize,
    seed: u64,
) -> Result<RemainderScan> {
    dom.check_on_boundary(anchor)?;
    let nu = scale(&dom.outward_normal(anchor), -1.0);
    let xi = axpy(anchor, depth, &nu);
    let probes = remainder_probes(dom, &xi, &nu, depth);
    let base = Stream::new(seed, "projection", "remainder").child(depth.to_bits());
    let mut rows = Vec::with_capacity(deltas.len());
    let mut points = Vec::with_capacity(deltas.len());
    for (k, &delta) in deltas.iter().enumerate() {
        if delta >= depth {
            return Err(Error::InvalidArgument(format!("δ = {delta} must be well below the depth {depth}")));
        }
        let pb = ProjectedBubble::new(Bubble::new(delta, xi.clone())?, dom.clone())?;
        let mut best = McEstimate::exact(0.0);
        let mut semi: f64 = 0.0;
        for (j, x) in probes.iter().enumerate() {
            let est = pb.remainder_oracle(x, samples, base.child(k as u64).child(j as u64))?;
            if est.value.abs() > best.value.abs() {
                best = est;
            }
            semi = semi.max((pb.eval(x) - pb.asymptotic(x)?).abs());
        }
        let pt = ScanPoint::new(delta, best.value.abs(), best.stderr);
        points.push(pt);
        rows.push(RemainderRow {
            delta,
            sup_remainder: best.value.abs(),
            stderr: best.stderr,
            semi_analytic: semi,
            excluded: false,
        });
    }
    let fit = ScalingReport::fit(points)?;
    for (row, pt) in rows.iter_mut().zip(&fit.points) {
        row.excluded = pt.excluded;
    }
    Ok(RemainderScan { depth, rows, fit })
}

/// Cross terms `∫ 2∇a·∇ΔPU_i PU_j` and `∫ Δa ΔPU_i PU_j` (`i ≠ j`) of a
/// configuration, which are `o(ε)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTerms {
    pub epsilon: f64,
    pub gradient_term: McEstimate,
    pub laplacian_term: McEstimate,
}

pub fn cross_terms(dom: &BallDomain, a: &WeightField, cfg: &Config, samples: usize, seed: u64) -> Result<CrossTerms> {
    let v = Ansatz::from_config(dom, cfg)?;
    if v.terms.len() < 2 {
        return Err(Error::InvalidArgument("cross terms need at least two bubbles".into()));
    }
    let centers: Vec<Vec<f64>> = v.terms.iter().map(|t| t.1.bubble.xi.clone()).collect();
    let mix = Mixture::new(peaked_mixture(dom, &centers, 1.0));
    let k = v.terms.len();
    let stream = Stream::new(seed, "projection", "cross_terms").child(cfg.eps().to_bits());
    let est = mix.integrate_multi(stream, samples, 2, |y, out| {
        if !dom.contains(y) {
            return;
        }
        let grad_a = a.gradient(y);
        let lap_a = a.laplacian(y);
        let vals: Vec<f64> = v.terms.iter().map(|(s, pb)| s * pb.eval(y)).collect();
        for i in 0..k {
            let (si, pbi) = &v.terms[i];
            let others: f64 = (0..k).filter(|&j| j != i).map(|j| vals[j]).sum();
            out[0] += 2.0 * si * dot(&grad_a, &pbi.grad_laplacian(y)) * others;
            out[1] += lap_a * si * pbi.laplacian(y) * others;
        }
    });
    Ok(CrossTerms {
        epsilon: cfg.eps(),
        gradient_term: est[0],
        laplacian_term: est[1],
    })
}

/// `f_ε(V)` of the ansatz.
pub fn nonlinearity(v: f64, eps: f64, n: usize) -> f64 {
    f_ell(v, eps, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn e1(n: usize, s: f64) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[0] = s;
        v
    }

    fn fd_laplacian(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> f64 {
        let mut y = x.to_vec();
        let f0 = f(x);
        let mut acc = 0.0;
        for i in 0..x.len() {
            y[i] = x[i] + h;
            acc += f(&y);
            y[i] = x[i] - h;
            acc += f(&y);
            y[i] = x[i];
            acc -= 2.0 * f0;
        }
        acc / (h * h)
    }

    fn fd_laplacian_rich(f: impl Fn(&[f64]) -> f64 + Copy, x: &[f64], h: f64) -> f64 {
        (4.0 * fd_laplacian(f, x, 0.5 * h) - fd_laplacian(f, x, h)) / 3.0
    }

    #[test]
    fn navier_conditions_and_equation() {
        for n in [5usize, 6] {
            let dom = BallDomain::unit(n);
            let mut xi = vec![0.0; n];
            xi[0] = 0.6;
            xi[1] = -0.2;
            let pb = ProjectedBubble::new(Bubble::new(0.1, xi.clone()).unwrap(), dom).unwrap();
            let mut s = vec![0.0; n];
            s[0] = 0.8;
            s[2] = 0.6;
            assert!(pb.eval(&s).abs() < 1e-12);
            assert!(pb.laplacian(&s).abs() < 1e-10);
            let mut x = vec![0.0; n];
            x[0] = 0.3;
            x[1] = 0.2;
            x[3] = -0.1;
            let fd = fd_laplacian(|y| pb.eval(y), &x, 1e-3);
            assert_relative_eq!(fd, pb.laplacian(&x), max_relative = 1e-5);
            let fd2 = fd_laplacian_rich(|y| pb.laplacian(y), &x, 2e-3);
            assert_relative_eq!(fd2, pb.bubble.source(&x), max_relative = 1e-5);
            let g = pb.grad_laplacian(&x);
            for i in 0..n {
                let h = 1e-5;
                let mut yp = x.clone();
                yp[i] += h;
                let mut ym = x.clone();
                ym[i] -= h;
                let d = (pb.laplacian(&yp) - pb.laplacian(&ym)) / (2.0 * h);
                assert!((d - g[i]).abs() < 1e-6 * norm(&g), "{d} {}", g[i]);
            }
        }
    }

    #[test]
    fn centred_bubble_matches_radial_formula() {
        // ξ = 0: U - PU = α δ^a [(1+δ²)^{-a} + a(1-|y|²)... ] from the x = 0 form of H
        let dom = BallDomain::unit(5);
        let pb = ProjectedBubble::new(Bubble::new(0.05, vec![0.0; 5]).unwrap(), dom.clone()).unwrap();
        let y = vec![0.3, 0.4, 0.0, 0.0, 0.0];
        let asym = pb.bubble.amplitude() * (1.0 + (1.0 - 0.25) / 5.0);
        assert_relative_eq!(pb.correction(&y), asym, max_relative = 1e-2);
    }

    #[test]
    fn general_ball_matches_unit_ball() {
        let dom = BallDomain::new(vec![1.0, 0.0, -1.0, 0.0, 2.0], 2.0, 0.5).unwrap();
        let xi = vec![1.8, 0.4, -1.0, 0.0, 2.0];
        let pb = ProjectedBubble::new(Bubble::new(0.08, xi).unwrap(), dom.clone()).unwrap();
        let s = axpy(&dom.center, 2.0, &[0.0, 0.6, 0.8, 0.0, 0.0]);
        assert!(pb.eval(&s).abs() < 1e-12);
        let x = vec![1.2, 0.3, -0.5, 0.2, 2.1];
        let fd = fd_laplacian(|y| pb.eval(y), &x, 2e-3);
        assert_relative_eq!(fd, pb.laplacian(&x), max_relative = 1e-5);
    }

    #[test]
    fn remainder_oracle_agrees_with_semi_analytic() {
        let dom = BallDomain::unit(5);
        let xi = e1(5, 0.7);
        let pb = ProjectedBubble::new(Bubble::new(0.03, xi.clone()).unwrap(), dom).unwrap();
        for (k, x) in [xi.clone(), e1(5, 0.5), vec![0.6, 0.2, 0.0, 0.0, 0.0]].iter().enumerate() {
            let r = pb.remainder_oracle(x, 20_000, Stream::new(5, "t", "r").child(k as u64)).unwrap();
            let exact = pb.eval(x) - pb.asymptotic(x).unwrap();
            assert!(r.within_sigmas(exact, 4.0), "{r:?} vs {exact}");
            let o = pb.oracle(x, 20_000, Stream::new(5, "t", "o").child(k as u64)).unwrap();
            assert!(o.value >= -3.0 * o.stderr && o.value <= pb.u(x) + 3.0 * o.stderr);
        }
    }

    #[test]
    fn laplacian_oracle_agrees() {
        let dom = BallDomain::unit(5);
        let pb = ProjectedBubble::new(Bubble::new(0.05, e1(5, 0.6)).unwrap(), dom).unwrap();
        let x = vec![0.3, 0.3, 0.0, 0.0, 0.0];
        let est = pb.laplacian_oracle(&x, 200_000, Stream::new(1, "t", "lap")).unwrap();
        assert!(est.within_sigmas(pb.laplacian(&x), 4.0), "{est:?} vs {}", pb.laplacian(&x));
    }
}
