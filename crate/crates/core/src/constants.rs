//! Dimensional arithmetic and the universal constants γ₁, γ₂, γ₃, ω₁…ω₄.
//!
//! Each γ is `∫_{R^N} g(|y|) dy` for a radial integrand `g`, available three
//! ways: a Gamma/digamma closed form, a radial Gauss–Kronrod integral, and an
//! N-dimensional Monte Carlo estimate with a Student-t proposal. The Monte Carlo
//! route never touches the closed forms and serves as the independent oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{self, RadialProfile, Stream};
use crate::quadrature::{integrate, QuadOptions};
use crate::special::{digamma, radial_profile_mass, sphere_area};
use crate::vecops::norm_sq;

/// Exact and derived numbers attached to a dimension `N ≥ 5`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionParams {
    pub n: usize,
    /// Critical exponent `2N/(N-4)` as a reduced fraction.
    pub p_num: u64,
    pub p_den: u64,
    pub p: f64,
    pub alpha: f64,
    pub gamma_n: f64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

pub fn dimension_params(n: usize) -> Result<DimensionParams> {
    if n < 5 {
        return Err(Error::DimensionOutOfRange(n));
    }
    let num = 2 * n as u64;
    let den = n as u64 - 4;
    let g = gcd(num, den);
    let nf = n as f64;
    let alpha = (nf * (nf - 4.0) * (nf - 2.0) * (nf + 2.0)).powf((nf - 4.0) / 8.0);
    Ok(DimensionParams {
        n,
        p_num: num / g,
        p_den: den / g,
        p: (num / g) as f64 / (den / g) as f64,
        alpha,
        gamma_n: (nf - 4.0) * (nf - 2.0) * sphere_area(n),
    })
}

impl DimensionParams {
    /// Bubble decay exponent `(N-4)/2`.
    pub fn half_gap(&self) -> f64 {
        (self.n as f64 - 4.0) / 2.0
    }

    /// `(N+4)/(N-4) = p - 1`.
    pub fn source_exponent(&self) -> f64 {
        self.p - 1.0
    }

    /// `α_N^p`.
    pub fn alpha_p(&self) -> f64 {
        self.alpha.powf(self.p)
    }

    /// Exact integer identity `p·(N-4) = 2N`.
    pub fn p_identity_holds(&self) -> bool {
        self.p_num * (self.n as u64 - 4) == 2 * self.n as u64 * self.p_den
    }

    /// Normalisation of `Δ²|x|^{4-N}`: `2(N-4)(N-2)|S^{N-1}|`, twice the
    /// tabulated `γ_N`.
    pub fn biharmonic_fundamental_constant(&self) -> f64 {
        2.0 * self.gamma_n
    }

    /// Normalisation of `-Δ|x|^{2-N}`: `(N-2)|S^{N-1}|`.
    pub fn laplace_fundamental_constant(&self) -> f64 {
        (self.n as f64 - 2.0) * sphere_area(self.n)
    }

    /// Concentration scaling exponent `(N-3)/(N-4)` in `δ = d ε^{(N-3)/(N-4)}`.
    pub fn delta_exponent(&self) -> f64 {
        (self.n as f64 - 3.0) / (self.n as f64 - 4.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadMethod {
    ClosedForm,
    RadialGauss,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub center: Vec<f64>,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub method: QuadMethod,
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub importance: Option<Importance>,
    /// Largest acceptable relative standard error of a Monte Carlo result.
    #[serde(default)]
    pub max_rel_stderr: Option<f64>,
}

impl QuadratureSpec {
    pub fn closed_form() -> Self {
        Self {
            method: QuadMethod::ClosedForm,
            samples: 1,
            seed: 0,
            importance: None,
            max_rel_stderr: None,
        }
    }

    pub fn radial_gauss() -> Self {
        Self {
            method: QuadMethod::RadialGauss,
            ..Self::closed_form()
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self {
            method: QuadMethod::MonteCarlo,
            samples,
            seed,
            importance: None,
            max_rel_stderr: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidArgument("sample_count must be positive".into()));
        }
        Ok(())
    }
}

/// A constant with its error bar and the method that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub method: QuadMethod,
}

impl Estimate {
    fn exact(value: f64, method: QuadMethod) -> Self {
        Self {
            value,
            stderr: 0.0,
            method,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Gamma3Variant {
    /// Literal reading: an extra `α_N^p` in front of `∫ U_{1,0}^p log U_{1,0}`.
    WithExtraAlphaFactor,
    #[default]
    Without,
}

/// Radial integrands `g(r)` so that `γ = |S^{N-1}| ∫_0^∞ r^{N-1} g(r) dr`.
#[derive(Debug, Clone, Copy)]
enum Profile {
    /// `α^p (1+r^2)^{-k}`
    Power { k: f64 },
    /// `α^p (1+r^2)^{-N} log U_{1,0}(r)`
    Log,
}

fn profile_value(dp: &DimensionParams, profile: Profile, r_sq: f64) -> f64 {
    let ap = dp.alpha_p();
    match profile {
        Profile::Power { k } => ap * (-k * r_sq.ln_1p()).exp(),
        Profile::Log => {
            let l = r_sq.ln_1p();
            ap * (-(dp.n as f64) * l).exp() * (dp.alpha.ln() - dp.half_gap() * l)
        }
    }
}

/// `∫_0^∞ r^{N-1} g(r) dr`, split at r = 1 with `r ↦ 1/r` on the tail so
/// both pieces are integrals over [0, 1] whose integrands vanish at the origin
/// at the power-law decay rate.
fn radial_integral(dp: &DimensionParams, profile: Profile) -> f64 {
    let n = dp.n as i32;
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-14,
        max_intervals: 200,
    };
    let inner = integrate(
        |r| r.powi(n - 1) * profile_value(dp, profile, r * r),
        0.0,
        1.0,
        opts,
    );
    let outer = integrate(
        |s| {
            if s == 0.0 {
                0.0
            } else {
                s.powi(-n - 1) * profile_value(dp, profile, 1.0 / (s * s))
            }
        },
        0.0,
        1.0,
        opts,
    );
    inner.value + outer.value
}

fn monte_carlo_integral(dp: &DimensionParams, profile: Profile, q: &QuadratureSpec, check: &str) -> Result<Estimate> {
    // one power heavier in the tail than the target, so the weights stay bounded
    let k = match profile {
        Profile::Power { k } => k,
        Profile::Log => dp.n as f64,
    };
    let proposal = RadialProfile::new(dp.n, k - 1.0);
    let stream = Stream::new(q.seed, "constants", check);
    let est = mc::mean(stream, q.samples, |rng| {
        let y = proposal.sample_unit(rng);
        let r2 = norm_sq(&y);
        profile_value(dp, profile, r2) / proposal.density_unit(r2)
    });
    if let Some(tol) = q.max_rel_stderr {
        if est.stderr > tol * est.value.abs() {
            return Err(Error::Accuracy {
                achieved: est.stderr / est.value.abs(),
                requested: tol,
            });
        }
    }
    Ok(Estimate {
        value: est.value,
        stderr: est.stderr,
        method: QuadMethod::MonteCarlo,
    })
}

fn evaluate(dp: &DimensionParams, profile: Profile, closed: f64, q: &QuadratureSpec, check: &str) -> Result<Estimate> {
    q.validate()?;
    match q.method {
        QuadMethod::ClosedForm => Ok(Estimate::exact(closed, QuadMethod::ClosedForm)),
        QuadMethod::RadialGauss => Ok(Estimate::exact(
            sphere_area(dp.n) * radial_integral(dp, profile),
            QuadMethod::RadialGauss,
        )),
        QuadMethod::MonteCarlo => monte_carlo_integral(dp, profile, q, check),
    }
}

/// `γ₁ = α_N^p ∫ (1+|y|^2)^{-N} dy`.
pub fn gamma1(n: usize, q: &QuadratureSpec) -> Result<Estimate> {
    let dp = dimension_params(n)?;
    let k = n as f64;
    let closed = dp.alpha_p() * radial_profile_mass(n, k);
    evaluate(&dp, Profile::Power { k }, closed, q, "gamma1")
}

/// `γ₂ = α_N^p ∫ (1+|y|^2)^{-(N+4)/2} dy`.
pub fn gamma2(n: usize, q: &QuadratureSpec) -> Result<Estimate> {
    let dp = dimension_params(n)?;
    let k = (n as f64 + 4.0) / 2.0;
    let closed = dp.alpha_p() * radial_profile_mass(n, k);
    evaluate(&dp, Profile::Power { k }, closed, q, "gamma2")
}

/// `γ₃`: `∫ U_{1,0}^p log U_{1,0}`, optionally times `α_N^p`.
pub fn gamma3(n: usize, variant: Gamma3Variant, q: &QuadratureSpec) -> Result<Estimate> {
    let dp = dimension_params(n)?;
    let g1 = dp.alpha_p() * radial_profile_mass(n, n as f64);
    let nf = n as f64;
    let closed = g1 * (dp.alpha.ln() - dp.half_gap() * (digamma(nf) - digamma(nf / 2.0)));
    let mut est = evaluate(&dp, Profile::Log, closed, q, "gamma3")?;
    if variant == Gamma3Variant::WithExtraAlphaFactor {
        est.value *= dp.alpha_p();
        est.stderr *= dp.alpha_p();
    }
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Omegas {
    pub omega2: f64,
    pub omega3: f64,
    pub omega4: f64,
}

pub fn omegas(n: usize, gamma1: f64, gamma2: f64) -> Result<Omegas> {
    let dp = dimension_params(n)?;
    if !(gamma1 > 0.0) {
        return Err(Error::InvalidConstant {
            name: "gamma1",
            value: gamma1,
        });
    }
    if !(gamma2 > 0.0) {
        return Err(Error::InvalidConstant {
            name: "gamma2",
            value: gamma2,
        });
    }
    let p = dp.p;
    Ok(Omegas {
        omega2: gamma1 * (p - 2.0) / (2.0 * p),
        omega3: (n as f64 - 4.0) * gamma1 / (2.0 * p),
        omega4: gamma2 / 2.0,
    })
}

/// ε-dependent leading coefficient of the pair energy,
/// `ω₁(ε) = γ₁(p-2)/p + ε(-2γ₁/p² + 2γ₃/p - log(ε)(N-3)γ₁/p)`.
pub fn omega1(dp: &DimensionParams, gamma1: f64, gamma3: f64, eps: f64) -> f64 {
    let p = dp.p;
    gamma1 * (p - 2.0) / p
        + eps * (-2.0 * gamma1 / (p * p) + 2.0 * gamma3 / p - eps.ln() * (dp.n as f64 - 3.0) * gamma1 / p)
}

/// Everything the reduced energies need, evaluated once per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalConstants {
    pub dims: DimensionParams,
    pub gamma1: Estimate,
    pub gamma2: Estimate,
    pub gamma3: Estimate,
    pub gamma3_variant: Gamma3Variant,
    pub omega2: f64,
    pub omega3: f64,
    pub omega4: f64,
}

impl UniversalConstants {
    pub fn compute(n: usize, variant: Gamma3Variant, q: &QuadratureSpec) -> Result<Self> {
        let dims = dimension_params(n)?;
        let g1 = gamma1(n, q)?;
        let g2 = gamma2(n, q)?;
        let g3 = gamma3(n, variant, q)?;
        let om = omegas(n, g1.value, g2.value)?;
        Ok(Self {
            dims,
            gamma1: g1,
            gamma2: g2,
            gamma3: g3,
            gamma3_variant: variant,
            omega2: om.omega2,
            omega3: om.omega3,
            omega4: om.omega4,
        })
    }

    /// Closed-form constants; the default for everything downstream.
    pub fn closed_form(n: usize) -> Result<Self> {
        Self::compute(n, Gamma3Variant::Without, &QuadratureSpec::closed_form())
    }

    pub fn omega1(&self, eps: f64) -> f64 {
        omega1(&self.dims, self.gamma1.value, self.gamma3.value, eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exponent_examples() {
        let d5 = dimension_params(5).unwrap();
        assert_eq!((d5.p_num, d5.p_den), (10, 1));
        assert!(d5.p_identity_holds());
        assert_relative_eq!(d5.alpha, 105f64.powf(0.125), max_relative = 1e-15);
        assert_relative_eq!(d5.alpha, 1.7892, epsilon = 1e-4);
        let d8 = dimension_params(8).unwrap();
        assert_eq!((d8.p_num, d8.p_den), (4, 1));
        let d7 = dimension_params(7).unwrap();
        assert_eq!((d7.p_num, d7.p_den), (14, 3));
    }

    #[test]
    fn small_dimensions_rejected() {
        for n in 0..5 {
            assert!(matches!(dimension_params(n), Err(Error::DimensionOutOfRange(_))));
        }
    }

    #[test]
    fn p_decreases_towards_two() {
        let mut prev = f64::INFINITY;
        for n in 5..=64 {
            let d = dimension_params(n).unwrap();
            assert!(d.p_identity_holds());
            assert!(d.p < prev);
            assert!(d.p > 2.0);
            // rational comparison against the previous exponent: p_n > 2 strictly
            assert!(d.p_num > 2 * d.p_den);
            prev = d.p;
        }
        assert!(prev - 2.0 < 0.14);
    }

    #[test]
    fn gamma_values_n5() {
        let cf = QuadratureSpec::closed_form();
        let g1 = gamma1(5, &cf).unwrap().value;
        let g2 = gamma2(5, &cf).unwrap().value;
        // frozen from a 30-digit evaluation of the Gamma-function forms
        assert_relative_eq!(g1, 325.676381145579193, max_relative = 1e-13);
        assert_relative_eq!(g2, 505.495219517918564, max_relative = 1e-13);
        // rounded reference values carry about 4e-4 relative slack
        assert_relative_eq!(g1, 325.54, max_relative = 1e-3);
        assert_relative_eq!(g2, 505.3, max_relative = 1e-3);
        assert!(g2 > g1);
        let g3 = gamma3(5, Gamma3Variant::Without, &cf).unwrap().value;
        assert_relative_eq!(g3, 58.7078997390589301, max_relative = 1e-12);
        assert_relative_eq!(g3, 58.68, max_relative = 1e-3);
        let g3a = gamma3(5, Gamma3Variant::WithExtraAlphaFactor, &cf).unwrap().value;
        let a10 = dimension_params(5).unwrap().alpha.powi(10);
        assert_relative_eq!(g3a, g3 * a10, max_relative = 1e-14);
    }

    #[test]
    fn radial_gauss_matches_closed_forms() {
        let rg = QuadratureSpec::radial_gauss();
        let cf = QuadratureSpec::closed_form();
        for n in 5..=12 {
            for f in [gamma1, gamma2] {
                let a = f(n, &rg).unwrap().value;
                let b = f(n, &cf).unwrap().value;
                assert_relative_eq!(a, b, max_relative = 1e-8);
            }
            let a = gamma3(n, Gamma3Variant::Without, &rg).unwrap().value;
            let b = gamma3(n, Gamma3Variant::Without, &cf).unwrap().value;
            assert_relative_eq!(a, b, max_relative = 1e-8);
        }
    }

    #[test]
    fn gamma3_sign_follows_bracket() {
        let cf = QuadratureSpec::closed_form();
        for n in 5..=20 {
            let d = dimension_params(n).unwrap();
            let nf = n as f64;
            let bracket = d.alpha.ln() - d.half_gap() * (digamma(nf) - digamma(nf / 2.0));
            let g3 = gamma3(n, Gamma3Variant::Without, &cf).unwrap().value;
            assert_eq!(g3.signum(), bracket.signum());
        }
    }

    #[test]
    fn omega_examples() {
        let g1 = gamma1(5, &QuadratureSpec::closed_form()).unwrap().value;
        let g2 = gamma2(5, &QuadratureSpec::closed_form()).unwrap().value;
        let om = omegas(5, g1, g2).unwrap();
        assert_relative_eq!(om.omega2, 0.4 * g1, max_relative = 1e-14);
        assert_relative_eq!(om.omega3, 0.05 * g1, max_relative = 1e-14);
        assert_relative_eq!(om.omega4, g2 / 2.0, max_relative = 1e-14);
        assert_relative_eq!(om.omega2, 130.22, max_relative = 1e-3);
        assert_relative_eq!(om.omega3, 16.28, max_relative = 1e-3);
        assert_relative_eq!(om.omega4, 252.65, max_relative = 1e-3);
        assert!(matches!(omegas(5, -1.0, g2), Err(Error::InvalidConstant { .. })));
        assert!(matches!(omegas(5, g1, 0.0), Err(Error::InvalidConstant { .. })));
    }

    #[test]
    fn monte_carlo_within_three_sigma() {
        let q = QuadratureSpec::monte_carlo(200_000, 1);
        let g1 = gamma1(5, &q).unwrap();
        let exact = gamma1(5, &QuadratureSpec::closed_form()).unwrap().value;
        assert!((g1.value - exact).abs() < 3.0 * g1.stderr, "{g1:?} vs {exact}");
        let mut tight = QuadratureSpec::monte_carlo(1000, 1);
        tight.max_rel_stderr = Some(1e-9);
        assert!(matches!(gamma1(5, &tight), Err(Error::Accuracy { .. })));
    }

    #[test]
    fn gamma_hat_identity() {
        // γ₂/α² equals the biharmonic fundamental-solution constant
        for n in 5..=12 {
            let d = dimension_params(n).unwrap();
            let g2 = gamma2(n, &QuadratureSpec::closed_form()).unwrap().value;
            assert_relative_eq!(g2 / (d.alpha * d.alpha), d.biharmonic_fundamental_constant(), max_relative = 1e-12);
        }
    }
}
