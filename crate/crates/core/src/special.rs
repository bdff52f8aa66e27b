//! Gamma-family helpers used by the closed-form constants.

use std::f64::consts::PI;

pub use statrs::function::gamma::{digamma, gamma, ln_gamma};

/// Surface measure of the unit sphere S^{n-1} in R^n.
pub fn sphere_area(n: usize) -> f64 {
    let h = n as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// Volume of the unit ball in R^n.
pub fn ball_volume(n: usize) -> f64 {
    sphere_area(n) / n as f64
}

/// `∫_{R^n} (1 + |y|^2)^{-k} dy = π^{n/2} Γ(k - n/2) / Γ(k)`, valid for k > n/2.
pub fn radial_profile_mass(n: usize, k: f64) -> f64 {
    let h = n as f64 / 2.0;
    assert!(k > h, "profile (1+r^2)^-{k} not integrable in R^{n}");
    (h * PI.ln() + ln_gamma(k - h) - ln_gamma(k)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sphere_areas() {
        assert_relative_eq!(sphere_area(2), 2.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(3), 4.0 * PI, max_relative = 1e-14);
        assert_relative_eq!(sphere_area(5), 8.0 * PI * PI / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn profile_mass_cauchy_3d() {
        // ∫_{R^3} (1+r^2)^{-2} dr = 4π ∫ r^2/(1+r^2)^2 = 4π·π/4 = π^2
        assert_relative_eq!(radial_profile_mass(3, 2.0), PI * PI, max_relative = 1e-13);
    }
}
