//! Concentration parameter sets: k bubbles at distinct boundary anchors, and
//! a sign-changing pair stacked on one anchor.

use serde::{Deserialize, Serialize};

use crate::bubbles::Bubble;
use crate::constants::dimension_params;
use crate::error::{Error, Result};
use crate::geometry::BallDomain;
use crate::vecops::{axpy, dist, scale};

/// `δ = d·ε^{(N-3)/(N-4)}`.
pub fn delta_of(n: usize, d: f64, eps: f64) -> f64 {
    d * eps.powf((n as f64 - 3.0) / (n as f64 - 4.0))
}

/// Scaling law tying the bubble scale to `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DeltaScaling {
    /// `δ = d ε^{(N-3)/(N-4)}`.
    #[default]
    Theorem,
    /// `δ = d ε`, the wrong exponent, used as a control.
    Linear,
}

impl DeltaScaling {
    pub fn delta(self, n: usize, d: f64, eps: f64) -> f64 {
        match self {
            DeltaScaling::Theorem => delta_of(n, d, eps),
            DeltaScaling::Linear => d * eps,
        }
    }
}

/// One bubble: anchor `ζ⁰ ∈ ∂Ω`, parameters `(d, t)` and a sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub anchor: Vec<f64>,
    pub inward_normal: Vec<f64>,
    pub d: f64,
    pub t: f64,
    /// `+1` or `-1`.
    pub sign: f64,
}

impl Placement {
    pub fn center(&self, eps: f64) -> Vec<f64> {
        axpy(&self.anchor, self.t * eps, &self.inward_normal)
    }

    pub fn bubble(&self, eps: f64, scaling: DeltaScaling) -> Result<Bubble> {
        let n = self.anchor.len();
        Bubble::new(scaling.delta(n, self.d, eps), self.center(eps))
    }
}

fn placement(dom: &BallDomain, anchor: &[f64], d: f64, t: f64, sign: f64) -> Result<Placement> {
    dom.check_on_boundary(anchor)?;
    if !(d > 0.0) || !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("scales must be positive, got d={d}, t={t}")));
    }
    Ok(Placement {
        anchor: anchor.to_vec(),
        inward_normal: scale(&dom.outward_normal(anchor), -1.0),
        d,
        t,
        sign,
    })
}

fn check_eps(dom: &BallDomain, eps: f64, placements: &[Placement]) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("ε must be positive, got {eps}")));
    }
    for p in placements {
        if p.t * eps >= dom.radius {
            return Err(Error::InvalidArgument(format!(
                "bubble centre at depth {} is not inside the domain",
                p.t * eps
            )));
        }
    }
    Ok(())
}

/// k bubbles at pairwise distinct anchors (`b_i ∈ {0,1}` gives the sign `(-1)^{b_i}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigK {
    pub placements: Vec<Placement>,
    pub eps: f64,
    #[serde(default)]
    pub scaling: DeltaScaling,
}

impl ConfigK {
    pub fn new(dom: &BallDomain, anchors: &[Vec<f64>], signs: &[u8], d: &[f64], t: &[f64], eps: f64) -> Result<Self> {
        dimension_params(dom.dim())?;
        let k = anchors.len();
        if k == 0 || signs.len() != k || d.len() != k || t.len() != k {
            return Err(Error::InvalidArgument("anchors, signs, d and t must have the same positive length".into()));
        }
        for i in 0..k {
            for j in 0..i {
                if dist(&anchors[i], &anchors[j]) < 1e-12 * dom.radius {
                    return Err(Error::InvalidArgument(format!("anchors {j} and {i} coincide")));
                }
            }
        }
        let placements = (0..k)
            .map(|i| {
                let sign = match signs[i] {
                    0 => 1.0,
                    1 => -1.0,
                    b => return Err(Error::InvalidArgument(format!("sign index must be 0 or 1, got {b}"))),
                };
                placement(dom, &anchors[i], d[i], t[i], sign)
            })
            .collect::<Result<Vec<_>>>()?;
        check_eps(dom, eps, &placements)?;
        Ok(Self {
            placements,
            eps,
            scaling: DeltaScaling::Theorem,
        })
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps, ..self.clone() }
    }

    pub fn with_scaling(mut self, scaling: DeltaScaling) -> Self {
        self.scaling = scaling;
        self
    }

    /// Localisation radius: the smallest boundary distance and half the
    /// smallest mutual distance of the centres.
    pub fn eta(&self) -> f64 {
        let centers: Vec<Vec<f64>> = self.placements.iter().map(|p| p.center(self.eps)).collect();
        let mut eta = self.placements.iter().map(|p| p.t * self.eps).fold(f64::INFINITY, f64::min);
        for i in 0..centers.len() {
            for j in 0..i {
                eta = eta.min(0.5 * dist(&centers[i], &centers[j]));
            }
        }
        eta
    }
}

/// `ξ_i = ζ⁰ + t_i ε ν(ζ⁰)` with `0 < t₁ < t₂`, signs `+` and `-`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigPair {
    pub anchor: Vec<f64>,
    pub inward_normal: Vec<f64>,
    pub d: [f64; 2],
    pub t: [f64; 2],
    pub eps: f64,
    #[serde(default)]
    pub scaling: DeltaScaling,
}

impl ConfigPair {
    pub fn new(dom: &BallDomain, anchor: &[f64], d: [f64; 2], t: [f64; 2], eps: f64) -> Result<Self> {
        dimension_params(dom.dim())?;
        if t[0] == t[1] {
            return Err(Error::SingularConfiguration("t₁ = t₂".into()));
        }
        if !(0.0 < t[0] && t[0] < t[1]) {
            return Err(Error::InvalidArgument(format!("need 0 < t₁ < t₂, got {t:?}")));
        }
        let p = placement(dom, anchor, d[0], t[0], 1.0)?;
        let q = placement(dom, anchor, d[1], t[1], -1.0)?;
        check_eps(dom, eps, &[p.clone(), q])?;
        Ok(Self {
            anchor: anchor.to_vec(),
            inward_normal: p.inward_normal,
            d,
            t,
            eps,
            scaling: DeltaScaling::Theorem,
        })
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        Self { eps, ..self.clone() }
    }

    pub fn with_scaling(mut self, scaling: DeltaScaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn placements(&self) -> [Placement; 2] {
        let mk = |i: usize, sign: f64| Placement {
            anchor: self.anchor.clone(),
            inward_normal: self.inward_normal.clone(),
            d: self.d[i],
            t: self.t[i],
            sign,
        };
        [mk(0, 1.0), mk(1, -1.0)]
    }

    /// `η = min{t₁ε, t₂ε, ε|t₁-t₂|/2}`.
    pub fn eta(&self) -> f64 {
        let e = self.eps;
        (self.t[0] * e).min(self.t[1] * e).min(0.5 * e * (self.t[1] - self.t[0]).abs())
    }
}

/// Either parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Config {
    K(ConfigK),
    Pair(ConfigPair),
}

impl Config {
    pub fn eps(&self) -> f64 {
        match self {
            Config::K(c) => c.eps,
            Config::Pair(c) => c.eps,
        }
    }

    pub fn with_eps(&self, eps: f64) -> Self {
        match self {
            Config::K(c) => Config::K(c.with_eps(eps)),
            Config::Pair(c) => Config::Pair(c.with_eps(eps)),
        }
    }

    pub fn with_scaling(&self, s: DeltaScaling) -> Self {
        match self {
            Config::K(c) => Config::K(c.clone().with_scaling(s)),
            Config::Pair(c) => Config::Pair(c.clone().with_scaling(s)),
        }
    }

    pub fn scaling(&self) -> DeltaScaling {
        match self {
            Config::K(c) => c.scaling,
            Config::Pair(c) => c.scaling,
        }
    }

    pub fn placements(&self) -> Vec<Placement> {
        match self {
            Config::K(c) => c.placements.clone(),
            Config::Pair(c) => c.placements().to_vec(),
        }
    }

    pub fn eta(&self) -> f64 {
        match self {
            Config::K(c) => c.eta(),
            Config::Pair(c) => c.eta(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_validation() {
        let dom = BallDomain::unit(5);
        let z = vec![-1.0, 0.0, 0.0, 0.0, 0.0];
        assert!(matches!(ConfigPair::new(&dom, &z, [1.0, 1.0], [1.0, 1.0], 0.01), Err(Error::SingularConfiguration(_))));
        assert!(ConfigPair::new(&dom, &z, [1.0, 1.0], [2.0, 1.0], 0.01).is_err());
        assert!(ConfigPair::new(&dom, &z, [1.0, -1.0], [1.0, 2.0], 0.01).is_err());
        let c = ConfigPair::new(&dom, &z, [1.0, 1.0], [1.0, 2.0], 0.01).unwrap();
        assert!((c.eta() - 0.005).abs() < 1e-15);
        let p = c.placements();
        assert_eq!(p[1].center(0.01), vec![-0.98, 0.0, 0.0, 0.0, 0.0]);
        assert!((p[0].bubble(0.01, DeltaScaling::Theorem).unwrap().delta - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn k_validation() {
        let dom = BallDomain::unit(5);
        let a = vec![-1.0, 0.0, 0.0, 0.0, 0.0];
        let b = vec![1.0, 0.0, 0.0, 0.0, 0.0];
        assert!(ConfigK::new(&dom, &[a.clone(), a.clone()], &[0, 0], &[1.0, 1.0], &[1.0, 1.0], 0.01).is_err());
        assert!(ConfigK::new(&dom, &[a.clone()], &[2], &[1.0], &[1.0], 0.01).is_err());
        let c = ConfigK::new(&dom, &[a, b], &[0, 1], &[1.0, 2.0], &[1.0, 3.0], 0.01).unwrap();
        assert!((c.eta() - 0.01).abs() < 1e-15);
        assert_eq!(c.placements[1].sign, -1.0);
    }
}
