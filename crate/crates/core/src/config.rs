//! TOML run configuration for the command-line harness.

use serde::{Deserialize, Serialize};

use crate::constants::{Gamma3Variant, QuadMethod};
use crate::error::{Error, Result};
use crate::geometry::{BallDomain, Bump, WeightField, WeightKind};
use crate::reduced::LogVariant;

pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    pub dim: usize,
    #[serde(default = "one")]
    pub radius: f64,
    /// Defaults to the origin.
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default = "half")]
    pub collar: f64,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightBlock {
    #[serde(default = "affine")]
    pub kind: WeightKind,
    #[serde(default = "two")]
    pub a0: f64,
    /// Defaults to the unit vector `e₁`.
    #[serde(default)]
    pub g: Option<Vec<f64>>,
    #[serde(default)]
    pub bump: Option<Bump>,
}

fn affine() -> WeightKind {
    WeightKind::Affine
}

fn two() -> f64 {
    2.0
}

impl Default for WeightBlock {
    fn default() -> Self {
        Self {
            kind: WeightKind::Affine,
            a0: 2.0,
            g: None,
            bump: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AnchorBlock {
    /// Pair anchor; defaults to `center - R e₁`.
    #[serde(default)]
    pub zeta: Option<Vec<f64>>,
    /// Anchors of a k-bubble configuration; default `[zeta]`.
    #[serde(default)]
    pub anchors: Option<Vec<Vec<f64>>>,
    /// `b_i ∈ {0, 1}`; default all zero.
    #[serde(default)]
    pub signs: Option<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaBlock {
    /// 1 for k bubbles at distinct anchors, 2 for the sign-changing pair.
    #[serde(default = "theorem_two")]
    pub theorem: u8,
    /// Use the reduced-energy minimiser for `(d, t)`.
    #[serde(default = "yes")]
    pub solve: bool,
    #[serde(default)]
    pub d: Option<Vec<f64>>,
    #[serde(default)]
    pub t: Option<Vec<f64>>,
    #[serde(default)]
    pub log_variant: LogVariant,
    #[serde(default)]
    pub gamma3_variant: Gamma3Variant,
}

fn theorem_two() -> u8 {
    2
}

fn yes() -> bool {
    true
}

impl Default for SigmaBlock {
    fn default() -> Self {
        Self {
            theorem: 2,
            solve: true,
            d: None,
            t: None,
            log_variant: LogVariant::default(),
            gamma3_variant: Gamma3Variant::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureBlock {
    #[serde(default = "monte_carlo")]
    pub method: QuadMethod,
    #[serde(default = "default_samples")]
    pub samples: usize,
    pub seed: Option<u64>,
}

fn monte_carlo() -> QuadMethod {
    QuadMethod::MonteCarlo
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

impl Default for QuadratureBlock {
    fn default() -> Self {
        Self {
            method: QuadMethod::MonteCarlo,
            samples: DEFAULT_SAMPLES,
            seed: Some(DEFAULT_SEED),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash, PartialOrd, Ord)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "out_dir")]
    pub dir: String,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

fn out_dir() -> String {
    "blowup-out".into()
}

fn all_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self {
            dir: out_dir(),
            formats: all_formats(),
        }
    }
}

/// Parameters of the projection scans.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionBlock {
    #[serde(default = "depth")]
    pub depth: f64,
    #[serde(default = "deltas")]
    pub deltas: Vec<f64>,
    /// Points for the `0 ≤ PU ≤ U` check.
    #[serde(default = "sandwich_points")]
    pub sandwich_points: usize,
}

fn depth() -> f64 {
    0.3
}

fn deltas() -> Vec<f64> {
    vec![0.02, 0.01, 0.005]
}

fn sandwich_points() -> usize {
    100
}

impl Default for ProjectionBlock {
    fn default() -> Self {
        Self {
            depth: depth(),
            deltas: deltas(),
            sandwich_points: sandwich_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainBlock,
    #[serde(default)]
    pub weight: WeightBlock,
    #[serde(default)]
    pub anchor: AnchorBlock,
    #[serde(default)]
    pub sigma: SigmaBlock,
    #[serde(default = "epsilon_grid")]
    pub epsilon: Vec<f64>,
    #[serde(default)]
    pub quadrature: QuadratureBlock,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub projection: ProjectionBlock,
}

pub fn epsilon_grid() -> Vec<f64> {
    vec![0.04, 0.02, 0.01, 0.005]
}

/// Parses and validates a TOML configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let key = e
            .message()
            .split('`')
            .nth(1)
            .map(str::to_owned)
            .unwrap_or_else(|| "<document>".into());
        Error::config(key, e.to_string().trim().to_owned())
    })?;
    cfg.validated()
}

fn check_len(key: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::config(key, format!("expected {n} components, found {}", v.len())));
    }
    Ok(())
}

impl RunConfig {
    /// Smallest valid configuration in dimension `n`; everything else defaulted.
    pub fn minimal(n: usize) -> Result<Self> {
        parse_config(&format!("[domain]\ndim = {n}\n"))
    }

    /// Applies defaults that depend on the dimension and checks every invariant.
    pub fn validated(mut self) -> Result<Self> {
        let n = self.domain.dim;
        if n < 5 {
            return Err(Error::DimensionOutOfRange(n));
        }
        if !(self.domain.radius > 0.0) {
            return Err(Error::config("domain.radius", "must be positive"));
        }
        let center = self.domain.center.get_or_insert_with(|| vec![0.0; n]).clone();
        check_len("domain.center", &center, n)?;
        if !(self.domain.collar > 0.0 && self.domain.collar < 1.0) {
            return Err(Error::config("domain.collar", "must lie in (0, 1)"));
        }

        let g = self.weight.g.get_or_insert_with(|| {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            e
        });
        check_len("weight.g", g, n)?;
        match (self.weight.kind, &self.weight.bump) {
            (WeightKind::AffinePlusBump, None) => return Err(Error::config("weight.bump", "required for kind = \"affine_plus_bump\"")),
            (WeightKind::Affine, Some(_)) => return Err(Error::config("weight.bump", "only allowed for kind = \"affine_plus_bump\"")),
            (_, Some(b)) => check_len("weight.bump.center", &b.center, n)?,
            _ => {}
        }

        let r = self.domain.radius;
        let zeta = self.anchor.zeta.get_or_insert_with(|| {
            let mut z = center.clone();
            z[0] -= r;
            z
        });
        check_len("anchor.zeta", zeta, n)?;
        let zeta = zeta.clone();
        let anchors = self.anchor.anchors.get_or_insert_with(|| vec![zeta]);
        for (i, a) in anchors.iter().enumerate() {
            check_len(&format!("anchor.anchors[{i}]"), a, n)?;
        }
        let k = anchors.len();
        let signs = self.anchor.signs.get_or_insert_with(|| vec![0; k]);
        if signs.len() != k {
            return Err(Error::config("anchor.signs", format!("expected {k} entries")));
        }
        if signs.iter().any(|&s| s > 1) {
            return Err(Error::config("anchor.signs", "entries must be 0 or 1"));
        }

        match self.sigma.theorem {
            1 | 2 => {}
            t => return Err(Error::config("sigma.theorem", format!("must be 1 or 2, got {t}"))),
        }
        if !self.sigma.solve {
            let want = if self.sigma.theorem == 1 { k } else { 2 };
            for key in ["d", "t"] {
                let v = if key == "d" { &self.sigma.d } else { &self.sigma.t };
                match v {
                    None => return Err(Error::config(format!("sigma.{key}"), "required when solve = false")),
                    Some(v) if v.len() != want => {
                        return Err(Error::config(format!("sigma.{key}"), format!("expected {want} entries")))
                    }
                    Some(v) if v.iter().any(|x| !(*x > 0.0)) => {
                        return Err(Error::config(format!("sigma.{key}"), "entries must be positive"))
                    }
                    _ => {}
                }
            }
            if self.sigma.theorem == 2 {
                let t = self.sigma.t.as_ref().expect("checked above");
                if !(t[0] < t[1]) {
                    return Err(Error::config("sigma.t", "the pair needs 0 < t₁ < t₂"));
                }
            }
        }

        if self.epsilon.is_empty() {
            return Err(Error::config("epsilon", "must not be empty"));
        }
        if self.epsilon.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::config("epsilon", "entries must be strictly positive"));
        }
        if self.epsilon.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::config("epsilon", "entries must be strictly decreasing"));
        }

        if self.quadrature.samples == 0 {
            return Err(Error::config("quadrature.samples", "must be positive"));
        }
        if self.quadrature.method == QuadMethod::MonteCarlo && self.quadrature.seed.is_none() {
            return Err(Error::config("quadrature.seed", "required when method = \"monte_carlo\""));
        }

        if self.output.formats.is_empty() {
            return Err(Error::config("output.formats", "must list at least one format"));
        }
        self.output.formats.sort();
        self.output.formats.dedup();

        let p = &self.projection;
        if !(p.depth > 0.0 && p.depth < r) {
            return Err(Error::config("projection.depth", "must lie in (0, radius)"));
        }
        if p.deltas.iter().any(|d| !(*d > 0.0 && *d < p.depth)) {
            return Err(Error::config("projection.deltas", "entries must lie in (0, depth)"));
        }
        if p.deltas.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::config("projection.deltas", "entries must be strictly decreasing"));
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn seed(&self) -> u64 {
        self.quadrature.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn samples(&self) -> usize {
        self.quadrature.samples
    }

    pub fn ball(&self) -> Result<BallDomain> {
        BallDomain::new(
            self.domain.center.clone().unwrap_or_else(|| vec![0.0; self.dim()]),
            self.domain.radius,
            self.domain.collar,
        )
    }

    pub fn weight_field(&self) -> Result<WeightField> {
        let g = self.weight.g.clone().unwrap_or_else(|| vec![0.0; self.dim()]);
        match (&self.weight.kind, &self.weight.bump) {
            (WeightKind::AffinePlusBump, Some(b)) => WeightField::affine_plus_bump(self.weight.a0, g, b.clone()),
            _ => Ok(WeightField::affine(self.weight.a0, g)),
        }
    }

    pub fn zeta(&self) -> Vec<f64> {
        self.anchor.zeta.clone().expect("set by validation")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config("[domain]\ndim = 5\n[weight]\nkind = \"affine\"\n[sigma]\nsolve = true\n").unwrap();
        assert_eq!(cfg.quadrature.samples, DEFAULT_SAMPLES);
        assert_eq!(cfg.seed(), DEFAULT_SEED);
        assert_eq!(cfg.epsilon, epsilon_grid());
        assert_eq!(cfg.zeta(), vec![-1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(cfg.weight.g.as_deref(), Some(&[1.0, 0.0, 0.0, 0.0, 0.0][..]));
    }

    #[test]
    fn increasing_epsilon_rejected() {
        let err = parse_config("epsilon = [0.01, 0.02]\n[domain]\ndim = 5\n").unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "epsilon"), "{err}");
    }

    #[test]
    fn low_dimension_rejected() {
        let err = parse_config("[domain]\ndim = 4\n").unwrap_err();
        assert!(matches!(err, Error::DimensionOutOfRange(4)));
        assert!(err.to_string().contains("N >= 5"));
    }

    #[test]
    fn type_mismatch_names_the_key() {
        let err = parse_config("[domain]\ndim = \"five\"\n").unwrap_err();
        assert!(err.to_string().contains("dim"), "{err}");
        let err = parse_config("[domain]\ndim = 5\n[quadrature]\nsamples = 10\n").unwrap_err();
        assert!(matches!(&err, Error::Config { key, .. } if key == "quadrature.seed"), "{err}");
    }

    #[test]
    fn round_trip_is_stable() {
        let cfg = RunConfig::minimal(6).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }
}
