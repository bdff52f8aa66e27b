//! Log-log slope fitting for the convergence and scaling checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of a scan: the abscissa (ε, δ, h or a depth), the measured value
/// and its standard error (zero for deterministic measurements).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub abscissa: f64,
    pub value: f64,
    pub stderr: f64,
    pub excluded: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
}

impl ScanPoint {
    pub fn new(abscissa: f64, value: f64, stderr: f64) -> Self {
        Self {
            abscissa,
            value,
            stderr,
            excluded: false,
            reason: None,
        }
    }

    pub fn exclude(mut self, reason: impl Into<String>) -> Self {
        self.excluded = true;
        self.reason = Some(reason.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub points: Vec<ScanPoint>,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    pub used: usize,
}

impl ScalingReport {
    /// Fits `log|value| = intercept + slope·log(abscissa)` over the points that
    /// are not excluded. Points whose value is zero or whose error bar exceeds
    /// their magnitude are excluded here as well.
    pub fn fit(points: Vec<ScanPoint>) -> Result<Self> {
        let points: Vec<ScanPoint> = points
            .into_iter()
            .map(|p| {
                if p.excluded {
                    p
                } else if !(p.abscissa > 0.0) || !p.value.is_finite() || p.value == 0.0 {
                    p.exclude("non-positive abscissa or vanishing value")
                } else if p.stderr >= p.value.abs() {
                    p.exclude("noise floor: stderr exceeds estimate")
                } else {
                    p
                }
            })
            .collect();
        let xy: Vec<(f64, f64)> = points
            .iter()
            .filter(|p| !p.excluded)
            .map(|p| (p.abscissa.ln(), p.value.abs().ln()))
            .collect();
        if xy.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "slope fit needs at least 3 usable points, got {}",
                xy.len()
            )));
        }
        let (slope, intercept) = least_squares(&xy);
        let residual = (xy
            .iter()
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum::<f64>()
            / xy.len() as f64)
            .sqrt();
        Ok(Self {
            used: xy.len(),
            points,
            slope,
            intercept,
            residual,
        })
    }
}

/// Ordinary least squares line through `(x, y)` pairs.
pub fn least_squares(xy: &[(f64, f64)]) -> (f64, f64) {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn too_few_points() {
        let pts = vec![ScanPoint::new(1.0, 1.0, 0.0), ScanPoint::new(2.0, 4.0, 0.0)];
        assert!(ScalingReport::fit(pts).is_err());
    }

    #[test]
    fn noisy_point_is_excluded() {
        let pts = vec![
            ScanPoint::new(1.0, 1.0, 0.0),
            ScanPoint::new(0.5, 0.25, 0.0),
            ScanPoint::new(0.25, 0.0625, 0.0),
            ScanPoint::new(0.125, 1e-3, 2e-3),
        ];
        let r = ScalingReport::fit(pts).unwrap();
        assert_eq!(r.used, 3);
        assert!(r.points[3].excluded);
        assert!((r.slope - 2.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn recovers_power_laws(c in 0.01f64..100.0, k in -3.0f64..3.0) {
            let pts: Vec<_> = [0.04, 0.02, 0.01, 0.005]
                .iter()
                .map(|&e: &f64| ScanPoint::new(e, c * e.powf(k), 0.0))
                .collect();
            let r = ScalingReport::fit(pts).unwrap();
            prop_assert!((r.slope - k).abs() < 1e-9);
            prop_assert!(r.residual < 1e-9);
        }
    }
}
