//! End-to-end numerical checks, one per verifiable claim. The command-line
//! subcommands and the acceptance suite both run these, differing only in
//! budgets.

use serde::{Deserialize, Serialize};

use crate::bubbles::{fd_bilaplacian_residual, richardson_derivative, Bubble};
use crate::constants::{gamma1, gamma2, QuadratureSpec, UniversalConstants};
use crate::error::Result;
use crate::geometry::{BallDomain, WeightField};
use crate::green::{lah_sweep, manufactured_solution_check, symmetry_check, BiharmonicGreen, LahReport, ManufacturedReport, SymmetryRow};
use crate::mc::{self, McEstimate, Stream};
use crate::projection::{
    correction_integral, interaction_integral, lap_pu_norm_scan, log_integral_regression, remainder_scan,
    self_energy, AsymptoticSetup, IntegralEstimate, LogRegression, ProjectedBubble, RemainderScan,
};
use crate::reduced::{
    energy_rows, error_norm_scan, f1_critical, f2_minimize, misscaled, AnchorData, CriticalPointReport, EnergyRow, LogVariant,
    MinimizeOptions,
};
use crate::scaling::{least_squares, ScalingReport};
use crate::sigma::{Config, ConfigK, ConfigPair, Placement};
use crate::vecops::axpy;

fn unit_e1(n: usize, s: f64) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[0] = s;
    v
}

/// The reference weight `a(x) = 2 + x₁` on the unit ball, with anchor
/// `ζ⁰ = -e₁`, where `a(ζ⁰) = 1` and `∇a·ν = 1`.
pub fn reference_setting(n: usize) -> (BallDomain, WeightField, Vec<f64>) {
    (BallDomain::unit(n), WeightField::affine(2.0, unit_e1(n, 1.0)), unit_e1(n, -1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantRow {
    pub n: usize,
    pub name: String,
    pub closed_form: f64,
    pub radial_gauss: f64,
    pub relative_error: f64,
    pub monte_carlo: McEstimate,
    pub sigmas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsCheck {
    pub rows: Vec<ConstantRow>,
    pub quadrature_tolerance: f64,
    pub sigma_tolerance: f64,
    pub passed: bool,
}

/// `γ₁`, `γ₂` by radial quadrature and Monte Carlo against the closed forms.
pub fn constants_check(dims: &[usize], samples: usize, seed: u64) -> Result<ConstantsCheck> {
    let (tol, sig) = (1e-8, 3.0);
    let mut rows = Vec::new();
    for &n in dims {
        for (name, f) in [("gamma1", gamma1 as fn(usize, &QuadratureSpec) -> Result<_>), ("gamma2", gamma2)] {
            let cf = f(n, &QuadratureSpec::closed_form())?.value;
            let rg = f(n, &QuadratureSpec::radial_gauss())?.value;
            let est = f(n, &QuadratureSpec::monte_carlo(samples, seed.wrapping_add(n as u64)))?;
            let mc = McEstimate {
                value: est.value,
                stderr: est.stderr,
                samples,
            };
            rows.push(ConstantRow {
                n,
                name: name.into(),
                closed_form: cf,
                radial_gauss: rg,
                relative_error: ((rg - cf) / cf).abs(),
                sigmas: (mc.value - cf).abs() / mc.stderr,
                monte_carlo: mc,
            });
        }
    }
    let passed = rows.iter().all(|r| r.relative_error <= tol && r.sigmas <= sig);
    Ok(ConstantsCheck {
        rows,
        quadrature_tolerance: tol,
        sigma_tolerance: sig,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub n: usize,
    pub point: Vec<f64>,
    pub residuals: Vec<f64>,
    pub order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleIdentityCheck {
    pub steps: Vec<f64>,
    pub rows: Vec<OrderRow>,
    pub min_order: f64,
    pub max_order: f64,
    pub passed: bool,
}

/// Convergence order of the finite-difference bilaplacian residual of
/// `U_{1,0}` at random points of `B_{1.5}(0)`.
pub fn bubble_identity_check(dims: &[usize], points: usize, seed: u64) -> Result<BubbleIdentityCheck> {
    let steps = vec![0.08, 0.04, 0.02];
    let mut rows = Vec::new();
    for &n in dims {
        let b = Bubble::new(1.0, vec![0.0; n])?;
        let mut rng = Stream::new(seed, "bubbles", "identity").child(n as u64).rng(0);
        for _ in 0..points {
            let x = mc::ball_point(&mut rng, &vec![0.0; n], 1.5);
            let residuals = steps
                .iter()
                .map(|&h| fd_bilaplacian_residual(&b, &x, h).map(f64::abs))
                .collect::<Result<Vec<_>>>()?;
            let xy: Vec<(f64, f64)> = steps.iter().zip(&residuals).map(|(h, r)| (h.ln(), r.ln())).collect();
            let order = least_squares(&xy).0;
            rows.push(OrderRow {
                n,
                point: x,
                residuals,
                order,
            });
        }
    }
    let min_order = rows.iter().map(|r| r.order).fold(f64::INFINITY, f64::min);
    let max_order = rows.iter().map(|r| r.order).fold(f64::NEG_INFINITY, f64::max);
    Ok(BubbleIdentityCheck {
        passed: (min_order - 2.0).abs() <= 0.3 && (max_order - 2.0).abs() <= 0.3,
        steps,
        rows,
        min_order,
        max_order,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelCheck {
    /// Largest `|ψ_j - ∂U| / max_j |ψ_j|` over points, per dimension.
    pub max_relative_error: Vec<(usize, f64)>,
    pub tolerance: f64,
    pub passed: bool,
}

/// The `N+1` kernel elements against Richardson differences of `U` in `δ`
/// and `ξ`. Errors are relative to the largest kernel element at the point.
pub fn kernel_check(dims: &[usize], points: usize, seed: u64) -> Result<KernelCheck> {
    let tol = 1e-6;
    let mut out = Vec::new();
    for &n in dims {
        let mut rng = Stream::new(seed, "bubbles", "kernel").child(n as u64).rng(0);
        let mut worst: f64 = 0.0;
        for _ in 0..points {
            let xi = mc::ball_point(&mut rng, &vec![0.0; n], 0.5);
            let delta = 0.3 + 0.7 * rand::Rng::random::<f64>(&mut rng);
            let x = mc::ball_point(&mut rng, &xi, 1.5);
            let b = Bubble::new(delta, xi.clone())?;
            let psi = (0..=n).map(|j| b.kernel(j, &x)).collect::<Result<Vec<_>>>()?;
            let scale_ = psi.iter().map(|v| v.abs()).fold(0.0, f64::max);
            for (j, &p) in psi.iter().enumerate() {
                let fd = if j == 0 {
                    richardson_derivative(|d| Bubble::new(d, xi.clone()).map(|b| b.eval(&x)).unwrap_or(f64::NAN), delta)
                } else {
                    richardson_derivative(
                        |s| {
                            let mut c = xi.clone();
                            c[j - 1] = s;
                            Bubble::new(delta, c).map(|b| b.eval(&x)).unwrap_or(f64::NAN)
                        },
                        xi[j - 1],
                    )
                };
                worst = worst.max((fd - p).abs() / scale_);
            }
        }
        out.push((n, worst));
    }
    Ok(KernelCheck {
        passed: out.iter().all(|(_, e)| *e <= tol),
        max_relative_error: out,
        tolerance: tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreenCheck {
    pub manufactured: ManufacturedReport,
    pub manufactured_tolerance: f64,
    pub symmetry: Vec<SymmetryRow>,
    pub max_symmetry_sigmas: f64,
    pub lah: LahReport,
    pub manufactured_passed: bool,
    pub symmetry_passed: bool,
    pub lah_passed: bool,
}

impl GreenCheck {
    pub fn passed(&self) -> bool {
        self.manufactured_passed && self.symmetry_passed && self.lah_passed
    }
}

/// Manufactured solution `w = (1-r²)³` (two calibration points, five fresh
/// points), symmetry at random pairs, and the boundary-layer depth sweep.
pub fn green_check(n: usize, samples: usize, symmetry_pairs: usize, symmetry_samples: usize, seed: u64) -> Result<GreenCheck> {
    let dom = BallDomain::unit(n);
    let green = BiharmonicGreen::new(dom.clone())?;
    let mut rng = Stream::new(seed, "green", "points").rng(0);
    let calibration = vec![vec![0.0; n], {
        let mut v = vec![0.0; n];
        v[1] = -0.5;
        v[2] = 0.2;
        v
    }];
    let fresh: Vec<Vec<f64>> = (0..5).map(|_| mc::ball_point(&mut rng, &vec![0.0; n], 0.7)).collect();
    let manufactured = manufactured_solution_check(&green, &calibration, &fresh, samples, seed)?;
    let tol = 0.02;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..symmetry_pairs)
        .map(|_| {
            (
                mc::ball_point(&mut rng, &vec![0.0; n], 0.85),
                mc::ball_point(&mut rng, &vec![0.0; n], 0.85),
            )
        })
        .collect();
    let symmetry = symmetry_check(&green, &pairs, symmetry_samples, seed)?;
    let max_sig = symmetry
        .iter()
        .map(|r| r.split_sigmas.max(r.oracle_sigmas))
        .fold(0.0, f64::max);
    let exact_sym = symmetry
        .iter()
        .all(|r| (r.h_xy - r.h_yx).abs() <= 1e-10 * r.h_xy.abs().max(1.0));
    let lah = lah_sweep(&green, &vec![0.0; n], &unit_e1(n, 1.0), &[0.2, 0.1, 0.05, 0.025])?;
    let in_band = |s: f64| (0.7..=1.3).contains(&s);
    Ok(GreenCheck {
        manufactured_passed: manufactured.max_fresh_error < tol,
        symmetry_passed: exact_sym && max_sig <= 3.0,
        lah_passed: in_band(lah.h_fit.slope) && in_band(lah.lap_fit.slope),
        manufactured,
        manufactured_tolerance: tol,
        symmetry,
        max_symmetry_sigmas: max_sig,
        lah,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub x: Vec<f64>,
    pub u: f64,
    pub oracle: McEstimate,
    pub semi_analytic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionCheck {
    pub sandwich: Vec<SandwichRow>,
    pub sandwich_passed: bool,
    pub remainder: Vec<(usize, RemainderScan)>,
    pub remainder_passed: bool,
    /// Reported alongside; not part of [`ProjectionCheck::passed`].
    pub lap_norm: Vec<(usize, ScalingReport)>,
    pub lap_norm_decreasing: bool,
}

impl ProjectionCheck {
    pub fn passed(&self) -> bool {
        self.sandwich_passed && self.remainder_passed
    }
}

pub struct ProjectionBudget {
    pub sandwich_points: usize,
    pub sandwich_samples: usize,
    pub remainder_samples: usize,
    pub norm_samples: usize,
}

/// `0 ≤ PU ≤ U` at random points, the remainder slope against `δ` for each
/// dimension, and the `L^{2N/(N+4)}` decay of `ΔPU`.
pub fn projection_check(dims: &[usize], depth: f64, deltas: &[f64], budget: &ProjectionBudget, seed: u64) -> Result<ProjectionCheck> {
    let n0 = dims[0];
    let dom = BallDomain::unit(n0);
    let anchor = unit_e1(n0, -1.0);
    let xi = axpy(&anchor, depth, &unit_e1(n0, 1.0));
    let pb = ProjectedBubble::new(Bubble::new(deltas[0], xi.clone())?, dom.clone())?;
    let mut rng = Stream::new(seed, "projection", "sandwich_points").rng(0);
    let base = Stream::new(seed, "projection", "sandwich");
    let sandwich = (0..budget.sandwich_points)
        .map(|k| {
            let x = mc::ball_point(&mut rng, &dom.center, 0.98 * dom.radius);
            let oracle = pb.oracle(&x, budget.sandwich_samples, base.child(k as u64))?;
            Ok(SandwichRow {
                u: pb.u(&x),
                semi_analytic: pb.eval(&x),
                oracle,
                x,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let sandwich_passed = sandwich
        .iter()
        .all(|r| r.oracle.value >= -3.0 * r.oracle.stderr && r.oracle.value <= r.u + 3.0 * r.oracle.stderr && r.semi_analytic >= 0.0 && r.semi_analytic <= r.u);

    let mut remainder = Vec::new();
    let mut lap_norm = Vec::new();
    for &n in dims {
        let dom = BallDomain::unit(n);
        let anchor = unit_e1(n, -1.0);
        remainder.push((n, remainder_scan(&dom, &anchor, depth, deltas, budget.remainder_samples, seed)?));
        let xi = axpy(&anchor, depth, &unit_e1(n, 1.0));
        lap_norm.push((n, lap_pu_norm_scan(&dom, &xi, deltas, budget.norm_samples, seed)?));
    }
    let remainder_passed = remainder
        .iter()
        .all(|(n, s)| (s.fit.slope - *n as f64 / 2.0).abs() <= 0.5);
    let lap_norm_decreasing = lap_norm
        .iter()
        .all(|(_, s)| s.points.windows(2).all(|w| w[1].value < w[0].value));
    Ok(ProjectionCheck {
        sandwich,
        sandwich_passed,
        remainder,
        remainder_passed,
        lap_norm,
        lap_norm_decreasing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointsCheck {
    pub f1: CriticalPointReport,
    /// `(d*/(2t*))^{N-4}·pγ₂/γ₁ - 1`.
    pub f1_scale_identity: f64,
    /// `t*(p-2)(∇a·ν)/(a(ζ⁰)(N-4)) - 1`.
    pub f1_depth_identity: f64,
    pub f1_passed: bool,
    pub f2: CriticalPointReport,
    pub f2_passed: bool,
}

impl CriticalPointsCheck {
    pub fn passed(&self) -> bool {
        self.f1_passed && self.f2_passed
    }
}

pub fn critical_points_check(c: &UniversalConstants, anchor: AnchorData, variant: LogVariant) -> Result<CriticalPointsCheck> {
    let f1 = f1_critical(c, anchor)?;
    let nf = c.dims.n as f64;
    let p = c.dims.p;
    let (d, t) = (f1.d_star[0], f1.t_star[0]);
    let scale_id = (d / (2.0 * t)).powf(nf - 4.0) * p * c.gamma2.value / c.gamma1.value - 1.0;
    let depth_id = t * (p - 2.0) * anchor.s / (anchor.a0 * (nf - 4.0)) - 1.0;
    let f1_passed = scale_id.abs() < 1e-8 && depth_id.abs() < 1e-8 && f1.is_minimum() && f1.grid.as_ref().is_some_and(|g| g.contains_reported);
    let f2 = f2_minimize(c, anchor, variant, &MinimizeOptions::default())?;
    let f2_passed = f2.is_minimum() && f2.gradient_norm < 1e-10 && f2.grid.as_ref().is_some_and(|g| g.contains_reported);
    Ok(CriticalPointsCheck {
        f1,
        f1_scale_identity: scale_id,
        f1_depth_identity: depth_id,
        f1_passed,
        f2,
        f2_passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsCheck {
    pub self_energy: IntegralEstimate,
    pub correction: IntegralEstimate,
    pub interaction: IntegralEstimate,
    pub log_regression: LogRegression,
    pub coefficient_tolerance: f64,
    pub slope_tolerance: f64,
}

impl AsymptoticsCheck {
    pub fn within(e: &IntegralEstimate, tol: f64) -> bool {
        (e.ratio() - 1.0).abs() <= tol
    }

    pub fn self_energy_passed(&self) -> bool {
        Self::within(&self.self_energy, self.coefficient_tolerance)
    }

    pub fn correction_passed(&self) -> bool {
        Self::within(&self.correction, self.coefficient_tolerance)
    }

    pub fn interaction_passed(&self) -> bool {
        Self::within(&self.interaction, self.coefficient_tolerance)
    }

    pub fn log_passed(&self) -> bool {
        let r = &self.log_regression;
        (r.slope / r.predicted_slope - 1.0).abs() <= self.slope_tolerance
    }

    pub fn passed(&self) -> bool {
        self.self_energy_passed() && self.correction_passed() && self.interaction_passed() && self.log_passed()
    }
}

/// The four boundary-layer integrals at one `ε`, with the log-integral
/// regression run over `log_grid` at the pair configuration `pair` using
/// `log_samples` points per `ε`.
pub fn asymptotics_check(
    setup: &AsymptoticSetup,
    single: &Placement,
    pair: &ConfigPair,
    eps: f64,
    log_grid: &[f64],
    log_samples: usize,
) -> Result<AsymptoticsCheck> {
    let [p1, p2] = pair.placements();
    let log_setup = AsymptoticSetup {
        samples: log_samples,
        ..setup.clone()
    };
    Ok(AsymptoticsCheck {
        self_energy: self_energy(setup, single, eps)?,
        correction: correction_integral(setup, single, eps)?,
        interaction: interaction_integral(setup, &p1, &p2, eps)?,
        log_regression: log_integral_regression(&log_setup, pair, log_grid)?,
        coefficient_tolerance: 0.15,
        slope_tolerance: 0.10,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorNormFamily {
    pub label: String,
    pub scan: ScalingReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorNormCheck {
    pub single: ErrorNormFamily,
    pub pair: ErrorNormFamily,
    pub misscaled: ErrorNormFamily,
    pub min_slope: f64,
    pub passed: bool,
}

/// Slopes of the error norm along `eps_grid` for one bubble and for the pair
/// at their critical parameters, and for the pair with `δ = dε`.
pub fn error_norm_check(
    dom: &BallDomain,
    a: &WeightField,
    single: &Config,
    pair: &Config,
    eps_grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<ErrorNormCheck> {
    let fam = |label: &str, cfg: &Config| -> Result<ErrorNormFamily> {
        Ok(ErrorNormFamily {
            label: label.into(),
            scan: error_norm_scan(dom, a, cfg, eps_grid, samples, seed)?,
        })
    };
    let single = fam("single", single)?;
    let pair_f = fam("pair", pair)?;
    let mis = fam("misscaled", &misscaled(pair))?;
    let min_slope = 0.5;
    let passed = single.scan.slope >= min_slope && pair_f.scan.slope >= min_slope && mis.scan.slope < pair_f.scan.slope;
    Ok(ErrorNormCheck {
        single,
        pair: pair_f,
        misscaled: mis,
        min_slope,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyCheck {
    pub rows: Vec<EnergyRow>,
    /// Every step down the grid lowers `|J - prediction|/ε`, allowing two
    /// combined standard errors of slack.
    pub monotone: bool,
    /// Relative gap between the measured and predicted `ε`-coefficient at the
    /// smallest `ε`.
    pub coefficient_error: f64,
    pub coefficient_tolerance: f64,
    pub passed: bool,
}

pub fn energy_check(
    dom: &BallDomain,
    a: &WeightField,
    c: &UniversalConstants,
    cfg: &Config,
    eps_grid: &[f64],
    variant: LogVariant,
    samples: usize,
    seed: u64,
) -> Result<EnergyCheck> {
    let rows = energy_rows(dom, a, c, cfg, eps_grid, variant, samples, seed)?;
    let monotone = rows.windows(2).all(|w| {
        let slack = 2.0 * w[0].diff_over_eps_stderr.hypot(w[1].diff_over_eps_stderr);
        w[1].diff_over_eps <= w[0].diff_over_eps + slack
    });
    let last = rows.last().ok_or_else(|| crate::Error::InvalidArgument("empty ε grid".into()))?;
    let coefficient_error = ((last.reduced_numeric - last.reduced_predicted) / last.reduced_predicted).abs();
    let tol = 0.2;
    Ok(EnergyCheck {
        passed: monotone && coefficient_error <= tol,
        rows,
        monotone,
        coefficient_error,
        coefficient_tolerance: tol,
    })
}

/// The pair configuration at the `F²` minimiser for `anchor`.
pub fn critical_pair(dom: &BallDomain, a: &WeightField, c: &UniversalConstants, anchor: &[f64], variant: LogVariant, eps: f64) -> Result<ConfigPair> {
    let data = AnchorData::at(dom, a, anchor)?;
    let r = f2_minimize(c, data, variant, &MinimizeOptions::default())?;
    ConfigPair::new(dom, anchor, [r.d_star[0], r.d_star[1]], [r.t_star[0], r.t_star[1]], eps)
}

/// The single-bubble configuration at the `F¹` minimiser for `anchor`.
pub fn critical_single(dom: &BallDomain, a: &WeightField, c: &UniversalConstants, anchor: &[f64], eps: f64) -> Result<ConfigK> {
    let data = AnchorData::at(dom, a, anchor)?;
    let r = f1_critical(c, data)?;
    ConfigK::new(dom, &[anchor.to_vec()], &[0], &r.d_star, &r.t_star, eps)
}

/// The `ε` values used for the log-integral regression: the three smallest
/// of the grid, or all of them when there are fewer.
pub fn log_grid(eps: &[f64]) -> Vec<f64> {
    eps[eps.len().saturating_sub(3)..].to_vec()
}
