//! Subcommand dispatch: turns a validated [`RunConfig`] into a
//! [`ReportEnvelope`].

use std::time::Instant;

use serde::Serialize;

use crate::checks::{self, ProjectionBudget};
use crate::config::RunConfig;
use crate::constants::{dimension_params, gamma1, gamma2, gamma3, QuadMethod, QuadratureSpec, UniversalConstants};
use crate::error::{Error, Result};
use crate::geometry::{weight_checks, WeightCheckOptions};
use crate::projection::AsymptoticSetup;
use crate::reduced::{f1_critical, AnchorData};
use crate::report::{num, Check, Quantity, ReportEnvelope, Table, Tag};
use crate::sigma::{Config, ConfigK, ConfigPair};

pub const SUBCOMMANDS: [&str; 8] = [
    "constants",
    "bubble-check",
    "green-check",
    "projection-scan",
    "asymptotics",
    "critical-points",
    "residual-scan",
    "energy-check",
];

/// Runs one subcommand. The envelope carries the wall-clock time but the
/// serialised form does not.
pub fn run_subcommand(name: &str, cfg: &RunConfig) -> Result<ReportEnvelope> {
    let start = Instant::now();
    let mut env = ReportEnvelope::new(name, cfg);
    match name {
        "constants" => constants(cfg, &mut env)?,
        "bubble-check" => bubble_check(cfg, &mut env)?,
        "green-check" => green_check(cfg, &mut env)?,
        "projection-scan" => projection_scan(cfg, &mut env)?,
        "asymptotics" => asymptotics(cfg, &mut env)?,
        "critical-points" => critical_points(cfg, &mut env)?,
        "residual-scan" => residual_scan(cfg, &mut env)?,
        "energy-check" => energy_check(cfg, &mut env)?,
        other => return Err(Error::UnknownSubcommand(other.to_owned())),
    }
    env.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(env)
}

fn details<T: Serialize>(env: &mut ReportEnvelope, value: &T) -> Result<()> {
    env.details = serde_json::to_value(value)?;
    Ok(())
}

fn universal(cfg: &RunConfig) -> Result<UniversalConstants> {
    UniversalConstants::compute(cfg.dim(), cfg.sigma.gamma3_variant, &QuadratureSpec::closed_form())
}

/// The configuration described by the `[sigma]` and `[anchor]` blocks at the
/// first `ε` of the grid.
pub fn configuration(cfg: &RunConfig) -> Result<Config> {
    let dom = cfg.ball()?;
    let a = cfg.weight_field()?;
    let c = universal(cfg)?;
    let eps = cfg.epsilon[0];
    if cfg.sigma.theorem == 2 {
        let pair = if cfg.sigma.solve {
            checks::critical_pair(&dom, &a, &c, &cfg.zeta(), cfg.sigma.log_variant, eps)?
        } else {
            let (d, t) = (cfg.sigma.d.as_ref().expect("validated"), cfg.sigma.t.as_ref().expect("validated"));
            ConfigPair::new(&dom, &cfg.zeta(), [d[0], d[1]], [t[0], t[1]], eps)?
        };
        return Ok(Config::Pair(pair));
    }
    let anchors = cfg.anchor.anchors.clone().expect("validated");
    let signs = cfg.anchor.signs.clone().expect("validated");
    let (d, t) = if cfg.sigma.solve {
        let mut d = Vec::new();
        let mut t = Vec::new();
        for z in &anchors {
            let r = f1_critical(&c, AnchorData::at(&dom, &a, z)?)?;
            d.push(r.d_star[0]);
            t.push(r.t_star[0]);
        }
        (d, t)
    } else {
        (cfg.sigma.d.clone().expect("validated"), cfg.sigma.t.clone().expect("validated"))
    };
    Ok(Config::K(ConfigK::new(&dom, &anchors, &signs, &d, &t, eps)?))
}

fn constants(cfg: &RunConfig, env: &mut ReportEnvelope) -> Result<()> {
    let n = cfg.dim();
    let dp = dimension_params(n)?;
    let c = universal(cfg)?;
    for (name, v) in [
        ("p", dp.p),
        ("alpha", dp.alpha),
        ("gamma_n", dp.gamma_n),
        ("omega2", c.omega2),
        ("omega3", c.omega3),
        ("omega4", c.omega4),
    ] {
        env.quantities.push(Quantity::exact(name, v, Tag::ClosedForm));
    }
    let spec = match cfg.quadrature.method {
        QuadMethod::ClosedForm => QuadratureSpec::closed_form(),
        QuadMethod::RadialGauss => QuadratureSpec::radial_gauss(),
        QuadMethod::MonteCarlo => QuadratureSpec::monte_carlo(cfg.samples(), cfg.seed()),
    };
    let g = [
        ("gamma1", gamma1(n, &spec)?),
        ("gamma2", gamma2(n, &spec)?),
        ("gamma3", gamma3(n, cfg.sigma.gamma3_variant, &if spec.method == QuadMethod::ClosedForm { QuadratureSpec::radial_gauss() } else { spec.clone() })?),
    ];
    for (name, e) in g {
        env.quantities.push(match cfg.quadrature.method {
            QuadMethod::MonteCarlo => Quantity::with_error(name, e.value, e.stderr, Tag::MonteCarlo),
            QuadMethod::RadialGauss => Quantity::exact(name, e.value, Tag::Quadrature),
            QuadMethod::ClosedForm if name == "gamma3" => Quantity::exact(name, e.value, Tag::Quadrature),
            QuadMethod::ClosedForm => Quantity::exact(name, e.value, Tag::ClosedForm),
        });
    }
    let mut table = Table::new("omega1", &["epsilon", "omega1"]);
    for &e in &cfg.epsilon {
        table.push(vec![num(e), num(c.omega1(e))]);
    }
    env.tables.push(table);

    let dims: Vec<usize> = (5..=12).collect();
    let samples = if cfg.quadrature.method == QuadMethod::MonteCarlo { cfg.samples() } else { 0 };
    let report = checks::constants_check(&dims, samples.max(1000), cfg.seed())?;
    let mut t = Table::new("gamma", &["n", "name", "closed_form", "radial_gauss", "relative_error", "monte_carlo", "stderr"]);
    for r in &report.rows {
        t.push(vec![
            r.n.to_string(),
            r.name.clone(),
            num(r.closed_form),
            num(r.radial_gauss),
            num(r.relative_error),
            num(r.monte_carlo.value),
            num(r.monte_carlo.stderr),
        ]);
    }
    env.tables.push(t);
    env.checks.push(Check::new(
        "constants",
        report.passed,
        format!("radial Gauss within {:e} and Monte Carlo within {}σ for N = 5..12", report.quadrature_tolerance, report.sigma_tolerance),
    ));
    details(env, &report)
}

fn bubble_check(cfg: &RunConfig, env: &mut ReportEnvelope) -> Result<()> {
    let dims = [cfg.dim()];
    let identity = checks::bubble_identity_check(&dims, 20, cfg.seed())?;
    let kernel = checks::kernel_check(&dims, 20, cfg.seed())?;
    let mut t = Table::new("identity", &["n", "order", "residual_coarse", "residual_fine"]);
    for r in &identity.rows {
        t.push(vec![r.n.to_string(), num(r.order), num(r.residuals[0]), num(*r.residuals.last().expect("three steps"))]);
    }
    env.tables.push(t);
    env.checks.push(Check::new(
        "bubble_identity",
        identity.passed,
        format!("orders in [{:.3}, {:.3}]", identity.min_order, identity.max_order),
    ));
    env.checks.push(Check::new(
        "kernel",
        kernel.passed,
        format!("max relative error {:e}", kernel.max_relative_error.iter().map(|e| e.1).fold(0.0, f64::max)),
    ));
    details(env, &serde_json::json!({ "identity": identity, "kernel": kernel }))
}

fn green_check(cfg: &RunConfig, env: &mut ReportEnvelope) -> Result<()> {
    let n = cfg.dim();
    let r = checks::green_check(n, cfg.samples(), 20, cfg.samples().min(200_000), cfg.seed())?;
    let mut t = Table::new("lah", &["depth", "ratio_h", "ratio_lap_h"]);
    for row in &r.lah.rows {
        t.push(vec![num(row.depth), num(row.ratio_h), num(row.ratio_lap_h)]);
    }
    env.tables.push(t);
    env.quantities.push(Quantity::exact("gamma_hat", r.manufactured.gamma_hat, Tag::Fit));
    env.checks.push(Check::new(
        "manufactured",
        r.manufactured_passed,
        format!("max relative error {:.4} at fresh points", r.manufactured.max_fresh_error),
    ));
    env.checks.push(Check::new(
        "symmetry",
        r.symmetry_passed,
        format!("largest deviation {:.2}σ", r.max_symmetry_sigmas),
    ));
    env.checks.push(Check::new(
        "lah_depth",
        r.lah_passed,
        format!("slopes {:.3} and {:.3}", r.lah.h_fit.slope, r.lah.lap_fit.slope),
    ));
    let dom = cfg.ball()?;
    let a = cfg.weight_field()?;
    let hyp = weight_checks(&dom, &a, &cfg.zeta(), &WeightCheckOptions::default())?;
    env.checks.push(Check::new("weight_hypotheses", hyp.satisfied, "positivity, criticality and normal derivative at the anchor"));
    details(env, &serde_json::json!({ "green": r, "weight": hyp }))
}

fn projection_scan(cfg: &RunConfig, env: &mut ReportEnvelope) -> Result<()> {
    let p = &cfg.projection;
    let budget = ProjectionBudget {
        sandwich_points: p.sandwich_points,
        sandwich_samples: (cfg.samples() / 10).max(1000),
        remainder_samples: cfg.samples(),
        norm_samples: cfg.samples(),
    };
    let r = checks::projection_check(&[cfg.dim()], p.depth, &p.deltas, &budget, cfg.seed())?;
    let mut t = Table::new("remainder", &["n", "delta", "sup_remainder", "stderr", "semi_analytic", "excluded"]);
    for (n, scan) in &r.remainder {
        for row in &scan.rows {
            t.push(vec![
                n.to_string(),
                num(row.delta),
                num(row.sup_remainder),
                num(row.stderr),
                num(row.semi_analytic),
                row.excluded.to_string(),
            ]);
        }
    }
    env.tables.push(t);
    let mut t = Table::new("lap_norm", &["n", "delta", "norm", "stderr", "excluded"]);
    for (n, scan) in &r.lap_norm {
        for pt in &scan.points {
            t.push(vec![n.to_string(), num(pt.abscissa), num(pt.value), num(pt.stderr), pt.excluded.to_string()]);
        }
    }
    env.tables.push(t);
    env.checks.push(Check::new("sandwich", r.sandwich_passed, format!("0 ≤ PU ≤ U within 3σ at {} points", r.sandwich.len())));
    for (n, scan) in &r.remainder {
        env.quantities.push(Quantity::exact(format!("remainder_slope_n{n}"), scan.fit.slope, Tag::Fit));
    }
    env.checks.push(Check::new("remainder_slope", r.remainder_passed, "slope within N/2 ± 0.5"));
    details(env, &r)
}

fn asymptotics(cfg: &RunConfig, env: &mut ReportEnvelope) -> Result<()> {
    let dom = cfg.ball()?;
    let a = cfg.weight_field()?;
    let c = universal(cfg)?;
    let setup = AsymptoticSetup {
        domain: &dom,
        weight: &a,
        constants: &c,
        samples: cfg.samples(),
        seed: cfg.seed(),
    };
    let eps = *cfg.epsilon.last().expect("validated");
    let pair = match configuration(cfg)? {
        Config::Pair(p) => p,
        Config::K(_) => checks::critical_pair(&dom, &a, &c, &cfg.zeta(), cfg.sigma.log_variant, eps)?,
    };
    let single = ConfigK::new(&dom, &[cfg.zeta()], &[0], &[1.0], &[1.0], eps)?.placements[0].clone();
    let r = checks::asymptotics_check(&setup, &single, &pair, eps, &checks::log_grid(&cfg.epsilon), cfg.samples())?;
    let mut t = Table::new("integrals", &["integral_name", "epsilon", "measured", "stderr", "prediction", "ratio"]);
    for e in [&r.self_energy, &r.correction, &r.interaction] {
        t.push(vec![e.name.clone(), num(e.epsilon), num(e.first_order), num(e.first_order_stderr), num(e.coefficient), num(e.ratio())]);
    }
    env.tables.push(t);
    let mut t = Table::new("log_integral", &["epsilon", "measured", "stderr", "prediction"]);
    for e in &r.log_regression.rows {
        t.push(vec![num(e.epsilon), num(e.value), num(e.stderr), num(e.prediction)]);
    }
    env.tables.push(t);
    for (id, ok, e) in [
        ("self_energy", r.self_energy_passed(), &r.self_energy),
        ("correction", r.correction_passed(), &r.correction),
        ("interaction", r.interaction_passed(), &r.interaction),
    ] {
        env.checks.push(Check::new(id, ok, format!("ratio to predicted coefficient {:.4}", e.ratio())));
    }
    env.checks.push(Check::new(
        "log_slope",
        r.log_passed(),
        format!("slope {:.2} against {:.2}", r.log_regression.slope, r.log_regression.predicted_slope),
    ));
    details(env, &r)
}

fn critical_points(cfg: &RunConfig, env: &mut ReportEnvelope) -> Result<()> {
    let dom = cfg.ball()?;
    let a = cfg.weight_field()?;
    let c = universal(cfg)?;
    let data = AnchorData::at(&dom, &a, &cfg.zeta())?;
    let r = checks::critical_points_check(&c, data, cfg.sigma.log_variant)?;
    for (name, rep) in [("f1", &r.f1), ("f2", &r.f2)] {
        for (i, (d, t)) in rep.d_star.iter().zip(&rep.t_star).enumerate() {
            env.quantities.push(Quantity::exact(format!("{name}_d{}", i + 1), *d, Tag::ClosedForm));
            env.quantities.push(Quantity::exact(format!("{name}_t{}", i + 1), *t, Tag::ClosedForm));
        }
        env.quantities.push(Quantity::exact(format!("{name}_value"), rep.value, Tag::ClosedForm));
    }
    env.checks.push(Check::new(
        "f1_minimiser",
        r.f1_passed,
        format!("identities hold to {:e}", r.f1_scale_identity.abs().max(r.f1_depth_identity.abs())),
    ));
    env.checks.push(Check::new(
        "f2_minimiser",
        r.f2_passed,
        format!("gradient {:e}, {} iterations", r.f2.gradient_norm, r.f2.iterations),
    ));
    let mut t = Table::new("predicted_delta", &["theorem", "bubble", "epsilon", "delta"]);
    for rep in [&r.f1, &r.f2] {
        for &e in &cfg.epsilon {
            for (i, d) in rep.predicted_delta(cfg.dim(), e).into_iter().enumerate() {
                t.push(vec![rep.theorem.to_string(), (i + 1).to_string(), num(e), num(d)]);
            }
        }
    }
    env.tables.push(t);
    details(env, &serde_json::json!({ "anchor": cfg.zeta(), "critical_points": r }))
}

fn residual_scan(cfg: &RunConfig, env: &mut ReportEnvelope) -> Result<()> {
    let dom = cfg.ball()?;
    let a = cfg.weight_field()?;
    let c = universal(cfg)?;
    let eps = cfg.epsilon[0];
    let single = Config::K(checks::critical_single(&dom, &a, &c, &cfg.zeta(), eps)?);
    let pair = match configuration(cfg)? {
        p @ Config::Pair(_) => p,
        Config::K(_) => Config::Pair(checks::critical_pair(&dom, &a, &c, &cfg.zeta(), cfg.sigma.log_variant, eps)?),
    };
    let r = checks::error_norm_check(&dom, &a, &single, &pair, &cfg.epsilon, cfg.samples(), cfg.seed())?;
    let mut t = Table::new("error_norm", &["family", "epsilon", "error_norm", "stderr", "excluded"]);
    for fam in [&r.single, &r.pair, &r.misscaled] {
        for pt in &fam.scan.points {
            t.push(vec![fam.label.clone(), num(pt.abscissa), num(pt.value), num(pt.stderr), pt.excluded.to_string()]);
        }
        env.quantities.push(Quantity::exact(format!("slope_{}", fam.label), fam.scan.slope, Tag::Fit));
    }
    env.tables.push(t);
    env.checks.push(Check::new(
        "error_norm_slopes",
        r.passed,
        format!(
            "slopes {:.3} (single), {:.3} (pair), {:.3} (misscaled)",
            r.single.scan.slope, r.pair.scan.slope, r.misscaled.scan.slope
        ),
    ));
    details(env, &r)
}

fn energy_check(cfg: &RunConfig, env: &mut ReportEnvelope) -> Result<()> {
    let dom = cfg.ball()?;
    let a = cfg.weight_field()?;
    let c = universal(cfg)?;
    let conf = configuration(cfg)?;
    let r = checks::energy_check(&dom, &a, &c, &conf, &cfg.epsilon, cfg.sigma.log_variant, cfg.samples(), cfg.seed())?;
    let mut t = Table::new(
        "energy",
        &["epsilon", "J_numeric", "J_predicted", "diff_over_eps", "stderr", "reduced_numeric", "reduced_predicted"],
    );
    for row in &r.rows {
        t.push(vec![
            num(row.epsilon),
            num(row.j_numeric),
            num(row.j_predicted),
            num(row.diff_over_eps),
            num(row.stderr),
            num(row.reduced_numeric),
            num(row.reduced_predicted),
        ]);
    }
    env.tables.push(t);
    env.checks.push(Check::new("energy_monotone", r.monotone, "|J - prediction|/ε decreases along the grid"));
    env.checks.push(Check::new(
        "energy_coefficient",
        r.coefficient_error <= r.coefficient_tolerance,
        format!("relative gap {:.4} at the smallest ε", r.coefficient_error),
    ));
    details(env, &r)
}
