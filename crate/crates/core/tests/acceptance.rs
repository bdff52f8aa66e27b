//! Acceptance suite. Each test prints one `PASS`/`FAIL` line for its
//! criterion, then asserts it.

use std::time::Instant;

use blowup_core::checks::{self, reference_setting, ProjectionBudget};
use blowup_core::config::{Format, RunConfig};
use blowup_core::constants::UniversalConstants;
use blowup_core::projection::AsymptoticSetup;
use blowup_core::reduced::{AnchorData, LogVariant};
use blowup_core::report::emit_reports;
use blowup_core::runner::run_subcommand;
use blowup_core::sigma::{Config, ConfigK};

const SEED: u64 = 20_240_601;

fn verdict(id: &str, passed: bool, start: Instant, detail: String) {
    println!(
        "[{}] {id} ({:.1} s): {detail}",
        if passed { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_01_constants() {
    let start = Instant::now();
    let r = checks::constants_check(&(5..=12).collect::<Vec<_>>(), 20_000, SEED).unwrap();
    let worst_rel = r.rows.iter().map(|x| x.relative_error).fold(0.0, f64::max);
    let worst_sig = r.rows.iter().map(|x| x.sigmas).fold(0.0, f64::max);
    let elapsed = start.elapsed().as_secs_f64();
    let ok = r.passed && r.quadrature_tolerance == 1e-8 && r.sigma_tolerance == 3.0 && elapsed < 5.0;
    verdict(
        "1 constants",
        ok,
        start,
        format!("max relative error {worst_rel:.2e} (tol 1e-8), max {worst_sig:.2}σ (tol 3σ), runtime < 5 s"),
    );
    assert!(ok);
}

#[test]
fn criterion_02_bubble_identity() {
    let start = Instant::now();
    let r = checks::bubble_identity_check(&[5, 6, 7], 20, SEED).unwrap();
    let ok = r.passed && r.rows.len() == 60 && start.elapsed().as_secs_f64() < 10.0;
    verdict(
        "2 bubble identity",
        ok,
        start,
        format!("orders in [{:.3}, {:.3}] (target 2.0 ± 0.3), runtime < 10 s", r.min_order, r.max_order),
    );
    assert!(ok);
}

#[test]
fn criterion_03_kernel() {
    let start = Instant::now();
    let r = checks::kernel_check(&[5, 6, 7, 8], 10, SEED).unwrap();
    let worst = r.max_relative_error.iter().map(|e| e.1).fold(0.0, f64::max);
    let ok = r.passed && r.tolerance == 1e-6;
    verdict("3 kernel derivatives", ok, start, format!("max relative error {worst:.2e} (tol 1e-6)"));
    assert!(ok);
}

#[test]
fn criterion_04_green() {
    let start = Instant::now();
    let r = checks::green_check(5, 1_000_000, 20, 200_000, SEED).unwrap();
    let ok = r.passed() && r.manufactured.fresh.len() == 5 && r.symmetry.len() == 20 && start.elapsed().as_secs_f64() < 600.0;
    verdict(
        "4 green",
        ok,
        start,
        format!(
            "manufactured {:.4} (tol 0.02), symmetry {:.2}σ (tol 3σ), LAH slopes {:.3}, {:.3} (band [0.7, 1.3])",
            r.manufactured.max_fresh_error, r.max_symmetry_sigmas, r.lah.h_fit.slope, r.lah.lap_fit.slope
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_05_projection() {
    let start = Instant::now();
    let budget = ProjectionBudget {
        sandwich_points: 100,
        sandwich_samples: 4_000,
        remainder_samples: 50_000,
        norm_samples: 20_000,
    };
    let r = checks::projection_check(&[5, 6], 0.3, &[0.02, 0.01, 0.005], &budget, SEED).unwrap();
    let slopes: Vec<String> = r
        .remainder
        .iter()
        .map(|(n, s)| format!("N={n}: {:.3} (target {:.1} ± 0.5)", s.fit.slope, *n as f64 / 2.0))
        .collect();
    let ok = r.passed() && r.sandwich.len() == 100;
    verdict(
        "5 projection",
        ok,
        start,
        format!("sandwich at 100 points within 3σ: {}; remainder slopes {}", r.sandwich_passed, slopes.join(", ")),
    );
    assert!(ok);
}

#[test]
fn criterion_06_asymptotic_integrals() {
    let start = Instant::now();
    let n = 5;
    let (dom, a, zeta) = reference_setting(n);
    let c = UniversalConstants::closed_form(n).unwrap();
    let setup = AsymptoticSetup {
        domain: &dom,
        weight: &a,
        constants: &c,
        samples: 1_000_000,
        seed: SEED,
    };
    let eps = 0.005;
    let pair = checks::critical_pair(&dom, &a, &c, &zeta, LogVariant::Weighted, eps).unwrap();
    let single = ConfigK::new(&dom, &[zeta.clone()], &[0], &[1.0], &[1.0], eps).unwrap().placements[0].clone();
    let grid = checks::log_grid(&[0.04, 0.02, 0.01, 0.005]);
    let r = checks::asymptotics_check(&setup, &single, &pair, eps, &grid, 200_000).unwrap();
    let ok = r.passed() && r.coefficient_tolerance == 0.15 && r.slope_tolerance == 0.10;
    verdict(
        "6 asymptotic integrals",
        ok,
        start,
        format!(
            "ratios self {:.4}, correction {:.4}, interaction {:.4} (tol 15%); log slope {:.2} vs {:.2} (tol 10%)",
            r.self_energy.ratio(),
            r.correction.ratio(),
            r.interaction.ratio(),
            r.log_regression.slope,
            r.log_regression.predicted_slope
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_07_reduced_energy() {
    let start = Instant::now();
    let c = UniversalConstants::closed_form(5).unwrap();
    let r = checks::critical_points_check(&c, AnchorData::new(1.0, 1.0), LogVariant::Weighted).unwrap();
    let reference = (r.f1.t_star[0] - 0.125).abs() < 1e-12 && (r.f1.d_star[0] - 0.0161).abs() < 5e-5;
    let grid = r.f2.grid.as_ref().unwrap();
    let ok = r.passed() && reference && grid.nodes_per_axis == 20 && grid.lower == 1e-3 && grid.upper == 10.0;
    verdict(
        "7 reduced energy",
        ok,
        start,
        format!(
            "F1 identities {:.1e}, {:.1e} (tol 1e-8); t* = {}, d* = {:.7}; F2 gradient {:.1e}, eigenvalues {:?}",
            r.f1_scale_identity, r.f1_depth_identity, r.f1.t_star[0], r.f1.d_star[0], r.f2.gradient_norm, r.f2.hessian_eigenvalues
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_08_error_norm_scaling() {
    let start = Instant::now();
    let n = 5;
    let (dom, a, zeta) = reference_setting(n);
    let c = UniversalConstants::closed_form(n).unwrap();
    let grid = [0.04, 0.02, 0.01, 0.005];
    let single = Config::K(checks::critical_single(&dom, &a, &c, &zeta, grid[0]).unwrap());
    let pair = Config::Pair(checks::critical_pair(&dom, &a, &c, &zeta, LogVariant::Weighted, grid[0]).unwrap());
    let r = checks::error_norm_check(&dom, &a, &single, &pair, &grid, 100_000, SEED).unwrap();
    let ok = r.passed && r.min_slope == 0.5 && start.elapsed().as_secs_f64() < 1800.0;
    verdict(
        "8 error-norm scaling",
        ok,
        start,
        format!(
            "slopes single {:.3}, pair {:.3} (min 0.5), misscaled {:.3} (must be smaller than pair)",
            r.single.scan.slope, r.pair.scan.slope, r.misscaled.scan.slope
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_09_energy_expansion() {
    let start = Instant::now();
    let n = 5;
    let (dom, a, zeta) = reference_setting(n);
    let c = UniversalConstants::closed_form(n).unwrap();
    let grid = [0.04, 0.02, 0.01, 0.005];
    let pair = Config::Pair(checks::critical_pair(&dom, &a, &c, &zeta, LogVariant::Weighted, grid[0]).unwrap());
    let r = checks::energy_check(&dom, &a, &c, &pair, &grid, LogVariant::Weighted, 50_000, SEED).unwrap();
    let diffs: Vec<String> = r.rows.iter().map(|x| format!("{:.3e}", x.diff_over_eps)).collect();
    let ok = r.passed && r.coefficient_tolerance == 0.2;
    verdict(
        "9 energy expansion",
        ok,
        start,
        format!(
            "|J - prediction|/ε = [{}], monotone {}; coefficient gap {:.4} (tol 0.2)",
            diffs.join(", "),
            r.monotone,
            r.coefficient_error
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_10_determinism() {
    let start = Instant::now();
    let mut cfg = RunConfig::minimal(5).unwrap();
    cfg.quadrature.samples = 2_000;
    cfg.quadrature.seed = Some(SEED);
    cfg.projection.sandwich_points = 5;
    let mut identical = true;
    let mut compared = 0;
    for sub in ["constants", "bubble-check", "projection-scan", "critical-points"] {
        let dirs = [tempfile_dir(sub, 0), tempfile_dir(sub, 1)];
        for d in &dirs {
            let env = run_subcommand(sub, &cfg).unwrap();
            emit_reports(&env, d, &[Format::Json, Format::Csv]).unwrap();
        }
        let mut names: Vec<_> = std::fs::read_dir(&dirs[0])
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .filter(|f| !f.to_string_lossy().contains("timing"))
            .collect();
        names.sort();
        for f in names {
            compared += 1;
            identical &= std::fs::read(dirs[0].join(&f)).unwrap() == std::fs::read(dirs[1].join(&f)).unwrap();
        }
        for d in dirs {
            std::fs::remove_dir_all(d).unwrap();
        }
    }
    let ok = identical && compared >= 8;
    verdict("10 determinism", ok, start, format!("{compared} report files byte-identical across two runs: {identical}"));
    assert!(ok);
}

fn tempfile_dir(sub: &str, k: u32) -> std::path::PathBuf {
    std::env::temp_dir().join(format!("blowup-acceptance-{}-{sub}-{k}", std::process::id()))
}
