//! One-dimensional adaptive Gauss–Kronrod quadrature.
//!
//! Every deterministic integral in the crate reduces to a smooth (or mildly
//! peaked) integrand on a finite interval, so a global-adaptive G7/K15 rule is
//! all that is needed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Seven-point Gauss-Legendre nodes and weights mapped to [0, 1].
pub fn gauss7_unit() -> [(f64, f64); 7] {
    let mut out = [(0.0, 0.0); 7];
    for k in 0..4 {
        let x = XGK[2 * k + 1];
        let w = 0.5 * WG[k];
        out[k] = (0.5 * (1.0 - x), w);
        out[6 - k] = (0.5 * (1.0 + x), w);
    }
    out
}

/// Five-point Gauss-Legendre rule on [0, 1], exact through degree nine.
pub fn gauss5_unit() -> [(f64, f64); 5] {
    const X: [f64; 3] = [0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664_0];
    const W: [f64; 3] = [0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1];
    [
        (0.5 * (1.0 - X[2]), 0.5 * W[2]),
        (0.5 * (1.0 - X[1]), 0.5 * W[1]),
        (0.5, 0.5 * W[0]),
        (0.5 * (1.0 + X[1]), 0.5 * W[1]),
        (0.5 * (1.0 + X[2]), 0.5 * W[2]),
    ]
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-11,
            max_intervals: 400,
        }
    }
}

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kron * h;
    let err = ((kron - gauss) * h).abs();
    (value, err)
}

/// Global-adaptive G7/K15 integration of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> QuadResult {
    if a == b {
        return QuadResult {
            value: 0.0,
            error: 0.0,
            evals: 0,
            converged: true,
        };
    }
    let (v, e) = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Interval {
        a,
        b,
        value: v,
        error: e,
    });
    let mut total = v;
    let mut total_err = e;
    let mut evals = 15;
    while total_err > opts.abs_tol.max(opts.rel_tol * total.abs()) && heap.len() < opts.max_intervals {
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        evals += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Interval {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Interval {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // re-sum to shed the drift of the running totals
    let value: f64 = heap.iter().map(|i| i.value).sum();
    let error: f64 = heap.iter().map(|i| i.error).sum();
    QuadResult {
        value,
        error,
        evals,
        converged: error <= opts.abs_tol.max(opts.rel_tol * value.abs()),
    }
}

/// Integrates over `[0, 1]` with breakpoints clustered geometrically toward 1,
/// for integrands with a boundary layer of width about `layer` at the right end.
pub fn integrate_unit_with_layer<F: Fn(f64) -> f64>(f: F, layer: f64, opts: QuadOptions) -> QuadResult {
    let mut edges = vec![0.0];
    let mut w = 0.5;
    while w > 0.25 * layer.max(1e-12) {
        edges.push(1.0 - w);
        w *= 0.25;
    }
    edges.push(1.0);
    let mut out = QuadResult {
        value: 0.0,
        error: 0.0,
        evals: 0,
        converged: true,
    };
    for win in edges.windows(2) {
        let r = integrate(&f, win[0], win[1], opts);
        out.value += r.value;
        out.error += r.error;
        out.evals += r.evals;
        out.converged &= r.converged;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| x.powi(7) - 3.0 * x * x, 0.0, 2.0, QuadOptions::default());
        assert_relative_eq!(r.value, 256.0 / 8.0 - 8.0, max_relative = 1e-14);
        assert!(r.converged);
    }

    #[test]
    fn endpoint_log_singularity() {
        let r = integrate(|x: f64| x.ln(), 0.0, 1.0, QuadOptions::default());
        assert_relative_eq!(r.value, -1.0, max_relative = 1e-10);
    }

    #[test]
    fn sharp_layer_at_one() {
        // ∫_0^1 e/(e^2 + (1-s)^2) ds = atan(1/e)
        let e = 1e-4;
        let r = integrate_unit_with_layer(|s| e / (e * e + (1.0 - s) * (1.0 - s)), e, QuadOptions::default());
        assert_relative_eq!(r.value, (1.0 / e).atan(), max_relative = 1e-10);
    }

    #[test]
    fn gauss_rules_are_exact() {
        let v: f64 = gauss7_unit().iter().map(|(x, w)| w * x.powi(13)).sum();
        assert!((v - 1.0 / 14.0).abs() < 1e-15);
        let v: f64 = gauss5_unit().iter().map(|(x, w)| w * x.powi(9)).sum();
        assert!((v - 0.1).abs() < 1e-15);
    }
}
