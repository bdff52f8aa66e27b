//! Fixtures shared by the benchmarks.

use blowup_core::bubbles::Bubble;
use blowup_core::geometry::{BallDomain, WeightField};
use blowup_core::projection::ProjectedBubble;

/// Unit ball, weight `2 + x₁` and a bubble of scale `delta` at depth `depth`
/// below the anchor `-e₁`.
pub fn boundary_bubble(n: usize, delta: f64, depth: f64) -> (BallDomain, WeightField, ProjectedBubble) {
    let dom = BallDomain::unit(n);
    let mut g = vec![0.0; n];
    g[0] = 1.0;
    let mut xi = vec![0.0; n];
    xi[0] = depth - 1.0;
    let pb = ProjectedBubble::new(Bubble::new(delta, xi).expect("valid bubble"), dom.clone()).expect("inside the ball");
    (dom, WeightField::affine(2.0, g), pb)
}

/// A deterministic set of evaluation points spread through the ball.
pub fn probe_points(n: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|k| {
            let r = 0.9 * (k as f64 + 0.5) / count as f64;
            (0..n)
                .map(|j| r * ((k * (j + 1)) as f64 * 0.7).cos() / (n as f64).sqrt())
                .collect()
        })
        .collect()
}
