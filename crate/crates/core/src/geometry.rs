//! Ball domains, boundary frames, reflections and weight fields.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{self, Stream};
use crate::vecops::{axpy, dist, dot, norm, scale, sub};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallDomain {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Collar width as a fraction of the radius.
    pub collar_fraction: f64,
}

impl BallDomain {
    pub fn new(center: Vec<f64>, radius: f64, collar_fraction: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
        }
        if !(collar_fraction > 0.0 && collar_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "collar_fraction must lie in (0,1), got {collar_fraction}"
            )));
        }
        Ok(Self {
            center,
            radius,
            collar_fraction,
        })
    }

    pub fn unit(n: usize) -> Self {
        Self {
            center: vec![0.0; n],
            radius: 1.0,
            collar_fraction: 0.5,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn is_unit(&self) -> bool {
        self.radius == 1.0 && self.center.iter().all(|&c| c == 0.0)
    }

    /// Signed distance to the boundary, positive inside.
    pub fn depth(&self, x: &[f64]) -> f64 {
        self.radius - dist(x, &self.center)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.depth(x) > 0.0
    }

    pub fn in_collar(&self, x: &[f64]) -> bool {
        let d = self.depth(x);
        d >= 0.0 && d <= self.collar_fraction * self.radius
    }

    pub fn check_inside(&self, x: &[f64]) -> Result<()> {
        self.check_dim(x)?;
        let d = self.depth(x);
        if d < -1e-12 * self.radius {
            return Err(Error::OutsideDomain {
                distance: dist(x, &self.center),
                radius: self.radius,
            });
        }
        Ok(())
    }

    pub fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::InvalidPoint(format!(
                "expected a point in dimension {}, got {}",
                self.dim(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Outward unit normal at a boundary point.
    pub fn outward_normal(&self, sigma: &[f64]) -> Vec<f64> {
        scale(&sub(sigma, &self.center), 1.0 / self.radius)
    }

    pub fn check_on_boundary(&self, zeta: &[f64]) -> Result<()> {
        self.check_dim(zeta)?;
        let r = dist(zeta, &self.center);
        if (r - self.radius).abs() > 1e-9 * self.radius {
            return Err(Error::InvalidPoint(format!(
                "anchor at distance {r} from the center is not on the sphere of radius {}",
                self.radius
            )));
        }
        Ok(())
    }

    /// Maps `x` to unit-ball coordinates.
    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        scale(&sub(x, &self.center), 1.0 / self.radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFrame {
    pub base: Vec<f64>,
    pub depth: f64,
    pub inward_normal: Vec<f64>,
    pub mirror: Vec<f64>,
}

pub fn boundary_frame(dom: &BallDomain, xi: &[f64]) -> Result<BoundaryFrame> {
    dom.check_dim(xi)?;
    let rel = sub(xi, &dom.center);
    let r = norm(&rel);
    if r > dom.radius * (1.0 + 1e-12) {
        return Err(Error::OutsideDomain {
            distance: r,
            radius: dom.radius,
        });
    }
    if r == 0.0 {
        return Err(Error::NoUniqueFrame);
    }
    let outward = scale(&rel, 1.0 / r);
    let base = axpy(&dom.center, dom.radius, &outward);
    let depth = dom.radius - r;
    let inward_normal = scale(&outward, -1.0);
    let mirror = axpy(&base, -depth, &inward_normal);
    Ok(BoundaryFrame {
        base,
        depth,
        inward_normal,
        mirror,
    })
}

/// Smallest ratio `|ξ̃ - y| / |ξ - y|` over the sample points `ys`. Points that
/// coincide with `ξ` give an infinite ratio and are skipped.
pub fn reflection_comparability(dom: &BallDomain, xi: &[f64], ys: &[Vec<f64>]) -> Result<f64> {
    if ys.is_empty() {
        return Err(Error::InvalidArgument("reflection_comparability needs at least one sample".into()));
    }
    let frame = boundary_frame(dom, xi)?;
    if !dom.in_collar(xi) {
        return Err(Error::InvalidPoint("point is not in the boundary collar".into()));
    }
    let mut best = f64::INFINITY;
    for y in ys {
        let den = dist(xi, y);
        if den == 0.0 {
            continue;
        }
        best = best.min(dist(&frame.mirror, y) / den);
    }
    Ok(best)
}

/// Uniform samples in the domain, keyed by a deterministic stream.
pub fn sample_domain(dom: &BallDomain, count: usize, stream: Stream) -> Vec<Vec<f64>> {
    let mut rng = stream.rng(0);
    (0..count)
        .map(|_| mc::ball_point(&mut rng, &dom.center, dom.radius))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub amplitude: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightKind {
    Affine,
    AffinePlusBump,
}

/// `a(x) = a₀ + g·x + κ exp(-|x-m|²/s²)`, the bump being optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightField {
    pub kind: WeightKind,
    pub a0: f64,
    pub g: Vec<f64>,
    #[serde(default)]
    pub bump: Option<Bump>,
}

impl WeightField {
    pub fn affine(a0: f64, g: Vec<f64>) -> Self {
        Self {
            kind: WeightKind::Affine,
            a0,
            g,
            bump: None,
        }
    }

    pub fn constant(n: usize, a0: f64) -> Self {
        Self::affine(a0, vec![0.0; n])
    }

    pub fn affine_plus_bump(a0: f64, g: Vec<f64>, bump: Bump) -> Result<Self> {
        if !(bump.width > 0.0) {
            return Err(Error::InvalidArgument("bump width must be positive".into()));
        }
        if bump.center.len() != g.len() {
            return Err(Error::InvalidArgument("bump center has the wrong dimension".into()));
        }
        Ok(Self {
            kind: WeightKind::AffinePlusBump,
            a0,
            g,
            bump: Some(bump),
        })
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    fn bump_factor(&self, x: &[f64]) -> Option<(&Bump, f64)> {
        self.bump.as_ref().map(|b| {
            let r2 = crate::vecops::dist_sq(x, &b.center);
            (b, b.amplitude * (-r2 / (b.width * b.width)).exp())
        })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.a0 + dot(&self.g, x);
        if let Some((_, e)) = self.bump_factor(x) {
            v += e;
        }
        v
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut grad = self.g.clone();
        if let Some((b, e)) = self.bump_factor(x) {
            let c = -2.0 * e / (b.width * b.width);
            for (gi, (xi, mi)) in grad.iter_mut().zip(x.iter().zip(&b.center)) {
                *gi += c * (xi - mi);
            }
        }
        grad
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        match self.bump_factor(x) {
            None => 0.0,
            Some((b, e)) => {
                let s2 = b.width * b.width;
                let r2 = crate::vecops::dist_sq(x, &b.center);
                e * (4.0 * r2 / (s2 * s2) - 2.0 * self.dim() as f64 / s2)
            }
        }
    }

    /// Lower bound for `a` on the closed ball: exact minimum of the affine part
    /// minus the most negative the bump can be.
    pub fn analytic_lower_bound(&self, dom: &BallDomain) -> f64 {
        let affine_min = self.a0 + dot(&self.g, &dom.center) - norm(&self.g) * dom.radius;
        let bump_min = self.bump.as_ref().map_or(0.0, |b| b.amplitude.min(0.0));
        affine_min + bump_min
    }
}

/// Multistart projected gradient descent for `min a` over the closed ball.
fn sampled_minimum(a: &WeightField, dom: &BallDomain, stream: Stream) -> f64 {
    let mut starts = sample_domain(dom, 512, stream.child(0));
    let mut rng = stream.rng(1);
    for _ in 0..128 {
        let s = mc::sphere_point(&mut rng, dom.dim());
        starts.push(axpy(&dom.center, dom.radius, &s));
    }
    let mut best = f64::INFINITY;
    let mut ranked: Vec<(f64, Vec<f64>)> = starts.into_iter().map(|x| (a.value(&x), x)).collect();
    ranked.sort_by(|p, q| p.0.total_cmp(&q.0));
    for (v0, mut x) in ranked.into_iter().take(16) {
        let mut v = v0;
        let mut step = 0.1 * dom.radius;
        for _ in 0..200 {
            let g = a.gradient(&x);
            let gn = norm(&g);
            if gn == 0.0 || step < 1e-12 * dom.radius {
                break;
            }
            let mut trial = axpy(&x, -step / gn, &g);
            let off = sub(&trial, &dom.center);
            let r = norm(&off);
            if r > dom.radius {
                trial = axpy(&dom.center, dom.radius / r, &off);
            }
            let vt = a.value(&trial);
            if vt < v {
                x = trial;
                v = vt;
            } else {
                step *= 0.5;
            }
        }
        best = best.min(v);
    }
    best
}

/// Orthonormal basis of the tangent space orthogonal to `nu`, built by
/// Gram-Schmidt over the coordinate axes.
pub fn tangent_basis(nu: &[f64]) -> Vec<Vec<f64>> {
    let n = nu.len();
    let mut basis: Vec<Vec<f64>> = vec![nu.to_vec()];
    let mut axes: Vec<usize> = (0..n).collect();
    // Start from the axes least aligned with nu for numerical stability.
    axes.sort_by(|&i, &j| nu[i].abs().total_cmp(&nu[j].abs()));
    for i in axes {
        if basis.len() == n {
            break;
        }
        let mut v = crate::vecops::unit(n, i);
        for b in &basis {
            let c = dot(&v, b);
            v = axpy(&v, -c, b);
        }
        let len = norm(&v);
        if len > 1e-8 {
            basis.push(scale(&v, 1.0 / len));
        }
    }
    let mut tangents = basis.split_off(1);
    // Deterministic order: sort by the axis each vector is most aligned with.
    tangents.sort_by_key(|v| {
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(k, _)| k)
            .unwrap_or(0)
    });
    tangents
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub tangential_gradient_norm: f64,
    pub is_critical: bool,
    pub tangential_hessian_eigenvalues: Vec<f64>,
    pub nondegenerate: bool,
    /// `∇a(ζ⁰)·ν(ζ⁰)` with the inward normal.
    pub normal_derivative: f64,
    pub sampled_min: f64,
    pub analytic_lower_bound: f64,
    pub positive: bool,
    /// Criticality, nondegeneracy, positive inward derivative and positivity.
    pub satisfied: bool,
}

pub struct WeightCheckOptions {
    pub critical_tol: f64,
    pub nondegenerate_tol: f64,
    pub seed: u64,
}

impl Default for WeightCheckOptions {
    fn default() -> Self {
        Self {
            critical_tol: 1e-6,
            nondegenerate_tol: 1e-4,
            seed: 0,
        }
    }
}

pub fn weight_checks(dom: &BallDomain, a: &WeightField, zeta: &[f64], opts: &WeightCheckOptions) -> Result<HypothesisReport> {
    dom.check_on_boundary(zeta)?;
    let n = dom.dim();
    let outward = dom.outward_normal(zeta);
    let tangents = tangent_basis(&outward);
    let r = dom.radius;
    // Geodesic chart of the sphere around ζ⁰.
    let chart = |s: &[f64]| -> f64 {
        let mut v = vec![0.0; n];
        for (si, t) in s.iter().zip(&tangents) {
            v = axpy(&v, *si, t);
        }
        let len = norm(&v);
        let theta = len / r;
        let mut p = axpy(&dom.center, r * theta.cos(), &outward);
        if len > 0.0 {
            p = axpy(&p, r * theta.sin() / len, &v);
        }
        a.value(&p)
    };
    let m = n - 1;
    let h = 1e-5 * r;
    let origin = vec![0.0; m];
    let shifted = |pairs: &[(usize, f64)]| {
        let mut s = origin.clone();
        for &(i, d) in pairs {
            s[i] += d;
        }
        chart(&s)
    };
    let f0 = chart(&origin);
    let grad: Vec<f64> = (0..m)
        .map(|i| (shifted(&[(i, h)]) - shifted(&[(i, -h)])) / (2.0 * h))
        .collect();
    let mut hess = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        hess[(i, i)] = (shifted(&[(i, h)]) - 2.0 * f0 + shifted(&[(i, -h)])) / (h * h);
        for j in 0..i {
            let v = (shifted(&[(i, h), (j, h)]) - shifted(&[(i, h), (j, -h)]) - shifted(&[(i, -h), (j, h)])
                + shifted(&[(i, -h), (j, -h)]))
                / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let mut eig: Vec<f64> = SymmetricEigen::new(hess).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let grad_norm = norm(&grad);
    let is_critical = grad_norm < opts.critical_tol;
    let nondegenerate = eig.iter().all(|e| e.abs() > opts.nondegenerate_tol);
    let normal_derivative = -dot(&a.gradient(zeta), &outward);
    let sampled = sampled_minimum(a, dom, Stream::new(opts.seed, "geometry", "positivity"));
    let bound = a.analytic_lower_bound(dom);
    let positive = bound > 0.0 || sampled > 0.0;
    Ok(HypothesisReport {
        tangential_gradient_norm: grad_norm,
        is_critical,
        tangential_hessian_eigenvalues: eig,
        nondegenerate,
        normal_derivative,
        sampled_min: sampled,
        analytic_lower_bound: bound,
        positive,
        satisfied: is_critical && nondegenerate && normal_derivative > 0.0 && positive,
    })
}

/// Reflections through the hyperplanes containing the normal line at `ζ⁰`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryGroup {
    pub anchor: Vec<f64>,
    pub inward_normal: Vec<f64>,
    pub tangents: Vec<Vec<f64>>,
}

impl SymmetryGroup {
    pub fn new(dom: &BallDomain, zeta: &[f64]) -> Result<Self> {
        dom.check_on_boundary(zeta)?;
        let outward = dom.outward_normal(zeta);
        Ok(Self {
            anchor: zeta.to_vec(),
            inward_normal: scale(&outward, -1.0),
            tangents: tangent_basis(&outward),
        })
    }

    pub fn count(&self) -> usize {
        self.tangents.len()
    }

    /// `R_i`, flipping the `e_i` coordinate of `x - ζ⁰` (`i` is 1-based).
    pub fn reflect_map(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        if i < 1 || i > self.count() {
            return Err(Error::IndexOutOfRange {
                index: i,
                min: 1,
                max: self.count(),
            });
        }
        let e = &self.tangents[i - 1];
        let c = dot(&sub(x, &self.anchor), e);
        Ok(axpy(x, -2.0 * c, e))
    }
}

/// Random direction helper used by the property checks.
pub fn random_point_in(dom: &BallDomain, rng: &mut impl Rng) -> Vec<f64> {
    mc::ball_point(rng, &dom.center, dom.radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn e(n: usize, i: usize, s: f64) -> Vec<f64> {
        scale(&crate::vecops::unit(n, i), s)
    }

    #[test]
    fn frame_example() {
        let dom = BallDomain::unit(5);
        let f = boundary_frame(&dom, &e(5, 0, 0.9)).unwrap();
        assert_eq!(f.base, e(5, 0, 1.0));
        assert_relative_eq!(f.depth, 0.1, epsilon = 1e-15);
        assert_eq!(f.inward_normal, e(5, 0, -1.0));
        assert_relative_eq!(f.mirror[0], 1.1, epsilon = 1e-15);
        assert!(matches!(boundary_frame(&dom, &[0.0; 5]), Err(Error::NoUniqueFrame)));
        assert!(matches!(boundary_frame(&dom, &e(5, 1, 1.5)), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn comparability_examples() {
        let dom = BallDomain::unit(5);
        let xi = e(5, 0, 0.9);
        let ys = sample_domain(&dom, 10_000, Stream::new(3, "test", "cmp"));
        assert!(reflection_comparability(&dom, &xi, &ys).unwrap() >= 0.5);
        let with_xi = vec![xi.clone(), e(5, 1, 0.2)];
        assert!(reflection_comparability(&dom, &xi, &with_xi).unwrap().is_finite());
        let on_bdry = e(5, 0, 1.0);
        let r = reflection_comparability(&dom, &on_bdry, &ys).unwrap();
        assert_relative_eq!(r, 1.0, epsilon = 1e-12);
        assert!(reflection_comparability(&dom, &xi, &[]).is_err());
    }

    #[test]
    fn weight_examples() {
        let dom = BallDomain::unit(5);
        let a = WeightField::affine(2.0, e(5, 0, 1.0));
        let o = WeightCheckOptions::default();
        let rep = weight_checks(&dom, &a, &e(5, 0, -1.0), &o).unwrap();
        assert!(rep.is_critical && rep.nondegenerate && rep.positive && rep.satisfied);
        assert_relative_eq!(rep.normal_derivative, 1.0, epsilon = 1e-14);
        assert_relative_eq!(rep.analytic_lower_bound, 1.0, epsilon = 1e-14);
        assert!((rep.sampled_min - 1.0).abs() < 1e-6);
        for ev in &rep.tangential_hessian_eigenvalues {
            assert!((ev - 1.0).abs() < 1e-4);
        }
        let rep = weight_checks(&dom, &a, &e(5, 0, 1.0), &o).unwrap();
        assert!(rep.is_critical && rep.normal_derivative < 0.0 && !rep.satisfied);
        let rep = weight_checks(&dom, &a, &e(5, 1, 1.0), &o).unwrap();
        assert!(!rep.is_critical);
        assert!(weight_checks(&dom, &a, &e(5, 1, 0.5), &o).is_err());
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let bump = Bump {
            center: vec![0.1, -0.2, 0.0, 0.3, 0.0],
            amplitude: -0.4,
            width: 0.6,
        };
        let a = WeightField::affine_plus_bump(3.0, vec![0.5, 0.1, 0.0, 0.0, -0.2], bump).unwrap();
        let x = vec![0.2, 0.1, -0.3, 0.05, 0.4];
        let h = 1e-5;
        let grad = a.gradient(&x);
        let mut lap = 0.0;
        for i in 0..5 {
            let xp = axpy(&x, h, &crate::vecops::unit(5, i));
            let xm = axpy(&x, -h, &crate::vecops::unit(5, i));
            assert_relative_eq!(grad[i], (a.value(&xp) - a.value(&xm)) / (2.0 * h), epsilon = 1e-8);
            lap += (a.value(&xp) - 2.0 * a.value(&x) + a.value(&xm)) / (h * h);
        }
        assert_relative_eq!(a.laplacian(&x), lap, epsilon = 1e-4);
        let dom = BallDomain::unit(5);
        assert!(a.analytic_lower_bound(&dom) <= sampled_minimum(&a, &dom, Stream::new(0, "t", "t")));
    }

    #[test]
    fn reflect_index_range() {
        let dom = BallDomain::unit(5);
        let g = SymmetryGroup::new(&dom, &e(5, 0, -1.0)).unwrap();
        assert_eq!(g.count(), 4);
        assert!(g.reflect_map(0, &[0.0; 5]).is_err());
        assert!(g.reflect_map(5, &[0.0; 5]).is_err());
        // a point with zero e_1 coordinate is fixed
        let x = vec![0.3, 0.0, 0.2, -0.1, 0.4];
        let fixed = g.reflect_map(1, &x).unwrap();
        assert!(dist(&fixed, &x) < 1e-15);
    }

    fn vec5() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-0.5f64..0.5, 5)
    }

    proptest! {
        #[test]
        fn frame_round_trip(x in vec5()) {
            prop_assume!(norm(&x) > 1e-3);
            let dom = BallDomain::unit(5);
            let f = boundary_frame(&dom, &x).unwrap();
            let back = axpy(&f.base, f.depth, &f.inward_normal);
            prop_assert!(dist(&back, &x) < 1e-14);
            let mid = scale(&crate::vecops::add(&x, &f.mirror), 0.5);
            prop_assert!((norm(&mid) - 1.0).abs() < 1e-14);
            prop_assert!(norm(&f.mirror) > 1.0);
        }

        #[test]
        fn reflections_are_isometric_involutions(x in vec5(), y in vec5(), axis in 0usize..5, sign in prop::bool::ANY) {
            let dom = BallDomain::unit(5);
            let zeta = e(5, axis, if sign { 1.0 } else { -1.0 });
            let g = SymmetryGroup::new(&dom, &zeta).unwrap();
            for i in 1..=4 {
                let rx = g.reflect_map(i, &x).unwrap();
                let ry = g.reflect_map(i, &y).unwrap();
                prop_assert!(dist(&g.reflect_map(i, &rx).unwrap(), &x) < 1e-14);
                prop_assert!((dist(&rx, &ry) - dist(&x, &y)).abs() < 1e-14);
                prop_assert!((norm(&rx) - norm(&x)).abs() < 1e-14);
            }
        }

        #[test]
        fn symmetric_weights_are_invariant(x in vec5(), k in -0.5f64..0.5) {
            let dom = BallDomain::unit(5);
            let zeta = e(5, 0, -1.0);
            let g = SymmetryGroup::new(&dom, &zeta).unwrap();
            let bump = Bump { center: e(5, 0, -0.4), amplitude: k, width: 0.3 };
            let a = WeightField::affine_plus_bump(2.0, e(5, 0, 0.7), bump).unwrap();
            for i in 1..=4 {
                let rx = g.reflect_map(i, &x).unwrap();
                prop_assert!((a.value(&rx) - a.value(&x)).abs() < 1e-12);
            }
        }

        #[test]
        fn collar_mirror_comparability(x in vec5(), y in vec5(), t in 0.5f64..1.0) {
            prop_assume!(norm(&x) > 1e-3);
            let dom = BallDomain::unit(5);
            let xi = scale(&x, t / norm(&x));
            let yy = scale(&y, 0.99 / (1.0f64).max(norm(&y) * 2.0));
            let f = boundary_frame(&dom, &xi).unwrap();
            prop_assert!(dist(&f.mirror, &yy) >= 0.5 * dist(&xi, &yy));
        }
    }
}
