//! Seeded Monte Carlo plumbing: keyed random streams, chunked parallel
//! estimators with a fixed reduction order, and the radial proposal samplers
//! shared by every integral in the crate.
//!
//! A stream is identified by `(seed, module, check)`; chunk `c` of a stream
//! uses ChaCha stream number `c`, so results do not depend on how chunks are
//! scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::special::{ball_volume, ln_gamma, radial_profile_mass};
use crate::vecops::norm_sq;

pub const CHUNK: usize = 4096;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_str(h: u64, s: &str) -> u64 {
    s.bytes().fold(splitmix(h ^ 0xA5A5), |acc, b| splitmix(acc ^ b as u64))
}

/// Identity of one random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stream {
    key: u64,
}

impl Stream {
    pub fn new(seed: u64, module: &str, check: &str) -> Self {
        Self {
            key: hash_str(hash_str(splitmix(seed), module), check),
        }
    }

    /// Derived stream for a sub-task (an ε-grid entry, a probe point, ...).
    pub fn child(&self, index: u64) -> Self {
        Self {
            key: splitmix(self.key ^ splitmix(index.wrapping_add(1))),
        }
    }

    pub fn rng(&self, chunk: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(chunk);
        rng
    }
}

/// A sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            stderr: 0.0,
            samples: 0,
        }
    }

    pub fn scaled(self, s: f64) -> Self {
        Self {
            value: self.value * s,
            stderr: self.stderr * s.abs(),
            samples: self.samples,
        }
    }

    pub fn shifted(self, c: f64) -> Self {
        Self {
            value: self.value + c,
            ..self
        }
    }

    /// Sum of independent estimates.
    pub fn plus(self, other: McEstimate) -> Self {
        Self {
            value: self.value + other.value,
            stderr: self.stderr.hypot(other.stderr),
            samples: self.samples + other.samples,
        }
    }

    pub fn within_sigmas(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr
    }
}

#[derive(Clone, Copy, Default)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn merge(self, o: Moments) -> Moments {
        Moments {
            n: self.n + o.n,
            sum: self.sum + o.sum,
            sum_sq: self.sum_sq + o.sum_sq,
        }
    }

    fn estimate(&self) -> McEstimate {
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = if self.n > 1 {
            ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        McEstimate {
            value: mean,
            stderr: (var / n).sqrt(),
            samples: self.n,
        }
    }
}

fn chunk_sizes(samples: usize) -> Vec<(u64, usize)> {
    let full = samples / CHUNK;
    let rest = samples % CHUNK;
    let mut v: Vec<(u64, usize)> = (0..full as u64).map(|c| (c, CHUNK)).collect();
    if rest > 0 {
        v.push((full as u64, rest));
    }
    v
}

/// Mean of `f(rng)` over `samples` draws.
pub fn mean<F>(stream: Stream, samples: usize, f: F) -> McEstimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    mean_multi(stream, samples, 1, |rng, out| out[0] = f(rng))[0]
}

/// Componentwise means of a vector-valued sample `f(rng, out)`.
///
/// Chunks run in parallel; partial moments are reduced in chunk order.
pub fn mean_multi<F>(stream: Stream, samples: usize, width: usize, f: F) -> Vec<McEstimate>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    assert!(samples > 0, "Monte Carlo needs at least one sample");
    let partials: Vec<Vec<Moments>> = chunk_sizes(samples)
        .into_par_iter()
        .map(|(chunk, count)| {
            let mut rng = stream.rng(chunk);
            let mut acc = vec![Moments::default(); width];
            let mut buf = vec![0.0; width];
            for _ in 0..count {
                buf.iter_mut().for_each(|b| *b = 0.0);
                f(&mut rng, &mut buf);
                for (m, &v) in acc.iter_mut().zip(&buf) {
                    m.push(v);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Moments::default(); width];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t = t.merge(p);
        }
    }
    total.iter().map(Moments::estimate).collect()
}

/// Uniformly distributed unit vector in R^n.
pub fn sphere_point<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let r = norm_sq(&v).sqrt();
        if r > 1e-300 {
            return v.into_iter().map(|x| x / r).collect();
        }
    }
}

/// Uniform point in the ball of radius `radius` centred at `center`.
pub fn ball_point<R: Rng + ?Sized>(rng: &mut R, center: &[f64], radius: f64) -> Vec<f64> {
    let n = center.len();
    let dir = sphere_point(rng, n);
    let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
    center.iter().zip(dir).map(|(c, d)| c + r * d).collect()
}

pub fn ball_density(n: usize, radius: f64) -> f64 {
    1.0 / (ball_volume(n) * radius.powi(n as i32))
}

/// Polar proposal around a centre: direction uniform, radius with density
/// `∝ ρ^{m-1}` on `[0, rho_max]`. Suited to integrands with a `ρ^{m-N}`
/// singularity at the centre, whose importance weights it keeps bounded.
#[derive(Debug, Clone, Copy)]
pub struct Polar {
    pub n: usize,
    pub rho_max: f64,
    pub m: f64,
}

impl Polar {
    pub fn new(n: usize, rho_max: f64, m: f64) -> Self {
        assert!(rho_max > 0.0 && m > 0.0);
        Self { n, rho_max, m }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, center: &[f64]) -> Vec<f64> {
        let u: f64 = rng.random();
        let rho = self.rho_max * u.powf(1.0 / self.m);
        let dir = sphere_point(rng, self.n);
        center.iter().zip(dir).map(|(c, d)| c + rho * d).collect()
    }

    /// Density at distance `rho` from the centre.
    pub fn density(&self, rho: f64) -> f64 {
        if rho > self.rho_max {
            return 0.0;
        }
        let area = crate::special::sphere_area(self.n);
        self.m * rho.powf(self.m - self.n as f64) / (self.rho_max.powf(self.m) * area)
    }
}

/// Proposal with density proportional to `(1 + |z|^2)^{-k}` on R^n, scaled by
/// `scale` and centred at `center`.
///
/// The radius is drawn exactly: `u = r^2/(1+r^2)` is Beta(n/2, k - n/2).
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub n: usize,
    pub k: f64,
    beta: Beta<f64>,
    log_mass: f64,
}

impl RadialProfile {
    pub fn new(n: usize, k: f64) -> Self {
        let h = n as f64 / 2.0;
        assert!(k > h, "radial profile exponent {k} not normalisable in R^{n}");
        Self {
            n,
            k,
            beta: Beta::new(h, k - h).expect("valid beta parameters"),
            log_mass: radial_profile_mass(n, k).ln(),
        }
    }

    /// Unit-scale draw `z`.
    pub fn sample_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = self.beta.sample(rng);
        let r = (u / (1.0 - u)).sqrt();
        let mut z = sphere_point(rng, self.n);
        z.iter_mut().for_each(|c| *c *= r);
        z
    }

    /// Density of the unit-scale proposal at `z`.
    pub fn density_unit(&self, z_sq: f64) -> f64 {
        (-self.k * z_sq.ln_1p() - self.log_mass).exp()
    }

    /// Density of `center + scale * z` at a point with squared offset `r_sq`.
    pub fn density(&self, r_sq: f64, scale: f64) -> f64 {
        self.density_unit(r_sq / (scale * scale)) / scale.powi(self.n as i32)
    }
}

/// One component of a [`Mixture`].
#[derive(Debug, Clone)]
pub enum Component {
    /// `center + scale·z` with `z` from a [`RadialProfile`].
    Profile {
        profile: RadialProfile,
        center: Vec<f64>,
        scale: f64,
    },
    Polar { polar: Polar, center: Vec<f64> },
    /// Uniform on a ball.
    Uniform { center: Vec<f64>, radius: f64 },
}

impl Component {
    fn center(&self) -> &[f64] {
        match self {
            Component::Profile { center, .. } | Component::Polar { center, .. } | Component::Uniform { center, .. } => center,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Component::Profile { profile, center, scale } => crate::vecops::axpy(center, *scale, &profile.sample_unit(rng)),
            Component::Polar { polar, center } => polar.sample(rng, center),
            Component::Uniform { center, radius } => ball_point(rng, center, *radius),
        }
    }

    fn density(&self, y: &[f64]) -> f64 {
        match self {
            Component::Profile { profile, center, scale } => profile.density(crate::vecops::dist_sq(y, center), *scale),
            Component::Polar { polar, center } => polar.density(crate::vecops::dist(y, center)),
            Component::Uniform { center, radius } => {
                if crate::vecops::dist(y, center) <= *radius {
                    ball_density(center.len(), *radius)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Weighted mixture of centrally symmetric proposals.
///
/// [`Mixture::sample_pair`] returns a draw and its reflection through the
/// centre of the chosen component. Both have the mixture as marginal law, so
/// averaging `f/q` over the pair stays unbiased while cancelling the odd part
/// of `f` about that centre.
#[derive(Debug, Clone)]
pub struct Mixture {
    components: Vec<(f64, Component)>,
}

impl Mixture {
    pub fn new(weighted: Vec<(f64, Component)>) -> Self {
        assert!(!weighted.is_empty(), "empty mixture");
        let total: f64 = weighted.iter().map(|w| w.0).sum();
        assert!(total > 0.0 && weighted.iter().all(|w| w.0 >= 0.0));
        Self {
            components: weighted.into_iter().map(|(w, c)| (w / total, c)).collect(),
        }
    }

    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> &Component {
        let mut u: f64 = rng.random();
        for (w, c) in &self.components {
            if u < *w {
                return c;
            }
            u -= w;
        }
        &self.components.last().expect("non-empty").1
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.pick(rng).sample(rng)
    }

    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let c = self.pick(rng);
        let y = c.sample(rng);
        let mirror = c.center().iter().zip(&y).map(|(m, v)| 2.0 * m - v).collect();
        (y, mirror)
    }

    pub fn density(&self, y: &[f64]) -> f64 {
        self.components.iter().map(|(w, c)| w * c.density(y)).sum()
    }

    /// Mean of `f(y)/q(y)` over antithetic pairs: an unbiased estimate of `∫f`.
    pub fn integrate<F>(&self, stream: Stream, samples: usize, f: F) -> McEstimate
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        self.integrate_multi(stream, samples, 1, |y, out| out[0] = f(y))[0]
    }

    /// Vector-valued version of [`Mixture::integrate`]; `f(y, out)` writes the
    /// integrand components into `out`.
    pub fn integrate_multi<F>(&self, stream: Stream, samples: usize, width: usize, f: F) -> Vec<McEstimate>
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        mean_multi(stream, samples, width, |rng, out| {
            let (y1, y2) = self.sample_pair(rng);
            let mut buf = vec![0.0; width];
            for y in [&y1, &y2] {
                let q = self.density(y);
                if q <= 0.0 {
                    continue;
                }
                buf.iter_mut().for_each(|b| *b = 0.0);
                f(y, &mut buf);
                for (o, b) in out.iter_mut().zip(&buf) {
                    *o += 0.5 * b / q;
                }
            }
        })
    }
}

/// Multivariate Student-t proposal with `dof` degrees of freedom; density
/// `∝ (1 + |y|^2/dof)^{-(dof+n)/2}`.
#[derive(Debug, Clone)]
pub struct StudentT {
    pub n: usize,
    pub dof: f64,
    chi: ChiSquared<f64>,
    log_norm: f64,
}

impl StudentT {
    pub fn new(n: usize, dof: f64) -> Self {
        let nf = n as f64;
        let log_norm = ln_gamma((dof + nf) / 2.0)
            - ln_gamma(dof / 2.0)
            - 0.5 * nf * (dof * std::f64::consts::PI).ln();
        Self {
            n,
            dof,
            chi: ChiSquared::new(dof).expect("positive dof"),
            log_norm,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let v: f64 = self.chi.sample(rng);
        let s = (self.dof / v).sqrt();
        (0..self.n).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect()
    }

    pub fn density(&self, y_sq: f64) -> f64 {
        (self.log_norm - 0.5 * (self.dof + self.n as f64) * (y_sq / self.dof).ln_1p()).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimates_are_reproducible_and_chunk_ordered() {
        let s = Stream::new(7, "mc", "unit");
        let a = mean(s, 10_000, |rng| rng.random::<f64>());
        let b = mean(s, 10_000, |rng| rng.random::<f64>());
        assert_eq!(a, b);
        assert!(a.within_sigmas(0.5, 4.0));
    }

    #[test]
    fn distinct_checks_get_distinct_streams() {
        let a = Stream::new(1, "m", "a").rng(0).random::<u64>();
        let b = Stream::new(1, "m", "b").rng(0).random::<u64>();
        assert_ne!(a, b);
    }

    #[test]
    fn radial_profile_weights_integrate_to_one() {
        // E_q[1/q * p] for p = uniform ball: should give 1
        let prof = RadialProfile::new(5, 4.0);
        let s = Stream::new(3, "mc", "profile");
        let est = mean(s, 100_000, |rng| {
            let z = prof.sample_unit(rng);
            let r2 = norm_sq(&z);
            if r2 < 1.0 {
                ball_density(5, 1.0) / prof.density_unit(r2)
            } else {
                0.0
            }
        });
        assert!(est.within_sigmas(1.0, 4.0), "{est:?}");
    }

    #[test]
    fn student_t_density_normalised() {
        let t = StudentT::new(6, 3.0);
        let s = Stream::new(4, "mc", "t");
        let est = mean(s, 100_000, |rng| {
            let y = t.sample(rng);
            let r2 = norm_sq(&y);
            if r2 < 4.0 {
                ball_density(6, 2.0) / t.density(r2)
            } else {
                0.0
            }
        });
        assert!(est.within_sigmas(1.0, 4.0), "{est:?}");
    }

    #[test]
    fn mixture_integrates_gaussian_bump() {
        let n = 3;
        let mix = Mixture::new(vec![
            (1.0, Component::Profile { profile: RadialProfile::new(n, 3.0), center: vec![0.2, 0.0, 0.0], scale: 0.3 }),
            (1.0, Component::Polar { polar: Polar::new(n, 2.0, 1.0), center: vec![0.0; 3] }),
            (1.0, Component::Uniform { center: vec![0.0; 3], radius: 1.0 }),
        ]);
        let est = mix.integrate(Stream::new(3, "t", "mix"), 200_000, |y| (-crate::vecops::norm_sq(y)).exp() * (1.0 + y[0]));
        let exact = std::f64::consts::PI.powf(1.5);
        assert!(est.within_sigmas(exact, 4.0), "{est:?} vs {exact}");
    }

    #[test]
    fn polar_density_normalised() {
        let pol = Polar::new(5, 1.5, 4.0);
        let c = [0.3, 0.0, 0.0, 0.0, 0.0];
        let s = Stream::new(5, "mc", "polar");
        let est = mean(s, 100_000, |rng| {
            let z = pol.sample(rng, &c);
            if norm_sq(&z) < 1.0 {
                let rho = crate::vecops::dist(&z, &c);
                ball_density(5, 1.0) / pol.density(rho)
            } else {
                0.0
            }
        });
        assert!(est.within_sigmas(1.0, 4.0), "{est:?}");
    }
}
