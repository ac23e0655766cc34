//! Collocation and test points, and Feynman-Kac Monte Carlo boundary data.
//!
//! Every draw comes from a ChaCha8 generator keyed by a 64-bit seed and a
//! stream id. Collocation blocks and the test set use fixed stream ids;
//! Monte Carlo estimators give point `k` its own stream `k`, so results
//! do not depend on how points are split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};
use rayon::prelude::*;

use crate::error::{PielmError, Result};
use crate::points::Points;
use crate::problem::{BoxDomain, HestonParams};

const INTERIOR_STREAM: u64 = 1 << 40;
const SPATIAL_STREAM: u64 = (1 << 40) + 1;
const TEMPORAL_STREAM: u64 = (1 << 40) + 2;
const TEST_STREAM: u64 = (1 << 40) + 3;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollocationSet {
    pub interior: Points,
    pub spatial_boundary: Points,
    pub temporal_boundary: Points,
}

impl CollocationSet {
    pub fn len(&self) -> usize {
        self.interior.len() + self.spatial_boundary.len() + self.temporal_boundary.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum McModel {
    /// Uncorrelated geometric Brownian motions with common drift `mu`.
    BlackScholes {
        mu: f64,
        volatilities: Vec<f64>,
    },
    Heston(HestonParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct McBoundarySpec {
    pub n_samples: usize,
    pub model: McModel,
    pub seed: u64,
}

/// How noise is shared between the points of one estimator call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    /// Fresh independent draws for every point.
    #[default]
    PerPoint,
    /// One noise bank reused for all points.
    Shared,
}

/// Sample means and their standard errors, one per point.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
}

fn uniform_in(rng: &mut ChaCha8Rng, low: f64, high: f64) -> f64 {
    let u: f64 = rng.sample(Open01);
    low + (high - low) * u
}

/// Uniform interior, spatial-boundary and initial-time points.
///
/// Spatial-boundary faces are chosen with probability proportional to their
/// `(d−1)`-volume, so the points are uniform on `∂Ω × (0, T)`.
pub fn sample_collocation(
    domain: &BoxDomain,
    n_int: usize,
    n_sb: usize,
    n_tb: usize,
    seed: u64,
) -> CollocationSet {
    let d = domain.dim();
    let (lo, hi, horizon) = (domain.lower(), domain.upper(), domain.time_horizon());

    let mut rng = stream_rng(seed, INTERIOR_STREAM);
    let mut interior = Points::empty(d + 1);
    let mut buf = vec![0.0; d + 1];
    for _ in 0..n_int {
        for j in 0..d {
            buf[j] = uniform_in(&mut rng, lo[j], hi[j]);
        }
        buf[d] = uniform_in(&mut rng, 0.0, horizon);
        interior.push(&buf);
    }

    let face_weights: Vec<f64> = (0..d)
        .map(|j| (0..d).filter(|&k| k != j).map(|k| hi[k] - lo[k]).product())
        .collect();
    let total: f64 = face_weights.iter().sum();
    let mut rng = stream_rng(seed, SPATIAL_STREAM);
    let mut spatial = Points::empty(d + 1);
    for _ in 0..n_sb {
        let pick = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut face = d - 1;
        for (j, w) in face_weights.iter().enumerate() {
            acc += w;
            if pick < acc {
                face = j;
                break;
            }
        }
        let upper_side = rng.random::<bool>();
        for j in 0..d {
            buf[j] = uniform_in(&mut rng, lo[j], hi[j]);
        }
        buf[face] = if upper_side { hi[face] } else { lo[face] };
        buf[d] = uniform_in(&mut rng, 0.0, horizon);
        spatial.push(&buf);
    }

    let mut rng = stream_rng(seed, TEMPORAL_STREAM);
    let mut temporal = Points::empty(d + 1);
    for _ in 0..n_tb {
        for j in 0..d {
            buf[j] = uniform_in(&mut rng, lo[j], hi[j]);
        }
        buf[d] = 0.0;
        temporal.push(&buf);
    }

    CollocationSet {
        interior,
        spatial_boundary: spatial,
        temporal_boundary: temporal,
    }
}

/// Uniform test points in the open box `Ω × (0, T)`, on a stream disjoint from the
/// collocation streams.
pub fn sample_test_set(domain: &BoxDomain, n_test: usize, seed: u64) -> Points {
    let d = domain.dim();
    let mut rng = stream_rng(seed, TEST_STREAM);
    let mut out = Points::empty(d + 1);
    let mut buf = vec![0.0; d + 1];
    for _ in 0..n_test {
        for (j, v) in buf[..d].iter_mut().enumerate() {
            let u: f64 = rng.sample(Open01);
            *v = domain.lower()[j] + (domain.upper()[j] - domain.lower()[j]) * u;
        }
        buf[d] = domain.time_horizon() * rng.sample::<f64, _>(Open01);
        out.push(&buf);
    }
    out
}

/// Running mean and variance (Welford).
#[derive(Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    #[inline]
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    fn std_error(&self) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            (self.m2 / (self.n - 1.0) / self.n).sqrt()
        }
    }
}

fn check_times(points: &Points) -> Result<()> {
    let d = points.dim() - 1;
    match points.iter().find(|p| p[d] < 0.0) {
        Some(p) => Err(PielmError::NegativeTime(p[d])),
        None => Ok(()),
    }
}

fn run_per_point<F>(
    points: &Points,
    spec: &McBoundarySpec,
    mode: NoiseMode,
    sample_point: F,
) -> Result<McEstimate>
where
    F: Fn(&[f64], &mut ChaCha8Rng) -> Moments + Sync,
{
    if spec.n_samples == 0 {
        return Err(PielmError::InvalidParameter(
            "Monte Carlo sample count must be positive".into(),
        ));
    }
    check_times(points)?;
    let results: Vec<(f64, f64)> = (0..points.len())
        .into_par_iter()
        .map(|k| {
            let stream = match mode {
                NoiseMode::PerPoint => k as u64,
                NoiseMode::Shared => 0,
            };
            let mut rng = stream_rng(spec.seed, stream);
            let m = sample_point(points.point(k), &mut rng);
            (m.mean, m.std_error())
        })
        .collect();
    let (values, std_errors) = results.into_iter().unzip();
    Ok(McEstimate { values, std_errors })
}

/// Black-Scholes Feynman-Kac sample mean
/// `(1/N_s) Σₙ ψ([xᵢ exp((μ − εᵢ²/2) t + εᵢ √t Zᵢⁿ)]ᵢ)` at each `(x, t)`.
pub fn bs_boundary_values(
    points: &Points,
    spec: &McBoundarySpec,
    payoff: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<McEstimate> {
    bs_values_with_mode(points, spec, payoff, NoiseMode::PerPoint)
}

pub fn bs_values_with_mode(
    points: &Points,
    spec: &McBoundarySpec,
    payoff: &(dyn Fn(&[f64]) -> f64 + Sync),
    mode: NoiseMode,
) -> Result<McEstimate> {
    let McModel::BlackScholes { mu, volatilities } = &spec.model else {
        return Err(PielmError::ModelMismatch);
    };
    let d = points.dim() - 1;
    if volatilities.len() != d {
        return Err(PielmError::DimensionMismatch {
            expected: volatilities.len(),
            got: d,
        });
    }
    let mu = *mu;
    run_per_point(points, spec, mode, |p, rng| {
        let t = p[d];
        let sqrt_t = t.sqrt();
        let drift: Vec<f64> = volatilities
            .iter()
            .map(|e| (mu - 0.5 * e * e) * t)
            .collect();
        let mut y = vec![0.0; d];
        let mut m = Moments::default();
        for _ in 0..spec.n_samples {
            for i in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                y[i] = p[i] * (drift[i] + volatilities[i] * sqrt_t * z).exp();
            }
            m.push(payoff(&y));
        }
        m
    })
}

/// Heston Feynman-Kac sample mean at each `(x, t)`, with `x` ordered
/// `(s₁, v₁, s₂, v₂, …)`. Per pair and sample, with `W¹ = √t Z₁`,
/// `W² = √t Z₂` and `c = β/2`:
///
/// ```text
/// s' = s · exp((α − v/2) t + W¹ √v)
/// m  = max{c√t, max{c√t, √v} + c (ρ W¹ + √(1−ρ²) W²)}
/// v' = max{m² + (κθ − β²/4 − κ v) t, 0}
/// ```
///
/// and the payoff is applied to the assembled vector `(s'₁, v'₁, …)`.
pub fn heston_boundary_values(
    points: &Points,
    spec: &McBoundarySpec,
    payoff: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<McEstimate> {
    heston_values_with_mode(points, spec, payoff, NoiseMode::PerPoint)
}

pub fn heston_values_with_mode(
    points: &Points,
    spec: &McBoundarySpec,
    payoff: &(dyn Fn(&[f64]) -> f64 + Sync),
    mode: NoiseMode,
) -> Result<McEstimate> {
    heston_values_signed(points, spec, payoff, mode, 1.0)
}

/// `second_noise_sign = −1` flips `Z₂`, which leaves the law unchanged.
pub(crate) fn heston_values_signed(
    points: &Points,
    spec: &McBoundarySpec,
    payoff: &(dyn Fn(&[f64]) -> f64 + Sync),
    mode: NoiseMode,
    second_noise_sign: f64,
) -> Result<McEstimate> {
    let McModel::Heston(params) = &spec.model else {
        return Err(PielmError::ModelMismatch);
    };
    let d = points.dim() - 1;
    if !d.is_multiple_of(2) {
        return Err(PielmError::InvalidParameter(format!(
            "Heston dimension must be even, got {d}"
        )));
    }
    let HestonParams {
        alpha,
        beta,
        kappa,
        theta,
        rho,
    } = *params;
    let c = 0.5 * beta;
    let rho_perp = (1.0 - rho * rho).max(0.0).sqrt();
    run_per_point(points, spec, mode, |p, rng| {
        let t = p[d];
        let sqrt_t = t.sqrt();
        let floor = c * sqrt_t;
        let mut y = vec![0.0; d];
        let mut m = Moments::default();
        for _ in 0..spec.n_samples {
            for pair in 0..d / 2 {
                let (s, v) = (p[2 * pair], p[2 * pair + 1]);
                let w1 = sqrt_t * rng.sample::<f64, _>(StandardNormal);
                let w2 = second_noise_sign * sqrt_t * rng.sample::<f64, _>(StandardNormal);
                let sqrt_v = v.max(0.0).sqrt();
                y[2 * pair] = s * ((alpha - 0.5 * v) * t + w1 * sqrt_v).exp();
                let inner = floor.max(sqrt_v);
                let outer = floor.max(inner + c * (rho * w1 + rho_perp * w2));
                y[2 * pair + 1] =
                    (outer * outer + (kappa * theta - 0.25 * beta * beta - kappa * v) * t).max(0.0);
            }
            m.push(payoff(&y));
        }
        m
    })
}

/// Dispatches on the model of `spec`.
pub fn mc_values(
    points: &Points,
    spec: &McBoundarySpec,
    payoff: &(dyn Fn(&[f64]) -> f64 + Sync),
    mode: NoiseMode,
) -> Result<McEstimate> {
    match spec.model {
        McModel::BlackScholes { .. } => bs_values_with_mode(points, spec, payoff, mode),
        McModel::Heston(_) => heston_values_with_mode(points, spec, payoff, mode),
    }
}
