//! Randomized single-hidden-layer networks and their feature derivatives.
//!
//! A [`FeatureNetwork`] holds frozen hidden weights `A` (width × input_dim)
//! and biases `b`, and an optional output vector `W`. Feature `i` at input
//! `x` is `σ(Aᵢ·x + bᵢ)`; its partial derivative along a multi-index `α` is
//! `Aᵢ^α σ^(|α|)(Aᵢ·x + bᵢ)` with `Aᵢ^α = ∏ⱼ A_ij^{αⱼ}`.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Uniform;

use crate::error::{PielmError, Result};
use crate::points::Points;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn eval(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Constant `c` with `σ(z) = c + σ̃(z)` and `σ̃` odd.
    #[inline]
    pub fn offset(self) -> f64 {
        match self {
            Activation::Tanh => 0.0,
            Activation::Sigmoid => 0.5,
        }
    }

    /// `σ(z) − offset()`, evaluated without forming the offset.
    #[inline]
    pub fn centered(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 0.5 * (0.5 * z).tanh(),
        }
    }

    /// `σ^(order)(z)` for `order ≤ 2`.
    #[inline]
    pub fn derivative(self, order: usize, z: f64) -> f64 {
        match order {
            0 => self.eval(z),
            _ => self.centered_derivative(order, z),
        }
    }

    /// Like [`derivative`](Self::derivative) with the offset removed at
    /// order 0.
    #[inline]
    pub fn centered_derivative(self, order: usize, z: f64) -> f64 {
        let (scale, t) = match self {
            Activation::Tanh => (1.0, z.tanh()),
            Activation::Sigmoid => (0.5, (0.5 * z).tanh()),
        };
        match order {
            0 => scale * t,
            1 => match self {
                Activation::Tanh => 1.0 - t * t,
                Activation::Sigmoid => 0.25 * (1.0 - t * t),
            },
            2 => match self {
                Activation::Tanh => -2.0 * t * (1.0 - t * t),
                Activation::Sigmoid => -0.25 * t * (1.0 - t * t),
            },
            _ => panic!("activation derivative of order {order} requested"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(format!(
                "unknown activation `{other}` (expected tanh or sigmoid)"
            )),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    0.5 + 0.5 * (0.5 * z).tanh()
}

/// Per-coordinate derivative orders with total order at most 2.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    entries: Vec<u8>,
}

impl MultiIndex {
    pub fn new(entries: Vec<u8>) -> Result<Self> {
        let order: usize = entries.iter().map(|&e| e as usize).sum();
        if order > 2 {
            return Err(PielmError::UnsupportedOrder(order));
        }
        Ok(Self { entries })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            entries: vec![0; dim],
        }
    }

    /// First derivative along coordinate `j`.
    pub fn first(dim: usize, j: usize) -> Self {
        let mut entries = vec![0; dim];
        entries[j] = 1;
        Self { entries }
    }

    /// Second derivative `∂²/∂x_j∂x_l` (pure when `j == l`).
    pub fn second(dim: usize, j: usize, l: usize) -> Self {
        let mut entries = vec![0; dim];
        entries[j] += 1;
        entries[l] += 1;
        Self { entries }
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[u8] {
        &self.entries
    }

    pub fn order(&self) -> usize {
        self.entries.iter().map(|&e| e as usize).sum()
    }

    /// Coordinates with a nonzero order, repeated by multiplicity.
    pub fn directions(&self) -> Vec<usize> {
        let mut dirs = Vec::with_capacity(2);
        for (j, &e) in self.entries.iter().enumerate() {
            for _ in 0..e {
                dirs.push(j);
            }
        }
        dirs
    }

    /// `∏ⱼ vⱼ^{αⱼ}`.
    pub fn monomial(&self, v: &[f64]) -> f64 {
        self.directions().iter().map(|&j| v[j]).product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum DerivativeBackend {
    #[default]
    Analytic,
    /// Central differences with step `h1` for first-order and `h2` for
    /// second-order directions.
    FiniteDifference { h1: f64, h2: f64 },
}

impl DerivativeBackend {
    pub const FD_DEFAULT: DerivativeBackend =
        DerivativeBackend::FiniteDifference { h1: 1e-6, h2: 1e-3 };

    pub fn validate(self) -> Result<()> {
        match self {
            DerivativeBackend::Analytic => Ok(()),
            DerivativeBackend::FiniteDifference { h1, h2 } => {
                if h1 > 0.0 && h2 > 0.0 && h1.is_finite() && h2.is_finite() {
                    Ok(())
                } else {
                    Err(PielmError::InvalidStep { h1, h2 })
                }
            }
        }
    }
}

impl std::str::FromStr for DerivativeBackend {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "analytic" => Ok(DerivativeBackend::Analytic),
            "fd" | "finite-difference" | "finite_difference" => Ok(DerivativeBackend::FD_DEFAULT),
            other => Err(format!(
                "unknown derivative backend `{other}` (expected analytic or fd)"
            )),
        }
    }
}

/// Randomized single-hidden-layer network. Hidden parameters are fixed at
/// construction; only the output weights are ever set.
#[derive(Debug, Clone)]
pub struct FeatureNetwork {
    input_dim: usize,
    hidden_weights: Mat<f64>,
    hidden_biases: Vec<f64>,
    output_weights: Option<Vec<f64>>,
    activation: Activation,
}

impl FeatureNetwork {
    /// Draws every entry of `A` (row-major) and then `b` i.i.d. from
    /// `U[low, high]` using a ChaCha8 stream seeded with `seed`.
    pub fn init_random(
        input_dim: usize,
        width: usize,
        activation: Activation,
        weight_low: f64,
        weight_high: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(weight_low < weight_high) || !weight_low.is_finite() || !weight_high.is_finite() {
            return Err(PielmError::InvalidRange {
                low: weight_low,
                high: weight_high,
            });
        }
        if width == 0 {
            return Err(PielmError::ZeroWidth);
        }
        if input_dim == 0 {
            return Err(PielmError::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        let dist = Uniform::new_inclusive(weight_low, weight_high).expect("range checked above");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut row_major = Vec::with_capacity(width * input_dim);
        for _ in 0..width * input_dim {
            row_major.push(rng.sample(dist));
        }
        let hidden_weights = Mat::from_fn(width, input_dim, |i, j| row_major[i * input_dim + j]);
        let hidden_biases = (0..width).map(|_| rng.sample(dist)).collect();
        Ok(Self {
            input_dim,
            hidden_weights,
            hidden_biases,
            output_weights: None,
            activation,
        })
    }

    /// Builds a network from explicit hidden parameters; `weights` is
    /// row-major `width × input_dim`.
    pub fn from_parts(
        input_dim: usize,
        weights: &[f64],
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        let width = biases.len();
        if width == 0 {
            return Err(PielmError::ZeroWidth);
        }
        if weights.len() != width * input_dim {
            return Err(PielmError::DimensionMismatch {
                expected: width * input_dim,
                got: weights.len(),
            });
        }
        Ok(Self {
            input_dim,
            hidden_weights: Mat::from_fn(width, input_dim, |i, j| weights[i * input_dim + j]),
            hidden_biases: biases,
            output_weights: None,
            activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn width(&self) -> usize {
        self.hidden_biases.len()
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn hidden_weights(&self) -> faer::MatRef<'_, f64> {
        self.hidden_weights.as_ref()
    }

    pub fn hidden_biases(&self) -> &[f64] {
        &self.hidden_biases
    }

    pub fn output_weights(&self) -> Option<&[f64]> {
        self.output_weights.as_deref()
    }

    pub fn set_output_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.width() {
            return Err(PielmError::DimensionMismatch {
                expected: self.width(),
                got: weights.len(),
            });
        }
        self.output_weights = Some(weights);
        Ok(())
    }

    fn check_points(&self, points: &Points) -> Result<()> {
        if points.dim() != self.input_dim {
            return Err(PielmError::DimensionMismatch {
                expected: self.input_dim,
                got: points.dim(),
            });
        }
        Ok(())
    }

    /// Pre-activations `z_ki = Aᵢ·x_k + bᵢ`.
    pub fn preactivations(&self, points: &Points) -> Result<Mat<f64>> {
        self.check_points(points)?;
        let x = points.to_mat();
        let mut z = &x * self.hidden_weights.transpose();
        for (i, &b) in self.hidden_biases.iter().enumerate() {
            for v in z.col_mut(i).iter_mut() {
                *v += b;
            }
        }
        Ok(z)
    }

    pub fn eval_features(&self, points: &Points) -> Result<Mat<f64>> {
        let mut z = self.preactivations(points)?;
        let act = self.activation;
        map_in_place(&mut z, |v| act.eval(v));
        Ok(z)
    }

    /// Features with the activation offset removed: `σ(z) − offset`.
    pub fn eval_centered_features(&self, points: &Points) -> Result<Mat<f64>> {
        let mut z = self.preactivations(points)?;
        let act = self.activation;
        map_in_place(&mut z, |v| act.centered(v));
        Ok(z)
    }

    pub fn eval_feature_derivative(
        &self,
        points: &Points,
        alpha: &MultiIndex,
        backend: DerivativeBackend,
    ) -> Result<Mat<f64>> {
        self.feature_derivative(points, alpha, backend, false)
    }

    /// Derivatives of the centered features. Equal to
    /// [`eval_feature_derivative`](Self::eval_feature_derivative) except at
    /// order 0.
    pub fn eval_centered_feature_derivative(
        &self,
        points: &Points,
        alpha: &MultiIndex,
        backend: DerivativeBackend,
    ) -> Result<Mat<f64>> {
        self.feature_derivative(points, alpha, backend, true)
    }

    fn feature_derivative(
        &self,
        points: &Points,
        alpha: &MultiIndex,
        backend: DerivativeBackend,
        centered: bool,
    ) -> Result<Mat<f64>> {
        self.check_points(points)?;
        if alpha.dim() != self.input_dim {
            return Err(PielmError::DimensionMismatch {
                expected: self.input_dim,
                got: alpha.dim(),
            });
        }
        backend.validate()?;
        match backend {
            DerivativeBackend::Analytic => self.analytic_derivative(points, alpha, centered),
            DerivativeBackend::FiniteDifference { h1, h2 } => {
                self.fd_derivative(points, alpha, h1, h2, centered)
            }
        }
    }

    fn analytic_derivative(
        &self,
        points: &Points,
        alpha: &MultiIndex,
        centered: bool,
    ) -> Result<Mat<f64>> {
        let mut z = self.preactivations(points)?;
        let order = alpha.order();
        let act = self.activation;
        let dirs = alpha.directions();
        for i in 0..self.width() {
            let factor: f64 = dirs.iter().map(|&j| self.hidden_weights[(i, j)]).product();
            for v in z.col_mut(i).iter_mut() {
                *v = factor
                    * if centered {
                        act.centered_derivative(order, *v)
                    } else {
                        act.derivative(order, *v)
                    };
            }
        }
        Ok(z)
    }

    fn fd_derivative(
        &self,
        points: &Points,
        alpha: &MultiIndex,
        h1: f64,
        h2: f64,
        centered: bool,
    ) -> Result<Mat<f64>> {
        let dirs = alpha.directions();
        let f = |p: &Points| {
            if centered {
                self.eval_centered_features(p)
            } else {
                self.eval_features(p)
            }
        };
        match dirs.as_slice() {
            [] => f(points),
            [j] => {
                let plus = f(&points.shifted(*j, h1))?;
                let minus = f(&points.shifted(*j, -h1))?;
                Ok(combine(&[(&plus, 1.0), (&minus, -1.0)], 1.0 / (2.0 * h1)))
            }
            [j, l] if j == l => {
                let plus = f(&points.shifted(*j, h2))?;
                let center = f(points)?;
                let minus = f(&points.shifted(*j, -h2))?;
                Ok(combine(
                    &[(&plus, 1.0), (&center, -2.0), (&minus, 1.0)],
                    1.0 / (h2 * h2),
                ))
            }
            [j, l] => {
                let pp = f(&points.shifted(*j, h2).shifted(*l, h2))?;
                let pm = f(&points.shifted(*j, h2).shifted(*l, -h2))?;
                let mp = f(&points.shifted(*j, -h2).shifted(*l, h2))?;
                let mm = f(&points.shifted(*j, -h2).shifted(*l, -h2))?;
                Ok(combine(
                    &[(&pp, 1.0), (&pm, -1.0), (&mp, -1.0), (&mm, 1.0)],
                    1.0 / (4.0 * h2 * h2),
                ))
            }
            _ => Err(PielmError::UnsupportedOrder(dirs.len())),
        }
    }

    /// `Σᵢ Wᵢ σ(Aᵢ·x_k + bᵢ)` for every point.
    pub fn eval_network(&self, points: &Points) -> Result<Vec<f64>> {
        let w = self.output_weights.as_ref().ok_or(PielmError::Untrained)?;
        let features = self.eval_features(points)?;
        Ok(mat_vec(&features, w))
    }
}

pub(crate) fn map_in_place(m: &mut Mat<f64>, f: impl Fn(f64) -> f64) {
    for i in 0..m.ncols() {
        for v in m.col_mut(i).iter_mut() {
            *v = f(*v);
        }
    }
}

fn combine(terms: &[(&Mat<f64>, f64)], scale: f64) -> Mat<f64> {
    let (rows, cols) = terms[0].0.shape();
    Mat::from_fn(rows, cols, |r, c| {
        scale * terms.iter().map(|(m, w)| w * m[(r, c)]).sum::<f64>()
    })
}

pub(crate) fn mat_vec(m: &Mat<f64>, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; m.nrows()];
    for (j, &w) in v.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (o, &x) in out.iter_mut().zip(m.col(j).iter()) {
            *o += w * x;
        }
    }
    out
}
