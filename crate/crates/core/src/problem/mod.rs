//! Linear PDE problems on a space-time box.
//!
//! The interior operator is a list of [`OperatorTerm`]s `a_α(x,t) D^α u`
//! over the `(x, t)` input, and the interior residual is
//! `Σ a_α D^α u − f`. Boundary conditions are Dirichlet: spatial-boundary
//! data `g` (a function or a Monte Carlo estimator) and initial data `h`.
//!
//! Networks see normalized inputs `((x − shift)/scale, t)`, while
//! coefficients and data are evaluated at physical coordinates. The
//! operator is applied in physical coordinates, so derivatives along `x_j`
//! pick up a chain-rule factor `1/scale_j` per order.

mod catalog;

use std::fmt;
use std::sync::Arc;

use faer::Mat;

pub use catalog::{black_scholes_volatilities, HestonParams};

use crate::error::{PielmError, Result};
use crate::features::{DerivativeBackend, FeatureNetwork, MultiIndex};
use crate::points::Points;
use crate::sampling::{self, McBoundarySpec, McModel, NoiseMode};

/// Scalar field evaluated at a physical point `(x₁, …, x_d, t)`.
pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// Payoff or initial data evaluated at a spatial point `x`.
pub type SpatialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    time_horizon: f64,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, time_horizon: f64) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(PielmError::InvalidDomain(format!(
                "bounds of length {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if let Some(j) = (0..lower.len()).find(|&j| !(lower[j] < upper[j])) {
            return Err(PielmError::InvalidDomain(format!(
                "coordinate {j}: lower {} is not below upper {}",
                lower[j], upper[j]
            )));
        }
        if !(time_horizon >= 0.0) {
            return Err(PielmError::InvalidDomain(format!(
                "time horizon {time_horizon}"
            )));
        }
        Ok(Self {
            lower,
            upper,
            time_horizon,
        })
    }

    pub fn cube(d: usize, low: f64, high: f64, time_horizon: f64) -> Result<Self> {
        Self::new(vec![low; d], vec![high; d], time_horizon)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn time_horizon(&self) -> f64 {
        self.time_horizon
    }

    /// Whether a space-time point lies in the closed box `Ω̄ × [0, T]`.
    pub fn contains(&self, point: &[f64]) -> bool {
        let d = self.dim();
        point.len() == d + 1
            && (0..d).all(|j| point[j] >= self.lower[j] && point[j] <= self.upper[j])
            && point[d] >= 0.0
            && point[d] <= self.time_horizon
    }
}

/// Per-coordinate affine map `x̂ = (x − shift)/scale`; time is unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    shift: Vec<f64>,
    scale: Vec<f64>,
}

impl Normalization {
    pub fn identity(d: usize) -> Self {
        Self {
            shift: vec![0.0; d],
            scale: vec![1.0; d],
        }
    }

    /// Maps the box onto `[0,1]^d`.
    pub fn unit_box(domain: &BoxDomain) -> Self {
        Self {
            shift: domain.lower.clone(),
            scale: domain
                .lower
                .iter()
                .zip(&domain.upper)
                .map(|(l, u)| u - l)
                .collect(),
        }
    }

    pub fn new(shift: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if shift.len() != scale.len() {
            return Err(PielmError::DimensionMismatch {
                expected: shift.len(),
                got: scale.len(),
            });
        }
        if scale.iter().any(|s| !(s.abs() > 0.0) || !s.is_finite()) {
            return Err(PielmError::InvalidParameter(
                "normalization scale must be nonzero".into(),
            ));
        }
        Ok(Self { shift, scale })
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    /// Normalizes the spatial part of a space-time batch.
    pub fn normalize(&self, points: &Points) -> Points {
        let mut out = points.clone();
        for k in 0..out.len() {
            let p = out.point_mut(k);
            for (j, v) in p.iter_mut().take(self.shift.len()).enumerate() {
                *v = (*v - self.shift[j]) / self.scale[j];
            }
        }
        out
    }

    pub fn unnormalize(&self, points: &Points) -> Points {
        let mut out = points.clone();
        for k in 0..out.len() {
            let p = out.point_mut(k);
            for (j, v) in p.iter_mut().take(self.shift.len()).enumerate() {
                *v = *v * self.scale[j] + self.shift[j];
            }
        }
        out
    }

    /// `∂x̂/∂x` along input coordinate `j` of the `(x, t)` vector.
    fn chain_factor(&self, j: usize) -> f64 {
        if j < self.scale.len() {
            1.0 / self.scale[j]
        } else {
            1.0
        }
    }
}

#[derive(Clone)]
pub struct OperatorTerm {
    pub alpha: MultiIndex,
    pub coeff: PointFn,
}

impl OperatorTerm {
    pub fn new(alpha: MultiIndex, coeff: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            alpha,
            coeff: Arc::new(coeff),
        }
    }
}

impl fmt::Debug for OperatorTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorTerm")
            .field("alpha", &self.alpha.entries())
            .finish()
    }
}

#[derive(Clone)]
pub enum DataSource {
    Function(PointFn),
    MonteCarlo(McBoundarySpec),
}

impl fmt::Debug for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataSource::Function(_) => f.write_str("Function"),
            DataSource::MonteCarlo(spec) => f.debug_tuple("MonteCarlo").field(spec).finish(),
        }
    }
}

#[derive(Clone)]
pub enum ReferenceSolution {
    Exact(PointFn),
    /// Feynman-Kac sample mean of the problem's payoff under this model.
    McOracle(McModel),
    None,
}

impl fmt::Debug for ReferenceSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceSolution::Exact(_) => f.write_str("Exact"),
            ReferenceSolution::McOracle(m) => f.debug_tuple("McOracle").field(m).finish(),
            ReferenceSolution::None => f.write_str("None"),
        }
    }
}

#[derive(Clone)]
pub struct PdeProblem {
    name: String,
    domain: BoxDomain,
    interior_terms: Vec<OperatorTerm>,
    interior_rhs: PointFn,
    spatial_boundary: DataSource,
    initial_data: SpatialFn,
    normalization: Normalization,
    reference: ReferenceSolution,
}

impl fmt::Debug for PdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PdeProblem")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("interior_terms", &self.interior_terms)
            .field("spatial_boundary", &self.spatial_boundary)
            .field("normalization", &self.normalization)
            .field("reference", &self.reference)
            .finish()
    }
}

impl PdeProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        domain: BoxDomain,
        interior_terms: Vec<OperatorTerm>,
        interior_rhs: PointFn,
        spatial_boundary: DataSource,
        initial_data: SpatialFn,
        normalization: Normalization,
        reference: ReferenceSolution,
    ) -> Result<Self> {
        if interior_terms.is_empty() {
            return Err(PielmError::InvalidParameter(
                "interior operator has no terms".into(),
            ));
        }
        let input_dim = domain.dim() + 1;
        for term in &interior_terms {
            if term.alpha.dim() != input_dim {
                return Err(PielmError::DimensionMismatch {
                    expected: input_dim,
                    got: term.alpha.dim(),
                });
            }
            if term.alpha.order() > 2 {
                return Err(PielmError::UnsupportedOrder(term.alpha.order()));
            }
        }
        if normalization.shift.len() != domain.dim() {
            return Err(PielmError::DimensionMismatch {
                expected: domain.dim(),
                got: normalization.shift.len(),
            });
        }
        Ok(Self {
            name: name.into(),
            domain,
            interior_terms,
            interior_rhs,
            spatial_boundary,
            initial_data,
            normalization,
            reference,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    /// Spatial dimension `d`.
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Network input dimension `d + 1`.
    pub fn input_dim(&self) -> usize {
        self.domain.dim() + 1
    }

    pub fn interior_terms(&self) -> &[OperatorTerm] {
        &self.interior_terms
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    pub fn reference(&self) -> &ReferenceSolution {
        &self.reference
    }

    pub fn spatial_boundary(&self) -> &DataSource {
        &self.spatial_boundary
    }

    pub fn payoff(&self) -> &SpatialFn {
        &self.initial_data
    }

    /// Replaces the sample count and seed of a Monte Carlo boundary source.
    /// No effect for deterministic boundary data.
    pub fn with_boundary_mc(mut self, n_samples: usize, seed: u64) -> Self {
        if let DataSource::MonteCarlo(spec) = &mut self.spatial_boundary {
            spec.n_samples = n_samples;
            spec.seed = seed;
        }
        self
    }

    pub fn network_inputs(&self, points: &Points) -> Points {
        self.normalization.normalize(points)
    }

    fn check_inside(&self, points: &Points) -> Result<()> {
        if points.dim() != self.input_dim() {
            return Err(PielmError::DimensionMismatch {
                expected: self.input_dim(),
                got: points.dim(),
            });
        }
        match points.iter().position(|p| !self.domain.contains(p)) {
            Some(index) => Err(PielmError::OutsideDomain { index }),
            None => Ok(()),
        }
    }

    pub fn interior_rhs(&self, points: &Points) -> Vec<f64> {
        points.iter().map(|p| (self.interior_rhs)(p)).collect()
    }

    /// `h(x)` at the spatial part of each space-time point.
    pub fn initial_values(&self, points: &Points) -> Vec<f64> {
        let d = self.dim();
        points
            .iter()
            .map(|p| (self.initial_data)(&p[..d]))
            .collect()
    }

    pub fn boundary_values(&self, points: &Points) -> Result<Vec<f64>> {
        match &self.spatial_boundary {
            DataSource::Function(g) => Ok(points.iter().map(|p| g(p)).collect()),
            DataSource::MonteCarlo(spec) => {
                let est = sampling::mc_values(
                    points,
                    spec,
                    self.initial_data.as_ref(),
                    NoiseMode::PerPoint,
                )?;
                Ok(est.values)
            }
        }
    }

    /// Matrix with entry `(k, i) = Σ_α a_α(x_k, t_k) D^α φᵢ(x_k, t_k)`, where
    /// `φᵢ` is feature `i` composed with the input normalization.
    pub fn apply_operator(
        &self,
        net: &FeatureNetwork,
        points: &Points,
        backend: DerivativeBackend,
    ) -> Result<Mat<f64>> {
        self.check_inside(points)?;
        if net.input_dim() != self.input_dim() {
            return Err(PielmError::DimensionMismatch {
                expected: self.input_dim(),
                got: net.input_dim(),
            });
        }
        backend.validate()?;
        self.operator_block(net, points, backend, false)
    }

    /// Splits [`apply_operator`](Self::apply_operator) as `G + c 1ᵀ`, where
    /// `G` is built from the centered features and
    /// `c_k = offset · Σ_{|α|=0} a_α(x_k)`.
    pub fn apply_operator_centered(
        &self,
        net: &FeatureNetwork,
        points: &Points,
        backend: DerivativeBackend,
    ) -> Result<(Mat<f64>, Vec<f64>)> {
        self.check_inside(points)?;
        if net.input_dim() != self.input_dim() {
            return Err(PielmError::DimensionMismatch {
                expected: self.input_dim(),
                got: net.input_dim(),
            });
        }
        backend.validate()?;
        let g = self.operator_block(net, points, backend, true)?;
        let offset = net.activation().offset();
        let c = points
            .iter()
            .map(|p| {
                self.interior_terms
                    .iter()
                    .filter(|t| t.alpha.order() == 0)
                    .map(|t| offset * (t.coeff)(p))
                    .sum()
            })
            .collect();
        Ok((g, c))
    }

    fn operator_block(
        &self,
        net: &FeatureNetwork,
        points: &Points,
        backend: DerivativeBackend,
        centered: bool,
    ) -> Result<Mat<f64>> {
        let inputs = self.network_inputs(points);
        match backend {
            DerivativeBackend::Analytic => Ok(self.apply_analytic(net, points, &inputs, centered)),
            DerivativeBackend::FiniteDifference { .. } => {
                self.apply_generic(net, points, &inputs, backend, centered)
            }
        }
    }

    fn term_chain_factor(&self, alpha: &MultiIndex) -> f64 {
        alpha
            .directions()
            .iter()
            .map(|&j| self.normalization.chain_factor(j))
            .product()
    }

    /// Groups terms by order so that `Σ_terms a(x_k) Aᵢ^α` becomes one
    /// matrix product per order, followed by a Hadamard product with
    /// `σ^(order)(z)`.
    fn apply_analytic(
        &self,
        net: &FeatureNetwork,
        points: &Points,
        inputs: &Points,
        centered: bool,
    ) -> Mat<f64> {
        let n = points.len();
        let width = net.width();
        let a = net.hidden_weights();
        let z = net
            .preactivations(inputs)
            .expect("dimensions checked by caller");
        let act = net.activation();
        let mut out = Mat::<f64>::zeros(n, width);
        for order in 0..=2 {
            let terms: Vec<&OperatorTerm> = self
                .interior_terms
                .iter()
                .filter(|t| t.alpha.order() == order)
                .collect();
            if terms.is_empty() {
                continue;
            }
            let coeffs = Mat::from_fn(n, terms.len(), |k, t| {
                (terms[t].coeff)(points.point(k)) * self.term_chain_factor(&terms[t].alpha)
            });
            let monomials = Mat::from_fn(width, terms.len(), |i, t| {
                terms[t]
                    .alpha
                    .directions()
                    .iter()
                    .map(|&j| a[(i, j)])
                    .product::<f64>()
            });
            let combined = &coeffs * monomials.transpose();
            for i in 0..width {
                let zc = z.col(i);
                let cc = combined.col(i);
                for (k, o) in out.col_mut(i).iter_mut().enumerate() {
                    *o += cc[k]
                        * if centered {
                            act.centered_derivative(order, zc[k])
                        } else {
                            act.derivative(order, zc[k])
                        };
                }
            }
        }
        out
    }

    fn apply_generic(
        &self,
        net: &FeatureNetwork,
        points: &Points,
        inputs: &Points,
        backend: DerivativeBackend,
        centered: bool,
    ) -> Result<Mat<f64>> {
        let mut out = Mat::<f64>::zeros(points.len(), net.width());
        for term in &self.interior_terms {
            let deriv = if centered {
                net.eval_centered_feature_derivative(inputs, &term.alpha, backend)?
            } else {
                net.eval_feature_derivative(inputs, &term.alpha, backend)?
            };
            let chain = self.term_chain_factor(&term.alpha);
            let scale: Vec<f64> = points.iter().map(|p| (term.coeff)(p) * chain).collect();
            for i in 0..net.width() {
                let dc = deriv.col(i);
                for (k, o) in out.col_mut(i).iter_mut().enumerate() {
                    *o += scale[k] * dc[k];
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Activation;

    #[test]
    fn domain_validation() {
        assert!(BoxDomain::new(vec![0.0, 1.0], vec![1.0, 1.0], 1.0).is_err());
        assert!(BoxDomain::new(vec![0.0], vec![1.0, 2.0], 1.0).is_err());
        let dom = BoxDomain::cube(2, 0.0, 1.0, 1.0).unwrap();
        assert!(dom.contains(&[0.0, 1.0, 1.0]));
        assert!(!dom.contains(&[0.0, 1.1, 0.5]));
        assert!(!dom.contains(&[0.0, 0.5, -0.1]));
    }

    #[test]
    fn normalization_round_trip_on_corners() {
        let dom = BoxDomain::new(
            vec![90.0, 0.02, 90.0, 0.02],
            vec![110.0, 0.2, 110.0, 0.2],
            1.0,
        )
        .unwrap();
        let norm = Normalization::unit_box(&dom);
        let mut corners = Points::empty(5);
        for mask in 0..16u32 {
            let p: Vec<f64> = (0..4)
                .map(|j| {
                    if mask & (1 << j) != 0 {
                        dom.upper()[j]
                    } else {
                        dom.lower()[j]
                    }
                })
                .chain(std::iter::once(0.5))
                .collect();
            corners.push(&p);
        }
        let hat = norm.normalize(&corners);
        for (p, q) in hat.iter().zip(corners.iter()) {
            for j in 0..4 {
                assert!(
                    p[j] == 0.0 || (p[j] - 1.0).abs() < 1e-15,
                    "{p:?} from {q:?}"
                );
            }
            assert_eq!(p[4], 0.5);
        }
        let back = norm.unnormalize(&hat);
        for (p, q) in back.iter().zip(corners.iter()) {
            for j in 0..5 {
                assert!((p[j] - q[j]).abs() <= 1e-14 * q[j].abs());
            }
        }
    }

    #[test]
    fn heat_operator_on_constant_features_vanishes() {
        let problem = PdeProblem::heat(3).unwrap();
        let net =
            FeatureNetwork::from_parts(4, &[0.0; 8], vec![0.3, -0.2], Activation::Tanh).unwrap();
        let pts = Points::from_rows(4, &[[0.2, 0.3, 0.4, 0.5], [0.9, 0.1, 0.0, 1.0]]).unwrap();
        let h = problem
            .apply_operator(&net, &pts, DerivativeBackend::Analytic)
            .unwrap();
        assert!(h
            .col_iter()
            .flat_map(|c| c.iter().copied().collect::<Vec<_>>())
            .all(|v| v == 0.0));
    }

    #[test]
    fn heat_operator_single_feature_at_zero_preactivation() {
        // A = (a_x, a_t), b chosen so that z = 0 at the evaluation point.
        let (ax, at) = (0.7, -1.3);
        let (x, t) = (0.4, 0.25);
        let b = -(ax * x + at * t);
        let net = FeatureNetwork::from_parts(2, &[ax, at], vec![b], Activation::Tanh).unwrap();
        let problem = PdeProblem::heat(1).unwrap();
        let pts = Points::from_rows(2, &[[x, t]]).unwrap();
        let h = problem
            .apply_operator(&net, &pts, DerivativeBackend::Analytic)
            .unwrap();
        assert!((h[(0, 0)] - at).abs() < 1e-15);
    }

    #[test]
    fn black_scholes_row_matches_symbolic_derivatives() {
        // Single tanh feature φ(x,t) = tanh(a·(x−90)/20 + c·t + b).
        let (a, c, b) = (0.8, -0.6, 0.1);
        let (x, t) = (100.0, 0.5);
        let problem = PdeProblem::black_scholes(1, -0.05, black_scholes_volatilities(1)).unwrap();
        let net = FeatureNetwork::from_parts(2, &[a, c], vec![b], Activation::Tanh).unwrap();
        let pts = Points::from_rows(2, &[[x, t]]).unwrap();
        let h = problem
            .apply_operator(&net, &pts, DerivativeBackend::Analytic)
            .unwrap();

        let z = a * (x - 90.0) / 20.0 + c * t + b;
        let th = z.tanh();
        let sech2 = 1.0 - th * th;
        let phi_t = c * sech2;
        let phi_x = (a / 20.0) * sech2;
        let phi_xx = (a / 20.0).powi(2) * (-2.0 * th * sech2);
        let sigma = 0.105;
        let expected = phi_t - 0.5 * (sigma * x).powi(2) * phi_xx - (-0.05) * x * phi_x;
        assert!((h[(0, 0)] - expected).abs() <= 1e-8 * expected.abs());
    }

    #[test]
    fn fd_and_analytic_operators_agree() {
        let problem = PdeProblem::heston(2, HestonParams::default()).unwrap();
        let net = FeatureNetwork::init_random(3, 16, Activation::Tanh, -0.5, 0.5, 4).unwrap();
        let pts = Points::from_rows(3, &[[95.0, 0.05, 0.3], [108.0, 0.15, 0.9]]).unwrap();
        let ha = problem
            .apply_operator(&net, &pts, DerivativeBackend::Analytic)
            .unwrap();
        let hf = problem
            .apply_operator(&net, &pts, DerivativeBackend::FD_DEFAULT)
            .unwrap();
        for k in 0..2 {
            for i in 0..16 {
                let scale = ha[(k, i)].abs().max(1.0);
                assert!((ha[(k, i)] - hf[(k, i)]).abs() <= 1e-4 * scale);
            }
        }
    }

    #[test]
    fn operator_is_linear_in_feature_concatenation() {
        let problem = PdeProblem::black_scholes(2, -0.05, black_scholes_volatilities(2)).unwrap();
        let left = FeatureNetwork::init_random(3, 4, Activation::Sigmoid, -1.0, 1.0, 1).unwrap();
        let right = FeatureNetwork::init_random(3, 3, Activation::Sigmoid, -1.0, 1.0, 2).unwrap();
        let mut w = Vec::new();
        let mut b = Vec::new();
        for net in [&left, &right] {
            for i in 0..net.width() {
                for j in 0..3 {
                    w.push(net.hidden_weights()[(i, j)]);
                }
                b.push(net.hidden_biases()[i]);
            }
        }
        let both = FeatureNetwork::from_parts(3, &w, b, Activation::Sigmoid).unwrap();
        let pts = Points::from_rows(3, &[[91.0, 109.0, 0.1], [100.0, 100.0, 0.7]]).unwrap();
        let hl = problem
            .apply_operator(&left, &pts, DerivativeBackend::Analytic)
            .unwrap();
        let hr = problem
            .apply_operator(&right, &pts, DerivativeBackend::Analytic)
            .unwrap();
        let hb = problem
            .apply_operator(&both, &pts, DerivativeBackend::Analytic)
            .unwrap();
        for k in 0..2 {
            for i in 0..4 {
                assert!((hb[(k, i)] - hl[(k, i)]).abs() <= 1e-12 * hl[(k, i)].abs().max(1.0));
            }
            for i in 0..3 {
                assert!((hb[(k, 4 + i)] - hr[(k, i)]).abs() <= 1e-12 * hr[(k, i)].abs().max(1.0));
            }
        }
    }

    #[test]
    fn points_outside_domain_are_rejected() {
        let problem = PdeProblem::heat(1).unwrap();
        let net = FeatureNetwork::init_random(2, 2, Activation::Tanh, -1.0, 1.0, 0).unwrap();
        let pts = Points::from_rows(2, &[[0.5, 0.5], [1.5, 0.5]]).unwrap();
        assert!(matches!(
            problem.apply_operator(&net, &pts, DerivativeBackend::Analytic),
            Err(PielmError::OutsideDomain { index: 1 })
        ));
    }

    #[test]
    fn empty_operator_is_rejected() {
        let dom = BoxDomain::cube(1, 0.0, 1.0, 1.0).unwrap();
        let zero: PointFn = Arc::new(|_| 0.0);
        let res = PdeProblem::new(
            "empty",
            dom.clone(),
            vec![],
            zero.clone(),
            DataSource::Function(zero.clone()),
            Arc::new(|_| 0.0),
            Normalization::identity(1),
            ReferenceSolution::None,
        );
        assert!(res.is_err());
    }
}
