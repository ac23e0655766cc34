//! The heat, Black-Scholes and Heston problems.

use std::sync::Arc;

use super::{
    BoxDomain, DataSource, Normalization, OperatorTerm, PdeProblem, PointFn, ReferenceSolution,
};
use crate::error::{PielmError, Result};
use crate::features::MultiIndex;
use crate::sampling::{McBoundarySpec, McModel};

/// Heston model parameters. Defaults: `α = 1/20, β = 1/5, κ = 3/5,
/// θ = 1/25, ρ = −1/5`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    /// Stock drift.
    pub alpha: f64,
    /// Volatility of variance.
    pub beta: f64,
    /// Mean-reversion speed.
    pub kappa: f64,
    /// Long-run variance.
    pub theta: f64,
    /// Stock/variance noise correlation.
    pub rho: f64,
}

impl Default for HestonParams {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            beta: 0.2,
            kappa: 0.6,
            theta: 0.04,
            rho: -0.2,
        }
    }
}

impl HestonParams {
    pub fn validate(&self) -> Result<()> {
        if !(2.0 * self.kappa * self.theta > self.beta * self.beta) {
            return Err(PielmError::InvalidParameter(format!(
                "Feller condition violated: 2κθ = {} ≤ β² = {}",
                2.0 * self.kappa * self.theta,
                self.beta * self.beta
            )));
        }
        if !(-1.0..=1.0).contains(&self.rho) {
            return Err(PielmError::InvalidParameter(format!(
                "correlation {} outside [-1, 1]",
                self.rho
            )));
        }
        if !(self.kappa > 0.0 && self.theta > 0.0) {
            return Err(PielmError::InvalidParameter(
                "κ and θ must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `σᵢ = 1/10 + i/200` for `i = 1..=d`.
pub fn black_scholes_volatilities(d: usize) -> Vec<f64> {
    (1..=d).map(|i| (20 + i) as f64 / 200.0).collect()
}

const DEFAULT_BOUNDARY_SAMPLES: usize = 16384;

fn zero_fn() -> PointFn {
    Arc::new(|_| 0.0)
}

fn time_derivative(d: usize) -> OperatorTerm {
    OperatorTerm::new(MultiIndex::first(d + 1, d), |_| 1.0)
}

impl PdeProblem {
    /// `u_t − Δu = 0` on `[0,1]^d × (0,1)` with exact solution
    /// `u = ‖x‖²/d + 2t`.
    pub fn heat(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(PielmError::InvalidParameter(
                "dimension must be at least 1".into(),
            ));
        }
        let domain = BoxDomain::cube(d, 0.0, 1.0, 1.0)?;
        let mut terms = vec![time_derivative(d)];
        for j in 0..d {
            terms.push(OperatorTerm::new(MultiIndex::second(d + 1, j, j), |_| -1.0));
        }
        let exact: PointFn = Arc::new(move |p: &[f64]| {
            let sq: f64 = p[..d].iter().map(|x| x * x).sum();
            sq / d as f64 + 2.0 * p[d]
        });
        let initial = Arc::new(move |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>() / d as f64);
        PdeProblem::new(
            "heat",
            domain,
            terms,
            zero_fn(),
            DataSource::Function(exact.clone()),
            initial,
            Normalization::identity(d),
            ReferenceSolution::Exact(exact),
        )
    }

    /// Black-Scholes model on `[90,110]^d × (0,1)` with max-call payoff
    /// `ψ(x) = max(maxᵢ xᵢ − 100, 0)`:
    ///
    /// `∂_t u − ½ Σᵢ (σᵢ xᵢ)² ∂²ᵢᵢ u − μ Σᵢ xᵢ ∂ᵢ u = 0`.
    pub fn black_scholes(d: usize, mu: f64, volatilities: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(PielmError::InvalidParameter(
                "dimension must be at least 1".into(),
            ));
        }
        if volatilities.len() != d {
            return Err(PielmError::DimensionMismatch {
                expected: d,
                got: volatilities.len(),
            });
        }
        if volatilities.iter().any(|v| !(*v > 0.0)) {
            return Err(PielmError::InvalidParameter(
                "volatilities must be positive".into(),
            ));
        }
        let domain = BoxDomain::cube(d, 90.0, 110.0, 1.0)?;
        let mut terms = vec![time_derivative(d)];
        for (i, &sigma) in volatilities.iter().enumerate() {
            terms.push(OperatorTerm::new(
                MultiIndex::second(d + 1, i, i),
                move |p: &[f64]| -0.5 * (sigma * p[i]).powi(2),
            ));
            terms.push(OperatorTerm::new(
                MultiIndex::first(d + 1, i),
                move |p: &[f64]| -mu * p[i],
            ));
        }
        let model = McModel::BlackScholes { mu, volatilities };
        let normalization = Normalization::unit_box(&domain);
        PdeProblem::new(
            "black_scholes",
            domain,
            terms,
            zero_fn(),
            DataSource::MonteCarlo(McBoundarySpec {
                n_samples: DEFAULT_BOUNDARY_SAMPLES,
                model: model.clone(),
                seed: 0,
            }),
            Arc::new(max_call_payoff),
            normalization,
            ReferenceSolution::McOracle(model),
        )
    }

    /// Multi-asset Heston model with `d = 2δ` coordinates ordered
    /// `(stock₁, variance₁, stock₂, variance₂, …)` on
    /// `∏ ([90,110] × [0.02,0.2]) × (0,1)`, with basket put payoff
    /// `ψ(x) = max(110 − (2/d) Σ stocks, 0)`. Per pair the operator is
    ///
    /// `∂_t − α s ∂_s − κ(θ − v) ∂_v − (|v|/2) s² ∂²_ss − 2 s β ρ ∂²_sv − β² ∂²_vv`.
    ///
    /// The cross coefficient `2sβρ` and the `β²` variance diffusion are
    /// used as stated, not the textbook `ρβ s v` and `β² v / 2`.
    pub fn heston(d: usize, params: HestonParams) -> Result<Self> {
        if d == 0 || !d.is_multiple_of(2) {
            return Err(PielmError::InvalidParameter(format!(
                "Heston dimension must be even, got {d}"
            )));
        }
        params.validate()?;
        let HestonParams {
            alpha,
            beta,
            kappa,
            theta,
            rho,
        } = params;
        let mut lower = Vec::with_capacity(d);
        let mut upper = Vec::with_capacity(d);
        for _ in 0..d / 2 {
            lower.extend_from_slice(&[90.0, 0.02]);
            upper.extend_from_slice(&[110.0, 0.2]);
        }
        let domain = BoxDomain::new(lower, upper, 1.0)?;
        let n = d + 1;
        let mut terms = vec![time_derivative(d)];
        for pair in 0..d / 2 {
            let (s, v) = (2 * pair, 2 * pair + 1);
            terms.push(OperatorTerm::new(
                MultiIndex::first(n, s),
                move |p: &[f64]| -alpha * p[s],
            ));
            terms.push(OperatorTerm::new(
                MultiIndex::first(n, v),
                move |p: &[f64]| -kappa * (theta - p[v]),
            ));
            terms.push(OperatorTerm::new(
                MultiIndex::second(n, s, s),
                move |p: &[f64]| -0.5 * p[v].abs() * p[s] * p[s],
            ));
            terms.push(OperatorTerm::new(
                MultiIndex::second(n, s, v),
                move |p: &[f64]| -2.0 * p[s] * beta * rho,
            ));
            terms.push(OperatorTerm::new(MultiIndex::second(n, v, v), move |_| {
                -beta * beta
            }));
        }
        let model = McModel::Heston(params);
        let normalization = Normalization::unit_box(&domain);
        PdeProblem::new(
            "heston",
            domain,
            terms,
            zero_fn(),
            DataSource::MonteCarlo(McBoundarySpec {
                n_samples: DEFAULT_BOUNDARY_SAMPLES,
                model: model.clone(),
                seed: 0,
            }),
            Arc::new(basket_put_payoff),
            normalization,
            ReferenceSolution::McOracle(model),
        )
    }
}

pub(crate) fn max_call_payoff(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (m - 100.0).max(0.0)
}

pub(crate) fn basket_put_payoff(x: &[f64]) -> f64 {
    let d = x.len();
    let stocks: f64 = x.iter().step_by(2).sum();
    (110.0 - 2.0 / d as f64 * stocks).max(0.0)
}
