//! Test-set errors against exact or Monte Carlo references, and empirical
//! error-versus-width rates.

use std::time::Instant;

use crate::error::{PielmError, Result};
use crate::features::FeatureNetwork;
use crate::pipeline::{run_pipeline, PipelineSettings, SeedBundle};
use crate::points::Points;
use crate::problem::{PdeProblem, ReferenceSolution};
use crate::sampling::{self, McBoundarySpec, NoiseMode};

/// Settings of the Monte Carlo reference used when no exact solution exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub n_samples: usize,
    pub noise: NoiseMode,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            n_samples: 16384,
            noise: NoiseMode::PerPoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// Root mean square of `û − u` over the test set.
    pub l2_error: f64,
    /// `‖û − u‖₂ / ‖u‖₂` over the test set.
    pub relative_l2: f64,
    pub n_test: usize,
    pub wall_time_seconds: f64,
    pub seed_bundle: SeedBundle,
    /// First-order standard error of `relative_l2` caused by Monte Carlo
    /// noise in the reference values; `None` for exact references.
    pub mc_uncertainty: Option<f64>,
    pub predicted: Vec<f64>,
    pub reference: Vec<f64>,
}

impl ErrorReport {
    /// Recomputes `(l2_error, relative_l2)` from the stored values.
    pub fn recompute(&self) -> (f64, f64) {
        error_norms(&self.predicted, &self.reference)
    }
}

fn error_norms(predicted: &[f64], reference: &[f64]) -> (f64, f64) {
    let n = predicted.len().max(1) as f64;
    let err_sq: f64 = predicted
        .iter()
        .zip(reference)
        .map(|(p, u)| (p - u).powi(2))
        .sum();
    let ref_sq: f64 = reference.iter().map(|u| u * u).sum();
    let relative = if ref_sq > 0.0 {
        (err_sq / ref_sq).sqrt()
    } else if err_sq == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    ((err_sq / n).sqrt(), relative)
}

/// Linearized propagation of per-point reference standard errors `s_k`
/// into `‖e‖/‖u‖` with `e = û − u`.
fn relative_uncertainty(predicted: &[f64], reference: &[f64], std_errors: &[f64]) -> f64 {
    let e_norm = predicted
        .iter()
        .zip(reference)
        .map(|(p, u)| (p - u).powi(2))
        .sum::<f64>()
        .sqrt();
    let u_norm = reference.iter().map(|u| u * u).sum::<f64>().sqrt();
    if u_norm == 0.0 {
        return f64::INFINITY;
    }
    let var: f64 = predicted
        .iter()
        .zip(reference)
        .zip(std_errors)
        .map(|((p, u), s)| {
            let de = if e_norm > 0.0 { -(p - u) / e_norm } else { 1.0 };
            let grad = de / u_norm - e_norm * u / u_norm.powi(3);
            (grad * s).powi(2)
        })
        .sum();
    var.sqrt()
}

/// Reference values at `points`, with standard errors for Monte Carlo
/// references.
pub fn reference_values(
    problem: &PdeProblem,
    points: &Points,
    oracle: OracleOptions,
    oracle_seed: u64,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    match problem.reference() {
        ReferenceSolution::Exact(u) => Ok((points.iter().map(|p| u(p)).collect(), None)),
        ReferenceSolution::McOracle(model) => {
            let spec = McBoundarySpec {
                n_samples: oracle.n_samples,
                model: model.clone(),
                seed: oracle_seed,
            };
            let est = sampling::mc_values(points, &spec, problem.payoff().as_ref(), oracle.noise)?;
            Ok((est.values, Some(est.std_errors)))
        }
        ReferenceSolution::None => Err(PielmError::MissingReference),
    }
}

pub fn evaluate_error(
    problem: &PdeProblem,
    net: &FeatureNetwork,
    n_test: usize,
    seeds: &SeedBundle,
    oracle: OracleOptions,
) -> Result<ErrorReport> {
    if net.output_weights().is_none() {
        return Err(PielmError::Untrained);
    }
    evaluate_with(
        problem,
        |pts| net.eval_network(&problem.network_inputs(pts)),
        n_test,
        seeds,
        oracle,
    )
}

/// Like [`evaluate_error`] for an arbitrary predictor on physical points.
pub fn evaluate_with(
    problem: &PdeProblem,
    predict: impl Fn(&Points) -> Result<Vec<f64>>,
    n_test: usize,
    seeds: &SeedBundle,
    oracle: OracleOptions,
) -> Result<ErrorReport> {
    if matches!(problem.reference(), ReferenceSolution::None) {
        return Err(PielmError::MissingReference);
    }
    if n_test == 0 {
        return Err(PielmError::InvalidParameter(
            "test set must not be empty".into(),
        ));
    }
    let start = Instant::now();
    let points = sampling::sample_test_set(problem.domain(), n_test, seeds.test);
    let (reference, std_errors) = reference_values(problem, &points, oracle, seeds.oracle)?;
    let predicted = predict(&points)?;
    let (l2_error, relative_l2) = error_norms(&predicted, &reference);
    let mc_uncertainty = std_errors.map(|s| relative_uncertainty(&predicted, &reference, &s));
    Ok(ErrorReport {
        l2_error,
        relative_l2,
        n_test,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        seed_bundle: seeds.clone(),
        mc_uncertainty,
        predicted,
        reference,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub width: usize,
    pub median: f64,
    /// Interquartile range of the relative errors over repeats.
    pub iqr: f64,
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log(median)` against `log(width)`; absent
    /// with fewer than two widths.
    pub slope: Option<f64>,
}

/// Runs the full pipeline for every `(width, repeat)`; repeat `r` uses
/// `seeds.offset(r)`.
pub fn convergence_study(
    problem: &PdeProblem,
    settings: &PipelineSettings,
    widths: &[usize],
    repeats: usize,
    seeds: &SeedBundle,
) -> Result<ConvergenceTable> {
    if repeats == 0 {
        return Err(PielmError::InvalidParameter(
            "repeats must be at least 1".into(),
        ));
    }
    if widths.windows(2).any(|w| w[0] >= w[1]) {
        return Err(PielmError::InvalidParameter(
            "widths must be strictly increasing".into(),
        ));
    }
    let mut rows = Vec::with_capacity(widths.len());
    for &width in widths {
        let mut errors = Vec::with_capacity(repeats);
        for r in 0..repeats {
            let run = PipelineSettings {
                width,
                seeds: seeds.offset(r as u64),
                ..settings.clone()
            };
            errors.push(run_pipeline(problem, &run)?.error.relative_l2);
        }
        rows.push(ConvergenceRow {
            width,
            median: quantile(&errors, 0.5),
            iqr: quantile(&errors, 0.75) - quantile(&errors, 0.25),
            errors,
        });
    }
    let ws: Vec<f64> = rows.iter().map(|r| r.width as f64).collect();
    let ms: Vec<f64> = rows.iter().map(|r| r.median).collect();
    Ok(ConvergenceTable {
        slope: fit_log_slope(&ws, &ms),
        rows,
    })
}

/// Linearly interpolated sample quantile.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Slope of the least-squares line through `(log xᵢ, log yᵢ)`.
pub fn fit_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}
