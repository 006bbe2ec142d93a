//! Path-duration distribution pipeline: closed-form MLE fits, AIC model
//! selection, and discretization onto the mechanism's duration grid.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, LogNormal, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("sample {value} outside the positive support of the model")]
    NonPositiveSample { value: f64 },
    #[error("degenerate sample: zero variance")]
    DegenerateSample,
    #[error("no candidate model could be fitted")]
    NoModelFits,
    #[error("invalid discretization: {0}")]
    InvalidDiscretization(String),
}

/// A fitted distribution with its MLE parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FittedModel {
    Exponential { rate: f64 },
    Normal { mean: f64, std_dev: f64 },
    LogNormal { log_mean: f64, log_std_dev: f64 },
}

impl FittedModel {
    pub fn name(&self) -> &'static str {
        match self {
            FittedModel::Exponential { .. } => "exponential",
            FittedModel::Normal { .. } => "normal",
            FittedModel::LogNormal { .. } => "lognormal",
        }
    }

    /// Number of free parameters (the `k` in AIC).
    pub fn param_count(&self) -> usize {
        match self {
            FittedModel::Exponential { .. } => 1,
            _ => 2,
        }
    }

    /// Deterministic order used for AIC tie-breaks.
    fn order(&self) -> usize {
        match self {
            FittedModel::Exponential { .. } => 0,
            FittedModel::Normal { .. } => 1,
            FittedModel::LogNormal { .. } => 2,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            FittedModel::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    1.0 - (-rate * x).exp()
                }
            }
            FittedModel::Normal { mean, std_dev } => {
                Normal::new(mean, std_dev).expect("validated parameters").cdf(x)
            }
            FittedModel::LogNormal { log_mean, log_std_dev } => {
                if x <= 0.0 {
                    0.0
                } else {
                    LogNormal::new(log_mean, log_std_dev)
                        .expect("validated parameters")
                        .cdf(x)
                }
            }
        }
    }

    /// Quantile of the fitted distribution.
    pub fn percentile(&self, p: f64) -> f64 {
        match *self {
            FittedModel::Exponential { rate } => -(1.0 - p).ln() / rate,
            FittedModel::Normal { mean, std_dev } => Normal::new(mean, std_dev)
                .expect("validated parameters")
                .inverse_cdf(p),
            FittedModel::LogNormal { log_mean, log_std_dev } => {
                LogNormal::new(log_mean, log_std_dev)
                    .expect("validated parameters")
                    .inverse_cdf(p)
            }
        }
    }

    /// Parameter estimates with large-sample standard errors.
    pub fn param_summary(&self, n: usize) -> Vec<ParamEstimate> {
        let nf = n as f64;
        match *self {
            FittedModel::Exponential { rate } => vec![ParamEstimate {
                name: "rate",
                value: rate,
                std_err: rate / nf.sqrt(),
            }],
            FittedModel::Normal { mean, std_dev } => vec![
                ParamEstimate {
                    name: "mean",
                    value: mean,
                    std_err: std_dev / nf.sqrt(),
                },
                ParamEstimate {
                    name: "std_dev",
                    value: std_dev,
                    std_err: std_dev / (2.0 * nf).sqrt(),
                },
            ],
            FittedModel::LogNormal { log_mean, log_std_dev } => vec![
                ParamEstimate {
                    name: "log_mean",
                    value: log_mean,
                    std_err: log_std_dev / nf.sqrt(),
                },
                ParamEstimate {
                    name: "log_std_dev",
                    value: log_std_dev,
                    std_err: log_std_dev / (2.0 * nf).sqrt(),
                },
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParamEstimate {
    pub name: &'static str,
    pub value: f64,
    pub std_err: f64,
}

/// A fit with its log-likelihood and AIC value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub model: FittedModel,
    pub log_likelihood: f64,
    pub aic: f64,
    pub sample_count: usize,
}

impl FitResult {
    fn new(model: FittedModel, log_likelihood: f64, sample_count: usize) -> Self {
        Self {
            model,
            log_likelihood,
            aic: 2.0 * model.param_count() as f64 - 2.0 * log_likelihood,
            sample_count,
        }
    }
}

fn require_samples(samples: &[f64]) -> Result<(), FitError> {
    if samples.len() < 2 {
        return Err(FitError::InsufficientData {
            needed: 2,
            got: samples.len(),
        });
    }
    Ok(())
}

fn require_positive(samples: &[f64]) -> Result<(), FitError> {
    if let Some(&bad) = samples.iter().find(|&&x| !(x > 0.0)) {
        return Err(FitError::NonPositiveSample { value: bad });
    }
    Ok(())
}

/// MLE fit of an exponential rate: `rate = n / sum(x)`.
pub fn fit_exponential_mle(samples: &[f64]) -> Result<FitResult, FitError> {
    require_samples(samples)?;
    require_positive(samples)?;
    let n = samples.len() as f64;
    let sum: f64 = samples.iter().sum();
    let rate = n / sum;
    let loglik = n * rate.ln() - rate * sum;
    Ok(FitResult::new(
        FittedModel::Exponential { rate },
        loglik,
        samples.len(),
    ))
}

fn normal_mle(samples: &[f64]) -> Result<(f64, f64, f64), FitError> {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    // Biased MLE variance.
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    if var <= 0.0 {
        return Err(FitError::DegenerateSample);
    }
    let loglik = -0.5 * n * ((std::f64::consts::TAU * var).ln() + 1.0);
    Ok((mean, var, loglik))
}

/// MLE fit of a normal distribution (biased variance estimator).
pub fn fit_normal_mle(samples: &[f64]) -> Result<FitResult, FitError> {
    require_samples(samples)?;
    let (mean, var, loglik) = normal_mle(samples)?;
    Ok(FitResult::new(
        FittedModel::Normal {
            mean,
            std_dev: var.sqrt(),
        },
        loglik,
        samples.len(),
    ))
}

/// MLE fit of a lognormal distribution: a normal fit on the logs.
pub fn fit_lognormal_mle(samples: &[f64]) -> Result<FitResult, FitError> {
    require_samples(samples)?;
    require_positive(samples)?;
    let logs: Vec<f64> = samples.iter().map(|x| x.ln()).collect();
    let (mean, var, normal_loglik) = normal_mle(&logs)?;
    let loglik = normal_loglik - logs.iter().sum::<f64>();
    Ok(FitResult::new(
        FittedModel::LogNormal {
            log_mean: mean,
            log_std_dev: var.sqrt(),
        },
        loglik,
        samples.len(),
    ))
}

/// Fits all candidate models and returns the minimum-AIC fit; ties prefer
/// fewer parameters, then the fixed model order.
pub fn select_best(samples: &[f64]) -> Result<FitResult, FitError> {
    let fits = [
        fit_exponential_mle(samples),
        fit_normal_mle(samples),
        fit_lognormal_mle(samples),
    ];
    fits.into_iter()
        .flatten()
        .min_by(|a, b| {
            a.aic
                .partial_cmp(&b.aic)
                .unwrap()
                .then(a.model.param_count().cmp(&b.model.param_count()))
                .then(a.model.order().cmp(&b.model.order()))
        })
        .ok_or(FitError::NoModelFits)
}

/// Discretizes a fitted duration distribution into `num_bins` equal-width
/// bins on `[0, d_cap]`. Mass beyond the cap folds into the top bin; for
/// models with support below zero the negative tail folds into the bottom
/// bin. The result sums to one.
pub fn discretize_duration(
    model: &FittedModel,
    num_bins: usize,
    d_cap: f64,
) -> Result<Vec<f64>, FitError> {
    if num_bins < 2 {
        return Err(FitError::InvalidDiscretization(format!(
            "need at least 2 bins, got {num_bins}"
        )));
    }
    if !(d_cap > 0.0) || !d_cap.is_finite() {
        return Err(FitError::InvalidDiscretization(format!(
            "cap must be positive and finite, got {d_cap}"
        )));
    }
    let width = d_cap / num_bins as f64;
    let mut pmf = Vec::with_capacity(num_bins);
    for k in 0..num_bins {
        let lo = k as f64 * width;
        let hi = (k + 1) as f64 * width;
        pmf.push((model.cdf(hi) - model.cdf(lo)).max(0.0));
    }
    pmf[0] += model.cdf(0.0);
    let top = num_bins - 1;
    pmf[top] += 1.0 - model.cdf(d_cap);
    Ok(pmf)
}
