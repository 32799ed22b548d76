//! Load-imbalance metrics over PE finishing times.
//!
//! Both metrics are unitless: a balanced run has `cov ~ 0` and
//! `mean_max ~ 1`.

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("metric undefined: {0}")]
    Undefined(&'static str),
    #[error("invalid finishing time {0}")]
    InvalidTime(String),
}

fn check<F: Real>(times: &[F]) -> Result<(), MetricError> {
    if times.is_empty() {
        return Err(MetricError::Undefined("no finishing times"));
    }
    if let Some(t) = times.iter().find(|t| !(**t >= F::zero()) || !t.is_finite()) {
        return Err(MetricError::InvalidTime(t.to_string()));
    }
    Ok(())
}

fn all_equal<F: Real>(times: &[F]) -> bool {
    times.iter().all(|&t| t == times[0])
}

fn mean<F: Real>(times: &[F]) -> F {
    times.iter().copied().sum::<F>() / F::count(times.len() as u64)
}

/// Coefficient of variation: population standard deviation over the mean.
pub fn cov<F: Real>(times: &[F]) -> Result<F, MetricError> {
    check(times)?;
    let m = mean(times);
    if m == F::zero() {
        return Err(MetricError::Undefined("zero mean finishing time"));
    }
    if all_equal(times) {
        return Ok(F::zero());
    }
    let var = times.iter().map(|&t| (t - m) * (t - m)).sum::<F>() / F::count(times.len() as u64);
    Ok(var.sqrt() / m)
}

/// Mean finishing time over the maximum.
pub fn mean_max<F: Real>(times: &[F]) -> Result<F, MetricError> {
    check(times)?;
    let max = times.iter().copied().fold(F::zero(), F::max);
    if max == F::zero() {
        return Err(MetricError::Undefined("zero maximum finishing time"));
    }
    if all_equal(times) {
        return Ok(F::one());
    }
    Ok(mean(times) / max)
}

/// `100 * (baseline - measured) / baseline`; negative means slower than the baseline.
pub fn percent_improvement<F: Real>(baseline: F, measured: F) -> F {
    F::lit(100.0) * (baseline - measured) / baseline
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImbalanceReport<F> {
    pub cov: F,
    pub mean_max: F,
    pub max_finish: F,
    pub finish_times: Vec<F>,
}

impl<F: Real> ImbalanceReport<F> {
    pub fn from_finish_times(times: &[F]) -> Result<Self, MetricError> {
        Ok(ImbalanceReport {
            cov: cov(times)?,
            mean_max: mean_max(times)?,
            max_finish: times.iter().copied().fold(F::zero(), F::max),
            finish_times: times.to_vec(),
        })
    }

    /// `cov` above `threshold` (0.1 by convention) flags severe imbalance.
    pub fn is_severe(&self, threshold: F) -> bool {
        self.cov > threshold
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced() {
        assert_eq!(cov(&[5.0f64; 4]).unwrap(), 0.0);
        assert_eq!(mean_max(&[5.0f64; 4]).unwrap(), 1.0);
    }

    #[test]
    fn two_four() {
        assert!((cov(&[2.0f64, 4.0]).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert!((mean_max(&[2.0f64, 4.0]).unwrap() - 0.75).abs() < 1e-12);
        assert!((cov(&[2.0f32, 4.0]).unwrap() - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn undefined_cases() {
        assert!(matches!(cov::<f64>(&[]), Err(MetricError::Undefined(_))));
        assert!(matches!(cov(&[0.0f64, 0.0]), Err(MetricError::Undefined(_))));
        assert!(matches!(mean_max(&[0.0f64]), Err(MetricError::Undefined(_))));
        assert!(matches!(cov(&[1.0f64, -1.0]), Err(MetricError::InvalidTime(_))));
        assert!(matches!(mean_max(&[f64::NAN]), Err(MetricError::InvalidTime(_))));
    }

    #[test]
    fn improvement_sign() {
        assert_eq!(percent_improvement(100.0f64, 79.0), 21.0);
        assert_eq!(percent_improvement(100.0f64, 100.0), 0.0);
        assert_eq!(percent_improvement(100.0f64, 115.0), -15.0);
    }

    #[test]
    fn severity_flag() {
        let r = ImbalanceReport::from_finish_times(&[1.0f64, 1.0, 1.0, 4.0]).unwrap();
        assert!(r.is_severe(0.1));
        assert_eq!(r.max_finish, 4.0);
        let r = ImbalanceReport::from_finish_times(&[1.0f64, 1.01]).unwrap();
        assert!(!r.is_severe(0.1));
    }
}
