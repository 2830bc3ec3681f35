//! Paired one-tailed t-test on per-query metric values.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Significance threshold for [`PairedTTest::significant`].
pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// `P(T <= t)` for Student's t with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("degrees of freedom must be positive")
        .cdf(t)
}

/// `P(T > t)`, computed without cancellation for large `t`.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("degrees of freedom must be positive")
        .sf(t)
}

/// Outcome of testing whether system A beats system B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedTTest {
    pub queries: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Mean of `a_q - b_q`.
    pub mean_diff: f64,
    /// Sample standard deviation of the differences (`N - 1` denominator).
    pub sd_diff: f64,
    /// `mean / (sd / sqrt(N))`; infinite when all differences are equal and nonzero.
    pub t: f64,
    /// One-tailed p-value for the alternative "A is better".
    pub p: f64,
    pub significant: bool,
}

/// Paired one-tailed t-test of `H1: mean(a - b) > 0`.
///
/// When the differences have zero spread the test degenerates: `p` is 0 for a
/// positive mean, 1 for a negative mean and 0.5 when every difference is 0.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    if a.len() != b.len() {
        return Err(Error::contract(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::contract(format!("a paired t-test needs at least 2 queries, got {n}")));
    }
    if let Some(x) = a.iter().chain(b).find(|x| !x.is_finite()) {
        return Err(Error::contract(format!("non-finite metric value {x}")));
    }
    let nf = n as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / nf;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    let (t, p) = if sd == 0.0 {
        if mean > 0.0 {
            (f64::INFINITY, 0.0)
        } else if mean < 0.0 {
            (f64::NEG_INFINITY, 1.0)
        } else {
            (0.0, 0.5)
        }
    } else {
        let t = mean / (sd / nf.sqrt());
        (t, student_t_sf(t, nf - 1.0))
    };
    Ok(PairedTTest {
        queries: n,
        mean_a: a.iter().sum::<f64>() / nf,
        mean_b: b.iter().sum::<f64>() / nf,
        mean_diff: mean,
        sd_diff: sd,
        t,
        p,
        significant: p < SIGNIFICANCE_LEVEL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_systems() {
        let a = [0.3, 0.5, 0.9];
        let r = paired_t_test(&a, &a).unwrap();
        assert_eq!(r.p, 0.5);
        assert!(!r.significant);
    }

    #[test]
    fn constant_differences() {
        let a = vec![0.6; 100];
        let b = vec![0.5; 100];
        let r = paired_t_test(&a, &b).unwrap();
        assert_eq!(r.p, 0.0);
        assert!(r.significant);
        let r = paired_t_test(&b, &a).unwrap();
        assert_eq!(r.p, 1.0);
        assert!(!r.significant);
    }

    #[test]
    fn cauchy_cdf() {
        // One degree of freedom: F(t) = 1/2 + atan(t) / pi.
        for t in [-3.0, -0.5, 0.0, 0.7, 12.0] {
            let expect = 0.5 + f64::atan(t) / std::f64::consts::PI;
            assert!((student_t_cdf(t, 1.0) - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_short_or_mismatched() {
        assert!(paired_t_test(&[1.0], &[0.0]).is_err());
        assert!(paired_t_test(&[1.0, 2.0], &[0.0]).is_err());
    }
}
