use statrs::distribution::{ContinuousCDF, StudentsT};

/// Sample mean and standard error `s/√n`; the error is undefined for `n < 2`.
pub fn mean_stderr(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    (Some(mean), Some(sd / (n as f64).sqrt()))
}

/// One-sided paired t-test of `mean(a − b) > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedTest {
    pub n: usize,
    pub mean_diff: f64,
    pub t_stat: f64,
    pub p_value: f64,
}

pub fn paired_one_sided(a: &[f64], b: &[f64]) -> Option<PairedTest> {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diffs.len();
    let (Some(mean), Some(se)) = mean_stderr(&diffs) else {
        return None;
    };
    let t_stat = if se > 0.0 {
        mean / se
    } else if mean > 0.0 {
        f64::INFINITY
    } else if mean < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).ok()?;
    let p_value = if t_stat.is_finite() {
        1.0 - dist.cdf(t_stat)
    } else if t_stat > 0.0 {
        0.0
    } else {
        1.0
    };
    Some(PairedTest {
        n,
        mean_diff: mean,
        t_stat,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_value_has_no_stderr() {
        assert_eq!(mean_stderr(&[3.0]), (Some(3.0), None));
        assert_eq!(mean_stderr(&[]), (None, None));
    }

    #[test]
    fn stderr_of_small_sample() {
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, Some(2.5));
        // sd = sqrt(5/3)
        assert!((se.unwrap() - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn paired_test_direction() {
        let a = [2.0, 3.1, 4.2, 5.0, 6.3];
        let b = [1.0, 2.0, 3.5, 4.1, 5.0];
        let t = paired_one_sided(&a, &b).unwrap();
        assert!(t.p_value < 0.01, "{t:?}");
        let t = paired_one_sided(&b, &a).unwrap();
        assert!(t.p_value > 0.99, "{t:?}");
    }
}
