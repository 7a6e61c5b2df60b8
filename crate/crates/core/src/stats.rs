//! Small summary-statistics helpers shared by the experiment harness.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Median of an already sorted slice; NaN when empty.
pub fn median_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    median_sorted(&v)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Pearson goodness-of-fit p-value of `observed` counts against `probs`.
/// Cells with zero probability must have zero count and are skipped.
pub fn chi_square_p_value(observed: &[f64], probs: &[f64]) -> f64 {
    let total: f64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(probs) {
        if p > 0.0 {
            let e = total * p;
            stat += (o - e) * (o - e) / e;
            cells += 1;
        } else if o > 0.0 {
            return 0.0;
        }
    }
    if cells < 2 {
        return 1.0;
    }
    let chi = ChiSquared::new((cells - 1) as f64).expect("positive dof");
    1.0 - chi.cdf(stat)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
        assert_eq!(mean(&[1.0, 2.0, 6.0]), 3.0);
    }

    #[test]
    fn chi_square_exact_fit() {
        assert!(chi_square_p_value(&[25.0, 25.0, 50.0], &[0.25, 0.25, 0.5]) > 0.99);
        assert!(chi_square_p_value(&[90.0, 10.0], &[0.5, 0.5]) < 1e-10);
        assert_eq!(chi_square_p_value(&[1.0, 1.0], &[1.0, 0.0]), 0.0);
    }
}
