//! Small statistics kernel: population moments, medians, and the normal
//! tail used by the Fisher-z test.
//!
//! The standard deviation convention is population (divide by n) everywhere
//! in this crate; mixing conventions silently shifts Fisher-z statistics.

use crate::scalar::{real, Real};

pub fn mean<F: Real>(xs: &[F]) -> F {
    if xs.is_empty() {
        return F::zero();
    }
    xs.iter().copied().sum::<F>() / F::from_usize_lossy(xs.len())
}

/// Population variance (divide by n).
pub fn variance<F: Real>(xs: &[F]) -> F {
    if xs.is_empty() {
        return F::zero();
    }
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<F>() / F::from_usize_lossy(xs.len())
}

/// Population standard deviation (divide by n).
pub fn std_dev<F: Real>(xs: &[F]) -> F {
    variance(xs).sqrt()
}

/// Median; the even case averages the two middle order statistics.
pub fn median<F: Real>(xs: &[F]) -> F {
    assert!(!xs.is_empty(), "median of empty slice");
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in median input"));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / real(2.0)
    }
}

/// Complementary error function, accurate to roughly machine precision.
///
/// Uses the non-alternating series for small arguments and a Lentz-evaluated
/// continued fraction for large ones; both converge for the ranges they serve.
pub fn erfc<F: Real>(x: F) -> F {
    if x < F::zero() {
        return real::<F>(2.0) - erfc(-x);
    }
    if x == F::zero() {
        return F::one();
    }
    // exp(-27^2) underflows to zero in f64 long before this bound.
    if x > real(27.0) {
        return F::zero();
    }
    if x < real(2.0) {
        F::one() - erf_series(x)
    } else {
        erfc_continued_fraction(x)
    }
}

/// erf(x) = (2x e^{-x^2}/sqrt(pi)) * sum_k (2x^2)^k / (2k+1)!!
fn erf_series<F: Real>(x: F) -> F {
    let two_x2 = real::<F>(2.0) * x * x;
    let mut term = F::one();
    let mut sum = F::one();
    let eps = F::epsilon();
    let mut k = 1u32;
    loop {
        term = term * two_x2 / real(2.0 * f64::from(k) + 1.0);
        sum = sum + term;
        if term < eps * sum || k > 200 {
            break;
        }
        k += 1;
    }
    let sqrt_pi = real::<F>(std::f64::consts::PI).sqrt();
    real::<F>(2.0) * x * (-x * x).exp() / sqrt_pi * sum
}

/// erfc(x) * sqrt(pi) * e^{x^2} = 1/(x + (1/2)/(x + (2/2)/(x + (3/2)/(x + ...))))
fn erfc_continued_fraction<F: Real>(x: F) -> F {
    let tiny = real::<F>(1e-300).max(F::min_positive_value());
    let eps = F::epsilon();
    let mut f = x;
    let mut c = x;
    let mut d = F::zero();
    for n in 1..=300u32 {
        let a = real::<F>(f64::from(n) / 2.0);
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = d.recip();
        let delta = c * d;
        f = f * delta;
        if (delta - F::one()).abs() < eps {
            break;
        }
    }
    let sqrt_pi = real::<F>(std::f64::consts::PI).sqrt();
    (-x * x).exp() / (sqrt_pi * f)
}

/// Standard normal CDF.
pub fn normal_cdf<F: Real>(z: F) -> F {
    let sqrt2 = real::<F>(std::f64::consts::SQRT_2);
    real::<F>(0.5) * erfc(-z / sqrt2)
}

/// Two-sided tail probability 2*(1 - Phi(|z|)) without cancellation.
pub fn two_sided_p<F: Real>(z: F) -> F {
    let sqrt2 = real::<F>(std::f64::consts::SQRT_2);
    erfc(z.abs() / sqrt2)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values computed with mpmath at 30 digits.
    #[test]
    fn erfc_matches_high_precision_reference() {
        let cases = [
            (0.5, 0.479500122186953462317253346108),
            (1.0, 0.157299207050285130658779364917),
            (2.0, 0.00467773498104726583793074363275),
            (3.5, 7.43098372341412745523683756096e-7),
            (8.0, 1.12242971729829270799678884432e-29),
        ];
        for (x, want) in cases {
            let got = erfc::<f64>(x);
            assert!(
                ((got - want) / want).abs() < 1e-13,
                "erfc({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn erfc_negative_arguments() {
        let x = 1.25_f64;
        assert!((erfc(-x) - (2.0 - erfc(x))).abs() < 1e-15);
        assert_eq!(erfc(0.0_f64), 1.0);
    }

    #[test]
    fn normal_cdf_reference() {
        assert!((normal_cdf(1.96_f64) - 0.975002104851779563787176307604).abs() < 1e-14);
        assert!((normal_cdf(0.0_f64) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn population_moments() {
        let xs = [1.0_f64, 2.0, 3.0];
        assert_eq!(mean(&xs), 2.0);
        // Population convention: variance of [1,2,3] is 2/3, std sqrt(2/3).
        assert!((variance(&xs) - 2.0 / 3.0).abs() < 1e-15);
        assert!((std_dev(&xs) - (2.0 / 3.0_f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0_f64, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0_f64, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn erfc_works_in_f32() {
        let got = erfc::<f32>(1.0);
        assert!((got - 0.157_299_2_f32).abs() < 1e-6);
    }
}
