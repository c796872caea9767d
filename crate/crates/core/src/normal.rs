//! Standard normal density and distribution function.
//!
//! The CDF goes through `erfc` so that the lower tail keeps full relative
//! accuracy; `libm` is accurate to about one ulp over the whole line.

use std::f64::consts::FRAC_1_SQRT_2;

/// 1 / sqrt(2π)
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[inline]
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `∫_lo^hi w² φ(w) dw`, via the antiderivative `Φ(w) − wφ(w)`.
pub fn second_moment_between(lo: f64, hi: f64) -> f64 {
    let anti = |w: f64| {
        if w.is_infinite() {
            cdf(w)
        } else {
            cdf(w) - w * pdf(w)
        }
    };
    anti(hi) - anti(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // Values from a 50-digit mpmath evaluation.
        let cases = [
            (0.0, 0.5),
            (1.0, 0.841_344_746_068_542_9),
            (-1.0, 0.158_655_253_931_457_05),
            (2.0, 0.977_249_868_051_820_8),
            (-3.5, 2.326_290_790_355_250_4e-4),
            (-8.0, 6.220_960_574_271_784e-16),
            (8.0, 0.999_999_999_999_999_4),
        ];
        for (x, want) in cases {
            let got = cdf(x);
            assert!(
                (got - want).abs() <= 1e-12 * want.max(1e-4),
                "cdf({x}) = {got}, want {want}"
            );
        }
        assert!((pdf(0.0) - INV_SQRT_2PI).abs() < 1e-16);
        assert!((pdf(1.5) - 0.129_517_595_665_891_74).abs() < 1e-15);
    }

    #[test]
    fn second_moment_full_line_is_one() {
        let m = second_moment_between(f64::NEG_INFINITY, f64::INFINITY);
        assert!((m - 1.0).abs() < 1e-15);
        let half = second_moment_between(0.0, f64::INFINITY);
        assert!((half - 0.5).abs() < 1e-15);
    }
}
