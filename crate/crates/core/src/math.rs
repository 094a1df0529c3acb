//! Scalar math on top of `libm`, plus the standard normal distribution.

use core::f64::consts::{FRAC_1_SQRT_2, PI};

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

/// `ln(1 + e^x)` without overflow for large `x`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + ln_1p(exp(-x.abs()))
}

/// Logistic function, the derivative of [`softplus`].
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(t: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * exp(-0.5 * t * t)
}

/// Standard normal CDF, `Φ(t) = erfc(-t/√2) / 2`.
#[inline]
pub fn std_normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(t)`, accurate for large positive `t`.
#[inline]
pub fn std_normal_sf(t: f64) -> f64 {
    0.5 * libm::erfc(t * FRAC_1_SQRT_2)
}

/// Inverse of [`std_normal_cdf`] on the open interval `(0, 1)`.
///
/// Wichura's AS241 rational approximation followed by one Halley step
/// against the `erfc`-based CDF. Returns `None` outside `(0, 1)`.
pub fn std_normal_quantile(u: f64) -> Option<f64> {
    if !(u > 0.0 && u < 1.0) {
        return None;
    }
    let mut x = as241(u);
    // Halley refinement; the residual is taken on whichever tail keeps
    // precision.
    let e = if x <= 0.0 { std_normal_cdf(x) - u } else { (1.0 - u) - std_normal_sf(x) };
    let step = e * sqrt(2.0 * PI) * exp(0.5 * x * x);
    if step.is_finite() {
        x -= step / (1.0 + 0.5 * x * step);
    }
    Some(x)
}

// Coefficients are copied digit for digit from the published table.
#[allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping)]
fn as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2509.080_928_730_122_7 * r + 33430.575_583_588_128) * r + 67265.770_927_008_7) * r
            + 45921.953_931_549_87)
            * r
            + 13731.693_765_509_461)
            * r
            + 1971.590_950_306_551_4)
            * r
            + 133.141_667_891_784_38)
            * r
            + 3.387_132_872_796_366_5;
        let den = ((((((5226.495_278_852_546 * r + 28729.085_735_721_943) * r + 39307.895_800_092_71) * r
            + 21213.794_301_586_596)
            * r
            + 5394.196_021_424_751)
            * r
            + 687.187_007_492_057_9)
            * r
            + 42.313_330_701_600_91)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = sqrt(-ln(tail));
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 0.022_723_844_989_269_184) * r + 0.241_780_725_177_450_6)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_545)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_8e-9 * r + 5.475_938_084_995_345e-4) * r + 0.015_198_666_563_616_457)
            * r
            + 0.148_103_976_427_480_08)
            * r
            + 0.689_767_334_985_1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num =
            ((((((2.010_334_399_292_288e-7 * r + 2.711_555_568_743_487_6e-5) * r + 0.001_242_660_947_388_078_4) * r
                + 0.026_532_189_526_576_124)
                * r
                + 0.296_560_571_828_504_9)
                * r
                + 1.784_826_539_917_291_3)
                * r
                + 5.463_784_911_164_114)
                * r
                + 6.657_904_643_501_103;
        let den =
            ((((((2.044_263_103_389_939_8e-15 * r + 1.421_511_758_316_446e-7) * r + 1.846_318_317_510_054_8e-5) * r
                + 7.868_691_311_456_133e-4)
                * r
                + 0.014_875_361_290_850_615)
                * r
                + 0.136_929_880_922_735_8)
                * r
                + 0.599_832_206_555_887_9)
                * r
                + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `Φ(x) = 1/2 + φ(x) Σ x^(2n+1) / (2n+1)!!`, summed until terms vanish.
    fn cdf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let mut k = 1.0;
        while term.abs() > 1e-300 && k < 2000.0 {
            k += 2.0;
            term *= x * x / k;
            sum += term;
            if term.abs() < sum.abs() * 1e-18 {
                break;
            }
        }
        0.5 + std_normal_pdf(x) * sum
    }

    #[test]
    fn cdf_matches_series_oracle() {
        let mut t = -8.0;
        while t <= 8.0 {
            let err = (std_normal_cdf(t) - cdf_series(t)).abs();
            assert!(err <= 1e-12, "t={t} err={err}");
            t += 0.0625;
        }
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((std_normal_cdf(1.96) - 0.975_002_104_851_780).abs() < 1e-5);
    }

    #[test]
    fn quantile_round_trip() {
        assert_eq!(std_normal_quantile(0.5), Some(0.0));
        let mut u = 1e-8;
        while u < 1.0 - 1e-8 {
            let x = std_normal_quantile(u).unwrap();
            assert!((std_normal_cdf(x) - u).abs() <= 1e-10 * u.max(1e-2), "u={u}");
            u = if u < 0.01 { u * 3.0 } else { u + 0.0123 };
        }
        let hi = std_normal_quantile(1.0 - 1e-8).unwrap();
        assert!((std_normal_cdf(hi) - (1.0 - 1e-8)).abs() <= 1e-10);
    }

    #[test]
    fn quantile_rejects_closed_interval() {
        assert!(std_normal_quantile(0.0).is_none());
        assert!(std_normal_quantile(1.0).is_none());
        assert!(std_normal_quantile(f64::NAN).is_none());
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(0.0) - core::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }
}
