//! Error function, its complement and inverses, and the standard normal CDF.
//!
//! `erf`/`erfc` follow the FreeBSD msun `s_erf.c` rational approximations:
//!
//! ```text
//! ====================================================
//! Copyright (C) 1993 by Sun Microsystems, Inc. All rights reserved.
//!
//! Developed at SunPro, a Sun Microsystems, Inc. business.
//! Permission to use, copy, modify, and distribute this
//! software is freely granted, provided that this notice
//! is preserved.
//! ====================================================
//! ```
//!
//! The inverses start from Giles' single-precision approximation and are
//! polished with Halley iterations against `erf` or `erfc`, whichever is
//! better conditioned at the root.
#![allow(clippy::excessive_precision)]

use std::f64::consts::{FRAC_2_SQRT_PI, PI, SQRT_2};

const ERX: f64 = 8.45062911510467529297e-01; // 0x3FEB0AC160000000

// coefficients for approximation to  erf in [0, 0.84375]
const EFX: f64 = 1.28379167095512586316e-01; // 0x3FC06EBA8214DB69
const EFX8: f64 = 1.02703333676410069053e+00; // 0x3FF06EBA8214DB69
const PP0: f64 = 1.28379167095512558561e-01; // 0x3FC06EBA8214DB68
const PP1: f64 = -3.25042107247001499370e-01; // 0xBFD4CD7D691CB913
const PP2: f64 = -2.84817495755985104766e-02; // 0xBF9D2A51DBD7194F
const PP3: f64 = -5.77027029648944159157e-03; // 0xBF77A291236668E4
const PP4: f64 = -2.37630166566501626084e-05; // 0xBEF8EAD6120016AC
const QQ1: f64 = 3.97917223959155352819e-01; // 0x3FD97779CDDADC09
const QQ2: f64 = 6.50222499887672944485e-02; // 0x3FB0A54C5536CEBA
const QQ3: f64 = 5.08130628187576562776e-03; // 0x3F74D022C4D36B0F
const QQ4: f64 = 1.32494738004321644526e-04; // 0x3F215DC9221C1A10
const QQ5: f64 = -3.96022827877536812320e-06; // 0xBED09C4342A26120

// coefficients for approximation to  erf  in [0.84375, 1.25]
const PA0: f64 = -2.36211856075265944077e-03; // 0xBF6359B8BEF77538
const PA1: f64 = 4.14856118683748331666e-01; // 0x3FDA8D00AD92B34D
const PA2: f64 = -3.72207876035701323847e-01; // 0xBFD7D240FBB8C3F1
const PA3: f64 = 3.18346619901161753674e-01; // 0x3FD45FCA805120E4
const PA4: f64 = -1.10894694282396677476e-01; // 0xBFBC63983D3E28EC
const PA5: f64 = 3.54783043256182359371e-02; // 0x3FA22A36599795EB
const PA6: f64 = -2.16637559486879084300e-03; // 0xBF61BF380A96073F
const QA1: f64 = 1.06420880400844228286e-01; // 0x3FBB3E6618EEE323
const QA2: f64 = 5.40397917702171048937e-01; // 0x3FE14AF092EB6F33
const QA3: f64 = 7.18286544141962662868e-02; // 0x3FB2635CD99FE9A7
const QA4: f64 = 1.26171219808761642112e-01; // 0x3FC02660E763351F
const QA5: f64 = 1.36370839120290507362e-02; // 0x3F8BEDC26B51DD1C
const QA6: f64 = 1.19844998467991074170e-02; // 0x3F888B545735151D

// coefficients for approximation to  erfc in [1.25, 1/0.35]
const RA0: f64 = -9.86494403484714822705e-03; // 0xBF843412600D6435
const RA1: f64 = -6.93858572707181764372e-01; // 0xBFE63416E4BA7360
const RA2: f64 = -1.05586262253232909814e+01; // 0xC0251E0441B0E726
const RA3: f64 = -6.23753324503260060396e+01; // 0xC04F300AE4CBA38D
const RA4: f64 = -1.62396669462573470355e+02; // 0xC0644CB184282266
const RA5: f64 = -1.84605092906711035994e+02; // 0xC067135CEBCCABB2
const RA6: f64 = -8.12874355063065934246e+01; // 0xC054526557E4D2F2
const RA7: f64 = -9.81432934416914548592e+00; // 0xC023A0EFC69AC25C
const SA1: f64 = 1.96512716674392571292e+01; // 0x4033A6B9BD707687
const SA2: f64 = 1.37657754143519042600e+02; // 0x4061350C526AE721
const SA3: f64 = 4.34565877475229228821e+02; // 0x407B290DD58A1A71
const SA4: f64 = 6.45387271733267880336e+02; // 0x40842B1921EC2868
const SA5: f64 = 4.29008140027567833386e+02; // 0x407AD02157700314
const SA6: f64 = 1.08635005541779435134e+02; // 0x405B28A3EE48AE2C
const SA7: f64 = 6.57024977031928170135e+00; // 0x401A47EF8E484A93
const SA8: f64 = -6.04244152148580987438e-02; // 0xBFAEEFF2EE749A62

// coefficients for approximation to  erfc in [1/.35, 28]
const RB0: f64 = -9.86494292470009928597e-03; // 0xBF84341239E86F4A
const RB1: f64 = -7.99283237680523006574e-01; // 0xBFE993BA70C285DE
const RB2: f64 = -1.77579549177547519889e+01; // 0xC031C209555F995A
const RB3: f64 = -1.60636384855821916062e+02; // 0xC064145D43C5ED98
const RB4: f64 = -6.37566443368389627722e+02; // 0xC083EC881375F228
const RB5: f64 = -1.02509513161107724954e+03; // 0xC09004616A2E5992
const RB6: f64 = -4.83519191608651397019e+02; // 0xC07E384E9BDC383F
const SB1: f64 = 3.03380607434824582924e+01; // 0x403E568B261D5190
const SB2: f64 = 3.25792512996573918826e+02; // 0x40745CAE221B9F0A
const SB3: f64 = 1.53672958608443695994e+03; // 0x409802EB189D5118
const SB4: f64 = 3.19985821950859553908e+03; // 0x40A8FFB7688C246A
const SB5: f64 = 2.55305040643316442583e+03; // 0x40A3F219CEDF3BE6
const SB6: f64 = 4.74528541206955367215e+02; // 0x407DA874E79FE763
const SB7: f64 = -2.24409524465858183362e+01; // 0xC03670E242712D62

const VERY_TINY: f64 = 2.848094538889218e-306; // 0x0080000000000000

const TINY: f64 = 1.3877787807814456755e-17; // 2^-56
const SMALL: f64 = 3.7252902984619140625e-9; // 2^-28

#[inline]
fn erx_poly_small(x: f64) -> f64 {
    let z = x * x;
    let r = PP0 + z * (PP1 + z * (PP2 + z * (PP3 + z * PP4)));
    let s = 1.0 + z * (QQ1 + z * (QQ2 + z * (QQ3 + z * (QQ4 + z * QQ5))));
    r / s
}

#[inline]
fn erx_poly_mid(x: f64) -> f64 {
    let s = x - 1.0;
    let p = PA0 + s * (PA1 + s * (PA2 + s * (PA3 + s * (PA4 + s * (PA5 + s * PA6)))));
    let q = 1.0 + s * (QA1 + s * (QA2 + s * (QA3 + s * (QA4 + s * (QA5 + s * QA6)))));
    p / q
}

/// erfc(x) for x in [1.25, 28).
#[inline]
fn erfc_tail(x: f64) -> f64 {
    let s = 1.0 / (x * x);
    let (r, ss) = if x < 1.0 / 0.35 {
        (
            RA0 + s * (RA1 + s * (RA2 + s * (RA3 + s * (RA4 + s * (RA5 + s * (RA6 + s * RA7)))))),
            1.0 + s * (SA1 + s * (SA2 + s * (SA3 + s * (SA4 + s * (SA5 + s * (SA6 + s * (SA7 + s * SA8))))))),
        )
    } else {
        (
            RB0 + s * (RB1 + s * (RB2 + s * (RB3 + s * (RB4 + s * (RB5 + s * RB6))))),
            1.0 + s * (SB1 + s * (SB2 + s * (SB3 + s * (SB4 + s * (SB5 + s * (SB6 + s * SB7)))))),
        )
    };
    // x truncated to 20 significant bits so that z*z is exact
    let z = f64::from_bits(x.to_bits() & 0xffff_ffff_0000_0000);
    (-z * z - 0.5625).exp() * ((z - x) * (z + x) + r / ss).exp() / x
}

/// The error function.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_infinite() {
        return x.signum();
    }
    let a = x.abs();
    let v = if a < 0.84375 {
        if a < SMALL {
            if a < VERY_TINY {
                0.125 * (8.0 * a + EFX8 * a)
            } else {
                a + EFX * a
            }
        } else {
            a + a * erx_poly_small(a)
        }
    } else if a < 1.25 {
        ERX + erx_poly_mid(a)
    } else if a >= 6.0 {
        1.0
    } else {
        1.0 - erfc_tail(a)
    };
    v.copysign(x)
}

/// The complementary error function `1 - erf(x)`, accurate in the right tail.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return 2.0;
    }
    let neg = x < 0.0;
    let a = x.abs();
    if a < 0.84375 {
        let t = if a < TINY {
            a
        } else {
            let y = erx_poly_small(a);
            if a < 0.25 {
                a + a * y
            } else {
                0.5 + (a * y + (a - 0.5))
            }
        };
        return if neg { 1.0 + t } else { 1.0 - t };
    }
    if a < 1.25 {
        let pq = erx_poly_mid(a);
        return if neg { 1.0 + ERX + pq } else { 1.0 - ERX - pq };
    }
    if a < 28.0 {
        if neg && a > 6.0 {
            return 2.0;
        }
        let r = erfc_tail(a);
        return if neg { 2.0 - r } else { r };
    }
    if neg {
        2.0
    } else {
        0.0
    }
}

/// Giles' single-precision inverse error function, used as a starting point.
/// `one_minus_sq` is `(1 - x)(1 + x)` computed by the caller without cancellation.
fn erf_inv_guess(x: f64, one_minus_sq: f64) -> f64 {
    let mut w = -one_minus_sq.ln();
    let p = if w < 5.0 {
        w -= 2.5;
        let mut p = 2.81022636e-08;
        p = 3.43273939e-07 + p * w;
        p = -3.5233877e-06 + p * w;
        p = -4.39150654e-06 + p * w;
        p = 0.00021858087 + p * w;
        p = -0.00125372503 + p * w;
        p = -0.00417768164 + p * w;
        p = 0.246640727 + p * w;
        1.50140941 + p * w
    } else {
        w = w.sqrt() - 3.0;
        let mut p = -0.000200214257;
        p = 0.000100950558 + p * w;
        p = 0.00134934322 + p * w;
        p = -0.00367342844 + p * w;
        p = 0.00573950773 + p * w;
        p = -0.0076224613 + p * w;
        p = 0.00943887047 + p * w;
        p = 1.00167406 + p * w;
        2.83297682 + p * w
    };
    p * x
}

/// Halley refinement of a root of `erf(y) = x` (when `use_erfc` is false)
/// or `erfc(y) = q` (when true).
fn halley_polish(mut y: f64, target: f64, use_erfc: bool) -> f64 {
    for _ in 0..20 {
        let (residual, slope) = if use_erfc {
            (erfc(y) - target, -FRAC_2_SQRT_PI * (-y * y).exp())
        } else {
            (erf(y) - target, FRAC_2_SQRT_PI * (-y * y).exp())
        };
        if residual == 0.0 || slope == 0.0 {
            break;
        }
        let u = residual / slope;
        let step = u / (1.0 + y * u);
        y -= step;
        if step.abs() <= 1e-17 * y.abs().max(1e-300) {
            break;
        }
    }
    y
}

/// Inverse of [`erf`] on (-1, 1). Returns ±inf at ±1 and NaN outside.
pub fn erf_inv(x: f64) -> f64 {
    if x.is_nan() || x.abs() > 1.0 {
        return f64::NAN;
    }
    if x == 1.0 {
        return f64::INFINITY;
    }
    if x == -1.0 {
        return f64::NEG_INFINITY;
    }
    if x == 0.0 {
        return x;
    }
    if x.abs() > 0.5 {
        let q = 1.0 - x.abs();
        return erfc_inv(q).copysign(x);
    }
    let guess = erf_inv_guess(x, (1.0 - x) * (1.0 + x));
    halley_polish(guess, x, false)
}

/// Inverse of [`erfc`] on (0, 2). Precise for small `q`, i.e. for
/// `erf_inv(1 - q)` where `1 - q` would round.
pub fn erfc_inv(q: f64) -> f64 {
    if q.is_nan() || !(0.0..=2.0).contains(&q) {
        return f64::NAN;
    }
    if q == 0.0 {
        return f64::INFINITY;
    }
    if q == 2.0 {
        return f64::NEG_INFINITY;
    }
    if q > 1.0 {
        return -erfc_inv(2.0 - q);
    }
    if q > 0.5 {
        return erf_inv(1.0 - q);
    }
    let guess = if q < 1e-12 {
        // erfc(y) ~ exp(-y^2) / (y sqrt(pi))
        let l = -q.ln();
        let y0 = l.sqrt();
        (l - (y0 * PI.sqrt()).ln()).sqrt()
    } else {
        erf_inv_guess(1.0 - q, q * (2.0 - q))
    };
    halley_polish(guess, q, true)
}

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn erf_reference_values() {
        // high-precision reference values
        let table = [
            (0.1, 0.1124629160182848984047122510143040617233925185058162),
            (0.5, 0.5204998778130465376827466538919645287364515757579637),
            (1.0, 0.8427007929497148693412206350826092592960669979663029),
            (2.0, 0.9953222650189527341620692563672529286108917970400601),
            (3.0, 0.9999779095030014145586272238704176796201522929126008),
        ];
        for (x, want) in table {
            assert!(rel(erf(x), want) < 1e-15, "erf({x})");
            assert!(rel(erf(-x), -want) < 1e-15);
        }
        assert_eq!(erf(0.0), 0.0);
        assert_eq!(erf(f64::INFINITY), 1.0);
        assert!(erf(f64::NAN).is_nan());
    }

    #[test]
    fn erfc_right_tail_keeps_precision() {
        // erfc(5) = 1.5374597944280348502e-12
        assert!(rel(erfc(5.0), 1.5374597944280348502e-12) < 1e-13);
        // erfc(10) = 2.0884875837625447570e-45
        assert!(rel(erfc(10.0), 2.0884875837625447570e-45) < 1e-13);
        assert_eq!(erfc(-30.0), 2.0);
    }

    #[test]
    fn inverse_round_trip() {
        let mut x = -0.999;
        while x < 0.999 {
            let y = erf_inv(x);
            assert!((erf(y) - x).abs() < 2e-16, "x = {x}");
            x += 0.0137;
        }
        for k in 1..300 {
            let q = 10f64.powf(-(k as f64) / 10.0);
            let y = erfc_inv(q);
            assert!(rel(erfc(y), q) < 1e-13, "q = {q}");
        }
    }

    #[test]
    fn inverse_edges() {
        assert_eq!(erf_inv(1.0), f64::INFINITY);
        assert_eq!(erf_inv(-1.0), f64::NEG_INFINITY);
        assert!(erf_inv(1.5).is_nan());
        assert_eq!(erfc_inv(1.0), 0.0);
        assert!((erfc_inv(1.5) + erfc_inv(0.5)).abs() < 1e-16);
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        // Phi(1.96) = 0.97500210485177952
        assert!((normal_cdf(1.96) - 0.97500210485177952).abs() < 1e-15);
        assert!((normal_cdf(-1.0) - 0.15865525393145705).abs() < 1e-15);
    }
}
