//! Scalar special functions with overflow-safe forms.

use std::f64::consts::FRAC_1_SQRT_2;

use errorfunctions::RealErrorFunctions;

/// Scaled complementary error function `erfcx(z) = exp(z^2) erfc(z)`.
///
/// Overflows to infinity for `z < -26.6`.
pub fn erfcx(z: f64) -> f64 {
    RealErrorFunctions::erfcx(z)
}

/// Standard normal tail `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// `Q(x) exp(x^2 / 2)` for `x >= 0`, in `(0, 1/2]`.
pub fn scaled_tail(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    0.5 * erfcx(x * FRAC_1_SQRT_2)
}

/// Zeroth-order Bessel function of the first kind.
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

/// Logistic function, stable for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(e^a + e^b)`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}
