//! Modified Bessel functions of the first kind of integer order.
//!
//! Evaluated by the ascending series
//! `I_n(z) = Σ_k (z/2)^(2k+n) / (k! (k+n)!)`, accumulated relative to its
//! first term so the logarithm stays finite for large orders.

use crate::math;

/// `ln I_n(z)` for `z ≥ 0`. Returns `-inf` when `I_n(z) = 0` (`z = 0`, `n > 0`).
pub fn ln_bessel_i(n: u32, z: f64) -> f64 {
    debug_assert!(z >= 0.0);
    if z == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let half = 0.5 * z;
    let q = half * half;
    let ln_first = n as f64 * math::ln(half) - math::ln_factorial(n as u64);

    let mut term = 1.0;
    let mut sum = math::KahanSum::new();
    sum.add(term);
    let mut k = 0u64;
    loop {
        term *= q / ((k + 1) as f64 * (k + 1 + n as u64) as f64);
        sum.add(term);
        k += 1;
        // terms decrease once k exceeds roughly z/2
        if term <= 1e-17 * sum.value() && (k as f64) > half {
            break;
        }
    }
    ln_first + math::ln(sum.value())
}

/// `I_n(z)` for `z ≥ 0`.
pub fn bessel_i(n: u32, z: f64) -> f64 {
    math::exp(ln_bessel_i(n, z))
}
