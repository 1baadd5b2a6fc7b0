//! Gamma function and the reflection product that sets the contention constant.

use crate::scalar::Scalar;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Gamma function via the Lanczos approximation (g = 7, nine terms), with
/// Euler reflection below 1/2.
pub fn gamma<T: Scalar>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        let pi = T::PI();
        return pi / ((pi * x).sin() * gamma(T::one() - x));
    }
    let x = x - T::one();
    let mut acc = T::lit(LANCZOS_COEFFS[0]);
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc = acc + T::lit(c) / (x + T::from_usize_lossy(i));
    }
    let t = x + T::lit(LANCZOS_G) + half;
    let sqrt_two_pi = (T::lit(2.0) * T::PI()).sqrt();
    sqrt_two_pi * t.powf(x + half) * (-t).exp() * acc
}

/// `Γ(1+δ)·Γ(1−δ)` evaluated through two gamma calls.
pub fn gamma_product<T: Scalar>(delta: T) -> T {
    gamma(T::one() + delta) * gamma(T::one() - delta)
}

/// `πδ / sin(πδ)`, the closed form of [`gamma_product`].
pub fn reflection_product<T: Scalar>(delta: T) -> T {
    if delta == T::zero() {
        return T::one();
    }
    let x = T::PI() * delta;
    x / x.sin()
}
