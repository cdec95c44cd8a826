//! Special functions and one-dimensional numerics used by the radio and
//! throughput models: Riemann/Hurwitz zeta, log-gamma, the modified Bessel
//! function `I_0`, adaptive Gauss-Kronrod quadrature and bisection.

use crate::error::{Error, Result};

/// Bernoulli numbers B_2, B_4, ..., B_24.
const BERNOULLI_EVEN: [f64; 12] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
];

/// Number of directly summed terms before the Euler-Maclaurin tail.
const ZETA_DIRECT_TERMS: usize = 24;

/// Hurwitz zeta `sum_{n>=0} (n + a)^{-s}` for `s > 1`, `a > 0`.
///
/// Direct summation of the first terms followed by the Euler-Maclaurin
/// remainder (integral tail, half end term and Bernoulli corrections).
pub fn hurwitz_zeta(s: f64, a: f64) -> Result<f64> {
    if !(s > 1.0) {
        return Err(Error::DivergentSeries(format!(
            "zeta series diverges for s = {s} <= 1"
        )));
    }
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Hurwitz zeta shift must be positive, got {a}"
        )));
    }
    let mut sum = 0.0;
    for n in 0..ZETA_DIRECT_TERMS {
        sum += (n as f64 + a).powf(-s);
    }
    let x = ZETA_DIRECT_TERMS as f64 + a;
    let mut tail = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // rising factorial s (s+1) ... (s+2j-2) and (2j)!
    let mut rising = s;
    let mut fact = 2.0;
    let mut xpow = x.powf(-s - 1.0);
    for (j, b2j) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b2j / fact * rising * xpow;
        tail += term;
        if term.abs() < 1e-18 * tail.abs() {
            break;
        }
        let j2 = 2.0 * (j as f64 + 1.0);
        rising *= (s + j2 - 1.0) * (s + j2);
        fact *= (j2 + 1.0) * (j2 + 2.0);
        xpow /= x * x;
    }
    Ok(sum + tail)
}

/// Riemann zeta for `s > 1`.
pub fn zeta(s: f64) -> Result<f64> {
    hurwitz_zeta(s, 1.0)
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        let s = (std::f64::consts::PI * x).sin();
        return (std::f64::consts::PI / s.abs()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS_COEF[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `ln(x!)` extended to real `x >= 0` through `ln Gamma(x + 1)`.
pub fn ln_factorial(x: f64) -> f64 {
    if x == 0.0 || x == 1.0 {
        return 0.0;
    }
    ln_gamma(x + 1.0)
}

const BESSEL_SERIES_LIMIT: f64 = 30.0;

/// Power series sum_k (x^2/4)^k / (k!)^2. All terms are positive so the
/// sum is accurate to rounding for every x where it is used.
fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term < 1e-17 * sum {
            return sum;
        }
        k += 1.0;
    }
}

/// Asymptotic bracket of `e^{-x} sqrt(2 pi x) I_0(x)` for large x.
fn i0_asymptotic_bracket(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..40 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= odd * odd / (8.0 * kf * x);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x <= BESSEL_SERIES_LIMIT {
        i0_series(x)
    } else {
        x.exp() / (2.0 * std::f64::consts::PI * x).sqrt() * i0_asymptotic_bracket(x)
    }
}

/// Exponentially scaled `e^{-x} I_0(x)`, finite for arbitrarily large x.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let x = x.abs();
    if x <= BESSEL_SERIES_LIMIT {
        i0_series(x) * (-x).exp()
    } else {
        i0_asymptotic_bracket(x) / (2.0 * std::f64::consts::PI * x).sqrt()
    }
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_KRONROD_W: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const GK_GAUSS_W: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = GK_KRONROD_W[7] * fc;
    let mut gauss = GK_GAUSS_W[3] * fc;
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += GK_KRONROD_W[i] * s;
        if i % 2 == 1 {
            gauss += GK_GAUSS_W[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) integration of `f` over `[a, b]` to an
/// absolute tolerance. Returns the estimate and the accumulated error bound.
pub fn integrate_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let mut total = 0.0;
    let mut err_total = 0.0;
    const PIECES: usize = 8;
    let w = (b - a) / PIECES as f64;
    let mut stack: Vec<(f64, f64, f64, u32)> = (0..PIECES)
        .rev()
        .map(|i| {
            let hi = if i + 1 == PIECES { b } else { a + w * (i + 1) as f64 };
            (a + w * i as f64, hi, abs_tol / PIECES as f64, 0)
        })
        .collect();
    while let Some((lo, hi, tol, depth)) = stack.pop() {
        let (val, err) = gk15(&f, lo, hi);
        if err <= tol || depth >= 50 {
            total += val;
            err_total += err;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, 0.5 * tol, depth + 1));
            stack.push((lo, mid, 0.5 * tol, depth + 1));
        }
    }
    (total, err_total)
}

/// Bisection for the root of a continuous increasing `f` on `[lo, hi]`,
/// stopping once the bracket is narrower than `tol`.
pub fn bisect_increasing<F: Fn(f64) -> f64>(f: F, target: f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    while hi - lo >= tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zeta_two_is_pi_squared_over_six() {
        let z = zeta(2.0).unwrap();
        assert!((z - PI * PI / 6.0).abs() < 1e-13);
    }

    #[test]
    fn zeta_rejects_divergent_exponent() {
        assert!(matches!(zeta(1.0), Err(Error::DivergentSeries(_))));
        assert!(matches!(hurwitz_zeta(0.5, 0.3), Err(Error::DivergentSeries(_))));
    }

    #[test]
    fn hurwitz_matches_reference_values() {
        // reference values from a 40-digit evaluation
        let cases = [
            (1.88, 1.0 / 3.0, 9.124_673_981_844_135_4),
            (1.88, 2.0 / 3.0, 3.093_431_613_132_720_7),
            (1.5, 1.0 / 3.0, 7.309_925_724_744_449),
            (1.001, 1.0, 1_000.577_288_476_011_6),
            (3.0, 2.0 / 3.0, 3.692_418_282_448_647_6),
        ];
        for (s, a, want) in cases {
            let got = hurwitz_zeta(s, a).unwrap();
            assert!((got - want).abs() < 1e-10, "s={s} a={a}: {got} vs {want}");
        }
    }

    #[test]
    fn ln_gamma_integer_points() {
        let mut fact = 1.0f64;
        for n in 1..30 {
            fact *= n as f64;
            let got = ln_gamma(n as f64 + 1.0);
            assert!((got - fact.ln()).abs() < 1e-12 * fact.ln().max(1.0));
        }
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
    }

    #[test]
    fn i0_small_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        assert!((bessel_i0(1.0) - 1.266_065_877_752_008_4).abs() < 1e-15);
    }

    #[test]
    fn i0_branches_agree_at_switch() {
        let x = BESSEL_SERIES_LIMIT;
        let series = i0_series(x);
        let asym = x.exp() / (2.0 * PI * x).sqrt() * i0_asymptotic_bracket(x);
        assert!((series / asym - 1.0).abs() < 1e-13);
        let big = 700.0;
        assert!(bessel_i0_scaled(big).is_finite());
        assert!((bessel_i0_scaled(big) * (2.0 * PI * big).sqrt() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn quadrature_polynomial_and_gaussian() {
        let (v, _) = integrate_adaptive(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12);
        assert!((v - 0.0).abs() < 1e-12);
        let (v, _) = integrate_adaptive(|x| (-x * x).exp(), -10.0, 10.0, 1e-12);
        assert!((v - PI.sqrt()).abs() < 1e-11);
        // narrow peak far from the interval centre
        let (v, _) = integrate_adaptive(|x| (-(x - 0.9).powi(2) / 2e-4).exp(), 0.0, 1.0, 1e-12);
        assert!((v - (2e-4 * PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn bisection_finds_cube_root() {
        let r = bisect_increasing(|x| x * x * x, 2.0, 0.0, 2.0, 1e-12);
        assert!((r - 2f64.cbrt()).abs() < 1e-11);
    }
}
