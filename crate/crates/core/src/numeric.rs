//! Small numerical helpers shared by the modules: logarithms of big integers
//! and compensated summation.

use std::f64::consts::LN_2;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

/// Natural logarithm of a positive big integer.
///
/// The top 64 bits are converted to `f64` (53 significant bits survive) and
/// the discarded low part is accounted for through the bit length, so the
/// result carries full double precision regardless of the size of `x`.
pub fn ln_biguint(x: &BigUint) -> f64 {
    assert!(!x.is_zero(), "logarithm of zero");
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().expect("fits in u64") as f64).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().expect("top 64 bits");
    (top as f64).ln() + shift as f64 * LN_2
}

/// Natural logarithm of a positive big rational.
pub fn ln_ratio(x: &BigRational) -> f64 {
    assert!(x.numer().sign() == Sign::Plus && x.denom().sign() == Sign::Plus);
    ln_bigint(x.numer()) - ln_bigint(x.denom())
}

fn ln_bigint(x: &BigInt) -> f64 {
    ln_biguint(x.magnitude())
}

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::Sum<f64> for KahanSum {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator of floats.
pub fn ksum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().sum::<KahanSum>().value()
}

/// `-t ln t` with the convention `0 ln 0 = 0`.
pub fn phi(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        -t * t.ln()
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and its derivative
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(16);
    let h = (b - a) / panels as f64;
    let mut acc = KahanSum::new();
    for i in 0..panels {
        let lo = a + i as f64 * h;
        let mid = lo + 0.5 * h;
        for (x, w) in nodes.iter().zip(&weights) {
            acc.add(0.5 * h * w * f(mid + 0.5 * h * x));
        }
    }
    acc.value()
}

/// `x` printed with `digits` significant digits, positional when the
/// exponent is moderate and scientific otherwise.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        sci
    }
}

/// `x` rounded to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.max(1) - 1, x).parse().unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn ln_of_powers_of_two() {
        let x = BigUint::one() << 4000u32;
        let got = ln_biguint(&x);
        assert!((got - 4000.0 * LN_2).abs() < 1e-9);
    }

    #[test]
    fn ln_matches_f64_for_small_values() {
        for v in [1u64, 2, 3, 1000, 123_456_789, u64::MAX] {
            let got = ln_biguint(&BigUint::from(v));
            assert!((got - (v as f64).ln()).abs() <= 1e-15 * (v as f64).ln().max(1.0));
        }
    }

    #[test]
    fn ln_of_large_product_is_additive() {
        let a = BigUint::from(3u32).pow(500);
        let b = BigUint::from(7u32).pow(300);
        let ab = &a * &b;
        let want = 500.0 * 3f64.ln() + 300.0 * 7f64.ln();
        assert!((ln_biguint(&ab) - want).abs() < 1e-12 * want);
    }

    #[test]
    fn quadrature_is_exact_for_polynomials() {
        let got = integrate(|x| x.powi(7) - 3.0 * x * x, 0.0, 2.0, 1);
        assert!((got - (32.0 - 8.0)).abs() < 1e-12);
        let got = integrate(|x| (-x).exp(), 0.0, 30.0, 20);
        assert!((got - (1.0 - (-30f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn kahan_recovers_small_terms() {
        let mut v = vec![1.0e16];
        v.extend(std::iter::repeat_n(1.0, 1000));
        v.push(-1.0e16);
        assert_eq!(ksum(v), 1000.0);
    }

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(0.5, 12), "0.500000000000");
        assert_eq!(format_sig(1.0 / 3.0, 12), "0.333333333333");
        assert_eq!(format_sig(-123456.789, 12), "-123456.789000");
        assert_eq!(format_sig(1.5e-9, 12), "1.50000000000e-9");
        assert_eq!(format_sig(0.0, 12), "0");
        assert_eq!(round_sig(2.0f64.sqrt(), 3), 1.41);
    }
}
