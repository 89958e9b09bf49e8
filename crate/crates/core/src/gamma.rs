//! Gamma function: Lanczos at double precision, shifted Stirling on `dashu` floats for
//! extended precision, and reciprocal-Gamma zeros decided on exact rationals.

use num_traits::Zero;

use crate::bernoulli::bernoulli_number;

use crate::orbifold::q_f64;
use crate::{Error, Precision, Q};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
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

fn lanczos_ln_gamma_pos(x: f64) -> f64 {
    // x >= 0.5
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `ln |Gamma(x)|` and the sign of `Gamma(x)`; `x` must not be a non-positive integer.
pub fn ln_gamma_signed(x: f64) -> (f64, f64) {
    if x >= 0.5 {
        (lanczos_ln_gamma_pos(x), 1.0)
    } else {
        // reflection
        let s = (std::f64::consts::PI * x).sin();
        let (l, _) = ln_gamma_signed(1.0 - x);
        (std::f64::consts::PI.ln() - s.abs().ln() - l, s.signum())
    }
}

pub fn gamma(x: f64) -> f64 {
    if x <= 0.0 && x.fract() == 0.0 {
        return f64::NAN;
    }
    if x > 0.0 && x < 20.0 {
        // upward recurrence from (0,1] keeps small arguments accurate
        let mut y = x;
        let mut p = 1.0;
        while y > 2.0 {
            y -= 1.0;
            p *= y;
        }
        let (l, s) = ln_gamma_signed(y);
        return p * s * l.exp();
    }
    let (l, s) = ln_gamma_signed(x);
    s * l.exp()
}

pub fn is_nonpositive_integer(q: Q) -> bool {
    q.is_integer() && q <= Q::zero()
}

/// `1/Gamma(q)`, exactly zero at non-positive integers.
pub fn rgamma_q(q: Q) -> f64 {
    if is_nonpositive_integer(q) {
        0.0
    } else {
        1.0 / gamma(q_f64(q))
    }
}

/// `prod Gamma(num) / prod Gamma(den)` with reciprocal-Gamma semantics in the denominator.
pub fn gamma_ratio(num: &[Q], den: &[Q], prec: Precision) -> Result<f64, Error> {
    if let Some(q) = num.iter().find(|q| is_nonpositive_integer(**q)) {
        return Err(Error::Numeric(format!("Gamma pole at {q} in a numerator")));
    }
    if den.iter().any(|q| is_nonpositive_integer(*q)) {
        return Ok(0.0);
    }
    match prec {
        Precision::Double => {
            let small = num.iter().chain(den).all(|q| q_f64(*q).abs() < 60.0);
            if small {
                let mut r = 1.0;
                for q in num {
                    r *= gamma(q_f64(*q));
                }
                for q in den {
                    r /= gamma(q_f64(*q));
                }
                Ok(r)
            } else {
                let (mut l, mut s) = (0.0, 1.0);
                for q in num {
                    let (a, b) = ln_gamma_signed(q_f64(*q));
                    l += a;
                    s *= b;
                }
                for q in den {
                    let (a, b) = ln_gamma_signed(q_f64(*q));
                    l -= a;
                    s *= b;
                }
                Ok(s * l.exp())
            }
        }
        Precision::Extended => {
            let (mut l, mut s) = (ext::zero(), 1.0);
            for q in num {
                let (a, b) = ext::ln_gamma_q(*q);
                l = l + a;
                s *= b;
            }
            for q in den {
                let (a, b) = ext::ln_gamma_q(*q);
                l = l - a;
                s *= b;
            }
            Ok(s * ext::to_f64(&l.exp()))
        }
    }
}

/// Extended precision (256-bit significand) real arithmetic.
pub mod ext {
    use dashu_float::round::mode::HalfEven;
    use dashu_float::FBig;
    use once_cell::sync::Lazy;

    use super::*;

    pub type Big = FBig<HalfEven, 2>;
    pub const BITS: usize = 256;
    const SHIFT: i64 = 120;
    const TERMS: usize = 60;

    pub fn int(n: i64) -> Big {
        Big::from(n).with_precision(BITS).value()
    }

    pub fn zero() -> Big {
        int(0)
    }

    pub fn rat(q: Q) -> Big {
        int(*q.numer()) / int(*q.denom())
    }

    pub fn from_f64(x: f64) -> Big {
        Big::try_from(x).expect("finite").with_precision(BITS).value()
    }

    pub fn to_f64(x: &Big) -> f64 {
        x.to_f64().value()
    }

    fn atan_inv(n: i64) -> Big {
        // atan(1/n) = sum (-1)^k / ((2k+1) n^{2k+1})
        let n2 = int(n * n);
        let mut p = int(1) / int(n);
        let mut s = p.clone();
        let eps = int(1) / int(2).powi((BITS as i64 + 8).into());
        let mut k = 1i64;
        loop {
            p = p / n2.clone();
            let t = p.clone() / int(2 * k + 1);
            if t < eps {
                break;
            }
            if k % 2 == 1 {
                s = s - t;
            } else {
                s = s + t;
            }
            k += 1;
        }
        s
    }

    pub static PI: Lazy<Big> = Lazy::new(|| int(16) * atan_inv(5) - int(4) * atan_inv(239));
    static HALF_LN_2PI: Lazy<Big> = Lazy::new(|| (int(2) * PI.clone()).ln() / int(2));
    static STIRLING: Lazy<Vec<Big>> = Lazy::new(|| {
        (1..=TERMS)
            .map(|k| big_rational(&bernoulli_number(2 * k)) / int((2 * k * (2 * k - 1)) as i64))
            .collect()
    });

    fn big_int(n: &num_bigint::BigInt) -> Big {
        let (sign, digits) = n.to_u32_digits();
        let mut acc = int(0);
        let base = int(1i64 << 32);
        for d in digits.iter().rev() {
            acc = acc * base.clone() + int(*d as i64);
        }
        if sign == num_bigint::Sign::Minus {
            -acc
        } else {
            acc
        }
    }

    fn big_rational(b: &num_rational::BigRational) -> Big {
        big_int(b.numer()) / big_int(b.denom())
    }

    /// `ln|Gamma(x)|` and sign, `x` not a non-positive integer.
    pub fn ln_gamma(x: Big) -> (Big, f64) {
        // shift up: Gamma(x) = Gamma(x+n) / (x (x+1) ... (x+n-1))
        let mut prod = int(1);
        let mut z = x;
        let target = int(SHIFT);
        while z < target {
            prod = prod * z.clone();
            z = z + int(1);
        }
        let sign = if prod < zero() { -1.0 } else { 1.0 };
        let prod_abs = if sign < 0.0 { -prod } else { prod };
        let mut s = (z.clone() - int(1) / int(2)) * z.ln() - z.clone() + HALF_LN_2PI.clone();
        let z2 = z.clone() * z.clone();
        let mut zp = z.clone();
        for c in STIRLING.iter() {
            s = s + c.clone() / zp.clone();
            zp = zp * z2.clone();
        }
        (s - prod_abs.ln(), sign)
    }

    pub fn ln_gamma_q(q: Q) -> (Big, f64) {
        ln_gamma(rat(q))
    }
}

/// Stirling remainder check for `Gamma(w1 u + c1) Gamma(w2 u + c2) / Gamma(-w3 u + 1 - c3)`.
///
/// Returns, for each `u`, the deviation `|log(exact) - log(truncated)|` where the truncation
/// keeps the Bernoulli series through `u^{-M}`.
pub fn stirling_deviation(w: [Q; 3], c: [Q; 3], u: Q, order: usize) -> f64 {
    use ext::*;
    let arg = |i: usize| rat(w[i] * u + c[i]);
    let (l1, s1) = ln_gamma(arg(0));
    let (l2, s2) = ln_gamma(arg(1));
    let (l3, s3) = ln_gamma(rat(-w[2] * u + Q::from(1) - c[2]));
    assert!(s1 * s2 * s3 > 0.0);
    let exact = l1 + l2 - l3;
    // leading part: sum_i (w_i u + c_i - 1/2) log|w_i u| - w_i u  (with the w3 term sign-adjusted),
    // plus log(2 pi)/2, then Bernoulli corrections B_{m+1}(c_i)/(m(m+1)) (w_i u)^{-m}
    let mut approx = zero();
    let half = rat(Q::new(1, 2));
    for i in 0..3 {
        let wu = rat(w[i] * u);
        let awu = if w[i] < Q::zero() { -wu.clone() } else { wu.clone() };
        let ci = rat(c[i]);
        let lead = (wu.clone() + ci - half.clone()) * awu.ln() - wu;
        approx = approx + lead;
    }
    approx = approx + (int(2) * PI.clone()).ln() / int(2);
    for mm in 1..=order {
        for i in 0..3 {
            let b = crate::bernoulli::bernoulli_poly(mm + 1, c[i]);
            let coef = crate::bernoulli::to_f64(&b) / (mm * (mm + 1)) as f64;
            let wu = q_f64(w[i] * u);
            let sign = if mm % 2 == 1 { -1.0 } else { 1.0 };
            // exponent sum (-1)^{m+1} B_{m+1}(c)/(m(m+1)) (w u)^{-m}
            let t = -sign * coef / wu.powi(mm as i32);
            approx = approx + from_f64(t);
        }
    }
    let d = exact - approx;
    to_f64(&d).abs()
}
