//! Exact Bernoulli numbers and polynomials at rational points.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use once_cell::sync::Lazy;
use parking_lot::Mutex;

use crate::Q;

static NUMBERS: Lazy<Mutex<Vec<BigRational>>> = Lazy::new(|| Mutex::new(vec![BigRational::one()]));

pub fn big(q: Q) -> BigRational {
    BigRational::new(BigInt::from(*q.numer()), BigInt::from(*q.denom()))
}

pub fn binom(n: usize, k: usize) -> BigInt {
    let mut b = BigInt::one();
    for i in 0..k {
        b = b * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    b
}

/// `B_n` with `B_1 = -1/2`.
pub fn bernoulli_number(n: usize) -> BigRational {
    let mut tab = NUMBERS.lock();
    while tab.len() <= n {
        // sum_{k<=m} C(m+1,k) B_k = 0
        let m = tab.len();
        let mut s = BigRational::zero();
        for (k, b) in tab.iter().enumerate() {
            s += BigRational::from(binom(m + 1, k)) * b;
        }
        let b = -s / BigRational::from(BigInt::from(m + 1));
        tab.push(b);
    }
    tab[n].clone()
}

/// `B_n(x) = sum_k C(n,k) B_k x^{n-k}`.
pub fn bernoulli_poly(n: usize, x: Q) -> BigRational {
    let x = big(x);
    let mut s = BigRational::zero();
    let mut xp = BigRational::one();
    for k in (0..=n).rev() {
        s += BigRational::from(binom(n, k)) * bernoulli_number(k) * &xp;
        xp *= &x;
    }
    s
}

/// `exp` of a power series with zero constant term, first `n` coefficients.
pub fn exp_series(a: &[BigRational], n: usize) -> Vec<BigRational> {
    let mut e = vec![BigRational::one()];
    for k in 1..n {
        let mut s = BigRational::zero();
        for j in 1..=k.min(a.len().saturating_sub(1)) {
            s += BigRational::from(BigInt::from(j)) * &a[j] * &e[k - j];
        }
        e.push(s / BigRational::from(BigInt::from(k)));
    }
    e
}

pub fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap()
}
