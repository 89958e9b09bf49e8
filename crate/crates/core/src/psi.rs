//! Witten-Kontsevich intersection numbers `<tau_{k_1} ... tau_{k_n}>_g`.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use once_cell::sync::Lazy;
use parking_lot::RwLock;

use crate::Error;

type Key = (u32, Vec<u32>);

static MEMO: Lazy<RwLock<HashMap<Key, BigRational>>> = Lazy::new(|| RwLock::new(HashMap::new()));

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `(2n-1)!!` with `(-1)!! = 1`.
pub fn double_factorial_odd(n: i64) -> BigInt {
    let mut r = BigInt::one();
    let mut k = 2 * n - 1;
    while k > 1 {
        r *= k;
        k -= 2;
    }
    r
}

/// Exact `<prod tau_{k_i}>_g`; rejects unstable `(g, n)`.
pub fn psi_intersection(g: u32, ks: &[u32]) -> Result<BigRational, Error> {
    if 2 * g as i64 - 2 + ks.len() as i64 <= 0 {
        return Err(Error::Validation(format!("unstable moduli space: g={g}, n={}", ks.len())));
    }
    Ok(psi(g, ks))
}

pub fn psi_f64(g: u32, ks: &[u32]) -> f64 {
    psi(g, ks).to_f64().unwrap()
}

fn psi(g: u32, ks: &[u32]) -> BigRational {
    let n = ks.len() as i64;
    if 2 * g as i64 - 2 + n <= 0 {
        return BigRational::zero();
    }
    let dim = 3 * g as i64 - 3 + n;
    if ks.iter().map(|&k| k as i64).sum::<i64>() != dim {
        return BigRational::zero();
    }
    let mut sorted = ks.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let key = (g, sorted);
    if let Some(v) = MEMO.read().get(&key) {
        return v.clone();
    }
    let v = dvv(g, &key.1);
    MEMO.write().insert(key, v.clone());
    v
}

// ks sorted descending
fn dvv(g: u32, ks: &[u32]) -> BigRational {
    if ks[0] == 0 {
        // only <tau_0^3>_0 survives the dimension constraint
        return if g == 0 && ks.len() == 3 { BigRational::one() } else { BigRational::zero() };
    }
    if g == 1 && ks == [1] {
        return rat(1, 24);
    }
    let k = ks[0] as i64 - 1;
    let rest = &ks[1..];
    let df = |n: i64| BigRational::from(double_factorial_odd(n));
    let mut s = BigRational::zero();
    for (j, &kj) in rest.iter().enumerate() {
        let kj = kj as i64;
        let mut others: Vec<u32> = rest.to_vec();
        others[j] = (k + kj) as u32;
        let coef = BigRational::from(double_factorial_odd(k + kj + 1)) / df(kj);
        s += coef * psi(g, &others);
    }
    let half = rat(1, 2);
    for r in 0..k {
        let sidx = k - 1 - r;
        let coef = df(r + 1) * df(sidx + 1);
        if g >= 1 {
            let mut v = rest.to_vec();
            v.push(r as u32);
            v.push(sidx as u32);
            s += &half * &coef * psi(g - 1, &v);
        }
        // splittings of rest and genus
        let m = rest.len();
        for mask in 0u32..(1 << m) {
            let (mut a, mut b) = (vec![r as u32], vec![sidx as u32]);
            for (i, &x) in rest.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    a.push(x);
                } else {
                    b.push(x);
                }
            }
            for g1 in 0..=g {
                let (pa, pb) = (psi(g1, &a), psi(g - g1, &b));
                if !pa.is_zero() && !pb.is_zero() {
                    s += &half * &coef * pa * pb;
                }
            }
        }
    }
    s / df(k + 2)
}

/// Unmemoized oracle: string and dilaton equations whenever they apply, otherwise
/// DVV pivoting on the *first* positive entry in the given order.
pub fn psi_slow(g: u32, ks: &[u32]) -> BigRational {
    let n = ks.len() as i64;
    if 2 * g as i64 - 2 + n <= 0 {
        return BigRational::zero();
    }
    if ks.iter().map(|&k| k as i64).sum::<i64>() != 3 * g as i64 - 3 + n {
        return BigRational::zero();
    }
    if g == 0 && n == 3 {
        return BigRational::one();
    }
    if g == 1 && ks == [1] {
        return rat(1, 24);
    }
    if let Some(p) = ks.iter().position(|&k| k == 0) {
        let rest: Vec<u32> = ks.iter().enumerate().filter(|(i, _)| *i != p).map(|(_, &k)| k).collect();
        let mut s = BigRational::zero();
        for j in 0..rest.len() {
            if rest[j] > 0 {
                let mut v = rest.clone();
                v[j] -= 1;
                s += psi_slow(g, &v);
            }
        }
        return s;
    }
    if let Some(p) = ks.iter().position(|&k| k == 1) {
        let rest: Vec<u32> = ks.iter().enumerate().filter(|(i, _)| *i != p).map(|(_, &k)| k).collect();
        return BigRational::from(BigInt::from(2 * g as i64 - 2 + rest.len() as i64)) * psi_slow(g, &rest);
    }
    let p = ks.iter().position(|&k| k > 0).unwrap();
    let k = ks[p] as i64 - 1;
    let rest: Vec<u32> = ks.iter().enumerate().filter(|(i, _)| *i != p).map(|(_, &x)| x).collect();
    let df = |n: i64| BigRational::from(double_factorial_odd(n));
    let mut s = BigRational::zero();
    for j in 0..rest.len() {
        let mut v = rest.clone();
        let kj = v[j] as i64;
        v[j] = (k + kj) as u32;
        s += BigRational::from(double_factorial_odd(k + kj + 1)) / df(kj) * psi_slow(g, &v);
    }
    for r in 0..k {
        let t = k - 1 - r;
        let coef = df(r + 1) * df(t + 1) * rat(1, 2);
        if g >= 1 {
            let mut v = vec![r as u32, t as u32];
            v.extend(&rest);
            s += &coef * psi_slow(g - 1, &v);
        }
        for mask in 0u32..(1 << rest.len()) {
            let (mut a, mut b) = (vec![r as u32], vec![t as u32]);
            for (i, &x) in rest.iter().enumerate() {
                if mask & (1 << i) != 0 { a.push(x) } else { b.push(x) }
            }
            for g1 in 0..=g {
                s += &coef * psi_slow(g1, &a) * psi_slow(g - g1, &b);
            }
        }
    }
    s / df(k + 2)
}
