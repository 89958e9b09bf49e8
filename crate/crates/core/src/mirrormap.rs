//! Closed-form hypergeometric mirror map `tau_a(q)` and its inverse.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::gamma::gamma_ratio;
use crate::orbifold::{frac, OrbifoldData};
use crate::series::TruncatedSeries;
use crate::{Error, Precision, Q, C64};

/// Multivariate polynomial in `p` variables, keyed by exponent vectors.
pub type Poly = BTreeMap<Vec<u32>, f64>;

#[derive(Clone, Debug)]
pub struct MirrorMapSeries {
    pub p: usize,
    /// Total degree kept in every component.
    pub degree: u32,
    /// Exact coefficients of `tau_a(q)`, exponents include the leading `q_a`.
    pub exact: Vec<BTreeMap<Vec<u32>, BigRational>>,
    pub tau: Vec<Poly>,
    /// `q_a(tau)`.
    pub inverse: Vec<Poly>,
}

fn big(q: Q) -> BigRational {
    BigRational::new(BigInt::from(*q.numer()), BigInt::from(*q.denom()))
}

fn big_to_f64(q: &BigRational) -> f64 {
    q.numer().to_f64().unwrap() / q.denom().to_f64().unwrap()
}

/// Multi-indices `d` with `|d| <= maxdeg`, in lexicographic order.
fn multi_indices(p: usize, maxdeg: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; p];
    fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur[i] = k;
            rec(i + 1, left - k, cur, out);
        }
        cur[i] = 0;
    }
    rec(0, maxdeg, &mut cur, &mut out);
    out
}

/// `d` satisfies the constraint iff `prod h_b^{d_b}` is the identity.
fn filtered(data: &OrbifoldData, maxdeg: u32) -> Vec<Vec<u32>> {
    let gens: Vec<usize> = data.age1.iter().map(|a| a.elem).collect();
    let mul = |x: usize, y: usize| {
        let (a, b) = (data.elements[x].c, data.elements[y].c);
        data.element_by_turns([a[0] + b[0], a[1] + b[1], a[2] + b[2]]).expect("G is closed")
    };
    multi_indices(gens.len(), maxdeg)
        .into_iter()
        .filter(|d| {
            let mut h = data.identity();
            for (b, &k) in d.iter().enumerate() {
                for _ in 0..k {
                    h = mul(h, gens[b]);
                }
            }
            h == data.identity()
        })
        .collect()
}

/// Same set by testing `{sum_b d_b c_i(h_b)} = 0` directly.
pub fn brute_force_indices(data: &OrbifoldData, maxdeg: u32) -> Vec<Vec<u32>> {
    multi_indices(data.p, maxdeg)
        .into_iter()
        .filter(|d| {
            (0..3).all(|i| {
                let s: Q = d.iter().zip(&data.age1).map(|(&k, a)| data.elements[a.elem].c[i] * k as i64).sum();
                frac(s).is_zero()
            })
        })
        .collect()
}

pub fn constraint_indices(data: &OrbifoldData, maxdeg: u32) -> Vec<Vec<u32>> {
    filtered(data, maxdeg)
}

/// `prod_i Gamma(1 - {c_i(h_a)}) / Gamma(1 - c_i(h_a) - sum_b d_b c_i(h_b)) / prod d_b!`, exactly.
///
/// With `N = sum_b d_b c_i(h_b)` an integer the Gamma ratio is the finite product
/// `prod_{k=1}^{N} (1 - c - k)`; `N < 0` does not occur since all `c_i >= 0`.
pub fn coefficient(data: &OrbifoldData, a: usize, d: &[u32]) -> BigRational {
    let ca = data.elements[data.age1[a].elem].c;
    let mut r = BigRational::one();
    for i in 0..3 {
        let n: Q = d.iter().zip(&data.age1).map(|(&k, b)| data.elements[b.elem].c[i] * k as i64).sum();
        debug_assert!(n.is_integer());
        let n = n.to_integer();
        let c = big(ca[i]);
        for k in 1..=n {
            r *= BigRational::one() - &c - BigRational::from_integer(BigInt::from(k));
        }
    }
    for &k in d {
        for j in 2..=k {
            r /= BigRational::from_integer(BigInt::from(j));
        }
    }
    r
}

/// The same coefficient through reciprocal-Gamma ratios.
pub fn coefficient_gamma(data: &OrbifoldData, a: usize, d: &[u32], prec: Precision) -> Result<f64, Error> {
    let ca = data.elements[data.age1[a].elem].c;
    let mut num = Vec::new();
    let mut den = Vec::new();
    for i in 0..3 {
        let n: Q = d.iter().zip(&data.age1).map(|(&k, b)| data.elements[b.elem].c[i] * k as i64).sum();
        num.push(Q::from(1) - frac(ca[i]));
        den.push(Q::from(1) - ca[i] - n);
    }
    for &k in d {
        den.push(Q::from(k as i64 + 1));
    }
    gamma_ratio(&num, &den, prec)
}

fn poly_mul(a: &Poly, b: &Poly, maxdeg: u32) -> Poly {
    let mut o = Poly::new();
    for (ea, ca) in a {
        let da: u32 = ea.iter().sum();
        for (eb, cb) in b {
            if da + eb.iter().sum::<u32>() > maxdeg {
                continue;
            }
            let e: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            *o.entry(e).or_insert(0.0) += ca * cb;
        }
    }
    o
}

/// `f(g_1, ..., g_p)` truncated at total degree `maxdeg`; `g_b` without constant terms.
pub fn compose(f: &Poly, g: &[Poly], maxdeg: u32) -> Poly {
    let p = g.len();
    // powers[b][k] = g_b^k
    let mut powers: Vec<Vec<Poly>> = Vec::with_capacity(p);
    for gb in g {
        let mut v = vec![Poly::from([(vec![0; p], 1.0)])];
        for k in 1..=maxdeg as usize {
            let next = poly_mul(&v[k - 1], gb, maxdeg);
            v.push(next);
        }
        powers.push(v);
    }
    let mut out = Poly::new();
    for (e, c) in f {
        let mut t = Poly::from([(vec![0; p], *c)]);
        for (b, &k) in e.iter().enumerate() {
            t = poly_mul(&t, &powers[b][k as usize], maxdeg);
        }
        for (k, v) in t {
            *out.entry(k).or_insert(0.0) += v;
        }
    }
    out.retain(|_, v| *v != 0.0);
    out
}

/// `tau_a(q)` through total degree `degree`, and `q_a(tau)` by reversion.
pub fn mirror_map_series(data: &OrbifoldData, degree: u32) -> Result<MirrorMapSeries, Error> {
    if degree < 1 {
        return Err(Error::Validation("mirror map degree must be >= 1".into()));
    }
    let p = data.p;
    let idx = filtered(data, degree - 1);
    let mut exact = Vec::with_capacity(p);
    let mut tau = Vec::with_capacity(p);
    for a in 0..p {
        let mut ex = BTreeMap::new();
        let mut fl = Poly::new();
        for d in &idx {
            let c = coefficient(data, a, d);
            if c.is_zero() {
                continue;
            }
            let mut e = d.clone();
            e[a] += 1;
            fl.insert(e.clone(), big_to_f64(&c));
            ex.insert(e, c);
        }
        exact.push(ex);
        tau.push(fl);
    }
    let inverse = revert(&tau, p, degree);
    Ok(MirrorMapSeries { p, degree, exact, tau, inverse })
}

/// Inverse of a map `q -> q + O(q^2)` by fixed-point iteration `q = tau - N(q)`.
fn revert(tau: &[Poly], p: usize, degree: u32) -> Vec<Poly> {
    let unit = |a: usize| {
        let mut e = vec![0; p];
        e[a] = 1;
        e
    };
    let nonlinear: Vec<Poly> = tau
        .iter()
        .map(|t| t.iter().filter(|(e, _)| e.iter().sum::<u32>() > 1).map(|(e, c)| (e.clone(), *c)).collect())
        .collect();
    let mut q: Vec<Poly> = (0..p).map(|a| Poly::from([(unit(a), 1.0)])).collect();
    for _ in 1..degree {
        q = (0..p)
            .map(|a| {
                let mut r = Poly::from([(unit(a), 1.0)]);
                for (e, c) in compose(&nonlinear[a], &q, degree) {
                    *r.entry(e).or_insert(0.0) -= c;
                }
                r.retain(|_, v| *v != 0.0);
                r
            })
            .collect();
    }
    q
}

impl MirrorMapSeries {
    /// `max_a |tau_a(q(tau)) - tau_a|` over coefficients.
    pub fn round_trip_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for a in 0..self.p {
            let mut r = compose(&self.tau[a], &self.inverse, self.degree);
            let mut e = vec![0; self.p];
            e[a] = 1;
            *r.entry(e).or_insert(0.0) -= 1.0;
            worst = r.values().map(|v| v.abs()).fold(worst, f64::max);
        }
        worst
    }

    fn to_truncated(&self, poly: &Poly, prefix: &str) -> TruncatedSeries {
        let names: Vec<String> = (1..=self.p).map(|b| format!("{prefix}{b}")).collect();
        let vars: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let mut s = TruncatedSeries::zero(&vars, &vec![0; self.p], &vec![self.degree as i32; self.p]);
        for (e, c) in poly {
            let e: Vec<i32> = e.iter().map(|&x| x as i32).collect();
            s.set(&e, C64::new(*c, 0.0));
        }
        s
    }

    pub fn tau_series(&self, a: usize) -> TruncatedSeries {
        self.to_truncated(&self.tau[a], "q")
    }

    pub fn inverse_series(&self, a: usize) -> TruncatedSeries {
        self.to_truncated(&self.inverse[a], "tau")
    }
}
