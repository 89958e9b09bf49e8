//! Truncated power and Laurent series over `Complex64`.
//!
//! [`TruncatedSeries`] is the general sparse multivariate carrier. The hot loops of the
//! graph sums and of the residue recursion use the dense helpers in [`dense`] and the
//! precision-tracking [`Laurent`] type instead.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::{Error, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSeries {
    vars: Vec<String>,
    lo: Vec<i32>,
    hi: Vec<i32>,
    terms: BTreeMap<Vec<i32>, C64>,
}

impl TruncatedSeries {
    /// Zero series with per-variable exponent windows `lo[i] ..= hi[i]`.
    pub fn zero(vars: &[&str], lo: &[i32], hi: &[i32]) -> Self {
        assert!(vars.len() == lo.len() && vars.len() == hi.len());
        TruncatedSeries {
            vars: vars.iter().map(|s| s.to_string()).collect(),
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            terms: BTreeMap::new(),
        }
    }

    /// Univariate power series `sum c[i] x^i` truncated at degree `hi`.
    pub fn univariate(var: &str, coeffs: &[C64], hi: i32) -> Self {
        Self::laurent(var, 0, coeffs, hi)
    }

    /// Univariate Laurent series `sum c[i] x^{val+i}` with window `val ..= hi`.
    pub fn laurent(var: &str, val: i32, coeffs: &[C64], hi: i32) -> Self {
        let mut s = Self::zero(&[var], &[val.min(0)], &[hi]);
        for (i, c) in coeffs.iter().enumerate() {
            s.set(&[val + i as i32], *c);
        }
        s
    }

    pub fn constant_like(&self, c: C64) -> Self {
        let mut s = self.empty_like();
        s.set(&vec![0; self.vars.len()], c);
        s
    }

    pub fn variable(vars: &[&str], lo: &[i32], hi: &[i32], which: usize) -> Self {
        let mut s = Self::zero(vars, lo, hi);
        let mut e = vec![0; vars.len()];
        e[which] = 1;
        s.set(&e, ONE);
        s
    }

    fn empty_like(&self) -> Self {
        TruncatedSeries { vars: self.vars.clone(), lo: self.lo.clone(), hi: self.hi.clone(), terms: BTreeMap::new() }
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }
    pub fn window(&self) -> (&[i32], &[i32]) {
        (&self.lo, &self.hi)
    }
    pub fn terms(&self) -> impl Iterator<Item = (&Vec<i32>, &C64)> {
        self.terms.iter()
    }

    fn in_window(&self, e: &[i32]) -> bool {
        e.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (l, h))| x >= l && x <= h)
    }

    /// Sets a coefficient; exponents outside the window are silently dropped.
    pub fn set(&mut self, e: &[i32], c: C64) {
        if !self.in_window(e) {
            return;
        }
        if c == ZERO {
            self.terms.remove(e);
        } else {
            self.terms.insert(e.to_vec(), c);
        }
    }

    fn add_at(&mut self, e: Vec<i32>, c: C64) {
        if !self.in_window(&e) {
            return;
        }
        *self.terms.entry(e).or_insert(ZERO) += c;
    }

    pub fn coeff(&self, e: &[i32]) -> C64 {
        self.terms.get(e).copied().unwrap_or(ZERO)
    }

    fn check_vars(&self, o: &Self) -> Result<(), Error> {
        if self.vars != o.vars {
            return Err(Error::Window(format!("variable mismatch: {:?} vs {:?}", self.vars, o.vars)));
        }
        Ok(())
    }

    fn joined(&self, o: &Self, lo: Vec<i32>) -> Self {
        let hi = self.hi.iter().zip(&o.hi).map(|(a, b)| *a.min(b)).collect();
        TruncatedSeries { vars: self.vars.clone(), lo, hi, terms: BTreeMap::new() }
    }

    pub fn add(&self, o: &Self) -> Result<Self, Error> {
        self.check_vars(o)?;
        let lo = self.lo.iter().zip(&o.lo).map(|(a, b)| *a.min(b)).collect();
        let mut r = self.joined(o, lo);
        for (e, c) in self.terms.iter().chain(o.terms.iter()) {
            r.add_at(e.clone(), *c);
        }
        r.prune();
        Ok(r)
    }

    pub fn neg(&self) -> Self {
        self.scale(-ONE)
    }

    pub fn sub(&self, o: &Self) -> Result<Self, Error> {
        self.add(&o.neg())
    }

    pub fn scale(&self, k: C64) -> Self {
        let mut r = self.empty_like();
        for (e, c) in &self.terms {
            r.set(e, c * k);
        }
        r
    }

    pub fn mul(&self, o: &Self) -> Result<Self, Error> {
        self.check_vars(o)?;
        let lo = self.lo.iter().zip(&o.lo).map(|(a, b)| a + b).collect();
        let mut r = self.joined(o, lo);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e: Vec<i32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                r.add_at(e, c1 * c2);
            }
        }
        r.prune();
        Ok(r)
    }

    pub fn pow(&self, n: u32) -> Result<Self, Error> {
        let mut r = self.constant_like(ONE);
        for _ in 0..n {
            r = r.mul(self)?;
        }
        Ok(r)
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| *c != ZERO);
    }

    fn split_constant(&self) -> (C64, Self) {
        let zero = vec![0; self.vars.len()];
        let c = self.coeff(&zero);
        let mut rest = self.clone();
        rest.terms.remove(&zero);
        (c, rest)
    }

    fn nilpotency_bound(&self) -> usize {
        self.hi.iter().zip(&self.lo).map(|(h, l)| (h - l).max(0) as usize).sum::<usize>() + 2
    }

    /// `exp(s)`; a constant term is folded into a scalar factor.
    pub fn exp(&self) -> Result<Self, Error> {
        let (c, rest) = self.split_constant();
        let mut total = self.constant_like(ONE);
        let mut term = total.clone();
        for n in 1..=self.nilpotency_bound() {
            term = term.mul(&rest)?.scale(C64::new(1.0 / n as f64, 0.0));
            if term.terms.is_empty() {
                break;
            }
            total = total.add(&term)?;
        }
        Ok(total.scale(c.exp()))
    }

    /// Principal `log(s)`; the constant term must be nonzero.
    pub fn log(&self) -> Result<Self, Error> {
        let (c, rest) = self.split_constant();
        if c == ZERO {
            return Err(Error::Validation("log of a series with zero constant term".into()));
        }
        let u = rest.scale(c.inv());
        let mut total = self.constant_like(c.ln());
        let mut term = self.constant_like(ONE);
        for n in 1..=self.nilpotency_bound() {
            term = term.mul(&u)?;
            if term.terms.is_empty() {
                break;
            }
            let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
            total = total.add(&term.scale(C64::new(sign / n as f64, 0.0)))?;
        }
        Ok(total)
    }

    /// Substitutes `inner` for the single variable of `self`; the result lives in
    /// `inner`'s variables and window.
    pub fn compose(&self, inner: &Self) -> Result<Self, Error> {
        if self.vars.len() != 1 {
            return Err(Error::Validation("compose expects a univariate outer series".into()));
        }
        if inner.coeff(&vec![0; inner.vars.len()]) != ZERO {
            return Err(Error::Validation("compose requires an inner series without constant term".into()));
        }
        if self.terms.keys().any(|e| e[0] < 0) {
            return Err(Error::Validation("compose of a Laurent outer series".into()));
        }
        let mut r = inner.constant_like(ZERO);
        let mut p = inner.constant_like(ONE);
        let top = self.terms.keys().map(|e| e[0]).max().unwrap_or(0);
        for k in 0..=top {
            let a = self.coeff(&[k]);
            if a != ZERO {
                r = r.add(&p.scale(a))?;
            }
            p = p.mul(inner)?;
            if p.terms.is_empty() {
                break;
            }
        }
        Ok(r)
    }

    fn univariate_check(&self) -> Result<(), Error> {
        if self.vars.len() != 1 {
            return Err(Error::Validation("expected a univariate series".into()));
        }
        Ok(())
    }

    /// Coefficient of exponent `-1`.
    pub fn residue(&self) -> Result<C64, Error> {
        self.univariate_check()?;
        Ok(self.coeff(&[-1]))
    }

    pub fn to_dense(&self, n: usize) -> Vec<C64> {
        (0..n).map(|i| self.coeff(&[i as i32])).collect()
    }

    /// Compositional inverse of a univariate series with a simple zero at 0.
    pub fn invert(&self) -> Result<Self, Error> {
        self.univariate_check()?;
        if self.coeff(&[0]) != ZERO || self.terms.keys().any(|e| e[0] < 0) {
            return Err(Error::Validation("invert_series needs a series vanishing at the origin".into()));
        }
        if self.coeff(&[1]) == ZERO {
            return Err(Error::Validation("invert_series: vanishing linear coefficient".into()));
        }
        let n = self.hi[0].max(1) as usize + 1;
        let t = dense::revert(&self.to_dense(n), n);
        Ok(Self::univariate(&self.vars[0], &t, self.hi[0]))
    }

    /// Applies `x d/dx` in variable `var`.
    pub fn x_d_dx(&self, var: usize) -> Self {
        let mut r = self.empty_like();
        for (e, c) in &self.terms {
            r.set(e, c * e[var] as f64);
        }
        r
    }

    /// Inverse of `x d/dx`, applied `times` times; requires no terms with zero exponent in `var`.
    pub fn integrate_log(&self, var: usize, times: u32) -> Result<Self, Error> {
        if self.terms.keys().any(|e| e[var] == 0) {
            return Err(Error::Validation("integrate_log: nonzero constant term".into()));
        }
        let mut r = self.empty_like();
        for (e, c) in &self.terms {
            r.set(e, c / (e[var] as f64).powi(times as i32));
        }
        Ok(r)
    }

    pub fn derivative(&self, var: usize) -> Self {
        let mut r = self.empty_like();
        for (e, c) in &self.terms {
            if e[var] != 0 {
                let mut e2 = e.clone();
                e2[var] -= 1;
                r.set(&e2, c * e[var] as f64);
            }
        }
        r
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for (e, c) in &self.terms {
            m = m.max((c - o.coeff(e)).norm());
        }
        for (e, c) in &o.terms {
            if !self.terms.contains_key(e) {
                m = m.max(c.norm());
            }
        }
        m
    }

    /// Sorted `exponent-vector: re,im` lines.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (e, c) in &self.terms {
            let _ = writeln!(s, "{:?}: {:e},{:e}", e, c.re, c.im);
        }
        s
    }
}

/// Dense univariate truncated power series, index = degree.
pub mod dense {
    use super::{ONE, ZERO};
    use crate::C64;

    pub fn get(a: &[C64], i: usize) -> C64 {
        a.get(i).copied().unwrap_or(ZERO)
    }

    pub fn mul(a: &[C64], b: &[C64], n: usize) -> Vec<C64> {
        let mut r = vec![ZERO; n];
        for (i, x) in a.iter().enumerate().take(n) {
            if *x == ZERO {
                continue;
            }
            for (j, y) in b.iter().enumerate().take(n - i) {
                r[i + j] += x * y;
            }
        }
        r
    }

    pub fn add(a: &[C64], b: &[C64], n: usize) -> Vec<C64> {
        (0..n).map(|i| get(a, i) + get(b, i)).collect()
    }

    pub fn scale(a: &[C64], k: C64) -> Vec<C64> {
        a.iter().map(|x| x * k).collect()
    }

    pub fn inv(a: &[C64], n: usize) -> Vec<C64> {
        let a0 = a[0];
        assert!(a0 != ZERO, "inverse of a series with zero constant term");
        let mut r = vec![ZERO; n];
        r[0] = a0.inv();
        for k in 1..n {
            let mut s = ZERO;
            for j in 1..=k {
                s += get(a, j) * r[k - j];
            }
            r[k] = -s * r[0];
        }
        r
    }

    pub fn exp(a: &[C64], n: usize) -> Vec<C64> {
        let mut e = vec![ZERO; n];
        if n == 0 {
            return e;
        }
        e[0] = get(a, 0).exp();
        for k in 1..n {
            let mut s = ZERO;
            for j in 1..=k {
                s += get(a, j) * j as f64 * e[k - j];
            }
            e[k] = s / k as f64;
        }
        e
    }

    /// Principal logarithm.
    pub fn log(a: &[C64], n: usize) -> Vec<C64> {
        let a0 = a[0];
        let d: Vec<C64> = (1..n).map(|i| get(a, i) * i as f64).collect();
        let q = mul(&d, &inv(a, n), n.saturating_sub(1));
        let mut r = vec![ZERO; n];
        r[0] = a0.ln();
        for i in 1..n {
            r[i] = q[i - 1] / i as f64;
        }
        r
    }

    /// `a^p` with `a0^p` taken on the principal branch.
    pub fn powc(a: &[C64], p: C64, n: usize) -> Vec<C64> {
        let l = log(a, n);
        exp(&scale(&l, p), n)
    }

    pub fn pow_int(a: &[C64], k: usize, n: usize) -> Vec<C64> {
        let mut r = vec![ZERO; n];
        r[0] = ONE;
        for _ in 0..k {
            r = mul(&r, a, n);
        }
        r
    }

    pub fn deriv(a: &[C64]) -> Vec<C64> {
        (1..a.len()).map(|i| a[i] * i as f64).collect()
    }

    /// `outer(inner(x))`, inner without constant term.
    pub fn compose(outer: &[C64], inner: &[C64], n: usize) -> Vec<C64> {
        assert!(get(inner, 0) == ZERO);
        let mut r = vec![ZERO; n];
        for k in (0..outer.len()).rev() {
            r = mul(&r, inner, n);
            r[0] += outer[k];
        }
        r
    }

    /// Compositional inverse of `a` (a[0] = 0, a[1] != 0).
    pub fn revert(a: &[C64], n: usize) -> Vec<C64> {
        assert!(get(a, 0) == ZERO && get(a, 1) != ZERO);
        let a1inv = get(a, 1).inv();
        let mut t = vec![ZERO; n];
        if n > 1 {
            t[1] = a1inv;
        }
        // fixed point t = (x - sum_{k>=2} a_k t^k)/a1, one correct order per sweep
        for _ in 2..n {
            let mut higher = vec![ZERO; n];
            let mut tp = mul(&t, &t, n);
            for k in 2..a.len().min(n) {
                for i in 0..n {
                    higher[i] += a[k] * tp[i];
                }
                tp = mul(&tp, &t, n);
            }
            let mut nt = vec![ZERO; n];
            nt[1] = ONE;
            for i in 0..n {
                nt[i] = (nt[i] - higher[i]) * a1inv;
            }
            t = nt;
        }
        t
    }
}

/// Univariate Laurent series `sum_{i} c[i] z^{val+i}`, exact for exponents `< val + c.len()`.
#[derive(Clone, Debug, PartialEq)]
pub struct Laurent {
    pub val: i32,
    pub c: Vec<C64>,
}

impl Laurent {
    pub fn new(val: i32, c: Vec<C64>) -> Self {
        Laurent { val, c }
    }

    pub fn zero(val: i32, len: usize) -> Self {
        Laurent { val, c: vec![ZERO; len] }
    }

    /// First exponent not known.
    pub fn precision(&self) -> i32 {
        self.val + self.c.len() as i32
    }

    pub fn coeff(&self, e: i32) -> Result<C64, Error> {
        if e >= self.precision() {
            return Err(Error::Window(format!(
                "coefficient z^{e} requested beyond precision z^{}",
                self.precision()
            )));
        }
        if e < self.val {
            return Ok(ZERO);
        }
        Ok(self.c[(e - self.val) as usize])
    }

    pub fn mul(&self, o: &Laurent) -> Laurent {
        let n = self.c.len().min(o.c.len());
        Laurent { val: self.val + o.val, c: dense::mul(&self.c, &o.c, n) }
    }

    pub fn scale(&self, k: C64) -> Laurent {
        Laurent { val: self.val, c: dense::scale(&self.c, k) }
    }

    pub fn add(&self, o: &Laurent) -> Laurent {
        let val = self.val.min(o.val);
        let prec = self.precision().min(o.precision());
        let len = (prec - val).max(0) as usize;
        let mut c = vec![ZERO; len];
        for (i, x) in c.iter_mut().enumerate() {
            let e = val + i as i32;
            if e >= self.val && e < self.precision() {
                *x += self.c[(e - self.val) as usize];
            }
            if e >= o.val && e < o.precision() {
                *x += o.c[(e - o.val) as usize];
            }
        }
        Laurent { val, c }
    }

    /// `z -> -z`.
    pub fn reflect(&self) -> Laurent {
        let c = self
            .c
            .iter()
            .enumerate()
            .map(|(i, x)| if (self.val + i as i32).rem_euclid(2) == 1 { -x } else { *x })
            .collect();
        Laurent { val: self.val, c }
    }

    /// Multiplicative inverse; leading coefficient must be nonzero.
    pub fn inv(&self) -> Laurent {
        Laurent { val: -self.val, c: dense::inv(&self.c, self.c.len()) }
    }

    pub fn truncate(&self, len: usize) -> Laurent {
        Laurent { val: self.val, c: self.c[..len.min(self.c.len())].to_vec() }
    }

    pub fn residue(&self) -> Result<C64, Error> {
        self.coeff(-1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn exp_of_z() {
        let z = TruncatedSeries::univariate("z", &[ZERO, ONE], 3);
        let e = z.exp().unwrap();
        let want = [1.0, 1.0, 0.5, 1.0 / 6.0];
        for (i, w) in want.iter().enumerate() {
            assert!((e.coeff(&[i as i32]) - w).norm() < 1e-15);
        }
        assert_eq!(e.coeff(&[4]), ZERO);
    }

    #[test]
    fn geometric_times_one_minus() {
        let g = TruncatedSeries::univariate("z", &[ONE; 6], 5);
        let one_minus = TruncatedSeries::univariate("z", &[ONE, -ONE], 5);
        let p = g.mul(&one_minus).unwrap();
        assert!(p.max_abs_diff(&p.constant_like(ONE)) < 1e-15);
    }

    #[test]
    fn compose_log_against_convolution() {
        let outer = TruncatedSeries::univariate("w", &[ZERO, ONE, c(-0.5), c(1.0 / 3.0)], 3);
        let inner = TruncatedSeries::univariate("z", &[ZERO, ONE, ONE], 3);
        let r = outer.compose(&inner).unwrap();
        // brute-force convolution: (z+z^2) - (z+z^2)^2/2 + (z+z^2)^3/3
        let mut want = [0.0; 4];
        let p1 = [0.0, 1.0, 1.0, 0.0];
        let mut pk = [1.0, 0.0, 0.0, 0.0];
        for a in [1.0, -0.5, 1.0 / 3.0] {
            let mut nx = [0.0; 4];
            for i in 0..4 {
                for j in 0..4 - i {
                    nx[i + j] += pk[i] * p1[j];
                }
            }
            pk = nx;
            for i in 0..4 {
                want[i] += a * pk[i];
            }
        }
        for i in 0..4 {
            assert!((r.coeff(&[i as i32]) - want[i]).norm() < 1e-15);
        }
        assert!((r.coeff(&[2]) - 0.5).norm() < 1e-15);
        assert!((r.coeff(&[3]) + 2.0 / 3.0).norm() < 1e-15);
    }

    #[test]
    fn residues() {
        let s = TruncatedSeries::laurent("q", -1, &[ONE, c(3.0), ONE], 1);
        assert_eq!(s.residue().unwrap(), ONE);
        let s = TruncatedSeries::laurent("q", -2, &[c(5.0)], 1);
        assert_eq!(s.residue().unwrap(), ZERO);
        let z = TruncatedSeries::univariate("q", &[ZERO, ONE], 4);
        let inv_z = TruncatedSeries::laurent("q", -1, &[ONE], 4);
        let zexp = z.exp().unwrap();
        let zexp = TruncatedSeries::laurent("q", 0, &zexp.to_dense(5), 4);
        let l = TruncatedSeries { lo: vec![-1], ..zexp }.mul(&inv_z).unwrap();
        assert!((l.residue().unwrap() - ONE).norm() < 1e-15);
    }

    #[test]
    fn inversions() {
        let x = TruncatedSeries::univariate("t", &[ZERO, ONE], 6);
        assert!(x.invert().unwrap().max_abs_diff(&x) < 1e-15);
        let two = TruncatedSeries::univariate("t", &[ZERO, c(2.0)], 6);
        assert!((two.invert().unwrap().coeff(&[1]) - 0.5).norm() < 1e-15);
        let s = TruncatedSeries::univariate("t", &[ZERO, ONE, ONE], 8);
        let t = s.invert().unwrap();
        // Catalan-signed
        let want = [0.0, 1.0, -1.0, 2.0, -5.0, 14.0, -42.0, 132.0, -429.0];
        for (i, w) in want.iter().enumerate() {
            assert!((t.coeff(&[i as i32]) - w).norm() < 1e-12);
        }
        let back = s.compose(&t).unwrap();
        let xx = TruncatedSeries::univariate("t", &[ZERO, ONE], 8);
        assert!(back.max_abs_diff(&xx) < 1e-12);
        let flat = TruncatedSeries::univariate("t", &[ZERO, ZERO, ONE], 4);
        assert!(flat.invert().is_err());
    }

    #[test]
    fn integrate_log_examples() {
        let x2 = TruncatedSeries::univariate("X", &[ZERO, ZERO, ONE], 4);
        assert!((x2.integrate_log(0, 1).unwrap().coeff(&[2]) - 0.5).norm() < 1e-15);
        let x = TruncatedSeries::univariate("X", &[ZERO, ONE], 4);
        assert_eq!(x.integrate_log(0, 2).unwrap(), x);
        let bad = TruncatedSeries::univariate("X", &[ONE, ONE], 4);
        assert!(bad.integrate_log(0, 1).is_err());
        assert!(x.constant_like(ZERO).log().is_err());
    }

    #[test]
    fn multivariate_log_exp() {
        let vars = ["a", "b"];
        let mut s = TruncatedSeries::zero(&vars, &[0, 0], &[4, 4]);
        s.set(&[1, 0], c(0.3));
        s.set(&[0, 1], C64::new(0.1, -0.2));
        s.set(&[1, 1], c(0.7));
        let back = s.exp().unwrap().log().unwrap();
        assert!(back.max_abs_diff(&s) < 1e-14);
    }

    #[test]
    fn laurent_ops() {
        let a = Laurent::new(-2, vec![ONE, c(2.0), c(3.0), c(4.0)]);
        let b = Laurent::new(1, vec![ONE, ONE, ZERO, ZERO]);
        let p = a.mul(&b);
        assert_eq!(p.val, -1);
        assert_eq!(p.precision(), 3);
        assert_eq!(p.residue().unwrap(), ONE);
        assert_eq!(p.coeff(0).unwrap(), c(3.0));
        assert!(p.coeff(3).is_err());
        let r = a.reflect();
        assert_eq!(r.c, vec![ONE, c(-2.0), c(3.0), c(-4.0)]);
        let i = a.inv().mul(&a);
        assert!((i.coeff(0).unwrap() - 1.0).norm() < 1e-15);
        assert!(i.coeff(1).unwrap().norm() < 1e-15);
    }

    fn arb_series(n: usize) -> impl Strategy<Value = Vec<C64>> {
        prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0).prop_map(|(a, b)| C64::new(a, b)), n)
    }

    proptest! {
        #[test]
        fn ring_axioms(a in arb_series(6), b in arb_series(6), cc in arb_series(6)) {
            let s = |v: &Vec<C64>| TruncatedSeries::univariate("z", v, 5);
            let (a, b, cc) = (s(&a), s(&b), s(&cc));
            let l = a.mul(&b).unwrap().mul(&cc).unwrap();
            let r = a.mul(&b.mul(&cc).unwrap()).unwrap();
            prop_assert!(l.max_abs_diff(&r) < 1e-12);
            prop_assert!(a.mul(&b).unwrap().max_abs_diff(&b.mul(&a).unwrap()) < 1e-14);
            let d1 = a.mul(&b.add(&cc).unwrap()).unwrap();
            let d2 = a.mul(&b).unwrap().add(&a.mul(&cc).unwrap()).unwrap();
            prop_assert!(d1.max_abs_diff(&d2) < 1e-13);
            prop_assert!(a.add(&b).unwrap().max_abs_diff(&b.add(&a).unwrap()) < 1e-15);
        }

        #[test]
        fn exp_derivative(mut a in arb_series(7)) {
            a[0] = ZERO;
            let s = TruncatedSeries::univariate("z", &a, 6);
            let e = s.exp().unwrap();
            let lhs = e.derivative(0);
            let rhs = s.derivative(0).mul(&e).unwrap();
            for i in 0..5 {
                prop_assert!((lhs.coeff(&[i]) - rhs.coeff(&[i])).norm() < 1e-10 * (1.0 + lhs.coeff(&[i]).norm()));
            }
        }

        #[test]
        fn invert_round_trip(mut a in arb_series(9)) {
            a[0] = ZERO;
            a[1] = C64::new(1.0 + a[1].re.abs(), a[1].im);
            let s = TruncatedSeries::univariate("t", &a, 8);
            let t = s.invert().unwrap();
            let back = s.compose(&t).unwrap();
            let x = TruncatedSeries::univariate("t", &[ZERO, ONE], 8);
            let scale = t.terms().map(|(_, c)| c.norm()).fold(1.0, f64::max);
            prop_assert!(back.max_abs_diff(&x) < 1e-12 * scale.powi(2).max(1.0));
        }

        #[test]
        fn integrate_log_inverse(mut a in arb_series(6)) {
            a[0] = ZERO;
            let s = TruncatedSeries::univariate("X", &a, 5);
            let back = s.integrate_log(0, 1).unwrap().x_d_dx(0);
            prop_assert!(back.max_abs_diff(&s) < 1e-14);
        }

        #[test]
        fn dense_revert_matches_generic(mut a in arb_series(7)) {
            a[0] = ZERO;
            a[1] = ONE;
            let t = dense::revert(&a, 7);
            let back = dense::compose(&a, &t, 7);
            for (i, x) in back.iter().enumerate() {
                let want = if i == 1 { ONE } else { ZERO };
                prop_assert!((x - want).norm() < 1e-9);
            }
        }
    }
}
