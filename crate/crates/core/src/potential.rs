//! Coefficient tables of open-closed potentials.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::orbifold::{prime_to_psi, psi_to_prime};
use crate::series::TruncatedSeries;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    /// `1'_{k/m}` on each leg.
    Prime,
    /// `psi_l` on each leg.
    Psi,
}

/// `(tau multi-degree, [(winding d, class k)] per leg)`.
pub type CoeffKey = (Vec<u32>, Vec<(u32, u32)>);

/// Series in one leg variable `X` with values in `H^*(B mu_m)`: `c[class][d]` is the
/// coefficient of `X^d` on the class-`class` basis vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassSeries {
    pub m: usize,
    pub dmax: usize,
    pub c: Vec<Vec<C64>>,
}

impl ClassSeries {
    pub fn zero(m: usize, dmax: usize) -> Self {
        ClassSeries { m, dmax, c: vec![vec![C64::default(); dmax + 1]; m] }
    }

    pub fn get(&self, class: usize, d: usize) -> C64 {
        self.c[class][d]
    }

    pub fn add_scaled(&mut self, o: &ClassSeries, k: C64) {
        for (a, b) in self.c.iter_mut().zip(&o.c) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y * k;
            }
        }
    }

    pub fn scale(&self, k: C64) -> ClassSeries {
        let mut r = ClassSeries::zero(self.m, self.dmax);
        r.add_scaled(self, k);
        r
    }

    /// `(X d/dX)^a` for any integer `a`; negative powers need a vanishing constant term.
    pub fn euler_pow(&self, a: i32) -> ClassSeries {
        let mut r = self.clone();
        for row in r.c.iter_mut() {
            for (d, x) in row.iter_mut().enumerate() {
                if d == 0 {
                    assert!(a >= 0 || x.norm() == 0.0, "inverse Euler operator on a constant term");
                    if a > 0 {
                        *x = C64::default();
                    }
                } else {
                    *x *= (d as f64).powi(a);
                }
            }
        }
        r
    }

    /// Nonzero entries as `(class, d, value)`.
    pub fn entries(&self) -> Vec<(usize, usize, C64)> {
        let mut v = Vec::new();
        for (k, row) in self.c.iter().enumerate() {
            for (d, x) in row.iter().enumerate() {
                if x.norm() != 0.0 {
                    v.push((k, d, *x));
                }
            }
        }
        v
    }

    pub fn to_series(&self, class: usize) -> TruncatedSeries {
        TruncatedSeries::univariate("X", &self.c[class], self.dmax as i32)
    }

    /// Change of basis on every coefficient.
    pub fn to_prime(&self) -> ClassSeries {
        self.map_classes(|v| psi_to_prime(v, self.m).unwrap())
    }

    pub fn to_psi(&self) -> ClassSeries {
        self.map_classes(|v| prime_to_psi(v, self.m).unwrap())
    }

    fn map_classes(&self, f: impl Fn(&[C64]) -> Vec<C64>) -> ClassSeries {
        let mut r = ClassSeries::zero(self.m, self.dmax);
        for d in 0..=self.dmax {
            let v: Vec<C64> = (0..self.m).map(|k| self.c[k][d]).collect();
            for (k, x) in f(&v).into_iter().enumerate() {
                r.c[k][d] = x;
            }
        }
        r
    }

    pub fn max_abs_diff(&self, o: &ClassSeries) -> f64 {
        let mut w: f64 = 0.0;
        for (a, b) in self.c.iter().zip(&o.c) {
            for (x, y) in a.iter().zip(b) {
                w = w.max((x - y).norm());
            }
        }
        w
    }

    pub fn max_abs(&self) -> f64 {
        self.c.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PotentialSeries {
    pub g: u32,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub basis: Basis,
    pub coeffs: BTreeMap<CoeffKey, C64>,
    pub source: Vec<String>,
}

#[derive(Clone, Debug, Default)]
pub struct Comparison {
    pub max_rel: f64,
    pub max_abs: f64,
    pub compared: usize,
    pub worst: Option<CoeffKey>,
}

impl Comparison {
    pub fn passes(&self, rel_tol: f64) -> bool {
        self.max_rel <= rel_tol
    }
}

impl PotentialSeries {
    pub fn new(g: u32, n: usize, p: usize, m: usize, basis: Basis) -> Self {
        PotentialSeries { g, n, p, m, basis, coeffs: BTreeMap::new(), source: Vec::new() }
    }

    pub fn add(&mut self, key: CoeffKey, v: C64) {
        *self.coeffs.entry(key).or_insert(C64::new(0.0, 0.0)) += v;
    }

    pub fn get(&self, key: &CoeffKey) -> C64 {
        self.coeffs.get(key).copied().unwrap_or_default()
    }

    pub fn merge(&mut self, other: &PotentialSeries) {
        for (k, v) in &other.coeffs {
            self.add(k.clone(), *v);
        }
        self.source.extend(other.source.iter().cloned());
    }

    pub fn scale(&self, f: C64) -> PotentialSeries {
        let mut r = self.clone();
        for v in r.coeffs.values_mut() {
            *v *= f;
        }
        r
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn convert_leg(&self, leg: usize, to_psi: bool) -> BTreeMap<CoeffKey, C64> {
        let m = self.m;
        let mut groups: BTreeMap<CoeffKey, Vec<C64>> = BTreeMap::new();
        for ((tau, legs), v) in &self.coeffs {
            let mut base = legs.clone();
            let k = base[leg].1 as usize;
            base[leg].1 = 0;
            groups.entry((tau.clone(), base)).or_insert_with(|| vec![C64::default(); m])[k] += v;
        }
        let mut out = BTreeMap::new();
        for ((tau, base), vec) in groups {
            let conv = if to_psi { prime_to_psi(&vec, m) } else { psi_to_prime(&vec, m) }.unwrap();
            for (k, c) in conv.into_iter().enumerate() {
                if c.norm() > 0.0 {
                    let mut legs = base.clone();
                    legs[leg].1 = k as u32;
                    out.insert((tau.clone(), legs), c);
                }
            }
        }
        out
    }

    fn converted(&self, target: Basis) -> PotentialSeries {
        if self.basis == target {
            return self.clone();
        }
        let mut r = self.clone();
        for leg in 0..self.n {
            r.coeffs = r.convert_leg(leg, target == Basis::Psi);
        }
        r.basis = target;
        r
    }

    pub fn to_prime(&self) -> PotentialSeries {
        self.converted(Basis::Prime)
    }

    pub fn to_psi(&self) -> PotentialSeries {
        self.converted(Basis::Psi)
    }

    /// Drops coefficients below `tol * max|c|`.
    pub fn pruned(&self, tol: f64) -> PotentialSeries {
        let cut = tol * self.max_abs();
        let mut r = self.clone();
        r.coeffs.retain(|_, v| v.norm() > cut);
        r
    }

    /// Relative comparison of `self` against `factor * other`, both taken in the `1'` basis.
    /// Coefficients below `floor * scale` on both sides are ignored.
    pub fn compare(&self, other: &PotentialSeries, factor: C64, floor: f64) -> Comparison {
        let a = self.to_prime();
        let b = other.to_prime().scale(factor);
        let scale = a.max_abs().max(b.max_abs()).max(f64::MIN_POSITIVE);
        let mut keys: Vec<&CoeffKey> = a.coeffs.keys().chain(b.coeffs.keys()).collect();
        keys.sort();
        keys.dedup();
        let mut cmp = Comparison::default();
        for k in keys {
            let (x, y) = (a.get(k), b.get(k));
            let mag = x.norm().max(y.norm());
            if mag <= floor * scale {
                continue;
            }
            cmp.compared += 1;
            let d = (x - y).norm();
            let rel = d / mag;
            cmp.max_abs = cmp.max_abs.max(d);
            if rel > cmp.max_rel {
                cmp.max_rel = rel;
                cmp.worst = Some(k.clone());
            }
        }
        cmp
    }

    /// Largest deviation under simultaneous permutation of legs, relative to each
    /// coefficient but floored at `1e-6` of the largest one.
    pub fn symmetry_defect(&self) -> f64 {
        let floor = 1e-6 * self.max_abs();
        let mut worst: f64 = 0.0;
        for ((tau, legs), v) in &self.coeffs {
            for i in 0..legs.len() {
                for j in i + 1..legs.len() {
                    let mut sw = legs.clone();
                    sw.swap(i, j);
                    let w = self.get(&(tau.clone(), sw));
                    worst = worst.max((v - w).norm() / v.norm().max(w.norm()).max(floor).max(1e-300));
                }
            }
        }
        worst
    }
}
