//! The R-matrix of `BG` and the edge kernel built from it.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::bernoulli::{big, bernoulli_poly, exp_series, to_f64};
use crate::orbifold::OrbifoldData;
use crate::series::TruncatedSeries;
use crate::{Error, C64};

/// `exp(sum_m (-1)^m / (m(m+1)) sum_i B_{m+1}(c_i(h)) (z/w_i)^m)`, exact, degrees `0..=k`.
pub fn e_series(data: &OrbifoldData, h: usize, k: usize) -> Vec<BigRational> {
    let c = data.elements[h].c;
    let mut a = vec![BigRational::zero(); k + 1];
    for (m, am) in a.iter_mut().enumerate().skip(1) {
        let mut s = BigRational::zero();
        for i in 0..3 {
            let winv = big(data.w[i]).recip();
            s += bernoulli_poly(m + 1, c[i]) * num_traits::pow(winv, m);
        }
        let sign = if m % 2 == 0 { 1 } else { -1 };
        *am = s * BigRational::new(BigInt::from(sign), BigInt::from(m * (m + 1)));
    }
    exp_series(&a, k + 1)
}

#[derive(Clone, Debug)]
pub struct RMatrix {
    pub order: usize,
    pub size: usize,
    c: Vec<C64>,
}

impl RMatrix {
    fn idx(&self, a: usize, b: usize, k: usize) -> usize {
        (a * self.size + b) * (self.order + 1) + k
    }

    /// `[z^k] R(z)^alpha_beta`.
    pub fn coeff(&self, alpha: usize, beta: usize, k: usize) -> C64 {
        assert!(k <= self.order, "R-matrix order {} < {k}", self.order);
        self.c[self.idx(alpha, beta, k)]
    }

    /// `[z^k] R(-z)^alpha_beta`.
    pub fn coeff_neg(&self, alpha: usize, beta: usize, k: usize) -> C64 {
        let c = self.coeff(alpha, beta, k);
        if k % 2 == 1 {
            -c
        } else {
            c
        }
    }

    pub fn entry(&self, alpha: usize, beta: usize) -> TruncatedSeries {
        let v: Vec<C64> = (0..=self.order).map(|k| self.coeff(alpha, beta, k)).collect();
        TruncatedSeries::univariate("z", &v, self.order as i32)
    }

    /// `max |sum_gamma R(z)^gamma_alpha R(-z)^gamma_beta - delta|` over all coefficients.
    pub fn symplectic_defect(&self) -> f64 {
        let n = self.size;
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for k in 0..=self.order {
                    let mut s = C64::default();
                    for g in 0..n {
                        for i in 0..=k {
                            s += self.coeff(g, a, i) * self.coeff_neg(g, b, k - i);
                        }
                    }
                    if k == 0 && a == b {
                        s -= 1.0;
                    }
                    worst = worst.max(s.norm());
                }
            }
        }
        worst
    }
}

pub fn r_matrix(data: &OrbifoldData, order: usize) -> RMatrix {
    let n = data.order;
    let es: Vec<Vec<f64>> = (0..n).map(|h| e_series(data, h, order).iter().map(to_f64).collect()).collect();
    let mut c = vec![C64::default(); n * n * (order + 1)];
    for a in 0..n {
        for b in 0..n {
            for (h, e) in es.iter().enumerate() {
                let ch = data.chi(a, h) * data.chi(b, data.inv(h)) / n as f64;
                for k in 0..=order {
                    c[(a * n + b) * (order + 1) + k] += ch * e[k];
                }
            }
        }
    }
    RMatrix { order, size: n, c }
}

/// `[z^k w^l] (delta - sum_gamma R(-z)^gamma_alpha R(-w)^gamma_beta) / (z + w)`.
#[derive(Clone, Debug)]
pub struct EdgeTable {
    pub kmax: usize,
    pub size: usize,
    c: Vec<C64>,
    /// Largest coefficient of the division remainder.
    pub remainder: f64,
}

impl EdgeTable {
    pub fn get(&self, alpha: usize, beta: usize, k: usize, l: usize) -> C64 {
        assert!(k <= self.kmax && l <= self.kmax, "edge table window {} too small for ({k},{l})", self.kmax);
        self.c[((alpha * self.size + beta) * (self.kmax + 1) + k) * (self.kmax + 1) + l]
    }
}

/// Divides `N(z, w) = sum N[a][b] z^a w^b` by `z + w`; returns the quotient for degrees
/// `<= kmax` in each variable and the largest remainder coefficient seen.
pub fn divide_by_sum(num: &dyn Fn(usize, usize) -> C64, kmax: usize) -> (Vec<Vec<C64>>, f64) {
    // Q[k][l] = sum_{i=0}^{l} (-1)^i N[k+1+i][l-i]
    let mut q = vec![vec![C64::default(); kmax + 1]; kmax + 1];
    for (k, row) in q.iter_mut().enumerate() {
        for (l, x) in row.iter_mut().enumerate() {
            let mut s = C64::default();
            for i in 0..=l {
                let t = num(k + 1 + i, l - i);
                s += if i % 2 == 0 { t } else { -t };
            }
            *x = s;
        }
    }
    // remainder: N[0][b] - Q[0][b-1] for b >= 1, and N[0][0]
    let mut rem = num(0, 0).norm();
    for b in 1..=kmax {
        rem = rem.max((num(0, b) - q[0][b - 1]).norm());
    }
    (q, rem)
}

pub fn edge_table(r: &RMatrix, kmax: usize) -> Result<EdgeTable, Error> {
    if r.order < 2 * kmax + 1 {
        return Err(Error::Window(format!("edge table up to {kmax} needs R order {}, have {}", 2 * kmax + 1, r.order)));
    }
    let n = r.size;
    let mut c = vec![C64::default(); n * n * (kmax + 1) * (kmax + 1)];
    let mut remainder: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let num = |i: usize, j: usize| -> C64 {
                let mut s = C64::default();
                if i == 0 && j == 0 && a == b {
                    s += 1.0;
                }
                for g in 0..n {
                    s -= r.coeff_neg(g, a, i) * r.coeff_neg(g, b, j);
                }
                s
            };
            let (q, rem) = divide_by_sum(&num, kmax);
            remainder = remainder.max(rem);
            for k in 0..=kmax {
                for l in 0..=kmax {
                    c[((a * n + b) * (kmax + 1) + k) * (kmax + 1) + l] = q[k][l];
                }
            }
        }
    }
    Ok(EdgeTable { kmax, size: n, c, remainder })
}
