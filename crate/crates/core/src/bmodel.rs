//! B-model side at `q = 0`: the Laplace matrix `f`, `h-check`, the double Laplace kernel,
//! the `xi` expansions at the punctures, oscillatory integrals, and the graph sum with
//! B-model weights.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::amodel::rmatrix::divide_by_sum;
use crate::amodel::{assemble, graph_sum, DecoratedGraph, Leaves, Windows};
use crate::bernoulli::{big, bernoulli_number, bernoulli_poly, exp_series, to_f64};
use crate::gamma::{ext, gamma_ratio, is_nonpositive_integer};
use crate::orbifold::{q_f64, OrbifoldData};
use crate::potential::{Basis, ClassSeries, CoeffKey, PotentialSeries};
use crate::series::TruncatedSeries;
use crate::{Error, Precision, Q, C64};

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `sqrt(-2)` on the branch `i sqrt 2`.
pub fn sqrt_m2() -> C64 {
    I * 2f64.sqrt()
}

/// Exponent `sum_m (-1)^{m+1}/(m(m+1)) sum_i B_{m+1}(c_i) w_i^{-m} u^{-m}`, exact.
fn exponent(w: [Q; 3], c: [Q; 3], k: usize) -> Vec<BigRational> {
    let mut a = vec![BigRational::zero(); k + 1];
    for (m, am) in a.iter_mut().enumerate().skip(1) {
        let mut s = BigRational::zero();
        for i in 0..3 {
            s += bernoulli_poly(m + 1, c[i]) * num_traits::pow(big(w[i]).recip(), m);
        }
        let sign = if m % 2 == 1 { 1 } else { -1 };
        *am = s / BigRational::from(BigInt::from(sign * (m * (m + 1)) as i64));
    }
    a
}

/// `f^alpha_beta(u, 0)` as series in `u^{-1}`.
#[derive(Clone, Debug)]
pub struct FMatrix {
    pub order: usize,
    pub size: usize,
    c: Vec<C64>,
}

impl FMatrix {
    /// `[u^{-k}] f^alpha_beta`.
    pub fn coeff(&self, alpha: usize, beta: usize, k: usize) -> C64 {
        assert!(k <= self.order, "f-matrix order {} < {k}", self.order);
        self.c[(alpha * self.size + beta) * (self.order + 1) + k]
    }

    /// The entry as a series in `v = 1/u`.
    pub fn entry(&self, alpha: usize, beta: usize) -> TruncatedSeries {
        let v: Vec<C64> = (0..=self.order).map(|k| self.coeff(alpha, beta, k)).collect();
        TruncatedSeries::univariate("1/u", &v, self.order as i32)
    }
}

pub fn f_matrix(data: &OrbifoldData, order: usize) -> FMatrix {
    let n = data.order;
    let es: Vec<Vec<f64>> = (0..n)
        .map(|h| exp_series(&exponent(data.w, data.elements[h].c, order), order + 1).iter().map(to_f64).collect())
        .collect();
    let mut c = vec![C64::default(); n * n * (order + 1)];
    for a in 0..n {
        for b in 0..n {
            for (h, e) in es.iter().enumerate() {
                let ch = data.chi(a, h) * data.chi(b, data.inv(h)) / n as f64;
                for (k, x) in e.iter().enumerate() {
                    c[(a * n + b) * (order + 1) + k] += ch * x;
                }
            }
        }
    }
    FMatrix { order, size: n, c }
}

/// `h^beta_1(0) = (1/|G|) sqrt(-2/(w1 w2 w3))`, real and positive.
pub fn h1(data: &OrbifoldData) -> f64 {
    let w = data.w_f64();
    (2.0 / (w[0] * w[1] * w[2]).abs()).sqrt() / data.order as f64
}

/// Closed form of `h-check^alpha(u, 0)`, coefficients of `u^0 ..= u^{-k}`.
pub fn h_check_series(data: &OrbifoldData, _alpha: usize, k: usize) -> Vec<C64> {
    let mut a = vec![BigRational::zero(); k + 1];
    for (m, am) in a.iter_mut().enumerate().skip(1) {
        let mut s = BigRational::zero();
        for i in 0..3 {
            s += bernoulli_number(m + 1) * num_traits::pow(big(data.w[i]).recip(), m);
        }
        let sign = if m % 2 == 1 { 1 } else { -1 };
        *am = s / BigRational::from(BigInt::from(sign * (m * (m + 1)) as i64));
    }
    let h = h1(data);
    exp_series(&a, k + 1).iter().map(|x| C64::new(h * to_f64(x), 0.0)).collect()
}

/// `sum_beta f^alpha_beta(u, 0) h^beta_1(0)`.
pub fn h_check_from_f(f: &FMatrix, data: &OrbifoldData, alpha: usize) -> Vec<C64> {
    let h = h1(data);
    (0..=f.order).map(|k| (0..f.size).map(|b| f.coeff(alpha, b, k)).sum::<C64>() * h).collect()
}

/// `[u^{-k} v^{-l}]` of `uv/(u+v) (delta - sum_gamma f^alpha_gamma(u) f^beta_gamma(v))`.
#[derive(Clone, Debug)]
pub struct BCheck {
    pub kmax: usize,
    pub size: usize,
    c: Vec<C64>,
    pub remainder: f64,
}

impl BCheck {
    pub fn get(&self, alpha: usize, beta: usize, k: usize, l: usize) -> C64 {
        assert!(k <= self.kmax && l <= self.kmax, "B-check window {} too small for ({k},{l})", self.kmax);
        self.c[((alpha * self.size + beta) * (self.kmax + 1) + k) * (self.kmax + 1) + l]
    }
}

pub fn b_check_table(f: &FMatrix, kmax: usize) -> Result<BCheck, Error> {
    if f.order < 2 * kmax + 1 {
        return Err(Error::Window(format!("B-check up to {kmax} needs f order {}, have {}", 2 * kmax + 1, f.order)));
    }
    let n = f.size;
    let mut c = vec![C64::default(); n * n * (kmax + 1) * (kmax + 1)];
    let mut remainder: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            // in s = 1/u, t = 1/v the prefactor is 1/(s + t)
            let num = |i: usize, j: usize| -> C64 {
                let mut s: C64 = (0..n).map(|g| -f.coeff(a, g, i) * f.coeff(b, g, j)).sum();
                if i == 0 && j == 0 && a == b {
                    s += 1.0;
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
    Ok(BCheck { kmax, size: n, c, remainder })
}

pub fn b_check(data: &OrbifoldData, alpha: usize, beta: usize, k: usize, l: usize) -> Result<C64, Error> {
    let kk = k.max(l);
    let t = b_check_table(&f_matrix(data, 2 * kk + 1), kk)?;
    Ok(t.get(alpha, beta, k, l))
}

/// `lim_{q->0} xi^beta_0` with rows indexed by the puncture label `l` (the `psi_l`
/// components), windings `1..=dmax`.
pub fn xi_series(data: &OrbifoldData, beta: usize, dmax: usize, prec: Precision) -> Result<ClassSeries, Error> {
    let m = data.m();
    let mu = m as usize;
    let mut s = ClassSeries::zero(mu, dmax);
    let w = data.w;
    for d0 in 1..=dmax as i64 {
        for k in 0..m {
            let h = data.element_of_winding(d0, k)?;
            let c = data.elements[h].c;
            let age = data.age(h);
            let g = gamma_ratio(&[(w[0] + w[1]) * d0 + c[2]], &[w[0] * d0 - c[0] + 1, w[1] * d0 - c[1] + 1], prec)?;
            let phase = C64::from_polar(1.0, -std::f64::consts::PI * q_f64(w[2] * d0 - c[2]));
            let wp: C64 = (0..3).map(|i| data.w_pow(i, 0.5 - q_f64(c[i]))).product();
            let t = sqrt_m2() * phase * data.chi(beta, data.inv(h)) / m as f64
                * (d0 as f64).powi(1 - age as i32)
                * wp
                * g;
            for (l, row) in s.c.iter_mut().enumerate() {
                let e = crate::orbifold::turn_to_complex(Q::new(-k * (l as i64 + 1), m));
                row[d0 as usize] += t * e;
            }
        }
    }
    let _ = mu;
    Ok(s)
}

/// The `psi_l` component of [`xi_series`].
pub fn xi_expansion(data: &OrbifoldData, beta: usize, l: usize, dmax: usize) -> Result<TruncatedSeries, Error> {
    if l >= data.m() as usize {
        return Err(Error::Validation(format!("puncture label {l} out of range")));
    }
    Ok(xi_series(data, beta, dmax, Precision::Double)?.to_series(l))
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct CriticalPoint {
    pub alpha: usize,
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub a: (f64, f64),
    pub b: (f64, f64),
    pub theta: f64,
    pub phi: f64,
}

impl CriticalPoint {
    pub fn x_c(&self) -> C64 {
        C64::new(self.x.0, self.x.1)
    }
    pub fn y_c(&self) -> C64 {
        C64::new(self.y.0, self.y.1)
    }
}

fn angle(t: Q) -> f64 {
    2.0 * std::f64::consts::PI * q_f64(crate::orbifold::frac(t))
}

/// Critical points of `X` on the `q = 0` mirror curve. `Y_alpha = exp(-b_alpha)`, which
/// fixes `(w2/w3)^{1/m}` on the branch `|w2/w3|^{1/m} e^{-i pi/m}`.
pub fn critical_points(data: &OrbifoldData) -> Vec<CriticalPoint> {
    let w = data.w_f64();
    let m = data.m();
    let e1 = data.eta1();
    let e2 = data.eta2();
    let mut logw = C64::default();
    for (i, wi) in w.iter().enumerate() {
        let l = C64::new(wi.abs().ln(), if *wi < 0.0 { std::f64::consts::PI } else { 0.0 });
        logw += l * w[i];
    }
    (0..data.order)
        .map(|al| {
            let theta = angle(data.char_turn(al, e1));
            let phi = angle(data.char_turn(al, e2));
            let a = -logw - I * theta;
            let lw = C64::new((w[2] / w[1]).abs().ln(), std::f64::consts::PI);
            let b = lw / m as f64 - I * phi;
            let x = (-a).exp();
            let y = (-b).exp();
            CriticalPoint { alpha: al, x: (x.re, x.im), y: (y.re, y.im), a: (a.re, a.im), b: (b.re, b.im), theta, phi }
        })
        .collect()
}

/// `chi_alpha(eta1) prod (|G| w_i)^{w_i}` with `w3` on the fixed branch.
pub fn critical_x_closed(data: &OrbifoldData, alpha: usize) -> C64 {
    let n = data.order as f64;
    let w = data.w_f64();
    let mut x = data.chi(alpha, data.eta1());
    for wi in w {
        let mag = (n * wi).abs().powf(wi);
        x *= if wi < 0.0 { C64::from_polar(mag, std::f64::consts::PI * wi) } else { C64::new(mag, 0.0) };
    }
    x
}

/// Value of `lim_{q->0} int_{gamma_alpha} e^{-ux} nabla_h Phi` at real `u`.
pub fn oscillatory_nabla(data: &OrbifoldData, alpha: usize, h: usize, u: Q) -> Result<C64, Error> {
    let c = data.elements[h].c;
    let cps = critical_points(data);
    let theta = cps[alpha].theta;
    let g = gamma_value(data.w, c, u)?;
    let age = data.age(h);
    let sign = if age % 2 == 0 { 1.0 } else { -1.0 };
    let ph = C64::from_polar(1.0, (theta + std::f64::consts::PI * q_f64(data.w[2])) * q_f64(u) + std::f64::consts::PI * q_f64(c[2]));
    Ok(ph * data.chi(alpha, h) * sign * g / data.order as f64)
}

fn gamma_value(w: [Q; 3], c: [Q; 3], u: Q) -> Result<f64, Error> {
    let num = [w[0] * u + c[0], w[1] * u + c[1]];
    if num.iter().any(|q| is_nonpositive_integer(*q)) {
        return Err(Error::Numeric(format!("Gamma pole at u = {u}")));
    }
    gamma_ratio(&num, &[-w[2] * u - c[2] + 1], Precision::Extended)
}

/// Coefficients of `int_{gamma_alpha} e^{-ux} Phi` in `q` through total degree `qdeg`,
/// keyed by the multi-degree `(r_1, ..., r_p)`.
pub fn oscillatory_phi(data: &OrbifoldData, alpha: usize, u: Q, qdeg: u32) -> Result<BTreeMap<Vec<u32>, C64>, Error> {
    let p = data.p;
    let theta = critical_points(data)[alpha].theta;
    let pre = C64::from_polar(1.0 / data.order as f64, (theta + std::f64::consts::PI * q_f64(data.w[2])) * q_f64(u));
    let mut out = BTreeMap::new();
    let mut r = vec![0u32; p];
    loop {
        let tot: u32 = r.iter().sum();
        if tot <= qdeg {
            let mut c = [Q::from(0); 3];
            let mut fact = 1.0;
            let mut chi_turn = Q::from(0);
            for (a, ag) in data.age1.iter().enumerate() {
                let ca = data.elements[ag.elem].c;
                for i in 0..3 {
                    c[i] += ca[i] * r[a] as i64;
                }
                chi_turn += data.char_turn(alpha, ag.elem) * r[a] as i64;
                for j in 1..=r[a] {
                    fact *= j as f64;
                }
            }
            let sign = if tot % 2 == 0 { 1.0 } else { -1.0 };
            let g = gamma_value(data.w, c, u)?;
            let ph = C64::from_polar(1.0, std::f64::consts::PI * q_f64(c[2])) * crate::orbifold::turn_to_complex(chi_turn);
            out.insert(r.clone(), pre * ph * sign / fact * g);
        }
        // next multi-index
        let mut i = 0;
        loop {
            if i == p {
                return Ok(out);
            }
            r[i] += 1;
            if r.iter().sum::<u32>() <= qdeg {
                break;
            }
            r[i] = 0;
            i += 1;
        }
    }
}

/// `f^alpha_beta(u, 0)` rebuilt from the oscillatory integrals at real `u`.
pub fn f_from_oscillatory(data: &OrbifoldData, alpha: usize, beta: usize, u: Q) -> Result<C64, Error> {
    use ext::*;
    let theta = critical_points(data)[alpha].theta;
    let uf = q_f64(u);
    // real part of sum w_i log w_i at extended precision, times u
    let mut wl = zero();
    for wi in data.w {
        let a = if wi < Q::from(0) { -wi } else { wi };
        wl = wl + rat(wi) * rat(a).ln();
    }
    let wl_u = to_f64(&(wl * rat(u)));
    let mut s = C64::default();
    for h in 0..data.order {
        let c = data.elements[h].c;
        let age = data.age(h);
        let sign = if age % 2 == 0 { 1.0 } else { -1.0 };
        let cor = oscillatory_nabla(data, alpha, h, u)?;
        let wp: C64 = (0..3).map(|i| data.w_pow(i, 0.5 - q_f64(c[i]))).product();
        let t = data.chi(beta, data.inv(h)) * sign * uf.powf(1.5 - age as f64) * wp * cor;
        s += t;
    }
    // exp(-(i theta + sum w log w) u) with log w3 = log|w3| + i pi
    let ph = C64::from_polar(1.0, -(theta + std::f64::consts::PI * q_f64(data.w[2])) * uf);
    let sq = I * (2.0 * std::f64::consts::PI).sqrt();
    Ok(s * ph * (-wl_u).exp() / sq)
}

/// Deviations `|f_osc(u) - sum_{k<=K} f_k u^{-k}|` and the ratio between consecutive samples.
pub fn oscillatory_tail(data: &OrbifoldData, k: usize, us: &[Q]) -> Result<Vec<f64>, Error> {
    let f = f_matrix(data, k);
    let mut out = Vec::new();
    for &u in us {
        let mut worst: f64 = 0.0;
        for a in 0..data.order {
            for b in 0..data.order {
                let exact = f_from_oscillatory(data, a, b, u)?;
                let uf = q_f64(u);
                let trunc: C64 = (0..=k).map(|j| f.coeff(a, b, j) / uf.powi(j as i32)).sum();
                worst = worst.max((exact - trunc).norm());
            }
        }
        out.push(worst);
    }
    Ok(out)
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct StirlingReport {
    pub h: usize,
    pub samples: Vec<(f64, f64)>,
    pub ratios: Vec<f64>,
    pub expected: f64,
    pub pass: bool,
}

/// Ladder test of the Stirling truncation at order `order` for the element `h`.
pub fn stirling_check(data: &OrbifoldData, h: usize, us: &[Q], order: usize) -> Result<StirlingReport, Error> {
    let wmin = data.w_f64().iter().fold(f64::INFINITY, |a, b| a.min(b.abs()));
    if us.iter().any(|u| q_f64(*u) < 10.0 / wmin) {
        return Err(Error::Validation(format!("Stirling samples must be at least {}", 10.0 / wmin)));
    }
    let c = data.elements[h].c;
    let dev: Vec<f64> = us.iter().map(|&u| crate::gamma::stirling_deviation(data.w, c, u, order)).collect();
    if dev.iter().any(|d| *d < 1e-70) {
        return Err(Error::Numeric("deviation below working precision".into()));
    }
    let ratios: Vec<f64> = dev.windows(2).map(|p| p[0] / p[1]).collect();
    let mut pass = true;
    let mut expected = 1.0;
    for (i, r) in ratios.iter().enumerate() {
        let e = (q_f64(us[i + 1]) / q_f64(us[i])).powi(order as i32 + 1);
        expected = e;
        pass &= *r > e / 3.0 && *r < e * 3.0;
    }
    Ok(StirlingReport { h, samples: us.iter().map(|u| q_f64(*u)).zip(dev).collect(), ratios, expected, pass })
}

/// Which coefficient of `h-check` feeds a dilaton leaf of height `k`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DilatonIndex {
    /// `[u^{1-k}]`
    Shifted,
    /// `[u^{-k}]`
    Direct,
}

/// Precomputed B-model leaf and edge tables.
pub struct BModel {
    pub data: OrbifoldData,
    pub kmax: usize,
    pub dmax: usize,
    pub f: FMatrix,
    pub bcheck: BCheck,
    pub h_check: Vec<C64>,
    /// `xi^beta_0` in the `1'` basis.
    pub xi: Vec<ClassSeries>,
    pub open_leaf: Vec<Vec<ClassSeries>>,
    pub primary_leaf: Vec<Vec<Vec<C64>>>,
    pub dilaton_leaf: Vec<Vec<C64>>,
    pub sqrt_m2: C64,
    pub dilaton: DilatonIndex,
}

impl BModel {
    pub fn new(data: &OrbifoldData, kmax: usize, dmax: usize, prec: Precision) -> Result<BModel, Error> {
        Self::with_options(data, kmax, dmax, prec, sqrt_m2(), DilatonIndex::Shifted)
    }

    /// `root` replaces `sqrt(-2)` everywhere; only the two square roots of `-2` make sense.
    pub fn with_options(
        data: &OrbifoldData,
        kmax: usize,
        dmax: usize,
        prec: Precision,
        root: C64,
        dilaton: DilatonIndex,
    ) -> Result<BModel, Error> {
        let n = data.order;
        let f = f_matrix(data, 2 * kmax + 1);
        let bcheck = b_check_table(&f, kmax)?;
        let h_check = h_check_series(data, 0, 2 * kmax + 1);
        let flip = root / sqrt_m2();
        let xi: Vec<ClassSeries> = (0..n)
            .map(|b| xi_series(data, b, dmax, prec).map(|s| s.to_prime().scale(flip)))
            .collect::<Result<_, _>>()?;
        let hat: Vec<Vec<ClassSeries>> = xi.iter().map(|x| (0..=kmax as i32).map(|i| x.euler_pow(i)).collect()).collect();
        let wv = data.w_f64();
        let sq_w = (-2.0 / (wv[0] * wv[1] * wv[2])).sqrt();
        let m = data.m() as usize;
        let mut open_leaf = Vec::with_capacity(n);
        let mut primary_leaf = Vec::with_capacity(n);
        let mut dilaton_leaf = Vec::with_capacity(n);
        for al in 0..n {
            let mut ol = Vec::new();
            let mut pl = Vec::new();
            let mut dl = Vec::new();
            for k in 0..=kmax {
                // int theta^alpha_k = hat xi_{alpha,k} - sum_{i<k} sum_beta Bcheck_{k-1-i,0} hat xi_{beta,i}
                let mut s = hat[al][k].clone();
                for i in 0..k {
                    for b in 0..n {
                        s.add_scaled(&hat[b][i], -bcheck.get(al, b, k - 1 - i, 0));
                    }
                }
                ol.push(s.scale(-1.0 / root));
                let _ = m;
                let mut v = Vec::with_capacity(data.p);
                for ag in &data.age1 {
                    let c = data.elements[ag.elem].c;
                    let wc: C64 = (0..3).map(|i| data.w_pow(i, q_f64(c[i]))).product();
                    let t: C64 = (0..n).map(|b| f.coeff(al, b, k) * data.chi(b, ag.elem)).sum();
                    v.push(sq_w / n as f64 * wc * t / root);
                }
                pl.push(v);
                let idx = match dilaton {
                    DilatonIndex::Shifted => k.checked_sub(1),
                    DilatonIndex::Direct => Some(k),
                };
                let hv = if k >= 2 { idx.map(|i| h_check[i]).unwrap_or_default() } else { C64::default() };
                dl.push(-hv / root);
            }
            open_leaf.push(ol);
            primary_leaf.push(pl);
            dilaton_leaf.push(dl);
        }
        Ok(BModel {
            data: data.clone(),
            kmax,
            dmax,
            f,
            bcheck,
            h_check,
            xi,
            open_leaf,
            primary_leaf,
            dilaton_leaf,
            sqrt_m2: root,
            dilaton,
        })
    }

    /// `sqrt(-2) / h^alpha_1(0)`.
    pub fn vertex_base(&self) -> C64 {
        self.sqrt_m2 / self.h_check[0]
    }

    /// `w_B` of one graph (not divided by `|Aut|`).
    pub fn raw_weight(&self, gr: &DecoratedGraph) -> Result<BTreeMap<CoeffKey, C64>, Error> {
        let leaves = Leaves {
            open: &|a, k| &self.open_leaf[a][k],
            primary: &|a, k| self.primary_leaf[a][k].clone(),
            dilaton: &|a, k| self.dilaton_leaf[a][k],
            edge: &|a, b, k, l| self.bcheck.get(a, b, k, l),
        };
        let sign = if gr.genus() % 2 == 1 { 1.0 } else { -1.0 };
        assemble(gr, self.kmax, self.data.p, self.vertex_base(), sign, &leaves)
    }

    pub fn weight(&self, gr: &DecoratedGraph) -> Result<BTreeMap<CoeffKey, C64>, Error> {
        let mut w = self.raw_weight(gr)?;
        for v in w.values_mut() {
            *v /= gr.aut as f64;
        }
        Ok(w)
    }

    /// `F-check_{0,1}(0; X) + sum_a tau_a dF-check_{0,1}/dtau_a(0; X)` from the `xi` series.
    pub fn disk_extras(&self) -> PotentialSeries {
        let d = &self.data;
        let n = d.order;
        let h = self.h_check[0];
        let mut s = PotentialSeries::new(0, 1, d.p, d.m() as usize, Basis::Prime);
        let mut zero = ClassSeries::zero(d.m() as usize, self.dmax);
        for x in &self.xi {
            zero.add_scaled(&x.euler_pow(-2), h * 0.5);
        }
        for (k, dd, v) in zero.entries() {
            s.add((vec![0; d.p], vec![(dd as u32, k as u32)]), v);
        }
        for (i, ag) in d.age1.iter().enumerate() {
            let c = d.elements[ag.elem].c;
            let wc: C64 = (0..3).map(|j| d.w_pow(j, q_f64(c[j]))).product();
            let mut one = ClassSeries::zero(d.m() as usize, self.dmax);
            for (b, x) in self.xi.iter().enumerate().take(n) {
                one.add_scaled(&x.euler_pow(-1), -h * 0.5 * wc * d.chi(b, ag.elem));
            }
            let mut t = vec![0; d.p];
            t[i] = 1;
            for (k, dd, v) in one.entries() {
                s.add((t.clone(), vec![(dd as u32, k as u32)]), v);
            }
        }
        s.source.push("bmodel:disk-xi".into());
        s
    }

    /// `F-check_{0,2}(0; X1, X2) = (1/2) sum_gamma xi^gamma_0 xi^gamma_0 / (d1 + d2)`.
    pub fn annulus_zero(&self) -> PotentialSeries {
        let d = &self.data;
        let mut s = PotentialSeries::new(0, 2, d.p, d.m() as usize, Basis::Prime);
        for x in &self.xi {
            let e = x.entries();
            for &(k1, d1, v1) in &e {
                for &(k2, d2, v2) in &e {
                    s.add((vec![0; d.p], vec![(d1 as u32, k1 as u32), (d2 as u32, k2 as u32)]), 0.5 * v1 * v2 / (d1 + d2) as f64);
                }
            }
        }
        s.source.push("bmodel:annulus-xi".into());
        s
    }
}

/// Where the unstable `(0,1)` and `(0,2)` pieces come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtrasSource {
    /// Direct expansion on the spectral curve.
    Curve,
    /// Laplace data `xi`.
    Laplace,
}

/// `F-check_{g,n}` through total `tau`-degree `win.tau_degree`.
pub fn f_gn_b(data: &OrbifoldData, g: u32, n: usize, win: Windows) -> Result<PotentialSeries, Error> {
    let model = BModel::new(data, win.height_bound(g, n), win.winding, win.precision)?;
    f_gn_b_with(&model, g, n, win.tau_degree, ExtrasSource::Curve)
}

pub fn f_gn_b_with(model: &BModel, g: u32, n: usize, tau_degree: u32, extras: ExtrasSource) -> Result<PotentialSeries, Error> {
    if n == 0 {
        return Err(Error::Validation("at least one open leg is required".into()));
    }
    let d = &model.data;
    let mut s = PotentialSeries::new(g, n, d.p, d.m() as usize, Basis::Prime);
    for l in 0..=tau_degree {
        let gs = crate::amodel::graph::enumerate_graphs(d, g, n, l);
        graph_sum(&gs, &|gr| model.raw_weight(gr), &mut s)?;
    }
    s.source.push("bmodel:graph-sum".into());
    let use_curve = extras == ExtrasSource::Curve && crate::eo::supported(d);
    if (g, n) == (0, 1) {
        let mut e = model.disk_extras();
        if use_curve {
            let curve = crate::eo::SpectralCurve::new(d)?;
            let direct = curve.disk_zero(model.dmax)?;
            e.coeffs.retain(|k, _| k.0.iter().any(|&t| t > 0));
            e.merge(&direct);
            e.source.retain(|x| x != "bmodel:disk-xi");
            e.source.push("bmodel:disk-xi(tau-linear)".into());
        }
        e.coeffs.retain(|k, _| k.0.iter().sum::<u32>() <= tau_degree);
        s.merge(&e);
    }
    if (g, n) == (0, 2) {
        if use_curve {
            let curve = crate::eo::SpectralCurve::new(d)?;
            s.merge(&curve.annulus_zero(model.dmax)?);
        } else {
            s.merge(&model.annulus_zero());
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amodel::{r_matrix, xi_tilde, AModel};
    use crate::orbifold::{build_orbifold, catalog, OrbifoldInput};
    use rand::{Rng, SeedableRng};

    fn orb(r: i64, m: i64, s: i64, f: i64) -> OrbifoldData {
        build_orbifold(OrbifoldInput::new(r, m, s, f)).unwrap()
    }

    #[test]
    fn trivial_group_first_coefficient() {
        let d = orb(1, 1, 0, 1);
        let f = f_matrix(&d, 3);
        assert!((f.coeff(0, 0, 0) - 1.0).norm() < 1e-15);
        // (1/2) B_2 (1/w1 + 1/w2 + 1/w3) = (1/12)(3/2)
        assert!((f.coeff(0, 0, 1) - 0.125).norm() < 1e-15);
        let e = f.entry(0, 0);
        assert!((e.coeff(&[1]) - 0.125).norm() < 1e-15);
    }

    #[test]
    fn bridge_to_r_matrix() {
        for d in catalog() {
            let f = f_matrix(&d, 8);
            let r = r_matrix(&d, 8);
            for a in 0..d.order {
                for b in 0..d.order {
                    let want = if a == b { 1.0 } else { 0.0 };
                    assert!((f.coeff(a, b, 0) - want).norm() < 1e-14);
                    for k in 0..=8 {
                        assert!((f.coeff(a, b, k) - r.coeff_neg(b, a, k)).norm() < 1e-12, "{:?} {a} {b} {k}", d.input);
                    }
                }
            }
        }
    }

    #[test]
    fn h_check_two_routes() {
        for d in catalog() {
            let f = f_matrix(&d, 6);
            let closed = h_check_series(&d, 0, 6);
            let w = d.w_f64();
            assert!((closed[0].re - (-2.0 / (w[0] * w[1] * w[2])).sqrt() / d.order as f64).abs() < 1e-15);
            for a in 0..d.order {
                let dual = h_check_from_f(&f, &d, a);
                for k in 0..=6 {
                    assert!((closed[k] - dual[k]).norm() < 1e-12, "{:?} {a} {k}", d.input);
                }
            }
        }
    }

    #[test]
    fn b_check_matches_edges() {
        for d in catalog() {
            let f = f_matrix(&d, 9);
            let b = b_check_table(&f, 4).unwrap();
            assert!(b.remainder < 1e-11);
            let e = crate::amodel::edge_table(&r_matrix(&d, 9), 4).unwrap();
            for a in 0..d.order {
                for c in 0..d.order {
                    for k in 0..=4 {
                        for l in 0..=4 {
                            assert!((b.get(a, c, k, l) - e.get(a, c, k, l)).norm() < 1e-11);
                        }
                    }
                }
            }
        }
        assert!(b_check_table(&f_matrix(&orb(1, 1, 0, 1), 3), 2).is_err());
    }

    #[test]
    fn b_check_symmetric() {
        let d = orb(1, 3, 0, 1);
        let b = b_check_table(&f_matrix(&d, 11), 5).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let (a, c) = (rng.gen_range(0..3), rng.gen_range(0..3));
            let (k, l) = (rng.gen_range(0..=5), rng.gen_range(0..=5));
            assert!((b.get(a, c, k, l) - b.get(c, a, l, k)).norm() < 1e-12);
        }
        // B00 for the trivial group is minus the z^1 w^0 coefficient of the f f product
        let d = orb(1, 1, 0, 1);
        let f = f_matrix(&d, 3);
        assert!((b_check(&d, 0, 0, 0, 0).unwrap() + f.coeff(0, 0, 1)).norm() < 1e-15);
    }

    #[test]
    fn xi_is_proportional_to_xi_tilde() {
        for d in catalog() {
            let w = d.w_f64();
            let k = (-2.0 / (w[0] * w[1] * w[2])).sqrt();
            for b in 0..d.order {
                let xi = xi_series(&d, b, 7, Precision::Double).unwrap().to_prime();
                let xt = xi_tilde(&d, b, 0, 7, Precision::Double).unwrap();
                let diff = xi.max_abs_diff(&xt.scale(C64::new(k, 0.0)));
                assert!(diff < 1e-11 * xi.max_abs(), "{:?} beta={b}: {diff}", d.input);
                for row in &xi.c {
                    assert_eq!(row[0], C64::default());
                }
            }
        }
    }

    #[test]
    fn xi_support_by_winding() {
        let d = orb(1, 3, 0, 1);
        let xi = xi_series(&d, 1, 9, Precision::Double).unwrap().to_prime();
        for (class, d0, _) in xi.entries() {
            let k = (3 - class) % 3;
            let h = d.element_of_winding(d0 as i64, k as i64).unwrap();
            assert!(d.elements[h].c.iter().all(|c| *c.denom() <= 3));
        }
        let one = xi_expansion(&orb(1, 1, 0, 1), 0, 0, 3).unwrap();
        assert!((one.coeff(&[1]) + 2.0).norm() < 1e-14);
    }

    #[test]
    fn critical_points_match_closed_forms() {
        for d in catalog() {
            let cps = critical_points(&d);
            assert_eq!(cps.len(), d.order);
            for cp in &cps {
                assert!((cp.x_c() - critical_x_closed(&d, cp.alpha)).norm() < 1e-12 * cp.x_c().norm());
                assert!(cp.theta >= 0.0 && cp.theta < 2.0 * std::f64::consts::PI);
            }
            for i in 0..cps.len() {
                for j in 0..i {
                    assert!((cps[i].x_c() - cps[j].x_c()).norm() + (cps[i].y_c() - cps[j].y_c()).norm() > 1e-8);
                }
            }
        }
    }

    #[test]
    fn oscillatory_trivial_group() {
        let d = orb(1, 1, 0, 1);
        let u = Q::from(10);
        let v = oscillatory_phi(&d, 0, u, 0).unwrap()[&vec![]];
        // e^{i pi w3 10} Gamma(10) Gamma(10) / Gamma(21)
        let want = crate::gamma::gamma(10.0).powi(2) / crate::gamma::gamma(21.0);
        assert!((v - want).norm() < 1e-12 * want);
    }

    #[test]
    fn oscillatory_q_linear_is_nabla() {
        let d = orb(1, 3, 0, 1);
        let u = Q::new(41, 2);
        for al in 0..3 {
            let s = oscillatory_phi(&d, al, u, 1).unwrap();
            for (a, ag) in d.age1.iter().enumerate() {
                let mut key = vec![0; d.p];
                key[a] = 1;
                let c = oscillatory_nabla(&d, al, ag.elem, u).unwrap();
                assert!((s[&key] - c).norm() < 1e-12 * c.norm());
            }
        }
    }

    #[test]
    fn f_from_oscillatory_is_asymptotic() {
        for d in [orb(1, 1, 0, 1), orb(1, 3, 0, 1), orb(3, 1, 1, 1)] {
            let dev = oscillatory_tail(&d, 3, &[Q::from(20), Q::from(40)]).unwrap();
            // error of order u^{-4}
            let ratio = dev[0] / dev[1];
            assert!(ratio > 16.0 / 3.0 && ratio < 16.0 * 3.0, "{:?}: {dev:?}", d.input);
            assert!(dev[1] < 1e-3);
        }
    }

    #[test]
    fn oscillatory_equivariance() {
        // alpha -> chi2 alpha only multiplies by characters
        let d = orb(1, 3, 0, 1);
        let u = Q::from(20);
        for al in 0..3 {
            let nb = (al + 1) % 3;
            for h in 0..3 {
                let a = oscillatory_nabla(&d, al, h, u).unwrap();
                let b = oscillatory_nabla(&d, nb, h, u).unwrap();
                let cps = critical_points(&d);
                let ph = C64::from_polar(1.0, (cps[nb].theta - cps[al].theta) * 20.0) * d.chi(nb, h) / d.chi(al, h);
                assert!((b - a * ph).norm() < 1e-12 * a.norm());
            }
        }
    }

    #[test]
    fn stirling_ladder() {
        for d in catalog() {
            let wmin = d.w_f64().iter().fold(f64::INFINITY, |a, b| a.min(b.abs()));
            let base = (10.0 / wmin).ceil().max(20.0) as i64;
            let us = [Q::from(base), Q::from(2 * base), Q::from(4 * base)];
            for h in 0..d.order {
                let r = stirling_check(&d, h, &us, 4).unwrap();
                assert!(r.pass, "{:?} h={h}: {r:?}", d.input);
            }
        }
        let d = orb(1, 1, 0, 1);
        assert!(stirling_check(&d, 0, &[Q::from(2)], 4).is_err());
        let r = stirling_check(&d, 0, &[Q::from(20), Q::from(80)], 0).unwrap();
        assert!(r.samples[1].1 < r.samples[0].1);
    }

    #[test]
    fn per_graph_identity() {
        for d in [orb(1, 1, 0, 1), orb(1, 2, 0, 1), orb(2, 1, 0, 1), orb(3, 1, 1, 1)] {
            let a = AModel::new(&d, 4, 4, Precision::Double).unwrap();
            let b = BModel::new(&d, 4, 4, Precision::Double).unwrap();
            for (g, n, l) in [(0, 3, 0), (0, 3, 1), (1, 1, 0), (1, 1, 1), (1, 2, 0), (0, 1, 2), (0, 2, 1)] {
                let factor = (if (g + n as u32) % 2 == 1 { 1.0 } else { -1.0 }) * (d.order as f64).powi(n as i32);
                for gr in crate::amodel::enumerate_graphs(&d, g, n, l).iter() {
                    let wa = a.weight(gr).unwrap();
                    let wb = b.weight(gr).unwrap();
                    let scale = wa.values().map(|v| v.norm()).fold(0.0, f64::max);
                    for (k, va) in &wa {
                        let vb = wb.get(k).copied().unwrap_or_default();
                        assert!((vb - va * factor).norm() <= 1e-9 * scale, "{:?} {gr:?}", d.input);
                    }
                }
            }
        }
    }

    #[test]
    fn branch_flip_is_detected() {
        let d = orb(1, 2, 0, 1);
        let a = AModel::new(&d, 3, 3, Precision::Double).unwrap();
        let b = BModel::with_options(&d, 3, 3, Precision::Double, -sqrt_m2(), DilatonIndex::Shifted).unwrap();
        let gr = &crate::amodel::enumerate_graphs(&d, 1, 1, 0)[0];
        let wa = a.weight(gr).unwrap();
        let wb = b.weight(gr).unwrap();
        let (k, va) = wa.iter().find(|(_, v)| v.norm() > 0.0).unwrap();
        // the correct branch gives -|G| w_A for g = 1, n = 1; the other one flips the sign
        assert!((wb[k] - va * 2.0).norm() < 1e-9 * va.norm(), "{} {}", wb[k], va);
    }

    #[test]
    fn unstable_extras_match_a_model() {
        for d in catalog() {
            let a = AModel::new(&d, 2, 6, Precision::Double).unwrap();
            let b = BModel::new(&d, 2, 6, Precision::Double).unwrap();
            let n = d.order as f64;
            let disk = b.disk_extras();
            let mut tau0 = disk.clone();
            tau0.coeffs.retain(|k, _| k.0.iter().all(|&t| t == 0));
            let mut lin = disk.clone();
            lin.coeffs.retain(|k, _| k.0.iter().any(|&t| t > 0));
            let ad = a.disk_extras().unwrap();
            let mut a0 = ad.clone();
            a0.coeffs.retain(|k, _| k.0.iter().all(|&t| t == 0));
            let mut a1 = ad.clone();
            a1.coeffs.retain(|k, _| k.0.iter().any(|&t| t > 0));
            assert!(tau0.compare(&a0, C64::new(-n, 0.0), 1e-13).max_rel < 1e-11, "{:?}", d.input);
            assert!(lin.compare(&a1, C64::new(n, 0.0), 1e-13).max_rel < 1e-11, "{:?}", d.input);
            let ann = b.annulus_zero();
            let c = ann.compare(&a.annulus_zero().unwrap(), C64::new(-n * n, 0.0), 1e-13);
            assert!(c.max_rel < 1e-11 && c.compared > 0, "{:?}", d.input);
        }
    }
}
