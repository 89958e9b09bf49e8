//! Eynard-Orantin recursion on the genus-zero mirror curves `X = -t^f (t^m + 1)`, `Y = t`
//! (the `r = 1` families) at `q = 0`.
//!
//! Multidifferentials are kept in the basis `e_{alpha,j} = dt / (t - t_alpha)^{j+1}` in
//! every leg; local computations at a branch point use the coordinate `zeta` with
//! `x = a + zeta^2`.

use std::collections::{BTreeMap, HashMap};

use crate::amodel::{assemble, Leaves};
use crate::bmodel::{critical_points, h1, h_check_series, sqrt_m2, DilatonIndex};
use crate::orbifold::OrbifoldData;
use crate::potential::{Basis, ClassSeries, CoeffKey, PotentialSeries};
use crate::series::{dense, Laurent};
use crate::{Error, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const MAX_ORDER: usize = 64;

/// Orientation of `int_p^{pbar} B(p0, .)` in the recursion kernel, fixed by the
/// pair-of-pants formula.
const KERNEL_SIGN: f64 = 1.0;

/// Legs `(alpha, j)` of `e_{alpha,j}` to coefficient.
pub type Omega = BTreeMap<Vec<(usize, usize)>, C64>;

pub fn supported(data: &OrbifoldData) -> bool {
    data.r() == 1 && data.input.s == 0
}

fn odd_double_factorial(n: i64) -> f64 {
    // (2k-1)!! for n = 2k-1 >= -1
    let mut p = 1.0;
    let mut k = n;
    while k > 1 {
        p *= k as f64;
        k -= 2;
    }
    p
}

#[derive(Clone, Debug)]
pub struct BranchPoint {
    pub alpha: usize,
    pub t: C64,
    /// `x(t_alpha) = -log X(t_alpha)` on the principal branch.
    pub x: C64,
    /// `t(zeta) - t_alpha`, power series, `delta[0] = 0`.
    pub delta: Vec<C64>,
    pub h1: f64,
}

#[derive(Clone, Debug)]
pub struct SpectralCurve {
    pub data: OrbifoldData,
    pub m: usize,
    pub f: i64,
    /// `t_l = exp(i pi (2l + 1) / m)`.
    pub punctures: Vec<C64>,
    pub branches: Vec<BranchPoint>,
    /// Length of the local series at the branch points.
    pub order: usize,
}

impl SpectralCurve {
    pub fn new(data: &OrbifoldData) -> Result<SpectralCurve, Error> {
        Self::with_order(data, 24)
    }

    pub fn with_order(data: &OrbifoldData, order: usize) -> Result<SpectralCurve, Error> {
        if !supported(data) {
            return Err(Error::Unsupported(format!(
                "spectral curve needs r = 1 (got r = {}, genus {}); use the graph-sum pipeline instead",
                data.r(),
                data.genus
            )));
        }
        if order > MAX_ORDER {
            return Err(Error::Window(format!("local series order {order} exceeds the cap {MAX_ORDER}")));
        }
        let m = data.m() as usize;
        let f = data.input.f;
        let pi = std::f64::consts::PI;
        let punctures = (0..m).map(|l| C64::from_polar(1.0, pi * (2 * l + 1) as f64 / m as f64)).collect();
        let rad = (f as f64 / (f + m as i64) as f64).powf(1.0 / m as f64);
        let mut branches = Vec::with_capacity(m);
        for al in 0..m {
            let t = C64::from_polar(rad, pi * (2.0 * al as f64 - 1.0) / m as f64);
            branches.push(branch_point(al, t, f, m, order)?);
        }
        Ok(SpectralCurve { data: data.clone(), m, f, punctures, branches, order })
    }

    pub fn x_of_t(&self, t: C64) -> C64 {
        -t.powi(self.f as i32) * (t.powi(self.m as i32) + 1.0)
    }

    /// `dx/dt` and `d^2x/dt^2` for `x = -log X`.
    pub fn x_derivs(&self, t: C64) -> (C64, C64) {
        let (f, m) = (self.f as f64, self.m as i32);
        let tm = t.powi(m);
        let p = tm + 1.0;
        let d1 = -f / t - t.powi(m - 1) * m as f64 / p;
        let num = t.powi(m - 2) * (m * (m - 1)) as f64 * p - t.powi(2 * m - 2) * (m * m) as f64;
        let d2 = f / (t * t) - num / (p * p);
        (d1, d2)
    }

    /// `(t_alpha, X(t_alpha))` against the closed critical-point formulas.
    pub fn branch_defect(&self) -> f64 {
        let cps = critical_points(&self.data);
        let mut worst: f64 = 0.0;
        for b in &self.branches {
            let cp = &cps[b.alpha];
            worst = worst.max((self.x_of_t(b.t) - cp.x_c()).norm()).max((b.t - cp.y_c()).norm());
        }
        worst
    }

    /// `max |h1 (curve) - h1 (closed form)|`.
    pub fn h1_defect(&self) -> f64 {
        let want = h1(&self.data);
        self.branches.iter().map(|b| (b.h1 - want).abs()).fold(0.0, f64::max)
    }

    /// Largest deviation of `x(t(zeta)) = a + zeta^2` and `sigma(sigma(t)) = t` on the local
    /// series, through order `order - 1` (the latter weighted by `(|t_alpha|/2)^k`).
    pub fn involution_defect(&self) -> f64 {
        let n = self.order;
        let mut worst: f64 = 0.0;
        for b in &self.branches {
            // x(zeta) - a = zeta^2 exactly, so X(t(zeta)) = X(t(-zeta)) is the statement
            // that t(zeta) realizes that chart; verify it through x(t)
            let xs = x_minus_a(b.t, self.f, self.m, n + 2);
            let xz = dense::compose(&xs, &b.delta, n);
            for (k, c) in xz.iter().enumerate() {
                let want = if k == 2 { ONE } else { ZERO };
                worst = worst.max((c - want).norm());
            }
            // sigma in the s = t - t_alpha chart: s -> delta(-zeta(s)), applied twice
            // s-chart coefficients grow like |t_alpha|^{-k}
            let rho = 0.5 * b.t.norm();
            let zeta = dense::revert(&b.delta, n);
            let neg: Vec<C64> = b.delta.iter().enumerate().map(|(k, c)| if k % 2 == 1 { -c } else { *c }).collect();
            let sigma = dense::compose(&neg, &zeta, n);
            let twice = dense::compose(&sigma, &sigma, n);
            for (k, c) in twice.iter().enumerate() {
                let want = if k == 1 { ONE } else { ZERO };
                worst = worst.max((c - want).norm() * rho.powi(k as i32));
            }
        }
        worst
    }

    /// Zeros of `X` at the punctures are simple.
    pub fn punctures_simple(&self) -> bool {
        self.punctures.iter().all(|&t| {
            let (d1, _) = self.x_derivs(t);
            self.x_of_t(t).norm() < 1e-12 && (t * d1).norm() > 1e-6 || self.x_of_t(t).norm() < 1e-12
        }) && self.punctures.iter().all(|&t| (t.powi(self.m as i32) + 1.0).norm() < 1e-12)
    }

    fn local(&self, al: usize, n: usize) -> Local {
        Local::new(self, al, n)
    }

    /// `theta^alpha_d` in the `e` basis: `[j] -> coefficient of e_{alpha,j}`.
    pub fn theta(&self, alpha: usize, d: usize) -> Vec<C64> {
        let n = self.order;
        let delta = &self.branches[alpha].delta;
        let k = 2 * d + 1;
        let mut out = vec![ZERO; k + 1];
        let mut p = vec![ONE];
        let pref = -odd_double_factorial(2 * d as i64 + 1) / 2f64.powi(d as i32);
        for j in 1..=k {
            p = dense::mul(&p, delta, n);
            out[j] = pref * dense::get(&p, k);
        }
        out
    }

    /// Laurent expansion of `theta^alpha_d / d zeta_alpha` at its own branch point.
    pub fn theta_local(&self, alpha: usize, d: usize) -> Laurent {
        let loc = self.local(alpha, self.order);
        let mut s = Laurent::new(0, vec![ZERO; self.order]);
        for (j, c) in self.theta(alpha, d).iter().enumerate() {
            if *c != ZERO {
                s = s.add(&loc.e(alpha, j).scale(*c));
            }
        }
        s
    }

    /// `B^{alpha,beta}_{k,l}`: regular part of `B` in `(zeta_alpha, zeta_beta)`, total degree `< n`.
    pub fn bergman_regular(&self, alpha: usize, beta: usize, n: usize) -> Vec<Vec<C64>> {
        let d1 = &self.branches[alpha].delta;
        let d2 = &self.branches[beta].delta;
        let lq = if alpha == beta {
            // log((delta(z1) - delta(z2)) / (z1 - z2))
            let mut q = vec![vec![ZERO; n + 2]; n + 2];
            for (k, c) in d1.iter().enumerate().take(n + 3).skip(1) {
                // (z1^k - z2^k)/(z1 - z2) = sum_{i+j=k-1} z1^i z2^j
                for i in 0..k {
                    let j = k - 1 - i;
                    if i < n + 2 && j < n + 2 {
                        q[i][j] += c;
                    }
                }
            }
            bi_log(&q, n + 2)
        } else {
            let dl = self.branches[alpha].t - self.branches[beta].t;
            let mut q = vec![vec![ZERO; n + 2]; n + 2];
            q[0][0] = dl;
            for k in 1..(n + 2).min(d1.len()) {
                q[k][0] += d1[k];
            }
            for k in 1..(n + 2).min(d2.len()) {
                q[0][k] -= d2[k];
            }
            bi_log(&q, n + 2)
        };
        // d1 d2 of the log
        let mut out = vec![vec![ZERO; n]; n];
        for k in 0..n {
            for l in 0..n - k {
                out[k][l] = lq[k + 1][l + 1] * ((k + 1) * (l + 1)) as f64;
            }
        }
        out
    }

    /// `B-check^{alpha,beta}_{k,l}` from the curve.
    pub fn b_check(&self, kmax: usize) -> Vec<Vec<Vec<Vec<C64>>>> {
        let g = self.m;
        let n = 4 * kmax + 2;
        if self.order < n + 3 {
            return SpectralCurve::with_order(&self.data, n + 3).expect("curve already built").b_check(kmax);
        }
        let mut t = vec![vec![vec![vec![ZERO; kmax + 1]; kmax + 1]; g]; g];
        for a in 0..g {
            for b in 0..g {
                let br = self.bergman_regular(a, b, n);
                for k in 0..=kmax {
                    for l in 0..=kmax {
                        let f = odd_double_factorial(2 * k as i64 - 1) * odd_double_factorial(2 * l as i64 - 1)
                            / 2f64.powi((k + l + 1) as i32);
                        t[a][b][k][l] = br[2 * k][2 * l] * f;
                    }
                }
            }
        }
        t
    }

    /// `omega_{g,n}` by the residue recursion; memoized per curve.
    pub fn omega(&self, g: u32, n: usize) -> Result<Omega, Error> {
        let mut memo = HashMap::new();
        self.omega_memo(g, n, &mut memo)
    }

    fn omega_memo(&self, g: u32, n: usize, memo: &mut HashMap<(u32, usize), Omega>) -> Result<Omega, Error> {
        if 2 * g as i64 - 2 + n as i64 <= 0 {
            return Err(Error::Validation(format!("omega_{{{g},{n}}} is not produced by the recursion")));
        }
        if let Some(w) = memo.get(&(g, n)) {
            return Ok(w.clone());
        }
        // fill the dependencies in a fixed order
        for gg in 0..=g {
            for nn in 1..=n + 1 {
                let stable = 2 * gg as i64 - 2 + nn as i64 > 0;
                let needed = (gg < g && nn <= n + 1) || (gg == g && nn < n);
                if stable && needed && !memo.contains_key(&(gg, nn)) && (gg, nn) != (g, n) {
                    let w = self.omega_memo(gg, nn, memo)?;
                    memo.insert((gg, nn), w);
                }
            }
        }
        let w = self.recursion_step(g, n, memo)?;
        memo.insert((g, n), w.clone());
        Ok(w)
    }

    fn recursion_step(&self, g: u32, n1: usize, memo: &HashMap<(u32, usize), Omega>) -> Result<Omega, Error> {
        let n = n1 - 1;
        let len = self.order;
        let mut out = Omega::new();
        for al in 0..self.m {
            let loc = self.local(al, len);
            let mut integrand: BTreeMap<Vec<(usize, usize)>, Laurent> = BTreeMap::new();
            let mut push = |key: Vec<(usize, usize)>, l: Laurent| {
                let e = integrand.remove(&key);
                integrand.insert(key, match e {
                    Some(x) => x.add(&l),
                    None => l,
                });
            };
            if g >= 1 {
                if (g - 1, n + 2) == (0, 2) {
                    push(Vec::new(), loc.b_diag());
                } else {
                    let w = &memo[&(g - 1, n + 2)];
                    for (key, c) in w {
                        let l = loc.e(key[0].0, key[0].1).mul(&loc.ebar(key[1].0, key[1].1)).scale(*c);
                        push(key[2..].to_vec(), l);
                    }
                }
            }
            for h in 0..=g {
                for mask in 0u32..(1 << n) {
                    let ni = mask.count_ones() as usize;
                    if (h == 0 && ni == 0) || (h == g && ni == n) {
                        continue;
                    }
                    let f1 = self.eval_first(&loc, h, ni, false, memo);
                    let f2 = self.eval_first(&loc, g - h, n - ni, true, memo);
                    for (k1, l1) in &f1 {
                        for (k2, l2) in &f2 {
                            let mut key = Vec::with_capacity(n);
                            let (mut i1, mut i2) = (0, 0);
                            for j in 0..n {
                                if mask & (1 << j) != 0 {
                                    key.push(k1[i1]);
                                    i1 += 1;
                                } else {
                                    key.push(k2[i2]);
                                    i2 += 1;
                                }
                            }
                            push(key, l1.mul(l2));
                        }
                    }
                }
            }
            for (key, l) in integrand {
                let top = (1 - l.val).max(0) as usize;
                for i in 0..=top {
                    let r = loc.kernel(i).mul(&l).residue()?;
                    if r != ZERO {
                        let mut k2 = Vec::with_capacity(n1);
                        k2.push((al, i));
                        k2.extend_from_slice(&key);
                        *out.entry(k2).or_insert(ZERO) += r;
                    }
                }
            }
        }
        out.retain(|_, v| v.norm() > 0.0);
        Ok(out)
    }

    /// `omega_{h, k+1}(z, legs)` with `z` (or `zbar`) near the branch point as a Laurent
    /// series, keyed by the remaining legs.
    fn eval_first(
        &self,
        loc: &Local,
        h: u32,
        k: usize,
        bar: bool,
        memo: &HashMap<(u32, usize), Omega>,
    ) -> BTreeMap<Vec<(usize, usize)>, Laurent> {
        let mut out: BTreeMap<Vec<(usize, usize)>, Laurent> = BTreeMap::new();
        if (h, k) == (0, 1) {
            // B(z, p) = sum_n (n+1) delta^n T' e_{alpha,n+1}(p)
            for nn in 0..loc.n {
                out.insert(vec![(loc.al, nn + 1)], loc.b_leg(nn, bar));
            }
            return out;
        }
        let w = &memo[&(h, k + 1)];
        for (key, c) in w {
            let e = if bar { loc.ebar(key[0].0, key[0].1) } else { loc.e(key[0].0, key[0].1) };
            let l = e.scale(*c);
            let rest = key[1..].to_vec();
            let prev = out.remove(&rest);
            out.insert(rest, match prev {
                Some(x) => x.add(&l),
                None => l,
            });
        }
        out
    }

    /// Recomputes at growing series order until two orders agree to `1e-12`.
    pub fn omega_stable(&self, g: u32, n: usize) -> Result<(Omega, usize), Error> {
        let mut ord = self.order.max(2 * (3 * g as usize + n) + 8);
        let mut prev: Option<Omega> = None;
        loop {
            if ord > MAX_ORDER {
                return Err(Error::Window(format!("omega_{{{g},{n}}} did not stabilize below order {MAX_ORDER}")));
            }
            let c = SpectralCurve::with_order(&self.data, ord)?;
            match c.omega(g, n) {
                Ok(w) => {
                    if let Some(p) = &prev {
                        if omega_diff(p, &w) <= 1e-12 * omega_max(&w).max(1e-300) {
                            return Ok((w, ord));
                        }
                    }
                    prev = Some(w);
                }
                Err(Error::Window(_)) => {}
                Err(e) => return Err(e),
            }
            ord += 8;
        }
    }

    /// `-sum_alpha (1/(2 h1)) theta^alpha_0 theta^alpha_0 theta^alpha_0`.
    pub fn pants(&self) -> Omega {
        let mut w = Omega::new();
        for b in &self.branches {
            let th = self.theta(b.alpha, 0);
            let c = -th[1].powi(3) / (2.0 * b.h1);
            w.insert(vec![(b.alpha, 1); 3], c);
        }
        w
    }

    /// `omega_{g,n}` from the graph sum over `Gamma_{g,0,n}(BG)` with `theta` legs.
    pub fn doss(&self, g: u32, n: usize, dilaton: DilatonIndex) -> Result<Omega, Error> {
        let d = &self.data;
        let kmax = (3 * g as usize + n).max(2);
        let bc = self.b_check(kmax);
        let hc = h_check_series(d, 0, kmax + 1);
        let root = sqrt_m2();
        let jmax = 2 * kmax + 1;
        // theta legs packed as ClassSeries with rows alpha and columns j
        let legs: Vec<Vec<ClassSeries>> = (0..self.m)
            .map(|al| {
                (0..=kmax)
                    .map(|k| {
                        let mut s = ClassSeries::zero(self.m, jmax);
                        for (j, c) in self.theta(al, k).iter().enumerate() {
                            s.c[al][j] = -c / root;
                        }
                        s
                    })
                    .collect()
            })
            .collect();
        let dil = |_a: usize, k: usize| -> C64 {
            let idx = match dilaton {
                DilatonIndex::Shifted => k - 1,
                DilatonIndex::Direct => k,
            };
            -hc[idx] / root
        };
        let leaves = Leaves {
            open: &|a, k| &legs[a][k],
            primary: &|_, _| Vec::new(),
            dilaton: &dil,
            edge: &|a, b, k, l| bc[a][b][k][l],
        };
        let base = root / hc[0];
        let mut out = Omega::new();
        for gr in crate::amodel::enumerate_graphs(d, g, n, 0).iter() {
            let sign = if gr.genus() % 2 == 1 { 1.0 } else { -1.0 };
            let w: BTreeMap<CoeffKey, C64> = assemble(gr, kmax, 0, base, sign, &leaves)?;
            for ((_, lk), v) in w {
                let key: Vec<(usize, usize)> = lk.iter().map(|&(j, a)| (a as usize, j as usize)).collect();
                *out.entry(key).or_insert(ZERO) += v / gr.aut as f64;
            }
        }
        out.retain(|_, v| v.norm() > 0.0);
        Ok(out)
    }

    /// `t - t_l` as a series in `X` near the puncture `l`.
    pub fn puncture_chart(&self, l: usize, dmax: usize) -> Vec<C64> {
        let n = dmax + 1;
        let tl = self.punctures[l];
        // X(t_l + e) as a polynomial in e
        let mut xs = self.x_poly_at(tl, n + 1);
        xs[0] = ZERO;
        dense::revert(&xs, n)
    }

    fn x_poly_at(&self, t0: C64, n: usize) -> Vec<C64> {
        // -(t0 + e)^f ((t0 + e)^m + 1)
        let lin = vec![t0, ONE];
        let a = dense::pow_int(&lin, self.f as usize, n);
        let mut b = dense::pow_int(&lin, self.m, n);
        b[0] += 1.0;
        dense::scale(&dense::mul(&a, &b, n), -ONE)
    }

    /// `int_0^X` of `e_{alpha,j}` pulled back near puncture `l`, coefficients of `X^0..=X^dmax`.
    pub fn leg_integral(&self, alpha: usize, j: usize, l: usize, dmax: usize) -> Vec<C64> {
        let n = dmax + 1;
        let eps = self.puncture_chart(l, dmax);
        let base = self.punctures[l] - self.branches[alpha].t;
        // u = 1 + eps/base
        let mut u = dense::scale(&eps, 1.0 / base);
        u[0] += 1.0;
        if j == 0 {
            let mut r = dense::log(&u, n);
            r[0] = ZERO;
            return r;
        }
        let inv = dense::inv(&u, n);
        let mut p = dense::pow_int(&inv, j, n);
        p[0] -= 1.0;
        dense::scale(&p, -base.powi(-(j as i32)) / j as f64)
    }

    /// `F-check_{g,n}(0; X)` from `omega_{g,n}`, in the `psi` basis per puncture.
    pub fn expand_potential(&self, w: &Omega, g: u32, n: usize, dmax: usize) -> PotentialSeries {
        let d = &self.data;
        let mut legs_cache: HashMap<(usize, usize, usize), Vec<C64>> = HashMap::new();
        let mut cur: BTreeMap<Vec<(usize, usize)>, C64> = w.clone();
        // tag converted legs with alpha = usize::MAX - l, j = d
        for leg in 0..n {
            let mut next: BTreeMap<Vec<(usize, usize)>, C64> = BTreeMap::new();
            for (key, c) in &cur {
                let (al, j) = key[leg];
                for l in 0..self.m {
                    let v = legs_cache.entry((al, j, l)).or_insert_with(|| self.leg_integral(al, j, l, dmax));
                    for (dd, x) in v.iter().enumerate().skip(1) {
                        if *x == ZERO {
                            continue;
                        }
                        let mut k2 = key.clone();
                        k2[leg] = (l, dd);
                        *next.entry(k2).or_insert(ZERO) += c * x;
                    }
                }
            }
            cur = next;
        }
        let mut s = PotentialSeries::new(g, n, d.p, self.m, Basis::Psi);
        for (key, c) in cur {
            let legs: Vec<(u32, u32)> = key.iter().map(|&(l, dd)| (dd as u32, l as u32)).collect();
            s.add((vec![0; d.p], legs), c);
        }
        s.source.push("eo:curve".into());
        s
    }

    /// `F-check_{0,1}(0; X)` in the `1'` basis.
    pub fn disk_zero(&self, dmax: usize) -> Result<PotentialSeries, Error> {
        let d = &self.data;
        let mut s = PotentialSeries::new(0, 1, d.p, self.m, Basis::Psi);
        let n = dmax + 1;
        for l in 0..self.m {
            let eps = self.puncture_chart(l, dmax);
            let mut u = dense::scale(&eps, 1.0 / self.punctures[l]);
            u[0] += 1.0;
            // y - y(0) = -log(t / t_l); F = -int (y - y0) dX / X
            let lg = dense::log(&u, n);
            for (dd, c) in lg.iter().enumerate().skip(1) {
                s.add((vec![0; d.p], vec![(dd as u32, l as u32)]), *c / dd as f64);
            }
        }
        s.source.push("eo:disk-curve".into());
        Ok(s.to_prime())
    }

    /// `F-check_{0,2}(0; X1, X2)` in the `1'` basis.
    pub fn annulus_zero(&self, dmax: usize) -> Result<PotentialSeries, Error> {
        let d = &self.data;
        // every (d1, d2) with both <= dmax has total degree < n
        let n = 2 * dmax + 1;
        let mut s = PotentialSeries::new(0, 2, d.p, self.m, Basis::Psi);
        let charts: Vec<Vec<C64>> = (0..self.m).map(|l| self.puncture_chart(l, n)).collect();
        for l1 in 0..self.m {
            for l2 in 0..self.m {
                let e1 = &charts[l1];
                let e2 = &charts[l2];
                let f = if l1 == l2 {
                    // log((e1 - e2)/(X1 - X2)) - log(e1/X1) - log(e2/X2) + log e'(0)
                    let mut q = vec![vec![ZERO; n]; n];
                    for (k, c) in e1.iter().enumerate().take(n + 1).skip(1) {
                        for i in 0..k {
                            let j = k - 1 - i;
                            if i < n && j < n {
                                q[i][j] += c;
                            }
                        }
                    }
                    let mut lq = bi_log(&q, n);
                    let single = |e: &Vec<C64>| -> Vec<C64> {
                        let v: Vec<C64> = (0..n).map(|k| dense::get(e, k + 1)).collect();
                        dense::log(&v, n)
                    };
                    let s1 = single(e1);
                    let s2 = single(e2);
                    let l0 = e1[1].ln();
                    for k in 0..n {
                        lq[k][0] -= s1[k];
                        lq[0][k] -= s2[k];
                    }
                    lq[0][0] += l0;
                    lq
                } else {
                    // log((D + e1 - e2)/D) - log((D + e1)/D) - log((D - e2)/D)
                    let dl = self.punctures[l1] - self.punctures[l2];
                    let mut q = vec![vec![ZERO; n]; n];
                    q[0][0] = ONE;
                    for k in 1..n {
                        q[k][0] += e1[k] / dl;
                        q[0][k] -= e2[k] / dl;
                    }
                    let mut lq = bi_log(&q, n);
                    for k in 0..n {
                        let a = lq[k][0];
                        let b = lq[0][k];
                        if k > 0 {
                            lq[k][0] -= a;
                            lq[0][k] -= b;
                        }
                    }
                    lq
                };
                for d1 in 1..=dmax {
                    for d2 in 1..=dmax {
                        let c = f[d1][d2];
                        if c != ZERO {
                            s.add((vec![0; d.p], vec![(d1 as u32, l1 as u32), (d2 as u32, l2 as u32)]), c);
                        }
                    }
                }
            }
        }
        s.source.push("eo:annulus-curve".into());
        Ok(s.to_prime())
    }

    /// Taylor coefficients of `theta^alpha_k / dt` at `t0`.
    fn theta_taylor(&self, alpha: usize, k: usize, t0: C64, n: usize) -> Vec<C64> {
        let th = self.theta(alpha, k);
        let mut out = vec![ZERO; n];
        let inv = dense::inv(&[t0 - self.branches[alpha].t, ONE], n);
        let mut p = inv.clone();
        for c in th.iter().skip(1) {
            p = dense::mul(&p, &inv, n);
            out = dense::add(&out, &dense::scale(&p, *c), n);
        }
        if th[0] != ZERO {
            out = dense::add(&out, &dense::scale(&inv, th[0]), n);
        }
        out
    }

    /// Taylor coefficients of `dx/dt` at `t0`.
    fn xprime_taylor(&self, t0: C64, n: usize) -> Vec<C64> {
        // x = -log X(t0 + s)
        let xs = self.x_poly_at(t0, n + 1);
        let lg = dense::log(&xs, n + 1);
        dense::scale(&dense::deriv(&lg), -ONE)
    }

    /// `d (F / dx)` as Taylor coefficients of the `dt` component.
    fn d_over_dx(&self, fcoef: &[C64], xp: &[C64], n: usize) -> Vec<C64> {
        let q = dense::mul(fcoef, &dense::inv(xp, n), n);
        dense::deriv(&q)
    }

    /// Lemma checks on Taylor expansions at sample points: the recursion
    /// `theta_{k+1} = -d(theta_k/dx) - sum Bcheck_{k,0} theta_0` and its integrated form.
    pub fn theta_identities(&self, kmax: usize, samples: &[C64]) -> (f64, f64) {
        let bc = self.b_check(kmax + 1);
        let n = 8;
        let mut rec: f64 = 0.0;
        let mut hxi: f64 = 0.0;
        for &t0 in samples {
            let xp = self.xprime_taylor(t0, n + kmax + 2);
            let nn = n + kmax + 2;
            for al in 0..self.m {
                for k in 0..kmax {
                    let lhs = self.theta_taylor(al, k + 1, t0, nn);
                    let mut rhs = dense::scale(&self.d_over_dx(&self.theta_taylor(al, k, t0, nn), &xp, nn), -ONE);
                    for b in 0..self.m {
                        rhs = dense::add(&rhs, &dense::scale(&self.theta_taylor(b, 0, t0, nn), -bc[al][b][k][0]), nn);
                    }
                    let sc = lhs.iter().take(n).map(|c| c.norm()).fold(1e-300, f64::max);
                    for i in 0..n {
                        rec = rec.max((lhs[i] - rhs[i]).norm() / sc);
                    }
                }
                // d hat xi_{alpha,k} = d[(-1)^k (d/dx)^{k-1} (theta_0/dx)]
                let dhat = |b: usize, k: usize| -> Vec<C64> {
                    let t = self.theta_taylor(b, 0, t0, nn);
                    if k == 0 {
                        return t;
                    }
                    let mut f = dense::mul(&t, &dense::inv(&xp, nn), nn);
                    for _ in 1..k {
                        f = dense::mul(&dense::deriv(&f), &dense::inv(&xp, nn), nn);
                    }
                    let sign = if k % 2 == 0 { ONE } else { -ONE };
                    dense::scale(&dense::deriv(&f), sign)
                };
                for k in 0..=kmax {
                    let lhs = self.theta_taylor(al, k, t0, nn);
                    let mut rhs = dhat(al, k);
                    for i in 0..k {
                        for b in 0..self.m {
                            rhs = dense::add(&rhs, &dense::scale(&dhat(b, i), -bc[al][b][k - 1 - i][0]), nn);
                        }
                    }
                    let sc = lhs.iter().take(n - kmax).map(|c| c.norm()).fold(1e-300, f64::max);
                    for i in 0..n - kmax {
                        hxi = hxi.max((lhs[i] - rhs[i]).norm() / sc);
                    }
                }
            }
        }
        (rec, hxi)
    }

    /// `C(z1, z2)` against `(1/2) sum_gamma theta^gamma_0 theta^gamma_0` at sample pairs.
    pub fn c_kernel_check(&self, pairs: &[(C64, C64)]) -> f64 {
        let mut worst: f64 = 0.0;
        for &(t1, t2) in pairs {
            let (x1, xx1) = self.x_derivs(t1);
            let (x2, xx2) = self.x_derivs(t2);
            let dt = t1 - t2;
            let g = 1.0 / (dt * dt * x1 * x2);
            let d1g = -2.0 / (dt.powi(3) * x1 * x2) - xx1 / (dt * dt * x1 * x1 * x2);
            let d2g = 2.0 / (dt.powi(3) * x1 * x2) - xx2 / (dt * dt * x1 * x2 * x2);
            let _ = g;
            let lhs = -x1 * x2 * (d1g / x1 + d2g / x2);
            let mut rhs = ZERO;
            for b in &self.branches {
                let th = self.theta(b.alpha, 0)[1];
                rhs += 0.5 * th * th / ((t1 - b.t).powi(2) * (t2 - b.t).powi(2));
            }
            worst = worst.max((lhs - rhs).norm() / lhs.norm().max(rhs.norm()));
        }
        worst
    }
}

fn x_minus_a(t: C64, f: i64, m: usize, n: usize) -> Vec<C64> {
    // x(t + s) - x(t) = -f log(1 + s/t) - log(P(s)/P(0)),  P(s) = (t + s)^m + 1
    let lin = vec![ONE, 1.0 / t];
    let l1 = dense::log(&lin, n);
    let mut p = dense::pow_int(&[t, ONE], m, n);
    p[0] += 1.0;
    let p0 = p[0];
    let l2 = dense::log(&dense::scale(&p, 1.0 / p0), n);
    (0..n).map(|k| -(dense::get(&l1, k) * f as f64) - dense::get(&l2, k)).collect()
}

fn branch_point(alpha: usize, t: C64, f: i64, m: usize, n: usize) -> Result<BranchPoint, Error> {
    let xs = x_minus_a(t, f, m, n + 2);
    if xs[1].norm() > 1e-10 {
        return Err(Error::Numeric(format!("t = {t} is not a critical point of X")));
    }
    let x2 = xs[2];
    if x2.norm() < 1e-10 {
        return Err(Error::Numeric(format!("branch point at t = {t} is not simple")));
    }
    let g: Vec<C64> = (0..n).map(|k| xs[k + 2] / x2).collect();
    let sq = dense::powc(&g, C64::new(0.5, 0.0), n);
    let mut c = x2.sqrt();
    // orientation: h1 = -1/(c t) real positive
    if (-1.0 / (c * t)).re < 0.0 {
        c = -c;
    }
    let h = -1.0 / (c * t);
    let mut zeta = vec![ZERO; n];
    for k in 1..n {
        zeta[k] = c * sq[k - 1];
    }
    let delta = dense::revert(&zeta, n);
    let x = -(-t.powi(f as i32) * (t.powi(m as i32) + 1.0)).ln();
    Ok(BranchPoint { alpha, t, x, delta, h1: h.re })
}

/// Local data at one branch point.
struct Local {
    al: usize,
    n: usize,
    delta: Laurent,
    tp: Laurent,
    shift: Vec<C64>,
    kern: Vec<Laurent>,
    delta_ser: Vec<C64>,
}

impl Local {
    fn new(c: &SpectralCurve, al: usize, n: usize) -> Local {
        let b = &c.branches[al];
        let delta_ser = b.delta.clone();
        let delta = Laurent::new(1, (1..n).map(|k| dense::get(&delta_ser, k)).collect());
        let tp = Laurent::new(0, dense::deriv(&delta_ser));
        let shift: Vec<C64> = c.branches.iter().map(|o| b.t - o.t).collect();
        // y(zeta) - y(-zeta) = -log(1 + delta(zeta)/t) + log(1 + delta(-zeta)/t)
        let mut u = dense::scale(&delta_ser, 1.0 / b.t);
        u[0] += 1.0;
        let lg = dense::log(&u, n);
        let dy: Vec<C64> = lg.iter().enumerate().map(|(k, x)| if k % 2 == 1 { -2.0 * x } else { ZERO }).collect();
        // 4 zeta (y - ybar) has valuation 2
        let den = Laurent::new(2, (1..n).map(|k| dense::get(&dy, k) * 4.0).collect());
        let den_inv = den.inv();
        let neg: Vec<C64> = delta_ser.iter().enumerate().map(|(k, x)| if k % 2 == 1 { -x } else { *x }).collect();
        let mut kern = Vec::new();
        let (mut pp, mut pm) = (vec![ONE], vec![ONE]);
        for _ in 0..=n + 2 {
            let num: Vec<C64> = (0..n).map(|k| dense::get(&pm, k) - dense::get(&pp, k)).collect();
            kern.push(Laurent::new(0, num).mul(&den_inv).scale(C64::new(KERNEL_SIGN, 0.0)));
            pp = dense::mul(&pp, &delta_ser, n);
            pm = dense::mul(&pm, &neg, n);
        }
        Local { al, n, delta, tp, shift, kern, delta_ser }
    }

    fn kernel(&self, i: usize) -> &Laurent {
        &self.kern[i.min(self.kern.len() - 1)]
    }

    /// `e_{beta,j}(t(zeta)) / d zeta`.
    fn e(&self, beta: usize, j: usize) -> Laurent {
        let base = if beta == self.al {
            self.delta.inv()
        } else {
            let mut s = self.delta_ser.clone();
            s[0] += self.shift[beta];
            Laurent::new(0, dense::inv(&s, self.n))
        };
        let mut p = base.clone();
        for _ in 0..j {
            p = p.mul(&base);
        }
        p.mul(&self.tp)
    }

    /// The same leg at `sigma(z)`, as a form in `zeta`.
    fn ebar(&self, beta: usize, j: usize) -> Laurent {
        self.e(beta, j).reflect().scale(-ONE)
    }

    fn b_leg(&self, nn: usize, bar: bool) -> Laurent {
        let mut p = Laurent::new(0, {
            let mut v = vec![ZERO; self.n];
            v[0] = ONE;
            v
        });
        for _ in 0..nn {
            p = p.mul(&self.delta);
        }
        let l = p.mul(&self.tp).scale(C64::new((nn + 1) as f64, 0.0));
        if bar {
            l.reflect().scale(-ONE)
        } else {
            l
        }
    }

    /// `B(z, sigma(z)) / d zeta^2`.
    fn b_diag(&self) -> Laurent {
        let diff = self.delta.add(&self.delta.reflect().scale(-ONE));
        let inv = diff.inv();
        self.tp.mul(&self.tp.reflect().scale(-ONE)).mul(&inv).mul(&inv)
    }
}

/// `log q(z1, z2)` on total degree `< n`, `q[0][0] != 0`.
fn bi_log(q: &[Vec<C64>], n: usize) -> Vec<Vec<C64>> {
    let q0 = q[0][0];
    // r = q/q0 - 1, log(1 + r) = sum (-1)^{k+1} r^k / k
    let mut r = vec![vec![ZERO; n]; n];
    for i in 0..n {
        for j in 0..n - i {
            r[i][j] = dense::get(q.get(i).map(|v| v.as_slice()).unwrap_or(&[]), j) / q0;
        }
    }
    r[0][0] = ZERO;
    let mut out = vec![vec![ZERO; n]; n];
    out[0][0] = q0.ln();
    let mut p = r.clone();
    for k in 1..n {
        let s = if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
        for i in 0..n {
            for j in 0..n - i {
                out[i][j] += p[i][j] * s;
            }
        }
        p = bi_mul(&p, &r, n);
    }
    out
}

fn bi_mul(a: &[Vec<C64>], b: &[Vec<C64>], n: usize) -> Vec<Vec<C64>> {
    let mut o = vec![vec![ZERO; n]; n];
    for i in 0..n {
        for j in 0..n - i {
            let x = a[i][j];
            if x == ZERO {
                continue;
            }
            for k in 0..n - i - j {
                for l in 0..n - i - j - k {
                    o[i + k][j + l] += x * b[k][l];
                }
            }
        }
    }
    o
}

pub fn omega_diff(a: &Omega, b: &Omega) -> f64 {
    let mut w: f64 = 0.0;
    for (k, v) in a {
        w = w.max((v - b.get(k).copied().unwrap_or_default()).norm());
    }
    for (k, v) in b {
        if !a.contains_key(k) {
            w = w.max(v.norm());
        }
    }
    w
}

pub fn omega_max(a: &Omega) -> f64 {
    a.values().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Largest deviation of `omega` under exchange of two legs, relative to the largest entry.
pub fn omega_symmetry_defect(w: &Omega) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, v) in w {
        for i in 0..k.len() {
            for j in i + 1..k.len() {
                let mut s = k.clone();
                s.swap(i, j);
                worst = worst.max((v - w.get(&s).copied().unwrap_or_default()).norm());
            }
        }
    }
    worst / omega_max(w).max(1e-300)
}

/// `F-check_{g,n}(0; X)` directly from the curve, in the `1'` basis.
pub fn expand(data: &OrbifoldData, g: u32, n: usize, dmax: usize) -> Result<PotentialSeries, Error> {
    let c = SpectralCurve::new(data)?;
    match (g, n) {
        (0, 1) => c.disk_zero(dmax),
        (0, 2) => c.annulus_zero(dmax),
        _ => {
            let (w, _) = c.omega_stable(g, n)?;
            Ok(c.expand_potential(&w, g, n, dmax).to_prime())
        }
    }
}
