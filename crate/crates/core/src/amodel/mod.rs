//! A-model: disk function, descendant leaf series, and the decorated graph sum for
//! `F_{g,n}`.

pub mod graph;
pub mod rmatrix;

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::gamma::gamma_ratio;
use crate::orbifold::{turn_to_complex, OrbifoldData};
use crate::potential::{Basis, ClassSeries, CoeffKey, PotentialSeries};
use crate::psi::psi_f64;
use crate::{Error, Precision, Q, C64};

pub use graph::{enumerate_graphs, DecoratedGraph};
pub use rmatrix::{edge_table, r_matrix, EdgeTable, RMatrix};

/// Truncation windows shared by both graph sums.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Windows {
    /// Largest total degree in `tau`.
    pub tau_degree: u32,
    /// Largest winding `d` on each leg.
    pub winding: usize,
    pub precision: Precision,
}

impl Windows {
    pub fn new(tau_degree: u32, winding: usize) -> Self {
        Windows { tau_degree, winding, precision: Precision::Double }
    }

    /// Largest height any graph in `Gamma_{g, <=L, n}` can carry.
    pub fn height_bound(&self, g: u32, n: usize) -> usize {
        // a lone dilaton leaf can carry one more than the non-dilaton dimension
        (3 * g as i64 - 2 + n as i64 + self.tau_degree as i64).max(2) as usize
    }
}

/// `D'(d0, k)` at `v = 1`.
pub fn disk_function(data: &OrbifoldData, d0: i64, k: i64, prec: Precision) -> Result<f64, Error> {
    let h = data.element_of_winding(d0, k)?;
    let c = data.elements[h].c;
    let m = data.m();
    let w = data.w;
    let fl = (w[2] * d0 + Q::new(k, m)).floor().to_integer();
    let sign = if fl.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let g = gamma_ratio(
        &[(w[0] + w[1]) * d0 + c[2]],
        &[w[0] * d0 - c[0] + 1, w[1] * d0 - c[1] + 1],
        prec,
    )?;
    let age = data.age(h);
    Ok(-sign / m as f64 * (d0 as f64).powi(1 - age as i32) * g)
}

/// `Phi^h_a(X)` in the `1'` basis, windings `1..=dmax`.
pub fn phi(data: &OrbifoldData, h: usize, a: i32, dmax: usize, prec: Precision) -> Result<ClassSeries, Error> {
    let m = data.m() as usize;
    let mut s = ClassSeries::zero(m, dmax);
    for d0 in 1..=dmax as i64 {
        for k in 0..m as i64 {
            if data.element_of_winding(d0, k)? != h {
                continue;
            }
            let dp = disk_function(data, d0, k, prec)?;
            let leg = -turn_to_complex(Q::new(-k, 2 * m as i64));
            let class = (m - k as usize) % m;
            s.c[class][d0 as usize] += leg * dp * (d0 as f64).powi(a) / data.order as f64;
        }
    }
    Ok(s)
}

/// `prod_i w_i^{e_i}` with the fixed branch for `w_3`.
fn w_prod(data: &OrbifoldData, e: [f64; 3]) -> C64 {
    (0..3).map(|i| data.w_pow(i, e[i])).product()
}

fn c_f64(data: &OrbifoldData, h: usize) -> [f64; 3] {
    let c = data.elements[h].c;
    [0, 1, 2].map(|i| crate::orbifold::q_f64(c[i]))
}

/// `tilde xi^gamma_a(X)`.
pub fn xi_tilde(data: &OrbifoldData, gamma: usize, a: i32, dmax: usize, prec: Precision) -> Result<ClassSeries, Error> {
    if a < -2 {
        return Err(Error::Validation(format!("xi_tilde index a = {a} below -2")));
    }
    let phis: Vec<ClassSeries> = (0..data.order).map(|h| phi(data, h, a, dmax, prec)).collect::<Result<_, _>>()?;
    Ok(xi_tilde_from(data, gamma, &phis))
}

fn xi_tilde_from(data: &OrbifoldData, gamma: usize, phis: &[ClassSeries]) -> ClassSeries {
    let m = data.m() as usize;
    let dmax = phis[0].dmax;
    let mut s = ClassSeries::zero(m, dmax);
    for (h, ph) in phis.iter().enumerate() {
        let c = c_f64(data, h);
        let f = data.chi(gamma, data.inv(h)) * w_prod(data, [1.0 - c[0], 1.0 - c[1], 1.0 - c[2]]) * data.order as f64;
        s.add_scaled(ph, f);
    }
    s
}

/// Precomputed leaf and edge tables for one orbifold and window.
pub struct AModel {
    pub data: OrbifoldData,
    pub kmax: usize,
    pub dmax: usize,
    pub r: RMatrix,
    pub edges: EdgeTable,
    /// `[gamma][a]`, `a = 0..=kmax`.
    pub xi: Vec<Vec<ClassSeries>>,
    /// `[alpha][k]`.
    pub open_leaf: Vec<Vec<ClassSeries>>,
    /// `[alpha][k][a - 1]`.
    pub primary_leaf: Vec<Vec<Vec<C64>>>,
    /// `[alpha][k]`, zero for `k < 2`.
    pub dilaton_leaf: Vec<Vec<C64>>,
    pub precision: Precision,
}

impl AModel {
    pub fn new(data: &OrbifoldData, kmax: usize, dmax: usize, precision: Precision) -> Result<AModel, Error> {
        let n = data.order;
        let r = r_matrix(data, 2 * kmax + 1);
        let edges = edge_table(&r, kmax)?;
        let mut xi = vec![Vec::new(); n];
        for a in 0..=kmax as i32 {
            let phis: Vec<ClassSeries> =
                (0..n).map(|h| phi(data, h, a, dmax, precision)).collect::<Result<_, _>>()?;
            for (gmm, row) in xi.iter_mut().enumerate() {
                row.push(xi_tilde_from(data, gmm, &phis));
            }
        }
        let pref = C64::new(1.0, 0.0) / (data.sqrt_w() * n as f64);
        let m = data.m() as usize;
        let mut open_leaf = Vec::with_capacity(n);
        let mut primary_leaf = Vec::with_capacity(n);
        let mut dilaton_leaf = Vec::with_capacity(n);
        for al in 0..n {
            let mut ol = Vec::new();
            let mut pl = Vec::new();
            let mut dl = Vec::new();
            for k in 0..=kmax {
                let mut s = ClassSeries::zero(m, dmax);
                for b in 0..n {
                    for a in 0..=k {
                        s.add_scaled(&xi[b][a], pref * r.coeff_neg(b, al, k - a));
                    }
                }
                ol.push(s);
                let mut v = Vec::with_capacity(data.p);
                for ag in &data.age1 {
                    let c = c_f64(data, ag.elem);
                    let wc = w_prod(data, c);
                    let mut t = C64::default();
                    for b in 0..n {
                        t += r.coeff_neg(b, al, k) * data.chi(b, ag.elem);
                    }
                    v.push(pref * wc * t);
                }
                pl.push(v);
                let mut dv = C64::default();
                if k >= 2 {
                    for b in 0..n {
                        dv -= pref * r.coeff_neg(b, al, k - 1);
                    }
                }
                dl.push(dv);
            }
            open_leaf.push(ol);
            primary_leaf.push(pl);
            dilaton_leaf.push(dl);
        }
        Ok(AModel { data: data.clone(), kmax, dmax, r, edges, xi, open_leaf, primary_leaf, dilaton_leaf, precision })
    }

    pub fn vertex_base(&self) -> C64 {
        self.data.sqrt_w() * self.data.order as f64
    }

    /// `w_A` of one graph (not divided by `|Aut|`), keyed like [`PotentialSeries`].
    pub fn raw_weight(&self, gr: &DecoratedGraph) -> Result<BTreeMap<CoeffKey, C64>, Error> {
        let leaves = Leaves {
            open: &|a, k| &self.open_leaf[a][k],
            primary: &|a, k| self.primary_leaf[a][k].clone(),
            dilaton: &|a, k| self.dilaton_leaf[a][k],
            edge: &|a, b, k, l| self.edges.get(a, b, k, l),
        };
        assemble(gr, self.kmax, self.data.p, self.vertex_base(), 1.0, &leaves)
    }

    pub fn weight(&self, gr: &DecoratedGraph) -> Result<BTreeMap<CoeffKey, C64>, Error> {
        let mut w = self.raw_weight(gr)?;
        for v in w.values_mut() {
            *v /= gr.aut as f64;
        }
        Ok(w)
    }

    /// `Phi^1_{-2} + sum_a tau_a Phi^{h_a}_{-1}`.
    pub fn disk_extras(&self) -> Result<PotentialSeries, Error> {
        let d = &self.data;
        let mut s = PotentialSeries::new(0, 1, d.p, d.m() as usize, Basis::Prime);
        let put = |s: &mut PotentialSeries, tau: Vec<u32>, cs: &ClassSeries| {
            for (k, dd, v) in cs.entries() {
                s.add((tau.clone(), vec![(dd as u32, k as u32)]), v);
            }
        };
        put(&mut s, vec![0; d.p], &phi(d, d.identity(), -2, self.dmax, self.precision)?);
        for (i, ag) in d.age1.iter().enumerate() {
            let mut t = vec![0; d.p];
            t[i] = 1;
            put(&mut s, t, &phi(d, ag.elem, -1, self.dmax, self.precision)?);
        }
        s.source.push("amodel:disk-phi".into());
        Ok(s)
    }

    /// The same extras through the `tilde xi` tables.
    pub fn disk_extras_dual(&self) -> Result<PotentialSeries, Error> {
        let d = &self.data;
        let n = d.order;
        let pref = C64::new(1.0, 0.0) / (w_prod(d, [1.0; 3]) * (n * n) as f64);
        let mut s = PotentialSeries::new(0, 1, d.p, d.m() as usize, Basis::Prime);
        let mut zero = ClassSeries::zero(d.m() as usize, self.dmax);
        for g in 0..n {
            zero.add_scaled(&self.xi[g][0].euler_pow(-2), pref);
        }
        for (k, dd, v) in zero.entries() {
            s.add((vec![0; d.p], vec![(dd as u32, k as u32)]), v);
        }
        for (i, ag) in d.age1.iter().enumerate() {
            let wc = w_prod(d, c_f64(d, ag.elem));
            let mut one = ClassSeries::zero(d.m() as usize, self.dmax);
            for g in 0..n {
                one.add_scaled(&self.xi[g][0].euler_pow(-1), pref * wc * d.chi(g, ag.elem));
            }
            let mut t = vec![0; d.p];
            t[i] = 1;
            for (k, dd, v) in one.entries() {
                s.add((t.clone(), vec![(dd as u32, k as u32)]), v);
            }
        }
        Ok(s)
    }

    /// `F_{0,2}(0; X1, X2)` from `|G| sum_h e_h Phi^h_0 Phi^{h^-1}_0`.
    pub fn annulus_zero(&self) -> Result<PotentialSeries, Error> {
        let d = &self.data;
        let mut s = PotentialSeries::new(0, 2, d.p, d.m() as usize, Basis::Prime);
        let phis: Vec<ClassSeries> =
            (0..d.order).map(|h| phi(d, h, 0, self.dmax, self.precision)).collect::<Result<_, _>>()?;
        for h in 0..d.order {
            let c = d.elements[h].c;
            let e: C64 = (0..3).filter(|&i| c[i] == Q::from(0)).map(|i| d.w_pow(i, 1.0)).product();
            for (k1, d1, v1) in phis[h].entries() {
                for (k2, d2, v2) in phis[d.inv(h)].entries() {
                    let val = e * v1 * v2 * d.order as f64 / (d1 + d2) as f64;
                    s.add((vec![0; d.p], vec![(d1 as u32, k1 as u32), (d2 as u32, k2 as u32)]), val);
                }
            }
        }
        s.source.push("amodel:annulus-phi".into());
        Ok(s)
    }

    pub fn annulus_zero_dual(&self) -> PotentialSeries {
        let d = &self.data;
        let n = d.order;
        let pref = C64::new(1.0, 0.0) / (w_prod(d, [1.0; 3]) * (n * n) as f64);
        let mut s = PotentialSeries::new(0, 2, d.p, d.m() as usize, Basis::Prime);
        for g in 0..n {
            for (k1, d1, v1) in self.xi[g][0].entries() {
                for (k2, d2, v2) in self.xi[g][0].entries() {
                    s.add((vec![0; d.p], vec![(d1 as u32, k1 as u32), (d2 as u32, k2 as u32)]), pref * v1 * v2 / (d1 + d2) as f64);
                }
            }
        }
        s
    }
}

/// Leaf and edge coefficient providers for [`assemble`].
pub(crate) struct Leaves<'a> {
    pub open: &'a (dyn Fn(usize, usize) -> &'a ClassSeries + Sync),
    pub primary: &'a (dyn Fn(usize, usize) -> Vec<C64> + Sync),
    pub dilaton: &'a (dyn Fn(usize, usize) -> C64 + Sync),
    pub edge: &'a (dyn Fn(usize, usize, usize, usize) -> C64 + Sync),
}

/// Product of vertex factors `base^{2g-2+val} <...>`, edges and leaves, times `sign`.
pub(crate) fn assemble(
    gr: &DecoratedGraph,
    kmax: usize,
    p: usize,
    base: C64,
    sign: f64,
    lv: &Leaves,
) -> Result<BTreeMap<CoeffKey, C64>, Error> {
    if gr.max_height() as usize > kmax {
        return Err(Error::Window(format!("height window {kmax} too small for graph {gr:?}")));
    }
    let mut scalar = C64::new(sign, 0.0);
    for (v, vx) in gr.vertices.iter().enumerate() {
        let hs = gr.heights_at(v);
        let val = hs.len() as i32;
        let psi = psi_f64(vx.genus, &hs);
        if psi == 0.0 {
            return Ok(BTreeMap::new());
        }
        scalar *= base.powi(2 * vx.genus as i32 - 2 + val) * psi;
    }
    let mk = |v: usize| gr.vertices[v].marking;
    for e in &gr.edges {
        scalar *= (lv.edge)(mk(e.ends[0]), mk(e.ends[1]), e.heights[0] as usize, e.heights[1] as usize);
    }
    for l in &gr.dilaton {
        scalar *= (lv.dilaton)(mk(l.vertex), l.height as usize);
    }
    let mut tau: BTreeMap<Vec<u32>, C64> = BTreeMap::new();
    tau.insert(vec![0; p], scalar);
    for l in &gr.primary {
        let v = (lv.primary)(mk(l.vertex), l.height as usize);
        let mut next = BTreeMap::new();
        for (deg, c) in &tau {
            for (a, x) in v.iter().enumerate() {
                let mut d2 = deg.clone();
                d2[a] += 1;
                *next.entry(d2).or_insert(C64::default()) += c * x;
            }
        }
        tau = next;
    }
    let mut legs: Vec<(Vec<(u32, u32)>, C64)> = vec![(Vec::new(), C64::new(1.0, 0.0))];
    for l in &gr.open {
        let s = (lv.open)(mk(l.vertex), l.height as usize);
        let ent = s.entries();
        let mut next = Vec::with_capacity(legs.len() * ent.len());
        for (key, c) in &legs {
            for &(k, d, x) in &ent {
                let mut k2 = key.clone();
                k2.push((d as u32, k as u32));
                next.push((k2, c * x));
            }
        }
        legs = next;
    }
    let mut out = BTreeMap::new();
    for (deg, c) in &tau {
        if c.norm() == 0.0 {
            continue;
        }
        for (key, x) in &legs {
            out.insert((deg.clone(), key.clone()), c * x);
        }
    }
    Ok(out)
}

/// Sum of `w / |Aut|` over all graphs, in enumeration order. Chunked so that only a
/// bounded number of per-graph tables is alive at once.
pub(crate) fn graph_sum(
    graphs: &[DecoratedGraph],
    weight: &(dyn Fn(&DecoratedGraph) -> Result<BTreeMap<CoeffKey, C64>, Error> + Sync),
    into: &mut PotentialSeries,
) -> Result<(), Error> {
    for chunk in graphs.chunks(2048) {
        let parts: Vec<BTreeMap<CoeffKey, C64>> = chunk
            .par_iter()
            .map(|gr| {
                weight(gr).map(|mut w| {
                    for v in w.values_mut() {
                        *v /= gr.aut as f64;
                    }
                    w
                })
            })
            .collect::<Result<_, _>>()?;
        for p in parts {
            for (k, v) in p {
                into.add(k, v);
            }
        }
    }
    Ok(())
}

/// `F_{g,n}` through total `tau`-degree `win.tau_degree`, windings `<= win.winding`.
pub fn f_gn_a(data: &OrbifoldData, g: u32, n: usize, win: Windows) -> Result<PotentialSeries, Error> {
    let model = AModel::new(data, win.height_bound(g, n), win.winding, win.precision)?;
    f_gn_a_with(&model, g, n, win.tau_degree)
}

pub fn f_gn_a_with(model: &AModel, g: u32, n: usize, tau_degree: u32) -> Result<PotentialSeries, Error> {
    if n == 0 {
        return Err(Error::Validation("at least one open leg is required".into()));
    }
    let d = &model.data;
    let mut s = PotentialSeries::new(g, n, d.p, d.m() as usize, Basis::Prime);
    for l in 0..=tau_degree {
        let gs = enumerate_graphs(d, g, n, l);
        graph_sum(&gs, &|gr| model.raw_weight(gr), &mut s)?;
    }
    s.source.push("amodel:graph-sum".into());
    if (g, n) == (0, 1) {
        let mut e = model.disk_extras()?;
        e.coeffs.retain(|k, _| k.0.iter().sum::<u32>() <= tau_degree);
        s.merge(&e);
    }
    if (g, n) == (0, 2) {
        s.merge(&model.annulus_zero()?);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gamma::ext;
    use crate::orbifold::{build_orbifold, catalog, OrbifoldInput};

    fn orb(r: i64, m: i64, s: i64, f: i64) -> OrbifoldData {
        build_orbifold(OrbifoldInput::new(r, m, s, f)).unwrap()
    }

    // independent Gamma oracle at extended precision
    fn gamma_big(q: Q) -> f64 {
        let (l, s) = ext::ln_gamma_q(q);
        s * ext::to_f64(&l.exp())
    }

    #[test]
    fn disk_function_values() {
        let d = orb(1, 1, 0, 1);
        // (-1) (-1)^{floor(-2)} Gamma(2)/(Gamma(2)Gamma(2))
        let want = -1.0 * gamma_big(Q::from(2)) / (gamma_big(Q::from(2)) * gamma_big(Q::from(2)));
        assert!((disk_function(&d, 1, 0, Precision::Double).unwrap() - want).abs() < 1e-14);
        let d = orb(1, 1, 0, 2);
        assert!((disk_function(&d, 1, 0, Precision::Double).unwrap() - 1.0).abs() < 1e-14);
        assert!(disk_function(&d, 0, 0, Precision::Double).is_err());
    }

    #[test]
    fn floor_sign_matches_exponential_form() {
        for d in catalog() {
            for d0 in 1..15 {
                for k in 0..d.m() {
                    let h = d.element_of_winding(d0, k).unwrap();
                    let c3 = d.elements[h].c[2];
                    let fl = (d.w[2] * d0 + Q::new(k, d.m())).floor().to_integer();
                    let e = turn_to_complex((d.w[2] * d0 - c3 + Q::new(k, d.m())) / 2);
                    let want = if fl.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                    assert!((e - want).norm() < 1e-13);
                    // the Gamma arguments in the denominator stay positive for d0 >= 1
                    let c = d.elements[h].c;
                    assert!(d.w[0] * d0 - c[0] + 1 > Q::from(0) && d.w[1] * d0 - c[1] + 1 > Q::from(0));
                }
            }
        }
    }

    #[test]
    fn extended_precision_agrees() {
        for d in catalog() {
            for d0 in 1..8 {
                for k in 0..d.m() {
                    let a = disk_function(&d, d0, k, Precision::Double).unwrap();
                    let b = disk_function(&d, d0, k, Precision::Extended).unwrap();
                    assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300), "{:?} {d0} {k}", d.input);
                }
            }
        }
    }

    #[test]
    fn xi_tilde_trivial_group() {
        let d = orb(1, 1, 0, 1);
        let x = xi_tilde(&d, 0, 0, 4, Precision::Double).unwrap();
        assert!((x.get(0, 1) - (-2.0)).norm() < 1e-14);
        let x1 = xi_tilde(&d, 0, 1, 4, Precision::Double).unwrap();
        assert!(x.euler_pow(1).max_abs_diff(&x1) < 1e-14);
        assert!(xi_tilde(&d, 0, -3, 4, Precision::Double).is_err());
    }

    #[test]
    fn phi_support_matches_windings() {
        let d = orb(1, 3, 0, 1);
        for h in 0..d.order {
            let s = phi(&d, h, 0, 9, Precision::Double).unwrap();
            for (class, d0, _) in s.entries() {
                let k = (3 - class) % 3;
                assert_eq!(d.element_of_winding(d0 as i64, k as i64).unwrap(), h);
            }
        }
    }

    #[test]
    fn disk_coefficient_trivial_group() {
        let d = orb(1, 1, 0, 1);
        let f = f_gn_a(&d, 0, 1, Windows::new(0, 3)).unwrap();
        assert!((f.get(&(vec![], vec![(1, 0)])) - 1.0).norm() < 1e-14);
    }

    #[test]
    fn unstable_extras_two_routes() {
        for d in catalog() {
            let model = AModel::new(&d, 2, 6, Precision::Double).unwrap();
            let a = model.disk_extras().unwrap();
            let b = model.disk_extras_dual().unwrap();
            let c = a.compare(&b, C64::new(1.0, 0.0), 1e-13);
            assert!(c.max_rel < 1e-12, "{:?}: {c:?}", d.input);
            let a = model.annulus_zero().unwrap();
            let b = model.annulus_zero_dual();
            let c = a.compare(&b, C64::new(1.0, 0.0), 1e-13);
            assert!(c.max_rel < 1e-12 && c.compared > 0, "{:?}: {c:?}", d.input);
        }
    }

    #[test]
    fn potentials_are_symmetric() {
        for d in [orb(1, 2, 0, 1), orb(2, 1, 0, 1)] {
            for (g, n) in [(0, 2), (0, 3), (1, 2)] {
                let f = f_gn_a(&d, g, n, Windows::new(1, 3)).unwrap();
                assert!(f.symmetry_defect() < 1e-10, "{:?} {g} {n}", d.input);
            }
        }
    }

    #[test]
    fn dimension_violations_vanish() {
        let d = orb(1, 1, 0, 1);
        let model = AModel::new(&d, 3, 3, Precision::Double).unwrap();
        let mut gr = enumerate_graphs(&d, 1, 1, 0)[0].clone();
        gr.open[0].height += 1;
        assert!(model.raw_weight(&gr).unwrap().is_empty());
    }
}
