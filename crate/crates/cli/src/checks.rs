//! The verification suite behind `orbigw check`.

use std::collections::HashMap;

use clap::ValueEnum;
use serde::Serialize;

use orbigw::amodel::rmatrix::{edge_table, r_matrix};
use orbigw::amodel::{f_gn_a, AModel, Windows};
use orbigw::bmodel::{critical_points, f_gn_b, f_matrix, stirling_check, BModel, DilatonIndex};
use orbigw::eo::{omega_diff, omega_max, supported, SpectralCurve};
use orbigw::mirrormap::{brute_force_indices, constraint_indices, mirror_map_series};
use orbigw::orbifold::{catalog, frac};
use orbigw::psi::{psi_intersection, psi_slow};
use orbigw::{enumerate_graphs, Error, OrbifoldData, PotentialSeries, Precision, Q, C64};

use crate::out::Re;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Which {
    All,
    Main,
    Graphs,
    Bridge,
    Symplectic,
    Stirling,
    Eo,
    Unstable,
    Lemmas,
    Psi,
    Structure,
    Mirrormap,
}

#[derive(Serialize)]
pub struct Row {
    pub check: &'static str,
    pub deviation: Re,
    pub tolerance: Re,
    pub pass: bool,
    pub note: String,
}

fn row(check: &'static str, deviation: f64, tolerance: f64, note: String) -> Row {
    Row { check, deviation: Re(deviation), tolerance: Re(tolerance), pass: deviation <= tolerance, note }
}

const SECTORS: [(u32, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 1), (1, 2), (2, 1)];

fn factor(d: &OrbifoldData, g: u32, n: usize) -> f64 {
    let s = if (g as usize + n) % 2 == 1 { 1.0 } else { -1.0 };
    s * (d.order as f64).powi(n as i32)
}

fn tag(d: &OrbifoldData) -> String {
    let i = d.input;
    format!("({},{},{},{})", i.r, i.m, i.s, i.f)
}

fn eo_catalog() -> Vec<OrbifoldData> {
    catalog().into_iter().filter(supported).collect()
}

fn tau_zero(s: &PotentialSeries) -> (PotentialSeries, PotentialSeries) {
    let mut zero = s.clone();
    let mut rest = s.clone();
    zero.coeffs.retain(|k, _| k.0.iter().all(|&t| t == 0));
    rest.coeffs.retain(|k, _| k.0.iter().any(|&t| t > 0));
    (zero, rest)
}

fn main_theorem(prec: Precision) -> Result<Vec<Row>, Error> {
    let mut win = Windows::new(2, 5);
    win.precision = prec;
    let mut worst: f64 = 0.0;
    let mut disk: f64 = 0.0;
    for d in catalog() {
        for (g, n) in SECTORS {
            let a = f_gn_a(&d, g, n, win)?;
            let b = f_gn_b(&d, g, n, win)?;
            let k = C64::new(factor(&d, g, n), 0.0);
            if (g, n) == (0, 1) {
                let (a0, a1) = tau_zero(&a);
                let (b0, b1) = tau_zero(&b);
                disk = disk.max(b0.compare(&a0, k, 1e-14).max_rel);
                worst = worst.max(b1.compare(&a1, k, 1e-14).max_rel);
            } else {
                worst = worst.max(b.compare(&a, k, 1e-14).max_rel);
            }
        }
    }
    let tol = if prec == Precision::Extended { 1e-12 } else { 1e-8 };
    Ok(vec![
        row("main: stable and tau-linear sectors", worst, tol, "catalog, tau-degree <= 2, windings <= 5".into()),
        row("main: disk at tau = 0", disk, tol, "the curve gives the opposite overall sign".into()),
    ])
}

fn graphs() -> Result<Vec<Row>, Error> {
    let mut worst: f64 = 0.0;
    let mut count = 0usize;
    for d in catalog() {
        for (g, n) in SECTORS {
            let kmax = Windows::new(2, 5).height_bound(g, n);
            let a = AModel::new(&d, kmax, 5, Precision::Double)?;
            let b = BModel::new(&d, kmax, 5, Precision::Double)?;
            let k = factor(&d, g, n);
            for l in 0..=2 {
                for gr in enumerate_graphs(&d, g, n, l).iter() {
                    let wa = a.weight(gr)?;
                    let wb = b.weight(gr)?;
                    let scale = wa.values().chain(wb.values()).map(|v| v.norm()).fold(0.0, f64::max);
                    if scale == 0.0 {
                        continue;
                    }
                    count += 1;
                    for key in wa.keys().chain(wb.keys()) {
                        let x = wa.get(key).copied().unwrap_or_default();
                        let y = wb.get(key).copied().unwrap_or_default();
                        worst = worst.max((y - x * k).norm() / scale);
                    }
                }
            }
        }
    }
    Ok(vec![row("per-graph weights", worst, 1e-9, format!("{count} graphs"))])
}

fn bridge() -> Vec<Row> {
    let mut worst: f64 = 0.0;
    for d in catalog() {
        let f = f_matrix(&d, 8);
        let r = r_matrix(&d, 8);
        for a in 0..d.order {
            for b in 0..d.order {
                for k in 0..=8 {
                    worst = worst.max((r.coeff_neg(b, a, k) - f.coeff(a, b, k)).norm());
                }
            }
        }
    }
    vec![row("R(-z) against f", worst, 1e-12, "orders <= 8".into())]
}

fn symplectic() -> Result<Vec<Row>, Error> {
    let (mut sym, mut rem): (f64, f64) = (0.0, 0.0);
    for d in catalog() {
        let r = r_matrix(&d, 9);
        sym = sym.max(r.symplectic_defect());
        rem = rem.max(edge_table(&r, 4)?.remainder);
    }
    Ok(vec![
        row("R symplectic", sym, 1e-12, "through z^8".into()),
        row("edge division remainder", rem, 1e-11, String::new()),
    ])
}

fn stirling() -> Result<Vec<Row>, Error> {
    let mut worst: f64 = 1.0;
    for d in catalog() {
        let wmin = d.w_f64().iter().fold(f64::INFINITY, |a, b| a.min(b.abs()));
        let base = (10.0 / wmin).ceil().max(20.0) as i64;
        let us = [Q::from(base), Q::from(2 * base), Q::from(4 * base)];
        for h in 0..d.order {
            let r = stirling_check(&d, h, &us, 4)?;
            for x in &r.ratios {
                worst = worst.max((x / r.expected).max(r.expected / x));
            }
        }
    }
    Ok(vec![row("Stirling ladder ratio / 2^5", worst, 3.0, "M = 4".into())])
}

pub fn eo_rows(d: &OrbifoldData, which: Option<&str>) -> Result<Vec<Row>, Error> {
    let c = SpectralCurve::new(d)?;
    let mut rows = Vec::new();
    if which.is_none() || which == Some("pants") {
        let w = c.omega(0, 3)?;
        rows.push(row("pants", omega_diff(&w, &c.pants()) / omega_max(&w), 1e-9, tag(d)));
    }
    if which.is_none() || which == Some("doss") {
        for (g, n) in [(0, 3), (0, 4), (1, 1), (1, 2), (2, 1)] {
            let (w, ord) = c.omega_stable(g, n)?;
            let s = c.doss(g, n, DilatonIndex::Shifted)?;
            rows.push(row("graph sum", omega_diff(&w, &s) / omega_max(&w), 1e-9, format!("{} ({g},{n}) order {ord}", tag(d))));
        }
    }
    if which.is_none() || which == Some("c-kernel") || which == Some("theta") {
        let pts = [C64::from_polar(1.7, 0.4), C64::from_polar(2.3, 2.9), C64::from_polar(0.3, -1.3)];
        if which != Some("theta") {
            let mut pairs = Vec::new();
            for (i, a) in pts.iter().enumerate() {
                for b in pts.iter().skip(i + 1) {
                    pairs.push((*a, *b));
                }
                for t in &c.punctures {
                    pairs.push((*a, t + C64::new(0.05, 0.02)));
                }
                for br in &c.branches {
                    pairs.push((*a, br.t + C64::new(-0.03, 0.04)));
                }
            }
            rows.push(row("kernel C", c.c_kernel_check(&pairs), 1e-10, tag(d)));
        }
        if which != Some("c-kernel") {
            let (r, h) = c.theta_identities(2, &pts);
            rows.push(row("theta recursion", r, 1e-10, tag(d)));
            rows.push(row("theta antiderivative", h, 1e-10, tag(d)));
        }
    }
    Ok(rows)
}

fn unstable() -> Result<Vec<Row>, Error> {
    let (mut disk, mut ann): (f64, f64) = (0.0, 0.0);
    for d in eo_catalog() {
        let c = SpectralCurve::new(&d)?;
        let a = AModel::new(&d, 2, 6, Precision::Double)?;
        let (a0, _) = tau_zero(&a.disk_extras()?);
        let g = d.order as f64;
        disk = disk.max(c.disk_zero(6)?.compare(&a0, C64::new(g, 0.0), 1e-12).max_rel);
        ann = ann.max(c.annulus_zero(6)?.compare(&a.annulus_zero()?, C64::new(-g * g, 0.0), 1e-12).max_rel);
    }
    Ok(vec![
        row("disk at tau = 0", disk, 1e-9, "against +|G| F_{0,1}".into()),
        row("annulus at tau = 0", ann, 1e-9, "against -|G|^2 F_{0,2}".into()),
    ])
}

fn psi() -> Vec<Row> {
    let mut bad = 0usize;
    let mut total = 0usize;
    for g in 0..=3u32 {
        for n in 1..=5usize {
            let dim = 3 * g as i64 - 3 + n as i64;
            if dim < 0 || 2 * g as i64 - 2 + n as i64 <= 0 {
                continue;
            }
            let mut ks = vec![0u32; n];
            loop {
                if ks.iter().map(|&k| k as i64).sum::<i64>() == dim {
                    total += 1;
                    let v = psi_intersection(g, &ks).unwrap();
                    if v != psi_slow(g, &ks) {
                        bad += 1;
                    }
                }
                // odometer over 0..=dim
                let mut i = 0;
                while i < n {
                    ks[i] += 1;
                    if ks[i] as i64 <= dim {
                        break;
                    }
                    ks[i] = 0;
                    i += 1;
                }
                if i == n {
                    break;
                }
            }
        }
    }
    vec![row("psi oracle mismatches", bad as f64, 0.0, format!("{total} keys, g <= 3, n <= 5"))]
}

fn structure() -> Result<Vec<Row>, Error> {
    let mut bad = 0usize;
    for d in catalog() {
        let n = d.order;
        let boxes: std::collections::HashSet<_> = (0..n).map(|h| d.box_point(h)).collect();
        bad += (boxes.len() != n) as usize;
        bad += (1 + d.p + d.genus != n) as usize;
        bad += (d.punctures != d.p + 3 - d.genus) as usize;
        bad += (critical_points(&d).len() != n) as usize;
        if supported(&d) {
            let c = SpectralCurve::new(&d)?;
            bad += (c.branches.len() != n) as usize;
            bad += (c.punctures.len() != d.m() as usize) as usize;
        }
        for a in 0..n {
            for b in 0..n {
                let mut counts: HashMap<Q, usize> = HashMap::new();
                for h in 0..n {
                    *counts.entry(frac(d.char_turn(b, h) - d.char_turn(a, h))).or_default() += 1;
                }
                let k = counts.len();
                let uniform = counts.values().all(|&c| c * k == n);
                bad += ((a == b) != (k == 1) || !uniform) as usize;
            }
        }
    }
    Ok(vec![row("structural mismatches", bad as f64, 0.0, "catalog".into())])
}

fn mirrormap() -> Result<Vec<Row>, Error> {
    let mut rt: f64 = 0.0;
    let mut bad = 0usize;
    for d in catalog() {
        let mm = mirror_map_series(&d, 7)?;
        for a in 0..d.p {
            let mut e = vec![0; d.p];
            e[a] = 1;
            bad += (mm.tau[a].get(&e) != Some(&1.0)) as usize;
        }
        rt = rt.max(mm.round_trip_defect());
        bad += (constraint_indices(&d, 6) != brute_force_indices(&d, 6)) as usize;
    }
    Ok(vec![
        row("mirror map round trip", rt, 1e-12, "degree 7".into()),
        row("mirror map linear term / filter mismatches", bad as f64, 0.0, "filter through degree 6".into()),
    ])
}

pub fn run(which: Which, prec: Precision) -> Result<Vec<Row>, Error> {
    use Which::*;
    let mut rows = Vec::new();
    let all = which == All;
    if all || which == Structure {
        rows.extend(structure()?);
    }
    if all || which == Psi {
        rows.extend(psi());
    }
    if all || which == Bridge {
        rows.extend(bridge());
    }
    if all || which == Symplectic {
        rows.extend(symplectic()?);
    }
    if all || which == Stirling {
        rows.extend(stirling()?);
    }
    if all || which == Mirrormap {
        rows.extend(mirrormap()?);
    }
    if all || which == Eo {
        for d in eo_catalog() {
            rows.extend(eo_rows(&d, Some("pants"))?);
            rows.extend(eo_rows(&d, Some("doss"))?);
        }
    }
    if all || which == Lemmas {
        for d in eo_catalog() {
            rows.extend(eo_rows(&d, Some("c-kernel"))?);
            rows.extend(eo_rows(&d, Some("theta"))?);
        }
    }
    if all || which == Unstable {
        rows.extend(unstable()?);
    }
    if all || which == Graphs {
        rows.extend(graphs()?);
    }
    if all || which == Main {
        rows.extend(main_theorem(prec)?);
    }
    Ok(rows)
}
