//! Group data of `[C^3/G]` from the integers `(r, m, s, f)`.

use std::collections::HashMap;

use num_complex::Complex64;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::{Error, Q};

pub type C64 = Complex64;

/// Fractional part in `[0, 1)`.
pub fn frac(q: Q) -> Q {
    q - q.floor()
}

pub fn turn_to_complex(t: Q) -> C64 {
    let x = 2.0 * std::f64::consts::PI * frac(t).to_f64().unwrap();
    C64::new(x.cos(), x.sin())
}

pub fn q_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct OrbifoldInput {
    pub r: i64,
    pub m: i64,
    pub s: i64,
    pub f: i64,
}

impl OrbifoldInput {
    pub fn new(r: i64, m: i64, s: i64, f: i64) -> Self {
        OrbifoldInput { r, m, s, f }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.r <= 0 {
            return Err(Error::Validation(format!("r must be positive, got {}", self.r)));
        }
        if self.m <= 0 {
            return Err(Error::Validation(format!("m must be positive, got {}", self.m)));
        }
        if self.s < 0 || self.s >= self.r {
            return Err(Error::Validation(format!("s must lie in [0, r), got {}", self.s)));
        }
        if self.f <= 0 {
            return Err(Error::Validation(format!("f must be positive, got {}", self.f)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupElement {
    pub j: i64,
    pub l: i64,
    pub c: [Q; 3],
    pub age: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Age1 {
    /// 1-based index `a` of `tau_a`.
    pub a: usize,
    pub elem: usize,
    pub m_a: i64,
    pub n_a: i64,
}

#[derive(Clone, Debug)]
pub struct OrbifoldData {
    pub input: OrbifoldInput,
    pub order: usize,
    pub w: [Q; 3],
    /// Indexed by `j * m + l`, element `eta1^j eta2^l`.
    pub elements: Vec<GroupElement>,
    pub age1: Vec<Age1>,
    pub genus: usize,
    pub p: usize,
    pub punctures: usize,
    lookup: HashMap<[Q; 3], usize>,
    inverse: Vec<usize>,
}

impl OrbifoldData {
    pub fn r(&self) -> i64 {
        self.input.r
    }
    pub fn m(&self) -> i64 {
        self.input.m
    }

    pub fn index(&self, j: i64, l: i64) -> usize {
        let (r, m) = (self.r(), self.m());
        (j.rem_euclid(r) * m + l.rem_euclid(m)) as usize
    }

    /// Turns of `eta1^j eta2^l`, reduced mod 1.
    fn turns(w: &[Q; 3], m: i64, j: i64, l: i64) -> [Q; 3] {
        let lm = Q::new(l, m);
        [
            frac(w[0] * j),
            frac(w[1] * j + lm),
            frac(w[2] * j - lm),
        ]
    }

    pub fn element_by_turns(&self, c: [Q; 3]) -> Option<usize> {
        self.lookup.get(&[frac(c[0]), frac(c[1]), frac(c[2])]).copied()
    }

    /// `eta1`, which need not be the element stored at `index(1, 0)` (that one wraps mod `r`).
    pub fn eta1(&self) -> usize {
        self.element_by_turns(self.w).expect("eta1 lies in G")
    }

    pub fn eta2(&self) -> usize {
        self.index(0, 1)
    }

    pub fn inv(&self, h: usize) -> usize {
        self.inverse[h]
    }

    pub fn identity(&self) -> usize {
        0
    }

    /// `h(d0, k) = eta1^{d0} eta2^{-k}`.
    pub fn element_of_winding(&self, d0: i64, k: i64) -> Result<usize, Error> {
        if d0 <= 0 {
            return Err(Error::Validation(format!("winding d0 must be >= 1, got {d0}")));
        }
        if k < 0 || k >= self.m() {
            return Err(Error::Validation(format!("class k must lie in [0, m), got {k}")));
        }
        let kq = Q::new(k, self.m());
        let c = [self.w[0] * d0, self.w[1] * d0 - kq, self.w[2] * d0 + kq];
        Ok(self.element_by_turns(c).expect("h(d0,k) lies in G"))
    }

    /// Turn fraction of `chi_alpha(h)`, with `alpha = chi1^j chi2^l` indexed like elements.
    pub fn char_turn(&self, alpha: usize, h: usize) -> Q {
        let m = self.m() as usize;
        let (j, l) = ((alpha / m) as i64, (alpha % m) as i64);
        let c = &self.elements[h].c;
        frac(c[0] * j + c[1] * l)
    }

    pub fn character_value(&self, alpha: usize, h: usize) -> Result<C64, Error> {
        if alpha >= self.order || h >= self.order {
            return Err(Error::Validation(format!(
                "index out of range: alpha={alpha}, h={h}, |G|={}",
                self.order
            )));
        }
        Ok(self.chi(alpha, h))
    }

    pub fn chi(&self, alpha: usize, h: usize) -> C64 {
        turn_to_complex(self.char_turn(alpha, h))
    }

    pub fn w_f64(&self) -> [f64; 3] {
        [q_f64(self.w[0]), q_f64(self.w[1]), q_f64(self.w[2])]
    }

    /// `w_i^e` with `w_3^e := |w_3|^e e^{i pi e}`.
    pub fn w_pow(&self, i: usize, e: f64) -> C64 {
        let w = q_f64(self.w[i]);
        if w > 0.0 {
            C64::new(w.powf(e), 0.0)
        } else {
            C64::from_polar(w.abs().powf(e), std::f64::consts::PI * e)
        }
    }

    /// `sqrt(w1 w2 w3) = i sqrt|w1 w2 w3|`.
    pub fn sqrt_w(&self) -> C64 {
        let [a, b, c] = self.w_f64();
        C64::new(0.0, (a * b * c).abs().sqrt())
    }

    pub fn age(&self, h: usize) -> i64 {
        self.elements[h].age
    }

    /// `(m_a, n_a)` style lattice point of `h` in the `e`-basis.
    pub fn box_point(&self, h: usize) -> [Q; 3] {
        let c = &self.elements[h].c;
        let (r, m, s) = (self.r(), self.m(), self.input.s);
        [c[0] * r, -c[0] * s + c[1] * m, c[0] + c[1] + c[2]]
    }
}

pub fn build_orbifold(input: OrbifoldInput) -> Result<OrbifoldData, Error> {
    input.validate()?;
    let OrbifoldInput { r, m, s, f } = input;
    let w1 = Q::new(1, r);
    let w2 = Q::new(s + r * f, r * m);
    let w = [w1, w2, -w1 - w2];
    let order = (r * m) as usize;

    let mut elements = Vec::with_capacity(order);
    let mut lookup = HashMap::new();
    for j in 0..r {
        for l in 0..m {
            let c = OrbifoldData::turns(&w, m, j, l);
            let sum = c[0] + c[1] + c[2];
            debug_assert!(sum.is_integer());
            let age = sum.to_integer();
            if lookup.insert(c, elements.len()).is_some() {
                return Err(Error::Validation(format!(
                    "eta1^j eta2^l is not injective for (r,m,s)=({r},{m},{s})"
                )));
            }
            elements.push(GroupElement { j, l, c, age });
        }
    }

    let inverse = elements
        .iter()
        .map(|e| lookup[&[frac(-e.c[0]), frac(-e.c[1]), frac(-e.c[2])]])
        .collect();

    let mut data = OrbifoldData {
        input,
        order,
        w,
        elements,
        age1: Vec::new(),
        genus: 0,
        p: 0,
        punctures: 0,
        lookup,
        inverse,
    };

    let mut age1 = Vec::new();
    for (idx, e) in data.elements.iter().enumerate() {
        if e.age == 1 {
            let bp = data.box_point(idx);
            age1.push(Age1 {
                a: age1.len() + 1,
                elem: idx,
                m_a: bp[0].to_integer(),
                n_a: bp[1].to_integer(),
            });
        }
    }
    data.genus = data.elements.iter().filter(|e| e.age == 2).count();
    data.p = age1.len();
    data.punctures = data.p + 3 - data.genus;
    data.age1 = age1;
    Ok(data)
}

/// Change of basis on `H^*(B mu_m)`: `psi_l = (1/m) sum_k omega^{-kl} 1'_k`.
/// Coordinates in the `1'` basis map to `psi` coordinates by `u_l = sum_k omega^{kl} v_k`.
pub fn prime_to_psi(v: &[C64], m: usize) -> Result<Vec<C64>, Error> {
    if v.len() != m {
        return Err(Error::Validation(format!("expected length {m}, got {}", v.len())));
    }
    Ok((0..m)
        .map(|l| {
            (0..m)
                .map(|k| v[k] * turn_to_complex(Q::new((k * l) as i64, m as i64)))
                .sum()
        })
        .collect())
}

pub fn psi_to_prime(u: &[C64], m: usize) -> Result<Vec<C64>, Error> {
    if u.len() != m {
        return Err(Error::Validation(format!("expected length {m}, got {}", u.len())));
    }
    Ok((0..m)
        .map(|k| {
            (0..m)
                .map(|l| u[l] * turn_to_complex(Q::new(-((k * l) as i64), m as i64)))
                .sum::<C64>()
                / m as f64
        })
        .collect())
}

#[derive(Serialize)]
pub struct ElementJson {
    pub j: i64,
    pub l: i64,
    pub c: Vec<String>,
    pub age: i64,
}

#[derive(Serialize)]
pub struct Age1Json {
    pub a: usize,
    pub j: i64,
    pub l: i64,
    pub m_a: i64,
    pub n_a: i64,
}

#[derive(Serialize)]
pub struct OrbifoldJson {
    pub r: i64,
    pub m: i64,
    pub s: i64,
    pub f: i64,
    pub order: usize,
    pub w: Vec<String>,
    pub elements: Vec<ElementJson>,
    pub age1: Vec<Age1Json>,
    pub genus: usize,
    pub p: usize,
    pub punctures: usize,
}

fn qs(q: &Q) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

impl OrbifoldData {
    pub fn to_json(&self) -> OrbifoldJson {
        OrbifoldJson {
            r: self.input.r,
            m: self.input.m,
            s: self.input.s,
            f: self.input.f,
            order: self.order,
            w: self.w.iter().map(qs).collect(),
            elements: self
                .elements
                .iter()
                .map(|e| ElementJson {
                    j: e.j,
                    l: e.l,
                    c: e.c.iter().map(qs).collect(),
                    age: e.age,
                })
                .collect(),
            age1: self
                .age1
                .iter()
                .map(|a| Age1Json {
                    a: a.a,
                    j: self.elements[a.elem].j,
                    l: self.elements[a.elem].l,
                    m_a: a.m_a,
                    n_a: a.n_a,
                })
                .collect(),
            genus: self.genus,
            p: self.p,
            punctures: self.punctures,
        }
    }
}

/// Catalog used by tests and `check all`.
pub const CATALOG: [(i64, i64, i64, i64); 7] = [
    (1, 1, 0, 1),
    (1, 1, 0, 2),
    (2, 1, 0, 1),
    (1, 2, 0, 1),
    (1, 3, 0, 1),
    (3, 1, 1, 1),
    (2, 2, 0, 1),
];

pub fn catalog() -> Vec<OrbifoldData> {
    CATALOG
        .iter()
        .map(|&(r, m, s, f)| build_orbifold(OrbifoldInput::new(r, m, s, f)).unwrap())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orb(r: i64, m: i64, s: i64, f: i64) -> OrbifoldData {
        build_orbifold(OrbifoldInput::new(r, m, s, f)).unwrap()
    }

    #[test]
    fn trivial_group() {
        let d = orb(1, 1, 0, 1);
        assert_eq!(d.order, 1);
        assert_eq!(d.w, [Q::from(1), Q::from(1), Q::from(-2)]);
        assert_eq!((d.p, d.genus, d.punctures), (0, 0, 3));
    }

    #[test]
    fn z3_pure_r() {
        let d = orb(3, 1, 1, 1);
        assert_eq!(d.w, [Q::new(1, 3), Q::new(4, 3), Q::new(-5, 3)]);
        let ages: Vec<i64> = (0..3).map(|j| d.age(d.index(j, 0))).collect();
        assert_eq!(ages, vec![0, 1, 2]);
        assert_eq!((d.p, d.genus), (1, 1));
        let z = d.chi(d.index(1, 0), d.index(1, 0));
        assert!((z - turn_to_complex(Q::new(1, 3))).norm() < 1e-15);
        assert_eq!(d.age(d.element_of_winding(2, 0).unwrap()), 2);
    }

    #[test]
    fn z3_pure_m() {
        let d = orb(1, 3, 0, 1);
        for k in 1..3 {
            let e = &d.elements[d.index(0, k)];
            assert_eq!(e.c, [Q::from(0), Q::new(k, 3), Q::from(1) - Q::new(k, 3)]);
            assert_eq!(e.age, 1);
        }
        assert_eq!((d.p, d.genus, d.punctures), (2, 0, 5));
        let h = d.element_of_winding(1, 0).unwrap();
        assert_eq!(d.elements[h].c, [Q::from(0), Q::new(1, 3), Q::new(2, 3)]);
    }

    #[test]
    fn rejects_bad_input() {
        for (r, m, s, f, field) in [(0, 1, 0, 1, "r"), (1, 0, 0, 1, "m"), (2, 1, 2, 1, "s"), (1, 1, 0, 0, "f")] {
            let e = build_orbifold(OrbifoldInput::new(r, m, s, f)).unwrap_err();
            assert!(e.to_string().contains(field), "{e}");
        }
        assert!(orb(1, 1, 0, 1).element_of_winding(0, 0).is_err());
    }

    #[test]
    fn structure_on_catalog() {
        for d in catalog() {
            assert_eq!(1 + d.p + d.genus, d.order);
            assert_eq!(d.elements.iter().filter(|e| e.age == 0).count(), 1);
            // Box points are integral and distinct
            let mut seen = std::collections::HashSet::new();
            for h in 0..d.order {
                let bp = d.box_point(h);
                assert!(bp.iter().all(|x| x.is_integer()));
                assert!(seen.insert(bp.map(|x| x.to_integer())));
            }
            for a in &d.age1 {
                assert_eq!(d.box_point(a.elem)[2], Q::from(1));
            }
            // c_i(h) + c_i(h^-1) = 1 - delta
            for h in 1..d.order {
                let hi = d.inv(h);
                for i in 0..3 {
                    let (a, b) = (d.elements[h].c[i], d.elements[hi].c[i]);
                    let delta = if *a.numer() == 0 { 1 } else { 0 };
                    assert_eq!(a + b, Q::from(1 - delta));
                }
            }
            // exact orthogonality: sum of turns over G must vanish unless trivial
            for a in 0..d.order {
                for b in 0..d.order {
                    let mut counts: HashMap<Q, usize> = HashMap::new();
                    for h in 0..d.order {
                        let t = frac(d.char_turn(b, h) - d.char_turn(a, h));
                        *counts.entry(t).or_default() += 1;
                    }
                    if a == b {
                        assert_eq!(counts.len(), 1);
                    } else {
                        let s: C64 = counts.iter().map(|(t, &n)| turn_to_complex(*t) * n as f64).sum();
                        assert!(s.norm() < 1e-12);
                    }
                }
            }
            // characters are homomorphisms
            for a in 0..d.order {
                for h in 0..d.order {
                    for k in 0..d.order {
                        let c = &d.elements[h].c;
                        let e = &d.elements[k].c;
                        let hk = d.element_by_turns([c[0] + e[0], c[1] + e[1], c[2] + e[2]]).unwrap();
                        assert_eq!(frac(d.char_turn(a, h) + d.char_turn(a, k)), d.char_turn(a, hk));
                    }
                }
            }
        }
    }

    #[test]
    fn winding_integrality() {
        for d in catalog() {
            for d0 in 1..8 {
                for k in 0..d.m() {
                    let h = d.element_of_winding(d0, k).unwrap();
                    let c = &d.elements[h].c;
                    assert!((d.w[0] * d0 - c[0]).is_integer());
                    assert!((d.w[1] * d0 - Q::new(k, d.m()) - c[1]).is_integer());
                }
            }
        }
    }

    #[test]
    fn basis_change() {
        let one = C64::new(1.0, 0.0);
        let z = C64::new(0.0, 0.0);
        let v = psi_to_prime(&[one, z], 2).unwrap();
        assert!((v[0] - 0.5).norm() < 1e-15 && (v[1] - 0.5).norm() < 1e-15);
        let u = prime_to_psi(&[one, z], 2).unwrap();
        assert!((u[0] - 1.0).norm() < 1e-15 && (u[1] - 1.0).norm() < 1e-15);
        assert_eq!(prime_to_psi(&[C64::new(3.0, 1.0)], 1).unwrap(), vec![C64::new(3.0, 1.0)]);
        let x = [C64::new(0.3, -1.2), C64::new(2.0, 0.5), C64::new(-0.7, 0.1)];
        let back = psi_to_prime(&prime_to_psi(&x, 3).unwrap(), 3).unwrap();
        for i in 0..3 {
            assert!((back[i] - x[i]).norm() < 1e-14);
        }
        assert!(prime_to_psi(&x, 2).is_err());
    }
}
