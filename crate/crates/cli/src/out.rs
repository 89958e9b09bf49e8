use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use orbigw::{PotentialSeries, C64};

/// Complex number written as `[re, im]` with 17 significant digits.
pub struct Cx(pub C64);

fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

impl Serialize for Cx {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(format!("[{},{}]", num(self.0.re), num(self.0.im))).unwrap();
        raw.serialize(s)
    }
}

/// Real number with 17 significant digits.
pub struct Re(pub f64);

impl Serialize for Re {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawValue::from_string(num(self.0)).unwrap().serialize(s)
    }
}

#[derive(Serialize)]
pub struct Coefficient {
    pub tau: Vec<u32>,
    /// `[winding, class]` per leg.
    pub legs: Vec<[u32; 2]>,
    pub value: Cx,
}

#[derive(Serialize)]
pub struct SeriesJson {
    pub g: u32,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub basis: orbigw::Basis,
    pub sources: Vec<String>,
    pub coefficients: Vec<Coefficient>,
}

impl SeriesJson {
    pub fn new(s: &PotentialSeries) -> Self {
        SeriesJson {
            g: s.g,
            n: s.n,
            p: s.p,
            m: s.m,
            basis: s.basis,
            sources: s.source.clone(),
            coefficients: s
                .coeffs
                .iter()
                .filter(|(_, v)| v.norm() > 0.0)
                .map(|((tau, legs), v)| Coefficient {
                    tau: tau.clone(),
                    legs: legs.iter().map(|&(d, k)| [d, k]).collect(),
                    value: Cx(*v),
                })
                .collect(),
        }
    }

    pub fn table(&self) -> String {
        let mut out = format!("F_{{{},{}}}  basis={:?}  sources={}\n", self.g, self.n, self.basis, self.sources.join(","));
        for c in &self.coefficients {
            let legs: Vec<String> = c.legs.iter().map(|l| format!("X^{}[{}]", l[0], l[1])).collect();
            out.push_str(&format!(
                "tau={:?}  {:<24} {:>25} {:>25}\n",
                c.tau,
                legs.join(" "),
                num(c.value.0.re),
                num(c.value.0.im)
            ));
        }
        out
    }
}

#[derive(Serialize)]
pub struct Envelope<T: Serialize> {
    pub result: T,
    pub provenance: serde_json::Value,
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}
