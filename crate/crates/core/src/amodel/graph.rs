//! Decorated stable graphs with open, primary and dilaton leaves.
//!
//! Enumeration runs in two stages. Undecorated topologies (vertex genera, edges, where the
//! open and primary leaves sit) are generated by brute force and de-duplicated by a
//! canonical form minimized over vertex permutations. Each topology is then decorated with
//! dilaton leaves, heights and markings; decorated graphs are de-duplicated under the
//! vertex automorphisms of their topology.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use once_cell::sync::Lazy;
use parking_lot::Mutex;
use serde::Serialize;

use crate::orbifold::OrbifoldData;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Vertex {
    pub genus: u32,
    pub marking: usize,
}

/// Unordered edge; `heights[i]` sits on the half-edge at `ends[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Edge {
    pub ends: [usize; 2],
    pub heights: [u32; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Leaf {
    pub vertex: usize,
    pub height: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DecoratedGraph {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    /// Ordered: entry `j` is the open leaf `l_{j+1}`.
    pub open: Vec<Leaf>,
    pub primary: Vec<Leaf>,
    pub dilaton: Vec<Leaf>,
    pub aut: u64,
}

impl DecoratedGraph {
    pub fn genus(&self) -> u32 {
        let s: i64 = self.vertices.iter().map(|v| v.genus as i64).sum();
        (s + self.edges.len() as i64 - self.vertices.len() as i64 + 1) as u32
    }

    /// All heights at `v`: half-edges first, then open, primary and dilaton leaves.
    pub fn heights_at(&self, v: usize) -> Vec<u32> {
        let mut h = Vec::new();
        for e in &self.edges {
            for i in 0..2 {
                if e.ends[i] == v {
                    h.push(e.heights[i]);
                }
            }
        }
        for l in self.open.iter().chain(&self.primary).chain(&self.dilaton) {
            if l.vertex == v {
                h.push(l.height);
            }
        }
        h
    }

    pub fn valence(&self, v: usize) -> usize {
        self.heights_at(v).len()
    }

    pub fn is_stable(&self) -> bool {
        (0..self.vertices.len()).all(|v| 2 * self.vertices[v].genus as i64 - 2 + self.valence(v) as i64 > 0)
    }

    /// Per-vertex dimension constraint; graphs failing it have zero weight.
    pub fn dimension_ok(&self) -> bool {
        (0..self.vertices.len()).all(|v| {
            let h = self.heights_at(v);
            h.iter().map(|&k| k as i64).sum::<i64>() == 3 * self.vertices[v].genus as i64 - 3 + h.len() as i64
        })
    }

    pub fn max_height(&self) -> u32 {
        (0..self.vertices.len()).flat_map(|v| self.heights_at(v)).max().unwrap_or(0)
    }

    /// Canonical key: identical for isomorphic graphs.
    pub fn canonical_key(&self) -> Encoding {
        let v = self.vertices.len();
        permutations(v).iter().map(|p| self.encode(p)).min().unwrap()
    }

    fn encode(&self, p: &[usize]) -> Encoding {
        let mut verts = vec![(0u32, 0usize, Vec::new(), Vec::new()); self.vertices.len()];
        for (i, x) in self.vertices.iter().enumerate() {
            let mut prim: Vec<u32> = self.primary.iter().filter(|l| l.vertex == i).map(|l| l.height).collect();
            let mut dil: Vec<u32> = self.dilaton.iter().filter(|l| l.vertex == i).map(|l| l.height).collect();
            prim.sort_unstable();
            dil.sort_unstable();
            verts[p[i]] = (x.genus, x.marking, prim, dil);
        }
        let mut edges: Vec<[(usize, u32); 2]> = self
            .edges
            .iter()
            .map(|e| {
                let a = (p[e.ends[0]], e.heights[0]);
                let b = (p[e.ends[1]], e.heights[1]);
                if a <= b {
                    [a, b]
                } else {
                    [b, a]
                }
            })
            .collect();
        edges.sort_unstable();
        let open = self.open.iter().map(|l| (p[l.vertex], l.height)).collect();
        Encoding { verts, edges, open }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Encoding {
    verts: Vec<(u32, usize, Vec<u32>, Vec<u32>)>,
    edges: Vec<[(usize, u32); 2]>,
    open: Vec<(usize, u32)>,
}

fn permutations(n: usize) -> Arc<Vec<Vec<usize>>> {
    static CACHE: Lazy<Mutex<HashMap<usize, Arc<Vec<Vec<usize>>>>>> = Lazy::new(|| Mutex::new(HashMap::new()));
    if let Some(p) = CACHE.lock().get(&n) {
        return p.clone();
    }
    fn rec(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    let out = Arc::new(out);
    CACHE.lock().insert(n, out.clone());
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Topology {
    genus: Vec<u32>,
    edges: Vec<(usize, usize)>,
    open: Vec<usize>,
    primary: Vec<u32>,
}

impl Topology {
    fn relabel(&self, p: &[usize]) -> Topology {
        let mut genus = vec![0; self.genus.len()];
        let mut primary = vec![0; self.genus.len()];
        for i in 0..self.genus.len() {
            genus[p[i]] = self.genus[i];
            primary[p[i]] = self.primary[i];
        }
        let mut edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .map(|&(a, b)| {
                let (a, b) = (p[a], p[b]);
                (a.min(b), a.max(b))
            })
            .collect();
        edges.sort_unstable();
        let open = self.open.iter().map(|&v| p[v]).collect();
        Topology { genus, edges, open, primary }
    }

    fn canonical(&self) -> Topology {
        permutations(self.genus.len()).iter().map(|p| self.relabel(p)).min().unwrap()
    }

    fn valence(&self, v: usize) -> u32 {
        let e: u32 = self.edges.iter().map(|&(a, b)| (a == v) as u32 + (b == v) as u32).sum();
        e + self.open.iter().filter(|&&x| x == v).count() as u32 + self.primary[v]
    }

    fn connected(&self) -> bool {
        let n = self.genus.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &(a, b) in &self.edges {
                for (x, y) in [(a, b), (b, a)] {
                    if x == v && !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// Stable connected topologies with genus `g`, `n` ordered open leaves and `l` primary leaves.
fn topologies(g: u32, n: usize, l: u32) -> Vec<Topology> {
    let chi = 2 * g as i64 - 2 + n as i64 + l as i64;
    if chi <= 0 {
        return Vec::new();
    }
    let mut out = HashSet::new();
    for nv in 1..=chi as usize {
        // genus vectors, non-increasing
        let mut gvs = Vec::new();
        fn gv(left: u32, slots: usize, cap: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if slots == 0 {
                out.push(cur.clone());
                return;
            }
            for x in (0..=cap.min(left)).rev() {
                cur.push(x);
                gv(left - x, slots - 1, x, cur, out);
                cur.pop();
            }
        }
        gv(g, nv, g, &mut Vec::new(), &mut gvs);
        let pairs: Vec<(usize, usize)> = (0..nv).flat_map(|a| (a..nv).map(move |b| (a, b))).collect();
        for genus in gvs {
            let sg: i64 = genus.iter().map(|&x| x as i64).sum();
            let ne = g as i64 - 1 + nv as i64 - sg;
            if ne < nv as i64 - 1 {
                continue;
            }
            // valence cap from stability of the other vertices
            let cap: Vec<i64> = genus.iter().map(|&gv| chi - (nv as i64 - 1) + 2 - 2 * gv as i64).collect();
            let mut edge_sets = Vec::new();
            fn es(
                start: usize,
                left: usize,
                pairs: &[(usize, usize)],
                val: &mut Vec<i64>,
                cap: &[i64],
                cur: &mut Vec<(usize, usize)>,
                out: &mut Vec<Vec<(usize, usize)>>,
            ) {
                if left == 0 {
                    out.push(cur.clone());
                    return;
                }
                for i in start..pairs.len() {
                    let (a, b) = pairs[i];
                    val[a] += 1;
                    val[b] += 1;
                    if val[a] <= cap[a] && val[b] <= cap[b] {
                        cur.push((a, b));
                        es(i, left - 1, pairs, val, cap, cur, out);
                        cur.pop();
                    }
                    val[a] -= 1;
                    val[b] -= 1;
                }
            }
            es(0, ne as usize, &pairs, &mut vec![0; nv], &cap, &mut Vec::new(), &mut edge_sets);
            for edges in edge_sets {
                let base = Topology { genus: genus.clone(), edges, open: vec![0; n], primary: vec![0; nv] };
                if !base.connected() {
                    continue;
                }
                for oc in 0..nv.pow(n as u32) {
                    let mut open = vec![0; n];
                    let mut x = oc;
                    for o in open.iter_mut() {
                        *o = x % nv;
                        x /= nv;
                    }
                    let mut prims = Vec::new();
                    fn comp(left: u32, slots: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
                        if slots == 1 {
                            cur.push(left);
                            out.push(cur.clone());
                            cur.pop();
                            return;
                        }
                        for x in 0..=left {
                            cur.push(x);
                            comp(left - x, slots - 1, cur, out);
                            cur.pop();
                        }
                    }
                    comp(l, nv, &mut Vec::new(), &mut prims);
                    for primary in prims {
                        let t = Topology { genus: base.genus.clone(), edges: base.edges.clone(), open: open.clone(), primary };
                        let stable = (0..nv).all(|v| 2 * t.genus[v] as i64 - 2 + t.valence(v) as i64 > 0);
                        if stable {
                            out.insert(t.canonical());
                        }
                    }
                }
            }
        }
    }
    let mut v: Vec<Topology> = out.into_iter().collect();
    v.sort();
    v
}

/// Compositions of `total` into `parts.len()` slots with per-slot minimum.
fn height_vectors(total: i64, mins: &[u32]) -> Vec<Vec<u32>> {
    let floor: i64 = mins.iter().map(|&x| x as i64).sum();
    if total < floor {
        return Vec::new();
    }
    let mut out = Vec::new();
    fn rec(i: usize, left: i64, mins: &[u32], cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i + 1 == mins.len() {
            cur.push(left as u32 + mins[i]);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for x in 0..=left {
            cur.push(x as u32 + mins[i]);
            rec(i + 1, left - x, mins, cur, out);
            cur.pop();
        }
    }
    if mins.is_empty() {
        if total == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(0, total - floor, mins, &mut Vec::new(), &mut out);
    out
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

/// `|Aut|` from the vertex permutations fixing the encoding, times edge, loop and leaf symmetries.
fn aut_count(gr: &DecoratedGraph, vperms: &[Vec<usize>]) -> u64 {
    let id: Vec<usize> = (0..gr.vertices.len()).collect();
    let base = gr.encode(&id);
    let nv = vperms.iter().filter(|p| gr.encode(p) == base).count() as u64;
    let mut mult: BTreeMap<[(usize, u32); 2], usize> = BTreeMap::new();
    for e in &base.edges {
        *mult.entry(*e).or_insert(0) += 1;
    }
    let mut a = nv;
    for (e, k) in &mult {
        a *= factorial(*k);
        if e[0] == e[1] {
            a *= 2u64.pow(*k as u32);
        }
    }
    for (_, _, prim, dil) in &base.verts {
        for list in [prim, dil] {
            let mut i = 0;
            while i < list.len() {
                let j = list[i..].iter().take_while(|&&x| x == list[i]).count();
                a *= factorial(j);
                i += j;
            }
        }
    }
    a
}

type CacheKey = (usize, u32, usize, u32);
static GRAPHS: Lazy<Mutex<HashMap<CacheKey, Arc<Vec<DecoratedGraph>>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

/// Every decorated graph in `Gamma_{g,l,n}` with markings in a group of order `order` that
/// satisfies all per-vertex dimension constraints, each once up to isomorphism.
pub fn enumerate_with_order(order: usize, g: u32, n: usize, l: u32) -> Arc<Vec<DecoratedGraph>> {
    let key = (order, g, n, l);
    if let Some(v) = GRAPHS.lock().get(&key) {
        return v.clone();
    }
    let mut out = Vec::new();
    for t in topologies(g, n, l) {
        decorate(&t, order, &mut out);
    }
    let out = Arc::new(out);
    GRAPHS.lock().insert(key, out.clone());
    out
}

pub fn enumerate_graphs(data: &OrbifoldData, g: u32, n: usize, l: u32) -> Arc<Vec<DecoratedGraph>> {
    enumerate_with_order(data.order, g, n, l)
}

fn decorate(t: &Topology, order: usize, out: &mut Vec<DecoratedGraph>) {
    let nv = t.genus.len();
    let vperms: Vec<Vec<usize>> = permutations(nv).iter().filter(|p| t.relabel(p) == *t).cloned().collect();
    let dims: Vec<i64> = (0..nv).map(|v| 3 * t.genus[v] as i64 - 3 + t.valence(v) as i64).collect();
    let mut seen = HashSet::new();
    // dilaton counts per vertex
    let mut dcounts = vec![Vec::new()];
    for v in 0..nv {
        let mut next = Vec::new();
        for c in &dcounts {
            for d in 0..=dims[v].max(0) {
                let mut c2: Vec<i64> = c.clone();
                c2.push(d);
                next.push(c2);
            }
        }
        dcounts = next;
    }
    for dc in dcounts {
        // per-vertex slot lists: (kind, index) -> heights chosen per vertex
        let mut per_vertex: Vec<Vec<Vec<u32>>> = Vec::with_capacity(nv);
        let mut slots: Vec<Vec<Slot>> = vec![Vec::new(); nv];
        for (ei, &(a, b)) in t.edges.iter().enumerate() {
            slots[a].push(Slot::Edge(ei, 0));
            slots[b].push(Slot::Edge(ei, 1));
        }
        for (j, &v) in t.open.iter().enumerate() {
            slots[v].push(Slot::Open(j));
        }
        for v in 0..nv {
            for _ in 0..t.primary[v] {
                slots[v].push(Slot::Primary);
            }
            for _ in 0..dc[v] {
                slots[v].push(Slot::Dilaton);
            }
        }
        let mut ok = true;
        for v in 0..nv {
            let mins: Vec<u32> = slots[v].iter().map(|s| if matches!(s, Slot::Dilaton) { 2 } else { 0 }).collect();
            let total = 3 * t.genus[v] as i64 - 3 + slots[v].len() as i64;
            let hv = height_vectors(total, &mins);
            if hv.is_empty() {
                ok = false;
                break;
            }
            per_vertex.push(hv);
        }
        if !ok {
            continue;
        }
        let mut choice = vec![0usize; nv];
        loop {
            let mut edges: Vec<Edge> =
                t.edges.iter().map(|&(a, b)| Edge { ends: [a, b], heights: [0, 0] }).collect();
            let mut open = vec![Leaf { vertex: 0, height: 0 }; t.open.len()];
            let mut primary = Vec::new();
            let mut dilaton = Vec::new();
            for v in 0..nv {
                let hs = &per_vertex[v][choice[v]];
                for (s, &h) in slots[v].iter().zip(hs) {
                    match *s {
                        Slot::Edge(e, side) => edges[e].heights[side] = h,
                        Slot::Open(j) => open[j] = Leaf { vertex: v, height: h },
                        Slot::Primary => primary.push(Leaf { vertex: v, height: h }),
                        Slot::Dilaton => dilaton.push(Leaf { vertex: v, height: h }),
                    }
                }
            }
            primary.sort();
            dilaton.sort();
            let skeleton = DecoratedGraph {
                vertices: (0..nv).map(|v| Vertex { genus: t.genus[v], marking: 0 }).collect(),
                edges,
                open,
                primary,
                dilaton,
                aut: 1,
            };
            // markings
            for mk in 0..order.pow(nv as u32) {
                let mut gr = skeleton.clone();
                let mut x = mk;
                for vx in gr.vertices.iter_mut() {
                    vx.marking = x % order;
                    x /= order;
                }
                let key = vperms.iter().map(|p| gr.encode(p)).min().unwrap();
                if seen.insert(key) {
                    gr.aut = aut_count(&gr, &vperms);
                    out.push(gr);
                }
            }
            // advance height choice
            let mut v = 0;
            while v < nv {
                choice[v] += 1;
                if choice[v] < per_vertex[v].len() {
                    break;
                }
                choice[v] = 0;
                v += 1;
            }
            if v == nv {
                break;
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Slot {
    Edge(usize, usize),
    Open(usize),
    Primary,
    Dilaton,
}

/// Independent `|Aut|`: counts bijections of vertices and half-edges/leaves preserving all
/// labels by backtracking. Intended for graphs with few vertices.
pub fn naive_aut(gr: &DecoratedGraph) -> u64 {
    // half-edges: edges contribute two, leaves one; open leaves are fixed pointwise.
    let nv = gr.vertices.len();
    let mut count = 0u64;
    for p in permutations(nv).iter() {
        if (0..nv).any(|v| gr.vertices[p[v]] != gr.vertices[v]) {
            continue;
        }
        if gr.open.iter().any(|l| p[l.vertex] != l.vertex) {
            continue;
        }
        // primary/dilaton leaves: bijections mapping leaf at v with height h to a leaf at p[v] with h
        let mut leaf_maps = 1u64;
        for list in [&gr.primary, &gr.dilaton] {
            leaf_maps *= count_bijections(list.len(), |i, j| {
                p[list[i].vertex] == list[j].vertex && list[i].height == list[j].height
            });
        }
        if leaf_maps == 0 {
            continue;
        }
        // edges with orientation choice: map edge i (oriented) to edge j with either orientation
        let ne = gr.edges.len();
        let mut oriented = vec![Vec::new(); ne];
        for i in 0..ne {
            for j in 0..ne {
                let a = &gr.edges[i];
                let b = &gr.edges[j];
                let mut c = 0;
                for flip in [false, true] {
                    let (b0, b1) = if flip { (1, 0) } else { (0, 1) };
                    if p[a.ends[0]] == b.ends[b0] && p[a.ends[1]] == b.ends[b1] && a.heights[0] == b.heights[b0] && a.heights[1] == b.heights[b1] {
                        c += 1;
                    }
                }
                oriented[i].push(c);
            }
        }
        let em = count_weighted_bijections(&oriented);
        count += leaf_maps * em;
    }
    count
}

fn count_bijections(n: usize, ok: impl Fn(usize, usize) -> bool) -> u64 {
    let w: Vec<Vec<u64>> = (0..n).map(|i| (0..n).map(|j| ok(i, j) as u64).collect()).collect();
    count_weighted_bijections(&w)
}

fn count_weighted_bijections(w: &[Vec<u64>]) -> u64 {
    fn rec(i: usize, used: &mut Vec<bool>, w: &[Vec<u64>]) -> u64 {
        if i == w.len() {
            return 1;
        }
        let mut s = 0;
        for j in 0..w.len() {
            if !used[j] && w[i][j] > 0 {
                used[j] = true;
                s += w[i][j] * rec(i + 1, used, w);
                used[j] = false;
            }
        }
        s
    }
    rec(0, &mut vec![false; w.len()], w)
}
