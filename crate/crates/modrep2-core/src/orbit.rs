//! Conjugacy classes, the conjugation action on the abelian normal
//! subgroups `K^{i,sigma}` and on their duals, and the orbit labels used to
//! sort characters by the orbit they mark on `K`.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::glam::{GElem, Glam, GlamError, Lambda, Subgroup, SubgroupTag};
use crate::group::FiniteGroup;
use crate::tring::{div_pi, reduce, Ring};

/// Conjugacy classes of a group, representatives least in element order.
#[derive(Clone, Debug)]
pub struct ClassTable {
    pub class_of: Vec<u32>,
    pub reps: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Class of the inverses of class `j`.
    pub inverse: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjClass {
    pub rep: usize,
    pub size: usize,
    pub members: Vec<usize>,
}

impl ClassTable {
    pub fn len(&self) -> usize {
        self.reps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reps.is_empty()
    }

    #[inline]
    pub fn class_of(&self, x: usize) -> usize {
        self.class_of[x] as usize
    }

    pub fn group_order(&self) -> usize {
        self.class_of.len()
    }

    pub fn centralizer_order(&self, j: usize) -> usize {
        self.group_order() / self.sizes[j]
    }

    pub fn classes(&self) -> Vec<ConjClass> {
        let mut members = vec![Vec::new(); self.len()];
        for (x, &c) in self.class_of.iter().enumerate() {
            members[c as usize].push(x);
        }
        members
            .into_iter()
            .enumerate()
            .map(|(j, m)| ConjClass { rep: self.reps[j], size: self.sizes[j], members: m })
            .collect()
    }
}

/// Mark-and-expand sweep under conjugation by `gens`.
pub fn conjugacy_classes(g: &dyn FiniteGroup, gens: &[usize]) -> ClassTable {
    let n = g.order();
    let gens: Vec<usize> = if gens.is_empty() && n > 1 { (0..n).collect() } else { gens.to_vec() };
    let ginv: Vec<usize> = gens.iter().map(|&t| g.inv(t)).collect();
    let mut class_of = vec![u32::MAX; n];
    let mut reps = Vec::new();
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for x in 0..n {
        if class_of[x] != u32::MAX {
            continue;
        }
        let id = reps.len() as u32;
        reps.push(x);
        class_of[x] = id;
        let mut size = 1;
        queue.push_back(x);
        while let Some(y) = queue.pop_front() {
            for (&t, &ti) in gens.iter().zip(&ginv) {
                let z = g.mul(g.mul(t, y), ti);
                if class_of[z] == u32::MAX {
                    class_of[z] = id;
                    size += 1;
                    queue.push_back(z);
                }
            }
        }
        sizes.push(size);
    }
    let inverse = reps.iter().map(|&r| class_of[g.inv(r)] as usize).collect();
    ClassTable { class_of, reps, sizes, inverse }
}

/// Closed-form number of conjugacy classes of `G_lambda`.
pub fn class_count_formula(q: u64, lambda: Lambda) -> u64 {
    let Lambda { l1, l2 } = lambda;
    if l2 == 0 {
        q.pow(l1 - 1) * (q - 1)
    } else if l1 == l2 {
        q.pow(2 * l1) - q.pow(l1 - 1)
    } else {
        q.pow(l1 + l2 - 2) * (q * q - q + 2) - q.pow(l1 - 2) * (q + 1)
    }
}

/// Closed-form number of `G_lambda`-orbits on `K`.
pub fn orbits_on_k_formula(q: u64, lambda: Lambda) -> u64 {
    if lambda.is_rectangular() {
        q * q + q
    } else {
        q * q + q + 1
    }
}

/// Brute-force count of conjugation orbits of `G` on its kernel `K`.
pub fn orbits_on_k(g: &Glam) -> Result<u64, GlamError> {
    if g.lambda.l2 < 2 && g.lambda.is_rectangular() {
        return Err(GlamError::BadParams("orbits on K need l2 >= 2 or l1 > l2".into()));
    }
    let k = g.subgroup(SubgroupTag::K)?;
    let gens = g.generators();
    let mut seen = vec![false; k.order()];
    let mut count = 0;
    for start in 0..k.order() {
        if seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut queue = VecDeque::from([k.members[start]]);
        while let Some(x) = queue.pop_front() {
            for &t in gens {
                let y = g.conj(t, x);
                let p = k.position(y).expect("K is normal");
                if !seen[p] {
                    seen[p] = true;
                    queue.push_back(y);
                }
            }
        }
    }
    Ok(count)
}

/// A character of `K^{i,sigma}` written as `[[u, v], [w, z]]` through the pairing
/// `psi_i(u x + v y + pi^sigma (w s + z t))`; `u, v` at level `i`, `w, z` at `i - sigma`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DualChar {
    pub i: u32,
    pub sigma: u32,
    pub u: u32,
    pub v: u32,
    pub w: u32,
    pub z: u32,
}

impl DualChar {
    pub fn zero(i: u32, sigma: u32) -> DualChar {
        DualChar { i, sigma, u: 0, v: 0, w: 0, z: 0 }
    }

    /// Dense index among all characters at `(i, sigma)`.
    pub fn index(&self, g: &Glam) -> usize {
        let n = g.ring(self.i).size() as usize;
        let m = g.ring(self.i - self.sigma).size() as usize;
        ((self.u as usize * n + self.v as usize) * m + self.w as usize) * m + self.z as usize
    }

    pub fn from_index(g: &Glam, i: u32, sigma: u32, mut idx: usize) -> DualChar {
        let n = g.ring(i).size() as usize;
        let m = g.ring(i - sigma).size() as usize;
        let z = (idx % m) as u32;
        idx /= m;
        let w = (idx % m) as u32;
        idx /= m;
        let v = (idx % n) as u32;
        let u = (idx / n) as u32;
        DualChar { i, sigma, u, v, w, z }
    }
}

impl fmt::Display for DualChar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.u, self.v, self.w, self.z)
    }
}

/// Number of characters of `K^{i,sigma}`.
pub fn dual_size(g: &Glam, i: u32, sigma: u32) -> usize {
    let n = g.ring(i).size() as usize;
    let m = g.ring(i - sigma).size() as usize;
    n * n * m * m
}

fn check_range(g: &Glam, i: u32, sigma: u32) -> Result<(), GlamError> {
    let l2 = g.lambda.l2;
    if l2 == 0 || i == 0 || i > l2 || sigma > 1 || i < sigma || 2 * i > l2 + sigma {
        return Err(GlamError::BadParams(format!(
            "K^{{{i},{sigma}}} of G({}) is outside the abelian range",
            g.lambda
        )));
    }
    Ok(())
}

/// Coordinates `(u, v, w, z)` of an element of `K^{i,sigma}`, or `None` outside it.
pub fn k_coords(g: &Glam, i: u32, sigma: u32, x: usize) -> Option<[u32; 4]> {
    let Lambda { l1, l2 } = g.lambda;
    let e = g.elem(x);
    let s = g.base;
    let r1 = g.ring(l1);
    let r2 = g.ring(l2);
    let a1 = r1.sub(e.a, r1.one());
    let d1 = r2.sub(e.d, r2.one());
    let ku = l1 - i;
    let kv = l2 - i;
    let kw = l2 + sigma - i;
    let ok = r1.valuation(a1) >= ku && r2.valuation(e.b) >= kv && r2.valuation(e.c) >= kw && r2.valuation(d1) >= kw;
    ok.then(|| [div_pi(&s, a1, ku), div_pi(&s, e.b, kv), div_pi(&s, e.c, kw), div_pi(&s, d1, kw)])
}

/// The element of `K^{i,sigma}` with the given coordinates.
pub fn k_element(g: &Glam, i: u32, sigma: u32, coords: [u32; 4]) -> usize {
    let Lambda { l1, l2 } = g.lambda;
    let r1 = g.ring(l1);
    let r2 = g.ring(l2);
    let [u, v, w, z] = coords;
    let e = GElem {
        a: r1.add(r1.one(), r1.mul(r1.pi_pow(l1 - i), u)),
        b: r2.mul(r2.pi_pow(l2 - i), v),
        c: r2.mul(r2.pi_pow(l2 + sigma - i), w),
        d: r2.add(r2.one(), r2.mul(r2.pi_pow(l2 + sigma - i), z)),
    };
    g.index_of(&e).expect("coordinates describe a group element")
}

/// `theta(x)` as an exponent modulo `ring(i).psi_modulus()`, for `x` in `K^{i,sigma}`.
pub fn pairing(g: &Glam, theta: &DualChar, x: usize) -> Option<u32> {
    let [u, v, w, z] = k_coords(g, theta.i, theta.sigma, x)?;
    let ri = g.ring(theta.i);
    let rs = g.ring(theta.i - theta.sigma);
    let low = rs.add(rs.mul(theta.w, w), rs.mul(theta.z, z));
    let total = ri.add(ri.add(ri.mul(theta.u, u), ri.mul(theta.v, v)), ri.mul(ri.pi_pow(theta.sigma), low));
    Some(ri.psi(total).0)
}

fn frac(r: &Ring, num: u32, den: u32) -> u32 {
    r.mul(num, r.inv(den))
}

/// The action `<g.theta, t> = <theta, g^-1 t g>` on characters of `K^{i,sigma}`.
///
/// Non-rectangular types use the closed coefficient formula with
/// `e = 1 - a^-1 d^-1 b c delta`; `w, z` are lifted to level `i` and the results
/// reduced back. Rectangular types act by `Theta -> g^-T Theta g^T`.
pub fn dual_action(g: &Glam, x: usize, theta: &DualChar) -> Result<DualChar, GlamError> {
    let (i, sigma) = (theta.i, theta.sigma);
    check_range(g, i, sigma)?;
    let s = g.base;
    let r = g.ring(i);
    let el = g.elem(x);
    let (a, b, c, d) = (reduce(&s, el.a, i), reduce(&s, el.b, i), reduce(&s, el.c, i), reduce(&s, el.d, i));
    let (u, v, w, z) = (theta.u, theta.v, theta.w, theta.z);
    let out = if g.lambda.is_rectangular() {
        let det = r.sub(r.mul(a, d), r.mul(b, c));
        let di = r.inv(det);
        // g^-T = det^-1 [[d, -c], [-b, a]], g^T = [[a, c], [b, d]].
        let (p11, p12, p21, p22) = (r.mul(di, d), r.neg(r.mul(di, c)), r.neg(r.mul(di, b)), r.mul(di, a));
        let (m11, m12) = (r.add(r.mul(p11, u), r.mul(p12, w)), r.add(r.mul(p11, v), r.mul(p12, z)));
        let (m21, m22) = (r.add(r.mul(p21, u), r.mul(p22, w)), r.add(r.mul(p21, v), r.mul(p22, z)));
        [
            r.add(r.mul(m11, a), r.mul(m12, b)),
            r.add(r.mul(m11, c), r.mul(m12, d)),
            r.add(r.mul(m21, a), r.mul(m22, b)),
            r.add(r.mul(m21, c), r.mul(m22, d)),
        ]
    } else {
        let delta = r.pi_pow(g.lambda.l1 - g.lambda.l2);
        let ad = r.mul(a, d);
        let bc = r.mul(b, c);
        let e = r.sub(r.one(), frac(r, r.mul(bc, delta), ad));
        let ei = r.inv(e);
        let nu = r.sub(
            r.add(u, frac(r, r.mul(r.mul(b, delta), v), a)),
            r.add(frac(r, r.mul(r.mul(c, delta), w), d), frac(r, r.mul(r.mul(bc, r.mul(delta, delta)), z), ad)),
        );
        let nv = r.sub(
            r.add(frac(r, r.mul(d, v), a), frac(r, r.mul(c, u), a)),
            r.add(frac(r, r.mul(r.mul(c, delta), z), a), frac(r, r.mul(r.mul(r.mul(c, c), delta), w), ad)),
        );
        let nw = r.sub(
            r.add(frac(r, r.mul(a, w), d), frac(r, r.mul(r.mul(b, delta), z), d)),
            r.add(frac(r, r.mul(b, u), d), frac(r, r.mul(r.mul(r.mul(b, b), delta), v), ad)),
        );
        let nz = r.sub(
            r.add(z, frac(r, r.mul(c, w), d)),
            r.add(frac(r, r.mul(b, v), a), frac(r, r.mul(bc, u), ad)),
        );
        [r.mul(ei, nu), r.mul(ei, nv), r.mul(ei, nw), r.mul(ei, nz)]
    };
    let low = i - sigma;
    Ok(DualChar { i, sigma, u: out[0], v: out[1], w: reduce(&s, out[2], low), z: reduce(&s, out[3], low) })
}

/// All `G`-orbits on the characters of `K^{i,sigma}`, each as a sorted list of dense indices.
pub fn dual_orbits(g: &Glam, i: u32, sigma: u32) -> Result<Vec<Vec<usize>>, GlamError> {
    check_range(g, i, sigma)?;
    let n = dual_size(g, i, sigma);
    let gens = g.generators();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut orbit = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(t) = queue.pop_front() {
            let theta = DualChar::from_index(g, i, sigma, t);
            for &x in gens {
                let y = dual_action(g, x, &theta)?.index(g);
                if !seen[y] {
                    seen[y] = true;
                    orbit.push(y);
                    queue.push_back(y);
                }
            }
        }
        orbit.sort_unstable();
        out.push(orbit);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OrbitTable {
    T1,
    T2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OrbitKind {
    I,
    II,
    III,
    IV,
    V,
}

/// Row of the orbit table a character of `K` belongs to. `param` carries the
/// scalar for row (i).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrbitLabel {
    pub table: OrbitTable,
    pub kind: OrbitKind,
    pub param: Option<u32>,
}

impl OrbitLabel {
    /// Same row, ignoring the scalar parameter.
    pub fn row(&self) -> (OrbitTable, OrbitKind) {
        (self.table, self.kind)
    }
}

impl fmt::Display for OrbitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            OrbitKind::I => "i",
            OrbitKind::II => "ii",
            OrbitKind::III => "iii",
            OrbitKind::IV => "iv",
            OrbitKind::V => "v",
        };
        match self.param {
            Some(p) => write!(f, "{:?}({kind}, {p})", self.table),
            None => write!(f, "{:?}({kind})", self.table),
        }
    }
}

/// Row label of a character of `K = K^{1,0}`.
pub fn classify_orbit(g: &Glam, theta: &DualChar) -> OrbitLabel {
    assert_eq!((theta.i, theta.sigma), (1, 0), "labels are defined on K");
    let r = g.ring(1);
    let (u, v, w, z) = (theta.u, theta.v, theta.w, theta.z);
    if !g.lambda.is_rectangular() {
        let (kind, param) = if u != 0 {
            (OrbitKind::II, None)
        } else {
            match (v != 0, w != 0) {
                (false, false) => (OrbitKind::I, Some(z)),
                (false, true) => (OrbitKind::III, None),
                (true, false) => (OrbitKind::IV, None),
                (true, true) => (OrbitKind::V, None),
            }
        };
        return OrbitLabel { table: OrbitTable::T1, kind, param };
    }
    if v == 0 && w == 0 && u == z {
        return OrbitLabel { table: OrbitTable::T2, kind: OrbitKind::I, param: Some(u) };
    }
    let tr = r.add(u, z);
    let det = r.sub(r.mul(u, z), r.mul(v, w));
    let roots = r.elements().filter(|&x| r.add(r.sub(r.mul(x, x), r.mul(tr, x)), det) == 0).count();
    let kind = match roots {
        2 => OrbitKind::II,
        1 => OrbitKind::III,
        _ => OrbitKind::IV,
    };
    OrbitLabel { table: OrbitTable::T2, kind, param: None }
}

/// `(Tr_delta, Det)` of a character at the half level `(h, eps)`.
pub fn trace_det_invariants(g: &Glam, theta: &DualChar) -> (u32, u32) {
    let s = g.base;
    let r = g.ring(theta.i);
    let rl = g.ring(theta.i - theta.sigma);
    let delta = r.pi_pow(g.lambda.l1 - g.lambda.l2);
    let tr = r.add(theta.u, r.mul(delta, theta.z));
    let (u, v) = (reduce(&s, theta.u, theta.i - theta.sigma), reduce(&s, theta.v, theta.i - theta.sigma));
    let det = rl.sub(rl.mul(u, theta.z), rl.mul(theta.w, v));
    (tr, det)
}

/// Orbit and element counts per row of the orbit table, for `K = K^{1,0}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RowCount {
    pub label: String,
    pub orbits: u64,
    pub elements: u64,
}

pub fn orbit_table(g: &Glam) -> Result<Vec<RowCount>, GlamError> {
    let orbits = dual_orbits(g, 1, 0)?;
    let mut rows: Vec<((OrbitTable, OrbitKind), u64, u64)> = Vec::new();
    for orb in &orbits {
        let label = classify_orbit(g, &DualChar::from_index(g, 1, 0, orb[0]));
        for &t in orb {
            debug_assert_eq!(classify_orbit(g, &DualChar::from_index(g, 1, 0, t)).row(), label.row());
        }
        match rows.iter_mut().find(|r| r.0 == label.row()) {
            Some(r) => {
                r.1 += 1;
                r.2 += orb.len() as u64;
            }
            None => rows.push((label.row(), 1, orb.len() as u64)),
        }
    }
    rows.sort();
    Ok(rows
        .into_iter()
        .map(|((t, k), o, e)| RowCount {
            label: OrbitLabel { table: t, kind: k, param: None }.to_string(),
            orbits: o,
            elements: e,
        })
        .collect())
}

/// Expected `(label, orbits, elements)` rows of the orbit table.
pub fn orbit_table_formula(q: u64, lambda: Lambda) -> Vec<RowCount> {
    let row = |t, k, o, e| RowCount { label: OrbitLabel { table: t, kind: k, param: None }.to_string(), orbits: o, elements: e };
    use OrbitKind::*;
    use OrbitTable::*;
    if lambda.is_rectangular() {
        vec![
            row(T2, I, q, q),
            row(T2, II, q * (q - 1) / 2, q * q * (q * q - 1) / 2),
            row(T2, III, q, q * (q * q - 1)),
            row(T2, IV, q * (q - 1) / 2, q * q * (q - 1) * (q - 1) / 2),
        ]
    } else {
        vec![
            row(T1, I, q, q),
            row(T1, II, q * (q - 1), q.pow(3) * (q - 1)),
            row(T1, III, 1, q * (q - 1)),
            row(T1, IV, 1, q * (q - 1)),
            row(T1, V, q - 1, q * (q - 1) * (q - 1)),
        ]
    }
}

/// Members of `K^{i,sigma}` as a subgroup.
pub fn k_subgroup(g: &Glam, i: u32, sigma: u32) -> Result<Subgroup, GlamError> {
    g.subgroup(SubgroupTag::Kis { i, sigma })
}
