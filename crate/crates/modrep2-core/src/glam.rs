//! The groups `G_lambda = Aut(o_l1 + o_l2)` in their 2x2 matrix realization.
//!
//! An element is stored as `(a, b, c, d)` standing for the matrix
//! `[[a, b*delta], [c, d]]` with `delta = pi^(l1 - l2)`: `a` lives at level
//! `l1`, the other three at level `l2`. Rank-1 groups `o_l^x` are the case
//! `l2 = 0`, where `b, c, d` sit in the zero ring.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::{self, FiniteGroup, Group};
use crate::orbit::{self, ClassTable};
use crate::tring::{div_pi, make_ring, reduce, Backend, Ring, RingError, RingSpec, RingTower};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GlamError {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("invalid type ({0}, {1}): need l1 >= l2 >= 0 and l1 >= 1")]
    BadLambda(u32, u32),
    #[error("cannot parse type {0:?}; expected \"l1,l2\"")]
    ParseLambda(String),
    #[error("type {mu} is not below {lambda}")]
    NotBelow { mu: Lambda, lambda: Lambda },
    #[error("{0}")]
    BadParams(String),
    #[error("member set for {0} is not a subgroup")]
    NotSubgroup(String),
    #[error("instance too large: {size} exceeds the cap {cap}")]
    TooLarge { size: u64, cap: u64 },
    #[error("epimorphism onto {0} is not surjective")]
    NotSurjective(String),
}

/// A type `(l1, l2)` with `l1 >= l2`; `l2 = 0` is the rank-1 type `(l1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Lambda {
    pub l1: u32,
    pub l2: u32,
}

impl Lambda {
    pub fn new(l1: u32, l2: u32) -> Result<Lambda, GlamError> {
        if l1 < l2 || l1 == 0 {
            return Err(GlamError::BadLambda(l1, l2));
        }
        Ok(Lambda { l1, l2 })
    }

    pub fn rank(&self) -> u32 {
        if self.l2 == 0 {
            1
        } else {
            2
        }
    }

    pub fn is_rectangular(&self) -> bool {
        self.l1 == self.l2
    }

    /// `(l1 - 1, l2 - 1)`, defined for rank 2 with `l1 >= 2`.
    pub fn floor(&self) -> Option<Lambda> {
        (self.l2 >= 1 && self.l1 >= 2).then(|| Lambda { l1: self.l1 - 1, l2: self.l2 - 1 })
    }

    pub fn le(&self, other: &Lambda) -> bool {
        self.l1 <= other.l1 && self.l2 <= other.l2
    }
}

impl fmt::Display for Lambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.l1, self.l2)
    }
}

impl FromStr for Lambda {
    type Err = GlamError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GlamError::ParseLambda(s.to_string());
        let (a, b) = s.split_once(',').ok_or_else(bad)?;
        let l1 = a.trim().parse().map_err(|_| bad())?;
        let l2 = b.trim().parse().map_err(|_| bad())?;
        Lambda::new(l1, l2)
    }
}

/// Closed-form order of `G_lambda`.
pub fn group_order(q: u64, lambda: Lambda) -> u64 {
    let Lambda { l1, l2 } = lambda;
    if l2 == 0 {
        q.pow(l1 - 1) * (q - 1)
    } else if l1 == l2 {
        q.pow(4 * l1 - 3) * (q - 1) * (q * q - 1)
    } else {
        q.pow(l1 + 3 * l2 - 2) * (q - 1) * (q - 1)
    }
}

/// `mu` symmetric in `lambda`: every embedding of a type-`mu` module is equivalent.
pub fn symmetric_in(mu: Lambda, lambda: Lambda) -> Result<bool, GlamError> {
    if !mu.le(&lambda) {
        return Err(GlamError::NotBelow { mu, lambda });
    }
    Ok(lambda.is_rectangular() || mu.l1 == lambda.l1)
}

/// Symmetric types of full height and rank strictly between.
pub fn i_lambda(lambda: Lambda) -> Vec<Lambda> {
    (1..lambda.l2).map(|m| Lambda { l1: lambda.l1, l2: m }).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GElem {
    pub a: u32,
    pub b: u32,
    pub c: u32,
    pub d: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubgroupTag {
    K,
    Kis { i: u32, sigma: u32 },
    PGeom1,
    PGeom2,
    PEmbed(Lambda),
    PQuot(Lambda),
    UPlus,
    UMinus,
    VPlus,
    VMinus,
    V1,
    V2,
    DScalars,
    TDiag,
    BUpper,
    ZCenter,
    HHeis,
    /// Scalars times the Heisenberg group, for types `(l, 1)`.
    DHeis,
    ACusp { u: u32, w: u32 },
    NCusp { u: u32, w: u32 },
    Custom(String),
}

impl fmt::Display for SubgroupTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubgroupTag::Kis { i, sigma } => write!(f, "K^{{{i},{sigma}}}"),
            SubgroupTag::PEmbed(mu) => write!(f, "P_embed({mu})"),
            SubgroupTag::PQuot(mu) => write!(f, "P_quot({mu})"),
            SubgroupTag::ACusp { u, w } => write!(f, "A({u},{w})"),
            SubgroupTag::NCusp { u, w } => write!(f, "N({u},{w})"),
            SubgroupTag::Custom(s) => f.write_str(s),
            other => write!(f, "{other:?}"),
        }
    }
}

/// An explicit subgroup of a parent group.
#[derive(Clone, Debug)]
pub struct Subgroup {
    pub tag: SubgroupTag,
    pub parent: String,
    pub members: Vec<usize>,
    pos: Vec<u32>,
}

impl Subgroup {
    /// Wraps a member list after checking closure in `g`.
    pub fn from_members(g: &dyn FiniteGroup, tag: SubgroupTag, mut members: Vec<usize>) -> Result<Subgroup, GlamError> {
        members.sort_unstable();
        if !group::is_subgroup(g, &members) {
            return Err(GlamError::NotSubgroup(tag.to_string()));
        }
        Ok(Self::trusted(g, tag, members))
    }

    fn trusted(g: &dyn FiniteGroup, tag: SubgroupTag, members: Vec<usize>) -> Subgroup {
        let mut pos = vec![u32::MAX; g.order()];
        for (i, &m) in members.iter().enumerate() {
            pos[m] = i as u32;
        }
        Subgroup { tag, parent: g.name(), members, pos }
    }

    pub fn whole(g: &dyn FiniteGroup) -> Subgroup {
        Self::trusted(g, SubgroupTag::Custom("whole".into()), (0..g.order()).collect())
    }

    pub fn order(&self) -> usize {
        self.members.len()
    }

    #[inline]
    pub fn contains(&self, x: usize) -> bool {
        self.pos[x] != u32::MAX
    }

    #[inline]
    pub fn position(&self, x: usize) -> Option<usize> {
        let p = self.pos[x];
        (p != u32::MAX).then_some(p as usize)
    }

    pub fn intersect(&self, g: &dyn FiniteGroup, other: &Subgroup, tag: SubgroupTag) -> Subgroup {
        let members = self.members.iter().copied().filter(|&x| other.contains(x)).collect();
        Self::trusted(g, tag, members)
    }

    pub fn is_abelian(&self, g: &dyn FiniteGroup) -> bool {
        let gens = group::generators(g, &self.members);
        gens.iter().all(|&x| gens.iter().all(|&y| g.mul(x, y) == g.mul(y, x)))
    }

    pub fn is_normal(&self, g: &dyn FiniteGroup, ggens: &[usize]) -> bool {
        let hgens = group::generators(g, &self.members);
        ggens.iter().all(|&t| hgens.iter().all(|&h| self.contains(g.conj(t, h))))
    }
}

/// A subgroup viewed as a group in its own right (element `i` = `members[i]`).
pub struct SubgroupView<'a> {
    pub parent: &'a dyn FiniteGroup,
    pub sub: &'a Subgroup,
}

impl FiniteGroup for SubgroupView<'_> {
    fn order(&self) -> usize {
        self.sub.order()
    }
    fn identity(&self) -> usize {
        self.sub.position(self.parent.identity()).unwrap()
    }
    fn mul(&self, x: usize, y: usize) -> usize {
        self.sub.position(self.parent.mul(self.sub.members[x], self.sub.members[y])).unwrap()
    }
    fn inv(&self, x: usize) -> usize {
        self.sub.position(self.parent.inv(self.sub.members[x])).unwrap()
    }
    fn name(&self) -> String {
        format!("{} in {}", self.sub.tag, self.sub.parent)
    }
}

/// A surjection from a subgroup of `G` onto a target group.
#[derive(Clone, Debug)]
pub struct Epi {
    pub source: Subgroup,
    /// Image of `source.members[i]`.
    pub map: Vec<usize>,
    pub target: String,
    pub target_order: usize,
}

impl Epi {
    fn checked(source: Subgroup, map: Vec<usize>, target: &dyn FiniteGroup) -> Result<Epi, GlamError> {
        let mut hit = vec![false; target.order()];
        for &y in &map {
            hit[y] = true;
        }
        if hit.iter().any(|h| !h) {
            return Err(GlamError::NotSurjective(target.name()));
        }
        Ok(Epi { source, map, target: target.name(), target_order: target.order() })
    }

    /// Kernel as a list of parent elements.
    pub fn kernel(&self, target_identity: usize) -> Vec<usize> {
        self.source
            .members
            .iter()
            .zip(&self.map)
            .filter(|(_, &y)| y == target_identity)
            .map(|(&x, _)| x)
            .collect()
    }

    pub fn image(&self, x: usize) -> Option<usize> {
        self.source.position(x).map(|i| self.map[i])
    }
}

/// `G_lambda` materialized as an element table.
pub struct Glam {
    pub lambda: Lambda,
    pub base: RingSpec,
    tower: Arc<RingTower>,
    elems: Vec<GElem>,
    index: Vec<u32>,
    n2: u32,
    inv: Vec<u32>,
    delta1: u32,
    delta2: u32,
    classes: OnceLock<ClassTable>,
    gens: OnceLock<Vec<usize>>,
}

impl fmt::Debug for Glam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Glam({})", self.name())
    }
}

const ABSENT: u32 = u32::MAX;

impl Glam {
    pub fn new(backend: Backend, q: u32, lambda: Lambda) -> Result<Glam, GlamError> {
        let spec = make_ring(backend, q, lambda.l1)?;
        let tower = Arc::new(RingTower::new(spec, lambda.l1));
        Self::with_tower(tower, lambda)
    }

    pub fn with_tower(tower: Arc<RingTower>, lambda: Lambda) -> Result<Glam, GlamError> {
        if lambda.l1 > tower.max_level() {
            return Err(GlamError::BadParams(format!("ring tower too short for type {lambda}")));
        }
        let base = tower.at(lambda.l1).spec;
        let r1 = tower.at(lambda.l1);
        let r2 = tower.at(lambda.l2);
        let n1 = r1.size();
        let n2 = r2.size();
        let total = n1 as u64 * (n2 as u64).pow(3);
        if total > 1 << 28 {
            return Err(GlamError::TooLarge { size: total, cap: 1 << 28 });
        }
        let mut elems = Vec::new();
        let mut index = vec![ABSENT; total as usize];
        let rect = lambda.is_rectangular();
        for a in 0..n1 {
            for b in 0..n2 {
                for c in 0..n2 {
                    for d in 0..n2 {
                        let ok = if lambda.l2 == 0 {
                            r1.is_unit(a)
                        } else if rect {
                            r1.is_unit(r1.sub(r1.mul(a, d), r1.mul(b, c)))
                        } else {
                            r1.is_unit(a) && r2.is_unit(d)
                        };
                        if ok {
                            let code = ((a * n2 + b) * n2 + c) * n2 + d;
                            index[code as usize] = elems.len() as u32;
                            elems.push(GElem { a, b, c, d });
                        }
                    }
                }
            }
        }
        let delta1 = r1.pi_pow(lambda.l1 - lambda.l2);
        let delta2 = r2.pi_pow(lambda.l1 - lambda.l2);
        let mut g = Glam {
            lambda,
            base,
            tower,
            elems,
            index,
            n2,
            inv: Vec::new(),
            delta1,
            delta2,
            classes: OnceLock::new(),
            gens: OnceLock::new(),
        };
        let inv: Vec<u32> = (0..g.elems.len())
            .map(|i| {
                let e = g.inv_elem(&g.elems[i]);
                g.index_of(&e).expect("inverse stays in the group") as u32
            })
            .collect();
        g.inv = inv;
        debug_assert!((0..g.order()).all(|i| g.mul(i, g.inv[i] as usize) == g.identity()));
        Ok(g)
    }

    pub fn ring(&self, level: u32) -> &Ring {
        self.tower.at(level)
    }

    pub fn tower(&self) -> &Arc<RingTower> {
        &self.tower
    }

    pub fn q(&self) -> u32 {
        self.base.q
    }

    pub fn backend(&self) -> Backend {
        self.base.backend
    }

    #[inline]
    pub fn elem(&self, i: usize) -> GElem {
        self.elems[i]
    }

    pub fn elements(&self) -> &[GElem] {
        &self.elems
    }

    #[inline]
    pub fn index_of(&self, e: &GElem) -> Option<usize> {
        let n2 = self.n2;
        let code = ((e.a * n2 + e.b) * n2 + e.c) * n2 + e.d;
        match self.index.get(code as usize) {
            Some(&i) if i != ABSENT => Some(i as usize),
            _ => None,
        }
    }

    /// `delta` at level `l1` and at level `l2`.
    pub fn delta(&self) -> (u32, u32) {
        (self.delta1, self.delta2)
    }

    #[inline]
    pub fn mul_elem(&self, x: &GElem, y: &GElem) -> GElem {
        let r1 = self.ring(self.lambda.l1);
        if self.lambda.l2 == 0 {
            return GElem { a: r1.mul(x.a, y.a), b: 0, c: 0, d: 0 };
        }
        let r2 = self.ring(self.lambda.l2);
        let n2 = self.n2;
        let a = r1.add(r1.mul(x.a, y.a), r1.mul(self.delta1, r2.mul(x.b, y.c)));
        let b = r2.add(r2.mul(x.a % n2, y.b), r2.mul(x.b, y.d));
        let c = r2.add(r2.mul(x.c, y.a % n2), r2.mul(x.d, y.c));
        let d = r2.add(r2.mul(x.d, y.d), r2.mul(self.delta2, r2.mul(x.c, y.b)));
        GElem { a, b, c, d }
    }

    pub fn inv_elem(&self, x: &GElem) -> GElem {
        let l1 = self.lambda.l1;
        let l2 = self.lambda.l2;
        let r1 = self.ring(l1);
        if l2 == 0 {
            return GElem { a: r1.inv(x.a), b: 0, c: 0, d: 0 };
        }
        let r2 = self.ring(l2);
        if self.lambda.is_rectangular() {
            let di = r1.inv(r1.sub(r1.mul(x.a, x.d), r1.mul(x.b, x.c)));
            return GElem {
                a: r1.mul(di, x.d),
                b: r1.neg(r1.mul(di, x.b)),
                c: r1.neg(r1.mul(di, x.c)),
                d: r1.mul(di, x.a),
            };
        }
        // g^-1 = e^-1 [[a^-1, -a^-1 d^-1 b delta], [-a^-1 d^-1 c, d^-1]], e = 1 - a^-1 d^-1 b c delta.
        let n2 = self.n2;
        let ai1 = r1.inv(x.a);
        let di2 = r2.inv(x.d);
        let bc = r2.mul(x.b, x.c);
        let t1 = r1.mul(r1.mul(ai1, self.delta1), r2.mul(di2, bc));
        let e1 = r1.sub(r1.one(), t1);
        let ai2 = ai1 % n2;
        let e2 = e1 % n2;
        let ei1 = r1.inv(e1);
        let ei2 = r2.inv(e2);
        let s = r2.mul(ei2, r2.mul(ai2, di2));
        GElem {
            a: r1.mul(ei1, ai1),
            b: r2.neg(r2.mul(s, x.b)),
            c: r2.neg(r2.mul(s, x.c)),
            d: r2.mul(ei2, di2),
        }
    }

    /// `ad - bc delta` at level `l2` (or `a` itself in rank 1).
    pub fn det(&self, i: usize) -> u32 {
        let x = self.elems[i];
        if self.lambda.l2 == 0 {
            return x.a;
        }
        let r2 = self.ring(self.lambda.l2);
        r2.sub(r2.mul(x.a % self.n2, x.d), r2.mul(self.delta2, r2.mul(x.b, x.c)))
    }

    pub fn det_level(&self) -> u32 {
        if self.lambda.l2 == 0 {
            self.lambda.l1
        } else {
            self.lambda.l2
        }
    }

    pub fn generators(&self) -> &[usize] {
        self.gens.get_or_init(|| group::generators(self, &(0..self.order()).collect::<Vec<_>>()))
    }

    fn valuation(&self, level: u32, x: u32) -> u32 {
        self.ring(level).valuation(x)
    }

    fn val_minus_one(&self, level: u32, x: u32) -> u32 {
        let r = self.ring(level);
        r.valuation(r.sub(x, r.one()))
    }

    fn filter(&self, pred: impl Fn(&GElem) -> bool) -> Vec<usize> {
        (0..self.order()).filter(|&i| pred(&self.elems[i])).collect()
    }

    /// The subgroup named by `tag`, built from its congruence description.
    pub fn subgroup(&self, tag: SubgroupTag) -> Result<Subgroup, GlamError> {
        let Lambda { l1, l2 } = self.lambda;
        let rect = self.lambda.is_rectangular();
        let need = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(GlamError::BadParams(format!("{tag}: {msg}"))) };
        need(l2 >= 1, "needs a rank-2 type")?;
        let members = match &tag {
            SubgroupTag::K => {
                need(l1 >= 2 && (l2 >= 2 || !rect), "needs l2 >= 1 with l1 >= 2")?;
                self.filter(|e| {
                    self.val_minus_one(l1, e.a) + 1 >= l1
                        && self.valuation(l2, e.b) + 1 >= l2
                        && self.valuation(l2, e.c) + 1 >= l2
                        && self.val_minus_one(l2, e.d) + 1 >= l2
                })
            }
            &SubgroupTag::Kis { i, sigma } => {
                need(i >= 1 && i <= l2 && sigma <= 1, "needs 1 <= i <= l2 and sigma in {0,1}")?;
                self.filter(|e| {
                    self.val_minus_one(l1, e.a) + i >= l1
                        && self.valuation(l2, e.b) + i >= l2
                        && self.valuation(l2, e.c) + i >= l2 + sigma
                        && self.val_minus_one(l2, e.d) + i >= l2 + sigma
                })
            }
            SubgroupTag::PGeom1 | SubgroupTag::BUpper => self.filter(|e| e.c == 0),
            SubgroupTag::PGeom2 => self.filter(|e| e.b == 0),
            SubgroupTag::PEmbed(mu) | SubgroupTag::PQuot(mu) => {
                need(mu.l1 == l1 && mu.l2 <= l2, "needs mu = (l1, m) with m <= l2")?;
                let k = l2 - mu.l2;
                if matches!(tag, SubgroupTag::PEmbed(_)) {
                    self.filter(|e| self.valuation(l2, e.c) >= k)
                } else {
                    self.filter(|e| self.valuation(l2, e.b) >= k)
                }
            }
            SubgroupTag::UPlus => self.filter(|e| e.a == 1 && e.c == 0 && e.d == 1),
            SubgroupTag::UMinus => self.filter(|e| e.a == 1 && e.b == 0 && e.d == 1),
            SubgroupTag::VPlus => self.filter(|e| e.a == 1 && e.c == 0 && e.d == 1 && self.valuation(l2, e.b) + 1 >= l2),
            SubgroupTag::VMinus => self.filter(|e| e.a == 1 && e.b == 0 && e.d == 1 && self.valuation(l2, e.c) + 1 >= l2),
            SubgroupTag::V1 | SubgroupTag::ZCenter => {
                self.filter(|e| e.b == 0 && e.c == 0 && e.d == 1 && self.val_minus_one(l1, e.a) + 1 >= l1)
            }
            SubgroupTag::V2 => self.filter(|e| e.a == 1 && e.b == 0 && e.c == 0 && self.val_minus_one(l2, e.d) + 1 >= l2),
            SubgroupTag::DScalars => self.filter(|e| e.b == 0 && e.c == 0 && e.d == e.a % self.n2),
            SubgroupTag::TDiag => self.filter(|e| e.b == 0 && e.c == 0),
            SubgroupTag::HHeis => {
                need(l2 == 1 && l1 >= 2, "Heisenberg subgroup needs type (l, 1) with l >= 2")?;
                self.filter(|e| e.d == 1 && self.val_minus_one(l1, e.a) + 1 >= l1)
            }
            SubgroupTag::DHeis => {
                need(l2 == 1 && l1 >= 2, "needs type (l, 1) with l >= 2")?;
                self.filter(|e| e.d == e.a % self.n2)
            }
            &SubgroupTag::ACusp { u, w } | &SubgroupTag::NCusp { u, w } => {
                need(!rect && l2 >= 2, "cuspidal stabilizers need l1 > l2 > 1")?;
                let eps = l2 % 2;
                let h = (l2 + eps) / 2;
                need(u < self.ring(h).size() && self.ring(h).valuation(u) >= 1, "u must lie in p_h")?;
                need(w < self.ring(h - eps).size() && self.ring(h - eps).is_unit(w), "w must be a unit of o_(h-eps)")?;
                let r2 = self.ring(l2);
                let n2 = self.n2;
                if matches!(tag, SubgroupTag::ACusp { .. }) {
                    self.filter(|e| e.b == r2.mul(e.c, w) && e.d == r2.sub(e.a % n2, r2.mul(e.c, u)))
                } else {
                    let m1 = self.ring(h - eps).size();
                    let m2 = self.ring(h).size();
                    self.filter(|e| e.b % m1 == r2.mul(e.c, w) % m1 && e.d % m2 == r2.sub(e.a % n2, r2.mul(e.c, u)) % m2)
                }
            }
            SubgroupTag::Custom(name) => {
                return Err(GlamError::BadParams(format!("custom subgroup {name} needs explicit members")));
            }
        };
        Subgroup::from_members(self, tag, members)
    }

    /// Reduction `G_lambda -> G_floor(lambda)` (restriction to `pi M`).
    pub fn reduction(&self, floor: &Glam) -> Result<Epi, GlamError> {
        let Lambda { l1, l2 } = self.lambda;
        if l2 < 2 || Some(floor.lambda) != self.lambda.floor() {
            return Err(GlamError::BadParams(format!("reduction needs l2 >= 2 and target of type floor({})", self.lambda)));
        }
        let s = self.base;
        let map = self
            .elems
            .iter()
            .map(|e| {
                let img = GElem {
                    a: reduce(&s, e.a, l1 - 1),
                    b: reduce(&s, e.b, l2 - 1),
                    c: reduce(&s, e.c, l2 - 1),
                    d: reduce(&s, e.d, l2 - 1),
                };
                floor.index_of(&img).unwrap()
            })
            .collect();
        Epi::checked(Subgroup::whole(self), map, floor)
    }

    /// Restriction epimorphism `P_embed(mu) -> G_mu`.
    pub fn phi_embed(&self, target: &Glam) -> Result<Epi, GlamError> {
        let mu = target.lambda;
        let sub = self.subgroup(SubgroupTag::PEmbed(mu))?;
        let (m, k) = (mu.l2, self.lambda.l2 - mu.l2);
        let s = self.base;
        let map = sub
            .members
            .iter()
            .map(|&i| {
                let e = self.elems[i];
                let img = if m == 0 {
                    GElem { a: e.a, b: 0, c: 0, d: 0 }
                } else {
                    GElem { a: e.a, b: reduce(&s, e.b, m), c: div_pi(&s, e.c, k), d: reduce(&s, e.d, m) }
                };
                target.index_of(&img).unwrap()
            })
            .collect();
        Epi::checked(sub, map, target)
    }

    /// Quotient epimorphism `P_quot(mu) -> G_mu`.
    pub fn eps_quot(&self, target: &Glam) -> Result<Epi, GlamError> {
        let mu = target.lambda;
        let sub = self.subgroup(SubgroupTag::PQuot(mu))?;
        let (m, k) = (mu.l2, self.lambda.l2 - mu.l2);
        let s = self.base;
        let map = sub
            .members
            .iter()
            .map(|&i| {
                let e = self.elems[i];
                let img = if m == 0 {
                    GElem { a: e.a, b: 0, c: 0, d: 0 }
                } else {
                    GElem { a: e.a, b: div_pi(&s, e.b, k), c: reduce(&s, e.c, m), d: reduce(&s, e.d, m) }
                };
                target.index_of(&img).unwrap()
            })
            .collect();
        Epi::checked(sub, map, target)
    }

    /// `P_geom -> G_(l1) x G_(l2)`, `(a, d)`; `upper` selects `c = 0`, else `b = 0`.
    pub fn iota(&self, levi: &Levi, upper: bool) -> Result<Epi, GlamError> {
        let sub = self.subgroup(if upper { SubgroupTag::PGeom1 } else { SubgroupTag::PGeom2 })?;
        let map = sub.members.iter().map(|&i| levi.index_of(self.elems[i].a, self.elems[i].d)).collect();
        Epi::checked(sub, map, levi)
    }

    /// Action on `M_lambda = o_l1 + o_l2`, points encoded as `x * |o_l2| + y`.
    pub fn act_on_module(&self, i: usize, pt: u32) -> u32 {
        let e = self.elems[i];
        let Lambda { l1, l2 } = self.lambda;
        let r1 = self.ring(l1);
        let r2 = self.ring(l2);
        let n2 = self.n2;
        let (x, y) = (pt / n2, pt % n2);
        let nx = r1.add(r1.mul(e.a, x), r1.mul(self.delta1, r1.mul(e.b, y)));
        let ny = r2.add(r2.mul(e.c, x % n2), r2.mul(e.d, y));
        nx * n2 + ny
    }

    fn scale_point(&self, r: u32, pt: u32) -> u32 {
        let r1 = self.ring(self.lambda.l1);
        let r2 = self.ring(self.lambda.l2);
        let n2 = self.n2;
        r1.mul(r, pt / n2) * n2 + r2.mul(r % n2, pt % n2)
    }

    fn add_points(&self, p1: u32, p2: u32) -> u32 {
        let r1 = self.ring(self.lambda.l1);
        let r2 = self.ring(self.lambda.l2);
        let n2 = self.n2;
        r1.add(p1 / n2, p2 / n2) * n2 + r2.add(p1 % n2, p2 % n2)
    }

    fn check_small(&self, mu: Lambda, cap: u64) -> Result<u32, GlamError> {
        if !mu.le(&self.lambda) {
            return Err(GlamError::NotBelow { mu, lambda: self.lambda });
        }
        let npts = self.ring(self.lambda.l1).size() * self.n2;
        if npts as u64 > cap {
            return Err(GlamError::TooLarge { size: npts as u64, cap });
        }
        Ok(npts)
    }

    /// Number of `G_lambda`-orbits on the submodules of type `mu`.
    pub fn submodule_orbits(&self, mu: Lambda, cap: u64) -> Result<usize, GlamError> {
        let npts = self.check_small(mu, cap)?;
        let q = self.q() as u64;
        let r1 = self.ring(self.lambda.l1);
        let mut cyclic: BTreeSet<Vec<u32>> = BTreeSet::new();
        for pt in 0..npts {
            let mut span: Vec<u32> = r1.elements().map(|r| self.scale_point(r, pt)).collect();
            span.sort_unstable();
            span.dedup();
            cyclic.insert(span);
        }
        let cyclic: Vec<Vec<u32>> = cyclic.into_iter().collect();
        let want_size = q.pow(mu.l1 + mu.l2);
        let mut subs: BTreeSet<Vec<u32>> = BTreeSet::new();
        for (i, a) in cyclic.iter().enumerate() {
            for b in &cyclic[i..] {
                if ((a.len() * b.len()) as u64) < want_size {
                    continue;
                }
                let mut s: Vec<u32> =
                    a.iter().flat_map(|&x| b.iter().map(move |&y| (x, y))).map(|(x, y)| self.add_points(x, y)).collect();
                s.sort_unstable();
                s.dedup();
                if s.len() as u64 == want_size && self.module_exponent(&s) == mu.l1 {
                    subs.insert(s);
                }
            }
        }
        let mut seen: HashSet<Vec<u32>> = HashSet::new();
        let mut orbits = 0;
        for start in &subs {
            if !seen.insert(start.clone()) {
                continue;
            }
            orbits += 1;
            let mut queue = VecDeque::from([start.clone()]);
            while let Some(s) = queue.pop_front() {
                for &g in self.generators() {
                    let mut t: Vec<u32> = s.iter().map(|&p| self.act_on_module(g, p)).collect();
                    t.sort_unstable();
                    if seen.insert(t.clone()) {
                        queue.push_back(t);
                    }
                }
            }
        }
        Ok(orbits)
    }

    /// Number of `G_lambda`-orbits on embeddings `M_mu -> M_lambda`, an embedding
    /// being the images `(x, y)` of the standard generators of `M_mu`.
    pub fn embedding_orbits(&self, mu: Lambda, cap: u64) -> Result<usize, GlamError> {
        let npts = self.check_small(mu, cap)?;
        let r1 = self.ring(self.lambda.l1);
        let killed = |k: u32, p: u32| self.scale_point(r1.pi_pow(k), p) == 0;
        let xs: Vec<u32> = (0..npts).filter(|&p| killed(mu.l1, p)).collect();
        let ys: Vec<u32> = if mu.l2 == 0 { vec![0] } else { (0..npts).filter(|&p| killed(mu.l2, p)).collect() };
        let (n1, n2) = (self.ring(mu.l1).size(), self.ring(mu.l2).size());
        let injective = |x: u32, y: u32| {
            (0..n1).all(|r| {
                (0..n2).all(|s| (r == 0 && s == 0) || self.add_points(self.scale_point(r, x), self.scale_point(s, y)) != 0)
            })
        };
        let mut valid = vec![false; (npts * npts) as usize];
        let mut embeddings = Vec::new();
        for &x in &xs {
            for &y in &ys {
                if injective(x, y) {
                    valid[(x * npts + y) as usize] = true;
                    embeddings.push(x * npts + y);
                }
            }
        }
        let mut seen = vec![false; valid.len()];
        let mut orbits = 0;
        for &start in &embeddings {
            if seen[start as usize] {
                continue;
            }
            orbits += 1;
            seen[start as usize] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(e) = queue.pop_front() {
                for &g in self.generators() {
                    let t = self.act_on_module(g, e / npts) * npts + self.act_on_module(g, e % npts);
                    debug_assert!(valid[t as usize]);
                    if !seen[t as usize] {
                        seen[t as usize] = true;
                        queue.push_back(t);
                    }
                }
            }
        }
        Ok(orbits)
    }

    /// Brute-force symmetry test: `G_lambda` is transitive on the embeddings of a
    /// type-`mu` module. Transitivity on the submodules alone is weaker; the
    /// socle is the only submodule of type `(1,1)` in `M_(2,1)`, yet not every
    /// automorphism of it extends.
    pub fn grassmannian_transitive(&self, mu: Lambda, cap: u64) -> Result<bool, GlamError> {
        Ok(self.embedding_orbits(mu, cap)? == 1)
    }

    /// Smallest `k` with `pi^k N = 0`.
    fn module_exponent(&self, pts: &[u32]) -> u32 {
        let r1 = self.ring(self.lambda.l1);
        (0..=self.lambda.l1).find(|&k| pts.iter().all(|&p| self.scale_point(r1.pi_pow(k), p) == 0)).unwrap()
    }
}

impl FiniteGroup for Glam {
    fn order(&self) -> usize {
        self.elems.len()
    }
    fn identity(&self) -> usize {
        let one = if self.lambda.l2 == 0 { GElem { a: 1, b: 0, c: 0, d: 0 } } else { GElem { a: 1, b: 0, c: 0, d: 1 } };
        self.index_of(&one).unwrap()
    }
    #[inline]
    fn mul(&self, x: usize, y: usize) -> usize {
        self.index_of(&self.mul_elem(&self.elems[x], &self.elems[y])).unwrap()
    }
    #[inline]
    fn inv(&self, x: usize) -> usize {
        self.inv[x] as usize
    }
    fn name(&self) -> String {
        format!("G({}) over {}", self.lambda, self.base)
    }
}

impl Group for Glam {
    fn classes(&self) -> &ClassTable {
        self.classes.get_or_init(|| orbit::conjugacy_classes(self, self.generators()))
    }
    fn gens(&self) -> Vec<usize> {
        self.generators().to_vec()
    }
}

/// `G_(l1) x G_(l2)`, element `i1 * |G_(l2)| + i2`.
pub struct Levi {
    pub g1: Arc<Glam>,
    pub g2: Arc<Glam>,
    classes: OnceLock<ClassTable>,
}

impl Levi {
    pub fn new(g1: Arc<Glam>, g2: Arc<Glam>) -> Levi {
        assert!(g1.lambda.l2 == 0 && g2.lambda.l2 == 0, "Levi factors are rank 1");
        Levi { g1, g2, classes: OnceLock::new() }
    }

    pub fn index_of(&self, a: u32, d: u32) -> usize {
        let i1 = self.g1.index_of(&GElem { a, b: 0, c: 0, d: 0 }).unwrap();
        let i2 = self.g2.index_of(&GElem { a: d, b: 0, c: 0, d: 0 }).unwrap();
        i1 * self.g2.order() + i2
    }

    pub fn split(&self, x: usize) -> (usize, usize) {
        (x / self.g2.order(), x % self.g2.order())
    }
}

impl FiniteGroup for Levi {
    fn order(&self) -> usize {
        self.g1.order() * self.g2.order()
    }
    fn identity(&self) -> usize {
        self.g1.identity() * self.g2.order() + self.g2.identity()
    }
    fn mul(&self, x: usize, y: usize) -> usize {
        let ((x1, x2), (y1, y2)) = (self.split(x), self.split(y));
        self.g1.mul(x1, y1) * self.g2.order() + self.g2.mul(x2, y2)
    }
    fn inv(&self, x: usize) -> usize {
        let (x1, x2) = self.split(x);
        self.g1.inv(x1) * self.g2.order() + self.g2.inv(x2)
    }
    fn name(&self) -> String {
        format!("G({}) x G({}) over {}", self.g1.lambda.l1, self.g2.lambda.l1, self.g1.base.q)
    }
}

impl Group for Levi {
    fn classes(&self) -> &ClassTable {
        self.classes.get_or_init(|| {
            let gens = group::generators(self, &(0..self.order()).collect::<Vec<_>>());
            orbit::conjugacy_classes(self, &gens)
        })
    }
    fn gens(&self) -> Vec<usize> {
        group::generators(self, &(0..self.order()).collect::<Vec<_>>())
    }
}

/// Lazily built groups sharing one ring tower.
pub struct Universe {
    pub backend: Backend,
    pub q: u32,
    tower: Arc<RingTower>,
    groups: Mutex<BTreeMap<Lambda, Arc<Glam>>>,
    levis: Mutex<BTreeMap<(u32, u32), Arc<Levi>>>,
}

impl Universe {
    pub fn new(backend: Backend, q: u32, max_level: u32) -> Result<Universe, GlamError> {
        let spec = make_ring(backend, q, max_level.max(1))?;
        Ok(Universe {
            backend,
            q,
            tower: Arc::new(RingTower::new(spec, max_level.max(1))),
            groups: Mutex::new(BTreeMap::new()),
            levis: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn tower(&self) -> &Arc<RingTower> {
        &self.tower
    }

    pub fn group(&self, lambda: Lambda) -> Result<Arc<Glam>, GlamError> {
        if let Some(g) = self.groups.lock().unwrap().get(&lambda) {
            return Ok(g.clone());
        }
        let g = Arc::new(Glam::with_tower(self.tower.clone(), lambda)?);
        Ok(self.groups.lock().unwrap().entry(lambda).or_insert(g).clone())
    }

    pub fn levi(&self, l1: u32, l2: u32) -> Result<Arc<Levi>, GlamError> {
        if let Some(g) = self.levis.lock().unwrap().get(&(l1, l2)) {
            return Ok(g.clone());
        }
        let g1 = self.group(Lambda::new(l1, 0)?)?;
        let g2 = self.group(Lambda::new(l2, 0)?)?;
        let levi = Arc::new(Levi::new(g1, g2));
        Ok(self.levis.lock().unwrap().entry((l1, l2)).or_insert(levi).clone())
    }
}
