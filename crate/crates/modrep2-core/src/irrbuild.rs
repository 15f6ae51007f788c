//! Construction of the irreducible characters of `G_lambda` family by family,
//! recursive assembly of complete sets, and the zeta polynomials
//! `R_lambda(D) = sum_m (#irreducibles of degree m) D^m`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charm::{
    self, dedupe, heis_label, induce, inner, is_irreducible, linear_characters, subgroup_linear_characters,
    twist_characters, CharError, ClassFunction, Functors, HeisLabel, KAnalyzer, Side,
};
use crate::dixon::{self, DixonError};
use crate::glam::{i_lambda, Glam, GlamError, Lambda, SubgroupTag, Universe};
use crate::group::{FiniteGroup, Group};
use crate::orbit::{self, DualChar, OrbitKind};
use crate::tring::{root_of_unity, Backend};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IrrError {
    #[error(transparent)]
    Char(#[from] CharError),
    #[error(transparent)]
    Glam(#[from] GlamError),
    #[error(transparent)]
    Dixon(#[from] DixonError),
    #[error("{0}")]
    Check(String),
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), IrrError> {
    if ok {
        Ok(())
    } else {
        Err(IrrError::Check(msg()))
    }
}

/// Degree multiset `{degree: count}`, always in merged form.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZetaPolynomial(pub BTreeMap<u64, u64>);

impl ZetaPolynomial {
    pub fn from_pairs(pairs: &[(u64, u64)]) -> ZetaPolynomial {
        let mut z = ZetaPolynomial::default();
        for &(d, c) in pairs {
            z.add(d, c);
        }
        z
    }

    pub fn add(&mut self, degree: u64, count: u64) {
        if count > 0 {
            *self.0.entry(degree).or_insert(0) += count;
        }
    }

    pub fn merge(&mut self, other: &ZetaPolynomial) {
        for (&d, &c) in &other.0 {
            self.add(d, c);
        }
    }

    pub fn scaled(&self, k: u64) -> ZetaPolynomial {
        ZetaPolynomial(self.0.iter().map(|(&d, &c)| (d, c * k)).collect())
    }

    /// `self - other`, or `None` if some count would go negative.
    pub fn minus(&self, other: &ZetaPolynomial) -> Option<ZetaPolynomial> {
        let mut out = self.clone();
        for (&d, &c) in &other.0 {
            let e = out.0.get_mut(&d)?;
            *e = e.checked_sub(c)?;
            if *e == 0 {
                out.0.remove(&d);
            }
        }
        Some(out)
    }

    /// `R(1)`, the number of irreducibles.
    pub fn count(&self) -> u64 {
        self.0.values().sum()
    }

    /// `sum count * degree^2`.
    pub fn sum_squares(&self) -> u64 {
        self.0.iter().map(|(&d, &c)| c * d * d).sum()
    }

    pub fn of_characters<'a>(chars: impl IntoIterator<Item = &'a ClassFunction>) -> ZetaPolynomial {
        let mut z = ZetaPolynomial::default();
        for c in chars {
            z.add(c.degree_u64(), 1);
        }
        z
    }
}

impl fmt::Display for ZetaPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .0
            .iter()
            .map(|(&d, &c)| {
                let coef = if c == 1 { String::new() } else { c.to_string() };
                if d == 1 {
                    format!("{coef}D")
                } else {
                    format!("{coef}D^{d}")
                }
            })
            .collect();
        if terms.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&terms.join(" + "))
        }
    }
}

/// The closed-form recursion for `R_lambda`, with the classical degrees of
/// `GL_2(F_q)` as base.
pub fn zeta_closed_form(lambda: Lambda, q: u64) -> ZetaPolynomial {
    let Lambda { l1, l2 } = lambda;
    let p = |e: u32| q.pow(e);
    let mut z = ZetaPolynomial::default();
    if l2 == 0 {
        z.add(1, p(l1 - 1) * (q - 1));
    } else if l1 == 1 {
        z.add(1, q - 1);
        z.add(q, q - 1);
        z.add(q + 1, (q - 1) * (q - 2) / 2);
        z.add(q - 1, q * (q - 1) / 2);
    } else if l2 == 1 {
        z.add(1, p(l1 - 2) * (q - 1) * (q - 1));
        z.add(q - 1, p(l1 - 2) * (q * q - 1));
        z.add(q, p(l1 - 2) * (q - 1).pow(3));
    } else if l1 > l2 {
        z = zeta_closed_form(Lambda { l1: l1 - 1, l2: l2 - 1 }, q).scaled(q);
        z.add(p(l2 - 1) * (q - 1), p(l1 + l2 - 3) * (q * q - 1));
        z.add(p(l2), p(l1 + l2 - 3) * (q - 1).pow(3));
    } else {
        let l = l1;
        z = zeta_closed_form(Lambda { l1: l - 1, l2: l - 1 }, q).scaled(q);
        z.add(p(l - 1) * (q - 1), (q - 1) * (q * q - 1) * p(2 * l - 3) / 2);
        z.add(p(l - 2) * (q * q - 1), p(2 * l - 2) * (q - 1));
        z.add(p(l - 1) * (q + 1), p(2 * l - 3) * (q - 1).pow(3) / 2);
    }
    z
}

/// Count and degree of the cuspidal irreducibles of `G_(l,l)`.
pub fn cuspidal_rect_count(l: u32, q: u64) -> (u64, u64) {
    ((q * q - 1) * (q - 1) * q.pow(2 * l - 3) / 2, q.pow(l - 1) * (q - 1))
}

/// Count and degree of the cuspidal irreducibles of `G_(l1,l2)`, `l1 > l2 > 1`.
pub fn cuspidal_nonrect_count(lambda: Lambda, q: u64) -> (u64, u64) {
    (q.pow(lambda.l1 + lambda.l2 - 3) * (q - 1) * (q - 1), q.pow(lambda.l2 - 1) * (q - 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyLabel {
    /// Linear characters of a rank-1 group.
    Rank1,
    OneDim,
    /// `(q-1)`-dimensional characters of `G_(l,1)` over the orbits `B+` / `B-`.
    HeisB,
    HeisQ,
    #[serde(rename = "orbitC")]
    OrbitC,
    CuspidalNonrect,
    CuspidalRectCount,
    GeoIrred,
    GeoSplit,
    InfEmbed,
    InfQuot,
    PullbackTwist,
    /// Degrees of `GL_2(F_q)` from the class-algebra oracle.
    DixonBase,
}

impl fmt::Display for FamilyLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FamilyLabel::Rank1 => "rank1",
            FamilyLabel::OneDim => "one_dim",
            FamilyLabel::HeisB => "heis_b",
            FamilyLabel::HeisQ => "heis_q",
            FamilyLabel::OrbitC => "orbitC",
            FamilyLabel::CuspidalNonrect => "cuspidal_nonrect",
            FamilyLabel::CuspidalRectCount => "cuspidal_rect_count",
            FamilyLabel::GeoIrred => "geo_irred",
            FamilyLabel::GeoSplit => "geo_split",
            FamilyLabel::InfEmbed => "inf_embed",
            FamilyLabel::InfQuot => "inf_quot",
            FamilyLabel::PullbackTwist => "pullback_twist",
            FamilyLabel::DixonBase => "dixon_base",
        })
    }
}

/// One family of irreducibles, explicit or count-only.
#[derive(Clone, Debug)]
pub struct IrrFamily {
    pub label: FamilyLabel,
    pub mu: Option<Lambda>,
    pub members: Vec<ClassFunction>,
    /// `(count, degree)` for families known only by their numbers.
    pub count_only: Option<ZetaPolynomial>,
    pub provenance: String,
}

impl IrrFamily {
    fn explicit(label: FamilyLabel, mu: Option<Lambda>, members: Vec<ClassFunction>, provenance: String) -> IrrFamily {
        IrrFamily { label, mu, members, count_only: None, provenance }
    }

    pub fn zeta(&self) -> ZetaPolynomial {
        match &self.count_only {
            Some(z) => z.clone(),
            None => ZetaPolynomial::of_characters(&self.members),
        }
    }

    pub fn count(&self) -> u64 {
        self.zeta().count()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FamilySummary {
    pub label: String,
    pub mu: Option<String>,
    pub count: u64,
    pub degree: Vec<u64>,
}

impl From<&IrrFamily> for FamilySummary {
    fn from(f: &IrrFamily) -> Self {
        FamilySummary {
            label: f.label.to_string(),
            mu: f.mu.map(|m| m.to_string()),
            count: f.count(),
            degree: f.zeta().0.keys().copied().collect(),
        }
    }
}

/// A complete set of irreducibles of `G_lambda`.
#[derive(Clone, Debug)]
pub struct Assembly {
    pub lambda: Lambda,
    pub q: u32,
    pub backend: Backend,
    pub families: Vec<IrrFamily>,
    pub zeta: ZetaPolynomial,
    pub checks: Vec<(String, bool)>,
}

impl Assembly {
    pub fn characters(&self) -> impl Iterator<Item = &ClassFunction> {
        self.families.iter().flat_map(|f| f.members.iter())
    }

    pub fn family(&self, label: FamilyLabel) -> impl Iterator<Item = &IrrFamily> {
        self.families.iter().filter(move |f| f.label == label)
    }

    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }
}

/// Irreducibles of `G_(l,1)` with their Heisenberg labels.
pub struct L1Build {
    pub members: Vec<(ClassFunction, HeisLabel)>,
    pub families: Vec<IrrFamily>,
}

/// Caches groups, functors and already built character sets for one `(backend, q)`.
pub struct Builder {
    pub universe: Arc<Universe>,
    functors: Mutex<BTreeMap<Lambda, Arc<Functors>>>,
    linear: Mutex<BTreeMap<Lambda, Arc<Vec<ClassFunction>>>>,
    l1: Mutex<BTreeMap<u32, Arc<L1Build>>>,
    cusp: Mutex<BTreeMap<Lambda, Arc<IrrFamily>>>,
    assembled: Mutex<BTreeMap<Lambda, Arc<Assembly>>>,
    /// Run the literal cuspidality battery on constructed cuspidals.
    pub check_cuspidality: bool,
}

fn exps_match(a: u32, ma: u32, b: u32, mb: u32) -> bool {
    let n = ma as u64 * mb as u64;
    (a as u64 * mb as u64) % n == (b as u64 * ma as u64) % n
}

impl Builder {
    pub fn new(backend: Backend, q: u32, max_level: u32) -> Result<Builder, IrrError> {
        Ok(Builder {
            universe: Arc::new(Universe::new(backend, q, max_level)?),
            functors: Mutex::new(BTreeMap::new()),
            linear: Mutex::new(BTreeMap::new()),
            l1: Mutex::new(BTreeMap::new()),
            cusp: Mutex::new(BTreeMap::new()),
            assembled: Mutex::new(BTreeMap::new()),
            check_cuspidality: true,
        })
    }

    pub fn q(&self) -> u32 {
        self.universe.q
    }

    pub fn group(&self, lambda: Lambda) -> Result<Arc<Glam>, IrrError> {
        Ok(self.universe.group(lambda)?)
    }

    pub fn functors(&self, lambda: Lambda) -> Result<Arc<Functors>, IrrError> {
        if let Some(f) = self.functors.lock().unwrap().get(&lambda) {
            return Ok(f.clone());
        }
        let f = Arc::new(Functors::new(self.universe.clone(), lambda)?);
        Ok(self.functors.lock().unwrap().entry(lambda).or_insert(f).clone())
    }

    pub fn linear(&self, lambda: Lambda) -> Result<Arc<Vec<ClassFunction>>, IrrError> {
        if let Some(l) = self.linear.lock().unwrap().get(&lambda) {
            return Ok(l.clone());
        }
        let g = self.group(lambda)?;
        let l = Arc::new(linear_characters(&*g));
        Ok(self.linear.lock().unwrap().entry(lambda).or_insert(l).clone())
    }

    pub fn build_rank1(&self, l: u32) -> Result<Vec<ClassFunction>, IrrError> {
        Ok(self.linear(Lambda::new(l, 0)?)?.to_vec())
    }

    /// All irreducibles of `G_(l,1)`: one-dimensional ones over the trivial orbit,
    /// `(q-1)`-dimensional ones induced from `DH`, `q`-dimensional ones induced
    /// from the upper triangular subgroup.
    pub fn build_l1(&self, l: u32) -> Result<Arc<L1Build>, IrrError> {
        if let Some(b) = self.l1.lock().unwrap().get(&l) {
            return Ok(b.clone());
        }
        let lambda = Lambda::new(l, 1)?;
        check(l >= 2, || "build_l1 needs l >= 2".into())?;
        let g = self.group(lambda)?;
        let q = self.q() as u64;
        let mut members = Vec::new();
        for chi in self.linear(lambda)?.iter() {
            if heis_label(&g, chi)? == HeisLabel::A {
                members.push((chi.clone(), HeisLabel::A));
            }
        }
        let dh = g.subgroup(SubgroupTag::DHeis)?;
        let mut induced = Vec::new();
        for f in subgroup_linear_characters(&*g, &dh) {
            let chi = induce(&*g, &dh, &f);
            if is_irreducible(&*g, &chi)? {
                induced.push(chi);
            }
        }
        for chi in dedupe(induced) {
            let label = heis_label(&g, &chi)?;
            if matches!(label, HeisLabel::BPlus | HeisLabel::BMinus | HeisLabel::C) {
                members.push((chi, label));
            }
        }
        let b = g.subgroup(SubgroupTag::BUpper)?;
        let z = g.subgroup(SubgroupTag::ZCenter)?;
        let zpos: Vec<usize> = z.members.iter().map(|&x| b.position(x).unwrap()).collect();
        let mut qdims = Vec::new();
        for f in subgroup_linear_characters(&*g, &b) {
            if zpos.iter().all(|&i| (f[i] - Complex64::new(1.0, 0.0)).norm() < charm::TOL) {
                continue;
            }
            let chi = induce(&*g, &b, &f);
            if is_irreducible(&*g, &chi)? {
                qdims.push(chi);
            }
        }
        for chi in dedupe(qdims) {
            let label = heis_label(&g, &chi)?;
            check(label == HeisLabel::Q, || format!("q-dimensional character with label {label:?}"))?;
            members.push((chi, label));
        }
        let pick = |ls: &[HeisLabel]| members.iter().filter(|(_, h)| ls.contains(h)).map(|(c, _)| c.clone()).collect::<Vec<_>>();
        let prov = format!("G({lambda}) over q={q}");
        let families = vec![
            IrrFamily::explicit(FamilyLabel::OneDim, None, pick(&[HeisLabel::A]), prov.clone()),
            IrrFamily::explicit(FamilyLabel::HeisB, None, pick(&[HeisLabel::BPlus, HeisLabel::BMinus]), prov.clone()),
            IrrFamily::explicit(FamilyLabel::OrbitC, None, pick(&[HeisLabel::C]), prov.clone()),
            IrrFamily::explicit(FamilyLabel::HeisQ, None, pick(&[HeisLabel::Q]), prov),
        ];
        let all: Vec<ClassFunction> = members.iter().map(|(c, _)| c.clone()).collect();
        let zeta = ZetaPolynomial::of_characters(&all);
        check(zeta == zeta_closed_form(lambda, q), || format!("G({lambda}): built {zeta}, expected {}", zeta_closed_form(lambda, q)))?;
        check(charm::check_orthonormal(&*g, &all)?, || format!("G({lambda}) characters are not orthonormal"))?;
        let built = Arc::new(L1Build { members, families });
        Ok(self.l1.lock().unwrap().entry(l).or_insert(built).clone())
    }

    /// Cuspidal irreducibles of a non-rectangular `G_mu`: the `C` family for `mu = (l,1)`.
    pub fn cuspidals(&self, mu: Lambda) -> Result<Arc<IrrFamily>, IrrError> {
        check(mu.l1 > mu.l2 && mu.l2 >= 1, || format!("no explicit cuspidals for {mu}"))?;
        if let Some(c) = self.cusp.lock().unwrap().get(&mu) {
            return Ok(c.clone());
        }
        let fam = if mu.l2 == 1 {
            let b = self.build_l1(mu.l1)?;
            let mut f = b.families.iter().find(|f| f.label == FamilyLabel::OrbitC).unwrap().clone();
            if self.check_cuspidality {
                let fun = self.functors(mu)?;
                let g = self.group(mu)?;
                // At q = 2 these are themselves linear, so twisting by every linear
                // character would always reach the trivial one; test them untwisted.
                let lin = if self.q() == 2 { vec![ClassFunction::trivial(&*g)] } else { self.linear(mu)?.to_vec() };
                for chi in &f.members {
                    check(fun.is_cuspidal(chi, None, &lin)?, || format!("C-type character of G({mu}) is not cuspidal"))?;
                }
            }
            f.mu = Some(mu);
            f
        } else {
            self.build_cuspidal_nonrect(mu)?
        };
        let fam = Arc::new(fam);
        Ok(self.cusp.lock().unwrap().entry(mu).or_insert(fam).clone())
    }

    /// Cuspidals of `G_lambda`, `l1 > l2 > 1`: characters `eta_{u,w}` of the
    /// half-level kernel, all their extensions to the stabilizer, induced up.
    pub fn build_cuspidal_nonrect(&self, lambda: Lambda) -> Result<IrrFamily, IrrError> {
        check(lambda.l1 > lambda.l2 && lambda.l2 >= 2, || format!("non-rectangular cuspidals need l1 > l2 > 1, got {lambda}"))?;
        let g = self.group(lambda)?;
        let q = self.q() as u64;
        let eps = lambda.l2 % 2;
        let h = (lambda.l2 + eps) / 2;
        let kh = g.subgroup(SubgroupTag::Kis { i: h, sigma: eps })?;
        let psi_mod = g.ring(h).psi_modulus();
        let rh = g.ring(h);
        let rw = g.ring(h - eps);
        let mut members = Vec::new();
        for u in rh.elements().filter(|&u| rh.valuation(u) >= 1) {
            for w in rw.units() {
                let eta = DualChar { i: h, sigma: eps, u, v: 1, w, z: 0 };
                let eta_vals: Vec<u32> = kh.members.iter().map(|&x| orbit::pairing(&g, &eta, x).unwrap()).collect();
                let n = g.subgroup(SubgroupTag::NCusp { u, w })?;
                let a = g.subgroup(SubgroupTag::ACusp { u, w })?;
                let ka = a.intersect(&*g, &kh, SubgroupTag::Custom("K cap A".into()));
                let (chars, m) = crate::group::linear_characters(&*g, &n.members);
                let ext: Vec<&Vec<u32>> = chars
                    .iter()
                    .filter(|c| kh.members.iter().zip(&eta_vals).all(|(&x, &e)| exps_match(c[x], m, e, psi_mod)))
                    .collect();
                check(ext.len() == a.order() / ka.order(), || {
                    format!("{} extensions of eta({u},{w}), expected [A : K cap A] = {}", ext.len(), a.order() / ka.order())
                })?;
                for c in ext {
                    let f: Vec<Complex64> = n.members.iter().map(|&x| root_of_unity(c[x], m)).collect();
                    let chi = induce(&*g, &n, &f);
                    check(is_irreducible(&*g, &chi)?, || format!("induced cuspidal for eta({u},{w}) is reducible"))?;
                    members.push(chi);
                }
            }
        }
        let total = members.len();
        let members = dedupe(members);
        check(members.len() == total, || format!("cuspidals of G({lambda}) are not distinct"))?;
        let (count, degree) = cuspidal_nonrect_count(lambda, q);
        check(members.len() as u64 == count && members.iter().all(|c| c.degree_u64() == degree), || {
            format!("G({lambda}): {} cuspidals, expected {count} of degree {degree}", members.len())
        })?;
        if self.check_cuspidality {
            let fun = self.functors(lambda)?;
            let lin = self.linear(lambda)?;
            let ka = KAnalyzer::new(g.clone())?;
            for chi in &members {
                check(fun.is_cuspidal(chi, Some(&ka), &lin)?, || format!("constructed character of G({lambda}) is not cuspidal"))?;
            }
        }
        Ok(IrrFamily::explicit(FamilyLabel::CuspidalNonrect, Some(lambda), members, format!("eta at level ({h},{eps})")))
    }

    fn twisted(&self, g: &Glam, chars: &[ClassFunction]) -> Result<Vec<ClassFunction>, IrrError> {
        let tw = twist_characters(g)?;
        Ok(dedupe(chars.iter().flat_map(|c| tw.iter().map(move |t| c.mul(t))).collect()))
    }

    /// Infinitesimal inductions of the cuspidals of each `G_mu`, `mu` in `I_lambda`.
    pub fn build_infinitesimal(&self, lambda: Lambda) -> Result<Vec<IrrFamily>, IrrError> {
        check(lambda.l2 >= 2, || format!("infinitesimal families need l2 >= 2, got {lambda}"))?;
        let g = self.group(lambda)?;
        let fun = self.functors(lambda)?;
        let q = self.q() as u64;
        let mut out = Vec::new();
        for mu in i_lambda(lambda) {
            let cusp = self.cuspidals(mu)?;
            let mut sides = Vec::new();
            for side in [Side::Embed, Side::Quot] {
                let mut ms = Vec::new();
                for chi in &cusp.members {
                    let x = fun.inf_ind(mu, side, chi)?;
                    check(is_irreducible(&*g, &x)?, || format!("inf_ind {side:?} from {mu} is reducible"))?;
                    ms.push(x);
                }
                let n = ms.len();
                let ms = dedupe(ms);
                check(ms.len() == n, || format!("inf_ind {side:?} from {mu} is not injective"))?;
                sides.push(ms);
            }
            let expected = q.pow(lambda.l1 + mu.l2 - 3) * (q - 1) * (q - 1);
            if lambda.is_rectangular() {
                let embed = self.twisted(&g, &sides[0])?;
                let quot = self.twisted(&g, &sides[1])?;
                let same = BTreeSet::from_iter(embed.iter().map(|c| c.fingerprint()))
                    == BTreeSet::from_iter(quot.iter().map(|c| c.fingerprint()));
                check(same, || format!("embed and quot families from {mu} differ"))?;
                check(embed.len() as u64 == q * cusp.members.len() as u64, || {
                    format!("twisting the family from {mu} gives {} members, expected q * {}", embed.len(), cusp.members.len())
                })?;
                let expected = q * expected;
                check(embed.len() as u64 == expected, || format!("family from {mu}: {} members, expected {expected}", embed.len()))?;
                out.push(IrrFamily::explicit(FamilyLabel::InfEmbed, Some(mu), embed, "all twists".into()));
            } else {
                let [embed, quot] = <[Vec<ClassFunction>; 2]>::try_from(sides).unwrap();
                let fe: BTreeSet<_> = embed.iter().map(|c| c.fingerprint()).collect();
                check(quot.iter().all(|c| !fe.contains(&c.fingerprint())), || format!("embed and quot families from {mu} meet"))?;
                for (label, ms) in [(FamilyLabel::InfEmbed, embed), (FamilyLabel::InfQuot, quot)] {
                    check(ms.len() as u64 == expected, || format!("{label} from {mu}: {} members, expected {expected}", ms.len()))?;
                    out.push(IrrFamily::explicit(label, Some(mu), ms, String::new()));
                }
            }
        }
        Ok(out)
    }

    /// Characters of `G_(l1) x G_(l2)` as pairs of indices into the rank-1 character lists.
    fn levi_characters(&self, lambda: Lambda) -> Result<Vec<(usize, usize, ClassFunction)>, IrrError> {
        let fun = self.functors(lambda)?;
        let levi = fun.levi();
        let l1 = self.linear(Lambda::new(lambda.l1, 0)?)?;
        let l2 = self.linear(Lambda::new(lambda.l2, 0)?)?;
        let (t1, t2) = (levi.g1.classes(), levi.g2.classes());
        let reps = &levi.classes().reps;
        let mut out = Vec::new();
        for (i, a) in l1.iter().enumerate() {
            for (j, b) in l2.iter().enumerate() {
                let vals = reps
                    .iter()
                    .map(|&r| {
                        let (x1, x2) = levi.split(r);
                        a.at(t1, x1) * b.at(t2, x2)
                    })
                    .collect();
                out.push((i, j, ClassFunction::new(levi, vals)));
            }
        }
        Ok(out)
    }

    /// Whether `theta_i (x) theta_ii` induces irreducibly.
    pub fn in_c_hat(&self, lambda: Lambda, i: usize, j: usize) -> Result<bool, IrrError> {
        let g1 = self.group(Lambda::new(lambda.l1, 0)?)?;
        let l1 = self.linear(Lambda::new(lambda.l1, 0)?)?;
        let l2 = self.linear(Lambda::new(lambda.l2, 0)?)?;
        let r = g1.ring(lambda.l1);
        let t = g1.classes();
        let top: Vec<usize> = (0..g1.order()).filter(|&x| r.valuation(r.sub(g1.elem(x).a, r.one())) + 1 >= lambda.l1).collect();
        if lambda.is_rectangular() {
            Ok(top.iter().any(|&x| (l1[i].at(t, x) - l2[j].at(t, x)).norm() > charm::TOL))
        } else {
            Ok(top.iter().any(|&x| (l1[i].at(t, x) - Complex64::new(1.0, 0.0)).norm() > charm::TOL))
        }
    }

    /// All `(theta, xi_theta, in C-hat)` for the Levi characters, upper parabolic.
    pub fn geometric_inductions(&self, lambda: Lambda) -> Result<Vec<(ClassFunction, ClassFunction, bool)>, IrrError> {
        let fun = self.functors(lambda)?;
        let mut out = Vec::new();
        for (i, j, theta) in self.levi_characters(lambda)? {
            let xi = fun.geo_ind(&theta, true)?;
            out.push((theta, xi, self.in_c_hat(lambda, i, j)?));
        }
        Ok(out)
    }

    /// `xi_theta` for `theta` in C-hat, and the `xi_rho` attached to the `B+`/`B-`
    /// characters of `G_(l1,1)`.
    pub fn build_geometric(&self, lambda: Lambda) -> Result<(IrrFamily, IrrFamily), IrrError> {
        check(lambda.l2 >= 2, || format!("geometric families need l2 >= 2, got {lambda}"))?;
        let g = self.group(lambda)?;
        let fun = self.functors(lambda)?;
        let q = self.q() as u64;
        let rect = lambda.is_rectangular();
        let mut irred = Vec::new();
        let levi = self.levi_characters(lambda)?;
        let index: BTreeMap<(usize, usize), usize> = levi.iter().enumerate().map(|(k, (i, j, _))| ((*i, *j), k)).collect();
        for (i, j, theta) in &levi {
            if !self.in_c_hat(lambda, *i, *j)? {
                continue;
            }
            let xi = fun.geo_ind(theta, true)?;
            check(is_irreducible(&*g, &xi)?, || format!("xi for theta = ({i},{j}) is reducible"))?;
            let dual = fun.geo_ind(theta, false)?;
            check(xi.approx_eq(&dual), || format!("xi and its lower-parabolic twin differ for theta = ({i},{j})"))?;
            if rect {
                let op = fun.geo_ind(&levi[index[&(*j, *i)]].2, true)?;
                check(xi.approx_eq(&op), || format!("xi(theta) and xi(theta^op) differ for ({i},{j})"))?;
            }
            irred.push(xi);
        }
        let irred = dedupe(irred);
        let expected = if rect {
            q.pow(2 * lambda.l1 - 3) * (q - 1).pow(3) / 2
        } else {
            q.pow(lambda.l1 + lambda.l2 - 3) * (q - 1).pow(3)
        };
        check(irred.len() as u64 == expected, || format!("geo_irred: {} members, expected {expected}", irred.len()))?;

        let mu = Lambda::new(lambda.l1, 1)?;
        let base = self.build_l1(lambda.l1)?;
        let mut split = Vec::new();
        for (rho, label) in &base.members {
            let side = match label {
                HeisLabel::BPlus => Side::Embed,
                HeisLabel::BMinus if !rect => Side::Quot,
                _ => continue,
            };
            let xi = fun.inf_ind(mu, side, rho)?;
            check(is_irreducible(&*g, &xi)?, || format!("xi_rho ({label:?}) is reducible"))?;
            split.push(xi);
        }
        let split = if rect { self.twisted(&g, &split)? } else { dedupe(split) };
        let expected = if rect { q.pow(lambda.l1 - 1) * (q - 1) } else { 2 * q.pow(lambda.l1 - 2) * (q - 1) };
        check(split.len() as u64 == expected, || format!("geo_split: {} members, expected {expected}", split.len()))?;
        Ok((
            IrrFamily::explicit(FamilyLabel::GeoIrred, None, irred, "theta in C-hat".into()),
            IrrFamily::explicit(FamilyLabel::GeoSplit, Some(mu), split, "B+ embed, B- quot".into()),
        ))
    }

    /// Twists of inflations along the reduction to `floor(lambda)`.
    pub fn pullback_twists(&self, lambda: Lambda) -> Result<IrrFamily, IrrError> {
        let floor = lambda.floor().ok_or_else(|| IrrError::Check(format!("{lambda} has no floor")))?;
        let g = self.group(lambda)?;
        let f = self.group(floor)?;
        let base = self.irreducibles(floor)?;
        let red = g.reduction(&f)?;
        let t = f.classes();
        let pulled: Vec<ClassFunction> = base
            .iter()
            .map(|chi| {
                let vals: Vec<Complex64> = red.map.iter().map(|&y| chi.at(t, y)).collect();
                ClassFunction::from_elements(&*g, &vals)
            })
            .collect();
        let members = self.twisted(&g, &pulled)?;
        let q = self.q() as usize;
        check(members.len() == q * base.len(), || format!("{} pullback twists, expected {}", members.len(), q * base.len()))?;
        Ok(IrrFamily::explicit(FamilyLabel::PullbackTwist, Some(floor), members, format!("from G({floor})")))
    }

    /// Explicit complete set of irreducibles; not available for rectangular types.
    pub fn irreducibles(&self, lambda: Lambda) -> Result<Arc<Vec<ClassFunction>>, IrrError> {
        if lambda.l2 == 0 {
            return Ok(Arc::new(self.build_rank1(lambda.l1)?));
        }
        check(!lambda.is_rectangular(), || format!("no explicit character set for rectangular {lambda}"))?;
        let a = self.assemble(lambda)?;
        Ok(Arc::new(a.characters().cloned().collect()))
    }

    pub fn assemble(&self, lambda: Lambda) -> Result<Arc<Assembly>, IrrError> {
        if let Some(a) = self.assembled.lock().unwrap().get(&lambda) {
            return Ok(a.clone());
        }
        let a = Arc::new(self.assemble_uncached(lambda)?);
        Ok(self.assembled.lock().unwrap().entry(lambda).or_insert(a).clone())
    }

    fn assemble_uncached(&self, lambda: Lambda) -> Result<Assembly, IrrError> {
        let q = self.q() as u64;
        let g = self.group(lambda)?;
        let mut families = Vec::new();
        let mut checks = Vec::new();
        if lambda.l2 == 0 {
            families.push(IrrFamily::explicit(FamilyLabel::Rank1, None, self.build_rank1(lambda.l1)?, String::new()));
        } else if lambda.l1 == 1 {
            let z = dixon::irr_degrees(&*g)?;
            families.push(IrrFamily { label: FamilyLabel::DixonBase, mu: None, members: vec![], count_only: Some(z), provenance: "class algebra".into() });
        } else if lambda.l2 == 1 {
            families.extend(self.build_l1(lambda.l1)?.families.iter().cloned());
        } else if !lambda.is_rectangular() {
            families.push(self.pullback_twists(lambda)?);
            families.push((*self.cuspidals(lambda)?).clone());
            families.extend(self.build_infinitesimal(lambda)?);
            let (gi, gs) = self.build_geometric(lambda)?;
            families.push(gi);
            families.push(gs);
        } else {
            let floor = lambda.floor().unwrap();
            let base = self.assemble(floor)?;
            families.push(IrrFamily {
                label: FamilyLabel::PullbackTwist,
                mu: Some(floor),
                members: vec![],
                count_only: Some(base.zeta.scaled(q)),
                provenance: format!("q twists of G({floor}), counted"),
            });
            families.extend(self.build_infinitesimal(lambda)?);
            let (gi, gs) = self.build_geometric(lambda)?;
            families.push(gi);
            families.push(gs);
            let explicit: Vec<ClassFunction> = families.iter().flat_map(|f| f.members.iter().cloned()).collect();
            checks.push(("explicit characters orthonormal".into(), charm::check_orthonormal(&*g, &explicit)?));
            let mut known = ZetaPolynomial::default();
            for f in &families {
                known.merge(&f.zeta());
            }
            let oracle = dixon::irr_degrees(&*g)?;
            let rest = oracle.minus(&known).ok_or_else(|| IrrError::Check(format!("accounted {known} exceeds the oracle {oracle}")))?;
            let (count, degree) = cuspidal_rect_count(lambda.l1, q);
            checks.push(("cuspidal remainder matches the closed form".into(), rest == ZetaPolynomial::from_pairs(&[(degree, count)])));
            families.push(IrrFamily {
                label: FamilyLabel::CuspidalRectCount,
                mu: None,
                members: vec![],
                count_only: Some(rest),
                provenance: "oracle minus constructed families".into(),
            });
        }
        let mut zeta = ZetaPolynomial::default();
        for f in &families {
            zeta.merge(&f.zeta());
        }
        if lambda.l2 >= 1 && !lambda.is_rectangular() {
            let all: Vec<ClassFunction> = families.iter().flat_map(|f| f.members.iter().cloned()).collect();
            checks.push(("characters orthonormal".into(), charm::check_orthonormal(&*g, &all)?));
        }
        if lambda.l2 >= 2 {
            let ka = KAnalyzer::new(g.clone())?;
            checks.push(("orbit labels of each family".into(), self.family_labels_ok(lambda, &ka, &families)?));
        }
        checks.push(("sum of squared degrees is |G|".into(), zeta.sum_squares() == g.order() as u64));
        checks.push(("number of irreducibles is the class count".into(), zeta.count() == g.classes().len() as u64));
        checks.push(("matches the closed form".into(), zeta == zeta_closed_form(lambda, q)));
        Ok(Assembly { lambda, q: self.q(), backend: self.universe.backend, families, zeta, checks })
    }

    /// Row of the orbit table each family is expected to mark on `K`.
    fn family_labels_ok(&self, lambda: Lambda, ka: &KAnalyzer, families: &[IrrFamily]) -> Result<bool, IrrError> {
        let rect = lambda.is_rectangular();
        for f in families {
            let expected: &[OrbitKind] = match (f.label, rect) {
                (FamilyLabel::PullbackTwist, _) => &[OrbitKind::I],
                (FamilyLabel::CuspidalNonrect, _) => &[OrbitKind::V],
                (FamilyLabel::InfEmbed, false) => &[OrbitKind::III],
                (FamilyLabel::InfQuot, false) => &[OrbitKind::IV],
                (FamilyLabel::InfEmbed, true) => &[OrbitKind::III],
                (FamilyLabel::GeoIrred, _) => &[OrbitKind::II],
                (FamilyLabel::GeoSplit, false) => &[OrbitKind::III, OrbitKind::IV],
                (FamilyLabel::GeoSplit, true) => &[OrbitKind::III],
                _ => continue,
            };
            for chi in &f.members {
                if !expected.contains(&ka.label(chi)?.kind) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Which of the three kinds a primitive irreducible of `G_lambda` is.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PrimitiveKind {
    pub cuspidal: bool,
    /// Number of `mu` in `I_lambda` such that some twist is infinitesimally
    /// induced from a cuspidal of `G_mu`.
    pub inf_sources: usize,
    /// Contained in some geometrically induced character, either parabolic.
    pub geometric: bool,
}

impl PrimitiveKind {
    /// Exactly one of the three kinds, with a unique source when infinitesimal.
    pub fn is_exclusive(&self) -> bool {
        let kinds = self.cuspidal as u8 + (self.inf_sources > 0) as u8 + self.geometric as u8;
        kinds == 1 && self.inf_sources <= 1
    }
}

pub fn classify_primitive(b: &Builder, lambda: Lambda, chi: &ClassFunction) -> Result<PrimitiveKind, IrrError> {
    let fun = b.functors(lambda)?;
    let lin = b.linear(lambda)?;
    let g = b.group(lambda)?;
    let twists = twist_characters(&g)?;
    let cuspidal = fun.is_cuspidal(chi, None, &lin)?;
    let mut inf_sources = 0;
    for mu in i_lambda(lambda) {
        let target = fun.inf_group(mu)?;
        let cusp = b.cuspidals(mu)?;
        let mut hit = false;
        for t in &twists {
            let tchi = chi.mul(t);
            for side in [Side::Embed, Side::Quot] {
                let r = fun.inf_res(mu, side, &tchi)?;
                for c in &cusp.members {
                    hit |= inner(&*target, &r, c)? != 0;
                }
            }
        }
        inf_sources += hit as usize;
    }
    let geometric = !fun.geo_res(chi, true)?.is_zero() || !fun.geo_res(chi, false)?.is_zero();
    Ok(PrimitiveKind { cuspidal, inf_sources, geometric })
}
