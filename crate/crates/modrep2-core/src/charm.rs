//! Class functions and the functor calculus on them: induction, restriction,
//! inflation along an epimorphism, averaging along its fibers, the geometric
//! and infinitesimal functors, twisting by `det`, and the primitivity and
//! cuspidality predicates.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::glam::{Epi, Glam, GlamError, Lambda, Levi, Subgroup, SubgroupTag, Universe};
use crate::group::{self, FiniteGroup, Group};
use crate::orbit::{self, ClassTable, DualChar, OrbitLabel};
use crate::tring::{root_of_unity, twisting_characters, RingError, UnitGroup};

pub type Cx = Complex64;

/// Tolerance for every near-integer and equality test on character values.
pub const TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CharError {
    #[error(transparent)]
    Glam(#[from] GlamError),
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error("class function on {found} used where {expected} was expected")]
    GroupMismatch { expected: String, found: String },
    #[error("inner product {0} is not an integer")]
    NotIntegral(String),
    #[error("averaged function is not constant on classes of {0}")]
    NotClassFunction(String),
    #[error("character is reducible (norm {0})")]
    Reducible(i64),
    #[error("functor not available: {0}")]
    NotAllowed(String),
    #[error("irreducible character meets {0} orbits on K")]
    MixedOrbits(usize),
}

/// A complex-valued function on the conjugacy classes of a group.
#[derive(Clone, Debug)]
pub struct ClassFunction {
    pub group: String,
    pub values: Vec<Cx>,
    pub identity_class: usize,
}

impl ClassFunction {
    pub fn new(g: &dyn Group, values: Vec<Cx>) -> ClassFunction {
        assert_eq!(values.len(), g.classes().len());
        ClassFunction { group: g.name(), values, identity_class: g.classes().class_of(g.identity()) }
    }

    pub fn trivial(g: &dyn Group) -> ClassFunction {
        Self::new(g, vec![Cx::new(1.0, 0.0); g.classes().len()])
    }

    pub fn regular(g: &dyn Group) -> ClassFunction {
        let t = g.classes();
        let e = t.class_of(g.identity());
        let values = (0..t.len()).map(|j| Cx::new(if j == e { g.order() as f64 } else { 0.0 }, 0.0)).collect();
        Self::new(g, values)
    }

    /// Takes values at class representatives of a function given on all elements.
    pub fn from_elements(g: &dyn Group, vals: &[Cx]) -> ClassFunction {
        Self::new(g, g.classes().reps.iter().map(|&r| vals[r]).collect())
    }

    pub fn degree(&self) -> f64 {
        self.values[self.identity_class].re
    }

    pub fn degree_u64(&self) -> u64 {
        self.degree().round() as u64
    }

    pub fn at(&self, classes: &ClassTable, x: usize) -> Cx {
        self.values[classes.class_of(x)]
    }

    pub fn mul(&self, other: &ClassFunction) -> ClassFunction {
        ClassFunction { values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(), ..self.clone() }
    }

    pub fn add(&self, other: &ClassFunction) -> ClassFunction {
        ClassFunction { values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(), ..self.clone() }
    }

    pub fn scale(&self, s: f64) -> ClassFunction {
        ClassFunction { values: self.values.iter().map(|a| a * s).collect(), ..self.clone() }
    }

    pub fn conj(&self) -> ClassFunction {
        ClassFunction { values: self.values.iter().map(|a| a.conj()).collect(), ..self.clone() }
    }

    pub fn approx_eq(&self, other: &ClassFunction) -> bool {
        self.group == other.group && self.values.iter().zip(&other.values).all(|(a, b)| (a - b).norm() < TOL)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|a| a.norm() < TOL)
    }

    /// Rounded values, used as a dedupe key.
    pub fn fingerprint(&self) -> Vec<(i64, i64)> {
        self.values.iter().map(|a| ((a.re * 1e4).round() as i64, (a.im * 1e4).round() as i64)).collect()
    }
}

#[derive(Serialize)]
struct CharacterJson<'a> {
    group: &'a str,
    degree: u64,
    values: Vec<[f64; 2]>,
}

impl Serialize for ClassFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        CharacterJson {
            group: &self.group,
            degree: self.degree_u64(),
            values: self.values.iter().map(|v| [v.re, v.im]).collect(),
        }
        .serialize(s)
    }
}

fn same_group(g: &dyn Group, chi: &ClassFunction) -> Result<(), CharError> {
    let name = g.name();
    if chi.group != name {
        return Err(CharError::GroupMismatch { expected: name, found: chi.group.clone() });
    }
    Ok(())
}

pub fn inner_raw(g: &dyn Group, a: &ClassFunction, b: &ClassFunction) -> Result<Cx, CharError> {
    same_group(g, a)?;
    same_group(g, b)?;
    let t = g.classes();
    let s: Cx = (0..t.len()).map(|j| a.values[j] * b.values[j].conj() * t.sizes[j] as f64).sum();
    Ok(s / g.order() as f64)
}

/// `<a, b>`, required to be an integer.
pub fn inner(g: &dyn Group, a: &ClassFunction, b: &ClassFunction) -> Result<i64, CharError> {
    let s = inner_raw(g, a, b)?;
    let r = s.re.round();
    if (s - Cx::new(r, 0.0)).norm() > TOL {
        return Err(CharError::NotIntegral(format!("{s}")));
    }
    Ok(r as i64)
}

pub fn is_irreducible(g: &dyn Group, chi: &ClassFunction) -> Result<bool, CharError> {
    Ok(inner(g, chi, chi)? == 1 && chi.degree() > 0.0)
}

/// Values of `chi` on the members of `sub`.
pub fn restrict(g: &dyn Group, sub: &Subgroup, chi: &ClassFunction) -> Vec<Cx> {
    let t = g.classes();
    sub.members.iter().map(|&x| chi.at(t, x)).collect()
}

/// Induced character of a class function of `sub` given by its values on members.
pub fn induce(g: &dyn Group, sub: &Subgroup, f: &[Cx]) -> ClassFunction {
    let t = g.classes();
    let mut acc = vec![Cx::new(0.0, 0.0); t.len()];
    for (&x, &v) in sub.members.iter().zip(f) {
        acc[t.class_of(x)] += v;
    }
    let n = g.order() as f64;
    let h = sub.order() as f64;
    let values = acc.iter().enumerate().map(|(j, &s)| s * n / (t.sizes[j] as f64 * h)).collect();
    ClassFunction::new(g, values)
}

/// `chi o epi` on the members of the epimorphism's source.
pub fn inflate(epi: &Epi, target: &dyn Group, chi: &ClassFunction) -> Result<Vec<Cx>, CharError> {
    same_group(target, chi)?;
    let t = target.classes();
    Ok(epi.map.iter().map(|&y| chi.at(t, y)).collect())
}

/// Averages along the fibers of `epi`.
pub fn pushforward(epi: &Epi, f: &[Cx], target: &dyn Group) -> Result<ClassFunction, CharError> {
    let mut acc = vec![Cx::new(0.0, 0.0); target.order()];
    for (&y, &v) in epi.map.iter().zip(f) {
        acc[y] += v;
    }
    let u = (epi.source.order() / target.order()) as f64;
    let t = target.classes();
    for (y, a) in acc.iter().enumerate() {
        if (a - acc[t.reps[t.class_of(y)]]).norm() > TOL * u.max(1.0) {
            return Err(CharError::NotClassFunction(target.name()));
        }
    }
    Ok(ClassFunction::new(target, t.reps.iter().map(|&r| acc[r] / u).collect()))
}

/// A linear character given by exponents mod `modulus` on every element.
pub fn linear_to_class(g: &dyn Group, exps: &[u32], modulus: u32) -> ClassFunction {
    ClassFunction::new(g, g.classes().reps.iter().map(|&r| root_of_unity(exps[r], modulus)).collect())
}

/// All linear characters of `g`, trivial first.
pub fn linear_characters(g: &dyn Group) -> Vec<ClassFunction> {
    let all: Vec<usize> = (0..g.order()).collect();
    let (chars, m) = group::linear_characters(g, &all);
    chars.iter().map(|c| linear_to_class(g, c, m)).collect()
}

/// Linear characters of a subgroup, as values on its members.
pub fn subgroup_linear_characters(g: &dyn FiniteGroup, sub: &Subgroup) -> Vec<Vec<Cx>> {
    let (chars, m) = group::linear_characters(g, &sub.members);
    chars.iter().map(|c| sub.members.iter().map(|&x| root_of_unity(c[x], m)).collect()).collect()
}

/// The characters `chi_z o det`, `z` running over `o_1` in index order.
pub fn twist_characters(g: &Glam) -> Result<Vec<ClassFunction>, CharError> {
    let level = g.det_level();
    let tw = twisting_characters(g.tower(), level)?;
    let units = UnitGroup::new(g.ring(level));
    let reps = &g.classes().reps;
    Ok(tw
        .iter()
        .map(|c| ClassFunction::new(g, reps.iter().map(|&r| c.value(units.index_of(g.det(r)))).collect()))
        .collect())
}

pub fn twist(chi: &ClassFunction, twist_char: &ClassFunction) -> ClassFunction {
    chi.mul(twist_char)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Side {
    Embed,
    Quot,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FunctorKind {
    GeoInd,
    GeoRes,
    InfIndEmbed,
    InfIndQuot,
    InfResEmbed,
    InfResQuot,
}

/// A functor application request. `mu` is required for the infinitesimal kinds;
/// `upper` selects the parabolic (`c = 0` when true) for the geometric kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FunctorSpec {
    pub kind: FunctorKind,
    pub mu: Option<Lambda>,
    pub upper: bool,
}

struct InfData {
    epi: Epi,
    target: Arc<Glam>,
}

/// The functors out of and into one `G_lambda`, with their parabolics cached.
pub struct Functors {
    pub g: Arc<Glam>,
    pub universe: Arc<Universe>,
    levi: Arc<Levi>,
    upper: Epi,
    lower: Epi,
    inf: Mutex<BTreeMap<(Lambda, Side), Arc<InfData>>>,
}

impl Functors {
    pub fn new(universe: Arc<Universe>, lambda: Lambda) -> Result<Functors, CharError> {
        if lambda.l2 == 0 {
            return Err(CharError::NotAllowed(format!("no parabolics in rank 1 ({lambda})")));
        }
        let g = universe.group(lambda)?;
        let levi = universe.levi(lambda.l1, lambda.l2)?;
        let upper = g.iota(&levi, true)?;
        let lower = g.iota(&levi, false)?;
        Ok(Functors { g, universe, levi, upper, lower, inf: Mutex::new(BTreeMap::new()) })
    }

    pub fn levi(&self) -> &Levi {
        &self.levi
    }

    fn geo_epi(&self, upper: bool) -> &Epi {
        if upper {
            &self.upper
        } else {
            &self.lower
        }
    }

    /// `Ind_P Inf theta` for a character of `G_(l1) x G_(l2)`.
    pub fn geo_ind(&self, theta: &ClassFunction, upper: bool) -> Result<ClassFunction, CharError> {
        let epi = self.geo_epi(upper);
        let f = inflate(epi, &*self.levi, theta)?;
        Ok(induce(&*self.g, &epi.source, &f))
    }

    pub fn geo_res(&self, chi: &ClassFunction, upper: bool) -> Result<ClassFunction, CharError> {
        same_group(&*self.g, chi)?;
        let epi = self.geo_epi(upper);
        pushforward(epi, &restrict(&*self.g, &epi.source, chi), &*self.levi)
    }

    fn inf_data(&self, mu: Lambda, side: Side) -> Result<Arc<InfData>, CharError> {
        let lambda = self.g.lambda;
        if mu.l1 != lambda.l1 || mu.l2 >= lambda.l2 {
            return Err(CharError::NotAllowed(format!("infinitesimal functor from {mu} to {lambda}")));
        }
        if let Some(d) = self.inf.lock().unwrap().get(&(mu, side)) {
            return Ok(d.clone());
        }
        let target = self.universe.group(mu)?;
        let epi = match side {
            Side::Embed => self.g.phi_embed(&target)?,
            Side::Quot => self.g.eps_quot(&target)?,
        };
        let d = Arc::new(InfData { epi, target });
        Ok(self.inf.lock().unwrap().entry((mu, side)).or_insert(d).clone())
    }

    pub fn inf_group(&self, mu: Lambda) -> Result<Arc<Glam>, CharError> {
        Ok(self.inf_data(mu, Side::Embed)?.target.clone())
    }

    pub fn inf_ind(&self, mu: Lambda, side: Side, chi: &ClassFunction) -> Result<ClassFunction, CharError> {
        let d = self.inf_data(mu, side)?;
        let f = inflate(&d.epi, &*d.target, chi)?;
        Ok(induce(&*self.g, &d.epi.source, &f))
    }

    pub fn inf_res(&self, mu: Lambda, side: Side, chi: &ClassFunction) -> Result<ClassFunction, CharError> {
        same_group(&*self.g, chi)?;
        let d = self.inf_data(mu, side)?;
        pushforward(&d.epi, &restrict(&*self.g, &d.epi.source, chi), &*d.target)
    }

    pub fn apply(&self, spec: &FunctorSpec, input: &ClassFunction) -> Result<ClassFunction, CharError> {
        let mu = || spec.mu.ok_or_else(|| CharError::NotAllowed("infinitesimal functor needs mu".into()));
        match spec.kind {
            FunctorKind::GeoInd => self.geo_ind(input, spec.upper),
            FunctorKind::GeoRes => self.geo_res(input, spec.upper),
            FunctorKind::InfIndEmbed => self.inf_ind(mu()?, Side::Embed, input),
            FunctorKind::InfIndQuot => self.inf_ind(mu()?, Side::Quot, input),
            FunctorKind::InfResEmbed => self.inf_res(mu()?, Side::Embed, input),
            FunctorKind::InfResQuot => self.inf_res(mu()?, Side::Quot, input),
        }
    }

    /// Every restriction functor the cuspidality test runs: both parabolics and
    /// both infinitesimal sides for each `mu` in `I_lambda`.
    pub fn restriction_battery(&self) -> Vec<FunctorSpec> {
        let mut out = vec![
            FunctorSpec { kind: FunctorKind::GeoRes, mu: None, upper: true },
            FunctorSpec { kind: FunctorKind::GeoRes, mu: None, upper: false },
        ];
        for mu in crate::glam::i_lambda(self.g.lambda) {
            out.push(FunctorSpec { kind: FunctorKind::InfResEmbed, mu: Some(mu), upper: true });
            out.push(FunctorSpec { kind: FunctorKind::InfResQuot, mu: Some(mu), upper: true });
        }
        out
    }

    /// Literal cuspidality: irreducible, primitive, and every twist by a linear
    /// character of `G` is killed by every restriction functor.
    pub fn is_cuspidal(&self, chi: &ClassFunction, spectrum: Option<&KAnalyzer>, lin: &[ClassFunction]) -> Result<bool, CharError> {
        if !is_irreducible(&*self.g, chi)? {
            return Err(CharError::Reducible(inner(&*self.g, chi, chi)?));
        }
        if let Some(k) = spectrum {
            if !k.is_primitive(chi)? {
                return Ok(false);
            }
        }
        let battery = self.restriction_battery();
        for l in lin {
            let t = chi.mul(l);
            for spec in &battery {
                if !self.apply(spec, &t)?.is_zero() {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Fourier analysis of characters restricted to `K = K^{1,0}`.
pub struct KAnalyzer {
    g: Arc<Glam>,
    k: Subgroup,
    modulus: u32,
    /// `pairing[t * |K| + j]`: exponent of character `t` at `k.members[j]`.
    pairing: Vec<u32>,
    orbit_of: Vec<usize>,
    labels: Vec<OrbitLabel>,
}

/// The characters of `K` an irreducible meets, all in one orbit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KSpectrum {
    pub orbit: usize,
    pub label: OrbitLabel,
    pub thetas: Vec<DualChar>,
}

impl KAnalyzer {
    pub fn new(g: Arc<Glam>) -> Result<KAnalyzer, CharError> {
        if g.lambda.l2 < 2 {
            return Err(CharError::NotAllowed(format!("K-spectrum needs l2 >= 2, got {}", g.lambda)));
        }
        let k = g.subgroup(SubgroupTag::Kis { i: 1, sigma: 0 })?;
        let n = orbit::dual_size(&g, 1, 0);
        let mut pairing = Vec::with_capacity(n * k.order());
        for t in 0..n {
            let theta = DualChar::from_index(&g, 1, 0, t);
            for &x in &k.members {
                pairing.push(orbit::pairing(&g, &theta, x).unwrap());
            }
        }
        let mut orbit_of = vec![0; n];
        let mut labels = Vec::new();
        for (o, orb) in orbit::dual_orbits(&g, 1, 0)?.iter().enumerate() {
            labels.push(orbit::classify_orbit(&g, &DualChar::from_index(&g, 1, 0, orb[0])));
            for &t in orb {
                orbit_of[t] = o;
            }
        }
        let modulus = g.ring(1).psi_modulus();
        Ok(KAnalyzer { g, k, modulus, pairing, orbit_of, labels })
    }

    /// Multiplicity of each character of `K` in `chi|K`.
    pub fn multiplicities(&self, chi: &ClassFunction) -> Result<Vec<i64>, CharError> {
        same_group(&*self.g, chi)?;
        let t = self.g.classes();
        let vals: Vec<Cx> = self.k.members.iter().map(|&x| chi.at(t, x)).collect();
        let nk = self.k.order();
        let roots: Vec<Cx> = (0..self.modulus).map(|e| root_of_unity(e, self.modulus).conj()).collect();
        let mut out = Vec::with_capacity(self.orbit_of.len());
        for th in 0..self.orbit_of.len() {
            let row = &self.pairing[th * nk..(th + 1) * nk];
            let s: Cx = vals.iter().zip(row).map(|(v, &e)| v * roots[e as usize]).sum::<Cx>() / nk as f64;
            let r = s.re.round();
            if (s - Cx::new(r, 0.0)).norm() > TOL {
                return Err(CharError::NotIntegral(format!("{s}")));
            }
            out.push(r as i64);
        }
        Ok(out)
    }

    pub fn spectrum(&self, chi: &ClassFunction) -> Result<KSpectrum, CharError> {
        let m = self.multiplicities(chi)?;
        let hit: Vec<usize> = (0..m.len()).filter(|&t| m[t] != 0).collect();
        let orbits: BTreeSet<usize> = hit.iter().map(|&t| self.orbit_of[t]).collect();
        if orbits.len() != 1 {
            return Err(CharError::MixedOrbits(orbits.len()));
        }
        let orbit = *orbits.iter().next().unwrap();
        Ok(KSpectrum {
            orbit,
            label: self.labels[orbit],
            thetas: hit.iter().map(|&t| DualChar::from_index(&self.g, 1, 0, t)).collect(),
        })
    }

    pub fn label(&self, chi: &ClassFunction) -> Result<OrbitLabel, CharError> {
        Ok(self.spectrum(chi)?.label)
    }

    pub fn is_primitive(&self, chi: &ClassFunction) -> Result<bool, CharError> {
        Ok(self.label(chi)?.kind != orbit::OrbitKind::I)
    }
}

/// Orbit of a character of `G_(l,1)` on the Heisenberg quotient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum HeisLabel {
    /// Nontrivial on the center `Z`.
    Q,
    A,
    BPlus,
    BMinus,
    C,
}

/// Classifies an irreducible of `G_(l,1)` by its restriction to `H`.
pub fn heis_label(g: &Glam, chi: &ClassFunction) -> Result<HeisLabel, CharError> {
    let z = g.subgroup(SubgroupTag::ZCenter)?;
    let h = g.subgroup(SubgroupTag::HHeis)?;
    let t = g.classes();
    let on_z: Cx = z.members.iter().map(|&x| chi.at(t, x)).sum::<Cx>() / z.order() as f64;
    if on_z.norm() < TOL {
        return Ok(HeisLabel::Q);
    }
    let r = g.ring(1);
    let vals: Vec<Cx> = h.members.iter().map(|&x| chi.at(t, x)).collect();
    let mut found = BTreeSet::new();
    for v in r.elements() {
        for w in r.elements() {
            let s: Cx = h
                .members
                .iter()
                .zip(&vals)
                .map(|(&x, val)| {
                    let e = g.elem(x);
                    val * r.psi_value(r.add(r.mul(v, e.b), r.mul(w, e.c))).conj()
                })
                .sum();
            if s.norm() / h.order() as f64 > 0.5 {
                found.insert(match (v != 0, w != 0) {
                    (false, false) => HeisLabel::A,
                    (false, true) => HeisLabel::BPlus,
                    (true, false) => HeisLabel::BMinus,
                    (true, true) => HeisLabel::C,
                });
            }
        }
    }
    if found.len() != 1 {
        return Err(CharError::MixedOrbits(found.len()));
    }
    Ok(*found.iter().next().unwrap())
}

/// Removes duplicates, keeping first occurrences.
pub fn dedupe(chars: Vec<ClassFunction>) -> Vec<ClassFunction> {
    let mut seen = BTreeSet::new();
    chars.into_iter().filter(|c| seen.insert(c.fingerprint())).collect()
}

/// Checks that `chars` are irreducible and pairwise orthogonal.
pub fn check_orthonormal(g: &dyn Group, chars: &[ClassFunction]) -> Result<bool, CharError> {
    for (i, a) in chars.iter().enumerate() {
        if inner(g, a, a)? != 1 {
            return Ok(false);
        }
        for b in &chars[i + 1..] {
            if inner(g, a, b)? != 0 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
