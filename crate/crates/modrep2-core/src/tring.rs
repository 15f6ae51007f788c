//! Truncated local rings `o_l`, realized as `Z/p^l` or `F_q[t]/(t^l)`.
//!
//! Elements are plain `u32` indices in `[0, q^l)`. For the p-adic backend the
//! index is the residue itself; for the polynomial backend it is
//! `sum c_i q^i` where `c_i` is the index of the i-th coefficient in `F_q`.
//! Both encodings share the property that reduction to level `m` is
//! `x mod q^m`, multiplication by `pi^k` is `x * q^k`, and the valuation is
//! the number of trailing zero base-q digits. Everything downstream relies on
//! that uniformity.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::group::{self, FiniteGroup};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Padic,
    Tpoly,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Padic => "padic",
            Backend::Tpoly => "tpoly",
        })
    }
}

impl FromStr for Backend {
    type Err = RingError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "padic" => Ok(Backend::Padic),
            "tpoly" => Ok(Backend::Tpoly),
            other => Err(RingError::UnknownBackend(other.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RingError {
    #[error("unknown backend {0:?} (expected padic or tpoly)")]
    UnknownBackend(String),
    #[error("q = {0} is too small; the residue field needs at least 2 elements")]
    SmallResidueField(u32),
    #[error("q = {0} is not prime; the padic backend realizes Z/q^l and needs a prime")]
    NotPrime(u32),
    #[error("q = {0} is not a prime power")]
    NotPrimePower(u32),
    #[error("level must be at least 1")]
    ZeroLevel,
    #[error("ring of size {0} is beyond the supported range")]
    TooLarge(u64),
    #[error("{0} is not a unit")]
    NonUnit(u32),
    #[error("cannot reduce from level {from} to level {to}")]
    BadLevel { from: u32, to: u32 },
    #[error("elements belong to different rings")]
    Mismatch,
    #[error("group {0} is not abelian")]
    NotAbelian(String),
    #[error("twisting characters need level at least 2, got {0}")]
    TwistLevel(u32),
}

/// Residue field size, backend and level of a truncated local ring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RingSpec {
    pub backend: Backend,
    pub q: u32,
    #[serde(rename = "l")]
    pub level: u32,
}

/// `(p, k)` with `q = p^k`, or `None`.
pub fn prime_power(q: u32) -> Option<(u32, u32)> {
    if q < 2 {
        return None;
    }
    let p = (2..=q).find(|d| q.is_multiple_of(*d))?;
    let mut r = q;
    let mut k = 0;
    while r.is_multiple_of(p) {
        r /= p;
        k += 1;
    }
    (r == 1).then_some((p, k))
}

pub fn make_ring(backend: Backend, q: u32, level: u32) -> Result<RingSpec, RingError> {
    if q < 2 {
        return Err(RingError::SmallResidueField(q));
    }
    if level < 1 {
        return Err(RingError::ZeroLevel);
    }
    let (_, k) = prime_power(q).ok_or(RingError::NotPrimePower(q))?;
    if backend == Backend::Padic && k != 1 {
        return Err(RingError::NotPrime(q));
    }
    let size = (q as u64).checked_pow(level).unwrap_or(u64::MAX);
    if size > 1 << 16 {
        return Err(RingError::TooLarge(size));
    }
    Ok(RingSpec { backend, q, level })
}

impl RingSpec {
    pub fn size(&self) -> u32 {
        self.q.pow(self.level)
    }

    pub fn unit_count(&self) -> u32 {
        if self.level == 0 {
            1
        } else {
            self.q.pow(self.level - 1) * (self.q - 1)
        }
    }

    pub fn p(&self) -> u32 {
        prime_power(self.q).map(|(p, _)| p).unwrap_or(self.q)
    }

    /// Same backend and residue field at another level. Level 0 is the zero ring.
    pub fn at_level(&self, level: u32) -> RingSpec {
        RingSpec { level, ..*self }
    }
}

impl fmt::Display for RingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.backend {
            Backend::Padic => write!(f, "Z/{}^{}", self.q, self.level),
            Backend::Tpoly => write!(f, "F_{}[t]/t^{}", self.q, self.level),
        }
    }
}

/// Polynomials over F_p as coefficient vectors, low degree first.
fn poly_rem(mut a: Vec<u32>, m: &[u32], p: u32) -> Vec<u32> {
    let dm = m.len() - 1;
    let lead_inv = inv_mod(m[dm], p);
    while a.len() > dm {
        let top = a.pop().unwrap();
        if top == 0 {
            continue;
        }
        let f = top * lead_inv % p;
        let shift = a.len() - dm;
        for (i, &mi) in m[..dm].iter().enumerate() {
            a[shift + i] = (a[shift + i] + p - f * mi % p) % p;
        }
    }
    a
}

fn inv_mod(x: u32, p: u32) -> u32 {
    (1..p).find(|y| x * y % p == 1).expect("inverse exists in a prime field")
}

fn digits(mut x: u32, base: u32, n: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(x % base);
        x /= base;
    }
    out
}

fn undigits(d: &[u32], base: u32) -> u32 {
    d.iter().rev().fold(0, |acc, &c| acc * base + c)
}

/// The finite field with `q = p^k` elements, as F_p[x]/(f) with `f` the first
/// monic irreducible of degree k when lower coefficients are read as a base-p
/// number. Element index = base-p digits of the coefficient vector.
#[derive(Debug)]
pub struct Fq {
    pub p: u32,
    pub k: u32,
    pub q: u32,
    pub modulus: Vec<u32>,
    add: Vec<u32>,
    mul: Vec<u32>,
    trace: Vec<u32>,
}

fn is_irreducible(f: &[u32], p: u32) -> bool {
    let deg = f.len() - 1;
    for d in 1..=deg / 2 {
        for low in 0..p.pow(d as u32) {
            let mut g = digits(low, p, d);
            g.push(1);
            if poly_rem(f.to_vec(), &g, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

impl Fq {
    pub fn new(q: u32) -> Result<Fq, RingError> {
        let (p, k) = prime_power(q).ok_or(RingError::NotPrimePower(q))?;
        let modulus = if k == 1 {
            vec![0, 1]
        } else {
            (0..p.pow(k))
                .map(|low| {
                    let mut f = digits(low, p, k as usize);
                    f.push(1);
                    f
                })
                .find(|f| is_irreducible(f, p))
                .expect("irreducible polynomials exist in every degree")
        };
        let n = q as usize;
        let mut add = vec![0; n * n];
        let mut mul = vec![0; n * n];
        for x in 0..q {
            let dx = digits(x, p, k as usize);
            for y in 0..q {
                let dy = digits(y, p, k as usize);
                let s: Vec<u32> = dx.iter().zip(&dy).map(|(a, b)| (a + b) % p).collect();
                add[(x * q + y) as usize] = undigits(&s, p);
                let mut prod = vec![0; 2 * k as usize];
                for (i, a) in dx.iter().enumerate() {
                    for (j, b) in dy.iter().enumerate() {
                        prod[i + j] = (prod[i + j] + a * b) % p;
                    }
                }
                let mut r = if k == 1 { vec![prod[0]] } else { poly_rem(prod, &modulus, p) };
                r.resize(k as usize, 0);
                mul[(x * q + y) as usize] = undigits(&r, p);
            }
        }
        let mut f = Fq { p, k, q, modulus, add, mul, trace: vec![0; n] };
        for x in 0..q {
            let mut acc = 0;
            let mut pw = x;
            for _ in 0..k {
                acc = f.add(acc, pw);
                let mut next = 1;
                for _ in 0..p {
                    next = f.mul(next, pw);
                }
                pw = next;
            }
            debug_assert!(acc < p, "trace lands in the prime field");
            f.trace[x as usize] = acc;
        }
        Ok(f)
    }

    pub fn add(&self, x: u32, y: u32) -> u32 {
        self.add[(x * self.q + y) as usize]
    }

    pub fn mul(&self, x: u32, y: u32) -> u32 {
        self.mul[(x * self.q + y) as usize]
    }

    /// Absolute trace to F_p, as an integer in `[0, p)`.
    pub fn trace(&self, x: u32) -> u32 {
        self.trace[x as usize]
    }
}

/// A truncated local ring with all operation tables precomputed.
#[derive(Debug)]
pub struct Ring {
    pub spec: RingSpec,
    size: u32,
    add: Vec<u32>,
    mul: Vec<u32>,
    neg: Vec<u32>,
    inv: Vec<u32>,
    val: Vec<u32>,
    psi: Vec<u32>,
    psi_modulus: u32,
}

const NO_INVERSE: u32 = u32::MAX;

impl Ring {
    /// Builds tables for `spec`; level 0 gives the zero ring.
    pub fn new(spec: RingSpec) -> Ring {
        let q = spec.q;
        let l = spec.level;
        let size = q.pow(l);
        let n = size as usize;
        let mut add = vec![0; n * n];
        let mut mul = vec![0; n * n];
        let p = spec.p();
        match spec.backend {
            Backend::Padic => {
                for x in 0..size {
                    for y in 0..size {
                        add[(x * size + y) as usize] = (x + y) % size;
                        mul[(x * size + y) as usize] = ((x as u64 * y as u64) % size as u64) as u32;
                    }
                }
            }
            Backend::Tpoly => {
                let f = Fq::new(q).expect("validated by make_ring");
                let ld = l as usize;
                for x in 0..size {
                    let dx = digits(x, q, ld);
                    for y in 0..size {
                        let dy = digits(y, q, ld);
                        let s: Vec<u32> = dx.iter().zip(&dy).map(|(&a, &b)| f.add(a, b)).collect();
                        add[(x * size + y) as usize] = undigits(&s, q);
                        let mut prod = vec![0; ld];
                        for i in 0..ld {
                            for j in 0..ld - i {
                                prod[i + j] = f.add(prod[i + j], f.mul(dx[i], dy[j]));
                            }
                        }
                        mul[(x * size + y) as usize] = undigits(&prod, q);
                    }
                }
            }
        }
        let mut ring = Ring {
            spec,
            size,
            add,
            mul,
            neg: vec![0; n],
            inv: vec![NO_INVERSE; n],
            val: vec![0; n],
            psi: vec![0; n],
            psi_modulus: 1,
        };
        for x in 0..size {
            ring.neg[x as usize] = (0..size).find(|&y| ring.add(x, y) == 0).unwrap();
            let mut v = 0;
            let mut r = x;
            while v < l && r % q == 0 {
                r /= q;
                v += 1;
            }
            ring.val[x as usize] = v;
        }
        let one = ring.one();
        for x in 0..size {
            if let Some(y) = (0..size).find(|&y| ring.mul(x, y) == one) {
                ring.inv[x as usize] = y;
            }
        }
        if l > 0 {
            match spec.backend {
                Backend::Padic => {
                    ring.psi_modulus = size;
                    for x in 0..size {
                        ring.psi[x as usize] = x;
                    }
                }
                Backend::Tpoly => {
                    let f = Fq::new(q).unwrap();
                    ring.psi_modulus = p;
                    let top = q.pow(l - 1);
                    for x in 0..size {
                        ring.psi[x as usize] = f.trace(x / top);
                    }
                }
            }
        }
        ring
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn level(&self) -> u32 {
        self.spec.level
    }

    pub fn zero(&self) -> u32 {
        0
    }

    /// Index 1 is the identity in both encodings (the zero ring aside).
    pub fn one(&self) -> u32 {
        if self.size == 1 {
            0
        } else {
            1
        }
    }

    #[inline]
    pub fn add(&self, x: u32, y: u32) -> u32 {
        self.add[(x * self.size + y) as usize]
    }

    #[inline]
    pub fn sub(&self, x: u32, y: u32) -> u32 {
        self.add(x, self.neg(y))
    }

    #[inline]
    pub fn mul(&self, x: u32, y: u32) -> u32 {
        self.mul[(x * self.size + y) as usize]
    }

    #[inline]
    pub fn neg(&self, x: u32) -> u32 {
        self.neg[x as usize]
    }

    #[inline]
    pub fn is_unit(&self, x: u32) -> bool {
        self.inv[x as usize] != NO_INVERSE
    }

    /// Inverse of a unit; panics on non-units. Use [`Ring::try_inv`] for checked use.
    #[inline]
    pub fn inv(&self, x: u32) -> u32 {
        let y = self.inv[x as usize];
        assert!(y != NO_INVERSE, "{x} is not a unit in {}", self.spec);
        y
    }

    pub fn try_inv(&self, x: u32) -> Result<u32, RingError> {
        match self.inv[x as usize] {
            NO_INVERSE => Err(RingError::NonUnit(x)),
            y => Ok(y),
        }
    }

    #[inline]
    pub fn valuation(&self, x: u32) -> u32 {
        self.val[x as usize]
    }

    /// `pi^k`, zero once `k` reaches the level.
    pub fn pi_pow(&self, k: u32) -> u32 {
        if k >= self.spec.level {
            0
        } else {
            self.spec.q.pow(k)
        }
    }

    /// Image of the integer `n` under `Z -> o_l`.
    pub fn from_int(&self, n: i64) -> u32 {
        match self.spec.backend {
            Backend::Padic => n.rem_euclid(self.size as i64) as u32,
            Backend::Tpoly => {
                if self.size == 1 {
                    0
                } else {
                    n.rem_euclid(self.spec.p() as i64) as u32
                }
            }
        }
    }

    pub fn elements(&self) -> impl Iterator<Item = u32> {
        0..self.size
    }

    pub fn units(&self) -> Vec<u32> {
        (0..self.size).filter(|&x| self.is_unit(x)).collect()
    }

    /// The fixed primitive additive character as `(k, n)` meaning `exp(2 pi i k / n)`.
    pub fn psi(&self, x: u32) -> (u32, u32) {
        (self.psi[x as usize], self.psi_modulus)
    }

    pub fn psi_value(&self, x: u32) -> Complex64 {
        root_of_unity(self.psi[x as usize], self.psi_modulus)
    }

    pub fn psi_modulus(&self) -> u32 {
        self.psi_modulus
    }
}

/// Reduction `o_l -> o_m` on indices.
#[inline]
pub fn reduce(spec: &RingSpec, x: u32, m: u32) -> u32 {
    x % spec.q.pow(m)
}

/// Exact division by `pi^k` of an element with valuation at least `k`.
#[inline]
pub fn div_pi(spec: &RingSpec, x: u32, k: u32) -> u32 {
    x / spec.q.pow(k)
}

pub fn root_of_unity(k: u32, n: u32) -> Complex64 {
    Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / n as f64)
}

/// A ring element tagged with its ring.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RingElem {
    pub spec: RingSpec,
    pub repr: u32,
}

impl RingElem {
    pub fn new(spec: RingSpec, repr: u32) -> Result<RingElem, RingError> {
        if repr >= spec.size() {
            return Err(RingError::Mismatch);
        }
        Ok(RingElem { spec, repr })
    }

    pub fn valuation(&self) -> u32 {
        let mut v = 0;
        let mut r = self.repr;
        while v < self.spec.level && r.is_multiple_of(self.spec.q) {
            r /= self.spec.q;
            v += 1;
        }
        v
    }

    pub fn reduce(&self, m: u32) -> Result<RingElem, RingError> {
        if m < 1 || m > self.spec.level {
            return Err(RingError::BadLevel { from: self.spec.level, to: m });
        }
        Ok(RingElem { spec: self.spec.at_level(m), repr: reduce(&self.spec, self.repr, m) })
    }

    /// Canonical-representative section of the reduction to `self`'s level.
    pub fn lift(&self, level: u32) -> Result<RingElem, RingError> {
        if level < self.spec.level {
            return Err(RingError::BadLevel { from: self.spec.level, to: level });
        }
        Ok(RingElem { spec: self.spec.at_level(level), repr: self.repr })
    }

    /// Coefficient vector over F_q (low degree first) or base-p digits for padic.
    pub fn coefficients(&self) -> Vec<u32> {
        digits(self.repr, self.spec.q, self.spec.level as usize)
    }
}

/// Checked arithmetic on tagged elements, resolved against a table ring.
impl Ring {
    pub fn elem(&self, repr: u32) -> Result<RingElem, RingError> {
        RingElem::new(self.spec, repr)
    }

    fn check(&self, x: &RingElem) -> Result<u32, RingError> {
        if x.spec != self.spec {
            return Err(RingError::Mismatch);
        }
        Ok(x.repr)
    }

    pub fn add_elem(&self, x: &RingElem, y: &RingElem) -> Result<RingElem, RingError> {
        Ok(RingElem { spec: self.spec, repr: self.add(self.check(x)?, self.check(y)?) })
    }

    pub fn mul_elem(&self, x: &RingElem, y: &RingElem) -> Result<RingElem, RingError> {
        Ok(RingElem { spec: self.spec, repr: self.mul(self.check(x)?, self.check(y)?) })
    }

    pub fn neg_elem(&self, x: &RingElem) -> Result<RingElem, RingError> {
        Ok(RingElem { spec: self.spec, repr: self.neg(self.check(x)?) })
    }

    pub fn inv_elem(&self, x: &RingElem) -> Result<RingElem, RingError> {
        Ok(RingElem { spec: self.spec, repr: self.try_inv(self.check(x)?)? })
    }
}

/// Rings at every level `0..=max_level` for one `(backend, q)`.
#[derive(Debug)]
pub struct RingTower {
    rings: Vec<Arc<Ring>>,
}

impl RingTower {
    pub fn new(base: RingSpec, max_level: u32) -> RingTower {
        RingTower { rings: (0..=max_level).map(|l| Arc::new(Ring::new(base.at_level(l)))).collect() }
    }

    pub fn at(&self, level: u32) -> &Ring {
        &self.rings[level as usize]
    }

    pub fn max_level(&self) -> u32 {
        self.rings.len() as u32 - 1
    }
}

/// `(o_l, +)` as a finite group.
pub struct AdditiveGroup<'a> {
    pub ring: &'a Ring,
}

impl FiniteGroup for AdditiveGroup<'_> {
    fn order(&self) -> usize {
        self.ring.size() as usize
    }
    fn identity(&self) -> usize {
        0
    }
    fn mul(&self, x: usize, y: usize) -> usize {
        self.ring.add(x as u32, y as u32) as usize
    }
    fn inv(&self, x: usize) -> usize {
        self.ring.neg(x as u32) as usize
    }
    fn name(&self) -> String {
        format!("({}, +)", self.ring.spec)
    }
}

/// `o_l^x` as a finite group; element `i` is `units[i]`.
pub struct UnitGroup<'a> {
    pub ring: &'a Ring,
    pub units: Vec<u32>,
    pos: Vec<u32>,
}

impl<'a> UnitGroup<'a> {
    pub fn new(ring: &'a Ring) -> Self {
        let units = ring.units();
        let mut pos = vec![u32::MAX; ring.size() as usize];
        for (i, &u) in units.iter().enumerate() {
            pos[u as usize] = i as u32;
        }
        UnitGroup { ring, units, pos }
    }

    pub fn index_of(&self, u: u32) -> usize {
        self.pos[u as usize] as usize
    }
}

impl FiniteGroup for UnitGroup<'_> {
    fn order(&self) -> usize {
        self.units.len()
    }
    fn identity(&self) -> usize {
        self.index_of(self.ring.one())
    }
    fn mul(&self, x: usize, y: usize) -> usize {
        self.index_of(self.ring.mul(self.units[x], self.units[y]))
    }
    fn inv(&self, x: usize) -> usize {
        self.index_of(self.ring.inv(self.units[x]))
    }
    fn name(&self) -> String {
        format!("({})^x", self.ring.spec)
    }
}

/// A linear character with values `exp(2 pi i values[x] / modulus)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AbelianCharacter {
    pub modulus: u32,
    pub values: Vec<u32>,
}

impl AbelianCharacter {
    pub fn value(&self, x: usize) -> Complex64 {
        root_of_unity(self.values[x], self.modulus)
    }

    pub fn is_trivial(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }
}

/// All characters of a finite abelian group, trivial character first.
pub fn character_group(a: &dyn FiniteGroup) -> Result<Vec<AbelianCharacter>, RingError> {
    let gens = group::generators(a, &(0..a.order()).collect::<Vec<_>>());
    for &x in &gens {
        for &y in &gens {
            if a.mul(x, y) != a.mul(y, x) {
                return Err(RingError::NotAbelian(a.name()));
            }
        }
    }
    let all: Vec<usize> = (0..a.order()).collect();
    let n = group::exponent(a, &all);
    let chars = group::extend_linear(a, &all, &[a.identity()], &[0], n);
    Ok(chars.into_iter().map(|values| AbelianCharacter { modulus: n, values }).collect())
}

/// The `q` characters `chi_z` of `o_l^x` with `chi_z(1 + pi^(l-1) x) = psi_1(z x)`,
/// indexed by `z` in `o_1`; each is the first match in `character_group` order.
pub fn twisting_characters(tower: &RingTower, level: u32) -> Result<Vec<AbelianCharacter>, RingError> {
    if level < 2 {
        return Err(RingError::TwistLevel(level));
    }
    let ring = tower.at(level);
    let r1 = tower.at(1);
    let units = UnitGroup::new(ring);
    let chars = character_group(&units)?;
    let top = ring.pi_pow(level - 1);
    let mut out = Vec::new();
    for z in r1.elements() {
        let found = chars.iter().find(|chi| {
            r1.elements().all(|x| {
                let u = units.index_of(ring.add(ring.one(), ring.mul(top, x)));
                let (k, n) = r1.psi(r1.mul(z, x));
                let big = n as u64 * chi.modulus as u64;
                (chi.values[u] as u64 * n as u64) % big == (k as u64 * chi.modulus as u64) % big
            })
        });
        out.push(found.expect("every character of 1+p^(l-1) extends").clone());
    }
    Ok(out)
}

/// All characters of `o_l^x`.
pub fn unit_characters(ring: &Ring) -> Vec<AbelianCharacter> {
    character_group(&UnitGroup::new(ring)).expect("unit groups are abelian")
}
