//! Finite groups given by explicit multiplication, with the handful of
//! generic algorithms the constructions need: closures, generating sets,
//! derived subgroups and linear characters.

use std::collections::VecDeque;

/// A finite group on the elements `0..order()`.
pub trait FiniteGroup: Send + Sync {
    fn order(&self) -> usize;
    fn identity(&self) -> usize;
    fn mul(&self, x: usize, y: usize) -> usize;
    fn inv(&self, x: usize) -> usize;
    fn name(&self) -> String;

    fn conj(&self, g: usize, x: usize) -> usize {
        self.mul(self.mul(g, x), self.inv(g))
    }
}

/// A group whose conjugacy classes are available.
pub trait Group: FiniteGroup {
    fn classes(&self) -> &crate::orbit::ClassTable;
    fn gens(&self) -> Vec<usize>;
}

/// Marks membership of a subset in a dense bitmap.
pub fn member_mask(order: usize, members: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; order];
    for &m in members {
        mask[m] = true;
    }
    mask
}

/// The subgroup generated by `gens`, sorted.
pub fn closure(g: &dyn FiniteGroup, gens: &[usize]) -> Vec<usize> {
    let mut seen = vec![false; g.order()];
    let e = g.identity();
    seen[e] = true;
    let mut out = vec![e];
    let mut queue = VecDeque::from([e]);
    while let Some(x) = queue.pop_front() {
        for &s in gens {
            let y = g.mul(x, s);
            if !seen[y] {
                seen[y] = true;
                out.push(y);
                queue.push_back(y);
            }
        }
    }
    out.sort_unstable();
    out
}

/// A generating set of the subgroup `members`, chosen greedily in member order.
pub fn generators(g: &dyn FiniteGroup, members: &[usize]) -> Vec<usize> {
    let mut inside = vec![false; g.order()];
    inside[g.identity()] = true;
    let mut current = vec![g.identity()];
    let mut gens = Vec::new();
    for &m in members {
        if inside[m] {
            continue;
        }
        gens.push(m);
        // Grow the closure incrementally: new elements are products of old
        // elements with the new generator and the previous generators.
        let mut queue: VecDeque<usize> = current.iter().copied().collect();
        while let Some(x) = queue.pop_front() {
            for &s in &gens {
                let y = g.mul(x, s);
                if !inside[y] {
                    inside[y] = true;
                    current.push(y);
                    queue.push_back(y);
                }
            }
        }
    }
    gens
}

pub fn element_order(g: &dyn FiniteGroup, x: usize) -> usize {
    let e = g.identity();
    let mut y = x;
    let mut n = 1;
    while y != e {
        y = g.mul(y, x);
        n += 1;
    }
    n
}

pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Least common multiple of the element orders over `members`.
pub fn exponent(g: &dyn FiniteGroup, members: &[usize]) -> u32 {
    members.iter().fold(1u64, |acc, &x| lcm(acc, element_order(g, x) as u64)) as u32
}

/// Commutator subgroup of the subgroup `members`.
pub fn derived_subgroup(g: &dyn FiniteGroup, members: &[usize]) -> Vec<usize> {
    let gens = generators(g, members);
    let mut cgens = Vec::new();
    for &x in &gens {
        for &y in &gens {
            let c = g.mul(g.mul(x, y), g.mul(g.inv(x), g.inv(y)));
            if c != g.identity() {
                cgens.push(c);
            }
        }
    }
    // Normal closure of the generator commutators inside `members`.
    loop {
        let h = closure(g, &cgens);
        let mask = member_mask(g.order(), &h);
        let mut grew = false;
        let hgens = generators(g, &h);
        for &x in &hgens {
            for &t in &gens {
                let y = g.conj(t, x);
                if !mask[y] {
                    cgens.push(y);
                    grew = true;
                }
            }
        }
        if !grew {
            return h;
        }
    }
}

/// All linear characters of the subgroup `target` that agree with `base` on
/// the subgroup `start` (listed in the same order as `base`).
///
/// Characters are dense over `g.order()` with exponents modulo `modulus`
/// (values `exp(2 pi i v / modulus)`); non-members carry `u32::MAX`.
/// `start` must be normal in `target` with abelian quotient and `base` must be
/// a `target`-invariant linear character of `start`; `modulus` must be a
/// multiple of the exponent of `target`. The first output extends `base` by
/// zeros along the added generators.
pub fn extend_linear(
    g: &dyn FiniteGroup,
    target: &[usize],
    start: &[usize],
    base: &[u32],
    modulus: u32,
) -> Vec<Vec<u32>> {
    let n = g.order();
    let mut inside = vec![false; n];
    let mut members = start.to_vec();
    let mut first = vec![u32::MAX; n];
    for (&s, &v) in start.iter().zip(base) {
        inside[s] = true;
        first[s] = v % modulus;
    }
    let mut chars = vec![first];
    for &t in target {
        if inside[t] {
            continue;
        }
        let mut m = 1u32;
        let mut pw = t;
        let mut powers = vec![g.identity(), t];
        while !inside[pw] {
            pw = g.mul(pw, t);
            powers.push(pw);
            m += 1;
        }
        powers.truncate(m as usize);
        let mut next = Vec::with_capacity(chars.len() * m as usize);
        for chi in &chars {
            let target_val = chi[pw];
            let sols: Vec<u32> = (0..modulus).filter(|&e| (m as u64 * e as u64) % modulus as u64 == target_val as u64).collect();
            assert_eq!(sols.len() as u32, m, "modulus must be a multiple of the group exponent");
            for e in sols {
                let mut c = chi.clone();
                for (j, &tj) in powers.iter().enumerate().skip(1) {
                    let shift = (j as u64 * e as u64 % modulus as u64) as u32;
                    for &s in &members {
                        c[g.mul(s, tj)] = (chi[s] + shift) % modulus;
                    }
                }
                next.push(c);
            }
        }
        let old = members.clone();
        for &tj in powers.iter().skip(1) {
            for &s in &old {
                let x = g.mul(s, tj);
                inside[x] = true;
                members.push(x);
            }
        }
        chars = next;
    }
    assert_eq!(members.len(), target.len(), "target must be a subgroup containing start");
    chars
}

/// All linear characters of the subgroup `members`, trivial first.
pub fn linear_characters(g: &dyn FiniteGroup, members: &[usize]) -> (Vec<Vec<u32>>, u32) {
    let derived = derived_subgroup(g, members);
    let modulus = exponent(g, members);
    let zeros = vec![0; derived.len()];
    (extend_linear(g, members, &derived, &zeros, modulus), modulus)
}

/// Checks that `members` is closed under multiplication by its own generators
/// and contains the identity, i.e. is a subgroup.
pub fn is_subgroup(g: &dyn FiniteGroup, members: &[usize]) -> bool {
    let gens = generators(g, members);
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    sorted.len() == members.len() && closure(g, &gens) == sorted
}
