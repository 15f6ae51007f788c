//! Irreducible degrees of an explicit finite group from its class algebra,
//! by splitting the class matrices into common eigenvectors over a prime
//! field `F_r` with `r = 1 mod exponent` and `r > |G|`.

use rayon::prelude::*;
use thiserror::Error;

use crate::group::{self, FiniteGroup, Group};
use crate::irrbuild::ZetaPolynomial;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DixonError {
    #[error("eigenspace splitting left a block of dimension {0}")]
    Incomplete(usize),
    #[error("no prime = 1 mod {modulus} between {from} and {bound}")]
    NoPrime { modulus: u64, from: u64, bound: u64 },
    #[error("recovered degree data is inconsistent: {0}")]
    Inconsistent(String),
}

/// Structure constants `a[i][j][m]` of the class algebra.
pub struct ClassAlgebra {
    pub k: usize,
    pub sizes: Vec<usize>,
    pub inverse: Vec<usize>,
    pub identity: usize,
    pub order: usize,
    coeffs: Vec<u32>,
}

impl ClassAlgebra {
    /// `#{(x, y) in C_i x C_j : x y = z_m}` for the representative `z_m`.
    #[inline]
    pub fn a(&self, i: usize, j: usize, m: usize) -> u32 {
        self.coeffs[(i * self.k + j) * self.k + m]
    }
}

pub fn class_algebra(g: &dyn Group) -> ClassAlgebra {
    let t = g.classes();
    let k = t.len();
    let n = g.order();
    let columns: Vec<Vec<u32>> = t
        .reps
        .par_iter()
        .map(|&z| {
            let mut col = vec![0u32; k * k];
            for x in 0..n {
                let y = g.mul(g.inv(x), z);
                col[t.class_of(x) * k + t.class_of(y)] += 1;
            }
            col
        })
        .collect();
    let mut coeffs = vec![0u32; k * k * k];
    for (m, col) in columns.iter().enumerate() {
        for ij in 0..k * k {
            coeffs[ij * k + m] = col[ij];
        }
    }
    ClassAlgebra {
        k,
        sizes: t.sizes.clone(),
        inverse: t.inverse.clone(),
        identity: t.class_of(g.identity()),
        order: n,
        coeffs,
    }
}

pub fn exponent(g: &dyn FiniteGroup) -> u64 {
    group::exponent(g, &(0..g.order()).collect::<Vec<_>>()) as u64
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Smallest prime `r = 1 mod modulus` with `r > from`.
pub fn prime_above(modulus: u64, from: u64) -> Result<u64, DixonError> {
    let bound = from.saturating_mul(1000).max(1 << 20);
    let mut r = from / modulus * modulus + 1;
    if r <= from {
        r += modulus;
    }
    while r <= bound {
        if is_prime(r) {
            return Ok(r);
        }
        r += modulus;
    }
    Err(DixonError::NoPrime { modulus, from, bound })
}

fn pow_mod(mut b: u64, mut e: u64, r: u64) -> u64 {
    let mut acc = 1;
    b %= r;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * b % r;
        }
        b = b * b % r;
        e >>= 1;
    }
    acc
}

fn inv_mod(x: u64, r: u64) -> u64 {
    pow_mod(x, r - 2, r)
}

/// Characteristic polynomial (low degree first, monic) via Hessenberg reduction.
fn charpoly(mut h: Vec<Vec<u64>>, r: u64) -> Vec<u64> {
    let n = h.len();
    for m in 1..n.saturating_sub(1) {
        let Some(piv) = (m..n).find(|&i| h[i][m - 1] != 0) else { continue };
        if piv != m {
            h.swap(piv, m);
            for row in h.iter_mut() {
                row.swap(piv, m);
            }
        }
        let inv = inv_mod(h[m][m - 1], r);
        for i in m + 1..n {
            let f = h[i][m - 1] * inv % r;
            if f == 0 {
                continue;
            }
            for j in 0..n {
                h[i][j] = (h[i][j] + r - f * h[m][j] % r) % r;
            }
            for row in h.iter_mut() {
                row[m] = (row[m] + f * row[i]) % r;
            }
        }
    }
    // p_m = (x - h[m][m]) p_{m-1} - sum_i h[i][m] (prod_{j=i+1..m} h[j][j-1]) p_{i-1}, 0-indexed.
    let mut polys: Vec<Vec<u64>> = vec![vec![1]];
    for m in 0..n {
        let prev = &polys[m];
        let mut p = vec![0u64; m + 2];
        for (d, &c) in prev.iter().enumerate() {
            p[d + 1] = (p[d + 1] + c) % r;
            p[d] = (p[d] + r - c * h[m][m] % r) % r;
        }
        let mut prod = 1u64;
        for i in (0..m).rev() {
            prod = prod * h[i + 1][i] % r;
            let coef = h[i][m] * prod % r;
            if coef == 0 {
                continue;
            }
            for (d, &c) in polys[i].iter().enumerate() {
                p[d] = (p[d] + r - coef * c % r) % r;
            }
        }
        polys.push(p);
    }
    polys.pop().unwrap()
}

fn eval(p: &[u64], x: u64, r: u64) -> u64 {
    p.iter().rev().fold(0, |acc, &c| (acc * x + c) % r)
}

/// Kernel of a `w x w` matrix over `F_r`, as coordinate vectors.
fn kernel(mut a: Vec<Vec<u64>>, r: u64) -> Vec<Vec<u64>> {
    let rows = a.len();
    let cols = if rows == 0 { 0 } else { a[0].len() };
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        let Some(p) = (row..rows).find(|&i| a[i][col] != 0) else { continue };
        a.swap(p, row);
        let inv = inv_mod(a[row][col], r);
        for v in a[row].iter_mut() {
            *v = *v * inv % r;
        }
        for i in 0..rows {
            if i != row && a[i][col] != 0 {
                let f = a[i][col];
                for j in 0..cols {
                    a[i][j] = (a[i][j] + r - f * a[row][j] % r) % r;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![0u64; cols];
            v[f] = 1;
            for (i, &p) in pivots.iter().enumerate() {
                v[p] = (r - a[i][f]) % r;
            }
            v
        })
        .collect()
}

/// A subspace in reduced echelon form: `basis[j][pivots[j]] = 1`, zero at other pivots.
struct Block {
    basis: Vec<Vec<u64>>,
    pivots: Vec<usize>,
}

fn echelon(mut vecs: Vec<Vec<u64>>, r: u64) -> Block {
    let mut pivots = Vec::new();
    let n = vecs.first().map_or(0, |v| v.len());
    let mut row = 0;
    for col in 0..n {
        let Some(p) = (row..vecs.len()).find(|&i| vecs[i][col] != 0) else { continue };
        vecs.swap(p, row);
        let inv = inv_mod(vecs[row][col], r);
        for v in vecs[row].iter_mut() {
            *v = *v * inv % r;
        }
        for i in 0..vecs.len() {
            if i != row && vecs[i][col] != 0 {
                let f = vecs[i][col];
                for j in 0..n {
                    vecs[i][j] = (vecs[i][j] + r - f * vecs[row][j] % r) % r;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    vecs.truncate(row);
    Block { basis: vecs, pivots }
}

/// Splits `block` by the eigenvalues of `M_i` restricted to it.
fn split(alg: &ClassAlgebra, i: usize, block: Block, r: u64) -> Result<Vec<Block>, DixonError> {
    let k = alg.k;
    let w = block.basis.len();
    let images: Vec<Vec<u64>> = block
        .basis
        .iter()
        .map(|b| (0..k).map(|j| (0..k).fold(0u64, |acc, m| (acc + alg.a(i, j, m) as u64 * b[m]) % r)).collect())
        .collect();
    // a[j'][j] = coordinate j' of M b_j.
    let a: Vec<Vec<u64>> = (0..w).map(|jp| (0..w).map(|j| images[j][block.pivots[jp]]).collect()).collect();
    let poly = charpoly(a.clone(), r);
    let roots: Vec<u64> = (0..r).filter(|&x| eval(&poly, x, r) == 0).collect();
    if roots.len() == 1 {
        return Ok(vec![block]);
    }
    let mut out = Vec::new();
    let mut total = 0;
    for theta in roots {
        let mut shifted = a.clone();
        for (d, row) in shifted.iter_mut().enumerate() {
            row[d] = (row[d] + r - theta) % r;
        }
        let ker = kernel(shifted, r);
        total += ker.len();
        let vecs: Vec<Vec<u64>> = ker
            .iter()
            .map(|c| {
                (0..k).map(|m| c.iter().zip(&block.basis).fold(0u64, |acc, (&cj, b)| (acc + cj * b[m]) % r)).collect()
            })
            .collect();
        out.push(echelon(vecs, r));
    }
    if total != w {
        return Err(DixonError::Inconsistent(format!("eigenspaces of dimension {total} in a block of {w}")));
    }
    Ok(out)
}

/// Degrees via the prime `r` (must be `= 1 mod exponent` and exceed `|G|`).
pub fn degrees_with_prime(alg: &ClassAlgebra, r: u64) -> Result<ZetaPolynomial, DixonError> {
    let k = alg.k;
    let whole: Vec<Vec<u64>> = (0..k).map(|i| (0..k).map(|j| (i == j) as u64).collect()).collect();
    let mut blocks = vec![echelon(whole, r)];
    for i in 0..k {
        if blocks.iter().all(|b| b.basis.len() == 1) {
            break;
        }
        let mut next = Vec::new();
        for b in blocks {
            if b.basis.len() == 1 {
                next.push(b);
            } else {
                next.extend(split(alg, i, b, r)?);
            }
        }
        blocks = next;
    }
    if let Some(b) = blocks.iter().find(|b| b.basis.len() > 1) {
        return Err(DixonError::Incomplete(b.basis.len()));
    }
    let mut zeta = ZetaPolynomial::default();
    for b in &blocks {
        let v = &b.basis[0];
        let e = v[alg.identity];
        if e == 0 {
            return Err(DixonError::Inconsistent("eigenvector vanishes at the identity class".into()));
        }
        let ei = inv_mod(e, r);
        let omega: Vec<u64> = v.iter().map(|&x| x * ei % r).collect();
        let s = (0..k).fold(0u64, |acc, c| {
            (acc + omega[c] * omega[alg.inverse[c]] % r * inv_mod(alg.sizes[c] as u64 % r, r)) % r
        });
        if s == 0 {
            return Err(DixonError::Inconsistent("vanishing orthogonality sum".into()));
        }
        let d2 = alg.order as u64 % r * inv_mod(s, r) % r;
        let d = (d2 as f64).sqrt().round() as u64;
        if d * d != d2 || d == 0 || !(alg.order as u64).is_multiple_of(d) {
            return Err(DixonError::Inconsistent(format!("d^2 = {d2} is not the square of a divisor of |G|")));
        }
        zeta.add(d, 1);
    }
    Ok(zeta)
}

/// The irreducible degree multiset of `g`.
pub fn irr_degrees(g: &dyn Group) -> Result<ZetaPolynomial, DixonError> {
    let alg = class_algebra(g);
    let r = prime_above(exponent(g), g.order() as u64)?;
    degrees_with_prime(&alg, r)
}
