//! Acceptance run: one PASS/FAIL line per criterion. Exits nonzero when a
//! criterion's outcome differs from the recorded expectation.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use modrep2_core::charm::{check_orthonormal, inner, inner_raw, is_irreducible, ClassFunction, KAnalyzer, Side};
use modrep2_core::dixon::irr_degrees;
use modrep2_core::glam::{i_lambda, GElem, Glam, Lambda, Levi};
use modrep2_core::group::Group;
use modrep2_core::irrbuild::{
    classify_primitive, cuspidal_nonrect_count, cuspidal_rect_count, zeta_closed_form, Builder, FamilyLabel,
    ZetaPolynomial,
};
use modrep2_core::orbit::{class_count_formula, orbit_table, orbit_table_formula, orbits_on_k, orbits_on_k_formula};
use modrep2_core::tring::{reduce, Backend};
use num_complex::Complex64;
use repcli::ring_compare;

type Outcome = Result<String, String>;
type ZetaCase = (u32, Lambda, &'static [(u64, u64)]);

fn lam(l1: u32, l2: u32) -> Lambda {
    Lambda::new(l1, l2).unwrap()
}

fn builder(backend: Backend, q: u32, l: Lambda) -> Result<Builder, String> {
    Builder::new(backend, q, l.l1).map_err(|e| e.to_string())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

macro_rules! tri {
    ($e:expr) => {
        $e.map_err(|e| e.to_string())?
    };
}

fn criterion_1() -> Outcome {
    let cases: [ZetaCase; 6] = [
        (2, lam(2, 1), &[(1, 4), (2, 1)]),
        (2, lam(3, 1), &[(1, 8), (2, 2)]),
        (3, lam(2, 1), &[(1, 4), (2, 8), (3, 8)]),
        (2, lam(3, 2), &[(1, 8), (2, 14), (4, 4)]),
        (2, lam(2, 2), &[(1, 4), (2, 5), (3, 4), (6, 1)]),
        (3, lam(2, 2), &[(1, 6), (2, 9), (3, 6), (4, 3), (6, 24), (8, 18), (12, 12)]),
    ];
    for (q, l, want) in cases {
        let want = ZetaPolynomial::from_pairs(want);
        let b = builder(Backend::Padic, q, l)?;
        let built = tri!(b.assemble(l)).zeta.clone();
        let closed = zeta_closed_form(l, q as u64);
        let oracle = tri!(irr_degrees(&*tri!(b.group(l))));
        ensure(built == want && closed == want && oracle == want, || {
            format!("q={q} ({l}): expected {want}, construction {built}, closed form {closed}, oracle {oracle}")
        })?;
    }
    Ok("six zeta polynomials agree three ways".into())
}

fn criterion_2() -> Outcome {
    let mut n = 0;
    for q in [2, 3] {
        for l in [lam(1, 1), lam(2, 1), lam(3, 1), lam(2, 2), lam(3, 2)] {
            let g = tri!(Glam::new(Backend::Padic, q, l));
            let k = g.classes().len() as u64;
            let f = class_count_formula(q as u64, l);
            ensure(k == f, || format!("q={q} ({l}): enumerated {k}, formula {f}"))?;
            n += 1;
        }
    }
    let k22 = tri!(Glam::new(Backend::Padic, 2, lam(2, 2))).classes().len();
    let k32 = tri!(Glam::new(Backend::Padic, 2, lam(3, 2))).classes().len();
    ensure(k22 == 14 && k32 == 26, || format!("GL2(Z/4) has {k22} classes, (3,2) q=2 has {k32}"))?;
    Ok(format!("{n} class counts match"))
}

fn criterion_3() -> Outcome {
    for q in [2u32, 3] {
        for l in [lam(3, 2), lam(2, 2)] {
            let g = tri!(Glam::new(Backend::Padic, q, l));
            let rows = tri!(orbit_table(&g));
            let want = orbit_table_formula(q as u64, l);
            ensure(rows == want, || format!("q={q} ({l}): orbit table {rows:?}, expected {want:?}"))?;
            let total: u64 = rows.iter().map(|r| r.elements).sum();
            ensure(total == (q as u64).pow(4), || format!("q={q} ({l}): rows cover {total} characters"))?;
            let n = tri!(orbits_on_k(&g));
            let qq = q as u64;
            let literal = if l.is_rectangular() { qq * qq + qq } else { qq * qq + qq + 1 };
            ensure(n == literal && n == orbits_on_k_formula(qq, l), || format!("q={q} ({l}): {n} orbits on K"))?;
        }
    }
    Ok("orbit tables and orbits on K match at q=2,3".into())
}

fn criterion_4() -> Outcome {
    let mut total = 0;
    for (q, l) in [(2, lam(3, 2)), (2, lam(4, 2)), (3, lam(3, 2))] {
        let b = builder(Backend::Padic, q, l)?;
        let g = tri!(b.group(l));
        let fun = tri!(b.functors(l));
        let ka = tri!(KAnalyzer::new(g.clone()));
        let lin = tri!(b.linear(l));
        let fam = tri!(b.build_cuspidal_nonrect(l));
        let (count, degree) = cuspidal_nonrect_count(l, q as u64);
        let m = &fam.members;
        ensure(m.len() as u64 == count, || format!("q={q} ({l}): {} cuspidals, expected {count}", m.len()))?;
        for (i, chi) in m.iter().enumerate() {
            ensure(chi.degree_u64() == degree, || format!("q={q} ({l}): degree {}", chi.degree_u64()))?;
            ensure(tri!(inner(&*g, chi, chi)) == 1, || format!("q={q} ({l}): <chi,chi> != 1"))?;
            for psi in &m[i + 1..] {
                ensure(tri!(inner(&*g, chi, psi)) == 0, || format!("q={q} ({l}): two cuspidals coincide"))?;
            }
            ensure(tri!(fun.is_cuspidal(chi, Some(&ka), &lin)), || format!("q={q} ({l}): battery not killed"))?;
        }
        total += m.len();
    }
    Ok(format!("{total} cuspidals with the right count, degree and battery"))
}

fn class_basis(g: &dyn Group) -> Vec<ClassFunction> {
    let k = g.classes().len();
    (0..k)
        .map(|j| ClassFunction::new(g, (0..k).map(|i| Complex64::new((i == j) as u8 as f64, 0.0)).collect()))
        .collect()
}

fn adjoint(lhs: Complex64, rhs: Complex64) -> bool {
    (lhs - rhs).norm() < 1e-6
}

/// `t1 (x) t2` on the Levi, with `t2` read through the reduction to `g2m`.
fn levi_char(levi: &Levi, t1: &ClassFunction, t2: &ClassFunction, g2m: &Glam) -> ClassFunction {
    let (c1, c2) = (levi.g1.classes(), g2m.classes());
    let m = g2m.lambda.l1;
    let vals = levi
        .classes()
        .reps
        .iter()
        .map(|&r| {
            let (x1, x2) = levi.split(r);
            let a = reduce(&levi.g2.base, levi.g2.elem(x2).a, m);
            let y = g2m.index_of(&GElem { a, b: 0, c: 0, d: 0 }).expect("rank-1 element");
            t1.at(c1, x1) * t2.at(c2, y)
        })
        .collect();
    ClassFunction::new(levi, vals)
}

fn criterion_5() -> Outcome {
    let mut pairs = 0u64;
    for l in [lam(3, 2), lam(2, 2)] {
        let b = builder(Backend::Padic, 2, l)?;
        let g = tri!(b.group(l));
        let fun = tri!(b.functors(l));
        let big = class_basis(&*g);
        let levi = class_basis(fun.levi());
        for upper in [true, false] {
            let res: Vec<_> = big.iter().map(|c| fun.geo_res(c, upper)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
            for t in &levi {
                let it = tri!(fun.geo_ind(t, upper));
                for (c, rc) in big.iter().zip(&res) {
                    ensure(adjoint(tri!(inner_raw(&*g, &it, c)), tri!(inner_raw(fun.levi(), t, rc))), || {
                        format!("({l}): geometric adjointness, upper={upper}")
                    })?;
                    pairs += 1;
                }
            }
        }
        for mu in i_lambda(l) {
            let h = tri!(fun.inf_group(mu));
            for side in [Side::Embed, Side::Quot] {
                let res: Vec<_> =
                    big.iter().map(|c| fun.inf_res(mu, side, c)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
                for t in class_basis(&*h) {
                    let it = tri!(fun.inf_ind(mu, side, &t));
                    for (c, rc) in big.iter().zip(&res) {
                        ensure(adjoint(tri!(inner_raw(&*g, &it, c)), tri!(inner_raw(&*h, &t, rc))), || {
                            format!("({l}): infinitesimal adjointness via {mu} {side:?}")
                        })?;
                        pairs += 1;
                    }
                }
            }
        }

        // The same adjunctions on irreducibles, as integer multiplicities.
        if !l.is_rectangular() {
            let irr = tri!(b.irreducibles(l));
            for mu in i_lambda(l) {
                let h = tri!(fun.inf_group(mu));
                for side in [Side::Embed, Side::Quot] {
                    for t in tri!(b.irreducibles(mu)).iter() {
                        let it = tri!(fun.inf_ind(mu, side, t));
                        for c in irr.iter() {
                            let rc = tri!(fun.inf_res(mu, side, c));
                            ensure(tri!(inner(&*g, &it, c)) == tri!(inner(&*h, t, &rc)), || {
                                format!("({l}): multiplicities differ via {mu} {side:?}")
                            })?;
                        }
                    }
                }
            }
        }

        // Chains (l,0) < (l,1) < (l,2).
        let (mid, bottom) = (lam(l.l1, 1), lam(l.l1, 0));
        let f_mid = tri!(b.functors(mid));
        for side in [Side::Embed, Side::Quot] {
            for chi in class_basis(&*tri!(b.group(bottom))) {
                let two = tri!(fun.inf_ind(mid, side, &tri!(f_mid.inf_ind(bottom, side, &chi))));
                ensure(two.approx_eq(&tri!(fun.inf_ind(bottom, side, &chi))), || format!("({l}): induction chain"))?;
            }
            for chi in &big {
                let two = tri!(f_mid.inf_res(bottom, side, &tri!(fun.inf_res(mid, side, chi))));
                ensure(two.approx_eq(&tri!(fun.inf_res(bottom, side, chi))), || format!("({l}): restriction chain"))?;
            }
        }

        // Geometric induction factored through an infinitesimal step.
        for mu in i_lambda(l) {
            let fmu = tri!(b.functors(mu));
            let g2m = tri!(b.group(lam(mu.l2, 0)));
            for t1 in tri!(b.linear(lam(l.l1, 0))).iter() {
                for t2 in tri!(b.linear(lam(mu.l2, 0))).iter() {
                    let small = levi_char(fmu.levi(), t1, t2, &g2m);
                    let wide = levi_char(fun.levi(), t1, t2, &g2m);
                    for (side, upper) in [(Side::Embed, true), (Side::Quot, false)] {
                        let lhs = tri!(fun.geo_ind(&wide, upper));
                        let rhs = tri!(fun.inf_ind(mu, side, &tri!(fmu.geo_ind(&small, upper))));
                        ensure(lhs.approx_eq(&rhs), || format!("({l}): mixed identity via {mu} {side:?}"))?;
                    }
                }
            }
        }

        // Infinitesimal induction of cuspidals.
        for mu in i_lambda(l) {
            let cusp = tri!(b.cuspidals(mu));
            for side in [Side::Embed, Side::Quot] {
                let ind: Vec<_> =
                    cusp.members.iter().map(|c| fun.inf_ind(mu, side, c)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
                for (i, (x, s)) in ind.iter().zip(&cusp.members).enumerate() {
                    ensure(tri!(is_irreducible(&*g, x)), || format!("({l}): induced cuspidal reducible"))?;
                    ensure(tri!(fun.inf_res(mu, side, x)).approx_eq(s), || format!("({l}): r after i is not the identity"))?;
                    for y in &ind[i + 1..] {
                        ensure(tri!(inner(&*g, x, y)) == 0, || format!("({l}): induction not injective"))?;
                    }
                }
            }
        }

        // xi_theta: irreducible exactly on C-hat, equal to its dual.
        for (theta, xi, in_c) in tri!(b.geometric_inductions(l)) {
            ensure(tri!(is_irreducible(&*g, &xi)) == in_c, || format!("({l}): irreducibility off C-hat"))?;
            if in_c {
                ensure(xi.approx_eq(&tri!(fun.geo_ind(&theta, false))), || format!("({l}): xi differs from its dual"))?;
            }
        }

        // Rectangular: swapping the Levi factors gives the same xi.
        if l.is_rectangular() {
            let g2 = tri!(b.group(lam(l.l2, 0)));
            let lin = tri!(b.linear(lam(l.l1, 0)));
            for t1 in lin.iter() {
                for t2 in lin.iter() {
                    let xi = tri!(fun.geo_ind(&levi_char(fun.levi(), t1, t2, &g2), true));
                    if tri!(is_irreducible(&*g, &xi)) {
                        let op = tri!(fun.geo_ind(&levi_char(fun.levi(), t2, t1, &g2), true));
                        ensure(xi.approx_eq(&op), || format!("({l}): theta and theta^op give different xi"))?;
                    }
                }
            }
        }
    }
    Ok(format!("all functor identities hold at (3,2) and (2,2), q=2 ({pairs} adjoint pairs)"))
}

struct Exhaustion {
    orthonormal: bool,
    sum_squares: u64,
    count: usize,
    primitive: usize,
    overlaps: BTreeMap<FamilyLabel, usize>,
    remainder: Option<ZetaPolynomial>,
}

fn exhaustion() -> Result<Exhaustion, String> {
    let l = lam(3, 2);
    let b = builder(Backend::Padic, 2, l)?;
    let g = tri!(b.group(l));
    let a = tri!(b.assemble(l));
    let chars: Vec<ClassFunction> = a.characters().cloned().collect();
    let ka = tri!(KAnalyzer::new(g.clone()));
    let mut primitive = 0;
    let mut overlaps = BTreeMap::new();
    for f in &a.families {
        for chi in &f.members {
            if !tri!(ka.is_primitive(chi)) {
                continue;
            }
            primitive += 1;
            if !tri!(classify_primitive(&b, l, chi)).is_exclusive() {
                *overlaps.entry(f.label).or_insert(0) += 1;
            }
        }
    }

    let r = lam(2, 2);
    let br = builder(Backend::Padic, 2, r)?;
    let ar = tri!(br.assemble(r));
    let mut accounted = ZetaPolynomial::default();
    for f in ar.families.iter().filter(|f| f.label != FamilyLabel::CuspidalRectCount) {
        accounted.merge(&f.zeta());
    }
    let oracle = tri!(irr_degrees(&*tri!(br.group(r))));
    Ok(Exhaustion {
        orthonormal: tri!(check_orthonormal(&*g, &chars)),
        sum_squares: chars.iter().map(|c| c.degree_u64().pow(2)).sum(),
        count: chars.len(),
        primitive,
        overlaps,
        remainder: oracle.minus(&accounted),
    })
}

/// Returns the printed outcome and whether it is the recorded one: the
/// partition into exclusive kinds fails at (3,2) q=2 in a known way.
fn criterion_6() -> (Outcome, bool) {
    let e = match exhaustion() {
        Ok(e) => e,
        Err(msg) => return (Err(msg), false),
    };
    let (count, degree) = cuspidal_rect_count(2, 2);
    let want_rem = ZetaPolynomial::from_pairs(&[(degree, count)]);
    let assembled = e.orthonormal && e.count == 26 && e.sum_squares == 128;
    let subtraction = e.remainder.as_ref() == Some(&want_rem) && count == 3 && degree == 2;
    let ambiguous: usize = e.overlaps.values().sum();
    let detail = format!(
        "(3,2) q=2: {} characters, orthonormal={}, sum d^2 = {}; {ambiguous} of {} primitive characters fit more than one kind {:?}, so the classification is not exclusive; (2,2) q=2 remainder {}",
        e.count,
        e.orthonormal,
        e.sum_squares,
        e.primitive,
        e.overlaps,
        e.remainder.as_ref().map(|z| z.to_string()).unwrap_or_else(|| "negative".into()),
    );
    let known: BTreeMap<FamilyLabel, usize> =
        [(FamilyLabel::GeoSplit, 2), (FamilyLabel::InfEmbed, 1), (FamilyLabel::InfQuot, 1)].into_iter().collect();
    let outcome = if assembled && subtraction && ambiguous == 0 { Ok(detail) } else { Err(detail) };
    (outcome, assembled && subtraction && e.overlaps == known)
}

fn criterion_7() -> Outcome {
    let mut n = 0;
    for q in [2, 3] {
        for l in [lam(2, 1), lam(3, 1), lam(2, 2), lam(3, 2)] {
            for c in ring_compare(q, l) {
                ensure(c.pass, || format!("q={q} ({l}): {} expected {} computed {}", c.name, c.expected, c.computed))?;
                n += 1;
            }
        }
    }
    for l in [lam(2, 1), lam(2, 2)] {
        let b = builder(Backend::Tpoly, 4, l)?;
        let closed = zeta_closed_form(l, 4);
        let oracle = tri!(irr_degrees(&*tri!(b.group(l))));
        let built = tri!(b.assemble(l)).zeta.clone();
        ensure(oracle == closed && built == closed, || {
            format!("tpoly q=4 ({l}): closed {closed}, oracle {oracle}, construction {built}")
        })?;
    }
    Ok(format!("{n} padic/tpoly comparisons agree; tpoly q=4 matches the closed forms"))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut unexpected = Vec::new();
    let mut report = |n: usize, outcome: Outcome, expected_pass: bool| {
        let pass = outcome.is_ok();
        let (tag, msg) = match outcome {
            Ok(m) => ("PASS", m),
            Err(m) => ("FAIL", m),
        };
        println!("criterion {n}: {tag}: {msg}");
        if pass != expected_pass {
            unexpected.push(n);
        }
    };
    report(1, criterion_1(), true);
    report(2, criterion_2(), true);
    report(3, criterion_3(), true);
    report(4, criterion_4(), true);
    report(5, criterion_5(), true);
    let (outcome, as_recorded) = criterion_6();
    // Criterion 6 is expected to fail with the recorded overlap and nothing else.
    report(6, outcome, !as_recorded);
    report(7, criterion_7(), true);
    println!("acceptance finished in {:.0}s", start.elapsed().as_secs_f64());
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for criteria {unexpected:?}");
        ExitCode::FAILURE
    }
}
