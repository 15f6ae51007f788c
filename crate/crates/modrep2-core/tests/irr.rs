use modrep2_core::charm::{check_orthonormal, is_irreducible, KAnalyzer};
use modrep2_core::glam::Lambda;
use modrep2_core::group::FiniteGroup;
use modrep2_core::irrbuild::{cuspidal_nonrect_count, zeta_closed_form, Builder, FamilyLabel, FamilySummary};
use modrep2_core::orbit::OrbitKind;
use modrep2_core::tring::Backend;

fn lam(l1: u32, l2: u32) -> Lambda {
    Lambda::new(l1, l2).unwrap()
}

fn sizes(b: &Builder, l: Lambda) -> Vec<(FamilyLabel, Option<Lambda>, u64)> {
    b.assemble(l).unwrap().families.iter().map(|f| (f.label, f.mu, f.count())).collect()
}

#[test]
fn l1_families() {
    for (q, l) in [(2u64, 2u32), (2, 3), (3, 2), (3, 3)] {
        let b = Builder::new(Backend::Padic, q as u32, l).unwrap();
        let built = b.build_l1(l).unwrap();
        let p = q.pow(l - 2);
        let count = |label| built.families.iter().find(|f| f.label == label).unwrap().members.len() as u64;
        assert_eq!(count(FamilyLabel::OneDim), p * (q - 1) * (q - 1));
        assert_eq!(count(FamilyLabel::HeisB), 2 * p * (q - 1));
        assert_eq!(count(FamilyLabel::OrbitC), p * (q - 1) * (q - 1));
        assert_eq!(count(FamilyLabel::HeisQ), p * (q - 1).pow(3));
        for f in &built.families {
            let want = match f.label {
                FamilyLabel::OneDim => 1,
                FamilyLabel::HeisQ => q,
                _ => q - 1,
            };
            assert!(f.members.iter().all(|c| c.degree_u64() == want), "{}", f.label);
        }
    }
}

#[test]
fn family_sizes_for_32() {
    let b = Builder::new(Backend::Padic, 2, 3).unwrap();
    let m = Some(lam(3, 1));
    assert_eq!(
        sizes(&b, lam(3, 2)),
        vec![
            (FamilyLabel::PullbackTwist, Some(lam(2, 1)), 10),
            (FamilyLabel::CuspidalNonrect, Some(lam(3, 2)), 4),
            (FamilyLabel::InfEmbed, m, 2),
            (FamilyLabel::InfQuot, m, 2),
            (FamilyLabel::GeoIrred, None, 4),
            (FamilyLabel::GeoSplit, m, 4),
        ]
    );
}

#[test]
fn family_sizes_for_22() {
    let b = Builder::new(Backend::Padic, 2, 2).unwrap();
    assert_eq!(
        sizes(&b, lam(2, 2)),
        vec![
            (FamilyLabel::PullbackTwist, Some(lam(1, 1)), 6),
            (FamilyLabel::InfEmbed, Some(lam(2, 1)), 2),
            (FamilyLabel::GeoIrred, None, 1),
            (FamilyLabel::GeoSplit, Some(lam(2, 1)), 2),
            (FamilyLabel::CuspidalRectCount, None, 3),
        ]
    );
    let a = b.assemble(lam(2, 2)).unwrap();
    let cusp = a.family(FamilyLabel::CuspidalRectCount).next().unwrap();
    assert_eq!(cusp.zeta().0.into_iter().collect::<Vec<_>>(), vec![(2, 3)]);
}

#[test]
fn cuspidal_construction_on_the_grid() {
    for (q, l) in [(2, lam(3, 2)), (2, lam(4, 2)), (3, lam(3, 2)), (2, lam(4, 3)), (2, lam(5, 3))] {
        let b = Builder::new(Backend::Padic, q, l.l1).unwrap();
        let g = b.group(l).unwrap();
        let fam = b.build_cuspidal_nonrect(l).unwrap();
        let (count, degree) = cuspidal_nonrect_count(l, q as u64);
        assert_eq!(fam.members.len() as u64, count, "q={q} {l}");
        assert!(fam.members.iter().all(|c| c.degree_u64() == degree));
        assert!(check_orthonormal(&*g, &fam.members).unwrap());
        let ka = KAnalyzer::new(g.clone()).unwrap();
        for c in &fam.members {
            assert!(is_irreducible(&*g, c).unwrap());
            assert_eq!(ka.label(c).unwrap().kind, OrbitKind::V);
        }
    }
    assert_eq!(cuspidal_nonrect_count(lam(3, 2), 3), (36, 6));
    assert_eq!(cuspidal_nonrect_count(lam(4, 2), 2), (8, 2));
}

#[test]
fn assembled_sets_are_complete() {
    for (q, l) in [(2, lam(4, 2)), (2, lam(3, 3)), (2, lam(4, 3)), (2, lam(4, 4))] {
        let b = Builder::new(Backend::Padic, q, l.l1).unwrap();
        let a = b.assemble(l).unwrap();
        assert!(a.all_checks_pass(), "q={q} {l}: {:?}", a.checks);
        assert_eq!(a.zeta, zeta_closed_form(l, q as u64));
        assert_eq!(a.zeta.sum_squares(), b.group(l).unwrap().order() as u64);
    }
}

#[test]
fn tpoly_assembly_matches_padic() {
    for (q, l) in [(2, lam(3, 2)), (2, lam(2, 2)), (3, lam(2, 1))] {
        let p = Builder::new(Backend::Padic, q, l.l1).unwrap().assemble(l).unwrap().zeta.clone();
        let t = Builder::new(Backend::Tpoly, q, l.l1).unwrap().assemble(l).unwrap();
        assert!(t.all_checks_pass());
        assert_eq!(t.zeta, p);
    }
}

#[test]
fn summaries_and_character_json() {
    let b = Builder::new(Backend::Padic, 2, 3).unwrap();
    let a = b.assemble(lam(3, 2)).unwrap();
    let s: Vec<FamilySummary> = a.families.iter().map(FamilySummary::from).collect();
    let v = serde_json::to_value(&s).unwrap();
    assert_eq!(v[1]["label"], "cuspidal_nonrect");
    assert_eq!(v[1]["count"], 4);
    let chi = &a.family(FamilyLabel::CuspidalNonrect).next().unwrap().members[0];
    let j = serde_json::to_value(chi).unwrap();
    assert_eq!(j["degree"], 2);
    assert_eq!(j["values"].as_array().unwrap().len(), 26);
    assert!(j["group"].as_str().unwrap().starts_with("G(3,2)"));
}
