use std::sync::Arc;

use approxgroup::growth::ball_sizes;
use approxgroup::group::{element_from_json, element_to_json};
use approxgroup::progression::enumerate_nilprogression;
use approxgroup::setcalc::{ApproxCertificate, SetSpec};
use approxgroup::{
    certify_approx, closure, make_context, product_set, quotient, symmetrize, Element, GroupCtx, GroupRef, GroupSpec,
    Subgroup,
};
use proptest::prelude::*;

fn specs() -> Vec<GroupSpec> {
    vec![
        GroupSpec::ut_mod(3, 5),
        GroupSpec::ut_mod(4, 2),
        GroupSpec::abelian(&[6, 4]),
        GroupSpec::product(vec![GroupSpec::ut_mod(3, 3), GroupSpec::abelian(&[2])]),
    ]
}

fn finite(which: usize) -> (GroupCtx, GroupRef, Vec<Element>) {
    let ctx = make_context(&specs()[which]).unwrap();
    let g: GroupRef = Arc::new(ctx.clone());
    let all = Subgroup::whole(&g).unwrap().iter().cloned().collect();
    (ctx, g, all)
}

fn pick(all: &[Element], idx: &[usize]) -> Vec<Element> {
    idx.iter().map(|&i| all[i % all.len()].clone()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn symmetrized_sets_are_symmetric(which in 0..4usize, idx in prop::collection::vec(0..10_000usize, 0..8)) {
        let (_, g, all) = finite(which);
        let xs = pick(&all, &idx);
        let a = symmetrize(&g, &xs).unwrap();
        prop_assert!(a.contains(&g.identity()));
        for x in a.iter() {
            prop_assert!(a.contains(&g.inv(x)));
        }
        for x in &xs {
            prop_assert!(a.contains(x));
        }
    }

    #[test]
    fn powers_are_nested_and_submultiplicative(which in 0..4usize, idx in prop::collection::vec(0..10_000usize, 1..5)) {
        let (_, g, all) = finite(which);
        let a = symmetrize(&g, &pick(&all, &idx)).unwrap();
        let sizes: Vec<usize> = (1..=4).map(|m| product_set(&a, m).unwrap().len()).collect();
        for m in 0..3 {
            prop_assert!(sizes[m] <= sizes[m + 1]);
        }
        for (m, n) in [(1, 1), (1, 2), (2, 2), (1, 3)] {
            prop_assert!(sizes[m + n - 1] <= sizes[m - 1] * sizes[n - 1]);
        }
        let p2 = product_set(&a, 2).unwrap();
        for x in a.iter() {
            prop_assert!(p2.contains(x));
        }
    }

    #[test]
    fn certificates_verify_and_round_trip(which in 0..4usize, idx in prop::collection::vec(0..10_000usize, 1..5)) {
        let (ctx, g, all) = finite(which);
        let a = symmetrize(&g, &pick(&all, &idx)).unwrap();
        let cert = certify_approx(&a).unwrap();
        prop_assert!(cert.verify().is_ok());
        prop_assert!(cert.k >= 1 && cert.k <= a.len());
        let back = ApproxCertificate::from_json(&ctx, &a, &cert.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), cert.to_json());
    }

    #[test]
    fn closures_are_subgroups(which in 0..4usize, idx in prop::collection::vec(0..10_000usize, 0..3)) {
        let (_, g, all) = finite(which);
        let gens = pick(&all, &idx);
        let h = closure(&g, &gens).unwrap();
        for x in &gens {
            prop_assert!(h.contains(x));
        }
        for x in h.iter() {
            prop_assert!(h.contains(&g.inv(x)));
            for y in h.iter().take(20) {
                prop_assert!(h.contains(&g.mul(x, y)));
            }
        }
        prop_assert_eq!(all.len() % h.len(), 0);
    }

    #[test]
    fn quotient_projection_is_multiplicative(which in 0..4usize, i in 0..10_000usize, j in 0..10_000usize) {
        let (_, g, all) = finite(which);
        let whole = Subgroup::whole(&g).unwrap();
        // the centre is normal
        let z: Vec<Element> = all.iter().filter(|c| all.iter().all(|x| g.mul(x, c) == g.mul(c, x))).cloned().collect();
        let zc = closure(&g, &z).unwrap();
        let (q, _) = quotient(&whole, &zc).unwrap();
        let qg = q.as_group();
        let (x, y) = (&all[i % all.len()], &all[j % all.len()]);
        prop_assert_eq!(q.project(&g.mul(x, y)), qg.mul(&q.project(x), &q.project(y)));
        prop_assert_eq!(q.len() * zc.len(), all.len());
    }

    #[test]
    fn elements_round_trip_through_json(which in 0..4usize, i in 0..10_000usize) {
        let (ctx, _, all) = finite(which);
        let x = &all[i % all.len()];
        prop_assert_eq!(&element_from_json(&ctx, &element_to_json(x)).unwrap(), x);
    }

    #[test]
    fn nilprogressions_are_symmetric_and_monotone(l1 in 0..4usize, l2 in 0..4usize, grow in 0..2usize) {
        let ctx = make_context(&GroupSpec::ut_int(3)).unwrap();
        let g: GroupRef = Arc::new(ctx);
        let xs = g.generators();
        let p = enumerate_nilprogression(&g, &xs, &[l1, l2]).unwrap();
        for x in p.iter() {
            prop_assert!(p.contains(&g.inv(x)));
        }
        let bigger = if grow == 0 { [l1 + 1, l2] } else { [l1, l2 + 1] };
        let q = enumerate_nilprogression(&g, &xs, &bigger).unwrap();
        prop_assert!(p.iter().all(|x| q.contains(x)));
        // P(x; L) ⊆ S^{ΣL}
        let s = symmetrize(&g, &xs).unwrap();
        let ball = product_set(&s, (l1 + l2).max(1)).unwrap();
        prop_assert!(p.iter().all(|x| ball.contains(x)));
    }

    #[test]
    fn ball_sizes_are_monotone_and_submultiplicative(rank in 1..3usize, n in 1..8usize) {
        let ctx = make_context(&GroupSpec::free(rank)).unwrap();
        let g: GroupRef = Arc::new(ctx);
        let s = symmetrize(&g, &g.generators()).unwrap();
        let r = ball_sizes(&s, n);
        prop_assert_eq!(r.sizes[0], 1);
        for m in 0..n {
            prop_assert!(r.sizes[m] <= r.sizes[m + 1]);
            for k in 0..=m {
                prop_assert!(r.sizes[m + 1] <= r.sizes[k + 1] * r.sizes[m - k].max(1));
            }
        }
    }

    #[test]
    fn compact_specs_parse(m in 2..50u64, n in 2..5usize, t in 0..4usize) {
        prop_assert_eq!(GroupSpec::parse_compact(&format!("ut_mod:{n}:{m}")).unwrap(), GroupSpec::ut_mod(n, m));
        let spec = SetSpec::parse_compact(&format!("ball:gens=xy:r={t}")).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        prop_assert_eq!(SetSpec::parse_compact(&json).unwrap(), spec);
    }
}
