use std::sync::Arc;

use approxgroup::growth::ball_sizes;
use approxgroup::progression::enumerate_nilprogression;
use approxgroup::resid::{residual_structure, QuotientFamily};
use approxgroup::structure::chain::dimension_chain;
use approxgroup::structure::nilpotent_structure;
use approxgroup::{certify_approx, closure, make_context, product_set, symmetrize, GroupRef, GroupSpec, SymSet};
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn group(spec: GroupSpec) -> GroupRef {
    Arc::new(make_context(&spec).unwrap())
}

fn ball(g: &GroupRef, r: usize) -> SymSet {
    let s = symmetrize(g, &g.generators()).unwrap();
    product_set(&s, r).unwrap()
}

fn sets(c: &mut Criterion) {
    let h = group(GroupSpec::ut_mod(3, 7));
    let a = ball(&h, 2);
    c.bench_function("product_set A^3 in Heisenberg mod 7", |b| b.iter(|| product_set(black_box(&a), 3).unwrap()));
    c.bench_function("certify S^2 in Heisenberg mod 7", |b| b.iter(|| certify_approx(black_box(&a)).unwrap()));
    let big = group(GroupSpec::ut_mod(3, 29));
    let gens = big.generators();
    c.bench_function("closure of Heisenberg mod 29", |b| b.iter(|| closure(&big, black_box(&gens)).unwrap()));
}

fn structure(c: &mut Criterion) {
    let h = group(GroupSpec::ut_mod(3, 5));
    let a = ball(&h, 2);
    c.bench_function("dimension chain S^2 in Heisenberg mod 5", |b| b.iter(|| dimension_chain(black_box(&a)).unwrap()));
    let s = ball(&h, 1);
    c.bench_function("nilpotent structure S in Heisenberg mod 5", |b| {
        b.iter(|| nilpotent_structure(black_box(&s)).unwrap())
    });
    let ctx = make_context(&GroupSpec::ut_int(3)).unwrap();
    let hi: GroupRef = Arc::new(ctx.clone());
    let fam = QuotientFamily::mod_range(&ctx, 2, 4096);
    let s = ball(&hi, 1);
    c.bench_function("residual structure S in integer Heisenberg", |b| {
        b.iter(|| residual_structure(black_box(&s), &fam).unwrap())
    });
}

fn growth(c: &mut Criterion) {
    let hi = group(GroupSpec::ut_int(3));
    let s = ball(&hi, 1);
    c.bench_function("ball sizes to 20 in integer Heisenberg", |b| b.iter(|| ball_sizes(black_box(&s), 20)));
    let f = group(GroupSpec::free(2));
    let sf = ball(&f, 1);
    c.bench_function("ball sizes to 8 in free group", |b| b.iter(|| ball_sizes(black_box(&sf), 8)));
    let gens = hi.generators();
    c.bench_function("nilprogression (4, 4) in integer Heisenberg", |b| {
        b.iter(|| enumerate_nilprogression(&hi, black_box(&gens), &[4, 4]).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = sets, structure, growth
}
criterion_main!(benches);
