//! Nilprogressions, the bounded-search abelian coset-progression fitter, and
//! coset nilprogressions pulled back through a quotient.

use std::collections::{HashSet, VecDeque};

use serde_json::Value;

use crate::error::{Error, Result};
use crate::group::{element_to_json, Element, GroupRef};
use crate::setcalc::{cover_translates, product, ElemSet, Powers, SymSet};
use crate::structure::StructureResult;
use crate::subgrp::{closure, generated_step, quotient, Subgroup};

/// `P(x_1, …, x_r; L)` with its step.
#[derive(Clone, Debug, PartialEq)]
pub struct Nilprogression {
    pub gens: Vec<Element>,
    pub bounds: Vec<usize>,
    pub step: usize,
}

impl Nilprogression {
    pub fn rank(&self) -> usize {
        self.gens.len()
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "generators": self.gens.iter().map(element_to_json).collect::<Vec<_>>(),
            "bounds": self.bounds,
            "step": self.step,
            "rank": self.rank(),
        })
    }
}

/// All products of letters `x_i^{±1}` in which `x_i` and `x_i⁻¹` together
/// occur at most `L_i` times. Words are explored by length; a state is the
/// pair (element, occurrence counts), and repeated states are dropped.
pub fn enumerate_nilprogression(g: &GroupRef, xs: &[Element], ls: &[usize]) -> Result<SymSet> {
    if xs.len() != ls.len() {
        return Err(Error::Malformed("one bound per generator required".into()));
    }
    let letters: Vec<(usize, Element)> = xs
        .iter()
        .enumerate()
        .flat_map(|(i, x)| [(i, x.clone()), (i, g.inv(x))])
        .collect();
    for x in xs {
        g.check(x)?;
    }
    let start = (g.identity(), vec![0usize; xs.len()]);
    let mut seen: HashSet<(Element, Vec<usize>)> = HashSet::new();
    let mut out = ElemSet::new();
    out.insert(start.0.clone());
    seen.insert(start.clone());
    let mut queue = VecDeque::from([start]);
    while let Some((e, used)) = queue.pop_front() {
        for (i, l) in &letters {
            if used[*i] >= ls[*i] {
                continue;
            }
            let mut u = used.clone();
            u[*i] += 1;
            let state = (g.mul(&e, l), u);
            if seen.insert(state.clone()) {
                out.insert(state.0.clone());
                if seen.len() > g.cap() {
                    return Err(Error::cap("nilprogression states", seen.len(), g.cap()));
                }
                queue.push_back(state);
            }
        }
    }
    SymSet::from_set(g.clone(), out, "nilprogression")
}

/// Search limits for [`abelian_freiman_fit`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitCaps {
    pub rank_cap: usize,
    pub exp_cap: usize,
    /// Generator tuples examined before giving up.
    pub max_tuples: usize,
}

impl Default for FitCaps {
    fn default() -> Self {
        FitCaps {
            rank_cap: 3,
            exp_cap: 4,
            max_tuples: 200_000,
        }
    }
}

/// `A ⊆ H + P ⊆ A^e` for an abelian set `A`.
#[derive(Clone, Debug)]
pub struct AbelianFit {
    pub h: Subgroup,
    pub prog: Nilprogression,
    pub exponent: usize,
    pub set: ElemSet,
}

impl AbelianFit {
    pub fn rank(&self) -> usize {
        self.prog.rank()
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "H": self.h.to_json(),
            "progression": self.prog.to_json(),
            "exponent": self.exponent,
            "size": self.set.len(),
        })
    }
}

/// Representative of `{x, x⁻¹}`: the one with positive leading coordinate for
/// integer coordinates, otherwise the canonically smaller.
pub(crate) fn sign_rep(g: &GroupRef, x: &Element) -> Element {
    let y = g.inv(x);
    match x {
        Element::Integers(v) => {
            let positive = v
                .iter()
                .find(|c| c.sign() != num_bigint::Sign::NoSign)
                .is_none_or(|c| c.sign() == num_bigint::Sign::Plus);
            if positive {
                x.clone()
            } else {
                y
            }
        }
        _ => x.clone().min(y),
    }
}

/// `H + P(x; L)` in an abelian group.
pub fn abelian_box(g: &GroupRef, h: &Subgroup, xs: &[Element], ls: &[usize]) -> Result<ElemSet> {
    let mut s = h.elements().clone();
    for (x, &l) in xs.iter().zip(ls) {
        let line: ElemSet = (-(l as i64)..=l as i64).map(|t| g.pow(x, t)).collect();
        s = product(g, &s, &line)?;
    }
    Ok(s)
}

/// Bound vectors in `[1, U_1] × … × [1, U_r]` ordered by sum, then lexicographically.
fn bound_vectors(us: &[usize]) -> Vec<Vec<usize>> {
    let mut all: Vec<Vec<usize>> = vec![vec![]];
    for &u in us {
        all = all
            .into_iter()
            .flat_map(|v| (1..=u).map(move |t| [v.clone(), vec![t]].concat()))
            .collect();
    }
    all.sort_by_key(|v| (v.iter().sum::<usize>(), v.clone()));
    all
}

fn combinations(n: usize, r: usize, mut f: impl FnMut(&[usize]) -> Result<bool>) -> Result<bool> {
    let mut idx: Vec<usize> = (0..r).collect();
    if r > n {
        return Ok(false);
    }
    loop {
        if f(&idx)? {
            return Ok(true);
        }
        let mut i = r;
        loop {
            if i == 0 {
                return Ok(false);
            }
            i -= 1;
            if idx[i] < n - r + i {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..r {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Bounded search for a subgroup `H ⊆ A⁴` and a progression with generators
/// in `A⁴` such that `A ⊆ H + P ⊆ A^e`, `e ≤ exp_cap`. Ranks are tried in
/// increasing order, then exponents, then subgroups from smallest, generator tuples in order of the
/// least power of `A` containing them and then canonically, and bounds by
/// increasing sum. Returns `None` when the search space is exhausted.
pub fn abelian_freiman_fit(a: &SymSet, caps: FitCaps) -> Result<Option<AbelianFit>> {
    let g = a.group().clone();
    let elems: Vec<&Element> = a.iter().collect();
    for (i, x) in elems.iter().enumerate() {
        if elems[i + 1..].iter().any(|y| g.mul(x, y) != g.mul(y, x)) {
            return Err(Error::Hypothesis(
                "set does not generate an abelian group".into(),
            ));
        }
    }
    let exp_cap = caps.exp_cap.max(1);
    let mut pw = Powers::new(a);
    let tops: Vec<ElemSet> = (1..=exp_cap)
        .map(|e| pw.get(e).cloned())
        .collect::<Result<_>>()?;
    let a4 = pw.get(4)?.clone();
    let target = a.elements();

    let mut hs: Vec<Subgroup> = vec![Subgroup::trivial(&g)];
    let bound = a4.len() as u64;
    let mut greedy = Subgroup::trivial(&g);
    for x in &a4 {
        if g.element_order(x, bound).is_none() {
            continue;
        }
        let cyc = closure(&g, std::slice::from_ref(x))?;
        if cyc.iter().all(|y| a4.contains(y)) && !hs.contains(&cyc) {
            hs.push(cyc);
        }
        let ext = greedy.extend_with(std::iter::once(x))?;
        if ext.iter().all(|y| a4.contains(y)) {
            greedy = ext;
        }
    }
    if !hs.contains(&greedy) {
        hs.push(greedy);
    }
    hs.sort_by_key(|h| h.len());

    let id = g.identity();
    let mut pool: Vec<(usize, Element)> = Vec::new();
    let mut seen = ElemSet::new();
    for e in 1..=4 {
        for x in pw.get(e)?.clone() {
            let s = sign_rep(&g, &x);
            if s != id && seen.insert(s.clone()) {
                pool.push((e, s));
            }
        }
    }
    let pool: Vec<Element> = pool.into_iter().map(|(_, x)| x).collect();

    let mut budget = caps.max_tuples;
    for r in 0..=caps.rank_cap {
        for (e_idx, top) in tops.iter().enumerate() {
            let e = e_idx + 1;
            for h in &hs {
                if !h.iter().all(|x| top.contains(x)) {
                    continue;
                }
                if r == 0 {
                    if target.iter().all(|x| h.contains(x)) {
                        let prog = Nilprogression {
                            gens: vec![],
                            bounds: vec![],
                            step: 0,
                        };
                        return Ok(Some(AbelianFit {
                            h: h.clone(),
                            prog,
                            exponent: e,
                            set: h.elements().clone(),
                        }));
                    }
                    continue;
                }
                let mut found: Option<AbelianFit> = None;
                let outcome = combinations(pool.len(), r, |idx| {
                    if budget == 0 {
                        return Err(Error::SearchExhausted("tuple budget".into()));
                    }
                    budget -= 1;
                    let xs: Vec<Element> = idx.iter().map(|&i| pool[i].clone()).collect();
                    let mut us = Vec::new();
                    for x in &xs {
                        let mut t = 0usize;
                        let mut cur = x.clone();
                        while top.contains(&cur) && t < top.len() {
                            t += 1;
                            cur = g.mul(&cur, x);
                        }
                        if t == 0 {
                            return Ok(false);
                        }
                        us.push(t);
                    }
                    let widest = abelian_box(&g, h, &xs, &us)?;
                    if !target.iter().all(|x| widest.contains(x)) {
                        return Ok(false);
                    }
                    for ls in bound_vectors(&us) {
                        let s = abelian_box(&g, h, &xs, &ls)?;
                        if target.iter().all(|x| s.contains(x)) && s.iter().all(|x| top.contains(x))
                        {
                            let step = generated_step(&g, &xs, 1)?;
                            let prog = Nilprogression {
                                gens: xs,
                                bounds: ls,
                                step,
                            };
                            found = Some(AbelianFit {
                                h: h.clone(),
                                prog,
                                exponent: e,
                                set: s,
                            });
                            return Ok(true);
                        }
                    }
                    Ok(false)
                });
                match outcome {
                    Err(Error::SearchExhausted(_)) => return Ok(None),
                    Err(e) => return Err(e),
                    Ok(_) => {}
                }
                if found.is_some() {
                    return Ok(found);
                }
            }
        }
    }
    Ok(None)
}

/// Re-checks `A ⊆ H + P ⊆ A^e` from the fit's parameters.
pub fn verify_abelian_fit(a: &SymSet, fit: &AbelianFit) -> Result<bool> {
    let g = a.group();
    let s = abelian_box(g, &fit.h, &fit.prog.gens, &fit.prog.bounds)?;
    let ae = Powers::new(a).get(fit.exponent)?.clone();
    Ok(s == fit.set && a.iter().all(|x| s.contains(x)) && s.iter().all(|x| ae.contains(x)))
}

/// A coset nilprogression `QH` with `H ⊴ C` and `Q` a nilprogression in `C/H`.
#[derive(Clone, Debug)]
pub struct CosetNilprogression {
    pub h: Subgroup,
    pub c: Subgroup,
    /// Generators are coset representatives in `C`.
    pub prog: Nilprogression,
    /// The pulled-back set `QH`.
    pub set: ElemSet,
    /// Smallest `m` with `QH ⊆ A^m`.
    pub exponent: usize,
    /// `A ⊆ X·QH`.
    pub cover: Vec<Element>,
}

impl CosetNilprogression {
    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "progression": self.prog.to_json(),
            "H": self.h.to_json(),
            "C": self.c.to_json(),
            "size": self.set.len(),
            "exponent": self.exponent,
            "cover": self.cover.iter().map(element_to_json).collect::<Vec<_>>(),
        })
    }
}

/// Fits a nilprogression `Q` in `C/H` containing the image of `A² ∩ C`, with
/// generators chosen greedily from the image of `A⁶ ∩ C` and bounds grown one
/// step at a time where they cover the most, then pulls back to `QH`.
pub fn coset_nilprogression_fit_in(
    a: &SymSet,
    c: &Subgroup,
    h: &Subgroup,
) -> Result<CosetNilprogression> {
    let g = a.group().clone();
    let (q, _) = quotient(c, h)?;
    let qg = q.as_group();
    let mut pw = Powers::new(a);
    let a2 = pw.get(2)?.clone();
    let a6 = pw.get(6)?.clone();
    let target: ElemSet = a2
        .iter()
        .filter(|x| c.contains(x))
        .map(|x| q.project(x))
        .collect();
    let id = qg.identity();
    let mut pool: Vec<Element> = Vec::new();
    for x in target.iter().chain(
        a6.iter()
            .filter(|x| c.contains(x))
            .map(|x| q.project(x))
            .collect::<ElemSet>()
            .iter(),
    ) {
        let s = sign_rep(&qg, x);
        if s != id && !pool.contains(&s) {
            pool.push(s);
        }
    }
    let mut gens: Vec<Element> = Vec::new();
    let mut span = Subgroup::trivial(&qg);
    for x in &pool {
        if target.iter().all(|t| span.contains(t)) {
            break;
        }
        if !span.contains(x) {
            gens.push(x.clone());
            span = span.extend_with(std::iter::once(x))?;
        }
    }
    let mut bounds = vec![1usize; gens.len()];
    let mut cur = enumerate_nilprogression(&qg, &gens, &bounds)?;
    let hits = |s: &SymSet| target.iter().filter(|t| s.contains(t)).count();
    while hits(&cur) < target.len() {
        let mut best: Option<(usize, usize, usize, SymSet)> = None;
        for i in 0..gens.len() {
            let mut ls = bounds.clone();
            ls[i] += 1;
            let s = enumerate_nilprogression(&qg, &gens, &ls)?;
            let key = (hits(&s), s.len());
            if best
                .as_ref()
                .is_none_or(|b| key.0 > b.0 || (key.0 == b.0 && key.1 > b.1))
            {
                best = Some((key.0, key.1, i, s));
            }
        }
        let (_, size, i, s) =
            best.ok_or_else(|| Error::Bug("no generators yet target uncovered".into()))?;
        if size == cur.len() {
            return Err(Error::Bug(
                "nilprogression stopped growing before covering the target".into(),
            ));
        }
        bounds[i] += 1;
        cur = s;
    }
    let step = generated_step(&qg, &gens, 64)?;
    let set: ElemSet = c
        .iter()
        .filter(|x| cur.contains(&q.project(x)))
        .cloned()
        .collect();
    let generated = closure(&g, &a.iter().cloned().collect::<Vec<_>>())?;
    let exponent = pw
        .smallest_containing(&set, generated.len().max(2))?
        .ok_or_else(|| Error::Bug("QH is not inside ⟨A⟩".into()))?;
    let cover = cover_translates(a.elements(), &set, &g)?;
    let prog = Nilprogression { gens, bounds, step };
    Ok(CosetNilprogression {
        h: h.clone(),
        c: c.clone(),
        prog,
        set,
        exponent,
        cover,
    })
}

/// [`coset_nilprogression_fit_in`] on the `C` and `H` of a structure result,
/// checking the step against `K⁶`.
pub fn coset_nilprogression_fit(a: &SymSet, structure: &StructureResult) -> Result<CosetNilprogression> {
    let fit = coset_nilprogression_fit_in(a, &structure.c, &structure.h)?;
    if (fit.prog.step as u128) > (structure.k_approx as u128).saturating_pow(6) {
        return Err(Error::Bug(format!("progression step {} exceeds K⁶", fit.prog.step)));
    }
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{make_context, GroupSpec};
    use crate::setcalc::symmetrize;
    use std::sync::Arc;

    fn grp(spec: GroupSpec) -> GroupRef {
        Arc::new(make_context(&spec).unwrap())
    }

    #[test]
    fn one_generator_in_z() {
        let g = grp(GroupSpec::abelian(&[0]));
        let x = g.generators()[0].clone();
        for l in 0..6 {
            let p = enumerate_nilprogression(&g, std::slice::from_ref(&x), &[l]).unwrap();
            let want: ElemSet = (-(l as i64)..=l as i64).map(|t| g.pow(&x, t)).collect();
            assert_eq!(p.elements(), &want);
        }
    }

    #[test]
    fn heisenberg_unit_bounds() {
        let ctx = make_context(&GroupSpec::ut_int(3)).unwrap();
        let g: GroupRef = Arc::new(ctx.clone());
        let p = enumerate_nilprogression(&g, &g.generators(), &[1, 1]).unwrap();
        assert_eq!(p.len(), 13);
        let zero = enumerate_nilprogression(&g, &g.generators(), &[0, 0]).unwrap();
        assert_eq!(zero.len(), 1);
    }

    #[test]
    fn fit_interval_and_box() {
        let g = grp(GroupSpec::abelian(&[0]));
        let x = g.generators()[0].clone();
        let a = symmetrize(&g, &(1..=5).map(|t| g.pow(&x, t)).collect::<Vec<_>>()).unwrap();
        let fit = abelian_freiman_fit(&a, FitCaps::default())
            .unwrap()
            .unwrap();
        assert!(fit.h.is_trivial());
        assert_eq!(fit.prog.gens, vec![x.clone()]);
        assert_eq!(fit.prog.bounds, vec![5]);
        assert_eq!(fit.exponent, 1);
        assert!(verify_abelian_fit(&a, &fit).unwrap());

        let ctx = make_context(&GroupSpec::abelian(&[0, 0])).unwrap();
        let g2: GroupRef = Arc::new(ctx.clone());
        let mut elems = Vec::new();
        for s in -3..=3 {
            for t in -2..=2 {
                elems.push(ctx.from_i64s(&[s, t]).unwrap());
            }
        }
        let a = symmetrize(&g2, &elems).unwrap();
        let fit = abelian_freiman_fit(&a, FitCaps::default())
            .unwrap()
            .unwrap();
        assert_eq!(fit.rank(), 2);
        assert_eq!(fit.exponent, 1);
        assert_eq!(fit.set, *a.elements());
    }

    #[test]
    fn fit_subgroup_is_rank_zero() {
        let g = grp(GroupSpec::abelian(&[6]));
        let w = Subgroup::whole(&g).unwrap();
        let a = SymSet::from_set(g.clone(), w.elements().clone(), "whole").unwrap();
        let fit = abelian_freiman_fit(&a, FitCaps::default())
            .unwrap()
            .unwrap();
        assert_eq!((fit.rank(), fit.exponent), (0, 1));
        assert_eq!(fit.h.len(), 6);
    }

    #[test]
    fn coset_fit_on_heisenberg() {
        let ctx = make_context(&GroupSpec::ut_mod(3, 5)).unwrap();
        let g: GroupRef = Arc::new(ctx.clone());
        let a = symmetrize(&g, &g.generators()).unwrap();
        let c = Subgroup::whole(&g).unwrap();
        let fit = coset_nilprogression_fit_in(&a, &c, &Subgroup::trivial(&g)).unwrap();
        assert!(fit.prog.step <= 2);
        assert!(a.iter().all(|x| fit.set.contains(x)));
        assert_eq!(fit.cover.len(), 1);
    }

    #[test]
    fn coset_fit_from_structure() {
        use crate::structure::nilpotent_structure;
        let g = grp(GroupSpec::abelian(&[12]));
        let w = Subgroup::whole(&g).unwrap();
        let a = SymSet::from_set(g.clone(), w.elements().clone(), "whole").unwrap();
        let fit = coset_nilprogression_fit(&a, &nilpotent_structure(&a).unwrap()).unwrap();
        assert_eq!((fit.prog.rank(), fit.cover.len()), (0, 1));
        assert_eq!(&fit.set, a.elements());

        let g = grp(GroupSpec::abelian(&[60]));
        let x = g.generators()[0].clone();
        let a = symmetrize(&g, &(1..=4).map(|t| g.pow(&x, t)).collect::<Vec<_>>()).unwrap();
        let fit = coset_nilprogression_fit(&a, &nilpotent_structure(&a).unwrap()).unwrap();
        assert_eq!(fit.prog.rank(), 1);
        assert!(a.iter().all(|y| fit.set.contains(y)));
    }
}
