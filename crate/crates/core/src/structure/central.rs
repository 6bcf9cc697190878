//! Groups with `G = A·Z(G)`: commutators in `A⁴`, a commutator-generated
//! central series, and the chain of normal subgroups exhausting `[G,G]`.
//! Also Guralnick's product form of `[G, D]` for abelian normal `D`.

use num_bigint::BigUint;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::group::{element_to_json, Element, GroupRef};
use crate::setcalc::{in_product_with, product, ClaimCheck, ElemSet, Powers, SymSet};
use crate::subgrp::{
    center, closure, commutator_of, is_normal, lower_central_series, quotient, Subgroup,
};

fn require_central_cover(g: &Subgroup, a: &SymSet) -> Result<()> {
    if a.iter().any(|x| !g.contains(x)) {
        return Err(Error::Hypothesis("A is not contained in G".into()));
    }
    let z = center(g)?;
    let (q, _) = quotient(g, &z)?;
    let hit: ElemSet = a.iter().map(|x| q.project(x)).collect();
    if hit.len() != q.len() {
        return Err(Error::Hypothesis(format!(
            "G ≠ A·Z(G): A meets {} of {} cosets of the centre",
            hit.len(),
            q.len()
        )));
    }
    Ok(())
}

/// Checks that every commutator of `G` lies in `A⁴`, given `G = A·Z(G)`.
/// Exhaustive over `G × G` for `|G| ≤ 1000`, otherwise over pairs of
/// representatives of `G/Z(G)` (commutators only depend on these cosets).
pub fn commutators_in_a4_check(g: &Subgroup, a: &SymSet) -> Result<bool> {
    require_central_cover(g, a)?;
    let grp = g.group().clone();
    let a4 = Powers::new(a).get(4)?.clone();
    let pool: Vec<Element> = if g.len() <= 1000 {
        g.iter().cloned().collect()
    } else {
        let (q, _) = quotient(g, &center(g)?)?;
        q.reps().to_vec()
    };
    Ok(pool
        .iter()
        .all(|x| pool.iter().all(|y| a4.contains(&grp.commutator(x, y)))))
}

/// Central series `[G,G] = Γ_1 ⊇ … ⊇ Γ_{r+1} = {1}` with `Γ_i = ⟨c_i, …, c_r⟩`
/// and each `c_i = [a_i, b_i]`, `a_i, b_i ∈ A`.
#[derive(Clone, Debug)]
pub struct CentralSeriesCert {
    /// `Γ_1, …, Γ_{r+1}`.
    pub gammas: Vec<Subgroup>,
    /// `(c_i, a_i, b_i)` for `i = 1..r`.
    pub comms: Vec<(Element, Element, Element)>,
}

impl CentralSeriesCert {
    pub fn r(&self) -> usize {
        self.comms.len()
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "r": self.r(),
            "orders": self.gammas.iter().map(|s| s.len()).collect::<Vec<_>>(),
            "commutators": self.comms.iter().map(|(c, a, b)| serde_json::json!({
                "c": element_to_json(c), "a": element_to_json(a), "b": element_to_json(b)
            })).collect::<Vec<_>>(),
        })
    }
}

/// Builds the series bottom-up through the lower central series of `G`,
/// adjoining at each step the canonically smallest commutator value `[a, b]`
/// (`a, b ∈ A`, smallest pair) not yet generated.
pub fn refined_central_series(g: &Subgroup, a: &SymSet) -> Result<CentralSeriesCert> {
    require_central_cover(g, a)?;
    let grp = g.group().clone();
    let lcs = lower_central_series(g)?;
    let mut values: std::collections::BTreeMap<Element, (Element, Element)> =
        std::collections::BTreeMap::new();
    for x in a.iter() {
        for y in a.iter() {
            values
                .entry(grp.commutator(x, y))
                .or_insert_with(|| (x.clone(), y.clone()));
        }
    }
    let mut current = Subgroup::trivial(&grp);
    let mut ladder = vec![current.clone()];
    let mut comms = Vec::new();
    for t in (2..=lcs.step()).rev() {
        let layer = lcs.term(t);
        while !layer.is_subgroup_of(&current) {
            let (c, (x, y)) = values
                .iter()
                .find(|(c, _)| layer.contains(c) && !current.contains(c))
                .ok_or_else(|| Error::Bug("commutator values do not generate the layer".into()))?;
            current = current.extend_with(std::iter::once(c))?;
            ladder.push(current.clone());
            comms.push((c.clone(), x.clone(), y.clone()));
        }
    }
    ladder.reverse();
    comms.reverse();
    let cert = CentralSeriesCert {
        gammas: ladder,
        comms,
    };
    let checks = verify_central_series(g, a, &cert)?;
    if let Some(c) = checks.iter().find(|c| !c.holds) {
        return Err(Error::Bug(format!(
            "central series check {} failed: {}",
            c.name, c.detail
        )));
    }
    Ok(cert)
}

pub fn verify_central_series(
    g: &Subgroup,
    a: &SymSet,
    cert: &CentralSeriesCert,
) -> Result<Vec<ClaimCheck>> {
    let grp = g.group().clone();
    let a4 = Powers::new(a).get(4)?.clone();
    let r = cert.r();
    let gm = &cert.gammas;
    let derived = commutator_of(g, g)?;
    let mut out = vec![ClaimCheck::new(
        "endpoints",
        gm.len() == r + 1 && gm[0] == derived && gm[r].is_trivial(),
        format!(
            "Γ_1 = [G,G] of order {}, Γ_{} trivial",
            derived.len(),
            r + 1
        ),
    )];
    let mut central = true;
    let mut covered = true;
    for i in 0..r {
        central &= is_normal(&gm[i + 1], g)?
            && gm[i].gens().iter().all(|x| {
                g.gens()
                    .iter()
                    .all(|y| gm[i + 1].contains(&grp.commutator(x, y)))
            });
        covered &= gm[i]
            .iter()
            .all(|x| in_product_with(&grp, &a4, &gm[i + 1], x));
        let (c, x, y) = &cert.comms[i];
        central &= a.contains(x) && a.contains(y) && grp.commutator(x, y) == *c;
    }
    out.push(ClaimCheck::new(
        "central",
        central,
        "[Γ_i, G] ⊆ Γ_{i+1}, c_i = [a_i, b_i]".into(),
    ));
    out.push(ClaimCheck::new(
        "a4_steps",
        covered,
        "Γ_i ⊆ A⁴Γ_{i+1}".into(),
    ));
    Ok(out)
}

/// Normal subgroups `{1} = H_0 ⊆ … ⊆ H_k ⊆ [G,G]` with `H_i ⊆ A⁸H_{i−1}` and
/// `[G,G] ⊆ A⁴H_k`.
#[derive(Clone, Debug)]
pub struct CommutatorChainCert {
    pub k_approx: usize,
    pub k: usize,
    pub h: Vec<Subgroup>,
    /// Indices `j(0) = r+1 > j(1) > …` into the central series.
    pub indices: Vec<usize>,
    /// Smallest `e` with `H_i ⊆ A^e H_{i−1}`, for `i = 1..k`.
    pub step_exponents: Vec<usize>,
    /// Smallest `e` with `[G,G] ⊆ A^e`.
    pub derived_exponent: usize,
    pub series: CentralSeriesCert,
    pub properties: Vec<ClaimCheck>,
}

impl CommutatorChainCert {
    pub fn all_verified(&self) -> bool {
        self.properties.iter().all(|p| p.holds)
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "K": self.k_approx,
            "k": self.k,
            "H": self.h.iter().map(Subgroup::to_json).collect::<Vec<_>>(),
            "indices": self.indices,
            "step_exponents": self.step_exponents,
            "derived_exponent": self.derived_exponent,
            "series": self.series.to_json(),
            "properties": self.properties,
        })
    }
}

fn smallest_step(
    pw: &mut Powers,
    g: &GroupRef,
    target: &Subgroup,
    base: &Subgroup,
    max: usize,
) -> Result<Option<usize>> {
    for e in 1..=max {
        let p = pw.get(e)?;
        if target.iter().all(|x| in_product_with(g, p, base, x)) {
            return Ok(Some(e));
        }
    }
    Ok(None)
}

pub fn commutator_chain(g: &Subgroup, a: &SymSet, k_approx: usize) -> Result<CommutatorChainCert> {
    let series = refined_central_series(g, a)?;
    let grp = g.group().clone();
    let mut pw = Powers::new(a);
    let a4 = pw.get(4)?.clone();
    let r = series.r();
    let gm = &series.gammas;
    // Γ_{j'} ⊆ A⁴Γ_j; 1-based indices into `gm`
    let within = |jp: usize, j: usize| {
        gm[jp - 1]
            .iter()
            .all(|x| in_product_with(&grp, &a4, &gm[j - 1], x))
    };
    let mut j = r + 1;
    let mut indices = vec![j];
    let mut h = vec![gm[r].clone()];
    while j >= 2 {
        let jp = (1..j)
            .find(|&jp| within(jp, j))
            .ok_or_else(|| Error::Bug("Γ_{j-1} ⊄ A⁴Γ_j".into()))?;
        if jp == 1 {
            break;
        }
        j = jp - 1;
        indices.push(j);
        h.push(gm[j - 1].clone());
    }
    let k = h.len() - 1;
    let mut step_exponents = Vec::new();
    for i in 1..=k {
        step_exponents.push(
            smallest_step(&mut pw, &grp, &h[i], &h[i - 1], 8)?
                .ok_or_else(|| Error::Bug(format!("H_{i} ⊄ A⁸H_{}", i - 1)))?,
        );
    }
    let derived = gm[0].clone();
    let limit = 8 * k + 4;
    let derived_exponent = pw
        .smallest_containing(derived.elements(), limit)?
        .ok_or_else(|| Error::Bug(format!("[G,G] ⊄ A^{limit}")))?;

    let kb = BigUint::from(k_approx);
    let last = &h[k];
    let properties = vec![
        ClaimCheck::new(
            "k_bound",
            BigUint::from(k) <= kb.pow(8),
            format!("k = {k} ≤ K^8 = {}", kb.pow(8)),
        ),
        ClaimCheck::new("h0_trivial", h[0].is_trivial(), "H_0 = {1}".into()),
        ClaimCheck::new(
            "a8_steps",
            step_exponents.iter().all(|&e| e <= 8),
            format!("exponents {step_exponents:?}"),
        ),
        ClaimCheck::new(
            "derived_cover",
            derived.iter().all(|x| in_product_with(&grp, &a4, last, x)),
            "[G,G] ⊆ A⁴H_k".into(),
        ),
        ClaimCheck::new(
            "normal",
            h.iter()
                .map(|s| is_normal(s, g))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .all(|b| b)
                && h.iter().all(|s| s.is_subgroup_of(&derived)),
            "H_i ⊴ G, H_i ⊆ [G,G]".into(),
        ),
        ClaimCheck::new(
            "derived_exponent",
            derived_exponent <= limit,
            format!("[G,G] ⊆ A^{derived_exponent} ⊆ A^{limit}"),
        ),
    ];
    if let Some(c) = properties.iter().find(|c| !c.holds) {
        return Err(Error::Bug(format!(
            "commutator chain check {} failed: {}",
            c.name, c.detail
        )));
    }
    Ok(CommutatorChainCert {
        k_approx,
        k,
        h,
        indices,
        step_exponents,
        derived_exponent,
        series,
        properties,
    })
}

/// Both computations of `[G, D]`.
#[derive(Clone, Debug)]
pub struct GuralnickResult {
    /// `{∏ [x_i, d_i] : d_i ∈ D}`.
    pub product_form: ElemSet,
    pub commutator_group: Subgroup,
    pub equal: bool,
}

/// Compares `{∏_i [x_i, d_i] : d_i ∈ D}` with the commutator subgroup `[G, D]`
/// for `D` abelian and normal and `G = ⟨xs, D⟩`. The product is accumulated
/// factor by factor, so only sets of size at most `|[G, D]|` are materialized.
pub fn guralnick_set(g: &Subgroup, d: &Subgroup, xs: &[Element]) -> Result<GuralnickResult> {
    let grp = g.group().clone();
    if !d.is_subgroup_of(g) || !is_normal(d, g)? {
        return Err(Error::Hypothesis("D is not a normal subgroup of G".into()));
    }
    if !d.is_abelian() {
        return Err(Error::Hypothesis("D is not abelian".into()));
    }
    if closure(&grp, xs)?.extend_with(d.gens())? != *g {
        return Err(Error::Hypothesis("G ≠ ⟨xs, D⟩".into()));
    }
    let mut acc: ElemSet = [grp.identity()].into_iter().collect();
    for x in xs {
        let factor: ElemSet = d.iter().map(|y| grp.commutator(x, y)).collect();
        acc = product(&grp, &acc, &factor)?;
    }
    let commutator_group = commutator_of(g, d)?;
    let equal = acc == *commutator_group.elements();
    Ok(GuralnickResult {
        product_form: acc,
        commutator_group,
        equal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{make_context, GroupCtx, GroupSpec};
    use crate::setcalc::{certify_approx, symmetrize};
    use std::sync::Arc;

    fn heis(p: u64) -> (GroupCtx, GroupRef, Subgroup) {
        let c = make_context(&GroupSpec::ut_mod(3, p)).unwrap();
        let g: GroupRef = Arc::new(c.clone());
        let w = Subgroup::whole(&g).unwrap();
        (c, g, w)
    }

    /// `{x^a y^b : a, b ∈ {−1, 0, 1}}`.
    fn square(c: &GroupCtx, g: &GroupRef) -> SymSet {
        let (x, y) = (c.word("x").unwrap(), c.word("y").unwrap());
        let mut elems = Vec::new();
        for s in -1..=1 {
            for t in -1..=1 {
                elems.push(g.mul(&g.pow(&x, s), &g.pow(&y, t)));
            }
        }
        symmetrize(g, &elems).unwrap()
    }

    #[test]
    fn commutators_land_in_a4() {
        let (c, g, w) = heis(3);
        assert!(commutators_in_a4_check(&w, &square(&c, &g)).unwrap());
        let small = symmetrize(&g, &[c.word("x").unwrap()]).unwrap();
        assert!(matches!(
            commutators_in_a4_check(&w, &small),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn heisenberg_series_and_chain() {
        let (c, g, w) = heis(3);
        let a = square(&c, &g);
        let s = refined_central_series(&w, &a).unwrap();
        assert_eq!(
            s.gammas.iter().map(|x| x.len()).collect::<Vec<_>>(),
            vec![3, 1]
        );
        let k = certify_approx(&a).unwrap().k;
        let cert = commutator_chain(&w, &a, k).unwrap();
        assert!(cert.all_verified());
        assert_eq!(cert.k, 0);
    }

    #[test]
    fn u4_series_refines_lower_central_series() {
        let c = make_context(&GroupSpec::ut_mod(4, 2)).unwrap();
        let g: GroupRef = Arc::new(c.clone());
        let w = Subgroup::whole(&g).unwrap();
        let a = SymSet::from_set(g.clone(), w.elements().clone(), "whole").unwrap();
        let s = refined_central_series(&w, &a).unwrap();
        assert_eq!(s.gammas[0].len(), 8);
        assert!(s.gammas.windows(2).all(|p| p[1].is_subgroup_of(&p[0])));
        let cert = commutator_chain(&w, &a, 1).unwrap();
        assert!(cert.all_verified());
    }

    #[test]
    fn guralnick_heisenberg() {
        let (c, g, w) = heis(3);
        let (x, y) = (c.word("x").unwrap(), c.word("y").unwrap());
        let d = closure(&g, &[y.clone(), g.commutator(&x, &y)]).unwrap();
        let r = guralnick_set(&w, &d, &[x]).unwrap();
        assert!(r.equal);
        assert_eq!(r.product_form.len(), 3);
        let z = center(&w).unwrap();
        let r = guralnick_set(&w, &z, &[c.word("x").unwrap(), c.word("y").unwrap()]).unwrap();
        assert!(r.equal && r.product_form.len() == 1);
    }
}
