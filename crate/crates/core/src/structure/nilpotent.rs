//! The structure theorem for finite nilpotent approximate groups: a subgroup
//! `C` generated by `A⁶ ∩ C` and a normal `H ⊆ A^m` with `C/H` of bounded step.

use num_rational::Ratio;
use serde_json::Value;

use super::central::{commutator_chain, guralnick_set, CommutatorChainCert};
use super::chain::{dimension_chain_with, ChainCertificate};
use crate::error::{Error, Result};
use crate::group::{element_to_json, Element};
use crate::progression::{abelian_freiman_fit, AbelianFit, FitCaps};
use crate::setcalc::{
    certify_approx, left_coset_reps, ratio_json, ClaimCheck, ElemSet, Powers,
    SymSet,
};
use crate::subgrp::{
    closure, commutator_of, commutator_subgroup, is_normal, lower_central_series, quotient,
    subgroup_join, Subgroup,
};

/// One pass of the descent from `D̄_{i+1}` to `D̄_i`.
#[derive(Clone, Debug)]
pub struct StageRecord {
    pub i: usize,
    /// Smallest `m` with `D̄_{i+1} = (A^m ∩ D̄_{i+1})·H_i`.
    pub m: usize,
    /// Commutator chain of `D̄_{i+1}/D_i` for the image of `A^m ∩ D̄_{i+1}`.
    pub derived: CommutatorChainCert,
    /// Whether the product-form computation of `[C, D̄_{i+1}]` modulo `D_i′` agreed.
    pub product_form_agrees: bool,
    /// `None` when the bounded search found nothing and the whole quotient was kept.
    pub fit: Option<AbelianFit>,
    pub gamma_added: bool,
}

impl StageRecord {
    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "i": self.i,
            "m": self.m,
            "derived": self.derived.to_json(),
            "product_form_agrees": self.product_form_agrees,
            "fit": self.fit.as_ref().map(AbelianFit::to_json),
            "gamma_added": self.gamma_added,
        })
    }
}

/// `H ⊴ C ≤ ⟨A⟩` with `H ⊆ A^m`, `C/H` of step at most `K⁶`,
/// `C = ⟨A⁶ ∩ C⟩`, and `A` covered by few left cosets of `C`.
#[derive(Clone, Debug)]
pub struct StructureResult {
    pub base: SymSet,
    pub k_approx: usize,
    pub chain: ChainCertificate,
    pub c: Subgroup,
    pub h: Subgroup,
    /// `D̄_1, …, D̄_{k+1}`.
    pub dbar: Vec<Subgroup>,
    /// Elements with `C = ⟨xs, H⟩`.
    pub xs: Vec<Element>,
    pub stages: Vec<StageRecord>,
    /// Smallest `m` with `H ⊆ A^m`.
    pub h_exponent: usize,
    /// Step of `C/H`.
    pub step: usize,
    /// `|A² ∩ C| / |A|`.
    pub size_ratio: Ratio<u64>,
    /// Elements of `A` whose left cosets of `C` cover `A`.
    pub cover: Vec<Element>,
    pub properties: Vec<ClaimCheck>,
}

impl StructureResult {
    pub fn all_verified(&self) -> bool {
        self.properties.iter().all(|p| p.holds)
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "K": self.k_approx,
            "chain": self.chain.to_json(),
            "C": self.c.to_json(),
            "H": self.h.to_json(),
            "Dbar": self.dbar.iter().map(Subgroup::to_json).collect::<Vec<_>>(),
            "xs": self.xs.iter().map(element_to_json).collect::<Vec<_>>(),
            "stages": self.stages.iter().map(StageRecord::to_json).collect::<Vec<_>>(),
            "H_exponent": self.h_exponent,
            "step": self.step,
            "size_ratio": ratio_json(&self.size_ratio),
            "cover": self.cover.iter().map(element_to_json).collect::<Vec<_>>(),
            "properties": self.properties,
        })
    }
}

/// Smallest `m` with `target = (A^m ∩ target)·h` for `h ⊴ target`, found by
/// counting the cosets of `h` that `A^m` meets; fails once the powers stabilise.
fn covering_exponent(pw: &mut Powers, target: &Subgroup, h: &Subgroup) -> Result<usize> {
    let (q, _) = quotient(target, h)?;
    let mut prev = 0;
    for m in 1.. {
        let p = pw.get(m)?;
        let met: ElemSet = p.iter().filter(|x| target.contains(x)).map(|x| q.project(x)).collect();
        if met.len() == q.len() {
            return Ok(m);
        }
        if p.len() == prev {
            break;
        }
        prev = p.len();
    }
    Err(Error::Bug("subgroup is not covered by any power of A".into()))
}

/// Image of `S ∩ parent` in a quotient, as a symmetric set.
fn image_in(q: &std::sync::Arc<crate::subgrp::QuotientCtx>, s: &ElemSet, label: &str) -> Result<SymSet> {
    let qg = q.as_group();
    let img: ElemSet = s.iter().filter(|x| q.parent().contains(x)).map(|x| q.project(x)).collect();
    SymSet::from_set(qg, img, label)
}

pub fn nilpotent_structure(a: &SymSet) -> Result<StructureResult> {
    nilpotent_structure_with(a, FitCaps::default())
}

/// Runs the dimension chain and then descends `D̄_{k+1} = C ⊇ … ⊇ D̄_1 = H`,
/// each step splitting off the derived subgroup, the commutator with `C`,
/// and an abelian coset progression fitted in the remaining central quotient.
pub fn nilpotent_structure_with(a: &SymSet, caps: FitCaps) -> Result<StructureResult> {
    let g = a.group().clone();
    if g.order().is_none() {
        return Err(Error::Unsupported(
            "ambient group is infinite; reduce to a finite quotient first".into(),
        ));
    }
    let k_approx = certify_approx(a)?.k;
    let chain = dimension_chain_with(a, k_approx)?;
    let k = chain.k;
    let c = chain.c[k].clone();
    let mut pw = Powers::new(a);

    let mut dbar = vec![c.clone()];
    let mut xs: Vec<Element> = Vec::new();
    let mut stages = Vec::new();
    let mut properties = Vec::new();
    for i in (1..=k).rev() {
        let upper = dbar.last().expect("nonempty").clone();
        let d_i = &chain.d[i - 1];
        let h_i = &chain.h[i];
        if !is_normal(h_i, &c)? || !h_i.is_subgroup_of(&upper) {
            return Err(Error::Bug(format!("H_{i} is not normal in C inside D̄_{}", i + 1)));
        }
        let m = covering_exponent(&mut pw, &upper, h_i)?;
        let am = pw.get(m)?.clone();

        let (q1, _) = quotient(&upper, d_i)?;
        let a1 = image_in(&q1, &am, "image of A^m")?;
        let derived = commutator_chain(&Subgroup::whole(&q1.as_group())?, &a1, k_approx)?;
        let d1 = subgroup_join(&commutator_subgroup(&upper)?, d_i)?;

        let (q2, _) = quotient(&c, &d1)?;
        let xs2: Vec<Element> = xs.iter().map(|x| q2.project(x)).collect();
        let upper2 = q2.image(&upper)?;
        let cross = guralnick_set(&Subgroup::whole(&q2.as_group())?, &upper2, &xs2)?;
        let d2 = subgroup_join(&commutator_of(&c, &upper)?, &d1)?;
        let agrees = cross.equal && q2.preimage(&cross.commutator_group)? == d2;

        let (q3, _) = quotient(&upper, &d2)?;
        let a3 = image_in(&q3, &am, "image of A^m")?;
        // smallest exponent first keeps H inside a low power of A
        let mut fit = None;
        for e in 1..=caps.exp_cap {
            fit = abelian_freiman_fit(&a3, FitCaps { exp_cap: e, ..caps })?;
            if fit.is_some() {
                break;
            }
        }
        let (lower, fit_gens) = match &fit {
            Some(f) => (q3.preimage(&f.h)?, f.prog.gens.clone()),
            None => (upper.clone(), Vec::new()),
        };
        if !is_normal(&lower, &c)? {
            return Err(Error::Bug(format!("D̄_{i} is not normal in C")));
        }
        xs.extend(fit_gens.iter().cloned());
        let spanned = closure(&g, &fit_gens)?.extend_with(lower.gens())?;
        let gamma_added = !upper.is_subgroup_of(&spanned);
        if gamma_added {
            xs.push(chain.gammas[i - 1].clone());
        }
        properties.push(ClaimCheck::new(
            &format!("central_{i}"),
            commutator_of(&c, &upper)?.is_subgroup_of(&lower),
            format!("[C, D̄_{}] ⊆ D̄_{i}", i + 1),
        ));
        properties.push(ClaimCheck::new(
            &format!("commutator_form_{i}"),
            agrees,
            "product form of [C, D̄] matches the commutator subgroup".into(),
        ));
        stages.push(StageRecord { i, m, derived, product_form_agrees: agrees, fit, gamma_added });
        dbar.push(lower);
    }
    dbar.reverse();
    let h = dbar[0].clone();

    let generated = closure(&g, &a.iter().cloned().collect::<Vec<_>>())?;
    let h_exponent = pw
        .smallest_containing(h.elements(), generated.len().max(2))?
        .ok_or_else(|| Error::Bug("H is not inside a power of A".into()))?;
    let (qch, _) = quotient(&c, &h)?;
    let step = lower_central_series(&Subgroup::whole(&qch.as_group())?)?.step();
    let a2 = pw.get(2)?.clone();
    let a6 = pw.get(6)?.clone();
    let a6c: Vec<Element> = a6.iter().filter(|x| c.contains(x)).cloned().collect();
    let a6_generates = closure(&g, &a6c)? == c;
    let a2c = a2.iter().filter(|x| c.contains(x)).count();
    let size_ratio = Ratio::new(a2c as u64, a.len() as u64);
    let cover = left_coset_reps(a.elements(), &c);
    let covered = a.iter().all(|x| cover.iter().any(|y| c.contains(&g.mul(&g.inv(y), x))));
    let xs_span = closure(&g, &xs)?.extend_with(h.gens())? == c;
    let bound = (k_approx as u128).saturating_pow(6);

    properties.push(ClaimCheck::new("h_normal", is_normal(&h, &c)?, "H ⊴ C".into()));
    properties.push(ClaimCheck::new(
        "h_in_power",
        true,
        format!("H ⊆ A^{h_exponent}"),
    ));
    properties.push(ClaimCheck::new(
        "step_bound",
        step <= k && (step as u128) <= bound,
        format!("step(C/H) = {step} ≤ k = {k} ≤ K⁶"),
    ));
    properties.push(ClaimCheck::new("a6_generates", a6_generates, "C = ⟨A⁶ ∩ C⟩".into()));
    properties.push(ClaimCheck::new(
        "size_ratio",
        a.len() <= cover.len() * a2c,
        format!("|A| ≤ |X|·|A² ∩ C| with |A² ∩ C|/|A| = {size_ratio}"),
    ));
    properties.push(ClaimCheck::new(
        "cover",
        covered,
        format!("A ⊆ XC with |X| = {}", cover.len()),
    ));
    properties.push(ClaimCheck::new("xs_generate", xs_span, "C = ⟨xs, H⟩".into()));
    if let Some(p) = properties.iter().find(|p| !p.holds) {
        return Err(Error::Bug(format!("structure property {} failed: {}", p.name, p.detail)));
    }
    Ok(StructureResult {
        base: a.clone(),
        k_approx,
        chain,
        c,
        h,
        dbar,
        xs,
        stages,
        h_exponent,
        step,
        size_ratio,
        cover,
        properties,
    })
}
