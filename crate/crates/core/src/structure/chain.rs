//! The dimension chain for nilpotent approximate groups, the Gleason-type
//! counting check, and the torsion-case cover.

use num_bigint::BigUint;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::group::{element_from_json, element_to_json, Element, GroupCtx};
use crate::setcalc::{
    certify_approx, cover_translates, in_product_with, product, ClaimCheck, ElemSet, Powers, SymSet,
};
use crate::subgrp::{
    closure, is_normal, is_subgroup_set, lower_central_series, quotient, Subgroup,
};

/// Returns an element of `B³ ∩ Z ∖ B` when `B ∩ Z` is not a normal subgroup
/// of `⟨B⟩`, and `None` when it is. When `B ∩ Z` is not even a subgroup the
/// witness is taken from `B² ∩ Z ∖ B`; otherwise it is a conjugate `b⁻¹xb`.
/// Witnesses are canonical-minimal.
pub fn find_nonnormal_witness(
    b: &SymSet,
    in_z: impl Fn(&Element) -> bool,
) -> Result<Option<Element>> {
    let g = b.group().clone();
    let bz: ElemSet = b.iter().filter(|e| in_z(e)).cloned().collect();
    if !is_subgroup_set(&g, &bz) {
        let b2 = product(&g, b.elements(), b.elements())?;
        return b2
            .into_iter()
            .find(|e| in_z(e) && !b.contains(e))
            .map(Some)
            .ok_or_else(|| Error::Bug("B ∩ Z is not a subgroup yet B² ∩ Z ⊆ B".into()));
    }
    let conj: ElemSet = b
        .iter()
        .flat_map(|x| bz.iter().map(|y| g.conjugate(y, x)).collect::<Vec<_>>())
        .filter(|c| !bz.contains(c))
        .collect();
    Ok(conj.into_iter().next())
}

/// The data of a dimension chain, with every property re-verified.
#[derive(Clone, Debug)]
pub struct ChainCertificate {
    pub base: SymSet,
    pub k_approx: usize,
    pub k: usize,
    /// `D_1, …, D_{k+1}`.
    pub d: Vec<Subgroup>,
    /// `C_0, …, C_k`.
    pub c: Vec<Subgroup>,
    /// `γ_1, …, γ_k`.
    pub gammas: Vec<Element>,
    /// `H_0, …, H_k`.
    pub h: Vec<Subgroup>,
    /// Witness `ω_j` (as a coset representative in `C_j`) and its level `ℓ_j`.
    pub omegas: Vec<(Element, usize)>,
    pub properties: Vec<ClaimCheck>,
}

impl ChainCertificate {
    pub fn all_verified(&self) -> bool {
        self.properties.iter().all(|p| p.holds)
    }

    /// `K^6` as a big integer.
    pub fn stage_bound(&self) -> BigUint {
        BigUint::from(self.k_approx).pow(6)
    }

    /// Reads a chain for `base` back from [`ChainCertificate::to_json`] and
    /// re-verifies every property.
    pub fn from_json(ctx: &GroupCtx, base: &SymSet, v: &Value) -> Result<Self> {
        let bad = || Error::Malformed("malformed chain certificate".into());
        let g = base.group().clone();
        let subgroups = |key: &str| -> Result<Vec<Subgroup>> {
            v.get(key)
                .and_then(Value::as_array)
                .ok_or_else(bad)?
                .iter()
                .map(|x| Subgroup::from_json(ctx, &g, x))
                .collect()
        };
        let (d, c, h) = (subgroups("D")?, subgroups("C")?, subgroups("H")?);
        let gammas = v
            .get("gamma")
            .and_then(Value::as_array)
            .ok_or_else(bad)?
            .iter()
            .map(|x| element_from_json(ctx, x))
            .collect::<Result<Vec<_>>>()?;
        let omegas = v
            .get("omega")
            .and_then(Value::as_array)
            .ok_or_else(bad)?
            .iter()
            .map(|w| {
                let rep = element_from_json(ctx, w.get("rep").ok_or_else(bad)?)?;
                let level = w.get("level").and_then(Value::as_u64).ok_or_else(bad)? as usize;
                Ok((rep, level))
            })
            .collect::<Result<Vec<_>>>()?;
        let k_approx = v.get("K").and_then(Value::as_u64).ok_or_else(bad)? as usize;
        let properties = verify_chain(base, k_approx, &d, &c, &gammas, &h)?;
        Ok(ChainCertificate {
            base: base.clone(),
            k_approx,
            k: gammas.len(),
            d,
            c,
            gammas,
            h,
            omegas,
            properties,
        })
    }

    /// Recomputes all properties from scratch.
    pub fn verify(&self) -> Result<Vec<ClaimCheck>> {
        verify_chain(
            &self.base,
            self.k_approx,
            &self.d,
            &self.c,
            &self.gammas,
            &self.h,
        )
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "K": self.k_approx,
            "k": self.k,
            "D": self.d.iter().map(Subgroup::to_json).collect::<Vec<_>>(),
            "C": self.c.iter().map(Subgroup::to_json).collect::<Vec<_>>(),
            "H": self.h.iter().map(Subgroup::to_json).collect::<Vec<_>>(),
            "gamma": self.gammas.iter().map(element_to_json).collect::<Vec<_>>(),
            "omega": self.omegas.iter().map(|(w, l)| serde_json::json!({"rep": element_to_json(w), "level": l})).collect::<Vec<_>>(),
            "properties": self.properties,
        })
    }
}

fn verify_chain(
    a: &SymSet,
    k_approx: usize,
    d: &[Subgroup],
    c: &[Subgroup],
    gammas: &[Element],
    h: &[Subgroup],
) -> Result<Vec<ClaimCheck>> {
    let g = a.group().clone();
    let k = gammas.len();
    if d.len() != k + 1 || c.len() != k + 1 || h.len() != k + 1 {
        return Err(Error::Malformed("chain lengths inconsistent".into()));
    }
    let mut pw = Powers::new(a);
    let a2 = pw.get(2)?.clone();
    let a6 = pw.get(6)?.clone();
    let kb = BigUint::from(k_approx);
    let mut out = Vec::new();
    let mut fails = |name: &str, bad: Vec<String>, ok_detail: String| {
        let holds = bad.is_empty();
        out.push(ClaimCheck::new(
            name,
            holds,
            if holds { ok_detail } else { bad.join("; ") },
        ));
    };

    let generated = closure(&g, &a.iter().cloned().collect::<Vec<_>>())?;
    let mut bad = Vec::new();
    if c[0] != generated {
        bad.push("C_0 ≠ ⟨A⟩".to_string());
    }
    if !h[0].is_trivial() {
        bad.push("H_0 nontrivial".into());
    }
    if BigUint::from(k) > kb.pow(6) {
        bad.push(format!("k = {k} exceeds K^6"));
    }
    fails("k_bound", bad, format!("k = {k} ≤ K^6 = {}", kb.pow(6)));

    let mut bad = Vec::new();
    for i in 1..=k {
        if !d[i - 1].is_subgroup_of(&c[i - 1]) || !is_normal(&d[i - 1], &c[i - 1])? {
            bad.push(format!("D_{i} not normal in C_{}", i - 1));
        }
    }
    fails("d_normal", bad, "D_i ⊴ C_{i-1}".into());

    let mut bad = Vec::new();
    for i in 1..=k {
        let gm = &gammas[i - 1];
        let dn = &d[i - 1];
        if !c[i].contains(gm)
            || c[i]
                .gens()
                .iter()
                .any(|x| !dn.contains(&g.commutator(gm, x)))
        {
            bad.push(format!("γ_{i} not central in C_{i}/D_{i}"));
        }
        if dn.gens().iter().any(|y| !dn.contains(&g.conjugate(y, gm))) {
            bad.push(format!("γ_{i} does not normalise D_{i}"));
        }
        if h[i] != closure(&g, std::slice::from_ref(gm))?.extend_with(dn.gens())? || !is_normal(&h[i], &c[i])?
        {
            bad.push(format!("H_{i} ≠ ⟨γ_{i}⟩D_{i} or not normal in C_{i}"));
        }
    }
    fails(
        "gamma_central",
        bad,
        "γ_i central in C_i/D_i, H_i ⊴ C_i".into(),
    );

    let mut bad = Vec::new();
    for i in 1..=k + 1 {
        if !h[i - 1].is_subgroup_of(&d[i - 1]) {
            bad.push(format!("H_{} ⊄ D_{i}", i - 1));
        }
    }
    fails("h_nested", bad, "H_{i-1} ⊆ D_i".into());

    let mut bad = Vec::new();
    for i in 1..=k + 1 {
        if let Some(x) = d[i - 1]
            .iter()
            .find(|x| !in_product_with(&g, &a2, &h[i - 1], x))
        {
            bad.push(format!("{x} ∈ D_{i} ∖ A²H_{}", i - 1));
        }
    }
    fails("d_in_a2h", bad, "D_i ⊆ A²H_{i-1}".into());

    let mut bad = Vec::new();
    for i in 0..=k {
        let gen = h[i].extend_with(a2.iter().filter(|x| c[i].contains(x)))?;
        if gen != c[i] {
            bad.push(format!("C_{i} ≠ ⟨A²∩C_{i}⟩H_{i}"));
        }
    }
    fails("c_generated", bad, "C_i = ⟨A²∩C_i⟩H_i".into());

    let mut bad = Vec::new();
    for i in 1..=k {
        let gm = &gammas[i - 1];
        if !a6.contains(gm) || in_product_with(&g, &a2, &h[i - 1], gm) {
            bad.push(format!("γ_{i} ∉ A⁶ ∖ A²H_{}", i - 1));
        }
    }
    fails("gamma_new", bad, "γ_i ∈ A⁶ ∖ A²H_{i-1}".into());

    let mut bad = Vec::new();
    let mut detail = Vec::new();
    for (i, ci) in c.iter().enumerate() {
        let n = a2.iter().filter(|x| ci.contains(x)).count();
        detail.push(n.to_string());
        if BigUint::from(n) * kb.pow(35 * i as u32) < BigUint::from(a.len()) {
            bad.push(format!("|A²∩C_{i}| = {n} < K^-{}|A|", 35 * i));
        }
    }
    fails(
        "size",
        bad,
        format!("|A²∩C_i| = [{}], |A| = {}", detail.join(", "), a.len()),
    );

    let bad = if c[k] == d[k] {
        vec![]
    } else {
        vec!["C_k ≠ D_{k+1}".to_string()]
    };
    fails("c_equals_d", bad, "C_k = D_{k+1}".into());
    Ok(out)
}

/// Runs the dimension-chain iteration on `A`, whose generated group must be
/// finite and nilpotent, and verifies the result.
pub fn dimension_chain(a: &SymSet) -> Result<ChainCertificate> {
    let cert = certify_approx(a)?;
    dimension_chain_with(a, cert.k)
}

/// As [`dimension_chain`] with an already certified `K`.
pub fn dimension_chain_with(a: &SymSet, k_approx: usize) -> Result<ChainCertificate> {
    let g = a.group().clone();
    let c0 = closure(&g, &a.iter().cloned().collect::<Vec<_>>())?;
    lower_central_series(&c0)?;
    let mut pw = Powers::new(a);
    let a2 = pw.get(2)?.clone();
    let a6 = pw.get(6)?.clone();
    let bound = BigUint::from(k_approx).pow(6);

    let mut c = vec![c0];
    let mut h = vec![Subgroup::trivial(&g)];
    let mut d: Vec<Subgroup> = Vec::new();
    let mut gammas = Vec::new();
    let mut omegas = Vec::new();
    loop {
        let j = gammas.len();
        let (cj, hj) = (c[j].clone(), h[j].clone());
        let (q, _) = quotient(&cj, &hj)?;
        let qg = q.as_group();
        let b: ElemSet = a2
            .iter()
            .filter(|x| cj.contains(x))
            .map(|x| q.project(x))
            .collect();
        if b.len() == q.len() {
            d.push(cj);
            break;
        }
        if BigUint::from(j + 1) > bound {
            return Err(Error::Bug(format!(
                "dimension chain exceeded K^6 = {bound} stages"
            )));
        }
        let whole = closure(&qg, &b.iter().cloned().collect::<Vec<_>>())?;
        let series = lower_central_series(&whole)?;
        let b3 = product(&qg, &product(&qg, &b, &b)?, &b)?;
        let fresh: Vec<&Element> = b3.iter().filter(|w| !b.contains(w)).collect();
        let (level, omega) = (1..=series.step())
            .rev()
            .find_map(|l| {
                fresh
                    .iter()
                    .find(|w| series.term(l).contains(w))
                    .map(|w| (l, (*w).clone()))
            })
            .ok_or_else(|| Error::Bug("no witness in B³ ∖ B".into()))?;
        let below = series.term(level + 1);
        let bz: ElemSet = b.iter().filter(|x| below.contains(x)).cloned().collect();
        let bz = Subgroup::from_set(&qg, &bz)?
            .filter(|s| is_normal(s, &whole).unwrap_or(false))
            .ok_or_else(|| Error::Bug(format!("B ∩ Z_{} is not a normal subgroup", level + 1)))?;
        let dn = q.preimage(&bz)?;
        let gamma = a6
            .iter()
            .find(|x| cj.contains(x) && q.project(x) == omega)
            .cloned()
            .ok_or_else(|| Error::Bug("no lift of ω in A⁶".into()))?;
        let gset: ElemSet = cj
            .iter()
            .filter(|x| dn.contains(&g.commutator(x, &gamma)))
            .cloned()
            .collect();
        let hn = closure(&g, std::slice::from_ref(&gamma))?.extend_with(dn.gens())?;
        let cn = hn.extend_with(a2.iter().filter(|x| gset.contains(x)))?;
        d.push(dn);
        h.push(hn);
        c.push(cn);
        gammas.push(gamma);
        omegas.push((omega, level));
    }
    let properties = verify_chain(a, k_approx, &d, &c, &gammas, &h)?;
    if let Some(p) = properties.iter().find(|p| !p.holds) {
        return Err(Error::Bug(format!(
            "chain property {} failed: {}",
            p.name, p.detail
        )));
    }
    Ok(ChainCertificate {
        base: a.clone(),
        k_approx,
        k: gammas.len(),
        d,
        c,
        gammas,
        h,
        omegas,
        properties,
    })
}

/// Outcome of the Gleason-type check.
#[derive(Clone, Debug, PartialEq)]
pub struct GleasonReport {
    pub k: usize,
    pub disjoint: bool,
    pub power_size: usize,
    pub bound_holds: bool,
}

/// Given nested `H_0 = {1} ⊆ H_1 ⊆ … ⊆ H_k` and witnesses
/// `h_i ∈ (A^m ∩ H_i) ∖ A²H_{i−1}`, confirms the translates `A h_i` are
/// pairwise disjoint and `|A^{m+1}| ≥ k|A|`.
pub fn gleason_check(
    a: &SymSet,
    chain: &[Subgroup],
    witnesses: &[Element],
    m: usize,
) -> Result<GleasonReport> {
    let g = a.group().clone();
    let k = witnesses.len();
    if chain.len() != k + 1 {
        return Err(Error::Malformed("need H_0..H_k for k witnesses".into()));
    }
    let mut pw = Powers::new(a);
    let am = pw.get(m)?.clone();
    let a2 = pw.get(2)?.clone();
    for i in 1..=k {
        let hi = &witnesses[i - 1];
        if !chain[i - 1].is_subgroup_of(&chain[i]) {
            return Err(Error::Hypothesis(format!("chain not nested at {i}")));
        }
        if !am.contains(hi) || !chain[i].contains(hi) || in_product_with(&g, &a2, &chain[i - 1], hi)
        {
            return Err(Error::Hypothesis(format!("hypothesis violated at {i}")));
        }
    }
    let mut seen = ElemSet::new();
    let mut disjoint = true;
    for hi in witnesses {
        for x in a.iter() {
            disjoint &= seen.insert(g.mul(x, hi));
        }
    }
    let power_size = pw.get(m + 1)?.len();
    Ok(GleasonReport {
        k,
        disjoint,
        power_size,
        bound_holds: power_size >= k * a.len(),
    })
}

/// Nilpotent subgroup `C` covering `A` by few translates, for sets whose
/// generated group has bounded exponent.
#[derive(Clone, Debug)]
pub struct TorsionResult {
    pub chain: ChainCertificate,
    pub c: Subgroup,
    /// Smallest `e` with `H_k ⊆ A^e`, and the bound `(3r+2)K⁶`.
    pub h_exponent: usize,
    /// Smallest `e` with `C ⊆ A^e`, and the bound `(3r+2)K⁶ + 2`.
    pub c_exponent: usize,
    pub exponent_bound: BigUint,
    pub cover: Vec<Element>,
}

impl TorsionResult {
    pub fn within_bounds(&self) -> bool {
        BigUint::from(self.h_exponent) <= self.exponent_bound
            && BigUint::from(self.c_exponent) <= &self.exponent_bound + 2u32
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "chain": self.chain.to_json(),
            "C": self.c.to_json(),
            "H_exponent": self.h_exponent,
            "C_exponent": self.c_exponent,
            "exponent_bound": self.exponent_bound.to_string(),
            "cover": self.cover.iter().map(element_to_json).collect::<Vec<_>>(),
        })
    }
}

/// Checks that every element of `⟨A⟩` has order at most `r`; returns a witness otherwise.
pub fn exponent_witness(generated: &Subgroup, r: u64) -> Option<Element> {
    let g = generated.group();
    generated
        .iter()
        .find(|x| g.element_order(x, r).is_none())
        .cloned()
}

pub fn torsion_structure(a: &SymSet, r: u64) -> Result<TorsionResult> {
    let g = a.group().clone();
    let generated = closure(&g, &a.iter().cloned().collect::<Vec<_>>())?;
    if let Some(w) = exponent_witness(&generated, r) {
        return Err(Error::Hypothesis(format!(
            "element {w} has order greater than {r}"
        )));
    }
    let chain = dimension_chain(a)?;
    let k6 = BigUint::from(chain.k_approx).pow(6);
    let exponent_bound = (BigUint::from(3 * r + 2)) * k6;
    let mut pw = Powers::new(a);
    let limit = generated.len().max(2);
    let hk = &chain.h[chain.k];
    let c = chain.d[chain.k].clone();
    let h_exponent = pw
        .smallest_containing(hk.elements(), limit)?
        .ok_or_else(|| Error::Bug("H_k ⊄ ⟨A⟩".into()))?;
    let c_exponent = pw
        .smallest_containing(c.elements(), limit)?
        .ok_or_else(|| Error::Bug("C ⊄ ⟨A⟩".into()))?;
    let cover = cover_translates(a.elements(), c.elements(), &g)?;
    let res = TorsionResult {
        chain,
        c,
        h_exponent,
        c_exponent,
        exponent_bound,
        cover,
    };
    if !res.within_bounds() {
        return Err(Error::Bug(
            "torsion exponents exceed the proven bound".into(),
        ));
    }
    Ok(res)
}
