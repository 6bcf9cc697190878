//! Finite subgroups with full element tables, normality, centralizers,
//! lower central series and quotients by canonical coset representatives.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::group::{element_from_json, element_to_json, Element, Group, GroupCtx, GroupRef, HomRule, Homomorphism};
use crate::setcalc::ElemSet;

/// A finite subgroup, stored as its full element table.
#[derive(Clone)]
pub struct Subgroup {
    group: GroupRef,
    gens: Vec<Element>,
    elems: Arc<ElemSet>,
}

impl fmt::Debug for Subgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "Subgroup(order {}, gens {:?})",
            self.elems.len(),
            self.gens
        )
    }
}

impl PartialEq for Subgroup {
    fn eq(&self, other: &Self) -> bool {
        self.elems == other.elems
    }
}

/// Breadth-first closure of `gens` under right multiplication.
pub fn closure(group: &GroupRef, gens: &[Element]) -> Result<Subgroup> {
    let id = group.identity();
    let mut kept: Vec<Element> = Vec::new();
    let mut elems: Vec<Element> = vec![id.clone()];
    let mut seen: HashSet<Element> = [id.clone()].into_iter().collect();
    for g in gens {
        group.check(g)?;
        if seen.contains(g) {
            continue;
        }
        kept.push(g.clone());
        // the current subgroup H is a union of right cosets H·r; close under the gens
        let block = elems.len();
        let mut reps = vec![id.clone()];
        let mut i = 0;
        while i < reps.len() {
            for s in &kept {
                let t = group.mul(&reps[i], s);
                if seen.contains(&t) {
                    continue;
                }
                for h in 0..block {
                    let x = group.mul(&elems[h], &t);
                    seen.insert(x.clone());
                    elems.push(x);
                }
                if seen.len() > group.cap() {
                    return Err(Error::cap("subgroup closure", seen.len(), group.cap()));
                }
                reps.push(t);
            }
            i += 1;
        }
    }
    Ok(Subgroup {
        group: group.clone(),
        gens: kept,
        elems: Arc::new(elems.into_iter().collect()),
    })
}

impl Subgroup {
    pub fn trivial(group: &GroupRef) -> Subgroup {
        Subgroup {
            group: group.clone(),
            gens: vec![],
            elems: Arc::new([group.identity()].into_iter().collect()),
        }
    }

    /// The whole group generated by the context's standard generators.
    pub fn whole(group: &GroupRef) -> Result<Subgroup> {
        closure(group, &group.generators())
    }

    /// Returns the subgroup whose element set is exactly `set`, or `None` if
    /// `set` is not a subgroup. A small generating set is picked greedily.
    pub fn from_set(group: &GroupRef, set: &ElemSet) -> Result<Option<Subgroup>> {
        if !set.contains(&group.identity()) {
            return Ok(None);
        }
        let mut h = Subgroup::trivial(group);
        for e in set {
            if !h.contains(e) {
                let mut gens = h.gens.clone();
                gens.push(e.clone());
                h = closure(group, &gens)?;
                if h.len() > set.len() {
                    return Ok(None);
                }
            }
        }
        Ok(if h.elems.as_ref() == set {
            Some(h)
        } else {
            None
        })
    }

    /// `⟨self, extra⟩`, adding only the elements not already generated.
    pub fn extend_with<'a>(
        &self,
        extra: impl IntoIterator<Item = &'a Element>,
    ) -> Result<Subgroup> {
        let mut h = self.clone();
        for e in extra {
            if !h.contains(e) {
                let mut gens = h.gens.clone();
                gens.push(e.clone());
                h = closure(&self.group, &gens)?;
            }
        }
        Ok(h)
    }

    pub fn group(&self) -> &GroupRef {
        &self.group
    }
    pub fn gens(&self) -> &[Element] {
        &self.gens
    }
    pub fn elements(&self) -> &ElemSet {
        &self.elems
    }
    pub fn len(&self) -> usize {
        self.elems.len()
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn order(&self) -> usize {
        self.elems.len()
    }
    pub fn is_trivial(&self) -> bool {
        self.elems.len() == 1
    }
    pub fn contains(&self, e: &Element) -> bool {
        self.elems.contains(e)
    }
    pub fn iter(&self) -> impl Iterator<Item = &Element> {
        self.elems.iter()
    }
    pub fn is_subgroup_of(&self, other: &Subgroup) -> bool {
        self.len() <= other.len() && self.elems.iter().all(|e| other.contains(e))
    }

    /// Whether all generators commute pairwise.
    pub fn is_abelian(&self) -> bool {
        let g = &self.group;
        self.gens.iter().enumerate().all(|(i, a)| {
            self.gens[i + 1..]
                .iter()
                .all(|b| g.mul(a, b) == g.mul(b, a))
        })
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "generators": self.gens.iter().map(element_to_json).collect::<Vec<_>>(),
            "order": self.len(),
        })
    }

    /// Rebuilds a subgroup from the form written by [`Subgroup::to_json`],
    /// checking the recorded order.
    pub fn from_json(ctx: &GroupCtx, group: &GroupRef, v: &Value) -> Result<Subgroup> {
        let gens = v
            .get("generators")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Malformed("subgroup without generators".into()))?
            .iter()
            .map(|x| element_from_json(ctx, x))
            .collect::<Result<Vec<_>>>()?;
        let h = closure(group, &gens)?;
        if v.get("order").and_then(Value::as_u64) != Some(h.len() as u64) {
            return Err(Error::Malformed("subgroup order does not match its generators".into()));
        }
        Ok(h)
    }
}

/// Whether a finite set is a subgroup: contains the identity and is closed
/// under multiplication.
pub fn is_subgroup_set(group: &GroupRef, set: &ElemSet) -> bool {
    set.contains(&group.identity())
        && set
            .iter()
            .all(|a| set.iter().all(|b| set.contains(&group.mul(a, b))))
}

/// Whether `h` is normal in `g`; checks `x⁻¹ y x ∈ H` for generators `x` of
/// `G` and generators `y` of `H`.
pub fn is_normal(h: &Subgroup, g: &Subgroup) -> Result<bool> {
    if !h.is_subgroup_of(g) {
        return Err(Error::Malformed("H is not contained in G".into()));
    }
    let grp = &g.group;
    Ok(g.gens
        .iter()
        .all(|x| h.gens.iter().all(|y| h.contains(&grp.conjugate(y, x)))))
}

/// Smallest subgroup of `g` containing `xs` and normal in `g`.
pub fn normal_closure(g: &Subgroup, xs: &[Element]) -> Result<Subgroup> {
    let grp = g.group.clone();
    let mut h = closure(&grp, xs)?;
    loop {
        let missing = g
            .gens
            .iter()
            .flat_map(|x| h.gens.iter().map(move |y| (x, y)))
            .map(|(x, y)| grp.conjugate(y, x))
            .find(|c| !h.contains(c));
        match missing {
            None => return Ok(h),
            Some(c) => {
                let mut gens = h.gens.clone();
                gens.push(c);
                h = closure(&grp, &gens)?;
            }
        }
    }
}

pub fn centralizer(g: &Subgroup, omega: &Element) -> Result<Subgroup> {
    if !g.contains(omega) {
        return Err(Error::Malformed(format!("{omega} is not in G")));
    }
    centralizer_of(g, std::slice::from_ref(omega))
}

/// Elements of `g` commuting with every element of `xs`.
pub fn centralizer_of(g: &Subgroup, xs: &[Element]) -> Result<Subgroup> {
    let grp = &g.group;
    let set: ElemSet = g
        .iter()
        .filter(|e| xs.iter().all(|x| grp.mul(e, x) == grp.mul(x, e)))
        .cloned()
        .collect();
    Subgroup::from_set(grp, &set)?.ok_or_else(|| Error::Bug("centralizer is not a subgroup".into()))
}

pub fn center(g: &Subgroup) -> Result<Subgroup> {
    centralizer_of(g, &g.gens)
}

/// `[A, B]`: the normal closure in `⟨A, B⟩` of commutators of generators.
pub fn commutator_of(a: &Subgroup, b: &Subgroup) -> Result<Subgroup> {
    let grp = a.group.clone();
    let join = subgroup_join(a, b)?;
    let comms: Vec<Element> = a
        .gens
        .iter()
        .flat_map(|x| {
            b.gens
                .iter()
                .map(|y| grp.commutator(x, y))
                .collect::<Vec<_>>()
        })
        .collect();
    normal_closure(&join, &comms)
}

pub fn commutator_subgroup(g: &Subgroup) -> Result<Subgroup> {
    if g.group.order().is_none() && g.len() > 1 {
        // finite subgroups of the supported infinite contexts are trivial
        return Err(Error::Unsupported(
            "commutator subgroup of an infinite closure".into(),
        ));
    }
    commutator_of(g, g)
}

pub fn subgroup_join(h1: &Subgroup, h2: &Subgroup) -> Result<Subgroup> {
    if h2.is_subgroup_of(h1) {
        return Ok(h1.clone());
    }
    if h1.is_subgroup_of(h2) {
        return Ok(h2.clone());
    }
    let mut gens = h1.gens.clone();
    gens.extend(h2.gens.iter().cloned());
    closure(&h1.group, &gens)
}

/// Lower central series `G = γ_1 ⊋ γ_2 ⊋ … ⊋ γ_{s+1} = {1}`.
#[derive(Clone, Debug)]
pub struct CentralSeries {
    pub terms: Vec<Subgroup>,
}

impl CentralSeries {
    /// Nilpotency step `s`.
    pub fn step(&self) -> usize {
        self.terms.len() - 1
    }
    /// `γ_i` (1-based); `{1}` beyond the end.
    pub fn term(&self, i: usize) -> &Subgroup {
        &self.terms[(i.max(1) - 1).min(self.terms.len() - 1)]
    }
}

pub fn lower_central_series(g: &Subgroup) -> Result<CentralSeries> {
    let mut terms = vec![g.clone()];
    loop {
        let last = terms.last().expect("nonempty");
        if last.is_trivial() {
            return Ok(CentralSeries { terms });
        }
        let next = commutator_of(last, g)?;
        if next.len() == last.len() {
            return Err(Error::Hypothesis(format!(
                "group of order {} is not nilpotent",
                g.len()
            )));
        }
        terms.push(next);
    }
}

/// Nilpotency step of `⟨xs⟩`. In finite contexts this is read off the lower
/// central series of the closure. Otherwise it is the least `s ≤ max_step`
/// such that every simple commutator of weight `s + 1` in the `xs` vanishes,
/// which determines the step when `⟨xs⟩` is known to be nilpotent.
pub fn generated_step(group: &GroupRef, xs: &[Element], max_step: usize) -> Result<usize> {
    if group.order().is_some() {
        return Ok(lower_central_series(&closure(group, xs)?)?.step());
    }
    let id = group.identity();
    let mut layer: Vec<Element> = xs.iter().filter(|x| **x != id).cloned().collect();
    if layer.is_empty() {
        return Ok(0);
    }
    for s in 1..=max_step {
        let next: ElemSet = layer
            .iter()
            .flat_map(|c| xs.iter().map(move |x| (c, x)))
            .map(|(c, x)| group.commutator(c, x))
            .filter(|c| *c != id)
            .collect();
        if next.is_empty() {
            return Ok(s);
        }
        if next.len() > group.cap() {
            return Err(Error::cap("simple commutators", next.len(), group.cap()));
        }
        layer = next.into_iter().collect();
    }
    Err(Error::Hypothesis(format!(
        "no vanishing simple commutator weight up to {}",
        max_step + 1
    )))
}

/// Quotient `G/N` with canonical-minimal coset representatives.
#[derive(Clone)]
pub struct QuotientCtx {
    parent: Subgroup,
    normal: Subgroup,
    rep: Arc<HashMap<Element, Element>>,
    reps: Arc<Vec<Element>>,
}

impl fmt::Debug for QuotientCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "QuotientCtx({}/{})",
            self.parent.len(),
            self.normal.len()
        )
    }
}

/// The quotient context together with its projection homomorphism.
pub fn quotient(g: &Subgroup, n: &Subgroup) -> Result<(Arc<QuotientCtx>, Homomorphism)> {
    if !is_normal(n, g)? {
        return Err(Error::Hypothesis("subgroup is not normal".into()));
    }
    let q = Arc::new(QuotientCtx::new_unchecked(g, n));
    let hom = Homomorphism {
        source: g.group.clone(),
        target: q.clone(),
        rule: HomRule::Quotient(q.clone()),
        label: format!("quotient by subgroup of order {}", n.len()),
    };
    Ok((q, hom))
}

impl QuotientCtx {
    pub(crate) fn new_unchecked(g: &Subgroup, n: &Subgroup) -> Self {
        let grp = &g.group;
        let mut rep = HashMap::with_capacity(g.len());
        let mut reps = Vec::with_capacity(g.len() / n.len());
        for x in g.iter() {
            if rep.contains_key(x) {
                continue;
            }
            // ascending iteration: the first unseen element is its coset's minimum
            for y in n.iter() {
                rep.insert(grp.mul(x, y), x.clone());
            }
            reps.push(x.clone());
        }
        QuotientCtx {
            parent: g.clone(),
            normal: n.clone(),
            rep: Arc::new(rep),
            reps: Arc::new(reps),
        }
    }

    /// Checked constructor returning a shareable group handle.
    pub fn new(g: &Subgroup, n: &Subgroup) -> Result<Arc<Self>> {
        Ok(quotient(g, n)?.0)
    }

    pub fn parent(&self) -> &Subgroup {
        &self.parent
    }
    pub fn normal(&self) -> &Subgroup {
        &self.normal
    }
    pub fn reps(&self) -> &[Element] {
        &self.reps
    }
    pub fn len(&self) -> usize {
        self.reps.len()
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Canonical representative of the coset `aN`.
    pub fn project(&self, a: &Element) -> Element {
        match self.rep.get(a) {
            Some(r) => r.clone(),
            None => {
                let g = &self.parent.group;
                self.normal
                    .iter()
                    .map(|y| g.mul(a, y))
                    .min()
                    .expect("normal subgroup nonempty")
            }
        }
    }

    /// The full preimage of a subgroup of the quotient.
    pub fn preimage(&self, s: &Subgroup) -> Result<Subgroup> {
        let set: ElemSet = self
            .parent
            .iter()
            .filter(|x| s.contains(&self.rep[*x]))
            .cloned()
            .collect();
        let mut gens = s.gens.clone();
        gens.extend(self.normal.gens.iter().cloned());
        let h = closure(&self.parent.group, &gens)?;
        if h.elems.as_ref() != &set {
            return Err(Error::Bug(
                "preimage is not the closure of lifted generators".into(),
            ));
        }
        Ok(h)
    }

    /// Image `HN/N` of a subgroup of the parent.
    pub fn image(self: &Arc<Self>, h: &Subgroup) -> Result<Subgroup> {
        let me: GroupRef = self.clone();
        let gens: Vec<Element> = h.gens.iter().map(|x| self.project(x)).collect();
        closure(&me, &gens)
    }

    pub fn as_group(self: &Arc<Self>) -> GroupRef {
        self.clone()
    }
}

impl Group for QuotientCtx {
    fn describe(&self) -> String {
        format!(
            "quotient of order {} of {}",
            self.reps.len(),
            self.parent.group.describe()
        )
    }
    fn identity(&self) -> Element {
        self.project(&self.parent.group.identity())
    }
    fn mul(&self, a: &Element, b: &Element) -> Element {
        self.project(&self.parent.group.mul(a, b))
    }
    fn inv(&self, a: &Element) -> Element {
        self.project(&self.parent.group.inv(a))
    }
    fn contains(&self, a: &Element) -> bool {
        self.rep.get(a) == Some(a)
    }
    fn cap(&self) -> usize {
        self.parent.group.cap()
    }
    fn order(&self) -> Option<BigUint> {
        Some(BigUint::from(self.reps.len()))
    }
    fn generators(&self) -> Vec<Element> {
        let id = self.identity();
        let mut out: Vec<Element> = Vec::new();
        for g in self.parent.gens.iter().map(|x| self.project(x)) {
            if g != id && !out.contains(&g) {
                out.push(g);
            }
        }
        out
    }
    fn known_abelian(&self) -> bool {
        self.parent.group.known_abelian()
    }
}
