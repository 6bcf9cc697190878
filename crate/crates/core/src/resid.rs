//! Reduction of an approximate group in a residually nilpotent group to a
//! finite nilpotent quotient that is faithful on a bounded power, and the
//! transport of subgroups and structure back to the source.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::group::{
    element_from_json, element_to_json, make_context, simple_commutator_length, Element, Group, GroupCtx,
    GroupRef, GroupSpec, Homomorphism, Kind,
};
use crate::setcalc::{certify_approx, ClaimCheck, ElemSet, Powers, SymSet};
use crate::structure::{nilpotent_structure, torsion_structure, StructureResult, TorsionResult};
use crate::subgrp::{closure, Subgroup};

/// Tuples examined by the sampled simple-commutator check.
pub const SAMPLE_CAP: usize = 10_000;

/// Candidate homomorphisms from a fixed source into finite nilpotent groups.
#[derive(Clone, Debug)]
pub enum FamilyMembers {
    /// Reductions modulo `lo, lo+1, …, hi`.
    ModRange { lo: u64, hi: u64 },
    /// Free-group source: target group and images of the generators.
    GeneratorImages(Vec<(GroupSpec, Vec<Value>)>),
    /// The identity of a finite source.
    Identity,
}

#[derive(Clone, Debug)]
pub struct QuotientFamily {
    pub source: GroupCtx,
    pub members: FamilyMembers,
}

impl QuotientFamily {
    pub fn mod_range(source: &GroupCtx, lo: u64, hi: u64) -> Self {
        QuotientFamily { source: source.clone(), members: FamilyMembers::ModRange { lo: lo.max(2), hi } }
    }

    pub fn identity(source: &GroupCtx) -> Self {
        QuotientFamily { source: source.clone(), members: FamilyMembers::Identity }
    }

    /// Free group of rank `r` onto unitriangular `(s+1)×(s+1)` matrices modulo
    /// each listed modulus, sending generators to elementary matrices cyclically.
    pub fn free_unitriangular(source: &GroupCtx, step: usize, moduli: &[u64]) -> Result<Self> {
        let rank = match source.kind() {
            Kind::Free { rank } => *rank,
            _ => return Err(Error::Unsupported("generator images need a free source".into())),
        };
        let n = step + 1;
        let members = moduli
            .iter()
            .map(|&m| {
                let spec = GroupSpec::ut_mod(n, m).with_cap(source.cap());
                let ctx = make_context(&spec)?;
                let images = (0..rank)
                    .map(|i| {
                        let p = i % (n - 1);
                        let mut e = vec![(p, p + 1, 1)];
                        if i >= n - 1 && n > 2 {
                            e.push((0, n - 1, (i / (n - 1)) as i64));
                        }
                        ctx.unitriangular(&e).map(|x| element_to_json(&x))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((spec, images))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(QuotientFamily { source: source.clone(), members: FamilyMembers::GeneratorImages(members) })
    }

    /// Reads `{"mod_range": [lo, hi]}`, `{"generator_images": [{"target": spec, "images": [...]}]}`
    /// or `"identity"`.
    pub fn from_json(source: &GroupCtx, v: &Value) -> Result<Self> {
        let bad = || Error::Malformed(format!("unrecognised family {v}"));
        if v.as_str() == Some("identity") {
            return Ok(Self::identity(source));
        }
        if let Some(r) = v.get("mod_range") {
            let r = r.as_array().filter(|r| r.len() == 2).ok_or_else(bad)?;
            let lo = r[0].as_u64().ok_or_else(bad)?;
            let hi = r[1].as_u64().ok_or_else(bad)?;
            return Ok(Self::mod_range(source, lo, hi));
        }
        if let Some(list) = v.get("generator_images").and_then(Value::as_array) {
            let members = list
                .iter()
                .map(|m| {
                    let spec = match m.get("target").ok_or_else(bad)? {
                        Value::String(s) => GroupSpec::parse_compact(s)?,
                        other => serde_json::from_value(other.clone()).map_err(|e| Error::Malformed(e.to_string()))?,
                    };
                    let images = m.get("images").and_then(Value::as_array).ok_or_else(bad)?.clone();
                    Ok((spec, images))
                })
                .collect::<Result<Vec<_>>>()?;
            return Ok(QuotientFamily { source: source.clone(), members: FamilyMembers::GeneratorImages(members) });
        }
        Err(bad())
    }

    /// Default family for the source kind.
    pub fn default_for(source: &GroupCtx) -> Result<Self> {
        match source.kind() {
            Kind::UnitriangularInt { .. } | Kind::Abelian { .. } if source.order().is_none() => {
                Ok(Self::mod_range(source, 2, 4096))
            }
            Kind::Free { .. } => Self::free_unitriangular(source, 2, &[2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13]),
            _ if source.order().is_some() => Ok(Self::identity(source)),
            _ => Err(Error::Unsupported(format!("no quotient family for {}", source.describe()))),
        }
    }

    pub fn len(&self) -> usize {
        match &self.members {
            FamilyMembers::ModRange { lo, hi } => (hi + 1).saturating_sub(*lo) as usize,
            FamilyMembers::GeneratorImages(v) => v.len(),
            FamilyMembers::Identity => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn member(&self, i: usize) -> Result<Homomorphism> {
        match &self.members {
            FamilyMembers::ModRange { lo, .. } => Homomorphism::mod_reduction(&self.source, lo + i as u64),
            FamilyMembers::GeneratorImages(v) => {
                let (spec, imgs) = &v[i];
                let ctx = make_context(spec)?;
                let images = imgs.iter().map(|x| element_from_json(&ctx, x)).collect::<Result<Vec<_>>>()?;
                let target: GroupRef = std::sync::Arc::new(ctx);
                Homomorphism::generator_images(&self.source, target, images)
            }
            FamilyMembers::Identity => {
                if self.source.order().is_none() {
                    return Err(Error::Unsupported("identity member needs a finite source".into()));
                }
                Ok(Homomorphism::identity(std::sync::Arc::new(self.source.clone())))
            }
        }
    }

    fn check_source(&self, a: &SymSet) -> Result<()> {
        if a.group().describe() != self.source.describe() {
            return Err(Error::CrossContext(format!(
                "set lives in {}, family source is {}",
                a.group().describe(),
                self.source.describe()
            )));
        }
        Ok(())
    }

    /// Modulus of member `i` when this is a reduction family.
    fn modulus(&self, i: usize) -> Option<u64> {
        match &self.members {
            FamilyMembers::ModRange { lo, .. } => Some(lo + i as u64),
            _ => None,
        }
    }
}

/// Bound on the absolute value of every coordinate of a product of `n`
/// elements whose coordinates are bounded by `b`, for integer unitriangular
/// matrices and free abelian groups.
pub fn power_entry_bound(source: &GroupCtx, b: &BigInt, n: &BigUint) -> Option<BigInt> {
    match source.kind() {
        Kind::Abelian { moduli } if moduli.iter().all(|&q| q == 0) => Some(b * BigInt::from(n.clone())),
        Kind::UnitriangularInt { n: d } => {
            // entrywise |product| ≤ (I + bN)^n with N the strictly upper all-ones matrix
            let d = *d;
            let mut base = vec![vec![BigInt::zero(); d]; d];
            for (i, row) in base.iter_mut().enumerate() {
                row[i] = BigInt::one();
                for x in row.iter_mut().skip(i + 1) {
                    *x = b.clone();
                }
            }
            let mul = |x: &Vec<Vec<BigInt>>, y: &Vec<Vec<BigInt>>| {
                let mut z = vec![vec![BigInt::zero(); d]; d];
                for i in 0..d {
                    for k in i..d {
                        if x[i][k].is_zero() {
                            continue;
                        }
                        for j in k..d {
                            z[i][j] += &x[i][k] * &y[k][j];
                        }
                    }
                }
                z
            };
            let mut acc = vec![vec![BigInt::zero(); d]; d];
            for (i, row) in acc.iter_mut().enumerate() {
                row[i] = BigInt::one();
            }
            let mut e = n.clone();
            let mut p = base;
            while !e.is_zero() {
                if e.bit(0) {
                    acc = mul(&acc, &p);
                }
                p = mul(&p, &p);
                e >>= 1;
            }
            (0..d).flat_map(|i| (i + 1..d).map(move |j| (i, j))).map(|(i, j)| acc[i][j].clone()).max().or(Some(BigInt::zero()))
        }
        _ => None,
    }
}

/// Decides `A^n ∩ ker π = {1}` for family members, by the coordinate bound
/// when it is conclusive and by evaluating `π` on `A^n` otherwise.
struct KernelScan {
    pw: Powers,
    entry: BigInt,
}

impl KernelScan {
    fn new(a: &SymSet) -> Self {
        let entry = a.iter().map(GroupCtx::max_entry).max().unwrap_or_default();
        KernelScan { pw: Powers::new(a), entry }
    }

    fn clear(&mut self, fam: &QuotientFamily, i: usize, pi: &Homomorphism, power: usize) -> Result<bool> {
        if let Some(m) = fam.modulus(i) {
            if let Some(bd) = power_entry_bound(&fam.source, &self.entry, &BigUint::from(power)) {
                if BigInt::from(m) > bd {
                    return Ok(true);
                }
            }
        }
        Ok(kernel_witness(pi, self.pw.get(power)?)?.is_none())
    }
}

/// First member `π` (by index) with `A^{power} ∩ ker π = {1}`.
fn kernel_clear_at(a: &SymSet, power: usize, fam: &QuotientFamily) -> Result<(usize, Homomorphism)> {
    fam.check_source(a)?;
    let mut scan = KernelScan::new(a);
    for i in 0..fam.len() {
        let pi = fam.member(i)?;
        if scan.clear(fam, i, &pi, power)? {
            return Ok((i, pi));
        }
    }
    Err(Error::FamilyExhausted(format!("no member is injective enough on A^{power}")))
}

/// First member in index order that is kernel-clear on `A^{factor·2}`, whose
/// quotient-side computation succeeds, and that is kernel-clear on
/// `A^{factor·M}` for the exponent `M` that computation asks for.
fn select_member<T>(
    a: &SymSet,
    fam: &QuotientFamily,
    factor: usize,
    mut run: impl FnMut(&Homomorphism) -> Result<(T, usize)>,
) -> Result<(Homomorphism, T, usize, usize)> {
    fam.check_source(a)?;
    let mut scan = KernelScan::new(a);
    let mut tried = 0;
    for i in 0..fam.len() {
        let pi = fam.member(i)?;
        if !scan.clear(fam, i, &pi, factor * 2)? {
            continue;
        }
        tried += 1;
        let (t, need) = run(&pi)?;
        let need = need.max(2);
        if scan.clear(fam, i, &pi, factor * need)? {
            return Ok((pi, t, need, tried));
        }
    }
    Err(Error::FamilyExhausted(format!(
        "no member is injective on the power its quotient structure needs ({tried} tried)"
    )))
}

/// First member `π` of the family with `A^{4M} ∩ ker π = {1}`.
pub fn kernel_clear_hom(a: &SymSet, m: usize, fam: &QuotientFamily) -> Result<Homomorphism> {
    Ok(kernel_clear_at(a, 4 * m, fam)?.1)
}

/// Nontrivial element of `S ∩ ker π`, if any.
fn kernel_witness(pi: &Homomorphism, s: &ElemSet) -> Result<Option<Element>> {
    let id = pi.source.identity();
    let tid = pi.target.identity();
    for x in s {
        if *x != id && pi.apply(x)? == tid {
            return Ok(Some(x.clone()));
        }
    }
    Ok(None)
}

/// `{a ∈ A : π(a) ∈ H}` for `H ⊆ π(A)` when `A³ ∩ ker π = {1}`: a subgroup
/// mapped isomorphically onto `H`. When also `A⁴ ∩ ker π = {1}` and
/// `H ⊴ ⟨π(A)⟩`, the lift is checked to be normal in `⟨A⟩`.
pub fn lift_subgroup(pi: &Homomorphism, a: &SymSet, h: &Subgroup) -> Result<Subgroup> {
    let g = a.group().clone();
    let mut pw = Powers::new(a);
    if let Some(w) = kernel_witness(pi, pw.get(3)?)? {
        return Err(Error::Hypothesis(format!("A³ meets the kernel in {w}")));
    }
    let mut phi: std::collections::BTreeMap<Element, Element> = Default::default();
    for x in a.iter() {
        let y = pi.apply(x)?;
        if h.contains(&y)
            && phi.insert(y, x.clone()).is_some() {
                return Err(Error::Bug("two lifts of one element although A² meets the kernel trivially".into()));
            }
    }
    if let Some(y) = h.iter().find(|y| !phi.contains_key(y)) {
        return Err(Error::Hypothesis(format!("{y} ∈ H is not in π(A)")));
    }
    let tg = &pi.target;
    for (y1, x1) in &phi {
        for (y2, x2) in &phi {
            if phi[&tg.mul(y1, y2)] != g.mul(x1, x2) {
                return Err(Error::Bug("lift does not transport products".into()));
            }
        }
    }
    let set: ElemSet = phi.values().cloned().collect();
    let lifted = Subgroup::from_set(&g, &set)?.ok_or_else(|| Error::Bug("lift is not a subgroup".into()))?;
    if kernel_witness(pi, pw.get(4)?)?.is_none() {
        let imgs: Vec<Element> = a.iter().map(|x| pi.apply(x)).collect::<Result<_>>()?;
        if imgs.iter().all(|z| h.iter().all(|y| h.contains(&tg.conjugate(y, z)))) {
            let conj_ok = a.iter().all(|x| lifted.iter().all(|y| lifted.contains(&g.conjugate(y, x))));
            if !conj_ok {
                return Err(Error::Bug("lift of a normal subgroup is not normal".into()));
            }
        }
    }
    Ok(lifted)
}

/// Outcome of checking that simple commutators of a given weight land in `H′`.
#[derive(Clone, Debug, serde::Serialize)]
pub struct StepCheck {
    pub weight: u64,
    /// Exhaustive over all tuples (through distinct partial values), or sampled.
    pub exhaustive: bool,
    /// Distinct partial commutators or sampled tuples examined.
    pub examined: usize,
    pub holds: bool,
}

/// Whether every `[[x_1, x_2], …, x_w]` with `x_i ∈ gens` lies in `h`, where
/// `h` is normal in `⟨gens⟩` and given by a membership test. Partial values
/// are deduplicated level by level and dropped once inside `h`; when a level
/// grows past [`SAMPLE_CAP`] the check falls back to that many seeded random tuples.
pub fn simple_commutator_check(
    g: &GroupRef,
    gens: &[Element],
    weight: u64,
    in_h: impl Fn(&Element) -> bool,
) -> StepCheck {
    let mut level: ElemSet = gens.iter().filter(|x| !in_h(x)).cloned().collect();
    let mut examined = level.len();
    let mut w = 1u64;
    while w < weight && !level.is_empty() {
        let mut next = ElemSet::new();
        for c in &level {
            for x in gens {
                let y = g.commutator(c, x);
                if !in_h(&y) {
                    next.insert(y);
                }
            }
            if next.len() > SAMPLE_CAP {
                break;
            }
        }
        if next.len() > SAMPLE_CAP {
            return sampled_check(g, gens, weight, in_h);
        }
        examined += next.len();
        level = next;
        w += 1;
    }
    StepCheck { weight, exhaustive: true, examined, holds: level.is_empty() || weight == 0 }
}

fn sampled_check(g: &GroupRef, gens: &[Element], weight: u64, in_h: impl Fn(&Element) -> bool) -> StepCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut holds = true;
    for _ in 0..SAMPLE_CAP {
        let mut c = gens[rng.gen_range(0..gens.len())].clone();
        let mut w = 1;
        while w < weight && !in_h(&c) {
            c = g.commutator(&c, &gens[rng.gen_range(0..gens.len())]);
            w += 1;
        }
        if !in_h(&c) {
            holds = false;
            break;
        }
    }
    StepCheck { weight, exhaustive: false, examined: SAMPLE_CAP, holds }
}

/// Structure of `A` transported from a finite nilpotent quotient.
#[derive(Clone, Debug)]
pub struct LiftedStructure {
    pub pi: Homomorphism,
    pub k_approx: usize,
    /// `A^{4M} ∩ ker π = {1}`.
    pub m_big: usize,
    /// `C′ = ⟨A^m ∩ π⁻¹(C)⟩`.
    pub m: usize,
    /// Word length of a simple commutator of weight `K⁶ + 1`.
    pub ell: BigUint,
    pub quotient: StructureResult,
    pub c_gens: Vec<Element>,
    pub h: Subgroup,
    pub step_check: StepCheck,
    /// `|A² ∩ C′|`.
    pub a2_in_c: usize,
    pub cover: Vec<Element>,
    /// Family members whose quotient structure was computed.
    pub passes: usize,
    pub properties: Vec<ClaimCheck>,
}

impl LiftedStructure {
    pub fn all_verified(&self) -> bool {
        self.properties.iter().all(|p| p.holds)
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "pi": self.pi.label,
            "target": self.pi.target.describe(),
            "K": self.k_approx,
            "M": self.m_big,
            "m": self.m,
            "ell": self.ell.to_string(),
            "quotient": self.quotient.to_json(),
            "C_gens": self.c_gens.iter().map(element_to_json).collect::<Vec<_>>(),
            "H": self.h.to_json(),
            "step_check": self.step_check,
            "A2_in_C": self.a2_in_c,
            "cover": self.cover.iter().map(element_to_json).collect::<Vec<_>>(),
            "passes": self.passes,
            "properties": self.properties,
        })
    }
}

fn image_set(pi: &Homomorphism, s: &ElemSet, label: &str) -> Result<SymSet> {
    let img: ElemSet = s.iter().map(|x| pi.apply(x)).collect::<Result<_>>()?;
    SymSet::from_set(pi.target.clone(), img, label)
}

/// One representative in `A` per left coset of a subgroup, where `same(x, y)`
/// decides whether `x⁻¹y` lies in it.
fn coset_cover(a: &SymSet, same: impl Fn(&Element, &Element) -> Result<bool>) -> Result<Vec<Element>> {
    let mut reps: Vec<Element> = Vec::new();
    for x in a.iter() {
        let mut found = false;
        for r in &reps {
            if same(r, x)? {
                found = true;
                break;
            }
        }
        if !found {
            reps.push(x.clone());
        }
    }
    Ok(reps)
}

/// Picks `π` faithful on `A^{4M}`, runs the nilpotent structure theorem on
/// `π(A)`, and transports `C` and `H` back to `C′ = ⟨A^m ∩ π⁻¹(C)⟩ ⊵ H′`.
/// Members are tried in index order; the first one faithful on `A^{4M}` for
/// the exponent `M` its own quotient structure needs is kept.
pub fn residual_structure(a: &SymSet, fam: &QuotientFamily) -> Result<LiftedStructure> {
    fam.check_source(a)?;
    let g = a.group().clone();
    let k_approx = certify_approx(a)?.k;
    let weight = (k_approx as u64).checked_pow(6).and_then(|w| w.checked_add(1))
        .ok_or_else(|| Error::Unsupported("K⁶ + 1 does not fit in 64 bits".into()))?;
    let ell = simple_commutator_length(weight);
    let mut pw = Powers::new(a);
    let (pi, quotient, big_m, passes) = select_member(a, fam, 4, |pi| {
        let pa = image_set(pi, a.elements(), "π(A)")?;
        let s = nilpotent_structure(&pa)?;
        let mut need = s.h_exponent.max(2);
        let mut qpw = Powers::new(&pa);
        loop {
            let gens: Vec<Element> = qpw.get(need)?.iter().filter(|x| s.c.contains(x)).cloned().collect();
            if closure(&pi.target, &gens)? == s.c {
                break;
            }
            need += 1;
        }
        Ok((s, need))
    })?;
    let m = big_m;
    let am = pw.get(m)?.clone();
    let mut c_gens = Vec::new();
    for x in &am {
        if quotient.c.contains(&pi.apply(x)?) {
            c_gens.push(x.clone());
        }
    }
    let am_sym = SymSet::from_set(g.clone(), am.clone(), "A^m")?;
    let h = lift_subgroup(&pi, &am_sym, &quotient.h)?;
    let normal = c_gens.iter().all(|c| h.iter().all(|y| h.contains(&g.conjugate(y, c)) && h.contains(&g.conjugate(y, &g.inv(c)))));
    let step_check = simple_commutator_check(&g, &c_gens, weight, |x| h.contains(x));

    // for x ∈ A², x ∈ C′ iff π(x) ∈ C because A² ⊆ A^m
    let a2 = pw.get(2)?.clone();
    let mut a2_in_c = 0;
    let mut image_in_c = ElemSet::new();
    for x in &a2 {
        let y = pi.apply(x)?;
        if quotient.c.contains(&y) {
            a2_in_c += 1;
            image_in_c.insert(y);
        }
    }
    let tg = pi.target.clone();
    let cover = coset_cover(a, |r, x| Ok(quotient.c.contains(&tg.mul(&tg.inv(&pi.apply(r)?), &pi.apply(x)?))))?;
    let covered = a.iter().all(|x| {
        cover.iter().any(|r| {
            let z = g.mul(&g.inv(r), x);
            pi.apply(&z).map(|y| quotient.c.contains(&y)).unwrap_or(false)
        })
    });
    let quotient_cosets = quotient.cover.len();

    let properties = vec![
        ClaimCheck::new("kernel_clear", true, format!("A^{} ∩ ker π = {{1}} via {}", 4 * big_m, pi.label)),
        ClaimCheck::new("h_normal", normal, "H′ ⊴ C′".into()),
        ClaimCheck::new("h_isomorphic", h.len() == quotient.h.len(), "π: H′ → H is a bijection".into()),
        ClaimCheck::new(
            "step_bound",
            step_check.holds,
            format!("simple commutators of weight {weight} in A^{m} ∩ C′ lie in H′"),
        ),
        ClaimCheck::new(
            "a2_count",
            a2_in_c == image_in_c.len(),
            format!("|A² ∩ C′| = {a2_in_c}, |π(A²) ∩ C| = {}", image_in_c.len()),
        ),
        ClaimCheck::new(
            "cover",
            covered && cover.len() == quotient_cosets,
            format!("A ⊆ XC′ with |X| = {} (quotient side {quotient_cosets})", cover.len()),
        ),
    ];
    if let Some(p) = properties.iter().find(|p| !p.holds) {
        return Err(Error::Bug(format!("lifted property {} failed: {}", p.name, p.detail)));
    }
    Ok(LiftedStructure {
        pi,
        k_approx,
        m_big: big_m,
        m,
        ell,
        quotient,
        c_gens,
        h,
        step_check,
        a2_in_c,
        cover,
        passes,
        properties,
    })
}

/// Torsion-case cover transported from a finite quotient.
#[derive(Clone, Debug)]
pub struct LiftedTorsion {
    pub pi: Homomorphism,
    pub m_big: usize,
    pub quotient: TorsionResult,
    /// `C′ ⊆ A^{M−1}`.
    pub c: Subgroup,
    pub cover: Vec<Element>,
    pub properties: Vec<ClaimCheck>,
}

impl LiftedTorsion {
    pub fn all_verified(&self) -> bool {
        self.properties.iter().all(|p| p.holds)
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "pi": self.pi.label,
            "target": self.pi.target.describe(),
            "M": self.m_big,
            "quotient": self.quotient.to_json(),
            "C": self.c.to_json(),
            "cover": self.cover.iter().map(element_to_json).collect::<Vec<_>>(),
            "properties": self.properties,
        })
    }
}

/// Picks `π` with `A^{3M} ∩ ker π = {1}` where `M − 1` is the exponent of the
/// quotient-side subgroup, then lifts it to `C′ ⊆ A^{M−1}` and covers `A` by
/// left cosets of `C′`.
pub fn residual_torsion_structure(a: &SymSet, r: u64, fam: &QuotientFamily) -> Result<LiftedTorsion> {
    fam.check_source(a)?;
    let g = a.group().clone();
    let (pi, t, big_m, _) = select_member(a, fam, 3, |pi| {
        let pa = image_set(pi, a.elements(), "π(A)")?;
        let t = torsion_structure(&pa, r)?;
        let need = t.c_exponent + 1;
        Ok((t, need))
    })?;
    let base = Powers::new(a).sym((big_m - 1).max(1))?;
    let c = lift_subgroup(&pi, &base, &t.c)?;
    let cover = coset_cover(a, |x, y| Ok(c.contains(&g.mul(&g.inv(x), y))))?;
    let covered = a.iter().all(|x| cover.iter().any(|y| c.contains(&g.mul(&g.inv(y), x))));
    let tg = pi.target.clone();
    let images: Vec<Element> = a.iter().map(|x| pi.apply(x)).collect::<Result<_>>()?;
    let mut quotient_cosets: Vec<Element> = Vec::new();
    for y in &images {
        if !quotient_cosets.iter().any(|z| t.c.contains(&tg.mul(&tg.inv(z), y))) {
            quotient_cosets.push(y.clone());
        }
    }
    let properties = vec![
        ClaimCheck::new("kernel_clear", true, format!("A^{} ∩ ker π = {{1}} via {}", 3 * big_m, pi.label)),
        ClaimCheck::new("c_isomorphic", c.len() == t.c.len(), "π: C′ → C is a bijection".into()),
        ClaimCheck::new(
            "cover",
            covered && cover.len() <= quotient_cosets.len(),
            format!("A ⊆ XC′ with |X| = {} (quotient side {})", cover.len(), quotient_cosets.len()),
        ),
    ];
    if let Some(p) = properties.iter().find(|p| !p.holds) {
        return Err(Error::Bug(format!("lifted property {} failed: {}", p.name, p.detail)));
    }
    Ok(LiftedTorsion { pi, m_big: big_m, quotient: t, c, cover, properties })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setcalc::{product_set, symmetrize};
    use std::sync::Arc;

    fn ctx(spec: GroupSpec) -> (GroupCtx, GroupRef) {
        let c = make_context(&spec).unwrap();
        let g: GroupRef = Arc::new(c.clone());
        (c, g)
    }

    #[test]
    fn trivial_set_takes_first_member() {
        let (c, g) = ctx(GroupSpec::ut_int(3));
        let a = SymSet::from_set(g.clone(), [g.identity()].into_iter().collect(), "one").unwrap();
        let pi = kernel_clear_hom(&a, 3, &QuotientFamily::mod_range(&c, 5, 20)).unwrap();
        assert_eq!(pi.label, "mod 5");
    }

    #[test]
    fn entry_bound_matches_scan() {
        let (c, g) = ctx(GroupSpec::ut_int(3));
        let a = symmetrize(&g, &g.generators()).unwrap();
        let a4 = Powers::new(&a).get(4).unwrap().clone();
        let b = a4.iter().map(GroupCtx::max_entry).max().unwrap();
        let bound = power_entry_bound(&c, &BigInt::from(1), &BigUint::from(4u32)).unwrap();
        assert!(b <= bound);
        let pi = kernel_clear_hom(&a, 1, &QuotientFamily::mod_range(&c, 2, 100)).unwrap();
        let m: u64 = pi.label.trim_start_matches("mod ").parse().unwrap();
        let twice = (BigInt::from(2) * &b).to_string().parse::<u64>().unwrap();
        assert!(m <= twice + 1);
        assert!(kernel_witness(&pi, &a4).unwrap().is_none());
    }

    #[test]
    fn lift_cases() {
        let (c, g) = ctx(GroupSpec::ut_int(3));
        let a = symmetrize(&g, &g.generators()).unwrap();
        let pi = Homomorphism::mod_reduction(&c, 101).unwrap();
        let triv = lift_subgroup(&pi, &a, &Subgroup::trivial(&pi.target)).unwrap();
        assert!(triv.is_trivial());

        let (zc, zg) = ctx(GroupSpec::abelian(&[0]));
        let a = symmetrize(&zg, &[zg.pow(&zg.generators()[0], 2)]).unwrap();
        let pi = Homomorphism::mod_reduction(&zc, 4).unwrap();
        assert!(matches!(
            lift_subgroup(&pi, &a, &Subgroup::trivial(&pi.target)),
            Err(Error::Hypothesis(_))
        ));
    }

    #[test]
    fn residual_subgroup_identity_family() {
        let (c, g) = ctx(GroupSpec::ut_mod(3, 3));
        let w = Subgroup::whole(&g).unwrap();
        let a = SymSet::from_set(g.clone(), w.elements().clone(), "whole").unwrap();
        let s = residual_structure(&a, &QuotientFamily::identity(&c)).unwrap();
        assert_eq!(s.cover.len(), 1);
        assert!(s.h.len() <= w.len());
    }

    #[test]
    fn residual_interval() {
        let (c, g) = ctx(GroupSpec::abelian(&[0]));
        let x = g.generators()[0].clone();
        let a = symmetrize(&g, &(1..=3).map(|t| g.pow(&x, t)).collect::<Vec<_>>()).unwrap();
        let s = residual_structure(&a, &QuotientFamily::mod_range(&c, 2, 1000)).unwrap();
        assert!(s.all_verified());
        assert_eq!(s.quotient.step, 1);
    }

    #[test]
    fn residual_heisenberg_ball() {
        let (c, g) = ctx(GroupSpec::ut_int(3));
        let s1 = symmetrize(&g, &g.generators()).unwrap();
        let s = residual_structure(&s1, &QuotientFamily::mod_range(&c, 2, 200)).unwrap();
        assert!(s.all_verified());
        assert!(s.step_check.holds);
        let _ = product_set(&s1, 2).unwrap();
    }

    #[test]
    fn torsion_cases() {
        let (c, g) = ctx(GroupSpec::abelian(&[3, 3, 3]));
        let gens = g.generators();
        let a = symmetrize(&g, &gens).unwrap();
        let t = residual_torsion_structure(&a, 3, &QuotientFamily::identity(&c)).unwrap();
        assert!(a.iter().all(|x| t.cover.iter().any(|y| t.c.contains(&g.mul(&g.inv(y), x)))));

        let w = Subgroup::whole(&g).unwrap();
        let a = SymSet::from_set(g.clone(), w.elements().clone(), "whole").unwrap();
        let t = residual_torsion_structure(&a, 3, &QuotientFamily::identity(&c)).unwrap();
        assert_eq!((t.c.len(), t.cover.len()), (27, 1));

        assert!(matches!(
            residual_torsion_structure(&a, 2, &QuotientFamily::identity(&c)),
            Err(Error::Hypothesis(_))
        ));
    }
}
