//! Growth of Cayley balls, the one-scale gap test `|S^n| ≤ n^{c log log n}`,
//! selection of a scale with small doubling, and the certificate that a group
//! with such a gap contains a nilpotent subgroup of bounded index.

use std::collections::HashSet;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::group::{element_to_json, Element, GroupRef};
use crate::resid::{residual_structure, LiftedStructure, QuotientFamily};
use crate::setcalc::{certify_approx, ElemSet, Powers, SymSet};

/// Relative guard applied to real thresholds before rounding down.
pub const THRESHOLD_GUARD: f64 = 1e-9;

/// Default exponent multiplier in the scale test `(log n)^{αc}`.
pub const DEFAULT_ALPHA: f64 = 5.0;

/// Sizes of the balls `S^0, S^1, …` of a symmetric generating set containing the identity.
#[derive(Clone, Debug)]
pub struct GrowthReport {
    pub group: String,
    pub generators: Vec<Element>,
    /// `sizes[n] = |S^n|`.
    pub sizes: Vec<u64>,
    /// Set when a layer exceeded the cap and the sizes stop early.
    pub partial: bool,
}

impl GrowthReport {
    pub fn n_max(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn size(&self, n: usize) -> Option<u64> {
        self.sizes.get(n).copied()
    }

    /// `log|S^n| / log n`.
    pub fn exponent_estimate(&self, n: usize) -> Option<f64> {
        let s = self.size(n)?;
        (n >= 2).then(|| (s as f64).ln() / (n as f64).ln())
    }

    /// Rows `n, |S^n|, threshold, detected` for `n ≥ 3`.
    pub fn to_csv(&self, c: f64) -> String {
        let mut out = String::from("n,size,threshold,detected\n");
        for n in 3..self.sizes.len() {
            let t = gap_threshold(n, c);
            let flag = (self.sizes[n] as f64) <= t;
            out.push_str(&format!("{n},{},{},{flag}\n", self.sizes[n], fmt_threshold(t)));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "group": self.group,
            "generators": self.generators.iter().map(element_to_json).collect::<Vec<_>>(),
            "sizes": self.sizes,
            "partial": self.partial,
            "log": "natural",
        })
    }
}

fn fmt_threshold(t: f64) -> String {
    if t < 1e15 {
        format!("{t:.0}")
    } else {
        format!("{t:e}")
    }
}

/// Layered breadth-first search from the identity. Because `S` is symmetric,
/// layer `n+1` is found from layer `n` by removing layers `n` and `n−1`.
fn layers(s: &SymSet, n_max: usize, mut keep: Option<&mut ElemSet>) -> (Vec<u64>, bool) {
    let g = s.group();
    let gens: Vec<&Element> = s.iter().filter(|x| **x != g.identity()).collect();
    let mut prev: HashSet<Element> = HashSet::new();
    let mut cur: HashSet<Element> = [g.identity()].into_iter().collect();
    if let Some(k) = keep.as_deref_mut() {
        k.insert(g.identity());
    }
    let mut sizes = vec![1u64];
    let mut total = 1u64;
    for _ in 0..n_max {
        let mut next = HashSet::new();
        for x in &cur {
            for y in &gens {
                let z = g.mul(x, y);
                if !cur.contains(&z) && !prev.contains(&z) {
                    next.insert(z);
                }
            }
            if next.len() > g.cap() {
                return (sizes, true);
            }
        }
        total += next.len() as u64;
        sizes.push(total);
        if let Some(k) = keep.as_deref_mut() {
            k.extend(next.iter().cloned());
        }
        if next.is_empty() {
            let last = total;
            sizes.resize(n_max + 1, last);
            break;
        }
        prev = std::mem::replace(&mut cur, next);
    }
    (sizes, false)
}

pub fn ball_sizes(s: &SymSet, n_max: usize) -> GrowthReport {
    let (sizes, partial) = layers(s, n_max, None);
    GrowthReport {
        group: s.group().describe(),
        generators: s.iter().cloned().collect(),
        sizes,
        partial,
    }
}

/// The ball `S^n` itself.
pub fn ball(s: &SymSet, n: usize) -> Result<SymSet> {
    let mut set = ElemSet::new();
    let (sizes, partial) = layers(s, n, Some(&mut set));
    if partial {
        return Err(Error::cap("ball layer", sizes.len(), s.group().cap()));
    }
    SymSet::from_set(s.group().clone(), set, format!("S^{n}"))
}

/// `n^{c log log n}`, natural logarithms, lowered by the relative guard and rounded down.
pub fn gap_threshold(n: usize, c: f64) -> f64 {
    let ln = (n as f64).ln();
    (c * ln.ln() * ln).exp() * (1.0 - THRESHOLD_GUARD)
}

/// All `n ≥ 3` in the report with `|S^n| ≤ n^{c log log n}`.
pub fn gap_detect(report: &GrowthReport, c: f64) -> Vec<usize> {
    (3..report.sizes.len())
        .filter(|&n| (report.sizes[n] as f64) <= gap_threshold(n, c).floor())
        .collect()
}

fn ceil_sqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r < n {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r
}

/// Largest `r` with `5^r ≤ √n`.
fn max_scale(n: usize) -> usize {
    let mut r = 0;
    while 25usize.pow(r as u32 + 1) <= n {
        r += 1;
    }
    r
}

/// Radius the report must reach for [`dyadic_scale`] at `n`.
pub fn scale_radius(n: usize) -> usize {
    5usize.pow(max_scale(n) as u32 + 1) * ceil_sqrt(n)
}

/// A scale `r` with small growth between radii `5^r⌈√n⌉` and `5^{r+1}⌈√n⌉`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Scale {
    pub r: usize,
    pub inner: usize,
    pub outer: usize,
    pub ratio: f64,
    pub threshold: f64,
}

/// Smallest `r ≤ log₅ √n` with `|S^{5^{r+1}⌈√n⌉}| ≤ (log n)^{αc}·|S^{5^r⌈√n⌉}|`.
pub fn dyadic_scale(report: &GrowthReport, n: usize, c: f64, alpha: f64) -> Result<Scale> {
    if n < 3 {
        return Err(Error::Malformed("scale selection needs n ≥ 3".into()));
    }
    let base = ceil_sqrt(n);
    let threshold = (n as f64).ln().powf(alpha * c);
    for r in 0..=max_scale(n) {
        let inner = 5usize.pow(r as u32) * base;
        let outer = 5 * inner;
        let (a, b) = match (report.size(inner), report.size(outer)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Malformed(format!("report stops before radius {outer}"))),
        };
        let ratio = b as f64 / a as f64;
        if ratio <= threshold {
            return Ok(Scale { r, inner, outer, ratio, threshold });
        }
    }
    Err(Error::Hypothesis(format!("no scale found for n = {n}, c = {c}, α = {alpha}")))
}

/// Outcome of the growth pipeline.
#[derive(Clone, Debug)]
pub struct GrowthCertificate {
    pub n: usize,
    pub c: f64,
    pub alpha: f64,
    pub size_n: u64,
    /// `None` for the trivial group.
    pub scale: Option<Scale>,
    /// Radius of `A = S^{2·5^r⌈√n⌉}`.
    pub radius: usize,
    pub k_approx: usize,
    pub tripling: f64,
    pub structure: Option<LiftedStructure>,
    /// Step of `C′/H′`, plus one when `H′` is nontrivial.
    pub step: usize,
    pub step_target: usize,
    pub h_order: usize,
    /// Cosets of `C′` needed to cover `A`.
    pub cover_count: usize,
    /// Size of the permutation group `C′` induces on `H′` by conjugation,
    /// which is the index of the centraliser of `H′` in `C′`.
    pub action_index: usize,
}

impl GrowthCertificate {
    pub fn step_within_target(&self) -> bool {
        self.step <= self.step_target
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "n": self.n,
            "c": self.c,
            "alpha": self.alpha,
            "log": "natural",
            "size_n": self.size_n,
            "scale": self.scale,
            "radius": self.radius,
            "K": self.k_approx,
            "tripling": self.tripling,
            "structure": self.structure.as_ref().map(LiftedStructure::to_json),
            "step": self.step,
            "step_target": self.step_target,
            "step_within_target": self.step_within_target(),
            "H_order": self.h_order,
            "cover_count": self.cover_count,
            "action_index": self.action_index,
        })
    }
}

/// Order of the permutation group generated by conjugation of `h` by `gens`.
fn conjugation_image(g: &GroupRef, h: &[Element], gens: &[Element], cap: usize) -> Result<usize> {
    let index: std::collections::HashMap<&Element, usize> = h.iter().enumerate().map(|(i, x)| (x, i)).collect();
    let mut perms: Vec<Vec<usize>> = Vec::new();
    for c in gens {
        let p: Option<Vec<usize>> = h.iter().map(|y| index.get(&g.conjugate(y, c)).copied()).collect();
        perms.push(p.ok_or_else(|| Error::Bug("H′ is not normalised by C′".into()))?);
    }
    let id: Vec<usize> = (0..h.len()).collect();
    let mut seen: HashSet<Vec<usize>> = [id.clone()].into_iter().collect();
    let mut queue = vec![id];
    while let Some(p) = queue.pop() {
        for q in &perms {
            let r: Vec<usize> = p.iter().map(|&i| q[i]).collect();
            if seen.insert(r.clone()) {
                if seen.len() > cap {
                    return Err(Error::cap("conjugation action", seen.len(), cap));
                }
                queue.push(r);
            }
        }
    }
    Ok(seen.len())
}

/// Runs the gap test at `n`, selects a scale, builds `A = S^{2·5^r⌈√n⌉}`,
/// certifies it, and transports the nilpotent structure of `A` from a
/// quotient in `fam`. Stage failures are reported with the stage name.
pub fn growth_certificate(s: &SymSet, n: usize, c: f64, alpha: f64, fam: &QuotientFamily) -> Result<GrowthCertificate> {
    let tag = |stage: &'static str| move |e: Error| e.in_stage(stage);
    let radius_needed = scale_radius(n).max(n);
    let report = ball_sizes(s, radius_needed);
    if report.partial {
        return Err(Error::cap("growth report", report.n_max(), s.group().cap()).in_stage("ball sizes"));
    }
    let size_n = report.sizes[n];
    let step_target = (n as f64).ln().floor() as usize;
    if size_n == 1 {
        return Ok(GrowthCertificate {
            n,
            c,
            alpha,
            size_n,
            scale: None,
            radius: 0,
            k_approx: 1,
            tripling: 1.0,
            structure: None,
            step: 0,
            step_target,
            h_order: 1,
            cover_count: 1,
            action_index: 1,
        });
    }
    if !gap_detect(&report, c).contains(&n) {
        return Err(Error::Hypothesis(format!("gap not detected at n = {n}")).in_stage("gap test"));
    }
    let scale = dyadic_scale(&report, n, c, alpha).map_err(tag("scale"))?;
    let radius = 2 * scale.inner;
    let a = ball(s, radius).map_err(tag("ball"))?;
    let cert = certify_approx(&a).map_err(tag("certify"))?;
    let mut pw = Powers::new(&a);
    let tripling = pw.get(3).map_err(tag("certify"))?.len() as f64 / a.len() as f64;
    if cert.k as f64 > tripling + THRESHOLD_GUARD {
        return Err(Error::Bug(format!("certified K = {} exceeds |A³|/|A|", cert.k)));
    }
    let lifted = residual_structure(&a, fam).map_err(tag("structure"))?;
    let g = a.group().clone();
    let h: Vec<Element> = lifted.h.iter().cloned().collect();
    let action_index = conjugation_image(&g, &h, &lifted.c_gens, g.cap()).map_err(tag("index"))?;
    let step = lifted.quotient.step + usize::from(!lifted.h.is_trivial());
    Ok(GrowthCertificate {
        n,
        c,
        alpha,
        size_n,
        scale: Some(scale),
        radius,
        k_approx: cert.k,
        tripling,
        h_order: h.len(),
        cover_count: lifted.cover.len(),
        action_index,
        step,
        step_target,
        structure: Some(lifted),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{make_context, GroupSpec};
    use crate::setcalc::symmetrize;
    use std::sync::Arc;

    fn gens_set(spec: GroupSpec) -> SymSet {
        let g: GroupRef = Arc::new(make_context(&spec).unwrap());
        symmetrize(&g, &g.generators()).unwrap()
    }

    #[test]
    fn closed_forms_small() {
        let z = ball_sizes(&gens_set(GroupSpec::abelian(&[0])), 50);
        assert!((0..=50).all(|n| z.sizes[n] == 2 * n as u64 + 1));
        let f = ball_sizes(&gens_set(GroupSpec::free(2)), 6);
        assert!((0..=6).all(|n| f.sizes[n] == 2 * 3u64.pow(n as u32) - 1));
        let fin = ball_sizes(&gens_set(GroupSpec::abelian(&[5])), 10);
        assert_eq!(fin.sizes[10], 5);
    }

    #[test]
    fn gap_examples() {
        let z = ball_sizes(&gens_set(GroupSpec::abelian(&[0])), 100);
        assert!(gap_detect(&z, 1.0).contains(&100));
        let f = ball_sizes(&gens_set(GroupSpec::free(2)), 10);
        assert!(!gap_detect(&f, 1.0).contains(&10));
        let t = ball_sizes(&gens_set(GroupSpec::abelian(&[])), 20);
        assert_eq!(gap_detect(&t, 1.0), (3..=20).collect::<Vec<_>>());
    }

    #[test]
    fn scale_examples() {
        let z = ball_sizes(&gens_set(GroupSpec::abelian(&[0])), scale_radius(100));
        let s = dyadic_scale(&z, 100, 1.0, DEFAULT_ALPHA).unwrap();
        assert_eq!((s.r, s.inner, s.outer), (0, 10, 50));
        assert!((s.ratio - 101.0 / 21.0).abs() < 1e-12);
        let f = ball_sizes(&gens_set(GroupSpec::free(2)), 10);
        assert!(matches!(dyadic_scale(&f, 4, 0.1, DEFAULT_ALPHA), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn certificate_trivial_and_heisenberg() {
        let t = gens_set(GroupSpec::abelian(&[]));
        let c = t.group().clone();
        let ctx = make_context(&GroupSpec::abelian(&[])).unwrap();
        let cert = growth_certificate(&t, 10, 1.0, DEFAULT_ALPHA, &QuotientFamily::identity(&ctx)).unwrap();
        assert_eq!((cert.k_approx, cert.step), (1, 0));
        let _ = c;

        let ctx = make_context(&GroupSpec::ut_mod(3, 5)).unwrap();
        let g: GroupRef = Arc::new(ctx.clone());
        let s = symmetrize(&g, &g.generators()).unwrap();
        let cert = growth_certificate(&s, 9, 3.0, DEFAULT_ALPHA, &QuotientFamily::identity(&ctx)).unwrap();
        assert!(cert.step <= 2 && cert.step_within_target());
    }
}
