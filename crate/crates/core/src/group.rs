//! Concrete groups with exact arithmetic and canonical element forms.
//!
//! Every group the library computes in implements [`Group`]. Elements are
//! plain values ([`Element`]) that are only meaningful relative to a group;
//! the group validates membership with [`Group::contains`].

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

/// Default bound on the number of elements any enumeration may materialize.
pub const DEFAULT_CAP: usize = 2_000_000;

/// Letters used for named generators; upper case denotes the inverse.
pub const GENERATOR_LETTERS: &[u8] = b"xyzwvutsrqponmlkjihgfedcba";

/// A group element in canonical coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Element {
    /// Residues in `[0, m)`; unitriangular-mod entries or finite abelian coordinates.
    Residues(Vec<i64>),
    /// Exact integers; unitriangular-integer entries or abelian coordinates with a
    /// free factor (finite factors still reduced).
    Integers(Vec<BigInt>),
    /// Freely reduced word; letter `i+1` is generator `i`, `-(i+1)` its inverse.
    Word(Vec<i32>),
    /// Direct product components.
    Tuple(Vec<Element>),
}

impl Element {
    fn variant_rank(&self) -> u8 {
        match self {
            Element::Residues(_) => 0,
            Element::Integers(_) => 1,
            Element::Word(_) => 2,
            Element::Tuple(_) => 3,
        }
    }
}

fn letter_key(l: i32) -> (i32, bool) {
    (l.abs(), l < 0)
}

impl Ord for Element {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Element::Residues(a), Element::Residues(b)) => a.cmp(b),
            (Element::Integers(a), Element::Integers(b)) => a.cmp(b),
            (Element::Word(a), Element::Word(b)) => a.len().cmp(&b.len()).then_with(|| {
                a.iter()
                    .map(|&l| letter_key(l))
                    .cmp(b.iter().map(|&l| letter_key(l)))
            }),
            (Element::Tuple(a), Element::Tuple(b)) => a.cmp(b),
            _ => self.variant_rank().cmp(&other.variant_rank()),
        }
    }
}

impl PartialOrd for Element {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Residues(v) => write!(f, "{v:?}"),
            Element::Integers(v) => {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                write!(f, "[{}]", parts.join(", "))
            }
            Element::Word(w) => {
                if w.is_empty() {
                    return write!(f, "1");
                }
                write!(f, "{}", word_to_string(w))
            }
            Element::Tuple(t) => {
                let parts: Vec<String> = t.iter().map(|x| x.to_string()).collect();
                write!(f, "({})", parts.join(", "))
            }
        }
    }
}

/// A group in which the library can compute.
pub trait Group: Send + Sync + fmt::Debug {
    fn describe(&self) -> String;
    fn identity(&self) -> Element;
    fn mul(&self, a: &Element, b: &Element) -> Element;
    fn inv(&self, a: &Element) -> Element;
    /// Whether `a` is a canonical element of this group.
    fn contains(&self, a: &Element) -> bool;
    fn cap(&self) -> usize;
    /// Order of the group, `None` when infinite.
    fn order(&self) -> Option<BigUint>;
    /// Named standard generators.
    fn generators(&self) -> Vec<Element>;
    /// True when the group is abelian by construction.
    fn known_abelian(&self) -> bool {
        false
    }

    fn is_identity(&self, a: &Element) -> bool {
        *a == self.identity()
    }

    /// `[a, b] = a⁻¹ b⁻¹ a b`.
    fn commutator(&self, a: &Element, b: &Element) -> Element {
        let ab = self.mul(a, b);
        let ba = self.mul(b, a);
        self.mul(&self.inv(&ba), &ab)
    }

    /// `b⁻¹ a b`.
    fn conjugate(&self, a: &Element, b: &Element) -> Element {
        self.mul(&self.mul(&self.inv(b), a), b)
    }

    fn pow(&self, a: &Element, k: i64) -> Element {
        let mut base = if k < 0 { self.inv(a) } else { a.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = self.identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    /// Multiplication that rejects operands from another group.
    fn try_mul(&self, a: &Element, b: &Element) -> Result<Element> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.mul(a, b))
    }

    fn try_inv(&self, a: &Element) -> Result<Element> {
        self.check(a)?;
        Ok(self.inv(a))
    }

    fn check(&self, a: &Element) -> Result<()> {
        if self.contains(a) {
            Ok(())
        } else {
            Err(Error::CrossContext(format!(
                "{} (element {a})",
                self.describe()
            )))
        }
    }

    /// Order of `a`, searching up to `limit`.
    fn element_order(&self, a: &Element, limit: u64) -> Option<u64> {
        let id = self.identity();
        let mut cur = a.clone();
        for k in 1..=limit {
            if cur == id {
                return Some(k);
            }
            cur = self.mul(&cur, a);
        }
        None
    }
}

pub type GroupRef = Arc<dyn Group>;

/// The kinds of concrete group supported.
#[derive(Clone, Debug, PartialEq)]
pub enum Kind {
    /// Upper unitriangular `n×n` integer matrices.
    UnitriangularInt { n: usize },
    /// Upper unitriangular `n×n` matrices over `ℤ/m`.
    UnitriangularMod { n: usize, m: i64 },
    /// Product of cyclic groups; modulus `0` is an infinite cyclic factor.
    Abelian { moduli: Vec<u64> },
    /// Free group of the given rank.
    Free { rank: usize },
    /// Direct product.
    Product { factors: Vec<GroupCtx> },
}

/// A concrete group together with its enumeration cap.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupCtx {
    kind: Kind,
    cap: usize,
    spec: GroupSpec,
}

/// Serializable group description.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct GroupSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moduli: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factors: Option<Vec<GroupSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
}

impl GroupSpec {
    pub fn ut_mod(n: usize, m: u64) -> Self {
        GroupSpec {
            kind: "ut_mod".into(),
            n: Some(n),
            m: Some(m),
            ..Default::default()
        }
    }
    pub fn ut_int(n: usize) -> Self {
        GroupSpec {
            kind: "ut_int".into(),
            n: Some(n),
            ..Default::default()
        }
    }
    pub fn abelian(moduli: &[u64]) -> Self {
        GroupSpec {
            kind: "abelian".into(),
            moduli: Some(moduli.to_vec()),
            ..Default::default()
        }
    }
    pub fn free(rank: usize) -> Self {
        GroupSpec {
            kind: "free".into(),
            rank: Some(rank),
            ..Default::default()
        }
    }
    pub fn product(factors: Vec<GroupSpec>) -> Self {
        GroupSpec {
            kind: "product".into(),
            factors: Some(factors),
            ..Default::default()
        }
    }
    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = Some(cap);
        self
    }

    /// Parses the compact command-line form: `ut_mod:3:5`, `ut_int:3`,
    /// `abelian:0,5`, `free:2`, `trivial`. A JSON object is accepted as well.
    pub fn parse_compact(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.starts_with('{') {
            return serde_json::from_str(s).map_err(|e| Error::Malformed(e.to_string()));
        }
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| -> Result<u64> {
            p.trim()
                .parse::<u64>()
                .map_err(|_| Error::Malformed(format!("bad number {p:?} in {s:?}")))
        };
        match parts.as_slice() {
            ["ut_mod", n, m] => Ok(GroupSpec::ut_mod(num(n)? as usize, num(m)?)),
            ["ut_int", n] => Ok(GroupSpec::ut_int(num(n)? as usize)),
            ["abelian", mods] => {
                let moduli = mods.split(',').map(num).collect::<Result<Vec<_>>>()?;
                Ok(GroupSpec::abelian(&moduli))
            }
            ["free", r] => Ok(GroupSpec::free(num(r)? as usize)),
            ["trivial"] => Ok(GroupSpec::abelian(&[])),
            _ => Err(Error::Malformed(format!("unrecognized group {s:?}"))),
        }
    }
}

fn ut_index(n: usize, i: usize, j: usize) -> usize {
    // row-major over strictly upper entries
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

/// Builds a context from its description.
pub fn make_context(spec: &GroupSpec) -> Result<GroupCtx> {
    let cap = spec.cap.unwrap_or(DEFAULT_CAP);
    if cap == 0 {
        return Err(Error::Malformed("cap must be positive".into()));
    }
    let need = |v: Option<usize>, name: &str| {
        v.ok_or_else(|| Error::Malformed(format!("{} requires field {name}", spec.kind)))
    };
    let kind = match spec.kind.as_str() {
        "ut_int" => {
            let n = need(spec.n, "n")?;
            if n < 2 {
                return Err(Error::Malformed("n must be at least 2".into()));
            }
            Kind::UnitriangularInt { n }
        }
        "ut_mod" => {
            let n = need(spec.n, "n")?;
            let m = need(spec.m.map(|m| m as usize), "m")?;
            if n < 2 || m < 2 {
                return Err(Error::Malformed("ut_mod needs n >= 2 and m >= 2".into()));
            }
            if m > i64::MAX as usize / 4 {
                return Err(Error::Unsupported(format!("modulus {m} too large")));
            }
            Kind::UnitriangularMod { n, m: m as i64 }
        }
        "abelian" => {
            let moduli = spec
                .moduli
                .clone()
                .ok_or_else(|| Error::Malformed("abelian requires field moduli".into()))?;
            if moduli.contains(&1) {
                return Err(Error::Malformed(
                    "abelian factor modulus must be 0 or >= 2".into(),
                ));
            }
            Kind::Abelian { moduli }
        }
        "free" => {
            let rank = need(spec.rank, "rank")?;
            if rank == 0 || rank > GENERATOR_LETTERS.len() {
                return Err(Error::Malformed(format!(
                    "free rank must be in 1..={}",
                    GENERATOR_LETTERS.len()
                )));
            }
            Kind::Free { rank }
        }
        "product" => {
            let factors = spec
                .factors
                .as_ref()
                .ok_or_else(|| Error::Malformed("product requires field factors".into()))?;
            if factors.is_empty() {
                return Err(Error::Malformed("product needs at least one factor".into()));
            }
            let factors = factors
                .iter()
                .map(|f| {
                    make_context(&GroupSpec {
                        cap: Some(cap),
                        ..f.clone()
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Kind::Product { factors }
        }
        other => return Err(Error::Unsupported(format!("group kind {other:?}"))),
    };
    Ok(GroupCtx {
        kind,
        cap,
        spec: spec.clone(),
    })
}

impl GroupCtx {
    pub fn new(spec: &GroupSpec) -> Result<Self> {
        make_context(spec)
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn spec(&self) -> &GroupSpec {
        &self.spec
    }

    pub fn into_ref(self) -> GroupRef {
        Arc::new(self)
    }

    fn abelian_uses_integers(moduli: &[u64]) -> bool {
        moduli.contains(&0)
    }

    /// Unitriangular matrix `I + Σ v·E_{ij}` from `(i, j, v)` triples (0-based).
    pub fn unitriangular(&self, entries: &[(usize, usize, i64)]) -> Result<Element> {
        let n = match self.kind {
            Kind::UnitriangularInt { n } | Kind::UnitriangularMod { n, .. } => n,
            _ => return Err(Error::Unsupported("not a unitriangular context".into())),
        };
        let mut v = vec![0i64; n * (n - 1) / 2];
        for &(i, j, x) in entries {
            if !(i < j && j < n) {
                return Err(Error::Malformed(format!(
                    "entry ({i},{j}) not strictly upper"
                )));
            }
            v[ut_index(n, i, j)] += x;
        }
        self.from_i64s(&v)
    }

    /// Element from raw integer coordinates, reduced into canonical form.
    pub fn from_i64s(&self, coords: &[i64]) -> Result<Element> {
        match &self.kind {
            Kind::UnitriangularInt { n } => {
                if coords.len() != n * (n - 1) / 2 {
                    return Err(Error::Malformed("wrong coordinate count".into()));
                }
                Ok(Element::Integers(
                    coords.iter().map(|&x| BigInt::from(x)).collect(),
                ))
            }
            Kind::UnitriangularMod { n, m } => {
                if coords.len() != n * (n - 1) / 2 {
                    return Err(Error::Malformed("wrong coordinate count".into()));
                }
                Ok(Element::Residues(
                    coords.iter().map(|&x| x.rem_euclid(*m)).collect(),
                ))
            }
            Kind::Abelian { moduli } => {
                if coords.len() != moduli.len() {
                    return Err(Error::Malformed("wrong coordinate count".into()));
                }
                if Self::abelian_uses_integers(moduli) {
                    Ok(Element::Integers(
                        coords
                            .iter()
                            .zip(moduli)
                            .map(|(&x, &m)| {
                                if m == 0 {
                                    BigInt::from(x)
                                } else {
                                    BigInt::from(x.rem_euclid(m as i64))
                                }
                            })
                            .collect(),
                    ))
                } else {
                    Ok(Element::Residues(
                        coords
                            .iter()
                            .zip(moduli)
                            .map(|(&x, &m)| x.rem_euclid(m as i64))
                            .collect(),
                    ))
                }
            }
            Kind::Free { .. } | Kind::Product { .. } => Err(Error::Unsupported(
                "integer coordinates for free or product contexts".into(),
            )),
        }
    }

    /// Parses a word over the named generators, e.g. `"xY"` = x·y⁻¹.
    pub fn word(&self, w: &str) -> Result<Element> {
        let gens = self.generators();
        let mut acc = self.identity();
        for ch in w.chars() {
            if ch == '1' {
                continue;
            }
            let lower = ch.to_ascii_lowercase() as u8;
            let idx = GENERATOR_LETTERS
                .iter()
                .position(|&c| c == lower)
                .filter(|&i| i < gens.len())
                .ok_or_else(|| Error::Malformed(format!("unknown generator letter {ch:?}")))?;
            let g = if ch.is_ascii_uppercase() {
                self.inv(&gens[idx])
            } else {
                gens[idx].clone()
            };
            acc = self.mul(&acc, &g);
        }
        Ok(acc)
    }

    /// Maximum absolute value of integer coordinates (0 for other kinds).
    pub fn max_entry(a: &Element) -> BigInt {
        match a {
            Element::Integers(v) => v.iter().map(|x| x.abs()).max().unwrap_or_default(),
            Element::Residues(v) => BigInt::from(v.iter().copied().max().unwrap_or(0)),
            Element::Tuple(t) => t.iter().map(Self::max_entry).max().unwrap_or_default(),
            Element::Word(_) => BigInt::zero(),
        }
    }
}

fn ut_mul_i64(n: usize, a: &[i64], b: &[i64], m: i64) -> Vec<i64> {
    let mut c = vec![0i64; a.len()];
    if m < 1 << 24 {
        // entries below 2^24: every partial sum fits in i64
        for i in 0..n {
            for j in i + 1..n {
                let idx = ut_index(n, i, j);
                let mut s = a[idx] + b[idx];
                for k in i + 1..j {
                    s += a[ut_index(n, i, k)] * b[ut_index(n, k, j)];
                }
                c[idx] = s.rem_euclid(m);
            }
        }
        return c;
    }
    for i in 0..n {
        for j in i + 1..n {
            let idx = ut_index(n, i, j);
            let mut s = a[idx] as i128 + b[idx] as i128;
            for k in i + 1..j {
                s += a[ut_index(n, i, k)] as i128 * b[ut_index(n, k, j)] as i128;
            }
            c[idx] = s.rem_euclid(m as i128) as i64;
        }
    }
    c
}

fn ut_inv_i64(n: usize, a: &[i64], m: i64) -> Vec<i64> {
    let mut v = vec![0i64; a.len()];
    for d in 1..n {
        for i in 0..n - d {
            let j = i + d;
            let mut s = -(a[ut_index(n, i, j)] as i128);
            for k in i + 1..j {
                s -= a[ut_index(n, i, k)] as i128 * v[ut_index(n, k, j)] as i128;
            }
            v[ut_index(n, i, j)] = s.rem_euclid(m as i128) as i64;
        }
    }
    v
}

fn ut_mul_big(n: usize, a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let mut c = vec![BigInt::zero(); a.len()];
    for i in 0..n {
        for j in i + 1..n {
            let idx = ut_index(n, i, j);
            let mut s = &a[idx] + &b[idx];
            for k in i + 1..j {
                s += &a[ut_index(n, i, k)] * &b[ut_index(n, k, j)];
            }
            c[idx] = s;
        }
    }
    c
}

fn ut_inv_big(n: usize, a: &[BigInt]) -> Vec<BigInt> {
    let mut v = vec![BigInt::zero(); a.len()];
    for d in 1..n {
        for i in 0..n - d {
            let j = i + d;
            let mut s = -a[ut_index(n, i, j)].clone();
            for k in i + 1..j {
                s -= &a[ut_index(n, i, k)] * &v[ut_index(n, k, j)];
            }
            v[ut_index(n, i, j)] = s;
        }
    }
    v
}

fn reduce_word(mut w: Vec<i32>) -> Vec<i32> {
    let mut out: Vec<i32> = Vec::with_capacity(w.len());
    for l in w.drain(..) {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

pub fn word_to_string(w: &[i32]) -> String {
    w.iter()
        .map(|&l| {
            let c = GENERATOR_LETTERS[(l.unsigned_abs() - 1) as usize] as char;
            if l < 0 {
                c.to_ascii_uppercase()
            } else {
                c
            }
        })
        .collect()
}

impl Group for GroupCtx {
    fn describe(&self) -> String {
        match &self.kind {
            Kind::UnitriangularInt { n } => format!("UT({n}, Z)"),
            Kind::UnitriangularMod { n, m } => format!("UT({n}, Z/{m})"),
            Kind::Abelian { moduli } => {
                let f: Vec<String> = moduli
                    .iter()
                    .map(|&m| if m == 0 { "Z".into() } else { format!("Z/{m}") })
                    .collect();
                f.join(" x ")
            }
            Kind::Free { rank } => format!("F{rank}"),
            Kind::Product { factors } => {
                let f: Vec<String> = factors.iter().map(|c| c.describe()).collect();
                format!("({})", f.join(" x "))
            }
        }
    }

    fn identity(&self) -> Element {
        match &self.kind {
            Kind::UnitriangularInt { n } => {
                Element::Integers(vec![BigInt::zero(); n * (n - 1) / 2])
            }
            Kind::UnitriangularMod { n, .. } => Element::Residues(vec![0; n * (n - 1) / 2]),
            Kind::Abelian { moduli } => {
                if Self::abelian_uses_integers(moduli) {
                    Element::Integers(vec![BigInt::zero(); moduli.len()])
                } else {
                    Element::Residues(vec![0; moduli.len()])
                }
            }
            Kind::Free { .. } => Element::Word(Vec::new()),
            Kind::Product { factors } => {
                Element::Tuple(factors.iter().map(|f| f.identity()).collect())
            }
        }
    }

    fn mul(&self, a: &Element, b: &Element) -> Element {
        match (&self.kind, a, b) {
            (Kind::UnitriangularInt { n }, Element::Integers(x), Element::Integers(y)) => {
                Element::Integers(ut_mul_big(*n, x, y))
            }
            (Kind::UnitriangularMod { n, m }, Element::Residues(x), Element::Residues(y)) => {
                Element::Residues(ut_mul_i64(*n, x, y, *m))
            }
            (Kind::Abelian { moduli }, Element::Residues(x), Element::Residues(y)) => {
                Element::Residues(
                    x.iter()
                        .zip(y)
                        .zip(moduli)
                        .map(|((p, q), &m)| (p + q).rem_euclid(m as i64))
                        .collect(),
                )
            }
            (Kind::Abelian { moduli }, Element::Integers(x), Element::Integers(y)) => {
                Element::Integers(
                    x.iter()
                        .zip(y)
                        .zip(moduli)
                        .map(|((p, q), &m)| {
                            let s = p + q;
                            if m == 0 {
                                s
                            } else {
                                let mm = BigInt::from(m);
                                ((s % &mm) + &mm) % &mm
                            }
                        })
                        .collect(),
                )
            }
            (Kind::Free { .. }, Element::Word(x), Element::Word(y)) => {
                let mut w = x.clone();
                w.extend_from_slice(y);
                Element::Word(reduce_word(w))
            }
            (Kind::Product { factors }, Element::Tuple(x), Element::Tuple(y)) => Element::Tuple(
                factors
                    .iter()
                    .zip(x.iter().zip(y))
                    .map(|(f, (p, q))| f.mul(p, q))
                    .collect(),
            ),
            _ => panic!("operands do not belong to {}", self.describe()),
        }
    }

    fn inv(&self, a: &Element) -> Element {
        match (&self.kind, a) {
            (Kind::UnitriangularInt { n }, Element::Integers(x)) => {
                Element::Integers(ut_inv_big(*n, x))
            }
            (Kind::UnitriangularMod { n, m }, Element::Residues(x)) => {
                Element::Residues(ut_inv_i64(*n, x, *m))
            }
            (Kind::Abelian { moduli }, Element::Residues(x)) => Element::Residues(
                x.iter()
                    .zip(moduli)
                    .map(|(p, &m)| (-p).rem_euclid(m as i64))
                    .collect(),
            ),
            (Kind::Abelian { moduli }, Element::Integers(x)) => Element::Integers(
                x.iter()
                    .zip(moduli)
                    .map(|(p, &m)| {
                        if m == 0 {
                            -p
                        } else {
                            let mm = BigInt::from(m);
                            ((-p % &mm) + &mm) % &mm
                        }
                    })
                    .collect(),
            ),
            (Kind::Free { .. }, Element::Word(x)) => {
                Element::Word(x.iter().rev().map(|l| -l).collect())
            }
            (Kind::Product { factors }, Element::Tuple(x)) => {
                Element::Tuple(factors.iter().zip(x).map(|(f, p)| f.inv(p)).collect())
            }
            _ => panic!("operand does not belong to {}", self.describe()),
        }
    }

    fn contains(&self, a: &Element) -> bool {
        match (&self.kind, a) {
            (Kind::UnitriangularInt { n }, Element::Integers(x)) => x.len() == n * (n - 1) / 2,
            (Kind::UnitriangularMod { n, m }, Element::Residues(x)) => {
                x.len() == n * (n - 1) / 2 && x.iter().all(|v| (0..*m).contains(v))
            }
            (Kind::Abelian { moduli }, Element::Residues(x)) => {
                !Self::abelian_uses_integers(moduli)
                    && x.len() == moduli.len()
                    && x.iter()
                        .zip(moduli)
                        .all(|(v, &m)| (0..m as i64).contains(v))
            }
            (Kind::Abelian { moduli }, Element::Integers(x)) => {
                Self::abelian_uses_integers(moduli)
                    && x.len() == moduli.len()
                    && x.iter()
                        .zip(moduli)
                        .all(|(v, &m)| m == 0 || (!v.is_negative() && *v < BigInt::from(m)))
            }
            (Kind::Free { rank }, Element::Word(w)) => {
                w.iter()
                    .all(|&l| l != 0 && l.unsigned_abs() as usize <= *rank)
                    && w.windows(2).all(|p| p[0] != -p[1])
            }
            (Kind::Product { factors }, Element::Tuple(t)) => {
                t.len() == factors.len() && factors.iter().zip(t).all(|(f, e)| f.contains(e))
            }
            _ => false,
        }
    }

    fn cap(&self) -> usize {
        self.cap
    }

    fn order(&self) -> Option<BigUint> {
        match &self.kind {
            Kind::UnitriangularInt { .. } | Kind::Free { .. } => None,
            Kind::UnitriangularMod { n, m } => {
                Some(BigUint::from(*m as u64).pow((n * (n - 1) / 2) as u32))
            }
            Kind::Abelian { moduli } => {
                if moduli.contains(&0) {
                    None
                } else {
                    Some(moduli.iter().fold(BigUint::one(), |acc, &m| acc * m))
                }
            }
            Kind::Product { factors } => factors
                .iter()
                .try_fold(BigUint::one(), |acc, f| f.order().map(|o| acc * o)),
        }
    }

    fn generators(&self) -> Vec<Element> {
        match &self.kind {
            Kind::UnitriangularInt { n } | Kind::UnitriangularMod { n, .. } => (0..n - 1)
                .map(|i| {
                    self.unitriangular(&[(i, i + 1, 1)])
                        .expect("valid generator")
                })
                .collect(),
            Kind::Abelian { moduli } => (0..moduli.len())
                .map(|i| {
                    let mut v = vec![0i64; moduli.len()];
                    v[i] = 1;
                    self.from_i64s(&v).expect("valid generator")
                })
                .collect(),
            Kind::Free { rank } => (1..=*rank as i32).map(|l| Element::Word(vec![l])).collect(),
            Kind::Product { factors } => {
                let ids: Vec<Element> = factors.iter().map(|f| f.identity()).collect();
                let mut out = Vec::new();
                for (i, f) in factors.iter().enumerate() {
                    for g in f.generators() {
                        let mut t = ids.clone();
                        t[i] = g;
                        out.push(Element::Tuple(t));
                    }
                }
                out
            }
        }
    }

    fn known_abelian(&self) -> bool {
        match &self.kind {
            Kind::Abelian { .. } => true,
            Kind::UnitriangularInt { n } | Kind::UnitriangularMod { n, .. } => *n == 2,
            Kind::Free { rank } => *rank == 1,
            Kind::Product { factors } => factors.iter().all(|f| f.known_abelian()),
        }
    }
}

/// Serializes an element: coordinate arrays, word strings, or nested arrays for products.
pub fn element_to_json(a: &Element) -> Value {
    match a {
        Element::Residues(v) => Value::Array(v.iter().map(|&x| Value::from(x)).collect()),
        Element::Integers(v) => Value::Array(
            v.iter()
                .map(|x| match x.to_i64() {
                    Some(i) => Value::from(i),
                    None => Value::String(x.to_string()),
                })
                .collect(),
        ),
        Element::Word(w) => Value::String(if w.is_empty() {
            "1".into()
        } else {
            word_to_string(w)
        }),
        Element::Tuple(t) => Value::Array(t.iter().map(element_to_json).collect()),
    }
}

/// Parses an element of `ctx` from its JSON form.
pub fn element_from_json(ctx: &GroupCtx, v: &Value) -> Result<Element> {
    let bad = || Error::Malformed(format!("cannot read element {v} in {}", ctx.describe()));
    match &ctx.kind {
        Kind::Free { .. } => match v {
            Value::String(s) => ctx.word(s),
            _ => Err(bad()),
        },
        Kind::Product { factors } => {
            let arr = v.as_array().ok_or_else(bad)?;
            if arr.len() != factors.len() {
                return Err(bad());
            }
            Ok(Element::Tuple(
                factors
                    .iter()
                    .zip(arr)
                    .map(|(f, x)| element_from_json(f, x))
                    .collect::<Result<_>>()?,
            ))
        }
        _ => match v {
            Value::String(s) => ctx.word(s),
            Value::Array(arr) => {
                let big: Vec<BigInt> = arr
                    .iter()
                    .map(|x| match x {
                        Value::Number(n) => n.as_i64().map(BigInt::from).ok_or_else(bad),
                        Value::String(s) => s.parse::<BigInt>().map_err(|_| bad()),
                        _ => Err(bad()),
                    })
                    .collect::<Result<_>>()?;
                if let Kind::UnitriangularInt { .. } = ctx.kind {
                    let e = Element::Integers(big);
                    return if ctx.contains(&e) { Ok(e) } else { Err(bad()) };
                }
                let small: Vec<i64> = big
                    .iter()
                    .map(|b| b.to_i64().ok_or_else(bad))
                    .collect::<Result<_>>()?;
                ctx.from_i64s(&small)
            }
            _ => Err(bad()),
        },
    }
}

/// Rule by which a homomorphism acts.
#[derive(Clone, Debug)]
pub enum HomRule {
    Identity,
    /// Entrywise reduction; one modulus per coordinate (`0` keeps the coordinate).
    Reduce {
        moduli: Vec<i64>,
    },
    /// Projection of a direct product onto one factor.
    Projection {
        factor: usize,
    },
    /// Free-group source: image of each generator.
    GeneratorImages {
        images: Vec<Element>,
    },
    /// Projection onto canonical coset representatives.
    Quotient(Arc<crate::subgrp::QuotientCtx>),
}

/// A homomorphism between two groups.
#[derive(Clone, Debug)]
pub struct Homomorphism {
    pub source: GroupRef,
    pub target: GroupRef,
    pub rule: HomRule,
    pub label: String,
}

impl Homomorphism {
    pub fn identity(g: GroupRef) -> Self {
        Homomorphism {
            source: g.clone(),
            target: g,
            rule: HomRule::Identity,
            label: "identity".into(),
        }
    }

    /// Reduction modulo `m` of a unitriangular-integer, unitriangular-mod or abelian context.
    pub fn mod_reduction(source: &GroupCtx, m: u64) -> Result<Self> {
        if m < 2 {
            return Err(Error::Malformed("modulus must be at least 2".into()));
        }
        let (target_spec, moduli) = match source.kind() {
            Kind::UnitriangularInt { n } => {
                (GroupSpec::ut_mod(*n, m), vec![m as i64; n * (n - 1) / 2])
            }
            Kind::UnitriangularMod { n, m: m0 } => {
                if !(*m0 as u64).is_multiple_of(m) {
                    return Err(Error::Malformed(format!("{m} does not divide {m0}")));
                }
                (GroupSpec::ut_mod(*n, m), vec![m as i64; n * (n - 1) / 2])
            }
            Kind::Abelian { moduli } => {
                // factors that do not reduce mod m are kept whole
                let t: Vec<u64> = moduli
                    .iter()
                    .map(|&q| if q == 0 || q.is_multiple_of(m) { m } else { q })
                    .collect();
                let red: Vec<i64> = t.iter().map(|&q| q as i64).collect();
                (GroupSpec::abelian(&t), red)
            }
            _ => {
                return Err(Error::Unsupported(
                    "mod reduction needs a matrix or abelian source".into(),
                ))
            }
        };
        let target = make_context(&target_spec.with_cap(source.cap()))?;
        Ok(Homomorphism {
            source: Arc::new(source.clone()),
            target: Arc::new(target),
            rule: HomRule::Reduce { moduli },
            label: format!("mod {m}"),
        })
    }

    pub fn projection(source: &GroupCtx, factor: usize) -> Result<Self> {
        match source.kind() {
            Kind::Product { factors } if factor < factors.len() => Ok(Homomorphism {
                source: Arc::new(source.clone()),
                target: Arc::new(factors[factor].clone()),
                rule: HomRule::Projection { factor },
                label: format!("projection {factor}"),
            }),
            _ => Err(Error::Malformed(
                "projection needs a product source and a valid factor".into(),
            )),
        }
    }

    pub fn generator_images(
        source: &GroupCtx,
        target: GroupRef,
        images: Vec<Element>,
    ) -> Result<Self> {
        match source.kind() {
            Kind::Free { rank } if *rank == images.len() => {
                for im in &images {
                    target.check(im)?;
                }
                Ok(Homomorphism {
                    source: Arc::new(source.clone()),
                    target,
                    rule: HomRule::GeneratorImages { images },
                    label: "generator images".into(),
                })
            }
            _ => Err(Error::Malformed(
                "generator images need a free source and one image per generator".into(),
            )),
        }
    }

    pub fn apply(&self, a: &Element) -> Result<Element> {
        self.source.check(a)?;
        Ok(self.apply_unchecked(a))
    }

    pub(crate) fn apply_unchecked(&self, a: &Element) -> Element {
        match &self.rule {
            HomRule::Identity => a.clone(),
            HomRule::Reduce { moduli } => match a {
                Element::Residues(v) => Element::Residues(
                    v.iter()
                        .zip(moduli)
                        .map(|(&x, &m)| if m == 0 { x } else { x.rem_euclid(m) })
                        .collect(),
                ),
                Element::Integers(v) => Element::Residues(
                    v.iter()
                        .zip(moduli)
                        .map(|(x, &m)| {
                            let mm = BigInt::from(m);
                            (((x % &mm) + &mm) % &mm)
                                .to_i64()
                                .expect("reduced residue fits")
                        })
                        .collect(),
                ),
                _ => unreachable!("reduction source is a coordinate group"),
            },
            HomRule::Projection { factor } => match a {
                Element::Tuple(t) => t[*factor].clone(),
                _ => unreachable!("projection source is a product"),
            },
            HomRule::GeneratorImages { images } => match a {
                Element::Word(w) => {
                    let t = &self.target;
                    w.iter().fold(t.identity(), |acc, &l| {
                        let g = &images[(l.unsigned_abs() - 1) as usize];
                        if l > 0 {
                            t.mul(&acc, g)
                        } else {
                            t.mul(&acc, &t.inv(g))
                        }
                    })
                }
                _ => unreachable!("generator-image source is free"),
            },
            HomRule::Quotient(q) => q.project(a),
        }
    }

    pub fn in_kernel(&self, a: &Element) -> Result<bool> {
        Ok(self.target.is_identity(&self.apply(a)?))
    }
}

/// Word length of a simple commutator of the given weight over its entries:
/// `len(1) = 1`, `len(k) = 2·len(k−1) + 2`, i.e. `3·2^(k−1) − 2`.
pub fn simple_commutator_length(weight: u64) -> BigUint {
    if weight == 0 {
        return BigUint::zero();
    }
    BigUint::from(3u32) * (BigUint::one() << (weight - 1) as usize) - BigUint::from(2u32)
}

/// `[x₁, …, x_k] = [[x₁, …, x_{k−1}], x_k]` together with its word length over the `xs`.
pub fn simple_commutator(g: &dyn Group, xs: &[Element]) -> Result<(Element, BigUint)> {
    if xs.len() < 2 {
        return Err(Error::Malformed(
            "simple commutator needs at least two entries".into(),
        ));
    }
    for x in xs {
        g.check(x)?;
    }
    let mut acc = xs[0].clone();
    for x in &xs[1..] {
        acc = g.commutator(&acc, x);
    }
    Ok((acc, simple_commutator_length(xs.len() as u64)))
}

/// Evaluates a simple commutator of `weight` built by cycling through `xs`,
/// stopping early once the partial commutator is trivial. Returns `None` if the
/// weight exceeds `max_steps` without reaching the identity.
pub fn long_simple_commutator(
    g: &dyn Group,
    xs: &[Element],
    weight: u64,
    max_steps: u64,
) -> Option<Element> {
    let id = g.identity();
    let mut acc = xs[0].clone();
    for step in 1..weight {
        if acc == id {
            return Some(id);
        }
        if step > max_steps {
            return None;
        }
        acc = g.commutator(&acc, &xs[step as usize % xs.len()]);
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heis_int() -> GroupCtx {
        make_context(&GroupSpec::ut_int(3)).unwrap()
    }

    #[test]
    fn ut_mod_order() {
        let g = make_context(&GroupSpec::ut_mod(3, 3)).unwrap();
        assert_eq!(g.order(), Some(BigUint::from(27u32)));
    }

    #[test]
    fn infinite_cyclic() {
        let g = make_context(&GroupSpec::abelian(&[0])).unwrap();
        assert_eq!(g.order(), None);
        assert!(g.known_abelian());
    }

    #[test]
    fn free_words_reduce() {
        let g = make_context(&GroupSpec::free(2)).unwrap();
        let a = g.word("xyY").unwrap();
        assert_eq!(a, Element::Word(vec![1]));
        assert_eq!(g.word("xX").unwrap(), g.identity());
    }

    #[test]
    fn heisenberg_products() {
        let g = heis_int();
        let x = g.unitriangular(&[(0, 1, 1)]).unwrap();
        let y = g.unitriangular(&[(1, 2, 1)]).unwrap();
        let want = g.unitriangular(&[(0, 1, 1), (1, 2, 1), (0, 2, 1)]).unwrap();
        assert_eq!(g.mul(&x, &y), want);
        assert_eq!(g.inv(&x), g.unitriangular(&[(0, 1, -1)]).unwrap());
        let z = g.unitriangular(&[(0, 2, 1)]).unwrap();
        assert_eq!(g.commutator(&x, &y), z);
        assert_eq!(
            simple_commutator(&g, &[x.clone(), y.clone(), x.clone()])
                .unwrap()
                .0,
            g.identity()
        );
        assert_eq!(
            simple_commutator(&g, &[x.clone(), x.clone()]).unwrap().0,
            g.identity()
        );
        assert!(simple_commutator(&g, &[x]).is_err());
    }

    #[test]
    fn modular_addition() {
        let g = make_context(&GroupSpec::abelian(&[5])).unwrap();
        let a = g.from_i64s(&[3]).unwrap();
        let b = g.from_i64s(&[4]).unwrap();
        assert_eq!(g.mul(&a, &b), g.from_i64s(&[2]).unwrap());
    }

    #[test]
    fn reduction_and_generator_images() {
        let g = heis_int();
        let pi = Homomorphism::mod_reduction(&g, 3).unwrap();
        let a = g.unitriangular(&[(0, 1, 3)]).unwrap();
        assert!(pi.in_kernel(&a).unwrap());
        assert!(pi.in_kernel(&g.identity()).unwrap());

        let f = make_context(&GroupSpec::free(2)).unwrap();
        let gr: GroupRef = Arc::new(g.clone());
        let x = g.unitriangular(&[(0, 1, 1)]).unwrap();
        let y = g.unitriangular(&[(1, 2, 1)]).unwrap();
        let phi = Homomorphism::generator_images(&f, gr, vec![x, y]).unwrap();
        let xy = f.word("xy").unwrap();
        let want = g.unitriangular(&[(0, 1, 1), (1, 2, 1), (0, 2, 1)]).unwrap();
        assert_eq!(phi.apply(&xy).unwrap(), want);
    }

    #[test]
    fn cross_context_rejected() {
        let g = heis_int();
        let h = make_context(&GroupSpec::ut_mod(3, 5)).unwrap();
        let a = h.generators()[0].clone();
        assert!(matches!(g.try_mul(&a, &a), Err(Error::CrossContext(_))));
    }

    #[test]
    fn commutator_lengths() {
        assert_eq!(simple_commutator_length(1), BigUint::from(1u32));
        assert_eq!(simple_commutator_length(2), BigUint::from(4u32));
        assert_eq!(simple_commutator_length(3), BigUint::from(10u32));
    }

    #[test]
    fn shortlex_word_order() {
        let f = make_context(&GroupSpec::free(2)).unwrap();
        let mut v = [f.word("yx").unwrap(),
            f.word("X").unwrap(),
            f.word("x").unwrap(),
            f.identity()];
        v.sort();
        let s: Vec<String> = v.iter().map(|e| e.to_string()).collect();
        assert_eq!(s, vec!["1", "x", "X", "yx"]);
    }

    #[test]
    fn compact_specs() {
        assert_eq!(
            GroupSpec::parse_compact("ut_mod:3:5").unwrap(),
            GroupSpec::ut_mod(3, 5)
        );
        assert_eq!(
            GroupSpec::parse_compact("abelian:0,5").unwrap(),
            GroupSpec::abelian(&[0, 5])
        );
        assert!(GroupSpec::parse_compact("klein").is_err());
        assert!(make_context(&GroupSpec::ut_mod(1, 5)).is_err());
        assert!(make_context(&GroupSpec {
            kind: "sym".into(),
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = heis_int();
        let a = g.unitriangular(&[(0, 2, -7)]).unwrap();
        assert_eq!(element_from_json(&g, &element_to_json(&a)).unwrap(), a);
        let f = make_context(&GroupSpec::free(2)).unwrap();
        let w = f.word("xY").unwrap();
        assert_eq!(element_to_json(&w), Value::String("xY".into()));
    }
}
