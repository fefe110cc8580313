//! Level lengths, forbidden-string counts and maximin string selection.
//!
//! Level values grow factorially (and doubly exponentially for the `pivr`
//! variant), so every quantity is a `BigUint`.

use crate::error::{Error, Result};
use crate::strings::BinaryString;
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

/// Largest exponent for which `2^x` is materialized.
pub const MAX_EXPONENT_BITS: u64 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Plain,
    Coding,
    Pivr,
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Variant::Plain),
            "coding" => Ok(Variant::Coding),
            "pivr" => Ok(Variant::Pivr),
            other => Err(Error::BadSpec(format!("unknown level variant {other:?}"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Plain => "plain",
            Variant::Coding => "coding",
            Variant::Pivr => "pivr",
        })
    }
}

fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

/// `f_{i+1} = Σ_{j≤i} (j+1)!` (plain) or `f′_{i+1} = Σ_{j≤i} (2(j+1)! + 1)` (coding).
pub fn forbidden_bound(i: u64, variant: Variant) -> Result<BigUint> {
    match variant {
        Variant::Plain => Ok((0..=i).map(|j| factorial(j + 1)).sum()),
        Variant::Coding => Ok((0..=i).map(|j| factorial(j + 1) * 2u32 + 1u32).sum()),
        Variant::Pivr => Err(Error::Unsupported(
            "pivr bounds depend on d_i; read them from a built LevelTable".into(),
        )),
    }
}

fn bitlen(x: &BigUint) -> u64 {
    x.bits()
}

/// `n(k) = μn (k − (2^n − 1) < k/2)`, with `n(0) = 0`. Closed form: `bitlen(k+2) − 1`.
pub fn move_bound(k: &BigUint) -> u64 {
    if k.is_zero() {
        0
    } else {
        bitlen(&(k + 2u32)) - 1
    }
}

/// `n(2^a · m)` without materializing `2^a`.
fn move_bound_scaled(a: &BigUint, m: &BigUint) -> BigUint {
    if m.is_zero() {
        return BigUint::zero();
    }
    if *a >= BigUint::from(2u32) {
        // 2^a·m is a multiple of 4, so adding 2 never carries into the top bit.
        a + bitlen(m) - 1u32
    } else {
        let a = a.to_u32().expect("a < 2");
        BigUint::from(move_bound(&(m << a)))
    }
}

/// Least `x` with `2^x ≥ f`.
pub fn gap_exponent(f: &BigUint) -> u64 {
    if f <= &BigUint::one() {
        0
    } else {
        bitlen(&(f - 1u32))
    }
}

fn pow2(x: &BigUint, index: usize) -> Result<BigUint> {
    match x.to_u64() {
        Some(e) if e <= MAX_EXPONENT_BITS => Ok(BigUint::one() << e),
        _ => Err(Error::LevelOverflow { index }),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelTable {
    pub variant: Variant,
    pub capitals: Vec<BigUint>,
    /// `l[i] = l_i` for `i = 0..=count`.
    pub l: Vec<BigUint>,
    /// `d[i] = d_i`.
    pub d: Vec<BigUint>,
    /// `intermediate[i] = [l_{i,0}, …, l_{i,i}]`; row 0 is empty, and so is
    /// row 1 for `pivr`, whose `l_1` is fixed.
    pub intermediate: Vec<Vec<BigUint>>,
    /// `f[i] = f_{i+1}`, the number of forbidden strings of length `l_{i+1}`
    /// tolerated above one length-`l_i` string. `None` where undefined.
    pub f: Vec<Option<BigUint>>,
}

/// Builds `l_0..=l_count`, `d_0..=d_count` and the intermediate grids.
pub fn build_levels(variant: Variant, capitals: &[u64], count: usize) -> Result<LevelTable> {
    if capitals.is_empty() {
        return Err(Error::BadSpec("capitals must be nonempty".into()));
    }
    if count == 0 {
        return Err(Error::BadSpec("count must be at least 1".into()));
    }
    let caps: Vec<BigUint> = capitals.iter().map(|&c| BigUint::from(c)).collect();
    let mut t = LevelTable {
        variant,
        capitals: caps,
        l: vec![BigUint::zero()],
        d: vec![BigUint::zero()],
        intermediate: vec![Vec::new()],
        f: Vec::new(),
    };
    for i in 0..count {
        let index = i + 1;
        let (start, f, d_next) = match variant {
            Variant::Plain | Variant::Coding => {
                let f = forbidden_bound(i as u64, variant)?;
                let start = &t.l[i] + gap_exponent(&f);
                let d_next = match variant {
                    Variant::Plain => &t.d[i] + &f,
                    _ => &t.d[i] + factorial(i as u64 + 1) * 2u32 + 2u32,
                };
                (Some(start), Some(f), d_next)
            }
            Variant::Pivr if i == 0 => (None, None, BigUint::from(160u32)),
            Variant::Pivr => {
                let start = &t.l[i] + &t.d[i];
                let f = pow2(&t.d[i], index)?;
                (Some(start), Some(f), BigUint::zero())
            }
        };
        let (row, l_next) = match start {
            None => (Vec::new(), BigUint::from(5u32)),
            Some(start) => {
                let row = t.grid_row(i, start);
                let l_next = row.last().expect("row has i+2 entries") + 1u32;
                (row, l_next)
            }
        };
        let d_next = if variant == Variant::Pivr && i > 0 { pow2(&l_next, index)? * &l_next } else { d_next };
        t.intermediate.push(row);
        t.l.push(l_next);
        t.d.push(d_next);
        t.f.push(f);
    }
    Ok(t)
}

impl LevelTable {
    /// `l_{i+1,j+1} = l_{i+1,j} + max_{k ≤ i} n(2^{l_{i+1,j}+1} · m_k(λ))`.
    fn grid_row(&self, i: usize, start: BigUint) -> Vec<BigUint> {
        let mut row = vec![start];
        let kmax = i.min(self.capitals.len() - 1);
        for j in 0..=i {
            let prev = &row[j];
            let a = prev + 1u32;
            let step = self.capitals[..=kmax]
                .iter()
                .map(|c| move_bound_scaled(&a, c))
                .max()
                .unwrap_or_default();
            row.push(prev + step);
        }
        row
    }

    pub fn count(&self) -> usize {
        self.l.len() - 1
    }

    /// `l_i` as a machine length.
    pub fn l_usize(&self, i: usize) -> Result<usize> {
        self.l.get(i).and_then(|v| v.to_usize()).ok_or(Error::LevelOverflow { index: i })
    }

    pub fn d_u64(&self, i: usize) -> Result<u64> {
        self.d.get(i).and_then(|v| v.to_u64()).ok_or(Error::LevelOverflow { index: i })
    }

    /// `l_{i,j}` as a machine length.
    pub fn intermediate_usize(&self, i: usize, j: usize) -> Option<usize> {
        self.intermediate.get(i)?.get(j)?.to_usize()
    }

    /// Bound on forbidden strings of length `l_{i+1}` above one length-`l_i` string.
    pub fn bound(&self, i: usize) -> Option<&BigUint> {
        self.f.get(i).and_then(Option::as_ref)
    }

    pub fn to_json(&self) -> Value {
        let row = |v: &[BigUint]| v.iter().map(big_json).collect::<Vec<_>>();
        json!({
            "variant": self.variant.to_string(),
            "l": row(&self.l),
            "d": row(&self.d),
            "intermediate": self.intermediate.iter().map(|r| row(r)).collect::<Vec<_>>(),
            "f": self.f.iter().map(|f| f.as_ref().map_or(Value::Null, big_json)).collect::<Vec<_>>(),
        })
    }
}

/// Numbers that fit in `u64` print as JSON numbers, larger ones as decimal strings.
pub fn big_json(v: &BigUint) -> Value {
    match v.to_u64() {
        Some(x) => json!(x),
        None => json!(v.to_string()),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ForbiddenEntry {
    pub level: usize,
    pub string: BinaryString,
    pub stage: u64,
    pub cause: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BoundViolation {
    pub level: usize,
    pub above: BinaryString,
    pub count: usize,
    pub stage: u64,
}

/// Strings the construction must route around, keyed by level.
#[derive(Clone, Debug, Default)]
pub struct ForbiddenRegistry {
    lengths: Vec<usize>,
    bounds: Vec<Option<BigUint>>,
    by_level: Vec<BTreeSet<BinaryString>>,
    entries: BTreeMap<BinaryString, ForbiddenEntry>,
    violations: Vec<BoundViolation>,
}

impl ForbiddenRegistry {
    /// A registry over the levels of `table` that fit in memory-addressable lengths.
    pub fn new(table: &LevelTable) -> Self {
        let lengths: Vec<usize> = table.l.iter().map_while(|v| v.to_usize()).collect();
        let n = lengths.len();
        Self {
            bounds: (0..n).map(|i| if i == 0 { None } else { table.bound(i - 1).cloned() }).collect(),
            by_level: vec![BTreeSet::new(); n],
            lengths,
            entries: BTreeMap::new(),
            violations: Vec::new(),
        }
    }

    pub fn level_len(&self, i: usize) -> Option<usize> {
        self.lengths.get(i).copied()
    }

    /// Adds `σ` (of length `l_i`). Returns whether it was new.
    pub fn register(&mut self, i: usize, sigma: BinaryString, stage: u64, cause: &str) -> Result<bool> {
        let want = self.level_len(i).ok_or(Error::LevelOverflow { index: i })?;
        if sigma.len() != want {
            return Err(Error::LengthMismatch { left: sigma.len(), right: want });
        }
        if self.entries.contains_key(&sigma) {
            return Ok(false);
        }
        self.by_level[i].insert(sigma.clone());
        self.entries.insert(sigma.clone(), ForbiddenEntry { level: i, string: sigma.clone(), stage, cause: cause.to_string() });
        if i > 0 {
            let above = sigma.prefix(self.lengths[i - 1]);
            let count = self.count_above(i, &above);
            let exceeded = self.bounds[i].as_ref().is_some_and(|b| BigUint::from(count) > *b);
            if exceeded && !self.is_forbidden(&above) {
                self.violations.push(BoundViolation { level: i, above, count, stage });
            }
        }
        Ok(true)
    }

    /// Registered strings of length `l_i` extending `sigma`.
    pub fn count_above(&self, i: usize, sigma: &BinaryString) -> usize {
        self.by_level.get(i).map_or(0, |set| set.iter().filter(|s| sigma.is_prefix_of(s)).count())
    }

    pub fn is_forbidden(&self, sigma: &BinaryString) -> bool {
        self.entries.contains_key(sigma)
    }

    /// Some registered string that is a prefix of (or equal to) `sigma`.
    pub fn forbidden_prefix_of(&self, sigma: &BinaryString) -> Option<&ForbiddenEntry> {
        self.lengths
            .iter()
            .take_while(|&&len| len <= sigma.len())
            .find_map(|&len| self.entries.get(&sigma.prefix(len)))
    }

    /// Registered strings of exactly `len` bits.
    pub fn strings_of_len(&self, len: usize) -> impl Iterator<Item = &BinaryString> {
        let level = self.lengths.iter().position(|&l| l == len);
        level.into_iter().flat_map(move |i| self.by_level[i].iter())
    }

    pub fn entries(&self) -> impl Iterator<Item = &ForbiddenEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn violations(&self) -> &[BoundViolation] {
        &self.violations
    }
}

/// Gap `target_len − |base|` above which [`maximin_select`] stops enumerating.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MaximinChoice {
    pub string: BinaryString,
    /// `min_μ d(ρ, μ)` over forbidden strings of the target length; `None` if there are none.
    pub distance: Option<usize>,
}

fn check_args(base: &BinaryString, target_len: usize) -> Result<()> {
    if target_len <= base.len() {
        return Err(Error::LengthMismatch { left: base.len(), right: target_len });
    }
    Ok(())
}

fn eligible(s: &BinaryString, visited: &BTreeSet<BinaryString>, require_unvisited: bool) -> bool {
    !(require_unvisited && visited.contains(s))
}

/// Among strings of length `target_len` extending `base` (and not visited,
/// if required), picks one whose distance to the nearest forbidden string
/// of that length is largest; ties go to the lex-least.
pub fn maximin_select(
    reg: &ForbiddenRegistry,
    base: &BinaryString,
    target_len: usize,
    visited: &BTreeSet<BinaryString>,
    require_unvisited: bool,
) -> Result<MaximinChoice> {
    maximin_select_with_cap(reg, base, target_len, visited, require_unvisited, DEFAULT_ENUMERATION_CAP)
}

pub fn maximin_select_with_cap(
    reg: &ForbiddenRegistry,
    base: &BinaryString,
    target_len: usize,
    visited: &BTreeSet<BinaryString>,
    require_unvisited: bool,
    cap: usize,
) -> Result<MaximinChoice> {
    check_args(base, target_len)?;
    let forbidden: Vec<&BinaryString> = reg.strings_of_len(target_len).collect();
    if target_len - base.len() <= cap {
        maximin_enumerate(&forbidden, base, target_len, visited, require_unvisited)
    } else {
        maximin_pruned(&forbidden, base, target_len, visited, require_unvisited)
    }
}

/// Exhaustive variant: scores all `2^{target_len − |base|}` candidates.
pub fn maximin_enumerate(
    forbidden: &[&BinaryString],
    base: &BinaryString,
    target_len: usize,
    visited: &BTreeSet<BinaryString>,
    require_unvisited: bool,
) -> Result<MaximinChoice> {
    check_args(base, target_len)?;
    let mut best: Option<MaximinChoice> = None;
    for tail in BinaryString::all_of_length(target_len - base.len()) {
        let rho = base.concat(&tail);
        if !eligible(&rho, visited, require_unvisited) {
            continue;
        }
        let distance = forbidden.iter().map(|mu| target_len - rho.common_prefix_len(mu)).min();
        let better = match &best {
            None => true,
            Some(b) => distance.unwrap_or(usize::MAX) > b.distance.unwrap_or(usize::MAX),
        };
        if better {
            best = Some(MaximinChoice { string: rho, distance });
        }
    }
    best.ok_or_else(|| Error::ConeExhausted { base: base.clone(), target_len })
}

/// Prefix-tree variant. A candidate's distance is `target_len − |v|` where
/// `v` is its longest prefix shared with a forbidden string, so candidates
/// are scanned cone by cone: off-trie children `v^c` by `|v|` ascending,
/// then lex.
pub fn maximin_pruned(
    forbidden: &[&BinaryString],
    base: &BinaryString,
    target_len: usize,
    visited: &BTreeSet<BinaryString>,
    require_unvisited: bool,
) -> Result<MaximinChoice> {
    check_args(base, target_len)?;
    let excluded: Vec<&BinaryString> = if require_unvisited {
        visited.iter().filter(|v| v.len() == target_len && base.is_prefix_of(v)).collect()
    } else {
        Vec::new()
    };
    let in_cone: BTreeSet<&BinaryString> = forbidden.iter().copied().filter(|mu| base.is_prefix_of(mu)).collect();
    let distance_to = |rho: &BinaryString| forbidden.iter().map(|mu| target_len - rho.common_prefix_len(mu)).min();
    if in_cone.is_empty() {
        let rho = least_in_cone(base, target_len, &excluded)
            .ok_or_else(|| Error::ConeExhausted { base: base.clone(), target_len })?;
        let distance = distance_to(&rho);
        return Ok(MaximinChoice { string: rho, distance });
    }
    // Trie nodes by depth: prefixes of in-cone forbidden strings.
    let mut layer: BTreeSet<BinaryString> = BTreeSet::from([base.clone()]);
    for depth in base.len()..target_len {
        let mut next = BTreeSet::new();
        for v in &layer {
            for bit in [0u8, 1] {
                let c = v.child(bit);
                let on_trie = in_cone.iter().any(|mu| c.is_prefix_of(mu));
                if on_trie {
                    next.insert(c);
                } else if let Some(rho) = least_in_cone(&c, target_len, &excluded) {
                    return Ok(MaximinChoice { string: rho, distance: Some(target_len - depth) });
                }
            }
        }
        layer = next;
    }
    let rho = layer
        .into_iter()
        .find(|mu| !excluded.contains(&mu))
        .ok_or_else(|| Error::ConeExhausted { base: base.clone(), target_len })?;
    Ok(MaximinChoice { string: rho, distance: Some(0) })
}

/// Lex-least string of length `target_len` extending `cone` outside `excluded`.
fn least_in_cone(cone: &BinaryString, target_len: usize, excluded: &[&BinaryString]) -> Option<BinaryString> {
    let inside: Vec<&BinaryString> = excluded.iter().copied().filter(|x| cone.is_prefix_of(x)).collect();
    let height = target_len - cone.len();
    if height < 64 && inside.len() as u64 >= 1u64 << height {
        return None;
    }
    if inside.is_empty() || cone.len() == target_len {
        return if inside.is_empty() { Some(cone.concat(&BinaryString::repeat(0, height))) } else { None };
    }
    least_in_cone(&cone.child(0), target_len, &inside).or_else(|| least_in_cone(&cone.child(1), target_len, &inside))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BinaryString {
        s.parse().unwrap()
    }

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn bound_examples() {
        assert_eq!(forbidden_bound(0, Variant::Plain).unwrap(), big(1));
        assert_eq!(forbidden_bound(2, Variant::Plain).unwrap(), big(9));
        assert_eq!(forbidden_bound(1, Variant::Coding).unwrap(), big(8));
        assert!(matches!(forbidden_bound(0, Variant::Pivr), Err(Error::Unsupported(_))));
    }

    #[test]
    fn move_bound_examples() {
        assert_eq!(move_bound(&big(0)), 0);
        assert_eq!(move_bound(&big(1)), 1);
        assert_eq!(move_bound(&big(2)), 2);
        assert_eq!(move_bound(&big(6)), 3);
        for a in 0..12u64 {
            for m in 0..40u64 {
                assert_eq!(move_bound_scaled(&big(a), &big(m)), big(move_bound(&big(m << a))), "a={a} m={m}");
            }
        }
    }

    #[test]
    fn gap_examples() {
        assert_eq!(gap_exponent(&big(1)), 0);
        assert_eq!(gap_exponent(&big(3)), 2);
        assert_eq!(gap_exponent(&big(9)), 4);
        assert_eq!(gap_exponent(&big(8)), 3);
    }

    #[test]
    fn plain_levels_by_hand() {
        let t = build_levels(Variant::Plain, &[1], 3).unwrap();
        assert_eq!(t.l, vec![big(0), big(3), big(24), big(232)]);
        assert_eq!(t.d, vec![big(0), big(1), big(4), big(13)]);
        assert_eq!(t.intermediate[1], vec![big(0), big(2)]);
        assert_eq!(t.intermediate[2], vec![big(5), big(11), big(23)]);
        assert_eq!(t.intermediate[3], vec![big(28), big(57), big(115), big(231)]);
        assert_eq!(t.f, vec![Some(big(1)), Some(big(3)), Some(big(9))]);
    }

    #[test]
    fn pivr_levels() {
        let t = build_levels(Variant::Pivr, &[1], 2).unwrap();
        assert_eq!(t.l[1], big(5));
        assert_eq!(t.d[1], big(160));
        assert_eq!(t.intermediate[2][0], big(165));
        assert_eq!(t.f[1], Some(BigUint::one() << 160u32));
        assert_eq!(t.d[2], (BigUint::one() << t.l[2].to_u64().unwrap()) * &t.l[2]);
        assert!(matches!(build_levels(Variant::Pivr, &[1], 3), Err(Error::LevelOverflow { index: 3 })));
    }

    #[test]
    fn coding_levels_increase() {
        let t = build_levels(Variant::Coding, &[3, 1], 4).unwrap();
        assert!(t.l.windows(2).all(|w| w[0] < w[1]));
        assert!(t.d.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(t.d[1], big(4));
    }

    #[test]
    fn json_shape() {
        let t = build_levels(Variant::Plain, &[1], 2).unwrap();
        let j = t.to_json();
        assert_eq!(j["l"], json!([0, 3, 24]));
        assert_eq!(j["d"], json!([0, 1, 4]));
        assert_eq!(j["variant"], "plain");
        let p = build_levels(Variant::Pivr, &[1], 2).unwrap().to_json();
        assert!(p["d"][2].is_string());
    }

    fn registry() -> ForbiddenRegistry {
        ForbiddenRegistry::new(&build_levels(Variant::Plain, &[1], 3).unwrap())
    }

    #[test]
    fn registry_examples() {
        let mut reg = registry();
        let s = bs("101");
        assert!(reg.register(1, s.clone(), 0, "test").unwrap());
        assert_eq!(reg.count_above(1, &bs("")), 1);
        assert!(!reg.register(1, s.clone(), 4, "again").unwrap());
        assert_eq!(reg.len(), 1);
        assert!(matches!(reg.register(1, bs("10"), 0, "short"), Err(Error::LengthMismatch { .. })));
        // f_1 = 1, so a second level-1 string above λ exceeds the bound.
        reg.register(1, bs("000"), 1, "test").unwrap();
        assert_eq!(reg.violations().len(), 1);
        let long = bs("101").concat(&BinaryString::repeat(0, 30));
        assert_eq!(reg.forbidden_prefix_of(&long).map(|e| e.string.clone()), Some(s));
    }

    #[test]
    fn maximin_examples() {
        let mut reg = registry();
        let none = BTreeSet::new();
        let c = maximin_select(&reg, &bs("1"), 3, &none, false).unwrap();
        assert_eq!(c, MaximinChoice { string: bs("100"), distance: None });
        reg.register(1, bs("111"), 0, "test").unwrap();
        let c = maximin_select(&reg, &bs("1"), 3, &none, false).unwrap();
        assert_eq!(c, MaximinChoice { string: bs("100"), distance: Some(2) });
        let forb: Vec<&BinaryString> = reg.strings_of_len(3).collect();
        assert_eq!(maximin_pruned(&forb, &bs("1"), 3, &none, false).unwrap(), c);
        let all: BTreeSet<_> = ["100", "101", "110", "111"].iter().map(|s| bs(s)).collect();
        assert!(matches!(maximin_select(&reg, &bs("1"), 3, &all, true), Err(Error::ConeExhausted { .. })));
        let most: BTreeSet<_> = ["100", "101", "110"].iter().map(|s| bs(s)).collect();
        assert_eq!(maximin_select(&reg, &bs("1"), 3, &most, true).unwrap().string, bs("111"));
        assert_eq!(maximin_pruned(&forb, &bs("1"), 3, &most, true).unwrap().string, bs("111"));
    }
}
