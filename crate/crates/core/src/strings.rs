//! Finite binary strings and eventually-constant infinite sequences.
//!
//! Strings are ordered first by length and then lexicographically, which
//! is the order every search in this crate uses to pick "the least" string.

use crate::error::{Error, Result};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

/// A finite word over {0,1}. The empty string is a valid value.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct BinaryString {
    bits: Vec<bool>,
}

impl BinaryString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self { bits: Vec::with_capacity(n) }
    }

    pub fn from_bits<I: IntoIterator<Item = u8>>(bits: I) -> Self {
        Self { bits: bits.into_iter().map(|b| b != 0).collect() }
    }

    /// `bit` repeated `n` times.
    pub fn repeat(bit: u8, n: usize) -> Self {
        Self { bits: vec![bit != 0; n] }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Bit at position `i` (0-based). Panics when out of range.
    pub fn bit(&self, i: usize) -> u8 {
        self.bits[i] as u8
    }

    pub fn last(&self) -> Option<u8> {
        self.bits.last().map(|&b| b as u8)
    }

    pub fn bits(&self) -> impl ExactSizeIterator<Item = u8> + '_ {
        self.bits.iter().map(|&b| b as u8)
    }

    pub fn push(&mut self, bit: u8) {
        self.bits.push(bit != 0);
    }

    pub fn pop(&mut self) -> Option<u8> {
        self.bits.pop().map(|b| b as u8)
    }

    pub fn truncate(&mut self, n: usize) {
        self.bits.truncate(n);
    }

    pub fn extend_from(&mut self, other: &BinaryString) {
        self.bits.extend_from_slice(&other.bits);
    }

    /// `self ^ bit`.
    pub fn child(&self, bit: u8) -> Self {
        let mut c = Self::with_capacity(self.len() + 1);
        c.bits.extend_from_slice(&self.bits);
        c.bits.push(bit != 0);
        c
    }

    /// `self ^ other`.
    pub fn concat(&self, other: &BinaryString) -> Self {
        let mut c = Self::with_capacity(self.len() + other.len());
        c.bits.extend_from_slice(&self.bits);
        c.bits.extend_from_slice(&other.bits);
        c
    }

    /// `self ↾ n`; saturates at the full string.
    pub fn prefix(&self, n: usize) -> Self {
        Self { bits: self.bits[..n.min(self.len())].to_vec() }
    }

    pub fn is_prefix_of(&self, other: &BinaryString) -> bool {
        self.len() <= other.len() && other.bits[..self.len()] == self.bits[..]
    }

    pub fn comparable(&self, other: &BinaryString) -> bool {
        self.is_prefix_of(other) || other.is_prefix_of(self)
    }

    pub fn common_prefix_len(&self, other: &BinaryString) -> usize {
        self.bits.iter().zip(&other.bits).take_while(|(a, b)| a == b).count()
    }

    /// The string with its last bit flipped.
    pub fn sibling(&self) -> Result<Self> {
        let mut s = self.clone();
        match s.bits.last_mut() {
            Some(b) => {
                *b = !*b;
                Ok(s)
            }
            None => Err(Error::NoSibling),
        }
    }

    /// Next string of the same length in lexicographic order, if any.
    pub fn lex_successor(&self) -> Option<Self> {
        let mut s = self.clone();
        for i in (0..s.len()).rev() {
            if s.bits[i] {
                s.bits[i] = false;
            } else {
                s.bits[i] = true;
                return Some(s);
            }
        }
        None
    }

    /// All strings of length `n`, in lexicographic order.
    pub fn all_of_length(n: usize) -> impl Iterator<Item = BinaryString> {
        let mut next = Some(BinaryString::repeat(0, n));
        std::iter::from_fn(move || {
            let cur = next.take()?;
            next = cur.lex_successor();
            Some(cur)
        })
    }
}

impl Ord for BinaryString {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| self.bits.cmp(&other.bits))
    }
}

impl PartialOrd for BinaryString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BinaryString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("λ");
        }
        let s: String = self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
        f.write_str(&s)
    }
}

impl fmt::Debug for BinaryString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{}\"", self.to_text())
    }
}

impl BinaryString {
    /// ASCII "0"/"1" form; the empty string is "".
    pub fn to_text(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl FromStr for BinaryString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidBit(other)),
            })
            .collect::<Result<Vec<_>>>()
            .map(|bits| Self { bits })
    }
}

impl Serialize for BinaryString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_text())
    }
}

impl<'de> Deserialize<'de> for BinaryString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `d(α, β)`: common length minus the length of the longest common prefix.
pub fn distance(a: &BinaryString, b: &BinaryString) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    Ok(a.len() - a.common_prefix_len(b))
}

/// Minimum under (length, lexicographic) order.
pub fn least_string<'a, I>(candidates: I) -> Result<BinaryString>
where
    I: IntoIterator<Item = &'a BinaryString>,
{
    candidates.into_iter().min().cloned().ok_or(Error::EmptyCandidates)
}

/// An infinite sequence `stem ^ tail^ω`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TailSequence {
    pub stem: BinaryString,
    #[serde(with = "bit_serde")]
    pub tail: u8,
}

impl TailSequence {
    pub fn new(stem: BinaryString, tail: u8) -> Self {
        Self { stem, tail: tail & 1 }
    }

    /// `tail^ω`.
    pub fn constant(tail: u8) -> Self {
        Self::new(BinaryString::new(), tail)
    }

    pub fn bit(&self, i: usize) -> u8 {
        if i < self.stem.len() {
            self.stem.bit(i)
        } else {
            self.tail
        }
    }

    /// `X ↾ n`.
    pub fn prefix(&self, n: usize) -> BinaryString {
        let mut p = self.stem.prefix(n);
        while p.len() < n {
            p.push(self.tail);
        }
        p
    }

    /// Whether the finite string `s` is an initial segment of this sequence.
    pub fn extends(&self, s: &BinaryString) -> bool {
        let k = s.len().min(self.stem.len());
        s.prefix(k).is_prefix_of(&self.stem) && (k..s.len()).all(|i| s.bit(i) == self.tail)
    }
}

mod bit_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &u8, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*b)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u8, D::Error> {
        match u8::deserialize(d)? {
            b @ (0 | 1) => Ok(b),
            other => Err(serde::de::Error::custom(format!("tail must be 0 or 1, got {other}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bs(s: &str) -> BinaryString {
        s.parse().unwrap()
    }

    #[test]
    fn sibling_flips_last_bit() {
        assert_eq!(bs("0").sibling().unwrap(), bs("1"));
        assert_eq!(bs("10").sibling().unwrap(), bs("11"));
        assert_eq!(bs("011").sibling().unwrap(), bs("010"));
        assert!(matches!(BinaryString::new().sibling(), Err(Error::NoSibling)));
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(&bs("0101"), &bs("0111")).unwrap(), 2);
        assert_eq!(distance(&bs("0110"), &bs("0110")).unwrap(), 0);
        assert_eq!(distance(&bs("000"), &bs("111")).unwrap(), 3);
        assert!(matches!(
            distance(&bs("0"), &bs("00")),
            Err(Error::LengthMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn least_string_examples() {
        assert_eq!(least_string(&[bs("10"), bs("0")]).unwrap(), bs("0"));
        assert_eq!(least_string(&[bs("01"), bs("10")]).unwrap(), bs("01"));
        assert_eq!(least_string(&[bs("110"), bs("111"), bs("10")]).unwrap(), bs("10"));
        assert!(matches!(least_string(&[]), Err(Error::EmptyCandidates)));
    }

    #[test]
    fn prefix_examples() {
        assert_eq!(TailSequence::new(bs("10"), 1).prefix(4), bs("1011"));
        assert_eq!(TailSequence::new(bs(""), 1).prefix(3), bs("111"));
        assert_eq!(TailSequence::new(bs("01"), 1).prefix(1), bs("0"));
    }

    #[test]
    fn serde_forms() {
        let x = TailSequence::new(bs("0101"), 1);
        let j = serde_json::to_string(&x).unwrap();
        assert_eq!(j, r#"{"stem":"0101","tail":1}"#);
        assert_eq!(serde_json::from_str::<TailSequence>(&j).unwrap(), x);
        assert!(serde_json::from_str::<TailSequence>(r#"{"stem":"0","tail":2}"#).is_err());
        assert!(serde_json::from_str::<BinaryString>(r#""012""#).is_err());
    }

    #[test]
    fn all_of_length_is_lex_ordered() {
        let v: Vec<_> = BinaryString::all_of_length(2).map(|s| s.to_text()).collect();
        assert_eq!(v, ["00", "01", "10", "11"]);
        assert_eq!(BinaryString::all_of_length(0).count(), 1);
    }

    fn arb_string(max: usize) -> impl Strategy<Value = BinaryString> {
        proptest::collection::vec(0u8..2, 0..max).prop_map(BinaryString::from_bits)
    }

    proptest! {
        #[test]
        fn sibling_is_involution(s in arb_string(24).prop_filter("nonempty", |s| !s.is_empty())) {
            let t = s.sibling().unwrap();
            prop_assert_eq!(t.sibling().unwrap(), s.clone());
            prop_assert_eq!(t.common_prefix_len(&s), s.len() - 1);
        }

        #[test]
        fn distance_is_a_metric(bits in proptest::collection::vec((0u8..2, 0u8..2, 0u8..2), 0..16)) {
            let a = BinaryString::from_bits(bits.iter().map(|t| t.0));
            let b = BinaryString::from_bits(bits.iter().map(|t| t.1));
            let c = BinaryString::from_bits(bits.iter().map(|t| t.2));
            let ab = distance(&a, &b).unwrap();
            prop_assert_eq!(ab, distance(&b, &a).unwrap());
            prop_assert_eq!(ab == 0, a == b);
            prop_assert!(ab <= a.len());
            prop_assert!(ab <= distance(&a, &c).unwrap() + distance(&c, &b).unwrap());
        }

        #[test]
        fn least_string_removal_increases(set in proptest::collection::btree_set(arb_string(6), 2..12)) {
            let v: Vec<_> = set.iter().cloned().collect();
            let first = least_string(&v).unwrap();
            let rest: Vec<_> = v.iter().filter(|s| **s != first).cloned().collect();
            prop_assert!(least_string(&rest).unwrap() > first);
        }

        #[test]
        fn prefix_is_monotone(stem in arb_string(10), tail in 0u8..2, n in 0usize..20, m in 0usize..20) {
            let x = TailSequence::new(stem, tail);
            let (n, m) = (n.min(m), n.max(m));
            prop_assert!(x.prefix(n).is_prefix_of(&x.prefix(m)));
            prop_assert!(x.extends(&x.prefix(m)));
        }
    }
}
