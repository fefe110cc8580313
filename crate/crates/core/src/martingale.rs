//! Integer-valued (partial) martingales.
//!
//! A martingale is stored as a wager per node rather than a value per node:
//! the signed wager `w` at `σ` sets `value(σ1) = value(σ) + w` and
//! `value(σ0) = value(σ) − w`, so the fairness identity holds by
//! construction. A node without a wager is a leaf of the domain; partiality
//! is absence, never a sentinel value.

use crate::error::{Error, Result};
use crate::strings::BinaryString;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub type Capital = i64;

/// Values along a path, stopping at the first prefix whose value is undefined.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Walk {
    /// `values[j]` is the value at `path ↾ j`.
    pub values: Vec<Capital>,
    /// Whether every prefix of the path, including the path itself, is defined.
    pub complete: bool,
}

impl Walk {
    pub fn last(&self) -> Capital {
        *self.values.last().expect("root value is always defined")
    }

    /// Longest prefix length with a defined value.
    pub fn defined_len(&self) -> usize {
        self.values.len() - 1
    }
}

pub(crate) fn apply(value: Capital, wager: Capital, bit: u8, at: &BinaryString) -> Result<Capital> {
    let next = if bit == 1 { value.checked_add(wager) } else { value.checked_sub(wager) };
    next.ok_or_else(|| Error::CapitalOverflow { at: at.clone() })
}

/// Signed wager convention helper: stake on `side`.
pub fn signed(side: u8, stake: Capital) -> Capital {
    if side == 1 {
        stake
    } else {
        -stake
    }
}

/// A (possibly partial) integer-valued martingale.
pub trait Martingale {
    fn initial_capital(&self) -> Capital;

    /// Signed wager at `node`; `None` when the martingale is undefined beyond `node`.
    fn wager(&self, node: &BinaryString) -> Option<Capital>;

    fn walk(&self, path: &BinaryString) -> Result<Walk> {
        let mut values = Vec::with_capacity(path.len() + 1);
        let mut v = self.initial_capital();
        values.push(v);
        let mut node = BinaryString::with_capacity(path.len());
        for bit in path.bits() {
            let Some(w) = self.wager(&node) else {
                return Ok(Walk { values, complete: false });
            };
            node.push(bit);
            v = apply(v, w, bit, &node)?;
            values.push(v);
        }
        Ok(Walk { values, complete: true })
    }
}

impl<M: Martingale + ?Sized> Martingale for &M {
    fn initial_capital(&self) -> Capital {
        (**self).initial_capital()
    }
    fn wager(&self, node: &BinaryString) -> Option<Capital> {
        (**self).wager(node)
    }
    fn walk(&self, path: &BinaryString) -> Result<Walk> {
        (**self).walk(path)
    }
}

/// Value at `σ`; errs when some proper prefix of `σ` carries no wager.
pub fn evaluate<M: Martingale + ?Sized>(m: &M, sigma: &BinaryString) -> Result<Capital> {
    let w = m.walk(sigma)?;
    if w.complete {
        Ok(w.last())
    } else {
        Err(Error::Undefined { at: sigma.clone() })
    }
}

/// `max_{n ≤ |σ|} m(σ ↾ n)`.
pub fn max_capital_along<M: Martingale + ?Sized>(m: &M, sigma: &BinaryString) -> Result<Capital> {
    let w = m.walk(sigma)?;
    if !w.complete {
        return Err(Error::Undefined { at: sigma.prefix(w.defined_len() + 1) });
    }
    Ok(*w.values.iter().max().expect("nonempty"))
}

/// An explicit finite wager table.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MartingaleTable {
    pub initial_capital: Capital,
    pub wagers: BTreeMap<BinaryString, Capital>,
}

impl MartingaleTable {
    pub fn new(initial_capital: Capital) -> Self {
        Self { initial_capital, wagers: BTreeMap::new() }
    }

    pub fn with_wager(mut self, node: BinaryString, wager: Capital) -> Self {
        self.wagers.insert(node, wager);
        self
    }

    /// Domain of values: the root plus both children of every wagered node.
    pub fn domain(&self) -> BTreeSet<BinaryString> {
        let mut d = BTreeSet::new();
        d.insert(BinaryString::new());
        for node in self.wagers.keys() {
            d.insert(node.child(0));
            d.insert(node.child(1));
        }
        d
    }

    /// Whether every wagered node at length < `depth` has both children wagered,
    /// i.e. the table is total up to `depth`.
    pub fn is_total_to(&self, depth: usize) -> bool {
        (0..depth).all(|len| self.wagers.keys().filter(|k| k.len() == len).count() == 1usize << len)
    }
}

impl Martingale for MartingaleTable {
    fn initial_capital(&self) -> Capital {
        self.initial_capital
    }
    fn wager(&self, node: &BinaryString) -> Option<Capital> {
        self.wagers.get(node).copied()
    }
}

/// Restriction on wager magnitudes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ValueConstraint {
    #[default]
    Integer,
    /// Every |wager| lies in the finite set.
    #[serde(rename = "F")]
    Finite {
        #[serde(rename = "F")]
        allowed: BTreeSet<Capital>,
    },
    /// Every |wager| is `a` or 0.
    Single { a: Capital },
}

impl ValueConstraint {
    pub fn admits(&self, stake: Capital) -> bool {
        match self {
            ValueConstraint::Integer => true,
            ValueConstraint::Finite { allowed } => allowed.contains(&stake),
            ValueConstraint::Single { a } => stake == *a || stake == 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    NegativeValue { node: BinaryString, value: Capital },
    NotDownwardClosed { node: BinaryString },
    WagerOutsideConstraint { node: BinaryString, stake: Capital },
    WagerExceedsCapital { node: BinaryString, stake: Capital, capital: Capital },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeValue { node, value } => write!(f, "value {value} at {node}"),
            Violation::NotDownwardClosed { node } => {
                write!(f, "wager at {node} but its value is undefined (domain not downward closed)")
            }
            Violation::WagerOutsideConstraint { node, stake } => {
                write!(f, "wager {stake} at {node} not admitted by the constraint")
            }
            Violation::WagerExceedsCapital { node, stake, capital } => {
                write!(f, "wager {stake} at {node} exceeds capital {capital}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks non-negativity, downward closure and the value constraint for
/// every wagered node of length `< depth`.
pub fn validate(m: &MartingaleTable, constraint: &ValueConstraint, depth: usize) -> ValidationReport {
    let mut violations = Vec::new();
    if m.initial_capital < 0 {
        violations.push(Violation::NegativeValue { node: BinaryString::new(), value: m.initial_capital });
    }
    for (node, &w) in m.wagers.iter().filter(|(n, _)| n.len() < depth) {
        let stake = w.abs();
        if !constraint.admits(stake) {
            violations.push(Violation::WagerOutsideConstraint { node: node.clone(), stake });
        }
        let value = match m.walk(node) {
            Ok(walk) if walk.complete => walk.last(),
            Ok(_) => {
                violations.push(Violation::NotDownwardClosed { node: node.clone() });
                continue;
            }
            Err(_) => continue,
        };
        if stake > value && value >= 0 {
            violations.push(Violation::WagerExceedsCapital { node: node.clone(), stake, capital: value });
            let losing = node.child(if w > 0 { 0 } else { 1 });
            violations.push(Violation::NegativeValue { node: losing, value: value - stake });
        }
    }
    ValidationReport { violations }
}

/// A stage-indexed approximation `(m_s)`. Once a wager is visible at some
/// stage it is visible, unchanged, at every later stage.
pub trait StagedMartingale {
    fn initial_capital(&self) -> Capital;

    fn wager_at(&self, stage: u64, node: &BinaryString) -> Option<Capital>;

    /// Largest `L` such that every string of length `≤ L` has a value at `stage`.
    fn converged_length(&self, stage: u64) -> usize;

    /// Eventual wager at `node` (`None` if it is never defined).
    fn limit_wager(&self, node: &BinaryString) -> Option<Capital>;

    fn walk_at(&self, stage: u64, path: &BinaryString) -> Result<Walk> {
        AtStage::new(self, stage).default_walk(path)
    }
}

/// The stage-`s` view of a staged martingale.
pub struct AtStage<'a, S: ?Sized> {
    inner: &'a S,
    stage: u64,
}

impl<'a, S: StagedMartingale + ?Sized> AtStage<'a, S> {
    pub fn new(inner: &'a S, stage: u64) -> Self {
        Self { inner, stage }
    }

    fn default_walk(&self, path: &BinaryString) -> Result<Walk> {
        let mut values = vec![self.inner.initial_capital()];
        let mut v = values[0];
        let mut node = BinaryString::with_capacity(path.len());
        for bit in path.bits() {
            let Some(w) = self.inner.wager_at(self.stage, &node) else {
                return Ok(Walk { values, complete: false });
            };
            node.push(bit);
            v = apply(v, w, bit, &node)?;
            values.push(v);
        }
        Ok(Walk { values, complete: true })
    }
}

impl<S: StagedMartingale + ?Sized> Martingale for AtStage<'_, S> {
    fn initial_capital(&self) -> Capital {
        self.inner.initial_capital()
    }
    fn wager(&self, node: &BinaryString) -> Option<Capital> {
        self.inner.wager_at(self.stage, node)
    }
    fn walk(&self, path: &BinaryString) -> Result<Walk> {
        self.inner.walk_at(self.stage, path)
    }
}

/// The limit view of a staged martingale.
pub struct Limit<'a, S: ?Sized>(pub &'a S);

impl<S: StagedMartingale + ?Sized> Martingale for Limit<'_, S> {
    fn initial_capital(&self) -> Capital {
        self.0.initial_capital()
    }
    fn wager(&self, node: &BinaryString) -> Option<Capital> {
        self.0.limit_wager(node)
    }
}

/// The stage-`s` table restricted to wagered nodes of length `< max_depth`.
pub fn snapshot<S: StagedMartingale + ?Sized>(sm: &S, stage: u64, max_depth: usize) -> Result<MartingaleTable> {
    let mut table = MartingaleTable::new(sm.initial_capital());
    let mut stack = vec![BinaryString::new()];
    while let Some(node) = stack.pop() {
        if node.len() >= max_depth {
            continue;
        }
        if let Some(w) = sm.wager_at(stage, &node) {
            stack.push(node.child(1));
            stack.push(node.child(0));
            table.wagers.insert(node, w);
        }
    }
    // Sanity: the walk of every wagered node must stay representable.
    for node in table.wagers.keys() {
        sm.walk_at(stage, node).map_err(|e| Error::Program { stage, detail: e.to_string() })?;
    }
    Ok(table)
}

/// A finite table whose wagers appear at declared stages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StagedTable {
    capital: Capital,
    entries: BTreeMap<BinaryString, (Capital, u64)>,
    /// `full_by[j]`: stage by which every node of length `j` is wagered
    /// (`u64::MAX` if never), running max over `j`.
    full_by: Vec<u64>,
}

impl StagedTable {
    pub fn new(capital: Capital, entries: BTreeMap<BinaryString, (Capital, u64)>) -> Self {
        let max_len = entries.keys().map(|k| k.len()).max().map_or(0, |m| m + 1);
        let mut full_by = Vec::with_capacity(max_len);
        let mut running = 0u64;
        for len in 0..max_len {
            let at_len: Vec<u64> = entries.iter().filter(|(k, _)| k.len() == len).map(|(_, v)| v.1).collect();
            let full = if len < 63 && at_len.len() as u64 == 1u64 << len {
                at_len.into_iter().max().unwrap_or(0)
            } else {
                u64::MAX
            };
            running = running.max(full);
            full_by.push(running);
        }
        Self { capital, entries, full_by }
    }

    /// A table whose wagers are all visible from stage 0.
    pub fn from_table(table: &MartingaleTable) -> Self {
        Self::new(table.initial_capital, table.wagers.iter().map(|(k, &w)| (k.clone(), (w, 0))).collect())
    }

    pub fn entries(&self) -> &BTreeMap<BinaryString, (Capital, u64)> {
        &self.entries
    }

    pub fn limit_table(&self) -> MartingaleTable {
        MartingaleTable {
            initial_capital: self.capital,
            wagers: self.entries.iter().map(|(k, v)| (k.clone(), v.0)).collect(),
        }
    }
}

impl StagedMartingale for StagedTable {
    fn initial_capital(&self) -> Capital {
        self.capital
    }
    fn wager_at(&self, stage: u64, node: &BinaryString) -> Option<Capital> {
        self.entries.get(node).filter(|(_, at)| *at <= stage).map(|(w, _)| *w)
    }
    fn converged_length(&self, stage: u64) -> usize {
        self.full_by.iter().take_while(|&&s| s <= stage).count()
    }
    fn limit_wager(&self, node: &BinaryString) -> Option<Capital> {
        self.entries.get(node).map(|(w, _)| *w)
    }
}

/// Built-in strategies. Each is total in the limit; at stage `s` it has
/// computed its wagers on strings of length `< s`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Builtin {
    /// Stake `min(2^losses, capital)` on `bit`; the schedule resets after a win.
    Doubling { bit: u8, capital: Capital },
    /// Stake `stake` on `bit` while capital allows it, neutral afterwards.
    ConstantBet { bit: u8, stake: Capital, capital: Capital },
    /// Stake `min(stake, capital)` on `bit` at every node.
    BetOnBit { bit: u8, stake: Capital, capital: Capital },
}

#[derive(Clone, Copy)]
struct BuiltinState {
    capital: Capital,
    losses: u32,
}

impl Builtin {
    fn capital(&self) -> Capital {
        match *self {
            Builtin::Doubling { capital, .. }
            | Builtin::ConstantBet { capital, .. }
            | Builtin::BetOnBit { capital, .. } => capital,
        }
    }

    fn start(&self) -> BuiltinState {
        BuiltinState { capital: self.capital(), losses: 0 }
    }

    fn stake(&self, st: BuiltinState) -> (u8, Capital) {
        let cap = st.capital.max(0);
        match *self {
            Builtin::Doubling { bit, .. } => {
                let scheduled = 1i64.checked_shl(st.losses).filter(|v| *v > 0).unwrap_or(Capital::MAX);
                (bit, scheduled.min(cap))
            }
            Builtin::ConstantBet { bit, stake, .. } => (bit, if cap >= stake { stake } else { 0 }),
            Builtin::BetOnBit { bit, stake, .. } => (bit, stake.min(cap)),
        }
    }

    fn step(&self, st: BuiltinState, observed: u8) -> BuiltinState {
        let (bit, stake) = self.stake(st);
        if stake == 0 {
            return st;
        }
        if observed == bit {
            BuiltinState { capital: st.capital + stake, losses: 0 }
        } else {
            BuiltinState { capital: st.capital - stake, losses: st.losses.saturating_add(1) }
        }
    }

    fn limit_wager(&self, node: &BinaryString) -> Capital {
        let st = node.bits().fold(self.start(), |st, b| self.step(st, b));
        let (bit, stake) = self.stake(st);
        signed(bit, stake)
    }

    fn walk_to(&self, path: &BinaryString, len: usize) -> Result<Walk> {
        let mut st = self.start();
        let mut values = Vec::with_capacity(len.min(path.len()) + 1);
        values.push(st.capital);
        let mut node = BinaryString::new();
        for (i, b) in path.bits().enumerate() {
            if i >= len {
                return Ok(Walk { values, complete: false });
            }
            let (_, stake) = self.stake(st);
            if stake > 0 && st.capital.checked_add(stake).is_none() {
                node = path.prefix(i + 1);
                return Err(Error::CapitalOverflow { at: node });
            }
            st = self.step(st, b);
            values.push(st.capital);
        }
        let _ = &mut node;
        Ok(Walk { values, complete: true })
    }
}

impl StagedMartingale for Builtin {
    fn initial_capital(&self) -> Capital {
        self.capital()
    }
    fn wager_at(&self, stage: u64, node: &BinaryString) -> Option<Capital> {
        ((node.len() as u64) < stage).then(|| Builtin::limit_wager(self, node))
    }
    fn converged_length(&self, stage: u64) -> usize {
        usize::try_from(stage).unwrap_or(usize::MAX)
    }
    fn limit_wager(&self, node: &BinaryString) -> Option<Capital> {
        Some(Builtin::limit_wager(self, node))
    }
    fn walk_at(&self, stage: u64, path: &BinaryString) -> Result<Walk> {
        self.walk_to(path, usize::try_from(stage).unwrap_or(usize::MAX))
    }
}

/// A roster entry: any strategy a construction may face.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Adversary {
    Table(StagedTable),
    Builtin(Builtin),
    /// Replays `inner`'s wagers `delay` stages late.
    Copycat { inner: Box<Adversary>, delay: u64 },
}

impl StagedMartingale for Adversary {
    fn initial_capital(&self) -> Capital {
        match self {
            Adversary::Table(t) => t.initial_capital(),
            Adversary::Builtin(b) => StagedMartingale::initial_capital(b),
            Adversary::Copycat { inner, .. } => inner.initial_capital(),
        }
    }
    fn wager_at(&self, stage: u64, node: &BinaryString) -> Option<Capital> {
        match self {
            Adversary::Table(t) => t.wager_at(stage, node),
            Adversary::Builtin(b) => b.wager_at(stage, node),
            Adversary::Copycat { inner, delay } => {
                stage.checked_sub(*delay).and_then(|s| inner.wager_at(s, node))
            }
        }
    }
    fn converged_length(&self, stage: u64) -> usize {
        match self {
            Adversary::Table(t) => t.converged_length(stage),
            Adversary::Builtin(b) => b.converged_length(stage),
            Adversary::Copycat { inner, delay } => stage.checked_sub(*delay).map_or(0, |s| inner.converged_length(s)),
        }
    }
    fn limit_wager(&self, node: &BinaryString) -> Option<Capital> {
        match self {
            Adversary::Table(t) => t.limit_wager(node),
            Adversary::Builtin(b) => StagedMartingale::limit_wager(b, node),
            Adversary::Copycat { inner, .. } => inner.limit_wager(node),
        }
    }
    fn walk_at(&self, stage: u64, path: &BinaryString) -> Result<Walk> {
        match self {
            Adversary::Table(t) => t.walk_at(stage, path),
            Adversary::Builtin(b) => b.walk_at(stage, path),
            Adversary::Copycat { inner, delay } => match stage.checked_sub(*delay) {
                Some(s) => inner.walk_at(s, path),
                None => Ok(Walk { values: vec![inner.initial_capital()], complete: path.is_empty() }),
            },
        }
    }
}

/// One wager line of an adversary file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WagerSpec {
    pub node: BinaryString,
    pub side: u8,
    pub stake: Capital,
    #[serde(default)]
    pub defined_at_stage: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuiltinSpec {
    pub name: String,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdversaryKind {
    Table,
    Builtin,
}

/// On-disk adversary description.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarySpec {
    #[serde(default)]
    pub id: String,
    pub kind: AdversaryKind,
    pub initial_capital: Capital,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub wagers: Vec<WagerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<BuiltinSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<ValueConstraint>,
}

impl AdversarySpec {
    pub fn builtin(id: &str, name: &str, capital: Capital, params: serde_json::Value) -> Self {
        let params = match params {
            serde_json::Value::Object(m) => m,
            _ => serde_json::Map::new(),
        };
        Self {
            id: id.to_string(),
            kind: AdversaryKind::Builtin,
            initial_capital: capital,
            wagers: Vec::new(),
            builtin: Some(BuiltinSpec { name: name.to_string(), params }),
            constraint: None,
        }
    }

    pub fn table(id: &str, capital: Capital, wagers: Vec<WagerSpec>) -> Self {
        Self {
            id: id.to_string(),
            kind: AdversaryKind::Table,
            initial_capital: capital,
            wagers,
            builtin: None,
            constraint: None,
        }
    }

    pub fn build(&self) -> Result<Adversary> {
        match self.kind {
            AdversaryKind::Table => {
                let mut entries = BTreeMap::new();
                for w in &self.wagers {
                    if w.side > 1 || w.stake < 0 {
                        return Err(Error::BadSpec(format!("bad wager at {}: side {} stake {}", w.node, w.side, w.stake)));
                    }
                    let signed = signed(w.side, w.stake);
                    if let Some(prev) = entries.insert(w.node.clone(), (signed, w.defined_at_stage)) {
                        if prev != (signed, w.defined_at_stage) {
                            return Err(Error::BadSpec(format!("conflicting wagers at {}", w.node)));
                        }
                    }
                }
                Ok(Adversary::Table(StagedTable::new(self.initial_capital, entries)))
            }
            AdversaryKind::Builtin => {
                let spec = self.builtin.as_ref().ok_or_else(|| Error::BadSpec("builtin kind without builtin block".into()))?;
                builtin(&spec.name, self.initial_capital, &spec.params)
            }
        }
    }
}

fn param_i64(params: &serde_json::Map<String, serde_json::Value>, key: &str, default: i64) -> Result<i64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v.as_i64().ok_or_else(|| Error::BadSpec(format!("param {key} must be an integer"))),
    }
}

fn param_bit(params: &serde_json::Map<String, serde_json::Value>) -> Result<u8> {
    match param_i64(params, "bit", 1)? {
        b @ (0 | 1) => Ok(b as u8),
        b => Err(Error::BadSpec(format!("param bit must be 0 or 1, got {b}"))),
    }
}

/// Instantiates a built-in strategy by name.
///
/// Parameters: `bit` (default 1) for every strategy, `stake` for
/// `constant_bet`/`bet_on_bit` (default 1), and for `copycat` the nested
/// adversary under `of` plus `delay`.
pub fn builtin(name: &str, capital: Capital, params: &serde_json::Map<String, serde_json::Value>) -> Result<Adversary> {
    if capital < 0 {
        return Err(Error::BadSpec(format!("negative initial capital {capital}")));
    }
    let stake = || -> Result<Capital> {
        let s = param_i64(params, "stake", 1)?;
        if s < 0 {
            return Err(Error::BadSpec(format!("negative stake {s}")));
        }
        Ok(s)
    };
    Ok(match name {
        "doubling" => Adversary::Builtin(Builtin::Doubling { bit: param_bit(params)?, capital }),
        "constant_bet" => Adversary::Builtin(Builtin::ConstantBet { bit: param_bit(params)?, stake: stake()?, capital }),
        "bet_on_bit" => Adversary::Builtin(Builtin::BetOnBit { bit: param_bit(params)?, stake: stake()?, capital }),
        "copycat" => {
            let of = params.get("of").ok_or_else(|| Error::BadSpec("copycat needs param `of`".into()))?;
            let inner: AdversarySpec = serde_json::from_value(of.clone())?;
            let delay = param_i64(params, "delay", 0)?;
            let delay = u64::try_from(delay).map_err(|_| Error::BadSpec("negative delay".into()))?;
            Adversary::Copycat { inner: Box::new(inner.build()?), delay }
        }
        other => return Err(Error::UnknownBuiltin(other.to_string())),
    })
}
