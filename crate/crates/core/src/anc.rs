//! The array noncomputable construction: a c.e. set `B` meeting every `W_e`
//! on some block of the very strong array, while `m_e` wins a dollar each
//! time a pair `(Γ_e, Δ_e)` looks like it reduces `B` to `A_e` and back.
//!
//! `W_e` is an explicit schedule and the functionals are finite axiom
//! tables; the engine never invents axioms.

use crate::error::{Error, Result};
use crate::fi::AuditViolation;
use crate::martingale::{Capital, Martingale};
use crate::strings::BinaryString;
use crate::trace::TraceEvent;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};

/// `min D_n = n(n+1)/2`.
pub fn block_min(n: u64) -> u64 {
    n * (n + 1) / 2
}

/// `max D_n = min D_n + n`.
pub fn block_max(n: u64) -> u64 {
    block_min(n) + n
}

pub fn block(n: u64) -> std::ops::RangeInclusive<u64> {
    block_min(n)..=block_max(n)
}

/// The block containing `x`.
pub fn block_of(x: u64) -> u64 {
    let mut n = ((2.0 * x as f64).sqrt() as u64).saturating_sub(1);
    while block_max(n) < x {
        n += 1;
    }
    while block_min(n) > x {
        n -= 1;
    }
    n
}

/// Cantor pairing `π(a, b) = (a+b)(a+b+1)/2 + b`.
pub fn cantor_pair(a: u64, b: u64) -> u64 {
    (a + b) * (a + b + 1) / 2 + b
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum AncReq {
    R(usize),
    /// `N_{e,k}`, `k ≥ 2`.
    N(usize, u64),
}

impl AncReq {
    /// `R_e ↦ 2e`, `N_{e,k} ↦ 2π(e, k−2) + 1`; smaller is stronger.
    pub fn priority(self) -> u64 {
        match self {
            AncReq::R(e) => 2 * e as u64,
            AncReq::N(e, k) => 2 * cantor_pair(e as u64, k - 2) + 1,
        }
    }
}

impl std::fmt::Display for AncReq {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AncReq::R(e) => write!(f, "R_{e}"),
            AncReq::N(e, k) => write!(f, "N_{e},{k}"),
        }
    }
}

fn oracle_prefix<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BinaryString, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Bits(BinaryString),
        Set {
            #[serde(rename = "use")]
            use_: usize,
            set: Vec<u64>,
        },
    }
    Ok(match Raw::deserialize(d)? {
        Raw::Bits(b) => b,
        Raw::Set { use_, set } => {
            if let Some(x) = set.iter().find(|&&x| x >= use_ as u64) {
                return Err(serde::de::Error::custom(format!("member {x} is not below use {use_}")));
            }
            let members: BTreeSet<u64> = set.into_iter().collect();
            BinaryString::from_bits((0..use_ as u64).map(|y| u8::from(members.contains(&y))))
        }
    })
}

/// `Φ^σ(input) = output`, usable from `stage` on; the use is `|σ|`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Axiom {
    pub input: usize,
    #[serde(deserialize_with = "oracle_prefix")]
    pub oracle_prefix: BinaryString,
    pub output: u8,
    #[serde(default)]
    pub stage: u64,
}

impl Axiom {
    pub fn new(input: usize, oracle_prefix: BinaryString, output: u8, stage: u64) -> Self {
        Self { input, oracle_prefix, output, stage }
    }
}

/// Axioms grouped by input.
#[derive(Clone, Debug, Default)]
pub struct FunctionalTable {
    by_input: BTreeMap<usize, Vec<Axiom>>,
    max_use: usize,
}

impl FunctionalTable {
    /// Rejects two axioms with comparable oracles and one input but different outputs.
    pub fn new(name: &str, axioms: &[Axiom]) -> Result<Self> {
        let mut by_input: BTreeMap<usize, Vec<Axiom>> = BTreeMap::new();
        let mut max_use = 0;
        for ax in axioms {
            if ax.output > 1 {
                return Err(Error::InvalidBit(char::from(b'0' + ax.output.min(9))));
            }
            let bucket = by_input.entry(ax.input).or_default();
            if let Some(other) = bucket
                .iter()
                .find(|o| o.output != ax.output && o.oracle_prefix.comparable(&ax.oracle_prefix))
            {
                return Err(Error::FunctionalInconsistency(format!(
                    "{name}({}) = {} via {} (stage {}) and = {} via {} (stage {})",
                    ax.input, other.output, other.oracle_prefix, other.stage, ax.output, ax.oracle_prefix, ax.stage
                )));
            }
            max_use = max_use.max(ax.oracle_prefix.len());
            bucket.push(ax.clone());
        }
        for bucket in by_input.values_mut() {
            bucket.sort_by(|a, b| (a.oracle_prefix.len(), &a.oracle_prefix).cmp(&(b.oracle_prefix.len(), &b.oracle_prefix)));
        }
        Ok(Self { by_input, max_use })
    }

    /// Longest oracle any axiom reads.
    pub fn max_use(&self) -> usize {
        self.max_use
    }

    pub fn max_input(&self) -> Option<usize> {
        self.by_input.keys().next_back().copied()
    }

    /// `(output, use)` of the shortest stage-`s` axiom whose oracle is a prefix of `oracle`.
    pub fn eval(&self, input: usize, oracle: &BinaryString, stage: u64) -> Option<(u8, usize)> {
        self.by_input
            .get(&input)?
            .iter()
            .find(|ax| ax.stage <= stage && ax.oracle_prefix.is_prefix_of(oracle))
            .map(|ax| (ax.output, ax.oracle_prefix.len()))
    }

    /// Largest use among convergent computations at inputs `≤ x` (0 if none).
    pub fn use_up_to(&self, x: usize, oracle: &BinaryString, stage: u64) -> usize {
        self.by_input
            .range(..=x)
            .filter_map(|(&y, _)| self.eval(y, oracle, stage).map(|(_, u)| u))
            .max()
            .unwrap_or(0)
    }
}

/// Identity-pair axioms for the current `B`: `Δ(n)` reads `B ↾ (n+1)` and
/// copies bit `n`, and `Γ` copies back, for `n < depth`.
pub fn identity_axioms(b: &BTreeSet<u64>, depth: usize, stage: u64) -> Vec<Axiom> {
    let chi = BinaryString::from_bits((0..depth as u64).map(|y| u8::from(b.contains(&y))));
    (0..depth).map(|n| Axiom::new(n, chi.prefix(n + 1), chi.bit(n), stage)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WEntry {
    pub stage: u64,
    pub add: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AncEntry {
    #[serde(rename = "W", default)]
    pub w: Vec<WEntry>,
    #[serde(rename = "Gamma", default)]
    pub gamma: Vec<Axiom>,
    #[serde(rename = "Delta", default)]
    pub delta: Vec<Axiom>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AncConfig {
    pub roster: Vec<AncEntry>,
}

/// `m_e`: starts at 1, wagers $1 at the parent of each bet string and 0
/// elsewhere below `d_e`; undefined from length `d_e` on.
#[derive(Clone, Debug, Default, Serialize)]
pub struct SparseBets {
    /// Parent node ↦ signed wager.
    wagers: BTreeMap<BinaryString, Capital>,
    d: usize,
}

impl SparseBets {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn wagers(&self) -> &BTreeMap<BinaryString, Capital> {
        &self.wagers
    }

    /// Wagers $1 on `tau` and 0 on the rest of `(d, |τ|]`.
    fn bet_on(&mut self, tau: &BinaryString) {
        let parent = tau.prefix(tau.len() - 1);
        let w = if tau.last() == Some(1) { 1 } else { -1 };
        self.wagers.insert(parent, w);
        self.d = tau.len();
    }

    pub fn value(&self, sigma: &BinaryString) -> Option<Capital> {
        if sigma.len() > self.d {
            return None;
        }
        self.walk(sigma).ok().map(|w| w.last())
    }
}

impl Martingale for SparseBets {
    fn initial_capital(&self) -> Capital {
        1
    }

    fn wager(&self, node: &BinaryString) -> Option<Capital> {
        (node.len() < self.d).then(|| self.wagers.get(node).copied().unwrap_or(0))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BetRecord {
    pub stage: u64,
    pub e: usize,
    pub k: u64,
    pub tau: BinaryString,
    /// `r_{e,k,t}`.
    pub r: u64,
    /// `A_e[t] ↾ γ_e(r)[t]`.
    pub tau_r: BinaryString,
    pub disturbed: bool,
    pub recovered: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Recovery {
    pub stage: u64,
    pub e: usize,
    pub k: u64,
    pub tau_r: BinaryString,
    pub new_prefix: BinaryString,
    pub incomparable: bool,
    pub value: Capital,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct AncAudit {
    pub checks: u64,
    pub violations: Vec<AuditViolation>,
    pub diagnostics: Vec<AuditViolation>,
    pub recoveries: Vec<Recovery>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RReport {
    pub e: usize,
    pub follower: Option<u64>,
    pub matched: bool,
    pub attention: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NReport {
    pub e: usize,
    /// `m_e(A_e ↾ d_e)` when `A_e` reaches `d_e`.
    pub capital: Option<Capital>,
    pub d: usize,
    pub wagers: usize,
    /// The latest bet has not seen a `B`-change below its restraint.
    pub protected: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct AncReport {
    pub stages: u64,
    pub b: Vec<u64>,
    pub r: Vec<RReport>,
    pub n: Vec<NReport>,
    pub audit: AncAudit,
}

struct Pair {
    w: Vec<WEntry>,
    gamma: FunctionalTable,
    delta: FunctionalTable,
}

/// Snapshot of one pair's computations at the current stage.
struct View {
    a: BinaryString,
    l: usize,
}

pub struct AncEngine {
    config: AncConfig,
    pairs: Vec<Pair>,
    stage: u64,
    b: BTreeSet<u64>,
    followers: Vec<Option<u64>>,
    /// Attention events since the current follower was appointed.
    epoch_attention: Vec<u64>,
    next_block: u64,
    m: Vec<SparseBets>,
    bets: Vec<BetRecord>,
    events: Vec<TraceEvent>,
    audit: AncAudit,
}

impl AncEngine {
    pub fn new(config: AncConfig) -> Result<Self> {
        let pairs = config
            .roster
            .iter()
            .enumerate()
            .map(|(e, entry)| {
                Ok(Pair {
                    w: entry.w.clone(),
                    gamma: FunctionalTable::new(&format!("Γ_{e}"), &entry.gamma)?,
                    delta: FunctionalTable::new(&format!("Δ_{e}"), &entry.delta)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let n = pairs.len();
        Ok(Self {
            config,
            pairs,
            stage: 0,
            b: BTreeSet::new(),
            followers: vec![None; n],
            epoch_attention: vec![0; n],
            next_block: 0,
            m: vec![SparseBets::default(); n],
            bets: Vec::new(),
            events: Vec::new(),
            audit: AncAudit::default(),
        })
    }

    pub fn config(&self) -> &AncConfig {
        &self.config
    }

    pub fn stage(&self) -> u64 {
        self.stage
    }

    pub fn b(&self) -> &BTreeSet<u64> {
        &self.b
    }

    pub fn followers(&self) -> &[Option<u64>] {
        &self.followers
    }

    pub fn m(&self, e: usize) -> &SparseBets {
        &self.m[e]
    }

    pub fn bets(&self) -> &[BetRecord] {
        &self.bets
    }

    pub fn audit(&self) -> &AncAudit {
        &self.audit
    }

    pub fn take_events(&mut self) -> Vec<TraceEvent> {
        std::mem::take(&mut self.events)
    }

    fn emit(&mut self, event: &str, req: Option<String>, payload: Value) {
        self.events.push(TraceEvent::new(self.stage, event, req, payload));
    }

    fn violation(&mut self, kind: &str, detail: String) {
        self.emit("audit_violation", None, json!({"kind": kind, "detail": detail}));
        self.audit.violations.push(AuditViolation { stage: self.stage, kind: kind.to_string(), detail });
    }

    fn diagnostic(&mut self, kind: &str, detail: String) {
        self.emit("diagnostic", None, json!({"kind": kind, "detail": detail}));
        self.audit.diagnostics.push(AuditViolation { stage: self.stage, kind: kind.to_string(), detail });
    }

    /// `W_{e,s}`.
    pub fn w_at(&self, e: usize) -> BTreeSet<u64> {
        self.pairs[e].w.iter().filter(|w| w.stage <= self.stage).flat_map(|w| w.add.iter().copied()).collect()
    }

    fn chi_b(&self, len: usize) -> BinaryString {
        BinaryString::from_bits((0..len as u64).map(|y| u8::from(self.b.contains(&y))))
    }

    /// `A_e[s]`: the longest prefix `Δ_e^B` computes.
    pub fn a_e(&self, e: usize) -> BinaryString {
        let delta = &self.pairs[e].delta;
        let chi = self.chi_b(delta.max_use());
        let mut a = BinaryString::new();
        while let Some((bit, _)) = delta.eval(a.len(), &chi, self.stage) {
            a.push(bit);
        }
        a
    }

    /// `l(e,s)`: agreement between `Γ_e^{Δ_e^B}` and `B`.
    pub fn length_of_agreement(&self, e: usize) -> usize {
        self.view(e).l
    }

    fn view(&self, e: usize) -> View {
        let a = self.a_e(e);
        let gamma = &self.pairs[e].gamma;
        let mut l = 0;
        while let Some((bit, _)) = gamma.eval(l, &a, self.stage) {
            if bit != u8::from(self.b.contains(&(l as u64))) {
                break;
            }
            l += 1;
        }
        View { a, l }
    }

    /// `γ_e(x)[s]`.
    pub fn gamma_use(&self, e: usize, x: usize) -> usize {
        self.pairs[e].gamma.use_up_to(x, &self.a_e(e), self.stage)
    }

    /// `δ_e(x)[s]`.
    pub fn delta_use(&self, e: usize, x: usize) -> usize {
        let delta = &self.pairs[e].delta;
        delta.use_up_to(x, &self.chi_b(delta.max_use()), self.stage)
    }

    /// `r_{e,k,s}`: the largest `max D_i` over followers of stronger `R`s.
    pub fn restraint(&self, req: AncReq) -> u64 {
        let p = req.priority();
        self.followers
            .iter()
            .enumerate()
            .filter(|&(j, _)| AncReq::R(j).priority() < p)
            .filter_map(|(_, f)| f.map(block_max))
            .max()
            .unwrap_or(0)
    }

    /// `m_e(A_e ↾ d_e)`, if `A_e[s]` reaches `d_e`.
    fn current_capital(&self, e: usize, a: &BinaryString) -> Option<Capital> {
        let d = self.m[e].d();
        (a.len() >= d).then(|| self.m[e].value(&a.prefix(d))).flatten()
    }

    /// The `N_{e,k}` that can currently require attention, by condition 1.
    fn n_candidate(&self, e: usize) -> Option<u64> {
        let cap = self.current_capital(e, &self.a_e(e))?;
        u64::try_from(cap + 1).ok().filter(|&k| k >= 2)
    }

    /// For `R_e`: `Some(None)` to appoint, `Some(Some(i))` to enumerate into `D_i`.
    /// For `N_{e,k}`: `Some(Some(l))` with the current agreement length.
    pub fn requires_attention(&self, req: AncReq) -> Option<Option<u64>> {
        match req {
            AncReq::R(e) => match self.followers[e] {
                None => Some(None),
                Some(i) => {
                    let w: BTreeSet<u64> = self.w_at(e).into_iter().filter(|x| block(i).contains(x)).collect();
                    let b: BTreeSet<u64> = self.b.range(block(i)).copied().collect();
                    (w != b).then_some(Some(i))
                }
            },
            AncReq::N(e, k) => {
                let view = self.view(e);
                if self.current_capital(e, &view.a)? != k as Capital - 1 {
                    return None;
                }
                let r = self.restraint(req) as usize;
                let gamma = &self.pairs[e].gamma;
                let delta = &self.pairs[e].delta;
                let g_r = gamma.use_up_to(r, &view.a, self.stage);
                let dg_r = delta.use_up_to(g_r, &self.chi_b(delta.max_use()), self.stage);
                let g_l = gamma.use_up_to(view.l, &view.a, self.stage);
                (view.l > r && view.l > dg_r && g_l > self.m[e].d()).then_some(Some(view.l as u64))
            }
        }
    }

    /// Requirements that may act now, strongest first.
    fn candidates(&self) -> Vec<AncReq> {
        let mut reqs: Vec<AncReq> = (0..self.pairs.len()).map(AncReq::R).collect();
        reqs.extend((0..self.pairs.len()).filter_map(|e| self.n_candidate(e).map(|k| AncReq::N(e, k))));
        reqs.sort_by_key(|r| r.priority());
        reqs
    }

    pub fn step(&mut self) -> Result<Option<AncReq>> {
        self.stage += 1;
        let mut acted = None;
        for req in self.candidates() {
            if let Some(case) = self.requires_attention(req) {
                match req {
                    AncReq::R(e) => self.case1(e, case),
                    AncReq::N(e, k) => self.case2(e, k)?,
                }
                acted = Some(req);
                break;
            }
        }
        self.check_recoveries();
        self.audit_state();
        Ok(acted)
    }

    pub fn run(&mut self, budget: u64) -> Result<AncReport> {
        while self.stage < budget {
            self.step()?;
        }
        Ok(self.report())
    }

    fn case1(&mut self, e: usize, follower: Option<u64>) {
        let req = Some(AncReq::R(e).to_string());
        match follower {
            None => {
                let i = self.next_block;
                self.next_block += 1;
                self.followers[e] = Some(i);
                self.epoch_attention[e] = 0;
                self.emit("follower", req, json!({"i": i}));
            }
            Some(i) => {
                let xs: Vec<u64> = self.w_at(e).into_iter().filter(|x| block(i).contains(x) && !self.b.contains(x)).collect();
                self.epoch_attention[e] += 1;
                self.emit("enumerate", req, json!({"i": i, "xs": xs}));
                for &x in &xs {
                    self.b.insert(x);
                    for bet in self.bets.iter_mut().filter(|b| !b.recovered && x <= b.r) {
                        bet.disturbed = true;
                    }
                }
                if self.epoch_attention[e] > i + 1 {
                    self.violation("r_attention", format!("R_{e} needed attention {} times on D_{i}", self.epoch_attention[e]));
                }
            }
        }
    }

    fn case2(&mut self, e: usize, k: u64) -> Result<()> {
        let req = AncReq::N(e, k);
        let a = self.a_e(e);
        let l = self.length_of_agreement(e);
        let g_l = self.gamma_use(e, l);
        if a.len() < g_l {
            return Err(Error::OracleTooShort { need: g_l, have: a.len() });
        }
        let tau = a.prefix(g_l);
        let r = self.restraint(req);
        let tau_r = a.prefix(self.gamma_use(e, r as usize));
        let d_from = self.m[e].d();
        let before = self.m[e].value(&tau.prefix(d_from)).unwrap_or(0);
        self.m[e].bet_on(&tau);
        let after = self.m[e].value(&tau).unwrap_or(Capital::MIN);
        let sibling_value = self.m[e].value(&tau.sibling()?).unwrap_or(Capital::MIN);
        self.emit(
            "case2",
            Some(req.to_string()),
            json!({"l": l, "tau": tau.to_text(), "d_from": d_from, "d_to": g_l, "value": after, "r": r}),
        );
        if after != before + 1 || after != k as Capital {
            self.violation("case2_value", format!("m_{e}({tau}) = {after} after a bet from {before}"));
        }
        if sibling_value < 0 {
            self.violation("nonnegative", format!("m_{e} sibling of {tau} is {sibling_value}"));
        }
        self.bets.push(BetRecord { stage: self.stage, e, k, tau, r, tau_r, disturbed: false, recovered: false });
        let p = req.priority();
        for j in 0..self.followers.len() {
            if AncReq::R(j).priority() > p {
                if let Some(i) = self.followers[j].take() {
                    self.emit("cancel", Some(AncReq::R(j).to_string()), json!({"i": i}));
                }
            }
        }
        Ok(())
    }

    /// A disturbed bet recovers once the pair agrees past `r` and `Δ_e^B`
    /// reaches `|τ|` again.
    fn check_recoveries(&mut self) {
        for idx in 0..self.bets.len() {
            let bet = &self.bets[idx];
            if !bet.disturbed || bet.recovered {
                continue;
            }
            let view = self.view(bet.e);
            if view.l as u64 <= bet.r || view.a.len() < bet.tau.len() {
                continue;
            }
            let new_prefix = view.a.prefix(bet.tau_r.len());
            let incomparable = !new_prefix.comparable(&bet.tau_r);
            let value = self.m[bet.e].value(&view.a.prefix(bet.tau.len())).unwrap_or(Capital::MIN);
            let (e, k, tau_r) = (bet.e, bet.k, bet.tau_r.clone());
            self.bets[idx].recovered = true;
            self.emit(
                "recovery",
                Some(AncReq::N(e, k).to_string()),
                json!({"tau_r": tau_r.to_text(), "new": new_prefix.to_text(), "incomparable": incomparable, "value": value}),
            );
            if !incomparable {
                self.diagnostic("adversarial_functional", format!("Δ_{e}^B still extends {tau_r} after a change below the restraint"));
            } else if value < k as Capital - 1 {
                self.diagnostic("recovery_value", format!("m_{e} is {value} < {} along the recovered A_{e}", k - 1));
            }
            self.audit.recoveries.push(Recovery { stage: self.stage, e, k, tau_r, new_prefix, incomparable, value });
        }
    }

    fn audit_state(&mut self) {
        self.audit.checks += 1;
        for e in 0..self.m.len() {
            if let Some((node, w)) = self.m[e].wagers().iter().find(|(_, w)| w.abs() != 1) {
                let detail = format!("m_{e} stakes {w} at {node}");
                self.violation("stake", detail);
            }
        }
    }

    pub fn report(&self) -> AncReport {
        let r = (0..self.pairs.len())
            .map(|e| {
                let matched = self.followers[e].is_some_and(|i| {
                    let w: BTreeSet<u64> = self.w_at(e).into_iter().filter(|x| block(i).contains(x)).collect();
                    w == self.b.range(block(i)).copied().collect()
                });
                RReport { e, follower: self.followers[e], matched, attention: self.epoch_attention[e] }
            })
            .collect();
        let n = (0..self.pairs.len())
            .map(|e| NReport {
                e,
                capital: self.current_capital(e, &self.a_e(e)),
                d: self.m[e].d(),
                wagers: self.m[e].wagers().len(),
                protected: self.bets.iter().rev().find(|b| b.e == e).is_some_and(|b| !b.disturbed),
            })
            .collect();
        AncReport { stages: self.stage, b: self.b.iter().copied().collect(), r, n, audit: self.audit.clone() }
    }
}

pub fn anc_run(config: AncConfig, budget: u64) -> Result<(AncEngine, AncReport)> {
    let mut engine = AncEngine::new(config)?;
    let report = engine.run(budget)?;
    Ok((engine, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[u64]) -> BTreeSet<u64> {
        xs.iter().copied().collect()
    }

    fn identity_entry(depth: usize) -> AncEntry {
        let ax = identity_axioms(&BTreeSet::new(), depth, 0);
        AncEntry { w: vec![], gamma: ax.clone(), delta: ax }
    }

    #[test]
    fn blocks() {
        assert_eq!(block(0), 0..=0);
        assert_eq!(block(1), 1..=2);
        assert_eq!(block(2), 3..=5);
        for x in 0..2000 {
            assert!(block(block_of(x)).contains(&x));
        }
    }

    #[test]
    fn agreement_examples() {
        let eng = AncEngine::new(AncConfig { roster: vec![AncEntry::default()] }).unwrap();
        assert_eq!(eng.length_of_agreement(0), 0);
        let mut eng = AncEngine::new(AncConfig { roster: vec![identity_entry(5)] }).unwrap();
        assert_eq!(eng.length_of_agreement(0), 5);
        eng.b.insert(0);
        assert_eq!(eng.length_of_agreement(0), 0);
    }

    #[test]
    fn inconsistent_table() {
        let axioms = vec![Axiom::new(0, "0".parse().unwrap(), 0, 0), Axiom::new(0, "01".parse().unwrap(), 1, 3)];
        let err = FunctionalTable::new("Γ_0", &axioms).unwrap_err();
        assert!(matches!(err, Error::FunctionalInconsistency(ref s) if s.contains("via 0") && s.contains("via 01")));
    }

    #[test]
    fn set_oracle_prefix() {
        let ax: Axiom = serde_json::from_value(json!({"input": 2, "oracle_prefix": {"use": 4, "set": [1, 3]}, "output": 1})).unwrap();
        assert_eq!(ax.oracle_prefix.to_text(), "0101");
    }

    #[test]
    fn first_case2() {
        let mut eng = AncEngine::new(AncConfig { roster: vec![identity_entry(6)] }).unwrap();
        assert_eq!(eng.step().unwrap(), Some(AncReq::R(0)));
        assert_eq!(eng.followers(), &[Some(0)]);
        assert_eq!(eng.step().unwrap(), Some(AncReq::N(0, 2)));
        assert_eq!(eng.m(0).d(), 6);
        assert_eq!(eng.m(0).value(&BinaryString::repeat(0, 6)), Some(2));
        assert_eq!(eng.m(0).value(&"000001".parse().unwrap()), Some(0));
        assert_eq!(eng.step().unwrap(), None);
    }

    #[test]
    fn r_matches_schedule() {
        let entry = AncEntry { w: vec![WEntry { stage: 3, add: vec![0] }], ..Default::default() };
        let (eng, report) = anc_run(AncConfig { roster: vec![entry] }, 10).unwrap();
        assert_eq!(eng.b(), &set(&[0]));
        assert!(report.r[0].matched);
        assert_eq!(report.r[0].attention, 1);
    }
}
