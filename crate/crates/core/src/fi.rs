//! The finite-injury construction: approximations `A_s = ρ 1^ω` and one
//! global partial martingale `m` that wins on the limit of `A_s`, while no
//! total adversary of the roster succeeds on it.
//!
//! Requirements, in priority order `R_0, R_1, R_2, Q_2, R_3, Q_3, …`:
//! `R_e` defeats roster entry `e`; `Q_e` makes `m` win at least `e` along `A`.

use crate::error::{Error, Result};
use crate::forcing::least_decreasing_extension;
use crate::martingale::{evaluate, signed, Adversary, AdversarySpec, AtStage, Capital, Martingale, StagedMartingale, Walk};
use crate::strings::{BinaryString, TailSequence};
use crate::trace::TraceEvent;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::VecDeque;
use std::fmt;

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug)]
struct TrieNode {
    child: [u32; 2],
    wager: Option<Capital>,
    ray: bool,
}

impl TrieNode {
    fn new() -> Self {
        Self { child: [NONE; 2], wager: None, ray: false }
    }
}

/// A partial martingale made of explicit wagers plus rays. A ray at `ρ`
/// stakes $1 on bit 1 at every node `ρ 1^k`.
#[derive(Clone, Debug)]
pub struct GlobalMartingale {
    capital: Capital,
    nodes: Vec<TrieNode>,
    explicit: usize,
    rays: usize,
}

impl GlobalMartingale {
    pub fn new(capital: Capital) -> Self {
        Self { capital, nodes: vec![TrieNode::new()], explicit: 0, rays: 0 }
    }

    fn find(&self, path: &BinaryString) -> (Option<usize>, bool) {
        // Returns the trie node for `path` (if present) and whether `path` lies on a ray.
        let mut idx = 0usize;
        let mut in_ray = self.nodes[0].ray;
        let mut present = true;
        for bit in path.bits() {
            if present {
                let c = self.nodes[idx].child[bit as usize];
                if c == NONE {
                    present = false;
                    in_ray = in_ray && bit == 1;
                } else {
                    idx = c as usize;
                    in_ray = (in_ray && bit == 1) || self.nodes[idx].ray;
                }
            } else {
                in_ray = in_ray && bit == 1;
            }
        }
        (present.then_some(idx), in_ray)
    }

    fn ensure(&mut self, path: &BinaryString) -> usize {
        let mut idx = 0usize;
        for bit in path.bits() {
            let c = self.nodes[idx].child[bit as usize];
            idx = if c == NONE {
                self.nodes.push(TrieNode::new());
                let n = (self.nodes.len() - 1) as u32;
                self.nodes[idx].child[bit as usize] = n;
                n as usize
            } else {
                c as usize
            };
        }
        idx
    }

    /// Places `wager` at `node`; a different existing wager is a conflict.
    pub fn set_wager(&mut self, node: &BinaryString, wager: Capital) -> std::result::Result<(), Capital> {
        match self.wager(node) {
            Some(w) if w != wager => return Err(w),
            Some(_) => return Ok(()),
            None => {}
        }
        let idx = self.ensure(node);
        self.nodes[idx].wager = Some(wager);
        self.explicit += 1;
        Ok(())
    }

    /// Starts a ray at `origin`. With `strict`, every explicit wager already
    /// on `origin 1^k` must be the ray's own $1 on bit 1.
    pub fn add_ray(&mut self, origin: &BinaryString, strict: bool) -> std::result::Result<(), BinaryString> {
        if strict {
            if let (Some(mut idx), _) = self.find(origin) {
                let mut at = origin.clone();
                loop {
                    if let Some(w) = self.nodes[idx].wager {
                        if w != 1 {
                            return Err(at);
                        }
                    }
                    let c = self.nodes[idx].child[1];
                    if c == NONE {
                        break;
                    }
                    idx = c as usize;
                    at.push(1);
                }
            }
        }
        let idx = self.ensure(origin);
        if !self.nodes[idx].ray {
            self.nodes[idx].ray = true;
            self.rays += 1;
        }
        Ok(())
    }

    pub fn explicit_wagers(&self) -> usize {
        self.explicit
    }

    pub fn ray_count(&self) -> usize {
        self.rays
    }

    /// Values along `A ↾ n` for `n ≤ len`, in one pass.
    pub fn walk_tail(&self, a: &TailSequence, len: usize) -> Result<Walk> {
        self.walk(&a.prefix(len))
    }
}

impl Martingale for GlobalMartingale {
    fn initial_capital(&self) -> Capital {
        self.capital
    }

    fn wager(&self, node: &BinaryString) -> Option<Capital> {
        let (idx, in_ray) = self.find(node);
        idx.and_then(|i| self.nodes[i].wager).or(in_ray.then_some(1))
    }

    fn walk(&self, path: &BinaryString) -> Result<Walk> {
        let mut values = Vec::with_capacity(path.len() + 1);
        let mut v = self.capital;
        values.push(v);
        let mut idx = Some(0usize);
        let mut in_ray = self.nodes[0].ray;
        for (i, bit) in path.bits().enumerate() {
            let w = idx.and_then(|j| self.nodes[j].wager).or(in_ray.then_some(1));
            let Some(w) = w else {
                return Ok(Walk { values, complete: false });
            };
            v = if bit == 1 { v.checked_add(w) } else { v.checked_sub(w) }
                .ok_or_else(|| Error::CapitalOverflow { at: path.prefix(i + 1) })?;
            values.push(v);
            idx = idx.and_then(|j| {
                let c = self.nodes[j].child[bit as usize];
                (c != NONE).then_some(c as usize)
            });
            in_ray = (in_ray && bit == 1) || idx.is_some_and(|j| self.nodes[j].ray);
        }
        Ok(Walk { values, complete: true })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiConfig {
    pub roster: Vec<AdversarySpec>,
    /// Largest `e` with a `Q_e` requirement; defaults to roster length + 10.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_max: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Req {
    R(usize),
    Q(usize),
}

impl fmt::Display for Req {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Req::R(e) => write!(f, "R_{e}"),
            Req::Q(e) => write!(f, "Q_{e}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum Attention {
    /// Case (i): not waiting, and the adversary's value rises at `l`.
    Through { l: usize },
    /// Case (ii): the awaited convergence to length `h` arrived.
    Converged { h: usize },
    /// `m(A ↾ r_e) < e`.
    BelowTarget { value: Capital },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RStatus {
    NeverTriggered,
    Waiting { h: usize },
    Attacked { count: u64 },
    Quiescent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum QStatus {
    Satisfied { witness_len: usize, value: Capital },
    Pending { value: Capital },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AuditViolation {
    pub stage: u64,
    pub kind: String,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct FiAudit {
    /// Number of (stage, n) points at which `m(A_s ↾ n) ≥ 1` was checked.
    pub floor_points: u64,
    pub case2_actions: u64,
    pub attacks: u64,
    pub violations: Vec<AuditViolation>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FiReport {
    pub stages: u64,
    pub a: TailSequence,
    pub restraints: Vec<usize>,
    pub r: Vec<(usize, RStatus)>,
    pub q: Vec<(usize, QStatus)>,
    pub audit: FiAudit,
}

#[derive(Clone, Debug, Default)]
struct RState {
    waiting: Option<usize>,
    acted: bool,
    ever_triggered: bool,
    /// `(τ, n_e(τ))` of the Case-2 action since the last injury.
    case2: Option<(BinaryString, Capital)>,
    attacks: u64,
}

impl RState {
    fn injure(&mut self) {
        self.waiting = None;
        self.acted = false;
        self.case2 = None;
        self.attacks = 0;
    }
}

/// Upper bound on nodes searched for a Case-3 witness.
const CASE3_NODE_CAP: usize = 1 << 20;

pub struct FiEngine {
    config: FiConfig,
    roster: Vec<Adversary>,
    stage: u64,
    a: TailSequence,
    m: GlobalMartingale,
    r: Vec<usize>,
    rs: Vec<RState>,
    high_water: usize,
    q_max: usize,
    priority: Vec<Req>,
    events: Vec<TraceEvent>,
    audit: FiAudit,
}

impl FiEngine {
    /// Stage 0: `A_0 = 1^ω`, `m(λ) = 2` with a ray from the root, `r_e = e`.
    pub fn new(config: FiConfig) -> Result<Self> {
        let roster = config.roster.iter().map(AdversarySpec::build).collect::<Result<Vec<_>>>()?;
        let n = roster.len();
        let q_max = config.q_max.unwrap_or(n + 10);
        let slots = n.max(q_max + 1);
        let mut priority = Vec::new();
        for e in 0..slots {
            if e < n {
                priority.push(Req::R(e));
            }
            if e >= 2 && e <= q_max {
                priority.push(Req::Q(e));
            }
        }
        let mut m = GlobalMartingale::new(2);
        m.add_ray(&BinaryString::new(), true).expect("empty martingale");
        let mut engine = Self {
            config,
            roster,
            stage: 0,
            a: TailSequence::constant(1),
            m,
            r: (0..slots).collect(),
            rs: vec![RState::default(); n],
            high_water: slots.saturating_sub(1),
            q_max,
            priority,
            events: Vec::new(),
            audit: FiAudit::default(),
        };
        engine.audit_state();
        Ok(engine)
    }

    pub fn config(&self) -> &FiConfig {
        &self.config
    }

    pub fn stage(&self) -> u64 {
        self.stage
    }

    pub fn a(&self) -> &TailSequence {
        &self.a
    }

    pub fn m(&self) -> &GlobalMartingale {
        &self.m
    }

    pub fn restraints(&self) -> &[usize] {
        &self.r
    }

    pub fn roster(&self) -> &[Adversary] {
        &self.roster
    }

    pub fn priority(&self) -> &[Req] {
        &self.priority
    }

    pub fn audit(&self) -> &FiAudit {
        &self.audit
    }

    pub fn take_events(&mut self) -> Vec<TraceEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn r_status(&self, e: usize) -> RStatus {
        let st = &self.rs[e];
        if let Some(h) = st.waiting {
            RStatus::Waiting { h }
        } else if !st.ever_triggered {
            RStatus::NeverTriggered
        } else if st.attacks > 0 {
            RStatus::Attacked { count: st.attacks }
        } else {
            RStatus::Quiescent
        }
    }

    pub fn q_status(&self, e: usize) -> Result<QStatus> {
        let len = self.r[e];
        let value = self.m_along_a(len)?;
        Ok(if value >= e as Capital { QStatus::Satisfied { witness_len: len, value } } else { QStatus::Pending { value } })
    }

    fn m_along_a(&self, len: usize) -> Result<Capital> {
        evaluate(&self.m, &self.a.prefix(len)).map_err(|_| self.fault(format!("m undefined along A at length {len}")))
    }

    fn fault(&self, detail: String) -> Error {
        Error::ConstructionFault { stage: self.stage, detail }
    }

    fn emit(&mut self, event: &str, req: Option<Req>, payload: Value) {
        self.events.push(TraceEvent::new(self.stage, event, req.map(|r| r.to_string()), payload));
    }

    fn violation(&mut self, kind: &str, detail: String) {
        self.emit("audit_violation", None, json!({"kind": kind, "detail": detail}));
        self.audit.violations.push(AuditViolation { stage: self.stage, kind: kind.to_string(), detail });
    }

    /// Which case, if any, applies to `req` at the current stage.
    pub fn requires_attention(&self, req: Req) -> Result<Option<Attention>> {
        let s = self.stage;
        match req {
            Req::R(e) => {
                let adv = &self.roster[e];
                let conv = adv.converged_length(s);
                if let Some(h) = self.rs[e].waiting {
                    return Ok((conv >= h).then_some(Attention::Converged { h }));
                }
                let r = self.r[e];
                if conv <= r {
                    return Ok(None);
                }
                let walk = adv.walk_at(s, &self.a.prefix(conv)).map_err(|err| Error::Program { stage: s, detail: err.to_string() })?;
                let top = walk.defined_len().min(conv);
                Ok(((r + 1)..=top).find(|&l| walk.values[l] > walk.values[l - 1]).map(|l| Attention::Through { l }))
            }
            Req::Q(e) => {
                let value = self.m_along_a(self.r[e])?;
                Ok((value < e as Capital).then_some(Attention::BelowTarget { value }))
            }
        }
    }

    /// Runs one stage: the strongest requirement needing attention acts.
    pub fn step(&mut self) -> Result<Option<Req>> {
        self.stage += 1;
        for i in 0..self.priority.len() {
            let req = self.priority[i];
            let Some(att) = self.requires_attention(req)? else { continue };
            match (req, att) {
                (Req::R(e), Attention::Through { l }) if !self.rs[e].acted => self.case1a(e, l)?,
                (Req::R(e), Attention::Through { l }) => self.case1b(e, l)?,
                (Req::R(e), Attention::Converged { h }) => self.case2(e, h)?,
                (Req::Q(e), Attention::BelowTarget { value }) => self.case3(e, value)?,
                _ => unreachable!("attention kinds match requirement kinds"),
            }
            self.audit_state();
            return Ok(Some(req));
        }
        Ok(None)
    }

    pub fn run(&mut self, budget: u64) -> Result<FiReport> {
        while self.stage < budget {
            self.step()?;
        }
        self.report()
    }

    pub fn report(&self) -> Result<FiReport> {
        Ok(FiReport {
            stages: self.stage,
            a: self.a.clone(),
            restraints: self.r.clone(),
            r: (0..self.roster.len()).map(|e| (e, self.r_status(e))).collect(),
            q: (2..=self.q_max).map(|e| self.q_status(e).map(|q| (e, q))).collect::<Result<_>>()?,
            audit: self.audit.clone(),
        })
    }

    fn bump(&mut self, len: usize) {
        self.high_water = self.high_water.max(len);
    }

    /// Fresh, strictly increasing restraints for every `e' > e`; those
    /// requirements are injured.
    fn injure_above(&mut self, e: usize) {
        for e2 in (e + 1)..self.r.len() {
            self.high_water += 1;
            self.r[e2] = self.high_water;
            if let Some(st) = self.rs.get_mut(e2) {
                st.injure();
            }
            let req = if e2 < self.rs.len() { Req::R(e2) } else { Req::Q(e2) };
            self.emit("injury", Some(req), json!({"r": self.r[e2]}));
        }
    }

    fn move_a(&mut self, req: Req, stem: BinaryString) {
        self.bump(stem.len());
        self.emit("A_move", Some(req), json!({"stem": stem.to_text(), "tail": 1}));
        self.a = TailSequence::new(stem, 1);
    }

    fn ray(&mut self, req: Req, origin: &BinaryString, strict: bool) -> Result<()> {
        if let Err(at) = self.m.add_ray(origin, strict) {
            return Err(self.fault(format!("{req}: m already wagers differently at {at} on the ray from {origin}")));
        }
        self.emit("wager", Some(req), json!({"along": origin.to_text(), "from_len": origin.len(), "ray": true}));
        Ok(())
    }

    fn case1a(&mut self, e: usize, l: usize) -> Result<()> {
        let r = self.r[e];
        let rho0 = self.a.prefix(r).child(0);
        let view = AtStage::new(&self.roster[e], self.stage);
        let n = evaluate(&view, &rho0).map_err(|_| self.fault(format!("R_{e}: n_{e} undefined at {rho0}")))?;
        let h = usize::try_from(n).map_err(|_| self.fault(format!("R_{e}: negative n_{e}({rho0}) = {n}")))? + 1 + (r + 1);
        let st = &mut self.rs[e];
        st.waiting = Some(h);
        st.acted = true;
        st.ever_triggered = true;
        self.bump(h);
        self.emit("case1a", Some(Req::R(e)), json!({"l": l, "r": r, "n_rho0": n, "h": h}));
        Ok(())
    }

    fn case1b(&mut self, e: usize, l: usize) -> Result<()> {
        let req = Req::R(e);
        let flipped = 1 - self.a.bit(l - 1);
        let stem = self.a.prefix(l - 1).child(flipped);
        let st = &mut self.rs[e];
        st.ever_triggered = true;
        if st.case2.is_some() {
            st.attacks += 1;
            self.audit.attacks += 1;
        }
        let attacks = st.attacks;
        let bound = st.case2.as_ref().map(|(_, n)| *n);
        self.emit("case1b", Some(req), json!({"l": l, "attack": attacks}));
        self.ray(req, &stem, true)?;
        self.move_a(req, stem);
        if let Some(n_tau) = bound {
            if attacks as Capital > n_tau {
                self.violation("attack_count", format!("R_{e} attacked {attacks} times after Case 2 with n_e(τ) = {n_tau}"));
            }
        }
        for e2 in (e + 1)..self.rs.len() {
            self.rs[e2].waiting = None;
        }
        self.injure_above(e);
        Ok(())
    }

    fn case2(&mut self, e: usize, h: usize) -> Result<()> {
        let req = Req::R(e);
        let r = self.r[e];
        let rho0 = self.a.prefix(r).child(0);
        let m_rho0 = evaluate(&self.m, &rho0).map_err(|_| self.fault(format!("R_{e}: m undefined at {rho0}")))?;
        if m_rho0 < 1 {
            self.violation("case2_base", format!("m({rho0}) = {m_rho0} < 1"));
        }
        let view = AtStage::new(&self.roster[e], self.stage);
        let tau = least_decreasing_extension(&view, &rho0, h).map_err(|err| self.fault(format!("R_{e}: {err}")))?;
        let n_tau = evaluate(&view, &tau)?;
        for j in (r + 1)..h {
            let node = tau.prefix(j);
            if let Err(w) = self.m.set_wager(&node, signed(tau.bit(j), 1)) {
                return Err(self.fault(format!("R_{e}: m already wagers {w} at {node}")));
            }
        }
        self.emit("case2", Some(req), json!({"h": h, "tau": tau.to_text(), "n_tau": n_tau}));
        self.emit("wager", Some(req), json!({"along": tau.to_text(), "from_len": r + 1, "to_len": h}));
        self.ray(req, &tau, true)?;
        let m_tau = evaluate(&self.m, &tau)?;
        if m_tau <= n_tau {
            self.violation("case2_dominance", format!("m({tau}) = {m_tau} ≤ n_{e}(τ) = {n_tau}"));
        }
        self.audit.case2_actions += 1;
        self.move_a(req, tau.clone());
        let st = &mut self.rs[e];
        st.waiting = None;
        st.case2 = Some((tau, n_tau));
        st.attacks = 0;
        for e2 in (e + 1)..self.rs.len() {
            self.rs[e2].waiting = None;
        }
        self.injure_above(e);
        Ok(())
    }

    fn case3(&mut self, e: usize, value: Capital) -> Result<()> {
        let req = Req::Q(e);
        let base = self.a.prefix(self.r[e]);
        let target = e as Capital;
        let tau = self.least_with_value(&base, value, target)?;
        self.emit("case3", Some(req), json!({"tau": tau.to_text(), "from": value}));
        self.move_a(req, tau.clone());
        self.ensure_defined_along(req)?;
        self.r[e] = tau.len();
        self.emit("restraint", Some(req), json!({"r": tau.len()}));
        for e2 in e..self.rs.len() {
            self.rs[e2].injure();
        }
        self.injure_above(e);
        Ok(())
    }

    /// (length, lex)-least defined `τ ⪰ base` with `m(τ) = target`.
    fn least_with_value(&self, base: &BinaryString, v_base: Capital, target: Capital) -> Result<BinaryString> {
        let mut queue = VecDeque::from([(base.clone(), v_base)]);
        let mut visited = 0usize;
        while let Some((node, v)) = queue.pop_front() {
            if v == target {
                return Ok(node);
            }
            visited += 1;
            if visited > CASE3_NODE_CAP {
                break;
            }
            if let Some(w) = self.m.wager(&node) {
                queue.push_back((node.child(0), v - w));
                queue.push_back((node.child(1), v + w));
            }
        }
        Err(self.fault(format!("no string above {base} with m = {target}")))
    }

    /// Makes `m` defined at every prefix of `A`: $1 on `A`'s next bit where
    /// the stem is uncovered, and a ray beyond the stem.
    fn ensure_defined_along(&mut self, req: Req) -> Result<()> {
        let stem = self.a.stem.clone();
        let walk = self.m.walk(&stem)?;
        if !walk.complete {
            let from = walk.defined_len();
            for j in from..stem.len() {
                self.m.set_wager(&stem.prefix(j), signed(stem.bit(j), 1)).expect("undefined beyond the walk");
            }
            self.emit("wager", Some(req), json!({"along": stem.to_text(), "from_len": from, "to_len": stem.len()}));
        }
        if self.m.wager(&stem).is_none() || !self.m.find(&stem).1 {
            self.ray(req, &stem, false)?;
        }
        Ok(())
    }

    fn audit_state(&mut self) {
        let horizon = self.a.stem.len().max(self.high_water) + 1;
        match self.m.walk_tail(&self.a, horizon) {
            Ok(walk) if walk.complete => {
                self.audit.floor_points += walk.values.len() as u64;
                if let Some((n, v)) = walk.values.iter().enumerate().find(|(_, &v)| v < 1) {
                    self.violation("capital_floor", format!("m(A ↾ {n}) = {v}"));
                }
            }
            Ok(walk) => self.violation("domain", format!("m undefined along A at length {}", walk.defined_len() + 1)),
            Err(err) => self.violation("domain", err.to_string()),
        }
        if let Some(e) = (1..self.r.len()).find(|&e| self.r[e - 1] >= self.r[e]) {
            self.violation("restraints", format!("r_{} = {} ≥ r_{e} = {}", e - 1, self.r[e - 1], self.r[e]));
        }
    }
}

/// Runs `budget` stages from a fresh engine.
pub fn fi_run(config: FiConfig, budget: u64) -> Result<(FiEngine, FiReport)> {
    let mut engine = FiEngine::new(config)?;
    let report = engine.run(budget)?;
    Ok((engine, report))
}
