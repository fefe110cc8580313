//! The level construction: builds `A` and a c.e. set `B` with `Γ^B = A` and
//! `Δ^A = B` (uses `γ(l_i) = d_i`, `δ(d_i) = l_{i+1}`), forcing each roster
//! adversary to lose whenever it gains between two levels.
//!
//! Only `R_0, …, R_i` act at level `l_{i+1}`, and an action there needs a
//! level `l_{i+2}` to land on, so a table of `L` levels supports actions at
//! `l_1, …, l_{L−1}`.

use crate::error::{Error, Result};
use crate::fi::AuditViolation;
use crate::levels::{build_levels, maximin_select, ForbiddenRegistry, LevelTable, Variant};
use crate::martingale::{Adversary, AdversarySpec, Capital, StagedMartingale, Walk};
use crate::strings::{BinaryString, TailSequence};
use crate::trace::TraceEvent;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};

/// A scripted restraint from the lowness requirement `N_e`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestraintBump {
    pub stage: u64,
    pub e: usize,
    pub r: usize,
}

fn default_count() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LvConfig {
    pub roster: Vec<AdversarySpec>,
    /// `m_e(λ)` per roster entry; defaults to the roster's initial capitals.
    #[serde(default)]
    pub declared_capitals: Vec<u64>,
    #[serde(default)]
    pub restraint_script: Vec<RestraintBump>,
    /// Number of levels beyond `l_0`.
    #[serde(default = "default_count")]
    pub count: usize,
}

impl LvConfig {
    pub fn new(roster: Vec<AdversarySpec>) -> Self {
        Self { roster, declared_capitals: Vec::new(), restraint_script: Vec::new(), count: default_count() }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct LvAudit {
    pub gamma_checks: u64,
    pub delta_checks: u64,
    pub forbidden_checks: u64,
    pub violations: Vec<AuditViolation>,
    pub diagnostics: Vec<AuditViolation>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LvReport {
    pub stages: u64,
    pub a: TailSequence,
    pub b: Vec<u64>,
    pub restraints: Vec<usize>,
    /// Actions per requirement.
    pub attacks: Vec<u64>,
    /// `(level index i+1, actions, block size d_{i+1} − d_i)`.
    pub blocks: Vec<(usize, u64, u64)>,
    pub forbidden: usize,
    pub registry_bound_violations: usize,
    pub audit: LvAudit,
}

pub struct LvEngine {
    config: LvConfig,
    roster: Vec<Adversary>,
    table: LevelTable,
    lens: Vec<usize>,
    ds: Vec<u64>,
    stage: u64,
    a: TailSequence,
    b: BTreeSet<u64>,
    r: Vec<usize>,
    registry: ForbiddenRegistry,
    /// `visited[j]`: every `A_t ↾ l_j` so far.
    visited: Vec<BTreeSet<BinaryString>>,
    /// `Γ`: `B ∩ [0, d_j)` ↦ `A ↾ l_j`, per level.
    gamma: Vec<BTreeMap<Vec<u64>, BinaryString>>,
    /// `Δ`: `A ↾ l_{j+1}` ↦ `B ∩ [0, d_j)`, per level `j`.
    delta: Vec<BTreeMap<BinaryString, Vec<u64>>>,
    /// Enumerations into `[d_i, d_{i+1})`.
    block_counts: Vec<u64>,
    /// Actions at level `l_{i+1}` since the last action at a lower level.
    epoch_counts: Vec<u64>,
    attacks: Vec<u64>,
    script_done: Vec<bool>,
    events: Vec<TraceEvent>,
    audit: LvAudit,
}

impl LvEngine {
    /// Stage 0: `A_1 = 1^ω`, `B = ∅`, `r_e = l_e`.
    pub fn new(config: LvConfig) -> Result<Self> {
        let roster = config.roster.iter().map(AdversarySpec::build).collect::<Result<Vec<_>>>()?;
        let capitals: Vec<u64> = if config.declared_capitals.is_empty() {
            roster.iter().map(|a| a.initial_capital().max(0) as u64).collect()
        } else {
            config.declared_capitals.clone()
        };
        for (e, adv) in roster.iter().enumerate() {
            match capitals.get(e) {
                Some(&c) if c as Capital == adv.initial_capital() => {}
                other => {
                    return Err(Error::BadSpec(format!(
                        "declared capital {other:?} for roster entry {e} does not match its initial capital {}",
                        adv.initial_capital()
                    )))
                }
            }
        }
        let capitals = if capitals.is_empty() { vec![1] } else { capitals };
        let table = build_levels(Variant::Plain, &capitals, config.count)?;
        let levels = table.count() + 1;
        let lens = (0..levels).map(|i| table.l_usize(i)).collect::<Result<Vec<_>>>()?;
        let ds = (0..levels).map(|i| table.d_u64(i)).collect::<Result<Vec<_>>>()?;
        let registry = ForbiddenRegistry::new(&table);
        let n = roster.len();
        let r = (0..n).map(|e| table.l.get(e).and_then(|v| v.to_usize()).unwrap_or(usize::MAX)).collect();
        let mut engine = Self {
            script_done: vec![false; config.restraint_script.len()],
            config,
            roster,
            table,
            lens,
            ds,
            stage: 0,
            a: TailSequence::constant(1),
            b: BTreeSet::new(),
            r,
            registry,
            visited: vec![BTreeSet::new(); levels],
            gamma: vec![BTreeMap::new(); levels],
            delta: vec![BTreeMap::new(); levels],
            block_counts: vec![0; levels],
            epoch_counts: vec![0; levels],
            attacks: vec![0; n],
            events: Vec::new(),
            audit: LvAudit::default(),
        };
        engine.record_axioms_and_audit();
        Ok(engine)
    }

    pub fn config(&self) -> &LvConfig {
        &self.config
    }

    pub fn table(&self) -> &LevelTable {
        &self.table
    }

    pub fn stage(&self) -> u64 {
        self.stage
    }

    pub fn a(&self) -> &TailSequence {
        &self.a
    }

    pub fn b(&self) -> &BTreeSet<u64> {
        &self.b
    }

    pub fn restraints(&self) -> &[usize] {
        &self.r
    }

    pub fn registry(&self) -> &ForbiddenRegistry {
        &self.registry
    }

    pub fn audit(&self) -> &LvAudit {
        &self.audit
    }

    pub fn take_events(&mut self) -> Vec<TraceEvent> {
        std::mem::take(&mut self.events)
    }

    fn levels(&self) -> usize {
        self.lens.len()
    }

    fn fault(&self, detail: String) -> Error {
        Error::ConstructionFault { stage: self.stage, detail }
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

    fn adversary_walk(&self, e: usize, len: usize) -> Result<Walk> {
        self.roster[e]
            .walk_at(self.stage, &self.a.prefix(len))
            .map_err(|err| Error::Program { stage: self.stage, detail: err.to_string() })
    }

    /// Least level index `i+1` at which `R_e` requires attention.
    pub fn requires_attention(&self, e: usize) -> Result<Option<usize>> {
        let conv = self.roster[e].converged_length(self.stage);
        let top = self.levels().saturating_sub(2);
        for i in e..top {
            let hi = self.lens[i + 1];
            if conv < hi {
                break;
            }
            if hi < self.r[e] {
                continue;
            }
            let walk = self.adversary_walk(e, hi)?;
            if walk.values[hi] > walk.values[self.lens[i]] {
                return Ok(Some(i + 1));
            }
        }
        Ok(None)
    }

    fn pending_bump(&self, e: usize) -> Option<usize> {
        self.config
            .restraint_script
            .iter()
            .enumerate()
            .position(|(k, b)| !self.script_done[k] && b.e == e && b.stage <= self.stage)
    }

    /// One stage in priority order `R_0 > N_0 > R_1 > N_1 > …`.
    pub fn step(&mut self) -> Result<Option<String>> {
        self.stage += 1;
        let n = self.roster.len().max(self.config.restraint_script.iter().map(|b| b.e + 1).max().unwrap_or(0));
        for e in 0..n {
            if e < self.roster.len() {
                if let Some(level) = self.requires_attention(e)? {
                    self.act(e, level)?;
                    self.record_axioms_and_audit();
                    return Ok(Some(format!("R_{e}")));
                }
            }
            if let Some(k) = self.pending_bump(e) {
                self.script_done[k] = true;
                let bump = self.config.restraint_script[k].clone();
                self.emit("restraint_script", Some(format!("N_{e}")), json!({"r": bump.r}));
                for e2 in (e + 1)..self.r.len() {
                    if self.r[e2] <= bump.r {
                        self.r[e2] = bump.r;
                        self.emit("restraint", Some(format!("R_{e2}")), json!({"r": bump.r}));
                    }
                }
                return Ok(Some(format!("N_{e}")));
            }
        }
        Ok(None)
    }

    pub fn run(&mut self, budget: u64) -> Result<LvReport> {
        while self.stage < budget {
            self.step()?;
        }
        Ok(self.report())
    }

    pub fn report(&self) -> LvReport {
        LvReport {
            stages: self.stage,
            a: self.a.clone(),
            b: self.b.iter().copied().collect(),
            restraints: self.r.clone(),
            attacks: self.attacks.clone(),
            blocks: (0..self.levels() - 1)
                .map(|i| (i + 1, self.block_counts[i], self.ds[i + 1] - self.ds[i]))
                .collect(),
            forbidden: self.registry.len(),
            registry_bound_violations: self.registry.violations().len(),
            audit: self.audit.clone(),
        }
    }

    /// Case 1 for `R_e` at level `l_{i+1}` (`level = i + 1`).
    fn act(&mut self, e: usize, level: usize) -> Result<()> {
        let req = format!("R_{e}");
        let i = level - 1;
        let (lo, hi) = (self.lens[i], self.lens[level]);
        let walk = self.adversary_walk(e, hi)?;
        let base_value = walk.values[lo];
        let l = ((lo + 1)..=hi).find(|&l| walk.values[l] > base_value).expect("attention implies a rise");
        let base = self.a.prefix(l).sibling()?;
        let k = self.epoch_counts[level];
        let tau = self.choose_tau(e, &base, hi, base_value)?;
        let tau_value = self.roster[e]
            .walk_at(self.stage, &tau)?
            .values
            .last()
            .copied()
            .ok_or_else(|| self.fault("empty walk".into()))?;
        self.emit("case1", Some(req.clone()), json!({
            "level": level, "l": l, "tau": tau.to_text(), "before": base_value, "after": tau_value
        }));
        self.move_distance_audit(&tau, i, k);

        let x = (self.ds[i]..self.ds[level])
            .find(|x| !self.b.contains(x))
            .ok_or(Error::BlockExhausted { lo: self.ds[i], hi: self.ds[level] })?;
        self.b.insert(x);
        self.block_counts[i] += 1;
        self.emit("enumerate", Some(req.clone()), json!({"x": x, "block": i}));
        if self.block_counts[i] > self.ds[level] - self.ds[i] {
            self.violation("block_count", format!("{} enumerations into [{}, {})", self.block_counts[i], self.ds[i], self.ds[level]));
        }
        self.forbid_after(x)?;

        let target = self.lens[level + 1];
        let choice = maximin_select(&self.registry, &tau, target, &self.visited[level + 1], true)?;
        let rho = choice.string;
        self.emit("A_move", Some(req.clone()), json!({"stem": rho.to_text(), "tail": 1, "distance": choice.distance}));
        self.a = TailSequence::new(rho, 1);

        self.attacks[e] += 1;
        self.epoch_counts[level] += 1;
        for c in self.epoch_counts[level + 1..].iter_mut() {
            *c = 0;
        }
        for e2 in e..self.r.len() {
            if self.r[e2] <= hi {
                self.r[e2] = hi;
                self.emit("restraint", Some(format!("R_{e2}")), json!({"r": hi}));
            }
        }
        Ok(())
    }

    /// Cones above `base` in maximin order, each descended greedily toward
    /// the adversary's smaller child; the first leaf below `bound` wins.
    fn choose_tau(&self, e: usize, base: &BinaryString, len: usize, bound: Capital) -> Result<BinaryString> {
        let forbidden: Vec<BinaryString> = self.registry.strings_of_len(len).filter(|mu| base.is_prefix_of(mu)).cloned().collect();
        let on_trie = |s: &BinaryString| forbidden.iter().any(|mu| s.is_prefix_of(mu));
        let mut cones = Vec::new();
        if forbidden.is_empty() {
            cones.push(base.clone());
        } else {
            let mut layer = vec![base.clone()];
            while let Some(first) = layer.first() {
                if first.len() >= len {
                    break;
                }
                let mut next = Vec::new();
                for v in &layer {
                    for bit in [0u8, 1] {
                        let c = v.child(bit);
                        if on_trie(&c) {
                            next.push(c);
                        } else {
                            cones.push(c);
                        }
                    }
                }
                layer = next;
            }
            cones.extend(layer);
        }
        let adv = &self.roster[e];
        for cone in cones {
            let mut node = cone;
            let mut value = *adv.walk_at(self.stage, &node)?.values.last().expect("root");
            while node.len() < len {
                let w = adv.wager_at(self.stage, &node).ok_or_else(|| Error::PartialAdversary { at: node.clone() })?;
                let bit = u8::from(w < 0);
                value = if bit == 1 { value + w } else { value - w };
                node.push(bit);
            }
            if value < bound {
                return Ok(node);
            }
        }
        Err(self.fault(format!("R_{e}: no τ above {base} lowers the adversary below {bound}")))
    }

    fn move_distance_audit(&mut self, tau: &BinaryString, i: usize, k: u64) {
        let level = i + 1;
        let above = tau.prefix(self.lens[i]);
        let worst = self
            .registry
            .strings_of_len(self.lens[level])
            .filter(|mu| above.is_prefix_of(mu))
            .map(|mu| tau.common_prefix_len(mu))
            .max();
        let Some(worst) = worst else { return };
        match self.table.intermediate_usize(level, k as usize + 1) {
            Some(limit) if worst <= limit => {}
            limit => self.diagnostic(
                "move_distance",
                format!("τ shares {worst} bits with a forbidden string at level {level}; grid allows {limit:?} after {k} actions"),
            ),
        }
    }

    /// Registers every visited `A_t ↾ l_{k+1}` whose `Δ`-reading of
    /// `B ↾ d_k` is now wrong, i.e. every one with `d_k > x`.
    fn forbid_after(&mut self, x: u64) -> Result<()> {
        for k in 0..self.levels() - 1 {
            if self.ds[k] <= x {
                continue;
            }
            let level = k + 1;
            let strings: Vec<BinaryString> = self.visited[level].iter().cloned().collect();
            for s in strings {
                if self.registry.register(level, s.clone(), self.stage, &format!("enumerated {x} below d_{k}"))? {
                    self.emit("forbid", None, json!({"level": level, "string": s.to_text()}));
                }
            }
        }
        Ok(())
    }

    fn b_below(&self, d: u64) -> Vec<u64> {
        self.b.range(..d).copied().collect()
    }

    fn record_axioms_and_audit(&mut self) {
        for j in 0..self.levels() {
            let a_part = self.a.prefix(self.lens[j]);
            if let Some(entry) = self.registry.forbidden_prefix_of(&a_part) {
                let s = entry.string.clone();
                self.violation("forbidden", format!("A extends forbidden {s}"));
            }
            self.audit.forbidden_checks += 1;
            self.visited[j].insert(a_part.clone());
            let key = self.b_below(self.ds[j]);
            match self.gamma[j].get(&key) {
                Some(prev) if *prev != a_part => {
                    let prev = prev.clone();
                    self.violation("gamma", format!("B ↾ d_{j} = {key:?} gives A ↾ l_{j} = {prev} and {a_part}"));
                }
                Some(_) => {}
                None => {
                    self.gamma[j].insert(key, a_part.clone());
                }
            }
            self.audit.gamma_checks += 1;
            if j + 1 < self.levels() {
                let a_next = self.a.prefix(self.lens[j + 1]);
                let b_part = self.b_below(self.ds[j]);
                match self.delta[j].get(&a_next) {
                    Some(prev) if *prev != b_part => {
                        let prev = prev.clone();
                        self.violation("delta", format!("A ↾ l_{} = {a_next} gives B ↾ d_{j} = {prev:?} and {b_part:?}", j + 1));
                    }
                    Some(_) => {}
                    None => {
                        self.delta[j].insert(a_next, b_part);
                    }
                }
                self.audit.delta_checks += 1;
            }
        }
        for v in self.registry.violations().iter().skip(self.audit.diagnostics.iter().filter(|d| d.kind == "registry_bound").count()) {
            let detail = format!("{} forbidden strings at level {} above {}", v.count, v.level, v.above);
            self.audit.diagnostics.push(AuditViolation { stage: v.stage, kind: "registry_bound".into(), detail });
        }
    }

    /// `A ↾ l_j` recovered from `B` through the recorded `Γ` axioms.
    pub fn reconstruct_a(&self, j: usize) -> Option<&BinaryString> {
        self.gamma.get(j)?.get(&self.b_below(*self.ds.get(j)?))
    }

    /// `B ∩ [0, d_j)` recovered from `A` through the recorded `Δ` axioms.
    pub fn reconstruct_b(&self, j: usize) -> Option<&Vec<u64>> {
        self.delta.get(j)?.get(&self.a.prefix(*self.lens.get(j + 1)?))
    }
}

/// Runs `budget` stages from a fresh engine.
pub fn lv_run(config: LvConfig, budget: u64) -> Result<(LvEngine, LvReport)> {
    let mut engine = LvEngine::new(config)?;
    let report = engine.run(budget)?;
    Ok((engine, report))
}
