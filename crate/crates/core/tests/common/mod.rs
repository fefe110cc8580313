//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use ivr_core::anc::{identity_axioms, AncConfig, AncEntry, Axiom, WEntry};
use ivr_core::fi::FiConfig;
use ivr_core::lv::LvConfig;
use ivr_core::martingale::{AdversarySpec, Capital, MartingaleTable, StagedTable};
use ivr_core::replay::{build_driver, drive};
use ivr_core::trace::{TraceHeader, TraceWriter};
use ivr_core::BinaryString;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::collections::{BTreeMap, BTreeSet};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn bs(s: &str) -> BinaryString {
    s.parse().unwrap()
}

/// A valid table: each node is wagered with probability `p_defined` (the
/// root always), stakes never exceed the node's value.
pub fn random_table(rng: &mut ChaCha8Rng, depth: usize, capital: Capital, p_defined: f64) -> MartingaleTable {
    let mut t = MartingaleTable::new(capital);
    let mut stack = vec![(BinaryString::new(), capital)];
    while let Some((node, v)) = stack.pop() {
        if node.len() >= depth || (!node.is_empty() && !rng.gen_bool(p_defined)) {
            continue;
        }
        let w = rng.gen_range(-v..=v);
        t.wagers.insert(node.clone(), w);
        stack.push((node.child(1), v + w));
        stack.push((node.child(0), v - w));
    }
    t
}

/// A staged table: wagers appear at random stages, some nodes never.
pub fn random_staged(rng: &mut ChaCha8Rng, depth: usize, capital: Capital, max_stage: u64) -> StagedTable {
    let table = random_table(rng, depth, capital, 0.9);
    let entries = table.wagers.into_iter().map(|(k, w)| (k, (w, rng.gen_range(0..=max_stage)))).collect();
    StagedTable::new(capital, entries)
}

/// Values by direct recursion from the wager map, independent of the walk code.
pub fn table_values(t: &MartingaleTable) -> BTreeMap<BinaryString, i128> {
    let mut values = BTreeMap::new();
    values.insert(BinaryString::new(), t.initial_capital as i128);
    for len in 0..=t.wagers.keys().map(|k| k.len()).max().unwrap_or(0) {
        for (node, &w) in t.wagers.iter().filter(|(k, _)| k.len() == len) {
            let Some(&v) = values.get(node) else { continue };
            values.insert(node.child(1), v + w as i128);
            values.insert(node.child(0), v - w as i128);
        }
    }
    values
}

pub fn bet_on_bit(id: &str, bit: u8, stake: Capital, capital: Capital) -> AdversarySpec {
    AdversarySpec::builtin(id, "bet_on_bit", capital, json!({"bit": bit, "stake": stake}))
}

/// Three adversaries: `bet_on_bit(1,1)` with capital 3, a copy of
/// `bet_on_bit(1,1)` at capital 10 whose wagers start arriving at stage 50,
/// and a table wagering only at the root.
pub fn fi_regression_roster() -> FiConfig {
    let late = AdversarySpec::builtin(
        "late",
        "copycat",
        10,
        json!({"delay": 50, "of": bet_on_bit("inner", 1, 1, 10)}),
    );
    let partial = AdversarySpec::table(
        "partial",
        2,
        vec![ivr_core::martingale::WagerSpec { node: BinaryString::new(), side: 1, stake: 1, defined_at_stage: 0 }],
    );
    FiConfig { roster: vec![bet_on_bit("bet", 1, 1, 3), late, partial], q_max: None }
}

/// Two or three finite random tables with capitals up to 4.
pub fn fi_random_roster(seed: u64) -> FiConfig {
    let mut r = rng(seed);
    let n = r.gen_range(2..=3);
    let roster = (0..n)
        .map(|e| {
            let capital = r.gen_range(1..=4);
            let depth = r.gen_range(4..=9);
            let t = random_table(&mut r, depth, capital, 1.0);
            AdversarySpec::table(&format!("t{e}"), capital, table_wagers(&t))
        })
        .collect();
    FiConfig { roster, q_max: None }
}

pub fn table_wagers(t: &MartingaleTable) -> Vec<ivr_core::martingale::WagerSpec> {
    t.wagers
        .iter()
        .map(|(node, &w)| ivr_core::martingale::WagerSpec { node: node.clone(), side: u8::from(w >= 0), stake: w.abs(), defined_at_stage: 0 })
        .collect()
}

/// Random rosters of at most two capital-1 adversaries.
pub fn lv_rosters(count: usize, seed: u64) -> Vec<LvConfig> {
    let mut r = rng(seed);
    (0..count)
        .map(|_| {
            let n = r.gen_range(0..=2);
            let roster = (0..n)
                .map(|e| {
                    let id = format!("a{e}");
                    match r.gen_range(0..4) {
                        0 => bet_on_bit(&id, r.gen_range(0..=1), 1, 1),
                        1 => AdversarySpec::builtin(&id, "doubling", 1, json!({"bit": r.gen_range(0..=1)})),
                        2 => AdversarySpec::builtin(&id, "constant_bet", 1, json!({"bit": r.gen_range(0..=1), "stake": 1})),
                        _ => {
                            let t = random_table(&mut r, 4, 1, 1.0);
                            AdversarySpec::table(&id, 1, table_wagers(&t))
                        }
                    }
                })
                .collect();
            LvConfig::new(roster)
        })
        .collect()
}

/// `R_0` and `R_1` with `W` schedules that settle; no functionals.
pub fn anc_stabilizing_config(seed: u64) -> AncConfig {
    let mut r = rng(seed);
    let roster = (0..4)
        .map(|_| {
            let w = (0..r.gen_range(0..5))
                .map(|_| WEntry { stage: r.gen_range(1..40), add: (0..r.gen_range(1..4)).map(|_| r.gen_range(0..12)).collect() })
                .collect();
            AncEntry { w, ..Default::default() }
        })
        .collect();
    AncConfig { roster }
}

/// Pair 1 is an honest identity pair that re-converges after each of two
/// `B`-changes inside `R_1`'s block `D_1 = {1, 2}`.
pub fn anc_recovery_config() -> AncConfig {
    let mut axioms: Vec<Axiom> = identity_axioms(&BTreeSet::new(), 6, 0);
    axioms.extend(identity_axioms(&BTreeSet::from([1]), 9, 20));
    axioms.extend(identity_axioms(&BTreeSet::from([1, 2]), 12, 40));
    axioms.sort_by(|a, b| (a.input, &a.oracle_prefix).cmp(&(b.input, &b.oracle_prefix)));
    axioms.dedup_by(|a, b| a.input == b.input && a.oracle_prefix == b.oracle_prefix);
    let pair = AncEntry {
        w: vec![WEntry { stage: 10, add: vec![1] }, WEntry { stage: 30, add: vec![2] }],
        gamma: axioms.clone(),
        delta: axioms,
    };
    AncConfig { roster: vec![AncEntry::default(), pair] }
}

/// Runs an engine into an in-memory trace.
pub fn record(engine: &str, config: &Value, budget: u64) -> Vec<u8> {
    let mut w = TraceWriter::new(Vec::new());
    w.header(&TraceHeader::new(engine, budget, config.clone())).unwrap();
    let mut driver = build_driver(engine, config).unwrap();
    let outcome = drive(driver.as_mut(), budget, false, &mut |e| w.event(e)).unwrap();
    assert!(outcome.error.is_none(), "{engine} run failed: {:?}", outcome.error);
    w.finish().unwrap()
}
