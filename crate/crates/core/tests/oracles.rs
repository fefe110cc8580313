//! Library results checked against brute-force oracles and proptests.

mod common;

use common::*;
use ivr_core::forcing::{compute_h, escalation_feasible, greedy_force, hat_operator, least_decreasing_extension};
use ivr_core::levels::{build_levels, forbidden_bound, maximin_enumerate, maximin_pruned, move_bound, Variant};
use ivr_core::martingale::{evaluate, validate, AtStage, Capital, Limit, Martingale, StagedMartingale, ValueConstraint};
use ivr_core::BinaryString;
use num_bigint::BigUint;
use proptest::prelude::*;
use std::cell::RefCell;
use std::collections::BTreeSet;

/// `μn (k − (2^n − 1) < k/2)`, searched directly.
fn move_bound_oracle(k: u64) -> u64 {
    if k == 0 {
        return 0;
    }
    (0..).find(|&n| 2 * (k as i128 - ((1i128 << n) - 1)) < k as i128).unwrap()
}

fn factorial(n: u128) -> u128 {
    (1..=n).product()
}

#[test]
fn move_bound_matches_search() {
    for k in 0..=200_000u64 {
        assert_eq!(move_bound(&BigUint::from(k)), move_bound_oracle(k), "k = {k}");
    }
}

#[test]
fn forbidden_bound_matches_summation() {
    for i in 0..=12u128 {
        let plain: u128 = (0..=i).map(|j| factorial(j + 1)).sum();
        let coding: u128 = (0..=i).map(|j| 2 * factorial(j + 1) + 1).sum();
        assert_eq!(forbidden_bound(i as u64, Variant::Plain).unwrap(), BigUint::from(plain));
        assert_eq!(forbidden_bound(i as u64, Variant::Coding).unwrap(), BigUint::from(coding));
    }
}

#[test]
fn plain_levels_by_hand() {
    let t = build_levels(Variant::Plain, &[1], 3).unwrap();
    let nums = |v: &[BigUint]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    assert_eq!(nums(&t.l), "0,3,24,232");
    assert_eq!(nums(&t.d), "0,1,4,13");
    let p = build_levels(Variant::Pivr, &[1], 1).unwrap();
    assert_eq!(nums(&p.l), "0,5");
    assert_eq!(nums(&p.d), "0,160");
}

#[test]
fn literal_h_and_escalation() {
    assert!((0..=100).all(|n| compute_h(n) == 1));
    for k in 0..=300i64 {
        for n in 0..=300i64 {
            assert_eq!(escalation_feasible(k as u64, n as u64), 2 * (k - n * (n - 1) / 2) > k, "k={k} n={n}");
        }
    }
}

/// Records every node whose wager is read.
struct Recording<'a, M> {
    inner: &'a M,
    queried: RefCell<Vec<BinaryString>>,
}

impl<M: Martingale> Martingale for Recording<'_, M> {
    fn initial_capital(&self) -> Capital {
        self.inner.initial_capital()
    }
    fn wager(&self, node: &BinaryString) -> Option<Capital> {
        self.queried.borrow_mut().push(node.clone());
        self.inner.wager(node)
    }
}

#[test]
fn greedy_reads_only_its_path() {
    let mut r = rng(7);
    for _ in 0..200 {
        let t = random_table(&mut r, 6, 5, 1.0);
        let rec = Recording { inner: &t, queried: RefCell::new(Vec::new()) };
        let out = greedy_force(&rec, &BinaryString::new(), 6).unwrap();
        assert!(rec.queried.borrow().iter().all(|q| q.is_prefix_of(&out.path)));
    }
}

/// Every valid depth-3 table with wagers in {−2,…,2} and capital ≤ 5.
#[test]
fn greedy_exhaustive_depth_three() {
    let mut count = 0u64;
    for capital in 0..=5 {
        let mut stack: Vec<Vec<Capital>> = vec![Vec::new()];
        let nodes: Vec<BinaryString> = (0..3).flat_map(BinaryString::all_of_length).collect();
        while let Some(ws) = stack.pop() {
            if ws.len() == nodes.len() {
                let mut t = ivr_core::martingale::MartingaleTable::new(capital);
                for (n, &w) in nodes.iter().zip(&ws) {
                    t.wagers.insert(n.clone(), w);
                }
                let res = greedy_force(&t, &BinaryString::new(), 3).unwrap();
                assert!(res.capital_trace.windows(2).all(|p| p[1] <= p[0]));
                assert!(res.strict_decreases as Capital <= capital);
                count += 1;
                continue;
            }
            let node = &nodes[ws.len()];
            let parent_value = {
                let mut v = capital;
                for i in 0..node.len() {
                    let p = node.prefix(i);
                    let idx = nodes.iter().position(|n| *n == p).unwrap();
                    v += if node.bit(i) == 1 { ws[idx] } else { -ws[idx] };
                }
                v
            };
            let m = parent_value.min(2);
            for w in -m..=m {
                let mut next = ws.clone();
                next.push(w);
                stack.push(next);
            }
        }
    }
    assert_eq!(count, 1 + 491 + 8465 + 32025 + 58125 + 73125);
}

#[test]
fn least_decreasing_is_lex_least() {
    let mut r = rng(11);
    for _ in 0..300 {
        let t = random_table(&mut r, 6, 4, 1.0);
        let sigma = bs("01");
        let v0 = evaluate(&t, &sigma).unwrap();
        let got = least_decreasing_extension(&t, &sigma, 6).unwrap();
        let want = BinaryString::all_of_length(4)
            .map(|tail| sigma.concat(&tail))
            .find(|tau| evaluate(&t, tau).unwrap() <= v0)
            .unwrap();
        assert_eq!(got, want);
    }
}

/// Brute-force trajectory: at stage `s+1`, scan extensions by (length, lex).
fn hat_oracle<S: StagedMartingale>(adv: &S, sigma: &BinaryString, budget: u64, max_len: usize) -> (BinaryString, usize) {
    let mut cur = sigma.clone();
    let mut changes = 0;
    for s in 0..budget {
        let view = AtStage::new(adv, s + 1);
        let Ok(v) = evaluate(&view, &cur) else { continue };
        let top = ((s + 1) as usize).min(max_len);
        let found = ((cur.len() + 1)..=top).find_map(|len| {
            BinaryString::all_of_length(len - cur.len())
                .map(|tail| cur.concat(&tail))
                .find(|tau| evaluate(&view, tau).is_ok_and(|tv| tv < v))
        });
        if let Some(tau) = found {
            cur = tau;
            changes += 1;
        }
    }
    (cur, changes)
}

#[test]
fn hat_matches_brute_force() {
    let mut r = rng(3);
    for _ in 0..150 {
        let adv = random_staged(&mut r, 7, 3, 12);
        for sigma in ["", "0", "1", "10"] {
            let sigma = bs(sigma);
            let t = hat_operator(&adv, &sigma, 14);
            let (want, changes) = hat_oracle(&adv, &sigma, 14, 8);
            assert_eq!(t.last(), &want);
            assert_eq!(t.change_count, changes);
            if let Ok(v) = evaluate(&Limit(&adv), &sigma) {
                assert!(t.change_count as Capital <= v + 1);
            }
        }
    }
}

fn maximin_oracle(forbidden: &[BinaryString], base: &BinaryString, len: usize, visited: &BTreeSet<BinaryString>) -> Option<(BinaryString, Option<usize>)> {
    let mut best: Option<(BinaryString, Option<usize>)> = None;
    for tail in BinaryString::all_of_length(len - base.len()) {
        let rho = base.concat(&tail);
        if visited.contains(&rho) {
            continue;
        }
        let d = forbidden.iter().map(|mu| len - rho.common_prefix_len(mu)).min();
        let key = d.unwrap_or(usize::MAX);
        if best.as_ref().is_none_or(|(_, bd)| key > bd.unwrap_or(usize::MAX)) {
            best = Some((rho, d));
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn maximin_variants_agree(
        base in "[01]{0,3}",
        gap in 1usize..8,
        raw in proptest::collection::vec(proptest::collection::vec(0u8..2, 10), 0..12),
        visit in proptest::collection::vec(proptest::collection::vec(0u8..2, 10), 0..6),
    ) {
        let base = bs(&base);
        let len = base.len() + gap;
        let cut = |v: &Vec<u8>, inside: bool| {
            let s = BinaryString::from_bits(v.iter().copied().take(len));
            if inside { base.concat(&s.prefix(gap)) } else { s }
        };
        let forbidden: Vec<BinaryString> = raw.iter().enumerate().map(|(i, v)| cut(v, i % 3 != 0)).collect::<BTreeSet<_>>().into_iter().collect();
        let visited: BTreeSet<BinaryString> = visit.iter().map(|v| cut(v, true)).collect();
        let refs: Vec<&BinaryString> = forbidden.iter().collect();
        let want = maximin_oracle(&forbidden, &base, len, &visited);
        let e = maximin_enumerate(&refs, &base, len, &visited, true).ok().map(|c| (c.string, c.distance));
        prop_assert_eq!(&e, &want);
        let p = maximin_pruned(&refs, &base, len, &visited, true).ok().map(|c| (c.string, c.distance));
        prop_assert_eq!(&p, &want);
    }

    #[test]
    fn fairness_and_bounds(seed in any::<u64>(), depth in 0usize..10, capital in 0i64..20) {
        let mut r = rng(seed);
        let t = random_table(&mut r, depth, capital, 0.8);
        prop_assert!(validate(&t, &ValueConstraint::Integer, depth).is_valid());
        let values = table_values(&t);
        for (node, v) in &values {
            prop_assert!(*v >= 0);
            prop_assert!(*v <= (capital as i128) << node.len());
            prop_assert_eq!(evaluate(&t, node).unwrap() as i128, *v);
        }
        for node in t.wagers.keys() {
            prop_assert_eq!(values[&node.child(0)] + values[&node.child(1)], 2 * values[node]);
        }
    }

    #[test]
    fn staged_wagers_are_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let adv = random_staged(&mut r, 6, 4, 15);
        let nodes: Vec<BinaryString> = (0..7).flat_map(BinaryString::all_of_length).collect();
        for s in 0..20u64 {
            prop_assert!(adv.converged_length(s) <= adv.converged_length(s + 1));
            for n in &nodes {
                if let Some(w) = adv.wager_at(s, n) {
                    prop_assert_eq!(adv.wager_at(s + 1, n), Some(w));
                    prop_assert_eq!(adv.limit_wager(n), Some(w));
                }
            }
        }
    }

    #[test]
    fn greedy_never_gains(seed in any::<u64>(), capital in 0i64..8) {
        let mut r = rng(seed);
        let t = random_table(&mut r, 9, capital, 1.0);
        let res = greedy_force(&t, &BinaryString::new(), 9).unwrap();
        prop_assert!(res.capital_trace.windows(2).all(|p| p[1] <= p[0]));
        prop_assert!(res.strict_decreases as Capital <= capital);
    }
}
