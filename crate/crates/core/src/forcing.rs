//! Forcing a bounded-capital bettor to lose, and the staged search for
//! least decreasing extensions.

use crate::error::{Error, Result};
use crate::martingale::{apply, evaluate, AtStage, Capital, Martingale, StagedMartingale};
use crate::strings::BinaryString;
use serde::Serialize;
use std::collections::VecDeque;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ForcingResult {
    pub path: BinaryString,
    /// Adversary value at `path ↾ (|start| + j)`.
    pub capital_trace: Vec<Capital>,
    pub strict_decreases: usize,
}

/// Extends `start` by `depth` bits, each time moving to a child whose value
/// does not exceed the parent's. Prefers bit 0 when the wager is neutral.
pub fn greedy_force<M: Martingale + ?Sized>(adversary: &M, start: &BinaryString, depth: usize) -> Result<ForcingResult> {
    let walk = adversary.walk(start)?;
    if !walk.complete {
        return Err(Error::PartialAdversary { at: start.prefix(walk.defined_len()) });
    }
    let mut path = start.clone();
    let mut value = walk.last();
    let mut capital_trace = vec![value];
    let mut strict_decreases = 0;
    for _ in 0..depth {
        let w = adversary.wager(&path).ok_or_else(|| Error::PartialAdversary { at: path.clone() })?;
        let bit = u8::from(w < 0);
        path.push(bit);
        let next = apply(value, w, bit, &path)?;
        if next < value {
            strict_decreases += 1;
        }
        value = next;
        capital_trace.push(value);
    }
    Ok(ForcingResult { path, capital_trace, strict_decreases })
}

/// Lex-least `τ ⪰ σ` of length `h` with `m(τ) ≤ m(σ)`.
pub fn least_decreasing_extension<M: Martingale + ?Sized>(adversary: &M, sigma: &BinaryString, h: usize) -> Result<BinaryString> {
    if h < sigma.len() {
        return Err(Error::LengthMismatch { left: sigma.len(), right: h });
    }
    let v0 = evaluate(adversary, sigma).map_err(|_| Error::NotConverged { len: h })?;
    let mut node = sigma.clone();
    if search_below(adversary, &mut node, v0, v0, h)? {
        Ok(node)
    } else {
        // Unreachable for a valid martingale: averaging guarantees a witness.
        Err(Error::NotConverged { len: h })
    }
}

fn search_below<M: Martingale + ?Sized>(m: &M, node: &mut BinaryString, value: Capital, bound: Capital, h: usize) -> Result<bool> {
    if node.len() == h {
        return Ok(value <= bound);
    }
    let w = m.wager(node).ok_or(Error::NotConverged { len: h })?;
    for bit in [0u8, 1] {
        node.push(bit);
        let child = apply(value, w, bit, node)?;
        if search_below(m, node, child, bound, h)? {
            return Ok(true);
        }
        node.pop();
    }
    Ok(false)
}

/// Upper bound on nodes visited by one stage of the hat search.
pub const HAT_SEARCH_NODE_CAP: usize = 1 << 18;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HatTrajectory {
    /// `values[s]` is `m̂_s(σ)`.
    pub values: Vec<BinaryString>,
    pub change_count: usize,
    /// Set when some stage's search hit [`HAT_SEARCH_NODE_CAP`].
    pub search_limited: bool,
}

impl HatTrajectory {
    pub fn last(&self) -> &BinaryString {
        self.values.last().expect("values[0] = σ")
    }
}

/// `m̂_0(σ) = σ`; at stage `s+1`, if `m_{s+1}(m̂_s(σ))` is defined and some
/// extension `τ` of it with `|τ| ≤ s+1` has a strictly smaller defined
/// value, `m̂_{s+1}(σ)` is the (length, lex)-least such `τ`.
pub fn hat_operator<S: StagedMartingale + ?Sized>(adversary: &S, sigma: &BinaryString, budget: u64) -> HatTrajectory {
    let mut values = vec![sigma.clone()];
    let mut change_count = 0;
    let mut search_limited = false;
    for s in 0..budget {
        let cur = values.last().expect("nonempty").clone();
        let stage = s + 1;
        let view = AtStage::new(adversary, stage);
        let next = match evaluate(&view, &cur) {
            Ok(v) => {
                let max_len = usize::try_from(stage).unwrap_or(usize::MAX);
                let (found, limited) = least_strict_improvement(&view, &cur, v, max_len, HAT_SEARCH_NODE_CAP);
                search_limited |= limited;
                found
            }
            Err(_) => None,
        };
        match next {
            Some(tau) => {
                change_count += 1;
                values.push(tau);
            }
            None => values.push(cur),
        }
    }
    HatTrajectory { values, change_count, search_limited }
}

/// Breadth-first in (length, lex) order over defined proper extensions of
/// `root` of length `≤ max_len`; returns the first with value `< v_root`.
pub fn least_strict_improvement<M: Martingale + ?Sized>(
    m: &M,
    root: &BinaryString,
    v_root: Capital,
    max_len: usize,
    node_cap: usize,
) -> (Option<BinaryString>, bool) {
    let mut queue = VecDeque::from([(root.clone(), v_root)]);
    let mut visited = 0usize;
    while let Some((node, v)) = queue.pop_front() {
        if node.len() >= max_len {
            continue;
        }
        let Some(w) = m.wager(&node) else { continue };
        for bit in [0u8, 1] {
            let child = node.child(bit);
            let Ok(cv) = apply(v, w, bit, &child) else { continue };
            if cv < v_root {
                return (Some(child), false);
            }
            visited += 1;
            if visited > node_cap {
                return (None, true);
            }
            queue.push_back((child, cv));
        }
    }
    (None, false)
}

/// Whether capital `k` can stake `1, 2, …, n−1` and then everything left and
/// still come out ahead: `k > (n−1)n`.
pub fn escalation_feasible(k: u64, n: u64) -> bool {
    let k = u128::from(k);
    let n = u128::from(n);
    k > n.saturating_sub(1) * n
}

/// `h(0) = 1`, `h(n) = max{ m : (m−1)m < h(n−1) + 1 }`, taken literally.
/// The recursion is constant at 1.
pub fn compute_h(n: u64) -> u64 {
    let mut h = 1u64;
    for _ in 0..n {
        let mut m = 1u64;
        while m * (m + 1) < h + 1 {
            m += 1;
        }
        h = m;
    }
    h
}

/// Growing schedule usable in place of [`compute_h`]: `h_alt(n) = n + 1`.
pub fn h_alt(n: u64) -> u64 {
    n + 1
}

/// Least capital `k` with `escalation_feasible(k, h)`.
pub fn required_capital(h: u64) -> u64 {
    h.saturating_sub(1) * h + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::martingale::{builtin, Limit, MartingaleTable, StagedTable};
    use serde_json::json;

    fn bs(s: &str) -> BinaryString {
        s.parse().unwrap()
    }

    fn bet_on_one(capital: Capital) -> crate::martingale::Adversary {
        builtin("bet_on_bit", capital, json!({"bit": 1, "stake": 1}).as_object().unwrap()).unwrap()
    }

    fn neutral(capital: Capital, depth: usize) -> MartingaleTable {
        let mut t = MartingaleTable::new(capital);
        for len in 0..depth {
            for n in BinaryString::all_of_length(len) {
                t.wagers.insert(n, 0);
            }
        }
        t
    }

    #[test]
    fn greedy_examples() {
        let adv = bet_on_one(10);
        let r = greedy_force(&Limit(&adv), &bs(""), 5).unwrap();
        assert_eq!(r.path, bs("00000"));
        assert_eq!(r.capital_trace, vec![10, 9, 8, 7, 6, 5]);
        assert_eq!(r.strict_decreases, 5);

        let r = greedy_force(&neutral(7, 6), &bs(""), 6).unwrap();
        assert_eq!(r.path, bs("000000"));
        assert!(r.capital_trace.iter().all(|&v| v == 7));
        assert_eq!(r.strict_decreases, 0);

        assert!(matches!(greedy_force(&neutral(7, 2), &bs(""), 3), Err(Error::PartialAdversary { .. })));
    }

    #[test]
    fn least_decreasing_examples() {
        assert_eq!(least_decreasing_extension(&neutral(3, 4), &bs("0"), 3).unwrap(), bs("000"));
        let adv = bet_on_one(4);
        let tau = least_decreasing_extension(&Limit(&adv), &bs("0"), 3).unwrap();
        assert_eq!(tau, bs("000"));
        assert!(evaluate(&Limit(&adv), &tau).unwrap() < evaluate(&Limit(&adv), &bs("0")).unwrap());
        assert!(matches!(least_decreasing_extension(&neutral(3, 2), &bs("0"), 4), Err(Error::NotConverged { len: 4 })));
    }

    #[test]
    fn hat_examples() {
        let empty = StagedTable::new(5, Default::default());
        let t = hat_operator(&empty, &bs("1"), 20);
        assert!(t.values.iter().all(|v| *v == bs("1")));
        assert_eq!(t.change_count, 0);

        let adv = bet_on_one(2);
        let t = hat_operator(&adv, &bs("1"), 12);
        let v = evaluate(&Limit(&adv), &bs("1")).unwrap();
        assert!(t.change_count as Capital <= v + 1);
        // Capital 3 at "1" drains along zeros: 10, 100, 1000.
        assert_eq!(t.last(), &bs("1000"));
        assert!(!t.search_limited);
    }

    #[test]
    fn escalation_examples() {
        assert!(escalation_feasible(3, 2));
        assert!(!escalation_feasible(2, 2));
        assert!(escalation_feasible(1, 1));
        for h in 1..50 {
            assert!(escalation_feasible(required_capital(h), h));
            assert!(!escalation_feasible(required_capital(h) - 1, h));
        }
    }

    #[test]
    fn literal_h_is_constant() {
        assert_eq!(compute_h(0), 1);
        assert_eq!(compute_h(1), 1);
        assert_eq!(compute_h(5), 1);
        assert!((0..20).all(|n| h_alt(n + 1) > h_alt(n)));
    }
}
