//! Independent reference implementations used as test oracles. Nothing in
//! here calls into the code paths it checks.
#![allow(dead_code)]

use bidder_core::holdem::Card;

/// Classic five-card classifier: returns (category, tie-break ranks) where
/// the tuple ordering is the poker ordering.
pub fn brute_rank5(cards: &[Card; 5]) -> (u8, Vec<u8>) {
    let mut ranks: Vec<u8> = cards.iter().map(|c| c.rank()).collect();
    ranks.sort_unstable_by(|a, b| b.cmp(a));
    let flush = cards.iter().all(|c| c.suit() == cards[0].suit());
    let mut distinct = ranks.clone();
    distinct.dedup();
    let straight_top = if distinct.len() == 5 {
        if ranks[0] - ranks[4] == 4 {
            Some(ranks[0])
        } else if ranks == vec![14, 5, 4, 3, 2] {
            Some(5)
        } else {
            None
        }
    } else {
        None
    };
    // group by multiplicity, then by rank
    let mut groups: Vec<(usize, u8)> =
        distinct.iter().map(|&r| (ranks.iter().filter(|&&x| x == r).count(), r)).collect();
    groups.sort_unstable_by(|a, b| b.cmp(a));
    let by_groups: Vec<u8> = groups.iter().map(|g| g.1).collect();
    let shape: Vec<usize> = groups.iter().map(|g| g.0).collect();
    match (straight_top, flush, shape.as_slice()) {
        (Some(top), true, _) => (8, vec![top]),
        (_, _, [4, 1]) => (7, by_groups),
        (_, _, [3, 2]) => (6, by_groups),
        (_, true, _) => (5, ranks),
        (Some(top), false, _) => (4, vec![top]),
        (_, _, [3, 1, 1]) => (3, by_groups),
        (_, _, [2, 2, 1]) => (2, by_groups),
        (_, _, [2, 1, 1, 1]) => (1, by_groups),
        _ => (0, ranks),
    }
}

/// Best of all C(7,5) five-card subsets.
pub fn brute_rank7(cards: &[Card]) -> (u8, Vec<u8>) {
    assert_eq!(cards.len(), 7);
    let mut best: Option<(u8, Vec<u8>)> = None;
    for skip_a in 0..7 {
        for skip_b in (skip_a + 1)..7 {
            let five: Vec<Card> = (0..7).filter(|&i| i != skip_a && i != skip_b).map(|i| cards[i]).collect();
            let r = brute_rank5(&[five[0], five[1], five[2], five[3], five[4]]);
            if best.as_ref().is_none_or(|b| r > *b) {
                best = Some(r);
            }
        }
    }
    best.unwrap()
}

/// Max over traces of the discounted reward sum, grouped by first action.
pub fn brute_max_returns(traces: &[(String, Vec<f64>)], beta: f64) -> std::collections::BTreeMap<String, f64> {
    let mut out = std::collections::BTreeMap::new();
    for (first, rewards) in traces {
        let mut g = 0.0;
        for (k, r) in rewards.iter().enumerate() {
            g += beta.powi(k as i32) * r;
        }
        let e = out.entry(first.clone()).or_insert(f64::NEG_INFINITY);
        if g > *e {
            *e = g;
        }
    }
    out
}

/// Exhaustive Pareto check over every allocation of the pool.
pub fn brute_pareto(deal: [u32; 3], pool: [u32; 3], ua: [u32; 3], ub: [u32; 3]) -> bool {
    let score = |u: [u32; 3], x: [u32; 3]| -> u32 { (0..3).map(|i| u[i] * x[i]).sum() };
    let rest = |x: [u32; 3]| [pool[0] - x[0], pool[1] - x[1], pool[2] - x[2]];
    let (a0, b0) = (score(ua, deal), score(ub, rest(deal)));
    for i in 0..=pool[0] {
        for j in 0..=pool[1] {
            for k in 0..=pool[2] {
                let y = [i, j, k];
                let (a, b) = (score(ua, y), score(ub, rest(y)));
                if a >= a0 && b >= b0 && (a > a0 || b > b0) {
                    return false;
                }
            }
        }
    }
    true
}
