use super::state::{ItemPool, UtilityVector};

/// For every achievable score of agent A, the best score agent B can get at
/// the same time. Entry `s` is `None` when A cannot score exactly `s`.
pub fn pareto_frontier(pool: &ItemPool, a: &UtilityVector, b: &UtilityVector) -> Vec<Option<u32>> {
    let max_a = a.total(pool) as usize;
    let mut best: Vec<Option<u32>> = vec![None; max_a + 1];
    best[0] = Some(0);
    for item in 0..3 {
        let count = pool.0[item];
        let mut next: Vec<Option<u32>> = vec![None; max_a + 1];
        for (score_a, b_score) in best.iter().enumerate() {
            let Some(b_score) = b_score else { continue };
            for taken in 0..=count {
                let sa = score_a + (a.0[item] * taken) as usize;
                let sb = b_score + b.0[item] * (count - taken);
                if next[sa].is_none_or(|cur| sb > cur) {
                    next[sa] = Some(sb);
                }
            }
        }
        best = next;
    }
    best
}

/// True iff no other split of the pool gives one agent more without giving
/// the other less. `a_share` is what agent A receives; B gets the rest. A
/// share that is not a sub-allocation of the pool is never optimal.
pub fn pareto_optimal(a_share: [u32; 3], pool: &ItemPool, a: &UtilityVector, b: &UtilityVector) -> bool {
    let Some(b_share) = super::state::Proposal(a_share).complement(pool) else { return false };
    let (sa, sb) = (a.dot(a_share), b.dot(b_share));
    let frontier = pareto_frontier(pool, a, b);
    // best B score over allocations giving A at least `from`
    let best_b_from = |from: usize| frontier.iter().skip(from).filter_map(|x| *x).max();
    let sa = sa as usize;
    best_b_from(sa).is_none_or(|m| m <= sb) && best_b_from(sa + 1).is_none_or(|m| m < sb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unique_values_split_is_optimal() {
        let pool = ItemPool([2, 1, 3]);
        let a = UtilityVector([3, 0, 0]);
        let b = UtilityVector([0, 3, 1]);
        assert!(pareto_optimal([2, 0, 0], &pool, &a, &b));
    }

    #[test]
    fn giving_away_zero_value_item_is_not_optimal() {
        let pool = ItemPool([2, 1, 3]);
        let a = UtilityVector([3, 0, 0]);
        let b = UtilityVector([0, 3, 1]);
        // A holds the strawberry it values at 0 while B values it at 3
        assert!(!pareto_optimal([2, 1, 0], &pool, &a, &b));
        assert!(!pareto_optimal([5, 0, 0], &pool, &a, &b));
    }

    #[test]
    fn frontier_extremes() {
        let pool = ItemPool([1, 1, 1]);
        let a = UtilityVector([1, 2, 3]);
        let b = UtilityVector([3, 2, 1]);
        let f = pareto_frontier(&pool, &a, &b);
        assert_eq!(f[0], Some(6));
        assert_eq!(f[6], Some(0));
    }
}
