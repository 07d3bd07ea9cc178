//! Greedy node allocation under an explicit feeder order.

use crate::node::{NodeStepProblem, NodeStepSolution};

/// Serves feeders one after another in `order`. Each takes as much of its
/// demand as every downstream link it routes to can still hold, and its
/// routed flow is removed from those links before the next feeder is served.
///
/// Intended for small nodes (at most four feeders) where all orders can be
/// enumerated.
pub fn oracle_node(problem: &NodeStepProblem, order: &[usize]) -> NodeStepSolution {
    let n_in = problem.demand.len();
    assert!(n_in <= 4, "oracle nodes have at most four feeders");
    assert_eq!(order.len(), n_in, "order must list every feeder once");

    let mut left = problem.supply.clone();
    let mut outflow = vec![0.0; n_in];
    for &j in order {
        let mut take = problem.demand[j];
        for (i, e) in problem.rates[j].iter().enumerate() {
            if *e > 0.0 {
                take = take.min(left[i] / e);
            }
        }
        take = take.max(0.0);
        for (i, e) in problem.rates[j].iter().enumerate() {
            if *e > 0.0 {
                left[i] = (left[i] - e * take).max(0.0);
            }
        }
        outflow[j] = take;
    }
    let inflow = (0..problem.supply.len())
        .map(|i| (0..n_in).map(|j| problem.rates[j][i] * outflow[j]).sum())
        .collect();
    NodeStepSolution {
        outflow,
        inflow,
        settlement_order: order.to_vec(),
    }
}

/// All orderings of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for x in 0..n {
            if !prefix.contains(&x) {
                prefix.push(x);
                extend(prefix, n, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::with_capacity(n), n, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::LinkId;

    fn merge() -> NodeStepProblem {
        NodeStepProblem {
            incoming: vec![LinkId(1), LinkId(2)],
            outgoing: vec![LinkId(3)],
            supply: vec![300.0],
            demand: vec![220.0, 150.0],
            rates: vec![vec![1.0], vec![1.0]],
        }
    }

    #[test]
    fn merge_under_both_orders() {
        assert_eq!(oracle_node(&merge(), &[0, 1]).outflow, vec![220.0, 80.0]);
        assert_eq!(oracle_node(&merge(), &[1, 0]).outflow, vec![150.0, 150.0]);
    }

    #[test]
    fn unconstrained_is_order_free() {
        let mut p = merge();
        p.supply = vec![1000.0];
        for order in permutations(2) {
            assert_eq!(oracle_node(&p, &order).outflow, vec![220.0, 150.0]);
        }
    }

    #[test]
    fn single_feeder_takes_min_of_demand_and_scaled_supply() {
        let p = NodeStepProblem {
            incoming: vec![LinkId(1)],
            outgoing: vec![LinkId(2), LinkId(3)],
            supply: vec![3.0, 100.0],
            demand: vec![10.0],
            rates: vec![vec![0.5, 0.5]],
        };
        assert_eq!(oracle_node(&p, &[0]).outflow, vec![6.0]);
    }

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(0), vec![Vec::<usize>::new()]);
        assert_eq!(permutations(3).len(), 6);
        assert_eq!(permutations(4).len(), 24);
    }
}
