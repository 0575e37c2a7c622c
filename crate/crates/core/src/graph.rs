//! Directed-graph helpers over dense m x m adjacency predicates.

use std::collections::VecDeque;

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

/// Strongly connected components, each sorted, ordered by smallest member.
pub(crate) fn strongly_connected_components(m: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut g = DiGraph::<(), ()>::with_capacity(m, 0);
    let nodes: Vec<_> = (0..m).map(|_| g.add_node(())).collect();
    for i in 0..m {
        for j in 0..m {
            if i != j && edge(i, j) {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut comps: Vec<Vec<usize>> = tarjan_scc(&g)
        .into_iter()
        .map(|c| {
            let mut c: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
            c.sort_unstable();
            c
        })
        .collect();
    comps.sort_unstable_by_key(|c| c[0]);
    comps
}

/// Period of an irreducible graph: gcd of `level(u) + 1 - level(v)` over all
/// edges, with BFS levels from node 0. Self-loops count as edges.
pub(crate) fn period(m: usize, edge: impl Fn(usize, usize) -> bool) -> usize {
    let mut level = vec![usize::MAX; m];
    level[0] = 0;
    let mut queue = VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for v in 0..m {
            if edge(u, v) && level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0usize;
    for u in 0..m {
        for v in 0..m {
            if edge(u, v) && level[u] != usize::MAX && level[v] != usize::MAX {
                g = gcd(g, (level[u] + 1).abs_diff(level[v]));
                if g == 1 {
                    return 1;
                }
            }
        }
    }
    g
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_periods() {
        let three = |i: usize, j: usize| j == (i + 1) % 3;
        assert_eq!(period(3, three), 3);
        let two = |i: usize, j: usize| i != j;
        assert_eq!(period(2, two), 2);
        assert_eq!(period(3, two), 1);
        let lazy = |i: usize, j: usize| i == j || j == (i + 1) % 3;
        assert_eq!(period(3, lazy), 1);
    }

    #[test]
    fn components() {
        let blocks = |i: usize, j: usize| (i < 2) == (j < 2);
        assert_eq!(strongly_connected_components(4, blocks), vec![vec![0, 1], vec![2, 3]]);
        let chain = |i: usize, j: usize| j == i + 1;
        assert_eq!(strongly_connected_components(3, chain).len(), 3);
    }
}
