//! Small directed-graph utilities over index sets: Tarjan SCCs, bottom SCCs
//! and reachability.

/// Strongly connected components in reverse topological order (sinks first),
/// computed with an iterative Tarjan traversal.
pub fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    const UNVISITED: usize = usize::MAX;
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut sccs = Vec::new();
    let mut next_index = 0;
    // (node, next edge position)
    let mut work: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        work.push((root, 0));
        while let Some(&(v, pos)) = work.last() {
            if pos == 0 && index[v] == UNVISITED {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if pos < adj[v].len() {
                let w = adj[v][pos];
                work.last_mut().expect("work stack").1 += 1;
                if index[w] == UNVISITED {
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                sccs.push(comp);
            }
        }
    }
    sccs
}

/// SCCs with no edge leaving them.
pub fn bottom_sccs(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let sccs = tarjan_scc(adj);
    let mut comp_of = vec![0usize; adj.len()];
    for (c, comp) in sccs.iter().enumerate() {
        for &v in comp {
            comp_of[v] = c;
        }
    }
    let mut bottoms: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(c, comp)| {
            comp.iter()
                .all(|&v| adj[v].iter().all(|&w| comp_of[w] == *c))
        })
        .map(|(_, comp)| comp.clone())
        .collect();
    bottoms.sort();
    bottoms
}

/// Nodes reachable from `sources` (inclusive).
pub fn forward_reachable(adj: &[Vec<usize>], sources: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack: Vec<usize> = Vec::new();
    for &s in sources {
        if !seen[s] {
            seen[s] = true;
            stack.push(s);
        }
    }
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// Nodes that can reach some node in `targets` (inclusive).
pub fn backward_reachable(adj: &[Vec<usize>], targets: &[bool]) -> Vec<bool> {
    let n = adj.len();
    let mut rev = vec![Vec::new(); n];
    for (v, succ) in adj.iter().enumerate() {
        for &w in succ {
            rev[w].push(v);
        }
    }
    let sources: Vec<usize> = (0..n).filter(|&v| targets[v]).collect();
    forward_reachable(&rev, &sources)
}

/// Shortest path (as a node sequence, both ends included) by BFS.
pub fn shortest_path(adj: &[Vec<usize>], from: usize, to: usize) -> Option<Vec<usize>> {
    let n = adj.len();
    let mut prev = vec![usize::MAX; n];
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::new();
    seen[from] = true;
    queue.push_back(from);
    while let Some(v) = queue.pop_front() {
        if v == to {
            let mut path = vec![to];
            let mut cur = to;
            while cur != from {
                cur = prev[cur];
                path.push(cur);
            }
            path.reverse();
            return Some(path);
        }
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                prev[w] = v;
                queue.push_back(w);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scc_of_two_cycles_joined() {
        // 0 -> 1 -> 0, 1 -> 2, 2 -> 3 -> 2
        let adj = vec![vec![1], vec![0, 2], vec![3], vec![2]];
        let mut sccs = tarjan_scc(&adj);
        sccs.sort();
        assert_eq!(sccs, vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(bottom_sccs(&adj), vec![vec![2, 3]]);
    }

    #[test]
    fn singleton_without_self_loop_is_an_scc() {
        let adj = vec![vec![1], vec![]];
        assert_eq!(bottom_sccs(&adj), vec![vec![1]]);
    }

    #[test]
    fn reachability_and_paths() {
        let adj = vec![vec![1], vec![2], vec![], vec![0]];
        assert_eq!(forward_reachable(&adj, &[1]), vec![false, true, true, false]);
        assert_eq!(
            backward_reachable(&adj, &[false, false, true, false]),
            vec![true, true, true, true]
        );
        assert_eq!(shortest_path(&adj, 3, 2), Some(vec![3, 0, 1, 2]));
        assert_eq!(shortest_path(&adj, 2, 0), None);
    }

    #[test]
    fn deep_chain_does_not_overflow() {
        let n = 200_000;
        let adj: Vec<Vec<usize>> = (0..n).map(|i| if i + 1 < n { vec![i + 1] } else { vec![0] }).collect();
        let sccs = tarjan_scc(&adj);
        assert_eq!(sccs.len(), 1);
    }
}
