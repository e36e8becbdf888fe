//! Simple-cycle enumeration with Johnson's algorithm.
//!
//! Vertices are processed in ascending order; for a start vertex `s` only the
//! strongly connected piece of the subgraph induced by `{v >= s}` that
//! contains `s` is searched. Self-loops count as cycles of length one.
//! The search is iterative, so deep components do not grow the call stack.

use std::collections::BTreeSet;
use std::ops::ControlFlow;

/// Calls `visit` with each simple cycle (as a vertex sequence starting at its
/// smallest vertex) until it breaks.
pub fn visit_simple_cycles<F>(adj: &[Vec<usize>], mut visit: F)
where
    F: FnMut(&[usize]) -> ControlFlow<()>,
{
    let n = adj.len();
    let mut radj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (v, outs) in adj.iter().enumerate() {
        for &w in outs {
            radj[w].push(v);
        }
    }

    let mut in_comp = vec![false; n];
    let mut blocked = vec![false; n];
    let mut block_map: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];

    for s in 0..n {
        let comp = component_of(s, adj, &radj);
        let has_self_loop = adj[s].contains(&s);
        if comp.len() == 1 && !has_self_loop {
            continue;
        }
        for &v in &comp {
            in_comp[v] = true;
            blocked[v] = false;
            block_map[v].clear();
        }
        let nbrs = |v: usize| -> Vec<usize> {
            adj[v].iter().copied().filter(|&w| w >= s).collect()
        };

        let mut path = vec![s];
        let mut closed = vec![false];
        let mut stack: Vec<(usize, Vec<usize>)> = vec![(s, nbrs(s))];
        blocked[s] = true;
        let mut stop = false;
        'search: while let Some((this, pending)) = stack.last_mut() {
            let this = *this;
            if let Some(next) = pending.pop() {
                if !in_comp[next] {
                    continue;
                }
                if next == s {
                    if visit(&path).is_break() {
                        stop = true;
                        break 'search;
                    }
                    *closed.last_mut().unwrap() = true;
                } else if !blocked[next] {
                    path.push(next);
                    closed.push(false);
                    blocked[next] = true;
                    stack.push((next, nbrs(next)));
                }
                continue;
            }
            stack.pop();
            path.pop();
            let found = closed.pop().unwrap();
            if found {
                if let Some(last) = closed.last_mut() {
                    *last = true;
                }
                unblock(this, &mut blocked, &mut block_map);
            } else {
                for w in nbrs(this) {
                    if in_comp[w] {
                        block_map[w].insert(this);
                    }
                }
            }
        }
        for &v in &comp {
            in_comp[v] = false;
        }
        if stop {
            return;
        }
    }
}

fn unblock(v: usize, blocked: &mut [bool], block_map: &mut [BTreeSet<usize>]) {
    let mut work = vec![v];
    while let Some(u) = work.pop() {
        if blocked[u] {
            blocked[u] = false;
            let waiting = std::mem::take(&mut block_map[u]);
            work.extend(waiting);
        }
    }
}

/// Vertices `>= s` both reachable from `s` and reaching `s` within the
/// subgraph induced by `{v >= s}`.
fn component_of(s: usize, adj: &[Vec<usize>], radj: &[Vec<usize>]) -> Vec<usize> {
    let fwd = reach_from(s, adj);
    let bwd = reach_from(s, radj);
    fwd.intersection(&bwd).copied().collect()
}

fn reach_from(s: usize, adj: &[Vec<usize>]) -> BTreeSet<usize> {
    let mut seen = BTreeSet::from([s]);
    let mut work = vec![s];
    while let Some(v) = work.pop() {
        for &w in &adj[v] {
            if w >= s && seen.insert(w) {
                work.push(w);
            }
        }
    }
    seen
}

/// Counts simple cycles, stopping at `cap`. Returns `(count, capped)`, where
/// `capped` means at least one more cycle exists beyond `cap`.
pub fn count_simple_cycles(adj: &[Vec<usize>], cap: usize) -> (usize, bool) {
    let mut count = 0usize;
    let mut capped = false;
    visit_simple_cycles(adj, |_| {
        if count == cap {
            capped = true;
            return ControlFlow::Break(());
        }
        count += 1;
        ControlFlow::Continue(())
    });
    (count, capped)
}

pub fn simple_cycles(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    visit_simple_cycles(adj, |c| {
        out.push(c.to_vec());
        ControlFlow::Continue(())
    });
    out
}
