use crate::chem::Bond;

use super::ScanError;

fn adjacency(n: usize, bonds: &[Bond]) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); n];
    for (e, &(a, b)) in bonds.iter().enumerate() {
        adj[a].push((b, e));
        adj[b].push((a, e));
    }
    adj
}

/// Bridges of an undirected simple graph on `n` nodes via iterative DFS low-link.
/// Output pairs are normalized to `i < j` and sorted.
pub fn bridges(n: usize, bonds: &[Bond]) -> Vec<Bond> {
    let adj = adjacency(n, bonds);
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut out = Vec::new();
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // (node, edge id used to enter it, next adjacency cursor)
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (u, parent_edge, ref mut cursor)) = stack.last_mut() {
            if let Some(&(v, e)) = adj[u].get(*cursor) {
                *cursor += 1;
                if e == parent_edge {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, e, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        out.push((p.min(u), p.max(u)));
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out
}

/// Component id per node with edge `skip` (if any) removed.
pub(crate) fn components(n: usize, bonds: &[Bond], skip: Option<Bond>) -> Vec<usize> {
    let adj = adjacency(n, bonds);
    let skip = skip.map(|(a, b)| (a.min(b), a.max(b)));
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = next;
        let mut queue = vec![s];
        while let Some(u) = queue.pop() {
            for &(v, e) in &adj[u] {
                let (a, b) = bonds[e];
                if Some((a.min(b), a.max(b))) == skip {
                    continue;
                }
                if comp[v] == usize::MAX {
                    comp[v] = next;
                    queue.push(v);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Labels `-1` for the side of `a` and `+1` for the side of `b` once `(a, b)`
/// is cut. Atoms in other components of a disconnected graph travel with `a`.
pub(crate) fn split_labels(n: usize, bonds: &[Bond], (a, b): Bond) -> Result<Vec<i8>, ScanError> {
    let key = (a.min(b), a.max(b));
    if a >= n || b >= n || !bonds.iter().any(|&(i, j)| (i.min(j), i.max(j)) == key) {
        return Err(ScanError::UnknownBond(a, b));
    }
    let comp = components(n, bonds, Some(key));
    if comp[a] == comp[b] {
        return Err(ScanError::NotABridge(a, b));
    }
    Ok(comp.iter().map(|&c| if c == comp[b] { 1 } else { -1 }).collect())
}
