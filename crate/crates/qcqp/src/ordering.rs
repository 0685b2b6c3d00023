//! Reverse Cuthill–McKee ordering for envelope factorization.

use std::collections::VecDeque;

use crate::sparse::CsrMatrix;

/// Symmetric adjacency lists (self-loops removed) of a square pattern.
pub fn adjacency(pattern: &CsrMatrix) -> Vec<Vec<usize>> {
    let n = pattern.nrows();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for &j in pattern.row(i).0 {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    adj
}

/// RCM permutation: `perm[k]` is the original index placed at position `k`.
///
/// Nodes with degree above `max(16, 10 sqrt(n))` are excluded from the
/// level structure and appended last, so a few dense rows do not widen the
/// envelope of the whole matrix.
pub fn rcm(pattern: &CsrMatrix) -> Vec<usize> {
    let n = pattern.nrows();
    let adj = adjacency(pattern);
    let dense_limit = 16usize.max((10.0 * (n as f64).sqrt()) as usize);
    let dense: Vec<bool> = adj.iter().map(|a| a.len() > dense_limit).collect();
    let degree: Vec<usize> =
        adj.iter().map(|a| a.iter().filter(|&&j| !dense[j]).count()).collect();

    let mut visited = dense.clone();
    let mut order = Vec::with_capacity(n);
    loop {
        let seed = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| (degree[i], i));
        let Some(seed) = seed else { break };
        let root = pseudo_peripheral(seed, &adj, &dense, &degree);
        let mut queue = VecDeque::new();
        visited[root] = true;
        queue.push_back(root);
        let mut nbrs = Vec::new();
        while let Some(v) = queue.pop_front() {
            order.push(v);
            nbrs.clear();
            nbrs.extend(adj[v].iter().copied().filter(|&j| !visited[j]));
            nbrs.sort_by_key(|&j| (degree[j], j));
            for &j in &nbrs {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order.extend((0..n).filter(|&i| dense[i]));
    order
}

/// George–Liu search for a node of near-maximal eccentricity.
fn pseudo_peripheral(start: usize, adj: &[Vec<usize>], dense: &[bool], degree: &[usize]) -> usize {
    let mut root = start;
    let (mut ecc, mut last) = bfs_levels(root, adj, dense);
    for _ in 0..8 {
        let cand = *last.iter().min_by_key(|&&j| (degree[j], j)).unwrap();
        let (e, l) = bfs_levels(cand, adj, dense);
        if e <= ecc {
            break;
        }
        root = cand;
        ecc = e;
        last = l;
    }
    root
}

fn bfs_levels(root: usize, adj: &[Vec<usize>], dense: &[bool]) -> (usize, Vec<usize>) {
    let mut level = vec![usize::MAX; adj.len()];
    level[root] = 0;
    let mut frontier = vec![root];
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &v in &frontier {
            for &j in &adj[v] {
                if !dense[j] && level[j] == usize::MAX {
                    level[j] = depth + 1;
                    next.push(j);
                }
            }
        }
        if next.is_empty() {
            return (depth, frontier);
        }
        depth += 1;
        frontier = next;
    }
}

/// Moves every node with a negative sign behind all of its positive
/// neighbours, keeping the relative order otherwise.
///
/// Eliminating a constraint node before the primal nodes it couples produces
/// pivots of size `-δ` and large fill into the primal block.
pub fn delay_negative(perm: &[usize], pattern: &CsrMatrix, signs: &[i8]) -> Vec<usize> {
    let n = perm.len();
    let pos = invert(perm);
    // key: position of the node, or just after its last positive neighbour
    let mut keyed: Vec<(usize, usize, usize)> = (0..n)
        .map(|k| {
            let v = perm[k];
            if signs[v] >= 0 {
                return (k, 0, v);
            }
            let last = pattern.row(v).0.iter().filter(|&&j| signs[j] >= 0).map(|&j| pos[j]).max();
            match last {
                Some(l) if l > k => (l, 1, v),
                _ => (k, 0, v),
            }
        })
        .collect();
    keyed.sort_unstable();
    keyed.into_iter().map(|t| t.2).collect()
}

/// Inverse permutation.
pub fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    inv
}

/// Bandwidth of the pattern under `perm`.
pub fn bandwidth(pattern: &CsrMatrix, perm: &[usize]) -> usize {
    let inv = invert(perm);
    let mut bw = 0;
    for i in 0..pattern.nrows() {
        for &j in pattern.row(i).0 {
            bw = bw.max(inv[i].abs_diff(inv[j]));
        }
    }
    bw
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 1.0));
            t.push((i, (i + 1) % n, 1.0));
            t.push(((i + 1) % n, i, 1.0));
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn rcm_is_a_permutation() {
        let p = rcm(&cycle(37));
        let mut s = p.clone();
        s.sort_unstable();
        assert_eq!(s, (0..37).collect::<Vec<_>>());
    }

    #[test]
    fn cycle_bandwidth_is_two() {
        let m = cycle(101);
        assert_eq!(bandwidth(&m, &(0..101).collect::<Vec<_>>()), 100);
        assert!(bandwidth(&m, &rcm(&m)) <= 2);
    }

    #[test]
    fn dense_node_goes_last() {
        let n = 300;
        let mut t: Vec<_> = cycle(n - 1).triplets();
        for i in 0..n {
            t.push((n - 1, i, 1.0));
            t.push((i, n - 1, 1.0));
        }
        // move the hub to index 0 to check it is relocated
        let t: Vec<_> = t.into_iter().map(|(i, j, v)| ((i + 1) % n, (j + 1) % n, v)).collect();
        let m = CsrMatrix::from_triplets(n, n, &t);
        let p = rcm(&m);
        assert_eq!(*p.last().unwrap(), 0);
    }
}
