//! Maximum spanning arborescence (Chu-Liu-Edmonds) over sparse edge lists.
//!
//! Weight comparisons go through a tolerance so that sums which differ only
//! by rounding are treated as equal; such ties are broken by the edge's
//! `rank` (lower wins), then by its head.

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightedEdge<T> {
    pub head: usize,
    pub dependent: usize,
    pub weight: T,
    pub rank: usize,
}

fn better<T: Real>(a: &WeightedEdge<T>, b: &WeightedEdge<T>, tol: T) -> bool {
    if a.weight > b.weight + tol {
        return true;
    }
    if b.weight > a.weight + tol {
        return false;
    }
    (a.rank, a.head) < (b.rank, b.head)
}

/// Parent of every node in a maximum-weight arborescence rooted at `root`,
/// using only the given edges. `None` when some node cannot be reached.
///
/// The returned vector has `n` entries; the root's entry is `root` itself.
pub fn max_arborescence<T: Real>(n: usize, root: usize, edges: &[WeightedEdge<T>], tol: T) -> Option<Vec<usize>> {
    let chosen = solve(n, root, edges, tol)?;
    let mut parent = vec![root; n];
    for idx in chosen {
        parent[edges[idx].dependent] = edges[idx].head;
    }
    Some(parent)
}

/// Total weight of the arborescence described by `parent`.
pub fn tree_weight<T: Real>(parent: &[usize], root: usize, edges: &[WeightedEdge<T>], tol: T) -> T {
    let mut total = T::zero();
    for (dep, &head) in parent.iter().enumerate() {
        if dep == root {
            continue;
        }
        let best = edges
            .iter()
            .filter(|e| e.head == head && e.dependent == dep)
            .fold(None::<&WeightedEdge<T>>, |acc, e| match acc {
                Some(b) if !better(e, b, tol) => Some(b),
                _ => Some(e),
            });
        if let Some(e) = best {
            total = total + e.weight;
        }
    }
    total
}

/// Indices (into `edges`) of the chosen edges, one per non-root node.
fn solve<T: Real>(n: usize, root: usize, edges: &[WeightedEdge<T>], tol: T) -> Option<Vec<usize>> {
    let mut best_in: Vec<Option<usize>> = vec![None; n];
    for (idx, e) in edges.iter().enumerate() {
        if e.dependent == root || e.head == e.dependent {
            continue;
        }
        match best_in[e.dependent] {
            Some(cur) if !better(e, &edges[cur], tol) => {}
            _ => best_in[e.dependent] = Some(idx),
        }
    }
    if (0..n).any(|v| v != root && best_in[v].is_none()) {
        return None;
    }

    let Some(cycle) = find_cycle(n, root, &best_in, edges) else {
        return Some((0..n).filter(|&v| v != root).map(|v| best_in[v].unwrap()).collect());
    };

    // Contract the cycle into a single new node.
    let mut in_cycle = vec![false; n];
    for &v in &cycle {
        in_cycle[v] = true;
    }
    let mut map = vec![0; n];
    let mut next = 0;
    for v in 0..n {
        if !in_cycle[v] {
            map[v] = next;
            next += 1;
        }
    }
    let merged = next;
    for &v in &cycle {
        map[v] = merged;
    }
    let mut contracted = Vec::new();
    let mut origin = Vec::new();
    for (idx, e) in edges.iter().enumerate() {
        let (h, d) = (map[e.head], map[e.dependent]);
        if h == d {
            continue;
        }
        let weight = if in_cycle[e.dependent] {
            e.weight - edges[best_in[e.dependent].unwrap()].weight
        } else {
            e.weight
        };
        contracted.push(WeightedEdge {
            head: h,
            dependent: d,
            weight,
            rank: e.rank,
        });
        origin.push(idx);
    }
    let inner = solve(merged + 1, map[root], &contracted, tol)?;

    let mut result = Vec::with_capacity(n - 1);
    let mut entry = None;
    for c in inner {
        let idx = origin[c];
        if in_cycle[edges[idx].dependent] {
            entry = Some(edges[idx].dependent);
        }
        result.push(idx);
    }
    let entry = entry.expect("the contracted node has an incoming edge");
    for &v in &cycle {
        if v != entry {
            result.push(best_in[v].unwrap());
        }
    }
    Some(result)
}

fn find_cycle<T>(n: usize, root: usize, best_in: &[Option<usize>], edges: &[WeightedEdge<T>]) -> Option<Vec<usize>> {
    // 0 = unvisited, 1 = on the current walk, 2 = finished
    let mut state = vec![0u8; n];
    state[root] = 2;
    for start in 0..n {
        if state[start] != 0 {
            continue;
        }
        let mut walk = Vec::new();
        let mut v = start;
        while state[v] == 0 {
            state[v] = 1;
            walk.push(v);
            v = edges[best_in[v].unwrap()].head;
        }
        if state[v] == 1 {
            let pos = walk.iter().position(|&w| w == v).unwrap();
            return Some(walk[pos..].to_vec());
        }
        for w in walk {
            state[w] = 2;
        }
    }
    None
}
