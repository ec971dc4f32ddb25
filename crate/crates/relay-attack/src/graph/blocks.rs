use super::{ensure_connected, GraphError};
use crate::netmodel::Network;

/// Partition of the buses into 2-edge-connected components.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDecomposition {
    /// Sorted bus indices of each block, blocks ordered by smallest member.
    pub blocks: Vec<Vec<usize>>,
    /// Block index of every bus.
    pub block_of: Vec<usize>,
    /// Lines whose removal disconnects the graph.
    pub bridges: Vec<usize>,
    /// Lines inside a block.
    pub non_tree_edges: Vec<usize>,
    /// Size of the largest block, r(G).
    pub r: usize,
}

/// Bridges via one iterative DFS with low-link values. Parallel lines are
/// told apart by line index, so a doubled line is never a bridge.
pub(crate) fn find_bridges(n: usize, ends: &[(usize, usize)]) -> Vec<bool> {
    let mut adj = vec![Vec::new(); n];
    for (k, &(a, b)) in ends.iter().enumerate() {
        adj[a].push((b, k));
        adj[b].push((a, k));
    }
    let mut is_bridge = vec![false; ends.len()];
    let mut tin = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut timer = 0;
    for root in 0..n {
        if tin[root] != usize::MAX {
            continue;
        }
        // (vertex, edge used to enter, next adjacency position)
        let mut stack = vec![(root, usize::MAX, 0usize)];
        tin[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (v, via, ref mut pos)) = stack.last_mut() {
            if *pos < adj[v].len() {
                let (w, k) = adj[v][*pos];
                *pos += 1;
                if k == via {
                    continue;
                }
                if tin[w] == usize::MAX {
                    tin[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    stack.push((w, k, 0));
                } else {
                    low[v] = low[v].min(tin[w]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[v]);
                    if low[v] > tin[p] {
                        is_bridge[via] = true;
                    }
                }
            }
        }
    }
    is_bridge
}

pub fn block_decomposition(net: &Network) -> Result<BlockDecomposition, GraphError> {
    ensure_connected(net)?;
    let n = net.n_buses();
    let ends: Vec<(usize, usize)> = net.lines().iter().map(|l| (l.from, l.to)).collect();
    let is_bridge = find_bridges(n, &ends);
    let kept = net.with_lines(|k| !is_bridge[k]);
    let blocks = kept.components();
    let mut block_of = vec![0; n];
    for (i, b) in blocks.iter().enumerate() {
        for &v in b {
            block_of[v] = i;
        }
    }
    let (bridges, non_tree_edges) = (0..ends.len()).partition(|&k| is_bridge[k]);
    let r = blocks.iter().map(|b| b.len()).max().unwrap_or(0);
    Ok(BlockDecomposition { blocks, block_of, bridges, non_tree_edges, r })
}
