//! Shared generators for the integration suites: random equitable instances
//! built so the partition is equitable by construction.

#![allow(dead_code)]

use epi_curing::curing::TwoLevelInstance;
use epi_curing::netmodel::{build_network, ContactNetwork};
use epi_curing::partition::{build_quotient, Partition, QuotientModel};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct EquitableInstance {
    pub net: ContactNetwork,
    pub pi: Partition,
    /// Expected C_out of the construction: cell_rates[(i, j)] is the total
    /// rate at which any node of cell i is infected by cell j.
    pub cell_rates: DMatrix<f64>,
}

/// Random equitable instance. Cells are connected pairwise by uniform complete
/// bipartite blocks (every node of the receiving cell gets the same per-edge
/// rate from every node of the sending cell), and internally by complete
/// blocks, which keeps the partition equitable for any draw. `directed`
/// controls whether the two directions of a cell pair are drawn independently;
/// undirected draws give a symmetric rate matrix and hence a symmetric
/// quotient.
pub fn random_equitable(
    rng: &mut ChaCha8Rng,
    max_cells: usize,
    max_nodes: usize,
    directed: bool,
) -> EquitableInstance {
    loop {
        let n_cells = rng.gen_range(2..=max_cells.max(2));
        let mut sizes = Vec::with_capacity(n_cells);
        let mut total = 0usize;
        for _ in 0..n_cells {
            let cap = ((max_nodes - total) / 2).clamp(1, 6);
            let k = rng.gen_range(1..=cap);
            sizes.push(k);
            total += k;
        }
        let n_nodes: usize = sizes.iter().sum();
        let mut offsets = vec![0usize; n_cells];
        for i in 1..n_cells {
            offsets[i] = offsets[i - 1] + sizes[i - 1];
        }

        let mut rates = DMatrix::zeros(n_nodes, n_nodes);
        let mut cell_rates = DMatrix::zeros(n_cells, n_cells);
        let fill_block = |rates: &mut DMatrix<f64>,
                              cell_rates: &mut DMatrix<f64>,
                              recv: usize,
                              send: usize,
                              w: f64| {
            for a in 0..sizes[recv] {
                for b in 0..sizes[send] {
                    let (i, j) = (offsets[recv] + a, offsets[send] + b);
                    if i != j {
                        rates[(i, j)] = w;
                    }
                }
            }
            let senders = if recv == send {
                sizes[send] - 1
            } else {
                sizes[send]
            };
            cell_rates[(recv, send)] = w * senders as f64;
        };

        for i in 0..n_cells {
            for j in (i + 1)..n_cells {
                if rng.gen_bool(0.6) {
                    let w = rng.gen_range(0.1..1.5);
                    fill_block(&mut rates, &mut cell_rates, i, j, w);
                    if directed {
                        if rng.gen_bool(0.7) {
                            let w2 = rng.gen_range(0.1..1.5);
                            fill_block(&mut rates, &mut cell_rates, j, i, w2);
                        }
                    } else {
                        fill_block(&mut rates, &mut cell_rates, j, i, w);
                    }
                }
            }
            if sizes[i] >= 2 && rng.gen_bool(0.5) {
                let w = rng.gen_range(0.1..1.0);
                fill_block(&mut rates, &mut cell_rates, i, i, w);
            }
        }

        if rates.amax() == 0.0 {
            continue; // empty graph: re-roll
        }
        let cells: Vec<Vec<usize>> = (0..n_cells)
            .map(|i| (offsets[i]..offsets[i] + sizes[i]).collect())
            .collect();
        let net = build_network(rates).unwrap();
        let pi = Partition::new(cells, n_nodes).unwrap();
        return EquitableInstance {
            net,
            pi,
            cell_rates,
        };
    }
}

/// Random instance whose rate matrix is symmetric and whose underlying cell
/// graph is connected, so the quotient is irreducible — needed wherever a
/// Perron eigenvector or an endemic state must be strictly positive.
pub fn random_equitable_connected(
    rng: &mut ChaCha8Rng,
    max_cells: usize,
    max_nodes: usize,
) -> EquitableInstance {
    loop {
        let inst = random_equitable(rng, max_cells, max_nodes, false);
        if cell_graph_connected(&inst.cell_rates) {
            return inst;
        }
    }
}

/// Random symmetric two-level instance over a connected quotient: the cells
/// are split into a random non-empty central/terminal pair with random
/// per-node costs.
pub fn random_two_level(seed: u64) -> (TwoLevelInstance, QuotientModel, f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = random_equitable_connected(&mut rng, 6, 40);
    let q = build_quotient(&inst.net, &inst.pi, None, 1e-9).unwrap();
    let n = q.n;
    let mut pi0 = Vec::new();
    let mut pi1 = Vec::new();
    for j in 0..n {
        if rng.gen_bool(0.5) {
            pi0.push(j);
        } else {
            pi1.push(j);
        }
    }
    if pi0.is_empty() {
        pi0.push(pi1.pop().unwrap());
    }
    if pi1.is_empty() {
        pi1.push(pi0.pop().unwrap());
    }
    let c0 = rng.gen_range(0.5..2.0);
    let c1 = rng.gen_range(0.5..2.0);
    let tl = TwoLevelInstance::new(q.q_t.clone(), q.sizes.clone(), pi0, pi1, c0, c1).unwrap();
    (tl, q, c0, c1)
}

fn cell_graph_connected(cell_rates: &DMatrix<f64>) -> bool {
    let n = cell_rates.nrows();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if !seen[j] && (cell_rates[(i, j)] > 0.0 || cell_rates[(j, i)] > 0.0) {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}
