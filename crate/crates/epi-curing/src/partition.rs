//! Equitable partitions of weighted digraphs and the quotient model they
//! induce.
//!
//! A partition π = {V_1..V_n} is *outward equitable* when, for every ordered
//! cell pair (i, j), the total rate at which a node v ∈ V_i is infected by
//! V_j — Σ_{w∈V_j} rate(w→v) — does not depend on the choice of v; these
//! constants are the `c_out[i][j]`. *Inward* is the analogous condition on
//! the rates v sends into V_j (`c_in[i][j]`). When both hold, the spectrum of
//! the n×n quotient embeds into the spectrum of the full N×N system, which is
//! what makes the reduced dynamics and the curing optimizer exact rather than
//! approximate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{ContactNetwork, FORMAT_TAG};

/// Ordered list of disjoint node cells covering 0..N−1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    cells: Vec<Vec<usize>>,
    n_nodes: usize,
    cell_of: Vec<usize>,
}

impl Partition {
    pub fn new(cells: Vec<Vec<usize>>, n_nodes: usize) -> Result<Self> {
        let mut cell_of = vec![usize::MAX; n_nodes];
        let mut seen = 0usize;
        for (c, cell) in cells.iter().enumerate() {
            if cell.is_empty() {
                return Err(Error::PartitionMismatch(format!("cell {c} is empty")));
            }
            for &v in cell {
                if v >= n_nodes {
                    return Err(Error::PartitionMismatch(format!(
                        "node {v} out of range for N={n_nodes}"
                    )));
                }
                if cell_of[v] != usize::MAX {
                    return Err(Error::PartitionMismatch(format!(
                        "node {v} appears in cells {} and {c}",
                        cell_of[v]
                    )));
                }
                cell_of[v] = c;
                seen += 1;
            }
        }
        if seen != n_nodes {
            return Err(Error::PartitionMismatch(format!(
                "cells cover {seen} of {n_nodes} nodes"
            )));
        }
        Ok(Self {
            cells,
            n_nodes,
            cell_of,
        })
    }

    /// Each node in its own cell — always equitable.
    pub fn singletons(n_nodes: usize) -> Self {
        Partition::new((0..n_nodes).map(|v| vec![v]).collect(), n_nodes).expect("valid")
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.cells.iter().map(Vec::len).collect()
    }

    pub fn cell_of(&self, node: usize) -> usize {
        self.cell_of[node]
    }
}

/// Per-community curing rates δ̄_j, applied to every node of V_j.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedCuringVector {
    values: DVector<f64>,
}

impl ReducedCuringVector {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "reduced curing rate {v} at community {i}"
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn uniform(n: usize, delta: f64) -> Result<Self> {
        Self::new(DVector::from_element(n, delta))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquitableReport {
    pub inward: bool,
    pub outward: bool,
    pub equitable: bool,
    /// First violation, as (node, cell): the named node's rate sum against the
    /// named cell deviates from the sum of the first node in its own cell.
    pub witness: Option<(usize, usize)>,
}

/// Checks Definition-style equitability of `pi` on `net` with absolute
/// tolerance `tol` on the per-node rate sums.
pub fn check_equitable(net: &ContactNetwork, pi: &Partition, tol: f64) -> Result<EquitableReport> {
    if pi.n_nodes() != net.n_nodes() {
        return Err(Error::PartitionMismatch(format!(
            "partition covers {} nodes, network has {}",
            pi.n_nodes(),
            net.n_nodes()
        )));
    }
    let b = net.rates();
    let mut inward = true;
    let mut outward = true;
    let mut witness: Option<(usize, usize)> = None;
    for cell_i in pi.cells() {
        for (j, cell_j) in pi.cells().iter().enumerate() {
            // outward: rate at which v is infected by V_j (row sums of B)
            // inward: rate at which v infects V_j (column sums of B)
            let mut ref_out = 0.0;
            let mut ref_in = 0.0;
            for (idx, &v) in cell_i.iter().enumerate() {
                let mut recv = 0.0;
                let mut send = 0.0;
                for &w in cell_j {
                    recv += b[(v, w)];
                    send += b[(w, v)];
                }
                if idx == 0 {
                    ref_out = recv;
                    ref_in = send;
                } else {
                    if (recv - ref_out).abs() > tol {
                        outward = false;
                        witness.get_or_insert((v, j));
                    }
                    if (send - ref_in).abs() > tol {
                        inward = false;
                        witness.get_or_insert((v, j));
                    }
                }
            }
        }
    }
    Ok(EquitableReport {
        inward,
        outward,
        equitable: inward && outward,
        witness: if inward && outward { None } else { witness },
    })
}

/// Community-level reduction of an equitable instance: the cell-to-cell rate
/// constants, the symmetrized quotient Q^T, and the normalized lifting map S.
#[derive(Debug, Clone)]
pub struct QuotientModel {
    pub n: usize,
    pub sizes: Vec<usize>,
    /// c_out[(i, j)]: total rate at which any fixed node of V_i is infected by V_j.
    pub c_out: DMatrix<f64>,
    /// c_in[(i, j)]: total rate at which a fixed node of V_i infects V_j.
    pub c_in: DMatrix<f64>,
    /// Q^T: diagonal c_out[i][i], off-diagonal k_i·c_out[i][j]/√(k_i k_j).
    pub q_t: DMatrix<f64>,
    /// Q̃ = K^{-1/2}·Q^T·K^{1/2}; algebraically identical to c_out, kept as a
    /// construction self-check.
    pub q_tilde: DMatrix<f64>,
    /// S: n×N lifting map with s_iv = 1/√k_i for v ∈ V_i, so S·S^T = I_n.
    pub lift: DMatrix<f64>,
    cells: Vec<Vec<usize>>,
    cell_of: Vec<usize>,
    /// Reduced curing supplied at construction time, if any.
    pub curing: Option<ReducedCuringVector>,
}

impl QuotientModel {
    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell_of(&self, node: usize) -> usize {
        self.cell_of[node]
    }

    pub fn n_nodes(&self) -> usize {
        self.cell_of.len()
    }

    /// Maximum row sum of Q^T (the l_max of the feasibility theorem).
    pub fn l_max(&self) -> f64 {
        (0..self.n).map(|i| self.q_t.row(i).sum()).fold(0.0, f64::max)
    }
}

/// Builds the quotient model of an equitable instance. Fails with
/// `NotEquitable` (carrying the witness) when the partition is not equitable
/// at tolerance `tol`. The balance identity k_i·c_out[i][j] = k_j·c_in[j][i]
/// and Q̃ = C_out are asserted to 1e−12 relative accuracy as construction
/// self-checks.
pub fn build_quotient(
    net: &ContactNetwork,
    pi: &Partition,
    delta_bar: Option<&ReducedCuringVector>,
    tol: f64,
) -> Result<QuotientModel> {
    let rep = check_equitable(net, pi, tol)?;
    if !rep.equitable {
        let (node, cell) = rep.witness.unwrap_or((0, 0));
        return Err(Error::NotEquitable {
            node,
            cell,
            detail: format!(
                "rate sums to cell {cell} differ across the cell of node {node} (tol {tol:.3e})"
            ),
        });
    }
    if let Some(d) = delta_bar {
        if d.len() != pi.n_cells() {
            return Err(Error::DimensionMismatch {
                expected: pi.n_cells(),
                got: d.len(),
            });
        }
    }
    let n = pi.n_cells();
    let big_n = pi.n_nodes();
    let b = net.rates();
    let sizes = pi.sizes();
    let mut c_out = DMatrix::zeros(n, n);
    let mut c_in = DMatrix::zeros(n, n);
    for (i, cell_i) in pi.cells().iter().enumerate() {
        for (j, cell_j) in pi.cells().iter().enumerate() {
            // averaged over the cell: equal to any member's sum up to tol
            let mut recv = 0.0;
            let mut send = 0.0;
            for &v in cell_i {
                for &w in cell_j {
                    recv += b[(v, w)];
                    send += b[(w, v)];
                }
            }
            c_out[(i, j)] = recv / sizes[i] as f64;
            c_in[(i, j)] = send / sizes[i] as f64;
        }
    }
    let mut q_t = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                q_t[(i, j)] = c_out[(i, i)];
            } else {
                let (ki, kj) = (sizes[i] as f64, sizes[j] as f64);
                q_t[(i, j)] = ki * c_out[(i, j)] / (ki * kj).sqrt();
            }
        }
    }
    let mut q_tilde = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (ki, kj) = (sizes[i] as f64, sizes[j] as f64);
            q_tilde[(i, j)] = q_t[(i, j)] * (kj / ki).sqrt();
        }
    }
    let scale = c_out.amax().max(1e-300);
    for i in 0..n {
        for j in 0..n {
            let bal =
                sizes[i] as f64 * c_out[(i, j)] - sizes[j] as f64 * c_in[(j, i)];
            if bal.abs() > 1e-12 * scale * big_n as f64 {
                return Err(Error::NotEquitable {
                    node: pi.cells()[i][0],
                    cell: j,
                    detail: format!("balance identity violated by {bal:.3e}"),
                });
            }
            let diff = q_tilde[(i, j)] - c_out[(i, j)];
            assert!(
                diff.abs() <= 1e-12 * scale.max(1.0),
                "quotient self-check failed: Q-tilde differs from C_out by {diff:.3e}"
            );
        }
    }
    let mut lift = DMatrix::zeros(n, big_n);
    for (i, cell) in pi.cells().iter().enumerate() {
        let s = 1.0 / (sizes[i] as f64).sqrt();
        for &v in cell {
            lift[(i, v)] = s;
        }
    }
    Ok(QuotientModel {
        n,
        sizes,
        c_out,
        c_in,
        q_t,
        q_tilde,
        lift,
        cells: pi.cells().to_vec(),
        cell_of: (0..big_n).map(|v| pi.cell_of(v)).collect(),
        curing: delta_bar.cloned(),
    })
}

/// How a length-n community vector is carried to the N nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiftKind {
    /// x[v] = x̄[cell(v)] — the per-node semantic lift used for probabilities.
    PerNode,
    /// x = S^T·x̄, i.e. x[v] = x̄[cell(v)]/√k_cell — carries eigenvectors of
    /// Q^T − D̄ to eigenvectors of A^T − D.
    Spectral,
}

pub fn lift_vector(q: &QuotientModel, xbar: &DVector<f64>, kind: LiftKind) -> Result<DVector<f64>> {
    if xbar.len() != q.n {
        return Err(Error::DimensionMismatch {
            expected: q.n,
            got: xbar.len(),
        });
    }
    let mut x = DVector::zeros(q.n_nodes());
    for v in 0..q.n_nodes() {
        let c = q.cell_of(v);
        x[v] = match kind {
            LiftKind::PerNode => xbar[c],
            LiftKind::Spectral => xbar[c] / (q.sizes[c] as f64).sqrt(),
        };
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// JSON interchange
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct PartitionJson {
    format: String,
    cells: Vec<Vec<usize>>,
    /// Optional two-level tagging ("central"/"terminal" per cell) consumed by
    /// the 2D curing optimizer.
    #[serde(skip_serializing_if = "Option::is_none")]
    kinds: Option<Vec<crate::netmodel::CommunityKind>>,
}

pub fn partition_to_json(
    pi: &Partition,
    kinds: Option<&[crate::netmodel::CommunityKind]>,
) -> Result<String> {
    let doc = PartitionJson {
        format: FORMAT_TAG.to_string(),
        cells: pi.cells().to_vec(),
        kinds: kinds.map(|k| k.to_vec()),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn partition_from_json(
    text: &str,
    n_nodes: usize,
) -> Result<(Partition, Option<Vec<crate::netmodel::CommunityKind>>)> {
    let doc: PartitionJson = serde_json::from_str(text)?;
    if doc.format != FORMAT_TAG {
        return Err(Error::Format(format!(
            "expected format {FORMAT_TAG}, got {}",
            doc.format
        )));
    }
    if let Some(k) = &doc.kinds {
        if k.len() != doc.cells.len() {
            return Err(Error::Format(format!(
                "kinds has {} entries for {} cells",
                k.len(),
                doc.cells.len()
            )));
        }
    }
    Ok((Partition::new(doc.cells, n_nodes)?, doc.kinds))
}

/// Quotient export: community sizes, cell-to-cell constants, and Q^T.
pub fn quotient_to_json(q: &QuotientModel) -> Result<String> {
    #[derive(Serialize)]
    struct QuotientJson<'a> {
        format: &'a str,
        n: usize,
        sizes: &'a [usize],
        c_out: Vec<Vec<f64>>,
        q_t: Vec<Vec<f64>>,
    }
    let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect()
    };
    Ok(serde_json::to_string_pretty(&QuotientJson {
        format: FORMAT_TAG,
        n: q.n,
        sizes: &q.sizes,
        c_out: rows(&q.c_out),
        q_t: rows(&q.q_t),
    })?)
}

/// Rebuilds a quotient model from Q^T and the community sizes alone, laying
/// the cells out as consecutive node ranges. This is the canonical
/// realization: every quantity derived from a quotient (spectra, thresholds,
/// curing optima) depends only on (Q^T, sizes).
pub fn quotient_from_parts(q_t: DMatrix<f64>, sizes: Vec<usize>) -> Result<QuotientModel> {
    let n = q_t.nrows();
    if q_t.ncols() != n {
        return Err(Error::NonSquare {
            rows: q_t.nrows(),
            cols: q_t.ncols(),
        });
    }
    if sizes.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: sizes.len(),
        });
    }
    if n == 0 || sizes.iter().any(|&k| k == 0) {
        return Err(Error::InvalidSize("community sizes must be >= 1".into()));
    }
    for i in 0..n {
        for j in 0..n {
            let x = q_t[(i, j)];
            if !x.is_finite() {
                return Err(Error::NonFiniteEntry { i, j });
            }
            if x < 0.0 {
                return Err(Error::NegativeRate { i, j, value: x });
            }
        }
    }
    let big_n: usize = sizes.iter().sum();
    let mut c_out = DMatrix::zeros(n, n);
    let mut c_in = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (ki, kj) = (sizes[i] as f64, sizes[j] as f64);
            c_out[(i, j)] = if i == j {
                q_t[(i, i)]
            } else {
                q_t[(i, j)] * (ki * kj).sqrt() / ki
            };
        }
    }
    for i in 0..n {
        for j in 0..n {
            c_in[(i, j)] = sizes[j] as f64 * c_out[(j, i)] / sizes[i] as f64;
        }
    }
    let mut cells = Vec::with_capacity(n);
    let mut cell_of = vec![0usize; big_n];
    let mut lift = DMatrix::zeros(n, big_n);
    let mut next = 0usize;
    for (i, &k) in sizes.iter().enumerate() {
        let members: Vec<usize> = (next..next + k).collect();
        let s = 1.0 / (k as f64).sqrt();
        for &v in &members {
            cell_of[v] = i;
            lift[(i, v)] = s;
        }
        next += k;
        cells.push(members);
    }
    let q_tilde = c_out.clone();
    Ok(QuotientModel {
        n,
        sizes,
        c_out,
        c_in,
        q_t,
        q_tilde,
        lift,
        cells,
        cell_of,
        curing: None,
    })
}

pub fn quotient_from_json(text: &str) -> Result<QuotientModel> {
    #[derive(Deserialize)]
    struct QuotientJsonIn {
        format: String,
        n: usize,
        sizes: Vec<usize>,
        #[serde(default)]
        c_out: Option<Vec<Vec<f64>>>,
        q_t: Vec<Vec<f64>>,
    }
    let doc: QuotientJsonIn = serde_json::from_str(text)?;
    if doc.format != FORMAT_TAG {
        return Err(Error::Format(format!(
            "expected format {FORMAT_TAG}, got {}",
            doc.format
        )));
    }
    if doc.q_t.len() != doc.n || doc.q_t.iter().any(|r| r.len() != doc.n) {
        return Err(Error::Format(format!("q_t is not {0}x{0}", doc.n)));
    }
    let q_t = DMatrix::from_fn(doc.n, doc.n, |i, j| doc.q_t[i][j]);
    let model = quotient_from_parts(q_t, doc.sizes)?;
    if let Some(c_out) = doc.c_out {
        if c_out.len() != doc.n || c_out.iter().any(|r| r.len() != doc.n) {
            return Err(Error::Format(format!("c_out is not {0}x{0}", doc.n)));
        }
        for i in 0..doc.n {
            for j in 0..doc.n {
                let diff = (c_out[i][j] - model.c_out[(i, j)]).abs();
                if diff > 1e-9 * model.c_out.amax().max(1.0) {
                    return Err(Error::Format(format!(
                        "c_out[{i}][{j}] inconsistent with q_t and sizes (off by {diff:.3e})"
                    )));
                }
            }
        }
    }
    Ok(model)
}
