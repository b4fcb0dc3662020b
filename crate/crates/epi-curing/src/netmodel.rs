//! Contact-network data model, generators for the star-family topologies, and
//! the versioned JSON interchange format.
//!
//! Rate convention: `rates[(i, j)] = β_ij` is the rate at which node `j`
//! infects node `i`. The matrix therefore already is the transposed weighted
//! adjacency `A^T` that drives the mean-field system in [`crate::nimfa`].

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Partition;

pub const FORMAT_TAG: &str = "epi-curing/v1";

/// N-node directed weighted infection-rate structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactNetwork {
    rates: DMatrix<f64>,
    labels: Option<Vec<String>>,
}

impl ContactNetwork {
    pub fn n_nodes(&self) -> usize {
        self.rates.nrows()
    }

    /// β_ij: rate at which node `j` infects node `i`.
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rates[(i, j)]
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_nodes(),
                got: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Exact (bitwise) symmetry; generators that build symmetric topologies
    /// assign both directions from the same value so this never needs a
    /// tolerance.
    pub fn is_symmetric(&self) -> bool {
        let n = self.n_nodes();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.rates[(i, j)] != self.rates[(j, i)] {
                    return false;
                }
            }
        }
        true
    }

    /// Maximum row sum of the rate matrix (total incoming rate of a node).
    pub fn max_row_sum(&self) -> f64 {
        (0..self.n_nodes())
            .map(|i| self.rates.row(i).sum())
            .fold(0.0, f64::max)
    }
}

/// Validates and wraps a rate matrix. Rejects rather than repairs: non-square,
/// negative, non-finite, or nonzero-diagonal input is an error.
pub fn build_network(rates: DMatrix<f64>) -> Result<ContactNetwork> {
    if rates.nrows() != rates.ncols() {
        return Err(Error::NonSquare {
            rows: rates.nrows(),
            cols: rates.ncols(),
        });
    }
    if rates.nrows() == 0 {
        return Err(Error::InvalidSize("empty network".into()));
    }
    for i in 0..rates.nrows() {
        for j in 0..rates.ncols() {
            let v = rates[(i, j)];
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry { i, j });
            }
            if v < 0.0 {
                return Err(Error::NegativeRate { i, j, value: v });
            }
            if i == j && v != 0.0 {
                return Err(Error::NonzeroDiagonal { i, value: v });
            }
        }
    }
    Ok(ContactNetwork {
        rates,
        labels: None,
    })
}

/// Per-node curing (recovery) rates δ_i.
#[derive(Debug, Clone, PartialEq)]
pub struct CuringVector {
    values: DVector<f64>,
}

impl CuringVector {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry { i, j: i });
            }
            if *v < 0.0 {
                return Err(Error::NegativeRate {
                    i,
                    j: i,
                    value: *v,
                });
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

/// Tag distinguishing hub communities from leaf communities in generated
/// two-level topologies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CommunityKind {
    Central,
    Terminal,
}

/// Configuration of the interconnected-star generator: `m` central nodes wired
/// as an ER(p) graph with rate `beta0` per present edge, and `m_prime` terminal
/// communities of `k` leaves each, attached round-robin to the central nodes
/// with per-edge rate `beta1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterconnectedStarsConfig {
    pub m: usize,
    pub m_prime: usize,
    pub k: usize,
    pub p: f64,
    pub beta0: f64,
    pub beta1: f64,
    pub seed: u64,
    /// Optional relative spread for random rates: each drawn uniformly on
    /// [β(1−jitter), β(1+jitter)] around its mean, symmetric in both
    /// directions. Core edges draw independently per edge; a terminal
    /// community shares one draw for all of its k leaf edges, which keeps the
    /// generated partition exactly equitable.
    pub rate_jitter: Option<f64>,
}

impl InterconnectedStarsConfig {
    fn validate(&self) -> Result<()> {
        if self.m < 1 || self.m_prime < 1 || self.k < 1 {
            return Err(Error::InvalidSize(format!(
                "need m >= 1, m' >= 1, k >= 1, got m={} m'={} k={}",
                self.m, self.m_prime, self.k
            )));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::InvalidProbability(self.p));
        }
        if self.beta0 <= 0.0 || self.beta1 <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "rates must be positive, got beta0={} beta1={}",
                self.beta0, self.beta1
            )));
        }
        if let Some(j) = self.rate_jitter {
            if !(0.0..1.0).contains(&j) {
                return Err(Error::InvalidParameter(format!(
                    "rate_jitter must lie in [0,1), got {j}"
                )));
            }
        }
        Ok(())
    }
}

/// Star with hub node 0 and `k` leaves, symmetric rate `beta` on every
/// hub–leaf pair. Returned partition: {hub}, {leaves}.
pub fn generate_star(k: usize, beta: f64) -> Result<(ContactNetwork, Partition)> {
    if k < 1 {
        return Err(Error::InvalidSize(format!("star needs k >= 1, got {k}")));
    }
    if beta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "rate must be positive, got {beta}"
        )));
    }
    let n = k + 1;
    let mut rates = DMatrix::zeros(n, n);
    for leaf in 1..n {
        rates[(0, leaf)] = beta;
        rates[(leaf, 0)] = beta;
    }
    let net = build_network(rates)?;
    let pi = Partition::new(vec![vec![0], (1..n).collect()], n)?;
    Ok((net, pi))
}

/// Complete bipartite network with `k0` and `k1` nodes per side and symmetric
/// rate `beta` across sides. Returned partition: the two sides.
pub fn generate_bipartite(k0: usize, k1: usize, beta: f64) -> Result<(ContactNetwork, Partition)> {
    if k0 < 1 || k1 < 1 {
        return Err(Error::InvalidSize(format!(
            "bipartite needs k0, k1 >= 1, got {k0}, {k1}"
        )));
    }
    if beta <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "rate must be positive, got {beta}"
        )));
    }
    let n = k0 + k1;
    let mut rates = DMatrix::zeros(n, n);
    for a in 0..k0 {
        for b in k0..n {
            rates[(a, b)] = beta;
            rates[(b, a)] = beta;
        }
    }
    let net = build_network(rates)?;
    let pi = Partition::new(vec![(0..k0).collect(), (k0..n).collect()], n)?;
    Ok((net, pi))
}

/// Interconnected stars: nodes 0..m are the ER-wired centrals, then the
/// terminal communities follow in order, community j (k nodes) attached to
/// central j mod m. Deterministic for a fixed seed.
pub fn generate_interconnected_stars(
    cfg: &InterconnectedStarsConfig,
) -> Result<(ContactNetwork, Partition, Vec<CommunityKind>)> {
    cfg.validate()?;
    let m = cfg.m;
    let n = m + cfg.m_prime * cfg.k;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jitter = cfg.rate_jitter.unwrap_or(0.0);
    // Draw order (core edges in (i<j) order, then one rate per terminal
    // community) is part of the reproducibility contract.
    let draw = |mean: f64, rng: &mut ChaCha8Rng| -> f64 {
        if jitter == 0.0 {
            mean
        } else {
            rng.gen_range(mean * (1.0 - jitter)..=mean * (1.0 + jitter))
        }
    };
    let mut rates = DMatrix::zeros(n, n);
    for i in 0..m {
        for j in (i + 1)..m {
            if rng.gen::<f64>() < cfg.p {
                let r = draw(cfg.beta0, &mut rng);
                rates[(i, j)] = r;
                rates[(j, i)] = r;
            }
        }
    }
    let mut cells: Vec<Vec<usize>> = (0..m).map(|i| vec![i]).collect();
    let mut kinds = vec![CommunityKind::Central; m];
    let mut next = m;
    for c in 0..cfg.m_prime {
        let hub = c % m;
        let r = draw(cfg.beta1, &mut rng);
        let members: Vec<usize> = (next..next + cfg.k).collect();
        for &leaf in &members {
            rates[(hub, leaf)] = r;
            rates[(leaf, hub)] = r;
        }
        next += cfg.k;
        cells.push(members);
        kinds.push(CommunityKind::Terminal);
    }
    let net = build_network(rates)?;
    let pi = Partition::new(cells, n)?;
    Ok((net, pi, kinds))
}

// ---------------------------------------------------------------------------
// JSON interchange
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct EdgeJson {
    from: usize,
    to: usize,
    rate: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct NetworkJson {
    format: String,
    n: usize,
    edges: Vec<EdgeJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    curing: Option<Vec<f64>>,
}

/// Serializes a network (and optionally its curing vector) to the v1 format.
/// An edge `{from: j, to: i, rate}` means node j infects node i; zero rates
/// are omitted and default to 0 on read.
pub fn network_to_json(net: &ContactNetwork, curing: Option<&CuringVector>) -> Result<String> {
    let n = net.n_nodes();
    let mut edges = Vec::new();
    for from in 0..n {
        for to in 0..n {
            let r = net.rate(to, from);
            if r != 0.0 {
                edges.push(EdgeJson { from, to, rate: r });
            }
        }
    }
    let doc = NetworkJson {
        format: FORMAT_TAG.to_string(),
        n,
        edges,
        curing: curing.map(|c| c.values().iter().copied().collect()),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn network_from_json(text: &str) -> Result<(ContactNetwork, Option<CuringVector>)> {
    let doc: NetworkJson = serde_json::from_str(text)?;
    if doc.format != FORMAT_TAG {
        return Err(Error::Format(format!(
            "expected format {FORMAT_TAG}, got {}",
            doc.format
        )));
    }
    if doc.n == 0 {
        return Err(Error::InvalidSize("empty network".into()));
    }
    let mut rates = DMatrix::zeros(doc.n, doc.n);
    for e in &doc.edges {
        if e.from >= doc.n || e.to >= doc.n {
            return Err(Error::Format(format!(
                "edge ({}, {}) out of range for n={}",
                e.from, e.to, doc.n
            )));
        }
        rates[(e.to, e.from)] = e.rate;
    }
    let net = build_network(rates)?;
    let curing = match doc.curing {
        Some(v) => {
            if v.len() != doc.n {
                return Err(Error::DimensionMismatch {
                    expected: doc.n,
                    got: v.len(),
                });
            }
            Some(CuringVector::new(DVector::from_vec(v))?)
        }
        None => None,
    };
    Ok((net, curing))
}

/// Plain edge-list CSV importer: header `from,to,rate`, one directed edge per
/// row (j infects i for a row `j,i,rate`). Node count is 1 + the largest id.
pub fn network_from_edge_list_csv(text: &str) -> Result<ContactNetwork> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let mut triples: Vec<(usize, usize, f64)> = Vec::new();
    let mut max_id = 0usize;
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::Format(format!(
                "edge-list rows need 3 fields, got {}",
                rec.len()
            )));
        }
        let from: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad node id {:?}", &rec[0])))?;
        let to: usize = rec[1]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad node id {:?}", &rec[1])))?;
        let rate: f64 = rec[2]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("bad rate {:?}", &rec[2])))?;
        max_id = max_id.max(from).max(to);
        triples.push((from, to, rate));
    }
    if triples.is_empty() {
        return Err(Error::Format("empty edge list".into()));
    }
    let n = max_id + 1;
    let mut rates = DMatrix::zeros(n, n);
    for (from, to, rate) in triples {
        rates[(to, from)] = rate;
    }
    build_network(rates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::check_equitable;

    #[test]
    fn build_accepts_smallest_symmetric_case() {
        let net = build_network(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_eq!(net.n_nodes(), 2);
        assert!(net.is_symmetric());
    }

    #[test]
    fn build_accepts_directed_rates() {
        let net = build_network(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0])).unwrap();
        assert!(!net.is_symmetric());
        assert_eq!(net.rate(1, 0), 2.0);
    }

    #[test]
    fn build_rejects_nonzero_diagonal() {
        let err = build_network(DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 1.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::NonzeroDiagonal { i: 0, .. }));
    }

    #[test]
    fn build_rejects_negative_and_nonfinite() {
        let err = build_network(DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::NegativeRate { .. }));
        let err =
            build_network(DMatrix::from_row_slice(2, 2, &[0.0, f64::NAN, 1.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::NonFiniteEntry { .. }));
        let err = build_network(DMatrix::zeros(2, 3)).unwrap_err();
        assert!(matches!(err, Error::NonSquare { .. }));
    }

    #[test]
    fn star_shape_and_partition() {
        let (net, pi) = generate_star(4, 1.0).unwrap();
        assert_eq!(net.n_nodes(), 5);
        let edges: f64 = net.rates().iter().sum();
        assert_eq!(edges, 8.0); // 4 symmetric unit edges
        let rep = check_equitable(&net, &pi, 1e-12).unwrap();
        assert!(rep.equitable);
    }

    #[test]
    fn degenerate_star_is_an_edge() {
        let (net, _) = generate_star(1, 2.0).unwrap();
        assert_eq!(net.n_nodes(), 2);
        assert_eq!(net.rate(0, 1), 2.0);
        assert_eq!(net.rate(1, 0), 2.0);
    }

    #[test]
    fn bipartite_shape() {
        let (net, pi) = generate_bipartite(2, 8, 1.0).unwrap();
        assert_eq!(net.n_nodes(), 10);
        assert!(net.is_symmetric());
        let rep = check_equitable(&net, &pi, 1e-12).unwrap();
        assert!(rep.equitable);
        // one side is a star when k0 = 1
        let (s, _) = generate_bipartite(1, 4, 1.0).unwrap();
        let (star, _) = generate_star(4, 1.0).unwrap();
        assert_eq!(s.rates(), star.rates());
    }

    fn stars_cfg() -> InterconnectedStarsConfig {
        InterconnectedStarsConfig {
            m: 50,
            m_prime: 50,
            k: 10,
            p: 0.2,
            beta0: 1.0,
            beta1: 0.3,
            seed: 7,
            rate_jitter: None,
        }
    }

    #[test]
    fn stars_two_hub_case_matches_hand_layout() {
        let cfg = InterconnectedStarsConfig {
            m: 2,
            m_prime: 2,
            k: 3,
            p: 1.0,
            beta0: 1.0,
            beta1: 0.3,
            seed: 1,
            rate_jitter: None,
        };
        let (net, pi, kinds) = generate_interconnected_stars(&cfg).unwrap();
        assert_eq!(net.n_nodes(), 8);
        assert_eq!(net.rate(0, 1), 1.0);
        assert_eq!(net.rate(2, 0), 0.3); // first leaf of community 0 on hub 0
        assert_eq!(net.rate(5, 1), 0.3); // first leaf of community 1 on hub 1
        assert_eq!(pi.n_cells(), 4);
        assert_eq!(
            kinds,
            vec![
                CommunityKind::Central,
                CommunityKind::Central,
                CommunityKind::Terminal,
                CommunityKind::Terminal
            ]
        );
    }

    #[test]
    fn stars_collapse_to_plain_star() {
        let cfg = InterconnectedStarsConfig {
            m: 1,
            m_prime: 1,
            k: 5,
            p: 0.37,
            beta0: 1.0,
            beta1: 2.0,
            seed: 3,
            rate_jitter: None,
        };
        let (net, _, _) = generate_interconnected_stars(&cfg).unwrap();
        let (star, _) = generate_star(5, 2.0).unwrap();
        assert_eq!(net.rates(), star.rates());
    }

    #[test]
    fn stars_partition_is_equitable_even_with_jitter() {
        let mut cfg = stars_cfg();
        let (net, pi, _) = generate_interconnected_stars(&cfg).unwrap();
        assert!(check_equitable(&net, &pi, 1e-12).unwrap().equitable);
        cfg.rate_jitter = Some(0.25);
        let (net, pi, _) = generate_interconnected_stars(&cfg).unwrap();
        assert!(check_equitable(&net, &pi, 1e-12).unwrap().equitable);
    }

    #[test]
    fn stars_seed_reproducibility() {
        let cfg = InterconnectedStarsConfig {
            rate_jitter: Some(0.2),
            ..stars_cfg()
        };
        let (a, _, _) = generate_interconnected_stars(&cfg).unwrap();
        let (b, _, _) = generate_interconnected_stars(&cfg).unwrap();
        assert_eq!(a.rates(), b.rates());
        let (c, _, _) = generate_interconnected_stars(&InterconnectedStarsConfig {
            seed: 8,
            ..cfg
        })
        .unwrap();
        assert_ne!(a.rates(), c.rates());
    }

    #[test]
    fn stars_round_robin_attachment() {
        let cfg = InterconnectedStarsConfig {
            m: 2,
            m_prime: 3,
            k: 2,
            p: 1.0,
            beta0: 1.0,
            beta1: 0.5,
            seed: 0,
            rate_jitter: None,
        };
        let (net, pi, kinds) = generate_interconnected_stars(&cfg).unwrap();
        assert_eq!(pi.n_cells(), 5);
        assert_eq!(kinds.iter().filter(|k| **k == CommunityKind::Terminal).count(), 3);
        // communities 0 and 2 on hub 0, community 1 on hub 1
        assert_eq!(net.rate(2, 0), 0.5);
        assert_eq!(net.rate(4, 1), 0.5);
        assert_eq!(net.rate(6, 0), 0.5);
    }

    #[test]
    fn stars_rejects_bad_probability() {
        let cfg = InterconnectedStarsConfig {
            p: 0.0,
            ..stars_cfg()
        };
        assert!(matches!(
            generate_interconnected_stars(&cfg),
            Err(Error::InvalidProbability(_))
        ));
    }

    #[test]
    fn network_json_round_trip() {
        let cfg = stars_cfg();
        let (net, _, _) = generate_interconnected_stars(&cfg).unwrap();
        let curing = CuringVector::uniform(net.n_nodes(), 1.25).unwrap();
        let text = network_to_json(&net, Some(&curing)).unwrap();
        let (back, c) = network_from_json(&text).unwrap();
        assert_eq!(net.rates(), back.rates());
        assert_eq!(c.unwrap().values(), curing.values());
        // and byte-stable re-serialization
        let again = network_to_json(&back, Some(&CuringVector::uniform(net.n_nodes(), 1.25).unwrap())).unwrap();
        assert_eq!(text, again);
    }

    #[test]
    fn network_json_rejects_wrong_format() {
        let err = network_from_json(r#"{"format":"other/v9","n":1,"edges":[]}"#).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn edge_list_csv_import() {
        let net = network_from_edge_list_csv("from,to,rate\n0,1,0.5\n1,0,0.25\n").unwrap();
        assert_eq!(net.n_nodes(), 2);
        assert_eq!(net.rate(1, 0), 0.5);
        assert_eq!(net.rate(0, 1), 0.25);
    }

    #[test]
    fn curing_vector_validation() {
        assert!(CuringVector::new(DVector::from_vec(vec![0.0, 1.0])).is_ok());
        assert!(CuringVector::new(DVector::from_vec(vec![-0.1])).is_err());
        assert!(CuringVector::new(DVector::from_vec(vec![f64::INFINITY])).is_err());
    }
}
