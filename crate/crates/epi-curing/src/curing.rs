//! Cost-optimal curing allocation over a symmetric quotient matrix Q.
//!
//! Feasibility means Q − diag(Δ) ⪯ 0 (kills the epidemic in the mean-field
//! model); the feasible set Γ is convex and the linear-cost optimum sits on
//! its boundary ∂Γ. Three solvers are provided:
//!
//! * `optimal_threshold_2d` — the two-level policy (one rate δ0 for central
//!   communities, one rate δ1 for terminal ones) found by bisection: corner
//!   search along the budget line ĉ0δ0 + ĉ1δ1 = (ĉ0+ĉ1)·l_max brackets the
//!   optimum, then an outer bisection on the subgradient sign of
//!   U(δ0) = ĉ0δ0 + ĉ1φ(δ0) pins it down. φ(δ0) is the boundary function
//!   computed by `bisection_threshold`.
//! * `optimize_general` — per-community rates via projected subgradient
//!   descent on the boundary (the subgradient of λ1 in δ_j is −v_j² for the
//!   unit leading eigenvector v); for linear effort the stationarity system
//!   has the explicit solution δ_j = (Qu)_j/u_j with u = √(c∘k), which is used
//!   as a candidate alongside the descent iterate.
//! * `uniform_policy` — the single-rate baseline δ = λ1(Q).
//!
//! Boundary detection note: the termination test is stated on |det(Q − D)|
//! in places, but det ≈ Π|λ_i| carries a large |λ_n⋯λ_2| prefactor, so a det
//! threshold is not dimension-portable. The implementation bisects the
//! strict-definiteness predicate to machine width and states certificates in
//! terms of |λ1| (the determinant is still reported, in sign/log form). The
//! two knobs are `eps_cost` (outer stop) and `eps_lambda` (accepted |λ1| on
//! the boundary, default 1e−6·l_max).

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::netmodel::CommunityKind;
use crate::partition::QuotientModel;
use crate::spectral::{dominant_eigenpair, lambda_max, signed_log_det};

/// Per-community effort function f(δ); the price of running community j at
/// rate δ is c_j·k_j·f(δ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Effort {
    /// f(δ) = δ — what all the closed forms and the 2D algorithm assume.
    Linear,
    /// f(δ) = δ^p with p ≥ 1; only `optimize_general` accepts this.
    Power(f64),
}

impl Effort {
    pub fn eval(&self, delta: f64) -> f64 {
        match self {
            Effort::Linear => delta,
            Effort::Power(p) => delta.powf(*p),
        }
    }

    pub fn deriv(&self, delta: f64) -> f64 {
        match self {
            Effort::Linear => 1.0,
            Effort::Power(p) => p * delta.powf(p - 1.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CostModel {
    costs: DVector<f64>,
    effort: Effort,
}

impl CostModel {
    pub fn new(costs: DVector<f64>, effort: Effort) -> Result<Self> {
        for (j, c) in costs.iter().enumerate() {
            if !c.is_finite() || *c <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "community cost {c} at {j}; costs must be strictly positive"
                )));
            }
        }
        if let Effort::Power(p) = effort {
            if !(p >= 1.0) || !p.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "effort exponent {p}; needs p >= 1 for convexity"
                )));
            }
        }
        Ok(Self { costs, effort })
    }

    pub fn uniform(n: usize, c: f64) -> Result<Self> {
        Self::new(DVector::from_element(n, c), Effort::Linear)
    }

    pub fn costs(&self) -> &DVector<f64> {
        &self.costs
    }

    pub fn effort(&self) -> Effort {
        self.effort
    }

    /// U(Δ) = Σ_j c_j·k_j·f(δ_j).
    pub fn total(&self, sizes: &[usize], delta: &DVector<f64>) -> f64 {
        delta
            .iter()
            .enumerate()
            .map(|(j, d)| self.costs[j] * sizes[j] as f64 * self.effort.eval(*d))
            .sum()
    }
}

/// Spectral state of Q − diag(Δ) at a reported solution.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralCertificate {
    pub lambda_max: f64,
    pub negative_semidefinite: bool,
    /// Sign of det(Q − diag(Δ)): −1, 0, or +1.
    pub det_sign: i8,
    pub log_abs_det: f64,
}

#[derive(Debug, Clone)]
pub struct CuringSolution {
    /// Per-community curing rates.
    pub rates: DVector<f64>,
    /// The (δ0, δ1) pair when produced by the two-level solver.
    pub two_level: Option<(f64, f64)>,
    pub cost: f64,
    pub certificate: SpectralCertificate,
    pub iterations: usize,
    /// Cost tolerance the solver ran with.
    pub epsilon: f64,
}

impl CuringSolution {
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct SolutionJson<'a> {
            format: &'a str,
            rates: Vec<f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            delta0: Option<f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            delta1: Option<f64>,
            cost: f64,
            certificate: &'a SpectralCertificate,
            iterations: usize,
            epsilon: f64,
        }
        Ok(serde_json::to_string_pretty(&SolutionJson {
            format: crate::netmodel::FORMAT_TAG,
            rates: self.rates.iter().copied().collect(),
            delta0: self.two_level.map(|t| t.0),
            delta1: self.two_level.map(|t| t.1),
            cost: self.cost,
            certificate: &self.certificate,
            iterations: self.iterations,
            epsilon: self.epsilon,
        })?)
    }
}

fn require_symmetric_quotient(q: &DMatrix<f64>) -> Result<()> {
    let mut asym: f64 = 0.0;
    for i in 0..q.nrows() {
        for j in (i + 1)..q.ncols() {
            asym = asym.max((q[(i, j)] - q[(j, i)]).abs());
        }
    }
    if asym > 1e-12 * q.amax().max(1.0) {
        return Err(Error::AsymmetricQuotient(asym));
    }
    Ok(())
}

/// Spectral certificate of Q − diag(Δ) with acceptance threshold `eps_lambda`
/// on λ1.
pub fn certify(q: &DMatrix<f64>, delta: &DVector<f64>, eps_lambda: f64) -> Result<SpectralCertificate> {
    let mut m = q.clone();
    for j in 0..delta.len() {
        m[(j, j)] -= delta[j];
    }
    let l1 = lambda_max(&m)?;
    let (det_sign, log_abs_det) = signed_log_det(&m)?;
    Ok(SpectralCertificate {
        lambda_max: l1,
        negative_semidefinite: l1 <= eps_lambda,
        det_sign,
        log_abs_det,
    })
}

/// The Δ = l_max·1 point: uniform curing at the maximum row sum is always
/// feasible, since λ1 of a symmetric matrix is at most its largest row sum.
pub fn feasible_uniform_point(q: &QuotientModel) -> Result<DVector<f64>> {
    require_symmetric_quotient(&q.q_t)?;
    let l_max = q.l_max();
    let delta = DVector::from_element(q.n, l_max);
    debug_assert!({
        let mut m = q.q_t.clone();
        for j in 0..q.n {
            m[(j, j)] -= l_max;
        }
        lambda_max(&m)? <= 1e-12 * l_max.max(1.0)
    });
    Ok(delta)
}

/// Single-rate baseline: the smallest uniform δ with Q − δI ⪯ 0 is λ1(Q).
#[derive(Debug, Clone, PartialEq)]
pub struct UniformPolicy {
    pub delta: f64,
    pub cost: f64,
}

pub fn uniform_policy(q: &QuotientModel, cost: &CostModel) -> Result<UniformPolicy> {
    require_symmetric_quotient(&q.q_t)?;
    if cost.costs().len() != q.n {
        return Err(Error::DimensionMismatch {
            expected: q.n,
            got: cost.costs().len(),
        });
    }
    let delta = lambda_max(&q.q_t)?.max(0.0);
    Ok(UniformPolicy {
        delta,
        cost: cost.total(&q.sizes, &DVector::from_element(q.n, delta)),
    })
}

/// A quotient with its communities split into central (π0, rate δ0) and
/// terminal (π1, rate δ1) groups, plus the per-node level costs (c0, c1).
#[derive(Debug, Clone)]
pub struct TwoLevelInstance {
    q: DMatrix<f64>,
    sizes: Vec<usize>,
    pi0: Vec<usize>,
    pi1: Vec<usize>,
    c0: f64,
    c1: f64,
    c_hat0: f64,
    c_hat1: f64,
    l_max: f64,
    /// λ1 of the π0 principal block — φ(δ0) has a root exactly when δ0 exceeds
    /// this.
    lambda1_pi0: f64,
}

impl TwoLevelInstance {
    pub fn new(
        q: DMatrix<f64>,
        sizes: Vec<usize>,
        pi0: Vec<usize>,
        pi1: Vec<usize>,
        c0: f64,
        c1: f64,
    ) -> Result<Self> {
        let n = q.nrows();
        if q.ncols() != n {
            return Err(Error::NonSquare {
                rows: q.nrows(),
                cols: q.ncols(),
            });
        }
        require_symmetric_quotient(&q)?;
        if sizes.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: sizes.len(),
            });
        }
        if pi0.is_empty() || pi1.is_empty() {
            return Err(Error::InvalidInstance(format!(
                "two-level split needs both sides non-empty (|pi0|={}, |pi1|={})",
                pi0.len(),
                pi1.len()
            )));
        }
        let mut seen = vec![false; n];
        for &j in pi0.iter().chain(&pi1) {
            if j >= n || seen[j] {
                return Err(Error::InvalidInstance(format!(
                    "pi0/pi1 must partition 0..{n}; community {j} repeated or out of range"
                )));
            }
            seen[j] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidInstance(
                "pi0 and pi1 must cover every community".into(),
            ));
        }
        if !(c0 > 0.0 && c0.is_finite() && c1 > 0.0 && c1.is_finite()) {
            return Err(Error::InvalidParameter(format!("costs ({c0}, {c1})")));
        }
        let c_hat0: f64 = pi0.iter().map(|&j| c0 * sizes[j] as f64).sum();
        let c_hat1: f64 = pi1.iter().map(|&j| c1 * sizes[j] as f64).sum();
        let l_max = (0..n).map(|i| q.row(i).sum()).fold(0.0, f64::max);
        let block = DMatrix::from_fn(pi0.len(), pi0.len(), |a, b| q[(pi0[a], pi0[b])]);
        let lambda1_pi0 = lambda_max(&block)?;
        Ok(Self {
            q,
            sizes,
            pi0,
            pi1,
            c0,
            c1,
            c_hat0,
            c_hat1,
            l_max,
            lambda1_pi0,
        })
    }

    pub fn from_quotient(
        q: &QuotientModel,
        kinds: &[CommunityKind],
        c0: f64,
        c1: f64,
    ) -> Result<Self> {
        if kinds.len() != q.n {
            return Err(Error::DimensionMismatch {
                expected: q.n,
                got: kinds.len(),
            });
        }
        let pi0 = kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == CommunityKind::Central)
            .map(|(j, _)| j)
            .collect();
        let pi1 = kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == CommunityKind::Terminal)
            .map(|(j, _)| j)
            .collect();
        Self::new(q.q_t.clone(), q.sizes.clone(), pi0, pi1, c0, c1)
    }

    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn l_max(&self) -> f64 {
        self.l_max
    }

    pub fn c_hats(&self) -> (f64, f64) {
        (self.c_hat0, self.c_hat1)
    }

    pub fn pi0(&self) -> &[usize] {
        &self.pi0
    }

    pub fn pi1(&self) -> &[usize] {
        &self.pi1
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn costs(&self) -> (f64, f64) {
        (self.c0, self.c1)
    }

    /// The always-feasible budget level (ĉ0+ĉ1)·l_max.
    pub fn u_lmax(&self) -> f64 {
        (self.c_hat0 + self.c_hat1) * self.l_max
    }

    pub fn budget(&self, d0: f64, d1: f64) -> f64 {
        self.c_hat0 * d0 + self.c_hat1 * d1
    }

    /// Per-community rate vector with δ0 on π0 and δ1 on π1.
    pub fn expand(&self, d0: f64, d1: f64) -> DVector<f64> {
        let mut d = DVector::zeros(self.n());
        for &j in &self.pi0 {
            d[j] = d0;
        }
        for &j in &self.pi1 {
            d[j] = d1;
        }
        d
    }

    fn shifted(&self, d0: f64, d1: f64) -> DMatrix<f64> {
        let mut m = self.q.clone();
        for &j in &self.pi0 {
            m[(j, j)] -= d0;
        }
        for &j in &self.pi1 {
            m[(j, j)] -= d1;
        }
        m
    }

    /// Strict feasibility via a Cholesky probe of diag(Δ) − Q: cheap enough
    /// to sit inside every bisection step.
    fn strictly_feasible(&self, d0: f64, d1: f64) -> bool {
        Cholesky::new(-self.shifted(d0, d1)).is_some()
    }

    fn lambda1_at(&self, d0: f64, d1: f64) -> Result<f64> {
        lambda_max(&self.shifted(d0, d1))
    }
}

/// φ(δ0): the smallest δ1 ≥ 0 making (δ0, δ1) feasible. Errors with `NoRoot`
/// when no finite δ1 works (δ0 not above λ1 of the π0 block) and
/// `ToleranceUnreachable` when the returned point misses |λ1| ≤ eps. The
/// search starts on [0, l_max] and doubles the upper end as needed.
pub fn bisection_threshold(inst: &TwoLevelInstance, delta0: f64, eps: f64) -> Result<f64> {
    if !delta0.is_finite() || delta0 < 0.0 {
        return Err(Error::InvalidParameter(format!("delta0 {delta0}")));
    }
    let scale = inst.l_max.max(1.0);
    if delta0 <= inst.lambda1_pi0 + 1e-14 * scale {
        return Err(Error::NoRoot(format!(
            "delta0 = {delta0} does not clear the central block's top eigenvalue {}; \
             no finite delta1 reaches the boundary",
            inst.lambda1_pi0
        )));
    }
    if inst.strictly_feasible(delta0, 0.0) {
        // boundary crossing would be at negative delta1; rates are clamped at 0
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = inst.l_max.max(1e-12);
    let mut doublings = 0;
    while !inst.strictly_feasible(delta0, hi) {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::ToleranceUnreachable(format!(
                "no feasible delta1 below {hi:.3e} for delta0 = {delta0}"
            )));
        }
    }
    while hi - lo > 1e-15 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if inst.strictly_feasible(delta0, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let d1 = 0.5 * (lo + hi);
    let l1 = inst.lambda1_at(delta0, d1)?;
    if l1.abs() > eps.max(1e-11 * scale) {
        return Err(Error::ToleranceUnreachable(format!(
            "boundary residual |lambda1| = {:.3e} exceeds eps = {eps:.3e}",
            l1.abs()
        )));
    }
    Ok(d1)
}

fn corner_line_delta1(inst: &TwoLevelInstance, d0: f64) -> f64 {
    (inst.u_lmax() - inst.c_hat0 * d0) / inst.c_hat1
}

/// Shared corner search along the budget line ĉ0δ0 + ĉ1δ1 = (ĉ0+ĉ1)·l_max.
/// The feasible part of the line is an interval containing δ0 = l_max; the
/// left corner is its lower end, the right corner its upper end.
fn corner(inst: &TwoLevelInstance, eps: f64, left: bool) -> Result<(f64, f64)> {
    let on_line = |d0: f64| (d0, corner_line_delta1(inst, d0));
    let probe = |d0: f64| {
        let (a, b) = on_line(d0);
        inst.strictly_feasible(a, b)
    };
    let range = inst.u_lmax() / inst.c_hat0; // δ0 where the line hits δ1 = 0
    let feas = if inst.strictly_feasible(inst.l_max, inst.l_max) {
        inst.l_max
    } else {
        // When Q has constant row sums the uniform point sits exactly on ∂Γ
        // and the strict probe rejects it; the feasible interval can still be
        // non-degenerate, so hunt for a strictly feasible point nearby before
        // concluding the line is tangent.
        let l1 = inst.lambda1_at(inst.l_max, inst.l_max)?;
        if l1.abs() > eps.max(1e-9 * inst.l_max.max(1.0)) {
            return Err(Error::InvariantViolation(format!(
                "uniform point l_max = {} is infeasible (lambda1 = {l1:.3e})",
                inst.l_max
            )));
        }
        let mut found = None;
        let mut t = 1e-12 * range;
        while t < range {
            let right = inst.l_max + t;
            if right <= range && probe(right) {
                found = Some(right);
                break;
            }
            let left_pt = inst.l_max - t;
            if left_pt >= 0.0 && probe(left_pt) {
                found = Some(left_pt);
                break;
            }
            t *= 4.0;
        }
        match found {
            Some(f) => f,
            // tangent contact: the interval is the single uniform point
            None => return Ok(on_line(inst.l_max)),
        }
    };
    let infeas_end = if left { 0.0 } else { range };
    if probe(infeas_end) {
        // the whole half-line segment is feasible; the corner is its end
        return Ok(on_line(infeas_end));
    }
    let (mut feas, mut infeas) = (feas, infeas_end);
    while (feas - infeas).abs() > 1e-15 * feas.abs().max(1.0) {
        let mid = 0.5 * (feas + infeas);
        if probe(mid) {
            feas = mid;
        } else {
            infeas = mid;
        }
    }
    let (d0, d1) = on_line(0.5 * (feas + infeas));
    let l1 = inst.lambda1_at(d0, d1)?;
    if l1.abs() > eps.max(1e-11 * inst.l_max.max(1.0)) {
        return Err(Error::ToleranceUnreachable(format!(
            "corner residual |lambda1| = {:.3e}",
            l1.abs()
        )));
    }
    Ok((d0, d1))
}

/// Feasibility-boundary point on the budget line with the smallest δ0.
pub fn left_corner(inst: &TwoLevelInstance, eps: f64) -> Result<(f64, f64)> {
    corner(inst, eps, true)
}

/// Feasibility-boundary point on the budget line with the largest δ0.
pub fn right_corner(inst: &TwoLevelInstance, eps: f64) -> Result<(f64, f64)> {
    corner(inst, eps, false)
}

/// How the outer loop reads the slope sign of U(δ0) = ĉ0δ0 + ĉ1φ(δ0).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubgradientMethod {
    /// Implicit-function slope from the boundary eigenvector:
    /// U′ = ĉ0 − ĉ1·(Σ_{π0} v_j²)/(Σ_{π1} v_j²). Exact up to the eigensolve,
    /// so the bisection bracket stays sharp; the default.
    Eigenvector,
    /// Forward difference over two boundary evaluations, φ(δ0) and φ(δ0+ε1),
    /// with ε1 = max(eps_cost, 1e−6·l_max). Kept as the cross-check method;
    /// away from the minimizer it must agree in sign with the other one.
    ForwardDifference,
}

#[derive(Debug, Clone)]
pub struct TwoLevelOptions {
    /// Outer-loop cost tolerance; defaults to 1e−6·(ĉ0+ĉ1)·l_max.
    pub eps_cost: Option<f64>,
    /// Accepted |λ1| at reported boundary points; defaults to 1e−6·l_max.
    pub eps_lambda: Option<f64>,
    pub method: SubgradientMethod,
    pub max_outer: usize,
}

impl Default for TwoLevelOptions {
    fn default() -> Self {
        Self {
            eps_cost: None,
            eps_lambda: None,
            method: SubgradientMethod::Eigenvector,
            max_outer: 200,
        }
    }
}

/// Minimizes ĉ0δ0 + ĉ1δ1 over the feasible set. Corner search brackets δ0*,
/// then bisection on the subgradient sign closes in; the loop stops when the
/// δ0 bracket is below min(eps_cost/(ĉ0+ĉ1), 1e−8·initial width), which pins
/// the returned rates themselves (not just the cost) to the optimum.
pub fn optimal_threshold_2d(inst: &TwoLevelInstance, eps: Option<f64>) -> Result<CuringSolution> {
    optimal_threshold_2d_with(
        inst,
        &TwoLevelOptions {
            eps_cost: eps,
            ..TwoLevelOptions::default()
        },
    )
}

pub fn optimal_threshold_2d_with(
    inst: &TwoLevelInstance,
    opts: &TwoLevelOptions,
) -> Result<CuringSolution> {
    let eps_cost = opts.eps_cost.unwrap_or(1e-6 * inst.u_lmax()).max(f64::MIN_POSITIVE);
    let eps_lambda = opts
        .eps_lambda
        .unwrap_or(1e-6 * inst.l_max.max(1.0))
        .max(f64::MIN_POSITIVE);
    let (d0_min, d1_max) = left_corner(inst, eps_lambda)?;
    let (d0_max, d1_min) = right_corner(inst, eps_lambda)?;
    let initial_width = d0_max - d0_min;
    let width_target = (eps_cost / (inst.c_hat0 + inst.c_hat1))
        .min(1e-8 * initial_width.max(f64::MIN_POSITIVE))
        .max(1e-13 * initial_width);

    let phi = |d0: f64| bisection_threshold(inst, d0, eps_lambda);
    let mut best: (f64, f64, f64) = {
        let (ua, ub) = (inst.budget(d0_min, d1_max), inst.budget(d0_max, d1_min));
        if ua <= ub {
            (d0_min, d1_max, ua)
        } else {
            (d0_max, d1_min, ub)
        }
    };
    let consider = |d0: f64, d1: f64, best: &mut (f64, f64, f64)| {
        let u = inst.budget(d0, d1);
        if u < best.2 {
            *best = (d0, d1, u);
        }
    };

    let mut lo = d0_min;
    let mut hi = d0_max;
    let mut iterations = 0usize;
    let eps1 = eps_cost.max(1e-6 * inst.l_max);
    while hi - lo > width_target && iterations < opts.max_outer {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        let d1 = phi(mid)?;
        consider(mid, d1, &mut best);
        let descending = match opts.method {
            SubgradientMethod::Eigenvector => {
                if d1 == 0.0 && inst.strictly_feasible(mid, 0.0) {
                    // φ clamped at the δ1 ≥ 0 wall: cost only grows with δ0
                    false
                } else {
                    let (_, v) = dominant_eigenpair(&inst.shifted(mid, d1))?;
                    let s0: f64 = inst.pi0.iter().map(|&j| v[j] * v[j]).sum();
                    let s1: f64 = inst.pi1.iter().map(|&j| v[j] * v[j]).sum();
                    if s1 <= f64::MIN_POSITIVE {
                        true
                    } else {
                        inst.c_hat0 - inst.c_hat1 * s0 / s1 < 0.0
                    }
                }
            }
            SubgradientMethod::ForwardDifference => {
                let d1_fwd = phi(mid + eps1)?;
                consider(mid + eps1, d1_fwd, &mut best);
                inst.budget(mid + eps1, d1_fwd) < inst.budget(mid, d1)
            }
        };
        if descending {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    let d1 = phi(mid)?;
    consider(mid, d1, &mut best);
    let (d0_star, d1_star, cost) = best;
    let rates = inst.expand(d0_star, d1_star);
    let certificate = certify(&inst.q, &rates, eps_lambda)?;
    Ok(CuringSolution {
        rates,
        two_level: Some((d0_star, d1_star)),
        cost,
        certificate,
        iterations,
        epsilon: eps_cost,
    })
}

/// Closed-form optimum and uniform baseline for the standard families.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm2D {
    pub delta0: f64,
    pub delta1: f64,
    pub u_star: f64,
    pub u_uniform: f64,
}

fn check_positive(params: &[(&str, f64)]) -> Result<()> {
    for (name, v) in params {
        if !(v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidParameter(format!("{name} = {v}")));
        }
    }
    Ok(())
}

/// Hub with k leaves, all edges at rate β; per-node costs c0 (hub), c1 (leaf).
pub fn closed_form_star(k: usize, beta: f64, c0: f64, c1: f64) -> Result<ClosedForm2D> {
    if k < 1 {
        return Err(Error::InvalidParameter("star needs k >= 1".into()));
    }
    check_positive(&[("beta", beta), ("c0", c0), ("c1", c1)])?;
    let kf = k as f64;
    let delta0 = beta * kf * (c1 / c0).sqrt();
    let delta1 = beta * (c0 / c1).sqrt();
    let u_star = 2.0 * beta * kf * (c0 * c1).sqrt();
    let uniform_delta = beta * kf.sqrt();
    let u_uniform = uniform_delta * (c0 + c1 * kf);
    Ok(ClosedForm2D {
        delta0,
        delta1,
        u_star,
        u_uniform,
    })
}

/// Two hubs joined at rate β, each with k leaves attached at rate εβ.
pub fn closed_form_two_hub(
    k: usize,
    beta: f64,
    eps_ratio: f64,
    c0: f64,
    c1: f64,
) -> Result<ClosedForm2D> {
    if k < 1 {
        return Err(Error::InvalidParameter("two-hub needs k >= 1".into()));
    }
    check_positive(&[("beta", beta), ("eps", eps_ratio), ("c0", c0), ("c1", c1)])?;
    let kf = k as f64;
    let delta0 = beta * (eps_ratio * kf * (c1 / c0).sqrt() + 1.0);
    let delta1 = eps_ratio * beta * (c0 / c1).sqrt();
    let u_star = 4.0 * beta * eps_ratio * kf * (c0 * c1).sqrt() + 2.0 * beta * c0;
    let uniform_delta = 0.5 * beta * (1.0 + (1.0 + 4.0 * eps_ratio * eps_ratio * kf).sqrt());
    let u_uniform = uniform_delta * (2.0 * c0 + 2.0 * kf * c1);
    Ok(ClosedForm2D {
        delta0,
        delta1,
        u_star,
        u_uniform,
    })
}

/// Complete bipartite graph on k0 and k1 nodes at rate β; levels are the two
/// sides.
pub fn closed_form_bipartite(k0: usize, k1: usize, beta: f64, c0: f64, c1: f64) -> Result<ClosedForm2D> {
    if k0 < 1 || k1 < 1 {
        return Err(Error::InvalidParameter("bipartite needs k0, k1 >= 1".into()));
    }
    check_positive(&[("beta", beta), ("c0", c0), ("c1", c1)])?;
    let (k0f, k1f) = (k0 as f64, k1 as f64);
    let delta0 = beta * k1f * (c1 / c0).sqrt();
    let delta1 = beta * k0f * (c0 / c1).sqrt();
    let u_star = 2.0 * beta * k0f * k1f * (c0 * c1).sqrt();
    let uniform_delta = beta * (k0f * k1f).sqrt();
    let u_uniform = uniform_delta * (c0 * k0f + c1 * k1f);
    Ok(ClosedForm2D {
        delta0,
        delta1,
        u_star,
        u_uniform,
    })
}

#[derive(Debug, Clone)]
pub struct GeneralOptions {
    pub eps_cost: Option<f64>,
    pub eps_lambda: Option<f64>,
    pub max_iter: usize,
}

impl Default for GeneralOptions {
    fn default() -> Self {
        Self {
            eps_cost: None,
            eps_lambda: None,
            max_iter: 600,
        }
    }
}

fn components_of(q: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = q.nrows();
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut stack = vec![start];
        let mut comp = Vec::new();
        seen[start] = true;
        while let Some(i) = stack.pop() {
            comp.push(i);
            for j in 0..n {
                if !seen[j] && i != j && q[(i, j)] != 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

/// Per-community optimizer for min Σ c_j k_j f(δ_j) s.t. Q − diag(Δ) ⪯ 0,
/// Δ ≥ 0. Starts from the feasible l_max·1 point and descends along the
/// boundary using the λ1 subgradient (−v_j² per coordinate), projecting the
/// cost gradient onto the boundary tangent and restoring feasibility by a
/// uniform shift after every trial step. With linear effort the KKT point
/// δ_j = (Qu)_j/u_j, u = √(c∘k) (per connected component) is evaluated as
/// well and the cheaper of the two is returned.
pub fn optimize_general(
    q: &QuotientModel,
    cost: &CostModel,
    opts: &GeneralOptions,
) -> Result<CuringSolution> {
    require_symmetric_quotient(&q.q_t)?;
    let n = q.n;
    if cost.costs().len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: cost.costs().len(),
        });
    }
    let qm = &q.q_t;
    let sizes = &q.sizes;
    let l_max = q.l_max();
    let scale = l_max.max(1.0);
    let eps_lambda = opts.eps_lambda.unwrap_or(1e-6 * scale).max(f64::MIN_POSITIVE);
    let u_lmax = cost.total(sizes, &DVector::from_element(n, l_max));
    let eps_cost = opts.eps_cost.unwrap_or(1e-6 * u_lmax).max(f64::MIN_POSITIVE);

    let lambda1_of = |d: &DVector<f64>| -> Result<f64> {
        let mut m = qm.clone();
        for j in 0..n {
            m[(j, j)] -= d[j];
        }
        lambda_max(&m)
    };
    // restore feasibility exactly: λ1(Q − D − sI) = λ1(Q − D) − s
    let restore = |d: &mut DVector<f64>| -> Result<()> {
        let l1 = lambda1_of(d)?;
        if l1 > 0.0 {
            for x in d.iter_mut() {
                *x += l1 * (1.0 + 1e-14);
            }
        }
        Ok(())
    };

    let mut delta = DVector::from_element(n, l_max);
    let mut u = cost.total(sizes, &delta);
    let mut iterations = 0usize;
    let mut step = 0.25 * scale;
    let mut stall = 0usize;
    while iterations < opts.max_iter && step > 1e-13 * scale {
        iterations += 1;
        let mut m = qm.clone();
        for j in 0..n {
            m[(j, j)] -= delta[j];
        }
        let (_, v) = dominant_eigenpair(&m)?;
        let v2 = DVector::from_fn(n, |j, _| v[j] * v[j]);
        let g = DVector::from_fn(n, |j, _| {
            cost.costs()[j] * sizes[j] as f64 * cost.effort().deriv(delta[j])
        });
        let denom = v2.dot(&v2);
        let mu = if denom > 0.0 { g.dot(&v2) / denom } else { 0.0 };
        let mut dir = DVector::from_fn(n, |j, _| -(g[j] - mu * v2[j]));
        // moving along the boundary can't push an active δ_j = 0 negative
        for j in 0..n {
            if delta[j] <= 0.0 && dir[j] < 0.0 {
                dir[j] = 0.0;
            }
        }
        let dir_norm = dir.amax();
        if dir_norm <= 1e-14 * g.amax().max(1.0) {
            break;
        }
        let mut improved = false;
        let mut t = step / dir_norm;
        for _ in 0..30 {
            let mut cand = &delta + &dir * t;
            for x in cand.iter_mut() {
                if *x < 0.0 {
                    *x = 0.0;
                }
            }
            restore(&mut cand)?;
            let uc = cost.total(sizes, &cand);
            if uc < u - 1e-15 * u.abs().max(1.0) {
                delta = cand;
                u = uc;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if improved {
            step = (step * 1.5).min(0.25 * scale);
            stall = 0;
        } else {
            step *= 0.25;
            stall += 1;
            if stall > 8 {
                break;
            }
        }
    }
    restore(&mut delta)?;
    let mut best_rates = delta;
    let mut best_cost = cost.total(sizes, &best_rates);

    if cost.effort() == Effort::Linear {
        let mut kkt = DVector::zeros(n);
        for comp in components_of(qm) {
            let m = comp.len();
            let sub = DMatrix::from_fn(m, m, |a, b| qm[(comp[a], comp[b])]);
            let u_vec = DVector::from_fn(m, |a, _| {
                (cost.costs()[comp[a]] * sizes[comp[a]] as f64).sqrt()
            });
            let qu = &sub * &u_vec;
            for (a, &j) in comp.iter().enumerate() {
                kkt[j] = qu[a] / u_vec[a];
            }
        }
        let l1 = lambda1_of(&kkt)?;
        if l1 <= eps_lambda {
            let u_kkt = cost.total(sizes, &kkt);
            if u_kkt < best_cost {
                best_rates = kkt;
                best_cost = u_kkt;
            }
        }
    }

    let certificate = certify(qm, &best_rates, eps_lambda)?;
    Ok(CuringSolution {
        rates: best_rates,
        two_level: None,
        cost: best_cost,
        certificate,
        iterations,
        epsilon: eps_cost,
    })
}

/// One row of the sweep CSV (`k,U_star,U_uniform,ratio,delta0,delta1`); the
/// first column carries the swept variable's value, `ratio` is U_uniform/U*.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub k: f64,
    pub u_star: f64,
    pub u_uniform: f64,
    pub ratio: f64,
    pub delta0: f64,
    pub delta1: f64,
}

pub const SWEEP_HEADER: &str = "k,U_star,U_uniform,ratio,delta0,delta1";

pub fn write_sweep_csv<W: std::io::Write>(mut out: W, rows: &[SweepRecord]) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.k, r.u_star, r.u_uniform, r.ratio, r.delta0, r.delta1
        )?;
    }
    Ok(())
}

pub fn read_sweep_csv<R: std::io::BufRead>(reader: R) -> Result<Vec<SweepRecord>> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Format("empty sweep file".into()))?;
    if header.trim_end() != SWEEP_HEADER {
        return Err(Error::Format(format!("bad sweep header: {header}")));
    }
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Format(format!("sweep row with {} fields", fields.len())));
        }
        let mut vals = [0.0f64; 6];
        for (slot, field) in vals.iter_mut().zip(&fields) {
            *slot = field
                .parse()
                .map_err(|_| Error::Format(format!("bad number: {field}")))?;
        }
        rows.push(SweepRecord {
            k: vals[0],
            u_star: vals[1],
            u_uniform: vals[2],
            ratio: vals[3],
            delta0: vals[4],
            delta1: vals[5],
        });
    }
    Ok(rows)
}
