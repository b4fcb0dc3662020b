//! Mean-field SIS dynamics: the full N-dimensional system, its community-level
//! reduction, an adaptive Dormand–Prince integrator with dense sampling, and
//! steady-state solvers.
//!
//! Both systems share the form dp/dt = (1 − p) ∘ (W p) − δ ∘ p, where W is the
//! node-level rate matrix for the full system and the cell-to-cell constant
//! matrix for the reduced one. Everything here is written against that generic
//! form so the two paths cannot drift apart.

use std::io::{BufRead, Write as IoWrite};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::netmodel::{ContactNetwork, CuringVector};
use crate::partition::{QuotientModel, ReducedCuringVector};
use crate::spectral::stability_modulus;

/// Time-stamped state vectors from an integrator (dimension N or n).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<DVector<f64>>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: states.len(),
            });
        }
        if times.is_empty() {
            return Err(Error::InvalidSize("empty trajectory".into()));
        }
        for w in times.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvariantViolation(format!(
                    "times not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        let d = states[0].len();
        if states.iter().any(|s| s.len() != d) {
            return Err(Error::InvalidSize("ragged trajectory states".into()));
        }
        Ok(Self { times, states })
    }

    pub fn dimension(&self) -> usize {
        self.states[0].len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn last_state(&self) -> &DVector<f64> {
        self.states.last().unwrap()
    }

    /// Mean infection probability of the sample at `idx`.
    pub fn prevalence_at(&self, idx: usize) -> f64 {
        self.states[idx].mean()
    }

    /// `t,p_0,...,p_{d-1}` with one row per sample. Values use the shortest
    /// decimal form that parses back to the identical bits, so a read/write
    /// cycle is byte-stable.
    pub fn write_csv<W: IoWrite>(&self, mut out: W) -> Result<()> {
        let d = self.dimension();
        let mut header = String::from("t");
        for i in 0..d {
            header.push_str(&format!(",p_{i}"));
        }
        writeln!(out, "{header}")?;
        for (t, state) in self.times.iter().zip(&self.states) {
            let mut row = format!("{t}");
            for v in state.iter() {
                row.push_str(&format!(",{v}"));
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv is ascii"))
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::Format("empty trajectory file".into()))?;
        let cols: Vec<&str> = header.trim_end().split(',').collect();
        if cols.first() != Some(&"t") || cols.len() < 2 {
            return Err(Error::Format(format!("bad trajectory header: {header}")));
        }
        for (i, c) in cols[1..].iter().enumerate() {
            if *c != format!("p_{i}") {
                return Err(Error::Format(format!("bad trajectory column: {c}")));
            }
        }
        let d = cols.len() - 1;
        let mut times = Vec::new();
        let mut states = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim_end().split(',').collect();
            if fields.len() != d + 1 {
                return Err(Error::Format(format!("row with {} fields", fields.len())));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number: {s}")))
            };
            times.push(parse(fields[0])?);
            let mut state = DVector::zeros(d);
            for (i, f) in fields[1..].iter().enumerate() {
                state[i] = parse(f)?;
            }
            states.push(state);
        }
        Trajectory::new(times, states)
    }
}

/// dp/dt = (1 − p) ∘ (W p) − δ ∘ p, the common shape of the full and reduced
/// systems. No cube check: adaptive-step internals evaluate slightly outside
/// [0,1]^d and that must stay legal.
pub fn rhs_generic(w: &DMatrix<f64>, delta: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
    let s = w * p;
    DVector::from_fn(p.len(), |i, _| (1.0 - p[i]) * s[i] - delta[i] * p[i])
}

pub fn rhs_full(net: &ContactNetwork, delta: &CuringVector, p: &DVector<f64>) -> Result<DVector<f64>> {
    if p.len() != net.n_nodes() || delta.len() != net.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: net.n_nodes(),
            got: p.len().max(delta.len()),
        });
    }
    Ok(rhs_generic(net.rates(), delta.values(), p))
}

pub fn rhs_reduced(
    q: &QuotientModel,
    delta_bar: &ReducedCuringVector,
    pbar: &DVector<f64>,
) -> Result<DVector<f64>> {
    if pbar.len() != q.n || delta_bar.len() != q.n {
        return Err(Error::DimensionMismatch {
            expected: q.n,
            got: pbar.len().max(delta_bar.len()),
        });
    }
    let out = rhs_generic(&q.c_out, delta_bar.values(), pbar);
    #[cfg(debug_assertions)]
    {
        // matrix form (Q̃ − D̄)p̄ − diag(p̄)·Q̃·p̄ must agree with the
        // componentwise evaluation
        let qp = &q.q_tilde * pbar;
        let matrix_form = DVector::from_fn(pbar.len(), |j, _| {
            qp[j] - delta_bar.values()[j] * pbar[j] - pbar[j] * qp[j]
        });
        let scale = out.amax().max(1.0);
        debug_assert!(
            (&out - &matrix_form).amax() <= 1e-13 * scale,
            "componentwise and matrix reduced rhs disagree"
        );
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_init: Option<f64>,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-11,
            max_steps: 5_000_000,
            h_init: None,
        }
    }
}

/// `samples + 1` uniformly spaced times covering [0, t_end].
pub fn uniform_times(t_end: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(1);
    (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Adaptive 5(4) integration of an autonomous system on [0, max(times)],
/// landing exactly on every requested sample time. States are confined to the
/// unit cube: the dynamics are positively invariant there, so any excursion is
/// integrator error — excursions within 10× the local tolerance are clamped
/// away, larger ones abort with `InvariantViolation`.
pub fn integrate<F: FnMut(&DVector<f64>) -> DVector<f64>>(
    mut rhs: F,
    p0: &DVector<f64>,
    sample_times: &[f64],
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    let d = p0.len();
    if d == 0 {
        return Err(Error::InvalidSize("empty state".into()));
    }
    for v in p0.iter() {
        if !(0.0..=1.0).contains(v) {
            return Err(Error::InvalidProbability(*v));
        }
    }
    if sample_times.is_empty() {
        return Err(Error::InvalidSize("no sample times".into()));
    }
    for w in sample_times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidParameter(format!(
                "sample times not increasing: {} -> {}",
                w[0], w[1]
            )));
        }
    }
    if sample_times[0] < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "negative sample time {}",
            sample_times[0]
        )));
    }
    let t_end = *sample_times.last().unwrap();
    let guard = 10.0 * (opts.atol + opts.rtol);

    let mut t = 0.0;
    let mut y = p0.clone();
    let mut k1 = rhs(&y);
    let mut h = opts.h_init.unwrap_or_else(|| {
        let scale = 1.0 + k1.amax();
        (0.01 / scale).min(t_end.max(1e-12) / 10.0)
    });
    let mut out_times = Vec::with_capacity(sample_times.len());
    let mut out_states = Vec::with_capacity(sample_times.len());
    let mut steps = 0usize;

    let mut record = |t: f64, y: &DVector<f64>| -> Result<()> {
        let mut clamped = y.clone();
        for v in clamped.iter_mut() {
            let excess = (-*v).max(*v - 1.0);
            if excess > guard {
                return Err(Error::InvariantViolation(format!(
                    "state left [0,1] by {excess:.3e} at t={t}"
                )));
            }
            *v = v.clamp(0.0, 1.0);
        }
        out_times.push(t);
        out_states.push(clamped);
        Ok(())
    };

    let mut next_sample = 0usize;
    if sample_times[0] == 0.0 {
        record(0.0, &y)?;
        next_sample = 1;
    }

    let mut ks: Vec<DVector<f64>> = vec![DVector::zeros(d); 7];
    while next_sample < sample_times.len() {
        let target = sample_times[next_sample];
        while t < target {
            if steps > opts.max_steps {
                return Err(Error::StepFailure(format!(
                    "step budget {} exhausted at t={t}",
                    opts.max_steps
                )));
            }
            steps += 1;
            // truncated steps land exactly on the sample time and must not
            // feed back into the error-controlled step size
            let truncated = target - t <= h;
            let h_try = if truncated { target - t } else { h };

            ks[0] = k1.clone();
            for stage in 0..6 {
                let mut arg = y.clone();
                for (j, a) in A[stage].iter().enumerate().take(stage + 1) {
                    if *a != 0.0 {
                        arg.axpy(h_try * a, &ks[j], 1.0);
                    }
                }
                ks[stage + 1] = rhs(&arg);
            }
            let mut y5 = y.clone();
            let mut err_vec = DVector::zeros(d);
            for (j, k) in ks.iter().enumerate() {
                if B5[j] != 0.0 {
                    y5.axpy(h_try * B5[j], k, 1.0);
                }
                let diff = B5[j] - B4[j];
                if diff != 0.0 {
                    err_vec.axpy(h_try * diff, k, 1.0);
                }
            }
            // weighted RMS error against the mixed tolerance
            let mut acc = 0.0;
            for i in 0..d {
                let sc = opts.atol + opts.rtol * y[i].abs().max(y5[i].abs());
                let e = err_vec[i] / sc;
                acc += e * e;
            }
            let err = (acc / d as f64).sqrt();
            if err <= 1.0 {
                t = if truncated { target } else { t + h_try };
                y = y5;
                k1 = ks[6].clone(); // FSAL
                if !truncated {
                    let factor = if err == 0.0 {
                        10.0
                    } else {
                        (0.9 * err.powf(-0.2)).clamp(0.2, 10.0)
                    };
                    h = h_try * factor;
                }
            } else {
                h = h_try * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0).min(0.5);
                if h < 1e-14 * t_end.max(1.0) {
                    return Err(Error::StepFailure(format!(
                        "step size underflow at t={t} (err {err:.3e})"
                    )));
                }
            }
        }
        record(t, &y)?;
        next_sample += 1;
    }
    Trajectory::new(out_times, out_states)
}

/// Full-system convenience wrapper over [`integrate`].
pub fn integrate_full(
    net: &ContactNetwork,
    delta: &CuringVector,
    p0: &DVector<f64>,
    sample_times: &[f64],
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if delta.len() != net.n_nodes() || p0.len() != net.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: net.n_nodes(),
            got: p0.len(),
        });
    }
    let w = net.rates().clone();
    let dv = delta.values().clone();
    integrate(|p| rhs_generic(&w, &dv, p), p0, sample_times, opts)
}

/// Reduced-system convenience wrapper over [`integrate`].
pub fn integrate_reduced(
    q: &QuotientModel,
    delta_bar: &ReducedCuringVector,
    pbar0: &DVector<f64>,
    sample_times: &[f64],
    opts: &IntegrateOptions,
) -> Result<Trajectory> {
    if delta_bar.len() != q.n || pbar0.len() != q.n {
        return Err(Error::DimensionMismatch {
            expected: q.n,
            got: pbar0.len(),
        });
    }
    let w = q.c_out.clone();
    let dv = delta_bar.values().clone();
    integrate(|p| rhs_generic(&w, &dv, p), pbar0, sample_times, opts)
}

/// Sign of the stability modulus r(W − diag δ) decides extinction vs
/// endemicity; |r| within 1e−12 of zero is flagged as near-critical.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub modulus: f64,
    pub supercritical: bool,
    pub near_critical: bool,
}

pub fn threshold(w: &DMatrix<f64>, delta: &DVector<f64>) -> Result<ThresholdReport> {
    if w.nrows() != delta.len() {
        return Err(Error::DimensionMismatch {
            expected: w.nrows(),
            got: delta.len(),
        });
    }
    let mut m = w.clone();
    for i in 0..delta.len() {
        m[(i, i)] -= delta[i];
    }
    let r = stability_modulus(&m)?;
    Ok(ThresholdReport {
        modulus: r,
        supercritical: r > 1e-12,
        near_critical: r.abs() <= 1e-12,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyStateMode {
    /// Pick the branch from the sign of the stability modulus.
    Auto,
    Endemic,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyStateKind {
    Zero,
    Endemic,
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub vector: DVector<f64>,
    /// Max-norm of the right-hand side at the vector.
    pub residual: f64,
    pub kind: SteadyStateKind,
    /// Stability modulus within 1e−12 of zero: the zero branch was chosen on
    /// a tie.
    pub near_critical: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SteadyStateOptions {
    pub tol: f64,
    /// Hand-off point from damped fixed-point iteration to Newton.
    pub fp_tol: f64,
    pub damping: f64,
    pub max_iter: usize,
    pub max_newton: usize,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            fp_tol: 1e-6,
            damping: 0.5,
            max_iter: 100_000,
            max_newton: 80,
        }
    }
}

/// Steady state of dp/dt = (1−p)∘(Wp) − δ∘p. The endemic branch damps the
/// fixed-point map p_i ← s_i/(δ_i+s_i) from the all-0.5 start, then Newton
/// iterations drive the residual to `opts.tol`.
pub fn steady_state(
    w: &DMatrix<f64>,
    delta: &DVector<f64>,
    mode: SteadyStateMode,
    opts: &SteadyStateOptions,
) -> Result<SteadyState> {
    let n = delta.len();
    if w.nrows() != n || w.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: w.nrows(),
        });
    }
    let report = threshold(w, delta)?;
    let zero_state = |near: bool| SteadyState {
        vector: DVector::zeros(n),
        residual: 0.0,
        kind: SteadyStateKind::Zero,
        near_critical: near,
        iterations: 0,
    };
    match mode {
        SteadyStateMode::Zero => return Ok(zero_state(report.near_critical)),
        SteadyStateMode::Auto if !report.supercritical => {
            return Ok(zero_state(report.near_critical))
        }
        _ => {}
    }

    let fp_map = |p: &DVector<f64>| -> DVector<f64> {
        let s = w * p;
        DVector::from_fn(n, |i, _| {
            let tot = delta[i] + s[i];
            if tot > 0.0 {
                s[i] / tot
            } else {
                0.0
            }
        })
    };
    let residual_of = |p: &DVector<f64>| rhs_generic(w, delta, p).amax();

    let mut p = DVector::from_element(n, 0.5);
    let mut iterations = 0usize;
    let mut reached_fp_tol = false;
    for _ in 0..opts.max_iter {
        iterations += 1;
        let next = fp_map(&p);
        let shift = (&next - &p).amax();
        p = &p * (1.0 - opts.damping) + next * opts.damping;
        if shift <= opts.fp_tol {
            reached_fp_tol = true;
            break;
        }
    }
    if !reached_fp_tol {
        return Err(Error::NonConvergence(format!(
            "fixed-point stage stalled after {} iterations",
            opts.max_iter
        )));
    }

    // Newton polish on f(p) = (1−p)∘(Wp) − δ∘p with J = diag(1−p)W − diag(Wp+δ)
    let mut res = residual_of(&p);
    for _ in 0..opts.max_newton {
        if res <= opts.tol {
            break;
        }
        iterations += 1;
        let s = w * &p;
        let f = DVector::from_fn(n, |i, _| (1.0 - p[i]) * s[i] - delta[i] * p[i]);
        let mut jac = w.clone();
        for i in 0..n {
            for j in 0..n {
                jac[(i, j)] *= 1.0 - p[i];
            }
            jac[(i, i)] -= s[i] + delta[i];
        }
        let step = jac
            .lu()
            .solve(&f)
            .ok_or_else(|| Error::NonConvergence("singular Jacobian in steady-state Newton".into()))?;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut cand = &p - &step * scale;
            for v in cand.iter_mut() {
                *v = v.clamp(0.0, 1.0);
            }
            let cand_res = residual_of(&cand);
            if cand_res < res {
                p = cand;
                res = cand_res;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res > opts.tol.max(1e-12) {
        return Err(Error::NonConvergence(format!(
            "steady-state residual stuck at {res:.3e}"
        )));
    }
    Ok(SteadyState {
        vector: p,
        residual: res,
        kind: SteadyStateKind::Endemic,
        near_critical: report.near_critical,
        iterations,
    })
}

pub fn steady_state_full(
    net: &ContactNetwork,
    delta: &CuringVector,
    mode: SteadyStateMode,
    opts: &SteadyStateOptions,
) -> Result<SteadyState> {
    steady_state(net.rates(), delta.values(), mode, opts)
}

pub fn steady_state_reduced(
    q: &QuotientModel,
    delta_bar: &ReducedCuringVector,
    mode: SteadyStateMode,
    opts: &SteadyStateOptions,
) -> Result<SteadyState> {
    steady_state(&q.c_out, delta_bar.values(), mode, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{build_network, generate_star};
    use crate::partition::{build_quotient, lift_vector, LiftKind};
    use approx::assert_relative_eq;

    fn complete_net(n: usize) -> ContactNetwork {
        let mut m = DMatrix::from_element(n, n, 1.0);
        m.fill_diagonal(0.0);
        build_network(m).unwrap()
    }

    #[test]
    fn rhs_vanishes_at_zero_and_hits_minus_delta_at_one() {
        let net = complete_net(4);
        let delta = CuringVector::new(DVector::from_vec(vec![0.3, 0.7, 1.1, 2.0])).unwrap();
        let zero = rhs_full(&net, &delta, &DVector::zeros(4)).unwrap();
        assert!(zero.amax() == 0.0);
        let ones = rhs_full(&net, &delta, &DVector::from_element(4, 1.0)).unwrap();
        for i in 0..4 {
            assert_relative_eq!(ones[i], -delta.values()[i], max_relative = 1e-15);
        }
    }

    #[test]
    fn two_node_symmetric_endemic_point() {
        let net = build_network(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let delta = CuringVector::uniform(2, 0.5).unwrap();
        let f = rhs_full(&net, &delta, &DVector::from_element(2, 0.5)).unwrap();
        assert!(f.amax() < 1e-15);
    }

    #[test]
    fn reduced_rhs_star_quotient_at_saturation() {
        let (net, pi) = generate_star(4, 1.0).unwrap();
        let q = build_quotient(&net, &pi, None, 1e-12).unwrap();
        let dbar = ReducedCuringVector::new(DVector::from_vec(vec![2.0, 1.0])).unwrap();
        let f = rhs_reduced(&q, &dbar, &DVector::from_element(2, 1.0)).unwrap();
        assert_relative_eq!(f[0], -2.0, max_relative = 1e-15);
        assert_relative_eq!(f[1], -1.0, max_relative = 1e-15);
    }

    #[test]
    fn reduced_rhs_is_cellwise_full_rhs() {
        let (net, pi) = generate_star(6, 0.8).unwrap();
        let q = build_quotient(&net, &pi, None, 1e-12).unwrap();
        let dbar = ReducedCuringVector::new(DVector::from_vec(vec![1.3, 0.4])).unwrap();
        let pbar = DVector::from_vec(vec![0.2, 0.7]);
        let fbar = rhs_reduced(&q, &dbar, &pbar).unwrap();
        let p = lift_vector(&q, &pbar, LiftKind::PerNode).unwrap();
        let delta = CuringVector::new(lift_vector(&q, dbar.values(), LiftKind::PerNode).unwrap()).unwrap();
        let f = rhs_full(&net, &delta, &p).unwrap();
        for v in 0..net.n_nodes() {
            assert_relative_eq!(f[v], fbar[q.cell_of(v)], epsilon = 1e-14);
        }
    }

    #[test]
    fn decoupled_decay_matches_exponential() {
        let net = build_network(DMatrix::zeros(3, 3)).unwrap();
        let delta = CuringVector::uniform(3, 1.0).unwrap();
        let traj = integrate_full(
            &net,
            &delta,
            &DVector::from_element(3, 0.8),
            &uniform_times(1.0, 4),
            &IntegrateOptions::default(),
        )
        .unwrap();
        let expect = 0.8 * (-1.0f64).exp();
        for v in traj.last_state().iter() {
            assert!((v - expect).abs() < 1e-8, "{v} vs {expect}");
        }
    }

    #[test]
    fn subcritical_complete_graph_dies_out() {
        let net = complete_net(4);
        let delta = CuringVector::uniform(4, 4.0).unwrap();
        let traj = integrate_full(
            &net,
            &delta,
            &DVector::from_element(4, 0.9),
            &uniform_times(20.0, 20),
            &IntegrateOptions::default(),
        )
        .unwrap();
        assert!(traj.last_state().amax() < 1e-6);
    }

    #[test]
    fn star_reduction_equivalence_on_trajectories() {
        let (net, pi) = generate_star(4, 1.0).unwrap();
        let q = build_quotient(&net, &pi, None, 1e-12).unwrap();
        let delta = CuringVector::uniform(5, 1.0).unwrap();
        let dbar = ReducedCuringVector::uniform(2, 1.0).unwrap();
        let times = uniform_times(20.0, 40);
        let opts = IntegrateOptions::default();
        let full = integrate_full(&net, &delta, &DVector::from_element(5, 0.5), &times, &opts).unwrap();
        let red = integrate_reduced(&q, &dbar, &DVector::from_element(2, 0.5), &times, &opts).unwrap();
        let mut worst: f64 = 0.0;
        for (pf, pr) in full.states().iter().zip(red.states()) {
            let lifted = lift_vector(&q, pr, LiftKind::PerNode).unwrap();
            worst = worst.max((pf - lifted).amax());
        }
        assert!(worst < 1e-8, "sup-norm gap {worst}");
    }

    #[test]
    fn threshold_report_on_complete_graph() {
        let net = complete_net(4);
        let sub = threshold(net.rates(), &DVector::from_element(4, 4.0)).unwrap();
        assert_relative_eq!(sub.modulus, -1.0, max_relative = 1e-10);
        assert!(!sub.supercritical);
        let sup = threshold(net.rates(), &DVector::from_element(4, 1.5)).unwrap();
        assert_relative_eq!(sup.modulus, 1.5, max_relative = 1e-10);
        assert!(sup.supercritical);
    }

    #[test]
    fn steady_state_complete_graph_closed_form() {
        let net = complete_net(4);
        let opts = SteadyStateOptions::default();
        let endemic = steady_state(
            net.rates(),
            &DVector::from_element(4, 1.5),
            SteadyStateMode::Auto,
            &opts,
        )
        .unwrap();
        assert_eq!(endemic.kind, SteadyStateKind::Endemic);
        assert!(endemic.residual <= 1e-12);
        for v in endemic.vector.iter() {
            assert_relative_eq!(*v, 0.5, epsilon = 1e-12);
        }
        let zero = steady_state(
            net.rates(),
            &DVector::from_element(4, 4.0),
            SteadyStateMode::Auto,
            &opts,
        )
        .unwrap();
        assert_eq!(zero.kind, SteadyStateKind::Zero);
        assert!(zero.vector.amax() == 0.0);
    }

    #[test]
    fn steady_state_reduction_consistency() {
        let (net, pi) = generate_star(4, 1.0).unwrap();
        let q = build_quotient(&net, &pi, None, 1e-12).unwrap();
        let opts = SteadyStateOptions::default();
        let full = steady_state(
            net.rates(),
            &DVector::from_element(5, 1.0),
            SteadyStateMode::Auto,
            &opts,
        )
        .unwrap();
        let red = steady_state(&q.c_out, &DVector::from_element(2, 1.0), SteadyStateMode::Auto, &opts)
            .unwrap();
        let lifted = lift_vector(&q, &red.vector, LiftKind::PerNode).unwrap();
        assert!((&full.vector - &lifted).amax() < 1e-10);
    }

    #[test]
    fn endemic_state_matches_long_time_integration() {
        let net = complete_net(5);
        let delta = CuringVector::uniform(5, 1.7).unwrap();
        let ss = steady_state_full(&net, &delta, SteadyStateMode::Auto, &SteadyStateOptions::default())
            .unwrap();
        let traj = integrate_full(
            &net,
            &delta,
            &DVector::from_element(5, 0.37),
            &uniform_times(80.0, 10),
            &IntegrateOptions::default(),
        )
        .unwrap();
        assert!((traj.last_state() - &ss.vector).amax() < 1e-8);
    }

    #[test]
    fn trajectory_csv_round_trip_is_byte_identical() {
        let net = complete_net(3);
        let delta = CuringVector::uniform(3, 1.2).unwrap();
        let traj = integrate_full(
            &net,
            &delta,
            &DVector::from_vec(vec![0.9, 0.4, 0.1]),
            &uniform_times(5.0, 7),
            &IntegrateOptions::default(),
        )
        .unwrap();
        let text = traj.to_csv_string().unwrap();
        let back = Trajectory::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back.to_csv_string().unwrap(), text);
        assert_eq!(back, traj);
    }

    #[test]
    fn integrate_rejects_bad_inputs() {
        let err = integrate(
            |p| p.clone(),
            &DVector::from_vec(vec![1.5]),
            &[0.0, 1.0],
            &IntegrateOptions::default(),
        );
        assert!(matches!(err, Err(Error::InvalidProbability(_))));
        let err = integrate(
            |p| p.clone(),
            &DVector::from_vec(vec![0.5]),
            &[0.0, 2.0, 1.0],
            &IntegrateOptions::default(),
        );
        assert!(matches!(err, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn clamp_guard_trips_on_runaway_dynamics() {
        // dp/dt = +1 leaves the cube immediately and keeps going
        let err = integrate(
            |p| DVector::from_element(p.len(), 1.0),
            &DVector::from_vec(vec![0.9]),
            &[0.0, 1.0],
            &IntegrateOptions::default(),
        );
        assert!(matches!(err, Err(Error::InvariantViolation(_))));
    }
}
