//! Exact continuous-time Markov SIS on the full 2^N state space — the
//! ground-truth oracle that the mean-field layer is validated against.
//!
//! States are bitmasks (bit i set ⇔ node i infected). The all-healthy state 0
//! is absorbing. Dense solves (master equation, quasi-stationary distribution)
//! are capped by state-space size; the Gillespie sampler is event-driven and
//! has no such cap.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::netmodel::{ContactNetwork, CuringVector};
use crate::nimfa::Trajectory;

/// Generator construction refuses anything above this many nodes outright.
pub const HARD_CAP_N: usize = 20;
/// Dense master-equation and QSD solves refuse above this without an explicit
/// override.
pub const DENSE_CAP_DEFAULT: usize = 12;

/// Sparse (CSR-style) generator of the 2^N-state chain. Rows are source
/// states; `diag` holds the negative row sums.
pub struct Generator {
    n_nodes: usize,
    offsets: Vec<u32>,
    targets: Vec<u32>,
    rates: Vec<f64>,
    diag: Vec<f64>,
}

impl Generator {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_states(&self) -> usize {
        1usize << self.n_nodes
    }

    pub fn transitions(&self, state: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.offsets[state] as usize;
        let hi = self.offsets[state + 1] as usize;
        self.targets[lo..hi]
            .iter()
            .zip(&self.rates[lo..hi])
            .map(|(&t, &r)| (t as usize, r))
    }

    pub fn diag(&self, state: usize) -> f64 {
        self.diag[state]
    }

    /// Σ over the row including the diagonal — zero for a proper generator.
    pub fn row_sum(&self, state: usize) -> f64 {
        self.transitions(state).map(|(_, r)| r).sum::<f64>() + self.diag[state]
    }

    /// Largest jump intensity max_s |G_ss|, the uniformization constant.
    pub fn max_rate(&self) -> f64 {
        self.diag.iter().fold(0.0, |m, d| m.max(-d))
    }

    /// out ← v·G (left action on a row vector over all states).
    fn apply_left(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for s in 0..self.n_states() {
            let vs = v[s];
            if vs == 0.0 {
                continue;
            }
            out[s] += vs * self.diag[s];
            for (t, r) in self.transitions(s) {
                out[t] += vs * r;
            }
        }
    }

    /// out ← v·G restricted to the non-absorbing states: state 0 is removed as
    /// both source and target, so mass flowing into it leaks out of the vector.
    fn apply_left_restricted(&self, v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for s in 1..self.n_states() {
            let vs = v[s];
            if vs == 0.0 {
                continue;
            }
            out[s] += vs * self.diag[s];
            for (t, r) in self.transitions(s) {
                if t != 0 {
                    out[t] += vs * r;
                }
            }
        }
    }
}

pub fn build_generator(net: &ContactNetwork, delta: &CuringVector) -> Result<Generator> {
    let n = net.n_nodes();
    if n > HARD_CAP_N {
        return Err(Error::TooLarge { n, cap: HARD_CAP_N });
    }
    if delta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: delta.len(),
        });
    }
    let n_states = 1usize << n;
    let b = net.rates();
    let dv = delta.values();
    let mut offsets = Vec::with_capacity(n_states + 1);
    let mut targets = Vec::new();
    let mut rates = Vec::new();
    let mut diag = vec![0.0; n_states];
    offsets.push(0u32);
    for state in 0..n_states {
        let mut total = 0.0;
        for i in 0..n {
            let bit = 1usize << i;
            if state & bit != 0 {
                // recovery i: infected -> susceptible at rate δ_i
                if dv[i] > 0.0 {
                    targets.push((state & !bit) as u32);
                    rates.push(dv[i]);
                    total += dv[i];
                }
            } else {
                // infection i: pressure from currently infected neighbors
                let mut pressure = 0.0;
                let mut rest = state;
                while rest != 0 {
                    let j = rest.trailing_zeros() as usize;
                    pressure += b[(i, j)];
                    rest &= rest - 1;
                }
                if pressure > 0.0 {
                    targets.push((state | bit) as u32);
                    rates.push(pressure);
                    total += pressure;
                }
            }
        }
        diag[state] = -total;
        offsets.push(targets.len() as u32);
    }
    Ok(Generator {
        n_nodes: n,
        offsets,
        targets,
        rates,
        diag,
    })
}

pub fn check_dense_cap(n: usize, cap_override: Option<usize>) -> Result<()> {
    let cap = cap_override.unwrap_or(DENSE_CAP_DEFAULT).min(HARD_CAP_N);
    if n > cap {
        return Err(Error::TooLarge { n, cap });
    }
    Ok(())
}

/// Advances a distribution by exp(G·dt) via uniformization: Poisson-weighted
/// powers of the stochastic matrix I + G/Λ, truncated at a 1e−14 tail. Each
/// substep keeps Λ·dt ≤ 500 so the leading Poisson weight stays representable.
fn propagate(gen: &Generator, dist: &mut Vec<f64>, dt: f64) -> Result<()> {
    if dt == 0.0 {
        return Ok(());
    }
    let lam_total = gen.max_rate();
    if lam_total == 0.0 {
        return Ok(());
    }
    let n_sub = ((lam_total * dt) / 500.0).ceil().max(1.0) as usize;
    let sub_dt = dt / n_sub as f64;
    let lam = lam_total * sub_dt;
    let mut scratch = vec![0.0; dist.len()];
    for _ in 0..n_sub {
        let mut acc = vec![0.0; dist.len()];
        let mut v = dist.clone();
        let mut weight = (-lam).exp();
        let mut cum = weight;
        for (a, x) in acc.iter_mut().zip(&v) {
            *a += weight * x;
        }
        let max_terms = (lam + 20.0 * lam.sqrt() + 100.0) as usize;
        let mut m = 0usize;
        while cum < 1.0 - 1e-14 {
            m += 1;
            if m > max_terms {
                return Err(Error::StepFailure(format!(
                    "uniformization series not converged after {max_terms} terms"
                )));
            }
            // v ← v(I + G/Λ)
            gen.apply_left(&v, &mut scratch);
            for (vi, si) in v.iter_mut().zip(&scratch) {
                *vi += si / lam_total;
            }
            weight *= lam / m as f64;
            cum += weight;
            for (a, x) in acc.iter_mut().zip(&v) {
                *a += weight * x;
            }
        }
        *dist = acc;
    }
    Ok(())
}

fn marginals_of(dist: &[f64], n: usize) -> DVector<f64> {
    let mut p = DVector::zeros(n);
    for (state, &mass) in dist.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let mut rest = state;
        while rest != 0 {
            let i = rest.trailing_zeros() as usize;
            p[i] += mass;
            rest &= rest - 1;
        }
    }
    p
}

/// Solves the master equation from `initial` (a distribution over the 2^N
/// states) and reports per-node marginals P(X_i = 1) at the sample times.
pub fn transient_marginals(
    gen: &Generator,
    initial: &[f64],
    sample_times: &[f64],
    cap_override: Option<usize>,
) -> Result<Trajectory> {
    check_dense_cap(gen.n_nodes(), cap_override)?;
    if initial.len() != gen.n_states() {
        return Err(Error::DimensionMismatch {
            expected: gen.n_states(),
            got: initial.len(),
        });
    }
    let total: f64 = initial.iter().sum();
    if (total - 1.0).abs() > 1e-12 || initial.iter().any(|&x| !(0.0..=1.0 + 1e-12).contains(&x)) {
        return Err(Error::InvalidProbability(total));
    }
    if sample_times.is_empty() || sample_times[0] < 0.0 {
        return Err(Error::InvalidParameter("bad sample times".into()));
    }
    for w in sample_times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidParameter("sample times not increasing".into()));
        }
    }
    let mut dist = initial.to_vec();
    let mut t = 0.0;
    let mut times = Vec::new();
    let mut states = Vec::new();
    for &ts in sample_times {
        propagate(gen, &mut dist, ts - t)?;
        t = ts;
        let mass: f64 = dist.iter().sum();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::StepFailure(format!(
                "probability mass drifted to {mass} at t={t}"
            )));
        }
        times.push(ts);
        states.push(marginals_of(&dist, gen.n_nodes()));
    }
    Trajectory::new(times, states)
}

/// Distribution over all-state indices with zero mass on the absorbing state.
#[derive(Debug, Clone)]
pub struct QuasiStationary {
    pub distribution: Vec<f64>,
    /// Mean infected fraction under the distribution.
    pub prevalence: f64,
    /// Leading eigenvalue of the restricted generator (negative; its magnitude
    /// is the extinction rate from quasi-stationarity).
    pub decay_rate: f64,
    pub iterations: usize,
}

/// Leading left eigenvector of the generator restricted to non-absorbing
/// states, by power iteration on the uniformized matrix.
pub fn quasi_stationary(gen: &Generator, cap_override: Option<usize>) -> Result<QuasiStationary> {
    check_dense_cap(gen.n_nodes(), cap_override)?;
    let n_states = gen.n_states();
    if n_states < 2 {
        return Err(Error::InvalidSize("no non-absorbing states".into()));
    }
    let lam = gen.max_rate() + 1.0;
    let mut v = vec![1.0 / (n_states - 1) as f64; n_states];
    v[0] = 0.0;
    let mut gv = vec![0.0; n_states];
    let mut iterations = 0usize;
    let max_iter = 5_000_000usize;
    loop {
        iterations += 1;
        if iterations > max_iter {
            return Err(Error::NonConvergence(format!(
                "quasi-stationary power iteration exceeded {max_iter} sweeps"
            )));
        }
        gen.apply_left_restricted(&v, &mut gv);
        let mut next: Vec<f64> = v
            .iter()
            .zip(&gv)
            .map(|(x, g)| (x + g / lam).max(0.0))
            .collect();
        let norm: f64 = next.iter().sum();
        let mut diff: f64 = 0.0;
        for (nx, x) in next.iter_mut().zip(&v) {
            *nx /= norm;
            diff = diff.max((*nx - x).abs());
        }
        v = next;
        if diff <= 1e-14 {
            break;
        }
    }
    // vG evaluated at the converged iterate: its total mass is the decay rate
    gen.apply_left_restricted(&v, &mut gv);
    let decay = gv.iter().sum::<f64>();
    let n = gen.n_nodes();
    let prevalence = v
        .iter()
        .enumerate()
        .map(|(s, &mass)| mass * s.count_ones() as f64)
        .sum::<f64>()
        / n as f64;
    Ok(QuasiStationary {
        distribution: v,
        prevalence,
        decay_rate: decay,
        iterations,
    })
}

/// One statistically exact sample path. Returns the event list
/// [(0, initial), (t_1, state_1), …] truncated at `t_end`; the path is a step
/// function between entries. Fully determined by `seed`.
pub fn gillespie_sample(
    net: &ContactNetwork,
    delta: &CuringVector,
    initial: u64,
    t_end: f64,
    seed: u64,
) -> Result<Vec<(f64, u64)>> {
    let n = net.n_nodes();
    if n > 64 {
        return Err(Error::InvalidSize(format!("gillespie bitmask caps N at 64, got {n}")));
    }
    if delta.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: delta.len(),
        });
    }
    if initial >> n != 0 {
        return Err(Error::InvalidParameter(format!(
            "initial state {initial:#x} has bits beyond node {n}"
        )));
    }
    if !(t_end > 0.0) {
        return Err(Error::InvalidParameter(format!("t_end {t_end}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = vec![(0.0, initial)];
    let mut state = initial;
    let mut t = 0.0;
    let b = net.rates();
    let dv = delta.values();
    let mut rate_buf: Vec<(u64, f64)> = Vec::with_capacity(n);
    loop {
        rate_buf.clear();
        let mut total = 0.0;
        for i in 0..n {
            let bit = 1u64 << i;
            let rate = if state & bit != 0 {
                dv[i]
            } else {
                let mut pressure = 0.0;
                let mut rest = state;
                while rest != 0 {
                    let j = rest.trailing_zeros() as usize;
                    pressure += b[(i, j)];
                    rest &= rest - 1;
                }
                pressure
            };
            if rate > 0.0 {
                rate_buf.push((1u64 << i, rate));
                total += rate;
            }
        }
        if total == 0.0 {
            break; // absorbed (or frozen): no further events ever
        }
        let u: f64 = rng.gen();
        t += -(1.0 - u).ln() / total;
        if t > t_end {
            break;
        }
        let mut x: f64 = rng.gen::<f64>() * total;
        let mut flipped = rate_buf[rate_buf.len() - 1].0;
        for &(bit, rate) in &rate_buf {
            if x < rate {
                flipped = bit;
                break;
            }
            x -= rate;
        }
        state ^= flipped;
        events.push((t, state));
    }
    Ok(events)
}

/// Empirical per-node marginals over `runs` independent sample paths, at the
/// given sample times. Runs use independent deterministic substreams of
/// `seed` and execute in parallel; counts are integers, so the result does not
/// depend on scheduling.
pub fn gillespie_marginals(
    net: &ContactNetwork,
    delta: &CuringVector,
    initial: u64,
    sample_times: &[f64],
    runs: usize,
    seed: u64,
) -> Result<Trajectory> {
    if runs == 0 {
        return Err(Error::InvalidParameter("zero runs".into()));
    }
    if sample_times.is_empty() || sample_times[0] < 0.0 {
        return Err(Error::InvalidParameter("bad sample times".into()));
    }
    for w in sample_times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidParameter("sample times not increasing".into()));
        }
    }
    let n = net.n_nodes();
    let t_end = *sample_times.last().unwrap();
    let counts = (0..runs)
        .into_par_iter()
        .map(|run| -> Result<Vec<u64>> {
            let run_seed = seed.wrapping_add((run as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let events = gillespie_sample(net, delta, initial, t_end, run_seed)?;
            let mut local = vec![0u64; sample_times.len() * n];
            let mut ev = 0usize;
            let mut state = initial;
            for (k, &ts) in sample_times.iter().enumerate() {
                while ev + 1 < events.len() && events[ev + 1].0 <= ts {
                    ev += 1;
                    state = events[ev].1;
                }
                let mut rest = state;
                while rest != 0 {
                    let i = rest.trailing_zeros() as usize;
                    local[k * n + i] += 1;
                    rest &= rest - 1;
                }
            }
            Ok(local)
        })
        .try_reduce(
            || vec![0u64; sample_times.len() * n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                Ok(a)
            },
        )?;
    let states = (0..sample_times.len())
        .map(|k| DVector::from_fn(n, |i, _| counts[k * n + i] as f64 / runs as f64))
        .collect();
    Trajectory::new(sample_times.to_vec(), states)
}
