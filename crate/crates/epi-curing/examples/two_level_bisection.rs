//! Anatomy of the two-level optimizer on a two-hub network: the feasible
//! boundary φ(δ0) traced by inner bisection, the corner box that brackets the
//! optimum, and the outer subgradient bisection that lands on the closed-form
//! answer U* = 4βεk√(c0c1) + 2βc0.

use epi_curing::curing::{
    bisection_threshold, closed_form_two_hub, left_corner, optimal_threshold_2d, right_corner,
    TwoLevelInstance,
};
use epi_curing::netmodel::{generate_interconnected_stars, InterconnectedStarsConfig};
use epi_curing::partition::build_quotient;

fn main() -> epi_curing::Result<()> {
    let (k, beta, eps_ratio, c0, c1) = (3usize, 1.0, 0.3, 1.0, 1.0);
    let cfg = InterconnectedStarsConfig {
        m: 2,
        m_prime: 2,
        k,
        p: 1.0,
        beta0: beta,
        beta1: eps_ratio * beta,
        seed: 0,
        rate_jitter: None,
    };
    let (net, pi, kinds) = generate_interconnected_stars(&cfg)?;
    let q = build_quotient(&net, &pi, None, 1e-9)?;
    let inst = TwoLevelInstance::from_quotient(&q, &kinds, c0, c1)?;
    println!(
        "two hubs + {k} leaves each: l_max = {}, budget cap U_lmax = {}",
        inst.l_max(),
        inst.u_lmax()
    );

    let eps = 1e-9 * inst.l_max();
    let (lo0, hi1) = left_corner(&inst, eps)?;
    let (hi0, lo1) = right_corner(&inst, eps)?;
    println!("corner box: delta0 in [{lo0:.4}, {hi0:.4}], delta1 in [{lo1:.4}, {hi1:.4}]");

    println!("boundary phi(delta0) and restricted cost along it:");
    for g in 0..=8 {
        let d0 = lo0 + (hi0 - lo0) * g as f64 / 8.0;
        let d1 = bisection_threshold(&inst, d0, eps)?;
        println!("  delta0 = {d0:.4}  phi = {d1:.4}  U = {:.4}", inst.budget(d0, d1));
    }

    let sol = optimal_threshold_2d(&inst, None)?;
    let (d0, d1) = sol.two_level.unwrap();
    let cf = closed_form_two_hub(k, beta, eps_ratio, c0, c1)?;
    println!(
        "optimum: delta0 = {d0:.6}, delta1 = {d1:.6}, U = {:.6} (closed form {:.6})",
        sol.cost, cf.u_star
    );
    println!(
        "certificate: lambda1 = {:+.2e}, negative semidefinite: {}",
        sol.certificate.lambda_max, sol.certificate.negative_semidefinite
    );
    Ok(())
}
