//! Per-community descent vs the 2D two-level solver. On symmetric
//! interconnected stars (complete core, one leaf community per hub) every
//! hub is equivalent, so the n-dimensional optimum collapses to two levels
//! and both solvers must agree; with per-community costs broken by hand the
//! general solver finds strictly cheaper allocations.

use epi_curing::curing::{
    optimal_threshold_2d, optimize_general, CostModel, Effort, GeneralOptions, TwoLevelInstance,
};
use epi_curing::netmodel::{generate_interconnected_stars, CommunityKind, InterconnectedStarsConfig};
use epi_curing::partition::build_quotient;
use nalgebra::DVector;

fn main() -> epi_curing::Result<()> {
    let cfg = InterconnectedStarsConfig {
        m: 5,
        m_prime: 5,
        k: 6,
        p: 1.0,
        beta0: 1.0,
        beta1: 0.3,
        seed: 0,
        rate_jitter: None,
    };
    let (net, pi, kinds) = generate_interconnected_stars(&cfg)?;
    let q = build_quotient(&net, &pi, None, 1e-9)?;

    let costs = DVector::from_iterator(
        q.n,
        kinds.iter().map(|k| match k {
            CommunityKind::Central => 1.0,
            CommunityKind::Terminal => 1.0,
        }),
    );
    let cost = CostModel::new(costs, Effort::Linear)?;
    let inst = TwoLevelInstance::from_quotient(&q, &kinds, 1.0, 1.0)?;
    let sol2 = optimal_threshold_2d(&inst, None)?;
    let solg = optimize_general(&q, &cost, &GeneralOptions::default())?;
    println!("symmetric instance: U_2d = {:.6}, U_general = {:.6}", sol2.cost, solg.cost);
    assert!((solg.cost - sol2.cost).abs() <= 1e-4 * sol2.cost);

    // now make one hub community five times cheaper to cure
    let mut costs = DVector::from_element(q.n, 1.0);
    costs[0] = 0.2;
    let cost = CostModel::new(costs, Effort::Linear)?;
    let solg = optimize_general(&q, &cost, &GeneralOptions::default())?;
    println!(
        "cheap hub 0: U_general = {:.6} (rate on hub 0: {:.4}, on other hubs: {:.4})",
        solg.cost, solg.rates[0], solg.rates[1]
    );
    assert!(solg.cost < sol2.cost);
    assert!(solg.rates[0] > solg.rates[1], "cheap community should absorb more curing");
    Ok(())
}
