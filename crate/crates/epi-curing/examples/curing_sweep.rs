//! Savings of targeted over uniform curing as communities grow: sweep k on
//! interconnected stars (m = m' = 50, ER core), emit the sweep CSV, and print
//! the ratio curve. The ratio U_uniform/U* grows like √k on the pure star;
//! the ER core adds a k-independent cost floor that tempers the growth.

use epi_curing::curing::{
    optimal_threshold_2d, uniform_policy, write_sweep_csv, CostModel, Effort, SweepRecord,
    TwoLevelInstance,
};
use epi_curing::netmodel::{generate_interconnected_stars, CommunityKind, InterconnectedStarsConfig};
use epi_curing::partition::build_quotient;
use nalgebra::DVector;

fn main() -> epi_curing::Result<()> {
    let mut rows = Vec::new();
    for k in [5usize, 10, 25, 50, 100] {
        let cfg = InterconnectedStarsConfig {
            m: 50,
            m_prime: 50,
            k,
            p: 0.3,
            beta0: 1.0,
            beta1: 0.3,
            seed: 30,
            rate_jitter: None,
        };
        let (net, pi, kinds) = generate_interconnected_stars(&cfg)?;
        let q = build_quotient(&net, &pi, None, 1e-9)?;
        let inst = TwoLevelInstance::from_quotient(&q, &kinds, 1.0, 1.0)?;
        let sol = optimal_threshold_2d(&inst, None)?;
        let costs = DVector::from_iterator(
            q.n,
            kinds.iter().map(|c| match c {
                CommunityKind::Central => 1.0,
                CommunityKind::Terminal => 1.0,
            }),
        );
        let uni = uniform_policy(&q, &CostModel::new(costs, Effort::Linear)?)?;
        let (d0, d1) = sol.two_level.unwrap();
        rows.push(SweepRecord {
            k: k as f64,
            u_star: sol.cost,
            u_uniform: uni.cost,
            ratio: uni.cost / sol.cost,
            delta0: d0,
            delta1: d1,
        });
        eprintln!("k = {k:>3}: U* = {:>9.2}, U_u = {:>9.2}, ratio = {:.3}", sol.cost, uni.cost, uni.cost / sol.cost);
    }
    write_sweep_csv(std::io::stdout().lock(), &rows)?;
    Ok(())
}
