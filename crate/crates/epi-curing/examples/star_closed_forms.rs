//! Solver vs closed form on the star family: hub with k leaves, every edge at
//! rate β. The optimum is δ0 = βk√(c1/c0), δ1 = β√(c0/c1) with total cost
//! U* = 2βk√(c0c1), while the best uniform policy pays β√k(c0 + c1 k) — the
//! savings ratio grows like √k/2.

use epi_curing::curing::{closed_form_star, optimal_threshold_2d, TwoLevelInstance};
use epi_curing::netmodel::generate_star;
use epi_curing::partition::build_quotient;

fn main() -> epi_curing::Result<()> {
    let (beta, c0, c1) = (1.0, 1.0, 1.0);
    println!("{:>5} {:>10} {:>10} {:>12} {:>12} {:>9}", "k", "delta0", "delta1", "U*", "U_uniform", "ratio");
    for k in [2usize, 5, 10, 50, 100, 500] {
        let (net, pi) = generate_star(k, beta)?;
        let q = build_quotient(&net, &pi, None, 1e-9)?;
        let inst =
            TwoLevelInstance::new(q.q_t.clone(), q.sizes.clone(), vec![0], vec![1], c0, c1)?;
        let sol = optimal_threshold_2d(&inst, None)?;
        let cf = closed_form_star(k, beta, c0, c1)?;
        let (d0, d1) = sol.two_level.unwrap();
        println!(
            "{k:>5} {d0:>10.4} {d1:>10.4} {:>12.4} {:>12.4} {:>9.4}",
            sol.cost,
            cf.u_uniform,
            cf.u_uniform / sol.cost
        );
        assert!((sol.cost - cf.u_star).abs() <= 1e-6 * cf.u_star);
        assert!(
            sol.certificate.negative_semidefinite,
            "optimum must sit on the feasible side of the boundary"
        );
    }
    Ok(())
}
