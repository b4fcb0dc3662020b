//! The sharp SIS threshold: with r = r(W − diag δ) the epidemic dies out for
//! r < 0 and settles into a unique positive endemic state for r > 0.

use epi_curing::netmodel::{generate_bipartite, CuringVector};
use epi_curing::nimfa::{
    integrate_full, steady_state_full, threshold, uniform_times, IntegrateOptions,
    SteadyStateMode, SteadyStateOptions,
};
use nalgebra::DVector;

fn main() -> epi_curing::Result<()> {
    let (net, _) = generate_bipartite(4, 9, 1.0)?;
    let n = net.n_nodes();
    // lambda1 = sqrt(36) = 6
    for d in [7.0f64, 3.0] {
        let delta = CuringVector::uniform(n, d)?;
        let rep = threshold(net.rates(), delta.values())?;
        println!(
            "delta = {d}: r = {:+.4} -> {}",
            rep.modulus,
            if rep.supercritical { "supercritical" } else { "subcritical" }
        );
        let p0 = DVector::from_element(n, 0.5);
        let times = uniform_times(40.0, 8);
        let traj = integrate_full(&net, &delta, &p0, &times, &IntegrateOptions::default())?;
        for (t, p) in traj.times().iter().zip(traj.states()) {
            println!("  t = {t:>5.1}: prevalence {:.6e}", p.mean());
        }
        if rep.supercritical {
            let ss = steady_state_full(
                &net,
                &delta,
                SteadyStateMode::Auto,
                &SteadyStateOptions::default(),
            )?;
            println!(
                "  endemic steady state (residual {:.1e}): side A {:.6}, side B {:.6}",
                ss.residual, ss.vector[0], ss.vector[n - 1]
            );
        }
    }
    Ok(())
}
