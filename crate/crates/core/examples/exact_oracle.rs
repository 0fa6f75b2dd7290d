//! On tiny instances the exhaustive solver gives the true optimum, which
//! bounds every heuristic from above.

use std::sync::Arc;

use havnfp::exact::{exact_solve, ExactConfig};
use havnfp::greedy::{greedy, Policy};
use havnfp::instgen::{generate, GeneratorConfig};
use havnfp::vns::{vns, VnsConfig};

fn main() -> havnfp::Result<()> {
    let mut config = GeneratorConfig::new(5, 2, 1.5, 0);
    config.capacity_range = (10, 20);
    println!("{:>4} {:>8} {:>14} {:>14} {:>14} {:>8}", "seed", "servers", "exact", "vns", "best greedy", "nodes");
    for seed in 0..8 {
        config.seed = seed;
        let inst = Arc::new(generate(&config)?);
        let exact = match exact_solve(inst.clone(), &ExactConfig::default()) {
            Ok(out) => out,
            Err(e) => {
                println!("{seed:>4} {e}");
                continue;
            }
        };
        let heuristic = vns(inst.clone(), &VnsConfig { parallel: false, ..VnsConfig::default() })?;
        let best_greedy = Policy::ALL
            .iter()
            .filter_map(|&p| greedy(inst.clone(), p, false).ok())
            .map(|p| p.evaluate().map(|r| r.objective))
            .collect::<havnfp::Result<Vec<_>>>()?
            .into_iter()
            .fold(f64::NAN, f64::max);
        println!(
            "{seed:>4} {:>8} {:>14.11} {:>14.11} {:>14.11} {:>8}",
            inst.servers().len(),
            exact.report.objective,
            heuristic.report.objective,
            best_greedy,
            exact.nodes
        );
        assert!(exact.report.objective >= heuristic.report.objective);
    }
    Ok(())
}
