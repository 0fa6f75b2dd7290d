//! Sweep the capacity multiplier on one instance and watch the minimum
//! availability of each algorithm rise as room for slaves appears.

use std::sync::Arc;
use std::time::Duration;

use havnfp::greedy::{GreedyOptions, Policy};
use havnfp::instgen::{default_multipliers, sweep, GeneratorConfig};
use havnfp::solve::{solve, Algorithm};
use havnfp::vns::VnsConfig;

fn main() -> havnfp::Result<()> {
    let requests = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(60);
    let multipliers = default_multipliers();
    let instances = sweep(&GeneratorConfig::new(requests, 2, 1.0, 42), &multipliers)?;
    let algorithms: Vec<Algorithm> = Policy::ALL
        .iter()
        .map(|&p| Algorithm::Greedy(GreedyOptions::new(p)))
        .chain([Algorithm::Vns(VnsConfig {
            per_start_time_limit: Some(Duration::from_secs(2)),
            ..VnsConfig::default()
        })])
        .collect();

    print!("{:>5} {:>7}", "mult", "servers");
    for a in &algorithms {
        print!(" {:>18}", a.label());
    }
    println!();
    for (m, inst) in multipliers.iter().zip(instances) {
        let inst = Arc::new(inst);
        print!("{m:>5.2} {:>7}", inst.servers().len());
        for a in &algorithms {
            let s = solve(inst.clone(), a)?;
            print!(" {:>18.12}", s.report.objective);
        }
        println!();
    }
    Ok(())
}
