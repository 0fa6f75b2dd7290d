//! Compare the closed-form availability of a few fragment layouts with a
//! Monte Carlo estimate that simulates component failures directly.

use havnfp::availability::{
    configuration_availability, monte_carlo_availability, monte_carlo_availability_with, AssignmentConfiguration,
    Fragment, WorldSharing,
};
use havnfp::instgen::{generate, GeneratorConfig};
use havnfp::{RequestId, ServerId};

fn main() -> havnfp::Result<()> {
    let inst = generate(&GeneratorConfig::new(40, 2, 2.0, 11))?;
    let r = RequestId(0);
    let n = inst.servers().len();
    let vnf = &inst.vnf_type(inst.request(r).vnf).name;
    println!("{n} servers; request {} uses {vnf}", inst.request(r).name);

    let layouts = [
        ("master only", AssignmentConfiguration::single(Fragment::new(ServerId(0), []))),
        ("one slave", AssignmentConfiguration::single(Fragment::new(ServerId(0), [ServerId(1)]))),
        (
            "all servers",
            AssignmentConfiguration::single(Fragment::new(ServerId(0), (1..n).map(ServerId))),
        ),
        (
            "split in two",
            AssignmentConfiguration::new(vec![
                (Fragment::new(ServerId(0), []), 0.5),
                (Fragment::new(ServerId(n - 1), []), 0.5),
            ])?,
        ),
    ];
    let samples = 2_000_000;
    println!("{:<14} {:>14} {:>14} {:>10} {:>14}", "layout", "closed form", "monte carlo", "z", "shared world");
    for (label, config) in &layouts {
        let exact = configuration_availability(&inst, r, config)?;
        let mc = monte_carlo_availability(&inst, r, config, samples, 1)?;
        let shared = monte_carlo_availability_with(&inst, r, config, samples, 1, WorldSharing::Shared)?;
        let z = if mc.stderr > 0.0 { (mc.estimate - exact) / mc.stderr } else { 0.0 };
        println!("{label:<14} {exact:>14.9} {:>14.9} {z:>10.2} {:>14.9}", mc.estimate, shared.estimate);
    }
    Ok(())
}
