//! When capacity is exactly enough, unsplit placement can fail while
//! splitting requests across servers always succeeds.

use std::sync::Arc;

use havnfp::greedy::{greedy, next_fit_split, Policy};
use havnfp::model::InstanceBuilder;
use havnfp::placement::check_constraints;

fn main() -> havnfp::Result<()> {
    let mut b = InstanceBuilder::new();
    let c = b.cluster("c", 0.9999);
    for name in ["s1", "s2", "s3"] {
        b.server(name, c, 10.0, 0.999);
    }
    let f = b.vnf("f", 0.9999);
    let p = b.access_point("p");
    b.access_link(c, p, 0.9999);
    for (i, d) in [6.0, 6.0, 6.0, 6.0, 6.0].iter().enumerate() {
        b.request(format!("r{i}"), f, &[p], *d);
    }
    let inst = Arc::new(b.build()?);
    println!("demand {} on capacity {}", inst.total_demand(), inst.total_capacity());

    for policy in Policy::ALL {
        match greedy(inst.clone(), policy, false) {
            Ok(_) => println!("{policy:>9} unsplit: feasible"),
            Err(e) => println!("{policy:>9} unsplit: {e}"),
        }
    }
    for (label, placement) in [
        ("next fit", next_fit_split(inst.clone())?),
        ("bestfit split", greedy(inst.clone(), Policy::BestFit, true)?),
    ] {
        assert!(check_constraints(&placement).is_empty());
        let report = placement.evaluate()?;
        println!("\n{label}: {} split requests, A_min {:.9}", report.splits, report.objective);
        for r in inst.request_ids() {
            let parts: Vec<String> = placement
                .fragments(r)
                .iter()
                .map(|&(s, x)| format!("{}x{:.2}", inst.server(s).name, x))
                .collect();
            println!("  {} -> {}", inst.request(r).name, parts.join(" + "));
        }
    }
    Ok(())
}
