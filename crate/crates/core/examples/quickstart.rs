//! Build a two-cluster instance by hand, place it greedily, improve it with
//! VNS and print where every request ended up.

use std::sync::Arc;

use havnfp::greedy::{greedy, Policy};
use havnfp::model::{save_instance, InstanceBuilder};
use havnfp::vns::{vns, VnsConfig};

fn main() -> havnfp::Result<()> {
    let mut b = InstanceBuilder::new();
    let east = b.cluster("east", 0.9999);
    let west = b.cluster("west", 0.9995);
    for (name, cluster, avail) in [("e1", east, 0.999), ("e2", east, 0.995), ("w1", west, 0.9995), ("w2", west, 0.99)] {
        b.server(name, cluster, 20.0, avail);
    }
    let fw = b.vnf("firewall", 0.9999);
    let nat = b.vnf("nat", 0.999);
    let city = b.access_point("city");
    let campus = b.access_point("campus");
    b.access_link(east, city, 0.9999);
    b.access_link(west, city, 0.999);
    b.access_link(west, campus, 0.9999);
    b.sync_link(east, west, 0.9995);
    b.request("web", fw, &[city], 6.0);
    b.request("vpn", fw, &[city, campus], 4.0);
    b.request("lab", nat, &[campus], 8.0);
    b.request("guest", nat, &[city], 5.0);
    let inst = Arc::new(b.build()?);

    let start = greedy(inst.clone(), Policy::BestFit, false)?;
    let improved = vns(inst.clone(), &VnsConfig::default())?;
    println!("greedy bestfit  A_min = {:.9}", start.evaluate()?.objective);
    println!("vns             A_min = {:.9}", improved.report.objective);

    let p = &improved.placement;
    for r in inst.request_ids() {
        let req = inst.request(r);
        for &(s, fraction) in p.fragments(r) {
            let key = havnfp::placement::MasterKey::new(s, req.vnf);
            let names: Vec<&str> = p.protection(key).iter().map(|&x| inst.server(x).name.as_str()).collect();
            println!(
                "{:>6}: {:.0}% on {} protected by {:?}  availability {:.9}",
                req.name,
                fraction * 100.0,
                inst.server(s).name,
                names,
                improved.report.per_request[r.0]
            );
        }
    }
    println!("\ninstance document:\n{}", save_instance(&inst));
    Ok(())
}
