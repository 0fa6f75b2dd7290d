use std::sync::Arc;

use havnfp::availability::{configuration_availability, fragment_availability, AssignmentConfiguration, Fragment};
use havnfp::greedy::{add_slaves, greedy, next_fit_split, Policy, SplitMode};
use havnfp::instgen::{generate, sweep, GeneratorConfig, DEFAULT_PALETTE};
use havnfp::model::{load_instance, save_instance};
use havnfp::placement::{check_constraints, InstanceRef, MasterKey};
use havnfp::vns::{vns, VnsConfig};
use havnfp::{Placement, ProblemInstance, RequestId, ServerId, EPS_CAP};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(requests: usize, aps: usize, multiplier: f64, seed: u64) -> Arc<ProblemInstance> {
    Arc::new(generate(&GeneratorConfig::new(requests, aps, multiplier, seed)).unwrap())
}

/// Applies random mutations, ignoring rejections.
fn scramble(inst: &Arc<ProblemInstance>, seed: u64, steps: usize) -> Placement {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = Placement::new(inst.clone());
    let n = inst.servers().len();
    let m = inst.requests().len();
    let server = |rng: &mut ChaCha8Rng| ServerId(rng.random_range(0..n));
    for _ in 0..steps {
        let r = RequestId(rng.random_range(0..m));
        match rng.random_range(0..7) {
            0 | 1 => {
                let x = rng.random_range(0.05..=1.0);
                let _ = p.assign_fraction(r, server(&mut rng), x);
            }
            2 => {
                let masters: Vec<MasterKey> = p.masters().collect();
                if !masters.is_empty() {
                    let _ = p.add_slave(masters[rng.random_range(0..masters.len())], server(&mut rng));
                }
            }
            3 => {
                if let Some(&(s, _)) = p.fragments(r).first() {
                    let _ = p.move_fragment(r, s, server(&mut rng));
                }
            }
            4 => {
                let other = RequestId(rng.random_range(0..m));
                if let (Some(&(a, _)), Some(&(b, _))) = (p.fragments(r).first(), p.fragments(other).first()) {
                    let _ = p.swap_fragments(r, a, other, b);
                }
            }
            5 => {
                let masters: Vec<MasterKey> = p.masters().collect();
                if masters.len() >= 2 {
                    let a = InstanceRef::Master(masters[rng.random_range(0..masters.len())]);
                    let b = InstanceRef::Master(masters[rng.random_range(0..masters.len())]);
                    let target = rng.random_bool(0.5).then_some(b);
                    let _ = p.swap_instances(a, target, server(&mut rng));
                }
            }
            _ => {
                if let Some(&(s, _)) = p.fragments(r).first() {
                    let _ = p.remove_fragment(r, s);
                }
            }
        }
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ledgers_match_recomputation(seed in any::<u64>(), steps in 1usize..80) {
        let inst = instance(12, 2, 1.5, seed);
        let p = scramble(&inst, seed, steps);
        let mut used = vec![0.0; inst.servers().len()];
        for (key, reserved) in p.master_ledger() {
            let load: f64 = p.master_load(key).iter().map(|&(r, x)| inst.request(r).demand * x).sum();
            prop_assert!((load - reserved).abs() <= EPS_CAP);
            used[key.server.0] += reserved;
        }
        for (key, server, reserved) in p.slave_ledger() {
            prop_assert!(reserved + EPS_CAP >= p.master_reserved(key).unwrap());
            used[server.0] += reserved;
        }
        for s in inst.server_ids() {
            prop_assert!((used[s.0] - p.used(s)).abs() <= EPS_CAP);
            prop_assert!(p.residual(s) >= -EPS_CAP);
        }
        let v = check_constraints(&p);
        prop_assert!(v.iter().all(|c| c.constraint == havnfp::placement::Constraint::Assignment), "{:?}", v);
    }

    #[test]
    fn rejected_moves_leave_no_trace(seed in any::<u64>(), steps in 1usize..40) {
        let inst = instance(10, 1, 1.0, seed);
        let p = scramble(&inst, seed, steps);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        for _ in 0..30 {
            let mut q = p.clone();
            let r = RequestId(rng.random_range(0..inst.requests().len()));
            let t = ServerId(rng.random_range(0..inst.servers().len()));
            let result = match p.fragments(r).first() {
                Some(&(s, _)) => q.move_fragment(r, s, t),
                None => q.assign_fraction(r, t, 1.0 - p.assigned_fraction(r) + 0.5),
            };
            if result.is_err() {
                prop_assert_eq!(&q, &p);
            }
        }
    }

    #[test]
    fn protection_never_hurts(seed in any::<u64>()) {
        let inst = instance(6, 3, 2.0, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = inst.servers().len();
        let r = RequestId(rng.random_range(0..inst.requests().len()));
        let master = ServerId(rng.random_range(0..n));
        let mut slaves = Vec::new();
        let mut last = fragment_availability(&inst, r, &Fragment::new(master, [])).unwrap();
        prop_assert!((0.0..=1.0).contains(&last));
        for s in inst.server_ids().filter(|&s| s != master) {
            slaves.push(s);
            let a = fragment_availability(&inst, r, &Fragment::new(master, slaves.clone())).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(a >= last - 1e-15);
            last = a;
        }
    }

    #[test]
    fn splitting_never_helps(seed in any::<u64>()) {
        let inst = instance(40, 2, 2.0, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = RequestId(0);
        let servers: Vec<ServerId> = inst.server_ids().collect();
        let a = servers[rng.random_range(0..servers.len())];
        let b = *servers.iter().find(|&&s| s != a).unwrap();
        let fa = Fragment::new(a, []);
        let fb = Fragment::new(b, []);
        let whole = configuration_availability(&inst, r, &AssignmentConfiguration::single(fa.clone())).unwrap();
        let split = AssignmentConfiguration::new(vec![(fa, 0.5), (fb, 0.5)]).unwrap();
        prop_assert!(configuration_availability(&inst, r, &split).unwrap() <= whole);
    }

    #[test]
    fn generated_instances_are_well_formed(
        requests in 0usize..120,
        aps in 1usize..=3,
        multiplier in 1.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let inst = instance(requests, aps, multiplier, seed);
        prop_assert!(inst.total_demand() <= inst.total_capacity());
        prop_assert!(inst.total_capacity() >= multiplier * inst.total_demand());
        let sizes: Vec<usize> = inst.clusters().iter().enumerate()
            .map(|(c, _)| inst.servers_in(havnfp::ClusterId(c)).len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let in_palette = |a: f64| DEFAULT_PALETTE.contains(&a);
        prop_assert!(inst.clusters().iter().all(|c| in_palette(c.availability)));
        prop_assert!(inst.servers().iter().all(|s| in_palette(s.availability)));
        prop_assert!(inst.vnf_types().iter().all(|f| in_palette(f.availability)));
        prop_assert!(inst.links().access_links().all(|(_, _, a)| in_palette(a)));
        prop_assert!(inst.links().sync_links().all(|(_, _, a)| in_palette(a)));
        prop_assert!(inst.requests().iter().all(|r| r.access_points.len() == aps));
        prop_assert!(inst.requests().iter().all(|r| r.demand.fract() == 0.0 && (1.0..=10.0).contains(&r.demand)));
        prop_assert!(inst.servers().iter().all(|s| (75.0..=125.0).contains(&s.capacity)));
        let again = load_instance(&save_instance(&inst)).unwrap();
        prop_assert_eq!(&again, &*inst);
    }

    #[test]
    fn sweeps_scale_by_adding_servers(seed in any::<u64>()) {
        let config = GeneratorConfig::new(40, 2, 1.0, seed);
        let insts = sweep(&config, &[1.0, 2.0, 3.0]).unwrap();
        prop_assert!(insts[1].total_capacity() >= 2.0 * insts[1].total_demand());
        prop_assert!(insts[0].servers().len() <= insts[1].servers().len());
        prop_assert_eq!(insts[0].requests(), insts[2].requests());
    }

    #[test]
    fn split_constructions_are_feasible(requests in 1usize..60, aps in 1usize..=3, seed in any::<u64>()) {
        let inst = instance(requests, aps, 1.0, seed);
        let nf = next_fit_split(inst.clone()).unwrap();
        prop_assert!(check_constraints(&nf).is_empty());
        for policy in Policy::ALL {
            let p = greedy(inst.clone(), policy, true).unwrap();
            prop_assert!(check_constraints(&p).is_empty());
        }
    }

    #[test]
    fn vns_dominates_its_starts(requests in 1usize..25, aps in 1usize..=3, multiplier in 1.0f64..2.5, seed in any::<u64>()) {
        let inst = instance(requests, aps, multiplier, seed);
        let config = VnsConfig { parallel: false, seed, ..VnsConfig::default() };
        let out = vns(inst.clone(), &config).unwrap();
        prop_assert!(check_constraints(&out.placement).is_empty());
        for s in &out.starts {
            prop_assert!(out.report.objective >= s.initial.objective);
        }
        let again = vns(inst, &config).unwrap();
        prop_assert_eq!(again.report.objective, out.report.objective);
        prop_assert_eq!(again.placement, out.placement);
        let strip = |t: &[havnfp::vns::TraceRecord]| t.iter().map(|r| (r.start.clone(), r.operator, r.objective)).collect::<Vec<_>>();
        prop_assert_eq!(strip(&again.trace), strip(&out.trace));
    }

    #[test]
    fn accepted_moves_never_regress(requests in 5usize..30, seed in any::<u64>()) {
        let inst = instance(requests, 1, 1.25, seed);
        let out = vns(inst, &VnsConfig { parallel: false, ..VnsConfig::default() }).unwrap();
        for start in &out.starts {
            let records: Vec<_> = out.trace.iter().filter(|r| r.start == start.label).collect();
            let mut prev = (start.initial.objective, start.initial.worst_requests.len());
            for r in records {
                prop_assert!(
                    r.objective > prev.0 + havnfp::EPS_AVAIL
                        || ((r.objective - prev.0).abs() <= havnfp::EPS_AVAIL && r.worst_count < prev.1)
                );
                prev = (r.objective, r.worst_count);
            }
        }
    }

    #[test]
    fn export_round_trips(seed in any::<u64>(), steps in 1usize..60) {
        let inst = instance(10, 2, 2.0, seed);
        let mut p = scramble(&inst, seed, steps);
        add_slaves(&mut p, Policy::BestFit);
        let back = Placement::import(inst.clone(), &p.export()).unwrap();
        prop_assert_eq!(back.fragments(RequestId(0)), p.fragments(RequestId(0)));
        prop_assert_eq!(back.export(), p.export());
    }
}

#[test]
fn split_off_vns_fails_only_when_every_greedy_does() {
    for seed in 0..40 {
        let inst = instance(30, 1, 1.0, seed);
        let any_greedy = Policy::ALL.iter().any(|&p| greedy(inst.clone(), p, false).is_ok());
        let config = VnsConfig {
            split: SplitMode::Off,
            parallel: false,
            ..VnsConfig::default()
        };
        assert_eq!(vns(inst, &config).is_ok(), any_greedy, "seed {seed}");
    }
}
