//! Seeded random instances in the style of the experimental datasets.
//!
//! Three independent random streams are drawn from the seed: one for the
//! request set and link/VNF/cluster availabilities, one for the server
//! sequence, one for access point choices. The server sequence is consumed
//! until capacity covers the scaled demand, so instances that differ only in
//! multiplier share every server of the smaller one, and instances that
//! differ only in access points per request have nested access point sets.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AccessPointId, ClusterId, InstanceBuilder, ProblemInstance, VnfTypeId};

pub const DEFAULT_PALETTE: [f64; 4] = [0.9995, 0.9999, 0.99995, 0.99999];

/// Multipliers 1.00, 1.25, ..., 3.00.
pub fn default_multipliers() -> Vec<f64> {
    (0..=8).map(|i| 1.0 + 0.25 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub requests: usize,
    pub aps_per_request: usize,
    pub vnf_types: usize,
    pub clusters: usize,
    pub access_points: usize,
    /// Inclusive integer range.
    pub demand_range: (u32, u32),
    /// Inclusive integer range.
    pub capacity_range: (u32, u32),
    pub palette: Vec<f64>,
    pub capacity_multiplier: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            requests: 50,
            aps_per_request: 1,
            vnf_types: 5,
            clusters: 3,
            access_points: 3,
            demand_range: (1, 10),
            capacity_range: (75, 125),
            palette: DEFAULT_PALETTE.to_vec(),
            capacity_multiplier: 1.0,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn new(requests: usize, aps_per_request: usize, capacity_multiplier: f64, seed: u64) -> Self {
        GeneratorConfig {
            requests,
            aps_per_request,
            capacity_multiplier,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::input(format!("generator: {m}")));
        if self.vnf_types == 0 || self.clusters == 0 || self.access_points == 0 {
            return fail("vnf types, clusters and access points must be positive");
        }
        if self.aps_per_request == 0 || self.aps_per_request > self.access_points {
            return fail("access points per request must be in 1..=access points");
        }
        let (dl, dh) = self.demand_range;
        let (ql, qh) = self.capacity_range;
        if dl == 0 || dl > dh || ql == 0 || ql > qh {
            return fail("ranges must be positive and ordered");
        }
        if self.palette.is_empty() || self.palette.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return fail("palette must be non-empty with values in (0, 1]");
        }
        if !(self.capacity_multiplier >= 1.0 && self.capacity_multiplier.is_finite()) {
            return fail("capacity multiplier must be at least 1");
        }
        Ok(())
    }
}

fn pick(rng: &mut ChaCha8Rng, palette: &[f64]) -> f64 {
    palette[rng.random_range(0..palette.len())]
}

pub fn generate(config: &GeneratorConfig) -> Result<ProblemInstance> {
    config.validate()?;
    let stream = |n: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(n);
        rng
    };
    let mut base = stream(0);
    let mut server_rng = stream(1);
    let mut ap_rng = stream(2);
    let palette = &config.palette;

    let mut b = InstanceBuilder::new();
    let clusters: Vec<ClusterId> = (0..config.clusters)
        .map(|i| b.cluster(format!("c{i}"), pick(&mut base, palette)))
        .collect();
    let vnfs: Vec<VnfTypeId> = (0..config.vnf_types)
        .map(|i| b.vnf(format!("f{i}"), pick(&mut base, palette)))
        .collect();
    let points: Vec<AccessPointId> = (0..config.access_points)
        .map(|i| b.access_point(format!("p{i}")))
        .collect();
    for &c in &clusters {
        for &p in &points {
            b.access_link(c, p, pick(&mut base, palette));
        }
    }
    for (i, &a) in clusters.iter().enumerate() {
        for &c in &clusters[i + 1..] {
            b.sync_link(a, c, pick(&mut base, palette));
        }
    }

    let mut total_demand = 0u64;
    for i in 0..config.requests {
        let vnf = vnfs[base.random_range(0..vnfs.len())];
        let demand = base.random_range(config.demand_range.0..=config.demand_range.1);
        total_demand += u64::from(demand);
        let mut order = points.clone();
        order.shuffle(&mut ap_rng);
        b.request(format!("r{i:04}"), vnf, &order[..config.aps_per_request], f64::from(demand));
    }

    let mut cluster_order = clusters.clone();
    cluster_order.shuffle(&mut server_rng);
    let target = config.capacity_multiplier * total_demand as f64;
    let mut capacity = 0u64;
    let mut n = 0;
    while n == 0 || (capacity as f64) < target {
        let q = server_rng.random_range(config.capacity_range.0..=config.capacity_range.1);
        let a = pick(&mut server_rng, palette);
        b.server(format!("s{n:04}"), cluster_order[n % cluster_order.len()], f64::from(q), a);
        capacity += u64::from(q);
        n += 1;
    }
    b.build()
}

/// One instance per multiplier, all sharing the request set and the leading
/// servers.
pub fn sweep(config: &GeneratorConfig, multipliers: &[f64]) -> Result<Vec<ProblemInstance>> {
    multipliers
        .iter()
        .map(|&m| {
            generate(&GeneratorConfig {
                capacity_multiplier: m,
                ..config.clone()
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::save_instance;

    #[test]
    fn server_counts_match_scale() {
        let mean = |requests: usize| {
            let total: usize = (0..30)
                .map(|seed| generate(&GeneratorConfig::new(requests, 1, 1.0, seed)).unwrap().servers().len())
                .sum();
            total as f64 / 30.0
        };
        let small = mean(50);
        let large = mean(500);
        assert!((2.5..=4.0).contains(&small), "{small}");
        assert!((26.0..=30.0).contains(&large), "{large}");
    }

    #[test]
    fn same_seed_same_instance() {
        let c = GeneratorConfig::new(40, 2, 1.5, 7);
        assert_eq!(save_instance(&generate(&c).unwrap()), save_instance(&generate(&c).unwrap()));
        let other = GeneratorConfig { seed: 8, ..c.clone() };
        assert_ne!(save_instance(&generate(&c).unwrap()), save_instance(&generate(&other).unwrap()));
    }

    #[test]
    fn sweep_shares_requests_and_servers() {
        let c = GeneratorConfig::new(50, 2, 1.0, 3);
        let ms = default_multipliers();
        assert_eq!(ms.len(), 9);
        let insts = sweep(&c, &ms).unwrap();
        for (inst, &m) in insts.iter().zip(&ms) {
            assert_eq!(inst.requests(), insts[0].requests());
            assert!(inst.total_capacity() >= m * inst.total_demand());
        }
        for w in insts.windows(2) {
            assert_eq!(&w[1].servers()[..w[0].servers().len()], w[0].servers());
        }
    }

    #[test]
    fn access_point_sets_nest() {
        let sets: Vec<ProblemInstance> =
            (1..=3).map(|k| generate(&GeneratorConfig::new(20, k, 1.0, 5)).unwrap()).collect();
        for r in sets[0].request_ids() {
            for k in 0..2 {
                let small = &sets[k].request(r).access_points;
                let big = &sets[k + 1].request(r).access_points;
                assert!(small.iter().all(|p| big.contains(p)));
                assert_eq!(big.len(), k + 2);
            }
        }
    }

    #[test]
    fn bad_configs_rejected() {
        let ok = GeneratorConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            GeneratorConfig { aps_per_request: 4, ..ok.clone() },
            GeneratorConfig { capacity_multiplier: 0.5, ..ok.clone() },
            GeneratorConfig { demand_range: (5, 2), ..ok.clone() },
            GeneratorConfig { palette: vec![], ..ok.clone() },
        ] {
            assert!(generate(&bad).is_err());
        }
    }
}
