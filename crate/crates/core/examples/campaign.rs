//! A small experiment campaign: every algorithm over a grid of generated
//! instances, written as CSV rows plus group means.

use havnfp::harness::{dominance_violations, run_campaign, rows_to_csv, summarize, summary_to_csv, CampaignAlgorithm, CampaignSpec};

fn main() -> havnfp::Result<()> {
    let spec = CampaignSpec {
        request_counts: vec![20, 40],
        ap_counts: vec![1, 3],
        multipliers: vec![1.0, 1.5, 2.0],
        replications: 3,
        algorithms: vec![
            CampaignAlgorithm::GreedyBestFit,
            CampaignAlgorithm::GreedyFirstFit,
            CampaignAlgorithm::GreedyBestAvailability,
            CampaignAlgorithm::NextFit,
            CampaignAlgorithm::Vns,
        ],
        base_seed: 2024,
        ..CampaignSpec::default()
    };
    let rows = run_campaign(&spec)?;
    let csv = rows_to_csv(&rows)?;
    println!("{} rows; first lines:", rows.len());
    for line in csv.lines().take(6) {
        println!("  {line}");
    }
    println!("\n{}", summary_to_csv(&summarize(&rows))?);
    println!("rows where vns lost to a greedy: {}", dominance_violations(&rows).len());
    Ok(())
}
