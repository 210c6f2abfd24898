//! A seeded Monte Carlo study: per-branch decision frequencies, conditional
//! coverage and width ratios, written as CSV.

use enrich_ci::designs::{DecisionRule, RuleKind, TrialDesign};
use enrich_ci::intervals::Method;
use enrich_ci::sim::{self, Scenario};

fn main() -> enrich_ci::Result<()> {
    let replicates = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5_000);
    let design = TrialDesign::new(vec![0.5, 0.5], 244, 244, 8.0, 0.05)?;
    let scenario = Scenario::new(
        design,
        DecisionRule::new(RuleKind::D1 { z_star: 1.0 }, false),
        vec![0.0, 0.0],
        replicates,
        7,
        Method::ALL.to_vec(),
    )?;
    let result = sim::run_scenario(&scenario)?;
    print!("{}", result.to_csv());

    let full = result.branch("full").expect("full population continued at least once");
    let naive = full.method(Method::Naive).unwrap();
    eprintln!(
        "naive coverage after continuing in the full population: {:.4} ± {:.4}",
        naive.coverage, naive.mc_halfwidth
    );
    Ok(())
}
