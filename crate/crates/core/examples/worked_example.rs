//! Two subpopulations, rule D2 with co-primary analysis: stage 1 data,
//! the interim decision, pooled estimates and all nine intervals.

use enrich_ci::designs::{self, DecisionRule, RuleKind, Stage1Summary, Stage2Summary, TrialDesign};
use enrich_ci::intervals::Method;

fn main() -> enrich_ci::Result<()> {
    let design = TrialDesign::new(vec![0.5, 0.5], 200, 100, 0.36, 0.05)?;
    let rule = DecisionRule::new(RuleKind::D2 { delta_star: 0.025 }, true);

    let s1 = Stage1Summary::new(&design, vec![0.113, 0.013])?;
    let decision = rule.apply(&design, &s1)?;
    println!("interim decision: {}", decision.label(design.k()));
    for t in &decision.targets {
        println!("  {:<4} stage 1 estimate constrained to ({:.4}, {:.4})", t.target, t.lower, t.upper);
    }

    let s2 = Stage2Summary { means: vec![Some(0.155), Some(-0.064)], pooled: Some(0.045) };
    for t in &decision.targets {
        let est = designs::pooled_estimate(&design, &decision, &s1, &s2, &t.target)?;
        println!("  {:<4} pooled estimate {est:.4}", t.target);
    }

    println!("\n{:<7}{:<7}{:>10}{:>10}", "target", "method", "lower", "upper");
    for ci in designs::confidence_intervals(&design, &decision, &s1, &s2, &Method::ALL)? {
        println!("{:<7}{:<7}{:>10.4}{:>10.4}", ci.target, ci.method, ci.lower, ci.upper);
    }
    Ok(())
}
