//! The four interim rules on a handful of stage 1 outcomes, with the
//! selection bounds each reported target must respect.

use enrich_ci::designs::{DecisionRule, RuleKind, Stage1Summary, TrialDesign};

fn show(design: &TrialDesign, rule: DecisionRule, means: &[f64]) -> enrich_ci::Result<()> {
    let s1 = Stage1Summary::new(design, means.to_vec())?;
    let d = rule.apply(design, &s1)?;
    print!("  {:<12} means {:<22} -> {:<9}", rule.kind.name(), format!("{means:?}"), d.label(design.k()));
    for t in &d.targets {
        let how = if t.unaltered { " unaltered" } else { "" };
        print!("  {}: ({:.3}, {:.3}){how}", t.target, t.lower, t.upper);
    }
    if let Some(aux) = &d.auxiliary {
        print!("  aux: ({:.3}, {:.3})", aux.lower, aux.upper);
    }
    println!();
    Ok(())
}

fn main() -> enrich_ci::Result<()> {
    let two = TrialDesign::new(vec![0.5, 0.5], 244, 244, 8.0, 0.05)?;
    println!("two subpopulations, n1 = 244, sigma = 8");
    for means in [[2.0, 1.5], [1.5, -0.5], [-0.3, 0.9], [-0.5, -0.2]] {
        show(&two, DecisionRule::new(RuleKind::D1 { z_star: 1.0 }, true), &means)?;
        show(&two, DecisionRule::new(RuleKind::D2 { delta_star: 1.0 }, true), &means)?;
        show(&two, DecisionRule::new(RuleKind::Kimani2015 { delta_star: 1.0 }, false), &means)?;
    }

    let three = TrialDesign::new(vec![0.2, 0.3, 0.5], 90, 90, 1.0, 0.05)?;
    println!("\nthree nested subpopulations");
    for means in [[0.4, 0.3, 0.1], [0.4, -0.1, -0.2], [0.05, 0.0, -0.1]] {
        show(&three, DecisionRule::new(RuleKind::Kimani2018 { delta_star: 0.1 }, false), &means)?;
    }
    Ok(())
}
