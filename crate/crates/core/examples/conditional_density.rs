//! Density, distribution function, quantiles and mean of the pooled
//! estimator given that the stage 1 estimate landed in (l, u).

use enrich_ci::{ConditionalNormal, Evaluator};

fn main() -> enrich_ci::Result<()> {
    // Stage 1 and stage 2 standard errors 1, selection when D1 > 0.
    let m = ConditionalNormal::new(0.0, 1.0, 1.0, 0.0, f64::INFINITY)?;
    println!("selection probability {:.4}", m.selection_probability());
    println!("conditional mean      {:.6}  (unconditional 0)", m.mean());

    println!("\n{:>6}{:>12}{:>12}", "x", "pdf", "cdf");
    for i in -4..=8 {
        let x = 0.5 * i as f64;
        println!("{x:>6.2}{:>12.6}{:>12.6}", m.pdf(x)?, m.cdf(x)?);
    }

    println!("\nquantiles:");
    for q in [0.025, 0.5, 0.975] {
        println!("  {q:<6} {:.6}", m.quantile(q)?);
    }

    let q = m.with_evaluator(Evaluator::Quadrature);
    let x = 0.75;
    println!("\ncdf({x}) closed form {:.12}", m.cdf(x)?);
    println!("cdf({x}) quadrature  {:.12}", q.cdf(x)?);
    println!("partial moment on (-1, 1): {:.8}", m.partial_moment(-1.0, 1.0)?);
    Ok(())
}
