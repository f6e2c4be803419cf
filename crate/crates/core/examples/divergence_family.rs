//! Evaluates the divergence contribution of a single observation across the
//! tuning family, showing how large residuals are down-weighted.

use epdic::divergence::{samplewise_contribution, weight_fn};
use epdic::{TuningTriple, UnivariateGaussian};

fn main() -> epdic::Result<()> {
    let model = UnivariateGaussian::new(0.0, 1.0)?;
    let triples = [
        ("likelihood limit", TuningTriple::likelihood()),
        ("DPD γ=0.3", TuningTriple::dpd(0.3)?),
        ("EPD (0.1, 0.7, 0.3)", TuningTriple::new(0.1, 0.7, 0.3)?),
        ("EPD (-0.5, 1.0, 0.3)", TuningTriple::new(-0.5, 1.0, 0.3)?),
    ];
    println!(
        "{:<22} {:>10} {:>10} {:>10} {:>12}",
        "tuning", "V(0)", "V(3)", "V(10)", "w(f(10))"
    );
    for (name, t) in &triples {
        let v = |y: f64| samplewise_contribution(y, &model, t);
        println!(
            "{name:<22} {:>10.4} {:>10.4} {:>10.4} {:>12.3e}",
            v(0.0)?,
            v(3.0)?,
            v(10.0)?,
            weight_fn(model.density(10.0), t)?
        );
    }
    Ok(())
}
