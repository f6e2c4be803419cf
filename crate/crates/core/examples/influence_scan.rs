//! Traces the criterion influence of a single contaminating response and
//! checks whether it stays bounded.

use epdic::criteria::{boundedness_scan, influence_value, GridSpec};
use epdic::estimation::{fit, EstimatorKind, FitOptions};
use epdic::simulation::{generate, SimConfig};
use epdic::TuningTriple;
use nalgebra::DVector;

fn main() -> epdic::Result<()> {
    let pr = generate(&SimConfig::default(), 0)?;
    let x = DVector::from_element(pr.p(), 0.0);
    let fits = [
        (
            "EPDE (0.1, 0.7, 0.3)",
            TuningTriple::new(0.1, 0.7, 0.3)?,
            EstimatorKind::Epde,
        ),
        ("DPDE γ=0.3", TuningTriple::dpd(0.3)?, EstimatorKind::Dpde),
        ("MLE", TuningTriple::likelihood(), EstimatorKind::Mle),
    ];
    for (name, t, kind) in fits {
        let f = fit(&pr, &t, kind, None, &FitOptions::default())?;
        let s = f.params.sigma();
        let curve: Vec<String> = [0.0, 2.0, 5.0, 20.0]
            .iter()
            .map(|k| influence_value(&f, k * s, &x).map(|v| format!("{v:.1}")))
            .collect::<epdic::Result<_>>()?;
        let scan = boundedness_scan(&f, &x, &GridSpec::default())?;
        println!(
            "{name:<22} IF at 0/2/5/20σ: {}  sup {:.3e} bounded={}",
            curve.join(" / "),
            scan.sup_abs,
            scan.bounded
        );
    }
    Ok(())
}
