//! Compares MLIC, DPDIC and EPDIC on clean and contaminated data.

use epdic::criteria::{criterion, CriterionKind};
use epdic::estimation::{fit, FitOptions};
use epdic::simulation::{generate, preset_tuning, Scheme, SimConfig};

fn main() -> epdic::Result<()> {
    for (scheme, delta) in [(Scheme::Pure, 0.0), (Scheme::ErrorContam, 0.134)] {
        let cfg = SimConfig {
            scheme,
            delta,
            ..SimConfig::default()
        };
        let pr = generate(&cfg, 0)?;
        let tunings = preset_tuning(scheme, delta).expect("listed setting");
        println!("{} δ={delta}", scheme.label());
        for kind in CriterionKind::ALL {
            let est = kind.estimator();
            let f = fit(
                &pr,
                &tunings.for_kind(est),
                est,
                None,
                &FitOptions::default(),
            )?;
            let r = criterion(&pr, &f, kind)?;
            println!(
                "  {:<6} fit {:>10.3} + penalty {:>6.3} = {:>10.3}",
                kind.label(),
                r.fit_term,
                r.penalty,
                r.total
            );
        }
    }
    Ok(())
}
