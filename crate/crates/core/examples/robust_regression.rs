//! Fits MLE, minimum-DPD and minimum-EPD regressions to data with vertical
//! outliers and prints coefficients with sandwich standard errors.

use epdic::estimation::{fit, sandwich, EstimatorKind, FitOptions};
use epdic::simulation::{generate_with_indices, preset_tuning, Scheme, SimConfig};

fn main() -> epdic::Result<()> {
    let cfg = SimConfig {
        scheme: Scheme::ErrorContam,
        delta: 0.134,
        ..SimConfig::default()
    };
    let draw = generate_with_indices(&cfg, 0)?;
    println!(
        "{} of {} responses replaced by outliers",
        draw.contaminated.len(),
        cfg.n
    );
    println!("true coefficients {:?}", cfg.beta0);

    let tunings = preset_tuning(cfg.scheme, cfg.delta).expect("listed setting");
    for kind in EstimatorKind::ALL {
        let f = fit(
            &draw.problem,
            &tunings.for_kind(kind),
            kind,
            None,
            &FitOptions::default(),
        )?;
        let cov = sandwich(&draw.problem, &f)?.asymptotic_covariance()?;
        let n = f.n_obs as f64;
        print!("{:<5}", kind.label());
        for j in 0..f.params.coef.len() {
            print!(
                " {:>7.3} ({:.3})",
                f.params.coef[j],
                (cov[(j, j)] / n).sqrt()
            );
        }
        println!("  sigma {:.3}", f.params.sigma());
    }
    Ok(())
}
