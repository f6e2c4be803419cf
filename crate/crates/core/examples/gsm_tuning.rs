//! Selects DPD and EPD tuning parameters by generalized score matching.

use epdic::estimation::FitOptions;
use epdic::simulation::{generate, Scheme, SimConfig};
use epdic::tuning::{select_tuning, TuningFamily, TuningGrid};

fn main() -> epdic::Result<()> {
    let cfg = SimConfig {
        scheme: Scheme::ErrorContam,
        delta: 0.093,
        ..SimConfig::default()
    };
    let pr = generate(&cfg, 0)?;
    let opts = FitOptions::default();

    let dpd = select_tuning(&pr, &TuningGrid::default_dpd(), TuningFamily::Dpd, &opts)?;
    println!("DPD: γ={} score {:.4}", dpd.best.gamma(), dpd.best_score);

    let epd = select_tuning(&pr, &TuningGrid::default_epd(), TuningFamily::Epd, &opts)?;
    let b = epd.best;
    println!(
        "EPD: α={} β={} γ={} score {:.4} ({} grid points, {} failed)",
        b.alpha(),
        b.beta(),
        b.gamma(),
        epd.best_score,
        epd.table.len(),
        epd.failures.len()
    );
    Ok(())
}
