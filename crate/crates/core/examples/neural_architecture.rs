//! Trains the small classifier grid under the EPD loss and ranks the
//! architectures with the three criteria.

use epdic::neural::{
    preset_nn_tuning, select_architecture, ClassificationData, TrainOptions, NN_TOP_K,
};
use epdic::CriterionKind;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> epdic::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 400;
    let x = DMatrix::from_fn(n, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
    let labels = (0..n)
        .map(|i| {
            let s = 1.5 * x[(i, 0)] - x[(i, 1)] * x[(i, 2)];
            // 5% flipped labels
            let y = u8::from(s > 0.0);
            if rng.random::<f64>() < 0.05 {
                1 - y
            } else {
                y
            }
        })
        .collect();
    let data = ClassificationData::standardized(x, labels)?;
    let opts = TrainOptions {
        max_epochs: 300,
        ..TrainOptions::default()
    };
    let sel = select_architecture(
        &data,
        &preset_nn_tuning(),
        &CriterionKind::ALL,
        &opts,
        NN_TOP_K,
    )?;
    for s in &sel.scores {
        println!(
            "{:<10} {:<6} total {:>9.3} acc {:.3}",
            s.arch.display(),
            s.criterion.kind.label(),
            s.criterion.total,
            s.accuracy
        );
    }
    sel.consolidated
        .write_csv_labeled(std::io::stdout(), "architecture")
}
