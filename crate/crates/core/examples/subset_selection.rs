//! LASSO screening followed by exhaustive subset ranking under all three
//! criteria and a consolidated top-5 list.

use epdic::criteria::CriterionKind;
use epdic::estimation::{EstimatorKind, RegressionProblem};
use epdic::selection::{consolidate, enumerate_and_rank, lasso_screen, RegressionScorer};
use epdic::simulation::{preset_tuning, Scheme};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() -> epdic::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (n, k) = (200, 8);
    let z = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));
    let x = z.insert_column(0, 1.0);
    let mut b = DVector::zeros(k + 1);
    b[0] = 1.0;
    b[1] = 1.2;
    b[3] = -0.8;
    b[6] = 0.5;
    let noise: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let y = &x * &b + noise;
    let mut names = vec!["intercept".to_string()];
    names.extend((1..=k).map(|j| format!("x{j}")));
    let pr = RegressionProblem::with_names(x, y, names)?;

    let tunings = preset_tuning(Scheme::Pure, 0.0).expect("listed setting");
    let screen = lasso_screen(
        &pr,
        &tunings.for_kind(EstimatorKind::Epde),
        EstimatorKind::Epde,
        None,
    )?;
    let kept: Vec<&str> = screen
        .active
        .iter()
        .map(|&j| pr.names()[j].as_str())
        .collect();
    println!("LASSO λ={:.4} keeps {kept:?}", screen.lambda);

    let scorer = RegressionScorer::new(pr);
    let mask: Vec<usize> = screen.active.iter().map(|j| j - 1).collect();
    let ranking = enumerate_and_rank(&scorer, &mask, &CriterionKind::ALL, &tunings)?;
    for l in &ranking.lists {
        let top: Vec<String> = l.entries.iter().take(3).map(|e| e.model.name()).collect();
        println!("{} top 3: {}", l.kind.label(), top.join(" | "));
    }
    consolidate(&ranking.lists, 5)?.write_csv(std::io::stdout())
}
