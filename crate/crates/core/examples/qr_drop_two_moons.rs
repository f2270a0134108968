//! Two-moons classification with plain dropout, R-Drop (bidirectional KL) and
//! QR-Drop (QIF) consistency, same seed and data for all three.
//!
//! cargo run --release --example qr_drop_two_moons -- [epochs]

use qif_lab::qr_drop::{train, two_moons, ConsistencyKind, TrainConfig};
use qif_lab::{rng, Result};

fn main() -> Result<()> {
    let epochs = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let mut r = rng::stream(0, rng::DATA);
    let train_set = two_moons(1000, 0.3, &mut r)?;
    let test_set = two_moons(1000, 0.3, &mut r)?;

    for kind in ConsistencyKind::ALL {
        let cfg = TrainConfig {
            consistency: kind,
            epochs,
            ..TrainConfig::default()
        };
        let history = train(&train_set, &test_set, &cfg)?;
        let last = history.last().unwrap();
        println!(
            "{:<17} test acc {:.4}  test nll {:.4}  mean beta*C {:.5}",
            kind.name(),
            last.test_acc,
            last.test_loss,
            last.consistency_loss_mean
        );
    }
    Ok(())
}
