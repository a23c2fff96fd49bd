//! Quick timing and learning probe: trains on D(3,4) with the default
//! hyperparameters for a handful of epochs and prints per-epoch stats.
//!
//! Usage: cargo run --release --example train_probe -- [epochs] [seed]

use hierref_core::agents::{train, GameConfig};
use hierref_core::dataset::{generate_dataset, GenConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(5);
    let seed: u64 = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(1);

    let gen = GenConfig::new(3, 4, 42);
    let t0 = std::time::Instant::now();
    let dataset = generate_dataset(&gen).unwrap();
    println!(
        "dataset: {} train / {} validation / {} zeroshot_objects ({:.2?})",
        dataset.train.len(),
        dataset.validation.len(),
        dataset.zeroshot_objects.len(),
        t0.elapsed()
    );

    let cfg = GameConfig {
        epochs,
        ..GameConfig::new(3, 4, seed)
    };
    let t0 = std::time::Instant::now();
    let outcome = train::<f32>(&dataset, &cfg).unwrap();
    let elapsed = t0.elapsed();
    for stats in &outcome.history {
        println!(
            "epoch {:3}  tau {:.3}  train loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}",
            stats.epoch,
            stats.temperature,
            stats.train_loss,
            stats.train_acc,
            stats.val_loss,
            stats.val_acc
        );
    }
    println!(
        "{} epochs in {:.2?} ({:.2?}/epoch)",
        epochs,
        elapsed,
        elapsed / epochs as u32
    );
}
