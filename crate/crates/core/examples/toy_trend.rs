//! Trains LIIF and A-LIIF on the synthetic toy set and compares held-out
//! ×2 PSNR against bicubic.
//!
//! ```text
//! cargo run --release --example toy_trend -- [epochs] [seed]
//! ```

use std::time::Instant;

use aliif::harness::{evaluate, Method};
use aliif::synth::toy_set;
use aliif::training::{train, Dataset, TrainConfig};
use aliif::Mode;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

fn main() -> aliif::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs: usize = args.next().map_or(Ok(30), |a| a.parse()).expect("epochs");
    let seed: u64 = args.next().map_or(Ok(0), |a| a.parse()).expect("seed");

    let mut images = toy_set(20, 32, 64, 7)?;
    let held: Vec<_> = images
        .split_off(16)
        .into_iter()
        .enumerate()
        .map(|(i, im)| (format!("held{i}"), Ok(im)))
        .collect();
    let data = Dataset::from_images(images)?;

    let mut models = Vec::new();
    for mode in [Mode::Liif, Mode::Aliif] {
        let mut config = TrainConfig::toy(mode);
        config.epochs = epochs;
        config.seed = seed;
        let start = Instant::now();
        let out = train(&data, &config)?;
        let first = out.history.first().map_or(f64::NAN, |r| r.loss);
        let last = out.history.last().map_or(f64::NAN, |r| r.loss);
        println!("{mode}: {} steps, L1 {first:.4} -> {last:.4}, {:.0} s", out.history.len(), start.elapsed().as_secs_f64());
        models.push(out.model);
    }

    let methods = [
        Method::Bicubic,
        Method::Model { name: "liif".into(), model: &models[0] },
        Method::Model { name: "aliif".into(), model: &models[1] },
    ];
    let report = evaluate(&held, &methods, &[2.0, 3.0, 4.0], false)?;
    print!("{}", report.table());
    Ok(())
}
