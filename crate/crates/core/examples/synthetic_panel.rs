//! Write a seeded monthly panel in long CSV format.
//!
//! Usage: `cargo run --example synthetic_panel -- <out.csv> [series] [seed]`

use std::env;
use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Write};

use chrono::{Datelike, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn main() -> std::io::Result<()> {
    let mut args = env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "synthetic.csv".into());
    let n: usize = args.next().map(|s| s.parse().expect("series count")).unwrap_or(100);
    let seed: u64 = args.next().map(|s| s.parse().expect("seed")).unwrap_or(0);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = BufWriter::new(File::create(&out)?);
    writeln!(w, "item_id,timestamp,target")?;
    for i in 0..n {
        let len = 48 + 12 * (i % 3);
        let level = 50.0 + 150.0 * rng.gen::<f64>();
        let amp = level * (0.05 + 0.25 * rng.gen::<f64>());
        let slope = level * (rng.gen::<f64>() - 0.5) * 0.01;
        let phi = 0.2 + 0.6 * rng.gen::<f64>();
        let phase = TAU * rng.gen::<f64>();
        let noise = level * 0.03;
        let mut ar = 0.0;
        let start = NaiveDate::from_ymd_opt(2015 + (i % 4) as i32, 1, 1).expect("valid date");
        for t in 0..len {
            let e: f64 = rng.sample(StandardNormal);
            ar = phi * ar + noise * e;
            let season = match i % 4 {
                0 | 1 => amp * (TAU * (t % 12) as f64 / 12.0 + phase).sin(),
                _ => 0.0,
            };
            let trend = if i % 4 == 2 { 0.0 } else { slope * t as f64 };
            let y = level + trend + season + ar;
            let months = start.month0() as usize + t;
            let date = NaiveDate::from_ymd_opt(start.year() + (months / 12) as i32, (months % 12) as u32 + 1, 1).expect("valid date");
            writeln!(w, "item_{i:03},{date},{y:.4}")?;
        }
    }
    w.flush()
}
