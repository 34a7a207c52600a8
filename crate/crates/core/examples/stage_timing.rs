//! Wall-clock time of each receiver stage on one reference-scenario frame.
//! Usage: `cargo run --release --example stage_timing -- <snr_db>`

use std::time::Instant;

use otfs_gfra::airlink::propagate;
use otfs_gfra::channel::draw_realization;
use otfs_gfra::detector::{parametric_stage, prepare, somp, ReceiverOptions};
use otfs_gfra::harness::{nmse, oracle_ls};
use otfs_gfra::modem::{build_frame, training_sequences};
use otfs_gfra::SystemConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let snr: f64 = std::env::args().nth(1).map_or(20.0, |s| s.parse().unwrap());
    let cfg = SystemConfig { snr_db: snr, ..SystemConfig::default() };
    let opts = ReceiverOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t = Instant::now();
    let truth = draw_realization(&cfg, &mut rng).unwrap();
    let frames: Vec<_> = (0..cfg.terminals).map(|k| build_frame(k, &cfg, &mut rng).unwrap()).collect();
    println!("frames {:?}", t.elapsed());
    let t = Instant::now();
    let rx = propagate(&frames, &truth, &cfg, &mut rng).unwrap();
    println!("propagate {:?}", t.elapsed());
    let t = Instant::now();
    let ts = training_sequences(&cfg);
    let (psi, meas) = prepare(&rx, &ts, &cfg).unwrap();
    println!("prepare {:?}", t.elapsed());
    let t = Instant::now();
    let sol = somp(&psi, &meas, opts.stop).unwrap();
    println!("somp {:?} ({} atoms)", t.elapsed(), sol.support.len());
    let t = Instant::now();
    let est = parametric_stage(&psi, &meas, sol, &cfg, &opts).unwrap();
    println!("parametric {:?}", t.elapsed());
    let t = Instant::now();
    let orc = oracle_ls(&rx, &truth, &ts, &cfg, &opts).unwrap();
    println!("oracle {:?}", t.elapsed());
    let t = Instant::now();
    let a = nmse(&est, &truth, &cfg).unwrap();
    let b = nmse(&orc, &truth, &cfg).unwrap();
    println!("nmse {:?} {a:.3e} {b:.3e}", t.elapsed());
}
