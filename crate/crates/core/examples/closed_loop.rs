//! Runs the 259-element preset in closed loop and prints boundary aggregates.
//!
//! cargo run --release -p noir-core --example closed_loop -- [seed] [--lower-bound]

use std::time::Instant;

use noir_core::generate::{generate_preset, Preset};
use noir_core::sim::{run, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let graph = generate_preset(Preset::Philadelphia, seed)?;
    let cfg = SimConfig {
        seed,
        enforce_density_lower_bound: std::env::args().any(|a| a == "--lower-bound"),
        ..SimConfig::default()
    };
    let started = Instant::now();
    let log = run(&graph, &cfg, &cfg.mpc_config(&graph)?)?;
    let elapsed = started.elapsed();

    let monitored: Vec<usize> = [68, 119]
        .into_iter()
        .filter_map(|id| log.road_ids.iter().position(|&r| r == id))
        .collect();
    println!("step  sum_u    sum_v    status   d0_applied  cap_viol  neg  total  monitored");
    for r in &log.records {
        print!(
            "{:4}  {:7.3}  {:7.3}  {:?}  {:9.3}  {:8.3}  {:6.3}  {:8.2}",
            r.step,
            r.sum_u,
            r.sum_v,
            r.status,
            r.d0_applied,
            r.capacity_violation,
            r.negativity,
            r.densities.sum()
        );
        for &i in &monitored {
            print!("  {:7.3}", r.densities[i]);
        }
        println!();
    }
    let total = |x: &nalgebra::DVector<f64>| x.sum();
    println!("initial total density {:.3}", total(&log.initial));
    println!("final total density   {:.3}", total(log.final_densities()));
    println!("bibo {:?}", log.bibo);
    println!("elapsed {elapsed:?}");
    Ok(())
}
