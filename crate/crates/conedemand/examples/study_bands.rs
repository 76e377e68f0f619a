//! Prints the study table percentages for a range of seeds against the
//! published tolerance bands. Useful for checking how the default
//! configuration behaves across RNG streams:
//!
//! ```text
//! cargo run --release -p conedemand --example study_bands -- 1000 41 13 99
//! ```

use conedemand::simulate::{run_study, SimConfig, METRIC_NAMES};

const LO: [f64; 12] = [100.0, 100.0, 57.7, 87.4, 68.6, 65.1, 90.6, 90.7, 54.2, 94.4, 89.2, 90.6];
const HI: [f64; 12] = [100.0, 100.0, 73.7, 97.4, 84.6, 81.1, 100.0, 100.0, 70.2, 100.0, 99.2, 100.0];

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n_draws: usize = args.first().map(|s| s.parse().unwrap()).unwrap_or(1000);
    let seeds: Vec<u64> = if args.len() > 1 {
        args[1..].iter().map(|s| s.parse().unwrap()).collect()
    } else {
        vec![41, 13, 99]
    };
    for seed in seeds {
        let cfg = SimConfig {
            n_draws,
            seed,
            ..SimConfig::default()
        };
        let start = std::time::Instant::now();
        let (table, draws) = run_study(&cfg).expect("study failed");
        let secs = start.elapsed().as_secs_f64();
        let mut bad = Vec::new();
        print!("seed {seed:>4} ({secs:6.1}s): ");
        for (i, row) in table.rows.iter().enumerate() {
            print!("{}={:.1} ", METRIC_NAMES[i], row.pct_holds);
            let margin = (row.pct_holds - LO[i]).min(HI[i] - row.pct_holds);
            if margin < 0.0 {
                bad.push(format!("{}={:.1} ({:+.1})", METRIC_NAMES[i], row.pct_holds, margin));
            }
        }
        println!();
        println!(
            "   goods={:.2} baskets={:.2} rank={:.2} full_rank={} gap={:.2e} failed={}",
            table.mean_goods,
            table.mean_baskets,
            table.mean_rank,
            table.full_rank.n_draws,
            table.full_rank.mean_law_projector_gap,
            table.n_failed
        );
        let n_missing_mean = draws.iter().map(|d| d.n_missing_basis_vectors as f64).sum::<f64>()
            / draws.len() as f64;
        println!("   missing_basis_mean={n_missing_mean:.2}");
        for f in &table.failures {
            println!("   failed draw {}: {}", f.draw, f.message);
        }
        println!("   BAD: {}", if bad.is_empty() { "none".into() } else { bad.join(" ") });
    }
}
