//! Checks backpropagated gradients of every head against central
//! differences in f64.
//!
//! cargo run --release --example gradient_check -- --seeds 3

use clap::Parser;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use hierdoc::heads::{HeadKind, HeadModel};
use hierdoc::neural::{gradient_check, CheckLoss, GradCheckOptions, SeqBatch, Tensor, Value};
use hierdoc::rng::RngStreams;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 2)]
    seeds: u64,
    /// Entries sampled per parameter tensor.
    #[arg(long, default_value_t = 12)]
    samples: usize,
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    println!("{:<10} {:>4} {:>8} {:>8} {:>12}  worst entry", "head", "seed", "checked", "kinks", "max rel err");
    for kind in HeadKind::ALL {
        let dim = kind.input_dim().unwrap_or(24);
        for seed in 0..args.seeds {
            let mut rng = RngStreams::new(seed).stream("example/gradcheck");
            let (b, t) = (3, rng.random_range(2..=6));
            let lengths: Vec<usize> = (0..b).map(|_| rng.random_range(1..=t)).collect();
            let data: Vec<f64> = (0..b * t * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let x = Value::Seq(SeqBatch::new(Tensor::from_vec(&[b, t, dim], data)?, lengths)?);
            let labels: Vec<usize> = (0..b).map(|_| rng.random_range(0..4)).collect();

            let mut head = HeadModel::<f64>::build(kind, dim, 4, seed)?;
            let opts = GradCheckOptions { samples_per_param: args.samples, input_samples: args.samples, seed, ..Default::default() };
            let rep = gradient_check(&mut head.network, &x, &CheckLoss::CrossEntropy(labels), &opts)?;
            let worst = rep.worst.map_or_else(String::new, |w| format!("{} ({:.3e} vs {:.3e})", w.name, w.analytic, w.numeric));
            println!("{kind:<10} {seed:>4} {:>8} {:>8} {:>12.2e}  {worst}", rep.checked, rep.skipped_kinks, rep.max_rel_error);
        }
    }
    Ok(())
}
