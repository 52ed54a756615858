//! Prints the layer stack, parameter count and output shape of every head.
//!
//! cargo run --example inspect_heads -- --classes 20

use clap::Parser;

use hierdoc::heads::{pad_batch, HeadKind, HeadModel};
use hierdoc::embedstore::DocEmbedding;

#[derive(Parser)]
struct Args {
    #[arg(long, default_value_t = 5)]
    classes: usize,
    /// Embedding width for heads without a fixed one.
    #[arg(long, default_value_t = 512)]
    dim: usize,
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    for kind in HeadKind::ALL {
        let dim = kind.input_dim().unwrap_or(args.dim);
        let head = HeadModel::<f32>::build(kind, dim, args.classes, 0)?;
        println!("{kind}: input {dim}, {} parameters", head.param_count());
        for (spec, layer) in head.network.specs().iter().zip(head.network.layers()) {
            let params: usize = layer.params().iter().map(|p| p.len()).sum();
            println!("  {spec:?}  ({params} params)");
        }
        let docs = [
            DocEmbedding::new("long", dim, vec![0.1; 7 * dim])?,
            DocEmbedding::new("short", dim, vec![-0.1; dim])?,
        ];
        let batch = pad_batch(&docs.iter().collect::<Vec<_>>())?;
        let logits = head.logits(&batch)?;
        println!("  logits for a 7-chunk and a 1-chunk document: {:?}\n", logits.shape());
    }
    Ok(())
}
