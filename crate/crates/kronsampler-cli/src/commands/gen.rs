use std::path::PathBuf;

use clap::Args;
use kronsampler::instances::{self, EnsembleKind, EnsembleSpec};
use kronsampler::{io, Result};

#[derive(Args)]
pub struct GenArgs {
    /// Ensemble kind: gaussian | signed
    #[arg(long)]
    pub kind: String,
    /// Mode shape as N,K; repeat once per mode
    #[arg(long = "shape", required = true)]
    pub shapes: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Output directory (created if missing)
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

pub fn run(args: GenArgs) -> Result<()> {
    let kind: EnsembleKind = args.kind.parse()?;
    let shapes = args
        .shapes
        .iter()
        .map(|s| super::parse_shape(s))
        .collect::<Result<Vec<_>>>()?;
    let spec = EnsembleSpec::new(kind, shapes, args.seed, args.trials)?;
    std::fs::create_dir_all(&args.out_dir)?;

    for trial in 0..spec.trials {
        let factors = instances::generate_trial(&spec, trial)?;
        for (mode, factor) in factors.iter().enumerate() {
            let path = args.out_dir.join(format!("trial{trial:03}_mode{}.csv", mode + 1));
            io::write_matrix_csv(&path, factor.matrix())?;
        }
    }
    let meta = serde_json::to_string_pretty(&spec).expect("spec serializes");
    std::fs::write(args.out_dir.join("ensemble.json"), meta + "\n")?;
    println!(
        "wrote {} trials x {} modes to {}",
        spec.trials,
        spec.mode_shapes.len(),
        args.out_dir.display()
    );
    Ok(())
}
