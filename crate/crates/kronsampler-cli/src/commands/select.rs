use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use kronsampler::fp;
use kronsampler::samplers::{self, Algorithm, Objective, ProblemInstance, Selection};
use kronsampler::{Error, Result};

#[derive(Args)]
pub struct SelectArgs {
    /// ffw | framesense | greedyfp | random | exhaustive
    #[arg(long)]
    pub algo: String,
    #[arg(long)]
    pub budget: usize,
    /// Comma-separated factor CSV paths, one per mode
    #[arg(long)]
    pub factors: String,
    /// Seed for the random sampler
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Objective for the exhaustive oracle: fp | mse
    #[arg(long, default_value = "fp")]
    pub objective: String,
    /// Write the selection JSON here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: SelectArgs) -> Result<()> {
    let algorithm: Algorithm = args.algo.parse()?;
    let objective: Objective = args.objective.parse()?;
    let factors = super::load_factors(&args.factors)?;
    let instance = ProblemInstance::new(factors, args.budget)?;

    let start = Instant::now();
    let selection = run_sampler(algorithm, &instance, args.seed, objective)?;
    let elapsed = start.elapsed();

    let fp_value = fp::frame_potential_product(&instance, &selection)?;
    let json = serde_json::to_string_pretty(&selection).expect("selection serializes");
    super::emit(args.out.as_deref(), &json)?;
    eprintln!(
        "algorithm={} budget={} sizes={:?} fp={:.6e} elapsed={:.3?}",
        selection.algorithm(),
        selection.budget(),
        selection.mode_sizes(),
        fp_value,
        elapsed
    );
    Ok(())
}

pub fn run_sampler(
    algorithm: Algorithm,
    instance: &ProblemInstance,
    seed: u64,
    objective: Objective,
) -> Result<Selection> {
    match algorithm {
        Algorithm::Ffw => {
            if instance.n_modes() == 1 {
                samplers::ffw_vector(&instance.factors()[0], instance.budget())
            } else {
                samplers::ffw_tensor(instance)
            }
        }
        Algorithm::FrameSense => {
            if instance.n_modes() != 1 {
                return Err(Error::InvalidInput(
                    "framesense is single-mode; use greedyfp for tensors".into(),
                ));
            }
            samplers::frame_sense(&instance.factors()[0], instance.budget())
        }
        Algorithm::GreedyFp => samplers::greedy_fp_tensor(instance),
        Algorithm::Random => Ok(samplers::random_selection(instance, seed)),
        Algorithm::Exhaustive => samplers::exhaustive_optimum(instance, objective),
    }
}
