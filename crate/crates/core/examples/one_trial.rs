//! Time a single trial: `one_trial <libsvm file> <strategy> [trial] [budget]`.
use std::path::Path;
use std::time::Instant;

use uncertal::data::{load, Format};
use uncertal::experiment::{run_trial, Budget, ExperimentConfig, NamedStrategy};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let ds = load(Path::new(&args[1]), Format::Libsvm).expect("load");
    let strategy = NamedStrategy::from_name(&args[2]).expect("strategy");
    let trial = args.get(3).map_or(0, |s| s.parse().unwrap());
    let budget = args
        .get(4)
        .map_or(Budget::Default, |s| Budget::Fixed(s.parse().unwrap()));
    let cfg = ExperimentConfig {
        budget,
        ..ExperimentConfig::default()
    };
    let start = Instant::now();
    let r = run_trial(&ds, &strategy, &cfg, trial).expect("trial");
    println!(
        "{} {} trial {}: alc {:.4} final {:.4} retrains {} non-converged {} max |g| {:.2e} in {:.2?}",
        r.dataset,
        r.strategy,
        r.trial,
        r.alc,
        r.curve.accuracies.last().unwrap(),
        r.solver.retrains,
        r.solver.non_converged,
        r.solver.max_grad_inf_norm,
        start.elapsed()
    );
}
