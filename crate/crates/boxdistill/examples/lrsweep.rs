use boxdistill::harness::{train, RunConfig};
use boxdistill::objectness::AlphaFamily;

fn main() {
    for seed in 1..=5u64 {
        let base = RunConfig {
            dataset_seed: seed,
            model_seed: seed,
            num_images: 200,
            eval_images: 300,
            steps: 5000,
            warmup_steps: 500,
            learning_rate: 0.1,
            ..Default::default()
        };
        let a1 = train(&RunConfig { schedule: AlphaFamily::Constant { value: 1.0 }, ..base.clone() }).unwrap();
        let lin = train(&RunConfig { schedule: AlphaFamily::Polynomial { gamma: 1.0 }, ..base.clone() }).unwrap();
        println!(
            "seed {seed}: alpha1 map {:.4} | linear map {:.4} | linear wins: {}",
            a1.eval_metrics.map, lin.eval_metrics.map, lin.eval_metrics.map > a1.eval_metrics.map
        );
    }
}
