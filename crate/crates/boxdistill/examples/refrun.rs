use boxdistill::harness::{train, RunConfig};
use boxdistill::objectness::AlphaFamily;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(String::as_str).unwrap_or("quick");
    let (images, steps, warmup) = match mode {
        "full" => (200, 5000, 500),
        _ => (40, 1000, 100),
    };
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);

    let base = RunConfig {
        dataset_seed: seed,
        model_seed: seed,
        num_images: images,
        eval_images: 100,
        steps,
        warmup_steps: warmup,
        learning_rate: 0.1,
        ..Default::default()
    };

    let configs = [
        ("alpha0      ", RunConfig { schedule: AlphaFamily::Constant { value: 0.0 }, skip_evidence: true, ..base.clone() }),
        ("alpha1-ss   ", RunConfig { schedule: AlphaFamily::Constant { value: 1.0 }, ..base.clone() }),
        ("linear-ss   ", RunConfig { schedule: AlphaFamily::Polynomial { gamma: 1.0 }, ..base.clone() }),
        ("linear-nobox", RunConfig { schedule: AlphaFamily::Polynomial { gamma: 1.0 }, use_regressor: false, ..base.clone() }),
    ];
    for (name, config) in configs {
        let t = Instant::now();
        let out = train(&config).unwrap();
        let early: f64 = out.log[50..150.min(out.log.len())].iter().map(|r| r.total).sum::<f64>() / 100.0;
        let late: f64 = out.log[out.log.len()-100..].iter().map(|r| r.total).sum::<f64>() / 100.0;
        println!(
            "{name} seed {seed}: corloc {:.4} map {:.4} | loss {:.3} -> {:.3} | {:.1}s",
            out.train_metrics.corloc, out.eval_metrics.map, early, late, t.elapsed().as_secs_f64()
        );
    }
}
