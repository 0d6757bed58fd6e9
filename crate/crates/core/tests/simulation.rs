use domain_gap::gating::{run_schedule, Action, GatingPolicy};
use domain_gap::metrics::{compute_gap, sample_banks, Metric};
use domain_gap::synth::{gen_domain, gen_schedule, DriftMode, DriftScenario};
use domain_gap::RngSpec;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn second_cycle_gaps_shrink_after_adapting() {
    for (mode, metric) in [(DriftMode::Mean, Metric::Mmd), (DriftMode::Mean, Metric::Swd), (DriftMode::Variance, Metric::DssProj)] {
        let scenario = DriftScenario::new(vec![(3, 6)], 300, 8, 2.0, 1.0, 11).with_mode(mode);
        let source = gen_domain(&DriftScenario { noise_seed: RngSpec::new(12), ..scenario.clone() }, 0).unwrap();
        let phases: Vec<u64> = (0..16).collect();
        let targets = gen_schedule(&scenario, &phases).unwrap();
        let log = run_schedule(&source, &targets, &GatingPolicy::new(metric, 0.0), &RngSpec::new(3)).unwrap();
        let gaps = log.gaps();
        let (first, second) = (mean(&gaps[..8]), mean(&gaps[8..]));
        assert!(second < first, "{metric}: {first} -> {second}");
    }
}

#[test]
fn mid_threshold_skips_exactly_the_small_gaps() {
    let scenario = DriftScenario::new(vec![(3, 4), (5, 4)], 200, 6, 2.0, 1.0, 5);
    let source = gen_domain(&DriftScenario { noise_seed: RngSpec::new(6), ..scenario.clone() }, 0).unwrap();
    let phases: Vec<u64> = (0..12).collect();
    let targets = gen_schedule(&scenario, &phases).unwrap();
    let rng = RngSpec::new(9);
    let all = run_schedule(&source, &targets, &GatingPolicy::new(Metric::Swd, 0.0), &rng).unwrap();
    let mut sorted = all.gaps();
    sorted.sort_by(f64::total_cmp);
    let threshold = sorted[sorted.len() / 2];
    let gated = run_schedule(&source, &targets, &GatingPolicy::new(Metric::Swd, threshold), &rng).unwrap();
    assert!(gated.adapt_count < all.adapt_count);
    for d in &gated.decisions {
        assert_eq!(d.action == Action::Skip, d.gap_report.aggregate < threshold);
    }
}

#[test]
fn zero_amplitude_gaps_stay_at_noise_level() {
    let scenario = DriftScenario::new(vec![(3, 8)], 400, 12, 0.0, 1.0, 21);
    let twin = DriftScenario { noise_seed: RngSpec::new(22), ..scenario.clone() };
    let banks = sample_banks([(3, 8)], 10, &RngSpec::new(1)).unwrap();
    for metric in [Metric::Mmd, Metric::Swd, Metric::DssProj] {
        let baseline = compute_gap(&gen_domain(&twin, 0).unwrap(), &gen_domain(&scenario, 0).unwrap(), metric, Some(&banks))
            .unwrap()
            .aggregate;
        let across = compute_gap(&gen_domain(&scenario, 0).unwrap(), &gen_domain(&scenario, 6).unwrap(), metric, Some(&banks))
            .unwrap()
            .aggregate;
        assert!(across < 3.0 * baseline, "{metric}: {across} vs baseline {baseline}");
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let scenario = DriftScenario::new(vec![(3, 16), (4, 8)], 300, 8, 1.5, 1.0, 3);
    let a = gen_domain(&scenario, 1).unwrap();
    let b = gen_domain(&scenario, 4).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let banks = sample_banks([(3, 16), (4, 8)], 64, &RngSpec::new(8)).unwrap();
                [Metric::Swd, Metric::DssProj]
                    .map(|m| compute_gap(&a, &b, m, Some(&banks)).unwrap().aggregate.to_bits())
            })
    };
    assert_eq!(run(1), run(4));
}
