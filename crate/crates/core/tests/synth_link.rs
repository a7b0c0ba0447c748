//! The generator's latent share should be recoverable by the engine.

use votecast::arimax::{fit_arimax, ArimaxOrder};
use votecast::ingest::{FeatureKind, InteractionKey, Platform, SubjectId};
use votecast::optim::SimplexSettings;
use votecast::series::{decompose, interpolate_daily, DayIndex};
use votecast::synth::{candidate_a_targets, gen_interactions, gen_polls, LinkModel, BENCHMARK_START};

fn subject() -> SubjectId {
    SubjectId::new("candidate_a").unwrap()
}

fn start() -> DayIndex {
    BENCHMARK_START.parse().unwrap()
}

#[test]
fn driver_effect_has_the_right_sign() {
    let driver = InteractionKey::new(Platform::Twitter, FeatureKind::Like).unwrap();
    let mut positive = 0;
    let seeds = 20;
    for seed in 0..seeds {
        let table = gen_interactions(&[(subject(), candidate_a_targets())], start(), 240, seed).unwrap();
        let mut link = LinkModel::line(40.0, 0.002);
        link.interaction_weight = 2.0;
        link.noise_std = 0.05;
        link.driver = driver;
        let polls = gen_polls(&link, &table, &subject(), 1, seed).unwrap();
        let y: Vec<f64> = polls.get(&subject()).unwrap().points().iter().map(|p| p.1).collect();

        // the link uses a trailing 7-day mean; offer the matching sum
        let raw = table.series(&subject(), driver).unwrap().values();
        let x: Vec<Vec<f64>> = (0..raw.len())
            .map(|t| vec![raw[t.saturating_sub(6)..=t].iter().sum::<f64>()])
            .collect();
        let fit = fit_arimax(&y[6..], Some(&x[6..]), ArimaxOrder::new(0, 1, 1), SimplexSettings::default()).unwrap();
        if fit.beta[0] > 0.0 {
            positive += 1;
        }
    }
    assert_eq!(positive, seeds, "beta positive for {positive}/{seeds} seeds");
}

#[test]
fn seasonal_amplitude_is_recovered() {
    let table = gen_interactions(&[(subject(), candidate_a_targets())], start(), 360, 3).unwrap();
    let mut link = LinkModel::line(40.0, 0.01);
    link.seasonal_amplitude = 1.0;
    link.seasonal_period = 30.0;
    link.noise_std = 0.02;
    let polls = gen_polls(&link, &table, &subject(), 1, 3).unwrap();
    let daily = interpolate_daily(polls.get(&subject()).unwrap()).unwrap();
    let parts = decompose(&daily, 30).unwrap();
    let cycle = parts.seasonal_cycle();
    let hi = cycle.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = cycle.iter().cloned().fold(f64::INFINITY, f64::min);
    let amplitude = (hi - lo) / 2.0;
    assert!((amplitude - 1.0).abs() < 0.1, "amplitude {amplitude}");
}
