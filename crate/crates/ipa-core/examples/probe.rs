use ipa_core::config::{EnvConfig, SimParams};
use ipa_core::profile::cast_profile;
use ipa_core::sim::run_episode;
use std::time::Instant;

fn main() {
    let cfg = EnvConfig::default();
    let params = SimParams::default();
    for vel in [1.0, 3.0, 6.28] {
        let action = cast_profile(vel).unwrap();
        let t0 = Instant::now();
        let mut steps = 0.0;
        for _ in 0..50 {
            let ep = run_episode(&cfg, &action, &params).unwrap();
            steps += ep.duration / params.dt;
        }
        let dt = t0.elapsed().as_secs_f64();
        println!("vel={vel}: {:.1} ms/episode, {:.0} steps/ep, {:.2} us/step",
            dt / 50.0 * 1e3, steps / 50.0, dt / steps * 1e6);
    }
}
