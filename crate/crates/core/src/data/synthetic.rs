//! Generated pedestrian corpora for tests and offline experiments.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::parse::{RawTrack, TrackPoint};
use crate::diffcore::rng::stream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub tracks: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Walking speed range in m/s.
    pub speed: (f64, f64),
    /// Peak turn rate in rad/s; zero gives straight lines.
    pub max_turn_rate: f64,
    /// Std of Gaussian position jitter in meters.
    pub noise: f64,
    pub dt: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            tracks: 120,
            min_len: 20,
            max_len: 45,
            speed: (0.8, 1.6),
            max_turn_rate: 0.35,
            noise: 0.02,
            dt: 0.4,
            seed: 0,
        }
    }
}

/// Straight constant-velocity walkers with no jitter.
pub fn constant_velocity_corpus(cfg: &SyntheticConfig) -> Vec<RawTrack> {
    curvilinear_corpus(&SyntheticConfig { max_turn_rate: 0.0, noise: 0.0, ..*cfg })
}

/// Walkers whose heading drifts with a slowly varying turn rate, plus position jitter.
pub fn curvilinear_corpus(cfg: &SyntheticConfig) -> Vec<RawTrack> {
    (0..cfg.tracks)
        .map(|i| {
            let mut rng = stream(cfg.seed, &[0xC0, i as u64]);
            let len = rng.random_range(cfg.min_len..=cfg.max_len.max(cfg.min_len));
            let speed = rng.random_range(cfg.speed.0..=cfg.speed.1);
            let mut heading = rng.random_range(0.0..std::f64::consts::TAU);
            let (amp, freq, phase) = if cfg.max_turn_rate > 0.0 {
                (
                    rng.random_range(-cfg.max_turn_rate..cfg.max_turn_rate),
                    rng.random_range(0.05..0.3),
                    rng.random_range(0.0..std::f64::consts::TAU),
                )
            } else {
                (0.0, 0.0, 0.0)
            };
            let (mut x, mut y) = (rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
            let jitter = Normal::new(0.0, cfg.noise.max(0.0)).expect("finite noise level");
            let samples = (0..len)
                .map(|t| {
                    let p = TrackPoint {
                        frame: t as i64 * 10,
                        x: x + jitter.sample(&mut rng),
                        y: y + jitter.sample(&mut rng),
                    };
                    let time = t as f64 * cfg.dt;
                    heading += amp * (freq * time + phase).cos() * cfg.dt;
                    x += speed * heading.cos() * cfg.dt;
                    y += speed * heading.sin() * cfg.dt;
                    p
                })
                .collect();
            RawTrack { pedestrian_id: i as i64 + 1, samples }
        })
        .collect()
}
