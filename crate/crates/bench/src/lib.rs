//! Shared inputs for the benchmarks.

use std::sync::Arc;

use egoground::schema::{expand_cases, Sample, TaskKind, TestCase};
use egoground::synth::{generate_scenes, SceneConfig};
use egoground::{BBox2D, Point2, Ray2D, Vec2};

/// Default-config scenes with mild direction noise.
pub fn scenes(count: usize) -> Vec<Arc<Sample>> {
    let config = SceneConfig {
        seed: 42,
        direction_noise_sigma: 0.05,
        ..SceneConfig::default()
    };
    generate_scenes(&config, count)
        .expect("default scene config generates")
        .into_iter()
        .map(|s| Arc::new(s.sample))
        .collect()
}

pub fn edg_cases(samples: &[Arc<Sample>]) -> Vec<TestCase> {
    expand_cases(samples, TaskKind::Edg).cases().cloned().collect()
}

/// A fan of rays from one origin and a grid of boxes around it.
pub fn rays_and_boxes(n: usize) -> (Vec<Ray2D>, Vec<BBox2D>) {
    let rays = (0..n)
        .map(|i| {
            let a = i as f64 * std::f64::consts::TAU / n as f64;
            Ray2D::new(Point2::new(500.0, 500.0), Vec2::new(a.cos(), a.sin())).expect("unit direction")
        })
        .collect();
    let boxes = (0..n)
        .map(|i| {
            let (x, y) = ((i * 37 % 900) as f64, (i * 53 % 900) as f64);
            BBox2D::new(x, y, x + 40.0 + (i % 7) as f64 * 10.0, y + 30.0 + (i % 5) as f64 * 12.0)
        })
        .collect();
    (rays, boxes)
}

pub const MODEL_OUTPUTS: [&str; 4] = [
    r#"{"bbox_2d": [120, 80, 460, 520]}"#,
    "The cup is at [10, 20, 300, 400].",
    "I am not sure which object you mean, the hand is ambiguous here.",
    r#"Sure! ```json
{"label": "bottle", "bbox_2d": [0.12, 0.4, 0.33, 0.9]}
``` and also [1, 2, 3, 4]"#,
];
