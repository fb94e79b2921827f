use egoground::synth::{fixture_stats, generate_scenes, SceneConfig};

#[test]
fn default_statistics_track_targets() {
    let scenes = generate_scenes(&SceneConfig { seed: 11, ..SceneConfig::default() }, 10_000).unwrap();
    let samples: Vec<_> = scenes.iter().map(|s| s.sample.clone()).collect();
    let st = fixture_stats(&samples);
    println!("{st:?}");
    let occ = scenes.iter().filter(|s| s.construction.occluded).count() as f64
        / scenes.iter().filter(|s| !s.construction.negative).count() as f64;
    println!("occluded {occ}");
    assert!((st.negative_rate - 0.1415).abs() <= 0.02);
    assert!((st.mean_candidates - 2.8).abs() <= 0.2);
    assert!((st.same_category_rate - 0.637).abs() <= 0.03);
}
