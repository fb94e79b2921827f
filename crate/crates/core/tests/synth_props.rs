use std::collections::BTreeSet;
use std::fs;
use std::sync::Arc;

use egoground::geometry::{centroid, ray_box_intersect, Ray2D};
use egoground::schema::{expand_cases, load_dataset, split_dataset, CaseEntry, SplitMode, TaskKind};
use egoground::synth::{generate_fixture_set, generate_scene, load_sidecar, SceneConfig};
use proptest::prelude::*;

fn config(seed: u64, sigma: f64) -> SceneConfig {
    SceneConfig {
        seed,
        direction_noise_sigma: sigma,
        ..SceneConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn true_ray_hits_exactly_the_target(seed in 0u64..1000, index in 0u64..10_000) {
        let scene = generate_scene(&config(seed, 0.0), index).unwrap();
        let s = &scene.sample;
        let hand = s.hand().unwrap();
        let ray = Ray2D::new(centroid(&hand.bbox), scene.true_direction).unwrap();
        let hit: BTreeSet<&str> = s
            .objects()
            .filter(|a| ray_box_intersect(&ray, &a.bbox).is_some())
            .map(|a| a.ann_id.as_str())
            .collect();
        let want: BTreeSet<&str> = s.gt_target_ann_id.iter().map(String::as_str).collect();
        prop_assert_eq!(hit, want);
        prop_assert_eq!(scene.construction.negative, s.is_negative());
    }

    #[test]
    fn noise_moves_only_the_stored_direction(seed in 0u64..1000, index in 0u64..10_000, sigma in 0.01..0.3f64) {
        let clean = generate_scene(&config(seed, 0.0), index).unwrap();
        let noisy = generate_scene(&config(seed, sigma), index).unwrap();
        let strip = |s: &egoground::Sample| {
            let mut a = s.annotations.clone();
            a.iter_mut().for_each(|x| x.keypoints = None);
            a
        };
        prop_assert_eq!(strip(&clean.sample), strip(&noisy.sample));
        prop_assert_eq!(clean.true_direction, noisy.true_direction);
        let d = noisy.sample.gt_direction.unwrap();
        let angle = (d.x * clean.true_direction.y - d.y * clean.true_direction.x)
            .atan2(d.x * clean.true_direction.x + d.y * clean.true_direction.y);
        prop_assert!((angle.abs() - noisy.construction.noise_angle.abs()).abs() < 1e-9);
    }

    #[test]
    fn edg_expansion_counts_referents(seed in 0u64..500) {
        let samples: Vec<_> = (0..12)
            .map(|i| Arc::new(generate_scene(&config(seed, 0.0), i).unwrap().sample))
            .collect();
        let exp = expand_cases(&samples, TaskKind::Edg);
        let expected: usize = samples
            .iter()
            .map(|s| match s.target() {
                Some(t) => t.underspecified_referents.len(),
                None => s.negative_referents.len().max(1),
            })
            .sum();
        prop_assert_eq!(exp.len(), expected);
        for e in &exp.entries {
            if let CaseEntry::Case(c) = e {
                prop_assert!(samples.iter().any(|s| Arc::ptr_eq(s, &c.sample)));
            }
        }
    }

    #[test]
    fn splits_partition_the_input(seed in 0u64..500, n in 1usize..60) {
        let samples: Vec<_> = (0..n as u64)
            .map(|i| generate_scene(&config(1, 0.0), i).unwrap().sample)
            .collect();
        for mode in [SplitMode::Mixed, SplitMode::DomainAdaptive] {
            let sets = split_dataset(&samples, mode, seed).unwrap();
            let mut ids: Vec<&str> = sets
                .train
                .iter()
                .chain(&sets.val)
                .chain(&sets.test)
                .map(|s| s.sample_id.as_str())
                .collect();
            ids.sort();
            let mut all: Vec<&str> = samples.iter().map(|s| s.sample_id.as_str()).collect();
            all.sort();
            prop_assert_eq!(ids, all);
        }
    }
}

#[test]
fn fixture_files_are_reproducible_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate_fixture_set(&config(77, 0.1), 40, &dir.path().join("a/set.json")).unwrap();
    let b = generate_fixture_set(&config(77, 0.1), 40, &dir.path().join("b/set.json")).unwrap();
    assert_eq!(fs::read(&a.dataset_path).unwrap(), fs::read(&b.dataset_path).unwrap());
    assert_eq!(fs::read(&a.sidecar_path).unwrap(), fs::read(&b.sidecar_path).unwrap());

    let loaded = load_dataset(&a.dataset_path).unwrap();
    assert_eq!(loaded.samples.len(), 40);
    assert!(loaded.issues.is_empty());
    let sidecar = load_sidecar(&a.sidecar_path).unwrap();
    assert_eq!(sidecar.len(), 40);
    for s in &loaded.samples {
        let entry = &sidecar[&s.sample_id];
        assert_eq!(entry.construction.target_ann_id, s.gt_target_ann_id);
    }
}
