use egoground::geometry::{BBox2D, Point2};
use egoground::schema::{Annotation, HandKeypoints, Sample, Source, Split};
use egoground::scorers::{
    candidate_tokens, estimate_direction, jaccard, mock_verify, query_tokens, DirectionStrategy,
    PURE_DEIXIS_SCORE,
};
use proptest::prelude::*;

const WORDS: [&str; 10] = ["cup", "red", "blue", "this", "the", "bottle", "that", "green", "book", "one"];

fn phrase() -> impl Strategy<Value = String> {
    prop::collection::vec(0usize..WORDS.len(), 0..5)
        .prop_map(|ix| ix.iter().map(|&i| WORDS[i]).collect::<Vec<_>>().join(" "))
}

fn shout(s: &str) -> String {
    s.split(' ')
        .map(|w| format!("{}!", w.to_uppercase()))
        .collect::<Vec<_>>()
        .join("  ")
}

proptest! {
    #[test]
    fn jaccard_is_symmetric_and_bounded(a in phrase(), b in phrase()) {
        let (ta, tb) = (query_tokens(&a), query_tokens(&b));
        let j = jaccard(&ta, &tb);
        prop_assert_eq!(j, jaccard(&tb, &ta));
        prop_assert!((0.0..=1.0).contains(&j));
    }

    #[test]
    fn mock_score_ignores_case_and_punctuation(q in phrase(), cat in phrase(), attr in phrase()) {
        let c = Annotation::object("o", BBox2D::new(0.0, 0.0, 1.0, 1.0), cat).with_attributes(attr);
        let plain = mock_verify(&c, &q).score;
        prop_assert_eq!(plain, mock_verify(&c, &shout(&q)).score);
        prop_assert!((0.0..=1.0).contains(&plain));
        if query_tokens(&q).is_empty() {
            prop_assert_eq!(plain, PURE_DEIXIS_SCORE);
        } else {
            prop_assert_eq!(plain, jaccard(&query_tokens(&q), &candidate_tokens(&c)));
        }
    }

    #[test]
    fn keypoint_direction_is_scale_invariant(
        wx in 0.0..500.0f64, wy in 0.0..500.0f64,
        dx in -100.0..100.0f64, dy in -100.0..100.0f64,
        factor in 0.1..10.0f64,
    ) {
        prop_assume!(dx.hypot(dy) > 1e-3);
        let make = |k: f64| {
            let mut hand = Annotation::hand(BBox2D::new(0.0, 0.0, 10.0, 10.0));
            hand.keypoints = Some(HandKeypoints {
                wrist: Point2::new(wx * k, wy * k),
                fingertip: Point2::new((wx + dx) * k, (wy + dy) * k),
            });
            Sample {
                sample_id: "s".into(),
                image_ref: "s.png".into(),
                width: 1000,
                height: 1000,
                annotations: vec![hand],
                gt_target_ann_id: None,
                gt_direction: None,
                split: Split::Test,
                source: Source::Synthetic,
                question: None,
                negative_referents: vec![],
            }
        };
        let a = estimate_direction(&make(1.0), DirectionStrategy::KeypointHeuristic).unwrap();
        let b = estimate_direction(&make(factor), DirectionStrategy::KeypointHeuristic).unwrap();
        prop_assert!((a.direction.x - b.direction.x).abs() < 1e-9);
        prop_assert!((a.direction.y - b.direction.y).abs() < 1e-9);
        prop_assert!(a.direction.is_unit());
    }
}
