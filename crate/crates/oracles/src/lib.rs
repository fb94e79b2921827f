//! Slow reference implementations for the test suites.
//!
//! Nothing here calls into the geometry or pipeline arithmetic it is used to
//! check; only the plain data types and the mock verifier are shared.

pub mod endpoint;

use egoground::pipeline::GroundingOutcome;
use egoground::scorers::mock_verify;
use egoground::{BBox2D, Ray2D, Sample, Vec2};

fn inside(x: f64, y: f64, b: &BBox2D) -> bool {
    b.x1 <= x && x <= b.x2 && b.y1 <= y && y <= b.y2
}

/// First sampled parameter `t = k * step` in `[0, t_max]` at which the ray
/// point lies in the closed box.
pub fn oracle_ray_hits(ray: &Ray2D, bbox: &BBox2D, t_max: f64, step: f64) -> Option<f64> {
    assert!(step > 0.0, "step must be positive");
    let (ox, oy) = (ray.origin.x, ray.origin.y);
    let (dx, dy) = (ray.direction.x, ray.direction.y);
    let mut k: u64 = 0;
    loop {
        let t = k as f64 * step;
        if t > t_max {
            return None;
        }
        if inside(ox + t * dx, oy + t * dy, bbox) {
            return Some(t);
        }
        k += 1;
    }
}

/// IoU by counting unit cells `[i, i+1) x [j, j+1)`. Coordinates are
/// rounded to integers.
pub fn oracle_pixel_iou(a: &BBox2D, b: &BBox2D) -> f64 {
    let ra = [a.x1, a.y1, a.x2, a.y2].map(|v| v.round() as i64);
    let rb = [b.x1, b.y1, b.x2, b.y2].map(|v| v.round() as i64);
    let covers = |r: &[i64; 4], i: i64, j: i64| r[0] <= i && i < r[2] && r[1] <= j && j < r[3];
    let (mut na, mut nb, mut both) = (0u64, 0u64, 0u64);
    let lo_x = ra[0].min(rb[0]);
    let hi_x = ra[2].max(rb[2]);
    let lo_y = ra[1].min(rb[1]);
    let hi_y = ra[3].max(rb[3]);
    for i in lo_x..hi_x {
        for j in lo_y..hi_y {
            let (ia, ib) = (covers(&ra, i, j), covers(&rb, i, j));
            na += ia as u64;
            nb += ib as u64;
            both += (ia && ib) as u64;
        }
    }
    let union = na + nb - both;
    if union == 0 {
        0.0
    } else {
        both as f64 / union as f64
    }
}

/// Scan step used by [`oracle_resolve`], in pixels.
pub const RESOLVE_STEP: f64 = 0.02;

/// Exhaustive resolution: every non-hand annotation is tested with the
/// sampling ray oracle from the hand-box centre, scored with the mock
/// verifier, and the best score at or above `tau` wins. Ties go to the
/// earlier hit, then the smaller box, then the smaller id.
pub fn oracle_resolve(sample: &Sample, direction: Vec2, query: &str, tau: f64) -> GroundingOutcome {
    let Some(hand) = sample.annotations.iter().find(|a| a.is_hand) else {
        return GroundingOutcome::Reject;
    };
    let len = (direction.x * direction.x + direction.y * direction.y).sqrt();
    if len == 0.0 || !len.is_finite() {
        return GroundingOutcome::Reject;
    }
    let ray = Ray2D {
        origin: Vec2 {
            x: 0.5 * (hand.bbox.x1 + hand.bbox.x2),
            y: 0.5 * (hand.bbox.y1 + hand.bbox.y2),
        },
        direction: Vec2 {
            x: direction.x / len,
            y: direction.y / len,
        },
    };
    let horizon = 2.0 * (sample.width as f64 + sample.height as f64);

    let mut best: Option<(f64, f64, f64, &str, &BBox2D)> = None;
    for ann in sample.annotations.iter().filter(|a| !a.is_hand) {
        let Some(t) = oracle_ray_hits(&ray, &ann.bbox, horizon, RESOLVE_STEP) else {
            continue;
        };
        let score = mock_verify(ann, query).score;
        if score < tau {
            continue;
        }
        let area = (ann.bbox.x2 - ann.bbox.x1) * (ann.bbox.y2 - ann.bbox.y1);
        let better = match best {
            None => true,
            Some((s, bt, ba, id, _)) => {
                score > s
                    || (score == s && t < bt)
                    || (score == s && t == bt && area < ba)
                    || (score == s && t == bt && area == ba && ann.ann_id.as_str() < id)
            }
        };
        if better {
            best = Some((score, t, area, &ann.ann_id, &ann.bbox));
        }
    }
    match best {
        Some((_, _, _, id, bbox)) => GroundingOutcome::Accept {
            ann_id: id.to_string(),
            bbox: *bbox,
        },
        None => GroundingOutcome::Reject,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pixel_iou_examples() {
        let a = BBox2D::new(0.0, 0.0, 10.0, 10.0);
        let b = BBox2D::new(5.0, 0.0, 15.0, 10.0);
        assert_eq!(oracle_pixel_iou(&a, &b), 50.0 / 150.0);
        assert_eq!(oracle_pixel_iou(&a, &a), 1.0);
        assert_eq!(oracle_pixel_iou(&a, &BBox2D::new(20.0, 20.0, 30.0, 30.0)), 0.0);
    }

    #[test]
    fn ray_hits_horizon_and_behind() {
        let ray = Ray2D {
            origin: Vec2 { x: 0.0, y: 0.0 },
            direction: Vec2 { x: 1.0, y: 0.0 },
        };
        let ahead = BBox2D::new(5.0, -1.0, 6.0, 1.0);
        let t = oracle_ray_hits(&ray, &ahead, 100.0, 0.01).unwrap();
        assert!((t - 5.0).abs() <= 0.01);
        assert_eq!(oracle_ray_hits(&ray, &ahead, 4.0, 0.01), None);
        assert_eq!(oracle_ray_hits(&ray, &BBox2D::new(-6.0, -1.0, -5.0, 1.0), 100.0, 0.01), None);
        assert_eq!(oracle_ray_hits(&ray, &BBox2D::new(-1.0, -1.0, 1.0, 1.0), 100.0, 0.01), Some(0.0));
    }
}
