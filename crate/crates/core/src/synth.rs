//! Seeded procedural pointing scenes with constructive ground truth.
//!
//! Every scene is built direction-first: a hand box near the bottom edge,
//! a pointing direction, then (for positive scenes) a target centred on the
//! ray beyond the hand. Distractors are rejection-sampled off the ray, so the
//! set of objects the exact ray hits is `{target}` or empty.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{centroid, ray_box_intersect, BBox2D, Point2, Ray2D, Vec2};
use crate::schema::{
    write_dataset, Annotation, HandKeypoints, Sample, SchemaError, Source, Split,
};

/// Placement attempts per box and per scene layout.
pub const MAX_RETRIES: usize = 100;
/// Upper bound on objects per scene.
pub const MAX_CANDIDATES: usize = 10;
/// Minimum pixel distance between any distractor and the exact ray.
pub const RAY_CLEARANCE: f64 = 2.0;
/// Minimum pixel gap between non-occluding boxes.
pub const BOX_GAP: f64 = 2.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
    #[error("scene {index}: could not place {what} after {MAX_RETRIES} attempts")]
    Infeasible { index: u64, what: &'static str },
    #[error("fixture count must be at least 1")]
    EmptyFixtureSet,
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryEntry {
    pub category: String,
    pub attribute: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub n_candidates_mean: f64,
    pub same_category_rate: f64,
    pub negative_rate: f64,
    /// Standard deviation (radians) of the angular error applied to the
    /// direction stored in each sample.
    pub direction_noise_sigma: f64,
    pub occlusion_rate: f64,
    pub category_pool: Vec<CategoryEntry>,
}

const DEFAULT_POOL: &[(&str, &[&str])] = &[
    ("cup", &["red", "blue", "white"]),
    ("bottle", &["green", "clear"]),
    ("book", &["red", "thick"]),
    ("apple", &["red", "green"]),
    ("bowl", &["white", "wooden"]),
    ("chair", &["wooden", "black"]),
    ("clock", &["round", "black"]),
    ("backpack", &["black", "blue"]),
    ("banana", &["yellow", "ripe"]),
    ("cell phone", &["black", "silver"]),
    ("ball", &["red", "white"]),
    ("bag", &["brown", "paper"]),
    ("can", &["silver", "red"]),
    ("camera", &["black", "old"]),
    ("carrot", &["orange", "long"]),
    ("cat", &["grey", "black"]),
    ("dog", &["brown", "small"]),
    ("flowerpot", &["green", "clay"]),
    ("fork", &["silver", "plastic"]),
    ("frisbee", &["orange", "blue"]),
];

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            width: 640,
            height: 480,
            n_candidates_mean: 2.8,
            same_category_rate: 0.637,
            negative_rate: 0.1415,
            direction_noise_sigma: 0.0,
            occlusion_rate: 0.425,
            category_pool: default_pool(),
        }
    }
}

pub fn default_pool() -> Vec<CategoryEntry> {
    DEFAULT_POOL
        .iter()
        .flat_map(|(c, attrs)| {
            attrs.iter().map(move |a| CategoryEntry {
                category: c.to_string(),
                attribute: a.to_string(),
            })
        })
        .collect()
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        for (name, r) in [
            ("same_category_rate", self.same_category_rate),
            ("negative_rate", self.negative_rate),
            ("occlusion_rate", self.occlusion_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} = {r} not in [0, 1]"));
            }
        }
        if self.width < 64 || self.height < 64 {
            return bad(format!("image {}x{} smaller than 64x64", self.width, self.height));
        }
        if !(1.0..=MAX_CANDIDATES as f64).contains(&self.n_candidates_mean) {
            return bad(format!(
                "n_candidates_mean = {} not in [1, {MAX_CANDIDATES}]",
                self.n_candidates_mean
            ));
        }
        if !self.direction_noise_sigma.is_finite() || self.direction_noise_sigma < 0.0 {
            return bad(format!("direction_noise_sigma = {}", self.direction_noise_sigma));
        }
        let categories: BTreeSet<&str> =
            self.category_pool.iter().map(|e| e.category.as_str()).collect();
        if categories.len() < MAX_CANDIDATES {
            return bad(format!(
                "category_pool needs at least {MAX_CANDIDATES} distinct categories, has {}",
                categories.len()
            ));
        }
        if self
            .category_pool
            .iter()
            .any(|e| e.category.trim().is_empty() || e.attribute.trim().is_empty())
        {
            return bad("category_pool entries need a category and an attribute".into());
        }
        Ok(())
    }
}

/// How a scene was built; written to the `.gt` sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Construction {
    pub negative: bool,
    pub target_ann_id: Option<String>,
    /// Exact-ray parameter of the target centre.
    pub target_t: Option<f64>,
    pub hand_exit_t: f64,
    /// Direction stored on the sample (true direction plus noise).
    pub observed_direction: [f64; 2],
    pub noise_angle: f64,
    pub same_category: bool,
    pub occluded: bool,
    pub n_candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarEntry {
    /// Direction the scene was constructed with.
    pub direction: [f64; 2],
    pub construction: Construction,
}

pub type Sidecar = BTreeMap<String, SidecarEntry>;

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScene {
    pub sample: Sample,
    pub true_direction: Vec2,
    pub construction: Construction,
}

struct Placed {
    category: CategoryEntry,
    bbox: BBox2D,
    is_target: bool,
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn scene_rngs(seed: u64, index: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut layout = ChaCha8Rng::seed_from_u64(seed);
    layout.set_stream(index.wrapping_mul(2));
    let mut noise = ChaCha8Rng::seed_from_u64(seed);
    noise.set_stream(index.wrapping_mul(2).wrapping_add(1));
    (layout, noise)
}

/// Generates scene `index` of the stream defined by `config.seed`.
pub fn generate_scene(config: &SceneConfig, index: u64) -> Result<GeneratedScene, SynthError> {
    config.validate()?;
    let (mut rng, mut noise_rng) = scene_rngs(config.seed, index);
    let (w, h) = (f64::from(config.width), f64::from(config.height));

    let negative = rng.random_bool(config.negative_rate);
    let same_category = rng.random_bool(config.same_category_rate);
    let base = if same_category { 2 } else { 1 };
    let lambda = (config.n_candidates_mean - 1.0 - config.same_category_rate).max(0.0);
    let extra = if lambda > 0.0 {
        Poisson::new(lambda).map(|p| p.sample(&mut rng) as usize).unwrap_or(0)
    } else {
        0
    };
    let n_candidates = (base + extra).min(MAX_CANDIDATES);

    let categories = pick_categories(&mut rng, &config.category_pool, n_candidates, same_category);

    let mut layout = None;
    for _ in 0..MAX_RETRIES {
        if let Some(l) = try_layout(&mut rng, w, h, negative, &categories, config.occlusion_rate) {
            layout = Some(l);
            break;
        }
    }
    let Layout {
        hand,
        direction,
        hand_exit_t,
        target_t,
        objects,
        occluded,
    } = layout.ok_or(SynthError::Infeasible {
        index,
        what: "scene layout",
    })?;

    let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(&mut noise_rng);
    let noise_angle = config.direction_noise_sigma * z;
    let observed = direction.rotated(noise_angle);

    let mut order: Vec<usize> = (0..objects.len()).collect();
    order.shuffle(&mut rng);
    let mut annotations = Vec::with_capacity(objects.len() + 1);
    let mut hand_ann = Annotation::hand(hand);
    let c = centroid(&hand);
    let reach = hand.height() / 4.0;
    hand_ann.keypoints = Some(HandKeypoints {
        wrist: c - observed * reach,
        fingertip: c + observed * reach,
    });
    annotations.push(hand_ann);
    let mut target_ann_id = None;
    for (slot, &i) in order.iter().enumerate() {
        let o = &objects[i];
        let ann_id = format!("obj_{slot}");
        let mut a = Annotation::object(&ann_id, o.bbox, &o.category.category)
            .with_attributes(&o.category.attribute);
        if o.is_target {
            let c = &o.category;
            a = a.with_referents([
                format!("this {}", c.category),
                format!("that {} {}", c.attribute, c.category),
                "this one".to_string(),
            ]);
            target_ann_id = Some(ann_id);
        }
        annotations.push(a);
    }
    let negative_referents = if negative {
        let pick = &objects[rng.random_range(0..objects.len())];
        vec![format!("this {}", pick.category.category)]
    } else {
        Vec::new()
    };
    let split = match rng.random_range(0..10) {
        0..=6 => Split::Train,
        7..=8 => Split::Val,
        _ => Split::Test,
    };

    let sample_id = format!("synth_{}_{index:06}", config.seed);
    let sample = Sample {
        image_ref: format!("{sample_id}.png"),
        sample_id,
        width: config.width,
        height: config.height,
        annotations,
        gt_target_ann_id: target_ann_id.clone(),
        gt_direction: Some(observed),
        split,
        source: Source::Synthetic,
        question: None,
        negative_referents,
    };
    Ok(GeneratedScene {
        sample,
        true_direction: direction,
        construction: Construction {
            negative,
            target_ann_id,
            target_t,
            hand_exit_t,
            observed_direction: observed.into(),
            noise_angle,
            same_category,
            occluded,
            n_candidates: objects.len(),
        },
    })
}

/// Categories for `n` objects. The first entry is the target's (for
/// positive scenes). With `same_category`, entry 1 repeats entry 0's
/// category; all other categories are distinct.
fn pick_categories(
    rng: &mut ChaCha8Rng,
    pool: &[CategoryEntry],
    n: usize,
    same_category: bool,
) -> Vec<CategoryEntry> {
    let mut by_cat: BTreeMap<&str, Vec<&CategoryEntry>> = BTreeMap::new();
    for e in pool {
        by_cat.entry(e.category.as_str()).or_default().push(e);
    }
    let mut cats: Vec<&str> = by_cat.keys().copied().collect();
    cats.shuffle(rng);
    let distinct = if same_category { n - 1 } else { n };
    let mut out: Vec<CategoryEntry> = cats[..distinct]
        .iter()
        .map(|c| {
            let options = &by_cat[c];
            options[rng.random_range(0..options.len())].clone()
        })
        .collect();
    if same_category {
        let first = out[0].clone();
        let options = &by_cat[first.category.as_str()];
        let others: Vec<&&CategoryEntry> =
            options.iter().filter(|e| e.attribute != first.attribute).collect();
        let twin = if others.is_empty() {
            first.clone()
        } else {
            (*others[rng.random_range(0..others.len())]).clone()
        };
        out.insert(1, twin);
    }
    out
}

struct Layout {
    hand: BBox2D,
    direction: Vec2,
    hand_exit_t: f64,
    target_t: Option<f64>,
    objects: Vec<Placed>,
    occluded: bool,
}

fn try_layout(
    rng: &mut ChaCha8Rng,
    w: f64,
    h: f64,
    negative: bool,
    categories: &[CategoryEntry],
    occlusion_rate: f64,
) -> Option<Layout> {
    let frame = BBox2D::new(0.0, 0.0, w, h);
    let hw = uniform(rng, 0.12 * w, 0.2 * w);
    let hh = uniform(rng, 0.15 * h, 0.25 * h);
    let hx1 = uniform(rng, 0.1 * w, 0.9 * w - hw);
    let hy2 = h - uniform(rng, 0.0, 0.05 * h);
    let hand = BBox2D::new(hx1, hy2 - hh, hx1 + hw, hy2);

    // Upward-pointing direction in screen coordinates (y grows downwards).
    let phi = uniform(rng, 30f64.to_radians(), 150f64.to_radians());
    let direction = Vec2::new(phi.cos(), -phi.sin());
    let ray = Ray2D::new(centroid(&hand), direction).ok()?;
    let hand_exit_t = ray_box_intersect(&ray, &hand)?.t_exit;
    let frame_exit_t = ray_box_intersect(&ray, &frame)?.t_exit;

    let mut objects: Vec<Placed> = Vec::with_capacity(categories.len());
    let mut target_t = None;
    let mut rest = categories;
    if !negative {
        let (t, bbox) = place_target(rng, &ray, &hand, &frame, hand_exit_t, frame_exit_t)?;
        target_t = Some(t);
        objects.push(Placed {
            category: categories[0].clone(),
            bbox,
            is_target: true,
        });
        rest = &categories[1..];
    }

    let mut occluded = false;
    for (i, cat) in rest.iter().enumerate() {
        let want_occluder = i == 0 && !negative && rng.random_bool(occlusion_rate);
        let mut bbox = None;
        if want_occluder {
            bbox = place_occluder(rng, &ray, &hand, &frame, &objects);
            occluded = bbox.is_some();
        }
        let bbox = match bbox {
            Some(b) => b,
            None => place_distractor(rng, &ray, &hand, &frame, &objects)?,
        };
        objects.push(Placed {
            category: cat.clone(),
            bbox,
            is_target: false,
        });
    }
    Some(Layout {
        hand,
        direction,
        hand_exit_t,
        target_t,
        objects,
        occluded,
    })
}

fn object_size(rng: &mut ChaCha8Rng, frame: &BBox2D) -> (f64, f64) {
    (
        uniform(rng, 0.07 * frame.width(), 0.16 * frame.width()),
        uniform(rng, 0.07 * frame.height(), 0.16 * frame.height()),
    )
}

fn inside(b: &BBox2D, frame: &BBox2D) -> bool {
    b.x1 >= frame.x1 && b.y1 >= frame.y1 && b.x2 <= frame.x2 && b.y2 <= frame.y2
}

fn place_target(
    rng: &mut ChaCha8Rng,
    ray: &Ray2D,
    hand: &BBox2D,
    frame: &BBox2D,
    hand_exit_t: f64,
    frame_exit_t: f64,
) -> Option<(f64, BBox2D)> {
    for _ in 0..MAX_RETRIES {
        let (tw, th) = object_size(rng, frame);
        let half_diag = tw.hypot(th) / 2.0;
        let t = uniform(rng, hand_exit_t + half_diag + BOX_GAP, frame_exit_t - half_diag);
        let c: Point2 = ray.at(t);
        let b = BBox2D::new(c.x - tw / 2.0, c.y - th / 2.0, c.x + tw / 2.0, c.y + th / 2.0);
        if inside(&b, frame) && !b.overlaps(&hand.inflated(BOX_GAP)) {
            return Some((t, b));
        }
    }
    None
}

fn off_ray(ray: &Ray2D, b: &BBox2D) -> bool {
    ray_box_intersect(ray, &b.inflated(RAY_CLEARANCE)).is_none()
}

fn place_distractor(
    rng: &mut ChaCha8Rng,
    ray: &Ray2D,
    hand: &BBox2D,
    frame: &BBox2D,
    placed: &[Placed],
) -> Option<BBox2D> {
    for _ in 0..MAX_RETRIES {
        let (bw, bh) = object_size(rng, frame);
        let x1 = uniform(rng, 0.0, frame.x2 - bw);
        let y1 = uniform(rng, 0.0, frame.y2 - bh);
        let b = BBox2D::new(x1, y1, x1 + bw, y1 + bh);
        let grown = b.inflated(BOX_GAP);
        if off_ray(ray, &b)
            && !grown.overlaps(hand)
            && placed.iter().all(|p| !grown.overlaps(&p.bbox))
        {
            return Some(b);
        }
    }
    None
}

/// A distractor overlapping 10-50% of the target's area while staying off
/// the ray.
fn place_occluder(
    rng: &mut ChaCha8Rng,
    ray: &Ray2D,
    hand: &BBox2D,
    frame: &BBox2D,
    placed: &[Placed],
) -> Option<BBox2D> {
    let target = placed.iter().find(|p| p.is_target)?.bbox;
    for _ in 0..MAX_RETRIES {
        let (bw, bh) = object_size(rng, frame);
        let cx = uniform(rng, target.x1 - bw / 2.0, target.x2 + bw / 2.0);
        let cy = uniform(rng, target.y1 - bh / 2.0, target.y2 + bh / 2.0);
        let b = BBox2D::new(cx - bw / 2.0, cy - bh / 2.0, cx + bw / 2.0, cy + bh / 2.0);
        let iw = (b.x2.min(target.x2) - b.x1.max(target.x1)).max(0.0);
        let ih = (b.y2.min(target.y2) - b.y1.max(target.y1)).max(0.0);
        let frac = iw * ih / target.area();
        let grown = b.inflated(BOX_GAP);
        if (0.1..=0.5).contains(&frac)
            && inside(&b, frame)
            && off_ray(ray, &b)
            && !grown.overlaps(hand)
            && placed
                .iter()
                .filter(|p| !p.is_target)
                .all(|p| !grown.overlaps(&p.bbox))
        {
            return Some(b);
        }
    }
    None
}

/// Summary statistics of a fixture set, computed from the samples alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureStats {
    pub count: usize,
    pub negatives: usize,
    pub negative_rate: f64,
    pub mean_candidates: f64,
    /// Fraction of samples with two or more objects of one category.
    pub same_category_rate: f64,
}

pub fn fixture_stats<S: AsRef<Sample>>(samples: &[S]) -> FixtureStats {
    let count = samples.len();
    let mut negatives = 0;
    let mut candidates = 0;
    let mut same = 0;
    for s in samples {
        let s = s.as_ref();
        negatives += usize::from(s.is_negative());
        let mut seen = BTreeSet::new();
        let mut dup = false;
        for o in s.objects() {
            candidates += 1;
            dup |= !seen.insert(o.category_name.as_str());
        }
        same += usize::from(dup);
    }
    let n = count.max(1) as f64;
    FixtureStats {
        count,
        negatives,
        negative_rate: negatives as f64 / n,
        mean_candidates: candidates as f64 / n,
        same_category_rate: same as f64 / n,
    }
}

/// Generates scenes `0..count`.
pub fn generate_scenes(config: &SceneConfig, count: usize) -> Result<Vec<GeneratedScene>, SynthError> {
    if count == 0 {
        return Err(SynthError::EmptyFixtureSet);
    }
    (0..count as u64).map(|i| generate_scene(config, i)).collect()
}

/// Sidecar path for a dataset path: same stem, `.gt` extension.
pub fn sidecar_path(dataset: &Path) -> PathBuf {
    dataset.with_extension("gt")
}

#[derive(Debug, Clone)]
pub struct FixtureSet {
    pub dataset_path: PathBuf,
    pub sidecar_path: PathBuf,
    pub stats: FixtureStats,
}

/// Writes `count` scenes as a dataset document plus a `.gt` sidecar.
pub fn generate_fixture_set(
    config: &SceneConfig,
    count: usize,
    dataset_path: &Path,
) -> Result<FixtureSet, SynthError> {
    let scenes = generate_scenes(config, count)?;
    if let Some(parent) = dataset_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|source| SynthError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    let samples: Vec<Sample> = scenes.iter().map(|s| s.sample.clone()).collect();
    write_dataset(dataset_path, &samples)?;
    let sidecar: Sidecar = scenes
        .iter()
        .map(|s| {
            (
                s.sample.sample_id.clone(),
                SidecarEntry {
                    direction: s.true_direction.into(),
                    construction: s.construction.clone(),
                },
            )
        })
        .collect();
    let sidecar_path = sidecar_path(dataset_path);
    let text = serde_json::to_string_pretty(&sidecar).map_err(SchemaError::from)?;
    fs::write(&sidecar_path, text).map_err(|source| SynthError::Io {
        path: sidecar_path.clone(),
        source,
    })?;
    Ok(FixtureSet {
        dataset_path: dataset_path.to_path_buf(),
        sidecar_path,
        stats: fixture_stats(&samples),
    })
}

pub fn load_sidecar(path: &Path) -> Result<Sidecar, SynthError> {
    let text = fs::read_to_string(path).map_err(|source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(serde_json::from_str(&text).map_err(SchemaError::from)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(seed: u64) -> SceneConfig {
        SceneConfig {
            seed,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn deterministic_per_seed_and_index() {
        let a = generate_scene(&cfg(7), 0).unwrap();
        let b = generate_scene(&cfg(7), 0).unwrap();
        assert_eq!(
            serde_json::to_string(&a.sample).unwrap(),
            serde_json::to_string(&b.sample).unwrap()
        );
        let c = generate_scene(&cfg(7), 1).unwrap();
        assert_ne!(a.sample, c.sample);
    }

    #[test]
    fn exact_ray_hits_only_the_target() {
        for i in 0..300 {
            let s = generate_scene(&cfg(3), i).unwrap();
            let hand = s.sample.hand().unwrap();
            let ray = Ray2D::new(centroid(&hand.bbox), s.true_direction).unwrap();
            let hits: Vec<&str> = s
                .sample
                .objects()
                .filter(|o| ray_box_intersect(&ray, &o.bbox).is_some())
                .map(|o| o.ann_id.as_str())
                .collect();
            match &s.sample.gt_target_ann_id {
                Some(t) => {
                    assert_eq!(hits, [t.as_str()], "scene {i}");
                    let hit = ray_box_intersect(&ray, &s.sample.target().unwrap().bbox).unwrap();
                    assert!(hit.t_entry > s.construction.hand_exit_t);
                }
                None => assert!(hits.is_empty(), "scene {i}"),
            }
        }
    }

    #[test]
    fn noise_only_rotates_the_stored_direction() {
        let quiet = generate_scene(&cfg(5), 4).unwrap();
        let noisy = generate_scene(
            &SceneConfig {
                direction_noise_sigma: 0.2,
                ..cfg(5)
            },
            4,
        )
        .unwrap();
        assert_eq!(quiet.true_direction, noisy.true_direction);
        let boxes = |s: &GeneratedScene| s.sample.annotations.iter().map(|a| a.bbox).collect::<Vec<_>>();
        assert_eq!(boxes(&quiet), boxes(&noisy));
        assert_ne!(quiet.sample.gt_direction, noisy.sample.gt_direction);
        assert!(noisy.sample.gt_direction.unwrap().is_unit());
    }

    #[test]
    fn referents_follow_the_target() {
        let s = (0..50)
            .map(|i| generate_scene(&cfg(1), i).unwrap())
            .find(|s| !s.construction.negative)
            .unwrap();
        let t = s.sample.target().unwrap();
        let cat = &t.category_name;
        let attr = t.attributes.as_deref().unwrap();
        assert_eq!(
            t.underspecified_referents,
            [format!("this {cat}"), format!("that {attr} {cat}"), "this one".into()]
        );
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            SceneConfig { negative_rate: 1.5, ..cfg(0) },
            SceneConfig { width: 32, ..cfg(0) },
            SceneConfig { n_candidates_mean: 0.5, ..cfg(0) },
            SceneConfig { category_pool: default_pool()[..4].to_vec(), ..cfg(0) },
        ];
        for c in bad {
            assert!(matches!(generate_scene(&c, 0), Err(SynthError::InvalidConfig(_))));
        }
    }

    #[test]
    fn zero_count_is_an_error() {
        assert!(matches!(generate_scenes(&cfg(0), 0), Err(SynthError::EmptyFixtureSet)));
    }

    #[test]
    fn stats_count_duplicates() {
        let scenes = generate_scenes(&cfg(2), 200).unwrap();
        for s in &scenes {
            let st = fixture_stats(std::slice::from_ref(&s.sample));
            assert_eq!(st.same_category_rate == 1.0, s.construction.same_category);
            assert_eq!(st.mean_candidates as usize, s.construction.n_candidates);
        }
    }
}
