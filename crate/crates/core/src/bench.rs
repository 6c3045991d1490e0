//! View-budget benchmark: how well does a detector trained from the views a
//! strategy picks recognise objects seen from elsewhere?
//!
//! For every (strategy, budget, seed) cell a fresh registry is trained on the
//! selected views of every corpus object (via the augmenter) and tested on
//! renders from a second, rotated lattice of viewpoints that never coincides
//! with a training viewpoint. Captures, scores, training features and test
//! proposals are computed once per (object, view) and shared by all cells.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io;
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augmenter::{build_training_set, AugmentError};
use crate::capture::{capture_pose, capture_view};
use crate::derive_seed;
use crate::detector::{extract_features, DetectorBackend, FeatureVector, Registry};
use crate::explorer::{explore, SceneEvaluator, ScoreTable, ViewEvaluator};
use crate::gov::{evaluate_gov, GovScore};
use crate::par;
use crate::renderer::mesh::{
    make_box_with, make_cylinder_with, make_gear_like_with, make_shaft_with, ColorScheme, GearParams, ShaftParams,
};
use crate::renderer::SceneSpec;
use crate::segmenter::extract_object_masks;
use crate::store::Config;
use crate::viewsphere::{angle_between, CameraPose, ViewSphere, DEFAULT_UP};
use crate::Vec3;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("benchmark needs a non-empty {0}")]
    Empty(&'static str),
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("unknown strategy `{0}` (expected random, olive or oracle-greedy)")]
    UnknownStrategy(String),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Sphere(#[from] crate::viewsphere::SphereError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Procedural part families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartKind {
    Gear,
    Shaft,
    Box,
    Cylinder,
}

impl PartKind {
    pub const ALL: [PartKind; 4] = [PartKind::Gear, PartKind::Shaft, PartKind::Box, PartKind::Cylinder];

    pub fn name(self) -> &'static str {
        match self {
            PartKind::Gear => "gear",
            PartKind::Shaft => "shaft",
            PartKind::Box => "box",
            PartKind::Cylinder => "cylinder",
        }
    }
}

/// Colour scheme of object `i` of `n`: primary hues evenly spaced around
/// the wheel, secondary 150° further on.
pub fn corpus_scheme(i: usize, n: usize) -> ColorScheme {
    let hue = 360.0 * i as f64 / n.max(1) as f64;
    ColorScheme::from_hues(hue, hue + 150.0)
}

/// `n` single-object scenes mixing the four part families (shuffled, equal
/// shares) with shuffled distinct colour schemes. Objects are named
/// `<kind>-<ii>`, fit in a 120 mm cube and depend only on `seed`.
pub fn generate_corpus(n: usize, seed: u64) -> Vec<SceneSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kinds: Vec<PartKind> = (0..n).map(|i| PartKind::ALL[i % 4]).collect();
    for i in (1..kinds.len()).rev() {
        let j = rng.random_range(0..=i);
        kinds.swap(i, j);
    }
    let mut schemes: Vec<usize> = (0..n).collect();
    for i in (1..schemes.len()).rev() {
        let j = rng.random_range(0..=i);
        schemes.swap(i, j);
    }
    kinds
        .iter()
        .zip(&schemes)
        .enumerate()
        .map(|(i, (&kind, &s))| {
            let scheme = corpus_scheme(s, n);
            let mesh = match kind {
                PartKind::Gear => {
                    let root = rng.random_range(25.0..40.0);
                    let params = GearParams {
                        teeth: rng.random_range(6..=12),
                        root_radius: root,
                        tip_radius: root + rng.random_range(6.0..14.0),
                        thickness: rng.random_range(10.0..30.0),
                    };
                    make_gear_like_with(&params, &scheme)
                }
                PartKind::Shaft => {
                    let count = rng.random_range(2..=4);
                    let segments = (0..count)
                        .map(|_| (rng.random_range(8.0..24.0), rng.random_range(15.0..30.0)))
                        .collect();
                    make_shaft_with(&ShaftParams { segments, sides: 16 }, &scheme)
                }
                PartKind::Box => make_box_with(
                    [
                        rng.random_range(30.0..100.0),
                        rng.random_range(30.0..100.0),
                        rng.random_range(15.0..70.0),
                    ],
                    &scheme,
                ),
                PartKind::Cylinder => {
                    let segments = rng.random_range(12..=24);
                    make_cylinder_with(
                        rng.random_range(15.0..45.0),
                        rng.random_range(20.0..90.0),
                        segments,
                        &scheme,
                    )
                }
            }
            .expect("generated parameters are in range");
            SceneSpec::single(format!("{}-{i:02}", kind.name()), mesh)
        })
        .collect()
}

/// Strategy family, as named on the command line and in CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Random,
    Olive,
    OracleGreedy,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::Olive => "olive",
            StrategyKind::OracleGreedy => "oracle-greedy",
        }
    }

    pub fn with_seed(self, seed: u64) -> Strategy {
        match self {
            StrategyKind::Random => Strategy::Random(seed),
            StrategyKind::Olive => Strategy::Olive,
            StrategyKind::OracleGreedy => Strategy::OracleGreedy,
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "random" => Ok(StrategyKind::Random),
            "olive" => Ok(StrategyKind::Olive),
            "oracle-greedy" | "oracle_greedy" | "oraclegreedy" | "oracle" => Ok(StrategyKind::OracleGreedy),
            other => Err(BenchError::UnknownStrategy(other.to_string())),
        }
    }
}

/// Viewpoint-selection strategy. `OracleGreedy` scores every view and keeps
/// the global top; it is an upper-bound reference, not a practical method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Random(u64),
    Olive,
    OracleGreedy,
}

impl Strategy {
    pub fn kind(self) -> StrategyKind {
        match self {
            Strategy::Random(_) => StrategyKind::Random,
            Strategy::Olive => StrategyKind::Olive,
            Strategy::OracleGreedy => StrategyKind::OracleGreedy,
        }
    }
}

/// Select views given every view's score. Only `Olive` and `OracleGreedy`
/// read the scores; Olive reads only the ones its trajectory visits.
pub fn select_from_scores(
    strategy: Strategy,
    sphere: &ViewSphere,
    scores: &ScoreTable,
    budget: usize,
    start_view: usize,
) -> Result<Vec<usize>, BenchError> {
    if budget == 0 {
        return Err(BenchError::ZeroBudget);
    }
    let n = sphere.len();
    let b = budget.min(n);
    Ok(match strategy {
        Strategy::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample(&mut rng, n, b).into_vec()
        }
        Strategy::Olive => {
            let state = explore(sphere, scores.clone(), b, start_view.min(n - 1)).expect("budget and start are valid");
            state.visited_indices()
        }
        Strategy::OracleGreedy => top_views(&scores.0, b),
    })
}

/// Indices of the `k` highest combined scores, best first, lower index on ties.
pub fn top_views(scores: &[GovScore], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].combined.total_cmp(&scores[a].combined).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Select views on a live scene.
pub fn select_views(
    strategy: Strategy,
    scene: &SceneSpec,
    sphere: &ViewSphere,
    budget: usize,
    config: &Config,
) -> Result<Vec<usize>, BenchError> {
    if budget == 0 {
        return Err(BenchError::ZeroBudget);
    }
    let mut evaluator = SceneEvaluator {
        scene,
        sphere,
        camera: config.camera,
        segmentation: config.segmentation,
        gov: config.gov,
    };
    match strategy {
        Strategy::Random(_) => select_from_scores(strategy, sphere, &ScoreTable(Vec::new()), budget, 0),
        Strategy::Olive => {
            let start = config.explorer.start_view.min(sphere.len() - 1);
            let state =
                explore(sphere, evaluator, budget.min(sphere.len()), start).expect("budget and start are valid");
            Ok(state.visited_indices())
        }
        Strategy::OracleGreedy => {
            let scores: Vec<GovScore> = (0..sphere.len()).map(|i| evaluator.evaluate(i).score).collect();
            Ok(top_views(&scores, budget.min(sphere.len())))
        }
    }
}

/// Test viewpoints: the training lattice turned about the vertical axis,
/// minus any point that lands on a training viewpoint.
pub fn test_lattice(sphere: &ViewSphere, rotation: f64) -> Vec<Vec3> {
    let (s, c) = rotation.sin_cos();
    let min_gap = sphere.min_edge_angle() * 0.25;
    sphere
        .viewpoints()
        .iter()
        .map(|p| Vec3::new(c * p.x - s * p.y, s * p.x + c * p.y, p.z))
        .filter(|q| sphere.viewpoints().iter().all(|p| angle_between(p, q) > min_gap))
        .collect()
}

/// The `k` test directions farthest (by angle to the nearest training view)
/// from the training views; lower index on ties.
pub fn farthest_test_views(sphere: &ViewSphere, lattice: &[Vec3], training: &[usize], k: usize) -> Vec<usize> {
    let gap = |q: &Vec3| {
        training
            .iter()
            .map(|&t| angle_between(&sphere.viewpoints()[t], q))
            .fold(PI, f64::min)
    };
    let gaps: Vec<f64> = lattice.iter().map(gap).collect();
    let mut order: Vec<usize> = (0..lattice.len()).collect();
    order.sort_by(|&a, &b| gaps[b].total_cmp(&gaps[a]).then(a.cmp(&b)));
    order.truncate(k);
    order
}

/// Benchmark grid and protocol knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchParams {
    pub strategies: Vec<StrategyKind>,
    pub budgets: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Held-out viewpoints per object and cell.
    pub test_views: usize,
    /// Turn of the test lattice about the vertical axis, radians.
    pub test_rotation: f64,
    /// Seed for the augmentation streams (independent of the cell seed).
    pub augment_seed: u64,
}

impl Default for BenchParams {
    fn default() -> Self {
        Self {
            strategies: vec![StrategyKind::Random, StrategyKind::Olive, StrategyKind::OracleGreedy],
            budgets: vec![1, 2, 3, 5, 8],
            seeds: (0..10).collect(),
            test_views: 10,
            test_rotation: PI / 20.0,
            augment_seed: 0,
        }
    }
}

/// One (object, strategy, budget, seed) measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRow {
    pub object: String,
    pub strategy: StrategyKind,
    pub budget: usize,
    pub seed: u64,
    /// Selected training views, `;`-separated in selection order.
    pub views: String,
    pub train_samples: usize,
    /// Test-lattice indices used, `;`-separated.
    pub test_views: String,
    pub proposals: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Mean and sample standard deviation of the raw-row accuracies of one
/// (strategy, budget) over all objects and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub strategy: StrategyKind,
    pub budget: usize,
    pub rows: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchResult {
    pub raw: Vec<RawRow>,
    pub aggregate: Vec<AggregateRow>,
}

impl BenchResult {
    pub fn mean(&self, strategy: StrategyKind, budget: usize) -> Option<f64> {
        self.aggregate
            .iter()
            .find(|a| a.strategy == strategy && a.budget == budget)
            .map(|a| a.mean_accuracy)
    }

    pub fn write_raw_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.raw {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_aggregate_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.aggregate {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, raw_path: &Path, aggregate_path: &Path) -> Result<(), BenchError> {
        self.write_raw_csv(std::fs::File::create(raw_path)?)?;
        self.write_aggregate_csv(std::fs::File::create(aggregate_path)?)?;
        Ok(())
    }
}

pub fn read_raw_csv<R: io::Read>(input: R) -> csv::Result<Vec<RawRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

/// Aggregate raw rows per (strategy, budget), sorted by strategy then budget.
pub fn aggregate(raw: &[RawRow]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(StrategyKind, usize), Vec<f64>> = BTreeMap::new();
    for r in raw {
        groups.entry((r.strategy, r.budget)).or_default().push(r.accuracy);
    }
    groups
        .into_iter()
        .map(|((strategy, budget), acc)| {
            let n = acc.len() as f64;
            let mean = acc.iter().sum::<f64>() / n;
            let var = if acc.len() > 1 {
                acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            AggregateRow {
                strategy,
                budget,
                rows: acc.len(),
                mean_accuracy: mean,
                std_accuracy: var.sqrt(),
            }
        })
        .collect()
}

/// Everything the cells need about one object, computed once.
struct ObjectCache {
    name: String,
    scores: ScoreTable,
    /// Training features per viewpoint (empty when the view shows nothing).
    train: Vec<Vec<FeatureVector>>,
    /// Proposal features per test-lattice direction.
    test: Vec<Vec<FeatureVector>>,
}

fn build_cache(
    scene: &SceneSpec,
    sphere: &ViewSphere,
    lattice: &[Vec3],
    config: &Config,
    augment_seed: u64,
) -> Result<ObjectCache, BenchError> {
    let name = scene.objects.first().map(|o| o.name.clone()).unwrap_or_default();
    let per_view = par::map_range(
        sphere.len(),
        |v| -> Result<(GovScore, Vec<FeatureVector>), BenchError> {
            let c = capture_view(scene, sphere, v, &config.camera, &config.segmentation)?;
            let score = evaluate_gov(&c.frame, &c.mask, &config.gov);
            let samples = build_training_set(
                scene,
                sphere,
                &[(v, &c)],
                &config.camera,
                &config.segmentation,
                &config.augment,
                &name,
                augment_seed,
            )?;
            let feats = samples
                .iter()
                .filter_map(|s| extract_features(&s.image, &s.mask).ok())
                .collect();
            Ok((score, feats))
        },
    );
    let mut scores = Vec::with_capacity(sphere.len());
    let mut train = Vec::with_capacity(sphere.len());
    for r in per_view {
        let (s, f) = r?;
        scores.push(s);
        train.push(f);
    }
    let focus = scene.focus();
    let test = par::map_range(lattice.len(), |j| {
        let pose = CameraPose::look_at(focus + lattice[j] * sphere.radius(), focus, DEFAULT_UP);
        let seed = derive_seed(config.camera.noise_seed, (1u64 << 32) + j as u64);
        let c = capture_pose(scene, &pose, &config.camera, &config.segmentation, seed);
        let Some(plane) = c.plane else {
            return Vec::new();
        };
        extract_object_masks(
            &c.frame,
            &plane,
            config.segmentation.min_height,
            config.segmentation.min_pixels,
        )
        .iter()
        .filter_map(|m| extract_features(&c.frame.color, m).ok())
        .collect()
    });
    Ok(ObjectCache {
        name,
        scores: ScoreTable(scores),
        train,
        test,
    })
}

/// Run the full grid. Rows are sorted by (strategy, budget, seed, object).
pub fn run_benchmark(corpus: &[SceneSpec], params: &BenchParams, config: &Config) -> Result<BenchResult, BenchError> {
    if corpus.is_empty() {
        return Err(BenchError::Empty("corpus"));
    }
    if params.budgets.is_empty() {
        return Err(BenchError::Empty("budget list"));
    }
    if params.strategies.is_empty() {
        return Err(BenchError::Empty("strategy list"));
    }
    if params.seeds.is_empty() {
        return Err(BenchError::Empty("seed list"));
    }
    if params.budgets.contains(&0) {
        return Err(BenchError::ZeroBudget);
    }
    let sphere = config.sphere.build()?;
    let lattice = test_lattice(&sphere, params.test_rotation);
    let mut caches = Vec::with_capacity(corpus.len());
    for scene in corpus {
        caches.push(build_cache(scene, &sphere, &lattice, config, params.augment_seed)?);
    }

    let mut cells = Vec::new();
    for &kind in &params.strategies {
        for &budget in &params.budgets {
            for &seed in &params.seeds {
                cells.push((kind, budget, seed));
            }
        }
    }
    let start = config.explorer.start_view;
    let threshold = config.detector.unknown_threshold;
    let test_k = params.test_views;
    let per_cell = par::map(&cells, |&(kind, budget, seed)| {
        let selections: Vec<Vec<usize>> = caches
            .iter()
            .enumerate()
            .map(|(o, c)| {
                let strategy = kind.with_seed(derive_seed(seed, o as u64));
                select_from_scores(strategy, &sphere, &c.scores, budget, start).expect("budget checked")
            })
            .collect();
        let mut registry = Registry::new(threshold);
        let mut sizes = Vec::with_capacity(caches.len());
        for (c, sel) in caches.iter().zip(&selections) {
            let feats: Vec<FeatureVector> = sel.iter().flat_map(|&v| c.train[v].iter().cloned()).collect();
            sizes.push(feats.len());
            if !feats.is_empty() {
                registry
                    .register_features(&c.name, feats)
                    .expect("corpus names are distinct");
            }
        }
        caches
            .iter()
            .zip(&selections)
            .zip(&sizes)
            .map(|((c, sel), &train_samples)| {
                let tests = farthest_test_views(&sphere, &lattice, sel, test_k);
                let mut proposals = 0;
                let mut correct = 0;
                for &t in &tests {
                    if c.test[t].is_empty() {
                        proposals += 1;
                        continue;
                    }
                    for f in &c.test[t] {
                        proposals += 1;
                        if registry.classify(f).label.as_deref() == Some(c.name.as_str()) {
                            correct += 1;
                        }
                    }
                }
                RawRow {
                    object: c.name.clone(),
                    strategy: kind,
                    budget,
                    seed,
                    views: join(sel),
                    train_samples,
                    test_views: join(&tests),
                    proposals,
                    correct,
                    accuracy: if proposals == 0 {
                        0.0
                    } else {
                        correct as f64 / proposals as f64
                    },
                }
            })
            .collect::<Vec<_>>()
    });
    let mut raw: Vec<RawRow> = per_cell.into_iter().flatten().collect();
    raw.sort_by(|a, b| (a.strategy, a.budget, a.seed, &a.object).cmp(&(b.strategy, b.budget, b.seed, &b.object)));
    let aggregate = aggregate(&raw);
    Ok(BenchResult { raw, aggregate })
}

fn join(v: &[usize]) -> String {
    v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

/// Parse a `;`-separated index list as written in [`RawRow`].
pub fn split_indices(s: &str) -> Vec<usize> {
    s.split(';')
        .filter(|t| !t.is_empty())
        .filter_map(|t| t.parse().ok())
        .collect()
}
