//! Online viewpoint exploration.
//!
//! Starting from one viewpoint, the explorer hill-climbs the combined GOV
//! over the sphere's adjacency graph: every unvisited neighbour of the
//! current view is evaluated and the walk moves to the best neighbour while
//! it is strictly better. At a local maximum it jumps to the unvisited
//! viewpoint geodesically farthest from where it stands and climbs again,
//! until the evaluation budget runs out or every viewpoint has been seen.

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capture::{capture_view, CameraConfig, Capture};
use crate::gov::{evaluate_gov, GovConfig, GovScore};
use crate::renderer::SceneSpec;
use crate::segmenter::SegmentationConfig;
use crate::viewsphere::{angle_between, ViewSphere};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExploreError {
    #[error("the view sphere has no viewpoints")]
    EmptySphere,
    #[error("the view budget must be at least 1")]
    ZeroBudget,
    #[error("view budget of {0} evaluations exhausted")]
    BudgetExhausted(usize),
    #[error("view {0} was already evaluated")]
    AlreadyVisited(usize),
    #[error("view {index} is not evaluated yet")]
    NotVisited { index: usize },
    #[error("view index {index} out of range for {len} viewpoints")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("no views have been evaluated")]
    NoVisits,
}

/// Result of evaluating one viewpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub score: GovScore,
    pub capture: Option<Capture>,
}

/// Source of GOV scores for viewpoints.
pub trait ViewEvaluator {
    fn evaluate(&mut self, index: usize) -> Evaluation;
}

impl<F: FnMut(usize) -> Evaluation> ViewEvaluator for F {
    fn evaluate(&mut self, index: usize) -> Evaluation {
        self(index)
    }
}

/// Renders, segments and scores viewpoints of a scene.
#[derive(Debug, Clone)]
pub struct SceneEvaluator<'a> {
    pub scene: &'a SceneSpec,
    pub sphere: &'a ViewSphere,
    pub camera: CameraConfig,
    pub segmentation: SegmentationConfig,
    pub gov: GovConfig,
}

impl ViewEvaluator for SceneEvaluator<'_> {
    fn evaluate(&mut self, index: usize) -> Evaluation {
        let capture = capture_view(self.scene, self.sphere, index, &self.camera, &self.segmentation)
            .expect("explorer only asks for indices on its own sphere");
        let score = evaluate_gov(&capture.frame, &capture.mask, &self.gov);
        Evaluation {
            score,
            capture: Some(capture),
        }
    }
}

/// Precomputed scores, one per viewpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable(pub Vec<GovScore>);

impl ScoreTable {
    /// A synthetic field where every metric of view `i` equals `values[i]`,
    /// so the combined score is `values[i]` under any weights.
    pub fn from_field(values: &[f64]) -> Self {
        Self(
            values
                .iter()
                .map(|&v| GovScore {
                    silhouette: v,
                    depth_entropy: v,
                    curvature_entropy: v,
                    color_entropy: v,
                    combined: v,
                })
                .collect(),
        )
    }
}

impl ViewEvaluator for ScoreTable {
    fn evaluate(&mut self, index: usize) -> Evaluation {
        Evaluation {
            score: self.0[index],
            capture: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VisitKind {
    Start,
    Climb,
    Jump,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisitRecord {
    pub step: usize,
    pub index: usize,
    pub kind: VisitKind,
    pub score: GovScore,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationState {
    budget: usize,
    visited: Vec<VisitRecord>,
    scores: Vec<Option<GovScore>>,
    current: Option<usize>,
    climbs: Vec<Vec<usize>>,
    captures: BTreeMap<usize, Capture>,
}

impl ExplorationState {
    fn new(views: usize, budget: usize) -> Self {
        Self {
            budget,
            visited: Vec::new(),
            scores: vec![None; views],
            current: None,
            climbs: Vec::new(),
            captures: BTreeMap::new(),
        }
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.visited.len()
    }

    pub fn is_exhausted(&self) -> bool {
        self.visited.len() >= self.budget
    }

    /// Evaluations in order.
    pub fn visited(&self) -> &[VisitRecord] {
        &self.visited
    }

    pub fn visited_indices(&self) -> Vec<usize> {
        self.visited.iter().map(|r| r.index).collect()
    }

    pub fn current(&self) -> Option<usize> {
        self.current
    }

    pub fn score(&self, index: usize) -> Option<GovScore> {
        self.scores.get(index).copied().flatten()
    }

    pub fn is_visited(&self, index: usize) -> bool {
        self.score(index).is_some()
    }

    /// Accepted views of each hill climb, in order.
    pub fn climbs(&self) -> &[Vec<usize>] {
        &self.climbs
    }

    pub fn capture(&self, index: usize) -> Option<&Capture> {
        self.captures.get(&index)
    }

    /// Trajectory as CSV with header
    /// `step,view,kind,silhouette,depth_entropy,curvature_entropy,color_entropy,combined`.
    pub fn write_trajectory_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.visited {
            w.serialize(TrajectoryRow {
                step: r.step,
                view: r.index,
                kind: r.kind,
                silhouette: r.score.silhouette,
                depth_entropy: r.score.depth_entropy,
                curvature_entropy: r.score.curvature_entropy,
                color_entropy: r.score.color_entropy,
                combined: r.score.combined,
            })?;
        }
        if self.visited.is_empty() {
            w.write_record(TRAJECTORY_HEADER)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn trajectory_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_trajectory_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }
}

const TRAJECTORY_HEADER: [&str; 8] = [
    "step",
    "view",
    "kind",
    "silhouette",
    "depth_entropy",
    "curvature_entropy",
    "color_entropy",
    "combined",
];

#[derive(Debug, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub step: usize,
    pub view: usize,
    pub kind: VisitKind,
    pub silhouette: f64,
    pub depth_entropy: f64,
    pub curvature_entropy: f64,
    pub color_entropy: f64,
    pub combined: f64,
}

/// Per-view scores as CSV with header
/// `view,silhouette,depth_entropy,curvature_entropy,color_entropy,combined`.
pub fn write_scores_csv<W: io::Write>(scores: &[(usize, GovScore)], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "view",
        "silhouette",
        "depth_entropy",
        "curvature_entropy",
        "color_entropy",
        "combined",
    ])?;
    for (view, s) in scores {
        w.write_record(
            std::iter::once(view.to_string()).chain(s.components().iter().chain([&s.combined]).map(|x| x.to_string())),
        )?;
    }
    w.flush()?;
    Ok(())
}

type Observer<'a> = Box<dyn FnMut(&VisitRecord) + 'a>;

/// Drives one exploration over a sphere with a given evaluator.
pub struct Explorer<'a, E> {
    sphere: &'a ViewSphere,
    evaluator: E,
    state: ExplorationState,
    observer: Option<Observer<'a>>,
}

impl<'a, E: ViewEvaluator> Explorer<'a, E> {
    pub fn new(sphere: &'a ViewSphere, evaluator: E, budget: usize) -> Result<Self, ExploreError> {
        if sphere.is_empty() {
            return Err(ExploreError::EmptySphere);
        }
        if budget == 0 {
            return Err(ExploreError::ZeroBudget);
        }
        Ok(Self {
            sphere,
            evaluator,
            state: ExplorationState::new(sphere.len(), budget),
            observer: None,
        })
    }

    /// Called after every evaluation.
    pub fn on_visit(mut self, f: impl FnMut(&VisitRecord) + 'a) -> Self {
        self.observer = Some(Box::new(f));
        self
    }

    pub fn state(&self) -> &ExplorationState {
        &self.state
    }

    pub fn into_state(self) -> ExplorationState {
        self.state
    }

    fn check(&self, index: usize) -> Result<(), ExploreError> {
        if index >= self.sphere.len() {
            return Err(ExploreError::IndexOutOfRange {
                index,
                len: self.sphere.len(),
            });
        }
        Ok(())
    }

    /// Evaluate one unvisited viewpoint, charging the budget.
    pub fn evaluate_view(&mut self, index: usize, kind: VisitKind) -> Result<GovScore, ExploreError> {
        self.check(index)?;
        if self.state.is_visited(index) {
            return Err(ExploreError::AlreadyVisited(index));
        }
        if self.state.is_exhausted() {
            return Err(ExploreError::BudgetExhausted(self.state.budget));
        }
        let eval = self.evaluator.evaluate(index);
        let record = VisitRecord {
            step: self.state.visited.len(),
            index,
            kind,
            score: eval.score,
        };
        self.state.scores[index] = Some(eval.score);
        self.state.visited.push(record);
        if let Some(c) = eval.capture {
            self.state.captures.insert(index, c);
        }
        if self.state.current.is_none() {
            self.state.current = Some(index);
        }
        if let Some(obs) = self.observer.as_mut() {
            obs(&record);
        }
        Ok(eval.score)
    }

    /// Climb from an evaluated view; returns where the climb rests.
    pub fn hill_climb(&mut self, start: usize) -> Result<usize, ExploreError> {
        self.check(start)?;
        let mut here = start;
        let mut here_score = self
            .state
            .score(start)
            .ok_or(ExploreError::NotVisited { index: start })?;
        let mut path = vec![start];
        loop {
            let neighbors = self.sphere.neighbors(here).expect("index checked");
            for &n in neighbors {
                if self.state.is_exhausted() {
                    break;
                }
                if !self.state.is_visited(n) {
                    self.evaluate_view(n, VisitKind::Climb)?;
                }
            }
            let mut best: Option<(usize, GovScore)> = None;
            for &n in neighbors {
                if let Some(s) = self.state.score(n) {
                    if best.is_none_or(|(_, b)| s.combined > b.combined) {
                        best = Some((n, s));
                    }
                }
            }
            match best {
                Some((n, s)) if s.combined > here_score.combined => {
                    here = n;
                    here_score = s;
                    path.push(n);
                }
                _ => break,
            }
        }
        self.state.current = Some(here);
        self.state.climbs.push(path);
        Ok(here)
    }

    /// Unvisited viewpoint farthest from the current one (lowest index on
    /// ties); `None` once everything is visited or the budget is spent.
    pub fn farthest_jump(&self) -> Option<usize> {
        let current = self.state.current?;
        if self.state.is_exhausted() {
            return None;
        }
        let from = self.sphere.viewpoints()[current];
        let mut best: Option<(usize, f64)> = None;
        for (i, v) in self.sphere.viewpoints().iter().enumerate() {
            if self.state.is_visited(i) {
                continue;
            }
            let d = angle_between(&from, v);
            if best.is_none_or(|(_, b)| d > b) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Alternate climbs and farthest jumps from `start` until the budget is
    /// spent or every viewpoint is visited.
    pub fn run(&mut self, start: usize) -> Result<(), ExploreError> {
        self.evaluate_view(start, VisitKind::Start)?;
        self.state.current = Some(start);
        loop {
            let here = self.state.current.expect("set above");
            self.hill_climb(here)?;
            match self.farthest_jump() {
                Some(j) => {
                    self.evaluate_view(j, VisitKind::Jump)?;
                    self.state.current = Some(j);
                }
                None => return Ok(()),
            }
        }
    }
}

/// Run a full exploration and return its state.
pub fn explore<E: ViewEvaluator>(
    sphere: &ViewSphere,
    evaluator: E,
    budget: usize,
    start: usize,
) -> Result<ExplorationState, ExploreError> {
    let mut ex = Explorer::new(sphere, evaluator, budget)?;
    ex.run(start)?;
    Ok(ex.into_state())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalView {
    pub index: usize,
    pub score: GovScore,
    pub capture: Option<Capture>,
}

/// Visited views with the highest combined GOV, best first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CanonicalSet {
    pub views: Vec<CanonicalView>,
}

impl CanonicalSet {
    pub fn indices(&self) -> Vec<usize> {
        self.views.iter().map(|v| v.index).collect()
    }
}

/// Top `k` visited views by combined GOV; ties go to the lower index.
pub fn select_canonical(state: &ExplorationState, k: usize) -> Result<CanonicalSet, ExploreError> {
    if state.visited.is_empty() {
        return Err(ExploreError::NoVisits);
    }
    let mut ranked: Vec<&VisitRecord> = state.visited.iter().collect();
    ranked.sort_by(|a, b| {
        b.score
            .combined
            .total_cmp(&a.score.combined)
            .then(a.index.cmp(&b.index))
    });
    Ok(CanonicalSet {
        views: ranked
            .into_iter()
            .take(k)
            .map(|r| CanonicalView {
                index: r.index,
                score: r.score,
                capture: state.capture(r.index).cloned(),
            })
            .collect(),
    })
}
