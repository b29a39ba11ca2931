//! Comprehensive Learning Particle Swarm Optimization over a box.
//!
//! Every dimension of a particle learns from the personal best of an
//! exemplar particle chosen per dimension, so a single acceleration
//! constant suffices:
//!
//! ```text
//! v <- a(t) v + c r (pbest[exemplar[d]][d] - x)     r ~ U[0, 1] per dimension
//! v <- clamp(v, -v_max, v_max)
//! x <- x + v
//! ```
//!
//! A particle that leaves the box is not evaluated and keeps its personal
//! best; since every exemplar lies inside the box it is pulled back. After
//! `refresh_gap` iterations without improving its personal best a particle
//! draws a new exemplar vector.
//!
//! The swarm maximizes. Randomness comes from one ChaCha8 stream per
//! particle, all keyed by the master seed (stream `i` for particle `i`).
//! Fitness evaluations within an iteration run in parallel and personal
//! bests are updated afterwards in particle order, so results do not depend
//! on scheduling.

use std::error::Error as StdError;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub type ObjectiveError = Box<dyn StdError + Send + Sync>;

#[derive(Debug, thiserror::Error)]
pub enum SwarmError {
    #[error("invalid swarm configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("fitness evaluation failed for particle {particle} at iteration {iteration}: {source}")]
    Fitness {
        particle: usize,
        iteration: usize,
        source: ObjectiveError,
    },
    #[error("non-finite fitness {value} for particle {particle} at iteration {iteration}")]
    NonFiniteFitness {
        particle: usize,
        iteration: usize,
        value: f64,
    },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// How the per-particle learning probability `Pc_i` is set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearningProbMode {
    /// `Pc_i = 0.05 + 0.45 (exp(10 (i-1)/(n-1)) - 1) / (exp(10) - 1)`.
    Ramped,
    /// `Pc_i = 0.5` for every particle.
    Uniform,
    /// `Pc_i = 1`: every dimension goes through the tournament.
    PaperLiteral,
}

impl std::str::FromStr for LearningProbMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ramped" => Ok(Self::Ramped),
            "uniform" => Ok(Self::Uniform),
            "paper-literal" => Ok(Self::PaperLiteral),
            other => Err(format!("unknown learning probability mode {other:?} (ramped | uniform | paper-literal)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub pop_size: usize,
    pub max_iter: usize,
    /// Acceleration constant.
    pub c: f64,
    /// Inertia at the first iteration.
    pub a0: f64,
    /// Inertia at the last iteration.
    pub a1: f64,
    pub refresh_gap: usize,
    /// `v_max` as a fraction of each dimension's width.
    pub v_max_fraction: f64,
    pub seed: u64,
    pub learning_prob_mode: LearningProbMode,
    /// Use the product form `a0 * (a0 - a1) * t / T` instead of the linear
    /// decay. Only useful for comparison runs.
    #[serde(default)]
    pub inertia_literal: bool,
}

impl Default for SwarmConfig {
    fn default() -> Self {
        Self {
            pop_size: 10,
            max_iter: 500,
            c: 1.49445,
            a0: 0.9,
            a1: 0.4,
            refresh_gap: 7,
            v_max_fraction: 0.2,
            seed: 0,
            learning_prob_mode: LearningProbMode::Ramped,
            inertia_literal: false,
        }
    }
}

impl SwarmConfig {
    pub fn validate(&self) -> Result<(), SwarmError> {
        let bad = |m: &str| Err(SwarmError::InvalidConfig(m.into()));
        if self.pop_size < 2 {
            return bad("pop_size must be at least 2");
        }
        if !(self.v_max_fraction > 0.0 && self.v_max_fraction <= 1.0) {
            return bad("v_max_fraction must lie in (0, 1]");
        }
        if !(self.a1 <= self.a0) || !self.a0.is_finite() || !self.a1.is_finite() {
            return bad("inertia endpoints need a1 <= a0");
        }
        if !(self.c.is_finite() && self.c >= 0.0) {
            return bad("c must be finite and non-negative");
        }
        if self.refresh_gap == 0 {
            return bad("refresh_gap must be at least 1");
        }
        Ok(())
    }
}

/// Inertia weight at iteration `iter` of `config.max_iter`.
pub fn inertia(iter: usize, config: &SwarmConfig) -> f64 {
    if config.max_iter == 0 {
        return config.a0;
    }
    let frac = iter as f64 / config.max_iter as f64;
    if config.inertia_literal {
        config.a0 * (config.a0 - config.a1) * frac
    } else {
        config.a0 - (config.a0 - config.a1) * frac
    }
}

/// Learning probability of the particle at zero-based `index`.
pub fn learning_probability(index: usize, pop_size: usize, mode: LearningProbMode) -> f64 {
    match mode {
        LearningProbMode::Ramped => {
            let t = if pop_size > 1 { index as f64 / (pop_size - 1) as f64 } else { 0.0 };
            0.05 + 0.45 * ((10.0 * t).exp() - 1.0) / (10f64.exp() - 1.0)
        }
        LearningProbMode::Uniform => 0.5,
        LearningProbMode::PaperLiteral => 1.0,
    }
}

#[inline]
pub fn velocity_update(inertia: f64, c: f64, velocity: f64, exemplar_best: f64, position: f64, r1: f64) -> f64 {
    inertia * velocity + c * r1 * (exemplar_best - position)
}

#[inline]
pub fn clamp_velocity(velocity: f64, v_max: f64) -> f64 {
    v_max.min((-v_max).max(velocity))
}

/// Draws an exemplar vector for particle `index`.
///
/// Each dimension runs a binary tournament with probability `learning_prob`
/// (otherwise it keeps the particle itself). The tournament draws two
/// distinct particles other than `index` when at least two others exist,
/// else it compares the whole swarm; the higher personal-best fitness wins,
/// the first draw winning ties. If every dimension ends up on `index`, one
/// random dimension is handed to a random other particle.
pub fn assign_exemplar<R: Rng>(
    index: usize,
    pbest_fitness: &[f64],
    learning_prob: f64,
    dim: usize,
    rng: &mut R,
) -> Vec<usize> {
    let n = pbest_fitness.len();
    let candidates: Vec<usize> = if n >= 3 {
        (0..n).filter(|&j| j != index).collect()
    } else {
        (0..n).collect()
    };
    let mut exemplar = Vec::with_capacity(dim);
    for _ in 0..dim {
        if rng.gen::<f64>() < learning_prob {
            let a = rng.gen_range(0..candidates.len());
            let mut b = rng.gen_range(0..candidates.len() - 1);
            if b >= a {
                b += 1;
            }
            let (a, b) = (candidates[a], candidates[b]);
            exemplar.push(if pbest_fitness[b] > pbest_fitness[a] { b } else { a });
        } else {
            exemplar.push(index);
        }
    }
    if n >= 2 && dim > 0 && exemplar.iter().all(|&e| e == index) {
        let d = rng.gen_range(0..dim);
        let mut other = rng.gen_range(0..n - 1);
        if other >= index {
            other += 1;
        }
        exemplar[d] = other;
    }
    exemplar
}

/// Axis-aligned search box.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, SwarmError> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(SwarmError::InvalidBounds(format!(
                "{} lower vs {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(SwarmError::InvalidBounds("every dimension needs finite lower < upper".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn cube(dim: usize, lower: f64, upper: f64) -> Result<Self, SwarmError> {
        Self::new(vec![lower; dim], vec![upper; dim])
    }

    /// `[0, ln classes]^models`, the feasible set of entropy thresholds.
    pub fn thresholds(models: usize, classes: usize) -> Result<Self, SwarmError> {
        Self::cube(models, 0.0, (classes as f64).ln())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }
}

/// Result of one fitness evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub fitness: f64,
    /// Pixels resolved by the all-model fallback (0 for generic objectives).
    pub fallback_pixels: u64,
}

impl From<f64> for Evaluation {
    fn from(fitness: f64) -> Self {
        Self {
            fitness,
            fallback_pixels: 0,
        }
    }
}

/// A function to maximize. Must be deterministic in `position`.
pub trait Objective: Sync {
    fn evaluate(&self, position: &[f64]) -> Result<Evaluation, ObjectiveError>;
}

impl<F> Objective for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn evaluate(&self, position: &[f64]) -> Result<Evaluation, ObjectiveError> {
        Ok(self(position).into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub pbest: Vec<f64>,
    pub pbest_fitness: f64,
    pub pbest_fallback: u64,
    pub exemplar: Vec<usize>,
    /// Iterations since the personal best last improved.
    pub stagnation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub best: f64,
    pub mean: f64,
    pub out_of_bounds: usize,
    pub fallback_pixels: u64,
    pub evaluations: u64,
}

/// Per-iteration convergence record. Row 0 is the initial swarm.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SwarmTrace {
    pub rows: Vec<TraceRow>,
}

impl SwarmTrace {
    /// Comma-separated `iteration,best,mean,out_of_bounds` with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,best,mean,out_of_bounds\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{}", r.iteration, r.best, r.mean, r.out_of_bounds);
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), SwarmError> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|source| SwarmError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn best_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.best)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmOutcome {
    pub best_position: Vec<f64>,
    pub best_fitness: f64,
    pub best_fallback_pixels: u64,
    pub evaluations: u64,
    pub trace: SwarmTrace,
}

pub struct Swarm {
    config: SwarmConfig,
    bounds: Bounds,
    v_max: Vec<f64>,
    learning_prob: Vec<f64>,
    particles: Vec<Particle>,
    rngs: Vec<ChaCha8Rng>,
    iteration: usize,
    evaluations: u64,
    trace: SwarmTrace,
}

impl Swarm {
    /// Seeds positions uniformly in the box and velocities uniformly in
    /// `[-v_max, v_max]`, evaluates them and draws initial exemplars.
    pub fn new(config: SwarmConfig, bounds: Bounds, objective: &dyn Objective) -> Result<Self, SwarmError> {
        config.validate()?;
        let n = config.pop_size;
        let dim = bounds.dim();
        let v_max: Vec<f64> = bounds
            .lower
            .iter()
            .zip(&bounds.upper)
            .map(|(l, u)| config.v_max_fraction * (u - l))
            .collect();
        let learning_prob = (0..n)
            .map(|i| learning_probability(i, n, config.learning_prob_mode))
            .collect();
        let mut rngs: Vec<ChaCha8Rng> = (0..n)
            .map(|i| {
                let mut r = ChaCha8Rng::seed_from_u64(config.seed);
                r.set_stream(i as u64);
                r
            })
            .collect();
        let mut particles: Vec<Particle> = rngs
            .iter_mut()
            .map(|rng| {
                let position: Vec<f64> = (0..dim)
                    .map(|d| bounds.lower[d] + rng.gen::<f64>() * (bounds.upper[d] - bounds.lower[d]))
                    .collect();
                let velocity = (0..dim).map(|d| v_max[d] * (2.0 * rng.gen::<f64>() - 1.0)).collect();
                Particle {
                    pbest: position.clone(),
                    position,
                    velocity,
                    pbest_fitness: f64::NEG_INFINITY,
                    pbest_fallback: 0,
                    exemplar: Vec::new(),
                    stagnation: 0,
                }
            })
            .collect();
        let positions: Vec<&[f64]> = particles.iter().map(|p| p.position.as_slice()).collect();
        let evals = evaluate_all(objective, &positions, 0)?;
        for (p, e) in particles.iter_mut().zip(&evals) {
            let e = e.expect("all initial positions are evaluated");
            p.pbest_fitness = e.fitness;
            p.pbest_fallback = e.fallback_pixels;
        }
        let mut swarm = Self {
            config,
            bounds,
            v_max,
            learning_prob,
            particles,
            rngs,
            iteration: 0,
            evaluations: n as u64,
            trace: SwarmTrace::default(),
        };
        for i in 0..n {
            swarm.refresh_exemplar(i);
        }
        swarm.record(0);
        Ok(swarm)
    }

    fn refresh_exemplar(&mut self, i: usize) {
        let fitness: Vec<f64> = self.particles.iter().map(|p| p.pbest_fitness).collect();
        self.particles[i].exemplar =
            assign_exemplar(i, &fitness, self.learning_prob[i], self.bounds.dim(), &mut self.rngs[i]);
        self.particles[i].stagnation = 0;
    }

    fn record(&mut self, out_of_bounds: usize) {
        let best = &self.particles[self.best_index()];
        let mean = self.particles.iter().map(|p| p.pbest_fitness).sum::<f64>() / self.particles.len() as f64;
        self.trace.rows.push(TraceRow {
            iteration: self.iteration,
            best: best.pbest_fitness,
            mean,
            out_of_bounds,
            fallback_pixels: best.pbest_fallback,
            evaluations: self.evaluations,
        });
    }

    /// Index of the particle holding the best personal best (lowest index on
    /// ties).
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.particles.iter().enumerate() {
            if p.pbest_fitness > self.particles[best].pbest_fitness {
                best = i;
            }
        }
        best
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn trace(&self) -> &SwarmTrace {
        &self.trace
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn v_max(&self) -> &[f64] {
        &self.v_max
    }

    /// Advances the swarm by one iteration.
    pub fn step(&mut self, objective: &dyn Objective) -> Result<(), SwarmError> {
        self.iteration += 1;
        let a = inertia(self.iteration, &self.config);
        let c = self.config.c;

        let particles = &self.particles;
        let v_max = &self.v_max;
        let moves: Vec<(Vec<f64>, Vec<f64>)> = self
            .rngs
            .iter_mut()
            .zip(particles)
            .map(|(rng, p)| {
                let mut velocity = p.velocity.clone();
                let mut position = p.position.clone();
                for d in 0..position.len() {
                    let guide = particles[p.exemplar[d]].pbest[d];
                    let v = velocity_update(a, c, velocity[d], guide, position[d], rng.gen::<f64>());
                    velocity[d] = clamp_velocity(v, v_max[d]);
                    position[d] += velocity[d];
                }
                (position, velocity)
            })
            .collect();
        for (p, (position, velocity)) in self.particles.iter_mut().zip(moves) {
            p.position = position;
            p.velocity = velocity;
        }

        let inside: Vec<bool> = self.particles.iter().map(|p| self.bounds.contains(&p.position)).collect();
        let positions: Vec<&[f64]> = self
            .particles
            .iter()
            .zip(&inside)
            .map(|(p, &ok)| if ok { p.position.as_slice() } else { &[][..] })
            .collect();
        let evals = evaluate_all(objective, &positions, self.iteration)?;

        let mut out_of_bounds = 0;
        for (p, e) in self.particles.iter_mut().zip(evals) {
            match e {
                Some(e) => {
                    self.evaluations += 1;
                    if e.fitness > p.pbest_fitness {
                        p.pbest.clone_from(&p.position);
                        p.pbest_fitness = e.fitness;
                        p.pbest_fallback = e.fallback_pixels;
                        p.stagnation = 0;
                    } else {
                        p.stagnation += 1;
                    }
                }
                None => {
                    out_of_bounds += 1;
                    p.stagnation += 1;
                }
            }
        }
        for i in 0..self.particles.len() {
            if self.particles[i].stagnation >= self.config.refresh_gap {
                self.refresh_exemplar(i);
            }
        }
        self.record(out_of_bounds);
        Ok(())
    }

    /// Runs the remaining iterations up to `max_iter`.
    pub fn run(mut self, objective: &dyn Objective) -> Result<SwarmOutcome, SwarmError> {
        while self.iteration < self.config.max_iter {
            self.step(objective)?;
        }
        Ok(self.into_outcome())
    }

    pub fn into_outcome(self) -> SwarmOutcome {
        let best = &self.particles[self.best_index()];
        SwarmOutcome {
            best_position: best.pbest.clone(),
            best_fitness: best.pbest_fitness,
            best_fallback_pixels: best.pbest_fallback,
            evaluations: self.evaluations,
            trace: self.trace,
        }
    }
}

/// Evaluates the non-empty positions in parallel; empty slices mark
/// particles outside the box and yield `None`.
fn evaluate_all(
    objective: &dyn Objective,
    positions: &[&[f64]],
    iteration: usize,
) -> Result<Vec<Option<Evaluation>>, SwarmError> {
    positions
        .par_iter()
        .enumerate()
        .map(|(particle, x)| {
            if x.is_empty() {
                return Ok(None);
            }
            let e = objective
                .evaluate(x)
                .map_err(|source| SwarmError::Fitness {
                    particle,
                    iteration,
                    source,
                })?;
            if !e.fitness.is_finite() {
                return Err(SwarmError::NonFiniteFitness {
                    particle,
                    iteration,
                    value: e.fitness,
                });
            }
            Ok(Some(e))
        })
        .collect()
}

/// Maximizes `objective` over `[0, ln classes]^models`.
pub fn optimize(
    config: &SwarmConfig,
    objective: &dyn Objective,
    models: usize,
    classes: usize,
) -> Result<SwarmOutcome, SwarmError> {
    let bounds = Bounds::thresholds(models, classes)?;
    Swarm::new(config.clone(), bounds, objective)?.run(objective)
}

/// Maximizes `objective` over an arbitrary box.
pub fn optimize_in(config: &SwarmConfig, objective: &dyn Objective, bounds: Bounds) -> Result<SwarmOutcome, SwarmError> {
    Swarm::new(config.clone(), bounds, objective)?.run(objective)
}
