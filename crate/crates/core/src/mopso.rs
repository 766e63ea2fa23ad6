//! Multi-objective particle swarm optimization with a crowding-distance
//! archive (MOPSO-CD). All objectives are minimized.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Box constraints and symmetric velocity caps.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
    v_max: Vec<f64>,
}

impl Bounds {
    /// Velocity caps default to a quarter of each dimension's range.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let v_max = lower.iter().zip(&upper).map(|(l, u)| 0.25 * (u - l)).collect();
        Self::with_velocity_caps(lower, upper, v_max)
    }

    pub fn with_velocity_caps(lower: Vec<f64>, upper: Vec<f64>, v_max: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidArgument("search space has no dimensions".into()));
        }
        if lower.len() != upper.len() || lower.len() != v_max.len() {
            return Err(Error::InvalidArgument("bound vectors differ in length".into()));
        }
        for (d, ((l, u), v)) in lower.iter().zip(&upper).zip(&v_max).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::InvalidArgument(format!("dimension {d}: need lower < upper, got [{l}, {u}]")));
            }
            if !(*v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("dimension {d}: velocity cap must be positive")));
            }
        }
        Ok(Self { lower, upper, v_max })
    }

    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; dim], vec![upper; dim])
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

    pub fn v_max(&self) -> &[f64] {
        &self.v_max
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(d, v)| *v >= self.lower[d] && *v <= self.upper[d])
    }
}

/// True iff `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "objective vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    Ok(dominates_unchecked(a, b))
}

fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strict = true;
        }
    }
    strict
}

/// Crowding distance of each entry.
///
/// Per objective the entries are sorted ascending; an interior entry adds
/// the gap between its two neighbours and both extremes add the largest
/// value of that objective.
pub fn crowding_distances(fitnesses: &[Vec<f64>]) -> Vec<f64> {
    let n = fitnesses.len();
    let mut cd = vec![0.0; n];
    if n == 0 {
        return cd;
    }
    let objectives = fitnesses[0].len();
    let mut order: Vec<usize> = (0..n).collect();
    #[allow(clippy::needless_range_loop)]
    for obj in 0..objectives {
        order.sort_by(|&a, &b| fitnesses[a][obj].total_cmp(&fitnesses[b][obj]).then(a.cmp(&b)));
        let f_max = fitnesses[order[n - 1]][obj];
        cd[order[0]] += f_max;
        if n > 1 {
            cd[order[n - 1]] += f_max;
        }
        for w in 1..n.saturating_sub(1) {
            cd[order[w]] += fitnesses[order[w + 1]][obj] - fitnesses[order[w - 1]][obj];
        }
    }
    cd
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    /// `delta(t, y) = y * (1 - r * (t/T)^b)`.
    #[default]
    AsPrinted,
    /// `delta(t, y) = y * (1 - r^((1 - t/T)^b))`.
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inertia {
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MopsoConfig {
    pub pop_size: usize,
    pub max_iter: usize,
    pub inertia: Inertia,
    pub c1: f64,
    pub c2: f64,
    /// Mutation runs while `t < max_iter * mutation_fraction`.
    pub mutation_fraction: f64,
    pub mutation_exponent: f64,
    pub mutation_kind: MutationKind,
    pub archive_capacity: usize,
    /// Share of the least crowded archive entries eligible as leaders.
    pub leader_fraction: f64,
    pub seed: u64,
}

impl Default for MopsoConfig {
    fn default() -> Self {
        Self {
            pop_size: 100,
            max_iter: 100,
            inertia: Inertia { start: 0.9, end: 0.4 },
            c1: 2.0,
            c2: 2.0,
            mutation_fraction: 0.5,
            mutation_exponent: 5.0,
            mutation_kind: MutationKind::AsPrinted,
            archive_capacity: 100,
            leader_fraction: 0.10,
            seed: 0,
        }
    }
}

impl MopsoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.pop_size < 2 {
            return bad("pop_size must be at least 2");
        }
        if self.max_iter < 1 {
            return bad("max_iter must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.mutation_fraction) {
            return bad("mutation_fraction must lie in [0, 1]");
        }
        if self.archive_capacity < 1 {
            return bad("archive_capacity must be at least 1");
        }
        if !(self.leader_fraction > 0.0 && self.leader_fraction <= 1.0) {
            return bad("leader_fraction must lie in (0, 1]");
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0 && self.mutation_exponent.is_finite()) {
            return bad("c1, c2 must be non-negative and the mutation exponent finite");
        }
        Ok(())
    }

    /// Inertia at iteration `t`, linear from `start` (t = 0) to `end` (t = T - 1).
    pub fn inertia_at(&self, t: usize) -> f64 {
        if self.max_iter <= 1 {
            return self.inertia.start;
        }
        let frac = t as f64 / (self.max_iter - 1) as f64;
        self.inertia.start + (self.inertia.end - self.inertia.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub position: Vec<f64>,
    pub velocity: Vec<f64>,
    pub fitness: Vec<f64>,
    pub pbest_position: Vec<f64>,
    pub pbest_fitness: Vec<f64>,
}

/// New velocity: inertia plus cognitive and social pulls, with fresh random
/// factors per dimension. A component beyond its cap is negated and then
/// clamped.
pub fn update_velocity<R: Rng + ?Sized>(
    p: &Particle,
    gbest: &[f64],
    w_t: f64,
    cfg: &MopsoConfig,
    bounds: &Bounds,
    rng: &mut R,
) -> Vec<f64> {
    (0..p.position.len())
        .map(|d| {
            let r1: f64 = rng.gen();
            let r2: f64 = rng.gen();
            let x = p.position[d];
            let v = w_t * p.velocity[d] + cfg.c1 * r1 * (p.pbest_position[d] - x) + cfg.c2 * r2 * (gbest[d] - x);
            let cap = bounds.v_max[d];
            let v = if v > cap || v < -cap { -v } else { v };
            v.clamp(-cap, cap)
        })
        .collect()
}

/// Moves a particle. On leaving the box the velocity is reversed and applied
/// again, and the result is clamped to the nearest bound.
pub fn update_position(position: &mut [f64], velocity: &mut [f64], bounds: &Bounds) {
    for d in 0..position.len() {
        let (lo, hi) = (bounds.lower[d], bounds.upper[d]);
        let mut x = position[d] + velocity[d];
        if x < lo || x > hi {
            velocity[d] = -velocity[d];
            x += velocity[d];
        }
        position[d] = x.clamp(lo, hi);
    }
}

/// Step size of non-uniform mutation for headroom `y` at iteration `t`.
pub fn nonuniform_delta(kind: MutationKind, t: usize, max_iter: usize, y: f64, r: f64, b: f64) -> f64 {
    let frac = t as f64 / max_iter as f64;
    match kind {
        MutationKind::AsPrinted => y * (1.0 - r * frac.powf(b)),
        MutationKind::Classical => y * (1.0 - r.powf((1.0 - frac).powf(b))),
    }
}

/// Non-uniform mutation, active while `t < max_iter * mutation_fraction`.
/// Each dimension mutates with probability `1 / D`.
pub fn mutate<R: Rng + ?Sized>(position: &mut [f64], t: usize, cfg: &MopsoConfig, bounds: &Bounds, rng: &mut R) {
    if (t as f64) >= cfg.max_iter as f64 * cfg.mutation_fraction {
        return;
    }
    let rate = 1.0 / position.len() as f64;
    #[allow(clippy::needless_range_loop)]
    for d in 0..position.len() {
        if rng.gen::<f64>() >= rate {
            continue;
        }
        let (lo, hi) = (bounds.lower[d], bounds.upper[d]);
        let x = position[d];
        let up = rng.gen::<bool>();
        let r: f64 = rng.gen();
        let b = cfg.mutation_exponent;
        let moved = if up {
            x + nonuniform_delta(cfg.mutation_kind, t, cfg.max_iter, hi - x, r, b)
        } else {
            x - nonuniform_delta(cfg.mutation_kind, t, cfg.max_iter, x - lo, r, b)
        };
        position[d] = moved.clamp(lo, hi);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry {
    pub position: Vec<f64>,
    pub fitness: Vec<f64>,
    pub crowding: f64,
}

/// Bounded set of mutually non-dominated solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct Archive {
    capacity: usize,
    entries: Vec<ArchiveEntry>,
}

impl Archive {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "archive capacity must be positive");
        Self {
            capacity,
            entries: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts one candidate, keeping mutual non-dominance. Rejects it when
    /// an entry dominates it or already has the same objective vector.
    /// Returns whether it was added. Crowding is not refreshed.
    fn insert(&mut self, position: &[f64], fitness: &[f64]) -> bool {
        if self
            .entries
            .iter()
            .any(|e| e.fitness == fitness || dominates_unchecked(&e.fitness, fitness))
        {
            return false;
        }
        self.entries.retain(|e| !dominates_unchecked(fitness, &e.fitness));
        self.entries.push(ArchiveEntry {
            position: position.to_vec(),
            fitness: fitness.to_vec(),
            crowding: 0.0,
        });
        true
    }

    /// Merges candidates in order, then truncates to capacity by dropping
    /// the most crowded entries, and refreshes crowding distances.
    pub fn update<'a, I>(&mut self, candidates: I)
    where
        I: IntoIterator<Item = (&'a [f64], &'a [f64])>,
    {
        for (position, fitness) in candidates {
            self.insert(position, fitness);
        }
        self.refresh_crowding();
        if self.entries.len() > self.capacity {
            let mut order: Vec<usize> = (0..self.entries.len()).collect();
            order.sort_by(|&a, &b| self.entries[b].crowding.total_cmp(&self.entries[a].crowding).then(a.cmp(&b)));
            order.truncate(self.capacity);
            order.sort_unstable();
            let mut kept = Vec::with_capacity(self.capacity);
            let mut entries = std::mem::take(&mut self.entries).into_iter().map(Some).collect::<Vec<_>>();
            for i in order {
                kept.push(entries[i].take().expect("index kept once"));
            }
            self.entries = kept;
            self.refresh_crowding();
        }
    }

    fn refresh_crowding(&mut self) {
        let fits: Vec<Vec<f64>> = self.entries.iter().map(|e| e.fitness.clone()).collect();
        for (e, cd) in self.entries.iter_mut().zip(crowding_distances(&fits)) {
            e.crowding = cd;
        }
    }

    /// Indices of the least crowded entries eligible as leaders.
    pub fn leader_indices(&self, leader_fraction: f64) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.entries.len()).collect();
        order.sort_by(|&a, &b| self.entries[b].crowding.total_cmp(&self.entries[a].crowding).then(a.cmp(&b)));
        let take = ((leader_fraction * self.entries.len() as f64).ceil() as usize).clamp(1, self.entries.len().max(1));
        order.truncate(take);
        order
    }
}

/// Picks a leader uniformly among the `ceil(leader_fraction * |A|)` entries
/// with the largest crowding distance.
pub fn select_gbest<'a, R: Rng + ?Sized>(
    archive: &'a Archive,
    leader_fraction: f64,
    rng: &mut R,
) -> Result<&'a [f64]> {
    if archive.is_empty() {
        return Err(Error::InvalidArgument("cannot select a leader from an empty archive".into()));
    }
    let leaders = archive.leader_indices(leader_fraction);
    let pick = leaders[rng.gen_range(0..leaders.len())];
    Ok(&archive.entries[pick].position)
}

/// Replaces the personal best when the current point dominates it, keeps it
/// when it dominates the current point, and flips a coin otherwise.
pub fn update_pbest<R: Rng + ?Sized>(p: &mut Particle, rng: &mut R) {
    // the coin is drawn only for mutually non-dominated points
    if dominates_unchecked(&p.fitness, &p.pbest_fitness)
        || (!dominates_unchecked(&p.pbest_fitness, &p.fitness) && rng.gen::<bool>())
    {
        p.pbest_position.clone_from(&p.position);
        p.pbest_fitness.clone_from(&p.fitness);
    }
}

/// A box-constrained multi-objective minimization problem.
pub trait Problem: Sync {
    fn bounds(&self) -> &Bounds;
    fn evaluate(&self, x: &[f64]) -> Vec<f64>;
}

/// Swarm state handed to a [`run_observed`] callback. `iteration` is 0
/// after initialization and `t + 1` after loop iteration `t`.
pub struct Snapshot<'a> {
    pub iteration: usize,
    pub particles: &'a [Particle],
    pub archive: &'a Archive,
}

pub fn run<P: Problem>(problem: &P, cfg: &MopsoConfig) -> Result<Archive> {
    run_observed(problem, cfg, |_| {})
}

fn check_finite(iteration: usize, particles: &[Particle]) -> Result<()> {
    match particles.iter().find(|p| p.fitness.iter().any(|v| !v.is_finite())) {
        Some(p) => Err(Error::NonFiniteObjective {
            iteration,
            values: p.fitness.clone(),
        }),
        None => Ok(()),
    }
}

/// Runs the optimizer and calls `observe` after initialization and after
/// every iteration.
///
/// Particle `i` draws from its own ChaCha stream, so results do not depend
/// on how evaluations are scheduled across threads.
pub fn run_observed<P, F>(problem: &P, cfg: &MopsoConfig, mut observe: F) -> Result<Archive>
where
    P: Problem,
    F: FnMut(&Snapshot<'_>),
{
    cfg.validate()?;
    let bounds = problem.bounds();
    let dim = bounds.dim();

    let mut rngs: Vec<ChaCha8Rng> = (0..cfg.pop_size)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64 + 1);
            rng
        })
        .collect();

    let mut particles: Vec<Particle> = rngs
        .par_iter_mut()
        .map(|rng| {
            let position: Vec<f64> = (0..dim)
                .map(|d| rng.gen_range(bounds.lower[d]..=bounds.upper[d]))
                .collect();
            let fitness = problem.evaluate(&position);
            Particle {
                velocity: vec![0.0; dim],
                pbest_position: position.clone(),
                pbest_fitness: fitness.clone(),
                position,
                fitness,
            }
        })
        .collect();
    check_finite(0, &particles)?;

    let mut archive = Archive::new(cfg.archive_capacity);
    archive.update(particles.iter().map(|p| (p.position.as_slice(), p.fitness.as_slice())));
    observe(&Snapshot {
        iteration: 0,
        particles: &particles,
        archive: &archive,
    });

    for t in 0..cfg.max_iter {
        let w_t = cfg.inertia_at(t);
        let leaders = &archive;
        particles
            .par_iter_mut()
            .zip(rngs.par_iter_mut())
            .try_for_each(|(p, rng)| -> Result<()> {
                let gbest = select_gbest(leaders, cfg.leader_fraction, rng)?;
                let mut velocity = update_velocity(p, gbest, w_t, cfg, bounds, rng);
                update_position(&mut p.position, &mut velocity, bounds);
                p.velocity = velocity;
                mutate(&mut p.position, t, cfg, bounds, rng);
                p.fitness = problem.evaluate(&p.position);
                Ok(())
            })?;
        check_finite(t + 1, &particles)?;

        archive.update(particles.iter().map(|p| (p.position.as_slice(), p.fitness.as_slice())));
        for (p, rng) in particles.iter_mut().zip(rngs.iter_mut()) {
            update_pbest(p, rng);
        }
        observe(&Snapshot {
            iteration: t + 1,
            particles: &particles,
            archive: &archive,
        });
    }
    Ok(archive)
}
