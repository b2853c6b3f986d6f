//! Frictionless, gravity-free elastic-ball physics in a square box.
//!
//! Balls of equal mass move in straight lines, reflect off the four walls and
//! exchange the normal component of their velocities when they collide. Every
//! frame of a generated video corresponds to exactly one call to [`step`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of placement attempts in [`init_world`].
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

/// Tolerance on pairwise overlap, in box units.
pub const OVERLAP_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub box_side: f64,
    pub n_balls: usize,
    pub radius: f64,
    /// Box units travelled per step.
    pub speed: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            box_side: 10.0,
            n_balls: 3,
            radius: 1.2,
            speed: 0.5,
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) {
            return Err(Error::Config(format!("radius must be > 0, got {}", self.radius)));
        }
        if !(self.box_side > 4.0 * self.radius) {
            return Err(Error::Config(format!(
                "box_side ({}) must exceed 4 * radius ({})",
                self.box_side,
                4.0 * self.radius
            )));
        }
        if self.n_balls < 1 {
            return Err(Error::Config("n_balls must be at least 1".into()));
        }
        if !(self.speed >= 0.0) || !self.speed.is_finite() {
            return Err(Error::Config(format!("speed must be >= 0, got {}", self.speed)));
        }
        Ok(())
    }

    fn lo(&self) -> f64 {
        self.radius
    }

    fn hi(&self) -> f64 {
        self.box_side - self.radius
    }
}

/// Positions and velocities of every ball, in box units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
}

impl WorldState {
    pub fn n_balls(&self) -> usize {
        self.positions.len()
    }

    /// Sum of squared speeds (unit mass, without the 1/2 factor).
    pub fn kinetic_energy(&self) -> f64 {
        self.velocities.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum()
    }

    /// Smallest center-to-center distance over all pairs, `inf` for fewer than two balls.
    pub fn min_pair_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.positions.len() {
            for j in i + 1..self.positions.len() {
                best = best.min(dist(self.positions[i], self.positions[j]));
            }
        }
        best
    }

    pub fn inside_walls(&self, config: &WorldConfig) -> bool {
        let (lo, hi) = (config.lo(), config.hi());
        self.positions
            .iter()
            .all(|p| p.iter().all(|&c| c >= lo && c <= hi))
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Rejection-samples non-overlapping positions and isotropic velocities of norm `config.speed`.
pub fn init_world(config: &WorldConfig, rng: &mut ChaCha8Rng) -> Result<WorldState> {
    config.validate()?;
    let (lo, hi) = (config.lo(), config.hi());
    let min_dist = 2.0 * config.radius;
    let mut positions: Vec<[f64; 2]> = Vec::with_capacity(config.n_balls);
    let mut attempts = 0;
    while positions.len() < config.n_balls {
        attempts += 1;
        if attempts > MAX_PLACEMENT_ATTEMPTS {
            return Err(Error::BoxTooCrowded {
                n_balls: config.n_balls,
                attempts: MAX_PLACEMENT_ATTEMPTS,
            });
        }
        let candidate = [rng.gen_range(lo..=hi), rng.gen_range(lo..=hi)];
        if positions.iter().all(|&p| dist(p, candidate) >= min_dist) {
            positions.push(candidate);
        }
    }

    let mut velocities = Vec::with_capacity(config.n_balls);
    for _ in 0..config.n_balls {
        // Box-Muller pair: an isotropic direction that is then rescaled.
        let v = loop {
            let u1: f64 = rng.gen::<f64>();
            let u2: f64 = rng.gen::<f64>();
            if u1 <= f64::MIN_POSITIVE {
                continue;
            }
            let r = (-2.0 * u1.ln()).sqrt();
            let theta = std::f64::consts::TAU * u2;
            let v = [r * theta.cos(), r * theta.sin()];
            if v[0].hypot(v[1]) > 1e-12 {
                break v;
            }
        };
        let norm = v[0].hypot(v[1]);
        velocities.push([v[0] / norm * config.speed, v[1] / norm * config.speed]);
    }

    Ok(WorldState {
        positions,
        velocities,
    })
}

/// Upper bound on collision events resolved within one step.
pub const MAX_EVENTS_PER_STEP: usize = 10_000;

/// Pairs approaching slower than this (normal relative speed times distance)
/// are treated as not approaching, so a just-resolved contact is not re-hit
/// because of rounding.
const APPROACH_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
enum Event {
    Wall { ball: usize, axis: usize, bound: f64 },
    Pair { i: usize, j: usize },
}

/// Earliest wall or pair contact within `horizon`; ties go to the first found
/// (walls by ball and axis, then pairs in ascending index order).
fn next_event(pos: &[[f64; 2]], vel: &[[f64; 2]], config: &WorldConfig, horizon: f64) -> Option<(f64, Event)> {
    let (lo, hi) = (config.lo(), config.hi());
    let contact = 2.0 * config.radius;
    let mut best: Option<(f64, Event)> = None;
    let mut consider = |t: f64, e: Event| {
        if t <= horizon && best.is_none_or(|(bt, _)| t < bt) {
            best = Some((t, e));
        }
    };
    for (ball, (p, v)) in pos.iter().zip(vel).enumerate() {
        for axis in 0..2 {
            if v[axis] > 0.0 {
                consider(((hi - p[axis]) / v[axis]).max(0.0), Event::Wall { ball, axis, bound: hi });
            } else if v[axis] < 0.0 {
                consider(((lo - p[axis]) / v[axis]).max(0.0), Event::Wall { ball, axis, bound: lo });
            }
        }
    }
    for i in 0..pos.len() {
        for j in i + 1..pos.len() {
            let dp = [pos[j][0] - pos[i][0], pos[j][1] - pos[i][1]];
            let dv = [vel[j][0] - vel[i][0], vel[j][1] - vel[i][1]];
            let b = dp[0] * dv[0] + dp[1] * dv[1];
            if b >= -APPROACH_EPS {
                continue;
            }
            let a = dv[0] * dv[0] + dv[1] * dv[1];
            let c = dp[0] * dp[0] + dp[1] * dp[1] - contact * contact;
            if c <= 0.0 {
                // Touching or overlapping and still approaching: collide now.
                consider(0.0, Event::Pair { i, j });
                continue;
            }
            let disc = b * b - a * c;
            if disc >= 0.0 {
                consider(((-b - disc.sqrt()) / a).max(0.0), Event::Pair { i, j });
            }
        }
    }
    best
}

fn advance(pos: &mut [[f64; 2]], vel: &[[f64; 2]], t: f64) {
    for (p, v) in pos.iter_mut().zip(vel) {
        p[0] += t * v[0];
        p[1] += t * v[1];
    }
}

/// Advances the world by one frame.
///
/// Contacts are resolved in time order: the world moves to the earliest wall
/// or ball contact within the frame, resolves it, and continues with the new
/// velocities for the rest of the frame. A wall negates the normal velocity
/// component; colliding balls exchange the components along their
/// center-to-center normal. Pairs that overlap while moving apart are left
/// alone.
pub fn step(state: &WorldState, config: &WorldConfig) -> WorldState {
    let mut pos = state.positions.clone();
    let mut vel = state.velocities.clone();
    let (lo, hi) = (config.lo(), config.hi());
    let mut remaining = 1.0;
    for _ in 0..MAX_EVENTS_PER_STEP {
        let Some((t, event)) = next_event(&pos, &vel, config, remaining) else {
            break;
        };
        advance(&mut pos, &vel, t);
        remaining -= t;
        match event {
            Event::Wall { ball, axis, bound } => {
                pos[ball][axis] = bound;
                vel[ball][axis] = -vel[ball][axis];
            }
            Event::Pair { i, j } => {
                let d = [pos[i][0] - pos[j][0], pos[i][1] - pos[j][1]];
                let len = d[0].hypot(d[1]).max(f64::MIN_POSITIVE);
                let n = [d[0] / len, d[1] / len];
                let rel = (vel[i][0] - vel[j][0]) * n[0] + (vel[i][1] - vel[j][1]) * n[1];
                vel[i] = [vel[i][0] - rel * n[0], vel[i][1] - rel * n[1]];
                vel[j] = [vel[j][0] + rel * n[0], vel[j][1] + rel * n[1]];
            }
        }
    }
    advance(&mut pos, &vel, remaining);
    for p in &mut pos {
        // Rounding only; walls are resolved as events.
        p[0] = p[0].clamp(lo, hi);
        p[1] = p[1].clamp(lo, hi);
    }
    WorldState {
        positions: pos,
        velocities: vel,
    }
}

/// Runs `n_steps` frames starting from a freshly initialized world seeded by `config.seed`.
pub fn simulate(config: &WorldConfig, n_steps: usize) -> Result<Vec<WorldState>> {
    let mut rng = rng_from_seed(config.seed);
    simulate_with(config, n_steps, &mut rng)
}

/// Like [`simulate`] but drawing initial conditions from `rng`.
pub fn simulate_with(
    config: &WorldConfig,
    n_steps: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<WorldState>> {
    if n_steps < 1 {
        return Err(Error::Config("n_steps must be at least 1".into()));
    }
    let mut state = init_world(config, rng)?;
    let mut trajectory = Vec::with_capacity(n_steps);
    trajectory.push(state.clone());
    for _ in 1..n_steps {
        state = step(&state, config);
        trajectory.push(state.clone());
    }
    Ok(trajectory)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(pos: [f64; 2], vel: [f64; 2]) -> WorldState {
        WorldState {
            positions: vec![pos],
            velocities: vec![vel],
        }
    }

    #[test]
    fn init_single_ball_has_exact_speed() {
        for seed in 0..20 {
            let config = WorldConfig {
                n_balls: 1,
                seed,
                ..Default::default()
            };
            let state = init_world(&config, &mut rng_from_seed(seed)).unwrap();
            let v = state.velocities[0];
            assert!((v[0].hypot(v[1]) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn init_respects_separation_and_is_deterministic() {
        let config = WorldConfig::default();
        for seed in 0..50 {
            let a = init_world(&config, &mut rng_from_seed(seed)).unwrap();
            let b = init_world(&config, &mut rng_from_seed(seed)).unwrap();
            assert_eq!(a, b);
            assert!(a.min_pair_distance() >= 2.4);
            assert!(a.inside_walls(&config));
        }
    }

    #[test]
    fn crowded_box_is_rejected() {
        let config = WorldConfig {
            box_side: 5.0,
            radius: 1.2,
            n_balls: 20,
            ..Default::default()
        };
        let err = init_world(&config, &mut rng_from_seed(1)).unwrap_err();
        assert!(matches!(err, Error::BoxTooCrowded { .. }), "{err}");
        assert!(err.to_string().contains("box too crowded"));
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            WorldConfig { radius: 0.0, ..Default::default() },
            WorldConfig { box_side: 4.8, ..Default::default() },
            WorldConfig { n_balls: 0, ..Default::default() },
            WorldConfig { speed: -1.0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn free_flight() {
        let config = WorldConfig::default();
        let next = step(&single([5.0, 5.0], [0.5, 0.0]), &config);
        assert_eq!(next.positions[0], [5.5, 5.0]);
        assert_eq!(next.velocities[0], [0.5, 0.0]);
    }

    #[test]
    fn wall_mirror_reflection() {
        let config = WorldConfig::default();
        let next = step(&single([8.5, 5.0], [0.5, 0.0]), &config);
        assert!((next.positions[0][0] - 8.6).abs() < 1e-12);
        assert_eq!(next.positions[0][1], 5.0);
        assert_eq!(next.velocities[0], [-0.5, 0.0]);

        let next = step(&single([1.5, 1.3], [-0.5, -0.5]), &config);
        assert!((next.positions[0][0] - 1.4).abs() < 1e-12);
        assert!((next.positions[0][1] - 1.6).abs() < 1e-12);
        assert_eq!(next.velocities[0], [0.5, 0.5]);
    }

    #[test]
    fn head_on_elastic_swap() {
        let config = WorldConfig::default();
        let state = WorldState {
            positions: vec![[3.5, 5.0], [6.5, 5.0]],
            velocities: vec![[1.0, 0.0], [-1.0, 0.0]],
        };
        let next = step(&state, &config);
        assert_eq!(next.velocities, vec![[-1.0, 0.0], [1.0, 0.0]]);
        // Contact at x = 3.8 / 6.2 after 0.3 of the step, then 0.7 back out.
        assert!((next.positions[0][0] - 3.1).abs() < 1e-12);
        assert!((next.positions[1][0] - 6.9).abs() < 1e-12);
    }

    #[test]
    fn oblique_collision_conserves_normal_momentum_and_energy() {
        let config = WorldConfig::default();
        let state = WorldState {
            positions: vec![[4.0, 5.0], [6.3, 5.6]],
            velocities: vec![[0.5, 0.1], [-0.3, 0.0]],
        };
        let next = step(&state, &config);
        assert_ne!(next.velocities, state.velocities);
        let p0 = [
            state.velocities[0][0] + state.velocities[1][0],
            state.velocities[0][1] + state.velocities[1][1],
        ];
        let p1 = [
            next.velocities[0][0] + next.velocities[1][0],
            next.velocities[0][1] + next.velocities[1][1],
        ];
        assert!((p0[0] - p1[0]).abs() < 1e-15 && (p0[1] - p1[1]).abs() < 1e-15);
        assert!((state.kinetic_energy() - next.kinetic_energy()).abs() < 1e-15);
        assert!(next.min_pair_distance() >= 2.4 - OVERLAP_EPS);
    }

    #[test]
    fn separating_overlap_is_left_alone() {
        let config = WorldConfig::default();
        let state = WorldState {
            positions: vec![[4.0, 5.0], [5.0, 5.0]],
            velocities: vec![[-0.5, 0.0], [0.5, 0.0]],
        };
        let next = step(&state, &config);
        assert_eq!(next.velocities, state.velocities);
    }

    #[test]
    fn simulate_lengths_and_stationary() {
        let config = WorldConfig { seed: 3, ..Default::default() };
        assert_eq!(simulate(&config, 40).unwrap().len(), 40);
        assert!(simulate(&config, 0).is_err());
        let still = WorldConfig { speed: 0.0, ..config };
        let traj = simulate(&still, 25).unwrap();
        assert!(traj.iter().all(|s| *s == traj[0]));
    }
}
