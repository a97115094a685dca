//! Quasi-static cube-stacking simulator.
//!
//! Cubes are dropped one after another onto a fixed base cube at the origin.
//! A commanded offset is relative to the cube below; the landing position
//! adds isotropic Gaussian noise whose spread grows with the drop height. A
//! cube rests when its landing offset stays inside the support margin, and
//! the tower stands when, at every interface, the centre of mass of the
//! cubes above projects strictly inside the (margin-shrunk) contact patch.
//!
//! Each episode draws its actions and its standard-normal noise from two
//! independent streams derived from `(seed, episode)`, so replaying an
//! episode with modified actions reuses exactly the same noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Provenance, Sample, Value};
use crate::error::{Error, Result};
use crate::variables::{Role, VariableSet, VariableSpec};

/// Side length of every cube, in meters.
pub const CUBE_SIZE: f64 = 0.05;
pub const DEFAULT_NOISE_K: f64 = 0.1;
pub const DEFAULT_MARGIN: f64 = 0.005;
pub const OFFSET_RANGE: (f64, f64) = (-0.03, 0.03);
pub const E1_DROP_RANGE: (f64, f64) = (0.005, 0.1);
pub const E2_DROP_RANGE: (f64, f64) = (0.001, 0.03);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    /// One cube stacked on the base.
    E1,
    /// Three cubes; the episode stops at the first failure.
    E2,
}

impl Experiment {
    pub fn cubes(self) -> usize {
        match self {
            Experiment::E1 => 1,
            Experiment::E2 => 3,
        }
    }
}

/// Sampling law of one action component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Distribution {
    Uniform { lower: f64, upper: f64 },
    /// Normal law restricted to `[lower, upper]` by re-sampling.
    Gaussian { mean: f64, std: f64, lower: f64, upper: f64 },
}

impl Distribution {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Distribution::Uniform { lower, upper } | Distribution::Gaussian { lower, upper, .. } => (lower, upper),
        }
    }

    fn validate(&self, what: &str) -> Result<()> {
        let bad = |why: &str| Err(Error::InvalidArgument(format!("{what} distribution: {why}")));
        let (lo, hi) = self.bounds();
        // The bounds double as the declared variable range, which must not be empty.
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad("bounds must be finite with lower < upper; use a gaussian with std 0 for a constant");
        }
        if let Distribution::Gaussian { mean, std, .. } = *self {
            if !(std >= 0.0 && std.is_finite() && mean.is_finite()) {
                return bad("standard deviation must be finite and non-negative");
            }
            if std == 0.0 && !(lo..=hi).contains(&mean) {
                return bad("degenerate law outside its bounds");
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Distribution::Uniform { lower, upper } => {
                Uniform::new_inclusive(lower, upper).expect("validated bounds").sample(rng)
            }
            Distribution::Gaussian { mean, std, lower, upper } => {
                if std == 0.0 {
                    return mean;
                }
                let normal = Normal::new(mean, std).expect("validated std");
                loop {
                    let v = normal.sample(rng);
                    if (lower..=upper).contains(&v) {
                        return v;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub experiment: Experiment,
    /// Law of `xOff_i` and `yOff_i`.
    pub offset: Distribution,
    /// Law of `dropOff_i`.
    pub drop: Distribution,
    pub episodes: usize,
    pub seed: u64,
    /// Landing noise standard deviation per meter of drop height.
    #[serde(default = "default_k")]
    pub noise_k: f64,
    /// Safety margin subtracted from the half side on every support test.
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(default = "default_cube_size")]
    pub cube_size: f64,
}

fn default_k() -> f64 {
    DEFAULT_NOISE_K
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

fn default_cube_size() -> f64 {
    CUBE_SIZE
}

impl SimConfig {
    /// Single stack with uniform offsets and drop heights.
    pub fn e1(episodes: usize, seed: u64) -> Self {
        Self {
            experiment: Experiment::E1,
            offset: Distribution::Uniform { lower: OFFSET_RANGE.0, upper: OFFSET_RANGE.1 },
            drop: Distribution::Uniform { lower: E1_DROP_RANGE.0, upper: E1_DROP_RANGE.1 },
            episodes,
            seed,
            noise_k: DEFAULT_NOISE_K,
            margin: DEFAULT_MARGIN,
            cube_size: CUBE_SIZE,
        }
    }

    /// Three stacks with truncated Gaussian offsets and low drop heights.
    pub fn e2(episodes: usize, seed: u64) -> Self {
        Self {
            experiment: Experiment::E2,
            offset: Distribution::Gaussian {
                mean: 0.0,
                std: 0.02,
                lower: OFFSET_RANGE.0,
                upper: OFFSET_RANGE.1,
            },
            drop: Distribution::Uniform { lower: E2_DROP_RANGE.0, upper: E2_DROP_RANGE.1 },
            episodes,
            seed,
            noise_k: DEFAULT_NOISE_K,
            margin: DEFAULT_MARGIN,
            cube_size: CUBE_SIZE,
        }
    }

    pub fn cubes(&self) -> usize {
        self.experiment.cubes()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| Err(Error::InvalidArgument(format!("simulation config: {why}")));
        if self.episodes == 0 {
            return bad("episode count must be at least 1".into());
        }
        if !(self.noise_k >= 0.0 && self.noise_k.is_finite()) {
            return bad(format!("noise coefficient {} must be non-negative", self.noise_k));
        }
        if !(self.cube_size > 0.0 && self.cube_size.is_finite()) {
            return bad("cube size must be positive".into());
        }
        if !(self.margin >= 0.0 && self.margin < self.cube_size / 2.0) {
            return bad(format!("margin {} must lie in [0, {})", self.margin, self.cube_size / 2.0));
        }
        self.offset.validate("offset")?;
        self.drop.validate("drop")?;
        if self.drop.bounds().0 < 0.0 {
            return bad("drop heights must be non-negative".into());
        }
        Ok(())
    }

    /// Variables of the generated datasets, per cube:
    /// `xOff_i, yOff_i, dropOff_i, onTop_i`.
    pub fn variables(&self) -> VariableSet {
        stacking_variables(self.cubes(), self.offset.bounds(), self.drop.bounds())
    }
}

/// Per-cube stacking variables for `cubes` cubes.
pub fn stacking_variables(cubes: usize, offset: (f64, f64), drop: (f64, f64)) -> VariableSet {
    let mut vars = Vec::with_capacity(4 * cubes);
    for i in 1..=cubes {
        vars.push(VariableSpec::continuous(format!("xOff{i}"), Role::Cause, offset.0, offset.1));
        vars.push(VariableSpec::continuous(format!("yOff{i}"), Role::Cause, offset.0, offset.1));
        vars.push(VariableSpec::continuous(format!("dropOff{i}"), Role::Cause, drop.0, drop.1));
        vars.push(VariableSpec::boolean(format!("onTop{i}"), Role::Effect));
    }
    VariableSet::new(vars).expect("generated names are unique")
}

/// Commanded placement of one cube relative to the cube below.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackAction {
    /// 1-based cube index.
    pub cube: usize,
    pub x_off: f64,
    pub y_off: f64,
    pub drop_off: f64,
}

impl StackAction {
    /// Reads cube `cube`'s action from a sample with per-cube variable names.
    pub fn from_sample(sample: &Sample, cube: usize) -> Result<Self> {
        let get = |prefix: &str| {
            let name = format!("{prefix}{cube}");
            sample
                .get(&name)
                .and_then(Value::as_real)
                .ok_or(Error::MissingValue(name))
        };
        Ok(Self {
            cube,
            x_off: get("xOff")?,
            y_off: get("yOff")?,
            drop_off: get("dropOff")?,
        })
    }

    /// Writes the action's cause values into `sample`.
    pub fn write_to(&self, sample: &mut Sample) {
        let i = self.cube;
        sample.insert(format!("xOff{i}"), Value::Real(self.x_off));
        sample.insert(format!("yOff{i}"), Value::Real(self.y_off));
        sample.insert(format!("dropOff{i}"), Value::Real(self.drop_off));
    }
}

/// Cube positions on the table plane, base cube first, with per-cube flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerState {
    pub cube_size: f64,
    /// Index 0 is the base cube at the origin.
    pub positions: Vec<[f64; 2]>,
    /// `on_top[i - 1]` tells whether cube `i` rests on the tower right now.
    pub on_top: Vec<bool>,
}

impl TowerState {
    pub fn new(cube_size: f64) -> Self {
        Self {
            cube_size,
            positions: vec![[0.0, 0.0]],
            on_top: Vec::new(),
        }
    }

    /// Number of cubes placed so far (excluding the base).
    pub fn placed(&self) -> usize {
        self.on_top.len()
    }

    /// True while every placed cube still stands.
    pub fn standing(&self) -> bool {
        self.on_top.iter().all(|&b| b)
    }
}

/// Lowest interface `j` (cube `j` carrying cube `j + 1`, base is 0) whose
/// load centre of mass leaves the contact patch, if any.
pub fn lowest_violated_interface(positions: &[[f64; 2]], cube_size: f64, margin: f64) -> Option<usize> {
    let half = cube_size / 2.0 - margin;
    let top = positions.len();
    for j in 0..top.saturating_sub(1) {
        let load = &positions[j + 1..];
        for axis in 0..2 {
            let com = load.iter().map(|p| p[axis]).sum::<f64>() / load.len() as f64;
            let a = positions[j][axis];
            let b = positions[j + 1][axis];
            let lo = a.max(b) - half;
            let hi = a.min(b) + half;
            if !(com > lo && com < hi) {
                return Some(j);
            }
        }
    }
    None
}

/// Drops the next cube with the given standard-normal noise draws.
pub fn settle_with_noise(tower: &TowerState, action: &StackAction, noise: [f64; 2], config: &SimConfig) -> Result<TowerState> {
    if !tower.standing() {
        return Err(Error::Simulation("cannot stack onto a fallen tower".into()));
    }
    if action.cube != tower.placed() + 1 {
        return Err(Error::Simulation(format!(
            "expected cube {}, got cube {}",
            tower.placed() + 1,
            action.cube
        )));
    }
    let sigma = config.noise_k * action.drop_off;
    let below = *tower.positions.last().expect("base is always present");
    let dx = action.x_off + sigma * noise[0];
    let dy = action.y_off + sigma * noise[1];
    let mut next = tower.clone();
    let half = config.cube_size / 2.0 - config.margin;
    if dx.abs() >= half || dy.abs() >= half {
        next.on_top.push(false);
        return Ok(next);
    }
    next.positions.push([below[0] + dx, below[1] + dy]);
    next.on_top.push(true);
    if let Some(j) = lowest_violated_interface(&next.positions, config.cube_size, config.margin) {
        // Everything above interface j falls.
        next.positions.truncate(j + 1);
        for flag in next.on_top.iter_mut().skip(j) {
            *flag = false;
        }
    }
    Ok(next)
}

/// Drops the next cube, drawing its landing noise from `rng`.
pub fn settle<R: Rng + ?Sized>(tower: &TowerState, action: &StackAction, rng: &mut R, config: &SimConfig) -> Result<TowerState> {
    let noise = [rng.sample(StandardNormal), rng.sample(StandardNormal)];
    settle_with_noise(tower, action, noise, config)
}

/// Draws one action per cube of the configured experiment.
pub fn sample_actions<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Vec<StackAction> {
    (1..=config.cubes())
        .map(|cube| StackAction {
            cube,
            x_off: config.offset.sample(rng),
            y_off: config.offset.sample(rng),
            drop_off: config.drop.sample(rng),
        })
        .collect()
}

/// All random inputs of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeDraws {
    pub actions: Vec<StackAction>,
    /// Standard-normal landing noise per cube.
    pub noise: Vec<[f64; 2]>,
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Actions and noise of episode `episode`; a pure function of
/// `(config.seed, episode)` and the sampling laws.
pub fn episode_draws(config: &SimConfig, episode: u64) -> EpisodeDraws {
    let mut action_rng = stream(config.seed, 2 * episode);
    let mut noise_rng = stream(config.seed, 2 * episode + 1);
    let actions = sample_actions(config, &mut action_rng);
    let noise = (0..config.cubes())
        .map(|_| [noise_rng.sample(StandardNormal), noise_rng.sample(StandardNormal)])
        .collect();
    EpisodeDraws { actions, noise }
}

/// Outcome of one executed episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    /// `on_top[i]`: the tower up to cube `i + 1` stood after that cube's drop.
    /// Cubes after the first failure are never dropped and stay false.
    pub on_top: Vec<bool>,
    /// 1-based cube at which the episode failed.
    pub failed_at: Option<usize>,
    pub tower: TowerState,
}

impl EpisodeOutcome {
    pub fn success(&self) -> bool {
        self.failed_at.is_none()
    }
}

/// Executes `actions` in order, stopping at the first failure.
pub fn execute(actions: &[StackAction], noise: &[[f64; 2]], config: &SimConfig) -> Result<EpisodeOutcome> {
    let mut tower = TowerState::new(config.cube_size);
    let mut on_top = vec![false; actions.len()];
    for (k, action) in actions.iter().enumerate() {
        tower = settle_with_noise(&tower, action, noise[k], config)?;
        if !tower.standing() {
            return Ok(EpisodeOutcome {
                on_top,
                failed_at: Some(k + 1),
                tower,
            });
        }
        on_top[k] = true;
    }
    Ok(EpisodeOutcome {
        on_top,
        failed_at: None,
        tower,
    })
}

/// Executes a single action, used by callers that decide between drops.
pub struct Episode<'a> {
    config: &'a SimConfig,
    noise: &'a [[f64; 2]],
    tower: TowerState,
    on_top: Vec<bool>,
    failed_at: Option<usize>,
}

impl<'a> Episode<'a> {
    pub fn new(config: &'a SimConfig, noise: &'a [[f64; 2]]) -> Self {
        Self {
            config,
            noise,
            tower: TowerState::new(config.cube_size),
            on_top: vec![false; config.cubes()],
            failed_at: None,
        }
    }

    pub fn failed_at(&self) -> Option<usize> {
        self.failed_at
    }

    /// Drops the next cube; returns whether the tower still stands.
    pub fn step(&mut self, action: &StackAction) -> Result<bool> {
        let k = action.cube - 1;
        self.tower = settle_with_noise(&self.tower, action, self.noise[k], self.config)?;
        if self.tower.standing() {
            self.on_top[k] = true;
            Ok(true)
        } else {
            self.failed_at = Some(action.cube);
            Ok(false)
        }
    }

    pub fn finish(self) -> EpisodeOutcome {
        EpisodeOutcome {
            on_top: self.on_top,
            failed_at: self.failed_at,
            tower: self.tower,
        }
    }
}

/// Converts commanded actions and recorded flags into a dataset row.
pub fn episode_sample(actions: &[StackAction], on_top: &[bool]) -> Sample {
    let mut s = Sample::new();
    for (a, &flag) in actions.iter().zip(on_top) {
        a.write_to(&mut s);
        s.insert(format!("onTop{}", a.cube), Value::Bool(flag));
    }
    s
}

fn episode_row(actions: &[StackAction], on_top: &[bool]) -> Vec<Value> {
    let mut row = Vec::with_capacity(4 * actions.len());
    for (a, &flag) in actions.iter().zip(on_top) {
        row.extend([
            Value::Real(a.x_off),
            Value::Real(a.y_off),
            Value::Real(a.drop_off),
            Value::Bool(flag),
        ]);
    }
    row
}

/// Generates `config.episodes` episodes in parallel; row `e` depends only on
/// `(config, e)`.
pub fn run_episodes(config: &SimConfig) -> Result<Dataset> {
    config.validate()?;
    let rows = (0..config.episodes as u64)
        .into_par_iter()
        .map(|e| {
            let draws = episode_draws(config, e);
            let outcome = execute(&draws.actions, &draws.noise, config)?;
            Ok(episode_row(&draws.actions, &outcome.on_top))
        })
        .collect::<Result<Vec<_>>>()?;
    let generator = match config.experiment {
        Experiment::E1 => "stack-sim/e1",
        Experiment::E2 => "stack-sim/e2",
    };
    Dataset::new(
        config.variables(),
        rows,
        Provenance {
            seed: Some(config.seed),
            generator: generator.into(),
            samples: config.episodes,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(mut c: SimConfig) -> SimConfig {
        c.noise_k = 0.0;
        c
    }

    fn act(cube: usize, x: f64, y: f64, z: f64) -> StackAction {
        StackAction { cube, x_off: x, y_off: y, drop_off: z }
    }

    #[test]
    fn centred_cube_rests() {
        let c = quiet(SimConfig::e1(1, 0));
        let out = execute(&[act(1, 0.0, 0.0, 0.005)], &[[0.0, 0.0]], &c).unwrap();
        assert!(out.success());
    }

    #[test]
    fn offset_beyond_support_falls() {
        let c = quiet(SimConfig::e1(1, 0));
        let out = execute(&[act(1, 0.03, 0.0, 0.01)], &[[0.0, 0.0]], &c).unwrap();
        assert_eq!(out.failed_at, Some(1));
        // Just inside the support margin still rests.
        let out = execute(&[act(1, 0.0199, 0.0, 0.01)], &[[0.0, 0.0]], &c).unwrap();
        assert!(out.success());
    }

    #[test]
    fn cumulative_drift_topples_at_the_base() {
        let c = quiet(SimConfig::e2(1, 0));
        let actions: Vec<_> = (1..=3).map(|i| act(i, 0.012, 0.0, 0.01)).collect();
        let noise = vec![[0.0, 0.0]; 3];
        let out = execute(&actions, &noise, &c).unwrap();
        assert_eq!(out.on_top, vec![true, true, false]);
        assert_eq!(out.failed_at, Some(3));
        // Everything above the base fell.
        assert_eq!(out.tower.positions.len(), 1);
        assert_eq!(out.tower.on_top, vec![false, false, false]);
    }

    #[test]
    fn stacking_onto_fallen_tower_is_rejected() {
        let c = quiet(SimConfig::e2(1, 0));
        let t = settle_with_noise(&TowerState::new(CUBE_SIZE), &act(1, 0.03, 0.0, 0.01), [0.0, 0.0], &c).unwrap();
        assert!(settle_with_noise(&t, &act(2, 0.0, 0.0, 0.01), [0.0, 0.0], &c).is_err());
    }

    #[test]
    fn degenerate_gaussian_is_constant() {
        let d = Distribution::Gaussian { mean: 0.0, std: 0.0, lower: -0.03, upper: 0.03 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| d.sample(&mut rng) == 0.0));
    }

    #[test]
    fn config_validation() {
        let mut c = SimConfig::e1(10, 0);
        c.margin = 0.03;
        assert!(c.validate().is_err());
        let mut c = SimConfig::e1(0, 0);
        assert!(c.validate().is_err());
        c.episodes = 1;
        c.noise_k = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn draws_depend_only_on_seed_and_episode() {
        let c = SimConfig::e2(10, 42);
        assert_eq!(episode_draws(&c, 3), episode_draws(&c, 3));
        assert_ne!(episode_draws(&c, 3), episode_draws(&c, 4));
    }

    #[test]
    fn config_json_round_trip() {
        let c = SimConfig::e2(100, 7);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<SimConfig>(&text).unwrap(), c);
        let minimal = r#"{"experiment":"e1","offset":{"type":"uniform","lower":-0.03,"upper":0.03},
            "drop":{"type":"uniform","lower":0.005,"upper":0.1},"episodes":5,"seed":1}"#;
        let parsed: SimConfig = serde_json::from_str(minimal).unwrap();
        assert_eq!(parsed, SimConfig::e1(5, 1));
    }
}
