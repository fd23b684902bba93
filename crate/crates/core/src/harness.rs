//! Training loop, evaluation matches, and the checkpointed comparison of the
//! two agent architectures against the near-perfect tracking opponent.
//!
//! One epoch is one placement-and-outcome cycle: wait for a ball heading
//! toward the agent, encode it, place the paddle, observe hit or miss, learn.
//! Evaluation runs with training off and its own generator, so pausing a
//! training run to score it never disturbs the training stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agent, AgentKind, PlacementMode, ThresholdConfig};
use crate::features::encode_features;
use crate::net::DEFAULT_LEARNING_RATE;
use crate::physics::{
    advance_tick, intercept_oracle, run_rally, serve, GameState, NullSink, Outcome, PhysicsConfig,
    RallyPhase, TickSink, AGENT_PLANE_X,
};

/// Abort threshold for a single evaluation match.
pub const MATCH_TICK_GUARD: u64 = 100_000_000;

/// Default number of recent certainties the four-network gate averages.
pub const DEFAULT_WINDOW_LEN: usize = 10;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(
        "match aborted after {ticks} ticks at {agent_points}/{target} agent points \
         (degenerate agent/opponent pairing)"
    )]
    MatchAborted {
        ticks: u64,
        agent_points: u64,
        target: u64,
    },
    #[error("comparison config: {0}")]
    InvalidConfig(String),
}

/// Stable seed derivation for independent generator streams.
///
/// splitmix64 finalizer over `base` and a stream tag; used so evaluation,
/// environment, and weight-initialization randomness never share a stream.
pub fn mix_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const ENV_STREAM: u64 = 1;
const AGENT_STREAM: u64 = 2;
const EVAL_STREAM: u64 = 3;

fn kind_tag(kind: AgentKind) -> u64 {
    match kind {
        AgentKind::Simple => 0x51,
        AgentKind::FourNet => 0xF4,
    }
}

/// Near-perfect opponent: tracks the ball with bounded speed (the lag) plus
/// a sinusoidal wobble so it misses occasionally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpponentConfig {
    /// Paddle speed limit per tick.
    pub max_speed: f64,
    /// Wobble amplitude in field units.
    pub wobble_amp: f64,
    /// Wobble angular frequency in radians per tick.
    pub wobble_freq: f64,
}

impl Default for OpponentConfig {
    fn default() -> Self {
        Self {
            max_speed: 0.012,
            wobble_amp: 0.05,
            wobble_freq: 0.37,
        }
    }
}

impl OpponentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        for (name, v) in [
            ("max_speed", self.max_speed),
            ("wobble_amp", self.wobble_amp),
            ("wobble_freq", self.wobble_freq),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HarnessError::InvalidConfig(format!(
                    "opponent.{name} must be finite and > 0"
                )));
            }
        }
        Ok(())
    }
}

/// Velocity command for the opponent paddle this tick: chase the ball's
/// current y plus the wobble offset, landing exactly on the target when it
/// is within one step.
pub fn opponent_command(state: &GameState, cfg: &OpponentConfig) -> f64 {
    let wobble = cfg.wobble_amp * (cfg.wobble_freq * state.tick as f64).sin();
    let target = state.ball.pos_y + wobble;
    (target - state.opp_paddle.center_y).clamp(-cfg.max_speed, cfg.max_speed)
}

/// One training epoch, as recorded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub mode: PlacementMode,
    pub certainty: f64,
    pub outcome: Outcome,
}

/// Evaluation outcome: play until the agent reaches the target score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchResult {
    pub agent_points: u64,
    pub opp_points: u64,
    /// Balls the agent faced (hits + misses).
    pub rallies: u64,
    pub agent_hit_rate: f64,
}

/// A resumable training run: environment state plus the single generator
/// stream that drives serves and random placements.
pub struct TrainingSession {
    state: GameState,
    rng: ChaCha8Rng,
    physics: PhysicsConfig,
    opponent: OpponentConfig,
    epochs_done: u64,
}

impl TrainingSession {
    pub fn new(env_seed: u64, physics: PhysicsConfig, opponent: OpponentConfig) -> Self {
        Self {
            state: GameState::new(&physics),
            rng: ChaCha8Rng::seed_from_u64(env_seed),
            physics,
            opponent,
            epochs_done: 0,
        }
    }

    pub fn epochs_done(&self) -> u64 {
        self.epochs_done
    }

    /// Train for `epochs` placement-and-outcome cycles.
    pub fn train(&mut self, agent: &mut Agent, epochs: u64) {
        self.train_inner(agent, epochs, |_| {});
    }

    /// Same loop, returning one record per epoch.
    pub fn train_recorded(&mut self, agent: &mut Agent, epochs: u64) -> Vec<EpochRecord> {
        let mut records = Vec::with_capacity(epochs as usize);
        self.train_inner(agent, epochs, |r| records.push(r));
        records
    }

    fn train_inner<F: FnMut(EpochRecord)>(&mut self, agent: &mut Agent, epochs: u64, mut log: F) {
        for _ in 0..epochs {
            // Bring a ball toward the agent: serve if the rally is over,
            // let the opponent play out inbound returns.
            loop {
                match self.state.rally_phase {
                    RallyPhase::TowardAgent => break,
                    RallyPhase::BetweenRallies => {
                        serve(&mut self.rng, &mut self.state, &self.physics)
                            .expect("phase checked");
                    }
                    RallyPhase::TowardOpponent => {
                        let cmd = opponent_command(&self.state, &self.opponent);
                        advance_tick(&mut self.state, cmd, &self.physics);
                    }
                }
            }
            let features = encode_features(&self.state.ball, &self.physics)
                .expect("ball is moving toward the agent");
            let decision = agent.choose_placement(&features, true, &mut self.rng);
            let opponent = self.opponent;
            let outcome = run_rally(
                &mut self.state,
                decision.position,
                |s| opponent_command(s, &opponent),
                &self.physics,
                &mut NullSink,
            )
            .expect("phase checked");
            // Learn from the paddle center that actually played (the
            // decision clamped into the field).
            let placed = self.state.agent_paddle.center_y;
            agent.learn_from_outcome(&features, placed, outcome.result);
            log(EpochRecord {
                epoch: self.epochs_done,
                mode: decision.mode,
                certainty: decision.certainty,
                outcome: outcome.result,
            });
            self.epochs_done += 1;
        }
    }
}

/// Convenience wrapper: fresh session, train, return the records.
pub fn run_training(
    agent: &mut Agent,
    epochs: u64,
    env_seed: u64,
    physics: PhysicsConfig,
    opponent: OpponentConfig,
) -> Vec<EpochRecord> {
    TrainingSession::new(env_seed, physics, opponent).train_recorded(agent, epochs)
}

/// Who places the agent paddle during an evaluation match.
pub enum EvalPolicy<'a> {
    /// Training off: placement is the prediction network output.
    Agent(&'a Agent),
    /// Reference player: placement straight from the intercept oracle.
    Oracle,
}

/// Play a full match with training off until the agent scores
/// `target_points`; the opponent's points scored meanwhile are recorded.
///
/// Aborts with an error after `MATCH_TICK_GUARD` ticks — that signals an
/// agent/opponent pairing that can never finish.
pub fn run_match<S: TickSink>(
    policy: &EvalPolicy<'_>,
    target_points: u64,
    seed: u64,
    physics: &PhysicsConfig,
    opponent: &OpponentConfig,
    sink: &mut S,
) -> Result<MatchResult, HarnessError> {
    assert!(target_points >= 1, "target_points must be >= 1");
    let mut state = GameState::new(physics);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    let mut misses = 0u64;

    while state.agent_score < target_points {
        if state.tick > MATCH_TICK_GUARD {
            return Err(HarnessError::MatchAborted {
                ticks: state.tick,
                agent_points: state.agent_score,
                target: target_points,
            });
        }
        match state.rally_phase {
            RallyPhase::BetweenRallies => {
                serve(&mut rng, &mut state, physics).expect("phase checked");
            }
            RallyPhase::TowardOpponent => {
                let cmd = opponent_command(&state, opponent);
                let events = advance_tick(&mut state, cmd, physics);
                sink.record(&state, &events);
            }
            RallyPhase::TowardAgent => {
                let placement = match policy {
                    EvalPolicy::Agent(agent) => {
                        let features = encode_features(&state.ball, physics)
                            .expect("ball is moving toward the agent");
                        agent.predict_position(&features)
                    }
                    EvalPolicy::Oracle => intercept_oracle(&state.ball, AGENT_PLANE_X)
                        .expect("ball is moving toward the agent"),
                };
                let outcome = run_rally(
                    &mut state,
                    placement,
                    |s| opponent_command(s, opponent),
                    physics,
                    sink,
                )
                .expect("phase checked");
                match outcome.result {
                    Outcome::Hit => hits += 1,
                    Outcome::Miss => misses += 1,
                }
            }
        }
    }

    let rallies = hits + misses;
    Ok(MatchResult {
        agent_points: state.agent_score,
        opp_points: state.opp_score,
        rallies,
        agent_hit_rate: if rallies == 0 {
            0.0
        } else {
            hits as f64 / rallies as f64
        },
    })
}

/// Everything `compare_architectures` needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub seeds: Vec<u64>,
    /// Epoch counts at which training pauses for a scoring match; ascending.
    pub checkpoints: Vec<u64>,
    pub target_points: u64,
    pub learning_rate: f64,
    pub thresholds: ThresholdConfig,
    pub window_len: usize,
    pub physics: PhysicsConfig,
    pub opponent: OpponentConfig,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            seeds: vec![1, 2, 3, 4, 5],
            checkpoints: vec![500_000, 1_000_000, 2_000_000, 5_000_000],
            target_points: 10_000,
            learning_rate: DEFAULT_LEARNING_RATE,
            thresholds: ThresholdConfig::default(),
            window_len: DEFAULT_WINDOW_LEN,
            physics: PhysicsConfig::default(),
            opponent: OpponentConfig::default(),
        }
    }
}

impl CompareConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.seeds.is_empty() {
            return Err(HarnessError::InvalidConfig("seeds must be non-empty".into()));
        }
        if self.checkpoints.is_empty() {
            return Err(HarnessError::InvalidConfig(
                "checkpoints must be non-empty".into(),
            ));
        }
        if !self.checkpoints.windows(2).all(|w| w[0] < w[1]) {
            return Err(HarnessError::InvalidConfig(
                "checkpoints must be strictly increasing".into(),
            ));
        }
        if self.target_points == 0 {
            return Err(HarnessError::InvalidConfig(
                "target_points must be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(HarnessError::InvalidConfig(
                "learning_rate must be finite and > 0".into(),
            ));
        }
        if self.window_len == 0 {
            return Err(HarnessError::InvalidConfig("window_len must be >= 1".into()));
        }
        self.thresholds
            .validate()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        self.physics
            .validate()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
        self.opponent.validate()?;
        Ok(())
    }
}

/// One evaluation row of the comparison CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckpointRow {
    pub agent_kind: AgentKind,
    pub seed: u64,
    pub checkpoint_epochs: u64,
    pub result: MatchResult,
}

/// One (agent kind, seed) training run with its checkpoint evaluations.
pub struct ComparisonRun {
    pub kind: AgentKind,
    pub seed: u64,
    pub rows: Vec<CheckpointRow>,
    pub final_agent: Agent,
}

/// All runs of a comparison, ordered seed-major with the simple agent first.
pub struct CheckpointReport {
    pub runs: Vec<ComparisonRun>,
}

impl CheckpointReport {
    pub fn rows(&self) -> impl Iterator<Item = &CheckpointRow> {
        self.runs.iter().flat_map(|r| r.rows.iter())
    }

    /// Results for one agent kind at one checkpoint, across seeds.
    pub fn results_at(&self, kind: AgentKind, checkpoint: u64) -> Vec<&MatchResult> {
        self.rows()
            .filter(|r| r.agent_kind == kind && r.checkpoint_epochs == checkpoint)
            .map(|r| &r.result)
            .collect()
    }

    /// CSV with one row per (agent kind, seed, checkpoint) evaluation.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut csv_writer = csv::Writer::from_writer(writer);
        csv_writer.write_record([
            "agent_kind",
            "seed",
            "checkpoint_epochs",
            "agent_points",
            "opp_points",
            "rallies",
            "agent_hit_rate",
        ])?;
        for row in self.rows() {
            csv_writer.write_record(&[
                row.agent_kind.to_string(),
                row.seed.to_string(),
                row.checkpoint_epochs.to_string(),
                row.result.agent_points.to_string(),
                row.result.opp_points.to_string(),
                row.result.rallies.to_string(),
                row.result.agent_hit_rate.to_string(),
            ])?;
        }
        csv_writer.flush()?;
        Ok(())
    }
}

/// Train one agent with pauses at each checkpoint for a scoring match.
///
/// Evaluation draws from a generator derived from (seed, kind, checkpoint),
/// never from the training stream, so the run is bit-identical to an
/// uninterrupted one.
pub fn run_checkpointed(
    kind: AgentKind,
    seed: u64,
    cfg: &CompareConfig,
) -> Result<ComparisonRun, HarnessError> {
    let mut agent = Agent::new(
        kind,
        mix_seed(seed, AGENT_STREAM ^ kind_tag(kind)),
        cfg.learning_rate,
        cfg.thresholds,
        cfg.window_len,
    );
    let mut session = TrainingSession::new(mix_seed(seed, ENV_STREAM), cfg.physics, cfg.opponent);
    let mut rows = Vec::with_capacity(cfg.checkpoints.len());
    for &checkpoint in &cfg.checkpoints {
        session.train(&mut agent, checkpoint - session.epochs_done());
        let eval_seed = mix_seed(mix_seed(seed, checkpoint), EVAL_STREAM ^ kind_tag(kind));
        let result = run_match(
            &EvalPolicy::Agent(&agent),
            cfg.target_points,
            eval_seed,
            &cfg.physics,
            &cfg.opponent,
            &mut NullSink,
        )?;
        rows.push(CheckpointRow {
            agent_kind: kind,
            seed,
            checkpoint_epochs: checkpoint,
            result,
        });
    }
    Ok(ComparisonRun {
        kind,
        seed,
        rows,
        final_agent: agent,
    })
}

/// Train both architectures on identically-seeded environments for every
/// seed, scoring at each checkpoint. Runs are independent and execute in
/// parallel; the report order is deterministic (seed-major, simple first).
pub fn compare_architectures(cfg: &CompareConfig) -> Result<CheckpointReport, HarnessError> {
    cfg.validate()?;
    let jobs: Vec<(u64, AgentKind)> = cfg
        .seeds
        .iter()
        .flat_map(|&seed| [(seed, AgentKind::Simple), (seed, AgentKind::FourNet)])
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(seed, kind)| run_checkpointed(kind, seed, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CheckpointReport { runs })
}
