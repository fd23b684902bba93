//! The two learning agents.
//!
//! The simple agent owns one prediction network, places its paddle uniformly
//! at random while training, and learns only from successful returns. The
//! four-network agent runs a prediction network plus positive-reward,
//! negative-reward, and intuition networks in parallel: the reward pair
//! yields a certainty score that gates placement between trusting the
//! prediction, asking the intuition network for the best-scoring candidate,
//! and falling back to a random position.

use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{extend_features, FeatureVector};
use crate::net::{NetError, Network, NetworkFile, NetworkSpec, TrainingSample};
use crate::physics::Outcome;

/// 6:10:1 — the simple agent's prediction network.
pub const SIMPLE_PREDICTION_SPEC: NetworkSpec = NetworkSpec::new(6, 10, 1);
/// 6:12:1 — the four-network agent's prediction network.
pub const FOUR_NET_PREDICTION_SPEC: NetworkSpec = NetworkSpec::new(6, 12, 1);
/// 8:16:2 — positive- and negative-reward networks (position + binary flag).
pub const REWARD_SPEC: NetworkSpec = NetworkSpec::new(8, 16, 2);
/// 8:24:3 — intuition network (position + hit flag + miss flag).
pub const INTUITION_SPEC: NetworkSpec = NetworkSpec::new(8, 24, 3);

/// On-disk version of the agent checkpoint format.
pub const AGENT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("agent checkpoint is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("agent checkpoint field `format_version`: found {found}, this build reads {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("agent checkpoint field `{field}` is missing for agent_kind {kind}")]
    MissingField { field: &'static str, kind: AgentKind },
    #[error("{network} network has spec {got:?}, expected {expected:?}")]
    WrongSpec {
        network: &'static str,
        got: NetworkSpec,
        expected: NetworkSpec,
    },
    #[error("threshold config: {field} {constraint}")]
    InvalidThresholds {
        field: &'static str,
        constraint: &'static str,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Simple,
    FourNet,
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AgentKind::Simple => write!(f, "simple"),
            AgentKind::FourNet => write!(f, "four_net"),
        }
    }
}

impl std::str::FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "simple" => Ok(AgentKind::Simple),
            "four_net" => Ok(AgentKind::FourNet),
            other => Err(format!(
                "unknown agent kind `{other}` (expected `simple` or `four_net`)"
            )),
        }
    }
}

/// Certainty gate thresholds and the intuition candidate grid size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    /// Certainty at or above which the prediction may be trusted.
    pub high: f64,
    /// Minimum mean of the recent-certainty window for trusting the prediction.
    pub window_mean_min: f64,
    /// Certainty at or above which the intuition network places the paddle;
    /// below it the placement is random.
    pub low: f64,
    /// Number of evenly spaced candidate positions the intuition scan tries.
    pub intuition_grid: usize,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            high: 0.95,
            window_mean_min: 0.80,
            // An untrained pair of reward networks yields certainty near
            // 0.25, so a fresh agent starts below the gate, in Random mode.
            low: 0.30,
            intuition_grid: 33,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.low >= 0.0 && self.low < self.high && self.high <= 1.0) {
            return Err(AgentError::InvalidThresholds {
                field: "low/high",
                constraint: "must satisfy 0 <= low < high <= 1",
            });
        }
        if !(0.0..=1.0).contains(&self.window_mean_min) {
            return Err(AgentError::InvalidThresholds {
                field: "window_mean_min",
                constraint: "must lie in [0, 1]",
            });
        }
        if self.intuition_grid < 2 {
            return Err(AgentError::InvalidThresholds {
                field: "intuition_grid",
                constraint: "must be >= 2",
            });
        }
        Ok(())
    }
}

/// Ring buffer over the most recent certainty values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertaintyWindow {
    cap: usize,
    values: VecDeque<f64>,
}

impl CertaintyWindow {
    pub fn new(cap: usize) -> Self {
        assert!(cap >= 1, "certainty window needs at least one slot");
        Self {
            cap,
            values: VecDeque::with_capacity(cap),
        }
    }

    pub fn push(&mut self, certainty: f64) {
        if self.values.len() == self.cap {
            self.values.pop_front();
        }
        self.values.push_back(certainty);
    }

    /// Mean over the stored values; an empty window reads as 0 so a cold
    /// start can never pass the gate.
    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.cap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlacementMode {
    Predicted,
    Intuition,
    Random,
}

/// Where the paddle goes this rally, and why.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementDecision {
    pub position: f64,
    pub mode: PlacementMode,
    /// Gate statistic for four-network training placements; 0 when it was
    /// not evaluated (simple agent, or training off).
    pub certainty: f64,
}

/// Certainty that the current predicted placement returns the ball:
/// the positive network's hit output times the complement of the negative
/// network's miss output. Both inputs are sigmoid activations, so the
/// product lies in [0,1].
pub fn compute_certainty(pos_hit_out: f64, neg_miss_out: f64) -> f64 {
    pos_hit_out * (1.0 - neg_miss_out)
}

/// Three-way gate, thresholds inclusive.
///
/// Trust the prediction only when the instantaneous certainty clears `high`
/// AND the window mean clears `window_mean_min`; otherwise use intuition
/// down to `low`, and place randomly below that.
pub fn select_mode(
    certainty: f64,
    window_mean: f64,
    thresholds: &ThresholdConfig,
) -> PlacementMode {
    if certainty >= thresholds.high && window_mean >= thresholds.window_mean_min {
        PlacementMode::Predicted
    } else if certainty >= thresholds.low {
        PlacementMode::Intuition
    } else {
        PlacementMode::Random
    }
}

/// Scan `grid` evenly spaced candidate positions through the intuition
/// network and return the one with the best hit-times-not-miss score.
/// Ties break toward the smallest candidate.
pub fn intuition_argmax(intuition: &Network, f: &FeatureVector, grid: usize) -> f64 {
    debug_assert!(grid >= 2);
    let mut best_q = 0.0;
    let mut best_score = f64::NEG_INFINITY;
    for k in 0..grid {
        let q = k as f64 / (grid - 1) as f64;
        let x = extend_features(f, q);
        let out = intuition
            .forward(x.as_slice())
            .expect("intuition network input width");
        let score = out[1] * (1.0 - out[2]);
        if score > best_score {
            best_score = score;
            best_q = q;
        }
    }
    best_q
}

/// Random-placement reward learner: one 6:10:1 prediction network.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleAgent {
    prediction: Network,
}

impl SimpleAgent {
    pub fn new(seed: u64, learning_rate: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut prediction = Network::init_with_rng(SIMPLE_PREDICTION_SPEC, &mut rng);
        prediction.set_learning_rate(learning_rate);
        Self { prediction }
    }
}

/// Certainty-gated learner: prediction, positive-reward, negative-reward,
/// and intuition networks plus the gate state.
#[derive(Debug, Clone, PartialEq)]
pub struct FourNetAgent {
    prediction: Network,
    positive: Network,
    negative: Network,
    intuition: Network,
    thresholds: ThresholdConfig,
    window: CertaintyWindow,
}

impl FourNetAgent {
    pub fn new(seed: u64, learning_rate: f64, thresholds: ThresholdConfig, window_len: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut init = |spec| {
            let mut net = Network::init_with_rng(spec, &mut rng);
            net.set_learning_rate(learning_rate);
            net
        };
        Self {
            prediction: init(FOUR_NET_PREDICTION_SPEC),
            positive: init(REWARD_SPEC),
            negative: init(REWARD_SPEC),
            intuition: init(INTUITION_SPEC),
            thresholds,
            window: CertaintyWindow::new(window_len),
        }
    }

    pub fn thresholds(&self) -> &ThresholdConfig {
        &self.thresholds
    }

    pub fn window(&self) -> &CertaintyWindow {
        &self.window
    }
}

/// Either agent, behind one training/evaluation interface.
#[derive(Debug, Clone, PartialEq)]
pub enum Agent {
    Simple(SimpleAgent),
    FourNet(FourNetAgent),
}

impl Agent {
    pub fn new(
        kind: AgentKind,
        seed: u64,
        learning_rate: f64,
        thresholds: ThresholdConfig,
        window_len: usize,
    ) -> Self {
        match kind {
            AgentKind::Simple => Agent::Simple(SimpleAgent::new(seed, learning_rate)),
            AgentKind::FourNet => Agent::FourNet(FourNetAgent::new(
                seed,
                learning_rate,
                thresholds,
                window_len,
            )),
        }
    }

    pub fn kind(&self) -> AgentKind {
        match self {
            Agent::Simple(_) => AgentKind::Simple,
            Agent::FourNet(_) => AgentKind::FourNet,
        }
    }

    fn prediction(&self) -> &Network {
        match self {
            Agent::Simple(a) => &a.prediction,
            Agent::FourNet(a) => &a.prediction,
        }
    }

    /// Sole output of the prediction network.
    pub fn predict_position(&self, f: &FeatureVector) -> f64 {
        self.prediction()
            .forward(f.as_slice())
            .expect("prediction network input width")[0]
    }

    /// Decide where the paddle goes for the incoming ball.
    ///
    /// Training on: the simple agent places uniformly at random; the
    /// four-network agent evaluates the certainty of its own prediction,
    /// gates through `select_mode`, and records the certainty in its window.
    /// Training off: both agents place at the prediction and touch nothing.
    pub fn choose_placement<R: Rng>(
        &mut self,
        f: &FeatureVector,
        training: bool,
        rng: &mut R,
    ) -> PlacementDecision {
        match self {
            Agent::Simple(_) => {
                if training {
                    PlacementDecision {
                        position: rng.gen_range(0.0..1.0),
                        mode: PlacementMode::Random,
                        certainty: 0.0,
                    }
                } else {
                    PlacementDecision {
                        position: self.predict_position(f),
                        mode: PlacementMode::Predicted,
                        certainty: 0.0,
                    }
                }
            }
            Agent::FourNet(a) => {
                let p = a.prediction.forward(f.as_slice()).expect("input width")[0];
                if !training {
                    return PlacementDecision {
                        position: p,
                        mode: PlacementMode::Predicted,
                        certainty: 0.0,
                    };
                }
                let x = extend_features(f, p);
                let pos_hit = a.positive.forward(x.as_slice()).expect("input width")[1];
                let neg_miss = a.negative.forward(x.as_slice()).expect("input width")[1];
                let certainty = compute_certainty(pos_hit, neg_miss);
                let mode = select_mode(certainty, a.window.mean(), &a.thresholds);
                let position = match mode {
                    PlacementMode::Predicted => p,
                    PlacementMode::Intuition => {
                        intuition_argmax(&a.intuition, f, a.thresholds.intuition_grid)
                    }
                    PlacementMode::Random => rng.gen_range(0.0..1.0),
                };
                a.window.push(certainty);
                PlacementDecision {
                    position,
                    mode,
                    certainty,
                }
            }
        }
    }

    /// Reward-modulated update after the rally resolves.
    ///
    /// `placed` is the paddle center that actually played. On a hit the
    /// prediction network regresses toward it and the reward/intuition
    /// networks learn (position, hit). On a miss the prediction network is
    /// untouched and the reward/intuition networks learn only their binary
    /// outputs — a missed placement is no position target, so that output is
    /// masked out of the loss.
    pub fn learn_from_outcome(&mut self, f: &FeatureVector, placed: f64, outcome: Outcome) {
        match self {
            Agent::Simple(a) => {
                if outcome == Outcome::Hit {
                    let sample = TrainingSample::full(f.as_slice().to_vec(), vec![placed]);
                    a.prediction.backprop_step(&sample).expect("sample shape");
                }
            }
            Agent::FourNet(a) => {
                let x = extend_features(f, placed).as_slice().to_vec();
                match outcome {
                    Outcome::Hit => {
                        a.prediction
                            .backprop_step(&TrainingSample::full(
                                f.as_slice().to_vec(),
                                vec![placed],
                            ))
                            .expect("sample shape");
                        a.positive
                            .backprop_step(&TrainingSample::full(x.clone(), vec![placed, 1.0]))
                            .expect("sample shape");
                        a.negative
                            .backprop_step(&TrainingSample::full(x.clone(), vec![placed, 0.0]))
                            .expect("sample shape");
                        a.intuition
                            .backprop_step(&TrainingSample::full(x, vec![placed, 1.0, 0.0]))
                            .expect("sample shape");
                    }
                    Outcome::Miss => {
                        let flag_only = vec![false, true];
                        a.positive
                            .backprop_step(&TrainingSample::masked(
                                x.clone(),
                                vec![0.0, 0.0],
                                flag_only.clone(),
                            ))
                            .expect("sample shape");
                        a.negative
                            .backprop_step(&TrainingSample::masked(
                                x.clone(),
                                vec![0.0, 1.0],
                                flag_only,
                            ))
                            .expect("sample shape");
                        a.intuition
                            .backprop_step(&TrainingSample::masked(
                                x,
                                vec![0.0, 0.0, 1.0],
                                vec![false, true, true],
                            ))
                            .expect("sample shape");
                    }
                }
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct AgentCheckpointFile {
    format_version: u32,
    agent_kind: AgentKind,
    prediction: NetworkFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    positive: Option<NetworkFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    negative: Option<NetworkFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intuition: Option<NetworkFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    thresholds: Option<ThresholdConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    window: Option<CertaintyWindow>,
}

/// Serialize an agent checkpoint: every network in the `.net.json` object
/// layout plus the gate thresholds and window contents.
pub fn save_agent(agent: &Agent) -> Vec<u8> {
    let file = match agent {
        Agent::Simple(a) => AgentCheckpointFile {
            format_version: AGENT_FORMAT_VERSION,
            agent_kind: AgentKind::Simple,
            prediction: NetworkFile::from(&a.prediction),
            positive: None,
            negative: None,
            intuition: None,
            thresholds: None,
            window: None,
        },
        Agent::FourNet(a) => AgentCheckpointFile {
            format_version: AGENT_FORMAT_VERSION,
            agent_kind: AgentKind::FourNet,
            prediction: NetworkFile::from(&a.prediction),
            positive: Some(NetworkFile::from(&a.positive)),
            negative: Some(NetworkFile::from(&a.negative)),
            intuition: Some(NetworkFile::from(&a.intuition)),
            thresholds: Some(a.thresholds),
            window: Some(a.window.clone()),
        },
    };
    let mut bytes = serde_json::to_vec_pretty(&file).expect("agent serialization cannot fail");
    bytes.push(b'\n');
    bytes
}

fn expect_spec(
    network: &'static str,
    net: Network,
    expected: NetworkSpec,
) -> Result<Network, AgentError> {
    if net.spec() != expected {
        return Err(AgentError::WrongSpec {
            network,
            got: net.spec(),
            expected,
        });
    }
    Ok(net)
}

/// Parse and validate an agent checkpoint.
pub fn load_agent(bytes: &[u8]) -> Result<Agent, AgentError> {
    let file: AgentCheckpointFile = serde_json::from_slice(bytes)?;
    if file.format_version != AGENT_FORMAT_VERSION {
        return Err(AgentError::VersionMismatch {
            found: file.format_version,
            expected: AGENT_FORMAT_VERSION,
        });
    }
    let kind = file.agent_kind;
    let prediction = Network::try_from(file.prediction)?;
    match kind {
        AgentKind::Simple => {
            let prediction = expect_spec("prediction", prediction, SIMPLE_PREDICTION_SPEC)?;
            Ok(Agent::Simple(SimpleAgent { prediction }))
        }
        AgentKind::FourNet => {
            let take = |field: &'static str,
                        value: Option<NetworkFile>|
             -> Result<NetworkFile, AgentError> {
                value.ok_or(AgentError::MissingField { field, kind })
            };
            let prediction = expect_spec("prediction", prediction, FOUR_NET_PREDICTION_SPEC)?;
            let positive = expect_spec(
                "positive",
                Network::try_from(take("positive", file.positive)?)?,
                REWARD_SPEC,
            )?;
            let negative = expect_spec(
                "negative",
                Network::try_from(take("negative", file.negative)?)?,
                REWARD_SPEC,
            )?;
            let intuition = expect_spec(
                "intuition",
                Network::try_from(take("intuition", file.intuition)?)?,
                INTUITION_SPEC,
            )?;
            let thresholds = file.thresholds.ok_or(AgentError::MissingField {
                field: "thresholds",
                kind,
            })?;
            thresholds.validate()?;
            let window = file.window.ok_or(AgentError::MissingField {
                field: "window",
                kind,
            })?;
            Ok(Agent::FourNet(FourNetAgent {
                prediction,
                positive,
                negative,
                intuition,
                thresholds,
                window,
            }))
        }
    }
}
