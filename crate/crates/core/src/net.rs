//! Minimal feed-forward network: one sigmoid hidden layer, sigmoid outputs,
//! online stochastic gradient descent on a masked mean-squared error.
//!
//! Weights are stored row-per-unit with a trailing bias column, so a layer
//! mapping `n` inputs to `m` units is an `m x (n+1)` matrix. The mask lets a
//! caller exclude individual outputs from a training step (used when an
//! outcome provides no target for the position output).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// On-disk format version for `.net.json` files.
pub const NET_FORMAT_VERSION: u32 = 1;

/// Learning rate used when a network is created without an explicit override.
pub const DEFAULT_LEARNING_RATE: f64 = 0.3;

/// Default step for central finite differences.
pub const DEFAULT_GRADCHECK_EPSILON: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network spec: every layer width must be >= 1")]
    InvalidSpec,
    #[error("shape mismatch: {what} has length {got}, expected {expected}")]
    ShapeMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("weight file field `{field}`: {problem}")]
    Load { field: String, problem: String },
    #[error("weight file is not valid JSON: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Layer widths of a one-hidden-layer network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub n_in: usize,
    pub n_hidden: usize,
    pub n_out: usize,
}

impl NetworkSpec {
    pub const fn new(n_in: usize, n_hidden: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_hidden,
            n_out,
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.n_in == 0 || self.n_hidden == 0 || self.n_out == 0 {
            return Err(NetError::InvalidSpec);
        }
        Ok(())
    }
}

/// One training example: input, per-output targets, and which outputs train.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub mask: Vec<bool>,
}

impl TrainingSample {
    /// Sample that trains every output.
    pub fn full(input: Vec<f64>, target: Vec<f64>) -> Self {
        let mask = vec![true; target.len()];
        Self {
            input,
            target,
            mask,
        }
    }

    pub fn masked(input: Vec<f64>, target: Vec<f64>, mask: Vec<bool>) -> Self {
        Self {
            input,
            target,
            mask,
        }
    }
}

/// Analytic gradient of the masked MSE with respect to both weight matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<Vec<f64>>,
    pub w2: Vec<Vec<f64>>,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Feed-forward network with one hidden layer, sigmoid everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    spec: NetworkSpec,
    /// n_hidden rows of n_in weights plus a bias entry.
    w1: Vec<Vec<f64>>,
    /// n_out rows of n_hidden weights plus a bias entry.
    w2: Vec<Vec<f64>>,
    learning_rate: f64,
}

impl Network {
    /// Seeded initialization: weights uniform in (-0.5, 0.5), biases zero.
    pub fn init(spec: NetworkSpec, seed: u64) -> Result<Self, NetError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(Self::init_with_rng(spec, &mut rng))
    }

    /// Same initialization, drawing from a caller-owned generator.
    pub fn init_with_rng<R: Rng>(spec: NetworkSpec, rng: &mut R) -> Self {
        let mut row = |n: usize| -> Vec<f64> {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
            v.push(0.0); // bias
            v
        };
        let w1 = (0..spec.n_hidden).map(|_| row(spec.n_in)).collect();
        let w2 = (0..spec.n_out).map(|_| row(spec.n_hidden)).collect();
        Self {
            spec,
            w1,
            w2,
            learning_rate: DEFAULT_LEARNING_RATE,
        }
    }

    /// Build a network from explicit weights. Shapes are validated.
    pub fn from_weights(
        spec: NetworkSpec,
        w1: Vec<Vec<f64>>,
        w2: Vec<Vec<f64>>,
        learning_rate: f64,
    ) -> Result<Self, NetError> {
        spec.validate()?;
        check_matrix("w1", &w1, spec.n_hidden, spec.n_in + 1)?;
        check_matrix("w2", &w2, spec.n_out, spec.n_hidden + 1)?;
        Ok(Self {
            spec,
            w1,
            w2,
            learning_rate,
        })
    }

    pub fn spec(&self) -> NetworkSpec {
        self.spec
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn set_learning_rate(&mut self, learning_rate: f64) {
        self.learning_rate = learning_rate;
    }

    pub fn weights(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.w1, &self.w2)
    }

    #[cfg(test)]
    pub(crate) fn weights_mut_for_tests(&mut self) -> (&mut [Vec<f64>], &mut [Vec<f64>]) {
        (&mut self.w1, &mut self.w2)
    }

    fn layer(weights: &[Vec<f64>], input: &[f64]) -> Vec<f64> {
        weights
            .iter()
            .map(|row| {
                let mut z = row[input.len()]; // bias
                for (w, x) in row[..input.len()].iter().zip(input) {
                    z += w * x;
                }
                sigmoid(z)
            })
            .collect()
    }

    /// Pure forward pass; outputs are strictly inside (0,1).
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NetError> {
        if input.len() != self.spec.n_in {
            return Err(NetError::ShapeMismatch {
                what: "input",
                got: input.len(),
                expected: self.spec.n_in,
            });
        }
        let hidden = Self::layer(&self.w1, input);
        Ok(Self::layer(&self.w2, &hidden))
    }

    fn check_sample(&self, sample: &TrainingSample) -> Result<(), NetError> {
        if sample.input.len() != self.spec.n_in {
            return Err(NetError::ShapeMismatch {
                what: "input",
                got: sample.input.len(),
                expected: self.spec.n_in,
            });
        }
        if sample.target.len() != self.spec.n_out {
            return Err(NetError::ShapeMismatch {
                what: "target",
                got: sample.target.len(),
                expected: self.spec.n_out,
            });
        }
        if sample.mask.len() != self.spec.n_out {
            return Err(NetError::ShapeMismatch {
                what: "mask",
                got: sample.mask.len(),
                expected: self.spec.n_out,
            });
        }
        Ok(())
    }

    /// Masked MSE: `0.5 * sum_j mask_j (out_j - target_j)^2`.
    pub fn masked_loss(&self, sample: &TrainingSample) -> Result<f64, NetError> {
        self.check_sample(sample)?;
        let out = self.forward(&sample.input)?;
        Ok(out
            .iter()
            .zip(&sample.target)
            .zip(&sample.mask)
            .filter(|(_, &m)| m)
            .map(|((o, t), _)| 0.5 * (o - t) * (o - t))
            .sum())
    }

    /// Backpropagated gradient of the masked MSE. Masked outputs contribute
    /// exactly zero to every entry.
    pub fn gradient(&self, sample: &TrainingSample) -> Result<Gradients, NetError> {
        self.check_sample(sample)?;
        let hidden = Self::layer(&self.w1, &sample.input);
        let out = Self::layer(&self.w2, &hidden);

        // delta_out_j = dL/dz_j = mask_j (out_j - t_j) out_j (1 - out_j)
        let delta_out: Vec<f64> = out
            .iter()
            .zip(&sample.target)
            .zip(&sample.mask)
            .map(|((&o, &t), &m)| if m { (o - t) * o * (1.0 - o) } else { 0.0 })
            .collect();

        let grad_w2: Vec<Vec<f64>> = delta_out
            .iter()
            .map(|&d| {
                let mut row: Vec<f64> = hidden.iter().map(|&h| d * h).collect();
                row.push(d); // bias input is 1
                row
            })
            .collect();

        let delta_hidden: Vec<f64> = (0..self.spec.n_hidden)
            .map(|k| {
                let upstream: f64 = delta_out
                    .iter()
                    .zip(&self.w2)
                    .map(|(&d, row)| d * row[k])
                    .sum();
                upstream * hidden[k] * (1.0 - hidden[k])
            })
            .collect();

        let grad_w1: Vec<Vec<f64>> = delta_hidden
            .iter()
            .map(|&d| {
                let mut row: Vec<f64> = sample.input.iter().map(|&x| d * x).collect();
                row.push(d);
                row
            })
            .collect();

        Ok(Gradients {
            w1: grad_w1,
            w2: grad_w2,
        })
    }

    /// One online SGD step. Returns the pre-step masked loss.
    ///
    /// An all-false mask is a no-op (nothing asked to train); the loss 0.0 is
    /// returned and no weight moves.
    pub fn backprop_step(&mut self, sample: &TrainingSample) -> Result<f64, NetError> {
        self.check_sample(sample)?;
        if !sample.mask.iter().any(|&m| m) {
            return Ok(0.0);
        }
        let loss = self.masked_loss(sample)?;
        let grads = self.gradient(sample)?;
        for (row, grad_row) in self.w1.iter_mut().zip(&grads.w1) {
            for (w, g) in row.iter_mut().zip(grad_row) {
                *w -= self.learning_rate * g;
            }
        }
        for (row, grad_row) in self.w2.iter_mut().zip(&grads.w2) {
            for (w, g) in row.iter_mut().zip(grad_row) {
                *w -= self.learning_rate * g;
            }
        }
        Ok(loss)
    }
}

fn check_matrix(
    what: &'static str,
    m: &[Vec<f64>],
    rows: usize,
    cols: usize,
) -> Result<(), NetError> {
    if m.len() != rows {
        return Err(NetError::ShapeMismatch {
            what,
            got: m.len(),
            expected: rows,
        });
    }
    for row in m {
        if row.len() != cols {
            return Err(NetError::ShapeMismatch {
                what,
                got: row.len(),
                expected: cols,
            });
        }
    }
    Ok(())
}

/// Central finite differences of the masked MSE with respect to every weight.
///
/// This is the independent oracle for `Network::gradient`: it only uses the
/// forward pass, never the backpropagation path.
pub fn numeric_gradient(
    net: &Network,
    sample: &TrainingSample,
    epsilon: f64,
) -> Result<Gradients, NetError> {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let mut probe = net.clone();
    let mut grads = Gradients {
        w1: vec![vec![0.0; net.spec.n_in + 1]; net.spec.n_hidden],
        w2: vec![vec![0.0; net.spec.n_hidden + 1]; net.spec.n_out],
    };
    for layer in 0..2 {
        let (rows, cols) = if layer == 0 {
            (net.spec.n_hidden, net.spec.n_in + 1)
        } else {
            (net.spec.n_out, net.spec.n_hidden + 1)
        };
        for r in 0..rows {
            for c in 0..cols {
                let original = if layer == 0 {
                    net.w1[r][c]
                } else {
                    net.w2[r][c]
                };
                let mut eval = |value: f64, probe: &mut Network| -> Result<f64, NetError> {
                    if layer == 0 {
                        probe.w1[r][c] = value;
                    } else {
                        probe.w2[r][c] = value;
                    }
                    probe.masked_loss(sample)
                };
                let plus = eval(original + epsilon, &mut probe)?;
                let minus = eval(original - epsilon, &mut probe)?;
                eval(original, &mut probe)?; // restore
                let g = (plus - minus) / (2.0 * epsilon);
                if layer == 0 {
                    grads.w1[r][c] = g;
                } else {
                    grads.w2[r][c] = g;
                }
            }
        }
    }
    Ok(grads)
}

/// Worst relative disagreement between two gradient sets.
///
/// `|a - n| / max(|a| + |n|, 1e-8)`; the floor keeps noise on exactly-zero
/// entries (e.g. masked outputs) from registering as mismatches.
pub fn max_relative_error(analytic: &Gradients, numeric: &Gradients) -> f64 {
    let pairs = analytic
        .w1
        .iter()
        .flatten()
        .zip(numeric.w1.iter().flatten())
        .chain(analytic.w2.iter().flatten().zip(numeric.w2.iter().flatten()));
    pairs
        .map(|(&a, &n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

/// On-disk shape of one network, shared by `.net.json` files and the agent
/// checkpoint format (which embeds one of these per network).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkFile {
    pub format_version: u32,
    pub spec: NetworkSpec,
    pub learning_rate: f64,
    pub w1: Vec<Vec<f64>>,
    pub w2: Vec<Vec<f64>>,
}

impl From<&Network> for NetworkFile {
    fn from(net: &Network) -> Self {
        Self {
            format_version: NET_FORMAT_VERSION,
            spec: net.spec,
            learning_rate: net.learning_rate,
            w1: net.w1.clone(),
            w2: net.w2.clone(),
        }
    }
}

impl TryFrom<NetworkFile> for Network {
    type Error = NetError;

    /// Validate everything before handing out a network, so a bad file can
    /// never yield a partial one.
    fn try_from(file: NetworkFile) -> Result<Self, NetError> {
        if file.format_version != NET_FORMAT_VERSION {
            return Err(NetError::Load {
                field: "format_version".into(),
                problem: format!(
                    "found {}, this build reads version {NET_FORMAT_VERSION}",
                    file.format_version
                ),
            });
        }
        file.spec.validate()?;
        check_matrix("w1", &file.w1, file.spec.n_hidden, file.spec.n_in + 1)?;
        check_matrix("w2", &file.w2, file.spec.n_out, file.spec.n_hidden + 1)?;
        for (name, matrix) in [("w1", &file.w1), ("w2", &file.w2)] {
            for (r, row) in matrix.iter().enumerate() {
                for (c, value) in row.iter().enumerate() {
                    if !value.is_finite() {
                        return Err(NetError::Load {
                            field: format!("{name}[{r}][{c}]"),
                            problem: format!("non-finite value {value}"),
                        });
                    }
                }
            }
        }
        if !(file.learning_rate.is_finite() && file.learning_rate > 0.0) {
            return Err(NetError::Load {
                field: "learning_rate".into(),
                problem: "must be finite and > 0".into(),
            });
        }
        Network::from_weights(file.spec, file.w1, file.w2, file.learning_rate)
    }
}

/// Serialize to the `.net.json` format. Round trips are exact: serde_json
/// emits the shortest representation that parses back to the same f64.
pub fn save_network(net: &Network) -> Vec<u8> {
    let file = NetworkFile::from(net);
    let mut bytes = serde_json::to_vec_pretty(&file).expect("network serialization cannot fail");
    bytes.push(b'\n');
    bytes
}

/// Parse and validate a `.net.json` byte stream.
pub fn load_network(bytes: &[u8]) -> Result<Network, NetError> {
    let file: NetworkFile = serde_json::from_slice(bytes)?;
    Network::try_from(file)
}
