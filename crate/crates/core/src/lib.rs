//! Certainty-gated reward-modulated Pong learner.
//!
//! A deterministic Pong simulator, small from-scratch backpropagation
//! networks, two learning agents (random-placement reward training and a
//! four-network certainty-gated policy), and the harness that trains them
//! against a near-perfect tracking opponent and scores checkpointed matches.

pub mod agent;
pub mod features;
pub mod harness;
pub mod net;
pub mod physics;
