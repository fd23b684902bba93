// Temporary calibration probe; will be removed.
use pong_rml::features::encode_features;
use pong_rml::harness::*;
use pong_rml::net::{Network, NetworkSpec, TrainingSample};
use pong_rml::physics::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn collect_balls(n: usize, error_amp: f64, seed: u64) -> Vec<BallState> {
    let physics = PhysicsConfig::default();
    let opponent = OpponentConfig::default();
    let mut state = GameState::new(&physics);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut balls = Vec::with_capacity(n);
    while balls.len() < n {
        match state.rally_phase {
            RallyPhase::BetweenRallies => serve(&mut rng, &mut state, &physics).unwrap(),
            RallyPhase::TowardOpponent => {
                let cmd = opponent_command(&state, &opponent);
                advance_tick(&mut state, cmd, &physics);
            }
            RallyPhase::TowardAgent => {
                balls.push(state.ball);
                let y = intercept_oracle(&state.ball, AGENT_PLANE_X).unwrap();
                let jitter: f64 = rng.gen_range(-error_amp..=error_amp);
                run_rally(
                    &mut state,
                    y + jitter,
                    |s| opponent_command(s, &opponent),
                    &physics,
                    &mut NullSink,
                )
                .unwrap();
            }
        }
    }
    balls
}

fn accuracy_on(net: &Network, balls: &[BallState]) -> (f64, f64) {
    let physics = PhysicsConfig::default();
    let mut within = 0u32;
    let mut abs_err = 0.0;
    for b in balls {
        let f = encode_features(b, &physics).unwrap();
        let p = net.forward(f.as_slice()).unwrap()[0].clamp(0.0625, 0.9375);
        let target = intercept_oracle(b, AGENT_PLANE_X).unwrap();
        abs_err += (target - p).abs();
        if (target - p).abs() <= 0.0625 {
            within += 1;
        }
    }
    (
        f64::from(within) / balls.len() as f64,
        abs_err / balls.len() as f64,
    )
}

#[test]
#[ignore]
fn probe_capacity_sweep() {
    let physics = PhysicsConfig::default();
    let train_balls = collect_balls(500_000, 0.02, 11);
    let eval_balls = collect_balls(8_000, 0.02, 12);
    for hidden in [10usize, 24, 64] {
        for passes in [1usize, 4] {
            let mut net = Network::init(NetworkSpec::new(6, hidden, 1), 1).unwrap();
            let total = train_balls.len() * passes;
            let mut i = 0usize;
            for _ in 0..passes {
                for b in &train_balls {
                    let frac = i as f64 / total as f64;
                    net.set_learning_rate(2.0 * (1.0 - frac) + 0.1 * frac);
                    let f = encode_features(b, &physics).unwrap();
                    let target = intercept_oracle(b, AGENT_PLANE_X).unwrap();
                    net.backprop_step(&TrainingSample::full(
                        f.as_slice().to_vec(),
                        vec![target],
                    ))
                    .unwrap();
                    i += 1;
                }
            }
            let (acc_eval, mae_eval) = accuracy_on(&net, &eval_balls);
            let (acc_train, _) = accuracy_on(&net, &train_balls[..8_000]);
            println!(
                "hidden={hidden} passes={passes}: eval_acc={acc_eval:.3} train_acc={acc_train:.3} eval_mae={mae_eval:.4}"
            );
        }
    }
}
