//! The reactive jammer: senses every channel once per slot and immediately
//! jams the loudest one.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::argmax;
use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct JammerState {
    /// `None` until the first sensing.
    pub current_channel: Option<usize>,
}

impl JammerState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One sensing step. Returns the channel jammed in this very slot.
///
/// With probability `random_prob` the jammer ignores its measurement and
/// picks a uniform channel; otherwise it takes the argmax of `sensed`,
/// lowest index on ties. The stream is only consumed when `random_prob > 0`.
pub fn react(
    _state: JammerState,
    sensed: &[f64],
    n_channels: usize,
    random_prob: f64,
    stream: &mut Stream,
) -> Result<JammerState> {
    if sensed.len() != n_channels {
        return Err(Error::Config(format!(
            "sensed spectrum has {} entries for {n_channels} channels",
            sensed.len()
        )));
    }
    let channel = if random_prob > 0.0 && stream.random::<f64>() < random_prob {
        stream.random_range(0..n_channels)
    } else {
        argmax(sensed.iter().copied())
    };
    Ok(JammerState {
        current_channel: Some(channel),
    })
}

/// Deterministic reaction (no random hops).
pub fn loudest(sensed: &[f64]) -> usize {
    argmax(sensed.iter().copied())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Lane};

    fn jam(sensed: &[f64]) -> usize {
        let mut s = stream(0, 0, Lane::Jammer);
        react(JammerState::new(), sensed, sensed.len(), 0.0, &mut s)
            .unwrap()
            .current_channel
            .unwrap()
    }

    #[test]
    fn picks_loudest_channel() {
        assert_eq!(jam(&[0.5, 3.2, 1.1]), 1);
        assert_eq!(jam(&[2.0, 2.0, 1.0]), 0);
        assert_eq!(jam(&[0.0, 0.0, 0.0]), 0);
    }

    #[test]
    fn length_mismatch_is_a_config_error() {
        let mut s = stream(0, 0, Lane::Jammer);
        let err = react(JammerState::new(), &[1.0, 2.0], 3, 0.0, &mut s).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn deterministic_reaction_is_idempotent() {
        let sensed = [0.3, 0.9, 0.9, 0.1];
        let mut s = stream(1, 0, Lane::Jammer);
        let first = react(JammerState::new(), &sensed, 4, 0.0, &mut s).unwrap();
        let second = react(first, &sensed, 4, 0.0, &mut s).unwrap();
        assert_eq!(first, second);
        assert_eq!(first.current_channel, Some(1));
    }

    #[test]
    fn random_hops_cover_all_channels() {
        let mut s = stream(3, 0, Lane::Jammer);
        let mut seen = [0usize; 3];
        let mut state = JammerState::new();
        for _ in 0..3000 {
            state = react(state, &[5.0, 0.0, 0.0], 3, 0.5, &mut s).unwrap();
            seen[state.current_channel.unwrap()] += 1;
        }
        // Channel 0: 1/2 + 1/6 of the slots.
        assert!(seen[0] > 1800 && seen[1] > 350 && seen[2] > 350, "{seen:?}");
    }
}
