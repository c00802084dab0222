use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cards::{full_deck, Card};
use super::eval::{evaluate_unchecked, HandCategory};
use super::HoldemError;
use crate::game::PlayerId;

/// A pre-dealt hand. `hole[0]` belongs to the focal player and `hole[1]` to
/// the opponent; the focal player sits in seat 1 when `mirrored` is set, so
/// a session and its mirror deal the same cards to the same seats while the
/// two agents trade places.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSpec {
    pub seed: u64,
    pub hole: [[Card; 2]; 2],
    pub board: [Card; 5],
    pub mirrored: bool,
}

impl SessionSpec {
    /// Swaps the two hole-card assignments.
    pub fn mirror(&self) -> SessionSpec {
        SessionSpec { seed: self.seed, hole: [self.hole[1], self.hole[0]], board: self.board, mirrored: !self.mirrored }
    }

    pub fn player_seat(&self) -> PlayerId {
        if self.mirrored {
            PlayerId::P1
        } else {
            PlayerId::P0
        }
    }

    /// Hole cards indexed by seat.
    pub fn seat_holes(&self) -> [[Card; 2]; 2] {
        if self.mirrored {
            [self.hole[1], self.hole[0]]
        } else {
            self.hole
        }
    }

    /// Final seven-card category of each role's hand.
    pub fn final_categories(&self) -> [HandCategory; 2] {
        self.hole.map(|h| {
            let mut cards = h.to_vec();
            cards.extend_from_slice(&self.board);
            evaluate_unchecked(&cards).category()
        })
    }

    pub fn strongest_category(&self) -> HandCategory {
        let [a, b] = self.final_categories();
        a.max(b)
    }
}

/// Relative acceptance weights over the stronger hand's final category.
/// Equal weights reproduce the natural deal distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthBoostConfig {
    pub weights: [f64; 9],
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u64,
}

fn default_max_attempts() -> u64 {
    10_000_000
}

impl Default for StrengthBoostConfig {
    /// Thins out the most common weak deals so that made hands of two pair
    /// and better turn up more often.
    fn default() -> Self {
        StrengthBoostConfig {
            weights: [0.25, 0.4, 0.8, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            max_attempts: default_max_attempts(),
        }
    }
}

impl StrengthBoostConfig {
    pub fn natural() -> Self {
        StrengthBoostConfig { weights: [1.0; 9], max_attempts: default_max_attempts() }
    }

    pub fn only_at_least(min: HandCategory) -> Self {
        let mut weights = [0.0; 9];
        for w in weights.iter_mut().skip(min.index()) {
            *w = 1.0;
        }
        StrengthBoostConfig { weights, max_attempts: default_max_attempts() }
    }

    pub fn validate(&self) -> Result<f64, HoldemError> {
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(HoldemError::Config(format!(
                "boost weights must be finite and non-negative: {:?}",
                self.weights
            )));
        }
        let max = self.weights.iter().copied().fold(0.0, f64::max);
        if max <= 0.0 {
            return Err(HoldemError::Config("boost weights are all zero".into()));
        }
        Ok(max)
    }
}

/// Deals one session deterministically from `seed`, accepting each candidate
/// deal with probability proportional to the weight of its stronger final
/// hand category.
pub fn sample_session(seed: u64, boost: &StrengthBoostConfig) -> Result<SessionSpec, HoldemError> {
    let max_weight = boost.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut deck = full_deck();
    for _ in 0..boost.max_attempts {
        deck.shuffle(&mut rng);
        let spec = SessionSpec {
            seed,
            hole: [[deck[0], deck[1]], [deck[2], deck[3]]],
            board: [deck[4], deck[5], deck[6], deck[7], deck[8]],
            mirrored: false,
        };
        let weight = boost.weights[spec.strongest_category().index()];
        if weight >= max_weight || rng.gen::<f64>() * max_weight < weight {
            return Ok(spec);
        }
    }
    Err(HoldemError::Config(format!(
        "no deal accepted after {} attempts; boost weights too concentrated",
        boost.max_attempts
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_session() {
        let cfg = StrengthBoostConfig::default();
        assert_eq!(sample_session(7, &cfg).unwrap(), sample_session(7, &cfg).unwrap());
        assert_ne!(sample_session(7, &cfg).unwrap(), sample_session(8, &cfg).unwrap());
    }

    #[test]
    fn all_zero_boost_is_rejected() {
        let cfg = StrengthBoostConfig { weights: [0.0; 9], max_attempts: 10 };
        assert!(matches!(sample_session(1, &cfg), Err(HoldemError::Config(_))));
        let mut neg = StrengthBoostConfig::natural();
        neg.weights[3] = -1.0;
        assert!(sample_session(1, &neg).is_err());
    }

    #[test]
    fn mirror_swaps_hands_only() {
        let s = sample_session(3, &StrengthBoostConfig::natural()).unwrap();
        let m = s.mirror();
        assert_eq!(m.hole, [s.hole[1], s.hole[0]]);
        assert_eq!(m.board, s.board);
        assert_eq!(m.seed, s.seed);
        assert_eq!(m.mirror(), s);
        // the physical deal is unchanged; only the focal seat moves
        assert_eq!(m.seat_holes(), s.seat_holes());
        assert_eq!(m.player_seat(), PlayerId::P1);
    }

    #[test]
    fn json_round_trip() {
        let s = sample_session(11, &StrengthBoostConfig::default()).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"board\":[\""));
        let back: SessionSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
