use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::state::{ItemPool, NegotiationState, UtilityVector};
use super::NegotiationError;
use crate::game::PlayerId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstanceConfig {
    pub min_count: u32,
    pub max_count: u32,
    pub max_value: u32,
    pub min_turns: u32,
    pub max_turns: u32,
    /// Common total value of the pool for both agents. `None` takes the
    /// total implied by the first agent's draw.
    pub target_total: Option<u32>,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        InstanceConfig { min_count: 1, max_count: 5, max_value: 10, min_turns: 4, max_turns: 10, target_total: None }
    }
}

impl InstanceConfig {
    fn validate(&self) -> Result<(), NegotiationError> {
        if self.min_count == 0 || self.min_count > self.max_count {
            return Err(NegotiationError::Config(format!(
                "item counts need 1 <= min_count <= max_count, got {}..={}",
                self.min_count, self.max_count
            )));
        }
        if self.max_value == 0 {
            return Err(NegotiationError::Config("max_value must be positive".into()));
        }
        if self.min_turns == 0 || self.min_turns > self.max_turns {
            return Err(NegotiationError::Config(format!(
                "turn limits need 1 <= min_turns <= max_turns, got {}..={}",
                self.min_turns, self.max_turns
            )));
        }
        if let Some(total) = self.target_total {
            let reachable = self.max_value * self.max_count * 3;
            if total == 0 || total > reachable {
                return Err(NegotiationError::Config(format!("target_total {total} outside 1..={reachable}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleUtilities {
    pub player: UtilityVector,
    pub opponent: UtilityVector,
}

/// A sampled game. Utilities are tagged by role; the focal player is agent A
/// (seat 0) unless `mirrored`, in which case it takes seat 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationInstance {
    pub seed: u64,
    pub pool: ItemPool,
    pub utilities: RoleUtilities,
    pub max_turns: u32,
    pub mirrored: bool,
}

impl NegotiationInstance {
    /// Swaps the two agents' value vectors.
    pub fn mirror(&self) -> NegotiationInstance {
        NegotiationInstance {
            utilities: RoleUtilities { player: self.utilities.opponent, opponent: self.utilities.player },
            mirrored: !self.mirrored,
            ..self.clone()
        }
    }

    pub fn player_seat(&self) -> PlayerId {
        if self.mirrored {
            PlayerId::P1
        } else {
            PlayerId::P0
        }
    }

    pub fn seat_utilities(&self) -> [UtilityVector; 2] {
        let RoleUtilities { player, opponent } = self.utilities;
        if self.mirrored {
            [opponent, player]
        } else {
            [player, opponent]
        }
    }

    pub fn initial_state(&self) -> Result<NegotiationState, NegotiationError> {
        NegotiationState::new(self.pool, self.seat_utilities(), self.max_turns)
    }
}

const INNER_ATTEMPTS: usize = 2_000;
const OUTER_ATTEMPTS: usize = 10_000;

/// Values in `0..=max_value` with `dot(values, pool) == total`, found by
/// drawing two items at random and solving for the remaining one.
fn solve_values(rng: &mut ChaCha8Rng, pool: [u32; 3], total: u32, max_value: u32) -> Option<[u32; 3]> {
    let mut order = [0usize, 1, 2];
    for _ in 0..INNER_ATTEMPTS {
        order.shuffle(rng);
        let mut values = [0u32; 3];
        let mut spent = 0u32;
        for &i in &order[..2] {
            values[i] = rng.gen_range(0..=max_value);
            spent += values[i] * pool[i];
        }
        let last = order[2];
        if spent > total || !(total - spent).is_multiple_of(pool[last]) {
            continue;
        }
        let v = (total - spent) / pool[last];
        if v <= max_value {
            values[last] = v;
            return Some(values);
        }
    }
    None
}

/// Samples a pool, two value vectors with equal pool totals, and a turn
/// limit. Deterministic in `seed`.
pub fn sample_instance(seed: u64, cfg: &InstanceConfig) -> Result<NegotiationInstance, NegotiationError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..OUTER_ATTEMPTS {
        let pool = [(); 3].map(|_| rng.gen_range(cfg.min_count..=cfg.max_count));
        let first = match cfg.target_total {
            None => [(); 3].map(|_| rng.gen_range(1..=cfg.max_value)),
            Some(total) => match solve_values(&mut rng, pool, total, cfg.max_value) {
                Some(v) if v.iter().any(|&x| x > 0) => v,
                _ => continue,
            },
        };
        let total = UtilityVector(first).dot(pool);
        let Some(second) = solve_values(&mut rng, pool, total, cfg.max_value) else { continue };
        let max_turns = rng.gen_range(cfg.min_turns..=cfg.max_turns);
        return Ok(NegotiationInstance {
            seed,
            pool: ItemPool(pool),
            utilities: RoleUtilities { player: UtilityVector(first), opponent: UtilityVector(second) },
            max_turns,
            mirrored: false,
        });
    }
    Err(NegotiationError::Config(format!("no instance satisfies the value constraints of {cfg:?}")))
}
