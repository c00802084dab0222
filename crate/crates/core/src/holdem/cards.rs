use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::HoldemError;

pub const SUITS: [char; 4] = ['c', 'd', 'h', 's'];

/// A playing card. Rank runs 2..=14 with 14 the ace; suit indexes `SUITS`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Card {
    rank: u8,
    suit: u8,
}

impl Card {
    pub fn new(rank: u8, suit: u8) -> Result<Self, HoldemError> {
        if !(2..=14).contains(&rank) || suit > 3 {
            return Err(HoldemError::BadCard(format!("rank {rank} suit {suit}")));
        }
        Ok(Card { rank, suit })
    }

    pub fn rank(self) -> u8 {
        self.rank
    }

    pub fn suit(self) -> u8 {
        self.suit
    }

    /// Dense index in 0..52.
    pub fn index(self) -> usize {
        (self.rank as usize - 2) * 4 + self.suit as usize
    }

    pub fn from_index(index: usize) -> Card {
        assert!(index < 52, "card index {index} out of range");
        Card { rank: (index / 4) as u8 + 2, suit: (index % 4) as u8 }
    }
}

pub fn rank_char(rank: u8) -> char {
    match rank {
        2..=9 => (b'0' + rank) as char,
        10 => 'T',
        11 => 'J',
        12 => 'Q',
        13 => 'K',
        14 => 'A',
        _ => '?',
    }
}

impl fmt::Display for Card {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", rank_char(self.rank), SUITS[self.suit as usize])
    }
}

impl FromStr for Card {
    type Err = HoldemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.trim().chars();
        let (Some(r), Some(su), None) = (chars.next(), chars.next(), chars.next()) else {
            return Err(HoldemError::BadCard(s.to_string()));
        };
        let rank = match r.to_ascii_uppercase() {
            c @ '2'..='9' => c as u8 - b'0',
            'T' => 10,
            'J' => 11,
            'Q' => 12,
            'K' => 13,
            'A' => 14,
            _ => return Err(HoldemError::BadCard(s.to_string())),
        };
        let suit = SUITS
            .iter()
            .position(|&c| c == su.to_ascii_lowercase())
            .ok_or_else(|| HoldemError::BadCard(s.to_string()))?;
        Card::new(rank, suit as u8)
    }
}

impl Serialize for Card {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Card {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All 52 cards in index order.
pub fn full_deck() -> Vec<Card> {
    (0..52).map(Card::from_index).collect()
}

/// Parses a whitespace- or comma-separated card list such as `"As Kd 7h"`.
pub fn parse_cards(s: &str) -> Result<Vec<Card>, HoldemError> {
    s.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).map(str::parse).collect()
}

pub fn format_cards(cards: &[Card]) -> String {
    cards.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

pub(crate) fn check_distinct(cards: &[Card]) -> Result<(), HoldemError> {
    let mut seen = 0u64;
    for c in cards {
        let bit = 1u64 << c.index();
        if seen & bit != 0 {
            return Err(HoldemError::DuplicateCard(c.to_string()));
        }
        seen |= bit;
    }
    Ok(())
}
