use std::fmt;

use serde::{Deserialize, Serialize};

use super::cards::{check_distinct, Card};
use super::HoldemError;

/// Poker hand class, 0 = high card through 8 = straight flush.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum HandCategory {
    HighCard = 0,
    OnePair = 1,
    TwoPair = 2,
    ThreeOfAKind = 3,
    Straight = 4,
    Flush = 5,
    FullHouse = 6,
    FourOfAKind = 7,
    StraightFlush = 8,
}

impl HandCategory {
    pub const ALL: [HandCategory; 9] = [
        HandCategory::HighCard,
        HandCategory::OnePair,
        HandCategory::TwoPair,
        HandCategory::ThreeOfAKind,
        HandCategory::Straight,
        HandCategory::Flush,
        HandCategory::FullHouse,
        HandCategory::FourOfAKind,
        HandCategory::StraightFlush,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            HandCategory::HighCard => "High Card",
            HandCategory::OnePair => "One Pair",
            HandCategory::TwoPair => "Two Pair",
            HandCategory::ThreeOfAKind => "Three of a Kind",
            HandCategory::Straight => "Straight",
            HandCategory::Flush => "Flush",
            HandCategory::FullHouse => "Full House",
            HandCategory::FourOfAKind => "Four of a Kind",
            HandCategory::StraightFlush => "Straight Flush",
        }
    }
}

impl From<HandCategory> for u8 {
    fn from(c: HandCategory) -> u8 {
        c as u8
    }
}

impl TryFrom<u8> for HandCategory {
    type Error = HoldemError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        HandCategory::ALL
            .get(v as usize)
            .copied()
            .ok_or_else(|| HoldemError::Config(format!("hand category {v} outside 0..=8")))
    }
}

impl fmt::Display for HandCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Totally ordered hand value: category in bits 20.., then up to five
/// tie-break ranks, most significant first, one nibble each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HandRank(u32);

impl HandRank {
    fn from_parts(category: HandCategory, kickers: &[u8]) -> Self {
        let mut v = (category as u32) << 20;
        for (i, &k) in kickers.iter().take(5).enumerate() {
            v |= (k as u32) << (16 - 4 * i);
        }
        HandRank(v)
    }

    pub fn category(self) -> HandCategory {
        HandCategory::ALL[(self.0 >> 20) as usize]
    }

    pub fn value(self) -> u32 {
        self.0
    }
}

/// Highest straight in a rank bitmask (bit r set for rank r, ace also
/// counted as 1 via bit 1). Returns the top rank.
fn top_straight(mask: u16) -> Option<u8> {
    let mask = if mask & (1 << 14) != 0 { mask | 0b10 } else { mask };
    (5..=14u8).rev().find(|&top| {
        let run = 0b11111u16 << (top - 4);
        mask & run == run
    })
}

fn ranks_desc(mask: u16) -> impl Iterator<Item = u8> {
    (2..=14u8).rev().filter(move |r| mask & (1 << r) != 0)
}

/// Evaluates the best hand formed by up to seven distinct cards. Fewer than
/// five cards rank by pairs/trips/quads and high cards only.
pub fn evaluate(cards: &[Card]) -> Result<HandRank, HoldemError> {
    if cards.is_empty() || cards.len() > 7 {
        return Err(HoldemError::CardCount { expected: "1..=7", got: cards.len() });
    }
    check_distinct(cards)?;
    Ok(evaluate_unchecked(cards))
}

pub(crate) fn evaluate_unchecked(cards: &[Card]) -> HandRank {
    let mut counts = [0u8; 15];
    let mut suit_masks = [0u16; 4];
    let mut rank_mask = 0u16;
    for c in cards {
        counts[c.rank() as usize] += 1;
        suit_masks[c.suit() as usize] |= 1 << c.rank();
        rank_mask |= 1 << c.rank();
    }

    if let Some(&flush_mask) = suit_masks.iter().find(|m| m.count_ones() >= 5) {
        if let Some(top) = top_straight(flush_mask) {
            return HandRank::from_parts(HandCategory::StraightFlush, &[top]);
        }
    }

    let mut quads = Vec::new();
    let mut trips = Vec::new();
    let mut pairs = Vec::new();
    for r in (2..=14u8).rev() {
        match counts[r as usize] {
            4 => quads.push(r),
            3 => trips.push(r),
            2 => pairs.push(r),
            _ => {}
        }
    }
    let kickers_excluding =
        |used: &[u8], n: usize| -> Vec<u8> { ranks_desc(rank_mask).filter(|r| !used.contains(r)).take(n).collect() };

    if let Some(&q) = quads.first() {
        let mut k = vec![q];
        k.extend(kickers_excluding(&[q], 1));
        return HandRank::from_parts(HandCategory::FourOfAKind, &k);
    }
    if let Some(&t) = trips.first() {
        // the pair part may come from a second set of trips
        let pair = trips.get(1).copied().into_iter().chain(pairs.first().copied()).max();
        if let Some(p) = pair {
            return HandRank::from_parts(HandCategory::FullHouse, &[t, p]);
        }
    }
    if let Some(&flush_mask) = suit_masks.iter().find(|m| m.count_ones() >= 5) {
        let k: Vec<u8> = ranks_desc(flush_mask).take(5).collect();
        return HandRank::from_parts(HandCategory::Flush, &k);
    }
    if let Some(top) = top_straight(rank_mask) {
        return HandRank::from_parts(HandCategory::Straight, &[top]);
    }
    if let Some(&t) = trips.first() {
        let mut k = vec![t];
        k.extend(kickers_excluding(&[t], 2));
        return HandRank::from_parts(HandCategory::ThreeOfAKind, &k);
    }
    if pairs.len() >= 2 {
        let (hi, lo) = (pairs[0], pairs[1]);
        let mut k = vec![hi, lo];
        k.extend(kickers_excluding(&[hi, lo], 1));
        return HandRank::from_parts(HandCategory::TwoPair, &k);
    }
    if let Some(&p) = pairs.first() {
        let mut k = vec![p];
        k.extend(kickers_excluding(&[p], 3));
        return HandRank::from_parts(HandCategory::OnePair, &k);
    }
    let k: Vec<u8> = ranks_desc(rank_mask).take(5).collect();
    HandRank::from_parts(HandCategory::HighCard, &k)
}

/// Best five-of-seven rank.
pub fn evaluate7(cards: &[Card]) -> Result<HandRank, HoldemError> {
    if cards.len() != 7 {
        return Err(HoldemError::CardCount { expected: "7", got: cards.len() });
    }
    evaluate(cards)
}

pub fn categorize(cards: &[Card]) -> Result<HandCategory, HoldemError> {
    evaluate7(cards).map(HandRank::category)
}
