use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::cards::Card;
use super::eval::{evaluate_unchecked, HandCategory, HandRank};
use super::session::SessionSpec;
use super::HoldemError;
use crate::game::{Game, GameError, PlayerId, ToAct, Trajectory};

pub const SMALL_BLIND: u32 = 1;
pub const BIG_BLIND: u32 = 2;
pub const MAX_RAISES_PER_ROUND: u8 = 4;

/// Betting actions. The derived order is the canonical action order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HoldemAction {
    Call,
    Raise,
    Fold,
    Check,
}

impl HoldemAction {
    pub const ALL: [HoldemAction; 4] =
        [HoldemAction::Call, HoldemAction::Raise, HoldemAction::Fold, HoldemAction::Check];

    pub fn as_str(self) -> &'static str {
        match self {
            HoldemAction::Call => "call",
            HoldemAction::Raise => "raise",
            HoldemAction::Fold => "fold",
            HoldemAction::Check => "check",
        }
    }
}

impl fmt::Display for HoldemAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HoldemAction {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().trim_matches(|c| c == '"' || c == '\'').to_ascii_lowercase();
        HoldemAction::ALL
            .into_iter()
            .find(|a| a.as_str() == t)
            .ok_or_else(|| GameError::Contract(format!("unknown hold'em action {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Street {
    Preflop,
    Flop,
    Turn,
    River,
}

impl Street {
    pub fn board_len(self) -> usize {
        match self {
            Street::Preflop => 0,
            Street::Flop => 3,
            Street::Turn => 4,
            Street::River => 5,
        }
    }

    fn next(self) -> Option<Street> {
        match self {
            Street::Preflop => Some(Street::Flop),
            Street::Flop => Some(Street::Turn),
            Street::Turn => Some(Street::River),
            Street::River => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Street::Preflop => "Pre-Flop",
            Street::Flop => "Flop",
            Street::Turn => "Turn",
            Street::River => "River",
        }
    }
}

/// Fixed raise size: the small bet on the first two streets, double that on
/// the turn and river.
pub fn bet_size(street: Street) -> u32 {
    match street {
        Street::Preflop | Street::Flop => BIG_BLIND,
        Street::Turn | Street::River => 2 * BIG_BLIND,
    }
}

/// Heads-up Limit Hold'em state. Seat 0 posts the small blind, acts first
/// preflop and second on later streets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HoldemState {
    hole: [[Card; 2]; 2],
    board_schedule: [Card; 5],
    street: Street,
    invested: [u32; 2],
    raises_this_round: u8,
    acted: [bool; 2],
    to_act: ToAct,
    folded: Option<PlayerId>,
    history: Trajectory<HoldemAction, ()>,
    /// Street of each history event, parallel to `history.events`.
    event_streets: Vec<Street>,
}

impl HoldemState {
    /// Deals a hand with seat-indexed hole cards and the full board schedule.
    /// Blinds are posted; seat 0 is to act.
    pub fn new(hole: [[Card; 2]; 2], board: [Card; 5]) -> Result<Self, HoldemError> {
        let mut all = hole.concat();
        all.extend_from_slice(&board);
        super::cards::check_distinct(&all)?;
        Ok(HoldemState {
            hole,
            board_schedule: board,
            street: Street::Preflop,
            invested: [SMALL_BLIND, BIG_BLIND],
            raises_this_round: 0,
            acted: [false, false],
            to_act: ToAct::Player(PlayerId::P0),
            folded: None,
            history: Trajectory::new(),
            event_streets: Vec::new(),
        })
    }

    pub fn from_session(spec: &SessionSpec) -> Result<Self, HoldemError> {
        HoldemState::new(spec.seat_holes(), spec.board)
    }

    pub fn street(&self) -> Street {
        self.street
    }

    pub fn board(&self) -> &[Card] {
        &self.board_schedule[..self.street.board_len()]
    }

    pub fn hole(&self, seat: PlayerId) -> [Card; 2] {
        self.hole[seat.index()]
    }

    pub fn invested(&self) -> [u32; 2] {
        self.invested
    }

    pub fn pot(&self) -> u32 {
        self.invested.iter().sum()
    }

    pub fn raises_this_round(&self) -> u8 {
        self.raises_this_round
    }

    pub fn folded(&self) -> Option<PlayerId> {
        self.folded
    }

    pub fn history(&self) -> &Trajectory<HoldemAction, ()> {
        &self.history
    }

    pub fn event_streets(&self) -> &[Street] {
        &self.event_streets
    }

    pub fn to_call(&self, seat: PlayerId) -> u32 {
        self.invested[seat.other().index()].saturating_sub(self.invested[seat.index()])
    }

    /// Current made-hand rank for a seat using its hole cards and the
    /// revealed board.
    pub fn hand_rank(&self, seat: PlayerId) -> HandRank {
        let mut cards = self.hole[seat.index()].to_vec();
        cards.extend_from_slice(self.board());
        evaluate_unchecked(&cards)
    }

    pub fn hand_category(&self, seat: PlayerId) -> HandCategory {
        self.hand_rank(seat).category()
    }

    fn showdown_rank(&self, seat: PlayerId) -> HandRank {
        let mut cards = self.hole[seat.index()].to_vec();
        cards.extend_from_slice(&self.board_schedule);
        evaluate_unchecked(&cards)
    }

    fn close_round(&mut self) {
        match self.street.next() {
            Some(_) => self.to_act = ToAct::Chance,
            None => self.to_act = ToAct::Terminal,
        }
    }
}

impl Game for HoldemState {
    type Action = HoldemAction;
    type View = HoldemView;

    fn to_act(&self) -> ToAct {
        self.to_act
    }

    fn step(&self) -> usize {
        self.history.len()
    }

    fn legal_actions(&self) -> Result<Vec<HoldemAction>, GameError> {
        let ToAct::Player(seat) = self.to_act else {
            return Err(GameError::Contract("no legal actions outside a player decision".into()));
        };
        let facing = self.to_call(seat) > 0;
        let can_raise = self.raises_this_round < MAX_RAISES_PER_ROUND;
        Ok(HoldemAction::ALL
            .into_iter()
            .filter(|a| match a {
                HoldemAction::Call => facing,
                HoldemAction::Raise => can_raise,
                HoldemAction::Fold => true,
                HoldemAction::Check => !facing,
            })
            .collect())
    }

    fn apply(&self, action: &HoldemAction) -> Result<Self, GameError> {
        let legal = self.legal_actions()?;
        if !legal.contains(action) {
            return Err(GameError::illegal(action, &legal));
        }
        let ToAct::Player(seat) = self.to_act else { unreachable!("legal_actions checked") };
        let mut next = self.clone();
        next.history.push(seat, *action);
        next.event_streets.push(self.street);
        next.acted[seat.index()] = true;
        let owed = self.to_call(seat);
        match action {
            HoldemAction::Fold => {
                next.folded = Some(seat);
                next.to_act = ToAct::Terminal;
                return Ok(next);
            }
            HoldemAction::Raise => {
                next.invested[seat.index()] += owed + bet_size(self.street);
                next.raises_this_round += 1;
                next.acted[seat.other().index()] = false;
            }
            HoldemAction::Call => next.invested[seat.index()] += owed,
            HoldemAction::Check => {}
        }
        let level = next.invested[0] == next.invested[1];
        if level && next.acted.iter().all(|&a| a) {
            next.close_round();
        } else {
            next.to_act = ToAct::Player(seat.other());
        }
        Ok(next)
    }

    fn advance_chance(&self) -> Result<Self, GameError> {
        if self.to_act != ToAct::Chance {
            return Err(GameError::Contract("no public cards pending".into()));
        }
        let mut next = self.clone();
        next.street = self.street.next().expect("chance only before the river");
        next.raises_this_round = 0;
        next.acted = [false, false];
        next.to_act = ToAct::Player(PlayerId::P1);
        Ok(next)
    }

    fn payoff(&self, player: PlayerId) -> Result<f64, GameError> {
        if self.to_act != ToAct::Terminal {
            return Err(GameError::Contract("payoff requested before the hand ended".into()));
        }
        let winner_gain = |winner: PlayerId| -> i64 {
            let gain = self.invested[winner.other().index()] as i64;
            if player == winner {
                gain
            } else {
                -gain
            }
        };
        let value = match self.folded {
            Some(f) => winner_gain(f.other()),
            None => match self.showdown_rank(PlayerId::P0).cmp(&self.showdown_rank(PlayerId::P1)) {
                std::cmp::Ordering::Greater => winner_gain(PlayerId::P0),
                std::cmp::Ordering::Less => winner_gain(PlayerId::P1),
                std::cmp::Ordering::Equal => 0,
            },
        };
        Ok(value as f64)
    }

    fn view(&self, player: PlayerId) -> HoldemView {
        HoldemView {
            seat: player,
            hand: self.hole[player.index()],
            board: self.board().to_vec(),
            street: self.street,
            invested: self.invested,
            raises_this_round: self.raises_this_round,
            to_act: self.to_act,
            legal: self.legal_actions().unwrap_or_default(),
            history: self.history.public(),
            event_streets: self.event_streets.clone(),
        }
    }
}

/// One seat's information set: its own hole cards plus everything public.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HoldemView {
    pub seat: PlayerId,
    pub hand: [Card; 2],
    pub board: Vec<Card>,
    pub street: Street,
    pub invested: [u32; 2],
    pub raises_this_round: u8,
    pub to_act: ToAct,
    pub legal: Vec<HoldemAction>,
    pub history: Trajectory<HoldemAction, ()>,
    pub event_streets: Vec<Street>,
}

impl HoldemView {
    pub fn to_call(&self) -> u32 {
        self.invested[self.seat.other().index()].saturating_sub(self.invested[self.seat.index()])
    }

    pub fn hand_category(&self) -> HandCategory {
        let mut cards = self.hand.to_vec();
        cards.extend_from_slice(&self.board);
        evaluate_unchecked(&cards).category()
    }

    pub fn opponent_actions(&self) -> impl Iterator<Item = &HoldemAction> {
        self.history.actions_of(self.seat.other())
    }
}
