//! Tradeable objects and transaction records shared by both market forms.

pub mod compositional;
pub mod minimal;

use crate::kernel::Stimulus;

pub use compositional::{
    auction_round, feedback_adjust, link, AuctionRoundResult, Ensemble, FeedbackPolicy, LinkError,
};
pub use minimal::{net_gain, propose_trade, settle_imitation, settle_pairwise, Offer, TradeError};

/// Which mechanism produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MarketKind {
    Minimal,
    Compositional,
}

impl MarketKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MarketKind::Minimal => "minimal",
            MarketKind::Compositional => "compositional",
        }
    }
}

/// A bid that went nowhere, or a completed exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Bid,
    Complete,
}

impl RecordKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RecordKind::Bid => "bid",
            RecordKind::Complete => "complete",
        }
    }
}

/// Outcome tag on a record: the gate reasons plus the settlement-level
/// shortfall case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordReason {
    Accepted,
    HashFail,
    OutOfRange,
    InsufficientBalance,
}

impl RecordReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            RecordReason::Accepted => "accepted",
            RecordReason::HashFail => "hash_fail",
            RecordReason::OutOfRange => "out_of_range",
            RecordReason::InsufficientBalance => "insufficient_balance",
        }
    }

    pub fn parse(s: &str) -> Option<RecordReason> {
        match s {
            "accepted" => Some(RecordReason::Accepted),
            "hash_fail" => Some(RecordReason::HashFail),
            "out_of_range" => Some(RecordReason::OutOfRange),
            "insufficient_balance" => Some(RecordReason::InsufficientBalance),
            _ => None,
        }
    }
}

impl From<crate::valuation::GateReason> for RecordReason {
    fn from(r: crate::valuation::GateReason) -> Self {
        match r {
            crate::valuation::GateReason::Accepted => RecordReason::Accepted,
            crate::valuation::GateReason::HashFail => RecordReason::HashFail,
            crate::valuation::GateReason::OutOfRange => RecordReason::OutOfRange,
        }
    }
}

/// Singleton objects stand alone in concept space; linked ones are members
/// of some ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PropositionKind {
    Singleton,
    Linked,
}

impl PropositionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PropositionKind::Singleton => "singleton",
            PropositionKind::Linked => "linked",
        }
    }
}

/// A tradeable object: a position in concept space and a base value.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposition {
    pub id: String,
    pub stimulus: Stimulus,
    pub base_value: f64,
    pub kind: PropositionKind,
}

impl Proposition {
    pub fn new(id: &str, coords: Vec<f64>, base_value: f64) -> Proposition {
        assert!(base_value.is_finite() && base_value > 0.0);
        Proposition {
            id: id.to_string(),
            stimulus: Stimulus::new(coords),
            base_value,
            kind: PropositionKind::Singleton,
        }
    }
}

/// One line of the trace: a bid or a completed exchange, with prices, gains,
/// any minted shortfall, and whether imitation overrode the gate.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TransactionRecord {
    pub tick: u64,
    pub market: MarketKind,
    pub buyer_id: u32,
    pub seller_id: u32,
    pub object_ref: String,
    pub kind: RecordKind,
    pub price: f64,
    pub gain_buyer_pct: f64,
    pub gain_seller_pct: f64,
    pub minted: f64,
    pub imitation: bool,
    pub reason: RecordReason,
}
