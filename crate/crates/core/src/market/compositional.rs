//! One-to-all auction over linked propositions.
//!
//! An operator links propositions into an ensemble and offers it to every
//! agent at a single price. Accepted agents fill at that price and receive a
//! non-transferable share; the acceptance rate drives a multiplicative
//! feedback on the price, and a persistently cold ensemble can drop its
//! least-valued member.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{MarketKind, Proposition, RecordKind, RecordReason, TransactionRecord};
use crate::kernel::Stimulus;
use crate::network::{AgentId, Population};
use crate::valuation::{full_gate, GateDecision};

#[derive(Debug, Error, PartialEq)]
pub enum LinkError {
    #[error("an ensemble needs at least 2 propositions, got {0}")]
    TooFewMembers(usize),
    #[error("duplicate member {0}")]
    DuplicateMember(String),
}

/// An operator-linked set of propositions offered at a single price.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub id: String,
    pub operator_id: AgentId,
    pub members: Vec<String>,
    pub offer_price: f64,
    pub linkage_factor: f64,
    pub round: u32,
    /// Centroid of the member stimuli; what kernels classify.
    pub stimulus: Stimulus,
    /// Sum of member base values; the composition's unlinked worth.
    pub base_value_sum: f64,
    /// Consecutive rounds below the acceptance band, for relinking.
    pub low_streak: u32,
}

/// Links propositions into an ensemble. The initial price is the linkage
/// factor times the summed base values; the ensemble stimulus is the member
/// centroid.
pub fn link(
    id: &str,
    operator_id: AgentId,
    members: &[&Proposition],
    linkage_factor: f64,
) -> Result<Ensemble, LinkError> {
    if members.len() < 2 {
        return Err(LinkError::TooFewMembers(members.len()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for m in members {
        if !seen.insert(m.id.as_str()) {
            return Err(LinkError::DuplicateMember(m.id.clone()));
        }
    }
    assert!(linkage_factor > 0.0, "linkage factor must be positive");

    let dims = members[0].stimulus.dims();
    let mut centroid = vec![0.0; dims];
    let mut base_value_sum = 0.0;
    for m in members {
        assert_eq!(m.stimulus.dims(), dims, "member dimensions must agree");
        for (c, &x) in centroid.iter_mut().zip(&m.stimulus.coords) {
            *c += x / members.len() as f64;
        }
        base_value_sum += m.base_value;
    }

    Ok(Ensemble {
        id: id.to_string(),
        operator_id,
        members: members.iter().map(|m| m.id.clone()).collect(),
        offer_price: linkage_factor * base_value_sum,
        linkage_factor,
        round: 0,
        stimulus: Stimulus::new(centroid),
        base_value_sum,
        low_streak: 0,
    })
}

/// Outcome of one one-to-all round.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionRoundResult {
    pub ensemble_id: String,
    pub round: u32,
    pub decisions: Vec<(AgentId, GateDecision)>,
    pub acceptance_rate: f64,
    pub fills: Vec<AgentId>,
}

/// Runs one auction round: every agent evaluates the ensemble at the offer
/// price against its pre-round state, then fills are applied in id order.
/// Every decision becomes a record; fills pay the operator and grant one
/// ensemble share. There is no minting here — an accepted but underfunded
/// agent logs a bid with the shortfall reason.
pub fn auction_round(
    population: &mut Population,
    ensemble: &Ensemble,
    tick: u64,
) -> (AuctionRoundResult, Vec<TransactionRecord>) {
    let offer = ensemble.offer_price;
    let decisions: Vec<(AgentId, GateDecision)> = population
        .iter()
        .map(|agent| {
            let decision = full_gate(
                &agent.genome,
                &agent.kernel,
                &ensemble.stimulus,
                ensemble.base_value_sum,
                offer,
            );
            (agent.id, decision)
        })
        .collect();

    let mut records = Vec::with_capacity(decisions.len());
    let mut fills = Vec::new();
    for &(agent_id, decision) in &decisions {
        if !decision.accepted {
            records.push(TransactionRecord {
                tick,
                market: MarketKind::Compositional,
                buyer_id: agent_id,
                seller_id: ensemble.operator_id,
                object_ref: ensemble.id.clone(),
                kind: RecordKind::Bid,
                price: offer,
                gain_buyer_pct: 0.0,
                gain_seller_pct: 0.0,
                minted: 0.0,
                imitation: false,
                reason: decision.reason.into(),
            });
            continue;
        }
        if population.get(agent_id).balance < offer && agent_id != ensemble.operator_id {
            records.push(TransactionRecord {
                tick,
                market: MarketKind::Compositional,
                buyer_id: agent_id,
                seller_id: ensemble.operator_id,
                object_ref: ensemble.id.clone(),
                kind: RecordKind::Bid,
                price: offer,
                gain_buyer_pct: 0.0,
                gain_seller_pct: 0.0,
                minted: 0.0,
                imitation: false,
                reason: RecordReason::InsufficientBalance,
            });
            continue;
        }
        // Fill: buyer pays the operator and receives one share. The
        // operator filling its own offer is a wash.
        let buyer_center = population
            .get(agent_id)
            .perceived_center(&ensemble.stimulus, ensemble.base_value_sum);
        let gain_buyer = super::net_gain(buyer_center, offer);
        if agent_id != ensemble.operator_id {
            let (buyer, operator) = population.pair_mut(agent_id, ensemble.operator_id);
            buyer.balance -= offer;
            operator.balance += offer;
        }
        population
            .get_mut(agent_id)
            .add_ensemble_share(&ensemble.id);
        fills.push(agent_id);
        records.push(TransactionRecord {
            tick,
            market: MarketKind::Compositional,
            buyer_id: agent_id,
            seller_id: ensemble.operator_id,
            object_ref: ensemble.id.clone(),
            kind: RecordKind::Complete,
            price: offer,
            gain_buyer_pct: gain_buyer,
            gain_seller_pct: 0.0,
            minted: 0.0,
            imitation: false,
            reason: RecordReason::Accepted,
        });
    }

    let accepted = decisions.iter().filter(|(_, d)| d.accepted).count();
    let acceptance_rate = if decisions.is_empty() {
        0.0
    } else {
        accepted as f64 / decisions.len() as f64
    };

    (
        AuctionRoundResult {
            ensemble_id: ensemble.id.clone(),
            round: ensemble.round,
            decisions,
            acceptance_rate,
            fills,
        },
        records,
    )
}

/// Feedback law parameters: the target acceptance band, the multiplicative
/// step, and how many consecutive cold rounds trigger a relink.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackPolicy {
    pub band_lo: f64,
    pub band_hi: f64,
    pub delta: f64,
    pub relink_after: u32,
}

impl Default for FeedbackPolicy {
    fn default() -> Self {
        FeedbackPolicy {
            band_lo: 0.2,
            band_hi: 0.8,
            delta: 0.05,
            relink_after: 3,
        }
    }
}

/// Reprices the ensemble from a round result: below the band the price drops
/// by `delta`, above it rises by `delta`, inside it holds. A streak of
/// `relink_after` cold rounds drops the member with the lowest population
/// mean score (ensembles never shrink below two members). The round counter
/// always advances.
pub fn feedback_adjust(
    ensemble: &Ensemble,
    result: &AuctionRoundResult,
    policy: &FeedbackPolicy,
    member_mean_scores: &BTreeMap<String, f64>,
) -> Ensemble {
    assert_eq!(ensemble.round, result.round, "round mismatch");
    assert!(policy.delta > 0.0 && policy.delta < 1.0);
    assert!(policy.band_lo <= policy.band_hi);

    let mut out = ensemble.clone();
    out.round += 1;
    if result.acceptance_rate < policy.band_lo {
        out.offer_price *= 1.0 - policy.delta;
        out.low_streak += 1;
        if out.low_streak >= policy.relink_after && out.members.len() > 2 {
            let worst = out
                .members
                .iter()
                .min_by(|a, b| {
                    let sa = member_mean_scores.get(*a).copied().unwrap_or(0.0);
                    let sb = member_mean_scores.get(*b).copied().unwrap_or(0.0);
                    sa.partial_cmp(&sb).unwrap()
                })
                .cloned()
                .expect("ensemble has members");
            out.members.retain(|m| m != &worst);
            out.low_streak = 0;
        }
    } else if result.acceptance_rate > policy.band_hi {
        out.offer_price *= 1.0 + policy.delta;
        out.low_streak = 0;
    } else {
        out.low_streak = 0;
    }
    out
}
