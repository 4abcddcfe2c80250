//! Pairwise exchange of single propositions.
//!
//! A seller asks its own perceived value. The buyer gates the ask; on
//! acceptance the pair settles at the midpoint of their overlapping bands
//! (at the ask when the bands do not overlap, which only happens under
//! imitation). Payment may mint the shortfall when the run allows it,
//! otherwise an underfunded acceptance is logged as a bid. Every evaluation
//! leaves a record.

use thiserror::Error;

use super::{MarketKind, Proposition, RecordKind, RecordReason, TransactionRecord};
use crate::network::{AgentId, Population};
use crate::valuation::full_gate;

#[derive(Debug, Error, PartialEq)]
pub enum TradeError {
    #[error("agent {seller} does not hold proposition {proposition}")]
    SellerLacksProposition {
        seller: AgentId,
        proposition: String,
    },
}

/// A standing ask from a seller.
#[derive(Debug, Clone, PartialEq)]
pub struct Offer {
    pub seller_id: AgentId,
    pub proposition_id: String,
    pub ask: f64,
}

/// The seller offers a held proposition at its own perceived value (the
/// center of its acceptable band).
pub fn propose_trade(
    population: &Population,
    seller: AgentId,
    proposition: &Proposition,
) -> Result<Offer, TradeError> {
    let seller_state = population.get(seller);
    if !seller_state.holds(&proposition.id) {
        return Err(TradeError::SellerLacksProposition {
            seller,
            proposition: proposition.id.clone(),
        });
    }
    let ask = seller_state.perceived_center(&proposition.stimulus, proposition.base_value);
    Ok(Offer {
        seller_id: seller,
        proposition_id: proposition.id.clone(),
        ask,
    })
}

/// Percentage gain of `value` over `basis`. A buyer passes its perceived
/// value against the price paid; a seller passes the price received against
/// its own perceived center. A non-positive basis yields 0 by convention.
pub fn net_gain(value: f64, basis: f64) -> f64 {
    if basis <= 0.0 {
        return 0.0;
    }
    100.0 * (value - basis) / basis
}

/// Settles one offer against a buyer. Every outcome is a record; rejections
/// and shortfalls come back as bids with the failing reason.
pub fn settle_pairwise(
    population: &mut Population,
    buyer: AgentId,
    offer: &Offer,
    proposition: &Proposition,
    allow_mint: bool,
    tick: u64,
) -> TransactionRecord {
    let seller = offer.seller_id;
    let buyer_state = population.get(buyer);
    let decision = full_gate(
        &buyer_state.genome,
        &buyer_state.kernel,
        &proposition.stimulus,
        proposition.base_value,
        offer.ask,
    );
    if !decision.accepted {
        return bid_record(
            tick,
            buyer,
            seller,
            &offer.proposition_id,
            offer.ask,
            false,
            decision.reason.into(),
        );
    }

    let buyer_band = buyer_state.acceptance_band(&proposition.stimulus, proposition.base_value);
    let seller_band = population
        .get(seller)
        .acceptance_band(&proposition.stimulus, proposition.base_value);
    let price = match buyer_band.intersect(&seller_band) {
        Some(overlap) => overlap.center(),
        None => offer.ask,
    };
    let buyer_center = buyer_band.center();
    let gain_buyer = net_gain(buyer_center, price);

    complete_exchange(
        population,
        buyer,
        seller,
        proposition,
        price,
        gain_buyer,
        allow_mint,
        false,
        tick,
    )
}

/// Settles an imitation purchase: the gate is bypassed, and the price and
/// the buyer's booked gain are copied from the observed record.
pub fn settle_imitation(
    population: &mut Population,
    buyer: AgentId,
    holder: AgentId,
    proposition: &Proposition,
    observed: &TransactionRecord,
    allow_mint: bool,
    tick: u64,
) -> TransactionRecord {
    complete_exchange(
        population,
        buyer,
        holder,
        proposition,
        observed.price,
        observed.gain_buyer_pct,
        allow_mint,
        true,
        tick,
    )
}

#[allow(clippy::too_many_arguments)]
fn complete_exchange(
    population: &mut Population,
    buyer: AgentId,
    seller: AgentId,
    proposition: &Proposition,
    price: f64,
    gain_buyer: f64,
    allow_mint: bool,
    imitation: bool,
    tick: u64,
) -> TransactionRecord {
    debug_assert!(population.get(seller).holds(&proposition.id));
    let shortfall = (price - population.get(buyer).balance).max(0.0);
    if shortfall > 0.0 && !allow_mint {
        return bid_record(
            tick,
            buyer,
            seller,
            &proposition.id,
            price,
            imitation,
            RecordReason::InsufficientBalance,
        );
    }

    let seller_center = population
        .get(seller)
        .perceived_center(&proposition.stimulus, proposition.base_value);
    let gain_seller = net_gain(price, seller_center);

    let (buyer_state, seller_state) = population.pair_mut(buyer, seller);
    buyer_state.balance = (buyer_state.balance + shortfall - price).max(0.0);
    seller_state.balance += price;
    seller_state.remove_holding(&proposition.id);
    buyer_state.add_holding(&proposition.id);

    TransactionRecord {
        tick,
        market: MarketKind::Minimal,
        buyer_id: buyer,
        seller_id: seller,
        object_ref: proposition.id.clone(),
        kind: RecordKind::Complete,
        price,
        gain_buyer_pct: gain_buyer,
        gain_seller_pct: gain_seller,
        minted: shortfall,
        imitation,
        reason: RecordReason::Accepted,
    }
}

fn bid_record(
    tick: u64,
    buyer: AgentId,
    seller: AgentId,
    object_ref: &str,
    price: f64,
    imitation: bool,
    reason: RecordReason,
) -> TransactionRecord {
    TransactionRecord {
        tick,
        market: MarketKind::Minimal,
        buyer_id: buyer,
        seller_id: seller,
        object_ref: object_ref.to_string(),
        kind: RecordKind::Bid,
        price,
        gain_buyer_pct: 0.0,
        gain_seller_pct: 0.0,
        minted: 0.0,
        imitation,
        reason,
    }
}
