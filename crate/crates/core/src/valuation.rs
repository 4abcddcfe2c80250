//! From genomes and kernels to money.
//!
//! Two gates stand between an agent and a purchase. The hash gate encodes the
//! offered numeric value as a base-26 string and looks for it, in order, as a
//! contiguous substring of the agent's endogenous hash segment. The price
//! gate checks the offer against the agent's acceptable range, which is
//! centered on the kernel-implied value and widened by mental flexibility.

use crate::genome::Genome;
use crate::kernel::{Kernel, Stimulus};

/// Closed interval of acceptable prices, in placeholder units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceInterval {
    pub lo: f64,
    pub hi: f64,
}

impl PriceInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo.is_finite() && hi.is_finite());
        assert!(0.0 <= lo && lo <= hi, "need 0 <= lo <= hi");
        PriceInterval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn center(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }

    /// Overlap with another interval, if any.
    pub fn intersect(&self, other: &PriceInterval) -> Option<PriceInterval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(PriceInterval { lo, hi })
    }
}

/// Why a gate accepted or refused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GateReason {
    HashFail,
    OutOfRange,
    Accepted,
}

impl GateReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            GateReason::HashFail => "hash_fail",
            GateReason::OutOfRange => "out_of_range",
            GateReason::Accepted => "accepted",
        }
    }
}

/// Binary acceptance decision. `accepted` is true exactly when the reason is
/// `Accepted`; the constructors keep the two consistent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateDecision {
    pub accepted: bool,
    pub reason: GateReason,
}

impl GateDecision {
    pub fn accept() -> Self {
        GateDecision {
            accepted: true,
            reason: GateReason::Accepted,
        }
    }

    pub fn refuse(reason: GateReason) -> Self {
        assert!(reason != GateReason::Accepted);
        GateDecision {
            accepted: false,
            reason,
        }
    }
}

/// Base-26 positional encoding over `a..z` (a = 0, ..., z = 25), most
/// significant character first. Zero encodes as "a"; no other encoding has a
/// leading 'a', so the map is injective.
pub fn encode_value(v: u64) -> String {
    if v == 0 {
        return "a".to_string();
    }
    let mut digits = Vec::new();
    let mut v = v;
    while v > 0 {
        digits.push((b'a' + (v % 26) as u8) as char);
        v /= 26;
    }
    digits.iter().rev().collect()
}

/// True iff the encoding of `v` occurs contiguously, in order, inside the
/// genome's hash segment.
pub fn hash_gate(genome: &Genome, v: u64) -> bool {
    genome.hash_genes().contains(&encode_value(v))
}

/// The agent's acceptable price band for an item it classifies at `score`:
/// centered on `base_value * score`, half-width `flexibility * center`.
/// A zero classification yields the empty-equivalent interval `[0,0]`.
pub fn acceptable_range(score: f64, base_value: f64, flexibility: f64) -> PriceInterval {
    debug_assert!((0.0..=1.0).contains(&score));
    debug_assert!(base_value > 0.0);
    debug_assert!((0.0..=1.0).contains(&flexibility));
    let center = base_value * score;
    let half_width = flexibility * center;
    PriceInterval::new((center - half_width).max(0.0), center + half_width)
}

/// Price acceptance: 1 iff the offer lies within the closed acceptance band.
pub fn price_gate(band: &PriceInterval, offer: f64) -> GateDecision {
    assert!(offer >= 0.0, "offered price must be non-negative");
    if band.contains(offer) {
        GateDecision::accept()
    } else {
        GateDecision::refuse(GateReason::OutOfRange)
    }
}

/// Same decision computed on the price-normalized band `k = band / offer`:
/// accept iff `k.lo <= 1 <= k.hi`. Kept as an independent route; the two
/// formulations must always agree for positive offers.
pub fn price_gate_normalized(band: &PriceInterval, offer: f64) -> GateDecision {
    assert!(offer > 0.0, "normalized form needs a positive price");
    let k_lo = band.lo / offer;
    let k_hi = band.hi / offer;
    if k_lo <= 1.0 && 1.0 <= k_hi {
        GateDecision::accept()
    } else {
        GateDecision::refuse(GateReason::OutOfRange)
    }
}

/// Full two-stage gate: the hash gate must pass on the rounded offer, then
/// the price gate on the acceptable range implied by the kernel score. The
/// reason records the first failing stage.
pub fn full_gate(
    genome: &Genome,
    kernel: &Kernel,
    item_stimulus: &Stimulus,
    base_value: f64,
    offer: f64,
) -> GateDecision {
    assert!(offer >= 0.0);
    if !hash_gate(genome, offer.round() as u64) {
        return GateDecision::refuse(GateReason::HashFail);
    }
    let score = kernel.classify(item_stimulus);
    let band = acceptable_range(score, base_value, genome.flexibility());
    price_gate(&band, offer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{copy_hash_segment, Genome};
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn genome_with_hash(hash: &str) -> Genome {
        Genome::from_parts(2, vec![0.8, 0.8, 0.5, 0.5], hash.to_string(), 0.2).unwrap()
    }

    /// Independent oracle: slide every window of the hash segment and compare
    /// against the encoding.
    fn sliding_window_gate(hash: &str, v: u64) -> bool {
        let needle: Vec<u8> = encode_value(v).into_bytes();
        let hay = hash.as_bytes();
        if needle.len() > hay.len() {
            return false;
        }
        (0..=hay.len() - needle.len()).any(|i| hay[i..i + needle.len()] == needle[..])
    }

    #[test]
    fn encode_small_values() {
        assert_eq!(encode_value(0), "a");
        assert_eq!(encode_value(25), "z");
        assert_eq!(encode_value(26), "ba"); // 26 = 1*26 + 0
        assert_eq!(encode_value(27), "bb");
        assert_eq!(encode_value(675), "zz");
        assert_eq!(encode_value(676), "baa");
    }

    #[test]
    fn encode_is_injective_up_to_1e5() {
        let mut seen = std::collections::HashSet::new();
        for v in 0..=100_000u64 {
            assert!(seen.insert(encode_value(v)), "collision at {v}");
        }
    }

    #[test]
    fn hash_gate_finds_substrings() {
        let g = genome_with_hash("xxyyzz");
        // "yyz" = ((24*26) + 24)*26 + 25 = 16873
        let v = (24 * 26 + 24) * 26 + 25;
        assert_eq!(encode_value(v), "yyz");
        assert!(hash_gate(&g, v));

        let g2 = genome_with_hash("abc");
        assert!(hash_gate(&g2, 0)); // "a"
        assert!(!hash_gate(&g2, 3)); // "d"
    }

    #[test]
    fn hash_gate_matches_sliding_window_oracle() {
        for seed in 0..5u64 {
            let g = Genome::random(seed, 2, 1, 16).unwrap();
            for v in 0..=10_000u64 {
                assert_eq!(
                    hash_gate(&g, v),
                    sliding_window_gate(g.hash_genes(), v),
                    "disagreement at seed {seed}, v {v}"
                );
            }
        }
    }

    #[test]
    fn hash_gate_is_invariant_under_copy() {
        let source = Genome::random(5, 2, 1, 16).unwrap();
        let target = Genome::random(6, 2, 1, 16).unwrap();
        let imitator = copy_hash_segment(&source, &target);
        for v in 0..=10_000u64 {
            assert_eq!(hash_gate(&source, v), hash_gate(&imitator, v));
        }
    }

    #[test]
    fn acceptable_range_examples() {
        let band = acceptable_range(1.0, 100.0, 0.2);
        assert_eq!(band, PriceInterval::new(80.0, 120.0));
        assert_eq!(
            acceptable_range(0.0, 100.0, 0.2),
            PriceInterval::new(0.0, 0.0)
        );
        let degenerate = acceptable_range(0.5, 100.0, 0.0);
        assert_eq!(degenerate, PriceInterval::new(50.0, 50.0));
        assert!(degenerate.contains(50.0));
        assert!(!degenerate.contains(50.0001));
    }

    #[test]
    fn price_gate_closed_boundaries() {
        let band = PriceInterval::new(80.0, 120.0);
        assert!(price_gate(&band, 100.0).accepted);
        assert!(price_gate(&band, 120.0).accepted);
        assert!(price_gate(&band, 80.0).accepted);
        let refused = price_gate(&band, 130.0);
        assert!(!refused.accepted);
        assert_eq!(refused.reason, GateReason::OutOfRange);
    }

    #[test]
    fn full_gate_reports_first_failing_stage() {
        // Hash passes ("a" for price 0 .. tune), price exterior.
        let g = genome_with_hash("dw"); // encode(100) = "dw"
        assert_eq!(encode_value(100), "dw");
        let k = Kernel::from_bounds(vec![0.0, 0.0], vec![1.0, 1.0], vec![vec![0.5, 0.5]]);
        let s = Stimulus::new(vec![0.5, 0.5]); // A_x = 1, center 50, flex 0.2 -> [40, 60]
        let d = full_gate(&g, &k, &s, 50.0, 100.0);
        assert_eq!(d.reason, GateReason::OutOfRange);

        let d2 = full_gate(&g, &k, &s, 50.0, 99.0); // encode(99) = "dv", not in hash
        assert_eq!(d2.reason, GateReason::HashFail);

        let g3 = genome_with_hash("bw"); // encode(48) = "bw"
        assert_eq!(encode_value(48), "bw");
        let d3 = full_gate(&g3, &k, &s, 50.0, 48.0);
        assert!(d3.accepted);
        assert_eq!(d3.reason, GateReason::Accepted);
    }

    #[test]
    fn full_gate_agrees_with_sequential_oracle() {
        // Compositional oracle: run the two stages independently on random
        // (agent, item, price) triples and compare with full_gate.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1000 {
            let g = Genome::random(rng.gen(), 2, 2, 12).unwrap();
            let k = Kernel::from_genome(&g);
            let s = Stimulus::new(vec![rng.gen_range(-0.5..1.5), rng.gen_range(-0.5..1.5)]);
            let base: f64 = rng.gen_range(1.0..200.0);
            let price: f64 = rng.gen_range(0.0..250.0);

            let expected = if !sliding_window_gate(g.hash_genes(), price.round() as u64) {
                GateDecision::refuse(GateReason::HashFail)
            } else {
                let band = acceptable_range(k.classify(&s), base, g.flexibility());
                if band.contains(price) {
                    GateDecision::accept()
                } else {
                    GateDecision::refuse(GateReason::OutOfRange)
                }
            };
            assert_eq!(full_gate(&g, &k, &s, base, price), expected);
        }
    }

    proptest! {
        #[test]
        fn interval_and_normalized_forms_agree(lo in 0.0f64..500.0, width in 0.0f64..500.0,
                                               offer in 0.001f64..1000.0) {
            let band = PriceInterval::new(lo, lo + width);
            prop_assert_eq!(price_gate(&band, offer), price_gate_normalized(&band, offer));
        }

        #[test]
        fn widening_never_flips_acceptance(lo in 0.0f64..500.0, width in 0.0f64..500.0,
                                           grow in 0.0f64..100.0, offer in 0.0f64..1000.0) {
            let band = PriceInterval::new(lo, lo + width);
            let wider = PriceInterval::new((lo - grow).max(0.0), lo + width + grow);
            if price_gate(&band, offer).accepted {
                prop_assert!(price_gate(&wider, offer).accepted);
            }
        }

        #[test]
        fn range_center_is_monotone_in_score(ax1 in 0.0f64..1.0, ax2 in 0.0f64..1.0,
                                             base in 0.001f64..1000.0, flex in 0.0f64..1.0) {
            let (small, large) = if ax1 <= ax2 { (ax1, ax2) } else { (ax2, ax1) };
            let c_small = acceptable_range(small, base, flex).center();
            let c_large = acceptable_range(large, base, flex).center();
            prop_assert!(c_small <= c_large);
        }
    }
}
