//! Post-hoc detectors over traces: value fluctuation, transitivity
//! violations, bubbles against fundamental value, and the valuation-regime
//! classifier over the (value, meaning) plane.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::market::{MarketKind, Proposition, RecordKind};
use crate::network::AgentState;
use crate::trace::Trace;

/// "Many-fold" quantified: a full-set/singleton-sum ratio at or above this
/// flags a fluctuation (configurable per call).
pub const DEFAULT_FOLD_THRESHOLD: f64 = 2.0;

/// A bubble needs the mean settled price to exceed fundamental value by at
/// least this factor.
pub const BUBBLE_FUNDAMENTAL_FOLD: f64 = 1.5;

/// A bubble window must contain at least this many completed trades.
pub const BUBBLE_MIN_TRADES: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("regime classification needs at least 10 points, got {0}")]
    TooFewPoints(usize),
    #[error("values must be positive, got {0}")]
    NonPositiveValue(f64),
}

/// One observation in the bivariate plane: realized value against the
/// soft-classification meaning coordinate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ValuationPoint {
    pub value_coord: f64,
    pub meaning_coord: f64,
}

/// Valuation regimes over the (value, meaning) plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeLabel {
    EmhLike,
    WeakPolysemy,
    StrongPolysemy,
}

impl RegimeLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeLabel::EmhLike => "emh_like",
            RegimeLabel::WeakPolysemy => "weak_polysemy",
            RegimeLabel::StrongPolysemy => "strong_polysemy",
        }
    }
}

/// Fluctuation verdict for one ensemble: full-set value against its
/// singleton decomposition, plus any preference cycles found.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FluctuationReport {
    pub ensemble_id: String,
    pub full_set_value: f64,
    pub subset_values: BTreeMap<String, f64>,
    pub max_ratio: f64,
    pub transitivity_cycles: Vec<[String; 3]>,
    pub flagged: bool,
}

/// Compares a full-set value against its singleton subset values. The ratio
/// is taken both ways; at or above the fold threshold the report flags.
pub fn detect_fluctuation(
    ensemble_id: &str,
    full_set_value: f64,
    subset_values: &BTreeMap<String, f64>,
    fold_threshold: f64,
) -> Result<FluctuationReport, AnalysisError> {
    if full_set_value <= 0.0 {
        return Err(AnalysisError::NonPositiveValue(full_set_value));
    }
    assert!(!subset_values.is_empty(), "need at least one subset value");
    for &v in subset_values.values() {
        if v <= 0.0 {
            return Err(AnalysisError::NonPositiveValue(v));
        }
    }
    let singleton_sum: f64 = subset_values.values().sum();
    let max_ratio = (full_set_value / singleton_sum).max(singleton_sum / full_set_value);
    Ok(FluctuationReport {
        ensemble_id: ensemble_id.to_string(),
        full_set_value,
        subset_values: subset_values.clone(),
        max_ratio,
        transitivity_cycles: Vec::new(),
        flagged: max_ratio >= fold_threshold,
    })
}

impl FluctuationReport {
    /// Folds preference cycles into the report; any cycle flags it.
    pub fn with_cycles(mut self, cycles: Vec<[String; 3]>) -> FluctuationReport {
        self.flagged = self.flagged || !cycles.is_empty();
        self.transitivity_cycles = cycles;
        self
    }
}

/// A strict pairwise preference: `winner` is one of the two items.
#[derive(Debug, Clone, PartialEq)]
pub struct Preference {
    pub a: String,
    pub b: String,
    pub winner: String,
}

impl Preference {
    pub fn new(a: &str, b: &str, winner: &str) -> Preference {
        assert!(
            winner == a || winner == b,
            "winner must be one of the items"
        );
        assert_ne!(a, b);
        Preference {
            a: a.to_string(),
            b: b.to_string(),
            winner: winner.to_string(),
        }
    }

    fn loser(&self) -> &str {
        if self.winner == self.a {
            &self.b
        } else {
            &self.a
        }
    }
}

/// Every directed 3-cycle in the strict-preference digraph. A cycle
/// `[x, y, z]` means x beats y, y beats z, z beats x, rotated so the
/// lexicographically smallest item leads; each cycle appears once.
pub fn detect_transitivity_violations(preferences: &[Preference]) -> Vec<[String; 3]> {
    let mut beats: BTreeSet<(&str, &str)> = BTreeSet::new();
    let mut items: BTreeSet<&str> = BTreeSet::new();
    for p in preferences {
        beats.insert((p.winner.as_str(), p.loser()));
        items.insert(p.a.as_str());
        items.insert(p.b.as_str());
    }
    let items: Vec<&str> = items.into_iter().collect();
    let mut cycles = Vec::new();
    for i in 0..items.len() {
        for j in (i + 1)..items.len() {
            for k in (j + 1)..items.len() {
                let (a, b, c) = (items[i], items[j], items[k]);
                // Two possible orientations through the sorted triple.
                if beats.contains(&(a, b)) && beats.contains(&(b, c)) && beats.contains(&(c, a)) {
                    cycles.push([a.to_string(), b.to_string(), c.to_string()]);
                }
                if beats.contains(&(a, c)) && beats.contains(&(c, b)) && beats.contains(&(b, a)) {
                    cycles.push([a.to_string(), c.to_string(), b.to_string()]);
                }
            }
        }
    }
    cycles
}

/// Population consensus value of a proposition: the mean kernel-implied
/// value over all agents.
pub fn fundamental_value(proposition: &Proposition, population: &[AgentState]) -> f64 {
    assert!(!population.is_empty(), "population must be non-empty");
    population
        .iter()
        .map(|a| a.kernel.classify(&proposition.stimulus) * proposition.base_value)
        .sum::<f64>()
        / population.len() as f64
}

/// Same consensus value computed from a trace snapshot.
pub fn fundamental_value_at(trace: &Trace, object_id: &str, tick: u64) -> Option<f64> {
    let prop = trace.object(object_id)?;
    let snap = trace.snapshot_at_or_before(tick)?;
    if snap.agents.is_empty() {
        return None;
    }
    let sum: f64 = snap
        .agents
        .iter()
        .map(|a| a.classify(&prop.stimulus) * prop.base_value)
        .sum();
    Some(sum / snap.agents.len() as f64)
}

/// One flagged bubble window.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BubbleWindow {
    pub object_id: String,
    pub onset_tick: u64,
    pub window: u64,
    pub trades: usize,
    pub mean_price: f64,
    pub fundamental: f64,
    pub participants: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BubbleReport {
    pub flagged: bool,
    pub windows: Vec<BubbleWindow>,
}

/// Scans completed pairwise trades per object with a sliding window of
/// `window` consecutive ticks. A window flags when it holds at least
/// [`BUBBLE_MIN_TRADES`] completed trades, every buyer gain meets
/// `gain_floor`, and the mean settled price exceeds the fundamental value at
/// the window onset by [`BUBBLE_FUNDAMENTAL_FOLD`]. Earliest onset per
/// object is reported.
pub fn detect_bubble(trace: &Trace, window: u64, gain_floor: f64) -> BubbleReport {
    assert!(window >= 1);
    struct Trade {
        tick: u64,
        price: f64,
        gain: f64,
        buyer: u32,
        seller: u32,
    }
    let mut by_object: BTreeMap<&str, Vec<Trade>> = BTreeMap::new();
    for r in trace.records() {
        if r.market == MarketKind::Minimal && r.kind == RecordKind::Complete {
            by_object
                .entry(r.object_ref.as_str())
                .or_default()
                .push(Trade {
                    tick: r.tick,
                    price: r.price,
                    gain: r.gain_buyer_pct,
                    buyer: r.buyer_id,
                    seller: r.seller_id,
                });
        }
    }

    let mut windows = Vec::new();
    let max_tick = trace.max_tick();
    for (object_id, trades) in &by_object {
        let first_tick = trades.first().map(|t| t.tick).unwrap_or(1);
        'starts: for start in first_tick..=max_tick.saturating_sub(window - 1).max(first_tick) {
            let end = start + window; // [start, end)
            let in_window: Vec<&Trade> = trades
                .iter()
                .filter(|t| t.tick >= start && t.tick < end)
                .collect();
            if in_window.len() < BUBBLE_MIN_TRADES {
                continue;
            }
            if !in_window.iter().all(|t| t.gain >= gain_floor) {
                continue;
            }
            let mean_price: f64 =
                in_window.iter().map(|t| t.price).sum::<f64>() / in_window.len() as f64;
            let fundamental = fundamental_value_at(trace, object_id, start).unwrap_or(0.0);
            if mean_price > 0.0 && mean_price >= BUBBLE_FUNDAMENTAL_FOLD * fundamental {
                let mut participants: BTreeSet<u32> = BTreeSet::new();
                for t in &in_window {
                    participants.insert(t.buyer);
                    participants.insert(t.seller);
                }
                windows.push(BubbleWindow {
                    object_id: object_id.to_string(),
                    onset_tick: start,
                    window,
                    trades: in_window.len(),
                    mean_price,
                    fundamental,
                    participants: participants.into_iter().collect(),
                });
                break 'starts; // earliest onset per object
            }
        }
    }
    BubbleReport {
        flagged: !windows.is_empty(),
        windows,
    }
}

/// Robust per-axis standardization: `(v - median) / IQR`, with the IQR
/// floored to keep the map defined on degenerate axes. Invariant (up to
/// sign) under any per-axis affine rescaling of the inputs.
fn standardize(values: &[f64]) -> Vec<f64> {
    let median = percentile(values, 0.5);
    let iqr = (percentile(values, 0.75) - percentile(values, 0.25)).max(1e-12);
    values.iter().map(|v| (v - median) / iqr).collect()
}

fn percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let idx = p * (sorted.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (idx - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

/// Classifies the valuation regime of a point cloud.
///
/// Both axes are standardized robustly first, making the label invariant
/// under independent affine rescaling of either axis; what remains of each
/// axis is its shape. When the standardized variances are balanced (within a
/// factor `variance_ratio` of each other) neither axis carries anomalous
/// spread and the cloud reads as value-space diffusion. Otherwise the cloud
/// is polysemic, subtyped by where the outliers sit: fewer value-axis
/// outliers than meaning-axis outliers is strong polysemy, the opposite is
/// weak. Outliers lie beyond `outlier_k` IQRs from the axis median.
pub fn classify_regime(
    points: &[ValuationPoint],
    variance_ratio: f64,
    outlier_k: f64,
) -> Result<RegimeLabel, AnalysisError> {
    if points.len() < 10 {
        return Err(AnalysisError::TooFewPoints(points.len()));
    }
    assert!(variance_ratio >= 1.0);
    assert!(outlier_k > 0.0);

    let xs: Vec<f64> = points.iter().map(|p| p.value_coord).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.meaning_coord).collect();
    let zx = standardize(&xs);
    let zy = standardize(&ys);
    let var_x = variance(&zx).max(1e-12);
    let var_y = variance(&zy).max(1e-12);

    let balanced = var_x / var_y < variance_ratio && var_y / var_x < variance_ratio;
    if balanced {
        return Ok(RegimeLabel::EmhLike);
    }
    let out_x = zx.iter().filter(|z| z.abs() > outlier_k).count();
    let out_y = zy.iter().filter(|z| z.abs() > outlier_k).count();
    if out_x < out_y {
        Ok(RegimeLabel::StrongPolysemy)
    } else {
        Ok(RegimeLabel::WeakPolysemy)
    }
}

/// Coefficient of variation of settled pairwise prices for one object.
/// `None` with fewer than two completed trades or a zero mean.
pub fn settled_price_cv(trace: &Trace, object_id: &str) -> Option<f64> {
    let prices: Vec<f64> = trace
        .records()
        .filter(|r| {
            r.market == MarketKind::Minimal
                && r.kind == RecordKind::Complete
                && r.object_ref == object_id
        })
        .map(|r| r.price)
        .collect();
    if prices.len() < 2 {
        return None;
    }
    let mean = prices.iter().sum::<f64>() / prices.len() as f64;
    if mean == 0.0 {
        return None;
    }
    Some(variance(&prices).sqrt() / mean)
}

/// (value, meaning) points for the regime classifier: one per completed
/// pairwise trade, pairing the settled price with the buyer's soft score of
/// the object at the nearest snapshot.
pub fn valuation_points(trace: &Trace) -> Vec<ValuationPoint> {
    let mut points = Vec::new();
    for r in trace.records() {
        if r.market != MarketKind::Minimal || r.kind != RecordKind::Complete {
            continue;
        }
        let Some(prop) = trace.object(&r.object_ref) else {
            continue;
        };
        let Some(snap) = trace.snapshot_at_or_before(r.tick) else {
            continue;
        };
        let Some(agent) = snap.agents.iter().find(|a| a.agent_id == r.buyer_id) else {
            continue;
        };
        points.push(ValuationPoint {
            value_coord: r.price,
            meaning_coord: agent.classify(&prop.stimulus),
        });
    }
    points
}

/// Mean settled pairwise price per object, for fluctuation analysis.
pub fn mean_settled_prices(trace: &Trace) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in trace.records() {
        if r.market == MarketKind::Minimal && r.kind == RecordKind::Complete {
            let e = sums.entry(r.object_ref.clone()).or_insert((0.0, 0));
            e.0 += r.price;
            e.1 += 1;
        }
    }
    sums.into_iter()
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect()
}

/// Pairwise preferences between objects from tick-co-occurring settled
/// prices: for each tick where both objects settled, the pricier one wins;
/// the majority over ticks decides, ties drop the pair.
pub fn preferences_from_settled_prices(trace: &Trace) -> Vec<Preference> {
    // tick -> object -> mean settled price that tick
    let mut per_tick: BTreeMap<u64, BTreeMap<String, (f64, usize)>> = BTreeMap::new();
    for r in trace.records() {
        if r.market == MarketKind::Minimal && r.kind == RecordKind::Complete {
            let e = per_tick
                .entry(r.tick)
                .or_default()
                .entry(r.object_ref.clone())
                .or_insert((0.0, 0));
            e.0 += r.price;
            e.1 += 1;
        }
    }
    let mut wins: BTreeMap<(String, String), (u32, u32)> = BTreeMap::new();
    for prices in per_tick.values() {
        let objects: Vec<(&String, f64)> = prices
            .iter()
            .map(|(k, (s, n))| (k, s / *n as f64))
            .collect();
        for i in 0..objects.len() {
            for j in (i + 1)..objects.len() {
                let (a, pa) = objects[i];
                let (b, pb) = objects[j];
                if pa == pb {
                    continue;
                }
                let key = (a.clone(), b.clone());
                let counts = wins.entry(key).or_insert((0, 0));
                if pa > pb {
                    counts.0 += 1;
                } else {
                    counts.1 += 1;
                }
            }
        }
    }
    wins.into_iter()
        .filter(|(_, (wa, wb))| wa != wb)
        .map(|((a, b), (wa, wb))| {
            let winner = if wa > wb { a.clone() } else { b.clone() };
            Preference { a, b, winner }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn singletons(vals: &[(&str, f64)]) -> BTreeMap<String, f64> {
        vals.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn fluctuation_ratio_both_ways() {
        let subs = singletons(&[("a", 1.0), ("b", 1.0)]);
        let report = detect_fluctuation("e", 10.0, &subs, 2.0).unwrap();
        assert_eq!(report.max_ratio, 5.0);
        assert!(report.flagged);

        // Linear composition: ratio 1, unflagged.
        let report = detect_fluctuation("e", 2.0, &subs, 2.0).unwrap();
        assert_eq!(report.max_ratio, 1.0);
        assert!(!report.flagged);

        // Exactly at the threshold: flagged (closed comparison).
        let report = detect_fluctuation("e", 4.0, &subs, 2.0).unwrap();
        assert_eq!(report.max_ratio, 2.0);
        assert!(report.flagged);

        // Loss direction flags too.
        let report = detect_fluctuation("e", 0.4, &subs, 2.0).unwrap();
        assert_eq!(report.max_ratio, 5.0);
        assert!(report.flagged);

        assert!(detect_fluctuation("e", -1.0, &subs, 2.0).is_err());
    }

    #[test]
    fn transitive_order_has_no_cycles() {
        let prefs = vec![
            Preference::new("a", "b", "a"),
            Preference::new("b", "c", "b"),
            Preference::new("a", "c", "a"),
        ];
        assert!(detect_transitivity_violations(&prefs).is_empty());
    }

    #[test]
    fn planted_cycle_is_found() {
        let prefs = vec![
            Preference::new("a", "b", "a"),
            Preference::new("b", "c", "b"),
            Preference::new("c", "a", "c"),
        ];
        let cycles = detect_transitivity_violations(&prefs);
        assert_eq!(
            cycles,
            vec![["a".to_string(), "b".to_string(), "c".to_string()]]
        );
    }

    /// Brute-force oracle: enumerate all ordered triples, canonicalize.
    fn brute_force_cycles(prefs: &[Preference]) -> BTreeSet<[String; 3]> {
        let mut beats = BTreeSet::new();
        let mut items = BTreeSet::new();
        for p in prefs {
            beats.insert((p.winner.clone(), p.loser().to_string()));
            items.insert(p.a.clone());
            items.insert(p.b.clone());
        }
        let items: Vec<String> = items.into_iter().collect();
        let mut found = BTreeSet::new();
        for x in &items {
            for y in &items {
                for z in &items {
                    if x == y || y == z || x == z {
                        continue;
                    }
                    if beats.contains(&(x.clone(), y.clone()))
                        && beats.contains(&(y.clone(), z.clone()))
                        && beats.contains(&(z.clone(), x.clone()))
                    {
                        // canonical rotation: smallest first
                        let mut rotations = [
                            [x.clone(), y.clone(), z.clone()],
                            [y.clone(), z.clone(), x.clone()],
                            [z.clone(), x.clone(), y.clone()],
                        ];
                        rotations.sort();
                        found.insert(rotations[0].clone());
                    }
                }
            }
        }
        found
    }

    #[test]
    fn random_tournaments_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let names = ["a", "b", "c", "d", "e", "f", "g"];
        for _ in 0..300 {
            let mut prefs = Vec::new();
            for i in 0..names.len() {
                for j in (i + 1)..names.len() {
                    let winner = if rng.gen::<bool>() {
                        names[i]
                    } else {
                        names[j]
                    };
                    prefs.push(Preference::new(names[i], names[j], winner));
                }
            }
            let got: BTreeSet<[String; 3]> =
                detect_transitivity_violations(&prefs).into_iter().collect();
            assert_eq!(got, brute_force_cycles(&prefs));
        }
    }

    fn cloud(
        n: usize,
        seed: u64,
        sd_x: f64,
        sd_y: f64,
        heavy_x: bool,
        heavy_y: bool,
    ) -> Vec<ValuationPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let zx: f64 = rng.sample(StandardNormal);
                let zy: f64 = rng.sample(StandardNormal);
                let mut x = zx * sd_x;
                let mut y = zy * sd_y;
                // Plant heavy tails: every 10th point jumps far out.
                if heavy_x && i % 10 == 0 {
                    x += sd_x * 30.0 * if rng.gen::<bool>() { 1.0 } else { -1.0 };
                }
                if heavy_y && i % 10 == 0 {
                    y += sd_y * 30.0 * if rng.gen::<bool>() { 1.0 } else { -1.0 };
                }
                ValuationPoint {
                    value_coord: x,
                    meaning_coord: y,
                }
            })
            .collect()
    }

    #[test]
    fn regime_labels_on_constructed_clouds() {
        // Value-dominant variance, light tails everywhere.
        let emh = cloud(1000, 1, 1.0, 0.01, false, false);
        assert_eq!(
            classify_regime(&emh, 2.0, 1.5).unwrap(),
            RegimeLabel::EmhLike
        );

        // Meaning-dominant with heavy meaning tails.
        let strong = cloud(1000, 2, 0.01, 1.0, false, true);
        assert_eq!(
            classify_regime(&strong, 2.0, 1.5).unwrap(),
            RegimeLabel::StrongPolysemy
        );

        // Meaning-dominant variance but heavy value tails.
        let weak = cloud(1000, 3, 0.01, 1.0, true, false);
        assert_eq!(
            classify_regime(&weak, 2.0, 1.5).unwrap(),
            RegimeLabel::WeakPolysemy
        );
    }

    #[test]
    fn regime_is_invariant_under_axis_rescaling() {
        for (seed, heavy_x, heavy_y) in [(1u64, false, false), (2, false, true), (3, true, false)] {
            let base = cloud(
                1000,
                seed,
                if heavy_x { 0.01 } else { 1.0 },
                1.0,
                heavy_x,
                heavy_y,
            );
            let label = classify_regime(&base, 2.0, 1.5).unwrap();
            let scaled: Vec<ValuationPoint> = base
                .iter()
                .map(|p| ValuationPoint {
                    value_coord: p.value_coord * 1000.0 + 77.0,
                    meaning_coord: p.meaning_coord * 0.002 - 5.0,
                })
                .collect();
            assert_eq!(classify_regime(&scaled, 2.0, 1.5).unwrap(), label);
            let mirrored: Vec<ValuationPoint> = base
                .iter()
                .map(|p| ValuationPoint {
                    value_coord: -3.0 * p.value_coord,
                    meaning_coord: p.meaning_coord,
                })
                .collect();
            assert_eq!(classify_regime(&mirrored, 2.0, 1.5).unwrap(), label);
        }
    }

    #[test]
    fn too_few_points_is_an_error() {
        let points = cloud(9, 1, 1.0, 1.0, false, false);
        assert_eq!(
            classify_regime(&points, 2.0, 1.5),
            Err(AnalysisError::TooFewPoints(9))
        );
    }

    fn agent_scoring(id: u32, score: f64) -> crate::network::AgentState {
        use crate::genome::Genome;
        use crate::kernel::Kernel;
        // Unit box, central anchor: place nothing — the test moves the
        // stimulus along x to dial the score (D = sqrt(2)/2).
        let g = Genome::from_parts(2, vec![1.0, 1.0, 0.5, 0.5], "q".into(), 0.2).unwrap();
        let mut agent = crate::network::AgentState::new(id, g, 0.0);
        // Shrink towards a line so distance to the anchor maps linearly:
        // anchor at (0.5, 0.5), stimulus fixed at (0.5, 0.5) -> score = 1; to
        // get a lower score, move the anchor away along x.
        let dmax_unit = (2.0f64).sqrt() / 2.0;
        let d = (1.0 - score) * dmax_unit;
        agent.kernel =
            Kernel::from_bounds(vec![0.0, 0.0], vec![1.0, 1.0], vec![vec![0.5 + d, 0.5]]);
        agent
    }

    #[test]
    fn fundamental_value_is_the_population_mean() {
        let prop = Proposition::new("obj", vec![0.5, 0.5], 100.0);
        // Anchors on the stimulus: everyone scores 1.
        let all_one = vec![agent_scoring(0, 1.0), agent_scoring(1, 1.0)];
        assert!((fundamental_value(&prop, &all_one) - 100.0).abs() < 1e-9);

        // Nobody contains it.
        let far = Proposition::new("obj", vec![9.0, 9.0], 100.0);
        assert_eq!(fundamental_value(&far, &all_one), 0.0);

        // Mixed scores {0.2, 0.4} -> mean value 30. The anchor offset for a
        // unit box changes the normalizer, so compute the expectation from
        // the agents' own scores (oracle: plain mean).
        let mixed = vec![agent_scoring(0, 0.2), agent_scoring(1, 0.4)];
        let expected: f64 = mixed
            .iter()
            .map(|a| a.kernel.classify(&prop.stimulus) * 100.0)
            .sum::<f64>()
            / 2.0;
        assert!((fundamental_value(&prop, &mixed) - expected).abs() < 1e-12);
    }

    #[test]
    fn fundamental_value_is_monotone_in_scores() {
        let prop = Proposition::new("obj", vec![0.5, 0.5], 100.0);
        let mut population = vec![agent_scoring(0, 0.3), agent_scoring(1, 0.6)];
        let before = fundamental_value(&prop, &population);
        // Raise agent 0's score by moving its anchor onto the stimulus.
        population[0] = agent_scoring(0, 1.0);
        assert!(fundamental_value(&prop, &population) >= before);
    }

    #[test]
    fn empty_trace_never_flags_a_bubble() {
        let config_text = "[population]\nagents = 2\n[simulation]\nticks = 1\n".to_string();
        let trace = Trace {
            header: crate::trace::TraceHeader {
                format_version: 1,
                config_hash: crate::trace::fnv1a_hash(&config_text),
                seed: 1,
            },
            config_text,
            catalog: vec![],
            events: vec![],
        };
        let report = detect_bubble(&trace, 5, 0.0);
        assert!(!report.flagged);
        assert!(report.windows.is_empty());
    }
}
