//! Agent population and the social layer: observation criterion, premium
//! sampling, imitation, transaction/similarity arcs, and mobility.

use std::collections::{BTreeMap, BTreeSet};

use crate::genome::{copy_hash_segment, Genome};
use crate::kernel::{Kernel, Stimulus};
use crate::market::{Proposition, RecordKind, TransactionRecord};
use crate::valuation::{acceptable_range, PriceInterval};

/// Floor for the scarcity premium; observed rarity never reaches zero.
pub const SCARCITY_FLOOR: f64 = 0.05;

pub type AgentId = u32;

/// One agent: genome, kernel, a position in the field, a balance, and the
/// multisets of held propositions and ensemble shares.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: AgentId,
    pub genome: Genome,
    pub kernel: Kernel,
    pub position: [f64; 2],
    pub balance: f64,
    pub holdings: BTreeMap<String, u32>,
    pub ensemble_shares: BTreeMap<String, u32>,
}

impl AgentState {
    /// Builds an agent from its genome, placing it at the projection of the
    /// kernel anchor centroid into the field (first two dimensions).
    pub fn new(id: AgentId, genome: Genome, balance: f64) -> AgentState {
        let kernel = Kernel::from_genome(&genome);
        let centroid = genome.anchor_centroid();
        let x = centroid[0];
        let y = if centroid.len() > 1 { centroid[1] } else { 0.0 };
        AgentState {
            id,
            genome,
            kernel,
            position: [x, y],
            balance,
            holdings: BTreeMap::new(),
            ensemble_shares: BTreeMap::new(),
        }
    }

    /// Proposition count: held singletons plus ensemble shares.
    pub fn proposition_count(&self) -> u32 {
        self.holdings.values().sum::<u32>() + self.ensemble_shares.values().sum::<u32>()
    }

    pub fn holds(&self, proposition_id: &str) -> bool {
        self.holdings.get(proposition_id).copied().unwrap_or(0) > 0
    }

    pub fn copies_of(&self, proposition_id: &str) -> u32 {
        self.holdings.get(proposition_id).copied().unwrap_or(0)
    }

    pub fn add_holding(&mut self, proposition_id: &str) {
        *self.holdings.entry(proposition_id.to_string()).or_insert(0) += 1;
    }

    /// Removes one copy; panics if the agent does not hold it.
    pub fn remove_holding(&mut self, proposition_id: &str) {
        let count = self
            .holdings
            .get_mut(proposition_id)
            .expect("agent does not hold the proposition");
        *count -= 1;
        if *count == 0 {
            self.holdings.remove(proposition_id);
        }
    }

    pub fn add_ensemble_share(&mut self, ensemble_id: &str) {
        *self
            .ensemble_shares
            .entry(ensemble_id.to_string())
            .or_insert(0) += 1;
    }

    /// Kernel-implied point value of an item for this agent.
    pub fn perceived_center(&self, stimulus: &Stimulus, base_value: f64) -> f64 {
        self.kernel.classify(stimulus) * base_value
    }

    /// Acceptable price band for an item.
    pub fn acceptance_band(&self, stimulus: &Stimulus, base_value: f64) -> PriceInterval {
        acceptable_range(
            self.kernel.classify(stimulus),
            base_value,
            self.genome.flexibility(),
        )
    }
}

/// The population, indexed by agent id.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    agents: Vec<AgentState>,
}

impl Population {
    pub fn new(agents: Vec<AgentState>) -> Population {
        for (i, a) in agents.iter().enumerate() {
            assert_eq!(a.id as usize, i, "agents must be indexed by id");
        }
        Population { agents }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn get(&self, id: AgentId) -> &AgentState {
        &self.agents[id as usize]
    }

    pub fn get_mut(&mut self, id: AgentId) -> &mut AgentState {
        &mut self.agents[id as usize]
    }

    /// Two distinct agents borrowed mutably at once.
    pub fn pair_mut(&mut self, a: AgentId, b: AgentId) -> (&mut AgentState, &mut AgentState) {
        assert_ne!(a, b, "need two distinct agents");
        let (a, b) = (a as usize, b as usize);
        if a < b {
            let (left, right) = self.agents.split_at_mut(b);
            (&mut left[a], &mut right[0])
        } else {
            let (left, right) = self.agents.split_at_mut(a);
            (&mut right[0], &mut left[b])
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &AgentState> {
        self.agents.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut AgentState> {
        self.agents.iter_mut()
    }

    pub fn total_balance(&self) -> f64 {
        self.agents.iter().map(|a| a.balance).sum()
    }

    /// Total copies of a proposition across all holdings.
    pub fn total_copies(&self, proposition_id: &str) -> u32 {
        self.agents
            .iter()
            .map(|a| a.copies_of(proposition_id))
            .sum()
    }
}

/// Inputs to the observation criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationInputs {
    /// The agent's own proposition count (singletons + linked).
    pub own_count: u32,
    /// Proposition counts of first-order neighbors; zeros are floored to 1.
    pub neighbor_counts: Vec<u32>,
    pub symbolic_premium: f64,
    pub scarcity_premium: f64,
}

/// Minimal utility an agent demands before acquiring a new proposition:
/// `c_x = (sum over neighbors of K_x / K_n) * (Sm / Sc)`.
///
/// An empty neighborhood contributes a network term of 1, and any zero
/// neighbor count is floored to 1 so the ratio stays defined.
pub fn observation_criterion(inputs: &ObservationInputs) -> f64 {
    assert!(
        inputs.scarcity_premium > 0.0,
        "scarcity premium is floored above 0"
    );
    let network_term = if inputs.neighbor_counts.is_empty() {
        1.0
    } else {
        inputs
            .neighbor_counts
            .iter()
            .map(|&k_n| inputs.own_count as f64 / k_n.max(1) as f64)
            .sum()
    };
    network_term * (inputs.symbolic_premium / inputs.scarcity_premium)
}

/// Samples the symbolic and scarcity premiums for a proposition from the
/// agent's first-order neighborhood: popularity (fraction of neighbors
/// holding it) and observed rarity (one minus copies per neighbor, floored).
/// An empty neighborhood yields `(0, 1)`.
pub fn sample_premiums(neighbors: &[&AgentState], proposition_id: &str) -> (f64, f64) {
    if neighbors.is_empty() {
        return (0.0, 1.0);
    }
    let holders = neighbors.iter().filter(|n| n.holds(proposition_id)).count();
    let copies: u32 = neighbors.iter().map(|n| n.copies_of(proposition_id)).sum();
    let n = neighbors.len() as f64;
    let symbolic = holders as f64 / n;
    let scarcity = (1.0 - copies as f64 / n.max(1.0)).max(SCARCITY_FLOOR);
    (symbolic, scarcity)
}

/// Pool-entry rule: the agent pursues the proposition this tick iff its
/// kernel-implied utility meets the observation criterion (closed).
pub fn should_acquire(agent: &AgentState, proposition: &Proposition, c_x: f64) -> bool {
    assert!(c_x.is_finite());
    let utility = agent.kernel.classify(&proposition.stimulus) * proposition.base_value;
    utility >= c_x
}

/// Imitation check and application. When the object is unfamiliar to the
/// agent (classification below `theta_familiarity`), the agent copies the
/// counterpart's hash segment and will replicate its decision instead of
/// gating; the kernel is left untouched. Returns the updated agent and
/// whether imitation fired.
pub fn imitate(
    agent: &AgentState,
    counterpart: &AgentState,
    object: &Stimulus,
    theta_familiarity: f64,
) -> (AgentState, bool) {
    let familiarity = agent.kernel.classify(object);
    if familiarity >= theta_familiarity {
        return (agent.clone(), false);
    }
    let mut updated = agent.clone();
    updated.genome = copy_hash_segment(&counterpart.genome, &agent.genome);
    (updated, true)
}

/// Unordered agent pair with the smaller id first.
pub fn arc_key(a: AgentId, b: AgentId) -> (AgentId, AgentId) {
    assert_ne!(a, b, "no self-loops");
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// The two arc families of a tick: black arcs join parties of completed
/// transactions this tick, red arcs join agents whose kernels carry a common
/// scaling factor (alpha distance within tolerance).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ArcSet {
    pub black: BTreeSet<(AgentId, AgentId)>,
    pub red: BTreeSet<(AgentId, AgentId)>,
}

impl ArcSet {
    /// Sorted first-order neighbors of `id` over the union of both families.
    pub fn neighbors(&self, id: AgentId) -> Vec<AgentId> {
        let mut out = BTreeSet::new();
        for &(a, b) in self.black.iter().chain(self.red.iter()) {
            if a == id {
                out.insert(b);
            } else if b == id {
                out.insert(a);
            }
        }
        out.into_iter().collect()
    }
}

/// Rebuilds the arc set for a tick from the tick's records and the current
/// kernels. Red arcs ignore position entirely, so nearby agents can be
/// disconnected and distant ones joined.
pub fn update_edges(
    population: &Population,
    this_tick_records: &[TransactionRecord],
    alpha_tolerance: f64,
) -> ArcSet {
    let mut arcs = ArcSet::default();
    for record in this_tick_records {
        if record.kind == RecordKind::Complete && record.buyer_id != record.seller_id {
            arcs.black
                .insert(arc_key(record.buyer_id, record.seller_id));
        }
    }
    let n = population.len() as u32;
    for a in 0..n {
        for b in (a + 1)..n {
            let d = population
                .get(a)
                .kernel
                .alpha_distance(&population.get(b).kernel);
            if d <= alpha_tolerance {
                arcs.red.insert((a, b));
            }
        }
    }
    arcs
}

/// One mobility step toward a counterpart: `p + s * (q - p)`.
pub fn moved_position(position: [f64; 2], counterpart: [f64; 2], step: f64) -> [f64; 2] {
    assert!(step > 0.0 && step <= 1.0, "step in (0,1]");
    [
        position[0] + step * (counterpart[0] - position[0]),
        position[1] + step * (counterpart[1] - position[1]),
    ]
}

/// Moves both parties of a completed transaction toward each other, each
/// using the other's pre-move position.
pub fn apply_mobility(population: &mut Population, a: AgentId, b: AgentId, step: f64) {
    let pa = population.get(a).position;
    let pb = population.get(b).position;
    population.get_mut(a).position = moved_position(pa, pb, step);
    population.get_mut(b).position = moved_position(pb, pa, step);
}
