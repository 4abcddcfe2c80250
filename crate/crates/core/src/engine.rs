//! The simulation controller: a deterministic, single-threaded tick loop.
//!
//! Each tick runs five phases in a fixed order:
//!
//! 1. observation — premiums are sampled over first-order neighbors and the
//!    acquisition pool is gated per (agent, object);
//! 2. pairwise trading — imitation reactions to the previous tick's
//!    completed trades come first (one hop per observed trade per tick,
//!    since an object has a single holder), then a seeded random maximal
//!    matching over the previous tick's arcs, one offer per matched pair;
//! 3. every k-th tick, one compositional auction round per ensemble with
//!    feedback repricing;
//! 4. arc and position updates from this tick's completed records, then any
//!    configured mutation;
//! 5. periodic snapshots.
//!
//! Every stochastic choice draws from one ChaCha stream seeded once, in a
//! fixed documented order (setup draws, then per tick: matching shuffle,
//! role flips, object picks, mutation seeds), so a (config, seed) pair
//! yields a byte-identical trace.
//!
//! Agents frame novel stimuli before evaluating them: an evaluator's kernel
//! is rescaled to the object (a no-op when already contained), then gated.
//! Imitation bypasses both framing and gates.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::genome::Genome;
use crate::market::{
    auction_round, feedback_adjust, link, propose_trade, settle_imitation, settle_pairwise,
    Ensemble, MarketKind, Proposition, PropositionKind, RecordKind, TransactionRecord,
};
use crate::network::{
    imitate, observation_criterion, sample_premiums, should_acquire, update_edges, AgentId,
    AgentState, ArcSet, ObservationInputs, Population,
};
use crate::trace::{
    fnv1a_hash, AgentSnapshot, PopulationSnapshot, RoundSummary, Trace, TraceEvent, TraceHeader,
    TRACE_FORMAT_VERSION,
};
use crate::valuation::encode_value;

/// Arcs and agent positions at a logged tick; the source of `network.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSnapshot {
    pub tick: u64,
    pub arcs: ArcSet,
    pub positions: Vec<(AgentId, f64, f64)>,
}

/// Per-tick conservation figures.
#[derive(Debug, Clone, PartialEq)]
pub struct TickAudit {
    pub tick: u64,
    pub total_balance: f64,
    pub minted_cumulative: f64,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: Trace,
    pub population: Population,
    pub ensembles: Vec<Ensemble>,
    pub network_log: Vec<NetworkSnapshot>,
    pub audits: Vec<TickAudit>,
    pub initial_balance_total: f64,
}

/// Initial world state; normally built from the config, but scripted
/// scenarios may construct one directly.
#[derive(Debug, Clone)]
pub struct Setup {
    pub population: Population,
    pub catalog: Vec<Proposition>,
    pub ensembles: Vec<Ensemble>,
}

/// Runs a config end to end.
pub fn run(config: &Config) -> RunOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let setup = build_setup(config, &mut rng);
    run_from_setup(config, setup, rng)
}

/// Builds the initial world from the config: genomes (clustered or i.i.d.),
/// agents placed at their anchor centroids, initial holdings dealt
/// round-robin unless pinned, holders' kernels framed on what they hold,
/// and each agent's hash segment extended so its own initial perception of
/// every object passes its own gate (agents start attuned to their own
/// valuations; cross-agent prices still have to match).
pub fn build_setup(config: &Config, rng: &mut ChaCha8Rng) -> Setup {
    let n = config.agents;

    let genomes: Vec<Genome> = if config.clusters.is_empty() {
        (0..n)
            .map(|_| {
                Genome::random(rng.gen(), config.dims, config.anchors, config.hash_len)
                    .expect("validated sizes")
            })
            .collect()
    } else {
        let mut out = Vec::new();
        for cluster in &config.clusters {
            let drawn = Genome::random(rng.gen(), config.dims, config.anchors, config.hash_len)
                .expect("validated sizes");
            // Cluster base: drawn extents, hash and flexibility, anchors at
            // the cluster center.
            let mut structural = drawn.extents().to_vec();
            for _ in 0..config.anchors {
                structural.extend_from_slice(&cluster.center);
            }
            let base = Genome::from_parts(
                config.dims,
                structural,
                drawn.hash_genes().to_string(),
                drawn.flexibility(),
            )
            .expect("cluster center in [0,1]");
            for _ in 0..cluster.count {
                let mut structural = base.structural_genes().to_vec();
                for gene in structural[config.dims..].iter_mut() {
                    let u: f64 = rng.gen_range(-1.0..1.0);
                    *gene = (*gene + u * cluster.spread).clamp(0.0, 1.0);
                }
                out.push(
                    Genome::from_parts(
                        config.dims,
                        structural,
                        base.hash_genes().to_string(),
                        base.flexibility(),
                    )
                    .expect("jitter clamped"),
                );
            }
        }
        out
    };

    let mut population = Population::new(
        genomes
            .into_iter()
            .enumerate()
            .map(|(i, g)| AgentState::new(i as AgentId, g, config.initial_balance))
            .collect(),
    );

    let member_ids: BTreeSet<&str> = config
        .ensembles
        .iter()
        .flat_map(|e| e.members.iter().map(|m| m.as_str()))
        .collect();
    let catalog: Vec<Proposition> = config
        .objects
        .iter()
        .map(|o| {
            let mut p = Proposition::new(&o.id, o.coords.clone(), o.base_value);
            if member_ids.contains(o.id.as_str()) {
                p.kind = PropositionKind::Linked;
            }
            p
        })
        .collect();

    // Deal initial holdings and frame each holder on its object.
    for (idx, (spec, prop)) in config.objects.iter().zip(&catalog).enumerate() {
        let owner = spec.owner.unwrap_or(idx as u32 % n);
        let agent = population.get_mut(owner);
        agent.add_holding(&prop.id);
        let flexibility = agent.genome.flexibility();
        agent.kernel = agent.kernel.rescaled(&prop.stimulus, flexibility);
    }

    // Self-consistency splice: append the encoding of the agent's own
    // perceived value of each object when the hash segment lacks it.
    for id in 0..n {
        let agent = population.get_mut(id);
        for prop in &catalog {
            let center = agent.perceived_center(&prop.stimulus, prop.base_value);
            let code = encode_value(center.round().max(0.0) as u64);
            if !agent.genome.hash_genes().contains(&code) {
                let extended = format!("{}{}", agent.genome.hash_genes(), code);
                agent.genome = Genome::from_parts(
                    agent.genome.dims(),
                    agent.genome.structural_genes().to_vec(),
                    extended,
                    agent.genome.flexibility(),
                )
                .expect("extended hash stays valid");
            }
        }
    }

    let ensembles = config
        .ensembles
        .iter()
        .map(|spec| {
            let members: Vec<&Proposition> = spec
                .members
                .iter()
                .map(|m| catalog.iter().find(|p| &p.id == m).expect("validated"))
                .collect();
            link(
                &spec.id,
                spec.operator.unwrap_or(0),
                &members,
                spec.linkage_factor,
            )
            .expect("validated ensemble spec")
        })
        .collect();

    Setup {
        population,
        catalog,
        ensembles,
    }
}

/// Runs the tick loop over a prepared world. The RNG must be the stream the
/// setup was drawn from (or a fresh seeded one for scripted setups).
pub fn run_from_setup(config: &Config, setup: Setup, mut rng: ChaCha8Rng) -> RunOutput {
    let Setup {
        mut population,
        catalog,
        mut ensembles,
    } = setup;
    let n = population.len() as u32;

    // Single-holder ownership index, kept in lockstep with settlements.
    let mut ownership: BTreeMap<String, AgentId> = BTreeMap::new();
    // Agents that ever held an object; imitation only recruits fresh buyers,
    // so a gain signal spreads across the network instead of ping-ponging.
    let mut ever_held: BTreeMap<String, BTreeSet<AgentId>> = BTreeMap::new();
    for prop in &catalog {
        let holders: Vec<AgentId> = (0..n)
            .filter(|&i| population.get(i).holds(&prop.id))
            .collect();
        assert_eq!(
            holders.len(),
            1,
            "object {} must start with exactly one holder",
            prop.id
        );
        ownership.insert(prop.id.clone(), holders[0]);
        ever_held
            .entry(prop.id.clone())
            .or_default()
            .insert(holders[0]);
    }

    let initial_balance_total = population.total_balance();
    let mut minted_cumulative = 0.0;
    let mut events: Vec<TraceEvent> = Vec::new();
    let mut network_log = Vec::new();
    let mut audits = vec![TickAudit {
        tick: 0,
        total_balance: initial_balance_total,
        minted_cumulative: 0.0,
    }];

    let mut prev_arcs = update_edges(&population, &[], config.alpha_tolerance);
    let mut prev_completes: Vec<TransactionRecord> = Vec::new();

    events.push(TraceEvent::Snapshot(population_snapshot(&population, 0)));
    network_log.push(network_snapshot(&population, &prev_arcs, 0));

    for tick in 1..=config.ticks {
        let mut tick_events: Vec<TraceEvent> = Vec::new();
        let mut traded: BTreeSet<AgentId> = BTreeSet::new();

        // ------ phase 1: observation pool -------------------------------
        let mut pool: BTreeSet<(AgentId, usize)> = BTreeSet::new();
        for agent_id in 0..n {
            let neighbor_ids = prev_arcs.neighbors(agent_id);
            let neighbors: Vec<&AgentState> =
                neighbor_ids.iter().map(|&i| population.get(i)).collect();
            let neighbor_counts: Vec<u32> =
                neighbors.iter().map(|a| a.proposition_count()).collect();
            let own_count = population.get(agent_id).proposition_count();
            for (object_index, prop) in catalog.iter().enumerate() {
                let (symbolic, scarcity) = sample_premiums(&neighbors, &prop.id);
                let c_x = observation_criterion(&ObservationInputs {
                    own_count,
                    neighbor_counts: neighbor_counts.clone(),
                    symbolic_premium: symbolic,
                    scarcity_premium: scarcity,
                });
                if should_acquire(population.get(agent_id), prop, c_x) {
                    pool.insert((agent_id, object_index));
                }
            }
        }

        // ------ phase 2a: imitation reactions ---------------------------
        for observed in &prev_completes {
            let Some(prop) = catalog.iter().find(|p| p.id == observed.object_ref) else {
                continue;
            };
            let observed_buyer = observed.buyer_id;
            for candidate in prev_arcs.neighbors(observed_buyer) {
                if traded.contains(&candidate) || candidate == observed_buyer {
                    continue;
                }
                if ever_held
                    .get(&prop.id)
                    .is_some_and(|held| held.contains(&candidate))
                {
                    continue; // the object is no longer novel to this agent
                }
                let holder = match ownership.get(&prop.id) {
                    Some(&h) => h,
                    None => break,
                };
                if holder == candidate || traded.contains(&holder) {
                    continue;
                }
                let (updated, fired) = imitate(
                    population.get(candidate),
                    population.get(observed_buyer),
                    &prop.stimulus,
                    config.familiarity_threshold,
                );
                if !fired {
                    continue;
                }
                *population.get_mut(candidate) = updated;
                let record = settle_imitation(
                    &mut population,
                    candidate,
                    holder,
                    prop,
                    observed,
                    config.allow_mint,
                    tick,
                );
                traded.insert(candidate);
                let completed = record.kind == RecordKind::Complete;
                tick_events.push(TraceEvent::Record(record));
                if completed {
                    ownership.insert(prop.id.clone(), candidate);
                    ever_held
                        .entry(prop.id.clone())
                        .or_default()
                        .insert(candidate);
                    traded.insert(holder);
                    break; // the object moved; later observers react next tick
                }
            }
        }

        // ------ phase 2b: random maximal matching ------------------------
        let candidate_arcs: BTreeSet<(u32, u32)> =
            prev_arcs.black.union(&prev_arcs.red).cloned().collect();
        let mut arcs_vec: Vec<(u32, u32)> = candidate_arcs.into_iter().collect();
        arcs_vec.shuffle(&mut rng);
        for (a, b) in arcs_vec {
            if traded.contains(&a) || traded.contains(&b) {
                continue;
            }
            traded.insert(a);
            traded.insert(b);
            let (mut seller, mut buyer) = if rng.gen::<bool>() { (a, b) } else { (b, a) };
            if population.get(seller).holdings.is_empty() {
                if population.get(buyer).holdings.is_empty() {
                    continue; // nothing tradeable between them
                }
                std::mem::swap(&mut seller, &mut buyer);
            }
            let held: Vec<String> = population.get(seller).holdings.keys().cloned().collect();
            let object_id = held[rng.gen_range(0..held.len())].clone();
            let (object_index, prop) = catalog
                .iter()
                .enumerate()
                .find(|(_, p)| p.id == object_id)
                .expect("held objects are cataloged");
            if !pool.contains(&(buyer, object_index)) {
                continue; // buyer is not pursuing this object this tick
            }
            // Frame the stimulus, then evaluate.
            let flexibility = population.get(buyer).genome.flexibility();
            let framed = population
                .get(buyer)
                .kernel
                .rescaled(&prop.stimulus, flexibility);
            population.get_mut(buyer).kernel = framed;
            let offer = propose_trade(&population, seller, prop).expect("seller holds it");
            let record = settle_pairwise(
                &mut population,
                buyer,
                &offer,
                prop,
                config.allow_mint,
                tick,
            );
            if record.kind == RecordKind::Complete {
                ownership.insert(object_id.clone(), buyer);
                ever_held.entry(object_id).or_default().insert(buyer);
            }
            tick_events.push(TraceEvent::Record(record));
        }

        // ------ phase 3: compositional round ----------------------------
        if tick % config.compositional_every == 0 {
            for ensemble in ensembles.iter_mut() {
                for agent in population.iter_mut() {
                    let flexibility = agent.genome.flexibility();
                    agent.kernel = agent.kernel.rescaled(&ensemble.stimulus, flexibility);
                }
                let (result, records) = auction_round(&mut population, ensemble, tick);
                for record in records {
                    tick_events.push(TraceEvent::Record(record));
                }
                tick_events.push(TraceEvent::Round(RoundSummary {
                    tick,
                    ensemble_id: ensemble.id.clone(),
                    round: ensemble.round,
                    offer_price: ensemble.offer_price,
                    acceptance_rate: result.acceptance_rate,
                    n_fills: result.fills.len() as u32,
                }));
                let mut member_scores = BTreeMap::new();
                for member in &ensemble.members {
                    let prop = catalog.iter().find(|p| &p.id == member).expect("cataloged");
                    let mean = population
                        .iter()
                        .map(|a| a.kernel.classify(&prop.stimulus))
                        .sum::<f64>()
                        / population.len() as f64;
                    member_scores.insert(member.clone(), mean);
                }
                *ensemble = feedback_adjust(ensemble, &result, &config.feedback, &member_scores);
            }
        }

        // ------ phase 4: arcs, mobility, mutation ------------------------
        let tick_records: Vec<&TransactionRecord> = tick_events
            .iter()
            .filter_map(|e| match e {
                TraceEvent::Record(r) => Some(r),
                _ => None,
            })
            .collect();
        let arcs = update_edges(
            &population,
            &tick_records
                .iter()
                .map(|r| (*r).clone())
                .collect::<Vec<_>>(),
            config.alpha_tolerance,
        );
        for record in &tick_records {
            if record.kind == RecordKind::Complete && record.buyer_id != record.seller_id {
                crate::network::apply_mobility(
                    &mut population,
                    record.buyer_id,
                    record.seller_id,
                    config.mobility_step,
                );
            }
        }
        minted_cumulative += tick_records.iter().map(|r| r.minted).sum::<f64>();
        let completes: Vec<TransactionRecord> = tick_records
            .iter()
            .filter(|r| r.market == MarketKind::Minimal && r.kind == RecordKind::Complete)
            .map(|r| (*r).clone())
            .collect();

        if !config.mutation.is_zero() {
            for agent in population.iter_mut() {
                let child_seed: u64 = rng.gen();
                agent.genome = agent.genome.mutated(&config.mutation, child_seed);
            }
        }

        // ------ phase 5: snapshots ---------------------------------------
        events.append(&mut tick_events);
        if tick % config.snapshot_every == 0 || tick == config.ticks {
            events.push(TraceEvent::Snapshot(population_snapshot(&population, tick)));
            network_log.push(network_snapshot(&population, &arcs, tick));
        }

        audits.push(TickAudit {
            tick,
            total_balance: population.total_balance(),
            minted_cumulative,
        });
        debug_assert!(
            (population.total_balance() - (initial_balance_total + minted_cumulative)).abs()
                <= 1e-6 * (1.0 + initial_balance_total + minted_cumulative),
            "balance conservation violated at tick {tick}"
        );
        #[cfg(debug_assertions)]
        for prop in &catalog {
            debug_assert_eq!(
                population.total_copies(&prop.id),
                1,
                "single-holder violated"
            );
        }

        prev_arcs = arcs;
        prev_completes = completes;
    }

    let config_text = config.to_text();
    let trace = Trace {
        header: TraceHeader {
            format_version: TRACE_FORMAT_VERSION,
            config_hash: fnv1a_hash(&config_text),
            seed: config.seed,
        },
        config_text,
        catalog,
        events,
    };
    RunOutput {
        trace,
        population,
        ensembles,
        network_log,
        audits,
        initial_balance_total,
    }
}

fn population_snapshot(population: &Population, tick: u64) -> PopulationSnapshot {
    PopulationSnapshot {
        tick,
        agents: population
            .iter()
            .map(|a| AgentSnapshot {
                agent_id: a.id,
                flexibility: a.genome.flexibility(),
                hash_genes: a.genome.hash_genes().to_string(),
                extents: a.genome.extents().to_vec(),
                anchors: a.genome.structural_genes()[a.genome.dims()..].to_vec(),
                alpha: a.kernel.alpha().to_vec(),
                lo: a.kernel.lo().to_vec(),
                hi: a.kernel.hi().to_vec(),
            })
            .collect(),
    }
}

fn network_snapshot(population: &Population, arcs: &ArcSet, tick: u64) -> NetworkSnapshot {
    NetworkSnapshot {
        tick,
        arcs: arcs.clone(),
        positions: population
            .iter()
            .map(|a| (a.id, a.position[0], a.position[1]))
            .collect(),
    }
}

/// Writes `trace.csv`, `genomes.csv`, `kernels.csv` and `network.csv`.
pub fn write_outputs(out_dir: &Path, output: &RunOutput) -> io::Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("trace.csv"), output.trace.to_text())?;

    let mut genomes = String::new();
    let mut kernels = String::new();
    for snapshot in output.trace.snapshots() {
        genomes.push_str(&format!("# tick = {}\n", snapshot.tick));
        kernels.push_str(&format!("# tick = {}\n", snapshot.tick));
        for agent in &snapshot.agents {
            genomes.push_str(&agent.genome_line());
            genomes.push('\n');
            kernels.push_str(&agent.kernel_line());
            kernels.push('\n');
        }
    }
    std::fs::write(out_dir.join("genomes.csv"), genomes)?;
    std::fs::write(out_dir.join("kernels.csv"), kernels)?;

    let mut network = String::new();
    for snap in &output.network_log {
        for (a, b) in &snap.arcs.black {
            network.push_str(&format!("{},black,{},{}\n", snap.tick, a, b));
        }
        for (a, b) in &snap.arcs.red {
            network.push_str(&format!("{},red,{},{}\n", snap.tick, a, b));
        }
        for (id, x, y) in &snap.positions {
            network.push_str(&format!("{},{},{},{}\n", snap.tick, id, x, y));
        }
    }
    std::fs::write(out_dir.join("network.csv"), network)?;
    Ok(())
}

/// Re-runs a trace's embedded config and diffs the regenerated trace text
/// against the original. Returns true when byte-identical.
pub fn replay_matches(original: &Trace) -> Result<bool, crate::config::ConfigError> {
    let config = Config::parse(&original.config_text)?;
    let rerun = run(&config);
    Ok(rerun.trace.to_text() == original.to_text())
}
