//! The trace: an append-only stream of transaction records, auction round
//! summaries, and periodic population snapshots — the sole input to all
//! analysis.
//!
//! On disk a trace is UTF-8 text. Header and structured lines are prefixed
//! with `#`; the body is CSV with the columns
//! `tick,market,buyer,seller,object,kind,price,gain_buyer_pct,gain_seller_pct,minted,imitation,reason`.
//! Round summaries (`# round = ...`) and snapshot blocks (`# snapshot_begin`
//! .. `# snapshot_end`, holding one genome and one kernel line per agent)
//! are interleaved in tick order, so any CSV reader sees only the records
//! while this parser recovers everything. The embedded config (`# cfg:`
//! lines) lets `replay` re-run a trace from the file alone.

use std::fmt::Write as _;
use std::io;

use thiserror::Error;

use crate::genome::Genome;
use crate::kernel::{Kernel, Stimulus};
use crate::market::{
    MarketKind, Proposition, PropositionKind, RecordKind, RecordReason, TransactionRecord,
};

pub const TRACE_FORMAT_VERSION: u32 = 1;

pub const CSV_COLUMNS: &str =
    "tick,market,buyer,seller,object,kind,price,gain_buyer_pct,gain_seller_pct,minted,imitation,reason";

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("trace parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Header fields carried by every trace file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceHeader {
    pub format_version: u32,
    pub config_hash: String,
    pub seed: u64,
}

/// One agent's state at a snapshot tick, as serialized: the genome line
/// (`agent_id, flexibility, hash_genes, extents..., anchors...`) plus the
/// kernel line (`agent_id, alpha..., lo..., hi...`).
#[derive(Debug, Clone, PartialEq)]
pub struct AgentSnapshot {
    pub agent_id: u32,
    pub flexibility: f64,
    pub hash_genes: String,
    pub extents: Vec<f64>,
    pub anchors: Vec<f64>,
    pub alpha: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AgentSnapshot {
    /// Reconstructs the kernel at snapshot time. Anchors never move after
    /// construction, so the genome's anchor genes clamped into the original
    /// box are exact (anchor-jitter mutations express only in the genome).
    pub fn kernel(&self) -> Kernel {
        let dims = self.lo.len();
        let anchors: Vec<Vec<f64>> = self
            .anchors
            .chunks_exact(dims)
            .map(|c| c.to_vec())
            .collect();
        Kernel::from_snapshot(
            self.lo.clone(),
            self.hi.clone(),
            anchors,
            self.alpha.clone(),
        )
    }

    pub fn genome(&self) -> Genome {
        let mut structural = self.extents.clone();
        structural.extend_from_slice(&self.anchors);
        Genome::from_parts(
            self.extents.len(),
            structural,
            self.hash_genes.clone(),
            self.flexibility,
        )
        .expect("snapshot genome is valid")
    }

    /// Soft classification of a stimulus by this agent at snapshot time.
    pub fn classify(&self, stimulus: &Stimulus) -> f64 {
        self.kernel().classify(stimulus)
    }

    /// Genome snapshot line: `agent_id, flexibility, hash_genes, extents...,
    /// anchors...`.
    pub fn genome_line(&self) -> String {
        let mut s = format!("{},{},{}", self.agent_id, self.flexibility, self.hash_genes);
        for v in self.extents.iter().chain(self.anchors.iter()) {
            let _ = write!(s, ",{v}");
        }
        s
    }

    /// Kernel snapshot line: `agent_id, alpha..., lo..., hi...`.
    pub fn kernel_line(&self) -> String {
        let mut s = format!("{}", self.agent_id);
        for v in self
            .alpha
            .iter()
            .chain(self.lo.iter())
            .chain(self.hi.iter())
        {
            let _ = write!(s, ",{v}");
        }
        s
    }
}

/// All agents at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSnapshot {
    pub tick: u64,
    pub agents: Vec<AgentSnapshot>,
}

/// Summary line for one compositional auction round.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RoundSummary {
    pub tick: u64,
    pub ensemble_id: String,
    pub round: u32,
    pub offer_price: f64,
    pub acceptance_rate: f64,
    pub n_fills: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TraceEvent {
    Record(TransactionRecord),
    Round(RoundSummary),
    Snapshot(PopulationSnapshot),
}

impl TraceEvent {
    pub fn tick(&self) -> u64 {
        match self {
            TraceEvent::Record(r) => r.tick,
            TraceEvent::Round(r) => r.tick,
            TraceEvent::Snapshot(s) => s.tick,
        }
    }
}

/// A full run's output stream plus enough context to re-run it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    /// Canonical config text, embedded for `replay`.
    pub config_text: String,
    pub catalog: Vec<Proposition>,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn records(&self) -> impl Iterator<Item = &TransactionRecord> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Record(r) => Some(r),
            _ => None,
        })
    }

    pub fn rounds(&self) -> impl Iterator<Item = &RoundSummary> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Round(r) => Some(r),
            _ => None,
        })
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &PopulationSnapshot> {
        self.events.iter().filter_map(|e| match e {
            TraceEvent::Snapshot(s) => Some(s),
            _ => None,
        })
    }

    /// Latest snapshot at or before `tick`, falling back to the earliest.
    pub fn snapshot_at_or_before(&self, tick: u64) -> Option<&PopulationSnapshot> {
        self.snapshots()
            .filter(|s| s.tick <= tick)
            .last()
            .or_else(|| self.snapshots().next())
    }

    pub fn object(&self, id: &str) -> Option<&Proposition> {
        self.catalog.iter().find(|p| p.id == id)
    }

    pub fn max_tick(&self) -> u64 {
        self.events.last().map(|e| e.tick()).unwrap_or(0)
    }

    /// Serializes the trace to its on-disk text form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# trace v{}", self.header.format_version);
        let _ = writeln!(out, "# config_hash = {}", self.header.config_hash);
        let _ = writeln!(out, "# seed = {}", self.header.seed);
        let _ = writeln!(out, "# config_begin");
        for line in self.config_text.lines() {
            let _ = writeln!(out, "# cfg:{line}");
        }
        let _ = writeln!(out, "# config_end");
        for p in &self.catalog {
            let _ = write!(
                out,
                "# object = {},{},{}",
                p.id,
                p.kind.as_str(),
                p.base_value
            );
            for c in &p.stimulus.coords {
                let _ = write!(out, ",{c}");
            }
            let _ = writeln!(out);
        }
        let _ = writeln!(out, "{CSV_COLUMNS}");
        for event in &self.events {
            match event {
                TraceEvent::Record(r) => {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{},{},{},{}",
                        r.tick,
                        r.market.as_str(),
                        r.buyer_id,
                        r.seller_id,
                        r.object_ref,
                        r.kind.as_str(),
                        r.price,
                        r.gain_buyer_pct,
                        r.gain_seller_pct,
                        r.minted,
                        r.imitation,
                        r.reason.as_str()
                    );
                }
                TraceEvent::Round(r) => {
                    let _ = writeln!(
                        out,
                        "# round = {},{},{},{},{},{}",
                        r.tick, r.ensemble_id, r.round, r.offer_price, r.acceptance_rate, r.n_fills
                    );
                }
                TraceEvent::Snapshot(s) => {
                    let _ = writeln!(out, "# snapshot_begin tick={}", s.tick);
                    for a in &s.agents {
                        let _ = writeln!(out, "# genome = {}", a.genome_line());
                        let _ = writeln!(out, "# kernel = {}", a.kernel_line());
                    }
                    let _ = writeln!(out, "# snapshot_end");
                }
            }
        }
        out
    }

    pub fn write_to_file(&self, path: &std::path::Path) -> Result<(), TraceError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_from_file(path: &std::path::Path) -> Result<Trace, TraceError> {
        let text = std::fs::read_to_string(path)?;
        Trace::parse(&text)
    }

    /// Parses the on-disk form back into a trace. Ticks must be
    /// non-decreasing and the header must be present.
    pub fn parse(text: &str) -> Result<Trace, TraceError> {
        let lines = text.lines().enumerate();

        let mut format_version = None;
        let mut config_hash = None;
        let mut seed = None;
        let mut config_text = String::new();
        let mut catalog = Vec::new();
        let mut events: Vec<TraceEvent> = Vec::new();
        let mut open_snapshot: Option<PopulationSnapshot> = None;
        let mut pending_genome: Option<(usize, Vec<String>)> = None;
        let mut saw_columns = false;
        let mut last_tick = 0u64;

        for (idx, raw) in lines {
            let line_no = idx + 1;
            let err = |msg: &str| TraceError::Parse {
                line: line_no,
                msg: msg.to_string(),
            };
            if let Some(rest) = raw.strip_prefix("# ") {
                if let Some(v) = raw.strip_prefix("# trace v") {
                    format_version = Some(
                        v.trim()
                            .parse::<u32>()
                            .map_err(|_| err("bad format version"))?,
                    );
                } else if let Some(v) = rest.strip_prefix("config_hash = ") {
                    config_hash = Some(v.trim().to_string());
                } else if let Some(v) = rest.strip_prefix("seed = ") {
                    seed = Some(v.trim().parse::<u64>().map_err(|_| err("bad seed"))?);
                } else if rest.trim() == "config_begin" || rest.trim() == "config_end" {
                    // section delimiters; config lines carry their own prefix
                } else if let Some(cfg) = rest.strip_prefix("cfg:") {
                    config_text.push_str(cfg);
                    config_text.push('\n');
                } else if let Some(v) = rest.strip_prefix("object = ") {
                    catalog.push(parse_object_line(v, line_no)?);
                } else if let Some(v) = rest.strip_prefix("round = ") {
                    let round = parse_round_line(v, line_no)?;
                    if round.tick < last_tick {
                        return Err(err("ticks must be non-decreasing"));
                    }
                    last_tick = round.tick;
                    events.push(TraceEvent::Round(round));
                } else if let Some(v) = rest.strip_prefix("snapshot_begin tick=") {
                    if open_snapshot.is_some() {
                        return Err(err("nested snapshot"));
                    }
                    let tick = v.trim().parse::<u64>().map_err(|_| err("bad tick"))?;
                    if tick < last_tick {
                        return Err(err("ticks must be non-decreasing"));
                    }
                    last_tick = tick;
                    open_snapshot = Some(PopulationSnapshot {
                        tick,
                        agents: Vec::new(),
                    });
                } else if rest.trim() == "snapshot_end" {
                    let snap = open_snapshot
                        .take()
                        .ok_or_else(|| err("unopened snapshot"))?;
                    if pending_genome.is_some() {
                        return Err(err("genome line without kernel line"));
                    }
                    events.push(TraceEvent::Snapshot(snap));
                } else if let Some(v) = rest.strip_prefix("genome = ") {
                    if open_snapshot.is_none() {
                        return Err(err("genome line outside snapshot"));
                    }
                    if pending_genome.is_some() {
                        return Err(err("two genome lines in a row"));
                    }
                    pending_genome = Some((
                        line_no,
                        v.split(',').map(|s| s.trim().to_string()).collect(),
                    ));
                } else if let Some(v) = rest.strip_prefix("kernel = ") {
                    let (gline, gfields) = pending_genome
                        .take()
                        .ok_or_else(|| err("kernel line without genome"))?;
                    let snap = open_snapshot
                        .as_mut()
                        .ok_or_else(|| err("outside snapshot"))?;
                    let agent = parse_agent_snapshot(&gfields, gline, v, line_no)?;
                    snap.agents.push(agent);
                } else {
                    return Err(err("unrecognized structured line"));
                }
            } else if let Some(cfg) = raw.strip_prefix("#cfg:") {
                // tolerated compact form
                config_text.push_str(cfg);
                config_text.push('\n');
            } else if raw == "#" || raw.starts_with('#') {
                return Err(err("unrecognized comment line"));
            } else if !saw_columns {
                if raw != CSV_COLUMNS {
                    return Err(err("expected the CSV column header"));
                }
                saw_columns = true;
            } else {
                let record = parse_record_line(raw, line_no)?;
                if record.tick < last_tick {
                    return Err(err("ticks must be non-decreasing"));
                }
                last_tick = record.tick;
                events.push(TraceEvent::Record(record));
            }
        }

        if open_snapshot.is_some() {
            return Err(TraceError::Parse {
                line: 0,
                msg: "unterminated snapshot".into(),
            });
        }
        let header = TraceHeader {
            format_version: format_version.ok_or(TraceError::Parse {
                line: 0,
                msg: "missing trace version header".into(),
            })?,
            config_hash: config_hash.ok_or(TraceError::Parse {
                line: 0,
                msg: "missing config_hash header".into(),
            })?,
            seed: seed.ok_or(TraceError::Parse {
                line: 0,
                msg: "missing seed header".into(),
            })?,
        };
        Ok(Trace {
            header,
            config_text,
            catalog,
            events,
        })
    }
}

/// FNV-1a 64-bit; stable across builds, good enough to fingerprint configs.
pub fn fnv1a_hash(text: &str) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

fn parse_f64(s: &str, line: usize) -> Result<f64, TraceError> {
    s.trim().parse::<f64>().map_err(|_| TraceError::Parse {
        line,
        msg: format!("bad number '{s}'"),
    })
}

fn parse_object_line(v: &str, line: usize) -> Result<Proposition, TraceError> {
    let fields: Vec<&str> = v.split(',').collect();
    if fields.len() < 4 {
        return Err(TraceError::Parse {
            line,
            msg: "object line needs id,kind,base_value,coords...".into(),
        });
    }
    let kind = match fields[1].trim() {
        "singleton" => PropositionKind::Singleton,
        "linked" => PropositionKind::Linked,
        other => {
            return Err(TraceError::Parse {
                line,
                msg: format!("unknown proposition kind '{other}'"),
            })
        }
    };
    let base_value = parse_f64(fields[2], line)?;
    let coords = fields[3..]
        .iter()
        .map(|f| parse_f64(f, line))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(Proposition {
        id: fields[0].trim().to_string(),
        stimulus: Stimulus::new(coords),
        base_value,
        kind,
    })
}

fn parse_round_line(v: &str, line: usize) -> Result<RoundSummary, TraceError> {
    let fields: Vec<&str> = v.split(',').collect();
    if fields.len() != 6 {
        return Err(TraceError::Parse {
            line,
            msg: "round line needs 6 fields".into(),
        });
    }
    Ok(RoundSummary {
        tick: fields[0].trim().parse().map_err(|_| TraceError::Parse {
            line,
            msg: "bad tick".into(),
        })?,
        ensemble_id: fields[1].trim().to_string(),
        round: fields[2].trim().parse().map_err(|_| TraceError::Parse {
            line,
            msg: "bad round".into(),
        })?,
        offer_price: parse_f64(fields[3], line)?,
        acceptance_rate: parse_f64(fields[4], line)?,
        n_fills: fields[5].trim().parse().map_err(|_| TraceError::Parse {
            line,
            msg: "bad fill count".into(),
        })?,
    })
}

fn parse_record_line(raw: &str, line: usize) -> Result<TransactionRecord, TraceError> {
    let fields: Vec<&str> = raw.split(',').collect();
    if fields.len() != 12 {
        return Err(TraceError::Parse {
            line,
            msg: format!("record needs 12 fields, got {}", fields.len()),
        });
    }
    let market = match fields[1] {
        "minimal" => MarketKind::Minimal,
        "compositional" => MarketKind::Compositional,
        other => {
            return Err(TraceError::Parse {
                line,
                msg: format!("unknown market '{other}'"),
            })
        }
    };
    let kind = match fields[5] {
        "bid" => RecordKind::Bid,
        "complete" => RecordKind::Complete,
        other => {
            return Err(TraceError::Parse {
                line,
                msg: format!("unknown record kind '{other}'"),
            })
        }
    };
    let reason = RecordReason::parse(fields[11]).ok_or_else(|| TraceError::Parse {
        line,
        msg: format!("unknown reason '{}'", fields[11]),
    })?;
    let imitation = match fields[10] {
        "true" => true,
        "false" => false,
        other => {
            return Err(TraceError::Parse {
                line,
                msg: format!("bad imitation flag '{other}'"),
            })
        }
    };
    Ok(TransactionRecord {
        tick: fields[0].parse().map_err(|_| TraceError::Parse {
            line,
            msg: "bad tick".into(),
        })?,
        market,
        buyer_id: fields[2].parse().map_err(|_| TraceError::Parse {
            line,
            msg: "bad buyer id".into(),
        })?,
        seller_id: fields[3].parse().map_err(|_| TraceError::Parse {
            line,
            msg: "bad seller id".into(),
        })?,
        object_ref: fields[4].to_string(),
        kind,
        price: parse_f64(fields[6], line)?,
        gain_buyer_pct: parse_f64(fields[7], line)?,
        gain_seller_pct: parse_f64(fields[8], line)?,
        minted: parse_f64(fields[9], line)?,
        imitation,
        reason,
    })
}

fn parse_agent_snapshot(
    genome_fields: &[String],
    genome_line_no: usize,
    kernel_raw: &str,
    kernel_line_no: usize,
) -> Result<AgentSnapshot, TraceError> {
    if genome_fields.len() < 5 {
        return Err(TraceError::Parse {
            line: genome_line_no,
            msg: "genome line too short".into(),
        });
    }
    let agent_id: u32 = genome_fields[0].parse().map_err(|_| TraceError::Parse {
        line: genome_line_no,
        msg: "bad agent id".into(),
    })?;
    let flexibility = parse_f64(&genome_fields[1], genome_line_no)?;
    let hash_genes = genome_fields[2].clone();

    let kernel_fields: Vec<&str> = kernel_raw.split(',').collect();
    // kernel line: agent_id + 3 * dims numbers
    if kernel_fields.len() < 4 || !(kernel_fields.len() - 1).is_multiple_of(3) {
        return Err(TraceError::Parse {
            line: kernel_line_no,
            msg: "kernel line needs agent_id plus 3*dims numbers".into(),
        });
    }
    let kernel_agent: u32 = kernel_fields[0]
        .trim()
        .parse()
        .map_err(|_| TraceError::Parse {
            line: kernel_line_no,
            msg: "bad agent id".into(),
        })?;
    if kernel_agent != agent_id {
        return Err(TraceError::Parse {
            line: kernel_line_no,
            msg: format!("kernel line for agent {kernel_agent} after genome line for {agent_id}"),
        });
    }
    let dims = (kernel_fields.len() - 1) / 3;
    let nums = kernel_fields[1..]
        .iter()
        .map(|f| parse_f64(f, kernel_line_no))
        .collect::<Result<Vec<f64>, _>>()?;
    let alpha = nums[0..dims].to_vec();
    let lo = nums[dims..2 * dims].to_vec();
    let hi = nums[2 * dims..3 * dims].to_vec();

    let structural = genome_fields[3..]
        .iter()
        .map(|f| parse_f64(f, genome_line_no))
        .collect::<Result<Vec<f64>, _>>()?;
    if structural.len() < 2 * dims || !(structural.len() - dims).is_multiple_of(dims) {
        return Err(TraceError::Parse {
            line: genome_line_no,
            msg: "structural genes do not decompose into extents plus anchors".into(),
        });
    }
    Ok(AgentSnapshot {
        agent_id,
        flexibility,
        hash_genes,
        extents: structural[..dims].to_vec(),
        anchors: structural[dims..].to_vec(),
        alpha,
        lo,
        hi,
    })
}
