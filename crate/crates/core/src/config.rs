//! Run configuration: a sectioned, human-readable key-value file with
//! strict validation — unknown sections or keys are errors, and every value
//! is checked against its documented domain.
//!
//! Scalar sections hold `key = value` lines. Entry sections hold one line
//! per entity, keyed by its id:
//!
//! ```text
//! [objects]    apple = 100 @ 0.3 0.3            (base value @ coords [@ owner=ID])
//! [ensembles]  basket = 1.2 @ apple pear        (linkage @ members [@ operator=ID])
//! [clusters]   north = 25 0.02 @ 0.3 0.3        (count spread @ center coords)
//! ```

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::genome::MutationRates;
use crate::market::FeedbackPolicy;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config syntax error at line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown config key '{key}' at line {line}")]
    UnknownKey { line: usize, key: String },
    #[error("config value out of domain: {key}: {msg}")]
    Domain { key: String, msg: String },
}

impl ConfigError {
    /// Process exit code for this error class (I/O 4, everything else 2).
    pub fn exit_code(&self) -> i32 {
        match self {
            ConfigError::Io(_) => 4,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectSpec {
    pub id: String,
    pub base_value: f64,
    pub coords: Vec<f64>,
    /// Initial holder; objects without one are dealt round-robin by index.
    pub owner: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub id: String,
    pub linkage_factor: f64,
    pub members: Vec<String>,
    pub operator: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    pub label: String,
    pub count: u32,
    pub spread: f64,
    pub center: Vec<f64>,
}

/// Everything a run needs. See the module docs for the file format.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    // [simulation]
    pub seed: u64,
    pub ticks: u64,
    pub compositional_every: u64,
    pub snapshot_every: u64,
    pub allow_mint: bool,
    /// Default output directory for `run`; the CLI flag overrides it.
    pub out_dir: String,
    // [population]
    pub agents: u32,
    pub dims: usize,
    pub anchors: usize,
    pub hash_len: usize,
    pub initial_balance: f64,
    // [mutation]
    pub mutation: MutationRates,
    // [social]
    pub familiarity_threshold: f64,
    pub alpha_tolerance: f64,
    pub mobility_step: f64,
    // [feedback]
    pub feedback: FeedbackPolicy,
    // [analysis]
    pub fold_threshold: f64,
    pub variance_ratio: f64,
    pub outlier_k: f64,
    pub bubble_window: u64,
    pub gain_floor: f64,
    // entry sections
    pub objects: Vec<ObjectSpec>,
    pub ensembles: Vec<EnsembleSpec>,
    pub clusters: Vec<ClusterSpec>,
}

impl Config {
    /// A minimal baseline: every scalar at its default, no objects.
    /// `agents` and `ticks` still need real values before validation.
    fn baseline() -> Config {
        Config {
            seed: 42,
            ticks: 0,
            compositional_every: 5,
            snapshot_every: 10,
            allow_mint: false,
            out_dir: "out".to_string(),
            agents: 0,
            dims: 2,
            anchors: 3,
            hash_len: 32,
            initial_balance: 1000.0,
            mutation: MutationRates::default(),
            familiarity_threshold: 0.3,
            alpha_tolerance: 0.1,
            mobility_step: 0.2,
            feedback: FeedbackPolicy::default(),
            fold_threshold: 2.0,
            variance_ratio: 2.0,
            outlier_k: 1.5,
            bubble_window: 5,
            gain_floor: 0.0,
            objects: Vec::new(),
            ensembles: Vec::new(),
            clusters: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Config, ConfigError> {
        let mut config = Config::baseline();
        let mut section = String::new();
        let mut saw_agents = false;
        let mut saw_ticks = false;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(ConfigError::Syntax {
                    line: line_no,
                    msg: "unterminated section header".into(),
                })?;
                section = name.trim().to_string();
                const SECTIONS: [&str; 9] = [
                    "simulation",
                    "population",
                    "mutation",
                    "social",
                    "feedback",
                    "analysis",
                    "objects",
                    "ensembles",
                    "clusters",
                ];
                if !SECTIONS.contains(&section.as_str()) {
                    return Err(ConfigError::UnknownKey {
                        line: line_no,
                        key: format!("[{section}]"),
                    });
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax {
                line: line_no,
                msg: "expected 'key = value'".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            if section.is_empty() {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    msg: "key outside any section".into(),
                });
            }
            match section.as_str() {
                "simulation" => match key {
                    "seed" => config.seed = parse_int(key, value, line_no)?,
                    "ticks" => {
                        config.ticks = parse_int(key, value, line_no)?;
                        saw_ticks = true;
                    }
                    "compositional_every" => {
                        config.compositional_every = parse_int(key, value, line_no)?
                    }
                    "snapshot_every" => config.snapshot_every = parse_int(key, value, line_no)?,
                    "allow_mint" => config.allow_mint = parse_bool(key, value, line_no)?,
                    "out_dir" => {
                        if value.is_empty() {
                            return Err(ConfigError::Syntax {
                                line: line_no,
                                msg: "out_dir must not be empty".into(),
                            });
                        }
                        config.out_dir = value.to_string();
                    }
                    _ => return unknown(key, line_no),
                },
                "population" => match key {
                    "agents" => {
                        config.agents = parse_int(key, value, line_no)? as u32;
                        saw_agents = true;
                    }
                    "dims" => config.dims = parse_int(key, value, line_no)? as usize,
                    "anchors" => config.anchors = parse_int(key, value, line_no)? as usize,
                    "hash_len" => config.hash_len = parse_int(key, value, line_no)? as usize,
                    "initial_balance" => config.initial_balance = parse_float(key, value, line_no)?,
                    _ => return unknown(key, line_no),
                },
                "mutation" => match key {
                    "substitution_rate" => {
                        config.mutation.substitution_rate = parse_float(key, value, line_no)?
                    }
                    "insertion_rate" => {
                        config.mutation.insertion_rate = parse_float(key, value, line_no)?
                    }
                    "deletion_rate" => {
                        config.mutation.deletion_rate = parse_float(key, value, line_no)?
                    }
                    "anchor_jitter_sd" => {
                        config.mutation.anchor_jitter_sd = parse_float(key, value, line_no)?
                    }
                    "flexibility_jitter_sd" => {
                        config.mutation.flexibility_jitter_sd = parse_float(key, value, line_no)?
                    }
                    _ => return unknown(key, line_no),
                },
                "social" => match key {
                    "familiarity_threshold" => {
                        config.familiarity_threshold = parse_float(key, value, line_no)?
                    }
                    "alpha_tolerance" => config.alpha_tolerance = parse_float(key, value, line_no)?,
                    "mobility_step" => config.mobility_step = parse_float(key, value, line_no)?,
                    _ => return unknown(key, line_no),
                },
                "feedback" => match key {
                    "band_lo" => config.feedback.band_lo = parse_float(key, value, line_no)?,
                    "band_hi" => config.feedback.band_hi = parse_float(key, value, line_no)?,
                    "delta" => config.feedback.delta = parse_float(key, value, line_no)?,
                    "relink_after" => {
                        config.feedback.relink_after = parse_int(key, value, line_no)? as u32
                    }
                    _ => return unknown(key, line_no),
                },
                "analysis" => match key {
                    "fold_threshold" => config.fold_threshold = parse_float(key, value, line_no)?,
                    "variance_ratio" => config.variance_ratio = parse_float(key, value, line_no)?,
                    "outlier_k" => config.outlier_k = parse_float(key, value, line_no)?,
                    "bubble_window" => config.bubble_window = parse_int(key, value, line_no)?,
                    "gain_floor" => config.gain_floor = parse_float(key, value, line_no)?,
                    _ => return unknown(key, line_no),
                },
                "objects" => {
                    let spec = parse_object_entry(key, value, line_no)?;
                    config.objects.push(spec);
                }
                "ensembles" => {
                    let spec = parse_ensemble_entry(key, value, line_no)?;
                    config.ensembles.push(spec);
                }
                "clusters" => {
                    let spec = parse_cluster_entry(key, value, line_no)?;
                    config.clusters.push(spec);
                }
                _ => unreachable!("section names are validated"),
            }
        }

        if !saw_agents {
            return Err(ConfigError::Domain {
                key: "population.agents".into(),
                msg: "required".into(),
            });
        }
        if !saw_ticks {
            return Err(ConfigError::Domain {
                key: "simulation.ticks".into(),
                msg: "required".into(),
            });
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let domain = |key: &str, msg: &str| {
            Err(ConfigError::Domain {
                key: key.into(),
                msg: msg.into(),
            })
        };
        if self.agents < 2 {
            return domain("population.agents", "need at least 2 agents");
        }
        if self.ticks < 1 {
            return domain("simulation.ticks", "need at least 1 tick");
        }
        if self.dims < 1 || self.anchors < 1 || self.hash_len < 1 {
            return domain("population", "dims, anchors and hash_len must be >= 1");
        }
        if self.compositional_every < 1 {
            return domain("simulation.compositional_every", "must be >= 1");
        }
        if self.snapshot_every < 1 {
            return domain("simulation.snapshot_every", "must be >= 1");
        }
        if !self.initial_balance.is_finite() || self.initial_balance < 0.0 {
            return domain("population.initial_balance", "must be finite and >= 0");
        }
        if let Err(e) = self.mutation.validate() {
            return domain("mutation", &e.to_string());
        }
        if !(0.0..=1.0).contains(&self.familiarity_threshold) {
            return domain("social.familiarity_threshold", "must be in [0,1]");
        }
        if !self.alpha_tolerance.is_finite() || self.alpha_tolerance < 0.0 {
            return domain("social.alpha_tolerance", "must be >= 0");
        }
        if !(self.mobility_step > 0.0 && self.mobility_step <= 1.0) {
            return domain("social.mobility_step", "must be in (0,1]");
        }
        let fb = &self.feedback;
        if !(0.0 <= fb.band_lo && fb.band_lo <= fb.band_hi && fb.band_hi <= 1.0) {
            return domain("feedback.band", "need 0 <= band_lo <= band_hi <= 1");
        }
        if !(fb.delta > 0.0 && fb.delta < 1.0) {
            return domain("feedback.delta", "must be in (0,1)");
        }
        if fb.relink_after < 1 {
            return domain("feedback.relink_after", "must be >= 1");
        }
        if self.fold_threshold < 1.0 {
            return domain("analysis.fold_threshold", "must be >= 1");
        }
        if self.variance_ratio < 1.0 {
            return domain("analysis.variance_ratio", "must be >= 1");
        }
        if self.outlier_k <= 0.0 {
            return domain("analysis.outlier_k", "must be > 0");
        }
        if self.bubble_window < 1 {
            return domain("analysis.bubble_window", "must be >= 1");
        }
        if !self.gain_floor.is_finite() {
            return domain("analysis.gain_floor", "must be finite");
        }

        let mut ids = std::collections::BTreeSet::new();
        for obj in &self.objects {
            if !ids.insert(obj.id.as_str()) {
                return domain("objects", &format!("duplicate id '{}'", obj.id));
            }
            if !(obj.base_value.is_finite() && obj.base_value > 0.0) {
                return domain("objects", &format!("'{}': base value must be > 0", obj.id));
            }
            if obj.coords.len() != self.dims {
                return domain(
                    "objects",
                    &format!("'{}': expected {} coordinates", obj.id, self.dims),
                );
            }
            if let Some(owner) = obj.owner {
                if owner >= self.agents {
                    return domain("objects", &format!("'{}': owner out of range", obj.id));
                }
            }
        }
        for ens in &self.ensembles {
            if !ids.insert(ens.id.as_str()) {
                return domain("ensembles", &format!("duplicate id '{}'", ens.id));
            }
            if ens.members.len() < 2 {
                return domain("ensembles", &format!("'{}': need >= 2 members", ens.id));
            }
            let mut seen = std::collections::BTreeSet::new();
            for m in &ens.members {
                if !self.objects.iter().any(|o| &o.id == m) {
                    return domain("ensembles", &format!("'{}': unknown member '{m}'", ens.id));
                }
                if !seen.insert(m.as_str()) {
                    return domain(
                        "ensembles",
                        &format!("'{}': duplicate member '{m}'", ens.id),
                    );
                }
            }
            if !(ens.linkage_factor.is_finite() && ens.linkage_factor > 0.0) {
                return domain("ensembles", &format!("'{}': linkage must be > 0", ens.id));
            }
            if let Some(op) = ens.operator {
                if op >= self.agents {
                    return domain("ensembles", &format!("'{}': operator out of range", ens.id));
                }
            }
        }
        if !self.clusters.is_empty() {
            let total: u32 = self.clusters.iter().map(|c| c.count).sum();
            if total != self.agents {
                return domain(
                    "clusters",
                    &format!("cluster counts sum to {total}, agents = {}", self.agents),
                );
            }
            for c in &self.clusters {
                if c.count < 1 {
                    return domain("clusters", &format!("'{}': count must be >= 1", c.label));
                }
                if !(c.spread.is_finite() && c.spread >= 0.0) {
                    return domain("clusters", &format!("'{}': spread must be >= 0", c.label));
                }
                if c.center.len() != self.dims {
                    return domain(
                        "clusters",
                        &format!("'{}': expected {} center coordinates", c.label, self.dims),
                    );
                }
                if c.center.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                    return domain(
                        "clusters",
                        &format!("'{}': center must be in [0,1]", c.label),
                    );
                }
            }
        }
        Ok(())
    }

    /// Canonical text form: fixed section and key order, full precision.
    /// Parsing it back yields an equal config, and its bytes are what the
    /// trace header hashes and embeds.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[simulation]");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "ticks = {}", self.ticks);
        let _ = writeln!(s, "compositional_every = {}", self.compositional_every);
        let _ = writeln!(s, "snapshot_every = {}", self.snapshot_every);
        let _ = writeln!(s, "allow_mint = {}", self.allow_mint);
        let _ = writeln!(s, "out_dir = {}", self.out_dir);
        let _ = writeln!(s, "\n[population]");
        let _ = writeln!(s, "agents = {}", self.agents);
        let _ = writeln!(s, "dims = {}", self.dims);
        let _ = writeln!(s, "anchors = {}", self.anchors);
        let _ = writeln!(s, "hash_len = {}", self.hash_len);
        let _ = writeln!(s, "initial_balance = {}", self.initial_balance);
        let _ = writeln!(s, "\n[mutation]");
        let _ = writeln!(s, "substitution_rate = {}", self.mutation.substitution_rate);
        let _ = writeln!(s, "insertion_rate = {}", self.mutation.insertion_rate);
        let _ = writeln!(s, "deletion_rate = {}", self.mutation.deletion_rate);
        let _ = writeln!(s, "anchor_jitter_sd = {}", self.mutation.anchor_jitter_sd);
        let _ = writeln!(
            s,
            "flexibility_jitter_sd = {}",
            self.mutation.flexibility_jitter_sd
        );
        let _ = writeln!(s, "\n[social]");
        let _ = writeln!(s, "familiarity_threshold = {}", self.familiarity_threshold);
        let _ = writeln!(s, "alpha_tolerance = {}", self.alpha_tolerance);
        let _ = writeln!(s, "mobility_step = {}", self.mobility_step);
        let _ = writeln!(s, "\n[feedback]");
        let _ = writeln!(s, "band_lo = {}", self.feedback.band_lo);
        let _ = writeln!(s, "band_hi = {}", self.feedback.band_hi);
        let _ = writeln!(s, "delta = {}", self.feedback.delta);
        let _ = writeln!(s, "relink_after = {}", self.feedback.relink_after);
        let _ = writeln!(s, "\n[analysis]");
        let _ = writeln!(s, "fold_threshold = {}", self.fold_threshold);
        let _ = writeln!(s, "variance_ratio = {}", self.variance_ratio);
        let _ = writeln!(s, "outlier_k = {}", self.outlier_k);
        let _ = writeln!(s, "bubble_window = {}", self.bubble_window);
        let _ = writeln!(s, "gain_floor = {}", self.gain_floor);
        if !self.objects.is_empty() {
            let _ = writeln!(s, "\n[objects]");
            for o in &self.objects {
                let _ = write!(s, "{} = {} @", o.id, o.base_value);
                for c in &o.coords {
                    let _ = write!(s, " {c}");
                }
                if let Some(owner) = o.owner {
                    let _ = write!(s, " @ owner={owner}");
                }
                let _ = writeln!(s);
            }
        }
        if !self.ensembles.is_empty() {
            let _ = writeln!(s, "\n[ensembles]");
            for e in &self.ensembles {
                let _ = write!(
                    s,
                    "{} = {} @ {}",
                    e.id,
                    e.linkage_factor,
                    e.members.join(" ")
                );
                if let Some(op) = e.operator {
                    let _ = write!(s, " @ operator={op}");
                }
                let _ = writeln!(s);
            }
        }
        if !self.clusters.is_empty() {
            let _ = writeln!(s, "\n[clusters]");
            for c in &self.clusters {
                let _ = write!(s, "{} = {} {} @", c.label, c.count, c.spread);
                for x in &c.center {
                    let _ = write!(s, " {x}");
                }
                let _ = writeln!(s);
            }
        }
        s
    }

    /// Scaffold with defaults and a small demonstration catalog.
    pub fn template_text() -> String {
        let mut c = Config::baseline();
        c.agents = 20;
        c.ticks = 100;
        c.objects = vec![
            ObjectSpec {
                id: "apple".into(),
                base_value: 100.0,
                coords: vec![0.35, 0.35],
                owner: None,
            },
            ObjectSpec {
                id: "pear".into(),
                base_value: 80.0,
                coords: vec![0.6, 0.55],
                owner: None,
            },
            ObjectSpec {
                id: "plum".into(),
                base_value: 60.0,
                coords: vec![0.45, 0.65],
                owner: None,
            },
        ];
        c.ensembles = vec![EnsembleSpec {
            id: "basket".into(),
            linkage_factor: 1.2,
            members: vec!["apple".into(), "pear".into(), "plum".into()],
            operator: None,
        }];
        c.to_text()
    }
}

fn unknown<T>(key: &str, line: usize) -> Result<T, ConfigError> {
    Err(ConfigError::UnknownKey {
        line,
        key: key.to_string(),
    })
}

fn parse_int(key: &str, value: &str, line: usize) -> Result<u64, ConfigError> {
    value.parse::<u64>().map_err(|_| ConfigError::Syntax {
        line,
        msg: format!("{key}: expected a non-negative integer, got '{value}'"),
    })
}

fn parse_float(key: &str, value: &str, line: usize) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|_| ConfigError::Syntax {
        line,
        msg: format!("{key}: expected a number, got '{value}'"),
    })
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ConfigError::Syntax {
            line,
            msg: format!("{key}: expected true or false, got '{value}'"),
        }),
    }
}

fn check_id(id: &str, line: usize) -> Result<(), ConfigError> {
    let ok = !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Syntax {
            line,
            msg: format!("id '{id}' must match [a-z0-9_]+"),
        })
    }
}

fn parse_object_entry(id: &str, value: &str, line: usize) -> Result<ObjectSpec, ConfigError> {
    check_id(id, line)?;
    let segments: Vec<&str> = value.split('@').map(str::trim).collect();
    if segments.len() < 2 || segments.len() > 3 {
        return Err(ConfigError::Syntax {
            line,
            msg: "object entry needs 'base_value @ coords [@ owner=ID]'".into(),
        });
    }
    let base_value = parse_float("base_value", segments[0], line)?;
    let coords = segments[1]
        .split_whitespace()
        .map(|t| parse_float("coordinate", t, line))
        .collect::<Result<Vec<f64>, _>>()?;
    let owner = if segments.len() == 3 {
        let tail = segments[2]
            .strip_prefix("owner=")
            .ok_or(ConfigError::Syntax {
                line,
                msg: "expected 'owner=ID'".into(),
            })?;
        Some(parse_int("owner", tail, line)? as u32)
    } else {
        None
    };
    Ok(ObjectSpec {
        id: id.to_string(),
        base_value,
        coords,
        owner,
    })
}

fn parse_ensemble_entry(id: &str, value: &str, line: usize) -> Result<EnsembleSpec, ConfigError> {
    check_id(id, line)?;
    let segments: Vec<&str> = value.split('@').map(str::trim).collect();
    if segments.len() < 2 || segments.len() > 3 {
        return Err(ConfigError::Syntax {
            line,
            msg: "ensemble entry needs 'linkage @ members [@ operator=ID]'".into(),
        });
    }
    let linkage_factor = parse_float("linkage", segments[0], line)?;
    let members: Vec<String> = segments[1]
        .split_whitespace()
        .map(|s| s.to_string())
        .collect();
    let operator = if segments.len() == 3 {
        let tail = segments[2]
            .strip_prefix("operator=")
            .ok_or(ConfigError::Syntax {
                line,
                msg: "expected 'operator=ID'".into(),
            })?;
        Some(parse_int("operator", tail, line)? as u32)
    } else {
        None
    };
    Ok(EnsembleSpec {
        id: id.to_string(),
        linkage_factor,
        members,
        operator,
    })
}

fn parse_cluster_entry(label: &str, value: &str, line: usize) -> Result<ClusterSpec, ConfigError> {
    check_id(label, line)?;
    let segments: Vec<&str> = value.split('@').map(str::trim).collect();
    if segments.len() != 2 {
        return Err(ConfigError::Syntax {
            line,
            msg: "cluster entry needs 'count spread @ center coords'".into(),
        });
    }
    let head: Vec<&str> = segments[0].split_whitespace().collect();
    if head.len() != 2 {
        return Err(ConfigError::Syntax {
            line,
            msg: "cluster entry needs 'count spread' before '@'".into(),
        });
    }
    let count = parse_int("count", head[0], line)? as u32;
    let spread = parse_float("spread", head[1], line)?;
    let center = segments[1]
        .split_whitespace()
        .map(|t| parse_float("center coordinate", t, line))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(ClusterSpec {
        label: label.to_string(),
        count,
        spread,
        center,
    })
}
