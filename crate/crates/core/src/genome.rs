//! Genotypic representation of an agent.
//!
//! A genome has three segments: structural genes (per-dimension extents plus
//! anchor coordinates, all reals in `[0,1]`), an endogenous alphabetic hash
//! string over `a..z`, and a single mental-flexibility scalar in `[0,1]`.
//! Genomes are immutable values; every operation returns a new genome and is
//! a pure function of its inputs (including the seed).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GenomeError {
    #[error(
        "genome sizes must be at least 1 (dims={dims}, anchors={anchors}, hash_len={hash_len})"
    )]
    ZeroSize {
        dims: usize,
        anchors: usize,
        hash_len: usize,
    },
    #[error("structural gene {index} = {value} is outside [0,1]")]
    StructuralOutOfRange { index: usize, value: f64 },
    #[error("structural segment length {len} does not decompose into {dims} extents plus anchors")]
    BadStructuralLength { len: usize, dims: usize },
    #[error("hash segment must be non-empty and contain only a-z")]
    BadHashSegment,
    #[error("flexibility {0} is outside [0,1]")]
    FlexibilityOutOfRange(f64),
    #[error("mutation rate {name} = {value} is invalid")]
    BadMutationRate { name: &'static str, value: f64 },
}

/// Three-segment genome. The structural segment stores `dims` extents
/// followed by the anchor coordinates, flattened anchor-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Genome {
    dims: usize,
    structural_genes: Vec<f64>,
    hash_genes: String,
    flexibility: f64,
}

impl Genome {
    /// Builds a genome from raw segments, validating every invariant.
    pub fn from_parts(
        dims: usize,
        structural_genes: Vec<f64>,
        hash_genes: String,
        flexibility: f64,
    ) -> Result<Self, GenomeError> {
        if dims == 0 {
            return Err(GenomeError::ZeroSize {
                dims,
                anchors: 0,
                hash_len: hash_genes.len(),
            });
        }
        let len = structural_genes.len();
        if len <= dims || !(len - dims).is_multiple_of(dims) {
            return Err(GenomeError::BadStructuralLength { len, dims });
        }
        for (index, &value) in structural_genes.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(GenomeError::StructuralOutOfRange { index, value });
            }
        }
        if hash_genes.is_empty() || !hash_genes.bytes().all(|b| b.is_ascii_lowercase()) {
            return Err(GenomeError::BadHashSegment);
        }
        if !(0.0..=1.0).contains(&flexibility) {
            return Err(GenomeError::FlexibilityOutOfRange(flexibility));
        }
        Ok(Genome {
            dims,
            structural_genes,
            hash_genes,
            flexibility,
        })
    }

    /// Draws a random genome. Identical arguments always yield an identical
    /// genome: all draws come from a ChaCha stream seeded with `seed`.
    pub fn random(
        seed: u64,
        dims: usize,
        n_anchors: usize,
        hash_len: usize,
    ) -> Result<Self, GenomeError> {
        if dims == 0 || n_anchors == 0 || hash_len == 0 {
            return Err(GenomeError::ZeroSize {
                dims,
                anchors: n_anchors,
                hash_len,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_structural = dims + n_anchors * dims;
        let structural_genes: Vec<f64> = (0..n_structural).map(|_| rng.gen::<f64>()).collect();
        let hash_genes: String = (0..hash_len).map(|_| random_hash_char(&mut rng)).collect();
        let flexibility = rng.gen::<f64>();
        Ok(Genome {
            dims,
            structural_genes,
            hash_genes,
            flexibility,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn n_anchors(&self) -> usize {
        (self.structural_genes.len() - self.dims) / self.dims
    }

    /// Per-dimension extent genes.
    pub fn extents(&self) -> &[f64] {
        &self.structural_genes[..self.dims]
    }

    /// Anchor points, each of length `dims`.
    pub fn anchors(&self) -> impl Iterator<Item = &[f64]> {
        self.structural_genes[self.dims..].chunks_exact(self.dims)
    }

    /// Mean of the anchor points.
    pub fn anchor_centroid(&self) -> Vec<f64> {
        let mut centroid = vec![0.0; self.dims];
        let n = self.n_anchors() as f64;
        for anchor in self.anchors() {
            for (c, &a) in centroid.iter_mut().zip(anchor) {
                *c += a / n;
            }
        }
        centroid
    }

    pub fn structural_genes(&self) -> &[f64] {
        &self.structural_genes
    }

    pub fn hash_genes(&self) -> &str {
        &self.hash_genes
    }

    pub fn flexibility(&self) -> f64 {
        self.flexibility
    }

    /// Stochastic mutation. Returns a new genome; `self` is untouched.
    ///
    /// Draw order is fixed so seeded runs can be replayed: one normal draw
    /// per anchor coordinate (scaled by `anchor_jitter_sd`, clamped to
    /// `[0,1]`), one normal draw for flexibility, then a single left-to-right
    /// pass over the hash segment. The hash pass draws one uniform per
    /// insertion gap (before each character and after the last), one uniform
    /// deletion check per character, and one uniform substitution check per
    /// surviving character; an event that fires draws one extra character.
    /// Insertions and deletions shift every downstream character, which is
    /// what makes the accepted-value set frame-shift.
    pub fn mutated(&self, rates: &MutationRates, seed: u64) -> Genome {
        debug_assert!(rates.validate().is_ok());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut structural_genes = self.structural_genes.clone();
        for gene in structural_genes[self.dims..].iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *gene = (*gene + z * rates.anchor_jitter_sd).clamp(0.0, 1.0);
        }
        let z: f64 = rng.sample(StandardNormal);
        let flexibility = (self.flexibility + z * rates.flexibility_jitter_sd).clamp(0.0, 1.0);

        let mut hash_genes = String::with_capacity(self.hash_genes.len() + 4);
        for ch in self.hash_genes.chars() {
            if rng.gen::<f64>() < rates.insertion_rate {
                hash_genes.push(random_hash_char(&mut rng));
            }
            if rng.gen::<f64>() < rates.deletion_rate {
                continue;
            }
            if rng.gen::<f64>() < rates.substitution_rate {
                hash_genes.push(random_hash_char(&mut rng));
            } else {
                hash_genes.push(ch);
            }
        }
        if rng.gen::<f64>() < rates.insertion_rate {
            hash_genes.push(random_hash_char(&mut rng));
        }
        // The hash segment may never go empty; keep the leading character.
        if hash_genes.is_empty() {
            hash_genes.push(self.hash_genes.chars().next().expect("non-empty hash"));
        }

        Genome {
            dims: self.dims,
            structural_genes,
            hash_genes,
            flexibility,
        }
    }

    /// Deterministic single-character insertion at `index` (0..=len).
    pub fn insert_hash_char(&self, index: usize, ch: char) -> Genome {
        assert!(ch.is_ascii_lowercase(), "hash characters are a-z");
        assert!(index <= self.hash_genes.len(), "index out of bounds");
        let mut out = self.clone();
        out.hash_genes.insert(index, ch);
        out
    }

    /// Deterministic single-character deletion at `index`. The segment must
    /// keep at least one character.
    pub fn delete_hash_char(&self, index: usize) -> Genome {
        assert!(index < self.hash_genes.len(), "index out of bounds");
        assert!(self.hash_genes.len() > 1, "hash segment may not go empty");
        let mut out = self.clone();
        out.hash_genes.remove(index);
        out
    }

    /// Deterministic single-character substitution at `index`.
    pub fn substitute_hash_char(&self, index: usize, ch: char) -> Genome {
        assert!(ch.is_ascii_lowercase(), "hash characters are a-z");
        assert!(index < self.hash_genes.len(), "index out of bounds");
        let mut out = self.clone();
        out.hash_genes
            .replace_range(index..index + 1, &ch.to_string());
        out
    }
}

/// Returns `target` with its hash segment replaced by `source`'s. Structural
/// and flexibility genes are untouched.
pub fn copy_hash_segment(source: &Genome, target: &Genome) -> Genome {
    let mut out = target.clone();
    out.hash_genes = source.hash_genes.clone();
    out
}

/// Per-character mutation probabilities and jitter widths.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MutationRates {
    pub substitution_rate: f64,
    pub insertion_rate: f64,
    pub deletion_rate: f64,
    pub anchor_jitter_sd: f64,
    pub flexibility_jitter_sd: f64,
}

impl MutationRates {
    pub fn is_zero(&self) -> bool {
        self.substitution_rate == 0.0
            && self.insertion_rate == 0.0
            && self.deletion_rate == 0.0
            && self.anchor_jitter_sd == 0.0
            && self.flexibility_jitter_sd == 0.0
    }

    pub fn validate(&self) -> Result<(), GenomeError> {
        let probs = [
            ("substitution_rate", self.substitution_rate),
            ("insertion_rate", self.insertion_rate),
            ("deletion_rate", self.deletion_rate),
        ];
        for (name, value) in probs {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(GenomeError::BadMutationRate { name, value });
            }
        }
        let sds = [
            ("anchor_jitter_sd", self.anchor_jitter_sd),
            ("flexibility_jitter_sd", self.flexibility_jitter_sd),
        ];
        for (name, value) in sds {
            if !value.is_finite() || value < 0.0 {
                return Err(GenomeError::BadMutationRate { name, value });
            }
        }
        Ok(())
    }
}

fn random_hash_char<R: Rng>(rng: &mut R) -> char {
    (b'a' + rng.gen_range(0..26u8)) as char
}
