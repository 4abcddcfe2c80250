//! Scalable geometric soft classifier.
//!
//! A kernel is an axis-aligned box in concept space with interior anchor
//! points. It classifies a stimulus softly: zero outside the box, and inside
//! the box a score that falls off linearly with the distance to the nearest
//! anchor. Novel stimuli outside the box never reshape the anchors; instead
//! the box dilates towards them, and the per-dimension dilation history is
//! kept in the `alpha` factors.

use crate::genome::Genome;

/// Minimum per-dimension extent; degenerate extent genes are widened to this.
pub const MIN_EXTENT: f64 = 1e-3;

/// Scores of contained stimuli are floored at this value so containment is
/// always visible in the score, even at the most distant corner of the box.
const INTERIOR_FLOOR: f64 = 1e-12;

/// A point in concept space.
#[derive(Debug, Clone, PartialEq)]
pub struct Stimulus {
    pub coords: Vec<f64>,
}

impl Stimulus {
    pub fn new(coords: Vec<f64>) -> Self {
        assert!(
            coords.iter().all(|c| c.is_finite()),
            "coordinates must be finite"
        );
        Stimulus { coords }
    }

    pub fn dims(&self) -> usize {
        self.coords.len()
    }
}

/// Axis-aligned soft-classifier kernel.
///
/// Invariants: `lo[d] < hi[d]`, every anchor lies inside the closed box, and
/// `alpha[d] = (hi[d] - lo[d]) / original_extent[d] >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    lo: Vec<f64>,
    hi: Vec<f64>,
    anchors: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    base_extent: Vec<f64>,
}

impl Kernel {
    /// Derives a kernel from a genome: the box is the extent genes centered
    /// on the anchor centroid, anchors are the anchor genes clamped into the
    /// box, and all alpha factors start at 1.
    pub fn from_genome(genome: &Genome) -> Kernel {
        let dims = genome.dims();
        let centroid = genome.anchor_centroid();
        let mut lo = Vec::with_capacity(dims);
        let mut hi = Vec::with_capacity(dims);
        let mut base_extent = Vec::with_capacity(dims);
        for (&extent_gene, &center) in genome.extents().iter().zip(&centroid) {
            let extent = extent_gene.max(MIN_EXTENT);
            lo.push(center - extent / 2.0);
            hi.push(center + extent / 2.0);
            base_extent.push(extent);
        }
        let anchors = genome
            .anchors()
            .map(|a| {
                a.iter()
                    .enumerate()
                    .map(|(d, &c)| c.clamp(lo[d], hi[d]))
                    .collect()
            })
            .collect();
        Kernel {
            lo,
            hi,
            anchors,
            alpha: vec![1.0; dims],
            base_extent,
        }
    }

    /// Rebuilds a kernel from snapshot fields. The base extent is recovered
    /// from the alpha factors, so later rescales keep a consistent history.
    pub fn from_snapshot(
        lo: Vec<f64>,
        hi: Vec<f64>,
        anchors: Vec<Vec<f64>>,
        alpha: Vec<f64>,
    ) -> Kernel {
        assert_eq!(lo.len(), hi.len());
        assert_eq!(lo.len(), alpha.len());
        assert!(alpha.iter().all(|&a| a >= 1.0), "alpha factors are >= 1");
        let base_extent = lo
            .iter()
            .zip(&hi)
            .zip(&alpha)
            .map(|((l, h), a)| (h - l) / a)
            .collect();
        let mut kernel = Kernel::from_bounds(lo, hi, anchors);
        kernel.alpha = alpha;
        kernel.base_extent = base_extent;
        kernel
    }

    /// Builds a kernel directly from bounds and anchors (alpha starts at 1).
    /// Anchors are clamped into the box.
    pub fn from_bounds(lo: Vec<f64>, hi: Vec<f64>, anchors: Vec<Vec<f64>>) -> Kernel {
        assert_eq!(lo.len(), hi.len());
        assert!(!anchors.is_empty(), "kernel needs at least one anchor");
        assert!(
            lo.iter().zip(&hi).all(|(l, h)| l < h),
            "lo must be below hi"
        );
        let dims = lo.len();
        let anchors = anchors
            .into_iter()
            .map(|a| {
                assert_eq!(a.len(), dims);
                a.iter()
                    .enumerate()
                    .map(|(d, &c)| c.clamp(lo[d], hi[d]))
                    .collect()
            })
            .collect();
        let base_extent = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
        Kernel {
            lo,
            hi,
            anchors,
            alpha: vec![1.0; dims],
            base_extent,
        }
    }

    pub fn dims(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn anchors(&self) -> &[Vec<f64>] {
        &self.anchors
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn extent(&self, d: usize) -> f64 {
        self.hi[d] - self.lo[d]
    }

    pub fn contains(&self, stimulus: &Stimulus) -> bool {
        assert_eq!(stimulus.dims(), self.dims(), "dimension mismatch");
        stimulus
            .coords
            .iter()
            .enumerate()
            .all(|(d, &c)| c >= self.lo[d] && c <= self.hi[d])
    }

    /// Soft classification score in `[0,1]`: 0 outside the box, 1 exactly on
    /// an anchor, and `1 - d/D` inside, where `d` is the Euclidean distance
    /// to the nearest anchor and `D` the largest anchor-to-corner distance.
    pub fn classify(&self, stimulus: &Stimulus) -> f64 {
        if !self.contains(stimulus) {
            return 0.0;
        }
        let nearest = self
            .anchors
            .iter()
            .map(|a| euclidean(a, &stimulus.coords))
            .fold(f64::INFINITY, f64::min);
        if nearest == 0.0 {
            return 1.0;
        }
        let dmax = self.max_anchor_corner_distance();
        (1.0 - nearest / dmax).max(INTERIOR_FLOOR)
    }

    /// Largest distance from any anchor to any corner of the box; the
    /// normalizer that keeps interior scores in `(0,1]`.
    pub fn max_anchor_corner_distance(&self) -> f64 {
        self.anchors
            .iter()
            .map(|a| {
                // The farthest corner from a point picks, per dimension,
                // whichever bound is farther.
                a.iter()
                    .enumerate()
                    .map(|(d, &c)| {
                        let span = (c - self.lo[d]).max(self.hi[d] - c);
                        span * span
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Dilates the box so an overshooting stimulus becomes contained, with a
    /// margin of `flexibility * overshoot` past it in each overshot
    /// dimension. Dimensions the stimulus does not overshoot are untouched;
    /// the box never shrinks. Returns the rescaled kernel.
    pub fn rescaled(&self, stimulus: &Stimulus, flexibility: f64) -> Kernel {
        assert_eq!(stimulus.dims(), self.dims(), "dimension mismatch");
        assert!((0.0..=1.0).contains(&flexibility), "flexibility in [0,1]");
        let mut out = self.clone();
        for (d, &c) in stimulus.coords.iter().enumerate() {
            if c > self.hi[d] {
                let overshoot = c - self.hi[d];
                out.hi[d] = c + flexibility * overshoot;
            } else if c < self.lo[d] {
                let overshoot = self.lo[d] - c;
                out.lo[d] = c - flexibility * overshoot;
            } else {
                continue;
            }
            out.alpha[d] = (out.hi[d] - out.lo[d]) / out.base_extent[d];
        }
        out
    }

    /// Largest per-dimension difference between two kernels' alpha factors.
    pub fn alpha_distance(&self, other: &Kernel) -> f64 {
        assert_eq!(self.dims(), other.dims(), "dimension mismatch");
        self.alpha
            .iter()
            .zip(&other.alpha)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
