//! Per-user decode evaluation.
//!
//! Threshold mode compares the instantaneous sub-band SINR of every TTI with
//! the link-curve threshold of the layer. Symbol mode pushes random symbols
//! through the composite constellation of the serving cells and counts block
//! errors per layer, with interference and noise folded into one Gaussian term.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::hqam::{HqamGeometry, LayeredBits};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Base and enhancement layer.
    Hd,
    /// Base layer only.
    Sd,
    Outage,
}

impl Outcome {
    pub fn layered(bl: bool, el: bool) -> Self {
        match (bl, el) {
            (true, true) => Outcome::Hd,
            (true, false) => Outcome::Sd,
            // An enhancement layer without its base layer is useless.
            (false, _) => Outcome::Outage,
        }
    }
}

/// Failure counts of one layer over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LayerTally {
    pub failed: u32,
    pub total: u32,
}

impl LayerTally {
    pub fn record(&mut self, failed: u32, total: u32) {
        self.failed += failed;
        self.total += total;
    }

    /// Received when the failure rate stays within the BLER target.
    pub fn received(&self, target_bler: f64) -> bool {
        self.total > 0 && self.failed as f64 <= (target_bler * self.total as f64).floor()
    }
}

/// Layer decision of threshold mode for a whole run of per-TTI SINR values.
pub fn threshold_layer_received(sinr_db: &[f64], threshold_db: f64, target_bler: f64) -> bool {
    let mut t = LayerTally::default();
    for &s in sinr_db {
        t.record((s < threshold_db) as u32, 1);
    }
    t.received(target_bler)
}

fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// Block-error simulator for a composite constellation.
#[derive(Debug, Clone)]
pub struct SymbolEvaluator {
    rng: ChaCha8Rng,
    symbols_per_block: usize,
    blocks_per_tti: usize,
    correctable: usize,
    points: Vec<[Complex64; 16]>,
    /// Failures past which a layer is lost for the run and no longer simulated.
    budget: u32,
    pub hp: LayerTally,
    pub lp: LayerTally,
}

impl SymbolEvaluator {
    /// Union-bound error probability per TTI below which a layer is declared error free.
    pub const SKIP_BOUND: f64 = 1e-7;

    pub fn new(rng: ChaCha8Rng, symbols_per_tti: usize, block_bits: usize, correctable: usize) -> Self {
        let symbols_per_block = block_bits.div_ceil(2).max(1);
        SymbolEvaluator {
            rng,
            symbols_per_block,
            blocks_per_tti: (symbols_per_tti / symbols_per_block).max(1),
            correctable,
            points: Vec::new(),
            budget: u32::MAX,
            hp: LayerTally::default(),
            lp: LayerTally::default(),
        }
    }

    /// Stops simulating a layer once it failed more than `max_failures` blocks.
    pub fn with_failure_budget(mut self, max_failures: u32) -> Self {
        self.budget = max_failures;
        self
    }

    pub fn blocks_per_tti(&self) -> usize {
        self.blocks_per_tti
    }

    /// One TTI. `responses[k][f]` is the complex gain of transmitter `k` on
    /// subcarrier `f`, normalized so that interference plus noise has unit
    /// power; symbols are spread over the subcarriers in turn.
    pub fn tti(&mut self, geoms: &[HqamGeometry], responses: &[Vec<Complex64>]) {
        let blocks = self.blocks_per_tti as u32;
        let (hp_lost, lp_lost) = (self.hp.failed > self.budget, self.lp.failed > self.budget);
        if hp_lost && lp_lost {
            self.hp.record(0, blocks);
            self.lp.record(0, blocks);
            return;
        }
        let nf = responses.iter().map(|r| r.len()).min().unwrap_or(0).max(1);
        self.points.clear();
        let (mut d_hp, mut d_lp) = (f64::INFINITY, f64::INFINITY);
        for f in 0..nf {
            let mut pts = [Complex64::default(); 16];
            for (b, p) in pts.iter_mut().enumerate() {
                let bits = LayeredBits::from_index(b);
                *p = geoms
                    .iter()
                    .zip(responses)
                    .map(|(g, h)| h.get(f).copied().unwrap_or_default() * g.point(bits))
                    .sum();
            }
            for a in 0..16 {
                for b in (a + 1)..16 {
                    let d = (pts[a] - pts[b]).norm();
                    if a >> 2 != b >> 2 {
                        d_hp = d_hp.min(d);
                    }
                    if a & 3 != b & 3 {
                        d_lp = d_lp.min(d);
                    }
                }
            }
            self.points.push(pts);
        }
        // A block fails only with more than `correctable` layer-bit errors,
        // so at least k = correctable/2 + 1 symbol errors. Union bound over
        // k-subsets of the block with the per-symbol union bound 15·Q(d/√2)
        // (unit noise power, per-dimension variance 1/2).
        let n = self.symbols_per_block;
        let k = self.correctable / 2 + 1;
        let log_subsets = ln_binomial(n, k);
        let blocks_f = self.blocks_per_tti as f64;
        let skip = |d: f64| {
            let p = (15.0 * q_function(d / std::f64::consts::SQRT_2)).min(1.0);
            k <= n && blocks_f.ln() + log_subsets + k as f64 * p.ln() < Self::SKIP_BOUND.ln()
        };
        let (skip_hp, skip_lp) = (hp_lost || skip(d_hp), lp_lost || skip(d_lp));
        if skip_hp && skip_lp {
            self.hp.record(0, blocks);
            self.lp.record(0, blocks);
            return;
        }
        let (mut hp_failed, mut lp_failed) = (0, 0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let points = std::mem::take(&mut self.points);
        let mut f = 0;
        for _ in 0..self.blocks_per_tti {
            let (mut e_hp, mut e_lp) = (0usize, 0usize);
            for _ in 0..self.symbols_per_block {
                let pts = &points[f];
                f = (f + 1) % nf;
                let b: usize = self.rng.random_range(0..16);
                let re: f64 = self.rng.sample(StandardNormal);
                let im: f64 = self.rng.sample(StandardNormal);
                let y = pts[b] + Complex64::new(re * s, im * s);
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (k, p) in pts.iter().enumerate() {
                    let d = (y - p).norm_sqr();
                    if d < best_d {
                        best_d = d;
                        best = k;
                    }
                }
                e_hp += ((b >> 2) ^ (best >> 2)).count_ones() as usize;
                e_lp += ((b & 3) ^ (best & 3)).count_ones() as usize;
                if (skip_hp || e_hp > self.correctable) && (skip_lp || e_lp > self.correctable) {
                    break;
                }
            }
            hp_failed += (!skip_hp && e_hp > self.correctable) as u32;
            lp_failed += (!skip_lp && e_lp > self.correctable) as u32;
        }
        self.points = points;
        self.hp.record(hp_failed, blocks);
        self.lp.record(lp_failed, blocks);
    }
}
