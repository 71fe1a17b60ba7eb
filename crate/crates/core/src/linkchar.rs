//! Link-level Monte-Carlo characterization.
//!
//! Blocks of random symbols go through the hierarchical mapper, an AWGN or
//! flat Rayleigh channel and the ML detector. A block of one layer fails when
//! the configured block coder cannot correct the number of wrong bits of that
//! layer. The resulting BLER-vs-SNR curves are smoothed and the SNR at the
//! target BLER is extracted per (alpha, layer); the system-level engine uses
//! those thresholds as its link abstraction.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::hqam::{demap_ml, geometry_from_alpha, HmAlpha, LayeredBits};
use crate::rng::{substream, Stream};

pub const CACHE_FORMAT: &str = "lhs-linkcurves v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layer {
    Hp,
    Lp,
}

impl Layer {
    fn key(self) -> u64 {
        match self {
            Layer::Hp => 0,
            Layer::Lp => 1,
        }
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layer::Hp => "hp",
            Layer::Lp => "lp",
        })
    }
}

impl FromStr for Layer {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "hp" => Ok(Layer::Hp),
            "lp" => Ok(Layer::Lp),
            _ => Err(format!("expected hp or lp, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Awgn,
    /// Independent flat Rayleigh gain per symbol, known at the receiver.
    RayleighFlat,
}

impl ChannelKind {
    fn key(self) -> u64 {
        match self {
            ChannelKind::Awgn => 0,
            ChannelKind::RayleighFlat => 1,
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::RayleighFlat => "rayleigh_flat",
        })
    }
}

impl FromStr for ChannelKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "awgn" => Ok(ChannelKind::Awgn),
            "rayleigh_flat" | "rayleigh" => Ok(ChannelKind::RayleighFlat),
            _ => Err(format!("expected awgn or rayleigh_flat, got `{s}`")),
        }
    }
}

/// Decides whether a block with a given number of raw bit errors is recovered.
pub trait BlockCoder: Send + Sync + fmt::Debug {
    /// Stable identifier, part of the cache hash.
    fn name(&self) -> String;

    /// Largest number of raw bit errors in a block the decoder still corrects.
    fn correctable_errors(&self, block_bits: usize) -> usize;

    fn block_ok(&self, bit_errors: usize, block_bits: usize) -> bool {
        bit_errors <= self.correctable_errors(block_bits)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Uncoded;

impl BlockCoder for Uncoded {
    fn name(&self) -> String {
        "uncoded".into()
    }
    fn correctable_errors(&self, _block_bits: usize) -> usize {
        0
    }
}

/// Idealized bounded-distance decoder correcting up to `t` bit errors.
#[derive(Debug, Clone, Copy)]
pub struct BoundedDistance {
    pub t: usize,
}

impl BlockCoder for BoundedDistance {
    fn name(&self) -> String {
        format!("bdd:{}", self.t)
    }
    fn correctable_errors(&self, _block_bits: usize) -> usize {
        self.t
    }
}

/// Parses `uncoded` or `bdd:<t>`.
pub fn parse_coder(s: &str) -> std::result::Result<Box<dyn BlockCoder>, String> {
    if s == "uncoded" {
        return Ok(Box::new(Uncoded));
    }
    if let Some(t) = s.strip_prefix("bdd:") {
        let t = t.parse::<usize>().map_err(|e| format!("bad bdd strength: {e}"))?;
        return Ok(Box::new(BoundedDistance { t }));
    }
    Err(format!("expected uncoded or bdd:<t>, got `{s}`"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveSample {
    pub snr_db: f64,
    pub bler: f64,
    pub blocks: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkCurve {
    pub alpha: HmAlpha,
    pub layer: Layer,
    pub channel_kind: ChannelKind,
    pub block_bits: usize,
    pub samples: Vec<CurveSample>,
}

impl LinkCurve {
    /// BLER values after non-increasing isotonic regression weighted by block count.
    pub fn smoothed(&self) -> Vec<f64> {
        let values: Vec<f64> = self.samples.iter().map(|s| s.bler).collect();
        let weights: Vec<f64> = self.samples.iter().map(|s| s.blocks as f64).collect();
        isotonic_nonincreasing(&values, &weights)
    }
}

/// Pool-adjacent-violators fit of a non-increasing sequence.
pub fn isotonic_nonincreasing(values: &[f64], weights: &[f64]) -> Vec<f64> {
    // (mean, weight, count) blocks
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w.max(f64::MIN_POSITIVE), 1));
        while blocks.len() > 1 {
            let n = blocks.len();
            let (m2, w2, c2) = blocks[n - 1];
            let (m1, w1, c1) = blocks[n - 2];
            if m1 >= m2 {
                break;
            }
            let w = w1 + w2;
            blocks.truncate(n - 2);
            blocks.push(((m1 * w1 + m2 * w2) / w, w, c1 + c2));
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, _, c)| std::iter::repeat_n(m, c))
        .collect()
}

/// Parameters of one BLER curve simulation.
#[derive(Debug, Clone, Copy)]
pub struct CurveRequest<'a> {
    pub alpha: HmAlpha,
    pub layer: Layer,
    pub channel_kind: ChannelKind,
    pub snr_grid: &'a [f64],
    pub blocks_per_point: u64,
    pub block_bits: usize,
    pub coder: &'a dyn BlockCoder,
    pub seed: u64,
}

fn alpha_key(alpha: HmAlpha) -> u64 {
    (alpha.value() * 1e6).round() as u64
}

fn complex_normal<R: Rng>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

fn layer_errors(sent: LayeredBits, got: LayeredBits, layer: Layer) -> usize {
    match layer {
        Layer::Hp => (sent.hp() ^ got.hp()).count_ones() as usize,
        Layer::Lp => (sent.lp() ^ got.lp()).count_ones() as usize,
    }
}

pub fn simulate_bler_curve(req: &CurveRequest<'_>) -> Result<LinkCurve> {
    if req.snr_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if req.blocks_per_point < 100 {
        return Err(invalid("blocks_per_point", "must be at least 100"));
    }
    if req.block_bits < 2 {
        return Err(invalid("block_bits", "must be at least 2"));
    }
    if req.snr_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("snr_grid", "must be strictly increasing"));
    }
    if req.alpha.is_qpsk() && req.layer == Layer::Lp {
        return Err(invalid("layer", "QPSK mode carries no low-priority layer"));
    }
    let geom = geometry_from_alpha(req.alpha);
    let symbols_per_block = req.block_bits.div_ceil(2);
    let tolerated = req.coder.correctable_errors(req.block_bits);

    let samples = req
        .snr_grid
        .par_iter()
        .enumerate()
        .map(|(idx, &snr_db)| {
            let mut rng = substream(
                req.seed,
                Stream::LinkCurve,
                &[
                    alpha_key(req.alpha),
                    req.layer.key(),
                    req.channel_kind.key(),
                    idx as u64,
                ],
            );
            let noise_var = 10f64.powf(-snr_db / 10.0);
            let mut failed = 0u64;
            for _ in 0..req.blocks_per_point {
                let mut errors = 0usize;
                for _ in 0..symbols_per_block {
                    let bits = LayeredBits::from_index(rng.random_range(0..16));
                    let h = match req.channel_kind {
                        ChannelKind::Awgn => Complex64::new(1.0, 0.0),
                        ChannelKind::RayleighFlat => complex_normal(&mut rng, 1.0),
                    };
                    let y = h * geom.point(bits) + complex_normal(&mut rng, noise_var);
                    // h is drawn from a continuous law, so it is never exactly zero.
                    let got = demap_ml(y, &geom, h).expect("nonzero gain");
                    errors += layer_errors(bits, got, req.layer);
                    if errors > tolerated {
                        break;
                    }
                }
                if errors > tolerated {
                    failed += 1;
                }
            }
            CurveSample {
                snr_db,
                bler: failed as f64 / req.blocks_per_point as f64,
                blocks: req.blocks_per_point,
            }
        })
        .collect();

    Ok(LinkCurve {
        alpha: req.alpha,
        layer: req.layer,
        channel_kind: req.channel_kind,
        block_bits: req.block_bits,
        samples,
    })
}

/// SNR at which the smoothed curve crosses `target_bler`, interpolating
/// log10(BLER) linearly in dB between the bracketing samples.
pub fn threshold_at_target(curve: &LinkCurve, target_bler: f64) -> Result<f64> {
    let smooth = curve.smoothed();
    let (Some(&max), Some(&min)) = (smooth.first(), smooth.last()) else {
        return Err(Error::EmptyGrid);
    };
    if !(target_bler > 0.0) || target_bler > max || target_bler < min {
        return Err(Error::TargetOutOfRange {
            target: target_bler,
            min,
            max,
        });
    }
    let idx = smooth
        .iter()
        .position(|&b| b <= target_bler)
        .expect("target within range");
    if smooth[idx] == target_bler || idx == 0 {
        return Ok(curve.samples[idx].snr_db);
    }
    let floor = |i: usize| {
        let b = smooth[i];
        if b > 0.0 {
            b
        } else {
            0.5 / curve.samples[i].blocks as f64
        }
    };
    let (x0, x1) = (curve.samples[idx - 1].snr_db, curve.samples[idx].snr_db);
    let (y0, y1) = (floor(idx - 1).log10(), floor(idx).log10());
    let y = target_bler.log10();
    if y0 == y1 {
        return Ok(x1);
    }
    Ok(x0 + (y - y0) * (x1 - x0) / (y1 - y0))
}

/// Settings of the link characterization run.
#[derive(Debug)]
pub struct LinkCharConfig {
    pub alphas: Vec<f64>,
    pub awgn_grid: Vec<f64>,
    pub rayleigh_grid: Vec<f64>,
    pub blocks_per_point: u64,
    pub block_bits: usize,
    pub coder: Box<dyn BlockCoder>,
    pub seed: u64,
    pub target_bler: f64,
    /// Curves the system-level thresholds are read from.
    pub abstraction: ChannelKind,
}

impl Default for LinkCharConfig {
    fn default() -> Self {
        LinkCharConfig {
            alphas: vec![0.0, 0.1, 0.3, 0.5],
            awgn_grid: grid(-10.0, 46.0, 1.0),
            rayleigh_grid: grid(-4.0, 84.0, 2.0),
            blocks_per_point: 4000,
            block_bits: 256,
            coder: Box::new(BoundedDistance { t: 32 }),
            seed: 1,
            target_bler: 0.01,
            abstraction: ChannelKind::Awgn,
        }
    }
}

/// Inclusive arithmetic grid.
pub fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}

impl LinkCharConfig {
    /// Hash of everything that changes the simulated curves.
    pub fn hash(&self) -> String {
        let fmt_list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let canon = format!(
            "alphas={};awgn={};rayleigh={};blocks={};block_bits={};coder={};seed={}",
            fmt_list(&self.alphas),
            fmt_list(&self.awgn_grid),
            fmt_list(&self.rayleigh_grid),
            self.blocks_per_point,
            self.block_bits,
            self.coder.name(),
            self.seed
        );
        hex(&Sha256::digest(canon.as_bytes()))[..16].to_string()
    }

    fn grid_for(&self, kind: ChannelKind) -> &[f64] {
        match kind {
            ChannelKind::Awgn => &self.awgn_grid,
            ChannelKind::RayleighFlat => &self.rayleigh_grid,
        }
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Every simulated curve of a characterization run.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkTable {
    pub config_hash: String,
    pub curves: Vec<LinkCurve>,
}

impl LinkTable {
    pub fn simulate(cfg: &LinkCharConfig) -> Result<Self> {
        let mut curves = Vec::new();
        for kind in [ChannelKind::Awgn, ChannelKind::RayleighFlat] {
            for &a in &cfg.alphas {
                let alpha = HmAlpha::new(a)?;
                for layer in [Layer::Hp, Layer::Lp] {
                    if alpha.is_qpsk() && layer == Layer::Lp {
                        continue;
                    }
                    curves.push(simulate_bler_curve(&CurveRequest {
                        alpha,
                        layer,
                        channel_kind: kind,
                        snr_grid: cfg.grid_for(kind),
                        blocks_per_point: cfg.blocks_per_point,
                        block_bits: cfg.block_bits,
                        coder: cfg.coder.as_ref(),
                        seed: cfg.seed,
                    })?);
                }
            }
        }
        Ok(LinkTable {
            config_hash: cfg.hash(),
            curves,
        })
    }

    pub fn curve(&self, alpha: HmAlpha, layer: Layer, kind: ChannelKind) -> Option<&LinkCurve> {
        self.curves
            .iter()
            .find(|c| (c.alpha.value() - alpha.value()).abs() < 1e-9 && c.layer == layer && c.channel_kind == kind)
    }

    fn body(&self) -> String {
        let mut out = String::from("alpha,layer,channel_kind,snr_db,bler,blocks,block_bits\n");
        for c in &self.curves {
            for s in &c.samples {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    c.alpha, c.layer, c.channel_kind, s.snr_db, s.bler, s.blocks, c.block_bits
                ));
            }
        }
        out
    }

    pub fn to_cache_string(&self) -> String {
        let body = self.body();
        format!(
            "# {CACHE_FORMAT}\n# config-hash {}\n# checksum {}\n{}",
            self.config_hash,
            hex(&Sha256::digest(body.as_bytes())),
            body
        )
    }

    pub fn write_cache(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        fs::write(path, self.to_cache_string())?;
        Ok(())
    }

    pub fn parse_cache(text: &str, path: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::Cache {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let mut lines = text.lines();
        if lines.next() != Some(&format!("# {CACHE_FORMAT}")) {
            return Err(bad("unsupported format version"));
        }
        let hash = lines
            .next()
            .and_then(|l| l.strip_prefix("# config-hash "))
            .ok_or_else(|| bad("missing config hash"))?
            .to_string();
        let checksum = lines
            .next()
            .and_then(|l| l.strip_prefix("# checksum "))
            .ok_or_else(|| bad("missing checksum"))?;
        let header_len = text
            .match_indices('\n')
            .nth(2)
            .map(|(i, _)| i + 1)
            .ok_or_else(|| bad("truncated header"))?;
        let body = &text[header_len..];
        if hex(&Sha256::digest(body.as_bytes())) != checksum {
            return Err(Error::ChecksumMismatch {
                path: path.to_path_buf(),
            });
        }

        let mut curves: Vec<LinkCurve> = Vec::new();
        for (n, line) in body.lines().enumerate().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad(&format!("row {} has {} fields", n + 1, f.len())));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad(&format!("row {}: bad number `{s}`", n + 1)))
            };
            let alpha = HmAlpha::new(num(f[0])?)?;
            let layer: Layer = f[1].parse().map_err(|e: String| bad(&e))?;
            let kind: ChannelKind = f[2].parse().map_err(|e: String| bad(&e))?;
            let sample = CurveSample {
                snr_db: num(f[3])?,
                bler: num(f[4])?,
                blocks: f[5].parse().map_err(|_| bad("bad block count"))?,
            };
            let block_bits: usize = f[6].parse().map_err(|_| bad("bad block size"))?;
            match curves.last_mut() {
                Some(c) if c.alpha == alpha && c.layer == layer && c.channel_kind == kind => c.samples.push(sample),
                _ => curves.push(LinkCurve {
                    alpha,
                    layer,
                    channel_kind: kind,
                    block_bits,
                    samples: vec![sample],
                }),
            }
        }
        Ok(LinkTable {
            config_hash: hash,
            curves,
        })
    }

    pub fn read_cache(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingCache {
                path: path.to_path_buf(),
            });
        }
        let text = fs::read_to_string(path)?;
        Self::parse_cache(&text, path)
    }
}

/// Target-BLER SNR per (alpha, layer) for one channel kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSet {
    pub channel_kind: ChannelKind,
    pub target_bler: f64,
    pub entries: Vec<(HmAlpha, Layer, f64)>,
    pub cqi_subgroup_threshold: f64,
}

impl ThresholdSet {
    pub fn from_table(table: &LinkTable, kind: ChannelKind, target_bler: f64) -> Result<Self> {
        let mut entries = Vec::new();
        for c in table.curves.iter().filter(|c| c.channel_kind == kind) {
            entries.push((c.alpha, c.layer, threshold_at_target(c, target_bler)?));
        }
        let mut set = ThresholdSet {
            channel_kind: kind,
            target_bler,
            entries,
            cqi_subgroup_threshold: f64::NAN,
        };
        set.cqi_subgroup_threshold = set
            .get(HmAlpha::new(0.1)?, Layer::Lp)
            .ok_or_else(|| invalid("alphas", "the 0.1 low-priority curve defines the subgroup threshold"))?;
        Ok(set)
    }

    pub fn get(&self, alpha: HmAlpha, layer: Layer) -> Option<f64> {
        self.entries
            .iter()
            .find(|(a, l, _)| (a.value() - alpha.value()).abs() < 1e-9 && *l == layer)
            .map(|e| e.2)
    }

    /// SNR needed to decode both layers of uniform 16QAM.
    pub fn uniform_16qam(&self) -> Option<f64> {
        Some(
            self.get(HmAlpha::UNIFORM, Layer::Hp)?
                .max(self.get(HmAlpha::UNIFORM, Layer::Lp)?),
        )
    }

    pub fn qpsk(&self) -> Option<f64> {
        self.get(HmAlpha::QPSK, Layer::Hp)
    }
}

/// Outcome of [`build_threshold_set`].
#[derive(Debug)]
pub struct Characterization {
    pub table: LinkTable,
    pub thresholds: ThresholdSet,
    pub cache_hit: bool,
    pub cache_path: PathBuf,
}

/// Loads the curve cache when its hash matches `cfg`, otherwise simulates and
/// writes it.
pub fn build_threshold_set(cfg: &LinkCharConfig, cache_path: &Path, force: bool) -> Result<Characterization> {
    let hash = cfg.hash();
    if !force && cache_path.exists() {
        let table = LinkTable::read_cache(cache_path)?;
        if table.config_hash == hash {
            let thresholds = ThresholdSet::from_table(&table, cfg.abstraction, cfg.target_bler)?;
            return Ok(Characterization {
                table,
                thresholds,
                cache_hit: true,
                cache_path: cache_path.to_path_buf(),
            });
        }
    }
    let table = LinkTable::simulate(cfg)?;
    let thresholds = ThresholdSet::from_table(&table, cfg.abstraction, cfg.target_bler)?;
    table.write_cache(cache_path)?;
    Ok(Characterization {
        table,
        thresholds,
        cache_hit: false,
        cache_path: cache_path.to_path_buf(),
    })
}

/// Reads an existing cache and checks it against `cfg` without simulating.
pub fn load_threshold_set(cfg: &LinkCharConfig, cache_path: &Path) -> Result<ThresholdSet> {
    let table = LinkTable::read_cache(cache_path)?;
    if table.config_hash != cfg.hash() {
        return Err(Error::Cache {
            path: cache_path.to_path_buf(),
            reason: format!(
                "config hash {} does not match {}; rerun `lhs linkchar`",
                table.config_hash,
                cfg.hash()
            ),
        });
    }
    ThresholdSet::from_table(&table, cfg.abstraction, cfg.target_bler)
}
