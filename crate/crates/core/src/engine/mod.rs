//! TTI-driven Monte Carlo engine.
//!
//! One iteration drops users, labels subgroups from the combined LSA SNR,
//! schedules the LSA, then runs every user through `ttis` TTIs of fast fading
//! and decides per layer whether each transmission it cares about was received.

pub mod decode;
pub mod report;
pub mod sweep;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{db_to_lin, lin_to_db, Activity, ChannelModel, LargeScaleLink, LinkSet, UserFading};
use crate::deployment::{
    drop_users, hlsa_subbands, lsa_subbands, Deployment, DropConfig, RequestDistribution, UserTerminal, NUM_SUBBANDS,
};
use crate::error::{invalid, Error, Result};
use crate::hqam::{geometry_from_alpha, HmAlpha, HqamGeometry};
use crate::linkchar::{Layer, ThresholdSet};
use crate::rng::{substream, Stream};
use crate::scheduler::{
    schedule_lhs, scptm_hls_services, scptm_schedule, subgroup_users, RequestMatrix, ScheduleDecision, SchedulerParams,
    ScptmGroup, ScptmModulation, SlotKind, Subgroup, CELLS,
};

pub use decode::{LayerTally, Outcome, SymbolEvaluator};
pub use report::{Metric, MetricsReport, SweepTable};

/// Bit rates used for throughput rows, kbps.
pub const LHS_BL_KBPS: f64 = 800.0;
pub const LHS_EL_KBPS: f64 = 800.0;
pub const SCPTM_SD_KBPS: f64 = 800.0;
pub const SCPTM_HD_KBPS: f64 = 1604.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Lhs,
    Scptm,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Lhs => "lhs",
            Scheme::Scptm => "scptm",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "lhs" => Ok(Scheme::Lhs),
            "scptm" => Ok(Scheme::Scptm),
            _ => Err(format!("expected lhs or scptm, got `{s}`")),
        }
    }
}

/// When the baseline redraws its random sub-band assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrbDraw {
    PerRun,
    PerTti,
}

/// Modulation of the baseline's hyper-local multi-resolution group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrModulation {
    /// Always uniform 16QAM, so both layers reach whoever decodes it.
    Uniform16Qam,
    /// The least-channel-gain rule of the group.
    GroupRule,
}

/// What the sites outside the center LSA transmit. No users are dropped there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterLoad {
    /// The full schedule of the center cell with the same corner.
    Replica,
    /// Only the local-service share of that schedule.
    LocalOnly,
}

/// How the LSA-wide transmission is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fidelity {
    Symbol,
    Threshold,
}

#[derive(Debug, Clone)]
pub struct SweepParams {
    pub hcg_points: Vec<f64>,
    /// Constellation all LSA cells use during the HCG sweep.
    pub hcg_alpha: HmAlpha,
    pub distance_bins: usize,
    /// The fixed constellation the adaptive scheme is compared against.
    pub same_alpha: HmAlpha,
    pub drop_radius_points: Vec<f64>,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            hcg_points: (0..=10).map(|k| k as f64 / 10.0).collect(),
            hcg_alpha: HmAlpha::new(0.1).expect("valid"),
            distance_bins: 5,
            same_alpha: HmAlpha::UNIFORM,
            drop_radius_points: vec![0.2, 0.4, 0.6, 0.8, 1.0],
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineParams {
    pub drop: DropConfig,
    pub ttis: usize,
    pub symbols_per_tti: usize,
    /// Subcarriers per sub-band the symbols are spread over.
    pub symbol_subcarriers: usize,
    pub block_bits: usize,
    pub correctable_errors: usize,
    pub target_bler: f64,
    pub fidelity: Fidelity,
    pub prb_draw: PrbDraw,
    pub mr_modulation: MrModulation,
    /// Scales every non-serving transmitter's power.
    pub interference_scale: f64,
    /// Interferers are the sites within this many hex rings of the user's cell.
    pub interferer_rings: u32,
    pub outer_load: OuterLoad,
    pub sweep: SweepParams,
}

impl Default for EngineParams {
    fn default() -> Self {
        EngineParams {
            drop: DropConfig {
                cells: CELLS,
                users_per_cell: 150,
                drop_radius_fraction: 1.0,
                contents: 15,
                distribution: RequestDistribution::Uniform,
            },
            ttis: 200,
            symbols_per_tti: 512,
            symbol_subcarriers: 8,
            block_bits: 256,
            correctable_errors: 32,
            target_bler: 0.01,
            fidelity: Fidelity::Symbol,
            prb_draw: PrbDraw::PerRun,
            mr_modulation: MrModulation::Uniform16Qam,
            interference_scale: 1.0,
            interferer_rings: 2,
            outer_load: OuterLoad::LocalOnly,
            sweep: SweepParams::default(),
        }
    }
}

/// What a user decodes from one transmission.
#[derive(Debug, Clone, PartialEq)]
pub enum RxKind {
    /// Macro-diversity over the serving cells, one constellation each; symbol level.
    Composite { alphas: Vec<HmAlpha> },
    /// Both layers of one hierarchical constellation, SINR thresholds.
    Layers { alpha: HmAlpha, hp_db: f64, lp_db: f64 },
    /// A single-resolution stream; success counts as `success`.
    Single { threshold_db: f64, success: Outcome },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reception {
    pub subband: usize,
    pub serving: Vec<usize>,
    pub kind: RxKind,
}

/// Per-layer result of one reception over a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RxResult {
    pub hp: bool,
    pub lp: bool,
    pub outcome: Outcome,
}

/// Transmissions of one epoch (the whole run, or one TTI for per-TTI draws).
#[derive(Debug, Clone)]
pub struct Plan {
    pub activity: Activity,
    pub local: [Option<Reception>; CELLS],
    pub mr: Reception,
    pub sr: Reception,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Wants {
    pub local: bool,
    pub mr: bool,
    pub sr: bool,
}

impl Wants {
    pub const ALL: Wants = Wants {
        local: true,
        mr: true,
        sr: true,
    };
    pub const LOCAL: Wants = Wants {
        local: true,
        mr: false,
        sr: false,
    };
}

/// Users and their large-scale state for one iteration.
#[derive(Debug, Clone)]
pub struct DropState {
    pub users: Vec<UserTerminal>,
    pub links: Vec<Vec<LargeScaleLink>>,
    /// Mean SNR with all three LSA cells combined.
    pub snr_db: Vec<f64>,
    pub labels: Vec<Subgroup>,
    pub req: RequestMatrix,
}

#[derive(Debug, Clone)]
pub struct UserRecord {
    pub cell: usize,
    pub distance: f64,
    pub label: Subgroup,
    pub local: Option<RxResult>,
    pub mr: Option<RxResult>,
    pub sr: Option<RxResult>,
}

#[derive(Debug, Clone)]
pub struct IterationResult {
    pub users: Vec<UserRecord>,
    pub hls_services: [usize; CELLS],
}

fn no_threshold(alpha: HmAlpha) -> Error {
    invalid(
        "thresholds",
        format!("no link-curve threshold for alpha {alpha}; add it to linkchar.alphas"),
    )
}

/// Free sub-band from `candidates` not in `used`, else the first candidate.
fn free_subband(candidates: &[usize], used: &[usize]) -> usize {
    candidates
        .iter()
        .copied()
        .find(|s| !used.contains(s))
        .unwrap_or(candidates[0])
}

fn push_unique(v: &mut Vec<usize>, site: usize) {
    if !v.contains(&site) {
        v.push(site);
    }
}

#[derive(Debug, Clone)]
pub struct Simulator {
    pub deployment: Deployment,
    pub model: ChannelModel,
    pub thresholds: ThresholdSet,
    pub sched: SchedulerParams,
    pub params: EngineParams,
}

impl Simulator {
    pub fn new(
        deployment: Deployment,
        model: ChannelModel,
        thresholds: ThresholdSet,
        sched: SchedulerParams,
        params: EngineParams,
    ) -> Result<Self> {
        let sim = Simulator {
            deployment,
            model,
            thresholds,
            sched,
            params,
        };
        sim.validate()?;
        Ok(sim)
    }

    fn validate(&self) -> Result<()> {
        let p = &self.params;
        if p.ttis == 0 {
            return Err(invalid("ttis", "must be at least 1"));
        }
        if p.symbols_per_tti == 0 || p.block_bits == 0 {
            return Err(invalid("symbols_per_tti", "symbols and block size must be positive"));
        }
        if !(p.target_bler > 0.0 && p.target_bler < 1.0) {
            return Err(invalid("target_bler", "must lie in (0, 1)"));
        }
        if !(p.interference_scale >= 0.0) {
            return Err(invalid("interference_scale", "must be non-negative"));
        }
        if p.drop.cells != CELLS {
            return Err(invalid("cells", "the engine measures the three center LSA cells"));
        }
        if p.sweep.distance_bins == 0 {
            return Err(invalid("distance_bins", "must be at least 1"));
        }
        for a in [self.sched.mr_alpha, self.sched.sr_alpha] {
            if a.is_qpsk() {
                return Err(invalid(
                    "alpha",
                    "hyper-local multiplexing needs a two-layer constellation",
                ));
            }
            self.layer_thresholds(a)?;
        }
        self.scptm_threshold(ScptmModulation::Qpsk)?;
        self.scptm_threshold(ScptmModulation::Uniform16Qam)?;
        Ok(())
    }

    fn layer_thresholds(&self, alpha: HmAlpha) -> Result<(f64, f64)> {
        let hp = self
            .thresholds
            .get(alpha, Layer::Hp)
            .ok_or_else(|| no_threshold(alpha))?;
        let lp = self
            .thresholds
            .get(alpha, Layer::Lp)
            .ok_or_else(|| no_threshold(alpha))?;
        Ok((hp, lp))
    }

    fn scptm_threshold(&self, m: ScptmModulation) -> Result<f64> {
        match m {
            ScptmModulation::Qpsk => self.thresholds.qpsk().ok_or_else(|| no_threshold(HmAlpha::QPSK)),
            ScptmModulation::Uniform16Qam => self
                .thresholds
                .uniform_16qam()
                .ok_or_else(|| no_threshold(HmAlpha::UNIFORM)),
        }
    }

    fn lsa_sites(&self) -> [usize; CELLS] {
        std::array::from_fn(|i| self.deployment.cluster()[i].id)
    }

    fn center_color(&self) -> usize {
        self.deployment.cluster()[0].color
    }

    fn combined_snr_db(&self, links: &[LargeScaleLink]) -> f64 {
        let mw: f64 = self.lsa_sites().iter().map(|&s| db_to_lin(links[s].rx_dbm)).sum();
        lin_to_db(mw) - self.model.noise_dbm()
    }

    fn finish_drop(&self, users: Vec<UserTerminal>, links: Vec<Vec<LargeScaleLink>>) -> DropState {
        let snr_db: Vec<f64> = links.iter().map(|l| self.combined_snr_db(l)).collect();
        let labels = subgroup_users(&snr_db, self.thresholds.cqi_subgroup_threshold);
        let req = RequestMatrix::from_users(
            self.params.drop.contents,
            users.iter().zip(&labels).map(|(u, &g)| (u.cell, u.content, g)),
        );
        DropState {
            users,
            links,
            snr_db,
            labels,
            req,
        }
    }

    pub fn drop_state(&self, drop: &DropConfig, seed: u64, iteration: u64) -> Result<DropState> {
        let users = drop_users(&self.deployment, drop, seed, iteration)?;
        let links = self.model.large_scale(&self.deployment, &users, seed, iteration)?;
        Ok(self.finish_drop(users, links))
    }

    /// Moves users inside their drop disk until the first `round(f·n)` users
    /// of every cell are HCG and the others LCG.
    pub fn relocated_drop_state(
        &self,
        drop: &DropConfig,
        fraction: f64,
        seed: u64,
        iteration: u64,
    ) -> Result<DropState> {
        const MAX_TRIES: usize = 20_000;
        if !(0.0..=1.0).contains(&fraction) {
            return Err(invalid("hcg_fraction", "must lie in [0, 1]"));
        }
        let mut users = drop_users(&self.deployment, drop, seed, iteration)?;
        let fields = self.model.shadow_fields(&self.deployment, seed, iteration)?;
        let thr = self.thresholds.cqi_subgroup_threshold;
        let mut links = Vec::with_capacity(users.len());
        for cell in 0..CELLS {
            let idx: Vec<usize> = (0..users.len())
                .filter(|&u| users[u].cell == self.lsa_sites()[cell])
                .collect();
            let n_hcg = (fraction * idx.len() as f64).round() as usize;
            let site = &self.deployment.sites[self.lsa_sites()[cell]];
            let radius = site.radius * drop.drop_radius_fraction;
            for (k, &u) in idx.iter().enumerate() {
                let want_hcg = k < n_hcg;
                let mut rng = substream(seed, Stream::Relocate, &[iteration, u as u64]);
                let mut tries = 0;
                loop {
                    let l = self
                        .model
                        .user_links(&self.deployment, &fields, &users[u], seed, iteration)?;
                    if (self.combined_snr_db(&l) >= thr) == want_hcg {
                        links.push(l);
                        break;
                    }
                    tries += 1;
                    if tries > MAX_TRIES {
                        return Err(invalid(
                            "hcg_fraction",
                            "no position in the drop disk reaches the requested subgroup",
                        ));
                    }
                    let d = loop {
                        let d = radius * rng.random::<f64>().sqrt();
                        if d >= crate::deployment::MIN_DROP_DISTANCE {
                            break d;
                        }
                    };
                    let phi = rng.random::<f64>() * std::f64::consts::TAU;
                    users[u].x = site.x + d * phi.cos();
                    users[u].y = site.y + d * phi.sin();
                }
            }
        }
        Ok(self.finish_drop(users, links))
    }

    pub fn schedule(
        &self,
        req: &RequestMatrix,
        sched: &SchedulerParams,
        seed: u64,
        iteration: u64,
    ) -> ScheduleDecision {
        let mut rng = substream(seed, Stream::Placement, &[iteration, u64::MAX]);
        schedule_lhs(req, self.center_color(), sched, &mut rng)
    }

    /// Baseline groups of the three cells; `epoch` is `u64::MAX` for per-run draws.
    pub fn scptm_groups(&self, req: &RequestMatrix, seed: u64, iteration: u64, epoch: u64) -> [Vec<ScptmGroup>; CELLS] {
        std::array::from_fn(|i| {
            let mut rng = substream(seed, Stream::Scptm, &[iteration, i as u64, epoch]);
            scptm_schedule(req, i, self.sched.alg2.total_count, &mut rng)
        })
    }

    /// Sub-bands of the center cells plus the outer-site load.
    pub fn lhs_activity(&self, d: &ScheduleDecision, seed: u64, iteration: u64) -> Activity {
        let mut act = Activity::default();
        for site in &self.deployment.sites {
            if site.id < CELLS {
                for tx in &d.lsa_tx {
                    act.transmitters[tx.subband].push(site.id);
                }
                for slot in &d.cells[site.id] {
                    act.transmitters[slot.subband].push(site.id);
                }
            } else {
                for &sb in &lsa_subbands(site.color)[..d.lsa_tx.len()] {
                    act.transmitters[sb].push(site.id);
                }
                let hl = hlsa_subbands(site.color);
                let n = match self.params.outer_load {
                    OuterLoad::Replica => d.cells[site.replica_of()].len().min(hl.len()),
                    OuterLoad::LocalOnly => 0,
                };
                let mut rng = substream(seed, Stream::Placement, &[iteration, site.id as u64]);
                for p in sample(&mut rng, hl.len(), n).iter() {
                    act.transmitters[hl[p]].push(site.id);
                }
            }
        }
        act
    }

    pub fn scptm_activity(&self, groups: &[Vec<ScptmGroup>; CELLS], seed: u64, iteration: u64, epoch: u64) -> Activity {
        let mut act = Activity::default();
        for site in &self.deployment.sites {
            if site.id < CELLS {
                for g in &groups[site.id] {
                    act.transmitters[g.subband].push(site.id);
                }
            } else {
                let g = &groups[site.replica_of()];
                let n = match self.params.outer_load {
                    OuterLoad::Replica => g.len(),
                    OuterLoad::LocalOnly => g.iter().filter(|g| g.local).count(),
                }
                .min(NUM_SUBBANDS);
                let mut rng = substream(seed, Stream::Scptm, &[iteration, site.id as u64, epoch]);
                for sb in sample(&mut rng, NUM_SUBBANDS, n).iter() {
                    act.transmitters[sb].push(site.id);
                }
            }
        }
        act
    }

    pub fn lhs_plan(&self, d: &ScheduleDecision, seed: u64, iteration: u64) -> Result<Plan> {
        let mut activity = self.lhs_activity(d, seed, iteration);
        let sites = self.lsa_sites();
        let local = std::array::from_fn(|i| {
            d.lsa_tx.first().map(|tx| Reception {
                subband: tx.subband,
                serving: sites.to_vec(),
                kind: match self.params.fidelity {
                    Fidelity::Symbol => RxKind::Composite {
                        alphas: tx.alpha_by_cell.to_vec(),
                    },
                    Fidelity::Threshold => {
                        let a = tx.alpha_by_cell[i];
                        let (hp_db, lp_db) = self.layer_thresholds(a).unwrap_or((f64::INFINITY, f64::INFINITY));
                        RxKind::Layers { alpha: a, hp_db, lp_db }
                    }
                },
            })
        });
        let hl = hlsa_subbands(self.center_color());
        let mut used: Vec<usize> = d.cells[0].iter().map(|s| s.subband).collect();
        let pick = |kind: fn(&SlotKind) -> bool, used: &mut Vec<usize>, activity: &mut Activity| {
            match d.cells[0].iter().find(|s| kind(&s.kind)) {
                Some(s) => s.subband,
                None => {
                    // Probe transmission on a sub-band the cell leaves idle.
                    let sb = free_subband(&hl, used);
                    used.push(sb);
                    push_unique(&mut activity.transmitters[sb], sites[0]);
                    sb
                }
            }
        };
        let mr_sb = pick(|k| matches!(k, SlotKind::Mr { .. }), &mut used, &mut activity);
        let sr_sb = pick(|k| matches!(k, SlotKind::Sr { .. }), &mut used, &mut activity);
        let layers = |a: HmAlpha| -> Result<RxKind> {
            let (hp_db, lp_db) = self.layer_thresholds(a)?;
            Ok(RxKind::Layers { alpha: a, hp_db, lp_db })
        };
        Ok(Plan {
            activity,
            local,
            mr: Reception {
                subband: mr_sb,
                serving: vec![sites[0]],
                kind: layers(self.sched.mr_alpha)?,
            },
            sr: Reception {
                subband: sr_sb,
                serving: vec![sites[0]],
                kind: layers(self.sched.sr_alpha)?,
            },
        })
    }

    pub fn scptm_plan(&self, req: &RequestMatrix, seed: u64, iteration: u64, epoch: u64) -> Result<Plan> {
        let groups = self.scptm_groups(req, seed, iteration, epoch);
        let mut activity = self.scptm_activity(&groups, seed, iteration, epoch);
        let sites = self.lsa_sites();
        let all: Vec<usize> = (0..NUM_SUBBANDS).collect();
        let top = crate::scheduler::alg1_lsa_select(req).contents.first().copied();
        let single = |m: ScptmModulation| -> Result<RxKind> {
            Ok(RxKind::Single {
                threshold_db: self.scptm_threshold(m)?,
                success: match m {
                    ScptmModulation::Qpsk => Outcome::Sd,
                    ScptmModulation::Uniform16Qam => Outcome::Hd,
                },
            })
        };
        let mut local: [Option<Reception>; CELLS] = Default::default();
        if let Some(top) = top {
            for i in 0..CELLS {
                let (sb, m) = match groups[i].iter().find(|g| g.content == top) {
                    Some(g) => (g.subband, g.modulation),
                    None => {
                        let used: Vec<usize> = groups[i].iter().map(|g| g.subband).collect();
                        let sb = free_subband(&all, &used);
                        push_unique(&mut activity.transmitters[sb], sites[i]);
                        (sb, ScptmModulation::Qpsk)
                    }
                };
                local[i] = Some(Reception {
                    subband: sb,
                    serving: vec![sites[i]],
                    kind: single(m)?,
                });
            }
        }
        let mut used: Vec<usize> = groups[0].iter().map(|g| g.subband).collect();
        let mut hls = groups[0].iter().filter(|g| !g.local);
        let probe = |used: &mut Vec<usize>, activity: &mut Activity| {
            let sb = free_subband(&all, used);
            used.push(sb);
            push_unique(&mut activity.transmitters[sb], sites[0]);
            sb
        };
        let (mr_sb, mr_mod) = match hls.next() {
            Some(g) => (
                g.subband,
                match self.params.mr_modulation {
                    MrModulation::Uniform16Qam => ScptmModulation::Uniform16Qam,
                    MrModulation::GroupRule => g.modulation,
                },
            ),
            None => (
                probe(&mut used, &mut activity),
                match self.params.mr_modulation {
                    MrModulation::Uniform16Qam => ScptmModulation::Uniform16Qam,
                    MrModulation::GroupRule => ScptmModulation::Qpsk,
                },
            ),
        };
        let sr_sb = match hls.next() {
            Some(g) => g.subband,
            None => probe(&mut used, &mut activity),
        };
        Ok(Plan {
            activity,
            local,
            mr: Reception {
                subband: mr_sb,
                serving: vec![sites[0]],
                kind: single(mr_mod)?,
            },
            sr: Reception {
                subband: sr_sb,
                serving: vec![sites[0]],
                kind: single(ScptmModulation::Qpsk)?,
            },
        })
    }

    /// Copy of `plan` that keeps only transmitters a user of `cell` hears.
    pub fn restrict_plan(&self, plan: &Plan, cell: usize) -> Plan {
        let site = self.lsa_sites()[cell];
        let heard: Vec<usize> = (0..=self.params.interferer_rings)
            .flat_map(|r| self.deployment.neighbors(site, r))
            .collect();
        let mut out = plan.clone();
        for tx in out.activity.transmitters.iter_mut() {
            tx.retain(|s| heard.contains(s));
        }
        out
    }

    /// Runs one user through all TTIs of `plans` (one plan, or one per TTI).
    pub fn evaluate_user(
        &self,
        plans: &[Plan],
        links: &[LargeScaleLink],
        user: &UserTerminal,
        cell: usize,
        wants: Wants,
        seed: u64,
        iteration: u64,
        tag: u64,
    ) -> [Option<RxResult>; 3] {
        let p = &self.params;
        let pick = |plan: &Plan| -> [Option<Reception>; 3] {
            [
                if wants.local { plan.local[cell].clone() } else { None },
                if wants.mr && cell == 0 {
                    Some(plan.mr.clone())
                } else {
                    None
                },
                if wants.sr && cell == 0 {
                    Some(plan.sr.clone())
                } else {
                    None
                },
            ]
        };
        let k = self.model.fading.faded_interferers;
        let sets_of = |plan: &Plan, rx: &[Option<Reception>; 3]| -> [Option<LinkSet>; 3] {
            std::array::from_fn(|j| {
                rx[j]
                    .as_ref()
                    .map(|r| LinkSet::new(links, &plan.activity, r.subband, &r.serving, k))
            })
        };
        let mut rx = pick(&plans[0]);
        let mut sets = sets_of(&plans[0], &rx);
        let mut fading = UserFading::new(&self.model, seed, iteration, user.id);
        let noise_mw = db_to_lin(self.model.noise_dbm());
        let mut tallies = [(LayerTally::default(), LayerTally::default()); 3];
        let geoms: [Vec<HqamGeometry>; 3] = std::array::from_fn(|j| match rx[j].as_ref().map(|r| &r.kind) {
            Some(RxKind::Composite { alphas }) => alphas.iter().map(|&a| geometry_from_alpha(a)).collect(),
            _ => Vec::new(),
        });
        let mut evals: [Option<SymbolEvaluator>; 3] = std::array::from_fn(|j| {
            (!geoms[j].is_empty())
                .then(|| {
                    SymbolEvaluator::new(
                        substream(seed, Stream::Symbols, &[iteration, user.id as u64, tag, j as u64]),
                        p.symbols_per_tti,
                        p.block_bits,
                        p.correctable_errors,
                    )
                })
                .map(|ev| {
                    // A layer past the BLER allowance of the whole run is lost.
                    let total = (ev.blocks_per_tti() * p.ttis) as f64;
                    ev.with_failure_budget((p.target_bler * total).floor() as u32)
                })
        });
        let mut gains: Vec<Vec<Complex64>> = Vec::with_capacity(CELLS);
        for t in 0..p.ttis {
            if plans.len() > 1 && t > 0 {
                rx = pick(&plans[t]);
                sets = sets_of(&plans[t], &rx);
            }
            for j in 0..3 {
                let (Some(r), Some(set)) = (&rx[j], &sets[j]) else {
                    continue;
                };
                let mut i_mw = set.static_interference_mw;
                for &s in &set.faded {
                    i_mw += db_to_lin(links[s].rx_dbm) * fading.gain(&self.model.kernel, s, set.subband);
                }
                let in_mw = noise_mw + p.interference_scale * i_mw;
                match &r.kind {
                    RxKind::Composite { .. } => {
                        gains.resize_with(set.serving.len(), Vec::new);
                        for (h, &s) in gains.iter_mut().zip(&set.serving) {
                            fading.responses(&self.model.kernel, s, set.subband, p.symbol_subcarriers, h);
                            let amp = (db_to_lin(links[s].rx_dbm) / in_mw).sqrt();
                            h.iter_mut().for_each(|x| *x *= amp);
                        }
                        if let Some(ev) = evals[j].as_mut() {
                            ev.tti(&geoms[j], &gains);
                        }
                    }
                    RxKind::Layers { hp_db, lp_db, .. } => {
                        let sinr = lin_to_db(self.signal_mw(links, set, &mut fading) / in_mw);
                        tallies[j].0.record((sinr < *hp_db) as u32, 1);
                        tallies[j].1.record((sinr < *lp_db) as u32, 1);
                    }
                    RxKind::Single { threshold_db, .. } => {
                        let sinr = lin_to_db(self.signal_mw(links, set, &mut fading) / in_mw);
                        tallies[j].0.record((sinr < *threshold_db) as u32, 1);
                    }
                }
            }
            fading.advance();
        }
        std::array::from_fn(|j| {
            let r = rx[j].as_ref()?;
            let (hp_t, lp_t) = match &evals[j] {
                Some(ev) => (ev.hp, ev.lp),
                None => tallies[j],
            };
            let hp = hp_t.received(p.target_bler);
            Some(match r.kind {
                RxKind::Single { success, .. } => RxResult {
                    hp,
                    lp: false,
                    outcome: if hp { success } else { Outcome::Outage },
                },
                _ => {
                    let lp = lp_t.received(p.target_bler);
                    RxResult {
                        hp,
                        lp,
                        outcome: Outcome::layered(hp, lp),
                    }
                }
            })
        })
    }

    fn signal_mw(&self, links: &[LargeScaleLink], set: &LinkSet, fading: &mut UserFading) -> f64 {
        set.serving
            .iter()
            .map(|&s| db_to_lin(links[s].rx_dbm) * fading.gain(&self.model.kernel, s, set.subband))
            .sum()
    }

    /// Plans of one iteration plus the hyper-local services scheduled per cell.
    pub fn plans(
        &self,
        scheme: Scheme,
        req: &RequestMatrix,
        sched: &SchedulerParams,
        seed: u64,
        iteration: u64,
    ) -> Result<(Vec<Plan>, [usize; CELLS])> {
        match scheme {
            Scheme::Lhs => {
                let d = self.schedule(req, sched, seed, iteration);
                let hls = std::array::from_fn(|i| d.hls_services(i));
                Ok((vec![self.lhs_plan(&d, seed, iteration)?], hls))
            }
            Scheme::Scptm => {
                let groups = self.scptm_groups(req, seed, iteration, u64::MAX);
                let hls = std::array::from_fn(|i| scptm_hls_services(&groups[i]));
                let plans = match self.params.prb_draw {
                    PrbDraw::PerRun => vec![self.scptm_plan(req, seed, iteration, u64::MAX)?],
                    PrbDraw::PerTti => (0..self.params.ttis as u64)
                        .map(|t| self.scptm_plan(req, seed, iteration, t))
                        .collect::<Result<_>>()?,
                };
                Ok((plans, hls))
            }
        }
    }

    /// Evaluates every user of a drop under `scheme`.
    pub fn evaluate_drop(
        &self,
        state: &DropState,
        scheme: Scheme,
        sched: &SchedulerParams,
        wants: Wants,
        seed: u64,
        iteration: u64,
    ) -> Result<IterationResult> {
        let (plans, hls_services) = self.plans(scheme, &state.req, sched, seed, iteration)?;
        let views: [Vec<Plan>; CELLS] =
            std::array::from_fn(|c| plans.iter().map(|p| self.restrict_plan(p, c)).collect());
        let sites = self.lsa_sites();
        let tag = match scheme {
            Scheme::Lhs => 0,
            Scheme::Scptm => 1,
        };
        let users = state
            .users
            .par_iter()
            .zip(state.links.par_iter())
            .zip(state.labels.par_iter())
            .map(|((u, links), &label)| {
                let cell = sites.iter().position(|&s| s == u.cell).expect("users sit in LSA cells");
                let [local, mr, sr] = self.evaluate_user(&views[cell], links, u, cell, wants, seed, iteration, tag);
                UserRecord {
                    cell,
                    distance: links[u.cell].distance,
                    label,
                    local,
                    mr,
                    sr,
                }
            })
            .collect();
        Ok(IterationResult { users, hls_services })
    }

    pub fn run_iteration(&self, scheme: Scheme, seed: u64, iteration: u64) -> Result<IterationResult> {
        let state = self.drop_state(&self.params.drop, seed, iteration)?;
        self.evaluate_drop(&state, scheme, &self.sched, Wants::ALL, seed, iteration)
    }

    /// Full run: per-iteration metrics with across-iteration confidence intervals.
    pub fn run(&self, scheme: Scheme, iterations: usize, seed: u64) -> Result<MetricsReport> {
        if iterations == 0 {
            return Err(invalid("iterations", "must be at least 1"));
        }
        let results = (0..iterations as u64)
            .map(|it| self.run_iteration(scheme, seed, it))
            .collect::<Result<Vec<_>>>()?;
        Ok(MetricsReport::from_iterations(scheme, seed, &results))
    }
}
