//! Subgrouping, content-to-resource mapping and the per-cell baseline scheduler.
//!
//! Cells are indexed 0..3 inside their LSA and contents 0..n. Output tables
//! print contents one-based.

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::Rng;

use crate::deployment::{hlsa_subbands, lsa_subbands, NUM_SUBBANDS};
use crate::error::{invalid, Result};
use crate::hqam::HmAlpha;

pub const CELLS: usize = 3;
pub const LSA_CONTENTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subgroup {
    Hcg,
    Lcg,
}

/// HCG when the SNR reaches the threshold.
pub fn subgroup_users(snr_db: &[f64], threshold_db: f64) -> Vec<Subgroup> {
    snr_db
        .iter()
        .map(|&s| {
            if s >= threshold_db {
                Subgroup::Hcg
            } else {
                Subgroup::Lcg
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestMatrix {
    pub count: [Vec<u32>; CELLS],
    pub count_hcg: [Vec<u32>; CELLS],
}

impl RequestMatrix {
    pub fn new(contents: usize) -> Self {
        RequestMatrix {
            count: std::array::from_fn(|_| vec![0; contents]),
            count_hcg: std::array::from_fn(|_| vec![0; contents]),
        }
    }

    pub fn from_counts(count: [Vec<u32>; CELLS], count_hcg: [Vec<u32>; CELLS]) -> Result<Self> {
        let n = count[0].len();
        for i in 0..CELLS {
            if count[i].len() != n || count_hcg[i].len() != n {
                return Err(invalid("request_matrix", "rows must have equal length"));
            }
            if count[i].iter().zip(&count_hcg[i]).any(|(c, h)| h > c) {
                return Err(invalid("request_matrix", "HCG count exceeds total count"));
            }
        }
        Ok(RequestMatrix { count, count_hcg })
    }

    /// Builds the matrix from (cell, content, subgroup) triples.
    pub fn from_users(contents: usize, users: impl IntoIterator<Item = (usize, usize, Subgroup)>) -> Self {
        let mut m = Self::new(contents);
        for (cell, content, g) in users {
            m.count[cell][content] += 1;
            if g == Subgroup::Hcg {
                m.count_hcg[cell][content] += 1;
            }
        }
        m
    }

    pub fn contents(&self) -> usize {
        self.count[0].len()
    }

    pub fn total(&self, content: usize) -> u32 {
        (0..CELLS).map(|i| self.count[i][content]).sum()
    }

    /// Share of HCG requesters; zero for contents nobody requests.
    pub fn hcg_fraction(&self, cell: usize, content: usize) -> f64 {
        let c = self.count[cell][content];
        if c == 0 {
            0.0
        } else {
            self.count_hcg[cell][content] as f64 / c as f64
        }
    }
}

/// The most requested contents of the LSA, at most three, all with requesters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LsaSelection {
    pub contents: Vec<usize>,
    pub mm_flag: Vec<bool>,
}

pub fn alg1_lsa_select(req: &RequestMatrix) -> LsaSelection {
    let n = req.contents();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&c| std::cmp::Reverse(req.total(c)));
    let contents: Vec<usize> = order
        .into_iter()
        .filter(|&c| req.total(c) > 0)
        .take(LSA_CONTENTS)
        .collect();
    let mut mm_flag = vec![false; n];
    for &c in &contents {
        mm_flag[c] = true;
    }
    LsaSelection { contents, mm_flag }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    Mr {
        content: usize,
    },
    Sr {
        hp: usize,
        lp: usize,
    },
    /// Low-priority candidate without a high-priority partner, sent alone on the robust layer.
    SrHpOnly {
        content: usize,
    },
}

impl SlotKind {
    pub fn contents(&self) -> Vec<usize> {
        match *self {
            SlotKind::Mr { content } | SlotKind::SrHpOnly { content } => vec![content],
            SlotKind::Sr { hp, lp } => vec![hp, lp],
        }
    }

    /// Number of distinct services the slot carries.
    pub fn services(&self) -> usize {
        self.contents().len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alg2Params {
    pub hcg_fraction: f64,
    pub total_count: u32,
    pub max_slots: usize,
}

impl Default for Alg2Params {
    fn default() -> Self {
        Alg2Params {
            hcg_fraction: 0.5,
            total_count: 10,
            max_slots: 6,
        }
    }
}

/// Hyper-local content selection for every cell of the LSA.
pub fn alg2_hlsa_select(req: &RequestMatrix, mm_flag: &[bool], p: &Alg2Params) -> [Vec<SlotKind>; CELLS] {
    let n = req.contents();
    std::array::from_fn(|i| {
        let mut s_idx: Vec<usize> = (0..n).collect();
        s_idx.sort_by_key(|&c| std::cmp::Reverse(req.count_hcg[i][c]));
        let mut flag = mm_flag.to_vec();
        let mut slots = Vec::new();
        for j in 0..n {
            let c = s_idx[j];
            if flag[c] || slots.len() >= p.max_slots || req.hcg_fraction(i, c) < p.hcg_fraction {
                continue;
            }
            flag[c] = true;
            if req.count[i][c] > p.total_count {
                slots.push(SlotKind::Mr { content: c });
                continue;
            }
            let partner = s_idx[j..]
                .iter()
                .copied()
                .find(|&k| !flag[k] && req.hcg_fraction(i, k) < p.hcg_fraction && req.count[i][k] > p.total_count);
            match partner {
                Some(k) => {
                    flag[k] = true;
                    slots.push(SlotKind::Sr { hp: k, lp: c });
                }
                None => slots.push(SlotKind::SrHpOnly { content: c }),
            }
        }
        slots
    })
}

pub const ALPHA_LADDER: [f64; 3] = [0.5, 0.3, 0.1];

/// Orders cells by (HCG count desc, total count desc, index asc) and hands out 0.5, 0.3, 0.1.
pub fn alg3_alpha_assign(c: [u32; CELLS], tc: [u32; CELLS]) -> [HmAlpha; CELLS] {
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| c[b].cmp(&c[a]).then(tc[b].cmp(&tc[a])).then(a.cmp(&b)));
    let mut out = [HmAlpha::UNIFORM; CELLS];
    for (rank, &cell) in order.iter().enumerate() {
        out[cell] = HmAlpha::new(ALPHA_LADDER[rank]).expect("ladder values are valid");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LsaAlphaMode {
    Adaptive,
    /// The same constellation from every cell.
    Same(HmAlpha),
    Fixed([HmAlpha; CELLS]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerParams {
    pub alg2: Alg2Params,
    pub sr_alpha: HmAlpha,
    pub mr_alpha: HmAlpha,
    pub lsa_alpha: LsaAlphaMode,
}

impl Default for SchedulerParams {
    fn default() -> Self {
        SchedulerParams {
            alg2: Alg2Params::default(),
            sr_alpha: HmAlpha::new(0.3).expect("valid"),
            mr_alpha: HmAlpha::new(0.3).expect("valid"),
            lsa_alpha: LsaAlphaMode::Adaptive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HlsaSlot {
    pub kind: SlotKind,
    pub subband: usize,
    pub alpha: HmAlpha,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsaTransmission {
    pub content: usize,
    pub subband: usize,
    pub alpha_by_cell: [HmAlpha; CELLS],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleDecision {
    /// Color of the LSA, which fixes its sub-bands.
    pub lsa: usize,
    pub lsa_tx: Vec<LsaTransmission>,
    pub cells: [Vec<HlsaSlot>; CELLS],
    pub mm_flag: Vec<bool>,
}

/// Runs the three selection steps and places slots on random HLSA sub-bands.
pub fn schedule_lhs<R: Rng>(
    req: &RequestMatrix,
    lsa: usize,
    params: &SchedulerParams,
    rng: &mut R,
) -> ScheduleDecision {
    let sel = alg1_lsa_select(req);
    let lsa_sb = lsa_subbands(lsa);
    let lsa_tx = sel
        .contents
        .iter()
        .enumerate()
        .map(|(k, &content)| {
            let alpha_by_cell = match params.lsa_alpha {
                LsaAlphaMode::Adaptive => {
                    let c = std::array::from_fn(|i| req.count_hcg[i][content]);
                    let tc = std::array::from_fn(|i| req.count[i][content]);
                    alg3_alpha_assign(c, tc)
                }
                LsaAlphaMode::Same(a) => [a; CELLS],
                LsaAlphaMode::Fixed(v) => v,
            };
            LsaTransmission {
                content,
                subband: lsa_sb[k],
                alpha_by_cell,
            }
        })
        .collect();
    let kinds = alg2_hlsa_select(req, &sel.mm_flag, &params.alg2);
    let hl = hlsa_subbands(lsa);
    let cells = std::array::from_fn(|i| {
        let picks = sample(rng, hl.len(), kinds[i].len().min(hl.len()));
        kinds[i]
            .iter()
            .zip(picks.iter())
            .map(|(&kind, p)| HlsaSlot {
                kind,
                subband: hl[p],
                alpha: match kind {
                    SlotKind::Mr { .. } => params.mr_alpha,
                    SlotKind::Sr { .. } => params.sr_alpha,
                    SlotKind::SrHpOnly { .. } => HmAlpha::QPSK,
                },
            })
            .collect()
    });
    ScheduleDecision {
        lsa,
        lsa_tx,
        cells,
        mm_flag: sel.mm_flag,
    }
}

impl ScheduleDecision {
    pub fn validate(&self, params: &SchedulerParams) -> Result<()> {
        let mut seen = Vec::new();
        let mut push = |c: usize| {
            if seen.contains(&c) {
                Err(invalid("schedule", format!("content {} scheduled twice", c + 1)))
            } else {
                seen.push(c);
                Ok(())
            }
        };
        for t in &self.lsa_tx {
            push(t.content)?;
        }
        let lsa_contents = seen.clone();
        for slots in &self.cells {
            if slots.len() > params.alg2.max_slots {
                return Err(invalid("schedule", "too many HLSA slots in a cell"));
            }
            let mut cell_seen = lsa_contents.clone();
            let mut subbands = Vec::new();
            for s in slots {
                for c in s.kind.contents() {
                    if cell_seen.contains(&c) {
                        return Err(invalid("schedule", format!("content {} scheduled twice", c + 1)));
                    }
                    cell_seen.push(c);
                }
                if subbands.contains(&s.subband) || lsa_subbands(self.lsa).contains(&s.subband) {
                    return Err(invalid("schedule", "HLSA sub-band reused"));
                }
                subbands.push(s.subband);
                if matches!(s.kind, SlotKind::Sr { .. }) && s.alpha != params.sr_alpha {
                    return Err(invalid("schedule", "SR slot with wrong alpha"));
                }
                if matches!(s.kind, SlotKind::Mr { .. }) && s.alpha != params.mr_alpha {
                    return Err(invalid("schedule", "MR slot with wrong alpha"));
                }
            }
        }
        Ok(())
    }

    /// Services carried on HLSA sub-bands of `cell`.
    pub fn hls_services(&self, cell: usize) -> usize {
        self.cells[cell].iter().map(|s| s.kind.services()).sum()
    }

    /// One row per transmission: cell, subband, kind, hp_content, lp_content, alpha.
    pub fn to_table(&self) -> String {
        let mut out = String::from("cell,subband,kind,hp_content,lp_content,alpha\n");
        for t in &self.lsa_tx {
            for (i, a) in t.alpha_by_cell.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},f{},lsa,{},{},{}",
                    i,
                    t.subband + 1,
                    t.content + 1,
                    t.content + 1,
                    a
                );
            }
        }
        for (i, slots) in self.cells.iter().enumerate() {
            for s in slots {
                let (kind, hp, lp) = match s.kind {
                    SlotKind::Mr { content } => ("mr", content + 1, content + 1),
                    SlotKind::Sr { hp, lp } => ("sr", hp + 1, lp + 1),
                    SlotKind::SrHpOnly { content } => ("sr_hp_only", content + 1, 0),
                };
                let _ = writeln!(out, "{},f{},{},{},{},{}", i, s.subband + 1, kind, hp, lp, s.alpha);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScptmModulation {
    Qpsk,
    Uniform16Qam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScptmGroup {
    pub content: usize,
    pub subband: usize,
    pub modulation: ScptmModulation,
    /// Whether the group is one of the LSA's most requested contents.
    pub local: bool,
}

/// Groups one cell serves on its own: the LSA's top contents requested in the
/// cell, then every other content with more requesters than the threshold,
/// each on a distinct random sub-band. 16QAM only for groups without LCG members.
pub fn scptm_schedule<R: Rng>(req: &RequestMatrix, cell: usize, total_count: u32, rng: &mut R) -> Vec<ScptmGroup> {
    let sel = alg1_lsa_select(req);
    let mut contents: Vec<(usize, bool)> = sel
        .contents
        .iter()
        .filter(|&&c| req.count[cell][c] > 0)
        .map(|&c| (c, true))
        .collect();
    let mut others: Vec<usize> = (0..req.contents())
        .filter(|&c| !sel.mm_flag[c] && req.count[cell][c] > total_count)
        .collect();
    others.sort_by_key(|&c| std::cmp::Reverse(req.count[cell][c]));
    contents.extend(others.into_iter().map(|c| (c, false)));
    contents.truncate(NUM_SUBBANDS);
    let picks = sample(rng, NUM_SUBBANDS, contents.len());
    contents
        .iter()
        .zip(picks.iter())
        .map(|(&(content, local), subband)| ScptmGroup {
            content,
            subband,
            modulation: if req.count_hcg[cell][content] == req.count[cell][content] {
                ScptmModulation::Uniform16Qam
            } else {
                ScptmModulation::Qpsk
            },
            local,
        })
        .collect()
}

/// Hyper-local services the baseline serves in a cell.
pub fn scptm_hls_services(groups: &[ScptmGroup]) -> usize {
    groups.iter().filter(|g| !g.local).count()
}
