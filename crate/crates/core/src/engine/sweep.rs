//! Parameter sweeps built on the engine: HCG share, distance profile and drop radius.

use rayon::prelude::*;

use super::{Metric, Outcome, Scheme, Simulator, SweepTable, Wants};
use crate::error::{invalid, Result};
use crate::scheduler::{scptm_hls_services, LsaAlphaMode, SchedulerParams, CELLS};

/// Per-layer decode fractions of the LSA-wide transmission at one HCG share.
#[derive(Debug, Clone)]
pub struct HcgPoint {
    pub hcg_fraction: f64,
    pub bl: Metric,
    pub el: Metric,
}

pub fn hcg_sweep(sim: &Simulator, iterations: usize, seed: u64) -> Result<(Vec<HcgPoint>, SweepTable)> {
    check_iterations(iterations)?;
    let sched = SchedulerParams {
        lsa_alpha: LsaAlphaMode::Same(sim.params.sweep.hcg_alpha),
        ..sim.sched.clone()
    };
    let mut points = Vec::new();
    for &f in &sim.params.sweep.hcg_points {
        let per_iter = (0..iterations as u64)
            .map(|it| {
                let state = sim.relocated_drop_state(&sim.params.drop, f, seed, it)?;
                let res = sim.evaluate_drop(&state, Scheme::Lhs, &sched, Wants::LOCAL, seed, it)?;
                let n = res.users.len().max(1) as f64;
                let bl = res.users.iter().filter(|u| u.local.is_some_and(|r| r.hp)).count() as f64 / n;
                let el = res.users.iter().filter(|u| u.local.is_some_and(|r| r.lp)).count() as f64 / n;
                Ok((bl, el))
            })
            .collect::<Result<Vec<_>>>()?;
        points.push(HcgPoint {
            hcg_fraction: f,
            bl: Metric {
                name: "bl_decode".into(),
                population: "all".into(),
                samples: per_iter.iter().map(|p| p.0).collect(),
            },
            el: Metric {
                name: "el_decode".into(),
                population: "all".into(),
                samples: per_iter.iter().map(|p| p.1).collect(),
            },
        });
    }
    let mut table = SweepTable::new(&["hcg_fraction"], &["bl_decode", "el_decode"]);
    for p in &points {
        table
            .rows
            .push((vec![format!("{:.2}", p.hcg_fraction)], vec![p.bl.clone(), p.el.clone()]));
    }
    Ok((points, table))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AlphaMode {
    Adaptive,
    Same,
}

impl AlphaMode {
    pub fn name(self) -> &'static str {
        match self {
            AlphaMode::Adaptive => "adaptive",
            AlphaMode::Same => "same_alpha",
        }
    }
}

/// Decode probabilities of one (mode, cell, bin) cell of the profile.
#[derive(Debug, Clone)]
pub struct DistanceCell {
    pub p_bl_el: Metric,
    pub p_bl_only: Metric,
    pub p_bl: Metric,
    pub outage: Metric,
}

impl DistanceCell {
    fn new() -> Self {
        DistanceCell {
            p_bl_el: Metric::new("p_bl_el", ""),
            p_bl_only: Metric::new("p_bl_only", ""),
            p_bl: Metric::new("p_bl", ""),
            outage: Metric::new("outage", ""),
        }
    }

    fn push(&mut self, outcomes: &[Outcome]) {
        if outcomes.is_empty() {
            return;
        }
        let n = outcomes.len() as f64;
        let hd = outcomes.iter().filter(|&&o| o == Outcome::Hd).count() as f64 / n;
        let sd = outcomes.iter().filter(|&&o| o == Outcome::Sd).count() as f64 / n;
        self.p_bl_el.samples.push(hd);
        self.p_bl_only.samples.push(sd);
        self.p_bl.samples.push(hd + sd);
        self.outage.samples.push(1.0 - hd - sd);
    }
}

#[derive(Debug, Clone)]
pub struct DistanceProfile {
    /// Bin edges in meters, `bins + 1` values.
    pub edges: Vec<f64>,
    /// Indexed `[mode][cell][bin]`, mode 0 adaptive, 1 same α.
    pub bins: Vec<Vec<Vec<DistanceCell>>>,
    /// Whole-cell figures, `[mode][cell]`.
    pub cells: Vec<Vec<DistanceCell>>,
}

impl DistanceProfile {
    pub const MODES: [AlphaMode; 2] = [AlphaMode::Adaptive, AlphaMode::Same];

    pub fn to_table(&self) -> SweepTable {
        let mut t = SweepTable::new(
            &["mode", "cell", "bin_low_m", "bin_high_m"],
            &["p_bl_el", "p_bl_only", "p_bl", "outage"],
        );
        for (m, mode) in Self::MODES.iter().enumerate() {
            for c in 0..CELLS {
                for (b, cell) in self.bins[m][c].iter().enumerate() {
                    t.rows.push((
                        vec![
                            mode.name().to_string(),
                            c.to_string(),
                            format!("{:.0}", self.edges[b]),
                            format!("{:.0}", self.edges[b + 1]),
                        ],
                        vec![
                            cell.p_bl_el.clone(),
                            cell.p_bl_only.clone(),
                            cell.p_bl.clone(),
                            cell.outage.clone(),
                        ],
                    ));
                }
            }
        }
        t
    }
}

pub fn distance_profile(sim: &Simulator, iterations: usize, seed: u64) -> Result<DistanceProfile> {
    check_iterations(iterations)?;
    let bins = sim.params.sweep.distance_bins;
    let radius = sim.deployment.cluster()[0].radius * sim.params.drop.drop_radius_fraction;
    let edges: Vec<f64> = (0..=bins).map(|k| radius * k as f64 / bins as f64).collect();
    let modes = [
        SchedulerParams {
            lsa_alpha: LsaAlphaMode::Adaptive,
            ..sim.sched.clone()
        },
        SchedulerParams {
            lsa_alpha: LsaAlphaMode::Same(sim.params.sweep.same_alpha),
            ..sim.sched.clone()
        },
    ];
    let mut prof = DistanceProfile {
        edges,
        bins: (0..2)
            .map(|_| {
                (0..CELLS)
                    .map(|_| (0..bins).map(|_| DistanceCell::new()).collect())
                    .collect()
            })
            .collect(),
        cells: (0..2)
            .map(|_| (0..CELLS).map(|_| DistanceCell::new()).collect())
            .collect(),
    };
    for it in 0..iterations as u64 {
        let state = sim.drop_state(&sim.params.drop, seed, it)?;
        for (m, sched) in modes.iter().enumerate() {
            let res = sim.evaluate_drop(&state, Scheme::Lhs, sched, Wants::LOCAL, seed, it)?;
            for c in 0..CELLS {
                let mut per_bin = vec![Vec::new(); bins];
                let mut all = Vec::new();
                for u in res.users.iter().filter(|u| u.cell == c) {
                    let o = u.local.map_or(Outcome::Outage, |r| r.outcome);
                    let b = ((u.distance / radius * bins as f64) as usize).min(bins - 1);
                    per_bin[b].push(o);
                    all.push(o);
                }
                for (b, v) in per_bin.iter().enumerate() {
                    prof.bins[m][c][b].push(v);
                }
                prof.cells[m][c].push(&all);
            }
        }
    }
    Ok(prof)
}

/// Average hyper-local services per cell at one drop radius.
#[derive(Debug, Clone)]
pub struct DropRadiusPoint {
    pub drop_radius_fraction: f64,
    pub lhs: Metric,
    pub scptm: Metric,
}

pub fn drop_radius_sweep(sim: &Simulator, iterations: usize, seed: u64) -> Result<(Vec<DropRadiusPoint>, SweepTable)> {
    check_iterations(iterations)?;
    let mut points = Vec::new();
    for &r in &sim.params.sweep.drop_radius_points {
        let mut drop = sim.params.drop.clone();
        drop.drop_radius_fraction = r;
        let per_iter = (0..iterations as u64)
            .into_par_iter()
            .map(|it| {
                let state = sim.drop_state(&drop, seed, it)?;
                let d = sim.schedule(&state.req, &sim.sched, seed, it);
                let groups = sim.scptm_groups(&state.req, seed, it, u64::MAX);
                let lhs = (0..CELLS).map(|c| d.hls_services(c)).sum::<usize>() as f64 / CELLS as f64;
                let scptm = groups.iter().map(|g| scptm_hls_services(g)).sum::<usize>() as f64 / CELLS as f64;
                Ok((lhs, scptm))
            })
            .collect::<Result<Vec<_>>>()?;
        points.push(DropRadiusPoint {
            drop_radius_fraction: r,
            lhs: Metric {
                name: "lhs_hls_services".into(),
                population: "cell_mean".into(),
                samples: per_iter.iter().map(|p| p.0).collect(),
            },
            scptm: Metric {
                name: "scptm_hls_services".into(),
                population: "cell_mean".into(),
                samples: per_iter.iter().map(|p| p.1).collect(),
            },
        });
    }
    let mut table = SweepTable::new(&["drop_radius_fraction"], &["lhs_hls_services", "scptm_hls_services"]);
    for p in &points {
        table.rows.push((
            vec![format!("{:.2}", p.drop_radius_fraction)],
            vec![p.lhs.clone(), p.scptm.clone()],
        ));
    }
    Ok((points, table))
}

fn check_iterations(iterations: usize) -> Result<()> {
    if iterations == 0 {
        return Err(invalid("iterations", "must be at least 1"));
    }
    Ok(())
}
