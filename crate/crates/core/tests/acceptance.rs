//! Acceptance suite. One test per criterion; each prints a PASS or FAIL line
//! before asserting. The line goes to stderr directly, so it shows up even
//! under output capture; the per-check details need `-- --nocapture`.

mod common;

use std::io::Write;
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use common::{oracle_alg1, oracle_alg2_cell, oracle_alg3};
use lhs_core::config::RunConfig;
use lhs_core::deployment::{hlsa_subbands, lsa_subbands, NUM_SUBBANDS};
use lhs_core::engine::sweep::{distance_profile, drop_radius_sweep, hcg_sweep, DistanceProfile};
use lhs_core::engine::{Metric, MetricsReport, Scheme, Simulator};
use lhs_core::hqam::{demap_ml, geometry_from_alpha, HmAlpha, LayeredBits};
use lhs_core::linkchar::{ChannelKind, Layer, LinkTable, ThresholdSet};
use lhs_core::scheduler::{
    alg1_lsa_select, alg2_hlsa_select, alg3_alpha_assign, schedule_lhs, Alg2Params, RequestMatrix, SchedulerParams,
    SlotKind, CELLS,
};

const SEED: u64 = 2024;
const PAIRED_ITERATIONS: usize = 20;
const DISTANCE_ITERATIONS: usize = 30;
const HCG_ITERATIONS: usize = 5;
const RADIUS_ITERATIONS: usize = 30;

fn verdict(n: usize, name: &str, checks: &[(bool, String)]) {
    let pass = checks.iter().all(|c| c.0);
    let line = format!("{} criterion {n:>2} {name}", if pass { "PASS" } else { "FAIL" });
    let _ = writeln!(std::io::stderr().lock(), "{line}");
    for (ok, line) in checks {
        println!("    [{}] {line}", if *ok { "ok" } else { "xx" });
    }
    assert!(pass, "criterion {n} ({name}) failed");
}

fn table() -> &'static LinkTable {
    static T: OnceLock<LinkTable> = OnceLock::new();
    T.get_or_init(|| {
        let s = RunConfig::default().settings().unwrap();
        LinkTable::simulate(&s.linkchar).unwrap()
    })
}

fn simulator(overrides: &[&str]) -> Simulator {
    let mut cfg = RunConfig::default();
    for o in overrides {
        cfg.apply_assignment(o).unwrap();
    }
    let s = cfg.settings().unwrap();
    let th = ThresholdSet::from_table(table(), s.linkchar.abstraction, s.linkchar.target_bler).unwrap();
    s.simulator(th).unwrap()
}

/// LHS and baseline reports on the same drops, cell α fixed to (0.1, 0.5, 0.3).
fn paired() -> &'static (MetricsReport, MetricsReport) {
    static P: OnceLock<(MetricsReport, MetricsReport)> = OnceLock::new();
    P.get_or_init(|| {
        let sim = simulator(&["sched.lsa_alpha=fixed:0.1,0.5,0.3"]);
        (
            sim.run(Scheme::Lhs, PAIRED_ITERATIONS, SEED).unwrap(),
            sim.run(Scheme::Scptm, PAIRED_ITERATIONS, SEED).unwrap(),
        )
    })
}

fn metric<'a>(r: &'a MetricsReport, name: &str, pop: &str) -> &'a Metric {
    r.get(name, pop).unwrap_or_else(|| panic!("missing {name}/{pop}"))
}

fn sum_metric(a: &Metric, b: &Metric) -> Metric {
    Metric {
        name: format!("{}+{}", a.name, b.name),
        population: a.population.clone(),
        samples: a.samples.iter().zip(&b.samples).map(|(x, y)| x + y).collect(),
    }
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn q(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_01_modulation_exactness() {
    let mut checks = Vec::new();

    // Gray-labelled uniform 16QAM, levels ±1/√10 and ±3/√10 per axis.
    let level = |hp_bit: u8, lp_bit: u8| {
        let sign = 1.0 - 2.0 * hp_bit as f64;
        let mag = if lp_bit == 0 { 3.0 } else { 1.0 };
        sign * mag / 10f64.sqrt()
    };
    let g = geometry_from_alpha(HmAlpha::UNIFORM);
    let mut worst = 0f64;
    for bits in LayeredBits::all() {
        let want = Complex64::new(
            level(bits.hp() >> 1, bits.lp() >> 1),
            level(bits.hp() & 1, bits.lp() & 1),
        );
        worst = worst.max((g.point(bits) - want).norm());
    }
    checks.push((
        worst <= 1e-12,
        format!("max deviation from the 16QAM lattice {worst:.2e}"),
    ));
    // Per-axis labels read along the axis form a Gray sequence.
    let mut axis: Vec<(f64, u8)> = (0..4u8).map(|b| (level(b >> 1, b & 1), b)).collect();
    axis.sort_by(|a, b| a.0.total_cmp(&b.0));
    let gray = axis.windows(2).all(|w| (w[0].1 ^ w[1].1).count_ones() == 1);
    checks.push((gray, "axis labels are Gray".into()));

    // Monte Carlo symbol error rate against the closed form.
    let n: u64 = 1_000_000;
    for es_n0_db in [6.0, 10.0, 14.0] {
        let gamma = 10f64.powf(es_n0_db / 10.0);
        let x = (3.0 * gamma / 15.0).sqrt();
        let p = 3.0 * q(x) - 2.25 * q(x).powi(2);
        let sigma = (0.5 / gamma).sqrt();
        let chunks = 16u64;
        let errors: u64 = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + c);
                let mut e = 0;
                for _ in 0..n / chunks {
                    let bits = LayeredBits::from_index(rng.random_range(0..16));
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    let y = g.point(bits) + Complex64::new(re, im) * sigma;
                    e += (demap_ml(y, &g, Complex64::new(1.0, 0.0)).unwrap() != bits) as u64;
                }
                e
            })
            .sum();
        let ser = errors as f64 / n as f64;
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        checks.push((
            (ser - p).abs() <= 3.0 * sd,
            format!(
                "Es/N0 {es_n0_db} dB: SER {ser:.5} vs closed form {p:.5} (3σ = {:.5})",
                3.0 * sd
            ),
        ));
    }
    verdict(1, "modulation exactness", &checks);
}

#[test]
fn criterion_02_protection_ordering() {
    let th = ThresholdSet::from_table(table(), ChannelKind::RayleighFlat, 0.01).unwrap();
    let a = |x: f64| HmAlpha::new(x).unwrap();
    let get = |x: f64, l: Layer| th.get(a(x), l).unwrap();
    let mut checks = Vec::new();
    let (h1, h3, h5) = (get(0.1, Layer::Hp), get(0.3, Layer::Hp), get(0.5, Layer::Hp));
    checks.push((
        h1 < h3 && h3 < h5,
        format!("HP thresholds {h1:.2} < {h3:.2} < {h5:.2} dB"),
    ));
    for x in [0.1, 0.3, 0.5] {
        let (hp, lp) = (get(x, Layer::Hp), get(x, Layer::Lp));
        checks.push((lp > hp, format!("α={x}: LP {lp:.2} dB > HP {hp:.2} dB")));
    }
    verdict(2, "protection ordering on Rayleigh-flat curves", &checks);
}

#[test]
fn criterion_03_scheduler_oracles() {
    let mut checks = Vec::new();

    // Selection of the LSA-wide contents depends on the totals; every total
    // 0..12 of four contents is reached through three cells of 0..4.
    let mut alg1_mismatch = 0;
    let mut alg1_cases = 0;
    for code in 0..13u32.pow(4) {
        let t: Vec<u32> = (0..4).map(|k| (code / 13u32.pow(k)) % 13).collect();
        for rot in 0..CELLS {
            let count: [Vec<u32>; CELLS] =
                std::array::from_fn(|i| t.iter().map(|&x| (x + ((i + rot) % CELLS) as u32) / 3).collect());
            let req = RequestMatrix::from_counts(count, std::array::from_fn(|_| vec![0; 4])).unwrap();
            alg1_mismatch += (alg1_lsa_select(&req).contents != oracle_alg1(&t)) as usize;
            alg1_cases += 1;
        }
    }
    checks.push((
        alg1_mismatch == 0,
        format!("LSA selection: {alg1_mismatch} mismatches in {alg1_cases} cases"),
    ));

    // Per-cell HLSA selection, every (count, hcg) with 0 ≤ hcg ≤ count ≤ 4 for
    // four contents, every LSA flag pattern, placed in each of the three cells.
    let pairs: Vec<(u32, u32)> = (0..=4).flat_map(|c| (0..=c).map(move |h| (c, h))).collect();
    let np = pairs.len();
    let results: (usize, usize) = (0..np.pow(4))
        .into_par_iter()
        .map(|code| {
            let sel: Vec<(u32, u32)> = (0..4).map(|k| pairs[(code / np.pow(k as u32)) % np]).collect();
            let count: Vec<u32> = sel.iter().map(|p| p.0).collect();
            let hcg: Vec<u32> = sel.iter().map(|p| p.1).collect();
            let (mut bad, mut n) = (0, 0);
            for cell in 0..CELLS {
                let mut c: [Vec<u32>; CELLS] = std::array::from_fn(|_| vec![0; 4]);
                let mut h: [Vec<u32>; CELLS] = std::array::from_fn(|_| vec![0; 4]);
                c[cell] = count.clone();
                h[cell] = hcg.clone();
                // The other cells see a reversed copy so all three are exercised at once.
                let other = (cell + 1) % CELLS;
                c[other] = count.iter().rev().copied().collect();
                h[other] = hcg.iter().rev().copied().collect();
                let req = RequestMatrix::from_counts(c.clone(), h.clone()).unwrap();
                for thr_total in [1u32, 2, 10] {
                    let params = Alg2Params {
                        hcg_fraction: 0.5,
                        total_count: thr_total,
                        max_slots: 6,
                    };
                    for flags in 0..16u32 {
                        let mm: Vec<bool> = (0..4).map(|k| flags >> k & 1 == 1).collect();
                        let got = alg2_hlsa_select(&req, &mm, &params);
                        for k in 0..CELLS {
                            bad += (got[k] != oracle_alg2_cell(&c[k], &h[k], &mm, 0.5, thr_total)) as usize;
                            n += 1;
                        }
                    }
                }
            }
            (bad, n)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    checks.push((
        results.0 == 0,
        format!(
            "HLSA selection: {} mismatches in {} cell decisions",
            results.0, results.1
        ),
    ));

    // α assignment over every C, TC in 0..4.
    let mut alg3_mismatch = 0;
    let mut seen = std::collections::HashSet::new();
    for code in 0..5usize.pow(6) {
        let d: Vec<u32> = (0..6).map(|k| ((code / 5usize.pow(k as u32)) % 5) as u32).collect();
        let c = [d[0], d[1], d[2]];
        let tc = [d[3], d[4], d[5]];
        let got = alg3_alpha_assign(c, tc).map(|a| a.value());
        let want = oracle_alg3(c, tc);
        alg3_mismatch += (got != want) as usize;
        seen.insert(format!("{want:?}"));
    }
    checks.push((
        alg3_mismatch == 0,
        format!("α assignment: {alg3_mismatch} mismatches in {} cases", 5usize.pow(6)),
    ));
    let special = seen.contains("[0.3, 0.5, 0.1]") && seen.contains("[0.5, 0.1, 0.3]");
    checks.push((
        special && seen.len() == 6,
        format!("all {} α orderings reached, both special branches", seen.len()),
    ));
    verdict(3, "scheduler oracle equivalence", &checks);
}

#[test]
fn criterion_04_capacity_bounds() {
    let mut checks = Vec::new();
    let params = SchedulerParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut max_slots, mut max_mr, mut max_sr, mut violations) = (0, 0, 0, 0);
    for _ in 0..20_000 {
        let contents = rng.random_range(1..=15);
        let count: [Vec<u32>; CELLS] =
            std::array::from_fn(|_| (0..contents).map(|_| rng.random_range(0..30)).collect());
        let hcg: [Vec<u32>; CELLS] =
            std::array::from_fn(|i| count[i].iter().map(|&c| rng.random_range(0..=c)).collect());
        let req = RequestMatrix::from_counts(count, hcg).unwrap();
        let lsa = rng.random_range(0..3);
        let d = schedule_lhs(&req, lsa, &params, &mut rng);
        violations += d.validate(&params).is_err() as usize;
        for c in 0..CELLS {
            max_slots = max_slots.max(d.cells[c].len());
            let mr = d.cells[c]
                .iter()
                .filter(|s| matches!(s.kind, SlotKind::Mr { .. }))
                .count();
            let sr: usize = d.cells[c]
                .iter()
                .filter(|s| !matches!(s.kind, SlotKind::Mr { .. }))
                .map(|s| s.kind.services())
                .sum();
            max_mr = max_mr.max(mr);
            max_sr = max_sr.max(sr);
            let own = lsa_subbands(lsa);
            violations += d.cells[c].iter().any(|s| own.contains(&s.subband)) as usize;
        }
    }
    checks.push((
        violations == 0,
        format!("{violations} invalid decisions in 20000 random draws"),
    ));
    checks.push((max_slots <= 6, format!("most HLSA slots in a cell: {max_slots}")));

    // Saturating instances: eight large HCG contents, and six small HCG
    // contents with six large LCG partners.
    let n = 15;
    let mut count = vec![0u32; n];
    let mut hcg = vec![0u32; n];
    for k in 3..11 {
        count[k] = 20;
        hcg[k] = 15;
    }
    for k in 0..3 {
        count[k] = 100;
    }
    let req = RequestMatrix::from_counts([count.clone(), count, vec![0; n]], [hcg.clone(), hcg, vec![0; n]]).unwrap();
    let d = schedule_lhs(&req, 0, &params, &mut rng);
    let mr = d.cells[0]
        .iter()
        .filter(|s| matches!(s.kind, SlotKind::Mr { .. }))
        .count();
    let mut count = vec![0u32; n];
    let mut hcg = vec![0u32; n];
    for k in 0..3 {
        count[k] = 100;
    }
    for k in 3..9 {
        count[k] = 5;
        hcg[k] = 5;
    }
    for k in 9..15 {
        count[k] = 20;
    }
    let req = RequestMatrix::from_counts([count, vec![0; n], vec![0; n]], [hcg, vec![0; n], vec![0; n]]).unwrap();
    let d = schedule_lhs(&req, 0, &params, &mut rng);
    let sr: usize = d.cells[0].iter().map(|s| s.kind.services()).sum();
    max_mr = max_mr.max(mr);
    max_sr = max_sr.max(sr);
    checks.push((
        mr == 6 && max_mr == 6,
        format!("multi-resolution services: saturated {mr}, max seen {max_mr}"),
    ));
    checks.push((
        sr == 12 && max_sr == 12,
        format!("single-resolution services: saturated {sr}, max seen {max_sr}"),
    ));

    let mut all: Vec<usize> = (0..3).flat_map(lsa_subbands).collect();
    all.sort_unstable();
    let partition = all == (0..NUM_SUBBANDS).collect::<Vec<_>>();
    let complements = (0..3).all(|c| {
        let mut v: Vec<usize> = lsa_subbands(c).into_iter().chain(hlsa_subbands(c)).collect();
        v.sort_unstable();
        v == (0..NUM_SUBBANDS).collect::<Vec<_>>()
    });
    checks.push((
        partition && complements,
        "LSA sub-band triples partition the nine sub-bands".into(),
    ));
    verdict(4, "capacity bounds", &checks);
}

#[test]
fn criterion_05_hcg_sweep_trend() {
    let sim = simulator(&[]);
    let (points, _) = hcg_sweep(&sim, HCG_ITERATIONS, SEED).unwrap();
    let mut checks = Vec::new();
    for p in &points {
        let el = p.el.mean();
        if el > 0.2 {
            checks.push((
                p.hcg_fraction > 0.5,
                format!("HCG {:.1}: EL {el:.3} > 0.2", p.hcg_fraction),
            ));
        } else {
            checks.push((
                true,
                format!("HCG {:.1}: EL {el:.3}, BL {:.3}", p.hcg_fraction, p.bl.mean()),
            ));
        }
    }
    let last = points.last().unwrap();
    let best = points.iter().map(|p| p.el.mean()).fold(f64::MIN, f64::max);
    checks.push((
        last.hcg_fraction == 1.0 && last.el.mean() + 3.0 * last.el.std_error() >= best,
        format!("EL at full HCG share {:.3}, best {best:.3}", last.el.mean()),
    ));
    for w in points.windows(2) {
        let (d, se) = w[1].bl.paired_diff(&w[0].bl);
        checks.push((
            d >= -3.0 * se,
            format!(
                "BL {:.1} → {:.1}: change {d:+.3} (3σ {:.3})",
                w[0].hcg_fraction,
                w[1].hcg_fraction,
                3.0 * se
            ),
        ));
    }
    verdict(5, "EL/BL decode vs HCG share", &checks);
}

#[test]
fn criterion_06_distance_profile_trend() {
    let sim = simulator(&[]);
    let prof = distance_profile(&sim, DISTANCE_ITERATIONS, SEED).unwrap();
    let (ad, same) = (0, 1);
    assert_eq!(DistanceProfile::MODES[same].name(), "same_alpha");
    let mut checks = Vec::new();
    for c in 0..CELLS {
        let (d, se) = prof.cells[ad][c].outage.paired_diff(&prof.cells[same][c].outage);
        checks.push((
            d <= 3.0 * se,
            format!("cell {c}: adaptive − same-α outage {d:+.3} (3σ {:.3})", 3.0 * se),
        ));
        let (d, se) = prof.cells[same][c].p_bl_el.paired_diff(&prof.cells[ad][c].p_bl_el);
        checks.push((
            d >= -3.0 * se,
            format!("cell {c}: same-α − adaptive P(BL+EL) {d:+.3} (3σ {:.3})", 3.0 * se),
        ));
    }
    let mut rises = Vec::new();
    for (m, mode) in DistanceProfile::MODES.iter().enumerate() {
        for c in 0..CELLS {
            for b in 1..prof.edges.len() - 1 {
                for (what, prev, cur) in [
                    ("P(BL+EL)", &prof.bins[m][c][b - 1].p_bl_el, &prof.bins[m][c][b].p_bl_el),
                    ("P(BL)", &prof.bins[m][c][b - 1].p_bl, &prof.bins[m][c][b].p_bl),
                ] {
                    let rise = cur.mean() - prev.mean();
                    let se = (cur.std_error().powi(2) + prev.std_error().powi(2)).sqrt();
                    if rise > 3.0 * se {
                        rises.push(format!("{} cell {c} bin {b} {what} +{rise:.3}", mode.name()));
                    }
                }
            }
        }
    }
    checks.push((
        rises.is_empty(),
        if rises.is_empty() {
            "P(BL+EL) and P(BL) non-increasing with distance in every mode and cell".into()
        } else {
            format!("significant rises: {}", rises.join("; "))
        },
    ));
    verdict(6, "decode probability vs distance", &checks);
}

#[test]
fn criterion_07_local_service_split() {
    let (lhs, scptm) = paired();
    let mut checks = Vec::new();
    let hd: Vec<f64> = (0..CELLS)
        .map(|c| metric(lhs, "local_hd", &format!("cell{c}")).mean())
        .collect();
    let sd: Vec<f64> = (0..CELLS)
        .map(|c| metric(lhs, "local_sd", &format!("cell{c}")).mean())
        .collect();
    checks.push((
        hd[1] > hd[2] && hd[2] > hd[0],
        format!(
            "HD ordering cell1 {:.3} > cell2 {:.3} > cell0 {:.3}",
            hd[1], hd[2], hd[0]
        ),
    ));
    for (c, (t_hd, t_sd)) in [(0.43, 0.29), (0.77, 0.0), (0.63, 0.17)].into_iter().enumerate() {
        checks.push((
            within(hd[c], t_hd, 0.10),
            format!("cell {c}: HD {:.3} vs {t_hd} ± 0.10", hd[c]),
        ));
        checks.push((
            within(sd[c], t_sd, 0.10),
            format!("cell {c}: SD {:.3} vs {t_sd} ± 0.10", sd[c]),
        ));
    }
    for c in 0..CELLS {
        let pop = format!("cell{c}");
        let (d, se) = metric(lhs, "local_outage", &pop).paired_diff(metric(scptm, "local_outage", &pop));
        checks.push((
            d < -3.0 * se,
            format!(
                "cell {c}: outage LHS {:.3} vs baseline {:.3}, difference {d:+.3} (3σ {:.3})",
                metric(lhs, "local_outage", &pop).mean(),
                metric(scptm, "local_outage", &pop).mean(),
                3.0 * se
            ),
        ));
    }
    verdict(7, "local service HD/SD split", &checks);
}

#[test]
fn criterion_08_multi_resolution_hyper_local() {
    let (lhs, scptm) = paired();
    let s_hd = metric(scptm, "mr_hd", "cell0");
    let (l_hd, l_sd) = (metric(lhs, "mr_hd", "cell0"), metric(lhs, "mr_sd", "cell0"));
    let served = sum_metric(l_hd, l_sd);
    let (d, se) = served.paired_diff(s_hd);
    let checks = vec![
        (
            within(s_hd.mean(), 0.50, 0.10),
            format!("baseline HD {:.3} vs 0.50 ± 0.10", s_hd.mean()),
        ),
        (
            within(l_hd.mean(), 0.36, 0.10),
            format!("LHS HD {:.3} vs 0.36 ± 0.10", l_hd.mean()),
        ),
        (
            within(l_sd.mean(), 0.36, 0.10),
            format!("LHS SD {:.3} vs 0.36 ± 0.10", l_sd.mean()),
        ),
        (
            d > 3.0 * se,
            format!(
                "LHS served {:.3} − baseline HD {:.3} = {d:+.3} (3σ {:.3})",
                served.mean(),
                s_hd.mean(),
                3.0 * se
            ),
        ),
    ];
    verdict(8, "multi-resolution hyper-local service", &checks);
}

#[test]
fn criterion_09_single_resolution_multiplexing() {
    let (lhs, scptm) = paired();
    let s1 = metric(scptm, "sr_service1", "cell0").mean();
    let l1 = metric(lhs, "sr_service1", "cell0").mean();
    let l2 = metric(lhs, "sr_service2", "cell0").mean();
    let mut checks = vec![
        (
            within(s1, 0.58, 0.10),
            format!("baseline service 1 {s1:.3} vs 0.58 ± 0.10"),
        ),
        (within(l1, 0.50, 0.10), format!("LHS service 1 {l1:.3} vs 0.50 ± 0.10")),
        (within(l2, 0.22, 0.10), format!("LHS service 2 {l2:.3} vs 0.22 ± 0.10")),
    ];
    let sim = simulator(&[]);
    let (points, _) = drop_radius_sweep(&sim, RADIUS_ITERATIONS, SEED).unwrap();
    for p in &points {
        let (d, se) = p.lhs.paired_diff(&p.scptm);
        checks.push((
            d >= -3.0 * se,
            format!(
                "drop radius {:.1}: services per cell LHS {:.2} vs baseline {:.2} (3σ {:.2})",
                p.drop_radius_fraction,
                p.lhs.mean(),
                p.scptm.mean(),
                3.0 * se
            ),
        ));
    }
    verdict(9, "single-resolution multiplexing and services per cell", &checks);
}

#[test]
fn criterion_10_determinism_and_invariants() {
    let mut checks = Vec::new();
    let small = [
        "drop.users_per_cell=12",
        "engine.ttis=20",
        "linkchar.blocks_per_point=200",
        "linkchar.awgn_grid=0:20:4",
        "linkchar.rayleigh_grid=0:40:8",
    ];
    let sim = simulator(&small);
    let in_pool = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let lhs = sim.run(Scheme::Lhs, 2, 5).unwrap().to_table();
            let scptm = sim.run(Scheme::Scptm, 2, 5).unwrap().to_table();
            let mut cfg = RunConfig::default();
            for o in &small {
                cfg.apply_assignment(o).unwrap();
            }
            let curves = LinkTable::simulate(&cfg.settings().unwrap().linkchar)
                .unwrap()
                .to_cache_string();
            (lhs, scptm, curves)
        })
    };
    let one = in_pool(1);
    let four = in_pool(4);
    checks.push((
        one == four,
        "reports and link curves identical on 1 and 4 threads".into(),
    ));

    let (lhs, scptm) = paired();
    let mut worst = 0f64;
    for r in [lhs, scptm] {
        for m in r.metrics.iter().filter(|m| m.name.ends_with("_hd")) {
            let prefix = m.name.trim_end_matches("_hd");
            let sd = metric(r, &format!("{prefix}_sd"), &m.population);
            let out = metric(r, &format!("{prefix}_outage"), &m.population);
            for i in 0..m.samples.len() {
                worst = worst.max((m.samples[i] + sd.samples[i] + out.samples[i] - 1.0).abs());
                let in_range = [m.samples[i], sd.samples[i], out.samples[i]]
                    .iter()
                    .all(|x| (0.0..=1.0).contains(x));
                worst = worst.max(if in_range { 0.0 } else { 1.0 });
            }
        }
    }
    checks.push((
        worst <= 1e-12,
        format!("HD + SD + outage = 1 in every population (max error {worst:.1e})"),
    ));

    let mut energy = 0f64;
    let mut round_trip = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for k in 0..=10 {
        let g = geometry_from_alpha(HmAlpha::new(0.05 * k as f64).unwrap());
        let e = g.points().iter().map(|p| p.norm_sqr()).sum::<f64>() / 16.0;
        energy = energy.max((e - 1.0).abs());
    }
    for a in [0.1, 0.3, 0.5] {
        let g = geometry_from_alpha(HmAlpha::new(a).unwrap());
        for bits in LayeredBits::all() {
            let h = Complex64::from_polar(rng.random_range(0.1..3.0), rng.random_range(0.0..6.3));
            round_trip += (demap_ml(h * g.point(bits), &g, h).unwrap() != bits) as usize;
        }
    }
    let g = geometry_from_alpha(HmAlpha::UNIFORM);
    let pts: Vec<(usize, Complex64)> = LayeredBits::all().map(|b| (b.index(), g.point(b))).collect();
    let mut gray_ok = true;
    for &(i, p) in &pts {
        let dmin = pts
            .iter()
            .filter(|(j, _)| *j != i)
            .map(|(_, o)| (p - o).norm())
            .fold(f64::MAX, f64::min);
        for &(j, o) in pts.iter().filter(|(j, _)| *j != i) {
            if (p - o).norm() < dmin + 1e-9 {
                gray_ok &= (i ^ j).count_ones() == 1;
            }
        }
    }
    checks.push((
        energy <= 1e-12,
        format!("unit mean energy on the α grid (max error {energy:.1e})"),
    ));
    checks.push((
        gray_ok,
        "nearest neighbours of the uniform constellation differ in one bit".into(),
    ));
    checks.push((round_trip == 0, format!("noise-free round trip: {round_trip} errors")));
    verdict(10, "determinism and invariants", &checks);
}
