//! Hexagonal site layout, LSA partition and user drops.
//!
//! Sites sit on an axial hex lattice. Cells are grouped into mutually adjacent
//! triangles of three; each triangle is one LSA replica and carries a color
//! 0..2 that selects its local sub-band triple, so the same triple repeats
//! every third triangle.

use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::error::{invalid, Result};
use crate::rng::{substream, Stream};

pub const NUM_SUBBANDS: usize = 9;
pub const NUM_LSAS: usize = 3;
pub const CELLS_PER_LSA: usize = 3;
pub const CLUSTER_CELLS: usize = NUM_LSAS * CELLS_PER_LSA;
pub const NUM_SITES: usize = 57;
pub const NUM_CONTENTS_MAX: usize = 64;
/// Users closer than this to their serving site are redrawn.
pub const MIN_DROP_DISTANCE: f64 = 10.0;

const TRIANGLE: [(i32, i32); 3] = [(0, 0), (1, 0), (0, 1)];
/// Triangle translates forming the measured cluster, one per LSA.
const CLUSTER_TRANSLATES: [(i32, i32); 3] = [(0, 0), (1, 1), (-1, -1)];

#[derive(Debug, Clone, PartialEq)]
pub struct CellSite {
    pub id: usize,
    pub q: i32,
    pub r: i32,
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    /// LSA color (0..3) of the triangle the site belongs to.
    pub color: usize,
    /// Position of the site inside its triangle (0..3).
    pub corner: usize,
    /// Index 0..9 for cells of the measured cluster.
    pub cluster_index: Option<usize>,
    /// Hex ring distance to the nearest cluster cell (0 for cluster cells).
    pub tier: u32,
}

impl CellSite {
    /// Center-LSA cell at the same triangle corner; unpopulated sites copy its load.
    pub fn replica_of(&self) -> usize {
        self.corner
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lsa {
    pub id: usize,
    pub cells: [usize; CELLS_PER_LSA],
    /// Zero-based sub-band indices (f1 is 0).
    pub subbands: [usize; 3],
}

#[derive(Debug, Clone)]
pub struct Deployment {
    pub isd: f64,
    pub sites: Vec<CellSite>,
    pub lsas: Vec<Lsa>,
}

fn hex_distance(a: (i32, i32), b: (i32, i32)) -> u32 {
    let dq = a.0 - b.0;
    let dr = a.1 - b.1;
    ((dq.abs() + dr.abs() + (dq + dr).abs()) / 2) as u32
}

/// Color and corner of the triangle containing hex (q, r).
fn triangle_of(q: i32, r: i32) -> (usize, usize) {
    let corner = (q - r).rem_euclid(3) as usize;
    let (oq, or) = TRIANGLE[corner];
    let (tq, tr) = (q - oq, r - or);
    // Translate = a·(1,1) + b·(2,−1).
    let b = (tq - tr) / 3;
    let a = tr + b;
    ((a - b).rem_euclid(3) as usize, corner)
}

pub fn lsa_subbands(color: usize) -> [usize; 3] {
    [3 * color, 3 * color + 1, 3 * color + 2]
}

/// The six sub-bands a cell of the given color uses for hyper-local content.
pub fn hlsa_subbands(color: usize) -> [usize; 6] {
    let mut out = [0; 6];
    let mut k = 0;
    for sb in 0..NUM_SUBBANDS {
        if sb / 3 != color {
            out[k] = sb;
            k += 1;
        }
    }
    out
}

impl Deployment {
    /// Builds the 57-site layout: the 9-cell cluster, every site within two
    /// rings of it, and the nearest remaining sites up to 57.
    pub fn build(isd: f64) -> Result<Self> {
        if !(isd > 0.0) || !isd.is_finite() {
            return Err(invalid("isd", "must be positive"));
        }
        let cluster: Vec<(i32, i32)> = CLUSTER_TRANSLATES
            .iter()
            .flat_map(|&(tq, tr)| TRIANGLE.iter().map(move |&(oq, or)| (tq + oq, tr + or)))
            .collect();
        let tier_of = |h: (i32, i32)| cluster.iter().map(|&c| hex_distance(c, h)).min().unwrap();
        let centroid = cluster.iter().fold((0.0, 0.0), |acc, &(q, r)| {
            (acc.0 + q as f64 / 9.0, acc.1 + r as f64 / 9.0)
        });
        let pos = |q: f64, r: f64| (isd * (q + r / 2.0), isd * r * 3f64.sqrt() / 2.0);

        let mut candidates: Vec<(i32, i32)> = Vec::new();
        for q in -8..=8 {
            for r in -8..=8 {
                candidates.push((q, r));
            }
        }
        let (cx, cy) = pos(centroid.0, centroid.1);
        candidates.sort_by(|&a, &b| {
            let key = |h: (i32, i32)| {
                let (x, y) = pos(h.0 as f64, h.1 as f64);
                (tier_of(h).min(3), (x - cx).hypot(y - cy))
            };
            let (ta, da) = key(a);
            let (tb, db) = key(b);
            ta.cmp(&tb).then(da.total_cmp(&db)).then(a.cmp(&b))
        });
        // Cluster cells first in LSA order, then the rest.
        let mut order: Vec<(i32, i32)> = cluster.clone();
        order.extend(
            candidates
                .into_iter()
                .filter(|h| !cluster.contains(h))
                .take(NUM_SITES - CLUSTER_CELLS),
        );

        let sites = order
            .iter()
            .enumerate()
            .map(|(id, &(q, r))| {
                let (x, y) = pos(q as f64, r as f64);
                let (color, corner) = triangle_of(q, r);
                CellSite {
                    id,
                    q,
                    r,
                    x,
                    y,
                    radius: isd / 2.0,
                    color,
                    corner,
                    cluster_index: (id < CLUSTER_CELLS).then_some(id),
                    tier: tier_of((q, r)),
                }
            })
            .collect::<Vec<_>>();

        let lsas = (0..NUM_LSAS)
            .map(|k| Lsa {
                id: k,
                cells: [3 * k, 3 * k + 1, 3 * k + 2],
                subbands: lsa_subbands(k),
            })
            .collect();

        Ok(Deployment { isd, sites, lsas })
    }

    pub fn cluster(&self) -> &[CellSite] {
        &self.sites[..CLUSTER_CELLS]
    }

    pub fn lsa_of(&self, cell: usize) -> usize {
        self.sites[cell].color
    }

    /// Sites at the given ring distance from `cell`.
    pub fn neighbors(&self, cell: usize, ring: u32) -> Vec<usize> {
        let c = &self.sites[cell];
        self.sites
            .iter()
            .filter(|s| hex_distance((c.q, c.r), (s.q, s.r)) == ring)
            .map(|s| s.id)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RequestDistribution {
    Uniform,
    Zipf(f64),
}

impl RequestDistribution {
    pub fn probabilities(&self, contents: usize) -> Vec<f64> {
        let w: Vec<f64> = match self {
            RequestDistribution::Uniform => vec![1.0; contents],
            RequestDistribution::Zipf(s) => (1..=contents).map(|k| (k as f64).powf(-s)).collect(),
        };
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserTerminal {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub cell: usize,
    /// Zero-based content index.
    pub content: usize,
}

#[derive(Debug, Clone)]
pub struct DropConfig {
    /// Users are dropped in cluster cells `0..cells`.
    pub cells: usize,
    pub users_per_cell: usize,
    pub drop_radius_fraction: f64,
    pub contents: usize,
    pub distribution: RequestDistribution,
}

fn sample_index<R: Rng>(rng: &mut R, cdf: &[f64]) -> usize {
    let u: f64 = rng.random();
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

/// Drops users uniformly over a disk around each populated cluster site.
pub fn drop_users(dep: &Deployment, cfg: &DropConfig, seed: u64, iteration: u64) -> Result<Vec<UserTerminal>> {
    if !(cfg.drop_radius_fraction > 0.0 && cfg.drop_radius_fraction <= 1.0) {
        return Err(invalid("drop_radius_fraction", "must lie in (0, 1]"));
    }
    if cfg.cells == 0 || cfg.cells > CLUSTER_CELLS {
        return Err(invalid("cells", format!("must lie in 1..={CLUSTER_CELLS}")));
    }
    if cfg.contents == 0 || cfg.contents > NUM_CONTENTS_MAX {
        return Err(invalid("contents", format!("must lie in 1..={NUM_CONTENTS_MAX}")));
    }
    let probs = cfg.distribution.probabilities(cfg.contents);
    let cdf: Vec<f64> = probs
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let mut users = Vec::with_capacity(cfg.users_per_cell * CLUSTER_CELLS);
    for site in &dep.cluster()[..cfg.cells] {
        let radius = site.radius * cfg.drop_radius_fraction;
        if radius <= MIN_DROP_DISTANCE {
            return Err(invalid(
                "drop_radius_fraction",
                "drop disk smaller than the minimum distance",
            ));
        }
        let mut rng = substream(seed, Stream::Drop, &[iteration, site.id as u64]);
        let angle = Uniform::new(0.0, std::f64::consts::TAU).expect("valid range");
        for _ in 0..cfg.users_per_cell {
            let d = loop {
                let d = radius * rng.random::<f64>().sqrt();
                if d >= MIN_DROP_DISTANCE {
                    break d;
                }
            };
            let phi = angle.sample(&mut rng);
            users.push(UserTerminal {
                id: users.len(),
                x: site.x + d * phi.cos(),
                y: site.y + d * phi.sin(),
                cell: site.id,
                content: sample_index(&mut rng, &cdf),
            });
        }
    }
    Ok(users)
}
