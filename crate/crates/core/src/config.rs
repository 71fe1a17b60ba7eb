//! Flat `key = value` run configuration.
//!
//! Values resolve in layers: built-in defaults, then a config file, then
//! command-line overrides. Every key is known up front; anything else is
//! rejected. The resolved key set is written into result headers so a run can
//! be repeated from its own output.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::channel::{ChannelModel, FadingParams, LosRule, PathLossParams, RadioParams, ShadowingParams};
use crate::deployment::{Deployment, DropConfig, RequestDistribution};
use crate::engine::{EngineParams, Fidelity, MrModulation, OuterLoad, PrbDraw, Scheme, Simulator, SweepParams};
use crate::error::{Error, Result};
use crate::hqam::HmAlpha;
use crate::linkchar::{grid, hex, parse_coder, ChannelKind, LinkCharConfig, ThresholdSet};
use crate::scheduler::{Alg2Params, LsaAlphaMode, SchedulerParams, CELLS};

/// Every key with its default, in output order.
pub const KEYS: &[(&str, &str)] = &[
    // Link and system-level parameters.
    ("bandwidth_hz", "10000000"),
    ("carrier_frequency_mhz", "2120"),
    ("fft_size", "1024"),
    ("used_subcarriers", "604"),
    ("subcarrier_spacing", "15000"),
    ("subband_subcarriers", "67"),
    ("cp_length_us", "16.67"),
    ("isd_m", "2000"),
    ("tx_power_dbm", "44"),
    ("antenna_gain_dbi", "8"),
    ("ue_antenna_gain_dbi", "0"),
    ("noise_psd_dbm_hz", "-174"),
    ("noise_figure_db", "6"),
    ("penetration_loss_db", "0"),
    ("tti_ms", "1"),
    ("target_bler", "0.01"),
    ("total_count_threshold", "10"),
    ("hcg_fraction_threshold", "0.5"),
    ("max_doppler_hz", "423"),
    ("shadow_sigma_los_db", "8"),
    ("shadow_sigma_nlos_db", "12"),
    ("shadow_corr_distance_m", "50"),
    ("path_loss.preset", "uma-urllc-a"),
    ("path_loss.los", "uma"),
    ("shadowing.components", "64"),
    ("fading.oscillators", "8"),
    ("fading.faded_interferers", "8"),
    // Users and requests.
    ("drop.users_per_cell", "150"),
    ("drop.radius_fraction", "1"),
    ("drop.contents", "15"),
    ("drop.distribution", "uniform"),
    // Scheduling.
    ("sched.max_slots", "6"),
    ("sched.mr_alpha", "0.3"),
    ("sched.sr_alpha", "0.3"),
    ("sched.lsa_alpha", "adaptive"),
    // Link characterization.
    ("linkchar.coder", "bdd:32"),
    ("linkchar.block_bits", "256"),
    ("linkchar.blocks_per_point", "4000"),
    ("linkchar.seed", "1"),
    ("linkchar.awgn_grid", "-10:46:1"),
    ("linkchar.rayleigh_grid", "-4:84:2"),
    ("linkchar.abstraction", "awgn"),
    // Engine.
    ("engine.ttis", "200"),
    ("engine.symbols_per_tti", "512"),
    ("engine.symbol_subcarriers", "8"),
    ("engine.fidelity", "symbol"),
    ("engine.prb_draw", "per_run"),
    ("engine.mr_modulation", "uniform16qam"),
    ("engine.interference_scale", "1"),
    ("engine.interferer_rings", "2"),
    ("engine.outer_load", "local_only"),
    // Sweeps.
    ("sweep.hcg_points", "0:1:0.1"),
    ("sweep.hcg_alpha", "0.1"),
    ("sweep.distance_bins", "5"),
    ("sweep.same_alpha", "0.5"),
    ("sweep.drop_radius_points", "0.2,0.4,0.6,0.8,1"),
    // Run.
    ("run.scheme", "lhs"),
    ("run.iterations", "10"),
    ("run.seed", "1"),
    ("run.out_dir", "results"),
    ("run.cache", "results/linkchar.cache"),
];

/// Keys that only say where files go; they do not enter the config hash.
const LOCATION_KEYS: [&str; 2] = ["run.out_dir", "run.cache"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            values: KEYS.iter().map(|(_, v)| v.to_string()).collect(),
        }
    }
}

fn index_of(key: &str) -> Option<usize> {
    KEYS.iter().position(|(k, _)| *k == key)
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let i = index_of(key).ok_or_else(|| Error::UnknownKey(key.to_string()))?;
        self.values[i] = value.trim().to_string();
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        index_of(key).map(|i| self.values[i].as_str())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                key: line.to_string(),
                reason: "expected `key = value`".into(),
            })?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_text(&text)
    }

    /// Applies a `key=value` override.
    pub fn apply_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment.split_once('=').ok_or_else(|| Error::Config {
            key: assignment.to_string(),
            reason: "expected `key=value`".into(),
        })?;
        self.set(k.trim(), v)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&'static str, &str)> {
        KEYS.iter().zip(&self.values).map(|((k, _), v)| (*k, v.as_str()))
    }

    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries().filter(|(k, _)| !LOCATION_KEYS.contains(k)) {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        hex(&h.finalize())[..16].to_string()
    }

    /// Header lines for result files: the hash plus every resolved key as `cfg <key>`.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let mut m = vec![("config_hash".to_string(), self.hash())];
        m.extend(self.entries().map(|(k, v)| (format!("cfg {k}"), v.to_string())));
        m
    }

    /// Recovers the config embedded in a result file by [`RunConfig::metadata`].
    pub fn from_metadata(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("# cfg ") {
                cfg.apply_assignment(rest)?;
            }
        }
        Ok(cfg)
    }

    /// Parses and checks every key.
    pub fn settings(&self) -> Result<Settings> {
        Settings::from_config(self)
    }
}

/// Typed view of a [`RunConfig`].
#[derive(Debug)]
pub struct Settings {
    pub radio: RadioParams,
    pub path_loss: PathLossParams,
    pub shadowing: ShadowingParams,
    pub fading: FadingParams,
    pub isd_m: f64,
    pub sched: SchedulerParams,
    pub engine: EngineParams,
    pub linkchar: LinkCharConfig,
    pub scheme: Scheme,
    pub iterations: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub cache: PathBuf,
}

struct Reader<'a>(&'a RunConfig);

fn bad(key: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        reason: reason.into(),
    }
}

impl Reader<'_> {
    fn raw(&self, key: &str) -> &str {
        self.0.get(key).expect("key listed in KEYS")
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<T> {
        let v = self.raw(key);
        v.parse().map_err(|_| bad(key, format!("expected {what}, got `{v}`")))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        let x: f64 = self.parse(key, "a number")?;
        if !x.is_finite() {
            return Err(bad(key, "must be finite"));
        }
        Ok(x)
    }

    fn positive(&self, key: &str) -> Result<f64> {
        let x = self.f64(key)?;
        if x <= 0.0 {
            return Err(bad(key, format!("must be positive, got {x}")));
        }
        Ok(x)
    }

    fn non_negative(&self, key: &str) -> Result<f64> {
        let x = self.f64(key)?;
        if x < 0.0 {
            return Err(bad(key, format!("must be non-negative, got {x}")));
        }
        Ok(x)
    }

    fn count(&self, key: &str, min: usize) -> Result<usize> {
        let n: usize = self.parse(key, "a non-negative integer")?;
        if n < min {
            return Err(bad(key, format!("must be at least {min}, got {n}")));
        }
        Ok(n)
    }

    fn fraction(&self, key: &str, open_low: bool) -> Result<f64> {
        let x = self.f64(key)?;
        let ok = if open_low {
            x > 0.0 && x <= 1.0
        } else {
            (0.0..=1.0).contains(&x)
        };
        if !ok {
            return Err(bad(
                key,
                format!("must lie in {}0, 1], got {x}", if open_low { "(" } else { "[" }),
            ));
        }
        Ok(x)
    }

    fn alpha(&self, key: &str) -> Result<HmAlpha> {
        alpha_value(key, self.f64(key)?)
    }

    fn choice<T>(&self, key: &str, options: &[(&str, T)]) -> Result<T>
    where
        T: Copy,
    {
        let v = self.raw(key);
        options
            .iter()
            .find(|(name, _)| *name == v)
            .map(|(_, t)| *t)
            .ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                bad(key, format!("expected one of {}, got `{v}`", names.join(", ")))
            })
    }

    /// `start:stop:step` or a comma-separated list.
    fn list(&self, key: &str) -> Result<Vec<f64>> {
        let v = self.raw(key);
        let nums = |s: &str| -> Result<Vec<f64>> {
            s.split([',', ':'])
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| bad(key, format!("bad number `{x}`")))
                })
                .collect()
        };
        let out = if v.contains(':') {
            let p = nums(v)?;
            if p.len() != 3 || !(p[2] > 0.0) || p[1] < p[0] {
                return Err(bad(key, "expected start:stop:step with step > 0 and stop ≥ start"));
            }
            grid(p[0], p[1], p[2])
        } else {
            nums(v)?
        };
        if out.is_empty() || out.iter().any(|x| !x.is_finite()) {
            return Err(bad(key, "needs at least one finite value"));
        }
        Ok(out)
    }
}

fn alpha_value(key: &str, x: f64) -> Result<HmAlpha> {
    HmAlpha::new(x).map_err(|_| bad(key, format!("α must lie in [0, 0.5], got {x}")))
}

impl Settings {
    fn from_config(cfg: &RunConfig) -> Result<Self> {
        let r = Reader(cfg);

        let bandwidth = r.positive("bandwidth_hz")?;
        let fft = r.count("fft_size", 1)?;
        let used = r.count("used_subcarriers", 1)?;
        let spacing = r.positive("subcarrier_spacing")?;
        let subband = r.count("subband_subcarriers", 1)?;
        if used > fft {
            return Err(bad("used_subcarriers", format!("{used} exceeds fft_size {fft}")));
        }
        if used as f64 * spacing > bandwidth {
            return Err(bad("used_subcarriers", "occupied band exceeds bandwidth_hz"));
        }
        if subband * crate::deployment::NUM_SUBBANDS > used {
            return Err(bad(
                "subband_subcarriers",
                "nine sub-bands do not fit in the used subcarriers",
            ));
        }
        r.non_negative("cp_length_us")?;
        let penetration = r.f64("penetration_loss_db")?;
        if penetration != 0.0 {
            return Err(bad("penetration_loss_db", "only 0 dB (outdoor users) is modeled"));
        }
        let target_bler = r.f64("target_bler")?;
        if !(target_bler > 0.0 && target_bler < 1.0) {
            return Err(bad("target_bler", "must lie in (0, 1)"));
        }
        let radio = RadioParams {
            carrier_ghz: r.positive("carrier_frequency_mhz")? / 1000.0,
            subcarrier_spacing_hz: spacing,
            used_subcarriers: used,
            subband_subcarriers: subband,
            tx_power_dbm: r.f64("tx_power_dbm")?,
            antenna_gain_dbi: r.f64("antenna_gain_dbi")?,
            ue_antenna_gain_dbi: r.f64("ue_antenna_gain_dbi")?,
            noise_psd_dbm_hz: r.f64("noise_psd_dbm_hz")?,
            noise_figure_db: r.non_negative("noise_figure_db")?,
            tti_s: r.positive("tti_ms")? / 1000.0,
        };

        let preset = r.raw("path_loss.preset");
        let mut path_loss = PathLossParams::preset(preset).ok_or_else(|| {
            bad(
                "path_loss.preset",
                format!("expected one of {}, got `{preset}`", PathLossParams::PRESETS.join(", ")),
            )
        })?;
        path_loss.los_rule = r.choice(
            "path_loss.los",
            &[
                ("uma", LosRule::Uma),
                ("always", LosRule::Always),
                ("never", LosRule::Never),
            ],
        )?;
        let shadowing = ShadowingParams {
            sigma_los_db: r.non_negative("shadow_sigma_los_db")?,
            sigma_nlos_db: r.non_negative("shadow_sigma_nlos_db")?,
            corr_distance_m: r.positive("shadow_corr_distance_m")?,
            components: r.count("shadowing.components", 1)?,
        };
        let (delays_s, powers_db) = FadingParams::ped_b();
        let fading = FadingParams {
            doppler_hz: r.non_negative("max_doppler_hz")?,
            delays_s,
            powers_db,
            oscillators: r.count("fading.oscillators", 1)?,
            faded_interferers: r.count("fading.faded_interferers", 0)?,
        };

        let distribution = match r.raw("drop.distribution") {
            "uniform" => RequestDistribution::Uniform,
            v => match v.strip_prefix("zipf:").map(str::parse::<f64>) {
                Some(Ok(s)) if s >= 0.0 && s.is_finite() => RequestDistribution::Zipf(s),
                _ => {
                    return Err(bad(
                        "drop.distribution",
                        format!("expected uniform or zipf:<s ≥ 0>, got `{v}`"),
                    ))
                }
            },
        };
        let drop = DropConfig {
            cells: CELLS,
            users_per_cell: r.count("drop.users_per_cell", 1)?,
            drop_radius_fraction: r.fraction("drop.radius_fraction", true)?,
            contents: r.count("drop.contents", 1)?,
            distribution,
        };

        let lsa_alpha = {
            let key = "sched.lsa_alpha";
            let v = r.raw(key);
            let parse_list = |s: &str| -> Result<Vec<HmAlpha>> {
                s.split(',')
                    .map(|x| {
                        let x = x.trim().parse::<f64>().map_err(|_| bad(key, format!("bad α `{x}`")))?;
                        alpha_value(key, x)
                    })
                    .collect()
            };
            if v == "adaptive" {
                LsaAlphaMode::Adaptive
            } else if let Some(a) = v.strip_prefix("same:") {
                match parse_list(a)?.as_slice() {
                    [a] => LsaAlphaMode::Same(*a),
                    _ => return Err(bad(key, "same: takes one α")),
                }
            } else if let Some(a) = v.strip_prefix("fixed:") {
                let a = parse_list(a)?;
                let arr: [HmAlpha; CELLS] = a.try_into().map_err(|_| bad(key, "fixed: takes three α values"))?;
                LsaAlphaMode::Fixed(arr)
            } else {
                return Err(bad(
                    key,
                    format!("expected adaptive, same:<α> or fixed:<α0>,<α1>,<α2>, got `{v}`"),
                ));
            }
        };
        let mr_alpha = r.alpha("sched.mr_alpha")?;
        let sr_alpha = r.alpha("sched.sr_alpha")?;
        for (key, a) in [("sched.mr_alpha", mr_alpha), ("sched.sr_alpha", sr_alpha)] {
            if a.is_qpsk() {
                return Err(bad(key, "a multiplexed slot needs α > 0"));
            }
        }
        let max_slots = r.count("sched.max_slots", 0)?;
        if max_slots > crate::deployment::NUM_SUBBANDS - CELLS {
            return Err(bad("sched.max_slots", "a cell has only six HLSA sub-bands"));
        }
        let sched = SchedulerParams {
            alg2: Alg2Params {
                hcg_fraction: r.fraction("hcg_fraction_threshold", false)?,
                total_count: r.parse("total_count_threshold", "a non-negative integer")?,
                max_slots,
            },
            sr_alpha,
            mr_alpha,
            lsa_alpha,
        };

        let coder_text = r.raw("linkchar.coder");
        let coder = parse_coder(coder_text).map_err(|e| bad("linkchar.coder", e))?;
        let block_bits = r.count("linkchar.block_bits", 2)?;
        if block_bits % 2 != 0 {
            return Err(bad("linkchar.block_bits", "must be even (two layer bits per symbol)"));
        }
        let blocks_per_point = r.count("linkchar.blocks_per_point", 100)? as u64;
        let correctable_errors = coder.correctable_errors(block_bits);
        let linkchar = LinkCharConfig {
            alphas: vec![0.0, 0.1, 0.3, 0.5],
            awgn_grid: r.list("linkchar.awgn_grid")?,
            rayleigh_grid: r.list("linkchar.rayleigh_grid")?,
            blocks_per_point,
            block_bits,
            coder,
            seed: r.parse("linkchar.seed", "an unsigned integer")?,
            target_bler,
            abstraction: r.choice(
                "linkchar.abstraction",
                &[
                    ("awgn", ChannelKind::Awgn),
                    ("rayleigh_flat", ChannelKind::RayleighFlat),
                ],
            )?,
        };

        let hcg_points = r.list("sweep.hcg_points")?;
        if hcg_points.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(bad("sweep.hcg_points", "HCG shares must lie in [0, 1]"));
        }
        let drop_radius_points = r.list("sweep.drop_radius_points")?;
        if drop_radius_points.iter().any(|x| !(*x > 0.0 && *x <= 1.0)) {
            return Err(bad("sweep.drop_radius_points", "radius fractions must lie in (0, 1]"));
        }
        let sweep = SweepParams {
            hcg_points,
            hcg_alpha: r.alpha("sweep.hcg_alpha")?,
            distance_bins: r.count("sweep.distance_bins", 1)?,
            same_alpha: r.alpha("sweep.same_alpha")?,
            drop_radius_points,
        };
        let engine = EngineParams {
            drop,
            ttis: r.count("engine.ttis", 1)?,
            symbols_per_tti: r.count("engine.symbols_per_tti", 1)?,
            symbol_subcarriers: r.count("engine.symbol_subcarriers", 1)?,
            block_bits,
            correctable_errors,
            target_bler,
            fidelity: r.choice(
                "engine.fidelity",
                &[("symbol", Fidelity::Symbol), ("threshold", Fidelity::Threshold)],
            )?,
            prb_draw: r.choice(
                "engine.prb_draw",
                &[("per_run", PrbDraw::PerRun), ("per_tti", PrbDraw::PerTti)],
            )?,
            mr_modulation: r.choice(
                "engine.mr_modulation",
                &[
                    ("uniform16qam", MrModulation::Uniform16Qam),
                    ("group_rule", MrModulation::GroupRule),
                ],
            )?,
            interference_scale: r.non_negative("engine.interference_scale")?,
            interferer_rings: r.parse("engine.interferer_rings", "a non-negative integer")?,
            outer_load: r.choice(
                "engine.outer_load",
                &[("local_only", OuterLoad::LocalOnly), ("replica", OuterLoad::Replica)],
            )?,
            sweep,
        };

        let scheme = r.choice("run.scheme", &[("lhs", Scheme::Lhs), ("scptm", Scheme::Scptm)])?;
        Ok(Settings {
            radio,
            path_loss,
            shadowing,
            fading,
            isd_m: r.positive("isd_m")?,
            sched,
            engine,
            linkchar,
            scheme,
            iterations: r.count("run.iterations", 1)?,
            seed: r.parse("run.seed", "an unsigned integer")?,
            out_dir: PathBuf::from(r.raw("run.out_dir")),
            cache: PathBuf::from(r.raw("run.cache")),
        })
    }

    pub fn deployment(&self) -> Result<Deployment> {
        Deployment::build(self.isd_m)
    }

    pub fn channel_model(&self) -> Result<ChannelModel> {
        ChannelModel::new(
            self.radio.clone(),
            self.path_loss.clone(),
            self.shadowing.clone(),
            self.fading.clone(),
        )
    }

    pub fn simulator(&self, thresholds: ThresholdSet) -> Result<Simulator> {
        Simulator::new(
            self.deployment()?,
            self.channel_model()?,
            thresholds,
            self.sched.clone(),
            self.engine.clone(),
        )
    }
}
