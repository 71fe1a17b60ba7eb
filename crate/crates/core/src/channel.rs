//! Path loss, shadowing, fast fading and per-sub-band SINR assembly.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::deployment::{Deployment, UserTerminal, NUM_SUBBANDS};
use crate::error::{invalid, Error, Result};
use crate::rng::{substream, Stream};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const MIN_DISTANCE: f64 = 10.0;

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Radio numerology and power budget.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioParams {
    pub carrier_ghz: f64,
    pub subcarrier_spacing_hz: f64,
    pub used_subcarriers: usize,
    pub subband_subcarriers: usize,
    pub tx_power_dbm: f64,
    pub antenna_gain_dbi: f64,
    pub ue_antenna_gain_dbi: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub tti_s: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            carrier_ghz: 2.12,
            subcarrier_spacing_hz: 15_000.0,
            used_subcarriers: 604,
            subband_subcarriers: 67,
            tx_power_dbm: 44.0,
            antenna_gain_dbi: 8.0,
            ue_antenna_gain_dbi: 0.0,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 6.0,
            tti_s: 1e-3,
        }
    }
}

impl RadioParams {
    /// Share of the gNB power radiated on one sub-band.
    pub fn tx_subband_dbm(&self) -> f64 {
        self.tx_power_dbm + lin_to_db(self.subband_subcarriers as f64 / self.used_subcarriers as f64)
    }

    pub fn noise_subband_dbm(&self) -> f64 {
        self.noise_psd_dbm_hz
            + lin_to_db(self.subband_subcarriers as f64 * self.subcarrier_spacing_hz)
            + self.noise_figure_db
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.subcarrier_spacing_hz > 0.0) {
            return Err(invalid("subcarrier_spacing", "must be positive"));
        }
        if !(self.carrier_ghz > 0.0) {
            return Err(invalid("carrier", "must be positive"));
        }
        if self.subband_subcarriers == 0 || self.subband_subcarriers * NUM_SUBBANDS > self.used_subcarriers {
            return Err(invalid(
                "subband_subcarriers",
                "nine sub-bands must fit in the used subcarriers",
            ));
        }
        if !(self.tti_s > 0.0) {
            return Err(invalid("tti", "must be positive"));
        }
        Ok(())
    }

    /// Signed subcarrier indices (DC excluded) of every sub-band, lowest frequency first.
    pub fn subband_subcarrier_indices(&self) -> Vec<Vec<i64>> {
        let half = (self.used_subcarriers / 2) as i64;
        let all: Vec<i64> = (-half..0).chain(1..=half).collect();
        (0..NUM_SUBBANDS)
            .map(|sb| all[sb * self.subband_subcarriers..(sb + 1) * self.subband_subcarriers].to_vec())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LosRule {
    /// Standard urban-macro LOS probability curve.
    Uma,
    Always,
    Never,
}

/// Urban-macro path loss, coefficients of the form `a + b·log10(d) + c·log10(fc)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLossParams {
    pub h_bs: f64,
    pub h_ut: f64,
    pub los_a: f64,
    pub los_b: f64,
    pub los_c: f64,
    /// Slope beyond the breakpoint distance.
    pub los_far_b: f64,
    pub nlos_a: f64,
    pub nlos_b: f64,
    pub nlos_c: f64,
    pub nlos_h_ut: f64,
    pub los_rule: LosRule,
}

impl PathLossParams {
    pub const PRESETS: [&'static str; 2] = ["uma-urllc-a", "uma-mmtc-a"];

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            // Both test configurations share the urban-macro channel model.
            "uma-urllc-a" | "uma-mmtc-a" => Some(PathLossParams {
                h_bs: 25.0,
                h_ut: 1.5,
                los_a: 28.0,
                los_b: 22.0,
                los_c: 20.0,
                los_far_b: 40.0,
                nlos_a: 13.54,
                nlos_b: 39.08,
                nlos_c: 20.0,
                nlos_h_ut: 0.6,
                los_rule: LosRule::Uma,
            }),
            _ => None,
        }
    }
}

impl Default for PathLossParams {
    fn default() -> Self {
        Self::preset("uma-urllc-a").expect("known preset")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathLoss {
    pub params: PathLossParams,
    pub fc_ghz: f64,
}

impl PathLoss {
    pub fn new(params: PathLossParams, fc_ghz: f64) -> Self {
        PathLoss { params, fc_ghz }
    }

    pub fn breakpoint(&self) -> f64 {
        let p = &self.params;
        4.0 * (p.h_bs - 1.0) * (p.h_ut - 1.0) * self.fc_ghz * 1e9 / SPEED_OF_LIGHT
    }

    fn los_near(&self, d: f64) -> f64 {
        let p = &self.params;
        p.los_a + p.los_b * d.log10() + p.los_c * self.fc_ghz.log10()
    }

    fn los(&self, d: f64) -> f64 {
        let bp = self.breakpoint();
        if d <= bp {
            self.los_near(d)
        } else {
            self.los_near(bp) + self.params.los_far_b * (d / bp).log10()
        }
    }

    fn nlos(&self, d: f64) -> f64 {
        let p = &self.params;
        let nlos = p.nlos_a + p.nlos_b * d.log10() + p.nlos_c * self.fc_ghz.log10() - p.nlos_h_ut * (p.h_ut - 1.5);
        nlos.max(self.los(d))
    }

    /// Path loss in dB at horizontal distance `d` metres.
    pub fn path_loss(&self, d: f64, los: bool) -> Result<f64> {
        if !(d >= MIN_DISTANCE) {
            return Err(Error::DistanceOutOfRange {
                distance: d,
                min: MIN_DISTANCE,
            });
        }
        Ok(if los { self.los(d) } else { self.nlos(d) })
    }

    pub fn los_probability(&self, d: f64) -> f64 {
        match self.params.los_rule {
            LosRule::Always => 1.0,
            LosRule::Never => 0.0,
            LosRule::Uma => {
                if d <= 18.0 {
                    1.0
                } else {
                    18.0 / d + (-d / 63.0).exp() * (1.0 - 18.0 / d)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShadowingParams {
    pub sigma_los_db: f64,
    pub sigma_nlos_db: f64,
    pub corr_distance_m: f64,
    pub components: usize,
}

impl Default for ShadowingParams {
    fn default() -> Self {
        ShadowingParams {
            sigma_los_db: 8.0,
            sigma_nlos_db: 12.0,
            corr_distance_m: 50.0,
            components: 64,
        }
    }
}

/// Zero-mean, unit-variance Gaussian random field with covariance
/// exp(−Δ/corr_distance), built as a spectral sum of random cosines.
#[derive(Debug, Clone)]
pub struct ShadowingField {
    waves: Vec<(f64, f64, f64)>,
    scale: f64,
}

impl ShadowingField {
    pub fn new(params: &ShadowingParams, seed: u64, keys: &[u64]) -> Result<Self> {
        if !(params.corr_distance_m > 0.0) {
            return Err(invalid("corr_distance", "must be positive"));
        }
        if params.components == 0 {
            return Err(invalid("components", "must be positive"));
        }
        let mut rng = substream(seed, Stream::Shadowing, keys);
        // The isotropic spectrum of a 2-D exponential covariance has radial CDF
        // 1 − (1 + k²d²)^(−1/2); sample |k| by inversion.
        let waves = (0..params.components)
            .map(|_| {
                let u: f64 = rng.random();
                let k = ((1.0 / (1.0 - u)).powi(2) - 1.0).sqrt() / params.corr_distance_m;
                let theta = rng.random::<f64>() * TAU;
                let phase = rng.random::<f64>() * TAU;
                (k * theta.cos(), k * theta.sin(), phase)
            })
            .collect();
        Ok(ShadowingField {
            waves,
            scale: (2.0 / params.components as f64).sqrt(),
        })
    }

    pub fn unit(&self, x: f64, y: f64) -> f64 {
        self.scale
            * self
                .waves
                .iter()
                .map(|&(kx, ky, p)| (kx * x + ky * y + p).cos())
                .sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FadingParams {
    pub doppler_hz: f64,
    pub delays_s: Vec<f64>,
    pub powers_db: Vec<f64>,
    pub oscillators: usize,
    /// Strongest interferers per link that get fast fading; the rest contribute mean power.
    pub faded_interferers: usize,
}

impl FadingParams {
    pub fn ped_b() -> (Vec<f64>, Vec<f64>) {
        (
            vec![0.0, 200e-9, 800e-9, 1200e-9, 2300e-9, 3700e-9],
            vec![0.0, -0.9, -4.9, -8.0, -7.8, -23.9],
        )
    }

    /// Tap powers normalized to unit sum.
    pub fn tap_powers(&self) -> Vec<f64> {
        let lin: Vec<f64> = self.powers_db.iter().map(|&p| db_to_lin(p)).collect();
        let total: f64 = lin.iter().sum();
        lin.into_iter().map(|p| p / total).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.doppler_hz >= 0.0) {
            return Err(invalid("doppler", "must be non-negative"));
        }
        if self.delays_s.is_empty() || self.delays_s.len() != self.powers_db.len() {
            return Err(invalid(
                "pdp",
                "delays and powers must be non-empty and of equal length",
            ));
        }
        if self.oscillators == 0 {
            return Err(invalid("oscillators", "must be positive"));
        }
        Ok(())
    }
}

impl Default for FadingParams {
    fn default() -> Self {
        let (delays_s, powers_db) = Self::ped_b();
        FadingParams {
            doppler_hz: 423.0,
            delays_s,
            powers_db,
            oscillators: 8,
            faded_interferers: 8,
        }
    }
}

/// Tapped-delay-line Rayleigh process. Each tap is a sum of sinusoids with
/// complex Gaussian weights and uniformly spread arrival angles, so tap values
/// are exactly Gaussian and the ensemble autocorrelation is J0(2π·fd·τ).
#[derive(Debug, Clone)]
pub struct FadingProcess {
    amplitudes: Vec<Complex64>,
    /// Phase advance per TTI of each oscillator.
    steps: Vec<f64>,
    rotations: Vec<Complex64>,
    phasors: Vec<Complex64>,
    taps: usize,
    oscillators: usize,
    tti: u64,
}

impl FadingProcess {
    pub fn new(params: &FadingParams, tti_s: f64, seed: u64, keys: &[u64]) -> Self {
        let mut rng = substream(seed, Stream::Fading, keys);
        let powers = params.tap_powers();
        let n = params.oscillators;
        let mut amplitudes = Vec::with_capacity(powers.len() * n);
        let mut steps = Vec::with_capacity(powers.len() * n);
        for &p in &powers {
            let s = (p / (2.0 * n as f64)).sqrt();
            for _ in 0..n {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                amplitudes.push(Complex64::new(re * s, im * s));
                let theta = rng.random::<f64>() * TAU;
                steps.push(TAU * params.doppler_hz * theta.cos() * tti_s);
            }
        }
        FadingProcess {
            rotations: steps.iter().map(|&w| Complex64::from_polar(1.0, w)).collect(),
            phasors: amplitudes.clone(),
            amplitudes,
            steps,
            taps: powers.len(),
            oscillators: n,
            tti: 0,
        }
    }

    pub fn tti(&self) -> u64 {
        self.tti
    }

    pub fn advance(&mut self) {
        for (z, r) in self.phasors.iter_mut().zip(&self.rotations) {
            *z *= r;
        }
        self.tti += 1;
    }

    /// Moves the process to an arbitrary TTI.
    pub fn seek(&mut self, tti: u64) {
        if tti == self.tti {
            return;
        }
        if tti == self.tti + 1 {
            self.advance();
            return;
        }
        for ((z, a), w) in self.phasors.iter_mut().zip(&self.amplitudes).zip(&self.steps) {
            *z = a * Complex64::from_polar(1.0, w * tti as f64);
        }
        self.tti = tti;
    }

    pub fn taps(&self, out: &mut [Complex64]) {
        for (l, chunk) in self.phasors.chunks(self.oscillators).enumerate().take(self.taps) {
            out[l] = chunk.iter().sum();
        }
    }

    pub fn tap_vec(&self) -> Vec<Complex64> {
        let mut v = vec![Complex64::default(); self.taps];
        self.taps(&mut v);
        v
    }
}

/// Precomputed frequency-averaging kernels of the sub-bands.
#[derive(Debug, Clone)]
pub struct SubbandKernel {
    taps: usize,
    /// Per sub-band, row-major taps×taps matrix W[l][m] = mean_k exp(−j2πf_k(τ_l−τ_m)).
    averaging: Vec<Vec<Complex64>>,
    /// Per sub-band, row-major subcarriers×taps phasors exp(−j2π f_k τ_l).
    phasors: Vec<Vec<Complex64>>,
}

impl SubbandKernel {
    pub fn new(radio: &RadioParams, delays_s: &[f64]) -> Self {
        let taps = delays_s.len();
        let idx = radio.subband_subcarrier_indices();
        let mut averaging = Vec::with_capacity(NUM_SUBBANDS);
        let mut phasors = Vec::with_capacity(NUM_SUBBANDS);
        for sc in &idx {
            let freqs: Vec<f64> = sc.iter().map(|&k| k as f64 * radio.subcarrier_spacing_hz).collect();
            let mut w = vec![Complex64::default(); taps * taps];
            for l in 0..taps {
                for m in 0..taps {
                    let dt = delays_s[l] - delays_s[m];
                    let sum: Complex64 = freqs.iter().map(|&f| Complex64::from_polar(1.0, -TAU * f * dt)).sum();
                    w[l * taps + m] = sum / freqs.len() as f64;
                }
            }
            averaging.push(w);
            phasors.push(
                freqs
                    .iter()
                    .flat_map(|&f| delays_s.iter().map(move |&t| Complex64::from_polar(1.0, -TAU * f * t)))
                    .collect(),
            );
        }
        SubbandKernel {
            taps,
            averaging,
            phasors,
        }
    }

    /// Mean of |H(f)|² over the sub-band's subcarriers.
    pub fn gain(&self, taps: &[Complex64], sb: usize) -> f64 {
        let w = &self.averaging[sb];
        let mut acc = 0.0;
        for l in 0..self.taps {
            acc += taps[l].norm_sqr();
            for m in (l + 1)..self.taps {
                acc += 2.0 * (taps[l] * taps[m].conj() * w[l * self.taps + m]).re;
            }
        }
        acc
    }

    pub fn subcarriers(&self, sb: usize) -> usize {
        self.phasors[sb].len() / self.taps
    }

    /// Frequency response on `n` evenly spaced subcarriers of the sub-band
    /// (all of them when `n` is zero or too large).
    pub fn responses(&self, taps: &[Complex64], sb: usize, n: usize, out: &mut Vec<Complex64>) {
        let total = self.subcarriers(sb);
        let n = if n == 0 || n > total { total } else { n };
        out.clear();
        out.extend((0..n).map(|i| {
            let k = (2 * i + 1) * total / (2 * n);
            let e = &self.phasors[sb][k * self.taps..(k + 1) * self.taps];
            taps.iter().zip(e).map(|(h, p)| h * p).sum::<Complex64>()
        }));
    }
}

/// Deterministic per-link large-scale state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeScaleLink {
    pub distance: f64,
    pub los: bool,
    pub path_loss_db: f64,
    pub shadow_db: f64,
    /// Mean received power on one sub-band, before fast fading.
    pub rx_dbm: f64,
}

/// Everything needed to evaluate links of one drop.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    pub radio: RadioParams,
    pub path_loss: PathLoss,
    pub shadowing: ShadowingParams,
    pub fading: FadingParams,
    pub kernel: SubbandKernel,
}

impl ChannelModel {
    pub fn new(
        radio: RadioParams,
        path_loss: PathLossParams,
        shadowing: ShadowingParams,
        fading: FadingParams,
    ) -> Result<Self> {
        radio.validate()?;
        fading.validate()?;
        if !(shadowing.corr_distance_m > 0.0) {
            return Err(invalid("corr_distance", "must be positive"));
        }
        let kernel = SubbandKernel::new(&radio, &fading.delays_s);
        let path_loss = PathLoss::new(path_loss, radio.carrier_ghz);
        Ok(ChannelModel {
            radio,
            path_loss,
            shadowing,
            fading,
            kernel,
        })
    }

    pub fn noise_dbm(&self) -> f64 {
        self.radio.noise_subband_dbm()
    }

    /// One shadowing field per site for a drop.
    pub fn shadow_fields(&self, dep: &Deployment, seed: u64, iteration: u64) -> Result<Vec<ShadowingField>> {
        dep.sites
            .iter()
            .map(|s| ShadowingField::new(&self.shadowing, seed, &[iteration, s.id as u64]))
            .collect()
    }

    /// Large-scale links of one user to every site.
    pub fn user_links(
        &self,
        dep: &Deployment,
        fields: &[ShadowingField],
        user: &UserTerminal,
        seed: u64,
        iteration: u64,
    ) -> Result<Vec<LargeScaleLink>> {
        let base = self.radio.tx_subband_dbm() + self.radio.antenna_gain_dbi + self.radio.ue_antenna_gain_dbi;
        dep.sites
            .iter()
            .map(|s| {
                let distance = s.distance_to(user.x, user.y).max(MIN_DISTANCE);
                let mut rng = substream(seed, Stream::LineOfSight, &[iteration, s.id as u64, user.id as u64]);
                let los = rng.random::<f64>() < self.path_loss.los_probability(distance);
                let path_loss_db = self.path_loss.path_loss(distance, los)?;
                let sigma = if los {
                    self.shadowing.sigma_los_db
                } else {
                    self.shadowing.sigma_nlos_db
                };
                let shadow_db = sigma * fields[s.id].unit(user.x, user.y);
                Ok(LargeScaleLink {
                    distance,
                    los,
                    path_loss_db,
                    shadow_db,
                    rx_dbm: base - path_loss_db - shadow_db,
                })
            })
            .collect()
    }

    /// Large-scale links of every user to every site, indexed `[user][site]`.
    pub fn large_scale(
        &self,
        dep: &Deployment,
        users: &[UserTerminal],
        seed: u64,
        iteration: u64,
    ) -> Result<Vec<Vec<LargeScaleLink>>> {
        let fields = self.shadow_fields(dep, seed, iteration)?;
        users
            .iter()
            .map(|u| self.user_links(dep, &fields, u, seed, iteration))
            .collect()
    }

    pub fn fading_process(&self, seed: u64, iteration: u64, site: usize, user: usize) -> FadingProcess {
        FadingProcess::new(
            &self.fading,
            self.radio.tti_s,
            seed,
            &[iteration, site as u64, user as u64],
        )
    }
}

/// Which sites radiate on each sub-band.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Activity {
    pub transmitters: [Vec<usize>; NUM_SUBBANDS],
}

impl Activity {
    pub fn is_active(&self, sb: usize, site: usize) -> bool {
        self.transmitters[sb].contains(&site)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinrEntry {
    pub signal_dbm: Vec<f64>,
    pub interference_dbm: f64,
    pub noise_dbm: f64,
    pub sinr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SubbandSinr {
    /// Nothing is scheduled for the user on this sub-band.
    Idle,
    Active(SinrEntry),
}

impl SubbandSinr {
    pub fn sinr_db(&self) -> Option<f64> {
        match self {
            SubbandSinr::Idle => None,
            SubbandSinr::Active(e) => Some(e.sinr_db),
        }
    }
}

/// One user's view of the network on one sub-band: which links carry the
/// wanted signal and which interferers are tracked with fast fading.
#[derive(Debug, Clone)]
pub struct LinkSet {
    pub subband: usize,
    pub serving: Vec<usize>,
    pub faded: Vec<usize>,
    /// Summed mean power (mW) of interferers without fast fading.
    pub static_interference_mw: f64,
}

impl LinkSet {
    pub fn new(
        links: &[LargeScaleLink],
        activity: &Activity,
        subband: usize,
        serving: &[usize],
        faded_interferers: usize,
    ) -> Self {
        let mut others: Vec<usize> = activity.transmitters[subband]
            .iter()
            .copied()
            .filter(|s| !serving.contains(s))
            .collect();
        others.sort_by(|&a, &b| links[b].rx_dbm.total_cmp(&links[a].rx_dbm).then(a.cmp(&b)));
        let split = faded_interferers.min(others.len());
        let static_interference_mw = others[split..].iter().map(|&s| db_to_lin(links[s].rx_dbm)).sum();
        LinkSet {
            subband,
            serving: serving.to_vec(),
            faded: others[..split].to_vec(),
            static_interference_mw,
        }
    }
}

/// Fast fading of every link one user observes. Processes are created on
/// first use and kept in step with the user's current TTI.
#[derive(Debug, Clone)]
pub struct UserFading {
    params: FadingParams,
    tti_s: f64,
    seed: u64,
    iteration: u64,
    user: usize,
    tti: u64,
    sites: Vec<usize>,
    processes: Vec<FadingProcess>,
    scratch: Vec<Complex64>,
}

impl UserFading {
    pub fn new(model: &ChannelModel, seed: u64, iteration: u64, user: usize) -> Self {
        UserFading {
            params: model.fading.clone(),
            tti_s: model.radio.tti_s,
            seed,
            iteration,
            user,
            tti: 0,
            sites: Vec::new(),
            processes: Vec::new(),
            scratch: vec![Complex64::default(); model.fading.delays_s.len()],
        }
    }

    pub fn tti(&self) -> u64 {
        self.tti
    }

    pub fn advance(&mut self) {
        self.tti += 1;
    }

    fn load(&mut self, site: usize) {
        let i = match self.sites.binary_search(&site) {
            Ok(i) => i,
            Err(i) => {
                let p = FadingProcess::new(
                    &self.params,
                    self.tti_s,
                    self.seed,
                    &[self.iteration, site as u64, self.user as u64],
                );
                self.sites.insert(i, site);
                self.processes.insert(i, p);
                i
            }
        };
        self.processes[i].seek(self.tti);
        self.processes[i].taps(&mut self.scratch);
    }

    /// Fast-fading power gain of `site` on `sb`.
    pub fn gain(&mut self, kernel: &SubbandKernel, site: usize, sb: usize) -> f64 {
        self.load(site);
        kernel.gain(&self.scratch, sb)
    }

    /// Frequency response of `site` on `n` subcarriers of `sb`.
    pub fn responses(&mut self, kernel: &SubbandKernel, site: usize, sb: usize, n: usize, out: &mut Vec<Complex64>) {
        self.load(site);
        kernel.responses(&self.scratch, sb, n, out);
    }
}

/// Instantaneous SINR of one link set.
pub fn link_sinr(model: &ChannelModel, links: &[LargeScaleLink], set: &LinkSet, fading: &mut UserFading) -> SinrEntry {
    let noise_dbm = model.noise_dbm();
    let signal_dbm: Vec<f64> = set
        .serving
        .iter()
        .map(|&s| links[s].rx_dbm + lin_to_db(fading.gain(&model.kernel, s, set.subband)))
        .collect();
    let mut interference_mw = set.static_interference_mw;
    for &s in &set.faded {
        interference_mw += db_to_lin(links[s].rx_dbm) * fading.gain(&model.kernel, s, set.subband);
    }
    let signal_mw: f64 = signal_dbm.iter().map(|&p| db_to_lin(p)).sum();
    let sinr = signal_mw / (interference_mw + db_to_lin(noise_dbm));
    SinrEntry {
        signal_dbm,
        interference_dbm: lin_to_db(interference_mw),
        noise_dbm,
        sinr_db: lin_to_db(sinr),
    }
}

/// Per-sub-band SINR of one user at the fading state's current TTI.
/// `serving[sb]` lists the sites whose transmission on `sb` the user wants.
pub fn sinr_report(
    model: &ChannelModel,
    links: &[LargeScaleLink],
    activity: &Activity,
    serving: &[Option<Vec<usize>>; NUM_SUBBANDS],
    fading: &mut UserFading,
) -> [SubbandSinr; NUM_SUBBANDS] {
    std::array::from_fn(|sb| match &serving[sb] {
        None => SubbandSinr::Idle,
        Some(s) => {
            let set = LinkSet::new(links, activity, sb, s, model.fading.faded_interferers);
            SubbandSinr::Active(link_sinr(model, links, &set, fading))
        }
    })
}
