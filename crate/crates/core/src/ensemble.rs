//! Sampling and time evolution of TLS ensembles: steady state, post-CABS
//! frequency jitter and thermal-cycle reset.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, DeviceParams, TlsParams};
use crate::rng;
use crate::units::{GHZ, MHZ, UM3};

/// Law used to draw p_z, in e·Å.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DipoleDist {
    Fixed { value: f64 },
    Uniform { lo: f64, hi: f64 },
    TruncatedNormal { mean: f64, sd: f64, lo: f64, hi: f64 },
}

impl Default for DipoleDist {
    fn default() -> Self {
        DipoleDist::TruncatedNormal {
            mean: 0.49,
            sd: 0.15,
            lo: 0.05,
            hi: 1.0,
        }
    }
}

impl DipoleDist {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            DipoleDist::Fixed { value } => value > 0.0,
            DipoleDist::Uniform { lo, hi } => lo >= 0.0 && hi > lo,
            DipoleDist::TruncatedNormal { mean, sd, lo, hi } => {
                sd > 0.0 && lo >= 0.0 && hi > lo && mean.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid dipole distribution {self:?}")))
        }
    }

    /// Largest value the law can produce.
    pub fn upper(&self) -> f64 {
        match *self {
            DipoleDist::Fixed { value } => value,
            DipoleDist::Uniform { hi, .. } | DipoleDist::TruncatedNormal { hi, .. } => hi,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            DipoleDist::Fixed { value } => value,
            DipoleDist::Uniform { lo, hi } => rng.random_range(lo..hi),
            DipoleDist::TruncatedNormal { mean, sd, lo, hi } => {
                let normal = Normal::new(mean, sd).expect("validated sd");
                loop {
                    let x = normal.sample(rng);
                    if (lo..=hi).contains(&x) {
                        return x;
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    /// Target density, TLS/(μm³·GHz).
    pub p0_target: f64,
    /// Log-uniform sampling band for Δ0, Hz.
    pub delta0_band: [f64; 2],
    /// Uniform sampling band for Δ, Hz.
    pub delta_band: [f64; 2],
    pub dipole_dist: DipoleDist,
    /// Full TLS linewidth, Hz.
    pub gamma_default: f64,
    pub seed: u64,
}

/// Lower Δ0 edge of treatment-scenario ensembles, Hz. Members between it
/// and the window sweep their arms through the resonance; their number sets
/// the post-CABS crossing rate, and the edge was fixed against it.
pub const SCENARIO_DELTA0_FLOOR: f64 = 4.13 * GHZ;

/// Linewidth 1/(π T2) for T1 = 1 μs and T2 = 2 T1.
pub const GAMMA_DEFAULT: f64 = 1.0 / (std::f64::consts::PI * 2.0e-6);

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self::for_sweep(&DeviceParams::default(), 50e-3)
    }
}

impl EnsembleSpec {
    /// Spec whose Δ band exactly covers every vertex reachable by a sweep
    /// of maximum |bias| `v_max`. Δ0 stays within 12 MHz of the bare
    /// resonance, so nearly every member is either a visible hyperbola or
    /// out of reach.
    pub fn for_sweep(device: &DeviceParams, v_max: f64) -> Self {
        let dipole_dist = DipoleDist::default();
        let reach = model::tuning_rate(dipole_dist.upper(), device) * v_max.abs();
        EnsembleSpec {
            p0_target: 75.0,
            delta0_band: [4.188 * GHZ, 4.212 * GHZ],
            delta_band: [-reach, reach],
            dipole_dist,
            gamma_default: GAMMA_DEFAULT,
            seed: 0,
        }
    }

    /// `for_sweep` with Δ0 extended down to the scenario floor.
    pub fn for_scenario(device: &DeviceParams, v_max: f64) -> Self {
        let base = Self::for_sweep(device, v_max);
        EnsembleSpec {
            delta0_band: [SCENARIO_DELTA0_FLOOR, base.delta0_band[1]],
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.delta0_band;
        if !(a > 0.0 && b > a && b.is_finite()) {
            return Err(Error::Config(format!("delta0_band {:?} must be positive and non-empty", self.delta0_band)));
        }
        let [c, d] = self.delta_band;
        if !(d > c && c.is_finite() && d.is_finite()) {
            return Err(Error::Config(format!("delta_band {:?} must be non-empty", self.delta_band)));
        }
        if !(self.p0_target >= 0.0 && self.p0_target.is_finite()) {
            return Err(Error::Config("p0_target must be >= 0".into()));
        }
        if !(self.gamma_default > 0.0) {
            return Err(Error::Config("gamma_default must be > 0".into()));
        }
        self.dipole_dist.validate()
    }

    /// Measure of the sampled (Δ, Δ0) region under the density P0/Δ0, in Hz.
    /// Multiplied by P0·V_T it gives the expected member count.
    pub fn tls_band_measure(&self) -> f64 {
        let [a, b] = self.delta0_band;
        (self.delta_band[1] - self.delta_band[0]) * (b / a).ln()
    }

    pub fn expected_count(&self, device: &DeviceParams) -> f64 {
        self.p0_target * (device.v_total / UM3) * (self.tls_band_measure() / GHZ)
    }
}

/// Timescales of the post-CABS jump process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JitterParams {
    /// Mean exponential dwell between jumps, s.
    pub tau_dwell: f64,
    /// Offsets are drawn uniformly from ±width, Hz.
    pub width: f64,
}

impl Default for JitterParams {
    fn default() -> Self {
        JitterParams {
            tau_dwell: 180.0,
            width: 50.0 * MHZ,
        }
    }
}

impl JitterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_dwell > 0.0 && self.width >= 0.0) {
            return Err(Error::Config(format!("invalid jitter parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Steady,
    Jitter,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JitterState {
    /// Current frequency offset, Hz.
    pub offset: f64,
    /// Absolute time of the next jump, s.
    pub next_jump: f64,
    /// Jumps drawn since the current CABS epoch began.
    pub jumps: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CabsProtocol {
    /// Pulse amplitude, V.
    pub amplitude: f64,
    pub pulse_s: f64,
    pub dwell_s: f64,
    pub repetitions: u64,
    /// Stage temperature during the treatment, K.
    pub stage_temp: f64,
}

impl Default for CabsProtocol {
    fn default() -> Self {
        CabsProtocol {
            amplitude: 10.0,
            pulse_s: 10.0,
            dwell_s: 10.0,
            repetitions: 2800,
            stage_temp: 0.01,
        }
    }
}

impl CabsProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.pulse_s > 0.0 && self.dwell_s > 0.0 && self.repetitions > 0) {
            return Err(Error::Config(format!("invalid CABS protocol {self:?}")));
        }
        if !(self.stage_temp >= 0.0) {
            return Err(Error::Argument("stage temperature must be >= 0 K".into()));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.repetitions as f64 * (self.pulse_s + self.dwell_s)
    }
}

/// Peak temperature above which a thermal excursion restores the steady state.
pub const RESET_TEMPERATURE: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TlsEnsemble {
    pub members: Vec<TlsParams>,
    pub mode: Mode,
    pub jitter_state: Vec<JitterState>,
    /// Simulation time, s.
    pub clock: f64,
    pub jitter: JitterParams,
    seed: u64,
    /// Counts CABS applications; selects a fresh jump-draw family each time.
    cabs_epoch: u64,
    /// Counts dipole re-draws.
    redraw_epoch: u64,
}

/// Uniform draw on (0, 1) from a raw 64-bit word.
fn open01(word: u64) -> f64 {
    ((word >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

impl TlsEnsemble {
    /// Wraps explicit members in a Steady ensemble.
    pub fn from_members(members: Vec<TlsParams>, seed: u64) -> Self {
        let n = members.len();
        TlsEnsemble {
            members,
            mode: Mode::Steady,
            jitter_state: vec![JitterState::default(); n],
            clock: 0.0,
            jitter: JitterParams::default(),
            seed,
            cabs_epoch: 0,
            redraw_epoch: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Current frequency offset of every member.
    pub fn offsets(&self) -> Vec<f64> {
        self.jitter_state.iter().map(|j| j.offset).collect()
    }

    /// Draw stream for jump `jump` of member `i`, counter-addressed so that
    /// evolution is independent of how `dt` is chopped.
    fn jump_draws(&self, i: usize, jump: u64) -> (f64, f64) {
        let mut r: ChaCha8Rng = rng::substream(self.seed, "jitter", (self.cabs_epoch << 32) | i as u64);
        r.set_word_pos(u128::from(jump) * 4);
        let dwell = -self.jitter.tau_dwell * open01(r.random::<u64>()).ln();
        let offset = (2.0 * open01(r.random::<u64>()) - 1.0) * self.jitter.width;
        (dwell, offset)
    }

    /// Advances the clock, resampling offsets whose dwell has elapsed.
    pub fn evolve(&mut self, dt: f64) -> Result<()> {
        if !(dt >= 0.0) {
            return Err(Error::Argument(format!("dt must be >= 0, got {dt}")));
        }
        let t = self.clock + dt;
        if self.mode == Mode::Jitter {
            for i in 0..self.members.len() {
                let mut st = self.jitter_state[i];
                while st.next_jump <= t {
                    st.jumps += 1;
                    let (dwell, offset) = self.jump_draws(i, st.jumps);
                    st.offset = offset;
                    st.next_jump += dwell;
                }
                self.jitter_state[i] = st;
            }
        }
        self.clock = t;
        Ok(())
    }

    /// Puts the ensemble into the jitter regime. Static parameters are left
    /// untouched. A treatment at or above the reset temperature anneals as it
    /// goes and leaves the ensemble steady.
    pub fn apply_cabs(&mut self, proto: &CabsProtocol) -> Result<()> {
        proto.validate()?;
        self.clock += proto.duration();
        self.cabs_epoch += 1;
        if proto.stage_temp >= RESET_TEMPERATURE {
            self.reset_steady();
            return Ok(());
        }
        self.mode = Mode::Jitter;
        for i in 0..self.members.len() {
            let (dwell, offset) = self.jump_draws(i, 0);
            self.jitter_state[i] = JitterState {
                offset,
                next_jump: self.clock + dwell,
                jumps: 0,
            };
        }
        Ok(())
    }

    fn reset_steady(&mut self) {
        self.mode = Mode::Steady;
        self.jitter_state.fill(JitterState::default());
    }

    /// Thermal excursion to `peak_temp`. At or above the reset temperature the
    /// ensemble returns to steady state; `redraw` optionally replaces every
    /// dipole with a fresh draw.
    pub fn thermal_cycle(&mut self, peak_temp: f64, redraw: Option<&DipoleDist>) -> Result<()> {
        if !(peak_temp >= 0.0) {
            return Err(Error::Argument(format!("peak temperature must be >= 0 K, got {peak_temp}")));
        }
        if peak_temp < RESET_TEMPERATURE {
            return Ok(());
        }
        self.reset_steady();
        if let Some(dist) = redraw {
            dist.validate()?;
            self.redraw_epoch += 1;
            let mut r = rng::substream(self.seed, "dipole_redraw", self.redraw_epoch);
            for m in &mut self.members {
                m.p_z = dist.sample(&mut r);
            }
        }
        Ok(())
    }

    /// Ageing: scales every dipole by `scale_per_month^months`.
    pub fn age(&mut self, months: f64, scale_per_month: f64) -> Result<()> {
        if !(months >= 0.0 && scale_per_month > 0.0) {
            return Err(Error::Argument("age needs months >= 0 and a positive scale".into()));
        }
        let s = scale_per_month.powf(months);
        for m in &mut self.members {
            m.p_z *= s;
        }
        Ok(())
    }
}

/// Draws a Steady ensemble. Δ0 is log-uniform and Δ uniform, which realises
/// the standard-model density P0/Δ0 over the sampled region.
pub fn sample_ensemble(spec: &EnsembleSpec, device: &DeviceParams) -> Result<TlsEnsemble> {
    spec.validate()?;
    device.validate()?;
    let n = spec.expected_count(device).round() as usize;
    let mut r = rng::stream(spec.seed, "ensemble");
    let (la, lb) = (spec.delta0_band[0].ln(), spec.delta0_band[1].ln());
    let members = (0..n)
        .map(|_| {
            let delta0 = r.random_range(la..lb).exp();
            let delta = r.random_range(spec.delta_band[0]..spec.delta_band[1]);
            let p_z = spec.dipole_dist.sample(&mut r);
            TlsParams::new(delta0, delta, p_z, spec.gamma_default)
        })
        .collect();
    Ok(TlsEnsemble::from_members(members, spec.seed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibleTls {
    pub index: usize,
    pub tls: TlsParams,
    /// Biases inside the sweep where the TLS crosses the band centre.
    pub crossings: Vec<f64>,
    /// Whether Δ0 lies inside the frequency band.
    pub vertex_in_band: bool,
}

/// Members whose frequency enters `f_band` somewhere in `v_range`.
pub fn visible_subset(
    ens: &TlsEnsemble,
    device: &DeviceParams,
    f_band: [f64; 2],
    v_range: [f64; 2],
) -> Vec<VisibleTls> {
    let [v0, v1] = v_range;
    let f_mid = 0.5 * (f_band[0] + f_band[1]);
    let mut out = Vec::new();
    for (index, tls) in ens.members.iter().enumerate() {
        let f_at = |v: f64| model::tls_frequency(tls, model::gate_field(v, device));
        let (a, b) = (f_at(v0), f_at(v1));
        let mut f_lo = a.min(b);
        let f_hi = a.max(b);
        if let Some(vv) = tls.vertex_bias(device) {
            if (v0..=v1).contains(&vv) {
                f_lo = tls.delta0;
            }
        }
        if f_hi < f_band[0] || f_lo > f_band[1] {
            continue;
        }
        let crossings = model::resonance_biases(tls, f_mid, device)
            .unwrap_or_default()
            .into_iter()
            .filter(|v| (v0..=v1).contains(v))
            .collect();
        out.push(VisibleTls {
            index,
            tls: *tls,
            crossings,
            vertex_in_band: (f_band[0]..=f_band[1]).contains(&tls.delta0),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(seed: u64) -> EnsembleSpec {
        EnsembleSpec { seed, ..EnsembleSpec::default() }
    }

    #[test]
    fn zero_density_is_empty() {
        let s = EnsembleSpec { p0_target: 0.0, ..spec(1) };
        assert!(sample_ensemble(&s, &DeviceParams::default()).unwrap().is_empty());
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = DeviceParams::default();
        let a = sample_ensemble(&spec(3), &d).unwrap();
        let b = sample_ensemble(&spec(3), &d).unwrap();
        assert_eq!(a, b);
        let c = sample_ensemble(&spec(4), &d).unwrap();
        assert_ne!(a.members, c.members);
    }

    #[test]
    fn empty_band_rejected() {
        let s = EnsembleSpec { delta0_band: [4e9, 4e9], ..spec(1) };
        assert!(matches!(sample_ensemble(&s, &DeviceParams::default()), Err(Error::Config(_))));
    }

    #[test]
    fn visible_single_tls() {
        let d = DeviceParams::default();
        let t = TlsParams::new(4.0 * GHZ, 0.0, 0.5, 1e5);
        let ens = TlsEnsemble::from_members(vec![t], 0);
        let band = [4.2 * GHZ - 6.0 * MHZ, 4.2 * GHZ + 6.0 * MHZ];
        let vis = visible_subset(&ens, &d, band, [0.0, 50e-3]);
        assert_eq!(vis.len(), 1);
        assert_eq!(vis[0].crossings.len(), 1);
        assert!(!vis[0].vertex_in_band);
        let far = TlsParams::new(5.0 * GHZ, 0.0, 0.0, 1e5);
        let ens = TlsEnsemble::from_members(vec![far], 0);
        assert!(visible_subset(&ens, &d, band, [0.0, 50e-3]).is_empty());
    }

    #[test]
    fn treatments_preserve_members() {
        let d = DeviceParams::default();
        let mut e = sample_ensemble(&spec(5), &d).unwrap();
        let before = e.members.clone();
        e.apply_cabs(&CabsProtocol::default()).unwrap();
        assert_eq!(e.mode, Mode::Jitter);
        assert_eq!(e.members, before);
        e.evolve(3600.0).unwrap();
        e.thermal_cycle(4.0, None).unwrap();
        assert_eq!(e.mode, Mode::Jitter);
        e.thermal_cycle(10.0, None).unwrap();
        assert_eq!(e.mode, Mode::Steady);
        assert!(e.offsets().iter().all(|&o| o == 0.0));
        assert_eq!(e.members, before);
        assert!(e.thermal_cycle(-1.0, None).is_err());
    }

    #[test]
    fn hot_cabs_ends_steady() {
        let mut e = sample_ensemble(&spec(5), &DeviceParams::default()).unwrap();
        let hot = CabsProtocol { stage_temp: 353.0, ..CabsProtocol::default() };
        e.apply_cabs(&hot).unwrap();
        assert_eq!(e.mode, Mode::Steady);
    }

    #[test]
    fn evolution_is_chunking_invariant() {
        let mut a = sample_ensemble(&spec(9), &DeviceParams::default()).unwrap();
        a.apply_cabs(&CabsProtocol::default()).unwrap();
        let mut b = a.clone();
        a.evolve(3600.0).unwrap();
        for _ in 0..36 {
            b.evolve(100.0).unwrap();
        }
        assert_eq!(a.jitter_state, b.jitter_state);
        let mut c = a.clone();
        c.evolve(0.0).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn steady_evolution_keeps_offsets_zero() {
        let mut e = sample_ensemble(&spec(2), &DeviceParams::default()).unwrap();
        e.evolve(1e6).unwrap();
        assert!(e.offsets().iter().all(|&o| o == 0.0));
        assert_eq!(e.clock, 1e6);
    }

    #[test]
    fn aging_scales_dipoles() {
        let t = TlsParams::new(4.0 * GHZ, 0.0, 0.5, 1e5);
        let mut e = TlsEnsemble::from_members(vec![t], 0);
        e.age(5.0, 0.9).unwrap();
        assert!((e.members[0].p_z - 0.5 * 0.9f64.powi(5)).abs() < 1e-15);
    }
}
