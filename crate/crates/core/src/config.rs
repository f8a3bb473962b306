//! Run configuration loaded from TOML, with named sections and initial-data generators.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{Bump, StabilityConfig};
use crate::engine::{EngineConfig, PiecewiseConstant, ShiftConfig};
use crate::error::{Error, Result};
use crate::system::{Family, IsentropicEuler, State, StateBox, SystemParams};
use crate::wavecurves::{forward_wave_curve, RiemannOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub gamma: f64,
    pub state_box: StateBox,
    /// Replaces the standard Riemann-invariant coefficient.
    pub c1: Option<f64>,
    pub inv_bound: Option<f64>,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            gamma: 2.0,
            state_box: StateBox::default(),
            c1: None,
            inv_bound: None,
        }
    }
}

impl SystemSection {
    pub fn build(&self) -> Result<IsentropicEuler> {
        let mut p = SystemParams::new(self.gamma, self.state_box).map_err(|e| e.context("system"))?;
        if let Some(c1) = self.c1 {
            p.c1 = c1;
        }
        if let Some(b) = self.inv_bound {
            p.inv_bound = b;
        }
        IsentropicEuler::new(p).map_err(|e| e.context("system"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineSection {
    pub delta_nu: f64,
    pub eps_nu: f64,
    pub kappa: f64,
    pub shift: ShiftConfig,
    pub max_events: usize,
    pub tv_cap: f64,
    pub window_margin: f64,
    pub riemann: RiemannOptions,
    /// Final time of `evolve`.
    pub t_end: f64,
    /// Number of evenly spaced snapshots written by `evolve`, the final time included.
    pub checkpoints: usize,
}

impl Default for EngineSection {
    fn default() -> Self {
        let e = EngineConfig::default();
        EngineSection {
            delta_nu: e.delta_nu,
            eps_nu: e.eps_nu,
            kappa: e.kappa,
            shift: e.shift,
            max_events: e.max_events,
            tv_cap: e.tv_cap,
            window_margin: e.window_margin,
            riemann: e.riemann,
            t_end: 1.0,
            checkpoints: 4,
        }
    }
}

impl EngineSection {
    pub fn engine_config(&self, weight_c: Option<f64>) -> EngineConfig {
        EngineConfig {
            delta_nu: self.delta_nu,
            eps_nu: self.eps_nu,
            kappa: self.kappa,
            shift: self.shift,
            max_events: self.max_events,
            tv_cap: self.tv_cap,
            window_margin: self.window_margin,
            monitor_weight_c: weight_c,
            riemann: self.riemann,
        }
    }
}

/// Initial data: an explicit list or a named generator. States are `[rho, mom]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSpec {
    Piecewise {
        breakpoints: Vec<f64>,
        states: Vec<[f64; 2]>,
    },
    SingleShock {
        left: [f64; 2],
        family: u8,
        strength: f64,
        #[serde(default)]
        at: f64,
    },
    SingleRarefaction {
        left: [f64; 2],
        family: u8,
        /// Magnitude of the (negative) wave strength.
        strength: f64,
        #[serde(default)]
        at: f64,
    },
    RandomBv {
        base: [f64; 2],
        jumps: usize,
        /// Sum of the absolute wave strengths.
        tv: f64,
        interval: [f64; 2],
        /// Overrides the run seed.
        seed: Option<u64>,
    },
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec::SingleShock {
            left: [1.0, 0.0],
            family: 1,
            strength: 0.1,
            at: 0.0,
        }
    }
}

fn family_of(k: u8) -> Result<Family> {
    match k {
        1 => Ok(Family::One),
        2 => Ok(Family::Two),
        _ => Err(Error::Config(format!("data.family must be 1 or 2, got {k}"))),
    }
}

fn state_of(a: [f64; 2]) -> State {
    State::new(a[0], a[1])
}

impl DataSpec {
    pub fn build(&self, sys: &IsentropicEuler, seed: u64) -> Result<PiecewiseConstant> {
        let data = match self {
            DataSpec::Piecewise { breakpoints, states } => PiecewiseConstant {
                breakpoints: breakpoints.clone(),
                states: states.iter().copied().map(state_of).collect(),
            },
            DataSpec::SingleShock { left, family, strength, at } => {
                if !(*strength >= 0.0) {
                    return Err(Error::Config(format!("data.strength of a shock must be >= 0, got {strength}")));
                }
                let u = state_of(*left);
                let r = forward_wave_curve(sys, u, family_of(*family)?, *strength)?;
                PiecewiseConstant {
                    breakpoints: vec![*at],
                    states: vec![u, r],
                }
            }
            DataSpec::SingleRarefaction { left, family, strength, at } => {
                if !(*strength >= 0.0) {
                    return Err(Error::Config(format!("data.strength of a rarefaction is a magnitude, got {strength}")));
                }
                let u = state_of(*left);
                let r = forward_wave_curve(sys, u, family_of(*family)?, -strength)?;
                PiecewiseConstant {
                    breakpoints: vec![*at],
                    states: vec![u, r],
                }
            }
            DataSpec::RandomBv {
                base,
                jumps,
                tv,
                interval,
                seed: own,
            } => random_bv(sys, state_of(*base), *jumps, *tv, (interval[0], interval[1]), own.unwrap_or(seed))?,
        };
        data.validate().map_err(|e| e.context("data"))?;
        for (k, s) in data.states.iter().enumerate() {
            if !sys.params.state_box.contains(s) {
                return Err(Error::Config(format!("data.states[{k}] = {s} lies outside system.state_box")));
            }
        }
        Ok(data)
    }
}

/// Random piecewise-constant data: `jumps` waves of random family and sign at
/// uniform positions in `interval`, strengths scaled so that their absolute sum is `tv`.
pub fn random_bv(sys: &IsentropicEuler, base: State, jumps: usize, tv: f64, interval: (f64, f64), seed: u64) -> Result<PiecewiseConstant> {
    if jumps == 0 {
        return Err(Error::Config("data.jumps must be at least 1".into()));
    }
    if !(tv >= 0.0) {
        return Err(Error::Config(format!("data.tv must be >= 0, got {tv}")));
    }
    if !(interval.1 > interval.0) {
        return Err(Error::Config("data.interval must be increasing".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut xs: Vec<f64> = (0..jumps).map(|_| rng.gen_range(interval.0..interval.1)).collect();
    xs.sort_by(f64::total_cmp);
    let raw: Vec<(Family, f64)> = (0..jumps)
        .map(|_| {
            let fam = if rng.gen_bool(0.5) { Family::One } else { Family::Two };
            let s = rng.gen_range(0.2..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (fam, s)
        })
        .collect();
    let total: f64 = raw.iter().map(|(_, s)| s.abs()).sum();
    let mut states = vec![base];
    let mut u = base;
    for (fam, s) in raw {
        u = forward_wave_curve(sys, u, fam, s * tv / total)?;
        states.push(u);
    }
    Ok(PiecewiseConstant { breakpoints: xs, states })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WildSection {
    /// Cell size at level 0; level `k` uses `dx / 2^k`.
    pub dx: f64,
    pub cfl: f64,
    pub trace_k: usize,
    pub perturbation: Option<Bump>,
    /// Threshold above which a shock dissipation value counts as positive.
    pub d_tol: f64,
}

impl Default for WildSection {
    fn default() -> Self {
        WildSection {
            dx: 1.0 / 200.0,
            cfl: 0.5,
            trace_k: 2,
            perturbation: None,
            d_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConeSection {
    pub r: f64,
    pub v: Option<f64>,
    /// Final time of `stability` as a fraction of `R / v`.
    pub horizon: f64,
}

impl Default for ConeSection {
    fn default() -> Self {
        ConeSection {
            r: 1.0,
            v: None,
            horizon: 0.5,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightSection {
    /// Weight constant; chosen from the initial functionals when absent.
    pub c: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// One of `eps_nu`, `delta_nu`, `kappa`, `dx`, `l2_norm`, `tv`.
    pub parameter: String,
    pub values: Vec<f64>,
    /// `evolve` or `stability`.
    pub command: String,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            parameter: "eps_nu".into(),
            values: Vec::new(),
            command: "evolve".into(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub level: u32,
    pub out: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub system: SystemSection,
    pub engine: EngineSection,
    pub data: DataSpec,
    pub wild: WildSection,
    pub cone: ConeSection,
    pub weight: WeightSection,
    pub sweep: SweepSection,
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn dx(&self) -> f64 {
        self.wild.dx / f64::from(1u32 << self.run.level.min(20))
    }

    /// Checks every section; the error names the first failing constraint.
    pub fn validate(&self) -> Result<()> {
        let sys = self.system.build()?;
        self.engine_config().validate().map_err(|e| e.context("engine"))?;
        if !(self.engine.t_end > 0.0) {
            return Err(Error::Config(format!("engine.t_end must be positive, got {}", self.engine.t_end)));
        }
        if self.engine.checkpoints == 0 {
            return Err(Error::Config("engine.checkpoints must be at least 1".into()));
        }
        if let Some(c) = self.weight.c {
            if !(c > 0.0) {
                return Err(Error::Config(format!("weight.c must be positive, got {c}")));
            }
        }
        if let Some(v) = self.cone.v {
            if !(v > 0.0) {
                return Err(Error::Config(format!("cone.v must be positive, got {v}")));
            }
        }
        self.stability_config(&PiecewiseConstant::constant(State::new(1.0, 0.0)))
            .validate()?;
        let data = self.data.build(&sys, self.run.seed)?;
        if let Some(c) = self.weight.c {
            let g = crate::engine::FrontSolution::init(&sys, &data, &self.engine_config())
                .map_err(|e| e.context("data"))?
                .glimm();
            let lhs = c * (2.0 * g.l + g.kappa * g.q);
            if lhs > 0.5 {
                return Err(Error::Config(format!(
                    "weight.c = {c} violates C (2 L + kappa Q) <= 1/2 on the initial data ({lhs})"
                )));
            }
        }
        Ok(())
    }

    pub fn engine_config(&self) -> EngineConfig {
        self.engine.engine_config(None)
    }

    pub fn stability_config(&self, data: &PiecewiseConstant) -> StabilityConfig {
        StabilityConfig {
            data: data.clone(),
            bump: self.wild.perturbation,
            engine: self.engine_config(),
            dx: self.dx(),
            cfl: self.wild.cfl,
            r: self.cone.r,
            v: self.cone.v,
            weight_c: self.weight.c,
            horizon: self.cone.horizon,
            trace_k: self.wild.trace_k,
            d_tol: self.wild.d_tol,
        }
    }

    /// Copy with `parameter` set to `value`.
    pub fn with_parameter(&self, parameter: &str, value: f64) -> Result<Self> {
        let mut c = self.clone();
        match parameter {
            "eps_nu" => c.engine.eps_nu = value,
            "delta_nu" => c.engine.delta_nu = value,
            "kappa" => c.engine.kappa = value,
            "dx" => c.wild.dx = value,
            "l2_norm" => match c.wild.perturbation.as_mut() {
                Some(b) => b.l2_norm = value,
                None => return Err(Error::Config("sweep over l2_norm needs wild.perturbation".into())),
            },
            "tv" => match &mut c.data {
                DataSpec::RandomBv { tv, .. } => *tv = value,
                _ => return Err(Error::Config("sweep over tv needs random-bv data".into())),
            },
            other => return Err(Error::Config(format!("unknown sweep parameter {other:?}"))),
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c.system.gamma, 2.0);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = RunConfig::from_toml("[engine]\ndelta = 0.1\n").unwrap_err();
        assert!(e.to_string().contains("delta"), "{e}");
        assert!(RunConfig::from_toml("[nonsense]\n").is_err());
    }

    #[test]
    fn first_failing_constraint_is_named() {
        let e = RunConfig::from_toml("[wild]\ncfl = 0.9\n").unwrap_err();
        assert!(e.to_string().contains("cfl"), "{e}");
        let e = RunConfig::from_toml("[system]\ngamma = 1.0\n").unwrap_err();
        assert!(e.to_string().contains("gamma"), "{e}");
        let e = RunConfig::from_toml("[data]\nkind = \"single-shock\"\nleft = [9.0, 0.0]\nfamily = 1\nstrength = 0.1\n").unwrap_err();
        assert!(e.to_string().contains("state_box"), "{e}");
    }

    #[test]
    fn random_bv_is_seeded_and_capped() {
        let sys = IsentropicEuler::default_gamma2();
        let a = random_bv(&sys, State::new(1.0, 0.0), 8, 0.2, (-1.0, 1.0), 7).unwrap();
        let b = random_bv(&sys, State::new(1.0, 0.0), 8, 0.2, (-1.0, 1.0), 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.states.len(), 9);
        // strengths are arclengths, so the state-space variation is at most their sum
        assert!(a.total_variation() <= 0.2 + 1e-9);
        assert!(a.total_variation() > 0.1);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig::default();
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, back);
    }
}
