//! Approximate Riemann solvers producing piecewise-constant fans of fronts:
//! the accurate solver (shocks plus rarefactions split into sub-fronts) and
//! the simplified solver (incoming strengths summed, the remainder carried by
//! one non-physical front at speed `lambda_hat`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{Family, IsentropicEuler, State, System2x2};
use crate::wavecurves::{forward_wave_curve, rarefaction_curve, shock_curve, solve_riemann, RiemannOptions, Side};

/// Family tag of a front; non-physical fronts sit above both physical families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WaveFamily {
    One,
    Two,
    NonPhysical,
}

impl WaveFamily {
    /// 1, 2 or 3.
    pub fn rank(self) -> u8 {
        match self {
            WaveFamily::One => 1,
            WaveFamily::Two => 2,
            WaveFamily::NonPhysical => 3,
        }
    }

    pub fn physical(self) -> Option<Family> {
        match self {
            WaveFamily::One => Some(Family::One),
            WaveFamily::Two => Some(Family::Two),
            WaveFamily::NonPhysical => None,
        }
    }
}

impl From<Family> for WaveFamily {
    fn from(f: Family) -> Self {
        match f {
            Family::One => WaveFamily::One,
            Family::Two => WaveFamily::Two,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FrontKind {
    Shock,
    Rarefaction,
    NonPhysical,
}

impl FrontKind {
    pub fn label(self) -> &'static str {
        match self {
            FrontKind::Shock => "shock",
            FrontKind::Rarefaction => "rarefaction",
            FrontKind::NonPhysical => "np",
        }
    }
}

/// A straight discontinuity of the approximate solution.
///
/// The front's position is `x0 + speed (t - t0)`; `(t0, x0)` is moved
/// whenever the speed is reassigned.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Front {
    pub id: u64,
    pub family: WaveFamily,
    pub kind: FrontKind,
    /// Signed strength; `|left - right|` for non-physical fronts.
    pub strength: f64,
    pub left: State,
    pub right: State,
    pub birth: (f64, f64),
    pub speed: f64,
    pub t0: f64,
    pub x0: f64,
}

impl Front {
    pub fn position(&self, t: f64) -> f64 {
        self.x0 + self.speed * (t - self.t0)
    }

    pub fn is_physical(&self) -> bool {
        self.kind != FrontKind::NonPhysical
    }

    pub fn is_shock(&self) -> bool {
        self.kind == FrontKind::Shock
    }

    /// Moves the anchor to time `t` and switches to `speed`.
    pub fn reassign_speed(&mut self, t: f64, speed: f64) {
        self.x0 = self.position(t);
        self.t0 = t;
        self.speed = speed;
    }
}

/// Fronts of a fan ordered left to right, with the `n + 1` states around them.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FanResult {
    pub fronts: Vec<Front>,
    pub states: Vec<State>,
}

impl FanResult {
    fn push(&mut self, f: Front) {
        if self.states.is_empty() {
            self.states.push(f.left);
        }
        self.states.push(f.right);
        self.fronts.push(f);
    }
}

/// Speed assigned to a freshly created shock front.
pub trait ShockSpeeds {
    fn shock_speed(&self, fam: Family, left: State, right: State) -> Result<f64>;
}

/// Classical Rankine-Hugoniot speeds.
pub struct RhSpeeds<'a>(pub &'a IsentropicEuler);

impl ShockSpeeds for RhSpeeds<'_> {
    fn shock_speed(&self, fam: Family, left: State, right: State) -> Result<f64> {
        Ok(crate::wavecurves::hugoniot_speed(self.0, left, right, fam))
    }
}

/// Monotone id source shared by everything that creates fronts in one run.
#[derive(Clone, Debug, Default)]
pub struct IdSource(u64);

impl IdSource {
    pub fn starting_at(n: u64) -> Self {
        IdSource(n)
    }

    pub fn next_id(&mut self) -> u64 {
        let id = self.0;
        self.0 += 1;
        id
    }

    pub fn peek(&self) -> u64 {
        self.0
    }
}

/// Parameters shared by both solvers.
#[derive(Clone, Copy, Debug)]
pub struct FanParams {
    /// Rarefaction cap `delta_nu`.
    pub delta: f64,
    /// Non-physical front speed.
    pub lambda_hat: f64,
    /// Strengths at or below this magnitude produce no front.
    pub zero_tol: f64,
    pub riemann: RiemannOptions,
}

impl FanParams {
    pub fn new(delta: f64, lambda_hat: f64) -> Self {
        FanParams {
            delta,
            lambda_hat,
            zero_tol: 1e-13,
            riemann: RiemannOptions::default(),
        }
    }
}

/// Number of sub-fronts a rarefaction of strength `sigma` is split into.
pub fn subfront_count(sigma: f64, delta: f64) -> usize {
    (sigma.abs() / delta).ceil().max(1.0) as usize
}

#[allow(clippy::too_many_arguments)]
fn emit_wave(
    sys: &IsentropicEuler,
    fan: &mut FanResult,
    fam: Family,
    from: State,
    to: State,
    sigma: f64,
    params: &FanParams,
    birth: (f64, f64),
    speeds: &dyn ShockSpeeds,
    ids: &mut IdSource,
) -> Result<()> {
    let mk = |id, kind, strength, left, right, speed| Front {
        id,
        family: fam.into(),
        kind,
        strength,
        left,
        right,
        birth,
        speed,
        t0: birth.0,
        x0: birth.1,
    };
    if sigma > 0.0 {
        let speed = speeds.shock_speed(fam, from, to)?;
        fan.push(mk(ids.next_id(), FrontKind::Shock, sigma, from, to, speed));
    } else {
        let p = subfront_count(sigma, params.delta);
        let piece = -sigma / p as f64;
        let mut left = from;
        for l in 1..=p {
            let right = if l == p {
                to
            } else {
                rarefaction_curve(sys, left, fam, piece)?.state
            };
            let speed = sys.eigen(right)?.lambda(fam);
            fan.push(mk(ids.next_id(), FrontKind::Rarefaction, -piece, left, right, speed));
            left = right;
        }
    }
    Ok(())
}

/// Fan for the two-wave data `(sigma1, sigma2)` joining `u_minus -> middle -> u_plus`.
#[allow(clippy::too_many_arguments)]
fn fan_from_strengths(
    sys: &IsentropicEuler,
    u_minus: State,
    middle: State,
    u_plus: State,
    sigma1: f64,
    sigma2: f64,
    params: &FanParams,
    birth: (f64, f64),
    speeds: &dyn ShockSpeeds,
    ids: &mut IdSource,
) -> Result<FanResult> {
    let mut fan = FanResult::default();
    let s1 = sigma1.abs() > params.zero_tol;
    let s2 = sigma2.abs() > params.zero_tol;
    // a dropped wave hands its (roundoff-sized) jump to the other family
    let middle = match (s1, s2) {
        (true, true) => middle,
        (true, false) => u_plus,
        (false, _) => u_minus,
    };
    if s1 {
        emit_wave(sys, &mut fan, Family::One, u_minus, middle, sigma1, params, birth, speeds, ids)?;
    }
    if s2 {
        emit_wave(sys, &mut fan, Family::Two, middle, u_plus, sigma2, params, birth, speeds, ids)?;
    }
    if fan.states.is_empty() {
        fan.states.push(u_minus);
    }
    Ok(fan)
}

/// Accurate solver: exact wave strengths, rarefactions split into
/// `ceil(|sigma| / delta)` sub-fronts travelling at `lambda_i` of their right state.
pub fn accurate_solve(
    sys: &IsentropicEuler,
    u_minus: State,
    u_plus: State,
    params: &FanParams,
    birth: (f64, f64),
    speeds: &dyn ShockSpeeds,
    ids: &mut IdSource,
) -> Result<FanResult> {
    let spec = solve_riemann(sys, u_minus, u_plus, &params.riemann)?;
    fan_from_strengths(
        sys,
        u_minus,
        spec.middle,
        u_plus,
        spec.sigma1,
        spec.sigma2,
        params,
        birth,
        speeds,
        ids,
    )
}

/// Sums of incoming physical strengths per family.
pub fn incoming_strengths(incoming: &[Front]) -> (f64, f64) {
    let mut s = (0.0, 0.0);
    for f in incoming {
        match f.family {
            WaveFamily::One => s.0 += f.strength,
            WaveFamily::Two => s.1 += f.strength,
            WaveFamily::NonPhysical => {}
        }
    }
    s
}

/// Simplified solver: outgoing physical strengths are the sums of the
/// incoming ones, and the mismatch `u' -> u_plus` travels as one
/// non-physical front at speed `lambda_hat`.
pub fn simplified_solve(
    sys: &IsentropicEuler,
    incoming: &[Front],
    u_minus: State,
    u_plus: State,
    params: &FanParams,
    birth: (f64, f64),
    speeds: &dyn ShockSpeeds,
    ids: &mut IdSource,
) -> Result<FanResult> {
    if incoming.is_empty() {
        return Err(Error::Internal("simplified solver called without incoming fronts".into()));
    }
    let (s1, s2) = incoming_strengths(incoming);
    let s1 = if s1.abs() > params.zero_tol { s1 } else { 0.0 };
    let s2 = if s2.abs() > params.zero_tol { s2 } else { 0.0 };
    let middle = forward_wave_curve(sys, u_minus, Family::One, s1)?;
    let u_prime = forward_wave_curve(sys, middle, Family::Two, s2)?;
    let mut fan = fan_from_strengths(sys, u_minus, middle, u_prime, s1, s2, params, birth, speeds, ids)?;
    let np = Front {
        id: ids.next_id(),
        family: WaveFamily::NonPhysical,
        kind: FrontKind::NonPhysical,
        strength: u_prime.dist(&u_plus),
        left: u_prime,
        right: u_plus,
        birth,
        speed: params.lambda_hat,
        t0: birth.0,
        x0: birth.1,
    };
    fan.push(np);
    Ok(fan)
}

/// Right state of the admissible `fam`-shock of strength `s` from `left`.
pub fn shock_from(sys: &IsentropicEuler, left: State, fam: Family, s: f64) -> Result<State> {
    Ok(shock_curve(sys, left, fam, s, Side::LeftAnchored)?.state)
}
