//! Event-driven front tracking with shifted shock speeds.
//!
//! Fronts travel on straight lines between events. Adjacent pairs whose
//! paths cross are kept in a min-heap keyed by collision time; entries are
//! invalidated lazily when either front disappears or speeds are reassigned.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::certify::{neighborhood, SpeedWindows};
use crate::error::{Error, Result};
use crate::frontsolvers::{
    accurate_solve, simplified_solve, FanParams, Front, FrontKind, IdSource, ShockSpeeds, WaveFamily,
};
use crate::system::{Family, IsentropicEuler, State, System2x2};
use crate::wavecurves::{hugoniot_speed, RiemannOptions};
use crate::weight::build_weight;

/// Deterministic speed offset per front id.
pub const TIE_PERTURBATION: f64 = 1e-12;

/// Weight profiles before and after an event are compared off intervals shorter than this.
pub const WEIGHT_X_TOL: f64 = 1e-9;

/// Piecewise-constant data: `states[k]` holds between `breakpoints[k-1]` and `breakpoints[k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstant {
    pub breakpoints: Vec<f64>,
    pub states: Vec<State>,
}

impl PiecewiseConstant {
    pub fn constant(u: State) -> Self {
        PiecewiseConstant {
            breakpoints: vec![],
            states: vec![u],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.states.len() != self.breakpoints.len() + 1 {
            return Err(Error::Config(format!(
                "piecewise data needs one more state than breakpoints ({} states, {} breakpoints)",
                self.states.len(),
                self.breakpoints.len()
            )));
        }
        if self.breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("breakpoints must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn at(&self, x: f64) -> State {
        self.states[self.breakpoints.partition_point(|&b| b <= x)]
    }

    /// Sum of jump sizes.
    pub fn total_variation(&self) -> f64 {
        self.states.windows(2).map(|w| w[0].dist(&w[1])).sum()
    }

    /// L1 distance to another piecewise-constant function on `[a, b]`.
    pub fn l1_distance(&self, other: &PiecewiseConstant, a: f64, b: f64) -> f64 {
        let mut pts: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(&other.breakpoints)
            .copied()
            .filter(|&x| x > a && x < b)
            .collect();
        pts.push(a);
        pts.push(b);
        pts.sort_by(f64::total_cmp);
        pts.windows(2)
            .map(|w| {
                let m = 0.5 * (w[0] + w[1]);
                (w[1] - w[0]) * self.at(m).dist(&other.at(m))
            })
            .sum()
    }
}

/// Rule assigning speeds to shock fronts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftMode {
    RankineHugoniot,
    ConstantOffset,
    DissipationGreedy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShiftConfig {
    pub mode: ShiftMode,
    /// Added to the RH speed in constant-offset mode.
    pub offset: f64,
}

impl Default for ShiftConfig {
    fn default() -> Self {
        ShiftConfig {
            mode: ShiftMode::RankineHugoniot,
            offset: 0.0,
        }
    }
}

/// A shift rule together with the speed windows it clamps into.
#[derive(Clone, Copy, Debug)]
pub struct ShiftPolicy {
    pub config: ShiftConfig,
    pub windows: SpeedWindows,
}

/// Speed chosen for one shock and the dissipation it achieves against the supplied traces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShiftOutcome {
    pub speed: f64,
    pub dissipation: Option<f64>,
}

/// One-sided values of the reference solution along a curve.
pub trait TraceSource {
    /// `(u(t, x-), u(t, x+))`, or `None` where unavailable.
    fn traces(&self, t: f64, x: f64) -> Option<(State, State)>;
}

/// `D(hdot) = a_R [q(u+; u_R) - hdot eta(u+|u_R)] - a_L [q(u-; u_L) - hdot eta(u-|u_L)]`,
/// returned as `(A, B)` with `D = A - hdot B`.
pub fn dissipation_coefficients(
    sys: &IsentropicEuler,
    u_l: State,
    u_r: State,
    traces: (State, State),
    weights: (f64, f64),
) -> Result<(f64, f64)> {
    let (um, up) = traces;
    let (al, ar) = weights;
    let a = ar * sys.relative_entropy_flux(up, u_r)? - al * sys.relative_entropy_flux(um, u_l)?;
    let b = ar * sys.relative_entropy(up, u_r)? - al * sys.relative_entropy(um, u_l)?;
    Ok((a, b))
}

impl ShiftPolicy {
    fn clamp(&self, fam: Family, v: f64) -> f64 {
        let (lo, hi) = self.windows.window(fam);
        v.clamp(lo, hi)
    }

    /// Speed for a shock of family `fam` between `u_l` and `u_r`.
    pub fn shift_speed(
        &self,
        sys: &IsentropicEuler,
        fam: Family,
        u_l: State,
        u_r: State,
        traces: Option<(State, State)>,
        weights: (f64, f64),
    ) -> Result<ShiftOutcome> {
        let rh = self.clamp(fam, hugoniot_speed(sys, u_l, u_r, fam));
        let d_at = |v: f64| -> Result<Option<f64>> {
            match traces {
                Some(tr) => {
                    let (a, b) = dissipation_coefficients(sys, u_l, u_r, tr, weights)?;
                    Ok(Some(a - v * b))
                }
                None => Ok(None),
            }
        };
        match self.config.mode {
            ShiftMode::RankineHugoniot => Ok(ShiftOutcome {
                speed: rh,
                dissipation: d_at(rh)?,
            }),
            ShiftMode::ConstantOffset => {
                let v = self.clamp(fam, hugoniot_speed(sys, u_l, u_r, fam) + self.config.offset);
                Ok(ShiftOutcome {
                    speed: v,
                    dissipation: d_at(v)?,
                })
            }
            ShiftMode::DissipationGreedy => {
                let tr = traces.ok_or_else(|| {
                    Error::Config("dissipation-greedy shifts need wild-solution traces".into())
                })?;
                let (a, b) = dissipation_coefficients(sys, u_l, u_r, tr, weights)?;
                let (lo, hi) = self.windows.window(fam);
                let speed = if b > 0.0 {
                    hi
                } else if b < 0.0 {
                    lo
                } else {
                    rh
                };
                Ok(ShiftOutcome {
                    speed,
                    dissipation: Some(a - speed * b),
                })
            }
        }
    }
}

/// Birth speeds: traces are unavailable at creation, so greedy fronts start at the clamped RH speed.
struct BoundPolicy<'a> {
    sys: &'a IsentropicEuler,
    policy: &'a ShiftPolicy,
}

impl ShockSpeeds for BoundPolicy<'_> {
    fn shock_speed(&self, fam: Family, left: State, right: State) -> Result<f64> {
        let mode = match self.policy.config.mode {
            ShiftMode::DissipationGreedy => ShiftMode::RankineHugoniot,
            m => m,
        };
        let p = ShiftPolicy {
            config: ShiftConfig {
                mode,
                ..self.policy.config
            },
            windows: self.policy.windows,
        };
        Ok(p.shift_speed(self.sys, fam, left, right, None, (1.0, 1.0))?.speed)
    }
}

/// Run parameters of the front-tracking engine.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    /// Rarefaction cap.
    pub delta_nu: f64,
    /// Interaction threshold below which the simplified solver is used.
    pub eps_nu: f64,
    pub kappa: f64,
    pub shift: ShiftConfig,
    pub max_events: usize,
    /// Largest admissible total variation of the initial data.
    pub tv_cap: f64,
    /// Margin of the data neighborhood on which speed windows are measured.
    pub window_margin: f64,
    /// When set, every event records the weight increase for this constant C.
    pub monitor_weight_c: Option<f64>,
    pub riemann: RiemannOptions,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            delta_nu: 0.05,
            eps_nu: 1e-4,
            kappa: 10.0,
            shift: ShiftConfig::default(),
            max_events: 1_000_000,
            tv_cap: 0.5,
            window_margin: 0.25,
            monitor_weight_c: None,
            riemann: RiemannOptions::default(),
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("engine.{name} must be positive, got {v}")))
            }
        };
        pos(self.delta_nu, "delta_nu")?;
        pos(self.eps_nu, "eps_nu")?;
        pos(self.kappa, "kappa")?;
        pos(self.tv_cap, "tv_cap")?;
        pos(self.window_margin, "window_margin")?;
        if self.max_events == 0 {
            return Err(Error::Config("engine.max_events must be positive".into()));
        }
        if let Some(c) = self.monitor_weight_c {
            if !(c >= 0.0) {
                return Err(Error::Config(format!("engine.monitor_weight_c must be >= 0, got {c}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GlimmFunctionals {
    pub l: f64,
    pub q: f64,
    pub kappa: f64,
    pub np_total: f64,
}

impl GlimmFunctionals {
    pub fn lq(&self) -> f64 {
        self.l + self.kappa * self.q
    }
}

/// Whether `a` (left) and `b` (right) are approaching.
pub fn approaching(a: &Front, b: &Front) -> bool {
    let (ra, rb) = (a.family.rank(), b.family.rank());
    if ra != rb {
        return ra > rb;
    }
    ra < 3 && (a.is_shock() || b.is_shock())
}

/// `L`, `Q` and the non-physical total of a position-ordered front list, in `O(n)`.
pub fn glimm_of(fronts: &[Front], kappa: f64) -> GlimmFunctionals {
    // strength sums to the left, by rank 1..=3, and shocks only by family
    let mut all = [0.0f64; 4];
    let mut shocks = [0.0f64; 3];
    let mut l = 0.0;
    let mut q = 0.0;
    let mut np_total = 0.0;
    for f in fronts {
        let s = f.strength.abs();
        let r = f.family.rank() as usize;
        let mut partner: f64 = all[r + 1..].iter().sum();
        if r < 3 {
            partner += if f.is_shock() { all[r] } else { shocks[r] };
        }
        q += s * partner;
        l += s;
        all[r] += s;
        if f.is_shock() {
            shocks[r] += s;
        }
        if f.kind == FrontKind::NonPhysical {
            np_total += s;
        }
    }
    GlimmFunctionals { l, q, kappa, np_total }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Accurate,
    Simplified,
}

impl SolverKind {
    pub fn label(self) -> &'static str {
        match self {
            SolverKind::Accurate => "accurate",
            SolverKind::Simplified => "simplified",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrontSummary {
    pub id: u64,
    pub family: WaveFamily,
    pub kind: FrontKind,
    pub strength: f64,
}

impl From<&Front> for FrontSummary {
    fn from(f: &Front) -> Self {
        FrontSummary {
            id: f.id,
            family: f.family,
            kind: f.kind,
            strength: f.strength,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EventRecord {
    pub t: f64,
    pub x: f64,
    pub incoming: Vec<FrontSummary>,
    pub outgoing: Vec<FrontSummary>,
    /// Outer states `(u_minus, u_plus)` of the interaction.
    pub outer: (State, State),
    pub solver: SolverKind,
    pub dl: f64,
    pub dq: f64,
    pub kappa: f64,
    /// Total strength of outgoing non-physical fronts.
    pub np_strength: f64,
    /// `sup_x (a(t+, x) - a(t-, x))` when weight monitoring is on.
    pub weight_increase: Option<f64>,
}

impl EventRecord {
    pub fn d_lq(&self) -> f64 {
        self.dl + self.kappa * self.dq
    }

    /// Incoming strengths when both incoming fronts are physical.
    pub fn physical_pair(&self) -> Option<(FrontSummary, FrontSummary)> {
        match self.incoming.as_slice() {
            [a, b] if a.kind != FrontKind::NonPhysical && b.kind != FrontKind::NonPhysical => Some((*a, *b)),
            _ => None,
        }
    }
}

pub const EVENT_LOG_SCHEMA: &str = "# schema: fronttrack.event_log v1";

fn join_ids(v: &[FrontSummary]) -> String {
    v.iter().map(|f| f.id.to_string()).collect::<Vec<_>>().join(";")
}

/// Event log as CSV with a schema line and a header row.
pub fn event_log_csv(events: &[EventRecord]) -> String {
    let mut s = String::new();
    s.push_str(EVENT_LOG_SCHEMA);
    s.push('\n');
    s.push_str("t,x,incoming_ids,outgoing_ids,solver_used,dL,dQ,np_strength\n");
    for e in events {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            e.t,
            e.x,
            join_ids(&e.incoming),
            join_ids(&e.outgoing),
            e.solver.label(),
            e.dl,
            e.dq,
            e.np_strength
        );
    }
    s
}

/// A straight piece of a front's path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Segment {
    pub id: u64,
    pub family: WaveFamily,
    pub kind: FrontKind,
    pub strength: f64,
    pub left: State,
    pub right: State,
    pub t_start: f64,
    pub x_start: f64,
    pub speed: f64,
    /// `None` while the front is alive with this speed.
    pub t_end: Option<f64>,
}

impl Segment {
    pub fn position(&self, t: f64) -> f64 {
        self.x_start + self.speed * (t - self.t_start)
    }

    /// Alive on `[t_start, t_end)`.
    pub fn alive_at(&self, t: f64) -> bool {
        t >= self.t_start && self.t_end.map_or(true, |e| t < e)
    }
}

/// Breakpoints and states of the solution at one time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Snapshot {
    pub time: f64,
    pub data: PiecewiseConstant,
    pub ids: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Candidate {
    t: f64,
    left: u64,
    right: u64,
    epoch: u64,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .t
            .total_cmp(&self.t)
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.right.cmp(&self.right))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Record of a shock speed reassignment against traces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShiftRecord {
    pub id: u64,
    pub family: WaveFamily,
    pub t: f64,
    pub x: f64,
    pub strength: f64,
    pub speed: f64,
    pub weights: (f64, f64),
    pub states: (State, State),
    pub traces: (State, State),
    pub dissipation: f64,
}

/// The evolving front-tracking solution.
#[derive(Clone, Debug)]
pub struct FrontSolution {
    pub sys: IsentropicEuler,
    pub config: EngineConfig,
    pub policy: ShiftPolicy,
    pub lambda_hat: f64,
    pub time: f64,
    pub far_left: State,
    pub fronts: Vec<Front>,
    pub events: Vec<EventRecord>,
    pub history: Vec<Segment>,
    open: HashMap<u64, usize>,
    index: HashMap<u64, usize>,
    queue: BinaryHeap<Candidate>,
    epoch: u64,
    ids: IdSource,
    fan: FanParams,
}

impl FrontSolution {
    /// Resolves every initial jump with the accurate solver.
    pub fn init(sys: &IsentropicEuler, data: &PiecewiseConstant, config: &EngineConfig) -> Result<Self> {
        config.validate()?;
        data.validate()?;
        for (k, u) in data.states.iter().enumerate() {
            if !sys.params.state_box.contains(u) || !sys.in_invariant_region(*u) {
                return Err(Error::Config(format!("initial state {k} = {u} lies outside the state box")));
            }
        }
        let tv = data.total_variation();
        if tv > config.tv_cap {
            return Err(Error::Config(format!(
                "initial total variation {tv} exceeds engine.tv_cap = {}",
                config.tv_cap
            )));
        }
        let lambda_hat = 2.0 * sys.speed_bound();
        let region = neighborhood(&data.states, config.window_margin);
        let windows = SpeedWindows::on_region(sys, &region, lambda_hat)?;
        let policy = ShiftPolicy {
            config: config.shift,
            windows,
        };
        let fan = FanParams {
            delta: config.delta_nu,
            lambda_hat,
            zero_tol: 1e-13,
            riemann: config.riemann,
        };
        let mut sol = FrontSolution {
            sys: *sys,
            config: *config,
            policy,
            lambda_hat,
            time: 0.0,
            far_left: data.states[0],
            fronts: Vec::new(),
            events: Vec::new(),
            history: Vec::new(),
            open: HashMap::new(),
            index: HashMap::new(),
            queue: BinaryHeap::new(),
            epoch: 0,
            ids: IdSource::default(),
            fan,
        };
        let mut new_fronts = Vec::new();
        for (k, &x) in data.breakpoints.iter().enumerate() {
            let speeds = BoundPolicy {
                sys,
                policy: &sol.policy,
            };
            let res = accurate_solve(
                sys,
                data.states[k],
                data.states[k + 1],
                &sol.fan,
                (0.0, x),
                &speeds,
                &mut sol.ids,
            )
            .map_err(|e| e.context(&format!("initial jump at x = {x}")))?;
            new_fronts.extend(res.fronts);
        }
        for f in new_fronts.iter_mut() {
            sol.perturb(f);
        }
        for f in &new_fronts {
            sol.open_segment(f);
        }
        sol.fronts = new_fronts;
        sol.rebuild_index();
        sol.rebuild_queue()?;
        Ok(sol)
    }

    fn perturb(&self, f: &mut Front) {
        if f.is_physical() {
            f.speed += f.id as f64 * TIE_PERTURBATION;
        }
    }

    fn open_segment(&mut self, f: &Front) {
        self.open.insert(f.id, self.history.len());
        self.history.push(Segment {
            id: f.id,
            family: f.family,
            kind: f.kind,
            strength: f.strength,
            left: f.left,
            right: f.right,
            t_start: f.t0,
            x_start: f.x0,
            speed: f.speed,
            t_end: None,
        });
    }

    fn close_segment(&mut self, id: u64, t: f64) {
        if let Some(k) = self.open.remove(&id) {
            self.history[k].t_end = Some(t);
        }
    }

    fn rebuild_index(&mut self) {
        self.index.clear();
        for (k, f) in self.fronts.iter().enumerate() {
            self.index.insert(f.id, k);
        }
    }

    fn candidate(&self, k: usize) -> Result<Option<Candidate>> {
        let (a, b) = (&self.fronts[k], &self.fronts[k + 1]);
        if !(a.speed > b.speed) {
            return Ok(None);
        }
        let now = self.time;
        let gap = b.position(now) - a.position(now);
        let scale = 1.0 + a.position(now).abs();
        if gap <= 1e-12 * scale {
            return Err(Error::Internal(format!(
                "simultaneous triple collision at t = {now}, x = {} (fronts {} and {})",
                a.position(now),
                a.id,
                b.id
            )));
        }
        Ok(Some(Candidate {
            t: now + gap / (a.speed - b.speed),
            left: a.id,
            right: b.id,
            epoch: self.epoch,
        }))
    }

    fn push_candidate(&mut self, k: usize) -> Result<()> {
        if k + 1 < self.fronts.len() {
            if let Some(c) = self.candidate(k)? {
                self.queue.push(c);
            }
        }
        Ok(())
    }

    fn rebuild_queue(&mut self) -> Result<()> {
        self.epoch += 1;
        self.queue.clear();
        for k in 0..self.fronts.len().saturating_sub(1) {
            self.push_candidate(k)?;
        }
        Ok(())
    }

    fn is_valid(&self, c: &Candidate) -> Option<usize> {
        if c.epoch != self.epoch {
            return None;
        }
        let k = *self.index.get(&c.left)?;
        (k + 1 < self.fronts.len() && self.fronts[k + 1].id == c.right).then_some(k)
    }

    /// Next collision time, if any.
    pub fn next_event_time(&mut self) -> Option<f64> {
        while let Some(c) = self.queue.peek().copied() {
            if self.is_valid(&c).is_some() {
                return Some(c.t);
            }
            self.queue.pop();
        }
        None
    }

    pub fn glimm(&self) -> GlimmFunctionals {
        glimm_of(&self.fronts, self.config.kappa)
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    /// Processes all collisions up to `t_target` and moves the clock there.
    pub fn advance(&mut self, t_target: f64) -> Result<()> {
        if t_target < self.time {
            return Err(Error::Domain(format!(
                "cannot advance backwards from t = {} to {t_target}",
                self.time
            )));
        }
        loop {
            let Some(c) = self.queue.pop() else { break };
            let Some(k) = self.is_valid(&c) else { continue };
            if c.t > t_target {
                self.queue.push(c);
                break;
            }
            if self.events.len() >= self.config.max_events {
                return Err(Error::Internal(format!(
                    "event limit {} reached at t = {}",
                    self.config.max_events, c.t
                )));
            }
            self.time = c.t.max(self.time);
            self.interact(k)?;
        }
        self.time = t_target;
        Ok(())
    }

    fn interact(&mut self, k: usize) -> Result<()> {
        let t = self.time;
        let (fa, fb) = (self.fronts[k], self.fronts[k + 1]);
        let x = 0.5 * (fa.position(t) + fb.position(t));
        let before = self.glimm();
        let weight_before = match self.config.monitor_weight_c {
            Some(c) => Some(build_weight(&self.fronts, t, &before, c)?),
            None => None,
        };
        let (u_minus, u_plus) = (fa.left, fb.right);
        let accurate = fa.is_physical() && fb.is_physical() && (fa.strength * fb.strength).abs() > self.config.eps_nu;
        let policy = self.policy;
        let sys = self.sys;
        let speeds = BoundPolicy { sys: &sys, policy: &policy };
        let fan = if accurate {
            accurate_solve(&sys, u_minus, u_plus, &self.fan, (t, x), &speeds, &mut self.ids)
        } else {
            simplified_solve(&sys, &[fa, fb], u_minus, u_plus, &self.fan, (t, x), &speeds, &mut self.ids)
        }
        .map_err(|e| e.context(&format!("interaction at t = {t}, x = {x}")))?;
        let mut out: Vec<Front> = fan
            .fronts
            .into_iter()
            .filter(|f| !(f.kind == FrontKind::NonPhysical && f.strength == 0.0))
            .collect();
        for f in out.iter_mut() {
            self.perturb(f);
        }
        if out.is_empty() && u_minus != u_plus {
            return Err(Error::Internal(format!("interaction at t = {t} lost a jump {u_minus} -> {u_plus}")));
        }
        self.close_segment(fa.id, t);
        self.close_segment(fb.id, t);
        for f in &out {
            self.open_segment(f);
        }
        let n_out = out.len();
        self.fronts.splice(k..k + 2, out.iter().copied());
        self.rebuild_index();
        let after = self.glimm();
        let weight_increase = match (weight_before, self.config.monitor_weight_c) {
            (Some(wb), Some(c)) => Some(wb.sup_increase_to(&build_weight(&self.fronts, t, &after, c)?, WEIGHT_X_TOL)),
            _ => None,
        };
        // fronts inside the fan diverge; only the two outer pairs are new
        if k > 0 {
            self.push_candidate(k - 1)?;
        }
        if n_out > 0 {
            self.push_candidate(k + n_out - 1)?;
        }
        self.events.push(EventRecord {
            t,
            x,
            incoming: vec![(&fa).into(), (&fb).into()],
            outgoing: out.iter().map(FrontSummary::from).collect(),
            outer: (u_minus, u_plus),
            solver: if accurate {
                SolverKind::Accurate
            } else {
                SolverKind::Simplified
            },
            dl: after.l - before.l,
            dq: after.q - before.q,
            kappa: self.config.kappa,
            np_strength: out
                .iter()
                .filter(|f| f.kind == FrontKind::NonPhysical)
                .fold(0.0, |acc, f| acc + f.strength),
            weight_increase,
        });
        Ok(())
    }

    /// Reassigns every shock speed with the shift policy against `traces`,
    /// using weights `a(t, .)` with constant `c`. Rebuilds the event queue.
    pub fn reassign_shift_speeds(&mut self, traces: &dyn TraceSource, c: f64) -> Result<Vec<ShiftRecord>> {
        let t = self.time;
        let g = self.glimm();
        let profile = build_weight(&self.fronts, t, &g, c)?;
        let mut records = Vec::new();
        let mut changed = Vec::new();
        for k in 0..self.fronts.len() {
            let f = self.fronts[k];
            let Some(fam) = f.family.physical() else { continue };
            if !f.is_shock() {
                continue;
            }
            let x = f.position(t);
            let Some(tr) = traces.traces(t, x) else { continue };
            let w = profile
                .across(f.id)
                .ok_or_else(|| Error::Internal(format!("shock {} missing from the weight profile", f.id)))?;
            let out = self.policy.shift_speed(&self.sys, fam, f.left, f.right, Some(tr), w)?;
            let speed = out.speed + f.id as f64 * TIE_PERTURBATION;
            records.push(ShiftRecord {
                id: f.id,
                family: f.family,
                t,
                x,
                strength: f.strength,
                speed,
                weights: w,
                states: (f.left, f.right),
                traces: tr,
                dissipation: out.dissipation.unwrap_or(0.0),
            });
            if speed != f.speed {
                changed.push((k, speed));
            }
        }
        for (k, speed) in changed {
            let id = self.fronts[k].id;
            self.close_segment(id, t);
            self.fronts[k].reassign_speed(t, speed);
            let f = self.fronts[k];
            self.open_segment(&f);
        }
        self.rebuild_queue()?;
        Ok(records)
    }

    /// States between fronts at the current time, `n + 1` of them.
    pub fn states(&self) -> Vec<State> {
        std::iter::once(self.far_left)
            .chain(self.fronts.iter().map(|f| f.right))
            .collect()
    }

    pub fn far_right(&self) -> State {
        self.fronts.last().map_or(self.far_left, |f| f.right)
    }

    /// Right-continuous value at the current time.
    pub fn sample(&self, x: f64) -> State {
        let t = self.time;
        let k = self.fronts.partition_point(|f| f.position(t) <= x);
        if k == 0 {
            self.far_left
        } else {
            self.fronts[k - 1].right
        }
    }

    /// Current solution as breakpoints and states.
    pub fn current(&self) -> Snapshot {
        let t = self.time;
        Snapshot {
            time: t,
            data: PiecewiseConstant {
                breakpoints: self.fronts.iter().map(|f| f.position(t)).collect(),
                states: self.states(),
            },
            ids: self.fronts.iter().map(|f| f.id).collect(),
        }
    }

    /// Fronts alive at time `t <= self.time`, ordered by position.
    pub fn segments_at(&self, t: f64) -> Vec<&Segment> {
        let mut segs: Vec<&Segment> = self.history.iter().filter(|s| s.alive_at(t)).collect();
        segs.sort_by(|a, b| {
            a.position(t)
                .total_cmp(&b.position(t))
                .then(a.speed.total_cmp(&b.speed))
                .then(a.id.cmp(&b.id))
        });
        segs
    }

    /// Solution at a past time `t`, post-event at event times.
    pub fn snapshot(&self, t: f64) -> Result<Snapshot> {
        if t < 0.0 || t > self.time {
            return Err(Error::Range(format!(
                "snapshot time {t} outside the simulated range [0, {}]",
                self.time
            )));
        }
        let segs = self.segments_at(t);
        let mut states = vec![self.far_left];
        states.extend(segs.iter().map(|s| s.right));
        Ok(Snapshot {
            time: t,
            data: PiecewiseConstant {
                breakpoints: segs.iter().map(|s| s.position(t)).collect(),
                states,
            },
            ids: segs.iter().map(|s| s.id).collect(),
        })
    }

    /// Value at a past point `(t, x)`, right-continuous in `x`.
    pub fn value_at(&self, t: f64, x: f64) -> State {
        // the state right of the nearest front at or left of x
        let mut best: Option<&Segment> = None;
        for s in self.history.iter().filter(|s| s.alive_at(t)) {
            let p = s.position(t);
            if p <= x {
                let better = match best {
                    None => true,
                    Some(b) => {
                        let q = b.position(t);
                        p > q || (p == q && s.speed > b.speed)
                    }
                };
                if better {
                    best = Some(s);
                }
            }
        }
        best.map_or(self.far_left, |s| s.right)
    }

    /// Speeds of the 1- and 2-family fronts alive now; every 1-speed must be below every 2-speed.
    pub fn family_speed_gap(&self) -> Option<f64> {
        let max1 = self
            .fronts
            .iter()
            .filter(|f| f.family == WaveFamily::One)
            .map(|f| f.speed)
            .fold(f64::NEG_INFINITY, f64::max);
        let min2 = self
            .fronts
            .iter()
            .filter(|f| f.family == WaveFamily::Two)
            .map(|f| f.speed)
            .fold(f64::INFINITY, f64::min);
        (max1.is_finite() && min2.is_finite()).then(|| min2 - max1)
    }
}

pub const SNAPSHOT_SCHEMA: &str = "fronttrack.snapshot v1";

#[derive(Serialize)]
struct SnapshotJson<'a> {
    schema: &'a str,
    time: f64,
    breakpoints: &'a [f64],
    states: Vec<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<&'a [f64]>,
}

/// JSON document `{schema, time, breakpoints, states, weights?}`.
pub fn snapshot_json(snap: &Snapshot, weights: Option<&[f64]>) -> Result<String> {
    let doc = SnapshotJson {
        schema: SNAPSHOT_SCHEMA,
        time: snap.time,
        breakpoints: &snap.data.breakpoints,
        states: snap.data.states.iter().map(|s| s.as_array()).collect(),
        weights,
    };
    serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontsolvers::shock_from;

    fn sys() -> IsentropicEuler {
        IsentropicEuler::default_gamma2()
    }

    fn front(family: WaveFamily, kind: FrontKind, strength: f64) -> Front {
        Front {
            id: 0,
            family,
            kind,
            strength,
            left: State::new(1.0, 0.0),
            right: State::new(1.0, 0.0),
            birth: (0.0, 0.0),
            speed: 0.0,
            t0: 0.0,
            x0: 0.0,
        }
    }

    #[test]
    fn approaching_rule() {
        use FrontKind::{Rarefaction, Shock};
        use WaveFamily::{One, Two};
        assert!(!approaching(&front(One, Rarefaction, -0.1), &front(Two, Rarefaction, -0.1)));
        assert!(approaching(&front(Two, Shock, 0.1), &front(One, Shock, 0.1)));
        assert!(approaching(&front(One, Shock, 0.1), &front(One, Shock, 0.1)));
        assert!(!approaching(&front(One, Rarefaction, -0.1), &front(One, Rarefaction, -0.1)));
        assert!(approaching(&front(WaveFamily::NonPhysical, FrontKind::NonPhysical, 0.1), &front(Two, Rarefaction, -0.1)));
        assert!(!approaching(&front(One, Shock, 0.1), &front(WaveFamily::NonPhysical, FrontKind::NonPhysical, 0.1)));
        assert!(!approaching(&front(WaveFamily::NonPhysical, FrontKind::NonPhysical, 0.1), &front(WaveFamily::NonPhysical, FrontKind::NonPhysical, 0.1)));
    }

    #[test]
    fn prefix_q_matches_pairwise() {
        use FrontKind::{Rarefaction, Shock};
        use WaveFamily::{One, Two};
        let fs = vec![
            front(Two, Shock, 0.2),
            front(One, Rarefaction, -0.05),
            front(WaveFamily::NonPhysical, FrontKind::NonPhysical, 0.01),
            front(One, Shock, 0.1),
            front(Two, Rarefaction, -0.03),
            front(Two, Shock, 0.07),
        ];
        let mut q = 0.0;
        for i in 0..fs.len() {
            for j in i + 1..fs.len() {
                if approaching(&fs[i], &fs[j]) {
                    q += fs[i].strength.abs() * fs[j].strength.abs();
                }
            }
        }
        let g = glimm_of(&fs, 10.0);
        assert!((g.q - q).abs() < 1e-15);
        assert!((g.np_total - 0.01).abs() < 1e-15);
    }

    #[test]
    fn constant_data_has_no_fronts() {
        let s = sys();
        let sol = FrontSolution::init(&s, &PiecewiseConstant::constant(State::new(1.0, 0.0)), &EngineConfig::default()).unwrap();
        assert!(sol.fronts.is_empty());
        let g = sol.glimm();
        assert_eq!((g.l, g.q), (0.0, 0.0));
        assert_eq!(sol.sample(3.0), State::new(1.0, 0.0));
    }

    #[test]
    fn two_shock_left_of_one_shock() {
        let s = sys();
        let u0 = State::new(1.0, 0.0);
        // 2-shock from u1 to u0 (strength 0.2), then 1-shock from u0 to u2 (strength 0.1)
        let u1 = crate::wavecurves::shock_curve(&s, u0, Family::Two, 0.2, crate::wavecurves::Side::RightAnchored)
            .unwrap()
            .state;
        let u2 = shock_from(&s, u0, Family::One, 0.1).unwrap();
        let data = PiecewiseConstant {
            breakpoints: vec![0.0, 1.0],
            states: vec![u1, u0, u2],
        };
        let sol = FrontSolution::init(&s, &data, &EngineConfig::default()).unwrap();
        assert_eq!(sol.fronts.len(), 2);
        let g = sol.glimm();
        assert!((g.q - 0.02).abs() < 1e-8, "Q = {}", g.q);
    }

    #[test]
    fn single_front_moves_without_events() {
        let s = sys();
        let u0 = State::new(1.0, 0.0);
        let u1 = shock_from(&s, u0, Family::One, 0.1).unwrap();
        let data = PiecewiseConstant {
            breakpoints: vec![0.0],
            states: vec![u0, u1],
        };
        let mut sol = FrontSolution::init(&s, &data, &EngineConfig::default()).unwrap();
        let v = sol.fronts[0].speed;
        sol.advance(2.0).unwrap();
        assert_eq!(sol.event_count(), 0);
        assert!((sol.fronts[0].position(2.0) - 2.0 * v).abs() < 1e-14);
        assert_eq!(sol.sample(2.0 * v - 1e-9), u0);
        assert!(sol.sample(2.0 * v + 1e-9).dist(&u1) < 1e-12);
        assert_eq!(sol.sample(2.0 * v), sol.fronts[0].right);
    }

    #[test]
    fn overtaking_one_shocks_interact_once() {
        let s = sys();
        let u0 = State::new(1.0, 0.0);
        let u1 = shock_from(&s, u0, Family::One, 0.1).unwrap();
        let u2 = shock_from(&s, u1, Family::One, 0.1).unwrap();
        let data = PiecewiseConstant {
            breakpoints: vec![0.0, 0.5],
            states: vec![u0, u1, u2],
        };
        let cfg = EngineConfig::default();
        let mut sol = FrontSolution::init(&s, &data, &cfg).unwrap();
        sol.advance(20.0).unwrap();
        assert_eq!(sol.event_count(), 1);
        let e = &sol.events[0];
        assert_eq!(e.solver, SolverKind::Accurate);
        assert!(e.d_lq() <= -(cfg.kappa / 2.0) * 0.01, "dL + k dQ = {}", e.d_lq());
    }

    #[test]
    fn snapshot_history_reproduces_past() {
        let s = sys();
        let u0 = State::new(1.0, 0.0);
        let u1 = shock_from(&s, u0, Family::One, 0.1).unwrap();
        let u2 = shock_from(&s, u1, Family::One, 0.1).unwrap();
        let data = PiecewiseConstant {
            breakpoints: vec![0.0, 0.5],
            states: vec![u0, u1, u2],
        };
        let mut sol = FrontSolution::init(&s, &data, &EngineConfig::default()).unwrap();
        sol.advance(20.0).unwrap();
        let snap0 = sol.snapshot(0.0).unwrap();
        assert_eq!(snap0.data.breakpoints.len(), 2);
        assert_eq!(snap0.data.states, vec![u0, u1, u2]);
        let now = sol.snapshot(20.0).unwrap();
        assert_eq!(now.data.states, sol.current().data.states);
        assert!(sol.snapshot(21.0).is_err());
    }

    #[test]
    fn greedy_matched_traces_return_rh() {
        let s = sys();
        let u0 = State::new(1.0, 0.0);
        let u1 = shock_from(&s, u0, Family::One, 0.1).unwrap();
        let windows = SpeedWindows::on_region(&s, &neighborhood(&[u0, u1], 0.25), 2.0 * s.speed_bound()).unwrap();
        let p = ShiftPolicy {
            config: ShiftConfig {
                mode: ShiftMode::DissipationGreedy,
                offset: 0.0,
            },
            windows,
        };
        let out = p.shift_speed(&s, Family::One, u0, u1, Some((u0, u1)), (1.0, 0.95)).unwrap();
        assert!((out.speed - hugoniot_speed(&s, u0, u1, Family::One)).abs() < 1e-14);
        assert_eq!(out.dissipation, Some(0.0));
        assert!(matches!(
            p.shift_speed(&s, Family::One, u0, u1, None, (1.0, 1.0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn greedy_endpoint_follows_slope_sign() {
        let s = sys();
        let u0 = State::new(1.0, 0.0);
        let u1 = shock_from(&s, u0, Family::One, 0.1).unwrap();
        let windows = SpeedWindows::on_region(&s, &neighborhood(&[u0, u1], 0.25), 2.0 * s.speed_bound()).unwrap();
        let p = ShiftPolicy {
            config: ShiftConfig {
                mode: ShiftMode::DissipationGreedy,
                offset: 0.0,
            },
            windows,
        };
        let (lo, hi) = windows.window(Family::One);
        // perturb only the right trace: B > 0, choose hi
        let up = u1 + State::new(0.01, 0.0);
        let a = p.shift_speed(&s, Family::One, u0, u1, Some((u0, up)), (1.0, 1.0)).unwrap();
        assert_eq!(a.speed, hi);
        // perturb only the left trace: B < 0, choose lo
        let um = u0 + State::new(0.01, 0.0);
        let b = p.shift_speed(&s, Family::One, u0, u1, Some((um, u1)), (1.0, 1.0)).unwrap();
        assert_eq!(b.speed, lo);
    }

    #[test]
    fn event_log_has_schema_and_header() {
        let csv = event_log_csv(&[]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(EVENT_LOG_SCHEMA));
        assert_eq!(
            lines.next(),
            Some("t,x,incoming_ids,outgoing_ids,solver_used,dL,dQ,np_strength")
        );
    }

    #[test]
    fn rejects_large_variation() {
        let s = sys();
        let data = PiecewiseConstant {
            breakpoints: vec![0.0],
            states: vec![State::new(1.0, 0.0), State::new(2.0, 0.0)],
        };
        let e = FrontSolution::init(&s, &data, &EngineConfig::default());
        assert!(matches!(e, Err(Error::Config(_))));
    }
}
