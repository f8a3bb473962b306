//! Weighted relative-entropy bookkeeping on the cone of information,
//! per-front dissipation, interaction estimates and variation along
//! space-like curves.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::certify::Certificates;
use crate::engine::{EngineConfig, EventRecord, FrontSolution, PiecewiseConstant, ShiftMode, Snapshot};
use crate::error::{Error, Result};
use crate::frontsolvers::{FrontKind, WaveFamily};
use crate::numerics::trapezoid;
use crate::system::{Family, IsentropicEuler, State, System2x2};
use crate::wavecurves::{forward_wave_curve, solve_riemann, RiemannOptions};
use crate::weight::{build_weight, check_weight_jumps, ratio_window, WeightProfile};
use crate::wild::{GridSolution, GridTraces};

/// The shrinking window `[-R + v t, R - v t]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub r: f64,
    pub v: f64,
}

impl Cone {
    pub fn new(r: f64, v: f64) -> Result<Self> {
        if !(r > 0.0) || !(v > 0.0) {
            return Err(Error::Config(format!("cone needs R > 0 and v > 0, got R = {r}, v = {v}")));
        }
        Ok(Cone { r, v })
    }

    /// `v = max(lambda_hat, flux constant) + 1`.
    pub fn default_speed(lambda_hat: f64, flux_constant: f64) -> f64 {
        lambda_hat.max(flux_constant) + 1.0
    }

    pub fn window(&self, t: f64) -> (f64, f64) {
        (-self.r + self.v * t, self.r - self.v * t)
    }

    pub fn closes_at(&self) -> f64 {
        self.r / self.v
    }
}

/// Polyline `t = gamma(x)` with nodes `(xs[k], ts[k])`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpaceLikeCurve {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
}

impl SpaceLikeCurve {
    /// Requires strictly increasing nodes and `|slope| < 1 / lambda_hat` on every segment.
    pub fn new(xs: Vec<f64>, ts: Vec<f64>, lambda_hat: f64) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ts.len() {
            return Err(Error::Domain("a curve needs at least two nodes and matching lengths".into()));
        }
        for k in 0..xs.len() - 1 {
            let dx = xs[k + 1] - xs[k];
            if !(dx > 0.0) {
                return Err(Error::Domain("curve nodes must increase in x".into()));
            }
            if !((ts[k + 1] - ts[k]).abs() < dx / lambda_hat) {
                return Err(Error::Domain(format!(
                    "segment {k} is not space-like: slope {} with lambda_hat = {lambda_hat}",
                    (ts[k + 1] - ts[k]) / dx
                )));
            }
        }
        Ok(SpaceLikeCurve { xs, ts })
    }

    /// Horizontal curve `t = t0` on `[a, b]`.
    pub fn horizontal(a: f64, b: f64, t0: f64) -> Self {
        SpaceLikeCurve {
            xs: vec![a, b],
            ts: vec![t0, t0],
        }
    }

    pub fn a(&self) -> f64 {
        self.xs[0]
    }

    pub fn b(&self) -> f64 {
        self.xs[self.xs.len() - 1]
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.xs.partition_point(|&p| p <= x).clamp(1, self.xs.len() - 1);
        let (x0, x1, t0, t1) = (self.xs[k - 1], self.xs[k], self.ts[k - 1], self.ts[k]);
        t0 + (t1 - t0) * (x - x0) / (x1 - x0)
    }

    pub fn t_range(&self) -> (f64, f64) {
        let lo = self.ts.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.ts.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Whether `outer` dominates `inner`: `inner` lies between `outer` and the
/// upper boundary of its domain of determinacy.
pub fn dominates(outer: &SpaceLikeCurve, inner: &SpaceLikeCurve, lambda_hat: f64) -> bool {
    let (a, b) = (outer.a(), outer.b());
    if !(a <= inner.a() && inner.b() <= b) {
        return false;
    }
    let upper = |x: f64| (outer.eval(a) + (x - a) / lambda_hat).min(outer.eval(b) + (b - x) / lambda_hat);
    let mut pts: Vec<f64> = inner.xs.clone();
    pts.extend(outer.xs.iter().copied().filter(|&x| x > inner.a() && x < inner.b()));
    pts.iter().all(|&x| {
        let g = inner.eval(x);
        g >= outer.eval(x) - 1e-12 && g <= upper(x) + 1e-12
    })
}

/// A curve dominated by `outer`: `(1 - theta) outer + theta upper` on `[a2, b2]`.
pub fn dominated_curve(outer: &SpaceLikeCurve, a2: f64, b2: f64, theta: f64, lambda_hat: f64) -> Result<SpaceLikeCurve> {
    let (a, b) = (outer.a(), outer.b());
    if !(a <= a2 && a2 < b2 && b2 <= b) || !(0.0..1.0).contains(&theta) {
        return Err(Error::Domain("dominated curve needs a <= a2 < b2 <= b and 0 <= theta < 1".into()));
    }
    let ta = outer.eval(a);
    let tb = outer.eval(b);
    let upper = |x: f64| (ta + (x - a) / lambda_hat).min(tb + (b - x) / lambda_hat);
    let kink = 0.5 * (tb - ta) * lambda_hat + 0.5 * (a + b);
    let mut xs = vec![a2, b2];
    xs.extend(outer.xs.iter().copied().filter(|&x| x > a2 && x < b2));
    if kink > a2 && kink < b2 {
        xs.push(kink);
    }
    xs.sort_by(f64::total_cmp);
    let merge = 1e-12 * (b - a);
    xs.dedup_by(|x, prev| *x - *prev <= merge);
    if let Some(last) = xs.last_mut() {
        *last = b2;
    }
    let ts = xs.iter().map(|&x| (1.0 - theta) * outer.eval(x) + theta * upper(x)).collect();
    SpaceLikeCurve::new(xs, ts, lambda_hat)
}

/// Random space-like polyline on `[a, b]` inside `[t_lo, t_hi]`.
pub fn random_curve(rng: &mut impl Rng, a: f64, b: f64, t_lo: f64, t_hi: f64, lambda_hat: f64, nodes: usize) -> Result<SpaceLikeCurve> {
    let n = nodes.max(2);
    let xs: Vec<f64> = (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect();
    let h = (b - a) / (n - 1) as f64;
    let max_step = 0.9 * h / lambda_hat;
    let mut ts = vec![rng.gen_range(t_lo..t_hi)];
    for _ in 1..n {
        let prev = *ts.last().unwrap();
        let lo = (prev - max_step).max(t_lo);
        let hi = (prev + max_step).min(t_hi);
        ts.push(rng.gen_range(lo..=hi));
    }
    SpaceLikeCurve::new(xs, ts, lambda_hat)
}

/// Total variation of `x -> psi(gamma(x), x)`, from the exact crossings of front paths with the curve.
pub fn tv_along_curve(sol: &FrontSolution, curve: &SpaceLikeCurve) -> Result<f64> {
    let (lo, hi) = curve.t_range();
    if lo < 0.0 || hi > sol.time {
        return Err(Error::Range(format!(
            "curve spans t in [{lo}, {hi}], outside the simulated range [0, {}]",
            sol.time
        )));
    }
    let mut cross = Vec::new();
    for seg in &sol.history {
        for k in 0..curve.xs.len() - 1 {
            let (x0, x1, t0, t1) = (curve.xs[k], curve.xs[k + 1], curve.ts[k], curve.ts[k + 1]);
            let m = (t1 - t0) / (x1 - x0);
            // seg: x = xs + s (t - ts); curve: t = t0 + m (x - x0)
            let denom = 1.0 - seg.speed * m;
            let x = (seg.x_start + seg.speed * (t0 - m * x0 - seg.t_start)) / denom;
            if x < x0 || x > x1 {
                continue;
            }
            let t = t0 + m * (x - x0);
            if t >= seg.t_start && seg.t_end.map_or(true, |e| t < e) {
                cross.push(x);
            }
        }
    }
    cross.push(curve.a());
    cross.push(curve.b());
    cross.sort_by(f64::total_cmp);
    cross.dedup();
    let mut tv = 0.0;
    let mut prev: Option<State> = None;
    for w in cross.windows(2) {
        if w[1] - w[0] <= 0.0 {
            continue;
        }
        let xm = 0.5 * (w[0] + w[1]);
        let u = sol.value_at(curve.eval(xm), xm);
        if let Some(p) = prev {
            tv += p.dist(&u);
        }
        prev = Some(u);
    }
    Ok(tv)
}

/// Outcome of a Condition H sample: `TV(inner) / TV(outer)` maxima.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominationReport {
    pub pairs: usize,
    pub max_ratio: f64,
    pub max_outer_tv: f64,
}

/// Draws `pairs` random dominated pairs and records the largest variation ratio.
pub fn domination_pairs(sol: &FrontSolution, pairs: usize, x_range: (f64, f64), seed: u64) -> Result<DominationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lh = sol.lambda_hat;
    let mut rep = DominationReport {
        pairs: 0,
        max_ratio: 0.0,
        max_outer_tv: 0.0,
    };
    let (xa, xb) = x_range;
    let t_hi = sol.time;
    let mut attempts = 0;
    while rep.pairs < pairs {
        attempts += 1;
        if attempts > 100 * pairs.max(1) {
            return Err(Error::Internal("could not draw dominated curve pairs".into()));
        }
        let a = rng.gen_range(xa..xb);
        let b = rng.gen_range(a..xb);
        if b - a < 1e-3 * (xb - xa) {
            continue;
        }
        let outer = random_curve(&mut rng, a, b, 0.0, 0.5 * t_hi, lh, 6)?;
        let a2 = rng.gen_range(a..b);
        let b2 = rng.gen_range(a2..=b);
        if b2 <= a2 {
            continue;
        }
        let theta = rng.gen_range(0.0..0.95);
        let inner = dominated_curve(&outer, a2, b2, theta, lh)?;
        if inner.t_range().1 > t_hi || !dominates(&outer, &inner, lh) {
            continue;
        }
        let tv_o = tv_along_curve(sol, &outer)?;
        let tv_i = tv_along_curve(sol, &inner)?;
        rep.pairs += 1;
        rep.max_outer_tv = rep.max_outer_tv.max(tv_o);
        if tv_o > 0.0 {
            rep.max_ratio = rep.max_ratio.max(tv_i / tv_o);
        } else if tv_i > 1e-12 {
            rep.max_ratio = f64::INFINITY;
        }
    }
    Ok(rep)
}

/// `||psi(t) - psi(s)||_{L1} / |t - s|` on `[a, b]`.
pub fn l1_time_ratio(sol: &FrontSolution, t: f64, s: f64, a: f64, b: f64) -> Result<f64> {
    let p = sol.snapshot(t)?;
    let q = sol.snapshot(s)?;
    Ok(p.data.l1_distance(&q.data, a, b) / (t - s).abs())
}

/// `int_window a(x) eta(u(x) | psi(x)) dx`, exact for piecewise-constant inputs.
pub fn weighted_entropy_integral(
    sys: &IsentropicEuler,
    grid: &GridSolution,
    psi: &PiecewiseConstant,
    weight: &WeightProfile,
    window: (f64, f64),
) -> Result<f64> {
    let (lo, hi) = window;
    if hi <= lo {
        return Ok(0.0);
    }
    if lo < grid.x0 - 1e-12 || hi > grid.x_end() + 1e-12 {
        return Err(Error::Range(format!(
            "window [{lo}, {hi}] is not covered by the grid [{}, {}]",
            grid.x0,
            grid.x_end()
        )));
    }
    let mut pts = vec![lo, hi];
    let i0 = grid.cell_of(lo).unwrap_or(0);
    let i1 = grid.cell_of(hi).unwrap_or(grid.len() - 1);
    pts.extend((i0..=i1 + 1).map(|i| grid.x0 + i as f64 * grid.dx).filter(|&x| x > lo && x < hi));
    pts.extend(psi.breakpoints.iter().copied().filter(|&x| x > lo && x < hi));
    pts.extend(weight.breakpoints.iter().copied().filter(|&x| x > lo && x < hi));
    pts.sort_by(f64::total_cmp);
    let mut sum = 0.0;
    for w in pts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let m = 0.5 * (w[0] + w[1]);
        let cell = grid.cell_of(m).ok_or_else(|| Error::Range(format!("x = {m} outside the grid")))?;
        let b = psi.at(m);
        if b.rho <= 0.0 {
            return Err(Error::Domain(format!("reference state at x = {m} is vacuum")));
        }
        sum += len * weight.at(m) * sys.relative_entropy(grid.cells[cell], b)?;
    }
    Ok(sum)
}

/// `F+ - F-` across one front moving at `hdot`.
pub fn flux_difference(
    sys: &IsentropicEuler,
    psi: (State, State),
    traces: (State, State),
    weights: (f64, f64),
    hdot: f64,
) -> Result<f64> {
    let (ul, ur) = psi;
    let (um, up) = traces;
    let (al, ar) = weights;
    let plus = ar * (sys.relative_entropy_flux(up, ur)? - hdot * sys.relative_entropy(up, ur)?);
    let minus = al * (sys.relative_entropy_flux(um, ul)? - hdot * sys.relative_entropy(um, ul)?);
    Ok(plus - minus)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DissipationRecord {
    pub id: u64,
    pub t: f64,
    pub hdot: f64,
    pub a_left: f64,
    pub a_right: f64,
    pub traces: (State, State),
    pub d: f64,
    /// `a_right / a_left` lies in the weight window of the shock.
    pub admissible: bool,
}

/// Dissipation of a shock front with reference states `psi` against `traces`.
#[allow(clippy::too_many_arguments)]
pub fn front_dissipation(
    sys: &IsentropicEuler,
    id: u64,
    t: f64,
    family: WaveFamily,
    strength: f64,
    psi: (State, State),
    traces: (State, State),
    weights: (f64, f64),
    hdot: f64,
    c: f64,
) -> Result<DissipationRecord> {
    if psi.0.rho <= 0.0 || psi.1.rho <= 0.0 {
        return Err(Error::Domain("shock reference states must be non-vacuum".into()));
    }
    let d = flux_difference(sys, psi, traces, weights, hdot)?;
    let (lo, hi) = ratio_window(family, c, strength);
    let ratio = weights.1 / weights.0;
    Ok(DissipationRecord {
        id,
        t,
        hdot,
        a_left: weights.0,
        a_right: weights.1,
        traces,
        d,
        admissible: ratio >= lo - 1e-14 && ratio <= hi + 1e-14,
    })
}

/// One trace sample along the ray `x = v t` inside a rarefaction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RayTrace {
    pub t: f64,
    pub minus: State,
    pub plus: State,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RarefactionDissipation {
    pub integral: f64,
    /// `|v_L - v_R| + sup |u_L - u(y)|`.
    pub delta: f64,
    /// `delta |u_L - u_R| t`.
    pub scale: f64,
}

impl RarefactionDissipation {
    pub fn fitted_constant(&self) -> f64 {
        if self.scale > 0.0 {
            self.integral / self.scale
        } else {
            0.0
        }
    }
}

/// Time integral of the rarefaction bracket at ray speed `v` by the trapezoid rule.
pub fn rarefaction_dissipation(
    sys: &IsentropicEuler,
    ends: (State, State),
    speeds: (f64, f64),
    fan_spread: f64,
    series: &[RayTrace],
    v: f64,
) -> Result<RarefactionDissipation> {
    let (ul, ur) = ends;
    let ts: Vec<f64> = series.iter().map(|s| s.t).collect();
    let t_end = ts.last().copied().unwrap_or(0.0);
    let delta = (speeds.1 - speeds.0).abs() + fan_spread;
    if ul == ur {
        return Ok(RarefactionDissipation {
            integral: 0.0,
            delta,
            scale: 0.0,
        });
    }
    let ys = series
        .iter()
        .map(|s| {
            Ok(sys.relative_entropy_flux(s.plus, ur)? - sys.relative_entropy_flux(s.minus, ul)?
                - v * (sys.relative_entropy(s.plus, ur)? - sys.relative_entropy(s.minus, ul)?))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RarefactionDissipation {
        integral: trapezoid(&ts, &ys),
        delta,
        scale: delta * ul.dist(&ur) * t_end,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionCase {
    /// Two waves of family 1.
    SameFamily1,
    /// A 2-wave on the left meets a 1-wave on the right.
    HeadOn,
    /// Two waves of family 2.
    SameFamily2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InteractionMargin {
    pub case: InteractionCase,
    pub sigma_left: f64,
    pub sigma_right: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub lhs: f64,
    /// `|s' s''| (|s'| + |s''|)`.
    pub scale: f64,
}

impl InteractionMargin {
    pub fn ratio(&self) -> f64 {
        if self.scale > 0.0 {
            self.lhs / self.scale
        } else {
            0.0
        }
    }
}

/// Left side of the interaction estimate for incoming strengths `s'` (left) and `s''` (right).
pub fn interaction_margin(
    sys: &IsentropicEuler,
    case: InteractionCase,
    outer: (State, State),
    s_left: f64,
    s_right: f64,
    opts: &RiemannOptions,
) -> Result<InteractionMargin> {
    let scale = (s_left * s_right).abs() * (s_left.abs() + s_right.abs());
    let fan = solve_riemann(sys, outer.0, outer.1, opts)?;
    let (s1, s2) = (fan.sigma1, fan.sigma2);
    let lhs = match case {
        InteractionCase::SameFamily1 => (s1 - (s_left + s_right)).abs() + s2.abs(),
        InteractionCase::HeadOn => (s1 - s_right).abs() + (s2 - s_left).abs(),
        InteractionCase::SameFamily2 => s1.abs() + (s2 - (s_left + s_right)).abs(),
    };
    Ok(InteractionMargin {
        case,
        sigma_left: s_left,
        sigma_right: s_right,
        sigma1: s1,
        sigma2: s2,
        lhs,
        scale,
    })
}

/// Estimate for a logged event with two physical incoming fronts; `None` otherwise.
pub fn interaction_check(sys: &IsentropicEuler, event: &EventRecord, opts: &RiemannOptions) -> Result<Option<InteractionMargin>> {
    let Some((a, b)) = event.physical_pair() else {
        return Ok(None);
    };
    let case = match (a.family, b.family) {
        (WaveFamily::One, WaveFamily::One) => InteractionCase::SameFamily1,
        (WaveFamily::Two, WaveFamily::Two) => InteractionCase::SameFamily2,
        (WaveFamily::Two, WaveFamily::One) => InteractionCase::HeadOn,
        _ => return Ok(None),
    };
    interaction_margin(sys, case, event.outer, a.strength, b.strength, opts).map(Some)
}

/// Outer states of a constructed interaction starting from `u`.
pub fn constructed_interaction(sys: &IsentropicEuler, u: State, case: InteractionCase, s_left: f64, s_right: f64) -> Result<(State, State)> {
    let (f_left, f_right) = match case {
        InteractionCase::SameFamily1 => (Family::One, Family::One),
        InteractionCase::HeadOn => (Family::Two, Family::One),
        InteractionCase::SameFamily2 => (Family::Two, Family::Two),
    };
    let m = forward_wave_curve(sys, u, f_left, s_left)?;
    Ok((u, forward_wave_curve(sys, m, f_right, s_right)?))
}

/// Smooth density bump `amp cos^2(pi (x - c) / (2 w))` on `|x - c| < w`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: f64,
    pub width: f64,
    /// Target L2 norm of the density perturbation.
    pub l2_norm: f64,
}

impl Bump {
    pub fn amplitude(&self) -> f64 {
        // int cos^4 over the support is 3 w / 4
        self.l2_norm / (0.75 * self.width).sqrt()
    }

    pub fn value(&self, x: f64) -> f64 {
        let y = (x - self.center) / self.width;
        if y.abs() >= 1.0 {
            0.0
        } else {
            self.amplitude() * (0.5 * std::f64::consts::PI * y).cos().powi(2)
        }
    }

    /// Adds the cell averages (5-point Gauss-Legendre) of the bump to the grid densities.
    pub fn apply(&self, grid: &mut GridSolution) {
        const NODES: [f64; 5] = [0.0, -0.538_469_310_105_683, 0.538_469_310_105_683, -0.906_179_845_938_664, 0.906_179_845_938_664];
        const WEIGHTS: [f64; 5] = [0.568_888_888_888_889, 0.478_628_670_499_366, 0.478_628_670_499_366, 0.236_926_885_056_189, 0.236_926_885_056_189];
        for i in 0..grid.len() {
            let c = grid.center(i);
            let avg: f64 = NODES
                .iter()
                .zip(WEIGHTS)
                .map(|(n, w)| 0.5 * w * self.value(c + 0.5 * n * grid.dx))
                .sum();
            let v = grid.cells[i].velocity();
            let rho = grid.cells[i].rho + avg;
            grid.cells[i] = State::from_primitive(rho, v);
        }
    }
}

/// Parameters of a stability run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub data: PiecewiseConstant,
    pub bump: Option<Bump>,
    pub engine: EngineConfig,
    pub dx: f64,
    pub cfl: f64,
    pub r: f64,
    /// Cone speed; defaults to `max(lambda_hat, flux constant) + 1`.
    pub v: Option<f64>,
    /// Weight constant; defaults to the largest `C <= 1` with `4 C (L + kappa Q)(0) <= 1`.
    pub weight_c: Option<f64>,
    /// Final time as a fraction of `R / v`.
    pub horizon: f64,
    pub trace_k: usize,
    /// Threshold above which a shock dissipation value counts as positive.
    pub d_tol: f64,
}

impl StabilityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0) {
            return Err(Error::Config(format!("wild.dx must be positive, got {}", self.dx)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return Err(Error::Config(format!("wild.cfl must lie in (0, 1/2], got {}", self.cfl)));
        }
        if !(self.r > 0.0) {
            return Err(Error::Config(format!("cone.r must be positive, got {}", self.r)));
        }
        if !(self.horizon > 0.0 && self.horizon < 1.0) {
            return Err(Error::Config(format!("cone.horizon must lie in (0, 1), got {}", self.horizon)));
        }
        if self.trace_k == 0 {
            return Err(Error::Config("wild.trace_k must be at least 1".into()));
        }
        if let Some(b) = &self.bump {
            if !(b.width > 0.0) || !(b.l2_norm >= 0.0) {
                return Err(Error::Config("perturbation width must be positive and l2_norm >= 0".into()));
            }
        }
        Ok(())
    }
}

/// One row of the stability time series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StabilityRow {
    pub t: f64,
    pub e: f64,
    pub budget: f64,
    pub budget_shock: f64,
    pub budget_rarefaction: f64,
    pub budget_np: f64,
    pub l: f64,
    pub q: f64,
    pub lq: f64,
    pub np_total: f64,
    pub pos_d_sum: f64,
    pub weight_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub dx: f64,
    pub weight_c: f64,
    pub cone: Cone,
    pub lambda_hat: f64,
    pub t_end: f64,
    pub e0: f64,
    pub rows: Vec<StabilityRow>,
    pub shock_records: usize,
    pub positive_d: usize,
    /// `E(t) <= 4 E(0) + budget(t)` at every stored time.
    pub bound_holds: bool,
    pub worst_bound_margin: f64,
    pub weight_window_violations: usize,
    pub weight_increase_max: f64,
    pub lq_monotone: bool,
    pub max_cell_entropy_production: f64,
    pub events: usize,
}

impl StabilityReport {
    pub fn positive_d_fraction(&self) -> f64 {
        if self.shock_records == 0 {
            0.0
        } else {
            self.positive_d as f64 / self.shock_records as f64
        }
    }

    pub fn final_budget(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.budget)
    }

    /// Hard invariants: weight windows, monotone `L + kappa Q`, weight decay at events.
    pub fn hard_invariants_hold(&self) -> bool {
        self.weight_window_violations == 0 && self.lq_monotone && self.weight_increase_max <= 1e-12
    }
}

pub const STABILITY_SERIES_SCHEMA: &str = "# schema: fronttrack.stability_series v1";

/// Time series as CSV `t,E,L,Q,LQ,np_total,pos_D_sum,budget`.
pub fn stability_csv(rep: &StabilityReport) -> String {
    use std::fmt::Write as _;
    let mut s = format!("{STABILITY_SERIES_SCHEMA}\nt,E,L,Q,LQ,np_total,pos_D_sum,budget\n");
    for r in &rep.rows {
        let _ = writeln!(s, "{},{},{},{},{},{},{},{}", r.t, r.e, r.l, r.q, r.lq, r.np_total, r.pos_d_sum, r.budget);
    }
    s
}

/// Largest `C <= 1` with `4 C (L + kappa Q) <= 1`; keeps the weight precondition for all later times.
pub fn default_weight_constant(lq0: f64) -> f64 {
    if lq0 > 0.0 {
        (0.25 / lq0).min(1.0)
    } else {
        1.0
    }
}

/// Runs the wild Godunov solution from perturbed data next to the shifted
/// front tracking solution from the unperturbed data and records the
/// weighted relative entropy with its flux budget.
pub fn stability_experiment(sys: &IsentropicEuler, cfg: &StabilityConfig) -> Result<StabilityReport> {
    cfg.validate()?;
    let mut engine_cfg = cfg.engine;
    let mut psi = FrontSolution::init(sys, &cfg.data, &engine_cfg).map_err(|e| e.context("front tracking init"))?;
    let g0 = psi.glimm();
    let c = cfg.weight_c.unwrap_or_else(|| default_weight_constant(g0.lq()));
    engine_cfg.monitor_weight_c = Some(c);
    psi.config.monitor_weight_c = Some(c);
    let lambda_hat = psi.lambda_hat;
    let v = match cfg.v {
        Some(v) => v,
        None => Cone::default_speed(lambda_hat, Certificates::compute(sys)?.flux_ratio),
    };
    let cone = Cone::new(cfg.r, v)?;
    let t_end = cfg.horizon * cone.closes_at();

    let pad = (cfg.trace_k as f64 + 4.0) * cfg.dx;
    let n = ((2.0 * cfg.r + 2.0 * pad) / cfg.dx).ceil() as usize;
    let x0 = -cfg.r - pad;
    let mut grid = GridSolution::project(&cfg.data, x0, cfg.dx, n);
    if let Some(b) = &cfg.bump {
        b.apply(&mut grid);
    }

    let greedy = engine_cfg.shift.mode == ShiftMode::DissipationGreedy;
    let dt_max = grid.max_dt(lambda_hat, cfg.cfl);
    let mut rows = Vec::new();
    let mut budget = [0.0f64; 3];
    let mut pos_d_sum = 0.0;
    let mut shock_records = 0;
    let mut positive_d = 0;
    let mut window_violations = 0;
    let mut max_prod = f64::NEG_INFINITY;
    let mut lq_prev = g0.lq();
    let mut lq_monotone = true;

    loop {
        let t = grid.time;
        if greedy {
            psi.reassign_shift_speeds(&GridTraces { grid: &grid, k: cfg.trace_k }, c)?;
        }
        let g = psi.glimm();
        if g.lq() > lq_prev + 1e-12 {
            lq_monotone = false;
        }
        lq_prev = g.lq();
        let profile = build_weight(&psi.fronts, t, &g, c)?;
        window_violations += check_weight_jumps(&profile, &psi.fronts).violations.len();
        let snap: Snapshot = psi.current();
        let window = cone.window(t);
        let e = weighted_entropy_integral(sys, &grid, &snap.data, &profile, window)?;

        // flux terms over the coming step, per front inside the window
        let mut rates = [0.0f64; 3];
        for f in &psi.fronts {
            let x = f.position(t);
            if x <= window.0 || x >= window.1 {
                continue;
            }
            let Some(tr) = grid.traces_at(x, cfg.trace_k) else { continue };
            let w = if f.is_shock() {
                profile.across(f.id).unwrap_or((profile.left_limit(x), profile.at(x)))
            } else {
                let a = profile.at(x);
                (a, a)
            };
            let d = flux_difference(sys, (f.left, f.right), tr, w, f.speed)?;
            let slot = match f.kind {
                FrontKind::Shock => {
                    shock_records += 1;
                    if d > cfg.d_tol {
                        positive_d += 1;
                    }
                    0
                }
                FrontKind::Rarefaction => 1,
                FrontKind::NonPhysical => 2,
            };
            rates[slot] += d.max(0.0);
        }
        rows.push(StabilityRow {
            t,
            e,
            budget: budget.iter().sum(),
            budget_shock: budget[0],
            budget_rarefaction: budget[1],
            budget_np: budget[2],
            l: g.l,
            q: g.q,
            lq: g.lq(),
            np_total: g.np_total,
            pos_d_sum,
            weight_deviation: profile.max_deviation(),
        });
        if t >= t_end - 1e-14 {
            break;
        }
        let dt = dt_max.min(t_end - t);
        let rep = grid.godunov_step(sys, dt, lambda_hat)?;
        max_prod = max_prod.max(rep.max_production);
        for k in 0..3 {
            budget[k] += dt * rates[k];
        }
        pos_d_sum += dt * rates[0];
        psi.advance(grid.time)?;
    }

    let e0 = rows[0].e;
    let mut worst = f64::INFINITY;
    for r in &rows {
        worst = worst.min(4.0 * e0 + r.budget - r.e);
    }
    let weight_increase_max = psi
        .events
        .iter()
        .filter_map(|e| e.weight_increase)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(StabilityReport {
        dx: cfg.dx,
        weight_c: c,
        cone,
        lambda_hat,
        t_end,
        e0,
        rows,
        shock_records,
        positive_d,
        bound_holds: worst >= 0.0,
        worst_bound_margin: worst,
        weight_window_violations: window_violations,
        weight_increase_max: if psi.events.is_empty() { 0.0 } else { weight_increase_max },
        lq_monotone,
        max_cell_entropy_production: max_prod,
        events: psi.events.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontsolvers::shock_from;

    fn sys() -> IsentropicEuler {
        IsentropicEuler::default_gamma2()
    }

    #[test]
    fn cone_window_shrinks() {
        let c = Cone::new(1.0, 4.0).unwrap();
        assert_eq!(c.window(0.0), (-1.0, 1.0));
        assert_eq!(c.window(0.125), (-0.5, 0.5));
        assert_eq!(c.closes_at(), 0.25);
    }

    #[test]
    fn space_like_validation() {
        assert!(SpaceLikeCurve::new(vec![0.0, 1.0], vec![0.0, 0.05], 10.0).is_ok());
        assert!(SpaceLikeCurve::new(vec![0.0, 1.0], vec![0.0, 0.1], 10.0).is_err());
        let g = SpaceLikeCurve::new(vec![0.0, 1.0, 2.0], vec![0.0, 0.05, 0.0], 10.0).unwrap();
        assert!((g.eval(0.5) - 0.025).abs() < 1e-15);
        let inner = dominated_curve(&g, 0.5, 1.5, 0.5, 10.0).unwrap();
        assert!(dominates(&g, &inner, 10.0));
    }

    #[test]
    fn entropy_integral_matches_midpoint_quadrature() {
        let e = sys();
        let b = State::new(1.0, 0.1);
        let grid = GridSolution {
            x0: -1.0,
            dx: 0.1,
            time: 0.0,
            cells: (0..20).map(|i| State::new(1.0 + 0.01 * i as f64, 0.05 * (i as f64).sin())).collect(),
        };
        let psi = PiecewiseConstant::constant(b);
        let w = build_weight(&[], 0.0, &crate::engine::glimm_of(&[], 10.0), 1.0).unwrap();
        let exact = weighted_entropy_integral(&e, &grid, &psi, &w, (-0.73, 0.61)).unwrap();
        // cell-overlap sum
        let (lo, hi) = (-0.73, 0.61);
        let quad: f64 = (0..grid.len())
            .map(|i| {
                let a = (grid.x0 + i as f64 * grid.dx).max(lo);
                let c = (grid.x0 + (i + 1) as f64 * grid.dx).min(hi);
                (c - a).max(0.0) * e.relative_entropy(grid.cells[i], b).unwrap()
            })
            .sum();
        assert!((exact - quad).abs() < 1e-14, "{exact} vs {quad}");
        let self_psi = PiecewiseConstant {
            breakpoints: (1..20).map(|i| -1.0 + 0.1 * i as f64).collect(),
            states: grid.cells.clone(),
        };
        assert!(weighted_entropy_integral(&e, &grid, &self_psi, &w, (-1.0, 1.0)).unwrap() < 1e-14);
    }

    #[test]
    fn matched_traces_dissipate_nothing() {
        let e = sys();
        let u = State::new(1.0, 0.0);
        let ur = shock_from(&e, u, Family::One, 0.1).unwrap();
        let r = front_dissipation(&e, 0, 0.0, WaveFamily::One, 0.1, (u, ur), (u, ur), (1.0, 0.95), -1.0, 1.0).unwrap();
        assert_eq!(r.d, 0.0);
        assert!(r.admissible);
        let r = front_dissipation(&e, 0, 0.0, WaveFamily::One, 0.1, (u, ur), (u, ur), (1.0, 1.05), -1.0, 1.0).unwrap();
        assert!(!r.admissible);
    }

    #[test]
    fn degenerate_interaction_is_zero() {
        let e = sys();
        let u = State::new(1.0, 0.0);
        let (um, up) = constructed_interaction(&e, u, InteractionCase::HeadOn, 0.0, 0.05).unwrap();
        let m = interaction_margin(&e, InteractionCase::HeadOn, (um, up), 0.0, 0.05, &RiemannOptions::default()).unwrap();
        assert!(m.lhs < 1e-9);
        assert_eq!(m.scale, 0.0);
    }

    #[test]
    fn zero_rarefaction_bracket_vanishes() {
        let e = sys();
        let u = State::new(1.0, 0.0);
        let series = vec![
            RayTrace { t: 0.0, minus: u, plus: u },
            RayTrace { t: 1.0, minus: u, plus: u },
        ];
        let r = rarefaction_dissipation(&e, (u, u), (0.0, 0.0), 0.0, &series, 0.0).unwrap();
        assert_eq!(r.integral, 0.0);
    }

    #[test]
    fn bump_has_requested_norm() {
        let b = Bump {
            center: 0.0,
            width: 0.2,
            l2_norm: 0.01,
        };
        let n = 100_000;
        let h = 0.4 / n as f64;
        let l2: f64 = (0..n)
            .map(|k| {
                let x = -0.2 + (k as f64 + 0.5) * h;
                h * b.value(x).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        assert!((l2 - 0.01).abs() < 1e-8);
    }

    #[test]
    fn horizontal_curve_tv_equals_snapshot_tv() {
        let e = sys();
        let u0 = State::new(1.0, 0.0);
        let u1 = shock_from(&e, u0, Family::One, 0.05).unwrap();
        let u2 = crate::wavecurves::rarefaction_curve(&e, u1, Family::Two, 0.08).unwrap().state;
        let data = PiecewiseConstant {
            breakpoints: vec![-0.2, 0.2],
            states: vec![u0, u1, u2],
        };
        let mut sol = FrontSolution::init(&e, &data, &EngineConfig::default()).unwrap();
        sol.advance(0.3).unwrap();
        let tv = tv_along_curve(&sol, &SpaceLikeCurve::horizontal(-5.0, 5.0, 0.2)).unwrap();
        let snap = sol.snapshot(0.2).unwrap();
        assert!((tv - snap.data.total_variation()).abs() < 1e-12);
        assert!(tv_along_curve(&sol, &SpaceLikeCurve::horizontal(-5.0, 5.0, 0.4)).is_err());
    }
}
