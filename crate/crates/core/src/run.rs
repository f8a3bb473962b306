//! Orchestration behind the command-line subcommands. Every function
//! returns its output files as `(name, contents)` pairs so runs can be
//! compared byte for byte.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::diagnostics::{
    constructed_interaction, default_weight_constant, domination_pairs, interaction_margin, stability_csv, stability_experiment,
    InteractionCase, StabilityReport,
};
use crate::engine::{event_log_csv, snapshot_json, FrontSolution, PiecewiseConstant, Snapshot};
use crate::error::{Error, Result};
use crate::system::{Family, IsentropicEuler, State, System2x2};
use crate::wavecurves::{rh_speed, solve_riemann, RiemannOptions};
use crate::weight::{build_weight, check_weight_jumps, WeightProfile};

pub type Files = Vec<(String, String)>;

pub const RIEMANN_SCHEMA: &str = "fronttrack.riemann v1";
pub const FUNCTIONALS_SCHEMA: &str = "# schema: fronttrack.functionals v1";
pub const STABILITY_SCHEMA: &str = "fronttrack.stability_report v1";
pub const CHECK_SCHEMA: &str = "fronttrack.check v1";
pub const SWEEP_SCHEMA: &str = "# schema: fronttrack.sweep v1";

/// Strengths at or below this are reported as absent waves.
const WAVE_ZERO: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WaveReport {
    pub family: u8,
    pub kind: &'static str,
    pub strength: f64,
    /// Shock speed twice, or the head and tail characteristic speeds of a rarefaction.
    pub speeds: [f64; 2],
    pub left: [f64; 2],
    pub right: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RiemannReport {
    pub schema: &'static str,
    pub left: [f64; 2],
    pub right: [f64; 2],
    pub middle: [f64; 2],
    pub sigma: [f64; 2],
    pub residual: f64,
    pub iterations: usize,
    pub waves: Vec<WaveReport>,
}

/// Resolves the Riemann problem `(left, right)` into at most one wave per family.
pub fn riemann_report(sys: &IsentropicEuler, left: State, right: State, opts: &RiemannOptions) -> Result<RiemannReport> {
    let bx = sys.params.state_box;
    for (name, u) in [("left", left), ("right", right)] {
        if !bx.contains(&u) {
            return Err(Error::Config(format!("{name} state {u} lies outside system.state_box")));
        }
    }
    let fan = solve_riemann(sys, left, right, opts)?;
    let mut waves = Vec::new();
    for (fam, sigma, a, b) in [
        (Family::One, fan.sigma1, left, fan.middle),
        (Family::Two, fan.sigma2, fan.middle, right),
    ] {
        if sigma.abs() <= WAVE_ZERO {
            continue;
        }
        let (kind, speeds) = if sigma > 0.0 {
            let s = rh_speed(sys, a, b)?;
            ("shock", [s, s])
        } else {
            ("rarefaction", [sys.eigen(a)?.lambda(fam), sys.eigen(b)?.lambda(fam)])
        };
        waves.push(WaveReport {
            family: fam.index() as u8,
            kind,
            strength: sigma,
            speeds,
            left: a.as_array(),
            right: b.as_array(),
        });
    }
    Ok(RiemannReport {
        schema: RIEMANN_SCHEMA,
        left: left.as_array(),
        right: right.as_array(),
        middle: fan.middle.as_array(),
        sigma: [fan.sigma1, fan.sigma2],
        residual: fan.residual,
        iterations: fan.iterations,
        waves,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FunctionalRow {
    pub t: f64,
    pub events: usize,
    pub l: f64,
    pub q: f64,
    pub lq: f64,
    pub np_total: f64,
    pub tv: f64,
}

/// Result of a front tracking run with weight monitoring.
pub struct Evolution {
    pub data: PiecewiseConstant,
    pub solution: FrontSolution,
    pub weight_c: f64,
    pub rows: Vec<FunctionalRow>,
    pub snapshots: Vec<(Snapshot, WeightProfile)>,
    /// Largest `|a - 1|` over all event times and checkpoints.
    pub weight_deviation: f64,
    pub window_violations: usize,
    pub windows_checked: usize,
    pub lq_monotone: bool,
}

impl Evolution {
    pub fn tv0(&self) -> f64 {
        self.rows[0].tv
    }

    pub fn sup_tv(&self) -> f64 {
        self.rows.iter().map(|r| r.tv).fold(0.0, f64::max)
    }

    pub fn sup_np(&self) -> f64 {
        self.rows.iter().map(|r| r.np_total).fold(0.0, f64::max)
    }

    pub fn sup_l(&self) -> f64 {
        self.rows.iter().map(|r| r.l).fold(0.0, f64::max)
    }

    pub fn weight_increase_max(&self) -> f64 {
        self.solution
            .events
            .iter()
            .filter_map(|e| e.weight_increase)
            .fold(0.0, f64::max)
    }

    /// Hard invariants: monotone `L + kappa Q`, weight windows, weight decay at events.
    pub fn hard_invariants_hold(&self) -> bool {
        self.lq_monotone && self.window_violations == 0 && self.weight_increase_max() <= 1e-12
    }

    /// Builds the current weight profile and checks its shock windows.
    fn inspect(&mut self) -> Result<WeightProfile> {
        let sol = &self.solution;
        let p = build_weight(&sol.fronts, sol.time, &sol.glimm(), self.weight_c)?;
        let rep = check_weight_jumps(&p, &sol.fronts);
        self.windows_checked += rep.checked;
        self.window_violations += rep.violations.len();
        self.weight_deviation = self.weight_deviation.max(p.max_deviation());
        Ok(p)
    }

    pub fn functionals_csv(&self) -> String {
        let mut s = format!("{FUNCTIONALS_SCHEMA}\nt,events,L,Q,LQ,np_total,tv\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{},{},{},{},{}", r.t, r.events, r.l, r.q, r.lq, r.np_total, r.tv);
        }
        s
    }
}

fn row(sol: &FrontSolution) -> FunctionalRow {
    let g = sol.glimm();
    let states = sol.states();
    FunctionalRow {
        t: sol.time,
        events: sol.event_count(),
        l: g.l,
        q: g.q,
        lq: g.lq(),
        np_total: g.np_total,
        tv: states.windows(2).map(|w| w[0].dist(&w[1])).sum(),
    }
}

/// Weight value on every constancy interval of `snap`.
pub fn weights_on(snap: &Snapshot, profile: &WeightProfile) -> Vec<f64> {
    let b = &snap.data.breakpoints;
    (0..snap.data.states.len())
        .map(|k| {
            let x = match (k.checked_sub(1).map(|j| b[j]), b.get(k)) {
                (Some(lo), Some(&hi)) => 0.5 * (lo + hi),
                (Some(lo), None) => lo + 1.0,
                (None, Some(&hi)) => hi - 1.0,
                (None, None) => 0.0,
            };
            profile.at(x)
        })
        .collect()
}

/// Runs front tracking to `t_end`, recording functionals after every event.
pub fn evolve(sys: &IsentropicEuler, cfg: &RunConfig) -> Result<Evolution> {
    let data = cfg.data.build(sys, cfg.run.seed)?;
    evolve_data(sys, cfg, data)
}

pub fn evolve_data(sys: &IsentropicEuler, cfg: &RunConfig, data: PiecewiseConstant) -> Result<Evolution> {
    let mut ecfg = cfg.engine_config();
    let probe = FrontSolution::init(sys, &data, &ecfg)?;
    let c = cfg.weight.c.unwrap_or_else(|| default_weight_constant(probe.glimm().lq()));
    ecfg.monitor_weight_c = Some(c);
    let sol = FrontSolution::init(sys, &data, &ecfg)?;
    let t_end = cfg.engine.t_end;
    let n = cfg.engine.checkpoints;
    let checkpoints: Vec<f64> = (1..=n).map(|k| t_end * k as f64 / n as f64).collect();
    let mut ev = Evolution {
        data,
        solution: sol,
        weight_c: c,
        rows: Vec::new(),
        snapshots: Vec::new(),
        weight_deviation: 0.0,
        window_violations: 0,
        windows_checked: 0,
        lq_monotone: true,
    };
    ev.rows.push(row(&ev.solution));
    ev.inspect()?;
    for &tc in &checkpoints {
        while let Some(t) = ev.solution.next_event_time() {
            if t > tc {
                break;
            }
            ev.solution.advance(t)?;
            let r = row(&ev.solution);
            if r.lq > ev.rows.last().unwrap().lq + 1e-12 {
                ev.lq_monotone = false;
            }
            ev.rows.push(r);
            ev.inspect()?;
        }
        ev.solution.advance(tc)?;
        let p = ev.inspect()?;
        ev.snapshots.push((ev.solution.current(), p));
    }
    Ok(ev)
}

/// Files written by `evolve`.
pub fn evolve_files(ev: &Evolution) -> Result<Files> {
    let mut files = vec![
        ("event_log.csv".to_string(), event_log_csv(&ev.solution.events)),
        ("functionals.csv".to_string(), ev.functionals_csv()),
    ];
    for (k, (snap, p)) in ev.snapshots.iter().enumerate() {
        files.push((format!("snapshot_{k:03}.json"), snapshot_json(snap, Some(&weights_on(snap, p)))?));
    }
    Ok(files)
}

#[derive(Serialize)]
struct StabilityJson<'a> {
    schema: &'static str,
    hard_invariants_hold: bool,
    positive_d_fraction: f64,
    final_budget: f64,
    #[serde(flatten)]
    report: &'a StabilityReport,
}

pub fn stability(sys: &IsentropicEuler, cfg: &RunConfig) -> Result<StabilityReport> {
    let data = cfg.data.build(sys, cfg.run.seed)?;
    stability_experiment(sys, &cfg.stability_config(&data)).map_err(|e| e.context("stability experiment"))
}

pub fn stability_files(rep: &StabilityReport) -> Result<Files> {
    let doc = StabilityJson {
        schema: STABILITY_SCHEMA,
        hard_invariants_hold: rep.hard_invariants_hold(),
        positive_d_fraction: rep.positive_d_fraction(),
        final_budget: rep.final_budget(),
        report: rep,
    };
    Ok(vec![
        ("stability_report.json".into(), to_json(&doc)?),
        ("stability_series.csv".into(), stability_csv(rep)),
    ])
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Parse(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub schema: &'static str,
    pub suite: String,
    pub passed: bool,
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    fn new(suite: &str, items: Vec<CheckItem>) -> Self {
        CheckReport {
            schema: CHECK_SCHEMA,
            suite: suite.into(),
            passed: items.iter().all(|i| i.passed),
            items,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }
}

fn item(name: impl Into<String>, value: f64, bound: f64, passed: bool) -> CheckItem {
    CheckItem {
        name: name.into(),
        passed,
        value,
        bound,
    }
}

/// One strength-halving sweep of an interaction case.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InteractionSweep {
    pub case: InteractionCase,
    pub strengths: Vec<f64>,
    pub lhs: Vec<f64>,
    pub ratios: Vec<f64>,
    pub slope: f64,
}

/// Left sides of the interaction estimates for `s, s/2, s/4, ...` with equal incoming strengths.
pub fn interaction_sweep(sys: &IsentropicEuler, u: State, case: InteractionCase, s: f64, levels: usize) -> Result<InteractionSweep> {
    let opts = RiemannOptions::default();
    let mut strengths = Vec::new();
    let mut lhs = Vec::new();
    let mut ratios = Vec::new();
    for k in 0..levels {
        let sk = s / f64::from(1u32 << k);
        let outer = constructed_interaction(sys, u, case, sk, sk)?;
        let m = interaction_margin(sys, case, outer, sk, sk, &opts)?;
        strengths.push(sk);
        lhs.push(m.lhs);
        ratios.push(m.ratio());
    }
    let slope = crate::numerics::loglog_slope(&strengths, &lhs);
    Ok(InteractionSweep {
        case,
        strengths,
        lhs,
        ratios,
        slope,
    })
}

/// Interaction sweeps; slope of the left sides at least `min_slope` and `C0 eps <= 1`.
pub fn check_interactions(sys: &IsentropicEuler, eps: f64, min_slope: f64) -> Result<(CheckReport, Vec<InteractionSweep>)> {
    let u = State::new(1.0, 0.0);
    let mut items = Vec::new();
    let mut sweeps = Vec::new();
    let mut c0: f64 = 0.0;
    for case in [InteractionCase::HeadOn, InteractionCase::SameFamily1, InteractionCase::SameFamily2] {
        let sw = interaction_sweep(sys, u, case, 0.08, 4)?;
        c0 = sw.ratios.iter().copied().fold(c0, f64::max);
        items.push(item(format!("{case:?} log-log slope"), sw.slope, min_slope, sw.slope >= min_slope));
        sweeps.push(sw);
    }
    items.push(item("C0 eps", c0 * eps, 1.0, c0 * eps <= 1.0));
    Ok((CheckReport::new("interactions", items), sweeps))
}

/// Weight windows, `|a - 1| <= C0 eps` and weight decay at events on one evolution.
pub fn check_weights(ev: &Evolution, c0_bound: f64) -> CheckReport {
    let items = vec![
        item("window violations", ev.window_violations as f64, 0.0, ev.window_violations == 0),
        item("max |a - 1|", ev.weight_deviation, c0_bound, ev.weight_deviation <= c0_bound),
        item("max weight increase at events", ev.weight_increase_max(), 1e-12, ev.weight_increase_max() <= 1e-12),
    ];
    CheckReport::new("weights", items)
}

/// `|a - 1|` bound `2 C (1 + kappa eps) eps` with `eps = L(0)`.
pub fn weight_deviation_bound(c: f64, kappa: f64, eps: f64) -> f64 {
    2.0 * c * (1.0 + kappa * eps) * eps
}

/// Condition H on random dominated pairs: ratio bounded by `bound`.
pub fn check_condition_h(ev: &Evolution, pairs: usize, seed: u64, bound: f64) -> Result<CheckReport> {
    let xs = &ev.data.breakpoints;
    let (a, b) = match (xs.first(), xs.last()) {
        (Some(&a), Some(&b)) => (a - 0.5, b + 0.5),
        _ => (-1.0, 1.0),
    };
    let rep = domination_pairs(&ev.solution, pairs, (a, b), seed)?;
    Ok(CheckReport::new(
        "conditionH",
        vec![
            item("pairs", rep.pairs as f64, pairs as f64, rep.pairs == pairs),
            item("max TV ratio", rep.max_ratio, bound, rep.max_ratio <= bound),
        ],
    ))
}

pub fn check(sys: &IsentropicEuler, cfg: &RunConfig, suite: &str) -> Result<CheckReport> {
    match suite {
        "interactions" => Ok(check_interactions(sys, 0.2, 2.7)?.0),
        "weights" => {
            let ev = evolve(sys, cfg)?;
            let eps = ev.rows[0].l;
            Ok(check_weights(&ev, weight_deviation_bound(ev.weight_c, cfg.engine.kappa, eps)))
        }
        "conditionH" => {
            let ev = evolve(sys, cfg)?;
            let eps = ev.rows[0].l;
            check_condition_h(&ev, 100, cfg.run.seed, 2.0 * (1.0 + cfg.engine.kappa * eps))
        }
        other => Err(Error::Config(format!(
            "unknown check suite {other:?}; expected interactions, weights or conditionH"
        ))),
    }
}

/// Runs the sweep in parallel and merges one CSV row per value, in input order.
pub fn sweep(sys: &IsentropicEuler, cfg: &RunConfig) -> Result<String> {
    let sw = &cfg.sweep;
    if sw.values.is_empty() {
        return Err(Error::Config("sweep.values must not be empty".into()));
    }
    let configs = sw
        .values
        .iter()
        .map(|&v| {
            let c = cfg.with_parameter(&sw.parameter, v)?;
            c.validate().map_err(|e| e.context(&format!("sweep value {v}")))?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = format!("{SWEEP_SCHEMA}\n");
    match sw.command.as_str() {
        "evolve" => {
            out.push_str("value,events,tv0,sup_tv,sup_np_total,final_np_total,lq0,lq_final,hard_ok\n");
            let rows = configs
                .par_iter()
                .map(|c| evolve(sys, c))
                .collect::<Result<Vec<_>>>()?;
            for (v, ev) in sw.values.iter().zip(&rows) {
                let last = ev.rows.last().unwrap();
                let _ = writeln!(
                    out,
                    "{v},{},{},{},{},{},{},{},{}",
                    last.events,
                    ev.tv0(),
                    ev.sup_tv(),
                    ev.sup_np(),
                    last.np_total,
                    ev.rows[0].lq,
                    last.lq,
                    ev.hard_invariants_hold()
                );
            }
        }
        "stability" => {
            out.push_str("value,dx,e0,e_final,budget,positive_d_fraction,bound_holds,hard_ok\n");
            let rows = configs
                .par_iter()
                .map(|c| stability(sys, c))
                .collect::<Result<Vec<_>>>()?;
            for (v, r) in sw.values.iter().zip(&rows) {
                let _ = writeln!(
                    out,
                    "{v},{},{},{},{},{},{},{}",
                    r.dx,
                    r.e0,
                    r.rows.last().unwrap().e,
                    r.final_budget(),
                    r.positive_d_fraction(),
                    r.bound_holds,
                    r.hard_invariants_hold()
                );
            }
        }
        other => return Err(Error::Config(format!("sweep.command must be evolve or stability, got {other:?}"))),
    }
    Ok(out)
}
