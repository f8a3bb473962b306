//! Reference solution on a uniform grid: first-order Godunov with the exact
//! Riemann solver, cellwise entropy bookkeeping and one-sided traces along
//! curves from adjacent-cell averages.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::{PiecewiseConstant, TraceSource};
use crate::error::{Error, Result};
use crate::numerics::brent;
use crate::system::{IsentropicEuler, State, System2x2};

/// Exact self-similar Riemann solution in primitive variables, sampled at `xi = x / t`.
#[derive(Clone, Copy, Debug)]
pub struct ExactRiemann {
    gamma: f64,
    c1: f64,
    k: f64,
    rho_l: f64,
    v_l: f64,
    rho_r: f64,
    v_r: f64,
    /// `None` when a vacuum opens between the waves.
    star: Option<(f64, f64)>,
}

impl ExactRiemann {
    pub fn new(gamma: f64, left: State, right: State) -> Result<Self> {
        if !(left.rho > 0.0 && right.rho > 0.0) {
            return Err(Error::Domain(format!("exact Riemann solver needs positive densities, got {left}, {right}")));
        }
        let c1 = 2.0 * gamma.sqrt() / (gamma - 1.0);
        let k = 0.5 * (gamma - 1.0);
        let (rho_l, v_l) = (left.rho, left.velocity());
        let (rho_r, v_r) = (right.rho, right.velocity());
        let phi = |rho: f64, rk: f64| -> f64 {
            if rho > rk {
                ((rho.powf(gamma) - rk.powf(gamma)) * (rho - rk) / (rho * rk)).sqrt()
            } else {
                c1 * (rho.powf(k) - rk.powf(k))
            }
        };
        let g = |rho: f64| phi(rho, rho_l) + phi(rho, rho_r) + v_r - v_l;
        let star = if g(0.0) >= 0.0 {
            None
        } else {
            let mut hi = rho_l.max(rho_r);
            let mut n = 0;
            while g(hi) <= 0.0 {
                hi *= 2.0;
                n += 1;
                if n > 200 {
                    return Err(Error::numerical("exact Riemann bracket failed", g(hi)));
                }
            }
            let rho = brent(g, 0.0, hi, 1e-15 * hi, 300)?;
            Some((rho, v_l - phi(rho, rho_l)))
        };
        Ok(ExactRiemann {
            gamma,
            c1,
            k,
            rho_l,
            v_l,
            rho_r,
            v_r,
            star,
        })
    }

    fn c(&self, rho: f64) -> f64 {
        self.gamma.sqrt() * rho.powf(self.k)
    }

    pub fn middle(&self) -> Option<State> {
        self.star.map(|(r, v)| State::from_primitive(r, v))
    }

    fn left_side(&self, xi: f64, rho_s: f64, v_s: f64) -> State {
        let left = State::from_primitive(self.rho_l, self.v_l);
        if rho_s > self.rho_l {
            let s = (rho_s * v_s - self.rho_l * self.v_l) / (rho_s - self.rho_l);
            return if xi < s { left } else { State::from_primitive(rho_s, v_s) };
        }
        let head = self.v_l - self.c(self.rho_l);
        let tail = v_s - self.c(rho_s);
        if xi <= head {
            left
        } else if xi >= tail {
            State::from_primitive(rho_s, v_s)
        } else {
            let w2 = self.v_l + self.c1 * self.rho_l.powf(self.k);
            let rk = (w2 - xi) / (0.5 * (self.gamma + 1.0) * self.c1);
            let rho = rk.max(0.0).powf(1.0 / self.k);
            State::from_primitive(rho, w2 - self.c1 * rk)
        }
    }

    fn right_side(&self, xi: f64, rho_s: f64, v_s: f64) -> State {
        let right = State::from_primitive(self.rho_r, self.v_r);
        if rho_s > self.rho_r {
            let s = (rho_s * v_s - self.rho_r * self.v_r) / (rho_s - self.rho_r);
            return if xi > s { right } else { State::from_primitive(rho_s, v_s) };
        }
        let head = self.v_r + self.c(self.rho_r);
        let tail = v_s + self.c(rho_s);
        if xi >= head {
            right
        } else if xi <= tail {
            State::from_primitive(rho_s, v_s)
        } else {
            let w1 = self.v_r - self.c1 * self.rho_r.powf(self.k);
            let rk = (xi - w1) / (0.5 * (self.gamma + 1.0) * self.c1);
            let rho = rk.max(0.0).powf(1.0 / self.k);
            State::from_primitive(rho, w1 + self.c1 * rk)
        }
    }

    /// Solution value at `xi = x / t`.
    pub fn sample(&self, xi: f64) -> State {
        match self.star {
            Some((rho_s, v_s)) => {
                if xi <= v_s {
                    self.left_side(xi, rho_s, v_s)
                } else {
                    self.right_side(xi, rho_s, v_s)
                }
            }
            None => {
                let w2 = self.v_l + self.c1 * self.rho_l.powf(self.k);
                let w1 = self.v_r - self.c1 * self.rho_r.powf(self.k);
                if xi <= w2 {
                    self.left_side(xi, 0.0, w2)
                } else if xi >= w1 {
                    self.right_side(xi, 0.0, w1)
                } else {
                    State::VACUUM
                }
            }
        }
    }
}

/// Cell averages on a uniform grid at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSolution {
    pub x0: f64,
    pub dx: f64,
    pub time: f64,
    pub cells: Vec<State>,
}

/// Per-step bookkeeping of the scheme.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StepReport {
    /// Largest cellwise entropy production (`<= 0` up to roundoff).
    pub max_production: f64,
    /// `sum_i P_i dx`, the total discrete entropy production of the step.
    pub total_production: f64,
}

pub const GRID_SCHEMA: &str = "fronttrack.grid v1";

impl GridSolution {
    /// Exact cell averages of piecewise-constant data on `n` cells starting at `x0`.
    pub fn project(data: &PiecewiseConstant, x0: f64, dx: f64, n: usize) -> Self {
        let cells = (0..n)
            .map(|i| {
                let a = x0 + i as f64 * dx;
                let b = a + dx;
                let mut pts = vec![a];
                pts.extend(data.breakpoints.iter().copied().filter(|&x| x > a && x < b));
                pts.push(b);
                let mut acc = State::VACUUM;
                for w in pts.windows(2) {
                    acc = acc + ((w[1] - w[0]) / dx) * data.at(0.5 * (w[0] + w[1]));
                }
                acc
            })
            .collect();
        GridSolution {
            x0,
            dx,
            time: 0.0,
            cells,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn x_end(&self) -> f64 {
        self.x0 + self.dx * self.cells.len() as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.dx
    }

    /// Index of the cell containing `x`, if inside the grid.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        let j = ((x - self.x0) / self.dx).floor();
        (j >= 0.0 && (j as usize) < self.cells.len()).then_some(j as usize)
    }

    pub fn total_mass(&self) -> State {
        self.cells.iter().fold(State::VACUUM, |a, &c| a + self.dx * c)
    }

    /// Largest time step allowed by `lambda_hat dt / dx <= cfl`.
    pub fn max_dt(&self, lambda_hat: f64, cfl: f64) -> f64 {
        cfl * self.dx / lambda_hat
    }

    /// One Godunov step with transmissive boundaries.
    pub fn godunov_step(&mut self, sys: &IsentropicEuler, dt: f64, lambda_hat: f64) -> Result<StepReport> {
        if !(dt > 0.0) || lambda_hat * dt / self.dx > 0.5 + 1e-12 {
            return Err(Error::Config(format!(
                "CFL condition lambda_hat dt / dx <= 1/2 violated: {} ",
                lambda_hat * dt / self.dx
            )));
        }
        let n = self.cells.len();
        let g = sys.gamma();
        let mut flux = Vec::with_capacity(n + 1);
        let mut qflux = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let ul = self.cells[i.saturating_sub(1)];
            let ur = self.cells[i.min(n - 1)];
            let u0 = if ul == ur { ul } else { ExactRiemann::new(g, ul, ur)?.sample(0.0) };
            flux.push(sys.flux(u0)?);
            qflux.push(sys.entropy_flux(u0)?);
        }
        let r = dt / self.dx;
        let mut rep = StepReport {
            max_production: f64::NEG_INFINITY,
            total_production: 0.0,
        };
        for i in 0..n {
            let old = self.cells[i];
            let new = old - r * (flux[i + 1] - flux[i]);
            if !(new.rho > 0.0) || !new.is_finite() {
                return Err(Error::numerical(
                    format!("cell {i} left the admissible set at t = {}: {new}", self.time + dt),
                    new.rho,
                ));
            }
            let p = (sys.entropy(new)? - sys.entropy(old)?) / dt + (qflux[i + 1] - qflux[i]) / self.dx;
            rep.max_production = rep.max_production.max(p);
            rep.total_production += p * self.dx * dt;
            self.cells[i] = new;
        }
        self.time += dt;
        Ok(rep)
    }

    /// Averages of the `k` cells on each side of the cell containing `x`.
    pub fn traces_at(&self, x: f64, k: usize) -> Option<(State, State)> {
        let j = self.cell_of(x)?;
        if j < k || j + k >= self.cells.len() {
            return None;
        }
        let avg = |r: std::ops::Range<usize>| {
            let m = r.len() as f64;
            (1.0 / m) * r.fold(State::VACUUM, |a, i| a + self.cells[i])
        };
        Some((avg(j - k..j), avg(j + 1..j + 1 + k)))
    }

    /// CSV with a schema line, a time line and columns `x_center,rho,mom`.
    pub fn to_csv(&self) -> String {
        let mut s = format!("# schema: {GRID_SCHEMA}\n# time: {}\n# dx: {}\nx_center,rho,mom\n", self.time, self.dx);
        for (i, c) in self.cells.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", self.center(i), c.rho, c.mom);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut time = None;
        let mut dx = None;
        let mut schema_ok = false;
        let mut centers = Vec::new();
        let mut cells = Vec::new();
        let mut header_seen = false;
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("schema:") {
                    schema_ok = v.trim() == GRID_SCHEMA;
                } else if let Some(v) = rest.strip_prefix("time:") {
                    time = Some(parse_f64(v, ln)?);
                } else if let Some(v) = rest.strip_prefix("dx:") {
                    dx = Some(parse_f64(v, ln)?);
                }
                continue;
            }
            if !header_seen {
                if line != "x_center,rho,mom" {
                    return Err(Error::Parse(format!("line {}: expected header x_center,rho,mom", ln + 1)));
                }
                header_seen = true;
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!("line {}: expected 3 columns", ln + 1)));
            }
            centers.push(parse_f64(cols[0], ln)?);
            cells.push(State::new(parse_f64(cols[1], ln)?, parse_f64(cols[2], ln)?));
        }
        if !schema_ok {
            return Err(Error::Parse(format!("missing or unknown schema line (expected {GRID_SCHEMA})")));
        }
        if cells.is_empty() {
            return Err(Error::Parse("grid has no cells".into()));
        }
        let dx = match dx {
            Some(d) => d,
            None if centers.len() > 1 => centers[1] - centers[0],
            None => return Err(Error::Parse("cannot infer dx from a single cell".into())),
        };
        Ok(GridSolution {
            x0: centers[0] - 0.5 * dx,
            dx,
            time: time.unwrap_or(0.0),
            cells,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            schema: &'a str,
            time: f64,
            x0: f64,
            dx: f64,
            cells: Vec<[f64; 2]>,
        }
        serde_json::to_string(&Doc {
            schema: GRID_SCHEMA,
            time: self.time,
            x0: self.x0,
            dx: self.dx,
            cells: self.cells.iter().map(|c| c.as_array()).collect(),
        })
        .map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Doc {
            schema: String,
            time: f64,
            x0: f64,
            dx: f64,
            cells: Vec<[f64; 2]>,
        }
        let d: Doc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if d.schema != GRID_SCHEMA {
            return Err(Error::Parse(format!("unknown grid schema {:?}", d.schema)));
        }
        Ok(GridSolution {
            x0: d.x0,
            dx: d.dx,
            time: d.time,
            cells: d.cells.iter().map(|c| State::new(c[0], c[1])).collect(),
        })
    }
}

fn parse_f64(s: &str, ln: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {}: bad number {:?}", ln + 1, s.trim())))
}

/// Traces of one grid snapshot with `k` cells per side.
pub struct GridTraces<'a> {
    pub grid: &'a GridSolution,
    pub k: usize,
}

impl TraceSource for GridTraces<'_> {
    fn traces(&self, _t: f64, x: f64) -> Option<(State, State)> {
        self.grid.traces_at(x, self.k)
    }
}

/// One trace sample along a curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceSample {
    pub t: f64,
    pub x: f64,
    pub left: State,
    pub right: State,
}

/// Left and right traces along `x = curve(t)` at every stored grid time.
pub fn trace_along(trajectory: &[GridSolution], curve: &dyn Fn(f64) -> f64, k: usize) -> Result<Vec<TraceSample>> {
    trajectory
        .iter()
        .map(|g| {
            let x = curve(g.time);
            let (left, right) = g
                .traces_at(x, k)
                .ok_or_else(|| Error::Range(format!("curve point x = {x} at t = {} is too close to the grid edge", g.time)))?;
            Ok(TraceSample {
                t: g.time,
                x,
                left,
                right,
            })
        })
        .collect()
}

/// Evolves `grid` to `t_end` with the largest CFL-admissible steps, calling
/// `visit` after every step.
pub fn evolve_grid(
    sys: &IsentropicEuler,
    grid: &mut GridSolution,
    t_end: f64,
    lambda_hat: f64,
    cfl: f64,
    mut visit: impl FnMut(&GridSolution, &StepReport) -> Result<()>,
) -> Result<()> {
    if !(cfl > 0.0 && cfl <= 0.5) {
        return Err(Error::Config(format!("wild.cfl must lie in (0, 1/2], got {cfl}")));
    }
    let dt_max = grid.max_dt(lambda_hat, cfl);
    while grid.time < t_end - 1e-14 {
        let dt = dt_max.min(t_end - grid.time);
        let rep = grid.godunov_step(sys, dt, lambda_hat)?;
        visit(grid, &rep)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::Family;
    use crate::wavecurves::{hugoniot_speed, rarefaction_curve, shock_curve, Side};

    fn sys() -> IsentropicEuler {
        IsentropicEuler::default_gamma2()
    }

    #[test]
    fn exact_solver_reproduces_wave_curves() {
        let e = sys();
        let u = State::new(1.0, 0.0);
        let us = shock_curve(&e, u, Family::One, 0.1, Side::LeftAnchored).unwrap();
        let r = ExactRiemann::new(2.0, u, us.state).unwrap();
        assert!(r.middle().unwrap().dist(&us.state) < 1e-12);
        assert_eq!(r.sample(us.speed - 1e-6), u);
        assert!(r.sample(us.speed + 1e-6).dist(&us.state) < 1e-12);

        let ur = rarefaction_curve(&e, u, Family::Two, 0.1).unwrap().state;
        let r = ExactRiemann::new(2.0, u, ur).unwrap();
        assert!(r.middle().unwrap().dist(&u) < 1e-9);
        // fan interior keeps w1 and has lambda2 = xi
        let xi = 0.5 * (e.eigen(u).unwrap().lambda2 + e.eigen(ur).unwrap().lambda2);
        let m = r.sample(xi);
        assert!((e.eigen(m).unwrap().lambda2 - xi).abs() < 1e-12);
        assert!((e.riemann_invariants(m).0 - e.riemann_invariants(u).0).abs() < 1e-12);
    }

    #[test]
    fn exact_solver_vacuum() {
        let r = ExactRiemann::new(2.0, State::from_primitive(1.0, -5.0), State::from_primitive(1.0, 5.0)).unwrap();
        assert!(r.middle().is_none());
        assert_eq!(r.sample(0.0), State::VACUUM);
    }

    #[test]
    fn constant_data_is_steady() {
        let e = sys();
        let u = State::from_primitive(1.2, 0.3);
        let mut g = GridSolution::project(&PiecewiseConstant::constant(u), -1.0, 0.01, 200);
        let lh = 2.0 * e.speed_bound();
        for _ in 0..10 {
            g.godunov_step(&e, g.max_dt(lh, 0.5), lh).unwrap();
        }
        assert!(g.cells.iter().all(|c| c.dist(&u) < 1e-14));
    }

    #[test]
    fn shock_moves_at_rh_speed_and_conserves() {
        let e = sys();
        let u = State::new(1.0, 0.0);
        let ur = shock_curve(&e, u, Family::One, 0.1, Side::LeftAnchored).unwrap().state;
        let sp = hugoniot_speed(&e, u, ur, Family::One);
        let data = PiecewiseConstant {
            breakpoints: vec![0.0],
            states: vec![u, ur],
        };
        let lh = 2.0 * e.speed_bound();
        let mut errs = Vec::new();
        for &n in &[200usize, 400] {
            let dx = 2.0 / n as f64;
            let mut g = GridSolution::project(&data, -1.0, dx, n);
            let t_end = 0.2;
            let mut worst: f64 = f64::NEG_INFINITY;
            evolve_grid(&e, &mut g, t_end, lh, 0.5, |_, r| {
                worst = worst.max(r.max_production);
                Ok(())
            })
            .unwrap();
            assert!(worst <= 1e-10, "entropy production {worst}");
            let exact = PiecewiseConstant {
                breakpoints: vec![sp * t_end],
                states: vec![u, ur],
            };
            let err: f64 = (0..n)
                .map(|i| g.cells[i].dist(&GridSolution::project(&exact, -1.0, dx, n).cells[i]) * dx)
                .sum();
            errs.push(err);
        }
        assert!(errs[1] < errs[0], "{errs:?}");
    }

    #[test]
    fn csv_and_json_round_trip() {
        let g = GridSolution {
            x0: -0.5,
            dx: 0.25,
            time: 0.125,
            cells: vec![State::new(1.0, 0.1), State::new(0.9, -0.2), State::new(1.1, 1.0 / 3.0), State::new(1.0, 0.0)],
        };
        let back = GridSolution::from_csv(&g.to_csv()).unwrap();
        assert_eq!(back, g);
        assert_eq!(GridSolution::from_json(&g.to_json().unwrap()).unwrap(), g);
        assert!(GridSolution::from_csv("x_center,rho,mom\n0,1,0\n").is_err());
    }

    #[test]
    fn traces_exclude_the_straddled_cell() {
        let g = GridSolution {
            x0: 0.0,
            dx: 1.0,
            time: 0.0,
            cells: (0..7).map(|i| State::new(1.0 + i as f64, 0.0)).collect(),
        };
        let (l, r) = g.traces_at(3.5, 2).unwrap();
        assert_eq!(l.rho, 2.5);
        assert_eq!(r.rho, 5.5);
        assert!(g.traces_at(1.5, 2).is_none());
        let tr = trace_along(&[g.clone()], &|_| 3.2, 2).unwrap();
        assert_eq!(tr[0].left.rho, 2.5);
        assert!(matches!(trace_along(&[g], &|_| 0.2, 2), Err(Error::Range(_))));
    }
}
