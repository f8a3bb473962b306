//! Shock and rarefaction curves, the composite forward wave curves `T_i`
//! and the two-wave Riemann solver in strength coordinates.
//!
//! Strengths are signed: positive on the shock branch (parametrized by the
//! distance `|u - anchor|`), negative on the rarefaction branch
//! (parametrized by arclength along the unit eigenvector field). Both
//! parametrizations agree to second order at the anchor, so the composite
//! curve is `C^2`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{brent, pow_divided};
use crate::system::{Family, IsentropicEuler, State, System2x2};

/// Which endpoint of the wave the anchor state is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// The anchor is the left state; the curve returns right states.
    LeftAnchored,
    /// The anchor is the right state; the curve returns left states.
    RightAnchored,
}

/// A point on a shock or rarefaction curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WaveCurvePoint {
    pub state: State,
    /// Shock speed on the shock branch, characteristic speed on the rarefaction branch.
    pub speed: f64,
    pub s: f64,
}

/// Outcome of the two-wave Riemann solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RiemannFanSpec {
    pub sigma1: f64,
    pub sigma2: f64,
    pub middle: State,
    /// `|T2(sigma2) T1(sigma1) u_minus - u_plus|` at the returned strengths.
    pub residual: f64,
    pub iterations: usize,
}

/// Tolerances of the Riemann solve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiemannOptions {
    /// Largest `|u_minus - u_plus|` accepted.
    pub closeness: f64,
    /// Target residual.
    pub tol: f64,
    /// Residual above which the solve is reported as failed.
    pub accept: f64,
    pub max_iter: usize,
}

impl Default for RiemannOptions {
    fn default() -> Self {
        RiemannOptions {
            closeness: 0.5,
            tol: 1e-12,
            accept: 1e-10,
            max_iter: 100,
        }
    }
}

const RAREFACTION_BASE_STEPS: usize = 64;
const RAREFACTION_MAX_STEPS: usize = 1 << 14;
const RAREFACTION_CERT: f64 = 1e-10;

/// Sign of `(v_b - v_a) / (rho_b - rho_a)` along the Hugoniot branch.
fn branch_sign(fam: Family) -> f64 {
    match fam {
        Family::One => -1.0,
        Family::Two => 1.0,
    }
}

/// Direction of density change from the anchor along the admissible shock branch.
fn density_direction(fam: Family, side: Side) -> f64 {
    match (fam, side) {
        (Family::One, Side::LeftAnchored) | (Family::Two, Side::RightAnchored) => 1.0,
        (Family::Two, Side::LeftAnchored) | (Family::One, Side::RightAnchored) => -1.0,
    }
}

/// `(rho_b^g - rho_a^g) / (rho_b - rho_a)`.
fn pressure_divided(gamma: f64, rho_a: f64, rho_b: f64) -> f64 {
    rho_a.powf(gamma - 1.0) * pow_divided((rho_b - rho_a) / rho_a, gamma)
}

/// Offset `b - a` from the anchor to the Hugoniot point of density `rho`.
fn hugoniot_offset(sys: &IsentropicEuler, anchor: State, fam: Family, rho: f64) -> State {
    let g = sys.gamma();
    let ra = anchor.rho;
    let dr = rho - ra;
    let dd = pressure_divided(g, ra, rho);
    let dv = branch_sign(fam) * dr * (dd / (ra * rho)).sqrt();
    let va = anchor.mom / ra;
    State::new(dr, va * dr + rho * dv)
}

/// Rankine-Hugoniot speed between an anchor and a state on its i-Hugoniot branch.
pub fn hugoniot_speed(sys: &IsentropicEuler, anchor: State, other: State, fam: Family) -> f64 {
    let dd = pressure_divided(sys.gamma(), anchor.rho, other.rho);
    anchor.velocity() + branch_sign(fam) * (other.rho / anchor.rho * dd).sqrt()
}

/// Least-squares Rankine-Hugoniot speed of an arbitrary jump.
pub fn rh_speed(sys: &IsentropicEuler, left: State, right: State) -> Result<f64> {
    let du = right - left;
    let n2 = du.dot(&du);
    if n2 == 0.0 {
        return Err(Error::Domain("RH speed of a zero jump".into()));
    }
    let df = sys.flux(right)? - sys.flux(left)?;
    Ok(df.dot(&du) / n2)
}

/// `|f(u_R) - f(u_L) - speed (u_R - u_L)|`.
pub fn rh_residual(sys: &IsentropicEuler, left: State, right: State, speed: f64) -> Result<f64> {
    let r = sys.flux(right)? - sys.flux(left)? - speed * (right - left);
    Ok(r.norm())
}

/// `q(u_R) - q(u_L) - speed (eta(u_R) - eta(u_L))`; nonpositive for admissible shocks.
pub fn entropy_dissipation(sys: &IsentropicEuler, left: State, right: State, speed: f64) -> Result<f64> {
    Ok(sys.entropy_flux(right)? - sys.entropy_flux(left)?
        - speed * (sys.entropy(right)? - sys.entropy(left)?))
}

fn check_in_domain(sys: &IsentropicEuler, u: State, what: &str) -> Result<()> {
    if !(u.rho > 0.0) || !sys.in_invariant_region(u) {
        return Err(Error::Range(format!("{what}: state {u} leaves the admissible region")));
    }
    Ok(())
}

/// Admissible shock curve through `anchor`, parametrized by `s = |u - anchor|`.
pub fn shock_curve(
    sys: &IsentropicEuler,
    anchor: State,
    fam: Family,
    s: f64,
    side: Side,
) -> Result<WaveCurvePoint> {
    check_in_domain(sys, anchor, "shock_curve anchor")?;
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("shock strength must be >= 0, got {s}")));
    }
    if s == 0.0 {
        let sp = sys.eigen(anchor)?;
        return Ok(WaveCurvePoint {
            state: anchor,
            speed: sp.lambda(fam),
            s,
        });
    }
    let dir = density_direction(fam, side);
    let ra = anchor.rho;
    let chord = |rho: f64| hugoniot_offset(sys, anchor, fam, rho).norm() - s;
    // |rho - ra| <= |u - anchor|, so the root lies within distance s of ra
    let far = if dir > 0.0 {
        ra + s
    } else {
        let lo = (ra - s).max(ra * 1e-9);
        if chord(lo) < 0.0 {
            return Err(Error::Range(format!(
                "shock strength {s} from {anchor} reaches vacuum"
            )));
        }
        lo
    };
    let rho = brent(chord, ra, far, 1e-15 * ra.max(1.0), 200)?;
    let state = anchor + hugoniot_offset(sys, anchor, fam, rho);
    check_in_domain(sys, state, "shock_curve")?;
    Ok(WaveCurvePoint {
        state,
        speed: hugoniot_speed(sys, anchor, state, fam),
        s,
    })
}

fn rk4_rarefaction(sys: &IsentropicEuler, anchor: State, fam: Family, s: f64, n: usize) -> Result<State> {
    let h = s / n as f64;
    let field = |u: State| -> Result<State> {
        if !(u.rho > 0.0) || !u.is_finite() {
            return Err(Error::Range(format!("rarefaction curve reaches vacuum at {u}")));
        }
        Ok(sys.eigen(u)?.r(fam))
    };
    let mut u = anchor;
    for _ in 0..n {
        let k1 = field(u)?;
        let k2 = field(u + (0.5 * h) * k1)?;
        let k3 = field(u + (0.5 * h) * k2)?;
        let k4 = field(u + h * k3)?;
        u = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok(u)
}

/// Rarefaction curve from `anchor`: integrates `du/ds = r_i(u)` over arclength `s`.
/// Characteristic speed `lambda_i` increases along the curve.
pub fn rarefaction_curve(sys: &IsentropicEuler, anchor: State, fam: Family, s: f64) -> Result<WaveCurvePoint> {
    check_in_domain(sys, anchor, "rarefaction_curve anchor")?;
    if !(s >= 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("rarefaction length must be >= 0, got {s}")));
    }
    if s == 0.0 {
        return Ok(WaveCurvePoint {
            state: anchor,
            speed: sys.eigen(anchor)?.lambda(fam),
            s,
        });
    }
    let mut n = RAREFACTION_BASE_STEPS;
    let mut coarse = rk4_rarefaction(sys, anchor, fam, s, n)?;
    loop {
        let fine = rk4_rarefaction(sys, anchor, fam, s, 2 * n)?;
        let diff = fine.dist(&coarse);
        if diff <= RAREFACTION_CERT {
            check_in_domain(sys, fine, "rarefaction_curve")?;
            return Ok(WaveCurvePoint {
                state: fine,
                speed: sys.eigen(fine)?.lambda(fam),
                s,
            });
        }
        n *= 2;
        if n > RAREFACTION_MAX_STEPS {
            return Err(Error::numerical(
                "rarefaction integration could not be certified",
                diff,
            ));
        }
        coarse = fine;
    }
}

/// `T_i(sigma)(u)`: shock branch for `sigma > 0`, rarefaction branch for `sigma < 0`.
pub fn forward_wave_curve(sys: &IsentropicEuler, u: State, fam: Family, sigma: f64) -> Result<State> {
    if sigma > 0.0 {
        Ok(shock_curve(sys, u, fam, sigma, Side::LeftAnchored)?.state)
    } else if sigma < 0.0 {
        Ok(rarefaction_curve(sys, u, fam, -sigma)?.state)
    } else {
        check_in_domain(sys, u, "forward_wave_curve")?;
        Ok(u)
    }
}

/// `T_2(sigma2) T_1(sigma1)(u)`, returning the middle and right states.
pub fn compose(sys: &IsentropicEuler, u: State, sigma1: f64, sigma2: f64) -> Result<(State, State)> {
    let mid = forward_wave_curve(sys, u, Family::One, sigma1)?;
    let right = forward_wave_curve(sys, mid, Family::Two, sigma2)?;
    Ok((mid, right))
}

fn newton_solve(
    sys: &IsentropicEuler,
    u_minus: State,
    target: State,
    start: (f64, f64),
    opts: &RiemannOptions,
) -> Result<RiemannFanSpec> {
    let resid = |s1: f64, s2: f64| -> Result<State> { Ok(compose(sys, u_minus, s1, s2)?.1 - target) };
    let (mut s1, mut s2) = start;
    let mut f = resid(s1, s2)?;
    let h = 1e-6;
    let mut polish = 0;
    for it in 0..opts.max_iter {
        // once converged, keep stepping while the residual still drops so
        // that absent waves come out at roundoff size
        if f.norm() <= opts.tol {
            polish += 1;
        }
        if f.norm() == 0.0 || polish > 2 {
            let middle = forward_wave_curve(sys, u_minus, Family::One, s1)?;
            return Ok(RiemannFanSpec {
                sigma1: s1,
                sigma2: s2,
                middle,
                residual: f.norm(),
                iterations: it,
            });
        }
        let c1 = (1.0 / (2.0 * h)) * (resid(s1 + h, s2)? - resid(s1 - h, s2)?);
        let c2 = (1.0 / (2.0 * h)) * (resid(s1, s2 + h)? - resid(s1, s2 - h)?);
        let det = c1.rho * c2.mom - c2.rho * c1.mom;
        if det.abs() < 1e-14 {
            return Err(Error::numerical("singular wave-curve Jacobian", f.norm()));
        }
        let d1 = -(c2.mom * f.rho - c2.rho * f.mom) / det;
        let d2 = -(-c1.mom * f.rho + c1.rho * f.mom) / det;
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let (n1, n2) = (s1 + step * d1, s2 + step * d2);
            if let Ok(fnew) = resid(n1, n2) {
                if fnew.norm() < f.norm() {
                    s1 = n1;
                    s2 = n2;
                    f = fnew;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !accepted {
            if f.norm() <= opts.tol {
                let middle = forward_wave_curve(sys, u_minus, Family::One, s1)?;
                return Ok(RiemannFanSpec {
                    sigma1: s1,
                    sigma2: s2,
                    middle,
                    residual: f.norm(),
                    iterations: it,
                });
            }
            if f.norm() <= opts.accept {
                break;
            }
            return Err(Error::numerical("damped Newton stalled", f.norm()));
        }
    }
    if f.norm() <= opts.accept {
        let middle = forward_wave_curve(sys, u_minus, Family::One, s1)?;
        return Ok(RiemannFanSpec {
            sigma1: s1,
            sigma2: s2,
            middle,
            residual: f.norm(),
            iterations: opts.max_iter,
        });
    }
    Err(Error::numerical("Riemann solve did not converge", f.norm()))
}

/// Strengths `(sigma1, sigma2)` with `u_plus = T_2(sigma2) T_1(sigma1)(u_minus)`.
///
/// Damped Newton from `(0, 0)`; if it stalls, the target is approached by
/// continuation along the segment `u_minus -> u_plus`.
pub fn solve_riemann(
    sys: &IsentropicEuler,
    u_minus: State,
    u_plus: State,
    opts: &RiemannOptions,
) -> Result<RiemannFanSpec> {
    check_in_domain(sys, u_minus, "solve_riemann left state")?;
    check_in_domain(sys, u_plus, "solve_riemann right state")?;
    let dist = u_minus.dist(&u_plus);
    if dist > opts.closeness {
        return Err(Error::Range(format!(
            "states {u_minus} and {u_plus} are {dist:.4} apart, beyond the closeness radius {}",
            opts.closeness
        )));
    }
    if dist == 0.0 {
        return Ok(RiemannFanSpec {
            sigma1: 0.0,
            sigma2: 0.0,
            middle: u_minus,
            residual: 0.0,
            iterations: 0,
        });
    }
    match newton_solve(sys, u_minus, u_plus, (0.0, 0.0), opts) {
        Ok(fan) => Ok(fan),
        Err(Error::Numerical { .. }) | Err(Error::Range(_)) => {
            let steps = 16;
            let mut guess = (0.0, 0.0);
            let mut last = None;
            for k in 1..=steps {
                let theta = k as f64 / steps as f64;
                let target = u_minus + theta * (u_plus - u_minus);
                let fan = newton_solve(sys, u_minus, target, guess, opts)?;
                guess = (fan.sigma1, fan.sigma2);
                last = Some(fan);
            }
            last.ok_or_else(|| Error::Internal("empty continuation".into()))
        }
        Err(e) => Err(e),
    }
}
