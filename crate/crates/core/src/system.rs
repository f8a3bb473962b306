//! The 2×2 system interface and the isentropic Euler instance.
//!
//! States are conserved variables `(rho, mom)` with `mom = rho * v`. The
//! pressure law is `p(rho) = rho^gamma`, the mathematical entropy is
//! `eta = mom^2 / (2 rho) + rho^gamma / (gamma - 1)`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the state space in conserved variables.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub rho: f64,
    pub mom: f64,
}

impl State {
    pub const VACUUM: State = State { rho: 0.0, mom: 0.0 };

    pub const fn new(rho: f64, mom: f64) -> Self {
        State { rho, mom }
    }

    /// Builds a state from density and velocity.
    pub fn from_primitive(rho: f64, v: f64) -> Self {
        State { rho, mom: rho * v }
    }

    /// Velocity; zero at vacuum.
    pub fn velocity(&self) -> f64 {
        if self.rho > 0.0 {
            self.mom / self.rho
        } else {
            0.0
        }
    }

    pub fn norm(&self) -> f64 {
        self.rho.hypot(self.mom)
    }

    pub fn dot(&self, other: &State) -> f64 {
        self.rho * other.rho + self.mom * other.mom
    }

    pub fn dist(&self, other: &State) -> f64 {
        (*self - *other).norm()
    }

    pub fn is_vacuum(&self) -> bool {
        self.rho == 0.0 && self.mom == 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.mom.is_finite()
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.rho, self.mom]
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(rho={}, mom={})", self.rho, self.mom)
    }
}

impl Add for State {
    type Output = State;
    fn add(self, o: State) -> State {
        State::new(self.rho + o.rho, self.mom + o.mom)
    }
}

impl Sub for State {
    type Output = State;
    fn sub(self, o: State) -> State {
        State::new(self.rho - o.rho, self.mom - o.mom)
    }
}

impl Mul<State> for f64 {
    type Output = State;
    fn mul(self, s: State) -> State {
        State::new(self * s.rho, self * s.mom)
    }
}

impl Neg for State {
    type Output = State;
    fn neg(self) -> State {
        State::new(-self.rho, -self.mom)
    }
}

/// Row-major 2×2 matrix.
pub type Mat2 = [[f64; 2]; 2];

pub fn mat_vec(m: &Mat2, v: State) -> State {
    State::new(
        m[0][0] * v.rho + m[0][1] * v.mom,
        m[1][0] * v.rho + m[1][1] * v.mom,
    )
}

/// Eigenvalues of a symmetric 2×2 matrix, ascending.
pub fn sym_eigenvalues(m: &Mat2) -> (f64, f64) {
    let tr = m[0][0] + m[1][1];
    let half_diff = 0.5 * (m[0][0] - m[1][1]);
    let off = 0.5 * (m[0][1] + m[1][0]);
    let disc = half_diff.hypot(off);
    (0.5 * tr - disc, 0.5 * tr + disc)
}

/// Closed box in primitive variables on which constants are certified.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateBox {
    pub rho_min: f64,
    pub rho_max: f64,
    pub v_max: f64,
}

impl Default for StateBox {
    fn default() -> Self {
        StateBox {
            rho_min: 0.25,
            rho_max: 4.0,
            v_max: 2.0,
        }
    }
}

impl StateBox {
    pub fn contains(&self, u: &State) -> bool {
        u.rho >= self.rho_min && u.rho <= self.rho_max && u.velocity().abs() <= self.v_max
    }

    /// Maps `(s, t)` in `[0,1]^2` onto the box (density, velocity).
    pub fn point(&self, s: f64, t: f64) -> State {
        let rho = self.rho_min + s * (self.rho_max - self.rho_min);
        let v = -self.v_max + 2.0 * t * self.v_max;
        State::from_primitive(rho, v)
    }
}

/// Adiabatic exponent, invariant-region bound and certification box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub gamma: f64,
    /// Bound `C` of the invariant region `-C < w1 <= w2 < C`.
    pub inv_bound: f64,
    /// Riemann-invariant coefficient.
    pub c1: f64,
    pub state_box: StateBox,
}

impl SystemParams {
    /// Parameters with the standard Riemann-invariant coefficient
    /// `2 sqrt(gamma) / (gamma - 1)` and the smallest round invariant bound
    /// containing the state box.
    pub fn new(gamma: f64, state_box: StateBox) -> Result<Self> {
        let c1 = riemann_coefficient(gamma);
        let w_max = state_box.v_max + c1 * state_box.rho_max.powf(0.5 * (gamma - 1.0));
        let p = SystemParams {
            gamma,
            inv_bound: (w_max + 1.0).ceil(),
            c1,
            state_box,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 1.0) || !self.gamma.is_finite() {
            return Err(Error::Config(format!("gamma must exceed 1, got {}", self.gamma)));
        }
        if !(self.inv_bound > 0.0) {
            return Err(Error::Config(format!(
                "inv_bound must be positive, got {}",
                self.inv_bound
            )));
        }
        if !(self.c1 > 0.0) {
            return Err(Error::Config(format!("c1 must be positive, got {}", self.c1)));
        }
        let b = &self.state_box;
        if !(b.rho_min > 0.0) {
            return Err(Error::Config(format!(
                "state_box.rho_min must be positive, got {}",
                b.rho_min
            )));
        }
        if !(b.rho_max > b.rho_min) {
            return Err(Error::Config("state_box.rho_max must exceed rho_min".into()));
        }
        if !(b.v_max >= 0.0) {
            return Err(Error::Config("state_box.v_max must be nonnegative".into()));
        }
        Ok(())
    }
}

/// `2 sqrt(gamma) / (gamma - 1)`: makes `w2` constant on 1-rarefactions and
/// `w1` constant on 2-rarefactions.
pub fn riemann_coefficient(gamma: f64) -> f64 {
    2.0 * gamma.sqrt() / (gamma - 1.0)
}

/// Characteristic family of a physical wave.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    One,
    Two,
}

impl Family {
    pub fn index(self) -> usize {
        match self {
            Family::One => 1,
            Family::Two => 2,
        }
    }
}

/// Eigenvalues, unit right eigenvectors (oriented so that `grad(lambda_i) . r_i > 0`)
/// at one state, together with the global speed bound of the box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralData {
    pub lambda1: f64,
    pub lambda2: f64,
    pub r1: State,
    pub r2: State,
    pub big_l: f64,
}

impl SpectralData {
    pub fn lambda(&self, fam: Family) -> f64 {
        match fam {
            Family::One => self.lambda1,
            Family::Two => self.lambda2,
        }
    }

    pub fn r(&self, fam: Family) -> State {
        match fam {
            Family::One => self.r1,
            Family::Two => self.r2,
        }
    }
}

/// Abstract 2×2 system with a convex entropy pair.
pub trait System2x2 {
    fn flux(&self, u: State) -> Result<State>;
    fn jacobian(&self, u: State) -> Result<Mat2>;
    fn eigen(&self, u: State) -> Result<SpectralData>;
    fn entropy(&self, u: State) -> Result<f64>;
    fn entropy_flux(&self, u: State) -> Result<f64>;
    fn entropy_gradient(&self, u: State) -> Result<State>;
    fn entropy_hessian(&self, u: State) -> Result<Mat2>;

    /// `eta(a|b) = eta(a) - eta(b) - grad eta(b) . (a - b)`.
    fn relative_entropy(&self, a: State, b: State) -> Result<f64> {
        let gb = self.entropy_gradient(b)?;
        let v = self.entropy(a)? - self.entropy(b)? - gb.dot(&(a - b));
        Ok(v.max(0.0))
    }

    /// `q(a;b) = q(a) - q(b) - grad eta(b) . (f(a) - f(b))`.
    fn relative_entropy_flux(&self, a: State, b: State) -> Result<f64> {
        let gb = self.entropy_gradient(b)?;
        let df = self.flux(a)? - self.flux(b)?;
        Ok(self.entropy_flux(a)? - self.entropy_flux(b)? - gb.dot(&df))
    }

    /// `f(a|b) = f(a) - f(b) - f'(b)(a - b)`.
    fn relative_flux(&self, a: State, b: State) -> Result<State> {
        let jb = self.jacobian(b)?;
        Ok(self.flux(a)? - self.flux(b)? - mat_vec(&jb, a - b))
    }
}

/// Isentropic Euler with pressure `rho^gamma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsentropicEuler {
    pub params: SystemParams,
}

impl IsentropicEuler {
    pub fn new(params: SystemParams) -> Result<Self> {
        params.validate()?;
        Ok(IsentropicEuler { params })
    }

    /// `gamma = 2` on the default box.
    pub fn default_gamma2() -> Self {
        IsentropicEuler::new(SystemParams::new(2.0, StateBox::default()).expect("valid defaults"))
            .expect("valid defaults")
    }

    pub fn gamma(&self) -> f64 {
        self.params.gamma
    }

    pub fn pressure(&self, rho: f64) -> f64 {
        rho.powf(self.params.gamma)
    }

    /// Sound speed `sqrt(gamma rho^(gamma-1))`.
    pub fn sound_speed(&self, rho: f64) -> f64 {
        (self.params.gamma * rho.powf(self.params.gamma - 1.0)).sqrt()
    }

    /// Global speed bound `L = max |lambda_i|` over the certification box.
    pub fn speed_bound(&self) -> f64 {
        let b = &self.params.state_box;
        b.v_max + self.sound_speed(b.rho_max)
    }

    fn check_nonneg(&self, u: State, what: &str) -> Result<()> {
        if !u.is_finite() {
            return Err(Error::Domain(format!("{what}: non-finite state {u}")));
        }
        if u.rho < 0.0 {
            return Err(Error::Domain(format!("{what}: negative density in {u}")));
        }
        if u.rho == 0.0 && u.mom != 0.0 {
            return Err(Error::Domain(format!("{what}: momentum at vacuum in {u}")));
        }
        Ok(())
    }

    fn check_positive(&self, u: State, what: &str) -> Result<()> {
        if !u.is_finite() || !(u.rho > 0.0) {
            return Err(Error::Domain(format!(
                "{what}: requires positive density, got {u}"
            )));
        }
        Ok(())
    }

    /// `(w1, w2) = (v - c1 rho^((gamma-1)/2), v + c1 rho^((gamma-1)/2))`.
    pub fn riemann_invariants(&self, u: State) -> (f64, f64) {
        if u.rho <= 0.0 {
            return (0.0, 0.0);
        }
        let v = u.mom / u.rho;
        let z = self.params.c1 * u.rho.powf(0.5 * (self.params.gamma - 1.0));
        (v - z, v + z)
    }

    /// Membership in `-C < w1 <= w2 < C` (vacuum included).
    pub fn in_invariant_region(&self, u: State) -> bool {
        if u.is_vacuum() {
            return true;
        }
        if !(u.rho > 0.0) || !u.is_finite() {
            return false;
        }
        let (w1, w2) = self.riemann_invariants(u);
        let c = self.params.inv_bound;
        -c < w1 && w1 <= w2 && w2 < c
    }

    /// Gradient of `lambda_i` with respect to conserved variables.
    pub fn lambda_gradient(&self, u: State, fam: Family) -> Result<State> {
        self.check_positive(u, "lambda_gradient")?;
        let g = self.params.gamma;
        let v = u.mom / u.rho;
        let c = self.sound_speed(u.rho);
        let dc = 0.5 * (g - 1.0) * c / u.rho;
        let dv = State::new(-v / u.rho, 1.0 / u.rho);
        Ok(match fam {
            Family::One => State::new(dv.rho - dc, dv.mom),
            Family::Two => State::new(dv.rho + dc, dv.mom),
        })
    }
}

impl System2x2 for IsentropicEuler {
    fn flux(&self, u: State) -> Result<State> {
        self.check_nonneg(u, "flux")?;
        if u.rho == 0.0 {
            return Ok(State::VACUUM);
        }
        Ok(State::new(u.mom, u.mom * u.mom / u.rho + self.pressure(u.rho)))
    }

    fn jacobian(&self, u: State) -> Result<Mat2> {
        self.check_positive(u, "jacobian")?;
        let v = u.mom / u.rho;
        let c2 = self.params.gamma * u.rho.powf(self.params.gamma - 1.0);
        Ok([[0.0, 1.0], [c2 - v * v, 2.0 * v]])
    }

    fn eigen(&self, u: State) -> Result<SpectralData> {
        self.check_positive(u, "eigen")?;
        let v = u.mom / u.rho;
        let c = self.sound_speed(u.rho);
        let l1 = v - c;
        let l2 = v + c;
        // (1, lambda) spans each eigenspace; grad(lambda_1).(1, lambda_1) < 0
        let n1 = 1.0f64.hypot(l1);
        let n2 = 1.0f64.hypot(l2);
        Ok(SpectralData {
            lambda1: l1,
            lambda2: l2,
            r1: State::new(-1.0 / n1, -l1 / n1),
            r2: State::new(1.0 / n2, l2 / n2),
            big_l: self.speed_bound(),
        })
    }

    fn entropy(&self, u: State) -> Result<f64> {
        self.check_nonneg(u, "entropy")?;
        if u.rho == 0.0 {
            return Ok(0.0);
        }
        let g = self.params.gamma;
        Ok(0.5 * u.mom * u.mom / u.rho + u.rho.powf(g) / (g - 1.0))
    }

    fn entropy_flux(&self, u: State) -> Result<f64> {
        self.check_nonneg(u, "entropy_flux")?;
        if u.rho == 0.0 {
            return Ok(0.0);
        }
        let g = self.params.gamma;
        let v = u.mom / u.rho;
        Ok(0.5 * u.mom * v * v + g / (g - 1.0) * u.rho.powf(g - 1.0) * u.mom)
    }

    fn entropy_gradient(&self, u: State) -> Result<State> {
        self.check_positive(u, "entropy_gradient")?;
        let g = self.params.gamma;
        let v = u.mom / u.rho;
        Ok(State::new(
            -0.5 * v * v + g / (g - 1.0) * u.rho.powf(g - 1.0),
            v,
        ))
    }

    fn entropy_hessian(&self, u: State) -> Result<Mat2> {
        self.check_positive(u, "entropy_hessian")?;
        let g = self.params.gamma;
        let v = u.mom / u.rho;
        let h11 = v * v / u.rho + g * u.rho.powf(g - 2.0);
        let h12 = -v / u.rho;
        Ok([[h11, h12], [h12, 1.0 / u.rho]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn euler(gamma: f64) -> IsentropicEuler {
        IsentropicEuler::new(SystemParams::new(gamma, StateBox::default()).unwrap()).unwrap()
    }

    #[test]
    fn flux_values() {
        let e = euler(2.0);
        assert_eq!(e.flux(State::new(1.0, 0.0)).unwrap(), State::new(0.0, 1.0));
        assert_eq!(e.flux(State::new(1.0, 1.0)).unwrap(), State::new(1.0, 2.0));
        assert_eq!(e.flux(State::VACUUM).unwrap(), State::VACUUM);
        assert!(matches!(e.flux(State::new(-0.1, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn eigenvalues() {
        let e = euler(2.0);
        let s = e.eigen(State::new(1.0, 0.0)).unwrap();
        assert!((s.lambda1 + 2f64.sqrt()).abs() < 1e-15);
        assert!((s.lambda2 - 2f64.sqrt()).abs() < 1e-15);
        let e3 = euler(3.0);
        let s = e3.eigen(State::from_primitive(1.0, 1.0)).unwrap();
        assert!((s.lambda1 - (1.0 - 3f64.sqrt())).abs() < 1e-14);
        assert!((s.lambda2 - (1.0 + 3f64.sqrt())).abs() < 1e-14);
        assert!(matches!(e.eigen(State::VACUUM), Err(Error::Domain(_))));
    }

    #[test]
    fn eigen_residual_and_orientation() {
        let e = euler(2.0);
        for &(rho, v) in &[(0.3, -1.5), (1.0, 0.0), (3.7, 1.9), (2.0, -0.4)] {
            let u = State::from_primitive(rho, v);
            let s = e.eigen(u).unwrap();
            let j = e.jacobian(u).unwrap();
            for fam in [Family::One, Family::Two] {
                let r = s.r(fam);
                let res = mat_vec(&j, r) - s.lambda(fam) * r;
                assert!(res.norm() <= 1e-12, "{res:?}");
                assert!((r.norm() - 1.0).abs() < 1e-14);
                let gl = e.lambda_gradient(u, fam).unwrap();
                assert!(gl.dot(&r) > 0.0);
            }
            assert!(s.lambda1 < s.lambda2);
        }
    }

    #[test]
    fn entropy_values() {
        let e = euler(2.0);
        assert_eq!(e.entropy(State::new(1.0, 0.0)).unwrap(), 1.0);
        assert_eq!(e.entropy(State::VACUUM).unwrap(), 0.0);
        assert_eq!(e.entropy_flux(State::new(1.0, 0.0)).unwrap(), 0.0);
    }

    #[test]
    fn relative_quantities() {
        let e = euler(2.0);
        let b = State::new(1.0, 0.5);
        assert_eq!(e.relative_entropy(b, b).unwrap(), 0.0);
        assert_eq!(e.relative_entropy_flux(b, b).unwrap(), 0.0);
        assert_eq!(e.relative_flux(b, b).unwrap(), State::VACUUM);
        // eta(2,0) = 4, eta(1,0) = 1, grad eta(1,0) = (2, 0)
        let r = e
            .relative_entropy(State::new(2.0, 0.0), State::new(1.0, 0.0))
            .unwrap();
        assert!((r - 1.0).abs() < 1e-15);
        let rf = e
            .relative_flux(State::new(1.0, 1.0), State::new(1.0, 0.0))
            .unwrap();
        assert!(rf.dist(&State::new(0.0, 1.0)) < 1e-15);
        assert!(matches!(
            e.relative_entropy(b, State::VACUUM),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            e.relative_entropy_flux(b, State::VACUUM),
            Err(Error::Domain(_))
        ));
        assert!(matches!(e.relative_flux(b, State::VACUUM), Err(Error::Domain(_))));
        // a at vacuum is allowed
        assert!(e.relative_entropy(State::VACUUM, b).unwrap() > 0.0);
    }

    #[test]
    fn riemann_invariants_values() {
        let e = euler(2.0);
        assert!((e.params.c1 - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(e.riemann_invariants(State::VACUUM), (0.0, 0.0));
        let (w1, w2) = e.riemann_invariants(State::new(1.0, 0.0));
        assert!((w1 + 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert!((w2 - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert!(e.in_invariant_region(State::new(1.0, 0.0)));
        assert!(e.in_invariant_region(State::VACUUM));
        assert!(!e.in_invariant_region(State::from_primitive(1.0, 50.0)));
    }

    #[test]
    fn rejects_bad_params() {
        assert!(SystemParams::new(1.0, StateBox::default()).is_err());
        let mut b = StateBox::default();
        b.rho_min = 0.0;
        assert!(SystemParams::new(2.0, b).is_err());
    }
}
