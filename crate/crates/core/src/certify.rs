//! Constants certified on the state box at startup.
//!
//! Extremes are measured by dense deterministic sampling; they are
//! diagnostics of the configured system, not tuning inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::system::{sym_eigenvalues, IsentropicEuler, State, StateBox, System2x2};

const GRID: usize = 200;
const SAMPLES: usize = 10_000;
const SEED: u64 = 0x5eed_c0de;

/// Measured constants of the system on its certification box.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Certificates {
    /// `max |lambda_i|` on the box.
    pub big_l: f64,
    /// Non-physical front speed, `2 L`.
    pub lambda_hat: f64,
    /// Lower quadratic constant: `c_star |a-b|^2 <= eta(a|b)`.
    pub c_star: f64,
    /// Upper quadratic constant: `eta(a|b) <= c_star_star |a-b|^2`.
    pub c_star_star: f64,
    /// `|q(a;b)| <= flux_ratio * eta(a|b)` with `a` in the invariant region.
    pub flux_ratio: f64,
    /// Lipschitz constant of `b -> q(a;b)` on the box.
    pub lip_q: f64,
    /// Lipschitz constant of `b -> eta(a|b)` on the box.
    pub lip_eta: f64,
}

impl Certificates {
    pub fn compute(sys: &IsentropicEuler) -> Result<Self> {
        let big_l = sys.speed_bound();
        let (hmin, hmax) = hessian_extremes(sys, &sys.params.state_box)?;
        let mut rng = ChaCha8Rng::seed_from_u64(SEED);
        let bx = sys.params.state_box;
        let mut flux_ratio: f64 = 0.0;
        let mut lip_q: f64 = 0.0;
        let mut lip_eta: f64 = 0.0;
        for _ in 0..SAMPLES {
            let a = sample_invariant_region(sys, &mut rng);
            let b = bx.point(rng.gen(), rng.gen());
            let e = sys.relative_entropy(a, b)?;
            if e > 1e-12 {
                flux_ratio = flux_ratio.max(sys.relative_entropy_flux(a, b)?.abs() / e);
            }
            if a.rho > 0.0 {
                let b2 = bx.point(rng.gen(), rng.gen());
                let d = b.dist(&b2);
                if d > 1e-9 {
                    let dq = sys.relative_entropy_flux(a, b)? - sys.relative_entropy_flux(a, b2)?;
                    let de = sys.relative_entropy(a, b)? - sys.relative_entropy(a, b2)?;
                    lip_q = lip_q.max(dq.abs() / d);
                    lip_eta = lip_eta.max(de.abs() / d);
                }
            }
        }
        Ok(Certificates {
            big_l,
            lambda_hat: 2.0 * big_l,
            c_star: 0.5 * hmin,
            c_star_star: 0.5 * hmax,
            flux_ratio,
            lip_q,
            lip_eta,
        })
    }

    /// Constant of the relative-flux bounds: the largest of the three measured ratios.
    pub fn relative_flux_constant(&self) -> f64 {
        self.flux_ratio.max(self.lip_q).max(self.lip_eta)
    }
}

/// Extreme eigenvalues of the entropy Hessian over a grid covering the box.
pub fn hessian_extremes(sys: &IsentropicEuler, bx: &StateBox) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for i in 0..=GRID {
        for j in 0..=GRID {
            let u = bx.point(i as f64 / GRID as f64, j as f64 / GRID as f64);
            let (l0, l1) = sym_eigenvalues(&sys.entropy_hessian(u)?);
            lo = lo.min(l0);
            hi = hi.max(l1);
        }
    }
    if !(lo > 0.0) {
        return Err(Error::Internal(format!(
            "entropy Hessian not positive definite on the box (min eigenvalue {lo})"
        )));
    }
    Ok((lo, hi))
}

/// Uniform sample in Riemann-invariant coordinates of the invariant region.
pub fn sample_invariant_region(sys: &IsentropicEuler, rng: &mut impl Rng) -> State {
    let c = sys.params.inv_bound;
    let g = sys.params.gamma;
    let x: f64 = rng.gen_range(-c..c);
    let y: f64 = rng.gen_range(-c..c);
    let (w1, w2) = if x <= y { (x, y) } else { (y, x) };
    let z = (w2 - w1) / (2.0 * sys.params.c1);
    let rho = z.powf(2.0 / (g - 1.0));
    if rho <= 0.0 {
        return State::VACUUM;
    }
    State::from_primitive(rho, 0.5 * (w1 + w2))
}

/// Shock-speed windows of the modified algorithm on a neighborhood of the data.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SpeedWindows {
    /// Upper speed bound for 1-shocks.
    pub alpha1: f64,
    /// Lower speed bound for 2-shocks.
    pub alpha2: f64,
    pub lambda_hat: f64,
    /// `inf lambda_2 - sup lambda_1` on the neighborhood.
    pub gap: f64,
}

impl SpeedWindows {
    /// `alpha1 = sup lambda1 + gap/10`, `alpha2 = inf lambda2 - gap/10`.
    pub fn on_region(sys: &IsentropicEuler, region: &StateBox, lambda_hat: f64) -> Result<Self> {
        let mut sup_l1 = f64::NEG_INFINITY;
        let mut inf_l2 = f64::INFINITY;
        let n = 64;
        for i in 0..=n {
            for j in 0..=n {
                let u = region.point(i as f64 / n as f64, j as f64 / n as f64);
                let s = sys.eigen(u)?;
                sup_l1 = sup_l1.max(s.lambda1);
                inf_l2 = inf_l2.min(s.lambda2);
            }
        }
        let gap = inf_l2 - sup_l1;
        if !(gap > 0.0) {
            return Err(Error::Config(format!(
                "characteristic speed gap on the data neighborhood is {gap:.6} (must be positive); \
                 shrink the neighborhood"
            )));
        }
        Ok(SpeedWindows {
            alpha1: sup_l1 + 0.1 * gap,
            alpha2: inf_l2 - 0.1 * gap,
            lambda_hat,
            gap,
        })
    }

    /// Admissible speed interval for a shock of the given family.
    pub fn window(&self, fam: crate::system::Family) -> (f64, f64) {
        match fam {
            crate::system::Family::One => (-0.5 * self.lambda_hat, self.alpha1),
            crate::system::Family::Two => (self.alpha2, 0.5 * self.lambda_hat),
        }
    }
}

/// Primitive-variable box around a set of states, grown by `margin` in
/// density and velocity, clipped to positive density.
pub fn neighborhood(states: &[State], margin: f64) -> StateBox {
    let mut rmin = f64::INFINITY;
    let mut rmax = f64::NEG_INFINITY;
    let mut vmax: f64 = 0.0;
    for s in states {
        rmin = rmin.min(s.rho);
        rmax = rmax.max(s.rho);
        vmax = vmax.max(s.velocity().abs());
    }
    StateBox {
        rho_min: (rmin - margin).max(1e-3),
        rho_max: rmax + margin,
        v_max: vmax + margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn certificates_are_finite_and_ordered() {
        let sys = IsentropicEuler::default_gamma2();
        let c = Certificates::compute(&sys).unwrap();
        assert!(c.c_star > 0.0 && c.c_star < c.c_star_star);
        assert!(c.flux_ratio.is_finite() && c.flux_ratio > 0.0);
        assert!((c.lambda_hat - 2.0 * c.big_l).abs() < 1e-15);
        assert!(c.big_l >= 2.0 + 8f64.sqrt() - 1e-12);
    }

    #[test]
    fn windows_separate_families() {
        let sys = IsentropicEuler::default_gamma2();
        let nb = neighborhood(&[State::new(1.0, 0.0)], 0.2);
        let w = SpeedWindows::on_region(&sys, &nb, 2.0 * sys.speed_bound()).unwrap();
        assert!(w.alpha1 < w.alpha2);
        // the whole default box has overlapping characteristic bands
        let err = SpeedWindows::on_region(&sys, &sys.params.state_box, 1.0);
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
