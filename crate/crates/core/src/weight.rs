//! The signed shock measure `mu` and the weight `a(t, x) = 1 + C (L + kappa Q + mu((-inf, x)))`.

use serde::Serialize;

use crate::engine::GlimmFunctionals;
use crate::error::{Error, Result};
use crate::frontsolvers::{Front, WaveFamily};

/// One Dirac mass of `mu`: `-sigma` for a 1-shock, `+sigma` for a 2-shock.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Atom {
    pub id: u64,
    pub x: f64,
    pub mass: f64,
}

/// Atoms of `mu` at time `t`, ordered as the fronts are.
pub fn build_mu(fronts: &[Front], t: f64) -> Vec<Atom> {
    fronts
        .iter()
        .filter(|f| f.is_shock())
        .map(|f| Atom {
            id: f.id,
            x: f.position(t),
            mass: match f.family {
                WaveFamily::One => -f.strength,
                _ => f.strength,
            },
        })
        .collect()
}

/// Piecewise-constant `a(t, .)`; `values[k]` holds between `breakpoints[k-1]` and `breakpoints[k]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightProfile {
    pub c: f64,
    pub base: f64,
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
    /// Shock front id at each breakpoint.
    pub ids: Vec<u64>,
}

/// Builds `a(t, .)`; requires `C (L + kappa Q + L) <= 1/2`.
pub fn build_weight(fronts: &[Front], t: f64, glimm: &GlimmFunctionals, c: f64) -> Result<WeightProfile> {
    if !(c >= 0.0) {
        return Err(Error::Config(format!("weight constant C must be >= 0, got {c}")));
    }
    let lhs = c * (glimm.l + glimm.kappa * glimm.q + glimm.l);
    if lhs > 0.5 {
        return Err(Error::Config(format!(
            "weight precondition C (L + kappa Q + L) <= 1/2 fails: C = {c}, L = {}, kappa = {}, Q = {} give {lhs}",
            glimm.l, glimm.kappa, glimm.q
        )));
    }
    let base = 1.0 + c * (glimm.l + glimm.kappa * glimm.q);
    let atoms = build_mu(fronts, t);
    let mut values = Vec::with_capacity(atoms.len() + 1);
    let mut acc = base;
    values.push(acc);
    for a in &atoms {
        acc += c * a.mass;
        values.push(acc);
    }
    Ok(WeightProfile {
        c,
        base,
        breakpoints: atoms.iter().map(|a| a.x).collect(),
        values,
        ids: atoms.iter().map(|a| a.id).collect(),
    })
}

impl WeightProfile {
    /// Right-continuous value at `x`.
    pub fn at(&self, x: f64) -> f64 {
        self.values[self.breakpoints.partition_point(|&b| b <= x)]
    }

    /// Left limit at `x`.
    pub fn left_limit(&self, x: f64) -> f64 {
        self.values[self.breakpoints.partition_point(|&b| b < x)]
    }

    /// Values on both sides of the atom with front id `id`.
    pub fn across(&self, id: u64) -> Option<(f64, f64)> {
        let k = self.ids.iter().position(|&i| i == id)?;
        Some((self.values[k], self.values[k + 1]))
    }

    pub fn max_deviation(&self) -> f64 {
        self.values.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `ess sup_x (other(x) - self(x))`, ignoring intervals shorter than `x_tol`
    /// between nearly coincident breakpoints.
    pub fn sup_increase_to(&self, other: &WeightProfile, x_tol: f64) -> f64 {
        let mut sup = other.values[0] - self.values[0];
        sup = sup.max(other.values[other.values.len() - 1] - self.values[self.values.len() - 1]);
        let mut pts: Vec<f64> = self.breakpoints.iter().chain(&other.breakpoints).copied().collect();
        pts.sort_by(f64::total_cmp);
        for w in pts.windows(2) {
            if w[1] - w[0] > x_tol {
                let m = 0.5 * (w[0] + w[1]);
                sup = sup.max(other.at(m) - self.at(m));
            }
        }
        sup
    }
}

/// Admissible interval for `a_right / a_left` across a shock of the given family and strength.
pub fn ratio_window(family: WaveFamily, c: f64, strength: f64) -> (f64, f64) {
    let s = strength.abs();
    match family {
        WaveFamily::One => (1.0 - 2.0 * c * s, 1.0 - 0.5 * c * s),
        _ => (1.0 + 0.5 * c * s, 1.0 + 2.0 * c * s),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WindowViolation {
    pub id: u64,
    pub family: WaveFamily,
    pub strength: f64,
    pub ratio: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct WeightReport {
    pub checked: usize,
    /// Smallest distance of a ratio to the edge of its window; negative when violated.
    pub min_margin: f64,
    pub violations: Vec<WindowViolation>,
}

impl WeightReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every shock's weight ratio against its window.
pub fn check_weight_jumps(profile: &WeightProfile, fronts: &[Front]) -> WeightReport {
    let mut rep = WeightReport {
        min_margin: f64::INFINITY,
        ..Default::default()
    };
    for f in fronts.iter().filter(|f| f.is_shock()) {
        let Some((al, ar)) = profile.across(f.id) else {
            continue;
        };
        let ratio = ar / al;
        let (lo, hi) = ratio_window(f.family, profile.c, f.strength);
        // relative slack for roundoff in the ratio
        let tol = 1e-14;
        let margin = (ratio - lo).min(hi - ratio);
        rep.min_margin = rep.min_margin.min(margin);
        rep.checked += 1;
        if ratio < lo - tol || ratio > hi + tol {
            rep.violations.push(WindowViolation {
                id: f.id,
                family: f.family,
                strength: f.strength,
                ratio,
                lo,
                hi,
            });
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontsolvers::FrontKind;
    use crate::system::State;

    fn shock(id: u64, family: WaveFamily, strength: f64, x: f64) -> Front {
        Front {
            id,
            family,
            kind: FrontKind::Shock,
            strength,
            left: State::new(1.0, 0.0),
            right: State::new(1.0, 0.0),
            birth: (0.0, x),
            speed: 0.0,
            t0: 0.0,
            x0: x,
        }
    }

    fn glimm(l: f64, q: f64) -> GlimmFunctionals {
        GlimmFunctionals {
            l,
            q,
            kappa: 10.0,
            np_total: 0.0,
        }
    }

    #[test]
    fn atoms_signed_by_family() {
        assert!(build_mu(&[], 0.0).is_empty());
        let f1 = shock(0, WaveFamily::One, 0.1, 0.0);
        let f2 = shock(1, WaveFamily::Two, 0.1, 1.0);
        let mu = build_mu(&[f1, f2], 0.0);
        assert_eq!(mu.iter().map(|a| (a.x, a.mass)).collect::<Vec<_>>(), vec![(0.0, -0.1), (1.0, 0.1)]);
    }

    #[test]
    fn single_two_shock_profile() {
        let f = shock(3, WaveFamily::Two, 0.1, 0.0);
        let p = build_weight(&[f], 0.0, &glimm(0.1, 0.0), 1.0).unwrap();
        assert!((p.at(-1.0) - 1.1).abs() < 1e-15);
        assert!((p.at(1.0) - 1.2).abs() < 1e-15);
        let rep = check_weight_jumps(&p, &[f]);
        assert!(rep.ok() && rep.checked == 1);
        let r = 1.2 / 1.1;
        assert!(r >= 1.05 && r <= 1.2);
    }

    #[test]
    fn precondition_is_enforced() {
        let e = build_weight(&[], 0.0, &glimm(0.2, 0.02), 1.0);
        assert!(matches!(e, Err(Error::Config(_))));
        let p = build_weight(&[], 0.0, &glimm(0.0, 0.0), 1.0).unwrap();
        assert_eq!(p.values, vec![1.0]);
    }

    #[test]
    fn increase_between_profiles() {
        let f = shock(0, WaveFamily::One, 0.1, 0.0);
        let before = build_weight(&[f], 0.0, &glimm(0.1, 0.0), 1.0).unwrap();
        let after = build_weight(&[], 0.0, &glimm(0.0, 0.0), 1.0).unwrap();
        // before: 1.1 then 1.0; after: 1.0 everywhere
        assert!(before.sup_increase_to(&after, 1e-9).abs() < 1e-15);
        assert!((after.sup_increase_to(&before, 1e-9) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn sliver_between_coincident_fronts_is_ignored() {
        let before = build_weight(&[shock(0, WaveFamily::One, 0.1, 1e-13)], 0.0, &glimm(0.1, 0.0), 1.0).unwrap();
        let after = build_weight(&[shock(1, WaveFamily::One, 0.1, 0.0)], 0.0, &glimm(0.1, 0.0), 1.0).unwrap();
        assert_eq!(after.sup_increase_to(&before, 1e-9), 0.0);
        assert!((after.sup_increase_to(&before, 0.0) - 0.1).abs() < 1e-15);
    }
}
