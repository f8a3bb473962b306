//! Small scalar root finding and quadrature helpers.

use crate::error::{Error, Result};

/// Bracketed root of `f` on `[a, b]` by Brent's method.
///
/// Requires `f(a)` and `f(b)` of opposite sign (or one of them zero).
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, xtol: f64, max_iter: usize) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::numerical(
            format!("root not bracketed on [{a}, {b}]"),
            fa.abs().min(fb.abs()),
        ));
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut mflag = true;
    for _ in 0..max_iter {
        if fb == 0.0 || (b - a).abs() <= xtol {
            return Ok(b);
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let between = if lo < b { s > lo && s < b } else { s > b && s < lo };
        let cond = !between
            || (mflag && (s - b).abs() >= (b - c).abs() / 2.0)
            || (!mflag && (s - b).abs() >= (c - d).abs() / 2.0)
            || (mflag && (b - c).abs() < xtol)
            || (!mflag && (c - d).abs() < xtol);
        if cond {
            s = 0.5 * (a + b);
            mflag = true;
        } else {
            mflag = false;
        }
        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    if (b - a).abs() <= 1e3 * xtol {
        return Ok(b);
    }
    Err(Error::numerical("Brent iteration limit reached", fb.abs()))
}

/// `((1 + x)^g - 1) / x`, accurate near `x = 0`.
pub fn pow_divided(x: f64, g: f64) -> f64 {
    if x.abs() < 1e-300 {
        return g;
    }
    (g * x.ln_1p()).exp_m1() / x
}

/// Composite trapezoid rule over samples `(t_k, y_k)`.
pub fn trapezoid(ts: &[f64], ys: &[f64]) -> f64 {
    ts.windows(2)
        .zip(ys.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_cubic_root() {
        let r = brent(|x| x * x * x - 2.0, 0.0, 2.0, 1e-15, 200).unwrap();
        assert!((r - 2f64.powf(1.0 / 3.0)).abs() < 1e-14);
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100).is_err());
    }

    #[test]
    fn pow_divided_matches_direct() {
        for &x in &[0.3, -0.4, 2.0] {
            let direct = ((1.0f64 + x).powf(1.7) - 1.0) / x;
            assert!((pow_divided(x, 1.7) - direct).abs() < 1e-14);
        }
        // small x: binomial series g + g(g-1)/2 x + g(g-1)(g-2)/6 x^2
        let g = 1.7;
        for &x in &[1e-12, -1e-9, 1e-6] {
            let series = g + g * (g - 1.0) / 2.0 * x + g * (g - 1.0) * (g - 2.0) / 6.0 * x * x;
            assert!((pow_divided(x, g) - series).abs() < 1e-15);
        }
        assert_eq!(pow_divided(0.0, 2.5), 2.5);
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powi(3)).collect();
        assert!((loglog_slope(&xs, &ys) - 3.0).abs() < 1e-12);
    }
}
