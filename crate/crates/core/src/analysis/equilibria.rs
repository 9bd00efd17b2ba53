//! Bracketing and bisection for equilibria of periodic angle functions.

use std::f64::consts::PI;

use crate::error::Result;

/// Stable and unstable equilibrium pair, `stable <= unstable < stable + 2π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibria {
    pub stable: f64,
    pub unstable: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EquilibriumSearch {
    Found(Equilibria),
    /// `h < 0` everywhere; `max` is the refined maximum of `h`.
    NeverRestoring { max: f64 },
    /// `h >= 0` everywhere.
    AlwaysRestoring,
}

const SCAN_POINTS: usize = 1440;
const ANGLE_TOL: f64 = 1e-11;
const TANGENCY_TOL: f64 = 1e-12;

/// Bisect `[lo, hi]` keeping `rising(h(lo)) == false` and `rising(h(hi)) == true`.
fn bisect<H>(h: &mut H, mut lo: f64, mut hi: f64, upward: bool) -> Result<f64>
where
    H: FnMut(f64) -> Result<f64>,
{
    while hi - lo > ANGLE_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let non_negative = h(mid)? >= 0.0;
        if non_negative == upward {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn golden_max<H>(h: &mut H, mut a: f64, mut b: f64) -> Result<(f64, f64)>
where
    H: FnMut(f64) -> Result<f64>,
{
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (h(c)?, h(d)?);
    for _ in 0..120 {
        if b - a < 1e-14 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = h(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = h(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, h(x)?))
}

/// Find the first upward zero crossing of the 2π-periodic function `h`
/// (restoring sign: `h` rises through zero) and the following downward one.
///
/// Roots are located by scanning one period and bisecting to 1e-11 rad. The
/// stable root is reported in `(-π, π]`. A tangent maximum touching zero
/// within 1e-12 yields a degenerate pair.
pub fn find_equilibria<H>(mut h: H) -> Result<EquilibriumSearch>
where
    H: FnMut(f64) -> Result<f64>,
{
    let step = 2.0 * PI / SCAN_POINTS as f64;
    let xs: Vec<f64> = (0..SCAN_POINTS).map(|k| -PI + k as f64 * step).collect();
    let hs = xs.iter().map(|&x| h(x)).collect::<Result<Vec<f64>>>()?;

    let (k_min, &h_min) = hs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("scan is non-empty");
    if h_min >= 0.0 {
        return Ok(EquilibriumSearch::AlwaysRestoring);
    }

    let at = |j: usize| -> (f64, f64) {
        let idx = k_min + j;
        (xs[k_min] + j as f64 * step, hs[idx % SCAN_POINTS])
    };

    let mut stable = None;
    let mut j_up = 0;
    for j in 1..=SCAN_POINTS {
        let (x0, h0) = at(j - 1);
        let (x1, h1) = at(j);
        if h0 < 0.0 && h1 >= 0.0 {
            stable = Some(bisect(&mut h, x0, x1, true)?);
            j_up = j;
            break;
        }
    }

    let Some(stable) = stable else {
        let (k_max, _) = hs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("scan is non-empty");
        let (x_peak, h_peak) = golden_max(&mut h, xs[k_max] - step, xs[k_max] + step)?;
        if h_peak >= -TANGENCY_TOL {
            let x = wrap(x_peak);
            return Ok(EquilibriumSearch::Found(Equilibria { stable: x, unstable: x }));
        }
        return Ok(EquilibriumSearch::NeverRestoring { max: h_peak });
    };

    let mut unstable = None;
    for j in j_up + 1..=SCAN_POINTS {
        let (x0, h0) = at(j - 1);
        let (x1, h1) = at(j);
        if h0 >= 0.0 && h1 < 0.0 {
            unstable = Some(bisect(&mut h, x0, x1, false)?);
            break;
        }
    }
    // h(k_min + N) = h_min < 0, so a downward crossing always exists.
    let unstable = unstable.expect("downward crossing within one period");

    let shift = wrap(stable) - stable;
    Ok(EquilibriumSearch::Found(Equilibria {
        stable: stable + shift,
        unstable: unstable + shift,
    }))
}

/// Map an angle into `(-π, π]`.
pub fn wrap(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}
