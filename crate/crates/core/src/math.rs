//! Float helpers that work without `std`, plus quadrature and 1-D search.

use crate::error::{Error, Result};
use alloc::vec::Vec;

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn log10(x: f64) -> f64 {
    libm::log10(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn powf(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline]
pub fn floor(x: f64) -> f64 {
    libm::floor(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

/// Absolute tolerance used per integration segment.
pub const SEGMENT_TOL: f64 = 1e-8;
const REL_FLOOR: f64 = 1e-13;
const MAX_DEPTH: u32 = 48;

/// Adaptive Simpson quadrature of `f` over `[a, b]` (Richardson-corrected).
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::numeric("integration bounds must be finite"));
    }
    if b <= a {
        return Ok(0.0);
    }
    struct Panel {
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    }
    // Seed with a few panels so narrow features are not skipped.
    const SEED: usize = 4;
    let h = (b - a) / SEED as f64;
    let mut stack: Vec<Panel> = Vec::with_capacity(64);
    for i in (0..SEED).rev() {
        let pa = a + h * i as f64;
        let pb = if i + 1 == SEED { b } else { a + h * (i + 1) as f64 };
        let (fa, fb) = (f(pa), f(pb));
        let fm = f(0.5 * (pa + pb));
        stack.push(Panel {
            a: pa,
            b: pb,
            fa,
            fm,
            fb,
            whole: (pb - pa) / 6.0 * (fa + 4.0 * fm + fb),
            tol: tol / SEED as f64,
            depth: 0,
        });
    }
    let mut total = 0.0;
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let lm = 0.5 * (p.a + m);
        let rm = 0.5 * (m + p.b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - p.a) / 6.0 * (p.fa + 4.0 * flm + p.fm);
        let right = (p.b - m) / 6.0 * (p.fm + 4.0 * frm + p.fb);
        let both = left + right;
        let err = both - p.whole;
        let allowed = p.tol.max(REL_FLOOR * both.abs());
        if !both.is_finite() {
            return Err(Error::numeric("integrand is not finite"));
        }
        if err.abs() <= 15.0 * allowed || p.depth >= MAX_DEPTH {
            total += both + err / 15.0;
        } else {
            stack.push(Panel {
                a: m,
                b: p.b,
                fa: p.fm,
                fm: frm,
                fb: p.fb,
                whole: right,
                tol: 0.5 * p.tol,
                depth: p.depth + 1,
            });
            stack.push(Panel {
                a: p.a,
                b: m,
                fa: p.fa,
                fm: flm,
                fb: p.fm,
                whole: left,
                tol: 0.5 * p.tol,
                depth: p.depth + 1,
            });
        }
    }
    Ok(total)
}

/// Integrates over `[a, b]` splitting at the given interior breakpoints.
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<f64> {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    let mut lo = a;
    let mut sum = 0.0;
    for c in cuts.into_iter().chain(core::iter::once(b)) {
        sum += integrate(f, lo, c, tol)?;
        lo = c;
    }
    Ok(sum)
}

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section maximization of a unimodal `f` on `[a, b]`.
/// Returns `(argmax, max)`; endpoints are included in the comparison.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, x_tol: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0;
    while hi - lo > x_tol && iters < 200 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
        iters += 1;
    }
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for x in [a, b] {
        let v = f(x);
        if v > best.1 {
            best = (x, v);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_polynomial_is_exact() {
        let v = integrate(&|x: f64| x * x * x - 2.0 * x, 0.0, 3.0, 1e-12).unwrap();
        assert!((v - (81.0 / 4.0 - 9.0)).abs() < 1e-12);
    }

    #[test]
    fn simpson_exponential() {
        let v = integrate(&|x: f64| 0.5 * exp(-0.5 * x), 0.0, 2.0, SEGMENT_TOL).unwrap();
        assert!((v - (1.0 - exp(-1.0))).abs() < 1e-9);
    }

    #[test]
    fn pieces_handle_kinks() {
        let f = |x: f64| if x < 1.0 { x } else { 2.0 - x };
        let v = integrate_pieces(&f, 0.0, 2.0, &[1.0], 1e-12).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-6);
        assert!(v.abs() < 1e-10);
    }

    #[test]
    fn golden_prefers_endpoint() {
        let (x, _) = golden_max(|x| x, 0.0, 2.0, 1e-9);
        assert_eq!(x, 2.0);
    }
}
