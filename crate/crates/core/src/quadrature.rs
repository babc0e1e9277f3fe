//! Adaptive Gauss–Kronrod quadrature with an exponential tail map for
//! integrable endpoint singularities.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: (estimate, error estimate).
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (k, &x) in XGK.iter().enumerate().take(7) {
        let s = f(c - h * x) + f(c + h * x);
        kron += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss–Kronrod on a finite interval with combined tolerance
/// `max(abs_tol, rel_tol·|I|)`. Returns the estimate and the summed error bound.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    let mut panels = vec![(a, b, gk15(&mut f, a, b))];
    for _ in 0..4000 {
        let total: f64 = panels.iter().map(|p| p.2 .0).sum();
        let err: f64 = panels.iter().map(|p| p.2 .1).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (k, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .2 .1.total_cmp(&y.1 .2 .1))
            .expect("nonempty");
        let (lo, hi, _) = panels.swap_remove(k);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            panels.push((lo, hi, (gk15(&mut f, lo, hi).0, 0.0)));
            continue;
        }
        panels.push((lo, mid, gk15(&mut f, lo, mid)));
        panels.push((mid, hi, gk15(&mut f, mid, hi)));
    }
    let total = panels.iter().map(|p| p.2 .0).sum();
    let err = panels.iter().map(|p| p.2 .1).sum();
    (total, err)
}

/// `∫_0^δ g(a) da` for `g` possibly singular at 0, via `a = δ e^{-s}`.
///
/// The transformed integrand is summed over unit chunks in `s` until it has
/// decayed; a tail that fails to decay before `a` underflows is reported as
/// divergent.
pub fn integrate_singular_left(
    mut g: impl FnMut(f64) -> f64,
    delta: f64,
    rel_tol: f64,
) -> Result<f64> {
    let mut total = 0.0;
    let mut quiet = 0;
    let mut s0 = 0.0;
    while s0 < 700.0 {
        let mut blown = false;
        let (chunk, _) = integrate(
            |s| {
                let a = delta * (-s).exp();
                let v = g(a) * a;
                if v.is_finite() {
                    v
                } else {
                    blown = true;
                    0.0
                }
            },
            s0,
            s0 + 1.0,
            rel_tol * 1e-2,
            0.0,
        );
        if blown || !chunk.is_finite() {
            return Err(Error::DivergentIntegral { endpoint: 0.0 });
        }
        total += chunk;
        if chunk.abs() <= 1e-3 * rel_tol * total.abs() {
            quiet += 1;
            if quiet >= 3 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        s0 += 1.0;
    }
    Err(Error::DivergentIntegral { endpoint: 0.0 })
}
