//! Proximal maps of the perspective integrands.

use crate::graph::Interpolation;
use crate::optim::brent_min;

/// Prox of `α(x, y) = ‖x‖²/y` with step `tau`:
/// `argmin ‖x‖²/y + (‖x − x̄‖² + (y − ȳ)²)/(2τ)` over `y ≥ 0`.
///
/// The optimal `y` solves `(y − ȳ)(y + 2τ)² = τ‖x̄‖²`; when that cubic has no
/// positive root the minimizer is the apex `(0, 0)`.
pub fn prox_perspective(x_bar: &[f64], y_bar: f64, tau: f64) -> (Vec<f64>, f64) {
    let n2: f64 = x_bar.iter().map(|v| v * v).sum();
    let y = perspective_root(n2, y_bar, tau);
    if y <= 0.0 {
        return (vec![0.0; x_bar.len()], 0.0);
    }
    let s = y / (y + 2.0 * tau);
    (x_bar.iter().map(|v| v * s).collect(), y)
}

/// Scalar version of [`prox_perspective`].
pub fn prox_perspective_scalar(x_bar: f64, y_bar: f64, tau: f64) -> (f64, f64) {
    let y = perspective_root(x_bar * x_bar, y_bar, tau);
    if y <= 0.0 {
        return (0.0, 0.0);
    }
    (x_bar * y / (y + 2.0 * tau), y)
}

fn perspective_root(n2: f64, y_bar: f64, tau: f64) -> f64 {
    if n2 == 0.0 {
        return y_bar.max(0.0);
    }
    if y_bar <= -n2 / (4.0 * tau) {
        return 0.0;
    }
    // f is increasing and convex right of max(ȳ, 0); Newton from an upper bracket
    // decreases monotonically onto the root.
    let f = |y: f64| (y - y_bar) * (y + 2.0 * tau).powi(2) - tau * n2;
    let lo = y_bar.max(0.0);
    let mut y = lo + (tau * n2).cbrt();
    while f(y) < 0.0 {
        y = 2.0 * y + tau;
    }
    for _ in 0..200 {
        let w = y + 2.0 * tau;
        let fy = (y - y_bar) * w * w - tau * n2;
        let df = w * (3.0 * y + 2.0 * tau - 2.0 * y_bar);
        let next = (y - fy / df).max(lo);
        if next >= y || y - next <= 1e-16 * y {
            return next.min(y);
        }
        y = next;
    }
    y
}

/// Outcome of [`prox_graph_term`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphProx {
    pub sigma: f64,
    pub rho_i: f64,
    pub rho_j: f64,
    /// Set when an inner radial solve hit its iteration cap.
    pub newton_failed: bool,
}

/// Prox of `(σ, ρᵢ, ρⱼ) ↦ σ²/θ(ρᵢ, ρⱼ)` with step `tau`.
///
/// Eliminating `σ = σ̄θ/(θ + 2τ)` leaves a convex objective in `ρ`. Writing
/// `ρ = r(d, 1 − d)`, it is convex in `r` for fixed `d`, and its minimum over
/// `r` is quasi-convex in `d`; the search is a golden section over `d` with a
/// monotone Newton solve for `r` inside. The apex and both faces are covered.
pub fn prox_graph_term(sigma_bar: f64, rho_i_bar: f64, rho_j_bar: f64, tau: f64, f: &Interpolation) -> GraphProx {
    let done = |rho_i: f64, rho_j: f64, newton_failed| {
        let th = f.value(rho_i, rho_j);
        GraphProx {
            sigma: if th > 0.0 { sigma_bar * th / (th + 2.0 * tau) } else { 0.0 },
            rho_i,
            rho_j,
            newton_failed,
        }
    };
    if sigma_bar == 0.0 {
        return done(rho_i_bar.max(0.0), rho_j_bar.max(0.0), false);
    }
    if let Interpolation::Arithmetic = f {
        // x = √2σ, Y = ρᵢ + ρⱼ turns the term into x²/Y with isotropic penalty 1/(4τ).
        let (_, y) = prox_perspective_scalar(std::f64::consts::SQRT_2 * sigma_bar, rho_i_bar + rho_j_bar, 2.0 * tau);
        let d = rho_i_bar - rho_j_bar;
        let (ri, rj) = (0.5 * (y + d), 0.5 * (y - d));
        if ri >= 0.0 && rj >= 0.0 {
            return done(ri, rj, false);
        }
    }
    if let Interpolation::Geometric = f {
        let (ri, rj) = geometric_rho(sigma_bar * sigma_bar, rho_i_bar, rho_j_bar, tau);
        return done(ri, rj, false);
    }
    let radial = Radial {
        s2: sigma_bar * sigma_bar,
        rb: [rho_i_bar, rho_j_bar],
        tau,
        f,
    };
    // coarse scan, then Brent on the bracket around the lowest sample
    const SCAN: usize = 8;
    let samples: Vec<RayMin> = (0..=SCAN).map(|k| radial.solve(k as f64 / SCAN as f64)).collect();
    let k = (0..=SCAN).min_by(|&a, &b| samples[a].value.total_cmp(&samples[b].value)).unwrap_or(0);
    let (lo, hi) = if samples[k].value < 0.0 {
        (k.saturating_sub(1) as f64 / SCAN as f64, (k + 1).min(SCAN) as f64 / SCAN as f64)
    } else {
        (0.0, 1.0)
    };
    let (d, _) = brent_min(|d| radial.solve(d).value, lo, hi, 1e-12, 100);
    let mut best = radial.solve(d);
    if samples[k].value < best.value {
        best = samples[k];
    }
    done(best.r * best.d, best.r * (1.0 - best.d), best.failed)
}

/// Geometric mean: at the optimum `ρᵢ(ρᵢ − ρ̄ᵢ) = ρⱼ(ρⱼ − ρ̄ⱼ) = w` with
/// `w = (τ s2/2) θ/(θ + 2τ)²`, a scalar equation in `w ∈ [0, s2/16]` whose
/// positive root is unique; `w = 0` is the apex when `s2/(4τ) ≤ 2√(ρ̄ᵢρ̄ⱼ)` with
/// both `ρ̄` nonpositive.
fn geometric_rho(s2: f64, a: f64, b: f64, tau: f64) -> (f64, f64) {
    if a <= 0.0 && b <= 0.0 && s2 / (4.0 * tau) <= 2.0 * (a * b).sqrt() {
        return (0.0, 0.0);
    }
    // positive root of x(x − c) = w, without cancellation
    let branch = |c: f64, w: f64| {
        let disc = (c * c + 4.0 * w).sqrt();
        if c >= 0.0 {
            0.5 * (c + disc)
        } else {
            2.0 * w / (disc - c)
        }
    };
    let resid = |w: f64| {
        let th = (branch(a, w) * branch(b, w)).sqrt();
        w - 0.5 * tau * s2 * th / (th + 2.0 * tau).powi(2)
    };
    let mut hi = s2 / 16.0;
    if resid(hi) <= 0.0 {
        return (branch(a, hi), branch(b, hi));
    }
    let mut lo = hi;
    let mut f_lo = resid(lo);
    while f_lo >= 0.0 {
        hi = lo;
        lo *= 1.0 / 16.0;
        if lo < 1e-300 {
            return (branch(a, 0.0), branch(b, 0.0));
        }
        f_lo = resid(lo);
    }
    let mut f_hi = resid(hi);
    // geometric bisection until the bracket is narrow, then Illinois
    while hi > 4.0 * lo {
        let mid = (lo * hi).sqrt();
        let fm = resid(mid);
        if fm < 0.0 {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
            f_hi = fm;
        }
    }
    let mut side = 0;
    for _ in 0..100 {
        let w = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let w = if w > lo && w < hi { w } else { 0.5 * (lo + hi) };
        let fw = resid(w);
        if fw < 0.0 {
            lo = w;
            f_lo = fw;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = w;
            f_hi = fw;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        }
        if hi - lo <= 1e-15 * hi || fw == 0.0 {
            break;
        }
    }
    let w = 0.5 * (lo + hi);
    (branch(a, w), branch(b, w))
}

/// `φ(r) − φ(0)` along the ray `r(d, 1 − d)`, where
/// `φ(ρ) = s2/(θ(ρ) + 2τ) + ‖ρ − ρ̄‖²/(2τ)`.
struct Radial<'a> {
    s2: f64,
    rb: [f64; 2],
    tau: f64,
    f: &'a Interpolation,
}

#[derive(Clone, Copy)]
struct RayMin {
    d: f64,
    r: f64,
    value: f64,
    failed: bool,
}

impl Radial<'_> {
    fn solve(&self, d: f64) -> RayMin {
        let th = self.f.value(d, 1.0 - d);
        let nn = d * d + (1.0 - d) * (1.0 - d);
        let b = self.rb[0] * d + self.rb[1] * (1.0 - d);
        let (s2, tau) = (self.s2, self.tau);
        // h = dφ/dr is increasing and concave, so Newton from r = 0 climbs
        // monotonically onto the root.
        let h = |r: f64| (r * nn - b) / tau - s2 * th / (r * th + 2.0 * tau).powi(2);
        let dh = |r: f64| nn / tau + 2.0 * s2 * th * th / (r * th + 2.0 * tau).powi(3);
        let mut r = 0.0;
        let mut failed = false;
        if h(0.0) < 0.0 {
            // h(B/N) < 0 as well, so it is a valid monotone start
            r = (b / nn).max(0.0);
            let cap = (b + s2 * th / (4.0 * tau)) / nn;
            let mut k = 0;
            loop {
                let next = (r - h(r) / dh(r)).min(cap);
                if next <= r || next - r <= 1e-15 * next {
                    r = next.max(r);
                    break;
                }
                r = next;
                k += 1;
                if k == 100 {
                    failed = true;
                    break;
                }
            }
        }
        let value = -s2 * r * th / (2.0 * tau * (r * th + 2.0 * tau)) + (r * r * nn - 2.0 * r * b) / (2.0 * tau);
        RayMin { d, r, value, failed }
    }
}
