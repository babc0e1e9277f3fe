//! Dormand–Prince 5(4) integrator for scalar autonomous ODEs.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Rk45Config {
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for Rk45Config {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-13,
            h_min: 1e-12,
            max_steps: 1_000_000,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1`, landing exactly on each of the
/// increasing `outputs` (which must lie in `[t0, t1]`). Returns `y` at those times.
pub fn rk45(
    f: impl Fn(f64, f64) -> f64,
    t0: f64,
    y0: f64,
    outputs: &[f64],
    cfg: &Rk45Config,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(outputs.len());
    let mut t = t0;
    let mut y = y0;
    let mut h: f64 = 1e-3;
    let mut steps = 0;
    for &target in outputs {
        while target - t > 1e-15 {
            steps += 1;
            if steps > cfg.max_steps {
                return Err(Error::StiffAtBoundary { t });
            }
            let hh = h.min(target - t);
            let mut k = [0.0; 7];
            for s in 0..7 {
                let ys = y + hh * (0..s).map(|j| A[s][j] * k[j]).sum::<f64>();
                k[s] = f(t + C[s] * hh, ys);
            }
            let y5 = y + hh * (0..7).map(|s| B5[s] * k[s]).sum::<f64>();
            let y4 = y + hh * (0..7).map(|s| B4[s] * k[s]).sum::<f64>();
            let sc = cfg.atol + cfg.rtol * y.abs().max(y5.abs());
            let err = ((y5 - y4) / sc).abs();
            if err <= 1.0 && y5.is_finite() {
                t += hh;
                y = y5;
                let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
                h = hh * fac;
            } else {
                h = hh * (0.9 * err.powf(-0.25)).clamp(0.1, 0.5);
                if h < cfg.h_min {
                    return Err(Error::StiffAtBoundary { t });
                }
            }
        }
        t = target;
        out.push(y);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth() {
        let ts: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        let ys = rk45(|_, y| y, 0.0, 1.0, &ts, &Rk45Config::default()).unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            assert!((y - t.exp()).abs() < 1e-10, "{t} {y}");
        }
    }

    #[test]
    fn logistic_matches_closed_form() {
        let ts = [0.5, 2.0, 4.0];
        let ys = rk45(|_, y| y * (1.0 - y), 0.0, 0.1, &ts, &Rk45Config::default()).unwrap();
        for (t, y) in ts.iter().zip(&ys) {
            let exact = 1.0 / (1.0 + 9.0 * (-t).exp());
            assert!((y - exact).abs() < 1e-10);
        }
    }
}
