//! Mean-field compartmental reference: SIR/SEIR ODEs and the final-size relation.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeRates {
    /// Transmission rate, 1/s.
    pub beta: f64,
    /// Recovery rate, 1/s.
    pub gamma_r: f64,
    /// Incubation rate, 1/s. `None` gives SIR.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_e: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdePoint {
    pub t: f64,
    pub s: f64,
    pub e: f64,
    pub i: f64,
    pub r: f64,
}

impl OdePoint {
    fn deriv(&self, k: &OdeRates) -> [f64; 4] {
        let force = k.beta * self.s * self.i;
        let (de, onset) = match k.sigma_e {
            Some(sigma) => (force - sigma * self.e, sigma * self.e),
            None => (0.0, force),
        };
        let recovery = k.gamma_r * self.i;
        [-force, de, onset - recovery, recovery]
    }

    fn offset(&self, d: &[f64; 4], h: f64) -> Self {
        Self {
            t: self.t,
            s: self.s + h * d[0],
            e: self.e + h * d[1],
            i: self.i + h * d[2],
            r: self.r + h * d[3],
        }
    }
}

/// RK4 solution sampled at every step, starting from `init` at `t = init.t`.
pub fn sir_ode(rates: &OdeRates, init: OdePoint, duration: f64, dt: f64) -> Result<Vec<OdePoint>> {
    let sum = init.s + init.e + init.i + init.r;
    if (sum - 1.0).abs() > 1e-9 || [init.s, init.e, init.i, init.r].iter().any(|&v| v < 0.0) {
        return Err(Error::domain("initial fractions must be non-negative and sum to 1"));
    }
    if rates.beta < 0.0 || rates.gamma_r < 0.0 || rates.sigma_e.is_some_and(|s| s < 0.0) {
        return Err(Error::domain("rates must be non-negative"));
    }
    if !(dt > 0.0) || !(duration >= 0.0) {
        return Err(Error::domain("dt must be positive and duration non-negative"));
    }
    let n = (duration / dt - 1e-9).ceil().max(0.0) as usize;
    let mut out = Vec::with_capacity(n + 1);
    let mut y = init;
    out.push(y);
    for k in 1..=n {
        let k1 = y.deriv(rates);
        let k2 = y.offset(&k1, dt / 2.0).deriv(rates);
        let k3 = y.offset(&k2, dt / 2.0).deriv(rates);
        let k4 = y.offset(&k3, dt).deriv(rates);
        let mut d = [0.0; 4];
        for j in 0..4 {
            d[j] = (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) / 6.0;
        }
        y = y.offset(&d, dt);
        y.t = init.t + k as f64 * dt;
        out.push(y);
    }
    Ok(out)
}

/// Attack rate `a` solving `1 - a = exp(-r0 a)`; zero when `r0 <= 1`.
pub fn final_size(r0: f64) -> f64 {
    if !(r0 > 1.0) {
        return 0.0;
    }
    let g = |a: f64| -(-r0 * a).exp_m1() - a;
    // g rises to its maximum at ln(r0)/r0 and is negative at 1.
    let mut lo = r0.ln() / r0;
    let mut hi = 1.0;
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
