//! Carleman weight machinery.
//!
//! The weight is `exp(2 s alpha)` with
//!
//! ```text
//! phi(x,t)   = exp(lambda eta(x)) / mu(t)
//! alpha(x,t) = (exp(lambda eta(x)) - exp(2 lambda ||eta||)) / mu(t)
//! ```
//!
//! where `eta` is an explicit affine weight function on the interval or
//! rectangle (positive inside, vanishing on the side opposite the observed
//! one, with nonvanishing gradient) and `mu` is a smooth positive bump that
//! behaves like `t^2` near `t = 0`, is symmetric about `T/2`, and increases
//! on `[0, T/2]`. Since `alpha < 0` everywhere and `alpha -> -inf` at
//! `t = 0, T`, true weight values underflow `f64` already for moderate `s`;
//! every consumer therefore works with `log`-weights and with the peak value
//! `max alpha` factored out, clamping underflow to exactly 0.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{BoundaryPartition, Side, SpaceTimeGrid};

/// Affine spatial weight function `eta(x) = offset + gradient . x`.
#[derive(Debug, Clone)]
pub struct Eta {
    pub grid: Arc<SpaceTimeGrid>,
    pub offset: f64,
    pub gradient: [f64; 2],
    /// `max eta` over the closed domain.
    pub sup: f64,
    /// Side on which `eta` vanishes (the enlarged unobserved part).
    pub zero_side: Side,
    /// Values at grid nodes.
    pub values: Vec<f64>,
}

impl Eta {
    pub fn at(&self, x: f64, y: f64) -> f64 {
        self.offset + self.gradient[0] * x + self.gradient[1] * y
    }

    pub fn grad_norm(&self) -> f64 {
        (self.gradient[0].powi(2) + self.gradient[1].powi(2)).sqrt()
    }
}

/// Explicit affine construction of `eta` for interval/rectangle geometries
/// where the observed set contains at least one full side: `eta` grows
/// linearly away from the side opposite an observed one and vanishes there.
pub fn build_eta(grid: &Arc<SpaceTimeGrid>, partition: &BoundaryPartition) -> Result<Eta> {
    let observed = &partition.gamma_sides;
    // Preference order keeps the 1D conventions: observing the right
    // endpoint gives eta(x) = x.
    let order = [Side::XHigh, Side::XLow, Side::YHigh, Side::YLow];
    let side = order
        .into_iter()
        .find(|s| observed.contains(s))
        .ok_or_else(|| {
            Error::Grid("no fully observed side; general weight construction unsupported".into())
        })?;
    let (offset, gradient, zero_side) = match side {
        Side::XHigh => (0.0, [1.0, 0.0], Side::XLow),
        Side::XLow => (grid.extent[0], [-1.0, 0.0], Side::XHigh),
        Side::YHigh => (0.0, [0.0, 1.0], Side::YLow),
        Side::YLow => (grid.extent[1], [0.0, -1.0], Side::YHigh),
    };
    if grid.dim == 1 && matches!(side, Side::YLow | Side::YHigh) {
        return Err(Error::Grid("y-side selected on a 1D grid".into()));
    }
    let mut values = Vec::with_capacity(grid.n_nodes());
    let mut sup: f64 = 0.0;
    for k in 0..grid.n_nodes() {
        let (x, y) = grid.coords(k);
        let v = offset + gradient[0] * x + gradient[1] * y;
        sup = sup.max(v);
        values.push(v);
    }
    let eta = Eta {
        grid: grid.clone(),
        offset,
        gradient,
        sup,
        zero_side,
        values,
    };
    validate_eta(&eta)?;
    Ok(eta)
}

fn validate_eta(eta: &Eta) -> Result<()> {
    let grid = &eta.grid;
    if eta.grad_norm() <= 0.0 {
        return Err(Error::Grid("eta has vanishing gradient".into()));
    }
    for k in 0..grid.n_nodes() {
        let on_zero_side = grid
            .boundary_position(k)
            .map(|p| grid.boundary_nodes()[p].sides.contains(&eta.zero_side))
            .unwrap_or(false);
        if on_zero_side {
            if eta.values[k].abs() > 1e-12 * eta.sup.max(1.0) {
                return Err(Error::Grid(format!(
                    "eta does not vanish on its zero side at node {k}"
                )));
            }
        } else if !grid.is_boundary(k) && eta.values[k] <= 0.0 {
            return Err(Error::Grid(format!("eta not positive at interior node {k}")));
        }
    }
    Ok(())
}

// Quintic Hermite basis on [0, 1] matching value, slope, and curvature at
// both ends.
fn hermite5(tau: f64, v0: f64, s0: f64, k0: f64, v1: f64, s1: f64, k1: f64) -> f64 {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    let t4 = t3 * tau;
    let t5 = t4 * tau;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = tau - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * t2 - 1.5 * t3 + 1.5 * t4 - 0.5 * t5;
    let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 0.5 * t3 - t4 + 0.5 * t5;
    v0 * h0 + s0 * h1 + k0 * h2 + v1 * h3 + s1 * h4 + k1 * h5
}

fn hermite5_d1(tau: f64, v0: f64, s0: f64, k0: f64, v1: f64, s1: f64, k1: f64) -> f64 {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    let t4 = t3 * tau;
    let h0 = -30.0 * t2 + 60.0 * t3 - 30.0 * t4;
    let h1 = 1.0 - 18.0 * t2 + 32.0 * t3 - 15.0 * t4;
    let h2 = tau - 4.5 * t2 + 6.0 * t3 - 2.5 * t4;
    let h3 = 30.0 * t2 - 60.0 * t3 + 30.0 * t4;
    let h4 = -12.0 * t2 + 28.0 * t3 - 15.0 * t4;
    let h5 = 1.5 * t2 - 4.0 * t3 + 2.5 * t4;
    v0 * h0 + s0 * h1 + k0 * h2 + v1 * h3 + s1 * h4 + k1 * h5
}

fn hermite5_d2(tau: f64, v0: f64, s0: f64, k0: f64, v1: f64, s1: f64, k1: f64) -> f64 {
    let t2 = tau * tau;
    let t3 = t2 * tau;
    let h0 = -60.0 * tau + 180.0 * t2 - 120.0 * t3;
    let h1 = -36.0 * tau + 96.0 * t2 - 60.0 * t3;
    let h2 = 1.0 - 9.0 * tau + 18.0 * t2 - 10.0 * t3;
    let h3 = 60.0 * tau - 180.0 * t2 + 120.0 * t3;
    let h4 = -24.0 * tau + 84.0 * t2 - 60.0 * t3;
    let h5 = 3.0 * tau - 12.0 * t2 + 10.0 * t3;
    v0 * h0 + s0 * h1 + k0 * h2 + v1 * h3 + s1 * h4 + k1 * h5
}

/// Patch data for the blend on `[T/4, T/2]`: matches `t^2` with value,
/// slope, and curvature at `T/4`; flat (zero slope and curvature) at `T/2`
/// with value `3 T^2 / 16`.
fn patch_data(t_horizon: f64) -> (f64, f64, f64, f64, f64, f64) {
    let t2 = t_horizon * t_horizon;
    (t2 / 16.0, t2 / 8.0, t2 / 8.0, 3.0 * t2 / 16.0, 0.0, 0.0)
}

/// `mu(t)`: equals `t^2` up to `T/4`, quintic blend up to `T/2`, mirror
/// image beyond. Rejects arguments outside `(0, T)`.
pub fn eval_mu(t: f64, t_horizon: f64) -> Result<f64> {
    if !(t > 0.0 && t < t_horizon) {
        return Err(Error::Grid(format!(
            "mu evaluated outside (0, T): t = {t}, T = {t_horizon}"
        )));
    }
    Ok(mu_inner(t, t_horizon))
}

pub(crate) fn mu_inner(t: f64, t_horizon: f64) -> f64 {
    let half = t_horizon / 2.0;
    if t > half {
        return mu_inner(t_horizon - t, t_horizon);
    }
    let quarter = t_horizon / 4.0;
    if t <= quarter {
        t * t
    } else {
        let tau = (t - quarter) / quarter;
        let (v0, s0, k0, v1, s1, k1) = patch_data(t_horizon);
        hermite5(tau, v0, s0, k0, v1, s1, k1)
    }
}

pub(crate) fn mu_prime_inner(t: f64, t_horizon: f64) -> f64 {
    let half = t_horizon / 2.0;
    if t > half {
        return -mu_prime_inner(t_horizon - t, t_horizon);
    }
    let quarter = t_horizon / 4.0;
    if t <= quarter {
        2.0 * t
    } else {
        let tau = (t - quarter) / quarter;
        let (v0, s0, k0, v1, s1, k1) = patch_data(t_horizon);
        hermite5_d1(tau, v0, s0, k0, v1, s1, k1) / quarter
    }
}

pub(crate) fn mu_double_prime_inner(t: f64, t_horizon: f64) -> f64 {
    let half = t_horizon / 2.0;
    if t > half {
        return mu_double_prime_inner(t_horizon - t, t_horizon);
    }
    let quarter = t_horizon / 4.0;
    if t <= quarter {
        2.0
    } else {
        let tau = (t - quarter) / quarter;
        let (v0, s0, k0, v1, s1, k1) = patch_data(t_horizon);
        hermite5_d2(tau, v0, s0, k0, v1, s1, k1) / (quarter * quarter)
    }
}

/// The full weight bundle: `lambda`, `s`, `eta`, and tabulated per-node /
/// per-level factors for fast pointwise evaluation.
#[derive(Debug, Clone)]
pub struct CarlemanWeights {
    pub grid: Arc<SpaceTimeGrid>,
    pub eta: Arc<Eta>,
    pub lambda: f64,
    pub s: f64,
    /// `exp(lambda eta)` per node.
    exp_le: Vec<f64>,
    /// `xi = exp(2 lambda ||eta||) - exp(lambda eta)` per node (positive).
    xi: Vec<f64>,
    /// `mu` per time level; exactly 0 at the endpoints.
    mu: Vec<f64>,
    mu_p: Vec<f64>,
    mu_pp: Vec<f64>,
    /// `max alpha` over nodes x interior levels.
    alpha_peak: f64,
}

impl CarlemanWeights {
    pub fn new(eta: Arc<Eta>, lambda: f64, s: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Grid(format!("lambda must be positive (got {lambda})")));
        }
        if s < 0.0 {
            return Err(Error::Grid(format!("s must be nonnegative (got {s})")));
        }
        let grid = eta.grid.clone();
        let big = (2.0 * lambda * eta.sup).exp();
        let exp_le: Vec<f64> = eta.values.iter().map(|&e| (lambda * e).exp()).collect();
        let xi: Vec<f64> = exp_le.iter().map(|&e| big - e).collect();
        let mut mu = vec![0.0; grid.nt];
        let mut mu_p = vec![0.0; grid.nt];
        let mut mu_pp = vec![0.0; grid.nt];
        for n in 1..grid.nt - 1 {
            let t = grid.time(n);
            mu[n] = mu_inner(t, grid.t_horizon);
            mu_p[n] = mu_prime_inner(t, grid.t_horizon);
            mu_pp[n] = mu_double_prime_inner(t, grid.t_horizon);
        }
        let xi_min = xi.iter().cloned().fold(f64::INFINITY, f64::min);
        let mu_max = mu.iter().cloned().fold(0.0f64, f64::max);
        let alpha_peak = -xi_min / mu_max;
        Ok(CarlemanWeights {
            grid,
            eta,
            lambda,
            s,
            exp_le,
            xi,
            mu,
            mu_p,
            mu_pp,
            alpha_peak,
        })
    }

    pub fn with_s(&self, s: f64) -> Self {
        let mut w = self.clone();
        w.s = s;
        w
    }

    /// `max alpha` over the grid (a negative number).
    pub fn alpha_peak(&self) -> f64 {
        self.alpha_peak
    }

    pub fn mu_at(&self, level: usize) -> f64 {
        self.mu[level]
    }

    /// `phi` at a node/level; infinite at the time endpoints.
    #[inline]
    pub fn phi(&self, node: usize, level: usize) -> f64 {
        self.exp_le[node] / self.mu[level]
    }

    /// `alpha` at a node/level; `-inf` at the time endpoints.
    #[inline]
    pub fn alpha(&self, node: usize, level: usize) -> f64 {
        -self.xi[node] / self.mu[level]
    }

    /// `2 s alpha`, the log of the Carleman weight.
    #[inline]
    pub fn log_weight(&self, node: usize, level: usize) -> f64 {
        2.0 * self.s * self.alpha(node, level)
    }

    /// `exp(2 s (alpha - alpha_peak))`: the weight with its peak factored
    /// out. Underflow clamps to exactly 0, which is the correct limit.
    #[inline]
    pub fn weight_normalized(&self, node: usize, level: usize) -> f64 {
        let e = 2.0 * self.s * (self.alpha(node, level) - self.alpha_peak);
        if e < -745.0 {
            0.0
        } else {
            e.exp()
        }
    }

    /// Log of the common factor pulled out of every weighted integral.
    pub fn log_peak_factor(&self) -> f64 {
        2.0 * self.s * self.alpha_peak
    }

    #[inline]
    pub fn d_alpha_dt(&self, node: usize, level: usize) -> f64 {
        self.xi[node] * self.mu_p[level] / (self.mu[level] * self.mu[level])
    }

    #[inline]
    pub fn d2_alpha_dt2(&self, node: usize, level: usize) -> f64 {
        let m = self.mu[level];
        self.xi[node] * (self.mu_pp[level] - 2.0 * self.mu_p[level] * self.mu_p[level] / m)
            / (m * m)
    }

    #[inline]
    pub fn d_phi_dt(&self, node: usize, level: usize) -> f64 {
        -self.exp_le[node] * self.mu_p[level] / (self.mu[level] * self.mu[level])
    }

    /// `grad phi = lambda phi grad eta` (constant direction for affine eta).
    #[inline]
    pub fn grad_phi(&self, node: usize, level: usize) -> [f64; 2] {
        let c = self.lambda * self.phi(node, level);
        [c * self.eta.gradient[0], c * self.eta.gradient[1]]
    }

    /// Pointwise evaluation off the grid tabulation (used by tests and by
    /// field dumps): returns `(phi, alpha, 2 s alpha)`.
    pub fn eval(&self, x: f64, y: f64, t: f64) -> Result<(f64, f64, f64)> {
        let m = eval_mu(t, self.grid.t_horizon)?;
        let e = (self.lambda * self.eta.at(x, y)).exp();
        let big = (2.0 * self.lambda * self.eta.sup).exp();
        let phi = e / m;
        let alpha = (e - big) / m;
        Ok((phi, alpha, 2.0 * self.s * alpha))
    }

    /// Tilde variants built from `-eta`: returns `(phi_tilde, alpha_tilde)`.
    pub fn eval_tilde(&self, x: f64, y: f64, t: f64) -> Result<(f64, f64)> {
        let m = eval_mu(t, self.grid.t_horizon)?;
        let e = (-self.lambda * self.eta.at(x, y)).exp();
        let big = (2.0 * self.lambda * self.eta.sup).exp();
        Ok((e / m, (e - big) / m))
    }

    /// Validates the structural invariants: eta shape, exact mu symmetry at
    /// paired grid times, negativity of alpha.
    pub fn validate(&self) -> Result<()> {
        validate_eta(&self.eta)?;
        let nt = self.grid.nt;
        for n in 1..nt - 1 {
            let paired = nt - 1 - n;
            let a = self.mu[n];
            let b = self.mu[paired];
            if (a - b).abs() > 1e-13 * a.abs().max(1.0) {
                return Err(Error::Grid(format!(
                    "mu symmetry violated at level {n}: {a} vs {b}"
                )));
            }
            if !(a > 0.0) {
                return Err(Error::Grid(format!("mu not positive at level {n}")));
            }
        }
        for k in 0..self.grid.n_nodes() {
            for n in 1..nt - 1 {
                if !(self.alpha(k, n) < 0.0) {
                    return Err(Error::Grid(format!(
                        "alpha not negative at node {k}, level {n}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Report of `sup phi^rho exp(2 s alpha)` over the grid and a parameter
/// range, in log space.
#[derive(Debug, Clone, Serialize)]
pub struct WeightBoundReport {
    pub rho: f64,
    /// `sup` as an f64 (may underflow to 0; `log_sup` is authoritative).
    pub sup: f64,
    pub log_sup: f64,
    pub argmax_x: f64,
    pub argmax_y: f64,
    pub argmax_t: f64,
    pub s_at_sup: f64,
    /// True when the supremum would overflow f64, which the bound says
    /// cannot happen.
    pub violation: bool,
}

/// Evaluates `sup_{x, t, s} phi^rho exp(2 s alpha)` over grid nodes,
/// interior time levels, and the given `s` values.
pub fn check_weight_bounds(
    rho: f64,
    s_grid: &[f64],
    w: &CarlemanWeights,
) -> Result<WeightBoundReport> {
    if s_grid.is_empty() {
        return Err(Error::Grid("empty s grid".into()));
    }
    let grid = &w.grid;
    let mut best = f64::NEG_INFINITY;
    let mut arg = (0usize, 1usize, s_grid[0]);
    for &s in s_grid {
        if s < 1.0 {
            return Err(Error::Grid(format!("weight bound requires s >= 1 (got {s})")));
        }
        for n in 1..grid.nt - 1 {
            for k in 0..grid.n_nodes() {
                let log_val = rho * w.phi(k, n).ln() + 2.0 * s * w.alpha(k, n);
                if log_val > best {
                    best = log_val;
                    arg = (k, n, s);
                }
            }
        }
    }
    let (x, y) = grid.coords(arg.0);
    Ok(WeightBoundReport {
        rho,
        sup: if best < -745.0 { 0.0 } else { best.exp() },
        log_sup: best,
        argmax_x: x,
        argmax_y: y,
        argmax_t: grid.time(arg.1),
        s_at_sup: arg.2,
        violation: !best.is_finite() || best > 709.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, partition_boundary};

    fn eta_1d(gamma: &[Side]) -> (Arc<SpaceTimeGrid>, Arc<Eta>) {
        let g = build_grid(&[1.0], &[9], 1.0, 9).unwrap();
        let p = partition_boundary(&g, gamma).unwrap();
        let eta = Arc::new(build_eta(&g, &p).unwrap());
        (g, eta)
    }

    #[test]
    fn eta_affine_constructions() {
        let (_, eta) = eta_1d(&[Side::XHigh]);
        assert_eq!(eta.at(0.3, 0.0), 0.3);
        assert_eq!(eta.sup, 1.0);
        assert_eq!(eta.gradient, [1.0, 0.0]);

        let (_, eta) = eta_1d(&[Side::XLow]);
        assert!((eta.at(0.3, 0.0) - 0.7).abs() < 1e-15);

        let g = build_grid(&[1.0, 1.0], &[5, 5], 1.0, 5).unwrap();
        let p = partition_boundary(&g, &[Side::YLow]).unwrap();
        let eta = build_eta(&g, &p).unwrap();
        // Observed side y = 0: eta = 1 - y vanishes on the opposite side.
        assert!((eta.at(0.2, 0.25) - 0.75).abs() < 1e-15);
        assert_eq!(eta.zero_side, Side::YHigh);
    }

    #[test]
    fn mu_branches_and_symmetry() {
        // mu = t^2 on the first quarter.
        assert!((eval_mu(0.1, 1.0).unwrap() - 0.01).abs() < 1e-16);
        // Mirror symmetry.
        assert!((eval_mu(0.9, 1.0).unwrap() - 0.01).abs() < 1e-16);
        assert!(eval_mu(0.0, 1.0).is_err());
        assert!(eval_mu(1.0, 1.0).is_err());
        // Monotonicity in the blend region.
        assert!(eval_mu(0.30, 1.0).unwrap() < eval_mu(0.45, 1.0).unwrap());
    }

    #[test]
    fn mu_strictly_increasing_dense_oracle() {
        // Dense sampling on (0, T/2].
        let t_h = 1.7;
        let samples = 4000;
        let mut prev = 0.0;
        for i in 1..=samples {
            let t = t_h / 2.0 * i as f64 / samples as f64;
            let m = eval_mu(t, t_h).unwrap();
            assert!(m > prev, "mu not increasing at t = {t}: {m} <= {prev}");
            prev = m;
        }
    }

    #[test]
    fn mu_blend_is_c2_at_seams() {
        // Second divided differences from the two sides of each seam agree.
        let t_h = 1.0;
        for seam in [t_h / 4.0, t_h / 2.0] {
            let eps = 1e-4;
            let left = (mu_inner(seam - 2.0 * eps, t_h) - 2.0 * mu_inner(seam - eps, t_h)
                + mu_inner(seam, t_h))
                / (eps * eps);
            let right = (mu_inner(seam, t_h) - 2.0 * mu_inner(seam + eps, t_h)
                + mu_inner(seam + 2.0 * eps, t_h))
                / (eps * eps);
            assert!(
                (left - right).abs() < 1e-2,
                "curvature jump at {seam}: {left} vs {right}"
            );
        }
    }

    #[test]
    fn mu_derivatives_match_finite_differences() {
        let t_h = 1.3;
        for t in [0.2, 0.35, 0.5, 0.62, 0.9, 1.1] {
            let h = 1e-6;
            let fd1 = (mu_inner(t + h, t_h) - mu_inner(t - h, t_h)) / (2.0 * h);
            let fd2 =
                (mu_inner(t + h, t_h) - 2.0 * mu_inner(t, t_h) + mu_inner(t - h, t_h)) / (h * h);
            assert!((mu_prime_inner(t, t_h) - fd1).abs() < 1e-7 * (1.0 + fd1.abs()));
            assert!((mu_double_prime_inner(t, t_h) - fd2).abs() < 1e-3 * (1.0 + fd2.abs()));
        }
    }

    #[test]
    fn weight_evaluation_arithmetic() {
        let (_, eta) = eta_1d(&[Side::XHigh]);
        let w = CarlemanWeights::new(eta, 1.0, 1.0).unwrap();
        // Direct arithmetic oracle at lambda = 1, eta(x) = x, mu(0.1) = 0.01.
        let (phi, alpha, log_w) = w.eval(0.5, 0.0, 0.1).unwrap();
        let e_half = 0.5f64.exp();
        let e_two = 2.0f64.exp();
        assert!((phi - e_half / 0.01).abs() < 1e-9 * phi.abs());
        assert!((alpha - (e_half - e_two) / 0.01).abs() < 1e-9 * alpha.abs());
        assert!((phi - 164.87212707).abs() < 1e-4);
        assert!((alpha + 574.0334828).abs() < 1e-4);
        assert!((log_w - 2.0 * alpha).abs() < 1e-12 * alpha.abs());
    }

    #[test]
    fn tilde_weights() {
        let (_, eta) = eta_1d(&[Side::XHigh]);
        let w = CarlemanWeights::new(eta, 1.0, 1.0).unwrap();
        // At eta = 0 the tilde and plain phi coincide with 1/mu.
        let (phi_t, _) = w.eval_tilde(0.0, 0.0, 0.1).unwrap();
        let (phi, _, _) = w.eval(0.0, 0.0, 0.1).unwrap();
        assert!((phi_t - phi).abs() < 1e-12 * phi);
        assert!((phi_t - 100.0).abs() < 1e-9);
        // eta = 1, mu = 0.01: phi_tilde = e^{-1}/0.01.
        let (phi_t, _) = w.eval_tilde(1.0, 0.0, 0.1).unwrap();
        assert!((phi_t - 36.787944117).abs() < 1e-6);
        // alpha_tilde <= alpha pointwise when eta >= 0.
        for x in [0.0, 0.25, 0.5, 1.0] {
            let (_, alpha, _) = w.eval(x, 0.0, 0.37).unwrap();
            let (_, at) = w.eval_tilde(x, 0.0, 0.37).unwrap();
            assert!(at <= alpha + 1e-12);
        }
    }

    #[test]
    fn weight_vanishes_at_time_endpoints() {
        let (_, eta) = eta_1d(&[Side::XHigh]);
        let w = CarlemanWeights::new(eta, 1.0, 2.0).unwrap();
        assert_eq!(w.weight_normalized(3, 0), 0.0);
        assert_eq!(w.weight_normalized(3, w.grid.nt - 1), 0.0);
        // Near the endpoints the log-weight is far below -700 for s >= 1 on
        // a reasonably resolved grid.
        let g = build_grid(&[1.0], &[9], 1.0, 129).unwrap();
        let p = partition_boundary(&g, &[Side::XHigh]).unwrap();
        let eta = Arc::new(build_eta(&g, &p).unwrap());
        let w = CarlemanWeights::new(eta, 1.0, 1.0).unwrap();
        for k in 0..g.n_nodes() {
            assert!(w.log_weight(k, 1) < -700.0);
            assert!(w.log_weight(k, g.nt - 2) < -700.0);
        }
    }

    #[test]
    fn weight_bounds_finite_for_all_rho() {
        let (_, eta) = eta_1d(&[Side::XHigh]);
        let w = CarlemanWeights::new(eta, 1.0, 1.0).unwrap();
        for rho in [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0] {
            let rep = check_weight_bounds(rho, &[1.0, 2.0, 4.0, 8.0], &w).unwrap();
            assert!(!rep.violation, "rho = {rho}: {rep:?}");
            assert!(rep.log_sup.is_finite());
            if rho == 0.0 {
                // sup of exp(2 s alpha) <= 1 since alpha < 0.
                assert!(rep.log_sup <= 0.0);
            }
        }
    }

    #[test]
    fn validate_passes_on_reference_weights() {
        let (_, eta) = eta_1d(&[Side::XHigh]);
        let w = CarlemanWeights::new(eta, 1.0, 4.0).unwrap();
        w.validate().unwrap();
        assert!(w.alpha_peak() < 0.0);
    }

    #[test]
    fn derivative_bound_constants_transfer_between_grids() {
        // |d_t phi| <= C phi^2 and |grad phi| <= C phi with C fitted on a
        // coarse grid and checked on a fine one.
        let fit = |nx: usize, nt: usize| -> (f64, f64) {
            let g = build_grid(&[1.0], &[nx], 1.0, nt).unwrap();
            let p = partition_boundary(&g, &[Side::XHigh]).unwrap();
            let eta = Arc::new(build_eta(&g, &p).unwrap());
            let w = CarlemanWeights::new(eta, 1.0, 1.0).unwrap();
            let mut c_t: f64 = 0.0;
            let mut c_x: f64 = 0.0;
            for n in 1..g.nt - 1 {
                for k in 0..g.n_nodes() {
                    let phi = w.phi(k, n);
                    c_t = c_t.max(w.d_phi_dt(k, n).abs() / (phi * phi));
                    let gp = w.grad_phi(k, n);
                    c_x = c_x.max((gp[0].powi(2) + gp[1].powi(2)).sqrt() / phi);
                }
            }
            (c_t, c_x)
        };
        let (ct_coarse, cx_coarse) = fit(9, 17);
        let (ct_fine, cx_fine) = fit(33, 65);
        assert!(ct_fine <= ct_coarse * 1.05, "{ct_fine} vs {ct_coarse}");
        assert!(cx_fine <= cx_coarse * 1.05, "{cx_fine} vs {cx_coarse}");
    }
}
