//! The vector fields W_k = Σ_{i<j} x_i x_j (e_j − e_i) on the standard simplex Δ_k.

use crate::rational::{zero, Q};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("no convergence within horizon {horizon} (velocity {velocity:e})")]
    NoConvergence { horizon: f64, velocity: f64 },
    #[error("start point is not in the simplex: {0}")]
    OutsideSimplex(String),
}

/// Component m is x_m (Σ_{i<m} x_i − Σ_{i>m} x_i).
pub fn wk_eval(x: &[f64]) -> Vec<f64> {
    let total: f64 = x.iter().sum();
    let mut below = 0.0;
    x.iter()
        .map(|&xm| {
            let above = total - below - xm;
            let v = xm * (below - above);
            below += xm;
            v
        })
        .collect()
}

pub fn wk_eval_exact(x: &[Q]) -> Vec<Q> {
    let total: Q = x.iter().sum();
    let mut below = zero();
    let mut out = Vec::with_capacity(x.len());
    for xm in x {
        let above = &total - &below - xm;
        out.push(xm * (&below - &above));
        below += xm;
    }
    out
}

/// W_k(h_k) = Σ_{i<j} (j − i) x_i x_j.
pub fn lyapunov_rate(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..x.len() {
        for i in 0..j {
            s += (j - i) as f64 * x[i] * x[j];
        }
    }
    s
}

pub fn height(x: &[f64]) -> f64 {
    x.iter().enumerate().map(|(j, v)| j as f64 * v).sum()
}

/// Face map f_{i_0…i_l}: Δ_l → Δ_k.
pub fn face_map(k: usize, face: &[usize], y: &[Q]) -> Vec<Q> {
    let mut x = vec![zero(); k + 1];
    for (p, &i) in face.iter().enumerate() {
        x[i] = y[p].clone();
    }
    x
}

/// (backward, forward) limits from the support of x0: (min, max) of {j : x_j > 0}.
pub fn classify_limits(x0: &[f64]) -> (usize, usize) {
    let supp: Vec<usize> = (0..x0.len()).filter(|&j| x0[j] > 0.0).collect();
    (*supp.first().unwrap(), *supp.last().unwrap())
}

#[derive(Clone, Debug)]
pub struct FlowParams {
    pub horizon: f64,
    pub velocity_tol: f64,
    pub rtol: f64,
    pub atol: f64,
    pub clamp_tol: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams { horizon: 200.0, velocity_tol: 1e-10, rtol: 1e-10, atol: 1e-13, clamp_tol: 1e-9 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub limit: usize,
    pub backward: bool,
}

impl Trajectory {
    pub fn end(&self) -> &[f64] {
        self.points.last().unwrap()
    }

    /// Largest drop of h_k between consecutive samples, in flow direction.
    pub fn max_height_drop(&self) -> f64 {
        let s = if self.backward { -1.0 } else { 1.0 };
        self.points.windows(2).map(|w| s * (height(&w[0]) - height(&w[1]))).fold(0.0, f64::max)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn axpy(x: &[f64], h: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut y = x.to_vec();
    for (c, k) in terms {
        for (yi, ki) in y.iter_mut().zip(k.iter()) {
            *yi += h * c * ki;
        }
    }
    y
}

// Dormand–Prince 5(4) tableau; the field is autonomous so the nodes c_i are not needed
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
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Integrates ẋ = ±W_k(x) until the velocity drops below the threshold.
pub fn flow(x0: &[f64], backward: bool, p: &FlowParams) -> Result<Trajectory, FlowError> {
    let sum: f64 = x0.iter().sum();
    if x0.iter().any(|&v| v < -p.clamp_tol) || (sum - 1.0).abs() > 1e-9 {
        return Err(FlowError::OutsideSimplex(format!("{x0:?}")));
    }
    let s = if backward { -1.0 } else { 1.0 };
    let f = |x: &[f64]| -> Vec<f64> { wk_eval(x).into_iter().map(|v| s * v).collect() };
    let mut x: Vec<f64> = x0.iter().map(|&v| v.max(0.0)).collect();
    let mut t = 0.0;
    let mut h: f64 = 1e-2;
    let mut times = vec![0.0];
    let mut points = vec![x.clone()];
    let mut v = norm(&wk_eval(&x));
    while v >= p.velocity_tol {
        if t >= p.horizon {
            return Err(FlowError::NoConvergence { horizon: p.horizon, velocity: v });
        }
        let h_now = h.min(p.horizon - t).max(1e-12);
        let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
        for st in 0..7 {
            let terms: Vec<(f64, &[f64])> = (0..st).map(|m| (A[st][m], k[m].as_slice())).collect();
            let y = axpy(&x, h_now, &terms);
            k.push(f(&y));
        }
        let t5: Vec<(f64, &[f64])> = (0..7).map(|m| (B5[m], k[m].as_slice())).collect();
        let t4: Vec<(f64, &[f64])> = (0..7).map(|m| (B4[m], k[m].as_slice())).collect();
        let y5 = axpy(&x, h_now, &t5);
        let y4 = axpy(&x, h_now, &t4);
        let err = y5
            .iter()
            .zip(&y4)
            .zip(&x)
            .map(|((a, b), xi)| ((a - b) / (p.atol + p.rtol * a.abs().max(xi.abs()))).powi(2))
            .sum::<f64>()
            .sqrt()
            / (x.len() as f64).sqrt();
        if err <= 1.0 {
            t += h_now;
            x = y5.into_iter().map(|v| if v < 0.0 && v > -p.clamp_tol { 0.0 } else { v }).collect();
            times.push(t);
            points.push(x.clone());
            v = norm(&wk_eval(&x));
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h_now * fac).min(10.0);
    }
    let limit = (0..x.len()).max_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap()).unwrap();
    Ok(Trajectory { times, points, limit, backward })
}

/// Jacobian of W_k in the ambient coordinates.
pub fn jacobian(x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let total: f64 = x.iter().sum();
    let mut j = DMatrix::zeros(n, n);
    let mut below = 0.0;
    for m in 0..n {
        let above = total - below - x[m];
        j[(m, m)] += below - above;
        for q in 0..n {
            if q < m {
                j[(m, q)] += x[m];
            } else if q > m {
                j[(m, q)] -= x[m];
            }
        }
        below += x[m];
    }
    j
}

#[derive(Clone, Debug, Serialize)]
pub struct Linearization {
    pub vertex: usize,
    pub eigenvalues: Vec<f64>,
    pub stable: usize,
    pub unstable: usize,
    /// Residual |J w − λ w| over the spanning sets w_{i,j} (stable) and w_{j,i} (unstable).
    pub span_residual: f64,
}

/// Linearization at Δ_k(j) on the tangent space Σ v = 0, in the basis e_i − e_j (i ≠ j).
pub fn vertex_linearization(k: usize, j: usize) -> Linearization {
    let mut x = vec![0.0; k + 1];
    x[j] = 1.0;
    let jac = jacobian(&x);
    let others: Vec<usize> = (0..=k).filter(|&i| i != j).collect();
    let b = DMatrix::from_fn(k + 1, k, |r, c| {
        let i = others[c];
        (r == i) as i32 as f64 - (r == j) as i32 as f64
    });
    let pinv = (b.transpose() * &b).try_inverse().expect("basis") * b.transpose();
    let m = &pinv * &jac * &b;
    let mut eigenvalues: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.re).collect();
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut span_residual: f64 = 0.0;
    for &i in &others {
        let mut w = DVector::zeros(k + 1);
        // w_{i,j} = e_j − e_i for i < j (stable, λ = −1); w_{j,i} = e_i − e_j for i > j (unstable, λ = +1)
        let lambda = if i < j { -1.0 } else { 1.0 };
        if i < j {
            w[j] = 1.0;
            w[i] = -1.0;
        } else {
            w[i] = 1.0;
            w[j] = -1.0;
        }
        span_residual = span_residual.max((&jac * &w - &w * lambda).norm());
    }
    Linearization {
        vertex: j,
        stable: eigenvalues.iter().filter(|&&l| l < 0.0).count(),
        unstable: eigenvalues.iter().filter(|&&l| l > 0.0).count(),
        eigenvalues,
        span_residual,
    }
}

/// A random start on Δ_k: a random nonempty support with weights in [1/20, 1], normalized.
pub fn random_start<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..=k).map(|_| if rng.gen_bool(0.6) { rng.gen_range(0.05..=1.0) } else { 0.0 }).collect();
        let s: f64 = x.iter().sum();
        if s > 0.0 {
            return x.into_iter().map(|v| v / s).collect();
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub k: usize,
    pub starts: usize,
    pub agreements: usize,
    /// Largest |x(T) − e_limit| over both directions.
    pub max_vertex_error: f64,
    pub max_height_drop: f64,
    pub failures: Vec<String>,
}

/// Flows `n` random starts both ways and compares the limits with `classify_limits`.
pub fn sweep(k: usize, n: usize, seed: u64, p: &FlowParams) -> SweepReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64) << 32);
    let mut r = SweepReport { k, starts: n, agreements: 0, max_vertex_error: 0.0, max_height_drop: 0.0, failures: Vec::new() };
    for _ in 0..n {
        let x0 = random_start(&mut rng, k);
        let (lo, hi) = classify_limits(&x0);
        let mut ok = true;
        for (backward, want) in [(false, hi), (true, lo)] {
            match flow(&x0, backward, p) {
                Ok(t) => {
                    let end = t.end();
                    let err = (0..=k).map(|i| (end[i] - (i == want) as i32 as f64).abs()).fold(0.0, f64::max);
                    r.max_vertex_error = r.max_vertex_error.max(err);
                    r.max_height_drop = r.max_height_drop.max(t.max_height_drop());
                    ok &= t.limit == want;
                }
                Err(e) => {
                    ok = false;
                    r.failures.push(format!("{x0:?}: {e}"));
                }
            }
        }
        if ok {
            r.agreements += 1;
        } else if r.failures.len() < 10 {
            r.failures.push(format!("{x0:?}: limits disagree with ({lo}, {hi})"));
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, qf};

    #[test]
    fn evaluations() {
        assert_eq!(wk_eval(&[0.5, 0.5]), vec![-0.25, 0.25]);
        let b = wk_eval_exact(&[qf(1, 3), qf(1, 3), qf(1, 3)]);
        assert_eq!(b, vec![qf(-2, 9), q(0), qf(2, 9)]);
        assert!((lyapunov_rate(&[1.0 / 3.0; 3]) - 4.0 / 9.0).abs() < 1e-15);
        assert_eq!(lyapunov_rate(&[0.0, 1.0, 0.0]), 0.0);
        assert!(wk_eval(&[0.0, 0.0, 1.0]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn edge_flow_is_logistic() {
        let p = FlowParams::default();
        let f = flow(&[0.5, 0.5], false, &p).unwrap();
        assert_eq!(f.limit, 1);
        // x_1(t) = 1 / (1 + e^{−t})
        let (t, x) = (f.times[3], &f.points[3]);
        assert!((x[1] - 1.0 / (1.0 + (-t).exp())).abs() < 1e-8);
        assert_eq!(flow(&[0.5, 0.5], true, &p).unwrap().limit, 0);
        assert_eq!(classify_limits(&[0.0, 0.5, 0.5, 0.0]), (1, 2));
    }

    #[test]
    fn linearization_counts() {
        for (j, s, u) in [(0, 0, 2), (2, 2, 0), (1, 1, 1)] {
            let l = vertex_linearization(2, j);
            assert_eq!((l.stable, l.unstable), (s, u));
            assert!(l.span_residual < 1e-12);
        }
    }
}
