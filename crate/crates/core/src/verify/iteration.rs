//! Discrete checker for the absorption (iteration) lemma
//!
//! `h(t) <= delta h(s) + sum_i A_i(s) / (s - t)^{alpha_i}` for all `t < s`
//! implies `h(t) <= C_delta sum_i A_i(s) / (s - t)^{alpha_i}`.
//!
//! `C_delta` is the constant of the geometric-sequence argument: with
//! `t_{k+1} = t_k + (1 - lambda) lambda^k (s - t)` and `alpha = max alpha_i`,
//! `C_delta = (1 - lambda)^{-alpha} / (1 - delta lambda^{-alpha})`, minimized over
//! `lambda in (delta^{1/alpha}, 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack for rounding when comparing the two sides.
pub const ITERATION_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTerm {
    /// `A_i` sampled on the problem's times; nondecreasing and nonnegative.
    pub a: Vec<f64>,
    pub alpha: f64,
}

/// `h` and the `A_i` sampled on increasing times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationProblem {
    pub times: Vec<f64>,
    pub h: Vec<f64>,
    pub delta: f64,
    pub terms: Vec<IterationTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationCheck {
    pub c_delta: f64,
    pub lambda: f64,
    pub pairs: usize,
    /// `max h(t) / sum_i A_i(s)/(s - t)^{alpha_i}` over the sampled pairs.
    pub worst_ratio: f64,
    pub holds: bool,
}

impl IterationProblem {
    fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if n < 2 || self.h.len() != n {
            return Err(Error::Precondition("need at least two samples of h on the time grid".into()));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition("sample times must increase".into()));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(Error::Precondition(format!("delta = {} must lie in [0, 1)", self.delta)));
        }
        if self.h.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Precondition("h must be finite and nonnegative".into()));
        }
        for t in &self.terms {
            if t.a.len() != n || !(t.alpha >= 0.0 && t.alpha.is_finite()) {
                return Err(Error::Precondition("each term needs one A sample per time and alpha >= 0".into()));
            }
            if t.a.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || t.a.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::Precondition("A must be finite, nonnegative and nondecreasing".into()));
            }
        }
        Ok(())
    }

    fn forcing(&self, i: usize, j: usize) -> f64 {
        let gap = self.times[j] - self.times[i];
        self.terms.iter().map(|t| t.a[j] / gap.powf(t.alpha)).sum()
    }

    /// Constant `h = A / ((1 - delta) T^alpha)` with one constant `A`; the
    /// hypothesis is an equality at `s - t = T`.
    pub fn saturating(delta: f64, a: f64, alpha: f64, t_end: f64, samples: usize) -> Self {
        let times: Vec<f64> = (0..samples).map(|k| t_end * k as f64 / (samples - 1) as f64).collect();
        let h = vec![a / ((1.0 - delta) * t_end.powf(alpha)); samples];
        Self { times, h, delta, terms: vec![IterationTerm { a: vec![a; samples], alpha }] }
    }

    /// `h(t) = a (1 + t) / ((1 - delta) T^alpha)` with `A(s) = a (1 + s)`.
    pub fn growing(delta: f64, a: f64, alpha: f64, t_end: f64, samples: usize) -> Self {
        let times: Vec<f64> = (0..samples).map(|k| t_end * k as f64 / (samples - 1) as f64).collect();
        let h = times.iter().map(|t| a * (1.0 + t) / ((1.0 - delta) * t_end.powf(alpha))).collect();
        let av = times.iter().map(|t| a * (1.0 + t)).collect();
        Self { times, h, delta, terms: vec![IterationTerm { a: av, alpha }] }
    }
}

/// `(C_delta, lambda)` for a given `delta` and `alpha = max alpha_i`.
pub fn iteration_constant(delta: f64, alpha: f64) -> (f64, f64) {
    if delta == 0.0 {
        return (1.0, 0.0);
    }
    if alpha == 0.0 {
        return (1.0 / (1.0 - delta), 0.0);
    }
    let f = |lam: f64| (1.0 - lam).powf(-alpha) / (1.0 - delta * lam.powf(-alpha));
    let lo = delta.powf(1.0 / alpha);
    // f blows up at both ends and has one interior minimum
    let n = 4096;
    let mut best = (f64::INFINITY, 0.5 * (lo + 1.0));
    for k in 1..n {
        let lam = lo + (1.0 - lo) * k as f64 / n as f64;
        let v = f(lam);
        if v < best.0 {
            best = (v, lam);
        }
    }
    let step = (1.0 - lo) / n as f64;
    let (mut a, mut b) = ((best.1 - step).max(lo + 1e-15), (best.1 + step).min(1.0 - 1e-15));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let lam = 0.5 * (a + b);
    let v = f(lam);
    if v < best.0 {
        (v, lam)
    } else {
        (best.0, best.1)
    }
}

pub fn iteration_lemma_check(problem: &IterationProblem) -> Result<IterationCheck> {
    problem.validate()?;
    let n = problem.times.len();
    for i in 0..n {
        for j in i + 1..n {
            let rhs = problem.delta * problem.h[j] + problem.forcing(i, j);
            if problem.h[i] > rhs * (1.0 + ITERATION_TOL) {
                return Err(Error::Hypothesis { t: problem.times[i], s: problem.times[j] });
            }
        }
    }
    let alpha = problem.terms.iter().map(|t| t.alpha).fold(0.0, f64::max);
    let (c_delta, lambda) = iteration_constant(problem.delta, alpha);
    let mut holds = true;
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for i in 0..n {
        for j in i + 1..n {
            pairs += 1;
            let s = problem.forcing(i, j);
            let h = problem.h[i];
            let ratio = if h == 0.0 { 0.0 } else if s > 0.0 { h / s } else { f64::INFINITY };
            worst = worst.max(ratio);
            if h > c_delta * s * (1.0 + ITERATION_TOL) {
                holds = false;
            }
        }
    }
    Ok(IterationCheck { c_delta, lambda, pairs, worst_ratio: worst, holds })
}
