//! Linear soft-margin SVM trained by Sequential Minimal Optimization.
//!
//! The trainer follows Platt's outer loop (alternating full sweeps with
//! sweeps over non-bound multipliers) and his second-choice heuristic. With
//! a linear kernel the weight vector is kept explicitly and updated
//! incrementally.

use serde::{Deserialize, Serialize};

use crate::corpus::Class;
use crate::error::{Error, Result};
use crate::prep::{Conditioner, Dataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoConfig {
    pub c: f64,
    pub kkt_tolerance: f64,
    /// Minimum change in a multiplier for a step to count.
    pub alpha_epsilon: f64,
    /// Cap on successful pair updates.
    pub max_iterations: usize,
}

impl Default for SmoConfig {
    fn default() -> Self {
        SmoConfig {
            c: 1.0,
            kkt_tolerance: 1e-3,
            alpha_epsilon: 1e-12,
            max_iterations: 1_000_000,
        }
    }
}

impl SmoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid("C must be positive and finite"));
        }
        if !(self.kkt_tolerance > 0.0) {
            return Err(Error::invalid("KKT tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoStatus {
    Converged,
    IterationLimit,
}

/// Raw SMO solution over already-conditioned inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoSolution {
    pub alphas: Vec<f64>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub status: SmoStatus,
    pub iterations: usize,
}

impl SmoSolution {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sign(c: Class) -> f64 {
    match c {
        Class::Novice => -1.0,
        Class::Expert => 1.0,
    }
}

/// KKT residual of one multiplier given its margin `y f(x)`.
pub fn kkt_violation(alpha: f64, y_f: f64, c: f64) -> f64 {
    let eps = 1e-12 * c.max(1.0);
    if alpha <= eps {
        (1.0 - y_f).max(0.0)
    } else if alpha >= c - eps {
        (y_f - 1.0).max(0.0)
    } else {
        (y_f - 1.0).abs()
    }
}

/// `sum a_i - 1/2 sum_ij a_i a_j y_i y_j <x_i, x_j>`.
pub fn dual_objective(x: &[Vec<f64>], y: &[Class], alphas: &[f64]) -> f64 {
    let m = x.first().map_or(0, |r| r.len());
    let mut w = vec![0.0; m];
    for ((xi, yi), ai) in x.iter().zip(y).zip(alphas) {
        for (wk, xk) in w.iter_mut().zip(xi) {
            *wk += ai * sign(*yi) * xk;
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * dot(&w, &w)
}

struct Smo<'a> {
    x: &'a [Vec<f64>],
    y: Vec<f64>,
    c: f64,
    tol: f64,
    eps: f64,
    alpha: Vec<f64>,
    w: Vec<f64>,
    b: f64,
    kdiag: Vec<f64>,
    updates: usize,
    #[cfg(debug_assertions)]
    objective: f64,
}

impl Smo<'_> {
    fn f(&self, i: usize) -> f64 {
        dot(&self.w, &self.x[i]) + self.b
    }

    fn error(&self, i: usize) -> f64 {
        self.f(i) - self.y[i]
    }

    fn is_bound(&self, i: usize) -> bool {
        self.alpha[i] <= 0.0 || self.alpha[i] >= self.c
    }

    fn take_step(&mut self, i1: usize, i2: usize, e2: f64) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1, a2) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let e1 = self.error(i1);
        let s = y1 * y2;
        let (lo, hi) = if s < 0.0 {
            ((a2 - a1).max(0.0), (self.c + a2 - a1).min(self.c))
        } else {
            ((a1 + a2 - self.c).max(0.0), (a1 + a2).min(self.c))
        };
        if lo >= hi {
            return false;
        }
        let k11 = self.kdiag[i1];
        let k22 = self.kdiag[i2];
        let k12 = dot(&self.x[i1], &self.x[i2]);
        let eta = k11 + k22 - 2.0 * k12;
        let mut new_a2 = if eta > 0.0 {
            (a2 + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // degenerate pair: the dual is linear along the line with slope y2 (E1 - E2)
            let slope = y2 * (e1 - e2);
            if slope > self.eps {
                hi
            } else if slope < -self.eps {
                lo
            } else {
                a2
            }
        };
        if new_a2 < 1e-12 * self.c {
            new_a2 = 0.0;
        } else if new_a2 > self.c * (1.0 - 1e-12) {
            new_a2 = self.c;
        }
        if (new_a2 - a2).abs() < self.eps * (new_a2 + a2 + self.eps) {
            return false;
        }
        let mut new_a1 = a1 + s * (a2 - new_a2);
        if new_a1 < 1e-12 * self.c {
            new_a1 = 0.0;
        } else if new_a1 > self.c * (1.0 - 1e-12) {
            new_a1 = self.c;
        }

        let d1 = y1 * (new_a1 - a1);
        let d2 = y2 * (new_a2 - a2);
        let b1 = self.b - e1 - d1 * k11 - d2 * k12;
        let b2 = self.b - e2 - d1 * k12 - d2 * k22;
        let free1 = new_a1 > 0.0 && new_a1 < self.c;
        let free2 = new_a2 > 0.0 && new_a2 < self.c;
        self.b = if free1 {
            b1
        } else if free2 {
            b2
        } else {
            (b1 + b2) / 2.0
        };
        for (k, wk) in self.w.iter_mut().enumerate() {
            *wk += d1 * self.x[i1][k] + d2 * self.x[i2][k];
        }
        self.alpha[i1] = new_a1;
        self.alpha[i2] = new_a2;
        self.updates += 1;

        #[cfg(debug_assertions)]
        {
            let obj = self.alpha.iter().sum::<f64>() - 0.5 * dot(&self.w, &self.w);
            let scale = 1.0 + obj.abs();
            debug_assert!(
                obj >= self.objective - 1e-9 * scale,
                "dual objective decreased from {} to {}",
                self.objective,
                obj
            );
            self.objective = obj;
        }
        true
    }

    fn examine(&mut self, i2: usize) -> bool {
        let y2 = self.y[i2];
        let a2 = self.alpha[i2];
        let e2 = self.error(i2);
        let r2 = e2 * y2;
        let violates = (r2 < -self.tol && a2 < self.c) || (r2 > self.tol && a2 > 0.0);
        if !violates {
            return false;
        }
        let n = self.x.len();
        let non_bound: Vec<usize> = (0..n).filter(|&i| !self.is_bound(i)).collect();
        if non_bound.len() > 1 {
            let mut best = None;
            let mut best_gap = -1.0;
            for &i in &non_bound {
                let gap = (self.error(i) - e2).abs();
                if gap > best_gap {
                    best_gap = gap;
                    best = Some(i);
                }
            }
            if let Some(i1) = best {
                if self.take_step(i1, i2, e2) {
                    return true;
                }
            }
        }
        let start = (i2 + 1) % n;
        for k in 0..n {
            let i1 = (start + k) % n;
            if !self.is_bound(i1) && self.take_step(i1, i2, e2) {
                return true;
            }
        }
        for k in 0..n {
            let i1 = (start + k) % n;
            if self.take_step(i1, i2, e2) {
                return true;
            }
        }
        false
    }
}

/// Solves the linear soft-margin dual on `x` as given (no scaling).
pub fn smo_train(x: &[Vec<f64>], y: &[Class], cfg: &SmoConfig) -> Result<SmoSolution> {
    cfg.validate()?;
    if x.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    if x.len() != y.len() {
        return Err(Error::invalid("inputs and labels differ in length"));
    }
    let m = x[0].len();
    if x.iter().any(|r| r.len() != m) {
        return Err(Error::invalid("ragged input rows"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("inputs must be finite"));
    }
    if !(y.contains(&Class::Novice) && y.contains(&Class::Expert)) {
        return Err(Error::invalid("training set contains a single class"));
    }
    let mut smo = Smo {
        x,
        y: y.iter().map(|c| sign(*c)).collect(),
        c: cfg.c,
        tol: cfg.kkt_tolerance,
        eps: cfg.alpha_epsilon,
        alpha: vec![0.0; x.len()],
        w: vec![0.0; m],
        b: 0.0,
        kdiag: x.iter().map(|r| dot(r, r)).collect(),
        updates: 0,
        #[cfg(debug_assertions)]
        objective: 0.0,
    };
    let n = x.len();
    let mut examine_all = true;
    let mut status = SmoStatus::Converged;
    loop {
        let mut changed = 0;
        for i in 0..n {
            if smo.updates >= cfg.max_iterations {
                status = SmoStatus::IterationLimit;
                break;
            }
            if (examine_all || !smo.is_bound(i)) && smo.examine(i) {
                changed += 1;
            }
        }
        if status == SmoStatus::IterationLimit {
            break;
        }
        if examine_all {
            if changed == 0 {
                break;
            }
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
    }
    // with no free multiplier the threshold is only bracketed; center it
    if smo.alpha.iter().all(|&a| a <= 0.0 || a >= cfg.c) {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..n {
            let g = smo.y[i] - dot(&smo.w, &x[i]);
            let yi = smo.y[i];
            let at_zero = smo.alpha[i] <= 0.0;
            // at 0: y f >= 1; at C: y f <= 1
            if (yi > 0.0) == at_zero {
                lo = lo.max(g);
            } else {
                hi = hi.min(g);
            }
        }
        if lo.is_finite() && hi.is_finite() && lo <= hi {
            smo.b = (lo + hi) / 2.0;
        } else if lo.is_finite() && !hi.is_finite() {
            smo.b = smo.b.max(lo);
        } else if hi.is_finite() && !lo.is_finite() {
            smo.b = smo.b.min(hi);
        }
    }
    Ok(SmoSolution {
        alphas: smo.alpha,
        weights: smo.w,
        bias: smo.b,
        status,
        iterations: smo.updates,
    })
}

/// A trained SVM with its input conditioner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub feature_names: Vec<String>,
    pub conditioner: Conditioner,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Dual coefficients, one per training row.
    pub alphas: Vec<f64>,
    pub config: SmoConfig,
    pub status: SmoStatus,
    pub iterations: usize,
    pub support_vectors: usize,
}

impl SvmModel {
    pub fn decision_value(&self, row: &[Option<f64>]) -> Result<f64> {
        let x = self.conditioner.transform_row(row)?;
        Ok(dot(&self.weights, &x) + self.bias)
    }

    /// Largest KKT residual over the rows of `train`, which must be the
    /// training set in its original order.
    pub fn kkt_violation(&self, train: &Dataset) -> Result<f64> {
        if train.len() != self.alphas.len() {
            return Err(Error::invalid("dataset is not this model's training set"));
        }
        let mut worst: f64 = 0.0;
        for ((row, label), alpha) in train.rows.iter().zip(&train.labels).zip(&self.alphas) {
            let yf = sign(*label) * self.decision_value(row)?;
            worst = worst.max(kkt_violation(*alpha, yf, self.config.c));
        }
        Ok(worst)
    }

    /// Expert when the decision value is positive.
    pub fn predict(&self, row: &[Option<f64>]) -> Result<Class> {
        Ok(if self.decision_value(row)? > 0.0 {
            Class::Expert
        } else {
            Class::Novice
        })
    }
}

/// Fits the conditioner on `d`, then trains SMO on the conditioned rows.
pub fn train_svm(d: &Dataset, cfg: &SmoConfig) -> Result<SvmModel> {
    if d.is_empty() {
        return Err(Error::invalid("cannot train on an empty dataset"));
    }
    let conditioner = Conditioner::fit(d)?;
    let x = conditioner.apply(d)?;
    let sol = smo_train(&x, &d.labels, cfg)?;
    if sol.status == SmoStatus::IterationLimit {
        log::warn!("SMO stopped at the iteration limit ({})", sol.iterations);
    }
    Ok(SvmModel {
        feature_names: d.feature_names.clone(),
        conditioner,
        support_vectors: sol.alphas.iter().filter(|&&a| a > 0.0).count(),
        weights: sol.weights,
        bias: sol.bias,
        alphas: sol.alphas,
        config: cfg.clone(),
        status: sol.status,
        iterations: sol.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_fixture() {
        let x = vec![vec![1.0], vec![-1.0]];
        let y = vec![Class::Expert, Class::Novice];
        let s = smo_train(&x, &y, &SmoConfig::default()).unwrap();
        assert!((s.alphas[0] - 0.5).abs() < 1e-6);
        assert!((s.alphas[1] - 0.5).abs() < 1e-6);
        assert!((s.weights[0] - 1.0).abs() < 1e-6);
        assert!(s.bias.abs() < 1e-6);
        assert_eq!(s.status, SmoStatus::Converged);
    }

    #[test]
    fn kkt_residual_cases() {
        assert_eq!(kkt_violation(0.0, 2.0, 1.0), 0.0);
        assert_eq!(kkt_violation(0.0, 0.5, 1.0), 0.5);
        assert!((kkt_violation(0.5, 1.2, 1.0) - 0.2).abs() < 1e-12);
        assert_eq!(kkt_violation(1.0, 0.3, 1.0), 0.0);
        assert!((kkt_violation(1.0, 1.5, 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn solution_satisfies_kkt_on_overlapping_data() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()])
            .collect();
        let y: Vec<Class> = (0..30)
            .map(|i| {
                if (i * 7) % 3 == 0 {
                    Class::Expert
                } else {
                    Class::Novice
                }
            })
            .collect();
        let s = smo_train(&x, &y, &SmoConfig::default()).unwrap();
        assert_eq!(s.status, SmoStatus::Converged);
        for i in 0..30 {
            let yf = sign(y[i]) * s.decision(&x[i]);
            assert!(
                kkt_violation(s.alphas[i], yf, 1.0) <= 1e-3 + 1e-9,
                "row {i}"
            );
        }
        let eq: f64 = s.alphas.iter().zip(&y).map(|(a, c)| a * sign(*c)).sum();
        assert!(eq.abs() < 1e-9);
    }

    #[test]
    fn four_points_split_at_two() {
        let rows: Vec<Vec<Option<f64>>> = [0.0, 1.0, 3.0, 4.0]
            .iter()
            .map(|&v| vec![Some(v)])
            .collect();
        let labels = vec![Class::Novice, Class::Novice, Class::Expert, Class::Expert];
        let d = Dataset::new(
            vec!["x".into()],
            rows,
            labels,
            (0..4).map(|i| i.to_string()).collect(),
        )
        .unwrap();
        let m = train_svm(&d, &SmoConfig::default()).unwrap();
        let boundary = 4.0 * (-m.bias / m.weights[0]);
        assert!((boundary - 2.0).abs() < 0.05, "{boundary}");
        assert!(m.kkt_violation(&d).unwrap() <= 1e-3);
        assert_eq!(m.predict(&[Some(boundary)]).unwrap(), Class::Novice);
        let untrained = SvmModel {
            weights: vec![0.0],
            bias: 0.0,
            alphas: vec![0.0; 4],
            ..m
        };
        assert!(untrained.kkt_violation(&d).unwrap() > 0.0);
    }

    #[test]
    fn single_class_is_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(smo_train(&x, &[Class::Expert, Class::Expert], &SmoConfig::default()).is_err());
    }

    #[test]
    fn iteration_limit_is_reported() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()])
            .collect();
        let y: Vec<Class> = (0..30)
            .map(|i| {
                if i % 2 == 0 {
                    Class::Expert
                } else {
                    Class::Novice
                }
            })
            .collect();
        let cfg = SmoConfig {
            max_iterations: 1,
            ..Default::default()
        };
        assert_eq!(
            smo_train(&x, &y, &cfg).unwrap().status,
            SmoStatus::IterationLimit
        );
    }

    #[test]
    fn trained_model_separates_scaled_inputs() {
        let rows: Vec<Vec<Option<f64>>> = (0..20)
            .map(|i| vec![Some(100.0 * i as f64), None.or(Some(3.0))])
            .collect();
        let labels: Vec<Class> = (0..20)
            .map(|i| {
                if i >= 10 {
                    Class::Expert
                } else {
                    Class::Novice
                }
            })
            .collect();
        let d = Dataset::new(
            vec!["a".into(), "b".into()],
            rows,
            labels,
            (0..20).map(|i| i.to_string()).collect(),
        )
        .unwrap();
        let m = train_svm(&d, &SmoConfig::default()).unwrap();
        assert_eq!(m.predict(&[Some(0.0), Some(3.0)]).unwrap(), Class::Novice);
        assert_eq!(m.predict(&[Some(1900.0), None]).unwrap(), Class::Expert);
    }
}
