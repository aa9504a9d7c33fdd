//! Distinguishability of two switching-current distributions: empirical
//! CDFs, the two-sample Kolmogorov distance, the ROC staircase and its area.
//!
//! Orientation: a drive signal pushes the junction over the barrier earlier,
//! so the signal class is expected at *lower* switching currents. A ROC
//! point at threshold `t` is `(F_ref(t), F_test(t))` with `F` the empirical
//! CDF, and the raw area is `P(test < ref) + ½·P(test = ref)`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Detection threshold on the folded area.
pub const DEFAULT_DETECTION_THRESHOLD: f64 = 0.7;

/// Right-continuous empirical distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(EmpiricalCdf { sorted })
    }

    /// Fraction of values `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }
}

pub fn empirical_cdf(values: &[f64]) -> Result<EmpiricalCdf> {
    EmpiricalCdf::new(values)
}

/// Walks two sorted samples in lockstep over the pooled distinct values and
/// reports the cumulative counts after each value.
fn for_each_breakpoint(a: &[f64], b: &[f64], mut visit: impl FnMut(usize, usize)) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        visit(i, j);
    }
}

fn sorted(values: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let (a, b) = (sorted(a)?, sorted(b)?);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut d: f64 = 0.0;
    for_each_breakpoint(&a, &b, |i, j| {
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    });
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC staircase from `(0, 0)` to `(1, 1)`, one point per distinct pooled value.
pub fn roc_curve(reference: &[f64], test: &[f64]) -> Result<Vec<RocPoint>> {
    let (r, t) = (sorted(reference)?, sorted(test)?);
    let (nr, nt) = (r.len() as f64, t.len() as f64);
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    for_each_breakpoint(&r, &t, |i, j| {
        points.push(RocPoint {
            fpr: i as f64 / nr,
            tpr: j as f64 / nt,
        });
    });
    // the last breakpoint already sits at (1, 1)
    Ok(points)
}

/// Trapezoidal area under a ROC staircase.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) * 0.5)
        .sum()
}

/// Twice the Mann–Whitney count: `2·#(test < ref) + #(test = ref)`.
fn doubled_mann_whitney(r: &[f64], t: &[f64]) -> u128 {
    let mut count: u128 = 0;
    let mut below = 0usize; // test values strictly below the current reference value
    let mut j = 0usize;
    let mut i = 0usize;
    while i < r.len() {
        let x = r[i];
        let mut run = 0usize;
        while i < r.len() && r[i] == x {
            run += 1;
            i += 1;
        }
        while j < t.len() && t[j] < x {
            j += 1;
            below += 1;
        }
        let mut ties = 0usize;
        let mut k = j;
        while k < t.len() && t[k] == x {
            ties += 1;
            k += 1;
        }
        count += run as u128 * (2 * below + ties) as u128;
    }
    count
}

/// `(auc_raw, r_auc)`: the Mann–Whitney area with ties weighted ½ and its
/// fold `max(A, 1 − A)`.
pub fn auc(reference: &[f64], test: &[f64]) -> Result<(f64, f64)> {
    let (r, t) = (sorted(reference)?, sorted(test)?);
    let total = 2 * r.len() as u128 * t.len() as u128;
    let forward = doubled_mann_whitney(&r, &t);
    let backward = total - forward;
    // Evaluate through the smaller count so that swapping the arguments
    // gives exactly 1 − A.
    let raw = if forward <= backward {
        forward as f64 / total as f64
    } else {
        1.0 - backward as f64 / total as f64
    };
    Ok((raw, raw.max(1.0 - raw)))
}

/// Reliable detection when `r_auc >= threshold`.
pub fn detect(r_auc: f64, threshold: f64) -> bool {
    r_auc >= threshold
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    pub points: Vec<RocPoint>,
    pub auc_raw: f64,
    pub r_auc: f64,
    pub d_kc: f64,
    pub threshold: f64,
    pub decision: bool,
}

/// Full comparison of a reference ensemble against a test ensemble.
pub fn compare(reference: &[f64], test: &[f64], threshold: f64) -> Result<RocResult> {
    ensure(
        (0.5..=1.0).contains(&threshold),
        "detection_threshold",
        threshold,
        "0.5 <= threshold <= 1",
    )?;
    let points = roc_curve(reference, test)?;
    let (auc_raw, r_auc) = auc(reference, test)?;
    let d_kc = ks_distance(reference, test)?;
    Ok(RocResult {
        points,
        auc_raw,
        r_auc,
        d_kc,
        threshold,
        decision: detect(r_auc, threshold),
    })
}
