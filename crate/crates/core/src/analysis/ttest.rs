//! One-sided paired t-test over per-model accuracies.
//!
//! The alternative is that zero-shot accuracy exceeds few-shot accuracy, so
//! the p-value is the upper tail P(T > t). The tail comes from the regularized
//! incomplete beta function, evaluated with a modified Lentz continued
//! fraction:
//!
//! P(T > t) = I_x(df/2, 1/2) / 2  with  x = df / (df + t^2),  for t >= 0.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub ruleset_name: String,
    pub mean_do0: f64,
    pub mean_dofs: f64,
    pub difference: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    pub degrees_of_freedom: f64,
    pub n_models: usize,
    /// Every paired difference was identical, so the standard error is zero.
    pub degenerate: bool,
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection keeps the series in its accurate range
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + 7.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 500;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    let guard = |v: f64| if v.abs() < TINY { TINY } else { v };

    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 / guard(1.0 - qab * x / qap);
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 / guard(1.0 + aa * d);
        c = guard(1.0 + aa / c);
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front =
        (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Upper tail P(T > t) of Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return if t > 0.0 { 0.0 } else { 1.0 };
    }
    let tail = 0.5 * incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
    if t >= 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Tests H1: mean(do0 - dofs) > 0, pairing the two maps by model id.
pub fn paired_ttest(
    do0: &BTreeMap<String, f64>,
    dofs: &BTreeMap<String, f64>,
    ruleset: &str,
) -> Result<TTestResult> {
    if !do0.keys().eq(dofs.keys()) {
        let only: Vec<&String> = do0
            .keys()
            .filter(|k| !dofs.contains_key(*k))
            .chain(dofs.keys().filter(|k| !do0.contains_key(*k)))
            .collect();
        return Err(Error::Statistics(format!(
            "{ruleset}: model sets differ ({only:?})"
        )));
    }
    let n = do0.len();
    if n < 2 {
        return Err(Error::Statistics(format!(
            "{ruleset}: need at least 2 models, got {n}"
        )));
    }
    let a: Vec<f64> = do0.values().copied().collect();
    let b: Vec<f64> = dofs.values().copied().collect();
    let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    let md = mean(&d);
    let var = d.iter().map(|x| (x - md).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let df = (n - 1) as f64;

    // Differences equal to within float noise count as zero variance.
    let degenerate = se <= 1e-12 * md.abs().max(1.0);
    let (t, p) = if degenerate {
        if md.abs() <= 1e-12 {
            (0.0, 0.5)
        } else if md > 0.0 {
            (f64::INFINITY, 0.0)
        } else {
            (f64::NEG_INFINITY, 1.0)
        }
    } else {
        let t = md / se;
        (t, student_t_sf(t, df))
    };

    Ok(TTestResult {
        ruleset_name: ruleset.to_string(),
        mean_do0: mean(&a),
        mean_dofs: mean(&b),
        difference: mean(&a) - mean(&b),
        t_statistic: t,
        p_value: p,
        degrees_of_freedom: df,
        n_models: n,
        degenerate,
    })
}

pub const AVERAGE_ROW: &str = "AVERAGE";

/// One test per ruleset, in the given order, followed by an AVERAGE row
/// holding the column means.
pub fn ttest_table(
    do0: &BTreeMap<String, BTreeMap<String, f64>>,
    dofs: &BTreeMap<String, BTreeMap<String, f64>>,
    rulesets: &[String],
) -> Result<Vec<TTestResult>> {
    let empty = BTreeMap::new();
    let mut rows = rulesets
        .iter()
        .map(|r| {
            paired_ttest(
                do0.get(r).unwrap_or(&empty),
                dofs.get(r).unwrap_or(&empty),
                r,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Ok(rows);
    }
    let col = |f: fn(&TTestResult) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
    let average = TTestResult {
        ruleset_name: AVERAGE_ROW.to_string(),
        mean_do0: col(|r| r.mean_do0),
        mean_dofs: col(|r| r.mean_dofs),
        difference: col(|r| r.difference),
        t_statistic: col(|r| r.t_statistic),
        p_value: col(|r| r.p_value),
        degrees_of_freedom: rows[0].degrees_of_freedom,
        n_models: rows[0].n_models,
        degenerate: rows.iter().all(|r| r.degenerate),
    };
    rows.push(average);
    Ok(rows)
}
