//! Scaling-exponent fits and advice-level ratios over sweep rows.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sweep::SweepRow;

pub const MIN_SIZES: usize = 4;
pub const MIN_SEEDS: usize = 10;
pub const BOOTSTRAP_SAMPLES: usize = 1000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need at least {MIN_SIZES} sizes with {MIN_SEEDS} successful seeds each, have {usable} ({detail})")]
    InsufficientData { usable: usize, detail: String },
    #[error("alpha {a} and alpha {b} were not run on the same seeds at n = {n}")]
    Unmatched { n: usize, a: u32, b: u32 },
    #[error("no rows for family {family} at n = {n}")]
    Missing { family: String, n: usize },
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `y` on `x`.
pub fn least_squares(x: &[f64], y: &[f64]) -> Line {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Line { slope, intercept, r2 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub family: String,
    pub alpha: u32,
    /// `(n, median total messages, successful seeds)`.
    pub points: Vec<(usize, f64, usize)>,
    /// Fit of `ln(median / log2 n)` against `ln n`.
    pub normalized: Line,
    /// Percentile bootstrap interval (95%) for the normalized slope.
    pub ci: (f64, f64),
    /// Fit of `ln(median)` against `ln n`.
    pub raw: Line,
}

impl fmt::Display for FitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "family={} alpha={} slope={:.4} ci=[{:.4},{:.4}] intercept={:.4} r2={:.5} raw_slope={:.4} raw_r2={:.5}",
            self.family,
            self.alpha,
            self.normalized.slope,
            self.ci.0,
            self.ci.1,
            self.normalized.intercept,
            self.normalized.r2,
            self.raw.slope,
            self.raw.r2
        )?;
        for (n, m, k) in &self.points {
            writeln!(f, "  n={n} median_total={m} seeds={k}")?;
        }
        Ok(())
    }
}

fn lines_from_samples(samples: &[(usize, Vec<f64>)]) -> (Line, Line) {
    let x: Vec<f64> = samples.iter().map(|(n, _)| (*n as f64).ln()).collect();
    let med: Vec<f64> = samples.iter().map(|(_, v)| median(v)).collect();
    let norm: Vec<f64> = samples.iter().zip(&med).map(|((n, _), m)| (m / (*n as f64).log2()).ln()).collect();
    let raw: Vec<f64> = med.iter().map(|m| m.ln()).collect();
    (least_squares(&x, &norm), least_squares(&x, &raw))
}

/// Fits total messages against `n` for one `(family, alpha)`, over
/// successful runs only.
pub fn fit_exponent(rows: &[SweepRow], family: &str, alpha: u32, bootstrap_seed: u64) -> Result<FitReport, FitError> {
    let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.family == family && r.alpha == alpha && r.succeeded()) {
        by_n.entry(r.n).or_default().push(r.total as f64);
    }
    let samples: Vec<(usize, Vec<f64>)> = by_n.into_iter().filter(|(_, v)| v.len() >= MIN_SEEDS).collect();
    if samples.len() < MIN_SIZES {
        let detail = samples.iter().map(|(n, v)| format!("n={n}:{}", v.len())).collect::<Vec<_>>().join(" ");
        return Err(FitError::InsufficientData { usable: samples.len(), detail });
    }
    let (normalized, raw) = lines_from_samples(&samples);

    let mut rng = ChaCha8Rng::seed_from_u64(bootstrap_seed);
    let mut slopes: Vec<f64> = (0..BOOTSTRAP_SAMPLES)
        .map(|_| {
            let resampled: Vec<(usize, Vec<f64>)> = samples
                .iter()
                .map(|(n, v)| (*n, (0..v.len()).map(|_| v[rng.gen_range(0..v.len())]).collect()))
                .collect();
            lines_from_samples(&resampled).0.slope
        })
        .collect();
    slopes.sort_by(f64::total_cmp);
    let at = |q: f64| slopes[((q * (slopes.len() - 1) as f64).round() as usize).min(slopes.len() - 1)];

    Ok(FitReport {
        family: family.to_string(),
        alpha,
        points: samples.iter().map(|(n, v)| (*n, median(v), v.len())).collect(),
        normalized,
        ci: (at(0.025), at(0.975)),
        raw,
    })
}

/// `sqrt(2^(to - from))`: the quantum-message factor advice is expected to
/// save when `beta` grows from `from` to `to`.
pub fn predicted_ratio(beta_from: u32, beta_to: u32) -> f64 {
    2f64.powf((beta_to as f64 - beta_from as f64) / 2.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub alpha_from: u32,
    pub alpha_to: u32,
    pub beta_from: u32,
    pub beta_to: u32,
    pub seeds: usize,
    /// Median quantum messages at `alpha_from` over median at `alpha_to`.
    pub measured: f64,
    pub predicted: f64,
    /// `measured / predicted` lies within `[1/band, band]`.
    pub within_band: bool,
}

impl fmt::Display for RatioRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "alpha {}->{} beta {}->{} seeds={} measured={:.4} predicted={:.4} {}",
            self.alpha_from,
            self.alpha_to,
            self.beta_from,
            self.beta_to,
            self.seeds,
            self.measured,
            self.predicted,
            if self.within_band { "ok" } else { "off" }
        )
    }
}

/// Quantum-message ratio between two budgets over their common successful
/// seeds. The seed sets must coincide.
pub fn advice_ratio(rows: &[SweepRow], family: &str, n: usize, a: u32, b: u32, band: f64) -> Result<RatioRow, FitError> {
    let pick = |alpha: u32| -> BTreeMap<u64, &SweepRow> {
        rows.iter().filter(|r| r.family == family && r.n == n && r.alpha == alpha).map(|r| (r.seed, r)).collect()
    };
    let (ra, rb) = (pick(a), pick(b));
    if ra.is_empty() || rb.is_empty() {
        return Err(FitError::Missing { family: family.to_string(), n });
    }
    if ra.keys().collect::<BTreeSet<_>>() != rb.keys().collect::<BTreeSet<_>>() {
        return Err(FitError::Unmatched { n, a, b });
    }
    let common: Vec<u64> = ra.keys().copied().filter(|s| ra[s].succeeded() && rb[s].succeeded()).collect();
    if common.is_empty() {
        return Err(FitError::Unmatched { n, a, b });
    }
    let qa: Vec<f64> = common.iter().map(|s| ra[s].quantum as f64).collect();
    let qb: Vec<f64> = common.iter().map(|s| rb[s].quantum as f64).collect();
    let (beta_from, beta_to) = (ra[&common[0]].beta, rb[&common[0]].beta);
    let measured = median(&qa) / median(&qb);
    let predicted = predicted_ratio(beta_from, beta_to);
    let rel = measured / predicted;
    Ok(RatioRow {
        alpha_from: a,
        alpha_to: b,
        beta_from,
        beta_to,
        seeds: common.len(),
        measured,
        predicted,
        within_band: rel.is_finite() && rel >= 1.0 / band && rel <= band,
    })
}

/// All pairs of budgets present for `(family, n)`, smaller budget first.
pub fn compare_advice_levels(rows: &[SweepRow], family: &str, n: usize, band: f64) -> Result<Vec<RatioRow>, FitError> {
    let alphas: BTreeSet<u32> = rows.iter().filter(|r| r.family == family && r.n == n).map(|r| r.alpha).collect();
    if alphas.is_empty() {
        return Err(FitError::Missing { family: family.to_string(), n });
    }
    let alphas: Vec<u32> = alphas.into_iter().collect();
    let mut out = Vec::new();
    for (i, &a) in alphas.iter().enumerate() {
        for &b in &alphas[i + 1..] {
            out.push(advice_ratio(rows, family, n, a, b, band)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(n: usize, alpha: u32, seed: u64, total: u64) -> SweepRow {
        SweepRow {
            family: "clique".into(),
            n,
            alpha,
            beta: qwake_core::advice::beta(alpha),
            seed,
            classical: 0,
            quantum: total,
            total,
            rounds: 0,
            epochs: 0,
            arad: 1,
            success: 1,
        }
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let rows: Vec<SweepRow> = [32usize, 64, 128, 256, 512]
            .iter()
            .flat_map(|&n| {
                let m = (n as f64).powf(1.5) * (n as f64).log2();
                (0..10).map(move |s| row(n, 0, s, m.round() as u64))
            })
            .collect();
        let fit = fit_exponent(&rows, "clique", 0, 1).unwrap();
        assert!((fit.normalized.slope - 1.5).abs() < 1e-3);
        assert!(fit.normalized.r2 > 0.9999);
        assert!(fit.ci.0 <= fit.normalized.slope && fit.normalized.slope <= fit.ci.1);
    }

    #[test]
    fn too_few_sizes() {
        let rows: Vec<SweepRow> = [8usize, 16, 32].iter().flat_map(|&n| (0..10).map(move |s| row(n, 0, s, 5))).collect();
        assert!(matches!(fit_exponent(&rows, "clique", 0, 0), Err(FitError::InsufficientData { usable: 3, .. })));
    }

    #[test]
    fn ratios() {
        assert_eq!(predicted_ratio(0, 2), 2.0);
        let mut rows: Vec<SweepRow> = (0..5).map(|s| row(64, 0, s, 100)).collect();
        rows.extend((0..5).map(|s| row(64, 5, s, 50)));
        let same = advice_ratio(&rows, "clique", 64, 0, 0, 2f64.sqrt()).unwrap();
        assert_eq!(same.measured, 1.0);
        let table = compare_advice_levels(&rows, "clique", 64, 2f64.sqrt()).unwrap();
        assert_eq!(table.len(), 1);
        assert_eq!(table[0].measured, 2.0);
        assert!(table[0].within_band);
        rows.pop();
        assert!(matches!(advice_ratio(&rows, "clique", 64, 0, 5, 2.0), Err(FitError::Unmatched { .. })));
    }
}
