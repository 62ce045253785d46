use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pattern::PatternMatrix;
use crate::error::{invalid, Error, Result};
use crate::special::{erf, erf_inv};

/// Default histogram resolution for intensity densities.
pub const DEFAULT_BINS: usize = 128;

/// Histogram estimate of the density of mean-normalised intensities on
/// `[0, rho_max]` with equal bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityHistogram {
    pub centers: Vec<f64>,
    pub width: f64,
    pub densities: Vec<f64>,
    pub counts: Vec<u64>,
    pub rho_max: f64,
}

impl DensityHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Integral of the density; 1 up to rounding.
    pub fn integral(&self) -> f64 {
        self.densities.iter().sum::<f64>() * self.width
    }
}

pub fn density_pdf(pattern: &PatternMatrix, bins: usize) -> Result<DensityHistogram> {
    if bins < 2 {
        return Err(invalid("bins", "need at least 2 bins"));
    }
    let rho = pattern.normalized()?;
    let rho_max = rho.iter().cloned().fold(0.0, f64::max);
    let width = rho_max / bins as f64;
    let mut counts = vec![0u64; bins];
    for &r in &rho {
        let k = ((r / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = rho.len() as f64;
    Ok(DensityHistogram {
        centers: (0..bins).map(|k| (k as f64 + 0.5) * width).collect(),
        width,
        densities: counts.iter().map(|&c| c as f64 / (n * width)).collect(),
        counts,
        rho_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyResult {
    /// Differential entropy of the density estimate (nats).
    pub raw: f64,
    /// Position of `raw` between the two bounds, in `[0, 1]`.
    pub normalized: f64,
    pub bin_count: usize,
    /// Entropy of a density concentrated in a single bin: `ln(bin width)`.
    pub min: f64,
    /// Entropy of the uniform density over `[0, rho_max]`: `ln(rho_max)`.
    pub max: f64,
}

/// Differential entropy of the intensity density, placed between its
/// single-bin minimum and uniform maximum.
///
/// Because `raw - min` is the Shannon entropy of the bin occupation, the
/// normalised value is that entropy divided by `ln(bins)`.
pub fn normalized_entropy(pattern: &PatternMatrix, bins: usize) -> Result<EntropyResult> {
    let hist = density_pdf(pattern, bins)?;
    let raw = -hist
        .densities
        .iter()
        .filter(|&&f| f > 0.0)
        .map(|&f| f * f.ln() * hist.width)
        .sum::<f64>();
    let min = hist.width.ln();
    let max = hist.rho_max.ln();
    if !(max > min) {
        return Err(Error::Degenerate("entropy bounds coincide".into()));
    }
    let raw = raw.clamp(min, max);
    Ok(EntropyResult {
        raw,
        normalized: ((raw - min) / (max - min)).clamp(0.0, 1.0),
        bin_count: bins,
        min,
        max,
    })
}

/// Pearson correlation over the unmasked pixels of two equally shaped patterns.
pub fn pearson_correlation(a: &PatternMatrix, b: &PatternMatrix) -> Result<f64> {
    if !a.same_layout(b) {
        return Err(Error::DimensionMismatch {
            expected: a.height() * a.width(),
            actual: b.height() * b.width(),
        });
    }
    let n = a.unmasked_count() as f64;
    let (ma, mb) = (a.mean(), b.mean());
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.unmasked().zip(b.unmasked()) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    // Spread at the level of rounding in the mean counts as constant.
    let flat = |s: f64, m: f64| s <= n * (4.0 * f64::EPSILON * m).powi(2);
    if flat(saa, ma) || flat(sbb, mb) {
        return Err(Error::Degenerate("correlation undefined for a constant pattern".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation of each pattern with the next one in the sequence.
pub fn neighbor_correlations(patterns: &[PatternMatrix]) -> Result<Vec<f64>> {
    if patterns.len() < 2 {
        return Err(invalid("patterns", "need at least two patterns"));
    }
    patterns
        .par_windows(2)
        .map(|w| pearson_correlation(&w[0], &w[1]))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PorterThomasFit {
    pub samples: usize,
    pub mean_intensity: f64,
    /// Kolmogorov–Smirnov distance between the normalised intensities and
    /// the Porter–Thomas law.
    pub ks_statistic: f64,
    /// 1% critical value of the KS distance for independent samples.
    pub ks_critical_1pct: f64,
    pub chi2: f64,
    pub chi2_dof: usize,
}

impl PorterThomasFit {
    pub fn chi2_per_dof(&self) -> f64 {
        self.chi2 / self.chi2_dof as f64
    }

    pub fn passes_ks_1pct(&self) -> bool {
        self.ks_statistic < self.ks_critical_1pct
    }
}

/// Number of equiprobable classes used for the chi-square statistic.
const PT_CLASSES: usize = 20;

/// Compares the mean-normalised intensities with the Porter–Thomas law.
pub fn porter_thomas_fit(pattern: &PatternMatrix) -> Result<PorterThomasFit> {
    let n = pattern.unmasked_count();
    if n < 100 {
        return Err(Error::TrajectoryTooShort { len: n, min: 100 });
    }
    let mean = pattern.mean();
    let mut x = pattern.normalized()?;
    x.sort_by(f64::total_cmp);
    let cdf = |v: f64| if v <= 0.0 { 0.0 } else { erf((0.5 * v).sqrt()) };

    let nf = n as f64;
    let mut ks: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        ks = ks.max((f - i as f64 / nf).abs()).max(((i + 1) as f64 / nf - f).abs());
    }

    // Class edges at Porter-Thomas quantiles k/PT_CLASSES.
    let edges: Vec<f64> = (1..PT_CLASSES)
        .map(|k| {
            let y = erf_inv(k as f64 / PT_CLASSES as f64);
            2.0 * y * y
        })
        .collect();
    let mut observed = [0u64; PT_CLASSES];
    for &v in &x {
        observed[edges.partition_point(|&e| e <= v)] += 1;
    }
    let expected = nf / PT_CLASSES as f64;
    let chi2 = observed.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();

    Ok(PorterThomasFit {
        samples: n,
        mean_intensity: mean,
        ks_statistic: ks,
        ks_critical_1pct: 1.628 / nf.sqrt(),
        chi2,
        // One constraint from the total count, one from normalising by the mean.
        chi2_dof: PT_CLASSES - 2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// Exponent `a` in `f(rho) ~ rho^-a`.
    pub exponent: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares line through `ln f` against `ln rho` over the occupied
/// bins of the density histogram.
pub fn power_law_fit(pattern: &PatternMatrix, bins: usize) -> Result<PowerLawFit> {
    let hist = density_pdf(pattern, bins)?;
    let pts: Vec<(f64, f64)> = hist
        .centers
        .iter()
        .zip(&hist.densities)
        .filter(|(_, &f)| f > 0.0)
        .map(|(&c, &f)| (c.ln(), f.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Degenerate("fewer than 3 occupied bins".into()));
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &pts {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    Ok(PowerLawFit {
        exponent: -slope,
        r_squared: if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 },
        points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ramp(n: usize) -> PatternMatrix {
        PatternMatrix::new(1, n, (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect()).unwrap()
    }

    #[test]
    fn constant_pattern_histogram() {
        let p = PatternMatrix::new(4, 4, vec![3.0; 16]).unwrap();
        let h = density_pdf(&p, 8).unwrap();
        assert_eq!(h.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_relative_eq!(h.densities[7], 1.0 / h.width, max_relative = 1e-14);
        assert_relative_eq!(h.integral(), 1.0, epsilon = 1e-12);
        let e = normalized_entropy(&p, 8).unwrap();
        assert_relative_eq!(e.normalized, 0.0, epsilon = 1e-12);
        assert!(density_pdf(&PatternMatrix::new(1, 2, vec![0.0, 0.0]).unwrap(), 4).is_err());
        assert!(density_pdf(&p, 1).is_err());
    }

    #[test]
    fn uniform_histogram_has_unit_entropy() {
        let e = normalized_entropy(&ramp(128 * 50), 128).unwrap();
        assert_relative_eq!(e.normalized, 1.0, epsilon = 1e-9);
        assert!(e.min <= e.raw && e.raw <= e.max);
    }

    #[test]
    fn pearson_basics() {
        let a = ramp(50).scaled(3.0).unwrap();
        let b = PatternMatrix::new(1, 50, a.values().iter().map(|v| 2.0 + 0.5 * v).collect()).unwrap();
        let c = PatternMatrix::new(1, 50, a.values().iter().map(|v| 10.0 - v).collect()).unwrap();
        assert_relative_eq!(pearson_correlation(&a, &a).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(pearson_correlation(&a, &b).unwrap(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(pearson_correlation(&a, &c).unwrap(), -1.0, epsilon = 1e-12);
        let k = PatternMatrix::new(1, 50, vec![2.0; 50]).unwrap();
        assert!(pearson_correlation(&a, &k).is_err());
        assert!(pearson_correlation(&a, &ramp(49)).is_err());
        let r = neighbor_correlations(&[a.clone(), b, c]).unwrap();
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn constant_pattern_fails_porter_thomas() {
        let p = PatternMatrix::new(20, 20, vec![1.0; 400]).unwrap();
        let fit = porter_thomas_fit(&p).unwrap();
        assert!(fit.ks_statistic > 0.6);
        assert!(!fit.passes_ks_1pct());
        assert!(porter_thomas_fit(&ramp(50)).is_err());
    }

    #[test]
    fn power_law_of_pure_power_density() {
        // Values with density ~ rho^-0.5 on (0, 1]: inverse-CDF samples u^2.
        let n = 100_000;
        let v: Vec<f64> = (0..n).map(|k| ((k as f64 + 0.5) / n as f64).powi(2)).collect();
        let fit = power_law_fit(&PatternMatrix::new(1, n, v).unwrap(), 64).unwrap();
        assert!((fit.exponent - 0.5).abs() < 0.05, "{fit:?}");
    }
}
