use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PatternMeta {
    /// Pixel pitch in metres per pixel, if known.
    pub pixel_pitch: Option<f64>,
    pub label: String,
}

/// Grid of non-negative intensities with a validity mask, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternMatrix {
    height: usize,
    width: usize,
    values: Vec<f64>,
    mask: Vec<bool>,
    pub meta: PatternMeta,
}

impl PatternMatrix {
    /// Pattern with every pixel valid.
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        Self::with_mask(height, width, values, vec![true; height * width])
    }

    pub fn with_mask(height: usize, width: usize, values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(invalid("shape", "height and width must be at least 1"));
        }
        let n = height * width;
        if values.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: values.len(),
            });
        }
        if mask.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: mask.len(),
            });
        }
        let mut count = 0;
        for (i, (&v, &m)) in values.iter().zip(&mask).enumerate() {
            if m {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(invalid("values", format!("pixel {i} is {v}; need finite and >= 0")));
                }
                count += 1;
            }
        }
        if count < 2 {
            return Err(Error::Degenerate(format!("only {count} unmasked pixels")));
        }
        Ok(PatternMatrix {
            height,
            width,
            values,
            mask,
            meta: PatternMeta::default(),
        })
    }

    pub fn with_meta(mut self, meta: PatternMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Unmasked values in row-major order.
    pub fn unmasked(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().zip(&self.mask).filter(|(_, &m)| m).map(|(&v, _)| v)
    }

    pub fn unmasked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn mean(&self) -> f64 {
        self.unmasked().sum::<f64>() / self.unmasked_count() as f64
    }

    pub fn max(&self) -> f64 {
        self.unmasked().fold(0.0, f64::max)
    }

    /// Unmasked values divided by their mean.
    pub fn normalized(&self) -> Result<Vec<f64>> {
        let mean = self.mean();
        if !(mean > 0.0) {
            return Err(Error::Degenerate("pattern is zero everywhere".into()));
        }
        Ok(self.unmasked().map(|v| v / mean).collect())
    }

    /// Same pattern with every value multiplied by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let values = self.values.iter().map(|v| v * c).collect();
        Ok(Self::with_mask(self.height, self.width, values, self.mask.clone())?.with_meta(self.meta.clone()))
    }

    /// Replaces the mask; the pattern must stay valid.
    pub fn masked(&self, mask: Vec<bool>) -> Result<Self> {
        Ok(Self::with_mask(self.height, self.width, self.values.clone(), mask)?.with_meta(self.meta.clone()))
    }

    pub fn same_layout(&self, other: &PatternMatrix) -> bool {
        self.height == other.height && self.width == other.width && self.mask == other.mask
    }
}

/// Pixel-wise mean of equally shaped patterns, e.g. several pulses of the
/// same pump setting. Masks are intersected.
pub fn average_patterns(patterns: &[PatternMatrix]) -> Result<PatternMatrix> {
    let first = patterns
        .first()
        .ok_or_else(|| invalid("patterns", "need at least one pattern"))?;
    let (h, w) = (first.height, first.width);
    let mut sum = vec![0.0; h * w];
    let mut mask = first.mask.clone();
    for p in patterns {
        if p.height != h || p.width != w {
            return Err(Error::DimensionMismatch {
                expected: h * w,
                actual: p.height * p.width,
            });
        }
        for (i, (s, v)) in sum.iter_mut().zip(&p.values).enumerate() {
            *s += v;
            mask[i] &= p.mask[i];
        }
    }
    let k = patterns.len() as f64;
    let values = sum
        .into_iter()
        .zip(&mask)
        .map(|(s, &m)| if m { s / k } else { 0.0 })
        .collect();
    Ok(PatternMatrix::with_mask(h, w, values, mask)?.with_meta(first.meta.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(PatternMatrix::new(0, 3, vec![]).is_err());
        assert!(PatternMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(PatternMatrix::new(1, 2, vec![1.0, -1.0]).is_err());
        assert!(PatternMatrix::with_mask(1, 3, vec![1.0, f64::NAN, 2.0], vec![true, false, true]).is_ok());
        assert!(PatternMatrix::with_mask(1, 2, vec![1.0, 2.0], vec![true, false]).is_err());
    }

    #[test]
    fn averaging() {
        let a = PatternMatrix::new(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        let b = PatternMatrix::with_mask(1, 3, vec![3.0, 2.0, 1.0], vec![true, true, false]).unwrap();
        let m = average_patterns(&[a, b]).unwrap();
        assert_eq!(m.values(), &[2.0, 2.0, 0.0]);
        assert_eq!(m.mask(), &[true, true, false]);
    }
}
