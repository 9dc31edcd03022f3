use super::Grid;
use crate::{Error, Result, Scalar};

/// Binned reference histogram over `[min, max]` with cumulative counts.
struct Binned {
    min: f64,
    width: f64,
    counts: Vec<usize>,
    /// `cum[i]` = number of samples in bins `< i`; length `bins + 1`.
    cum: Vec<usize>,
}

impl Binned {
    fn new(values: &[f64], bins: usize) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = (max - min) / bins as f64;
        let mut counts = vec![0usize; bins];
        if width > 0.0 {
            for &v in values {
                counts[Self::bin_of(v, min, width, bins)] += 1;
            }
        } else {
            counts[0] = values.len();
        }
        let mut cum = Vec::with_capacity(bins + 1);
        cum.push(0);
        for c in &counts {
            cum.push(cum.last().unwrap() + c);
        }
        Binned { min, width, counts, cum }
    }

    fn bin_of(v: f64, min: f64, width: f64, bins: usize) -> usize {
        (((v - min) / width).floor() as usize).min(bins - 1)
    }

    fn total(&self) -> f64 {
        *self.cum.last().unwrap() as f64
    }

    /// Inverse CDF: value whose interpolated CDF equals `q`.
    fn quantile(&self, q: f64) -> f64 {
        if self.width == 0.0 {
            return self.min;
        }
        let target = q.clamp(0.0, 1.0) * self.total();
        // First bin whose upper cumulative count reaches the target.
        let b = self.cum[1..].partition_point(|&c| (c as f64) < target).min(self.counts.len() - 1);
        let lo = self.min + b as f64 * self.width;
        let frac = if self.counts[b] == 0 {
            0.0
        } else {
            ((target - self.cum[b] as f64) / self.counts[b] as f64).clamp(0.0, 1.0)
        };
        lo + frac * self.width
    }
}

/// Maps `source` values so their distribution follows `reference`.
///
/// Each source value takes its mid-rank quantile in the source, and is
/// replaced by the reference value at that quantile, read from a
/// `bins`-bin reference histogram with linear interpolation inside bins.
/// The mapping is monotone non-decreasing and order-preserving, so matching
/// an already matched grid reproduces it. A constant source sits at quantile
/// 0.5; a constant reference maps everything to that constant.
pub fn histogram_match<T: Scalar>(source: &Grid<T>, reference: &Grid<T>, bins: usize) -> Result<Grid<T>> {
    if source.is_empty() || reference.is_empty() {
        return Err(Error::Argument("histogram matching needs non-empty grids".into()));
    }
    if bins < 2 {
        return Err(Error::Argument(format!("histogram matching needs at least 2 bins, got {bins}")));
    }
    let src: Vec<f64> = source.data().iter().map(|v| v.as_f64()).collect();
    let rf: Vec<f64> = reference.data().iter().map(|v| v.as_f64()).collect();
    if src.iter().chain(&rf).any(|v| !v.is_finite()) {
        return Err(Error::Argument("histogram matching needs finite values".into()));
    }
    let mut sorted = src;
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let r = Binned::new(&rf, bins);
    Ok(source.map(|v| {
        let v = v.as_f64();
        let below = sorted.partition_point(|&x| x < v);
        let at = sorted.partition_point(|&x| x <= v);
        T::lit(r.quantile((below + at) as f64 / (2.0 * n)))
    }))
}
