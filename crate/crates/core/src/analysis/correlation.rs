use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport<T> {
    pub r: T,
    /// `100 r²`.
    pub r_squared: T,
    pub n: usize,
}

/// Sample Pearson correlation, computed with centred sums.
pub fn pearson<T: Scalar>(xs: &[T], ys: &[T]) -> Result<CorrelationReport<T>> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension(format!("{} x values but {} y values", xs.len(), ys.len())));
    }
    if xs.len() < 2 {
        return Err(Error::Argument("correlation needs at least two pairs".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Argument("correlation inputs must be finite".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let my = ys.iter().map(|v| v.as_f64()).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x.as_f64() - mx, y.as_f64() - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        let which = if sxx == 0.0 { "x" } else { "y" };
        return Err(Error::UndefinedCorrelation(format!("{which} values are constant")));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(CorrelationReport { r: T::lit(r), r_squared: T::lit(100.0 * r * r), n: xs.len() })
}
