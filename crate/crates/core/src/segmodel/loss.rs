use crate::Scalar;

/// Probability clamp for the cross-entropy.
pub const BCE_EPS: f64 = 1e-7;

#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// `−[w_pos·y·ln p + w_neg·(1−y)·ln(1−p)]` with `p` clamped to `[ε, 1−ε]`.
pub fn weighted_bce<T: Scalar>(p: T, y: bool, w_pos: T, w_neg: T) -> T {
    let eps = T::lit(BCE_EPS);
    let p = p.max(eps).min(T::one() - eps);
    if y {
        -w_pos * p.ln()
    } else {
        -w_neg * (T::one() - p).ln()
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
pub fn softplus<T: Scalar>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

/// Loss at logit `z` and its derivative with respect to `z`.
///
/// Computed from the logit, so no clamp is needed and a confidently wrong
/// pixel still receives the full gradient `w·(σ(z) − y)`. Agrees with
/// [`weighted_bce`] wherever `σ(z)` lies inside the clamp.
pub fn weighted_bce_logit<T: Scalar>(z: T, y: bool, w_pos: T, w_neg: T) -> (T, T) {
    let p = sigmoid(z);
    if y {
        (w_pos * softplus(-z), w_pos * (p - T::one()))
    } else {
        (w_neg * softplus(z), w_neg * p)
    }
}
