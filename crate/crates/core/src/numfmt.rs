//! Float formatting shared by the text writers.

/// Shortest decimal string that parses back to the same `f64`.
///
/// Integral values print without a fractional part (`2`, `-0`), very large
/// or small magnitudes switch to exponent form (`1e-12`).
pub fn real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = x.abs();
    let s = if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    };
    s
}
