/// Fixed-precision decimal with 9 significant digits. Non-finite values
/// print as `nan`, `inf` or `-inf`.
pub fn sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.00000000".into();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (8 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}
