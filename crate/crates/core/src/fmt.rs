//! Number formatting shared by the text file writers.

/// Formats `x` with nine significant digits in scientific notation, which
/// parses back with `str::parse::<f64>`. Non-finite values print as `NA`.
pub fn sig9(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.8e}")
    } else {
        "NA".to_string()
    }
}

/// Parses a value written by [`sig9`]; `NA` maps to `None`.
pub fn parse_opt(s: &str) -> Option<f64> {
    match s.trim() {
        "NA" => None,
        t => t.parse().ok(),
    }
}
