use crate::error::{Error, Result};

fn decimals(s: &str) -> usize {
    s.split_once('.').map_or(0, |(_, frac)| frac.len())
}

/// Expands `a..b` (inclusive) or a comma list into values.
///
/// Without `step`, a range steps by one unit in the last written decimal place
/// of its endpoints, so `0.1..0.9` gives nine values and `2..6` five.
pub fn parse_values(spec: &str, step: Option<f64>) -> Result<Vec<f64>> {
    let spec = spec.trim();
    let number = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::invalid(format!("bad value {s:?} in {spec:?}")))
    };
    let Some((lo, hi)) = spec.split_once("..") else {
        let values = spec
            .split(',')
            .filter(|v| !v.trim().is_empty())
            .map(number)
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(Error::invalid("empty value list"));
        }
        return Ok(values);
    };
    let places = decimals(lo.trim()).max(decimals(hi.trim()));
    let (lo, hi) = (number(lo)?, number(hi)?);
    let step = step.unwrap_or(10f64.powi(-(places as i32)));
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!("step must be positive, got {step}")));
    }
    if hi < lo {
        return Err(Error::invalid(format!("empty range {spec:?}")));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    // values are rounded to the written precision so 0.1 + 2·0.1 prints as 0.3
    let scale = 10f64.powi(places.max(decimals(&step.to_string())) as i32);
    Ok((0..count).map(|i| ((lo + i as f64 * step) * scale).round() / scale).collect())
}
