//! Value parsers for command-line flags.

/// Replication factor `k`.
pub fn parse_k(s: &str) -> Result<u32, String> {
    let k: u32 = s.trim().parse().map_err(|_| format!("not an integer: {s}"))?;
    if k < 1 {
        return Err("k must be ≥ 1".into());
    }
    Ok(k)
}

/// Comma-separated list of `k` values.
pub fn parse_k_list(s: &str) -> Result<Vec<u32>, String> {
    let ks = s.split(',').map(parse_k).collect::<Result<Vec<_>, _>>()?;
    if ks.is_empty() {
        return Err("empty k list".into());
    }
    Ok(ks)
}

pub fn parse_mu(s: &str) -> Result<f64, String> {
    let mu: f64 = s.trim().parse().map_err(|_| format!("not a number: {s}"))?;
    if !(0.0..=1.0).contains(&mu) {
        return Err("mu must be in [0, 1]".into());
    }
    Ok(mu)
}

/// `a:b:step`, both ends inclusive. Values are rounded to 12 decimals so
/// that `0:1:0.05` yields `0.15` rather than `0.15000000000000002`.
pub fn parse_mu_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, step] = parts[..] else {
        return Err(format!("expected a:b:step, got {s}"));
    };
    let a = parse_mu(a)?;
    let b = parse_mu(b)?;
    let step: f64 = step.trim().parse().map_err(|_| format!("not a number: {step}"))?;
    if !(step > 0.0) || b < a {
        return Err("grid needs a ≤ b and step > 0".into());
    }
    let n = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

/// Expiration window in units of `h`, or `none`.
pub fn parse_delta(s: &str) -> Result<Option<f64>, String> {
    if s.trim().eq_ignore_ascii_case("none") {
        return Ok(None);
    }
    let d: f64 = s.trim().parse().map_err(|_| format!("expected a number or 'none', got {s}"))?;
    if !(d > 0.0 && d.is_finite()) {
        return Err("delta must be positive".into());
    }
    Ok(Some(d))
}

pub fn parse_positive(s: &str) -> Result<f64, String> {
    let x: f64 = s.trim().parse().map_err(|_| format!("not a number: {s}"))?;
    if !(x > 0.0 && x.is_finite()) {
        return Err("must be positive".into());
    }
    Ok(x)
}

pub fn parse_warmup(s: &str) -> Result<f64, String> {
    let w: f64 = s.trim().parse().map_err(|_| format!("not a number: {s}"))?;
    if !(0.0..1.0).contains(&w) {
        return Err("warmup must be in [0, 1)".into());
    }
    Ok(w)
}

/// A fraction, or a percentage when suffixed with `%`.
pub fn parse_fraction(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let (num, scale) = match s.strip_suffix('%') {
        Some(p) => (p, 0.01),
        None => (s, 1.0),
    };
    let x: f64 = num.trim().parse().map_err(|_| format!("not a number: {s}"))?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err("must be non-negative".into());
    }
    Ok(x * scale)
}

pub fn parse_factor(s: &str) -> Result<f64, String> {
    let f = parse_positive(s)?;
    if f < 1.0 {
        return Err("factor must be ≥ 1".into());
    }
    Ok(f)
}
