use crate::error::{Error, Result};

/// Value, slope and curvature of the reduced barrier at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierValue {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

/// Relaxed log barrier: `-ln z` for `z >= δ`, and below `δ` the quadratic
/// that matches value, slope and curvature at `z = δ`:
///
/// `-ln δ + (z - δ)² / (2δ²) - (z - δ) / δ`
///
/// It is C² and finite for every real `z`.
pub fn reduced_barrier(z: f64, delta: f64) -> Result<BarrierValue> {
    if !(delta > 0.0) {
        return Err(Error::Parameter(format!(
            "barrier relaxation must be positive, got {delta}"
        )));
    }
    Ok(if z >= delta {
        BarrierValue {
            value: -z.ln(),
            first: -1.0 / z,
            second: 1.0 / (z * z),
        }
    } else {
        let e = z - delta;
        BarrierValue {
            value: -delta.ln() + e * e / (2.0 * delta * delta) - e / delta,
            first: e / (delta * delta) - 1.0 / delta,
            second: 1.0 / (delta * delta),
        }
    })
}
