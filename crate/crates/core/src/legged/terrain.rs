use serde::{Deserialize, Serialize};

/// A smooth ditch `t(x) = −d · w⁶ / ((x − c)⁶ · s + w⁶)` with `w` half the
/// gap width. Far from the gap the ground is flat at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GapSpec {
    pub center: f64,
    pub width: f64,
    pub depth: f64,
    pub sharpness: f64,
    /// Footholds are kept at least this far outside the gap edges.
    pub foothold_margin: f64,
}

impl Default for GapSpec {
    fn default() -> Self {
        GapSpec {
            center: 1.0,
            width: 0.4,
            depth: 0.15,
            sharpness: 1.0,
            foothold_margin: 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Terrain {
    pub gap: Option<GapSpec>,
}

impl Terrain {
    pub fn flat() -> Self {
        Terrain { gap: None }
    }

    pub fn with_gap(gap: GapSpec) -> Self {
        Terrain { gap: Some(gap) }
    }

    pub fn height(&self, x: f64) -> f64 {
        match self.gap {
            None => 0.0,
            Some(g) => {
                let w6 = (0.5 * g.width).powi(6);
                -g.depth * w6 / ((x - g.center).powi(6) * g.sharpness + w6)
            }
        }
    }

    /// `x` moved to the nearer edge of the gap when it would land inside.
    pub fn safe_foothold(&self, x: f64) -> f64 {
        match self.gap {
            Some(g) => {
                let half = 0.5 * g.width + g.foothold_margin;
                let d = x - g.center;
                if d.abs() >= half {
                    x
                } else if d < 0.0 {
                    g.center - half
                } else {
                    g.center + half
                }
            }
            None => x,
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        match self.gap {
            None => 0.0,
            Some(g) => {
                let w6 = (0.5 * g.width).powi(6);
                let d = x - g.center;
                let den = d.powi(6) * g.sharpness + w6;
                g.depth * w6 * 6.0 * d.powi(5) * g.sharpness / (den * den)
            }
        }
    }
}
