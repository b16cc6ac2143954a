//! Named data shapes for initial and lateral data.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A function of space, selected by its `shape` tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Constant {
        value: f64,
    },
    /// `height (1 - |x-c|²/r²)²` inside the ball, zero outside.
    Bump {
        center: Vec<f64>,
        radius: f64,
        height: f64,
    },
    /// `height (1 + cos(π|x-c|/r)) / 2` inside the ball, zero outside.
    CosineBump {
        center: Vec<f64>,
        radius: f64,
        height: f64,
    },
    /// `½ xᵀQx + a·x + c0`, `Q` given by rows.
    Quadratic {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        linear: Vec<f64>,
        #[serde(default)]
        constant: f64,
    },
    /// `height (1 - tanh((|x-c| - r)/width)) / 2`.
    SmoothedIndicator {
        center: Vec<f64>,
        radius: f64,
        width: f64,
        height: f64,
    },
    /// `exp(a·x)`.
    Exponential {
        slope: Vec<f64>,
    },
    /// `offset - inner` (e.g. a level minus a bump).
    Complement {
        offset: f64,
        inner: Box<Shape>,
    },
}

fn dist(x: &[f64], c: &[f64]) -> f64 {
    x.iter()
        .zip(c)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

impl Shape {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Shape::Constant { value } => *value,
            Shape::Bump {
                center,
                radius,
                height,
            } => {
                let q = dist(x, center) / radius;
                if q < 1.0 {
                    height * (1.0 - q * q).powi(2)
                } else {
                    0.0
                }
            }
            Shape::CosineBump {
                center,
                radius,
                height,
            } => {
                let q = dist(x, center) / radius;
                if q < 1.0 {
                    height * 0.5 * (1.0 + (PI * q).cos())
                } else {
                    0.0
                }
            }
            Shape::Quadratic {
                matrix,
                linear,
                constant,
            } => {
                let mut v = *constant;
                for (i, row) in matrix.iter().enumerate() {
                    for (j, q) in row.iter().enumerate() {
                        v += 0.5 * x[i] * q * x[j];
                    }
                }
                v + linear.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            }
            Shape::SmoothedIndicator {
                center,
                radius,
                width,
                height,
            } => height * 0.5 * (1.0 - ((dist(x, center) - radius) / width).tanh()),
            Shape::Exponential { slope } => slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().exp(),
            Shape::Complement { offset, inner } => offset - inner.eval(x),
        }
    }

    /// Checks dimensions and parameter signs.
    pub fn validate(&self, dim: usize) -> Result<(), String> {
        let need = |v: &[f64], what: &str| {
            if v.len() == dim {
                Ok(())
            } else {
                Err(format!("{what} has length {}, expected {dim}", v.len()))
            }
        };
        let positive = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(format!("{what} must be positive, got {v}"))
            }
        };
        match self {
            Shape::Constant { value } => {
                if value.is_finite() {
                    Ok(())
                } else {
                    Err("constant must be finite".into())
                }
            }
            Shape::Bump { center, radius, .. } | Shape::CosineBump { center, radius, .. } => {
                need(center, "center")?;
                positive(*radius, "radius")
            }
            Shape::Quadratic { matrix, linear, .. } => {
                if matrix.len() != dim || matrix.iter().any(|r| r.len() != dim) {
                    return Err(format!("quadratic matrix must be {dim}x{dim}"));
                }
                if !linear.is_empty() {
                    need(linear, "linear")?;
                }
                Ok(())
            }
            Shape::SmoothedIndicator {
                center,
                radius,
                width,
                ..
            } => {
                need(center, "center")?;
                positive(*radius, "radius")?;
                positive(*width, "width")
            }
            Shape::Exponential { slope } => need(slope, "slope"),
            Shape::Complement { inner, .. } => inner.validate(dim),
        }
    }
}
