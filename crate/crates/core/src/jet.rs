//! Pointwise second-order jets of smooth space-time functions.

use crate::symmat::SymMat;

/// `(u, Du, D²u, ∂_t u)` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: SymMat,
    pub time_derivative: f64,
}

/// A smooth function of `(x, t)` with closed-form derivatives.
pub trait SmoothField {
    fn dim(&self) -> usize;
    fn jet(&self, x: &[f64], t: f64) -> Jet;

    fn value(&self, x: &[f64], t: f64) -> f64 {
        self.jet(x, t).value
    }
}

impl<F: SmoothField + ?Sized> SmoothField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn jet(&self, x: &[f64], t: f64) -> Jet {
        (**self).jet(x, t)
    }
}
