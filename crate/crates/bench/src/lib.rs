//! Shared fixtures for the benchmarks.

use smp_core::solver::Grid;
use smp_core::symmat::{Ellipticity, Extremal};
use smp_core::{GridFunction, OperatorSpec, SymMat};

/// Deterministic dense symmetric matrices of dimension `n`.
pub fn matrices(n: usize, count: usize) -> Vec<SymMat> {
    (0..count)
        .map(|k| SymMat::from_fn(n, |i, j| ((k * 31 + i * 7 + j * 13) as f64 * 0.37).sin() * 2.0))
        .collect()
}

pub fn band() -> Ellipticity {
    Ellipticity::new(1.0, 2.0).unwrap()
}

/// Pucci maximal operator on the unit box at spacing `h`, with a smooth initial field.
pub fn pucci_problem(n: usize, h: f64) -> (OperatorSpec, Grid, GridFunction) {
    let spec = OperatorSpec::pucci(Extremal::Plus, n, band());
    let grid = Grid::box_grid(&vec![-1.0; n], &vec![1.0; n], h).unwrap().with_cfl(&spec, 0.9);
    let u0 = grid.sample(|x| x.iter().map(|v| (2.0 * v).cos()).product());
    (spec, grid, u0)
}
