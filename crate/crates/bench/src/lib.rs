//! Shared fixtures for the benchmarks.

use bozk_core::{petviashvili_solve, Field, Grid2D, Params, SolitaryWave, SolveOptions};

pub fn kdv_params() -> Params {
    Params::new(1.0, -1.0, 1.0, 1.0).expect("valid parameters")
}

pub fn bench_grid() -> Grid2D {
    Grid2D::new(256, 64, 12.8, 9.6).expect("valid grid")
}

pub fn wave() -> SolitaryWave {
    petviashvili_solve(&kdv_params(), &bench_grid(), &SolveOptions::default()).expect("wave converges")
}

/// A smooth test field on `grid`.
pub fn bump(grid: Grid2D) -> Field {
    Field::from_fn(grid, |x, y| (-(x * x + 2.0 * y * y) / 8.0).exp() * (1.0 + 0.1 * x.sin()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_build() {
        assert!(wave().converged);
        assert!(bump(bench_grid()).max_abs() > 0.5);
    }
}
