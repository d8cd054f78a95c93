use nalgebra::{DMatrix, DVector};

/// Solves `x = b + γ·C·x` for a substochastic `C` given entrywise.
pub(crate) fn solve_discounted(
    n: usize,
    gamma: f64,
    coeff: impl Fn(usize, usize) -> f64,
    rhs: &[f64],
) -> Vec<f64> {
    let a = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - gamma * coeff(i, j)
    });
    let b = DVector::from_column_slice(rhs);
    let x = a
        .lu()
        .solve(&b)
        .expect("I - γC is nonsingular for γ < 1 and substochastic C");
    x.iter().copied().collect()
}
