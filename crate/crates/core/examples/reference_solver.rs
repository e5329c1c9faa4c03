//! The projected-gradient solver on its own: a box-constrained budget
//! problem with a hand-written objective.

use mimo_pilot::refsolver::{project_bounded_simplex, solve, ConstrainedProblem, Objective};

/// Σ a_k / x_k, the LS-style cost with weights a.
struct Reciprocal(Vec<f64>);

impl Objective for Reciprocal {
    fn value(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(a, x)| a / x).sum()
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        for ((g, a), x) in grad.iter_mut().zip(&self.0).zip(x) {
            *g = -a / (x * x);
        }
    }
}

fn main() -> mimo_pilot::Result<()> {
    println!("projection of (10, 0) onto sum 10, box [2, 8]: {:?}", project_bounded_simplex(&[10.0, 0.0], 10.0, 2.0, 8.0)?);

    let sol = solve(&ConstrainedProblem {
        objective: Reciprocal(vec![1.0, 4.0, 100.0]),
        budget: 30.0,
        lower: 4.0,
        upper: 15.0,
        start: vec![10.0; 3],
    })?;
    println!(
        "optimum {:?}\nobjective {:.6} after {} iterations (converged: {})",
        sol.rho, sol.objective, sol.iterations, sol.converged
    );
    Ok(())
}
