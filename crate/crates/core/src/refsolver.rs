//! Reference solver for smooth objectives over the bounded simplex
//! `{x : Σ x = P, lo <= x <= hi}`.
//!
//! Projected gradient descent with Armijo backtracking. It is slow next to
//! the closed-form allocator but makes no structural assumptions, so it
//! serves as the baseline the allocator is checked and timed against.

use crate::{Error, Result};

pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], grad: &mut [f64]);
}

/// Stop once the projected-gradient step is shorter than this.
pub const GRADIENT_TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 100_000;
const BISECTION_TOLERANCE: f64 = 1e-13;
const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct ConstrainedProblem<O> {
    pub objective: O,
    pub budget: f64,
    pub lower: f64,
    pub upper: f64,
    pub start: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub rho: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Feasibility tolerance scaled to the budget.
pub fn feasibility_tolerance(budget: f64) -> f64 {
    1e-12 * budget.abs().max(1.0)
}

fn check_box(k: usize, budget: f64, lo: f64, hi: f64) -> Result<()> {
    let tol = feasibility_tolerance(budget);
    if k == 0 || !(lo <= hi) || k as f64 * lo > budget + tol || k as f64 * hi < budget - tol {
        return Err(Error::Infeasible(format!("no point of [{lo}, {hi}]^{k} sums to {budget}")));
    }
    Ok(())
}

/// Euclidean projection onto `{Σ x = budget, lo <= x <= hi}`.
///
/// The projection has the form `x = clip(v - θ, lo, hi)`; θ is found by
/// bisection on the (monotone) budget residual, and what rounding leaves
/// over is spread across coordinates strictly inside the box.
pub fn project_bounded_simplex(v: &[f64], budget: f64, lo: f64, hi: f64) -> Result<Vec<f64>> {
    check_box(v.len(), budget, lo, hi)?;
    let total = |theta: f64| v.iter().map(|x| (x - theta).clamp(lo, hi)).sum::<f64>();
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // at a the sum is K*hi >= budget, at b it is K*lo <= budget
    let (mut a, mut b) = (vmin - hi, vmax - lo);
    while b - a > BISECTION_TOLERANCE {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if total(mid) > budget {
            a = mid;
        } else {
            b = mid;
        }
    }
    let theta = 0.5 * (a + b);
    let mut x: Vec<f64> = v.iter().map(|y| (y - theta).clamp(lo, hi)).collect();
    spread_residual(&mut x, budget, lo, hi);
    Ok(x)
}

fn spread_residual(x: &mut [f64], budget: f64, lo: f64, hi: f64) {
    for _ in 0..4 {
        let residual = budget - x.iter().sum::<f64>();
        if residual == 0.0 {
            return;
        }
        let room: Vec<usize> = (0..x.len())
            .filter(|&i| if residual > 0.0 { x[i] < hi } else { x[i] > lo })
            .collect();
        if room.is_empty() {
            return;
        }
        let share = residual / room.len() as f64;
        for i in room {
            x[i] = (x[i] + share).clamp(lo, hi);
        }
    }
}

/// Minimizes the objective from the projected start point.
///
/// Each iteration steps along the negative gradient, projects, and halves
/// the step until the Armijo condition holds, so the objective never
/// increases. The first trial step of each iteration is the
/// Barzilai-Borwein length from the previous move. Hitting the iteration
/// cap is reported through `converged`, not as an error.
pub fn solve<O: Objective>(problem: &ConstrainedProblem<O>) -> Result<Solution> {
    let ConstrainedProblem {
        objective,
        budget,
        lower,
        upper,
        start,
    } = problem;
    let (budget, lo, hi) = (*budget, *lower, *upper);
    let n = start.len();
    let mut x = project_bounded_simplex(start, budget, lo, hi)?;
    let mut f = objective.value(&x);
    if !f.is_finite() {
        return Err(Error::Domain("objective not finite at the start point".into()));
    }
    let mut g = vec![0.0; n];
    objective.gradient(&x, &mut g);
    let mut step = 1.0 / g.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300) * budget.abs().max(1.0) / n as f64;
    let mut g_new = vec![0.0; n];

    for it in 0..MAX_ITERATIONS {
        let unit: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - b).collect();
        let pg = project_bounded_simplex(&unit, budget, lo, hi)?;
        let pg_norm = pg.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if pg_norm < GRADIENT_TOLERANCE {
            return Ok(Solution {
                rho: x,
                objective: f,
                iterations: it,
                converged: true,
            });
        }

        let mut t = step;
        let accepted = loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - t * b).collect();
            let cand = project_bounded_simplex(&trial, budget, lo, hi)?;
            let decrease: f64 = g.iter().zip(cand.iter().zip(&x)).map(|(gi, (c, xi))| gi * (c - xi)).sum();
            let fc = objective.value(&cand);
            if fc.is_finite() && fc <= f + ARMIJO * decrease {
                break Some((cand, fc));
            }
            t *= 0.5;
            if t < 1e-300 {
                break None;
            }
        };
        let Some((cand, fc)) = accepted else {
            // no descent possible at machine precision
            return Ok(Solution {
                rho: x,
                objective: f,
                iterations: it,
                converged: pg_norm < GRADIENT_TOLERANCE.sqrt(),
            });
        };

        objective.gradient(&cand, &mut g_new);
        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..n {
            let s = cand[i] - x[i];
            ss += s * s;
            sy += s * (g_new[i] - g[i]);
        }
        step = if sy > 0.0 { ss / sy } else { t * 2.0 };
        if fc == f && ss == 0.0 {
            return Ok(Solution {
                rho: cand,
                objective: fc,
                iterations: it + 1,
                converged: true,
            });
        }
        x = cand;
        f = fc;
        std::mem::swap(&mut g, &mut g_new);
    }
    Ok(Solution {
        rho: x,
        objective: f,
        iterations: MAX_ITERATIONS,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::EstimationMethod;
    use crate::ppa::{
        objective_value, ppa_allocate, unconstrained_optimum, AllocationObjective, InterferenceProfile, ObjectiveForm,
        PowerBounds,
    };
    use crate::scenario::parse_beta_csv;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    struct Quadratic(Vec<f64>);

    impl Objective for Quadratic {
        fn value(&self, x: &[f64]) -> f64 {
            x.iter().zip(&self.0).map(|(a, c)| (a - c).powi(2)).sum()
        }
        fn gradient(&self, x: &[f64], g: &mut [f64]) {
            for ((gi, a), c) in g.iter_mut().zip(x).zip(&self.0) {
                *gi = 2.0 * (a - c);
            }
        }
    }

    #[test]
    fn projection_fixed_point() {
        let v = [2.0, 3.0, 5.0];
        assert_eq!(project_bounded_simplex(&v, 10.0, 1.0, 6.0).unwrap(), v.to_vec());
    }

    #[test]
    fn projection_hand_example() {
        let x = project_bounded_simplex(&[10.0, 0.0], 10.0, 2.0, 8.0).unwrap();
        assert!((x[0] - 8.0).abs() < 1e-12 && (x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn projection_infeasible() {
        assert!(matches!(project_bounded_simplex(&[1.0, 1.0], 10.0, 0.0, 4.0), Err(Error::Infeasible(_))));
        assert!(project_bounded_simplex(&[1.0, 1.0], 1.0, 1.0, 4.0).is_err());
    }

    #[test]
    fn projection_matches_grid_search() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let (p, lo, hi) = (10.0, 1.0, 7.0);
        let n = 10_000;
        for _ in 0..200 {
            let v = [rng.random_range(-5.0..15.0), rng.random_range(-5.0..15.0)];
            let x = project_bounded_simplex(&v, p, lo, hi).unwrap();
            // x1 = P - x0 with x0, x1 in [lo, hi]: x0 in [P-hi, hi]
            let (a, b) = (f64::max(lo, p - hi), f64::min(hi, p - lo));
            let best = (0..=n)
                .map(|i| a + (b - a) * i as f64 / n as f64)
                .min_by(|s, t| {
                    let d = |u: f64| (u - v[0]).powi(2) + (p - u - v[1]).powi(2);
                    d(*s).total_cmp(&d(*t))
                })
                .unwrap();
            assert!((x[0] - best).abs() <= (b - a) / n as f64, "{v:?}: {} vs {best}", x[0]);
        }
    }

    #[test]
    fn quadratic_interior_optimum() {
        let c = vec![1.0, 2.0, 3.5, 3.5];
        let problem = ConstrainedProblem {
            objective: Quadratic(c.clone()),
            budget: 10.0,
            lower: 0.5,
            upper: 5.0,
            start: vec![2.5; 4],
        };
        let s = solve(&problem).unwrap();
        assert!(s.converged);
        for (a, b) in s.rho.iter().zip(&c) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn quadratic_recovers_projection() {
        let c = vec![9.0, -3.0, 4.0];
        let problem = ConstrainedProblem {
            objective: Quadratic(c.clone()),
            budget: 6.0,
            lower: 0.0,
            upper: 5.0,
            start: vec![2.0; 3],
        };
        let s = solve(&problem).unwrap();
        let p = project_bounded_simplex(&c, 6.0, 0.0, 5.0).unwrap();
        for (a, b) in s.rho.iter().zip(&p) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn symmetric_ls_is_equal_power() {
        let profile = InterferenceProfile::from_parts(vec![5.0; 4], vec![0.5; 4]).unwrap();
        let problem = ConstrainedProblem {
            objective: AllocationObjective {
                method: EstimationMethod::Ls,
                profile: &profile,
                antennas: 64,
                form: ObjectiveForm::Exact,
            },
            budget: 100.0,
            lower: 12.5,
            upper: 50.0,
            start: vec![10.0, 20.0, 30.0, 40.0],
        };
        let s = solve(&problem).unwrap();
        assert!(s.rho.iter().all(|r| (r - 25.0).abs() < 1e-7), "{:?}", s.rho);
    }

    #[test]
    fn table_fixture_agrees_with_grouping() {
        let t = parse_beta_csv(include_str!("../fixtures/table_ia.csv")).unwrap().target_slice();
        let profile = InterferenceProfile::equal_power(&t, 3000.0).unwrap();
        let bounds = PowerBounds::from_mu(3, 3000.0, 1.5).unwrap();
        for method in EstimationMethod::ALL {
            let a = ppa_allocate(method, &profile, 3000.0, bounds).unwrap();
            let problem = ConstrainedProblem {
                objective: AllocationObjective {
                    method,
                    profile: &profile,
                    antennas: 100,
                    form: ObjectiveForm::Surrogate,
                },
                budget: 3000.0,
                lower: bounds.min,
                upper: bounds.max,
                start: unconstrained_optimum(method, &profile.weights(), 3000.0),
            };
            let s = solve(&problem).unwrap();
            let ppa = objective_value(method, &a.rho, &profile, 100, ObjectiveForm::Surrogate);
            assert!(((s.objective - ppa) / ppa).abs() < 1e-4, "{method}: {} vs {ppa}", s.objective);
        }
    }

    #[derive(Clone)]
    struct Counting<'a>(AllocationObjective<'a>, std::cell::RefCell<Vec<f64>>);

    impl Objective for Counting<'_> {
        fn value(&self, x: &[f64]) -> f64 {
            self.0.value(x)
        }
        fn gradient(&self, x: &[f64], g: &mut [f64]) {
            self.1.borrow_mut().push(self.0.value(x));
            self.0.gradient(x, g)
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn feasible_monotone_and_no_worse(
            ups in proptest::collection::vec(1.0f64..1e3, 2..8),
            mmse in any::<bool>(),
            m in 2usize..300,
        ) {
            let k = ups.len();
            let gains: Vec<f64> = (0..k).map(|i| 0.05 + 0.3 * i as f64).collect();
            let profile = InterferenceProfile::from_parts(ups, gains).unwrap();
            let method = if mmse { EstimationMethod::Mmse } else { EstimationMethod::Ls };
            let p = 1000.0;
            let start = vec![p / k as f64; k];
            let obj = AllocationObjective { method, profile: &profile, antennas: m, form: ObjectiveForm::Exact };
            let f0 = obj.value(&start);
            let counting = Counting(obj, Default::default());
            let problem = ConstrainedProblem { objective: counting, budget: p, lower: p / (2.0 * k as f64), upper: 1.5 * p / k as f64, start };
            let s = solve(&problem).unwrap();
            let sum: f64 = s.rho.iter().sum();
            prop_assert!((sum - p).abs() <= feasibility_tolerance(p));
            for r in &s.rho {
                prop_assert!(*r >= problem.lower && *r <= problem.upper);
            }
            prop_assert!(s.objective <= f0);
            let trace = problem.objective.1.borrow();
            for w in trace.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }
    }
}
