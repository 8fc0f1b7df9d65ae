//! Box-constrained Nelder–Mead maximization.
//!
//! The search runs in coordinates normalized to the unit cube; every trial
//! point is projected back onto the box, so iterates never leave the bounds.

#[derive(Debug, Clone, Copy)]
pub struct NelderMeadOptions {
    /// Stop when the spread of objective values over the simplex falls below this.
    pub f_tol: f64,
    /// Also require every vertex within this distance of the best (normalized units).
    pub x_tol: f64,
    pub max_evals: usize,
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            f_tol: 1e-10,
            x_tol: 1e-7,
            max_evals: 4000,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimumFound {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Maximizes `f` over the box `bounds` starting from `x0`. Non-finite objective
/// values are treated as `-inf`. After convergence the simplex is rebuilt
/// around the best point and the search resumed, since projection onto the box
/// can collapse a simplex against a face.
pub fn maximize_in_box(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    bounds: &[[f64; 2]],
    opts: &NelderMeadOptions,
) -> OptimumFound {
    let mut best = run(&mut f, x0, bounds, opts);
    for _ in 0..4 {
        if best.evals >= opts.max_evals {
            break;
        }
        let budget = NelderMeadOptions {
            max_evals: opts.max_evals - best.evals,
            ..*opts
        };
        let next = run(&mut f, &best.x, bounds, &budget);
        let gained = next.value - best.value;
        let evals = best.evals + next.evals;
        if gained > opts.f_tol {
            best = OptimumFound { evals, ..next };
        } else {
            best.evals = evals;
            best.converged = best.converged && next.converged;
            break;
        }
    }
    best
}

fn run(
    f: &mut impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    bounds: &[[f64; 2]],
    opts: &NelderMeadOptions,
) -> OptimumFound {
    let d = bounds.len();
    assert_eq!(x0.len(), d, "start point dimension");
    let to_box = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .zip(bounds)
            .map(|(v, [lo, hi])| lo + v.clamp(0.0, 1.0) * (hi - lo))
            .collect()
    };
    let mut evals = 0usize;
    let mut eval = |u: &[f64], evals: &mut usize| -> f64 {
        *evals += 1;
        let v = f(&to_box(u));
        if v.is_finite() {
            v
        } else {
            f64::NEG_INFINITY
        }
    };
    let u0: Vec<f64> = x0
        .iter()
        .zip(bounds)
        .map(|(v, [lo, hi])| ((v - lo) / (hi - lo)).clamp(0.0, 1.0))
        .collect();

    let mut simplex: Vec<Vec<f64>> = vec![u0.clone()];
    for k in 0..d {
        let mut p = u0.clone();
        p[k] = if p[k] + opts.initial_step <= 1.0 {
            p[k] + opts.initial_step
        } else {
            p[k] - opts.initial_step
        };
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut evals)).collect();
    let project = |p: Vec<f64>| -> Vec<f64> { p.into_iter().map(|v| v.clamp(0.0, 1.0)).collect() };

    let mut converged = false;
    while evals < opts.max_evals {
        // best first; ties keep the earlier vertex to stay deterministic
        let mut order: Vec<usize> = (0..=d).collect();
        order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[0] - values[d];
        let diameter = simplex[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0f64, f64::max);
        if values[0].is_finite() && spread <= opts.f_tol && diameter <= opts.x_tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..d)
            .map(|k| simplex[..d].iter().map(|p| p[k]).sum::<f64>() / d as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            project(
                centroid
                    .iter()
                    .zip(&simplex[d])
                    .map(|(c, w)| c + t * (c - w))
                    .collect(),
            )
        };
        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr > values[0] {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            if fe > fr {
                simplex[d] = xe;
                values[d] = fe;
            } else {
                simplex[d] = xr;
                values[d] = fr;
            }
            continue;
        }
        if fr > values[d - 1] {
            simplex[d] = xr;
            values[d] = fr;
            continue;
        }
        let outside = fr > values[d];
        let xc = along(if outside { 0.5 } else { -0.5 });
        let fc = eval(&xc, &mut evals);
        if (outside && fc >= fr) || (!outside && fc > values[d]) {
            simplex[d] = xc;
            values[d] = fc;
            continue;
        }
        // shrink toward the best vertex
        for i in 1..=d {
            let p: Vec<f64> = simplex[0]
                .iter()
                .zip(&simplex[i])
                .map(|(b, v)| b + 0.5 * (v - b))
                .collect();
            values[i] = eval(&p, &mut evals);
            simplex[i] = p;
        }
    }
    let best = (0..=d)
        .max_by(|&i, &j| values[i].total_cmp(&values[j]).then(j.cmp(&i)))
        .expect("simplex is non-empty");
    OptimumFound {
        x: to_box(&simplex[best]),
        value: values[best],
        evals,
        converged,
    }
}
