//! Derivative-free Nelder–Mead simplex minimisation.

/// Stopping rules for [`nelder_mead`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexSettings {
    /// Stop once `f(worst) - f(best)` across the simplex drops below this.
    pub f_tol: f64,
    /// Evaluation budget per free dimension.
    pub max_evals_per_dim: usize,
}

impl Default for SimplexSettings {
    fn default() -> Self {
        SimplexSettings {
            f_tol: 1e-10,
            max_evals_per_dim: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimises `f` from `start`, building the initial simplex with one
/// vertex offset by `steps[i]` along each axis.
///
/// The start point is a vertex of the initial simplex and vertices are only
/// ever replaced by better ones, so the returned value never exceeds
/// `f(start)`. Non-finite objective values are treated as `+inf`.
/// Uses the dimension-adaptive coefficients of Gao and Han for `n >= 2`.
pub fn nelder_mead<F>(mut f: F, start: &[f64], steps: &[f64], settings: SimplexSettings) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(start.len(), steps.len(), "one step per coordinate");
    let n = start.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    if n == 0 {
        let value = eval(start, &mut evaluations);
        return Minimum {
            x: Vec::new(),
            value,
            evaluations,
            converged: true,
        };
    }

    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = if n >= 2 {
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };
    let budget = settings.max_evals_per_dim.saturating_mul(n).max(n + 1);

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += if steps[i] != 0.0 { steps[i] } else { 1e-4 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evaluations)).collect();

    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];
    let mut converged = false;

    loop {
        // stable order: ties keep the earlier vertex first, so the start wins ties
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        values = idx.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        if spread.is_finite() && spread <= settings.f_tol {
            converged = true;
            break;
        }
        let collapsed = (1..=n).all(|j| {
            simplex[j]
                .iter()
                .zip(&simplex[0])
                .all(|(a, b)| (a - b).abs() <= 1e-15 * (1.0 + b.abs()))
        });
        if collapsed {
            converged = values[n] == values[0];
            break;
        }
        if evaluations >= budget {
            break;
        }

        for c in centroid.iter_mut() {
            *c = 0.0;
        }
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / nf;
            }
        }
        let worst = &simplex[n];
        for i in 0..n {
            trial[i] = centroid[i] + alpha * (centroid[i] - worst[i]);
        }
        let f_reflect = eval(&trial, &mut evaluations);

        if f_reflect < values[0] {
            for i in 0..n {
                trial2[i] = centroid[i] + gamma * (trial[i] - centroid[i]);
            }
            let f_expand = eval(&trial2, &mut evaluations);
            if f_expand < f_reflect {
                simplex[n].copy_from_slice(&trial2);
                values[n] = f_expand;
            } else {
                simplex[n].copy_from_slice(&trial);
                values[n] = f_reflect;
            }
            continue;
        }
        if f_reflect < values[n - 1] {
            simplex[n].copy_from_slice(&trial);
            values[n] = f_reflect;
            continue;
        }

        let outside = f_reflect < values[n];
        for i in 0..n {
            trial2[i] = if outside {
                centroid[i] + rho * (trial[i] - centroid[i])
            } else {
                centroid[i] + rho * (simplex[n][i] - centroid[i])
            };
        }
        let f_contract = eval(&trial2, &mut evaluations);
        let accept = if outside {
            f_contract <= f_reflect
        } else {
            f_contract < values[n]
        };
        if accept {
            simplex[n].copy_from_slice(&trial2);
            values[n] = f_contract;
            continue;
        }

        let best = simplex[0].clone();
        for j in 1..=n {
            for i in 0..n {
                simplex[j][i] = best[i] + sigma * (simplex[j][i] - best[i]);
            }
            values[j] = eval(&simplex[j], &mut evaluations);
        }
    }

    Minimum {
        x: simplex.swap_remove(0),
        value: values[0],
        evaluations,
        converged,
    }
}
