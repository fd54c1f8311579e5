//! Derivative-free simplex minimiser used to refine the angle grid search.

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SimplexSettings {
    /// Edge length of the initial simplex.
    pub step: f64,
    /// Stop when the spread of function values is at most this...
    pub ftol: f64,
    /// ...and the simplex diameter is at most this.
    pub xtol: f64,
    pub max_iterations: usize,
}

pub(crate) fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], s: SimplexSettings) -> Minimum {
    let dim = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        f(x)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut v = x0.to_vec();
        v[i] += s.step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evaluations)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < s.max_iterations {
        // Order best to worst; ties keep insertion order.
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[dim] - values[0];
        let diameter = simplex[1..]
            .iter()
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= s.ftol && diameter <= s.xtol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|v| v[j]).sum::<f64>() / dim as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[dim])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let reflected = along(1.0);
        let fr = eval(&reflected, &mut evaluations);
        if fr < values[0] {
            let expanded = along(2.0);
            let fe = eval(&expanded, &mut evaluations);
            if fe < fr {
                simplex[dim] = expanded;
                values[dim] = fe;
            } else {
                simplex[dim] = reflected;
                values[dim] = fr;
            }
            continue;
        }
        if fr < values[dim - 1] {
            simplex[dim] = reflected;
            values[dim] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[dim] {
            let x = along(0.5);
            let v = eval(&x, &mut evaluations);
            (x, v)
        } else {
            let x = along(-0.5);
            let v = eval(&x, &mut evaluations);
            (x, v)
        };
        if fc < values[dim].min(fr) {
            simplex[dim] = contracted;
            values[dim] = fc;
            continue;
        }
        // Shrink toward the best vertex.
        for i in 1..=dim {
            let shrunk: Vec<f64> = simplex[i]
                .iter()
                .zip(&simplex[0])
                .map(|(v, b)| b + 0.5 * (v - b))
                .collect();
            values[i] = eval(&shrunk, &mut evaluations);
            simplex[i] = shrunk;
        }
    }

    let best = (0..=dim)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("non-empty simplex");
    Minimum {
        x: simplex[best].clone(),
        value: values[best],
        iterations,
        evaluations,
        converged,
    }
}
