//! Derivative-free local minimization.

/// Nelder–Mead simplex minimization of `f` from `x0` with initial edge
/// lengths `step`. Stops when the spread of simplex values falls below
/// `ftol` or after `max_iter` iterations; returns the best vertex and value.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], step: &[f64], ftol: f64, max_iter: usize) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step[i];
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let point = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect() };

    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        if (vals[n] - vals[0]).abs() <= ftol {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|d| simplex[..n].iter().map(|v| v[d]).sum::<f64>() / n as f64).collect();
        let reflected = point(&centroid, &simplex[n], -1.0);
        let fr = f(&reflected);
        if fr < vals[0] {
            let expanded = point(&centroid, &simplex[n], -2.0);
            let fe = f(&expanded);
            if fe < fr {
                (simplex[n], vals[n]) = (expanded, fe);
            } else {
                (simplex[n], vals[n]) = (reflected, fr);
            }
        } else if fr < vals[n - 1] {
            (simplex[n], vals[n]) = (reflected, fr);
        } else {
            let contracted = if fr < vals[n] { point(&centroid, &reflected, 0.5) } else { point(&centroid, &simplex[n], 0.5) };
            let fc = f(&contracted);
            if fc < vals[n].min(fr) {
                (simplex[n], vals[n]) = (contracted, fc);
            } else {
                for i in 1..=n {
                    simplex[i] = point(&simplex[0], &simplex[i], 0.5);
                    vals[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    (simplex[best].clone(), vals[best])
}
