//! Derivative-free Nelder-Mead simplex minimisation.

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Stop once the largest vertex distance from the best vertex is below this.
    pub diameter_tolerance: f64,
    /// Stop once the spread of objective values over the simplex is below this.
    pub value_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            diameter_tolerance: 1e-8,
            value_tolerance: 1e-10,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimises `f` starting from `x0` with an axis-aligned initial simplex of
/// edge `step`. Non-finite objective values are treated as `+inf`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], step: f64, opts: &SimplexOptions) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(n >= 1, "nelder_mead needs at least one dimension");
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut verts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    verts.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step;
        verts.push(v);
    }
    let mut vals: Vec<f64> = verts.iter().map(|v| eval(v)).collect();

    let mut iterations = 0;
    let mut converged = false;
    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut trial2 = vec![0.0; n];

    loop {
        // sort ascending by value
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        verts = order.iter().map(|&i| verts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let diameter = verts[1..]
            .iter()
            .map(|v| v.iter().zip(&verts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let spread = vals[n] - vals[0];
        if diameter < opts.diameter_tolerance || (spread.is_finite() && spread.abs() < opts.value_tolerance) {
            converged = vals[0].is_finite();
            break;
        }
        if iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for v in &verts[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = &verts[n];
        for k in 0..n {
            trial[k] = centroid[k] + REFLECT * (centroid[k] - worst[k]);
        }
        let f_r = eval(&trial);

        if f_r < vals[0] {
            for k in 0..n {
                trial2[k] = centroid[k] + EXPAND * (trial[k] - centroid[k]);
            }
            let f_e = eval(&trial2);
            if f_e < f_r {
                verts[n].copy_from_slice(&trial2);
                vals[n] = f_e;
            } else {
                verts[n].copy_from_slice(&trial);
                vals[n] = f_r;
            }
            continue;
        }
        if f_r < vals[n - 1] {
            verts[n].copy_from_slice(&trial);
            vals[n] = f_r;
            continue;
        }

        // contraction: outside if the reflection improved on the worst point
        let outside = f_r < vals[n];
        for k in 0..n {
            trial2[k] = if outside {
                centroid[k] + CONTRACT * (trial[k] - centroid[k])
            } else {
                centroid[k] + CONTRACT * (verts[n][k] - centroid[k])
            };
        }
        let f_c = eval(&trial2);
        if f_c < if outside { f_r } else { vals[n] } {
            verts[n].copy_from_slice(&trial2);
            vals[n] = f_c;
            continue;
        }

        let best = verts[0].clone();
        for i in 1..=n {
            for k in 0..n {
                verts[i][k] = best[k] + SHRINK * (verts[i][k] - best[k]);
            }
            vals[i] = eval(&verts[i]);
        }
    }

    Minimum {
        x: verts.swap_remove(0),
        value: vals[0],
        iterations,
        converged,
    }
}
