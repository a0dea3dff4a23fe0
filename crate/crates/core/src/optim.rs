//! Nelder–Mead simplex minimisation.

/// Reflection, expansion, contraction and shrink coefficients plus stopping rules.
#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Stop once the largest vertex distance from the best vertex falls below this.
    pub diameter_tol: f64,
    pub max_iterations: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            diameter_tol: 1e-9,
            max_iterations: 20_000,
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

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
}

fn affine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (b - a)
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

impl NelderMead {
    /// Minimises `f` starting from an axis-aligned simplex of edge `step` around `x0`.
    pub fn minimize(&self, f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64) -> Minimum {
        let n = x0.len();
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), f(x0)));
        for k in 0..n {
            let mut x = x0.to_vec();
            x[k] += step;
            let v = f(&x);
            simplex.push((x, v));
        }

        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iterations {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            if diameter(&simplex) < self.diameter_tol {
                converged = true;
                break;
            }
            iterations += 1;

            let worst = simplex[n].clone();
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / n as f64;
                }
            }

            let xr = affine(&centroid, &worst.0, -self.reflection);
            let fr = f(&xr);
            if fr < simplex[0].1 {
                let xe = affine(&centroid, &worst.0, -self.reflection * self.expansion);
                let fe = f(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
                continue;
            }
            // contraction, outside if the reflected point improved on the worst
            let (xc, fc) = if fr < worst.1 {
                let xc = affine(&centroid, &xr, self.contraction);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = affine(&centroid, &worst.0, self.contraction);
                let fc = f(&xc);
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
                continue;
            }
            let best = simplex[0].0.clone();
            for v in simplex.iter_mut().skip(1) {
                v.0 = affine(&best, &v.0, self.shrink);
                v.1 = f(&v.0);
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, value) = simplex.swap_remove(0);
        Minimum { x, value, iterations, converged }
    }
}
