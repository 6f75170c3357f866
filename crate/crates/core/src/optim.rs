//! Derivative-free minimization (Nelder–Mead simplex).
//!
//! Used for both the kernel least-squares fit and the masked-load
//! calibration. Both objectives are cheap, low dimensional and, in the
//! calibration case, only piecewise smooth.

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    /// Per-coordinate offset of the initial simplex vertices. A single
    /// entry is broadcast to every coordinate.
    pub initial_step: Vec<f64>,
    pub max_evals: usize,
    /// Absolute spread of objective values across the simplex.
    pub ftol: f64,
    /// Max-norm distance of every vertex from the best one.
    pub xtol: f64,
    /// Number of times the simplex is rebuilt around the best point after
    /// convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            initial_step: vec![0.1],
            max_evals: 5000,
            ftol: 1e-12,
            xtol: 1e-9,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Best objective value after each iteration; never increases.
    pub trace: Vec<f64>,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Minimize `f` starting from `x0`. Non-finite objective values are treated
/// as +∞ and therefore never accepted.
pub fn nelder_mead<F>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(!x0.is_empty(), "nelder_mead needs at least one coordinate");
    let n = x0.len();
    let steps: Vec<f64> = match opts.initial_step.len() {
        1 => vec![opts.initial_step[0]; n],
        m if m == n => opts.initial_step.clone(),
        m => panic!("initial_step has {m} entries for {n} coordinates"),
    };

    let mut obj = Counted { f, evals: 0 };
    let mut best_x = x0.to_vec();
    let mut best_f = obj.eval(x0);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    for round in 0..=opts.restarts {
        let start_f = best_f;
        let mut simplex = vec![(best_x.clone(), best_f)];
        for (i, step) in steps.iter().enumerate() {
            let mut v = best_x.clone();
            v[i] += step;
            let fv = obj.eval(&v);
            simplex.push((v, fv));
        }

        converged = false;
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            iterations += 1;
            trace.push(simplex[0].1);

            let f_spread = simplex[n].1 - simplex[0].1;
            let x_spread = simplex[1..]
                .iter()
                .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if (f_spread <= opts.ftol && x_spread <= opts.xtol) || x_spread == 0.0 {
                converged = true;
                break;
            }
            if obj.evals >= opts.max_evals {
                break;
            }

            let mut centroid = vec![0.0; n];
            for (v, _) in &simplex[..n] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / n as f64;
                }
            }
            let along = |t: f64, worst: &[f64]| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(worst)
                    .map(|(c, w)| c + t * (c - w))
                    .collect()
            };
            let worst = simplex[n].0.clone();
            let f_best = simplex[0].1;
            let f_second = simplex[n - 1].1;
            let f_worst = simplex[n].1;

            let xr = along(REFLECT, &worst);
            let fr = obj.eval(&xr);
            if fr < f_best {
                let xe = along(REFLECT * EXPAND, &worst);
                let fe = obj.eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
                continue;
            }
            if fr < f_second {
                simplex[n] = (xr, fr);
                continue;
            }
            let (xc, fc, accept) = if fr < f_worst {
                let xc = along(REFLECT * CONTRACT, &worst);
                let fc = obj.eval(&xc);
                let ok = fc <= fr;
                (xc, fc, ok)
            } else {
                let xc = along(-CONTRACT, &worst);
                let fc = obj.eval(&xc);
                let ok = fc < f_worst;
                (xc, fc, ok)
            };
            if accept {
                simplex[n] = (xc, fc);
                continue;
            }
            let anchor = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let v: Vec<f64> = anchor
                    .iter()
                    .zip(&vertex.0)
                    .map(|(a, x)| a + SHRINK * (x - a))
                    .collect();
                let fv = obj.eval(&v);
                *vertex = (v, fv);
            }
        }

        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 <= best_f {
            best_f = simplex[0].1;
            best_x = simplex[0].0.clone();
        }
        if !converged || round == opts.restarts || start_f - best_f <= opts.ftol && round > 0 {
            break;
        }
    }

    NelderMeadResult {
        x: best_x,
        value: best_f,
        evaluations: obj.evals,
        iterations,
        converged,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn minimizes_rosenbrock() {
        let opts = NelderMeadOptions {
            initial_step: vec![0.5],
            max_evals: 10_000,
            ftol: 1e-14,
            xtol: 1e-9,
            restarts: 2,
        };
        let r = nelder_mead(rosenbrock, &[-1.2, 1.0], &opts);
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn trace_is_monotone() {
        let r = nelder_mead(
            |x: &[f64]| x.iter().map(|v| (v - 3.0).abs()).sum::<f64>(),
            &[0.0, 0.0, 0.0, 0.0],
            &NelderMeadOptions::default(),
        );
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.value < 1e-6);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let opts = NelderMeadOptions {
            max_evals: 20,
            ..Default::default()
        };
        let r = nelder_mead(rosenbrock, &[-1.2, 1.0], &opts);
        assert!(!r.converged);
        assert!(r.evaluations >= 20);
        assert!(r.value <= rosenbrock(&[-1.2, 1.0]));
    }

    #[test]
    fn nan_objective_is_never_accepted() {
        let r = nelder_mead(
            |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 0.5).powi(2) },
            &[0.05],
            &NelderMeadOptions::default(),
        );
        assert!(r.value.is_finite());
        assert!((r.x[0] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn fixed_point_returns_start() {
        let r = nelder_mead(
            |x: &[f64]| (x[0] - 2.0).abs() + (x[1] + 1.0).abs(),
            &[2.0, -1.0],
            &NelderMeadOptions::default(),
        );
        assert_eq!(r.x, vec![2.0, -1.0]);
        assert_eq!(r.value, 0.0);
    }
}
