//! Derivative-free local minimization (Nelder–Mead) with an infeasibility
//! barrier.
//!
//! Objectives signal an infeasible point by returning `+∞` (or NaN). The
//! starting point must be feasible; initial simplex vertices that are not are
//! pulled back toward it by step halving.

/// Settings for [`nelder_mead`].
#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Stop when the spread of objective values over the simplex is below this.
    pub ftol: f64,
    /// ... and the simplex diameter (max-abs) is below this.
    pub xtol: f64,
    /// Initial step along each coordinate.
    pub step: f64,
    /// Number of restarts from the incumbent after convergence.
    pub restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 20_000,
            ftol: 1e-10,
            xtol: 1e-8,
            step: 0.1,
            restarts: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub point: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

struct Counted<F> {
    f: F,
    evals: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    fn eval(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        sanitize((self.f)(x))
    }
}

/// Minimizes `f` from `x0`. Returns `None` when `f(x0)` is not finite.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> Option<Minimum> {
    let mut obj = Counted { f, evals: 0 };
    let f0 = obj.eval(x0);
    if !f0.is_finite() {
        return None;
    }
    if x0.is_empty() {
        return Some(Minimum {
            point: Vec::new(),
            value: f0,
            evals: obj.evals,
            converged: true,
        });
    }
    let mut best = (x0.to_vec(), f0);
    let mut converged = false;
    for round in 0..=opts.restarts {
        let (point, value, ok) = run(&mut obj, &best.0, best.1, opts);
        let improvement = best.1 - value;
        if value <= best.1 {
            best = (point, value);
        }
        converged = ok;
        if round > 0 && improvement.abs() <= opts.ftol * (1.0 + best.1.abs()) {
            break;
        }
        if obj.evals >= opts.max_evals {
            break;
        }
    }
    Some(Minimum {
        point: best.0,
        value: best.1,
        evals: obj.evals,
        converged,
    })
}

fn run<F: FnMut(&[f64]) -> f64>(
    obj: &mut Counted<F>,
    x0: &[f64],
    f0: f64,
    opts: &NelderMeadOptions,
) -> (Vec<f64>, f64, bool) {
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut step = if x0[i].abs() > 1e-3 { opts.step * x0[i].abs().max(0.1) } else { opts.step };
        let mut vertex = x0.to_vec();
        let mut value = f64::INFINITY;
        for _ in 0..40 {
            vertex[i] = x0[i] + step;
            value = obj.eval(&vertex);
            if value.is_finite() {
                break;
            }
            step *= 0.5;
        }
        if !value.is_finite() {
            vertex[i] = x0[i];
            value = f0;
        }
        simplex.push((vertex, value));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
    };
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread.is_finite() && spread <= opts.ftol * (1.0 + simplex[0].1.abs()) && diameter <= opts.xtol {
            return (simplex[0].0.clone(), simplex[0].1, true);
        }
        if obj.evals >= opts.max_evals {
            return (simplex[0].0.clone(), simplex[0].1, false);
        }
        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].0.clone();
        // Reflection: centroid + α (centroid − worst)
        let reflected = lerp(&centroid, &worst, -alpha);
        let fr = obj.eval(&reflected);
        if fr < simplex[0].1 {
            let expanded = lerp(&centroid, &worst, -gamma);
            let fe = obj.eval(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < simplex[n].1 {
            let c = lerp(&centroid, &reflected, rho);
            let fc = obj.eval(&c);
            (c, fc)
        } else {
            let c = lerp(&centroid, &worst, rho);
            let fc = obj.eval(&c);
            (c, fc)
        };
        if fc < simplex[n].1.min(fr) {
            simplex[n] = (contracted, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for item in simplex.iter_mut().skip(1) {
            let shrunk = lerp(&best, &item.0, sigma);
            let fs = obj.eval(&shrunk);
            *item = (shrunk, fs);
        }
    }
}
