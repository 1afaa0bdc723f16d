//! Limited-memory BFGS with a strong-Wolfe line search.
//!
//! Two-loop recursion over a bounded history of (s, y) pairs, initial
//! Hessian scaling gamma = s'y / y'y, and the Nocedal-Wright bracketing /
//! zoom line search with c1 = 1e-4, c2 = 0.9. Accepted iterates never
//! increase the objective; a failed line search returns the best point seen
//! with `converged = false`.

use nalgebra::DVector;
use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    pub history_size: usize,
    pub max_iters: usize,
    /// Termination threshold on the gradient infinity norm.
    pub grad_tol: f64,
    pub c1: f64,
    pub c2: f64,
    /// Bracketing attempts before the line search gives up.
    pub max_bracket_steps: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            history_size: 10,
            max_iters: 1000,
            grad_tol: 1e-5,
            c1: 1e-4,
            c2: 0.9,
            max_bracket_steps: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub point: DVector<f64>,
    pub value: f64,
    pub grad_inf_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Evaluation {
    alpha: f64,
    value: f64,
    gradient: DVector<f64>,
    slope: f64,
}

/// Minimizes `objective` (returning value and gradient) from `init`.
pub fn lbfgs_minimize<F>(mut objective: F, init: DVector<f64>, opts: &LbfgsOptions) -> LbfgsOutcome
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let mut x = init;
    let (mut f, mut g) = objective(&x);
    let mut best = (x.clone(), f, g.amax());

    let mut history: VecDeque<(DVector<f64>, DVector<f64>, f64)> =
        VecDeque::with_capacity(opts.history_size);
    let mut completed = 0usize;

    for iteration in 0..opts.max_iters {
        if g.amax() <= opts.grad_tol {
            return LbfgsOutcome {
                point: x,
                value: f,
                grad_inf_norm: g.amax(),
                iterations: iteration,
                converged: true,
            };
        }

        let mut direction = two_loop_direction(&g, &history);
        let mut slope = g.dot(&direction);
        if !(slope < 0.0) || !slope.is_finite() {
            // Not a descent direction; fall back to steepest descent.
            history.clear();
            direction = -&g;
            slope = g.dot(&direction);
            if slope >= 0.0 {
                break; // gradient is exactly zero (handled above) or NaN
            }
        }

        let step = match line_search(&mut objective, &x, &direction, f, slope, opts) {
            Some(step) => step,
            None => break,
        };

        let x_next = &x + &direction * step.alpha;
        let s = &x_next - &x;
        let y = &step.gradient - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if history.len() == opts.history_size {
                history.pop_front();
            }
            history.push_back((s, y, sy));
        }

        x = x_next;
        f = step.value;
        g = step.gradient;
        completed = iteration + 1;
        if f < best.1 {
            best = (x.clone(), f, g.amax());
        }

        if completed == opts.max_iters {
            return LbfgsOutcome {
                point: x.clone(),
                value: f,
                grad_inf_norm: g.amax(),
                iterations: completed,
                converged: g.amax() <= opts.grad_tol,
            };
        }
    }

    // Line-search failure or non-finite direction: hand back the best point.
    let converged = best.2 <= opts.grad_tol;
    LbfgsOutcome {
        point: best.0,
        value: best.1,
        grad_inf_norm: best.2,
        iterations: completed,
        converged,
    }
}

fn two_loop_direction(
    gradient: &DVector<f64>,
    history: &VecDeque<(DVector<f64>, DVector<f64>, f64)>,
) -> DVector<f64> {
    let mut q = gradient.clone();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, sy) in history.iter().rev() {
        let rho = 1.0 / sy;
        let alpha = rho * s.dot(&q);
        q -= y * alpha;
        alphas.push(alpha);
    }

    let gamma = history
        .back()
        .map(|(_, y, sy)| sy / y.dot(y))
        .unwrap_or(1.0);
    let mut r = q * gamma;

    for ((s, y, sy), alpha) in history.iter().zip(alphas.into_iter().rev()) {
        let rho = 1.0 / sy;
        let beta = rho * y.dot(&r);
        r += s * (alpha - beta);
    }
    -r
}

fn line_search<F>(
    objective: &mut F,
    x: &DVector<f64>,
    direction: &DVector<f64>,
    phi0: f64,
    dphi0: f64,
    opts: &LbfgsOptions,
) -> Option<Evaluation>
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let mut eval = |alpha: f64| -> Evaluation {
        let point = x + direction * alpha;
        let (value, gradient) = objective(&point);
        let slope = gradient.dot(direction);
        Evaluation {
            alpha,
            value,
            gradient,
            slope,
        }
    };

    let mut prev = Evaluation {
        alpha: 0.0,
        value: phi0,
        gradient: DVector::zeros(0), // never read at alpha = 0
        slope: dphi0,
    };
    let mut alpha = 1.0;

    for attempt in 0..opts.max_bracket_steps {
        let current = eval(alpha);
        if !current.value.is_finite() {
            // Step into overflow territory: treat as an upper bracket.
            return zoom(&mut eval, prev, current, phi0, dphi0, opts);
        }
        if current.value > phi0 + opts.c1 * alpha * dphi0
            || (attempt > 0 && current.value >= prev.value)
        {
            return zoom(&mut eval, prev, current, phi0, dphi0, opts);
        }
        if current.slope.abs() <= -opts.c2 * dphi0 {
            return Some(current);
        }
        if current.slope >= 0.0 {
            return zoom(&mut eval, current, prev, phi0, dphi0, opts);
        }
        alpha = current.alpha * 2.0;
        prev = current;
    }
    None
}

fn zoom<E>(
    eval: &mut E,
    mut lo: Evaluation,
    mut hi: Evaluation,
    phi0: f64,
    dphi0: f64,
    opts: &LbfgsOptions,
) -> Option<Evaluation>
where
    E: FnMut(f64) -> Evaluation,
{
    const MAX_ZOOM: usize = 30;
    for _ in 0..MAX_ZOOM {
        let alpha = interpolate(&lo, &hi);
        if (hi.alpha - lo.alpha).abs() < 1e-16 {
            return None;
        }
        let current = eval(alpha);
        if !current.value.is_finite()
            || current.value > phi0 + opts.c1 * alpha * dphi0
            || current.value >= lo.value
        {
            hi = current;
        } else {
            if current.slope.abs() <= -opts.c2 * dphi0 {
                return Some(current);
            }
            if current.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = current;
        }
    }
    None
}

/// Quadratic interpolation between the bracket endpoints, safeguarded by
/// bisection when the fit lands outside the central 80% of the interval.
fn interpolate(lo: &Evaluation, hi: &Evaluation) -> f64 {
    let span = hi.alpha - lo.alpha;
    let midpoint = lo.alpha + 0.5 * span;
    if span.abs() < 1e-300 {
        return midpoint;
    }
    let curvature = (hi.value - lo.value - lo.slope * span) / (span * span);
    if !(curvature.is_finite() && curvature > 0.0) {
        return midpoint;
    }
    let alpha = lo.alpha - lo.slope / (2.0 * curvature);
    let lower = lo.alpha.min(hi.alpha);
    let upper = lo.alpha.max(hi.alpha);
    let margin = 0.1 * (upper - lower);
    if !alpha.is_finite() || alpha < lower + margin || alpha > upper - margin {
        midpoint
    } else {
        alpha
    }
}
