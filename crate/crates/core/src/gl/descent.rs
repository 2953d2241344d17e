//! Preconditioned nonlinear conjugate gradients (Polak-Ribière+) with a
//! Wolfe line search driven by secant steps on the directional derivative.

const ARMIJO: f64 = 1e-4;
const CURVATURE: f64 = 0.1;
const MAX_TRIALS: usize = 40;

pub(crate) struct Outcome {
    pub iterations: usize,
    pub energy: f64,
    pub converged: bool,
    /// Two consecutive line searches failed to decrease the energy.
    pub stalled: bool,
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Minimizes `eval` from `x` for at most `max_iter` steps. `eval(x, g)`
/// returns the energy and writes the gradient, `precond(g, z)` writes the
/// preconditioned gradient, and `done(x, g)` is the stopping test.
pub(crate) fn nlcg<E, P, S>(x: &mut [f64], eval: E, precond: P, max_iter: usize, mut done: S) -> Outcome
where
    E: Fn(&[f64], &mut [f64]) -> f64,
    P: Fn(&[f64], &mut [f64]),
    S: FnMut(&[f64], &[f64]) -> bool,
{
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut f = eval(x, &mut g);
    if done(x, &g) {
        return Outcome { iterations: 0, energy: f, converged: true, stalled: false };
    }
    let mut z = vec![0.0; n];
    precond(&g, &mut z);
    let mut z_new = vec![0.0; n];
    let mut d: Vec<f64> = z.iter().map(|v| -v).collect();
    let mut gz = dot(&g, &z);
    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut step = 1.0;
    let mut prev_slope = f64::NAN;
    let mut failures = 0;
    for it in 1..=max_iter {
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            d.iter_mut().zip(&z).for_each(|(di, zi)| *di = -zi);
            slope = -gz;
        }
        if prev_slope.is_finite() {
            step *= (prev_slope / slope).clamp(0.1, 10.0);
        }
        match line_search(&eval, x, &d, f, slope, step, &mut xt, &mut gt) {
            Some((t, ft)) => {
                failures = 0;
                step = t;
                prev_slope = slope;
                x.copy_from_slice(&xt);
                f = ft;
                std::mem::swap(&mut g, &mut gt);
            }
            None => {
                failures += 1;
                if failures >= 2 {
                    return Outcome { iterations: it, energy: f, converged: false, stalled: true };
                }
                // Restart along the preconditioned gradient with a fresh step.
                d.iter_mut().zip(&z).for_each(|(di, zi)| *di = -zi);
                step = 1.0;
                prev_slope = f64::NAN;
                continue;
            }
        }
        if done(x, &g) {
            return Outcome { iterations: it, energy: f, converged: true, stalled: false };
        }
        precond(&g, &mut z_new);
        let gz_new = dot(&g, &z_new);
        let cross: f64 = g.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = ((gz_new - cross) / gz).max(0.0);
        for (di, zi) in d.iter_mut().zip(&z_new) {
            *di = -zi + beta * *di;
        }
        std::mem::swap(&mut z, &mut z_new);
        gz = gz_new;
    }
    Outcome { iterations: max_iter, energy: f, converged: false, stalled: false }
}

#[allow(clippy::too_many_arguments)]
fn line_search<E>(eval: &E, x: &[f64], d: &[f64], f0: f64, df0: f64, t0: f64, xt: &mut [f64], gt: &mut [f64]) -> Option<(f64, f64)>
where
    E: Fn(&[f64], &mut [f64]) -> f64,
{
    let at = |t: f64, xt: &mut [f64], gt: &mut [f64]| {
        for ((v, a), b) in xt.iter_mut().zip(x).zip(d) {
            *v = a + t * b;
        }
        let f = eval(xt, gt);
        (f, dot(gt, d))
    };
    // (t, f, f') at the best admissible point so far and at the upper end.
    let mut lo = (0.0, f0, df0);
    let mut hi: Option<(f64, f64, f64)> = None;
    let mut best: Option<(f64, f64)> = None;
    let mut t = t0;
    for _ in 0..MAX_TRIALS {
        let (f, df) = at(t, xt, gt);
        let admissible = f.is_finite() && f <= f0 + ARMIJO * t * df0;
        if admissible && best.is_none_or(|(_, fb)| f < fb) {
            best = Some((t, f));
        }
        if !admissible || f >= lo.1 {
            hi = Some((t, f, df));
        } else if df.abs() <= CURVATURE * df0.abs() {
            return Some((t, f));
        } else if df > 0.0 {
            hi = Some((t, f, df));
        } else {
            lo = (t, f, df);
        }
        t = match hi {
            None => {
                // Still descending: secant extrapolation, at least doubling.
                let (tl, _, dl) = lo;
                let guess = if df0 < dl && dl < 0.0 { tl * df0 / (df0 - dl) } else { 4.0 * tl };
                guess.clamp(2.0 * tl, 10.0 * tl)
            }
            Some((th, fh, dh)) => {
                let (tl, fl, dl) = lo;
                let w = th - tl;
                let guess = if dh.is_finite() && fh.is_finite() && dh > 0.0 && fh < f0 {
                    tl - dl * w / (dh - dl)
                } else if fh.is_finite() {
                    let curv = fh - fl - dl * w;
                    if curv > 0.0 { tl - dl * w * w / (2.0 * curv) } else { tl + 0.5 * w }
                } else {
                    tl + 0.1 * w
                };
                guess.clamp(tl + 0.05 * w, th - 0.05 * w)
            }
        };
        if let Some((th, ..)) = hi {
            if th - lo.0 <= 1e-14 * th.max(1e-300) {
                break;
            }
        }
    }
    // Accept the best sufficient-decrease point if the curvature test never
    // passed.
    let (t, _) = best?;
    let (f, _) = at(t, xt, gt);
    Some((t, f))
}
