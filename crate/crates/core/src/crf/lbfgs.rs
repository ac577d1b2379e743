//! Limited-memory BFGS minimizer with a strong-Wolfe line search.

use std::collections::VecDeque;

use crate::math::{dot, norm};

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub max_iters: usize,
    /// Stop when `|f_k - f_{k+1}| / max(|f_k|, |f_{k+1}|, 1)` falls below this.
    pub tolerance: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            memory: 10,
            max_iters: 300,
            tolerance: 1e-6,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

fn axpy(x: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + a * di).collect()
}

/// Minimizer of the cubic interpolating `(a, fa, da)` and `(b, fb, db)`,
/// clamped into the middle of the bracket; bisection if degenerate.
fn interpolate(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let mut t = if disc >= 0.0 {
        let d2 = disc.sqrt() * (b - a).signum();
        b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2)
    } else {
        f64::NAN
    };
    let margin = 0.1 * (hi - lo);
    if !t.is_finite() || t < lo + margin || t > hi - margin {
        t = 0.5 * (lo + hi);
    }
    t
}

/// Minimizes `f`, which returns the value and gradient at a point or an error.
pub fn minimize<E, F>(mut f: F, x0: Vec<f64>, cfg: &LbfgsConfig) -> Result<LbfgsResult, E>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), E>,
{
    let (f0, g0) = f(&x0)?;
    let mut evaluations = 1;
    let mut cur = Point { x: x0, f: f0, g: g0 };
    let mut history = vec![cur.f];
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..cfg.max_iters {
        let gnorm = norm(&cur.g);
        if gnorm == 0.0 || !gnorm.is_finite() {
            converged = gnorm == 0.0;
            break;
        }
        // Two-loop recursion for d = -H g.
        let mut q = cur.g.clone();
        let mut alphas = Vec::with_capacity(mem.len());
        for (s, y, rho) in mem.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = mem.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((s, y, rho), a) in mem.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.into_iter().map(|v| -v).collect();
        let mut dg = dot(&d, &cur.g);
        if dg >= 0.0 || !dg.is_finite() {
            mem.clear();
            d = cur.g.iter().map(|v| -v).collect();
            dg = -gnorm * gnorm;
        }
        let step0 = if mem.is_empty() { 1.0 / norm(&d) } else { 1.0 };

        let next = match line_search(&mut f, &cur, &d, dg, step0, cfg, &mut evaluations)? {
            Some(p) => p,
            None => {
                if mem.is_empty() {
                    break;
                }
                // Retry once along steepest descent with fresh curvature memory.
                mem.clear();
                let d: Vec<f64> = cur.g.iter().map(|v| -v).collect();
                match line_search(&mut f, &cur, &d, -gnorm * gnorm, 1.0 / gnorm, cfg, &mut evaluations)? {
                    Some(p) => p,
                    None => break,
                }
            }
        };
        iterations = iter + 1;

        let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            if mem.len() == cfg.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        let rel = (cur.f - next.f).abs() / cur.f.abs().max(next.f.abs()).max(1.0);
        cur = next;
        history.push(cur.f);
        if rel < cfg.tolerance {
            converged = true;
            break;
        }
    }

    Ok(LbfgsResult {
        x: cur.x,
        value: cur.f,
        iterations,
        evaluations,
        converged,
        history,
    })
}

/// Strong-Wolfe bracketing and zoom. `None` when no acceptable decrease is found.
fn line_search<E, F>(
    f: &mut F,
    cur: &Point,
    d: &[f64],
    dg0: f64,
    step0: f64,
    cfg: &LbfgsConfig,
    evaluations: &mut usize,
) -> Result<Option<Point>, E>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), E>,
{
    let mut eval = |a: f64, evaluations: &mut usize| -> Result<(Point, f64), E> {
        let x = axpy(&cur.x, a, d);
        let (fv, g) = f(&x)?;
        *evaluations += 1;
        let dga = dot(&g, d);
        Ok((Point { x, f: fv, g }, dga))
    };
    let armijo = |a: f64, fa: f64| fa <= cur.f + cfg.c1 * a * dg0;
    let curvature = |dga: f64| dga.abs() <= -cfg.c2 * dg0;

    let (mut a_prev, mut f_prev, mut d_prev) = (0.0, cur.f, dg0);
    let mut a = step0;
    let mut best: Option<Point> = None;
    let mut bracket = None;
    for i in 0..cfg.max_line_search {
        let (p, dga) = eval(a, evaluations)?;
        if !p.f.is_finite() {
            // Overshot into overflow: shrink and retry.
            a = 0.5 * (a_prev + a);
            continue;
        }
        if !armijo(a, p.f) || (i > 0 && p.f >= f_prev) {
            bracket = Some(((a_prev, f_prev, d_prev), (a, p.f, dga)));
            break;
        }
        if curvature(dga) {
            return Ok(Some(p));
        }
        if dga >= 0.0 {
            bracket = Some(((a, p.f, dga), (a_prev, f_prev, d_prev)));
            best = Some(p);
            break;
        }
        a_prev = a;
        f_prev = p.f;
        d_prev = dga;
        best = Some(p);
        a *= 2.0;
    }
    let Some(((mut lo, mut f_lo, mut d_lo), (mut hi, mut f_hi, mut d_hi))) = bracket else {
        return Ok(best);
    };
    for _ in 0..cfg.max_line_search {
        let a = interpolate(lo, f_lo, d_lo, hi, f_hi, d_hi);
        let (p, dga) = eval(a, evaluations)?;
        if !p.f.is_finite() || !armijo(a, p.f) || p.f >= f_lo {
            hi = a;
            f_hi = if p.f.is_finite() { p.f } else { f64::MAX };
            d_hi = if dga.is_finite() { dga } else { 0.0 };
        } else {
            if curvature(dga) {
                return Ok(Some(p));
            }
            if dga * (hi - lo) >= 0.0 {
                hi = lo;
                f_hi = f_lo;
                d_hi = d_lo;
            }
            lo = a;
            f_lo = p.f;
            d_lo = dga;
            best = Some(p);
        }
        if (hi - lo).abs() < 1e-16 * lo.abs().max(1.0) {
            break;
        }
    }
    // Accept the best sufficient-decrease point even if curvature never held.
    Ok(best.filter(|p| p.f < cur.f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>), ()> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((f, g))
    }

    #[test]
    fn minimizes_rosenbrock() {
        let cfg = LbfgsConfig { tolerance: 1e-14, max_iters: 500, ..Default::default() };
        let r = minimize(rosenbrock, vec![-1.2, 1.0], &cfg).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn history_is_monotone() {
        let quad = |x: &[f64]| -> Result<(f64, Vec<f64>), ()> {
            let f = x.iter().enumerate().map(|(i, v)| (i as f64 + 1.0) * v * v).sum();
            let g = x.iter().enumerate().map(|(i, v)| 2.0 * (i as f64 + 1.0) * v).collect();
            Ok((f, g))
        };
        let r = minimize(quad, vec![3.0; 8], &LbfgsConfig::default()).unwrap();
        assert!(r.converged);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.value < 1e-6);
    }

    #[test]
    fn errors_propagate() {
        let r = minimize(|_: &[f64]| Err::<(f64, Vec<f64>), _>("boom"), vec![0.0], &LbfgsConfig::default());
        assert_eq!(r.unwrap_err(), "boom");
    }
}
