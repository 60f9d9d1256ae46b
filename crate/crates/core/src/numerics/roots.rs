use crate::error::{Error, Result};

/// Iteration cap shared by the bracketed refinement.
pub const MAX_REFINE_ITERATIONS: usize = 200;

/// Sub-intervals of `[a, b]` (split into `samples - 1` equal cells) on which
/// `f` changes sign.
pub fn sign_change_brackets<F>(f: F, a: f64, b: f64, samples: usize) -> Vec<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let samples = samples.max(2);
    let step = (b - a) / (samples - 1) as f64;
    let mut out = Vec::new();
    let mut x_prev = a;
    let mut f_prev = f(a);
    for i in 1..samples {
        let x = if i == samples - 1 { b } else { a + step * i as f64 };
        let fx = f(x);
        if f_prev == 0.0 {
            out.push((x_prev, x_prev));
        } else if f_prev.is_finite() && fx.is_finite() && f_prev.signum() != fx.signum() && fx != 0.0 {
            out.push((x_prev, x));
        }
        x_prev = x;
        f_prev = fx;
    }
    if f_prev == 0.0 {
        out.push((b, b));
    }
    out
}

/// Refines a root inside a sign-change bracket: bisection until the bracket
/// is narrow, then safeguarded secant steps that never leave the bracket.
pub fn refine_bracketed<F>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if lo == hi {
        return Ok(lo);
    }
    let (mut a, mut b) = if lo < hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::domain(format!("no sign change on [{a}, {b}]")));
    }
    let tol = |x: f64| rel_tol * x.abs().max(f64::MIN_POSITIVE) + f64::MIN_POSITIVE;

    let mut stalled = false;
    for iter in 0..MAX_REFINE_ITERATIONS {
        let width = b - a;
        let use_secant = width < 1e-3 * a.abs().max(b.abs()).max(1e-300) && iter > 0 && !stalled;
        let mut x = 0.5 * (a + b);
        if use_secant {
            let s = b - fb * (b - a) / (fb - fa);
            if s > a && s < b && s.is_finite() {
                x = s;
            }
        }
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx.signum() == fa.signum() {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        if b - a <= tol(0.5 * (a + b)) {
            return Ok(if fa.abs() < fb.abs() { a } else { b });
        }
        // a secant step that only moves one end stalls; force the other side in
        if use_secant {
            let m = 0.5 * (a + b);
            let probe = if (x - a).abs() < (b - x).abs() { (x + tol(x)).min(m) } else { (x - tol(x)).max(m) };
            let fp = f(probe);
            if fp == 0.0 {
                return Ok(probe);
            }
            if fp.signum() == fa.signum() {
                a = probe;
                fa = fp;
            } else {
                b = probe;
                fb = fp;
            }
            if b - a <= tol(0.5 * (a + b)) {
                return Ok(if fa.abs() < fb.abs() { a } else { b });
            }
        }
        // a step that did not halve the bracket is followed by bisection
        stalled = b - a > 0.5 * width;
    }
    Err(Error::Convergence {
        what: "bracketed root refinement".into(),
        last: b,
        previous: a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_every_root_of_a_sine() {
        let br = sign_change_brackets(f64::sin, 0.5, 10.0, 1000);
        assert_eq!(br.len(), 3);
        let roots: Vec<f64> = br
            .into_iter()
            .map(|(a, b)| refine_bracketed(f64::sin, a, b, 1e-14).unwrap())
            .collect();
        for (k, r) in roots.iter().enumerate() {
            let exact = std::f64::consts::PI * (k + 1) as f64;
            assert!((r - exact).abs() < 1e-12 * exact, "{r} vs {exact}");
        }
    }

    #[test]
    fn refinement_reaches_tight_tolerance_on_steep_function() {
        let f = |x: f64| (x - 1.234_567_890_123).powi(3) * 1e6 + (x - 1.234_567_890_123);
        let r = refine_bracketed(f, 0.0, 3.0, 1e-13).unwrap();
        assert!((r - 1.234_567_890_123).abs() < 1e-12);
    }

    #[test]
    fn jump_discontinuity_is_located() {
        let f = |x: f64| if x < 0.3 { -1.0 - x } else { 2.0 + x * x };
        let r = refine_bracketed(f, 0.0, 1.0, 1e-14).unwrap();
        assert!((r - 0.3).abs() < 1e-13);
    }

    #[test]
    fn rejects_bracket_without_sign_change() {
        assert!(refine_bracketed(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
    }
}
