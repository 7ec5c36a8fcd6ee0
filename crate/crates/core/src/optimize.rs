//! One-dimensional deterministic maximisation.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
/// Returns `(x, f(x))`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(c, fc), (d, fd), (x, fx)]
        .into_iter()
        .fold((x, f64::NEG_INFINITY), |best, p| if p.1 > best.1 { p } else { best })
}

/// Evaluate `f` on `n` equispaced points of `[a, b)`, then refine the best
/// one by golden-section search over its two neighbours.
pub fn scan_then_refine(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize, tol: f64) -> (f64, f64) {
    assert!(n >= 3, "scan needs at least three points");
    let step = (b - a) / n as f64;
    let (k, fk) = (0..n)
        .map(|k| (k, f(a + step * k as f64)))
        .fold((0, f64::NEG_INFINITY), |best, p| if p.1 > best.1 { p } else { best });
    let centre = a + step * k as f64;
    let (x, fx) = golden_section_max(&f, centre - step, centre + step, tol);
    if fx >= fk {
        (x, fx)
    } else {
        (centre, fk)
    }
}
