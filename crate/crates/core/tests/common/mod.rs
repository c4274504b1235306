//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

/// Fourth-order central first derivative.
pub fn fd1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

/// Fourth-order central second derivative.
pub fn fd2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h)) / (12.0 * h * h)
}

/// Relative error with an absolute floor on the denominator scale.
pub fn close(got: f64, want: f64, rel: f64, floor: f64) -> bool {
    (got - want).abs() <= rel * got.abs().max(want.abs()) || (got - want).abs() <= floor
}

/// Dense forward pass written directly from the layer definition: tanh on
/// hidden layers, linear output. Shares nothing with the jet engine.
pub fn dense_forward(sizes: &[usize], flat: &[f64], input: &[f64]) -> f64 {
    let mut h = input.to_vec();
    let mut off = 0;
    let layers = sizes.len() - 1;
    for l in 0..layers {
        let (fi, fo) = (sizes[l], sizes[l + 1]);
        let mut next = vec![0.0; fo];
        for o in 0..fo {
            let mut a = flat[off + fi * fo + o];
            for i in 0..fi {
                a += flat[off + o * fi + i] * h[i];
            }
            next[o] = if l + 1 == layers { a } else { a.tanh() };
        }
        off += fi * fo + fo;
        h = next;
    }
    h[0]
}
