#![allow(dead_code)]

use num_complex::Complex64;

/// `J_0(x), ..., J_{d_max}(x)` by backward recurrence, normalised with
/// `J_0 + 2 Σ J_{2k} = 1`.
pub fn bessel_j_table(x: f64, d_max: usize) -> Vec<f64> {
    if x == 0.0 {
        let mut v = vec![0.0; d_max + 1];
        v[0] = 1.0;
        return v;
    }
    let start = d_max.max(x as usize) + 60 + (8.0 * x.sqrt()) as usize;
    let start = start + start % 2;
    let mut table = vec![0.0; start + 2];
    let (mut above, mut here) = (0.0f64, 1e-300f64);
    table[start] = here;
    for k in (1..=start).rev() {
        let below = 2.0 * k as f64 / x * here - above;
        above = here;
        here = below;
        table[k - 1] = here;
        if here.abs() > 1e250 {
            for v in table[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
            here *= 1e-250;
            above *= 1e-250;
        }
    }
    let norm = table[0] + 2.0 * table.iter().skip(2).step_by(2).sum::<f64>();
    table.truncate(d_max + 1);
    table.iter_mut().for_each(|v| *v /= norm);
    table
}

/// `(-i)^d J_d(4t)` for `d = 0..=d_max`: the whole-line propagator of the
/// free chain at distance `d`.
pub fn whole_line(t: f64, d_max: usize) -> Vec<Complex64> {
    let j = bessel_j_table(4.0 * t, d_max);
    let phases = [
        Complex64::new(1.0, 0.0),
        Complex64::new(0.0, -1.0),
        Complex64::new(-1.0, 0.0),
        Complex64::new(0.0, 1.0),
    ];
    j.iter().enumerate().map(|(d, v)| phases[d % 4] * v).collect()
}

/// Half-line free propagator row from `j` by images, `g(j-k) - g(j+k)`,
/// for `k = 1..=n`.
pub fn free_half_line_row(j: usize, t: f64, n: usize) -> Vec<Complex64> {
    let g = whole_line(t, j + n + 1);
    (1..=n).map(|k| g[j.abs_diff(k)] - g[j + k]).collect()
}
