//! Separable filters on row-major grids.

/// Normalised Gaussian kernel truncated at 4σ.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma + 0.5) as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let x = i as f64 - radius as f64;
            (-0.5 * x * x / (sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|x| *x /= s);
    k
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - 1 - j;
    }
    j as usize
}

/// Convolves every row of length `n` with a Gaussian of width `sigma`.
/// `sigma == 0` returns the input.
pub fn gaussian_rows(values: &[f64], n: usize, sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return values.to_vec();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let mut out = vec![0.0; values.len()];
    for (row, dst) in values.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
        for (j, d) in dst.iter_mut().enumerate() {
            *d = k
                .iter()
                .enumerate()
                .map(|(t, w)| w * row[reflect(j as isize + t as isize - r, n)])
                .sum();
        }
    }
    out
}

/// Convolves every column with a Gaussian of width `sigma`.
pub fn gaussian_cols(values: &[f64], n_rows: usize, n_cols: usize, sigma: f64) -> Vec<f64> {
    let t = transpose(values, n_rows, n_cols);
    transpose(&gaussian_rows(&t, n_rows, sigma), n_cols, n_rows)
}

pub fn transpose(values: &[f64], n_rows: usize, n_cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for i in 0..n_rows {
        for j in 0..n_cols {
            out[j * n_rows + i] = values[i * n_cols + j];
        }
    }
    out
}

fn diff(get: impl Fn(usize) -> f64, k: usize, n: usize) -> f64 {
    if k == 0 {
        get(1) - get(0)
    } else if k == n - 1 {
        get(n - 1) - get(n - 2)
    } else {
        0.5 * (get(k + 1) - get(k - 1))
    }
}

/// sqrt(∂i² + ∂j²) in array coordinates: central differences inside,
/// one-sided at the borders.
pub fn gradient_magnitude(values: &[f64], n_rows: usize, n_cols: usize) -> Vec<f64> {
    let at = |i: usize, j: usize| values[i * n_cols + j];
    let mut out = vec![0.0; values.len()];
    for i in 0..n_rows {
        for j in 0..n_cols {
            let di = diff(|k| at(k, j), i, n_rows);
            let dj = diff(|k| at(i, k), j, n_cols);
            out[i * n_cols + j] = di.hypot(dj);
        }
    }
    out
}
