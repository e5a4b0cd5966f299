//! Test-side reference implementations. Each one is written from the
//! textbook definition, without calling into the library.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rank of each value: one plus the number of strictly smaller values, plus
/// half the number of other values equal to it.
pub fn brute_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

pub fn brute_srcc(a: &[f64], b: &[f64]) -> f64 {
    pearson(&brute_ranks(a), &brute_ranks(b))
}

/// Values drawn from a small pool so that ties are common.
pub fn tied_values(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let pool = rng.random_range(2..=n.max(2) + 3);
    (0..n).map(|_| rng.random_range(0..pool) as f64 * 0.25 - 1.0).collect()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Column means and population standard deviations.
pub fn column_stats(x: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let d = x[0].len();
    let means: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let stds = (0..d)
        .map(|j| (x.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n).sqrt())
        .collect();
    (means, stds)
}

/// Ridge on z-scored features with an unpenalized intercept. Returns a
/// predictor over raw rows.
pub fn ridge_oracle(x: &[Vec<f64>], y: &[f64], lambda: f64) -> impl Fn(&[f64]) -> f64 {
    let (means, stds) = column_stats(x);
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|r| r.iter().enumerate().map(|(j, v)| (v - means[j]) / stds[j]).collect())
        .collect();
    let d = means.len();
    let y_mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut gram = vec![vec![0.0; d]; d];
    let mut rhs = vec![0.0; d];
    for (r, yi) in z.iter().zip(y) {
        for i in 0..d {
            rhs[i] += r[i] * (yi - y_mean);
            for j in 0..d {
                gram[i][j] += r[i] * r[j];
            }
        }
    }
    for (i, row) in gram.iter_mut().enumerate() {
        row[i] += lambda;
    }
    let w = solve(gram, rhs);
    move |row: &[f64]| y_mean + (0..d).map(|j| w[j] * (row[j] - means[j]) / stds[j]).sum::<f64>()
}

pub fn gaussian_matrix(rng: &mut impl Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    use rand_distr::{Distribution, StandardNormal};
    (0..n)
        .map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect())
        .collect()
}

/// Minimum of the epsilon-SVR dual
/// `1/2 (a - a*)' K (a - a*) + eps sum(a + a*) - y'(a - a*)`
/// over `0 <= a, a* <= C`, `sum(a - a*) = 0`, by accelerated projected
/// gradient on the stacked `2n` variables.
pub fn svr_dual_oracle(k: &[Vec<f64>], y: &[f64], c: f64, eps: f64, iterations: usize) -> (f64, Vec<f64>) {
    let n = y.len();
    let objective = |beta: &[f64], abs_sum: f64| {
        let mut quad = 0.0;
        for i in 0..n {
            for j in 0..n {
                quad += beta[i] * beta[j] * k[i][j];
            }
        }
        0.5 * quad + eps * abs_sum - y.iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()
    };
    // Lipschitz bound: twice the largest row sum of |K|.
    let lip = 2.0 * k.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / lip;
    let sign = |i: usize| if i < n { 1.0 } else { -1.0 };
    let project = |v: &[f64]| -> Vec<f64> {
        // Find nu with sum_i s_i clip(v_i - nu s_i, 0, C) = 0 by bisection.
        let g = |nu: f64| -> f64 {
            (0..2 * n)
                .map(|i| sign(i) * (v[i] - nu * sign(i)).clamp(0.0, c))
                .sum()
        };
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let nu = 0.5 * (lo + hi);
        (0..2 * n).map(|i| (v[i] - nu * sign(i)).clamp(0.0, c)).collect()
    };
    let beta_of = |a: &[f64]| -> Vec<f64> { (0..n).map(|i| a[i] - a[n + i]).collect() };
    let mut a = vec![0.0; 2 * n];
    let mut yk = a.clone();
    let mut t = 1.0f64;
    for _ in 0..iterations {
        let beta = beta_of(&yk);
        let kb: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k[i][j] * beta[j]).sum()).collect();
        let grad: Vec<f64> = (0..2 * n)
            .map(|i| if i < n { kb[i] + eps - y[i] } else { -kb[i - n] + eps + y[i - n] })
            .collect();
        let moved: Vec<f64> = yk.iter().zip(&grad).map(|(v, g)| v - step * g).collect();
        let next = project(&moved);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        yk = next
            .iter()
            .zip(&a)
            .map(|(x, xo)| x + (t - 1.0) / t_next * (x - xo))
            .collect();
        a = next;
        t = t_next;
    }
    let beta = beta_of(&a);
    let abs_sum: f64 = a.iter().sum();
    (objective(&beta, abs_sum), beta)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Row-major matrix-vector product.
fn matvec(data: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    (0..rows).map(|r| (0..cols).map(|c| data[r * cols + c] * v[c]).sum()).collect()
}

/// Evaluation-mode forward pass: GRU over the sequence, then ReLU dense
/// layers and a linear output.
pub fn gru_forward_oracle(m: &memorability::textmodel::GruRegressor, seq: &[Vec<f64>]) -> f64 {
    let p = &m.params.cell;
    let (h_dim, x_dim) = (m.hidden_units, m.input_dim);
    let mut h = vec![0.0; h_dim];
    for x in seq {
        let lin = |w: &memorability::textmodel::Mat, u: &memorability::textmodel::Mat, b: &[f64], hv: &[f64]| {
            let wx = matvec(&w.data, h_dim, x_dim, x);
            let uh = matvec(&u.data, h_dim, h_dim, hv);
            (0..h_dim).map(|i| wx[i] + uh[i] + b[i]).collect::<Vec<f64>>()
        };
        let z: Vec<f64> = lin(&p.w_z, &p.u_z, &p.b_z, &h).into_iter().map(sigmoid).collect();
        let r: Vec<f64> = lin(&p.w_r, &p.u_r, &p.b_r, &h).into_iter().map(sigmoid).collect();
        let rh: Vec<f64> = r.iter().zip(&h).map(|(a, b)| a * b).collect();
        let c: Vec<f64> = lin(&p.w_h, &p.u_h, &p.b_h, &rh).into_iter().map(f64::tanh).collect();
        h = (0..h_dim).map(|i| z[i] * h[i] + (1.0 - z[i]) * c[i]).collect();
    }
    let mut v = h;
    let last = m.params.dense.len() - 1;
    for (k, layer) in m.params.dense.iter().enumerate() {
        let out = matvec(&layer.w.data, layer.w.rows, layer.w.cols, &v);
        v = out
            .iter()
            .zip(&layer.b)
            .map(|(a, b)| if k < last { (a + b).max(0.0) } else { a + b })
            .collect();
    }
    v[0]
}

/// Every `k`-vector of non-negative integers summing to `steps`, by nested
/// counting in base `steps + 1`.
pub fn brute_simplex_counts(k: usize, steps: u32) -> Vec<Vec<u32>> {
    let base = steps as u64 + 1;
    let total = base.pow(k as u32);
    (0..total)
        .map(|mut code| {
            let mut digits = vec![0u32; k];
            for d in digits.iter_mut().rev() {
                *d = (code % base) as u32;
                code /= base;
            }
            digits
        })
        .filter(|d| d.iter().sum::<u32>() == steps)
        .collect()
}

pub fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
}
