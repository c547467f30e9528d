#![allow(dead_code)]

//! Independent reference implementations shared by the integration tests.

/// Explicit inverse by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        assert!(piv != 0.0, "singular matrix");
        for v in m[c].iter_mut() {
            *v /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    for j in 0..2 * n {
                        m[r][j] -= f * m[c][j];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn mat_vec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// `(XᵀX + λI)⁻¹ Xᵀy` through the explicit inverse.
pub fn ridge_oracle(x: &[Vec<f64>], y: &[f64], lambda: f64, k: usize) -> Vec<f64> {
    inverse_gram(x, lambda, k)
        .iter()
        .map(|row| {
            (0..k)
                .map(|c| row[c] * x.iter().zip(y).map(|(r, v)| r[c] * v).sum::<f64>())
                .sum()
        })
        .collect()
}

pub fn inverse_gram(x: &[Vec<f64>], lambda: f64, k: usize) -> Vec<Vec<f64>> {
    let mut g = vec![vec![0.0; k]; k];
    for r in x {
        for a in 0..k {
            for b in 0..k {
                g[a][b] += r[a] * r[b];
            }
        }
    }
    for (a, row) in g.iter_mut().enumerate() {
        row[a] += lambda;
    }
    gauss_jordan_inverse(&g)
}

pub fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
