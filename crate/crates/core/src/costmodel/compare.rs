// SPDX-License-Identifier: Apache-2.0

//! Global energy of key distribution against two parametric comparison
//! schemes: a pairwise-key scheme growing as `α·n² + β·n` and a public-key
//! scheme growing as `α·n + β`.

use std::fmt::Write as _;

use super::{energy_of, EnergyParams, GroupOp, MessageSizes, SystemParams};
use crate::error::{param, Result};

/// Saving reported for the public-key comparison, expressed as ours/theirs.
pub const REFERENCE_RATIO: f64 = 0.5267;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurveParams {
    pub alpha: f64,
    pub beta: f64,
}

impl CurveParams {
    pub const LEAP_DEFAULT: CurveParams = CurveParams {
        alpha: 1.2e-5,
        beta: 1.5e-4,
    };
    pub const ECPKC_DEFAULT: CurveParams = CurveParams {
        alpha: 2.9e-4,
        beta: 1.0e-3,
    };

    pub fn quadratic(&self, n: f64) -> f64 {
        self.alpha * n * n + self.beta * n
    }

    pub fn linear(&self, n: f64) -> f64 {
        self.alpha * n + self.beta
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComparisonRow {
    pub n: u64,
    pub leap: f64,
    pub ecpkc: f64,
    pub ours: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub mean_ratio: f64,
    pub r2_leap: f64,
    pub r2_ecpkc: f64,
    pub r2_ours: f64,
}

impl Comparison {
    /// Long-format table `scheme,N,joules`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("scheme,N,joules\n");
        for (name, pick) in [
            ("LEAP", (|r: &ComparisonRow| r.leap) as fn(&ComparisonRow) -> f64),
            ("ECPKC", |r| r.ecpkc),
            ("MIPUF", |r| r.ours),
        ] {
            for r in &self.rows {
                writeln!(s, "{name},{},{:e}", r.n, pick(r)).expect("string write");
            }
        }
        s
    }
}

pub fn compare_schemes(
    ns: &[u64],
    p: &SystemParams,
    energy: &EnergyParams<f64>,
    sizes: &MessageSizes,
    leap: CurveParams,
    ecpkc: CurveParams,
) -> Result<Comparison> {
    if ns.len() < 3 {
        return param("comparison sweep needs at least three group sizes");
    }
    let rows = ns
        .iter()
        .map(|&n| {
            let ours = energy_of(GroupOp::Distribution, &p.with_group(n, p.m.min(n).max(1)), energy, sizes)?;
            let x = n as f64;
            Ok(ComparisonRow {
                n,
                leap: leap.quadratic(x),
                ecpkc: ecpkc.linear(x),
                ours: ours.global_joules,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let col = |f: fn(&ComparisonRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let mean_ratio = rows.iter().map(|r| r.ours / r.ecpkc).sum::<f64>() / rows.len() as f64;
    Ok(Comparison {
        r2_leap: fit_r2(&xs, &col(|r| r.leap), 2)?,
        r2_ecpkc: fit_r2(&xs, &col(|r| r.ecpkc), 1)?,
        r2_ours: fit_r2(&xs, &col(|r| r.ours), 1)?,
        mean_ratio,
        rows,
    })
}

/// Coefficient of determination of a least-squares polynomial fit of `degree`.
pub fn fit_r2(xs: &[f64], ys: &[f64], degree: usize) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() <= degree {
        return param("fit needs more points than coefficients");
    }
    let scale = xs.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let k = degree + 1;
    let mut a = vec![vec![0.0; k + 1]; k];
    for (&x, &y) in xs.iter().zip(ys) {
        let powers: Vec<f64> = (0..k).map(|j| (x / scale).powi(j as i32)).collect();
        for i in 0..k {
            for j in 0..k {
                a[i][j] += powers[i] * powers[j];
            }
            a[i][k] += powers[i] * y;
        }
    }
    let coef = solve(a)?;
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let pred: f64 = coef.iter().enumerate().map(|(j, c)| c * (x / scale).powi(j as i32)).sum();
        ss_res += (y - pred).powi(2);
        ss_tot += (y - mean).powi(2);
    }
    Ok(if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot })
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(mut a: Vec<Vec<f64>>) -> Result<Vec<f64>> {
    let k = a.len();
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty");
        if a[pivot][col].abs() < 1e-300 {
            return param("singular fit");
        }
        a.swap(col, pivot);
        for row in col + 1..k {
            let f = a[row][col] / a[col][col];
            let (top, bottom) = a.split_at_mut(row);
            for (t, p) in bottom[0][col..=k].iter_mut().zip(&top[col][col..=k]) {
                *t -= f * p;
            }
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let s: f64 = (row + 1..k).map(|c| a[row][c] * x[c]).sum();
        x[row] = (a[row][k] - s) / a[row][row];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_polynomials_fit_perfectly() {
        let xs: Vec<f64> = (1..20).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x - 2.0 * x + 1.0).collect();
        assert!(fit_r2(&xs, &ys, 2).unwrap() > 1.0 - 1e-12);
        assert!(fit_r2(&xs, &ys, 1).unwrap() < 0.99);
        assert!(fit_r2(&xs[..2], &ys[..2], 2).is_err());
    }
}
