//! Dense helpers for small `m x m` matrices (row-major `Vec<f64>` slices).
//!
//! The target dimension m is a runtime parameter and stays small, so plain
//! O(m^3) routines are used throughout.

/// y = A x for a row-major `m x m` matrix.
pub fn matvec(m: usize, a: &[f64], x: &[f64], y: &mut [f64]) {
    for r in 0..m {
        let row = &a[r * m..(r + 1) * m];
        y[r] = row.iter().zip(x).map(|(ar, xr)| ar * xr).sum();
    }
}

/// y = A^T x.
pub fn matvec_t(m: usize, a: &[f64], x: &[f64], y: &mut [f64]) {
    for (cy, item) in y.iter_mut().enumerate().take(m) {
        let mut acc = 0.0;
        for r in 0..m {
            acc += a[r * m + cy] * x[r];
        }
        *item = acc;
    }
}

/// C = A B.
pub fn matmul(m: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    for r in 0..m {
        for col in 0..m {
            let mut acc = 0.0;
            for k in 0..m {
                acc += a[r * m + k] * b[k * m + col];
            }
            c[r * m + col] = acc;
        }
    }
}

/// Skew part (A - A^T)/2, in place into `out`.
pub fn skew_part(m: usize, a: &[f64], out: &mut [f64]) {
    for r in 0..m {
        for c in 0..m {
            out[r * m + c] = 0.5 * (a[r * m + c] - a[c * m + r]);
        }
    }
}

pub fn identity(m: usize) -> Vec<f64> {
    let mut id = vec![0.0; m * m];
    for r in 0..m {
        id[r * m + r] = 1.0;
    }
    id
}

pub fn frobenius_norm(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solve A X = B in place for small dense systems (partial pivoting).
/// `a` is m x m, `b` is m x k; both are overwritten, solution left in `b`.
pub fn solve_in_place(m: usize, k: usize, a: &mut [f64], b: &mut [f64]) {
    for col in 0..m {
        let mut piv = col;
        for r in col + 1..m {
            if a[r * m + col].abs() > a[piv * m + col].abs() {
                piv = r;
            }
        }
        if piv != col {
            for c in 0..m {
                a.swap(col * m + c, piv * m + c);
            }
            for c in 0..k {
                b.swap(col * k + c, piv * k + c);
            }
        }
        let d = a[col * m + col];
        for r in 0..m {
            if r == col {
                continue;
            }
            let f = a[r * m + col] / d;
            if f == 0.0 {
                continue;
            }
            for c in col..m {
                a[r * m + c] -= f * a[col * m + c];
            }
            for c in 0..k {
                b[r * k + c] -= f * b[col * k + c];
            }
        }
    }
    for r in 0..m {
        let d = a[r * m + r];
        for c in 0..k {
            b[r * k + c] /= d;
        }
    }
}

/// Determinant by LU with partial pivoting.
pub fn det(m: usize, a: &[f64]) -> f64 {
    let mut lu = a.to_vec();
    let mut sign = 1.0;
    let mut d = 1.0;
    for col in 0..m {
        let mut piv = col;
        for r in col + 1..m {
            if lu[r * m + col].abs() > lu[piv * m + col].abs() {
                piv = r;
            }
        }
        if piv != col {
            for c in 0..m {
                lu.swap(col * m + c, piv * m + c);
            }
            sign = -sign;
        }
        let p = lu[col * m + col];
        if p == 0.0 {
            return 0.0;
        }
        d *= p;
        for r in col + 1..m {
            let f = lu[r * m + col] / p;
            for c in col..m {
                lu[r * m + c] -= f * lu[col * m + c];
            }
        }
    }
    sign * d
}

/// Cayley transform of a skew matrix S: (I - S/2)^{-1} (I + S/2).
/// Exactly orthogonal for exactly skew input.
pub fn cayley(m: usize, s: &[f64]) -> Vec<f64> {
    let mut lhs = identity(m);
    let mut rhs = identity(m);
    for r in 0..m {
        for c in 0..m {
            lhs[r * m + c] -= 0.5 * s[r * m + c];
            rhs[r * m + c] += 0.5 * s[r * m + c];
        }
    }
    solve_in_place(m, m, &mut lhs, &mut rhs);
    rhs
}

/// Inverse Cayley transform of an orthogonal T: 2 (T - I)(T + I)^{-1}.
/// Exactly skew for exactly orthogonal input (symmetrized for rounding).
pub fn cayley_inv(m: usize, t: &[f64]) -> Vec<f64> {
    let mut num = t.to_vec();
    let mut den = t.to_vec();
    for r in 0..m {
        num[r * m + r] -= 1.0;
        den[r * m + r] += 1.0;
    }
    // Solve X (T + I) = 2 (T - I)  <=>  (T + I)^T X^T = 2 (T - I)^T.
    let mut den_t = vec![0.0; m * m];
    let mut num_t = vec![0.0; m * m];
    for r in 0..m {
        for c in 0..m {
            den_t[r * m + c] = den[c * m + r];
            num_t[r * m + c] = 2.0 * num[c * m + r];
        }
    }
    solve_in_place(m, m, &mut den_t, &mut num_t);
    let mut out = vec![0.0; m * m];
    for r in 0..m {
        for c in 0..m {
            out[r * m + c] = 0.5 * (num_t[c * m + r] - num_t[r * m + c]);
        }
    }
    out
}

/// Eigen-decomposition of a symmetric m x m matrix by cyclic Jacobi.
/// Returns (eigenvalues, row-major eigenvector matrix V with rows = vectors).
pub fn symmetric_eigen(m: usize, a: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut s = a.to_vec();
    let mut v = identity(m);
    for _sweep in 0..64 {
        let mut off = 0.0;
        for r in 0..m {
            for c in r + 1..m {
                off += s[r * m + c] * s[r * m + c];
            }
        }
        if off.sqrt() < 1e-15 * (1.0 + frobenius_norm(&s)) {
            break;
        }
        for p in 0..m {
            for q in p + 1..m {
                let apq = s[p * m + q];
                if apq == 0.0 {
                    continue;
                }
                let app = s[p * m + p];
                let aqq = s[q * m + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..m {
                    let skp = s[k * m + p];
                    let skq = s[k * m + q];
                    s[k * m + p] = c * skp - sn * skq;
                    s[k * m + q] = sn * skp + c * skq;
                }
                for k in 0..m {
                    let spk = s[p * m + k];
                    let sqk = s[q * m + k];
                    s[p * m + k] = c * spk - sn * sqk;
                    s[q * m + k] = sn * spk + c * sqk;
                }
                for k in 0..m {
                    let vpk = v[p * m + k];
                    let vqk = v[q * m + k];
                    v[p * m + k] = c * vpk - sn * vqk;
                    v[q * m + k] = sn * vpk + c * vqk;
                }
            }
        }
    }
    let eig = (0..m).map(|r| s[r * m + r]).collect();
    (eig, v)
}

/// Nearest rotation to maximize tr(U^T M) over U in SO(m)
/// (orthogonal Procrustes with determinant correction).
pub fn procrustes_rotation(m: usize, cross: &[f64]) -> Vec<f64> {
    // M = A S B^T; U = A diag(1,..,1,det(A B^T)) B^T.
    // Obtain B from the eigenvectors of M^T M, then A = M B / sigma.
    let mut mtm = vec![0.0; m * m];
    for r in 0..m {
        for c in 0..m {
            let mut acc = 0.0;
            for k in 0..m {
                acc += cross[k * m + r] * cross[k * m + c];
            }
            mtm[r * m + c] = acc;
        }
    }
    let (eig, vrows) = symmetric_eigen(m, &mtm);
    // Sort descending for a well-defined basis.
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig[j].partial_cmp(&eig[i]).unwrap());
    let scale = frobenius_norm(cross).max(1e-300);
    // Columns of B are eigenvectors; build A column by column.
    let mut bt = vec![0.0; m * m]; // rows = eigenvectors b_i
    for (new_r, &old) in order.iter().enumerate() {
        bt[new_r * m..(new_r + 1) * m].copy_from_slice(&vrows[old * m..(old + 1) * m]);
    }
    let mut a_rows = vec![0.0; m * m]; // rows = left singular vectors a_i
    for i in 0..m {
        let sigma = eig[order[i]].max(0.0).sqrt();
        if sigma > 1e-12 * scale {
            for r in 0..m {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += cross[r * m + k] * bt[i * m + k];
                }
                a_rows[i * m + r] = acc / sigma;
            }
        } else {
            // Degenerate direction: extend with a coordinate axis, then
            // orthogonalize against the rows built so far.
            for seed in 0..m {
                for r in 0..m {
                    a_rows[i * m + r] = if r == seed { 1.0 } else { 0.0 };
                }
                for j in 0..i {
                    let dot: f64 = (0..m).map(|r| a_rows[i * m + r] * a_rows[j * m + r]).sum();
                    for r in 0..m {
                        a_rows[i * m + r] -= dot * a_rows[j * m + r];
                    }
                }
                let nrm: f64 = (0..m)
                    .map(|r| a_rows[i * m + r] * a_rows[i * m + r])
                    .sum::<f64>()
                    .sqrt();
                if nrm > 1e-6 {
                    for r in 0..m {
                        a_rows[i * m + r] /= nrm;
                    }
                    break;
                }
            }
        }
    }
    // U0 = A B^T (rows_a^T stacked): U0[r][c] = sum_i a_i[r] b_i[c].
    let build = |a_rows: &[f64]| {
        let mut u = vec![0.0; m * m];
        for r in 0..m {
            for c in 0..m {
                let mut acc = 0.0;
                for i in 0..m {
                    acc += a_rows[i * m + r] * bt[i * m + c];
                }
                u[r * m + c] = acc;
            }
        }
        u
    };
    let mut u = build(&a_rows);
    if det(m, &u) < 0.0 {
        // Flip the weakest singular direction.
        let last = m - 1;
        for r in 0..m {
            a_rows[last * m + r] = -a_rows[last * m + r];
        }
        u = build(&a_rows);
    }
    u
}
