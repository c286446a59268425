//! Dense matrix exponential (Padé-13 with scaling and squaring) and the
//! partial-pivot LU solver it rests on.

use super::matrix::{C64, ComplexMatrix, ONE};
use crate::error::{Error, Result};

/// Norm bound under which the order-13 Padé approximant is backward stable.
const THETA_13: f64 = 5.371920351148152;

/// Numerator coefficients of the order-13 Padé approximant to exp.
const B: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// exp(A) for a square complex matrix.
pub fn expm(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.require_square("expm")?;
    let n = a.rows();
    if n == 0 {
        return Ok(ComplexMatrix::zeros(0, 0));
    }

    let norm = a.one_norm();
    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.scale_re((0.5f64).powi(s as i32));

    let id = ComplexMatrix::identity(n);
    let a2 = scaled.matmul(&scaled);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    // U = A·(A6·(b13·A6 + b11·A4 + b9·A2) + b7·A6 + b5·A4 + b3·A2 + b1·I)
    let mut inner = a6.scale_re(B[13]);
    inner.axpy_re(B[11], &a4);
    inner.axpy_re(B[9], &a2);
    let mut u = a6.matmul(&inner);
    u.axpy_re(B[7], &a6);
    u.axpy_re(B[5], &a4);
    u.axpy_re(B[3], &a2);
    u.axpy_re(B[1], &id);
    let u = scaled.matmul(&u);

    // V = A6·(b12·A6 + b10·A4 + b8·A2) + b6·A6 + b4·A4 + b2·A2 + b0·I
    let mut inner = a6.scale_re(B[12]);
    inner.axpy_re(B[10], &a4);
    inner.axpy_re(B[8], &a2);
    let mut v = a6.matmul(&inner);
    v.axpy_re(B[6], &a6);
    v.axpy_re(B[4], &a4);
    v.axpy_re(B[2], &a2);
    v.axpy_re(B[0], &id);

    // (V − U) X = (V + U)
    let mut res = solve_linear(&(&v - &u), &(&v + &u))?;
    for _ in 0..s {
        res = res.matmul(&res);
    }
    Ok(res)
}

/// Solve A·X = B by LU factorization with partial pivoting.
pub fn solve_linear(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    a.require_square("solve_linear")?;
    let n = a.rows();
    if b.rows() != n {
        return Err(Error::ShapeMismatch {
            context: "solve_linear",
            expected: format!("{n} rhs rows"),
            got: format!("{}", b.rows()),
        });
    }
    let nrhs = b.cols();
    let mut lu = a.clone();
    let mut x = b.clone();

    for col in 0..n {
        // Partial pivot on the largest remaining entry in this column.
        let mut pivot_row = col;
        let mut pivot_mag = lu[(col, col)].norm_sqr();
        for r in (col + 1)..n {
            let m = lu[(r, col)].norm_sqr();
            if m > pivot_mag {
                pivot_mag = m;
                pivot_row = r;
            }
        }
        if pivot_mag == 0.0 {
            return Err(Error::NumericalFailure {
                what: format!("singular matrix in linear solve (pivot column {col})"),
            });
        }
        if pivot_row != col {
            for j in 0..n {
                let t = lu[(col, j)];
                lu[(col, j)] = lu[(pivot_row, j)];
                lu[(pivot_row, j)] = t;
            }
            for j in 0..nrhs {
                let t = x[(col, j)];
                x[(col, j)] = x[(pivot_row, j)];
                x[(pivot_row, j)] = t;
            }
        }
        let inv_pivot = ONE / lu[(col, col)];
        for r in (col + 1)..n {
            let factor = lu[(r, col)] * inv_pivot;
            if factor == C64::new(0.0, 0.0) {
                continue;
            }
            lu[(r, col)] = factor;
            for j in (col + 1)..n {
                let sub = factor * lu[(col, j)];
                lu[(r, j)] -= sub;
            }
            for j in 0..nrhs {
                let sub = factor * x[(col, j)];
                x[(r, j)] -= sub;
            }
        }
    }

    // Back substitution on the upper triangle.
    for col in (0..n).rev() {
        let inv_pivot = ONE / lu[(col, col)];
        for j in 0..nrhs {
            let mut acc = x[(col, j)];
            for k in (col + 1)..n {
                acc -= lu[(col, k)] * x[(k, j)];
            }
            x[(col, j)] = acc * inv_pivot;
        }
    }
    Ok(x)
}
