//! Dense linear algebra over jets, pivoting on constant terms.

use super::{Jet, JetError};

pub(crate) type JetMatrix = Vec<Vec<Jet>>;

fn eliminate(a: &mut JetMatrix, rhs: &mut [Vec<Jet>]) -> Result<Jet, JetError> {
    let n = a.len();
    let proto = &a[0][0];
    let mut det = Jet::constant(proto.space(), proto.order(), 1.0);
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].value().abs().total_cmp(&a[j][col].value().abs()))
            .expect("non-empty");
        if a[piv][col].value() == 0.0 {
            return Err(JetError::DivisionByZero);
        }
        if piv != col {
            a.swap(piv, col);
            for r in rhs.iter_mut() {
                r.swap(piv, col);
            }
            det = det.scale(-1.0);
        }
        det = &det * &a[col][col];
        let inv = a[col][col].recip()?;
        for row in col + 1..n {
            let factor = &a[row][col] * &inv;
            for k in col..n {
                let t = &factor * &a[col][k];
                a[row][k] = &a[row][k] - &t;
            }
            for r in rhs.iter_mut() {
                let t = &factor * &r[col];
                r[row] = &r[row] - &t;
            }
        }
    }
    for r in rhs.iter_mut() {
        for row in (0..n).rev() {
            let mut acc = r[row].clone();
            for k in row + 1..n {
                acc = &acc - &(&a[row][k] * &r[k]);
            }
            r[row] = acc.div_jet(&a[row][row])?;
        }
    }
    Ok(det)
}

pub(crate) fn det(a: &JetMatrix) -> Result<Jet, JetError> {
    let mut m = a.clone();
    match eliminate(&mut m, &mut []) {
        Ok(d) => Ok(d),
        Err(JetError::DivisionByZero) => {
            let p = &a[0][0];
            Ok(Jet::constant(p.space(), p.order(), 0.0))
        }
        Err(e) => Err(e),
    }
}

/// Solve `A x = b` for each right-hand side in `rhs`.
pub(crate) fn solve(a: &JetMatrix, rhs: &[Vec<Jet>]) -> Result<Vec<Vec<Jet>>, JetError> {
    let mut m = a.clone();
    let mut r = rhs.to_vec();
    eliminate(&mut m, &mut r)?;
    Ok(r)
}

pub(crate) fn inverse(a: &JetMatrix) -> Result<JetMatrix, JetError> {
    let n = a.len();
    let p = &a[0][0];
    let cols: Vec<Vec<Jet>> = (0..n)
        .map(|j| (0..n).map(|i| Jet::constant(p.space(), p.order(), if i == j { 1.0 } else { 0.0 })).collect())
        .collect();
    let x = solve(a, &cols)?;
    Ok((0..n).map(|i| (0..n).map(|j| x[j][i].clone()).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::JetSpace;

    #[test]
    fn determinant_and_inverse_of_jet_matrix() {
        let s = JetSpace::get(2).unwrap();
        let x = Jet::variable(s, 3, 0, 0.3);
        let y = Jet::variable(s, 3, 1, -0.2);
        let one = Jet::constant(s, 3, 1.0);
        let a = vec![vec![&one + &(&x * &x), y.clone()], vec![x.clone(), one.add_scalar(1.0)]];
        let d = det(&a).unwrap();
        // det = 2(1+x^2) - xy
        let expect = &(&one + &(&x * &x)).scale(2.0) - &(&x * &y);
        for (u, v) in d.coeffs().iter().zip(expect.coeffs()) {
            assert!((u - v).abs() < 1e-14);
        }
        let inv = inverse(&a).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = Jet::constant(s, 3, 0.0);
                for k in 0..2 {
                    acc = &acc + &(&a[i][k] * &inv[k][j]);
                }
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((acc.add_scalar(-target)).max_abs() < 1e-13);
            }
        }
    }

    #[test]
    fn singular_determinant_is_zero() {
        let s = JetSpace::get(1).unwrap();
        let z = Jet::constant(s, 2, 0.0);
        let a = vec![vec![z.clone(), z.clone()], vec![z.clone(), z.clone()]];
        assert_eq!(det(&a).unwrap().value(), 0.0);
        assert!(solve(&a, &[vec![z.clone(), z]]).is_err());
    }
}
