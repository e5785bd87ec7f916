use crate::blaschke::full_frame;
use crate::dsl::ImmersionDef;
use crate::numerics::find_root_bisection;

use super::DecomposeError;

#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub def: ImmersionDef,
    pub scale: f64,
}

/// Mean curvature of `c·φ` at `reference`.
fn curvature_at(def: &ImmersionDef, c: f64, reference: &[f64]) -> Result<f64, DecomposeError> {
    Ok(full_frame(&def.scaled(c), reference)?.mean_curvature)
}

/// Find `c` with `H(c·φ) = −1` at `reference` by bisection on `log c`.
pub fn normalize_homothety(def: &ImmersionDef, reference: &[f64]) -> Result<Normalized, DecomposeError> {
    let h0 = curvature_at(def, 1.0, reference)?;
    if !(h0 < -1e-8) {
        return Err(DecomposeError::NotHyperbolic { h: h0 });
    }
    let f = |x: f64| curvature_at(def, x.exp(), reference).map(|h| h + 1.0);
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let (mut flo, mut fhi) = (f(lo)?, f(hi)?);
    let mut expansions = 0;
    while flo * fhi > 0.0 {
        expansions += 1;
        if expansions > 40 {
            return Err(DecomposeError::Bracket);
        }
        lo -= 2.0 * (hi - lo);
        hi += 2.0 * (hi - lo);
        flo = f(lo)?;
        fhi = f(hi)?;
    }
    // H(cφ) = c^{-2(n+1)/(n+2)} H(φ) is increasing in c for H < 0
    if flo > fhi {
        return Err(DecomposeError::NotMonotone);
    }
    let failure = std::cell::Cell::new(None);
    let last = std::cell::Cell::new((lo, flo, hi, fhi));
    let root = find_root_bisection(
        |x| match f(x) {
            Ok(v) => {
                let (a, fa, b, fb) = last.get();
                if v < fa - 1e-12 || v > fb + 1e-12 {
                    failure.set(Some(DecomposeError::NotMonotone));
                }
                if v < 0.0 {
                    last.set((x, v, b, fb));
                } else {
                    last.set((a, fa, x, v));
                }
                v
            }
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        },
        lo,
        hi,
        1e-13,
    )?;
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let scale = root.exp();
    Ok(Normalized { def: def.scaled(scale), scale })
}
