use std::collections::{BTreeSet, HashMap};

use super::{DslError, Expr, ImmersionDef};

const RENAME_BUDGET: usize = 64;

/// One block of a warped embedding.
#[derive(Debug, Clone, Copy)]
pub enum Block<'a> {
    Factor(&'a ImmersionDef),
    /// A single constant coordinate (the "point" factor).
    Point,
}

/// Block multiplier `coefficient * exp(rate * axis)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockWeight {
    pub coefficient: f64,
    pub rate: f64,
}

fn warp(axis: &str, w: BlockWeight) -> Option<Expr> {
    let exponent = if w.rate == 0.0 {
        None
    } else if w.rate == 1.0 {
        Some(Expr::var(axis))
    } else if w.rate == -1.0 {
        Some(Expr::neg(Expr::var(axis)))
    } else {
        Some(Expr::mul(Expr::num(w.rate), Expr::var(axis)))
    };
    match (w.coefficient == 1.0, exponent) {
        (true, None) => None,
        (false, None) => Some(Expr::num(w.coefficient)),
        (true, Some(e)) => Some(Expr::exp(e)),
        (false, Some(e)) => Some(Expr::mul(Expr::num(w.coefficient), Expr::exp(e))),
    }
}

/// Assemble `(w_1(t) * f_1(p_1), ..., w_k(t) * f_k(p_k))` over the variables
/// `[axis_var] ++ vars(f_1) ++ ... ++ vars(f_k)`.
///
/// Factor variables that collide with the axis or with another factor's
/// variables get the suffix `_<block index>` (1-based), bumped until unused.
/// `new_vars`, when given, overrides all factor variable names in order.
pub fn build_scaled_embedding(
    name: &str,
    blocks: &[Block<'_>],
    weights: &[BlockWeight],
    axis_var: &str,
    new_vars: Option<&[String]>,
) -> Result<ImmersionDef, DslError> {
    if blocks.len() != weights.len() {
        return Err(DslError::Invalid(format!(
            "{} blocks but {} weights",
            blocks.len(),
            weights.len()
        )));
    }
    let mut occurrences: HashMap<&str, usize> = HashMap::new();
    for block in blocks {
        if let Block::Factor(def) = block {
            for v in def.vars() {
                *occurrences.entry(v.as_str()).or_default() += 1;
            }
        }
    }

    let mut used: BTreeSet<String> = BTreeSet::new();
    used.insert(axis_var.to_string());
    let mut vars = vec![axis_var.to_string()];
    let mut renames: Vec<HashMap<String, Expr>> = Vec::with_capacity(blocks.len());
    let mut override_iter = new_vars.map(|v| v.iter());

    for (i, block) in blocks.iter().enumerate() {
        let mut map = HashMap::new();
        if let Block::Factor(def) = block {
            for v in def.vars() {
                let target = if let Some(it) = override_iter.as_mut() {
                    it.next()
                        .cloned()
                        .ok_or_else(|| DslError::Invalid("too few replacement variable names".into()))?
                } else if v == axis_var || occurrences[v.as_str()] > 1 || used.contains(v) {
                    let mut k = i + 1;
                    let mut candidate = format!("{v}_{k}");
                    let mut tries = 0;
                    while used.contains(&candidate) || occurrences.contains_key(candidate.as_str()) {
                        tries += 1;
                        if tries >= RENAME_BUDGET {
                            return Err(DslError::RenameBudgetExhausted(v.clone()));
                        }
                        k += blocks.len();
                        candidate = format!("{v}_{k}");
                    }
                    candidate
                } else {
                    v.clone()
                };
                if !used.insert(target.clone()) {
                    return Err(DslError::Invalid(format!("variable '{target}' used twice")));
                }
                if &target != v {
                    map.insert(v.clone(), Expr::var(target.clone()));
                }
                vars.push(target);
            }
        }
        renames.push(map);
    }
    if let Some(mut it) = override_iter {
        if it.next().is_some() {
            return Err(DslError::Invalid("too many replacement variable names".into()));
        }
    }

    let mut components = Vec::new();
    for ((block, w), map) in blocks.iter().zip(weights).zip(&renames) {
        let factor = warp(axis_var, *w);
        match block {
            Block::Factor(def) => {
                for c in def.components() {
                    let c = if map.is_empty() { c.clone() } else { c.substitute(map) };
                    components.push(match &factor {
                        None => c,
                        Some(f) => Expr::mul(f.clone(), c),
                    });
                }
            }
            Block::Point => components.push(factor.unwrap_or(Expr::Const(1.0))),
        }
    }
    ImmersionDef::new(name, vars, components)
}
