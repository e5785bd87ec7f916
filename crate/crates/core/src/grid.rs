//! Rectangular sample grids over parameter space.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn values(&self) -> Vec<f64> {
        if self.count <= 1 {
            return vec![0.5 * (self.min + self.max)];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| if i + 1 == self.count { self.max } else { self.min + step * i as f64 }).collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("malformed grid axis '{0}' (expected min:max:count)")]
    Malformed(String),
    #[error("grid has {got} axes, immersion has {expected} variables")]
    Arity { expected: usize, got: usize },
    #[error("unknown grid '{0}'")]
    Unknown(String),
    #[error("grid '{name}' is not k^{dim} points for any k")]
    NotPower { name: String, dim: usize },
}

/// Tensor-product grid; points are enumerated row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub axes: Vec<GridAxis>,
}

impl Grid {
    pub fn new(axes: Vec<GridAxis>) -> Grid {
        Grid { axes }
    }

    /// `count` points per axis over `[min, max]^dim`.
    pub fn cube(dim: usize, min: f64, max: f64, count: usize) -> Grid {
        Grid { axes: vec![GridAxis { min, max, count }; dim] }
    }

    /// `g<N>` with `N = k^dim` points over `[-0.3, 0.3]^dim`.
    pub fn named(name: &str, dim: usize) -> Result<Grid, GridError> {
        let total: usize = name
            .strip_prefix('g')
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| GridError::Unknown(name.to_string()))?;
        let k = (1..=total).find(|k| k.pow(dim as u32) >= total).unwrap_or(1);
        if k.pow(dim as u32) != total {
            return Err(GridError::NotPower { name: name.to_string(), dim });
        }
        Ok(Grid::cube(dim, -0.3, 0.3, k))
    }

    /// Inline form `"min:max:count,min:max:count,..."`.
    pub fn parse(text: &str) -> Result<Grid, GridError> {
        let axes = text
            .split(',')
            .map(|part| {
                let f: Vec<&str> = part.trim().split(':').collect();
                let bad = || GridError::Malformed(part.to_string());
                if f.len() != 3 {
                    return Err(bad());
                }
                let min: f64 = f[0].trim().parse().map_err(|_| bad())?;
                let max: f64 = f[1].trim().parse().map_err(|_| bad())?;
                let count: usize = f[2].trim().parse().map_err(|_| bad())?;
                if count == 0 || !min.is_finite() || !max.is_finite() {
                    return Err(bad());
                }
                Ok(GridAxis { min, max, count })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Grid { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_arity(&self, expected: usize) -> Result<(), GridError> {
        if self.dim() == expected {
            Ok(())
        } else {
            Err(GridError::Arity { expected, got: self.dim() })
        }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        let vals: Vec<Vec<f64>> = self.axes.iter().map(GridAxis::values).collect();
        let mut out = vec![Vec::new()];
        for v in &vals {
            out = out.into_iter().flat_map(|p| v.iter().map(move |x| {
                let mut q = p.clone();
                q.push(*x);
                q
            })).collect();
        }
        out
    }
}
