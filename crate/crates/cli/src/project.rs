use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use calabi_core::dsl::{parse_file, ImmersionDef};
use calabi_core::grid::{Grid, GridAxis};
use serde::Deserialize;

use crate::Usage;

/// Project file: immersion sources, named grids and default options.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    #[serde(default)]
    pub immersions: Vec<PathBuf>,
    #[serde(default)]
    pub grids: BTreeMap<String, Vec<GridAxis>>,
    #[serde(default)]
    pub options: ProjectOptions,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectOptions {
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

/// A loaded project with every immersion parsed.
#[derive(Debug, Default)]
pub struct Project {
    pub config: ProjectConfig,
    pub defs: BTreeMap<String, (PathBuf, ImmersionDef)>,
}

impl Project {
    pub fn load(path: &Path) -> Result<Project> {
        let text = std::fs::read_to_string(path).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
        let config: ProjectConfig =
            toml::from_str(&text).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut defs = BTreeMap::new();
        for rel in &config.immersions {
            let file = base.join(rel);
            for def in read_defs(&file)? {
                if let Some((other, _)) = defs.get(def.name()) {
                    let other: &PathBuf = other;
                    bail!(Usage(format!("immersion '{}' is defined in {} and {}", def.name(), other.display(), file.display())));
                }
                defs.insert(def.name().to_string(), (file.clone(), def));
            }
        }
        Ok(Project { config, defs })
    }

    pub fn grid(&self, name: &str, dim: usize) -> Result<Grid> {
        let grid = match self.config.grids.get(name) {
            Some(axes) => Grid::new(axes.clone()),
            None if name.contains(':') => Grid::parse(name).map_err(|e| Usage(e.to_string()))?,
            None => Grid::named(name, dim).map_err(|e| Usage(e.to_string()))?,
        };
        grid.check_arity(dim).map_err(|e| Usage(e.to_string()))?;
        Ok(grid)
    }

    /// Resolves `path`, `path#name` or a project immersion name.
    pub fn immersion(&self, spec: &str, select: Option<&str>) -> Result<(String, ImmersionDef)> {
        let (path, name) = match spec.split_once('#') {
            Some((p, n)) => (p, Some(n)),
            None => (spec, select),
        };
        if !Path::new(path).exists() {
            if let Some((file, def)) = self.defs.get(spec) {
                return Ok((file.display().to_string(), def.clone()));
            }
            bail!(Usage(format!("no such file or project immersion: {spec}")));
        }
        let mut defs = read_defs(Path::new(path))?;
        let def = match name {
            Some(n) => {
                let i = defs
                    .iter()
                    .position(|d| d.name() == n)
                    .ok_or_else(|| Usage(format!("{path} has no immersion '{n}'")))?;
                defs.swap_remove(i)
            }
            None if defs.len() == 1 => defs.remove(0),
            None => {
                let names: Vec<&str> = defs.iter().map(|d| d.name()).collect();
                bail!(Usage(format!("{path} holds several immersions ({}); select one with path#name", names.join(", "))))
            }
        };
        Ok((path.to_string(), def))
    }
}

fn read_defs(path: &Path) -> Result<Vec<ImmersionDef>> {
    let text = std::fs::read_to_string(path).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
    let defs = parse_file(&text).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
    if defs.is_empty() {
        bail!(Usage(format!("{}: no immersion found", path.display())));
    }
    Ok(defs)
}
