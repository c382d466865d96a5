//! Staged computation with content-hash caching.
//!
//! Every artifact name embeds the hash of the config sections its stage
//! reads, so a rerun with an unchanged section finds its file. The α table
//! and the Carleson/square-function values are loaded back from cache; the
//! cheap geometric stages are rebuilt and rewritten (deterministically).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alpha::{alpha_numbers, AlphaTable};
use crate::config::{content_hash, dataset_hash, RunConfig};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::lattice::{build_cubes, build_whitney, interior_cubes, BoundingBox, CubeTree, Whitney};
use crate::measures::{generate, DiscreteMeasure};
use crate::sqfn::{carleson_mod, carleson_t1, sqfn_norm, FunctionalReport, SupOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Gen,
    Cubes,
    Whitney,
    Alpha,
    Sqfn,
    Verify,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Gen => "gen",
            Stage::Cubes => "cubes",
            Stage::Whitney => "whitney",
            Stage::Alpha => "alpha",
            Stage::Sqfn => "sqfn",
            Stage::Verify => "verify",
        }
    }
}

/// Attach the stage name to an error.
pub fn at<T>(stage: Stage, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        e @ Error::Stage { .. } => e,
        e => Error::Stage {
            stage: stage.name(),
            source: Box::new(e),
        },
    })
}

/// Measure, cube tree (with the measured `M`) and Whitney decomposition.
pub struct Geometry {
    pub mu: DiscreteMeasure,
    pub tree: CubeTree,
    pub whitney: Whitney,
}

impl Geometry {
    /// Interior cubes at every level of the tree.
    pub fn interior(&self) -> Vec<usize> {
        (self.tree.j_min()..=self.tree.j_max())
            .flat_map(|j| interior_cubes(&self.mu, &self.tree, j))
            .collect()
    }

    /// Interior roots, their descendants and their ancestors: every cube a
    /// packing sum, `U_1` or a bilateral check can touch.
    pub fn alpha_cubes(&self) -> Vec<usize> {
        let mut set = BTreeSet::new();
        for r in self.interior() {
            if set.contains(&r) {
                continue;
            }
            set.extend(self.tree.descendants(r));
            let mut cur = self.tree.cubes()[r].parent;
            while let Some(p) = cur {
                if !set.insert(p) {
                    break;
                }
                cur = self.tree.cubes()[p].parent;
            }
        }
        set.into_iter().collect()
    }
}

/// Carleson functionals per root and square-function ratios per sign vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Functionals {
    pub t1: Vec<FunctionalReport>,
    pub modified: Vec<FunctionalReport>,
    pub sqfn: Vec<FunctionalReport>,
}

/// `m` evenly spaced entries of `ids` (all of them when `m >= len`).
pub fn spread(ids: &[usize], m: usize) -> Vec<usize> {
    if m >= ids.len() {
        return ids.to_vec();
    }
    (0..m)
        .map(|k| ids[(2 * k + 1) * ids.len() / (2 * m)])
        .collect()
}

/// Random `±1` vector number `k` for a run seed.
pub fn sign_vector(len: usize, seed: u64, k: usize) -> Vec<f64> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(k as u64 + 1)));
    (0..len)
        .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

pub struct Pipeline {
    config: RunConfig,
    out: PathBuf,
}

impl Pipeline {
    /// `out` overrides `config.output_dir` without entering the recorded
    /// config.
    pub fn new(config: RunConfig, out: Option<&Path>) -> Result<Pipeline> {
        config.validate()?;
        let out = out
            .map(Path::to_path_buf)
            .unwrap_or_else(|| config.output_dir.clone());
        std::fs::create_dir_all(&out)?;
        Ok(Pipeline { config, out })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    fn path(&self, stage: Stage, hash: &str, ext: &str) -> PathBuf {
        self.out.join(format!("{}-{hash}.{ext}", stage.name()))
    }

    fn gen_hash(&self) -> Result<String> {
        dataset_hash(&self.config.dataset)
    }

    fn cubes_hash(&self) -> Result<String> {
        let l = &self.config.levels;
        content_hash(&(self.gen_hash()?, l.j_min, l.j_max))
    }

    fn whitney_hash(&self) -> Result<String> {
        content_hash(&(self.cubes_hash()?, self.config.levels.floor()))
    }

    fn alpha_hash(&self) -> Result<String> {
        content_hash(&(self.whitney_hash()?, &self.config.alpha))
    }

    fn sqfn_hash(&self) -> Result<String> {
        let c = &self.config;
        content_hash(&(
            self.alpha_hash()?,
            &c.kernel,
            &c.quadrature,
            c.constants.band,
            c.suite.random_planes,
            c.suite.sign_vectors,
            c.suite.roots_per_level,
            c.seed,
        ))
    }

    /// Hash of everything the report depends on.
    pub fn verify_hash(&self) -> Result<String> {
        content_hash(&(self.sqfn_hash()?, &self.config))
    }

    pub fn measure(&self) -> Result<DiscreteMeasure> {
        at(
            Stage::Gen,
            (|| {
                let mu = generate(&self.config.dataset)?;
                self.config.check_resolution(mu.resolution())?;
                mu.write_csv(&self.path(Stage::Gen, &self.gen_hash()?, "csv"))?;
                Ok(mu)
            })(),
        )
    }

    pub fn cubes(&self, mu: &DiscreteMeasure) -> Result<CubeTree> {
        at(
            Stage::Cubes,
            (|| {
                let l = &self.config.levels;
                let tree = build_cubes(mu, l.j_min, l.j_max)?;
                std::fs::write(
                    self.path(Stage::Cubes, &self.cubes_hash()?, "json"),
                    tree.to_json()?,
                )?;
                Ok(tree)
            })(),
        )
    }

    /// Box: twice the dataset's bounding box, padded by a quarter diameter
    /// so that flat data gets cells above and below.
    pub fn whitney(&self, mu: &DiscreteMeasure, tree: &CubeTree) -> Result<Whitney> {
        at(
            Stage::Whitney,
            (|| {
                let bbox = BoundingBox::of(mu).enlarged(2.0, 0.25 * mu.diameter());
                let w = build_whitney(mu, tree, &bbox, self.config.levels.floor())?;
                w.write_csv(
                    &self.path(Stage::Whitney, &self.whitney_hash()?, "csv"),
                    tree,
                )?;
                Ok(w)
            })(),
        )
    }

    pub fn geometry(&self) -> Result<Geometry> {
        let mu = self.measure()?;
        let tree = self.cubes(&mu)?;
        let whitney = self.whitney(&mu, &tree)?;
        let tree = tree.with_engulfing(whitney.engulfing);
        Ok(Geometry { mu, tree, whitney })
    }

    /// α̂ for [`Geometry::alpha_cubes`], from cache when present.
    pub fn alpha(&self, g: &Geometry) -> Result<AlphaTable> {
        at(
            Stage::Alpha,
            (|| {
                let hash = content_hash(&(self.alpha_hash()?, g.tree.engulfing()))?;
                let cache = self.path(Stage::Alpha, &hash, "json");
                if let Some(t) = read_cache::<AlphaTable>(&cache) {
                    return Ok(t);
                }
                let ids = g.alpha_cubes();
                let mut table = AlphaTable::new(g.tree.len());
                for r in alpha_numbers(&ids, &g.mu, &g.tree, &self.config.alpha)? {
                    table.insert(r);
                }
                table.write_csv(&self.path(Stage::Alpha, &hash, "csv"))?;
                write_json(&cache, &table)?;
                Ok(table)
            })(),
        )
    }

    pub fn kernel(&self, g: &Geometry) -> Result<Kernel> {
        let s = self.config.kernel.build(g.mu.n())?;
        s.check_ambient(g.mu.d())?;
        Ok(s)
    }

    pub fn sup_options(&self) -> SupOptions {
        SupOptions {
            band: self.config.constants.band,
            random_planes: self.config.suite.random_planes,
            seed: self.config.seed,
        }
    }

    /// Carleson functionals on up to `roots_per_level` interior roots per
    /// level and the square-function ratio for each sign vector.
    pub fn functionals(&self, g: &Geometry, table: &AlphaTable) -> Result<Functionals> {
        at(
            Stage::Sqfn,
            (|| {
                let hash = content_hash(&(self.sqfn_hash()?, g.tree.engulfing()))?;
                let cache = self.path(Stage::Sqfn, &hash, "json");
                if let Some(f) = read_cache::<Functionals>(&cache) {
                    return Ok(f);
                }
                let c = &self.config;
                let s = self.kernel(g)?;
                let sup = self.sup_options();
                let mut t1 = Vec::new();
                let mut modified = Vec::new();
                for j in g.tree.j_min()..=g.tree.j_max() {
                    let roots = spread(&interior_cubes(&g.mu, &g.tree, j), c.suite.roots_per_level);
                    for r in roots {
                        t1.push(carleson_t1(
                            r,
                            &s,
                            &g.mu,
                            &g.tree,
                            &g.whitney,
                            &c.quadrature,
                        )?);
                        modified.push(carleson_mod(
                            r,
                            &s,
                            &g.mu,
                            &g.tree,
                            &g.whitney,
                            Some(table),
                            &c.quadrature,
                            &sup,
                        )?);
                    }
                }
                let mut sq = Vec::new();
                for k in 0..c.suite.sign_vectors {
                    let f = sign_vector(g.mu.len(), c.seed, k);
                    let mut rep = sqfn_norm(&s, &g.mu, &f, &g.whitney, &c.quadrature)?;
                    rep.index = k;
                    sq.push(rep);
                }
                let f = Functionals {
                    t1,
                    modified,
                    sqfn: sq,
                };
                write_json(&cache, &f)?;
                Ok(f)
            })(),
        )
    }
}

fn read_cache<T: for<'de> Deserialize<'de>>(path: &Path) -> Option<T> {
    let text = std::fs::read_to_string(path).ok()?;
    serde_json::from_str(&text).ok()
}

/// Write through a temporary name so an interrupted run leaves no partial
/// cache entry.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
