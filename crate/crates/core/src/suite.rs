//! Verification suite: runs every stage, evaluates the proof-level checks
//! and folds them into a [`SuiteReport`] with empirical constants,
//! findings and asserted invariants.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alpha::{alpha_packing, AlphaTable};
use crate::config::{Calibration, RunConfig};
use crate::error::Result;
use crate::kernels::{audit_kernel, AuditReport, KernelSpec};
use crate::lattice::{interior_cubes, CubeStats};
use crate::measures::{estimate_adr, AdrBounds, DatasetSpec};
use crate::pipeline::{at, write_atomic, write_json, Functionals, Geometry, Pipeline, Stage};
use crate::verify::{check_bilat, check_pointwise, BilatCheck, Branch, PointCheck, PointContext};

pub const REPORT_SCHEMA: &str = "urlab-report/1";

/// Two consecutive `C_pack` increments at least this large, the second at
/// least half the first, mark the packing sum as growing without bound.
pub const UNBOUNDED_INCREMENT: f64 = 0.05;

pub const PACKING_UNBOUNDED: &str = "packing unbounded: UR hypothesis fails";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constant {
    pub value: Option<f64>,
    pub samples: usize,
}

impl Constant {
    fn max_of(values: impl IntoIterator<Item = f64>) -> Constant {
        let mut value: Option<f64> = None;
        let mut samples = 0;
        for v in values {
            samples += 1;
            value = Some(match value {
                Some(m) if !(v > m) && !v.is_nan() => m,
                _ => v,
            });
        }
        Constant { value, samples }
    }

    fn finite(&self) -> bool {
        self.value.map_or(true, f64::is_finite)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub spec: DatasetSpec,
    pub d: usize,
    pub n: usize,
    pub atoms: usize,
    pub resolution: f64,
    pub diameter: f64,
    pub total_mass: f64,
    /// Sampled ADR bounds, absent when no scale fits the dataset.
    pub adr: Option<AdrBounds>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelInfo {
    pub spec: KernelSpec,
    pub beta: f64,
    pub size_constant: f64,
    pub holder_constant: f64,
    pub plane_cancellation: bool,
    pub audit: AuditReport,
    pub audit_passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelCount {
    pub level: i32,
    pub cubes: usize,
    pub interior: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildInfo {
    pub version: String,
    pub levels: Vec<LevelCount>,
    pub cube_stats: CubeStats,
    /// `M` measured on the Whitney association.
    pub engulfing: f64,
    pub whitney_cells: usize,
    pub whitney_unassociated: usize,
    pub truncated_cells: usize,
    pub truncated_volume: f64,
    pub comparability: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaLevel {
    pub level: i32,
    pub cubes: usize,
    pub min: f64,
    pub median: f64,
    pub max: f64,
    /// Cubes with `α̂ < c0`.
    pub small: usize,
    /// `min c_Q` over the small ones.
    pub kappa: Option<f64>,
    pub max_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSummary {
    pub levels: Vec<AlphaLevel>,
    pub max_lp_gap: f64,
    pub max_plane_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingDepth {
    pub depth: i32,
    /// `max_R Σ_{Q ⊆ R, level <= depth} α̂(Q)² μ(Q) / μ(R)`.
    pub value: f64,
    pub roots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub samples: usize,
    pub small_alpha: usize,
    pub large_alpha: usize,
    pub degenerate: usize,
    pub degenerate_fraction: f64,
    pub clear_of_plane: usize,
    pub levels: [i32; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilatSummary {
    pub checked: usize,
    pub failed: usize,
    pub non_vacuous: usize,
    /// Frozen `C_bilat` the checks were run against.
    pub asserted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c_main: Constant,
    pub c_triv: Constant,
    pub c_pack: Constant,
    pub c_t1: Constant,
    pub c_mod: Constant,
    pub c_sf: Constant,
    /// Fit `max (sup_ratio - floor) / α̂^{1/(n+1)}` on this run.
    pub c_bilat: Constant,
    /// `min c_Q` over small-α cubes.
    pub kappa: Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub t1_max_bound: f64,
    pub mod_max_bound: f64,
    pub sqfn_max_bound: f64,
    pub warnings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Invariant {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema: String,
    pub config: RunConfig,
    pub dataset: DatasetInfo,
    pub kernel: KernelInfo,
    pub build: BuildInfo,
    pub alpha: AlphaSummary,
    pub packing: Vec<PackingDepth>,
    pub functionals: Functionals,
    pub point_checks: Vec<PointCheck>,
    pub point_summary: PointSummary,
    pub bilat: Vec<BilatCheck>,
    pub bilat_summary: BilatSummary,
    pub constants: Constants,
    pub truncation: Truncation,
    pub findings: Vec<String>,
    pub invariants: Vec<Invariant>,
    pub passed: bool,
}

impl SuiteReport {
    pub fn invariant(&self, name: &str) -> Option<&Invariant> {
        self.invariants.iter().find(|i| i.name == name)
    }

    pub fn packing_at(&self, depth: i32) -> Option<f64> {
        self.packing
            .iter()
            .find(|p| p.depth == depth)
            .map(|p| p.value)
    }
}

/// Run every stage of `config` and write `report.json`, `summary.csv` and
/// `ratios.svg` into the output directory (`out` when given).
pub fn run_suite(config: &RunConfig, out: Option<&Path>) -> Result<SuiteReport> {
    let p = Pipeline::new(config.clone(), out)?;
    let report = evaluate(&p)?;
    at(Stage::Verify, write_outputs(&report, p.out_dir()))?;
    Ok(report)
}

/// Run the calibration suite and fit its constants.
pub fn calibrate(out: Option<&Path>) -> Result<Calibration> {
    Ok(calibration_from(&run_suite(
        &crate::config::calibration_config(),
        out,
    )?))
}

/// Fit the calibration constants from a finished calibration suite.
pub fn calibration_from(report: &SuiteReport) -> Calibration {
    let defaults = Calibration::default();
    Calibration {
        kernel: report.config.kernel.clone(),
        bilat_fit: report.constants.c_bilat.value.unwrap_or(0.0),
        sf_fit: report.constants.c_sf.value.unwrap_or(0.0),
        main_fit: report.constants.c_main.value.unwrap_or(0.0),
        ..defaults
    }
}

fn median(sorted: &[f64]) -> f64 {
    let k = sorted.len();
    if k % 2 == 1 {
        sorted[k / 2]
    } else {
        0.5 * (sorted[k / 2 - 1] + sorted[k / 2])
    }
}

fn dataset_info(g: &Geometry, spec: &DatasetSpec) -> DatasetInfo {
    let mu = &g.mu;
    let lo = 10.0 * mu.resolution();
    let hi = (mu.diameter() + mu.resolution()) / 4.0;
    let adr = (lo < hi)
        .then(|| {
            let scales: Vec<f64> = (0..4)
                .map(|k| lo * (hi / lo).powf(k as f64 / 3.0))
                .collect();
            estimate_adr(mu, &scales).ok()
        })
        .flatten();
    DatasetInfo {
        spec: spec.clone(),
        d: mu.d(),
        n: mu.n(),
        atoms: mu.len(),
        resolution: mu.resolution(),
        diameter: mu.diameter(),
        total_mass: mu.total_mass(),
        adr,
    }
}

fn build_info(g: &Geometry) -> BuildInfo {
    let t = &g.tree;
    let w = &g.whitney;
    BuildInfo {
        version: env!("CARGO_PKG_VERSION").to_string(),
        levels: (t.j_min()..=t.j_max())
            .map(|j| LevelCount {
                level: j,
                cubes: t.level(j).len(),
                interior: interior_cubes(&g.mu, t, j).len(),
            })
            .collect(),
        cube_stats: t.stats(g.mu.n()),
        engulfing: t.engulfing(),
        whitney_cells: w.cells.len(),
        whitney_unassociated: w.unassociated().count(),
        truncated_cells: w.truncated.len(),
        truncated_volume: w.truncated_volume(),
        comparability: w.comparability,
    }
}

fn alpha_summary(g: &Geometry, table: &AlphaTable, c0: f64) -> AlphaSummary {
    let mut levels = Vec::new();
    for j in g.tree.j_min()..=g.tree.j_max() {
        let rs: Vec<_> = g
            .tree
            .level(j)
            .iter()
            .filter_map(|&q| table.get(q))
            .collect();
        if rs.is_empty() {
            continue;
        }
        let mut a: Vec<f64> = rs.iter().map(|r| r.alpha).collect();
        a.sort_by(f64::total_cmp);
        let small: Vec<_> = rs.iter().filter(|r| r.alpha < c0).collect();
        levels.push(AlphaLevel {
            level: j,
            cubes: rs.len(),
            min: a[0],
            median: median(&a),
            max: a[a.len() - 1],
            small: small.len(),
            kappa: small.iter().map(|r| r.constant).min_by(f64::total_cmp),
            max_constant: rs.iter().map(|r| r.constant).fold(0.0, f64::max),
        });
    }
    AlphaSummary {
        levels,
        max_lp_gap: table.iter().map(|r| r.lp_gap).fold(0.0, f64::max),
        max_plane_residual: table
            .iter()
            .map(|r| r.plane_opt_residual)
            .fold(0.0, f64::max),
    }
}

fn packing(g: &Geometry, table: &AlphaTable) -> Result<Vec<PackingDepth>> {
    let roots = g.interior();
    let Some(lo) = roots.iter().map(|&r| g.tree.cubes()[r].level).min() else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for k in lo..=g.tree.j_max() {
        let mut value: f64 = 0.0;
        let mut count = 0;
        for &r in &roots {
            let level = g.tree.cubes()[r].level;
            if level > k {
                continue;
            }
            value = value.max(alpha_packing(r, table, &g.tree, Some(k - level))?);
            count += 1;
        }
        out.push(PackingDepth {
            depth: k,
            value,
            roots: count,
        });
    }
    Ok(out)
}

/// Non-decaying increments of `C_pack` over the last two depths.
pub fn packing_unbounded(p: &[PackingDepth]) -> bool {
    if p.len() < 3 {
        return false;
    }
    let k = p.len();
    let a = p[k - 2].value - p[k - 3].value;
    let b = p[k - 1].value - p[k - 2].value;
    a >= UNBOUNDED_INCREMENT && b >= UNBOUNDED_INCREMENT && b >= 0.5 * a
}

fn check_range(g: &Geometry, cfg: &RunConfig, finest: i32) -> [i32; 2] {
    let lo = (g.tree.j_min()..=g.tree.j_max())
        .find(|&j| !interior_cubes(&g.mu, &g.tree, j).is_empty())
        .unwrap_or(g.tree.j_max());
    let [a, b] = cfg.suite.check_levels.unwrap_or([lo, finest]);
    [a.max(g.tree.j_min()), b.min(finest)]
}

/// Sample `(Q, x)`: a uniform interior cube with a Whitney region, a
/// uniform cell of it and a uniform midpoint node of its subdivision.
fn sample_points(g: &Geometry, cfg: &RunConfig, levels: [i32; 2]) -> Vec<(usize, Vec<f64>)> {
    let cands: Vec<usize> = (levels[0]..=levels[1])
        .flat_map(|j| interior_cubes(&g.mu, &g.tree, j))
        .filter(|&q| !g.whitney.region(q).is_empty())
        .collect();
    if cands.is_empty() {
        return Vec::new();
    }
    let d = g.mu.d();
    let m = cfg.quadrature.whitney_subdiv;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..cfg.suite.point_samples)
        .map(|_| {
            let q = cands[rng.gen_range(0..cands.len())];
            let region = g.whitney.region(q);
            let cell = &g.whitney.cells[region[rng.gen_range(0..region.len())]];
            let h = cell.side() / m as f64;
            let x = (0..d)
                .map(|k| cell.corner[k] + (rng.gen_range(0..m) as f64 + 0.5) * h)
                .collect();
            (q, x)
        })
        .collect()
}

fn evaluate(p: &Pipeline) -> Result<SuiteReport> {
    let cfg = p.config();
    let g = p.geometry()?;
    let table = p.alpha(&g)?;
    let kernel = at(Stage::Sqfn, p.kernel(&g))?;
    let functionals = p.functionals(&g, &table)?;
    at(
        Stage::Verify,
        (|| {
            let c0 = cfg.constants.c0;
            let n = g.mu.n();
            let audit = audit_kernel(&kernel, cfg.suite.audit_samples, cfg.seed)?;
            let finest = g.tree.j_max().min(g.whitney.j_floor - 1);
            let levels = check_range(&g, cfg, finest);

            let sup = p.sup_options();
            let ctx = PointContext {
                kernel: &kernel,
                mu: &g.mu,
                table: &table,
                tree: &g.tree,
                whitney: &g.whitney,
                quadrature: &cfg.quadrature,
                sup: &sup,
                constants: &cfg.constants,
            };
            let samples = sample_points(&g, cfg, levels);
            let mut checks = samples
                .par_iter()
                .map(|(q, x)| check_pointwise(*q, x, &ctx))
                .collect::<Result<Vec<_>>>()?;
            checks.sort_by_key(|c| (c.level, c.index));

            let c_bilat = cfg.calibration.c_bilat();
            let bilat_cubes: Vec<usize> = (levels[0]..=levels[1])
                .flat_map(|j| interior_cubes(&g.mu, &g.tree, j))
                .filter(|&q| table.get(q).is_some_and(|a| a.alpha < c0))
                .collect();
            let bilat = bilat_cubes
                .par_iter()
                .map(|&q| check_bilat(q, &g.mu, &table, &g.tree, c0, c_bilat))
                .collect::<Result<Vec<_>>>()?;

            let pack = packing(&g, &table)?;
            let small: Vec<&PointCheck> = checks
                .iter()
                .filter(|c| c.branch == Branch::SmallAlpha)
                .collect();
            let degenerate = small.iter().filter(|c| c.degenerate).count();
            let expo = 1.0 / (n as f64 + 1.0);
            let constants = Constants {
                c_main: Constant::max_of(small.iter().filter(|c| !c.degenerate).map(|c| c.ratio)),
                c_triv: Constant::max_of(
                    checks
                        .iter()
                        .filter(|c| c.branch == Branch::LargeAlpha)
                        .map(|c| c.ratio),
                ),
                c_pack: Constant {
                    value: pack.last().map(|d| d.value),
                    samples: pack.last().map_or(0, |d| d.roots),
                },
                c_t1: Constant::max_of(functionals.t1.iter().map(|f| f.ratio)),
                c_mod: Constant::max_of(functionals.modified.iter().map(|f| f.ratio)),
                c_sf: Constant::max_of(functionals.sqfn.iter().map(|f| f.ratio)),
                c_bilat: Constant::max_of(
                    bilat
                        .iter()
                        .filter(|b| b.alpha > 0.0)
                        .map(|b| ((b.sup_ratio - b.floor) / b.alpha.powf(expo)).max(0.0)),
                ),
                kappa: {
                    let ks: Vec<f64> = table
                        .iter()
                        .filter(|r| r.alpha < c0)
                        .map(|r| r.constant)
                        .collect();
                    Constant {
                        value: ks.iter().copied().min_by(f64::total_cmp),
                        samples: ks.len(),
                    }
                },
            };
            let all_f = || {
                functionals
                    .t1
                    .iter()
                    .chain(&functionals.modified)
                    .chain(&functionals.sqfn)
            };
            let truncation = Truncation {
                t1_max_bound: functionals
                    .t1
                    .iter()
                    .map(|f| f.truncation_bound)
                    .fold(0.0, f64::max),
                mod_max_bound: functionals
                    .modified
                    .iter()
                    .map(|f| f.truncation_bound)
                    .fold(0.0, f64::max),
                sqfn_max_bound: functionals
                    .sqfn
                    .iter()
                    .map(|f| f.truncation_bound)
                    .fold(0.0, f64::max),
                warnings: all_f().filter(|f| f.warning.is_some()).count(),
            };

            let mut findings = Vec::new();
            let unbounded = packing_unbounded(&pack);
            if unbounded {
                findings.push(PACKING_UNBOUNDED.to_string());
            }
            if constants.c_main.samples == 0 && degenerate > 0 {
                findings.push(format!(
                "C_main degenerate-zero: all {degenerate} small-alpha checks have u1 + u2 below the floor"
            ));
            }
            if truncation.warnings > 0 {
                findings.push(format!(
                    "{} functional values have a truncation estimate above 10% of the value",
                    truncation.warnings
                ));
            }

            let mut inv = Vec::new();
            let mut push = |name: &str, passed: bool, detail: String| {
                inv.push(Invariant {
                    name: name.into(),
                    passed,
                    detail,
                })
            };
            push(
                "kernel_audit",
                audit.passed(),
                format!(
                    "size {:.6} holder {:.6} over {} samples",
                    audit.worst_size_ratio, audit.worst_holder_ratio, audit.samples
                ),
            );
            let bad_alpha = table
                .iter()
                .filter(|r| !(r.alpha.is_finite() && r.alpha >= 0.0 && r.lp_gap.is_finite()))
                .count();
            push(
                "alpha_finite",
                bad_alpha == 0,
                format!("{bad_alpha} of {} alpha values non-finite", table.len()),
            );
            let roots_lo = pack.first().map_or(0, |d| d.depth);
            let [pa, pb] = cfg
                .suite
                .pack_depths
                .unwrap_or([roots_lo + 2, g.tree.j_max()]);
            let mut worst: f64 = 0.0;
            for w in pack.windows(2) {
                if w[0].depth >= pa && w[1].depth <= pb && w[1].value > 1e-10 {
                    worst = worst.max(w[1].value / w[0].value);
                }
            }
            push(
                "packing_stable",
                worst <= 2.0,
                format!("max C_pack(k+1)/C_pack(k) = {worst:.4} over depths {pa}..{pb}"),
            );
            push(
                "packing_bounded",
                !unbounded,
                format!(
                    "C_pack by depth: {}",
                    pack.iter()
                        .map(|d| format!("{}:{:.4e}", d.depth, d.value))
                        .collect::<Vec<_>>()
                        .join(" ")
                ),
            );
            if kernel.plane_cancellation {
                let nonzero = functionals
                    .modified
                    .iter()
                    .filter(|f| f.ratio != 0.0)
                    .count();
                push(
                    "plane_cancellation",
                    nonzero == 0,
                    format!(
                        "{nonzero} of {} modified functionals nonzero",
                        functionals.modified.len()
                    ),
                );
            }
            let bad_ratio = checks.iter().filter(|c| !c.ratio.is_finite()).count();
            push(
                "pointwise_finite",
                bad_ratio == 0 && constants.c_main.finite() && constants.c_triv.finite(),
                format!(
                    "C_main {:?} over {} checks, C_triv {:?} over {}",
                    constants.c_main.value,
                    constants.c_main.samples,
                    constants.c_triv.value,
                    constants.c_triv.samples
                ),
            );
            let failed = bilat.iter().filter(|b| !b.passed).count();
            push(
                "bilateral",
                failed == 0,
                format!(
                    "{failed} of {} small-alpha cubes exceed C_bilat = {c_bilat:.4}",
                    bilat.len()
                ),
            );
            if cfg.kernel == cfg.calibration.kernel {
                let c_sf = cfg.calibration.c_sf();
                push(
                    "square_function",
                    constants.c_sf.value.map_or(true, |v| v <= c_sf),
                    format!("C_SF {:?} against {c_sf:.4}", constants.c_sf.value),
                );
            }

            let passed = inv.iter().all(|i| i.passed);
            let point_summary = PointSummary {
                samples: checks.len(),
                small_alpha: small.len(),
                large_alpha: checks.len() - small.len(),
                degenerate,
                degenerate_fraction: if checks.is_empty() {
                    0.0
                } else {
                    degenerate as f64 / checks.len() as f64
                },
                clear_of_plane: checks.iter().filter(|c| c.clear_of_plane).count(),
                levels,
            };
            let bilat_summary = BilatSummary {
                checked: bilat.len(),
                failed,
                non_vacuous: bilat.iter().filter(|b| b.non_vacuous).count(),
                asserted: c_bilat,
            };
            Ok(SuiteReport {
                schema: REPORT_SCHEMA.into(),
                config: cfg.clone(),
                dataset: dataset_info(&g, &cfg.dataset),
                kernel: KernelInfo {
                    spec: cfg.kernel.clone(),
                    beta: kernel.beta(),
                    size_constant: kernel.size_constant,
                    holder_constant: kernel.holder_constant,
                    plane_cancellation: kernel.plane_cancellation,
                    audit,
                    audit_passed: audit.passed(),
                },
                build: build_info(&g),
                alpha: alpha_summary(&g, &table, c0),
                packing: pack,
                functionals: functionals.clone(),
                point_checks: checks,
                point_summary,
                bilat,
                bilat_summary,
                constants,
                truncation,
                findings,
                invariants: inv,
                passed,
            })
        })(),
    )
}

fn write_outputs(r: &SuiteReport, dir: &Path) -> Result<()> {
    write_json(&dir.join("report.json"), r)?;
    write_atomic(&dir.join("summary.csv"), summary_csv(r)?.as_bytes())?;
    write_atomic(&dir.join("ratios.svg"), ratios_svg(r).as_bytes())?;
    Ok(())
}

pub fn summary_csv(r: &SuiteReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["name", "value", "samples", "passed"])?;
    let c = &r.constants;
    for (name, k) in [
        ("C_main", c.c_main),
        ("C_triv", c.c_triv),
        ("C_pack", c.c_pack),
        ("C_t1", c.c_t1),
        ("C_mod", c.c_mod),
        ("C_SF", c.c_sf),
        ("C_bilat", c.c_bilat),
        ("kappa", c.kappa),
    ] {
        let v = k.value.map(|v| format!("{v:e}")).unwrap_or_default();
        w.write_record([name, &v, &k.samples.to_string(), ""])?;
    }
    for i in &r.invariants {
        w.write_record([
            i.name.as_str(),
            "",
            "",
            if i.passed { "true" } else { "false" },
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Scatter of pointwise ratios against cube level (log scale).
pub fn ratios_svg(r: &SuiteReport) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let pts: Vec<(f64, f64, bool)> = r
        .point_checks
        .iter()
        .filter(|c| c.ratio > 0.0 && c.ratio.is_finite() && !c.degenerate)
        .map(|c| {
            (
                c.level as f64,
                c.ratio.log10(),
                c.branch == Branch::SmallAlpha,
            )
        })
        .collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let [l0, l1] = r.point_summary.levels;
    let (x0, x1) = (l0 as f64 - 0.5, l1 as f64 + 0.5);
    let (y0, y1) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.1.floor()), b.max(p.1.ceil()))
        });
    let (y0, y1) = if y0 < y1 { (y0, y1) } else { (-1.0, 1.0) };
    let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
    let _ = writeln!(
        s,
        r#"<path d="M{a} {b} L{a} {c} L{d} {c}" stroke="black" fill="none"/>"#,
        a = pad,
        b = pad,
        c = h - pad,
        d = w - pad
    );
    for j in l0..=l1 {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{j}</text>"#,
            px(j as f64),
            h - pad + 15.0
        );
    }
    let mut e = y0 as i32;
    while e as f64 <= y1 {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">1e{e}</text>"#,
            pad - 5.0,
            py(e as f64) + 4.0
        );
        e += 1;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle">pointwise ratio by cube level (blue: small alpha, red: large)</text>"#,
        w / 2.0
    );
    for (x, y, small) in pts {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.1}" cy="{:.1}" r="2.5" fill="{}" fill-opacity="0.5"/>"#,
            px(x),
            py(y),
            if small { "steelblue" } else { "firebrick" }
        );
    }
    s.push_str("</svg>\n");
    s
}
