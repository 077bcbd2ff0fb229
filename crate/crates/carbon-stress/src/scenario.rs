//! Grid runs across carbon prices, pass-through modes and production
//! regimes, with machine-readable reports.
//!
//! A run loads or generates a model instance, estimates emissions on the
//! full network, optionally subsets the network by a link-weight threshold
//! (estimates are kept, firm ids are stable), and then evaluates every
//! (price, pass-through, regime) cell independently: costs, direct
//! defaults, cascade, balance-sheet translation, loan write-offs. Cells
//! run concurrently; output order and content depend only on inputs and
//! configuration.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contagion::{kill_set, propagate, ContagionSettings};
use crate::emissions::{estimate_emissions, EmissionReport, FuelSectorConfig};
use crate::error::{Error, Result};
use crate::finance::{bank_losses, indirect_defaults, project_books, BankRegister, LossReport};
use crate::network::{load_network, SupplyNetwork};
use crate::passthrough::{initial_costs, market_shares, pass_through, MarketShares, DEFAULT_COVERAGE};
use crate::production::{calibrate, ProductionFn, ProductionParams};
use crate::sector::CriticalityTable;
use crate::shock::{direct_defaults, default_price_grid, validate_grid, ShockScenario};
use crate::synthetic::{generate, GeneratorConfig, ModelInstance};

/// Environment variable consulted for the default output directory.
pub const OUTPUT_DIR_ENV: &str = "CARBON_STRESS_OUT";

/// Scenario axis with an "evaluate both" option.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PassThroughAxis {
    On,
    Off,
    #[default]
    Both,
}

impl PassThroughAxis {
    fn modes(self) -> Vec<bool> {
        match self {
            PassThroughAxis::On => vec![true],
            PassThroughAxis::Off => vec![false],
            PassThroughAxis::Both => vec![false, true],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductionFnAxis {
    Gl,
    Linear,
    #[default]
    Both,
}

impl ProductionFnAxis {
    fn regimes(self) -> Vec<ProductionFn> {
        match self {
            ProductionFnAxis::Gl => vec![ProductionFn::Gl],
            ProductionFnAxis::Linear => vec![ProductionFn::Linear],
            ProductionFnAxis::Both => vec![ProductionFn::Gl, ProductionFn::Linear],
        }
    }
}

/// File inputs for a run (CSV schemas plus the fuel TOML).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputPaths {
    pub firms: String,
    pub edges: String,
    pub criticality: String,
    pub fuel_config: String,
    #[serde(default)]
    pub banks: Option<String>,
    #[serde(default)]
    pub loans: Option<String>,
}

/// Full run configuration. Exactly one of `input` / `generator` must be
/// set. All tolerances carry the defaults of their owning stages.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub input: Option<InputPaths>,
    #[serde(default)]
    pub generator: Option<GeneratorConfig>,
    /// Carbon price grid; defaults to 10, 20, ..., 1000.
    #[serde(default = "default_price_grid")]
    pub prices: Vec<f64>,
    #[serde(default)]
    pub pass_through: PassThroughAxis,
    #[serde(default)]
    pub production_fn: ProductionFnAxis,
    /// Loss given default for every loan.
    #[serde(default = "default_lgd")]
    pub lgd: f64,
    /// Contagion convergence tolerance.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Pass-through stopping coverage.
    #[serde(default = "default_coverage")]
    pub coverage: f64,
    /// Drop links below this value before the stress test (0 keeps all).
    #[serde(default)]
    pub edge_threshold: f64,
    /// Propagate demand reductions upstream.
    #[serde(default = "default_true")]
    pub demand_channel: bool,
    /// Cascade iteration cap; slowly mixing networks may need more than
    /// the default 10^4 at tight tolerances.
    #[serde(default = "default_max_iterations")]
    pub max_contagion_iterations: usize,
    /// Keep per-firm vectors (production levels, default indicators,
    /// retained costs) in each cell result. They appear in the per-cell
    /// JSON and the retained costs are additionally dumped as CSV.
    #[serde(default)]
    pub firm_detail: bool,
    #[serde(default)]
    pub output_dir: Option<String>,
}

fn default_lgd() -> f64 {
    1.0
}
fn default_epsilon() -> f64 {
    1e-6
}
fn default_coverage() -> f64 {
    DEFAULT_COVERAGE
}
fn default_true() -> bool {
    true
}
fn default_max_iterations() -> usize {
    10_000
}

/// Per-cell evaluation knobs that sit outside the scenario grid itself.
#[derive(Debug, Clone)]
pub struct CellOptions {
    pub demand_channel: bool,
    pub max_contagion_iterations: usize,
    /// Retain per-firm vectors in the result.
    pub firm_detail: bool,
}

impl Default for CellOptions {
    fn default() -> Self {
        CellOptions {
            demand_channel: true,
            max_contagion_iterations: default_max_iterations(),
            firm_detail: false,
        }
    }
}

impl From<&RunConfig> for CellOptions {
    fn from(config: &RunConfig) -> Self {
        CellOptions {
            demand_channel: config.demand_channel,
            max_contagion_iterations: config.max_contagion_iterations,
            firm_detail: config.firm_detail,
        }
    }
}

impl RunConfig {
    pub fn from_generator(generator: GeneratorConfig) -> Self {
        RunConfig {
            input: None,
            generator: Some(generator),
            prices: default_price_grid(),
            pass_through: PassThroughAxis::default(),
            production_fn: ProductionFnAxis::default(),
            lgd: default_lgd(),
            epsilon: default_epsilon(),
            coverage: default_coverage(),
            edge_threshold: 0.0,
            demand_channel: true,
            max_contagion_iterations: default_max_iterations(),
            firm_detail: false,
            output_dir: None,
        }
    }

    pub fn load_toml(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{path}: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        validate_grid(&self.prices)?;
        if self.input.is_some() == self.generator.is_some() {
            return Err(Error::Config(
                "configure exactly one of [input] and [generator]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.lgd) {
            return Err(Error::Config(format!("lgd must lie in [0, 1], got {}", self.lgd)));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        if !(0.0 < self.coverage && self.coverage < 1.0) {
            return Err(Error::Config("coverage must lie in (0, 1)".into()));
        }
        if self.edge_threshold < 0.0 {
            return Err(Error::Config("edge_threshold must be non-negative".into()));
        }
        Ok(())
    }

    /// Output directory: explicit config, then `CARBON_STRESS_OUT`, then
    /// `./carbon-stress-out`.
    pub fn resolve_output_dir(&self) -> PathBuf {
        match &self.output_dir {
            Some(d) => PathBuf::from(d),
            None => std::env::var(OUTPUT_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|_| PathBuf::from("carbon-stress-out")),
        }
    }

    /// The configuration as TOML, embedded verbatim in every report.
    /// The output directory is environment, not scenario semantics, and is
    /// left out so reports from identical runs compare equal.
    pub fn to_provenance_toml(&self) -> String {
        let mut stripped = self.clone();
        stripped.output_dir = None;
        toml::to_string_pretty(&stripped)
            .unwrap_or_else(|e| format!("# serialization failed: {e}"))
    }
}

/// Loads a model instance from CSV/TOML inputs.
pub fn load_instance(paths: &InputPaths) -> Result<ModelInstance> {
    let (network, mut book) = load_network(&paths.firms, &paths.edges)?;
    let criticality = CriticalityTable::load_csv(&paths.criticality)?;
    let fuel_config = FuelSectorConfig::load_toml(&paths.fuel_config)?;
    let banks = match (&paths.banks, &paths.loans) {
        (Some(b), Some(l)) => BankRegister::load_csv(b, l, network.firm_count())?,
        (None, None) => BankRegister::new(network.firm_count(), Vec::new(), &[])?,
        _ => {
            return Err(Error::Config(
                "banks and loans files must be given together".into(),
            ))
        }
    };
    banks.mark_loans(&mut book);
    Ok(ModelInstance {
        network,
        book,
        banks,
        fuel_config,
        criticality,
    })
}

/// Per-firm vectors of one cell, kept on request.
#[derive(Debug, Clone, Serialize)]
pub struct FirmDetail {
    /// Final production level per firm.
    pub production_levels: Vec<f64>,
    pub direct_default: Vec<bool>,
    pub indirect_default: Vec<bool>,
    /// Retained carbon cost per firm after (optional) pass-through.
    pub retained_costs: Vec<f64>,
}

/// One evaluated grid cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellResult {
    pub price: f64,
    pub pass_through: bool,
    pub production_fn: ProductionFn,
    pub direct_defaults: usize,
    pub indirect_defaults: usize,
    pub direct_output_loss: f64,
    pub total_output_loss: f64,
    pub indirect_output_loss: f64,
    pub contagion_iterations: usize,
    pub pass_through_iterations: usize,
    /// Carbon cost mass not distributed when pass-through stopped.
    pub undistributed_cost: f64,
    pub bank: LossReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub firm_detail: Option<FirmDetail>,
}

/// Precomputed, price-independent state shared by all cells.
pub struct PreparedRun {
    pub instance: ModelInstance,
    /// Network actually stressed (thresholded when configured).
    pub active: SupplyNetwork,
    pub emissions: EmissionReport,
    pub shares: MarketShares,
    pub params: ProductionParams,
    pub eligible: Vec<bool>,
    pub retained_value_fraction: f64,
}

/// Loads or generates the instance and computes everything cells share:
/// emissions (on the full network), the thresholded active network, market
/// shares and calibrated production parameters (on the active network).
pub fn prepare(config: &RunConfig) -> Result<PreparedRun> {
    config.validate()?;
    let instance = match (&config.input, &config.generator) {
        (Some(paths), None) => load_instance(paths)?,
        (None, Some(gen_cfg)) => generate(gen_cfg)?.0,
        _ => unreachable!("validated"),
    };
    prepare_instance(instance, config.edge_threshold)
}

/// [`prepare`] for an instance already in memory. Emissions are estimated
/// on the full network before thresholding, mirroring how estimates on a
/// full data set carry over to subsetted runs (firm ids stay stable).
pub fn prepare_instance(instance: ModelInstance, edge_threshold: f64) -> Result<PreparedRun> {
    let emissions =
        estimate_emissions(&instance.network, &instance.fuel_config, &instance.book.sector);
    let (active, retained_value_fraction) = if edge_threshold > 0.0 {
        let t = instance.network.threshold(edge_threshold);
        (t.network, t.retained_value_fraction)
    } else {
        (instance.network.clone(), 1.0)
    };
    let shares = market_shares(&active, &instance.book.sector);
    let params = calibrate(&active, &instance.book.sector, &instance.criticality)?;
    let eligible = instance.book.eligibility();
    Ok(PreparedRun {
        emissions,
        shares,
        params,
        eligible,
        active,
        retained_value_fraction,
        instance,
    })
}

/// Evaluates one cell: costs, defaults, cascade, translation, write-offs.
pub fn run_cell(
    prepared: &PreparedRun,
    scenario: &ShockScenario,
    options: &CellOptions,
) -> Result<CellResult> {
    scenario.validate()?;
    let book = &prepared.instance.book;
    let net = &prepared.active;
    let c0 = initial_costs(&prepared.emissions.emissions, scenario.price);
    let (retained, pt_iterations, undistributed) = if scenario.pass_through {
        let r = pass_through(net, &prepared.shares, &c0, scenario.coverage, None)?;
        let undistributed = r.residual;
        (r.retained, r.iterations, undistributed)
    } else {
        (c0, 0, 0.0)
    };
    let chi_dir = direct_defaults(book, &retained, &prepared.eligible);
    let h_init = kill_set(
        net.firm_count(),
        chi_dir
            .iter()
            .enumerate()
            .filter_map(|(i, &d)| d.then_some(i)),
    );
    let mut settings = ContagionSettings::new(scenario.production_fn);
    settings.epsilon = scenario.epsilon;
    settings.demand_channel = options.demand_channel;
    settings.max_iterations = options.max_contagion_iterations;
    let contagion = propagate(net, &prepared.params, &h_init, &settings)?;
    let projected = project_books(book, &contagion.h_final, &retained, &chi_dir);
    let chi_indir = indirect_defaults(&projected, &chi_dir, &prepared.eligible);
    let bank = bank_losses(
        &prepared.instance.banks,
        book,
        &chi_dir,
        &chi_indir,
        scenario.lgd,
        Some(&prepared.emissions.emissions),
    );
    let firm_detail = options.firm_detail.then(|| FirmDetail {
        production_levels: contagion.h_final.clone(),
        direct_default: chi_dir.clone(),
        indirect_default: chi_indir.clone(),
        retained_costs: retained.clone(),
    });
    Ok(CellResult {
        price: scenario.price,
        pass_through: scenario.pass_through,
        production_fn: scenario.production_fn,
        direct_defaults: chi_dir.iter().filter(|&&d| d).count(),
        indirect_defaults: chi_indir.iter().filter(|&&d| d).count(),
        direct_output_loss: contagion.direct_loss,
        total_output_loss: contagion.total_loss,
        indirect_output_loss: contagion.indirect_loss,
        contagion_iterations: contagion.iterations,
        pass_through_iterations: pt_iterations,
        undistributed_cost: undistributed,
        bank,
        firm_detail,
    })
}

/// Runs every grid cell concurrently. Cell order in the result is sorted
/// by price, then pass-through mode (off first), then regime (GL first).
/// On a cell failure the completed cells are returned alongside the error
/// so reports can still be written.
pub fn run_cells(
    prepared: &PreparedRun,
    config: &RunConfig,
) -> (Vec<CellResult>, Option<Error>) {
    let mut grid: Vec<ShockScenario> = Vec::new();
    for &price in &config.prices {
        for pt in config.pass_through.modes() {
            for regime in config.production_fn.regimes() {
                grid.push(ShockScenario {
                    price,
                    pass_through: pt,
                    production_fn: regime,
                    lgd: config.lgd,
                    coverage: config.coverage,
                    epsilon: config.epsilon,
                });
            }
        }
    }
    let options = CellOptions::from(config);
    let results: Vec<Result<CellResult>> = grid
        .par_iter()
        .map(|scenario| {
            run_cell(prepared, scenario, &options).map_err(|e| Error::Cell {
                price: scenario.price,
                pass_through: scenario.pass_through,
                production_fn: scenario.production_fn.label(),
                source: Box::new(e),
            })
        })
        .collect();

    let mut completed = Vec::with_capacity(results.len());
    let mut first_error = None;
    for r in results {
        match r {
            Ok(cell) => completed.push(cell),
            Err(e) if first_error.is_none() => first_error = Some(e),
            Err(_) => {}
        }
    }
    if first_error.is_none() {
        // Both regimes stop within epsilon of their fixed points, so the
        // ordering can only be blurred by the stopping lag; anything beyond
        // a few hundred epsilons is a genuine violation.
        let tolerance = (1000.0 * config.epsilon).max(1e-12);
        if let Err(e) = check_dominance(&completed, tolerance) {
            first_error = Some(e);
        }
    }
    (completed, first_error)
}

/// The substitutable regime can never lose more than the non-substitutable
/// one on the same cell; a violation beyond `tolerance` indicates a broken
/// invariant and fails the run.
pub fn check_dominance(cells: &[CellResult], tolerance: f64) -> Result<()> {
    for gl in cells.iter().filter(|c| c.production_fn == ProductionFn::Gl) {
        if let Some(linear) = cells.iter().find(|c| {
            c.production_fn == ProductionFn::Linear
                && c.price == gl.price
                && c.pass_through == gl.pass_through
        }) {
            if linear.total_output_loss > gl.total_output_loss + tolerance {
                return Err(Error::DominanceViolation {
                    price: gl.price,
                    pass_through: gl.pass_through,
                    what: "output loss",
                    gl: gl.total_output_loss,
                    linear: linear.total_output_loss,
                });
            }
            if linear.bank.system.total > gl.bank.system.total + tolerance {
                return Err(Error::DominanceViolation {
                    price: gl.price,
                    pass_through: gl.pass_through,
                    what: "bank loss",
                    gl: gl.bank.system.total,
                    linear: linear.bank.system.total,
                });
            }
        }
    }
    Ok(())
}

fn amplification(total: f64, direct: f64) -> Option<f64> {
    (direct > 0.0).then(|| total / direct)
}

/// Writes `sweep.csv`: one row per cell with loss levels and amplification
/// factors (empty amplification on zero-direct cells). The resolved
/// configuration is embedded as `#`-prefixed header lines.
pub fn write_sweep_csv(path: &Path, cells: &[CellResult], provenance: &str) -> Result<()> {
    let p = path.to_string_lossy().to_string();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(&p, e))?;
    for line in provenance.lines() {
        writeln!(file, "# {line}").map_err(|e| Error::io(&p, e))?;
    }
    let mut wtr = csv::Writer::from_writer(file);
    wtr.write_record([
        "price",
        "mode",
        "fn",
        "direct_output_loss",
        "total_output_loss",
        "direct_bank_loss",
        "total_bank_loss",
        "amplification_output",
        "amplification_bank",
    ])
    .map_err(|e| crate::sector::csv_row_err(&p, &e))?;
    for c in cells {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        wtr.write_record([
            c.price.to_string(),
            if c.pass_through { "on" } else { "off" }.to_string(),
            c.production_fn.label().to_string(),
            c.direct_output_loss.to_string(),
            c.total_output_loss.to_string(),
            c.bank.system.direct.to_string(),
            c.bank.system.total.to_string(),
            fmt(amplification(c.total_output_loss, c.direct_output_loss)),
            fmt(amplification(c.bank.system.total, c.bank.system.direct)),
        ])
        .map_err(|e| crate::sector::csv_row_err(&p, &e))?;
    }
    wtr.flush().map_err(|e| Error::io(&p, e))?;
    Ok(())
}

/// Writes `direct_sweep.csv`: the pre-contagion loss curve, one row per
/// (price, pass-through mode) since it does not depend on the regime.
pub fn write_direct_curve_csv(path: &Path, cells: &[CellResult]) -> Result<()> {
    let p = path.to_string_lossy().to_string();
    let mut wtr = csv::Writer::from_path(path).map_err(|e| crate::sector::csv_open_err(&p, e))?;
    wtr.write_record(["price", "mode", "direct_output_loss", "direct_defaults_count"])
        .map_err(|e| crate::sector::csv_row_err(&p, &e))?;
    let mut seen: Vec<(f64, bool)> = Vec::new();
    for c in cells {
        if seen.contains(&(c.price, c.pass_through)) {
            continue;
        }
        seen.push((c.price, c.pass_through));
        wtr.write_record([
            c.price.to_string(),
            if c.pass_through { "on" } else { "off" }.to_string(),
            c.direct_output_loss.to_string(),
            c.direct_defaults.to_string(),
        ])
        .map_err(|e| crate::sector::csv_row_err(&p, &e))?;
    }
    wtr.flush().map_err(|e| Error::io(&p, e))?;
    Ok(())
}

/// Writes `bank_losses.csv`: the system-level equity loss curve per cell
/// (`price,system_direct_loss,system_total_loss,fn,pass_through`).
pub fn write_bank_curve_csv(path: &Path, cells: &[CellResult]) -> Result<()> {
    let p = path.to_string_lossy().to_string();
    let mut wtr = csv::Writer::from_path(path).map_err(|e| crate::sector::csv_open_err(&p, e))?;
    wtr.write_record([
        "price",
        "system_direct_loss",
        "system_total_loss",
        "fn",
        "pass_through",
    ])
    .map_err(|e| crate::sector::csv_row_err(&p, &e))?;
    for c in cells {
        wtr.write_record([
            c.price.to_string(),
            c.bank.system.direct.to_string(),
            c.bank.system.total.to_string(),
            c.production_fn.label().to_string(),
            if c.pass_through { "on" } else { "off" }.to_string(),
        ])
        .map_err(|e| crate::sector::csv_row_err(&p, &e))?;
    }
    wtr.flush().map_err(|e| Error::io(&p, e))?;
    Ok(())
}

#[derive(Serialize)]
struct CellDetail<'a> {
    #[serde(flatten)]
    cell: &'a CellResult,
    config: &'a str,
}

/// Writes per-cell JSON details plus `sweep.csv`, `direct_sweep.csv`,
/// `bank_losses.csv` and the resolved configuration into `dir`. Cells
/// carrying firm detail additionally dump their retained carbon costs as
/// `retained_p<price>_<mode>.csv` (one per price and pass-through mode).
pub fn write_reports(dir: &Path, cells: &[CellResult], provenance: &str) -> Result<()> {
    let d = dir.to_string_lossy().to_string();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(&d, e))?;
    let cfg_path = dir.join("run_config.toml");
    std::fs::write(&cfg_path, provenance)
        .map_err(|e| Error::io(&cfg_path.to_string_lossy(), e))?;
    write_sweep_csv(&dir.join("sweep.csv"), cells, provenance)?;
    write_direct_curve_csv(&dir.join("direct_sweep.csv"), cells)?;
    write_bank_curve_csv(&dir.join("bank_losses.csv"), cells)?;
    let mut dumped: Vec<(f64, bool)> = Vec::new();
    for (idx, cell) in cells.iter().enumerate() {
        let price = cell.price.to_string().replace('.', "_");
        let mode = if cell.pass_through { "on" } else { "off" };
        let name = format!(
            "cell_{idx:04}_p{price}_{mode}_{}.json",
            cell.production_fn.label()
        );
        let path = dir.join(name);
        let text = serde_json::to_string_pretty(&CellDetail {
            cell,
            config: provenance,
        })
        .map_err(|e| Error::Config(format!("serialize cell: {e}")))?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path.to_string_lossy(), e))?;

        // Retained costs depend on price and mode only.
        if let Some(detail) = &cell.firm_detail {
            if !dumped.contains(&(cell.price, cell.pass_through)) {
                dumped.push((cell.price, cell.pass_through));
                let csv_path = dir.join(format!("retained_p{price}_{mode}.csv"));
                crate::passthrough::write_retained_csv(
                    csv_path.to_string_lossy().as_ref(),
                    &detail.retained_costs,
                )?;
            }
        }
    }
    Ok(())
}

/// End-to-end entry point: prepare, run all cells, write reports. Reports
/// for completed cells are written even when a cell fails or dominance is
/// violated; the error is returned after writing.
pub fn run(config: &RunConfig) -> Result<Vec<CellResult>> {
    let prepared = prepare(config)?;
    let (cells, error) = run_cells(&prepared, config);
    let dir = config.resolve_output_dir();
    write_reports(&dir, &cells, &config.to_provenance_toml())?;
    match error {
        Some(e) => Err(e),
        None => Ok(cells),
    }
}
