//! Command-line front end; all logic lives in the library.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use carbon_stress::contagion::{esri, fsri};
use carbon_stress::emissions::{estimate_emissions, write_emissions_csv};
use carbon_stress::network::{load_network, write_edges_csv, write_firms_csv};
use carbon_stress::production::{calibrate, ProductionFn};
use carbon_stress::scenario::{
    prepare, prepare_instance, run_cells, write_reports, PassThroughAxis, ProductionFnAxis,
    RunConfig,
};
use carbon_stress::sector::CriticalityTable;
use carbon_stress::synthetic::{generate, toy_fixture, GeneratorConfig};

#[derive(Parser)]
#[command(
    name = "carbon-stress",
    about = "Carbon-price stress testing of firm-level supply chain networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic model instance and write its input files.
    Generate(GenerateArgs),
    /// Estimate firm-level CO2 emissions from fuel purchases.
    EstimateEmissions(EstimateArgs),
    /// Run a price sweep across pass-through modes and production regimes.
    Sweep(SweepArgs),
    /// Rank firms by economic (and financial) systemic risk.
    Esri(EsriArgs),
    /// Run the built-in five-firm golden fixture end to end.
    Toy(ToyArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 1000)]
    n_firms: usize,
    #[arg(long, default_value_t = 20)]
    n_banks: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1.05)]
    tail_exponent: f64,
    #[arg(long, default_value_t = 0.004)]
    fuel_seller_fraction: f64,
    #[arg(long, default_value_t = 0.15)]
    loan_coverage: f64,
    #[arg(long, default_value_t = 0.15)]
    essentiality_rate: f64,
    /// Directory for firms.csv, edges.csv, criticality.csv, fuel.toml,
    /// banks.csv, loans.csv and generator_report.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    firms: String,
    #[arg(long)]
    edges: String,
    #[arg(long)]
    fuel_config: String,
    /// Output CSV (firm_id,emissions_t).
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct SweepArgs {
    /// Run configuration (TOML). Flags below override its fields.
    #[arg(long)]
    config: String,
    /// Comma-separated price grid override.
    #[arg(long)]
    prices: Option<String>,
    #[arg(long, value_enum)]
    pass_through: Option<PassThroughArg>,
    #[arg(long, value_enum)]
    production_fn: Option<FnAxisArg>,
    #[arg(long)]
    lgd: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    coverage: Option<f64>,
    #[arg(long)]
    edge_threshold: Option<f64>,
    #[arg(long)]
    max_contagion_iterations: Option<usize>,
    /// Keep per-firm vectors in the cell JSON and dump retained costs.
    #[arg(long)]
    firm_detail: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EsriArgs {
    #[arg(long)]
    firms: String,
    #[arg(long)]
    edges: String,
    #[arg(long)]
    criticality: String,
    /// Banks CSV; together with --loans enables the financial index.
    #[arg(long)]
    banks: Option<String>,
    #[arg(long)]
    loans: Option<String>,
    #[arg(long, value_enum, default_value_t = FnArg::Gl)]
    production_fn: FnArg,
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    lgd: f64,
    /// Output CSV (firm_id,esri,fsri).
    #[arg(long)]
    out: String,
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum FnArg {
    Gl,
    Linear,
}

impl From<FnArg> for ProductionFn {
    fn from(v: FnArg) -> Self {
        match v {
            FnArg::Gl => ProductionFn::Gl,
            FnArg::Linear => ProductionFn::Linear,
        }
    }
}

#[derive(Args)]
struct ToyArgs {
    /// Carbon price applied to the fixture.
    #[arg(long, default_value_t = 45.0)]
    price: f64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum PassThroughArg {
    On,
    Off,
    Both,
}

impl From<PassThroughArg> for PassThroughAxis {
    fn from(v: PassThroughArg) -> Self {
        match v {
            PassThroughArg::On => PassThroughAxis::On,
            PassThroughArg::Off => PassThroughAxis::Off,
            PassThroughArg::Both => PassThroughAxis::Both,
        }
    }
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum FnAxisArg {
    Gl,
    Linear,
    Both,
}

impl From<FnAxisArg> for ProductionFnAxis {
    fn from(v: FnAxisArg) -> Self {
        match v {
            FnAxisArg::Gl => ProductionFnAxis::Gl,
            FnAxisArg::Linear => ProductionFnAxis::Linear,
            FnAxisArg::Both => ProductionFnAxis::Both,
        }
    }
}

fn main() {
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::EstimateEmissions(args) => cmd_estimate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Esri(args) => cmd_esri(args),
        Command::Toy(args) => cmd_toy(args),
    }
}

fn cmd_generate(args: GenerateArgs) -> anyhow::Result<()> {
    let cfg = GeneratorConfig {
        n_firms: args.n_firms,
        n_banks: args.n_banks,
        seed: args.seed,
        emission_tail_exponent: args.tail_exponent,
        fuel_seller_fraction: args.fuel_seller_fraction,
        loan_coverage: args.loan_coverage,
        essentiality_rate: args.essentiality_rate,
        ..Default::default()
    };
    let (instance, report) = generate(&cfg)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let path = |name: &str| args.out_dir.join(name).to_string_lossy().to_string();
    write_firms_csv(&path("firms.csv"), &instance.book)?;
    write_edges_csv(&path("edges.csv"), &instance.network)?;
    instance.criticality.write_csv(&path("criticality.csv"))?;
    instance.fuel_config.write_toml(&path("fuel.toml"))?;
    instance
        .banks
        .write_csv(&path("banks.csv"), &path("loans.csv"))?;
    std::fs::write(
        args.out_dir.join("generator_report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    println!(
        "generated {} firms, {} edges, {} banks into {}",
        instance.network.firm_count(),
        instance.network.edge_count(),
        instance.banks.bank_count(),
        args.out_dir.display()
    );
    println!(
        "tail exponents: strengths {:.3} (ks {:.3}), emissions {:.3} (ks {:.3})",
        report.strength_tail_exponent,
        report.strength_tail_ks,
        report.emission_tail_exponent,
        report.emission_tail_ks
    );
    Ok(())
}

fn cmd_estimate(args: EstimateArgs) -> anyhow::Result<()> {
    let (network, book) = load_network(&args.firms, &args.edges)?;
    let cfg = carbon_stress::emissions::FuelSectorConfig::load_toml(&args.fuel_config)?;
    let report = estimate_emissions(&network, &cfg, &book.sector);
    write_emissions_csv(&args.out, &report.emissions)?;
    println!(
        "{} emitters, {:.1} t attributed ({:.2}% of gas, {:.2}% of oil), {:.1} t excluded",
        report.emitter_count(),
        report.total_attributed_t(),
        100.0 * report.covered_gas_share,
        100.0 * report.covered_oil_share,
        report.excluded_mass_t
    );
    if report.degenerate_gas {
        eprintln!("warning: no gas distributors found");
    }
    if report.degenerate_oil {
        eprintln!("warning: no oil distributors found");
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let mut config =
        RunConfig::load_toml(&args.config).with_context(|| format!("loading {}", args.config))?;
    if let Some(prices) = args.prices {
        config.prices = prices
            .split(',')
            .map(|p| p.trim().parse::<f64>().context("parsing price grid"))
            .collect::<anyhow::Result<Vec<f64>>>()?;
    }
    if let Some(v) = args.pass_through {
        config.pass_through = v.into();
    }
    if let Some(v) = args.production_fn {
        config.production_fn = v.into();
    }
    if let Some(v) = args.lgd {
        config.lgd = v;
    }
    if let Some(v) = args.epsilon {
        config.epsilon = v;
    }
    if let Some(v) = args.coverage {
        config.coverage = v;
    }
    if let Some(v) = args.edge_threshold {
        config.edge_threshold = v;
    }
    if let Some(v) = args.max_contagion_iterations {
        config.max_contagion_iterations = v;
    }
    if args.firm_detail {
        config.firm_detail = true;
    }
    if let Some(v) = args.out_dir {
        config.output_dir = Some(v.to_string_lossy().to_string());
    }
    config.validate()?;

    let prepared = prepare(&config)?;
    let (cells, error) = run_cells(&prepared, &config);
    let dir = config.resolve_output_dir();
    write_reports(&dir, &cells, &config.to_provenance_toml())?;
    println!("{} cells completed; reports in {}", cells.len(), dir.display());
    if let Some(e) = error {
        bail!(e);
    }
    Ok(())
}

fn cmd_esri(args: EsriArgs) -> anyhow::Result<()> {
    // The systemic risk indices involve no carbon costs, so no fuel
    // configuration is needed here.
    let (network, mut book) = load_network(&args.firms, &args.edges)?;
    let criticality = CriticalityTable::load_csv(&args.criticality)?;
    let banks = match (&args.banks, &args.loans) {
        (Some(b), Some(l)) => Some(carbon_stress::finance::BankRegister::load_csv(
            b,
            l,
            network.firm_count(),
        )?),
        (None, None) => None,
        _ => bail!("banks and loans files must be given together"),
    };
    if let Some(b) = &banks {
        b.mark_loans(&mut book);
    }
    let params = calibrate(&network, &book.sector, &criticality)?;
    let fn_kind: ProductionFn = args.production_fn.into();
    let economic = esri(&network, &params, fn_kind, args.epsilon)?;
    let financial = match &banks {
        Some(b) => Some(fsri(
            &network, &params, fn_kind, args.epsilon, b, &book, args.lgd,
        )?),
        None => None,
    };

    let mut wtr = csv::Writer::from_path(&args.out)?;
    wtr.write_record(["firm_id", "esri", "fsri"])?;
    for i in 0..network.firm_count() {
        wtr.write_record([
            i.to_string(),
            economic[i].to_string(),
            financial
                .as_ref()
                .map(|f| f[i].to_string())
                .unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    let mut ranked: Vec<usize> = (0..network.firm_count()).collect();
    ranked.sort_by(|&a, &b| economic[b].partial_cmp(&economic[a]).unwrap());
    println!("top systemic firms by economic index:");
    for &i in ranked.iter().take(5) {
        println!(
            "  firm {i}: esri {:.4}{}",
            economic[i],
            financial
                .as_ref()
                .map(|f| format!(", fsri {:.4}", f[i]))
                .unwrap_or_default()
        );
    }
    Ok(())
}

fn cmd_toy(args: ToyArgs) -> anyhow::Result<()> {
    let mut config = RunConfig::from_generator(GeneratorConfig::default());
    // The fixture is built in, so the provenance carries no input section.
    config.generator = None;
    config.prices = vec![args.price];
    config.pass_through = PassThroughAxis::Off;
    config.production_fn = ProductionFnAxis::Gl;
    if let Some(dir) = args.out_dir {
        config.output_dir = Some(dir.to_string_lossy().to_string());
    }

    let prepared = prepare_instance(toy_fixture(), 0.0)?;
    let (cells, error) = run_cells(&prepared, &config);
    let dir = config.resolve_output_dir();
    write_reports(&dir, &cells, &config.to_provenance_toml())?;
    if let Some(e) = error {
        bail!(e);
    }
    let cell = &cells[0];
    println!("toy fixture at price {}:", cell.price);
    println!(
        "  direct defaults {}, indirect defaults {}",
        cell.direct_defaults, cell.indirect_defaults
    );
    println!(
        "  output loss: direct {:.5}, total {:.5}",
        cell.direct_output_loss, cell.total_output_loss
    );
    for b in &cell.bank.per_bank {
        println!(
            "  bank {}: direct {:.1}%, indirect {:.1}%, total {:.1}% of equity",
            b.bank_id,
            100.0 * b.direct,
            100.0 * b.indirect,
            100.0 * b.total
        );
    }
    println!(
        "  system loss: {:.1}% of total bank equity",
        100.0 * cell.bank.system.total
    );
    println!("reports in {}", dir.display());
    Ok(())
}
