//! End-to-end file-interface tests: generated bundles round-trip through
//! the CSV/TOML schemas, identical seeds produce identical bytes, and a
//! sweep over files matches the same sweep in memory.

use std::path::Path;

use carbon_stress::emissions::estimate_emissions;
use carbon_stress::network::{write_edges_csv, write_firms_csv};
use carbon_stress::scenario::{
    load_instance, prepare, prepare_instance, run_cells, InputPaths, PassThroughAxis,
    ProductionFnAxis, RunConfig,
};
use carbon_stress::synthetic::{generate, GeneratorConfig, ModelInstance};

fn write_bundle(dir: &Path, inst: &ModelInstance) -> InputPaths {
    let p = |name: &str| dir.join(name).to_string_lossy().to_string();
    write_firms_csv(&p("firms.csv"), &inst.book).unwrap();
    write_edges_csv(&p("edges.csv"), &inst.network).unwrap();
    inst.criticality.write_csv(&p("criticality.csv")).unwrap();
    inst.fuel_config.write_toml(&p("fuel.toml")).unwrap();
    inst.banks.write_csv(&p("banks.csv"), &p("loans.csv")).unwrap();
    InputPaths {
        firms: p("firms.csv"),
        edges: p("edges.csv"),
        criticality: p("criticality.csv"),
        fuel_config: p("fuel.toml"),
        banks: Some(p("banks.csv")),
        loans: Some(p("loans.csv")),
    }
}

#[test]
fn same_seed_same_bytes() {
    let cfg = GeneratorConfig {
        n_firms: 400,
        n_banks: 5,
        seed: 77,
        ..Default::default()
    };
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    write_bundle(d1.path(), &generate(&cfg).unwrap().0);
    write_bundle(d2.path(), &generate(&cfg).unwrap().0);
    for name in [
        "firms.csv",
        "edges.csv",
        "criticality.csv",
        "fuel.toml",
        "banks.csv",
        "loans.csv",
    ] {
        let a = std::fs::read(d1.path().join(name)).unwrap();
        let b = std::fs::read(d2.path().join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical seeds");
    }
}

#[test]
fn bundle_reloads_identically() {
    let cfg = GeneratorConfig {
        n_firms: 300,
        n_banks: 4,
        seed: 13,
        ..Default::default()
    };
    let (inst, _) = generate(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = write_bundle(dir.path(), &inst);
    let loaded = load_instance(&paths).unwrap();

    assert_eq!(loaded.network.s_out(), inst.network.s_out());
    assert_eq!(loaded.network.s_in(), inst.network.s_in());
    assert_eq!(loaded.book.net_profit, inst.book.net_profit);
    assert_eq!(loaded.book.sector, inst.book.sector);
    assert_eq!(loaded.book.has_loan, inst.book.has_loan);
    assert_eq!(loaded.banks.equity(), inst.banks.equity());
    assert_eq!(loaded.criticality.len(), inst.criticality.len());

    let e1 = estimate_emissions(&inst.network, &inst.fuel_config, &inst.book.sector);
    let e2 = estimate_emissions(&loaded.network, &loaded.fuel_config, &loaded.book.sector);
    assert_eq!(e1.emissions, e2.emissions);
}

#[test]
fn sweep_from_files_matches_in_memory_sweep() {
    let cfg = GeneratorConfig {
        n_firms: 300,
        n_banks: 4,
        seed: 55,
        ..Default::default()
    };
    let (inst, _) = generate(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let paths = write_bundle(dir.path(), &inst);

    let mut config = RunConfig::from_generator(cfg);
    config.generator = None;
    config.input = Some(paths);
    config.prices = vec![45.0, 300.0];
    config.pass_through = PassThroughAxis::Both;
    config.production_fn = ProductionFnAxis::Both;
    config.validate().unwrap();

    let from_files = prepare(&config).unwrap();
    let (cells_files, err1) = run_cells(&from_files, &config);
    assert!(err1.is_none());

    let in_memory = prepare_instance(inst, 0.0).unwrap();
    let (cells_mem, err2) = run_cells(&in_memory, &config);
    assert!(err2.is_none());

    assert_eq!(cells_files.len(), cells_mem.len());
    for (a, b) in cells_files.iter().zip(&cells_mem) {
        assert_eq!(a.price, b.price);
        assert_eq!(a.direct_defaults, b.direct_defaults);
        assert_eq!(a.indirect_defaults, b.indirect_defaults);
        assert_eq!(a.total_output_loss, b.total_output_loss);
        assert_eq!(a.bank.system.total, b.bank.system.total);
    }
}

#[test]
fn reports_include_all_curve_files_and_optional_firm_detail() {
    use carbon_stress::scenario::run;
    let dir = tempfile::tempdir().unwrap();
    let mut config = RunConfig::from_generator(GeneratorConfig {
        n_firms: 200,
        n_banks: 3,
        seed: 8,
        ..Default::default()
    });
    config.prices = vec![45.0, 300.0];
    config.pass_through = PassThroughAxis::Both;
    config.production_fn = ProductionFnAxis::Both;
    config.firm_detail = true;
    config.output_dir = Some(dir.path().to_string_lossy().to_string());
    let cells = run(&config).unwrap();
    assert_eq!(cells.len(), 8);

    let read = |name: &str| std::fs::read_to_string(dir.path().join(name)).unwrap();
    let direct = read("direct_sweep.csv");
    // One row per (price, mode): header + 4.
    assert_eq!(direct.lines().count(), 5);
    assert!(direct.starts_with("price,mode,direct_output_loss,direct_defaults_count"));

    let bank = read("bank_losses.csv");
    assert_eq!(bank.lines().count(), 9, "header plus one row per cell");
    assert!(bank.starts_with("price,system_direct_loss,system_total_loss,fn,pass_through"));

    // Retained-cost dumps: one per (price, mode).
    for name in [
        "retained_p45_off.csv",
        "retained_p45_on.csv",
        "retained_p300_off.csv",
        "retained_p300_on.csv",
    ] {
        let text = read(name);
        assert!(text.starts_with("firm_id,retained_cost"));
        assert_eq!(text.lines().count(), 201);
    }

    // Firm detail lands in the cell JSON.
    let first_json = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .find(|e| e.file_name().to_string_lossy().starts_with("cell_0000"))
        .unwrap();
    let detail: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(first_json.path()).unwrap()).unwrap();
    assert_eq!(
        detail["firm_detail"]["production_levels"]
            .as_array()
            .unwrap()
            .len(),
        200
    );
    assert_eq!(
        detail["firm_detail"]["direct_default"].as_array().unwrap().len(),
        200
    );
}

#[test]
fn run_config_round_trips_through_toml() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
prices = [10.0, 45.0]
pass_through = "off"
production_fn = "gl"
lgd = 0.6
edge_threshold = 2.5

[generator]
n_firms = 50
n_banks = 2
seed = 9
emission_tail_exponent = 1.05
sector_mix = [["C", 0.5], ["G", 0.5]]
fuel_seller_fraction = 0.05
loan_coverage = 0.2
essentiality_rate = 0.1
"#;
    let path = dir.path().join("run.toml");
    std::fs::write(&path, text).unwrap();
    let config = RunConfig::load_toml(path.to_str().unwrap()).unwrap();
    assert_eq!(config.prices, vec![10.0, 45.0]);
    assert_eq!(config.pass_through, PassThroughAxis::Off);
    assert_eq!(config.production_fn, ProductionFnAxis::Gl);
    assert_eq!(config.lgd, 0.6);
    assert_eq!(config.edge_threshold, 2.5);
    // Defaults fill the rest.
    assert_eq!(config.epsilon, 1e-6);
    assert_eq!(config.coverage, 0.999999);
    assert!(config.demand_channel);
    let gen = config.generator.as_ref().unwrap();
    assert_eq!(gen.n_firms, 50);
    assert_eq!(gen.seed, 9);
}
