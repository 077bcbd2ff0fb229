//! Reproducible desk-scale data generation and golden fixtures.
//!
//! The generator produces a full model instance (network, books, banks,
//! fuel configuration, criticality table) from a seed. Out-strengths and
//! emissions follow a configurable power-law tail, a strongly connected
//! core of large firms with essential mutual inputs makes non-substitutable
//! cascades possible, and profit margins and fuel intensities are spread so
//! that breakeven prices cover the whole sweep range.
//!
//! Two handcrafted fixtures accompany it: [`toy_fixture`], a five-firm,
//! two-bank instance whose end state is known in closed form, and
//! [`systemic_core_fixture`], a network with a single choke-point supplier
//! feeding a strongly connected cluster.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, LogNormal, Pareto};
use serde::{Deserialize, Serialize};

use crate::emissions::{estimate_emissions, fuel_in_strengths, FuelSectorConfig};
use crate::error::{Error, Result};
use crate::finance::BankRegister;
use crate::network::{Edge, FirmBook, SupplyNetwork};
use crate::sector::{CriticalityTable, SectorCode};

/// Knobs for [`generate`]. The seed fully determines the output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_firms: usize,
    pub n_banks: usize,
    pub seed: u64,
    /// Tail exponent of out-strengths and emissions (survival function
    /// `~ x^-a`).
    pub emission_tail_exponent: f64,
    /// Categorical weights over section letters.
    pub sector_mix: Vec<(char, f64)>,
    /// Fraction of firms acting as fuel distributors.
    pub fuel_seller_fraction: f64,
    /// Fraction of firms holding bank loans.
    pub loan_coverage: f64,
    /// Probability that a (buyer sector, supplier sector) pair is essential.
    pub essentiality_rate: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_firms: 1000,
            n_banks: 20,
            seed: 42,
            emission_tail_exponent: 1.05,
            sector_mix: vec![
                ('A', 0.025),
                ('B', 0.005),
                ('C', 0.07),
                ('D', 0.01),
                ('E', 0.005),
                ('F', 0.10),
                ('G', 0.175),
                ('H', 0.03),
                ('I', 0.04),
                ('J', 0.045),
                ('K', 0.01),
                ('L', 0.06),
                ('M', 0.105),
                ('N', 0.04),
                ('Z', 0.28),
            ],
            fuel_seller_fraction: 0.004,
            loan_coverage: 0.15,
            essentiality_rate: 0.15,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_firms < 2 {
            return Err(Error::Config("n_firms must be at least 2".into()));
        }
        for (name, v) in [
            ("fuel_seller_fraction", self.fuel_seller_fraction),
            ("loan_coverage", self.loan_coverage),
            ("essentiality_rate", self.essentiality_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.n_banks == 0 && self.loan_coverage > 0.0 {
            return Err(Error::Config(
                "loan_coverage > 0 requires at least one bank".into(),
            ));
        }
        if self.emission_tail_exponent.is_nan() || self.emission_tail_exponent <= 0.0 {
            return Err(Error::Config("tail exponent must be positive".into()));
        }
        if self.sector_mix.is_empty() || self.sector_mix.iter().any(|(_, w)| *w < 0.0) {
            return Err(Error::Config("sector mix must be non-empty, non-negative".into()));
        }
        Ok(())
    }
}

/// A complete generated model instance.
#[derive(Debug, Clone)]
pub struct ModelInstance {
    pub network: SupplyNetwork,
    pub book: FirmBook,
    pub banks: BankRegister,
    pub fuel_config: FuelSectorConfig,
    pub criticality: CriticalityTable,
}

/// Tail diagnostics of a generated instance.
#[derive(Debug, Clone, Serialize)]
pub struct GeneratorReport {
    /// Hill estimate of the out-strength tail exponent.
    pub strength_tail_exponent: f64,
    /// Hill estimate of the emission tail exponent.
    pub emission_tail_exponent: f64,
    /// Two-sided Kolmogorov-Smirnov distance of the out-strength tail to a
    /// Pareto with the configured exponent.
    pub strength_tail_ks: f64,
    pub emission_tail_ks: f64,
    /// Size of the wired strongly connected core.
    pub core_size: usize,
    pub edges: usize,
    pub emitters: usize,
}

/// Hill tail-exponent estimate from the top `k` order statistics.
pub fn hill_exponent(values: &[f64], k: usize) -> f64 {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let k = k.min(sorted.len().saturating_sub(1));
    if k == 0 {
        return f64::NAN;
    }
    let threshold = sorted[k];
    let mean_log: f64 = sorted[..k]
        .iter()
        .map(|x| (x / threshold).ln())
        .sum::<f64>()
        / k as f64;
    1.0 / mean_log
}

/// KS distance of the top-`k` tail to a Pareto with exponent `alpha`
/// anchored at the (k+1)-th largest value.
pub fn tail_ks_distance(values: &[f64], k: usize, alpha: f64) -> f64 {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let k = k.min(sorted.len().saturating_sub(1));
    if k == 0 {
        return f64::NAN;
    }
    let x_min = sorted[k];
    let mut d = 0.0f64;
    // Largest first: empirical survival of sorted[i] is (i+1)/k.
    for (i, x) in sorted[..k].iter().enumerate() {
        let model = (x / x_min).powf(-alpha);
        let emp_hi = (i + 1) as f64 / k as f64;
        let emp_lo = i as f64 / k as f64;
        d = d.max((model - emp_hi).abs()).max((model - emp_lo).abs());
    }
    d
}

const STRENGTH_SCALE: f64 = 10.0;
const INELIGIBLE_RATE: f64 = 0.1;

/// Non-fuel class codes per section (fuel classes are assigned separately).
fn class_pool(section: char) -> Vec<String> {
    match section {
        'Z' => vec!["Z".to_string()],
        s => (1..=3).map(|k| format!("{s}{:02}.{k}.1", 10 + k)).collect(),
    }
}

/// Generates a full instance plus tail diagnostics.
pub fn generate(cfg: &GeneratorConfig) -> Result<(ModelInstance, GeneratorReport)> {
    cfg.validate()?;
    let n = cfg.n_firms;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);

    // --- sectors ---------------------------------------------------------
    let weights: Vec<f64> = cfg.sector_mix.iter().map(|(_, w)| *w).collect();
    let total_w: f64 = weights.iter().sum();
    let mut sectors: Vec<SectorCode> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pick = rng.gen_range(0.0..total_w);
        let mut section = cfg.sector_mix[0].0;
        for (s, w) in &cfg.sector_mix {
            if pick < *w {
                section = *s;
                break;
            }
            pick -= w;
        }
        let pool = class_pool(section);
        let class = &pool[rng.gen_range(0..pool.len())];
        sectors.push(SectorCode::parse(class).unwrap());
    }

    // Fuel distributors: a small set of dedicated firms.
    let gas_classes = ["D35.2.1", "D35.2.2", "D35.2.3"];
    let oil_classes = ["C19.2.0", "G46.7.1", "G47.3.0"];
    let n_fuel = ((n as f64) * cfg.fuel_seller_fraction).round() as usize;
    let (n_gas, n_oil) = if cfg.fuel_seller_fraction > 0.0 {
        // Oil distribution is far more fragmented than gas.
        let g = ((n_fuel as f64) * 0.1).round().max(1.0) as usize;
        (g, n_fuel.saturating_sub(g).max(1))
    } else {
        (0, 0)
    };
    let mut fuel_sellers: Vec<usize> = rand::seq::index::sample(
        &mut rng,
        n,
        (n_gas + n_oil).min(n / 2),
    )
    .into_vec();
    fuel_sellers.sort_unstable();
    let gas_sellers: Vec<usize> = fuel_sellers.iter().copied().take(n_gas).collect();
    let oil_sellers: Vec<usize> = fuel_sellers.iter().copied().skip(n_gas).collect();
    for (k, &i) in gas_sellers.iter().enumerate() {
        sectors[i] = SectorCode::parse(gas_classes[k % gas_classes.len()]).unwrap();
    }
    for (k, &i) in oil_sellers.iter().enumerate() {
        sectors[i] = SectorCode::parse(oil_classes[k % oil_classes.len()]).unwrap();
    }
    let is_fuel: Vec<bool> = {
        let mut v = vec![false; n];
        for &i in &fuel_sellers {
            v[i] = true;
        }
        v
    };

    // Demote singleton non-fuel classes to the unknown sector so that
    // market shares of 1 stay the rare case they are in reality.
    {
        let mut counts: std::collections::HashMap<&SectorCode, usize> =
            std::collections::HashMap::new();
        for s in &sectors {
            *counts.entry(s).or_insert(0) += 1;
        }
        let singles: Vec<usize> = (0..n)
            .filter(|&i| !is_fuel[i] && counts[&sectors[i]] == 1)
            .collect();
        for i in singles {
            sectors[i] = SectorCode::unknown();
        }
    }

    // --- endpoint firms ----------------------------------------------------
    // A sizable share of firms sell to households only: they have no
    // out-links in the firm-to-firm network and absorb demand shocks the
    // way final consumption does. Without them the proportional demand
    // rule has no floor and any shock grinds the whole economy to zero.
    let mut is_endpoint = vec![false; n];
    {
        let candidates: Vec<usize> = (0..n).filter(|&i| !is_fuel[i]).collect();
        let n_endpoints = (candidates.len() as f64 * 0.25).round() as usize;
        for idx in rand::seq::index::sample(&mut rng, candidates.len(), n_endpoints).iter() {
            is_endpoint[candidates[idx]] = true;
        }
    }
    let endpoints: Vec<usize> = (0..n).filter(|&i| is_endpoint[i]).collect();

    // --- size targets and generic trade edges ----------------------------
    let pareto = Pareto::new(STRENGTH_SCALE, cfg.emission_tail_exponent)
        .map_err(|e| Error::Config(format!("pareto: {e}")))?;
    let size_cap = STRENGTH_SCALE * ((20 * n) as f64).powf(1.0 / cfg.emission_tail_exponent);
    let target: Vec<f64> = (0..n)
        .map(|_| pareto.sample(&mut rng).min(size_cap))
        .collect();

    let mut edges: Vec<Edge> = Vec::new();
    for i in 0..n {
        if is_fuel[i] || is_endpoint[i] {
            continue; // fuel and endpoint sales are wired separately
        }
        let degree = (3.0 + 7.4 * (1.0 + target[i] / STRENGTH_SCALE).ln()).floor() as usize;
        let degree = degree.clamp(2, 128.max(n / 10)).min(n - 1);
        let split: Vec<f64> = (0..degree).map(|_| rng.gen_range(0.5..1.5)).collect();
        let split_total: f64 = split.iter().sum();
        for z in split {
            // Roughly 45% of intermediate sales terminate at endpoints.
            let buyer = if !endpoints.is_empty() && rng.gen_bool(0.45) {
                endpoints[rng.gen_range(0..endpoints.len())]
            } else {
                let mut b = rng.gen_range(0..n);
                if b == i {
                    b = (b + 1) % n;
                }
                b
            };
            if buyer == i {
                continue;
            }
            edges.push(Edge {
                supplier: i as u32,
                buyer: buyer as u32,
                value: target[i] * z / split_total,
            });
        }
    }

    // --- strongly connected core of large firms --------------------------
    let core_size = (n / 200).clamp(2, 64);
    let mut by_size: Vec<usize> = (0..n).filter(|&i| !is_fuel[i] && !is_endpoint[i]).collect();
    by_size.sort_by(|&a, &b| target[b].partial_cmp(&target[a]).unwrap());
    let core: Vec<usize> = by_size.into_iter().take(core_size).collect();
    let mut criticality = CriticalityTable::new();
    for k in 0..core.len() {
        let from = core[k];
        let to = core[(k + 1) % core.len()];
        if from == to {
            continue;
        }
        edges.push(Edge {
            supplier: from as u32,
            buyer: to as u32,
            value: 0.35 * target[from],
        });
        criticality.set(sectors[to].clone(), sectors[from].clone(), true);
    }

    // --- fuel purchases ---------------------------------------------------
    let intensity = LogNormal::new((0.06f64).ln(), 1.2)
        .map_err(|e| Error::Config(format!("lognormal: {e}")))?;
    let mut fuel_customers = vec![0usize; n];
    for i in 0..n {
        if is_fuel[i] {
            continue; // endpoints do buy fuel; distributors do not
        }
        for (sellers, prob) in [(&gas_sellers, 0.35), (&oil_sellers, 0.4)] {
            if sellers.is_empty() || !rng.gen_bool(prob) {
                continue;
            }
            let seller = sellers[rng.gen_range(0..sellers.len())];
            let amount = target[i] * intensity.sample(&mut rng);
            edges.push(Edge {
                supplier: seller as u32,
                buyer: i as u32,
                value: amount.max(1e-6),
            });
            fuel_customers[seller] += 1;
        }
    }
    // Every distributor needs at least one customer.
    for &seller in gas_sellers.iter().chain(&oil_sellers) {
        if fuel_customers[seller] == 0 {
            let mut buyer = rng.gen_range(0..n);
            while is_fuel[buyer] {
                buyer = (buyer + 1) % n;
            }
            edges.push(Edge {
                supplier: seller as u32,
                buyer: buyer as u32,
                value: 0.02 * target[buyer].max(STRENGTH_SCALE),
            });
        }
    }

    let network = SupplyNetwork::from_edges(n, &edges)?;

    // --- criticality over used sector pairs ------------------------------
    {
        let mut used: Vec<&SectorCode> = sectors.iter().collect();
        used.sort();
        used.dedup();
        let fuel_codes: Vec<SectorCode> = gas_classes
            .iter()
            .chain(&oil_classes)
            .map(|c| SectorCode::parse(c).unwrap())
            .collect();
        for buyer in &used {
            for supplier in &used {
                if buyer == supplier && buyer.as_str() == "Z" {
                    continue;
                }
                // Fuel inputs stay substitutable so that distributor
                // failures do not dominate every cascade.
                if fuel_codes.iter().any(|f| supplier.is_within(f)) {
                    continue;
                }
                if rng.gen_bool(cfg.essentiality_rate) {
                    criticality.set((*buyer).clone(), (*supplier).clone(), true);
                }
            }
        }
    }

    // --- fuel configuration: totals chosen so breakeven prices span the
    // --- sweep range ------------------------------------------------------
    let fuel_config_raw = FuelSectorConfig {
        gas_sectors: gas_classes.iter().map(|c| SectorCode::parse(c).unwrap()).collect(),
        oil_sectors: oil_classes.iter().map(|c| SectorCode::parse(c).unwrap()).collect(),
        total_gas_emissions_t: 1.0,
        total_oil_emissions_t: 1.0,
        excluded_sectors: vec![
            SectorCode::parse("K").unwrap(),
            SectorCode::parse("G46.1.2").unwrap(),
        ],
    };

    // --- books ------------------------------------------------------------
    let s_out = network.s_out();
    let s_in = network.s_in();
    let mut book = FirmBook {
        revenue: vec![0.0; n],
        material_costs: vec![0.0; n],
        other_income: vec![0.0; n],
        operating_profit: vec![0.0; n],
        net_profit: vec![0.0; n],
        equity: vec![0.0; n],
        liquidity: vec![0.0; n],
        retained_earnings: vec![0.0; n],
        sector: sectors.clone(),
        has_loan: vec![false; n],
    };
    let margin_dist = LogNormal::new((0.08f64).ln(), 0.9)
        .map_err(|e| Error::Config(format!("lognormal: {e}")))?;
    for i in 0..n {
        // Revenue covers household and export sales beyond the in-network
        // out-strength (endpoint firms have no in-network sales at all).
        let r = s_out[i].max(s_in[i]).max(STRENGTH_SCALE) * rng.gen_range(1.05..1.4);
        let c_mat = s_in[i] * rng.gen_range(1.0..1.2) + 0.05 * r;
        let margin = margin_dist.sample(&mut rng).clamp(0.01, 0.35);
        let p = r * margin;
        let ineligible = rng.gen_bool(INELIGIBLE_RATE);
        let net = if ineligible {
            -(0.02 * r)
        } else {
            p * rng.gen_range(0.55..0.85)
        };
        book.revenue[i] = r;
        book.material_costs[i] = c_mat;
        book.operating_profit[i] = p;
        book.other_income[i] = p - r + c_mat;
        book.net_profit[i] = net;
        book.equity[i] = p * rng.gen_range(2.0..10.0) + 0.1 * r;
        book.liquidity[i] = r * rng.gen_range(0.05..0.3) + p * rng.gen_range(0.5..2.0);
        book.retained_earnings[i] = net.max(0.0) * rng.gen_range(0.2..1.2);
    }

    // Scale fuel totals so that the median emitter's breakeven price sits
    // near the middle of the usual sweep range.
    let strengths = fuel_in_strengths(&network, &fuel_config_raw, &sectors);
    let mut raw_breakevens: Vec<f64> = (0..n)
        .filter(|&i| {
            !strengths.roles.is_distributor(i)
                && !strengths.roles.excluded[i]
                && book.net_profit[i] > 0.0
        })
        .filter_map(|i| {
            let share = if strengths.s_out_gas > 0.0 {
                strengths.s_in_gas[i] / strengths.s_out_gas
            } else {
                0.0
            } + if strengths.s_out_oil > 0.0 {
                strengths.s_in_oil[i] / strengths.s_out_oil
            } else {
                0.0
            };
            (share > 0.0).then(|| book.net_profit[i] / share)
        })
        .collect();
    raw_breakevens.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let scale = if raw_breakevens.is_empty() {
        1.0
    } else {
        raw_breakevens[raw_breakevens.len() / 2] / 150.0
    };
    let gas_mass: f64 = strengths.s_in_gas.iter().sum();
    let oil_mass: f64 = strengths.s_in_oil.iter().sum();
    let mass = (gas_mass + oil_mass).max(1e-12);
    let fuel_config = FuelSectorConfig {
        total_gas_emissions_t: scale * gas_mass / mass,
        total_oil_emissions_t: scale * oil_mass / mass,
        ..fuel_config_raw
    };
    fuel_config.validate()?;

    // --- banks and loans ---------------------------------------------------
    let banks = if cfg.n_banks > 0 {
        let mut principal_total = 0.0;
        let mut loans: Vec<(u32, u32, f64)> = Vec::new();
        for i in 0..n {
            if !rng.gen_bool(cfg.loan_coverage) {
                continue;
            }
            let n_loans = if rng.gen_bool(0.2) { 2 } else { 1 };
            for _ in 0..n_loans {
                let bank = rng.gen_range(0..cfg.n_banks) as u32;
                let principal =
                    (book.equity[i] + book.liquidity[i]) * rng.gen_range(0.08..0.35);
                principal_total += principal;
                loans.push((i as u32, bank, principal));
            }
        }
        // Bank sizes follow a mild power law; total equity is sized so the
        // system-wide loans-to-equity ratio is realistic.
        let raw: Vec<f64> = (0..cfg.n_banks)
            .map(|k| ((k + 1) as f64).powf(-0.7) * rng.gen_range(0.8..1.2))
            .collect();
        let raw_total: f64 = raw.iter().sum();
        let equity_total = (principal_total / 1.8).max(1.0);
        let equity: Vec<f64> = raw.iter().map(|w| w / raw_total * equity_total).collect();
        BankRegister::new(n, equity, &loans)?
    } else {
        BankRegister::new(n, Vec::new(), &[])?
    };
    banks.mark_loans(&mut book);

    // --- diagnostics --------------------------------------------------------
    let emissions = estimate_emissions(&network, &fuel_config, &sectors);
    let k = (n / 8).clamp(10, 500);
    let report = GeneratorReport {
        strength_tail_exponent: hill_exponent(network.s_out(), k),
        emission_tail_exponent: hill_exponent(&emissions.emissions, k),
        strength_tail_ks: tail_ks_distance(network.s_out(), k, cfg.emission_tail_exponent),
        emission_tail_ks: tail_ks_distance(&emissions.emissions, k, cfg.emission_tail_exponent),
        core_size,
        edges: network.edge_count(),
        emitters: emissions.emitter_count(),
    };

    Ok((
        ModelInstance {
            network,
            book,
            banks,
            fuel_config,
            criticality,
        },
        report,
    ))
}

/// Five firms, two banks, one gas distributor.
///
/// Arrangement (values chosen so the end state is exact in binary):
///
/// * firm 0 (`D35.2.1`) distributes gas: 8 units to firm 4, 2 to firm 3,
///   so firm 4 carries 80 t of the 100 t gas total and firm 3 carries 20 t;
/// * firm 4 (`C20.1.0`) is the sole essential supplier of firms 1 and 2;
///   its net profit of 3000 is exhausted at a carbon price of 37.5/t;
/// * firm 3 buys gas but earns enough to absorb its carbon costs;
/// * books are set so that once firm 4 fails, firm 0 (demand collapse to
///   20%) and firms 1 and 2 (no essential input) all turn illiquid;
/// * bank equities are 10 and loans 1 each: bank 0 lends to firm 0,
///   bank 1 lends to firms 1, 2, 3 and 4.
///
/// At a carbon price of 45/t without pass-through, firm 4 defaults
/// directly, firms 0, 1, 2 default indirectly, and the banks lose exactly
/// 10% and 30% of their equity (20% system-wide).
pub fn toy_fixture() -> ModelInstance {
    let sectors: Vec<SectorCode> = ["D35.2.1", "C10.1.1", "F41.2.0", "G46.9.0", "C20.1.0"]
        .iter()
        .map(|c| SectorCode::parse(c).unwrap())
        .collect();
    let edges = [
        Edge { supplier: 0, buyer: 4, value: 8.0 },
        Edge { supplier: 0, buyer: 3, value: 2.0 },
        Edge { supplier: 4, buyer: 1, value: 6.0 },
        Edge { supplier: 4, buyer: 2, value: 5.0 },
        Edge { supplier: 1, buyer: 3, value: 6.0 },
        Edge { supplier: 2, buyer: 3, value: 5.0 },
    ];
    let network = SupplyNetwork::from_edges(5, &edges).unwrap();

    let mut criticality = CriticalityTable::new();
    criticality.set(
        SectorCode::parse("C10.1.1").unwrap(),
        SectorCode::parse("C20.1.0").unwrap(),
        true,
    );
    criticality.set(
        SectorCode::parse("F41.2.0").unwrap(),
        SectorCode::parse("C20.1.0").unwrap(),
        true,
    );

    let fuel_config = FuelSectorConfig {
        gas_sectors: vec![SectorCode::parse("D35.2.1").unwrap()],
        oil_sectors: vec![],
        total_gas_emissions_t: 100.0,
        total_oil_emissions_t: 0.0,
        excluded_sectors: vec![SectorCode::parse("K").unwrap()],
    };

    //                   firm 0   firm 1  firm 2  firm 3   firm 4
    let revenue = vec![1000.0, 600.0, 500.0, 2000.0, 11000.0];
    let material = vec![200.0, 300.0, 250.0, 500.0, 4000.0];
    let op_profit = vec![800.0, 300.0, 250.0, 1500.0, 7000.0];
    let net_profit = vec![600.0, 200.0, 180.0, 1200.0, 3000.0];
    let equity = vec![2000.0, 800.0, 700.0, 5000.0, 9000.0];
    let liquidity = vec![500.0, 200.0, 150.0, 3000.0, 2500.0];
    let retained = vec![100.0, 50.0, 40.0, 400.0, 300.0];
    let n = 5;
    let mut book = FirmBook {
        other_income: (0..n)
            .map(|i| op_profit[i] - revenue[i] + material[i])
            .collect(),
        revenue,
        material_costs: material,
        operating_profit: op_profit,
        net_profit,
        equity,
        liquidity,
        retained_earnings: retained,
        sector: sectors,
        has_loan: vec![false; n],
    };

    let banks = BankRegister::new(
        5,
        vec![10.0, 10.0],
        &[
            (0, 0, 1.0),
            (1, 1, 1.0),
            (2, 1, 1.0),
            (3, 1, 1.0),
            (4, 1, 1.0),
        ],
    )
    .unwrap();
    banks.mark_loans(&mut book);

    ModelInstance {
        network,
        book,
        banks,
        fuel_config,
        criticality,
    }
}

/// A network with one choke-point firm: the sole essential supplier of a
/// strongly connected ring of firms holding ~46% of all sales.
///
/// Arrangement:
///
/// * firm 0 distributes 64 units of gas: 4 to the choke-point firm 1,
///   2 each to six small emitters, 48 to the household-facing sink (an
///   excluded fuel agent), so every share of the 16000 t total is an exact
///   binary fraction (firm 1: 1000 t, small emitters: 500 t each);
/// * firm 1 feeds every ring firm (sole essential input) and earns
///   300000, so its costs exhaust profits exactly at 300/t;
/// * the 45 ring firms trade in a cycle (non-essential), sell the rest to
///   the sink, and are sized to ~45% of total sales; their books fail once
///   production falls below two thirds;
/// * small emitters default at 10, 60, 110, 160, 210, 260/t, giving the
///   loss curve a gentle pre-jump slope.
///
/// Under the non-substitutable regime the choke-point default at 300/t
/// collapses the whole ring; under the substitutable regime the ring only
/// loses the choke-point input share.
pub fn systemic_core_fixture() -> ModelInstance {
    const RING: usize = 45;
    const N_EMITTERS: usize = 6;
    const N_BACKGROUND: usize = 200;
    let gas = 0usize;
    let hub = 1usize;
    let ring0 = 2usize;
    let sink = ring0 + RING;
    let bg0 = sink + 1;
    let n = bg0 + N_BACKGROUND;

    let mut sectors = vec![SectorCode::parse("F41.2.0").unwrap(); n];
    sectors[gas] = SectorCode::parse("D35.2.1").unwrap();
    sectors[hub] = SectorCode::parse("C20.1.0").unwrap();
    for k in 0..RING {
        sectors[ring0 + k] = SectorCode::parse("C10.1.1").unwrap();
    }
    // The sink resells fuel and goods to households; as a fuel agent it is
    // excluded from emission attribution, so its large gas purchase drops
    // out of the distributable mass instead of turning it into an emitter.
    sectors[sink] = SectorCode::parse("G46.1.2").unwrap();

    let mut edges = Vec::new();
    // Gas sales of 64 in total (4 to the hub, 2 per small emitter, 48 to
    // the sink) keep every fuel share an exact binary fraction.
    edges.push(Edge { supplier: gas as u32, buyer: hub as u32, value: 4.0 });
    for k in 0..N_EMITTERS {
        edges.push(Edge {
            supplier: gas as u32,
            buyer: (bg0 + k) as u32,
            value: 2.0,
        });
    }
    edges.push(Edge { supplier: gas as u32, buyer: sink as u32, value: 48.0 });
    // Hub: 40 spread over the ring, 10 to the sink.
    let hub_share = 40.0 / RING as f64;
    for k in 0..RING {
        edges.push(Edge {
            supplier: hub as u32,
            buyer: (ring0 + k) as u32,
            value: hub_share,
        });
    }
    edges.push(Edge { supplier: hub as u32, buyer: sink as u32, value: 10.0 });
    // Ring cycle plus sales to the sink; each ring firm sells 10 in total.
    let ring_w = 160.0 / RING as f64;
    for k in 0..RING {
        let from = ring0 + k;
        let to = ring0 + (k + 1) % RING;
        edges.push(Edge { supplier: from as u32, buyer: to as u32, value: ring_w });
        edges.push(Edge {
            supplier: from as u32,
            buyer: sink as u32,
            value: 10.0 - ring_w,
        });
    }
    // Background firms sell to the sink only.
    for k in 0..N_BACKGROUND {
        edges.push(Edge {
            supplier: (bg0 + k) as u32,
            buyer: sink as u32,
            value: 2.25,
        });
    }
    let network = SupplyNetwork::from_edges(n, &edges).unwrap();

    let mut criticality = CriticalityTable::new();
    criticality.set(
        SectorCode::parse("C10.1.1").unwrap(),
        SectorCode::parse("C20.1.0").unwrap(),
        true,
    );

    let fuel_config = FuelSectorConfig {
        gas_sectors: vec![SectorCode::parse("D35.2.1").unwrap()],
        oil_sectors: vec![],
        total_gas_emissions_t: 16_000.0,
        total_oil_emissions_t: 0.0,
        excluded_sectors: vec![
            SectorCode::parse("K").unwrap(),
            SectorCode::parse("G46.1.2").unwrap(),
        ],
    };

    let mut book = FirmBook {
        revenue: vec![0.0; n],
        material_costs: vec![0.0; n],
        other_income: vec![0.0; n],
        operating_profit: vec![0.0; n],
        net_profit: vec![0.0; n],
        equity: vec![0.0; n],
        liquidity: vec![0.0; n],
        retained_earnings: vec![0.0; n],
        sector: sectors,
        has_loan: vec![false; n],
    };
    let mut set_book = |i: usize, r: f64, c: f64, p: f64, net: f64, z: f64, a: f64| {
        book.revenue[i] = r;
        book.material_costs[i] = c;
        book.operating_profit[i] = p;
        book.other_income[i] = p - r + c;
        book.net_profit[i] = net;
        book.equity[i] = z;
        book.liquidity[i] = a;
        book.retained_earnings[i] = 0.1 * net;
    };
    // Gas seller: thin margin, sturdy liquidity.
    set_book(gas, 100.0, 90.0, 10.0, 8.0, 200.0, 50.0);
    // Choke point: 4 of 64 gas units = 1000 t estimated, so its 300000
    // profit is exhausted exactly at 300/t.
    set_book(hub, 1_000_000.0, 600_000.0, 400_000.0, 300_000.0, 2e6, 1e6);
    // Ring firms: margin 30 on sales of 40, liquidity 10; they turn
    // illiquid when production falls below 2/3.
    for k in 0..RING {
        set_book(ring0 + k, 40.0, 10.0, 30.0, 20.0, 100.0, 10.0);
    }
    set_book(sink, 5000.0, 1000.0, 4000.0, 3000.0, 1e5, 1e5);
    // Background: six emitters of 500 t each with breakevens spread below
    // the jump (profit = 500 t * breakeven), the rest sturdy non-emitters.
    // Emitter buffers scale with the carbon bill so that prices below the
    // breakeven never push them into indirect default.
    let breakevens = [10.0, 60.0, 110.0, 160.0, 210.0, 260.0];
    for (k, &breakeven) in breakevens.iter().enumerate() {
        let profit = 500.0 * breakeven;
        let i = bg0 + k;
        let op = 1.25 * profit;
        set_book(i, 1.5625 * profit, 0.3125 * profit, op, profit, 1.5 * profit, 1.1 * profit);
    }
    for k in N_EMITTERS..N_BACKGROUND {
        set_book(bg0 + k, 500.0, 450.0, 50.0, 40.0, 5000.0, 2000.0);
    }

    let mut loans: Vec<(u32, u32, f64)> = vec![(hub as u32, 0, 30.0)];
    for k in 0..RING {
        loans.push(((ring0 + k) as u32, (k % 2) as u32, 1.0));
    }
    for k in 0..N_EMITTERS {
        loans.push(((bg0 + k) as u32, 1, 2.0));
    }
    let banks = BankRegister::new(n, vec![200.0, 200.0], &loans).unwrap();
    banks.mark_loans(&mut book);

    ModelInstance {
        network,
        book,
        banks,
        fuel_config,
        criticality,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emissions::estimate_emissions;

    #[test]
    fn generator_is_deterministic() {
        let cfg = GeneratorConfig { n_firms: 300, ..Default::default() };
        let (a, ra) = generate(&cfg).unwrap();
        let (b, rb) = generate(&cfg).unwrap();
        assert_eq!(a.network.edge_count(), b.network.edge_count());
        assert_eq!(a.network.s_out(), b.network.s_out());
        assert_eq!(a.book.net_profit, b.book.net_profit);
        assert_eq!(a.banks.equity(), b.banks.equity());
        assert_eq!(ra.edges, rb.edges);
        let ea = estimate_emissions(&a.network, &a.fuel_config, &a.book.sector);
        let eb = estimate_emissions(&b.network, &b.fuel_config, &b.book.sector);
        assert_eq!(ea.emissions, eb.emissions);
    }

    #[test]
    fn different_seeds_differ() {
        let cfg = GeneratorConfig { n_firms: 300, ..Default::default() };
        let cfg2 = GeneratorConfig { seed: 43, ..cfg.clone() };
        let (a, _) = generate(&cfg).unwrap();
        let (b, _) = generate(&cfg2).unwrap();
        assert_ne!(a.network.s_out(), b.network.s_out());
    }

    #[test]
    fn tail_exponent_close_to_target() {
        let cfg = GeneratorConfig { n_firms: 1000, ..Default::default() };
        let (_, report) = generate(&cfg).unwrap();
        assert!(
            (report.strength_tail_exponent - 1.05).abs() <= 0.15,
            "hill strength exponent {}",
            report.strength_tail_exponent
        );
        assert!(
            (report.emission_tail_exponent - 1.05).abs() <= 0.3,
            "hill emission exponent {}",
            report.emission_tail_exponent
        );
    }

    #[test]
    fn no_fuel_sellers_no_emissions() {
        let cfg = GeneratorConfig {
            n_firms: 200,
            fuel_seller_fraction: 0.0,
            ..Default::default()
        };
        let (inst, _) = generate(&cfg).unwrap();
        let report = estimate_emissions(&inst.network, &inst.fuel_config, &inst.book.sector);
        assert!(report.emissions.iter().all(|&e| e == 0.0));
        assert!(report.degenerate_gas && report.degenerate_oil);
    }

    #[test]
    fn infeasible_config_rejected() {
        let cfg = GeneratorConfig { n_banks: 0, loan_coverage: 0.5, ..Default::default() };
        assert!(generate(&cfg).is_err());
        let cfg = GeneratorConfig { n_firms: 1, ..Default::default() };
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn generated_instances_satisfy_invariants() {
        let cfg = GeneratorConfig { n_firms: 500, seed: 7, ..Default::default() };
        let (inst, report) = generate(&cfg).unwrap();
        // Strength consistency.
        for i in 0..inst.network.firm_count() {
            let s: f64 = inst.network.out_edges(i as u32).map(|(_, v)| v).sum();
            assert_eq!(s, inst.network.s_out()[i]);
        }
        // Eligible firms have strictly positive survival buffers at rest.
        for i in 0..inst.book.len() {
            if inst.book.default_eligible(i) {
                assert!(inst.book.equity[i] + inst.book.retained_earnings[i] > 0.0);
                assert!(inst.book.liquidity[i] > 0.0);
            }
        }
        // Calibration must succeed on generated data.
        crate::production::calibrate(&inst.network, &inst.book.sector, &inst.criticality)
            .unwrap();
        // The core ring is wired.
        assert!(report.core_size >= 2);
        assert!(report.emitters > 0);
    }

    #[test]
    fn toy_without_supply_links_leaves_direct_losses_only() {
        // Estimate emissions on the full fixture, then drop every link
        // before the stress stage: contagion has nothing to travel on, so
        // only the direct defaulter's loan is written off.
        let inst = toy_fixture();
        let emissions =
            estimate_emissions(&inst.network, &inst.fuel_config, &inst.book.sector);
        let gamma = crate::passthrough::initial_costs(&emissions.emissions, 45.0);
        let eligible = inst.book.eligibility();
        let chi_dir = crate::shock::direct_defaults(&inst.book, &gamma, &eligible);
        assert_eq!(chi_dir, vec![false, false, false, false, true]);

        let stripped = inst.network.threshold(f64::INFINITY).network;
        assert_eq!(stripped.edge_count(), 0);
        let params = crate::production::calibrate(
            &stripped,
            &inst.book.sector,
            &inst.criticality,
        )
        .unwrap();
        let h_init = crate::contagion::kill_set(5, [4]);
        let result = crate::contagion::propagate(
            &stripped,
            &params,
            &h_init,
            &crate::contagion::ContagionSettings::new(crate::production::ProductionFn::Gl),
        )
        .unwrap();
        assert_eq!(&result.h_final[..4], &[1.0; 4]);

        let projected =
            crate::finance::project_books(&inst.book, &result.h_final, &gamma, &chi_dir);
        let chi_indir = crate::finance::indirect_defaults(&projected, &chi_dir, &eligible);
        assert!(chi_indir.iter().all(|&d| !d));
        let report =
            crate::finance::bank_losses(&inst.banks, &inst.book, &chi_dir, &chi_indir, 1.0, None);
        assert_eq!(report.per_bank[0].total, 0.0, "bank 1 sees no direct losses");
        assert_eq!(report.per_bank[1].total, 0.1);
        assert_eq!(report.system.total, 0.05);
    }

    #[test]
    fn toy_hub_fsri_is_one_fifth_of_system_equity() {
        let inst = toy_fixture();
        let params = crate::production::calibrate(
            &inst.network,
            &inst.book.sector,
            &inst.criticality,
        )
        .unwrap();
        let scores = crate::contagion::fsri(
            &inst.network,
            &params,
            crate::production::ProductionFn::Gl,
            1e-9,
            &inst.banks,
            &inst.book,
            1.0,
        )
        .unwrap();
        assert_eq!(scores[4], 0.2, "the distributor-dependent hub wipes 20%");
    }

    #[test]
    fn hill_estimator_recovers_known_exponent() {
        // Exact Pareto sample via inverse CDF.
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let alpha = 1.5;
        let sample: Vec<f64> = (0..5000)
            .map(|_| {
                let u: f64 = rng.gen_range(0.0f64..1.0).max(1e-12);
                u.powf(-1.0 / alpha)
            })
            .collect();
        let hat = hill_exponent(&sample, 600);
        assert!((hat - alpha).abs() < 0.2, "hill {hat}");
        let ks = tail_ks_distance(&sample, 600, alpha);
        assert!(ks < 0.1, "ks {ks}");
    }
}
