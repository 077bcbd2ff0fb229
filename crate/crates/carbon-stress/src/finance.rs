//! Balance-sheet translation and bank loan write-offs.
//!
//! Reduced production levels shrink a firm's revenue and material costs
//! proportionally for one year; the profit reduction plus retained carbon
//! costs deplete equity and liquidity. Firms whose projected equity or
//! liquidity reaches zero default indirectly, and banks write off the loans
//! of every defaulted client against their own equity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::FirmBook;
use crate::sector::{csv_open_err, csv_row_err};

/// Bank equities and the firm-to-bank loan matrix (sparse, grouped by firm;
/// multiple loans between the same pair are pre-summed at load).
#[derive(Debug, Clone)]
pub struct BankRegister {
    equity: Vec<f64>,
    loan_offsets: Vec<u32>,
    loan_banks: Vec<u32>,
    loan_principals: Vec<f64>,
}

impl BankRegister {
    /// Builds a register from raw loan rows. Bank ids must be `0..m`;
    /// duplicate (firm, bank) pairs are summed.
    pub fn new(
        n_firms: usize,
        equity: Vec<f64>,
        loans: &[(u32, u32, f64)],
    ) -> Result<Self> {
        let m = equity.len();
        for (k, e) in equity.iter().enumerate() {
            if !e.is_finite() || *e <= 0.0 {
                return Err(Error::Config(format!(
                    "bank {k} equity must be strictly positive, got {e}"
                )));
            }
        }
        for &(firm, bank, principal) in loans {
            if firm as usize >= n_firms {
                return Err(Error::Config(format!("loan references unknown firm {firm}")));
            }
            if bank as usize >= m {
                return Err(Error::Config(format!("loan references unknown bank {bank}")));
            }
            if !principal.is_finite() || principal < 0.0 {
                return Err(Error::Config(format!(
                    "loan principal must be non-negative, got {principal}"
                )));
            }
        }
        let mut sorted: Vec<(u32, u32, f64)> = loans.to_vec();
        sorted.sort_by_key(|&(firm, bank, _)| (firm, bank));
        let mut merged: Vec<(u32, u32, f64)> = Vec::with_capacity(sorted.len());
        for (firm, bank, p) in sorted {
            match merged.last_mut() {
                Some((f, b, acc)) if *f == firm && *b == bank => *acc += p,
                _ => merged.push((firm, bank, p)),
            }
        }
        let mut loan_offsets = vec![0u32; n_firms + 1];
        for &(firm, _, _) in &merged {
            loan_offsets[firm as usize + 1] += 1;
        }
        for i in 0..n_firms {
            loan_offsets[i + 1] += loan_offsets[i];
        }
        let loan_banks: Vec<u32> = merged.iter().map(|&(_, b, _)| b).collect();
        let loan_principals: Vec<f64> = merged.iter().map(|&(_, _, p)| p).collect();
        Ok(BankRegister {
            equity,
            loan_offsets,
            loan_banks,
            loan_principals,
        })
    }

    pub fn bank_count(&self) -> usize {
        self.equity.len()
    }

    pub fn firm_count(&self) -> usize {
        self.loan_offsets.len() - 1
    }

    pub fn equity(&self) -> &[f64] {
        &self.equity
    }

    pub fn total_equity(&self) -> f64 {
        self.equity.iter().sum()
    }

    /// Loans of one firm as (bank, principal) pairs.
    pub fn loans_of(&self, firm: usize) -> impl Iterator<Item = (u32, f64)> + '_ {
        let (a, b) = (
            self.loan_offsets[firm] as usize,
            self.loan_offsets[firm + 1] as usize,
        );
        self.loan_banks[a..b]
            .iter()
            .copied()
            .zip(self.loan_principals[a..b].iter().copied())
    }

    pub fn total_loans(&self) -> f64 {
        self.loan_principals.iter().sum()
    }

    /// Sets `has_loan` on the firm book from the register contents.
    pub fn mark_loans(&self, book: &mut FirmBook) {
        for i in 0..book.len().min(self.firm_count()) {
            book.has_loan[i] = self.loans_of(i).any(|(_, p)| p > 0.0);
        }
    }

    /// Loads `bank_id,equity` and `firm_id,bank_id,principal` CSV files.
    pub fn load_csv(banks_path: &str, loans_path: &str, n_firms: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(banks_path)
            .map_err(|e| csv_open_err(banks_path, e))?;
        let mut rows: Vec<(u64, u64, f64)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_row_err(banks_path, &e))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let (id, equity): (u64, f64) =
                rec.deserialize(None).map_err(|e| Error::MalformedRow {
                    path: banks_path.into(),
                    line,
                    message: e.to_string(),
                })?;
            rows.push((line, id, equity));
        }
        let m = rows.len();
        let mut equity = vec![f64::NAN; m];
        for (line, id, e) in rows {
            if id >= m as u64 || !equity[id as usize].is_nan() {
                return Err(Error::MalformedRow {
                    path: banks_path.into(),
                    line,
                    message: format!("bank ids must be unique and contiguous 0..{m}, got {id}"),
                });
            }
            equity[id as usize] = e;
        }

        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(loans_path)
            .map_err(|e| csv_open_err(loans_path, e))?;
        let mut loans: Vec<(u32, u32, f64)> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_row_err(loans_path, &e))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let (firm, bank, principal): (u64, u64, f64) =
                rec.deserialize(None).map_err(|e| Error::MalformedRow {
                    path: loans_path.into(),
                    line,
                    message: e.to_string(),
                })?;
            if firm >= n_firms as u64 {
                return Err(Error::DanglingLoan {
                    path: loans_path.into(),
                    line,
                    what: "firm",
                    id: firm,
                });
            }
            if bank >= m as u64 {
                return Err(Error::DanglingLoan {
                    path: loans_path.into(),
                    line,
                    what: "bank",
                    id: bank,
                });
            }
            loans.push((firm as u32, bank as u32, principal));
        }
        BankRegister::new(n_firms, equity, &loans)
    }

    pub fn write_csv(&self, banks_path: &str, loans_path: &str) -> Result<()> {
        let mut wtr = csv::Writer::from_path(banks_path).map_err(|e| csv_open_err(banks_path, e))?;
        wtr.write_record(["bank_id", "equity"])
            .map_err(|e| csv_row_err(banks_path, &e))?;
        for (k, e) in self.equity.iter().enumerate() {
            wtr.serialize((k as u64, e))
                .map_err(|e| csv_row_err(banks_path, &e))?;
        }
        wtr.flush().map_err(|e| Error::io(banks_path, e))?;

        let mut wtr = csv::Writer::from_path(loans_path).map_err(|e| csv_open_err(loans_path, e))?;
        wtr.write_record(["firm_id", "bank_id", "principal"])
            .map_err(|e| csv_row_err(loans_path, &e))?;
        for firm in 0..self.firm_count() {
            for (bank, principal) in self.loans_of(firm) {
                wtr.serialize((firm as u64, bank as u64, principal))
                    .map_err(|e| csv_row_err(loans_path, &e))?;
            }
        }
        wtr.flush().map_err(|e| Error::io(loans_path, e))?;
        Ok(())
    }
}

/// Projected balance-sheet positions after a scenario.
#[derive(Debug, Clone)]
pub struct ProjectedBook {
    /// Profit reduction `(1 - h)(r - c)` for evaluated firms.
    pub profit_reduction: Vec<f64>,
    /// Projected equity `z + retained_earnings - profit_reduction - carbon_cost`.
    pub equity: Vec<f64>,
    /// Projected liquidity `a - profit_reduction - carbon_cost`.
    pub liquidity: Vec<f64>,
    /// True where the projection applies (default-eligible, not directly
    /// defaulted). Direct defaulters' loans are already written off in full,
    /// so their books are not re-evaluated.
    pub evaluated: Vec<bool>,
}

/// Projects income statements and balance sheets at final production levels
/// `h_final` and retained carbon costs `gamma` (a one-year shock).
pub fn project_books(
    book: &FirmBook,
    h_final: &[f64],
    gamma: &[f64],
    chi_dir: &[bool],
) -> ProjectedBook {
    let n = book.len();
    let mut out = ProjectedBook {
        profit_reduction: vec![0.0; n],
        equity: vec![0.0; n],
        liquidity: vec![0.0; n],
        evaluated: vec![false; n],
    };
    for i in 0..n {
        if chi_dir[i] || !book.default_eligible(i) {
            out.equity[i] = book.equity[i] + book.retained_earnings[i];
            out.liquidity[i] = book.liquidity[i];
            continue;
        }
        let dp = (1.0 - h_final[i]) * (book.revenue[i] - book.material_costs[i]);
        out.profit_reduction[i] = dp;
        out.equity[i] = book.equity[i] + book.retained_earnings[i] - dp - gamma[i];
        out.liquidity[i] = book.liquidity[i] - dp - gamma[i];
        out.evaluated[i] = true;
    }
    out
}

/// Indirect default indicator: projected equity or liquidity at or below
/// zero, among evaluated firms that did not default directly.
pub fn indirect_defaults(
    projected: &ProjectedBook,
    chi_dir: &[bool],
    eligible: &[bool],
) -> Vec<bool> {
    (0..projected.evaluated.len())
        .map(|i| {
            projected.evaluated[i]
                && eligible[i]
                && !chi_dir[i]
                && (projected.equity[i] <= 0.0 || projected.liquidity[i] <= 0.0)
        })
        .collect()
}

/// Per-bank and system-wide loan write-offs.
#[derive(Debug, Clone, Serialize)]
pub struct BankLoss {
    pub bank_id: u32,
    pub equity: f64,
    /// Write-offs from direct defaulters, as a fraction of own equity.
    pub direct: f64,
    /// Write-offs from indirect defaulters, as a fraction of own equity.
    pub indirect: f64,
    /// Total write-offs, as a fraction of own equity.
    pub total: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemLoss {
    pub direct: f64,
    pub indirect: f64,
    pub total: f64,
}

/// Loss report: per-bank fractions, equity-weighted system aggregates, and
/// the system loss split by borrower sector and carbon-risk bucket.
#[derive(Debug, Clone, Serialize)]
pub struct LossReport {
    pub per_bank: Vec<BankLoss>,
    pub system: SystemLoss,
    /// System loss fraction attributed to borrowers by section letter.
    pub by_sector: Vec<(String, f64)>,
    /// System loss fraction attributed to borrowers by breakeven-price
    /// bucket (present when emissions are supplied).
    pub by_cpr_bucket: Vec<(String, f64)>,
}

/// Carbon-risk buckets keyed by the price at which a firm's carbon costs
/// exhaust its profits.
pub fn cpr_bucket_label(emissions: f64, net_profit: f64) -> &'static str {
    if emissions <= 0.0 {
        return "non-emitter";
    }
    let breakeven = if net_profit > 0.0 {
        net_profit / emissions
    } else {
        0.0
    };
    match breakeven {
        b if b <= 10.0 => "<=10",
        b if b <= 45.0 => "<=45",
        b if b <= 100.0 => "<=100",
        b if b <= 500.0 => "<=500",
        b if b <= 1000.0 => "<=1000",
        _ => ">1000",
    }
}

const BUCKET_ORDER: [&str; 7] = [
    "<=10", "<=45", "<=100", "<=500", "<=1000", ">1000", "non-emitter",
];

/// Computes loan write-offs for the given default vectors.
///
/// Per-bank fractions divide the summed written-off principal by the bank's
/// equity once (not loan by loan), and the total uses the combined principal
/// so the decomposition holds at the rational level.
pub fn bank_losses(
    banks: &BankRegister,
    book: &FirmBook,
    chi_dir: &[bool],
    chi_indir: &[bool],
    lgd: f64,
    emissions: Option<&[f64]>,
) -> LossReport {
    let m = banks.bank_count();
    let n = banks.firm_count();
    let mut direct_principal = vec![0.0f64; m];
    let mut indirect_principal = vec![0.0f64; m];
    let mut combined_principal = vec![0.0f64; m];
    let mut sector_principal: std::collections::BTreeMap<String, f64> =
        std::collections::BTreeMap::new();
    let mut bucket_principal: std::collections::BTreeMap<&'static str, f64> =
        std::collections::BTreeMap::new();

    for firm in 0..n {
        let dir = chi_dir[firm];
        let indir = chi_indir[firm];
        if !dir && !indir {
            continue;
        }
        debug_assert!(!(dir && indir), "default sets must be disjoint");
        for (bank, principal) in banks.loans_of(firm) {
            let b = bank as usize;
            if dir {
                direct_principal[b] += principal;
            } else {
                indirect_principal[b] += principal;
            }
            combined_principal[b] += principal;
        }
        let firm_total: f64 = banks.loans_of(firm).map(|(_, p)| p).sum();
        if firm_total > 0.0 {
            *sector_principal
                .entry(book.sector[firm].section().to_string())
                .or_insert(0.0) += firm_total;
            if let Some(e) = emissions {
                *bucket_principal
                    .entry(cpr_bucket_label(e[firm], book.net_profit[firm]))
                    .or_insert(0.0) += firm_total;
            }
        }
    }

    let total_equity = banks.total_equity();
    let mut per_bank = Vec::with_capacity(m);
    let mut system = SystemLoss {
        direct: 0.0,
        indirect: 0.0,
        total: 0.0,
    };
    if m == 0 {
        return LossReport {
            per_bank,
            system,
            by_sector: Vec::new(),
            by_cpr_bucket: Vec::new(),
        };
    }
    for k in 0..m {
        let e = banks.equity()[k];
        let loss = BankLoss {
            bank_id: k as u32,
            equity: e,
            direct: lgd * direct_principal[k] / e,
            indirect: lgd * indirect_principal[k] / e,
            total: lgd * combined_principal[k] / e,
        };
        let w = e / total_equity;
        system.direct += w * loss.direct;
        system.indirect += w * loss.indirect;
        system.total += w * loss.total;
        per_bank.push(loss);
    }

    let by_sector = sector_principal
        .into_iter()
        .map(|(s, p)| (s, lgd * p / total_equity))
        .collect();
    let by_cpr_bucket = if emissions.is_some() {
        BUCKET_ORDER
            .iter()
            .filter_map(|label| {
                bucket_principal
                    .get(label)
                    .map(|p| (label.to_string(), lgd * p / total_equity))
            })
            .collect()
    } else {
        Vec::new()
    };

    LossReport {
        per_bank,
        system,
        by_sector,
        by_cpr_bucket,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sector::SectorCode;

    fn small_book(n: usize) -> FirmBook {
        FirmBook {
            revenue: vec![100.0; n],
            material_costs: vec![60.0; n],
            other_income: vec![0.0; n],
            operating_profit: vec![40.0; n],
            net_profit: vec![30.0; n],
            equity: vec![50.0; n],
            liquidity: vec![25.0; n],
            retained_earnings: vec![5.0; n],
            sector: vec![SectorCode::parse("C10.1.1").unwrap(); n],
            has_loan: vec![false; n],
        }
    }

    #[test]
    fn projection_without_shock_is_identity() {
        let book = small_book(2);
        let p = project_books(&book, &[1.0, 1.0], &[0.0, 0.0], &[false, false]);
        assert_eq!(p.profit_reduction, vec![0.0, 0.0]);
        assert_eq!(p.equity, vec![55.0, 55.0]);
        assert_eq!(p.liquidity, vec![25.0, 25.0]);
    }

    #[test]
    fn half_production_halves_margin() {
        let book = small_book(1);
        let p = project_books(&book, &[0.5], &[0.0], &[false]);
        assert_eq!(p.profit_reduction[0], 20.0);
        assert_eq!(p.equity[0], 35.0);
        assert_eq!(p.liquidity[0], 5.0);
    }

    #[test]
    fn carbon_cost_equal_to_profit_depletes_equity() {
        let book = small_book(1);
        let p = project_books(&book, &[1.0], &[30.0], &[false]);
        assert_eq!(p.equity[0], 50.0 + 5.0 - 30.0);
    }

    #[test]
    fn boundary_zero_counts_as_default() {
        let mut book = small_book(2);
        book.liquidity[0] = 20.0;
        let p = project_books(&book, &[0.5, 1.0], &[0.0, 0.0], &[false, false]);
        assert_eq!(p.liquidity[0], 0.0);
        let chi = indirect_defaults(&p, &[false, false], &book.eligibility());
        assert_eq!(chi, vec![true, false]);
    }

    #[test]
    fn carbon_costs_alone_can_cause_indirect_default() {
        // No production shock at all: a cost bill below profits (no direct
        // default) but above liquidity still tips the firm over.
        let mut book = small_book(1);
        book.net_profit[0] = 100.0;
        book.liquidity[0] = 20.0;
        let gamma = [60.0];
        let chi_dir = [false];
        assert!(book.net_profit[0] > gamma[0], "no direct default here");
        let p = project_books(&book, &[1.0], &gamma, &chi_dir);
        assert_eq!(p.liquidity[0], -40.0);
        let chi = indirect_defaults(&p, &chi_dir, &book.eligibility());
        assert_eq!(chi, vec![true]);
    }

    #[test]
    fn direct_defaulters_are_not_projected_or_double_counted() {
        let book = small_book(2);
        let p = project_books(&book, &[0.0, 1.0], &[100.0, 0.0], &[true, false]);
        assert!(!p.evaluated[0]);
        let chi = indirect_defaults(&p, &[true, false], &book.eligibility());
        assert_eq!(chi, vec![false, false]);
    }

    #[test]
    fn ineligible_firms_never_default() {
        let mut book = small_book(1);
        book.net_profit[0] = -1.0;
        let p = project_books(&book, &[0.0], &[1000.0], &[false]);
        let chi = indirect_defaults(&p, &[false], &book.eligibility());
        assert_eq!(chi, vec![false]);
    }

    #[test]
    fn bank_losses_sum_and_scale() {
        let book = small_book(4);
        let banks = BankRegister::new(
            4,
            vec![10.0, 20.0],
            &[(0, 0, 2.0), (1, 0, 3.0), (1, 1, 4.0), (2, 1, 5.0), (3, 1, 6.0)],
        )
        .unwrap();
        let chi_dir = vec![true, false, false, false];
        let chi_indir = vec![false, true, true, false];
        let report = bank_losses(&banks, &book, &chi_dir, &chi_indir, 1.0, None);
        assert_eq!(report.per_bank[0].direct, 2.0 / 10.0);
        assert_eq!(report.per_bank[0].indirect, 3.0 / 10.0);
        assert_eq!(report.per_bank[1].direct, 0.0);
        assert_eq!(report.per_bank[1].indirect, 9.0 / 20.0);
        // kappa-linearity: halving the LGD exactly halves every loss.
        let half = bank_losses(&banks, &book, &chi_dir, &chi_indir, 0.5, None);
        for (full, half) in report.per_bank.iter().zip(&half.per_bank) {
            assert_eq!(half.direct, 0.5 * full.direct);
            assert_eq!(half.indirect, 0.5 * full.indirect);
            assert_eq!(half.total, 0.5 * full.total);
        }
        assert_eq!(half.system.total, 0.5 * report.system.total);
        // Bound: no bank loses more than its loan book over equity.
        for b in &report.per_bank {
            let loans: f64 = (0..4)
                .flat_map(|f| banks.loans_of(f).filter(|(k, _)| *k == b.bank_id))
                .map(|(_, p)| p)
                .sum();
            assert!(b.total <= loans / b.equity + 1e-15);
        }
    }

    #[test]
    fn no_defaults_no_losses() {
        let book = small_book(2);
        let banks = BankRegister::new(2, vec![10.0], &[(0, 0, 5.0)]).unwrap();
        let report = bank_losses(&banks, &book, &[false; 2], &[false; 2], 1.0, None);
        assert_eq!(report.system.total, 0.0);
        assert_eq!(report.per_bank[0].total, 0.0);
    }

    #[test]
    fn duplicate_loans_are_merged() {
        let banks =
            BankRegister::new(2, vec![10.0], &[(0, 0, 5.0), (0, 0, 2.5)]).unwrap();
        let loans: Vec<(u32, f64)> = banks.loans_of(0).collect();
        assert_eq!(loans, vec![(0, 7.5)]);
    }

    #[test]
    fn bucket_labels() {
        assert_eq!(cpr_bucket_label(0.0, 10.0), "non-emitter");
        assert_eq!(cpr_bucket_label(1.0, 10.0), "<=10");
        assert_eq!(cpr_bucket_label(1.0, 45.0), "<=45");
        assert_eq!(cpr_bucket_label(1.0, 450.0), "<=500");
        assert_eq!(cpr_bucket_label(1.0, 5000.0), ">1000");
        // Zero or negative profit defaults at any price.
        assert_eq!(cpr_bucket_label(1.0, 0.0), "<=10");
    }

    #[test]
    fn invalid_banks_rejected() {
        assert!(BankRegister::new(1, vec![0.0], &[]).is_err());
        assert!(BankRegister::new(1, vec![1.0], &[(5, 0, 1.0)]).is_err());
        assert!(BankRegister::new(1, vec![1.0], &[(0, 3, 1.0)]).is_err());
    }
}
