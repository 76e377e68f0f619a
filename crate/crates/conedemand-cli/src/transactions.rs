//! Transaction CSV intake: strict header, per-row validation with line
//! numbers, a bounded reject budget, and conversion to the library's
//! transaction log.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context};
use conedemand::copurchase::TransactionLog;
use conedemand::estimate::{parse_date, RawTransaction};

pub const HEADER: [&str; 12] = [
    "transaction_id",
    "store_id",
    "date",
    "product_id",
    "quantity",
    "unit_price",
    "gross_value",
    "discount",
    "category_l1",
    "category_l2",
    "category_l3",
    "private_label",
];

/// Reads and validates the transaction CSV. Malformed rows are rejected
/// with their line numbers; more than 0.1% rejects aborts the run.
pub fn read_transactions(path: &Path) -> anyhow::Result<Vec<RawTransaction>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    {
        let got: Vec<&str> = reader.headers().context("reading header")?.iter().collect();
        if got != HEADER {
            bail!(
                "unexpected header in {}: expected {:?}, got {:?}",
                path.display(),
                HEADER,
                got
            );
        }
    }

    let mut rows = Vec::new();
    let mut rejects: Vec<(u64, String)> = Vec::new();
    for record in reader.deserialize::<RawTransaction>() {
        // Header occupies line 1; the reader's position tracks the raw line.
        match record {
            Ok(row) => match validate(&row) {
                Ok(()) => rows.push(row),
                Err(msg) => rejects.push((2 + rows.len() as u64 + rejects.len() as u64, msg)),
            },
            Err(e) => {
                let line = e
                    .position()
                    .map(|p| p.line())
                    .unwrap_or(2 + rows.len() as u64 + rejects.len() as u64);
                rejects.push((line, e.to_string()));
            }
        }
    }
    if rows.is_empty() {
        bail!(conedemand::Error::Data(format!(
            "{} contains no valid transaction rows",
            path.display()
        )));
    }
    let total = rows.len() + rejects.len();
    if !rejects.is_empty() {
        for (line, msg) in &rejects {
            eprintln!("rejected line {line}: {msg}");
        }
        if rejects.len() * 1000 > total {
            bail!(conedemand::Error::Data(format!(
                "{} of {} rows rejected (> 0.1%); first: line {}: {}",
                rejects.len(),
                total,
                rejects[0].0,
                rejects[0].1
            )));
        }
    }
    Ok(rows)
}

fn validate(row: &RawTransaction) -> Result<(), String> {
    if row.transaction_id.is_empty() || row.product_id.is_empty() || row.store_id.is_empty() {
        return Err("empty transaction, product, or store identifier".into());
    }
    if !(row.quantity.is_finite() && row.quantity > 0.0) {
        return Err(format!("quantity must be positive, got {}", row.quantity));
    }
    if !(row.unit_price.is_finite() && row.unit_price > 0.0) {
        return Err(format!("unit_price must be positive, got {}", row.unit_price));
    }
    if !row.gross_value.is_finite() || !row.discount.is_finite() {
        return Err("gross_value and discount must be finite".into());
    }
    if row.private_label > 1 {
        return Err(format!("private_label must be 0 or 1, got {}", row.private_label));
    }
    parse_date(&row.date).map_err(|e| e.to_string())?;
    Ok(())
}

/// Builds the product-by-transaction log, ids sorted for determinism.
pub fn to_log(rows: &[RawTransaction]) -> anyhow::Result<TransactionLog> {
    let mut products: BTreeMap<&str, usize> = BTreeMap::new();
    let mut transactions: BTreeMap<&str, usize> = BTreeMap::new();
    for row in rows {
        let np = products.len();
        products.entry(&row.product_id).or_insert(np);
        let nt = transactions.len();
        transactions.entry(&row.transaction_id).or_insert(nt);
    }
    let reindex = |map: BTreeMap<&str, usize>| -> (BTreeMap<&str, usize>, Vec<String>) {
        let ids: Vec<String> = map.keys().map(|s| s.to_string()).collect();
        let map = map
            .into_iter()
            .enumerate()
            .map(|(i, (k, _))| (k, i))
            .collect();
        (map, ids)
    };
    let (products, product_ids) = reindex(products);
    let (transactions, transaction_ids) = reindex(transactions);
    let entries: Vec<(usize, usize, f64)> = rows
        .iter()
        .map(|r| {
            (
                products[r.product_id.as_str()],
                transactions[r.transaction_id.as_str()],
                r.quantity,
            )
        })
        .collect();
    TransactionLog::new(
        product_ids.len(),
        transaction_ids.len(),
        &entries,
        product_ids,
        transaction_ids,
    )
    .map_err(anyhow::Error::from)
}
