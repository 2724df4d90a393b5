//! Raw XDR and cell-catalog parsing, province partitioning, and the
//! missing-location filter with last-known-location imputation.

mod catalog;
mod clean;
mod xdr;

use std::collections::BTreeMap;
use std::io::Read;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use catalog::{Cell, CellCatalog, CellId};
pub use clean::{assign_province, filter_and_impute, Rejection};
pub use xdr::{parse_xdr, read_province_xdr, write_xdr, Event, ParsedXdr, UserSequence};

pub const SLOTS_PER_DAY: usize = 48;
pub const DAYS_PER_WEEK: usize = 7;
pub const SLOTS_PER_WEEK: usize = SLOTS_PER_DAY * DAYS_PER_WEEK;

/// Default threshold above which a user is dropped for missing locations.
pub const DEFAULT_MAX_MISSING_RATE: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("unexpected header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("line {line}: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("cell {code:?}: {reason}")]
    InvalidCell { code: String, reason: String },
}

/// Row and user counts produced by [`ingest`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    pub duplicate_rows: usize,
    pub users_parsed: usize,
    pub rejected_no_location: usize,
    pub rejected_missing: usize,
    pub rejected_unresolvable: usize,
    pub accepted: usize,
    pub full_sequence_users: usize,
}

/// Accepted users grouped by province; each list is sorted by user id.
pub type ProvinceDatasets = BTreeMap<String, Vec<UserSequence>>;

/// Parses, assigns provinces, filters and imputes. Users are processed in parallel.
pub fn ingest<R: Read>(
    reader: R,
    catalog: &CellCatalog,
    max_missing_rate: f64,
) -> Result<(ProvinceDatasets, IngestReport), IngestError> {
    let parsed = parse_xdr(reader, catalog)?;
    let mut report = IngestReport {
        rows: parsed.rows,
        duplicate_rows: parsed.duplicate_rows,
        users_parsed: parsed.users.len(),
        ..Default::default()
    };
    let outcomes: Vec<Result<UserSequence, Rejection>> = parsed
        .users
        .into_par_iter()
        .map(|u| assign_province(u, catalog).and_then(|u| filter_and_impute(u, catalog, max_missing_rate)))
        .collect();

    let mut accepted = Vec::with_capacity(outcomes.len());
    for outcome in outcomes {
        match outcome {
            Ok(u) => accepted.push(u),
            Err(Rejection::NoLocatedEvents) => report.rejected_no_location += 1,
            Err(Rejection::TooManyMissing { .. }) => report.rejected_missing += 1,
            Err(Rejection::NoResolvableCells) => report.rejected_unresolvable += 1,
        }
    }
    report.accepted = accepted.len();
    report.full_sequence_users = accepted.iter().filter(|u| u.full_sequence).count();
    Ok((partition_by_province(accepted), report))
}

/// Splits users by their assigned province. Users without one are dropped.
pub fn partition_by_province(users: Vec<UserSequence>) -> ProvinceDatasets {
    let mut out: ProvinceDatasets = BTreeMap::new();
    for u in users {
        if let Some(p) = u.province.clone() {
            out.entry(p).or_default().push(u);
        }
    }
    for list in out.values_mut() {
        list.sort_by(|a, b| a.user_id.cmp(&b.user_id));
    }
    out
}
