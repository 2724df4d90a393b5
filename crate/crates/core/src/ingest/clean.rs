use std::collections::BTreeMap;
use std::fmt;

use super::{CellCatalog, UserSequence};

/// Why a user was dropped during preprocessing.
#[derive(Debug, Clone, PartialEq)]
pub enum Rejection {
    /// No event with traffic resolves to a known cell.
    NoLocatedEvents,
    /// Share of unresolvable locations above the threshold.
    TooManyMissing { missing: usize, expected: usize },
    /// Traffic events exist but none of them can be located.
    NoResolvableCells,
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::NoLocatedEvents => write!(f, "no located events"),
            Rejection::TooManyMissing { missing, expected } => {
                write!(f, "{missing} of {expected} locations missing")
            }
            Rejection::NoResolvableCells => write!(f, "no resolvable cell to impute from"),
        }
    }
}

/// Assigns the province where the user is observed most often.
/// Ties go to the lexicographically smallest province name.
pub fn assign_province(mut user: UserSequence, catalog: &CellCatalog) -> Result<UserSequence, Rejection> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, code) in user.located() {
        if let Some(cell) = catalog.get(code) {
            *counts.entry(cell.province.as_str()).or_default() += 1;
        }
    }
    // BTreeMap iterates in name order; keep the first maximum.
    let mut best: Option<(&str, usize)> = None;
    for (name, n) in counts {
        if best.is_none_or(|(_, m)| n > m) {
            best = Some((name, n));
        }
    }
    let province = best.ok_or(Rejection::NoLocatedEvents)?.0.to_string();
    user.province = Some(province);
    Ok(user)
}

/// Rejects users above `max_missing_rate` unresolvable locations, otherwise
/// fills each missing cell with the last known one (leading gaps take the
/// first later known cell). Slots and volumes are never touched.
pub fn filter_and_impute(
    mut user: UserSequence,
    catalog: &CellCatalog,
    max_missing_rate: f64,
) -> Result<UserSequence, Rejection> {
    let expected = user.events.iter().filter(|e| e.expects_location()).count();
    if expected == 0 {
        return Err(Rejection::NoLocatedEvents);
    }
    let missing = user.missing_locations(catalog);
    if missing as f64 / expected as f64 > max_missing_rate {
        return Err(Rejection::TooManyMissing { missing, expected });
    }
    let resolvable = |c: &Option<String>| c.as_deref().is_some_and(|c| catalog.contains(c));
    let first_known = user
        .events
        .iter()
        .find(|e| e.expects_location() && resolvable(&e.cell))
        .and_then(|e| e.cell.clone())
        .ok_or(Rejection::NoResolvableCells)?;

    // The full-week flag only holds for users that needed no imputation.
    let complete_before = missing == 0 && user.is_complete(catalog);
    let mut last_known = first_known;
    for e in user.events.iter_mut().filter(|e| e.volume > 0) {
        if resolvable(&e.cell) {
            last_known = e.cell.clone().unwrap_or_default();
        } else {
            e.cell = Some(last_known.clone());
        }
    }
    user.full_sequence = complete_before;
    Ok(user)
}
