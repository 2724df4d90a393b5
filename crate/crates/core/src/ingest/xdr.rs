use std::collections::HashMap;
use std::io::{Read, Write};

use super::{CellCatalog, IngestError, SLOTS_PER_WEEK};

const XDR_HEADER: [&str; 4] = ["user_id", "slot", "volume_bytes", "cell_code"];
const CANONICAL_HEADER: [&str; 5] = ["user_id", "slot", "volume_bytes", "cell_code", "full_sequence"];

/// One 30-minute record: slot of the week, bytes, serving cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub slot: u16,
    pub volume: u64,
    /// Absent when the slot carried no traffic, or when the location is missing.
    pub cell: Option<String>,
}

impl Event {
    pub fn new(slot: u16, volume: u64, cell: Option<&str>) -> Self {
        Self {
            slot,
            volume,
            cell: cell.map(str::to_string),
        }
    }

    /// A slot with traffic is expected to carry a location.
    pub fn expects_location(&self) -> bool {
        self.volume > 0
    }
}

/// A user's week of events ordered by slot.
#[derive(Debug, Clone, PartialEq)]
pub struct UserSequence {
    pub user_id: String,
    pub province: Option<String>,
    pub events: Vec<Event>,
    pub full_sequence: bool,
}

impl UserSequence {
    pub fn new(user_id: impl Into<String>, events: Vec<Event>) -> Self {
        Self {
            user_id: user_id.into(),
            province: None,
            events,
            full_sequence: false,
        }
    }

    /// Events with traffic and a location, in slot order.
    pub fn located(&self) -> impl Iterator<Item = (u16, &str)> + '_ {
        self.events.iter().filter_map(|e| match (&e.cell, e.volume > 0) {
            (Some(c), true) => Some((e.slot, c.as_str())),
            _ => None,
        })
    }

    /// Number of events with traffic whose cell is absent or not in the catalog.
    pub fn missing_locations(&self, catalog: &CellCatalog) -> usize {
        self.events
            .iter()
            .filter(|e| e.expects_location())
            .filter(|e| e.cell.as_deref().is_none_or(|c| !catalog.contains(c)))
            .count()
    }

    /// True when all 336 slots carry traffic and a resolvable cell.
    pub fn is_complete(&self, catalog: &CellCatalog) -> bool {
        self.events.len() == SLOTS_PER_WEEK
            && self
                .events
                .iter()
                .all(|e| e.volume > 0 && e.cell.as_deref().is_some_and(|c| catalog.contains(c)))
    }
}

/// Result of reading a raw XDR file.
#[derive(Debug, Clone, Default)]
pub struct ParsedXdr {
    /// Sorted by user id.
    pub users: Vec<UserSequence>,
    pub rows: usize,
    /// Rows dropped because the same (user, slot) appeared more than once.
    pub duplicate_rows: usize,
}

fn malformed(line: u64, reason: impl Into<String>) -> IngestError {
    IngestError::Malformed {
        line,
        reason: reason.into(),
    }
}

fn parse_row(record: &csv::StringRecord, line: u64) -> Result<(String, Event), IngestError> {
    let user = &record[0];
    if user.is_empty() {
        return Err(malformed(line, "empty user_id"));
    }
    let slot: u16 = record[1]
        .parse()
        .map_err(|_| malformed(line, format!("slot is not an integer: {:?}", &record[1])))?;
    if slot as usize >= SLOTS_PER_WEEK {
        return Err(malformed(line, format!("slot {slot} outside 0..=335")));
    }
    let volume: u64 = match record[2].parse::<u64>() {
        Ok(v) => v,
        Err(_) => {
            return Err(match record[2].parse::<i64>() {
                Ok(v) if v < 0 => malformed(line, format!("negative volume {v}")),
                _ => malformed(line, format!("volume is not an integer: {:?}", &record[2])),
            })
        }
    };
    let cell = &record[3];
    if volume == 0 && !cell.is_empty() {
        return Err(malformed(line, "zero-volume event carries a cell code"));
    }
    let cell = (!cell.is_empty()).then(|| cell.to_string());
    Ok((user.to_string(), Event { slot, volume, cell }))
}

fn check_header(found: &csv::StringRecord, allowed: &[&[&str]]) -> Result<usize, IngestError> {
    let cols: Vec<&str> = found.iter().collect();
    allowed
        .iter()
        .find(|h| cols == **h)
        .map(|h| h.len())
        .ok_or_else(|| IngestError::Header {
            expected: allowed[0].join(","),
            found: cols.join(","),
        })
}

/// Sorts by slot and resolves duplicate slots by keeping the larger volume
/// (first occurrence on equal volume). Returns the number of dropped rows.
fn sort_and_dedup(events: &mut Vec<Event>) -> usize {
    events.sort_by_key(|e| e.slot);
    let before = events.len();
    let mut out: Vec<Event> = Vec::with_capacity(before);
    for e in events.drain(..) {
        match out.last_mut() {
            Some(last) if last.slot == e.slot => {
                if e.volume > last.volume {
                    *last = e;
                }
            }
            _ => out.push(e),
        }
    }
    *events = out;
    before - events.len()
}

/// Parses a raw XDR CSV stream into per-user sequences.
///
/// Unknown cell codes are kept as-is; they are counted as missing locations by
/// [`super::filter_and_impute`]. A canonical file (with the `full_sequence`
/// column) is accepted too; the flag column is ignored and recomputed.
pub fn parse_xdr<R: Read>(reader: R, catalog: &CellCatalog) -> Result<ParsedXdr, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let width = check_header(rdr.headers()?, &[&XDR_HEADER, &CANONICAL_HEADER])?;

    let mut by_user: HashMap<String, Vec<Event>> = HashMap::new();
    let mut rows = 0;
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != width {
            return Err(malformed(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let (user, event) = parse_row(&record, line)?;
        by_user.entry(user).or_default().push(event);
        rows += 1;
    }

    let mut duplicate_rows = 0;
    let mut users: Vec<UserSequence> = by_user
        .into_iter()
        .map(|(user_id, mut events)| {
            duplicate_rows += sort_and_dedup(&mut events);
            let mut seq = UserSequence::new(user_id, events);
            seq.full_sequence = seq.is_complete(catalog);
            seq
        })
        .collect();
    users.sort_by(|a, b| a.user_id.cmp(&b.user_id));
    if duplicate_rows > 0 {
        log::warn!("{duplicate_rows} duplicate (user, slot) rows resolved by larger volume");
    }
    Ok(ParsedXdr {
        users,
        rows,
        duplicate_rows,
    })
}

/// Reads a canonical `<province>.xdr.csv` file, trusting its `full_sequence` column.
pub fn read_province_xdr<R: Read>(reader: R, province: &str) -> Result<Vec<UserSequence>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    check_header(rdr.headers()?, &[&CANONICAL_HEADER])?;
    let mut users: Vec<UserSequence> = Vec::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != CANONICAL_HEADER.len() {
            return Err(malformed(line, format!("expected 5 fields, found {}", record.len())));
        }
        let (user, event) = parse_row(&record, line)?;
        let full = match &record[4] {
            "1" => true,
            "0" => false,
            other => return Err(malformed(line, format!("full_sequence must be 0 or 1, got {other:?}"))),
        };
        match users.last_mut() {
            Some(last) if last.user_id == user => {
                if last.events.last().is_some_and(|e| e.slot >= event.slot) {
                    return Err(malformed(line, "slots not strictly increasing within user"));
                }
                last.events.push(event);
            }
            _ => {
                let mut seq = UserSequence::new(user, vec![event]);
                seq.province = Some(province.to_string());
                seq.full_sequence = full;
                users.push(seq);
            }
        }
    }
    Ok(users)
}

/// Writes users in the given order. With `full_flag` the canonical
/// per-province schema (extra `full_sequence` column) is produced.
pub fn write_xdr<W: Write>(writer: W, users: &[UserSequence], full_flag: bool) -> Result<(), IngestError> {
    let mut wtr = csv::WriterBuilder::new().flexible(false).from_writer(writer);
    if full_flag {
        wtr.write_record(CANONICAL_HEADER)?;
    } else {
        wtr.write_record(XDR_HEADER)?;
    }
    let mut slot_buf = String::new();
    let mut vol_buf = String::new();
    for user in users {
        let flag = if user.full_sequence { "1" } else { "0" };
        for e in &user.events {
            slot_buf.clear();
            vol_buf.clear();
            use std::fmt::Write as _;
            let _ = write!(slot_buf, "{}", e.slot);
            let _ = write!(vol_buf, "{}", e.volume);
            let cell = e.cell.as_deref().unwrap_or("");
            if full_flag {
                wtr.write_record([user.user_id.as_str(), &slot_buf, &vol_buf, cell, flag])?;
            } else {
                wtr.write_record([user.user_id.as_str(), &slot_buf, &vol_buf, cell])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}
