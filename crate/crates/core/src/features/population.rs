//! Province-wide popularity and flow tables.

use std::collections::HashMap;
use std::io::{Read, Write};

use rayon::prelude::*;

use super::{FeatureError, LocatedTrajectory};
use crate::ingest::{CellCatalog, CellId};

/// Unique users per (cell, slot of week).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PopularityTable {
    pub province: String,
    pub counts: HashMap<(CellId, u16), u32>,
}

/// Users moving from one cell to the next, keyed by departure slot.
/// Staying at the same cell counts as a movement.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlowTable {
    pub province: String,
    pub counts: HashMap<(CellId, CellId, u16), u32>,
}

impl PopularityTable {
    pub fn get(&self, cell: CellId, slot: u16) -> Option<u32> {
        self.counts.get(&(cell, slot)).copied()
    }

    /// Writes `cell_code,slot,users` sorted by code then slot.
    pub fn write<W: Write>(&self, writer: W, catalog: &CellCatalog) -> Result<(), FeatureError> {
        let mut rows: Vec<(&str, u16, u32)> = self
            .counts
            .iter()
            .map(|(&(c, s), &n)| (catalog.cell(c).code.as_str(), s, n))
            .collect();
        rows.sort_unstable();
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["cell_code", "slot", "users"])?;
        for (code, slot, n) in rows {
            wtr.write_record([code, &slot.to_string(), &n.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(reader: R, catalog: &CellCatalog, province: &str) -> Result<Self, FeatureError> {
        let mut table = PopularityTable {
            province: province.to_string(),
            ..Default::default()
        };
        for row in read_rows(reader, &["cell_code", "slot", "users"])? {
            let cell = resolve(catalog, &row[0])?;
            table.counts.insert((cell, parse_num(&row[1])?), parse_num(&row[2])?);
        }
        Ok(table)
    }
}

impl FlowTable {
    pub fn get(&self, from: CellId, to: CellId, slot: u16) -> Option<u32> {
        self.counts.get(&(from, to, slot)).copied()
    }

    /// Writes `cell_from,cell_to,slot,users` sorted lexicographically.
    pub fn write<W: Write>(&self, writer: W, catalog: &CellCatalog) -> Result<(), FeatureError> {
        let mut rows: Vec<(&str, &str, u16, u32)> = self
            .counts
            .iter()
            .map(|(&(a, b, s), &n)| (catalog.cell(a).code.as_str(), catalog.cell(b).code.as_str(), s, n))
            .collect();
        rows.sort_unstable();
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["cell_from", "cell_to", "slot", "users"])?;
        for (a, b, slot, n) in rows {
            wtr.write_record([a, b, &slot.to_string(), &n.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read<R: Read>(reader: R, catalog: &CellCatalog, province: &str) -> Result<Self, FeatureError> {
        let mut table = FlowTable {
            province: province.to_string(),
            ..Default::default()
        };
        for row in read_rows(reader, &["cell_from", "cell_to", "slot", "users"])? {
            let from = resolve(catalog, &row[0])?;
            let to = resolve(catalog, &row[1])?;
            table
                .counts
                .insert((from, to, parse_num(&row[2])?), parse_num(&row[3])?);
        }
        Ok(table)
    }
}

fn read_rows<R: Read>(reader: R, header: &[&str]) -> Result<Vec<csv::StringRecord>, FeatureError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let found: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(FeatureError::Format(format!(
            "expected header {}, found {}",
            header.join(","),
            found.join(",")
        )));
    }
    rdr.records().map(|r| r.map_err(FeatureError::from)).collect()
}

fn resolve(catalog: &CellCatalog, code: &str) -> Result<CellId, FeatureError> {
    catalog
        .id(code)
        .ok_or_else(|| FeatureError::UnknownCell(code.to_string()))
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T, FeatureError> {
    s.parse()
        .map_err(|_| FeatureError::Format(format!("not a number: {s:?}")))
}

/// Builds both tables from the accepted population of a province. Partial
/// maps are built in parallel and merged; the result does not depend on user order.
pub fn build_population_tables(province: &str, trajectories: &[LocatedTrajectory]) -> (PopularityTable, FlowTable) {
    type Partial = (HashMap<(CellId, u16), u32>, HashMap<(CellId, CellId, u16), u32>);
    let (pop, flow) = trajectories
        .par_iter()
        .fold(Partial::default, |(mut pop, mut flow), t| {
            // Slots are unique within a user, so each user counts once per key.
            for (&slot, &cell) in t.slots.iter().zip(&t.cells) {
                *pop.entry((cell, slot)).or_default() += 1;
            }
            for i in 1..t.cells.len() {
                *flow.entry((t.cells[i - 1], t.cells[i], t.slots[i - 1])).or_default() += 1;
            }
            (pop, flow)
        })
        .reduce(Partial::default, |(mut pa, mut fa), (pb, fb)| {
            for (k, v) in pb {
                *pa.entry(k).or_default() += v;
            }
            for (k, v) in fb {
                *fa.entry(k).or_default() += v;
            }
            (pa, fa)
        });
    (
        PopularityTable {
            province: province.to_string(),
            counts: pop,
        },
        FlowTable {
            province: province.to_string(),
            counts: flow,
        },
    )
}
