use std::collections::HashMap;
use std::io::{Read, Write};

use super::IngestError;

/// Dense index of a cell inside a [`CellCatalog`].
pub type CellId = u32;

const CATALOG_HEADER: [&str; 4] = ["cell_code", "lat", "lon", "province"];

/// Geographic reference of one antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub code: String,
    pub lat: f64,
    pub lon: f64,
    pub province: String,
}

/// Cell code to location lookup. Every distance and the province partition
/// are derived from it.
#[derive(Debug, Clone, Default)]
pub struct CellCatalog {
    cells: Vec<Cell>,
    index: HashMap<String, CellId>,
}

impl CellCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a cell, enforcing coordinate ranges, unique codes and a non-empty province.
    pub fn insert(&mut self, code: &str, lat: f64, lon: f64, province: &str) -> Result<CellId, IngestError> {
        if code.is_empty() {
            return Err(IngestError::InvalidCell {
                code: code.to_string(),
                reason: "empty cell code".into(),
            });
        }
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(IngestError::InvalidCell {
                code: code.to_string(),
                reason: format!("coordinates out of range: ({lat}, {lon})"),
            });
        }
        if province.is_empty() {
            return Err(IngestError::InvalidCell {
                code: code.to_string(),
                reason: "empty province".into(),
            });
        }
        if self.index.contains_key(code) {
            return Err(IngestError::InvalidCell {
                code: code.to_string(),
                reason: "duplicate cell code".into(),
            });
        }
        let id = self.cells.len() as CellId;
        self.cells.push(Cell {
            code: code.to_string(),
            lat,
            lon,
            province: province.to_string(),
        });
        self.index.insert(code.to_string(), id);
        Ok(id)
    }

    /// Reads the `cell_code,lat,lon,province` CSV format.
    pub fn from_reader<R: Read>(reader: R) -> Result<Self, IngestError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.iter().collect::<Vec<_>>() != CATALOG_HEADER {
            return Err(IngestError::Header {
                expected: CATALOG_HEADER.join(","),
                found: header.iter().collect::<Vec<_>>().join(","),
            });
        }
        let mut catalog = Self::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != 4 {
                return Err(IngestError::Malformed {
                    line,
                    reason: format!("expected 4 fields, found {}", record.len()),
                });
            }
            let lat: f64 = record[1].parse().map_err(|_| IngestError::Malformed {
                line,
                reason: format!("latitude is not a number: {:?}", &record[1]),
            })?;
            let lon: f64 = record[2].parse().map_err(|_| IngestError::Malformed {
                line,
                reason: format!("longitude is not a number: {:?}", &record[2]),
            })?;
            catalog.insert(&record[0], lat, lon, &record[3])?;
        }
        Ok(catalog)
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<(), IngestError> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(CATALOG_HEADER)?;
        for cell in &self.cells {
            wtr.write_record([
                cell.code.as_str(),
                &cell.lat.to_string(),
                &cell.lon.to_string(),
                cell.province.as_str(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn id(&self, code: &str) -> Option<CellId> {
        self.index.get(code).copied()
    }

    pub fn get(&self, code: &str) -> Option<&Cell> {
        self.id(code).map(|id| &self.cells[id as usize])
    }

    /// Panics if `id` was not issued by this catalog.
    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id as usize]
    }

    pub fn contains(&self, code: &str) -> bool {
        self.index.contains_key(code)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_catalog() {
        let text = "cell_code,lat,lon,province\nC1,-33.45,-70.66,Santiago\nC2,-29.9,-71.25,Elqui\n";
        let cat = CellCatalog::from_reader(text.as_bytes()).unwrap();
        assert_eq!(cat.len(), 2);
        assert_eq!(cat.get("C2").unwrap().province, "Elqui");
        assert_eq!(cat.id("C1"), Some(0));
        assert!(cat.get("C3").is_none());
    }

    #[test]
    fn rejects_out_of_range_and_duplicates() {
        let mut cat = CellCatalog::new();
        assert!(cat.insert("A", 91.0, 0.0, "P").is_err());
        assert!(cat.insert("A", 0.0, -181.0, "P").is_err());
        assert!(cat.insert("A", 0.0, 0.0, "").is_err());
        cat.insert("A", 0.0, 0.0, "P").unwrap();
        assert!(cat.insert("A", 1.0, 1.0, "P").is_err());
    }

    #[test]
    fn rejects_bad_header() {
        let text = "code,lat,lon,province\nC1,0,0,P\n";
        assert!(matches!(
            CellCatalog::from_reader(text.as_bytes()),
            Err(IngestError::Header { .. })
        ));
    }

    #[test]
    fn write_then_read() {
        let mut cat = CellCatalog::new();
        cat.insert("X", 10.5, -20.25, "North").unwrap();
        cat.insert("Y", -1.0, 3.0, "South").unwrap();
        let mut buf = Vec::new();
        cat.write(&mut buf).unwrap();
        let back = CellCatalog::from_reader(buf.as_slice()).unwrap();
        assert_eq!(
            back.iter().cloned().collect::<Vec<_>>(),
            cat.iter().cloned().collect::<Vec<_>>()
        );
    }
}
