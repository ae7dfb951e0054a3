//! Schemas of the bundled datasets and the generators that produced them.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::colors::COLORS;
use super::histogram::{GENDERS, NATIONALITIES};
use crate::io::{ColumnType, Schema};

pub fn packet_schema() -> Schema {
    Schema::new([
        ("id", ColumnType::Int),
        ("timestamp", ColumnType::Int),
        ("src", ColumnType::Text),
        ("dest", ColumnType::Text),
        ("protocol", ColumnType::Text),
        ("length", ColumnType::Int),
        ("payload", ColumnType::Text),
    ])
}

pub fn adult_schema() -> Schema {
    Schema::new([
        ("age", ColumnType::Int),
        ("sex", ColumnType::Text),
        ("native_country", ColumnType::Text),
    ])
}

pub fn colors_schema() -> Schema {
    Schema::new([("color", ColumnType::Text)])
}

pub fn cells_schema() -> Schema {
    Schema::new([("cell", ColumnType::Int)])
}

/// Network packets with lengths between 40 and 1500, most of them either
/// small or near the maximum.
pub fn write_packets<W: Write>(out: W, rows: usize, seed: u64) -> csv::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "timestamp", "src", "dest", "protocol", "length", "payload"])?;
    let protocols = ["TCP", "UDP", "ICMP"];
    let mut ts: u64 = 1_546_300_800;
    for id in 0..rows {
        ts += rng.gen_range(1..5);
        let length: u32 = match rng.gen_range(0..10) {
            0..=3 => rng.gen_range(40..200),
            4..=6 => rng.gen_range(200..1300),
            _ => rng.gen_range(1300..=1500),
        };
        let host = |rng: &mut ChaCha8Rng| format!("10.0.{}.{}", rng.gen_range(0..4), rng.gen_range(1..255));
        let src = host(&mut rng);
        let dest = host(&mut rng);
        let proto = protocols.choose(&mut rng).expect("non-empty");
        let payload: String = (0..8).map(|_| char::from(rng.gen_range(b'a'..=b'z'))).collect();
        w.write_record([
            id.to_string(),
            ts.to_string(),
            src,
            dest,
            proto.to_string(),
            length.to_string(),
            payload,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Census-like rows over the histogram domains. Roughly nine in ten rows
/// come from the first country; a few rows use an unknown country.
pub fn write_adult<W: Write>(out: W, rows: usize, seed: u64) -> csv::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["age", "sex", "native_country"])?;
    for _ in 0..rows {
        let age = rng.gen_range(17..91);
        let sex = GENDERS.choose(&mut rng).expect("non-empty");
        let country = match rng.gen_range(0..100) {
            0..=89 => NATIONALITIES[0],
            90..=97 => NATIONALITIES.choose(&mut rng).expect("non-empty"),
            _ => "?",
        };
        w.write_record([age.to_string(), sex.to_string(), country.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_colors<W: Write>(out: W, rows: usize, seed: u64) -> csv::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["color"])?;
    for _ in 0..rows {
        w.write_record([COLORS.choose(&mut rng).expect("non-empty")])?;
    }
    w.flush()?;
    Ok(())
}

/// Rows carrying a cell index in `0..cells`.
pub fn write_cells<W: Write>(out: W, cells: usize, rows: usize, seed: u64) -> csv::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["cell"])?;
    for _ in 0..rows {
        w.write_record([rng.gen_range(0..cells).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// The bundled datasets with the sizes and seeds used for `fixtures/`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dataset {
    Packets,
    Adult,
    Colors,
    Cells,
}

impl Dataset {
    pub const ALL: [Dataset; 4] = [Dataset::Packets, Dataset::Adult, Dataset::Colors, Dataset::Cells];

    /// Number of cells in the bundled range dataset.
    pub const CELLS: usize = 64;

    pub fn file_name(self) -> &'static str {
        match self {
            Dataset::Packets => "packets.csv",
            Dataset::Adult => "adult.csv",
            Dataset::Colors => "colors.csv",
            Dataset::Cells => "cells.csv",
        }
    }

    pub fn schema(self) -> Schema {
        match self {
            Dataset::Packets => packet_schema(),
            Dataset::Adult => adult_schema(),
            Dataset::Colors => colors_schema(),
            Dataset::Cells => cells_schema(),
        }
    }

    pub fn write<W: Write>(self, out: W) -> csv::Result<()> {
        match self {
            Dataset::Packets => write_packets(out, 2000, 1),
            Dataset::Adult => write_adult(out, 5000, 2),
            Dataset::Colors => write_colors(out, 300, 3),
            Dataset::Cells => write_cells(out, Self::CELLS, 2000, 4),
        }
    }

    /// Rows of the dataset, generated in memory.
    pub fn rows(self) -> Vec<crate::data::Datum> {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory cannot fail");
        crate::io::read_csv(buf.as_slice(), &self.schema()).expect("generated CSV is well formed")
    }
}
