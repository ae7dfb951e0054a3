//! Typed CSV ingestion.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

use crate::data::{Datum, Record};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnType {
    Int,
    Real,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub ty: ColumnType,
}

/// Expected columns of a table. The header may list them in any order;
/// columns the schema does not mention are read as text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub columns: Vec<Column>,
}

impl Schema {
    pub fn new<'a>(columns: impl IntoIterator<Item = (&'a str, ColumnType)>) -> Self {
        Schema {
            columns: columns
                .into_iter()
                .map(|(name, ty)| Column {
                    name: name.to_string(),
                    ty,
                })
                .collect(),
        }
    }

    fn type_of(&self, name: &str) -> ColumnType {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .map_or(ColumnType::Text, |c| c.ty)
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
}

pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<Vec<Datum>, LoadError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, schema)
}

/// Parse CSV text with a header row. Every data row becomes a
/// [`Datum::Record`].
pub fn read_csv<R: Read>(input: R, schema: &Schema) -> Result<Vec<Datum>, LoadError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers().map_err(|e| parse_error(1, e))?.clone();
    let columns: Arc<[String]> = header.iter().map(str::to_string).collect();
    for col in &schema.columns {
        if !columns.contains(&col.name) {
            return Err(LoadError::Parse {
                line: 1,
                message: format!("missing column `{}`", col.name),
            });
        }
    }
    let types: Vec<ColumnType> = columns.iter().map(|c| schema.type_of(c)).collect();

    let mut rows = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(line, e)
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != columns.len() {
            return Err(LoadError::Parse {
                line,
                message: format!("expected {} fields, found {}", columns.len(), record.len()),
            });
        }
        let values = record
            .iter()
            .zip(&types)
            .zip(columns.iter())
            .map(|((cell, ty), name)| parse_cell(cell, *ty, name, line))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(Datum::Record(Record::new(columns.clone(), values)));
    }
    Ok(rows)
}

fn parse_cell(cell: &str, ty: ColumnType, column: &str, line: u64) -> Result<Datum, LoadError> {
    let bad = |what: &str| LoadError::Parse {
        line,
        message: format!("column `{column}`: `{cell}` is not {what}"),
    };
    match ty {
        ColumnType::Int => cell.parse().map(Datum::Int).map_err(|_| bad("an integer")),
        ColumnType::Real => cell.parse().map(Datum::Real).map_err(|_| bad("a number")),
        ColumnType::Text => Ok(Datum::text(cell)),
    }
}

fn parse_error(line: u64, e: csv::Error) -> LoadError {
    LoadError::Parse {
        line,
        message: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema::new([("id", ColumnType::Int), ("length", ColumnType::Int)])
    }

    #[test]
    fn typed_columns() {
        let rows = read_csv("id,length,payload\n1,40,abc\n2,1500,\n".as_bytes(), &schema()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].field("length"), Some(&Datum::Int(1500)));
        assert_eq!(rows[0].field("payload"), Some(&Datum::text("abc")));
    }

    #[test]
    fn header_only_is_empty() {
        assert!(read_csv("id,length\n".as_bytes(), &schema()).unwrap().is_empty());
    }

    #[test]
    fn errors_name_the_line() {
        let err = read_csv("id,length\n1,2\n3\n".as_bytes(), &schema()).unwrap_err();
        assert!(matches!(err, LoadError::Parse { line: 3, .. }), "{err}");
        let err = read_csv("id,length\n1,2\n3,x\n".as_bytes(), &schema()).unwrap_err();
        assert!(err.to_string().starts_with("line 3:"), "{err}");
        let err = read_csv("id\n1\n".as_bytes(), &schema()).unwrap_err();
        assert!(err.to_string().contains("missing column `length`"));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_csv("/nonexistent/file.csv", &schema()).unwrap_err();
        assert!(matches!(err, LoadError::Io { .. }));
    }
}
