//! CSV and JSON-lines output.
//!
//! Reals are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64`. Non-finite reals are written as `inf`, `-inf` and
//! `nan`; JSON output quotes them since JSON has no literal for them.
//! Missing values are empty in CSV and `null` in JSON.

use std::io::{self, Write};

use nalgebra::DMatrix;

use crate::montecarlo::{RankLawRow, SweepRow};
use crate::tensor::LAYOUT_VERSION;

/// Formats a real with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Int(u64),
    Real(f64),
    Text(String),
    Missing,
}

impl Field {
    fn csv(&self) -> String {
        match self {
            Field::Int(v) => v.to_string(),
            Field::Real(x) => fmt_real(*x),
            Field::Text(s) => s.clone(),
            Field::Missing => String::new(),
        }
    }

    fn json(&self) -> String {
        match self {
            Field::Int(v) => v.to_string(),
            Field::Real(x) if x.is_finite() => fmt_real(*x),
            Field::Real(x) => format!("\"{}\"", fmt_real(*x)),
            Field::Text(s) => format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
            Field::Missing => "null".into(),
        }
    }
}

/// A flat output row with a fixed column order.
pub trait Record {
    fn columns() -> &'static [&'static str];
    fn fields(&self) -> Vec<Field>;
}

impl Record for SweepRow {
    fn columns() -> &'static [&'static str] {
        &[
            "k",
            "alpha",
            "mean_cond",
            "min_cond",
            "max_cond",
            "mean_log_abs_det",
            "fullrank_fraction",
            "borderline_fraction",
        ]
    }

    fn fields(&self) -> Vec<Field> {
        vec![
            Field::Int(self.k as u64),
            Field::Real(self.alpha),
            Field::Real(self.mean_cond),
            Field::Real(self.min_cond),
            Field::Real(self.max_cond),
            Field::Real(self.mean_log_abs_det),
            Field::Real(self.fullrank_fraction),
            Field::Real(self.borderline_fraction),
        ]
    }
}

impl Record for RankLawRow {
    fn columns() -> &'static [&'static str] {
        &[
            "k",
            "trials",
            "bound",
            "min_rank",
            "max_rank",
            "rank_counts",
            "bound_equal_fraction",
            "bound_exceeded",
            "decisive_mismatches",
            "fullrank_fraction",
            "borderline_fraction",
            "mean_cond",
        ]
    }

    fn fields(&self) -> Vec<Field> {
        let counts = self.rank_counts.iter().map(|(r, c)| format!("{r}:{c}")).collect::<Vec<_>>().join(";");
        vec![
            Field::Int(self.k as u64),
            Field::Int(self.trials as u64),
            self.bound.map_or(Field::Missing, |b| Field::Int(b as u64)),
            Field::Int(self.min_rank as u64),
            Field::Int(self.max_rank as u64),
            Field::Text(counts),
            self.bound_equal_fraction.map_or(Field::Missing, Field::Real),
            Field::Int(self.bound_exceeded as u64),
            Field::Int(self.decisive_mismatches as u64),
            Field::Real(self.fullrank_fraction),
            Field::Real(self.borderline_fraction),
            Field::Real(self.mean_cond),
        ]
    }
}

pub fn write_csv<R: Record, W: Write>(rows: &[R], w: W) -> io::Result<()> {
    write_fields_csv(R::columns(), rows.iter().map(Record::fields), w)
}

pub fn write_jsonl<R: Record, W: Write>(rows: &[R], w: W) -> io::Result<()> {
    write_fields_jsonl(R::columns(), rows.iter().map(Record::fields), w)
}

/// CSV for rows whose columns are only known at run time.
pub fn write_fields_csv<S, I, W>(columns: &[S], rows: I, mut w: W) -> io::Result<()>
where
    S: AsRef<str>,
    I: IntoIterator<Item = Vec<Field>>,
    W: Write,
{
    let header: Vec<&str> = columns.iter().map(AsRef::as_ref).collect();
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(Field::csv).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_fields_jsonl<S, I, W>(columns: &[S], rows: I, mut w: W) -> io::Result<()>
where
    S: AsRef<str>,
    I: IntoIterator<Item = Vec<Field>>,
    W: Write,
{
    for row in rows {
        let body: Vec<String> =
            columns.iter().zip(row).map(|(name, field)| format!("\"{}\":{}", name.as_ref(), field.json())).collect();
        writeln!(w, "{{{}}}", body.join(","))?;
    }
    Ok(())
}

/// Header line naming the tensor layout version.
pub fn layout_header() -> String {
    format!("# kernrank tensor layout v{LAYOUT_VERSION}")
}

/// Writes matrices in long form, `matrix,row,col,value`, after the layout
/// header. Entries are in column-major order within each matrix.
pub fn write_matrices_csv<W: Write>(matrices: &[(&str, &DMatrix<f64>)], mut w: W) -> io::Result<()> {
    writeln!(w, "{}", layout_header())?;
    writeln!(w, "matrix,row,col,value")?;
    for (name, m) in matrices {
        for col in 0..m.ncols() {
            for row in 0..m.nrows() {
                writeln!(w, "{name},{row},{col},{}", fmt_real(m[(row, col)]))?;
            }
        }
    }
    Ok(())
}
