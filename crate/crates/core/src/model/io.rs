//! Reading and writing systems as triplet CSV, dense CSV, and JSON.
//!
//! * Triplet CSV: `eq,var,coeff`, with a bounds file `var,lower,upper` and an
//!   optional right-hand-side file `eq,y` (missing equations default to `y = 0`).
//!   Identifiers may be names or zero-based indices.
//! * Dense CSV: header `label,<var names...>,y`; one row per equation, plus
//!   rows labelled `lower` and `upper` carrying the bounds.
//! * JSON: `{"variables":[{name,lower,upper}],"equations":[{name,y,terms:[{var,coeff}]}]}`.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{LinearSystem, Term};
use crate::error::{Error, Result};

/// Supported input formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    TripletCsv,
    DenseCsv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triplet-csv" | "triplet" => Ok(Format::TripletCsv),
            "dense-csv" | "dense" => Ok(Format::DenseCsv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parameter(format!("unknown format `{other}`"))),
        }
    }
}

/// Reads a system from `main`; `bounds` and `rhs` are only used by the triplet format.
pub fn load_system<R: Read>(format: Format, main: R, bounds: Option<R>, rhs: Option<R>) -> Result<LinearSystem> {
    match format {
        Format::Json => read_json(main),
        Format::DenseCsv => read_dense_csv(main),
        Format::TripletCsv => {
            let bounds = bounds.ok_or_else(|| Error::Parameter("triplet format needs a bounds file".into()))?;
            read_triplets(main, bounds, rhs)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum VarRef {
    Index(usize),
    Name(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonVariable {
    name: String,
    lower: f64,
    upper: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonTerm {
    var: VarRef,
    coeff: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonEquation {
    name: String,
    #[serde(default)]
    y: f64,
    terms: Vec<JsonTerm>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonSystem {
    variables: Vec<JsonVariable>,
    equations: Vec<JsonEquation>,
}

pub fn read_json<R: Read>(reader: R) -> Result<LinearSystem> {
    let doc: JsonSystem = serde_json::from_reader(reader)?;
    let index: HashMap<&str, usize> = doc
        .variables
        .iter()
        .enumerate()
        .map(|(i, v)| (v.name.as_str(), i))
        .collect();
    let n = doc.variables.len();
    let mut entries = Vec::new();
    for (a, eq) in doc.equations.iter().enumerate() {
        for t in &eq.terms {
            let var = match &t.var {
                VarRef::Index(i) if *i < n => *i,
                VarRef::Name(name) => *index.get(name.as_str()).ok_or_else(|| Error::Parse {
                    line: 0,
                    field: format!("equations[{a}].terms.var"),
                    message: format!("unknown variable `{name}`"),
                })?,
                VarRef::Index(i) => {
                    return Err(Error::Parse {
                        line: 0,
                        field: format!("equations[{a}].terms.var"),
                        message: format!("variable index {i} out of range"),
                    })
                }
            };
            entries.push(Term {
                eq: a,
                var,
                coeff: t.coeff,
            });
        }
    }
    LinearSystem::new(
        n,
        entries,
        doc.equations.iter().map(|e| e.y).collect(),
        doc.variables.iter().map(|v| v.lower).collect(),
        doc.variables.iter().map(|v| v.upper).collect(),
    )?
    .with_var_names(doc.variables.iter().map(|v| v.name.clone()).collect())?
    .with_eq_names(doc.equations.iter().map(|e| e.name.clone()).collect())
}

pub fn write_json<W: Write>(sys: &LinearSystem, writer: W) -> Result<()> {
    let doc = JsonSystem {
        variables: (0..sys.n_vars())
            .map(|i| JsonVariable {
                name: sys.var_name(i),
                lower: sys.lower()[i],
                upper: sys.upper()[i],
            })
            .collect(),
        equations: (0..sys.n_eqs())
            .map(|a| JsonEquation {
                name: sys.eq_name(a),
                y: sys.rhs()[a],
                terms: sys
                    .entries()
                    .iter()
                    .filter(|t| t.eq == a)
                    .map(|t| JsonTerm {
                        var: VarRef::Name(sys.var_name(t.var)),
                        coeff: t.coeff,
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_writer_pretty(writer, &doc)?;
    Ok(())
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(reader)
}

fn line_of(record: &csv::StringRecord) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn parse_f64(record: &csv::StringRecord, col: usize, field: &str) -> Result<f64> {
    let raw = record.get(col).ok_or_else(|| Error::Parse {
        line: line_of(record),
        field: field.to_string(),
        message: "missing field".into(),
    })?;
    raw.parse::<f64>().map_err(|e| Error::Parse {
        line: line_of(record),
        field: field.to_string(),
        message: format!("`{raw}`: {e}"),
    })
}

fn field<'r>(record: &'r csv::StringRecord, col: usize, name: &str) -> Result<&'r str> {
    record.get(col).filter(|s| !s.is_empty()).ok_or_else(|| Error::Parse {
        line: line_of(record),
        field: name.to_string(),
        message: "missing field".into(),
    })
}

fn check_header(reader: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = reader.headers()?.clone();
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            field: "header".into(),
            message: format!("expected `{}`, found `{}`", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

/// Resolves identifiers to indices: names in declaration order, or bare indices.
struct Labels {
    names: Vec<String>,
    index: HashMap<String, usize>,
    numeric: bool,
}

impl Labels {
    fn new() -> Self {
        Self {
            names: Vec::new(),
            index: HashMap::new(),
            numeric: true,
        }
    }

    fn declare(&mut self, name: &str) -> Option<usize> {
        if self.index.contains_key(name) {
            return None;
        }
        if name.parse::<usize>().is_err() {
            self.numeric = false;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        Some(id)
    }

    fn resolve(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied().or_else(|| {
            if self.numeric {
                None
            } else {
                name.parse::<usize>().ok().filter(|&i| i < self.names.len())
            }
        })
    }
}

pub fn read_triplets<R: Read>(triplets: R, bounds: R, rhs: Option<R>) -> Result<LinearSystem> {
    let mut vars = Labels::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut rdr = csv_reader(bounds);
    check_header(&mut rdr, &["var", "lower", "upper"])?;
    for rec in rdr.records() {
        let rec = rec?;
        let name = field(&rec, 0, "var")?;
        if vars.declare(name).is_none() {
            return Err(Error::Parse {
                line: line_of(&rec),
                field: "var".into(),
                message: format!("duplicate variable `{name}`"),
            });
        }
        lower.push(parse_f64(&rec, 1, "lower")?);
        upper.push(parse_f64(&rec, 2, "upper")?);
    }
    // A numeric bounds file must list 0..n in order, so that indices and names coincide.
    if vars.numeric
        && vars
            .names
            .iter()
            .enumerate()
            .any(|(i, n)| n.parse::<usize>().ok() != Some(i))
    {
        vars.numeric = false;
    }

    let mut eqs = Labels::new();
    let mut y = Vec::new();
    let have_rhs = rhs.is_some();
    if let Some(rhs) = rhs {
        let mut rdr = csv_reader(rhs);
        check_header(&mut rdr, &["eq", "y"])?;
        for rec in rdr.records() {
            let rec = rec?;
            let name = field(&rec, 0, "eq")?;
            if eqs.declare(name).is_none() {
                return Err(Error::Parse {
                    line: line_of(&rec),
                    field: "eq".into(),
                    message: format!("duplicate equation `{name}`"),
                });
            }
            y.push(parse_f64(&rec, 1, "y")?);
        }
    }

    let mut raw = Vec::new();
    let mut rdr = csv_reader(triplets);
    check_header(&mut rdr, &["eq", "var", "coeff"])?;
    for rec in rdr.records() {
        let rec = rec?;
        let eq_name = field(&rec, 0, "eq")?.to_string();
        let var_name = field(&rec, 1, "var")?;
        let var = vars.resolve(var_name).ok_or_else(|| Error::Parse {
            line: line_of(&rec),
            field: "var".into(),
            message: format!("unknown variable `{var_name}`"),
        })?;
        let coeff = parse_f64(&rec, 2, "coeff")?;
        raw.push((eq_name, var, coeff, line_of(&rec)));
    }

    let mut entries = Vec::with_capacity(raw.len());
    if have_rhs {
        for (eq_name, var, coeff, line) in raw {
            let eq = eqs.resolve(&eq_name).ok_or_else(|| Error::Parse {
                line,
                field: "eq".into(),
                message: format!("equation `{eq_name}` missing from the rhs file"),
            })?;
            entries.push(Term { eq, var, coeff });
        }
    } else if raw.iter().all(|r| r.0.parse::<usize>().is_ok()) {
        let n_eqs = raw.iter().map(|r| r.0.parse::<usize>().unwrap() + 1).max().unwrap_or(0);
        for (eq_name, var, coeff, _) in raw {
            entries.push(Term {
                eq: eq_name.parse().unwrap(),
                var,
                coeff,
            });
        }
        for a in 0..n_eqs {
            eqs.declare(&a.to_string());
        }
        y = vec![0.0; n_eqs];
    } else {
        for (eq_name, var, coeff, _) in raw {
            eqs.declare(&eq_name);
            let eq = eqs.resolve(&eq_name).unwrap();
            entries.push(Term { eq, var, coeff });
        }
        y = vec![0.0; eqs.names.len()];
    }

    let mut sys = LinearSystem::new(vars.names.len(), entries, y, lower, upper)?;
    if !vars.numeric {
        sys = sys.with_var_names(vars.names)?;
    }
    if !eqs.numeric {
        sys = sys.with_eq_names(eqs.names)?;
    }
    Ok(sys)
}

/// Writes the three triplet files.
pub fn write_triplets<W: Write>(sys: &LinearSystem, triplets: W, bounds: W, rhs: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(triplets);
    w.write_record(["eq", "var", "coeff"])?;
    for t in sys.entries() {
        w.write_record([sys.eq_name(t.eq), sys.var_name(t.var), t.coeff.to_string()])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(bounds);
    w.write_record(["var", "lower", "upper"])?;
    for i in 0..sys.n_vars() {
        w.write_record([sys.var_name(i), sys.lower()[i].to_string(), sys.upper()[i].to_string()])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(rhs);
    w.write_record(["eq", "y"])?;
    for a in 0..sys.n_eqs() {
        w.write_record([sys.eq_name(a), sys.rhs()[a].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dense_csv<R: Read>(reader: R) -> Result<LinearSystem> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() < 3 || header.get(header.len() - 1) != Some("y") {
        return Err(Error::Parse {
            line: 1,
            field: "header".into(),
            message: "expected `label,<variables...>,y`".into(),
        });
    }
    let n = header.len() - 2;
    let var_names: Vec<String> = header.iter().skip(1).take(n).map(str::to_string).collect();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut y = Vec::new();
    let mut eq_names = Vec::new();
    let mut lower = None;
    let mut upper = None;
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() < n + 1 {
            return Err(Error::Parse {
                line: line_of(&rec),
                field: "row".into(),
                message: format!("expected at least {} fields, found {}", n + 1, rec.len()),
            });
        }
        let label = rec.get(0).unwrap_or("").to_string();
        let values = (0..n)
            .map(|j| parse_f64(&rec, j + 1, &var_names[j]))
            .collect::<Result<Vec<f64>>>()?;
        match label.as_str() {
            "lower" => lower = Some(values),
            "upper" => upper = Some(values),
            _ => {
                rows.push(values);
                y.push(parse_f64(&rec, n + 1, "y")?);
                eq_names.push(label);
            }
        }
    }
    let lower = lower.ok_or_else(|| Error::Parse {
        line: 0,
        field: "lower".into(),
        message: "missing `lower` row".into(),
    })?;
    let upper = upper.ok_or_else(|| Error::Parse {
        line: 0,
        field: "upper".into(),
        message: "missing `upper` row".into(),
    })?;
    let mut entries = Vec::new();
    for (a, row) in rows.iter().enumerate() {
        for (i, &c) in row.iter().enumerate() {
            if c != 0.0 {
                entries.push(Term {
                    eq: a,
                    var: i,
                    coeff: c,
                });
            }
        }
    }
    LinearSystem::new(n, entries, y, lower, upper)?
        .with_var_names(var_names)?
        .with_eq_names(eq_names)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_triplet_system() {
        let trip = "eq,var,coeff\n0,0,1\n0,1,-1\n";
        let bounds = "var,lower,upper\n0,0,1\n1,0,1\n";
        let rhs = "eq,y\n0,0\n";
        let sys = read_triplets(trip.as_bytes(), bounds.as_bytes(), Some(rhs.as_bytes())).unwrap();
        assert_eq!(sys.n_vars(), 2);
        assert_eq!(sys.n_eqs(), 1);
        assert_eq!(sys.entries()[1].coeff, -1.0);
        assert_eq!(sys.upper(), &[1.0, 1.0]);
    }

    #[test]
    fn triplet_names_and_default_rhs() {
        let trip = "eq,var,coeff\natp,HK,-1\natp,PK,1\n";
        let bounds = "var,lower,upper\nHK,0,2\nPK,0,3\n";
        let sys = read_triplets(trip.as_bytes(), bounds.as_bytes(), None).unwrap();
        assert_eq!(sys.var_names().unwrap(), &["HK".to_string(), "PK".to_string()]);
        assert_eq!(sys.eq_names().unwrap(), &["atp".to_string()]);
        assert_eq!(sys.rhs(), &[0.0]);
    }

    #[test]
    fn parse_error_reports_line() {
        let trip = "eq,var,coeff\n0,0,1\n0,1,abc\n";
        let bounds = "var,lower,upper\n0,0,1\n1,0,1\n";
        let err = read_triplets(trip.as_bytes(), bounds.as_bytes(), None).unwrap_err();
        match err {
            Error::Parse { line, field, .. } => {
                assert_eq!(line, 3);
                assert_eq!(field, "coeff");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dense_zero_row_is_empty_equation() {
        let dense = "label,x1,x2,y\ne0,1,-1,0\ne1,1,1,1\ne2,0,0,0\nlower,0,0,\nupper,1,1,\n";
        let err = read_dense_csv(dense.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::EmptyEquation(2)));
        assert_eq!(err.to_string(), "empty equation 2");
    }

    #[test]
    fn dense_round_trips_through_json() {
        let dense = "label,x1,x2,x3,y\ne0,1,1,-2,0\nlower,0,0,0,\nupper,1,1,1,\n";
        let sys = read_dense_csv(dense.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_json(&sys, &mut buf).unwrap();
        let back = read_json(buf.as_slice()).unwrap();
        assert_eq!(back, sys);
    }

    #[test]
    fn triplet_writer_round_trip() {
        let json = r#"{"variables":[{"name":"a","lower":0,"upper":1},{"name":"b","lower":-1,"upper":2}],
            "equations":[{"name":"m","y":0.5,"terms":[{"var":"a","coeff":1},{"var":1,"coeff":-2}]}]}"#;
        let sys = read_json(json.as_bytes()).unwrap();
        let (mut t, mut b, mut r) = (Vec::new(), Vec::new(), Vec::new());
        write_triplets(&sys, &mut t, &mut b, &mut r).unwrap();
        let back = read_triplets(t.as_slice(), b.as_slice(), Some(r.as_slice())).unwrap();
        assert_eq!(back, sys);
    }
}
