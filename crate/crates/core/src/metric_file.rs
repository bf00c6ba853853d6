//! Metric specification files and the corpus manifest.
//!
//! A metric file is line oriented. `#` starts a comment outside quotes.
//! Section headers `[meta]`, `[chart]` and `[metric]` group `key = value`
//! lines:
//!
//! ```text
//! [meta]
//! name = "sphere_gnomonic2"
//! description = "unit sphere, gnomonic chart"
//! expected = "nontrivial_geodesic"
//!
//! [chart]
//! dimension = 2
//! coordinates = x1, x2
//! domain = [-0.45, 0.45]        # every coordinate
//! domain.x2 = [-0.4, 0.4]       # override one
//! margin = 0.1
//!
//! [metric]
//! g11 = "(1 + x2^2) / (1 + x1^2 + x2^2)^2"
//! g12 = "-x1*x2 / (1 + x1^2 + x2^2)^2"
//! g22 = "(1 + x1^2) / (1 + x1^2 + x2^2)^2"
//! ```
//!
//! `coordinates` defaults to `x1..xn` and `margin` to 0.1. Metric keys are
//! `gij` with 1-based digits; `gji` names the same entry, and giving both is
//! an error. Missing off-diagonal entries are zero, missing diagonal entries
//! are an error.
//!
//! The manifest lists one pair per line: `source target expected`, file
//! names relative to the manifest, `expected` one of `not_geodesic`,
//! `trivial_affine`, `nontrivial_geodesic`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::expr::{self, Expr};
use crate::geometry::{Chart, MetricField, DEFAULT_MARGIN};
use crate::mapping::Classification;

/// A parsed metric file.
#[derive(Clone, Debug)]
pub struct MetricSpec {
    pub name: String,
    pub description: Option<String>,
    pub expected: Option<Classification>,
    pub metric: MetricField,
}

#[derive(Clone, Debug)]
struct Value {
    text: String,
    /// 1-based column of `text`'s first character.
    column: usize,
    quoted: bool,
}

struct Ctx<'a> {
    label: &'a str,
}

impl Ctx<'_> {
    fn err(&self, line: usize, column: usize, message: impl Into<String>) -> Error {
        Error::MetricFile {
            path: self.label.to_string(),
            line,
            column,
            message: message.into(),
        }
    }
}

/// Strip a trailing comment that is not inside a quoted string.
fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn char_col(line: &str, byte: usize) -> usize {
    line[..byte].chars().count() + 1
}

fn parse_value(ctx: &Ctx, lineno: usize, line: &str, start: usize) -> Result<Value> {
    let raw = &line[start..];
    let lead = raw.len() - raw.trim_start().len();
    let body = raw.trim();
    let col = char_col(line, start + lead);
    if body.is_empty() {
        return Err(ctx.err(lineno, col, "missing value"));
    }
    if let Some(rest) = body.strip_prefix('"') {
        let Some(end) = rest.find('"') else {
            return Err(ctx.err(lineno, col, "unterminated string"));
        };
        if !rest[end + 1..].trim().is_empty() {
            return Err(ctx.err(lineno, col + end + 2, "unexpected text after closing quote"));
        }
        return Ok(Value {
            text: rest[..end].to_string(),
            column: col + 1,
            quoted: true,
        });
    }
    Ok(Value {
        text: body.to_string(),
        column: col,
        quoted: false,
    })
}

fn parse_number(ctx: &Ctx, line: usize, v: &Value) -> Result<f64> {
    v.text
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ctx.err(line, v.column, format!("expected a number, got `{}`", v.text)))
}

fn parse_interval(ctx: &Ctx, line: usize, v: &Value) -> Result<[f64; 2]> {
    let t = v.text.trim();
    let inner = t
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| ctx.err(line, v.column, format!("expected an interval `[lo, hi]`, got `{t}`")))?;
    let parts: Vec<&str> = inner.split(',').collect();
    if parts.len() != 2 {
        return Err(ctx.err(line, v.column, "an interval needs exactly two bounds"));
    }
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| ctx.err(line, v.column, format!("invalid bound `{}`", s.trim())))
    };
    Ok([num(parts[0])?, num(parts[1])?])
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Meta,
    Chart,
    Metric,
}

/// Parse a metric file. `label` names the source in error messages and is
/// the fallback metric name.
pub fn parse_metric_spec(text: &str, label: &str) -> Result<MetricSpec> {
    let ctx = Ctx { label };
    let mut section = Section::None;
    // key → (line, key column, value)
    let mut meta: BTreeMap<String, (usize, usize, Value)> = BTreeMap::new();
    let mut chart: BTreeMap<String, (usize, usize, Value)> = BTreeMap::new();
    let mut metric: Vec<(usize, usize, String, Value)> = Vec::new();
    let mut seen_sections = Vec::new();

    for (idx, full) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = strip_comment(full);
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let lead = line.len() - line.trim_start().len();
        let col = char_col(line, lead);
        if trimmed.starts_with('[') {
            let Some(name) = trimmed.strip_prefix('[').and_then(|s| s.strip_suffix(']')) else {
                return Err(ctx.err(lineno, col, "malformed section header"));
            };
            section = match name.trim() {
                "meta" => Section::Meta,
                "chart" => Section::Chart,
                "metric" => Section::Metric,
                other => return Err(ctx.err(lineno, col, format!("unknown section `[{other}]`"))),
            };
            if seen_sections.contains(&(section as u8)) {
                return Err(ctx.err(lineno, col, format!("section `[{}]` appears twice", name.trim())));
            }
            seen_sections.push(section as u8);
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(ctx.err(lineno, col, "expected `key = value`"));
        };
        let key = line[..eq].trim().to_string();
        if key.is_empty() {
            return Err(ctx.err(lineno, col, "missing key"));
        }
        let value = parse_value(&ctx, lineno, line, eq + 1)?;
        let store = match section {
            Section::None => return Err(ctx.err(lineno, col, "key outside of any section")),
            Section::Meta => &mut meta,
            Section::Chart => &mut chart,
            Section::Metric => {
                metric.push((lineno, col, key, value));
                continue;
            }
        };
        if let Some((first, _, _)) = store.get(&key) {
            return Err(ctx.err(lineno, col, format!("duplicate key `{key}` (first on line {first})")));
        }
        store.insert(key, (lineno, col, value));
    }

    // [meta]
    let mut name = None;
    let mut description = None;
    let mut expected = None;
    for (key, (line, col, v)) in &meta {
        match key.as_str() {
            "name" => name = Some(v.text.clone()),
            "description" => description = Some(v.text.clone()),
            "expected" => {
                expected = Some(
                    v.text
                        .parse::<Classification>()
                        .map_err(|m| ctx.err(*line, v.column, m))?,
                );
            }
            other => return Err(ctx.err(*line, *col, format!("unknown meta key `{other}`"))),
        }
    }

    // [chart]
    let end = text.lines().count().max(1);
    let Some((dline, _, dval)) = chart.get("dimension") else {
        return Err(ctx.err(end, 1, "missing `dimension` in [chart]"));
    };
    let dim = dval
        .text
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|d| (2..=6).contains(d))
        .ok_or_else(|| {
            ctx.err(
                *dline,
                dval.column,
                format!("dimension must be an integer in 2..=6, got `{}`", dval.text),
            )
        })?;
    let coords: Vec<String> = match chart.get("coordinates") {
        Some((line, _, v)) => {
            let c: Vec<String> = v.text.split(',').map(|s| s.trim().to_string()).collect();
            if c.len() != dim {
                return Err(ctx.err(
                    *line,
                    v.column,
                    format!("{} coordinates listed for dimension {dim}", c.len()),
                ));
            }
            if c.iter().any(|s| s.is_empty()) {
                return Err(ctx.err(*line, v.column, "empty coordinate name"));
            }
            c
        }
        None => (1..=dim).map(|i| format!("x{i}")).collect(),
    };
    let mut domain: Vec<Option<[f64; 2]>> = vec![None; dim];
    if let Some((line, _, v)) = chart.get("domain") {
        let iv = parse_interval(&ctx, *line, v)?;
        domain.iter_mut().for_each(|d| *d = Some(iv));
    }
    let mut margin = DEFAULT_MARGIN;
    for (key, (line, col, v)) in &chart {
        match key.as_str() {
            "dimension" | "coordinates" | "domain" => {}
            "margin" => margin = parse_number(&ctx, *line, v)?,
            k => {
                let Some(coord) = k.strip_prefix("domain.") else {
                    return Err(ctx.err(*line, *col, format!("unknown chart key `{k}`")));
                };
                let Some(i) = coords.iter().position(|c| c == coord) else {
                    return Err(ctx.err(*line, *col, format!("`{coord}` is not a coordinate of this chart")));
                };
                domain[i] = Some(parse_interval(&ctx, *line, v)?);
            }
        }
    }
    let domain: Vec<[f64; 2]> = domain
        .into_iter()
        .zip(&coords)
        .map(|(d, c)| d.ok_or_else(|| ctx.err(end, 1, format!("no domain interval for `{c}`"))))
        .collect::<Result<_>>()?;
    let chart_line = chart.values().map(|(l, _, _)| *l).min().unwrap_or(1);
    let chart_obj = Chart::new(coords.clone(), domain, margin).map_err(|e| ctx.err(chart_line, 1, e.to_string()))?;

    // [metric]
    let mut entries: Vec<Option<(usize, Expr)>> = vec![None; dim * (dim + 1) / 2];
    let slot = |i: usize, j: usize| -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * dim - i * (i + 1) / 2 + j
    };
    for (line, col, key, v) in metric {
        let bytes = key.as_bytes();
        let index = |b: u8| -> Option<usize> {
            let d = (b as char).to_digit(10)? as usize;
            (1..=dim).contains(&d).then_some(d - 1)
        };
        let (i, j) = match bytes {
            [b'g', a, b] => match (index(*a), index(*b)) {
                (Some(i), Some(j)) => (i, j),
                _ => {
                    return Err(ctx.err(
                        line,
                        col,
                        format!("`{key}` is not a component of a {dim}-dimensional metric"),
                    ))
                }
            },
            _ => return Err(ctx.err(line, col, format!("unknown metric key `{key}`, expected `gij`"))),
        };
        if !v.quoted {
            return Err(ctx.err(line, v.column, "metric components must be quoted expressions"));
        }
        let e = expr::parse(&v.text, &coords).map_err(|pe| {
            let offset = pe.position().unwrap_or(0);
            ctx.err(line, v.column + offset, pe.to_string())
        })?;
        let s = slot(i, j);
        if let Some((first, _)) = &entries[s] {
            let what = if i == j {
                "duplicate key"
            } else {
                "duplicate symmetric entry"
            };
            return Err(ctx.err(
                line,
                col,
                format!(
                    "{what} `{key}` (g{}{} already given on line {first})",
                    i.min(j) + 1,
                    i.max(j) + 1
                ),
            ));
        }
        entries[s] = Some((line, e));
    }
    let mut upper = Vec::with_capacity(entries.len());
    for i in 0..dim {
        for j in i..dim {
            match entries[slot(i, j)].take() {
                Some((_, e)) => upper.push(e),
                None if i == j => {
                    return Err(ctx.err(end, 1, format!("missing diagonal component g{}{}", i + 1, i + 1)));
                }
                None => upper.push(Expr::constant(0.0)),
            }
        }
    }
    let name = name.unwrap_or_else(|| {
        Path::new(label)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| label.to_string())
    });
    let metric = MetricField::from_upper(chart_obj, upper)
        .map_err(|e| ctx.err(end, 1, e.to_string()))?
        .with_name(name.clone());
    Ok(MetricSpec {
        name,
        description,
        expected,
        metric,
    })
}

/// Read and parse a metric file.
pub fn load_metric_spec(path: impl AsRef<Path>) -> Result<MetricSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_metric_spec(&text, &path.display().to_string())
}

/// One line of the corpus manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub source: PathBuf,
    pub target: PathBuf,
    pub expected: Classification,
    pub line: usize,
}

/// Parse manifest text; file names are resolved against `dir`.
pub fn parse_manifest(text: &str, dir: &Path, label: &str) -> Result<Vec<ManifestEntry>> {
    let ctx = Ctx { label };
    let mut out = Vec::new();
    for (idx, full) in text.lines().enumerate() {
        let line = strip_comment(full);
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        if fields.len() != 3 {
            return Err(ctx.err(
                lineno,
                1,
                format!("expected `source target expected`, found {} fields", fields.len()),
            ));
        }
        let column = char_col(line, line.find(fields[2]).unwrap_or(0));
        let expected = fields[2]
            .parse::<Classification>()
            .map_err(|m| ctx.err(lineno, column, m))?;
        out.push(ManifestEntry {
            source: dir.join(fields[0]),
            target: dir.join(fields[1]),
            expected,
            line: lineno,
        });
    }
    Ok(out)
}

/// Read a manifest file; entries resolve relative to its directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text, dir, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    const SPHERE: &str = r#"
# unit sphere
[meta]
name = "sphere"
expected = "nontrivial_geodesic"

[chart]
dimension = 2
domain = [-0.45, 0.45]

[metric]
g11 = "(1 + x2^2) / (1 + x1^2 + x2^2)^2"
g21 = "-x1*x2 / (1 + x1^2 + x2^2)^2"   # lower key is fine
g22 = "(1 + x1^2) / (1 + x1^2 + x2^2)^2"
"#;

    fn error_at(text: &str) -> (usize, usize, String) {
        match parse_metric_spec(text, "t.metric") {
            Err(Error::MetricFile {
                line, column, message, ..
            }) => (line, column, message),
            other => panic!("expected a metric file error, got {other:?}"),
        }
    }

    #[test]
    fn parses_a_full_file() {
        let s = parse_metric_spec(SPHERE, "x.metric").unwrap();
        assert_eq!(s.name, "sphere");
        assert_eq!(s.expected, Some(Classification::NontrivialGeodesic));
        let g = s.metric.eval(&[0.2, -0.1]).unwrap();
        let q: f64 = 1.0 + 0.04 + 0.01;
        assert!((g[[0, 1]] - 0.02 / (q * q)).abs() < 1e-15);
        assert_eq!(g[[0, 1]], g[[1, 0]]);
        assert_eq!(s.metric.chart().domain(), &[[-0.45, 0.45]; 2]);
    }

    #[test]
    fn defaults() {
        let s = parse_metric_spec(
            "[chart]\ndimension = 3\ndomain = [-1, 1]\ndomain.x3 = [0, 2]\n[metric]\ng11 = \"1\"\ng22 = \"1\"\ng33 = \"1\"\n",
            "dir/flat3.metric",
        )
        .unwrap();
        assert_eq!(s.name, "flat3");
        assert_eq!(s.metric.chart().coords(), ["x1", "x2", "x3"]);
        assert_eq!(s.metric.chart().domain()[2], [0.0, 2.0]);
        assert_eq!(s.metric.chart().margin(), DEFAULT_MARGIN);
        assert_eq!(s.metric.eval(&[0.0, 0.0, 1.0]).unwrap(), Tensor::identity(3));
    }

    #[test]
    fn duplicate_symmetric_entry() {
        let text = SPHERE.replace("g22 =", "g12 = \"0\"\ng22 =");
        let (line, column, message) = error_at(&text);
        assert_eq!(line, 14);
        assert_eq!(column, 1);
        assert!(message.contains("duplicate symmetric entry"), "{message}");
    }

    #[test]
    fn expression_errors_carry_columns() {
        let (line, column, message) =
            error_at("[chart]\ndimension = 2\ndomain = [0, 1]\n[metric]\ng11 = \"1 + y\"\ng22 = \"1\"\n");
        assert_eq!((line, column), (5, 12));
        assert!(message.contains("unknown identifier"), "{message}");
    }

    #[test]
    fn structural_errors() {
        let base = "[chart]\ndimension = 2\ndomain = [0, 1]\n[metric]\ng11 = \"1\"\n";
        assert!(error_at(base).2.contains("missing diagonal component g22"));
        assert!(error_at(&format!("{base}g22 = \"1\"\ng13 = \"0\"\n"))
            .2
            .contains("not a component"));
        assert!(error_at("[chart]\ndimension = 3\ncoordinates = a, b\n")
            .2
            .contains("2 coordinates"));
        assert!(error_at("[chart]\ndimension = 2\n[metric]\ng11 = \"1\"\ng22 = \"1\"\n")
            .2
            .contains("no domain"));
        assert_eq!(error_at("dimension = 2\n").0, 1);
        assert!(error_at("[chart]\ndimension = 2\ndomain = [0, 1]\n[metric]\ng11 = 1\n")
            .2
            .contains("quoted"));
        assert!(
            error_at("[chart]\ndimension = 2\ndomain = [1, 0]\n[metric]\ng11 = \"1\"\ng22 = \"1\"\n")
                .2
                .contains("degenerate")
        );
    }

    #[test]
    fn manifest() {
        let text = "# pairs\nflat2.metric flat2.metric trivial_affine\n\nwarped2.metric  flat2.metric not_geodesic # control\n";
        let m = parse_manifest(text, Path::new("corpus"), "MANIFEST").unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[1].source, Path::new("corpus/warped2.metric"));
        assert_eq!(m[1].expected, Classification::NotGeodesic);
        assert_eq!(m[1].line, 4);
        assert!(parse_manifest("a b maybe\n", Path::new("."), "M").is_err());
    }
}
