//! CSV tables, provenance headers and long-format plot data.

use std::fmt::Write as _;

/// A named output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// Numeric table with a header row.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn to_csv(&self, provenance: &str) -> String {
        let mut s = String::from(provenance);
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

/// One point of a plot series, optionally with a band.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
    pub ylo: Option<f64>,
    pub yhi: Option<f64>,
}

impl PlotPoint {
    pub fn new(series: impl Into<String>, x: f64, y: f64) -> Self {
        Self {
            series: series.into(),
            x,
            y,
            ylo: None,
            yhi: None,
        }
    }

    pub fn band(mut self, lo: f64, hi: f64) -> Self {
        self.ylo = Some(lo);
        self.yhi = Some(hi);
        self
    }
}

/// Long-format `series,x,y,ylo,yhi`; missing bands are empty cells.
pub fn emit_plotdata(points: &[PlotPoint], provenance: &str) -> String {
    let mut s = String::from(provenance);
    s.push_str("series,x,y,ylo,yhi\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for p in points {
        let _ = writeln!(s, "{},{},{},{},{}", p.series, p.x, p.y, opt(p.ylo), opt(p.yhi));
    }
    s
}

/// `# key: value` lines.
pub fn provenance(entries: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in entries {
        for line in v.lines() {
            let _ = writeln!(s, "# {k}: {line}");
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_plot_is_header_only() {
        assert_eq!(emit_plotdata(&[], ""), "series,x,y,ylo,yhi\n");
    }

    #[test]
    fn bands_and_blanks() {
        let pts = [
            PlotPoint::new("a", 1.0, 2.0),
            PlotPoint::new("b", 0.5, -1.0).band(-2.0, 0.0),
        ];
        assert_eq!(
            emit_plotdata(&pts, "# x: y\n"),
            "# x: y\nseries,x,y,ylo,yhi\na,1,2,,\nb,0.5,-1,-2,0\n"
        );
    }

    #[test]
    fn table_csv() {
        let mut t = Table::new(&["t", "v"]);
        t.push(vec![0.0, f64::NEG_INFINITY]);
        assert_eq!(t.to_csv(""), "t,v\n0,-inf\n");
        assert_eq!(t.column("v"), Some(vec![f64::NEG_INFINITY]));
    }
}
