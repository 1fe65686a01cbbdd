//! Plain-text writers: CSV tables with `#` metadata lines, and OBJ meshes.

use std::fmt::Write as _;

/// Columnar table with metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        let headers: Vec<String> = headers.into_iter().map(Into::into).collect();
        let columns = vec![Vec::new(); headers.len()];
        Self { meta: Vec::new(), headers, columns }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        for (c, v) in self.columns.iter_mut().zip(row) {
            c.push(*v);
        }
    }

    pub fn with_column(mut self, header: &str, values: Vec<f64>) -> Self {
        self.headers.push(header.to_string());
        self.columns.push(values);
        self
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out.push_str(&self.headers.join(","));
        out.push('\n');
        for i in 0..self.rows() {
            let line: Vec<String> = self.columns.iter().map(|c| format_number(c[i])).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

/// 17 significant digits, round-trip exact.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Triangle mesh.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub normals: Vec<[f64; 3]>,
    /// Zero-based vertex indices.
    pub triangles: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn to_obj(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            let _ = writeln!(out, "# {c}");
        }
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", format_number(v[0]), format_number(v[1]), format_number(v[2]));
        }
        for n in &self.normals {
            let _ = writeln!(out, "vn {} {} {}", format_number(n[0]), format_number(n[1]), format_number(n[2]));
        }
        let with_normals = self.normals.len() == self.vertices.len();
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| i + 1);
            if with_normals {
                let _ = writeln!(out, "f {a}//{a} {b}//{b} {c}//{c}");
            } else {
                let _ = writeln!(out, "f {a} {b} {c}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_values() {
        let mut t = Table::new(["R", "p"]).meta("example", "annulus-iso");
        t.push_row(&[1.0, 0.1 + 0.2]);
        let csv = t.to_csv();
        assert!(csv.starts_with("# example: annulus-iso\nR,p\n"));
        let last = csv.lines().last().unwrap();
        let v: f64 = last.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(v, 0.1 + 0.2);
    }

    #[test]
    fn obj_is_one_based() {
        let m = Mesh {
            vertices: vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            normals: vec![],
            triangles: vec![[0, 1, 2]],
        };
        assert!(m.to_obj(&[]).ends_with("f 1 2 3\n"));
    }
}
