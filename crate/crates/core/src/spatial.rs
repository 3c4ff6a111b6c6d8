//! Areal grids, static labels and spatio-temporal traces.
//!
//! Location ids are row-major starting at the south-west corner of the grid:
//! id = row * cols + col, with row 0 the southern-most row.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const UNREACHABLE: u32 = u32::MAX;

/// An areal grid with a symmetric adjacency structure.
#[derive(Debug)]
pub struct SpatialGrid {
    n_rows: usize,
    n_cols: usize,
    neighbors: Vec<Vec<usize>>,
    hops: OnceLock<Vec<u32>>,
}

impl Clone for SpatialGrid {
    fn clone(&self) -> Self {
        SpatialGrid {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            neighbors: self.neighbors.clone(),
            hops: OnceLock::new(),
        }
    }
}

impl PartialEq for SpatialGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n_rows == other.n_rows
            && self.n_cols == other.n_cols
            && self.neighbors == other.neighbors
    }
}

impl SpatialGrid {
    /// Queen contiguity: cells sharing an edge or a vertex are adjacent.
    pub fn queen(n_rows: usize, n_cols: usize) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::invalid(format!(
                "grid dimensions must be positive, got {n_rows}x{n_cols}"
            )));
        }
        let mut neighbors = vec![Vec::new(); n_rows * n_cols];
        for r in 0..n_rows {
            for c in 0..n_cols {
                let id = r * n_cols + c;
                for dr in -1i64..=1 {
                    for dc in -1i64..=1 {
                        if dr == 0 && dc == 0 {
                            continue;
                        }
                        let (rr, cc) = (r as i64 + dr, c as i64 + dc);
                        if rr >= 0 && cc >= 0 && (rr as usize) < n_rows && (cc as usize) < n_cols {
                            neighbors[id].push(rr as usize * n_cols + cc as usize);
                        }
                    }
                }
                neighbors[id].sort_unstable();
            }
        }
        Ok(SpatialGrid {
            n_rows,
            n_cols,
            neighbors,
            hops: OnceLock::new(),
        })
    }

    /// Grid with an explicit undirected edge list. Self-loops are rejected and
    /// duplicate edges collapse.
    pub fn from_edges(n_rows: usize, n_cols: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::invalid(format!(
                "grid dimensions must be positive, got {n_rows}x{n_cols}"
            )));
        }
        let n = n_rows * n_cols;
        let mut sets = vec![BTreeSet::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::invalid(format!("edge ({a},{b}) out of range for {n} locations")));
            }
            if a == b {
                return Err(Error::invalid(format!("self-loop at location {a}")));
            }
            sets[a].insert(b);
            sets[b].insert(a);
        }
        Ok(SpatialGrid {
            n_rows,
            n_cols,
            neighbors: sets.into_iter().map(|s| s.into_iter().collect()).collect(),
            hops: OnceLock::new(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_locations(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// (row, col) of a location id.
    pub fn cell(&self, id: usize) -> (usize, usize) {
        (id / self.n_cols, id % self.n_cols)
    }

    pub fn id(&self, row: usize, col: usize) -> usize {
        row * self.n_cols + col
    }

    /// Dense 0/1 adjacency matrix, row-major.
    pub fn adjacency_matrix(&self) -> Vec<f64> {
        let n = self.n_locations();
        let mut w = vec![0.0; n * n];
        for (i, nb) in self.neighbors.iter().enumerate() {
            for &j in nb {
                w[i * n + j] = 1.0;
            }
        }
        w
    }

    fn check_id(&self, i: usize) -> Result<()> {
        if i >= self.n_locations() {
            return Err(Error::invalid(format!(
                "location {i} out of range for {} locations",
                self.n_locations()
            )));
        }
        Ok(())
    }

    fn hop_table(&self) -> &[u32] {
        self.hops.get_or_init(|| {
            let n = self.n_locations();
            let mut table = vec![UNREACHABLE; n * n];
            let mut queue = VecDeque::new();
            for src in 0..n {
                let row = &mut table[src * n..(src + 1) * n];
                row[src] = 0;
                queue.push_back(src);
                while let Some(u) = queue.pop_front() {
                    let du = row[u];
                    for &v in &self.neighbors[u] {
                        if row[v] == UNREACHABLE {
                            row[v] = du + 1;
                            queue.push_back(v);
                        }
                    }
                }
            }
            table
        })
    }

    /// Shortest-path hop count; `None` when `j` is unreachable from `i`.
    pub fn hop_distance(&self, i: usize, j: usize) -> Result<Option<usize>> {
        self.check_id(i)?;
        self.check_id(j)?;
        Ok(self.hop_unchecked(i, j))
    }

    pub(crate) fn hop_unchecked(&self, i: usize, j: usize) -> Option<usize> {
        let d = self.hop_table()[i * self.n_locations() + j];
        (d != UNREACHABLE).then_some(d as usize)
    }

    /// Extracts the sub-grid with rows `row0..row0+rows` and columns `col0..col0+cols`
    /// under queen contiguity. Returns the sub-grid and, for each new id, the original id.
    pub fn queen_subgrid(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Result<(SpatialGrid, Vec<usize>)> {
        if row0 + rows > self.n_rows || col0 + cols > self.n_cols {
            return Err(Error::invalid(format!(
                "selection {rows}x{cols} at ({row0},{col0}) exceeds {}x{} grid",
                self.n_rows, self.n_cols
            )));
        }
        let sub = SpatialGrid::queen(rows, cols)?;
        let map = (0..rows * cols)
            .map(|k| self.id(row0 + k / cols, col0 + k % cols))
            .collect();
        Ok((sub, map))
    }
}

/// Static location labels, e.g. `hospital`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StaticLabels {
    labels: BTreeMap<String, BTreeSet<usize>>,
}

impl StaticLabels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, ids: impl IntoIterator<Item = usize>) {
        self.labels.entry(name.to_string()).or_default().extend(ids);
    }

    pub fn contains_label(&self, name: &str) -> bool {
        self.labels.contains_key(name)
    }

    pub fn has(&self, name: &str, id: usize) -> bool {
        self.labels.get(name).is_some_and(|s| s.contains(&id))
    }

    pub fn ids(&self, name: &str) -> impl Iterator<Item = usize> + '_ {
        self.labels.get(name).into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    pub fn validate(&self, n_locations: usize) -> Result<()> {
        for (name, ids) in &self.labels {
            if let Some(&bad) = ids.iter().find(|&&id| id >= n_locations) {
                return Err(Error::invalid(format!(
                    "label `{name}` references location {bad} outside [0, {n_locations})"
                )));
            }
        }
        Ok(())
    }

    /// Re-indexes labels onto a sub-grid given the new-to-old id map.
    pub fn restrict(&self, map: &[usize]) -> StaticLabels {
        let mut out = StaticLabels::new();
        for (name, ids) in &self.labels {
            let new: Vec<usize> = map
                .iter()
                .enumerate()
                .filter(|(_, old)| ids.contains(old))
                .map(|(k, _)| k)
                .collect();
            out.insert(name, new);
        }
        out
    }
}

/// Real-valued field over locations and the time steps `0..=horizon`.
/// Index 0 is the forecast origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    n_locations: usize,
    n_times: usize,
    values: Vec<f64>,
}

impl Trace {
    /// `values` is location-major: `values[i * n_times + t]`.
    pub fn new(n_locations: usize, n_times: usize, values: Vec<f64>) -> Result<Self> {
        if n_locations == 0 || n_times == 0 {
            return Err(Error::invalid("trace must have at least one location and one time"));
        }
        if values.len() != n_locations * n_times {
            return Err(Error::DimensionMismatch(format!(
                "trace of {n_locations}x{n_times} needs {} values, got {}",
                n_locations * n_times,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "non-finite value at location {}, time {}",
                k / n_times,
                k % n_times
            )));
        }
        Ok(Trace {
            n_locations,
            n_times,
            values,
        })
    }

    pub fn from_fn(n_locations: usize, n_times: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(n_locations * n_times);
        for i in 0..n_locations {
            for t in 0..n_times {
                values.push(f(i, t));
            }
        }
        Trace::new(n_locations, n_times, values)
    }

    pub fn n_locations(&self) -> usize {
        self.n_locations
    }

    /// Number of steps after the origin.
    pub fn horizon(&self) -> usize {
        self.n_times - 1
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.values[i * self.n_times + t]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn location(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_times..(i + 1) * self.n_times]
    }

    /// Values at one time step across locations.
    pub fn at_time(&self, t: usize) -> Vec<f64> {
        (0..self.n_locations).map(|i| self.get(i, t)).collect()
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let cells = read_long_csv(reader)?;
        let (n_loc, t0, n_times, values) = densify(&cells)?;
        if t0 != 0 {
            return Err(Error::data(format!("trace time_index must start at 0, starts at {t0}")));
        }
        Trace::new(n_loc, n_times, values)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Trace::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_long_csv(writer, self.n_locations, self.n_times, 0, &self.values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Observed series over locations and consecutive absolute time indices
/// `start..start + n_times`.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    n_locations: usize,
    n_times: usize,
    start: usize,
    values: Vec<f64>,
}

impl Panel {
    /// `values` is location-major: `values[i * n_times + t]`.
    pub fn new(n_locations: usize, n_times: usize, start: usize, values: Vec<f64>) -> Result<Self> {
        if n_locations == 0 || n_times == 0 {
            return Err(Error::invalid("panel must have at least one location and one time"));
        }
        if values.len() != n_locations * n_times {
            return Err(Error::DimensionMismatch(format!(
                "panel of {n_locations}x{n_times} needs {} values, got {}",
                n_locations * n_times,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "non-finite value at location {}, time {}",
                k / n_times,
                start + k % n_times
            )));
        }
        Ok(Panel {
            n_locations,
            n_times,
            start,
            values,
        })
    }

    pub fn n_locations(&self) -> usize {
        self.n_locations
    }

    pub fn n_times(&self) -> usize {
        self.n_times
    }

    /// Absolute time index of the first column.
    pub fn start(&self) -> usize {
        self.start
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at location `i` and relative time `t`.
    pub fn get(&self, i: usize, t: usize) -> f64 {
        self.values[i * self.n_times + t]
    }

    pub fn series(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_times..(i + 1) * self.n_times]
    }

    pub fn column(&self, t: usize) -> Vec<f64> {
        (0..self.n_locations).map(|i| self.get(i, t)).collect()
    }

    /// Sub-panel of relative times `from..from + len`.
    pub fn window(&self, from: usize, len: usize) -> Result<Panel> {
        if len == 0 || from + len > self.n_times {
            return Err(Error::invalid(format!(
                "window {from}..{} outside panel of {} times",
                from + len,
                self.n_times
            )));
        }
        let mut values = Vec::with_capacity(self.n_locations * len);
        for i in 0..self.n_locations {
            values.extend_from_slice(&self.series(i)[from..from + len]);
        }
        Panel::new(self.n_locations, len, self.start + from, values)
    }

    /// Trace anchored at relative time `origin` covering `horizon` further steps.
    pub fn trace_from(&self, origin: usize, horizon: usize) -> Result<Trace> {
        let w = self.window(origin, horizon + 1)?;
        Trace::new(w.n_locations, w.n_times, w.values)
    }

    /// Rejects nonpositive entries, naming the first offender.
    pub fn ensure_positive(&self) -> Result<()> {
        match self.values.iter().position(|&v| v <= 0.0) {
            None => Ok(()),
            Some(k) => Err(Error::data(format!(
                "nonpositive value {} at location {}, time {}",
                self.values[k],
                k / self.n_times,
                self.start + k % self.n_times
            ))),
        }
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let cells = read_long_csv(reader)?;
        let (n_loc, t0, n_times, values) = densify(&cells)?;
        Panel::new(n_loc, n_times, t0, values)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Panel::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_long_csv(writer, self.n_locations, self.n_times, self.start, &self.values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

#[derive(Deserialize)]
struct LongRow {
    location_id: usize,
    time_index: usize,
    value: f64,
}

fn read_long_csv<R: Read>(reader: R) -> Result<Vec<LongRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let expected = ["location_id", "time_index", "value"];
    if headers.iter().map(str::trim).collect::<Vec<_>>() != expected {
        return Err(Error::data(format!(
            "expected header `location_id,time_index,value`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec?);
    }
    if rows.is_empty() {
        return Err(Error::data("no rows"));
    }
    Ok(rows)
}

/// Turns long-format rows into a dense location-major block; every
/// (location, time) cell in the bounding box must appear exactly once.
fn densify(rows: &[LongRow]) -> Result<(usize, usize, usize, Vec<f64>)> {
    let n_loc = rows.iter().map(|r| r.location_id).max().unwrap_or(0) + 1;
    let t0 = rows.iter().map(|r| r.time_index).min().unwrap_or(0);
    let t1 = rows.iter().map(|r| r.time_index).max().unwrap_or(0);
    let n_times = t1 - t0 + 1;
    let mut values = vec![f64::NAN; n_loc * n_times];
    let mut seen = vec![false; n_loc * n_times];
    for r in rows {
        let k = r.location_id * n_times + (r.time_index - t0);
        if seen[k] {
            return Err(Error::data(format!(
                "duplicate cell: location {}, time {}",
                r.location_id, r.time_index
            )));
        }
        seen[k] = true;
        values[k] = r.value;
    }
    if let Some(k) = seen.iter().position(|s| !s) {
        let missing = seen.iter().filter(|s| !**s).count();
        return Err(Error::data(format!(
            "{missing} missing cells, first at location {}, time {}",
            k / n_times,
            t0 + k % n_times
        )));
    }
    Ok((n_loc, t0, n_times, values))
}

fn write_long_csv<W: Write>(writer: W, n_loc: usize, n_times: usize, start: usize, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["location_id", "time_index", "value"])?;
    for i in 0..n_loc {
        for t in 0..n_times {
            w.write_record([i.to_string(), (start + t).to_string(), fmt_f64(values[i * n_times + t])])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Shortest round-trip representation; deterministic across runs.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Grid description file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    #[serde(default = "queen_str")]
    pub adjacency: AdjacencySpec,
    #[serde(default)]
    pub labels: BTreeMap<String, Vec<usize>>,
    /// First id used by raw data files for this grid (e.g. 1 for one-based cell ids).
    #[serde(default)]
    pub id_base: usize,
    #[serde(default = "id_order_str")]
    pub id_order: String,
}

fn queen_str() -> AdjacencySpec {
    AdjacencySpec::Named("queen".into())
}

fn id_order_str() -> String {
    "row-major-from-south-west".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AdjacencySpec {
    Named(String),
    Edges(Vec<(usize, usize)>),
}

impl GridSpec {
    pub fn queen(rows: usize, cols: usize) -> Self {
        GridSpec {
            rows,
            cols,
            adjacency: queen_str(),
            labels: BTreeMap::new(),
            id_base: 0,
            id_order: id_order_str(),
        }
    }

    pub fn build(&self) -> Result<(SpatialGrid, StaticLabels)> {
        let grid = match &self.adjacency {
            AdjacencySpec::Named(name) if name == "queen" => SpatialGrid::queen(self.rows, self.cols)?,
            AdjacencySpec::Named(other) => {
                return Err(Error::invalid(format!("unknown adjacency `{other}`, expected \"queen\" or an edge list")))
            }
            AdjacencySpec::Edges(edges) => SpatialGrid::from_edges(self.rows, self.cols, edges)?,
        };
        let mut labels = StaticLabels::new();
        for (name, ids) in &self.labels {
            labels.insert(name, ids.iter().copied());
        }
        labels.validate(grid.n_locations())?;
        Ok((grid, labels))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(std::fs::File::open(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }
}
