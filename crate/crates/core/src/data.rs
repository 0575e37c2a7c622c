//! Binary response matrices: representation, file formats, and synthetic
//! generation under the random-assignment Rasch model.

use std::io::{Read, Write};
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sentinel used for missing responses in the dense integer format.
pub const INVALID_RESPONSE: i64 = -99999;

/// Child stream reserved for drawing user parameters in synthetic trials.
pub(crate) const THETA_STREAM: u64 = u64::MAX;

/// One cell of a response matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Zero,
    One,
    Missing,
}

impl Cell {
    #[inline]
    pub fn is_assigned(self) -> bool {
        self != Cell::Missing
    }

    /// `Some(true)` for a positive response, `None` when missing.
    #[inline]
    pub fn response(self) -> Option<bool> {
        match self {
            Cell::Zero => Some(false),
            Cell::One => Some(true),
            Cell::Missing => None,
        }
    }
}

impl From<Option<bool>> for Cell {
    fn from(v: Option<bool>) -> Self {
        match v {
            Some(true) => Cell::One,
            Some(false) => Cell::Zero,
            None => Cell::Missing,
        }
    }
}

/// On-disk layout of a response matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResponseFormat {
    /// Header row of item ids, cells in {0, 1, NA}.
    Csv,
    /// No header, integer cells in {0, 1, -99999}.
    DenseSentinel,
}

impl FromStr for ResponseFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ResponseFormat::Csv),
            "dense-sentinel" => Ok(ResponseFormat::DenseSentinel),
            other => Err(Error::InvalidInput(format!(
                "unknown format {other:?} (expected csv or dense-sentinel)"
            ))),
        }
    }
}

/// An n x m matrix of binary responses with missing entries. Rows are users,
/// columns are items; an entry is assigned iff it is not missing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseMatrix {
    item_ids: Vec<String>,
    n_users: usize,
    cells: Vec<Cell>,
}

impl ResponseMatrix {
    /// Builds a matrix with generated item ids `item1..itemM`.
    pub fn new(n_users: usize, n_items: usize, cells: Vec<Cell>) -> Result<Self> {
        Self::with_item_ids(default_item_ids(n_items), n_users, cells)
    }

    pub fn with_item_ids(item_ids: Vec<String>, n_users: usize, cells: Vec<Cell>) -> Result<Self> {
        let n_items = item_ids.len();
        if n_users < 1 {
            return Err(Error::InvalidInput("response matrix needs at least one user".into()));
        }
        if n_items < 2 {
            return Err(Error::InvalidInput("response matrix needs at least two items".into()));
        }
        if cells.len() != n_users * n_items {
            return Err(Error::InvalidInput(format!(
                "expected {} cells for a {n_users}x{n_items} matrix, got {}",
                n_users * n_items,
                cells.len()
            )));
        }
        Ok(Self { item_ids, n_users, cells })
    }

    /// Convenience constructor from rows of optional responses.
    pub fn from_rows<R: AsRef<[Option<bool>]>>(rows: &[R]) -> Result<Self> {
        let n_items = rows.first().map_or(0, |r| r.as_ref().len());
        let mut cells = Vec::with_capacity(rows.len() * n_items);
        for (l, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_items {
                return Err(Error::InvalidInput(format!(
                    "row {l} has {} entries, expected {n_items}",
                    row.len()
                )));
            }
            cells.extend(row.iter().map(|&v| Cell::from(v)));
        }
        Self::new(rows.len(), n_items, cells)
    }

    #[inline]
    pub fn n_users(&self) -> usize {
        self.n_users
    }

    #[inline]
    pub fn n_items(&self) -> usize {
        self.item_ids.len()
    }

    pub fn item_ids(&self) -> &[String] {
        &self.item_ids
    }

    #[inline]
    pub fn get(&self, user: usize, item: usize) -> Cell {
        self.cells[user * self.n_items() + item]
    }

    #[inline]
    pub fn row(&self, user: usize) -> &[Cell] {
        let m = self.n_items();
        &self.cells[user * m..(user + 1) * m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Cell]> {
        self.cells.chunks_exact(self.n_items())
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    /// Fraction of assigned cells.
    pub fn observed_fraction(&self) -> f64 {
        let assigned = self.cells.iter().filter(|c| c.is_assigned()).count();
        assigned as f64 / self.cells.len() as f64
    }

    /// Matrix restricted to the given users, in the given order.
    pub fn select_users(&self, users: &[usize]) -> Result<Self> {
        let mut cells = Vec::with_capacity(users.len() * self.n_items());
        for &l in users {
            if l >= self.n_users {
                return Err(Error::InvalidInput(format!("user index {l} out of range")));
            }
            cells.extend_from_slice(self.row(l));
        }
        Self::with_item_ids(self.item_ids.clone(), users.len(), cells)
    }
}

fn default_item_ids(m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("item{i}")).collect()
}

/// Parses a response matrix from `source`.
pub fn load_responses<R: Read>(source: R, format: ResponseFormat) -> Result<ResponseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(format == ResponseFormat::Csv)
        .flexible(false)
        .from_reader(source);

    let mut item_ids = match format {
        ResponseFormat::Csv => {
            let header = reader.headers().map_err(csv_error)?;
            Some(header.iter().map(str::to_owned).collect::<Vec<_>>())
        }
        ResponseFormat::DenseSentinel => None,
    };

    let mut cells = Vec::new();
    let mut n_users = 0;
    let mut width = item_ids.as_ref().map(Vec::len);
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(e)),
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        match width {
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {w} fields, found {}", record.len()),
                })
            }
            None => width = Some(record.len()),
            _ => {}
        }
        for field in record.iter() {
            cells.push(parse_cell(field, format).ok_or_else(|| Error::Parse {
                line,
                message: format!("invalid response value {field:?}"),
            })?);
        }
        n_users += 1;
    }

    let m = width.unwrap_or(0);
    if m < 2 {
        return Err(Error::Parse { line: 1, message: format!("need at least 2 item columns, found {m}") });
    }
    if n_users == 0 {
        return Err(Error::Parse { line: 1, message: "no user rows".into() });
    }
    let ids = item_ids.take().unwrap_or_else(|| default_item_ids(m));
    ResponseMatrix::with_item_ids(ids, n_users, cells)
}

fn parse_cell(field: &str, format: ResponseFormat) -> Option<Cell> {
    match (field, format) {
        ("0", _) => Some(Cell::Zero),
        ("1", _) => Some(Cell::One),
        ("NA", ResponseFormat::Csv) => Some(Cell::Missing),
        ("-99999", ResponseFormat::DenseSentinel) => Some(Cell::Missing),
        _ => None,
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            line,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        other => Error::Parse { line, message: format!("{other:?}") },
    }
}

/// Writes `x` in the given format; `load_responses` reads it back unchanged.
pub fn save_responses<W: Write>(x: &ResponseMatrix, format: ResponseFormat, sink: W) -> Result<()> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    if format == ResponseFormat::Csv {
        writer.write_record(x.item_ids()).map_err(csv_error)?;
    }
    let missing = match format {
        ResponseFormat::Csv => "NA",
        ResponseFormat::DenseSentinel => "-99999",
    };
    for row in x.rows() {
        writer
            .write_record(row.iter().map(|c| match c {
                Cell::Zero => "0",
                Cell::One => "1",
                Cell::Missing => missing,
            }))
            .map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

/// Synthetic-model parameters: user abilities, item difficulties, and the
/// probability that a given (user, item) pair is observed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub theta: Vec<f64>,
    pub beta: Vec<f64>,
    pub p: f64,
}

impl GroundTruth {
    /// Validates the parameters; `beta` is re-centered to mean zero.
    pub fn new(theta: Vec<f64>, beta: Vec<f64>, p: f64) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidInput("ground truth needs at least one user".into()));
        }
        if beta.len() < 2 {
            return Err(Error::InvalidInput("ground truth needs at least two items".into()));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!("sampling probability {p} outside [0, 1]")));
        }
        if theta.iter().chain(&beta).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("ground truth parameters must be finite".into()));
        }
        let mean = beta.iter().sum::<f64>() / beta.len() as f64;
        let beta = beta.into_iter().map(|b| b - mean).collect();
        Ok(Self { theta, beta, p })
    }

    /// `m` item difficulties on a uniform grid over `[lo, hi]`, centered.
    pub fn uniform_grid(m: usize, lo: f64, hi: f64) -> Vec<f64> {
        if m == 1 {
            return vec![0.0];
        }
        let grid: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
        let mean = grid.iter().sum::<f64>() / m as f64;
        grid.into_iter().map(|b| b - mean).collect()
    }

    /// Abilities drawn iid uniform on `[-scale, scale]` from a dedicated
    /// stream of `seed`.
    pub fn uniform_theta(n: usize, scale: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(THETA_STREAM);
        (0..n).map(|_| rng.random_range(-scale..=scale)).collect()
    }

    pub fn n_users(&self) -> usize {
        self.theta.len()
    }

    pub fn n_items(&self) -> usize {
        self.beta.len()
    }

    /// Softmax of `beta`: the stationary distribution of the idealized chain.
    pub fn pi_star(&self) -> Vec<f64> {
        softmax(&self.beta)
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Rasch response for one cell: 1 iff `unit_uniform < sigmoid(theta - beta)`.
#[inline]
pub fn sample_rasch_response(theta: f64, beta: f64, unit_uniform: f64) -> bool {
    unit_uniform < sigmoid(theta - beta)
}

/// Draws a response matrix from the random-assignment Rasch model.
///
/// Every user `l` owns child stream `l` of a ChaCha8 generator keyed by
/// `seed`. Within that stream item `i` always consumes exactly two uniforms
/// (assignment, then response), so cell `(l, i)` is a fixed position of the
/// stream and the result does not depend on evaluation order.
pub fn generate_synthetic(truth: &GroundTruth, seed: u64) -> Result<ResponseMatrix> {
    let n = truth.n_users();
    let m = truth.n_items();
    let base = ChaCha8Rng::seed_from_u64(seed);
    let mut cells = Vec::with_capacity(n * m);
    for (l, &theta) in truth.theta.iter().enumerate() {
        let mut rng = base.clone();
        rng.set_stream(l as u64);
        for &beta in &truth.beta {
            let assign: f64 = rng.random();
            let response: f64 = rng.random();
            cells.push(if assign < truth.p {
                Cell::from(Some(sample_rasch_response(theta, beta, response)))
            } else {
                Cell::Missing
            });
        }
    }
    ResponseMatrix::new(n, m, cells)
}

/// Seeded random partition of users into (train, test), `train_fraction`
/// of users (rounded down, at least one on each side) going to train.
pub fn split_users(x: &ResponseMatrix, train_fraction: f64, seed: u64) -> Result<(ResponseMatrix, ResponseMatrix)> {
    if !(0.0..1.0).contains(&train_fraction) || x.n_users() < 2 {
        return Err(Error::InvalidInput(
            "split needs train_fraction in (0, 1) and at least two users".into(),
        ));
    }
    let mut order: Vec<usize> = (0..x.n_users()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((x.n_users() as f64 * train_fraction) as usize).clamp(1, x.n_users() - 1);
    let (train, test) = order.split_at(cut);
    Ok((x.select_users(train)?, x.select_users(test)?))
}

/// Co-assignment counts and concentration-event flags.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentDiagnostics {
    /// `b[[i, j]]` = number of users assigned both items, zero diagonal.
    pub b: Array2<u64>,
    pub per_item_counts: Vec<u64>,
    pub per_user_counts: Vec<u64>,
    /// Sampling probability the event checks were evaluated at.
    pub p_used: f64,
    /// All off-diagonal `B_ij` in `[n p^2 / 2, 3 n p^2 / 2]`.
    pub event_a_holds: bool,
    /// Event A plus all per-user counts in `[m p / 2, 3 m p / 2]`.
    pub event_a_plus_holds: bool,
}

/// Co-assignment matrix `B = A^T A` (diagonal zeroed) and event diagnostics.
/// Without `p_hint` the observed assignment fraction is used for the events.
pub fn assignment_stats(x: &ResponseMatrix, p_hint: Option<f64>) -> AssignmentDiagnostics {
    let n = x.n_users();
    let m = x.n_items();
    let mut b = Array2::<u64>::zeros((m, m));
    let mut per_item_counts = vec![0u64; m];
    let mut per_user_counts = vec![0u64; n];
    let mut assigned = Vec::with_capacity(m);
    {
        let b = b.as_slice_mut().expect("standard layout");
        for (l, row) in x.rows().enumerate() {
            assigned.clear();
            assigned.extend(row.iter().enumerate().filter(|(_, c)| c.is_assigned()).map(|(i, _)| i));
            per_user_counts[l] = assigned.len() as u64;
            for &i in &assigned {
                per_item_counts[i] += 1;
                for &j in &assigned {
                    b[i * m + j] += 1;
                }
            }
        }
        for i in 0..m {
            b[i * m + i] = 0;
        }
    }

    let p = p_hint.unwrap_or_else(|| x.observed_fraction());
    let (lo, hi) = (n as f64 * p * p / 2.0, 1.5 * n as f64 * p * p);
    let event_a_holds = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .filter(|(i, j)| i != j)
        .all(|(i, j)| (lo..=hi).contains(&(b[[i, j]] as f64)));
    let (ulo, uhi) = (m as f64 * p / 2.0, 1.5 * m as f64 * p);
    let event_a_plus_holds =
        event_a_holds && per_user_counts.iter().all(|&c| (ulo..=uhi).contains(&(c as f64)));

    AssignmentDiagnostics {
        b,
        per_item_counts,
        per_user_counts,
        p_used: p,
        event_a_holds,
        event_a_plus_holds,
    }
}
