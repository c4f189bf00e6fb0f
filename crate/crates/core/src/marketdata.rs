//! Discrete market history on a trading-day grid.
//!
//! A [`MarketPath`] stores, for every day `l` and asset `i`, the begin-of-day
//! market value, the daily total-return factor and a membership flag. Market
//! weights at the begin and end of each day are derived from these on demand.
//! Non-members carry the sentinel `mv = 0`, `tr = 1` and never enter a sum.
//!
//! The CSV format read and written here is
//! `date,asset_id,market_value,return_index,member` with ISO-8601 dates.
//! Return indexes are converted to daily factors at load time; the first
//! day (and the first day after an asset appears without a prior index
//! level) gets factor 1.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::{Datelike, Days, NaiveDate, Weekday};
use thiserror::Error;

use crate::num::{lit, to_f64, Scalar};

pub const CSV_HEADER: [&str; 5] = ["date", "asset_id", "market_value", "return_index", "member"];

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("invalid market data: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Market weights over all `d` assets; non-members hold weight 0.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector<T>(Vec<T>);

impl<T: Scalar> WeightVector<T> {
    /// Validates non-negativity, components in `[0, 1]` and unit sum.
    pub fn new(values: Vec<T>) -> Result<Self, MarketError> {
        if values.is_empty() {
            return Err(MarketError::Validation("empty weight vector".into()));
        }
        for (i, &w) in values.iter().enumerate() {
            if !w.is_finite() || w < T::zero() || w > T::one() {
                return Err(MarketError::Validation(format!("weight {i} = {w} outside [0, 1]")));
            }
        }
        let total: T = values.iter().copied().sum();
        if (total - T::one()).abs() > sum_tolerance::<T>(values.len()) {
            return Err(MarketError::Validation(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self(values))
    }

    /// Normalizes `values` over the entries where `mask` is set.
    pub fn from_values(values: &[T], mask: &[bool]) -> Self {
        let total: T = values
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
            .sum();
        Self(
            values
                .iter()
                .zip(mask)
                .map(|(&v, &m)| if m { v / total } else { T::zero() })
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> T {
        self.0.iter().copied().sum()
    }

    /// True when every component is strictly positive (open simplex).
    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&w| w > T::zero())
    }
}

impl<T> std::ops::Index<usize> for WeightVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

pub(crate) fn sum_tolerance<T: Scalar>(d: usize) -> T {
    let floor: T = lit(1e-12);
    floor.max(T::epsilon() * lit(16.0 * d as f64))
}

/// Full discrete market history. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketPath<T> {
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
    mv_begin: Vec<T>,
    tr: Vec<T>,
    membership: Vec<bool>,
}

impl<T: Scalar> MarketPath<T> {
    /// Builds and validates a path from row-per-day matrices.
    pub fn new(
        dates: Vec<NaiveDate>,
        assets: Vec<String>,
        mv_begin: Vec<Vec<T>>,
        tr: Vec<Vec<T>>,
        membership: Vec<Vec<bool>>,
    ) -> Result<Self, MarketError> {
        let n = dates.len();
        let d = assets.len();
        if n == 0 {
            return Err(MarketError::Validation("no trading days".into()));
        }
        if d < 2 {
            return Err(MarketError::Validation(format!("need at least 2 assets, got {d}")));
        }
        if mv_begin.len() != n || tr.len() != n || membership.len() != n {
            return Err(MarketError::Validation("matrix row counts differ from the date count".into()));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MarketError::Validation("dates are not strictly increasing".into()));
        }
        let mut seen = BTreeSet::new();
        for a in &assets {
            if !seen.insert(a.as_str()) {
                return Err(MarketError::Validation(format!("duplicate asset id {a}")));
            }
        }

        let mut flat_mv = Vec::with_capacity(n * d);
        let mut flat_tr = Vec::with_capacity(n * d);
        let mut flat_m = Vec::with_capacity(n * d);
        for l in 0..n {
            if mv_begin[l].len() != d || tr[l].len() != d || membership[l].len() != d {
                return Err(MarketError::Validation(format!("day {l}: row width differs from asset count {d}")));
            }
            let members = membership[l].iter().filter(|&&m| m).count();
            if members < 2 {
                return Err(MarketError::Validation(format!(
                    "day {l} ({}): {members} member assets, need at least 2",
                    dates[l]
                )));
            }
            for i in 0..d {
                if membership[l][i] {
                    let (mv, f) = (mv_begin[l][i], tr[l][i]);
                    if !(mv.is_finite() && mv > T::zero()) {
                        return Err(MarketError::Validation(format!(
                            "day {l}, asset {}: market value {mv} must be positive",
                            assets[i]
                        )));
                    }
                    if !(f.is_finite() && f > T::zero()) {
                        return Err(MarketError::Validation(format!(
                            "day {l}, asset {}: total-return factor {f} must be positive",
                            assets[i]
                        )));
                    }
                    if l == 0 && f != T::one() {
                        return Err(MarketError::Validation(format!(
                            "day 0, asset {}: total-return factor must be 1, got {f}",
                            assets[i]
                        )));
                    }
                    flat_mv.push(mv);
                    flat_tr.push(f);
                } else {
                    flat_mv.push(T::zero());
                    flat_tr.push(T::one());
                }
                flat_m.push(membership[l][i]);
            }
        }
        Ok(Self { dates, assets, mv_begin: flat_mv, tr: flat_tr, membership: flat_m })
    }

    /// Builds a path with weekday dates from 2000-01-03, generated asset ids
    /// `A01, A02, ...` and every asset a member on every day.
    pub fn synthetic(mv_begin: Vec<Vec<T>>, tr: Vec<Vec<T>>) -> Result<Self, MarketError> {
        let n = mv_begin.len();
        let d = mv_begin.first().map_or(0, Vec::len);
        Self::new(weekday_dates(n), asset_ids(d), mv_begin, tr, vec![vec![true; d]; n])
    }

    /// Like [`MarketPath::synthetic`] with an explicit membership matrix.
    pub fn synthetic_with_membership(
        mv_begin: Vec<Vec<T>>,
        tr: Vec<Vec<T>>,
        membership: Vec<Vec<bool>>,
    ) -> Result<Self, MarketError> {
        let n = mv_begin.len();
        let d = mv_begin.first().map_or(0, Vec::len);
        Self::new(weekday_dates(n), asset_ids(d), mv_begin, tr, membership)
    }

    pub fn n_days(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    fn row<'a, U>(&self, data: &'a [U], l: usize) -> &'a [U] {
        let d = self.n_assets();
        &data[l * d..(l + 1) * d]
    }

    pub fn mv_begin(&self, l: usize) -> &[T] {
        self.row(&self.mv_begin, l)
    }

    pub fn tr(&self, l: usize) -> &[T] {
        self.row(&self.tr, l)
    }

    pub fn membership(&self, l: usize) -> &[bool] {
        self.row(&self.membership, l)
    }

    pub fn is_member(&self, l: usize, i: usize) -> bool {
        self.membership(l)[i]
    }

    /// Indices of member assets on day `l`, ascending.
    pub fn members(&self, l: usize) -> Vec<usize> {
        self.membership(l)
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    /// True when day `l > 0` has a different member set than day `l - 1`.
    pub fn membership_changed(&self, l: usize) -> bool {
        l > 0 && self.membership(l) != self.membership(l - 1)
    }

    /// Total begin-of-day capitalization Σ(t̲_l) over members.
    pub fn total_begin(&self, l: usize) -> T {
        self.mv_begin(l)
            .iter()
            .zip(self.membership(l))
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
            .sum()
    }

    /// End-of-day implied market values `MV(t̄_l) = MV(t̲_l)·TR(t_l)`.
    pub fn mv_end(&self, l: usize) -> Vec<T> {
        self.mv_begin(l)
            .iter()
            .zip(self.tr(l))
            .zip(self.membership(l))
            .map(|((&v, &f), &m)| if m { v * f } else { T::zero() })
            .collect()
    }

    /// Total end-of-day capitalization Σ(t̄_l) over members.
    pub fn total_end(&self, l: usize) -> T {
        self.mv_end(l).into_iter().sum()
    }

    pub fn begin_weights(&self, l: usize) -> WeightVector<T> {
        WeightVector::from_values(self.mv_begin(l), self.membership(l))
    }

    /// End-of-day market values and weights, normalized like the begin weights.
    pub fn end_of_day(&self, l: usize) -> (Vec<T>, WeightVector<T>) {
        let mv = self.mv_end(l);
        let w = WeightVector::from_values(&mv, self.membership(l));
        (mv, w)
    }

    /// True when day `l`'s begin values equal day `l - 1`'s end values
    /// exactly. Day 0 and membership-change days report `false`.
    pub fn overnight_invariant(&self, l: usize) -> bool {
        l > 0 && !self.membership_changed(l) && self.mv_end(l - 1) == self.mv_begin(l)
    }

    /// Converts the path to another scalar type.
    pub fn cast<U: Scalar>(&self) -> MarketPath<U> {
        let conv = |v: &T| U::from_f64(to_f64(*v)).expect("finite value");
        MarketPath {
            dates: self.dates.clone(),
            assets: self.assets.clone(),
            mv_begin: self.mv_begin.iter().map(conv).collect(),
            tr: self.tr.iter().map(conv).collect(),
            membership: self.membership.clone(),
        }
    }
}

/// `n` weekdays starting on Monday 2000-01-03.
pub fn weekday_dates(n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut day = NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date");
    while out.len() < n {
        if !matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(day);
        }
        day = day.checked_add_days(Days::new(1)).expect("date overflow");
    }
    out
}

/// Asset identifiers `A01 .. Add`.
pub fn asset_ids(d: usize) -> Vec<String> {
    let width = d.to_string().len().max(2);
    (1..=d).map(|i| format!("A{i:0width$}")).collect()
}

/// Reads the market CSV at `path`.
pub fn load_market_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<MarketPath<T>, MarketError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| MarketError::Io { path: path.to_path_buf(), source })?;
    read_market_csv(file)
}

struct Row {
    line: u64,
    member: bool,
    market_value: Option<f64>,
    return_index: Option<f64>,
}

fn parse_optional(field: &str, name: &str, line: u64) -> Result<Option<f64>, MarketError> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse::<f64>()
        .map(Some)
        .map_err(|e| MarketError::Parse { line, message: format!("{name} {field:?}: {e}") })
}

/// Reads the market CSV format from any reader.
pub fn read_market_csv<T: Scalar, R: Read>(reader: R) -> Result<MarketPath<T>, MarketError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(MarketError::Parse {
            line: 1,
            message: format!("expected header {:?}, found {:?}", CSV_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut asset_order: Vec<String> = Vec::new();
    let mut asset_index: HashMap<String, usize> = HashMap::new();
    let mut rows: HashMap<(NaiveDate, usize), Row> = HashMap::new();
    let mut all_dates = BTreeSet::new();

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != CSV_HEADER.len() {
            return Err(MarketError::Parse {
                line,
                message: format!("expected {} fields, found {}", CSV_HEADER.len(), record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| MarketError::Parse { line, message: format!("date {:?}: {e}", &record[0]) })?;
        let asset = record[1].to_string();
        if asset.is_empty() {
            return Err(MarketError::Parse { line, message: "empty asset_id".into() });
        }
        let member = match record[4].to_ascii_lowercase().as_str() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(MarketError::Parse { line, message: format!("member flag {other:?} is not 0/1/true/false") })
            }
        };
        let market_value = parse_optional(&record[2], "market_value", line)?;
        let return_index = parse_optional(&record[3], "return_index", line)?;
        if member {
            match market_value {
                Some(v) if v.is_finite() && v > 0.0 => {}
                other => {
                    return Err(MarketError::Validation(format!(
                        "line {line}: member {asset} on {date} has non-positive market_value {other:?}"
                    )))
                }
            }
            match return_index {
                Some(v) if v.is_finite() && v > 0.0 => {}
                other => {
                    return Err(MarketError::Validation(format!(
                        "line {line}: member {asset} on {date} has non-positive return_index {other:?}"
                    )))
                }
            }
        }

        let idx = *asset_index.entry(asset.clone()).or_insert_with(|| {
            asset_order.push(asset.clone());
            asset_order.len() - 1
        });
        all_dates.insert(date);
        let row = Row { line, member, market_value, return_index };
        if let Some(prev) = rows.insert((date, idx), row) {
            return Err(MarketError::Parse {
                line,
                message: format!("duplicate row for {asset} on {date} (first seen on line {})", prev.line),
            });
        }
    }

    let dates: Vec<NaiveDate> = all_dates.into_iter().collect();
    let (n, d) = (dates.len(), asset_order.len());

    // Each asset must be listed on every date between its first and last row.
    for (i, asset) in asset_order.iter().enumerate() {
        let listed: Vec<usize> = (0..n).filter(|&l| rows.contains_key(&(dates[l], i))).collect();
        if let (Some(&first), Some(&last)) = (listed.first(), listed.last()) {
            if let Some(gap) = (first..=last).find(|&l| !rows.contains_key(&(dates[l], i))) {
                return Err(MarketError::Validation(format!(
                    "asset {asset} has no row on {} (missing day between {} and {})",
                    dates[gap], dates[first], dates[last]
                )));
            }
        }
    }

    let mut mv = vec![vec![T::zero(); d]; n];
    let mut tr = vec![vec![T::one(); d]; n];
    let mut membership = vec![vec![false; d]; n];
    for l in 0..n {
        for i in 0..d {
            let Some(row) = rows.get(&(dates[l], i)) else { continue };
            if !row.member {
                continue;
            }
            membership[l][i] = true;
            mv[l][i] = lit(row.market_value.expect("validated"));
            let ri = row.return_index.expect("validated");
            if l > 0 {
                if let Some(prev) = rows.get(&(dates[l - 1], i)).and_then(|r| r.return_index) {
                    if prev > 0.0 {
                        tr[l][i] = lit(ri / prev);
                    }
                }
            }
        }
    }
    MarketPath::new(dates, asset_order, mv, tr, membership)
}

/// Writes `path` in the market CSV format. Return indexes start at 1 and
/// compound the stored factors; non-member rows carry the index level but no
/// market value.
pub fn write_market_csv<T: Scalar>(path: impl AsRef<Path>, market: &MarketPath<T>) -> Result<(), MarketError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| MarketError::Io { path: path.to_path_buf(), source })?;
    write_market_csv_to(file, market)
}

pub fn write_market_csv_to<T: Scalar, W: Write>(writer: W, market: &MarketPath<T>) -> Result<(), MarketError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(CSV_HEADER)?;
    let d = market.n_assets();
    let mut level: Vec<Option<f64>> = vec![None; d];
    for l in 0..market.n_days() {
        let date = market.dates()[l].format("%Y-%m-%d").to_string();
        for i in 0..d {
            let asset = &market.assets()[i];
            if market.is_member(l, i) {
                let ri = match level[i] {
                    Some(prev) => prev * to_f64(market.tr(l)[i]),
                    None => 1.0,
                };
                level[i] = Some(ri);
                let mv = to_f64(market.mv_begin(l)[i]);
                wtr.write_record([date.as_str(), asset, &mv.to_string(), &ri.to_string(), "1"])?;
            } else {
                let ri = level[i].map(|v| v.to_string()).unwrap_or_default();
                wtr.write_record([date.as_str(), asset, "", &ri, "0"])?;
            }
        }
    }
    wtr.flush().map_err(|source| MarketError::Io { path: PathBuf::from("<writer>"), source })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_from(mv: Vec<Vec<f64>>, tr: Vec<Vec<f64>>) -> MarketPath<f64> {
        MarketPath::synthetic(mv, tr).unwrap()
    }

    #[test]
    fn begin_weights_direct_ratio() {
        let m = path_from(vec![vec![3.0, 1.0]], vec![vec![1.0, 1.0]]);
        assert_eq!(m.begin_weights(0).as_slice(), &[0.75, 0.25]);
        let m = path_from(vec![vec![1.0, 1.0, 2.0]], vec![vec![1.0; 3]]);
        assert_eq!(m.begin_weights(0).as_slice(), &[0.25, 0.25, 0.5]);
    }

    #[test]
    fn begin_weights_exclude_non_members() {
        let m = MarketPath::synthetic_with_membership(
            vec![vec![2.0, 2.0, 2.0]],
            vec![vec![1.0; 3]],
            vec![vec![true, true, false]],
        )
        .unwrap();
        assert_eq!(m.begin_weights(0).as_slice(), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn end_of_day_applies_total_return() {
        let m = path_from(vec![vec![1.0, 1.0], vec![1.0, 1.0]], vec![vec![1.0, 1.0], vec![1.1, 0.9]]);
        let (mv, w) = m.end_of_day(1);
        assert_eq!(mv, vec![1.1, 0.9]);
        assert!((w[0] - 0.55).abs() < 1e-15 && (w[1] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn end_of_day_no_move_and_common_factor() {
        let m = path_from(
            vec![vec![3.0, 1.0], vec![3.0, 1.0], vec![3.0, 1.0]],
            vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![2.0, 2.0]],
        );
        assert_eq!(m.end_of_day(1).1, m.begin_weights(1));
        assert_eq!(m.end_of_day(2).1, m.begin_weights(2));
    }

    #[test]
    fn rejects_invalid_paths() {
        assert!(MarketPath::<f64>::synthetic(vec![vec![1.0, 0.0]], vec![vec![1.0, 1.0]]).is_err());
        assert!(MarketPath::<f64>::synthetic(vec![vec![1.0]], vec![vec![1.0]]).is_err());
        // day-0 factor must be 1
        assert!(MarketPath::<f64>::synthetic(vec![vec![1.0, 1.0]], vec![vec![1.1, 1.0]]).is_err());
        // fewer than two members
        assert!(MarketPath::<f64>::synthetic_with_membership(
            vec![vec![1.0, 1.0, 1.0]],
            vec![vec![1.0; 3]],
            vec![vec![true, false, false]]
        )
        .is_err());
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![0.5, 0.5]).is_ok());
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![-0.1, 1.1]).is_err());
        assert!(!WeightVector::new(vec![1.0, 0.0]).unwrap().is_interior());
    }

    #[test]
    fn csv_constant_path() {
        let text = "date,asset_id,market_value,return_index,member\n\
            2020-01-01,X,5,100,1\n2020-01-01,Y,5,100,1\n\
            2020-01-02,X,5,100,1\n2020-01-02,Y,5,100,1\n\
            2020-01-03,X,5,100,1\n2020-01-03,Y,5,100,1\n";
        let m: MarketPath<f64> = read_market_csv(text.as_bytes()).unwrap();
        assert_eq!((m.n_days(), m.n_assets()), (3, 2));
        for l in 0..3 {
            assert_eq!(m.tr(l), &[1.0, 1.0]);
        }
    }

    #[test]
    fn csv_return_index_becomes_factor() {
        let text = "date,asset_id,market_value,return_index,member\n\
            2020-01-01,X,5,100,1\n2020-01-01,Y,5,50,1\n\
            2020-01-02,X,5,110,1\n2020-01-02,Y,5,45,1\n";
        let m: MarketPath<f64> = read_market_csv(text.as_bytes()).unwrap();
        assert_eq!(m.tr(0), &[1.0, 1.0]);
        assert!((m.tr(1)[0] - 1.1).abs() < 1e-15 && (m.tr(1)[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn csv_errors_carry_context() {
        let bad_number = "date,asset_id,market_value,return_index,member\n2020-01-01,X,abc,1,1\n";
        match read_market_csv::<f64, _>(bad_number.as_bytes()) {
            Err(MarketError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let zero = "date,asset_id,market_value,return_index,member\n2020-01-01,X,0,1,1\n2020-01-01,Y,1,1,1\n";
        assert!(matches!(read_market_csv::<f64, _>(zero.as_bytes()), Err(MarketError::Validation(_))));
        let gap = "date,asset_id,market_value,return_index,member\n\
            2020-01-01,X,1,1,1\n2020-01-01,Y,1,1,1\n2020-01-01,Z,1,1,1\n\
            2020-01-02,X,1,1,1\n2020-01-02,Y,1,1,1\n\
            2020-01-03,X,1,1,1\n2020-01-03,Y,1,1,1\n2020-01-03,Z,1,1,1\n";
        assert!(matches!(read_market_csv::<f64, _>(gap.as_bytes()), Err(MarketError::Validation(_))));
        let header = "day,asset,mv,ri,member\n";
        assert!(matches!(read_market_csv::<f64, _>(header.as_bytes()), Err(MarketError::Parse { line: 1, .. })));
    }

    #[test]
    fn csv_non_member_row_excluded_from_totals() {
        let mut text = String::from("date,asset_id,market_value,return_index,member\n");
        for day in 1..=7 {
            let date = format!("2020-01-{day:02}");
            text += &format!("{date},X,2,1,1\n{date},Y,2,1,1\n");
            if day == 6 {
                text += &format!("{date},Z,,,0\n");
            } else {
                text += &format!("{date},Z,4,1,1\n");
            }
        }
        let m: MarketPath<f64> = read_market_csv(text.as_bytes()).unwrap();
        // day index 5 is 2020-01-06
        assert!(!m.is_member(5, 2));
        assert_eq!(m.total_begin(5), 4.0);
        assert_eq!(m.total_begin(4), 8.0);
        assert_eq!(m.begin_weights(5).as_slice(), &[0.5, 0.5, 0.0]);
        assert!(m.membership_changed(5) && m.membership_changed(6));
    }

    #[test]
    fn csv_round_trip() {
        let m = path_from(
            vec![vec![3.0, 1.0, 2.5], vec![3.3, 0.9, 2.5], vec![3.3, 0.99, 2.0]],
            vec![vec![1.0, 1.0, 1.0], vec![1.0, 1.1, 0.8], vec![1.25, 1.0, 1.0]],
        );
        let mut buf = Vec::new();
        write_market_csv_to(&mut buf, &m).unwrap();
        let back: MarketPath<f64> = read_market_csv(buf.as_slice()).unwrap();
        assert_eq!(back.assets(), m.assets());
        assert_eq!(back.dates(), m.dates());
        for l in 0..3 {
            assert_eq!(back.mv_begin(l), m.mv_begin(l));
            for i in 0..3 {
                assert!((back.tr(l)[i] - m.tr(l)[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn weekday_grid_skips_weekends() {
        let d = weekday_dates(6);
        assert_eq!(d[4].to_string(), "2000-01-07");
        assert_eq!(d[5].to_string(), "2000-01-10");
    }
}
