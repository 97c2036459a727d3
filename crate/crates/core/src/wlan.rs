//! RSS fingerprint database and coarse WLAN positioning.
//!
//! A scan is compared to every surveyed fingerprint by an RMS difference
//! in dB; the `k` closest fingerprints vote for the position with weights
//! `1 / (distance + 1 dB)`. The answer is a disc, not a point: its radius
//! never drops below `radius_floor` (10 m by default) and grows with the
//! spread of the voters.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Accepted RSS range, dBm.
pub const RSS_MIN: f64 = -120.0;
pub const RSS_MAX: f64 = 0.0;

/// Fingerprints closer than this (meters) are merged on ingestion.
pub const MERGE_DISTANCE: f64 = 0.1;

/// Row numbers in errors are 1-based data rows; the CSV header is not
/// counted.
#[derive(Debug, Error, PartialEq)]
pub enum IngestError {
    #[error("no fingerprint rows")]
    Empty,
    #[error("row {row}: missing position")]
    MissingPosition { row: usize },
    #[error("row {row}: rss {rss} dBm outside [-120, 0]")]
    RssOutOfRange { row: usize, rss: f64 },
    #[error("row {row}: empty access point id")]
    MissingAp { row: usize },
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum ScanError {
    #[error("scan has no readings")]
    Empty,
    #[error("reading {ap}: rss {rss} dBm outside [-120, 0]")]
    RssOutOfRange { ap: String, rss: f64 },
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
}

#[derive(Debug, Error, PartialEq)]
pub enum WlanError {
    #[error("fingerprint database is empty")]
    EmptyDb,
    #[error("k must be at least 1")]
    ZeroK,
}

fn rss_ok(rss: f64) -> bool {
    (RSS_MIN..=RSS_MAX).contains(&rss)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fingerprint {
    /// (x, y) in floor-plan meters.
    pub position: [f64; 2],
    /// Mean RSS per access point id, dBm.
    pub readings: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RssScan {
    pub readings: BTreeMap<String, f64>,
    pub timestamp: Option<String>,
}

impl RssScan {
    pub fn new(readings: BTreeMap<String, f64>) -> Result<Self, ScanError> {
        if readings.is_empty() {
            return Err(ScanError::Empty);
        }
        if let Some((ap, &rss)) = readings.iter().find(|(_, &r)| !rss_ok(r)) {
            return Err(ScanError::RssOutOfRange { ap: ap.clone(), rss });
        }
        Ok(Self { readings, timestamp: None })
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Result<Self, ScanError> {
        Self::new(pairs.into_iter().map(|(a, r)| (a.into(), r)).collect())
    }
}

/// WLAN-derived search disc in floor-plan meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoarseEstimate {
    pub center: [f64; 2],
    pub radius: f64,
}

impl CoarseEstimate {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        (p[0] - self.center[0]).hypot(p[1] - self.center[1]) <= self.radius
    }
}

/// One survey reading as it appears in a fingerprint file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct FingerprintRow {
    pub x_m: Option<f64>,
    pub y_m: Option<f64>,
    pub ap_id: String,
    pub rss_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FingerprintDb {
    /// In order of first appearance.
    pub fingerprints: Vec<Fingerprint>,
    /// Rows ingested.
    pub rows: usize,
    /// Every access point id seen.
    pub aps: BTreeSet<String>,
}

type Sums = BTreeMap<String, (f64, usize)>;

/// Validates survey rows and merges those whose positions lie within
/// 0.1 m of an earlier fingerprint, averaging per access point.
pub fn ingest_fingerprints(rows: &[FingerprintRow]) -> Result<FingerprintDb, IngestError> {
    if rows.is_empty() {
        return Err(IngestError::Empty);
    }
    // position, per-AP (sum, count)
    let mut acc: Vec<([f64; 2], Sums)> = Vec::new();
    let mut aps = BTreeSet::new();
    for (i, r) in rows.iter().enumerate() {
        let row = i + 1;
        let (Some(x), Some(y)) = (r.x_m, r.y_m) else {
            return Err(IngestError::MissingPosition { row });
        };
        if !x.is_finite() || !y.is_finite() {
            return Err(IngestError::MissingPosition { row });
        }
        if !rss_ok(r.rss_dbm) {
            return Err(IngestError::RssOutOfRange { row, rss: r.rss_dbm });
        }
        let ap = r.ap_id.trim();
        if ap.is_empty() {
            return Err(IngestError::MissingAp { row });
        }
        let slot = match acc.iter().position(|(p, _)| (p[0] - x).hypot(p[1] - y) <= MERGE_DISTANCE) {
            Some(s) => s,
            None => {
                acc.push(([x, y], BTreeMap::new()));
                acc.len() - 1
            }
        };
        let e = acc[slot].1.entry(ap.to_string()).or_insert((0.0, 0));
        e.0 += r.rss_dbm;
        e.1 += 1;
        aps.insert(ap.to_string());
    }
    Ok(FingerprintDb {
        fingerprints: acc
            .into_iter()
            .map(|(position, sums)| Fingerprint {
                position,
                readings: sums.into_iter().map(|(ap, (s, n))| (ap, s / n as f64)).collect(),
            })
            .collect(),
        rows: rows.len(),
        aps,
    })
}

/// Reads a `x_m,y_m,ap_id,rss_dbm` CSV file.
pub fn read_fingerprints_csv<R: Read>(reader: R) -> Result<FingerprintDb, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<FingerprintRow>().enumerate() {
        rows.push(rec.map_err(|e| IngestError::Parse {
            row: i + 1,
            message: e.to_string(),
        })?);
    }
    ingest_fingerprints(&rows)
}

/// Writes fingerprints in the format [`read_fingerprints_csv`] accepts.
pub fn write_fingerprints_csv<W: std::io::Write>(fps: &[Fingerprint], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x_m", "y_m", "ap_id", "rss_dbm"])?;
    for fp in fps {
        for (ap, rss) in &fp.readings {
            w.write_record([fp.position[0].to_string(), fp.position[1].to_string(), ap.clone(), rss.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct ScanRow {
    ap_id: String,
    rss_dbm: f64,
}

/// Reads a `ap_id,rss_dbm` CSV scan. Repeated ids are averaged.
pub fn read_scan_csv<R: Read>(reader: R) -> Result<RssScan, ScanError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (i, rec) in rdr.deserialize::<ScanRow>().enumerate() {
        let r = rec.map_err(|e| ScanError::Parse {
            row: i + 1,
            message: e.to_string(),
        })?;
        let e = sums.entry(r.ap_id).or_insert((0.0, 0));
        e.0 += r.rss_dbm;
        e.1 += 1;
    }
    RssScan::new(sums.into_iter().map(|(ap, (s, n))| (ap, s / n as f64)).collect())
}

pub fn write_scan_csv<W: std::io::Write>(scan: &RssScan, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["ap_id", "rss_dbm"])?;
    for (ap, rss) in &scan.readings {
        w.write_record([ap.clone(), rss.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// RMS difference over the union of access point ids; an id present on
/// only one side contributes `missing_penalty` dB.
pub fn readings_distance(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>, missing_penalty: f64) -> f64 {
    // walk the union in key order so the sum is the same whichever side
    // is passed first
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    if keys.is_empty() {
        return 0.0;
    }
    let sum: f64 = keys
        .iter()
        .map(|ap| match (a.get(*ap), b.get(*ap)) {
            (Some(x), Some(y)) => (x - y).powi(2),
            _ => missing_penalty * missing_penalty,
        })
        .sum();
    (sum / keys.len() as f64).sqrt()
}

pub fn signal_distance(scan: &RssScan, fp: &Fingerprint, missing_penalty: f64) -> f64 {
    readings_distance(&scan.readings, &fp.readings, missing_penalty)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WlanParams {
    pub k: usize,
    /// dB
    pub missing_penalty: f64,
    /// meters
    pub radius_floor: f64,
}

impl Default for WlanParams {
    fn default() -> Self {
        Self {
            k: 4,
            missing_penalty: 15.0,
            radius_floor: 10.0,
        }
    }
}

/// One of the fingerprints that voted for a coarse estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbour {
    pub index: usize,
    pub distance: f64,
    pub weight: f64,
}

/// Neighbours of `scan` in ascending signal distance, at most `k`, ties
/// kept in database order.
pub fn nearest_fingerprints(scan: &RssScan, db: &FingerprintDb, params: &WlanParams) -> Result<Vec<Neighbour>, WlanError> {
    if db.fingerprints.is_empty() {
        return Err(WlanError::EmptyDb);
    }
    if params.k == 0 {
        return Err(WlanError::ZeroK);
    }
    let mut all: Vec<(usize, f64)> = db
        .fingerprints
        .iter()
        .enumerate()
        .map(|(i, fp)| (i, signal_distance(scan, fp, params.missing_penalty)))
        .collect();
    // stable sort keeps insertion order among equal distances
    all.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(all
        .into_iter()
        .take(params.k)
        .map(|(index, distance)| Neighbour {
            index,
            distance,
            weight: 1.0 / (distance + 1.0),
        })
        .collect())
}

/// Weighted k-nearest-neighbour position with a dispersion-based radius.
pub fn knn_locate(scan: &RssScan, db: &FingerprintDb, params: &WlanParams) -> Result<CoarseEstimate, WlanError> {
    let nn = nearest_fingerprints(scan, db, params)?;
    let wsum: f64 = nn.iter().map(|n| n.weight).sum();
    let mut center = [0.0; 2];
    for n in &nn {
        let p = db.fingerprints[n.index].position;
        center[0] += n.weight * p[0];
        center[1] += n.weight * p[1];
    }
    center = [center[0] / wsum, center[1] / wsum];
    let var = nn
        .iter()
        .map(|n| {
            let p = db.fingerprints[n.index].position;
            n.weight * ((p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2))
        })
        .sum::<f64>()
        / wsum;
    Ok(CoarseEstimate {
        center,
        radius: params.radius_floor.max(2.0 * var.sqrt()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn row(x: f64, y: f64, ap: &str, rss: f64) -> FingerprintRow {
        FingerprintRow {
            x_m: Some(x),
            y_m: Some(y),
            ap_id: ap.into(),
            rss_dbm: rss,
        }
    }

    fn map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(a, r)| (a.to_string(), *r)).collect()
    }

    #[test]
    fn same_position_rows_are_averaged() {
        let db = ingest_fingerprints(&[row(1.0, 2.0, "a1", -50.0), row(1.05, 2.0, "a1", -60.0)]).unwrap();
        assert_eq!(db.fingerprints.len(), 1);
        assert_eq!(db.fingerprints[0].readings["a1"], -55.0);
        assert_eq!(db.rows, 2);
        assert_eq!(db.aps.len(), 1);
    }

    #[test]
    fn ingestion_errors_carry_row_numbers() {
        assert_eq!(
            ingest_fingerprints(&[row(0.0, 0.0, "a", -50.0), row(0.0, 0.0, "a", 10.0)]),
            Err(IngestError::RssOutOfRange { row: 2, rss: 10.0 })
        );
        let mut missing = row(0.0, 0.0, "a", -50.0);
        missing.y_m = None;
        assert_eq!(ingest_fingerprints(&[missing]), Err(IngestError::MissingPosition { row: 1 }));
        assert_eq!(ingest_fingerprints(&[]), Err(IngestError::Empty));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let text = "x_m,y_m,ap_id,rss_dbm\n0,0,aa:bb,-40\n0,0,cc:dd,-70\n3,0,aa:bb,-55\n";
        let db = read_fingerprints_csv(text.as_bytes()).unwrap();
        assert_eq!(db.fingerprints.len(), 2);
        let mut out = Vec::new();
        write_fingerprints_csv(&db.fingerprints, &mut out).unwrap();
        assert_eq!(read_fingerprints_csv(out.as_slice()).unwrap().fingerprints, db.fingerprints);

        let missing = "x_m,y_m,ap_id,rss_dbm\n0,0,a,-40\n,1,a,-40\n";
        assert_eq!(
            read_fingerprints_csv(missing.as_bytes()),
            Err(IngestError::MissingPosition { row: 2 })
        );
        assert_eq!(read_fingerprints_csv("x_m,y_m,ap_id,rss_dbm\n".as_bytes()), Err(IngestError::Empty));
        assert!(matches!(
            read_fingerprints_csv("x_m,y_m,ap_id,rss_dbm\n0,0,a,loud\n".as_bytes()),
            Err(IngestError::Parse { row: 1, .. })
        ));

        let scan = read_scan_csv("ap_id,rss_dbm\naa:bb,-41\n".as_bytes()).unwrap();
        assert_eq!(scan.readings["aa:bb"], -41.0);
        assert_eq!(read_scan_csv("ap_id,rss_dbm\n".as_bytes()), Err(ScanError::Empty));
    }

    #[test]
    fn signal_distance_examples() {
        let a = map(&[("x", -50.0), ("y", -70.0)]);
        assert_eq!(readings_distance(&a, &a, 15.0), 0.0);
        assert_eq!(readings_distance(&map(&[("a", -50.0)]), &map(&[("a", -58.0)]), 15.0), 8.0);
        let d = readings_distance(&map(&[("a", -50.0)]), &map(&[("b", -50.0)]), 15.0);
        assert_abs_diff_eq!(d, ((15.0f64.powi(2) + 15.0f64.powi(2)) / 2.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn exact_match_with_k1_returns_its_position_and_floor_radius() {
        let db = ingest_fingerprints(&[row(4.0, 7.0, "a", -45.0), row(4.0, 7.0, "b", -60.0), row(20.0, 7.0, "a", -70.0)]).unwrap();
        let scan = RssScan::from_pairs([("a", -45.0), ("b", -60.0)]).unwrap();
        let est = knn_locate(
            &scan,
            &db,
            &WlanParams {
                k: 1,
                ..WlanParams::default()
            },
        )
        .unwrap();
        assert_eq!(est.center, [4.0, 7.0]);
        assert_eq!(est.radius, 10.0);
    }

    #[test]
    fn equidistant_pair_gives_midpoint() {
        let db = ingest_fingerprints(&[row(0.0, 0.0, "a", -50.0), row(10.0, 0.0, "a", -60.0)]).unwrap();
        let scan = RssScan::from_pairs([("a", -55.0)]).unwrap();
        let est = knn_locate(
            &scan,
            &db,
            &WlanParams {
                k: 2,
                ..WlanParams::default()
            },
        )
        .unwrap();
        assert_abs_diff_eq!(est.center[0], 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(est.center[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn ties_follow_insertion_order() {
        let db = ingest_fingerprints(&[row(0.0, 0.0, "a", -50.0), row(9.0, 0.0, "a", -60.0), row(5.0, 5.0, "a", -50.0)]).unwrap();
        let scan = RssScan::from_pairs([("a", -50.0)]).unwrap();
        let nn = nearest_fingerprints(
            &scan,
            &db,
            &WlanParams {
                k: 2,
                ..WlanParams::default()
            },
        )
        .unwrap();
        assert_eq!(nn.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 2]);
    }

    #[test]
    fn radius_grows_with_spread() {
        let db = ingest_fingerprints(&[row(0.0, 0.0, "a", -50.0), row(40.0, 0.0, "a", -50.0)]).unwrap();
        let scan = RssScan::from_pairs([("a", -50.0)]).unwrap();
        let est = knn_locate(
            &scan,
            &db,
            &WlanParams {
                k: 2,
                ..WlanParams::default()
            },
        )
        .unwrap();
        // two equal weights 20 m from the centre
        assert_abs_diff_eq!(est.radius, 40.0, epsilon = 1e-9);
    }

    #[test]
    fn empty_db_and_zero_k_are_errors() {
        let db = FingerprintDb {
            fingerprints: vec![],
            rows: 0,
            aps: BTreeSet::new(),
        };
        let scan = RssScan::from_pairs([("a", -50.0)]).unwrap();
        assert_eq!(knn_locate(&scan, &db, &WlanParams::default()), Err(WlanError::EmptyDb));
        let db = ingest_fingerprints(&[row(0.0, 0.0, "a", -50.0)]).unwrap();
        assert_eq!(
            knn_locate(
                &scan,
                &db,
                &WlanParams {
                    k: 0,
                    ..WlanParams::default()
                }
            ),
            Err(WlanError::ZeroK)
        );
    }

    fn readings() -> impl Strategy<Value = BTreeMap<String, f64>> {
        prop::collection::btree_map("ap[0-5]", -100.0..-30.0f64, 1..5)
    }

    /// Inside (or on) the convex hull of `pts`, via the sign of every edge
    /// of the hull computed by gift wrapping; degenerate hulls reduce to
    /// a segment or point check.
    fn in_hull(pts: &[[f64; 2]], q: [f64; 2]) -> bool {
        let tol = 1e-7;
        let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
        let mut sorted = pts.to_vec();
        sorted.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        sorted.dedup();
        if sorted.len() == 1 {
            return (sorted[0][0] - q[0]).hypot(sorted[0][1] - q[1]) < tol;
        }
        let (first, last) = (sorted[0], sorted[sorted.len() - 1]);
        if sorted.iter().all(|&p| cross(first, last, p).abs() < tol) {
            let len = (last[0] - first[0]).hypot(last[1] - first[1]);
            let t = ((q[0] - first[0]) * (last[0] - first[0]) + (q[1] - first[1]) * (last[1] - first[1])) / len;
            return cross(first, last, q).abs() / len < tol && t >= -tol && t <= len + tol;
        }
        // monotone chain
        let mut hull: Vec<[f64; 2]> = Vec::new();
        for pass in 0..2 {
            let start = hull.len();
            let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
                Box::new(sorted.iter())
            } else {
                Box::new(sorted.iter().rev())
            };
            for &p in iter {
                while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                    hull.pop();
                }
                hull.push(p);
            }
            hull.pop();
        }
        (0..hull.len()).all(|i| cross(hull[i], hull[(i + 1) % hull.len()], q) >= -tol)
    }

    proptest! {
        #[test]
        fn signal_distance_is_symmetric_and_nonnegative(a in readings(), b in readings(), pen in 1.0..30.0f64) {
            let d = readings_distance(&a, &b, pen);
            prop_assert!(d >= 0.0);
            prop_assert_eq!(d, readings_distance(&b, &a, pen));
            prop_assert_eq!(d == 0.0, a == b);
        }

        #[test]
        fn center_lies_in_hull_of_neighbours(
            fps in prop::collection::vec(((-20.0..20.0f64, -20.0..20.0f64), readings()), 1..12),
            scan in readings(),
            k in 1usize..6,
        ) {
            let rows: Vec<_> = fps
                .iter()
                .flat_map(|((x, y), r)| r.iter().map(move |(ap, rss)| row(*x, *y, ap, *rss)))
                .collect();
            let db = ingest_fingerprints(&rows).unwrap();
            let scan = RssScan::new(scan).unwrap();
            let params = WlanParams { k, ..WlanParams::default() };
            let est = knn_locate(&scan, &db, &params).unwrap();
            let nn = nearest_fingerprints(&scan, &db, &params).unwrap();
            let pts: Vec<_> = nn.iter().map(|n| db.fingerprints[n.index].position).collect();
            prop_assert!(in_hull(&pts, est.center), "{:?} not in hull of {:?}", est.center, pts);
            prop_assert!(est.radius >= 10.0);
            prop_assert_eq!(est, knn_locate(&scan, &db, &params).unwrap());
        }
    }
}
