//! Acceptance suite: runs each criterion against the library and the HTTP
//! service and prints one PASS/FAIL line per criterion.

mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use barangay_core::access::{Officer, Role};
use barangay_core::analytics::{
    cross_validate_with, import_offender_csv, kfold, train_decision_tree, train_naive_bayes, Dataset, FeatureSpec, Row,
    TreeNode,
};
use barangay_core::clock::ManualClock;
use barangay_core::geo::fixture::synthetic_zones;
use barangay_core::geo::{detect_hotspots, haversine, Band, GeoPoint, Marker, MarkerKind, EARTH_RADIUS_M};
use barangay_core::notify::{segment_message, AudienceFilter, GatewayOutcome, MockGateway, RecipientStatus};
use barangay_core::opendata::{DatasetId, PrivateField};
use barangay_core::registry::Resident;
use barangay_core::state::{Event, State};
use barangay_core::store::{FailPoint, Wal};
use barangay_core::synthetic::{populate, PopulationSize};
use barangay_core::{System, SystemConfig};
use chrono::{TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use support::{resident_json, Client, TestServer};

type Outcome = Result<(), String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn main() {
    let criteria: [Criterion; 8] = [
        (1, "classifier oracle equivalence", c1_classifiers),
        (2, "cross-validation integrity", c2_cross_validation),
        (3, "hotspot conservation", c3_hotspots),
        (4, "clearance gate", c4_clearance),
        (5, "privacy", c5_privacy),
        (6, "geodesy", c6_geodesy),
        (7, "SMS dispatch", c7_sms),
        (8, "durability and concurrency", c8_durability),
    ];
    let mut failed = 0;
    for (n, name, run) in criteria {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(()) => println!("criterion {n}: PASS  {name} ({secs:.2}s)"),
            Err(e) => {
                failed += 1;
                println!("criterion {n}: FAIL  {name} ({secs:.2}s): {e}");
            }
        }
    }
    // Criteria 1-8 above ran against the library crate and the HTTP
    // service only; nothing from the browser console is built or used.
    if failed == 0 {
        println!("criterion 9: PASS  criteria 1-8 via HTTP API and module-level checks");
    } else {
        println!("criterion 9: FAIL  {failed} of criteria 1-8 failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------------------
// 1. Classifiers against independent oracles

/// Posterior by direct counting over the training rows.
fn nb_oracle(d: &Dataset, alpha: f64, x: &[Option<usize>]) -> Vec<f64> {
    let n = d.rows.len() as f64;
    let k = d.classes.len() as f64;
    let joint: Vec<f64> = (0..d.classes.len())
        .map(|c| {
            let in_class: Vec<&Row> = d.rows.iter().filter(|r| r.label == c).collect();
            let mut p = (in_class.len() as f64 + alpha) / (n + alpha * k);
            for (f, v) in x.iter().enumerate() {
                let Some(v) = v else { continue };
                let known = in_class.iter().filter(|r| r.features[f].is_some()).count() as f64;
                let hits = in_class.iter().filter(|r| r.features[f] == Some(*v)).count() as f64;
                p *= (hits + alpha) / (known + alpha * d.schema[f].values.len() as f64);
            }
            p
        })
        .collect();
    let z: f64 = joint.iter().sum();
    joint.iter().map(|p| p / z).collect()
}

#[derive(Debug, PartialEq)]
enum ONode {
    Leaf {
        class: usize,
        support: Vec<u64>,
    },
    Split {
        feature: usize,
        majority: usize,
        support: Vec<u64>,
        default_value: usize,
        children: Vec<(usize, ONode)>,
    },
}

fn o_hist(d: &Dataset, rows: &[usize]) -> Vec<u64> {
    let mut h = vec![0u64; d.classes.len()];
    for &i in rows {
        h[d.rows[i].label] += 1;
    }
    h
}

fn o_entropy(h: &[u64]) -> f64 {
    let n: u64 = h.iter().sum();
    let mut e = 0.0;
    for &c in h {
        if c > 0 {
            let p = c as f64 / n as f64;
            e -= p * p.log2();
        }
    }
    e
}

fn o_first_max(xs: &[u64]) -> usize {
    let mut best = 0;
    for i in 1..xs.len() {
        if xs[i] > xs[best] {
            best = i;
        }
    }
    best
}

/// Greedy ID3: best gain (earliest feature within 1e-12), unknowns sent
/// with the largest branch, features whose split leaves a branch smaller
/// than `min_leaf` skipped.
fn o_grow(d: &Dataset, rows: &[usize], depth: usize, max_depth: usize, min_leaf: usize, used: &BTreeSet<usize>) -> ONode {
    let support = o_hist(d, rows);
    let class = o_first_max(&support);
    if support.iter().filter(|&&c| c > 0).count() <= 1 || depth >= max_depth {
        return ONode::Leaf { class, support };
    }
    let parent = o_entropy(&support);
    let mut best: Option<(f64, usize, usize, Vec<Vec<usize>>)> = None;
    for f in 0..d.schema.len() {
        if used.contains(&f) {
            continue;
        }
        let mut by_value = vec![Vec::new(); d.schema[f].values.len()];
        let mut unknown = Vec::new();
        for &i in rows {
            match d.rows[i].features[f] {
                Some(v) => by_value[v].push(i),
                None => unknown.push(i),
            }
        }
        let sizes: Vec<u64> = by_value.iter().map(|b| b.len() as u64).collect();
        if sizes.iter().all(|&s| s == 0) {
            continue;
        }
        let default = o_first_max(&sizes);
        by_value[default].extend(unknown);
        if by_value.iter().any(|b| !b.is_empty() && b.len() < min_leaf) {
            continue;
        }
        let mut remainder = 0.0;
        for b in by_value.iter().filter(|b| !b.is_empty()) {
            remainder += b.len() as f64 / rows.len() as f64 * o_entropy(&o_hist(d, b));
        }
        let gain = parent - remainder;
        if gain <= 1e-12 {
            continue;
        }
        if best.as_ref().is_none_or(|(g, ..)| gain > g + 1e-12) {
            best = Some((gain, f, default, by_value));
        }
    }
    let Some((_, feature, default_value, by_value)) = best else {
        return ONode::Leaf { class, support };
    };
    let mut used = used.clone();
    used.insert(feature);
    let children = by_value
        .into_iter()
        .enumerate()
        .filter(|(_, b)| !b.is_empty())
        .map(|(v, b)| (v, o_grow(d, &b, depth + 1, max_depth, min_leaf, &used)))
        .collect();
    ONode::Split {
        feature,
        majority: class,
        support,
        default_value,
        children,
    }
}

fn from_core(n: &TreeNode) -> ONode {
    match n {
        TreeNode::Leaf { class, support } => ONode::Leaf {
            class: *class,
            support: support.clone(),
        },
        TreeNode::Split {
            feature,
            majority,
            support,
            default_value,
            children,
        } => ONode::Split {
            feature: *feature,
            majority: *majority,
            support: support.clone(),
            default_value: *default_value,
            children: children.iter().map(|(v, c)| (*v, from_core(c))).collect(),
        },
    }
}

fn random_dataset(rng: &mut ChaCha8Rng) -> Dataset {
    let n_features = rng.random_range(1..=6);
    let schema: Vec<FeatureSpec> = (0..n_features)
        .map(|f| {
            let k = rng.random_range(2..=4);
            let values: Vec<String> = (0..k).map(|v| format!("v{v}")).collect();
            let refs: Vec<&str> = values.iter().map(String::as_str).collect();
            FeatureSpec::new(&format!("f{f}"), &refs)
        })
        .collect();
    let n_classes = rng.random_range(2..=3);
    let classes = (0..n_classes).map(|c| format!("c{c}")).collect();
    let n_rows = rng.random_range(1..=200);
    let rows = (0..n_rows)
        .map(|_| Row {
            features: schema
                .iter()
                .map(|s| (!rng.random_bool(0.1)).then(|| rng.random_range(0..s.values.len())))
                .collect(),
            label: rng.random_range(0..n_classes),
        })
        .collect();
    Dataset::new(schema, classes, rows).unwrap()
}

fn random_query(rng: &mut ChaCha8Rng, d: &Dataset) -> Vec<Option<usize>> {
    d.schema
        .iter()
        .map(|s| (!rng.random_bool(0.2)).then(|| rng.random_range(0..s.values.len())))
        .collect()
}

fn check_dataset(d: &Dataset, rng: &mut ChaCha8Rng, label: &str) -> Outcome {
    for alpha in [1.0, 0.5] {
        let m = train_naive_bayes(d, alpha).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let x = random_query(rng, d);
            let got = m.posterior::<f64>(&x).map_err(|e| e.to_string())?;
            let want = nb_oracle(d, alpha, &x);
            for (g, w) in got.iter().zip(&want) {
                ensure!((g - w).abs() <= 1e-9, "{label}: posterior {got:?} vs oracle {want:?} for {x:?}");
            }
        }
    }
    for (max_depth, min_leaf) in [(8, 1), (rng.random_range(1..=4), rng.random_range(1..=4))] {
        let t = train_decision_tree(d, max_depth, min_leaf).map_err(|e| e.to_string())?;
        let rows: Vec<usize> = (0..d.rows.len()).collect();
        let want = o_grow(d, &rows, 0, max_depth, min_leaf.max(1), &BTreeSet::new());
        ensure!(
            from_core(&t.root) == want,
            "{label}: tree (depth {max_depth}, leaf {min_leaf}) differs from the oracle"
        );
    }
    Ok(())
}

fn c1_classifiers() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d1 = import_offender_csv(include_bytes!("../../core/tests/fixtures/d1.csv")).map_err(|e| e.to_string())?;
    ensure!(d1.rows.len() <= 20, "D1 has {} rows", d1.rows.len());
    check_dataset(&d1, &mut rng, "D1")?;
    for i in 0..100 {
        let d = random_dataset(&mut rng);
        check_dataset(&d, &mut rng, &format!("dataset {i}"))?;
    }
    let secs = started.elapsed().as_secs_f64();
    ensure!(secs < 10.0, "took {secs:.1}s");
    Ok(())
}

// ---------------------------------------------------------------------------
// 2. Cross-validation

fn c2_cross_validation() -> Outcome {
    for n in 4..=50usize {
        let rows = (0..n)
            .map(|i| Row {
                features: vec![Some(i % 3)],
                label: i % 2,
            })
            .collect();
        let d = Dataset::new(
            vec![FeatureSpec::new("f", &["a", "b", "c"])],
            vec!["no".into(), "yes".into()],
            rows,
        )
        .unwrap();
        let counts = d.class_counts();
        let majority = usize::from(counts[1] > counts[0]);
        for k in 2..=n {
            let seed = (n * 1000 + k) as u64;
            let folds = kfold(n, k, seed).map_err(|e| e.to_string())?;
            ensure!(folds.len() == k, "n={n} k={k}: {} folds", folds.len());
            let mut seen = vec![0u32; n];
            for f in &folds {
                for &i in f {
                    seen[i] += 1;
                }
            }
            ensure!(seen.iter().all(|&s| s == 1), "n={n} k={k}: folds overlap or miss records");
            let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
            let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
            ensure!(spread <= 1, "n={n} k={k}: fold sizes {sizes:?}");

            let rep = cross_validate_with(&d, k, seed, |_| Ok(move |_: &[Option<usize>]| Ok(majority)))
                .map_err(|e| e.to_string())?;
            ensure!(
                (rep.mean_accuracy - 0.5).abs() <= 1.0 / n as f64,
                "n={n} k={k}: constant-majority accuracy {}",
                rep.mean_accuracy
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// 3. Hotspot grid

const M_PER_DEG: f64 = 111_320.0;

fn marker(p: GeoPoint) -> Marker {
    Marker {
        kind: MarkerKind::Crime,
        point: p,
        occurred_at: Utc::now(),
        label: "theft".into(),
        source_id: "100000".into(),
    }
}

fn c3_hotspots() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for s in 0..100 {
        let sw = GeoPoint::new(rng.random_range(14.4..14.8), rng.random_range(120.9..121.2));
        let ne = GeoPoint::new(
            sw.lat + rng.random_range(0.002..0.02),
            sw.lon + rng.random_range(0.002..0.02),
        );
        let cell = rng.random_range(50.0..250.0);
        let n = rng.random_range(0..400);
        let points: Vec<GeoPoint> = (0..n)
            .map(|_| GeoPoint::new(rng.random_range(sw.lat..ne.lat), rng.random_range(sw.lon..ne.lon)))
            .collect();
        let markers: Vec<Marker> = points.iter().copied().map(marker).collect();
        let rep = detect_hotspots(sw, ne, &markers, cell, 10).map_err(|e| e.to_string())?;
        let g = &rep.grid;

        // Each cell's latitude/longitude box, tested point by point.
        let dlat = cell / M_PER_DEG;
        let dlon = cell / (M_PER_DEG * sw.lat.to_radians().cos());
        let mut brute = vec![vec![0u64; g.cols]; g.rows];
        for (r, row) in brute.iter_mut().enumerate() {
            let (lat0, lat1) = (sw.lat + r as f64 * dlat, sw.lat + (r + 1) as f64 * dlat);
            for (c, count) in row.iter_mut().enumerate() {
                let (lon0, lon1) = (sw.lon + c as f64 * dlon, sw.lon + (c + 1) as f64 * dlon);
                *count = points
                    .iter()
                    .filter(|p| p.lat >= lat0 && p.lat < lat1 && p.lon >= lon0 && p.lon < lon1)
                    .count() as u64;
            }
        }
        ensure!(g.counts == brute, "scatter {s}: grid counts differ from brute force");
        ensure!(g.total() == n as u64, "scatter {s}: {} of {n} incidents counted", g.total());

        let mut ranked: Vec<(u64, usize, usize)> = Vec::new();
        for (r, row) in brute.iter().enumerate() {
            for (c, &k) in row.iter().enumerate() {
                if k > 0 {
                    ranked.push((k, r, c));
                }
            }
        }
        ranked.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let want: Vec<(u64, usize, usize)> = ranked.into_iter().take(10).collect();
        let got: Vec<(u64, usize, usize)> = rep.top.iter().map(|h| (h.count, h.row, h.col)).collect();
        ensure!(got == want, "scatter {s}: top cells {got:?} vs {want:?}");
    }

    let sw = GeoPoint::new(14.60, 120.98);
    let ne = GeoPoint::new(14.612, 120.994);
    let same: Vec<Marker> = (0..25).map(|_| marker(GeoPoint::new(14.605, 120.987))).collect();
    let rep = detect_hotspots(sw, ne, &same, 100.0, 5).map_err(|e| e.to_string())?;
    let nonzero: Vec<(u64, Band)> = rep
        .grid
        .counts
        .iter()
        .flatten()
        .zip(rep.grid.bands.iter().flatten())
        .filter(|(c, _)| **c > 0)
        .map(|(c, b)| (*c, *b))
        .collect();
    ensure!(nonzero == [(25, Band::High)], "single-point fixture gave {nonzero:?}");
    ensure!(rep.top.len() == 1 && rep.top[0].band == Band::High, "top {:?}", rep.top);
    Ok(())
}

// ---------------------------------------------------------------------------
// 4. Clearance gate, exhaustively over HTTP

fn c4_clearance() -> Outcome {
    let srv = TestServer::start();
    let sec = srv.admin();
    let tre = srv.user("treasurer", "treasurer");
    let point = {
        let z = &srv.sys.zones().zones()[0];
        barangay_core::geo::fixture::centroid(&z.boundary)
    };
    let complainant = sec.post("/residents", &resident_json("Santos", "Maria", 1, None));
    let complainant = complainant.json["resident_id"].as_str().unwrap().to_string();

    let mut expected_issued = 0;
    for open in 0..=3 {
        for override_check in [false, true] {
            for (role, client) in [("secretary", &sec), ("treasurer", &tre)] {
                let label = format!("open={open} override={override_check} role={role}");
                let r = sec.post("/residents", &resident_json("Reyes", &format!("R{open}{override_check}{role}"), 2, None));
                let who = r.json["resident_id"].as_str().unwrap().to_string();
                let mut cases = Vec::new();
                for i in 0..open {
                    let c = sec.post(
                        "/blotter",
                        &json!({
                            "complainant_ids": [complainant], "respondent_ids": [who],
                            "offense_type": "theft", "location": {"lat": point.lat, "lon": point.lon},
                            "date_filed": format!("2017-01-{:02}", i + 1),
                        }),
                    );
                    ensure!(c.status == 201, "{label}: filing failed {}", c.text);
                    cases.push(c.json["case_number"].as_str().unwrap().to_string());
                }
                let r = client.post(
                    "/clearance",
                    &json!({"resident_id": who, "purpose": "employment", "override": override_check}),
                );
                if override_check && role == "treasurer" {
                    ensure!(
                        r.status == 403 && r.json["code"] == "OVERRIDE_FORBIDDEN",
                        "{label}: {} {}",
                        r.status,
                        r.text
                    );
                    continue;
                }
                ensure!(r.status == 201, "{label}: {} {}", r.status, r.text);
                let c = &r.json;
                if open == 0 {
                    ensure!(c["outcome"] == "issued" && c["override_by"].is_null(), "{label}: {c}");
                    expected_issued += 1;
                } else if override_check {
                    ensure!(c["outcome"] == "issued" && c["override_by"] == support::ADMIN, "{label}: {c}");
                    expected_issued += 1;
                } else {
                    let reason = c["denial_reason"].as_str().unwrap_or("");
                    ensure!(c["outcome"] == "denied", "{label}: {c}");
                    ensure!(cases.iter().all(|n| reason.contains(n.as_str())), "{label}: reason {reason:?}");
                }
            }
        }
    }

    let replayed = srv.sys.replay_log().map_err(|e| e.to_string())?.ok_or("no event log")?;
    let live = srv.sys.snapshot();
    let certs: Vec<_> = replayed.casework.certificates().cloned().collect();
    ensure!(
        certs == live.casework.certificates().cloned().collect::<Vec<_>>(),
        "replayed certificates differ from the live store"
    );
    let mut issued = 0;
    for cert in &certs {
        if cert.outcome != barangay_core::casework::Outcome::Issued {
            continue;
        }
        issued += 1;
        // No case is ever closed in this run, so the final open set is the
        // set that was open at issue time.
        let open = replayed.casework.open_cases_against(&cert.resident_id);
        if !open.is_empty() {
            let by = cert.override_by.as_deref().ok_or(format!("{} issued over open cases", cert.certificate_id))?;
            let role = replayed.accounts.get(by).map(|a| a.role);
            ensure!(role == Some(Role::Secretary), "{} overridden by {by} ({role:?})", cert.certificate_id);
        }
    }
    ensure!(issued == expected_issued, "{issued} issued certificates, expected {expected_issued}");
    Ok(())
}

// ---------------------------------------------------------------------------
// 5. Privacy of open-data exports

fn count_cells_ok(dataset: DatasetId, bytes: &[u8]) -> Result<Vec<Vec<String>>, String> {
    let cols: Vec<usize> = dataset
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.ends_with("count"))
        .map(|(i, _)| i)
        .collect();
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let header: Vec<String> = rdr.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
    ensure!(header == dataset.columns(), "{dataset:?} header {header:?}");
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        for &i in &cols {
            let cell = &rec[i];
            let ok = cell == "<3" || cell == "0" || cell.parse::<u64>().is_ok_and(|n| n >= 3);
            ensure!(ok, "{dataset:?}: count cell {cell:?}");
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok(rows)
}

/// Adds unsuppressed counts and the bounds implied by suppressed ones.
fn count_bounds(rows: &[Vec<String>], col: usize) -> (u64, u64) {
    rows.iter().fold((0, 0), |(lo, hi), r| match r[col].as_str() {
        "<3" => (lo + 1, hi + 2),
        n => {
            let n: u64 = n.parse().unwrap();
            (lo + n, hi + n)
        }
    })
}

fn plant(bytes: &[u8], rng: &mut ChaCha8Rng, text: &str) -> Vec<u8> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes);
    let mut rows: Vec<Vec<String>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    let width = rows[0].len();
    if rows.len() == 1 {
        rows.push(vec![String::new(); width]);
    }
    let r = rng.random_range(1..rows.len());
    let c = rng.random_range(0..width);
    rows[r][c] = format!("{} call {text}", rows[r][c]);
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(row).unwrap();
    }
    w.into_inner().unwrap()
}

fn phone_variants(e164: &str) -> Vec<String> {
    let d = &e164[3..]; // after +63
    vec![
        e164.to_string(),
        format!("0{d}"),
        format!("0{} {} {}", &d[..3], &d[3..6], &d[6..]),
        format!("(0{}) {}-{}", &d[..3], &d[3..6], &d[6..]),
        format!("63-{}-{}", &d[..3], &d[3..]),
    ]
}

fn check_fixture(sys: &System, rng: &mut ChaCha8Rng, label: &str) -> Outcome {
    let snap = sys.snapshot();
    for ds in DatasetId::ALL {
        let bytes = sys.export_dataset(ds, None).map_err(|e| e.to_string())?;
        let v = sys.privacy_scan(&bytes).map_err(|e| e.to_string())?;
        ensure!(v.is_empty(), "{label}: {ds:?} export leaks {v:?}");
        let rows = count_cells_ok(ds, &bytes).map_err(|e| format!("{label}: {e}"))?;
        let total = match ds {
            DatasetId::BarangayProfile => Some((snap.registry.len() as u64, 1)),
            DatasetId::CrimeStatus => Some((snap.casework.case_count() as u64, 3)),
            DatasetId::HealthStatus => Some((sys.health_summary(None, barangay_core::health::HealthGroupBy::Zone).values().sum::<u64>(), 3)),
            DatasetId::ProgramsAdvisories => None,
        };
        if let Some((total, col)) = total {
            let (lo, hi) = count_bounds(&rows, col);
            ensure!(lo <= total && total <= hi, "{label}: {ds:?} counts {lo}..{hi} vs {total} records");
        }
    }
    let phones: Vec<String> = snap.registry.iter().filter_map(|r| r.mobile_number.as_ref().map(|p| p.as_str().to_string())).collect();
    if let Some(phone) = phones.get(rng.random_range(0..phones.len().max(1))) {
        for variant in phone_variants(phone) {
            let ds = DatasetId::ALL[rng.random_range(0..4)];
            let planted = plant(&sys.export_dataset(ds, None).unwrap(), rng, &variant);
            let v = sys.privacy_scan(&planted).map_err(|e| e.to_string())?;
            ensure!(
                v.iter().any(|v| v.field == PrivateField::MobileNumber),
                "{label}: planted {variant:?} in {ds:?} not caught"
            );
        }
    } else {
        return Err(format!("{label}: fixture has no phone to plant"));
    }
    Ok(())
}

fn c5_privacy() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..50 {
        let sys = System::in_memory(synthetic_zones());
        let size = PopulationSize {
            residents: rng.random_range(3..80),
            cases: rng.random_range(0..60),
            children: rng.random_range(0..10),
            health_cases: rng.random_range(0..40),
            advisories: rng.random_range(0..4),
        };
        populate(&sys, &Officer::new("sec", Role::Secretary), &mut rng, size).map_err(|e| e.to_string())?;
        check_fixture(&sys, &mut rng, &format!("fixture {i}"))?;
    }

    // The public download serves the same bytes as the library export.
    let srv = TestServer::start();
    populate(&srv.sys, &Officer::new("sec", Role::Secretary), &mut rng, PopulationSize::default())
        .map_err(|e| e.to_string())?;
    let anon = srv.client();
    for ds in DatasetId::ALL {
        let r = anon.get(&format!("/opendata/{}.csv", ds.as_str()));
        ensure!(r.status == 200, "download {ds:?}: {}", r.status);
        ensure!(r.text.as_bytes() == srv.sys.export_dataset(ds, None).unwrap(), "download {ds:?} differs");
        let scan = scan_over_http(&srv, &r.text)?;
        ensure!(scan == 0, "download {ds:?}: {scan} violations");
    }
    Ok(())
}

fn scan_over_http(srv: &TestServer, csv: &str) -> Result<usize, String> {
    let r = srv.admin().post_raw("/opendata/privacy-scan", "text/csv", csv.as_bytes());
    ensure!(r.status == 200, "privacy scan: {} {}", r.status, r.text);
    Ok(r.json["violations"].as_array().map_or(0, Vec::len))
}

// ---------------------------------------------------------------------------
// 6. Geodesy

/// Great-circle distance by the spherical law of cosines, written with
/// atan2 so it stays accurate for short and antipodal arcs.
fn gc_oracle(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dl = (b.lon - a.lon).to_radians();
    let y = ((p2.cos() * dl.sin()).powi(2) + (p1.cos() * p2.sin() - p1.sin() * p2.cos() * dl.cos()).powi(2)).sqrt();
    let x = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
    EARTH_RADIUS_M * y.atan2(x)
}

fn c6_geodesy() -> Outcome {
    let half = haversine::<f64>(GeoPoint::new(0.0, 0.0), GeoPoint::new(0.0, 180.0));
    ensure!((half - 20_015_086.8).abs() <= 1.0, "(0,0)-(0,180) = {half}");
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let point = |rng: &mut ChaCha8Rng| GeoPoint::new(rng.random_range(-90.0..=90.0), rng.random_range(-180.0..=180.0));
    for _ in 0..1000 {
        let (a, b, c) = (point(&mut rng), point(&mut rng), point(&mut rng));
        ensure!(haversine::<f64>(a, a) == 0.0, "d(a,a) != 0 for {a:?}");
        let (ab, ba, bc, ac) = (haversine::<f64>(a, b), haversine::<f64>(b, a), haversine::<f64>(b, c), haversine::<f64>(a, c));
        ensure!((ab - ba).abs() <= 1e-6 * ab.max(1.0), "asymmetric {a:?} {b:?}: {ab} vs {ba}");
        ensure!(ac <= (ab + bc) * (1.0 + 1e-6), "triangle {a:?} {b:?} {c:?}: {ac} > {ab} + {bc}");
        let o = gc_oracle(a, b);
        ensure!((ab - o).abs() <= 1e-6 * o.max(1.0), "{a:?} {b:?}: {ab} vs oracle {o}");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// 7. SMS dispatch

fn c7_sms() -> Outcome {
    for (n, want) in [(160, 1), (161, 2), (306, 2), (307, 3)] {
        let text = "a".repeat(n);
        let parts = segment_message(&text).map_err(|e| e.to_string())?;
        ensure!(parts.len() == want, "{n} chars gave {} segments", parts.len());
        ensure!(parts.concat() == text, "{n} chars do not reassemble");
    }
    let srv = TestServer::start();
    let sec = srv.admin();
    for (n, want) in [(160, 1), (161, 2), (306, 2), (307, 3)] {
        let r = sec.post("/broadcasts/preview", &json!({"message": "a".repeat(n)}));
        ensure!(r.json["segments"] == want, "preview of {n} chars: {}", r.text);
    }

    let phones = ["+639170000001", "+639170000002", "+639170000003", "+639170000004"];
    let mut crash_points = 0;
    for torn in [false, true] {
        let mut k = 0;
        loop {
            let dir = tempfile::tempdir().unwrap();
            let gw = Arc::new(MockGateway::new());
            gw.script(phones[0], [GatewayOutcome::TransientError]);
            gw.script(phones[1], [GatewayOutcome::Rejected, GatewayOutcome::Rejected]);
            gw.script(phones[2], [GatewayOutcome::TransientError; 5]);
            let clock = Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2017, 6, 1, 8, 0, 0).unwrap()));
            let cfg = || {
                SystemConfig::new(synthetic_zones())
                    .data_dir(dir.path())
                    .clock(clock.clone())
                    .gateway(gw.clone())
            };
            let crashed;
            {
                let sys = System::open(cfg()).map_err(|e| e.to_string())?;
                let officer = Officer::new("sec", Role::Secretary);
                for (i, p) in phones.iter().enumerate() {
                    let r: barangay_core::registry::NewResident =
                        serde_json::from_value(resident_json("Bautista", &format!("Nilo{i}"), 1, Some(p))).unwrap();
                    sys.register_resident(&officer, r).map_err(|e| e.to_string())?;
                }
                let job = sys
                    .create_broadcast(&officer, "Free vaccination at the health center.", AudienceFilter::All)
                    .map_err(|e| e.to_string())?;
                sys.set_failpoint(Some(FailPoint { after_commits: k, torn }));
                crashed = sys.dispatch(&job.job_id).is_err();
            }
            let sys = System::open(cfg()).map_err(|e| e.to_string())?;
            for job in sys.unfinished_jobs() {
                sys.dispatch(&job).map_err(|e| e.to_string())?;
            }
            let job = sys.broadcasts().pop().ok_or("job lost")?;
            let deliveries = gw.deliveries();
            let label = format!("crash after {k} commits (torn={torn})");
            for r in &job.recipients {
                ensure!(
                    matches!(r.status, RecipientStatus::Sent | RecipientStatus::Failed),
                    "{label}: {} left {:?}",
                    r.phone.as_str(),
                    r.status
                );
                let want = if r.phone.as_str() == phones[1] || r.phone.as_str() == phones[2] {
                    RecipientStatus::Failed
                } else {
                    RecipientStatus::Sent
                };
                ensure!(r.status == want, "{label}: {} ended {:?}", r.phone.as_str(), r.status);
                let d = deliveries.get(&r.idempotency_key).copied().unwrap_or(0);
                ensure!(d <= 1, "{label}: {} deliveries for {}", d, r.idempotency_key);
                ensure!((d == 1) == (r.status == RecipientStatus::Sent), "{label}: ledger/status mismatch");
            }
            ensure!(deliveries.values().all(|&d| d <= 1), "{label}: duplicate delivery {deliveries:?}");
            if !crashed {
                break;
            }
            k += 1;
            crash_points += 1;
        }
        ensure!(k > 0, "no commit point was exercised");
    }
    ensure!(crash_points > 0, "no crashes injected");
    Ok(())
}

// ---------------------------------------------------------------------------
// 8. Durability and concurrency against the real binary

struct Proc {
    child: Child,
    base: String,
}

fn spawn_server(dir: &Path) -> Result<Proc, String> {
    let mut child = Command::new(env!("CARGO_BIN_EXE_barangay"))
        .arg("serve")
        .env("DATA_DIR", dir)
        .env("BIND_ADDR", "127.0.0.1:0")
        .env("BARANGAY_ADMIN_USER", support::ADMIN)
        .env("BARANGAY_ADMIN_PASSWORD", support::ADMIN_PASSWORD)
        .env("RUST_LOG", "error")
        .env_remove("ZONES_FILE")
        .env_remove("SMS_GATEWAY_URL")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let stdout = child.stdout.take().unwrap();
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        for line in BufReader::new(stdout).lines().map_while(Result::ok) {
            if let Some(addr) = line.strip_prefix("listening on ") {
                let _ = tx.send(addr.to_string());
            }
        }
    });
    let addr = rx.recv_timeout(Duration::from_secs(30)).map_err(|_| {
        let _ = child.kill();
        "server did not report its address".to_string()
    })?;
    Ok(Proc {
        child,
        base: format!("http://{addr}/api"),
    })
}

impl Proc {
    fn admin(&self) -> Client {
        let mut c = Client::new(&self.base);
        let r = c.sign_in(support::ADMIN, support::ADMIN_PASSWORD);
        assert_eq!(r.status, 201, "{}", r.text);
        c
    }

    /// SIGKILL: no shutdown hooks run.
    fn kill(mut self) {
        self.child.kill().unwrap();
        self.child.wait().unwrap();
    }
}

fn letters(i: usize) -> String {
    let a = (b'A' + (i / 26) as u8) as char;
    let b = (b'a' + (i % 26) as u8) as char;
    format!("{a}{b}")
}

/// Registers `count` distinct residents from as many threads. Returns the
/// acknowledged (first name, resident id) pairs.
fn register_concurrently(base: &str, token: &str, offset: usize, count: usize, acked: &Arc<AtomicUsize>) -> Vec<(String, String)> {
    let handles: Vec<_> = (0..count)
        .map(|i| {
            let mut c = Client::new(base);
            c.token = Some(token.to_string());
            let acked = acked.clone();
            std::thread::spawn(move || {
                let first = format!("Conc{}", letters(offset + i));
                let zone = 1 + (i % 7) as u32;
                let phone = format!("+63918{:07}", offset + i);
                let r = c.try_send(
                    ureq::http::Method::POST,
                    "/residents",
                    "application/json",
                    serde_json::to_vec(&resident_json("Villanueva", &first, zone, Some(&phone))).unwrap(),
                )?;
                (r.status == 201).then(|| {
                    acked.fetch_add(1, Ordering::SeqCst);
                    (first, r.json["resident_id"].as_str().unwrap().to_string())
                })
            })
        })
        .collect();
    handles.into_iter().filter_map(|h| h.join().unwrap()).collect()
}

fn residents_over_http(c: &Client) -> Result<Vec<Resident>, String> {
    let r = c.get("/residents");
    ensure!(r.status == 200, "listing residents: {}", r.status);
    let mut rows: Vec<Resident> = serde_json::from_value(r.json).map_err(|e| e.to_string())?;
    rows.sort_by_key(|r| r.resident_id.seq());
    Ok(rows)
}

fn replayed_registry(dir: &Path) -> Result<Vec<Resident>, String> {
    let batches = Wal::<Event>::read(dir).map_err(|e| e.to_string())?;
    let state = State::replay(batches.iter().map(Vec::as_slice));
    let mut rows: Vec<Resident> = state.registry.iter().cloned().collect();
    rows.sort_by_key(|r| r.resident_id.seq());
    Ok(rows)
}

fn check_acked(label: &str, acked: &[(String, String)], present: &[Resident]) -> Outcome {
    let by_id: BTreeMap<&str, &Resident> = present.iter().map(|r| (r.resident_id.as_str(), r)).collect();
    for (first, id) in acked {
        let r = by_id.get(id.as_str()).ok_or(format!("{label}: acknowledged {id} lost"))?;
        ensure!(&r.first_name == first, "{label}: {id} holds {} not {first}", r.first_name);
    }
    let ids: Vec<u64> = present.iter().map(|r| r.resident_id.seq()).collect();
    ensure!(ids == (1..=present.len() as u64).collect::<Vec<_>>(), "{label}: ids not dense: {ids:?}");
    Ok(())
}

fn c8_durability() -> Outcome {
    let dir = tempfile::tempdir().unwrap();

    // Round 1: 50 concurrent registrations, all acknowledged, then kill -9.
    let p = spawn_server(dir.path())?;
    let admin = p.admin();
    let token = admin.token.clone().unwrap();
    let count = Arc::new(AtomicUsize::new(0));
    let acked = register_concurrently(&p.base, &token, 0, 50, &count);
    ensure!(acked.len() == 50, "{} of 50 registrations acknowledged", acked.len());
    let ids: BTreeSet<&str> = acked.iter().map(|(_, id)| id.as_str()).collect();
    ensure!(ids.len() == 50, "duplicate ids handed out");
    let before = residents_over_http(&admin)?;
    p.kill();

    let p = spawn_server(dir.path())?;
    let after = residents_over_http(&p.admin())?;
    ensure!(after == before, "registry changed across kill -9 and restart");
    check_acked("round 1", &acked, &after)?;

    // Serial replay of the log, and serial re-registration of the same
    // profiles, both give the same registry.
    p.kill();
    let replayed = replayed_registry(dir.path())?;
    ensure!(replayed == after, "serial replay of the log differs from the restarted server");
    let serial = System::in_memory(synthetic_zones());
    let officer = Officer::new("sec", Role::Secretary);
    for r in &after {
        let reg = serial.register_resident(&officer, r.profile()).map_err(|e| e.to_string())?;
        ensure!(reg.resident_id == r.resident_id, "serial order gives {} for {}", reg.resident_id.as_str(), r.resident_id.as_str());
    }
    let mut serial_rows = serial.find_residents("", Default::default());
    serial_rows.sort_by_key(|r| r.resident_id.seq());
    let serial_profiles: Vec<_> = serial_rows.iter().map(Resident::profile).collect();
    let after_profiles: Vec<_> = after.iter().map(Resident::profile).collect();
    ensure!(
        serde_json::to_value(&serial_profiles).unwrap() == serde_json::to_value(&after_profiles).unwrap(),
        "serial re-registration differs"
    );

    // Round 2: kill -9 while registrations are in flight.
    let p = spawn_server(dir.path())?;
    let token = p.admin().token.clone().unwrap();
    let count = Arc::new(AtomicUsize::new(0));
    let base = p.base.clone();
    let c2 = count.clone();
    let worker = std::thread::spawn(move || register_concurrently(&base, &token, 50, 50, &c2));
    let deadline = Instant::now() + Duration::from_secs(30);
    while count.load(Ordering::SeqCst) < 10 && Instant::now() < deadline {
        std::thread::sleep(Duration::from_millis(1));
    }
    p.kill();
    let acked2 = worker.join().unwrap();
    ensure!(!acked2.is_empty(), "nothing acknowledged before the kill");

    let p = spawn_server(dir.path())?;
    let present = residents_over_http(&p.admin())?;
    p.kill();
    check_acked("round 1 after round 2", &acked, &present)?;
    check_acked("round 2", &acked2, &present)?;
    ensure!(
        present.len() >= 50 + acked2.len() && present.len() <= 100,
        "{} residents after {} acknowledged",
        present.len(),
        50 + acked2.len()
    );
    ensure!(replayed_registry(dir.path())? == present, "replay differs after round 2");
    Ok(())
}
