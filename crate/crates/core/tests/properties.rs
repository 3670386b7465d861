use std::collections::BTreeMap;

use barangay_core::access::{Officer, Role};
use barangay_core::analytics::{kfold, train_decision_tree, train_naive_bayes, Dataset, FeatureSpec, Row};
use barangay_core::geo::fixture::synthetic_zones;
use barangay_core::geo::{detect_hotspots, haversine, Band, GeoPoint, Marker, MarkerKind, METERS_PER_DEGREE};
use barangay_core::notify::{segment_message, septet_len, MULTIPART_LIMIT, SINGLE_LIMIT};
use barangay_core::registry::{Gender, NewResident, Page, ResidencyStatus, ZoneId};
use barangay_core::System;
use chrono::{NaiveDate, Utc};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = GeoPoint> {
    (-90.0f64..=90.0, -180.0f64..=180.0).prop_map(|(a, b)| GeoPoint::new(a, b))
}

fn dataset() -> impl Strategy<Value = Dataset> {
    (1usize..5, 2usize..4, 2usize..4).prop_flat_map(|(nf, nv, nc)| {
        let row = (prop::collection::vec(prop::option::weighted(0.85, 0..nv), nf), 0..nc);
        prop::collection::vec(row, 1..40).prop_map(move |rows| {
            let values: Vec<String> = (0..nv).map(|v| format!("v{v}")).collect();
            let value_refs: Vec<&str> = values.iter().map(String::as_str).collect();
            let schema = (0..nf).map(|f| FeatureSpec::new(&format!("f{f}"), &value_refs)).collect();
            let classes = (0..nc).map(|c| format!("c{c}")).collect();
            let rows = rows.into_iter().map(|(features, label)| Row { features, label }).collect();
            Dataset::new(schema, classes, rows).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn haversine_is_a_metric(a in point(), b in point(), c in point()) {
        let ab = haversine(a, b);
        prop_assert!(haversine(a, a).abs() < 1e-6);
        prop_assert!((ab - haversine(b, a)).abs() < 1e-6);
        prop_assert!((0.0..=20_015_087.0).contains(&ab));
        prop_assert!(haversine(a, c) <= ab + haversine(b, c) + 1e-6);
    }

    #[test]
    fn kfold_partitions(n in 2usize..80, k_raw in 2usize..80, seed: u64) {
        let k = 2 + k_raw % (n - 1);
        let folds = kfold(n, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let mut seen = vec![0u8; n];
        for f in &folds {
            prop_assert!(f.len() == n / k || f.len() == n / k + 1);
            for &i in f {
                seen[i] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&s| s == 1));
        prop_assert_eq!(kfold(n, k, seed).unwrap(), folds);
    }

    #[test]
    fn posterior_is_a_distribution(d in dataset(), q in prop::collection::vec(prop::option::of(0usize..2), 4)) {
        let m = train_naive_bayes(&d, 1.0).unwrap();
        let x: Vec<Option<usize>> = q.into_iter().take(d.schema.len()).chain(std::iter::repeat(None)).take(d.schema.len()).collect();
        let p64 = m.posterior::<f64>(&x).unwrap();
        let p32 = m.posterior::<f32>(&x).unwrap();
        prop_assert!((p64.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!((p32.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        for (a, b) in p64.iter().zip(&p32) {
            prop_assert!(*a >= 0.0 && (*a - *b as f64).abs() < 1e-4);
        }
    }

    #[test]
    fn tree_prediction_support_is_consistent(d in dataset(), depth in 1usize..6, min_leaf in 1usize..4) {
        let t = train_decision_tree(&d, depth, min_leaf).unwrap();
        prop_assert!(t.root.depth() <= depth);
        for row in &d.rows {
            let p = t.predict(&row.features).unwrap();
            prop_assert!(p.class < d.classes.len());
            prop_assert!(p.support.iter().sum::<u64>() >= 1);
        }
    }

    #[test]
    fn segments_reassemble(text in "[ -_a-~£é€]{1,500}") {
        let segs = segment_message(&text).unwrap();
        prop_assert_eq!(segs.concat(), text.clone());
        let total = septet_len(&text).unwrap();
        if total <= SINGLE_LIMIT {
            prop_assert_eq!(segs.len(), 1);
        } else {
            for s in &segs {
                prop_assert!(septet_len(s).unwrap() <= MULTIPART_LIMIT);
            }
            // Greedy filling never leaves room for the next character.
            for w in segs.windows(2) {
                let next = w[1].chars().next().unwrap();
                prop_assert!(septet_len(&w[0]).unwrap() + septet_len(&next.to_string()).unwrap() > MULTIPART_LIMIT);
            }
        }
    }

    #[test]
    fn hotspot_counts_match_brute_force(
        offsets in prop::collection::vec((0.0f64..0.012, 0.0f64..0.014), 0..120),
        cell in 50.0f64..400.0,
    ) {
        let sw = GeoPoint::new(14.600, 120.980);
        let ne = GeoPoint::new(14.612, 120.994);
        let markers: Vec<Marker> = offsets
            .iter()
            .map(|(dlat, dlon)| Marker {
                kind: MarkerKind::Crime,
                point: GeoPoint::new(sw.lat + dlat, sw.lon + dlon),
                occurred_at: Utc::now(),
                label: "theft".into(),
                source_id: "100000".into(),
            })
            .collect();
        let rep = detect_hotspots(sw, ne, &markers, cell, 5).unwrap();
        let mut brute: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        let kx = METERS_PER_DEGREE * sw.lat.to_radians().cos();
        for m in &markers {
            let r = ((m.point.lat - sw.lat) * METERS_PER_DEGREE / cell).floor() as usize;
            let c = ((m.point.lon - sw.lon) * kx / cell).floor() as usize;
            *brute.entry((r, c)).or_default() += 1;
        }
        prop_assert_eq!(rep.grid.total(), markers.len() as u64);
        for (r, row) in rep.grid.counts.iter().enumerate() {
            for (c, &n) in row.iter().enumerate() {
                prop_assert_eq!(n, brute.get(&(r, c)).copied().unwrap_or(0));
                prop_assert_eq!(n == 0, rep.grid.bands[r][c] == Band::None);
            }
        }
        if let Some(max) = brute.values().max() {
            prop_assert_eq!(rep.top[0].count, *max);
            prop_assert_eq!(rep.top[0].band, Band::High);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn find_matches_brute_force(
        names in prop::collection::vec(("[A-Ca-c]{1,4}", "[A-Ca-c]{1,4}", "[A-Ca-c]{0,3}"), 1..25),
        query in "[A-Ca-c]{0,2}",
        offset in 0usize..5,
        limit in 1usize..10,
    ) {
        let sys = System::in_memory(synthetic_zones());
        let officer = Officer::new("sec", Role::Secretary);
        for (last, first, middle) in &names {
            sys.register_resident(&officer, NewResident {
                last_name: last.clone(),
                first_name: first.clone(),
                middle_name: middle.clone(),
                birthdate: NaiveDate::from_ymd_opt(1990, 1, 1).unwrap(),
                gender: Gender::Female,
                occupation: String::new(),
                residency_status: ResidencyStatus::NonMigrant,
                zone_id: ZoneId(1),
                address: String::new(),
                mobile_number: None,
            }).unwrap();
        }
        let q = query.to_lowercase();
        let mut want: Vec<(String, String, String, String)> = sys
            .find_residents("", Page::default())
            .into_iter()
            .filter(|r| [&r.last_name, &r.first_name, &r.middle_name].iter().any(|n| n.to_lowercase().contains(&q)))
            .map(|r| (r.last_name.to_lowercase(), r.first_name.to_lowercase(), r.middle_name.to_lowercase(), r.resident_id.to_string()))
            .collect();
        want.sort();
        let want: Vec<String> = want.into_iter().skip(offset).take(limit).map(|t| t.3).collect();
        let got: Vec<String> = sys
            .find_residents(&query, Page { offset, limit })
            .into_iter()
            .map(|r| r.resident_id.to_string())
            .collect();
        prop_assert_eq!(got, want);
        prop_assert_eq!(sys.find_residents("", Page::default()).len(), names.len());
    }
}
