//! Random but valid populations for tests, demos and load checks.

use chrono::{Duration, NaiveDate};
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::access::Officer;
use crate::casework::{Answer, FactorAnswers, NewCase};
use crate::error::Result;
use crate::geo::{GeoPoint, Zone, ZoneMap};
use crate::health::{NewChild, NewHealthCase, Subject};
use crate::registry::{Gender, NewResident, Phone, ResidencyStatus, ResidentId};
use crate::System;

const LAST: &[&str] = &[
    "Santos", "Reyes", "Cruz", "Bautista", "Ocampo", "Garcia", "Mendoza", "Torres", "Flores", "Villanueva", "Ramos",
    "Aquino", "Navarro", "Salazar", "Mercado", "Aguilar", "Castillo", "Dizon", "Soriano", "Manalo",
];
const FIRST: &[&str] = &[
    "Jose", "Maria", "Juan", "Ana", "Mark", "Nicole", "Christian", "Grace", "Paolo", "Joy", "Angelo", "Kristine",
    "Rafael", "Lea", "Miguel", "Camille", "Adrian", "Mariel", "Noel", "Rowena",
];
const STREETS: &[&str] = &["Rizal", "Mabini", "Bonifacio", "Luna", "Del Pilar", "Burgos", "Jacinto", "Aguinaldo"];
const OFFENSES: &[&str] = &["theft", "physical injury", "trespassing", "vandalism", "threat", "alarm and scandal"];
const CONDITIONS: &[&str] = &["dengue", "fever", "diarrhea", "hypertension", "tuberculosis", "measles"];
const JOBS: &[&str] = &["vendor", "driver", "student", "teacher", "none", "carpenter", "nurse", "farmer"];

/// How much of each kind of record to create.
#[derive(Debug, Clone, Copy)]
pub struct PopulationSize {
    pub residents: usize,
    pub cases: usize,
    pub children: usize,
    pub health_cases: usize,
    pub advisories: usize,
}

impl Default for PopulationSize {
    fn default() -> Self {
        PopulationSize {
            residents: 60,
            cases: 40,
            children: 10,
            health_cases: 30,
            advisories: 3,
        }
    }
}

/// A uniformly drawn point inside `zone` (rejection sampling in its box).
pub fn point_in_zone<R: Rng + ?Sized>(rng: &mut R, zone: &Zone) -> GeoPoint {
    let (mut lo, mut hi) = (zone.boundary[0], zone.boundary[0]);
    for p in &zone.boundary {
        lo.lat = lo.lat.min(p.lat);
        lo.lon = lo.lon.min(p.lon);
        hi.lat = hi.lat.max(p.lat);
        hi.lon = hi.lon.max(p.lon);
    }
    loop {
        let p = GeoPoint::new(rng.random_range(lo.lat..hi.lat), rng.random_range(lo.lon..hi.lon));
        if crate::geo::point_in_polygon(p, &zone.boundary) && !crate::geo::point_on_boundary(p, &zone.boundary) {
            return p;
        }
    }
}

pub fn random_profile<R: Rng + ?Sized>(rng: &mut R, zones: &ZoneMap, today: NaiveDate, phone_seq: u64) -> NewResident {
    let zone = zones.zones().choose(rng).expect("zones configured");
    let age_days = rng.random_range(0..85 * 365);
    NewResident {
        last_name: LAST.choose(rng).unwrap().to_string(),
        first_name: FIRST.choose(rng).unwrap().to_string(),
        middle_name: LAST.choose(rng).unwrap().to_string(),
        birthdate: today - Duration::days(age_days),
        gender: if rng.random_bool(0.5) { Gender::Male } else { Gender::Female },
        occupation: JOBS.choose(rng).unwrap().to_string(),
        residency_status: if rng.random_bool(0.3) {
            ResidencyStatus::Migrant
        } else {
            ResidencyStatus::NonMigrant
        },
        zone_id: zone.zone_id,
        address: format!("{} {} St.", rng.random_range(1..400), STREETS.choose(rng).unwrap()),
        mobile_number: rng
            .random_bool(0.7)
            .then(|| Phone::parse(&format!("+63917{:07}", phone_seq % 10_000_000)).expect("valid phone")),
    }
}

fn random_answers<R: Rng + ?Sized>(rng: &mut R) -> FactorAnswers {
    let mut v = [Answer::Unknown; 10];
    for a in &mut v {
        *a = match rng.random_range(0..3) {
            0 => Answer::Yes,
            1 => Answer::No,
            _ => Answer::Unknown,
        };
    }
    FactorAnswers::from_values(v)
}

/// Fills `sys` through its public operations, so every record passes the
/// same validation as live input. `officer` must be a secretary.
pub fn populate<R: Rng + ?Sized>(sys: &System, officer: &Officer, rng: &mut R, size: PopulationSize) -> Result<()> {
    let today = sys.now().date_naive();
    let zones = sys.zones().clone();
    let mut ids: Vec<ResidentId> = Vec::new();
    for i in 0..size.residents {
        let p = random_profile(rng, &zones, today, i as u64 + 1);
        ids.push(sys.register_resident(officer, p)?.resident_id);
    }
    if ids.len() >= 2 {
        for _ in 0..size.cases {
            let complainant = ids.choose(rng).unwrap().clone();
            let respondent = loop {
                let r = ids.choose(rng).unwrap();
                if *r != complainant {
                    break r.clone();
                }
            };
            let zone = zones.zones().choose(rng).unwrap();
            let mut factors = std::collections::BTreeMap::new();
            factors.insert(respondent.clone(), random_answers(rng));
            sys.file_blotter(
                officer,
                NewCase {
                    complainant_ids: vec![complainant],
                    respondent_ids: vec![respondent],
                    offense_type: OFFENSES.choose(rng).unwrap().to_string(),
                    narrative: String::new(),
                    location: point_in_zone(rng, zone),
                    zone_id: None,
                    date_filed: today - Duration::days(rng.random_range(0..3 * 365)),
                    factors,
                },
            )?;
        }
    }
    let mut children = Vec::new();
    for _ in 0..size.children {
        let c = sys.register_child(
            officer,
            NewChild {
                last_name: LAST.choose(rng).unwrap().to_string(),
                first_name: FIRST.choose(rng).unwrap().to_string(),
                middle_name: String::new(),
                birthdate: today - Duration::days(rng.random_range(0..12 * 365)),
                gender: if rng.random_bool(0.5) { Gender::Male } else { Gender::Female },
                guardian_resident_id: ids.choose(rng).cloned(),
            },
        )?;
        children.push(c.child_id);
    }
    for _ in 0..size.health_cases {
        let subject = match (rng.random_bool(0.3), children.choose(rng), ids.choose(rng)) {
            (true, Some(c), _) => Subject::Child(c.clone()),
            (_, _, Some(r)) => Subject::Resident(r.clone()),
            _ => break,
        };
        let zone = zones.zones().choose(rng).unwrap();
        sys.record_health_case(
            officer,
            NewHealthCase {
                subject,
                condition: CONDITIONS.choose(rng).unwrap().to_string(),
                notes: String::new(),
                location: point_in_zone(rng, zone),
                zone_id: None,
            },
        )?;
    }
    for i in 0..size.advisories {
        sys.publish_advisory(
            officer,
            &format!("Advisory {}", i + 1),
            &format!("Free check-up at the barangay hall, schedule {}.", i + 1),
            None,
        )?;
    }
    Ok(())
}
