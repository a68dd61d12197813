//! Verified orbit database, persisted as JSON lines.

use std::io::{BufRead, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::itinerary::{enumerate_itineraries, Itinerary};
use super::search::{find_orbit, orbit_from_thetas, verify_orbit, NewtonOptions, PeriodicOrbit};
use crate::error::{BilliardError, Result};
use crate::geometry::{no_eclipse_check, ObstacleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthSummary {
    pub length: usize,
    pub enumerated: usize,
    pub found: usize,
    /// Not realizable: occluded or grazing.
    pub pruned: usize,
    /// Newton failures or verification failures.
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitDb {
    pub set_hash: String,
    pub max_len: usize,
    pub newton: NewtonOptions,
    /// Sorted by bounce count, then itinerary.
    pub entries: Vec<PeriodicOrbit>,
    pub pruned: Vec<(Itinerary, String)>,
    pub failed: Vec<(Itinerary, String)>,
    pub summary: Vec<LengthSummary>,
}

/// One line of the JSON-lines file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub itinerary: Itinerary,
    pub thetas: Vec<f64>,
    #[serde(rename = "T_prim")]
    pub t_prim: f64,
    pub trace: f64,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub residual: f64,
    pub set_hash: String,
}

impl From<&PeriodicOrbit> for OrbitRecord {
    fn from(o: &PeriodicOrbit) -> Self {
        OrbitRecord {
            itinerary: o.itinerary.clone(),
            thetas: o.thetas.clone(),
            t_prim: o.t_prim,
            trace: o.hyp.trace,
            lambda: o.hyp.lambda,
            residual: o.newton_residual,
            set_hash: o.set_hash.clone(),
        }
    }
}

enum Outcome {
    Found(Box<PeriodicOrbit>),
    Pruned(String),
    Failed(String),
}

/// Enumerates every primitive itinerary up to `max_len`, finds and verifies
/// its orbit. Unrealizable itineraries are recorded, not fatal.
pub fn build_db(set: &ObstacleSet, max_len: usize, opts: &NewtonOptions) -> OrbitDb {
    if set.len() >= 3 && !no_eclipse_check(set).holds {
        log::warn!("obstacle set violates the no-eclipse condition; expect pruned itineraries");
    }
    let itineraries = enumerate_itineraries(set.len(), max_len);
    let outcomes: Vec<Outcome> = itineraries
        .par_iter()
        .map(|it| match find_orbit(set, it, opts) {
            Ok(orbit) => {
                let rep = verify_orbit(set, &orbit, opts.grazing_tol);
                if rep.passed {
                    Outcome::Found(Box::new(orbit))
                } else {
                    Outcome::Failed(format!("verification failed: {rep:?}"))
                }
            }
            Err(e @ (BilliardError::OccludedLeg { .. } | BilliardError::GrazingOrbit { .. })) => {
                Outcome::Pruned(e.to_string())
            }
            Err(e) => Outcome::Failed(e.to_string()),
        })
        .collect();

    let mut summary: Vec<LengthSummary> = (2..=max_len.max(1))
        .filter(|&l| l >= 2)
        .map(|length| LengthSummary {
            length,
            enumerated: 0,
            found: 0,
            pruned: 0,
            failed: 0,
        })
        .collect();
    let mut entries = Vec::new();
    let mut pruned = Vec::new();
    let mut failed = Vec::new();
    for (it, outcome) in itineraries.into_iter().zip(outcomes) {
        let row = &mut summary[it.len() - 2];
        row.enumerated += 1;
        match outcome {
            Outcome::Found(o) => {
                row.found += 1;
                entries.push(*o);
            }
            Outcome::Pruned(why) => {
                row.pruned += 1;
                pruned.push((it, why));
            }
            Outcome::Failed(why) => {
                row.failed += 1;
                failed.push((it, why));
            }
        }
    }
    OrbitDb {
        set_hash: set.set_hash(),
        max_len,
        newton: *opts,
        entries,
        pruned,
        failed,
        summary,
    }
}

impl OrbitDb {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// Orbits with at most `max_len` bounces.
    pub fn truncated(&self, max_len: usize) -> impl Iterator<Item = &PeriodicOrbit> {
        self.entries.iter().filter(move |o| o.bounces() <= max_len)
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        for o in &self.entries {
            serde_json::to_writer(&mut w, &OrbitRecord::from(o))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_jsonl(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Reads a JSON-lines database and re-verifies every record against `set`.
    ///
    /// Records built for a different obstacle set are refused.
    pub fn read_jsonl(set: &ObstacleSet, r: impl BufRead, opts: &NewtonOptions) -> Result<Self> {
        let expected = set.set_hash();
        let mut entries = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: OrbitRecord = serde_json::from_str(&line)?;
            if rec.set_hash != expected {
                return Err(BilliardError::StaleDb {
                    expected,
                    found: rec.set_hash,
                });
            }
            let orbit = orbit_from_thetas(set, &rec.itinerary, &rec.thetas, rec.residual, opts.grazing_tol)?;
            let rep = verify_orbit(set, &orbit, opts.grazing_tol);
            if !rep.passed {
                return Err(BilliardError::InvalidConfig(format!(
                    "stored orbit {} fails verification",
                    rec.itinerary
                )));
            }
            entries.push(orbit);
        }
        entries.sort_by(|a, b| (a.bounces(), &a.itinerary).cmp(&(b.bounces(), &b.itinerary)));
        let max_len = entries.iter().map(|o| o.bounces()).max().unwrap_or(0);
        Ok(OrbitDb {
            set_hash: expected,
            max_len,
            newton: *opts,
            entries,
            pruned: Vec::new(),
            failed: Vec::new(),
            summary: Vec::new(),
        })
    }

    pub fn load(set: &ObstacleSet, path: impl AsRef<Path>, opts: &NewtonOptions) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_jsonl(set, std::io::BufReader::new(f), opts)
    }
}
