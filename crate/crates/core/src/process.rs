//! Exact simulation of inhomogeneous Poisson paths by thinning, and n-path
//! experiments with per-path counter-based streams.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Exp1, Open01};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::IntensityModel;
use crate::rng;

/// Event times of one path on `[0, τ]`, strictly increasing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathSample {
    events: Vec<f64>,
}

impl PathSample {
    /// Validates ordering and the window.
    pub fn new(events: Vec<f64>, tau: f64) -> Result<Self> {
        if events.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Format("event times must be strictly increasing".into()));
        }
        if events.iter().any(|&t| !(0.0..=tau).contains(&t)) {
            return Err(Error::Format(format!("event time outside [0, {tau}]")));
        }
        Ok(PathSample { events })
    }

    pub fn events(&self) -> &[f64] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Number of events in `[lo, hi)`.
    pub fn count_in(&self, lo: f64, hi: f64) -> usize {
        self.events.partition_point(|&t| t < hi) - self.events.partition_point(|&t| t < lo)
    }
}

/// `n` independent paths generated at `theta_true`.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub model: String,
    pub theta_true: f64,
    pub seed: u64,
    paths: Vec<PathSample>,
}

impl Experiment {
    pub fn new(model: impl Into<String>, theta_true: f64, seed: u64, paths: Vec<PathSample>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::domain("an experiment needs at least one path"));
        }
        Ok(Experiment { model: model.into(), theta_true, seed, paths })
    }

    pub fn paths(&self) -> &[PathSample] {
        &self.paths
    }

    pub fn n(&self) -> usize {
        self.paths.len()
    }

    pub fn total_events(&self) -> usize {
        self.paths.iter().map(PathSample::len).sum()
    }

    /// All event times of all paths, path by path.
    pub fn pooled_events(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_events());
        for p in &self.paths {
            out.extend_from_slice(&p.events);
        }
        out
    }
}

/// One path by thinning a rate-`lambda_max(θ)` homogeneous process.
pub fn sample_path<R: Rng + ?Sized>(model: &IntensityModel, theta: f64, stream: &mut R) -> Result<PathSample> {
    model.check_theta(theta)?;
    let bound = model.lambda_max(theta);
    let tau = model.tau();
    let mut events = Vec::with_capacity((1.5 * bound * tau) as usize + 4);
    let mut t = 0.0f64;
    loop {
        let gap: f64 = stream.sample(Exp1);
        let next = t + gap / bound;
        if next > tau {
            break;
        }
        if next <= t {
            // Zero-width gap in floating point; draw again.
            continue;
        }
        t = next;
        let u: f64 = stream.sample(Open01);
        if u * bound <= model.lambda(theta, t) {
            events.push(t);
        }
    }
    Ok(PathSample { events })
}

/// Path `j` (1-based) of the experiment keyed by `seed`.
pub fn sample_indexed_path(model: &IntensityModel, theta: f64, seed: u64, j: u64) -> Result<PathSample> {
    sample_path(model, theta, &mut rng::stream(seed, j))
}

/// `n` paths; path `j` uses stream `j` of the generator keyed by `seed`.
pub fn sample_experiment(model: &IntensityModel, theta: f64, n: usize, seed: u64) -> Result<Experiment> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    let paths = (1..=n as u64).map(|j| sample_indexed_path(model, theta, seed, j)).collect::<Result<Vec<_>>>()?;
    Experiment::new(model.name(), theta, seed, paths)
}

/// Same output as [`sample_experiment`], with paths generated on the rayon
/// pool.
pub fn sample_experiment_par(model: &IntensityModel, theta: f64, n: usize, seed: u64) -> Result<Experiment> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    let paths = (1..=n as u64)
        .into_par_iter()
        .map(|j| sample_indexed_path(model, theta, seed, j))
        .collect::<Result<Vec<_>>>()?;
    Experiment::new(model.name(), theta, seed, paths)
}

/// Sidecar record written next to an experiment CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMeta {
    pub model: String,
    pub theta: f64,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct EventRow {
    path_index: usize,
    event_time: f64,
}

impl Experiment {
    pub fn meta(&self) -> ExperimentMeta {
        ExperimentMeta { model: self.model.clone(), theta: self.theta_true, n: self.n(), seed: self.seed }
    }

    /// CSV with header `path_index,event_time`, path indices from 1. Empty
    /// paths have no rows; the sidecar carries `n`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        csv.write_record(["path_index", "event_time"])?;
        for (j, path) in self.paths.iter().enumerate() {
            for &t in &path.events {
                csv.serialize(EventRow { path_index: j + 1, event_time: t })?;
            }
        }
        csv.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, meta: &ExperimentMeta, tau: f64) -> Result<Self> {
        let mut csv = csv::Reader::from_reader(reader);
        if csv.headers()?.iter().collect::<Vec<_>>() != ["path_index", "event_time"] {
            return Err(Error::Format("expected header `path_index,event_time`".into()));
        }
        let mut events = vec![Vec::new(); meta.n];
        for row in csv.deserialize() {
            let row: EventRow = row?;
            if row.path_index == 0 || row.path_index > meta.n {
                return Err(Error::Format(format!("path_index {} outside 1..={}", row.path_index, meta.n)));
            }
            events[row.path_index - 1].push(row.event_time);
        }
        let paths = events.into_iter().map(|e| PathSample::new(e, tau)).collect::<Result<Vec<_>>>()?;
        Experiment::new(meta.model.clone(), meta.theta, meta.seed, paths)
    }

    /// Write `<stem>.csv` and `<stem>.toml` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join(format!("{stem}.csv")))?)?;
        let meta = toml::to_string(&self.meta()).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(dir.join(format!("{stem}.toml")), meta)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>, stem: &str, tau: f64) -> Result<Self> {
        let dir = dir.as_ref();
        let meta: ExperimentMeta = toml::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.toml")))?)
            .map_err(|e| Error::Format(e.to_string()))?;
        Self::read_csv(std::fs::File::open(dir.join(format!("{stem}.csv")))?, &meta, tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin, paper_model};

    #[test]
    fn paths_are_sorted_and_inside_the_window() {
        let m = paper_model();
        let mut s = rng::stream(9, 1);
        for _ in 0..200 {
            let p = sample_path(&m, 4.0, &mut s).unwrap();
            assert!(p.events().windows(2).all(|w| w[0] < w[1]));
            assert!(p.events().iter().all(|&t| (0.0..=3.0).contains(&t)));
        }
    }

    #[test]
    fn fixed_stream_state_gives_identical_paths() {
        let m = paper_model();
        let a = sample_path(&m, 3.0, &mut rng::stream(5, 2)).unwrap();
        let b = sample_path(&m, 3.0, &mut rng::stream(5, 2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_out_of_range_theta() {
        let m = paper_model();
        assert!(sample_path(&m, 7.0, &mut rng::stream(1, 1)).is_err());
        assert!(sample_experiment(&m, 3.0, 0, 1).is_err());
    }

    #[test]
    fn experiments_are_deterministic() {
        let m = paper_model();
        let a = sample_experiment(&m, 3.0, 5, 42).unwrap();
        let b = sample_experiment(&m, 3.0, 5, 42).unwrap();
        assert_eq!(a, b);
        let mut x = Vec::new();
        let mut y = Vec::new();
        a.write_csv(&mut x).unwrap();
        b.write_csv(&mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn single_path_experiment_is_stream_one() {
        let m = paper_model();
        let e = sample_experiment(&m, 3.3, 1, 77).unwrap();
        let p = sample_path(&m, 3.3, &mut rng::stream(77, 1)).unwrap();
        assert_eq!(e.paths()[0], p);
    }

    #[test]
    fn parallel_and_serial_agree() {
        let m = builtin("constant-plus-slope", None).unwrap();
        let a = sample_experiment(&m, 1.0, 64, 3).unwrap();
        let b = sample_experiment_par(&m, 1.0, 64, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_round_trip_preserves_empty_paths() {
        let m = builtin("linear", None).unwrap();
        // λ = 1 on [0, 3]: empty paths occur with probability e^{-3}.
        let e = sample_experiment(&m, 1.0, 200, 11).unwrap();
        assert!(e.paths().iter().any(PathSample::is_empty));
        let dir = tempfile::tempdir().unwrap();
        e.save(dir.path(), "exp").unwrap();
        let back = Experiment::load(dir.path(), "exp", m.tau()).unwrap();
        assert_eq!(back, e);
    }

    #[test]
    fn path_validation() {
        assert!(PathSample::new(vec![0.5, 0.5], 1.0).is_err());
        assert!(PathSample::new(vec![0.5, 1.5], 1.0).is_err());
        let p = PathSample::new(vec![0.1, 0.6, 0.9], 1.0).unwrap();
        assert_eq!(p.count_in(0.0, 0.5), 1);
        assert_eq!(p.count_in(0.5, 1.0), 2);
    }
}
