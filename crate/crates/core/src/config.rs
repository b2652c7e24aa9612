//! Run configuration: flat `key = value` text grouped under `[section]`
//! headers, `#` starts a comment. Every key has a default, so an empty file
//! is a valid configuration.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Config {
    pub preset: String,
    pub seed: u64,
    pub workers: usize,
    pub tol: f64,
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub delta: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    /// Empty means `l = m^2` for every wing length.
    pub l: Vec<f64>,
    pub wing_ny: usize,
    pub flow_nx: usize,
    pub flow_ny: usize,
    pub d_list: Vec<u32>,
    pub slice_n: usize,
    pub slice_nt: usize,
    pub paths: usize,
    pub dt: f64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            preset: "perturbed".into(),
            seed: 20_240_601,
            workers: 1,
            tol: 1e-10,
            nx: 64,
            ny: 64,
            nt: 128,
            delta: 0.125,
            eps: 0.05,
            m: vec![2.0, 4.0, 8.0],
            l: Vec::new(),
            wing_ny: 32,
            flow_nx: 16,
            flow_ny: 64,
            d_list: Vec::new(),
            slice_n: 24,
            slice_nt: 16,
            paths: 10_000,
            dt: 1e-4,
        }
    }
}

/// `(section, key, meaning)` for every accepted key.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("run", "preset", "pair for `eig`: rectangle, perturbed or wing"),
    ("run", "seed", "master seed for Monte Carlo and trial fields"),
    ("run", "workers", "worker threads (0 = all cores)"),
    ("run", "tol", "eigensolver residual tolerance"),
    ("grid", "nx", "cells in x on the base rectangle"),
    ("grid", "ny", "cells in y on the base rectangle"),
    ("grid", "nt", "time steps on [0, 1] for heat flows"),
    ("perturbation", "delta", "mollifier width of the profile q"),
    ("perturbation", "eps", "perturbation size"),
    ("wings", "m", "comma-separated wing lengths"),
    ("wings", "l", "comma-separated steepness values; empty means l = m^2"),
    ("wings", "ny", "cells in y for the wing solves"),
    ("limit", "flow_nx", "x cells of the flow grid on [0, 1]"),
    ("limit", "flow_ny", "y cells of the flow grid on [-1, 1] (even)"),
    ("barrel", "d_list", "comma-separated barrel dimensions; empty skips the sweep"),
    ("barrel", "slice_n", "base cells per axis for slice solves"),
    ("barrel", "slice_nt", "graded cells in the slice coordinate t"),
    ("mc", "paths", "Monte Carlo paths per estimate"),
    ("mc", "dt", "SDE time step"),
];

/// Key table formatted for `--help`.
pub fn key_help() -> String {
    let mut s = String::from("Config file keys ([section] then key = value):\n");
    let mut last = "";
    for (sec, key, doc) in KEYS {
        if *sec != last {
            let _ = writeln!(s, "  [{sec}]");
            last = sec;
        }
        let _ = writeln!(s, "    {key:<10} {doc}");
    }
    s
}

fn parse_one<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("cannot parse {key} = {v:?}")))
}

pub fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse_one(key, s)).collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Config::default();
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                section = name.trim().to_string();
                if !KEYS.iter().any(|(s, _, _)| *s == section) {
                    return Err(Error::Config(format!("line {}: unknown section [{section}]", n + 1)));
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            c.set(&section, key.trim(), value.trim()).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn set(&mut self, section: &str, key: &str, v: &str) -> Result<()> {
        let full = format!("{section}.{key}");
        match full.as_str() {
            "run.preset" => self.preset = v.to_string(),
            "run.seed" => self.seed = parse_one(&full, v)?,
            "run.workers" => self.workers = parse_one(&full, v)?,
            "run.tol" => self.tol = parse_one(&full, v)?,
            "grid.nx" => self.nx = parse_one(&full, v)?,
            "grid.ny" => self.ny = parse_one(&full, v)?,
            "grid.nt" => self.nt = parse_one(&full, v)?,
            "perturbation.delta" => self.delta = parse_one(&full, v)?,
            "perturbation.eps" => self.eps = parse_one(&full, v)?,
            "wings.m" => self.m = parse_list(&full, v)?,
            "wings.l" => self.l = parse_list(&full, v)?,
            "wings.ny" => self.wing_ny = parse_one(&full, v)?,
            "limit.flow_nx" => self.flow_nx = parse_one(&full, v)?,
            "limit.flow_ny" => self.flow_ny = parse_one(&full, v)?,
            "barrel.d_list" => self.d_list = parse_list(&full, v)?,
            "barrel.slice_n" => self.slice_n = parse_one(&full, v)?,
            "barrel.slice_nt" => self.slice_nt = parse_one(&full, v)?,
            "mc.paths" => self.paths = parse_one(&full, v)?,
            "mc.dt" => self.dt = parse_one(&full, v)?,
            _ => return Err(Error::Config(format!("unknown key {full}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.nx == 0 || self.ny == 0 || self.wing_ny == 0 || self.slice_n == 0 {
            return bad("grid sizes must be positive".into());
        }
        if !(self.tol > 0.0) || !(self.dt > 0.0) || !(self.delta > 0.0) {
            return bad("tol, dt and delta must be positive".into());
        }
        if !(self.eps >= 0.0) {
            return bad(format!("eps = {} must be nonnegative", self.eps));
        }
        if self.m.is_empty() {
            return bad("wings.m is empty".into());
        }
        if !self.l.is_empty() && self.l.len() != self.m.len() {
            return bad(format!("wings.l has {} entries for {} wing lengths", self.l.len(), self.m.len()));
        }
        Ok(())
    }

    /// `(m, l)` pairs of the wing sweep.
    pub fn wing_pairs(&self) -> Vec<(f64, f64)> {
        if self.l.is_empty() {
            self.m.iter().map(|&m| (m, m * m)).collect()
        } else {
            self.m.iter().copied().zip(self.l.iter().copied()).collect()
        }
    }

    /// Canonical text; `Config::parse(&c.to_text()) == c`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[run]\npreset = {}\nseed = {}\nworkers = {}\ntol = {:e}\n", self.preset, self.seed, self.workers, self.tol);
        let _ = writeln!(s, "[grid]\nnx = {}\nny = {}\nnt = {}\n", self.nx, self.ny, self.nt);
        let _ = writeln!(s, "[perturbation]\ndelta = {}\neps = {}\n", self.delta, self.eps);
        let _ = writeln!(s, "[wings]\nm = {}\nl = {}\nny = {}\n", join(&self.m), join(&self.l), self.wing_ny);
        let _ = writeln!(s, "[limit]\nflow_nx = {}\nflow_ny = {}\n", self.flow_nx, self.flow_ny);
        let _ = writeln!(s, "[barrel]\nd_list = {}\nslice_n = {}\nslice_nt = {}\n", join(&self.d_list), self.slice_n, self.slice_nt);
        let _ = writeln!(s, "[mc]\npaths = {}\ndt = {:e}", self.paths, self.dt);
        s
    }
}
