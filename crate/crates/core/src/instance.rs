//! Instance files: one JSON document describing a pair, optional weights and
//! optional solver settings. Every field is checked before use and unknown
//! fields are rejected, with errors pointing at the offending path.

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::json::{matrix_from_json, rational_from_json};
use crate::linalg::{Flag, HermitianMetric, WeightVector};
use crate::rep_pair::{ParabolicRepPair, WeightedPair};
use crate::surface::{Generator, Presentation};

pub const SCHEMA_VERSION: u64 = 1;

const TOP_LEVEL: &[&str] = &["schema_version", "name", "genus", "punctures", "rank", "images", "flags", "weights", "solver"];
const SOLVER_FIELDS: &[&str] = &["tol", "max_steps", "initial_metric", "seed"];

fn schema(path: &str, message: impl Into<String>) -> Error {
    Error::Schema { path: path.to_string(), message: message.into() }
}

#[derive(Clone, Debug, Default)]
pub struct SolverSettings {
    pub tol: Option<f64>,
    pub max_steps: Option<usize>,
    pub initial_metric: Option<HermitianMetric>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub name: Option<String>,
    pub pair: ParabolicRepPair,
    pub weights: Option<Vec<WeightVector>>,
    pub solver: SolverSettings,
}

impl Instance {
    pub fn weighted(&self) -> Result<WeightedPair> {
        let w = self
            .weights
            .clone()
            .ok_or_else(|| schema("$/weights", "this command needs weights (in the instance or via --weights)"))?;
        WeightedPair::new(self.pair.clone(), w).map_err(|e| schema("$/weights", e.to_string()))
    }
}

fn object<'a>(v: &'a Value, path: &str, allowed: &[&str]) -> Result<&'a Map<String, Value>> {
    let map = v.as_object().ok_or_else(|| schema(path, "expected an object"))?;
    if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(schema(&format!("{path}/{k}"), "unknown field"));
    }
    Ok(map)
}

fn required<'a>(map: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    map.get(key).ok_or_else(|| schema(&format!("{path}/{key}"), "missing required field"))
}

fn count(v: &Value, path: &str) -> Result<usize> {
    v.as_u64().map(|n| n as usize).ok_or_else(|| schema(path, "expected a non-negative integer"))
}

/// Weights given as an array with one array of rationals per puncture.
pub fn parse_weights(v: &Value, path: &str, punctures: usize) -> Result<Vec<WeightVector>> {
    let arr = v.as_array().ok_or_else(|| schema(path, "expected one weight array per puncture"))?;
    if arr.len() != punctures {
        return Err(schema(path, format!("expected {punctures} weight arrays, found {}", arr.len())));
    }
    arr.iter()
        .enumerate()
        .map(|(i, w)| {
            let wp = format!("{path}/{i}");
            let entries = w.as_array().ok_or_else(|| schema(&wp, "expected an array of rationals"))?;
            let qs = entries
                .iter()
                .enumerate()
                .map(|(j, q)| rational_from_json(q, &format!("{wp}/{j}")))
                .collect::<Result<Vec<_>>>()?;
            WeightVector::new(qs).map_err(|e| schema(&wp, e.to_string()))
        })
        .collect()
}

/// Weights from a standalone file: either a bare array or {"weights": [...]}.
pub fn parse_weights_file(text: &str, punctures: usize) -> Result<Vec<WeightVector>> {
    let v: Value = serde_json::from_str(text).map_err(|e| schema("$", format!("malformed JSON: {e}")))?;
    match &v {
        Value::Object(_) => {
            let map = object(&v, "$", &["weights"])?;
            parse_weights(required(map, "weights", "$")?, "$/weights", punctures)
        }
        _ => parse_weights(&v, "$", punctures),
    }
}

fn parse_solver(v: &Value, rank: usize) -> Result<SolverSettings> {
    let map = object(v, "$/solver", SOLVER_FIELDS)?;
    let mut out = SolverSettings::default();
    if let Some(t) = map.get("tol") {
        let tol = t.as_f64().filter(|x| *x > 0.0).ok_or_else(|| schema("$/solver/tol", "expected a positive number"))?;
        out.tol = Some(tol);
    }
    if let Some(n) = map.get("max_steps") {
        out.max_steps = Some(count(n, "$/solver/max_steps")?);
    }
    if let Some(s) = map.get("seed") {
        out.seed = Some(s.as_u64().ok_or_else(|| schema("$/solver/seed", "expected a non-negative integer"))?);
    }
    if let Some(h) = map.get("initial_metric") {
        let m = matrix_from_json(h, "$/solver/initial_metric")?;
        if m.shape() != (rank, rank) {
            return Err(schema("$/solver/initial_metric", format!("expected a {rank}x{rank} matrix")));
        }
        out.initial_metric = Some(HermitianMetric::new(m).map_err(|e| schema("$/solver/initial_metric", e.to_string()))?);
    }
    Ok(out)
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let v: Value = serde_json::from_str(text).map_err(|e| schema("$", format!("malformed JSON: {e}")))?;
    let map = object(&v, "$", TOP_LEVEL)?;
    let version = required(map, "schema_version", "$")?
        .as_u64()
        .ok_or_else(|| schema("$/schema_version", "expected an integer"))?;
    if version != SCHEMA_VERSION {
        return Err(schema("$/schema_version", format!("unsupported version {version}, expected {SCHEMA_VERSION}")));
    }
    let name = match map.get("name") {
        Some(n) => Some(n.as_str().ok_or_else(|| schema("$/name", "expected a string"))?.to_string()),
        None => None,
    };
    let genus = count(required(map, "genus", "$")?, "$/genus")?;
    let punctures = count(required(map, "punctures", "$")?, "$/punctures")?;
    let rank = count(required(map, "rank", "$")?, "$/rank")?;
    if rank == 0 {
        return Err(schema("$/rank", "rank must be positive"));
    }
    let presentation = Presentation::new(genus, punctures).map_err(|e| schema("$/punctures", e.to_string()))?;

    let images_v = required(map, "images", "$")?;
    let names: Vec<String> = presentation.generators().iter().map(Generator::to_string).collect();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let images_map = object(images_v, "$/images", &name_refs)?;
    let mut images = Vec::with_capacity(names.len());
    for n in &names {
        let path = format!("$/images/{n}");
        let m = matrix_from_json(required(images_map, n, "$/images")?, &path)?;
        if m.shape() != (rank, rank) {
            return Err(schema(&path, format!("expected a {rank}x{rank} matrix, found {}x{}", m.nrows(), m.ncols())));
        }
        images.push(m);
    }

    let flags_v = required(map, "flags", "$")?;
    let flags_arr = flags_v.as_array().ok_or_else(|| schema("$/flags", "expected one flag per puncture"))?;
    if flags_arr.len() != punctures {
        return Err(schema("$/flags", format!("expected {punctures} flags, found {}", flags_arr.len())));
    }
    let mut flags = Vec::with_capacity(punctures);
    for (i, f) in flags_arr.iter().enumerate() {
        let fp = format!("$/flags/{i}");
        let levels = f.as_array().ok_or_else(|| schema(&fp, "expected an array of level bases"))?;
        let mut subspaces = Vec::with_capacity(levels.len());
        for (l, b) in levels.iter().enumerate() {
            let lp = format!("{fp}/{l}");
            let m = matrix_from_json(b, &lp)?;
            if m.nrows() != rank {
                return Err(schema(&lp, format!("basis vectors must have {rank} entries")));
            }
            subspaces.push(m);
        }
        flags.push(Flag::new(rank, subspaces).map_err(|e| schema(&fp, e.to_string()))?);
    }

    let pair = ParabolicRepPair::new(presentation, images, flags).map_err(|e| schema("$/images", e.to_string()))?;
    let weights = match map.get("weights") {
        Some(w) => Some(parse_weights(w, "$/weights", punctures)?),
        None => None,
    };
    let solver = match map.get("solver") {
        Some(s) => parse_solver(s, rank)?,
        None => SolverSettings::default(),
    };
    let inst = Instance { name, pair, weights, solver };
    if inst.weights.is_some() {
        inst.weighted()?;
    }
    Ok(inst)
}
