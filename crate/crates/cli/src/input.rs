//! Reading graphs, measures and grids from disk, with schema hints on failure.

use std::path::{Path, PathBuf};

use vvot::{DiscreteVectorMeasure, GridConfig, Interpolation, SimplexPoint, WeightedGraph};

use crate::CliError;

pub const GRAPH_SCHEMA: &str = r#"graph JSON: {"n": 2, "q": [[0, 1], [1, 0]]}"#;
pub const MEASURE_SCHEMA: &str = r#"measure JSON: {"atoms": [{"x": [0.0], "w": [0.5, 0.5]}, ...]}"#;
pub const DATASET_SCHEMA: &str = r#"dataset JSON: [{"atoms": [...]}, {"atoms": [...]}, ...]"#;
pub const GRID_SCHEMA: &str = r#"grid JSON: {"x_min": -1.0, "x_max": 1.0, "cells": 32}"#;

fn read(path: &Path, schema: &'static str) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input {
        path: path.to_path_buf(),
        reason: e.to_string(),
        schema,
    })
}

fn parsed<T>(path: &Path, schema: &'static str, r: vvot::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Input { path: path.to_path_buf(), reason: e.to_string(), schema })
}

pub fn graph(path: &Path) -> Result<WeightedGraph, CliError> {
    let text = read(path, GRAPH_SCHEMA)?;
    parsed(path, GRAPH_SCHEMA, WeightedGraph::from_json(&text))
}

/// The graph file if given, otherwise a single edge of weight 1.
pub fn graph_or_two_node(path: Option<&PathBuf>) -> Result<WeightedGraph, CliError> {
    match path {
        Some(p) => graph(p),
        None => Ok(WeightedGraph::two_node(1.0)?),
    }
}

pub fn measure(path: &Path) -> Result<DiscreteVectorMeasure, CliError> {
    let text = read(path, MEASURE_SCHEMA)?;
    parsed(path, MEASURE_SCHEMA, DiscreteVectorMeasure::from_json(&text))
}

pub fn dataset(path: &Path) -> Result<Vec<DiscreteVectorMeasure>, CliError> {
    let text = read(path, DATASET_SCHEMA)?;
    let items: Vec<serde_json::Value> = parsed(path, DATASET_SCHEMA, serde_json::from_str(&text).map_err(Into::into))?;
    items
        .iter()
        .map(|v| parsed(path, DATASET_SCHEMA, DiscreteVectorMeasure::from_json(&v.to_string())))
        .collect()
}

pub fn grid(path: &Path) -> Result<GridConfig, CliError> {
    let text = read(path, GRID_SCHEMA)?;
    parsed(path, GRID_SCHEMA, GridConfig::from_json(&text))
}

pub fn theta(s: &str) -> Result<Interpolation, String> {
    s.parse().map_err(|e: vvot::Error| e.to_string())
}

/// Comma-separated floats, e.g. `0.25,0.75`.
pub fn floats(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("'{v}': {e}")))
        .collect()
}

/// A simplex point given by its first `n − 1` barycentric coordinates.
pub fn simplex_point(s: &str) -> Result<SimplexPoint, String> {
    SimplexPoint::new(floats(s)?).map_err(|e| e.to_string())
}
