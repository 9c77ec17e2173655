//! Model checkpoints: a versioned TSV of labeled vectors.
//!
//! Layout: a `sitkg-checkpoint` header carrying version, model kind, dim and
//! feature dim, then one row per parameter block:
//! `entity<TAB>label<TAB>v0,v1,...`, `relation<TAB>name<TAB>...`,
//! `transr<TAB>name<TAB>...` (row-major d×d), `gate<TAB>{w_gate|w_transform|bias}<TAB>...`,
//! and `literal<TAB>label<TAB>...` feature rows. Floats are written with
//! Rust's shortest round-trip formatting, so read(write(x)) = x exactly.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{relation_index, EmbedError, Layout, LiteralFeatures, ModelKind, ModelParams};
use crate::graph::RelationKind;

const HEADER: &str = "sitkg-checkpoint";
const VERSION: &str = "1";

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_floats(text: &str, path: &Path, line: usize) -> Result<Vec<f64>, EmbedError> {
    text.split(',')
        .map(|v| {
            v.parse::<f64>().map_err(|_| EmbedError::Parse {
                path: path.display().to_string(),
                line,
                message: format!("bad float {v:?}"),
            })
        })
        .collect()
}

pub fn render_checkpoint(params: &ModelParams) -> String {
    let mut out = format!(
        "{HEADER}\t{VERSION}\t{}\t{}\t{}\n",
        params.kind.name(),
        params.dim,
        params.layout.feat_dim
    );
    for (label, idx) in &params.entity_index {
        out.push_str(&format!(
            "entity\t{label}\t{}\n",
            join_floats(&params.data[params.layout.entity_range(*idx)])
        ));
    }
    for relation in RelationKind::ALL {
        out.push_str(&format!(
            "relation\t{}\t{}\n",
            relation.name(),
            join_floats(&params.data[params.layout.relation_range(relation_index(relation))])
        ));
    }
    if params.layout.transr_off.is_some() {
        for relation in RelationKind::ALL {
            out.push_str(&format!(
                "transr\t{}\t{}\n",
                relation.name(),
                join_floats(
                    &params.data
                        [params.layout.transr_range(relation_index(relation), params.dim)]
                )
            ));
        }
    }
    if params.layout.gate_off.is_some() {
        let (wg, wz, bias) = params.layout.gate_ranges();
        out.push_str(&format!("gate\tw_gate\t{}\n", join_floats(&params.data[wg])));
        out.push_str(&format!(
            "gate\tw_transform\t{}\n",
            join_floats(&params.data[wz])
        ));
        out.push_str(&format!("gate\tbias\t{}\n", join_floats(&params.data[bias])));
    }
    if let Some(literals) = &params.literals {
        for (label, vector) in literals.labels() {
            out.push_str(&format!("literal\t{label}\t{}\n", join_floats(vector)));
        }
    }
    out
}

pub fn write_checkpoint(params: &ModelParams, path: &Path) -> Result<(), EmbedError> {
    fs::write(path, render_checkpoint(params)).map_err(|source| EmbedError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_checkpoint(text: &str, path: &Path) -> Result<ModelParams, EmbedError> {
    let parse_err = |line: usize, message: String| EmbedError::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty checkpoint".into()))?;
    let cols: Vec<&str> = header.split('\t').collect();
    if cols.len() != 5 || cols[0] != HEADER {
        return Err(parse_err(1, "not a sitkg checkpoint".into()));
    }
    if cols[1] != VERSION {
        return Err(parse_err(1, format!("unsupported version {:?}", cols[1])));
    }
    let kind = ModelKind::parse(cols[2])
        .ok_or_else(|| parse_err(1, format!("unknown model kind {:?}", cols[2])))?;
    let dim: usize = cols[3]
        .parse()
        .map_err(|_| parse_err(1, format!("bad dim {:?}", cols[3])))?;
    let feat_dim: usize = cols[4]
        .parse()
        .map_err(|_| parse_err(1, format!("bad feature dim {:?}", cols[4])))?;

    let mut entities: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut relations: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut transr: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut gate: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut literals: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(parse_err(
                lineno,
                format!("expected 3 tab-separated columns, found {}", cols.len()),
            ));
        }
        let values = parse_floats(cols[2], path, lineno)?;
        let target = match cols[0] {
            "entity" => &mut entities,
            "relation" => &mut relations,
            "transr" => &mut transr,
            "gate" => &mut gate,
            "literal" => &mut literals,
            other => return Err(parse_err(lineno, format!("unknown row kind {other:?}"))),
        };
        if target.insert(cols[1].to_string(), values).is_some() {
            return Err(parse_err(lineno, format!("duplicate row {:?}", cols[1])));
        }
    }

    let layout = Layout::new(kind, dim, feat_dim, entities.len());
    let mut data = vec![0.0; layout.len];
    let mut entity_index = BTreeMap::new();
    let mut labels_by_idx = Vec::with_capacity(entities.len());
    for (i, (label, vector)) in entities.iter().enumerate() {
        if vector.len() != layout.entity_dim {
            return Err(parse_err(
                0,
                format!(
                    "entity {label:?} has {} values, expected {}",
                    vector.len(),
                    layout.entity_dim
                ),
            ));
        }
        data[layout.entity_range(i)].copy_from_slice(vector);
        entity_index.insert(label.clone(), i);
        labels_by_idx.push(label.clone());
    }
    for relation in RelationKind::ALL {
        let vector = relations
            .get(relation.name())
            .ok_or_else(|| parse_err(0, format!("missing relation row {}", relation.name())))?;
        if vector.len() != layout.relation_dim {
            return Err(parse_err(
                0,
                format!("relation {} has wrong arity", relation.name()),
            ));
        }
        data[layout.relation_range(relation_index(relation))].copy_from_slice(vector);
    }
    if kind.uses_projection_matrix() {
        for relation in RelationKind::ALL {
            let matrix = transr
                .get(relation.name())
                .ok_or_else(|| parse_err(0, format!("missing transr row {}", relation.name())))?;
            if matrix.len() != dim * dim {
                return Err(parse_err(
                    0,
                    format!("transr {} has wrong arity", relation.name()),
                ));
            }
            data[layout.transr_range(relation_index(relation), dim)].copy_from_slice(matrix);
        }
    }
    if kind.uses_literals() {
        let (wg_range, wz_range, b_range) = layout.gate_ranges();
        for (name, range) in [
            ("w_gate", wg_range),
            ("w_transform", wz_range),
            ("bias", b_range),
        ] {
            let values = gate
                .get(name)
                .ok_or_else(|| parse_err(0, format!("missing gate row {name:?}")))?;
            if values.len() != range.len() {
                return Err(parse_err(0, format!("gate row {name:?} has wrong arity")));
            }
            data[range].copy_from_slice(values);
        }
    }

    let literals = if kind.uses_literals() {
        Some(LiteralFeatures::from_table(feat_dim, literals))
    } else {
        None
    };
    Ok(ModelParams {
        kind,
        dim,
        entity_index,
        labels_by_idx,
        data,
        layout,
        literals,
    })
}

pub fn read_checkpoint(path: &Path) -> Result<ModelParams, EmbedError> {
    let text = fs::read_to_string(path).map_err(|source| EmbedError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_checkpoint(&text, path)
}
