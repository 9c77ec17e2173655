//! Scoring functions and their analytic gradients.
//!
//! Every function here works on the flat parameter buffer via the layout in
//! [`super::ModelParams`]; `score_with_grad` accumulates
//! `upstream · ∂score/∂θ` into a gradient buffer of the same shape. Complex
//! vectors are interleaved (re, im).

use super::{relation_index, ModelKind, ModelParams};

/// Forward score of an index triple.
pub(crate) fn score_indices(params: &ModelParams, h: usize, r: usize, t: usize) -> f64 {
    score_inner(params, h, r, t, None)
}

/// Forward score plus gradient accumulation (`grad` has `params.data` shape).
pub(crate) fn score_with_grad(
    params: &ModelParams,
    h: usize,
    r: usize,
    t: usize,
    upstream: f64,
    grad: &mut [f64],
) -> f64 {
    score_inner(params, h, r, t, Some((upstream, grad)))
}

struct GateCache {
    x: Vec<f64>,
    g: Vec<f64>,
    z: Vec<f64>,
    out: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn gate_forward(params: &ModelParams, entity: usize) -> GateCache {
    let layout = &params.layout;
    let ed = layout.entity_dim;
    let fd = layout.feat_dim;
    let in_dim = ed + fd;
    let e = &params.data[layout.entity_range(entity)];
    let label = &params.labels_by_idx[entity];
    let feats = params
        .literals
        .as_ref()
        .and_then(|l| l.get(label))
        .expect("literal features exist for every entity");
    let mut x = Vec::with_capacity(in_dim);
    x.extend_from_slice(e);
    x.extend_from_slice(feats);

    let (wg_range, wz_range, b_range) = layout.gate_ranges();
    let wg = &params.data[wg_range];
    let wz = &params.data[wz_range];
    let bias = &params.data[b_range];

    let mut g = vec![0.0; ed];
    let mut z = vec![0.0; ed];
    let mut out = vec![0.0; ed];
    for i in 0..ed {
        let row_g = &wg[i * in_dim..(i + 1) * in_dim];
        let row_z = &wz[i * in_dim..(i + 1) * in_dim];
        let mut acc_g = bias[i];
        let mut acc_z = 0.0;
        for j in 0..in_dim {
            acc_g += row_g[j] * x[j];
            acc_z += row_z[j] * x[j];
        }
        g[i] = sigmoid(acc_g);
        z[i] = acc_z.tanh();
        out[i] = g[i] * z[i] + (1.0 - g[i]) * e[i];
    }
    GateCache { x, g, z, out }
}

/// Backpropagates `d_out` (gradient w.r.t. the gated vector) into the
/// entity row and gate parameters.
fn gate_backward(
    params: &ModelParams,
    entity: usize,
    cache: &GateCache,
    d_out: &[f64],
    grad: &mut [f64],
) {
    let layout = &params.layout;
    let ed = layout.entity_dim;
    let fd = layout.feat_dim;
    let in_dim = ed + fd;
    let (wg_range, wz_range, b_range) = layout.gate_ranges();
    let entity_range = layout.entity_range(entity);
    let e = &params.data[entity_range.clone()];

    let mut d_x = vec![0.0; in_dim];
    for i in 0..ed {
        let u = d_out[i];
        let d_g = u * (cache.z[i] - e[i]);
        let d_z = u * cache.g[i];
        // Direct path through (1 − g) ∘ e.
        grad[entity_range.start + i] += u * (1.0 - cache.g[i]);

        let s_g = d_g * cache.g[i] * (1.0 - cache.g[i]);
        let s_z = d_z * (1.0 - cache.z[i] * cache.z[i]);
        grad[b_range.start + i] += s_g;
        let wg_row = wg_range.start + i * in_dim;
        let wz_row = wz_range.start + i * in_dim;
        for j in 0..in_dim {
            grad[wg_row + j] += s_g * cache.x[j];
            grad[wz_row + j] += s_z * cache.x[j];
            d_x[j] += s_g * params.data[wg_row + j] + s_z * params.data[wz_row + j];
        }
    }
    for j in 0..ed {
        grad[entity_range.start + j] += d_x[j];
    }
}

fn score_inner(
    params: &ModelParams,
    h: usize,
    r: usize,
    t: usize,
    mut backward: Option<(f64, &mut [f64])>,
) -> f64 {
    let layout = &params.layout;
    let data = &params.data;
    let h_range = layout.entity_range(h);
    let t_range = layout.entity_range(t);
    let r_range = layout.relation_range(r);

    match params.kind {
        ModelKind::TransE => {
            let (eh, wr, et) = (&data[h_range.clone()], &data[r_range.clone()], &data[t_range.clone()]);
            let diff: Vec<f64> = (0..eh.len()).map(|i| eh[i] + wr[i] - et[i]).collect();
            let norm = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
            if let Some((upstream, grad)) = backward.as_mut() {
                if norm > 0.0 {
                    let factor = -*upstream / norm;
                    for i in 0..diff.len() {
                        let d = factor * diff[i];
                        grad[h_range.start + i] += d;
                        grad[r_range.start + i] += d;
                        grad[t_range.start + i] -= d;
                    }
                }
            }
            -norm
        }
        ModelKind::TransR => {
            let dim = params.dim;
            let m_range = layout.transr_range(r, dim);
            let (eh, wr, et) = (&data[h_range.clone()], &data[r_range.clone()], &data[t_range.clone()]);
            let m = &data[m_range.clone()];
            let delta: Vec<f64> = (0..dim).map(|i| eh[i] - et[i]).collect();
            let mut u = vec![0.0; dim];
            for i in 0..dim {
                let row = &m[i * dim..(i + 1) * dim];
                u[i] = wr[i] + row.iter().zip(&delta).map(|(a, b)| a * b).sum::<f64>();
            }
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if let Some((upstream, grad)) = backward.as_mut() {
                if norm > 0.0 {
                    let q: Vec<f64> = u.iter().map(|v| v / norm).collect();
                    for i in 0..dim {
                        grad[r_range.start + i] += -*upstream * q[i];
                        for j in 0..dim {
                            grad[m_range.start + i * dim + j] += -*upstream * q[i] * delta[j];
                        }
                    }
                    for j in 0..dim {
                        let mut acc = 0.0;
                        for i in 0..dim {
                            acc += q[i] * m[i * dim + j];
                        }
                        grad[h_range.start + j] += -*upstream * acc;
                        grad[t_range.start + j] += *upstream * acc;
                    }
                }
            }
            -norm
        }
        ModelKind::DistMult => {
            let (eh, wr, et) = (&data[h_range.clone()], &data[r_range.clone()], &data[t_range.clone()]);
            let s: f64 = (0..eh.len()).map(|i| eh[i] * wr[i] * et[i]).sum();
            if let Some((upstream, grad)) = backward.as_mut() {
                for i in 0..eh.len() {
                    grad[h_range.start + i] += *upstream * wr[i] * et[i];
                    grad[r_range.start + i] += *upstream * eh[i] * et[i];
                    grad[t_range.start + i] += *upstream * eh[i] * wr[i];
                }
            }
            s
        }
        ModelKind::ComplEx => {
            let (eh, wr, et) = (&data[h_range.clone()], &data[r_range.clone()], &data[t_range.clone()]);
            let mut s = 0.0;
            if let Some((upstream, grad)) = backward.as_mut() {
                for i in 0..params.dim {
                    let (a, b) = (eh[2 * i], eh[2 * i + 1]);
                    let (c, d) = (wr[2 * i], wr[2 * i + 1]);
                    let (e, f) = (et[2 * i], et[2 * i + 1]);
                    s += e * (a * c - b * d) + f * (a * d + b * c);
                    grad[h_range.start + 2 * i] += *upstream * (c * e + d * f);
                    grad[h_range.start + 2 * i + 1] += *upstream * (-d * e + c * f);
                    grad[r_range.start + 2 * i] += *upstream * (a * e + b * f);
                    grad[r_range.start + 2 * i + 1] += *upstream * (-b * e + a * f);
                    grad[t_range.start + 2 * i] += *upstream * (a * c - b * d);
                    grad[t_range.start + 2 * i + 1] += *upstream * (a * d + b * c);
                }
            } else {
                for i in 0..params.dim {
                    let (a, b) = (eh[2 * i], eh[2 * i + 1]);
                    let (c, d) = (wr[2 * i], wr[2 * i + 1]);
                    let (e, f) = (et[2 * i], et[2 * i + 1]);
                    s += e * (a * c - b * d) + f * (a * d + b * c);
                }
            }
            s
        }
        ModelKind::RotatE => {
            let (eh, wr, et) = (&data[h_range.clone()], &data[r_range.clone()], &data[t_range.clone()]);
            let mut d_re = vec![0.0; params.dim];
            let mut d_im = vec![0.0; params.dim];
            let mut sq = 0.0;
            for i in 0..params.dim {
                let (a, b) = (eh[2 * i], eh[2 * i + 1]);
                let (c, d) = (wr[2 * i], wr[2 * i + 1]);
                let (e, f) = (et[2 * i], et[2 * i + 1]);
                d_re[i] = a * c - b * d - e;
                d_im[i] = a * d + b * c - f;
                sq += d_re[i] * d_re[i] + d_im[i] * d_im[i];
            }
            let norm = sq.sqrt();
            if let Some((upstream, grad)) = backward.as_mut() {
                if norm > 0.0 {
                    let factor = -*upstream / norm;
                    for i in 0..params.dim {
                        let (a, b) = (eh[2 * i], eh[2 * i + 1]);
                        let (c, d) = (wr[2 * i], wr[2 * i + 1]);
                        let (re, im) = (d_re[i], d_im[i]);
                        grad[h_range.start + 2 * i] += factor * (re * c + im * d);
                        grad[h_range.start + 2 * i + 1] += factor * (im * c - re * d);
                        grad[r_range.start + 2 * i] += factor * (re * a + im * b);
                        grad[r_range.start + 2 * i + 1] += factor * (im * a - re * b);
                        grad[t_range.start + 2 * i] -= factor * re;
                        grad[t_range.start + 2 * i + 1] -= factor * im;
                    }
                }
            }
            -norm
        }
        ModelKind::DistMultLiteral => {
            let head = gate_forward(params, h);
            let tail = gate_forward(params, t);
            let wr = &data[r_range.clone()];
            let s: f64 = (0..head.out.len())
                .map(|i| head.out[i] * wr[i] * tail.out[i])
                .sum();
            if let Some((upstream, grad)) = backward.as_mut() {
                let mut d_head = vec![0.0; head.out.len()];
                let mut d_tail = vec![0.0; tail.out.len()];
                for i in 0..head.out.len() {
                    d_head[i] = *upstream * wr[i] * tail.out[i];
                    d_tail[i] = *upstream * head.out[i] * wr[i];
                    grad[r_range.start + i] += *upstream * head.out[i] * tail.out[i];
                }
                gate_backward(params, h, &head, &d_head, grad);
                gate_backward(params, t, &tail, &d_tail, grad);
            }
            s
        }
        ModelKind::ComplExLiteral => {
            let head = gate_forward(params, h);
            let tail = gate_forward(params, t);
            let wr = &data[r_range.clone()];
            let mut s = 0.0;
            if let Some((upstream, grad)) = backward.as_mut() {
                let mut d_head = vec![0.0; head.out.len()];
                let mut d_tail = vec![0.0; tail.out.len()];
                for i in 0..params.dim {
                    let (a, b) = (head.out[2 * i], head.out[2 * i + 1]);
                    let (c, d) = (wr[2 * i], wr[2 * i + 1]);
                    let (e, f) = (tail.out[2 * i], tail.out[2 * i + 1]);
                    s += e * (a * c - b * d) + f * (a * d + b * c);
                    d_head[2 * i] = *upstream * (c * e + d * f);
                    d_head[2 * i + 1] = *upstream * (-d * e + c * f);
                    grad[r_range.start + 2 * i] += *upstream * (a * e + b * f);
                    grad[r_range.start + 2 * i + 1] += *upstream * (-b * e + a * f);
                    d_tail[2 * i] = *upstream * (a * c - b * d);
                    d_tail[2 * i + 1] = *upstream * (a * d + b * c);
                }
                gate_backward(params, h, &head, &d_head, grad);
                gate_backward(params, t, &tail, &d_tail, grad);
            } else {
                for i in 0..params.dim {
                    let (a, b) = (head.out[2 * i], head.out[2 * i + 1]);
                    let (c, d) = (wr[2 * i], wr[2 * i + 1]);
                    let (e, f) = (tail.out[2 * i], tail.out[2 * i + 1]);
                    s += e * (a * c - b * d) + f * (a * d + b * c);
                }
            }
            s
        }
    }
}

/// Renormalizes every RotatE relation component to unit modulus.
pub(crate) fn project_rotate_relations(params: &mut ModelParams) {
    if params.kind != ModelKind::RotatE {
        return;
    }
    for relation in crate::graph::RelationKind::ALL {
        let range = params.layout.relation_range(relation_index(relation));
        let slice = &mut params.data[range];
        for i in 0..slice.len() / 2 {
            let (re, im) = (slice[2 * i], slice[2 * i + 1]);
            let modulus = (re * re + im * im).sqrt();
            if modulus > 1e-300 {
                slice[2 * i] = re / modulus;
                slice[2 * i + 1] = im / modulus;
            } else {
                slice[2 * i] = 1.0;
                slice[2 * i + 1] = 0.0;
            }
        }
    }
}
