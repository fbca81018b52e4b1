//! Analytical workload estimator for capsule networks.
//!
//! Mapping assumed on an `rows x cols` array of multiply-accumulate units:
//!
//! * every value is one 8-bit word, so bytes and words coincide;
//! * weights are reused: a layer's whole weight set is resident while it
//!   runs and is fetched from DRAM once;
//! * the input feature map is resident for the whole layer;
//! * accumulators are output-stationary and hold the partial sums of one
//!   output tile, i.e. the full output plane of one group of `cols` output
//!   channels;
//! * each cycle the array reads `rows` data words and `cols` weights, and a
//!   partial sum is spilled once per `rows`-deep slice of its reduction.
//!
//! Usage therefore depends on a capsule layer's output only through the
//! product `out_caps * out_dim`: swapping the two leaves every number
//! unchanged.

use serde::{Deserialize, Serialize};

use crate::workload::{OperationProfile, PerStream, WorkloadTrace, DEFAULT_CLOCK_HZ};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerType {
    Conv,
    ConvCaps2d,
    ConvCaps3d,
    ClassCaps,
    Routing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDesc {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: LayerType,
    /// Input tensor as `[height, width, channels]`. Ignored for routing.
    #[serde(default)]
    pub input: [u64; 3],
    #[serde(default = "one")]
    pub kernel: u64,
    #[serde(default = "one")]
    pub stride: u64,
    /// Plain convolutions only.
    #[serde(default)]
    pub out_channels: u64,
    /// Capsule dimension of the input (capsule layers).
    #[serde(default = "one")]
    pub in_dim: u64,
    #[serde(default)]
    pub out_caps: u64,
    #[serde(default)]
    pub out_dim: u64,
    /// Routing layers only.
    #[serde(default)]
    pub iterations: u64,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDesc {
    pub network: String,
    #[serde(default)]
    pub clock_hz: Option<f64>,
    pub layers: Vec<LayerDesc>,
}

struct Tile {
    rows: u64,
    cols: u64,
}

impl Tile {
    #[allow(clippy::too_many_arguments)]
    fn op(
        &self,
        name: String,
        usage: (u64, u64, u64),
        macs: u64,
        reduction: u64,
        outputs: u64,
        fetched: (u64, u64),
        routing: bool,
    ) -> OperationProfile {
        let cycles = macs.div_ceil(self.rows * self.cols).max(1);
        let passes = reduction.div_ceil(self.rows).max(1);
        OperationProfile {
            name,
            usage: PerStream::new(usage.0, usage.1, usage.2),
            reads: PerStream::new(cycles * self.rows, cycles * self.cols, outputs * (passes - 1)),
            writes: PerStream::new(fetched.0, fetched.1, outputs * passes),
            cycles,
            routing_phase: routing,
        }
    }
}

fn out_extent(layer: &LayerDesc, extent: u64) -> Result<u64> {
    if layer.kernel == 0 || layer.stride == 0 || layer.kernel > extent {
        return Err(Error::validation(format!(
            "layer {}: kernel {} / stride {} do not fit input extent {extent}",
            layer.name, layer.kernel, layer.stride
        )));
    }
    Ok((extent - layer.kernel) / layer.stride + 1)
}

fn routed_name(layer: &LayerDesc, base: &str, i: u64) -> String {
    if layer.name.is_empty() {
        format!("{base}_{i}")
    } else {
        format!("{}:{base}_{i}", layer.name)
    }
}

/// Builds a trace from a layer list.
pub fn estimate_caps_workload(net: &NetworkDesc, array_rows: u64, array_cols: u64) -> Result<WorkloadTrace> {
    if array_rows == 0 || array_cols == 0 {
        return Err(Error::validation("array dimensions must be positive"));
    }
    let tile = Tile { rows: array_rows, cols: array_cols };
    let mut ops = Vec::new();
    let mut shape: Option<[u64; 3]> = None;
    // votes of the last capsule layer: (input capsules, output capsules, out_dim)
    let mut votes: Option<(u64, u64, u64)> = None;

    for layer in &net.layers {
        if layer.kind != LayerType::Routing {
            if let Some(prev) = shape {
                if prev != layer.input {
                    return Err(Error::validation(format!(
                        "layer {}: input {:?} does not match previous output {:?}",
                        layer.name, layer.input, prev
                    )));
                }
            }
        }
        let [h, w, c] = layer.input;
        match layer.kind {
            LayerType::Conv | LayerType::ConvCaps2d => {
                let cout = if layer.kind == LayerType::Conv { layer.out_channels } else { layer.out_caps * layer.out_dim };
                if cout == 0 || c == 0 {
                    return Err(Error::validation(format!("layer {}: zero channels", layer.name)));
                }
                let (oh, ow) = (out_extent(layer, h)?, out_extent(layer, w)?);
                let k2 = layer.kernel * layer.kernel;
                let weights = k2 * c * cout;
                let data = h * w * c;
                ops.push(tile.op(
                    layer.name.clone(),
                    (data, weights, oh * ow * cout.min(array_cols)),
                    oh * ow * cout * k2 * c,
                    k2 * c,
                    oh * ow * cout,
                    (data, weights),
                    false,
                ));
                shape = Some([oh, ow, cout]);
                votes = None;
            }
            LayerType::ConvCaps3d => {
                if layer.in_dim == 0 || c % layer.in_dim != 0 || layer.out_caps * layer.out_dim == 0 {
                    return Err(Error::validation(format!("layer {}: bad capsule shape", layer.name)));
                }
                let in_caps = c / layer.in_dim;
                let cout = layer.out_caps * layer.out_dim;
                let (oh, ow) = (out_extent(layer, h)?, out_extent(layer, w)?);
                let k2 = layer.kernel * layer.kernel;
                let weights = k2 * layer.in_dim * cout;
                let data = h * w * c;
                ops.push(tile.op(
                    layer.name.clone(),
                    (data, weights, oh * ow * in_caps * cout.min(array_cols)),
                    oh * ow * in_caps * cout * k2 * layer.in_dim,
                    k2 * layer.in_dim,
                    oh * ow * in_caps * cout,
                    (data, weights),
                    false,
                ));
                shape = Some([oh, ow, cout]);
                votes = Some((oh * ow * in_caps, oh * ow * layer.out_caps, layer.out_dim));
            }
            LayerType::ClassCaps => {
                if layer.in_dim == 0 || c % layer.in_dim != 0 || layer.out_caps * layer.out_dim == 0 {
                    return Err(Error::validation(format!("layer {}: bad capsule shape", layer.name)));
                }
                let n = h * w * (c / layer.in_dim);
                let (m, dout) = (layer.out_caps, layer.out_dim);
                let weights = n * m * layer.in_dim * dout;
                let data = n * layer.in_dim;
                ops.push(tile.op(
                    layer.name.clone(),
                    (data, weights, n * m * dout),
                    n * m * layer.in_dim * dout,
                    layer.in_dim,
                    n * m * dout,
                    (data, weights),
                    false,
                ));
                shape = Some([1, 1, m * dout]);
                votes = Some((n, m, dout));
            }
            LayerType::Routing => {
                let (n, m, dout) = votes.ok_or_else(|| {
                    Error::validation(format!("layer {}: routing must follow a capsule layer with votes", layer.name))
                })?;
                if layer.iterations == 0 {
                    return Err(Error::validation(format!("layer {}: zero routing iterations", layer.name)));
                }
                let v = n * m * dout;
                for i in 1..=layer.iterations {
                    ops.push(tile.op(routed_name(layer, "Sum+Squash", i), (v, n * m, m * dout), v, n, m * dout, (0, 0), true));
                    let mut upd = tile.op(routed_name(layer, "Update+Softmax", i), (v, n * m, n * m), v, dout, n * m, (0, 0), true);
                    upd.writes.weight = n * m;
                    ops.push(upd);
                }
                votes = None;
            }
        }
    }
    let mut t = WorkloadTrace::new(net.network.clone(), net.clock_hz.unwrap_or(DEFAULT_CLOCK_HZ), ops)?;
    let meta = [
        ("generator", "analytical estimator".to_string()),
        ("array", format!("{array_rows}x{array_cols}")),
        ("word_bytes", "1 (8-bit datapath, not verified against hardware)".to_string()),
        (
            "mapping",
            "whole-layer weight reuse; resident input map; output-stationary accumulators holding one \
             output plane per column group"
                .to_string(),
        ),
    ];
    for (k, v) in meta {
        t.metadata.insert(k.to_string(), v);
    }
    Ok(t)
}

/// The original three-layer dynamic-routing capsule network with one routing
/// block (28x28 grey-scale input, 10 classes).
pub fn google_capsnet() -> NetworkDesc {
    let layer = |name: &str, kind, input, kernel, stride| LayerDesc {
        name: name.into(),
        kind,
        input,
        kernel,
        stride,
        out_channels: 0,
        in_dim: 1,
        out_caps: 0,
        out_dim: 0,
        iterations: 0,
    };
    NetworkDesc {
        network: "CapsNet".into(),
        clock_hz: None,
        layers: vec![
            LayerDesc { out_channels: 256, ..layer("Conv1", LayerType::Conv, [28, 28, 1], 9, 1) },
            LayerDesc { out_caps: 32, out_dim: 8, ..layer("Prim", LayerType::ConvCaps2d, [20, 20, 256], 9, 2) },
            LayerDesc { in_dim: 8, out_caps: 10, out_dim: 16, ..layer("Class", LayerType::ClassCaps, [6, 6, 256], 1, 1) },
            LayerDesc { iterations: 3, ..layer("", LayerType::Routing, [0, 0, 0], 1, 1) },
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(kind: LayerType, input: [u64; 3]) -> LayerDesc {
        LayerDesc {
            name: "L".into(),
            kind,
            input,
            kernel: 1,
            stride: 1,
            out_channels: 0,
            in_dim: 1,
            out_caps: 0,
            out_dim: 0,
            iterations: 0,
        }
    }

    #[test]
    fn classcaps_weights_closed_form() {
        let (n, m, din, dout) = (36u64, 10u64, 8u64, 16u64);
        let l = LayerDesc { in_dim: din, out_caps: m, out_dim: dout, ..base(LayerType::ClassCaps, [6, 6, 8]) };
        let net = NetworkDesc { network: "x".into(), clock_hz: None, layers: vec![l] };
        let t = estimate_caps_workload(&net, 16, 16).unwrap();
        assert_eq!(t.operations[0].usage.weight, n * m * din * dout);
    }

    #[test]
    fn minimal_conv() {
        let l = LayerDesc { out_channels: 1, ..base(LayerType::Conv, [1, 1, 1]) };
        let net = NetworkDesc { network: "x".into(), clock_hz: None, layers: vec![l] };
        let t = estimate_caps_workload(&net, 16, 16).unwrap();
        assert_eq!(t.operations[0].usage.weight, 1);
        assert!(t.operations[0].cycles >= 1);
    }

    #[test]
    fn google_capsnet_shape() {
        let t = estimate_caps_workload(&google_capsnet(), 16, 16).unwrap();
        let names: Vec<_> = t.operations.iter().map(|o| o.name.as_str()).collect();
        assert_eq!(names[..3], ["Conv1", "Prim", "Class"]);
        assert_eq!(t.operations.len(), 9);
        assert!(t.operations[3..].iter().all(|o| o.routing_phase));
        let peak = crate::workload::peak_usage(&t);
        // 9x9x256x256 primary-capsule kernels outweigh the class layer
        assert_eq!(peak.max_weight, 9 * 9 * 256 * 256);
        assert_eq!(t.operations[2].usage.weight, 1152 * 10 * 8 * 16);
    }

    #[test]
    fn shape_mismatch() {
        let a = LayerDesc { out_channels: 4, ..base(LayerType::Conv, [4, 4, 1]) };
        let b = LayerDesc { out_channels: 4, ..base(LayerType::Conv, [4, 4, 2]) };
        let net = NetworkDesc { network: "x".into(), clock_hz: None, layers: vec![a, b] };
        assert!(estimate_caps_workload(&net, 16, 16).is_err());
    }

    #[test]
    fn routing_needs_votes() {
        let r = LayerDesc { iterations: 3, ..base(LayerType::Routing, [0, 0, 0]) };
        let net = NetworkDesc { network: "x".into(), clock_hz: None, layers: vec![r] };
        assert!(estimate_caps_workload(&net, 16, 16).is_err());
    }

    #[test]
    fn unknown_type_rejected() {
        let text = r#"{"network":"x","layers":[{"name":"a","type":"lstm","input":[1,1,1]}]}"#;
        assert!(serde_json::from_str::<NetworkDesc>(text).is_err());
    }
}
