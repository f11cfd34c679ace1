//! Published loss tables: mean (standard error) over 400 replications.

use fsir::federation::Mechanism;
use fsir::simgen::Model;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCell {
    pub model: Model,
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub mechanism: Mechanism,
    pub mean: f64,
    pub se: f64,
}

/// Client counts of every table, in column order.
pub const CLIENT_COUNTS: [usize; 4] = [1, 10, 50, 100];

/// `(ε, varies n (true) or p (false))` for tables 1 to 4.
pub fn table_setting(which: u8) -> Option<(f64, bool)> {
    match which {
        1 => Some((1.0, true)),
        2 => Some((2.0, true)),
        3 => Some((1.0, false)),
        4 => Some((2.0, false)),
        _ => None,
    }
}

// (model, n or p, [iid K=1,10,50,100, vgm K=1,10,50,100] as (mean, se))
type Row = (Model, usize, [(f64, f64); 8]);
const TABLE_1: &[Row] = &[
    (Model::I, 500, [(1.306, 0.13), (1.268, 0.15), (0.650, 0.19), (0.382, 0.10), (1.290, 0.14), (1.298, 0.12), (0.598, 0.17), (0.384, 0.09)]),
    (Model::I, 1000, [(1.260, 0.15), (0.547, 0.13), (0.206, 0.05), (0.141, 0.03), (1.277, 0.16), (0.500, 0.15), (0.190, 0.04), (0.128, 0.03)]),
    (Model::I, 2500, [(1.131, 0.23), (0.327, 0.07), (0.135, 0.03), (0.091, 0.02), (1.092, 0.25), (0.287, 0.08), (0.115, 0.03), (0.078, 0.02)]),
    (Model::I, 5000, [(0.563, 0.13), (0.186, 0.04), (0.079, 0.02), (0.054, 0.01), (0.428, 0.11), (0.140, 0.03), (0.058, 0.01), (0.040, 0.01)]),
    (Model::II, 500, [(1.360, 0.07), (1.374, 0.06), (1.292, 0.14), (1.061, 0.22), (1.328, 0.10), (1.275, 0.14), (1.167, 0.23), (0.760, 0.26)]),
    (Model::II, 1000, [(1.370, 0.06), (1.311, 0.11), (0.788, 0.18), (0.565, 0.14), (1.274, 0.16), (1.057, 0.27), (0.369, 0.09), (0.241, 0.07)]),
    (Model::II, 2500, [(1.381, 0.05), (1.107, 0.15), (0.614, 0.15), (0.445, 0.10), (1.263, 0.16), (0.547, 0.18), (0.230, 0.06), (0.163, 0.04)]),
    (Model::II, 5000, [(1.331, 0.10), (0.854, 0.16), (0.438, 0.11), (0.308, 0.08), (0.938, 0.28), (0.281, 0.08), (0.136, 0.03), (0.111, 0.02)]),
    (Model::III, 500, [(1.780, 0.13), (1.760, 0.13), (1.364, 0.18), (1.156, 0.23), (1.773, 0.13), (1.716, 0.14), (1.303, 0.18), (0.952, 0.25)]),
    (Model::III, 1000, [(1.750, 0.13), (1.353, 0.18), (0.846, 0.23), (0.561, 0.16), (1.648, 0.20), (0.754, 0.14), (0.280, 0.05), (0.193, 0.04)]),
    (Model::III, 2500, [(1.628, 0.18), (1.142, 0.22), (0.577, 0.18), (0.387, 0.09), (1.365, 0.25), (0.422, 0.08), (0.169, 0.03), (0.113, 0.02)]),
    (Model::III, 5000, [(1.347, 0.17), (0.835, 0.25), (0.355, 0.09), (0.237, 0.06), (0.641, 0.13), (0.215, 0.04), (0.087, 0.02), (0.062, 0.01)]),
    (Model::IV, 500, [(1.762, 0.13), (1.704, 0.16), (1.452, 0.25), (1.089, 0.24), (1.715, 0.17), (1.679, 0.17), (1.431, 0.21), (0.957, 0.25)]),
    (Model::IV, 1000, [(1.778, 0.13), (1.427, 0.22), (0.577, 0.11), (0.401, 0.07), (1.698, 0.16), (1.241, 0.27), (0.459, 0.08), (0.314, 0.06)]),
    (Model::IV, 2500, [(1.724, 0.16), (0.974, 0.18), (0.421, 0.08), (0.302, 0.06), (1.579, 0.22), (0.735, 0.18), (0.287, 0.06), (0.211, 0.04)]),
    (Model::IV, 5000, [(1.481, 0.21), (0.613, 0.11), (0.283, 0.05), (0.208, 0.04), (1.174, 0.26), (0.361, 0.07), (0.178, 0.03), (0.148, 0.02)]),
    (Model::V, 500, [(1.774, 0.12), (1.722, 0.16), (1.054, 0.24), (0.629, 0.12), (1.702, 0.16), (1.683, 0.19), (1.034, 0.22), (0.580, 0.12)]),
    (Model::V, 1000, [(1.741, 0.15), (0.952, 0.16), (0.367, 0.06), (0.245, 0.05), (1.669, 0.18), (0.817, 0.17), (0.296, 0.05), (0.194, 0.04)]),
    (Model::V, 2500, [(1.630, 0.17), (0.604, 0.11), (0.251, 0.05), (0.173, 0.03), (1.497, 0.23), (0.462, 0.08), (0.181, 0.03), (0.124, 0.02)]),
    (Model::V, 5000, [(1.005, 0.17), (0.364, 0.06), (0.154, 0.03), (0.107, 0.02), (0.739, 0.15), (0.226, 0.04), (0.092, 0.02), (0.063, 0.01)]),
];
const TABLE_2: &[Row] = &[
    (Model::I, 500, [(1.294, 0.13), (0.890, 0.29), (0.292, 0.07), (0.190, 0.05), (1.279, 0.14), (0.859, 0.26), (0.278, 0.07), (0.181, 0.04)]),
    (Model::I, 1000, [(0.939, 0.24), (0.277, 0.06), (0.111, 0.02), (0.077, 0.02), (0.850, 0.26), (0.234, 0.06), (0.094, 0.02), (0.064, 0.01)]),
    (Model::I, 2500, [(0.527, 0.12), (0.190, 0.04), (0.079, 0.02), (0.054, 0.01), (0.407, 0.11), (0.143, 0.04), (0.060, 0.01), (0.041, 0.01)]),
    (Model::I, 5000, [(0.323, 0.08), (0.113, 0.03), (0.047, 0.01), (0.034, 0.01), (0.216, 0.05), (0.076, 0.02), (0.032, 0.01), (0.022, 0.01)]),
    (Model::II, 500, [(1.370, 0.07), (1.366, 0.07), (0.926, 0.18), (0.653, 0.16), (1.302, 0.13), (1.204, 0.20), (0.557, 0.16), (0.373, 0.13)]),
    (Model::II, 1000, [(1.381, 0.05), (1.037, 0.18), (0.549, 0.13), (0.401, 0.10), (1.208, 0.20), (0.448, 0.13), (0.205, 0.05), (0.146, 0.04)]),
    (Model::II, 2500, [(1.325, 0.10), (0.869, 0.17), (0.426, 0.11), (0.296, 0.08), (0.950, 0.23), (0.280, 0.07), (0.141, 0.03), (0.116, 0.02)]),
    (Model::II, 5000, [(1.153, 0.15), (0.661, 0.16), (0.316, 0.08), (0.220, 0.06), (0.488, 0.13), (0.174, 0.04), (0.106, 0.02), (0.094, 0.02)]),
    (Model::III, 500, [(1.768, 0.13), (1.540, 0.15), (1.065, 0.25), (0.713, 0.20), (1.724, 0.14), (1.296, 0.24), (0.453, 0.09), (0.291, 0.05)]),
    (Model::III, 1000, [(1.558, 0.16), (1.062, 0.24), (0.489, 0.12), (0.323, 0.08), (1.147, 0.23), (0.365, 0.07), (0.150, 0.03), (0.105, 0.02)]),
    (Model::III, 2500, [(1.355, 0.17), (0.823, 0.23), (0.345, 0.09), (0.230, 0.05), (0.676, 0.12), (0.226, 0.04), (0.098, 0.02), (0.067, 0.01)]),
    (Model::III, 5000, [(1.133, 0.21), (0.527, 0.12), (0.218, 0.05), (0.149, 0.03), (0.405, 0.08), (0.135, 0.03), (0.058, 0.01), (0.039, 0.01)]),
    (Model::IV, 500, [(1.755, 0.15), (1.626, 0.19), (0.799, 0.18), (0.511, 0.12), (1.727, 0.15), (1.548, 0.20), (0.683, 0.16), (0.440, 0.09)]),
    (Model::IV, 1000, [(1.722, 0.14), (0.835, 0.18), (0.356, 0.07), (0.266, 0.05), (1.533, 0.22), (0.567, 0.12), (0.250, 0.05), (0.193, 0.04)]),
    (Model::IV, 2500, [(1.467, 0.21), (0.612, 0.12), (0.284, 0.06), (0.205, 0.04), (1.115, 0.25), (0.356, 0.07), (0.176, 0.03), (0.146, 0.02)]),
    (Model::IV, 5000, [(1.039, 0.14), (0.425, 0.08), (0.211, 0.04), (0.164, 0.02), (0.521, 0.12), (0.211, 0.04), (0.136, 0.02), (0.125, 0.01)]),
    (Model::V, 500, [(1.757, 0.14), (1.370, 0.19), (0.488, 0.10), (0.322, 0.06), (1.717, 0.15), (1.360, 0.25), (0.441, 0.08), (0.283, 0.05)]),
    (Model::V, 1000, [(1.467, 0.20), (0.528, 0.10), (0.210, 0.04), (0.144, 0.03), (1.276, 0.25), (0.373, 0.07), (0.149, 0.03), (0.098, 0.02)]),
    (Model::V, 2500, [(1.008, 0.16), (0.369, 0.07), (0.152, 0.03), (0.103, 0.02), (0.704, 0.15), (0.224, 0.04), (0.091, 0.02), (0.063, 0.01)]),
    (Model::V, 5000, [(0.677, 0.12), (0.238, 0.04), (0.100, 0.02), (0.069, 0.01), (0.348, 0.06), (0.114, 0.02), (0.048, 0.01), (0.034, 0.01)]),
];
const TABLE_3: &[Row] = &[
    (Model::I, 500, [(0.523, 0.20), (0.192, 0.07), (0.073, 0.02), (0.049, 0.02), (0.308, 0.12), (0.106, 0.05), (0.051, 0.02), (0.033, 0.01)]),
    (Model::I, 1000, [(1.301, 0.13), (0.914, 0.27), (0.301, 0.08), (0.192, 0.05), (1.281, 0.13), (0.915, 0.27), (0.266, 0.07), (0.185, 0.05)]),
    (Model::I, 2000, [(1.318, 0.12), (0.926, 0.28), (0.298, 0.08), (0.197, 0.05), (1.302, 0.13), (0.894, 0.26), (0.291, 0.07), (0.191, 0.04)]),
    (Model::II, 500, [(1.387, 0.04), (0.734, 0.22), (0.355, 0.12), (0.245, 0.08), (1.375, 0.05), (0.389, 0.14), (0.198, 0.06), (0.176, 0.05)]),
    (Model::II, 1000, [(1.400, 0.02), (1.314, 0.11), (0.766, 0.18), (0.482, 0.13), (1.399, 0.02), (1.170, 0.24), (0.552, 0.17), (0.344, 0.10)]),
    (Model::II, 2000, [(1.402, 0.02), (1.294, 0.14), (0.752, 0.17), (0.516, 0.12), (1.399, 0.02), (1.170, 0.22), (0.565, 0.18), (0.354, 0.10)]),
    (Model::III, 500, [(1.917, 0.06), (0.516, 0.21), (0.211, 0.08), (0.132, 0.05), (1.908, 0.06), (0.205, 0.07), (0.079, 0.04), (0.049, 0.02)]),
    (Model::III, 1000, [(1.961, 0.03), (1.277, 0.26), (0.565, 0.10), (0.424, 0.08), (1.958, 0.03), (1.122, 0.25), (0.464, 0.07), (0.353, 0.07)]),
    (Model::III, 2000, [(1.962, 0.03), (1.206, 0.21), (0.611, 0.11), (0.501, 0.12), (1.956, 0.03), (1.008, 0.22), (0.529, 0.10), (0.450, 0.12)]),
    (Model::IV, 500, [(1.912, 0.06), (0.888, 0.24), (0.407, 0.09), (0.311, 0.06), (1.908, 0.06), (0.692, 0.23), (0.313, 0.07), (0.260, 0.05)]),
    (Model::IV, 1000, [(1.961, 0.03), (1.728, 0.14), (1.297, 0.27), (0.801, 0.20), (1.954, 0.03), (1.680, 0.14), (1.228, 0.27), (0.762, 0.19)]),
    (Model::IV, 2000, [(1.954, 0.03), (1.731, 0.15), (1.232, 0.26), (0.755, 0.18), (1.950, 0.04), (1.699, 0.17), (1.112, 0.29), (0.702, 0.17)]),
    (Model::V, 500, [(1.912, 0.06), (0.340, 0.10), (0.146, 0.04), (0.090, 0.03), (1.902, 0.07), (0.201, 0.06), (0.080, 0.02), (0.054, 0.02)]),
    (Model::V, 1000, [(1.957, 0.03), (1.444, 0.20), (0.510, 0.10), (0.334, 0.06), (1.954, 0.03), (1.333, 0.25), (0.453, 0.08), (0.294, 0.05)]),
    (Model::V, 2000, [(1.958, 0.02), (1.402, 0.22), (0.509, 0.09), (0.340, 0.06), (1.950, 0.03), (1.315, 0.26), (0.470, 0.08), (0.303, 0.05)]),
];
const TABLE_4: &[Row] = &[
    (Model::I, 500, [(0.362, 0.13), (0.123, 0.05), (0.047, 0.01), (0.037, 0.01), (0.167, 0.06), (0.069, 0.03), (0.029, 0.01), (0.025, 0.01)]),
    (Model::I, 1000, [(1.228, 0.17), (0.375, 0.09), (0.161, 0.04), (0.108, 0.02), (1.206, 0.20), (0.348, 0.09), (0.141, 0.03), (0.096, 0.02)]),
    (Model::I, 2000, [(1.209, 0.19), (0.386, 0.09), (0.160, 0.04), (0.109, 0.02), (1.204, 0.19), (0.337, 0.09), (0.138, 0.03), (0.094, 0.02)]),
    (Model::II, 500, [(1.386, 0.04), (0.511, 0.17), (0.255, 0.08), (0.199, 0.06), (1.370, 0.05), (0.220, 0.07), (0.161, 0.04), (0.156, 0.03)]),
    (Model::II, 1000, [(1.397, 0.03), (1.063, 0.22), (0.474, 0.13), (0.323, 0.09), (1.396, 0.03), (0.760, 0.27), (0.277, 0.08), (0.183, 0.05)]),
    (Model::II, 2000, [(1.401, 0.02), (1.003, 0.21), (0.467, 0.12), (0.328, 0.09), (1.394, 0.03), (0.692, 0.22), (0.270, 0.08), (0.190, 0.05)]),
    (Model::III, 500, [(1.913, 0.06), (0.317, 0.10), (0.127, 0.05), (0.087, 0.05), (1.906, 0.06), (0.113, 0.06), (0.045, 0.03), (0.035, 0.04)]),
    (Model::III, 1000, [(1.958, 0.03), (0.776, 0.14), (0.393, 0.09), (0.314, 0.11), (1.956, 0.03), (0.525, 0.08), (0.305, 0.11), (0.265, 0.13)]),
    (Model::III, 2000, [(1.963, 0.03), (0.813, 0.15), (0.489, 0.11), (0.425, 0.14), (1.957, 0.02), (0.582, 0.10), (0.425, 0.14), (0.394, 0.15)]),
    (Model::IV, 500, [(1.913, 0.06), (0.556, 0.14), (0.288, 0.06), (0.247, 0.04), (1.908, 0.06), (0.372, 0.09), (0.240, 0.04), (0.226, 0.03)]),
    (Model::IV, 1000, [(1.957, 0.03), (1.517, 0.23), (0.633, 0.14), (0.428, 0.09), (1.951, 0.03), (1.431, 0.25), (0.544, 0.12), (0.382, 0.07)]),
    (Model::IV, 2000, [(1.954, 0.03), (1.434, 0.23), (0.586, 0.13), (0.409, 0.09), (1.954, 0.03), (1.389, 0.25), (0.505, 0.11), (0.345, 0.08)]),
    (Model::V, 500, [(1.903, 0.07), (0.230, 0.07), (0.089, 0.03), (0.062, 0.02), (1.901, 0.07), (0.103, 0.03), (0.041, 0.01), (0.027, 0.01)]),
    (Model::V, 1000, [(1.952, 0.03), (0.697, 0.13), (0.274, 0.05), (0.181, 0.03), (1.953, 0.03), (0.577, 0.12), (0.225, 0.04), (0.150, 0.02)]),
    (Model::V, 2000, [(1.955, 0.03), (0.708, 0.13), (0.275, 0.05), (0.184, 0.03), (1.953, 0.03), (0.578, 0.10), (0.219, 0.04), (0.151, 0.03)]),
];

/// Every cell of table `which`; `None` for an unknown table.
pub fn reference_table(which: u8) -> Option<Vec<ReferenceCell>> {
    let (_, varies_n) = table_setting(which)?;
    let rows = match which {
        1 => TABLE_1,
        2 => TABLE_2,
        3 => TABLE_3,
        _ => TABLE_4,
    };
    let mut cells = Vec::with_capacity(rows.len() * 8);
    for &(model, size, values) in rows {
        let (n, p) = if varies_n { (size, 10) } else { (1000, size) };
        for (m, mechanism) in [Mechanism::Iid, Mechanism::Vgm].into_iter().enumerate() {
            for (c, &k) in CLIENT_COUNTS.iter().enumerate() {
                let (mean, se) = values[4 * m + c];
                cells.push(ReferenceCell { model, n, p, k, mechanism, mean, se });
            }
        }
    }
    Some(cells)
}

/// Reference value for one cell, if the tables contain it.
pub fn lookup(which: u8, model: Model, n: usize, p: usize, k: usize, mechanism: Mechanism) -> Option<ReferenceCell> {
    reference_table(which)?
        .into_iter()
        .find(|c| c.model == model && c.n == n && c.p == p && c.k == k && c.mechanism == mechanism)
}
