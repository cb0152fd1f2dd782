//! Gauss–Legendre panels and the sinh map for inverse-square-root endpoints.

use gauss_quad::legendre::GaussLegendre;

/// Gauss–Legendre nodes and weights on [−1, 1].
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn legendre(order: usize) -> Rule {
        let gl = GaussLegendre::new(order.max(2)).expect("order >= 2");
        let (nodes, weights) = gl.as_node_weight_pairs().iter().copied().unzip();
        Rule { nodes, weights }
    }

    /// Composite rule on [a, b] with `panels` equal panels.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        let panels = panels.max(1);
        let w = (b - a) / panels as f64;
        let mut out = Vec::with_capacity(panels * self.nodes.len());
        for p in 0..panels {
            let lo = a + w * p as f64;
            let mid = lo + 0.5 * w;
            for (x, wt) in self.nodes.iter().zip(&self.weights) {
                out.push((mid + 0.5 * w * x, 0.5 * w * wt));
            }
        }
        out
    }
}

/// Panel length in the sinh variable; the nearest complex singularity of the
/// mapped integrand sits about 0.35 beyond the far end of the range.
pub const SINH_PANEL: f64 = 0.5;

/// Nodes (u, w) with Σ w f(u) ≈ ∫_0^len f(u) du / √(u(u + δ)).
///
/// Uses u = δ sinh²t, for which du/√(u(u+δ)) = 2 dt on t ∈ [0, asinh √(len/δ)].
pub fn sinh_endpoint_nodes(rule: &Rule, delta: f64, len: f64) -> Vec<(f64, f64)> {
    let tmax = (len / delta).sqrt().asinh();
    let panels = (tmax / SINH_PANEL).ceil().max(1.0) as usize;
    rule.composite(0.0, tmax, panels)
        .into_iter()
        .map(|(t, w)| {
            let s = t.sinh();
            (delta * s * s, 2.0 * w)
        })
        .collect()
}
