/// Evaluation diagnostics attached to every metric.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Contour abscissae used by the Mellin-Barnes evaluations, in call order.
    pub contours: Vec<f64>,
    /// Total number of quadrature nodes spent.
    pub nodes: usize,
    /// Number of H-function terms summed.
    pub terms: usize,
}

impl Diagnostics {
    pub fn absorb(&mut self, other: &Diagnostics) {
        self.contours.extend_from_slice(&other.contours);
        self.nodes += other.nodes;
        self.terms += other.terms;
    }
}

/// A value together with its estimated absolute error.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricResult {
    pub value: f64,
    pub error_estimate: f64,
    pub diagnostics: Diagnostics,
}

impl MetricResult {
    pub fn exact(value: f64) -> Self {
        MetricResult {
            value,
            error_estimate: 0.0,
            diagnostics: Diagnostics::default(),
        }
    }

    pub fn new(value: f64, error_estimate: f64, diagnostics: Diagnostics) -> Self {
        MetricResult {
            value,
            error_estimate,
            diagnostics,
        }
    }
}
