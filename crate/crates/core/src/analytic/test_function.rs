use std::fmt;
use std::sync::Arc;

pub type RealMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Step of the central difference used when no analytic derivative is given.
pub const FD_STEP: f64 = 1e-6;

/// A real test function `φ` for linear eigenvalue statistics, optionally
/// carrying its analytic derivative. Two test functions compare equal when
/// their names match.
#[derive(Clone)]
pub struct TestFunction {
    name: String,
    eval: RealMap,
    deriv: Option<RealMap>,
}

impl TestFunction {
    pub fn new(name: impl Into<String>, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            deriv: None,
        }
    }

    pub fn with_derivative(mut self, deriv: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.deriv = Some(Arc::new(deriv));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn has_analytic_derivative(&self) -> bool {
        self.deriv.is_some()
    }

    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match &self.deriv {
            Some(d) => d(x),
            None => ((self.eval)(x + FD_STEP) - (self.eval)(x - FD_STEP)) / (2.0 * FD_STEP),
        }
    }

    /// Monomial `x^k` named `x{k}` (`x` for `k = 1`, `one` for `k = 0`).
    pub fn monomial(k: u32) -> Self {
        let name = match k {
            0 => "one".to_string(),
            1 => "x".to_string(),
            _ => format!("x{k}"),
        };
        let kf = k as f64;
        Self::new(name, move |x| x.powi(k as i32)).with_derivative(move |x| {
            if k == 0 {
                0.0
            } else {
                kf * x.powi(k as i32 - 1)
            }
        })
    }

    /// Built-in library, looked up by name: `one`/`1`, `x`, `x2`..`x6`,
    /// `cos`, `sin`, `exp`, `tanh`, `gauss` (`e^{−x²}`).
    pub fn builtin(name: &str) -> Option<Self> {
        let f = match name {
            "one" | "1" | "x0" => Self::monomial(0),
            "x" | "x1" => Self::monomial(1),
            "x2" => Self::monomial(2),
            "x3" => Self::monomial(3),
            "x4" => Self::monomial(4),
            "x5" => Self::monomial(5),
            "x6" => Self::monomial(6),
            "cos" => Self::new("cos", f64::cos).with_derivative(|x| -x.sin()),
            "sin" => Self::new("sin", f64::sin).with_derivative(f64::cos),
            "exp" => Self::new("exp", f64::exp).with_derivative(f64::exp),
            "tanh" => Self::new("tanh", f64::tanh).with_derivative(|x| {
                let c = x.cosh();
                1.0 / (c * c)
            }),
            "gauss" => Self::new("gauss", |x| (-x * x).exp())
                .with_derivative(|x| -2.0 * x * (-x * x).exp()),
            _ => return None,
        };
        Some(f)
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &[
            "one", "x", "x2", "x3", "x4", "x5", "x6", "cos", "sin", "exp", "tanh", "gauss",
        ]
    }
}

impl PartialEq for TestFunction {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
    }
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("analytic_derivative", &self.deriv.is_some())
            .finish()
    }
}
