/// Negative-side slope of the leaky ReLU.
pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    LeakyRelu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    /// Value and derivative at `x`.
    #[inline]
    pub fn eval(self, x: f64) -> (f64, f64) {
        match self {
            Activation::LeakyRelu => {
                if x < 0.0 {
                    (LEAKY_SLOPE * x, LEAKY_SLOPE)
                } else {
                    (x, 1.0)
                }
            }
            Activation::Sigmoid => {
                let y = sigmoid(x);
                (y, y * (1.0 - y))
            }
            Activation::Tanh => {
                let y = libm::tanh(x);
                (y, 1.0 - y * y)
            }
            Activation::Identity => (x, 1.0),
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        self.eval(x).0
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        self.eval(x).1
    }

    /// True when the derivative is piecewise constant, so second
    /// derivatives vanish almost everywhere.
    pub fn is_piecewise_linear(self) -> bool {
        matches!(self, Activation::LeakyRelu | Activation::Identity)
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::LeakyRelu => "leaky_relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "leaky_relu" => Some(Activation::LeakyRelu),
            "sigmoid" => Some(Activation::Sigmoid),
            "tanh" => Some(Activation::Tanh),
            "identity" => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Logistic function, split by sign so `exp` never overflows.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}
