use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Non-zero leading coefficients in the sparse schemes.
const ACTIVE_COEFFICIENTS: usize = 30;
/// Standard deviation of the latent-scheme coefficients.
const LATENT_COEF_SD: f64 = 0.001;
/// Test rows drawn for the latent schemes.
const LATENT_TEST_SIZE: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "sim1")]
    Sim1,
    #[serde(rename = "sim2")]
    Sim2,
    #[serde(rename = "sim3-low")]
    Sim3Low,
    #[serde(rename = "sim3-high")]
    Sim3High,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Sim1 => "sim1",
            Scheme::Sim2 => "sim2",
            Scheme::Sim3Low => "sim3-low",
            Scheme::Sim3High => "sim3-high",
        }
    }

    /// `(n, m, l, h, test_size)`.
    pub fn dimensions(self) -> (usize, usize, usize, usize, usize) {
        match self {
            Scheme::Sim1 => (100, 100, 1, 30, 500),
            Scheme::Sim2 => (100, 100, 3, 30, 500),
            Scheme::Sim3Low => (100, 10, 1, 2, LATENT_TEST_SIZE),
            Scheme::Sim3High => (15, 60, 1, 4, LATENT_TEST_SIZE),
        }
    }

    fn is_latent(self) -> bool {
        matches!(self, Scheme::Sim3Low | Scheme::Sim3High)
    }

    pub fn default_error(self) -> ErrorLaw {
        if self.is_latent() {
            ErrorLaw::Normal
        } else {
            ErrorLaw::Chi2_3
        }
    }

    pub fn supports(self, law: ErrorLaw) -> bool {
        self.is_latent() != (law == ErrorLaw::Chi2_3)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sim1" => Ok(Scheme::Sim1),
            "sim2" => Ok(Scheme::Sim2),
            "sim3-low" => Ok(Scheme::Sim3Low),
            "sim3-high" => Ok(Scheme::Sim3High),
            other => Err(Error::InvalidArgument(format!("unknown scheme '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorLaw {
    Chi2_3,
    Normal,
    /// Student t with one degree of freedom.
    T1,
    /// Standard normal divided by an independent standard uniform.
    Slash,
}

impl ErrorLaw {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorLaw::Chi2_3 => "chi2_3",
            ErrorLaw::Normal => "normal",
            ErrorLaw::T1 => "t1",
            ErrorLaw::Slash => "slash",
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            ErrorLaw::Chi2_3 => ChiSquared::new(3.0).expect("valid dof").sample(rng),
            ErrorLaw::Normal => StandardNormal.sample(rng),
            ErrorLaw::T1 => StudentT::new(1.0).expect("valid dof").sample(rng),
            ErrorLaw::Slash => {
                let z: f64 = StandardNormal.sample(rng);
                // (0, 1] so the ratio stays finite
                let u = 1.0 - rng.random::<f64>();
                z / u
            }
        }
    }
}

impl fmt::Display for ErrorLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ErrorLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "chi2_3" => Ok(ErrorLaw::Chi2_3),
            "normal" => Ok(ErrorLaw::Normal),
            "t1" => Ok(ErrorLaw::T1),
            "slash" => Ok(ErrorLaw::Slash),
            other => Err(Error::InvalidArgument(format!("unknown error law '{other}'"))),
        }
    }
}

/// Parameters of one simulation study.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub scheme: Scheme,
    pub error_law: ErrorLaw,
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub h: usize,
    pub test_size: usize,
    pub repetitions: usize,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn new(scheme: Scheme, error_law: ErrorLaw, repetitions: usize, seed: u64) -> Result<Self> {
        let (n, m, l, h, test_size) = scheme.dimensions();
        let spec = SimulationSpec {
            scheme,
            error_law,
            n,
            m,
            l,
            h,
            test_size,
            repetitions,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.scheme.supports(self.error_law) {
            return Err(Error::InvalidArgument(format!(
                "error law {} is not used with scheme {}",
                self.error_law, self.scheme
            )));
        }
        if (self.n, self.m, self.l, self.h, self.test_size) != self.scheme.dimensions() {
            return Err(Error::InvalidArgument(format!(
                "dimensions do not match scheme {}",
                self.scheme
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidArgument("at least one repetition is required".into()));
        }
        Ok(())
    }
}

/// One generated train/test split with its true coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct SimulatedData {
    pub x_train: DenseMatrix,
    pub y_train: DenseMatrix,
    pub x_test: DenseMatrix,
    pub y_test: DenseMatrix,
    pub b_true: DenseMatrix,
}

#[derive(Clone, Copy)]
enum Role {
    XTrain = 0,
    XTest,
    Coefficients,
    NoiseTrain,
    NoiseTest,
    ScoresTrain,
    ScoresTest,
    Loadings,
}

fn stream(seed: u64, repetition: usize, role: Role) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((repetition as u64) * 16 + role as u64);
    rng
}

fn normal_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn noise_matrix(rows: usize, cols: usize, law: ErrorLaw, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| law.sample(rng))
}

/// Draws repetition `repetition` of `spec`. Each matrix has its own stream,
/// so any one of them can be regenerated independently of the rest.
pub fn generate_simulation(spec: &SimulationSpec, repetition: usize) -> Result<SimulatedData> {
    spec.validate()?;
    let SimulationSpec {
        n, m, l, h, test_size, seed, error_law, ..
    } = *spec;
    let rng = |role| stream(seed, repetition, role);

    let (x_train, x_test, b_true) = if spec.scheme.is_latent() {
        let p = normal_matrix(m, h, &mut rng(Role::Loadings));
        let t_train = normal_matrix(n, h, &mut rng(Role::ScoresTrain));
        let t_test = normal_matrix(test_size, h, &mut rng(Role::ScoresTest));
        let mut r = rng(Role::Coefficients);
        let b = DenseMatrix::from_fn(m, l, |_, _| {
            LATENT_COEF_SD * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut r)
        });
        let pt = p.transpose();
        (t_train.matmul(&pt), t_test.matmul(&pt), b)
    } else {
        let x_train = normal_matrix(n, m, &mut rng(Role::XTrain));
        let x_test = normal_matrix(test_size, m, &mut rng(Role::XTest));
        let mut r = rng(Role::Coefficients);
        let b = DenseMatrix::from_fn(m, l, |i, _| {
            if i < ACTIVE_COEFFICIENTS {
                r.random::<f64>()
            } else {
                0.0
            }
        });
        (x_train, x_test, b)
    };

    let y_train = x_train
        .matmul(&b_true)
        .add(&noise_matrix(n, l, error_law, &mut rng(Role::NoiseTrain)));
    let y_test = x_test
        .matmul(&b_true)
        .add(&noise_matrix(test_size, l, error_law, &mut rng(Role::NoiseTest)));

    Ok(SimulatedData {
        x_train,
        y_train,
        x_test,
        y_test,
        b_true,
    })
}
