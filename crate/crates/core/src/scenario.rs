//! Problem instances: channel gains, power budgets and the interference
//! threshold for one realization, plus random generation from node geometry.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`, seeded with
//! `seed_from_u64(seed)`), with one stream per link so that draws for one link
//! never shift when another link changes size:
//!
//! | stream | link            | draw order                         |
//! |--------|-----------------|------------------------------------|
//! | 0      | P-IT → P-IR (h) | subcarrier-major                   |
//! | 1      | P-IT → S-ER (φ) | subcarrier-major                   |
//! | 2      | S-ET → S-ER (g) | antenna-major, then subcarrier     |
//! | 3      | S-ET → P-IR (f) | antenna-major, then subcarrier     |
//!
//! Each complex draw is `sqrt(v/2)·(x + j y)` with `x, y` standard normal, so
//! adding antennas extends the existing vectors instead of replacing them.

use std::fs;
use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, CVector};

pub const FORMAT_NAME: &str = "cogwpt-scenario";
pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Node placement and the path-loss model `chi·(d/d0)^(-kappa)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub s_et: Point,
    pub s_er: Point,
    pub p_it: Point,
    pub p_ir: Point,
    /// Linear channel power gain at the reference distance.
    pub chi: f64,
    pub d0: f64,
    pub kappa: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            s_et: Point::new(0.0, 0.0),
            s_er: Point::new(0.0, 5.0),
            p_it: Point::new(0.0, 2.5),
            p_ir: Point::new(5.0, 0.0),
            chi: 1e-3,
            d0: 1.0,
            kappa: 3.0,
        }
    }
}

impl Geometry {
    pub fn path_loss(&self, d: f64) -> f64 {
        self.chi * (d / self.d0).powf(-self.kappa)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi > 0.0 && self.chi.is_finite()) {
            return Err(Error::InvalidGeometry(format!("chi must be positive, got {}", self.chi)));
        }
        if !(self.d0 > 0.0 && self.d0.is_finite()) {
            return Err(Error::InvalidGeometry(format!("d0 must be positive, got {}", self.d0)));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidGeometry(format!(
                "kappa must be nonnegative, got {}",
                self.kappa
            )));
        }
        let nodes = [
            ("S-ET", self.s_et),
            ("S-ER", self.s_er),
            ("P-IT", self.p_it),
            ("P-IR", self.p_ir),
        ];
        for (i, (na, a)) in nodes.iter().enumerate() {
            for (nb, b) in &nodes[i + 1..] {
                let d = a.distance(b);
                if !(d > 0.0) {
                    return Err(Error::InvalidGeometry(format!(
                        "{na} and {nb} coincide at ({}, {})",
                        a.x, a.y
                    )));
                }
            }
        }
        Ok(())
    }

    /// Path-loss variances `(h, phi, g, f)` of the four links.
    pub fn link_variances(&self) -> LinkVariances {
        LinkVariances {
            h: self.path_loss(self.p_it.distance(&self.p_ir)),
            phi: self.path_loss(self.p_it.distance(&self.s_er)),
            g: self.path_loss(self.s_et.distance(&self.s_er)),
            f: self.path_loss(self.s_et.distance(&self.p_ir)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkVariances {
    pub h: f64,
    pub phi: f64,
    pub g: f64,
    pub f: f64,
}

/// Power budgets and the interference threshold, all in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    pub sigma2: f64,
    pub p_sum: f64,
    pub q_sum: f64,
    pub q_peak: f64,
    pub gamma: f64,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            sigma2: 1e-9,
            p_sum: 3.2,
            q_sum: 6.4,
            q_peak: 0.1,
            gamma: 1.28e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n_subcarriers: usize,
    pub n_antennas: usize,
    /// P-IT → P-IR channel power gain per subcarrier.
    pub h: Vec<f64>,
    /// P-IT → S-ER channel power gain per subcarrier.
    pub phi: Vec<f64>,
    /// S-ET → S-ER channel vector per subcarrier.
    pub g: Vec<CVector>,
    /// S-ET → P-IR channel vector per subcarrier.
    pub f: Vec<CVector>,
    pub sigma2: f64,
    pub p_sum: f64,
    pub q_sum: f64,
    pub q_peak: f64,
    pub gamma: f64,
}

fn cscg(rng: &mut ChaCha8Rng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Draw one channel realization for the given geometry.
pub fn generate_scenario(
    geometry: &Geometry,
    budgets: &Budgets,
    n_subcarriers: usize,
    n_antennas: usize,
    seed: u64,
) -> Result<Scenario> {
    geometry.validate()?;
    let var = geometry.link_variances();
    let n = n_subcarriers;
    let m = n_antennas;

    let mut rng = stream(seed, 0);
    let h: Vec<f64> = (0..n).map(|_| cscg(&mut rng, var.h).norm_sqr()).collect();
    let mut rng = stream(seed, 1);
    let phi: Vec<f64> = (0..n).map(|_| cscg(&mut rng, var.phi).norm_sqr()).collect();

    let antenna_major = |id: u64, v: f64| -> Vec<CVector> {
        let mut rng = stream(seed, id);
        let mut out = vec![CVector::zeros(m); n];
        for a in 0..m {
            for vec in out.iter_mut() {
                vec[a] = cscg(&mut rng, v);
            }
        }
        out
    };
    let g = antenna_major(2, var.g);
    let f = antenna_major(3, var.f);

    let s = Scenario {
        n_subcarriers: n,
        n_antennas: m,
        h,
        phi,
        g,
        f,
        sigma2: budgets.sigma2,
        p_sum: budgets.p_sum,
        q_sum: budgets.q_sum,
        q_peak: budgets.q_peak,
        gamma: budgets.gamma,
    };
    s.validate()?;
    Ok(s)
}

impl Scenario {
    pub fn budgets(&self) -> Budgets {
        Budgets {
            sigma2: self.sigma2,
            p_sum: self.p_sum,
            q_sum: self.q_sum,
            q_peak: self.q_peak,
            gamma: self.gamma,
        }
    }

    pub fn with_budgets(&self, b: &Budgets) -> Scenario {
        Scenario {
            sigma2: b.sigma2,
            p_sum: b.p_sum,
            q_sum: b.q_sum,
            q_peak: b.q_peak,
            gamma: b.gamma,
            ..self.clone()
        }
    }

    /// `‖f_i‖²` per subcarrier.
    pub fn f_gains(&self) -> Vec<f64> {
        self.f.iter().map(norm_sqr).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_subcarriers;
        let m = self.n_antennas;
        if n == 0 {
            return Err(Error::InvalidScenario("n_subcarriers must be positive".into()));
        }
        if m == 0 {
            return Err(Error::InvalidScenario("n_antennas must be positive".into()));
        }
        for (name, len) in [
            ("h", self.h.len()),
            ("phi", self.phi.len()),
            ("g", self.g.len()),
            ("f", self.f.len()),
        ] {
            if len != n {
                return Err(Error::InvalidScenario(format!(
                    "{name} has {len} entries, expected n_subcarriers={n}"
                )));
            }
        }
        for (i, (g, f)) in self.g.iter().zip(&self.f).enumerate() {
            if g.len() != m || f.len() != m {
                return Err(Error::InvalidScenario(format!(
                    "subcarrier {i}: channel vectors must have n_antennas={m} entries"
                )));
            }
            if g.iter().chain(f.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidScenario(format!("subcarrier {i}: non-finite channel entry")));
            }
            if norm_sqr(f) == 0.0 {
                return Err(Error::InvalidScenario(format!("subcarrier {i}: f is the zero vector")));
            }
        }
        for (i, (&h, &p)) in self.h.iter().zip(&self.phi).enumerate() {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidScenario(format!("h[{i}] must be positive, got {h}")));
            }
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::InvalidScenario(format!("phi[{i}] must be positive, got {p}")));
            }
        }
        let positive = [("sigma2", self.sigma2), ("p_sum", self.p_sum)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidScenario(format!("{name} must be positive, got {v}")));
            }
        }
        let nonneg = [("q_sum", self.q_sum), ("q_peak", self.q_peak), ("gamma", self.gamma)];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidScenario(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        let cvecs = |vs: &[CVector]| -> Value {
            Value::Array(
                vs.iter()
                    .map(|v| Value::Array(v.iter().map(|z| json!([z.re, z.im])).collect()))
                    .collect(),
            )
        };
        json!({
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "n_subcarriers": self.n_subcarriers,
            "n_antennas": self.n_antennas,
            "sigma2": self.sigma2,
            "p_sum": self.p_sum,
            "q_sum": self.q_sum,
            "q_peak": self.q_peak,
            "gamma": self.gamma,
            "h": self.h,
            "phi": self.phi,
            "g": cvecs(&self.g),
            "f": cvecs(&self.f),
        })
    }

    pub fn from_json(value: &Value) -> Result<Scenario> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::parse("<root>", "expected a JSON object"))?;
        if let Some(fmt) = obj.get("format") {
            if fmt.as_str() != Some(FORMAT_NAME) {
                return Err(Error::parse("format", format!("expected \"{FORMAT_NAME}\", got {fmt}")));
            }
        }
        if let Some(ver) = obj.get("version") {
            if ver.as_u64() != Some(FORMAT_VERSION) {
                return Err(Error::parse("version", format!("unsupported version {ver}")));
            }
        }
        let s = Scenario {
            n_subcarriers: get_usize(obj, "n_subcarriers")?,
            n_antennas: get_usize(obj, "n_antennas")?,
            h: get_reals(obj, "h")?,
            phi: get_reals(obj, "phi")?,
            g: get_cvecs(obj, "g")?,
            f: get_cvecs(obj, "f")?,
            sigma2: get_f64(obj, "sigma2")?,
            p_sum: get_f64(obj, "p_sum")?,
            q_sum: get_f64(obj, "q_sum")?,
            q_peak: get_f64(obj, "q_peak")?,
            gamma: get_f64(obj, "gamma")?,
        };
        s.validate()?;
        Ok(s)
    }
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<&'a Value> {
    obj.get(name).ok_or_else(|| Error::parse(name, "missing field"))
}

fn get_f64(obj: &Map<String, Value>, name: &str) -> Result<f64> {
    field(obj, name)?
        .as_f64()
        .ok_or_else(|| Error::parse(name, "expected a number"))
}

fn get_usize(obj: &Map<String, Value>, name: &str) -> Result<usize> {
    field(obj, name)?
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| Error::parse(name, "expected a nonnegative integer"))
}

fn get_reals(obj: &Map<String, Value>, name: &str) -> Result<Vec<f64>> {
    let arr = field(obj, name)?
        .as_array()
        .ok_or_else(|| Error::parse(name, "expected an array of numbers"))?;
    arr.iter()
        .enumerate()
        .map(|(i, v)| {
            v.as_f64()
                .ok_or_else(|| Error::parse(format!("{name}[{i}]"), "expected a number"))
        })
        .collect()
}

fn get_cvecs(obj: &Map<String, Value>, name: &str) -> Result<Vec<CVector>> {
    let arr = field(obj, name)?
        .as_array()
        .ok_or_else(|| Error::parse(name, "expected an array of complex vectors"))?;
    arr.iter()
        .enumerate()
        .map(|(i, v)| {
            let entries = v
                .as_array()
                .ok_or_else(|| Error::parse(format!("{name}[{i}]"), "expected an array"))?;
            let zs = entries
                .iter()
                .enumerate()
                .map(|(k, z)| {
                    let pair = z.as_array().filter(|p| p.len() == 2).ok_or_else(|| {
                        Error::parse(format!("{name}[{i}][{k}]"), "expected [re, im]")
                    })?;
                    match (pair[0].as_f64(), pair[1].as_f64()) {
                        (Some(re), Some(im)) => Ok(Complex64::new(re, im)),
                        _ => Err(Error::parse(format!("{name}[{i}][{k}]"), "expected numeric [re, im]")),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(DVector::from_vec(zs))
        })
        .collect()
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(&s.to_json()).expect("scenario json is always serializable");
    fs::write(path, text)?;
    Ok(())
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| Error::parse("<document>", e))?;
    Scenario::from_json(&value)
}
