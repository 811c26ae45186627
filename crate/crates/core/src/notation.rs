//! Short textual descriptions of bodies and densities, e.g. `lq(4)`,
//! `revolution(q=4, kappa=0.1)`, `gaussian(0.7)*even_poly(3)`.
//!
//! Bodies: `ball`, `cube`, `cross`, `lq(q)`, `ellipsoid(a_1, ..., a_n)`,
//! `box(w_1, ..., w_n)`, `revolution(q, kappa, radial_scale, axial_scale)`,
//! `seed_body`, `random_ellipsoid(seed)`, `random_cross(seed)`, `random_box(seed)`.
//!
//! Densities: `uniform`, `gaussian(sigma)`, `slab(sigma)` (normal `e_1`),
//! `radial_power(alpha)`, `even_poly(seed)`, and `*`-products of these.

use crate::bodies::{Density, RevolutionProfile, StarBody};
use crate::counterexample::default_seed_body;
use crate::error::{Error, Result};
use crate::slicing::{random_box, random_cross_polytope_image, random_ellipsoid, random_even_polynomial, random_gaussian};

#[derive(Debug, Clone, PartialEq)]
struct Call {
    name: String,
    positional: Vec<String>,
    named: Vec<(String, String)>,
}

fn parse_error(line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn parse_call(text: &str, line: usize, field: &str) -> Result<Call> {
    let text = text.trim();
    let (name, args) = match text.find('(') {
        Some(open) => {
            if !text.ends_with(')') {
                return Err(parse_error(line, field, format!("missing `)` in `{text}`")));
            }
            (&text[..open], Some(&text[open + 1..text.len() - 1]))
        }
        None => (text, None),
    };
    let name = name.trim();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
        return Err(parse_error(line, field, format!("bad name `{name}`")));
    }
    let mut call = Call {
        name: name.to_ascii_lowercase(),
        positional: Vec::new(),
        named: Vec::new(),
    };
    if let Some(args) = args {
        for arg in args.split(',').map(str::trim).filter(|a| !a.is_empty()) {
            match arg.split_once('=') {
                Some((k, v)) => call.named.push((k.trim().to_ascii_lowercase(), v.trim().to_string())),
                None if call.named.is_empty() => call.positional.push(arg.to_string()),
                None => return Err(parse_error(line, field, "positional argument after a named one")),
            }
        }
    }
    Ok(call)
}

fn number(text: &str, line: usize, field: &str) -> Result<f64> {
    match text.to_ascii_lowercase().as_str() {
        "inf" | "infinity" => Ok(f64::INFINITY),
        t => t
            .parse::<f64>()
            .map_err(|_| parse_error(line, field, format!("`{text}` is not a number"))),
    }
}

impl Call {
    /// Argument by position or by name, with a default.
    fn arg(&self, index: usize, name: &str, default: Option<f64>, line: usize, field: &str) -> Result<f64> {
        if let Some((_, v)) = self.named.iter().find(|(k, _)| k == name) {
            return number(v, line, field);
        }
        match (self.positional.get(index), default) {
            (Some(v), _) => number(v, line, field),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(parse_error(line, field, format!("`{}` needs argument `{name}`", self.name))),
        }
    }

    fn numbers(&self, line: usize, field: &str) -> Result<Vec<f64>> {
        self.positional.iter().map(|v| number(v, line, field)).collect()
    }

    fn seed(&self, line: usize, field: &str) -> Result<u64> {
        let v = self.arg(0, "seed", Some(0.0), line, field)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(parse_error(line, field, format!("seed `{v}` must be a non-negative integer")));
        }
        Ok(v as u64)
    }

    fn expect_len(&self, n: usize, line: usize, field: &str) -> Result<Vec<f64>> {
        let v = self.numbers(line, field)?;
        if v.len() != n {
            return Err(parse_error(
                line,
                field,
                format!("`{}` needs {n} values, got {}", self.name, v.len()),
            ));
        }
        Ok(v)
    }
}

/// Body in `R^n` from its description; `line` and `field` locate errors.
pub fn parse_body_at(text: &str, n: usize, line: usize, field: &str) -> Result<StarBody> {
    let call = parse_call(text, line, field)?;
    let wrap = |e: Error| match e {
        Error::Parse { .. } => e,
        other => parse_error(line, field, other.to_string()),
    };
    let body = match call.name.as_str() {
        "ball" | "euclidean" => StarBody::euclidean_ball(n),
        "cube" => StarBody::cube(n),
        "cross" | "cross_polytope" => StarBody::cross_polytope(n),
        "lq" | "lq_ball" => StarBody::lq_ball(n, call.arg(0, "q", None, line, field)?),
        "ellipsoid" => StarBody::ellipsoid_axes(&call.expect_len(n, line, field)?),
        "box" => StarBody::weighted_box(&call.expect_len(n, line, field)?),
        "revolution" => StarBody::revolution(
            n,
            RevolutionProfile {
                q: call.arg(0, "q", Some(2.0), line, field)?,
                kappa: call.arg(1, "kappa", Some(0.0), line, field)?,
                radial_scale: call.arg(2, "radial_scale", Some(1.0), line, field)?,
                axial_scale: call.arg(3, "axial_scale", Some(1.0), line, field)?,
            },
        ),
        "seed_body" if n == 5 => Ok(default_seed_body()),
        "seed_body" => Err(parse_error(line, field, "seed_body lives in dimension 5")),
        "random_ellipsoid" => random_ellipsoid(n, call.seed(line, field)?),
        "random_cross" => random_cross_polytope_image(n, call.seed(line, field)?),
        "random_box" => random_box(n, call.seed(line, field)?),
        other => Err(parse_error(line, field, format!("unknown body `{other}`"))),
    };
    body.map_err(wrap)
}

pub fn parse_body(text: &str, n: usize) -> Result<StarBody> {
    parse_body_at(text, n, 1, "body")
}

/// Density on `R^n` from its description; `*` separates product factors.
pub fn parse_density_at(text: &str, n: usize, line: usize, field: &str) -> Result<Density> {
    let factors: Vec<&str> = text.split('*').collect();
    let wrap = |e: Error| match e {
        Error::Parse { .. } => e,
        other => parse_error(line, field, other.to_string()),
    };
    let mut parts = Vec::with_capacity(factors.len());
    for factor in factors {
        let call = parse_call(factor, line, field)?;
        let density = match call.name.as_str() {
            "uniform" | "lebesgue" => Ok(Density::uniform(n)),
            "gaussian" => Density::gaussian(n, call.arg(0, "sigma", Some(1.0), line, field)?),
            "slab" => {
                let mut e1 = vec![0.0; n];
                e1[0] = 1.0;
                Density::gaussian_slab(&e1, call.arg(0, "sigma", Some(0.1), line, field)?)
            }
            "radial_power" => Density::radial_power(n, call.arg(0, "alpha", None, line, field)?),
            "even_poly" => random_even_polynomial(n, call.seed(line, field)?),
            "random_gaussian" => random_gaussian(n, call.seed(line, field)?),
            other => Err(parse_error(line, field, format!("unknown density `{other}`"))),
        };
        parts.push(density.map_err(wrap)?);
    }
    if parts.len() == 1 {
        Ok(parts.pop().expect("one factor"))
    } else {
        Density::product(parts).map_err(wrap)
    }
}

pub fn parse_density(text: &str, n: usize) -> Result<Density> {
    parse_density_at(text, n, 1, "measure")
}
