//! Surface specification documents.

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{Expression, RevolutionProfile, SurfaceChart};

/// Meridian description of a surface of revolution.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    /// Points `(rho, z)` from the north axis point to the south axis point.
    Points(Vec<[f64; 2]>),
    /// Chebyshev coefficients of `r(theta)` in `cos theta`.
    Coefficients(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum SurfaceShape {
    Sphere { r: f64 },
    Spheroid { a: f64, c: f64 },
    SurfaceOfRevolution(Profile),
    Torus { r_major: f64, r_minor: f64 },
    /// Coordinate expressions in the polar parameter `u` and the azimuth `v`.
    Generic { x: String, y: String, z: String },
}

impl SurfaceShape {
    pub fn kind(&self) -> &'static str {
        match self {
            SurfaceShape::Sphere { .. } => "sphere",
            SurfaceShape::Spheroid { .. } => "spheroid",
            SurfaceShape::SurfaceOfRevolution(_) => "surface_of_revolution",
            SurfaceShape::Torus { .. } => "torus",
            SurfaceShape::Generic { .. } => "generic",
        }
    }
}

/// A named surface with an optional default mesh resolution.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceSpec {
    pub name: String,
    pub shape: SurfaceShape,
    pub resolution: Option<[usize; 2]>,
}

pub const SURFACE_KINDS: [&str; 5] = ["sphere", "spheroid", "surface_of_revolution", "torus", "generic"];

impl SurfaceSpec {
    pub fn new(name: impl Into<String>, shape: SurfaceShape) -> Self {
        SurfaceSpec {
            name: name.into(),
            shape,
            resolution: None,
        }
    }

    /// Builds the chart, surfacing geometric validation errors.
    pub fn chart(&self) -> Result<SurfaceChart> {
        match &self.shape {
            SurfaceShape::Sphere { r } => SurfaceChart::sphere(*r),
            SurfaceShape::Spheroid { a, c } => SurfaceChart::spheroid(*a, *c),
            SurfaceShape::SurfaceOfRevolution(Profile::Points(p)) => {
                Ok(SurfaceChart::revolution(RevolutionProfile::from_meridian(p)?))
            }
            SurfaceShape::SurfaceOfRevolution(Profile::Coefficients(c)) => {
                Ok(SurfaceChart::revolution(RevolutionProfile::from_coefficients(c.clone())?))
            }
            SurfaceShape::Torus { r_major, r_minor } => SurfaceChart::torus(*r_major, *r_minor),
            SurfaceShape::Generic { x, y, z } => SurfaceChart::generic(x, y, z),
        }
    }

    /// JSON value of the spec; keys are emitted in sorted order.
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("name".into(), Value::from(self.name.clone()));
        m.insert("kind".into(), Value::from(self.shape.kind()));
        match &self.shape {
            SurfaceShape::Sphere { r } => {
                m.insert("R".into(), Value::from(*r));
            }
            SurfaceShape::Spheroid { a, c } => {
                m.insert("a".into(), Value::from(*a));
                m.insert("c".into(), Value::from(*c));
            }
            SurfaceShape::SurfaceOfRevolution(Profile::Points(p)) => {
                m.insert("profile".into(), serde_json::to_value(p).expect("finite points"));
            }
            SurfaceShape::SurfaceOfRevolution(Profile::Coefficients(c)) => {
                m.insert("coefficients".into(), serde_json::to_value(c).expect("finite coefficients"));
            }
            SurfaceShape::Torus { r_major, r_minor } => {
                m.insert("R_major".into(), Value::from(*r_major));
                m.insert("r_minor".into(), Value::from(*r_minor));
            }
            SurfaceShape::Generic { x, y, z } => {
                m.insert("x".into(), Value::from(x.clone()));
                m.insert("y".into(), Value::from(y.clone()));
                m.insert("z".into(), Value::from(z.clone()));
            }
        }
        if let Some(r) = self.resolution {
            m.insert("resolution".into(), Value::from(r.to_vec()));
        }
        Value::Object(m)
    }
}

/// Serializes a spec to pretty-printed JSON.
pub fn emit_surface_spec(spec: &SurfaceSpec) -> String {
    serde_json::to_string_pretty(&spec.to_json()).expect("JSON values always serialize")
}

/// Parses and validates a surface document.
///
/// Errors name the offending field with a path relative to the document root.
pub fn parse_surface_spec(text: &str) -> Result<SurfaceSpec> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        Error::invalid(
            format!("line {}, column {}", e.line(), e.column()),
            format!("malformed JSON: {e}"),
        )
    })?;
    surface_from_value(&value, "")
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

/// Reads a surface object; `prefix` qualifies field paths in errors.
pub fn surface_from_value(value: &Value, prefix: &str) -> Result<SurfaceSpec> {
    let obj = value.as_object().ok_or_else(|| {
        Error::invalid(if prefix.is_empty() { "$" } else { prefix }, "expected an object")
    })?;
    let fields = Fields { obj, prefix };
    let kind = fields.string("kind")?;
    let (shape, allowed): (SurfaceShape, &[&str]) = match kind.as_str() {
        "sphere" => (
            SurfaceShape::Sphere {
                r: fields.positive("R")?,
            },
            &["R"],
        ),
        "spheroid" => (
            SurfaceShape::Spheroid {
                a: fields.positive("a")?,
                c: fields.positive("c")?,
            },
            &["a", "c"],
        ),
        "surface_of_revolution" => {
            let profile = match (obj.get("profile"), obj.get("coefficients")) {
                (Some(_), Some(_)) => {
                    return Err(Error::invalid(
                        join(prefix, "profile"),
                        "give either profile or coefficients, not both",
                    ))
                }
                (Some(p), None) => Profile::Points(fields.points(p, "profile")?),
                (None, Some(c)) => Profile::Coefficients(fields.numbers(c, "coefficients")?),
                (None, None) => return Err(Error::MissingField(join(prefix, "profile"))),
            };
            (SurfaceShape::SurfaceOfRevolution(profile), &["profile", "coefficients"])
        }
        "torus" => {
            let r_major = fields.positive("R_major")?;
            let r_minor = fields.positive("r_minor")?;
            if r_minor >= r_major {
                return Err(Error::invalid(join(prefix, "r_minor"), "must be smaller than R_major"));
            }
            (SurfaceShape::Torus { r_major, r_minor }, &["R_major", "r_minor"])
        }
        "generic" => (
            SurfaceShape::Generic {
                x: fields.expression("x")?,
                y: fields.expression("y")?,
                z: fields.expression("z")?,
            },
            &["x", "y", "z"],
        ),
        other => return Err(Error::UnknownKind(other.to_string())),
    };
    for key in obj.keys() {
        if !["name", "kind", "resolution"].contains(&key.as_str()) && !allowed.contains(&key.as_str()) {
            return Err(Error::invalid(
                join(prefix, key),
                format!("unknown field for kind `{kind}`"),
            ));
        }
    }
    let name = match obj.get("name") {
        None => kind.clone(),
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(_) => return Err(Error::invalid(join(prefix, "name"), "expected a non-empty string")),
    };
    let resolution = match obj.get("resolution") {
        None => None,
        Some(v) => Some(parse_resolution_value(v, &join(prefix, "resolution"))?),
    };
    Ok(SurfaceSpec {
        name,
        shape,
        resolution,
    })
}

fn parse_resolution_value(v: &Value, path: &str) -> Result<[usize; 2]> {
    let arr = v
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| Error::invalid(path, "expected [n1, n2]"))?;
    let mut out = [0usize; 2];
    for (i, x) in arr.iter().enumerate() {
        out[i] = x
            .as_u64()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::invalid(format!("{path}[{i}]"), "expected a positive integer"))?
            as usize;
    }
    Ok(out)
}

struct Fields<'a> {
    obj: &'a Map<String, Value>,
    prefix: &'a str,
}

impl Fields<'_> {
    fn get(&self, key: &str) -> Result<&Value> {
        self.obj
            .get(key)
            .ok_or_else(|| Error::MissingField(join(self.prefix, key)))
    }

    fn string(&self, key: &str) -> Result<String> {
        match self.get(key)? {
            Value::String(s) if !s.trim().is_empty() => Ok(s.clone()),
            _ => Err(Error::invalid(join(self.prefix, key), "expected a non-empty string")),
        }
    }

    /// A string that parses as an expression in `u`, `v`.
    fn expression(&self, key: &str) -> Result<String> {
        let text = self.string(key)?;
        Expression::parse(&text, &["u", "v"], &join(self.prefix, key))?;
        Ok(text)
    }

    fn positive(&self, key: &str) -> Result<f64> {
        let v = self
            .get(key)?
            .as_f64()
            .ok_or_else(|| Error::invalid(join(self.prefix, key), "expected a number"))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(join(self.prefix, key), format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    fn numbers(&self, v: &Value, key: &str) -> Result<Vec<f64>> {
        let path = join(self.prefix, key);
        let arr = v
            .as_array()
            .filter(|a| !a.is_empty())
            .ok_or_else(|| Error::invalid(&path, "expected a non-empty array of numbers"))?;
        arr.iter()
            .enumerate()
            .map(|(i, x)| {
                x.as_f64()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::invalid(format!("{path}[{i}]"), "expected a finite number"))
            })
            .collect()
    }

    fn points(&self, v: &Value, key: &str) -> Result<Vec<[f64; 2]>> {
        let path = join(self.prefix, key);
        let arr = v
            .as_array()
            .ok_or_else(|| Error::invalid(&path, "expected an array of [rho, z] pairs"))?;
        let mut out = Vec::with_capacity(arr.len());
        for (i, p) in arr.iter().enumerate() {
            let pair = p
                .as_array()
                .filter(|a| a.len() == 2)
                .and_then(|a| Some([a[0].as_f64()?, a[1].as_f64()?]))
                .ok_or_else(|| Error::invalid(format!("{path}[{i}]"), "expected [rho, z]"))?;
            out.push(pair);
        }
        // strictly increasing polar angle about the origin, from north to south
        for i in 1..out.len() {
            let angle = |p: [f64; 2]| p[0].atan2(p[1]);
            if !(angle(out[i]) > angle(out[i - 1])) {
                return Err(Error::invalid(
                    format!("{path}[{i}]"),
                    "profile points must advance strictly from the north to the south axis point",
                ));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let s = parse_surface_spec(r#"{"kind": "sphere", "R": 1.0}"#).unwrap();
        assert_eq!(s.shape, SurfaceShape::Sphere { r: 1.0 });
        assert_eq!(s.name, "sphere");
        assert_eq!(
            parse_surface_spec(r#"{"kind": "klein_bottle"}"#),
            Err(Error::UnknownKind("klein_bottle".into()))
        );
        assert_eq!(
            parse_surface_spec(r#"{"kind": "spheroid", "a": 1.0}"#),
            Err(Error::MissingField("c".into()))
        );
    }
}
