//! Minimal structural schemas for model responses.

use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum Schema {
    String,
    Number,
    Boolean,
    Enum(Vec<&'static str>),
    Array(Box<Schema>),
    Object(Vec<Field>),
    Nullable(Box<Schema>),
    /// A JSON number or an array of numbers.
    NumberOrArray,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub name: &'static str,
    pub schema: Schema,
    pub required: bool,
}

pub fn req(name: &'static str, schema: Schema) -> Field {
    Field { name, schema, required: true }
}

pub fn opt(name: &'static str, schema: Schema) -> Field {
    Field { name, schema, required: false }
}

pub fn nullable(s: Schema) -> Schema {
    Schema::Nullable(Box::new(s))
}

pub fn array(s: Schema) -> Schema {
    Schema::Array(Box::new(s))
}

/// First violation found while validating, with a JSON-pointer-ish path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", if self.path.is_empty() { "$" } else { &self.path }, self.message)
    }
}

impl Schema {
    pub fn validate(&self, value: &Value) -> Result<(), Violation> {
        self.check(value, "")
    }

    fn check(&self, value: &Value, path: &str) -> Result<(), Violation> {
        let fail = |message: String| Err(Violation { path: path.to_string(), message });
        match self {
            Schema::Nullable(inner) => {
                if value.is_null() {
                    Ok(())
                } else {
                    inner.check(value, path)
                }
            }
            Schema::String => match value {
                Value::String(_) => Ok(()),
                other => fail(format!("expected string, got {}", kind(other))),
            },
            Schema::Number => match value.as_f64() {
                Some(x) if x.is_finite() => Ok(()),
                _ => fail(format!("expected finite number, got {}", kind(value))),
            },
            Schema::Boolean => match value {
                Value::Bool(_) => Ok(()),
                other => fail(format!("expected boolean, got {}", kind(other))),
            },
            Schema::Enum(allowed) => match value.as_str() {
                Some(s) if allowed.contains(&s) => Ok(()),
                _ => fail(format!("expected one of {allowed:?}, got {value}")),
            },
            Schema::NumberOrArray => match value {
                Value::Number(_) => Schema::Number.check(value, path),
                Value::Array(items) if !items.is_empty() => {
                    for (i, it) in items.iter().enumerate() {
                        Schema::Number.check(it, &format!("{path}/{i}"))?;
                    }
                    Ok(())
                }
                other => fail(format!("expected number or non-empty number array, got {}", kind(other))),
            },
            Schema::Array(inner) => match value {
                Value::Array(items) => {
                    for (i, it) in items.iter().enumerate() {
                        inner.check(it, &format!("{path}/{i}"))?;
                    }
                    Ok(())
                }
                other => fail(format!("expected array, got {}", kind(other))),
            },
            Schema::Object(fields) => {
                let Value::Object(map) = value else {
                    return fail(format!("expected object, got {}", kind(value)));
                };
                for f in fields {
                    match map.get(f.name) {
                        Some(v) => f.schema.check(v, &format!("{path}/{}", f.name))?,
                        None if f.required => return fail(format!("missing required field {:?}", f.name)),
                        None => {}
                    }
                }
                for key in map.keys() {
                    if !fields.iter().any(|f| f.name == key) {
                        return fail(format!("unexpected field {key:?}"));
                    }
                }
                Ok(())
            }
        }
    }
}

fn kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}
