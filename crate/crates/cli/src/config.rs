//! JSON configuration of a system of maps.
//!
//! ```json
//! {
//!   "n": 1,
//!   "N": 1,
//!   "maps": [{"name": "f", "components": ["X1^2 - 1"]}],
//!   "precision": 256,
//!   "tolerance": 1e-8,
//!   "caps": {"depth": 6},
//!   "seed": 0
//! }
//! ```
//!
//! `n` is the cyclotomic order of the coefficient field and `N` the number of
//! variables. Every section except `N` and `maps` is optional.

use cycdyn::error::{Error, Result};
use cycdyn::morphism::AffineMorphism;
use cycdyn::orbits::SemigroupSystem;
use cycdyn::parse::{parse_poly, Context};
use cycdyn::poly::MultiPoly;
use cycdyn::{Cyclotomic, Scalar};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub name: String,
    pub components: Vec<String>,
}

/// Resource caps and default search sizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapsConfig {
    /// Default orbit depth / `n_max`.
    pub depth: usize,
    /// Maximum number of points or words held at once.
    pub words: usize,
    /// Maximum bit size of a single orbit point.
    pub bits: u64,
    /// Maximum word-tree nodes per place in canonical height sums.
    pub nodes: u64,
    pub box_num: u64,
    pub box_den: u64,
    /// Coefficient bound of cyclotomic-integer boxes; boxes are rational when absent.
    pub coeff_bound: Option<u64>,
    pub k_max: usize,
    pub l_max: usize,
    pub samples: usize,
    /// Cap on the certificate degree search.
    pub e_max: Option<u32>,
}

impl Default for CapsConfig {
    fn default() -> Self {
        CapsConfig {
            depth: 6,
            words: 200_000,
            bits: 1 << 20,
            nodes: 2_000_000,
            box_num: 3,
            box_den: 3,
            coeff_bound: None,
            k_max: 8,
            l_max: 8,
            samples: 256,
            e_max: None,
        }
    }
}

fn default_order() -> u64 {
    1
}

fn default_precision() -> u32 {
    cycdyn::DEFAULT_PRECISION
}

fn default_tolerance() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(rename = "n", default = "default_order")]
    pub order: u64,
    #[serde(rename = "N")]
    pub nvars: usize,
    pub maps: Vec<MapConfig>,
    #[serde(default = "default_precision")]
    pub precision: u32,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub caps: CapsConfig,
    #[serde(default)]
    pub seed: u64,
}

/// Line and column (both 1-based) of byte `pos` in `text`.
fn position(text: &str, pos: usize) -> (usize, usize) {
    let before = &text[..pos.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

fn located(text: &str, pos: usize, message: impl Into<String>) -> Error {
    let (line, column) = position(text, pos);
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// Byte offset of the next occurrence of the JSON literal for `s` at or after `from`.
fn find_literal(text: &str, s: &str, from: usize) -> Option<usize> {
    let lit = serde_json::to_string(s).ok()?;
    text.get(from..)?.find(&lit).map(|i| i + from)
}

impl SystemConfig {
    pub fn parse(text: &str) -> Result<SystemConfig> {
        let mut cfg: SystemConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string().split(" at line").next().unwrap_or_default().to_string(),
        })?;
        let key = |k: &str| text.find(&format!("\"{k}\"")).unwrap_or(0);
        if cfg.order == 0 {
            return Err(located(text, key("n"), "cyclotomic order n must be positive"));
        }
        if cfg.nvars == 0 {
            return Err(located(text, key("N"), "variable count N must be positive"));
        }
        if cfg.maps.is_empty() {
            return Err(located(text, key("maps"), "at least one map is required"));
        }
        if cfg.precision < 32 {
            return Err(located(text, key("precision"), "precision must be at least 32 bits"));
        }
        if !(cfg.tolerance > 0.0 && cfg.tolerance.is_finite()) {
            return Err(located(text, key("tolerance"), "tolerance must be a positive number"));
        }
        let ctx = Context {
            nvars: cfg.nvars,
            order: cfg.order,
        };
        let mut cursor = key("maps");
        for (i, m) in cfg.maps.iter_mut().enumerate() {
            let at = find_literal(text, &m.name, cursor).unwrap_or(cursor);
            cursor = at;
            if m.name.is_empty() {
                return Err(located(text, at, format!("map {} has an empty name", i + 1)));
            }
            if m.components.len() != cfg.nvars {
                return Err(located(
                    text,
                    at,
                    format!(
                        "map {} has {} components but N = {}",
                        m.name,
                        m.components.len(),
                        cfg.nvars
                    ),
                ));
            }
            for c in m.components.iter_mut() {
                let at = find_literal(text, c, cursor).unwrap_or(cursor);
                cursor = at;
                let p = parse_poly(c, ctx).map_err(|e| match e {
                    Error::Parse { column, message, .. } => located(text, at + column, message),
                    other => located(text, at, other.to_string()),
                })?;
                *c = p.to_string();
            }
        }
        for (i, m) in cfg.maps.iter().enumerate() {
            if cfg.maps[..i].iter().any(|o| o.name == m.name) {
                return Err(located(
                    text,
                    find_literal(text, &m.name, 0).unwrap_or(0),
                    format!("duplicate map name {}", m.name),
                ));
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn polys(&self, m: &MapConfig) -> Result<Vec<MultiPoly<Cyclotomic>>> {
        let ctx = Context {
            nvars: self.nvars,
            order: self.order,
        };
        m.components.iter().map(|c| parse_poly(c, ctx)).collect()
    }

    /// The maps over the scalar field `C`.
    pub fn system<C: Scalar>(&self) -> Result<SemigroupSystem<C>> {
        let mut maps = Vec::new();
        for m in &self.maps {
            let comps = self
                .polys(m)?
                .iter()
                .map(|p| {
                    p.convert::<C>().ok_or_else(|| {
                        Error::InvalidInput(format!("map {} does not have coefficients in this field", m.name))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            maps.push(AffineMorphism::new(comps)?);
        }
        let names = self.maps.iter().map(|m| m.name.clone()).collect();
        let sys = SemigroupSystem::new(names, maps)?;
        Ok(match self.caps.e_max {
            Some(e) => sys.with_e_max(e),
            None => sys,
        })
    }

    /// True when every coefficient is rational.
    pub fn is_rational(&self) -> Result<bool> {
        for m in &self.maps {
            for p in self.polys(m)? {
                if p.coefficients().any(|c| c.to_rational().is_none()) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"n": 1, "N": 1, "maps": [{"name": "f", "components": ["X1^2 - 1"]}]}"#;

    #[test]
    fn minimal_config() {
        let c = SystemConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.maps[0].components, vec!["X1^2 - 1"]);
        assert_eq!(c.caps, CapsConfig::default());
        assert!(c.system::<Cyclotomic>().is_ok());
    }

    #[test]
    fn round_trip() {
        let text = r#"{
  "n": 12, "N": 2,
  "maps": [
    {"name": "f", "components": ["X1^2 + z12*X2", "(1/3)*X2^2 - z4"]},
    {"name": "g", "components": ["X2^3", "X1^3 + z3^2"]}
  ],
  "caps": {"depth": 3, "coeff_bound": 2},
  "seed": 9
}"#;
        let c = SystemConfig::parse(text).unwrap();
        let again = SystemConfig::parse(&c.to_json()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn errors_carry_positions() {
        let bad = "{\n  \"n\": 1,\n  \"N\": 1,\n  \"maps\": [{\"name\": \"f\", \"components\": [\"X1^2\", \"X1\"]}]\n}";
        match SystemConfig::parse(bad) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("components"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let sym = "{\"n\": 4, \"N\": 1,\n \"maps\": [{\"name\": \"f\", \"components\": [\"X1^2 + z7\"]}]}";
        match SystemConfig::parse(sym) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 2);
                assert!(column > 40, "{column}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(SystemConfig::parse("{\"N\": 1,}"), Err(Error::Parse { line: 1, .. })));
        assert!(SystemConfig::parse(r#"{"N": 1, "maps": [], "extra": 1}"#).is_err());
    }
}
