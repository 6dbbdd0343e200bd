//! Checkpoint files.
//!
//! ```text
//! COOPCKPT1\n
//! key=value;key=value;...\n
//! <genome_len little-endian IEEE-754 f64 values>
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::es::EsConfig;
use crate::layer::{ContextMixing, LayerConfig, LayerKind};
use crate::modulation::ModulationKind;
use crate::policy::AgentConfig;

pub const MAGIC: &[u8] = b"COOPCKPT1\n";
pub const ENV_NAME: &str = "cartpole";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub agent: AgentConfig,
    pub es: EsConfig,
    /// Standard deviation of the initial genome.
    pub init_scale: f64,
    /// ES generations applied to `genome`.
    pub iteration: usize,
    pub genome: Vec<f64>,
}

impl Checkpoint {
    fn header(&self) -> String {
        let layer = &self.agent.layer;
        let modulation = layer.kind.modulation().map_or("none", ModulationKind::name);
        let fields: Vec<(&str, String)> = vec![
            ("env", ENV_NAME.to_string()),
            ("layer", layer.kind.name().to_string()),
            ("modulation", modulation.to_string()),
            ("mixing", layer.mixing.name().to_string()),
            ("n_components", layer.n_components.to_string()),
            ("d_msg", layer.d_msg.to_string()),
            ("d_action", layer.d_action.to_string()),
            ("hidden", self.agent.hidden.to_string()),
            ("population", self.es.population.to_string()),
            ("sigma", self.es.sigma.to_string()),
            ("learning_rate", self.es.learning_rate.to_string()),
            ("iterations", self.es.iterations.to_string()),
            ("episodes_per_eval", self.es.episodes_per_eval.to_string()),
            ("seed", self.es.base_seed.to_string()),
            ("init_scale", self.init_scale.to_string()),
            ("iteration", self.iteration.to_string()),
            ("genome_len", self.genome.len().to_string()),
        ];
        fields
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(MAGIC.len() + 512 + 8 * self.genome.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(self.header().as_bytes());
        out.push(b'\n');
        for v in &self.genome {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let rest = bytes.strip_prefix(MAGIC).ok_or(Error::BadMagic)?;
        let newline = rest.iter().position(|&b| b == b'\n').ok_or_else(|| Error::HeaderField {
            field: "header".into(),
            reason: "missing terminating newline".into(),
        })?;
        let header = std::str::from_utf8(&rest[..newline]).map_err(|_| Error::HeaderField {
            field: "header".into(),
            reason: "not valid UTF-8".into(),
        })?;
        let fields = HeaderFields::parse(header)?;
        let payload = &rest[newline + 1..];

        let env: String = fields.get("env")?;
        if env != ENV_NAME {
            return Err(field_error("env", format!("unsupported environment `{env}`")));
        }
        let layer_name: String = fields.get("layer")?;
        let modulation_name: String = fields.get("modulation")?;
        let kind = match layer_name.as_str() {
            "transformer" => LayerKind::Transformer,
            "cooperator" => LayerKind::Cooperator(
                modulation_name
                    .parse()
                    .map_err(|e: Error| field_error("modulation", e.to_string()))?,
            ),
            other => return Err(field_error("layer", format!("unknown layer kind `{other}`"))),
        };
        let mixing: ContextMixing = fields
            .get::<String>("mixing")?
            .parse()
            .map_err(|e: Error| field_error("mixing", e.to_string()))?;
        let agent = AgentConfig {
            layer: LayerConfig {
                n_components: fields.get("n_components")?,
                d_msg: fields.get("d_msg")?,
                d_action: fields.get("d_action")?,
                kind,
                mixing,
            },
            hidden: fields.get("hidden")?,
        };
        agent
            .layer
            .validate()
            .map_err(|e| field_error("d_msg", e.to_string()))?;
        let es = EsConfig {
            population: fields.get("population")?,
            sigma: fields.get("sigma")?,
            learning_rate: fields.get("learning_rate")?,
            iterations: fields.get("iterations")?,
            episodes_per_eval: fields.get("episodes_per_eval")?,
            base_seed: fields.get("seed")?,
        };
        let genome_len: usize = fields.get("genome_len")?;
        if genome_len != agent.genome_len() {
            return Err(field_error(
                "genome_len",
                format!("{genome_len} does not match the {} parameters implied by the dimensions", agent.genome_len()),
            ));
        }
        if payload.len() != genome_len * 8 {
            return Err(Error::PayloadLength {
                expected: genome_len,
                actual_bytes: payload.len(),
            });
        }
        let genome = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(Checkpoint {
            agent,
            es,
            init_scale: fields.get("init_scale")?,
            iteration: fields.get("iteration")?,
            genome,
        })
    }
}

fn field_error(field: &str, reason: impl Into<String>) -> Error {
    Error::HeaderField {
        field: field.to_string(),
        reason: reason.into(),
    }
}

struct HeaderFields<'a> {
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> HeaderFields<'a> {
    fn parse(header: &'a str) -> Result<Self> {
        let mut pairs = Vec::new();
        for item in header.split(';') {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| field_error(item, "expected key=value"))?;
            if pairs.iter().any(|(seen, _)| *seen == k) {
                return Err(field_error(k, "duplicate key"));
            }
            pairs.push((k, v));
        }
        Ok(HeaderFields { pairs })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| field_error(key, "missing"))?;
        raw.parse()
            .map_err(|_| field_error(key, format!("cannot parse `{raw}`")))
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    fs::write(path, ckpt.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    fn sample(kind: LayerKind) -> Checkpoint {
        let agent = AgentConfig::cartpole(kind);
        let mut rng = RngState::new(31);
        Checkpoint {
            agent,
            es: EsConfig {
                sigma: 0.1 + 1e-17,
                base_seed: u64::MAX,
                ..EsConfig::default()
            },
            init_scale: 0.1,
            iteration: 42,
            genome: rng.gaussian_vec(agent.genome_len()),
        }
    }

    fn bits(v: &[f64]) -> Vec<u64> {
        v.iter().map(|x| x.to_bits()).collect()
    }

    #[test]
    fn round_trip_is_exact() {
        for kind in [LayerKind::Cooperator(ModulationKind::Tm4), LayerKind::Transformer] {
            let c = sample(kind);
            let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
            assert_eq!(bits(&back.genome), bits(&c.genome));
            assert_eq!(back, c);
        }
    }

    #[test]
    fn header_is_readable_text() {
        let bytes = sample(LayerKind::Transformer).to_bytes();
        let text = String::from_utf8_lossy(&bytes[..200]);
        assert!(text.starts_with("COOPCKPT1\nenv=cartpole;layer=transformer;modulation=none;"));
    }

    #[test]
    fn truncated_payload() {
        let mut bytes = sample(LayerKind::Transformer).to_bytes();
        bytes.truncate(bytes.len() - 8);
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::PayloadLength { .. })));
    }

    #[test]
    fn bad_magic() {
        let mut bytes = sample(LayerKind::Transformer).to_bytes();
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::BadMagic)));
    }

    fn with_header_edit(from: &str, to: &str) -> Error {
        let bytes = sample(LayerKind::Cooperator(ModulationKind::Cooperation)).to_bytes();
        let end = MAGIC.len() + bytes[MAGIC.len()..].iter().position(|&b| b == b'\n').unwrap();
        let header = std::str::from_utf8(&bytes[..end]).unwrap().replacen(from, to, 1);
        let mut edited = header.into_bytes();
        edited.extend_from_slice(&bytes[end..]);
        Checkpoint::from_bytes(&edited).unwrap_err()
    }

    #[test]
    fn errors_name_the_failing_field() {
        let cases = [
            ("d_msg=32", "d_msg=30", "genome_len"),
            ("modulation=cooperation", "modulation=tm9", "modulation"),
            ("sigma=", "sigma=x", "sigma"),
            ("hidden=16;", "", "hidden"),
            ("layer=cooperator", "layer=lstm", "layer"),
            ("env=cartpole", "env=ant", "env"),
        ];
        for (from, to, field) in cases {
            match with_header_edit(from, to) {
                Error::HeaderField { field: f, .. } => assert_eq!(f, field, "{from} -> {to}"),
                other => panic!("{from} -> {to}: unexpected {other:?}"),
            }
        }
    }
}
