//! Model registry and token-cost arithmetic.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::GatewayError;

/// One priced model: a short alias for configs plus the wire name sent to
/// the API, with per-million-token USD prices.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ModelSpec {
    pub alias: String,
    pub wire_name: String,
    pub input_per_million: f64,
    pub output_per_million: f64,
}

#[derive(Clone, Default, Debug)]
pub struct PricingTable {
    models: BTreeMap<String, ModelSpec>,
}

#[derive(Deserialize)]
struct PricingFile {
    #[serde(rename = "model")]
    models: Vec<ModelSpec>,
}

pub const DEFAULT_PRICING: &str = include_str!("../../assets/pricing.toml");

impl PricingTable {
    pub fn empty() -> PricingTable {
        PricingTable::default()
    }

    /// The five models shipped in the default pricing file.
    pub fn builtin() -> PricingTable {
        PricingTable::from_toml(DEFAULT_PRICING).expect("embedded pricing parses")
    }

    pub fn from_toml(text: &str) -> Result<PricingTable, GatewayError> {
        let file: PricingFile =
            toml::from_str(text).map_err(|e| GatewayError::BadPricing(e.to_string()))?;
        let mut table = PricingTable::empty();
        for spec in file.models {
            table.register(spec)?;
        }
        Ok(table)
    }

    pub fn register(&mut self, spec: ModelSpec) -> Result<(), GatewayError> {
        if spec.input_per_million < 0.0 || spec.output_per_million < 0.0 {
            return Err(GatewayError::BadPricing(format!(
                "negative price for {}",
                spec.alias
            )));
        }
        if self.models.contains_key(&spec.alias) {
            return Err(GatewayError::BadPricing(format!(
                "duplicate alias {}",
                spec.alias
            )));
        }
        self.models.insert(spec.alias.clone(), spec);
        Ok(())
    }

    pub fn get(&self, alias: &str) -> Result<&ModelSpec, GatewayError> {
        self.models
            .get(alias)
            .ok_or_else(|| GatewayError::UnknownModel(alias.to_string()))
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

/// Token counts for one exchange. Some backends fold hidden reasoning
/// tokens into the completion count; `reasoning_folded` records that so
/// cost arithmetic never double-bills them.
#[derive(Clone, Copy, PartialEq, Eq, Default, Debug, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub reasoning_tokens: u64,
    #[serde(default)]
    pub reasoning_folded: bool,
}

impl TokenUsage {
    pub const ZERO: TokenUsage = TokenUsage {
        prompt_tokens: 0,
        completion_tokens: 0,
        reasoning_tokens: 0,
        reasoning_folded: false,
    };

    pub fn add(&mut self, other: &TokenUsage) {
        self.prompt_tokens += other.prompt_tokens;
        self.completion_tokens += other.completion_tokens;
        self.reasoning_tokens += other.reasoning_tokens;
        self.reasoning_folded |= other.reasoning_folded;
    }
}

/// Full price of an exchange: input tokens at the input rate, output tokens
/// (plus unfolded reasoning tokens) at the output rate.
pub fn cost(usage: &TokenUsage, spec: &ModelSpec) -> f64 {
    let billed_output = if usage.reasoning_folded {
        usage.completion_tokens
    } else {
        usage.completion_tokens + usage.reasoning_tokens
    };
    usage.prompt_tokens as f64 * spec.input_per_million / 1e6
        + billed_output as f64 * spec.output_per_million / 1e6
}

/// Price of the reasoning tokens alone, at the output rate. Reasoning-token
/// accounting treats them as the dominant cost and reports only this.
pub fn reasoning_cost(usage: &TokenUsage, spec: &ModelSpec) -> f64 {
    usage.reasoning_tokens as f64 * spec.output_per_million / 1e6
}
