use serde::{Deserialize, Serialize};

/// Provider-reported token counts for one request.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Usage {
    pub input_tokens: u64,
    pub output_tokens: u64,
}

impl Usage {
    pub fn total(&self) -> u64 {
        self.input_tokens + self.output_tokens
    }
}

/// Prices in USD per token.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub input_price: f64,
    pub output_price: f64,
}

impl CostModel {
    /// From prices quoted per million tokens.
    pub fn per_million(input: f64, output: f64) -> Self {
        Self { input_price: input / 1e6, output_price: output / 1e6 }
    }
}

/// Published prices in USD per million tokens: (model, input, output).
pub const PRICE_TABLE: &[(&str, f64, f64)] = &[
    ("gpt-3.5-turbo", 0.50, 1.50),
    ("gpt-4o-mini", 0.15, 0.60),
    ("deepseek-coder", 0.14, 0.28),
    ("codestral", 1.00, 3.00),
];

/// Price lookup by model name; dated variants such as `gpt-4o-mini-2024-07-18`
/// resolve to their family.
pub fn known_cost_model(model: &str) -> Option<CostModel> {
    let m = model.to_ascii_lowercase();
    PRICE_TABLE
        .iter()
        .filter(|(name, _, _)| m == *name || m.starts_with(&format!("{name}-")))
        .max_by_key(|(name, _, _)| name.len())
        .map(|&(_, i, o)| CostModel::per_million(i, o))
}

/// Total spend over requests: Σ (input_n · P_i + output_n · P_o).
///
/// Token counts are summed exactly as integers first, so the result does not
/// depend on the order of `usages`.
pub fn cost(usages: &[Usage], m: &CostModel) -> f64 {
    let input: u64 = usages.iter().map(|u| u.input_tokens).sum();
    let output: u64 = usages.iter().map(|u| u.output_tokens).sum();
    input as f64 * m.input_price + output as f64 * m.output_price
}
