//! Run configuration: model dimensions, segmentation, pruning, optimizer
//! settings, and ablation switches, with strict JSON parsing and validation.
//!
//! Every field has a default, unknown keys are rejected, and `validate`
//! runs before anything is built so dimension mismatches surface as config
//! errors instead of panics deep in the math.

use serde::{Deserialize, Serialize};

use crate::coref::CorefHeadConfig;
use crate::corpus::{OverlapMode, SegmenterConfig};
use crate::propagation::SyntaxEncoderConfig;

#[derive(Debug, Clone, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid config: {field}: {detail}")]
    Invalid { field: &'static str, detail: String },
    #[error("config parse error: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    // Token and constituent representations.
    /// Width of token embeddings and of the fused token representation.
    pub d_token: usize,
    /// Width of the constituent label embedding.
    pub d_type: usize,
    /// Width of constituent node states inside the graph attention stack.
    pub d_hidden: usize,
    /// Attention heads per layer; must divide both d_token and d_hidden.
    pub n_heads: usize,
    /// Rounds of constituent↔token message passing.
    pub n_layers: usize,
    pub leaky_slope: f64,

    // Document segmentation.
    pub segment_len: usize,
    pub insert_speakers: bool,

    // Span ranking head.
    pub d_feature: usize,
    pub ffnn_hidden: usize,
    pub max_span_width: usize,
    /// λ: keep ⌈λ·n_tokens⌉ spans after mention scoring.
    pub prune_ratio: f64,
    /// Candidate antecedents per span surviving the coarse filter.
    pub coarse_top_c: usize,
    pub spans_within_sentences: bool,

    // Optimization.
    pub lr: f64,
    pub warmup_fraction: f64,
    pub steps: usize,
    pub eval_every: usize,
    pub seed: u64,
    /// Stop as soon as dev Avg F1 reaches this value (fraction in (0, 1]).
    pub target_avg_f1: Option<f64>,

    // Ablations.
    /// Use only parent/child and self-loop edge types.
    pub vanilla_tree: bool,
    /// Replace the gated fusion with the raw infused tokens.
    pub no_gate: bool,
    /// Initialize constituents from label embeddings alone.
    pub type_embedding_only: bool,
    /// Split documents into non-overlapping windows instead of overlapped.
    pub independent_segments: bool,
}

impl Default for Config {
    fn default() -> Config {
        Config {
            d_token: 64,
            d_type: 300,
            d_hidden: 64,
            n_heads: 4,
            n_layers: 2,
            leaky_slope: 0.2,
            segment_len: 128,
            insert_speakers: true,
            d_feature: 20,
            ffnn_hidden: 64,
            max_span_width: 10,
            prune_ratio: 0.4,
            coarse_top_c: 50,
            spans_within_sentences: true,
            lr: 3e-4,
            warmup_fraction: 0.1,
            steps: 1000,
            eval_every: 100,
            seed: 42,
            target_avg_f1: None,
            vanilla_tree: false,
            no_gate: false,
            type_embedding_only: false,
            independent_segments: false,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn bad(field: &'static str, detail: impl Into<String>) -> ConfigError {
            ConfigError::Invalid { field, detail: detail.into() }
        }
        let positive: [(&'static str, usize); 9] = [
            ("d_token", self.d_token),
            ("d_type", self.d_type),
            ("d_hidden", self.d_hidden),
            ("n_heads", self.n_heads),
            ("n_layers", self.n_layers),
            ("d_feature", self.d_feature),
            ("ffnn_hidden", self.ffnn_hidden),
            ("max_span_width", self.max_span_width),
            ("coarse_top_c", self.coarse_top_c),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(bad(field, "must be at least 1"));
            }
        }
        if self.d_token % self.n_heads != 0 {
            return Err(bad("n_heads", format!("must divide d_token ({})", self.d_token)));
        }
        if self.d_hidden % self.n_heads != 0 {
            return Err(bad("n_heads", format!("must divide d_hidden ({})", self.d_hidden)));
        }
        if !(self.leaky_slope >= 0.0 && self.leaky_slope < 1.0) {
            return Err(bad("leaky_slope", "must lie in [0, 1)"));
        }
        if self.segment_len < 2 {
            return Err(bad("segment_len", "must be at least 2"));
        }
        if !self.independent_segments && self.segment_len % 2 != 0 {
            return Err(bad("segment_len", "must be even for overlapped segmentation"));
        }
        if !(self.prune_ratio > 0.0 && self.prune_ratio <= 1.0) {
            return Err(bad("prune_ratio", "must lie in (0, 1]"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(bad("lr", "must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(bad("warmup_fraction", "must lie in [0, 1]"));
        }
        if self.steps == 0 {
            return Err(bad("steps", "must be at least 1"));
        }
        if self.eval_every == 0 {
            return Err(bad("eval_every", "must be at least 1"));
        }
        if let Some(t) = self.target_avg_f1 {
            if !(t > 0.0 && t <= 1.0) {
                return Err(bad("target_avg_f1", "must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    /// Parse from JSON and validate.
    pub fn from_json(text: &str) -> Result<Config, ConfigError> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn segmenter(&self) -> SegmenterConfig {
        SegmenterConfig {
            segment_len: self.segment_len,
            insert_speakers: self.insert_speakers,
            overlap_mode: if self.independent_segments {
                OverlapMode::Independent
            } else {
                OverlapMode::Overlapped
            },
        }
    }

    pub fn encoder(&self) -> SyntaxEncoderConfig {
        SyntaxEncoderConfig {
            d_token: self.d_token,
            d_type: self.d_type,
            d_hidden: self.d_hidden,
            n_heads: self.n_heads,
            n_layers: self.n_layers,
            leaky_slope: self.leaky_slope,
            vanilla_tree: self.vanilla_tree,
            type_embedding_only: self.type_embedding_only,
            use_gate: !self.no_gate,
        }
    }

    pub fn head(&self, n_genres: usize) -> CorefHeadConfig {
        CorefHeadConfig {
            d_token: self.d_token,
            feature_width: self.d_feature,
            hidden: self.ffnn_hidden,
            max_span_width: self.max_span_width,
            prune_ratio: self.prune_ratio,
            coarse_top_c: self.coarse_top_c,
            spans_within_sentences: self.spans_within_sentences,
            n_genres,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let cfg = Config::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.d_token, 64);
        assert_eq!(cfg.d_type, 300);
        assert_eq!(cfg.n_heads, 4);
        assert_eq!(cfg.n_layers, 2);
        assert_eq!(cfg.d_hidden, 64);
        assert_eq!(cfg.lr, 3e-4);
        assert_eq!(cfg.prune_ratio, 0.4);
        assert_eq!(cfg.max_span_width, 10);
        assert_eq!(cfg.coarse_top_c, 50);
        assert_eq!(cfg.segment_len, 128);
        assert_eq!(cfg.leaky_slope, 0.2);
        assert_eq!(cfg.warmup_fraction, 0.1);
        assert_eq!(cfg.seed, 42);
        assert!(cfg.insert_speakers && cfg.spans_within_sentences);
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(Config::from_json(&json).unwrap(), cfg);
    }

    #[test]
    fn empty_object_gives_defaults_and_partial_overrides_merge() {
        assert_eq!(Config::from_json("{}").unwrap(), Config::default());
        let cfg = Config::from_json(r#"{"d_token": 8, "n_heads": 2, "vanilla_tree": true}"#).unwrap();
        assert_eq!(cfg.d_token, 8);
        assert_eq!(cfg.n_heads, 2);
        assert!(cfg.vanilla_tree);
        assert_eq!(cfg.steps, 1000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = Config::from_json(r#"{"d_tokens": 8}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)), "{err}");
    }

    #[test]
    fn invalid_values_name_the_field() {
        for (json, field) in [
            (r#"{"d_token": 0}"#, "d_token"),
            (r#"{"n_heads": 3}"#, "n_heads"),
            (r#"{"d_hidden": 62, "n_heads": 4}"#, "n_heads"),
            (r#"{"prune_ratio": 0.0}"#, "prune_ratio"),
            (r#"{"prune_ratio": 1.5}"#, "prune_ratio"),
            (r#"{"lr": 0.0}"#, "lr"),
            (r#"{"warmup_fraction": 1.5}"#, "warmup_fraction"),
            (r#"{"steps": 0}"#, "steps"),
            (r#"{"segment_len": 1}"#, "segment_len"),
            (r#"{"segment_len": 9}"#, "segment_len"),
            (r#"{"leaky_slope": 1.0}"#, "leaky_slope"),
            (r#"{"target_avg_f1": 0.0}"#, "target_avg_f1"),
            (r#"{"max_span_width": 0}"#, "max_span_width"),
        ] {
            match Config::from_json(json) {
                Err(ConfigError::Invalid { field: f, .. }) => assert_eq!(f, field, "{json}"),
                other => panic!("{json}: expected invalid-{field}, got {other:?}"),
            }
        }
    }

    #[test]
    fn derived_sub_configs_reflect_ablations() {
        let mut cfg = Config::default();
        cfg.no_gate = true;
        cfg.vanilla_tree = true;
        cfg.independent_segments = true;
        let enc = cfg.encoder();
        assert!(!enc.use_gate && enc.vanilla_tree);
        assert_eq!(cfg.segmenter().overlap_mode, OverlapMode::Independent);
        let head = cfg.head(3);
        assert_eq!(head.n_genres, 3);
        assert_eq!(head.d_token, cfg.d_token);
    }
}
