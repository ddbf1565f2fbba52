//! Line-oriented model file. Floats use Rust's shortest round-trip
//! formatting, so write → read → write is byte-stable.
//!
//! ```text
//! condmon-gbdt 1
//! features a,b,c
//! base_score -2.1
//! params num_trees=2 max_depth=1 ...
//! loss_history 0.69 0.5 0.4
//! trees 2
//! tree S 0 0.5 1.25 L -0.3 L 0.8
//! tree L 0.1
//! ```
//! Trees are pre-order: `S feature threshold gain <left> <right>` or `L value`.

use std::fmt::Write as _;
use std::str::SplitWhitespace;

use super::{GbdtError, GbdtModel, GbdtParams, Result, TreeNode};

pub const MODEL_FORMAT_HEADER: &str = "condmon-gbdt 1";

pub fn write_model(model: &GbdtModel) -> String {
    let mut out = String::new();
    let p = &model.params;
    let _ = writeln!(out, "{MODEL_FORMAT_HEADER}");
    let _ = writeln!(out, "features {}", model.feature_names.join(","));
    let _ = writeln!(out, "base_score {:?}", model.base_score);
    let _ = writeln!(
        out,
        "params num_trees={} max_depth={} min_samples_leaf={} learning_rate={:?} min_gain_to_split={:?} lambda_l2={:?} subsample={:?}",
        p.num_trees, p.max_depth, p.min_samples_leaf, p.learning_rate, p.min_gain_to_split, p.lambda_l2, p.subsample
    );
    let history: Vec<String> = model
        .loss_history
        .iter()
        .map(|v| format!("{v:?}"))
        .collect();
    let _ = writeln!(out, "loss_history {}", history.join(" "));
    let _ = writeln!(out, "trees {}", model.trees.len());
    for tree in &model.trees {
        out.push_str("tree");
        write_node(tree, &mut out);
        out.push('\n');
    }
    out
}

fn write_node(node: &TreeNode, out: &mut String) {
    match node {
        TreeNode::Leaf { value } => {
            let _ = write!(out, " L {value:?}");
        }
        TreeNode::Split {
            feature,
            threshold,
            gain,
            left,
            right,
        } => {
            let _ = write!(out, " S {feature} {threshold:?} {gain:?}");
            write_node(left, out);
            write_node(right, out);
        }
    }
}

pub fn read_model(text: &str) -> Result<GbdtModel> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |expect: &str| -> Result<(usize, String)> {
        let (n, line) = lines.next().ok_or_else(|| GbdtError::Format {
            line: 0,
            message: format!("unexpected end of file, expected {expect}"),
        })?;
        Ok((n, line.to_string()))
    };
    let fmt_err = |line: usize, message: String| GbdtError::Format { line, message };

    let (n, header) = next("header")?;
    if header.trim() != MODEL_FORMAT_HEADER {
        return Err(fmt_err(n, format!("unsupported header {header:?}")));
    }
    let (n, line) = next("features")?;
    let features = field(&line, "features").ok_or_else(|| fmt_err(n, "missing features".into()))?;
    let feature_names: Vec<String> = if features.is_empty() {
        vec![]
    } else {
        features.split(',').map(str::to_string).collect()
    };

    let (n, line) = next("base_score")?;
    let base_score = parse_f64(field(&line, "base_score").unwrap_or(""), n)?;

    let (n, line) = next("params")?;
    let params = parse_params(
        field(&line, "params").ok_or_else(|| fmt_err(n, "missing params".into()))?,
        n,
    )?;

    let (n, line) = next("loss_history")?;
    let loss_history = field(&line, "loss_history")
        .ok_or_else(|| fmt_err(n, "missing loss_history".into()))?
        .split_whitespace()
        .map(|t| parse_f64(t, n))
        .collect::<Result<Vec<_>>>()?;

    let (n, line) = next("trees")?;
    let count: usize = field(&line, "trees")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| fmt_err(n, "missing tree count".into()))?;
    let mut trees = Vec::with_capacity(count);
    for _ in 0..count {
        let (n, line) = next("tree")?;
        let body = field(&line, "tree").ok_or_else(|| fmt_err(n, "expected tree line".into()))?;
        let mut tokens = body.split_whitespace();
        let node = read_node(&mut tokens, n, feature_names.len())?;
        if tokens.next().is_some() {
            return Err(fmt_err(n, "trailing tokens after tree".into()));
        }
        trees.push(node);
    }
    Ok(GbdtModel {
        trees,
        learning_rate: params.learning_rate,
        base_score,
        feature_names,
        params,
        loss_history,
    })
}

fn field<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let rest = line.strip_prefix(key)?;
    if rest.is_empty() {
        Some("")
    } else {
        rest.strip_prefix(' ')
    }
}

fn parse_f64(token: &str, line: usize) -> Result<f64> {
    token.parse().map_err(|_| GbdtError::Format {
        line,
        message: format!("invalid number {token:?}"),
    })
}

fn parse_params(body: &str, line: usize) -> Result<GbdtParams> {
    let mut p = GbdtParams::default();
    for kv in body.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| GbdtError::Format {
            line,
            message: format!("invalid param {kv:?}"),
        })?;
        let int = |v: &str| {
            v.parse::<usize>().map_err(|_| GbdtError::Format {
                line,
                message: format!("invalid integer for {k}: {v:?}"),
            })
        };
        match k {
            "num_trees" => p.num_trees = int(v)?,
            "max_depth" => p.max_depth = int(v)?,
            "min_samples_leaf" => p.min_samples_leaf = int(v)?,
            "learning_rate" => p.learning_rate = parse_f64(v, line)?,
            "min_gain_to_split" => p.min_gain_to_split = parse_f64(v, line)?,
            "lambda_l2" => p.lambda_l2 = parse_f64(v, line)?,
            "subsample" => p.subsample = parse_f64(v, line)?,
            other => {
                return Err(GbdtError::Format {
                    line,
                    message: format!("unknown param {other:?}"),
                })
            }
        }
    }
    Ok(p)
}

fn read_node(tokens: &mut SplitWhitespace<'_>, line: usize, n_features: usize) -> Result<TreeNode> {
    let err = |m: &str| GbdtError::Format {
        line,
        message: m.to_string(),
    };
    match tokens.next() {
        Some("L") => {
            let value = parse_f64(
                tokens.next().ok_or_else(|| err("leaf without value"))?,
                line,
            )?;
            Ok(TreeNode::Leaf { value })
        }
        Some("S") => {
            let feature: usize = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| err("split without feature index"))?;
            if feature >= n_features {
                return Err(err("split feature index out of range"));
            }
            let threshold = parse_f64(
                tokens
                    .next()
                    .ok_or_else(|| err("split without threshold"))?,
                line,
            )?;
            let gain = parse_f64(
                tokens.next().ok_or_else(|| err("split without gain"))?,
                line,
            )?;
            let left = read_node(tokens, line, n_features)?;
            let right = read_node(tokens, line, n_features)?;
            Ok(TreeNode::Split {
                feature,
                threshold,
                gain,
                left: Box::new(left),
                right: Box::new(right),
            })
        }
        Some(other) => Err(err(&format!("unknown node tag {other:?}"))),
        None => Err(err("truncated tree")),
    }
}
