//! Penn-Treebank-style bracketed constituent tree parsing and printing.
//!
//! Grammar: a tree is `(LABEL child child ...)` where each child is either
//! another tree or — for preterminals — a single token, as in `(NN cat)`.
//! Leaves are numbered left to right; every node records its inclusive token
//! yield `(start, end)`. Unary chains (e.g. `(S (NP (NN dog)))`) are kept as
//! distinct nodes.

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// One node of a parsed constituent tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeNode {
    pub label: String,
    /// Inclusive token yield within the sentence.
    pub start: usize,
    pub end: usize,
    pub parent: Option<usize>,
    /// Child node indices, in left-to-right order; empty for preterminals.
    pub children: Vec<usize>,
}

/// A parsed constituent tree for one sentence.
///
/// `nodes` is in the order encountered by the parser (parent before child);
/// `tokens` holds the terminal strings in sentence order, so the tree can be
/// printed back verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstituentTree {
    pub nodes: Vec<TreeNode>,
    pub root: usize,
    pub tokens: Vec<String>,
}

impl ConstituentTree {
    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }

    /// Indices of preterminal nodes (nodes with no child nodes), i.e. the
    /// nodes whose yield is the single token they dominate.
    pub fn preterminals(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].children.is_empty())
    }
}

#[derive(Debug, PartialEq)]
enum Token<'a> {
    Open,
    Close,
    Atom(&'a str),
}

fn lex(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        let c = rest.chars().next().unwrap();
        match c {
            '(' => {
                out.push(Token::Open);
                rest = &rest[1..];
            }
            ')' => {
                out.push(Token::Close);
                rest = &rest[1..];
            }
            c if c.is_whitespace() => {
                rest = rest.trim_start();
            }
            _ => {
                let end = rest
                    .find(|ch: char| ch == '(' || ch == ')' || ch.is_whitespace())
                    .unwrap_or(rest.len());
                out.push(Token::Atom(&rest[..end]));
                rest = &rest[end..];
            }
        }
    }
    out
}

/// Parse a bracketed tree string into a [`ConstituentTree`].
pub fn parse_ptb(text: &str) -> Result<ConstituentTree, CorpusError> {
    let tokens = lex(text);
    if tokens.is_empty() {
        return Err(CorpusError::EmptyTree);
    }
    let mut pos = 0usize;
    let mut tree = ConstituentTree { nodes: Vec::new(), root: 0, tokens: Vec::new() };
    let root = parse_node(&tokens, &mut pos, None, &mut tree)?;
    if pos != tokens.len() {
        return Err(CorpusError::UnbalancedParens);
    }
    tree.root = root;
    Ok(tree)
}

fn parse_node<'a>(
    tokens: &[Token<'a>],
    pos: &mut usize,
    parent: Option<usize>,
    tree: &mut ConstituentTree,
) -> Result<usize, CorpusError> {
    match tokens.get(*pos) {
        Some(Token::Open) => {}
        Some(Token::Close) => return Err(CorpusError::UnbalancedParens),
        Some(Token::Atom(a)) => {
            return Err(CorpusError::MalformedLeaf {
                detail: format!("bare token `{}` outside any bracket", a),
            })
        }
        None => return Err(CorpusError::UnbalancedParens),
    }
    *pos += 1;

    let label = match tokens.get(*pos) {
        Some(Token::Atom(a)) => (*a).to_string(),
        Some(Token::Open) => {
            return Err(CorpusError::MalformedLeaf {
                detail: "bracket opens directly into another bracket with no label".into(),
            })
        }
        _ => return Err(CorpusError::EmptyTree),
    };
    *pos += 1;

    let node_id = tree.nodes.len();
    tree.nodes.push(TreeNode { label, start: 0, end: 0, parent, children: Vec::new() });

    match tokens.get(*pos) {
        // Preterminal: "(POS token)".
        Some(Token::Atom(word)) => {
            let word = (*word).to_string();
            *pos += 1;
            match tokens.get(*pos) {
                Some(Token::Close) => {
                    *pos += 1;
                }
                Some(Token::Atom(extra)) => {
                    return Err(CorpusError::MalformedLeaf {
                        detail: format!(
                            "leaf `{}` has more than one token (`{}`, `{}`)",
                            tree.nodes[node_id].label, word, extra
                        ),
                    })
                }
                Some(Token::Open) => {
                    return Err(CorpusError::MalformedLeaf {
                        detail: format!(
                            "node `{}` mixes a token with bracketed children",
                            tree.nodes[node_id].label
                        ),
                    })
                }
                None => return Err(CorpusError::UnbalancedParens),
            }
            let idx = tree.tokens.len();
            tree.tokens.push(word);
            tree.nodes[node_id].start = idx;
            tree.nodes[node_id].end = idx;
        }
        // Internal node: one or more bracketed children.
        Some(Token::Open) => {
            while let Some(Token::Open) = tokens.get(*pos) {
                let child = parse_node(tokens, pos, Some(node_id), tree)?;
                tree.nodes[node_id].children.push(child);
            }
            match tokens.get(*pos) {
                Some(Token::Close) => {
                    *pos += 1;
                }
                Some(Token::Atom(a)) => {
                    return Err(CorpusError::MalformedLeaf {
                        detail: format!(
                            "node `{}` mixes bracketed children with token `{}`",
                            tree.nodes[node_id].label, a
                        ),
                    })
                }
                _ => return Err(CorpusError::UnbalancedParens),
            }
            let first = tree.nodes[node_id].children[0];
            let last = *tree.nodes[node_id].children.last().unwrap();
            tree.nodes[node_id].start = tree.nodes[first].start;
            tree.nodes[node_id].end = tree.nodes[last].end;
        }
        Some(Token::Close) => {
            return Err(CorpusError::MalformedLeaf {
                detail: format!(
                    "node `{}` has neither a token nor children",
                    tree.nodes[node_id].label
                ),
            })
        }
        None => return Err(CorpusError::UnbalancedParens),
    }
    Ok(node_id)
}

/// Print a tree back to its bracketed form. `parse_ptb(print_ptb(t)) == t`
/// for every tree produced by [`parse_ptb`].
pub fn print_ptb(tree: &ConstituentTree) -> String {
    let mut out = String::new();
    print_node(tree, tree.root, &mut out);
    out
}

fn print_node(tree: &ConstituentTree, id: usize, out: &mut String) {
    let node = &tree.nodes[id];
    out.push('(');
    out.push_str(&node.label);
    if node.children.is_empty() {
        out.push(' ');
        out.push_str(&tree.tokens[node.start]);
    } else {
        for &child in &node.children {
            out.push(' ');
            print_node(tree, child, out);
        }
    }
    out.push(')');
}
