//! Graphviz DOT and JSON renderings of expression graphs.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use adsym_core::{ExprStore, Node, NodeId};

fn label(store: &ExprStore, node: Node) -> String {
    match node {
        Node::Var(v) => store.var_name(v).unwrap_or("?").to_string(),
        Node::Const(c) => format!("{c}"),
        Node::Unary(op, _) => op.name().to_string(),
        Node::Binary(op, _, _) => match op {
            adsym_core::OpKind::Add => "+".into(),
            adsym_core::OpKind::Sub => "-".into(),
            adsym_core::OpKind::Mul => "*".into(),
            _ => "/".into(),
        },
        Node::SymbolRef(b) => store.binding(b).map(|b| b.name.clone()).unwrap_or_default(),
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Nodes reachable from `root` as a DOT digraph with edges from child to
/// parent. In a forest, the nodes defining each binding are grouped in a
/// cluster and symbol references get a dashed edge from the binding root.
pub fn to_dot(store: &ExprStore, root: NodeId) -> String {
    let ids = store.reachable_ids(root);
    // owner binding of each node: the binding whose root reaches it without
    // passing through a symbol reference
    let mut owner: BTreeMap<NodeId, usize> = BTreeMap::new();
    for (k, b) in store.bindings().iter().enumerate() {
        let mut stack = vec![b.root];
        while let Some(id) = stack.pop() {
            if owner.contains_key(&id) || !ids.contains(&id) {
                continue;
            }
            owner.insert(id, k);
            let n = store.node(id);
            if !matches!(n, Node::SymbolRef(_)) {
                stack.extend(n.children());
            }
        }
    }
    let mut out = String::from("digraph expr {\n  rankdir=BT;\n  node [fontname=\"Helvetica\"];\n");
    let node_line = |out: &mut String, id: NodeId, indent: &str| {
        let n = store.node(id);
        let shape = match n {
            Node::Var(_) => "ellipse",
            Node::Const(_) => "plaintext",
            Node::SymbolRef(_) => "box",
            _ => "circle",
        };
        let extra = if id == root { ", penwidth=2" } else { "" };
        let _ = writeln!(
            out,
            "{indent}n{} [label=\"{}\", shape={shape}{extra}];",
            id.0,
            escape(&label(store, n))
        );
    };
    for (k, b) in store.bindings().iter().enumerate() {
        let members: Vec<NodeId> = ids
            .iter()
            .copied()
            .filter(|id| owner.get(id) == Some(&k))
            .collect();
        if members.is_empty() {
            continue;
        }
        let _ = writeln!(
            out,
            "  subgraph cluster_{k} {{\n    label=\"{}\";",
            escape(&b.name)
        );
        for id in members {
            node_line(&mut out, id, "    ");
        }
        out.push_str("  }\n");
    }
    for &id in ids.iter().filter(|id| !owner.contains_key(id)) {
        node_line(&mut out, id, "  ");
    }
    for &id in &ids {
        let n = store.node(id);
        match n {
            Node::SymbolRef(b) => {
                if let Ok(b) = store.binding(b) {
                    let _ = writeln!(out, "  n{} -> n{} [style=dashed];", b.root.0, id.0);
                }
            }
            _ => {
                for (i, c) in n.children().enumerate() {
                    let port = match (n, i) {
                        (Node::Binary(..), 0) => " [label=\"L\"]",
                        (Node::Binary(..), _) => " [label=\"R\"]",
                        _ => "",
                    };
                    let _ = writeln!(out, "  n{} -> n{}{port};", c.0, id.0);
                }
            }
        }
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Serialize)]
pub struct JsonNode {
    pub id: u32,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub op: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<u32>,
}

#[derive(Debug, Serialize)]
pub struct JsonBinding {
    pub name: String,
    pub root: u32,
}

#[derive(Debug, Serialize)]
pub struct JsonGraph {
    pub vars: Vec<String>,
    pub root: u32,
    pub nodes: Vec<JsonNode>,
    pub bindings: Vec<JsonBinding>,
}

/// The reachable part of the store; ids are the store's own.
pub fn to_json_graph(store: &ExprStore, root: NodeId) -> JsonGraph {
    let nodes = store
        .reachable_ids(root)
        .into_iter()
        .map(|id| {
            let n = store.node(id);
            let (kind, op, name, value) = match n {
                Node::Var(v) => ("var", None, store.var_name(v).map(String::from), None),
                Node::Const(c) => ("const", None, None, Some(c)),
                Node::Unary(op, _) => ("unary", Some(op.to_string()), None, None),
                Node::Binary(op, _, _) => ("binary", Some(op.to_string()), None, None),
                Node::SymbolRef(b) => (
                    "symbol",
                    None,
                    store.binding(b).ok().map(|b| b.name.clone()),
                    None,
                ),
            };
            JsonNode {
                id: id.0,
                kind,
                op,
                name,
                value,
                children: n.children().map(|c| c.0).collect(),
            }
        })
        .collect();
    JsonGraph {
        vars: store.vars().to_vec(),
        root: root.0,
        nodes,
        bindings: store
            .bindings()
            .iter()
            .map(|b| JsonBinding {
                name: b.name.clone(),
                root: b.root.0,
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use adsym_core::{parse_expr, to_forest};

    #[test]
    fn figure_one_dot() {
        let f = parse_expr("sin(x1+x2)*cos(x1+x2)").unwrap();
        let dot = to_dot(&f.store, f.root);
        assert_eq!(dot.matches("shape=").count(), 6);
        assert_eq!(dot.matches(" -> ").count(), 6);
        assert!(dot.contains("n0 -> n2 [label=\"L\"];"));
        assert!(dot.contains("n2 -> n3;"));
        assert!(dot.starts_with("digraph expr {"));
    }

    #[test]
    fn forest_dot_has_clusters() {
        let f = parse_expr("sin(x1+x2)*cos(x1+x2)").unwrap();
        let forest = to_forest(&f.store, f.root).unwrap();
        let dot = to_dot(&forest.store, forest.main);
        assert!(dot.contains("subgraph cluster_0"));
        assert!(dot.contains("label=\"t1\""));
        assert!(dot.contains("style=dashed"));
    }

    #[test]
    fn json_graph() {
        let f = parse_expr("x*2").unwrap();
        let g = to_json_graph(&f.store, f.root);
        let v = serde_json::to_value(&g).unwrap();
        assert_eq!(v["root"], 2);
        assert_eq!(v["nodes"][1]["value"], 2.0);
        assert_eq!(v["nodes"][2]["children"], serde_json::json!([0, 1]));
    }
}
