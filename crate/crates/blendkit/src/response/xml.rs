//! XML-to-tree conversion.
//!
//! XML has no canonical mapping onto a JSON-like tree, so the crate fixes
//! one convention and applies it everywhere so that dot-paths work
//! uniformly across both serialization formats:
//!
//! - each element becomes a map entry named by its tag;
//! - repeated sibling tags coalesce into a list, in document order;
//! - attributes become keys prefixed with `@`;
//! - an element with only text collapses to that string; when the element
//!   also has attributes or children, the text lands under `#text`;
//! - an element with nothing at all becomes null.

use serde_json::{Map, Value};

use super::DeserializeError;

pub(crate) fn xml_to_tree(text: &str) -> Result<Value, DeserializeError> {
    let doc = roxmltree::Document::parse(text).map_err(|err| {
        let pos = err.pos();
        DeserializeError {
            format: "xml",
            line: Some(pos.row as u64),
            column: Some(pos.col as u64),
            message: err.to_string(),
        }
    })?;

    let root = doc.root_element();
    let mut tree = Map::new();
    tree.insert(root.tag_name().name().to_owned(), convert_element(root));
    Ok(Value::Object(tree))
}

fn convert_element(element: roxmltree::Node<'_, '_>) -> Value {
    let mut map = Map::new();

    for attribute in element.attributes() {
        map.insert(
            format!("@{}", attribute.name()),
            Value::String(attribute.value().to_owned()),
        );
    }

    let mut text = String::new();
    for child in element.children() {
        if child.is_text() {
            text.push_str(child.text().unwrap_or(""));
        } else if child.is_element() {
            let converted = convert_element(child);
            coalesce_insert(&mut map, child.tag_name().name(), converted);
        }
    }
    let text = text.trim();

    if map.is_empty() {
        return if text.is_empty() {
            Value::Null
        } else {
            Value::String(text.to_owned())
        };
    }
    if !text.is_empty() {
        map.insert("#text".to_owned(), Value::String(text.to_owned()));
    }
    Value::Object(map)
}

/// Insert a child under its tag; a repeated tag turns the entry into a list
/// and later occurrences append.
fn coalesce_insert(map: &mut Map<String, Value>, tag: &str, value: Value) {
    match map.get_mut(tag) {
        None => {
            map.insert(tag.to_owned(), value);
        }
        Some(Value::Array(items)) => items.push(value),
        Some(existing) => {
            let first = existing.take();
            *existing = Value::Array(vec![first, value]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn repeated_siblings_coalesce_into_a_list() {
        let tree = xml_to_tree("<r><u>x</u><u>y</u></r>").unwrap();
        assert_eq!(tree, json!({"r": {"u": ["x", "y"]}}));
    }

    #[test]
    fn three_siblings_extend_the_list() {
        let tree = xml_to_tree("<r><u>x</u><u>y</u><u>z</u></r>").unwrap();
        assert_eq!(tree, json!({"r": {"u": ["x", "y", "z"]}}));
    }

    #[test]
    fn attributes_get_at_prefix() {
        let tree = xml_to_tree(r#"<video id="v1"><title>A</title></video>"#).unwrap();
        assert_eq!(tree, json!({"video": {"@id": "v1", "title": "A"}}));
    }

    #[test]
    fn text_beside_children_lands_under_text_key() {
        let tree = xml_to_tree("<p>hello <b>world</b></p>").unwrap();
        assert_eq!(tree, json!({"p": {"b": "world", "#text": "hello"}}));
    }

    #[test]
    fn text_only_element_collapses_to_string() {
        let tree = xml_to_tree("<a><b>text</b></a>").unwrap();
        assert_eq!(tree, json!({"a": {"b": "text"}}));
    }

    #[test]
    fn empty_element_becomes_null() {
        let tree = xml_to_tree("<a><b/></a>").unwrap();
        assert_eq!(tree, json!({"a": {"b": null}}));
    }

    #[test]
    fn attribute_only_element_keeps_the_attribute() {
        let tree = xml_to_tree(r#"<a><b k="v"/></a>"#).unwrap();
        assert_eq!(tree, json!({"a": {"b": {"@k": "v"}}}));
    }

    #[test]
    fn parse_failure_reports_position() {
        let err = xml_to_tree("<a><b></a>").unwrap_err();
        assert_eq!(err.format, "xml");
        assert!(err.line.is_some());
    }

    #[test]
    fn cdata_counts_as_text() {
        let tree = xml_to_tree("<a><![CDATA[raw <text>]]></a>").unwrap();
        assert_eq!(tree, json!({"a": "raw <text>"}));
    }
}
