//! JSON input documents, palette files and manual arrangements.

use std::fs;
use std::path::{Path, PathBuf};

use blocksets_core::arranger::{parse_placements, PartPlacement};
use blocksets_core::color::Rgb;
use blocksets_core::model::{ContentKind, ContentRef, Element, IntegrityError, SetDef, SetSystem, Span};
use blocksets_core::{ElementId, SetId};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed document: {0}")]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Integrity(#[from] IntegrityError),
    #[error("bad palette: {0}")]
    Palette(String),
    #[error("bad manual arrangement: {0}")]
    Arrangement(String),
}

/// The document does not match the expected JSON shape.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct SchemaError(#[from] serde_json::Error);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
enum KindDto {
    Text,
    ImagePath,
    RawSvgFragment,
}

impl From<KindDto> for ContentKind {
    fn from(k: KindDto) -> Self {
        match k {
            KindDto::Text => ContentKind::Text,
            KindDto::ImagePath => ContentKind::ImagePath,
            KindDto::RawSvgFragment => ContentKind::RawSvgFragment,
        }
    }
}

impl From<ContentKind> for KindDto {
    fn from(k: ContentKind) -> Self {
        match k {
            ContentKind::Text => KindDto::Text,
            ContentKind::ImagePath => KindDto::ImagePath,
            ContentKind::RawSvgFragment => KindDto::RawSvgFragment,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContentDto {
    kind: KindDto,
    payload: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpanDto {
    #[serde(alias = "startOffset")]
    start: usize,
    #[serde(alias = "endOffset")]
    end: usize,
    #[serde(alias = "setId")]
    set: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElementDto {
    id: String,
    content: ContentDto,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    spans: Vec<SpanDto>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetDto {
    id: String,
    /// Defaults to the id.
    #[serde(default)]
    name: Option<String>,
    members: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentDto {
    elements: Vec<ElementDto>,
    sets: Vec<SetDto>,
}

/// Parses and validates an input document.
pub fn parse_set_system(document: &str) -> Result<SetSystem, InputError> {
    let doc: DocumentDto = serde_json::from_str(document).map_err(SchemaError::from)?;
    let elements = doc
        .elements
        .into_iter()
        .map(|e| Element {
            id: ElementId::new(e.id),
            content: ContentRef {
                kind: e.content.kind.into(),
                payload: e.content.payload,
            },
            spans: e
                .spans
                .into_iter()
                .map(|s| Span {
                    start: s.start,
                    end: s.end,
                    set: SetId::new(s.set),
                })
                .collect(),
        })
        .collect();
    let sets = doc
        .sets
        .into_iter()
        .map(|s| SetDef {
            name: s.name.unwrap_or_else(|| s.id.clone()),
            id: SetId::new(s.id),
            members: s.members.into_iter().map(ElementId::new).collect(),
        })
        .collect();
    Ok(SetSystem::new(elements, sets)?)
}

pub fn read_set_system(path: &Path) -> Result<SetSystem, InputError> {
    parse_set_system(&read(path)?)
}

/// Pretty JSON in the input format; parsing it gives back `sys`.
pub fn to_json(sys: &SetSystem) -> String {
    let doc = DocumentDto {
        elements: sys
            .elements()
            .iter()
            .map(|e| ElementDto {
                id: e.id.as_str().to_owned(),
                content: ContentDto {
                    kind: e.content.kind.into(),
                    payload: e.content.payload.clone(),
                },
                spans: e
                    .spans
                    .iter()
                    .map(|s| SpanDto {
                        start: s.start,
                        end: s.end,
                        set: s.set.as_str().to_owned(),
                    })
                    .collect(),
            })
            .collect(),
        sets: sys
            .sets()
            .iter()
            .map(|s| SetDto {
                id: s.id.as_str().to_owned(),
                name: Some(s.name.clone()),
                members: s.members.iter().map(|m| m.as_str().to_owned()).collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("documents always serialize")
}

fn read(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Hex colors separated by whitespace or commas, or a JSON array of them.
pub fn parse_palette(text: &str) -> Result<Vec<Rgb>, InputError> {
    let words: Vec<String> = match serde_json::from_str::<Vec<String>>(text) {
        Ok(v) => v,
        Err(_) => text
            .lines()
            // "# " starts a comment line; colors never have a blank after '#'
            .filter(|l| !(l.trim() == "#" || l.trim_start().starts_with("# ")))
            .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
            .filter(|w| !w.is_empty())
            .map(str::to_owned)
            .collect(),
    };
    let colors = words
        .iter()
        .map(|w| w.parse::<Rgb>().map_err(|e| InputError::Palette(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    if colors.is_empty() {
        return Err(InputError::Palette("no colors".into()));
    }
    Ok(colors)
}

pub fn read_palette(path: &Path) -> Result<Vec<Rgb>, InputError> {
    parse_palette(&read(path)?)
}

pub fn read_manual_arrangement(path: &Path) -> Result<Vec<PartPlacement>, InputError> {
    parse_placements(&read(path)?).map_err(InputError::Arrangement)
}
